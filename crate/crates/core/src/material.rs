use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureShape {
    Gaussian,
    Lorentzian,
    Square,
}

/// Material and preparation parameters of the doped crystal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Linear Stark coefficient, kHz per V/cm.
    pub kappa_khz_per_v_cm: f64,
    pub optical_depth: f64,
    /// Inhomogeneous FWHM of the ground spin transition, kHz.
    pub gamma13_khz: f64,
    /// Inhomogeneous FWHM of the excited spin transition, kHz.
    pub gamma35_khz: f64,
    /// Effective optical decoherence rate, kHz.
    pub gamma_khz: f64,
    /// FWHM of the prepared optical absorption feature, MHz.
    pub feature_width_mhz: f64,
    pub feature_shape: FeatureShape,
}

impl MaterialParams {
    /// Values measured for site-1 Eu³⁺:Y₂SiO₅ in the forward configuration.
    pub fn eu_yso_forward() -> Self {
        MaterialParams {
            kappa_khz_per_v_cm: 27.5,
            optical_depth: 1.3,
            gamma13_khz: 17.4,
            gamma35_khz: 21.9,
            gamma_khz: 11.0,
            feature_width_mhz: 2.0,
            feature_shape: FeatureShape::Gaussian,
        }
    }

    /// Linewidths fitted from the backward decay curves.
    pub fn eu_yso_backward() -> Self {
        MaterialParams {
            gamma13_khz: 16.6,
            gamma35_khz: 24.3,
            ..Self::eu_yso_forward()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa_khz_per_v_cm", self.kappa_khz_per_v_cm),
            ("optical_depth", self.optical_depth),
            ("gamma13_khz", self.gamma13_khz),
            ("gamma35_khz", self.gamma35_khz),
            ("gamma_khz", self.gamma_khz),
            ("feature_width_mhz", self.feature_width_mhz),
        ];
        let bad: Vec<String> = fields
            .iter()
            .filter(|(_, v)| !(v.is_finite() && *v >= 0.0))
            .map(|(n, v)| format!("{n} must be finite and nonnegative (got {v})"))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(bad.join("; ")))
        }
    }
}
