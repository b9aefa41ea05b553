//! Unbalanced-interferometer analysis of time-bin qubits.
//!
//! In the memory the interferometer is built from the readout itself: the
//! final control π pulse is split into two π/2 halves `Δt` apart, the second
//! carrying phase `Δβ`. The early bin read by the late half and the late bin
//! read by the early half then emit at the same time and interfere.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::ensemble::{self, SimulationSettings};
use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::scheme::LevelScheme;
use crate::sequence::{
    validate_sequence_with, Direction, OpticalPulse, PulseRole, PulseSequence, SequenceMode, StarkPulse,
    ValidatedSequence,
};
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub delta_beta_rad: f64,
    pub intensity: f64,
}

/// `I(Δβ) = I₀(1 + V cos(Δα − Δβ))/2`.
pub fn mzi_fringe(delta_alpha: f64, visibility: f64, delta_betas: &[f64], i0: f64) -> Result<Vec<FringePoint>> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::input(format!("visibility must lie in [0, 1] (got {visibility})")));
    }
    Ok(delta_betas
        .iter()
        .map(|&b| FringePoint {
            delta_beta_rad: b,
            intensity: i0 * (1.0 + visibility * (delta_alpha - b).cos()) / 2.0,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    pub visibility: f64,
    /// Fringe phase Δα in (−π, π].
    pub phase_rad: f64,
}

/// Linear least squares of `c₀ + c₁ cos Δβ + c₂ sin Δβ`; the visibility is
/// `√(c₁² + c₂²)/c₀` and the phase `atan2(c₂, c₁)`.
pub fn fit_fringe(points: &[FringePoint]) -> Result<FringeFit> {
    if points.len() < 3 {
        return Err(Error::input(format!("fringe fit needs at least 3 points (got {})", points.len())));
    }
    let a = DMatrix::from_fn(points.len(), 3, |i, k| match k {
        0 => 1.0,
        1 => points[i].delta_beta_rad.cos(),
        _ => points[i].delta_beta_rad.sin(),
    });
    let b = DVector::from_iterator(points.len(), points.iter().map(|p| p.intensity));
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &s| (l.min(s), h.max(s)));
    if lo <= 1e-10 * hi {
        return Err(Error::NonIdentifiable("phase settings do not separate offset, cosine and sine".into()));
    }
    let c = svd.solve(&b, 1e-14).map_err(|e| Error::Numerical(e.to_string()))?;
    if c[0] <= 0.0 {
        return Err(Error::NonIdentifiable("fringe offset is not positive".into()));
    }
    let amplitude = c[1].hypot(c[2]);
    Ok(FringeFit {
        offset: c[0],
        amplitude,
        visibility: amplitude / c[0],
        phase_rad: c[2].atan2(c[1]),
    })
}

/// Pulse times of the time-bin storage sequence, µs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBinTimings {
    pub early: f64,
    pub late: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t5: f64,
    /// First readout half; the second follows after `late − early`.
    pub half: f64,
    pub t7: f64,
}

impl Default for TimeBinTimings {
    fn default() -> Self {
        TimeBinTimings {
            early: 0.0,
            late: 4.0,
            t1: 5.0,
            t2: 7.0,
            t3: 14.0,
            t5: 24.0,
            half: 30.0,
            t7: 35.0,
        }
    }
}

impl TimeBinTimings {
    pub fn second_half(&self) -> f64 {
        self.half + (self.late - self.early)
    }

    /// Emission time of the interfering (middle) echo.
    pub fn middle_echo(&self) -> f64 {
        self.early - self.t2 - self.t3 + self.t5 + self.second_half()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeBinOptions {
    pub signal_area_rad: f64,
    pub stark_area_v_us_per_cm: f64,
    /// Transitions of (signal, control at t2, t3, t5, readout halves).
    pub transitions: [String; 5],
}

impl Default for TimeBinOptions {
    fn default() -> Self {
        TimeBinOptions {
            signal_area_rad: 0.2,
            stark_area_v_us_per_cm: 9.25,
            transitions: ["a", "b", "d", "b", "d"].map(String::from),
        }
    }
}

/// Early and late signal (the late one carrying `Δα`), three π controls and
/// the split readout with the second half carrying `Δβ`.
pub fn time_bin_sequence(
    scheme: &LevelScheme,
    timings: &TimeBinTimings,
    opts: &TimeBinOptions,
    delta_alpha: f64,
    delta_beta: f64,
) -> Result<ValidatedSequence> {
    let tr = &opts.transitions;
    let pulse = |t: f64, i: usize, area: f64, phase: f64, role, label: &str| OpticalPulse {
        time_us: t,
        transition: tr[i].clone(),
        area_rad: area,
        phase_rad: phase,
        direction: Direction::Forward,
        role,
        label: Some(label.into()),
    };
    let s = opts.signal_area_rad;
    let mid = timings.middle_echo();
    if mid <= timings.t7 {
        return Err(Error::input(format!(
            "interfering echo at {mid} µs would precede the rephasing Stark pulse at {} µs",
            timings.t7
        )));
    }
    let seq = PulseSequence {
        optical: vec![
            pulse(timings.early, 0, s, 0.0, PulseRole::Signal, "e"),
            pulse(timings.late, 0, s, delta_alpha, PulseRole::Signal, "l"),
            pulse(timings.t2, 1, PI, 0.0, PulseRole::Control, "2"),
            pulse(timings.t3, 2, PI, 0.0, PulseRole::Control, "3"),
            pulse(timings.t5, 3, PI, 0.0, PulseRole::Control, "5"),
            pulse(timings.half, 4, FRAC_PI_2, 0.0, PulseRole::ReadoutHalf, "6a"),
            pulse(timings.second_half(), 4, FRAC_PI_2, delta_beta, PulseRole::ReadoutHalf, "6b"),
        ],
        stark: vec![
            StarkPulse {
                time_us: timings.t1,
                area_v_us_per_cm: opts.stark_area_v_us_per_cm,
                sigma_e: 0.0,
            },
            StarkPulse {
                time_us: timings.t7,
                area_v_us_per_cm: opts.stark_area_v_us_per_cm,
                sigma_e: 0.0,
            },
        ],
        detection_window_us: (mid - 1.0, mid + 1.0),
        detection_direction: Direction::Forward,
    };
    validate_sequence_with(&seq, scheme, SequenceMode::TimeBin)
}

/// Runs the oracle once per `Δβ` and integrates the interfering echo.
pub fn simulate_fringe(
    scheme: &LevelScheme,
    material: &MaterialParams,
    settings: &SimulationSettings,
    timings: &TimeBinTimings,
    opts: &TimeBinOptions,
    delta_alpha: f64,
    delta_betas: &[f64],
) -> Result<Vec<FringePoint>> {
    let mid = timings.middle_echo();
    let window = (mid - 1.0, mid + 1.0);
    delta_betas
        .iter()
        .map(|&b| {
            let seq = time_bin_sequence(scheme, timings, opts, delta_alpha, b)?;
            let run = SimulationSettings {
                grid_us: Some(window),
                ..settings.clone()
            };
            let rec = ensemble::simulate(&seq, scheme, material, &run)?;
            Ok(FringePoint {
                delta_beta_rad: b,
                intensity: ensemble::echo_intensity(&rec, window, Direction::Forward)?,
            })
        })
        .collect()
}

/// Silencing area for a material, a convenient default Stark area.
pub fn rephasing_area(material: &MaterialParams) -> f64 {
    units::silencing_area(material.kappa_khz_per_v_cm)
}
