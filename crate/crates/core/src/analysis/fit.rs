//! Weighted least-squares fits of decay and Stark-modulation curves.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use super::lm::{self, LmOptions};
use crate::analytic;
use crate::error::{Error, Result};
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweptVariable {
    /// Excited-state storage time, µs.
    T6MinusT3,
    /// Ground-state storage time, µs.
    T5MinusT2,
    /// Two-pulse echo delay, µs.
    TwoPulseTau,
    /// Second Stark pulse area, V·µs/cm.
    StarkArea,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub swept: SweptVariable,
    pub points: Vec<CurvePoint>,
}

impl DecayCurve {
    pub fn new(swept: SweptVariable, xy: impl IntoIterator<Item = (f64, f64)>) -> Self {
        DecayCurve {
            swept,
            points: xy.into_iter().map(|(x, y)| CurvePoint { x, y, sigma: None }).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.x >= 0.0) {
                return Err(Error::input(format!("point {i}: swept value must be finite and nonnegative")));
            }
            if !p.y.is_finite() {
                return Err(Error::input(format!("point {i}: intensity must be finite")));
            }
            if let Some(s) = p.sigma {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::input(format!("point {i}: sigma must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Per-point σ: the given value, else Poisson `√y` (floored at 10⁻⁶ of
    /// the largest intensity so that empty points keep a finite weight).
    fn sigmas(&self) -> (Vec<f64>, bool) {
        let ymax = self.points.iter().map(|p| p.y).fold(0.0, f64::max);
        let floor = (1e-6 * ymax).max(f64::MIN_POSITIVE);
        let absolute = self.points.iter().all(|p| p.sigma.is_some());
        let s = self
            .points
            .iter()
            .map(|p| p.sigma.unwrap_or_else(|| p.y.max(floor).sqrt()))
            .collect();
        (s, absolute)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayModel {
    /// `A · exp(−π²Γ13²x²/(2 ln 2))`
    #[serde(rename = "eq5-ground")]
    Ground,
    /// `A · exp(−π²Γ35²x²/(2 ln 2) − 2γx)`
    #[serde(rename = "eq5-excited")]
    Excited,
    /// `A · exp(−4γτ)`
    #[serde(rename = "2pe")]
    TwoPulse,
}

impl std::str::FromStr for DecayModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq5-ground" => Ok(DecayModel::Ground),
            "eq5-excited" => Ok(DecayModel::Excited),
            "2pe" => Ok(DecayModel::TwoPulse),
            _ => Err(Error::input(format!(
                "unknown decay model '{s}' (expected eq5-ground, eq5-excited or 2pe)"
            ))),
        }
    }
}

impl DecayModel {
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            DecayModel::Ground => &["amplitude", "gamma13_khz"],
            DecayModel::Excited => &["amplitude", "gamma35_khz", "gamma_khz"],
            DecayModel::TwoPulse => &["amplitude", "gamma_khz"],
        }
    }

    /// Model value; linewidths enter squared, so their sign is irrelevant.
    pub fn eval(self, p: &[f64], x: f64) -> f64 {
        match self {
            DecayModel::Ground => p[0] * analytic::gaussian_spin_factor(p[1], x),
            DecayModel::Excited => {
                p[0] * analytic::gaussian_spin_factor(p[1], x) * (-2.0 * units::cycles(p[2], x)).exp()
            }
            DecayModel::TwoPulse => p[0] * (-4.0 * units::cycles(p[1], x)).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// 1σ; absent when the fit did not converge or the parameter is not
    /// identifiable from the data.
    pub uncertainty: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub parameters: Vec<FitParameter>,
    /// `√Σ((y − model)/σ)²`.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value)
    }
}

const GAUSS: f64 = PI * PI / (2.0 * LN_2) * units::KHZ_US_TO_CYCLES * units::KHZ_US_TO_CYCLES;

/// Linear least squares for `ln y` against the given basis functions.
fn log_linear(points: &[CurvePoint], basis: &[fn(f64) -> f64]) -> Option<Vec<f64>> {
    let rows: Vec<&CurvePoint> = points.iter().filter(|p| p.y > 0.0).collect();
    if rows.len() < basis.len() {
        return None;
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), basis.len(), |i, k| basis[k](rows[i].x));
    let b = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|p| p.y.ln()));
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    Some(sol.iter().cloned().collect())
}

fn initial_guess(model: DecayModel, points: &[CurvePoint]) -> Vec<f64> {
    let ymax = points.iter().map(|p| p.y).fold(0.0, f64::max);
    let fallback = match model {
        DecayModel::Ground => vec![ymax, 10.0],
        DecayModel::Excited => vec![ymax, 10.0, 5.0],
        DecayModel::TwoPulse => vec![ymax, 5.0],
    };
    let width = |c: f64| (-c / GAUSS).max(1.0).sqrt();
    let guess = match model {
        DecayModel::Ground => log_linear(points, &[|_| 1.0, |x| x * x]).map(|c| vec![c[0].exp(), width(c[1])]),
        DecayModel::Excited => log_linear(points, &[|_| 1.0, |x| x, |x| x * x]).map(|c| {
            vec![
                c[0].exp(),
                width(c[2]),
                (-c[1] / (2.0 * units::KHZ_US_TO_CYCLES)).max(0.1),
            ]
        }),
        DecayModel::TwoPulse => log_linear(points, &[|_| 1.0, |x| x])
            .map(|c| vec![c[0].exp(), (-c[1] / (4.0 * units::KHZ_US_TO_CYCLES)).max(0.1)]),
    };
    guess.filter(|g| g.iter().all(|v| v.is_finite())).unwrap_or(fallback)
}

fn finish(
    model: String,
    names: &[&str],
    curve: &DecayCurve,
    out: lm::LmOutcome,
    sign_free: &[usize],
    mut flags: Vec<String>,
) -> FitResult {
    let (_, absolute) = curve.sigmas();
    let n = curve.points.len();
    let dof = n.saturating_sub(names.len()).max(1) as f64;
    let cov = lm::covariance(&out.jacobian);
    if cov.is_none() {
        flags.push("rank-deficient".into());
    }
    if !out.converged {
        flags.push("not-converged".into());
    }
    let scale = if absolute { 1.0 } else { out.cost / dof };
    let mut parameters: Vec<FitParameter> = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let value = if sign_free.contains(&k) { out.x[k].abs() } else { out.x[k] };
            let uncertainty = match (&cov, out.converged) {
                (Some(c), true) => Some((c[(k, k)] * scale).max(0.0).sqrt()),
                _ => None,
            };
            FitParameter {
                name: name.to_string(),
                value,
                uncertainty,
            }
        })
        .collect();
    for p in parameters.iter_mut() {
        if let Some(u) = p.uncertainty {
            if u > p.value.abs() && !flags.iter().any(|f| f.starts_with("poorly-constrained")) {
                flags.push(format!("poorly-constrained: {}", p.name));
            }
        }
    }
    FitResult {
        model,
        parameters,
        residual_norm: out.cost.sqrt(),
        converged: out.converged,
        iterations: out.iterations,
        flags,
    }
}

/// Fits amplitude × the selected decay factor.
///
/// Weighting is by the supplied σ, else Poissonian; with Poisson weights the
/// covariance is rescaled by the reduced χ² since the intensity scale is
/// arbitrary.
pub fn fit_decay(curve: &DecayCurve, model: DecayModel) -> Result<FitResult> {
    curve.validate()?;
    if curve.points.len() < 5 {
        return Err(Error::input(format!("need at least 5 points (got {})", curve.points.len())));
    }
    if curve.points.iter().any(|p| p.y <= 0.0) {
        return Err(Error::input("decay fits need positive intensities"));
    }
    let (sig, _) = curve.sigmas();
    let pts = &curve.points;
    let res = |p: &[f64]| -> Vec<f64> {
        pts.iter()
            .zip(&sig)
            .map(|(pt, s)| (model.eval(p, pt.x) - pt.y) / s)
            .collect()
    };
    let x0 = initial_guess(model, pts);
    let out = lm::minimize(res, &x0, &LmOptions::default());
    if out.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("decay fit diverged".into()));
    }
    let name = serde_json::to_value(model)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    let sign_free: &[usize] = match model {
        DecayModel::Ground | DecayModel::Excited => &[1],
        DecayModel::TwoPulse => &[],
    };
    Ok(finish(name, model.parameter_names(), curve, out, sign_free, Vec::new()))
}

/// Stark-modulated echo intensity after two pulses of which the second has
/// area `a` (V·µs/cm): `I₀[w·cos²(φ/2) + (1 − w)/2]`, `φ = 2·2πκa`,
/// `w = exp(−σ²φ²/2)`.
pub fn stark_modulation(i0: f64, kappa_khz_per_v_cm: f64, sigma: f64, a: f64) -> f64 {
    let phi = 2.0 * units::stark_phase(kappa_khz_per_v_cm, a);
    i0 * crate::pathways::silencing_factor(phi, sigma)
}

/// Fits κ (and the field spread σ) to a sweep of Stark area.
///
/// The data must show an interior minimum; the first one seeds κ, a scan over
/// ±30 % around that guess picks the branch and Levenberg–Marquardt refines
/// `(I₀, κ, σ²)`. Parameters reported: `i0`, `kappa_khz_per_v_cm`, `sigma_e`,
/// and the derived `silencing_area_v_us_per_cm`.
pub fn fit_stark_modulation(curve: &DecayCurve) -> Result<FitResult> {
    curve.validate()?;
    if curve.swept != SweptVariable::StarkArea {
        return Err(Error::input("Stark-modulation fits need a stark-area sweep"));
    }
    if curve.points.len() < 5 {
        return Err(Error::input(format!("need at least 5 points (got {})", curve.points.len())));
    }
    let mut pts = curve.points.clone();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    let ymax = pts.iter().map(|p| p.y).fold(0.0, f64::max);
    if ymax <= 0.0 {
        return Err(Error::NonIdentifiable("all intensities are zero".into()));
    }
    let a_min = (1..pts.len() - 1)
        .find(|&i| pts[i].y < pts[i - 1].y && pts[i].y <= pts[i + 1].y)
        .map(|i| pts[i].x)
        .ok_or_else(|| Error::NonIdentifiable("no modulation minimum in the sampled Stark areas".into()))?;
    if a_min <= 0.0 {
        return Err(Error::NonIdentifiable("modulation minimum at zero area".into()));
    }

    let sorted = DecayCurve {
        swept: curve.swept,
        points: pts,
    };
    let (sig, _) = sorted.sigmas();
    let pts = &sorted.points;
    let model = |p: &[f64], a: f64| {
        let phi = 2.0 * units::stark_phase(p[1], a);
        let w = (-p[2] * phi * phi / 2.0).exp();
        p[0] * (w * (phi / 2.0).cos().powi(2) + (1.0 - w) / 2.0)
    };
    let res = |p: &[f64]| -> Vec<f64> {
        pts.iter()
            .zip(&sig)
            .map(|(pt, s)| (model(p, pt.x) - pt.y) / s)
            .collect()
    };

    // best κ on a scan, with I₀ solved linearly
    let k_guess = 1.0 / (4.0 * a_min * units::KHZ_US_TO_CYCLES);
    let mut best = (f64::INFINITY, k_guess, ymax);
    for i in 0..=600 {
        let k = k_guess * (0.7 + 0.6 * i as f64 / 600.0);
        let shape: Vec<f64> = pts.iter().map(|pt| model(&[1.0, k, 0.0], pt.x)).collect();
        let num: f64 = pts.iter().zip(&shape).zip(&sig).map(|((p, f), s)| p.y * f / (s * s)).sum();
        let den: f64 = shape.iter().zip(&sig).map(|(f, s)| f * f / (s * s)).sum();
        if den <= 0.0 {
            continue;
        }
        let i0 = num / den;
        let c: f64 = res(&[i0, k, 0.0]).iter().map(|r| r * r).sum();
        if c < best.0 {
            best = (c, k, i0);
        }
    }
    let out = lm::minimize(res, &[best.2, best.1, 1e-4], &LmOptions::default());
    if out.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Stark-modulation fit diverged".into()));
    }
    let mut r = finish(
        "stark-modulation".into(),
        &["i0", "kappa_khz_per_v_cm", "sigma_e_squared"],
        &sorted,
        out,
        &[],
        Vec::new(),
    );
    let s2 = r.parameters[2].clone();
    let sigma = s2.value.max(0.0).sqrt();
    r.parameters[2] = FitParameter {
        name: "sigma_e".into(),
        value: sigma,
        uncertainty: s2.uncertainty.map(|u| if sigma > 0.0 { u / (2.0 * sigma) } else { u.sqrt() }),
    };
    let k = &r.parameters[1];
    let area = units::silencing_area(k.value);
    r.parameters.push(FitParameter {
        name: "silencing_area_v_us_per_cm".into(),
        value: area,
        uncertainty: k.uncertainty.map(|u| area * u / k.value),
    });
    Ok(r)
}
