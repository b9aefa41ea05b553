//! Closed-form efficiency models: retrieval, spin-storage decay, the
//! product efficiency, control-efficiency inference from echo intensities,
//! and impedance-matched cavity retrieval.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::sequence::Direction;
use crate::units;

fn check_depth(d: f64) -> Result<()> {
    if d.is_finite() && d >= 0.0 {
        Ok(())
    } else {
        Err(Error::input(format!("optical depth must be finite and nonnegative (got {d})")))
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::input(format!("{name} must lie in [0, 1] (got {x})")))
    }
}

/// Single-pass echo retrieval efficiency without a cavity.
///
/// Forward retrieval is limited by reabsorption, `d² e^{-d}`; backward
/// retrieval is not, `(1 − e^{-d})²`.
pub fn retrieval_efficiency(d: f64, direction: Direction) -> Result<f64> {
    check_depth(d)?;
    Ok(match direction {
        Direction::Forward => d * d * (-d).exp(),
        Direction::Backward => (-d).exp_m1().powi(2),
    })
}

/// Inhomogeneous Gaussian dephasing of one storage interval: `Γ` FWHM in
/// kHz held for `t` µs.
pub fn gaussian_spin_factor(width_khz: f64, t_us: f64) -> f64 {
    let c = units::cycles(width_khz, t_us);
    (-PI * PI * c * c / (2.0 * LN_2)).exp()
}

/// Spin-storage decay of the Stark echo.
///
/// `a = t5 − t2` is the time spent exposed to the ground spin broadening
/// `Γ13`, `b = t6 − t3` to the excited spin broadening `Γ35`; `γ` damps the
/// excited-state interval as `e^{-2γb}`. Linewidths in kHz, times in µs.
pub fn decay_factor(gamma13_khz: f64, gamma35_khz: f64, gamma_khz: f64, a_us: f64, b_us: f64) -> Result<f64> {
    if !(a_us >= 0.0 && b_us >= 0.0) {
        return Err(Error::input(format!(
            "storage durations must be nonnegative (got a = {a_us}, b = {b_us})"
        )));
    }
    Ok(gaussian_spin_factor(gamma13_khz, a_us)
        * gaussian_spin_factor(gamma35_khz, b_us)
        * (-2.0 * units::cycles(gamma_khz, b_us)).exp())
}

/// Inputs to the product efficiency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyInputs {
    pub optical_depth: f64,
    pub eta_pm: f64,
    pub eta_control: f64,
    pub eta_decay: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBreakdown {
    pub direction: Direction,
    pub eta_retrieval: f64,
    pub eta_pm: f64,
    pub eta_control: f64,
    pub eta_decay: f64,
    pub eta_total: f64,
}

/// `η_total = η_retrieval · η_pm · η_control⁴ · η_decay`.
pub fn total_efficiency(inputs: &EfficiencyInputs, direction: Direction) -> Result<EfficiencyBreakdown> {
    check_unit("eta_pm", inputs.eta_pm)?;
    check_unit("eta_control", inputs.eta_control)?;
    check_unit("eta_decay", inputs.eta_decay)?;
    let eta_retrieval = retrieval_efficiency(inputs.optical_depth, direction)?;
    Ok(EfficiencyBreakdown {
        direction,
        eta_retrieval,
        eta_pm: inputs.eta_pm,
        eta_control: inputs.eta_control,
        eta_decay: inputs.eta_decay,
        eta_total: eta_retrieval * inputs.eta_pm * inputs.eta_control.powi(4) * inputs.eta_decay,
    })
}

/// Decay factor that the product efficiency needs to reach `eta_total`.
pub fn required_decay(inputs: &EfficiencyInputs, eta_total: f64, direction: Direction) -> Result<f64> {
    let base = total_efficiency(&EfficiencyInputs { eta_decay: 1.0, ..*inputs }, direction)?.eta_total;
    if base <= 0.0 {
        return Err(Error::input("remaining factors are zero; no decay factor can reach the target"));
    }
    Ok(eta_total / base)
}

/// Stark-echo to four-level-echo intensity ratio for a control efficiency
/// `η`: the echo sees four π pulses (`η⁴`), a parasitic four-level echo two
/// transfers and two residual branches (`η²(1 − η)²`).
pub fn se_to_4le_ratio(eta_control: f64) -> f64 {
    (eta_control / (1.0 - eta_control)).powi(2)
}

/// Inverts [`se_to_4le_ratio`] after dividing out the decay correction
/// (SE decay factor over the 4LE decay factor).
pub fn infer_control_efficiency(i_se: f64, i_4le: f64, decay_correction: f64) -> Result<f64> {
    if !(i_se > 0.0 && i_4le > 0.0 && decay_correction > 0.0) {
        return Err(Error::input(format!(
            "intensities and decay correction must be positive (got {i_se}, {i_4le}, {decay_correction})"
        )));
    }
    let r = i_se / i_4le / decay_correction;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Numerical(format!("intensity ratio {r} is not usable")));
    }
    let s = r.sqrt();
    Ok(s / (1.0 + s))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    pub r1: f64,
    pub r2: f64,
    pub d: f64,
}

/// Retrieval efficiency of an asymmetric cavity around the memory, with
/// input mirror `R1` and back mirror `R2`.
pub fn cavity_retrieval(c: &CavityParams) -> Result<f64> {
    check_unit("R1", c.r1)?;
    check_unit("R2", c.r2)?;
    check_depth(c.d)?;
    let loss = (-c.d).exp();
    let denom = 1.0 - (c.r1 * c.r2).sqrt() * loss;
    if denom < 1e-6 {
        return Err(Error::Numerical(format!(
            "cavity denominator {denom:.3e} too close to zero (lossless resonant limit)"
        )));
    }
    Ok(4.0 * c.d * c.d * (-2.0 * c.d).exp() * (1.0 - c.r1).powi(2) * c.r2 / denom.powi(4))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityOptimum {
    pub r1: f64,
    pub eta: f64,
}

const PRESCAN: usize = 4000;

/// Input-mirror reflectivity maximising [`cavity_retrieval`].
///
/// A uniform pre-scan over `R1 ∈ [0, 1)` brackets the maximum, then a
/// golden-section search refines it. If the pre-scan finds more than one
/// local maximum the best grid point is refined instead of trusting
/// unimodality.
pub fn optimize_cavity(d: f64, r2: f64) -> Result<CavityOptimum> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::input(format!("optical depth must be positive (got {d})")));
    }
    if !(r2 > 0.0 && r2 <= 1.0) {
        return Err(Error::input(format!("R2 must lie in (0, 1] (got {r2})")));
    }
    let eval = |r1: f64| cavity_retrieval(&CavityParams { r1, r2, d }).unwrap_or(f64::NEG_INFINITY);
    let step = 1.0 / PRESCAN as f64;
    let values: Vec<f64> = (0..PRESCAN).map(|i| eval(i as f64 * step)).collect();
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    let lo = best.saturating_sub(1) as f64 * step;
    let hi = ((best + 1) as f64 * step).min(1.0 - 1e-12);
    let (r1, eta) = golden_max(eval, lo, hi, 1e-12);
    let (r1, eta) = if eta >= values[best] { (r1, eta) } else { (best as f64 * step, values[best]) };
    if !eta.is_finite() {
        return Err(Error::Numerical("cavity efficiency not finite anywhere on R1 ∈ [0, 1)".into()));
    }
    Ok(CavityOptimum { r1, eta })
}

/// Golden-section maximisation on `[lo, hi]` down to an interval of `tol`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    [(x, fx), (x1, f1), (x2, f2)]
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three candidates")
}

/// A split of the storage time between ground (`a`) and excited (`b`) spin
/// storage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySplit {
    pub a_us: f64,
    pub b_us: f64,
    pub eta_decay: f64,
}

/// Finds a split `(a, b)` with `a + b ≤ max_total_us` whose decay factor
/// equals `target` under the given linewidths.
///
/// Along every `a` the factor decreases monotonically in `b`, so each `a`
/// has at most one exact solution; among those within the time budget the
/// most balanced split (smallest `|a − b|`) is returned. `None` if the target
/// cannot be reached within the budget.
pub fn find_decay_split(
    gamma13_khz: f64,
    gamma35_khz: f64,
    gamma_khz: f64,
    target: f64,
    max_total_us: f64,
) -> Result<Option<DecaySplit>> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::input(format!("target decay factor must lie in (0, 1] (got {target})")));
    }
    if !(max_total_us >= 0.0) {
        return Err(Error::input("time budget must be nonnegative"));
    }
    let f = |a: f64, b: f64| decay_factor(gamma13_khz, gamma35_khz, gamma_khz, a, b).expect("nonnegative");
    let steps = 2000;
    let mut best: Option<DecaySplit> = None;
    for i in 0..=steps {
        let a = max_total_us * i as f64 / steps as f64;
        let budget = max_total_us - a;
        let at0 = f(a, 0.0);
        if at0 < target || f(a, budget) > target {
            continue;
        }
        let (mut lo, mut hi) = (0.0, budget);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(a, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = 0.5 * (lo + hi);
        let cand = DecaySplit {
            a_us: a,
            b_us: b,
            eta_decay: f(a, b),
        };
        if best.is_none_or(|s| (cand.a_us - cand.b_us).abs() < (s.a_us - s.b_us).abs()) {
            best = Some(cand);
        }
    }
    Ok(best)
}

/// Range of decay factors reachable with `a + b = total_us`.
pub fn decay_range_at_storage(gamma13_khz: f64, gamma35_khz: f64, gamma_khz: f64, total_us: f64) -> Result<(f64, f64)> {
    if !(total_us >= 0.0) {
        return Err(Error::input("storage time must be nonnegative"));
    }
    let steps = 2000;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=steps {
        let a = total_us * i as f64 / steps as f64;
        let v = decay_factor(gamma13_khz, gamma35_khz, gamma_khz, a, total_us - a)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub d: f64,
    pub eta_fwd: f64,
    pub eta_bwd: f64,
    pub eta_total: f64,
}

/// Retrieval efficiencies over optical depth, plus the product efficiency in
/// `direction` using the remaining factors of `inputs`.
pub fn efficiency_table(depths: &[f64], inputs: &EfficiencyInputs, direction: Direction) -> Result<Vec<EfficiencyRow>> {
    depths
        .iter()
        .map(|&d| {
            let bd = total_efficiency(&EfficiencyInputs { optical_depth: d, ..*inputs }, direction)?;
            Ok(EfficiencyRow {
                d,
                eta_fwd: retrieval_efficiency(d, Direction::Forward)?,
                eta_bwd: retrieval_efficiency(d, Direction::Backward)?,
                eta_total: bd.eta_total,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityRow {
    pub d: f64,
    #[serde(rename = "R1_opt")]
    pub r1_opt: f64,
    pub eta_max: f64,
}

pub fn cavity_table(depths: &[f64], r2: f64) -> Result<Vec<CavityRow>> {
    depths
        .iter()
        .map(|&d| {
            let o = optimize_cavity(d, r2)?;
            Ok(CavityRow {
                d,
                r1_opt: o.r1,
                eta_max: o.eta,
            })
        })
        .collect()
}
