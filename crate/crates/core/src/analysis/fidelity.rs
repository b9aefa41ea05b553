//! Time-bin qubit storage fidelities.
//!
//! Basis states are scored from signal and noise counts, superposition
//! states from interference visibilities; the total weights poles 1/3 and
//! the equator 2/3.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fidelity of a basis state from its noise-subtracted signal `S` and noise
/// `N`: `(S + N)/(S + 2N)`.
pub fn pole_fidelity(s: f64, n: f64) -> Result<f64> {
    if !(s >= 0.0 && n >= 0.0 && s + 2.0 * n > 0.0) {
        return Err(Error::input(format!(
            "counts must be nonnegative with S + 2N > 0 (got S = {s}, N = {n})"
        )));
    }
    Ok((s + n) / (s + 2.0 * n))
}

/// Fidelity of a superposition state from its fringe visibility: `(1 + V)/2`.
pub fn equator_fidelity(v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::input(format!("visibility must lie in [0, 1] (got {v})")));
    }
    Ok((1.0 + v) / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelitySummary {
    pub f_poles: f64,
    pub f_equator: f64,
    pub f_total: f64,
}

pub fn total_fidelity(f_e: f64, f_l: f64, f_plus: f64, f_minus: f64) -> Result<FidelitySummary> {
    for (name, f) in [("F_e", f_e), ("F_l", f_l), ("F_+", f_plus), ("F_-", f_minus)] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::input(format!("{name} must lie in [0, 1] (got {f})")));
        }
    }
    let f_poles = (f_e + f_l) / 2.0;
    let f_equator = (f_plus + f_minus) / 2.0;
    Ok(FidelitySummary {
        f_poles,
        f_equator,
        f_total: f_poles / 3.0 + 2.0 * f_equator / 3.0,
    })
}

/// Measured qubit data. Count uncertainties default to counting statistics
/// (`√S`, `√N`); visibility uncertainties default to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitInput {
    pub s_e: f64,
    pub n_e: f64,
    pub s_l: f64,
    pub n_l: f64,
    /// Visibility of the Δβ = 0 fringe (|+⟩ state).
    pub v_0: f64,
    /// Visibility of the Δβ = 90° fringe (|−⟩ state).
    pub v_90: f64,
    #[serde(default)]
    pub sigma: Option<QubitSigma>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QubitSigma {
    pub s_e: Option<f64>,
    pub n_e: Option<f64>,
    pub s_l: Option<f64>,
    pub n_l: Option<f64>,
    pub v_0: Option<f64>,
    pub v_90: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitResult {
    pub input: QubitInput,
    pub f_e: Estimate,
    pub f_l: Estimate,
    pub f_plus: Estimate,
    pub f_minus: Estimate,
    pub f_poles: Estimate,
    pub f_equator: Estimate,
    pub f_total: Estimate,
    /// Standard deviation of F_T from Monte-Carlo resampling, if requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_total_mc_sigma: Option<f64>,
}

fn pole_sigma(s: f64, n: f64, ds: f64, dn: f64) -> f64 {
    let d = (s + 2.0 * n).powi(2);
    ((n / d * ds).powi(2) + (s / d * dn).powi(2)).sqrt()
}

impl QubitInput {
    fn sigmas(&self) -> [f64; 6] {
        let s = self.sigma.clone().unwrap_or_default();
        [
            s.s_e.unwrap_or(self.s_e.sqrt()),
            s.n_e.unwrap_or(self.n_e.sqrt()),
            s.s_l.unwrap_or(self.s_l.sqrt()),
            s.n_l.unwrap_or(self.n_l.sqrt()),
            s.v_0.unwrap_or(0.0),
            s.v_90.unwrap_or(0.0),
        ]
    }
}

/// All fidelities with first-order propagated uncertainties; `mc_samples`
/// additionally resamples the inputs as Gaussians (clamped to the physical
/// range) with a fixed seed.
pub fn qubit_fidelity(input: &QubitInput, mc_samples: Option<(usize, u64)>) -> Result<QubitResult> {
    let [ds_e, dn_e, ds_l, dn_l, dv0, dv90] = input.sigmas();
    if [ds_e, dn_e, ds_l, dn_l, dv0, dv90].iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::input("uncertainties must be finite and nonnegative"));
    }
    let f_e = pole_fidelity(input.s_e, input.n_e)?;
    let f_l = pole_fidelity(input.s_l, input.n_l)?;
    let f_plus = equator_fidelity(input.v_0)?;
    let f_minus = equator_fidelity(input.v_90)?;
    let sum = total_fidelity(f_e, f_l, f_plus, f_minus)?;

    let se = pole_sigma(input.s_e, input.n_e, ds_e, dn_e);
    let sl = pole_sigma(input.s_l, input.n_l, ds_l, dn_l);
    let (sp, sm) = (dv0 / 2.0, dv90 / 2.0);
    let s_poles = (se * se + sl * sl).sqrt() / 2.0;
    let s_eq = (sp * sp + sm * sm).sqrt() / 2.0;
    let s_total = ((s_poles / 3.0).powi(2) + (2.0 * s_eq / 3.0).powi(2)).sqrt();

    let f_total_mc_sigma = match mc_samples {
        Some((n, seed)) if n >= 2 => Some(monte_carlo(input, [ds_e, dn_e, ds_l, dn_l, dv0, dv90], n, seed)?),
        Some(_) => return Err(Error::input("Monte-Carlo propagation needs at least 2 samples")),
        None => None,
    };

    let est = |value, sigma| Estimate { value, sigma };
    Ok(QubitResult {
        input: input.clone(),
        f_e: est(f_e, se),
        f_l: est(f_l, sl),
        f_plus: est(f_plus, sp),
        f_minus: est(f_minus, sm),
        f_poles: est(sum.f_poles, s_poles),
        f_equator: est(sum.f_equator, s_eq),
        f_total: est(sum.f_total, s_total),
        f_total_mc_sigma,
    })
}

fn monte_carlo(input: &QubitInput, sig: [f64; 6], n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = [input.s_e, input.n_e, input.s_l, input.n_l, input.v_0, input.v_90];
    let dists: Vec<Normal<f64>> = mean
        .iter()
        .zip(sig)
        .map(|(&m, s)| Normal::new(m, s).map_err(|e| Error::input(e.to_string())))
        .collect::<Result<_>>()?;
    let mut acc = Vec::with_capacity(n);
    for _ in 0..n {
        let d: Vec<f64> = dists.iter().map(|d| d.sample(&mut rng)).collect();
        let c = |x: f64| x.max(0.0);
        let v = |x: f64| x.clamp(0.0, 1.0);
        let (Ok(fe), Ok(fl)) = (pole_fidelity(c(d[0]), c(d[1])), pole_fidelity(c(d[2]), c(d[3]))) else {
            continue;
        };
        let t = total_fidelity(fe, fl, (1.0 + v(d[4])) / 2.0, (1.0 + v(d[5])) / 2.0)?;
        acc.push(t.f_total);
    }
    let m = acc.iter().sum::<f64>() / acc.len() as f64;
    let var = acc.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (acc.len() as f64 - 1.0);
    Ok(var.sqrt())
}
