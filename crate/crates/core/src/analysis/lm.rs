//! Damped Gauss–Newton (Levenberg–Marquardt) for small dense problems.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when the relative step length falls below this.
    pub xtol: f64,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 500,
            ftol: 1e-15,
            xtol: 1e-13,
            lambda0: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// `Σ r²` at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Jacobian at `x`, rows = residuals.
    pub jacobian: DMatrix<f64>,
}

/// Central-difference Jacobian of `f` at `x`.
pub fn numeric_jacobian(f: &impl Fn(&[f64]) -> Vec<f64>, x: &[f64], m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1e-3);
        xp[k] = x[k] + h;
        let fp = f(&xp);
        xp[k] = x[k] - h;
        let fm = f(&xp);
        xp[k] = x[k];
        for i in 0..m {
            j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    j
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimises `Σ residuals(x)²` starting from `x0`.
///
/// Each iteration solves `(JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr`; λ shrinks tenfold
/// after an accepted step and grows tenfold after a rejected one.
pub fn minimize(residuals: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], opts: &LmOptions) -> LmOutcome {
    let mut x = x0.to_vec();
    let mut r = residuals(&x);
    let m = r.len();
    let mut cost = cost_of(&r);
    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = numeric_jacobian(&residuals, &x, m);

    while iterations < opts.max_iter {
        iterations += 1;
        if cost < 1e-30 {
            converged = true;
            break;
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..x.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = residuals(&trial);
            let ct = cost_of(&rt);
            if ct.is_finite() && ct <= cost {
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let small_step = step.norm() <= opts.xtol * (xnorm + opts.xtol);
                let small_gain = cost - ct <= opts.ftol * cost;
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        jac = numeric_jacobian(&residuals, &x, m);
        if converged {
            break;
        }
        if !accepted {
            // no downhill step at any damping: x is a stationary point
            converged = g_is_small(&jac, &r);
            break;
        }
    }
    LmOutcome {
        x,
        cost,
        iterations,
        converged,
        jacobian: jac,
    }
}

fn g_is_small(jac: &DMatrix<f64>, r: &[f64]) -> bool {
    let g = jac.transpose() * DVector::from_column_slice(r);
    let scale = jac.norm() * cost_of(r).sqrt();
    g.norm() <= 1e-8 * scale.max(1e-300)
}

/// `(JᵀJ)⁻¹` if the Jacobian has full column rank, judged on the column-
/// normalised Jacobian so that parameter scale does not matter.
pub fn covariance(jac: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let norms: Vec<f64> = jac.column_iter().map(|c| c.norm()).collect();
    let max = norms.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 || norms.iter().any(|&n| n <= 1e-12 * max) {
        return None;
    }
    let mut scaled = jac.clone();
    for (k, &n) in norms.iter().enumerate() {
        scaled.column_mut(k).scale_mut(1.0 / n);
    }
    let sv = scaled.clone().svd(false, false).singular_values;
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &s| (l.min(s), h.max(s)));
    if lo <= 1e-9 * hi {
        return None;
    }
    let inv = (scaled.transpose() * &scaled).try_inverse()?;
    let mut cov = inv;
    for i in 0..norms.len() {
        for j in 0..norms.len() {
            cov[(i, j)] /= norms[i] * norms[j];
        }
    }
    Some(cov)
}
