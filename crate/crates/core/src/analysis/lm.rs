//! Levenberg–Marquardt for small weighted least-squares problems.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop when the relative chi-square decrease falls below this.
    pub chi2_tolerance: f64,
    pub step_tolerance: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { max_iterations: 400, chi2_tolerance: 1e-14, step_tolerance: 1e-13 }
    }
}

#[derive(Clone, Debug)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub chi2: f64,
    /// `(JᵀWJ)⁻¹` at the optimum, `None` when singular.
    pub covariance: Option<DMatrix<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimizes `Σ ((y − f(x, p)) / σ)²`.
pub fn minimize<F>(f: F, x: &[f64], y: &[f64], sigma: &[f64], start: &[f64], cfg: &LmConfig) -> LmResult
where
    F: Fn(f64, &[f64]) -> f64,
{
    let n = x.len();
    let np = start.len();
    let mut p = start.to_vec();
    let residuals = |p: &[f64]| -> DVector<f64> { DVector::from_iterator(n, (0..n).map(|i| (y[i] - f(x[i], p)) / sigma[i])) };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(n, np);
        let mut q = p.to_vec();
        for k in 0..np {
            let h = 1e-6 * p[k].abs().max(1e-6);
            q[k] = p[k] + h;
            let up: Vec<f64> = (0..n).map(|i| f(x[i], &q)).collect();
            q[k] = p[k] - h;
            let down: Vec<f64> = (0..n).map(|i| f(x[i], &q)).collect();
            q[k] = p[k];
            for i in 0..n {
                j[(i, k)] = (up[i] - down[i]) / (2.0 * h * sigma[i]);
            }
        }
        j
    };

    let mut r = residuals(&p);
    let mut chi2 = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    if !chi2.is_finite() {
        return LmResult { params: p, chi2, covariance: None, converged: false, iterations };
    }

    while iterations < cfg.max_iterations {
        iterations += 1;
        let j = jacobian(&p);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = residuals(&trial);
            let c2 = rt.norm_squared();
            if c2.is_finite() && c2 <= chi2 {
                let rel = (chi2 - c2) / chi2.max(1e-300);
                let step_small = step
                    .iter()
                    .zip(&p)
                    .all(|(s, v)| s.abs() <= cfg.step_tolerance * v.abs().max(1e-8));
                p = trial;
                r = rt;
                chi2 = c2;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < cfg.chi2_tolerance || step_small || chi2 < 1e-28 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step left at any damping: a (local) minimum
            converged = true;
        }
        if converged {
            break;
        }
    }

    let j = jacobian(&p);
    let jtj = j.transpose() * &j;
    let covariance = jtj.try_inverse().filter(|c| (0..np).all(|k| c[(k, k)].is_finite() && c[(k, k)] >= 0.0));
    LmResult { params: p, chi2, covariance, converged, iterations }
}
