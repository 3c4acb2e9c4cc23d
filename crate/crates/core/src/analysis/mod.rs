//! Gaussian-profile and fringe fits with covariance-based 1σ errors, and the
//! comparison of fitted visibilities against the classical bound.

mod lm;

pub use lm::{minimize, LmConfig, LmResult};

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::record::ScanRecord;
use crate::spatial::classical_visibility_bound;

/// Points, values and per-point standard deviations.
#[derive(Clone, Debug)]
pub struct FitData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `false` when `sigma` only sets relative weights; the covariance is
    /// then rescaled by the reduced chi-square.
    pub absolute_sigma: bool,
    /// Counts with Poisson variance: after a first fit the weights are
    /// recomputed from the fitted model, `σ² = max(model, 1)`.
    pub poisson: bool,
}

impl FitData {
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != sigma.len() {
            return Err(Error::InvalidParameter("x, y and sigma must have equal length".into()));
        }
        if sigma.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::InvalidParameter("sigma must be positive".into()));
        }
        Ok(FitData { x, y, sigma, absolute_sigma: true, poisson: false })
    }

    /// Poisson weights from raw counts: `σ² = max(count, 1)`.
    pub fn from_counts(x: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        let sigma = counts.iter().map(|&c| c.max(1.0).sqrt()).collect();
        let mut d = FitData::new(x, counts, sigma)?;
        d.poisson = true;
        Ok(d)
    }

    /// Uniform weights, for noiseless model curves.
    pub fn uniform(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        let mut d = FitData::new(x, y, vec![1.0; n])?;
        d.absolute_sigma = false;
        Ok(d)
    }

    pub fn sampled(record: &ScanRecord) -> Result<Self> {
        FitData::from_counts(record.settings(), record.counts())
    }

    pub fn expected(record: &ScanRecord) -> Result<Self> {
        FitData::uniform(record.settings(), record.expected())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn covariance_factor(&self, chi2: f64, params: usize) -> f64 {
        if self.absolute_sigma {
            1.0
        } else {
            chi2 / (self.len() as f64 - params as f64).max(1.0)
        }
    }

    fn reweighted(&self, model: impl Fn(f64) -> f64) -> FitData {
        let sigma = self.x.iter().map(|&x| model(x).max(1.0).sqrt()).collect();
        FitData { sigma, ..self.clone() }
    }

    fn span(&self) -> f64 {
        let (lo, hi) = self.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        hi - lo
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    /// 1/e half-width of `exp[−((x − x₀)/w₀)²]`.
    pub w0: f64,
    pub w0_err: f64,
    pub reduced_chi2: f64,
}

fn gaussian(x: f64, p: &[f64]) -> f64 {
    p[0] * (-((x - p[1]) / p[2]).powi(2)).exp()
}

fn moments(data: &FitData) -> (f64, f64) {
    let w: Vec<f64> = data.y.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = w.iter().sum::<f64>().max(1e-300);
    let mean = data.x.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = data.x.iter().zip(&w).map(|(x, w)| w * (x - mean).powi(2)).sum::<f64>() / total;
    (mean, (2.0 * var).sqrt().max(data.span() / 50.0))
}

/// Weights taken from counts correlate with the noise and bias the fit;
/// refitting with model-based weights removes that.
const POISSON_REFITS: usize = 3;

type Model = fn(f64, &[f64]) -> f64;

fn poisson_refit(data: &FitData, model: Model, first: LmResult) -> (FitData, LmResult) {
    let mut data = data.clone();
    let mut r = first;
    if !data.poisson {
        return (data, r);
    }
    for _ in 0..POISSON_REFITS {
        let p = r.params.clone();
        data = data.reweighted(|x| model(x, &p));
        r = minimize(model, &data.x, &data.y, &data.sigma, &p, &LmConfig::default());
    }
    (data, r)
}

/// Weighted fit of `A exp[−((x − x₀)/w₀)²]`.
pub fn fit_gaussian_profile(data: &FitData) -> Result<GaussianFit> {
    if data.len() < 6 {
        return Err(Error::Fit(format!("profile fit needs at least 6 points, got {}", data.len())));
    }
    let peak = data
        .y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (first, last) = argminmax_x(&data.x);
    if peak == first || peak == last {
        return Err(Error::Fit("profile scan does not span the peak".into()));
    }
    let (x0, w) = moments(data);
    let start = [data.y[peak], x0, w];
    let first = minimize(gaussian, &data.x, &data.y, &data.sigma, &start, &LmConfig::default());
    let (data, r) = poisson_refit(data, gaussian, first);
    let data = &data;
    let cov = match (&r.covariance, r.converged) {
        (Some(c), true) => c,
        _ => return Err(Error::Fit(format!("Gaussian fit did not converge after {} iterations", r.iterations))),
    };
    Ok(GaussianFit {
        amplitude: r.params[0],
        center: r.params[1],
        w0: r.params[2].abs(),
        w0_err: (cov[(2, 2)] * data.covariance_factor(r.chi2, 3)).sqrt(),
        reduced_chi2: r.chi2 / (data.len() as f64 - 3.0).max(1.0),
    })
}

fn argminmax_x(x: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, v) in x.iter().enumerate() {
        if *v < x[lo] {
            lo = i;
        }
        if *v > x[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// `A (1 + V cos(2πx/Λ + φ))`; no separate offset since it would be
    /// degenerate with `A` and `V`.
    Flat,
    /// `A exp[−((x − x₀)/w)²] (1 + V cos(2πx/Λ + φ)) + B`.
    Gaussian,
}

#[derive(Clone, Debug, Serialize)]
pub struct FringeFit {
    pub envelope: Envelope,
    pub amplitude: f64,
    pub offset: f64,
    pub visibility: f64,
    /// Covariance-based 1σ.
    pub visibility_err: f64,
    pub period: f64,
    pub period_err: f64,
    pub phase: f64,
    pub center: Option<f64>,
    pub envelope_width: Option<f64>,
    /// Parameter order: flat `[A, V, Λ, φ]`, Gaussian `[A, x₀, w, V, Λ, φ, B]`.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub reduced_chi2: f64,
    pub converged: bool,
    /// Set when the fit is not trustworthy; see `notes`.
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl FringeFit {
    pub fn evaluate(&self, x: f64) -> f64 {
        let osc = 1.0 + self.visibility * (TAU * x / self.period + self.phase).cos();
        match self.envelope {
            Envelope::Flat => self.amplitude * osc,
            Envelope::Gaussian => {
                let (c, w) = (self.center.unwrap_or(0.0), self.envelope_width.unwrap_or(1.0));
                self.amplitude * (-((x - c) / w).powi(2)).exp() * osc + self.offset
            }
        }
    }
}

fn flat_model(x: f64, p: &[f64]) -> f64 {
    p[0] * (1.0 + p[1] * (TAU * x / p[2] + p[3]).cos())
}

fn gaussian_fringe_model(x: f64, p: &[f64]) -> f64 {
    p[0] * (-((x - p[1]) / p[2]).powi(2)).exp() * (1.0 + p[3] * (TAU * x / p[4] + p[5]).cos()) + p[6]
}

fn gaussian_offset_model(x: f64, p: &[f64]) -> f64 {
    gaussian(x, p) + p[3]
}

/// Weighted linear least squares of `y` on the columns `basis(x)`;
/// returns the coefficients and chi-square.
/// Coefficients and weighted residual sum of squares.
type LinearFit = (Vec<f64>, f64);

fn linear_fit(data: &FitData, basis: &dyn Fn(f64) -> Vec<f64>) -> Option<LinearFit> {
    let rows: Vec<Vec<f64>> = data.x.iter().map(|&x| basis(x)).collect();
    let k = rows.first()?.len();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (i, row) in rows.iter().enumerate() {
        let w = data.sigma[i].powi(-2);
        for p in 0..k {
            b[p] += w * row[p] * data.y[i];
            for q in 0..k {
                a[(p, q)] += w * row[p] * row[q];
            }
        }
    }
    let c = a.cholesky()?.solve(&b);
    let chi2 = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let m: f64 = row.iter().zip(c.iter()).map(|(r, c)| r * c).sum();
            ((data.y[i] - m) / data.sigma[i]).powi(2)
        })
        .sum();
    Some((c.iter().copied().collect(), chi2))
}

/// Scans the period with the envelope held fixed and the model linear in
/// `(A, AV cos φ, AV sin φ, B)`; local chi-square minima, best first, as
/// `(period, A, V, φ, B)`.
fn period_seeds(data: &FitData, envelope: &dyn Fn(f64) -> f64, offset: bool, count: usize) -> Vec<[f64; 5]> {
    let mut dx: Vec<f64> = data.x.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|d| *d > 0.0).collect();
    if dx.is_empty() {
        return vec![];
    }
    dx.sort_by(f64::total_cmp);
    let nyquist = 0.5 / dx[dx.len() / 2];
    let lowest = 0.5 / data.span();
    let steps = 2000;
    let scan: Vec<(f64, Option<LinearFit>)> = (0..=steps)
        .map(|j| {
            let f = lowest + (nyquist - lowest) * j as f64 / steps as f64;
            let basis = move |x: f64| {
                let e = envelope(x);
                let (s, c) = (TAU * f * x).sin_cos();
                let mut v = vec![e, e * c, e * s];
                if offset {
                    v.push(1.0);
                }
                v
            };
            (f, linear_fit(data, &basis))
        })
        .collect();
    let chi = |i: usize| scan[i].1.as_ref().map_or(f64::INFINITY, |r| r.1);
    let mut minima: Vec<usize> = (1..scan.len() - 1)
        .filter(|&i| chi(i) <= chi(i - 1) && chi(i) <= chi(i + 1) && chi(i).is_finite())
        .collect();
    minima.sort_by(|&a, &b| chi(a).total_cmp(&chi(b)));
    minima
        .into_iter()
        .take(count)
        .filter_map(|i| {
            let (f, fit) = (&scan[i].0, scan[i].1.as_ref()?);
            let c = &fit.0;
            let amp = c[0];
            if amp == 0.0 {
                return None;
            }
            // A V cos(kx + φ) = A V cos φ cos kx − A V sin φ sin kx
            let v = c[1].hypot(c[2]) / amp;
            let phi = (-c[2]).atan2(c[1]);
            Some([1.0 / f, amp, v, phi, if offset { c[3] } else { 0.0 }])
        })
        .collect()
}

/// Fits a fringe with the chosen envelope. Period seeds come from a scan of
/// the chi-square over frequency with the envelope fixed; each seed is
/// polished by Levenberg–Marquardt and the lowest chi-square wins.
pub fn fit_fringe(data: &FitData, envelope: Envelope) -> Result<FringeFit> {
    let np = match envelope {
        Envelope::Flat => 4,
        Envelope::Gaussian => 7,
    };
    if data.len() <= np {
        return Err(Error::Fit(format!("{} points cannot constrain {np} parameters", data.len())));
    }
    let span = data.span();
    let cfg = LmConfig::default();

    let (model, starts): (Model, Vec<Vec<f64>>) = match envelope {
        Envelope::Flat => {
            let seeds = period_seeds(data, &|_| 1.0, false, 3);
            (flat_model, seeds.iter().map(|s| vec![s[1], s[2], s[0], s[3]]).collect())
        }
        Envelope::Gaussian => {
            let (x0, w) = moments(data);
            let peak = data.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let g = minimize(gaussian_offset_model, &data.x, &data.y, &data.sigma, &[peak, x0, w, 0.0], &cfg);
            // The fitted Gaussian may lock onto a single fringe lobe; the
            // moment estimate keeps a start with the wide envelope.
            let mut envelopes = vec![(x0, w)];
            if g.params[2].abs() > 0.0 && g.params.iter().all(|p| p.is_finite()) {
                envelopes.push((g.params[1], g.params[2].abs()));
            }
            let starts = envelopes
                .iter()
                .flat_map(|&(c, width)| {
                    period_seeds(data, &|x| (-((x - c) / width).powi(2)).exp(), true, 3)
                        .into_iter()
                        .map(move |s| vec![s[1], c, width, s[2], s[0], s[3], s[4]])
                })
                .collect();
            (gaussian_fringe_model, starts)
        }
    };
    if starts.is_empty() {
        return Err(Error::Fit("no usable period seed".into()));
    }

    let mut best: Option<LmResult> = None;
    for start in &starts {
        let r = minimize(model, &data.x, &data.y, &data.sigma, start, &cfg);
        if r.chi2.is_finite() && best.as_ref().is_none_or(|b| r.chi2 < b.chi2) {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| Error::Fit("fringe fit diverged from every start".into()))?;
    let (data, best) = poisson_refit(data, model, best);
    Ok(finish_fringe(&data, envelope, best, span))
}

fn finish_fringe(data: &FitData, envelope: Envelope, r: LmResult, span: f64) -> FringeFit {
    let p = &r.params;
    let (iv, il, iphi) = match envelope {
        Envelope::Flat => (1, 2, 3),
        Envelope::Gaussian => (3, 4, 5),
    };
    let mut visibility = p[iv];
    let mut period = p[il];
    let mut phase = p[iphi];
    if period < 0.0 {
        period = -period;
        phase = -phase;
    }
    if visibility < 0.0 {
        visibility = -visibility;
        phase += PI;
    }
    phase = (phase + PI).rem_euclid(TAU) - PI;

    let factor = data.covariance_factor(r.chi2, p.len());
    let covariance = r.covariance.as_ref().map(|c| c * factor);
    let err = |i: usize| covariance.as_ref().map_or(f64::INFINITY, |c| c[(i, i)].sqrt());
    let visibility_err = err(iv);
    let period_err = err(il);

    let mut notes = Vec::new();
    if !r.converged {
        notes.push(format!("did not converge within {} iterations", r.iterations));
    }
    if r.covariance.is_none() {
        notes.push("singular normal matrix; uncertainties undefined".into());
    }
    if visibility_err > 1.0 {
        notes.push("visibility unconstrained".into());
    }
    if span / period < 3.0 {
        notes.push(format!("scan covers only {:.2} periods", span / period));
    }
    let degenerate = !notes.is_empty();

    let covariance = covariance
        .as_ref()
        .map(|c| (0..c.nrows()).map(|i| (0..c.ncols()).map(|j| c[(i, j)]).collect()).collect());
    let (center, width, offset) = match envelope {
        Envelope::Flat => (None, None, 0.0),
        Envelope::Gaussian => (Some(p[1]), Some(p[2].abs()), p[6]),
    };
    let dof = (data.len() as f64 - p.len() as f64).max(1.0);
    FringeFit {
        envelope,
        amplitude: p[0],
        offset,
        visibility,
        visibility_err,
        period,
        period_err,
        phase,
        center,
        envelope_width: width,
        covariance,
        reduced_chi2: r.chi2 / dof,
        converged: r.converged,
        degenerate,
        notes,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Above,
    Consistent,
    Below,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundComparison {
    pub photons: u32,
    pub bound: f64,
    pub visibility: f64,
    pub visibility_err: f64,
    /// One-sided `(V − bound)/σ_V`.
    pub z: f64,
    pub verdict: Verdict,
}

/// `above` needs `z > 2`, `below` needs `z < −2`.
pub fn compare_bound(visibility: f64, visibility_err: f64, photons: u32) -> Result<BoundComparison> {
    if visibility_err.is_nan() || visibility_err <= 0.0 {
        return Err(Error::InvalidParameter(format!("visibility uncertainty must be positive, got {visibility_err}")));
    }
    let bound = classical_visibility_bound(photons)?;
    let z = (visibility - bound) / visibility_err;
    let verdict = if z > 2.0 {
        Verdict::Above
    } else if z < -2.0 {
        Verdict::Below
    } else {
        Verdict::Consistent
    };
    Ok(BoundComparison { photons, bound, visibility, visibility_err, z, verdict })
}

pub fn compare_fit(fit: &FringeFit, photons: u32) -> Result<BoundComparison> {
    if fit.degenerate && !fit.visibility_err.is_finite() {
        return Err(Error::Fit("fringe fit has no usable visibility uncertainty".into()));
    }
    compare_bound(fit.visibility, fit.visibility_err, photons)
}
