mod common;

use std::f64::consts::{PI, TAU};

use common::linspace;
use noon_core::analysis::{compare_fit, fit_fringe, fit_gaussian_profile, Envelope, FitData, FringeFit, Verdict};
use noon_core::config::ExperimentConfig;
use noon_core::record::ScanRecord;
use noon_core::scenario::{resample, Experiment};
use noon_core::spatial::ExperimentGeometry;
use rayon::prelude::*;

fn experiment() -> Experiment {
    Experiment::new(&ExperimentConfig::default_config()).unwrap()
}

fn max_relative_residual(fit: &FringeFit, data: &FitData) -> f64 {
    let peak = data.y.iter().cloned().fold(0.0, f64::max);
    data.x.iter().zip(&data.y).map(|(&x, &y)| (fit.evaluate(x) - y).abs()).fold(0.0, f64::max) / peak
}

#[test]
fn noiseless_spatial_fits_are_exact() {
    let scan = experiment().run_spatial_scan().unwrap();
    let d1 = FitData::expected(&scan.n1).unwrap();
    let d3 = FitData::expected(&scan.n3).unwrap();
    let f1 = fit_fringe(&d1, Envelope::Gaussian).unwrap();
    let f3 = fit_fringe(&d3, Envelope::Gaussian).unwrap();
    assert!(max_relative_residual(&f1, &d1) < 1e-8);
    assert!(max_relative_residual(&f3, &d3) < 1e-8);
    assert!((f1.visibility - 1.0).abs() < 1e-6, "{}", f1.visibility);
    assert!((f3.visibility - 0.49).abs() < 1e-6, "{}", f3.visibility);
    assert!((f1.period / f3.period / 3.0 - 1.0).abs() < 0.005);
    let g = ExperimentGeometry { mode_field_diameter: 5.6e-6, ..Default::default() };
    assert!((f3.period - g.detected_fringe_period(3) * 1e6).abs() < 1e-6);
    assert!(!f1.degenerate && !f3.degenerate);
}

#[test]
fn noiseless_temporal_periods() {
    let scan = experiment().run_temporal_scan().unwrap();
    let fits: Vec<FringeFit> = [&scan.reference, &scan.fourfold_subtracted]
        .iter()
        .map(|r| fit_fringe(&FitData::expected(r).unwrap(), Envelope::Flat).unwrap())
        .collect();
    assert!((fits[0].period - TAU).abs() < 1e-6);
    assert!((fits[1].period - TAU / 3.0).abs() < 1e-6);
    assert!((fits[0].period / fits[1].period / 3.0 - 1.0).abs() < 0.001);
    assert!((fits[1].visibility - 0.86).abs() < 1e-6);
}

#[test]
fn injected_visibility_is_recovered_without_noise() {
    let mut config = ExperimentConfig::default_config();
    for v0 in [0.0, 0.25, 0.49, 1.0] {
        config.noise.spatial_visibility = v0;
        let scan = Experiment::new(&config).unwrap().run_spatial_scan().unwrap();
        let fit = fit_fringe(&FitData::expected(&scan.n3).unwrap(), Envelope::Gaussian).unwrap();
        assert!((fit.visibility - v0).abs() < 1e-6, "V0 {v0}: {}", fit.visibility);
    }
}

fn coverage(record: &ScanRecord, envelope: Envelope, truth: f64, seeds: u64) -> (f64, f64, Vec<FringeFit>) {
    let fits: Vec<FringeFit> = (0..seeds)
        .into_par_iter()
        .map(|s| fit_fringe(&FitData::sampled(&resample(record, 1000 + s).unwrap()).unwrap(), envelope).unwrap())
        .collect();
    let within = |k: f64| {
        fits.iter().filter(|f| (f.visibility - truth).abs() < k * f.visibility_err).count() as f64 / fits.len() as f64
    };
    (within(1.0), within(2.0), fits)
}

#[test]
fn spatial_visibility_errors_are_calibrated() {
    let scan = experiment().run_spatial_scan().unwrap();
    let (one, two, fits) = coverage(&scan.n3, Envelope::Gaussian, 0.49, 200);
    assert!((0.60..=0.76).contains(&one), "1σ coverage {one}");
    assert!(two >= 0.90, "2σ coverage {two}");
    let above = fits.iter().filter(|f| compare_fit(f, 3).map(|c| c.verdict == Verdict::Above).unwrap_or(false)).count();
    assert!(above >= 180, "{above}");
}

#[test]
fn temporal_visibility_errors_are_calibrated() {
    let scan = experiment().run_temporal_scan().unwrap();
    let (one, two, fits) = coverage(&scan.fourfold_subtracted, Envelope::Flat, 0.86, 200);
    assert!((0.60..=0.76).contains(&one), "1σ coverage {one}");
    assert!(two >= 0.90, "2σ coverage {two}");
    let periods: Vec<f64> = fits.iter().map(|f| f.period).collect();
    let mean = periods.iter().sum::<f64>() / periods.len() as f64;
    assert!((mean / (TAU / 3.0) - 1.0).abs() < 0.002, "{mean}");
}

struct WidthStats {
    coverage_2sigma: f64,
    mean: f64,
    sd: f64,
    mean_err: f64,
}

fn width_stats(record: &ScanRecord, truth: f64, seeds: u64) -> (WidthStats, Vec<f64>) {
    let fits: Vec<(f64, f64)> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let f = fit_gaussian_profile(&FitData::sampled(&resample(record, 5000 + s).unwrap()).unwrap()).unwrap();
            (f.w0, f.w0_err)
        })
        .collect();
    let n = fits.len() as f64;
    let mean = fits.iter().map(|f| f.0).sum::<f64>() / n;
    let sd = (fits.iter().map(|f| (f.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mean_err = fits.iter().map(|f| f.1).sum::<f64>() / n;
    let covered = fits.iter().filter(|f| (f.0 - truth).abs() < 2.0 * f.1).count() as f64 / n;
    (WidthStats { coverage_2sigma: covered, mean, sd, mean_err }, fits.iter().map(|f| f.0).collect())
}

#[test]
fn profile_width_errors() {
    let scan = experiment().run_profile_scan().unwrap();
    let g = ExperimentGeometry::default();
    let (t1, t3) = (g.profile_half_width(1) * 1e6, g.profile_half_width(3) * 1e6);
    let (s1, w1) = width_stats(&scan.n1, t1, 2000);
    let (s3, w3) = width_stats(&scan.n3, t3, 2000);
    assert!(s1.coverage_2sigma >= 0.95, "N=1 2σ coverage {}", s1.coverage_2sigma);
    // the three-photon profile has ~30 counts at the peak; its errors are
    // calibrated on average but the low-count tail keeps 2σ coverage near 94%
    assert!(s3.coverage_2sigma >= 0.90, "N=3 2σ coverage {}", s3.coverage_2sigma);
    for (s, truth) in [(&s1, t1), (&s3, t3)] {
        assert!((s.mean / truth - 1.0).abs() < 0.01, "mean {} vs {truth}", s.mean);
        assert!((s.mean_err / s.sd - 1.0).abs() < 0.1, "err {} vs sd {}", s.mean_err, s.sd);
    }
    let narrower = w1.iter().zip(&w3).filter(|(a, b)| b < a).count();
    assert_eq!(narrower, w1.len());
}

#[test]
fn gaussian_fit_rejects_bad_input() {
    let xs = linspace(-5.0, 5.0, 5);
    let y = xs.iter().map(|x: &f64| (-x * x).exp()).collect();
    assert!(fit_gaussian_profile(&FitData::uniform(xs, y).unwrap()).is_err());
    let xs = linspace(0.0, 10.0, 21);
    let y = xs.iter().map(|x| (-(x / 3.0f64).powi(2)).exp()).collect();
    assert!(fit_gaussian_profile(&FitData::uniform(xs, y).unwrap()).is_err());
}

#[test]
fn fringe_fit_is_shift_invariant() {
    let xs = linspace(0.0, 6.0 * PI, 61);
    let y: Vec<f64> = xs.iter().map(|x| 500.0 * (1.0 + 0.6 * (3.0 * x + 0.4).cos())).collect();
    let shifted: Vec<f64> = xs.iter().map(|x| 500.0 * (1.0 + 0.6 * (3.0 * x + 1.9).cos())).collect();
    let a = fit_fringe(&FitData::uniform(xs.clone(), y).unwrap(), Envelope::Flat).unwrap();
    let b = fit_fringe(&FitData::uniform(xs, shifted).unwrap(), Envelope::Flat).unwrap();
    assert!((a.visibility - b.visibility).abs() < 1e-8);
    assert!((a.period - b.period).abs() < 1e-8);
}
