//! Two collimated Gaussian beams focused by a thin lens and sampled by a
//! scanning single-mode fiber tip.
//!
//! In the focal plane each arm is a Gaussian spot of field radius
//! `a = λf/(πW)` (W the collimated 1/e² intensity radius) carrying a linear
//! phase `±k x` with `k = π d/(λ f)`. The fiber couples the overlap with its
//! own Gaussian mode of field radius `b = mfd/2`:
//!
//! ```text
//! A(x) = a/√S · exp(−x²/S) · exp(±i k x a²/S) · exp(−k² a² b² / (4S)),   S = a² + b²
//! ```
//!
//! so the detected carrier is `k a²/S`, slightly slower than the focal-plane
//! carrier `k`, and the envelope widens from `a` to `√S`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGeometry {
    /// Centre-to-centre spacing of the two arms (m).
    pub spacing: f64,
    /// Collimated 1/e² intensity diameter of each arm (m).
    pub beam_diameter: f64,
    pub wavelength: f64,
    pub focal_length: f64,
    /// 1/e² mode-field diameter of the scanning fiber (m); zero means point
    /// sampling of the focal field.
    pub mode_field_diameter: f64,
    /// Relative phase of arm b after group-delay compensation.
    pub relative_phase: f64,
}

impl Default for ExperimentGeometry {
    fn default() -> Self {
        ExperimentGeometry {
            spacing: 2.2e-3,
            beam_diameter: 1.05e-3,
            wavelength: 780e-9,
            focal_length: 15e-3,
            mode_field_diameter: 5.6e-6,
            relative_phase: 0.0,
        }
    }
}

impl ExperimentGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beam_diameter", self.beam_diameter),
            ("wavelength", self.wavelength),
            ("focal_length", self.focal_length),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("spacing", self.spacing), ("mode_field_diameter", self.mode_field_diameter)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.relative_phase.is_finite() {
            return Err(Error::InvalidParameter("relative_phase must be finite".into()));
        }
        Ok(())
    }

    /// Field 1/e radius of the focal spot.
    pub fn focal_radius(&self) -> f64 {
        self.wavelength * self.focal_length / (std::f64::consts::PI * self.beam_diameter / 2.0)
    }

    pub fn fiber_radius(&self) -> f64 {
        self.mode_field_diameter / 2.0
    }

    /// Linear phase gradient of each arm at the focus.
    pub fn arm_wavenumber(&self) -> f64 {
        std::f64::consts::PI * self.spacing / (self.wavelength * self.focal_length)
    }

    /// `λf/(N d)`: fringe period of the focal-plane intensity.
    pub fn focal_fringe_period(&self, n: u32) -> f64 {
        self.wavelength * self.focal_length / (n as f64 * self.spacing)
    }

    /// Fringe period seen through the fiber: the focal period stretched by
    /// `S/a²`.
    pub fn detected_fringe_period(&self, n: u32) -> f64 {
        let (a, b) = (self.focal_radius(), self.fiber_radius());
        self.focal_fringe_period(n) * (a * a + b * b) / (a * a)
    }

    /// 1/e half-width `w₀` of the N-photon profile `exp[−(x/w₀)²]`.
    pub fn profile_half_width(&self, n: u32) -> f64 {
        let (a, b) = (self.focal_radius(), self.fiber_radius());
        ((a * a + b * b) / (2.0 * n as f64)).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

impl Arm {
    fn sign(self) -> f64 {
        match self {
            Arm::A => 1.0,
            Arm::B => -1.0,
        }
    }
}

/// Focal-plane field of one arm, peak modulus 1.
pub fn focal_field(x: f64, geometry: &ExperimentGeometry, arm: Arm) -> Complex64 {
    let a = geometry.focal_radius();
    let k = geometry.arm_wavenumber() * arm.sign();
    Complex64::from_polar((-(x / a).powi(2)).exp(), k * x)
}

/// Overlap of one arm's focal field with the fiber mode centred at `x`,
/// normalized by the fiber mode area so that `mfd → 0` recovers the focal
/// field.
pub fn fiber_overlap(x: f64, geometry: &ExperimentGeometry, arm: Arm) -> Complex64 {
    let a = geometry.focal_radius();
    let b = geometry.fiber_radius();
    let s = a * a + b * b;
    let k = geometry.arm_wavenumber() * arm.sign();
    let modulus = a / s.sqrt() * (-x * x / s - k * k * a * a * b * b / (4.0 * s)).exp();
    Complex64::from_polar(modulus, k * x * a * a / s)
}

/// `|A_a^N + e^{iNφ₀} A_b^N|² / 2`, the N-photon absorption rate of
/// `(|N,0⟩ + |0,N⟩)/√2` with arm b delayed by the phase `φ₀`.
pub fn noon_spatial_rate(x: f64, geometry: &ExperimentGeometry, n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("photon number must be at least 1".into()));
    }
    let aa = fiber_overlap(x, geometry, Arm::A).powu(n);
    let ab = fiber_overlap(x, geometry, Arm::B).powu(n);
    Ok((aa + Complex64::from_polar(1.0, n as f64 * geometry.relative_phase) * ab).norm_sqr() / 2.0)
}

/// `|A_open|^{2N}`: one arm blocked.
pub fn profile_rate(x: f64, geometry: &ExperimentGeometry, n: u32, open: Arm) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("photon number must be at least 1".into()));
    }
    Ok(fiber_overlap(x, geometry, open).norm_sqr().powi(n as i32))
}

/// Largest visibility of the `Nφ` harmonic reachable by classical fields
/// under N-th order intensity detection: the `cos Nφ` coefficient of
/// `(1 + cos φ)^N` over its mean.
pub fn classical_visibility_bound(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("photon number must be at least 1".into()));
    }
    // Exact DFT of a trigonometric polynomial of degree N.
    let samples = 4 * n as usize + 4;
    let (mut dc, mut harmonic) = (0.0, 0.0);
    for j in 0..samples {
        let phi = 2.0 * std::f64::consts::PI * j as f64 / samples as f64;
        let v = (1.0 + phi.cos()).powi(n as i32);
        dc += v;
        harmonic += v * (n as f64 * phi).cos();
    }
    dc /= samples as f64;
    harmonic *= 2.0 / samples as f64;
    Ok(harmonic / dc)
}

/// Complex overlaps and rates along a line of fiber positions.
#[derive(Clone, Debug)]
pub struct SpatialScan {
    pub positions: Vec<f64>,
    pub overlap_a: Vec<Complex64>,
    pub overlap_b: Vec<Complex64>,
    /// `(N, rates)` for every requested N.
    pub rates: Vec<(u32, Vec<f64>)>,
}

impl SpatialScan {
    pub fn compute(geometry: &ExperimentGeometry, positions: &[f64], photon_numbers: &[u32]) -> Result<Self> {
        geometry.validate()?;
        let rates = photon_numbers
            .iter()
            .map(|&n| {
                positions
                    .iter()
                    .map(|&x| noon_spatial_rate(x, geometry, n))
                    .collect::<Result<Vec<_>>>()
                    .map(|r| (n, r))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpatialScan {
            positions: positions.to_vec(),
            overlap_a: positions.iter().map(|&x| fiber_overlap(x, geometry, Arm::A)).collect(),
            overlap_b: positions.iter().map(|&x| fiber_overlap(x, geometry, Arm::B)).collect(),
            rates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(geometry: ExperimentGeometry) -> ExperimentGeometry {
        ExperimentGeometry { mode_field_diameter: 0.0, ..geometry }
    }

    #[test]
    fn arms_share_envelope() {
        let g = ExperimentGeometry::default();
        for i in -20..=20 {
            let x = i as f64 * 0.7e-6;
            let (ua, ub) = (focal_field(x, &g, Arm::A), focal_field(x, &g, Arm::B));
            assert!((ua.norm() - ub.norm()).abs() < 1e-15);
            let (aa, ab) = (fiber_overlap(x, &g, Arm::A), fiber_overlap(x, &g, Arm::B));
            assert!(((aa / ab).norm() - 1.0).abs() < 1e-12);
            assert!((aa - ab.conj()).norm() < 1e-15);
            assert!((aa - fiber_overlap(-x, &g, Arm::B)).norm() < 1e-15);
        }
    }

    #[test]
    fn focal_period_for_nominal_geometry() {
        let g = ExperimentGeometry::default();
        let p = g.focal_fringe_period(1);
        assert!((p - 780e-9 * 15e-3 / 2.2e-3).abs() < 1e-18);
        assert!((p * 1e6 - 5.318).abs() < 1e-3);
    }

    #[test]
    fn zero_spacing_has_no_fringe() {
        let g = ExperimentGeometry { spacing: 0.0, ..Default::default() };
        let u = focal_field(3e-6, &g, Arm::A);
        assert!(u.im.abs() < 1e-15);
        let r0 = noon_spatial_rate(1e-6, &g, 1).unwrap();
        let env = profile_rate(1e-6, &g, 1, Arm::A).unwrap();
        assert!((r0 - 2.0 * env).abs() < 1e-15);
    }

    #[test]
    fn point_fiber_recovers_focal_field() {
        let g = point(ExperimentGeometry::default());
        for x in [-4e-6, 0.0, 2.5e-6] {
            assert!((fiber_overlap(x, &g, Arm::A) - focal_field(x, &g, Arm::A)).norm() < 1e-15);
        }
    }

    #[test]
    fn dark_center_for_pi_phase() {
        let g = ExperimentGeometry { relative_phase: std::f64::consts::PI, ..Default::default() };
        assert!(noon_spatial_rate(0.0, &g, 1).unwrap() < 1e-30);
    }

    #[test]
    fn rate_is_even_for_symmetric_geometry() {
        let g = ExperimentGeometry::default();
        for n in 1..=4 {
            for i in 1..30 {
                let x = i as f64 * 0.37e-6;
                let (l, r) = (noon_spatial_rate(-x, &g, n).unwrap(), noon_spatial_rate(x, &g, n).unwrap());
                assert!((l - r).abs() <= 1e-14 * l.max(r));
                assert!(l >= 0.0);
            }
        }
    }

    #[test]
    fn profile_cube_property() {
        let g = ExperimentGeometry::default();
        for i in -25..=25 {
            let x = i as f64 * 0.5e-6;
            let p1 = profile_rate(x, &g, 1, Arm::A).unwrap();
            let p3 = profile_rate(x, &g, 3, Arm::A).unwrap();
            let p1_0 = profile_rate(0.0, &g, 1, Arm::A).unwrap();
            let p3_0 = profile_rate(0.0, &g, 3, Arm::A).unwrap();
            let lhs = p3 / p3_0;
            let rhs = (p1 / p1_0).powi(3);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }
        assert!(profile_rate(0.0, &g, 1, Arm::A).unwrap() > profile_rate(1e-7, &g, 1, Arm::A).unwrap());
    }

    #[test]
    fn profile_width_ratio() {
        let g = ExperimentGeometry::default();
        let r = g.profile_half_width(3) / g.profile_half_width(1);
        assert!((r - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn classical_bounds() {
        assert!((classical_visibility_bound(1).unwrap() - 1.0).abs() < 1e-12);
        assert!((classical_visibility_bound(2).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((classical_visibility_bound(3).unwrap() - 0.1).abs() < 1e-12);
        assert!(classical_visibility_bound(0).is_err());
    }

    #[test]
    fn classical_bound_matches_binomial_expansion() {
        // DC of (1+cos)^N is Σ_{k even} C(N,k) C(k,k/2) / 2^k, the cos Nφ
        // coefficient is 2^{1−N}.
        fn choose(n: u64, k: u64) -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        }
        for n in 1..=8u64 {
            let dc: f64 = (0..=n).step_by(2).map(|k| choose(n, k) * choose(k, k / 2) / 2f64.powi(k as i32)).sum();
            let harmonic = 2f64.powi(1 - n as i32);
            let b = classical_visibility_bound(n as u32).unwrap();
            assert!((b - harmonic / dc).abs() < 1e-12, "N={n}");
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        let g = ExperimentGeometry { wavelength: -1.0, ..Default::default() };
        assert!(g.validate().is_err());
        assert!(SpatialScan::compute(&g, &[0.0], &[1]).is_err());
        assert!(noon_spatial_rate(0.0, &ExperimentGeometry::default(), 0).is_err());
    }

    #[test]
    fn scan_holds_rates_per_photon_number() {
        let g = ExperimentGeometry::default();
        let xs: Vec<f64> = (-5..=5).map(|i| i as f64 * 1e-6).collect();
        let scan = SpatialScan::compute(&g, &xs, &[1, 3]).unwrap();
        assert_eq!(scan.rates.len(), 2);
        assert_eq!(scan.rates[1].1.len(), xs.len());
        assert!(scan.rates.iter().all(|(_, r)| r.iter().all(|&v| v >= 0.0)));
    }
}
