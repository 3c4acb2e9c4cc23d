//! Wave plates, beam splitters, polarizers and the polarization-to-path mode
//! converter, each as a [`ModeTransform`] on a declared mode set.
//!
//! Conventions (all real where possible):
//!
//! * HWP at θ: `a†_H ↦ cos2θ a†_H + sin2θ a†_V`, `a†_V ↦ sin2θ a†_H − cos2θ a†_V`.
//! * QWP at θ: Jones matrix `R(−θ)·diag(1, i)·R(θ)`, so two quarter-wave
//!   plates at the same angle make exactly the half-wave plate above.
//! * PPBS: H fully transmitted; `a†_V ↦ r a†_V,refl + t a†_V,trans`, and the
//!   second (usually vacant) input port maps with `(t, −r)`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeId, ModeSet, Polarization};
use crate::transform::ModeTransform;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn jones(modes: &Arc<ModeSet>, path: &str, j: [[Complex64; 2]; 2]) -> Result<ModeTransform> {
    let (h, v) = (ModeId::h(path), ModeId::v(path));
    ModeTransform::from_images(
        modes,
        &[
            (h.clone(), vec![(h.clone(), j[0][0]), (v.clone(), j[1][0])]),
            (v.clone(), vec![(h, j[0][1]), (v, j[1][1])]),
        ],
    )
}

pub fn hwp(modes: &Arc<ModeSet>, path: &str, theta: f64) -> Result<ModeTransform> {
    let (s, c) = (2.0 * theta).sin_cos();
    jones(modes, path, [[re(c), re(s)], [re(s), re(-c)]])
}

pub fn qwp(modes: &Arc<ModeSet>, path: &str, theta: f64) -> Result<ModeTransform> {
    let (s, c) = theta.sin_cos();
    let i = Complex64::i();
    // R(−θ)·diag(1, i)·R(θ) with R(θ) = [[c, s], [−s, c]]
    let j = [
        [re(c * c) + i * s * s, re(c * s) - i * s * c],
        [re(s * c) - i * c * s, re(s * s) + i * c * c],
    ];
    jones(modes, path, j)
}

/// Partially polarizing beam splitter with amplitude reflectivity `r_v` for
/// vertical polarization; horizontal light is fully transmitted.
pub fn ppbs(
    modes: &Arc<ModeSet>,
    input: &str,
    reflected: &str,
    transmitted: &str,
    r_v: f64,
    second_input: Option<&str>,
) -> Result<ModeTransform> {
    if !(0.0..=1.0).contains(&r_v) || r_v.is_nan() {
        return Err(Error::InvalidParameter(format!("PPBS reflectivity {r_v} outside [0, 1]")));
    }
    if reflected == transmitted {
        return Err(Error::InvalidParameter("PPBS output ports must differ".into()));
    }
    let t_v = (1.0 - r_v * r_v).sqrt();
    let mut images = vec![
        (ModeId::h(input), vec![(ModeId::h(transmitted), re(1.0))]),
        (
            ModeId::v(input),
            vec![(ModeId::v(reflected), re(r_v)), (ModeId::v(transmitted), re(t_v))],
        ),
    ];
    if let Some(other) = second_input {
        images.push((ModeId::h(other), vec![(ModeId::h(reflected), re(1.0))]));
        images.push((
            ModeId::v(other),
            vec![(ModeId::v(reflected), re(t_v)), (ModeId::v(transmitted), re(-r_v))],
        ));
    }
    ModeTransform::from_images(modes, &images)
}

/// Polarizing beam splitter: H transmitted, V reflected.
pub fn pbs(modes: &Arc<ModeSet>, input: &str, transmitted: &str, reflected: &str) -> Result<ModeTransform> {
    ppbs(modes, input, reflected, transmitted, 1.0, None)
}

/// Ideal polarizer; the blocked polarization is routed into `loss`, which
/// must be vacuum on input.
pub fn polarizer(modes: &Arc<ModeSet>, path: &str, pass: Polarization, loss: &ModeId) -> Result<ModeTransform> {
    if loss.path == path {
        return Err(Error::LossModeCollision(loss.to_string()));
    }
    block(modes, &ModeId::new(path, pass.orthogonal()), loss)
}

/// Routes one mode entirely into a loss mode.
pub fn block(modes: &Arc<ModeSet>, mode: &ModeId, loss: &ModeId) -> Result<ModeTransform> {
    if mode == loss {
        return Err(Error::LossModeCollision(loss.to_string()));
    }
    ModeTransform::from_images(modes, &[(mode.clone(), vec![(loss.clone(), re(1.0))])])
}

pub fn phase(modes: &Arc<ModeSet>, mode: &ModeId, phi: f64) -> Result<ModeTransform> {
    ModeTransform::from_images(modes, &[(mode.clone(), vec![(mode.clone(), Complex64::from_polar(1.0, phi))])])
}

/// `(in, H) ↦ (a, H)`, `(in, V) ↦ (b, H)`: both output arms share H.
pub fn mode_converter(modes: &Arc<ModeSet>, input: &str, a: &str, b: &str) -> Result<ModeTransform> {
    if a == b {
        return Err(Error::InvalidParameter("mode converter arms must differ".into()));
    }
    ModeTransform::from_images(
        modes,
        &[
            (ModeId::h(input), vec![(ModeId::h(a), re(1.0))]),
            (ModeId::v(input), vec![(ModeId::h(b), re(1.0))]),
        ],
    )
}

/// Beam spacing `d = 2 L sin θ` behind the birefringent prism pair.
pub fn geometry_spacing(walk_off: f64, theta: f64) -> Result<f64> {
    if walk_off <= 0.0 || walk_off.is_nan() {
        return Err(Error::InvalidParameter(format!("walk-off {walk_off} must be positive")));
    }
    Ok(2.0 * walk_off * theta.sin())
}

/// Couples two input modes into one output mode with amplitudes `v`, sending
/// the remainder into two auxiliary modes.
///
/// The auxiliary block is the positive square root of `I − v†v`, which makes
/// the two columns orthonormal for any `|v| ≤ 1`.
pub fn two_mode_coupler(
    modes: &Arc<ModeSet>,
    inputs: [&ModeId; 2],
    v: [Complex64; 2],
    output: &ModeId,
    aux: [&ModeId; 2],
) -> Result<ModeTransform> {
    let norm2 = v[0].norm_sqr() + v[1].norm_sqr();
    if norm2 > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("coupler amplitudes exceed unit norm ({norm2})")));
    }
    let shrink = 1.0 - (1.0 - norm2.min(1.0)).sqrt();
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let delta = if r == c { 1.0 } else { 0.0 };
            let proj = if norm2 > 0.0 { v[r].conj() * v[c] / norm2 } else { Complex64::new(0.0, 0.0) };
            *cell = re(delta) - proj * shrink;
        }
    }
    let images: Vec<(ModeId, Vec<(ModeId, Complex64)>)> = (0..2)
        .map(|c| {
            (
                inputs[c].clone(),
                vec![(output.clone(), v[c]), (aux[0].clone(), m[0][c]), (aux[1].clone(), m[1][c])],
            )
        })
        .collect();
    ModeTransform::from_images(modes, &images)
}

/// One entry of an element chain in the experiment config.
///
/// `phase_scan` wave plates rotate by an additional `χ/4`, which shifts the
/// relative phase of the two circular components by `χ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementSpec {
    Hwp {
        path: String,
        angle_deg: f64,
        #[serde(default)]
        phase_scan: bool,
    },
    Qwp {
        path: String,
        angle_deg: f64,
        #[serde(default)]
        phase_scan: bool,
    },
    Pbs {
        input: String,
        transmitted: String,
        reflected: String,
    },
    Ppbs {
        input: String,
        reflected: String,
        transmitted: String,
        r_v: f64,
    },
    Polarizer {
        path: String,
        #[serde(default = "default_pass")]
        pass: Polarization,
        loss: String,
    },
    Phase {
        path: String,
        pol: Polarization,
        phase_deg: f64,
    },
    ModeConverter {
        input: String,
        a: String,
        b: String,
    },
}

fn default_pass() -> Polarization {
    Polarization::H
}

impl ElementSpec {
    pub fn build(&self, modes: &Arc<ModeSet>, chi: f64) -> Result<ModeTransform> {
        let scan = |on: bool| if on { chi / 4.0 } else { 0.0 };
        match self {
            ElementSpec::Hwp { path, angle_deg, phase_scan } => {
                hwp(modes, path, angle_deg.to_radians() + scan(*phase_scan))
            }
            ElementSpec::Qwp { path, angle_deg, phase_scan } => {
                qwp(modes, path, angle_deg.to_radians() + scan(*phase_scan))
            }
            ElementSpec::Pbs { input, transmitted, reflected } => pbs(modes, input, transmitted, reflected),
            ElementSpec::Ppbs { input, reflected, transmitted, r_v } => {
                ppbs(modes, input, reflected, transmitted, *r_v, None)
            }
            ElementSpec::Polarizer { path, pass, loss } => polarizer(modes, path, *pass, &ModeId::h(loss.as_str())),
            ElementSpec::Phase { path, pol, phase_deg } => {
                phase(modes, &ModeId::new(path.as_str(), *pol), phase_deg.to_radians())
            }
            ElementSpec::ModeConverter { input, a, b } => mode_converter(modes, input, a, b),
        }
    }

    /// Every path label the element touches, loss paths included.
    pub fn paths(&self) -> Vec<&str> {
        match self {
            ElementSpec::Hwp { path, .. } | ElementSpec::Qwp { path, .. } | ElementSpec::Phase { path, .. } => {
                vec![path]
            }
            ElementSpec::Pbs { input, transmitted, reflected } => vec![input, transmitted, reflected],
            ElementSpec::Ppbs { input, reflected, transmitted, .. } => vec![input, reflected, transmitted],
            ElementSpec::Polarizer { path, loss, .. } => vec![path, loss],
            ElementSpec::ModeConverter { input, a, b } => vec![input, a, b],
        }
    }

    pub fn loss_path(&self) -> Option<&str> {
        match self {
            ElementSpec::Polarizer { loss, .. } => Some(loss),
            _ => None,
        }
    }
}

/// Composes a chain of elements in order; loss paths must be unique.
pub fn compose(modes: &Arc<ModeSet>, chain: &[ElementSpec], chi: f64) -> Result<ModeTransform> {
    let mut seen = std::collections::BTreeSet::new();
    for e in chain {
        if let Some(l) = e.loss_path() {
            if !seen.insert(l) {
                return Err(Error::LossModeCollision(ModeId::h(l).to_string()));
            }
        }
    }
    chain
        .iter()
        .try_fold(ModeTransform::identity(modes), |acc, e| acc.then(&e.build(modes, chi)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{CreationMonomial, FockState};
    use crate::transform::TransformKind;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8};

    fn modes() -> Arc<ModeSet> {
        ModeSet::from_paths(&["src", "1", "2", "a", "b", "loss0", "x", "y", "z"]).unwrap()
    }

    #[test]
    fn hwp_fast_axis_flips_vertical() {
        let m = modes();
        let s = FockState::basis(&m, &[(ModeId::v("2"), 1)]).unwrap();
        let out = hwp(&m, "2", 0.0).unwrap().apply(&s).unwrap();
        let amp = out.amplitude(&[(ModeId::v("2"), 1)]).unwrap();
        assert!((amp - re(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn hwp_at_22_5_makes_diagonal() {
        let m = modes();
        let s = FockState::basis(&m, &[(ModeId::h("2"), 1)]).unwrap();
        let out = hwp(&m, "2", FRAC_PI_8).unwrap().apply(&s).unwrap();
        let diag = FockState::from_monomials(
            &m,
            &[
                CreationMonomial::new(FRAC_1_SQRT_2, [(ModeId::h("2"), 1)]),
                CreationMonomial::new(FRAC_1_SQRT_2, [(ModeId::v("2"), 1)]),
            ],
        )
        .unwrap();
        assert!(out.max_amplitude_deviation_mod_phase(&diag).unwrap() < 1e-15);
    }

    #[test]
    fn two_quarter_waves_make_a_half_wave() {
        let m = modes();
        for theta in [0.0, 0.3, FRAC_PI_4, 1.1] {
            let q = qwp(&m, "2", theta).unwrap();
            let qq = q.then(&q).unwrap();
            let h = hwp(&m, "2", theta).unwrap();
            for (i, o) in [("H", "H"), ("H", "V"), ("V", "H"), ("V", "V")] {
                let pol = |s: &str| if s == "H" { ModeId::h("2") } else { ModeId::v("2") };
                let a = qq.coefficient(&pol(i), &pol(o)).unwrap();
                let b = h.coefficient(&pol(i), &pol(o)).unwrap();
                assert!((a - b).norm() < 1e-15, "theta {theta} {i}->{o}");
            }
        }
    }

    #[test]
    fn qwp_eigenmode_at_zero() {
        let m = modes();
        let s = FockState::basis(&m, &[(ModeId::h("2"), 1)]).unwrap();
        let out = qwp(&m, "2", 0.0).unwrap().apply(&s).unwrap();
        assert!(out.distance_mod_phase(&s).unwrap() < 1e-15);
    }

    #[test]
    fn ppbs_limits() {
        let m = modes();
        let v = FockState::basis(&m, &[(ModeId::v("src"), 1)]).unwrap();
        let h = FockState::basis(&m, &[(ModeId::h("src"), 1)]).unwrap();
        let straight = ppbs(&m, "src", "1", "2", 0.0, None).unwrap();
        let out = straight.apply(&v).unwrap();
        assert!((out.amplitude(&[(ModeId::v("2"), 1)]).unwrap() - re(1.0)).norm() < 1e-15);
        let mirror = ppbs(&m, "src", "1", "2", 1.0, None).unwrap();
        let out = mirror.apply(&v).unwrap();
        assert!((out.amplitude(&[(ModeId::v("1"), 1)]).unwrap() - re(1.0)).norm() < 1e-15);
        let out = mirror.apply(&h).unwrap();
        assert!((out.amplitude(&[(ModeId::h("2"), 1)]).unwrap() - re(1.0)).norm() < 1e-15);
        assert!(ppbs(&m, "src", "1", "2", 1.2, None).is_err());
    }

    #[test]
    fn ppbs_with_both_ports_is_orthonormal() {
        let m = modes();
        let t = ppbs(&m, "src", "1", "2", (2.0f64 / 3.0).sqrt(), Some("x")).unwrap();
        assert!(t.orthonormality_deviation() < 1e-15);
    }

    #[test]
    fn polarizer_passes_h_and_dumps_v() {
        let m = modes();
        let pol = polarizer(&m, "2", Polarization::H, &ModeId::h("loss0")).unwrap();
        assert_eq!(pol.kind(), TransformKind::Isometry);
        let h = FockState::basis(&m, &[(ModeId::h("2"), 1)]).unwrap();
        let out = pol.apply(&h).unwrap();
        assert!((out.amplitude(&[(ModeId::h("2"), 1)]).unwrap() - re(1.0)).norm() < 1e-15);
        let v = FockState::basis(&m, &[(ModeId::v("2"), 1)]).unwrap();
        let out = pol.apply(&v).unwrap();
        let survive = out.total_number_distribution(&[ModeId::h("2")]).unwrap();
        assert_eq!(survive.get(&1).copied().unwrap_or(0.0), 0.0);
        assert!((out.amplitude(&[(ModeId::h("loss0"), 1)]).unwrap() - re(1.0)).norm() < 1e-15);
        assert!(matches!(
            polarizer(&m, "2", Polarization::H, &ModeId::h("2")),
            Err(Error::LossModeCollision(_))
        ));
    }

    #[test]
    fn converter_maps_polarization_to_paths() {
        let m = modes();
        let conv = mode_converter(&m, "2", "a", "b").unwrap();
        let diag = FockState::from_monomials(
            &m,
            &[
                CreationMonomial::new(FRAC_1_SQRT_2, [(ModeId::h("2"), 1)]),
                CreationMonomial::new(FRAC_1_SQRT_2, [(ModeId::v("2"), 1)]),
            ],
        )
        .unwrap();
        let out = conv.apply(&diag).unwrap();
        let expect = FockState::from_monomials(
            &m,
            &[
                CreationMonomial::new(FRAC_1_SQRT_2, [(ModeId::h("a"), 1)]),
                CreationMonomial::new(FRAC_1_SQRT_2, [(ModeId::h("b"), 1)]),
            ],
        )
        .unwrap();
        assert!(out.max_amplitude_deviation_mod_phase(&expect).unwrap() < 1e-15);
        let vac = FockState::vacuum(&m);
        assert!(conv.apply(&vac).unwrap().distance_mod_phase(&vac).unwrap() < 1e-15);
        assert!(mode_converter(&m, "2", "a", "nowhere").is_err());
    }

    #[test]
    fn spacing_from_prism_geometry() {
        assert_eq!(geometry_spacing(1e-3, 0.0).unwrap(), 0.0);
        assert!((geometry_spacing(1e-3, 30f64.to_radians()).unwrap() - 1e-3).abs() < 1e-15);
        let theta = (2.2f64 / 4.0).asin();
        assert!((geometry_spacing(2e-3, theta).unwrap() - 2.2e-3).abs() < 1e-15);
        assert!(geometry_spacing(0.0, 0.1).is_err());
    }

    #[test]
    fn coupler_is_isometric() {
        let m = modes();
        let v = [Complex64::from_polar(0.6, 0.3), Complex64::from_polar(0.5, -1.2)];
        let t = two_mode_coupler(&m, [&ModeId::h("a"), &ModeId::h("b")], v, &ModeId::h("x"), [&ModeId::h("y"), &ModeId::h("z")])
            .unwrap();
        assert!(t.orthonormality_deviation() < 1e-14);
        assert!((t.coefficient(&ModeId::h("b"), &ModeId::h("x")).unwrap() - v[1]).norm() < 1e-15);
    }

    #[test]
    fn chain_rejects_reused_loss_path() {
        let m = modes();
        let p = ElementSpec::Polarizer { path: "2".into(), pass: Polarization::H, loss: "loss0".into() };
        assert!(matches!(compose(&m, &[p.clone(), p], 0.0), Err(Error::LossModeCollision(_))));
    }

    #[test]
    fn element_spec_parses_from_toml() {
        #[derive(Deserialize)]
        struct Chain {
            elements: Vec<ElementSpec>,
        }
        let c: Chain = toml::from_str(
            r#"
            elements = [
              { kind = "hwp", path = "2", angle_deg = 0.0, phase_scan = true },
              { kind = "polarizer", path = "2", loss = "loss0" },
            ]"#,
        )
        .unwrap();
        assert_eq!(c.elements.len(), 2);
        assert_eq!(c.elements[1].loss_path(), Some("loss0"));
    }
}
