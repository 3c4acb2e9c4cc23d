//! Experiment configuration: a TOML document with the blocks `[source]`,
//! `[elements]`, `[detectors]`, `[geometry]`, `[scan]`, `[noise]` and
//! `[output]`. Lengths are given in the units named by the keys (`_mm`,
//! `_um`, `_nm`) and converted to SI by [`ExperimentConfig::geometry`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{AccidentalModel, DetectorSpec};
use crate::elements::ElementSpec;
use crate::error::{Error, Result};
use crate::spatial::ExperimentGeometry;

/// The configuration shipped with the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub elements: ElementsConfig,
    pub detectors: DetectorsConfig,
    pub geometry: GeometryConfig,
    pub scan: ScanConfig,
    pub noise: NoiseConfig,
    pub output: OutputConfig,
}

/// Two photon pairs `½ a_H†² a_V†²|0⟩` enter on `path`; the trigger watches
/// `herald_path` and the analyzers act on `signal_path`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub path: String,
    pub herald_path: String,
    pub signal_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementsConfig {
    /// Source to herald and signal paths (HWP1, PPBS).
    pub preparation: Vec<ElementSpec>,
    /// Heralded polarization state to the two spatial arms (QWP2, mode converter).
    pub conversion: Vec<ElementSpec>,
    /// Temporal analyzer on the signal path; its `phase_scan` plate sets χ.
    pub analyzer: Vec<ElementSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    Cascade,
    Symmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorsConfig {
    /// η of each of SPC2–SPC4.
    pub efficiency: f64,
    /// η_t of the trigger SPC1.
    pub trigger_efficiency: f64,
    pub tree: TreeKind,
}

impl DetectorsConfig {
    pub fn spec(&self) -> Result<DetectorSpec> {
        match self.tree {
            TreeKind::Cascade => DetectorSpec::cascade3(self.efficiency),
            TreeKind::Symmetric => DetectorSpec::symmetric3(self.efficiency),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub spacing_mm: f64,
    pub beam_diameter_mm: f64,
    pub wavelength_nm: f64,
    pub focal_length_mm: f64,
    pub mode_field_diameter_um: f64,
    pub relative_phase_rad: f64,
    /// Fraction of each arm's fiber overlap that is coupled; at most 0.5.
    pub coupling_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub seed: u64,
    pub temporal: TemporalScanConfig,
    pub spatial: SpatialScanConfig,
    pub profile: SpatialScanConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalScanConfig {
    pub chi_start_rad: f64,
    pub chi_stop_rad: f64,
    pub points: usize,
    pub integration_time_s: f64,
    /// Heralded four-fold events/s at the peak of the ideal N00N fringe.
    pub rate_scale: f64,
    /// Two-fold events/s at the peak of the single-photon fringe.
    pub reference_rate_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialScanConfig {
    pub x_start_um: f64,
    pub x_stop_um: f64,
    pub points: usize,
    pub integration_time_s: f64,
    /// Three-photon events/s at the envelope peak.
    pub rate_scale: f64,
    /// Single-photon events/s at the envelope peak.
    pub reference_rate_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// V₀ of the heralded N00N state in the temporal scan.
    pub temporal_visibility: f64,
    /// V₀ of the heralded N00N state in the spatial scan.
    pub spatial_visibility: f64,
    pub p_false_trigger: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, format!("must be positive, got {x}")))
    }
}

fn non_negative(field: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, format!("must be non-negative, got {x}")))
    }
}

fn unit_interval(field: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(field_error(field, format!("must lie in [0, 1], got {x}")))
    }
}

fn grid(field: &str, start: f64, stop: f64, points: usize) -> Result<()> {
    if !start.is_finite() || !stop.is_finite() {
        return Err(field_error(field, "grid bounds must be finite"));
    }
    if points < 2 {
        return Err(field_error(&format!("{field}.points"), format!("need at least 2 points, got {points}")));
    }
    if stop <= start {
        return Err(field_error(field, format!("grid must increase strictly, got {start} .. {stop}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn default_config() -> Self {
        ExperimentConfig::parse(DEFAULT_CONFIG).expect("shipped config parses")
    }

    /// Parses and validates; parse errors carry the TOML line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.source;
        for (f, v) in [("source.path", &s.path), ("source.herald_path", &s.herald_path), ("source.signal_path", &s.signal_path)] {
            if v.is_empty() || v.contains(char::is_whitespace) {
                return Err(field_error(f, "path labels must be non-empty without whitespace"));
            }
        }
        if s.herald_path == s.signal_path {
            return Err(field_error("source.herald_path", "must differ from signal_path"));
        }
        for (block, chain) in [
            ("elements.preparation", &self.elements.preparation),
            ("elements.conversion", &self.elements.conversion),
            ("elements.analyzer", &self.elements.analyzer),
        ] {
            for (i, e) in chain.iter().enumerate() {
                if let ElementSpec::Ppbs { r_v, .. } = e {
                    unit_interval(&format!("{block}[{i}].r_v"), *r_v)?;
                }
                if e.paths().iter().any(|p| p.is_empty() || p.contains(char::is_whitespace)) {
                    return Err(field_error(&format!("{block}[{i}]"), "path labels must be non-empty without whitespace"));
                }
            }
        }
        if self.arms().is_none() {
            return Err(field_error("elements.conversion", "needs a mode_converter entry"));
        }
        if !self.elements.analyzer.iter().any(|e| {
            matches!(e, ElementSpec::Hwp { phase_scan: true, .. } | ElementSpec::Qwp { phase_scan: true, .. })
        }) {
            return Err(field_error("elements.analyzer", "needs a wave plate with phase_scan = true"));
        }

        unit_interval("detectors.efficiency", self.detectors.efficiency)?;
        unit_interval("detectors.trigger_efficiency", self.detectors.trigger_efficiency)?;

        let g = &self.geometry;
        positive("geometry.spacing_mm", g.spacing_mm)?;
        positive("geometry.beam_diameter_mm", g.beam_diameter_mm)?;
        positive("geometry.wavelength_nm", g.wavelength_nm)?;
        positive("geometry.focal_length_mm", g.focal_length_mm)?;
        non_negative("geometry.mode_field_diameter_um", g.mode_field_diameter_um)?;
        if !g.relative_phase_rad.is_finite() {
            return Err(field_error("geometry.relative_phase_rad", "must be finite"));
        }
        if !(g.coupling_efficiency > 0.0 && g.coupling_efficiency <= 0.5) {
            return Err(field_error(
                "geometry.coupling_efficiency",
                format!("must lie in (0, 0.5], got {}", g.coupling_efficiency),
            ));
        }

        let t = &self.scan.temporal;
        grid("scan.temporal", t.chi_start_rad, t.chi_stop_rad, t.points)?;
        non_negative("scan.temporal.integration_time_s", t.integration_time_s)?;
        non_negative("scan.temporal.rate_scale", t.rate_scale)?;
        non_negative("scan.temporal.reference_rate_scale", t.reference_rate_scale)?;
        for (name, sp) in [("scan.spatial", &self.scan.spatial), ("scan.profile", &self.scan.profile)] {
            grid(name, sp.x_start_um, sp.x_stop_um, sp.points)?;
            non_negative(&format!("{name}.integration_time_s"), sp.integration_time_s)?;
            non_negative(&format!("{name}.rate_scale"), sp.rate_scale)?;
            non_negative(&format!("{name}.reference_rate_scale"), sp.reference_rate_scale)?;
        }

        unit_interval("noise.temporal_visibility", self.noise.temporal_visibility)?;
        unit_interval("noise.spatial_visibility", self.noise.spatial_visibility)?;
        unit_interval("noise.p_false_trigger", self.noise.p_false_trigger)?;
        if self.output.dir.is_empty() {
            return Err(field_error("output.dir", "must not be empty"));
        }
        Ok(())
    }

    /// The two spatial arms named by the mode converter.
    pub fn arms(&self) -> Option<(String, String)> {
        self.elements.conversion.iter().find_map(|e| match e {
            ElementSpec::ModeConverter { a, b, .. } => Some((a.clone(), b.clone())),
            _ => None,
        })
    }

    pub fn geometry(&self) -> ExperimentGeometry {
        let g = &self.geometry;
        ExperimentGeometry {
            spacing: g.spacing_mm * 1e-3,
            beam_diameter: g.beam_diameter_mm * 1e-3,
            wavelength: g.wavelength_nm * 1e-9,
            focal_length: g.focal_length_mm * 1e-3,
            mode_field_diameter: g.mode_field_diameter_um * 1e-6,
            relative_phase: g.relative_phase_rad,
        }
    }

    pub fn accidentals(&self) -> Result<AccidentalModel> {
        AccidentalModel::new(self.noise.p_false_trigger)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scan.seed = seed;
        self
    }
}

pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    (0..points).map(|i| start + (stop - start) * i as f64 / (points - 1) as f64).collect()
}
