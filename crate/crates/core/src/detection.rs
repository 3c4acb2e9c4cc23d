//! Threshold detectors behind a tree of 3 dB fiber couplers.
//!
//! Mixed states are carried as weighted pure-state ensembles. Detection only
//! depends on photon-number statistics of the detected mode, so diagonal
//! weights are enough.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockState, ModeId};
use crate::transform::ModeTransform;

const ROUTING_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub id: String,
    pub efficiency: f64,
}

/// Nested 50/50 splits ending at detectors.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitterTree {
    Detector(String),
    Split(Box<SplitterTree>, Box<SplitterTree>),
}

impl SplitterTree {
    /// First detector on one output, the rest cascaded on the other:
    /// `(1/2, 1/4, …, 2^-(k-1), 2^-(k-1))`.
    pub fn cascade<S: AsRef<str>>(ids: &[S]) -> Result<Self> {
        match ids {
            [] => Err(Error::InvalidParameter("splitter tree needs a detector".into())),
            [one] => Ok(SplitterTree::Detector(one.as_ref().to_string())),
            [first, rest @ ..] => Ok(SplitterTree::Split(
                Box::new(SplitterTree::Detector(first.as_ref().to_string())),
                Box::new(SplitterTree::cascade(rest)?),
            )),
        }
    }

    /// Probability that a photon entering the tree exits at each detector.
    pub fn routing(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        self.walk(1.0, &mut out);
        out
    }

    fn walk(&self, weight: f64, out: &mut Vec<(String, f64)>) {
        match self {
            SplitterTree::Detector(id) => out.push((id.clone(), weight)),
            SplitterTree::Split(l, r) => {
                l.walk(weight / 2.0, out);
                r.walk(weight / 2.0, out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorSpec {
    detectors: Vec<Detector>,
    routing: Vec<f64>,
}

impl DetectorSpec {
    pub fn new(detectors: Vec<Detector>, routing: Vec<f64>) -> Result<Self> {
        if detectors.is_empty() || detectors.len() != routing.len() {
            return Err(Error::InvalidParameter("one routing weight per detector required".into()));
        }
        let mut ids = BTreeSet::new();
        for d in &detectors {
            if !(0.0..=1.0).contains(&d.efficiency) {
                return Err(Error::InvalidParameter(format!("efficiency of {} outside [0, 1]", d.id)));
            }
            if !ids.insert(d.id.as_str()) {
                return Err(Error::InvalidParameter(format!("detector {} listed twice", d.id)));
            }
        }
        if routing.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
            return Err(Error::InvalidParameter("routing weights must lie in [0, 1]".into()));
        }
        let total: f64 = routing.iter().sum();
        if (total - 1.0).abs() > ROUTING_TOLERANCE {
            return Err(Error::InvalidParameter(format!("routing sums to {total}, not 1")));
        }
        Ok(DetectorSpec { detectors, routing })
    }

    pub fn from_tree(tree: &SplitterTree, efficiency: impl Fn(&str) -> f64) -> Result<Self> {
        let (detectors, routing) = tree
            .routing()
            .into_iter()
            .map(|(id, q)| (Detector { efficiency: efficiency(&id), id }, q))
            .unzip();
        DetectorSpec::new(detectors, routing)
    }

    /// SPC2–SPC4 behind two cascaded couplers, routing (1/2, 1/4, 1/4).
    pub fn cascade3(efficiency: f64) -> Result<Self> {
        DetectorSpec::from_tree(&SplitterTree::cascade(&["SPC2", "SPC3", "SPC4"])?, |_| efficiency)
    }

    /// SPC2–SPC4 with uniform routing (1/3, 1/3, 1/3), for comparison.
    pub fn symmetric3(efficiency: f64) -> Result<Self> {
        let detectors = ["SPC2", "SPC3", "SPC4"]
            .iter()
            .map(|id| Detector { id: id.to_string(), efficiency })
            .collect();
        DetectorSpec::new(detectors, vec![1.0 / 3.0; 3])
    }

    pub fn detectors(&self) -> &[Detector] {
        &self.detectors
    }

    pub fn routing(&self) -> &[f64] {
        &self.routing
    }

    fn index_of(&self, id: &str) -> Result<usize> {
        self.detectors
            .iter()
            .position(|d| d.id == id)
            .ok_or_else(|| Error::UnknownDetector(id.to_string()))
    }

    /// Per-photon probability of being registered at detector `i`.
    pub fn hit_probability(&self, i: usize) -> f64 {
        self.detectors[i].efficiency * self.routing[i]
    }

    pub fn pattern(&self, ids: &[&str]) -> Result<ClickPattern> {
        let set = ids.iter().map(|id| self.index_of(id)).collect::<Result<BTreeSet<_>>>()?;
        Ok(ClickPattern(set))
    }

    pub fn all(&self) -> ClickPattern {
        ClickPattern((0..self.detectors.len()).collect())
    }
}

/// Detectors (by index into a [`DetectorSpec`]) that are required to click.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClickPattern(BTreeSet<usize>);

impl ClickPattern {
    pub fn empty() -> Self {
        ClickPattern(BTreeSet::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

/// Probability that at least the detectors in `pattern` click when `n`
/// photons enter the splitter tree.
///
/// Inclusion–exclusion over the subsets `S` of the pattern that stay dark:
/// `Σ_S (−1)^|S| (1 − Σ_{i∈S} η_i q_i)^n`.
///
/// For a non-empty pattern the signs sum to zero, so each term is taken as
/// `(1 − s)^n − 1`, which keeps full relative precision at small `η`.
pub fn click_probability_given_n(n: u32, spec: &DetectorSpec, pattern: &ClickPattern) -> Result<f64> {
    let idx: Vec<usize> = pattern.indices().collect();
    if idx.iter().any(|&i| i >= spec.detectors.len()) {
        return Err(Error::UnknownDetector(format!("index {:?}", idx)));
    }
    let k = idx.len();
    if k == 0 {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for mask in 1u32..(1u32 << k) {
        let dark: f64 = (0..k).filter(|b| mask & (1 << b) != 0).map(|b| spec.hit_probability(idx[b])).sum();
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let term = if dark >= 1.0 {
            if n == 0 { 0.0 } else { -1.0 }
        } else {
            (n as f64 * (-dark).ln_1p()).exp_m1()
        };
        total += sign * term;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Weighted pure states; weights may sum to less than one, the remainder
/// being discarded branches.
#[derive(Clone, Debug, Default)]
pub struct StateEnsemble {
    members: Vec<(f64, FockState)>,
}

impl StateEnsemble {
    pub fn pure(state: FockState) -> Self {
        StateEnsemble::default().with(1.0, state)
    }

    pub fn empty() -> Self {
        StateEnsemble::default()
    }

    /// Adds a branch; the state is normalized and its squared norm folded
    /// into the weight.
    pub fn with(mut self, weight: f64, state: FockState) -> Self {
        self.push(weight, state);
        self
    }

    pub fn push(&mut self, weight: f64, state: FockState) {
        let n2 = state.norm_sqr();
        if let Some(s) = state.normalized() {
            let w = weight * n2;
            if w > 0.0 {
                self.members.push((w, s));
            }
        }
    }

    pub fn members(&self) -> &[(f64, FockState)] {
        &self.members
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|(w, _)| w).sum()
    }

    pub fn apply(&self, t: &ModeTransform) -> Result<StateEnsemble> {
        let mut out = StateEnsemble::default();
        for (w, s) in &self.members {
            out.push(*w, t.apply(s)?);
        }
        Ok(out)
    }

    /// Replaces each member by an ensemble of its own.
    pub fn flat_map(&self, f: impl Fn(&FockState) -> Result<StateEnsemble>) -> Result<StateEnsemble> {
        let mut out = StateEnsemble::default();
        for (w, s) in &self.members {
            for (w2, s2) in f(s)?.members {
                out.members.push((w * w2, s2));
            }
        }
        Ok(out)
    }
}

/// Expected probability per event that `pattern` clicks, with the detector
/// tree fed by `detected`.
pub fn pattern_rate(
    ensemble: &StateEnsemble,
    detected: &ModeId,
    spec: &DetectorSpec,
    pattern: &ClickPattern,
) -> Result<f64> {
    let mut rate = 0.0;
    for (w, state) in ensemble.members() {
        for (n, p) in state.total_number_distribution(std::slice::from_ref(detected))? {
            rate += w * p * click_probability_given_n(n, spec, pattern)?;
        }
    }
    Ok(rate)
}

/// A single threshold trigger detector watching some modes.
#[derive(Clone, Debug)]
pub struct Herald {
    pub modes: Vec<ModeId>,
    pub efficiency: f64,
}

impl Herald {
    pub fn new(modes: Vec<ModeId>, efficiency: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::InvalidParameter(format!("trigger efficiency {efficiency} outside [0, 1]")));
        }
        Ok(Herald { modes, efficiency })
    }

    pub fn click_probability(&self, photons: u32) -> f64 {
        1.0 - (1.0 - self.efficiency).powi(photons as i32)
    }

    /// Branches of `state` conditioned on a trigger click, weighted by the
    /// probability of each herald photon pattern times its click probability.
    pub fn condition(&self, state: &FockState) -> Result<StateEnsemble> {
        let mut out = StateEnsemble::default();
        for (pattern, p) in state.number_distribution(&self.modes)? {
            let m: u32 = pattern.iter().sum();
            let click = self.click_probability(m);
            if click == 0.0 || p == 0.0 {
                continue;
            }
            if let Some(cond) = state.project(&self.modes, &pattern)?.state {
                out.push(p * click, cond);
            }
        }
        Ok(out)
    }

    pub fn success_probability(&self, state: &FockState) -> Result<f64> {
        Ok(self.condition(state)?.total_weight())
    }
}

/// Coincidence rate between the trigger and `pattern`; `post` carries each
/// heralded branch through the rest of the optics to the detected mode.
pub fn heralded_rate(
    state: &FockState,
    herald: &Herald,
    post: impl Fn(&FockState) -> Result<StateEnsemble>,
    detected: &ModeId,
    spec: &DetectorSpec,
    pattern: &ClickPattern,
) -> Result<f64> {
    let heralded = herald.condition(state)?.flat_map(post)?;
    pattern_rate(&heralded, detected, spec, pattern)
}

/// Uncorrelated trigger clicks on the unheralded background.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccidentalModel {
    pub p_false_trigger: f64,
}

impl AccidentalModel {
    pub fn new(p_false_trigger: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_false_trigger) {
            return Err(Error::InvalidParameter(format!("false-trigger probability {p_false_trigger} outside [0, 1]")));
        }
        Ok(AccidentalModel { p_false_trigger })
    }

    pub fn accidental(&self, background: f64) -> Result<f64> {
        check_rate("background", background)?;
        Ok(self.p_false_trigger * background)
    }

    pub fn total(&self, rate_noon: f64, background: f64) -> Result<f64> {
        check_rate("N00N rate", rate_noon)?;
        Ok(rate_noon + self.accidental(background)?)
    }

    pub fn subtract(&self, total: f64, background: f64) -> Result<f64> {
        check_rate("total rate", total)?;
        Ok(total - self.accidental(background)?)
    }
}

fn check_rate(what: &str, x: f64) -> Result<()> {
    if x < 0.0 || x.is_nan() {
        Err(Error::InvalidParameter(format!("{what} must be non-negative, got {x}")))
    } else {
        Ok(())
    }
}

/// Mixes a two-branch state with its phase-randomized version:
/// weight `v0` stays coherent, `1 − v0` is split into the branch with no
/// photon in `branch_mode` and the branch with photons there.
pub fn dephasing_noise(state: &FockState, branch_mode: &ModeId, v0: f64) -> Result<StateEnsemble> {
    if !(0.0..=1.0).contains(&v0) {
        return Err(Error::InvalidParameter(format!("visibility {v0} outside [0, 1]")));
    }
    let (without, with) = state.split_on(branch_mode)?;
    let mut out = StateEnsemble::default();
    out.push(v0, state.clone());
    out.push(1.0 - v0, without);
    out.push(1.0 - v0, with);
    Ok(out)
}
