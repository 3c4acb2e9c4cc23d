//! Multimode bosonic states as finite superpositions of occupation-number
//! states.
//!
//! A [`FockState`] lives on a declared [`ModeSet`]. Every mode used by a
//! state, a monomial or a transform must be declared there up front; touching
//! an undeclared mode is an error rather than a silent identity.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes with modulus below this are dropped after every operation.
pub const DEFAULT_PRUNE_TOLERANCE: f64 = 1e-14;

/// Projections with probability below this leave the conditional state
/// undefined.
pub const PROJECTION_FLOOR: f64 = 1e-14;

const NORMALIZED_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn orthogonal(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::H => f.write_str("H"),
            Polarization::V => f.write_str("V"),
        }
    }
}

/// A spatial path label together with a polarization.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId {
    pub path: String,
    pub pol: Polarization,
}

impl ModeId {
    pub fn new(path: impl Into<String>, pol: Polarization) -> Self {
        ModeId { path: path.into(), pol }
    }

    pub fn h(path: impl Into<String>) -> Self {
        ModeId::new(path, Polarization::H)
    }

    pub fn v(path: impl Into<String>) -> Self {
        ModeId::new(path, Polarization::V)
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.pol, self.path)
    }
}

/// The declared mode universe of an experiment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeSet {
    modes: Vec<ModeId>,
    index: BTreeMap<ModeId, usize>,
}

impl ModeSet {
    pub fn new(modes: impl IntoIterator<Item = ModeId>) -> Result<Arc<Self>> {
        let modes: Vec<ModeId> = modes.into_iter().collect();
        if modes.is_empty() {
            return Err(Error::EmptyModeSet);
        }
        let mut index = BTreeMap::new();
        for (i, m) in modes.iter().enumerate() {
            if index.insert(m.clone(), i).is_some() {
                return Err(Error::DuplicateMode(m.to_string()));
            }
        }
        Ok(Arc::new(ModeSet { modes, index }))
    }

    /// Both polarizations of every listed path, H before V.
    pub fn from_paths<S: AsRef<str>>(paths: &[S]) -> Result<Arc<Self>> {
        ModeSet::new(paths.iter().flat_map(|p| {
            [ModeId::h(p.as_ref()), ModeId::v(p.as_ref())]
        }))
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn contains(&self, mode: &ModeId) -> bool {
        self.index.contains_key(mode)
    }

    pub fn index_of(&self, mode: &ModeId) -> Result<usize> {
        self.index
            .get(mode)
            .copied()
            .ok_or_else(|| Error::UndeclaredMode(mode.to_string()))
    }

    pub fn mode(&self, index: usize) -> &ModeId {
        &self.modes[index]
    }
}

/// Photon counts per declared mode, indexed like the owning [`ModeSet`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occupation(pub Vec<u8>);

impl Occupation {
    pub fn vacuum(len: usize) -> Self {
        Occupation(vec![0; len])
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&n| n as u32).sum()
    }

    pub fn get(&self, index: usize) -> u32 {
        self.0[index] as u32
    }

    /// √(Π nᵢ!), the norm of Π a†ⁿⁱ|0⟩.
    pub fn factorial_norm(&self) -> f64 {
        self.0.iter().map(|&n| factorial(n as u32)).product::<f64>().sqrt()
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// A product of creation operators with a complex coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct CreationMonomial {
    pub coefficient: Complex64,
    pub exponents: BTreeMap<ModeId, u32>,
}

impl CreationMonomial {
    pub fn new(coefficient: impl Into<Complex64>, exponents: impl IntoIterator<Item = (ModeId, u32)>) -> Self {
        let mut map = BTreeMap::new();
        for (mode, n) in exponents {
            if n > 0 {
                *map.entry(mode).or_insert(0) += n;
            }
        }
        CreationMonomial { coefficient: coefficient.into(), exponents: map }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.values().sum()
    }

    /// Exponent of `mode`, zero if absent.
    pub fn exponent(&self, mode: &ModeId) -> u32 {
        self.exponents.get(mode).copied().unwrap_or(0)
    }

    pub fn same_operator(&self, other: &CreationMonomial) -> bool {
        self.exponents == other.exponents
    }
}

/// Outcome of [`FockState::project`].
#[derive(Clone, Debug)]
pub struct Projection {
    pub probability: f64,
    /// Renormalized conditional state; `None` when the probability is below
    /// [`PROJECTION_FLOOR`].
    pub state: Option<FockState>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TermRecord {
    pub occupation: BTreeMap<String, u32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug)]
pub struct FockState {
    modes: Arc<ModeSet>,
    terms: BTreeMap<Occupation, Complex64>,
    prune_tolerance: f64,
}

impl FockState {
    pub fn vacuum(modes: &Arc<ModeSet>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Occupation::vacuum(modes.len()), Complex64::new(1.0, 0.0));
        FockState { modes: modes.clone(), terms, prune_tolerance: DEFAULT_PRUNE_TOLERANCE }
    }

    /// A single occupation-number basis state with amplitude 1.
    pub fn basis(modes: &Arc<ModeSet>, counts: &[(ModeId, u32)]) -> Result<Self> {
        let occ = occupation_of(modes, counts)?;
        FockState::from_terms(modes, [(occ, Complex64::new(1.0, 0.0))])
    }

    pub fn from_terms(
        modes: &Arc<ModeSet>,
        terms: impl IntoIterator<Item = (Occupation, Complex64)>,
    ) -> Result<Self> {
        let mut state = FockState {
            modes: modes.clone(),
            terms: BTreeMap::new(),
            prune_tolerance: DEFAULT_PRUNE_TOLERANCE,
        };
        for (occ, amp) in terms {
            if occ.0.len() != modes.len() {
                return Err(Error::ModeSetMismatch);
            }
            *state.terms.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        state.prune();
        Ok(state)
    }

    /// Builds `Σ monomials |0⟩`.
    pub fn from_monomials(modes: &Arc<ModeSet>, poly: &[CreationMonomial]) -> Result<Self> {
        FockState::vacuum(modes).apply_monomials(poly)
    }

    pub fn with_prune_tolerance(mut self, tolerance: f64) -> Self {
        self.prune_tolerance = tolerance;
        self.prune();
        self
    }

    pub fn prune_tolerance(&self) -> f64 {
        self.prune_tolerance
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, counts: &[(ModeId, u32)]) -> Result<Complex64> {
        let occ = occupation_of(&self.modes, counts)?;
        Ok(self.terms.get(&occ).copied().unwrap_or_default())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < NORMALIZED_TOLERANCE
    }

    pub fn normalized(&self) -> Option<FockState> {
        let n = self.norm_sqr().sqrt();
        if n < PROJECTION_FLOOR {
            return None;
        }
        Some(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> FockState {
        let mut out = self.clone();
        for a in out.terms.values_mut() {
            *a *= factor;
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &FockState) -> Result<FockState> {
        self.check_same_modes(other)?;
        let mut out = self.clone();
        for (occ, amp) in &other.terms {
            *out.terms.entry(occ.clone()).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        out.prune();
        Ok(out)
    }

    /// Distinct total photon numbers present in the superposition.
    pub fn photon_numbers(&self) -> Vec<u32> {
        let mut ns: Vec<u32> = self.terms.keys().map(Occupation::total).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &FockState) -> Result<Complex64> {
        self.check_same_modes(other)?;
        let (small, large, conj_small) = if self.terms.len() <= other.terms.len() {
            (&self.terms, &other.terms, true)
        } else {
            (&other.terms, &self.terms, false)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (occ, a) in small {
            if let Some(b) = large.get(occ) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// min over φ of ‖self − e^{iφ}·other‖.
    pub fn distance_mod_phase(&self, other: &FockState) -> Result<f64> {
        let overlap = self.inner(other)?;
        let d2 = self.norm_sqr() + other.norm_sqr() - 2.0 * overlap.norm();
        Ok(d2.max(0.0).sqrt())
    }

    /// Largest amplitude difference after aligning `other` to `self` by the
    /// single global phase that maximizes their overlap.
    pub fn max_amplitude_deviation_mod_phase(&self, other: &FockState) -> Result<f64> {
        let overlap = self.inner(other)?;
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
        let aligned = other.scaled(phase);
        let mut max = 0.0f64;
        for (occ, a) in &self.terms {
            let b = aligned.terms.get(occ).copied().unwrap_or_default();
            max = max.max((a - b).norm());
        }
        for (occ, b) in &aligned.terms {
            if !self.terms.contains_key(occ) {
                max = max.max(b.norm());
            }
        }
        Ok(max)
    }

    /// Applies a polynomial in creation operators.
    pub fn apply_monomials(&self, poly: &[CreationMonomial]) -> Result<FockState> {
        let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for mono in poly {
            let raises: Vec<(usize, u32)> = mono
                .exponents
                .iter()
                .map(|(m, &n)| self.modes.index_of(m).map(|i| (i, n)))
                .collect::<Result<_>>()?;
            for (occ, amp) in &self.terms {
                let mut next = occ.0.clone();
                let mut factor = 1.0;
                for &(i, n) in &raises {
                    for _ in 0..n {
                        // a†|k⟩ = √(k+1)|k+1⟩
                        next[i] = next[i].checked_add(1).ok_or_else(|| {
                            Error::InvalidParameter("photon number overflow".into())
                        })?;
                        factor *= f64::from(next[i]).sqrt();
                    }
                }
                *out.entry(Occupation(next)).or_insert(Complex64::new(0.0, 0.0)) +=
                    amp * mono.coefficient * factor;
            }
        }
        let mut state = FockState { modes: self.modes.clone(), terms: out, prune_tolerance: self.prune_tolerance };
        state.prune();
        Ok(state)
    }

    /// Rewrites the state as `Σ c · Π a†ⁿ |0⟩`.
    pub fn to_monomials(&self) -> Vec<CreationMonomial> {
        self.terms
            .iter()
            .map(|(occ, amp)| {
                let exps = occ
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n > 0)
                    .map(|(i, &n)| (self.modes.mode(i).clone(), n as u32));
                CreationMonomial::new(amp / occ.factorial_norm(), exps)
            })
            .collect()
    }

    /// Coefficient of a given creation-operator product in the monomial
    /// expansion of this state.
    pub fn monomial_coefficient(&self, exponents: &[(ModeId, u32)]) -> Result<Complex64> {
        let occ = occupation_of(&self.modes, exponents)?;
        Ok(self.terms.get(&occ).map(|a| a / occ.factorial_norm()).unwrap_or_default())
    }

    /// Projects onto exact photon numbers `counts` on the modes `subset`.
    pub fn project(&self, subset: &[ModeId], counts: &[u32]) -> Result<Projection> {
        if subset.len() != counts.len() {
            return Err(Error::InvalidParameter(format!(
                "{} modes but {} counts",
                subset.len(),
                counts.len()
            )));
        }
        let idx = self.indices(subset)?;
        let mut kept = FockState {
            modes: self.modes.clone(),
            terms: BTreeMap::new(),
            prune_tolerance: self.prune_tolerance,
        };
        for (occ, amp) in &self.terms {
            if idx.iter().zip(counts).all(|(&i, &c)| occ.get(i) == c) {
                kept.terms.insert(occ.clone(), *amp);
            }
        }
        let probability = kept.norm_sqr();
        let state = if probability < PROJECTION_FLOOR { None } else { kept.normalized() };
        Ok(Projection { probability, state })
    }

    /// Photon-number statistics on `subset`: the diagonal of the reduced
    /// state in the number basis.
    pub fn number_distribution(&self, subset: &[ModeId]) -> Result<BTreeMap<Vec<u32>, f64>> {
        let idx = self.indices(subset)?;
        let mut dist = BTreeMap::new();
        for (occ, amp) in &self.terms {
            let key: Vec<u32> = idx.iter().map(|&i| occ.get(i)).collect();
            *dist.entry(key).or_insert(0.0) += amp.norm_sqr();
        }
        Ok(dist)
    }

    /// Distribution of the total photon number summed over `subset`.
    pub fn total_number_distribution(&self, subset: &[ModeId]) -> Result<BTreeMap<u32, f64>> {
        let mut out = BTreeMap::new();
        for (pattern, p) in self.number_distribution(subset)? {
            *out.entry(pattern.iter().sum()).or_insert(0.0) += p;
        }
        Ok(out)
    }

    /// Splits the state into the part with no photon in `mode` and the rest.
    pub fn split_on(&self, mode: &ModeId) -> Result<(FockState, FockState)> {
        let i = self.modes.index_of(mode)?;
        let empty = FockState { modes: self.modes.clone(), terms: BTreeMap::new(), prune_tolerance: self.prune_tolerance };
        let (mut without, mut with) = (empty.clone(), empty);
        for (occ, amp) in &self.terms {
            if occ.get(i) == 0 {
                without.terms.insert(occ.clone(), *amp);
            } else {
                with.terms.insert(occ.clone(), *amp);
            }
        }
        Ok((without, with))
    }

    /// Debug serialization: one record per term, modes named like `V1`.
    pub fn to_records(&self) -> Vec<TermRecord> {
        self.terms
            .iter()
            .map(|(occ, amp)| TermRecord {
                occupation: occ
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n > 0)
                    .map(|(i, &n)| (self.modes.mode(i).to_string(), n as u32))
                    .collect(),
                re: amp.re,
                im: amp.im,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_records())?)
    }

    pub(crate) fn check_same_modes(&self, other: &FockState) -> Result<()> {
        if Arc::ptr_eq(&self.modes, &other.modes) || *self.modes == *other.modes {
            Ok(())
        } else {
            Err(Error::ModeSetMismatch)
        }
    }

    pub(crate) fn from_parts(modes: Arc<ModeSet>, terms: BTreeMap<Occupation, Complex64>, prune_tolerance: f64) -> Self {
        let mut s = FockState { modes, terms, prune_tolerance };
        s.prune();
        s
    }

    fn indices(&self, subset: &[ModeId]) -> Result<Vec<usize>> {
        subset.iter().map(|m| self.modes.index_of(m)).collect()
    }

    fn prune(&mut self) {
        let tol = self.prune_tolerance;
        self.terms.retain(|_, a| a.norm() >= tol);
    }
}

fn occupation_of(modes: &ModeSet, counts: &[(ModeId, u32)]) -> Result<Occupation> {
    let mut occ = Occupation::vacuum(modes.len());
    for (m, n) in counts {
        let i = modes.index_of(m)?;
        let total = occ.get(i) + n;
        occ.0[i] = u8::try_from(total)
            .map_err(|_| Error::InvalidParameter(format!("{total} photons in {m}")))?;
    }
    Ok(occ)
}
