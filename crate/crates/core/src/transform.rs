//! Linear maps on creation operators and their action on Fock states.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FockState, ModeId, ModeSet, Occupation};

/// Column orthonormality tolerance for constructed transforms.
pub const ISOMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    Unitary,
    /// Some output modes are fresh: they must be vacuum on input and their
    /// own creation operators have no image.
    Isometry,
}

/// `a†_in ↦ Σ_out M[out, in] a†_out` over a declared mode set.
#[derive(Clone, Debug)]
pub struct ModeTransform {
    modes: Arc<ModeSet>,
    matrix: DMatrix<Complex64>,
    fresh: Vec<bool>,
    kind: TransformKind,
}

impl ModeTransform {
    pub fn identity(modes: &Arc<ModeSet>) -> Self {
        let n = modes.len();
        ModeTransform {
            modes: modes.clone(),
            matrix: DMatrix::identity(n, n),
            fresh: vec![false; n],
            kind: TransformKind::Unitary,
        }
    }

    /// Builds a transform from explicit images of some creation operators.
    ///
    /// Modes without an image are left alone, except those that receive
    /// amplitude from a mapped mode: those become fresh outputs.
    pub fn from_images(modes: &Arc<ModeSet>, images: &[(ModeId, Vec<(ModeId, Complex64)>)]) -> Result<Self> {
        let n = modes.len();
        let mut matrix = DMatrix::identity(n, n);
        let mut mapped = vec![false; n];
        for (input, outs) in images {
            let i = modes.index_of(input)?;
            if mapped[i] {
                return Err(Error::InvalidParameter(format!("mode {input} mapped twice")));
            }
            mapped[i] = true;
            for r in 0..n {
                matrix[(r, i)] = Complex64::new(0.0, 0.0);
            }
            for (out, amp) in outs {
                matrix[(modes.index_of(out)?, i)] += amp;
            }
        }
        let mut fresh = vec![false; n];
        for j in 0..n {
            if mapped[j] {
                for (r, f) in fresh.iter_mut().enumerate() {
                    if !mapped[r] && r != j && matrix[(r, j)].norm() > 0.0 {
                        *f = true;
                    }
                }
            }
        }
        for (j, &f) in fresh.iter().enumerate() {
            if f {
                for r in 0..n {
                    matrix[(r, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        ModeTransform::from_matrix(modes, matrix, fresh)
    }

    /// Validates orthonormality of all non-fresh columns.
    pub fn from_matrix(modes: &Arc<ModeSet>, matrix: DMatrix<Complex64>, fresh: Vec<bool>) -> Result<Self> {
        let n = modes.len();
        if matrix.nrows() != n || matrix.ncols() != n || fresh.len() != n {
            return Err(Error::InvalidParameter(format!("transform must be {n}x{n}")));
        }
        let kind = if fresh.iter().any(|&f| f) { TransformKind::Isometry } else { TransformKind::Unitary };
        let t = ModeTransform { modes: modes.clone(), matrix, fresh, kind };
        let dev = t.orthonormality_deviation();
        if dev > ISOMETRY_TOLERANCE {
            return Err(Error::NotIsometric(dev));
        }
        Ok(t)
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_fresh(&self, mode: &ModeId) -> Result<bool> {
        Ok(self.fresh[self.modes.index_of(mode)?])
    }

    /// Coefficient of `a†_output` in the image of `a†_input`.
    pub fn coefficient(&self, input: &ModeId, output: &ModeId) -> Result<Complex64> {
        Ok(self.matrix[(self.modes.index_of(output)?, self.modes.index_of(input)?)])
    }

    /// max |⟨col_i, col_j⟩ − δ_ij| over the non-fresh columns.
    pub fn orthonormality_deviation(&self) -> f64 {
        let active: Vec<usize> = (0..self.modes.len()).filter(|&j| !self.fresh[j]).collect();
        let mut dev = 0.0f64;
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a..] {
                let g: Complex64 = self.matrix.column(i).iter().zip(self.matrix.column(j).iter()).map(|(x, y)| x.conj() * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((g - target).norm());
            }
        }
        dev
    }

    /// `next ∘ self`: apply `self` first.
    pub fn then(&self, next: &ModeTransform) -> Result<ModeTransform> {
        if *self.modes != *next.modes {
            return Err(Error::ModeSetMismatch);
        }
        let n = self.modes.len();
        let fresh: Vec<bool> = (0..n).map(|j| self.fresh[j] || next.fresh[j]).collect();
        for j in (0..n).filter(|&j| !fresh[j]) {
            for r in (0..n).filter(|&r| next.fresh[r]) {
                if self.matrix[(r, j)].norm() > 0.0 {
                    return Err(Error::LossModeCollision(self.modes.mode(r).to_string()));
                }
            }
        }
        let mut matrix = &next.matrix * &self.matrix;
        for (j, &f) in fresh.iter().enumerate() {
            if f {
                matrix.column_mut(j).fill(Complex64::new(0.0, 0.0));
            }
        }
        ModeTransform::from_matrix(&self.modes, matrix, fresh)
    }

    /// Inverse of a unitary transform.
    pub fn adjoint(&self) -> Result<ModeTransform> {
        if self.kind != TransformKind::Unitary {
            return Err(Error::InvalidParameter("only unitary transforms have an adjoint".into()));
        }
        ModeTransform::from_matrix(&self.modes, self.matrix.adjoint(), self.fresh.clone())
    }

    /// Substitutes every creation operator by its image and re-expands.
    pub fn apply(&self, state: &FockState) -> Result<FockState> {
        if *state.modes() != self.modes {
            return Err(Error::ModeSetMismatch);
        }
        let n = self.modes.len();
        let columns: Vec<Vec<(usize, Complex64)>> = (0..n)
            .map(|j| {
                (0..n)
                    .filter_map(|r| {
                        let v = self.matrix[(r, j)];
                        (v.norm() > 0.0).then_some((r, v))
                    })
                    .collect()
            })
            .collect();

        let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (occ, amp) in state.terms() {
            for (j, &f) in self.fresh.iter().enumerate() {
                if f && occ.get(j) > 0 {
                    return Err(Error::LossModeCollision(self.modes.mode(j).to_string()));
                }
            }
            let mut poly: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
            poly.insert(vec![0; n], Complex64::new(1.0, 0.0));
            for (j, &count) in occ.0.iter().enumerate() {
                for _ in 0..count {
                    let mut next: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
                    for (mono, c) in &poly {
                        for &(r, v) in &columns[j] {
                            let mut m = mono.clone();
                            m[r] += 1;
                            *next.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c * v;
                        }
                    }
                    poly = next;
                }
            }
            let pre = amp / occ.factorial_norm();
            for (mono, c) in poly {
                let o = Occupation(mono);
                let f = o.factorial_norm();
                *out.entry(o).or_insert(Complex64::new(0.0, 0.0)) += pre * c * f;
            }
        }
        Ok(FockState::from_parts(self.modes.clone(), out, state.prune_tolerance()))
    }
}
