//! Composite Hilbert space of one two-level atom and two truncated bosonic
//! modes (CW and CCW).
//!
//! Basis kets are `|w⟩|m⟩_CW|k⟩_CCW` with the atom outermost. The composite
//! index is row-major: `index(w, m, k) = (w * n_cw + m) * n_ccw + k` with
//! `|e⟩ ↦ 0` and `|g⟩ ↦ 1`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fock levels per mode used when nothing else is configured.
pub const DEFAULT_LEVELS: usize = 13;

/// Largest tolerated single-mode Poisson tail beyond the truncation.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Truncation {
    n_cw: usize,
    n_ccw: usize,
}

impl Truncation {
    pub fn new(n_cw: usize, n_ccw: usize) -> Result<Self> {
        if n_cw == 0 || n_ccw == 0 {
            return Err(Error::InvalidTruncation(format!(
                "levels per mode must be positive, got {n_cw}x{n_ccw}"
            )));
        }
        Ok(Truncation { n_cw, n_ccw })
    }

    pub fn square(levels: usize) -> Result<Self> {
        Self::new(levels, levels)
    }

    pub fn n_cw(&self) -> usize {
        self.n_cw
    }

    pub fn n_ccw(&self) -> usize {
        self.n_ccw
    }

    pub fn levels(&self, mode: ModeLabel) -> usize {
        match mode {
            ModeLabel::Cw => self.n_cw,
            ModeLabel::Ccw => self.n_ccw,
        }
    }

    /// Dimension of the two-mode field space.
    pub fn field_dim(&self) -> usize {
        self.n_cw * self.n_ccw
    }

    /// Dimension of the full atom ⊗ CW ⊗ CCW space.
    pub fn dim(&self) -> usize {
        2 * self.field_dim()
    }

    #[inline]
    pub fn index(&self, atom: Atom, m: usize, k: usize) -> usize {
        debug_assert!(m < self.n_cw && k < self.n_ccw);
        (atom.index() * self.n_cw + m) * self.n_ccw + k
    }

    #[inline]
    pub fn deindex(&self, i: usize) -> (Atom, usize, usize) {
        let k = i % self.n_ccw;
        let rest = i / self.n_ccw;
        let m = rest % self.n_cw;
        let atom = if rest / self.n_cw == 0 {
            Atom::Excited
        } else {
            Atom::Ground
        };
        (atom, m, k)
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            n_cw: DEFAULT_LEVELS,
            n_ccw: DEFAULT_LEVELS,
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_cw, self.n_ccw)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    Excited,
    Ground,
}

impl Atom {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Atom::Excited => 0,
            Atom::Ground => 1,
        }
    }

    /// Eigenvalue of σ_z.
    pub fn sigma_z(self) -> f64 {
        match self {
            Atom::Excited => 1.0,
            Atom::Ground => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeLabel {
    Cw,
    Ccw,
}

impl ModeLabel {
    pub const ALL: [ModeLabel; 2] = [ModeLabel::Cw, ModeLabel::Ccw];

    pub fn complement(self) -> ModeLabel {
        match self {
            ModeLabel::Cw => ModeLabel::Ccw,
            ModeLabel::Ccw => ModeLabel::Cw,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModeLabel::Cw => "cw",
            ModeLabel::Ccw => "ccw",
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeLabel::Cw => "CW",
            ModeLabel::Ccw => "CCW",
        })
    }
}

/// Fock expansion `e^{-|α|²/2} α^m / √(m!)` of a coherent state, cut at `n`
/// levels without renormalization.
pub fn coherent_amplitudes(alpha: C64, n: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(n);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for m in 0..n {
        if m > 0 {
            c = c * alpha / (m as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Probability weight a coherent state of amplitude `alpha` places on levels
/// `>= n`.
pub fn coherent_tail(alpha: C64, n: usize) -> f64 {
    let kept: f64 = coherent_amplitudes(alpha, n).iter().map(|c| c.norm_sqr()).sum();
    (1.0 - kept).max(0.0)
}

pub fn check_truncation(alpha: C64, trunc: Truncation, threshold: f64) -> Result<()> {
    for mode in ModeLabel::ALL {
        let tail = coherent_tail(alpha, trunc.levels(mode));
        if tail > threshold {
            return Err(Error::TruncationTooSmall {
                mode: mode.as_str(),
                tail,
                threshold,
            });
        }
    }
    Ok(())
}

/// Two-mode field amplitudes `c[m, k]` on `|m⟩_CW|k⟩_CCW`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    coeffs: DMatrix<C64>,
}

impl FieldState {
    pub fn new(coeffs: DMatrix<C64>) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.ncols() == 0 {
            return Err(Error::InvalidTruncation("empty field state".into()));
        }
        Ok(FieldState { coeffs })
    }

    /// Product of two single-mode Fock vectors.
    pub fn product(cw: &[C64], ccw: &[C64]) -> Self {
        FieldState {
            coeffs: DMatrix::from_fn(cw.len(), ccw.len(), |m, k| cw[m] * ccw[k]),
        }
    }

    pub fn truncation(&self) -> Truncation {
        Truncation {
            n_cw: self.coeffs.nrows(),
            n_ccw: self.coeffs.ncols(),
        }
    }

    pub fn coeffs(&self) -> &DMatrix<C64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DMatrix<C64> {
        self.coeffs
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Rescales to unit norm; returns the norm squared before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n2 = self.norm_sqr();
        if n2 > 0.0 {
            self.coeffs /= C64::new(n2.sqrt(), 0.0);
        }
        n2
    }

    pub fn inner(&self, rhs: &FieldState) -> Result<C64> {
        if self.coeffs.shape() != rhs.coeffs.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.coeffs.len(),
                found: rhs.coeffs.len(),
            });
        }
        Ok(self
            .coeffs
            .iter()
            .zip(rhs.coeffs.iter())
            .map(|(l, r)| l.conj() * r)
            .sum())
    }

    /// Reduced single-mode density matrix of `mode`, tracing out its
    /// complement.
    pub fn reduced_density(&self, mode: ModeLabel) -> DMatrix<C64> {
        let c = &self.coeffs;
        match mode {
            ModeLabel::Cw => c * c.adjoint(),
            // ρ_CCW[k, j] = Σ_m c[m, k] c*[m, j]
            ModeLabel::Ccw => (c.adjoint() * c).transpose(),
        }
    }

    /// Singular values of the coefficient matrix, descending. A single
    /// nonzero value means the two modes are in a product state.
    pub fn schmidt_coefficients(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self
            .coeffs
            .clone()
            .singular_values()
            .iter()
            .copied()
            .collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    pub fn is_product(&self, tol: f64) -> bool {
        self.schmidt_coefficients().get(1).is_none_or(|s| *s < tol)
    }
}

/// Pure state `Σ A[m,k] |e,m,k⟩ + B[m,k] |g,m,k⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    trunc: Truncation,
    excited: DMatrix<C64>,
    ground: DMatrix<C64>,
}

impl PureState {
    pub fn zeros(trunc: Truncation) -> Self {
        PureState {
            trunc,
            excited: DMatrix::zeros(trunc.n_cw, trunc.n_ccw),
            ground: DMatrix::zeros(trunc.n_cw, trunc.n_ccw),
        }
    }

    pub fn from_blocks(excited: DMatrix<C64>, ground: DMatrix<C64>) -> Result<Self> {
        if excited.shape() != ground.shape() {
            return Err(Error::DimensionMismatch {
                expected: excited.len(),
                found: ground.len(),
            });
        }
        let trunc = Truncation::new(excited.nrows(), excited.ncols())?;
        Ok(PureState {
            trunc,
            excited,
            ground,
        })
    }

    /// A basis ket `|w, m, k⟩`.
    pub fn basis(trunc: Truncation, atom: Atom, m: usize, k: usize) -> Self {
        let mut s = Self::zeros(trunc);
        *s.amplitude_mut(atom, m, k) = C64::new(1.0, 0.0);
        s
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    /// Amplitudes `A[m, k]` on the excited atom.
    pub fn excited(&self) -> &DMatrix<C64> {
        &self.excited
    }

    /// Amplitudes `B[m, k]` on the ground atom.
    pub fn ground(&self) -> &DMatrix<C64> {
        &self.ground
    }

    pub fn block(&self, atom: Atom) -> &DMatrix<C64> {
        match atom {
            Atom::Excited => &self.excited,
            Atom::Ground => &self.ground,
        }
    }

    pub fn amplitude(&self, atom: Atom, m: usize, k: usize) -> C64 {
        self.block(atom)[(m, k)]
    }

    pub fn amplitude_mut(&mut self, atom: Atom, m: usize, k: usize) -> &mut C64 {
        match atom {
            Atom::Excited => &mut self.excited[(m, k)],
            Atom::Ground => &mut self.ground[(m, k)],
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.excited
            .iter()
            .chain(self.ground.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Rescales to unit norm; returns the norm squared before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n2 = self.norm_sqr();
        if n2 > 0.0 {
            let s = C64::new(1.0 / n2.sqrt(), 0.0);
            self.excited *= s;
            self.ground *= s;
        }
        n2
    }

    pub fn scaled(&self, factor: C64) -> Self {
        PureState {
            trunc: self.trunc,
            excited: &self.excited * factor,
            ground: &self.ground * factor,
        }
    }

    /// Flattened amplitudes in composite index order.
    pub fn to_vector(&self) -> DVector<C64> {
        let t = self.trunc;
        DVector::from_fn(t.dim(), |i, _| {
            let (w, m, k) = t.deindex(i);
            self.amplitude(w, m, k)
        })
    }

    pub fn from_vector(trunc: Truncation, v: &DVector<C64>) -> Result<Self> {
        if v.len() != trunc.dim() {
            return Err(Error::DimensionMismatch {
                expected: trunc.dim(),
                found: v.len(),
            });
        }
        let mut s = Self::zeros(trunc);
        for (i, c) in v.iter().enumerate() {
            let (w, m, k) = trunc.deindex(i);
            *s.amplitude_mut(w, m, k) = *c;
        }
        Ok(s)
    }
}

/// `(|g⟩ + |e⟩)/√2 ⊗ |α⟩ ⊗ |α⟩`, renormalized after truncation. Fails when
/// either mode's coherent tail beyond the truncation exceeds `tail_threshold`.
pub fn initial_state_checked(
    alpha: C64,
    trunc: Truncation,
    tail_threshold: f64,
) -> Result<PureState> {
    check_truncation(alpha, trunc, tail_threshold)?;
    let mut s = unnormalized_initial_state(alpha, trunc);
    s.normalize();
    Ok(s)
}

pub fn initial_state(alpha: C64, trunc: Truncation) -> Result<PureState> {
    initial_state_checked(alpha, trunc, DEFAULT_TAIL_THRESHOLD)
}

/// `1 − ‖ψ(0)‖²` of the truncated initial state before renormalization.
pub fn initial_norm_deficit(alpha: C64, trunc: Truncation) -> f64 {
    1.0 - unnormalized_initial_state(alpha, trunc).norm_sqr()
}

fn unnormalized_initial_state(alpha: C64, trunc: Truncation) -> PureState {
    let cw = coherent_amplitudes(alpha, trunc.n_cw);
    let ccw = coherent_amplitudes(alpha, trunc.n_ccw);
    let field = FieldState::product(&cw, &ccw).into_coeffs() * C64::new(0.5f64.sqrt(), 0.0);
    PureState {
        trunc,
        excited: field.clone(),
        ground: field,
    }
}

/// Hermitian inner product `⟨lhs|rhs⟩`.
pub fn inner(lhs: &PureState, rhs: &PureState) -> Result<C64> {
    if lhs.trunc != rhs.trunc {
        return Err(Error::DimensionMismatch {
            expected: lhs.trunc.dim(),
            found: rhs.trunc.dim(),
        });
    }
    let sum = |l: &DMatrix<C64>, r: &DMatrix<C64>| -> C64 {
        l.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum()
    };
    Ok(sum(&lhs.excited, &rhs.excited) + sum(&lhs.ground, &rhs.ground))
}

fn annihilate_block(block: &DMatrix<C64>, mode: ModeLabel) -> DMatrix<C64> {
    let (rows, cols) = block.shape();
    DMatrix::from_fn(rows, cols, |m, k| match mode {
        ModeLabel::Cw if m + 1 < rows => block[(m + 1, k)] * ((m + 1) as f64).sqrt(),
        ModeLabel::Ccw if k + 1 < cols => block[(m, k + 1)] * ((k + 1) as f64).sqrt(),
        _ => C64::new(0.0, 0.0),
    })
}

/// `a_ε |ψ⟩` on both atomic blocks (unnormalized).
pub fn apply_annihilate(state: &PureState, mode: ModeLabel) -> PureState {
    PureState {
        trunc: state.trunc,
        excited: annihilate_block(&state.excited, mode),
        ground: annihilate_block(&state.ground, mode),
    }
}

/// `a_ε† a_ε |ψ⟩` on both atomic blocks.
pub fn apply_number(state: &PureState, mode: ModeLabel) -> PureState {
    let weigh = |block: &DMatrix<C64>| {
        DMatrix::from_fn(block.nrows(), block.ncols(), |m, k| {
            let n = match mode {
                ModeLabel::Cw => m,
                ModeLabel::Ccw => k,
            };
            block[(m, k)] * n as f64
        })
    };
    PureState {
        trunc: state.trunc,
        excited: weigh(&state.excited),
        ground: weigh(&state.ground),
    }
}

/// Mean photon number `⟨ψ|a_ε†a_ε|ψ⟩` of a normalized state.
pub fn mean_photons(state: &PureState, mode: ModeLabel) -> f64 {
    inner(state, &apply_number(state, mode))
        .map(|c| c.re)
        .unwrap_or(f64::NAN)
}
