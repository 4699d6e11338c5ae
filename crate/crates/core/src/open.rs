//! Lindblad dynamics with cavity loss on both modes and atomic decay:
//!
//! `ρ̇ = −i[H, ρ] + κ L[a_CW]ρ + κ L[a_CCW]ρ + γ L[σ₋]ρ`,
//! `L[o]ρ = oρo† − ½(o†oρ + ρo†o)`.
//!
//! The integrator works in the frame rotating with the free field energy
//! `E = Δ_CW m + Δ_CCW k`, where the only time dependence left is a phase
//! on the atom-field exchange terms. The state is the upper triangle of
//! the Hermitian density matrix, packed row by row.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analytic::{approx_state, target_branch, Sign, NULL_BRANCH_THRESHOLD};
use crate::error::{Error, Result};
use crate::hilbert::{initial_state, Atom, FieldState, ModeLabel, PureState, Truncation};
use crate::integrate::{Dop853, OdeSystem, Stats, Tolerances};
use crate::model::SystemParams;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Density matrix over the composite basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    trunc: Truncation,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(trunc: Truncation, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != trunc.dim() || matrix.ncols() != trunc.dim() {
            return Err(Error::DimensionMismatch {
                expected: trunc.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(DensityMatrix { trunc, matrix })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.to_vector();
        DensityMatrix {
            trunc: psi.truncation(),
            matrix: &v * v.adjoint(),
        }
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    /// `ρ[w,m,k ; v,n,j]`.
    pub fn element(&self, row: (Atom, usize, usize), col: (Atom, usize, usize)) -> C64 {
        let t = self.trunc;
        self.matrix[(t.index(row.0, row.1, row.2), t.index(col.0, col.1, col.2))]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &PureState) -> Result<f64> {
        if psi.truncation() != self.trunc {
            return Err(Error::DimensionMismatch {
                expected: self.trunc.dim(),
                found: psi.truncation().dim(),
            });
        }
        let v = psi.to_vector();
        Ok((v.adjoint() * &self.matrix * v)[(0, 0)].re)
    }
}

/// `|+⟩⟨+| ⊗ |α⟩⟨α| ⊗ |α⟩⟨α|`, renormalized after truncation.
pub fn initial_density(alpha: C64, trunc: Truncation) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_pure(&initial_state(alpha, trunc)?))
}

/// Two-mode state left after detecting the atom in `|±⟩`.
#[derive(Clone, Debug)]
pub struct BranchDensity {
    pub sign: Sign,
    pub probability: f64,
    trunc: Truncation,
    /// Indexed by `m * n_ccw + k`; unit trace.
    rho: DMatrix<C64>,
}

impl BranchDensity {
    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Single-mode density matrix of `mode` with the other mode traced out.
    pub fn reduced(&self, mode: ModeLabel) -> DMatrix<C64> {
        let (ncw, nccw) = (self.trunc.n_cw(), self.trunc.n_ccw());
        let f = |m: usize, k: usize| m * nccw + k;
        match mode {
            ModeLabel::Cw => DMatrix::from_fn(ncw, ncw, |m, n| {
                (0..nccw).map(|k| self.rho[(f(m, k), f(n, k))]).sum()
            }),
            ModeLabel::Ccw => DMatrix::from_fn(nccw, nccw, |k, j| {
                (0..ncw).map(|m| self.rho[(f(m, k), f(m, j))]).sum()
            }),
        }
    }

    /// `⟨φ|ρ±|φ⟩`.
    pub fn fidelity(&self, phi: &FieldState) -> Result<f64> {
        if phi.truncation() != self.trunc {
            return Err(Error::DimensionMismatch {
                expected: self.trunc.field_dim(),
                found: phi.truncation().field_dim(),
            });
        }
        let c = phi.coeffs();
        let nccw = self.trunc.n_ccw();
        let v = nalgebra::DVector::from_fn(self.trunc.field_dim(), |i, _| c[(i / nccw, i % nccw)]);
        Ok((v.adjoint() * &self.rho * v)[(0, 0)].re)
    }
}

/// `Ξ± = ρ_ee + ρ_gg ± ρ_eg ± ρ_ge` over the field indices.
fn xi(rho: &DensityMatrix, sign: Sign) -> DMatrix<C64> {
    let f = rho.trunc.field_dim();
    let m = &rho.matrix;
    let sg = C64::from(sign.value());
    let ee = m.view((0, 0), (f, f));
    let eg = m.view((0, f), (f, f));
    let ge = m.view((f, 0), (f, f));
    let gg = m.view((f, f), (f, f));
    ee + gg + (eg + ge) * sg
}

/// `p± = ½ tr Ξ±`.
pub fn branch_probability(rho: &DensityMatrix, sign: Sign) -> f64 {
    let f = rho.trunc.field_dim();
    let m = &rho.matrix;
    let mut tr = 0.0;
    for i in 0..f {
        tr += m[(i, i)].re + m[(i + f, i + f)].re + sign.value() * 2.0 * m[(i, i + f)].re;
    }
    tr / 2.0
}

/// `ρ± = Ξ± / (2p±)`.
pub fn branch_density(rho: &DensityMatrix, sign: Sign) -> Result<BranchDensity> {
    let probability = branch_probability(rho, sign);
    if probability < NULL_BRANCH_THRESHOLD {
        return Err(Error::NullBranch { sign, probability });
    }
    let matrix = xi(rho, sign) / C64::from(2.0 * probability);
    Ok(BranchDensity {
        sign,
        probability,
        trunc: rho.trunc,
        rho: matrix,
    })
}

/// `f = ⟨ψ_app(t)|ρ(t)|ψ_app(t)⟩`.
pub fn fidelity_open(s: &SystemParams, rho: &DensityMatrix, t: f64) -> Result<f64> {
    rho.expectation(&approx_state(s, t)?)
}

/// `f± = ⟨ψ±(t)|ρ±(t)|ψ±(t)⟩`.
pub fn fidelity_open_branch(s: &SystemParams, rho: &DensityMatrix, t: f64, sign: Sign) -> Result<f64> {
    let bd = branch_density(rho, sign)?;
    bd.fidelity(&target_branch(s, t, sign)?.state)
}

/// Coupling partner of a basis index: `(index, J√n, phase slot)`.
type Partner = (usize, f64, usize);

/// Structured Lindblad generator on packed upper-triangle storage.
struct Generator {
    d: usize,
    offsets: Vec<usize>,
    energy: Vec<f64>,
    /// Half the total decay rate out of each basis state.
    decay: Vec<f64>,
    partners: Vec<Vec<Partner>>,
    up_cw: Vec<Option<(usize, f64)>>,
    up_ccw: Vec<Option<(usize, f64)>>,
    ground: Vec<bool>,
    field_dim: usize,
    kappa: f64,
    gamma: f64,
    delta_cw: f64,
    delta_ccw: f64,
}

impl Generator {
    fn new(s: &SystemParams) -> Self {
        let t = s.trunc;
        let d = t.dim();
        let (ncw, nccw) = (t.n_cw(), t.n_ccw());
        let mut offsets = Vec::with_capacity(d);
        let mut acc = 0;
        for r in 0..d {
            offsets.push(acc);
            acc += d - r;
        }
        let mut energy = Vec::with_capacity(d);
        let mut decay = Vec::with_capacity(d);
        let mut partners = Vec::with_capacity(d);
        let mut up_cw = Vec::with_capacity(d);
        let mut up_ccw = Vec::with_capacity(d);
        let mut ground = Vec::with_capacity(d);
        let j = s.coupling;
        for r in 0..d {
            let (w, m, k) = t.deindex(r);
            energy.push(s.delta_cw() * m as f64 + s.delta_ccw() * k as f64);
            let excited = if w == Atom::Excited { 1.0 } else { 0.0 };
            decay.push(0.5 * (s.kappa * (m + k) as f64 + s.gamma * excited));
            let mut p = Vec::with_capacity(2);
            match w {
                // Phase slots: 0 → e^{iΔ_CW t}, 1 → conj, 2 → e^{iΔ_CCW t}, 3 → conj.
                Atom::Ground => {
                    if m > 0 {
                        p.push((t.index(Atom::Excited, m - 1, k), j * (m as f64).sqrt(), 0));
                    }
                    if k > 0 {
                        p.push((t.index(Atom::Excited, m, k - 1), j * (k as f64).sqrt(), 2));
                    }
                }
                Atom::Excited => {
                    if m + 1 < ncw {
                        p.push((t.index(Atom::Ground, m + 1, k), j * ((m + 1) as f64).sqrt(), 1));
                    }
                    if k + 1 < nccw {
                        p.push((t.index(Atom::Ground, m, k + 1), j * ((k + 1) as f64).sqrt(), 3));
                    }
                }
            }
            partners.push(p);
            up_cw.push((m + 1 < ncw).then(|| (t.index(w, m + 1, k), ((m + 1) as f64).sqrt())));
            up_ccw.push((k + 1 < nccw).then(|| (t.index(w, m, k + 1), ((k + 1) as f64).sqrt())));
            ground.push(w == Atom::Ground);
        }
        Generator {
            d,
            offsets,
            energy,
            decay,
            partners,
            up_cw,
            up_ccw,
            ground,
            field_dim: t.field_dim(),
            kappa: s.kappa,
            gamma: s.gamma,
            delta_cw: s.delta_cw(),
            delta_ccw: s.delta_ccw(),
        }
    }

    fn packed_len(&self) -> usize {
        self.d * (self.d + 1) / 2
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(r <= c);
        self.offsets[r] + c - r
    }

    #[inline]
    fn get(&self, y: &[C64], r: usize, c: usize) -> C64 {
        if r <= c {
            y[self.idx(r, c)]
        } else {
            y[self.idx(c, r)].conj()
        }
    }

    fn pack(&self, m: &DMatrix<C64>) -> Vec<C64> {
        let mut y = Vec::with_capacity(self.packed_len());
        for r in 0..self.d {
            for c in r..self.d {
                y.push(m[(r, c)]);
            }
        }
        y
    }

    fn unpack(&self, y: &[C64]) -> DMatrix<C64> {
        DMatrix::from_fn(self.d, self.d, |r, c| self.get(y, r, c))
    }

    fn phases(&self, t: f64) -> [C64; 4] {
        let cw = C64::from_polar(1.0, self.delta_cw * t);
        let ccw = C64::from_polar(1.0, self.delta_ccw * t);
        [cw, cw.conj(), ccw, ccw.conj()]
    }

    /// Derivative of the packed state. `energy_weight` is 1 in the lab frame
    /// and 0 in the rotating frame, where `phases` carry the time dependence.
    fn apply(&self, phases: [C64; 4], energy_weight: f64, y: &[C64], dy: &mut [C64]) {
        let amp: Vec<Vec<(usize, C64)>> = self
            .partners
            .iter()
            .map(|p| p.iter().map(|&(x, f, slot)| (x, phases[slot] * f)).collect())
            .collect();
        let mi = C64::new(0.0, -1.0);
        for r in 0..self.d {
            let base = self.offsets[r];
            for c in r..self.d {
                let rho_rc = y[base + c - r];
                let mut comm = ZERO;
                for &(x, a) in &amp[r] {
                    comm += a * self.get(y, x, c);
                }
                for &(x, a) in &amp[c] {
                    comm -= self.get(y, r, x) * a.conj();
                }
                comm += rho_rc * (energy_weight * (self.energy[r] - self.energy[c]));
                let mut out = mi * comm - rho_rc * (self.decay[r] + self.decay[c]);
                if self.kappa != 0.0 {
                    if let (Some((ru, fr)), Some((cu, fc))) = (self.up_cw[r], self.up_cw[c]) {
                        out += y[self.idx(ru, cu)] * (self.kappa * fr * fc);
                    }
                    if let (Some((ru, fr)), Some((cu, fc))) = (self.up_ccw[r], self.up_ccw[c]) {
                        out += y[self.idx(ru, cu)] * (self.kappa * fr * fc);
                    }
                }
                if self.gamma != 0.0 && self.ground[r] && self.ground[c] {
                    out += y[self.idx(r - self.field_dim, c - self.field_dim)] * self.gamma;
                }
                dy[base + c - r] = out;
            }
        }
    }
}

/// `dρ/dt` in the lab frame, from structured operator actions.
pub fn lindblad_rhs(s: &SystemParams, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.trunc != s.trunc {
        return Err(Error::DimensionMismatch {
            expected: s.trunc.dim(),
            found: rho.trunc.dim(),
        });
    }
    let g = Generator::new(s);
    let h = (&rho.matrix + rho.matrix.adjoint()) * C64::new(0.5, 0.0);
    let y = g.pack(&h);
    let mut dy = vec![ZERO; y.len()];
    g.apply([C64::new(1.0, 0.0); 4], 1.0, &y, &mut dy);
    DensityMatrix::new(s.trunc, g.unpack(&dy))
}

struct RotatingFrame<'a>(&'a Generator);

impl OdeSystem for RotatingFrame<'_> {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.0.apply(self.0.phases(t), 0.0, y, dy);
    }

    fn project(&mut self, y: &mut [C64]) {
        // Packed storage is Hermitian by construction except for the diagonal.
        for r in 0..self.0.d {
            let i = self.0.offsets[r];
            y[i] = C64::new(y[i].re, 0.0);
        }
    }
}

/// Resumable master-equation integration starting at `t = 0`.
pub struct MasterSolver {
    gen: Generator,
    trunc: Truncation,
    stepper: Dop853,
    t: f64,
    y: Vec<C64>,
}

impl MasterSolver {
    pub fn new(s: &SystemParams, rho0: &DensityMatrix, tol: Tolerances) -> Result<Self> {
        s.validate()?;
        if rho0.trunc != s.trunc {
            return Err(Error::DimensionMismatch {
                expected: s.trunc.dim(),
                found: rho0.trunc.dim(),
            });
        }
        if !(tol.rtol > 0.0 && tol.atol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "integrator tolerances must be positive (rtol {}, atol {})",
                tol.rtol, tol.atol
            )));
        }
        let gen = Generator::new(s);
        let h = (&rho0.matrix + rho0.matrix.adjoint()) * C64::new(0.5, 0.0);
        let y = gen.pack(&h);
        let stepper = Dop853::new(y.len(), tol);
        Ok(MasterSolver {
            gen,
            trunc: s.trunc,
            stepper,
            t: 0.0,
            y,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn stats(&self) -> Stats {
        self.stepper.stats()
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.t {
            return Err(Error::InvalidParameter(format!(
                "cannot integrate backwards from t = {} to t = {t}",
                self.t
            )));
        }
        let mut sys = RotatingFrame(&self.gen);
        self.stepper.advance(&mut sys, &mut self.t, &mut self.y, t)
    }

    /// Lab-frame density matrix at the current time.
    pub fn density(&self) -> DensityMatrix {
        let g = &self.gen;
        let t = self.t;
        let matrix = DMatrix::from_fn(g.d, g.d, |r, c| {
            g.get(&self.y, r, c) * C64::from_polar(1.0, -(g.energy[r] - g.energy[c]) * t)
        });
        DensityMatrix {
            trunc: self.trunc,
            matrix,
        }
    }
}

/// `ρ(t)` from `ρ(0)` with adaptive error control.
pub fn evolve_master(
    s: &SystemParams,
    rho0: &DensityMatrix,
    t: f64,
    tol: Tolerances,
) -> Result<DensityMatrix> {
    let mut solver = MasterSolver::new(s, rho0, tol)?;
    solver.advance_to(t)?;
    Ok(solver.density())
}

/// Open-system observables at one time. Branch quantities are `None` for a
/// null branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OpenSample {
    pub t: f64,
    pub fidelity: f64,
    pub fidelity_plus: Option<f64>,
    pub fidelity_minus: Option<f64>,
    pub p_plus: f64,
    pub p_minus: f64,
    pub trace: f64,
    pub purity: f64,
    pub min_eigenvalue: Option<f64>,
}

pub fn sample_open(
    s: &SystemParams,
    rho: &DensityMatrix,
    t: f64,
    positivity: bool,
) -> Result<OpenSample> {
    let branch = |sign| match fidelity_open_branch(s, rho, t, sign) {
        Ok(f) => Ok(Some(f)),
        Err(Error::NullBranch { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(OpenSample {
        t,
        fidelity: fidelity_open(s, rho, t)?,
        fidelity_plus: branch(Sign::Plus)?,
        fidelity_minus: branch(Sign::Minus)?,
        p_plus: branch_probability(rho, Sign::Plus),
        p_minus: branch_probability(rho, Sign::Minus),
        trace: rho.trace(),
        purity: rho.purity(),
        min_eigenvalue: positivity.then(|| rho.min_eigenvalue()),
    })
}

/// Integrates from the standard initial state through nondecreasing
/// `times`, handing each sampled density matrix to `visit`.
pub fn run_master<F>(s: &SystemParams, times: &[f64], tol: Tolerances, mut visit: F) -> Result<Stats>
where
    F: FnMut(f64, &DensityMatrix) -> Result<()>,
{
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidParameter(
            "sample times must be nonnegative and nondecreasing".into(),
        ));
    }
    let rho0 = initial_density(s.alpha, s.trunc)?;
    let mut solver = MasterSolver::new(s, &rho0, tol)?;
    for &t in times {
        solver.advance_to(t)?;
        visit(t, &solver.density())?;
    }
    Ok(solver.stats())
}

pub fn open_curves(
    s: &SystemParams,
    times: &[f64],
    tol: Tolerances,
    positivity: bool,
) -> Result<Vec<OpenSample>> {
    let mut out = Vec::with_capacity(times.len());
    run_master(s, times, tol, |t, rho| {
        out.push(sample_open(s, rho, t, positivity)?);
        Ok(())
    })?;
    Ok(out)
}
