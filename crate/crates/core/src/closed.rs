//! Exact unitary dynamics under a time-independent Hamiltonian, atomic
//! post-selection, and fidelities against the approximate solution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{
    approx_state, normalizations_and_probabilities, target_branch, Sign, NULL_BRANCH_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::hilbert::{initial_state, inner, FieldState, PureState, Truncation};
use crate::model::{build_full_hamiltonian, HermitianOperator, SystemParams};

/// Spectral decomposition `H = V diag(λ) V†`.
#[derive(Clone, Debug)]
pub struct Propagator {
    trunc: Truncation,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<C64>,
}

impl Propagator {
    pub fn new(op: &HermitianOperator) -> Result<Self> {
        let eig = SymmetricEigen::try_new(op.matrix().clone(), 1e-15, 0)
            .ok_or(Error::Eigendecomposition)?;
        Ok(Propagator {
            trunc: op.truncation(),
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// max |V diag(λ) V† − H| elementwise.
    pub fn reconstruction_error(&self, op: &HermitianOperator) -> f64 {
        let v = &self.eigenvectors;
        let lam = DMatrix::from_diagonal(&self.eigenvalues.map(|x| C64::new(x, 0.0)));
        let rebuilt = v * lam * v.adjoint();
        (rebuilt - op.matrix()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// max |V†V − 1| elementwise.
    pub fn unitarity_error(&self) -> f64 {
        let v = &self.eigenvectors;
        let n = v.ncols();
        (v.adjoint() * v - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Prepares repeated evolution of one initial state.
    pub fn evolver(&self, psi0: &PureState) -> Result<Evolver<'_>> {
        if psi0.truncation() != self.trunc {
            return Err(Error::DimensionMismatch {
                expected: self.trunc.dim(),
                found: psi0.truncation().dim(),
            });
        }
        let spectral = self.eigenvectors.adjoint() * psi0.to_vector();
        Ok(Evolver {
            prop: self,
            spectral,
        })
    }

    /// `ψ(t) = V e^{−iλt} V† ψ(0)`.
    pub fn evolve(&self, psi0: &PureState, t: f64) -> Result<PureState> {
        Ok(self.evolver(psi0)?.at(t))
    }
}

/// An initial state expressed in the eigenbasis of a propagator.
#[derive(Clone, Debug)]
pub struct Evolver<'a> {
    prop: &'a Propagator,
    spectral: DVector<C64>,
}

impl Evolver<'_> {
    pub fn at(&self, t: f64) -> PureState {
        let phased = DVector::from_fn(self.spectral.len(), |i, _| {
            self.spectral[i] * C64::from_polar(1.0, -self.prop.eigenvalues[i] * t)
        });
        let v = &self.prop.eigenvectors * phased;
        PureState::from_vector(self.prop.trunc, &v).expect("dimension fixed at construction")
    }
}

/// Time derivative of the amplitude arrays under the full Hamiltonian:
///
/// `dA[m,k] = −i(mΔ_CW + kΔ_CCW)A[m,k] − iJ√(m+1)B[m+1,k] − iJ√(k+1)B[m,k+1]`
/// `dB[m,k] = −i(mΔ_CW + kΔ_CCW)B[m,k] − iJ√m A[m−1,k] − iJ√k A[m,k−1]`
///
/// Amplitudes beyond the truncation are zero.
pub fn rhs_amplitudes(
    s: &SystemParams,
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
) -> (DMatrix<C64>, DMatrix<C64>) {
    let (rows, cols) = a.shape();
    let (dcw, dccw, j) = (s.delta_cw(), s.delta_ccw(), s.coupling);
    let mi = C64::new(0.0, -1.0);
    let da = DMatrix::from_fn(rows, cols, |m, k| {
        let mut d = a[(m, k)] * (m as f64 * dcw + k as f64 * dccw);
        if m + 1 < rows {
            d += b[(m + 1, k)] * (j * ((m + 1) as f64).sqrt());
        }
        if k + 1 < cols {
            d += b[(m, k + 1)] * (j * ((k + 1) as f64).sqrt());
        }
        d * mi
    });
    let db = DMatrix::from_fn(rows, cols, |m, k| {
        let mut d = b[(m, k)] * (m as f64 * dcw + k as f64 * dccw);
        if m > 0 {
            d += a[(m - 1, k)] * (j * (m as f64).sqrt());
        }
        if k > 0 {
            d += a[(m, k - 1)] * (j * (k as f64).sqrt());
        }
        d * mi
    });
    (da, db)
}

/// Field state left after detecting the atom in `|±⟩`.
#[derive(Clone, Debug)]
pub struct BranchResult {
    pub sign: Sign,
    pub probability: f64,
    /// Normalized two-mode state.
    pub state: FieldState,
}

/// Branch weight `P± = ½ Σ |A ± B|²` without building the state.
pub fn branch_probability(psi: &PureState, sign: Sign) -> f64 {
    let sg = sign.value();
    psi.excited()
        .iter()
        .zip(psi.ground().iter())
        .map(|(a, b)| (a + b * sg).norm_sqr())
        .sum::<f64>()
        / 2.0
}

/// Projects the atom onto `|±⟩`: coefficients `(A ± B)/√(2P±)`.
pub fn measure_branch(psi: &PureState, sign: Sign) -> Result<BranchResult> {
    let probability = branch_probability(psi, sign);
    if probability < NULL_BRANCH_THRESHOLD {
        return Err(Error::NullBranch { sign, probability });
    }
    let coeffs = (psi.excited() + psi.ground() * C64::from(sign.value()))
        / C64::new((2.0 * probability).sqrt(), 0.0);
    Ok(BranchResult {
        sign,
        probability,
        state: FieldState::new(coeffs)?,
    })
}

/// Exact closed-system trajectory from the standard initial state.
pub struct ClosedSimulation {
    params: SystemParams,
    prop: Propagator,
    psi0: PureState,
}

impl ClosedSimulation {
    /// Evolution under the full Hamiltonian.
    pub fn new(s: &SystemParams) -> Result<Self> {
        Self::with_hamiltonian(s, &build_full_hamiltonian(s))
    }

    pub fn with_hamiltonian(s: &SystemParams, h: &HermitianOperator) -> Result<Self> {
        s.validate()?;
        let psi0 = initial_state(s.alpha, s.trunc)?;
        let prop = Propagator::new(h)?;
        Ok(ClosedSimulation {
            params: *s,
            prop,
            psi0,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    pub fn initial(&self) -> &PureState {
        &self.psi0
    }

    pub fn state(&self, t: f64) -> PureState {
        self.prop.evolver(&self.psi0).expect("truncation checked").at(t)
    }

    /// `F(t) = |⟨Ψ(t)|ψ_app(t)⟩|²`.
    pub fn fidelity_full(&self, t: f64) -> Result<f64> {
        fidelity_against_approx(&self.params, &self.state(t), t)
    }

    /// `F±(t) = |⟨Ψ±(t)|ψ±(t)⟩|²`.
    pub fn fidelity_branch(&self, t: f64, sign: Sign) -> Result<f64> {
        fidelity_branch_of(&self.params, &self.state(t), t, sign)
    }

    /// One sample per time; the samples are computed in parallel.
    pub fn curves(&self, times: &[f64]) -> Result<Vec<ClosedSample>> {
        let ev = self.prop.evolver(&self.psi0)?;
        times
            .par_iter()
            .map(|&t| sample_at(&self.params, &ev.at(t), t))
            .collect()
    }
}

fn fidelity_against_approx(s: &SystemParams, psi: &PureState, t: f64) -> Result<f64> {
    let target = approx_state(s, t)?;
    Ok(inner(psi, &target)?.norm_sqr())
}

fn fidelity_branch_of(s: &SystemParams, psi: &PureState, t: f64, sign: Sign) -> Result<f64> {
    let exact = measure_branch(psi, sign)?;
    let target = target_branch(s, t, sign)?;
    Ok(exact.state.inner(&target.state)?.norm_sqr())
}

pub fn fidelity_full(s: &SystemParams, t: f64) -> Result<f64> {
    ClosedSimulation::new(s)?.fidelity_full(t)
}

pub fn fidelity_branch(s: &SystemParams, t: f64, sign: Sign) -> Result<f64> {
    ClosedSimulation::new(s)?.fidelity_branch(t, sign)
}

/// Exact and approximate observables at one time. Branch fidelities are
/// `None` where either branch is null.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosedSample {
    pub t: f64,
    pub fidelity: f64,
    pub fidelity_plus: Option<f64>,
    pub fidelity_minus: Option<f64>,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_plus_analytic: f64,
    pub p_minus_analytic: f64,
    pub norm: f64,
}

fn sample_at(s: &SystemParams, psi: &PureState, t: f64) -> Result<ClosedSample> {
    let branch = |sign| match fidelity_branch_of(s, psi, t, sign) {
        Ok(f) => Ok(Some(f)),
        Err(Error::NullBranch { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let w = normalizations_and_probabilities(s, t)?;
    Ok(ClosedSample {
        t,
        fidelity: fidelity_against_approx(s, psi, t)?,
        fidelity_plus: branch(Sign::Plus)?,
        fidelity_minus: branch(Sign::Minus)?,
        p_plus: branch_probability(psi, Sign::Plus),
        p_minus: branch_probability(psi, Sign::Minus),
        p_plus_analytic: w.p_plus,
        p_minus_analytic: w.p_minus,
        norm: psi.norm_sqr(),
    })
}

/// `n` uniformly spaced times covering `[t0, t1]` inclusive.
pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..n)
            .map(|i| if i + 1 == n { t1 } else { t0 + (t1 - t0) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::approx_state;
    use crate::hilbert::{apply_number, Atom, ModeLabel};
    use crate::model::{build_approx_hamiltonian, cat_time, total_excitation};

    fn small(levels: usize) -> SystemParams {
        SystemParams::reference().with_truncation(Truncation::square(levels).unwrap())
    }

    /// Classic fixed-step RK4 on the amplitude equations.
    fn rk4(s: &SystemParams, psi0: &PureState, t: f64, dt: f64) -> PureState {
        let steps = (t / dt).round() as usize;
        let h = t / steps as f64;
        let mut a = psi0.excited().clone();
        let mut b = psi0.ground().clone();
        for _ in 0..steps {
            let (k1a, k1b) = rhs_amplitudes(s, &a, &b);
            let (half, full) = (C64::from(h / 2.0), C64::from(h));
            let (two, sixth) = (C64::from(2.0), C64::from(h / 6.0));
            let (k2a, k2b) = rhs_amplitudes(s, &(&a + &k1a * half), &(&b + &k1b * half));
            let (k3a, k3b) = rhs_amplitudes(s, &(&a + &k2a * half), &(&b + &k2b * half));
            let (k4a, k4b) = rhs_amplitudes(s, &(&a + &k3a * full), &(&b + &k3b * full));
            a += (k1a + k2a * two + k3a * two + k4a) * sixth;
            b += (k1b + k2b * two + k3b * two + k4b) * sixth;
        }
        PureState::from_blocks(a, b).unwrap()
    }

    fn max_dev(x: &PureState, y: &PureState) -> f64 {
        (x.to_vector() - y.to_vector()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn propagator_reconstructs_hamiltonian() {
        let s = SystemParams::reference();
        let h = build_full_hamiltonian(&s);
        let p = Propagator::new(&h).unwrap();
        let scale = h.matrix().iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(p.reconstruction_error(&h) <= 1e-9 * scale);
        assert!(p.unitarity_error() <= 1e-10);
    }

    #[test]
    fn evolve_at_zero_is_identity() {
        let s = SystemParams {
            alpha: C64::new(0.3, 0.1),
            ..small(5)
        };
        let sim = ClosedSimulation::new(&s).unwrap();
        assert!(max_dev(&sim.state(0.0), sim.initial()) < 1e-12);
    }

    #[test]
    fn spectral_matches_rk4_oracle() {
        let s = small(4);
        let psi0 = initial_state(C64::new(0.6, 0.2), s.trunc).unwrap_or_else(|_| {
            let mut p = PureState::basis(s.trunc, Atom::Ground, 1, 2);
            p.normalize();
            p
        });
        let prop = Propagator::new(&build_full_hamiltonian(&s)).unwrap();
        for t in [0.37, 2.0, 10.0] {
            let exact = prop.evolve(&psi0, t).unwrap();
            let oracle = rk4(&s, &psi0, t, 1e-4);
            let d = max_dev(&exact, &oracle);
            assert!(d <= 1e-7, "t = {t}: {d:e}");
        }
    }

    #[test]
    fn rhs_zero_state() {
        let s = small(3);
        let z = DMatrix::zeros(3, 3);
        let (da, db) = rhs_amplitudes(&s, &z, &z);
        assert!(da.iter().chain(db.iter()).all(|c| c.norm() == 0.0));
    }

    #[test]
    fn rhs_single_excitation_reads_coupling() {
        let s = small(3);
        let a = DMatrix::zeros(3, 3);
        let mut b = DMatrix::zeros(3, 3);
        b[(1, 0)] = C64::new(1.0, 0.0);
        let (da, _) = rhs_amplitudes(&s, &a, &b);
        assert!((da[(0, 0)] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn rhs_matches_hamiltonian_action() {
        let s = small(4);
        let psi = initial_state(C64::new(0.7, -0.3), s.trunc).unwrap_or_else(|_| {
            PureState::basis(s.trunc, Atom::Excited, 2, 1)
        });
        let h = build_full_hamiltonian(&s);
        let hv = h.matrix() * psi.to_vector() * C64::new(0.0, -1.0);
        let (da, db) = rhs_amplitudes(&s, psi.excited(), psi.ground());
        let d = PureState::from_blocks(da, db).unwrap().to_vector();
        assert!((hv - d).iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn norm_rate_vanishes() {
        let s = small(6);
        let psi = initial_state(C64::new(0.5, 0.5), s.trunc).unwrap();
        let (da, db) = rhs_amplitudes(&s, psi.excited(), psi.ground());
        let d = PureState::from_blocks(da, db).unwrap();
        let rate = 2.0 * inner(&psi, &d).unwrap().re;
        assert!(rate.abs() <= 1e-12);
    }

    #[test]
    fn measurement_at_start() {
        let s = SystemParams::reference();
        let psi0 = initial_state(s.alpha, s.trunc).unwrap();
        let plus = measure_branch(&psi0, Sign::Plus).unwrap();
        assert!((plus.probability - 1.0).abs() < 1e-12);
        let target = target_branch(&s, 0.0, Sign::Plus).unwrap();
        assert!((plus.state.inner(&target.state).unwrap().norm() - 1.0).abs() < 1e-12);
        assert!(matches!(
            measure_branch(&psi0, Sign::Minus),
            Err(Error::NullBranch { sign: Sign::Minus, .. })
        ));
    }

    #[test]
    fn approx_hamiltonian_reproduces_closed_form() {
        let s = SystemParams::reference();
        let sim = ClosedSimulation::with_hamiltonian(&s, &build_approx_hamiltonian(&s).unwrap())
            .unwrap();
        for t in [0.0, 7.3, 40.0, cat_time(&s).unwrap()] {
            let f = inner(&sim.state(t), &approx_state(&s, t).unwrap()).unwrap().norm_sqr();
            assert!((f - 1.0).abs() <= 1e-9, "t = {t}: {f}");
        }
    }

    #[test]
    fn reference_fidelities_at_cat_time() {
        let s = SystemParams::reference();
        let ts = cat_time(&s).unwrap();
        let sim = ClosedSimulation::new(&s).unwrap();
        let f = sim.fidelity_full(ts).unwrap();
        let fp = sim.fidelity_branch(ts, Sign::Plus).unwrap();
        let fm = sim.fidelity_branch(ts, Sign::Minus).unwrap();
        assert!((f - 0.91).abs() <= 0.01, "F = {f}");
        assert!((fp - 0.95).abs() <= 0.01, "F+ = {fp}");
        assert!((fm - 0.86).abs() <= 0.01, "F- = {fm}");
    }

    #[test]
    fn zero_coupling_is_free_rotation() {
        let s = SystemParams {
            coupling: 0.0,
            ..small(8)
        };
        let s = SystemParams {
            alpha: C64::new(0.9, 0.0),
            ..s
        };
        let sim = ClosedSimulation::new(&s).unwrap();
        for t in [0.0, 1.0, 33.3] {
            let f = sim.fidelity_full(t).unwrap();
            assert!((f - 1.0).abs() < 1e-12, "t = {t}: {f}");
        }
    }

    #[test]
    fn excitation_and_norm_conserved() {
        let s = SystemParams::reference();
        let sim = ClosedSimulation::new(&s).unwrap();
        let n_op = total_excitation(s.trunc);
        let expect = |p: &PureState| {
            (p.to_vector().adjoint() * n_op.matrix() * p.to_vector())[(0, 0)].re
        };
        let n0 = expect(sim.initial());
        let ts = cat_time(&s).unwrap();
        for t in uniform_times(0.0, 2.0 * ts, 17) {
            let p = sim.state(t);
            assert!((p.norm_sqr() - 1.0).abs() <= 1e-10);
            assert!((expect(&p) - n0).abs() <= 1e-9);
        }
    }

    #[test]
    fn no_rotation_keeps_mode_symmetry() {
        let s = SystemParams {
            delta_sag: 0.0,
            ..small(8)
        };
        let s = SystemParams {
            alpha: C64::new(1.0, 0.0),
            ..s
        };
        let sim = ClosedSimulation::new(&s).unwrap();
        let p = sim.state(23.0);
        for blk in [p.excited(), p.ground()] {
            assert!((blk - blk.transpose()).iter().all(|c| c.norm() < 1e-10));
        }
        let ncw: f64 = inner(&p, &apply_number(&p, ModeLabel::Cw)).unwrap().re;
        let nccw: f64 = inner(&p, &apply_number(&p, ModeLabel::Ccw)).unwrap().re;
        assert!((ncw - nccw).abs() < 1e-10);
    }

    #[test]
    fn curves_probabilities_sum_to_one() {
        let s = small(9);
        let s = SystemParams {
            alpha: C64::new(1.2, 0.0),
            ..s
        };
        let sim = ClosedSimulation::new(&s).unwrap();
        let samples = sim.curves(&uniform_times(0.0, 20.0, 41)).unwrap();
        assert_eq!(samples.len(), 41);
        assert!(samples[0].fidelity_minus.is_none());
        for x in &samples {
            assert!((x.p_plus + x.p_minus - 1.0).abs() <= 1e-10);
            assert!((x.p_plus_analytic + x.p_minus_analytic - 1.0).abs() <= 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&x.fidelity));
        }
    }

    #[test]
    fn uniform_times_endpoints() {
        let t = uniform_times(0.0, 80.0, 2000);
        assert_eq!(t.len(), 2000);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[1999], 80.0);
        assert_eq!(uniform_times(1.0, 2.0, 1), vec![1.0]);
    }
}
