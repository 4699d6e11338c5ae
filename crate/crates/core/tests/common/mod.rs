//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use chiral_cat::hilbert::{PureState, Truncation};
use chiral_cat::model::SystemParams;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Composite index with the atom outermost, excited first.
pub fn idx(t: Truncation, excited: bool, m: usize, k: usize) -> usize {
    let w = if excited { 0 } else { 1 };
    (w * t.n_cw() + m) * t.n_ccw() + k
}

/// Annihilators `a_CW`, `a_CCW` and the atomic lowering operator.
pub fn operators(t: Truncation) -> (DMatrix<C64>, DMatrix<C64>, DMatrix<C64>) {
    let d = 2 * t.n_cw() * t.n_ccw();
    let mut a = DMatrix::zeros(d, d);
    let mut b = DMatrix::zeros(d, d);
    let mut sm = DMatrix::zeros(d, d);
    for e in [true, false] {
        for m in 0..t.n_cw() {
            for k in 0..t.n_ccw() {
                let col = idx(t, e, m, k);
                if m > 0 {
                    a[(idx(t, e, m - 1, k), col)] = c((m as f64).sqrt());
                }
                if k > 0 {
                    b[(idx(t, e, m, k - 1), col)] = c((k as f64).sqrt());
                }
                if e {
                    sm[(idx(t, false, m, k), col)] = c(1.0);
                }
            }
        }
    }
    (a, b, sm)
}

/// `Σ Δ_ε a†a + J(a†σ₋ + aσ₊)` from explicit operator products.
pub fn hamiltonian(s: &SystemParams) -> DMatrix<C64> {
    let (a, b, sm) = operators(s.trunc);
    let ad = a.adjoint();
    let bd = b.adjoint();
    let sp = sm.adjoint();
    &ad * &a * c(s.delta_cw())
        + &bd * &b * c(s.delta_ccw())
        + (&ad * &sm + &a * &sp + &bd * &sm + &b * &sp) * c(s.coupling)
}

/// Column-stacked Liouvillian: `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.
pub fn liouvillian(s: &SystemParams) -> DMatrix<C64> {
    let h = hamiltonian(s);
    let d = h.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    let (a, b, sm) = operators(s.trunc);
    let mi = C64::new(0.0, -1.0);
    let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)) * mi;
    for (rate, o) in [(s.kappa, a), (s.kappa, b), (s.gamma, sm)] {
        let od = o.adjoint();
        let n = &od * &o;
        let jump = o.conjugate().kronecker(&o);
        let anti = id.kronecker(&n) + n.transpose().kronecker(&id);
        l += (jump - anti * c(0.5)) * c(rate);
    }
    l
}

/// `ρ(t)` from the matrix exponential of the Liouvillian.
pub fn liouvillian_evolve(s: &SystemParams, rho0: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let d = rho0.nrows();
    let prop = (liouvillian(s) * c(t)).exp();
    let v = DMatrix::from_column_slice(d * d, 1, rho0.as_slice());
    let out = prop * v;
    DMatrix::from_column_slice(d, d, out.as_slice())
}

fn amplitude_rhs(s: &SystemParams, a: &DMatrix<C64>, b: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let (n, p) = a.shape();
    let mi = C64::new(0.0, -1.0);
    let mut da = DMatrix::zeros(n, p);
    let mut db = DMatrix::zeros(n, p);
    for m in 0..n {
        for k in 0..p {
            let e = s.delta_cw() * m as f64 + s.delta_ccw() * k as f64;
            let mut x = a[(m, k)] * e;
            let mut y = b[(m, k)] * e;
            if m + 1 < n {
                x += b[(m + 1, k)] * (s.coupling * ((m + 1) as f64).sqrt());
            }
            if k + 1 < p {
                x += b[(m, k + 1)] * (s.coupling * ((k + 1) as f64).sqrt());
            }
            if m > 0 {
                y += a[(m - 1, k)] * (s.coupling * (m as f64).sqrt());
            }
            if k > 0 {
                y += a[(m, k - 1)] * (s.coupling * (k as f64).sqrt());
            }
            da[(m, k)] = x * mi;
            db[(m, k)] = y * mi;
        }
    }
    (da, db)
}

/// Classical RK4 on the excited/ground amplitude equations.
pub fn rk4_amplitudes(s: &SystemParams, psi0: &PureState, t: f64, dt: f64) -> PureState {
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = c(t / steps as f64);
    let (mut a, mut b) = (psi0.excited().clone(), psi0.ground().clone());
    for _ in 0..steps {
        let (k1a, k1b) = amplitude_rhs(s, &a, &b);
        let (k2a, k2b) = amplitude_rhs(s, &(&a + &k1a * (h * 0.5)), &(&b + &k1b * (h * 0.5)));
        let (k3a, k3b) = amplitude_rhs(s, &(&a + &k2a * (h * 0.5)), &(&b + &k2b * (h * 0.5)));
        let (k4a, k4b) = amplitude_rhs(s, &(&a + &k3a * h), &(&b + &k3b * h));
        a += (k1a + k2a * c(2.0) + k3a * c(2.0) + k4a) * (h / 6.0);
        b += (k1b + k2b * c(2.0) + k3b * c(2.0) + k4b) * (h / 6.0);
    }
    PureState::from_blocks(a, b).unwrap()
}

pub fn max_abs_diff(x: &DMatrix<C64>, y: &DMatrix<C64>) -> f64 {
    (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `ψ±` up to normalization: `e^{iϑ}|α⁻α⁻⟩ ± e^{−iϑ}|α⁺α⁺⟩` with
/// `α^± = α e^{−i(Δ_ε ± ζ_ε)t}` and `ϑ = (ζ_CW+ζ_CCW)t/2`, built from Poisson sums.
pub fn target_field(s: &SystemParams, t: f64, plus: bool) -> DMatrix<C64> {
    let zcw = s.coupling * s.coupling / s.delta_cw();
    let zccw = s.coupling * s.coupling / s.delta_ccw();
    let theta = 0.5 * (zcw + zccw) * t;
    let coh = |alpha: C64, n: usize| -> Vec<C64> {
        let mut v = Vec::with_capacity(n);
        let mut fact = 1.0;
        for j in 0..n {
            if j > 0 {
                fact *= j as f64;
            }
            v.push((-0.5 * alpha.norm_sqr()).exp() * alpha.powu(j as u32) / fact.sqrt());
        }
        v
    };
    let (n, p) = (s.trunc.n_cw(), s.trunc.n_ccw());
    let rot = |d: f64, z: f64| s.alpha * C64::from_polar(1.0, -(d + z) * t);
    let (cp, kp) = (coh(rot(s.delta_cw(), zcw), n), coh(rot(s.delta_ccw(), zccw), p));
    let (cm, km) = (coh(rot(s.delta_cw(), -zcw), n), coh(rot(s.delta_ccw(), -zccw), p));
    let sign = if plus { 1.0 } else { -1.0 };
    let em = C64::from_polar(1.0, theta);
    DMatrix::from_fn(n, p, |m, k| em * cm[m] * km[k] + em.conj() * cp[m] * kp[k] * sign)
}
