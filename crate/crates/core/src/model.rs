//! Model parameters, the Sagnac-Fizeau shift and the three Hamiltonians.
//!
//! All simulation-facing rates are in units of the coupling `J`; physical
//! units only appear in [`PhysicalParams`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{Atom, ModeLabel, Truncation};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default threshold on `ζ_ε / 4Δ_sag`.
pub const DEFAULT_DISPERSIVE_THRESHOLD: f64 = 0.05;

/// Default threshold on `J√(n_ε+1) / |Δ_ε|`.
pub const DEFAULT_COUPLING_THRESHOLD: f64 = 0.25;

/// Physical resonator parameters in SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhysicalParams {
    pub refractive_index: f64,
    /// Resonator radius (m).
    pub radius: f64,
    /// Vacuum wavelength of the mode (m).
    pub wavelength: f64,
    /// Rotation angular velocity (rad/s).
    pub omega: f64,
    /// Material dispersion dn/dλ (1/m).
    pub dn_dlambda: f64,
}

impl PhysicalParams {
    pub fn new(refractive_index: f64, radius: f64, wavelength: f64, omega: f64) -> Result<Self> {
        let p = PhysicalParams {
            refractive_index,
            radius,
            wavelength,
            omega,
            dn_dlambda: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_dispersion(mut self, dn_dlambda: f64) -> Self {
        self.dn_dlambda = dn_dlambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.refractive_index > 1.0) {
            return bad("refractive index must exceed 1");
        }
        if !(self.radius > 0.0) {
            return bad("radius must be positive");
        }
        if !(self.wavelength > 0.0) {
            return bad("wavelength must be positive");
        }
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return bad("angular velocity must be finite and non-negative");
        }
        if !self.dn_dlambda.is_finite() {
            return bad("dispersion must be finite");
        }
        Ok(())
    }

    /// Resonance angular frequency `ω_c = 2πc/λ` (rad/s).
    pub fn cavity_frequency(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.wavelength
    }

    /// `Δ_sag / Ω`, the shift per unit angular velocity.
    fn shift_per_rotation(&self) -> f64 {
        let n = self.refractive_index;
        let bracket = 1.0 - 1.0 / (n * n) - (self.wavelength / n) * self.dn_dlambda;
        n * self.radius * self.cavity_frequency() / SPEED_OF_LIGHT * bracket
    }

    /// Angular velocity that produces `delta_sag` (rad/s) with these resonator
    /// parameters; `self.omega` is ignored.
    pub fn omega_for_shift(&self, delta_sag: f64) -> f64 {
        delta_sag / self.shift_per_rotation()
    }
}

/// Sagnac-Fizeau shift Δ_sag (rad/s).
pub fn sagnac_shift(p: &PhysicalParams) -> f64 {
    p.omega * p.shift_per_rotation()
}

/// Model constants in units of `J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SystemParams {
    pub coupling: f64,
    /// Atom-cavity detuning Δ = ω_c − ω_a.
    pub delta: f64,
    pub delta_sag: f64,
    pub kappa: f64,
    pub gamma: f64,
    #[serde(serialize_with = "serialize_complex")]
    pub alpha: C64,
    pub trunc: Truncation,
}

fn serialize_complex<S: serde::Serializer>(c: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Complex", 2)?;
    st.serialize_field("re", &c.re)?;
    st.serialize_field("im", &c.im)?;
    st.end()
}

impl SystemParams {
    /// α = 1.8, Δ/J = 33, Δ_sag/J = 11, lossless, 13 levels per mode.
    pub fn reference() -> Self {
        SystemParams {
            coupling: 1.0,
            delta: 33.0,
            delta_sag: 11.0,
            kappa: 0.0,
            gamma: 0.0,
            alpha: C64::new(1.8, 0.0),
            trunc: Truncation::default(),
        }
    }

    pub fn with_losses(mut self, kappa: f64, gamma: f64) -> Self {
        self.kappa = kappa;
        self.gamma = gamma;
        self
    }

    pub fn with_truncation(mut self, trunc: Truncation) -> Self {
        self.trunc = trunc;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return bad("coupling J must be finite and non-negative");
        }
        if !self.delta.is_finite() || !self.delta_sag.is_finite() {
            return bad("detunings must be finite");
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return bad("kappa must be finite and non-negative");
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad("gamma must be finite and non-negative");
        }
        if !self.alpha.re.is_finite() || !self.alpha.im.is_finite() {
            return bad("alpha must be finite");
        }
        Ok(())
    }

    pub fn delta_cw(&self) -> f64 {
        self.delta + self.delta_sag
    }

    pub fn delta_ccw(&self) -> f64 {
        self.delta - self.delta_sag
    }

    pub fn detuning(&self, mode: ModeLabel) -> f64 {
        match mode {
            ModeLabel::Cw => self.delta_cw(),
            ModeLabel::Ccw => self.delta_ccw(),
        }
    }
}

/// Dispersive Stark rates ζ_ε = J²/Δ_ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StarkRates {
    pub cw: f64,
    pub ccw: f64,
}

impl StarkRates {
    pub fn get(&self, mode: ModeLabel) -> f64 {
        match mode {
            ModeLabel::Cw => self.cw,
            ModeLabel::Ccw => self.ccw,
        }
    }

    pub fn sum(&self) -> f64 {
        self.cw + self.ccw
    }
}

pub fn stark_rates(s: &SystemParams) -> Result<StarkRates> {
    let (dcw, dccw) = (s.delta_cw(), s.delta_ccw());
    if dcw == 0.0 {
        return Err(Error::DegenerateDetuning("Δ_CW = Δ + Δ_sag vanishes"));
    }
    if dccw == 0.0 {
        return Err(Error::DegenerateDetuning("Δ_CCW = Δ − Δ_sag vanishes"));
    }
    let j2 = s.coupling * s.coupling;
    Ok(StarkRates {
        cw: j2 / dcw,
        ccw: j2 / dccw,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersiveReport {
    /// ζ_CW / 4Δ_sag; `None` when Δ_sag = 0.
    pub sagnac_ratio_cw: Option<f64>,
    pub sagnac_ratio_ccw: Option<f64>,
    /// J√(n_CW+1) / |Δ_CW| with n the highest retained Fock level.
    pub coupling_ratio_cw: f64,
    pub coupling_ratio_ccw: f64,
    pub threshold: f64,
    pub coupling_threshold: f64,
    pub pass: bool,
}

pub fn dispersive_check(s: &SystemParams) -> Result<DispersiveReport> {
    dispersive_check_with(s, DEFAULT_DISPERSIVE_THRESHOLD, DEFAULT_COUPLING_THRESHOLD)
}

pub fn dispersive_check_with(
    s: &SystemParams,
    threshold: f64,
    coupling_threshold: f64,
) -> Result<DispersiveReport> {
    let z = stark_rates(s)?;
    let sagnac_ratio = |zeta: f64| {
        (s.delta_sag != 0.0).then(|| (zeta / (4.0 * s.delta_sag)).abs())
    };
    let coupling_ratio = |mode: ModeLabel| {
        let n_max = (s.trunc.levels(mode) - 1) as f64;
        s.coupling * (n_max + 1.0).sqrt() / s.detuning(mode).abs()
    };
    let sagnac_ratio_cw = sagnac_ratio(z.cw);
    let sagnac_ratio_ccw = sagnac_ratio(z.ccw);
    let coupling_ratio_cw = coupling_ratio(ModeLabel::Cw);
    let coupling_ratio_ccw = coupling_ratio(ModeLabel::Ccw);
    let pass = matches!((sagnac_ratio_cw, sagnac_ratio_ccw),
        (Some(a), Some(b)) if a < threshold && b < threshold)
        && coupling_ratio_cw < coupling_threshold
        && coupling_ratio_ccw < coupling_threshold;
    Ok(DispersiveReport {
        sagnac_ratio_cw,
        sagnac_ratio_ccw,
        coupling_ratio_cw,
        coupling_ratio_ccw,
        threshold,
        coupling_threshold,
        pass,
    })
}

/// Cat-formation time `t_s = π / 2ζ_CW`.
pub fn cat_time(s: &SystemParams) -> Result<f64> {
    let z = stark_rates(s)?;
    if z.cw == 0.0 {
        return Err(Error::DegenerateDetuning("ζ_CW vanishes (J = 0)"));
    }
    if z.cw < 0.0 {
        return Err(Error::InvalidParameter(
            "cat time requires ζ_CW > 0 (Δ_CW > 0)".into(),
        ));
    }
    Ok(PI / (2.0 * z.cw))
}

/// Dense Hermitian matrix over the composite basis.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    trunc: Truncation,
    matrix: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn element(&self, row: (Atom, usize, usize), col: (Atom, usize, usize)) -> C64 {
        let t = self.trunc;
        self.matrix[(t.index(row.0, row.1, row.2), t.index(col.0, col.1, col.2))]
    }

    /// max |H − H†| elementwise.
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let n = m.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Drops every element between basis states that differ in photon
    /// numbers, keeping only the photon-number-diagonal part.
    pub fn photon_diagonal(&self) -> HermitianOperator {
        let t = self.trunc;
        let mut matrix = self.matrix.clone();
        for i in 0..t.dim() {
            let (_, m, k) = t.deindex(i);
            for j in 0..t.dim() {
                let (_, n, l) = t.deindex(j);
                if m != n || k != l {
                    matrix[(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
        HermitianOperator { trunc: t, matrix }
    }
}

/// Diagonal operator built from a function of the basis labels.
pub fn diagonal_operator(trunc: Truncation, f: impl Fn(Atom, usize, usize) -> f64) -> HermitianOperator {
    let mut matrix = DMatrix::zeros(trunc.dim(), trunc.dim());
    for i in 0..trunc.dim() {
        let (w, m, k) = trunc.deindex(i);
        matrix[(i, i)] = C64::new(f(w, m, k), 0.0);
    }
    HermitianOperator { trunc, matrix }
}

/// `n_CW + n_CCW + |e⟩⟨e|`, conserved by the full Hamiltonian.
pub fn total_excitation(trunc: Truncation) -> HermitianOperator {
    diagonal_operator(trunc, |w, m, k| {
        (m + k) as f64 + if w == Atom::Excited { 1.0 } else { 0.0 }
    })
}

pub fn sigma_z(trunc: Truncation) -> HermitianOperator {
    diagonal_operator(trunc, |w, _, _| w.sigma_z())
}

/// `H = Σ_ε [Δ_ε a_ε†a_ε + J(a_ε†σ₋ + a_ε σ₊)]` in the frame rotating at ω_a.
pub fn build_full_hamiltonian(s: &SystemParams) -> HermitianOperator {
    let t = s.trunc;
    let (dcw, dccw) = (s.delta_cw(), s.delta_ccw());
    let mut op = diagonal_operator(t, |_, m, k| dcw * m as f64 + dccw * k as f64);
    let j = s.coupling;
    for m in 0..t.n_cw() {
        for k in 0..t.n_ccw() {
            let g = t.index(Atom::Ground, m, k);
            // a_CW† σ₋ : |e, m−1, k⟩ → √m |g, m, k⟩
            if m > 0 {
                let e = t.index(Atom::Excited, m - 1, k);
                let v = C64::new(j * (m as f64).sqrt(), 0.0);
                op.matrix[(g, e)] = v;
                op.matrix[(e, g)] = v;
            }
            if k > 0 {
                let e = t.index(Atom::Excited, m, k - 1);
                let v = C64::new(j * (k as f64).sqrt(), 0.0);
                op.matrix[(g, e)] = v;
                op.matrix[(e, g)] = v;
            }
        }
    }
    op
}

fn dispersive_diagonal(s: &SystemParams, z: StarkRates) -> HermitianOperator {
    let (dcw, dccw) = (s.delta_cw(), s.delta_ccw());
    diagonal_operator(s.trunc, |w, m, k| {
        let sz = w.sigma_z();
        let (m, k) = (m as f64, k as f64);
        dcw * m + dccw * k - sz * (z.cw * m + z.ccw * k) - sz * z.sum() / 2.0
    })
}

/// Second-order effective Hamiltonian: the approximate Hamiltonian plus the
/// σ_z-conditioned exchange `−½(ζ_CW+ζ_CCW)(a_CW†a_CCW + h.c.)σ_z`.
pub fn build_effective_hamiltonian(s: &SystemParams) -> Result<HermitianOperator> {
    let z = stark_rates(s)?;
    let mut op = dispersive_diagonal(s, z);
    let t = s.trunc;
    let half = 0.5 * z.sum();
    for w in [Atom::Excited, Atom::Ground] {
        for m in 0..t.n_cw() {
            for k in 1..t.n_ccw() {
                if m + 1 >= t.n_cw() {
                    continue;
                }
                // a_CW† a_CCW : |m, k⟩ → √(m+1)√k |m+1, k−1⟩
                let from = t.index(w, m, k);
                let to = t.index(w, m + 1, k - 1);
                let v = -half * w.sigma_z() * ((m + 1) as f64).sqrt() * (k as f64).sqrt();
                op.matrix[(to, from)] = C64::new(v, 0.0);
                op.matrix[(from, to)] = C64::new(v, 0.0);
            }
        }
    }
    Ok(op)
}

/// `H_app = Σ_ε (Δ_ε n_ε − ζ_ε n_ε σ_z − ζ_ε σ_z/2)`, diagonal in the Fock
/// basis.
pub fn build_approx_hamiltonian(s: &SystemParams) -> Result<HermitianOperator> {
    Ok(dispersive_diagonal(s, stark_rates(s)?))
}
