//! Closed-form evolution under the approximate (conditional-rotation)
//! Hamiltonian.
//!
//! Starting from `|+⟩|α⟩|α⟩`, the ground branch rotates each mode at
//! `Δ_ε + ζ_ε` and the excited branch at `Δ_ε − ζ_ε`, so both field
//! components stay coherent states with amplitudes `α_ε^{(±)}(t)`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_amplitudes, FieldState, ModeLabel, PureState, DEFAULT_TAIL_THRESHOLD,
};
use crate::model::{stark_rates, SystemParams};

/// Probabilities below this are treated as a null measurement branch.
pub const NULL_BRANCH_THRESHOLD: f64 = 1e-14;

/// Atomic measurement outcome `|±⟩ = (|e⟩ ± |g⟩)/√2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Phase ϑ(t) and the four rotated coherent amplitudes at time t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchAmplitudes {
    pub theta: f64,
    pub cw_plus: C64,
    pub cw_minus: C64,
    pub ccw_plus: C64,
    pub ccw_minus: C64,
}

impl BranchAmplitudes {
    /// `α_ε^{(±)}(t)`; the `+` amplitude belongs to the ground branch.
    pub fn get(&self, mode: ModeLabel, sign: Sign) -> C64 {
        match (mode, sign) {
            (ModeLabel::Cw, Sign::Plus) => self.cw_plus,
            (ModeLabel::Cw, Sign::Minus) => self.cw_minus,
            (ModeLabel::Ccw, Sign::Plus) => self.ccw_plus,
            (ModeLabel::Ccw, Sign::Minus) => self.ccw_minus,
        }
    }
}

pub fn branch_amplitudes(s: &SystemParams, t: f64) -> Result<BranchAmplitudes> {
    let z = stark_rates(s)?;
    let rot = |delta: f64, zeta: f64| s.alpha * cis(-(delta + zeta) * t);
    Ok(BranchAmplitudes {
        theta: z.sum() * t / 2.0,
        cw_plus: rot(s.delta_cw(), z.cw),
        cw_minus: rot(s.delta_cw(), -z.cw),
        ccw_plus: rot(s.delta_ccw(), z.ccw),
        ccw_minus: rot(s.delta_ccw(), -z.ccw),
    })
}

/// Branch normalizations `M±` and detection probabilities `P±`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchWeights {
    pub p_plus: f64,
    pub p_minus: f64,
    /// `None` for a null branch.
    pub m_plus: Option<f64>,
    pub m_minus: Option<f64>,
}

impl BranchWeights {
    pub fn probability(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Plus => self.p_plus,
            Sign::Minus => self.p_minus,
        }
    }

    pub fn normalization(&self, sign: Sign) -> Result<f64> {
        let m = match sign {
            Sign::Plus => self.m_plus,
            Sign::Minus => self.m_minus,
        };
        m.ok_or(Error::NullBranch {
            sign,
            probability: self.probability(sign),
        })
    }
}

/// `Σ_{l=±1} exp[2ilϑ + |α|²(Σ_ε e^{2ilζ_ε t} − 2)]`, which is real.
fn interference_sum(s: &SystemParams, t: f64) -> Result<f64> {
    let z = stark_rates(s)?;
    let a2 = s.alpha.norm_sqr();
    let theta = z.sum() * t / 2.0;
    let mut total = C64::new(0.0, 0.0);
    for l in [1.0, -1.0] {
        let inner = cis(2.0 * l * z.cw * t) + cis(2.0 * l * z.ccw * t) - 2.0;
        total += (C64::new(0.0, 2.0 * l * theta) + inner * a2).exp();
    }
    Ok(total.re)
}

pub fn normalizations_and_probabilities(s: &SystemParams, t: f64) -> Result<BranchWeights> {
    let x = interference_sum(s, t)?;
    let (bp, bm) = (2.0 + x, 2.0 - x);
    let norm = |bracket: f64| (bracket / 4.0 >= NULL_BRANCH_THRESHOLD).then(|| bracket.powf(-0.5));
    Ok(BranchWeights {
        p_plus: bp / 4.0,
        p_minus: bm / 4.0,
        m_plus: norm(bp),
        m_minus: norm(bm),
    })
}

fn check_tail(s: &SystemParams) -> Result<()> {
    // Rotated amplitudes share |α|, so one check covers every time.
    for mode in ModeLabel::ALL {
        let n = s.trunc.levels(mode);
        let kept: f64 = coherent_amplitudes(s.alpha, n).iter().map(|c| c.norm_sqr()).sum();
        let tail = (1.0 - kept).max(0.0);
        if tail > DEFAULT_TAIL_THRESHOLD {
            return Err(Error::TruncationTooSmall {
                mode: mode.as_str(),
                tail,
                threshold: DEFAULT_TAIL_THRESHOLD,
            });
        }
    }
    Ok(())
}

fn coherent_product(s: &SystemParams, amps: &BranchAmplitudes, sign: Sign) -> FieldState {
    let t = s.trunc;
    FieldState::product(
        &coherent_amplitudes(amps.get(ModeLabel::Cw, sign), t.n_cw()),
        &coherent_amplitudes(amps.get(ModeLabel::Ccw, sign), t.n_ccw()),
    )
}

/// Fock expansion of the approximate state
/// `[e^{−iϑ}|g⟩|α⁺⟩|α⁺⟩ + e^{iϑ}|e⟩|α⁻⟩|α⁻⟩]/√2`, renormalized after
/// truncation.
pub fn approx_state(s: &SystemParams, t: f64) -> Result<PureState> {
    check_tail(s)?;
    let amps = branch_amplitudes(s, t)?;
    let h = 0.5f64.sqrt();
    let excited = coherent_product(s, &amps, Sign::Minus).into_coeffs() * (cis(amps.theta) * h);
    let ground = coherent_product(s, &amps, Sign::Plus).into_coeffs() * (cis(-amps.theta) * h);
    let mut state = PureState::from_blocks(excited, ground)?;
    state.normalize();
    Ok(state)
}

/// Post-selected target state `|ψ±(t)⟩` of the approximate dynamics.
#[derive(Clone, Debug)]
pub struct AnalyticBranch {
    pub sign: Sign,
    pub normalization: f64,
    pub probability: f64,
    /// Normalized in the truncated Fock basis.
    pub state: FieldState,
}

pub fn target_branch(s: &SystemParams, t: f64, sign: Sign) -> Result<AnalyticBranch> {
    check_tail(s)?;
    let weights = normalizations_and_probabilities(s, t)?;
    let normalization = weights.normalization(sign)?;
    let amps = branch_amplitudes(s, t)?;
    let minus = coherent_product(s, &amps, Sign::Minus).into_coeffs() * cis(amps.theta);
    let plus = coherent_product(s, &amps, Sign::Plus).into_coeffs() * cis(-amps.theta);
    let coeffs = (minus + plus * C64::from(sign.value())) * C64::new(normalization, 0.0);
    let mut state = FieldState::new(coeffs)?;
    state.normalize();
    Ok(AnalyticBranch {
        sign,
        normalization,
        probability: weights.probability(sign),
        state,
    })
}

/// Reusable closed-form Wigner evaluator for one branch and mode at fixed t.
#[derive(Clone, Debug)]
pub struct AnalyticWigner {
    prefactor: f64,
    sign: f64,
    alpha2: f64,
    plus: C64,
    minus: C64,
    /// Constant parts of the Λ² exponent.
    cross: C64,
}

impl AnalyticWigner {
    pub fn new(s: &SystemParams, t: f64, sign: Sign, mode: ModeLabel) -> Result<Self> {
        let weights = normalizations_and_probabilities(s, t)?;
        let m = weights.normalization(sign)?;
        let amps = branch_amplitudes(s, t)?;
        let z = stark_rates(s)?;
        let a2 = s.alpha.norm_sqr();
        let (zeta, zeta_bar) = (z.get(mode), z.get(mode.complement()));
        let cross = C64::new(0.0, -2.0 * amps.theta)
            + (cis(-2.0 * zeta_bar * t) - cis(-2.0 * zeta * t) - 2.0) * a2;
        Ok(AnalyticWigner {
            prefactor: 2.0 * m * m / PI,
            sign: sign.value(),
            alpha2: a2,
            plus: amps.get(mode, Sign::Plus),
            minus: amps.get(mode, Sign::Minus),
            cross,
        })
    }

    /// Complex value before discarding the imaginary residue.
    pub fn eval_complex(&self, chi: C64) -> C64 {
        let c2 = chi.norm_sqr();
        // Each Λ is a single exponential of its accumulated exponent.
        let l1 = (self.plus.conj() * chi * 2.0 + chi.conj() * self.plus * 2.0
            - 2.0 * self.alpha2
            - 2.0 * c2)
            .exp();
        let l4 = (self.minus.conj() * chi * 2.0 + chi.conj() * self.minus * 2.0
            - 2.0 * self.alpha2
            - 2.0 * c2)
            .exp();
        let l2 = (self.cross + chi * self.minus.conj() * 2.0 + chi.conj() * self.plus * 2.0
            - 2.0 * c2)
            .exp();
        let l3 = (self.cross.conj() + chi * self.plus.conj() * 2.0 + chi.conj() * self.minus * 2.0
            - 2.0 * c2)
            .exp();
        (l1 + (l2 + l3) * self.sign + l4) * self.prefactor
    }

    pub fn eval(&self, chi: C64) -> f64 {
        self.eval_complex(chi).re
    }
}

pub fn analytic_wigner(
    s: &SystemParams,
    t: f64,
    sign: Sign,
    mode: ModeLabel,
    chi: C64,
) -> Result<f64> {
    Ok(AnalyticWigner::new(s, t, sign, mode)?.eval(chi))
}
