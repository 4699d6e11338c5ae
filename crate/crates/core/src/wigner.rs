//! Wigner functions of single-mode states, `W(χ) = (2/π) Tr[D†(χ)ρD(χ)P]`
//! with `P = (−1)^{a†a}`, and their evaluation on rectangular grids.
//!
//! Densities are evaluated through `D(χ) P D†(χ) = D(2χ) P`, giving
//! `W(χ) = (2/π) Σ_{m,n} ρ_mn (−1)^m ⟨n|D(2χ)|m⟩` with no sum beyond the
//! truncation. The displaced-parity sum over Fock projectors is kept as an
//! independent route.

use std::f64::consts::FRAC_2_PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{AnalyticWigner, Sign};
use crate::closed::BranchResult;
use crate::error::{Error, Result};
use crate::hilbert::ModeLabel;
use crate::open::BranchDensity;

/// Largest magnitude a Wigner function can take.
pub const WIGNER_BOUND: f64 = FRAC_2_PI;

/// Associated Laguerre polynomial `L_n^{(a)}(x)` by upward recurrence.
pub fn laguerre(n: usize, a: usize, x: f64) -> f64 {
    let a = a as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `⟨n|D(χ)|l⟩`.
pub fn displacement_element(n: usize, l: usize, chi: C64) -> C64 {
    let x = chi.norm_sqr();
    let (lo, hi) = (n.min(l), n.max(l));
    let a = hi - lo;
    if a > 0 && x == 0.0 {
        return C64::new(0.0, 0.0);
    }
    // χ^{n−l} for n ≥ l, (−χ*)^{l−n} otherwise.
    let base = if n >= l { chi } else { -chi.conj() };
    let ln_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) - 0.5 * x
        + if a > 0 { a as f64 * base.norm().ln() } else { 0.0 };
    let phase = if a > 0 {
        C64::from_polar(1.0, a as f64 * base.arg())
    } else {
        C64::new(1.0, 0.0)
    };
    phase * (ln_mag.exp() * laguerre(lo, a, x))
}

/// `⟨n|D(χ)|l⟩` for `n < rows`, `l < cols`.
#[derive(Clone, Debug)]
pub struct DisplacementTable {
    values: DMatrix<C64>,
}

impl DisplacementTable {
    pub fn new(rows: usize, cols: usize, chi: C64) -> Self {
        let x = chi.norm_sqr();
        let size = rows.max(cols);
        let ln_fact: Vec<f64> = (0..size).map(ln_factorial).collect();
        let ln_r = if x > 0.0 { 0.5 * x.ln() } else { f64::NEG_INFINITY };
        let mut values = DMatrix::zeros(rows, cols);
        for a in 0..size {
            // One recurrence pass per offset a = |n − l|.
            let count = size - a;
            let mut lag = Vec::with_capacity(count);
            let af = a as f64;
            let (mut prev, mut cur) = (0.0, 1.0);
            for k in 0..count {
                if k == 0 {
                    lag.push(1.0);
                    prev = 1.0;
                    cur = 1.0 + af - x;
                    continue;
                }
                lag.push(cur);
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0 + af - x) * cur - (kf + af) * prev) / (kf + 1.0);
                prev = cur;
                cur = next;
            }
            let (below, above) = if a == 0 {
                (C64::new(1.0, 0.0), C64::new(1.0, 0.0))
            } else if x == 0.0 {
                (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
            } else {
                (
                    C64::from_polar(1.0, af * chi.arg()),
                    C64::from_polar(1.0, af * (-chi.conj()).arg()),
                )
            };
            for (lo, lg) in lag.iter().enumerate() {
                let hi = lo + a;
                let ln_mag = 0.5 * (ln_fact[lo] - ln_fact[hi]) - 0.5 * x
                    + if a > 0 { af * ln_r } else { 0.0 };
                let mag = ln_mag.exp() * lg;
                if hi < rows && lo < cols {
                    values[(hi, lo)] = below * mag;
                }
                if a > 0 && lo < rows && hi < cols {
                    values[(lo, hi)] = above * mag;
                }
            }
        }
        DisplacementTable { values }
    }

    pub fn get(&self, n: usize, l: usize) -> C64 {
        self.values[(n, l)]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.values
    }
}

/// `W(χ)` of a single-mode density matrix before the imaginary residue is
/// discarded.
pub fn wigner_density_complex(rho: &DMatrix<C64>, chi: C64) -> C64 {
    let n = rho.nrows();
    let table = DisplacementTable::new(n, n, chi * 2.0);
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..n {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mut col = C64::new(0.0, 0.0);
        for k in 0..n {
            col += rho[(m, k)] * table.get(k, m);
        }
        acc += col * sign;
    }
    acc * FRAC_2_PI
}

pub fn wigner_density(rho: &DMatrix<C64>, chi: C64) -> f64 {
    wigner_density_complex(rho, chi).re
}

/// `(2/π) Σ_l (−1)^l Σ_{m,n} ⟨m|D|l⟩* ρ_mn ⟨n|D|l⟩` with `l < cutoff`.
pub fn wigner_parity_sum(rho: &DMatrix<C64>, chi: C64, cutoff: usize) -> C64 {
    let n = rho.nrows();
    let table = DisplacementTable::new(n, cutoff, chi);
    let mut acc = C64::new(0.0, 0.0);
    for l in 0..cutoff {
        let col = table.matrix().column(l);
        let term = (col.adjoint() * rho * col)[(0, 0)];
        acc += if l % 2 == 0 { term } else { -term };
    }
    acc * FRAC_2_PI
}

/// Wigner function of one mode of a post-selected closed-system branch.
pub fn wigner_exact_branch(branch: &BranchResult, mode: ModeLabel, chi: C64) -> f64 {
    wigner_density(&branch.state.reduced_density(mode), chi)
}

/// Wigner function of one mode of a post-selected open-system branch.
pub fn wigner_open_branch(bd: &BranchDensity, mode: ModeLabel, chi: C64) -> f64 {
    wigner_density(&bd.reduced(mode), chi)
}

/// Origin of a Wigner map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Exact,
    Open,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::Exact => "exact",
            Source::Open => "open",
        }
    }
}

/// Something that can be evaluated at a phase-space point.
pub enum WignerSource {
    Analytic(AnalyticWigner),
    /// Single-mode density matrix.
    Density(DMatrix<C64>),
}

impl WignerSource {
    pub fn from_exact(branch: &BranchResult, mode: ModeLabel) -> Self {
        WignerSource::Density(branch.state.reduced_density(mode))
    }

    pub fn from_open(bd: &BranchDensity, mode: ModeLabel) -> Self {
        WignerSource::Density(bd.reduced(mode))
    }

    pub fn eval_complex(&self, chi: C64) -> C64 {
        match self {
            WignerSource::Analytic(w) => w.eval_complex(chi),
            WignerSource::Density(rho) => wigner_density_complex(rho, chi),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl Default for GridSpec {
    /// `[−4, 4]²` with 161 × 161 nodes.
    fn default() -> Self {
        GridSpec {
            re_min: -4.0,
            re_max: 4.0,
            im_min: -4.0,
            im_max: 4.0,
            n_re: 161,
            n_im: 161,
        }
    }
}

impl GridSpec {
    /// Square grid `[−half, half]²` with the given node spacing.
    pub fn square(half: f64, spacing: f64) -> Self {
        let n = (2.0 * half / spacing).round() as usize + 1;
        GridSpec {
            re_min: -half,
            re_max: half,
            im_min: -half,
            im_max: half,
            n_re: n,
            n_im: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bounds = [self.re_min, self.re_max, self.im_min, self.im_max];
        if bounds.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("grid bounds must be finite".into()));
        }
        if self.re_max <= self.re_min || self.im_max <= self.im_min {
            return Err(Error::InvalidParameter("grid bounds must be increasing".into()));
        }
        if self.n_re < 2 || self.n_im < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points per axis".into()));
        }
        Ok(())
    }

    pub fn d_re(&self) -> f64 {
        (self.re_max - self.re_min) / (self.n_re - 1) as f64
    }

    pub fn d_im(&self) -> f64 {
        (self.im_max - self.im_min) / (self.n_im - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.d_re() * self.d_im()
    }

    pub fn point(&self, i: usize, j: usize) -> C64 {
        C64::new(
            self.re_min + i as f64 * self.d_re(),
            self.im_min + j as f64 * self.d_im(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WignerMeta {
    pub mode: ModeLabel,
    pub sign: Sign,
    pub time: f64,
    pub source: Source,
}

/// Wigner values on a grid, stored with the real-axis index outermost.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub meta: WignerMeta,
    values: Vec<f64>,
    /// Largest discarded imaginary part.
    pub max_imag_residue: f64,
}

impl WignerGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.n_im + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(χ, W(χ))` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (C64, f64)> + '_ {
        (0..self.spec.n_re)
            .flat_map(move |i| (0..self.spec.n_im).map(move |j| (self.spec.point(i, j), self.value(i, j))))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Σ W ΔRe ΔIm`.
    pub fn quadrature(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_area()
    }

    pub fn argmax(&self) -> C64 {
        self.arg_by(|a, b| a > b)
    }

    pub fn argmin(&self) -> C64 {
        self.arg_by(|a, b| a < b)
    }

    fn arg_by(&self, better: impl Fn(f64, f64) -> bool) -> C64 {
        let mut best = 0;
        for (idx, v) in self.values.iter().enumerate() {
            if better(*v, self.values[best]) {
                best = idx;
            }
        }
        self.spec.point(best / self.spec.n_im, best % self.spec.n_im)
    }

    /// Largest pointwise difference to a grid on the same nodes.
    pub fn max_deviation(&self, other: &WignerGrid) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::InvalidParameter("grids are on different nodes".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Evaluates `source` at every node in parallel.
pub fn evaluate_grid(source: &WignerSource, spec: GridSpec, meta: WignerMeta) -> Result<WignerGrid> {
    spec.validate()?;
    let raw: Vec<C64> = (0..spec.n_re * spec.n_im)
        .into_par_iter()
        .map(|idx| source.eval_complex(spec.point(idx / spec.n_im, idx % spec.n_im)))
        .collect();
    if let Some(bad) = raw.iter().find(|w| !w.re.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite Wigner value {bad}")));
    }
    let max_imag_residue = raw.iter().fold(0.0_f64, |m, w| m.max(w.im.abs()));
    Ok(WignerGrid {
        spec,
        meta,
        values: raw.iter().map(|w| w.re).collect(),
        max_imag_residue,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Negativity {
    pub min_value: f64,
    /// `Σ max(0, −W) ΔRe ΔIm`.
    pub negative_volume: f64,
}

pub fn negativity(grid: &WignerGrid) -> Negativity {
    let neg: f64 = grid.values.iter().map(|w| (-w).max(0.0)).sum();
    Negativity {
        min_value: grid.min(),
        negative_volume: neg * grid.spec.cell_area(),
    }
}
