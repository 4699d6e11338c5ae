//! Adaptive explicit Runge-Kutta integration of complex-valued ODE systems.
//!
//! The stepper is the Dormand-Prince 8(5,3) pair with the Hairer-Wanner
//! error estimate and step-size controller. State is a flat complex slice;
//! the stepper keeps its proposed step between calls so that a trajectory
//! can be advanced from one sample time to the next without restarting.

#![allow(clippy::excessive_precision, clippy::needless_range_loop)]

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const DEFAULT_RTOL: f64 = 1e-8;
pub const DEFAULT_ATOL: f64 = 1e-10;

/// Right-hand side of `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]);

    /// Applied to the state after every accepted step.
    fn project(&mut self, _y: &mut [C64]) {}
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;
const EXPONENT: f64 = 1.0 / 8.0;
const MAX_STEPS: usize = 50_000_000;

/// Adaptive stepper holding its work buffers and the current step proposal.
pub struct Dop853 {
    tol: Tolerances,
    h: Option<f64>,
    last_rejected: bool,
    stats: Stats,
    k: [Vec<C64>; 12],
    k_fsal: Vec<C64>,
    fsal_valid: bool,
    y_stage: Vec<C64>,
    y_new: Vec<C64>,
}

impl Dop853 {
    pub fn new(n: usize, tol: Tolerances) -> Self {
        let zero = || vec![C64::new(0.0, 0.0); n];
        Dop853 {
            tol,
            h: None,
            last_rejected: false,
            stats: Stats::default(),
            k: std::array::from_fn(|_| zero()),
            k_fsal: zero(),
            fsal_valid: false,
            y_stage: zero(),
            y_new: zero(),
        }
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Advances `y` from `*t` to `t_end`, landing exactly on `t_end`.
    pub fn advance<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t: &mut f64,
        y: &mut [C64],
        t_end: f64,
    ) -> Result<()> {
        assert_eq!(y.len(), self.y_new.len(), "state length changed");
        if t_end <= *t {
            return Ok(());
        }
        if !self.fsal_valid {
            sys.rhs(*t, y, &mut self.k_fsal);
            self.stats.evaluations += 1;
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(sys, *t, y, t_end - *t),
        };
        let mut steps = 0usize;
        while *t < t_end {
            let remaining = t_end - *t;
            let landing = h >= remaining;
            let h_try = if landing { remaining } else { h };
            if h_try <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::IntegratorFailure {
                    t: *t,
                    reason: format!("step size underflow (h = {h_try:e})"),
                });
            }
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::IntegratorFailure {
                    t: *t,
                    reason: "step budget exhausted".into(),
                });
            }
            let err = self.attempt(sys, *t, y, h_try);
            if !err.is_finite() {
                self.stats.rejected += 1;
                self.last_rejected = true;
                h = h_try * FAC_MIN;
                continue;
            }
            let fac11 = err.powf(EXPONENT);
            if err <= 1.0 {
                self.stats.accepted += 1;
                *t = if landing { t_end } else { *t + h_try };
                y.copy_from_slice(&self.y_new);
                sys.project(y);
                sys.rhs(*t, y, &mut self.k_fsal);
                self.stats.evaluations += 1;
                let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h_try / fac;
                if self.last_rejected {
                    h_new = h_new.min(h_try);
                }
                self.last_rejected = false;
                // A short landing step should not shrink the proposal.
                h = if landing { h_new.max(h) } else { h_new };
            } else {
                self.stats.rejected += 1;
                self.last_rejected = true;
                h = h_try / (fac11 / SAFE).min(1.0 / FAC_MIN);
            }
        }
        self.h = Some(h);
        Ok(())
    }

    fn scaled_norm(&self, y: &[C64], v: &[C64]) -> f64 {
        let sum: f64 = y
            .iter()
            .zip(v)
            .map(|(yi, vi)| {
                let sk = self.tol.atol + self.tol.rtol * yi.norm();
                (vi.norm() / sk).powi(2)
            })
            .sum();
        (sum / y.len() as f64).sqrt()
    }

    fn initial_step<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &[C64], span: f64) -> f64 {
        let d0 = self.scaled_norm(y, y);
        let d1 = self.scaled_norm(y, &self.k_fsal);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(span);
        for ((ys, yi), fi) in self.y_stage.iter_mut().zip(y).zip(&self.k_fsal) {
            *ys = yi + fi * h0;
        }
        sys.rhs(t + h0, &self.y_stage, &mut self.k[0]);
        self.stats.evaluations += 1;
        let diff: Vec<C64> = self.k[0].iter().zip(&self.k_fsal).map(|(a, b)| a - b).collect();
        let d2 = self.scaled_norm(y, &diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(EXPONENT)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// One trial step of size `h`; fills `y_new` and returns the scaled error.
    fn attempt<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &[C64], h: f64) -> f64 {
        let n = y.len();
        // k[0] holds f(t, y) for the stage loop below.
        self.k[0].copy_from_slice(&self.k_fsal);
        for stage in 1..12 {
            let row = A[stage];
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (j, &a) in row.iter().enumerate() {
                    if a != 0.0 {
                        acc += self.k[j][i] * a;
                    }
                }
                self.y_stage[i] = y[i] + acc * h;
            }
            let (_, rest) = self.k.split_at_mut(stage);
            sys.rhs(t + C[stage] * h, &self.y_stage, &mut rest[0]);
            self.stats.evaluations += 1;
        }

        let mut err5 = 0.0;
        let mut err3 = 0.0;
        for i in 0..n {
            let mut incr = C64::new(0.0, 0.0);
            let mut e5 = C64::new(0.0, 0.0);
            for j in 0..12 {
                let kj = self.k[j][i];
                if B[j] != 0.0 {
                    incr += kj * B[j];
                }
                if ER[j] != 0.0 {
                    e5 += kj * ER[j];
                }
            }
            let e3 = incr - self.k[0][i] * BHH[0] - self.k[8][i] * BHH[1] - self.k[11][i] * BHH[2];
            let y_new = y[i] + incr * h;
            self.y_new[i] = y_new;
            let sk = self.tol.atol + self.tol.rtol * y[i].norm().max(y_new.norm());
            err5 += (e5.norm() / sk).powi(2);
            err3 += (e3.norm() / sk).powi(2);
        }
        let mut deno = err5 + 0.01 * err3;
        if deno <= 0.0 {
            deno = 1.0;
        }
        h.abs() * err5 * (1.0 / (n as f64 * deno)).sqrt()
    }
}

const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510e+00,
    0.281649658092772603273242802490e+00,
    0.333333333333333333333333333333e+00,
    0.25e+00,
    0.307692307692307692307692307692e+00,
    0.651282051282051282051282051282e+00,
    0.6e+00,
    0.857142857142857142857142857142e+00,
    1.0,
];

const A: [&[f64]; 12] = [
    &[],
    &[5.26001519587677318785587544488e-2],
    &[1.97250569845378994544595329183e-2, 5.91751709536136983633785987549e-2],
    &[2.95875854768068491816892993775e-2, 0.0, 8.87627564304205475450678981324e-2],
    &[
        2.41365134159266685502369798665e-1,
        0.0,
        -8.84549479328286085344864962717e-1,
        9.24834003261792003115737966543e-1,
    ],
    &[
        3.7037037037037037037037037037e-2,
        0.0,
        0.0,
        1.70828608729473871279604482173e-1,
        1.25467687566822425016691814123e-1,
    ],
    &[
        3.7109375e-2,
        0.0,
        0.0,
        1.70252211019544039314978060272e-1,
        6.02165389804559606850219397283e-2,
        -1.7578125e-2,
    ],
    &[
        3.70920001185047927108779319836e-2,
        0.0,
        0.0,
        1.70383925712239993810214054705e-1,
        1.07262030446373284651809199168e-1,
        -1.53194377486244017527936158236e-2,
        8.27378916381402288758473766002e-3,
    ],
    &[
        6.24110958716075717114429577812e-1,
        0.0,
        0.0,
        -3.36089262944694129406857109825e0,
        -8.68219346841726006818189891453e-1,
        2.75920996994467083049415600797e1,
        2.01540675504778934086186788979e1,
        -4.34898841810699588477366255144e1,
    ],
    &[
        4.77662536438264365890433908527e-1,
        0.0,
        0.0,
        -2.48811461997166764192642586468e0,
        -5.90290826836842996371446475743e-1,
        2.12300514481811942347288949897e1,
        1.52792336328824235832596922938e1,
        -3.32882109689848629194453265587e1,
        -2.03312017085086261358222928593e-2,
    ],
    &[
        -9.3714243008598732571704021658e-1,
        0.0,
        0.0,
        5.18637242884406370830023853209e0,
        1.09143734899672957818500254654e0,
        -8.14978701074692612513997267357e0,
        -1.85200656599969598641566180701e1,
        2.27394870993505042818970056734e1,
        2.49360555267965238987089396762e0,
        -3.0467644718982195003823669022e0,
    ],
    &[
        2.27331014751653820792359768449e0,
        0.0,
        0.0,
        -1.05344954667372501984066689879e1,
        -2.00087205822486249909675718444e0,
        -1.79589318631187989172765950534e1,
        2.79488845294199600508499808837e1,
        -2.85899827713502369474065508674e0,
        -8.87285693353062954433549289258e0,
        1.23605671757943030647266201528e1,
        6.43392746015763530355970484046e-1,
    ],
];

const B: [f64; 12] = [
    5.42937341165687622380535766363e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566e0,
    1.89151789931450038304281599044e0,
    -5.8012039600105847814672114227e0,
    3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1,
    2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
];

/// Weights of the embedded third-order estimate on stages 1, 9 and 12.
const BHH: [f64; 3] = [
    0.244094488188976377952755905512e+00,
    0.733846688281611857341361741547e+00,
    0.220588235294117647058823529412e-01,
];

const ER: [f64; 12] = [
    0.1312004499419488073250102996e-01,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753e+01,
    -0.4957589496572501915214079952e+00,
    0.1664377182454986536961530415e+01,
    -0.3503288487499736816886487290e+00,
    0.3341791187130174790297318841e+00,
    0.8192320648511571246570742613e-01,
    -0.2235530786388629525884427845e-01,
];

#[cfg(test)]
mod tests {
    use super::*;

    struct Rotation(C64);

    impl OdeSystem for Rotation {
        fn rhs(&mut self, _t: f64, y: &[C64], dy: &mut [C64]) {
            for (d, v) in dy.iter_mut().zip(y) {
                *d = self.0 * v;
            }
        }
    }

    /// Driven oscillator with explicit time dependence.
    struct Driven;

    impl OdeSystem for Driven {
        fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = C64::new(0.0, -3.0) * y[0] + C64::new(t.cos(), 0.0);
        }
    }

    #[test]
    fn tableau_row_sums_match_nodes() {
        for (row, c) in A.iter().zip(C) {
            let s: f64 = row.iter().sum();
            assert!((s - c).abs() < 1e-12, "{s} vs {c}");
        }
        let b: f64 = B.iter().sum();
        assert!((b - 1.0).abs() < 1e-14);
        let bhh: f64 = BHH.iter().sum();
        assert!((bhh - 1.0).abs() < 1e-14);
        let er: f64 = ER.iter().sum();
        assert!(er.abs() < 1e-14);
    }

    #[test]
    fn quadrature_order_conditions() {
        // Σ b_i c_i^{q-1} = 1/q for q = 1..8.
        for q in 1..=8 {
            let s: f64 = B.iter().zip(C).map(|(b, c)| b * c.powi(q - 1)).sum();
            assert!((s - 1.0 / q as f64).abs() < 1e-13, "order {q}: {s}");
        }
    }

    #[test]
    fn complex_rotation_matches_exponential() {
        let lambda = C64::new(-0.05, 7.0);
        let mut sys = Rotation(lambda);
        let mut y = vec![C64::new(1.0, 0.0), C64::new(0.2, -0.4)];
        let y0 = y.clone();
        let mut stepper = Dop853::new(2, Tolerances::default());
        let mut t = 0.0;
        stepper.advance(&mut sys, &mut t, &mut y, 10.0).unwrap();
        assert_eq!(t, 10.0);
        for (v, v0) in y.iter().zip(&y0) {
            let exact = v0 * (lambda * 10.0).exp();
            assert!((v - exact).norm() < 1e-7, "{v} vs {exact}");
        }
        let st = stepper.stats();
        assert!(st.accepted > 10 && st.accepted < 5000);
    }

    #[test]
    fn resumes_across_sample_times() {
        let mut y_once = vec![C64::new(0.5, 0.0)];
        let mut y_many = y_once.clone();
        let mut a = Dop853::new(1, Tolerances::default());
        let mut t = 0.0;
        a.advance(&mut Driven, &mut t, &mut y_once, 5.0).unwrap();
        let mut b = Dop853::new(1, Tolerances::default());
        let mut t = 0.0;
        for i in 1..=50 {
            b.advance(&mut Driven, &mut t, &mut y_many, 0.1 * i as f64).unwrap();
        }
        assert!((t - 5.0).abs() < 1e-12);
        // Exact: y' = −3i y + cos t.
        let i3 = C64::new(0.0, 3.0);
        let tt = 5.0;
        let particular = |t: f64| {
            // cos t = (e^{it} + e^{-it})/2, response to each exponential.
            let ip = C64::new(0.0, 1.0);
            (ip * t).exp() / (2.0 * (ip + i3)) + (-ip * t).exp() / (2.0 * (-ip + i3))
        };
        let exact = (C64::new(0.5, 0.0) - particular(0.0)) * (-i3 * tt).exp() + particular(tt);
        assert!((y_once[0] - exact).norm() < 1e-8);
        assert!((y_many[0] - exact).norm() < 1e-8);
    }

    #[test]
    fn zero_length_advance_is_noop() {
        let mut y = vec![C64::new(1.0, 1.0)];
        let mut s = Dop853::new(1, Tolerances::default());
        let mut t = 2.0;
        s.advance(&mut Rotation(C64::new(0.0, 1.0)), &mut t, &mut y, 2.0).unwrap();
        assert_eq!(y[0], C64::new(1.0, 1.0));
        assert_eq!(s.stats().evaluations, 0);
    }

    struct Blowup;

    impl OdeSystem for Blowup {
        fn rhs(&mut self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = y[0] * y[0] * y[0].norm();
        }
    }

    #[test]
    fn finite_time_blowup_reports_failure() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut s = Dop853::new(1, Tolerances::default());
        let mut t = 0.0;
        let r = s.advance(&mut Blowup, &mut t, &mut y, 2.0);
        assert!(matches!(r, Err(Error::IntegratorFailure { .. })), "{r:?}");
    }
}
