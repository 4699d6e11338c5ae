//! Flat `key = value` experiment configuration with dotted section names.
//!
//! ```text
//! # reference parameters
//! system.alpha = 1.8
//! system.delta = 33
//! run.kind = closed_curves
//! ```

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analytic::Sign;
use crate::hilbert::{ModeLabel, Truncation, DEFAULT_TAIL_THRESHOLD};
use crate::integrate::Tolerances;
use crate::model::{PhysicalParams, SystemParams, DEFAULT_DISPERSIVE_THRESHOLD};
use crate::wigner::{GridSpec, Source};

use super::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    ClosedCurves,
    OpenCurves,
    WignerMap,
    AnalyticCurves,
    Sagnac,
    Sweep,
}

impl RunKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "closed_curves" => RunKind::ClosedCurves,
            "open_curves" => RunKind::OpenCurves,
            "wigner_map" => RunKind::WignerMap,
            "analytic_curves" => RunKind::AnalyticCurves,
            "sagnac" => RunKind::Sagnac,
            "sweep" => RunKind::Sweep,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunKind::ClosedCurves => "closed_curves",
            RunKind::OpenCurves => "open_curves",
            RunKind::WignerMap => "wigner_map",
            RunKind::AnalyticCurves => "analytic_curves",
            RunKind::Sagnac => "sagnac",
            RunKind::Sweep => "sweep",
        }
    }
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Uniform sample times `t_min..=t_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        crate::closed::uniform_times(self.t_min, self.t_max, self.points)
    }
}

/// When a Wigner map is taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapTime {
    CatTime,
    At(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WignerRun {
    pub modes: Vec<ModeLabel>,
    pub signs: Vec<Sign>,
    pub sources: Vec<Source>,
    pub time: MapTime,
    pub grid: GridSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRun {
    pub kappa: Vec<f64>,
    /// Run kind applied to every entry.
    pub inner: RunKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub kind: RunKind,
    pub times: TimeGrid,
    pub tolerances: Tolerances,
    /// Smallest density eigenvalue at every open-system sample.
    pub positivity: bool,
    pub tail_threshold: f64,
    pub dispersive_threshold: f64,
    pub wigner: WignerRun,
    pub sweep: SweepRun,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: SystemParams,
    pub physical: Option<PhysicalParams>,
    /// Coupling strength in rad/s, used to express the Sagnac shift in units of J.
    pub coupling_rad_s: Option<f64>,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Reference system with closed-curve defaults.
    pub fn base(name: &str) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            system: SystemParams::reference(),
            physical: None,
            coupling_rad_s: None,
            run: RunConfig {
                kind: RunKind::ClosedCurves,
                times: TimeGrid {
                    t_min: 0.0,
                    t_max: 80.0,
                    points: 2000,
                },
                tolerances: Tolerances::default(),
                positivity: false,
                tail_threshold: DEFAULT_TAIL_THRESHOLD,
                dispersive_threshold: DEFAULT_DISPERSIVE_THRESHOLD,
                wigner: WignerRun {
                    modes: ModeLabel::ALL.to_vec(),
                    signs: Sign::BOTH.to_vec(),
                    sources: vec![Source::Analytic],
                    time: MapTime::CatTime,
                    grid: GridSpec::default(),
                },
                sweep: SweepRun {
                    kappa: Vec::new(),
                    inner: RunKind::OpenCurves,
                },
            },
        }
    }

    /// Checks everything that can be checked without running a simulation.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: crate::Error| CliError::Config(e.to_string());
        self.system.validate().map_err(cfg)?;
        let r = &self.run;
        let t = &r.times;
        if !(t.t_min >= 0.0 && t.t_max >= t.t_min && t.t_max.is_finite()) {
            return Err(CliError::Config(format!(
                "time grid must satisfy 0 <= t_min <= t_max (got {} .. {})",
                t.t_min, t.t_max
            )));
        }
        if t.points == 0 {
            return Err(CliError::Config("run.points must be at least 1".into()));
        }
        if !(r.tolerances.rtol > 0.0 && r.tolerances.atol > 0.0) {
            return Err(CliError::Config("integrator tolerances must be positive".into()));
        }
        if !(r.tail_threshold > 0.0 && r.tail_threshold < 1.0) {
            return Err(CliError::Config("run.tail_threshold must lie in (0, 1)".into()));
        }
        if !(r.dispersive_threshold >= 0.0) {
            return Err(CliError::Config("dispersive.threshold must be non-negative".into()));
        }
        let w = &r.wigner;
        w.grid.validate().map_err(cfg)?;
        if w.modes.is_empty() || w.signs.is_empty() || w.sources.is_empty() {
            return Err(CliError::Config(
                "wigner.modes, wigner.signs and wigner.sources must be non-empty".into(),
            ));
        }
        if let MapTime::At(x) = w.time {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(CliError::Config("wigner.time must be a non-negative number".into()));
            }
        }
        match r.kind {
            RunKind::Sagnac => {
                let p = self.physical.ok_or_else(|| {
                    CliError::Config("sagnac runs need the physical.* parameters".into())
                })?;
                p.validate().map_err(cfg)?;
            }
            RunKind::Sweep => {
                if r.sweep.kappa.is_empty() {
                    return Err(CliError::Config("sweep.kappa must list at least one value".into()));
                }
                if r.sweep.kappa.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
                    return Err(CliError::Config("sweep.kappa values must be non-negative".into()));
                }
                if matches!(r.sweep.inner, RunKind::Sweep | RunKind::Sagnac) {
                    return Err(CliError::Config(format!(
                        "sweep.kind cannot be {}",
                        r.sweep.inner
                    )));
                }
            }
            _ => {}
        }
        if let Some(j) = self.coupling_rad_s {
            if !(j > 0.0 && j.is_finite()) {
                return Err(CliError::Config("physical.j_rad_s must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Parses `key = value` lines into a map; rejects duplicates and malformed
/// lines.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {}: expected `key = value`", no + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key or value", no + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{k}`", no + 1)));
        }
    }
    Ok(out)
}

fn num(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::Config(format!("`{key}`: expected a finite number, got `{v}`")))
}

fn count(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse::<usize>()
        .map_err(|_| CliError::Config(format!("`{key}`: expected a non-negative integer, got `{v}`")))
}

fn flag(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

fn list<T>(key: &str, v: &str, item: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            item(s).ok_or_else(|| CliError::Config(format!("`{key}`: unrecognized entry `{s}`")))
        })
        .collect()
}

fn mode(s: &str) -> Option<ModeLabel> {
    match s {
        "cw" => Some(ModeLabel::Cw),
        "ccw" => Some(ModeLabel::Ccw),
        _ => None,
    }
}

fn sign(s: &str) -> Option<Sign> {
    match s {
        "plus" | "+" => Some(Sign::Plus),
        "minus" | "-" => Some(Sign::Minus),
        _ => None,
    }
}

fn source(s: &str) -> Option<Source> {
    match s {
        "analytic" => Some(Source::Analytic),
        "exact" => Some(Source::Exact),
        "open" => Some(Source::Open),
        _ => None,
    }
}

#[derive(Default)]
struct Physical {
    n_r: Option<f64>,
    radius: Option<f64>,
    lambda: Option<f64>,
    omega: Option<f64>,
    dn_dlambda: Option<f64>,
}

/// Applies parsed pairs on top of `base`. Unknown keys are errors.
pub fn apply_pairs(
    mut cfg: ExperimentConfig,
    pairs: &BTreeMap<String, String>,
) -> Result<ExperimentConfig, CliError> {
    let mut alpha = cfg.system.alpha;
    let (mut n_cw, mut n_ccw) = (cfg.system.trunc.n_cw(), cfg.system.trunc.n_ccw());
    let mut phys = Physical::default();
    let mut any_phys = false;
    if pairs.contains_key("system.truncation")
        && (pairs.contains_key("system.n_cw") || pairs.contains_key("system.n_ccw"))
    {
        return Err(CliError::Config(
            "`system.truncation` cannot be combined with `system.n_cw`/`system.n_ccw`".into(),
        ));
    }
    for (key, v) in pairs {
        let k = key.as_str();
        let s = &mut cfg.system;
        let r = &mut cfg.run;
        match k {
            "name" => cfg.name = v.clone(),
            "system.coupling" => s.coupling = num(k, v)?,
            "system.delta" => s.delta = num(k, v)?,
            "system.delta_sag" => s.delta_sag = num(k, v)?,
            "system.kappa" => s.kappa = num(k, v)?,
            "system.gamma" => s.gamma = num(k, v)?,
            "system.alpha" => alpha.re = num(k, v)?,
            "system.alpha_im" => alpha.im = num(k, v)?,
            "system.truncation" => {
                n_cw = count(k, v)?;
                n_ccw = n_cw;
            }
            "system.n_cw" => n_cw = count(k, v)?,
            "system.n_ccw" => n_ccw = count(k, v)?,
            "physical.n_r" => phys.n_r = Some(num(k, v)?),
            "physical.radius_m" => phys.radius = Some(num(k, v)?),
            "physical.lambda_m" => phys.lambda = Some(num(k, v)?),
            "physical.omega_rad_s" => phys.omega = Some(num(k, v)?),
            "physical.dn_dlambda" => phys.dn_dlambda = Some(num(k, v)?),
            "physical.j_rad_s" => cfg.coupling_rad_s = Some(num(k, v)?),
            "run.kind" => {
                r.kind = RunKind::parse(v)
                    .ok_or_else(|| CliError::Config(format!("`{k}`: unknown run kind `{v}`")))?
            }
            "run.t_min" => r.times.t_min = num(k, v)?,
            "run.t_max" => r.times.t_max = num(k, v)?,
            "run.points" => r.times.points = count(k, v)?,
            "run.rtol" => r.tolerances.rtol = num(k, v)?,
            "run.atol" => r.tolerances.atol = num(k, v)?,
            "run.positivity" => r.positivity = flag(k, v)?,
            "run.tail_threshold" => r.tail_threshold = num(k, v)?,
            "dispersive.threshold" => r.dispersive_threshold = num(k, v)?,
            "wigner.modes" => r.wigner.modes = list(k, v, mode)?,
            "wigner.signs" => r.wigner.signs = list(k, v, sign)?,
            "wigner.sources" => r.wigner.sources = list(k, v, source)?,
            "wigner.time" => {
                r.wigner.time = if v == "ts" {
                    MapTime::CatTime
                } else {
                    MapTime::At(num(k, v)?)
                }
            }
            "grid.re_min" => r.wigner.grid.re_min = num(k, v)?,
            "grid.re_max" => r.wigner.grid.re_max = num(k, v)?,
            "grid.im_min" => r.wigner.grid.im_min = num(k, v)?,
            "grid.im_max" => r.wigner.grid.im_max = num(k, v)?,
            "grid.n_re" => r.wigner.grid.n_re = count(k, v)?,
            "grid.n_im" => r.wigner.grid.n_im = count(k, v)?,
            "sweep.kappa" => r.sweep.kappa = list(k, v, |x| x.parse::<f64>().ok())?,
            "sweep.kind" => {
                r.sweep.inner = RunKind::parse(v)
                    .ok_or_else(|| CliError::Config(format!("`{k}`: unknown run kind `{v}`")))?
            }
            _ => return Err(CliError::Config(format!("unknown key `{k}`"))),
        }
        any_phys |= k.starts_with("physical.") && k != "physical.j_rad_s";
    }
    cfg.system.alpha = C64::new(alpha.re, alpha.im);
    cfg.system.trunc = Truncation::new(n_cw, n_ccw).map_err(|e| CliError::Config(e.to_string()))?;
    if any_phys {
        let missing = |what: &str| CliError::Config(format!("missing `physical.{what}`"));
        let p = PhysicalParams::new(
            phys.n_r.ok_or_else(|| missing("n_r"))?,
            phys.radius.ok_or_else(|| missing("radius_m"))?,
            phys.lambda.ok_or_else(|| missing("lambda_m"))?,
            phys.omega.ok_or_else(|| missing("omega_rad_s"))?,
        )
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_dispersion(phys.dn_dlambda.unwrap_or(0.0));
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        cfg.physical = Some(p);
    }
    Ok(cfg)
}

/// Parses a configuration file body on top of the reference defaults.
pub fn parse_config(text: &str, default_name: &str) -> Result<ExperimentConfig, CliError> {
    let pairs = parse_pairs(text)?;
    let cfg = apply_pairs(ExperimentConfig::base(default_name), &pairs)?;
    cfg.validate()?;
    Ok(cfg)
}
