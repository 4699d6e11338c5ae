//! Turns a validated configuration into artifacts and a manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analytic::{normalizations_and_probabilities, AnalyticWigner, Sign};
use crate::closed::{measure_branch, ClosedSimulation};
use crate::hilbert::{check_truncation, ModeLabel};
use crate::model::{
    cat_time, dispersive_check_with, sagnac_shift, stark_rates, DispersiveReport, SystemParams,
    DEFAULT_COUPLING_THRESHOLD,
};
use crate::open::{branch_density, evolve_master, initial_density, run_master, sample_open, OpenSample};
use crate::wigner::{evaluate_grid, negativity, GridSpec, Negativity, Source, WignerGrid, WignerMeta, WignerSource};
use crate::Error;

use super::config::{ExperimentConfig, MapTime, RunKind};
use super::output::{write_all, write_atomic, Artifact, Csv, FileRecord};
use super::CliError;

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Leave wall-clock fields out of the manifest.
    pub seed_free: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Derived {
    pub delta_cw: f64,
    pub delta_ccw: f64,
    pub zeta_cw: Option<f64>,
    pub zeta_ccw: Option<f64>,
    pub cat_time: Option<f64>,
    pub dispersive: Option<DispersiveReport>,
}

impl Derived {
    pub fn of(s: &SystemParams, threshold: f64) -> Self {
        let z = stark_rates(s).ok();
        Derived {
            delta_cw: s.delta_cw(),
            delta_ccw: s.delta_ccw(),
            zeta_cw: z.map(|z| z.cw),
            zeta_ccw: z.map(|z| z.ccw),
            cat_time: cat_time(s).ok(),
            dispersive: dispersive_check_with(s, threshold, DEFAULT_COUPLING_THRESHOLD).ok(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub derived: Derived,
    pub results: Value,
    pub files: Vec<FileRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    pub seed_free: bool,
}

/// Artifacts of one run, not yet written.
#[derive(Clone, Debug)]
pub struct Produced {
    pub artifacts: Vec<Artifact>,
    pub results: Value,
}

fn opt(r: crate::Result<f64>) -> crate::Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NullBranch { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn closed_curves(cfg: &ExperimentConfig) -> crate::Result<Produced> {
    let s = &cfg.system;
    let sim = ClosedSimulation::new(s)?;
    let samples = sim.curves(&cfg.run.times.times())?;
    let mut fid = Csv::new(&["t", "F", "F_plus", "F_minus"]);
    let mut prob = Csv::new(&["t", "P_plus", "P_minus"]);
    let mut ana = Csv::new(&["t", "P_plus", "P_minus"]);
    for x in &samples {
        fid.row(&[Some(x.t), Some(x.fidelity), x.fidelity_plus, x.fidelity_minus]);
        prob.row(&[Some(x.t), Some(x.p_plus), Some(x.p_minus)]);
        ana.row(&[Some(x.t), Some(x.p_plus_analytic), Some(x.p_minus_analytic)]);
    }
    let at_ts = match cat_time(s) {
        Ok(ts) => json!({
            "t": ts,
            "F": sim.fidelity_full(ts)?,
            "F_plus": opt(sim.fidelity_branch(ts, Sign::Plus))?,
            "F_minus": opt(sim.fidelity_branch(ts, Sign::Minus))?,
        }),
        Err(_) => Value::Null,
    };
    let max_norm_drift = samples.iter().fold(0.0_f64, |m, x| m.max((x.norm - 1.0).abs()));
    Ok(Produced {
        artifacts: vec![
            Artifact::new("closed_fidelities.csv", fid.into_bytes()),
            Artifact::new("probabilities.csv", prob.into_bytes()),
            Artifact::new("analytic_probabilities.csv", ana.into_bytes()),
        ],
        results: json!({ "cat_time": at_ts, "max_norm_drift": max_norm_drift }),
    })
}

fn analytic_curves(cfg: &ExperimentConfig) -> crate::Result<Produced> {
    let mut csv = Csv::new(&["t", "P_plus", "P_minus", "M_plus", "M_minus"]);
    let mut max_sum_error = 0.0_f64;
    for t in cfg.run.times.times() {
        let w = normalizations_and_probabilities(&cfg.system, t)?;
        max_sum_error = max_sum_error.max((w.p_plus + w.p_minus - 1.0).abs());
        csv.row(&[Some(t), Some(w.p_plus), Some(w.p_minus), w.m_plus, w.m_minus]);
    }
    Ok(Produced {
        artifacts: vec![Artifact::new("analytic_probabilities.csv", csv.into_bytes())],
        results: json!({ "max_probability_sum_error": max_sum_error }),
    })
}

fn open_curves(cfg: &ExperimentConfig) -> crate::Result<Produced> {
    let s = &cfg.system;
    let grid = cfg.run.times.times();
    let ts = cat_time(s).ok();
    let mut times = grid.clone();
    if let Some(ts) = ts {
        times.push(ts);
        times.sort_by(f64::total_cmp);
    }
    let positivity = cfg.run.positivity;
    let mut samples: Vec<OpenSample> = Vec::with_capacity(grid.len());
    let mut at_ts = None;
    let mut next = 0;
    let stats = run_master(s, &times, cfg.run.tolerances, |t, rho| {
        let x = sample_open(s, rho, t, positivity)?;
        if Some(t) == ts && at_ts.is_none() {
            at_ts = Some(x);
        }
        if next < grid.len() && grid[next] == t {
            samples.push(x);
            next += 1;
        }
        Ok(())
    })?;
    let mut fid = Csv::new(&["t", "f", "f_plus", "f_minus"]);
    let mut prob = Csv::new(&["t", "P_plus", "P_minus"]);
    let mut diag = Csv::new(&["t", "trace", "purity", "min_eigenvalue"]);
    for x in &samples {
        fid.row(&[Some(x.t), Some(x.fidelity), x.fidelity_plus, x.fidelity_minus]);
        prob.row(&[Some(x.t), Some(x.p_plus), Some(x.p_minus)]);
        diag.row(&[Some(x.t), Some(x.trace), Some(x.purity), x.min_eigenvalue]);
    }
    let max_trace_drift = samples.iter().fold(0.0_f64, |m, x| m.max((x.trace - 1.0).abs()));
    Ok(Produced {
        artifacts: vec![
            Artifact::new("open_fidelities.csv", fid.into_bytes()),
            Artifact::new("open_probabilities.csv", prob.into_bytes()),
            Artifact::new("open_diagnostics.csv", diag.into_bytes()),
        ],
        results: json!({
            "cat_time": at_ts,
            "max_trace_drift": max_trace_drift,
            "integrator": stats,
        }),
    })
}

#[derive(Serialize)]
struct WignerSidecar<'a> {
    csv: &'a str,
    columns: [&'static str; 3],
    grid: GridSpec,
    #[serde(flatten)]
    meta: WignerMeta,
    min: f64,
    max: f64,
    argmin: [f64; 2],
    argmax: [f64; 2],
    quadrature: f64,
    negativity: Negativity,
    max_imag_residue: f64,
}

fn wigner_artifacts(g: &WignerGrid) -> (Vec<Artifact>, Value) {
    let stem = format!("wigner_{}_{}_{}", g.meta.source.as_str(), g.meta.mode.as_str(), g.meta.sign.as_str());
    let csv_name = format!("{stem}.csv");
    let mut csv = Csv::new(&["re_chi", "im_chi", "w"]);
    for (chi, w) in g.iter() {
        csv.row(&[Some(chi.re), Some(chi.im), Some(w)]);
    }
    let (amin, amax) = (g.argmin(), g.argmax());
    let side = WignerSidecar {
        csv: &csv_name,
        columns: ["re_chi", "im_chi", "w"],
        grid: g.spec,
        meta: g.meta,
        min: g.min(),
        max: g.max(),
        argmin: [amin.re, amin.im],
        argmax: [amax.re, amax.im],
        quadrature: g.quadrature(),
        negativity: negativity(g),
        max_imag_residue: g.max_imag_residue,
    };
    let summary = serde_json::to_value(&side).expect("serializable");
    (
        vec![
            Artifact::new(csv_name.clone(), csv.into_bytes()),
            Artifact::json(format!("{stem}.json"), &side),
        ],
        summary,
    )
}

fn wigner_map(cfg: &ExperimentConfig) -> crate::Result<Produced> {
    let s = &cfg.system;
    let w = &cfg.run.wigner;
    let t = match w.time {
        MapTime::CatTime => cat_time(s)?,
        MapTime::At(t) => t,
    };
    let mut artifacts = Vec::new();
    let mut summaries = Vec::new();
    for &source in &w.sources {
        let mut sources: Vec<(ModeLabel, Sign, WignerSource)> = Vec::new();
        match source {
            Source::Analytic => {
                for &sign in &w.signs {
                    for &mode in &w.modes {
                        sources.push((mode, sign, WignerSource::Analytic(AnalyticWigner::new(s, t, sign, mode)?)));
                    }
                }
            }
            Source::Exact => {
                let psi = ClosedSimulation::new(s)?.state(t);
                for &sign in &w.signs {
                    let b = measure_branch(&psi, sign)?;
                    for &mode in &w.modes {
                        sources.push((mode, sign, WignerSource::from_exact(&b, mode)));
                    }
                }
            }
            Source::Open => {
                let rho0 = initial_density(s.alpha, s.trunc)?;
                let rho = evolve_master(s, &rho0, t, cfg.run.tolerances)?;
                for &sign in &w.signs {
                    let b = branch_density(&rho, sign)?;
                    for &mode in &w.modes {
                        sources.push((mode, sign, WignerSource::from_open(&b, mode)));
                    }
                }
            }
        }
        for (mode, sign, src) in sources {
            let meta = WignerMeta { mode, sign, time: t, source };
            let g = evaluate_grid(&src, w.grid, meta)?;
            let (a, v) = wigner_artifacts(&g);
            artifacts.extend(a);
            summaries.push(v);
        }
    }
    Ok(Produced {
        artifacts,
        results: json!({ "time": t, "maps": summaries }),
    })
}

fn sagnac(cfg: &ExperimentConfig) -> crate::Result<Produced> {
    let p = cfg
        .physical
        .ok_or_else(|| Error::InvalidParameter("missing physical parameters".into()))?;
    let report = sagnac_report(&p, cfg.coupling_rad_s);
    Ok(Produced {
        artifacts: vec![Artifact::json("sagnac.json", &report)],
        results: serde_json::to_value(&report).expect("serializable"),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SagnacReport {
    pub physical: crate::model::PhysicalParams,
    pub delta_sag_rad_s: f64,
    pub coupling_rad_s: Option<f64>,
    pub delta_sag_over_j: Option<f64>,
}

pub fn sagnac_report(p: &crate::model::PhysicalParams, coupling_rad_s: Option<f64>) -> SagnacReport {
    let shift = sagnac_shift(p);
    SagnacReport {
        physical: *p,
        delta_sag_rad_s: shift,
        coupling_rad_s,
        delta_sag_over_j: coupling_rad_s.map(|j| shift / j),
    }
}

/// Directory name of a sweep entry.
pub fn sweep_dir(kappa: f64) -> PathBuf {
    PathBuf::from(format!("kappa_{kappa:?}"))
}

/// Configuration of one sweep entry, identical to a standalone run.
pub fn sweep_entry(cfg: &ExperimentConfig, kappa: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.system.kappa = kappa;
    c.run.kind = cfg.run.sweep.inner;
    c.run.sweep.kappa = Vec::new();
    c
}

fn sweep(cfg: &ExperimentConfig) -> crate::Result<Produced> {
    let entries: Vec<crate::Result<Produced>> = cfg
        .run
        .sweep
        .kappa
        .par_iter()
        .map(|&k| produce(&sweep_entry(cfg, k)))
        .collect();
    let mut artifacts = Vec::new();
    let mut results = Vec::new();
    for (&k, e) in cfg.run.sweep.kappa.iter().zip(entries) {
        let e = e?;
        let dir = sweep_dir(k);
        artifacts.extend(e.artifacts.into_iter().map(|a| a.nested(&dir)));
        results.push(json!({ "kappa": k, "dir": dir.to_string_lossy(), "results": e.results }));
    }
    Ok(Produced {
        artifacts,
        results: json!({ "entries": results }),
    })
}

/// Runs the simulation behind `cfg` without touching the filesystem.
pub fn produce(cfg: &ExperimentConfig) -> crate::Result<Produced> {
    if cfg.run.kind != RunKind::Sagnac {
        check_truncation(cfg.system.alpha, cfg.system.trunc, cfg.run.tail_threshold)?;
    }
    match cfg.run.kind {
        RunKind::ClosedCurves => closed_curves(cfg),
        RunKind::OpenCurves => open_curves(cfg),
        RunKind::AnalyticCurves => analytic_curves(cfg),
        RunKind::WignerMap => wigner_map(cfg),
        RunKind::Sagnac => sagnac(cfg),
        RunKind::Sweep => sweep(cfg),
    }
}

/// Validates, simulates, writes every artifact under `out`, then the manifest.
pub fn execute(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let produced = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(|| produce(cfg)),
        None => produce(cfg),
    }?;
    let files = write_all(out, &produced.artifacts)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        derived: Derived::of(&cfg.system, cfg.run.dispersive_threshold),
        results: produced.results,
        files,
        duration_s: (!opts.seed_free).then(|| start.elapsed().as_secs_f64()),
        seed_free: opts.seed_free,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable");
    bytes.push(b'\n');
    write_atomic(&out.join("manifest.json"), &bytes)?;
    Ok(manifest)
}
