//! Named configurations that regenerate the data behind each figure.

use crate::analytic::Sign;
use crate::hilbert::ModeLabel;
use crate::wigner::{GridSpec, Source};

use super::config::{ExperimentConfig, MapTime, RunKind, TimeGrid};
use super::CliError;

pub const PRESET_NAMES: [&str; 7] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"];

/// Cavity loss rates of the open-system figures.
pub const SWEEP_KAPPA: [f64; 3] = [0.0025, 0.005, 0.01];
pub const PRESET_GAMMA: f64 = 0.005;

fn wigner(name: &str, source: Source) -> ExperimentConfig {
    let mut c = ExperimentConfig::base(name);
    c.run.kind = RunKind::WignerMap;
    c.run.wigner.sources = vec![source];
    c.run.wigner.modes = ModeLabel::ALL.to_vec();
    c.run.wigner.signs = Sign::BOTH.to_vec();
    c.run.wigner.time = MapTime::CatTime;
    c.run.wigner.grid = GridSpec::default();
    c
}

fn closed(name: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::base(name);
    c.run.kind = RunKind::ClosedCurves;
    c.run.times = TimeGrid {
        t_min: 0.0,
        t_max: 80.0,
        points: 2001,
    };
    c
}

fn open_sweep(name: &str, inner: RunKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::base(name);
    c.system.gamma = PRESET_GAMMA;
    c.run.kind = RunKind::Sweep;
    c.run.sweep.kappa = SWEEP_KAPPA.to_vec();
    c.run.sweep.inner = inner;
    c.run.times = TimeGrid {
        t_min: 0.0,
        t_max: 80.0,
        points: 401,
    };
    c
}

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let c = match name {
        "fig2" => wigner(name, Source::Analytic),
        "fig3" | "fig4" => closed(name),
        "fig5" => wigner(name, Source::Exact),
        "fig6" | "fig7" => open_sweep(name, RunKind::OpenCurves),
        "fig8" => {
            let mut c = open_sweep(name, RunKind::WignerMap);
            c.run.wigner = wigner(name, Source::Open).run.wigner;
            c
        }
        _ => return Err(CliError::UnknownPreset(name.to_string())),
    };
    Ok(c)
}
