use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chiral-cat"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn simulate(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn manifest(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| (!c.is_empty()).then(|| c.parse().unwrap())).collect())
        .collect();
    (header, rows)
}

const SMALL_CLOSED: &str = "\
# short closed run
system.alpha = 0.6
system.truncation = 7
run.kind = closed_curves
run.t_max = 5
run.points = 51
";

const SMALL_OPEN: &str = "\
system.alpha = 0.5
system.truncation = 5
system.gamma = 0.05
run.kind = open_curves
run.t_max = 2
run.points = 21
";

#[test]
fn unknown_preset_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["simulate", "--preset", "nope", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
    assert!(!out.exists());
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    for (i, body) in ["system.alpah = 1.8\n", "system.alpha 1.8\n", "run.kind = closed\n", "system.kappa = -1\n"]
        .iter()
        .enumerate()
    {
        let cfg = write_config(dir.path(), &format!("bad{i}.cfg"), body);
        let out = dir.path().join(format!("o{i}"));
        let o = simulate(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(!out.exists(), "{body}");
    }
}

#[test]
fn missing_config_file_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(&dir.path().join("absent.cfg"), &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--preset", "fig2", "--config", "x"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn truncation_too_small_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.cfg", "system.alpha = 3\nsystem.truncation = 4\n");
    let o = simulate(&cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn closed_run_is_deterministic_and_digested() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", SMALL_CLOSED);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(simulate(&cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(simulate(&cfg, &b, &["--jobs", "1"]).status.code(), Some(0));
    let m = manifest(&a);
    let files = m["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["closed_fidelities.csv", "probabilities.csv", "analytic_probabilities.csv"]);
    for f in files {
        let path = f["path"].as_str().unwrap();
        let bytes = fs::read(a.join(path)).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(bytes, fs::read(b.join(path)).unwrap(), "{path}");
    }
    let (header, rows) = read_csv(&a.join("closed_fidelities.csv"));
    assert_eq!(header, ["t", "F", "F_plus", "F_minus"]);
    assert_eq!(rows.len(), 51);
    assert_eq!(rows[0][0], Some(0.0));
    assert_eq!(rows[50][0], Some(5.0));
    // P₋ vanishes at t = 0, so F₋ is undefined there.
    assert_eq!(rows[0][3], None);
    assert_eq!(m["derived"]["delta_cw"], 44.0);
    assert_eq!(m["config"]["run"]["kind"], "closed_curves");
    assert!(m["duration_s"].is_number());
}

#[test]
fn seed_free_manifests_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", SMALL_CLOSED);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(simulate(&cfg, &a, &["--seed-free"]).status.code(), Some(0));
    assert_eq!(simulate(&cfg, &b, &["--seed-free"]).status.code(), Some(0));
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
    assert!(manifest(&a).get("duration_s").is_none());
}

#[test]
fn sweep_matches_sequential_runs() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write_config(
        dir.path(),
        "s.cfg",
        &format!("{SMALL_OPEN}run.kind = sweep\nsweep.kind = open_curves\nsweep.kappa = 0.01, 0.1\n").replace("run.kind = open_curves\n", ""),
    );
    let out = dir.path().join("sweep");
    let o = simulate(&sweep, &out, &["--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for kappa in ["0.01", "0.1"] {
        let single = write_config(dir.path(), &format!("k{kappa}.cfg"), &format!("{SMALL_OPEN}system.kappa = {kappa}\n"));
        let alone = dir.path().join(format!("alone{kappa}"));
        assert_eq!(simulate(&single, &alone, &[]).status.code(), Some(0));
        for f in ["open_fidelities.csv", "open_probabilities.csv", "open_diagnostics.csv"] {
            assert_eq!(
                fs::read(out.join(format!("kappa_{kappa}")).join(f)).unwrap(),
                fs::read(alone.join(f)).unwrap(),
                "{kappa} {f}"
            );
        }
    }
    let m = manifest(&out);
    assert_eq!(m["files"].as_array().unwrap().len(), 6);
    assert_eq!(m["results"]["entries"][1]["kappa"], 0.1);
}

#[test]
fn open_trace_and_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "o.cfg", &format!("{SMALL_OPEN}system.kappa = 0.1\nrun.positivity = true\n"));
    let out = dir.path().join("o");
    assert_eq!(simulate(&cfg, &out, &[]).status.code(), Some(0));
    let (header, rows) = read_csv(&out.join("open_diagnostics.csv"));
    assert_eq!(header, ["t", "trace", "purity", "min_eigenvalue"]);
    for r in &rows {
        assert!((r[1].unwrap() - 1.0).abs() < 1e-8);
        assert!(r[3].unwrap() > -1e-8);
    }
    let (_, p) = read_csv(&out.join("open_probabilities.csv"));
    for r in &p {
        assert!((r[1].unwrap() + r[2].unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn wigner_map_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "w.cfg",
        "run.kind = wigner_map\nwigner.sources = analytic, exact\nwigner.modes = ccw\nwigner.signs = plus\n\
         grid.n_re = 41\ngrid.n_im = 31\nsystem.truncation = 10\nsystem.alpha = 1.2\n",
    );
    let out = dir.path().join("w");
    let o = simulate(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for src in ["analytic", "exact"] {
        let (header, rows) = read_csv(&out.join(format!("wigner_{src}_ccw_plus.csv")));
        assert_eq!(header, ["re_chi", "im_chi", "w"]);
        assert_eq!(rows.len(), 41 * 31);
        assert_eq!(rows[0][0], Some(-4.0));
        assert_eq!(rows[1][1], Some(-4.0 + 8.0 / 30.0));
        let side: Value = serde_json::from_slice(&fs::read(out.join(format!("wigner_{src}_ccw_plus.json"))).unwrap()).unwrap();
        assert_eq!(side["grid"]["n_re"], 41);
        assert_eq!(side["mode"], "ccw");
        assert_eq!(side["sign"], "plus");
        assert_eq!(side["source"], src);
        let w: Vec<f64> = rows.iter().map(|r| r[2].unwrap()).collect();
        let max = w.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(side["max"].as_f64().unwrap(), max);
    }
}

#[test]
fn fig4_matches_reference_fidelities() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig4");
    let o = run(&["simulate", "--preset", "fig4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = read_csv(&out.join("closed_fidelities.csv"));
    assert_eq!(rows.first().unwrap()[0], Some(0.0));
    assert_eq!(rows.last().unwrap()[0], Some(80.0));
    let ts = 22.0 * std::f64::consts::PI;
    let near = rows
        .iter()
        .min_by(|a, b| (a[0].unwrap() - ts).abs().total_cmp(&(b[0].unwrap() - ts).abs()))
        .unwrap();
    for (got, want) in near[1..].iter().zip([0.91, 0.95, 0.86]) {
        assert!((got.unwrap() - want).abs() <= 0.01, "{near:?}");
    }
    let m = manifest(&out);
    assert!((m["results"]["cat_time"]["F"].as_f64().unwrap() - 0.91).abs() <= 0.01);
    assert!(out.join("analytic_probabilities.csv").exists());
}

#[test]
fn sagnac_both_directions() {
    let o = run(&[
        "sagnac", "--n-r", "1.4", "--radius-m", "1.1e-3", "--lambda-m", "1.55e-6", "--omega-rad-s", "1e4", "--j-rad-s", "1e6",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    let shift = value("delta_sag_rad_s");
    assert!((value("delta_sag_over_j") - shift / 1e6).abs() < 1e-12);
    let back = run(&[
        "sagnac", "--n-r", "1.4", "--radius-m", "1.1e-3", "--lambda-m", "1.55e-6", "--delta-sag-rad-s", &format!("{shift:?}"),
    ]);
    let text = String::from_utf8(back.stdout).unwrap();
    let omega: f64 = text.lines().find_map(|l| l.strip_prefix("omega_rad_s = ")).unwrap().parse().unwrap();
    assert!((omega - 1e4).abs() < 1e-6);
    assert_eq!(run(&["sagnac", "--n-r", "0.5", "--radius-m", "1", "--lambda-m", "1", "--omega-rad-s", "1"]).status.code(), Some(2));
}

#[test]
fn validate_reports_dispersive_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.cfg", "system.alpha = 1.8\n");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dispersive"]["pass"], true);
    assert!((v["dispersive"]["sagnac_ratio_cw"].as_f64().unwrap() - 5.2e-4).abs() < 1e-5);
    let bad = write_config(dir.path(), "b.cfg", "system.delta = oops\n");
    assert_eq!(run(&["validate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn open_wigner_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ow.cfg",
        "run.kind = sweep\nsweep.kind = wigner_map\nsweep.kappa = 0, 0.05\nsystem.gamma = 0.02\n\
         system.alpha = 0.5\nsystem.truncation = 5\nwigner.sources = open\nwigner.time = 1.5\n\
         grid.n_re = 21\ngrid.n_im = 21\n",
    );
    let out = dir.path().join("ow");
    let o = simulate(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["files"].as_array().unwrap().len(), 16);
    for entry in m["results"]["entries"].as_array().unwrap() {
        for map in entry["results"]["maps"].as_array().unwrap() {
            assert!((map["quadrature"].as_f64().unwrap() - 1.0).abs() < 1e-2);
            assert_eq!(map["time"], 1.5);
        }
    }
    assert!(out.join("kappa_0.0/wigner_open_cw_minus.csv").exists());
}
