use std::fs;
use std::path::Path;

use cbdc_portfolio::analysis::{sweep_deterministic, SweepOptions};
use cbdc_portfolio::cli::{render_sweep_svg, run, sweep_csv};
use cbdc_portfolio::model::{AgentKind, Economy, ModelInstance};
use cbdc_portfolio::solver::{solve, SolverConfig};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cbdc(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("cbdc").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn out_dir(dir: &TempDir, sub: &str) -> String {
    dir.path().join(sub).to_str().unwrap().to_string()
}

#[test]
fn calibrate_writes_table_and_summary() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "o");
    let r = cbdc(&["calibrate", "--out", &out]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let table = fs::read_to_string(dir.path().join("o/calibration.csv")).unwrap();
    assert!(table.starts_with("n_crisis_years,probability,compounded_return,bin\n"));
    let summary = fs::read_to_string(dir.path().join("o/calibration_summary.csv")).unwrap();
    assert!(summary.contains("equity_premium"));
}

#[test]
fn solve_reports_all_four_cells() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "o");
    let r = cbdc(&["solve", "--out", &out]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(dir.path().join("o/solve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(r.stdout.contains("LFL with_cbdc"));
}

#[test]
fn empty_panel_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let panel = write(dir.path(), "empty.csv", "");
    let r = cbdc(&["estimate", &panel, "--out", &out_dir(&dir, "o")]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn panel_with_missing_value_names_the_column() {
    let dir = TempDir::new().unwrap();
    let panel = write(
        dir.path(),
        "p.csv",
        "household_id,year,outcome,literacy_score,age\nh1,2010,1,2,NA\nh1,2012,0,2,43\n",
    );
    let r = cbdc(&["estimate", &panel, "--out", &out_dir(&dir, "o")]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("age"), "{}", r.stderr);
}

#[test]
fn malformed_config_is_exit_2() {
    let dir = TempDir::new().unwrap();
    for text in [
        "calibration.beta 0.8\n",
        "calibration.nonsense = 1\n",
        "calibration.beta = 0.8\ncalibration.beta = 0.9\n",
        "calibration.gamma = abc\n",
        "calibration.sigma = 1.0\n",
        "calibration.r_cbdc = 2.0\n",
    ] {
        let cfg = write(dir.path(), "bad.cfg", text);
        let r = cbdc(&["--config", &cfg, "solve", "--out", &out_dir(&dir, "o")]);
        assert_eq!(r.code, 2, "config {text:?}: {}", r.stderr);
    }
}

#[test]
fn perfectly_separated_panel_is_exit_4() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("household_id,year,outcome,literacy_score,married\n");
    for i in 0..40 {
        let married = i % 2;
        let score = i % 4;
        for year in [2010, 2012] {
            // `married` alone determines the outcome.
            text.push_str(&format!("h{i},{year},{married},{score},{married}\n"));
        }
    }
    let panel = write(dir.path(), "sep.csv", &text);
    let r = cbdc(&["estimate", &panel, "--out", &out_dir(&dir, "o")]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert!(r.stderr.contains("married"), "{}", r.stderr);
}

#[test]
fn unknown_wald_coefficient_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "o");
    assert_eq!(cbdc(&["synth", "--households", "400", "--out", &out]).code, 0);
    let panel = dir.path().join("o/panel.csv");
    let r = cbdc(&["estimate", panel.to_str().unwrap(), "--wald", "beta", "zeta", "--out", &out]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("zeta"));
}

#[test]
fn all_infeasible_sweep_is_exit_3() {
    let dir = TempDir::new().unwrap();
    // Second-period income so negative that no interior plan exists.
    let cfg = write(
        dir.path(),
        "neg.cfg",
        "sweep.s_start = -3\nsweep.s_end = -2\nsweep.s_points = 3\n",
    );
    let r = cbdc(&["--config", &cfg, "sweep", "deterministic", "--out", &out_dir(&dir, "o")]);
    assert_eq!(r.code, 3, "{}{}", r.stdout, r.stderr);
}

#[test]
fn zero_jobs_is_rejected() {
    let r = cbdc(&["--jobs", "0", "calibrate"]);
    assert_eq!(r.code, 2);
}

#[test]
fn sweeps_are_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.cfg", "sweep.s_points = 12\nsweep.mode = cold\n");
    let a = out_dir(&dir, "a");
    let b = out_dir(&dir, "b");
    assert_eq!(cbdc(&["--config", &cfg, "--jobs", "1", "sweep", "deterministic", "--out", &a]).code, 0);
    assert_eq!(cbdc(&["--config", &cfg, "--jobs", "4", "sweep", "deterministic", "--out", &b]).code, 0);
    let x = fs::read(dir.path().join("a/sweep_deterministic.csv")).unwrap();
    let y = fs::read(dir.path().join("b/sweep_deterministic.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    for sub in ["a", "b"] {
        let out = out_dir(&dir, sub);
        assert_eq!(cbdc(&["synth", "--seed", "11", "--households", "300", "--out", &out]).code, 0);
    }
    let x = fs::read(dir.path().join("a/panel.csv")).unwrap();
    let y = fs::read(dir.path().join("b/panel.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn plot_rerenders_identically_from_saved_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.cfg", "sweep.s_min_points = 9\n");
    let out = out_dir(&dir, "o");
    let r = cbdc(&["--config", &cfg, "--plot", "sweep", "stochastic", "--out", &out]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(dir.path().join("o/sweep_stochastic.csv")).unwrap();
    let svg = fs::read_to_string(dir.path().join("o/sweep_stochastic.svg")).unwrap();
    assert_eq!(render_sweep_svg(&csv).unwrap(), svg);
}

#[test]
fn single_point_sweep_matches_solve() {
    let base = ModelInstance::baseline(Economy::WithCbdc);
    let recs = sweep_deterministic(&base, &[1.0], &SweepOptions::default()).unwrap();
    let config = SolverConfig::default();
    for r in &recs {
        let inst = base.with_economy(r.economy);
        let s = solve(&inst, r.agent, &config, None).unwrap();
        let a = r.alloc.unwrap();
        assert!((a.risky - s.alloc.risky).abs() < 1e-10);
        assert!((a.deposits - s.alloc.deposits).abs() < 1e-10);
        assert!((a.cbdc - s.alloc.cbdc).abs() < 1e-10);
    }
    assert_eq!(recs.len(), 4);
    assert!(recs.iter().any(|r| r.agent == AgentKind::Lfl));
}

#[test]
fn cbdc_return_sweep_equalizes_at_deposit_rate() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "o");
    let r = cbdc(&["sweep", "cbdc-return", "--out", &out]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(dir.path().join("o/sweep_cbdc_return.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let rd = 1.0 / 0.82;
    let top: Vec<_> = rows
        .iter()
        .filter(|r| (r[0].parse::<f64>().unwrap() - rd).abs() < 1e-9 && &r[2] == "with_cbdc")
        .collect();
    assert_eq!(top.len(), 2);
    for row in top {
        let d: f64 = row[4].parse().unwrap();
        let m: f64 = row[5].parse().unwrap();
        assert!((d - m).abs() <= 1e-6, "d = {d}, m = {m}");
    }
}

#[test]
fn sweep_csv_header_is_stable() {
    let base = ModelInstance::baseline(Economy::WithCbdc);
    let recs = sweep_deterministic(&base, &[0.5], &SweepOptions::default()).unwrap();
    let text = sweep_csv(&recs);
    assert_eq!(
        text.lines().next().unwrap(),
        "sweep_parameter,agent,economy,a,d,m,c1,liquid_cbdc_share,portfolio_cbdc_share,p_eps,converged"
    );
}
