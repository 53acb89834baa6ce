use std::path::Path;
use std::process::{Command, Output};

fn ddxy(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddxy"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("DDXY_OMEGA")
        .output()
        .expect("failed to launch ddxy")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const FAST_SWEEP: &[&str] = &["--n-random", "2", "--t-total", "150", "--transient", "50"];

fn sweep(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "mf-sweep",
        "--mu-min",
        "-5",
        "--mu-max",
        "10",
        "--mu-steps",
        "2",
        "--omega-min",
        "0",
        "--omega-max",
        "2",
    ];
    args.extend_from_slice(&["--omega-steps", "2", "--chunk", "1"]);
    args.extend_from_slice(FAST_SWEEP);
    args.extend_from_slice(extra);
    ddxy(out, &args)
}

#[test]
fn sweep_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(sweep(&a, &["--seed", "7"]).status.success());
    assert!(sweep(&b, &["--seed", "7"]).status.success());
    let ca = std::fs::read(a.join("mf_sweep.csv")).unwrap();
    let cb = std::fs::read(b.join("mf_sweep.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with(
        "mu_over_gamma,omega_over_gamma,phase_label,n_A,n_B,lc_period,lc_amplitude,n_attractors\n"
    ));
    let m = json(&a.join("mf-sweep.manifest.json"));
    assert_eq!(m["master_seed"], 7);
    assert_eq!(m["settings"]["sweep.mu_steps"], "2");
    assert_eq!(m["outputs"][0], "mf_sweep.csv");
}

#[test]
fn resumed_sweep_matches_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let (full, part) = (dir.path().join("full"), dir.path().join("part"));
    assert!(sweep(&full, &[]).status.success());
    assert!(sweep(&part, &[]).status.success());
    let csv = part.join("mf_sweep.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let kept: Vec<&str> = text.lines().take(3).collect();
    std::fs::write(&csv, kept.join("\n") + "\n").unwrap();
    let out = sweep(&part, &["--resume"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 of 4 points computed"));
    assert_eq!(
        std::fs::read(&csv).unwrap(),
        std::fs::read(full.join("mf_sweep.csv")).unwrap()
    );
}

#[test]
fn undriven_point_is_a_single_dark_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "mf-sweep",
        "--mu-min",
        "3",
        "--mu-max",
        "3",
        "--mu-steps",
        "1",
    ];
    args.extend_from_slice(&["--omega-min", "0", "--omega-max", "0", "--omega-steps", "1"]);
    args.extend_from_slice(FAST_SWEEP);
    assert!(ddxy(dir.path(), &args).status.success());
    let text = std::fs::read_to_string(dir.path().join("mf_sweep.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let fields: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(&fields[..3], &["3", "0", "U1"]);
}

#[test]
fn oracle_suite_passes_and_flags_an_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let ok = ddxy(dir.path(), &["oracle-check"]);
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let report = json(&dir.path().join("oracle_check.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 7);

    let bad = ddxy(
        dir.path(),
        &["oracle-check", "--inject-fault", "permsym_vs_dense_steady"],
    );
    assert_eq!(bad.status.code(), Some(6));
    let report = json(&dir.path().join("oracle_check.json"));
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["permsym_vs_dense_steady"]);
}

#[test]
fn oracle_tolerance_override_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddxy(
        dir.path(),
        &[
            "oracle-check",
            "--tolerance",
            "1e-2",
            "--only",
            "single_site",
        ],
    );
    assert!(out.status.success());
    let report = json(&dir.path().join("oracle_check.json"));
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 3);
    assert!(checks
        .iter()
        .all(|c| c["tolerance"] == 1e-2 && c["passed"] == true));
}

#[test]
fn single_undriven_site_has_gap_half_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddxy(
        dir.path(),
        &[
            "gap",
            "--coupling",
            "infinite",
            "--n",
            "1",
            "--omega",
            "0",
            "--mu",
            "1.5",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("mu_over_gamma,omega_over_gamma,gap_over_gamma,n_sites")
    );
    let f: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!((f[0], f[1], f[3]), ("1.5", "0", "1"));
    assert!((f[2].parse::<f64>().unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn permsym_gap_is_not_below_dense_gap() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let base = [
        "gap",
        "--coupling",
        "infinite",
        "--n",
        "2",
        "--mu",
        "-1",
        "--omega",
        "1.5",
        "--solver",
    ];
    let run = |out: &Path, solver: &str| {
        let mut args = base.to_vec();
        args.push(solver);
        assert!(ddxy(out, &args).status.success());
        let text = std::fs::read_to_string(out.join("gap.csv")).unwrap();
        text.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(2)
            .unwrap()
            .parse::<f64>()
            .unwrap()
    };
    let (dense, sym) = (run(&a, "dense"), run(&b, "permsym"));
    // The symmetric sector holds a subset of the spectrum.
    assert!(sym >= dense - 1e-9, "{sym} < {dense}");
}

#[test]
fn undriven_trajectory_has_no_jumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddxy(
        dir.path(),
        &[
            "trajectory",
            "--n",
            "3",
            "--omega",
            "0",
            "--t-final",
            "60",
            "--count",
            "2",
            "--sample-dt",
            "1",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for k in 0..2 {
        let jumps = std::fs::read_to_string(dir.path().join(format!("jumps_{k}.csv"))).unwrap();
        assert_eq!(jumps, "t,site\n");
        let traj = std::fs::read_to_string(dir.path().join(format!("trajectory_{k}.csv"))).unwrap();
        assert!(traj.starts_with("t,N,n_0,n_1,n_2,sy_0,sy_1,sy_2\n"));
        assert_eq!(traj.lines().count(), 62);
    }
    let stats = json(&dir.path().join("stats.json"));
    for key in [
        "sigma_y_corr",
        "stderr",
        "dN2_over_N",
        "tau1",
        "tau2",
        "gamma_toy",
        "n_switches",
    ] {
        assert!(stats.get(key).is_some(), "missing {key}");
    }
    assert_eq!(stats["photon_number"], 0.0);
    assert!(stats["tau1"].is_null());
}

#[test]
fn required_switching_without_bistability_is_insufficient_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddxy(
        dir.path(),
        &[
            "trajectory",
            "--n",
            "2",
            "--omega",
            "0",
            "--t-final",
            "5",
            "--switching",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.path().join("stats.json").exists());
}

#[test]
fn stability_reports_one_unstable_branch_in_the_bistable_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddxy(dir.path(), &["stability", "--mu", "-5", "--omega", "2"]);
    assert!(out.status.success());
    let report = json(&dir.path().join("stability.json"));
    let classes: Vec<&str> = report["branches"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["classification"].as_str().unwrap())
        .collect();
    assert_eq!(classes.len(), 3);
    assert_eq!(classes.iter().filter(|c| **c == "GLOBAL_K0").count(), 1);
    let csv = std::fs::read_to_string(dir.path().join("stability_branch0.csv")).unwrap();
    assert!(
        csv.starts_with("k,re_omega_1,re_omega_2,re_omega_3,im_omega_1,im_omega_2,im_omega_3\n")
    );

    let calm = ddxy(dir.path(), &["stability", "--omega", "0"]);
    assert!(calm.status.success());
    let report = json(&dir.path().join("stability.json"));
    assert_eq!(report["branches"][0]["classification"], "STABLE");
}

#[test]
fn config_file_and_environment_feed_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "mu = -5.0\n[plot]\nomega_min = 1.0\nomega_max = 3.0\nomega_steps = 3\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ddxy"))
        .args(["--out"])
        .arg(dir.path())
        .arg("--config")
        .arg(&cfg)
        .args(["plot-data", "branches"])
        .env("DDXY_J", "0")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = json(&dir.path().join("plot-data-branches.manifest.json"));
    assert_eq!(m["settings"]["mu"], "-5");
    assert_eq!(m["settings"]["j"], "0");
    let csv = std::fs::read_to_string(dir.path().join("branches.csv")).unwrap();
    // Without hopping every drive has exactly one uniform state.
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn bad_configuration_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "mu = [\n").unwrap();
    let out = ddxy(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "stability"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = ddxy(dir.path(), &["gap", "--coupling", "hexagonal"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ddxy(dir.path(), &["plot-data", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_code_5() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = ddxy(&blocker.join("sub"), &["stability", "--omega", "0"]);
    assert_eq!(out.status.code(), Some(5));
}
