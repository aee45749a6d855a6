use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greencell"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn analyze_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let cfg = reference_config();
    let args = [
        "analyze",
        cfg.to_str().unwrap(),
        "--beta",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let first = std::fs::read_to_string(&out).unwrap();
    assert!(run(&args).status.success());
    assert_eq!(first, std::fs::read_to_string(&out).unwrap());
    assert!(first.starts_with("# tool: greencell"));
    assert_eq!(data_rows(&out).len(), 2);
    let manifest = std::fs::read_to_string(dir.path().join("a.manifest.json")).unwrap();
    assert!(manifest.contains("\"command\": \"analyze\""));
}

#[test]
fn analyze_accepts_a_bias_file() {
    let dir = tempfile::tempdir().unwrap();
    let bias = dir.path().join("b.txt");
    std::fs::write(&bias, "1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1\n").unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let cfg = reference_config();
    let cfg = cfg.to_str().unwrap();
    assert!(
        run(&["analyze", cfg, "--beta", "0", "--out", a.to_str().unwrap()])
            .status
            .success()
    );
    let out = run(&[
        "analyze",
        cfg,
        "--bias-file",
        bias.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(data_rows(&a), data_rows(&b));
}

#[test]
fn configuration_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();
    let missing = run(&[
        "analyze",
        "no-such-config.json",
        "--beta",
        "1",
        "--out",
        out,
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no-such-config.json"));

    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(reference_config())
        .unwrap()
        .replace("\"alpha\": 4.0", "\"alpha\": 2.0");
    std::fs::write(&bad, text).unwrap();
    let invalid = run(&[
        "analyze",
        bad.to_str().unwrap(),
        "--beta",
        "1",
        "--out",
        out,
    ]);
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("alpha"));

    let cfg = reference_config();
    let both = run(&[
        "analyze",
        cfg.to_str().unwrap(),
        "--beta",
        "1",
        "--bias-file",
        "b",
        "--out",
        out,
    ]);
    assert_eq!(both.status.code(), Some(2));

    let threads = Command::new(env!("CARGO_BIN_EXE_greencell"))
        .args([
            "analyze",
            cfg.to_str().unwrap(),
            "--beta",
            "1",
            "--out",
            out,
        ])
        .env("GREENCELL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
    assert!(!Path::new(out).exists());
}

#[test]
fn sweep_has_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let cfg = reference_config();
    let res = run(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--betas",
        "0,2",
        "--nus",
        "39,-1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let rows = data_rows(&out);
    assert_eq!(
        rows[0],
        "beta,nu,p_succ,e_tot,eta_ee,eta_ce,p_grid,area_rate,converged,iterations,error"
    );
    assert_eq!(rows.len(), 5);
    assert!(rows[3].starts_with("0.0,-1.0,nan") && rows[3].contains(",false,"));
}

#[test]
fn validate_with_few_drops_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let cfg = reference_config();
    let args = [
        "validate",
        cfg.to_str().unwrap(),
        "--betas",
        "1",
        "--drops",
        "100",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let first = std::fs::read_to_string(&out).unwrap();
    assert!(first.contains("# seed: 4"));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 2);
    let half_width: f64 = rows[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!(half_width > 0.01);
    assert!(run(&args).status.success());
    assert_eq!(first, std::fs::read_to_string(&out).unwrap());
}

#[test]
fn optimize_writes_all_tables() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("ga.json");
    std::fs::write(&params, r#"{"pop_size": 6, "max_iters": 3}"#).unwrap();
    let out = dir.path().join("opt");
    let cfg = reference_config();
    let res = run(&[
        "optimize",
        cfg.to_str().unwrap(),
        "--ga-params",
        params.to_str().unwrap(),
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(data_rows(&out.join("best_bias.csv")).len(), 12);
    let hist = data_rows(&out.join("history.csv"));
    assert_eq!(hist.len(), 5);
    assert!(hist[0].starts_with("gen,best_fitness,mean_fitness,best_B_0"));
    let cmp = data_rows(&out.join("comparison.csv"));
    let schemes: Vec<&str> = cmp[1..]
        .iter()
        .map(|r| r.split(',').next().unwrap())
        .collect();
    assert_eq!(schemes, ["nearest", "power-law", "ga"]);
    assert!(cmp[3].split(',').nth(3) == Some("true"));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn unreachable_coverage_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.json");
    let text = std::fs::read_to_string(reference_config())
        .unwrap()
        .replace("\"p_req\": 0.95", "\"p_req\": 0.99");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("opt");
    let res = run(&[
        "optimize",
        cfg.to_str().unwrap(),
        "--pop-size",
        "4",
        "--max-iters",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(4));
    let cmp = data_rows(&out.join("comparison.csv"));
    assert_eq!(cmp.len(), 3, "no feasible power-law row expected");
}
