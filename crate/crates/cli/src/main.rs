//! `greencell`: analyze, sweep, validate and optimize association biases.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use greencell::config::NetworkConfig;
use greencell::montecarlo::{estimate_success, McOptions};
use greencell::optimizer::{
    beta_sweep, compare_schemes, default_beta_grid, evaluate_bias, power_law_bias, GaConfig,
};
use greencell::output::{
    csv_document, fmt_f64, write_atomic, CsvHeader, RunManifest, TOOL_VERSION,
};
use greencell::{BiasVector, Error};

/// Worker-thread cap for sweeps, Monte Carlo drops and GA evaluations.
const THREADS_ENV: &str = "GREENCELL_THREADS";

#[derive(Parser)]
#[command(
    name = "greencell",
    version,
    about = "Carbon-aware cell association for renewable-powered networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metrics of one bias vector at its fixed point.
    Analyze(AnalyzeArgs),
    /// Power-law exponent and harvesting-rate grid.
    Sweep(SweepArgs),
    /// Monte Carlo check of the analytic success probability.
    Validate(ValidateArgs),
    /// Genetic search for the carbon-optimal bias, compared with baselines.
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    config: PathBuf,
    /// Power-law exponent: B_i = (i + 1)^beta.
    #[arg(
        long,
        conflicts_with = "bias_file",
        required_unless_present = "bias_file"
    )]
    beta: Option<f64>,
    /// File with one bias value per level (comma or whitespace separated).
    #[arg(long)]
    bias_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the fixed-point residual history.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.5,1,1.5,2,2.5,3,3.5,4"
    )]
    betas: Vec<f64>,
    /// Harvesting rates; defaults to the config's own.
    #[arg(long, value_delimiter = ',')]
    nus: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    drops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    config: PathBuf,
    /// JSON file with GA settings; flags below override it.
    #[arg(long)]
    ga_params: Option<PathBuf>,
    #[arg(long)]
    pop_size: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    p_mutation: Option<f64>,
    #[arg(long)]
    p_crossover: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for best_bias.csv, history.csv and comparison.csv.
    #[arg(long)]
    out: PathBuf,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_config() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = Result<Vec<PathBuf>, Failure>;

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn header(command: &str, cfg: &NetworkConfig, seed: u64) -> CsvHeader {
    CsvHeader {
        command: command.into(),
        config_hash: cfg.hash(),
        seed,
        command_line: command_line(),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    if out.extension().is_some() {
        out.with_extension("manifest.json")
    } else {
        out.join("manifest.json")
    }
}

fn read_bias(path: &Path, levels: usize) -> Result<BiasVector, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| config_error(format!("{}: {s:?}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != levels {
        return Err(config_error(format!(
            "{}: expected {levels} bias values, found {}",
            path.display(),
            values.len()
        )));
    }
    BiasVector::new(values).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn check_betas(betas: &[f64]) -> Result<(), Failure> {
    match betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        Some(b) => Err(config_error(format!(
            "beta must be finite and nonnegative (got {b})"
        ))),
        None if betas.is_empty() => Err(config_error("no beta values given")),
        None => Ok(()),
    }
}

fn cmd_analyze(a: &AnalyzeArgs) -> CmdResult {
    let cfg = NetworkConfig::load(&a.config)?;
    let bias = match (&a.beta, &a.bias_file) {
        (Some(beta), None) => {
            check_betas(&[*beta])?;
            power_law_bias(*beta, cfg.t_levels)
        }
        (None, Some(path)) => read_bias(path, cfg.n_levels())?,
        _ => return Err(config_error("give exactly one of --beta and --bias-file")),
    };
    let e = evaluate_bias(&cfg, &bias)?;
    let m = &e.metrics;
    let fp = &e.fixed_point;

    let mut columns: Vec<String> = [
        "p_succ",
        "area_rate",
        "p_tot",
        "p_grid",
        "e_tot",
        "eta_ee",
        "eta_ce",
        "converged",
        "iterations",
        "residual",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut row = vec![
        fmt_f64(m.p_succ),
        fmt_f64(m.area_rate),
        fmt_f64(m.p_tot),
        fmt_f64(m.p_grid),
        fmt_f64(m.e_tot),
        fmt_f64(m.eta_ee),
        fmt_f64(m.eta_ce),
        fp.converged.to_string(),
        fp.iterations.to_string(),
        fmt_f64(fp.residual),
    ];
    let per_level: [(&str, &[f64]); 8] = [
        ("bias", bias.as_slice()),
        ("pi", &fp.pi),
        ("users", &fp.users),
        ("p_block", &e.level_metrics.p_block),
        ("p_occu", &e.level_metrics.p_occu),
        ("p_assoc", &m.p_assoc),
        ("p_succ_tier", &m.p_succ_tier),
        ("rate_tier", &m.rate_tier),
    ];
    for (name, values) in per_level {
        for (i, v) in values.iter().enumerate() {
            columns.push(format!("{name}_{i}"));
            row.push(fmt_f64(*v));
        }
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    write_atomic(
        &a.out,
        &csv_document(&header("analyze", &cfg, 0), &cols, &[row]),
    )?;
    let mut outputs = vec![a.out.clone()];
    if let Some(trace) = &a.trace {
        let rows: Vec<Vec<String>> = fp
            .trace
            .iter()
            .enumerate()
            .map(|(k, r)| vec![(k + 1).to_string(), fmt_f64(*r)])
            .collect();
        write_atomic(
            trace,
            &csv_document(
                &header("analyze", &cfg, 0),
                &["iteration", "residual"],
                &rows,
            ),
        )?;
        outputs.push(trace.clone());
    }
    if !fp.converged {
        eprintln!(
            "warning: fixed point did not converge (residual {:e} after {} sweeps)",
            fp.residual, fp.iterations
        );
    }
    Ok(outputs)
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let cfg = NetworkConfig::load(&a.config)?;
    check_betas(&a.betas)?;
    let nus = if a.nus.is_empty() {
        vec![cfg.nu]
    } else {
        a.nus.clone()
    };
    let points = beta_sweep(&cfg, &a.betas, &nus)?;
    let columns = [
        "beta",
        "nu",
        "p_succ",
        "e_tot",
        "eta_ee",
        "eta_ce",
        "p_grid",
        "area_rate",
        "converged",
        "iterations",
        "error",
    ];
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut row = vec![fmt_f64(p.beta), fmt_f64(p.nu)];
            match &p.outcome {
                Ok(e) => {
                    let m = &e.metrics;
                    row.extend(
                        [m.p_succ, m.e_tot, m.eta_ee, m.eta_ce, m.p_grid, m.area_rate].map(fmt_f64),
                    );
                    row.push(e.valid().to_string());
                    row.push(e.fixed_point.iterations.to_string());
                    row.push(String::new());
                }
                Err(msg) => {
                    eprintln!("warning: beta {} nu {}: {msg}", p.beta, p.nu);
                    row.extend(std::iter::repeat_n("nan".to_string(), 6));
                    row.push("false".into());
                    row.push("0".into());
                    row.push(msg.clone());
                }
            }
            row
        })
        .collect();
    write_atomic(
        &a.out,
        &csv_document(&header("sweep", &cfg, 0), &columns, &rows),
    )?;
    Ok(vec![a.out.clone()])
}

fn cmd_validate(a: &ValidateArgs) -> CmdResult {
    let cfg = NetworkConfig::load(&a.config)?;
    check_betas(&a.betas)?;
    let mut rows = Vec::new();
    for &beta in &a.betas {
        let bias = power_law_bias(beta, cfg.t_levels);
        let e = evaluate_bias(&cfg, &bias)?;
        let mc = estimate_success(
            &cfg,
            &e.fixed_point.pi,
            bias.as_slice(),
            &e.level_metrics.p_occu,
            McOptions {
                n_drops: a.drops,
                seed: a.seed,
                window: None,
            },
        )?;
        let diff = (e.metrics.p_succ - mc.mean).abs();
        rows.push(vec![
            fmt_f64(beta),
            fmt_f64(e.metrics.p_succ),
            fmt_f64(mc.mean),
            fmt_f64(mc.half_width_95),
            fmt_f64(diff),
            mc.contains(e.metrics.p_succ).to_string(),
            mc.n_samples.to_string(),
        ]);
    }
    let columns = [
        "beta",
        "analytic",
        "mc_mean",
        "mc_half_width_95",
        "abs_diff",
        "within_ci",
        "drops",
    ];
    write_atomic(
        &a.out,
        &csv_document(&header("validate", &cfg, a.seed), &columns, &rows),
    )?;
    Ok(vec![a.out.clone()])
}

fn ga_settings(a: &OptimizeArgs) -> Result<GaConfig, Failure> {
    let mut ga = match &a.ga_params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            GaConfig::from_json(&text)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        None => GaConfig::default(),
    };
    if let Some(v) = a.pop_size {
        ga.pop_size = v;
    }
    if let Some(v) = a.max_iters {
        ga.max_iters = v;
    }
    if let Some(v) = a.p_mutation {
        ga.p_mutation = v;
    }
    if let Some(v) = a.p_crossover {
        ga.p_crossover = v;
    }
    if let Some(v) = a.seed {
        ga.seed = v;
    }
    ga.validate()?;
    Ok(ga)
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<(Vec<PathBuf>, u64, bool), Failure> {
    let cfg = NetworkConfig::load(&a.config)?;
    let ga = ga_settings(a)?;
    let cmp = compare_schemes(&cfg, &ga, &default_beta_grid())?;
    let head = header("optimize", &cfg, ga.seed);
    let levels = cfg.n_levels();

    let best = &cmp.ga.best;
    let best_rows: Vec<Vec<String>> = best
        .bias
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, b)| vec![i.to_string(), fmt_f64(*b)])
        .collect();
    let best_path = a.out.join("best_bias.csv");
    write_atomic(
        &best_path,
        &csv_document(&head, &["level", "bias"], &best_rows),
    )?;

    let mut hist_cols = vec![
        "gen".to_string(),
        "best_fitness".into(),
        "mean_fitness".into(),
    ];
    hist_cols.extend((0..levels).map(|i| format!("best_B_{i}")));
    let hist_rows: Vec<Vec<String>> = cmp
        .ga
        .history
        .iter()
        .map(|h| {
            let mut row = vec![
                h.generation.to_string(),
                fmt_f64(h.best_fitness),
                fmt_f64(h.mean_fitness),
            ];
            row.extend(h.best_bias.iter().map(|b| fmt_f64(*b)));
            row
        })
        .collect();
    let hist_path = a.out.join("history.csv");
    let cols: Vec<&str> = hist_cols.iter().map(String::as_str).collect();
    write_atomic(&hist_path, &csv_document(&head, &cols, &hist_rows))?;

    let cmp_cols = [
        "scheme",
        "beta",
        "p_succ",
        "feasible",
        "e_tot",
        "eta_ce",
        "eta_ee",
        "share_low",
        "share_medium",
        "share_high",
        "e_tot_reduction_pct",
        "eta_ce_gain_pct",
    ];
    let cmp_rows: Vec<Vec<String>> = cmp
        .rows
        .iter()
        .map(|r| {
            let m = &r.evaluation.metrics;
            vec![
                r.scheme.to_string(),
                r.beta.map(fmt_f64).unwrap_or_default(),
                fmt_f64(m.p_succ),
                (m.p_succ > cfg.p_req).to_string(),
                fmt_f64(m.e_tot),
                fmt_f64(m.eta_ce),
                fmt_f64(m.eta_ee),
                fmt_f64(r.categories[0]),
                fmt_f64(r.categories[1]),
                fmt_f64(r.categories[2]),
                fmt_f64(r.e_tot_reduction_pct),
                fmt_f64(r.eta_ce_gain_pct),
            ]
        })
        .collect();
    let cmp_path = a.out.join("comparison.csv");
    write_atomic(&cmp_path, &csv_document(&head, &cmp_cols, &cmp_rows))?;

    for r in &cmp.rows {
        println!(
            "{:<10} e_tot {:.6e}  eta_ce {:.6e}  p_succ {:.4}  emission cut {:.2}%  efficiency gain {:.2}%",
            r.scheme,
            r.evaluation.metrics.e_tot,
            r.evaluation.metrics.eta_ce,
            r.evaluation.metrics.p_succ,
            r.e_tot_reduction_pct,
            r.eta_ce_gain_pct
        );
    }
    if !cmp.ga.feasible_found {
        eprintln!(
            "error: no bias vector met the coverage requirement {}; best infeasible written",
            cfg.p_req
        );
    }
    Ok((
        vec![best_path, hist_path, cmp_path],
        ga.seed,
        cmp.ga.feasible_found,
    ))
}

fn set_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        config_error(format!(
            "{THREADS_ENV} must be a positive integer (got {v:?})"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    set_threads()?;
    let start = Instant::now();
    let (name, config, out, outputs, seed, feasible) = match &cli.command {
        Command::Analyze(a) => ("analyze", &a.config, &a.out, cmd_analyze(a)?, 0, true),
        Command::Sweep(a) => ("sweep", &a.config, &a.out, cmd_sweep(a)?, 0, true),
        Command::Validate(a) => (
            "validate",
            &a.config,
            &a.out,
            cmd_validate(a)?,
            a.seed,
            true,
        ),
        Command::Optimize(a) => {
            let (outputs, seed, feasible) = cmd_optimize(a)?;
            ("optimize", &a.config, &a.out, outputs, seed, feasible)
        }
    };
    let manifest = RunManifest {
        command: name.into(),
        config_hash: NetworkConfig::load(config)?.hash(),
        seed,
        outputs,
        wall_clock_s: start.elapsed().as_secs_f64(),
        tool_version: TOOL_VERSION.into(),
    };
    write_atomic(&manifest_path(out), &manifest.to_json())?;
    for p in &manifest.outputs {
        println!("wrote {}", p.display());
    }
    if !feasible {
        return Err(Failure {
            code: 4,
            message: "GA found no feasible bias".into(),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
