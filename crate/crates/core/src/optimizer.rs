//! Association-bias design: the one-parameter power-law family and a
//! genetic algorithm over arbitrary bias vectors.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{average_users, network_metrics, BiasVector, NetworkMetrics, UserCounts};
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::fixed_point::{self, FixedPointOptions, FixedPointResult};
use crate::qbd::LevelMetrics;

/// `B_i = (i + 1)^beta` for `i = 0..=t_levels`; `beta = 0` is nearest-BS.
pub fn power_law_bias(beta: f64, t_levels: usize) -> BiasVector {
    assert!(
        beta.is_finite() && beta >= 0.0,
        "beta must be finite and nonnegative"
    );
    let b = (0..=t_levels)
        .map(|i| ((i + 1) as f64).powf(beta))
        .collect();
    BiasVector::new(b).expect("power law is a valid bias")
}

/// Metrics of one bias vector at its fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub bias: BiasVector,
    pub metrics: NetworkMetrics,
    pub fixed_point: FixedPointResult,
    pub level_metrics: LevelMetrics,
    pub users: UserCounts,
}

impl Evaluation {
    /// Metrics are only meaningful at a converged fixed point.
    pub fn valid(&self) -> bool {
        self.fixed_point.converged
    }
}

pub fn evaluate_bias(cfg: &NetworkConfig, bias: &BiasVector) -> Result<Evaluation> {
    evaluate_bias_with(cfg, bias, FixedPointOptions::default())
}

pub fn evaluate_bias_with(
    cfg: &NetworkConfig,
    bias: &BiasVector,
    opts: FixedPointOptions,
) -> Result<Evaluation> {
    let fp = fixed_point::solve(cfg, bias, opts)?;
    let lm = fp.steady_state.level_metrics();
    let users = average_users(&fp.pi, bias.as_slice(), cfg);
    let metrics = network_metrics(cfg, &fp.pi, &lm, bias.as_slice(), &users.total, &fp.rho)?;
    Ok(Evaluation {
        bias: bias.clone(),
        metrics,
        fixed_point: fp,
        level_metrics: lm,
        users,
    })
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub beta: f64,
    pub nu: f64,
    pub outcome: std::result::Result<Evaluation, String>,
}

/// Every `(beta, nu)` pair, ordered by `nu` then `beta`.
pub fn beta_sweep(cfg: &NetworkConfig, betas: &[f64], nus: &[f64]) -> Result<Vec<SweepPoint>> {
    if betas.is_empty() || nus.is_empty() {
        return Err(Error::Precondition(
            "beta and nu lists must be nonempty".into(),
        ));
    }
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::Precondition(format!(
            "beta must be finite and nonnegative (got {b})"
        )));
    }
    let grid: Vec<(f64, f64)> = nus
        .iter()
        .flat_map(|&nu| betas.iter().map(move |&beta| (beta, nu)))
        .collect();
    Ok(grid
        .into_par_iter()
        .map(|(beta, nu)| {
            let point_cfg = NetworkConfig { nu, ..cfg.clone() };
            let outcome = point_cfg
                .validate()
                .and_then(|_| evaluate_bias(&point_cfg, &power_law_bias(beta, cfg.t_levels)))
                .map_err(|e| e.to_string());
            SweepPoint { beta, nu, outcome }
        })
        .collect())
}

/// Carbon efficiency is capped at this value inside fitness.
pub const ETA_CE_CAP: f64 = 1e18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub pop_size: usize,
    pub max_iters: usize,
    pub p_mutation: f64,
    pub p_crossover: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub seed: u64,
    /// Fitness lost per unit of coverage shortfall.
    pub penalty: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            pop_size: 50,
            max_iters: 100,
            p_mutation: 0.2,
            p_crossover: 0.7,
            b_min: 1.0,
            b_max: 64.0,
            seed: 0,
            penalty: 1e6,
        }
    }
}

impl GaConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let ga: GaConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        ga.validate()?;
        Ok(ga)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.pop_size < 2 {
            problems.push("pop_size must be at least 2".to_string());
        }
        for (name, p) in [
            ("p_mutation", self.p_mutation),
            ("p_crossover", self.p_crossover),
        ] {
            if !(0.0..=1.0).contains(&p) {
                problems.push(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.b_min >= 1.0 && self.b_min < self.b_max && self.b_max.is_finite()) {
            problems.push("bias bounds need 1 <= b_min < b_max".to_string());
        }
        if !(self.penalty >= 0.0) {
            problems.push("penalty must be nonnegative".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(problems))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub bias: BiasVector,
    pub fitness: f64,
    pub feasible: bool,
    /// `None` when the fixed point failed or did not converge.
    pub metrics: Option<NetworkMetrics>,
}

impl Individual {
    fn evaluate(cfg: &NetworkConfig, bias: BiasVector, penalty: f64) -> Self {
        let metrics = evaluate_bias(cfg, &bias)
            .ok()
            .filter(Evaluation::valid)
            .map(|e| e.metrics);
        let Some(m) = metrics else {
            return Individual {
                bias,
                fitness: f64::NEG_INFINITY,
                feasible: false,
                metrics: None,
            };
        };
        let eta = m.eta_ce.min(ETA_CE_CAP);
        let feasible = m.p_succ > cfg.p_req;
        let fitness = if feasible {
            eta
        } else {
            eta - penalty * (cfg.p_req - m.p_succ)
        };
        Individual {
            bias,
            fitness,
            feasible,
            metrics: Some(m),
        }
    }

    /// Feasible individuals first, then by fitness, both descending.
    fn rank_cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .feasible
            .cmp(&self.feasible)
            .then(other.fitness.total_cmp(&self.fitness))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: Individual,
    /// `false` when no individual ever met the coverage constraint.
    pub feasible_found: bool,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
}

fn bias_key(b: &BiasVector) -> Vec<u64> {
    b.as_slice().iter().map(|v| v.to_bits()).collect()
}

fn generation_rng(seed: u64, generation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(generation as u64);
    rng
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln()))
        .exp()
        .clamp(lo, hi)
}

/// Selection weights: fitness shifted above the population minimum.
/// Infeasible scores are clipped to the worst feasible one so no
/// infeasible individual outweighs a feasible one; failed evaluations get
/// zero weight.
fn roulette_weights(pop: &[Individual]) -> Vec<f64> {
    let worst_feasible = pop
        .iter()
        .filter(|i| i.feasible)
        .map(|i| i.fitness)
        .fold(f64::INFINITY, f64::min);
    let scores: Vec<Option<f64>> = pop
        .iter()
        .map(|i| {
            if !i.fitness.is_finite() {
                None
            } else if i.feasible {
                Some(i.fitness)
            } else {
                Some(i.fitness.min(worst_feasible))
            }
        })
        .collect();
    let finite = scores.iter().flatten();
    let lo = finite.clone().fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = finite.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !lo.is_finite() {
        return vec![1.0; pop.len()];
    }
    let eps = if hi > lo { 1e-3 * (hi - lo) } else { 1.0 };
    scores
        .iter()
        .map(|s| s.map_or(0.0, |v| v - lo + eps))
        .collect()
}

fn spin<R: Rng>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let mut r = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if r < *w {
            return k;
        }
        r -= w;
    }
    weights.len() - 1
}

struct Evaluator<'a> {
    cfg: &'a NetworkConfig,
    penalty: f64,
    cache: HashMap<Vec<u64>, Individual>,
}

impl Evaluator<'_> {
    /// Evaluates in parallel, reusing earlier results for repeated vectors.
    fn evaluate_all(&mut self, biases: Vec<BiasVector>) -> Vec<Individual> {
        let mut fresh: Vec<BiasVector> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for b in &biases {
            let key = bias_key(b);
            if !self.cache.contains_key(&key) && seen.insert(key) {
                fresh.push(b.clone());
            }
        }
        let (cfg, penalty) = (self.cfg, self.penalty);
        let done: Vec<Individual> = fresh
            .into_par_iter()
            .map(|b| Individual::evaluate(cfg, b, penalty))
            .collect();
        for ind in done {
            self.cache.insert(bias_key(&ind.bias), ind);
        }
        biases
            .iter()
            .map(|b| self.cache[&bias_key(b)].clone())
            .collect()
    }
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    let finite: Vec<f64> = pop
        .iter()
        .map(|i| i.fitness)
        .filter(|f| f.is_finite())
        .collect();
    let mean = if finite.is_empty() {
        f64::NEG_INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    GenerationStats {
        generation,
        best_fitness: pop[0].fitness,
        mean_fitness: mean,
        best_bias: pop[0].bias.as_slice().to_vec(),
    }
}

/// Keeps the `size` best distinct individuals.
fn truncate(mut pool: Vec<Individual>, size: usize) -> Vec<Individual> {
    pool.sort_by(Individual::rank_cmp);
    let mut seen = std::collections::HashSet::new();
    let mut kept: Vec<Individual> = Vec::with_capacity(size);
    let mut dupes = Vec::new();
    for ind in pool {
        if seen.insert(bias_key(&ind.bias)) {
            kept.push(ind);
        } else {
            dupes.push(ind);
        }
    }
    // Only fall back to duplicates when distinct individuals run out.
    kept.extend(dupes);
    kept.truncate(size);
    kept.sort_by(Individual::rank_cmp);
    kept
}

/// Maximizes carbon efficiency over bias vectors with `B_0 = 1` subject to
/// `P_succ > p_req`.
///
/// Roulette selection, single-point crossover and single-gene log-uniform
/// mutation produce one child per population slot; parents and children
/// are then merged and cut back to the best `pop_size` distinct vectors.
/// The initial population holds the all-ones vector plus random ones.
pub fn ga_optimize(cfg: &NetworkConfig, ga: &GaConfig) -> Result<GaOutcome> {
    ga.validate()?;
    cfg.validate()?;
    let levels = cfg.n_levels();
    let mut eval = Evaluator {
        cfg,
        penalty: ga.penalty,
        cache: HashMap::new(),
    };

    let mut rng = generation_rng(ga.seed, 0);
    let mut initial = vec![BiasVector::ones(levels)];
    while initial.len() < ga.pop_size {
        let mut b = vec![1.0; levels];
        for g in b.iter_mut().skip(1) {
            *g = log_uniform(&mut rng, ga.b_min, ga.b_max);
        }
        initial.push(BiasVector::new(b).expect("bounded genes"));
    }
    let mut pop = truncate(eval.evaluate_all(initial), ga.pop_size);
    let mut history = vec![stats(0, &pop)];

    for generation in 1..=ga.max_iters {
        let mut rng = generation_rng(ga.seed, generation);
        let weights = roulette_weights(&pop);
        let total: f64 = weights.iter().sum();
        let parents: Vec<usize> = (0..ga.pop_size)
            .map(|_| spin(&mut rng, &weights, total))
            .collect();

        let mut children: Vec<Vec<f64>> = Vec::with_capacity(ga.pop_size);
        for pair in parents.chunks(2) {
            let mut a = pop[pair[0]].bias.as_slice().to_vec();
            let mut b = pop[pair[pair.len() - 1]].bias.as_slice().to_vec();
            if levels > 2 && rng.random::<f64>() < ga.p_crossover {
                let cut = rng.random_range(1..levels);
                for k in cut..levels {
                    std::mem::swap(&mut a[k], &mut b[k]);
                }
            }
            children.push(a);
            if pair.len() == 2 {
                children.push(b);
            }
        }
        for child in children.iter_mut() {
            if levels > 1 && rng.random::<f64>() < ga.p_mutation {
                let gene = rng.random_range(1..levels);
                child[gene] = log_uniform(&mut rng, ga.b_min, ga.b_max);
            }
        }
        let children: Vec<BiasVector> = children
            .into_iter()
            .map(|c| BiasVector::new(c).expect("gene 0 is never touched"))
            .collect();

        let mut pool = pop;
        pool.extend(eval.evaluate_all(children));
        pop = truncate(pool, ga.pop_size);
        history.push(stats(generation, &pop));
    }

    let best = pop[0].clone();
    Ok(GaOutcome {
        feasible_found: best.feasible,
        best,
        history,
        evaluations: eval.cache.len(),
    })
}

/// Share of BSs in the low / medium / high battery bands (levels below
/// `0.3 T`, below `0.7 T`, and the rest; 0-2 / 3-6 / 7-10 for `T = 10`).
pub fn level_categories(pi: &[f64]) -> [f64; 3] {
    let t = (pi.len() - 1) as f64;
    let low_end = (0.3 * t).round() as usize;
    let mid_end = (0.7 * t).round() as usize;
    let mut out = [0.0; 3];
    for (i, p) in pi.iter().enumerate() {
        let band = if i < low_end {
            0
        } else if i < mid_end {
            1
        } else {
            2
        };
        out[band] += p;
    }
    out
}

#[derive(Debug, Clone)]
pub struct SchemeRow {
    pub scheme: &'static str,
    pub evaluation: Evaluation,
    /// Power-law exponent, when the scheme is power-law.
    pub beta: Option<f64>,
    pub categories: [f64; 3],
    /// Emission reduction relative to nearest-BS association, percent.
    pub e_tot_reduction_pct: f64,
    /// Carbon-efficiency gain relative to nearest-BS association, percent.
    pub eta_ce_gain_pct: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<SchemeRow>,
    pub ga: GaOutcome,
}

/// The power-law exponent grid `0, 0.5, ..., 4`.
pub fn default_beta_grid() -> Vec<f64> {
    (0..=8).map(|k| 0.5 * k as f64).collect()
}

/// Best feasible power-law point on `betas` by carbon efficiency.
pub fn best_feasible_power_law(
    cfg: &NetworkConfig,
    betas: &[f64],
) -> Result<Option<(f64, Evaluation)>> {
    let points = beta_sweep(cfg, betas, &[cfg.nu])?;
    Ok(points
        .into_iter()
        .filter_map(|p| p.outcome.ok().map(|e| (p.beta, e)))
        .filter(|(_, e)| e.valid() && e.metrics.p_succ > cfg.p_req)
        .max_by(|a, b| a.1.metrics.eta_ce.total_cmp(&b.1.metrics.eta_ce)))
}

/// Nearest-BS, best feasible power-law and GA-optimized association side
/// by side.
pub fn compare_schemes(cfg: &NetworkConfig, ga: &GaConfig, betas: &[f64]) -> Result<Comparison> {
    let nearest = evaluate_bias(cfg, &BiasVector::ones(cfg.n_levels()))?;
    let power_law = best_feasible_power_law(cfg, betas)?;
    let outcome = ga_optimize(cfg, ga)?;
    let ga_eval = evaluate_bias(cfg, &outcome.best.bias)?;

    let base_e = nearest.metrics.e_tot;
    let base_eta = nearest.metrics.eta_ce;
    let row = |scheme, beta, evaluation: Evaluation| {
        let m = &evaluation.metrics;
        SchemeRow {
            scheme,
            beta,
            categories: level_categories(&evaluation.fixed_point.pi),
            e_tot_reduction_pct: 100.0 * (base_e - m.e_tot) / base_e,
            eta_ce_gain_pct: 100.0 * (m.eta_ce - base_eta) / base_eta,
            evaluation,
        }
    };
    let mut rows = vec![row("nearest", Some(0.0), nearest)];
    if let Some((beta, e)) = power_law {
        rows.push(row("power-law", Some(beta), e));
    }
    rows.push(row("ga", None, ga_eval));
    Ok(Comparison { rows, ga: outcome })
}
