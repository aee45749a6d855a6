//! Spatial Monte-Carlo estimates on sampled network layouts.
//!
//! Every drop draws a fresh layout in a disc of radius `r_sim` around a
//! typical user at the origin. Drop `k` of a run seeded with `seed` uses
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `k`, so estimates
//! do not depend on how drops are scheduled across threads.

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    fn dist_sq(&self, other: &Point) -> f64 {
        (self.x - other.x).powi(2) + (self.y - other.y).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseStation {
    pub pos: Point,
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteredUser {
    pub pos: Point,
    /// Index into `hotspot_centers`.
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub bs_points: Vec<BaseStation>,
    pub hotspot_centers: Vec<Point>,
    pub clustered_users: Vec<ClusteredUser>,
    pub uniform_users: Vec<Point>,
    pub window: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width_95
    }
}

/// Default window radius: 15 mean BS spacings.
pub fn default_window(cfg: &NetworkConfig) -> f64 {
    15.0 / (PI * cfg.lambda_b).sqrt()
}

fn min_window(cfg: &NetworkConfig) -> f64 {
    10.0 / (PI * cfg.lambda_b).sqrt()
}

fn drop_rng(seed: u64, drop: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(drop);
    rng
}

fn uniform_in_disc<R: Rng>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    Point {
        x: center.x + r * phi.cos(),
        y: center.y + r * phi.sin(),
    }
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

struct LevelSampler(Option<WeightedIndex<f64>>);

impl LevelSampler {
    fn new(pi: &[f64]) -> Result<Self> {
        if pi.len() == 1 {
            return Ok(LevelSampler(None));
        }
        WeightedIndex::new(pi.iter().map(|p| p.max(0.0)))
            .map(|w| LevelSampler(Some(w)))
            .map_err(|e| Error::Precondition(format!("level distribution: {e}")))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.0.as_ref().map_or(0, |w| w.sample(rng))
    }
}

fn check_inputs(cfg: &NetworkConfig, pi: &[f64], r_sim: f64) -> Result<()> {
    if pi.len() != cfg.n_levels() {
        return Err(Error::Dimension {
            what: "level marginals",
            expected: cfg.n_levels(),
            got: pi.len(),
        });
    }
    if r_sim < min_window(cfg) {
        return Err(Error::Precondition(format!(
            "window radius {r_sim} is below 10 / sqrt(pi lambda_B) = {}",
            min_window(cfg)
        )));
    }
    Ok(())
}

fn sample_stations<R: Rng>(
    rng: &mut R,
    cfg: &NetworkConfig,
    levels: &LevelSampler,
    r_sim: f64,
) -> Vec<BaseStation> {
    let area = PI * r_sim * r_sim;
    let origin = Point { x: 0.0, y: 0.0 };
    let n = poisson_count(rng, cfg.lambda_b * area);
    (0..n)
        .map(|_| BaseStation {
            pos: uniform_in_disc(rng, origin, r_sim),
            level: levels.sample(rng),
        })
        .collect()
}

fn sample_with<R: Rng>(
    rng: &mut R,
    cfg: &NetworkConfig,
    levels: &LevelSampler,
    r_sim: f64,
) -> Realization {
    let area = PI * r_sim * r_sim;
    let origin = Point { x: 0.0, y: 0.0 };
    let bs_points = sample_stations(rng, cfg, levels, r_sim);
    let n_hot = poisson_count(rng, cfg.lambda_p * area);
    let hotspot_centers: Vec<Point> = (0..n_hot)
        .map(|_| uniform_in_disc(rng, origin, r_sim))
        .collect();
    let per_cluster = cfg.lambda_u2 * PI * cfg.hotspot_radius.powi(2);
    let mut clustered_users = Vec::new();
    for (k, c) in hotspot_centers.iter().enumerate() {
        for _ in 0..poisson_count(rng, per_cluster) {
            clustered_users.push(ClusteredUser {
                pos: uniform_in_disc(rng, *c, cfg.hotspot_radius),
                cluster: k,
            });
        }
    }
    let n_uni = poisson_count(rng, cfg.lambda_u1 * area);
    let uniform_users = (0..n_uni)
        .map(|_| uniform_in_disc(rng, origin, r_sim))
        .collect();
    Realization {
        bs_points,
        hotspot_centers,
        clustered_users,
        uniform_users,
        window: r_sim,
    }
}

/// One layout: BSs with i.i.d. levels drawn from `pi`, hotspot centres,
/// their clustered users and the uniform users.
pub fn sample_realization(
    cfg: &NetworkConfig,
    pi: &[f64],
    r_sim: f64,
    seed: u64,
) -> Result<Realization> {
    check_inputs(cfg, pi, r_sim)?;
    let levels = LevelSampler::new(pi)?;
    Ok(sample_with(&mut drop_rng(seed, 0), cfg, &levels, r_sim))
}

/// Index of the BS maximizing `B_level d^{-alpha}` as seen from `at`.
fn serving_index(stations: &[BaseStation], bias: &[f64], alpha: f64, at: Point) -> Option<usize> {
    // Maximizing B d^{-alpha} is minimizing d^2 / B^{2/alpha}.
    let delta = 2.0 / alpha;
    let weights: Vec<f64> = bias.iter().map(|b| b.powf(delta)).collect();
    stations
        .iter()
        .enumerate()
        .map(|(k, s)| (k, s.pos.dist_sq(&at) / weights[s.level]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
}

fn mean_ci(values: &[f64], seed: u64) -> McEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    McEstimate {
        mean,
        half_width_95: 1.96 * (var / n as f64).sqrt(),
        n_samples: n,
        seed,
    }
}

/// Pooled ratio `sum(num) / sum(den)` with a linearized 95% interval.
fn ratio_ci(pairs: &[(f64, f64)], seed: u64) -> McEstimate {
    let pairs: Vec<(f64, f64)> = pairs.iter().copied().filter(|p| p.1.is_finite()).collect();
    let n = pairs.len();
    let num: f64 = pairs.iter().map(|p| p.0).sum();
    let den: f64 = pairs.iter().map(|p| p.1).sum();
    if den == 0.0 {
        return McEstimate {
            mean: 0.0,
            half_width_95: 0.0,
            n_samples: n,
            seed,
        };
    }
    let ratio = num / den;
    let mean_den = den / n as f64;
    let var = if n > 1 {
        pairs
            .iter()
            .map(|(a, b)| (a - ratio * b).powi(2))
            .sum::<f64>()
            / (n - 1) as f64
    } else {
        0.0
    };
    McEstimate {
        mean: ratio,
        half_width_95: 1.96 * (var / n as f64).sqrt() / mean_den,
        n_samples: n,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub n_drops: usize,
    pub seed: u64,
    /// Window radius; `None` uses [`default_window`].
    pub window: Option<f64>,
}

/// Success probability of the typical user: biased long-term association,
/// Bernoulli(`p_occu[level]`) co-channel activity, unit-mean Rayleigh fading.
pub fn estimate_success(
    cfg: &NetworkConfig,
    pi: &[f64],
    bias: &[f64],
    p_occu: &[f64],
    opts: McOptions,
) -> Result<McEstimate> {
    let r_sim = opts.window.unwrap_or_else(|| default_window(cfg));
    check_inputs(cfg, pi, r_sim)?;
    if opts.n_drops < 100 {
        return Err(Error::Precondition(format!(
            "need at least 100 drops (got {})",
            opts.n_drops
        )));
    }
    let levels = LevelSampler::new(pi)?;
    let p_t = cfg.p_t();
    let origin = Point { x: 0.0, y: 0.0 };
    let outcomes: Vec<f64> = (0..opts.n_drops as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = drop_rng(opts.seed, k);
            let stations = sample_stations(&mut rng, cfg, &levels, r_sim);
            let Some(serving) = serving_index(&stations, bias, cfg.alpha, origin) else {
                return 0.0;
            };
            let path = |s: &BaseStation| s.pos.norm_sq().powf(-cfg.alpha / 2.0);
            let h: f64 = rng.sample(Exp1);
            let signal = p_t * h * path(&stations[serving]);
            let mut interference = 0.0;
            for (idx, s) in stations.iter().enumerate() {
                if idx == serving {
                    continue;
                }
                if rng.random::<f64>() < p_occu[s.level] {
                    let g: f64 = rng.sample(Exp1);
                    interference += p_t * g * path(s);
                }
            }
            let sinr = signal / (cfg.noise_power + interference);
            if sinr > cfg.tau {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(mean_ci(&outcomes, opts.seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareEstimate {
    /// Fraction of users associated with each level.
    pub assoc_share: Vec<McEstimate>,
    /// Mean associated users per BS of each level.
    pub users_per_bs: Vec<McEstimate>,
}

/// Association shares and per-BS loads over full user layouts. Clustered
/// users follow their hotspot centre's association. Counting is restricted
/// to users and BSs in the inner half of the window.
pub fn estimate_shares(
    cfg: &NetworkConfig,
    pi: &[f64],
    bias: &[f64],
    opts: McOptions,
) -> Result<ShareEstimate> {
    let r_sim = opts.window.unwrap_or_else(|| default_window(cfg));
    check_inputs(cfg, pi, r_sim)?;
    if opts.n_drops < 100 {
        return Err(Error::Precondition(format!(
            "need at least 100 drops (got {})",
            opts.n_drops
        )));
    }
    let levels = LevelSampler::new(pi)?;
    let n_levels = cfg.n_levels();
    let inner_sq = (0.5 * r_sim).powi(2);

    struct Drop {
        users_by_level: Vec<f64>,
        users_total: f64,
        inner_bs_users: Vec<f64>,
        inner_bs_count: Vec<f64>,
    }

    let drops: Vec<Drop> = (0..opts.n_drops as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = drop_rng(opts.seed, k);
            let real = sample_with(&mut rng, cfg, &levels, r_sim);
            let mut d = Drop {
                users_by_level: vec![0.0; n_levels],
                users_total: 0.0,
                inner_bs_users: vec![0.0; n_levels],
                inner_bs_count: vec![0.0; n_levels],
            };
            let mut per_bs = vec![0.0; real.bs_points.len()];
            let mut attach = |at: Point, count: f64, d: &mut Drop| {
                if let Some(s) = serving_index(&real.bs_points, bias, cfg.alpha, at) {
                    per_bs[s] += count;
                    if at.norm_sq() <= inner_sq {
                        d.users_by_level[real.bs_points[s].level] += count;
                        d.users_total += count;
                    }
                }
            };
            for u in &real.uniform_users {
                attach(*u, 1.0, &mut d);
            }
            let mut cluster_sizes = vec![0usize; real.hotspot_centers.len()];
            for u in &real.clustered_users {
                cluster_sizes[u.cluster] += 1;
            }
            for (c, size) in real.hotspot_centers.iter().zip(cluster_sizes) {
                if size > 0 {
                    attach(*c, size as f64, &mut d);
                }
            }
            for (s, users) in real.bs_points.iter().zip(per_bs) {
                if s.pos.norm_sq() <= inner_sq {
                    d.inner_bs_users[s.level] += users;
                    d.inner_bs_count[s.level] += 1.0;
                }
            }
            d
        })
        .collect();

    let assoc_share = (0..n_levels)
        .map(|i| {
            let pairs: Vec<(f64, f64)> = drops
                .iter()
                .map(|d| (d.users_by_level[i], d.users_total))
                .collect();
            ratio_ci(&pairs, opts.seed)
        })
        .collect();
    let users_per_bs = (0..n_levels)
        .map(|i| {
            let pairs: Vec<(f64, f64)> = drops
                .iter()
                .map(|d| (d.inner_bs_users[i], d.inner_bs_count[i]))
                .collect();
            ratio_ci(&pairs, opts.seed)
        })
        .collect();
    Ok(ShareEstimate {
        assoc_share,
        users_per_bs,
    })
}
