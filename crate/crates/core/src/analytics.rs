//! Stochastic-geometry performance and carbon metrics.
//!
//! BSs at battery level `i` form a PPP of density `lambda_B(i) = Pi_i lambda_B`.
//! A user attaches to the BS maximizing `B_i P_t d^{-alpha}`; interferers on
//! the shared channel are the BSs of each level thinned by that level's
//! channel-occupancy probability; fading is Rayleigh.

use std::f64::consts::PI;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::qbd::LevelMetrics;
use crate::quadrature::{integrate_semi_infinite, integrate_truncated};
use crate::special::hypergeom_z;

/// Association bias per battery level, normalized so that `B_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasVector(Vec<f64>);

impl BiasVector {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Precondition("bias vector is empty".into()));
        }
        if b[0] != 1.0 {
            return Err(Error::Precondition(format!(
                "B_0 must be exactly 1 (got {})",
                b[0]
            )));
        }
        if let Some(bad) = b.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Precondition(format!(
                "bias entries must be finite and positive (got {bad})"
            )));
        }
        Ok(BiasVector(b))
    }

    /// All-ones bias: nearest-BS association.
    pub fn ones(levels: usize) -> Self {
        BiasVector(vec![1.0; levels])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for BiasVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_levels(what: &'static str, v: &[f64], levels: usize) -> Result<()> {
    if v.len() != levels {
        return Err(Error::Dimension {
            what,
            expected: levels,
            got: v.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierSplit {
    pub p_assoc: Vec<f64>,
    pub lambda_tier: Vec<f64>,
}

/// Probability that the typical user associates with each level.
pub fn association_split(pi: &[f64], bias: &[f64], cfg: &NetworkConfig) -> TierSplit {
    let delta = 2.0 / cfg.alpha;
    let lambda_tier: Vec<f64> = pi.iter().map(|p| p * cfg.lambda_b).collect();
    let weights: Vec<f64> = lambda_tier
        .iter()
        .zip(bias)
        .map(|(l, b)| l * b.powf(delta))
        .collect();
    let total: f64 = weights.iter().sum();
    TierSplit {
        p_assoc: weights.iter().map(|w| w / total).collect(),
        lambda_tier,
    }
}

/// Mean users per BS of each level, split by population.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCounts {
    pub total: Vec<f64>,
    pub uniform: Vec<f64>,
    pub clustered: Vec<f64>,
}

pub fn average_users(pi: &[f64], bias: &[f64], cfg: &NetworkConfig) -> UserCounts {
    let delta = 2.0 / cfg.alpha;
    let denom: f64 = cfg.lambda_b
        * pi.iter()
            .zip(bias)
            .map(|(p, b)| p * b.powf(delta))
            .sum::<f64>();
    let share: Vec<f64> = bias.iter().map(|b| b.powf(delta) / denom).collect();
    let uniform: Vec<f64> = share.iter().map(|s| cfg.lambda_u1 * s).collect();
    let clustered: Vec<f64> = share
        .iter()
        .map(|s| cfg.clustered_user_density() * s)
        .collect();
    let total = share.iter().map(|s| cfg.total_user_density() * s).collect();
    UserCounts {
        total,
        uniform,
        clustered,
    }
}

/// Coverage model for one association bias and network state.
#[derive(Debug, Clone)]
pub struct CoverageModel {
    alpha: f64,
    p_t: f64,
    noise: f64,
    bias: Vec<f64>,
    p_occu: Vec<f64>,
    split: TierSplit,
}

/// Success probability of one level and whether the level was empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierSuccess {
    pub value: f64,
    pub degenerate: bool,
}

const TIER_QUAD_TOL: f64 = 1e-9;
const TIER_TAIL_REL: f64 = 1e-12;
const RATE_QUAD_TOL: f64 = 1e-7;
const RATE_T_MAX: f64 = 40.0;
const RATE_STOP_REL: f64 = 1e-6;

impl CoverageModel {
    pub fn new(cfg: &NetworkConfig, pi: &[f64], bias: &[f64], p_occu: &[f64]) -> Result<Self> {
        let levels = cfg.n_levels();
        check_levels("level marginals", pi, levels)?;
        check_levels("bias vector", bias, levels)?;
        check_levels("occupancy vector", p_occu, levels)?;
        Ok(CoverageModel {
            alpha: cfg.alpha,
            p_t: cfg.p_t(),
            noise: cfg.noise_power,
            bias: bias.to_vec(),
            p_occu: p_occu.to_vec(),
            split: association_split(pi, bias, cfg),
        })
    }

    pub fn split(&self) -> &TierSplit {
        &self.split
    }

    pub fn levels(&self) -> usize {
        self.bias.len()
    }

    /// `lambda_B(i) / P_assoc,i`, computed without dividing by `P_assoc,i`.
    pub fn association_density(&self, i: usize) -> f64 {
        let delta = 2.0 / self.alpha;
        self.split
            .lambda_tier
            .iter()
            .zip(&self.bias)
            .map(|(l, b)| l * (b / self.bias[i]).powf(delta))
            .sum()
    }

    /// `C_i` at SINR threshold `threshold`, summed over every level.
    pub fn interference_coefficient(&self, i: usize, threshold: f64) -> f64 {
        let delta = 2.0 / self.alpha;
        let mut c = 0.0;
        for j in 0..self.levels() {
            let lambda = self.split.lambda_tier[j];
            if lambda == 0.0 {
                continue;
            }
            let ratio = self.bias[j] / self.bias[i];
            let mut term = ratio.powf(delta);
            if self.p_occu[j] > 0.0 {
                term += self.p_occu[j] * hypergeom_z(threshold, self.alpha, ratio);
            }
            c += lambda * term;
        }
        c
    }

    /// `integral_0^inf exp(-v - kappa v^{alpha/2}) dv` for `v = pi C_i x^2`.
    pub fn noise_integral(&self, threshold: f64, c: f64) -> Result<f64> {
        let kappa = threshold * self.noise / (self.p_t * (PI * c).powf(self.alpha / 2.0));
        if kappa == 0.0 {
            return Ok(1.0);
        }
        let half_alpha = self.alpha / 2.0;
        integrate_semi_infinite(
            |v: f64| (-v - kappa * v.powf(half_alpha)).exp(),
            1.0,
            TIER_QUAD_TOL,
            TIER_TAIL_REL,
        )
    }

    /// `P_succ,i` at an arbitrary SINR threshold.
    pub fn success_tier_at(&self, i: usize, threshold: f64) -> Result<TierSuccess> {
        if self.split.p_assoc[i] <= 0.0 {
            return Ok(TierSuccess {
                value: 0.0,
                degenerate: true,
            });
        }
        let c = self.interference_coefficient(i, threshold);
        let j = self.noise_integral(threshold, c)?;
        Ok(TierSuccess {
            value: (self.association_density(i) / c * j).clamp(0.0, 1.0),
            degenerate: false,
        })
    }

    /// `integral_0^inf P_succ,i(2^t - 1) dt`, truncated at `t = 40` or once
    /// the integrand drops below 1e-6 of the running value.
    pub fn spectral_integral(&self, i: usize) -> Result<f64> {
        self.spectral_integral_with_limit(i).map(|(v, _)| v)
    }

    /// [`Self::spectral_integral`] together with the truncation point.
    pub fn spectral_integral_with_limit(&self, i: usize) -> Result<(f64, f64)> {
        let f = |t: f64| {
            self.success_tier_at(i, t.exp2() - 1.0)
                .map(|s| s.value)
                .unwrap_or(f64::NAN)
        };
        let (v, end) = integrate_truncated(f, RATE_T_MAX, RATE_QUAD_TOL, RATE_STOP_REL)?;
        if v.is_nan() {
            return Err(Error::Quadrature(format!(
                "inner success integral failed for level {i}"
            )));
        }
        Ok((v, end))
    }
}

pub fn interference_coefficient(
    i: usize,
    pi: &[f64],
    bias: &[f64],
    p_occu: &[f64],
    cfg: &NetworkConfig,
) -> Result<f64> {
    Ok(CoverageModel::new(cfg, pi, bias, p_occu)?.interference_coefficient(i, cfg.tau))
}

pub fn success_probability_tier(
    i: usize,
    pi: &[f64],
    bias: &[f64],
    p_occu: &[f64],
    cfg: &NetworkConfig,
) -> Result<TierSuccess> {
    CoverageModel::new(cfg, pi, bias, p_occu)?.success_tier_at(i, cfg.tau)
}

/// Per-level and overall success probabilities at the configured threshold.
pub fn success_probability(
    pi: &[f64],
    bias: &[f64],
    p_occu: &[f64],
    cfg: &NetworkConfig,
) -> Result<(Vec<f64>, f64)> {
    let model = CoverageModel::new(cfg, pi, bias, p_occu)?;
    mixture_success(&model, cfg.tau)
}

fn mixture_success(model: &CoverageModel, threshold: f64) -> Result<(Vec<f64>, f64)> {
    let tiers = (0..model.levels())
        .map(|i| model.success_tier_at(i, threshold).map(|s| s.value))
        .collect::<Result<Vec<_>>>()?;
    let total = tiers
        .iter()
        .zip(&model.split.p_assoc)
        .map(|(s, p)| s * p)
        .sum();
    Ok((tiers, total))
}

/// Expected per-user rate (per Hz) of a level:
/// `(1 - P_block) P_succ(tau) integral_0^inf P_succ(2^t - 1) dt`.
pub fn expected_rate_tier<F>(p_block: f64, tau: f64, p_succ: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if p_block >= 1.0 {
        return Ok(0.0);
    }
    let at_tau = p_succ(tau)?;
    if at_tau == 0.0 {
        return Ok(0.0);
    }
    let f = |t: f64| p_succ(t.exp2() - 1.0).unwrap_or(f64::NAN);
    let (integral, _) = integrate_truncated(f, RATE_T_MAX, RATE_QUAD_TOL, RATE_STOP_REL)?;
    if integral.is_nan() {
        return Err(Error::Quadrature("inner success integral failed".into()));
    }
    Ok((1.0 - p_block) * at_tau * integral)
}

/// Throughput per km²: user density times the association-weighted rate,
/// scaled by the active-user ratio `rho_i / U_i`.
pub fn area_throughput(
    users: &[f64],
    rho: &[f64],
    rate_tier: &[f64],
    p_assoc: &[f64],
    cfg: &NetworkConfig,
) -> f64 {
    let sum: f64 = (0..users.len())
        .filter(|&i| users[i] > 0.0)
        .map(|i| rho[i] / users[i] * rate_tier[i] * p_assoc[i])
        .sum();
    cfg.total_user_density() * sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCarbon {
    /// Mean power draw of one BS at each level, W.
    pub p_level: Vec<f64>,
    pub p_tot: f64,
    pub p_grid: f64,
    pub e_tot: f64,
}

/// Area power, grid power and emissions. Only level-0 BSs draw from the
/// grid; the rest run on stored renewable energy.
pub fn power_and_carbon(pi: &[f64], lm: &LevelMetrics, cfg: &NetworkConfig) -> PowerCarbon {
    let p_t = cfg.p_t();
    let p_level: Vec<f64> = lm
        .n_mean
        .iter()
        .map(|n| cfg.p0_static + cfg.delta_p * p_t * n)
        .collect();
    let lambda: Vec<f64> = pi.iter().map(|p| p * cfg.lambda_b).collect();
    let p_tot = p_level.iter().zip(&lambda).map(|(p, l)| p * l).sum();
    let p_grid = p_level[0] * lambda[0];
    let renewable: f64 = p_level
        .iter()
        .zip(&lambda)
        .skip(1)
        .map(|(p, l)| p * l)
        .sum();
    let e_tot = (p_grid * cfg.xi_grid + renewable * cfg.xi_re) * cfg.delta_t;
    PowerCarbon {
        p_level,
        p_tot,
        p_grid,
        e_tot,
    }
}

/// `(eta_ee, eta_ce)`; `eta_ce` is `+inf` when nothing is emitted.
pub fn efficiencies(area_rate: f64, p_tot: f64, e_tot: f64, cfg: &NetworkConfig) -> (f64, f64) {
    let eta_ee = if p_tot > 0.0 { area_rate / p_tot } else { 0.0 };
    let eta_ce = if area_rate == 0.0 {
        0.0
    } else if e_tot > 0.0 {
        area_rate * cfg.delta_t / e_tot
    } else {
        f64::INFINITY
    };
    (eta_ee, eta_ce)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMetrics {
    pub p_succ_tier: Vec<f64>,
    pub p_succ: f64,
    pub p_assoc: Vec<f64>,
    pub rate_tier: Vec<f64>,
    pub area_rate: f64,
    pub p_tot: f64,
    pub p_grid: f64,
    pub e_tot: f64,
    pub eta_ee: f64,
    pub eta_ce: f64,
}

/// Full metric pipeline for a solved network state.
pub fn network_metrics(
    cfg: &NetworkConfig,
    pi: &[f64],
    lm: &LevelMetrics,
    bias: &[f64],
    users: &[f64],
    rho: &[f64],
) -> Result<NetworkMetrics> {
    let model = CoverageModel::new(cfg, pi, bias, &lm.p_occu)?;
    let (p_succ_tier, p_succ) = mixture_success(&model, cfg.tau)?;
    let rate_tier = (0..model.levels())
        .map(|i| {
            if model.split.p_assoc[i] <= 0.0 || lm.p_block[i] >= 1.0 || p_succ_tier[i] == 0.0 {
                return Ok(0.0);
            }
            let inner = model.spectral_integral(i)?;
            Ok(cfg.bandwidth * (1.0 - lm.p_block[i]) * p_succ_tier[i] * inner)
        })
        .collect::<Result<Vec<_>>>()?;
    let area_rate = area_throughput(users, rho, &rate_tier, &model.split.p_assoc, cfg);
    let pc = power_and_carbon(pi, lm, cfg);
    let (eta_ee, eta_ce) = efficiencies(area_rate, pc.p_tot, pc.e_tot, cfg);
    Ok(NetworkMetrics {
        p_succ_tier,
        p_succ,
        p_assoc: model.split.p_assoc,
        rate_tier,
        area_rate,
        p_tot: pc.p_tot,
        p_grid: pc.p_grid,
        e_tot: pc.e_tot,
        eta_ee,
        eta_ce,
    })
}
