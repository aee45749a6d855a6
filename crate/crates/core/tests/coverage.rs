#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use greencell::analytics::{association_split, average_users, success_probability, CoverageModel};
use greencell::config::NetworkConfig;
use greencell::special::hypergeom_z;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn interference_limited(tau: f64) -> NetworkConfig {
    NetworkConfig {
        noise_power: 0.0,
        tau,
        alpha: 4.0,
        ..NetworkConfig::reference()
    }
}

fn uniform(levels: usize) -> Vec<f64> {
    vec![1.0 / levels as f64; levels]
}

fn midpoint<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|k| f(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
}

#[test]
fn interference_limited_closed_forms() {
    for (tau, z) in [(1.0, PI / 4.0), (0.1, 0.1f64.sqrt() * 0.1f64.sqrt().atan())] {
        let cfg = interference_limited(tau);
        let l = cfg.n_levels();
        let (tiers, total) =
            success_probability(&uniform(l), &vec![1.0; l], &vec![1.0; l], &cfg).unwrap();
        let expect = 1.0 / (1.0 + z);
        assert!(
            (total - expect).abs() < 1e-9,
            "tau {tau}: {total} vs {expect}"
        );
        assert!(tiers.iter().all(|t| (t - expect).abs() < 1e-9));
    }
}

/// Defining integral of the interference factor after `s = c w^{-1/(alpha-2)}`.
fn z_oracle(tau: f64, alpha: f64, b: f64) -> f64 {
    let c = b.powf(1.0 / alpha);
    let m = 1.0 / (alpha - 2.0);
    let e = alpha / (alpha - 2.0);
    2.0 * tau
        * c
        * c
        * m
        * midpoint(
            |w| 1.0 / (c.powf(alpha) + tau * w.powf(e)),
            0.0,
            1.0,
            100_000,
        )
}

#[test]
fn interference_factor_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let tau = rng.random_range(0.01..10.0);
        let alpha = rng.random_range(2.5..6.0);
        let b = rng.random_range(0.1..10.0);
        let (z, o) = (hypergeom_z(tau, alpha, b), z_oracle(tau, alpha, b));
        assert!(
            (z - o).abs() / o < 1e-8,
            "tau {tau} alpha {alpha} b {b}: {z} vs {o}"
        );
    }
}

fn reference_model(bias: &[f64], p_occu: &[f64]) -> (NetworkConfig, CoverageModel) {
    let cfg = NetworkConfig::reference();
    let l = cfg.n_levels();
    let pi: Vec<f64> = (0..l)
        .map(|i| (1.0 + i as f64) / ((l * (l + 1)) as f64 / 2.0))
        .collect();
    let model = CoverageModel::new(&cfg, &pi, bias, p_occu).unwrap();
    (cfg, model)
}

#[test]
fn adaptive_integrals_match_midpoint_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..4 {
        let l = NetworkConfig::reference().n_levels();
        let bias: Vec<f64> = (0..l)
            .map(|i| {
                if i == 0 {
                    1.0
                } else {
                    rng.random_range(1.0..20.0)
                }
            })
            .collect();
        let occ: Vec<f64> = (0..l).map(|_| rng.random_range(0.1..1.0)).collect();
        let (cfg, model) = reference_model(&bias, &occ);
        let i = rng.random_range(0..l);
        for threshold in [0.1, 3.0, 1e3] {
            let c = model.interference_coefficient(i, threshold);
            let kappa = threshold * cfg.noise_power / (cfg.p_t() * (PI * c).powf(cfg.alpha / 2.0));
            let j = model.noise_integral(threshold, c).unwrap();
            let oracle = midpoint(
                |v| (-v - kappa * v.powf(cfg.alpha / 2.0)).exp(),
                0.0,
                45.0,
                20_000,
            );
            assert!((j - oracle).abs() / oracle < 1e-6, "{j} vs {oracle}");
        }
        let (inner, end) = model.spectral_integral_with_limit(i).unwrap();
        let oracle = midpoint(
            |t| model.success_tier_at(i, t.exp2() - 1.0).unwrap().value,
            0.0,
            end,
            20_000,
        );
        assert!(
            (inner - oracle).abs() / oracle < 1e-6,
            "{inner} vs {oracle}"
        );
    }
}

#[test]
fn tier_success_decreases_with_threshold_and_load() {
    let l = NetworkConfig::reference().n_levels();
    let bias: Vec<f64> = (0..l).map(|i| (1.0 + i as f64).powi(2)).collect();
    let (_, model) = reference_model(&bias, &vec![0.5; l]);
    for i in 0..l {
        let mut last = 1.0;
        for k in 0..30 {
            let s = model
                .success_tier_at(i, 0.01 * 1.6f64.powi(k))
                .unwrap()
                .value;
            assert!(s <= last + 1e-12);
            last = s;
        }
    }
    for j in 0..l {
        let mut occ = vec![0.5; l];
        let before = reference_model(&bias, &occ)
            .1
            .success_tier_at(3, 0.1)
            .unwrap()
            .value;
        occ[j] = 0.9;
        let after = reference_model(&bias, &occ)
            .1
            .success_tier_at(3, 0.1)
            .unwrap()
            .value;
        assert!(after <= before + 1e-12);
    }
}

prop_compose! {
    fn state()(levels in 2usize..8)
        (pi in prop::collection::vec(0.01f64..1.0, levels),
         tail in prop::collection::vec(0.2f64..50.0, levels - 1),
         occ in prop::collection::vec(0.0f64..1.0, levels)) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let s: f64 = pi.iter().sum();
        let pi = pi.iter().map(|p| p / s).collect();
        let mut bias = vec![1.0];
        bias.extend(tail);
        (pi, bias, occ)
    }
}

fn cfg_with_levels(levels: usize) -> NetworkConfig {
    NetworkConfig {
        t_levels: levels - 1,
        ..NetworkConfig::reference()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixture_lies_between_tiers((pi, bias, occ) in state()) {
        let cfg = cfg_with_levels(pi.len());
        let (tiers, total) = success_probability(&pi, &bias, &occ, &cfg).unwrap();
        let lo = tiers.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = tiers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= total && total <= hi + 1e-12);
    }

    #[test]
    fn common_bias_scale_changes_nothing((pi, bias, occ) in state(), k in 0.1f64..100.0) {
        let cfg = cfg_with_levels(pi.len());
        let scaled: Vec<f64> = bias.iter().map(|b| b * k).collect();
        let a = success_probability(&pi, &bias, &occ, &cfg).unwrap();
        let b = success_probability(&pi, &scaled, &occ, &cfg).unwrap();
        prop_assert!((a.1 - b.1).abs() < 1e-12);
        for (x, y) in a.0.iter().zip(&b.0) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let sa = association_split(&pi, &bias, &cfg);
        let sb = association_split(&pi, &scaled, &cfg);
        for (x, y) in sa.p_assoc.iter().zip(&sb.p_assoc) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let ua = average_users(&pi, &bias, &cfg);
        let ub = average_users(&pi, &scaled, &cfg);
        for (x, y) in ua.total.iter().zip(&ub.total) {
            prop_assert!((x - y).abs() < 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn shares_and_users_are_consistent((pi, bias, _occ) in state()) {
        let cfg = cfg_with_levels(pi.len());
        let split = association_split(&pi, &bias, &cfg);
        prop_assert!((split.p_assoc.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let u = average_users(&pi, &bias, &cfg);
        for i in 0..pi.len() {
            prop_assert!((u.uniform[i] + u.clustered[i] - u.total[i]).abs() < 1e-12 * u.total[i].max(1.0));
            // Users at level i per unit area equal user density times the share.
            let lhs = u.total[i] * pi[i] * cfg.lambda_b;
            let rhs = cfg.total_user_density() * split.p_assoc[i];
            prop_assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0));
        }
    }
}
