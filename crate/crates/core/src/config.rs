//! Network model parameters.
//!
//! Powers are in watts, densities per km², distances in km and all
//! Markov-chain rates per unit time `delta_t` (seconds). The on-disk format
//! is a flat JSON object; `noise_power_dbm` and `tau_db` may be given in
//! place of the linear `noise_power` / `tau` keys.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::qbd::ChainRates;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Validated model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub p0_static: f64,
    pub delta_p: f64,
    pub p_trans: f64,
    pub n_channels: usize,
    pub t_levels: usize,
    pub lambda_b: f64,
    pub lambda_u1: f64,
    pub lambda_p: f64,
    pub lambda_u2: f64,
    pub hotspot_radius: f64,
    pub alpha: f64,
    /// Watts.
    pub noise_power: f64,
    /// Linear SINR threshold.
    pub tau: f64,
    pub mu: f64,
    pub omega: f64,
    pub nu: f64,
    pub delta_t: f64,
    pub static_drain_override: Option<f64>,
    pub xi_grid: f64,
    pub xi_re: f64,
    pub p_req: f64,
    /// Multiplier turning per-Hz rates into bps.
    pub bandwidth: f64,
    /// Arrival map rho = arrival_scale * U + arrival_offset.
    pub arrival_scale: f64,
    pub arrival_offset: f64,
}

/// Derived per-channel power, energy unit and static drain rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub p_t: f64,
    pub theta: f64,
    pub static_drain: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    p0_static: f64,
    delta_p: f64,
    p_trans: f64,
    n_channels: i64,
    t_levels: i64,
    lambda_b: f64,
    lambda_u1: f64,
    lambda_p: f64,
    lambda_u2: f64,
    hotspot_radius: f64,
    alpha: f64,
    noise_power: Option<f64>,
    noise_power_dbm: Option<f64>,
    tau: Option<f64>,
    tau_db: Option<f64>,
    mu: f64,
    omega: f64,
    nu: f64,
    #[serde(default = "one")]
    delta_t: f64,
    #[serde(default)]
    static_drain_override: Option<f64>,
    xi_grid: f64,
    #[serde(default)]
    xi_re: f64,
    #[serde(default = "default_p_req")]
    p_req: f64,
    #[serde(default = "one")]
    bandwidth: f64,
    #[serde(default = "one")]
    arrival_scale: f64,
    #[serde(default)]
    arrival_offset: f64,
}

fn one() -> f64 {
    1.0
}

fn default_p_req() -> f64 {
    0.95
}

fn pick(
    name: &str,
    linear: Option<f64>,
    log: Option<f64>,
    convert: fn(f64) -> f64,
    problems: &mut Vec<String>,
) -> f64 {
    match (linear, log) {
        (Some(v), None) => v,
        (None, Some(v)) => convert(v),
        (Some(_), Some(_)) => {
            problems.push(format!("{name} given both linear and logarithmic"));
            f64::NAN
        }
        (None, None) => {
            problems.push(format!("{name} is missing"));
            f64::NAN
        }
    }
}

impl NetworkConfig {
    /// Parameters of the reference deployment (`nu` and the static drain
    /// are scenario knobs and set to the calibrated reference values).
    pub fn reference() -> Self {
        NetworkConfig {
            p0_static: 56.0,
            delta_p: 2.6,
            p_trans: 6.3,
            n_channels: 20,
            t_levels: 10,
            lambda_b: 1.0,
            lambda_u1: 5.0,
            lambda_p: 1.0,
            lambda_u2: 1.0,
            hotspot_radius: 2.0,
            alpha: 4.0,
            noise_power: dbm_to_watts(-40.0),
            tau: db_to_linear(-10.0),
            mu: 2.0,
            omega: 1.0,
            nu: 40.0,
            delta_t: 1.0,
            static_drain_override: Some(REFERENCE_STATIC_DRAIN),
            xi_grid: 1.5842e-4,
            xi_re: 0.0,
            p_req: 0.95,
            bandwidth: 1.0,
            arrival_scale: 1.0,
            arrival_offset: 0.0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut problems = Vec::new();
        let noise_power = pick(
            "noise_power",
            raw.noise_power,
            raw.noise_power_dbm,
            dbm_to_watts,
            &mut problems,
        );
        let tau = pick("tau", raw.tau, raw.tau_db, db_to_linear, &mut problems);
        let count = |name: &str, v: i64, problems: &mut Vec<String>| {
            if v < 1 {
                problems.push(format!("{name} must be at least 1"));
                1
            } else {
                v as usize
            }
        };
        let n_channels = count("n_channels", raw.n_channels, &mut problems);
        let t_levels = count("t_levels", raw.t_levels, &mut problems);
        let cfg = NetworkConfig {
            p0_static: raw.p0_static,
            delta_p: raw.delta_p,
            p_trans: raw.p_trans,
            n_channels,
            t_levels,
            lambda_b: raw.lambda_b,
            lambda_u1: raw.lambda_u1,
            lambda_p: raw.lambda_p,
            lambda_u2: raw.lambda_u2,
            hotspot_radius: raw.hotspot_radius,
            alpha: raw.alpha,
            noise_power,
            tau,
            mu: raw.mu,
            omega: raw.omega,
            nu: raw.nu,
            delta_t: raw.delta_t,
            static_drain_override: raw.static_drain_override,
            xi_grid: raw.xi_grid,
            xi_re: raw.xi_re,
            p_req: raw.p_req,
            bandwidth: raw.bandwidth,
            arrival_scale: raw.arrival_scale,
            arrival_offset: raw.arrival_offset,
        };
        problems.extend(cfg.violations());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Invalid(problems))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Every violated invariant; empty when the config is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be finite and positive (got {v})"));
            }
        };
        positive("p0_static", self.p0_static);
        positive("delta_p", self.delta_p);
        positive("p_trans", self.p_trans);
        positive("lambda_b", self.lambda_b);
        positive("mu", self.mu);
        positive("omega", self.omega);
        positive("nu", self.nu);
        positive("delta_t", self.delta_t);
        positive("bandwidth", self.bandwidth);
        let mut nonneg = |name: &str, v: f64| {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("{name} must be finite and nonnegative (got {v})"));
            }
        };
        nonneg("lambda_u1", self.lambda_u1);
        nonneg("lambda_p", self.lambda_p);
        nonneg("lambda_u2", self.lambda_u2);
        nonneg("hotspot_radius", self.hotspot_radius);
        nonneg("noise_power", self.noise_power);
        nonneg("tau", self.tau);
        nonneg("xi_grid", self.xi_grid);
        nonneg("xi_re", self.xi_re);
        nonneg("arrival_scale", self.arrival_scale);
        nonneg("arrival_offset", self.arrival_offset);
        if let Some(d) = self.static_drain_override {
            nonneg("static_drain_override", d);
        }
        if self.total_user_density().partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            out.push("total user density must be positive".to_string());
        }
        if !(self.alpha.is_finite() && self.alpha > 2.0) {
            out.push(format!("alpha must exceed 2 (got {})", self.alpha));
        }
        if !(self.p_req >= 0.0 && self.p_req < 1.0) {
            out.push(format!("p_req must lie in [0, 1) (got {})", self.p_req));
        }
        if self.n_channels < 1 {
            out.push("n_channels must be at least 1".to_string());
        }
        if self.t_levels < 1 {
            out.push("t_levels must be at least 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.violations();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(problems))
        }
    }

    pub fn derived(&self) -> DerivedConstants {
        let p_t = self.p_trans / self.n_channels as f64;
        let theta = self.delta_p * p_t * self.delta_t;
        let static_drain = self.static_drain_override.unwrap_or(self.p0_static / theta);
        DerivedConstants {
            p_t,
            theta,
            static_drain,
        }
    }

    pub fn p_t(&self) -> f64 {
        self.p_trans / self.n_channels as f64
    }

    /// Mean users per km² over both user populations.
    pub fn total_user_density(&self) -> f64 {
        self.clustered_user_density() + self.lambda_u1
    }

    pub fn clustered_user_density(&self) -> f64 {
        self.lambda_u2 * std::f64::consts::PI * self.hotspot_radius.powi(2) * self.lambda_p
    }

    pub fn n_levels(&self) -> usize {
        self.t_levels + 1
    }

    pub fn chain_rates(&self) -> ChainRates {
        ChainRates {
            n_channels: self.n_channels,
            t_levels: self.t_levels,
            nu: self.nu,
            mu: self.mu,
            omega: self.omega,
            static_drain: self.derived().static_drain,
        }
    }

    /// Hex SHA-256 of the canonical JSON form (linear units, fixed key order).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config is always serializable");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Static drain (energy units per unit time) used by the reference scenario.
///
/// With `delta_t = 1 s` the nominal `P_0 / theta` is about 68.4, which keeps
/// every battery empty for generation rates near 40. This value balances the
/// mean drain of a moderately loaded BS against `nu = 40`.
pub const REFERENCE_STATIC_DRAIN: f64 = 25.0;

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE_JSON: &str = r#"{
        "p0_static": 56, "delta_p": 2.6, "p_trans": 6.3, "n_channels": 20, "t_levels": 10,
        "lambda_b": 1, "lambda_u1": 5, "lambda_p": 1, "lambda_u2": 1, "hotspot_radius": 2,
        "alpha": 4, "noise_power_dbm": -40, "tau_db": -10, "mu": 2, "omega": 1, "nu": 40,
        "xi_grid": 1.5842e-4, "xi_re": 0
    }"#;

    #[test]
    fn reference_file_loads() {
        let cfg = NetworkConfig::from_json(REFERENCE_JSON).unwrap();
        assert_eq!(cfg.n_channels, 20);
        assert!((cfg.tau - 0.1).abs() < 1e-15);
        assert!((cfg.noise_power - 1e-7).abs() < 1e-20);
        assert_eq!(cfg.delta_t, 1.0);
        assert_eq!(cfg.static_drain_override, None);
    }

    #[test]
    fn derived_constants_reference_config() {
        let cfg = NetworkConfig::from_json(REFERENCE_JSON).unwrap();
        let d = cfg.derived();
        assert!((d.p_t - 0.315).abs() < 1e-12);
        assert!((d.theta - 0.819).abs() < 1e-12);
        assert!((d.static_drain - 56.0 / 0.819).abs() < 1e-12);
        assert!((d.static_drain - 68.376).abs() < 1e-3);
    }

    #[test]
    fn drain_override_wins() {
        let mut cfg = NetworkConfig::from_json(REFERENCE_JSON).unwrap();
        cfg.static_drain_override = Some(20.0);
        assert_eq!(cfg.derived().static_drain, 20.0);
    }

    #[test]
    fn unit_energy_identity() {
        let mut cfg = NetworkConfig::reference();
        cfg.delta_p = 1.0;
        cfg.p_trans = cfg.n_channels as f64;
        assert_eq!(cfg.derived().theta, 1.0);
    }

    #[test]
    fn alpha_two_rejected() {
        let text = REFERENCE_JSON.replace("\"alpha\": 4", "\"alpha\": 2");
        match NetworkConfig::from_json(&text) {
            Err(Error::Invalid(p)) => assert!(p.iter().any(|m| m.contains("alpha must exceed 2"))),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn every_violation_reported() {
        let text = REFERENCE_JSON
            .replace("\"alpha\": 4", "\"alpha\": 1.5")
            .replace("\"mu\": 2", "\"mu\": -1")
            .replace("\"t_levels\": 10", "\"t_levels\": 0");
        let Err(Error::Invalid(p)) = NetworkConfig::from_json(&text) else {
            panic!("expected validation error");
        };
        assert_eq!(p.len(), 3, "{p:?}");
    }

    #[test]
    fn malformed_is_parse_error() {
        assert!(matches!(
            NetworkConfig::from_json("{ not json"),
            Err(Error::Parse(_))
        ));
        let missing = REFERENCE_JSON.replace("\"mu\": 2,", "");
        assert!(matches!(
            NetworkConfig::from_json(&missing),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn both_tau_forms_rejected() {
        let text = REFERENCE_JSON.replace("\"tau_db\": -10", "\"tau_db\": -10, \"tau\": 0.1");
        assert!(matches!(
            NetworkConfig::from_json(&text),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = NetworkConfig::reference();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.nu = 41.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn json_round_trip_is_bit_exact(
                nu in 1e-3f64..1e3,
                tau in 1e-6f64..1e3,
                noise in 0f64..1e-3,
                xi in 0f64..1.0,
                drain in proptest::option::of(0f64..100.0),
            ) {
                let mut cfg = NetworkConfig::reference();
                cfg.nu = nu;
                cfg.tau = tau;
                cfg.noise_power = noise;
                cfg.xi_grid = xi;
                cfg.static_drain_override = drain;
                let back = NetworkConfig::from_json(&cfg.to_json()).unwrap();
                prop_assert_eq!(back, cfg);
            }

            #[test]
            fn db_conversions_invert(db in -150f64..150.0) {
                let lin = db_to_linear(db);
                prop_assert!(((linear_to_db(lin) - db) / db.abs().max(1.0)).abs() < 1e-12);
                let w = dbm_to_watts(db);
                prop_assert!(((watts_to_dbm(w) - db) / db.abs().max(1.0)).abs() < 1e-12);
                let back = db_to_linear(linear_to_db(lin));
                prop_assert!(((back - lin) / lin).abs() < 1e-12);
            }
        }
    }
}
