//! Coupling between BS battery levels and associated users.
//!
//! The level marginals `Pi` fix the user load of each level (`U = G(Pi)`),
//! the load fixes the arrival rates of every BS chain, and solving the chain
//! gives back `Pi = F(U)`. Picard iteration on that loop, optionally damped.

use crate::analytics::{average_users, BiasVector};
use crate::config::NetworkConfig;
use crate::error::Result;
use crate::qbd::{QbdGenerator, SteadyState};

/// User load to arrival rate, `rho = scale * U + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalMap {
    pub scale: f64,
    pub offset: f64,
}

impl ArrivalMap {
    pub const IDENTITY: ArrivalMap = ArrivalMap {
        scale: 1.0,
        offset: 0.0,
    };

    pub fn from_config(cfg: &NetworkConfig) -> Self {
        ArrivalMap {
            scale: cfg.arrival_scale,
            offset: cfg.arrival_offset,
        }
    }

    pub fn apply(&self, users: &[f64]) -> Vec<f64> {
        users.iter().map(|u| self.scale * u + self.offset).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub eps: f64,
    pub t_max: usize,
    /// `Pi <- (1 - damping) Pi_prev + damping Pi_new`; 1 is plain Picard.
    pub damping: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            eps: 1e-8,
            t_max: 100,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub pi: Vec<f64>,
    pub users: Vec<f64>,
    /// Arrival rates whose chain solution is `steady_state`.
    pub rho: Vec<f64>,
    pub steady_state: SteadyState,
    pub iterations: usize,
    /// Sup-norm change of `Pi` in the last sweep.
    pub residual: f64,
    pub converged: bool,
    /// Residual after each sweep.
    pub trace: Vec<f64>,
}

impl FixedPointResult {
    /// `iteration,residual` CSV of the sweep history.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,residual\n");
        for (k, r) in self.trace.iter().enumerate() {
            out.push_str(&format!("{},{r:e}\n", k + 1));
        }
        out
    }
}

/// Stationary chain for given arrival rates.
pub fn chain_steady_state(cfg: &NetworkConfig, rho: &[f64]) -> Result<SteadyState> {
    QbdGenerator::build(cfg.chain_rates(), rho)?.solve()
}

pub fn solve(
    cfg: &NetworkConfig,
    bias: &BiasVector,
    opts: FixedPointOptions,
) -> Result<FixedPointResult> {
    let levels = cfg.n_levels();
    if bias.len() != levels {
        return Err(crate::error::Error::Dimension {
            what: "bias vector",
            expected: levels,
            got: bias.len(),
        });
    }
    if !(opts.eps > 0.0) || opts.t_max < 1 || !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(crate::error::Error::Precondition(format!(
            "need eps > 0, t_max >= 1 and damping in (0, 1] (got {opts:?})"
        )));
    }
    let arrivals = ArrivalMap::from_config(cfg);
    let b = bias.as_slice();

    let mut pi = vec![1.0 / levels as f64; levels];
    let mut users = average_users(&pi, b, cfg).total;
    let mut trace = Vec::new();
    let mut state;
    let mut rho;
    loop {
        rho = arrivals.apply(&users);
        state = chain_steady_state(cfg, &rho)?;
        let next: Vec<f64> = if opts.damping == 1.0 {
            state.level_marginals.clone()
        } else {
            pi.iter()
                .zip(&state.level_marginals)
                .map(|(old, new)| (1.0 - opts.damping) * old + opts.damping * new)
                .collect()
        };
        let d = pi
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        trace.push(d);
        pi = next;
        users = average_users(&pi, b, cfg).total;
        if d < opts.eps || trace.len() >= opts.t_max {
            break;
        }
    }
    if opts.damping != 1.0 {
        // Report the chain actually solved at the final marginals.
        rho = arrivals.apply(&users);
        state = chain_steady_state(cfg, &rho)?;
        pi = state.level_marginals.clone();
        users = average_users(&pi, b, cfg).total;
    }
    let residual = *trace.last().expect("at least one sweep");
    Ok(FixedPointResult {
        pi,
        users,
        rho,
        steady_state: state,
        iterations: trace.len(),
        residual,
        converged: residual < opts.eps,
        trace,
    })
}
