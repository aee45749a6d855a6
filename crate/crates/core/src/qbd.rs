//! Level-dependent quasi-birth-death model of one base station.
//!
//! A state is `(i, j)`: battery level `i in 0..=T` (energy units) and busy
//! channels `j in 0..=N`. States are ordered lexicographically, so the
//! generator is block tridiagonal with blocks of order `N + 1`:
//!
//! ```text
//! | D_0 L_0                 |
//! | M_1 D_1 L_1             |
//! |     ...  ...  ...       |
//! |              M_T  D_T   |
//! ```
//!
//! `L_i = nu I` charges the battery, `M_i = s I + omega diag(0..N)` drains
//! it (static drain `s` plus `omega` per busy channel) and `D_i` holds the
//! channel births `rho_i` and deaths `j mu` together with the diagonal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};

/// Level-independent rates of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRates {
    pub n_channels: usize,
    pub t_levels: usize,
    pub nu: f64,
    pub mu: f64,
    pub omega: f64,
    pub static_drain: f64,
}

impl ChainRates {
    pub fn block_order(&self) -> usize {
        self.n_channels + 1
    }

    pub fn n_levels(&self) -> usize {
        self.t_levels + 1
    }

    pub fn n_states(&self) -> usize {
        self.block_order() * self.n_levels()
    }

    fn drain(&self, j: usize) -> f64 {
        self.static_drain + self.omega * j as f64
    }

    /// Outgoing transitions of `(i, j)` as `((i', j'), rate)`, zero rates omitted.
    fn transitions(
        &self,
        rho: &[f64],
        i: usize,
        j: usize,
    ) -> impl Iterator<Item = ((usize, usize), f64)> {
        let n = self.n_channels;
        let t = self.t_levels;
        let birth = (j < n).then(|| ((i, j + 1), rho[i]));
        let death = (j > 0).then(|| ((i, j - 1), j as f64 * self.mu));
        let up = (i < t).then(|| ((i + 1, j), self.nu));
        let down = (i > 0).then(|| ((i - 1, j), self.drain(j)));
        [birth, death, up, down]
            .into_iter()
            .flatten()
            .filter(|(_, r)| *r > 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct QbdGenerator {
    pub rates: ChainRates,
    pub rho: Vec<f64>,
    /// `D_0..D_T`.
    pub d: Vec<Matrix>,
    /// `L_0..L_{T-1}`.
    pub l: Vec<Matrix>,
    /// `M_1..M_T`, stored at index `i - 1`.
    pub m: Vec<Matrix>,
}

impl QbdGenerator {
    pub fn build(rates: ChainRates, rho: &[f64]) -> Result<Self> {
        let levels = rates.n_levels();
        if rho.len() != levels {
            return Err(Error::Dimension {
                what: "arrival-rate vector",
                expected: levels,
                got: rho.len(),
            });
        }
        if let Some(bad) = rho.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Precondition(format!(
                "arrival rates must be finite and nonnegative (got {bad})"
            )));
        }
        let n = rates.n_channels;
        let order = rates.block_order();
        let t = rates.t_levels;
        let l_block = Matrix::diagonal(&vec![rates.nu; order]);
        let m_block = Matrix::diagonal(&(0..order).map(|j| rates.drain(j)).collect::<Vec<_>>());

        let d = (0..levels)
            .map(|i| {
                let mut block = Matrix::zeros(order);
                for j in 0..order {
                    if j < n {
                        block[(j, j + 1)] = rho[i];
                    }
                    if j > 0 {
                        block[(j, j - 1)] = j as f64 * rates.mu;
                    }
                    let mut out = 0.0;
                    if j < n {
                        out += rho[i];
                    }
                    out += j as f64 * rates.mu;
                    if i < t {
                        out += rates.nu;
                    }
                    if i > 0 {
                        out += rates.drain(j);
                    }
                    block[(j, j)] = -out;
                }
                block
            })
            .collect();

        Ok(QbdGenerator {
            rates,
            rho: rho.to_vec(),
            d,
            l: vec![l_block; t],
            m: vec![m_block; t],
        })
    }

    pub fn n_states(&self) -> usize {
        self.rates.n_states()
    }

    pub fn state_index(&self, level: usize, channels: usize) -> usize {
        level * self.rates.block_order() + channels
    }

    /// Dense generator of order `(T+1)(N+1)`.
    pub fn assemble(&self) -> Matrix {
        let order = self.rates.block_order();
        let mut a = Matrix::zeros(self.n_states());
        let mut place = |bi: usize, bj: usize, block: &Matrix| {
            for r in 0..order {
                for c in 0..order {
                    a[(bi * order + r, bj * order + c)] = block[(r, c)];
                }
            }
        };
        for (i, block) in self.d.iter().enumerate() {
            place(i, i, block);
        }
        for (i, block) in self.l.iter().enumerate() {
            place(i, i + 1, block);
        }
        for (k, block) in self.m.iter().enumerate() {
            place(k + 1, k, block);
        }
        a
    }

    /// Stationary distribution by backward block recursion.
    pub fn solve(&self) -> Result<SteadyState> {
        let t = self.rates.t_levels;
        let order = self.rates.block_order();
        let singular = |level: usize| move |pivot: f64| Error::Singular { level, pivot };

        // Q_T = D_T, Q_i = D_i - L_i Q_{i+1}^{-1} M_{i+1}; keep LU of Q_1..Q_T.
        let mut factors: Vec<Option<Lu>> = vec![None; t + 1];
        let mut q = self.d[t].clone();
        for i in (0..t).rev() {
            let lu = q.lu().map_err(singular(i + 1))?;
            let x = lu.solve_matrix(&self.m[i]);
            factors[i + 1] = Some(lu);
            q = self.d[i].sub(&self.l[i].mul(&x));
        }

        // pi_0 Q_0 = 0 with sum(pi_0) = 1: swap the last column for ones.
        let mut q0 = q;
        for r in 0..order {
            q0[(r, order - 1)] = 1.0;
        }
        let mut rhs = vec![0.0; order];
        rhs[order - 1] = 1.0;
        let lu0 = q0.lu().map_err(singular(0))?;
        let mut blocks = vec![lu0.solve_left(&rhs)];

        for i in 0..t {
            let prev = &blocks[i];
            let b: Vec<f64> = self.l[i].left_mul(prev).iter().map(|v| -v).collect();
            let next = factors[i + 1]
                .as_ref()
                .expect("factored above")
                .solve_left(&b);
            blocks.push(next);
        }

        let total: f64 = blocks.iter().flatten().sum();
        let pi: Vec<Vec<f64>> = blocks
            .into_iter()
            .map(|row| row.into_iter().map(|v| (v / total).max(0.0)).collect())
            .collect();
        Ok(SteadyState::from_joint(pi))
    }
}

/// Joint stationary probabilities `pi[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub pi: Vec<Vec<f64>>,
    pub level_marginals: Vec<f64>,
}

impl SteadyState {
    pub fn from_joint(pi: Vec<Vec<f64>>) -> Self {
        let level_marginals = pi.iter().map(|row| row.iter().sum()).collect();
        SteadyState {
            pi,
            level_marginals,
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.pi.iter().flatten().copied().collect()
    }

    /// `max_k |(pi A)_k|` over the flattened state vector.
    pub fn residual(&self, gen: &QbdGenerator) -> f64 {
        let flat = self.flat();
        gen.assemble()
            .left_mul(&flat)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn n_channels(&self) -> usize {
        self.pi.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    /// Per-level blocking and occupancy, conditioned on the level.
    pub fn level_metrics(&self) -> LevelMetrics {
        let n = self.n_channels();
        let levels = self.pi.len();
        let mut lm = LevelMetrics {
            p_block: vec![0.0; levels],
            n_mean: vec![0.0; levels],
            p_occu: vec![0.0; levels],
            degenerate: vec![false; levels],
        };
        for (i, row) in self.pi.iter().enumerate() {
            let mass = self.level_marginals[i];
            if mass < DEGENERATE_LEVEL_MASS {
                lm.degenerate[i] = true;
                continue;
            }
            lm.p_block[i] = (row[n] / mass).clamp(0.0, 1.0);
            let busy: f64 = row.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
            lm.n_mean[i] = (busy / mass).clamp(0.0, n as f64);
            lm.p_occu[i] = lm.n_mean[i] / n as f64;
        }
        lm
    }
}

/// Levels with less stationary mass than this report zeroed metrics.
pub const DEGENERATE_LEVEL_MASS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelMetrics {
    pub p_block: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub p_occu: Vec<f64>,
    /// Levels whose mass was below [`DEGENERATE_LEVEL_MASS`].
    pub degenerate: Vec<bool>,
}

/// Event-driven simulation of the chain started in `(0, 0)`.
///
/// Returns the fraction of simulated time spent in each state, indexed
/// `[level][channels]`. Reaching a state with no outgoing rate puts all
/// remaining weight there.
pub fn simulate_trajectory(
    rates: ChainRates,
    rho: &[f64],
    n_events: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if rho.len() != rates.n_levels() {
        return Err(Error::Dimension {
            what: "arrival-rate vector",
            expected: rates.n_levels(),
            got: rho.len(),
        });
    }
    if n_events == 0 {
        return Err(Error::Precondition("n_events must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Exp::new(1.0).expect("unit rate");
    let order = rates.block_order();
    let mut time = vec![vec![0.0; order]; rates.n_levels()];
    let (mut i, mut j) = (0usize, 0usize);
    let mut moves: Vec<((usize, usize), f64)> = Vec::with_capacity(4);

    for _ in 0..n_events {
        moves.clear();
        moves.extend(rates.transitions(rho, i, j));
        let total: f64 = moves.iter().map(|(_, r)| r).sum();
        if total <= 0.0 {
            let mut out = vec![vec![0.0; order]; rates.n_levels()];
            out[i][j] = 1.0;
            return Ok(out);
        }
        let sojourn: f64 = unit.sample(&mut rng) / total;
        time[i][j] += sojourn;
        let mut pick = rng.random::<f64>() * total;
        let mut next = moves[moves.len() - 1].0;
        for &(state, r) in &moves {
            if pick < r {
                next = state;
                break;
            }
            pick -= r;
        }
        (i, j) = next;
    }

    let total: f64 = time.iter().flatten().sum();
    for row in &mut time {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(time)
}

/// Writes the dense generator and `pi` as CSV rows
/// `level,channels,a_0,...,a_{S-1},pi`.
pub fn debug_dump(gen: &QbdGenerator, ss: &SteadyState) -> String {
    let a = gen.assemble();
    let order = gen.rates.block_order();
    let mut out = String::from("level,channels");
    for k in 0..gen.n_states() {
        out.push_str(&format!(",a_{k}"));
    }
    out.push_str(",pi\n");
    for s in 0..gen.n_states() {
        let (i, j) = (s / order, s % order);
        out.push_str(&format!("{i},{j}"));
        for v in a.row(s) {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", ss.pi[i][j]));
    }
    out
}
