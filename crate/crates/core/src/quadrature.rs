//! Adaptive Simpson quadrature, with a wrapper for integrals over `[0, inf)`.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

struct Simpson<'a, F> {
    f: &'a F,
    evals: usize,
    failed: Option<(f64, f64)>,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        self.evals += 2;
        let h = b - a;
        let left = h / 12.0 * (fa + 4.0 * flm + fm);
        let right = h / 12.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        if depth == 0 {
            self.failed.get_or_insert((a, b));
            return left + right + diff / 15.0;
        }
        self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut s = Simpson {
        f: &f,
        evals: 3,
        failed: None,
    };
    let value = s.recurse(a, b, fa, fm, fb, whole, tol, MAX_DEPTH);
    if let Some((lo, hi)) = s.failed {
        return Err(Error::Quadrature(format!(
            "no convergence on [{lo:e}, {hi:e}] within [{a}, {b}] after {} evaluations (tol {tol:e})",
            s.evals
        )));
    }
    if !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite result on [{a}, {b}]"
        )));
    }
    Ok(value)
}

/// Integral of a decaying `f` over `[0, inf)`.
///
/// Integrates `[0, scale]`, then chunks of doubling length until a chunk
/// contributes less than `tail_rel` of the running total.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    tol: f64,
    tail_rel: f64,
) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = scale;
    let mut total = 0.0;
    for _ in 0..80 {
        let chunk = integrate(&f, lo, hi, tol)?;
        total += chunk;
        if chunk.abs() <= tail_rel * total.abs() {
            return Ok(total);
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::Quadrature(format!(
        "tail still significant at {hi:e} (running integral {total:e})"
    )))
}

/// Integral over `[0, t_max]` of a decaying `f`, stopping early once the
/// integrand at a chunk boundary falls below `stop_rel` of the running
/// integral. Returns the integral and the upper limit actually used.
pub fn integrate_truncated<F: Fn(f64) -> f64>(
    f: F,
    t_max: f64,
    tol: f64,
    stop_rel: f64,
) -> Result<(f64, f64)> {
    let mut lo = 0.0;
    let mut hi = 1.0f64.min(t_max);
    let mut total = 0.0;
    loop {
        total += integrate(&f, lo, hi, tol)?;
        if hi >= t_max || f(hi).abs() < stop_rel * total.abs() {
            return Ok((total, hi));
        }
        lo = hi;
        hi = (2.0 * hi).min(t_max);
    }
}
