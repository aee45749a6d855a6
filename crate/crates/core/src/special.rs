//! Gauss hypergeometric function on the real half-line `z < 1` and the
//! interference factor built from it.

use statrs::function::gamma::gamma;

const SERIES_TOL: f64 = 1e-15;
const MAX_TERMS: usize = 10_000;

/// Power series, valid for `|z| < 1`; stops once a term falls below
/// `SERIES_TOL` relative to the running sum.
fn series(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_TERMS {
        let n = n as f64;
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
        sum += term;
        if term.abs() <= SERIES_TOL * sum.abs() {
            break;
        }
    }
    sum
}

fn near_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9
}

/// `2F1(a, b; c; z)` for real `z < 1`.
///
/// Negative arguments go through the Pfaff transformation
/// `2F1(a,b;c;z) = (1-z)^{-a} 2F1(a, c-b; c; z/(z-1))`, which lands in
/// `[0, 1)`. Arguments above one half then use the `1 - z` connection
/// formula, which needs `c - a - b` to be non-integral; otherwise the plain
/// series is summed.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> f64 {
    assert!(z < 1.0, "hyp2f1 is only implemented for z < 1 (got {z})");
    if z == 0.0 {
        return 1.0;
    }
    if z < 0.0 {
        let w = z / (z - 1.0);
        return (1.0 - z).powf(-a) * hyp2f1_unit(a, c - b, c, w, 1.0 / (1.0 - z));
    }
    hyp2f1_unit(a, b, c, z, 1.0 - z)
}

/// `0 <= z < 1`, with `y = 1 - z` supplied so it keeps full precision
/// near one.
fn hyp2f1_unit(a: f64, b: f64, c: f64, z: f64, y: f64) -> f64 {
    let s = c - a - b;
    if z <= 0.5 || near_integer(s) {
        return series(a, b, c, z);
    }
    let g1 = gamma(c) * gamma(s) / (gamma(c - a) * gamma(c - b));
    let g2 = gamma(c) * gamma(-s) / (gamma(a) * gamma(b));
    g1 * series(a, b, 1.0 - s, y) + y.powf(s) * g2 * series(c - a, c - b, 1.0 + s, y)
}

/// Interference factor of a tier whose bias is `b_ratio = B_j / B_i` times
/// the serving tier's:
///
/// ```text
/// Z = 2 tau / (alpha - 2) * b^{2/alpha - 1} * 2F1(1, 1 - 2/alpha; 2 - 2/alpha; -tau / b)
///   = 2 * integral_{b^{1/alpha}}^inf tau s / (s^alpha + tau) ds
/// ```
///
/// Interferers of that tier sit beyond `b^{1/alpha}` times the serving
/// distance, hence the `-tau / b` argument.
pub fn hypergeom_z(tau: f64, alpha: f64, b_ratio: f64) -> f64 {
    debug_assert!(tau >= 0.0 && alpha > 2.0 && b_ratio > 0.0);
    if tau == 0.0 {
        return 0.0;
    }
    let delta = 2.0 / alpha;
    2.0 * tau / (alpha - 2.0)
        * b_ratio.powf(delta - 1.0)
        * hyp2f1(1.0, 1.0 - delta, 2.0 - delta, -tau / b_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn arctan_identity() {
        // 2F1(1, 1/2; 3/2; -x) = atan(sqrt x) / sqrt x
        for x in [1e-4f64, 0.1, 0.5, 1.0, 3.0, 10.0, 1e3, 1e6, 1e10] {
            let s: f64 = x.sqrt();
            let err = rel(hyp2f1(1.0, 0.5, 1.5, -x), s.atan() / s);
            assert!(err < 1e-12, "x = {x} err {err:e}");
        }
    }

    #[test]
    fn log_identity() {
        // 2F1(1, 1; 2; z) = -ln(1 - z) / z
        for z in [-50.0, -2.0, -0.3, 0.2, 0.6, 0.9] {
            let expect = -(1.0f64 - z).ln() / z;
            assert!(rel(hyp2f1(1.0, 1.0, 2.0, z), expect) < 1e-12, "z = {z}");
        }
    }

    #[test]
    fn z_closed_forms() {
        assert_eq!(hypergeom_z(0.0, 4.0, 1.0), 0.0);
        assert!(rel(hypergeom_z(1.0, 4.0, 1.0), std::f64::consts::FRAC_PI_4) < 1e-13);
        let s = 0.1f64.sqrt();
        assert!(rel(hypergeom_z(0.1, 4.0, 1.0), s * s.atan()) < 1e-13);
        assert!((hypergeom_z(0.1, 4.0, 1.0) - 0.0968534).abs() < 1e-7);
    }

    #[test]
    fn z_closed_form_with_bias() {
        // alpha = 4: Z = sqrt(tau) * (pi/2 - atan(sqrt(b / tau))).
        for (tau, b) in [(0.1f64, 2.0f64), (1.0, 16.0), (5.0, 0.25), (1e4, 3.0)] {
            let s: f64 = tau.sqrt();
            let expect = s * (std::f64::consts::FRAC_PI_2 - (b / tau).sqrt().atan());
            assert!(
                rel(hypergeom_z(tau, 4.0, b), expect) < 1e-12,
                "tau {tau} b {b}"
            );
        }
    }

    #[test]
    fn z_is_monotone() {
        let mut last = 0.0;
        for k in 1..60 {
            let tau = 1e-3 * 1.5f64.powi(k);
            let z = hypergeom_z(tau, 3.3, 0.7);
            assert!(z > last);
            last = z;
        }
    }
}
