use greencell::analytics::average_users;
use greencell::config::NetworkConfig;
use greencell::fixed_point::{chain_steady_state, solve, ArrivalMap, FixedPointOptions};
use greencell::optimizer::power_law_bias;

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn converges_and_is_self_consistent() {
    let cfg = NetworkConfig::reference();
    for beta in [0.0, 1.5, 4.0] {
        let bias = power_law_bias(beta, cfg.t_levels);
        let fp = solve(&cfg, &bias, FixedPointOptions::default()).unwrap();
        assert!(
            fp.converged && fp.iterations <= 100,
            "beta {beta}: {:?}",
            fp.trace
        );
        let users = average_users(&fp.pi, bias.as_slice(), &cfg).total;
        assert!(sup(&users, &fp.users) < 1e-12);
        let again = chain_steady_state(&cfg, &ArrivalMap::from_config(&cfg).apply(&users)).unwrap();
        assert!(sup(&again.level_marginals, &fp.pi) < 1e-8);
        assert!(fp.trace_csv().lines().count() == fp.iterations + 1);
    }
}

#[test]
fn nearest_association_needs_no_iteration() {
    // Without bias the load per BS does not depend on Pi.
    let cfg = NetworkConfig::reference();
    let fp = solve(
        &cfg,
        &power_law_bias(0.0, cfg.t_levels),
        FixedPointOptions::default(),
    )
    .unwrap();
    assert!(fp.iterations <= 2);
    let u = cfg.total_user_density() / cfg.lambda_b;
    assert!(fp.users.iter().all(|x| (x - u).abs() < 1e-12));
}

#[test]
fn damping_reaches_the_same_point() {
    let cfg = NetworkConfig::reference();
    let bias = power_law_bias(2.0, cfg.t_levels);
    let plain = solve(&cfg, &bias, FixedPointOptions::default()).unwrap();
    let damped = solve(
        &cfg,
        &bias,
        FixedPointOptions {
            damping: 0.5,
            eps: 1e-10,
            t_max: 400,
        },
    )
    .unwrap();
    assert!(damped.converged);
    assert!(sup(&plain.pi, &damped.pi) < 1e-7);
}

#[test]
fn iteration_cap_is_reported() {
    let cfg = NetworkConfig::reference();
    let fp = solve(
        &cfg,
        &power_law_bias(3.0, cfg.t_levels),
        FixedPointOptions {
            t_max: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(fp.iterations, 1);
    assert!(!fp.converged);
}

#[test]
fn bad_options_are_rejected() {
    let cfg = NetworkConfig::reference();
    let b = power_law_bias(1.0, cfg.t_levels);
    for opts in [
        FixedPointOptions {
            eps: 0.0,
            ..Default::default()
        },
        FixedPointOptions {
            t_max: 0,
            ..Default::default()
        },
        FixedPointOptions {
            damping: 1.5,
            ..Default::default()
        },
    ] {
        assert!(solve(&cfg, &b, opts).is_err());
    }
    assert!(solve(&cfg, &power_law_bias(1.0, 3), FixedPointOptions::default()).is_err());
}
