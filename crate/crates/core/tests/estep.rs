mod common;

use bdp_core::estep::{
    choose_window, conditional_expectations, weighted_sum_expectation, ExpectationKind,
};
use bdp_core::models::{
    motif_covariates, GlmModel, ImmigrationModel, LogisticModel, MicrosatConfig, MicrosatModel,
    SimpleModel, SisModel,
};
use bdp_core::oracle::{rejection_estep, timedomain_estep};
use bdp_core::process::{Observation, RateModel};
use bdp_core::{BdpError, NumericConfig};
use common::{reference_cases, rel_err, FnModel};
use proptest::prelude::*;

#[test]
fn pure_death_expectations() {
    let cfg = NumericConfig::default();
    let model = FnModel::pure_death(0.4);
    for t in [0.3, 1.0, 4.0] {
        let obs = Observation::new(3, 1, t);
        let set = conditional_expectations(&model, &[], &obs, &cfg).unwrap();
        assert_eq!((set.window.k_min, set.window.k_max), (1, 3));
        assert!(set.eu.iter().all(|u| *u == 0.0));
        assert_eq!(set.total_up, 0.0);
        assert!((set.total_down - 2.0).abs() < 1e-9, "{}", set.total_down);
        let window = choose_window(&model, &[], &obs, &cfg).unwrap();
        assert_eq!((window.k_min, window.k_max), (1, 3));
    }
}

#[test]
fn sis_window_respects_the_cap() {
    let cfg = NumericConfig::default();
    let model = SisModel::new(40).unwrap();
    let obs = Observation::new(10, 31, 2.0);
    let window = choose_window(&model, &[0.5, 0.3], &obs, &cfg).unwrap();
    assert!(window.k_max <= 40 && window.k_min <= 10 && window.k_max >= 31);
    let set = conditional_expectations(&model, &[0.5, 0.3], &obs, &cfg).unwrap();
    assert!(set.window.k_max <= 40);
    assert!((set.total_up - set.total_down - 21.0).abs() < 1e-6);
}

#[test]
fn equal_endpoints_balance_up_and_down() {
    let cfg = NumericConfig::default();
    for case in reference_cases() {
        let obs = Observation::new(case.obs.a, case.obs.a, 1.5);
        let set = conditional_expectations(case.model.as_ref(), &case.theta, &obs, &cfg).unwrap();
        assert!(
            (set.total_up - set.total_down).abs() < 1e-6,
            "{}",
            case.label
        );
        assert!((set.et.iter().sum::<f64>() - 1.5).abs() < 1e-6);
    }
}

#[test]
fn impossible_endpoint_is_a_zero_denominator() {
    let cfg = NumericConfig::default();
    let err = conditional_expectations(
        &SimpleModel,
        &[0.5, 0.3],
        &Observation::new(0, 3, 1.0),
        &cfg,
    )
    .unwrap_err();
    assert!(matches!(err, BdpError::ZeroDenominator { .. }));
}

#[test]
fn short_interval_stays_put() {
    let cfg = NumericConfig::default();
    let obs = Observation::new(12, 12, 1e-4);
    let set = conditional_expectations(&SimpleModel, &[0.5, 0.3], &obs, &cfg).unwrap();
    assert!((set.et_at(12) - 1e-4).abs() < 1e-6);
}

#[test]
fn windows_cover_oracle_mass() {
    let cfg = NumericConfig::default();
    for case in reference_cases() {
        let m = case.model.as_ref();
        let set = conditional_expectations(m, &case.theta, &case.obs, &cfg).unwrap();
        let oracle = timedomain_estep(m, &case.theta, &case.obs, 1e-10).unwrap();
        for k in oracle.states() {
            let size = oracle.eu_at(k).max(oracle.ed_at(k)).max(oracle.et_at(k));
            if size > cfg.window_threshold {
                assert!(
                    set.states().contains(&k),
                    "{}: state {k} carries {size:e} outside {:?}",
                    case.label,
                    set.states()
                );
            }
        }
        assert!(set.window.k_min >= m.state_floor(&[]));
    }
}

#[test]
fn doubling_the_margin_changes_nothing() {
    let base = NumericConfig::default();
    let wide = NumericConfig {
        window_margin: 2 * base.window_margin,
        ..base
    };
    for case in reference_cases() {
        let m = case.model.as_ref();
        let x = conditional_expectations(m, &case.theta, &case.obs, &base).unwrap();
        let y = conditional_expectations(m, &case.theta, &case.obs, &wide).unwrap();
        for (a, b) in [
            (x.total_up, y.total_up),
            (x.total_down, y.total_down),
            (x.particle_time, y.particle_time),
        ] {
            assert!((a - b).abs() < 1e-7, "{}: {a} vs {b}", case.label);
        }
    }
}

#[test]
fn matches_quadrature_on_reference_cases() {
    let cfg = NumericConfig::default();
    for case in reference_cases() {
        let m = case.model.as_ref();
        let ours = conditional_expectations(m, &case.theta, &case.obs, &cfg).unwrap();
        let oracle = timedomain_estep(m, &case.theta, &case.obs, 1e-10).unwrap();
        assert!(rel_err(ours.denom, oracle.denom) < 1e-6);
        for (a, b) in [
            (ours.total_up, oracle.total_up),
            (ours.total_down, oracle.total_down),
            (ours.particle_time, oracle.particle_time),
        ] {
            assert!(rel_err(a, b) < 1e-4, "{}: {a} vs {b}", case.label);
        }
    }
}

#[test]
fn simple_reference_matches_a_million_rejection_paths() {
    let cfg = NumericConfig::default();
    let obs = Observation::new(19, 27, 2.0);
    let theta = [0.5, 0.3];
    let ours = conditional_expectations(&SimpleModel, &theta, &obs, &cfg).unwrap();
    let mc = rejection_estep(&SimpleModel, &theta, &obs, 1_000_000, 31).unwrap();
    for (name, x, y, se) in [
        ("U", ours.total_up, mc.set.total_up, mc.se_up),
        ("D", ours.total_down, mc.set.total_down, mc.se_down),
        (
            "particle time",
            ours.particle_time,
            mc.set.particle_time,
            mc.se_particle_time,
        ),
    ] {
        assert!((x - y).abs() < 3.0 * se, "{name}: {x} vs {y} (SE {se})");
    }
}

#[test]
fn weighted_sums_match_per_state_sums() {
    let cfg = NumericConfig::default();
    for case in reference_cases() {
        let m = case.model.as_ref();
        let set = conditional_expectations(m, &case.theta, &case.obs, &cfg).unwrap();
        let up =
            weighted_sum_expectation(m, &case.theta, &case.obs, ExpectationKind::U, |_| 1.0, &cfg)
                .unwrap();
        assert!(
            (up - set.total_up).abs() < 1e-8,
            "{}: {up} vs {}",
            case.label,
            set.total_up
        );
        let down =
            weighted_sum_expectation(m, &case.theta, &case.obs, ExpectationKind::D, |_| 1.0, &cfg)
                .unwrap();
        assert!((down - set.total_down).abs() < 1e-8);
        let particle = weighted_sum_expectation(
            m,
            &case.theta,
            &case.obs,
            ExpectationKind::T,
            |k| k as f64,
            &cfg,
        )
        .unwrap();
        assert!((particle - set.particle_time).abs() < 1e-8 * set.particle_time.max(1.0));
    }
}

#[test]
fn weighted_ratio_is_the_simple_update() {
    let cfg = NumericConfig::default();
    let obs = Observation::new(19, 27, 2.0);
    let theta = [0.5, 0.3];
    let set = conditional_expectations(&SimpleModel, &theta, &obs, &cfg).unwrap();
    let particle = weighted_sum_expectation(
        &SimpleModel,
        &theta,
        &obs,
        ExpectationKind::T,
        |k| k as f64,
        &cfg,
    )
    .unwrap();
    let update =
        SimpleModel::update(&bdp_core::models::Totals::of(std::slice::from_ref(&set))).unwrap();
    assert!((set.total_up / particle - update[0]).abs() < 1e-10);
}

#[test]
fn logistic_weighted_holding_time_matches_quadrature() {
    let cfg = NumericConfig::default();
    let theta = [0.5, 0.2, 0.3];
    let obs = Observation::new(10, 16, 2.0);
    let weight = |k: usize| (k * k) as f64 * (-0.2 * k as f64).exp();
    let ours = weighted_sum_expectation(
        &LogisticModel,
        &theta,
        &obs,
        ExpectationKind::T,
        weight,
        &cfg,
    )
    .unwrap();
    let oracle = timedomain_estep(&LogisticModel, &theta, &obs, 1e-10)
        .unwrap()
        .weighted(ExpectationKind::T, weight);
    assert!(rel_err(ours, oracle) < 1e-4, "{ours} vs {oracle}");
}

#[test]
fn covariate_models_satisfy_identities() {
    let cfg = NumericConfig::default();
    let glm = GlmModel::new(2).unwrap();
    let obs = Observation::with_covariates(6, 9, 1.2, vec![1.1, 1.9]);
    let set = conditional_expectations(&glm, &[0.25, 0.1, 0.2, 0.05], &obs, &cfg).unwrap();
    assert!((set.total_up - set.total_down - 3.0).abs() < 1e-6);
    assert!((set.et.iter().sum::<f64>() - 1.2).abs() < 1e-6);

    let micro = MicrosatModel::new(MicrosatConfig::default()).unwrap();
    let theta = [-0.0889, -1.3105, 0.2854, -1.5405, 0.2207, -0.3822, 0.0477];
    let z = motif_covariates("CA").unwrap();
    let obs = MicrosatModel::pair_observation(7, 5, 0.5, z);
    let set = conditional_expectations(&micro, &theta, &obs, &cfg).unwrap();
    assert!(set.window.k_min >= 5);
    assert!((set.total_up - set.total_down + 2.0).abs() < 1e-6);
    assert!((set.et.iter().sum::<f64>() - 1.0).abs() < 1e-6);
}

fn random_case() -> impl Strategy<Value = (usize, Vec<f64>, Observation)> {
    (
        0usize..4,
        0.05f64..1.0,
        0.05f64..1.0,
        0.05f64..0.6,
        1usize..30,
        0usize..35,
        0.05f64..3.0,
    )
        .prop_filter_map("reachable endpoint", |(which, p, q, r, a, b, t)| {
            let (theta, b) = match which {
                0 => (vec![p, q], b.max(1)),
                1 => (vec![p, r, q], b),
                2 => (vec![p, r, q], b.max(1)),
                _ => (vec![p, 5.0 * q], b.clamp(1, 50)),
            };
            Some((which, theta, Observation::new(a, b, t)))
        })
}

fn model_for(which: usize) -> Box<dyn RateModel> {
    match which {
        0 => Box::new(SimpleModel),
        1 => Box::new(ImmigrationModel),
        2 => Box::new(LogisticModel),
        _ => Box::new(SisModel::new(50).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pathwise_identities((which, theta, obs) in random_case()) {
        let cfg = NumericConfig::default();
        let model = model_for(which);
        match conditional_expectations(model.as_ref(), &theta, &obs, &cfg) {
            Ok(set) => {
                let net = obs.b as f64 - obs.a as f64;
                let (up_down, time) = (set.total_up - set.total_down - net, set.et.iter().sum::<f64>() - obs.t);
                // inverted numerators carry an absolute error up to about 1e-12, so the 1e-6 identities
                // need P_ab(t) >= 1e-6; below that the error may grow like 1e-12 / P_ab(t)
                let tol = if set.denom >= 1e-6 { 1e-6 } else { 1e-6 + 1e-11 / set.denom };
                prop_assert!(up_down.abs() < tol, "U-D off by {:e} with P {:e}", up_down, set.denom);
                prop_assert!(time.abs() < tol, "sum T off by {:e} with P {:e}", time, set.denom);
                prop_assert!(set.eu.iter().chain(&set.ed).chain(&set.et).all(|v| *v >= 0.0));
                prop_assert!(set.window.k_min <= obs.a.min(obs.b) && set.window.k_max >= obs.a.max(obs.b));
            }
            // endpoints too unlikely to represent in double precision
            Err(BdpError::ZeroDenominator { .. }) | Err(BdpError::DomainError { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}
