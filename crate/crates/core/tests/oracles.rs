mod common;

use bdp_core::estep::conditional_expectations;
use bdp_core::models::{LogisticModel, SimpleModel, SisModel};
use bdp_core::oracle::{
    generate_protocol_dataset, rejection_estep, simulate_path, substream, timedomain_estep,
    uniformization_tp, ProtocolConfig, Uniformized,
};
use bdp_core::process::Observation;
use bdp_core::NumericConfig;
use common::FnModel;
use rayon::prelude::*;

#[test]
fn paths_without_births_never_rise() {
    let model = FnModel::pure_death(0.7);
    for seed in 0..50 {
        let path = simulate_path(&model, &[], &[], 3, 4.0, &mut substream(seed, 0)).unwrap();
        assert!(path.states.windows(2).all(|w| w[1] + 1 == w[0]));
    }
}

#[test]
fn absorbing_start_never_jumps() {
    let path = simulate_path(
        &SimpleModel,
        &[0.5, 0.3],
        &[],
        0,
        10.0,
        &mut substream(1, 0),
    )
    .unwrap();
    assert_eq!(path.states, vec![0]);
    assert!(path.jump_times.is_empty());
}

#[test]
fn paths_keep_their_books() {
    let theta = [0.6, 0.2, 0.4];
    for seed in 0..200 {
        let path =
            simulate_path(&LogisticModel, &theta, &[], 8, 2.5, &mut substream(seed, 3)).unwrap();
        assert!(path.states.windows(2).all(|w| w[0].abs_diff(w[1]) == 1));
        assert!(path.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(path
            .jump_times
            .iter()
            .all(|t| *t > 0.0 && *t < path.horizon));
        let stats = path.statistics();
        let net = path.final_state() as f64 - path.initial_state() as f64;
        assert_eq!(stats.total_up() - stats.total_down(), net);
        assert!((stats.total_time() - 2.5).abs() < 1e-12);
    }
}

#[test]
fn linear_mean_growth() {
    let n = 100_000u64;
    let finals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path(
                &SimpleModel,
                &[0.5, 0.3],
                &[],
                10,
                1.0,
                &mut substream(29, i),
            )
            .unwrap();
            path.final_state() as f64
        })
        .collect();
    let mean = finals.iter().sum::<f64>() / n as f64;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let expected = 10.0 * 0.2f64.exp();
    assert!(
        (mean - expected).abs() < 3.0 * se,
        "{mean} vs {expected} (SE {se})"
    );
    assert!((expected - 12.214).abs() < 1e-3);
}

#[test]
fn uniformization_basics() {
    for (a, b) in [(3, 3), (3, 4), (0, 0)] {
        let p = uniformization_tp(&SimpleModel, &[0.5, 0.3], &[], a, b, 0.0, None).unwrap();
        assert_eq!(p, if a == b { 1.0 } else { 0.0 });
    }
    let model = FnModel::pure_death(0.4);
    for t in [0.1, 1.0, 5.0] {
        let p = uniformization_tp(&model, &[], &[], 1, 0, t, None).unwrap();
        assert!((p - (1.0 - (-0.4 * t).exp())).abs() < 1e-12, "{p}");
    }
}

#[test]
fn uniformized_rows_are_distributions() {
    let kernel = Uniformized::new(&LogisticModel, &[0.5, 0.2, 0.3], &[], 80).unwrap();
    let sis = Uniformized::new(&SisModel::new(60).unwrap(), &[0.5, 0.3], &[], 60).unwrap();
    for t in [0.2, 1.0, 3.0] {
        for a in [1, 10, 25] {
            for k in [&kernel, &sis] {
                let row = k.row(a, t).unwrap();
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                assert!(row.iter().all(|p| *p >= 0.0));
            }
        }
    }
}

#[test]
fn rejection_aggregates_keep_the_identities() {
    let obs = Observation::new(6, 9, 1.5);
    let mc = rejection_estep(&SimpleModel, &[0.5, 0.3], &obs, 5000, 41).unwrap();
    assert_eq!(mc.accepted, 5000);
    assert!(mc.attempts >= 5000);
    assert!((mc.set.total_up - mc.set.total_down - 3.0).abs() < 1e-12);
    assert!((mc.set.et.iter().sum::<f64>() - 1.5).abs() < 1e-12);
    assert!(mc.se_up > 0.0 && mc.se_down > 0.0 && mc.se_particle_time > 0.0);
}

#[test]
fn rejection_refuses_hopeless_targets() {
    let err = rejection_estep(
        &SimpleModel,
        &[0.5, 0.3],
        &Observation::new(2, 40, 0.5),
        100,
        1,
    )
    .unwrap_err();
    assert!(
        matches!(err, bdp_core::BdpError::AcceptanceTooLow { .. }),
        "{err}"
    );
}

#[test]
fn quadrature_edge_cases() {
    let model = FnModel::pure_death(0.5);
    let set = timedomain_estep(&model, &[], &Observation::new(5, 2, 1.0), 1e-10).unwrap();
    assert_eq!(set.total_up, 0.0);
    assert!((set.total_down - 3.0).abs() < 1e-8);

    let set = timedomain_estep(
        &SimpleModel,
        &[0.5, 0.3],
        &Observation::new(12, 12, 1e-4),
        1e-10,
    )
    .unwrap();
    assert!((set.et_at(12) - 1e-4).abs() < 1e-6);
}

#[test]
fn quadrature_and_laplace_agree_off_the_reference_grid() {
    let cfg = NumericConfig::default();
    let cases = [
        (Observation::new(4, 7, 0.8), [0.7, 0.4]),
        (Observation::new(15, 9, 1.7), [0.3, 0.5]),
    ];
    for (obs, theta) in cases {
        let ours = conditional_expectations(&SimpleModel, &theta, &obs, &cfg).unwrap();
        let oracle = timedomain_estep(&SimpleModel, &theta, &obs, 1e-10).unwrap();
        for (a, b) in [
            (ours.total_up, oracle.total_up),
            (ours.total_down, oracle.total_down),
            (ours.particle_time, oracle.particle_time),
        ] {
            assert!(common::rel_err(a, b) < 1e-4, "{a} vs {b}");
        }
    }
}

#[test]
fn protocol_datasets() {
    let protocol = ProtocolConfig::default();
    assert!(
        generate_protocol_dataset(&SimpleModel, &[0.5, 0.2], 0, &protocol, 1)
            .unwrap()
            .is_empty()
    );

    let first = generate_protocol_dataset(&SimpleModel, &[0.5, 0.2], 300, &protocol, 9).unwrap();
    let again = generate_protocol_dataset(&SimpleModel, &[0.5, 0.2], 300, &protocol, 9).unwrap();
    assert_eq!(first, again);
    assert!(first.iter().all(|o| o.t >= 0.1 && o.t < 3.0 && o.a <= 20));
}

#[test]
fn protocol_starts_are_uniform() {
    let n = 10_000;
    let data =
        generate_protocol_dataset(&SimpleModel, &[0.5, 0.2], n, &ProtocolConfig::default(), 33)
            .unwrap();
    let mut counts = [0usize; 21];
    for o in &data {
        counts[o.a] += 1;
    }
    let expected = n as f64 / 21.0;
    let chi2: f64 = counts
        .iter()
        .map(|c| (*c as f64 - expected).powi(2) / expected)
        .sum();
    // 0.99 quantile of chi-square with 20 degrees of freedom
    assert!(chi2 < 37.566, "chi-square {chi2} with counts {counts:?}");
}
