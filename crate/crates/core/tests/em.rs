use bdp_core::em::{
    accelerate_qn, em_fit, em_map, estep_all, numerical_hessian, sem_information,
    standard_errors_from, EMConfig, SeMethod, SecantHistory,
};
use bdp_core::estep::conditional_expectations;
use bdp_core::models::{MStepContext, SimpleModel};
use bdp_core::oracle::{generate_protocol_dataset, ProtocolConfig};
use bdp_core::process::{observed_loglik, Observation};
use bdp_core::{BdpError, NumericConfig};
use nalgebra::DMatrix;

const TRUTH: [f64; 2] = [0.5, 0.2];

fn dataset(n: usize, seed: u64) -> Vec<Observation> {
    generate_protocol_dataset(&SimpleModel, &TRUTH, n, &ProtocolConfig::default(), seed).unwrap()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn plain() -> EMConfig {
    EMConfig::default().with_se(SeMethod::None)
}

fn assert_ascent(trace: &[f64]) {
    for w in trace.windows(2) {
        assert!(
            w[1] >= w[0] - 1e-10,
            "log-likelihood fell from {} to {}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn converged_fit_is_a_fixed_point_above_the_truth() {
    let data = dataset(50, 2);
    let cfg = plain();
    let fit = em_fit(&SimpleModel, &data, &[0.3, 0.3], &cfg).unwrap();
    assert!(fit.converged, "{:?}", fit.method_notes);
    assert_ascent(&fit.loglik_trace);

    let mapped = em_map(
        &SimpleModel,
        &data,
        &fit.theta_hat,
        &MStepContext::settled(),
        &cfg.numeric,
    )
    .unwrap();
    let drift = gap(&mapped, &fit.theta_hat);
    assert!(
        drift < 10.0 * cfg.param_tol * inf_norm(&fit.theta_hat),
        "drift {drift}"
    );

    let at_truth = observed_loglik(&SimpleModel, &TRUTH, &data, &cfg.numeric).unwrap();
    assert!(fit.loglik >= at_truth - 1e-6, "{} < {at_truth}", fit.loglik);
}

#[test]
fn single_updates_never_lower_the_likelihood() {
    let numeric = NumericConfig::default();
    let data = dataset(30, 5);
    let mut theta = vec![1.2, 0.05];
    for iteration in 0..8 {
        let next = em_map(
            &SimpleModel,
            &data,
            &theta,
            &MStepContext::at(iteration),
            &numeric,
        )
        .unwrap();
        let before = observed_loglik(&SimpleModel, &theta, &data, &numeric).unwrap();
        let after = observed_loglik(&SimpleModel, &next, &data, &numeric).unwrap();
        assert!(after >= before - 1e-10, "{after} < {before}");
        theta = next;
    }
}

#[test]
fn simple_trajectory_matches_a_straight_line_update() {
    let numeric = NumericConfig::default();
    let data = dataset(50, 2);
    let mut ours = vec![0.3, 0.3];
    let mut theirs = vec![0.3, 0.3];
    for iteration in 0..12 {
        ours = em_map(
            &SimpleModel,
            &data,
            &ours,
            &MStepContext::at(iteration),
            &numeric,
        )
        .unwrap();

        let (mut up, mut down, mut exposure) = (0.0, 0.0, 0.0);
        for obs in &data {
            let set = conditional_expectations(&SimpleModel, &theirs, obs, &numeric).unwrap();
            for (i, k) in (set.window.k_min..=set.window.k_max).enumerate() {
                up += set.eu[i];
                down += set.ed[i];
                exposure += k as f64 * set.et[i];
            }
        }
        theirs = vec![up / exposure, down / exposure];
        assert!(
            gap(&ours, &theirs) < 1e-8,
            "step {iteration}: {ours:?} vs {theirs:?}"
        );
    }
}

#[test]
fn pure_death_data_give_no_birth_rate() {
    let protocol = ProtocolConfig {
        starts: 5..=20,
        ..ProtocolConfig::default()
    };
    let data = generate_protocol_dataset(&SimpleModel, &[0.0, 0.3], 100, &protocol, 7).unwrap();
    assert!(data.iter().all(|o| o.b <= o.a));
    let cfg = EMConfig {
        accelerate: true,
        ..plain()
    };
    let fit = em_fit(&SimpleModel, &data, &[0.3, 0.3], &cfg).unwrap();
    assert!(fit.theta_hat[0] < 1e-6, "{:?}", fit.theta_hat);
    assert!((fit.theta_hat[1] - 0.3).abs() < 0.1, "{:?}", fit.theta_hat);
    assert_ascent(&fit.loglik_trace);
}

#[test]
fn acceleration_keeps_the_estimate() {
    let data = dataset(50, 2);
    let slow = em_fit(&SimpleModel, &data, &[0.3, 0.3], &plain()).unwrap();
    let cfg = EMConfig {
        accelerate: true,
        ..plain()
    };
    let fast = em_fit(&SimpleModel, &data, &[0.3, 0.3], &cfg).unwrap();
    assert!(fast.converged && slow.converged);
    assert!(
        fast.iterations < slow.iterations,
        "{} vs {}",
        fast.iterations,
        slow.iterations
    );
    assert_ascent(&fast.loglik_trace);
    let diff = gap(&fast.theta_hat, &slow.theta_hat);
    assert!(
        diff < 10.0 * cfg.param_tol * inf_norm(&slow.theta_hat),
        "{diff}"
    );
}

#[test]
fn information_adds_over_replicated_data() {
    let data = dataset(60, 3);
    let cfg = plain();
    let fit = em_fit(&SimpleModel, &data, &[0.3, 0.3], &cfg).unwrap();
    let doubled: Vec<Observation> = data.iter().chain(&data).cloned().collect();
    let once = sem_information(&SimpleModel, &data, &fit.theta_hat, &cfg).unwrap();
    let twice = sem_information(&SimpleModel, &doubled, &fit.theta_hat, &cfg).unwrap();
    for (a, b) in once.iter().zip(twice.iter()) {
        assert!(
            (b - 2.0 * a).abs() <= 1e-3 * (2.0 * a).abs(),
            "{b} vs 2 x {a}"
        );
    }
}

#[test]
fn sem_refuses_points_away_from_the_fixed_point() {
    let data = dataset(40, 4);
    let err = sem_information(&SimpleModel, &data, &[0.9, 0.9], &plain()).unwrap_err();
    assert!(matches!(err, BdpError::NotAtFixedPoint(_)), "{err}");
}

#[test]
fn one_observation_is_flagged() {
    let data = [Observation::new(5, 9, 1.0)];
    let cfg = EMConfig {
        max_iter: 200,
        ..EMConfig::default()
    };
    let fit = em_fit(&SimpleModel, &data, &[0.3, 0.3], &cfg).unwrap();
    let flagged =
        !fit.converged || fit.std_errors.is_none() || !fit.method_notes.warnings.is_empty();
    assert!(flagged, "{fit:?}");
}

#[test]
fn fit_errors_and_caps() {
    let data = dataset(20, 6);
    let cfg = plain();
    assert!(matches!(
        em_fit(&SimpleModel, &data, &[-0.1, 0.3], &cfg),
        Err(BdpError::Infeasible(_))
    ));
    assert!(matches!(
        em_fit(&SimpleModel, &[], &[0.3, 0.3], &cfg),
        Err(BdpError::InvalidArgument(_))
    ));
    for bad in [
        EMConfig {
            param_tol: 0.0,
            ..cfg
        },
        EMConfig {
            loglik_tol: -1.0,
            ..cfg
        },
        EMConfig { max_iter: 0, ..cfg },
        EMConfig {
            halving_cap: 0,
            ..cfg
        },
    ] {
        assert!(em_fit(&SimpleModel, &data, &[0.3, 0.3], &bad).is_err());
    }
    let capped = em_fit(
        &SimpleModel,
        &data,
        &[0.3, 0.3],
        &EMConfig { max_iter: 2, ..cfg },
    )
    .unwrap();
    assert!(!capped.converged);
    assert_eq!(capped.iterations, 2);
    assert_eq!(capped.loglik_trace.len(), 3);
}

#[test]
fn expectations_keep_data_order() {
    let numeric = NumericConfig::default();
    let data = dataset(12, 8);
    let all = estep_all(&SimpleModel, &TRUTH, &data, &numeric).unwrap();
    for (obs, set) in data.iter().zip(&all) {
        let single = conditional_expectations(&SimpleModel, &TRUTH, obs, &numeric).unwrap();
        assert_eq!(set.total_up, single.total_up);
        assert_eq!(set.particle_time, single.particle_time);
    }
}

#[test]
fn degenerate_secants_fall_back_to_the_plain_update() {
    let theta = [0.4, 0.2];
    let mapped = [0.45, 0.21];
    assert_eq!(
        accelerate_qn(&SecantHistory::new(2), &theta, &mapped),
        mapped
    );

    let mut history = SecantHistory::new(2);
    history.push(vec![0.0, 0.0], vec![0.0, 0.0]);
    history.push(vec![0.0, 0.0], vec![0.0, 0.0]);
    assert!(history.is_full());
    assert_eq!(accelerate_qn(&history, &theta, &mapped), mapped);

    let mut history = SecantHistory::new(2);
    history.push(vec![0.1, 0.2], vec![0.05, 0.1]);
    history.push(vec![0.1, 0.2], vec![0.05, 0.1]);
    assert_eq!(accelerate_qn(&history, &theta, &mapped), mapped);
}

#[test]
fn secant_step_solves_a_linear_map() {
    // M(θ) = c + Aθ: two secants span the plane, so the extrapolation lands on the fixed point
    let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.05, 0.8]);
    let c = [0.3, 0.1];
    let map = |x: &[f64]| {
        vec![
            c[0] + a[(0, 0)] * x[0] + a[(0, 1)] * x[1],
            c[1] + a[(1, 0)] * x[0] + a[(1, 1)] * x[1],
        ]
    };
    let mut history = SecantHistory::new(2);
    let mut x = vec![0.0, 0.0];
    for _ in 0..2 {
        let m1 = map(&x);
        let m2 = map(&m1);
        history.push(
            m1.iter().zip(&x).map(|(p, q)| p - q).collect(),
            m2.iter().zip(&m1).map(|(p, q)| p - q).collect(),
        );
        x = m1;
    }
    let proposal = accelerate_qn(&history, &x, &map(&x));
    let fixed = map(&proposal);
    assert!(gap(&fixed, &proposal) < 1e-12, "{proposal:?}");
}

#[test]
fn numerical_hessian_of_a_quadratic() {
    let exact =
        DMatrix::from_row_slice(3, 3, &[-4.0, 1.0, 0.5, 1.0, -3.0, -0.25, 0.5, -0.25, -2.0]);
    let f = |x: &[f64]| {
        let mut q = 1.5 * x[0] - x[2];
        for i in 0..3 {
            for j in 0..3 {
                q += 0.5 * x[i] * exact[(i, j)] * x[j];
            }
        }
        Ok(q)
    };
    for x in [[0.3, -1.2, 2.0], [1e-3, 0.0, 5.0]] {
        let h = numerical_hessian(f, |_| true, &x).unwrap();
        assert!((&h - &exact).amax() < 1e-6, "{h}");
        assert_eq!(h, h.transpose());
    }
    // a boundary close by shrinks the steps instead of failing
    let h = numerical_hessian(f, |x| x[0] > 0.0, &[2e-4, 1.0, 1.0]).unwrap();
    assert!((&h - &exact).amax() < 1e-4, "{h}");
    assert!(numerical_hessian(f, |x| x[1] > 1.0, &[0.0, 1.0, 0.0]).is_err());
}

#[test]
fn standard_errors_need_positive_definite_information() {
    let info = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 25.0]);
    let se = standard_errors_from(&info).unwrap();
    assert!((se[0] - 0.5).abs() < 1e-15 && (se[1] - 0.2).abs() < 1e-15);
    assert!(standard_errors_from(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_none());
}
