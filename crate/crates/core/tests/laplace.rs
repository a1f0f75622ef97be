mod common;

use bdp_core::laplace::{
    convergent_denominator, evaluate_to_depth, invert_laplace, lentz_eval, CfCoefficients,
    ContinuedFraction, DenominatorRecurrence, InversionConfig,
};
use bdp_core::models::{ImmigrationModel, SimpleModel};
use bdp_core::oracle::{integrate_vector, Uniformized};
use bdp_core::process::BdpFraction;
use common::FnModel;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn pure_birth_fraction_terminates() {
    let model = FnModel::new(|_| 0.5, |_| 0.0);
    let cf = BdpFraction::new(&model, &[], &[], c(1.0, 0.0));
    let out = lentz_eval(&cf, 1e-12, 100).unwrap();
    assert!((out.value - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
    assert!(out.depth <= 3);
}

#[test]
fn immigration_f00_matches_quadrature_of_oracle() {
    let theta = [0.5, 0.2, 0.3];
    let cf = BdpFraction::new(&ImmigrationModel, &theta, &[], c(1.0, 0.0));
    let value = lentz_eval(&cf, 1e-12, 2000).unwrap().value;
    assert!(value.im.abs() < 1e-15);

    // f_00(1) = ∫ e^{-t} P_00(t) dt; the tail past 18 is below e^{-18}.
    let kernel = Uniformized::new(&ImmigrationModel, &theta, &[], 600).unwrap();
    let (integral, _) = integrate_vector(
        |t, out| {
            out[0] = (-t).exp() * kernel.row(0, t)?[0];
            Ok(())
        },
        1,
        0.0,
        18.0,
        1e-10,
        1e-11,
    )
    .unwrap();
    assert!(
        (value.re - integral[0]).abs() < 1e-6,
        "{} vs {}",
        value.re,
        integral[0]
    );
}

#[test]
fn denominators_follow_the_recurrence() {
    let theta = [0.5, 0.3];
    let s = c(0.7, 1.3);
    let cf = BdpFraction::new(&SimpleModel, &theta, &[], s);
    let lambda = |k: f64| k * 0.5;
    let mu = |k: f64| k * 0.3;

    let b1 = convergent_denominator(&cf, 1);
    let got = b1.current * b1.log_scale.exp();
    assert!((got - (s + lambda(0.0))).norm() < 1e-14);

    let b2 = convergent_denominator(&cf, 2);
    let got = b2.current * b2.log_scale.exp();
    let want = (s + lambda(1.0) + mu(1.0)) * (s + lambda(0.0)) - lambda(0.0) * mu(1.0);
    assert!((got - want).norm() < 1e-14 * want.norm());

    // a shifted model with nonzero λ_0 exercises the a_2 term
    let shifted = FnModel::new(|k| 0.5 * (k + 1) as f64, |k| 0.3 * k as f64);
    let cf = BdpFraction::new(&shifted, &[], &[], s);
    let b2 = convergent_denominator(&cf, 2);
    let got = b2.current * b2.log_scale.exp();
    let want = (s + 1.0 + 0.3) * (s + 0.5) - 0.5 * 0.3;
    assert!((got - want).norm() < 1e-14 * want.norm());
}

#[test]
fn coefficients_match_rates() {
    let model = FnModel::new(|k| 0.4 * k as f64 + 0.1, |k| 0.25 * k as f64);
    let s = c(1.5, -2.0);
    let cf = BdpFraction::new(&model, &[], &[], s);
    assert_eq!(cf.numerator(1), c(1.0, 0.0));
    assert_eq!(cf.denominator(1), s + 0.1);
    for j in 2..30 {
        let lam = |k: usize| 0.4 * k as f64 + 0.1;
        let mu = |k: usize| 0.25 * k as f64;
        assert_eq!(cf.numerator(j), c(-lam(j - 2) * mu(j - 1), 0.0));
        assert!((cf.denominator(j) - (s + lam(j - 1) + mu(j - 1))).norm() < 1e-14);
        assert_eq!(cf.numerator(j), cf.numerator(j), "coefficients are pure");
    }
}

#[test]
fn ratio_survives_intermediate_rescale() {
    let theta = [0.5, 0.3];
    let cf = BdpFraction::new(&SimpleModel, &theta, &[], c(2.0, 3.0));
    let plain = convergent_denominator(&cf, 3);
    let mut rec = DenominatorRecurrence::new(&cf);
    rec.step();
    rec.step();
    let scaled = rec.pair().rescaled(1e-100);
    let mut resumed = DenominatorRecurrence::resume(&cf, scaled, 2);
    let after = resumed.step();
    let rel = (after.ratio() - plain.ratio()).norm() / plain.ratio().norm();
    assert!(rel < 4.0 * f64::EPSILON, "relative difference {rel}");
    assert!((after.ln_abs_current() - plain.ln_abs_current()).abs() < 1e-12);
}

#[test]
fn deep_recurrence_does_not_overflow() {
    let theta = [5.0, 3.0];
    let cf = BdpFraction::new(&SimpleModel, &theta, &[], c(1.0, 0.5));
    let pair = convergent_denominator(&cf, 5000);
    assert!(pair.current.is_finite() && pair.previous.is_finite());
    assert!(pair.ln_abs_current().is_finite() && pair.ln_abs_current() > 700.0);
}

#[test]
fn inversion_examples() {
    let cfg = InversionConfig::default();
    for t in [0.1, 1.0, 3.7, 10.0] {
        let v = invert_laplace(|s| Ok(s.inv()), t, &cfg).unwrap().value;
        assert!((v - 1.0).abs() < 1e-8, "1/s at {t}: {v}");
    }
    let v = invert_laplace(|s| Ok((s + 1.0).inv()), 1.0, &cfg)
        .unwrap()
        .value;
    assert!((v - 0.3678794412).abs() < 1e-8);
    let v = invert_laplace(|s| Ok((s * s).inv()), 2.5, &cfg)
        .unwrap()
        .value;
    assert!((v - 2.5).abs() < 1e-7);
}

/// Transform/original pairs with parameters `a`, `b`.
fn analytic_pairs(
    a: f64,
    b: f64,
) -> Vec<(
    &'static str,
    Box<dyn Fn(Complex64) -> Complex64>,
    Box<dyn Fn(f64) -> f64>,
)> {
    vec![
        ("1/s", Box::new(|s: Complex64| s.inv()), Box::new(|_| 1.0)),
        (
            "1/s^2",
            Box::new(|s: Complex64| (s * s).inv()),
            Box::new(|t| t),
        ),
        (
            "1/(s+a)",
            Box::new(move |s: Complex64| (s + a).inv()),
            Box::new(move |t| (-a * t).exp()),
        ),
        (
            "1/((s+a)(s+b))",
            Box::new(move |s: Complex64| ((s + a) * (s + b)).inv()),
            Box::new(move |t| ((-a * t).exp() - (-b * t).exp()) / (b - a)),
        ),
        (
            "1/(s^2+1)",
            Box::new(|s: Complex64| (s * s + 1.0).inv()),
            Box::new(f64::sin),
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn analytic_pairs_within_target(t in 0.1f64..=5.0, a in 0.05f64..3.0, gap in 0.05f64..2.0) {
        let cfg = InversionConfig::default();
        for (name, f, original) in analytic_pairs(a, a + gap) {
            let v = invert_laplace(|s| Ok(f(s)), t, &cfg).unwrap().value;
            prop_assert!((v - original(t)).abs() < cfg.target_abs_error, "{} at t={}: {} vs {}", name, t, v, original(t));
        }
    }

    #[test]
    fn inversion_is_linear(t in 0.1f64..=5.0, alpha in -3.0f64..3.0, beta in -3.0f64..3.0, a in 0.05f64..3.0) {
        let cfg = InversionConfig::default();
        let pairs = analytic_pairs(a, a + 0.5);
        for (i, (_, f, _)) in pairs.iter().enumerate() {
            let (_, g, _) = &pairs[(i + 2) % pairs.len()];
            let combined = invert_laplace(|s| Ok(f(s) * alpha + g(s) * beta), t, &cfg).unwrap().value;
            let separate = alpha * invert_laplace(|s| Ok(f(s)), t, &cfg).unwrap().value
                + beta * invert_laplace(|s| Ok(g(s)), t, &cfg).unwrap().value;
            prop_assert!((combined - separate).abs() < 1e-10);
        }
    }

    #[test]
    fn equivalence_transform_leaves_value_unchanged(
        scales in prop::collection::vec(0.25f64..4.0, 64),
        re in 0.2f64..5.0,
        im in -20.0f64..20.0,
    ) {
        let theta = [0.5, 0.3];
        let s = c(re, im);
        let base = BdpFraction::new(&SimpleModel, &theta, &[], s);
        // a_j -> c_{j-1} c_j a_j and b_j -> c_j b_j with c_0 = 1 preserves every convergent.
        let scale = |j: usize| if j == 0 { 1.0 } else { scales[(j - 1) % scales.len()] };
        let scaled = CfCoefficients::new(
            |j| base.numerator(j) * scale(j - 1) * scale(j),
            |j| base.denominator(j) * scale(j),
        );
        let plain = lentz_eval(&base, 1e-12, 4000).unwrap();
        let other = lentz_eval(&scaled, 1e-12, 4000).unwrap();
        prop_assert!((plain.value - other.value).norm() <= 1e-13 * plain.value.norm());
    }
}

#[test]
fn deeper_truncation_never_moves_away() {
    let cases: Vec<(Box<dyn bdp_core::process::RateModel>, Vec<f64>)> = vec![
        (Box::new(SimpleModel), vec![0.5, 0.3]),
        (Box::new(ImmigrationModel), vec![0.5, 0.2, 0.3]),
        (
            Box::new(FnModel::new(
                |k| 0.5 * (k * k) as f64 * (-0.2 * k as f64).exp(),
                |k| 0.3 * k as f64,
            )),
            vec![],
        ),
    ];
    let cfg = InversionConfig::default();
    for (model, theta) in &cases {
        for t in [0.5, 2.0] {
            let s = c(cfg.abscissa(t), 0.0);
            let cf = BdpFraction::new(model.as_ref(), theta, &[], s);
            let oracle = lentz_eval(&cf, 1e-15, 100_000).unwrap().value;
            let mut last = f64::INFINITY;
            for depth in 1..200 {
                let err = (evaluate_to_depth(&cf, depth) - oracle).norm();
                assert!(
                    err <= last + 1e-15,
                    "{} depth {depth}: {err:e} after {last:e}",
                    model.name()
                );
                last = err;
            }
            assert!(last < 1e-14);
        }
    }
}
