use graphost::csbm::CsbmParams;
use graphost::theory::{
    degree_relaxation_constraint, lemma_check, misclassification_prob,
    monte_carlo_theorem_check, simulate_misclassification,
};
use graphost::transform::Regime;
use graphost::Error;

fn unit_means(n: usize, p: f64, q: f64) -> CsbmParams {
    CsbmParams::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![n, n], p, q).unwrap()
}

#[test]
fn midpoint_within_four_standard_errors_per_coordinate() {
    for seed in 0..5 {
        for (p, q) in [(0.02, 0.01), (0.01, 0.02)] {
            let r = lemma_check(&unit_means(1000, p, q), seed).unwrap();
            let n = r.class_counts[0].min(r.class_counts[1]) as f64;
            for j in 0..2 {
                let err = (r.empirical_midpoint[j] - r.true_midpoint[j]).abs();
                let bound = 4.0 * r.feature_stds[j] / n.sqrt();
                assert!(err <= bound, "seed {seed}, coordinate {j}: {err} > {bound}");
            }
        }
    }
}

#[test]
fn difference_aligns_with_direction_and_flips_with_regime() {
    for seed in 0..3 {
        let hom = lemma_check(&unit_means(2000, 0.03, 0.01), seed).unwrap();
        let het = lemma_check(&unit_means(2000, 0.01, 0.03), seed).unwrap();
        assert!(hom.direction_cosine > 0.999, "{}", hom.direction_cosine);
        assert!(het.direction_cosine < -0.999, "{}", het.direction_cosine);
    }
}

#[test]
fn constraint_agrees_with_closed_form_sign() {
    let (n1, n2) = (500.0, 500.0);
    let mut checked = 0;
    for i in 1..=12 {
        for j in 1..=12 {
            let (p, q) = (0.02, 0.01);
            let (pn, qn) = (0.005 * i as f64, 0.001 * j as f64);
            if pn <= qn {
                continue;
            }
            let holds =
                degree_relaxation_constraint(p, q, pn, qn, n1, n2, Regime::Homophilic).unwrap();
            let before = misclassification_prob(p, q, n1, n2, 2.0).unwrap();
            let after = misclassification_prob(pn, qn, n1, n2, 2.0).unwrap();
            if (before - after).abs() > 1e-9 {
                assert_eq!(holds, after < before, "p'={pn} q'={qn}");
                checked += 1;
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn closed_form_matches_gaussian_simulation() {
    let points = [(0.05, 0.01, 500.0, 500.0, 2.0), (0.01, 0.04, 300.0, 300.0, 1.0)];
    for (i, &(p, q, n1, n2, a)) in points.iter().enumerate() {
        let closed = misclassification_prob(p, q, n1, n2, a).unwrap();
        let sim = simulate_misclassification(p, q, n1, n2, a, 100_000, i as u64).unwrap();
        assert!(sim.standard_error < 0.005);
        assert!((sim.rate - closed).abs() <= 3.0 * sim.standard_error, "{sim:?} vs {closed}");
    }
}

#[test]
fn null_transform_has_no_effect() {
    let a = unit_means(300, 0.03, 0.01);
    let r = monte_carlo_theorem_check(&a, &a, Regime::Homophilic, 5, 2, 1).unwrap();
    assert_eq!(r.mean_difference, 0.0);
    assert_eq!(r.improved_trials, 0);
    assert!(r.rates_before.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn improvement_whenever_constraint_holds() {
    let cases = [
        ((0.02, 0.01), (0.03, 0.005), Regime::Homophilic),
        ((0.02, 0.01), (0.02, 0.005), Regime::Homophilic),
        ((0.01, 0.02), (0.005, 0.02), Regime::Heterophilic),
        ((0.01, 0.02), (0.005, 0.03), Regime::Heterophilic),
    ];
    for ((p, q), (pn, qn), regime) in cases {
        let r = monte_carlo_theorem_check(
            &unit_means(500, p, q),
            &unit_means(500, pn, qn),
            regime,
            10,
            1,
            11,
        )
        .unwrap();
        assert!(r.constraint_satisfied);
        assert!(r.mean_difference > 0.0, "{r:?}");
        assert!(r.closed_form_after < r.closed_form_before);
    }
}

#[test]
fn inconsistent_regime_is_an_error() {
    let e = monte_carlo_theorem_check(
        &unit_means(100, 0.02, 0.01),
        &unit_means(100, 0.03, 0.005),
        Regime::Heterophilic,
        1,
        1,
        0,
    );
    assert!(matches!(e, Err(Error::RegimeMismatch(_))));
}

#[test]
fn reports_serialize() {
    let a = unit_means(100, 0.05, 0.01);
    let r = monte_carlo_theorem_check(&a, &a.with_probs(0.06, 0.005).unwrap(), Regime::Homophilic, 2, 1, 3)
        .unwrap();
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"improved_trials\""));
    assert_eq!(r.to_csv().lines().count(), 3);
}
