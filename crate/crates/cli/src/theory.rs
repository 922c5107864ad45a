use anyhow::{bail, Context as _, Result};
use graphost::csbm::CsbmParams;
use graphost::rng::derive_seed;
use graphost::theory::{
    class_separation_distance, degree_relaxation_constraint, lemma_check,
    misclassification_prob, monte_carlo_theorem_check, multiclass_separation,
    simulate_misclassification, LemmaReport, SimulatedRate, TheoremCheckReport,
};
use graphost::transform::Regime;
use serde::Serialize;
use serde_json::Value;

use crate::commands::{create_out, write_json, Context};
use crate::config::TheoryConfig;
use crate::{Suite, TheoryArgs};

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Debug, Serialize)]
struct ConstraintReport {
    holds: bool,
    closed_form_before: f64,
    closed_form_after: f64,
}

#[derive(Debug, Serialize)]
struct ClosedFormPoint {
    intra_prob: f64,
    inter_prob: f64,
    closed_form: f64,
    simulated: SimulatedRate,
    standard_errors_apart: f64,
}

#[derive(Debug, Serialize)]
struct MulticlassReport {
    /// `(s, separation)` for s = 2..=max_classes.
    separations: Vec<(usize, f64)>,
    two_class_deviation: f64,
}

#[derive(Debug, Serialize)]
struct TheoryReport {
    experiment: &'static str,
    timestamp: String,
    seed: u64,
    regime: Regime,
    checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lemma: Option<LemmaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lemma_swapped: Option<LemmaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem: Option<TheoremCheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    constraint: Option<ConstraintReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    closed_form: Vec<ClosedFormPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    multiclass: Option<MulticlassReport>,
    config: Value,
}

fn params(t: &TheoryConfig, n: usize, p: f64, q: f64) -> Result<CsbmParams> {
    let h = t.mean_distance / 2.0;
    Ok(CsbmParams::new(vec![vec![h, 0.0], vec![-h, 0.0]], vec![n, n], p, q)?)
}

/// Runs the selected suites. Parameters that contradict the regime are
/// refused before anything is computed or written.
pub fn theory_validate(ctx: &Context, args: &TheoryArgs) -> Result<()> {
    let t = &ctx.cfg.theory;
    let regime = t.regime()?;
    let (p, q) = (t.intra_prob, t.inter_prob);
    let (pn, qn) = (t.transformed_intra_prob, t.transformed_inter_prob);
    let n = t.class_size as f64;
    let holds = degree_relaxation_constraint(p, q, pn, qn, n, n, regime)
        .context("theory parameters rejected")?;
    let before = params(t, t.class_size, p, q)?;
    let after = params(t, t.class_size, pn, qn)?;
    if t.lemma_class_size < 2 || t.trials == 0 || t.samples_per_trial == 0 || t.max_classes < 2 {
        bail!("lemma_class_size, trials, samples_per_trial and max_classes must be positive (max_classes ≥ 2)");
    }
    let seed = ctx.first_seed();
    let wants = |s: Suite| args.suite.contains(&s);
    let mut checks = Vec::new();
    let mut report = TheoryReport {
        experiment: "theory-validate",
        timestamp: ctx.timestamp.clone(),
        seed,
        regime,
        checks: Vec::new(),
        lemma: None,
        lemma_swapped: None,
        theorem: None,
        constraint: None,
        closed_form: Vec::new(),
        multiclass: None,
        config: ctx.effective_config(),
    };

    if wants(Suite::Lemma) || wants(Suite::Separation) {
        let lemma_seed = derive_seed(seed, "lemma");
        let r = lemma_check(&params(t, t.lemma_class_size, p, q)?, lemma_seed)?;
        let s = lemma_check(&params(t, t.lemma_class_size, q, p)?, lemma_seed)?;
        if wants(Suite::Lemma) {
            let m = r.class_counts[0].min(r.class_counts[1]) as f64;
            let within = (0..r.true_midpoint.len()).all(|j| {
                (r.empirical_midpoint[j] - r.true_midpoint[j]).abs()
                    <= 4.0 * r.feature_stds[j] / m.sqrt()
            });
            checks.push(Check {
                name: "lemma-midpoint",
                pass: within,
                detail: format!(
                    "L2 error {:.4}; per-coordinate 4σ/√n bound {}",
                    r.midpoint_error,
                    if within { "met" } else { "violated" }
                ),
            });
            let sign = if p > q { 1.0 } else { -1.0 };
            let pass = sign * r.direction_cosine >= 0.999 && -sign * s.direction_cosine >= 0.999;
            checks.push(Check {
                name: "lemma-direction",
                pass,
                detail: format!(
                    "cosine {:.5}, {:.5} with p and q swapped",
                    r.direction_cosine, s.direction_cosine
                ),
            });
        }
        if wants(Suite::Separation) {
            let rel = (r.empirical_separation - r.predicted_separation).abs() / r.predicted_separation;
            checks.push(Check {
                name: "separation",
                pass: rel <= 0.05,
                detail: format!(
                    "empirical {:.4}, closed form {:.4}, relative error {:.2}%",
                    r.empirical_separation,
                    r.predicted_separation,
                    100.0 * rel
                ),
            });
        }
        report.lemma = Some(r);
        report.lemma_swapped = Some(s);
    }

    let before_cf = misclassification_prob(p, q, n, n, t.mean_distance)?;
    let after_cf = misclassification_prob(pn, qn, n, n, t.mean_distance)?;
    if wants(Suite::Constraint) {
        let agrees = holds == (after_cf < before_cf);
        checks.push(Check {
            name: "constraint",
            pass: agrees,
            detail: format!(
                "constraint {holds}; closed-form misclassification {before_cf:.5} -> {after_cf:.5}"
            ),
        });
        report.constraint = Some(ConstraintReport {
            holds,
            closed_form_before: before_cf,
            closed_form_after: after_cf,
        });
    }

    if wants(Suite::Theorem) {
        let r = monte_carlo_theorem_check(
            &before,
            &after,
            regime,
            t.trials,
            t.samples_per_trial,
            derive_seed(seed, "theorem"),
        )?;
        let need = (0.9 * t.trials as f64).ceil() as usize;
        let improved = r.improved_trials >= need && r.mean_difference > 0.0;
        let (pass, verdict) = if holds {
            (improved, format!("improvement required in ≥ {need} trials"))
        } else {
            (true, "constraint does not hold, improvement not required".to_string())
        };
        checks.push(Check {
            name: "theorem",
            pass,
            detail: format!(
                "improved {}/{} trials, mean decrease {:.5}; {verdict}",
                r.improved_trials, r.trials, r.mean_difference
            ),
        });
        report.theorem = Some(r);
    }

    if wants(Suite::ClosedForm) {
        let mut worst: f64 = 0.0;
        for (k, &(a, b)) in [(p, q), (pn, qn), (q, p)].iter().enumerate() {
            let closed = misclassification_prob(a, b, n, n, t.mean_distance)?;
            let sim = simulate_misclassification(
                a,
                b,
                n,
                n,
                t.mean_distance,
                t.simulation_samples,
                derive_seed(seed, "closed-form") + k as u64,
            )?;
            let z = if sim.standard_error > 0.0 {
                (sim.rate - closed).abs() / sim.standard_error
            } else if sim.rate == closed {
                0.0
            } else {
                // Every sample agreed while the closed form is not exactly 0 or 1.
                (sim.rate - closed).abs() * (t.simulation_samples as f64).sqrt()
            };
            worst = worst.max(z);
            report.closed_form.push(ClosedFormPoint {
                intra_prob: a,
                inter_prob: b,
                closed_form: closed,
                simulated: sim,
                standard_errors_apart: z,
            });
        }
        checks.push(Check {
            name: "closed-form",
            pass: worst <= 3.0,
            detail: format!("largest gap {worst:.2} standard errors over 3 points"),
        });
    }

    if wants(Suite::Multiclass) {
        let a = t.mean_distance;
        let two = multiclass_separation(p, q, 2, a)?;
        let deviation = (two - 2.0 * class_separation_distance(p, q, a)?)
            .abs()
            .max((two - (p - q).abs() / (p + q) * a).abs());
        let separations = (2..=t.max_classes)
            .map(|s| Ok((s, multiclass_separation(p, q, s, a)?)))
            .collect::<Result<Vec<_>>>()?;
        let decreasing = separations.windows(2).all(|w| w[1].1 < w[0].1);
        checks.push(Check {
            name: "multiclass",
            pass: deviation <= 1e-12 && (decreasing || p <= q),
            detail: format!(
                "two-class deviation {deviation:.1e}; strictly decreasing in s: {decreasing}"
            ),
        });
        report.multiclass = Some(MulticlassReport {
            separations,
            two_class_deviation: deviation,
        });
    }

    report.checks = checks;
    create_out(&ctx.cfg.out)?;
    let stem = format!("theory-validate-{}-s{seed}", ctx.timestamp);
    write_json(&ctx.cfg.out.join(format!("{stem}.json")), &report)?;
    if let Some(th) = &report.theorem {
        let path = ctx.cfg.out.join(format!("{stem}-theorem.csv"));
        std::fs::write(&path, th.to_csv())
            .with_context(|| format!("cannot write {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    for c in &report.checks {
        println!("{:<16} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    if !failed.is_empty() {
        bail!("theory validation failed: {}", failed.join(", "));
    }
    Ok(())
}
