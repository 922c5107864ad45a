//! Closed forms for mean aggregation on a two-class CSBM and Monte Carlo
//! checks of them.
//!
//! With strict-neighbour mean aggregation (no self-loop), a class-1 node's
//! embedding is approximately `N((p·μ₁ + q·μ₂)/(p+q), I/(p·n₁ + q·n₂))`.
//! Both class means share the midpoint `m = (μ₁+μ₂)/2` and lie along
//! `o = (μ₁-μ₂)/‖μ₁-μ₂‖`, so the optimal boundary is the hyperplane through
//! `m` orthogonal to `o`. The model layers add a self-loop; this module
//! deliberately does not.

mod monte_carlo;
mod normal;

pub use monte_carlo::{
    lemma_check, monte_carlo_theorem_check, simulate_misclassification, LemmaReport,
    SimulatedRate, TheoremCheckReport,
};
pub use normal::normal_cdf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::Regime;

fn check_prob(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

fn check_pair(p: f64, q: f64) -> Result<()> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    if p + q <= 0.0 {
        return Err(Error::InvalidParameter("p + q must be positive".into()));
    }
    Ok(())
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Expected aggregated embedding of class `class` (0 or 1).
pub fn expected_embedding(
    class: usize,
    p: f64,
    q: f64,
    mu1: &[f64],
    mu2: &[f64],
) -> Result<Vec<f64>> {
    check_pair(p, q)?;
    check_dims(mu1, mu2)?;
    let (own, other) = match class {
        0 => (mu1, mu2),
        1 => (mu2, mu1),
        _ => return Err(Error::InvalidParameter(format!("class {class} of 2"))),
    };
    Ok(own
        .iter()
        .zip(other)
        .map(|(a, b)| (p * a + q * b) / (p + q))
        .collect())
}

pub fn midpoint(mu1: &[f64], mu2: &[f64]) -> Result<Vec<f64>> {
    check_dims(mu1, mu2)?;
    Ok(mu1.iter().zip(mu2).map(|(a, b)| (a + b) / 2.0).collect())
}

/// `(μ₁ - μ₂) / ‖μ₁ - μ₂‖`.
pub fn direction(mu1: &[f64], mu2: &[f64]) -> Result<Vec<f64>> {
    check_dims(mu1, mu2)?;
    let diff: Vec<f64> = mu1.iter().zip(mu2).map(|(a, b)| a - b).collect();
    let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("direction of identical means".into()));
    }
    Ok(diff.into_iter().map(|d| d / norm).collect())
}

/// Hyperplane `{h : oᵀh = oᵀm}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub direction: Vec<f64>,
    pub midpoint: Vec<f64>,
}

impl BoundarySpec {
    pub fn new(direction: Vec<f64>, midpoint: Vec<f64>) -> Result<Self> {
        check_dims(&direction, &midpoint)?;
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "boundary direction has norm {norm}"
            )));
        }
        Ok(Self {
            direction,
            midpoint,
        })
    }

    pub fn from_means(mu1: &[f64], mu2: &[f64]) -> Result<Self> {
        Self::new(direction(mu1, mu2)?, midpoint(mu1, mu2)?)
    }
}

/// `oᵀh - oᵀm`; positive on the `μ₁` side.
pub fn boundary_signed_value(h: &[f64], boundary: &BoundarySpec) -> Result<f64> {
    check_dims(h, &boundary.direction)?;
    Ok(boundary
        .direction
        .iter()
        .zip(h.iter().zip(&boundary.midpoint))
        .map(|(o, (x, m))| o * (x - m))
        .sum())
}

/// Distance from an expected class embedding to the boundary,
/// `½·|p-q|/(p+q)·a` for mean distance `a`.
pub fn class_separation_distance(p: f64, q: f64, mean_distance: f64) -> Result<f64> {
    check_pair(p, q)?;
    if mean_distance < 0.0 {
        return Err(Error::InvalidParameter("mean distance must be non-negative".into()));
    }
    Ok(0.5 * (p - q).abs() / (p + q) * mean_distance)
}

/// `Φ(-a·|p-q|·√(p·n₁ + q·n₂) / (2(p+q)))`.
pub fn misclassification_prob(p: f64, q: f64, n1: f64, n2: f64, mean_distance: f64) -> Result<f64> {
    let d = class_separation_distance(p, q, mean_distance)?;
    let degree = p * n1 + q * n2;
    if degree <= 0.0 {
        return Err(Error::InvalidParameter("expected degree p·n1 + q·n2 is 0".into()));
    }
    Ok(normal_cdf(-d * degree.sqrt()))
}

/// Whether moving from `(p, q)` to `(p', q')` strictly lowers the
/// misclassification probability of the fixed boundary.
///
/// Homophilic: `(p'-q')(p+q)√(p'n₁+q'n₂) > (p-q)(p'+q')√(pn₁+qn₂)`;
/// heterophilic uses `q-p` and `q'-p'` instead.
#[allow(clippy::too_many_arguments)]
pub fn degree_relaxation_constraint(
    p: f64,
    q: f64,
    p_new: f64,
    q_new: f64,
    n1: f64,
    n2: f64,
    regime: Regime,
) -> Result<bool> {
    for (name, x) in [("p", p), ("q", q), ("p'", p_new), ("q'", q_new)] {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::InvalidParameter(format!("{name} = {x} outside (0, 1]")));
        }
    }
    let (gap, gap_new) = match regime {
        Regime::Homophilic => (p - q, p_new - q_new),
        Regime::Heterophilic => (q - p, q_new - p_new),
    };
    if gap <= 0.0 || gap_new <= 0.0 {
        return Err(Error::RegimeMismatch(format!(
            "{regime:?} regime needs {} for both parameter sets (got p={p}, q={q}, p'={p_new}, q'={q_new})",
            match regime {
                Regime::Homophilic => "p > q",
                Regime::Heterophilic => "p < q",
            }
        )));
    }
    let lhs = gap_new * (p + q) * (p_new * n1 + q_new * n2).sqrt();
    let rhs = gap * (p_new + q_new) * (p * n1 + q * n2).sqrt();
    Ok(lhs > rhs)
}

/// One-dimensional boundary with unequal class sizes,
/// `(μ₁+μ₂)/2 + ln(n₂/n₁)/(2σ²)`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn imbalanced_boundary(mu1: f64, mu2: f64, sigma: f64, n1: f64, n2: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    if !(n1 >= 1.0 && n2 >= 1.0) {
        return Err(Error::InvalidParameter("class sizes must be at least 1".into()));
    }
    Ok((mu1 + mu2) / 2.0 + (n2 / n1).ln() / (2.0 * sigma * sigma))
}

/// Distance between two expected class embeddings among `s` equal-sized,
/// equidistant classes: `|p-q|/(p+(s-1)q)·‖μ_v-μ_g‖`.
pub fn multiclass_separation(p: f64, q: f64, s: usize, mean_distance: f64) -> Result<f64> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    if s < 2 {
        return Err(Error::InvalidParameter(format!("{s} classes; need at least 2")));
    }
    let denom = p + (s as f64 - 1.0) * q;
    if denom <= 0.0 {
        return Err(Error::InvalidParameter("p + (s-1)q must be positive".into()));
    }
    Ok((p - q).abs() / denom * mean_distance)
}
