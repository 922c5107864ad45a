use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside log losses.
pub const PROB_EPS: f64 = 1e-7;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation value (ReLU'(0) taken as 0).
    #[inline]
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &DenseMatrix) -> Result<DenseMatrix> {
    logits.check_finite()?;
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    Ok(out)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// Mean cross-entropy over the listed rows, with its gradient w.r.t. the logits.
///
/// `rows` selects which nodes contribute (all when `None`). The gradient is
/// zero on rows that do not contribute.
pub fn cross_entropy_loss(
    logits: &DenseMatrix,
    labels: &[usize],
    rows: Option<&[usize]>,
) -> Result<(f64, DenseMatrix)> {
    logits.check_finite()?;
    if labels.len() != logits.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..logits.rows()).collect();
            &all
        }
    };
    if rows.is_empty() {
        return Err(Error::InvalidParameter("cross-entropy over zero rows".into()));
    }
    let scale = 1.0 / rows.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for &r in rows {
        let y = labels[r];
        if y >= logits.cols() {
            return Err(Error::ShapeMismatch(format!(
                "label {y} for {} classes",
                logits.cols()
            )));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
        loss += log_sum - row[y];
        let g = grad.row_mut(r);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = (row[j] - log_sum).exp() * scale;
        }
        g[y] -= scale;
    }
    Ok((loss * scale, grad))
}

fn weighted_bce(
    predictions: &[f64],
    labels: &[bool],
    pos_weight: f64,
    neg_weight: f64,
) -> Result<(f64, Vec<f64>)> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("predictions"));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(predictions.len());
    for (&p, &y) in predictions.iter().zip(labels) {
        let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        if y {
            loss += pos_weight * -p.ln();
            grad.push(-pos_weight / p);
        } else {
            loss += neg_weight * -(1.0 - p).ln();
            grad.push(neg_weight / (1.0 - p));
        }
    }
    Ok((loss, grad))
}

/// Summed binary cross-entropy and its gradient w.r.t. the predictions.
pub fn bce_loss(predictions: &[f64], labels: &[bool]) -> Result<(f64, Vec<f64>)> {
    weighted_bce(predictions, labels, 1.0, 1.0)
}

/// `-Σ [α·y·ln ŷ + (1-α)·(1-y)·ln(1-ŷ)]` and its gradient w.r.t. `ŷ`.
///
/// Predictions are clamped to `[1e-7, 1 - 1e-7]`; the gradient is taken at
/// the clamped value.
pub fn wbce_loss(predictions: &[f64], labels: &[bool], alpha: f64) -> Result<(f64, Vec<f64>)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, 1]")));
    }
    weighted_bce(predictions, labels, alpha, 1.0 - alpha)
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("cosine input"));
    }
    Ok(cosine_with_grad(u, v).0)
}

/// Cosine similarity and its gradients w.r.t. both arguments.
///
/// With a zero vector on either side the similarity and both gradients are 0.
pub(crate) fn cosine_with_grad(u: &[f64], v: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return (0.0, vec![0.0; u.len()], vec![0.0; v.len()]);
    }
    let c = (dot / (nu * nv)).clamp(-1.0, 1.0);
    let du = u
        .iter()
        .zip(v)
        .map(|(a, b)| b / (nu * nv) - c * a / (nu * nu))
        .collect();
    let dv = u
        .iter()
        .zip(v)
        .map(|(a, b)| a / (nu * nv) - c * b / (nv * nv))
        .collect();
    (c, du, dv)
}
