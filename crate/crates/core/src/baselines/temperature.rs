//! Temperature scaling fit by negative log-likelihood minimisation.

use crate::error::{CalibraError, Result};
use crate::model::{argmax, Matrix};
use crate::scalar::Scalar;

pub const MIN_TEMPERATURE: f64 = 1e-2;
pub const MAX_TEMPERATURE: f64 = 1e2;
const LOG_TOLERANCE: f64 = 1e-6;

/// Mean negative log-likelihood of `softmax(logits / temperature)`.
pub fn nll<F: Scalar>(logits: &Matrix<F>, labels: &[usize], temperature: F) -> F {
    let inv = F::one() / temperature;
    let mut total = F::zero();
    for (row, &y) in logits.iter_rows().zip(labels) {
        let max = row[argmax(row)];
        let log_norm: F = row.iter().map(|&x| ((x - max) * inv).exp()).sum::<F>().ln();
        total = total + log_norm - (row[y] - max) * inv;
    }
    total / F::count(labels.len())
}

/// Fits T by golden-section search on log T over [0.01, 100]. The result is
/// never worse than T = 1.
pub fn fit_temperature<F: Scalar>(logits: &Matrix<F>, labels: &[usize]) -> Result<F> {
    if labels.len() != logits.rows() {
        return Err(CalibraError::ShapeMismatch(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    if labels.len() < 2 {
        return Err(CalibraError::invalid(
            "temperature scaling needs at least two validation samples",
        ));
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(CalibraError::invalid(
            "temperature scaling needs validation labels from more than one class",
        ));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(CalibraError::invalid(format!("label {y} out of range")));
    }
    if logits.first_non_finite().is_some() {
        return Err(CalibraError::invalid("validation logits must be finite"));
    }

    let objective = |log_t: f64| nll(logits, labels, F::lit(log_t.exp())).as_f64();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (MIN_TEMPERATURE.ln(), MAX_TEMPERATURE.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > LOG_TOLERANCE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let t = F::lit(((a + b) / 2.0).exp());
    if nll(logits, labels, F::one()) < nll(logits, labels, t) {
        return Ok(F::one());
    }
    Ok(t)
}
