//! Contrast-aware calibration.
//!
//! For every sample the fine-tuned similarity row is compared with the
//! reference (zero-shot) row. Their mean absolute difference `z` is turned
//! into a weight `γ = α·exp(−k·z)`, shaped by a piecewise rule
//!
//! ```text
//! γ̂ = γ²  if γ < λ₁
//! γ̂ = γ   if λ₁ ≤ γ ≤ λ₂
//! γ̂ = γ²  if γ > λ₂
//! ```
//!
//! and the calibrated logits are `γ̂ · (1/τ) · S_finetuned`. Since `γ̂ > 0`
//! the per-row argmax, and therefore accuracy, is unchanged. Labels are never
//! read.
//!
//! `z` is measured on raw cosine similarities; `1/τ` is the multiplicative
//! logit scale of the model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CalibraError, Result};
use crate::model::{LabeledDataset, Matrix, SimilarityMatrix, DEFAULT_INV_TEMPERATURE};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacParams<F = f64> {
    /// Amplification of the confidence bias before the exponential.
    pub k: F,
    /// Maximum weight, reached when the two models agree.
    pub alpha: F,
    pub lambda1: F,
    pub lambda2: F,
    /// Logit scale 1/τ.
    pub inv_temperature: F,
}

impl<F: Scalar> Default for CacParams<F> {
    fn default() -> Self {
        Self {
            k: F::lit(15.0),
            alpha: F::lit(1.10),
            lambda1: F::lit(0.9),
            lambda2: F::lit(1.0),
            inv_temperature: F::lit(DEFAULT_INV_TEMPERATURE),
        }
    }
}

impl<F: Scalar> CacParams<F> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: F| v.is_finite() && v > F::zero();
        if !positive(self.k) {
            return Err(CalibraError::invalid(format!(
                "k must be positive, got {}",
                self.k
            )));
        }
        if !positive(self.alpha) {
            return Err(CalibraError::invalid(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !positive(self.inv_temperature) {
            return Err(CalibraError::invalid(format!(
                "inverse temperature must be positive, got {}",
                self.inv_temperature
            )));
        }
        if !(self.lambda1.is_finite() && self.lambda2.is_finite() && self.lambda1 <= self.lambda2) {
            return Err(CalibraError::invalid(format!(
                "thresholds must satisfy lambda1 <= lambda2, got {} and {}",
                self.lambda1, self.lambda2
            )));
        }
        Ok(())
    }
}

/// Per-sample intermediate values of one calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacTrace<F = f64> {
    pub z: Vec<F>,
    pub gamma: Vec<F>,
    pub gamma_hat: Vec<F>,
}

/// Mean absolute difference between a reference and a fine-tuned row.
pub fn confidence_bias<F: Scalar>(reference: &[F], finetuned: &[F]) -> Result<F> {
    if reference.len() != finetuned.len() {
        return Err(CalibraError::ShapeMismatch(format!(
            "reference row has {} classes, finetuned row has {}",
            reference.len(),
            finetuned.len()
        )));
    }
    if reference.is_empty() {
        return Err(CalibraError::Empty("confidence bias of empty rows"));
    }
    let total: F = reference
        .iter()
        .zip(finetuned)
        .map(|(&a, &b)| (a - b).abs())
        .sum();
    Ok(total / F::count(reference.len()))
}

/// Contrast-aware weight `α·exp(−k·z)`.
#[inline]
pub fn caw<F: Scalar>(z: F, params: &CacParams<F>) -> F {
    params.alpha * (-(params.k * z)).exp()
}

/// Squares weights outside `[λ₁, λ₂]`; identity inside (both ends closed).
#[inline]
pub fn piecewise<F: Scalar>(gamma: F, params: &CacParams<F>) -> F {
    if gamma < params.lambda1 || gamma > params.lambda2 {
        gamma * gamma
    } else {
        gamma
    }
}

/// Final per-sample weight from a pair of similarity rows.
fn sample_weight<F: Scalar>(
    reference: &[F],
    finetuned: &[F],
    params: &CacParams<F>,
) -> Result<(F, F, F)> {
    let z = confidence_bias(reference, finetuned)?;
    let gamma = caw(z, params);
    // keep the weight strictly positive even if exp underflows
    let gamma_hat = piecewise(gamma, params).max(F::min_positive_value());
    Ok((z, gamma, gamma_hat))
}

/// Calibrated logits `γ̂_i · (1/τ) · finetuned_i` for every sample.
pub fn calibrate<F: Scalar>(
    reference: &SimilarityMatrix<F>,
    finetuned: &SimilarityMatrix<F>,
    params: &CacParams<F>,
) -> Result<(Matrix<F>, CacTrace<F>)> {
    params.validate()?;
    if reference.n_samples() != finetuned.n_samples()
        || reference.n_classes() != finetuned.n_classes()
    {
        return Err(CalibraError::ShapeMismatch(format!(
            "reference {}x{} vs finetuned {}x{}",
            reference.n_samples(),
            reference.n_classes(),
            finetuned.n_samples(),
            finetuned.n_classes()
        )));
    }
    let weights: Vec<(F, F, F)> = (0..reference.n_samples())
        .into_par_iter()
        .map(|i| sample_weight(reference.row(i), finetuned.row(i), params))
        .collect::<Result<_>>()?;
    let mut trace = CacTrace {
        z: Vec::with_capacity(weights.len()),
        gamma: Vec::with_capacity(weights.len()),
        gamma_hat: Vec::with_capacity(weights.len()),
    };
    let mut factors = Vec::with_capacity(weights.len());
    for (z, gamma, gamma_hat) in weights {
        trace.z.push(z);
        trace.gamma.push(gamma);
        trace.gamma_hat.push(gamma_hat);
        factors.push(gamma_hat * params.inv_temperature);
    }
    let logits = finetuned.scale_rows(&factors)?;
    Ok((logits, trace))
}

/// [`calibrate`] on a dataset's reference and fine-tuned matrices.
pub fn calibrate_dataset<F: Scalar>(
    dataset: &LabeledDataset<F>,
    params: &CacParams<F>,
) -> Result<(Matrix<F>, CacTrace<F>)> {
    calibrate(dataset.reference(), dataset.finetuned(), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::predict;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        let p = CacParams::<f64>::default();
        assert_eq!((p.k, p.alpha, p.lambda1, p.lambda2), (15.0, 1.10, 0.9, 1.0));
        assert_eq!(p.inv_temperature, 100.0);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_bad_params() {
        let base = CacParams::<f64>::default();
        for bad in [
            CacParams { k: 0.0, ..base },
            CacParams {
                alpha: -1.0,
                ..base
            },
            CacParams {
                lambda1: 1.1,
                lambda2: 1.0,
                ..base
            },
            CacParams {
                inv_temperature: 0.0,
                ..base
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn bias_examples() {
        assert_eq!(confidence_bias(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 0.0);
        let z = confidence_bias(&[0.2f64, 0.5, 0.3], &[0.1, 0.8, 0.1]).unwrap();
        assert!((z - 0.2).abs() < 1e-15);
        assert!(confidence_bias(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn caw_at_zero_is_alpha() {
        let p = CacParams::<f64>::default();
        assert_eq!(caw(0.0, &p), 1.10);
    }

    #[test]
    fn piecewise_branches() {
        let p = CacParams::<f64>::default();
        assert_eq!(piecewise(0.95, &p), 0.95);
        assert_eq!(piecewise(0.5, &p), 0.25);
        assert!((piecewise(1.05, &p) - 1.1025).abs() < 1e-15);
        // jump at λ₁, continuous at λ₂ = 1
        assert!((piecewise(0.9 - 1e-12, &p) - 0.81).abs() < 1e-9);
        assert_eq!(piecewise(0.9, &p), 0.9);
        assert_eq!(piecewise(1.0, &p), 1.0);
        assert!((piecewise(1.0 + 1e-12, &p) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identity_case_scales_by_inv_temperature_only() {
        let s = SimilarityMatrix::from_rows(&[[0.3, 0.1, -0.2], [0.05, 0.2, 0.25]]).unwrap();
        let params = CacParams {
            alpha: 1.0,
            ..CacParams::default()
        };
        let (logits, trace) = calibrate(&s, &s, &params).unwrap();
        assert_eq!(trace.z, vec![0.0, 0.0]);
        assert_eq!(trace.gamma_hat, vec![1.0, 1.0]);
        assert_eq!(logits, s.logits(100.0));
    }

    #[test]
    fn rejects_misaligned_matrices() {
        let a = SimilarityMatrix::from_rows(&[[0.3, 0.1]]).unwrap();
        let b = SimilarityMatrix::from_rows(&[[0.3, 0.1, 0.0]]).unwrap();
        assert!(calibrate(&a, &b, &CacParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn calibration_preserves_argmax(
            rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 1..20),
            noise in prop::collection::vec(-0.2f64..0.2, 5),
            k in 1.0f64..30.0,
            alpha in 0.5f64..1.5,
        ) {
            let ft = SimilarityMatrix::from_rows(&rows).unwrap();
            let reference: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().zip(&noise).map(|(a, b)| (a + b).clamp(-1.0, 1.0)).collect())
                .collect();
            let reference = SimilarityMatrix::from_rows(&reference).unwrap();
            let params = CacParams { k, alpha, ..CacParams::default() };
            let (logits, trace) = calibrate(&reference, &ft, &params).unwrap();
            let before = predict(ft.matrix(), 100.0).unwrap().labels;
            let after = predict(&logits, 1.0).unwrap().labels;
            prop_assert_eq!(before, after);
            prop_assert!(trace.gamma_hat.iter().all(|&g| g > 0.0));
            prop_assert!(trace.gamma.iter().all(|&g| g > 0.0 && g <= alpha));
        }
    }
}
