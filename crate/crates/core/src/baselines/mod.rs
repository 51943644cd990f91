//! Post-hoc comparison calibrators: temperature scaling, histogram binning,
//! isotonic regression and pooled multi-class isotonic regression.
//!
//! Histogram binning and isotonic regression rewrite only the top-label
//! confidence. None of the calibrators change the predicted label.

mod isotonic;
mod temperature;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CalibraError, Result};
use crate::metrics::{equal_width_bin, reliability, BinningConfig};
use crate::model::{argmax, predict, softmax_rows, Matrix, Prediction};
use crate::scalar::Scalar;

pub use isotonic::{fit_step_function, pava, StepFunction};
pub use temperature::{fit_temperature, nll, MAX_TEMPERATURE, MIN_TEMPERATURE};

/// Floor on the row sum when renormalising multi-isotonic outputs.
pub const RENORM_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibratorKind {
    Temperature,
    Histogram,
    Isotonic,
    MultiIsotonic,
}

impl CalibratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CalibratorKind::Temperature => "temperature",
            CalibratorKind::Histogram => "histogram",
            CalibratorKind::Isotonic => "isotonic",
            CalibratorKind::MultiIsotonic => "multi-isotonic",
        }
    }
}

impl fmt::Display for CalibratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CalibratorKind {
    type Err = CalibraError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temperature" => Ok(Self::Temperature),
            "histogram" => Ok(Self::Histogram),
            "isotonic" => Ok(Self::Isotonic),
            "multi-isotonic" => Ok(Self::MultiIsotonic),
            other => Err(CalibraError::invalid(format!(
                "unknown calibrator '{other}'"
            ))),
        }
    }
}

/// A calibrator fitted on a validation split. Serialises to JSON tagged by
/// `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedCalibrator<F = f64> {
    Temperature {
        temperature: F,
    },
    /// Replacement confidence per equal-width bin.
    Histogram {
        values: Vec<F>,
    },
    Isotonic {
        knots: StepFunction<F>,
    },
    MultiIsotonic {
        knots: StepFunction<F>,
    },
}

/// Fits temperature scaling on scaled validation logits.
pub fn fit_temperature_scaling<F: Scalar>(
    logits: &Matrix<F>,
    labels: &[usize],
) -> Result<FittedCalibrator<F>> {
    Ok(FittedCalibrator::Temperature {
        temperature: fit_temperature(logits, labels)?,
    })
}

/// Histogram binning: each equal-width bin's confidence is replaced by its
/// validation accuracy; empty bins map to their midpoint.
pub fn fit_histogram<F: Scalar>(
    confidences: &[F],
    correctness: &[bool],
    n_bins: usize,
) -> Result<FittedCalibrator<F>> {
    let table = reliability(confidences, correctness, BinningConfig::equal_width(n_bins))?;
    let values = table
        .rows
        .iter()
        .map(|r| {
            if r.count > 0 {
                r.acc
            } else {
                (r.lo + r.hi) / F::lit(2.0)
            }
        })
        .collect();
    Ok(FittedCalibrator::Histogram { values })
}

pub fn fit_isotonic<F: Scalar>(
    confidences: &[F],
    correctness: &[bool],
) -> Result<FittedCalibrator<F>> {
    Ok(FittedCalibrator::Isotonic {
        knots: fit_step_function(confidences, correctness)?,
    })
}

/// One isotonic map fitted on every (probability, one-hot target) pair of
/// the validation probabilities.
pub fn fit_multi_isotonic<F: Scalar>(
    probs: &Matrix<F>,
    labels: &[usize],
) -> Result<FittedCalibrator<F>> {
    if labels.len() != probs.rows() {
        return Err(CalibraError::ShapeMismatch(format!(
            "{} labels for {} probability rows",
            labels.len(),
            probs.rows()
        )));
    }
    let mut outcomes = Vec::with_capacity(probs.as_slice().len());
    for &y in labels {
        if y >= probs.cols() {
            return Err(CalibraError::invalid(format!("label {y} out of range")));
        }
        outcomes.extend((0..probs.cols()).map(|j| j == y));
    }
    Ok(FittedCalibrator::MultiIsotonic {
        knots: fit_step_function(probs.as_slice(), &outcomes)?,
    })
}

impl<F: Scalar> FittedCalibrator<F> {
    pub fn kind(&self) -> CalibratorKind {
        match self {
            FittedCalibrator::Temperature { .. } => CalibratorKind::Temperature,
            FittedCalibrator::Histogram { .. } => CalibratorKind::Histogram,
            FittedCalibrator::Isotonic { .. } => CalibratorKind::Isotonic,
            FittedCalibrator::MultiIsotonic { .. } => CalibratorKind::MultiIsotonic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FittedCalibrator::Temperature { temperature } => {
                let t = temperature.as_f64();
                if !(MIN_TEMPERATURE..=MAX_TEMPERATURE).contains(&t) {
                    return Err(CalibraError::invalid(format!(
                        "temperature {t} outside [{MIN_TEMPERATURE}, {MAX_TEMPERATURE}]"
                    )));
                }
                Ok(())
            }
            FittedCalibrator::Histogram { values } => {
                if values.is_empty() || values.iter().any(|v| !(*v >= F::zero() && *v <= F::one()))
                {
                    return Err(CalibraError::invalid(
                        "histogram values must be a nonempty list in [0, 1]",
                    ));
                }
                Ok(())
            }
            FittedCalibrator::Isotonic { knots } | FittedCalibrator::MultiIsotonic { knots } => {
                knots.validate()
            }
        }
    }

    /// Maps a top-label confidence (histogram and isotonic only).
    pub fn map_confidence(&self, confidence: F) -> Result<F> {
        match self {
            FittedCalibrator::Histogram { values } => {
                Ok(values[equal_width_bin(confidence, values.len())])
            }
            FittedCalibrator::Isotonic { knots } => Ok(knots.eval(confidence)),
            other => Err(CalibraError::invalid(format!(
                "{} calibrator does not map scalar confidences",
                other.kind()
            ))),
        }
    }

    /// Maps every probability of a row through the pooled monotone function
    /// and renormalises (multi-isotonic only).
    pub fn map_probs(&self, probs: &Matrix<F>) -> Result<Matrix<F>> {
        let FittedCalibrator::MultiIsotonic { knots } = self else {
            return Err(CalibraError::invalid(format!(
                "{} calibrator does not map probability vectors",
                self.kind()
            )));
        };
        let eps = F::lit(RENORM_EPSILON);
        let mut data = Vec::with_capacity(probs.as_slice().len());
        for row in probs.iter_rows() {
            let mapped: Vec<F> = row.iter().map(|&p| knots.eval(p)).collect();
            let total = mapped.iter().copied().sum::<F>().max(eps);
            data.extend(mapped.into_iter().map(|p| p / total));
        }
        Matrix::new(probs.rows(), probs.cols(), data)
    }

    /// Calibrated predictions from logits that already carry the model's
    /// logit scale.
    ///
    /// The multi-isotonic map is only weakly monotone, so ties it creates
    /// are broken in favour of the class that scored higher before mapping.
    pub fn predict(&self, logits: &Matrix<F>) -> Result<Prediction<F>> {
        match self {
            FittedCalibrator::Temperature { temperature } => {
                predict(logits, F::one() / *temperature)
            }
            FittedCalibrator::Histogram { .. } | FittedCalibrator::Isotonic { .. } => {
                let mut pred = predict(logits, F::one())?;
                for c in &mut pred.confidences {
                    *c = self.map_confidence(*c)?;
                }
                Ok(pred)
            }
            FittedCalibrator::MultiIsotonic { .. } => {
                let probs = softmax_rows(logits, F::one())?;
                let mapped = self.map_probs(&probs)?;
                let mut labels = Vec::with_capacity(probs.rows());
                let mut confidences = Vec::with_capacity(probs.rows());
                for (orig, cal) in probs.iter_rows().zip(mapped.iter_rows()) {
                    let mut best = argmax(cal);
                    for (j, &v) in cal.iter().enumerate() {
                        if v == cal[best] && orig[j] > orig[best] {
                            best = j;
                        }
                    }
                    labels.push(best);
                    confidences.push(cal[best]);
                }
                Ok(Prediction {
                    labels,
                    confidences,
                })
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibrator serialises")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| CalibraError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CalibraError::io(path, e))?;
        let fitted: Self = serde_json::from_str(&text).map_err(|source| CalibraError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        fitted.validate()?;
        Ok(fitted)
    }
}
