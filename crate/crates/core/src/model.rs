//! Domain types (similarity matrices, labelled datasets, probability
//! vectors) and the primitives built on them: temperature-scaled softmax,
//! argmax prediction and the dataset contrast metric.
//!
//! Contrast is always computed on raw cosine similarities, before any logit
//! scale is applied.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CalibraError, Result};
use crate::scalar::Scalar;

/// Tolerance on the cosine range; values within it are clamped to [-1, 1].
pub const COSINE_TOLERANCE: f64 = 1e-6;

/// Default multiplicative logit scale (1/τ) of contrastive image-text models.
pub const DEFAULT_INV_TEMPERATURE: f64 = 100.0;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    data: Vec<F>,
    rows: usize,
    cols: usize,
}

impl<F: Scalar> Matrix<F> {
    pub fn new(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CalibraError::ShapeMismatch(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { data, rows, cols })
    }

    pub fn from_rows<R: AsRef<[F]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(CalibraError::ShapeMismatch(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            data,
            rows: rows.len(),
            cols,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[F]> + '_ {
        // chunks_exact panics on zero width
        (0..self.rows).map(move |i| self.row(i))
    }

    #[inline]
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    /// Returns a new matrix with every row multiplied by its own factor.
    pub fn scale_rows(&self, factors: &[F]) -> Result<Self> {
        if factors.len() != self.rows {
            return Err(CalibraError::ShapeMismatch(format!(
                "{} row factors for a matrix with {} rows",
                factors.len(),
                self.rows
            )));
        }
        let data = self
            .iter_rows()
            .zip(factors)
            .flat_map(|(row, &f)| row.iter().map(move |&x| f * x))
            .collect();
        Ok(Self {
            data,
            rows: self.rows,
            cols: self.cols,
        })
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            data: self.data.iter().map(|&x| f(x)).collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }

    /// Index and value of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<(usize, F)> {
        self.data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
            .map(|(i, &v)| (i, v))
    }

    pub fn convert<G: Scalar>(&self) -> Matrix<G> {
        Matrix {
            data: self.data.iter().map(|x| G::lit(x.as_f64())).collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }
}

/// N×C cosine similarities between samples and class prompts; these are the
/// raw logits of a contrastive classifier before its logit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<F = f64> {
    inner: Matrix<F>,
}

impl<F: Scalar> SimilarityMatrix<F> {
    /// Validates shape (N ≥ 1, C ≥ 2), finiteness and the cosine range.
    /// Values overshooting ±1 by at most [`COSINE_TOLERANCE`] are clamped.
    pub fn new(matrix: Matrix<F>) -> Result<Self> {
        if matrix.rows() == 0 {
            return Err(CalibraError::Empty("similarity matrix has no samples"));
        }
        if matrix.cols() < 2 {
            return Err(CalibraError::invalid(format!(
                "similarity matrix needs at least 2 classes, got {}",
                matrix.cols()
            )));
        }
        if let Some((i, v)) = matrix.first_non_finite() {
            return Err(CalibraError::NonFinite {
                value: v.as_f64(),
                location: format!("row {}, column {}", i / matrix.cols(), i % matrix.cols()),
            });
        }
        let one = F::one();
        let tol = F::lit(COSINE_TOLERANCE);
        let cols = matrix.cols();
        let mut data = matrix.into_vec();
        for (i, v) in data.iter_mut().enumerate() {
            if v.abs() > one + tol {
                return Err(CalibraError::OutOfRange {
                    value: v.as_f64(),
                    row: i / cols,
                    col: i % cols,
                });
            }
            *v = v.max(-one).min(one);
        }
        let rows = data.len() / cols;
        Ok(Self {
            inner: Matrix { data, rows, cols },
        })
    }

    pub fn from_rows<R: AsRef<[F]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.inner.rows()
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.inner.cols()
    }

    pub fn matrix(&self) -> &Matrix<F> {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix<F> {
        self.inner
    }

    /// Logits at the given scale: `inv_temperature * S`.
    pub fn logits(&self, inv_temperature: F) -> Matrix<F> {
        self.inner.map(|x| inv_temperature * x)
    }
}

impl<F> Deref for SimilarityMatrix<F> {
    type Target = Matrix<F>;

    fn deref(&self) -> &Matrix<F> {
        &self.inner
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    TrainClasses,
    UnseenClasses,
    Validation,
    #[default]
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::TrainClasses => "train-classes",
            Split::UnseenClasses => "unseen-classes",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CalibraError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train-classes" => Ok(Split::TrainClasses),
            "unseen-classes" => Ok(Split::UnseenClasses),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(CalibraError::invalid(format!("unknown split '{other}'"))),
        }
    }
}

/// Paired reference (zero-shot) and fine-tuned similarities over the same
/// samples and classes, with ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<F = f64> {
    reference: SimilarityMatrix<F>,
    finetuned: SimilarityMatrix<F>,
    labels: Vec<usize>,
    embeddings: Option<Matrix<F>>,
    class_names: Option<Vec<String>>,
    split: Split,
}

impl<F: Scalar> LabeledDataset<F> {
    pub fn new(
        reference: SimilarityMatrix<F>,
        finetuned: SimilarityMatrix<F>,
        labels: Vec<usize>,
        split: Split,
    ) -> Result<Self> {
        let (rn, rc) = (reference.n_samples(), reference.n_classes());
        let (fn_, fc) = (finetuned.n_samples(), finetuned.n_classes());
        if rn != fn_ || rc != fc || labels.len() != rn {
            return Err(CalibraError::ShapeMismatch(format!(
                "reference {rn}x{rc}, finetuned {fn_}x{fc}, labels {}",
                labels.len()
            )));
        }
        validate_labels(&labels, rc)?;
        Ok(Self {
            reference,
            finetuned,
            labels,
            embeddings: None,
            class_names: None,
            split,
        })
    }

    pub fn with_embeddings(mut self, embeddings: Matrix<F>) -> Result<Self> {
        if embeddings.rows() != self.n_samples() {
            return Err(CalibraError::ShapeMismatch(format!(
                "embeddings have {} rows, dataset has {} samples",
                embeddings.rows(),
                self.n_samples()
            )));
        }
        if let Some((i, v)) = embeddings.first_non_finite() {
            return Err(CalibraError::NonFinite {
                value: v.as_f64(),
                location: format!("embedding row {}", i / embeddings.cols().max(1)),
            });
        }
        self.embeddings = Some(embeddings);
        Ok(self)
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes() {
            return Err(CalibraError::ShapeMismatch(format!(
                "{} class names for {} classes",
                names.len(),
                self.n_classes()
            )));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    /// Same dataset with labels replaced; used to check that calibration
    /// never reads them.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n_samples() {
            return Err(CalibraError::ShapeMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                self.n_samples()
            )));
        }
        validate_labels(&labels, self.n_classes())?;
        self.labels = labels;
        Ok(self)
    }

    pub fn reference(&self) -> &SimilarityMatrix<F> {
        &self.reference
    }

    pub fn finetuned(&self) -> &SimilarityMatrix<F> {
        &self.finetuned
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn embeddings(&self) -> Option<&Matrix<F>> {
        self.embeddings.as_ref()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.reference.n_classes()
    }

    /// Features used for proximity: embeddings when present, otherwise the
    /// fine-tuned similarity rows.
    pub fn proximity_features(&self) -> &Matrix<F> {
        self.embeddings.as_ref().unwrap_or(self.finetuned.matrix())
    }
}

fn validate_labels(labels: &[usize], n_classes: usize) -> Result<()> {
    if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
        return Err(CalibraError::invalid(format!(
            "label {y} of sample {i} is out of range for {n_classes} classes"
        )));
    }
    Ok(())
}

/// Probability vector over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<F = f64>(Vec<F>);

impl<F: Scalar> ProbVector<F> {
    pub fn probs(&self) -> &[F] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<F> {
        self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> F {
        self.0[self.argmax()]
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<F: PartialOrd>(xs: &[F]) -> usize {
    let mut best = 0;
    for (j, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = j;
        }
    }
    best
}

fn check_inv_temperature<F: Scalar>(inv_temperature: F) -> Result<()> {
    if !(inv_temperature.is_finite() && inv_temperature > F::zero()) {
        return Err(CalibraError::invalid(format!(
            "inverse temperature must be positive and finite, got {inv_temperature}"
        )));
    }
    Ok(())
}

/// Softmax of `inv_temperature * logits`, stabilised by max subtraction.
pub fn softmax<F: Scalar>(logits: &[F], inv_temperature: F) -> Result<ProbVector<F>> {
    check_inv_temperature(inv_temperature)?;
    if logits.is_empty() {
        return Err(CalibraError::Empty("softmax of an empty vector"));
    }
    if let Some((j, v)) = logits.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(CalibraError::NonFinite {
            value: v.as_f64(),
            location: format!("logit {j}"),
        });
    }
    Ok(ProbVector(softmax_unchecked(logits, inv_temperature)))
}

pub(crate) fn softmax_unchecked<F: Scalar>(logits: &[F], inv_temperature: F) -> Vec<F> {
    let max = logits[argmax(logits)];
    let mut out: Vec<F> = logits
        .iter()
        .map(|&x| ((x - max) * inv_temperature).exp())
        .collect();
    let total: F = out.iter().copied().sum();
    for p in &mut out {
        *p = *p / total;
    }
    out
}

/// Row-wise softmax of a logit matrix.
pub fn softmax_rows<F: Scalar>(logits: &Matrix<F>, inv_temperature: F) -> Result<Matrix<F>> {
    check_inv_temperature(inv_temperature)?;
    if let Some((i, v)) = logits.first_non_finite() {
        return Err(CalibraError::NonFinite {
            value: v.as_f64(),
            location: format!("logit row {}", i / logits.cols().max(1)),
        });
    }
    let data = logits
        .iter_rows()
        .flat_map(|row| softmax_unchecked(row, inv_temperature))
        .collect();
    Matrix::new(logits.rows(), logits.cols(), data)
}

/// Top-label predictions: argmax class and its softmax probability per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<F = f64> {
    pub labels: Vec<usize>,
    pub confidences: Vec<F>,
}

impl<F: Scalar> Prediction<F> {
    pub fn correctness(&self, truth: &[usize]) -> Vec<bool> {
        self.labels.iter().zip(truth).map(|(a, b)| a == b).collect()
    }

    pub fn accuracy(&self, truth: &[usize]) -> F {
        let hits = self
            .labels
            .iter()
            .zip(truth)
            .filter(|(a, b)| a == b)
            .count();
        F::count(hits) / F::count(self.labels.len())
    }
}

/// Predicts every row of `logits` under the given scale.
pub fn predict<F: Scalar>(logits: &Matrix<F>, inv_temperature: F) -> Result<Prediction<F>> {
    check_inv_temperature(inv_temperature)?;
    if let Some((i, v)) = logits.first_non_finite() {
        return Err(CalibraError::NonFinite {
            value: v.as_f64(),
            location: format!("logit row {}", i / logits.cols().max(1)),
        });
    }
    let mut labels = Vec::with_capacity(logits.rows());
    let mut confidences = Vec::with_capacity(logits.rows());
    for row in logits.iter_rows() {
        let best = argmax(row);
        let max = row[best];
        let total: F = row
            .iter()
            .map(|&x| ((x - max) * inv_temperature).exp())
            .sum();
        labels.push(best);
        confidences.push(F::one() / total);
    }
    Ok(Prediction {
        labels,
        confidences,
    })
}

/// Positive/negative similarity means and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport<F = f64> {
    pub positive_mean: F,
    pub negative_mean: F,
    pub contrast: F,
}

/// Mean ground-truth similarity minus mean best-rival similarity. The rival
/// is the highest-scoring wrong class (lowest index on ties).
pub fn contrast<F: Scalar>(m: &Matrix<F>, labels: &[usize]) -> Result<ContrastReport<F>> {
    if m.cols() < 2 {
        return Err(CalibraError::invalid(
            "contrast needs at least two classes: no negative class exists",
        ));
    }
    if labels.len() != m.rows() {
        return Err(CalibraError::ShapeMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            m.rows()
        )));
    }
    if m.rows() == 0 {
        return Err(CalibraError::Empty("contrast of an empty matrix"));
    }
    validate_labels(labels, m.cols())?;
    let mut pos = F::zero();
    let mut neg = F::zero();
    for (row, &y) in m.iter_rows().zip(labels) {
        pos = pos + row[y];
        let mut rival: Option<F> = None;
        for (j, &v) in row.iter().enumerate() {
            if j != y && rival.is_none_or(|r| v > r) {
                rival = Some(v);
            }
        }
        neg = neg + rival.expect("at least two classes");
    }
    let n = F::count(m.rows());
    let positive_mean = pos / n;
    let negative_mean = neg / n;
    Ok(ContrastReport {
        positive_mean,
        negative_mean,
        contrast: positive_mean - negative_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_symmetric_pair() {
        let p = softmax(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_large_scale_approaches_one_hot() {
        let p = softmax(&[1.0, 0.0], 1000.0).unwrap();
        assert_eq!(p.probs()[0], 1.0);
        assert!(p.probs()[1] < 1e-300);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(matches!(
            softmax(&[0.0, f64::NAN], 1.0),
            Err(CalibraError::NonFinite { .. })
        ));
        assert!(softmax(&[0.0, f64::INFINITY], 1.0).is_err());
        assert!(softmax(&[0.0, 1.0], 0.0).is_err());
        assert!(softmax(&[0.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn predict_one_hot_and_tie() {
        let m = Matrix::from_rows(&[[0.99, -1.0, -1.0]]).unwrap();
        assert_eq!(predict(&m, 100.0).unwrap().labels, vec![0]);
        let m = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        let p = predict(&m, 100.0).unwrap();
        assert_eq!(p.labels, vec![0]);
        assert_eq!(p.confidences, vec![0.5]);
    }

    #[test]
    fn contrast_identity_like() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let c = contrast(&m, &[0, 1]).unwrap();
        assert_eq!(c.positive_mean, 1.0);
        assert_eq!(c.negative_mean, 0.0);
        assert_eq!(c.contrast, 1.0);
    }

    #[test]
    fn contrast_hand_enumerated() {
        let m = Matrix::from_rows(&[[0.9f64, 0.1], [0.2, 0.7]]).unwrap();
        let c = contrast(&m, &[0, 1]).unwrap();
        assert!((c.positive_mean - 0.8).abs() < 1e-15);
        assert!((c.negative_mean - 0.15).abs() < 1e-15);
        assert!((c.contrast - 0.65).abs() < 1e-15);
    }

    #[test]
    fn contrast_negative_when_rivals_win() {
        let m = Matrix::from_rows(&[[0.1, 0.3, 0.2], [0.2, 0.1, 0.3]]).unwrap();
        let c = contrast(&m, &[0, 1]).unwrap();
        assert!(c.contrast < 0.0);
    }

    #[test]
    fn contrast_rejects_single_class() {
        let m = Matrix::from_rows(&[[0.3], [0.1]]).unwrap();
        assert!(contrast(&m, &[0, 0]).is_err());
    }

    #[test]
    fn similarity_matrix_clamps_within_tolerance() {
        let s = SimilarityMatrix::from_rows(&[[1.0 + 5e-7, -1.0 - 5e-7]]).unwrap();
        assert_eq!(s.row(0), &[1.0, -1.0]);
        assert!(matches!(
            SimilarityMatrix::from_rows(&[[1.0 + 1e-5, 0.0]]),
            Err(CalibraError::OutOfRange { row: 0, col: 0, .. })
        ));
        assert!(SimilarityMatrix::from_rows(&[[0.5]]).is_err());
        assert!(SimilarityMatrix::<f64>::from_rows::<[f64; 2]>(&[]).is_err());
    }

    #[test]
    fn dataset_rejects_misaligned_parts() {
        let a = SimilarityMatrix::from_rows(&[[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let b = SimilarityMatrix::from_rows(&[[0.1, 0.2]]).unwrap();
        let err = LabeledDataset::new(a.clone(), b, vec![0, 1], Split::Test).unwrap_err();
        assert!(err
            .to_string()
            .contains("reference 2x2, finetuned 1x2, labels 2"));
        assert!(LabeledDataset::new(a.clone(), a.clone(), vec![0], Split::Test).is_err());
        assert!(LabeledDataset::new(a.clone(), a, vec![0, 2], Split::Test).is_err());
    }

    fn row_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 2..12)
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(row in prop::collection::vec(-1e4f64..1e4, 1..20), s in 1e-3f64..1.0) {
            let p = softmax(&row, s).unwrap();
            let total: f64 = p.probs().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(p.probs().iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn softmax_preserves_argmax(row in row_strategy(), s in 1e-2f64..1e3) {
            let p = softmax(&row, s).unwrap();
            prop_assert_eq!(p.argmax(), argmax(&row));
        }

        #[test]
        fn contrast_invariant_under_column_permutation(
            rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..10),
            seed in any::<u64>(),
        ) {
            let m = Matrix::from_rows(&rows).unwrap();
            let labels: Vec<usize> = (0..rows.len()).map(|i| (i * 7 + seed as usize) % 4).collect();
            // fixed permutation derived from the seed
            let mut perm = [0usize, 1, 2, 3];
            perm.rotate_left((seed % 4) as usize);
            perm.swap(0, ((seed >> 8) % 4) as usize);
            let permuted: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let mut out = vec![0.0; 4];
                    for (j, &v) in r.iter().enumerate() {
                        out[perm[j]] = v;
                    }
                    out
                })
                .collect();
            let plabels: Vec<usize> = labels.iter().map(|&y| perm[y]).collect();
            let a = contrast(&m, &labels).unwrap();
            let b = contrast(&Matrix::from_rows(&permuted).unwrap(), &plabels).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn contrast_invariant_under_shift(
            rows in prop::collection::vec(prop::collection::vec(-0.5f64..0.5, 3), 1..10),
            shift in -0.5f64..0.5,
        ) {
            let m = Matrix::from_rows(&rows).unwrap();
            let labels: Vec<usize> = (0..rows.len()).map(|i| i % 3).collect();
            let a = contrast(&m, &labels).unwrap();
            let b = contrast(&m.map(|x| x + shift), &labels).unwrap();
            prop_assert!((a.contrast - b.contrast).abs() < 1e-12);
        }
    }
}
