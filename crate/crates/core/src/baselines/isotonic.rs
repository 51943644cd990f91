//! Pool-adjacent-violators isotonic regression and the monotone step
//! functions it produces.

use serde::{Deserialize, Serialize};

use crate::error::{CalibraError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
struct Block<F> {
    sum: F,
    weight: F,
    len: usize,
}

impl<F: Scalar> Block<F> {
    #[inline]
    fn mean(&self) -> F {
        self.sum / self.weight
    }
}

/// Runs PAVA over pre-pooled points given as (Σ w·y, Σ w). Returns one
/// fitted value per input point.
fn pava_pooled<F: Scalar>(sums: &[F], weights: &[F]) -> Vec<F> {
    let mut blocks: Vec<Block<F>> = Vec::with_capacity(sums.len());
    for (&sum, &weight) in sums.iter().zip(weights) {
        let mut cur = Block {
            sum,
            weight,
            len: 1,
        };
        while let Some(prev) = blocks.last() {
            if prev.mean() > cur.mean() {
                cur = Block {
                    sum: prev.sum + cur.sum,
                    weight: prev.weight + cur.weight,
                    len: prev.len + cur.len,
                };
                blocks.pop();
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(sums.len());
    for b in &blocks {
        out.extend(std::iter::repeat_n(b.mean(), b.len));
    }
    out
}

/// Weighted least-squares non-decreasing fit of `y` (in the given order).
pub fn pava<F: Scalar>(y: &[F], weights: &[F]) -> Result<Vec<F>> {
    if y.len() != weights.len() {
        return Err(CalibraError::ShapeMismatch(format!(
            "{} targets but {} weights",
            y.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > F::zero())) {
        return Err(CalibraError::invalid(format!(
            "weights must be positive, got {w}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(CalibraError::invalid("targets must be finite"));
    }
    let sums: Vec<F> = y.iter().zip(weights).map(|(&a, &w)| a * w).collect();
    Ok(pava_pooled(&sums, weights))
}

/// Non-decreasing step function through sorted knots. Evaluation returns
/// the value of the last knot at or below `x` (the first knot's value below
/// the range), clamped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction<F = f64> {
    pub xs: Vec<F>,
    pub ys: Vec<F>,
}

impl<F: Scalar> StepFunction<F> {
    pub fn eval(&self, x: F) -> F {
        let idx = self.xs.partition_point(|&k| k <= x);
        let y = self.ys[idx.saturating_sub(1)];
        y.max(F::zero()).min(F::one())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.xs.is_empty() || self.xs.len() != self.ys.len() {
            return Err(CalibraError::invalid(
                "step function needs matching, nonempty knots",
            ));
        }
        let increasing = self.xs.windows(2).all(|w| w[0] < w[1]);
        let monotone = self.ys.windows(2).all(|w| w[0] <= w[1]);
        let bounded = self.ys.iter().all(|&y| y >= F::zero() && y <= F::one());
        if !(increasing && monotone && bounded) {
            return Err(CalibraError::invalid(
                "step function knots must be strictly increasing in x and non-decreasing in [0, 1] in y",
            ));
        }
        Ok(())
    }
}

/// Isotonic fit of binary outcomes against scores. Tied scores are pooled
/// first; knots keep only the first score of each constant run.
pub fn fit_step_function<F: Scalar>(scores: &[F], outcomes: &[bool]) -> Result<StepFunction<F>> {
    if scores.is_empty() {
        return Err(CalibraError::Empty(
            "isotonic fit needs at least one sample",
        ));
    }
    if scores.len() != outcomes.len() {
        return Err(CalibraError::ShapeMismatch(format!(
            "{} scores but {} outcomes",
            scores.len(),
            outcomes.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(CalibraError::invalid("scores must be finite"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite"));

    let mut xs: Vec<F> = Vec::new();
    let mut sums: Vec<F> = Vec::new();
    let mut weights: Vec<F> = Vec::new();
    for &i in &order {
        let y = if outcomes[i] { F::one() } else { F::zero() };
        if xs.last() == Some(&scores[i]) {
            let last = sums.len() - 1;
            sums[last] = sums[last] + y;
            weights[last] = weights[last] + F::one();
        } else {
            xs.push(scores[i]);
            sums.push(y);
            weights.push(F::one());
        }
    }
    let fitted = pava_pooled(&sums, &weights);

    let mut knots = StepFunction {
        xs: Vec::new(),
        ys: Vec::new(),
    };
    for (&x, &y) in xs.iter().zip(&fitted) {
        if knots.ys.last() != Some(&y) {
            knots.xs.push(x);
            knots.ys.push(y);
        }
    }
    Ok(knots)
}
