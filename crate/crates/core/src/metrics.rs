//! Calibration error metrics over top-label confidences.
//!
//! Bin weights are `|B_m| / N`, so they sum to one and a perfectly calibrated
//! model scores zero. Equal-width bin `m` (1-based) covers `((m-1)/M, m/M]`;
//! a confidence of exactly 0 goes to the first bin. Empty bins carry no
//! weight.
//!
//! Every reduction walks samples in index order, so results do not depend on
//! thread count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CalibraError, Result};
use crate::model::Matrix;
use crate::scalar::Scalar;

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_PIECE_KNN: usize = 10;
pub const DEFAULT_PROXIMITY_GROUPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BinningScheme {
    #[default]
    EqualWidth,
    EqualMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub n_bins: usize,
    pub scheme: BinningScheme,
}

impl BinningConfig {
    pub fn equal_width(n_bins: usize) -> Self {
        Self {
            n_bins,
            scheme: BinningScheme::EqualWidth,
        }
    }

    pub fn equal_mass(n_bins: usize) -> Self {
        Self {
            n_bins,
            scheme: BinningScheme::EqualMass,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_bins == 0 {
            return Err(CalibraError::invalid("number of bins must be at least 1"));
        }
        Ok(())
    }
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self::equal_width(DEFAULT_BINS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStat<F = f64> {
    pub lo: F,
    pub hi: F,
    pub count: usize,
    pub acc: F,
    pub conf: F,
}

/// Per-bin accuracy and mean confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTable<F = f64> {
    pub rows: Vec<BinStat<F>>,
}

impl<F: Scalar> ReliabilityTable<F> {
    pub fn n_samples(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }

    /// Σ (|B_m| / N) · |acc − conf| over nonempty bins.
    pub fn ece(&self) -> F {
        let n = F::count(self.n_samples());
        let mut total = F::zero();
        for r in self.rows.iter().filter(|r| r.count > 0) {
            total = total + (F::count(r.count) / n) * (r.acc - r.conf).abs();
        }
        total
    }

    /// Largest |acc − conf| over nonempty bins.
    pub fn mce(&self) -> F {
        self.rows
            .iter()
            .filter(|r| r.count > 0)
            .map(|r| (r.acc - r.conf).abs())
            .fold(F::zero(), F::max)
    }

    /// Largest (|B_m| / N) · |acc − conf| over nonempty bins.
    pub fn weighted_mce(&self) -> F {
        let n = F::count(self.n_samples());
        self.rows
            .iter()
            .filter(|r| r.count > 0)
            .map(|r| (F::count(r.count) / n) * (r.acc - r.conf).abs())
            .fold(F::zero(), F::max)
    }

    /// `lo,hi,count,acc,conf` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lo,hi,count,acc,conf\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.lo, r.hi, r.count, r.acc, r.conf);
        }
        out
    }
}

fn check_inputs<F: Scalar>(confidences: &[F], correctness: &[bool]) -> Result<()> {
    if confidences.is_empty() {
        return Err(CalibraError::Empty("no samples to bin"));
    }
    if confidences.len() != correctness.len() {
        return Err(CalibraError::ShapeMismatch(format!(
            "{} confidences but {} correctness flags",
            confidences.len(),
            correctness.len()
        )));
    }
    if let Some((i, c)) = confidences
        .iter()
        .enumerate()
        .find(|(_, c)| !(c.is_finite() && **c >= F::zero() && **c <= F::one()))
    {
        return Err(CalibraError::invalid(format!(
            "confidence {c} of sample {i} is outside [0, 1]"
        )));
    }
    Ok(())
}

#[inline]
fn edge<F: Scalar>(m: usize, n_bins: usize) -> F {
    F::count(m) / F::count(n_bins)
}

/// Zero-based equal-width bin of a confidence in [0, 1].
pub fn equal_width_bin<F: Scalar>(c: F, n_bins: usize) -> usize {
    if c <= F::zero() {
        return 0;
    }
    let guess = (c * F::count(n_bins)).ceil().to_usize().unwrap_or(1);
    let mut m = guess.clamp(1, n_bins) - 1;
    // settle against the exact edges used in the table
    while m > 0 && c <= edge::<F>(m, n_bins) {
        m -= 1;
    }
    while m + 1 < n_bins && c > edge::<F>(m + 1, n_bins) {
        m += 1;
    }
    m
}

fn equal_width_assign<F: Scalar>(confidences: &[F], n_bins: usize) -> Vec<usize> {
    confidences
        .iter()
        .map(|&c| equal_width_bin(c, n_bins))
        .collect()
}

/// Sample indices in ascending value order, ties kept in index order.
fn stable_order<F: Scalar>(values: &[F]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    order
}

/// Size of each of `n_bins` equal-mass runs over `n` samples; the first
/// `n mod n_bins` runs take the extra sample.
pub fn equal_mass_sizes(n: usize, n_bins: usize) -> Vec<usize> {
    let base = n / n_bins;
    let extra = n % n_bins;
    (0..n_bins).map(|m| base + usize::from(m < extra)).collect()
}

fn equal_mass_assign<F: Scalar>(values: &[F], n_bins: usize) -> Vec<usize> {
    let order = stable_order(values);
    let mut assign = vec![0; values.len()];
    let mut pos = 0;
    for (m, size) in equal_mass_sizes(values.len(), n_bins)
        .into_iter()
        .enumerate()
    {
        for &i in &order[pos..pos + size] {
            assign[i] = m;
        }
        pos += size;
    }
    assign
}

struct Cell<F> {
    count: usize,
    hits: usize,
    conf_sum: F,
}

fn accumulate<F: Scalar>(
    assign: &[usize],
    n_cells: usize,
    confidences: &[F],
    correctness: &[bool],
) -> Vec<Cell<F>> {
    let mut cells: Vec<Cell<F>> = (0..n_cells)
        .map(|_| Cell {
            count: 0,
            hits: 0,
            conf_sum: F::zero(),
        })
        .collect();
    for ((&a, &c), &ok) in assign.iter().zip(confidences).zip(correctness) {
        let cell = &mut cells[a];
        cell.count += 1;
        cell.hits += usize::from(ok);
        cell.conf_sum = cell.conf_sum + c;
    }
    cells
}

fn cell_means<F: Scalar>(cell: &Cell<F>) -> (F, F) {
    if cell.count == 0 {
        return (F::zero(), F::zero());
    }
    let n = F::count(cell.count);
    (F::count(cell.hits) / n, cell.conf_sum / n)
}

fn weighted_gap<F: Scalar>(cells: &[Cell<F>], n: usize) -> F {
    let n = F::count(n);
    let mut total = F::zero();
    for cell in cells.iter().filter(|c| c.count > 0) {
        let (acc, conf) = cell_means(cell);
        total = total + (F::count(cell.count) / n) * (acc - conf).abs();
    }
    total
}

pub fn reliability<F: Scalar>(
    confidences: &[F],
    correctness: &[bool],
    cfg: BinningConfig,
) -> Result<ReliabilityTable<F>> {
    cfg.validate()?;
    check_inputs(confidences, correctness)?;
    let m = cfg.n_bins;
    let assign = match cfg.scheme {
        BinningScheme::EqualWidth => equal_width_assign(confidences, m),
        BinningScheme::EqualMass => equal_mass_assign(confidences, m),
    };
    let cells = accumulate(&assign, m, confidences, correctness);
    let mut rows = Vec::with_capacity(m);
    match cfg.scheme {
        BinningScheme::EqualWidth => {
            for (b, cell) in cells.iter().enumerate() {
                let (acc, conf) = cell_means(cell);
                rows.push(BinStat {
                    lo: edge(b, m),
                    hi: edge(b + 1, m),
                    count: cell.count,
                    acc,
                    conf,
                });
            }
        }
        BinningScheme::EqualMass => {
            let mut lo = vec![F::infinity(); m];
            let mut hi = vec![F::neg_infinity(); m];
            for (&a, &c) in assign.iter().zip(confidences) {
                lo[a] = lo[a].min(c);
                hi[a] = hi[a].max(c);
            }
            let mut prev_hi = F::zero();
            for (b, cell) in cells.iter().enumerate() {
                let (acc, conf) = cell_means(cell);
                let (l, h) = if cell.count == 0 {
                    (prev_hi, prev_hi)
                } else {
                    (lo[b], hi[b])
                };
                prev_hi = h;
                rows.push(BinStat {
                    lo: l,
                    hi: h,
                    count: cell.count,
                    acc,
                    conf,
                });
            }
        }
    }
    Ok(ReliabilityTable { rows })
}

pub fn ece<F: Scalar>(confidences: &[F], correctness: &[bool], cfg: BinningConfig) -> Result<F> {
    Ok(reliability(confidences, correctness, cfg)?.ece())
}

/// Standard maximum calibration error.
pub fn mce<F: Scalar>(confidences: &[F], correctness: &[bool], cfg: BinningConfig) -> Result<F> {
    Ok(reliability(confidences, correctness, cfg)?.mce())
}

/// Maximum calibration error with each bin's gap weighted by its mass.
pub fn weighted_mce<F: Scalar>(
    confidences: &[F],
    correctness: &[bool],
    cfg: BinningConfig,
) -> Result<F> {
    Ok(reliability(confidences, correctness, cfg)?.weighted_mce())
}

/// Adaptive calibration error: ECE over equal-mass confidence bins.
pub fn ace<F: Scalar>(confidences: &[F], correctness: &[bool], n_bins: usize) -> Result<F> {
    ece(confidences, correctness, BinningConfig::equal_mass(n_bins))
}

/// Settings for the proximity-informed calibration error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceConfig {
    pub n_conf_bins: usize,
    pub n_prox_bins: usize,
    pub k_nn: usize,
}

impl Default for PieceConfig {
    fn default() -> Self {
        Self {
            n_conf_bins: DEFAULT_BINS,
            n_prox_bins: DEFAULT_PROXIMITY_GROUPS,
            k_nn: DEFAULT_PIECE_KNN,
        }
    }
}

/// `exp(-mean distance to the k nearest other samples)` per sample.
/// Distance ties are broken by sample index.
pub fn proximity<F: Scalar>(features: &Matrix<F>, k_nn: usize) -> Result<Vec<F>> {
    let n = features.rows();
    if k_nn == 0 {
        return Err(CalibraError::invalid("k_nn must be at least 1"));
    }
    if n <= k_nn {
        return Err(CalibraError::invalid(format!(
            "proximity with k_nn = {k_nn} needs more than {k_nn} samples, got {n}"
        )));
    }
    let k = F::count(k_nn);
    let out = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = features.row(i);
            let mut dists: Vec<(F, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d: F = a
                        .iter()
                        .zip(features.row(j))
                        .map(|(&x, &y)| (x - y) * (x - y))
                        .sum();
                    (d.sqrt(), j)
                })
                .collect();
            let by_dist = |p: &(F, usize), q: &(F, usize)| {
                p.0.partial_cmp(&q.0)
                    .expect("finite distances")
                    .then(p.1.cmp(&q.1))
            };
            dists.select_nth_unstable_by(k_nn - 1, by_dist);
            let nearest = &mut dists[..k_nn];
            nearest.sort_by(by_dist);
            let total: F = nearest.iter().map(|p| p.0).sum();
            (-(total / k)).exp()
        })
        .collect();
    Ok(out)
}

/// Equal-mass groups over `values`; runs of identical values never straddle
/// a group boundary (they stay with the group of their first member).
pub fn proximity_groups<F: Scalar>(values: &[F], n_groups: usize) -> Vec<usize> {
    let order = stable_order(values);
    let sizes = equal_mass_sizes(values.len(), n_groups);
    let mut nominal = Vec::with_capacity(values.len());
    for (g, &size) in sizes.iter().enumerate() {
        nominal.extend(std::iter::repeat_n(g, size));
    }
    let mut assign = vec![0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        assign[i] = if pos > 0 && values[order[pos - 1]] == values[i] {
            assign[order[pos - 1]]
        } else {
            nominal[pos]
        };
    }
    assign
}

/// Proximity-informed ECE: samples are split into equal-mass proximity
/// groups and the bin gaps of every (group × confidence bin) cell are summed
/// with weight `cell_count / N`.
pub fn piece<F: Scalar>(
    confidences: &[F],
    correctness: &[bool],
    features: &Matrix<F>,
    cfg: PieceConfig,
) -> Result<F> {
    check_inputs(confidences, correctness)?;
    BinningConfig::equal_width(cfg.n_conf_bins).validate()?;
    if cfg.n_prox_bins == 0 {
        return Err(CalibraError::invalid("need at least one proximity group"));
    }
    if features.rows() != confidences.len() {
        return Err(CalibraError::ShapeMismatch(format!(
            "{} feature rows for {} samples",
            features.rows(),
            confidences.len()
        )));
    }
    let prox = proximity(features, cfg.k_nn)?;
    let groups = proximity_groups(&prox, cfg.n_prox_bins);
    let assign: Vec<usize> = groups
        .iter()
        .zip(confidences)
        .map(|(&g, &c)| g * cfg.n_conf_bins + equal_width_bin(c, cfg.n_conf_bins))
        .collect();
    let cells = accumulate(
        &assign,
        cfg.n_prox_bins * cfg.n_conf_bins,
        confidences,
        correctness,
    );
    Ok(weighted_gap(&cells, confidences.len()))
}

/// Settings for a full [`CalibrationReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub binning: BinningConfig,
    pub piece: PieceConfig,
}

impl MetricsConfig {
    pub fn with_bins(n_bins: usize) -> Self {
        let mut cfg = Self::default();
        cfg.binning.n_bins = n_bins;
        cfg.piece.n_conf_bins = n_bins;
        cfg
    }
}

/// Metric bundle for one method on one split. Error metrics are stored in
/// [0, 1]; PIECE is absent when there are too few samples for the k-NN step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub method: String,
    pub split: String,
    pub ece: f64,
    pub ace: f64,
    pub mce: f64,
    pub piece: Option<f64>,
    pub accuracy: f64,
    pub mean_confidence: f64,
    pub contrast: f64,
}

/// Inputs shared by every metric in a report.
pub struct EvalInputs<'a, F> {
    pub confidences: &'a [F],
    pub correctness: &'a [bool],
    pub features: &'a Matrix<F>,
    pub contrast: F,
}

pub fn evaluate<F: Scalar>(
    method: &str,
    split: &str,
    inputs: &EvalInputs<'_, F>,
    cfg: &MetricsConfig,
) -> Result<CalibrationReport> {
    let table = reliability(inputs.confidences, inputs.correctness, cfg.binning)?;
    let ace = ace(inputs.confidences, inputs.correctness, cfg.binning.n_bins)?;
    let piece = if inputs.confidences.len() > cfg.piece.k_nn {
        Some(
            piece(
                inputs.confidences,
                inputs.correctness,
                inputs.features,
                cfg.piece,
            )?
            .as_f64(),
        )
    } else {
        None
    };
    let n = inputs.confidences.len() as f64;
    let hits = inputs.correctness.iter().filter(|&&ok| ok).count();
    let conf_sum: f64 = inputs.confidences.iter().map(|c| c.as_f64()).sum();
    Ok(CalibrationReport {
        method: method.to_string(),
        split: split.to_string(),
        ece: table.ece().as_f64(),
        ace: ace.as_f64(),
        mce: table.mce().as_f64(),
        piece,
        accuracy: hits as f64 / n,
        mean_confidence: conf_sum / n,
        contrast: inputs.contrast.as_f64(),
    })
}
