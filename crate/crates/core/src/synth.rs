//! Seeded synthetic datasets reproducing the two miscalibration regimes of
//! fine-tuned contrastive classifiers, plus the contrast–ECE correlation
//! study built on them.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`), keyed by the scenario
//! seed with one stream per sample index, so a sample's values never depend
//! on generation order. Gaussian noise uses the Box–Muller transform.
//!
//! Rows are built in logit units around a common baseline similarity and
//! divided by the logit scale, then passed through a soft clip that is the
//! identity on [-0.5, 0.5] and saturates inside (-1, 1). Values are rounded
//! to `f32` precision, as model exports are.
//!
//! * The reference model is calibrated by construction: each label is drawn
//!   from the reference softmax.
//! * `overconfident-interclass`: a `dominant_fraction` share of the
//!   misclassified samples is captured, with near-certain confidence, by a
//!   few dominant wrong classes. The rest of the errors are diffuse.
//!   Misclassified rows also drift away from the reference by a row-wise
//!   offset, which leaves their softmax unchanged.
//! * `underconfident-intraclass`: every row carries several near-tied high
//!   scores (`peak_spread` rivals), so confidence is low even when the top
//!   class is right.
//! * `calibrated-reference`: the fine-tuned matrix equals the reference.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CalibraError, Result};
use crate::metrics::{ece, BinningConfig};
use crate::model::{
    contrast, predict, LabeledDataset, Matrix, SimilarityMatrix, Split, DEFAULT_INV_TEMPERATURE,
};
use crate::scalar::Scalar;

const BASELINE: f64 = 0.2;
const NOISE: f64 = 1.0;
const FINETUNE_NOISE: f64 = 0.3;
const POSITIVE_MARGIN: f64 = 3.0;
const DOMINANT_MARGIN: f64 = 10.0;
const DIFFUSE_MARGIN: f64 = 1.0;
const CAPTURED_DRIFT: f64 = 6.0;
const DIFFUSE_DRIFT: f64 = 2.0;
const PEAK_LIFT: f64 = 3.0;
const TIE_MARGIN: f64 = 0.5;
const TIE_SPREAD: f64 = 0.5;
const REFERENCE_JITTER: f64 = 0.05;
const MAX_ATTEMPTS: u64 = 5;
const ACCURACY_TOLERANCE: f64 = 0.05;
const REGIME_GAP: f64 = 0.05;
const CALIBRATED_GAP: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    OverconfidentInterclass,
    UnderconfidentIntraclass,
    CalibratedReference,
}

fn default_inv_temperature() -> f64 {
    DEFAULT_INV_TEMPERATURE
}

fn default_dominant_fraction() -> f64 {
    0.5
}

fn default_peak_spread() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_samples: usize,
    pub n_classes: usize,
    pub regime: Regime,
    /// Share of misclassified samples captured by the dominant classes.
    #[serde(default = "default_dominant_fraction")]
    pub dominant_fraction: f64,
    /// Number of near-tied rival scores per row (rounded).
    #[serde(default = "default_peak_spread")]
    pub peak_spread: f64,
    /// Accuracy of the fine-tuned model.
    pub target_accuracy: f64,
    pub seed: u64,
    #[serde(default = "default_inv_temperature")]
    pub inv_temperature: f64,
}

impl ScenarioSpec {
    pub fn new(regime: Regime, n_samples: usize, n_classes: usize, seed: u64) -> Self {
        let target_accuracy = match regime {
            Regime::OverconfidentInterclass => 0.5,
            Regime::UnderconfidentIntraclass => 0.8,
            Regime::CalibratedReference => 0.7,
        };
        Self {
            n_samples,
            n_classes,
            regime,
            dominant_fraction: default_dominant_fraction(),
            peak_spread: default_peak_spread(),
            target_accuracy,
            seed,
            inv_temperature: DEFAULT_INV_TEMPERATURE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(CalibraError::invalid("n_samples must be at least 1"));
        }
        if self.n_classes < 2 {
            return Err(CalibraError::invalid("n_classes must be at least 2"));
        }
        if !(self.dominant_fraction > 0.0 && self.dominant_fraction <= 1.0) {
            return Err(CalibraError::invalid(format!(
                "dominant_fraction must lie in (0, 1], got {}",
                self.dominant_fraction
            )));
        }
        if !(self.peak_spread >= 0.0 && self.peak_spread.is_finite()) {
            return Err(CalibraError::invalid(
                "peak_spread must be a finite value >= 0",
            ));
        }
        if !(self.target_accuracy > 0.0 && self.target_accuracy < 1.0) {
            return Err(CalibraError::invalid(format!(
                "target_accuracy must lie in (0, 1), got {}",
                self.target_accuracy
            )));
        }
        if !(self.inv_temperature > 0.0 && self.inv_temperature.is_finite()) {
            return Err(CalibraError::invalid("inv_temperature must be positive"));
        }
        self.check_feasible()
    }

    /// Rejects specs whose expected contrast has the wrong sign for the
    /// regime, before any sampling.
    fn check_feasible(&self) -> Result<()> {
        let t = self.target_accuracy;
        match self.regime {
            Regime::OverconfidentInterclass => {
                let f = self.dominant_fraction;
                let expected = t * POSITIVE_MARGIN
                    - (1.0 - t) * (f * DOMINANT_MARGIN + (1.0 - f) * DIFFUSE_MARGIN);
                if expected >= 0.0 {
                    return Err(CalibraError::Unsatisfiable(format!(
                        "target_accuracy {t} with dominant_fraction {f} leaves too few captured \
                         errors for negative contrast (expected contrast margin {:.3} logits)",
                        expected
                    )));
                }
            }
            Regime::UnderconfidentIntraclass => {
                let expected = t * TIE_MARGIN - (1.0 - t) * (TIE_MARGIN + TIE_SPREAD / 2.0);
                if expected <= 0.0 {
                    return Err(CalibraError::Unsatisfiable(format!(
                        "target_accuracy {t} is too low for positive contrast with near-tied rivals"
                    )));
                }
            }
            Regime::CalibratedReference => {
                let floor = 1.0 / self.n_classes as f64;
                if t <= floor {
                    return Err(CalibraError::Unsatisfiable(format!(
                        "target_accuracy {t} is at or below chance ({floor:.3}) for {} classes",
                        self.n_classes
                    )));
                }
            }
        }
        Ok(())
    }

    fn n_rivals(&self) -> usize {
        (self.peak_spread.round() as usize).clamp(1, self.n_classes - 1)
    }

    fn n_dominant(&self) -> usize {
        (self.n_classes / 10).max(2).min(self.n_classes - 1)
    }
}

/// Counter-keyed random source for one sample (or the global stream).
struct Draws(ChaCha20Rng);

impl Draws {
    fn new(seed: u64, attempt: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(
            seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        rng.set_stream(stream);
        Self(rng)
    }

    /// Uniform in [0, 1).
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// Identity on [-0.5, 0.5], smooth saturation towards ±1 outside.
fn soft_clip(u: f64) -> f64 {
    let a = u.abs();
    if a <= 0.5 {
        u
    } else {
        u.signum() * (0.5 + 0.5 * ((a - 0.5) / 0.5).tanh())
    }
}

fn quantize(x: f64) -> f64 {
    x as f32 as f64
}

/// Raw per-sample draws; everything a row needs, drawn in a fixed order.
struct SampleDraws {
    ref_noise: Vec<f64>,
    ft_noise: Vec<f64>,
    planted: usize,
    jitter: f64,
    label_u: f64,
    correct_u: f64,
    capture_u: f64,
    wrong_u: f64,
    margin_u: f64,
    ties: Vec<f64>,
}

fn draw_sample(spec: &ScenarioSpec, attempt: u64, index: usize) -> SampleDraws {
    let c = spec.n_classes;
    let mut d = Draws::new(spec.seed, attempt, index as u64);
    let ref_noise = (0..c).map(|_| NOISE * d.normal()).collect();
    let ft_noise = (0..c).map(|_| FINETUNE_NOISE * d.normal()).collect();
    let planted = d.index(c);
    let jitter = (2.0 * d.uniform() - 1.0) * REFERENCE_JITTER;
    let label_u = d.uniform();
    let correct_u = d.uniform();
    let capture_u = d.uniform();
    let wrong_u = d.uniform();
    let margin_u = d.uniform();
    let ties = (0..c).map(|_| d.uniform()).collect();
    SampleDraws {
        ref_noise,
        ft_noise,
        planted,
        jitter,
        label_u,
        correct_u,
        capture_u,
        wrong_u,
        margin_u,
        ties,
    }
}

fn to_similarity(logits: &[f64], inv_temperature: f64) -> Vec<f64> {
    logits
        .iter()
        .map(|&x| quantize(soft_clip(BASELINE + x / inv_temperature)))
        .collect()
}

/// Reference row whose planted class carries probability `q` under the
/// logit scale.
fn reference_row(s: &SampleDraws, q: f64, inv_temperature: f64) -> Vec<f64> {
    let others: f64 = s
        .ref_noise
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != s.planted)
        .map(|(_, v)| v.exp())
        .sum();
    let mut logits = s.ref_noise.clone();
    logits[s.planted] = (q / (1.0 - q)).ln() + others.ln();
    to_similarity(&logits, inv_temperature)
}

/// Inverse-CDF draw from the softmax of a similarity row.
fn draw_label(row: &[f64], inv_temperature: f64, u: f64) -> usize {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = row
        .iter()
        .map(|&x| ((x - max) * inv_temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return j;
        }
    }
    row.len() - 1
}

/// Indices of the `k` smallest keys (ties by index).
fn lowest_ranked(keys: &[(f64, usize)], k: usize) -> Vec<usize> {
    let mut sorted = keys.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    sorted.into_iter().take(k).map(|(_, i)| i).collect()
}

fn max_except(row: &[f64], skip: usize) -> f64 {
    row.iter()
        .enumerate()
        .filter(|(j, _)| *j != skip)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max)
}

struct Built {
    reference: Vec<Vec<f64>>,
    finetuned: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

fn build(spec: &ScenarioSpec, attempt: u64) -> Built {
    let n = spec.n_samples;
    let c = spec.n_classes;
    let scale = spec.inv_temperature;
    let samples: Vec<SampleDraws> = (0..n)
        .into_par_iter()
        .map(|i| draw_sample(spec, attempt, i))
        .collect();

    let reference: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let q = (spec.target_accuracy + s.jitter).clamp(1.0 / c as f64 + 1e-3, 0.995);
            reference_row(s, q, scale)
        })
        .collect();
    let labels: Vec<usize> = samples
        .iter()
        .zip(&reference)
        .map(|(s, row)| draw_label(row, scale, s.label_u))
        .collect();

    if spec.regime == Regime::CalibratedReference {
        return Built {
            finetuned: reference.clone(),
            reference,
            labels,
        };
    }

    let n_correct = (spec.target_accuracy * n as f64).round() as usize;
    let mut correct = vec![false; n];
    let keys: Vec<(f64, usize)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.correct_u, i))
        .collect();
    for i in lowest_ranked(&keys, n_correct) {
        correct[i] = true;
    }
    let mut captured = vec![false; n];
    if spec.regime == Regime::OverconfidentInterclass {
        let errors: Vec<(f64, usize)> = samples
            .iter()
            .enumerate()
            .filter(|(i, _)| !correct[*i])
            .map(|(i, s)| (s.capture_u, i))
            .collect();
        let n_captured = (spec.dominant_fraction * errors.len() as f64).round() as usize;
        for i in lowest_ranked(&errors, n_captured) {
            captured[i] = true;
        }
    }

    let dominant: Vec<usize> = {
        let mut g = Draws::new(spec.seed, attempt, u64::MAX);
        let mut pool: Vec<usize> = (0..c).collect();
        (0..spec.n_dominant())
            .map(|_| pool.remove(g.index(pool.len())))
            .collect()
    };
    let n_rivals = spec.n_rivals();

    let finetuned = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let y = labels[i];
            let mut logits: Vec<f64> = s
                .ref_noise
                .iter()
                .zip(&s.ft_noise)
                .map(|(a, b)| a + b)
                .collect();
            match spec.regime {
                Regime::OverconfidentInterclass => {
                    let spread = 0.75 + 0.5 * s.margin_u;
                    if correct[i] {
                        logits[y] = max_except(&logits, y) + POSITIVE_MARGIN * spread;
                    } else if captured[i] {
                        let options: Vec<usize> =
                            dominant.iter().copied().filter(|&d| d != y).collect();
                        let top = options
                            [((s.wrong_u * options.len() as f64) as usize).min(options.len() - 1)];
                        logits[top] = max_except(&logits, top) + DOMINANT_MARGIN * spread;
                        logits
                            .iter_mut()
                            .for_each(|x| *x += CAPTURED_DRIFT * spread);
                    } else {
                        let top = ((s.wrong_u * (c - 1) as f64) as usize).min(c - 2);
                        let top = if top >= y { top + 1 } else { top };
                        logits[top] = max_except(&logits, top) + DIFFUSE_MARGIN * spread;
                        logits.iter_mut().for_each(|x| *x += DIFFUSE_DRIFT * spread);
                    }
                }
                Regime::UnderconfidentIntraclass => {
                    let top = if correct[i] {
                        y
                    } else {
                        let w = ((s.wrong_u * (c - 1) as f64) as usize).min(c - 2);
                        if w >= y {
                            w + 1
                        } else {
                            w
                        }
                    };
                    let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max) + PEAK_LIFT;
                    logits[top] = peak;
                    // rivals: the true class first when it is not on top
                    let mut rivals: Vec<usize> = Vec::with_capacity(n_rivals);
                    if top != y {
                        rivals.push(y);
                    }
                    let mut order: Vec<usize> = (0..c).filter(|&j| j != top && j != y).collect();
                    order.sort_by(|&a, &b| s.ties[a].total_cmp(&s.ties[b]).then(a.cmp(&b)));
                    rivals.extend(
                        order
                            .into_iter()
                            .take(n_rivals - rivals.len().min(n_rivals)),
                    );
                    for &j in rivals.iter().take(n_rivals) {
                        logits[j] = peak - TIE_MARGIN - TIE_SPREAD * s.ties[j];
                    }
                }
                Regime::CalibratedReference => unreachable!(),
            }
            to_similarity(&logits, scale)
        })
        .collect();

    Built {
        reference,
        finetuned,
        labels,
    }
}

/// Realised summary of a generated dataset under its own logit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub accuracy: f64,
    pub mean_confidence: f64,
    pub contrast: f64,
}

pub fn summarize<F: Scalar>(
    dataset: &LabeledDataset<F>,
    inv_temperature: F,
) -> Result<ScenarioSummary> {
    let pred = predict(dataset.finetuned(), inv_temperature)?;
    let n = dataset.n_samples() as f64;
    let mean_confidence = pred.confidences.iter().map(|c| c.as_f64()).sum::<f64>() / n;
    Ok(ScenarioSummary {
        accuracy: pred.accuracy(dataset.labels()).as_f64(),
        mean_confidence,
        contrast: contrast(dataset.finetuned(), dataset.labels())?
            .contrast
            .as_f64(),
    })
}

fn check_realized(spec: &ScenarioSpec, s: &ScenarioSummary) -> std::result::Result<(), String> {
    let gap = s.mean_confidence - s.accuracy;
    if spec.n_samples >= 1000 && (s.accuracy - spec.target_accuracy).abs() > ACCURACY_TOLERANCE {
        return Err(format!(
            "realised accuracy {:.4} misses target {:.4}",
            s.accuracy, spec.target_accuracy
        ));
    }
    match spec.regime {
        Regime::OverconfidentInterclass if gap < REGIME_GAP || s.contrast >= 0.0 => Err(format!(
            "overconfident regime not realised: confidence - accuracy = {gap:.4}, contrast = {:.5}",
            s.contrast
        )),
        Regime::UnderconfidentIntraclass if gap > -REGIME_GAP || s.contrast <= 0.0 => Err(format!(
            "underconfident regime not realised: confidence - accuracy = {gap:.4}, contrast = {:.5}",
            s.contrast
        )),
        Regime::CalibratedReference => {
            let tol = CALIBRATED_GAP + 3.0 * (0.25 / spec.n_samples as f64).sqrt();
            if gap.abs() > tol {
                Err(format!(
                    "calibrated regime not realised: |confidence - accuracy| = {:.4} > {tol:.4}",
                    gap.abs()
                ))
            } else {
                Ok(())
            }
        }
        _ => Ok(()),
    }
}

/// Generates the scenario, re-measures it and retries with fresh draws (up
/// to five attempts) when the requested regime is not realised.
pub fn generate<F: Scalar>(spec: &ScenarioSpec) -> Result<LabeledDataset<F>> {
    spec.validate()?;
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let built = build(spec, attempt);
        let reference: Vec<Vec<F>> = built
            .reference
            .iter()
            .map(|r| r.iter().map(|&v| F::lit(v)).collect())
            .collect();
        let finetuned: Vec<Vec<F>> = built
            .finetuned
            .iter()
            .map(|r| r.iter().map(|&v| F::lit(v)).collect())
            .collect();
        let dataset = LabeledDataset::new(
            SimilarityMatrix::from_rows(&reference)?,
            SimilarityMatrix::from_rows(&finetuned)?,
            built.labels,
            Split::Test,
        )?;
        let summary = summarize(&dataset, F::lit(spec.inv_temperature))?;
        match check_realized(spec, &summary) {
            Ok(()) => return Ok(dataset),
            Err(msg) => last = msg,
        }
    }
    Err(CalibraError::Unsatisfiable(format!(
        "{last} after {MAX_ATTEMPTS} attempts"
    )))
}

/// `points` specs moving `dominant_fraction` linearly from `from` to `to`,
/// each with seed `base.seed + i`.
pub fn dominant_fraction_sweep(
    base: &ScenarioSpec,
    from: f64,
    to: f64,
    points: usize,
) -> Vec<ScenarioSpec> {
    (0..points)
        .map(|i| {
            let t = if points > 1 {
                i as f64 / (points - 1) as f64
            } else {
                0.0
            };
            ScenarioSpec {
                dominant_fraction: from + (to - from) * t,
                seed: base.seed.wrapping_add(i as u64),
                ..base.clone()
            }
        })
        .collect()
}

/// `points` copies of `base` differing only in seed.
pub fn seed_sweep(base: &ScenarioSpec, points: usize) -> Vec<ScenarioSpec> {
    (0..points)
        .map(|i| ScenarioSpec {
            seed: base.seed.wrapping_add(i as u64),
            ..base.clone()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub spec_id: String,
    pub contrast: f64,
    pub ece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStudy {
    pub points: Vec<StudyPoint>,
    pub spearman: f64,
}

impl CorrelationStudy {
    /// `contrast,ece,spec_id` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("contrast,ece,spec_id\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.contrast, p.ece, p.spec_id);
        }
        out
    }
}

/// Contrast of the fine-tuned matrix against the ECE of its softmax
/// confidences, for every scenario in the grid, plus their Spearman rank
/// correlation.
pub fn correlation_study(
    grid: &[ScenarioSpec],
    binning: BinningConfig,
) -> Result<CorrelationStudy> {
    if grid.len() < 5 {
        return Err(CalibraError::invalid(format!(
            "correlation study needs at least 5 grid points, got {}",
            grid.len()
        )));
    }
    if grid.iter().all(|s| s == &grid[0]) {
        return Err(CalibraError::invalid(
            "degenerate grid: every scenario is identical",
        ));
    }
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let ds = generate::<f64>(spec)?;
            let pred = predict(ds.finetuned(), spec.inv_temperature)?;
            let ok = pred.correctness(ds.labels());
            Ok(StudyPoint {
                spec_id: i.to_string(),
                contrast: contrast(ds.finetuned(), ds.labels())?.contrast,
                ece: ece(&pred.confidences, &ok, binning)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.contrast).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ece).collect();
    let spearman = spearman(&xs, &ys)?;
    Ok(CorrelationStudy { points, spearman })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CalibraError::invalid(
            "spearman correlation needs two equal-length series of at least 2 points",
        ));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CalibraError::invalid(
            "spearman correlation is undefined for a constant series",
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Converts a generated matrix to another scalar type.
pub fn convert_dataset<F: Scalar, G: Scalar>(ds: &LabeledDataset<F>) -> Result<LabeledDataset<G>> {
    let conv = |m: &Matrix<F>| SimilarityMatrix::new(m.convert::<G>());
    LabeledDataset::new(
        conv(ds.reference())?,
        conv(ds.finetuned())?,
        ds.labels().to_vec(),
        ds.split(),
    )
}
