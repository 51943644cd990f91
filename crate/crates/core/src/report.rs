//! Method pipelines and the tabular reports built on them.
//!
//! Text tables show error metrics, accuracy, confidence and contrast scaled
//! by 100 with two decimals. CSV and JSON keep full precision.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    fit_histogram, fit_isotonic, fit_multi_isotonic, fit_temperature_scaling, FittedCalibrator,
};
use crate::cac::{calibrate_dataset, CacParams, CacTrace};
use crate::error::{CalibraError, Result};
use crate::metrics::{
    ece, evaluate, reliability, CalibrationReport, EvalInputs, MetricsConfig, ReliabilityTable,
};
use crate::model::{contrast, predict, softmax_rows, LabeledDataset, Matrix, Prediction};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Uncalibrated fine-tuned model.
    Conf,
    Cac,
    Ts,
    Hb,
    Ir,
    Mir,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Conf,
        Method::Cac,
        Method::Ts,
        Method::Hb,
        Method::Ir,
        Method::Mir,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Conf => "conf",
            Method::Cac => "cac",
            Method::Ts => "ts",
            Method::Hb => "hb",
            Method::Ir => "ir",
            Method::Mir => "mir",
        }
    }

    /// Whether the method is fitted on a held-out labelled split.
    pub fn needs_fit(self) -> bool {
        !matches!(self, Method::Conf | Method::Cac)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CalibraError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                CalibraError::invalid(format!(
                    "unknown method `{s}` (expected one of conf, cac, ts, hb, ir, mir)"
                ))
            })
    }
}

/// Shared knobs: CAC parameters (whose inverse temperature is also the
/// model's logit scale) and metric settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig<F = f64> {
    pub cac: CacParams<F>,
    pub metrics: MetricsConfig,
}

impl<F: Scalar> Default for PipelineConfig<F> {
    fn default() -> Self {
        Self {
            cac: CacParams::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

/// Result of applying one method to a dataset.
#[derive(Debug, Clone)]
pub struct MethodOutput<F = f64> {
    pub method: Method,
    pub prediction: Prediction<F>,
    /// Logits whose unit-scale softmax gives the calibrated probabilities
    /// (`conf`, `cac` and `ts` only).
    pub logits: Option<Matrix<F>>,
    pub calibrator: Option<FittedCalibrator<F>>,
    pub trace: Option<CacTrace<F>>,
}

/// Fits a baseline on a labelled split.
pub fn fit_calibrator<F: Scalar>(
    method: Method,
    fit: &LabeledDataset<F>,
    cfg: &PipelineConfig<F>,
) -> Result<FittedCalibrator<F>> {
    let scale = cfg.cac.inv_temperature;
    let labels = fit.labels();
    match method {
        Method::Ts => fit_temperature_scaling(&fit.finetuned().logits(scale), labels),
        Method::Hb | Method::Ir => {
            let pred = predict(fit.finetuned(), scale)?;
            let ok = pred.correctness(labels);
            if method == Method::Hb {
                fit_histogram(&pred.confidences, &ok, cfg.metrics.binning.n_bins)
            } else {
                fit_isotonic(&pred.confidences, &ok)
            }
        }
        Method::Mir => fit_multi_isotonic(&softmax_rows(fit.finetuned(), scale)?, labels),
        Method::Conf | Method::Cac => Err(CalibraError::invalid(format!(
            "method `{method}` is not fitted"
        ))),
    }
}

/// Applies a method. Baselines need a calibrator fitted on another split.
pub fn apply_method<F: Scalar>(
    method: Method,
    data: &LabeledDataset<F>,
    calibrator: Option<&FittedCalibrator<F>>,
    cfg: &PipelineConfig<F>,
) -> Result<MethodOutput<F>> {
    let scale = cfg.cac.inv_temperature;
    let mut out = MethodOutput {
        method,
        prediction: Prediction {
            labels: Vec::new(),
            confidences: Vec::new(),
        },
        logits: None,
        calibrator: None,
        trace: None,
    };
    match method {
        Method::Conf => {
            let logits = data.finetuned().logits(scale);
            out.prediction = predict(&logits, F::one())?;
            out.logits = Some(logits);
        }
        Method::Cac => {
            let (logits, trace) = calibrate_dataset(data, &cfg.cac)?;
            out.prediction = predict(&logits, F::one())?;
            out.logits = Some(logits);
            out.trace = Some(trace);
        }
        _ => {
            let cal = calibrator.ok_or_else(|| {
                CalibraError::invalid(format!("method `{method}` needs a fitted calibrator"))
            })?;
            if cal.kind().as_str() != baseline_kind(method) {
                return Err(CalibraError::invalid(format!(
                    "calibrator of kind `{}` cannot run method `{method}`",
                    cal.kind()
                )));
            }
            let logits = data.finetuned().logits(scale);
            out.prediction = cal.predict(&logits)?;
            if let FittedCalibrator::Temperature { temperature } = cal {
                out.logits = Some(logits.map(|x| x / *temperature));
            }
            out.calibrator = Some(cal.clone());
        }
    }
    Ok(out)
}

fn baseline_kind(method: Method) -> &'static str {
    match method {
        Method::Ts => "temperature",
        Method::Hb => "histogram",
        Method::Ir => "isotonic",
        Method::Mir => "multi-isotonic",
        Method::Conf | Method::Cac => "",
    }
}

/// Fails unless both predictions pick the same class on every row.
pub fn check_argmax_preserved<F: Scalar>(
    before: &Prediction<F>,
    after: &Prediction<F>,
) -> Result<()> {
    match before
        .labels
        .iter()
        .zip(&after.labels)
        .position(|(a, b)| a != b)
    {
        Some(i) => Err(CalibraError::invalid(format!(
            "calibration changed the predicted class of sample {i} ({} -> {})",
            before.labels[i], after.labels[i]
        ))),
        None => Ok(()),
    }
}

/// Metrics of an output on its dataset.
pub fn report_for<F: Scalar>(
    output: &MethodOutput<F>,
    data: &LabeledDataset<F>,
    cfg: &PipelineConfig<F>,
) -> Result<CalibrationReport> {
    let ok = output.prediction.correctness(data.labels());
    let inputs = EvalInputs {
        confidences: &output.prediction.confidences,
        correctness: &ok,
        features: data.proximity_features(),
        contrast: contrast(data.finetuned(), data.labels())?.contrast,
    };
    evaluate(
        output.method.as_str(),
        data.split().as_str(),
        &inputs,
        &cfg.metrics,
    )
}

/// Fits (when needed), applies and evaluates one method.
pub fn run_method<F: Scalar>(
    method: Method,
    data: &LabeledDataset<F>,
    fit: Option<&LabeledDataset<F>>,
    cfg: &PipelineConfig<F>,
) -> Result<(CalibrationReport, MethodOutput<F>)> {
    let calibrator = match (method.needs_fit(), fit) {
        (true, Some(fit)) => Some(fit_calibrator(method, fit, cfg)?),
        (true, None) => {
            return Err(CalibraError::invalid(format!(
                "method `{method}` needs a labelled fit split"
            )))
        }
        (false, Some(_)) if method == Method::Cac => {
            return Err(CalibraError::invalid(
                "cac is training-free and takes no fit split",
            ))
        }
        (false, _) => None,
    };
    let output = apply_method(method, data, calibrator.as_ref(), cfg)?;
    let report = report_for(&output, data, cfg)?;
    Ok((report, output))
}

/// Reliability table of a method's confidences.
pub fn reliability_for<F: Scalar>(
    method: Method,
    data: &LabeledDataset<F>,
    fit: Option<&LabeledDataset<F>>,
    cfg: &PipelineConfig<F>,
) -> Result<ReliabilityTable<F>> {
    let (_, output) = run_method(method, data, fit, cfg)?;
    let ok = output.prediction.correctness(data.labels());
    reliability(&output.prediction.confidences, &ok, cfg.metrics.binning)
}

fn hundredths(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// Left-aligned first column, right-aligned others, two-space gutters.
fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (j, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if j == 0 {
                s.push_str(&format!("{cell:<w$}"));
            } else {
                s.push_str(&format!("  {cell:>w$}"));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(header);
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

const COMPARE_COLUMNS: [&str; 9] = [
    "method",
    "split",
    "ece",
    "ace",
    "mce",
    "piece",
    "accuracy",
    "mean_confidence",
    "contrast",
];

/// Reports for several methods, one row per (method, split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CalibrationReport>,
}

impl CompareReport {
    pub fn to_text(&self) -> String {
        let header: Vec<String> = [
            "Method", "Split", "ECE", "ACE", "MCE", "PIECE", "Acc", "Conf", "Contrast",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.method.clone(),
                    r.split.clone(),
                    hundredths(r.ece),
                    hundredths(r.ace),
                    hundredths(r.mce),
                    r.piece.map(hundredths).unwrap_or_else(|| "-".into()),
                    hundredths(r.accuracy),
                    hundredths(r.mean_confidence),
                    hundredths(r.contrast),
                ]
            })
            .collect();
        let mut out = String::from("values x 10^-2\n");
        out.push_str(&render_table(&header, &rows));
        out
    }

    /// Full-precision CSV; an absent PIECE is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = COMPARE_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let piece = r.piece.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.method,
                r.split,
                r.ece,
                r.ace,
                r.mce,
                piece,
                r.accuracy,
                r.mean_confidence,
                r.contrast
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| CalibraError::invalid(format!("compare CSV header: {e}")))?;
        if header.iter().ne(COMPARE_COLUMNS) {
            return Err(CalibraError::invalid(format!(
                "compare CSV header must be `{}`",
                COMPARE_COLUMNS.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec =
                rec.map_err(|e| CalibraError::invalid(format!("compare CSV row {i}: {e}")))?;
            let num = |j: usize| -> Result<f64> {
                rec[j].parse().map_err(|_| {
                    CalibraError::invalid(format!(
                        "compare CSV row {i}: bad {} value `{}`",
                        COMPARE_COLUMNS[j], &rec[j]
                    ))
                })
            };
            rows.push(CalibrationReport {
                method: rec[0].to_string(),
                split: rec[1].to_string(),
                ece: num(2)?,
                ace: num(3)?,
                mce: num(4)?,
                piece: if rec[5].is_empty() {
                    None
                } else {
                    Some(num(5)?)
                },
                accuracy: num(6)?,
                mean_confidence: num(7)?,
                contrast: num(8)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Evaluates every method on one dataset, in the given order. Methods are
/// computed in parallel.
pub fn compare<F: Scalar>(
    data: &LabeledDataset<F>,
    methods: &[Method],
    fit: Option<&LabeledDataset<F>>,
    cfg: &PipelineConfig<F>,
) -> Result<CompareReport> {
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(CalibraError::invalid(format!("method `{m}` listed twice")));
        }
    }
    let rows = methods
        .par_iter()
        .map(|&m| {
            let fit = if m.needs_fit() { fit } else { None };
            run_method(m, data, fit, cfg).map(|(r, _)| r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    K,
    Alpha,
    L1,
    L2,
    /// Mixed `l1:<v>` / `l2:<v>` values.
    Thresholds,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::Alpha => "alpha",
            SweepParam::L1 => "l1",
            SweepParam::L2 => "l2",
            SweepParam::Thresholds => "thresholds",
        }
    }
}

impl FromStr for SweepParam {
    type Err = CalibraError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepParam::K),
            "alpha" => Ok(SweepParam::Alpha),
            "l1" => Ok(SweepParam::L1),
            "l2" => Ok(SweepParam::L2),
            "thresholds" => Ok(SweepParam::Thresholds),
            other => Err(CalibraError::invalid(format!(
                "unknown sweep parameter `{other}` (expected k, alpha, l1, l2 or thresholds)"
            ))),
        }
    }
}

/// One swept setting: a single CAC parameter and its value, as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: SweepParam,
    pub value: f64,
    pub label: String,
}

impl SweepPoint {
    fn apply<F: Scalar>(&self, base: &CacParams<F>) -> CacParams<F> {
        let v = F::lit(self.value);
        let mut p = *base;
        match self.param {
            SweepParam::K => p.k = v,
            SweepParam::Alpha => p.alpha = v,
            SweepParam::L1 => p.lambda1 = v,
            SweepParam::L2 => p.lambda2 = v,
            SweepParam::Thresholds => unreachable!("points carry a concrete parameter"),
        }
        p
    }
}

/// Parses sweep values. Plain numbers for `k`, `alpha`, `l1`, `l2`;
/// `l1:<v>` or `l2:<v>` entries for `thresholds`.
pub fn parse_sweep_values(param: SweepParam, values: &[String]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(CalibraError::invalid("sweep needs at least one value"));
    }
    values
        .iter()
        .map(|raw| {
            let raw = raw.trim();
            let (p, text) = match param {
                SweepParam::Thresholds => {
                    let (name, v) = raw.split_once(':').ok_or_else(|| {
                        CalibraError::invalid(format!(
                            "threshold value `{raw}` must look like l1:0.85 or l2:1.05"
                        ))
                    })?;
                    let p = match name {
                        "l1" => SweepParam::L1,
                        "l2" => SweepParam::L2,
                        _ => {
                            return Err(CalibraError::invalid(format!(
                                "threshold value `{raw}` must start with l1: or l2:"
                            )))
                        }
                    };
                    (p, v)
                }
                other => (other, raw),
            };
            let value: f64 = text
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| CalibraError::invalid(format!("bad sweep value `{raw}`")))?;
            Ok(SweepPoint {
                param: p,
                value,
                label: text.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dataset: String,
    /// ECE of the uncalibrated model (absent for threshold sweeps).
    pub conf: Option<f64>,
    /// ECE per swept value, in flag order.
    pub values: Vec<f64>,
    /// ECE under default parameters (threshold sweeps only).
    pub cac: Option<f64>,
}

/// ECE per dataset and swept value, laid out like the ablation tables:
/// `Method | Conf | v1 … vn` for a single parameter and
/// `Method | l1=… | l2=… | CAC` for thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_text(&self) -> String {
        let thresholds = self.param == SweepParam::Thresholds;
        let mut header = vec!["Method".to_string()];
        if !thresholds {
            header.push("Conf".into());
        }
        for p in &self.points {
            header.push(if thresholds {
                format!("{}={}", p.param.as_str(), p.label)
            } else {
                p.label.clone()
            });
        }
        if thresholds {
            header.push("CAC".into());
        }
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.dataset.clone()];
                cells.extend(r.conf.map(hundredths));
                cells.extend(r.values.iter().map(|&v| hundredths(v)));
                cells.extend(r.cac.map(hundredths));
                cells
            })
            .collect();
        let mut out = format!("ECE x 10^-2, sweep over {}\n", self.param.as_str());
        out.push_str(&render_table(&header, &rows));
        out
    }

    /// Long format `param,value,dataset,ece`. Reference columns appear as
    /// `conf` and `cac` with an empty value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,value,dataset,ece\n");
        for r in &self.rows {
            if let Some(c) = r.conf {
                out.push_str(&format!("conf,,{},{}\n", r.dataset, c));
            }
            for (p, v) in self.points.iter().zip(&r.values) {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    p.param.as_str(),
                    p.label,
                    r.dataset,
                    v
                ));
            }
            if let Some(c) = r.cac {
                out.push_str(&format!("cac,,{},{}\n", r.dataset, c));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serialises")
    }
}

fn cac_ece<F: Scalar>(
    data: &LabeledDataset<F>,
    params: &CacParams<F>,
    cfg: &PipelineConfig<F>,
) -> Result<f64> {
    let run = PipelineConfig {
        cac: *params,
        ..*cfg
    };
    let out = apply_method(Method::Cac, data, None, &run)?;
    let ok = out.prediction.correctness(data.labels());
    Ok(ece(&out.prediction.confidences, &ok, cfg.metrics.binning)?.as_f64())
}

/// Runs a CAC ablation over named datasets. Every other parameter stays at
/// `cfg.cac`. Cells are computed in parallel; output order follows the
/// inputs.
pub fn sweep<F: Scalar>(
    datasets: &[(String, LabeledDataset<F>)],
    param: SweepParam,
    points: &[SweepPoint],
    cfg: &PipelineConfig<F>,
) -> Result<SweepTable> {
    if points.is_empty() {
        return Err(CalibraError::invalid("sweep needs at least one value"));
    }
    let thresholds = param == SweepParam::Thresholds;
    let params: Vec<CacParams<F>> = points.iter().map(|p| p.apply(&cfg.cac)).collect();
    for (p, pt) in params.iter().zip(points) {
        p.validate().map_err(|e| {
            CalibraError::invalid(format!(
                "sweep value {}={}: {e}",
                pt.param.as_str(),
                pt.label
            ))
        })?;
    }
    let rows = datasets
        .par_iter()
        .map(|(name, data)| {
            let values = params
                .par_iter()
                .map(|p| cac_ece(data, p, cfg))
                .collect::<Result<Vec<_>>>()?;
            let (conf, cac) = if thresholds {
                (None, Some(cac_ece(data, &cfg.cac, cfg)?))
            } else {
                let out = apply_method(Method::Conf, data, None, cfg)?;
                let ok = out.prediction.correctness(data.labels());
                let e = ece(&out.prediction.confidences, &ok, cfg.metrics.binning)?.as_f64();
                (Some(e), None)
            };
            Ok(SweepRow {
                dataset: name.clone(),
                conf,
                values,
                cac,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        param,
        points: points.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, Regime, ScenarioSpec};

    fn dataset(seed: u64) -> LabeledDataset<f64> {
        generate(&ScenarioSpec::new(
            Regime::OverconfidentInterclass,
            400,
            10,
            seed,
        ))
        .unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("platt".parse::<Method>().is_err());
    }

    #[test]
    fn fit_rules() {
        let data = dataset(1);
        let cfg = PipelineConfig::default();
        assert!(run_method(Method::Ts, &data, None, &cfg).is_err());
        assert!(run_method(Method::Cac, &data, Some(&data), &cfg).is_err());
        assert!(run_method(Method::Cac, &data, None, &cfg).is_ok());
    }

    #[test]
    fn every_method_keeps_predicted_labels() {
        let data = dataset(2);
        let fit = dataset(3);
        let cfg = PipelineConfig::default();
        let base = run_method(Method::Conf, &data, None, &cfg).unwrap().1;
        for m in Method::ALL {
            let (report, out) = run_method(m, &data, m.needs_fit().then_some(&fit), &cfg).unwrap();
            check_argmax_preserved(&base.prediction, &out.prediction).unwrap();
            assert_eq!(report.method, m.as_str());
        }
    }

    #[test]
    fn compare_csv_round_trip() {
        let data = dataset(4);
        let fit = dataset(5);
        let report = compare(&data, &Method::ALL, Some(&fit), &PipelineConfig::default()).unwrap();
        assert_eq!(report.rows.len(), 6);
        let back = CompareReport::from_csv(&report.to_csv()).unwrap();
        assert_eq!(back, report);
        assert!(report.to_text().contains("values x 10^-2"));
    }

    #[test]
    fn compare_rejects_duplicate_methods() {
        let data = dataset(6);
        assert!(compare(
            &data,
            &[Method::Conf, Method::Conf],
            None,
            &PipelineConfig::default()
        )
        .is_err());
    }

    #[test]
    fn sweep_values_parse() {
        let pts = parse_sweep_values(SweepParam::K, &["10".into(), "15".into()]).unwrap();
        assert_eq!(pts[1].value, 15.0);
        let pts = parse_sweep_values(
            SweepParam::Thresholds,
            &["l1:0.85".into(), "l2:1.05".into()],
        )
        .unwrap();
        assert_eq!(
            (pts[0].param, pts[1].param),
            (SweepParam::L1, SweepParam::L2)
        );
        assert!(parse_sweep_values(SweepParam::K, &[]).is_err());
        assert!(parse_sweep_values(SweepParam::Thresholds, &["0.85".into()]).is_err());
        assert!(parse_sweep_values(SweepParam::Alpha, &["nan".into()]).is_err());
    }

    #[test]
    fn sweep_layouts() {
        let data = vec![("a".to_string(), dataset(7)), ("b".to_string(), dataset(8))];
        let cfg = PipelineConfig::default();
        let values: Vec<String> = ["10", "15", "20", "25"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let pts = parse_sweep_values(SweepParam::K, &values).unwrap();
        let table = sweep(&data, SweepParam::K, &pts, &cfg).unwrap();
        let text = table.to_text();
        let header = text.lines().nth(1).unwrap();
        let cols: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(cols, ["Method", "Conf", "10", "15", "20", "25"]);
        assert_eq!(text.lines().count(), 5);
        assert_eq!(table.to_csv().lines().count(), 1 + 2 * 5);

        let values: Vec<String> = ["l1:0.85", "l1:0.95", "l2:0.95", "l2:1.05"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let pts = parse_sweep_values(SweepParam::Thresholds, &values).unwrap();
        let table = sweep(&data, SweepParam::Thresholds, &pts, &cfg).unwrap();
        let header = table.to_text().lines().nth(1).unwrap().to_string();
        let cols: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(
            cols,
            ["Method", "l1=0.85", "l1=0.95", "l2=0.95", "l2=1.05", "CAC"]
        );
    }

    #[test]
    fn sweep_rejects_invalid_thresholds() {
        let data = vec![("a".to_string(), dataset(9))];
        let pts = parse_sweep_values(SweepParam::L1, &["1.5".into()]).unwrap();
        assert!(sweep(&data, SweepParam::L1, &pts, &PipelineConfig::default()).is_err());
    }
}
