//! Confidence calibration for fine-tuned contrastive image–text classifiers.
//!
//! The crate works on cosine-similarity matrices from a reference
//! (zero-shot) model and a fine-tuned model, and provides:
//!
//! * [`cac`]: contrast-aware calibration, a label-free per-sample logit
//!   rescaling driven by the disagreement between the two models;
//! * [`metrics`]: ECE, ACE, MCE and the proximity-informed PIECE;
//! * [`baselines`]: temperature scaling, histogram binning, isotonic and
//!   multi-class isotonic regression;
//! * [`synth`]: seeded scenarios for each miscalibration regime;
//! * [`io`]: the binary matrix format, dataset manifests and CSV.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod baselines;
pub mod cac;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod report;
mod scalar;
pub mod synth;

pub use baselines::{CalibratorKind, FittedCalibrator};
pub use cac::{calibrate, calibrate_dataset, CacParams, CacTrace};
pub use error::{CalibraError, Result};
pub use metrics::{BinningConfig, BinningScheme, CalibrationReport, MetricsConfig, PieceConfig};
pub use model::{
    contrast, predict, softmax, LabeledDataset, Matrix, Prediction, ProbVector, SimilarityMatrix,
    Split,
};
pub use scalar::Scalar;
pub use synth::{Regime, ScenarioSpec};

pub type MatrixF32 = Matrix<f32>;
pub type MatrixF64 = Matrix<f64>;
pub type SimilarityMatrixF32 = SimilarityMatrix<f32>;
pub type SimilarityMatrixF64 = SimilarityMatrix<f64>;
pub type LabeledDatasetF32 = LabeledDataset<f32>;
pub type LabeledDatasetF64 = LabeledDataset<f64>;
pub type CacParamsF32 = CacParams<f32>;
pub type CacParamsF64 = CacParams<f64>;
