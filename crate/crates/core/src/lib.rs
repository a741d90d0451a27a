//! Probabilistic classification with Beta-distributed class probabilities whose
//! pseudo-counts are spread across attribute space by RBF-correlated random fields.

pub mod classifier;
pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod linalg;
pub mod nataf;
pub mod special;

pub use classifier::{
    fit, fit_binary, fit_multiclass, log_likelihood, predict_multiclass, BinaryModel, FitConfig,
    Model, ModelFile, MulticlassModel, PredictiveResult,
};
pub use data::{impute_means, load_csv, simulate, true_metrics, CsvOptions, Dataset, SimulationSpec};
pub use error::{Error, Result};
pub use evaluation::{ccr, cross_validate, pcc, CvConfig, CvReport, PccMode};
pub use kernel::{propagate_counts, CountField, LengthScales, QuerySet};
pub use nataf::{nataf_beta_log_pdf, sample_field, NatafBetaField};
