//! Length-scale fitting and posterior predictive classification, binary and one-vs-rest.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{
    count_observations, leave_one_out_counts, propagate_counts, CountField, LengthScales, QuerySet,
    DEFAULT_PRIOR_MEAN,
};
use crate::nataf::NatafBetaField;

/// Smallest step (in log-scale units) the line search will try before declaring convergence.
const MIN_STEP: f64 = 1e-6;
/// Log length scales are kept inside ±this bound.
const LOG_SCALE_BOUND: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// `None` starts from the per-dimension mean of the training attributes.
    pub start: Option<LengthScales>,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub wall_clock_limit_secs: f64,
    /// Central-difference step in log-scale space.
    pub fd_step: f64,
    pub prior_mean: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            start: None,
            rel_tol: 1e-3,
            max_iter: 100,
            wall_clock_limit_secs: 7200.0,
            fd_step: 1e-3,
            prior_mean: DEFAULT_PRIOR_MEAN,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rel_tol) {
            return Err(Error::domain("rel_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::domain("max_iter must be positive"));
        }
        if !(self.wall_clock_limit_secs > 0.0) {
            return Err(Error::domain("wall-clock limit must be positive"));
        }
        if !positive(self.fd_step) {
            return Err(Error::domain("fd_step must be positive"));
        }
        if !positive(self.prior_mean) {
            return Err(Error::domain("prior mean must be positive"));
        }
        Ok(())
    }

    fn wall_clock_limit(&self) -> Duration {
        Duration::try_from_secs_f64(self.wall_clock_limit_secs).unwrap_or(Duration::MAX)
    }
}

/// One evaluated candidate during fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStep {
    pub iteration: usize,
    pub scales: Vec<f64>,
    /// Mean log-likelihood per observation.
    pub objective: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    StepUnderflow,
    FlatGradient,
    MaxIter,
    WallClock,
}

/// Per-observation log-likelihood factors under leave-own-count-out propagation.
///
/// Observation `i` contributes ln B(A′+c, B′+1−c) − ln B(A′, B′) with A′, B′ the counts
/// propagated from every other observation plus `prior_mean`. By the Gamma recurrence
/// that is ln(A′ / (A′ + B′)) for class 1 and ln(B′ / (A′ + B′)) for class 0.
pub fn log_likelihood_terms<P: AsRef<[f64]>>(
    scales: &LengthScales,
    points: &[P],
    is_class1: &[bool],
    prior_mean: f64,
) -> Result<Vec<f64>> {
    let (a, b) = leave_one_out_counts(points, is_class1, scales, prior_mean)?;
    Ok(a.iter()
        .zip(&b)
        .zip(is_class1)
        .map(|((&a, &b), &c)| if c { (a / (a + b)).ln() } else { (b / (a + b)).ln() })
        .collect())
}

/// Sum of [`log_likelihood_terms`]; 0 for an empty dataset.
pub fn log_likelihood<P: AsRef<[f64]>>(
    scales: &LengthScales,
    points: &[P],
    is_class1: &[bool],
    prior_mean: f64,
) -> Result<f64> {
    Ok(log_likelihood_terms(scales, points, is_class1, prior_mean)?
        .iter()
        .sum())
}

fn mean_objective(log_scales: &[f64], points: &[&[f64]], labels: &[bool], prior_mean: f64) -> Result<f64> {
    let scales = LengthScales::from_log(log_scales)?;
    Ok(log_likelihood(&scales, points, labels, prior_mean)? / points.len() as f64)
}

/// Central finite-difference gradient of the mean log-likelihood in log-scale space.
pub fn objective_gradient<P: AsRef<[f64]>>(
    log_scales: &[f64],
    points: &[P],
    is_class1: &[bool],
    prior_mean: f64,
    step: f64,
) -> Result<Vec<f64>> {
    let refs: Vec<&[f64]> = points.iter().map(|p| p.as_ref()).collect();
    gradient(log_scales, &refs, is_class1, prior_mean, step)
}

fn gradient(theta: &[f64], points: &[&[f64]], labels: &[bool], prior_mean: f64, h: f64) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(theta.len());
    let mut probe = theta.to_vec();
    for k in 0..theta.len() {
        probe[k] = theta[k] + h;
        let up = mean_objective(&probe, points, labels, prior_mean)?;
        probe[k] = theta[k] - h;
        let down = mean_objective(&probe, points, labels, prior_mean)?;
        probe[k] = theta[k];
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

/// Start point: per-dimension mean attribute value, falling back to mean |x|, then 1.
pub fn default_start<P: AsRef<[f64]>>(points: &[P]) -> Result<LengthScales> {
    let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
    if dim == 0 {
        return Err(Error::Empty("no training points".into()));
    }
    let n = points.len() as f64;
    let values = (0..dim)
        .map(|k| {
            let mean = points.iter().map(|p| p.as_ref()[k]).sum::<f64>() / n;
            let mean_abs = points.iter().map(|p| p.as_ref()[k].abs()).sum::<f64>() / n;
            if mean > 0.0 && mean.is_finite() {
                mean
            } else if mean_abs > 0.0 && mean_abs.is_finite() {
                mean_abs
            } else {
                1.0
            }
        })
        .collect();
    LengthScales::new(values)
}

/// Trained binary classifier: training counts plus fitted shared length scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    /// Distinct training attribute vectors.
    pub training_points: QuerySet,
    /// Counts at `training_points`, propagated with `map_scales`.
    pub counts: CountField,
    pub map_scales: LengthScales,
    pub prior_mean: f64,
    pub fit_trace: Vec<FitStep>,
    pub stop_reason: StopReason,
    pub config: FitConfig,
}

/// Posterior predictive over a query set.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveResult {
    pub query: QuerySet,
    /// E[A″] / (E[A″] + E[B″]).
    pub prob_class1: Vec<f64>,
    pub counts: CountField,
    /// Independent Beta(E[A″], E[B″]) marginals.
    pub field: NatafBetaField,
}

impl BinaryModel {
    /// Builds a model at fixed scales without fitting.
    pub fn with_scales(
        points: &QuerySet,
        is_class1: &[bool],
        scales: LengthScales,
        prior_mean: f64,
    ) -> Result<Self> {
        let config = FitConfig {
            start: Some(scales.clone()),
            prior_mean,
            ..FitConfig::default()
        };
        config.validate()?;
        Self::assemble(points, is_class1, scales, Vec::new(), StopReason::MaxIter, config)
    }

    fn assemble(
        points: &QuerySet,
        is_class1: &[bool],
        scales: LengthScales,
        fit_trace: Vec<FitStep>,
        stop_reason: StopReason,
        config: FitConfig,
    ) -> Result<Self> {
        if points.dim() != scales.dim() {
            return Err(Error::DimensionMismatch {
                expected: points.dim(),
                got: scales.dim(),
            });
        }
        let unique = QuerySet::new(points.dim(), Vec::new())?.union(points)?;
        let rows: Vec<&[f64]> = points.iter().collect();
        let (a_hat, b_hat) = count_observations(&rows, is_class1, &unique)?;
        let counts = propagate_counts(
            &a_hat,
            &b_hat,
            &unique,
            &unique,
            &scales,
            &scales,
            config.prior_mean,
        )?;
        Ok(Self {
            training_points: unique,
            counts,
            map_scales: scales,
            prior_mean: config.prior_mean,
            fit_trace,
            stop_reason,
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.training_points.dim()
    }

    /// Same scales and trace with the two classes exchanged.
    pub fn swapped(&self) -> Self {
        let c = &self.counts;
        Self {
            counts: CountField {
                a_hat: c.b_hat.clone(),
                b_hat: c.a_hat.clone(),
                a_post: c.b_post.clone(),
                b_post: c.a_post.clone(),
                a_prior_prop: c.b_prior_prop.clone(),
                b_prior_prop: c.a_prior_prop.clone(),
            },
            ..self.clone()
        }
    }

    /// Best objective recorded during fitting, if any.
    pub fn best_objective(&self) -> Option<f64> {
        self.fit_trace
            .iter()
            .filter(|s| s.accepted)
            .map(|s| s.objective)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    pub fn predict(&self, query: &QuerySet) -> Result<PredictiveResult> {
        if query.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: query.dim(),
            });
        }
        let counts = propagate_counts(
            &self.counts.a_hat,
            &self.counts.b_hat,
            &self.training_points,
            query,
            &self.map_scales,
            &self.map_scales,
            self.prior_mean,
        )?;
        let prob_class1 = counts.predictive();
        let field = NatafBetaField::independent(counts.a_post.clone(), counts.b_post.clone())?;
        Ok(PredictiveResult {
            query: query.clone(),
            prob_class1,
            counts,
            field,
        })
    }
}

/// Fits a binary model on `points` with 0/1 labels.
pub fn fit_binary(points: &QuerySet, is_class1: &[bool], config: &FitConfig) -> Result<BinaryModel> {
    config.validate()?;
    if points.len() != is_class1.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: is_class1.len(),
        });
    }
    let ones = is_class1.iter().filter(|c| **c).count();
    if ones == 0 || ones == is_class1.len() {
        return Err(Error::Unfittable(
            "training data must contain observations of both classes".into(),
        ));
    }
    let rows: Vec<&[f64]> = points.iter().collect();
    let start = match &config.start {
        Some(s) => {
            if s.dim() != points.dim() {
                return Err(Error::DimensionMismatch {
                    expected: points.dim(),
                    got: s.dim(),
                });
            }
            s.clone()
        }
        None => default_start(&rows)?,
    };
    let (theta, trace, stop) = ascend(start.to_log(), &rows, is_class1, config)?;
    let scales = LengthScales::from_log(&theta)?;
    BinaryModel::assemble(points, is_class1, scales, trace, stop, config.clone())
}

/// Normalized-gradient ascent with step doubling on success and halving on failure.
fn ascend(
    mut theta: Vec<f64>,
    points: &[&[f64]],
    labels: &[bool],
    config: &FitConfig,
) -> Result<(Vec<f64>, Vec<FitStep>, StopReason)> {
    let started = Instant::now();
    let limit = config.wall_clock_limit();
    let eval = |t: &[f64]| mean_objective(t, points, labels, config.prior_mean);
    let record = |iteration, t: &[f64], objective, accepted| FitStep {
        iteration,
        scales: t.iter().map(|v| v.exp()).collect(),
        objective,
        accepted,
    };

    let mut f = eval(&theta)?;
    let mut trace = vec![record(0, &theta, f, true)];
    let mut history = vec![f];
    let mut step = 1.0;
    let mut stop = StopReason::MaxIter;
    'outer: for iteration in 1..=config.max_iter {
        if started.elapsed() >= limit {
            stop = StopReason::WallClock;
            break;
        }
        let g = gradient(&theta, points, labels, config.prior_mean, config.fd_step)?;
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            stop = StopReason::FlatGradient;
            break;
        }
        loop {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&g)
                .map(|(t, gk)| (t + step * gk / norm).clamp(-LOG_SCALE_BOUND, LOG_SCALE_BOUND))
                .collect();
            let fc = eval(&candidate)?;
            if fc > f {
                trace.push(record(iteration, &candidate, fc, true));
                theta = candidate;
                f = fc;
                step *= 2.0;
                break;
            }
            trace.push(record(iteration, &candidate, fc, false));
            step *= 0.5;
            if step < MIN_STEP {
                stop = StopReason::StepUnderflow;
                break 'outer;
            }
            if started.elapsed() >= limit {
                stop = StopReason::WallClock;
                break 'outer;
            }
        }
        history.push(f);
        if history.len() >= 10 {
            let tail = &history[history.len() - 10..];
            let mean10 = tail.iter().sum::<f64>() / 10.0;
            let mean5 = tail[5..].iter().sum::<f64>() / 5.0;
            if (mean5 - mean10).abs() < config.rel_tol * mean10.abs() {
                stop = StopReason::Converged;
                break;
            }
        }
    }
    log::debug!(
        "fit stopped ({stop:?}) after {} evaluations, objective {f}",
        trace.len()
    );
    Ok((theta, trace, stop))
}

/// Fits a binary dataset whose class id 1 is the positive class.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<BinaryModel> {
    if data.n_classes() != 2 {
        return Err(Error::domain(format!(
            "binary fit needs 2 classes, dataset has {}",
            data.n_classes()
        )));
    }
    fit_binary(&data.query_set()?, &data.one_vs_rest_labels(1), config)
}

/// Record of a class left out of one-vs-rest training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedClass {
    pub class: usize,
    pub reason: String,
}

/// One binary model per class, each treating that class as 1 and the rest as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub class_names: Vec<String>,
    /// `models[c]` is `None` for skipped classes.
    pub models: Vec<Option<BinaryModel>>,
    pub skipped: Vec<SkippedClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassPrediction {
    /// `probs[j][c]`: one-vs-rest predictive of class `c` at query `j`; 0 for skipped classes.
    pub probs: Vec<Vec<f64>>,
    /// Rows of `probs` rescaled to sum to 1.
    pub normalized: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl MulticlassPrediction {
    /// Unnormalized predictive of the chosen class at each query point.
    pub fn chosen_probs(&self) -> Vec<f64> {
        self.probs
            .iter()
            .zip(&self.labels)
            .map(|(row, &c)| row[c])
            .collect()
    }
}

impl MulticlassModel {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn dim(&self) -> Option<usize> {
        self.models.iter().flatten().next().map(|m| m.dim())
    }
}

/// One-vs-rest training. Classes absent from `data` are skipped with a warning.
///
/// With exactly two populated classes a single fit is made and the second model is
/// its label swap; the objective is symmetric under the swap, so both would land on
/// the same scales anyway.
pub fn fit_multiclass(data: &Dataset, config: &FitConfig) -> Result<MulticlassModel> {
    let counts = data.class_counts();
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::Unfittable(format!(
            "need at least 2 populated classes, found {}",
            present.len()
        )));
    }
    let points = data.query_set()?;
    let mut skipped = Vec::new();
    for (c, name) in data.class_names().iter().enumerate() {
        if counts[c] == 0 {
            log::warn!("class `{name}` has no training observations; skipped");
            skipped.push(SkippedClass {
                class: c,
                reason: "no training observations".into(),
            });
        }
    }
    let mut models: Vec<Option<BinaryModel>> = vec![None; counts.len()];
    if present.len() == 2 {
        let model = fit_binary(&points, &data.one_vs_rest_labels(present[1]), config)?;
        models[present[0]] = Some(model.swapped());
        models[present[1]] = Some(model);
    } else {
        let fitted: Vec<Result<BinaryModel>> = present
            .par_iter()
            .map(|&c| fit_binary(&points, &data.one_vs_rest_labels(c), config))
            .collect();
        for (&c, m) in present.iter().zip(fitted) {
            models[c] = Some(m?);
        }
    }
    Ok(MulticlassModel {
        class_names: data.class_names().to_vec(),
        models,
        skipped,
    })
}

/// Argmax over one-vs-rest predictives; ties go to the lowest class index.
pub fn predict_multiclass(model: &MulticlassModel, query: &QuerySet) -> Result<MulticlassPrediction> {
    let k = model.n_classes();
    let mut probs = vec![vec![0.0; k]; query.len()];
    for (c, m) in model.models.iter().enumerate() {
        if let Some(m) = m {
            let pred = m.predict(query)?;
            for (row, p) in probs.iter_mut().zip(pred.prob_class1) {
                row[c] = p;
            }
        }
    }
    let labels = probs
        .iter()
        .map(|row| {
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    let normalized = probs
        .iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.iter().map(|p| if s > 0.0 { p / s } else { 1.0 / k as f64 }).collect()
        })
        .collect();
    Ok(MulticlassPrediction {
        probs,
        normalized,
        labels,
    })
}

pub const MODEL_FORMAT: &str = "natafbeta-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Binary(BinaryModel),
    Multiclass(MulticlassModel),
}

impl Model {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Model::Binary(m) => Some(m.dim()),
            Model::Multiclass(m) => m.dim(),
        }
    }
}

/// Versioned on-disk wrapper around a [`Model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub model: Model,
}

impl ModelFile {
    pub fn new(model: Model) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Serialization(format!(
                "not a model file (format `{}`)",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        Ok(file)
    }
}
