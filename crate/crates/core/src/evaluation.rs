//! Classification metrics and k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{fit_multiclass, predict_multiclass, FitConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Fraction of predictions equal to the true labels.
pub fn ccr(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::domain("ccr of an empty set"));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Binary decisions with the strict rule p > 0.5 → class 1.
pub fn binary_decisions(prob_class1: &[f64]) -> Vec<usize> {
    prob_class1.iter().map(|&p| usize::from(p > 0.5)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PccMode {
    #[default]
    Geometric,
    Arithmetic,
}

impl std::str::FromStr for PccMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(PccMode::Geometric),
            "arithmetic" => Ok(PccMode::Arithmetic),
            other => Err(Error::domain(format!("unknown pcc mode `{other}`"))),
        }
    }
}

/// Aggregate probability the model assigns to its chosen class.
///
/// Geometric mode returns 0 as soon as any probability is 0.
pub fn pcc(chosen_probs: &[f64], mode: PccMode) -> Result<f64> {
    if chosen_probs.is_empty() {
        return Err(Error::domain("pcc of an empty set"));
    }
    if let Some(bad) = chosen_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!("probability {bad} outside [0, 1]")));
    }
    let n = chosen_probs.len() as f64;
    Ok(match mode {
        PccMode::Arithmetic => chosen_probs.iter().sum::<f64>() / n,
        PccMode::Geometric => {
            if chosen_probs.iter().any(|&p| p == 0.0) {
                0.0
            } else {
                (chosen_probs.iter().map(|p| p.ln()).sum::<f64>() / n).exp()
            }
        }
    })
}

/// Fold id of every row. Shuffled with `seed`; fold sizes differ by at most one, the
/// larger folds first. Stratified assignment deals each class round-robin.
pub fn assign_folds(labels: &[usize], k: usize, seed: u64, stratify: bool) -> Result<Vec<usize>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::domain("need at least 2 folds"));
    }
    if k > n {
        return Err(Error::domain(format!("{k} folds requested for {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut folds = vec![0; n];
    if stratify {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut next = 0;
        for c in 0..n_classes {
            for &i in order.iter().filter(|&&i| labels[i] == c) {
                folds[i] = next;
                next = (next + 1) % k;
            }
        }
    } else {
        let (base, extra) = (n / k, n % k);
        let mut pos = 0;
        for f in 0..k {
            let size = base + usize::from(f < extra);
            for &i in &order[pos..pos + size] {
                folds[i] = f;
            }
            pos += size;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub stratify: bool,
    pub pcc_mode: PccMode,
    pub fit: FitConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            stratify: false,
            pcc_mode: PccMode::Geometric,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub ccr: f64,
    pub pcc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub fold: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub dataset_name: String,
    pub k: usize,
    pub fold_seed: u64,
    pub stratified: bool,
    pub pcc_mode: PccMode,
    pub per_fold: Vec<FoldResult>,
    pub failures: Vec<FoldFailure>,
    pub mean_ccr: f64,
    pub std_ccr: f64,
    pub mean_pcc: f64,
    pub std_pcc: f64,
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl CvReport {
    pub const CSV_HEADER: &'static str = "dataset,E[CCR],std[CCR],E[PCC],std[PCC]";

    /// dataset, E[CCR], std[CCR], E[PCC], std[PCC] as percentages to one decimal.
    pub fn csv_row(&self) -> String {
        let name = if self.dataset_name.contains([',', '"']) {
            format!("\"{}\"", self.dataset_name.replace('"', "\"\""))
        } else {
            self.dataset_name.clone()
        };
        format!(
            "{name},{:.1},{:.1},{:.1},{:.1}",
            100.0 * self.mean_ccr,
            100.0 * self.std_ccr,
            100.0 * self.mean_pcc,
            100.0 * self.std_pcc
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// k-fold cross-validation of the one-vs-rest classifier.
///
/// Folds whose training part lacks a second class are recorded as failures and
/// excluded from the aggregates; if every fold fails the call errors.
pub fn cross_validate(data: &Dataset, name: &str, config: &CvConfig) -> Result<CvReport> {
    if data.has_missing() {
        return Err(Error::domain("dataset has missing values; impute first"));
    }
    let labels = data.labels();
    let folds = assign_folds(&labels, config.k, config.seed, config.stratify)?;
    let outcomes: Vec<Result<std::result::Result<FoldResult, FoldFailure>>> = (0..config.k)
        .into_par_iter()
        .map(|f| run_fold(data, &folds, f, config))
        .collect();

    let mut per_fold = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(r) => per_fold.push(r),
            Err(fail) => {
                log::warn!("fold {} skipped: {}", fail.fold, fail.reason);
                failures.push(fail);
            }
        }
    }
    if per_fold.is_empty() {
        return Err(Error::Unfittable("every fold failed".into()));
    }
    let ccrs: Vec<f64> = per_fold.iter().map(|r| r.ccr).collect();
    let pccs: Vec<f64> = per_fold.iter().map(|r| r.pcc).collect();
    let (mean_ccr, std_ccr) = mean_std(&ccrs);
    let (mean_pcc, std_pcc) = mean_std(&pccs);
    Ok(CvReport {
        dataset_name: name.to_string(),
        k: config.k,
        fold_seed: config.seed,
        stratified: config.stratify,
        pcc_mode: config.pcc_mode,
        per_fold,
        failures,
        mean_ccr,
        std_ccr,
        mean_pcc,
        std_pcc,
    })
}

fn run_fold(
    data: &Dataset,
    folds: &[usize],
    f: usize,
    config: &CvConfig,
) -> Result<std::result::Result<FoldResult, FoldFailure>> {
    let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| folds[i] == f);
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let model = match fit_multiclass(&train, &config.fit) {
        Ok(m) => m,
        Err(Error::Unfittable(reason)) => return Ok(Err(FoldFailure { fold: f, reason })),
        Err(e) => return Err(e),
    };
    let pred = predict_multiclass(&model, &test.query_set()?)?;
    let ccr = ccr(&pred.labels, &test.labels())?;
    let pcc = pcc(&pred.chosen_probs(), config.pcc_mode)?;
    Ok(Ok(FoldResult {
        fold: f,
        n_train: train.len(),
        n_test: test.len(),
        ccr,
        pcc,
    }))
}
