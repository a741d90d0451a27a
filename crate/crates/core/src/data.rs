//! Dataset ingestion, mean imputation, and the 1-D simulated benchmark.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classifier::BinaryModel;
use crate::error::{Error, Result};
use crate::kernel::{rbf_correlation, LengthScales, QuerySet};
use crate::linalg::CholeskyFactor;
use crate::nataf::{sample_field, NatafBetaField};

/// One labeled observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Attribute values; `NaN` marks a missing cell awaiting imputation.
    pub x: Vec<f64>,
    pub class: usize,
}

/// Labeled observations with their metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<Observation>,
    attribute_names: Vec<String>,
    class_names: Vec<String>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        rows: Vec<Observation>,
        attribute_names: Vec<String>,
        class_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let dim = attribute_names.len();
        if dim == 0 {
            return Err(Error::domain("dataset needs at least one attribute"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.x.len(),
                });
            }
            if row.class >= class_names.len() {
                return Err(Error::domain(format!(
                    "row {i} has class id {} but only {} classes are named",
                    row.class,
                    class_names.len()
                )));
            }
            if row.x.iter().any(|v| v.is_infinite()) {
                return Err(Error::domain(format!("row {i} has an infinite attribute")));
            }
        }
        Ok(Self {
            rows,
            attribute_names,
            class_names,
            provenance: provenance.into(),
        })
    }

    /// Binary dataset from points and 0/1 labels.
    pub fn binary<P: AsRef<[f64]>>(points: &[P], labels: &[bool]) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
        let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(1);
        let rows = points
            .iter()
            .zip(labels)
            .map(|(p, &c)| Observation {
                x: p.as_ref().to_vec(),
                class: c as usize,
            })
            .collect();
        Self::new(
            rows,
            (0..dim).map(|k| format!("x{k}")).collect(),
            vec!["0".into(), "1".into()],
            "in-memory",
        )
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for r in &self.rows {
            counts[r.class] += 1;
        }
        counts
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().any(|r| r.x.iter().any(|v| v.is_nan()))
    }

    /// Row indices with at least one missing cell.
    pub fn missing_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.x.iter().any(|v| v.is_nan()))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn points(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.x.as_slice()).collect()
    }

    /// `class == positive` per row.
    pub fn one_vs_rest_labels(&self, positive: usize) -> Vec<bool> {
        self.rows.iter().map(|r| r.class == positive).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.class).collect()
    }

    pub fn query_set(&self) -> Result<QuerySet> {
        QuerySet::from_points(&self.points())
    }

    /// Rows at `indices`, keeping metadata.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            attribute_names: self.attribute_names.clone(),
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Which column of a CSV file holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Last,
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" | "" => LabelColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: LabelColumn,
    pub missing_token: String,
    /// `None` auto-detects a header row.
    pub has_header: Option<bool>,
    /// Zero-based columns to ignore entirely, such as row identifiers.
    pub skip_columns: Vec<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: LabelColumn::Last,
            missing_token: "?".to_string(),
            has_header: None,
            skip_columns: Vec::new(),
        }
    }
}

fn is_missing(cell: &str, token: &str) -> bool {
    cell.is_empty() || cell == token
}

/// Reads a comma-delimited file of numeric attributes plus one label column.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, options).map(|d| d.with_provenance(path.display().to_string()))
}

/// [`load_csv`] on in-memory text.
pub fn parse_csv(text: &str, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        records.push(rec);
    }
    let Some(first) = records.first() else {
        return Err(Error::Empty("CSV file has no rows".into()));
    };
    let width = first.len();
    if width < 2 {
        return Err(Error::domain("CSV needs at least one attribute and a label column"));
    }

    let header_names: Option<Vec<String>> = {
        let looks_like_header = |label_idx: usize| {
            first.iter().enumerate().any(|(k, c)| {
                k != label_idx
                    && !options.skip_columns.contains(&k)
                    && !is_missing(c, &options.missing_token)
                    && c.parse::<f64>().is_err()
            })
        };
        let label_guess = match &options.label_column {
            LabelColumn::Index(i) => *i,
            _ => width - 1,
        };
        let has_header = match options.has_header {
            Some(h) => h,
            None => matches!(options.label_column, LabelColumn::Name(_)) || looks_like_header(label_guess),
        };
        has_header.then(|| first.iter().map(str::to_string).collect())
    };

    let label_idx = match &options.label_column {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::domain(format!(
                "label column {i} out of range for {width} columns"
            )))
        }
        LabelColumn::Name(name) => header_names
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::domain(format!("no column named `{name}`")))?,
    };
    let attr_cols: Vec<usize> = (0..width)
        .filter(|k| *k != label_idx && !options.skip_columns.contains(k))
        .collect();
    if attr_cols.is_empty() {
        return Err(Error::domain("no attribute columns left"));
    }
    let attribute_names = match &header_names {
        Some(h) => attr_cols.iter().map(|&k| h[k].clone()).collect(),
        None => attr_cols.iter().map(|k| format!("x{k}")).collect(),
    };

    let body = if header_names.is_some() {
        &records[1..]
    } else {
        &records[..]
    };
    if body.is_empty() {
        return Err(Error::Empty("CSV file has a header but no data rows".into()));
    }

    let mut raw_labels = Vec::with_capacity(body.len());
    let mut xs = Vec::with_capacity(body.len());
    let row_offset = usize::from(header_names.is_some()) + 1;
    for (r, rec) in body.iter().enumerate() {
        let row_no = r + row_offset;
        let label = rec.get(label_idx).unwrap_or_default();
        if is_missing(label, &options.missing_token) {
            return Err(Error::Parse {
                row: row_no,
                column: label_idx + 1,
                message: "missing class label".into(),
            });
        }
        raw_labels.push(label.to_string());
        let mut x = Vec::with_capacity(attr_cols.len());
        for &k in &attr_cols {
            let cell = rec.get(k).unwrap_or_default();
            if is_missing(cell, &options.missing_token) {
                x.push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                column: k + 1,
                message: format!("`{cell}` is neither numeric nor the missing token"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    column: k + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            // canonical zero so bitwise matching treats -0 and 0 alike
            x.push(if v == 0.0 { 0.0 } else { v });
        }
        xs.push(x);
    }

    let class_names = sorted_labels(&raw_labels);
    let rows = xs
        .into_iter()
        .zip(&raw_labels)
        .map(|(x, l)| Observation {
            x,
            class: class_names.iter().position(|c| c == l).expect("label collected above"),
        })
        .collect();
    Dataset::new(rows, attribute_names, class_names, "inline")
}

/// Reads numeric CSV rows (optional header) into column names and values.
///
/// With `keep = Some(k)` only the first `k` columns are parsed; names still cover every column.
pub fn load_points(
    path: impl AsRef<Path>,
    missing_token: &str,
    keep: Option<usize>,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_points(&text, missing_token, keep)
}

pub fn parse_points(
    text: &str,
    missing_token: &str,
    keep: Option<usize>,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if !rec.iter().all(|c| c.is_empty()) {
            records.push(rec);
        }
    }
    let Some(first) = records.first() else {
        return Err(Error::Empty("CSV file has no rows".into()));
    };
    let keep = keep.unwrap_or(usize::MAX);
    let header = first
        .iter()
        .take(keep)
        .any(|c| !is_missing(c, missing_token) && c.parse::<f64>().is_err());
    let names: Vec<String> = if header {
        first.iter().map(str::to_string).collect()
    } else {
        (0..first.len()).map(|k| format!("x{k}")).collect()
    };
    let offset = usize::from(header);
    let mut rows = Vec::new();
    for (r, rec) in records[offset..].iter().enumerate() {
        let mut x = Vec::with_capacity(rec.len());
        for (k, cell) in rec.iter().enumerate().take(keep) {
            if is_missing(cell, missing_token) {
                x.push(f64::NAN);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => x.push(if v == 0.0 { 0.0 } else { v }),
                _ => {
                    return Err(Error::Parse {
                        row: r + offset + 1,
                        column: k + 1,
                        message: format!("`{cell}` is not a finite number"),
                    })
                }
            }
        }
        rows.push(x);
    }
    Ok((names, rows))
}

/// Distinct labels, numerically ordered when every label is a number.
fn sorted_labels(raw: &[String]) -> Vec<String> {
    let unique: BTreeSet<&String> = raw.iter().collect();
    let mut names: Vec<String> = unique.into_iter().cloned().collect();
    if names.iter().all(|n| n.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        });
    }
    names
}

/// Writes a dataset back to CSV at full precision; missing cells become `missing_token`.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, missing_token: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv_string(dataset, missing_token)?).map_err(|e| Error::io(path, e))
}

pub fn to_csv_string(dataset: &Dataset, missing_token: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = dataset.attribute_names.clone();
    header.push("class".into());
    w.write_record(&header)?;
    for row in &dataset.rows {
        let mut rec: Vec<String> = row
            .x
            .iter()
            .map(|v| {
                if v.is_nan() {
                    missing_token.to_string()
                } else {
                    format!("{v}")
                }
            })
            .collect();
        rec.push(dataset.class_names[row.class].clone());
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

/// Replaces each missing cell by the mean of its column's observed values.
pub fn impute_means(dataset: &Dataset) -> Result<Dataset> {
    let dim = dataset.dim();
    let mut sums = vec![0.0; dim];
    let mut counts = vec![0usize; dim];
    for row in &dataset.rows {
        for (k, v) in row.x.iter().enumerate() {
            if !v.is_nan() {
                sums[k] += v;
                counts[k] += 1;
            }
        }
    }
    if let Some(k) = (0..dim).find(|&k| counts[k] == 0 && !dataset.is_empty()) {
        return Err(Error::domain(format!(
            "attribute `{}` has no observed values to impute from",
            dataset.attribute_names[k]
        )));
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let mut out = dataset.clone();
    for row in &mut out.rows {
        for (k, v) in row.x.iter_mut().enumerate() {
            if v.is_nan() {
                *v = means[k];
            }
        }
    }
    Ok(out)
}

/// Shipped descriptions of the benchmark datasets; raw files are user-supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: &'static str,
    pub file: &'static str,
    pub rows: usize,
    pub attributes: usize,
    pub classes: usize,
    /// Zero-based label column in the raw UCI file.
    pub label_column: usize,
    /// Zero-based columns that are identifiers rather than attributes.
    pub skip_columns: &'static [usize],
    pub missing_token: &'static str,
}

impl DatasetManifest {
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            label_column: LabelColumn::Index(self.label_column),
            missing_token: self.missing_token.to_string(),
            has_header: None,
            skip_columns: self.skip_columns.to_vec(),
        }
    }
}

pub const BENCHMARKS: [DatasetManifest; 6] = [
    DatasetManifest {
        name: "Iris",
        file: "iris.data",
        rows: 150,
        attributes: 4,
        classes: 3,
        label_column: 4,
        skip_columns: &[],
        missing_token: "?",
    },
    DatasetManifest {
        name: "Pima",
        file: "pima-indians-diabetes.data",
        rows: 768,
        attributes: 8,
        classes: 2,
        label_column: 8,
        skip_columns: &[],
        missing_token: "?",
    },
    DatasetManifest {
        name: "Breast Cancer",
        file: "breast-cancer-wisconsin.data",
        rows: 699,
        attributes: 9,
        classes: 2,
        label_column: 10,
        skip_columns: &[0],
        missing_token: "?",
    },
    DatasetManifest {
        name: "Ionosphere",
        file: "ionosphere.data",
        rows: 351,
        attributes: 34,
        classes: 2,
        label_column: 34,
        skip_columns: &[],
        missing_token: "?",
    },
    DatasetManifest {
        name: "Glass",
        file: "glass.data",
        rows: 214,
        attributes: 9,
        classes: 6,
        label_column: 10,
        skip_columns: &[0],
        missing_token: "?",
    },
    DatasetManifest {
        name: "E.Coli",
        file: "ecoli.csv",
        rows: 336,
        attributes: 7,
        classes: 8,
        label_column: 8,
        skip_columns: &[0],
        missing_token: "?",
    },
];

pub fn benchmark(name: &str) -> Option<&'static DatasetManifest> {
    BENCHMARKS
        .iter()
        .find(|m| m.name.eq_ignore_ascii_case(name))
}

/// Settings of the 1-D simulated classification problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub l_a: LengthScales,
    pub l_b: LengthScales,
    pub l_p: LengthScales,
    pub n: usize,
    pub attr_low: f64,
    pub attr_high: f64,
    pub grid_size: usize,
    pub seed: u64,
    /// Log-space mean of the lognormal fields that generate a(x) and b(x).
    pub hyper_lambda: f64,
    /// Log-space standard deviation of those fields.
    pub hyper_zeta: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        let two = LengthScales::new(vec![2.0]).expect("positive");
        Self {
            l_a: two.clone(),
            l_b: two.clone(),
            l_p: two,
            n: 100,
            attr_low: 0.0,
            attr_high: 10.0,
            grid_size: 201,
            seed: 0,
            hyper_lambda: 0.0,
            hyper_zeta: 0.5,
        }
    }
}

impl SimulationSpec {
    fn validate(&self) -> Result<()> {
        if !(self.attr_low < self.attr_high) {
            return Err(Error::domain("simulation range needs attr_low < attr_high"));
        }
        if self.n == 0 {
            return Err(Error::domain("simulation needs n >= 1"));
        }
        if self.grid_size < 2 {
            return Err(Error::domain("simulation grid needs at least two points"));
        }
        if !(self.hyper_zeta >= 0.0 && self.hyper_zeta.is_finite() && self.hyper_lambda.is_finite()) {
            return Err(Error::domain("hyper-prior moments must be finite, zeta >= 0"));
        }
        for l in [&self.l_a, &self.l_b, &self.l_p] {
            if l.dim() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: l.dim(),
                });
            }
        }
        Ok(())
    }
}

/// The realized truth behind a simulated dataset, tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueField {
    pub grid: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub p_true: Vec<f64>,
}

impl TrueField {
    /// Linear interpolation of p_true, constant beyond the grid ends.
    pub fn interpolate(&self, x: f64) -> f64 {
        let g = &self.grid;
        let n = g.len();
        if x <= g[0] {
            return self.p_true[0];
        }
        if x >= g[n - 1] {
            return self.p_true[n - 1];
        }
        let k = g.partition_point(|&v| v <= x) - 1;
        let t = (x - g[k]) / (g[k + 1] - g[k]);
        self.p_true[k] + t * (self.p_true[k + 1] - self.p_true[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub spec: SimulationSpec,
    pub truth: TrueField,
    pub data: Dataset,
}

/// Random stream for one stage of the simulator.
fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage);
    rng
}

fn lognormal_field(
    grid: &QuerySet,
    scales: &LengthScales,
    lambda: f64,
    zeta: f64,
    name: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let r = rbf_correlation(grid, scales)?;
    let factor = CholeskyFactor::new(&r, name)?;
    let w: Vec<f64> = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
    Ok(factor
        .correlate(&w)
        .into_iter()
        .map(|z| (lambda + zeta * z).exp())
        .collect())
}

/// Draws a true probability function and `n` labeled observations from it.
///
/// a(x) and b(x) come from lognormal fields with correlation lengths `l_a`, `l_b`;
/// p_true is one Nataf-Beta realization with copula length `l_p`; attributes are
/// uniform on the range and labels are Bernoulli(p_true(x)).
pub fn simulate(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let g = spec.grid_size;
    let step = (spec.attr_high - spec.attr_low) / (g - 1) as f64;
    let grid: Vec<f64> = (0..g)
        .map(|k| {
            if k == g - 1 {
                spec.attr_high
            } else {
                spec.attr_low + k as f64 * step
            }
        })
        .collect();
    let grid_set = QuerySet::from_scalars(&grid)?;

    let a = lognormal_field(
        &grid_set,
        &spec.l_a,
        spec.hyper_lambda,
        spec.hyper_zeta,
        "R_a",
        &mut stage_rng(spec.seed, 1),
    )?;
    let b = lognormal_field(
        &grid_set,
        &spec.l_b,
        spec.hyper_lambda,
        spec.hyper_zeta,
        "R_b",
        &mut stage_rng(spec.seed, 2),
    )?;
    let r_p = rbf_correlation(&grid_set, &spec.l_p)?;
    let field = NatafBetaField::new(a.clone(), b.clone(), r_p)?;
    let draw = sample_field(&field, 1, &mut stage_rng(spec.seed, 3))?;
    let p_true: Vec<f64> = draw.row(0).iter().copied().collect();
    let truth = TrueField {
        grid,
        a,
        b,
        p_true,
    };

    let mut rng = stage_rng(spec.seed, 4);
    let width = spec.attr_high - spec.attr_low;
    let rows = (0..spec.n)
        .map(|_| {
            let x = spec.attr_low + width * rng.random::<f64>();
            let p = truth.interpolate(x);
            let class = usize::from(rng.random::<f64>() < p);
            Observation { x: vec![x], class }
        })
        .collect();
    let data = Dataset::new(
        rows,
        vec!["x".into()],
        vec!["0".into(), "1".into()],
        format!("simulated(seed={})", spec.seed),
    )?;
    Ok(Simulation {
        spec: spec.clone(),
        truth,
        data,
    })
}

/// Accuracy measures computed against the known truth rather than sampled labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueMetrics {
    pub ccr_true: f64,
    pub pcc_true: f64,
}

/// Expected CCR and PCC on the truth grid.
///
/// The chosen class at each grid point comes from `model` (strict > 0.5 rule) or,
/// when `model` is `None`, from the Bayes-optimal rule p_true > 0.5. CCR is the
/// grid average of Pr_true(chosen class); PCC is its geometric mean.
pub fn true_metrics(truth: &TrueField, model: Option<&BinaryModel>) -> Result<TrueMetrics> {
    let chosen_class1: Vec<bool> = match model {
        Some(m) => {
            let q = QuerySet::from_scalars(&truth.grid)?;
            m.predict(&q)?.prob_class1.iter().map(|&p| p > 0.5).collect()
        }
        None => truth.p_true.iter().map(|&p| p > 0.5).collect(),
    };
    let probs: Vec<f64> = truth
        .p_true
        .iter()
        .zip(&chosen_class1)
        .map(|(&p, &c)| if c { p } else { 1.0 - p })
        .collect();
    let n = probs.len() as f64;
    let ccr_true = probs.iter().sum::<f64>() / n;
    let pcc_true = crate::evaluation::pcc(&probs, crate::evaluation::PccMode::Geometric)?;
    Ok(TrueMetrics { ccr_true, pcc_true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parses_iris_shaped_file() {
        let mut text = String::from("sl,sw,pl,pw,species\n");
        for i in 0..150 {
            let species = ["setosa", "versicolor", "virginica"][i / 50];
            text.push_str(&format!("{},{},1.{},0.2,{species}\n", 4 + i % 3, 3, i % 10));
        }
        let d = parse_csv(&text, &CsvOptions::default()).unwrap();
        assert_eq!(d.len(), 150);
        assert_eq!(d.dim(), 4);
        assert_eq!(d.n_classes(), 3);
        assert_eq!(d.class_counts(), vec![50, 50, 50]);
        assert_eq!(d.attribute_names()[2], "pl");
    }

    #[test]
    fn headerless_single_row() {
        let d = parse_csv("1.5,2,1\n", &CsvOptions::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.rows()[0].x, vec![1.5, 2.0]);
        assert_eq!(d.class_names(), &["1".to_string()]);
    }

    #[test]
    fn missing_cells_flagged_then_imputed() {
        let d = parse_csv("a,b,c\n1,?,0\n?,5,1\n3,7,0\n", &CsvOptions::default()).unwrap();
        assert_eq!(d.missing_rows(), vec![0, 1]);
        let filled = impute_means(&d).unwrap();
        assert_eq!(filled.rows()[1].x[0], 2.0);
        assert_eq!(filled.rows()[0].x[1], 6.0);
        assert!(!filled.has_missing());
    }

    #[test]
    fn impute_examples() {
        let col = |vals: &[f64]| {
            let rows = vals
                .iter()
                .map(|&v| Observation { x: vec![v], class: 0 })
                .collect();
            Dataset::new(rows, vec!["v".into()], vec!["0".into()], "t").unwrap()
        };
        let out = impute_means(&col(&[1.0, f64::NAN, 3.0])).unwrap();
        assert_eq!(out.points(), vec![&[1.0][..], &[2.0], &[3.0]]);
        let out = impute_means(&col(&[2.0, f64::NAN, f64::NAN, 6.0])).unwrap();
        assert_eq!(out.rows()[1].x[0], 4.0);
        assert_eq!(out.rows()[2].x[0], 4.0);
        let clean = col(&[1.0, 2.0]);
        assert_eq!(impute_means(&clean).unwrap(), clean);
        assert!(impute_means(&col(&[f64::NAN, f64::NAN])).is_err());
        // idempotent
        let once = impute_means(&col(&[5.0, f64::NAN, 0.5])).unwrap();
        assert_eq!(impute_means(&once).unwrap(), once);
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = parse_csv("1,2,0\n1,abc,1\n", &CsvOptions::default()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_csv("", &CsvOptions::default()), Err(Error::Empty(_))));
        assert!(matches!(parse_csv("a,b\n", &CsvOptions::default()), Err(Error::Empty(_))));
    }

    #[test]
    fn label_column_by_name_and_skipped_ids() {
        let text = "id,label,x\n10,b,0.5\n11,a,1.5\n";
        let opts = CsvOptions {
            label_column: LabelColumn::Name("label".into()),
            skip_columns: vec![0],
            ..Default::default()
        };
        let d = parse_csv(text, &opts).unwrap();
        assert_eq!(d.dim(), 1);
        assert_eq!(d.class_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.labels(), vec![1, 0]);
    }

    #[test]
    fn numeric_matrix_parsing() {
        let (names, rows) = parse_points("u,v\n1,2\n?,-0\n", "?", None).unwrap();
        assert_eq!(names, vec!["u", "v"]);
        assert!(rows[1][0].is_nan());
        assert_eq!(rows[1][1].to_bits(), 0.0f64.to_bits());
        let (names, rows) = parse_points("1,2\n", "?", None).unwrap();
        assert_eq!((names.len(), rows.len()), (2, 1));
        assert!(matches!(parse_points("1,2\n3,x\n", "?", None), Err(Error::Parse { row: 2, column: 2, .. })));
        let (names, rows) = parse_points("1,a\n3,b\n", "?", Some(1)).unwrap();
        assert_eq!((names.len(), rows), (2, vec![vec![1.0], vec![3.0]]));
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let d = parse_csv("1,10\n2,4\n3,2\n", &CsvOptions::default()).unwrap();
        assert_eq!(d.class_names(), &["2", "4", "10"]);
    }

    #[test]
    fn csv_roundtrip_exact() {
        let text = "x,y,class\n0.1,-3.25e-7,yes\n1e300,?,no\n";
        let d = parse_csv(text, &CsvOptions::default()).unwrap();
        let again = parse_csv(&to_csv_string(&d, "?").unwrap(), &CsvOptions::default()).unwrap();
        assert_eq!(d.rows().len(), again.rows().len());
        for (r, s) in d.rows().iter().zip(again.rows()) {
            for (u, v) in r.x.iter().zip(&s.x) {
                assert!(u.to_bits() == v.to_bits() || (u.is_nan() && v.is_nan()));
            }
            assert_eq!(r.class, s.class);
        }
    }

    #[test]
    fn simulation_is_seeded() {
        let spec = SimulationSpec {
            seed: 4,
            n: 50,
            ..Default::default()
        };
        let a = simulate(&spec).unwrap();
        let b = simulate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.data.len(), 50);
        assert!(a.truth.p_true.iter().all(|p| (0.0..=1.0).contains(p)));
        let c = simulate(&SimulationSpec { seed: 5, ..spec }).unwrap();
        assert_ne!(a.truth.p_true, c.truth.p_true);
    }

    #[test]
    fn long_copula_scale_flattens_truth() {
        let spec = SimulationSpec {
            l_p: LengthScales::new(vec![1e12]).unwrap(),
            seed: 2,
            ..Default::default()
        };
        let sim = simulate(&spec).unwrap();
        let p0 = sim.truth.p_true[0];
        // a(x), b(x) still vary, so equal copula scores map to nearby but not equal quantiles
        let spread = sim
            .truth
            .p_true
            .iter()
            .fold(0.0_f64, |m, p| m.max((p - p0).abs()));
        let sim_a = simulate(&SimulationSpec {
            l_a: LengthScales::new(vec![1e12]).unwrap(),
            l_b: LengthScales::new(vec![1e12]).unwrap(),
            hyper_zeta: 0.0,
            ..spec
        })
        .unwrap();
        let q0 = sim_a.truth.p_true[0];
        for p in &sim_a.truth.p_true {
            assert_abs_diff_eq!(*p, q0, epsilon = 1e-4);
        }
        assert!(spread.is_finite());
    }

    #[test]
    fn interpolation_is_linear() {
        let t = TrueField {
            grid: vec![0.0, 1.0, 2.0],
            a: vec![1.0; 3],
            b: vec![1.0; 3],
            p_true: vec![0.0, 1.0, 0.5],
        };
        assert_eq!(t.interpolate(0.25), 0.25);
        assert_eq!(t.interpolate(1.5), 0.75);
        assert_eq!(t.interpolate(-3.0), 0.0);
        assert_eq!(t.interpolate(9.0), 0.5);
    }

    #[test]
    fn true_metrics_examples() {
        let flat = |p: f64| TrueField {
            grid: vec![0.0, 1.0, 2.0],
            a: vec![1.0; 3],
            b: vec![1.0; 3],
            p_true: vec![p; 3],
        };
        let m = true_metrics(&flat(1.0), None).unwrap();
        assert_eq!(m.ccr_true, 1.0);
        let m = true_metrics(&flat(0.5), None).unwrap();
        assert_abs_diff_eq!(m.pcc_true, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn labels_follow_truth_on_average() {
        let spec = SimulationSpec {
            n: 10_000,
            seed: 11,
            ..Default::default()
        };
        let sim = simulate(&spec).unwrap();
        let freq = sim.data.rows().iter().filter(|r| r.class == 1).count() as f64 / 1e4;
        let g = &sim.truth;
        // trapezoid average of p_true over the uniform grid
        let n = g.grid.len();
        let mut avg = 0.0;
        for k in 0..n - 1 {
            avg += 0.5 * (g.p_true[k] + g.p_true[k + 1]);
        }
        avg /= (n - 1) as f64;
        assert!((freq - avg).abs() < 0.02, "freq {freq} avg {avg}");
    }

    #[test]
    fn manifests_cover_benchmarks() {
        assert_eq!(BENCHMARKS.len(), 6);
        assert_eq!(benchmark("iris").unwrap().classes, 3);
        assert_eq!(benchmark("Breast Cancer").unwrap().skip_columns, &[0]);
        assert!(benchmark("mnist").is_none());
    }
}
