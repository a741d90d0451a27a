//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::classifier::{
    fit_multiclass, predict_multiclass, FitConfig, Model, ModelFile,
};
use crate::data::{
    impute_means, load_csv, load_points, simulate, to_csv_string, CsvOptions, Dataset, LabelColumn,
    SimulationSpec, TrueField,
};
use crate::error::{Error, Result};
use crate::evaluation::{binary_decisions, ccr, cross_validate, CvConfig, PccMode};
use crate::kernel::{LengthScales, QuerySet, DEFAULT_PRIOR_MEAN};
use crate::nataf::credible_band;

#[derive(Debug, Parser)]
#[command(name = "natafbeta", version, about = "Beta random-field probabilistic classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a simulated 1-D dataset and its true probability function.
    Simulate(SimulateArgs),
    /// Fit a model to a labeled CSV file.
    Fit(FitArgs),
    /// Predict class probabilities for the rows of a CSV file.
    Predict(PredictArgs),
    /// k-fold cross-validation report.
    CrossValidate(CvArgs),
    /// Tabulate a 1-D binary model's predictive and credible band on a grid.
    ExportField(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Dataset CSV to write; the simulation settings and true field go to `<output>.json`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Length scale shared by a(x), b(x) and the copula.
    #[arg(long, default_value_t = 2.0)]
    pub length_scale: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub low: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub high: f64,
    /// Resolution of the true-probability grid.
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub hyper_lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub hyper_zeta: f64,
}

#[derive(Debug, Args, Clone)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Label column: `last`, a zero-based index, or a header name.
    #[arg(long, default_value = "last")]
    pub label_column: String,
    #[arg(long, default_value = "?")]
    pub missing_token: String,
    /// Zero-based columns to ignore, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub skip_columns: Vec<usize>,
}

impl InputArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            label_column: self.label_column.parse().unwrap_or(LabelColumn::Last),
            missing_token: self.missing_token.clone(),
            has_header: None,
            skip_columns: self.skip_columns.clone(),
        }
    }

    fn load(&self) -> Result<Dataset> {
        let raw = load_csv(&self.input, &self.options())?;
        if raw.has_missing() {
            log::info!("imputing {} rows with missing cells", raw.missing_rows().len());
        }
        impute_means(&raw)
    }
}

#[derive(Debug, Args, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Model file to write.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args, Clone)]
pub struct FitFlags {
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub rel_tol: f64,
    /// Wall-clock limit per fit, in seconds.
    #[arg(long, default_value_t = 7200.0)]
    pub wall_clock: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step: f64,
    #[arg(long, default_value_t = DEFAULT_PRIOR_MEAN)]
    pub prior_mean: f64,
    /// Starting length scales, comma separated (default: attribute means).
    #[arg(long, value_delimiter = ',')]
    pub start: Vec<f64>,
}

impl FitFlags {
    fn config(&self) -> Result<FitConfig> {
        let cfg = FitConfig {
            start: if self.start.is_empty() {
                None
            } else {
                Some(LengthScales::new(self.start.clone())?)
            },
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            wall_clock_limit_secs: self.wall_clock,
            fd_step: self.fd_step,
            prior_mean: self.prior_mean,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of attribute rows; a trailing label column is allowed and ignored.
    #[arg(long)]
    pub input: PathBuf,
    /// Prediction CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "?")]
    pub missing_token: String,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Report stem: writes `<output>.json` and `<output>.csv`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub stratify: bool,
    #[arg(long, default_value = "geometric")]
    pub pcc_mode: String,
    /// Dataset name in the report (default: input file stem).
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub low: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub high: Option<f64>,
    /// Credible-band quantiles, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.5,0.95")]
    pub levels: Vec<f64>,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::CrossValidate(a) => cmd_cross_validate(a),
        Command::ExportField(a) => cmd_export_field(a),
    }
}

/// Fixed six-significant-digit rendering used in every report CSV.
pub fn fmt6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    // exponent after rounding to six digits, so 9.999996 counts as 10
    let sci = format!("{v:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

fn check_input(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        ))
    }
}

fn check_output(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        )),
        _ => Ok(()),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct SimulationSidecar<'a> {
    spec: &'a SimulationSpec,
    seed: u64,
    truth: &'a TrueField,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    check_output(&a.output)?;
    let l = LengthScales::new(vec![a.length_scale])?;
    let spec = SimulationSpec {
        l_a: l.clone(),
        l_b: l.clone(),
        l_p: l,
        n: a.n,
        attr_low: a.low,
        attr_high: a.high,
        grid_size: a.grid,
        seed: a.seed,
        hyper_lambda: a.hyper_lambda,
        hyper_zeta: a.hyper_zeta,
    };
    let sim = simulate(&spec)?;
    write(&a.output, &to_csv_string(&sim.data, "?")?)?;
    let sidecar = SimulationSidecar {
        spec: &sim.spec,
        seed: a.seed,
        truth: &sim.truth,
    };
    write(
        &with_suffix(&a.output, ".json"),
        &serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    check_input(&a.input.input)?;
    check_output(&a.output)?;
    let config = a.fit.config()?;
    let data = a.input.load()?;
    let model = fit_multiclass(&data, &config)?;
    for (c, m) in model.models.iter().enumerate() {
        if let Some(m) = m {
            log::info!(
                "class `{}`: scales {:?}, stop {:?}",
                model.class_names[c],
                m.map_scales.values(),
                m.stop_reason
            );
        }
    }
    let model = Model::Multiclass(model);
    write(&a.output, &ModelFile::new(model).to_json()?)
}

fn read_model(path: &Path) -> Result<Model> {
    check_input(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(ModelFile::from_json(&text)?.model)
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    check_output(&a.output)?;
    let model = read_model(&a.model)?;
    check_input(&a.input)?;
    let dim = model
        .dim()
        .ok_or_else(|| Error::domain("model holds no fitted classes"))?;
    let (names, rows) = load_points(&a.input, &a.missing_token, Some(dim))?;
    let width = names.len();
    if width != dim && width != dim + 1 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: width,
        });
    }
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::domain("prediction input rows have inconsistent widths"));
    }
    if rows.iter().any(|r| r.iter().any(|v| v.is_nan())) {
        return Err(Error::domain("prediction input has missing attribute values"));
    }
    let points: Vec<&[f64]> = rows.iter().map(|r| &r[..dim]).collect();
    let query = QuerySet::from_points(&points)?;
    let mut out = String::new();
    let attr_names = &names[..dim];
    match &model {
        Model::Binary(m) => {
            let pred = m.predict(&query)?;
            let labels = binary_decisions(&pred.prob_class1);
            let _ = writeln!(out, "{},prob_class1,label", attr_names.join(","));
            for ((p, prob), label) in points.iter().zip(&pred.prob_class1).zip(&labels) {
                let _ = writeln!(out, "{},{},{label}", join6(p), fmt6(*prob));
            }
        }
        Model::Multiclass(m) => {
            let pred = predict_multiclass(m, &query)?;
            let prob_cols: Vec<String> = m.class_names.iter().map(|c| format!("prob_{c}")).collect();
            let _ = writeln!(out, "{},{},label", attr_names.join(","), prob_cols.join(","));
            for ((p, probs), &label) in points.iter().zip(&pred.probs).zip(&pred.labels) {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    join6(p),
                    join6(probs),
                    m.class_names[label]
                );
            }
            if width == dim + 1 {
                report_training_accuracy(&a.input, &a.missing_token, m.class_names.as_slice(), &pred.labels);
            }
        }
    }
    write(&a.output, &out)
}

fn report_training_accuracy(input: &Path, missing: &str, classes: &[String], predicted: &[usize]) {
    let opts = CsvOptions {
        missing_token: missing.to_string(),
        ..CsvOptions::default()
    };
    if let Ok(d) = load_csv(input, &opts) {
        let truth: Option<Vec<usize>> = d
            .labels()
            .iter()
            .map(|&c| classes.iter().position(|n| *n == d.class_names()[c]))
            .collect();
        if let Some(t) = truth {
            if let Ok(v) = ccr(predicted, &t) {
                log::info!("CCR against labels in input: {v:.4}");
            }
        }
    }
}

fn join6(values: &[f64]) -> String {
    values.iter().map(|v| fmt6(*v)).collect::<Vec<_>>().join(",")
}

fn cmd_cross_validate(a: &CvArgs) -> Result<()> {
    check_input(&a.input.input)?;
    check_output(&a.output)?;
    let pcc_mode: PccMode = a.pcc_mode.parse()?;
    let fit = a.fit.config()?;
    let data = a.input.load()?;
    let name = a.name.clone().unwrap_or_else(|| {
        a.input
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let config = CvConfig {
        k: a.k,
        seed: a.seed,
        stratify: a.stratify,
        pcc_mode,
        fit,
    };
    let report = cross_validate(&data, &name, &config)?;
    write(&with_suffix(&a.output, ".json"), &report.to_json()?)?;
    write(
        &with_suffix(&a.output, ".csv"),
        &format!("{}\n{}\n", crate::evaluation::CvReport::CSV_HEADER, report.csv_row()),
    )?;
    println!("{}", report.csv_row());
    Ok(())
}

fn cmd_export_field(a: &ExportArgs) -> Result<()> {
    check_output(&a.output)?;
    let model = match read_model(&a.model)? {
        Model::Binary(m) => m,
        // the class-1 side of a two-class one-vs-rest model
        Model::Multiclass(mc) if mc.n_classes() == 2 => mc.models[1]
            .clone()
            .ok_or_else(|| Error::domain("second class was not fitted"))?,
        Model::Multiclass(_) => {
            return Err(Error::domain("export-field needs a two-class model"));
        }
    };
    if model.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: model.dim(),
        });
    }
    if a.grid < 2 {
        return Err(Error::domain("grid needs at least two points"));
    }
    let xs = model.training_points.coords();
    let lo = a
        .low
        .unwrap_or_else(|| xs.iter().copied().fold(f64::INFINITY, f64::min));
    let hi = a
        .high
        .unwrap_or_else(|| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    if !(lo < hi) {
        return Err(Error::domain("export range needs low < high"));
    }
    let step = (hi - lo) / (a.grid - 1) as f64;
    let grid: Vec<f64> = (0..a.grid)
        .map(|k| if k + 1 == a.grid { hi } else { lo + k as f64 * step })
        .collect();
    let pred = model.predict(&QuerySet::from_scalars(&grid)?)?;
    let band = credible_band(&pred.field, &a.levels)?;
    let mut out = String::from("x,a_post,b_post,predictive");
    for q in &a.levels {
        let _ = write!(out, ",q{q}");
    }
    out.push('\n');
    for (j, x) in grid.iter().enumerate() {
        let _ = write!(
            out,
            "{},{},{},{}",
            fmt6(*x),
            fmt6(pred.counts.a_post[j]),
            fmt6(pred.counts.b_post[j]),
            fmt6(pred.prob_class1[j])
        );
        for v in &band[j] {
            let _ = write!(out, ",{}", fmt6(*v));
        }
        out.push('\n');
    }
    write(&a.output, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt6(0.0), "0");
        assert_eq!(fmt6(1.0), "1.00000");
        assert_eq!(fmt6(0.5), "0.500000");
        assert_eq!(fmt6(123.456789), "123.457");
        assert_eq!(fmt6(-0.00123456789), "-0.00123457");
        assert_eq!(fmt6(1e-10), "1.00000e-10");
        assert_eq!(fmt6(2.5e7), "2.50000e7");
        assert_eq!(fmt6(9.999996), "10.0000");
    }
}
