//! File formats: sample input, simulated datasets, report tables and run manifests.
//!
//! Data files (datasets, reliability points) write floats in shortest
//! round-trip form, so reading them back gives the exact same `f64`s. Report
//! tables use fixed 4-decimal form.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::binning::{
    reliability_points, Binning, CalibrationReport, EvalSample, ReliabilityPoint, ReliabilityTarget,
};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, ExperimentConfig, ExperimentResult, Metric, Parallelism};
use crate::generative::{make_dataset, GenerativeConfig, HardMode, LabeledDataset};
use crate::models::{ModelKind, ModelSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_DECIMALS: usize = 4;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::config(format!(
                "format must be `csv` or `json`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    MeanStd { mean: f64, std: f64 },
}

impl Cell {
    fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn render(&self, decimals: usize) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => format!("{v:.decimals$}"),
            Cell::MeanStd { mean, std } => format!("{mean:.decimals$}±{std:.decimals$}"),
        }
    }

    fn to_json(&self, decimals: usize) -> Value {
        let round = |v: f64| -> Value {
            format!("{v:.decimals$}")
                .parse::<f64>()
                .map(Value::from)
                .unwrap_or(Value::Null)
        };
        match self {
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Int(i) => Value::from(*i),
            Cell::Num(v) => round(*v),
            Cell::MeanStd { mean, std } => json!({ "mean": round(*mean), "std": round(*std) }),
        }
    }
}

/// A titled table with a fixed column set.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputTable {
    pub name: String,
    pub title: String,
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub decimals: usize,
}

impl OutputTable {
    pub fn new(name: &str, title: &str, column_names: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            title: title.to_string(),
            column_names,
            rows: Vec::new(),
            decimals: DEFAULT_DECIMALS,
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.column_names.len() {
            return Err(Error::Serialize(format!(
                "table `{}`: row has {} cells, expected {}",
                self.name,
                row.len(),
                self.column_names.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serialize(e.to_string());
        w.write_record(&self.column_names).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.render(self.decimals)))
                .map_err(ser)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Serialize(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// `{"title", "columns", "rows"}` with rows as arrays.
    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(|c| c.to_json(self.decimals)).collect()))
            .collect();
        let doc = json!({
            "title": self.title,
            "columns": self.column_names,
            "rows": rows,
        });
        let mut s =
            serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialize(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn fmt_k(k: f64) -> String {
    format!("k={k}")
}

fn metric_grid(
    name: &str,
    title: &str,
    metric: Metric,
    result: &ExperimentResult,
    header: impl Fn(f64, usize) -> String,
    with_std: bool,
) -> Result<OutputTable> {
    let conditions = result.score_conditions();
    let mut columns = vec!["model".to_string()];
    columns.extend(conditions.iter().map(|c| header(c.k, c.n)));
    let mut table = OutputTable::new(name, title, columns);
    for model in ModelKind::ALL {
        let mut row = vec![Cell::text(model.letter())];
        for c in conditions {
            let cell = c.cell(model, metric);
            row.push(if with_std {
                Cell::MeanStd {
                    mean: cell.mean,
                    std: cell.std,
                }
            } else {
                Cell::Num(cell.mean)
            });
        }
        table.push_row(row)?;
    }
    Ok(table)
}

/// Output tables per experiment: 1 → table2; 2 → table3, table4; 3 → table5, table6; 4 → table7, table8.
pub fn experiment_tables(result: &ExperimentResult) -> Result<Vec<OutputTable>> {
    match result.experiment_id() {
        1 => {
            let c = &result.score_conditions()[0];
            let mut t = OutputTable::new(
                "table2",
                &format!("Experiment 1: k={}, n={}", c.k, c.n),
                ["model", "name", "smece", "ece", "smece_rank", "ece_rank"]
                    .map(String::from)
                    .to_vec(),
            );
            for model in ModelKind::ALL {
                let s = c.cell(model, Metric::Smece);
                let e = c.cell(model, Metric::Ece);
                t.push_row(vec![
                    Cell::text(model.letter()),
                    Cell::text(model.name()),
                    Cell::Num(s.mean),
                    Cell::Num(e.mean),
                    Cell::Int(s.rank.unwrap_or_default() as i64),
                    Cell::Int(e.rank.unwrap_or_default() as i64),
                ])?;
            }
            Ok(vec![t])
        }
        2 => {
            let by_k = |k: f64, _| fmt_k(k);
            Ok(vec![
                metric_grid(
                    "table3",
                    "SMECE across k",
                    Metric::Smece,
                    result,
                    by_k,
                    false,
                )?,
                metric_grid("table4", "ECE across k", Metric::Ece, result, by_k, false)?,
            ])
        }
        3 => {
            let conditions = result.ranking_conditions();
            let mut columns = vec!["metric".to_string()];
            columns.extend(conditions.iter().map(|c| fmt_k(c.k)));
            let mut overall = OutputTable::new("table5", "Overall ranking accuracy", columns);
            for metric in Metric::ALL {
                let mut row = vec![Cell::text(metric.label())];
                row.extend(
                    conditions
                        .iter()
                        .map(|c| Cell::Num(c.metric(metric).overall)),
                );
                overall.push_row(row)?;
            }

            let mut pairs = OutputTable::new(
                "table6",
                "Per-pair ranking accuracy",
                ["k", "pair", "smece", "ece"].map(String::from).to_vec(),
            );
            for c in conditions {
                for (s, e) in c.smece.per_pair.iter().zip(&c.ece.per_pair) {
                    pairs.push_row(vec![
                        Cell::text(c.k.to_string()),
                        Cell::text(format!("{} vs {}", s.first, s.second)),
                        Cell::Num(s.accuracy),
                        Cell::Num(e.accuracy),
                    ])?;
                }
            }
            Ok(vec![overall, pairs])
        }
        _ => {
            let by_n = |_, n: usize| format!("n={n}");
            Ok(vec![
                metric_grid(
                    "table7",
                    "SMECE mean±std",
                    Metric::Smece,
                    result,
                    by_n,
                    true,
                )?,
                metric_grid("table8", "ECE mean±std", Metric::Ece, result, by_n, true)?,
            ])
        }
    }
}

/// Everything needed to regenerate a run's output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub master_seed: u64,
    pub format: Format,
    pub experiments: Vec<ExperimentConfig>,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            line: e.line() as u64,
            column: "manifest".into(),
            message: e.to_string(),
        })
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes to `out`, or stdout when `None`.
pub fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Run each experiment and write its tables plus a manifest into `output_dir`.
pub fn cmd_experiment(
    configs: &[ExperimentConfig],
    format: Format,
    output_dir: &Path,
    parallelism: &Parallelism,
) -> Result<RunManifest> {
    if configs.is_empty() {
        return Err(Error::config("no experiments requested"));
    }
    for c in configs {
        c.validate()?;
    }
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;

    let mut outputs = Vec::new();
    for config in configs {
        let result = run_experiment(config, parallelism)?;
        for table in experiment_tables(&result)? {
            let file = format!("{}.{}", table.name, format.extension());
            write_file(&output_dir.join(&file), &table.render(format)?)?;
            outputs.push(file);
        }
    }
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        master_seed: configs[0].master_seed,
        format,
        experiments: configs.to_vec(),
        outputs,
    };
    let mut text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialize(e.to_string()))?;
    text.push('\n');
    write_file(&output_dir.join(MANIFEST_FILE), &text)?;
    Ok(manifest)
}

/// Re-run a manifest's experiments into `output_dir`.
pub fn cmd_replay(
    manifest_path: &Path,
    output_dir: &Path,
    parallelism: &Parallelism,
) -> Result<RunManifest> {
    let manifest = RunManifest::read(manifest_path)?;
    cmd_experiment(
        &manifest.experiments,
        manifest.format,
        output_dir,
        parallelism,
    )
}

/// Column names to read sample fields from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleColumns {
    pub prediction: String,
    pub soft_label: String,
    pub hard_label: String,
}

impl Default for SampleColumns {
    fn default() -> Self {
        Self {
            prediction: "prediction".into(),
            soft_label: "soft_label".into(),
            hard_label: "hard_label".into(),
        }
    }
}

fn data_error(path: &Path, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

struct RawSample {
    line: u64,
    prediction: f64,
    soft_label: f64,
    hard_label: Option<f64>,
}

/// Read samples from CSV (header required) or, for `.json` paths, from an
/// array of `{prediction, soft_label, hard_label?}` objects.
///
/// Hard labels are kept only if every record has one; otherwise none are.
pub fn read_samples(path: &Path, columns: &SampleColumns) -> Result<Vec<EvalSample>> {
    let raw = if path.extension().is_some_and(|e| e == "json") {
        read_raw_json(path, columns)?
    } else {
        read_raw_csv(path, columns)?
    };
    if raw.is_empty() {
        return Err(data_error(path, 1, &columns.prediction, "no samples"));
    }
    let all_hard = raw.iter().all(|r| r.hard_label.is_some());
    raw.into_iter()
        .map(|r| {
            let check = |name: &str, v: f64| {
                if (0.0..=1.0).contains(&v) {
                    Ok(v)
                } else {
                    Err(data_error(
                        path,
                        r.line,
                        name,
                        format!("probability out of range: {v}"),
                    ))
                }
            };
            let p = check(&columns.prediction, r.prediction)?;
            let s = check(&columns.soft_label, r.soft_label)?;
            match r.hard_label.filter(|_| all_hard) {
                Some(y) => EvalSample::with_hard(p, s, y).map_err(|_| {
                    data_error(
                        path,
                        r.line,
                        &columns.hard_label,
                        format!("hard label must be 0 or 1, got {y}"),
                    )
                }),
                None => EvalSample::new(p, s)
                    .map_err(|e| data_error(path, r.line, &columns.prediction, e.to_string())),
            }
        })
        .collect()
}

fn parse_number(path: &Path, line: u64, column: &str, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| data_error(path, line, column, format!("not a number: `{text}`")))
}

fn read_raw_csv(path: &Path, columns: &SampleColumns) -> Result<Vec<RawSample>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| data_error(path, 1, "header", e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let pred_idx = find(&columns.prediction)
        .ok_or_else(|| data_error(path, 1, &columns.prediction, "missing column"))?;
    let soft_idx = find(&columns.soft_label)
        .ok_or_else(|| data_error(path, 1, &columns.soft_label, "missing column"))?;
    let hard_idx = find(&columns.hard_label);

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            data_error(path, line, "record", e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &str| {
            record
                .get(idx)
                .ok_or_else(|| data_error(path, line, name, "missing field"))
        };
        let prediction = parse_number(
            path,
            line,
            &columns.prediction,
            field(pred_idx, &columns.prediction)?,
        )?;
        let soft_label = parse_number(
            path,
            line,
            &columns.soft_label,
            field(soft_idx, &columns.soft_label)?,
        )?;
        let hard_label = match hard_idx.and_then(|i| record.get(i)).map(str::trim) {
            None | Some("") => None,
            Some(text) => Some(parse_number(path, line, &columns.hard_label, text)?),
        };
        out.push(RawSample {
            line,
            prediction,
            soft_label,
            hard_label,
        });
    }
    Ok(out)
}

fn read_raw_json(path: &Path, columns: &SampleColumns) -> Result<Vec<RawSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| data_error(path, e.line() as u64, "document", e.to_string()))?;
    let records = doc
        .as_array()
        .ok_or_else(|| data_error(path, 1, "document", "expected an array of records"))?;
    records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            // Record number stands in for the line.
            let line = i as u64 + 1;
            let get = |name: &str| -> Result<Option<f64>> {
                match rec.get(name) {
                    None | Some(Value::Null) => Ok(None),
                    Some(v) => v
                        .as_f64()
                        .map(Some)
                        .ok_or_else(|| data_error(path, line, name, format!("not a number: {v}"))),
                }
            };
            let required = |name: &str| {
                get(name)?.ok_or_else(|| data_error(path, line, name, "missing field"))
            };
            Ok(RawSample {
                line,
                prediction: required(&columns.prediction)?,
                soft_label: required(&columns.soft_label)?,
                hard_label: get(&columns.hard_label)?,
            })
        })
        .collect()
}

pub fn cmd_metrics(
    input: &Path,
    columns: &SampleColumns,
    binning: &Binning,
    format: Format,
) -> Result<(CalibrationReport, String)> {
    let samples = read_samples(input, columns)?;
    let report = CalibrationReport::compute(&samples, binning)?;
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Serialize(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut t = OutputTable::new(
                "metrics",
                "Calibration report",
                vec!["metric".into(), "value".into()],
            );
            let optional = |v: Option<f64>| v.map_or_else(|| Cell::text(""), Cell::Num);
            t.push_row(vec![Cell::text("smece"), Cell::Num(report.smece)])?;
            t.push_row(vec![Cell::text("ece"), optional(report.ece)])?;
            t.push_row(vec![Cell::text("brier_soft"), Cell::Num(report.brier_soft)])?;
            t.push_row(vec![Cell::text("brier_hard"), optional(report.brier_hard)])?;
            t.push_row(vec![Cell::text("n"), Cell::Int(report.n as i64)])?;
            t.push_row(vec![
                Cell::text("num_bins"),
                Cell::Int(report.num_bins as i64),
            ])?;
            t.to_csv()?
        }
    };
    Ok((report, text))
}

pub fn cmd_reliability(
    input: &Path,
    columns: &SampleColumns,
    binning: &Binning,
    target: ReliabilityTarget,
) -> Result<(Vec<ReliabilityPoint>, String)> {
    let samples = read_samples(input, columns)?;
    let points = reliability_points(&samples, binning, target)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    w.write_record(["mean_prediction", "mean_target", "weight"])
        .map_err(ser)?;
    for p in &points {
        w.write_record([
            p.mean_prediction.to_string(),
            p.mean_target.to_string(),
            p.weight.to_string(),
        ])
        .map_err(ser)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Serialize(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))?;
    Ok((points, text))
}

pub const DATASET_COLUMNS: [&str; 8] = [
    "x", "p_star", "y_hard", "p_hat_A", "p_hat_B", "p_hat_C", "p_hat_D", "p_hat_E",
];

/// A simulated dataset with every model's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: LabeledDataset,
    /// Indexed by model, then sample.
    pub predictions: Vec<Vec<f64>>,
}

/// Draws the same dataset and predictions the experiment runners score for `seed`.
pub fn simulate(k: f64, n: usize, hard_mode: HardMode, seed: u64) -> Result<SimulatedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dataset = make_dataset(&GenerativeConfig::new(k, n)?, hard_mode, &mut rng)?;
    let predictions = ModelSpec::zoo()
        .iter()
        .map(|spec| spec.predict_all(&dataset.inputs, k, &mut rng))
        .collect();
    Ok(SimulatedData {
        dataset,
        predictions,
    })
}

pub fn dataset_csv(data: &SimulatedData) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    w.write_record(DATASET_COLUMNS).map_err(ser)?;
    let d = &data.dataset;
    for i in 0..d.len() {
        let mut row = vec![
            d.inputs[i].to_string(),
            d.soft_labels[i].to_string(),
            u8::from(d.hard_labels[i]).to_string(),
        ];
        row.extend(data.predictions.iter().map(|p| p[i].to_string()));
        w.write_record(&row).map_err(ser)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

pub fn cmd_simulate(
    k: f64,
    n: usize,
    hard_mode: HardMode,
    seed: u64,
    output: Option<&Path>,
) -> Result<SimulatedData> {
    let data = simulate(k, n, hard_mode, seed)?;
    emit(output, &dataset_csv(&data)?)?;
    Ok(data)
}

/// Output path for a table inside an experiment directory.
pub fn table_path(dir: &Path, name: &str, format: Format) -> PathBuf {
    dir.join(format!("{name}.{}", format.extension()))
}
