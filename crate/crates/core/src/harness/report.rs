//! Result tables and their CSV / JSON encodings.
//!
//! Reals are written so they read back bit-exactly: CSV uses 17 significant
//! digits, JSON the shortest round-trip form. Non-finite values become the
//! strings `inf`, `-inf` and `nan` in both.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{IndiError, Result};

use super::config::ExperimentConfig;

pub mod real {
    //! Serde adapter for `f64` that survives non-finite values in JSON.

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_real(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => super::parse_real(&t)
                .ok_or_else(|| serde::de::Error::custom(format!("bad real `{t}`"))),
        }
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct Wrap(#[serde(with = "super")] f64);

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| Wrap(*x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Wrap>::deserialize(d)?
                .into_iter()
                .map(|w| w.0)
                .collect())
        }
    }
}

/// Text form used in CSV cells.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_real(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// One evaluated cell: a (variant, sampler, step count, replicate) tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    /// Sweep variant (time distribution, schedule, ...) or `base`.
    pub variant: String,
    pub sampler: String,
    pub n_steps: usize,
    pub replicate: usize,
    /// Master seed of the cell; input `i` uses `derive_seed(seed, "input", i)`.
    pub seed: u64,
    pub inputs: usize,
    /// Inputs whose run diverged; excluded from every metric below.
    pub diverged: usize,
    #[serde(with = "real")]
    pub mse: f64,
    #[serde(with = "real")]
    pub psnr: f64,
    /// Largest per-coordinate KS distance to the prior.
    #[serde(with = "real")]
    pub ks: f64,
    /// Largest per-coordinate Wasserstein-1 distance to a discrete prior.
    #[serde(with = "real")]
    pub w1: f64,
    #[serde(with = "real")]
    pub mode_hit_rate: f64,
    /// Largest `|f_i - w_i|` over modes, in binomial standard errors.
    #[serde(with = "real")]
    pub mode_freq_max_z: f64,
    #[serde(with = "real::vec")]
    pub mode_freqs: Vec<f64>,
    #[serde(with = "real::vec")]
    pub output_mean: Vec<f64>,
    #[serde(with = "real::vec")]
    pub output_var: Vec<f64>,
    /// Mean training loss over the last 100 steps (trained estimators).
    #[serde(with = "real")]
    pub final_loss: f64,
    /// First error message seen in the cell, if any.
    pub note: String,
}

impl Row {
    pub fn is_divergent(&self) -> bool {
        self.diverged > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub variant: String,
    #[serde(with = "real::vec")]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub variant: String,
    pub sampler: String,
    pub n_steps: usize,
    pub replicate: usize,
    pub input_index: usize,
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step_index: usize,
    #[serde(with = "real")]
    pub t: f64,
    #[serde(with = "real::vec")]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub loss_curves: Vec<LossCurve>,
    pub trajectories: Vec<TrajectoryRecord>,
    /// Checkpoint files written next to the report.
    pub checkpoints: Vec<String>,
    /// Total estimator evaluations across all cells.
    pub estimator_calls: u64,
    #[serde(with = "real")]
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| IndiError::InvalidInput(format!("bad report JSON: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected csv or json)")),
        }
    }
}

pub const ROW_HEADER: [&str; 20] = [
    "experiment",
    "variant",
    "sampler",
    "n_steps",
    "replicate",
    "seed",
    "inputs",
    "diverged",
    "mse",
    "psnr",
    "ks",
    "w1",
    "mode_hit_rate",
    "mode_freq_max_z",
    "mode_freqs",
    "output_mean",
    "output_var",
    "final_loss",
    "note",
    "divergent",
];

fn join_reals(v: &[f64]) -> String {
    v.iter()
        .map(|x| format_real(*x))
        .collect::<Vec<_>>()
        .join(";")
}

fn csv_err(path: &Path, e: csv::Error) -> IndiError {
    IndiError::io(path, std::io::Error::other(e))
}

/// Rows as CSV text. Vector-valued columns are `;`-separated.
pub fn rows_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let path = Path::new("<rows>");
    w.write_record(ROW_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.variant.clone(),
            r.sampler.clone(),
            r.n_steps.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.inputs.to_string(),
            r.diverged.to_string(),
            format_real(r.mse),
            format_real(r.psnr),
            format_real(r.ks),
            format_real(r.w1),
            format_real(r.mode_hit_rate),
            format_real(r.mode_freq_max_z),
            join_reals(&r.mode_freqs),
            join_reals(&r.output_mean),
            join_reals(&r.output_var),
            format_real(r.final_loss),
            r.note.clone(),
            r.is_divergent().to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| IndiError::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8"))
}

fn trajectories_csv(records: &[TrajectoryRecord]) -> Result<String> {
    let dim = records
        .iter()
        .flat_map(|r| r.points.first())
        .map(|p| p.values.len())
        .next()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let path = Path::new("<trajectories>");
    let mut header: Vec<String> = [
        "variant",
        "sampler",
        "n_steps",
        "replicate",
        "input_index",
        "step_index",
        "t",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in records {
        for p in &r.points {
            let mut rec = vec![
                r.variant.clone(),
                r.sampler.clone(),
                r.n_steps.to_string(),
                r.replicate.to_string(),
                r.input_index.to_string(),
                p.step_index.to_string(),
                format_real(p.t),
            ];
            rec.extend(p.values.iter().map(|v| format_real(*v)));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| IndiError::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("UTF-8"))
}

fn loss_csv(curves: &[LossCurve]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let path = Path::new("<loss>");
    w.write_record(["variant", "step", "loss"])
        .map_err(|e| csv_err(path, e))?;
    for c in curves {
        for (i, v) in c.values.iter().enumerate() {
            w.write_record([c.variant.clone(), i.to_string(), format_real(*v)])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| IndiError::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("UTF-8"))
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| IndiError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the report into `dir` and returns the files created.
///
/// CSV output is `results.csv` (header only when there are no rows), plus
/// `trajectories.csv` and `loss_curves.csv` when present. JSON output is a
/// single `report.json` holding everything, including the config echo.
pub fn emit_report(report: &RunReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| IndiError::io(dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        write(
            dir.join("results.csv"),
            &rows_csv(&report.rows)?,
            &mut written,
        )?;
        if !report.trajectories.is_empty() {
            write(
                dir.join("trajectories.csv"),
                &trajectories_csv(&report.trajectories)?,
                &mut written,
            )?;
        }
        if !report.loss_curves.is_empty() {
            write(
                dir.join("loss_curves.csv"),
                &loss_csv(&report.loss_curves)?,
                &mut written,
            )?;
        }
    }
    if formats.contains(&Format::Json) {
        write(dir.join("report.json"), &report.to_json(), &mut written)?;
    }
    Ok(written)
}
