//! Result records and their CSV form.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const HEADER: [&str; 14] =
    ["experiment", "epsilon", "g0", "g1", "N", "k", "q", "p", "scheme", "replicates", "seed", "value", "stderr", "bound"];

/// One CSV row. Optional fields are written as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    pub epsilon: f64,
    pub g0: f64,
    pub g1: f64,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub q: Option<usize>,
    pub p: Option<u32>,
    pub scheme: Option<String>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub value: f64,
    pub stderr: Option<f64>,
    pub bound: Option<f64>,
}

impl ResultRecord {
    /// A record carrying the model parameters of `cfg` and nothing else.
    pub fn new(cfg: &ExperimentConfig, experiment: impl Into<String>, value: f64) -> Self {
        ResultRecord {
            experiment: experiment.into(),
            epsilon: cfg.model.epsilon,
            g0: cfg.model.g0,
            g1: cfg.model.g1,
            n: None,
            k: None,
            q: None,
            p: None,
            scheme: None,
            replicates: None,
            seed: None,
            value,
            stderr: None,
            bound: None,
        }
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn q(mut self, q: usize) -> Self {
        self.q = Some(q);
        self
    }

    pub fn p(mut self, p: u32) -> Self {
        self.p = Some(p);
        self
    }

    pub fn scheme(mut self, scheme: impl ToString) -> Self {
        self.scheme = Some(scheme.to_string());
        self
    }

    pub fn replicates(mut self, replicates: usize, seed: u64) -> Self {
        self.replicates = Some(replicates);
        self.seed = Some(seed);
        self
    }

    /// Non-finite errors (too few replicates) are left out.
    pub fn stderr(mut self, se: f64) -> Self {
        self.stderr = se.is_finite().then_some(se);
        self
    }

    pub fn bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    fn fields(&self) -> [String; 14] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            self.experiment.clone(),
            float(self.epsilon),
            float(self.g0),
            float(self.g1),
            opt(self.n.map(|v| v.to_string())),
            opt(self.k.map(|v| v.to_string())),
            opt(self.q.map(|v| v.to_string())),
            opt(self.p.map(|v| v.to_string())),
            opt(self.scheme.clone()),
            opt(self.replicates.map(|v| v.to_string())),
            opt(self.seed.map(|v| v.to_string())),
            float(self.value),
            opt(self.stderr.map(float)),
            opt(self.bound.map(float)),
        ]
    }
}

/// 17 significant digits in scientific notation.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn check(r: &ResultRecord) -> Result<(), CliError> {
    if !r.value.is_finite() {
        return Err(CliError::Record(format!("{}: non-finite value {}", r.experiment, r.value)));
    }
    if r.experiment.contains("tv") && !(0.0..=1.0).contains(&r.value) {
        return Err(CliError::Record(format!("{}: total variation {} outside [0, 1]", r.experiment, r.value)));
    }
    Ok(())
}

/// Writes `records` as CSV with LF line endings.
pub fn write_records<W: Write>(out: W, records: &[ResultRecord]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        check(r)?;
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, records: &[ResultRecord]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_records(File::create(path)?, records)
}

/// Writes a plain table with its own header, for plot-ready companions.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
