//! CSV tables and pass/fail summaries.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

use super::config::Experiment;

/// Scientific notation with ten significant digits.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.9e}")
    }
}

/// Writes `rows` under `header` to `path`, creating parent directories.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One thresholded quantity of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `measured <= threshold` (NaN fails).
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured <= threshold,
            measured,
            threshold,
        }
    }

    /// Passes when `measured >= threshold` (NaN fails).
    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured >= threshold,
            measured,
            threshold,
        }
    }
}

/// Outcome of one experiment: its checks and the files it wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Writes `<experiment>_summary.csv` into `dir` and records it.
    pub fn write_summary(&mut self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}_summary.csv", self.experiment.as_str()));
        let rows: Vec<Vec<String>> = self
            .checks
            .iter()
            .map(|c| {
                vec![
                    self.experiment.as_str().into(),
                    c.name.clone(),
                    result_word(c.passed).into(),
                    sci(c.measured),
                    sci(c.threshold),
                ]
            })
            .collect();
        write_csv(&path, &["experiment", "check", "result", "measured", "threshold"], &rows)?;
        self.files.push(path.clone());
        Ok(path)
    }
}

fn result_word(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

impl fmt::Display for Report {
    /// One line per check, then an overall line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.experiment.as_str();
        for c in &self.checks {
            writeln!(
                f,
                "{e} {} {} measured={} threshold={}",
                c.name,
                result_word(c.passed),
                sci(c.measured),
                sci(c.threshold)
            )?;
        }
        write!(f, "{e} {}", result_word(self.passed()))
    }
}
