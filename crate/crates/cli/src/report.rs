//! CSV reports with a provenance header block.
//!
//! Every report starts with `#`-prefixed lines recording the artifact
//! version, command, config hash, and seed, so a report is traceable to the
//! exact run that produced it. Reruns with the same inputs are byte-identical
//! (the timing command's wall-clock columns excepted).

use std::path::Path;

use crate::CliError;

pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn new(command: &str, config_hash: &str, seed: u64, notes: &[&str]) -> Report {
        let mut lines = vec![
            format!("# pointens {}", env!("CARGO_PKG_VERSION")),
            format!("# command: {command}"),
            format!("# config_hash: {config_hash}"),
            format!("# seed: {seed}"),
            "# statistics: population standard deviation; reported values are averages over runs".to_string(),
        ];
        for note in notes {
            lines.push(format!("# note: {note}"));
        }
        Report { lines }
    }

    pub fn columns(&mut self, names: &[&str]) {
        self.lines.push(names.join(","));
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }
}

/// Fixed-precision metric formatting keeps reruns byte-identical.
pub fn fmt_metric(x: f64) -> String {
    format!("{x:.6}")
}

/// Accuracy fraction as a two-decimal percentage, for stdout summaries.
pub fn fmt_percent(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}
