//! Scores file I/O.
//!
//! CSV with header `sample_id,label,s_0,...,s_{C-1}` and one row per sample.
//! Scores are written with 17 significant decimal digits and round-trip
//! bit-exactly.

use std::fs;
use std::path::Path;

use super::ScoreMatrix;
use crate::error::{Error, Result};
use crate::numerics::Mat;

pub fn write_scores(matrix: &ScoreMatrix, path: &Path) -> Result<()> {
    let mut out = String::from("sample_id,label");
    for j in 0..matrix.n_classes() {
        out.push_str(&format!(",s_{j}"));
    }
    out.push('\n');
    for i in 0..matrix.n_samples() {
        out.push_str(&format!(
            "{},{}",
            matrix.sample_ids()[i],
            matrix.labels()[i]
        ));
        for x in matrix.row(i) {
            out.push_str(&format!(",{x:.16e}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_scores(path: &Path, source_tag: impl Into<String>) -> Result<ScoreMatrix> {
    let text = fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&path_str, 1, "missing header"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "sample_id" || cols[1] != "label" {
        return Err(Error::parse(&path_str, 1, "malformed scores header"));
    }
    let n_classes = cols.len() - 2;

    let mut sample_ids = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_classes + 2 {
            return Err(Error::parse(
                &path_str,
                idx + 1,
                format!("expected {} fields, found {}", n_classes + 2, fields.len()),
            ));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(&path_str, idx + 1, format!("bad sample id {:?}", fields[0])))?;
        let label: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(&path_str, idx + 1, format!("bad label {:?}", fields[1])))?;
        sample_ids.push(id);
        labels.push(label);
        for f in &fields[2..] {
            let x: f64 = f
                .parse()
                .map_err(|_| Error::parse(&path_str, idx + 1, format!("bad score {f:?}")))?;
            data.push(x);
        }
    }
    let n = sample_ids.len();
    ScoreMatrix::new(Mat::new(n, n_classes, data)?, labels, sample_ids, source_tag)
}
