//! Model file I/O.
//!
//! ```text
//! PMODEL 1 <family>
//! phi <w0> ... rho <w0> ... dropout <rate> hier <n_centroids> <group_k>
//! seeds <data_order> <init> <dropout>
//! params <count>
//! <value>                (one parameter per line)
//! ```
//!
//! Parameters are written with 17 significant decimal digits; a load
//! reproduces them bit-exactly and re-validates the layout length.

use std::fs;
use std::path::Path;

use super::{ModelArch, ModelFamily, SeedBundle, TrainedModel};
use crate::error::{Error, Result};

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let arch = &model.arch;
    let mut out = String::new();
    out.push_str(&format!("PMODEL 1 {}\n", arch.family.name()));
    out.push_str("phi");
    for w in &arch.phi_widths {
        out.push_str(&format!(" {w}"));
    }
    out.push_str(" rho");
    for w in &arch.rho_widths {
        out.push_str(&format!(" {w}"));
    }
    out.push_str(&format!(
        " dropout {:.16e} hier {} {}\n",
        arch.dropout_rate, arch.n_centroids, arch.group_k
    ));
    out.push_str(&format!(
        "seeds {} {} {}\n",
        model.seeds.data_order, model.seeds.init, model.seeds.dropout
    ));
    out.push_str(&format!("params {}\n", model.params.len()));
    for p in &model.params {
        out.push_str(&format!("{p:.16e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

fn parse_width_list<'a>(
    tokens: &mut std::iter::Peekable<std::slice::Iter<'a, &'a str>>,
) -> Result<Vec<usize>> {
    let mut widths = Vec::new();
    while let Some(tok) = tokens.peek() {
        match tok.parse::<usize>() {
            Ok(w) => {
                widths.push(w);
                tokens.next();
            }
            Err(_) => break,
        }
    }
    Ok(widths)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();

    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "PMODEL" {
        return Err(bad(format!("malformed header {header:?}")));
    }
    if fields[1] != "1" {
        return Err(bad(format!("unsupported version {}", fields[1])));
    }
    let family = ModelFamily::from_name(fields[2]).map_err(|e| bad(e.to_string()))?;

    let arch_line = lines.next().ok_or_else(|| bad("missing architecture line"))?;
    let tokens: Vec<&str> = arch_line.split_whitespace().collect();
    let mut it = tokens.iter().peekable();
    if it.next() != Some(&"phi") {
        return Err(bad("architecture line must start with `phi`"));
    }
    let phi_widths = parse_width_list(&mut it)?;
    if it.next() != Some(&"rho") {
        return Err(bad("expected `rho` width list"));
    }
    let rho_widths = parse_width_list(&mut it)?;
    if it.next() != Some(&"dropout") {
        return Err(bad("expected `dropout`"));
    }
    let dropout_rate: f64 = it
        .next()
        .ok_or_else(|| bad("missing dropout rate"))?
        .parse()
        .map_err(|_| bad("bad dropout rate"))?;
    if it.next() != Some(&"hier") {
        return Err(bad("expected `hier`"));
    }
    let n_centroids: usize = it
        .next()
        .ok_or_else(|| bad("missing centroid count"))?
        .parse()
        .map_err(|_| bad("bad centroid count"))?;
    let group_k: usize = it
        .next()
        .ok_or_else(|| bad("missing group size"))?
        .parse()
        .map_err(|_| bad("bad group size"))?;
    if it.next().is_some() {
        return Err(bad("trailing tokens on architecture line"));
    }

    let seeds_line = lines.next().ok_or_else(|| bad("missing seeds line"))?;
    let seed_fields: Vec<&str> = seeds_line.split_whitespace().collect();
    if seed_fields.len() != 4 || seed_fields[0] != "seeds" {
        return Err(bad(format!("malformed seeds line {seeds_line:?}")));
    }
    let parse_seed = |s: &str| -> Result<u64> {
        s.parse().map_err(|_| bad(format!("bad seed {s:?}")))
    };
    let seeds = SeedBundle {
        data_order: parse_seed(seed_fields[1])?,
        init: parse_seed(seed_fields[2])?,
        dropout: parse_seed(seed_fields[3])?,
    };

    let count_line = lines.next().ok_or_else(|| bad("missing params line"))?;
    let count_fields: Vec<&str> = count_line.split_whitespace().collect();
    if count_fields.len() != 2 || count_fields[0] != "params" {
        return Err(bad(format!("malformed params line {count_line:?}")));
    }
    let count: usize = count_fields[1]
        .parse()
        .map_err(|_| bad("bad parameter count"))?;

    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.next().ok_or_else(|| {
            bad(format!(
                "truncated: expected {count} parameters, found {}",
                params.len()
            ))
        })?;
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad parameter {line:?}")))?;
        params.push(v);
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("trailing data after parameters"));
    }

    let arch = ModelArch {
        family,
        phi_widths,
        rho_widths,
        dropout_rate,
        n_centroids,
        group_k,
    };
    TrainedModel::assemble(arch, params, seeds, None)
        .map_err(|e| bad(format!("inconsistent model file: {e}")))
}
