use std::path::Path;

use crate::dynamics::{EnsembleHardness, Estimator};
use crate::error::{HlabError, Result};

/// Shortest round-tripping text for a real, with `inf` for infinities.
pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HlabError::io(path, io),
        other => HlabError::Format(format!("{other:?}")),
    })
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HlabError::io(path, io),
        other => HlabError::Format(format!("{other:?}")),
    })
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, path: &Path) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| HlabError::Format(format!("{}: bad {what} {s:?}", path.display())))
}

/// `sample_id,estimator,ensemble_size,hardness`, one row per sample.
pub fn write_hardness_csv(path: &Path, eh: &EnsembleHardness) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sample_id", "estimator", "ensemble_size", "hardness"])?;
    let size = eh.ensemble_size.to_string();
    for (i, &v) in eh.values.iter().enumerate() {
        w.write_record([i.to_string().as_str(), eh.estimator.name(), &size, &num(v)])?;
    }
    w.flush().map_err(|e| HlabError::io(path, e))
}

pub fn read_hardness_csv(path: &Path) -> Result<EnsembleHardness> {
    let mut r = reader(path)?;
    let mut estimator: Option<Estimator> = None;
    let mut size = 0;
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(HlabError::Format(format!("{}: expected 4 columns", path.display())));
        }
        let id: usize = parse(&rec[0], "sample id", path)?;
        if id != values.len() {
            return Err(HlabError::Format(format!(
                "{}: sample ids must run 0..n in order, found {id} at row {}",
                path.display(),
                values.len()
            )));
        }
        let est: Estimator = rec[1].parse()?;
        if estimator.is_some_and(|e| e != est) {
            return Err(HlabError::Format(format!("{}: mixed estimators", path.display())));
        }
        estimator = Some(est);
        size = parse(&rec[2], "ensemble size", path)?;
        values.push(parse::<f64>(&rec[3], "hardness", path)?);
    }
    let estimator = estimator.ok_or_else(|| HlabError::Format(format!("{}: no rows", path.display())))?;
    Ok(EnsembleHardness {
        estimator,
        ensemble_size: size,
        values,
    })
}

/// Mean recall per class from `class_recall.csv` (`class_id,recall,precision`).
pub fn read_class_recall(path: &Path) -> Result<Vec<f64>> {
    let mut r = reader(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let c: usize = parse(&rec[0], "class id", path)?;
        if c != out.len() {
            return Err(HlabError::Format(format!("{}: class ids out of order", path.display())));
        }
        out.push(parse(&rec[1], "recall", path)?);
    }
    Ok(out)
}

/// Per-model per-class recall from `eval_metrics.csv`, using the eval split
/// when present and the train split otherwise.
pub(crate) fn read_model_recall(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = reader(path)?;
    let mut rows: Vec<(String, usize, usize, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push((
            rec[1].to_string(),
            parse(&rec[0], "model", path)?,
            parse(&rec[2], "class id", path)?,
            parse(&rec[4], "recall", path)?,
        ));
    }
    let split = if rows.iter().any(|r| r.0 == "eval") { "eval" } else { "train" };
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (s, m, c, recall) in rows {
        if s != split {
            continue;
        }
        if out.len() <= m {
            out.resize(m + 1, Vec::new());
        }
        if out[m].len() != c {
            return Err(HlabError::Format(format!("{}: class ids out of order", path.display())));
        }
        out[m].push(recall);
    }
    Ok(out)
}
