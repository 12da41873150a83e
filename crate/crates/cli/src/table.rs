//! Small CSV tables exchanged between subcommands.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pedinet::pedigree::Pedigree;

pub struct Outcomes {
    pub family_ids: Vec<String>,
    pub y: Vec<f64>,
    /// Present when the file has a `weight` column.
    pub weights: Option<Vec<f64>>,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .with_context(|| format!("{} has no `{name}` column", path.display()))
}

fn parse_f64(s: &str, line: u64, path: &Path) -> Result<f64> {
    s.trim()
        .parse()
        .with_context(|| format!("{} line {line}: bad number {s:?}", path.display()))
}

pub fn read_outcomes(path: &Path) -> Result<Outcomes> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let id = column(&headers, "family_id", path)?;
    let y0 = column(&headers, "y0", path)?;
    let w = headers.iter().position(|h| h == "weight");
    let mut out = Outcomes {
        family_ids: Vec::new(),
        y: Vec::new(),
        weights: w.map(|_| Vec::new()),
    };
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        out.family_ids.push(rec[id].to_string());
        let y = parse_f64(&rec[y0], line, path)?;
        if y != 0.0 && y != 1.0 {
            bail!("{} line {line}: y0 must be 0 or 1", path.display());
        }
        out.y.push(y);
        if let (Some(k), Some(ws)) = (w, out.weights.as_mut()) {
            ws.push(parse_f64(&rec[k], line, path)?);
        }
    }
    Ok(out)
}

pub fn write_outcomes(path: &Path, ids: &[&str], y: &[bool]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["family_id", "y0"])?;
    for (id, y) in ids.iter().zip(y) {
        w.write_record([*id, if *y { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(())
}

/// `risk_t` keyed by family id.
pub fn read_predictions(path: &Path) -> Result<HashMap<String, f64>> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let id = column(&headers, "family_id", path)?;
    let risk = column(&headers, "risk_t", path)?;
    let mut out = HashMap::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = parse_f64(&rec[risk], line, path)?;
        if !(0.0..=1.0).contains(&v) {
            bail!("{} line {line}: risk {v} outside [0, 1]", path.display());
        }
        if out.insert(rec[id].to_string(), v).is_some() {
            bail!("{} line {line}: duplicate family {}", path.display(), &rec[id]);
        }
    }
    Ok(out)
}

/// Labels in pedigree order; every family must have an outcome.
pub fn align_labels(peds: &[Pedigree], outcomes: &Outcomes) -> Result<Vec<f64>> {
    let index: HashMap<&str, f64> = outcomes
        .family_ids
        .iter()
        .map(String::as_str)
        .zip(outcomes.y.iter().copied())
        .collect();
    peds.iter()
        .map(|p| {
            index
                .get(p.family_id.as_str())
                .copied()
                .with_context(|| format!("no outcome for family {}", p.family_id))
        })
        .collect()
}
