//! Plain-text exchange formats.
//!
//! - Sample batches: CSV with `# key=value` header comments for `d`, `n`,
//!   `seed` and `provenance`, then one column per coordinate.
//! - Radial profiles: two columns `r,s`.
//! - Semi-discrete plans: rows `y1..yd,m,w` plus a JSON sidecar with the
//!   mass residual and budgets.
//!
//! Floats are written in Rust's shortest round-trip form, so every loader
//! reproduces the written values bit for bit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use brenier_core::numeric::DiscreteMeasure;
use brenier_core::sampling::SampleProvenance;
use brenier_core::{RadialProfile, SampleBatch, SemiDiscretePlan};
use serde::{Deserialize, Serialize};

use crate::error::LabError;

fn create(path: &Path) -> Result<csv::Writer<fs::File>, LabError> {
    let file = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> LabError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => LabError::io(path, io),
        other => LabError::format(path, format!("{other:?}")),
    }
}

fn parse_f64(path: &Path, row: usize, field: &str) -> Result<f64, LabError> {
    field.trim().parse().map_err(|_| LabError::format(path, format!("row {row}: `{field}` is not a number")))
}

pub fn write_batch_csv(path: &Path, batch: &SampleBatch) -> Result<(), LabError> {
    let mut file = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    writeln!(file, "# d={}\n# n={}\n# seed={}\n# provenance={}", batch.dim(), batch.len(), batch.seed(), batch.provenance().as_str())
        .map_err(|e| LabError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let header: Vec<String> = (1..=batch.dim()).map(|k| format!("x{k}")).collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for row in batch.rows() {
        w.write_record(row.iter().map(f64::to_string)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_batch_csv(path: &Path) -> Result<SampleBatch, LabError> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let (mut d, mut n, mut seed, mut provenance) = (None, None, 0u64, SampleProvenance::External);
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let Some(comment) = line.strip_prefix('#') else { break };
        body_start += line.len();
        let Some((key, value)) = comment.trim().split_once('=') else { continue };
        let value = value.trim();
        let bad = || LabError::format(path, format!("bad header value `{key}={value}`"));
        match key.trim() {
            "d" => d = Some(value.parse::<usize>().map_err(|_| bad())?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
            "seed" => seed = value.parse().map_err(|_| bad())?,
            "provenance" => provenance = SampleProvenance::parse(value).ok_or_else(bad)?,
            _ => {}
        }
    }
    let d = d.ok_or_else(|| LabError::format(path, "missing `# d=` header"))?;
    let mut reader = csv::Reader::from_reader(&text.as_bytes()[body_start..]);
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() != d {
            return Err(LabError::format(path, format!("row {}: expected {d} columns, found {}", i + 1, record.len())));
        }
        for field in &record {
            points.push(parse_f64(path, i + 1, field)?);
        }
    }
    if let Some(n) = n {
        if points.len() != n * d {
            return Err(LabError::format(path, format!("header says n={n}, found {} rows", points.len() / d)));
        }
    }
    Ok(SampleBatch::new(d, points, seed, provenance)?)
}

/// Writes the tabulated `(r, s(r))` nodes.
pub fn write_profile_csv(path: &Path, profile: &RadialProfile) -> Result<(), LabError> {
    let mut w = create(path)?;
    w.write_record(["r", "s"]).map_err(|e| csv_err(path, e))?;
    for (r, s) in profile.nodes() {
        w.write_record([r.to_string(), s.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_profile_csv(path: &Path) -> Result<Vec<(f64, f64)>, LabError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() != 2 {
            return Err(LabError::format(path, format!("row {}: expected 2 columns", i + 1)));
        }
        out.push((parse_f64(path, i + 1, &record[0])?, parse_f64(path, i + 1, &record[1])?));
    }
    Ok(out)
}

/// Contents of the JSON file stored next to a plan CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSidecar {
    pub dim: usize,
    pub points: usize,
    pub mass_residual: f64,
    pub mc_budget: usize,
    pub iterations: usize,
    pub seed: u64,
    pub objective_trace: Vec<f64>,
}

/// `plan.csv` → `plan.json`
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_plan(path: &Path, plan: &SemiDiscretePlan) -> Result<(), LabError> {
    let target = plan.target();
    let d = target.dim();
    let mut w = create(path)?;
    let mut header: Vec<String> = (1..=d).map(|k| format!("y{k}")).collect();
    header.extend(["m".to_string(), "w".to_string()]);
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..target.len() {
        let mut row: Vec<String> = target.point(i).iter().map(f64::to_string).collect();
        row.push(target.masses()[i].to_string());
        row.push(plan.weights()[i].to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))?;
    let sidecar = PlanSidecar {
        dim: d,
        points: target.len(),
        mass_residual: plan.mass_residual(),
        mc_budget: plan.mc_budget(),
        iterations: plan.iterations(),
        seed: plan.seed(),
        objective_trace: plan.objective_trace().to_vec(),
    };
    let json_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&json_path, json).map_err(|e| LabError::io(json_path, e))
}

pub fn read_plan(path: &Path) -> Result<(SemiDiscretePlan, PlanSidecar), LabError> {
    let json_path = sidecar_path(path);
    let json = fs::read_to_string(&json_path).map_err(|e| LabError::io(&json_path, e))?;
    let sidecar: PlanSidecar = serde_json::from_str(&json).map_err(|e| LabError::format(&json_path, e.to_string()))?;
    let d = sidecar.dim;
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let (mut points, mut masses, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() != d + 2 {
            return Err(LabError::format(path, format!("row {}: expected {} columns, found {}", i + 1, d + 2, record.len())));
        }
        for field in record.iter().take(d) {
            points.push(parse_f64(path, i + 1, field)?);
        }
        masses.push(parse_f64(path, i + 1, &record[d])?);
        weights.push(parse_f64(path, i + 1, &record[d + 1])?);
    }
    if masses.len() != sidecar.points {
        return Err(LabError::format(path, format!("sidecar says {} points, found {}", sidecar.points, masses.len())));
    }
    let target = DiscreteMeasure::new(d, points, masses)?;
    let plan = SemiDiscretePlan::from_parts(target, weights, sidecar.mass_residual, sidecar.mc_budget, sidecar.seed)?;
    Ok((plan, sidecar))
}
