use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Log-log growth exponent fitted over the largest available decade of
/// probe radii, with a percentile bootstrap band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub lower: f64,
    pub upper: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub point: Vec<f64>,
    /// Distance to violation; negative means the bound is violated there.
    pub margin: f64,
}

/// Outcome of one executable check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub check: String,
    /// The inequality being checked, written out.
    pub reference: String,
    pub constant: Option<f64>,
    pub exponent: Option<ExponentFit>,
    pub worst: Option<WorstCase>,
    pub tolerance: f64,
    pub passed: bool,
    /// Whether `passed` participates in the experiment's exit status.
    pub gated: bool,
    pub sample_size: usize,
    pub seed: Option<u64>,
    pub wall_clock_ms: Option<f64>,
    /// Number of probe rows beyond the extrapolation radius.
    pub extrapolated_rows: usize,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(check: &str, reference: &str, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            reference: reference.into(),
            constant: None,
            exponent: None,
            worst: None,
            tolerance,
            passed: false,
            gated: true,
            sample_size: 0,
            seed: None,
            wall_clock_ms: None,
            extrapolated_rows: 0,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.into(), value);
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    /// A report for a check that could not run; always gated and failing.
    pub fn failed(check: &str, reference: &str, reason: impl Into<String>) -> Self {
        let mut r = Self::new(check, reference, 0.0);
        r.note(reason);
        r
    }

    /// Checks the report's own invariants: a pass never coexists with a
    /// worst margin below `-tolerance`, and exponent bands are non-empty.
    pub fn is_consistent(&self) -> bool {
        let margin_ok = match (&self.worst, self.passed && self.gated) {
            (Some(w), true) => w.margin >= -self.tolerance,
            _ => true,
        };
        let band_ok = self.exponent.as_ref().map_or(true, |e| e.lower <= e.slope && e.slope <= e.upper);
        margin_ok && band_ok
    }
}
