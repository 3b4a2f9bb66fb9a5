//! Staged compliance minimization with self-supporting constraints.

mod mma;
mod run;
mod schedule;

use std::fmt::Write as _;

pub use mma::{Func, Mma, MmaParams};
pub use run::{
    run_reference, run_reference_with, run_selfsupporting, run_selfsupporting_with, strict_removal,
};
pub use schedule::Schedule;

/// Volume fraction overshoot accepted as converged and as feasible.
pub const VOLUME_TOL: f64 = 1e-3;

use crate::error::{Error, Result};
use crate::grid::{DensityField, Direction};
use crate::support::{DetectionParams, Detector, OverhangKernel};

/// One line of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub compliance: f64,
    pub volume_fraction: f64,
    /// Largest `U` over the constrained directions.
    pub u_value: f64,
    /// Unsupported elements, union over the constrained directions.
    pub unsupported: usize,
    pub m_nd: f64,
    /// Largest bound over the constrained directions; infinite before the
    /// constraints are active.
    pub eps: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<IterRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "iter,compliance,vol_frac,U,unsupported,m_nd,eps,beta";

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    /// CSV text; floats use the shortest representation that parses back
    /// to the same value.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.iter,
                r.compliance,
                r.volume_fraction,
                r.u_value,
                r.unsupported,
                r.m_nd,
                r.eps,
                r.beta
            );
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == Self::CSV_HEADER => {}
            _ => return Err(Error::Parse("history: missing or wrong header".into())),
        }
        let mut records = Vec::new();
        for (n, line) in lines {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 8 {
                return Err(Error::Parse(format!(
                    "history line {}: expected 8 fields, got {}",
                    n + 1,
                    f.len()
                )));
            }
            let float = |i: usize| {
                f[i].parse::<f64>()
                    .map_err(|e| Error::Parse(format!("history line {}: field {}: {e}", n + 1, i + 1)))
            };
            let int = |i: usize| {
                f[i].parse::<usize>()
                    .map_err(|e| Error::Parse(format!("history line {}: field {}: {e}", n + 1, i + 1)))
            };
            records.push(IterRecord {
                iter: int(0)?,
                compliance: float(1)?,
                volume_fraction: float(2)?,
                u_value: float(3)?,
                unsupported: int(4)?,
                m_nd: float(5)?,
                eps: float(6)?,
                beta: float(7)?,
            });
        }
        Ok(Self { records })
    }
}

/// Result of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptRun {
    pub history: History,
    /// Final physical densities.
    pub field: DensityField,
    /// Build directions the result was checked (and, for self-supporting
    /// runs, constrained) against.
    pub directions: Vec<Direction>,
    pub compliance: f64,
    pub c_ref: Option<f64>,
    /// Unsupported elements of the final field at the black-white threshold.
    pub unsupported_count: usize,
    /// Elements deleted by strict removal.
    pub removed: usize,
}

/// `C / C_ref`.
pub fn compliance_ratio(run: &OptRun) -> Result<f64> {
    match run.c_ref {
        Some(c_ref) if c_ref > 0.0 => Ok(run.compliance / c_ref),
        _ => Err(Error::MissingReference),
    }
}

/// `sum 4 rho (1 - rho) / n` over non-passive elements; 0 for black-white,
/// 1 for uniform 0.5.
pub fn measure_nondiscreteness(field: &DensityField) -> f64 {
    let n = field.active_count();
    if n == 0 {
        return 0.0;
    }
    let s: f64 = field
        .values()
        .iter()
        .zip(field.passive())
        .filter(|(_, p)| !**p)
        .map(|(&r, _)| 4.0 * r * (1.0 - r))
        .sum();
    s / n as f64
}

/// Unsupported element count for each candidate direction.
pub fn unsupported_counts(
    field: &DensityField,
    candidates: &[Direction],
    kernel: &OverhangKernel,
    tau: f64,
) -> Vec<usize> {
    candidates
        .iter()
        .map(|&d| {
            Detector::new(field.dims(), kernel, DetectionParams::new(tau, d))
                .unsupported(field.values(), field.passive())
                .len()
        })
        .collect()
}

/// Unsupported elements in the union over `directions`.
pub fn unsupported_union(
    field: &DensityField,
    directions: &[Direction],
    kernel: &OverhangKernel,
    tau: f64,
) -> Vec<usize> {
    let mut all: Vec<usize> = directions
        .iter()
        .flat_map(|&d| {
            Detector::new(field.dims(), kernel, DetectionParams::new(tau, d))
                .unsupported(field.values(), field.passive())
        })
        .collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// Candidate with the fewest unsupported elements; ties go to the earlier
/// candidate.
pub fn select_direction(
    field: &DensityField,
    candidates: &[Direction],
    kernel: &OverhangKernel,
    tau: f64,
) -> Result<Direction> {
    let counts = unsupported_counts(field, candidates, kernel, tau);
    let best = counts
        .iter()
        .enumerate()
        .min_by_key(|(i, c)| (**c, *i))
        .map(|(i, _)| i)
        .ok_or(Error::NoCandidates)?;
    Ok(candidates[best])
}
