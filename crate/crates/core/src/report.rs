//! Run orchestration: optimizer runs, artifact files and the summary row.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::export::{write_density_image, write_voxels};
use crate::grid::{DensityField, Direction, GridDims};
use crate::optimizer::{run_reference_with, run_selfsupporting_with, History, IterRecord, OptRun};
use crate::problem::ProblemSpec;
use crate::support::{enumerate_supported, unsupported_set, DetectionParams, OverhangKernel};

/// Threshold of the final feasibility check.
pub const FINAL_TAU: f64 = 0.5;
/// Allowed volume excess at termination.
pub const VOLUME_SLACK: f64 = crate::optimizer::VOLUME_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Reference,
    SelfSupporting,
    Both,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Reference => "reference",
            Mode::SelfSupporting => "selfsupporting",
            Mode::Both => "both",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reference" | "ref" => Ok(Mode::Reference),
            "selfsupporting" | "self-supporting" | "ss" => Ok(Mode::SelfSupporting),
            "both" => Ok(Mode::Both),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

/// Numbers of one run, one row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub name: String,
    pub mode: Mode,
    pub dims: GridDims,
    pub c_ref: Option<f64>,
    pub c: f64,
    pub ratio: Option<f64>,
    /// Unsupported count of the reference design, when one was run.
    pub unsupported_ref: Option<usize>,
    /// Unsupported count of the final design, recounted by enumeration.
    pub unsupported: usize,
    pub removed: usize,
    pub volume_fraction: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub directions: Vec<Direction>,
    pub feasible: bool,
}

impl Summary {
    pub const CSV_HEADER: &'static str = "mode,nx,ny,nz,c_ref,c,ratio,unsupported_ref,unsupported,\
removed,vol_frac,iterations,wall_seconds,directions,feasible,name";

    pub fn to_csv(&self) -> String {
        fn opt<T: fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        let dirs: Vec<String> = self.directions.iter().map(|d| d.to_string()).collect();
        format!(
            "{}\n{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.mode,
            self.dims.nx,
            self.dims.ny,
            self.dims.nz,
            opt(&self.c_ref),
            self.c,
            opt(&self.ratio),
            opt(&self.unsupported_ref),
            self.unsupported,
            self.removed,
            self.volume_fraction,
            self.iterations,
            self.wall_seconds,
            dirs.join(";"),
            self.feasible,
            self.name
        )
    }

    /// Inverse of [`Summary::to_csv`]. The name is the last column and may
    /// contain commas.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let err = |m: String| Error::Parse(format!("summary: {m}"));
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(Self::CSV_HEADER) {
            return Err(err("missing or wrong header".into()));
        }
        let row = lines.next().ok_or_else(|| err("missing data row".into()))?;
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(err("more than one data row".into()));
        }
        let f: Vec<&str> = row.splitn(16, ',').collect();
        if f.len() != 16 {
            return Err(err(format!("expected 16 fields, got {}", f.len())));
        }
        fn num<T: FromStr>(f: &[&str], i: usize) -> Result<T> {
            f[i].parse().map_err(|_| Error::Parse(format!("summary: bad value `{}` in column {}", f[i], i + 1)))
        }
        fn opt<T: FromStr>(f: &[&str], i: usize) -> Result<Option<T>> {
            if f[i].is_empty() {
                Ok(None)
            } else {
                num(f, i).map(Some)
            }
        }
        let directions = if f[13].is_empty() {
            Vec::new()
        } else {
            f[13].split(';').map(str::parse).collect::<Result<Vec<Direction>>>()?
        };
        Ok(Self {
            mode: f[0].parse()?,
            dims: GridDims::new(num(&f, 1)?, num(&f, 2)?, num(&f, 3)?)?,
            c_ref: opt(&f, 4)?,
            c: num(&f, 5)?,
            ratio: opt(&f, 6)?,
            unsupported_ref: opt(&f, 7)?,
            unsupported: num(&f, 8)?,
            removed: num(&f, 9)?,
            volume_fraction: num(&f, 10)?,
            iterations: num(&f, 11)?,
            wall_seconds: num(&f, 12)?,
            directions,
            feasible: num(&f, 14)?,
            name: f[15].to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: Summary,
    /// Final design of the last run.
    pub field: DensityField,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn text(&self) -> String {
        let s = &self.summary;
        let mut t = String::new();
        let _ = writeln!(t, "problem      {} ({})", s.name, s.dims);
        let _ = writeln!(t, "mode         {}", s.mode);
        if let Some(c) = s.c_ref {
            let _ = writeln!(t, "C_ref        {c:.4}");
        }
        let _ = writeln!(t, "C            {:.4}", s.c);
        if let Some(r) = s.ratio {
            let _ = writeln!(t, "C/C_ref      {:.2}%", 100.0 * r);
        }
        if let Some(u) = s.unsupported_ref {
            let _ = writeln!(t, "unsupported (reference)  {u}");
        }
        let _ = writeln!(t, "unsupported  {}", s.unsupported);
        let _ = writeln!(t, "removed      {}", s.removed);
        let _ = writeln!(t, "volume       {:.5}", s.volume_fraction);
        let dirs: Vec<String> = s.directions.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(t, "directions   {}", dirs.join(" "));
        let _ = writeln!(t, "iterations   {}", s.iterations);
        let _ = writeln!(t, "wall time    {:.1} s", s.wall_seconds);
        let _ = writeln!(t, "feasible     {}", s.feasible);
        for a in &self.artifacts {
            let _ = writeln!(t, "wrote        {}", a.display());
        }
        t
    }
}

/// Unsupported elements of the binarized field over all `dirs`, counted by
/// per-element enumeration.
pub fn recount_unsupported(field: &DensityField, kernel: &OverhangKernel, dirs: &[Direction]) -> usize {
    let bin = field.binarized(FINAL_TAU);
    let mut all: Vec<usize> = dirs
        .iter()
        .flat_map(|&d| {
            let mask = enumerate_supported(&bin, kernel, DetectionParams::new(FINAL_TAU, d));
            unsupported_set(&mask, &bin, FINAL_TAU)
        })
        .collect();
    all.sort_unstable();
    all.dedup();
    all.len()
}

/// Runs the requested optimizations and writes `history.csv`,
/// `summary.csv`, `report.txt` and `density.pgm` (2D) or `field.vtk` (3D)
/// into `out_dir`. With `Mode::Both` the reference run is written with a
/// `reference_` prefix.
pub fn run(spec: &ProblemSpec, mode: Mode, out_dir: impl AsRef<Path>) -> Result<RunReport> {
    run_with(spec, mode, out_dir, &mut |_, _| {})
}

/// [`run`] with a progress callback receiving the phase name and each
/// iteration record.
pub fn run_with(
    spec: &ProblemSpec,
    mode: Mode,
    out_dir: impl AsRef<Path>,
    progress: &mut dyn FnMut(&str, &IterRecord),
) -> Result<RunReport> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out)?;
    let kernel = spec.kernel()?;
    let start = Instant::now();
    let mut artifacts = Vec::new();

    let reference = if mode == Mode::SelfSupporting {
        None
    } else {
        let prefix = if mode == Mode::Both { "reference_" } else { "" };
        let r = phase(out, prefix, "reference", &mut artifacts, progress, |obs| run_reference_with(spec, obs))?;
        Some(r)
    };
    let last = if mode == Mode::Reference {
        None
    } else {
        Some(phase(out, "", "selfsupporting", &mut artifacts, progress, |obs| {
            run_selfsupporting_with(spec, obs)
        })?)
    };
    let wall_seconds = start.elapsed().as_secs_f64();

    let fin: &OptRun = last.as_ref().or(reference.as_ref()).expect("at least one run");
    let unsupported = recount_unsupported(&fin.field, &kernel, &fin.directions);
    let volume_fraction = fin.field.volume_fraction();
    let c_ref = reference.as_ref().map(|r| r.compliance);
    let feasible = volume_fraction <= spec.volume_fraction + VOLUME_SLACK
        && (mode == Mode::Reference || unsupported == 0);
    let summary = Summary {
        name: spec.name.clone(),
        mode,
        dims: spec.dims,
        c_ref,
        c: fin.compliance,
        ratio: c_ref.map(|c| fin.compliance / c),
        unsupported_ref: reference.as_ref().map(|r| recount_unsupported(&r.field, &kernel, &r.directions)),
        unsupported,
        removed: fin.removed,
        volume_fraction,
        iterations: fin.history.len(),
        wall_seconds,
        directions: fin.directions.clone(),
        feasible,
    };
    let summary_path = out.join("summary.csv");
    std::fs::write(&summary_path, summary.to_csv())?;
    artifacts.push(summary_path);
    let report_path = out.join("report.txt");
    artifacts.push(report_path.clone());
    let report = RunReport { summary, field: fin.field.clone(), artifacts };
    std::fs::write(&report_path, report.text())?;
    Ok(report)
}

/// One optimizer run with its history and design written out. Failures
/// still write the iterations logged so far.
fn phase(
    out: &Path,
    prefix: &str,
    label: &str,
    artifacts: &mut Vec<PathBuf>,
    progress: &mut dyn FnMut(&str, &IterRecord),
    f: impl FnOnce(&mut dyn FnMut(&IterRecord)) -> Result<OptRun>,
) -> Result<OptRun> {
    let mut log = History::default();
    let result = f(&mut |r| {
        log.records.push(*r);
        progress(label, r);
    });
    let history_path = out.join(format!("{prefix}history.csv"));
    match result {
        Ok(run) => {
            std::fs::write(&history_path, run.history.to_csv())?;
            artifacts.push(history_path);
            let design = if run.field.dims().is_2d() {
                let p = out.join(format!("{prefix}density.pgm"));
                write_density_image(&run.field, &p)?;
                p
            } else {
                let p = out.join(format!("{prefix}field.vtk"));
                write_voxels(&run.field, Some(FINAL_TAU), &p)?;
                p
            };
            artifacts.push(design);
            Ok(run)
        }
        Err(e) => {
            let history = match &e {
                Error::NotConverged { history, .. } | Error::RemovalBoundExceeded { history, .. } => history,
                _ => &log,
            };
            std::fs::write(&history_path, history.to_csv())?;
            Err(Error::RunFailed { path: history_path, source: Box::new(e) })
        }
    }
}
