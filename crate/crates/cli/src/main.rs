use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use selfsupport::grid::{Direction, GridDims};
use selfsupport::problem::{load_problem, preset, DirectionPolicy, ProblemSpec, PRESET_NAMES};
use selfsupport::report::{run_with, Mode};
use selfsupport::support::{benchmark_detection, DetectionTiming};

/// Minimum-compliance topology optimization with a self-supporting
/// (overhang) constraint.
///
/// Exits with 0 when the run met its feasibility checks, 1 when it finished
/// infeasible and 2 on errors.
#[derive(Debug, Parser)]
#[command(name = "selfsupport", version)]
struct Args {
    /// Problem config file (TOML).
    problem: Option<PathBuf>,

    /// Built-in problem instead of a config file.
    #[arg(long, conflicts_with = "problem")]
    preset: Option<String>,

    /// reference, selfsupporting or both.
    #[arg(long, default_value = "both")]
    mode: Mode,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    max_iters: Option<usize>,

    /// Overhang angle in degrees from the build plate.
    #[arg(long)]
    angle: Option<f64>,

    /// Volume fraction.
    #[arg(long)]
    vf: Option<f64>,

    /// Filter radius in elements.
    #[arg(long)]
    rmin: Option<f64>,

    /// Pin build direction(s), e.g. `+y` or `+x,-x`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    direction: Vec<Direction>,

    /// Time batched detection against enumeration on a random NXxNY[xNZ]
    /// field and print one CSV row.
    #[arg(long, value_name = "DIMS")]
    benchmark_detection: Option<GridDims>,

    /// Repeats per method for the benchmark.
    #[arg(long, default_value_t = 5)]
    repeats: usize,

    #[arg(long)]
    list_presets: bool,

    /// Suppress per-iteration progress.
    #[arg(short, long)]
    quiet: bool,
}

fn problem(args: &Args) -> anyhow::Result<ProblemSpec> {
    let mut spec = match (&args.problem, &args.preset) {
        (Some(path), _) => load_problem(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(name)) => preset(name)?,
        (None, None) => bail!("give a problem file or --preset (see --list-presets)"),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(n) = args.max_iters {
        spec.schedule.max_iters = n;
    }
    if let Some(a) = args.angle {
        spec.overhang_angle = a;
    }
    if let Some(f) = args.vf {
        spec.volume_fraction = f;
    }
    if let Some(r) = args.rmin {
        spec.filter_radius = r;
    }
    if !args.direction.is_empty() {
        spec.directions = DirectionPolicy::Pinned(args.direction.clone());
    }
    spec.validate()?;
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match real_main(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main(args: &Args) -> anyhow::Result<bool> {
    if args.list_presets {
        for name in PRESET_NAMES {
            let p = preset(name)?;
            println!("{name:20} {} vf {}", p.dims, p.volume_fraction);
        }
        return Ok(true);
    }
    if let Some(dims) = args.benchmark_detection {
        let seed = args.seed.unwrap_or(0);
        let t = benchmark_detection(dims, args.repeats.max(1), seed)?;
        println!("{}", DetectionTiming::CSV_HEADER);
        println!("{}", t.csv_row());
        return Ok(true);
    }
    let spec = problem(args)?;
    let quiet = args.quiet;
    let report = run_with(&spec, args.mode, &args.out, &mut |phase, r| {
        if !quiet && (r.iter % 10 == 0 || r.iter == 1) {
            eprintln!(
                "{phase:>14} {:4}  c {:10.4}  vol {:.4}  unsupported {:5}  m_nd {:.3}  beta {}",
                r.iter, r.compliance, r.volume_fraction, r.unsupported, r.m_nd, r.beta
            );
        }
    })?;
    print!("{}", report.text());
    Ok(report.summary.feasible)
}
