use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridDims, RHO_MIN};

use super::detect::{detect_build_frame, enumerate_build_frame};
use super::kernel::build_kernel;

/// Threshold used for benchmark fields; half the elements end up solid.
const BENCH_TAU: f64 = 0.5;

/// Best-of-`repeats` wall time of each detection method on one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionTiming {
    pub dims: GridDims,
    pub enum_seconds: f64,
    pub conv_seconds: f64,
}

impl DetectionTiming {
    pub fn speedup(&self) -> f64 {
        self.enum_seconds / self.conv_seconds
    }

    pub const CSV_HEADER: &'static str = "dims,enum_seconds,conv_seconds,speedup";

    pub fn csv_row(&self) -> String {
        format!("{},{:e},{:e},{:.2}", self.dims, self.enum_seconds, self.conv_seconds, self.speedup())
    }
}

/// Seeded field of independent uniform densities in `[RHO_MIN, 1]`.
pub fn random_field(dims: GridDims, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dims.len()).map(|_| rng.random_range(RHO_MIN..=1.0)).collect()
}

/// Times batched detection against enumeration with the 45 degree kernel.
/// Masks are compared first; a mismatch is an error and no timing is given.
pub fn benchmark_detection(dims: GridDims, repeats: usize, seed: u64) -> Result<DetectionTiming> {
    let kernel = build_kernel(45.0, 1, dims.dim())?;
    let values = random_field(dims, seed);
    let passive = vec![false; dims.len()];
    let offsets = kernel.offsets();
    let conv = detect_build_frame(dims, &values, &passive, offsets, BENCH_TAU);
    let enumerated = enumerate_build_frame(dims, &values, &passive, offsets, BENCH_TAU);
    if conv != enumerated {
        let first = conv.iter().zip(&enumerated).position(|(a, b)| a != b).unwrap_or(0);
        return Err(Error::MaskMismatch(first));
    }
    let repeats = repeats.max(1);
    let time = |f: &dyn Fn() -> Vec<bool>| {
        let mut best = f64::INFINITY;
        for _ in 0..repeats {
            let t = Instant::now();
            let m = f();
            let s = t.elapsed().as_secs_f64();
            std::hint::black_box(m);
            best = best.min(s);
        }
        best
    };
    let enum_seconds =
        time(&|| enumerate_build_frame(dims, &values, &passive, offsets, BENCH_TAU));
    let conv_seconds = time(&|| detect_build_frame(dims, &values, &passive, offsets, BENCH_TAU));
    Ok(DetectionTiming { dims, enum_seconds, conv_seconds: conv_seconds.max(1e-9) })
}
