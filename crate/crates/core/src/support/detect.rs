use crate::grid::{DensityField, Direction, GridDims};

use super::kernel::OverhangKernel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    /// Densities at or above `tau` count as material.
    pub tau: f64,
    pub direction: Direction,
}

impl DetectionParams {
    pub fn new(tau: f64, direction: Direction) -> Self {
        Self { tau, direction }
    }
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self { tau: 0.1, direction: Direction::POS_Y }
    }
}

/// Per-element support flags in the original grid frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask {
    dims: GridDims,
    supported: Vec<bool>,
}

impl SupportMask {
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.supported
    }

    pub fn is_supported(&self, e: usize) -> bool {
        self.supported[e]
    }

    pub fn supported_count(&self) -> usize {
        self.supported.iter().filter(|s| **s).count()
    }
}

/// Support detection for one build direction with the reorientation map
/// cached, so repeated calls during optimization skip the index setup.
#[derive(Debug, Clone)]
pub struct Detector {
    dims: GridDims,
    build: GridDims,
    direction: Direction,
    /// build-frame index -> original index; `None` for `+y`
    map: Option<Vec<usize>>,
    offsets: Vec<[isize; 3]>,
    tau: f64,
}

impl Detector {
    pub fn new(dims: GridDims, kernel: &OverhangKernel, params: DetectionParams) -> Self {
        let direction = params.direction;
        let map = (direction != Direction::POS_Y).then(|| direction.index_map(dims));
        Self {
            dims,
            build: direction.build_dims(dims),
            direction,
            map,
            offsets: kernel.offsets().to_vec(),
            tau: params.tau,
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Batched detection on raw values and passive flags (original frame).
    pub fn detect(&self, values: &[f64], passive: &[bool]) -> Vec<bool> {
        match &self.map {
            None => detect_build_frame(self.build, values, passive, &self.offsets, self.tau),
            Some(map) => {
                let v: Vec<f64> = map.iter().map(|&e| values[e]).collect();
                let p: Vec<bool> = map.iter().map(|&e| passive[e]).collect();
                let b = detect_build_frame(self.build, &v, &p, &self.offsets, self.tau);
                let mut out = vec![false; b.len()];
                for (s, &e) in b.iter().zip(map) {
                    out[e] = *s;
                }
                out
            }
        }
    }

    /// Sorted original-frame indices of material elements that lack support.
    pub fn unsupported(&self, values: &[f64], passive: &[bool]) -> Vec<usize> {
        let mask = self.detect(values, passive);
        collect_unsupported(&mask, values, passive, self.tau)
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }
}

/// Convolution-style detection: the field is thresholded once into a solid
/// mask, and each kernel offset contributes one shifted row-wise OR.
pub(crate) fn detect_build_frame(
    dims: GridDims,
    values: &[f64],
    passive: &[bool],
    offsets: &[[isize; 3]],
    tau: f64,
) -> Vec<bool> {
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    let solid: Vec<bool> = values.iter().map(|&v| v >= tau).collect();
    // passive elements start out supported
    let mut acc = passive.to_vec();
    for k in 0..nz {
        // the bottom layer rests on the build plate
        acc[dims.idx(0, 0, k)..dims.idx(0, 0, k) + nx].fill(true);
        for j in 1..ny {
            let row = dims.idx(0, j, k);
            for o in offsets {
                let (dx, d, dz) = (o[0], (-o[1]) as usize, o[2]);
                if d > j {
                    continue;
                }
                let kk = k as isize + dz;
                if kk < 0 || kk >= nz as isize {
                    continue;
                }
                let src = dims.idx(0, j - d, kk as usize);
                let lo = (-dx).max(0) as usize;
                let hi = (nx as isize - dx.max(0)).max(lo as isize) as usize;
                if lo >= hi {
                    continue;
                }
                let s = (src as isize + lo as isize + dx) as usize;
                let dst = &mut acc[row + lo..row + hi];
                for (a, b) in dst.iter_mut().zip(&solid[s..s + (hi - lo)]) {
                    *a |= *b;
                }
            }
        }
    }
    acc
}

/// Element-by-element detection in the build frame: for each element the
/// offsets are walked one at a time with explicit bounds checks.
pub(crate) fn enumerate_build_frame(
    dims: GridDims,
    values: &[f64],
    passive: &[bool],
    offsets: &[[isize; 3]],
    tau: f64,
) -> Vec<bool> {
    let mut out = vec![false; values.len()];
    for (e, s) in out.iter_mut().enumerate() {
        let (i, j, k) = dims.coords(e);
        if j == 0 || passive[e] {
            *s = true;
            continue;
        }
        for o in offsets {
            let ni = i as isize + o[0];
            let nj = j as isize + o[1];
            let nk = k as isize + o[2];
            if ni < 0
                || nj < 0
                || nk < 0
                || ni >= dims.nx as isize
                || nj >= dims.ny as isize
                || nk >= dims.nz as isize
            {
                continue;
            }
            if values[dims.idx(ni as usize, nj as usize, nk as usize)] >= tau {
                *s = true;
                break;
            }
        }
    }
    out
}

fn collect_unsupported(mask: &[bool], values: &[f64], passive: &[bool], tau: f64) -> Vec<usize> {
    (0..mask.len()).filter(|&e| !mask[e] && !passive[e] && values[e] >= tau).collect()
}

/// Supported elements, batched stencil implementation.
///
/// Elements in the bottom build layer and passive elements are always
/// supported; out-of-grid neighbors count as void. Void elements carry their
/// actual support status, which keeps the mask monotone in the densities.
pub fn detect_supported(
    field: &DensityField,
    kernel: &OverhangKernel,
    params: DetectionParams,
) -> SupportMask {
    let det = Detector::new(field.dims(), kernel, params);
    SupportMask { dims: field.dims(), supported: det.detect(field.values(), field.passive()) }
}

/// Reference implementation of [`detect_supported`] by direct enumeration.
pub fn enumerate_supported(
    field: &DensityField,
    kernel: &OverhangKernel,
    params: DetectionParams,
) -> SupportMask {
    let dims = field.dims();
    let dir = params.direction;
    let map = dir.index_map(dims);
    let build = dir.build_dims(dims);
    let v: Vec<f64> = map.iter().map(|&e| field.values()[e]).collect();
    let p: Vec<bool> = map.iter().map(|&e| field.passive()[e]).collect();
    let b = enumerate_build_frame(build, &v, &p, kernel.offsets(), params.tau);
    let mut supported = vec![false; b.len()];
    for (s, &e) in b.iter().zip(&map) {
        supported[e] = *s;
    }
    SupportMask { dims, supported }
}

/// Non-passive elements with density at least `tau` that are not supported,
/// in ascending order.
pub fn unsupported_set(mask: &SupportMask, field: &DensityField, tau: f64) -> Vec<usize> {
    collect_unsupported(&mask.supported, field.values(), field.passive(), tau)
}

/// `U = sum of rho_e^2` over the listed elements.
pub fn constraint_value(values: &[f64], unsupported: &[usize]) -> f64 {
    unsupported.iter().fold(0.0, |acc, &e| acc + values[e] * values[e])
}

/// `dU/drho_e = 2 rho_e` on listed elements, zero elsewhere (list frozen).
pub fn constraint_sensitivity(values: &[f64], unsupported: &[usize]) -> Vec<f64> {
    let mut g = vec![0.0; values.len()];
    for &e in unsupported {
        g[e] = 2.0 * values[e];
    }
    g
}
