//! Structured grid addressing, density storage and passive-region masking.
//!
//! Elements are stored in a flat array in x-fastest order: the linear index of
//! element `(i, j, k)` (zero-based) is `i + nx * (j + ny * k)`. The `y` axis is
//! the build axis in the canonical orientation; [`reorient`] maps any
//! [`Direction`] onto `+y` so the support logic only ever deals with one case.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Density used to represent void. Strictly positive so the stiffness
/// operator stays nonsingular.
pub const RHO_MIN: f64 = 1e-3;

/// Element counts of a structured grid. `nz == 1` denotes a 2D problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridDims {
    /// Largest element count accepted, far beyond what the solver can handle.
    pub const MAX_ELEMENTS: usize = 1 << 27;

    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let count = nx.checked_mul(ny).and_then(|v| v.checked_mul(nz));
        if nx == 0 || ny == 0 || nz == 0 || count.is_none_or(|c| c > Self::MAX_ELEMENTS) {
            return Err(Error::InvalidDims { nx, ny, nz });
        }
        Ok(Self { nx, ny, nz })
    }

    pub fn new_2d(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, 1)
    }

    /// Spatial dimension: 2 when `nz == 1`, otherwise 3.
    pub fn dim(&self) -> usize {
        if self.nz == 1 {
            2
        } else {
            3
        }
    }

    pub fn is_2d(&self) -> bool {
        self.nz == 1
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Zero-based linear index without bounds checks beyond debug asserts.
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny && k < self.nz);
        i + self.nx * (j + self.ny * k)
    }

    /// Zero-based coordinates of a linear index.
    #[inline]
    pub fn coords(&self, e: usize) -> (usize, usize, usize) {
        let i = e % self.nx;
        let rest = e / self.nx;
        (i, rest % self.ny, rest / self.ny)
    }

    /// Node counts along each axis (`nz + 1` collapses to 1 in 2D).
    pub fn node_counts(&self) -> (usize, usize, usize) {
        if self.is_2d() {
            (self.nx + 1, self.ny + 1, 1)
        } else {
            (self.nx + 1, self.ny + 1, self.nz + 1)
        }
    }

    pub fn node_count(&self) -> usize {
        let (a, b, c) = self.node_counts();
        a * b * c
    }

    pub fn dof_count(&self) -> usize {
        self.node_count() * self.dim()
    }

    /// Linear node index of grid node `(i, j, k)`, x-fastest.
    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        let (a, b, _) = self.node_counts();
        i + a * (j + b * k)
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_2d() {
            write!(f, "{}x{}", self.nx, self.ny)
        } else {
            write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
        }
    }
}

impl FromStr for GridDims {
    type Err = Error;

    /// Parses `NXxNY` or `NXxNYxNZ`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        let parse = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("invalid grid size `{s}`")))
        };
        match parts.as_slice() {
            [a, b] => GridDims::new(parse(a)?, parse(b)?, 1),
            [a, b, c] => GridDims::new(parse(a)?, parse(b)?, parse(c)?),
            _ => Err(Error::Parse(format!("invalid grid size `{s}`"))),
        }
    }
}

/// One-based element addressing: `(1,1,1)` is the first element.
pub fn element_index(n: usize, m: usize, l: usize, dims: GridDims) -> Result<usize> {
    if n == 0 || m == 0 || l == 0 || n > dims.nx || m > dims.ny || l > dims.nz {
        return Err(Error::IndexOutOfRange { n, m, l, dims });
    }
    Ok(dims.idx(n - 1, m - 1, l - 1))
}

/// Inverse of [`element_index`].
pub fn element_position(index: usize, dims: GridDims) -> Result<(usize, usize, usize)> {
    if index >= dims.len() {
        return Err(Error::LinearIndexOutOfRange { index, len: dims.len() });
    }
    let (i, j, k) = dims.coords(index);
    Ok((i + 1, j + 1, k + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A build direction: material is deposited layer by layer along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Direction {
    pub axis: Axis,
    pub positive: bool,
}

impl Direction {
    pub const POS_X: Direction = Direction { axis: Axis::X, positive: true };
    pub const NEG_X: Direction = Direction { axis: Axis::X, positive: false };
    pub const POS_Y: Direction = Direction { axis: Axis::Y, positive: true };
    pub const NEG_Y: Direction = Direction { axis: Axis::Y, positive: false };
    pub const POS_Z: Direction = Direction { axis: Axis::Z, positive: true };
    pub const NEG_Z: Direction = Direction { axis: Axis::Z, positive: false };

    /// Default candidate order for automatic direction selection.
    pub fn candidates(dims: GridDims) -> Vec<Direction> {
        let mut v = vec![Self::POS_Y, Self::NEG_Y, Self::POS_X, Self::NEG_X];
        if !dims.is_2d() {
            v.extend([Self::POS_Z, Self::NEG_Z]);
        }
        v
    }

    pub fn validate(&self, dims: GridDims) -> Result<()> {
        if self.axis == Axis::Z && dims.is_2d() {
            return Err(Error::InvalidDirection(*self, dims));
        }
        Ok(())
    }

    /// Grid dimensions seen from the build frame of this direction.
    pub fn build_dims(&self, dims: GridDims) -> GridDims {
        match self.axis {
            Axis::X => GridDims { nx: dims.ny, ny: dims.nx, nz: dims.nz },
            Axis::Y => dims,
            Axis::Z => GridDims { nx: dims.nx, ny: dims.nz, nz: dims.ny },
        }
    }

    /// Maps build-frame coordinates back to coordinates of the original grid.
    #[inline]
    pub fn to_original(
        &self,
        dims: GridDims,
        (bi, bj, bk): (usize, usize, usize),
    ) -> (usize, usize, usize) {
        match (self.axis, self.positive) {
            (Axis::Y, true) => (bi, bj, bk),
            (Axis::Y, false) => (bi, dims.ny - 1 - bj, bk),
            (Axis::X, true) => (bj, bi, bk),
            (Axis::X, false) => (dims.nx - 1 - bj, bi, bk),
            (Axis::Z, true) => (bi, bk, bj),
            (Axis::Z, false) => (bi, bk, dims.nz - 1 - bj),
        }
    }

    /// For each build-frame element, the linear index of the same element in
    /// the original grid.
    pub fn index_map(&self, dims: GridDims) -> Vec<usize> {
        let b = self.build_dims(dims);
        let mut map = Vec::with_capacity(dims.len());
        for k in 0..b.nz {
            for j in 0..b.ny {
                for i in 0..b.nx {
                    let (oi, oj, ok) = self.to_original(dims, (i, j, k));
                    map.push(dims.idx(oi, oj, ok));
                }
            }
        }
        map
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.positive { '+' } else { '-' };
        let a = match self.axis {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        };
        write!(f, "{s}{a}")
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let (positive, rest) = match t.as_bytes().first() {
            Some(b'+') => (true, &t[1..]),
            Some(b'-') => (false, &t[1..]),
            _ => (true, t.as_str()),
        };
        let axis = match rest {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            _ => return Err(Error::Parse(format!("invalid direction `{s}`"))),
        };
        Ok(Direction { axis, positive })
    }
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Element densities on a grid plus the passive (forced void) mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    dims: GridDims,
    values: Vec<f64>,
    passive: Vec<bool>,
}

impl DensityField {
    pub fn uniform(dims: GridDims, value: f64) -> Self {
        let v = value.clamp(RHO_MIN, 1.0);
        Self { dims, values: vec![v; dims.len()], passive: vec![false; dims.len()] }
    }

    /// Builds a field from raw values, checking the value count and that
    /// every value lies in `[RHO_MIN, 1]`.
    pub fn from_values(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        let passive = vec![false; dims.len()];
        Self::from_parts(dims, values, passive)
    }

    pub fn from_parts(dims: GridDims, values: Vec<f64>, passive: Vec<bool>) -> Result<Self> {
        if values.len() != dims.len() || passive.len() != dims.len() {
            return Err(Error::LengthMismatch { expected: dims.len(), got: values.len() });
        }
        if let Some((e, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= RHO_MIN - 1e-15 && **v <= 1.0 + 1e-15))
        {
            return Err(Error::DensityOutOfRange { index: e, value: *v });
        }
        let mut f = Self { dims, values, passive };
        f.enforce_passive();
        Ok(f)
    }

    /// Clamps every value into `[RHO_MIN, 1]` instead of rejecting.
    pub fn from_values_clamped(dims: GridDims, mut values: Vec<f64>, passive: Vec<bool>) -> Self {
        assert_eq!(values.len(), dims.len());
        assert_eq!(passive.len(), dims.len());
        for v in &mut values {
            *v = v.clamp(RHO_MIN, 1.0);
        }
        let mut f = Self { dims, values, passive };
        f.enforce_passive();
        f
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn passive(&self) -> &[bool] {
        &self.passive
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, e: usize) -> f64 {
        self.values[e]
    }

    /// Sets a density, clamped into range. Passive elements stay at `RHO_MIN`.
    pub fn set(&mut self, e: usize, value: f64) {
        self.values[e] = if self.passive[e] { RHO_MIN } else { value.clamp(RHO_MIN, 1.0) };
    }

    pub fn with_passive(mut self, passive: Vec<bool>) -> Self {
        assert_eq!(passive.len(), self.dims.len());
        self.passive = passive;
        self.enforce_passive();
        self
    }

    pub fn active_count(&self) -> usize {
        self.passive.iter().filter(|p| !**p).count()
    }

    /// Mean density over non-passive elements.
    pub fn volume_fraction(&self) -> f64 {
        let n = self.active_count();
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(&self.passive)
            .filter(|(_, p)| !**p)
            .map(|(v, _)| *v)
            .sum();
        sum / n as f64
    }

    /// Field with every value at or above `threshold` set to 1 and the rest
    /// to `RHO_MIN`.
    pub fn binarized(&self, threshold: f64) -> Self {
        let values =
            self.values.iter().map(|&v| if v >= threshold { 1.0 } else { RHO_MIN }).collect();
        let mut f = Self { dims: self.dims, values, passive: self.passive.clone() };
        f.enforce_passive();
        f
    }

    fn enforce_passive(&mut self) {
        for (v, p) in self.values.iter_mut().zip(&self.passive) {
            if *p {
                *v = RHO_MIN;
            }
        }
    }
}

/// Reorients a field so that `dir` becomes the `+y` axis of the result.
pub fn reorient(field: &DensityField, dir: Direction) -> DensityField {
    let map = dir.index_map(field.dims);
    DensityField {
        dims: dir.build_dims(field.dims),
        values: map.iter().map(|&e| field.values[e]).collect(),
        passive: map.iter().map(|&e| field.passive[e]).collect(),
    }
}

/// Inverse of [`reorient`]: `restore(&reorient(f, d), d) == f`.
pub fn restore(build: &DensityField, dir: Direction) -> DensityField {
    let original = original_dims(build.dims, dir);
    let map = dir.index_map(original);
    let mut values = vec![0.0; original.len()];
    let mut passive = vec![false; original.len()];
    for (b, &o) in map.iter().enumerate() {
        values[o] = build.values[b];
        passive[o] = build.passive[b];
    }
    DensityField { dims: original, values, passive }
}

fn original_dims(build: GridDims, dir: Direction) -> GridDims {
    // every build-frame permutation is an involution on the dimensions
    dir.build_dims(build)
}

/// Geometric passive region, rasterized by element-center membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassiveShape {
    /// Disc in the x-y plane; extruded through all z layers in 3D.
    Circle { center: [f64; 2], radius: f64 },
    /// Axis-aligned box in element units. In 2D the z range is ignored.
    Box { min: [f64; 3], max: [f64; 3] },
}

impl PassiveShape {
    pub fn contains(&self, p: [f64; 3], is_2d: bool) -> bool {
        match self {
            PassiveShape::Circle { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
            PassiveShape::Box { min, max } => {
                let axes = if is_2d { 2 } else { 3 };
                (0..axes).all(|a| p[a] >= min[a] && p[a] <= max[a])
            }
        }
    }
}

/// Passive mask from a list of shapes.
pub fn rasterize_passive(dims: GridDims, shapes: &[PassiveShape]) -> Vec<bool> {
    (0..dims.len())
        .map(|e| {
            let (i, j, k) = dims.coords(e);
            let c = [i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5];
            shapes.iter().any(|s| s.contains(c, dims.is_2d()))
        })
        .collect()
}

/// Forces every passive element to `RHO_MIN`, leaving the rest unchanged.
pub fn apply_passive(field: &DensityField) -> DensityField {
    let mut f = field.clone();
    f.enforce_passive();
    f
}
