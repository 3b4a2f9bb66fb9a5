//! Cone-weight density filter and smoothed Heaviside projection, with the
//! matching chain-rule transforms for sensitivities.

use crate::grid::{DensityField, GridDims};

/// Precomputed filter neighborhoods with weights `max(0, r_min - dist)`.
#[derive(Debug, Clone)]
pub struct FilterWeights {
    radius: f64,
    dims: GridDims,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
    sums: Vec<f64>,
}

impl FilterWeights {
    pub fn new(dims: GridDims, radius: f64) -> Self {
        let reach = (radius.ceil() as isize - 1).max(0);
        let reach_z = if dims.is_2d() { 0 } else { reach };
        let mut stencil = Vec::new();
        for dk in -reach_z..=reach_z {
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let dist = ((di * di + dj * dj + dk * dk) as f64).sqrt();
                    let w = radius - dist;
                    if w > 0.0 {
                        stencil.push((di, dj, dk, w));
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        let mut sums = Vec::with_capacity(dims.len());
        offsets.push(0);
        for e in 0..dims.len() {
            let (i, j, k) = dims.coords(e);
            let mut s = 0.0;
            for &(di, dj, dk, w) in &stencil {
                let (ni, nj, nk) = (i as isize + di, j as isize + dj, k as isize + dk);
                if ni < 0
                    || nj < 0
                    || nk < 0
                    || ni >= dims.nx as isize
                    || nj >= dims.ny as isize
                    || nk >= dims.nz as isize
                {
                    continue;
                }
                neighbors.push(dims.idx(ni as usize, nj as usize, nk as usize) as u32);
                weights.push(w);
                s += w;
            }
            // an element is always its own neighbor, even when r_min <= 0
            if s == 0.0 {
                neighbors.push(e as u32);
                weights.push(1.0);
                s = 1.0;
            }
            sums.push(s);
            offsets.push(neighbors.len());
        }
        Self { radius, dims, offsets, neighbors, weights, sums }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// Neighbors of `e` with their raw (unnormalized) weights.
    pub fn neighborhood(&self, e: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[e]..self.offsets[e + 1];
        self.neighbors[r.clone()].iter().map(|&n| n as usize).zip(self.weights[r].iter().copied())
    }

    pub fn weight_sum(&self, e: usize) -> f64 {
        self.sums[e]
    }

    /// `W x` with `W` the row-normalized weight matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.sums.len())
            .map(|e| self.neighborhood(e).map(|(n, w)| w * x[n]).sum::<f64>() / self.sums[e])
            .collect()
    }

    /// `W^T g`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.len()];
        for (e, &ge) in g.iter().enumerate() {
            let s = ge / self.sums[e];
            for (n, w) in self.neighborhood(e) {
                out[n] += w * s;
            }
        }
        out
    }
}

/// Filters a design field; passive elements are reset to void afterwards.
pub fn density_filter(x: &DensityField, w: &FilterWeights) -> DensityField {
    let vals = w.apply(x.values());
    DensityField::from_values_clamped(x.dims(), vals, x.passive().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionParams {
    pub beta: f64,
    pub eta: f64,
}

impl ProjectionParams {
    pub fn new(beta: f64, eta: f64) -> Self {
        Self { beta, eta }
    }

    pub fn identity() -> Self {
        Self { beta: 0.0, eta: 0.5 }
    }

    pub fn is_identity(&self) -> bool {
        self.beta == 0.0
    }

    #[inline]
    pub fn project(&self, x: f64) -> f64 {
        if self.is_identity() {
            return x;
        }
        let (b, n) = (self.beta, self.eta);
        let t = (b * n).tanh();
        (t + (b * (x - n)).tanh()) / (t + (b * (1.0 - n)).tanh())
    }

    /// `d project / dx`.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        if self.is_identity() {
            return 1.0;
        }
        let (b, n) = (self.beta, self.eta);
        let s = (b * (x - n)).tanh();
        b * (1.0 - s * s) / ((b * n).tanh() + (b * (1.0 - n)).tanh())
    }
}

/// Smoothed Heaviside projection of filtered densities.
pub fn heaviside_project(x: &[f64], pp: ProjectionParams) -> Vec<f64> {
    x.iter().map(|&v| pp.project(v)).collect()
}

/// Gradient with respect to the raw design variables given the gradient with
/// respect to projected densities: `W^T diag(dx_bar/dx_tilde) g`.
pub fn chain_sensitivity(
    g_physical: &[f64],
    filtered: &[f64],
    pp: ProjectionParams,
    w: &FilterWeights,
) -> Vec<f64> {
    let scaled: Vec<f64> =
        g_physical.iter().zip(filtered).map(|(g, &x)| g * pp.derivative(x)).collect();
    w.apply_transpose(&scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RHO_MIN;

    #[test]
    fn uniform_field_unchanged() {
        let dims = GridDims::new_2d(7, 5).unwrap();
        let w = FilterWeights::new(dims, 2.5);
        let f = DensityField::uniform(dims, 0.4);
        let g = density_filter(&f, &w);
        for v in g.values() {
            assert!((v - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn small_radius_is_identity() {
        let dims = GridDims::new(4, 3, 2).unwrap();
        for r in [0.5, 1.0] {
            let w = FilterWeights::new(dims, r);
            let x: Vec<f64> = (0..dims.len()).map(|e| 0.1 + 0.03 * e as f64).collect();
            assert_eq!(w.apply(&x), x);
        }
    }

    #[test]
    fn center_spike_spreads_as_cross() {
        // r = 1.5: self weight 1.5, edge neighbors 0.5, diagonals 1.5 - sqrt 2
        let dims = GridDims::new_2d(5, 5).unwrap();
        let w = FilterWeights::new(dims, 1.5);
        let mut x = vec![0.0; 25];
        x[dims.idx(2, 2, 0)] = 1.0;
        let y = w.apply(&x);
        let diag = 1.5 - 2f64.sqrt();
        let interior_sum = 1.5 + 4.0 * 0.5 + 4.0 * diag;
        assert!((y[dims.idx(2, 2, 0)] - 1.5 / interior_sum).abs() < 1e-15);
        assert!((y[dims.idx(1, 2, 0)] - 0.5 / interior_sum).abs() < 1e-15);
        assert!((y[dims.idx(2, 3, 0)] - 0.5 / interior_sum).abs() < 1e-15);
        assert!((y[dims.idx(1, 1, 0)] - diag / interior_sum).abs() < 1e-15);
        assert_eq!(y[dims.idx(0, 2, 0)], 0.0);
        assert_eq!(y[dims.idx(4, 4, 0)], 0.0);
    }

    #[test]
    fn neighborhoods_are_symmetric() {
        let dims = GridDims::new(5, 4, 3).unwrap();
        let w = FilterWeights::new(dims, 2.2);
        for e in 0..dims.len() {
            for (n, we) in w.neighborhood(e) {
                let back = w.neighborhood(n).find(|(m, _)| *m == e).map(|(_, v)| v);
                assert_eq!(back, Some(we));
            }
        }
    }

    #[test]
    fn passive_reset_after_filter() {
        let dims = GridDims::new_2d(4, 4).unwrap();
        let mut passive = vec![false; 16];
        passive[5] = true;
        let f = DensityField::uniform(dims, 0.8).with_passive(passive);
        let g = density_filter(&f, &FilterWeights::new(dims, 2.0));
        assert_eq!(g.get(5), RHO_MIN);
        assert!(g.get(6) < 0.8);
    }

    #[test]
    fn projection_identity_and_symmetry() {
        let id = ProjectionParams::identity();
        assert_eq!(heaviside_project(&[0.1, 0.37, 0.9], id), vec![0.1, 0.37, 0.9]);
        for beta in [0.5, 1.0, 8.0, 64.0, 512.0] {
            let pp = ProjectionParams::new(beta, 0.5);
            assert!((pp.project(0.5) - 0.5).abs() < 1e-15);
            assert!(pp.project(0.0).abs() < 1e-15);
            assert!((pp.project(1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_sharp_limit() {
        let pp = ProjectionParams::new(64.0, 0.5);
        assert!(pp.project(0.3) < 1e-6);
        assert!(pp.project(0.7) > 1.0 - 1e-6);
    }

    #[test]
    fn projection_derivative_matches_difference() {
        let pp = ProjectionParams::new(8.0, 0.5);
        for x in [0.05, 0.3, 0.5, 0.61, 0.95] {
            let h = 1e-6;
            let fd = (pp.project(x + h) - pp.project(x - h)) / (2.0 * h);
            assert!((fd - pp.derivative(x)).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn chain_identity_and_zero() {
        let dims = GridDims::new_2d(3, 3).unwrap();
        let w = FilterWeights::new(dims, 1.0);
        let g: Vec<f64> = (0..9).map(|e| e as f64 - 4.0).collect();
        let x = vec![0.5; 9];
        assert_eq!(chain_sensitivity(&g, &x, ProjectionParams::identity(), &w), g);
        let w = FilterWeights::new(dims, 2.0);
        let out = chain_sensitivity(&[0.0; 9], &x, ProjectionParams::new(4.0, 0.5), &w);
        assert!(out.iter().all(|v| *v == 0.0));
    }
}
