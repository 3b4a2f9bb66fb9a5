//! Linear elasticity on the structured grid: SIMP-penalized stiffness,
//! preconditioned conjugate gradients, compliance and its sensitivity.

mod multigrid;
mod operator;
mod stiffness;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

pub use stiffness::{element_stiffness, ElementStiffness};

use crate::error::{Error, Result};
use crate::grid::{DensityField, GridDims};
use multigrid::Hierarchy;
use operator::{CellGrid, CellMatrices, Level};

/// Stiffness of void relative to solid material.
pub const E_MIN_RATIO: f64 = 1e-9;

/// Modified SIMP interpolation `E_min + rho^p (1 - E_min)`, relative to `E_0`.
#[inline]
pub fn simp_scale(rho: f64, penal: f64) -> f64 {
    E_MIN_RATIO + rho.powf(penal) * (1.0 - E_MIN_RATIO)
}

#[inline]
pub fn simp_scale_derivative(rho: f64, penal: f64) -> f64 {
    penal * rho.powf(penal - 1.0) * (1.0 - E_MIN_RATIO)
}

/// Boundary conditions and nodal loads in global dof numbering
/// (`dof = node * dim + component`, nodes x-fastest).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadCase {
    pub fixed_dofs: Vec<usize>,
    pub loads: BTreeMap<usize, f64>,
}

impl LoadCase {
    pub fn new(mut fixed_dofs: Vec<usize>, loads: BTreeMap<usize, f64>) -> Self {
        fixed_dofs.sort_unstable();
        fixed_dofs.dedup();
        Self { fixed_dofs, loads }
    }

    pub fn add_load(&mut self, dof: usize, value: f64) {
        *self.loads.entry(dof).or_insert(0.0) += value;
    }

    pub fn fix(&mut self, dof: usize) {
        if let Err(pos) = self.fixed_dofs.binary_search(&dof) {
            self.fixed_dofs.insert(pos, dof);
        }
    }

    /// Checks dof ranges and that the constraints remove every rigid-body mode.
    pub fn validate(&self, dims: GridDims) -> Result<()> {
        let ndof = dims.dof_count();
        if let Some(d) = self.fixed_dofs.iter().find(|d| **d >= ndof) {
            return Err(Error::InvalidLoadCase(format!("fixed dof {d} outside [0, {ndof})")));
        }
        if let Some(d) = self.loads.keys().find(|d| **d >= ndof) {
            return Err(Error::InvalidLoadCase(format!("loaded dof {d} outside [0, {ndof})")));
        }
        if let Some((d, v)) = self.loads.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidLoadCase(format!("load {v} on dof {d} is not finite")));
        }
        self.check_rigid_body(dims)
    }

    fn check_rigid_body(&self, dims: GridDims) -> Result<()> {
        let dim = dims.dim();
        let (a, b, c) = dims.node_counts();
        let scale = dims.nx.max(dims.ny).max(dims.nz) as f64;
        let center = [dims.nx as f64 / 2.0, dims.ny as f64 / 2.0, dims.nz as f64 / 2.0];
        let modes = if dim == 2 { 3 } else { 6 };
        let mut gram = DMatrix::<f64>::zeros(modes, modes);
        for &dof in &self.fixed_dofs {
            let node = dof / dim;
            let comp = dof % dim;
            let i = node % a;
            let j = (node / a) % b;
            let k = node / (a * b);
            debug_assert!(k < c);
            let x = (i as f64 - center[0]) / scale;
            let y = (j as f64 - center[1]) / scale;
            let z = if dim == 3 { (k as f64 - center[2]) / scale } else { 0.0 };
            // value of each rigid mode at this dof
            let row: Vec<f64> = if dim == 2 {
                let rot = [-y, x];
                vec![(comp == 0) as u8 as f64, (comp == 1) as u8 as f64, rot[comp]]
            } else {
                let rx = [0.0, -z, y];
                let ry = [z, 0.0, -x];
                let rz = [-y, x, 0.0];
                vec![
                    (comp == 0) as u8 as f64,
                    (comp == 1) as u8 as f64,
                    (comp == 2) as u8 as f64,
                    rx[comp],
                    ry[comp],
                    rz[comp],
                ]
            };
            for r in 0..modes {
                for s in 0..modes {
                    gram[(r, s)] += row[r] * row[s];
                }
            }
        }
        let eig = SymmetricEigen::new(gram);
        let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if max <= 0.0 || min <= 1e-10 * max {
            return Err(Error::SingularSystem(
                "boundary conditions leave a rigid-body mode unconstrained".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeState {
    pub displacements: Vec<f64>,
    pub compliance: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    Multigrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual `|r| / |f|` at which CG stops.
    pub tolerance: f64,
    /// Iteration cap; `None` means ten times the dof count.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: None, preconditioner: Preconditioner::Multigrid }
    }
}

/// Reusable solver for one grid and load case. Keeps the last displacement
/// field as the starting guess of the next solve.
#[derive(Debug, Clone)]
pub struct FeSolver {
    dims: GridDims,
    ke: ElementStiffness,
    rhs: Vec<f64>,
    fixed: Vec<bool>,
    options: SolverOptions,
    warm: Option<Vec<f64>>,
}

impl FeSolver {
    pub fn new(
        dims: GridDims,
        ke: ElementStiffness,
        load: &LoadCase,
        options: SolverOptions,
    ) -> Result<Self> {
        if ke.dim() != dims.dim() {
            return Err(Error::InvalidMaterial(format!(
                "{}D element stiffness on a {}D grid",
                ke.dim(),
                dims.dim()
            )));
        }
        load.validate(dims)?;
        let ndof = dims.dof_count();
        let mut fixed = vec![false; ndof];
        for &d in &load.fixed_dofs {
            fixed[d] = true;
        }
        let mut rhs = vec![0.0; ndof];
        for (&d, &v) in &load.loads {
            if !fixed[d] {
                rhs[d] += v;
            }
        }
        Ok(Self { dims, ke, rhs, fixed, options, warm: None })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn element_stiffness(&self) -> &ElementStiffness {
        &self.ke
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn reset_warm_start(&mut self) {
        self.warm = None;
    }

    /// Solves `K(rho) u = f` with `K_e = (E_min + rho_e^p (1 - E_min)) K_e^0`.
    pub fn solve(&mut self, field: &DensityField, penal: f64) -> Result<FeState> {
        if field.dims() != self.dims {
            return Err(Error::LengthMismatch { expected: self.dims.len(), got: field.len() });
        }
        if !(penal >= 1.0) {
            return Err(Error::InvalidParameter(format!("penalization must be >= 1, got {penal}")));
        }
        let ndof = self.rhs.len();
        let bnorm = norm(&self.rhs);
        if bnorm == 0.0 {
            return Ok(FeState {
                displacements: vec![0.0; ndof],
                compliance: 0.0,
                iterations: 0,
                residual: 0.0,
            });
        }
        let scale: Vec<f64> = field.values().iter().map(|&r| simp_scale(r, penal)).collect();
        let fine = Level::new(
            CellGrid::from_dims(self.dims),
            CellMatrices::Scaled { reference: self.ke.as_slice().to_vec(), scale },
            self.fixed.clone(),
        );
        let cap = self.options.max_iterations.unwrap_or(10 * ndof);
        let tol = self.options.tolerance;
        let mut x = self.warm.clone().unwrap_or_else(|| vec![0.0; ndof]);
        for (v, f) in x.iter_mut().zip(&self.fixed) {
            if *f {
                *v = 0.0;
            }
        }
        let (iterations, residual) = match self.options.preconditioner {
            Preconditioner::Multigrid => {
                let h = Hierarchy::build(fine)?;
                pcg(h.fine(), &self.rhs, &mut x, tol, cap, |r, z| h.precondition(r, z))?
            }
            Preconditioner::Jacobi => {
                let inv = fine.inv_diag.clone();
                pcg(&fine, &self.rhs, &mut x, tol, cap, |r, z| {
                    for i in 0..r.len() {
                        z[i] = inv[i] * r[i];
                    }
                })?
            }
        };
        let compliance = dot(&self.rhs, &x);
        self.warm = Some(x.clone());
        Ok(FeState { displacements: x, compliance, iterations, residual })
    }

    /// `u_e^T K_e^0 u_e` for every element.
    pub fn element_energies(&self, u: &[f64]) -> Vec<f64> {
        element_energies(self.dims, &self.ke, u)
    }
}

fn pcg(
    a: &Level,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    cap: usize,
    precondition: impl Fn(&[f64], &mut [f64]),
) -> Result<(usize, f64)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut rel = norm(&r) / bnorm;
    let mut it = 0;
    while rel >= tol {
        if it >= cap {
            return Err(Error::SolverDiverged { iterations: it, residual: rel });
        }
        a.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::SingularSystem(format!(
                "non-positive curvature {pq:.3e} at CG iteration {it}"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = norm(&r) / bnorm;
        it += 1;
        if !rel.is_finite() {
            return Err(Error::SolverDiverged { iterations: it, residual: rel });
        }
    }
    Ok((it, rel))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Global dofs of element `e` in local element order.
pub fn element_dofs(dims: GridDims, e: usize) -> Vec<usize> {
    let grid = CellGrid::from_dims(dims);
    let n = grid.cell_size();
    let [i, j, k] = grid.cell_coords(e);
    let mut out = Vec::with_capacity(n);
    for corner in &operator::CORNERS[..grid.corners()] {
        let node = grid.node(i + corner[0], j + corner[1], k + corner[2]);
        for d in 0..grid.dim {
            out.push(node * grid.dim + d);
        }
    }
    out
}

pub fn element_energies(dims: GridDims, ke: &ElementStiffness, u: &[f64]) -> Vec<f64> {
    let grid = CellGrid::from_dims(dims);
    let n = grid.cell_size();
    let dofs = grid.cell_dofs();
    let mut ue = vec![0.0; n];
    dofs.chunks_exact(n)
        .map(|d| {
            for (v, &g) in ue.iter_mut().zip(d) {
                *v = u[g as usize];
            }
            ke.energy(&ue)
        })
        .collect()
}

/// One-shot solve without warm start.
pub fn solve(
    field: &DensityField,
    penal: f64,
    load: &LoadCase,
    ke: &ElementStiffness,
) -> Result<FeState> {
    FeSolver::new(field.dims(), ke.clone(), load, SolverOptions::default())?.solve(field, penal)
}

/// `dc/drho_e = -p rho_e^(p-1) (1 - E_min) u_e^T K_e^0 u_e`.
pub fn compliance_sensitivity(
    field: &DensityField,
    penal: f64,
    state: &FeState,
    ke: &ElementStiffness,
) -> Vec<f64> {
    element_energies(field.dims(), ke, &state.displacements)
        .into_iter()
        .zip(field.values())
        .map(|(w, &r)| -simp_scale_derivative(r, penal) * w)
        .collect()
}
