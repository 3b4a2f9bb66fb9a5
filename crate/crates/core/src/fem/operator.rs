//! Element-by-element stiffness operators on structured cell grids.
//!
//! A [`Level`] is a structured grid of cells, each carrying a dense stiffness
//! block. The finest level holds scaled copies of one reference element
//! matrix; coarser multigrid levels hold explicit Galerkin blocks. Fixed dofs
//! are eliminated by treating their rows and columns as identity.

use crate::grid::GridDims;

/// Local node offsets of a cell, counter-clockwise in each z layer.
pub(crate) const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CellGrid {
    pub dim: usize,
    pub cells: [usize; 3],
}

impl CellGrid {
    pub fn from_dims(d: GridDims) -> Self {
        Self { dim: d.dim(), cells: [d.nx, d.ny, d.nz] }
    }

    pub fn nodes(&self) -> [usize; 3] {
        let z = if self.dim == 2 { 1 } else { self.cells[2] + 1 };
        [self.cells[0] + 1, self.cells[1] + 1, z]
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn node_count(&self) -> usize {
        self.nodes().iter().product()
    }

    pub fn ndof(&self) -> usize {
        self.node_count() * self.dim
    }

    pub fn corners(&self) -> usize {
        if self.dim == 2 {
            4
        } else {
            8
        }
    }

    /// Dofs per cell.
    pub fn cell_size(&self) -> usize {
        self.corners() * self.dim
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.nodes();
        i + n[0] * (j + n[1] * k)
    }

    #[inline]
    pub fn cell_coords(&self, c: usize) -> [usize; 3] {
        let i = c % self.cells[0];
        let r = c / self.cells[0];
        [i, r % self.cells[1], r / self.cells[1]]
    }

    /// Global dof numbers of every cell, `cell_size()` entries per cell.
    pub fn cell_dofs(&self) -> Vec<u32> {
        let n = self.cell_size();
        let mut out = Vec::with_capacity(self.cell_count() * n);
        for c in 0..self.cell_count() {
            let [i, j, k] = self.cell_coords(c);
            for corner in &CORNERS[..self.corners()] {
                let node = self.node(i + corner[0], j + corner[1], k + corner[2]);
                for d in 0..self.dim {
                    out.push((node * self.dim + d) as u32);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub(crate) enum CellMatrices {
    /// Every cell is `scale[c] * reference`.
    Scaled { reference: Vec<f64>, scale: Vec<f64> },
    /// One dense block per cell.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone)]
pub(crate) struct Level {
    pub grid: CellGrid,
    pub dofs: Vec<u32>,
    pub mats: CellMatrices,
    pub fixed: Vec<bool>,
    pub inv_diag: Vec<f64>,
}

impl Level {
    pub fn new(grid: CellGrid, mats: CellMatrices, fixed: Vec<bool>) -> Self {
        let dofs = grid.cell_dofs();
        let mut level = Self { grid, dofs, mats, fixed, inv_diag: Vec::new() };
        level.inv_diag = level.diagonal().into_iter().map(|d| 1.0 / d).collect();
        level
    }

    pub fn ndof(&self) -> usize {
        self.grid.ndof()
    }

    /// Diagonal of the operator, 1 on fixed dofs.
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.grid.cell_size();
        let mut diag = vec![0.0; self.ndof()];
        for c in 0..self.grid.cell_count() {
            let dofs = &self.dofs[c * n..(c + 1) * n];
            for (a, &g) in dofs.iter().enumerate() {
                diag[g as usize] += self.entry(c, a, a);
            }
        }
        for (d, f) in diag.iter_mut().zip(&self.fixed) {
            if *f {
                *d = 1.0;
            }
        }
        diag
    }

    #[inline]
    pub fn entry(&self, cell: usize, r: usize, c: usize) -> f64 {
        let n = self.grid.cell_size();
        match &self.mats {
            CellMatrices::Scaled { reference, scale } => scale[cell] * reference[r * n + c],
            CellMatrices::Explicit(m) => m[cell * n * n + r * n + c],
        }
    }

    /// Dense block of one cell (scaled copy for the finest level).
    pub fn cell_matrix(&self, cell: usize) -> Vec<f64> {
        let n = self.grid.cell_size();
        match &self.mats {
            CellMatrices::Scaled { reference, scale } => {
                reference.iter().map(|v| v * scale[cell]).collect()
            }
            CellMatrices::Explicit(m) => m[cell * n * n..(cell + 1) * n * n].to_vec(),
        }
    }

    /// `y = A x` with identity rows and columns on fixed dofs.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self.grid.cell_size() {
            8 => self.apply_n::<8>(x, y),
            24 => self.apply_n::<24>(x, y),
            n => unreachable!("unsupported cell size {n}"),
        }
    }

    fn apply_n<const N: usize>(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        let mut xe = [0.0; N];
        let mut ye = [0.0; N];
        for (c, dofs) in self.dofs.chunks_exact(N).enumerate() {
            for (v, &g) in xe.iter_mut().zip(dofs) {
                let g = g as usize;
                *v = if self.fixed[g] { 0.0 } else { x[g] };
            }
            let (block, s): (&[f64], f64) = match &self.mats {
                CellMatrices::Scaled { reference, scale } => (reference, scale[c]),
                CellMatrices::Explicit(m) => (&m[c * N * N..(c + 1) * N * N], 1.0),
            };
            for (r, out) in ye.iter_mut().enumerate() {
                let row = &block[r * N..(r + 1) * N];
                let mut acc = 0.0;
                for k in 0..N {
                    acc += row[k] * xe[k];
                }
                *out = s * acc;
            }
            for (v, &g) in ye.iter().zip(dofs) {
                y[g as usize] += v;
            }
        }
        for (g, f) in self.fixed.iter().enumerate() {
            if *f {
                y[g] = x[g];
            }
        }
    }

    /// Dense copy of the full operator (for small coarse levels and tests).
    pub fn dense(&self) -> Vec<f64> {
        let nd = self.ndof();
        let n = self.grid.cell_size();
        let mut a = vec![0.0; nd * nd];
        for c in 0..self.grid.cell_count() {
            let dofs = &self.dofs[c * n..(c + 1) * n];
            for (r, &gr) in dofs.iter().enumerate() {
                if self.fixed[gr as usize] {
                    continue;
                }
                for (cc, &gc) in dofs.iter().enumerate() {
                    if self.fixed[gc as usize] {
                        continue;
                    }
                    a[gr as usize * nd + gc as usize] += self.entry(c, r, cc);
                }
            }
        }
        for (g, f) in self.fixed.iter().enumerate() {
            if *f {
                a[g * nd + g] = 1.0;
            }
        }
        a
    }
}
