//! Geometric multigrid V-cycle used as a conjugate-gradient preconditioner.
//!
//! Coarse grids take every second node of the finer grid (plus the last node
//! when a cell count is odd), so each fine cell lies inside exactly one coarse
//! cell. Coarse operators are Galerkin products `P^T A P` computed cell by
//! cell with the fixed-dof rows of `P` removed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::operator::{CellGrid, CellMatrices, Level, CORNERS};
use crate::error::{Error, Result};

/// Stop coarsening once a level has at most this many dofs.
const COARSEST_DOFS: usize = 1000;
const MAX_LEVELS: usize = 12;
const OMEGA: f64 = 0.6;
const SWEEPS: usize = 2;

/// Linear interpolation weights from coarse to fine nodes along one axis.
#[derive(Debug, Clone)]
struct AxisMap {
    /// For each fine node: two coarse nodes and their weights.
    entries: Vec<(usize, f64, usize, f64)>,
}

impl AxisMap {
    fn new(fine_cells: usize, active: bool) -> Self {
        if !active {
            return Self { entries: vec![(0, 1.0, 0, 0.0)] };
        }
        let nc = fine_cells.div_ceil(2);
        let entries = (0..=fine_cells)
            .map(|q| {
                let c = (q / 2).min(nc - 1);
                let x0 = 2 * c;
                let x1 = (2 * c + 2).min(fine_cells);
                let w1 = (q - x0) as f64 / (x1 - x0) as f64;
                (c, 1.0 - w1, c + 1, w1)
            })
            .collect();
        Self { entries }
    }
}

#[derive(Debug)]
pub(crate) struct Hierarchy {
    levels: Vec<Level>,
    maps: Vec<[AxisMap; 3]>,
    coarse: Cholesky<f64, Dyn>,
}

fn coarsen(g: CellGrid) -> CellGrid {
    let mut cells = g.cells;
    cells[0] = cells[0].div_ceil(2);
    cells[1] = cells[1].div_ceil(2);
    if g.dim == 3 {
        cells[2] = cells[2].div_ceil(2);
    }
    CellGrid { dim: g.dim, cells }
}

impl Hierarchy {
    pub fn build(fine: Level) -> Result<Self> {
        let mut levels = vec![fine];
        let mut maps = Vec::new();
        while levels.len() < MAX_LEVELS {
            let f = levels.last().unwrap();
            if f.ndof() <= COARSEST_DOFS {
                break;
            }
            let cg = coarsen(f.grid);
            if cg == f.grid {
                break;
            }
            let axis_maps = [
                AxisMap::new(f.grid.cells[0], true),
                AxisMap::new(f.grid.cells[1], true),
                AxisMap::new(f.grid.cells[2], f.grid.dim == 3),
            ];
            let coarse = galerkin(f, cg);
            maps.push(axis_maps);
            levels.push(coarse);
        }
        let last = levels.last().unwrap();
        let n = last.ndof();
        let dense = DMatrix::from_row_slice(n, n, &last.dense());
        let max_diag = (0..n).map(|i| dense[(i, i)]).fold(0.0f64, f64::max);
        let chol = Cholesky::new(dense)
            .ok_or_else(|| Error::SingularSystem("coarse operator is not positive definite".into()))?;
        let min_pivot = (0..n).map(|i| chol.l_dirty()[(i, i)].powi(2)).fold(f64::INFINITY, f64::min);
        if min_pivot <= 1e-14 * max_diag {
            return Err(Error::SingularSystem(format!(
                "coarse pivot {min_pivot:.3e} vanishes relative to diagonal {max_diag:.3e}"
            )));
        }
        Ok(Self { levels, maps, coarse: chol })
    }

    pub fn fine(&self) -> &Level {
        &self.levels[0]
    }

    /// Applies one V-cycle to `r`, writing the correction into `z`.
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) {
        self.vcycle(0, r, z);
    }

    fn vcycle(&self, l: usize, r: &[f64], z: &mut [f64]) {
        let level = &self.levels[l];
        if l + 1 == self.levels.len() {
            let sol = self.coarse.solve(&DVector::from_column_slice(r));
            z.copy_from_slice(sol.as_slice());
            return;
        }
        let n = level.ndof();
        let mut t = vec![0.0; n];
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&level.inv_diag) {
            *zi = OMEGA * di * ri;
        }
        for _ in 1..SWEEPS {
            smooth(level, r, z, &mut t);
        }
        level.apply(z, &mut t);
        let res: Vec<f64> = r.iter().zip(&t).map(|(a, b)| a - b).collect();
        let coarse = &self.levels[l + 1];
        let rc = restrict(level, coarse, &self.maps[l], &res);
        let mut zc = vec![0.0; coarse.ndof()];
        self.vcycle(l + 1, &rc, &mut zc);
        prolongate_add(level, coarse, &self.maps[l], &zc, z);
        for _ in 0..SWEEPS {
            smooth(level, r, z, &mut t);
        }
    }
}

fn smooth(level: &Level, r: &[f64], z: &mut [f64], t: &mut [f64]) {
    level.apply(z, t);
    for i in 0..z.len() {
        z[i] += OMEGA * level.inv_diag[i] * (r[i] - t[i]);
    }
}

fn restrict(fine: &Level, coarse: &Level, maps: &[AxisMap; 3], x: &[f64]) -> Vec<f64> {
    let dim = fine.grid.dim;
    let nf = fine.grid.nodes();
    let mut out = vec![0.0; coarse.ndof()];
    for k in 0..nf[2] {
        let mz = maps[2].entries[k];
        for j in 0..nf[1] {
            let my = maps[1].entries[j];
            for i in 0..nf[0] {
                let mx = maps[0].entries[i];
                let node = fine.grid.node(i, j, k);
                for (cz, wz) in [(mz.0, mz.1), (mz.2, mz.3)] {
                    if wz == 0.0 {
                        continue;
                    }
                    for (cy, wy) in [(my.0, my.1), (my.2, my.3)] {
                        if wy == 0.0 {
                            continue;
                        }
                        for (cx, wx) in [(mx.0, mx.1), (mx.2, mx.3)] {
                            if wx == 0.0 {
                                continue;
                            }
                            let w = wx * wy * wz;
                            let cn = coarse.grid.node(cx, cy, cz);
                            for d in 0..dim {
                                let g = node * dim + d;
                                if !fine.fixed[g] {
                                    out[cn * dim + d] += w * x[g];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for (v, f) in out.iter_mut().zip(&coarse.fixed) {
        if *f {
            *v = 0.0;
        }
    }
    out
}

fn prolongate_add(fine: &Level, coarse: &Level, maps: &[AxisMap; 3], xc: &[f64], z: &mut [f64]) {
    let dim = fine.grid.dim;
    let nf = fine.grid.nodes();
    for k in 0..nf[2] {
        let mz = maps[2].entries[k];
        for j in 0..nf[1] {
            let my = maps[1].entries[j];
            for i in 0..nf[0] {
                let mx = maps[0].entries[i];
                let node = fine.grid.node(i, j, k);
                let mut acc = [0.0; 3];
                for (cz, wz) in [(mz.0, mz.1), (mz.2, mz.3)] {
                    if wz == 0.0 {
                        continue;
                    }
                    for (cy, wy) in [(my.0, my.1), (my.2, my.3)] {
                        if wy == 0.0 {
                            continue;
                        }
                        for (cx, wx) in [(mx.0, mx.1), (mx.2, mx.3)] {
                            if wx == 0.0 {
                                continue;
                            }
                            let w = wx * wy * wz;
                            let cn = coarse.grid.node(cx, cy, cz);
                            for d in 0..dim {
                                if !coarse.fixed[cn * dim + d] {
                                    acc[d] += w * xc[cn * dim + d];
                                }
                            }
                        }
                    }
                }
                for d in 0..dim {
                    let g = node * dim + d;
                    if !fine.fixed[g] {
                        z[g] += acc[d];
                    }
                }
            }
        }
    }
}

/// Interpolation weights from the corners of the enclosing coarse cell to the
/// corners of a fine cell. `place[a] = (offset in coarse cell, coarse span)`.
fn local_interpolation(corners: usize, place: [(usize, usize); 3]) -> Vec<f64> {
    let mut p = vec![0.0; corners * corners];
    for (a, fc) in CORNERS[..corners].iter().enumerate() {
        for (b, cc) in CORNERS[..corners].iter().enumerate() {
            let mut w = 1.0;
            for axis in 0..3 {
                let (o, s) = place[axis];
                let q = (o + fc[axis]) as f64;
                let s = s as f64;
                w *= if cc[axis] == 1 { q / s } else { (s - q) / s };
            }
            p[a * corners + b] = w;
        }
    }
    p
}

/// `out += factor * P^T K~ P` where `K~` zeroes the masked fine dofs.
fn galerkin_local(
    k: &[f64],
    mask: Option<&[bool]>,
    p: &[f64],
    corners: usize,
    dim: usize,
    factor: f64,
    out: &mut [f64],
) {
    let n = corners * dim;
    let keep = |i: usize| mask.is_none_or(|m| !m[i]);
    // t = K~ (p (x) I): n x n
    let mut t = vec![0.0; n * n];
    for r in 0..n {
        if !keep(r) {
            continue;
        }
        for a in 0..corners {
            for d in 0..dim {
                let col = a * dim + d;
                if !keep(col) {
                    continue;
                }
                let kv = k[r * n + col];
                if kv == 0.0 {
                    continue;
                }
                for b in 0..corners {
                    let w = p[a * corners + b];
                    if w != 0.0 {
                        t[r * n + b * dim + d] += kv * w;
                    }
                }
            }
        }
    }
    for a in 0..corners {
        for b1 in 0..corners {
            let w = p[a * corners + b1];
            if w == 0.0 {
                continue;
            }
            for d in 0..dim {
                let row_t = &t[(a * dim + d) * n..(a * dim + d + 1) * n];
                let row_o = &mut out[(b1 * dim + d) * n..(b1 * dim + d + 1) * n];
                for (o, tv) in row_o.iter_mut().zip(row_t) {
                    *o += factor * w * tv;
                }
            }
        }
    }
}

fn galerkin(fine: &Level, cg: CellGrid) -> Level {
    let dim = fine.grid.dim;
    let corners = fine.grid.corners();
    let n = fine.grid.cell_size();
    let mut mats = vec![0.0; cg.cell_count() * n * n];
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; 27];
    let mut mask = vec![false; n];
    for f in 0..fine.grid.cell_count() {
        let [i, j, k] = fine.grid.cell_coords(f);
        let coords = [i, j, k];
        let mut place = [(0usize, 1usize); 3];
        let mut code = 0;
        let mut stride = 1;
        for axis in 0..3 {
            if axis == 2 && dim == 2 {
                break;
            }
            let c = coords[axis];
            let o = c % 2;
            let s = (fine.grid.cells[axis] - 2 * (c / 2)).min(2);
            place[axis] = (o, s);
            let cd = match (o, s) {
                (0, 2) => 0,
                (1, 2) => 1,
                _ => 2,
            };
            code += cd * stride;
            stride *= 3;
        }
        let cc = (i / 2) + cg.cells[0] * ((j / 2) + cg.cells[1] * (k / 2));
        let out = &mut mats[cc * n * n..(cc + 1) * n * n];
        let dofs = &fine.dofs[f * n..(f + 1) * n];
        let mut touches_fixed = false;
        for (m, &g) in mask.iter_mut().zip(dofs) {
            *m = fine.fixed[g as usize];
            touches_fixed |= *m;
        }
        match (&fine.mats, touches_fixed) {
            (CellMatrices::Scaled { reference, scale }, false) => {
                let q = cache[code].get_or_insert_with(|| {
                    let p = local_interpolation(corners, place);
                    let mut q = vec![0.0; n * n];
                    galerkin_local(reference, None, &p, corners, dim, 1.0, &mut q);
                    q
                });
                let s = scale[f];
                for (o, v) in out.iter_mut().zip(q.iter()) {
                    *o += s * v;
                }
            }
            _ => {
                let p = local_interpolation(corners, place);
                let km = fine.cell_matrix(f);
                galerkin_local(&km, Some(&mask), &p, corners, dim, 1.0, out);
            }
        }
    }
    // coarse dofs that only interpolate into fixed fine dofs become fixed
    let mut diag = vec![0.0; cg.ndof()];
    let cdofs = cg.cell_dofs();
    for c in 0..cg.cell_count() {
        for a in 0..n {
            diag[cdofs[c * n + a] as usize] += mats[c * n * n + a * n + a];
        }
    }
    let fixed = diag.iter().map(|d| *d <= 0.0).collect();
    Level::new(cg, CellMatrices::Explicit(mats), fixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::stiffness::element_stiffness;

    #[test]
    fn axis_map_handles_odd_counts() {
        let m = AxisMap::new(5, true);
        assert_eq!(m.entries.len(), 6);
        // coarse nodes sit at fine positions 0, 2, 4, 5
        assert_eq!(m.entries[0], (0, 1.0, 1, 0.0));
        assert_eq!(m.entries[1], (0, 0.5, 1, 0.5));
        assert_eq!(m.entries[4], (2, 1.0, 3, 0.0));
        assert_eq!(m.entries[5], (2, 0.0, 3, 1.0));
    }

    #[test]
    fn interpolation_rows_sum_to_one() {
        for place in [[(0, 2), (1, 2), (0, 1)], [(1, 2), (0, 1), (1, 2)]] {
            let p = local_interpolation(8, place);
            for a in 0..8 {
                let s: f64 = p[a * 8..(a + 1) * 8].iter().sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }

    /// The coarse operator must equal the explicit triple product with the
    /// global interpolation matrix.
    #[test]
    fn galerkin_matches_global_product() {
        let grid = CellGrid { dim: 2, cells: [5, 3, 1] };
        let ke = element_stiffness(2, 1.0, 0.3).unwrap();
        let scale: Vec<f64> = (0..15).map(|c| 0.1 + 0.05 * c as f64).collect();
        let mut fixed = vec![false; grid.ndof()];
        for j in 0..4 {
            let node = grid.node(0, j, 0);
            fixed[2 * node] = true;
            fixed[2 * node + 1] = true;
        }
        let fine = Level::new(
            grid,
            CellMatrices::Scaled { reference: ke.as_slice().to_vec(), scale },
            fixed.clone(),
        );
        let cg = coarsen(grid);
        let coarse = galerkin(&fine, cg);
        let maps = [AxisMap::new(5, true), AxisMap::new(3, true), AxisMap::new(1, false)];
        let nf = fine.ndof();
        let nc = coarse.ndof();
        // build P column by column via prolongation of unit vectors
        let mut p = vec![0.0; nf * nc];
        let unmasked = Level { fixed: vec![false; nc], ..coarse.clone() };
        for c in 0..nc {
            let mut e = vec![0.0; nc];
            e[c] = 1.0;
            let mut z = vec![0.0; nf];
            prolongate_add(&fine, &unmasked, &maps, &e, &mut z);
            for r in 0..nf {
                p[r * nc + c] = z[r];
            }
        }
        let a = fine.dense();
        let mut af = a.clone();
        for r in 0..nf {
            if fixed[r] {
                af[r * nf + r] = 0.0;
            }
        }
        let dense_c = coarse.dense();
        for i in 0..nc {
            for j in 0..nc {
                if coarse.fixed[i] || coarse.fixed[j] {
                    continue;
                }
                let mut v = 0.0;
                for r in 0..nf {
                    for s in 0..nf {
                        v += p[r * nc + i] * af[r * nf + s] * p[s * nc + j];
                    }
                }
                assert!((v - dense_c[i * nc + j]).abs() < 1e-12, "({i},{j}) {v} vs {}", dense_c[i * nc + j]);
            }
        }
    }
}
