//! Oracles shared by the integration tests, written independently of the
//! library code they check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use selfsupport::fem::LoadCase;
use selfsupport::grid::{Axis, DensityField, Direction, GridDims};
use selfsupport::support::OverhangKernel;

pub const E_MIN: f64 = 1e-9;

pub fn gauss(n: usize) -> Vec<(f64, f64)> {
    // points and weights on [0, 1]
    let raw: Vec<(f64, f64)> = match n {
        3 => vec![(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)],
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => unreachable!(),
    };
    raw.into_iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

/// Plane-stress bilinear quad on the unit square, nodes counter-clockwise
/// from the origin, integrated with a 4x4 Gauss rule.
pub fn quad_oracle(e: f64, nu: f64) -> DMatrix<f64> {
    let c = e / (1.0 - nu * nu);
    let d = DMatrix::from_row_slice(3, 3, &[c, c * nu, 0.0, c * nu, c, 0.0, 0.0, 0.0, c * (1.0 - nu) / 2.0]);
    let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let mut k = DMatrix::zeros(8, 8);
    for &(x, wx) in &gauss(4) {
        for &(y, wy) in &gauss(4) {
            let mut b = DMatrix::zeros(3, 8);
            for (a, p) in corners.iter().enumerate() {
                let (fx, sx) = if p[0] == 1.0 { (x, 1.0) } else { (1.0 - x, -1.0) };
                let (fy, sy) = if p[1] == 1.0 { (y, 1.0) } else { (1.0 - y, -1.0) };
                let (dx, dy) = (sx * fy, fx * sy);
                b[(0, 2 * a)] = dx;
                b[(1, 2 * a + 1)] = dy;
                b[(2, 2 * a)] = dy;
                b[(2, 2 * a + 1)] = dx;
            }
            k += b.transpose() * &d * b * (wx * wy);
        }
    }
    k
}

/// Trilinear hex on the unit cube with a 3x3x3 Gauss rule.
pub fn hex_oracle(e: f64, nu: f64) -> DMatrix<f64> {
    let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let mut d = DMatrix::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lam;
        }
        d[(i, i)] = lam + 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }
    let corners = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ];
    let g = gauss(3);
    let mut k = DMatrix::zeros(24, 24);
    for &(x, wx) in &g {
        for &(y, wy) in &g {
            for &(z, wz) in &g {
                let mut b = DMatrix::zeros(6, 24);
                for (a, p) in corners.iter().enumerate() {
                    let f = |t: f64, on: bool| if on { (t, 1.0) } else { (1.0 - t, -1.0) };
                    let (fx, sx) = f(x, p[0] == 1.0);
                    let (fy, sy) = f(y, p[1] == 1.0);
                    let (fz, sz) = f(z, p[2] == 1.0);
                    let gr = [sx * fy * fz, fx * sy * fz, fx * fy * sz];
                    let c = 3 * a;
                    b[(0, c)] = gr[0];
                    b[(1, c + 1)] = gr[1];
                    b[(2, c + 2)] = gr[2];
                    // engineering shear strains yz, xz, xy
                    b[(3, c + 1)] = gr[2];
                    b[(3, c + 2)] = gr[1];
                    b[(4, c)] = gr[2];
                    b[(4, c + 2)] = gr[0];
                    b[(5, c)] = gr[1];
                    b[(5, c + 1)] = gr[0];
                }
                k += b.transpose() * &d * b * (wx * wy * wz);
            }
        }
    }
    k
}

/// Node `(i, j, k)` with nodes numbered x-fastest.
pub fn node(d: GridDims, i: usize, j: usize, k: usize) -> usize {
    (k * (d.ny + 1) + j) * (d.nx + 1) + i
}

pub fn dofs_of(d: GridDims, e: usize) -> Vec<usize> {
    let dim = d.dim();
    let (i, j, k) = (e % d.nx, (e / d.nx) % d.ny, e / (d.nx * d.ny));
    let corners: &[[usize; 3]] = if dim == 2 {
        &[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    } else {
        &[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]
    };
    corners
        .iter()
        .flat_map(|c| {
            let n = node(d, i + c[0], j + c[1], k + c[2]);
            (0..dim).map(move |a| n * dim + a)
        })
        .collect()
}

/// Dense assembly and LU solve with modified SIMP scaling.
pub fn dense_compliance(field: &DensityField, penal: f64, lc: &LoadCase, ke: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let d = field.dims();
    let dim = d.dim();
    let ndof = (d.nx + 1) * (d.ny + 1) * if dim == 2 { 1 } else { d.nz + 1 } * dim;
    let mut k = DMatrix::<f64>::zeros(ndof, ndof);
    for e in 0..d.len() {
        let s = E_MIN + field.get(e).powf(penal) * (1.0 - E_MIN);
        let dofs = dofs_of(d, e);
        for (a, &ga) in dofs.iter().enumerate() {
            for (b, &gb) in dofs.iter().enumerate() {
                k[(ga, gb)] += s * ke[(a, b)];
            }
        }
    }
    let free: Vec<usize> = (0..ndof).filter(|i| !lc.fixed_dofs.contains(i)).collect();
    let kf = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
    let ff = DVector::from_fn(free.len(), |a, _| *lc.loads.get(&free[a]).unwrap_or(&0.0));
    let uf = kf.lu().solve(&ff).expect("nonsingular");
    let mut u = vec![0.0; ndof];
    for (a, &g) in free.iter().enumerate() {
        u[g] = uf[a];
    }
    (ff.dot(&uf), u)
}

pub fn cantilever(d: GridDims) -> LoadCase {
    let dim = d.dim();
    let mut lc = LoadCase::default();
    let nz = if dim == 2 { 1 } else { d.nz + 1 };
    for k in 0..nz {
        for j in 0..=d.ny {
            for a in 0..dim {
                lc.fix(node(d, 0, j, k) * dim + a);
            }
        }
    }
    lc.add_load(node(d, d.nx, d.ny / 2, 0) * dim + 1, -1.0);
    lc
}

/// Offsets by testing, for every column within reach, which is
/// the first element whose center lies on or below the overhang line.
pub fn kernel_oracle(theta: f64, layers: usize, dim: usize) -> Vec<[isize; 3]> {
    let drop = theta.to_radians().tan();
    // farthest column whose center can be below the line within `layers`
    let r = (layers as f64 / drop).ceil() as isize + 2;
    let zr = if dim == 2 { 0 } else { r };
    let mut out = Vec::new();
    for dz in -zr..=zr {
        for dx in -r..=r {
            let dist = ((dx * dx + dz * dz) as f64).sqrt();
            let line = -dist * drop;
            if let Some(d) = (1..=layers as isize).find(|&d| -(d as f64) <= line + 1e-9) {
                out.push([dx, -d, dz]);
            }
        }
    }
    out.sort();
    out
}

pub fn frame(dir: Direction) -> (usize, [usize; 2]) {
    match dir.axis {
        Axis::X => (0, [1, 2]),
        Axis::Y => (1, [0, 2]),
        Axis::Z => (2, [0, 1]),
    }
}

/// Direct evaluation of the support rule in the original frame. The
/// kernels are symmetric under swapping and mirroring the in-layer axes, so
/// which in-layer axis maps to which does not matter.
pub fn brute_force(field: &DensityField, k: &OverhangKernel, tau: f64, dir: Direction) -> Vec<bool> {
    let d = field.dims();
    let n = [d.nx as isize, d.ny as isize, d.nz as isize];
    let (a, lat) = frame(dir);
    let up: isize = if dir.positive { 1 } else { -1 };
    let solid = |p: [isize; 3]| {
        if (0..3).any(|i| p[i] < 0 || p[i] >= n[i]) {
            return false;
        }
        let e = d.idx(p[0] as usize, p[1] as usize, p[2] as usize);
        !field.passive()[e] && field.get(e) >= tau
    };
    (0..d.len())
        .map(|e| {
            let (i, j, l) = d.coords(e);
            let p = [i as isize, j as isize, l as isize];
            let layer = if dir.positive { p[a] } else { n[a] - 1 - p[a] };
            if field.passive()[e] || layer == 0 {
                return true;
            }
            k.offsets().iter().any(|o| {
                let mut q = p;
                q[a] += up * o[1];
                q[lat[0]] += o[0];
                q[lat[1]] += o[2];
                // a 2D grid has no third axis to step along
                if n[lat[1]] == 1 && o[2] != 0 {
                    return false;
                }
                solid(q)
            })
        })
        .collect()
}

/// Non-passive elements at or above `tau` that fail the support rule in any
/// of `dirs`.
pub fn unsupported_by_oracle(field: &DensityField, k: &OverhangKernel, tau: f64, dirs: &[Direction]) -> usize {
    (0..field.len())
        .filter(|&e| !field.passive()[e] && field.get(e) >= tau)
        .filter(|&e| dirs.iter().any(|&d| !brute_force(field, k, tau, d)[e]))
        .count()
}
