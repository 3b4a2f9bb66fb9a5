//! Element stiffness matrices for unit-size bilinear quads and trilinear hexes.

use crate::error::{Error, Result};

/// Dense symmetric element stiffness matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementStiffness {
    dim: usize,
    young: f64,
    nu: f64,
    data: Vec<f64>,
}

impl ElementStiffness {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Degrees of freedom per element: 8 in 2D, 24 in 3D.
    pub fn size(&self) -> usize {
        if self.dim == 2 {
            8
        } else {
            24
        }
    }

    pub fn young(&self) -> f64 {
        self.young
    }

    pub fn poisson(&self) -> f64 {
        self.nu
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.size() + c]
    }

    /// `u^T K u` for an element displacement vector.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let n = self.size();
        debug_assert_eq!(u.len(), n);
        let mut acc = 0.0;
        for r in 0..n {
            let row = &self.data[r * n..(r + 1) * n];
            let ku: f64 = row.iter().zip(u).map(|(a, b)| a * b).sum();
            acc += u[r] * ku;
        }
        acc
    }
}

/// Stiffness of a unit square (plane stress, unit thickness) or unit cube
/// element. Local node order is counter-clockwise from the origin corner in
/// the `z = 0` face, then the same for `z = 1`; dofs are node-major.
pub fn element_stiffness(dim: usize, young: f64, nu: f64) -> Result<ElementStiffness> {
    if !(young > 0.0 && young.is_finite()) {
        return Err(Error::InvalidMaterial(format!("Young's modulus must be positive, got {young}")));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidMaterial(format!("Poisson ratio must lie in [0, 0.5), got {nu}")));
    }
    let data = match dim {
        2 => quad_stiffness(young, nu),
        3 => hex_stiffness(young, nu),
        _ => return Err(Error::InvalidMaterial(format!("unsupported dimension {dim}"))),
    };
    Ok(ElementStiffness { dim, young, nu, data })
}

fn quad_stiffness(e: f64, nu: f64) -> Vec<f64> {
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    const PATTERN: [[usize; 8]; 8] = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let scale = e / (1.0 - nu * nu);
    PATTERN.iter().flat_map(|row| row.iter().map(move |&i| scale * k[i])).collect()
}

/// Local corner coordinates of the hex element in node order.
pub(crate) const HEX_CORNERS: [[f64; 3]; 8] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [1.0, 1.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 1.0],
    [1.0, 1.0, 1.0],
    [0.0, 1.0, 1.0],
];

fn hex_stiffness(e: f64, nu: f64) -> Vec<f64> {
    // two-point Gauss is exact for the trilinear stiffness integrand
    let g = 0.5 / 3f64.sqrt();
    let pts = [0.5 - g, 0.5 + g];
    let d = isotropic_3d(e, nu);
    let mut k = vec![0.0; 24 * 24];
    for &x in &pts {
        for &y in &pts {
            for &z in &pts {
                // shape function gradients at (x, y, z)
                let mut grad = [[0.0; 3]; 8];
                for (a, c) in HEX_CORNERS.iter().enumerate() {
                    let fx = if c[0] == 1.0 { x } else { 1.0 - x };
                    let fy = if c[1] == 1.0 { y } else { 1.0 - y };
                    let fz = if c[2] == 1.0 { z } else { 1.0 - z };
                    let sx = if c[0] == 1.0 { 1.0 } else { -1.0 };
                    let sy = if c[1] == 1.0 { 1.0 } else { -1.0 };
                    let sz = if c[2] == 1.0 { 1.0 } else { -1.0 };
                    grad[a] = [sx * fy * fz, fx * sy * fz, fx * fy * sz];
                }
                let mut b = [[0.0; 24]; 6];
                for (a, gr) in grad.iter().enumerate() {
                    let c = 3 * a;
                    b[0][c] = gr[0];
                    b[1][c + 1] = gr[1];
                    b[2][c + 2] = gr[2];
                    b[3][c] = gr[1];
                    b[3][c + 1] = gr[0];
                    b[4][c + 1] = gr[2];
                    b[4][c + 2] = gr[1];
                    b[5][c] = gr[2];
                    b[5][c + 2] = gr[0];
                }
                let mut db = [[0.0; 24]; 6];
                for r in 0..6 {
                    for c in 0..24 {
                        db[r][c] = (0..6).map(|s| d[r][s] * b[s][c]).sum();
                    }
                }
                // equal weights 1/8 on the unit cube
                for r in 0..24 {
                    for c in 0..24 {
                        let v: f64 = (0..6).map(|s| b[s][r] * db[s][c]).sum();
                        k[r * 24 + c] += 0.125 * v;
                    }
                }
            }
        }
    }
    k
}

fn isotropic_3d(e: f64, nu: f64) -> [[f64; 6]; 6] {
    let f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mut d = [[0.0; 6]; 6];
    for r in 0..3 {
        for c in 0..3 {
            d[r][c] = if r == c { f * (1.0 - nu) } else { f * nu };
        }
        d[r + 3][r + 3] = f * (1.0 - 2.0 * nu) / 2.0;
    }
    d
}
