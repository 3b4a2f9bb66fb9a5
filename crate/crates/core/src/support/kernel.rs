use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on the center-below-line test so that 45 degrees lands exactly
/// on the diagonal neighbors despite `tan(45°)` rounding.
const LINE_EPS: f64 = 1e-9;

/// Offsets `(dx, dy, dz)` of the elements that can support an element, in
/// build coordinates (`dy < 0` is below).
#[derive(Debug, Clone, PartialEq)]
pub struct OverhangKernel {
    offsets: Vec<[isize; 3]>,
    angle: f64,
    layers: usize,
    dim: usize,
}

impl OverhangKernel {
    pub fn offsets(&self) -> &[[isize; 3]] {
        &self.offsets
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest horizontal distance covered by any offset.
    pub fn reach(&self) -> usize {
        self.offsets.iter().map(|o| o[0].unsigned_abs().max(o[2].unsigned_abs())).max().unwrap_or(0)
    }
}

impl fmt::Display for OverhangKernel {
    /// Draws the kernel as rows of `#`/`.` from the top layer down, anchor
    /// marked `o` (2D only; 3D prints the `dz = 0` slice).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.reach() as isize;
        for dy in (-(self.layers as isize)..=0).rev() {
            for dx in -r..=r {
                let c = if dy == 0 && dx == 0 {
                    'o'
                } else if self.offsets.contains(&[dx, dy, 0]) {
                    '#'
                } else {
                    '.'
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Number of layers used when none is configured: one row reproduces the
/// 45 degree rule exactly, other angles need a second row to differ from it.
pub fn default_layers(theta: f64) -> usize {
    if (theta - 45.0).abs() < 1e-9 {
        1
    } else {
        2
    }
}

/// Kernel for overhang angle `theta` (degrees from the build plate).
///
/// A line with slope angle `theta` through the anchor center is drawn in
/// each horizontal direction; in every column the first element whose center
/// lies on or below the line supports the anchor, provided it is at most
/// `layers` rows down. In 3D the column distance is `sqrt(dx^2 + dz^2)`.
pub fn build_kernel(theta: f64, layers: usize, dim: usize) -> Result<OverhangKernel> {
    if !(theta > 0.0 && theta < 90.0) {
        return Err(Error::InvalidAngle(theta));
    }
    if layers == 0 {
        return Err(Error::InvalidLayers);
    }
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidParameter(format!("kernel dimension must be 2 or 3, got {dim}")));
    }
    let slope = theta.to_radians().tan();
    let reach = (layers as f64 / slope + 1.0).floor() as isize;
    let zr = if dim == 2 { 0 } else { reach };
    let mut offsets = Vec::new();
    for dz in -zr..=zr {
        for dx in -reach..=reach {
            let dist = ((dx * dx + dz * dz) as f64).sqrt();
            let depth = ((dist * slope - LINE_EPS).ceil() as isize).max(1);
            if depth <= layers as isize {
                offsets.push([dx, -depth, dz]);
            }
        }
    }
    offsets.sort_by_key(|o| (-o[1], o[2], o[0]));
    Ok(OverhangKernel { offsets, angle: theta, layers, dim })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_five_2d() {
        let k = build_kernel(45.0, 1, 2).unwrap();
        assert_eq!(k.offsets(), &[[-1, -1, 0], [0, -1, 0], [1, -1, 0]]);
    }

    #[test]
    fn forty_five_3d_is_a_cross() {
        let k = build_kernel(45.0, 1, 3).unwrap();
        let mut got = k.offsets().to_vec();
        got.sort();
        let mut want = vec![[0, -1, 0], [1, -1, 0], [-1, -1, 0], [0, -1, 1], [0, -1, -1]];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn forty_five_extra_layers_add_nothing_new_per_column() {
        // each column already has its first element below the line in row 1
        let k = build_kernel(45.0, 3, 2).unwrap();
        assert_eq!(k.offsets().len(), 7);
        assert!(k.offsets().contains(&[3, -3, 0]));
        assert!(!k.offsets().contains(&[1, -2, 0]));
    }

    #[test]
    fn sixty_degrees_two_layers() {
        let k = build_kernel(60.0, 2, 2).unwrap();
        assert_eq!(k.offsets(), &[[0, -1, 0], [-1, -2, 0], [1, -2, 0]]);
    }

    #[test]
    fn thirty_degrees_two_layers() {
        let k = build_kernel(30.0, 2, 2).unwrap();
        assert_eq!(
            k.offsets(),
            &[[-1, -1, 0], [0, -1, 0], [1, -1, 0], [-3, -2, 0], [-2, -2, 0], [2, -2, 0], [3, -2, 0]]
        );
    }

    #[test]
    fn shallow_single_row_widens() {
        let k = build_kernel(20.0, 1, 2).unwrap();
        let dx: Vec<isize> = k.offsets().iter().map(|o| o[0]).collect();
        assert_eq!(dx, vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn rejects_bad_angles() {
        for t in [0.0, 90.0, -10.0, 120.0, f64::NAN] {
            assert!(build_kernel(t, 1, 2).is_err());
        }
        assert!(build_kernel(45.0, 0, 2).is_err());
    }

    #[test]
    fn display_draws_rows() {
        let k = build_kernel(45.0, 1, 2).unwrap();
        assert_eq!(k.to_string(), ".o.\n###\n");
    }
}
