//! Density images (2D) and legacy VTK voxel files (3D).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DensityField, GridDims, RHO_MIN};

/// Binary 8-bit PGM, one pixel per element. Black is full density, white is
/// `RHO_MIN`; the build axis (y) points up, so the first row is the top layer.
pub fn density_pgm(field: &DensityField) -> Result<Vec<u8>> {
    let d = field.dims();
    if !d.is_2d() {
        return Err(Error::Unsupported(format!(
            "density images are 2D only; export the {d} field as voxels instead"
        )));
    }
    let mut out = format!("P5\n{} {}\n255\n", d.nx, d.ny).into_bytes();
    for j in (0..d.ny).rev() {
        for i in 0..d.nx {
            out.push(gray_level(field.get(d.idx(i, j, 0))));
        }
    }
    Ok(out)
}

pub fn gray_level(rho: f64) -> u8 {
    let t = ((rho - RHO_MIN) / (1.0 - RHO_MIN)).clamp(0.0, 1.0);
    (255.0 * (1.0 - t)).round() as u8
}

pub fn write_density_image(field: &DensityField, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, density_pgm(field)?)?;
    Ok(())
}

/// Cell data read back from a structured-points file.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkField {
    pub dims: GridDims,
    pub density: Vec<f64>,
    /// Thresholded companion (`solid`), when present.
    pub solid: Option<Vec<u8>>,
}

impl VtkField {
    /// Density field with values clamped into `[RHO_MIN, 1]`.
    pub fn into_field(self) -> DensityField {
        let n = self.density.len();
        DensityField::from_values_clamped(self.dims, self.density, vec![false; n])
    }
}

/// Legacy ASCII structured-points text with per-cell `density` scalars in
/// x-fastest order, plus a 0/1 `solid` array when `threshold` is given.
pub fn voxels_vtk(field: &DensityField, threshold: Option<f64>) -> String {
    let d = field.dims();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "selfsupport density {d}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", d.nx + 1, d.ny + 1, d.nz + 1);
    let _ = writeln!(s, "ORIGIN 0 0 0");
    let _ = writeln!(s, "SPACING 1 1 1");
    let _ = writeln!(s, "CELL_DATA {}", d.len());
    let _ = writeln!(s, "SCALARS density double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for v in field.values() {
        let _ = writeln!(s, "{v}");
    }
    if let Some(t) = threshold {
        let _ = writeln!(s, "SCALARS solid int 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in field.values() {
            let _ = writeln!(s, "{}", u8::from(*v >= t));
        }
    }
    s
}

pub fn write_voxels(field: &DensityField, threshold: Option<f64>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, voxels_vtk(field, threshold))?;
    Ok(())
}

fn vtk_err(msg: impl Into<String>) -> Error {
    Error::Parse(format!("vtk: {}", msg.into()))
}

/// Parses the subset of legacy VTK written by [`voxels_vtk`]: ASCII
/// structured points with cell scalars. Unknown scalar arrays are skipped.
pub fn parse_vtk(text: &str) -> Result<VtkField> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.starts_with("# vtk DataFile") => {}
        _ => return Err(vtk_err("missing version line")),
    }
    lines.next().ok_or_else(|| vtk_err("missing title"))?;
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(vtk_err("only ASCII files are supported"));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let mut next = |what: &str| tokens.next().ok_or_else(|| vtk_err(format!("unexpected end, wanted {what}")));

    let mut dims = None;
    let cells = loop {
        let key = next("keyword")?;
        match key {
            "DATASET" => {
                if next("dataset type")? != "STRUCTURED_POINTS" {
                    return Err(vtk_err("dataset must be STRUCTURED_POINTS"));
                }
            }
            "DIMENSIONS" => {
                let mut n = [0usize; 3];
                for v in &mut n {
                    let p: usize = next("dimension")?.parse().map_err(|_| vtk_err("bad dimension"))?;
                    *v = p.checked_sub(1).filter(|&c| c >= 1).ok_or_else(|| vtk_err("point dimensions must be >= 2"))?;
                }
                dims = Some(GridDims::new(n[0], n[1], n[2]).map_err(|e| vtk_err(e.to_string()))?);
            }
            "ORIGIN" | "SPACING" => {
                for _ in 0..3 {
                    next("coordinate")?.parse::<f64>().map_err(|_| vtk_err(format!("bad {key}")))?;
                }
            }
            "CELL_DATA" => {
                break next("cell count")?.parse::<usize>().map_err(|_| vtk_err("bad CELL_DATA count"))?;
            }
            other => return Err(vtk_err(format!("unexpected keyword `{other}`"))),
        }
    };
    let dims = dims.ok_or_else(|| vtk_err("DIMENSIONS missing"))?;
    let expected = dims.nx.checked_mul(dims.ny).and_then(|v| v.checked_mul(dims.nz));
    if expected != Some(cells) {
        return Err(vtk_err(format!("CELL_DATA {cells} does not match DIMENSIONS")));
    }

    let mut density = None;
    let mut solid = None;
    while let Some(key) = tokens.next() {
        if key != "SCALARS" {
            return Err(vtk_err(format!("expected SCALARS, got `{key}`")));
        }
        let name = tokens.next().ok_or_else(|| vtk_err("scalar name missing"))?;
        tokens.next().ok_or_else(|| vtk_err("scalar type missing"))?;
        let mut tok = tokens.next().ok_or_else(|| vtk_err("unexpected end in SCALARS"))?;
        // optional component count
        if tok.parse::<usize>().is_ok() {
            tok = tokens.next().ok_or_else(|| vtk_err("LOOKUP_TABLE missing"))?;
        }
        if tok != "LOOKUP_TABLE" {
            return Err(vtk_err("LOOKUP_TABLE missing"));
        }
        tokens.next().ok_or_else(|| vtk_err("lookup table name missing"))?;
        let mut vals = Vec::new();
        for _ in 0..cells {
            let t = tokens.next().ok_or_else(|| vtk_err(format!("`{name}` has fewer than {cells} values")))?;
            vals.push(t.parse::<f64>().map_err(|_| vtk_err(format!("bad value `{t}` in `{name}`")))?);
        }
        match name {
            "density" => density = Some(vals),
            "solid" => {
                let bits = vals
                    .iter()
                    .map(|&v| match v {
                        0.0 => Ok(0),
                        1.0 => Ok(1),
                        _ => Err(vtk_err("`solid` must hold 0 or 1")),
                    })
                    .collect::<Result<Vec<u8>>>()?;
                solid = Some(bits);
            }
            _ => {}
        }
    }
    let density = density.ok_or_else(|| vtk_err("`density` scalars missing"))?;
    Ok(VtkField { dims, density, solid })
}

pub fn read_voxels(path: impl AsRef<Path>) -> Result<VtkField> {
    parse_vtk(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_uniform_black() {
        let f = DensityField::uniform(GridDims::new_2d(3, 2).unwrap(), 1.0);
        let img = density_pgm(&f).unwrap();
        assert!(img.starts_with(b"P5\n3 2\n255\n"));
        assert!(img[11..].iter().all(|&p| p == 0));
        assert_eq!(gray_level(RHO_MIN), 255);
    }

    #[test]
    fn pgm_rejects_3d() {
        let f = DensityField::uniform(GridDims::new(2, 2, 2).unwrap(), 1.0);
        assert!(matches!(density_pgm(&f), Err(Error::Unsupported(_))));
    }

    #[test]
    fn pgm_build_axis_up() {
        let d = GridDims::new_2d(2, 2).unwrap();
        // bottom row solid, top row void
        let f = DensityField::from_values(d, vec![1.0, 1.0, RHO_MIN, RHO_MIN]).unwrap();
        let img = density_pgm(&f).unwrap();
        assert_eq!(&img[img.len() - 4..], &[255, 255, 0, 0]);
    }

    #[test]
    fn vtk_ordering_and_round_trip() {
        let d = GridDims::new(2, 2, 2).unwrap();
        let vals: Vec<f64> = (0..8).map(|e| 0.1 + 0.1 * e as f64).collect();
        let f = DensityField::from_values(d, vals.clone()).unwrap();
        let text = voxels_vtk(&f, Some(0.5));
        assert!(text.contains("DIMENSIONS 3 3 3"));
        let back = parse_vtk(&text).unwrap();
        assert_eq!(back.dims, d);
        assert_eq!(back.density, vals);
        assert_eq!(back.solid.unwrap(), vec![0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn vtk_rejects_bad_input() {
        assert!(parse_vtk("").is_err());
        let f = DensityField::uniform(GridDims::new(2, 1, 1).unwrap(), 0.5);
        let text = voxels_vtk(&f, None);
        assert!(parse_vtk(&text.replace("CELL_DATA 2", "CELL_DATA 3")).is_err());
        assert!(parse_vtk(text.trim_end().trim_end_matches("0.5")).is_err());
    }
}
