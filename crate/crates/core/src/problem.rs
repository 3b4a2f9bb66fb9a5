//! Problem definitions: validated [`ProblemSpec`], TOML config loading and
//! the named benchmark presets.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{LoadCase, Preconditioner, SolverOptions};
use crate::grid::{rasterize_passive, Direction, GridDims, PassiveShape};
use crate::optimizer::{MmaParams, Schedule};
use crate::support::{build_kernel, default_layers, OverhangKernel};

/// A face (3D) or edge (2D) of the node grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `x = 0`
    Left,
    /// `x = nx`
    Right,
    /// `y = 0`
    Bottom,
    /// `y = ny`
    Top,
    /// `z = 0`
    Back,
    /// `z = nz`
    Front,
}

/// A set of nodes, addressed by node coordinates `0..=n` along each axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Node([usize; 3]),
    Boundary(Boundary),
    /// Inclusive box of node coordinates.
    Nodes { min: [usize; 3], max: [usize; 3] },
}

impl Region {
    /// Node indices in ascending order.
    pub fn nodes(&self, dims: GridDims) -> Result<Vec<usize>> {
        let (px, py, pz) = dims.node_counts();
        let top = [px - 1, py - 1, pz - 1];
        let (min, max) = match *self {
            Region::Node(p) => (p, p),
            Region::Nodes { min, max } => (min, max),
            Region::Boundary(b) => {
                let mut min = [0, 0, 0];
                let mut max = top;
                match b {
                    Boundary::Left => max[0] = 0,
                    Boundary::Right => min[0] = top[0],
                    Boundary::Bottom => max[1] = 0,
                    Boundary::Top => min[1] = top[1],
                    Boundary::Back | Boundary::Front if dims.is_2d() => {
                        return Err(Error::Validation {
                            field: "boundary".into(),
                            reason: format!("{b:?} face needs a 3D grid").to_lowercase(),
                        })
                    }
                    Boundary::Back => max[2] = 0,
                    Boundary::Front => min[2] = top[2],
                }
                (min, max)
            }
        };
        for a in 0..3 {
            if max[a] > top[a] || min[a] > max[a] {
                return Err(Error::Validation {
                    field: "node".into(),
                    reason: format!(
                        "node range {min:?}..={max:?} outside node grid 0..={top:?}"
                    ),
                });
            }
        }
        let mut out = Vec::new();
        for k in min[2]..=max[2] {
            for j in min[1]..=max[1] {
                for i in min[0]..=max[0] {
                    out.push(dims.node(i, j, k));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub region: Region,
    /// Fixed displacement components (x, y, z).
    pub fix: [bool; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadDistribution {
    /// `force` is the resultant, split evenly over the region's nodes.
    #[default]
    Total,
    /// `force` is applied at every node of the region.
    PerNode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub region: Region,
    pub force: [f64; 3],
    pub distribution: LoadDistribution,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DirectionPolicy {
    /// Pick the candidate with the fewest unsupported elements.
    Auto(Vec<Direction>),
    /// Enforce self-support along every listed direction.
    Pinned(Vec<Direction>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self { young: 1.0, poisson: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub dims: GridDims,
    pub material: Material,
    pub volume_fraction: f64,
    pub filter_radius: f64,
    /// Overhang angle in degrees from the build plate.
    pub overhang_angle: f64,
    /// Kernel depth; `None` picks [`default_layers`].
    pub kernel_layers: Option<usize>,
    pub penalty: f64,
    pub supports: Vec<Support>,
    pub loads: Vec<Load>,
    pub passive: Vec<PassiveShape>,
    pub directions: DirectionPolicy,
    pub schedule: Schedule,
    pub mma: MmaParams,
    pub solver: SolverOptions,
    pub seed: u64,
}

impl ProblemSpec {
    /// A problem on `dims` with default settings and no boundary conditions.
    pub fn new(name: impl Into<String>, dims: GridDims) -> Self {
        Self {
            name: name.into(),
            dims,
            material: Material::default(),
            volume_fraction: 0.5,
            filter_radius: 1.5,
            overhang_angle: 45.0,
            kernel_layers: None,
            penalty: 3.0,
            supports: Vec::new(),
            loads: Vec::new(),
            passive: Vec::new(),
            directions: DirectionPolicy::Auto(Direction::candidates(dims)),
            schedule: Schedule::default(),
            mma: MmaParams::default(),
            solver: SolverOptions::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::Validation { field: field.into(), reason })
        };
        let f = self.volume_fraction;
        if !(f > 0.0 && f < 1.0) {
            return bad("volume_fraction", format!("must lie in (0, 1), got {f}"));
        }
        if !(self.filter_radius >= 1.0 && self.filter_radius.is_finite()) {
            return bad("filter_radius", format!("must be >= 1, got {}", self.filter_radius));
        }
        let t = self.overhang_angle;
        if !(t > 0.0 && t < 90.0) {
            return bad("overhang_angle", format!("must lie in (0, 90), got {t}"));
        }
        if !(self.penalty >= 1.0 && self.penalty.is_finite()) {
            return bad("penalty", format!("must be >= 1, got {}", self.penalty));
        }
        if self.kernel_layers == Some(0) {
            return bad("kernel_layers", "must be >= 1".into());
        }
        let m = self.material;
        if !(m.young > 0.0 && m.young.is_finite()) {
            return bad("material.young", format!("must be positive, got {}", m.young));
        }
        if !(0.0..0.5).contains(&m.poisson) {
            return bad("material.poisson", format!("must lie in [0, 0.5), got {}", m.poisson));
        }
        let dirs = match &self.directions {
            DirectionPolicy::Auto(d) | DirectionPolicy::Pinned(d) => d,
        };
        if dirs.is_empty() {
            return bad("direction", "needs at least one direction".into());
        }
        for d in dirs {
            if d.validate(self.dims).is_err() {
                return bad("direction", format!("{d} is not valid on a 2D grid"));
            }
        }
        if self.passive_mask().iter().all(|p| *p) {
            return bad("passive", "every element is passive".into());
        }
        if !(self.solver.tolerance > 0.0) {
            return bad("solver.tolerance", "must be positive".into());
        }
        self.schedule.validate()?;
        self.mma.validate()?;
        self.load_case()?.validate(self.dims)
    }

    pub fn kernel(&self) -> Result<OverhangKernel> {
        let layers = self.kernel_layers.unwrap_or_else(|| default_layers(self.overhang_angle));
        build_kernel(self.overhang_angle, layers, self.dims.dim())
    }

    pub fn passive_mask(&self) -> Vec<bool> {
        rasterize_passive(self.dims, &self.passive)
    }

    /// Directions the run is constrained in, or the candidates to choose from.
    pub fn direction_list(&self) -> &[Direction] {
        match &self.directions {
            DirectionPolicy::Auto(d) | DirectionPolicy::Pinned(d) => d,
        }
    }

    /// Resolves supports and loads to global dofs.
    pub fn load_case(&self) -> Result<LoadCase> {
        let dim = self.dims.dim();
        let mut lc = LoadCase::default();
        for (i, s) in self.supports.iter().enumerate() {
            let nodes = s.region.nodes(self.dims).map_err(|e| prefix(e, &format!("support[{i}]")))?;
            for n in nodes {
                for c in 0..dim {
                    if s.fix[c] {
                        lc.fix(n * dim + c);
                    }
                }
            }
        }
        let mut loads: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, l) in self.loads.iter().enumerate() {
            let nodes = l.region.nodes(self.dims).map_err(|e| prefix(e, &format!("load[{i}]")))?;
            let share = match l.distribution {
                LoadDistribution::Total => 1.0 / nodes.len() as f64,
                LoadDistribution::PerNode => 1.0,
            };
            if dim == 2 && l.force[2] != 0.0 {
                return Err(Error::Validation {
                    field: format!("load[{i}].force"),
                    reason: "z component on a 2D grid".into(),
                });
            }
            for n in nodes {
                for c in 0..dim {
                    if l.force[c] != 0.0 {
                        *loads.entry(n * dim + c).or_insert(0.0) += share * l.force[c];
                    }
                }
            }
        }
        for (d, v) in loads {
            lc.add_load(d, v);
        }
        Ok(lc)
    }
}

fn prefix(e: Error, at: &str) -> Error {
    match e {
        Error::Validation { field, reason } => {
            Error::Validation { field: format!("{at}.{field}"), reason }
        }
        other => other,
    }
}

// ---------------------------------------------------------------------------
// presets

pub const PRESET_NAMES: &[&str] = &[
    "beam",
    "beam-hole",
    "beam-r2",
    "beam-r3",
    "beam-point",
    "beam-distributed",
    "beam-mixed",
    "beam-vf06",
    "beam-vf05",
    "beam-vf04",
    "beam-vf025",
    "beam-angle30",
    "beam-angle45",
    "beam-angle60",
    "mbb-half",
    "square",
    "wheel-small",
    "cantilever3d-small",
    "desk-small",
    "beam-small",
];

const ALL: [bool; 3] = [true, true, true];

fn fixed(region: Region) -> Support {
    Support { region, fix: ALL }
}

fn point(p: [usize; 3], force: [f64; 3]) -> Load {
    Load { region: Region::Node(p), force, distribution: LoadDistribution::Total }
}

fn grid2(nx: usize, ny: usize) -> GridDims {
    GridDims::new_2d(nx, ny).expect("preset dims are positive")
}

fn grid3(nx: usize, ny: usize, nz: usize) -> GridDims {
    GridDims::new(nx, ny, nz).expect("preset dims are positive")
}

/// Cantilever: left edge clamped, unit downward load mid-right.
fn cantilever(name: &str, nx: usize, ny: usize, vf: f64, r: f64) -> ProblemSpec {
    let mut p = ProblemSpec::new(name, grid2(nx, ny));
    p.volume_fraction = vf;
    p.filter_radius = r;
    p.supports = vec![fixed(Region::Boundary(Boundary::Left))];
    p.loads = vec![point([nx, ny / 2, 0], [0.0, -1.0, 0.0])];
    p
}

fn long_beam_edges() -> Vec<Load> {
    [Boundary::Bottom, Boundary::Top, Boundary::Right]
        .into_iter()
        .map(|b| Load {
            region: Region::Boundary(b),
            force: [0.0, -1.0 / 3.0, 0.0],
            distribution: LoadDistribution::Total,
        })
        .collect()
}

/// Looks up a named benchmark problem.
pub fn preset(name: &str) -> Result<ProblemSpec> {
    let p = match name {
        "beam" | "beam-r15" => cantilever(name, 150, 60, 0.6, 1.5),
        "beam-hole" => {
            let mut p = cantilever(name, 150, 60, 0.5, 1.5);
            p.passive = vec![PassiveShape::Circle { center: [75.0, 30.0], radius: 20.0 }];
            p
        }
        "beam-r2" => cantilever(name, 150, 60, 0.6, 2.0),
        "beam-r3" => cantilever(name, 150, 60, 0.6, 3.0),
        "beam-point" => cantilever(name, 240, 60, 0.6, 2.0),
        "beam-distributed" => {
            let mut p = cantilever(name, 240, 60, 0.6, 2.0);
            p.loads = long_beam_edges();
            p
        }
        "beam-mixed" => {
            let mut p = cantilever(name, 240, 60, 0.6, 2.0);
            p.loads.extend(long_beam_edges());
            p
        }
        "beam-vf06" => cantilever(name, 150, 60, 0.6, 1.5),
        "beam-vf05" => cantilever(name, 150, 60, 0.5, 1.5),
        "beam-vf04" => cantilever(name, 150, 60, 0.4, 1.5),
        "beam-vf025" => cantilever(name, 150, 60, 0.25, 1.5),
        "beam-angle30" | "beam-angle45" | "beam-angle60" => {
            let mut p = cantilever(name, 150, 60, 0.5, 1.5);
            p.overhang_angle = name["beam-angle".len()..].parse().expect("numeric suffix");
            p
        }
        "beam-small" => cantilever(name, 60, 24, 0.5, 1.5),
        "mbb-half" => {
            // symmetry plane on the left, roller under the right end
            let mut p = ProblemSpec::new(name, grid2(160, 30));
            p.volume_fraction = 0.5;
            p.filter_radius = 1.5;
            p.supports = vec![
                Support { region: Region::Boundary(Boundary::Left), fix: [true, false, false] },
                Support { region: Region::Node([160, 0, 0]), fix: [false, true, false] },
            ];
            p.loads = vec![point([0, 30, 0], [0.0, -1.0, 0.0])];
            p.directions = DirectionPolicy::Pinned(vec![Direction::POS_X, Direction::NEG_X]);
            p
        }
        "square" => {
            let mut p = ProblemSpec::new(name, grid2(150, 150));
            p.volume_fraction = 0.3;
            p.filter_radius = 1.5;
            p.supports = vec![fixed(Region::Node([0, 0, 0])), fixed(Region::Node([150, 0, 0]))];
            p.loads = vec![Load {
                region: Region::Boundary(Boundary::Top),
                force: [0.0, -1.0, 0.0],
                distribution: LoadDistribution::Total,
            }];
            p
        }
        "wheel-small" => {
            let mut p = ProblemSpec::new(name, grid3(40, 40, 40));
            p.volume_fraction = 0.25;
            p.filter_radius = 1.5;
            p.supports = [[0, 0, 0], [40, 0, 0], [0, 0, 40], [40, 0, 40]]
                .into_iter()
                .map(|n| fixed(Region::Node(n)))
                .collect();
            p.loads = vec![point([20, 0, 20], [0.0, -1.0, 0.0])];
            p
        }
        "cantilever3d-small" => {
            let mut p = ProblemSpec::new(name, grid3(50, 25, 25));
            p.volume_fraction = 0.3;
            p.filter_radius = 1.5;
            p.supports = vec![fixed(Region::Boundary(Boundary::Left))];
            // the four nodes around the center of the right face
            p.loads = vec![Load {
                region: Region::Nodes { min: [50, 12, 12], max: [50, 13, 13] },
                force: [0.0, -1.0, 0.0],
                distribution: LoadDistribution::Total,
            }];
            p
        }
        "desk-small" => {
            let mut p = ProblemSpec::new(name, grid3(40, 24, 40));
            p.volume_fraction = 0.3;
            p.filter_radius = 1.5;
            p.supports = [[0, 0, 0], [40, 0, 0], [0, 0, 40], [40, 0, 40]]
                .into_iter()
                .map(|n| fixed(Region::Node(n)))
                .collect();
            p.loads = vec![Load {
                region: Region::Boundary(Boundary::Top),
                force: [0.0, -1.0, 0.0],
                distribution: LoadDistribution::Total,
            }];
            p
        }
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(p)
}

// ---------------------------------------------------------------------------
// config files

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    /// Start from a preset and override the given sections.
    preset: Option<String>,
    domain: Option<RawDomain>,
    material: Option<RawMaterial>,
    optimization: Option<RawOptimization>,
    #[serde(default)]
    support: Vec<RawSupport>,
    #[serde(default)]
    load: Vec<RawLoad>,
    #[serde(default)]
    passive: Vec<PassiveShape>,
    direction: Option<RawDirection>,
    schedule: Option<Schedule>,
    mma: Option<MmaParams>,
    solver: Option<RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    nx: usize,
    ny: usize,
    #[serde(default = "one")]
    nz: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    young: Option<f64>,
    poisson: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimization {
    volume_fraction: Option<f64>,
    filter_radius: Option<f64>,
    overhang_angle: Option<f64>,
    kernel_layers: Option<usize>,
    penalty: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    min: Vec<usize>,
    max: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSupport {
    node: Option<Vec<usize>>,
    boundary: Option<Boundary>,
    nodes: Option<RawBox>,
    fix: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoad {
    node: Option<Vec<usize>>,
    boundary: Option<Boundary>,
    nodes: Option<RawBox>,
    force: Vec<f64>,
    #[serde(default)]
    distribution: LoadDistribution,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum PolicyName {
    Auto,
    Pinned,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDirection {
    policy: PolicyName,
    #[serde(default)]
    directions: Vec<Direction>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    preconditioner: Option<String>,
}

fn point3(v: &[usize], is_2d: bool, field: &str) -> Result<[usize; 3]> {
    match (v.len(), is_2d) {
        (2, true) => Ok([v[0], v[1], 0]),
        (3, _) => Ok([v[0], v[1], v[2]]),
        _ => Err(Error::Validation {
            field: field.into(),
            reason: format!("expected {} coordinates, got {}", if is_2d { 2 } else { 3 }, v.len()),
        }),
    }
}

fn region(
    node: &Option<Vec<usize>>,
    boundary: &Option<Boundary>,
    nodes: &Option<RawBox>,
    dims: GridDims,
    field: &str,
) -> Result<Region> {
    let is_2d = dims.is_2d();
    match (node, boundary, nodes) {
        (Some(n), None, None) => Ok(Region::Node(point3(n, is_2d, &format!("{field}.node"))?)),
        (None, Some(b), None) => Ok(Region::Boundary(*b)),
        (None, None, Some(b)) => Ok(Region::Nodes {
            min: point3(&b.min, is_2d, &format!("{field}.nodes.min"))?,
            max: point3(&b.max, is_2d, &format!("{field}.nodes.max"))?,
        }),
        _ => Err(Error::Validation {
            field: field.into(),
            reason: "give exactly one of `node`, `boundary` or `nodes`".into(),
        }),
    }
}

impl FromStr for Preconditioner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jacobi" => Ok(Preconditioner::Jacobi),
            "multigrid" | "mg" => Ok(Preconditioner::Multigrid),
            _ => Err(Error::Parse(format!("unknown preconditioner `{s}`"))),
        }
    }
}

impl fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preconditioner::Jacobi => "jacobi",
            Preconditioner::Multigrid => "multigrid",
        })
    }
}

/// Parses and validates a TOML problem description.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut p = match (&raw.preset, &raw.domain) {
        (Some(name), _) => preset(name)?,
        (None, Some(d)) => ProblemSpec::new("custom", GridDims::new(d.nx, d.ny, d.nz)?),
        (None, None) => {
            return Err(Error::Validation {
                field: "domain".into(),
                reason: "missing; give a [domain] table or a preset".into(),
            })
        }
    };
    if let (Some(_), Some(d)) = (&raw.preset, &raw.domain) {
        let dims = GridDims::new(d.nx, d.ny, d.nz)?;
        if dims != p.dims {
            p.dims = dims;
            p.directions = DirectionPolicy::Auto(Direction::candidates(dims));
        }
    }
    if let Some(n) = raw.name {
        p.name = n;
    }
    if let Some(m) = raw.material {
        p.material.young = m.young.unwrap_or(p.material.young);
        p.material.poisson = m.poisson.unwrap_or(p.material.poisson);
    }
    if let Some(o) = raw.optimization {
        p.volume_fraction = o.volume_fraction.unwrap_or(p.volume_fraction);
        p.filter_radius = o.filter_radius.unwrap_or(p.filter_radius);
        p.overhang_angle = o.overhang_angle.unwrap_or(p.overhang_angle);
        p.kernel_layers = o.kernel_layers.or(p.kernel_layers);
        p.penalty = o.penalty.unwrap_or(p.penalty);
        p.seed = o.seed.unwrap_or(p.seed);
    }
    if !raw.support.is_empty() {
        p.supports = Vec::new();
        for (i, s) in raw.support.iter().enumerate() {
            let field = format!("support[{i}]");
            let mut fix = [false; 3];
            match &s.fix {
                None => fix = ALL,
                Some(list) => {
                    for c in list {
                        let a = match c.to_ascii_lowercase().as_str() {
                            "x" => 0,
                            "y" => 1,
                            "z" => 2,
                            _ => {
                                return Err(Error::Validation {
                                    field: format!("{field}.fix"),
                                    reason: format!("unknown component `{c}`"),
                                })
                            }
                        };
                        fix[a] = true;
                    }
                }
            }
            p.supports.push(Support { region: region(&s.node, &s.boundary, &s.nodes, p.dims, &field)?, fix });
        }
    }
    if !raw.load.is_empty() {
        p.loads = Vec::new();
        for (i, l) in raw.load.iter().enumerate() {
            let field = format!("load[{i}]");
            let force = match l.force.as_slice() {
                [x, y] if p.dims.is_2d() => [*x, *y, 0.0],
                [x, y, z] => [*x, *y, *z],
                _ => {
                    return Err(Error::Validation {
                        field: format!("{field}.force"),
                        reason: format!("wrong number of components ({})", l.force.len()),
                    })
                }
            };
            if force.iter().any(|f| !f.is_finite()) {
                return Err(Error::Validation {
                    field: format!("{field}.force"),
                    reason: "non-finite component".into(),
                });
            }
            p.loads.push(Load {
                region: region(&l.node, &l.boundary, &l.nodes, p.dims, &field)?,
                force,
                distribution: l.distribution,
            });
        }
    }
    if !raw.passive.is_empty() {
        p.passive = raw.passive;
    }
    if let Some(d) = raw.direction {
        let dirs = if d.directions.is_empty() {
            Direction::candidates(p.dims)
        } else {
            d.directions
        };
        p.directions = match d.policy {
            PolicyName::Auto => DirectionPolicy::Auto(dirs),
            PolicyName::Pinned => DirectionPolicy::Pinned(dirs),
        };
    }
    if let Some(s) = raw.schedule {
        p.schedule = s;
    }
    if let Some(m) = raw.mma {
        p.mma = m;
    }
    if let Some(s) = raw.solver {
        p.solver.tolerance = s.tolerance.unwrap_or(p.solver.tolerance);
        p.solver.max_iterations = s.max_iterations.or(p.solver.max_iterations);
        if let Some(pc) = s.preconditioner {
            p.solver.preconditioner = pc.parse().map_err(|_| Error::Validation {
                field: "solver.preconditioner".into(),
                reason: format!("unknown preconditioner `{pc}`"),
            })?;
        }
    }
    p.validate()?;
    Ok(p)
}

/// Reads a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_problem(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            p.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn beam_preset_shape() {
        let p = preset("beam").unwrap();
        assert_eq!(p.dims.to_string(), "150x60");
        assert_eq!(p.volume_fraction, 0.6);
        let lc = p.load_case().unwrap();
        assert_eq!(lc.fixed_dofs.len(), 2 * 61);
        let node = p.dims.node(150, 30, 0);
        assert_eq!(lc.loads.get(&(2 * node + 1)), Some(&-1.0));
    }

    #[test]
    fn mbb_pins_both_lateral_directions() {
        let p = preset("mbb-half").unwrap();
        assert_eq!(p.dims.to_string(), "160x30");
        assert_eq!(p.volume_fraction, 0.5);
        assert_eq!(
            p.directions,
            DirectionPolicy::Pinned(vec![Direction::POS_X, Direction::NEG_X])
        );
    }

    #[test]
    fn distributed_load_sums_to_resultant() {
        let p = preset("desk-small").unwrap();
        let total: f64 = p.load_case().unwrap().loads.values().sum();
        assert!((total + 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_overrides_preset() {
        let p = parse_problem("preset = \"beam\"\n[optimization]\nvolume_fraction = 0.4\n").unwrap();
        assert_eq!(p.volume_fraction, 0.4);
        assert_eq!(p.dims.to_string(), "150x60");
    }

    #[test]
    fn config_rejects_bad_volume_fraction() {
        let text = "[domain]\nnx = 10\nny = 5\n[optimization]\nvolume_fraction = 1.5\n\
                    [[support]]\nboundary = \"left\"\n[[load]]\nnode = [10, 2]\nforce = [0, -1]\n";
        match parse_problem(text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "volume_fraction"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_has_line() {
        let e = parse_problem("[domain]\nnx = 10\nny = = 5\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }
}
