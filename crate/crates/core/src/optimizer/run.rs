use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{compliance_sensitivity, element_stiffness, FeSolver};
use crate::filters::{chain_sensitivity, FilterWeights, ProjectionParams};
use crate::grid::{DensityField, Direction, GridDims, RHO_MIN};
use crate::problem::{DirectionPolicy, ProblemSpec};
use crate::support::{
    constraint_sensitivity, constraint_value, DetectionParams, Detector, OverhangKernel,
};

use super::mma::{Func, Mma};
use super::{
    measure_nondiscreteness, select_direction, unsupported_union, History,
    IterRecord, OptRun, VOLUME_TOL,
};

/// Design variables -> filtered -> projected -> physical densities, and the
/// reverse chain for gradients.
struct Pipeline {
    dims: GridDims,
    filter: FilterWeights,
    passive: Vec<bool>,
    active: Vec<usize>,
}

impl Pipeline {
    fn new(spec: &ProblemSpec) -> Self {
        let passive = spec.passive_mask();
        let active = (0..spec.dims.len()).filter(|&e| !passive[e]).collect();
        Self { dims: spec.dims, filter: FilterWeights::new(spec.dims, spec.filter_radius), passive, active }
    }

    /// Returns `(filtered, physical)`; passive design entries must be zero.
    fn forward(&self, x: &[f64], pp: ProjectionParams) -> (Vec<f64>, Vec<f64>) {
        let filtered = self.filter.apply(x);
        let rho = filtered
            .iter()
            .zip(&self.passive)
            .map(|(&v, &p)| if p { RHO_MIN } else { RHO_MIN + (1.0 - RHO_MIN) * pp.project(v) })
            .collect();
        (filtered, rho)
    }

    fn field(&self, rho: &[f64]) -> DensityField {
        DensityField::from_values_clamped(self.dims, rho.to_vec(), self.passive.clone())
    }

    /// Gradient with respect to the active design variables.
    fn backward(&self, g_rho: &[f64], filtered: &[f64], pp: ProjectionParams) -> Vec<f64> {
        let g: Vec<f64> = g_rho
            .iter()
            .zip(&self.passive)
            .map(|(&g, &p)| if p { 0.0 } else { g * (1.0 - RHO_MIN) })
            .collect();
        let gx = chain_sensitivity(&g, filtered, pp, &self.filter);
        self.active.iter().map(|&e| gx[e]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    /// Unconstrained, before the build direction is known.
    Coarse,
    /// Constrained at the initial projection sharpness.
    Gray,
    /// Constrained (or reference) with sharpness continuation.
    BlackWhite,
}

/// Standard volume-constrained run with the same continuation as the
/// self-supporting run, so that their compliances are comparable.
pub fn run_reference(spec: &ProblemSpec) -> Result<OptRun> {
    run_reference_with(spec, &mut |_| {})
}

pub fn run_reference_with(spec: &ProblemSpec, observe: &mut dyn FnMut(&IterRecord)) -> Result<OptRun> {
    optimize(spec, false, observe)
}

/// Staged self-supporting run: coarse unconstrained iterations, build
/// direction choice, constrained gray iterations under a shrinking bound,
/// projection continuation and a final removal of leftover unsupported
/// elements.
pub fn run_selfsupporting(spec: &ProblemSpec) -> Result<OptRun> {
    run_selfsupporting_with(spec, &mut |_| {})
}

pub fn run_selfsupporting_with(
    spec: &ProblemSpec,
    observe: &mut dyn FnMut(&IterRecord),
) -> Result<OptRun> {
    optimize(spec, true, observe)
}

fn detectors(dims: GridDims, kernel: &OverhangKernel, dirs: &[Direction], tau: f64) -> Vec<Detector> {
    dirs.iter().map(|&d| Detector::new(dims, kernel, DetectionParams::new(tau, d))).collect()
}

fn optimize(
    spec: &ProblemSpec,
    constrained: bool,
    observe: &mut dyn FnMut(&IterRecord),
) -> Result<OptRun> {
    spec.validate()?;
    let s = &spec.schedule;
    let dims = spec.dims;
    let kernel = spec.kernel()?;
    let ke = element_stiffness(dims.dim(), spec.material.young, spec.material.poisson)?;
    let mut solver = FeSolver::new(dims, ke.clone(), &spec.load_case()?, spec.solver)?;
    let pipe = Pipeline::new(spec);
    let n_act = pipe.active.len();
    let f = spec.volume_fraction;

    let mut x = vec![0.0; dims.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for &e in &pipe.active {
        let noise = if s.init_noise > 0.0 { rng.random_range(-s.init_noise..=s.init_noise) } else { 0.0 };
        x[e] = (f + noise).clamp(0.0, 1.0);
    }
    let mut mma = Mma::new(n_act, spec.mma);
    let xmin = vec![0.0; n_act];
    let xmax = vec![1.0; n_act];

    // directions used for logging until constraints switch on
    let (watch_dirs, pinned) = match &spec.directions {
        DirectionPolicy::Auto(c) => (c.clone(), false),
        DirectionPolicy::Pinned(d) => (d.clone(), true),
    };
    let watch = detectors(dims, &kernel, &watch_dirs, s.tau_bw);

    let mut stage = if constrained { Stage::Coarse } else { Stage::BlackWhite };
    let mut stage_iters = 0;
    let mut beta = s.beta_init;
    let mut beta_age = 0;
    let mut dirs: Vec<Direction> = Vec::new();
    let mut active_dets: Vec<Detector> = Vec::new();
    let mut eps: Vec<f64> = Vec::new();
    let mut eps_age = 0;
    let mut c0: Option<f64> = None;
    let mut last_change = f64::INFINITY;
    let mut at_max = 0;
    let mut best_count = usize::MAX;
    let mut since_best = 0;
    let mut history = History::default();
    let vol_grad = vec![1.0 / (f * n_act as f64); dims.len()];
    let u_scale = 1.0 / (f * n_act as f64);

    for iter in 1..=s.max_iters {
        let pp = ProjectionParams::new(beta, s.eta);
        let (filtered, rho) = pipe.forward(&x, pp);
        let field = pipe.field(&rho);

        if stage == Stage::Coarse
            && (measure_nondiscreteness(&field) < s.bw_trigger || stage_iters >= s.coarse_max_iters)
        {
            dirs = if pinned {
                watch_dirs.clone()
            } else {
                vec![select_direction(&field, &watch_dirs, &kernel, s.tau_gray)?]
            };
            active_dets = detectors(dims, &kernel, &dirs, s.tau_gray);
            eps = active_dets
                .iter()
                .map(|d| {
                    let u = constraint_value(&rho, &d.unsupported(&rho, &pipe.passive));
                    s.eps_init.unwrap_or(u.max(s.eps_final))
                })
                .collect();
            eps_age = 0;
            stage = Stage::Gray;
            stage_iters = 0;
        }
        if stage == Stage::Gray && stage_iters >= s.gray_iters {
            active_dets = detectors(dims, &kernel, &dirs, s.tau_bw);
            stage = Stage::BlackWhite;
            stage_iters = 0;
            beta_age = 0;
        }

        let state = solver.solve(&field, spec.penalty)?;
        let c = state.compliance;
        let c_scale = 1.0 / *c0.get_or_insert(c.max(f64::MIN_POSITIVE));
        let dc = compliance_sensitivity(&field, spec.penalty, &state, &ke);
        let vol = field.volume_fraction();
        let m_nd = measure_nondiscreteness(&field);

        // self-supporting constraints on the frozen unsupported sets
        let constraints_on = constrained && stage != Stage::Coarse;
        let mut u_vals = Vec::new();
        let mut u_grads = Vec::new();
        let (u_log, count_log, eps_log) = if constraints_on {
            let mut union = Vec::new();
            for det in &active_dets {
                let list = det.unsupported(&rho, &pipe.passive);
                u_vals.push(constraint_value(&rho, &list));
                u_grads.push(constraint_sensitivity(&rho, &list));
                union.extend(list);
            }
            union.sort_unstable();
            union.dedup();
            let umax = u_vals.iter().fold(0.0f64, |a, &b| a.max(b));
            let emax = eps.iter().fold(0.0f64, |a, &b| a.max(b));
            (umax, union.len(), emax)
        } else {
            // best direction (auto) or union (pinned) at the final threshold
            let lists: Vec<Vec<usize>> =
                watch.iter().map(|d| d.unsupported(&rho, &pipe.passive)).collect();
            if pinned {
                let mut union: Vec<usize> = lists.iter().flatten().copied().collect();
                union.sort_unstable();
                union.dedup();
                let u = lists.iter().map(|l| constraint_value(&rho, l)).fold(0.0, f64::max);
                (u, union.len(), f64::INFINITY)
            } else {
                let best = lists
                    .iter()
                    .enumerate()
                    .min_by_key(|(i, l)| (l.len(), *i))
                    .map(|(_, l)| l)
                    .expect("at least one candidate");
                (constraint_value(&rho, best), best.len(), f64::INFINITY)
            }
        };
        let record = IterRecord {
            iter,
            compliance: c,
            volume_fraction: vol,
            u_value: u_log,
            unsupported: count_log,
            m_nd,
            eps: eps_log,
            beta,
        };
        history.records.push(record);
        observe(&record);

        // termination at full sharpness
        if stage == Stage::BlackWhite && beta >= s.beta_max {
            at_max += 1;
            let settled = last_change < s.change_tol && vol <= f + VOLUME_TOL;
            let done = if constrained {
                if count_log < best_count {
                    best_count = count_log;
                    since_best = 0;
                } else {
                    since_best += 1;
                }
                let eps_done = eps.iter().all(|&e| e <= s.eps_final);
                (eps_done && ((count_log == 0 && settled) || since_best >= s.strict_trigger))
                    || at_max >= s.final_iters
            } else {
                settled || at_max >= s.final_iters
            };
            if done {
                return finish(spec, &kernel, &mut solver, &pipe, rho, c, history, dirs, constrained, iter, beta, &eps, observe);
            }
        }

        // design update
        let g0: Vec<f64> = pipe.backward(&dc, &filtered, pp).iter().map(|g| g * c_scale).collect();
        let gv = pipe.backward(&vol_grad, &filtered, pp);
        let mut cons_grads = vec![gv];
        let mut cons_vals = vec![vol / f - 1.0];
        for ((u, g), e) in u_vals.iter().zip(&u_grads).zip(&eps) {
            cons_vals.push((u - e) * u_scale);
            cons_grads.push(pipe.backward(g, &filtered, pp).iter().map(|v| v * u_scale).collect());
        }
        let funcs: Vec<Func<'_>> = cons_vals
            .iter()
            .zip(&cons_grads)
            .map(|(&value, grad)| Func { value, grad })
            .collect();
        let mut xa: Vec<f64> = pipe.active.iter().map(|&e| x[e]).collect();
        let before = xa.clone();
        mma.step(&mut xa, Func { value: c * c_scale, grad: &g0 }, &funcs, &xmin, &xmax)?;
        last_change = xa.iter().zip(&before).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        for (&e, v) in pipe.active.iter().zip(xa) {
            x[e] = v;
        }

        stage_iters += 1;
        if constraints_on {
            eps_age += 1;
            if eps_age % s.eps_interval == 0 {
                for e in &mut eps {
                    *e = (*e * s.eps_decay).max(s.eps_final);
                }
            }
        }
        if stage == Stage::BlackWhite && beta < s.beta_max {
            beta_age += 1;
            if beta_age >= s.beta_interval || last_change < s.change_tol {
                beta = (beta * 2.0).min(s.beta_max);
                beta_age = 0;
                // the last step was taken at the old sharpness; the old
                // asymptotes no longer fit the sharper landscape either
                last_change = f64::INFINITY;
                mma.reset();
            }
        }
    }
    Err(Error::NotConverged { max_iters: s.max_iters, history: Box::new(history) })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    spec: &ProblemSpec,
    kernel: &OverhangKernel,
    solver: &mut FeSolver,
    pipe: &Pipeline,
    mut rho: Vec<f64>,
    c: f64,
    mut history: History,
    dirs: Vec<Direction>,
    constrained: bool,
    iter: usize,
    beta: f64,
    eps: &[f64],
    observe: &mut dyn FnMut(&IterRecord),
) -> Result<OptRun> {
    let s = &spec.schedule;
    let field = pipe.field(&rho);
    if !constrained {
        let directions = match &spec.directions {
            DirectionPolicy::Pinned(d) => d.clone(),
            DirectionPolicy::Auto(c) => vec![select_direction(&field, c, kernel, s.tau_bw)?],
        };
        let unsupported_count = unsupported_union(&field, &directions, kernel, s.tau_bw).len();
        return Ok(OptRun {
            history,
            field,
            directions,
            compliance: c,
            c_ref: None,
            unsupported_count,
            removed: 0,
        });
    }
    let solid = pipe.active.iter().filter(|&&e| rho[e] >= s.tau_bw).count();
    let removed = strict_removal(&mut rho, &pipe.passive, pipe.dims, kernel, &dirs, s.tau_bw);
    let bound = (s.removal_bound * solid as f64).floor() as usize;
    let field = pipe.field(&rho);
    let compliance = if removed > 0 { solver.solve(&field, spec.penalty)?.compliance } else { c };
    let unsupported_count = unsupported_union(&field, &dirs, kernel, s.tau_bw).len();
    let record = IterRecord {
        iter: iter + 1,
        compliance,
        volume_fraction: field.volume_fraction(),
        u_value: 0.0,
        unsupported: unsupported_count,
        m_nd: measure_nondiscreteness(&field),
        eps: eps.iter().fold(0.0f64, |a, &b| a.max(b)),
        beta,
    };
    history.records.push(record);
    observe(&record);
    if removed > bound {
        return Err(Error::RemovalBoundExceeded { removed, bound, history: Box::new(history) });
    }
    Ok(OptRun {
        history,
        field,
        directions: dirs,
        compliance,
        c_ref: None,
        unsupported_count,
        removed,
    })
}

/// Repeatedly sets unsupported elements (in any of `dirs`) to `RHO_MIN`
/// until none remain; returns how many were removed.
pub fn strict_removal(
    rho: &mut [f64],
    passive: &[bool],
    dims: GridDims,
    kernel: &OverhangKernel,
    dirs: &[Direction],
    tau: f64,
) -> usize {
    let dets = detectors(dims, kernel, dirs, tau);
    let mut removed = 0;
    loop {
        let mut union: Vec<usize> = dets.iter().flat_map(|d| d.unsupported(rho, passive)).collect();
        union.sort_unstable();
        union.dedup();
        if union.is_empty() {
            return removed;
        }
        for &e in &union {
            rho[e] = RHO_MIN;
        }
        removed += union.len();
    }
}
