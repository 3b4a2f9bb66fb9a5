use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Staging and continuation controls of an optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    /// Starting bound on `U`; `None` uses `U` measured when constraints
    /// switch on.
    pub eps_init: Option<f64>,
    pub eps_final: f64,
    pub eps_decay: f64,
    /// Iterations between two `eps_decay` reductions.
    pub eps_interval: usize,
    /// `M_nd` below which the unconstrained coarse run stops.
    pub bw_trigger: f64,
    /// Iterations without a new minimum of the unsupported count after which
    /// the remaining unsupported elements are removed.
    pub strict_trigger: usize,
    pub max_iters: usize,
    /// Largest design change treated as converged.
    pub change_tol: f64,
    /// Detection threshold while the design is still gray.
    pub tau_gray: f64,
    /// Detection threshold once projection is sharpened, and for the final
    /// feasibility check.
    pub tau_bw: f64,
    /// Constrained iterations at the initial sharpness before continuation.
    pub gray_iters: usize,
    /// Cap on the unconstrained coarse run.
    pub coarse_max_iters: usize,
    pub beta_init: f64,
    pub beta_max: f64,
    /// Iterations at one sharpness before it is doubled.
    pub beta_interval: usize,
    /// Cap on iterations at `beta_max`.
    pub final_iters: usize,
    /// Projection threshold.
    pub eta: f64,
    /// Largest fraction of solid elements strict removal may delete before
    /// the run is declared failed.
    pub removal_bound: f64,
    /// Amplitude of seeded uniform noise added to the initial design.
    pub init_noise: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            eps_init: None,
            eps_final: 1e-3,
            eps_decay: 0.7,
            eps_interval: 5,
            bw_trigger: 0.36,
            strict_trigger: 15,
            max_iters: 1000,
            change_tol: 0.01,
            tau_gray: 0.1,
            tau_bw: 0.5,
            gray_iters: 0,
            coarse_max_iters: 150,
            beta_init: 1.0,
            beta_max: 64.0,
            beta_interval: 50,
            final_iters: 100,
            eta: 0.5,
            removal_bound: 0.005,
            init_noise: 0.0,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::Validation { field: format!("schedule.{field}"), reason: reason.into() })
        };
        if !(self.eps_final > 0.0) {
            return bad("eps_final", "must be positive");
        }
        if let Some(e) = self.eps_init {
            if !(e >= self.eps_final) {
                return bad("eps_init", "must be at least eps_final");
            }
        }
        if !(self.eps_decay > 0.0 && self.eps_decay < 1.0) {
            return bad("eps_decay", "must lie in (0, 1)");
        }
        if self.eps_interval == 0 {
            return bad("eps_interval", "must be >= 1");
        }
        if !(self.bw_trigger > 0.0 && self.bw_trigger < 1.0) {
            return bad("bw_trigger", "must lie in (0, 1)");
        }
        for (name, t) in [("tau_gray", self.tau_gray), ("tau_bw", self.tau_bw)] {
            if !(t > 0.0 && t < 1.0) {
                return bad(name, "must lie in (0, 1)");
            }
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be >= 1");
        }
        if !(self.change_tol > 0.0) {
            return bad("change_tol", "must be positive");
        }
        if !(self.beta_init > 0.0 && self.beta_max >= self.beta_init) {
            return bad("beta_max", "need 0 < beta_init <= beta_max");
        }
        if self.beta_interval == 0 || self.strict_trigger == 0 || self.final_iters == 0 {
            return bad("beta_interval", "iteration counts must be >= 1");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta", "must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.removal_bound) {
            return bad("removal_bound", "must lie in [0, 1)");
        }
        if !(0.0..0.5).contains(&self.init_noise) {
            return bad("init_noise", "must lie in [0, 0.5)");
        }
        Ok(())
    }
}
