//! Method of Moving Asymptotes (Svanberg 1987) with the primal-dual
//! interior-point subproblem solver, for problems of the form
//!
//! ```text
//! min f0(x) + a0 z + sum(c_i y_i + d_i y_i^2 / 2)
//! s.t. f_i(x) - a_i z - y_i <= 0,  xmin <= x <= xmax,  y, z >= 0
//! ```
//!
//! with `a0 = 1`, `a_i = 0`, `c_i = 1000`, `d_i = 1`, which makes `y_i`
//! penalized slack for constraints that cannot be met.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmaParams {
    /// Largest change of any variable per step (absolute).
    pub move_limit: f64,
    pub asymptote_init: f64,
    pub asymptote_incr: f64,
    pub asymptote_decr: f64,
    /// Final barrier parameter of the subproblem solver.
    pub tolerance: f64,
    pub albefa: f64,
    pub raa0: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for MmaParams {
    fn default() -> Self {
        Self {
            move_limit: 0.2,
            asymptote_init: 0.5,
            asymptote_incr: 1.2,
            asymptote_decr: 0.7,
            tolerance: 1e-7,
            albefa: 0.1,
            raa0: 1e-5,
            c: 1000.0,
            d: 1.0,
        }
    }
}

impl MmaParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidParameter(s.to_string()));
        if !(self.move_limit > 0.0 && self.move_limit < 1.0) {
            return bad("MMA move limit must lie in (0, 1)");
        }
        if !(self.asymptote_incr > 1.0
            && self.asymptote_decr > 0.0
            && self.asymptote_decr < 1.0
            && self.asymptote_init > 0.0)
        {
            return bad("MMA asymptote factors must satisfy incr > 1 > decr > 0 and init > 0");
        }
        if !(self.tolerance > 0.0) {
            return bad("MMA subproblem tolerance must be positive");
        }
        Ok(())
    }
}

/// Iteration state carried between MMA steps.
#[derive(Debug, Clone)]
pub struct Mma {
    params: MmaParams,
    iter: usize,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
    low: Vec<f64>,
    upp: Vec<f64>,
}

/// Objective or constraint value with its gradient.
#[derive(Debug, Clone, Copy)]
pub struct Func<'a> {
    pub value: f64,
    pub grad: &'a [f64],
}

impl Mma {
    pub fn new(n: usize, params: MmaParams) -> Self {
        Self {
            params,
            iter: 0,
            xold1: vec![0.0; n],
            xold2: vec![0.0; n],
            low: vec![0.0; n],
            upp: vec![0.0; n],
        }
    }

    pub fn params(&self) -> &MmaParams {
        &self.params
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    /// Forgets asymptote history, e.g. after the problem changes shape.
    pub fn reset(&mut self) {
        self.iter = 0;
    }

    /// Updates `x` in place. `constraints` are `f_i(x) <= 0`; at least one is
    /// required.
    pub fn step(
        &mut self,
        x: &mut [f64],
        objective: Func<'_>,
        constraints: &[Func<'_>],
        xmin: &[f64],
        xmax: &[f64],
    ) -> Result<()> {
        let n = x.len();
        let m = constraints.len();
        if m == 0 {
            return Err(Error::InvalidParameter("MMA needs at least one constraint".into()));
        }
        let mut lens = vec![objective.grad.len(), xmin.len(), xmax.len(), self.low.len()];
        lens.extend(constraints.iter().map(|c| c.grad.len()));
        if let Some(&bad) = lens.iter().find(|&&l| l != n) {
            return Err(Error::LengthMismatch { expected: n, got: bad });
        }
        let p = self.params;
        self.iter += 1;

        // asymptotes
        for j in 0..n {
            let range = xmax[j] - xmin[j];
            if self.iter <= 2 {
                self.low[j] = x[j] - p.asymptote_init * range;
                self.upp[j] = x[j] + p.asymptote_init * range;
            } else {
                let sign = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let f = if sign > 0.0 {
                    p.asymptote_incr
                } else if sign < 0.0 {
                    p.asymptote_decr
                } else {
                    1.0
                };
                let lo = x[j] - f * (self.xold1[j] - self.low[j]);
                let up = x[j] + f * (self.upp[j] - self.xold1[j]);
                self.low[j] = lo.max(x[j] - 10.0 * range).min(x[j] - 0.01 * range);
                self.upp[j] = up.min(x[j] + 10.0 * range).max(x[j] + 0.01 * range);
            }
        }

        // move limits and the separable approximation
        let mut alfa = vec![0.0; n];
        let mut beta = vec![0.0; n];
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut pm = vec![0.0; m * n];
        let mut qm = vec![0.0; m * n];
        let mut b = vec![0.0; m];
        for j in 0..n {
            let range = (xmax[j] - xmin[j]).max(1e-5);
            alfa[j] = (self.low[j] + p.albefa * (x[j] - self.low[j]))
                .max(x[j] - p.move_limit)
                .max(xmin[j]);
            beta[j] = (self.upp[j] - p.albefa * (self.upp[j] - x[j]))
                .min(x[j] + p.move_limit)
                .min(xmax[j]);
            let ux2 = (self.upp[j] - x[j]).powi(2);
            let xl2 = (x[j] - self.low[j]).powi(2);
            let g = objective.grad[j];
            let (pp, qq) = (g.max(0.0), (-g).max(0.0));
            let pq = 0.001 * (pp + qq) + p.raa0 / range;
            p0[j] = (pp + pq) * ux2;
            q0[j] = (qq + pq) * xl2;
            for (i, c) in constraints.iter().enumerate() {
                let g = c.grad[j];
                let (pp, qq) = (g.max(0.0), (-g).max(0.0));
                let pq = 0.001 * (pp + qq) + p.raa0 / range;
                pm[i * n + j] = (pp + pq) * ux2;
                qm[i * n + j] = (qq + pq) * xl2;
                b[i] += pm[i * n + j] / (self.upp[j] - x[j]) + qm[i * n + j] / (x[j] - self.low[j]);
            }
        }
        for (bi, c) in b.iter_mut().zip(constraints) {
            *bi -= c.value;
        }

        let sub = Subproblem {
            n,
            m,
            low: &self.low,
            upp: &self.upp,
            alfa: &alfa,
            beta: &beta,
            p0: &p0,
            q0: &q0,
            p: &pm,
            q: &qm,
            b: &b,
            c: p.c,
            d: p.d,
        };
        let xnew = sub.solve(p.tolerance)?;
        self.xold2.copy_from_slice(&self.xold1);
        self.xold1.copy_from_slice(x);
        x.copy_from_slice(&xnew);
        Ok(())
    }
}

struct Subproblem<'a> {
    n: usize,
    m: usize,
    low: &'a [f64],
    upp: &'a [f64],
    alfa: &'a [f64],
    beta: &'a [f64],
    p0: &'a [f64],
    q0: &'a [f64],
    p: &'a [f64],
    q: &'a [f64],
    b: &'a [f64],
    c: f64,
    d: f64,
}

/// Primal and dual variables of the subproblem.
#[derive(Clone)]
struct Point {
    x: Vec<f64>,
    y: Vec<f64>,
    z: f64,
    lam: Vec<f64>,
    xsi: Vec<f64>,
    eta: Vec<f64>,
    mu: Vec<f64>,
    zet: f64,
    s: Vec<f64>,
}

impl Point {
    fn axpy(&self, t: f64, d: &Point) -> Point {
        let f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u + t * v).collect();
        Point {
            x: f(&self.x, &d.x),
            y: f(&self.y, &d.y),
            z: self.z + t * d.z,
            lam: f(&self.lam, &d.lam),
            xsi: f(&self.xsi, &d.xsi),
            eta: f(&self.eta, &d.eta),
            mu: f(&self.mu, &d.mu),
            zet: self.zet + t * d.zet,
            s: f(&self.s, &d.s),
        }
    }
}

impl Subproblem<'_> {
    fn plam_qlam(&self, lam: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        let mut plam = self.p0.to_vec();
        let mut qlam = self.q0.to_vec();
        for i in 0..m {
            let (pr, qr) = (&self.p[i * n..(i + 1) * n], &self.q[i * n..(i + 1) * n]);
            for j in 0..n {
                plam[j] += pr[j] * lam[i];
                qlam[j] += qr[j] * lam[i];
            }
        }
        (plam, qlam)
    }

    fn gvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..self.m)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        self.p[i * n + j] / (self.upp[j] - x[j])
                            + self.q[i * n + j] / (x[j] - self.low[j])
                    })
                    .sum()
            })
            .collect()
    }

    /// KKT residual vector (flattened) of the perturbed optimality system.
    fn residual(&self, pt: &Point, epsi: f64) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let (plam, qlam) = self.plam_qlam(&pt.lam);
        let gvec = self.gvec(&pt.x);
        let mut r = Vec::with_capacity(3 * n + 4 * m + 2);
        for j in 0..n {
            let ux2 = (self.upp[j] - pt.x[j]).powi(2);
            let xl2 = (pt.x[j] - self.low[j]).powi(2);
            r.push(plam[j] / ux2 - qlam[j] / xl2 - pt.xsi[j] + pt.eta[j]);
        }
        for i in 0..m {
            r.push(self.c + self.d * pt.y[i] - pt.mu[i] - pt.lam[i]);
        }
        r.push(1.0 - pt.zet);
        for i in 0..m {
            r.push(gvec[i] - pt.y[i] + pt.s[i] - self.b[i]);
        }
        for j in 0..n {
            r.push(pt.xsi[j] * (pt.x[j] - self.alfa[j]) - epsi);
        }
        for j in 0..n {
            r.push(pt.eta[j] * (self.beta[j] - pt.x[j]) - epsi);
        }
        for i in 0..m {
            r.push(pt.mu[i] * pt.y[i] - epsi);
        }
        r.push(pt.zet * pt.z - epsi);
        for i in 0..m {
            r.push(pt.lam[i] * pt.s[i] - epsi);
        }
        r
    }

    fn solve(&self, epsimin: f64) -> Result<Vec<f64>> {
        let (n, m) = (self.n, self.m);
        let mut pt = Point {
            x: (0..n).map(|j| 0.5 * (self.alfa[j] + self.beta[j])).collect(),
            y: vec![1.0; m],
            z: 1.0,
            lam: vec![1.0; m],
            xsi: vec![0.0; n],
            eta: vec![0.0; n],
            mu: vec![(0.5 * self.c).max(1.0); m],
            zet: 1.0,
            s: vec![1.0; m],
        };
        for j in 0..n {
            pt.xsi[j] = (1.0 / (pt.x[j] - self.alfa[j])).max(1.0);
            pt.eta[j] = (1.0 / (self.beta[j] - pt.x[j])).max(1.0);
        }
        let mut epsi = 1.0;
        let mut last_max = 0.0;
        while epsi > epsimin {
            let res = self.residual(&pt, epsi);
            let mut resnorm = norm(&res);
            let mut resmax = max_abs(&res);
            let mut inner = 0;
            while resmax > 0.9 * epsi && inner < 200 {
                inner += 1;
                let dir = self.newton_direction(&pt, epsi)?;
                // fraction to the boundary
                let mut stm: f64 = 1.0;
                let ratio = |v: &[f64], dv: &[f64], stm: &mut f64| {
                    for (a, da) in v.iter().zip(dv) {
                        *stm = stm.max(-1.01 * da / a);
                    }
                };
                ratio(&pt.y, &dir.y, &mut stm);
                ratio(&[pt.z], &[dir.z], &mut stm);
                ratio(&pt.lam, &dir.lam, &mut stm);
                ratio(&pt.xsi, &dir.xsi, &mut stm);
                ratio(&pt.eta, &dir.eta, &mut stm);
                ratio(&pt.mu, &dir.mu, &mut stm);
                ratio(&[pt.zet], &[dir.zet], &mut stm);
                ratio(&pt.s, &dir.s, &mut stm);
                for j in 0..n {
                    stm = stm.max(-1.01 * dir.x[j] / (pt.x[j] - self.alfa[j]));
                    stm = stm.max(1.01 * dir.x[j] / (self.beta[j] - pt.x[j]));
                }
                let mut step = 1.0 / stm;
                // backtracking on the residual norm
                let mut tries = 0;
                loop {
                    tries += 1;
                    let cand = pt.axpy(step, &dir);
                    let r = self.residual(&cand, epsi);
                    let rn = norm(&r);
                    if rn <= resnorm || tries >= 50 {
                        pt = cand;
                        resnorm = rn;
                        resmax = max_abs(&r);
                        break;
                    }
                    step *= 0.5;
                }
            }
            last_max = resmax;
            if !resnorm.is_finite() {
                return Err(Error::SubproblemDiverged { residual: resnorm });
            }
            epsi *= 0.1;
        }
        if !(last_max <= 1e-3) {
            return Err(Error::SubproblemDiverged { residual: last_max });
        }
        Ok(pt.x)
    }

    fn newton_direction(&self, pt: &Point, epsi: f64) -> Result<Point> {
        let (n, m) = (self.n, self.m);
        let (plam, qlam) = self.plam_qlam(&pt.lam);
        let gvec = self.gvec(&pt.x);
        let mut delx = vec![0.0; n];
        let mut diagx = vec![0.0; n];
        // GG[i][j] = p_ij / ux^2 - q_ij / xl^2
        let mut gg = vec![0.0; m * n];
        for j in 0..n {
            let ux1 = self.upp[j] - pt.x[j];
            let xl1 = pt.x[j] - self.low[j];
            let (ux2, xl2) = (ux1 * ux1, xl1 * xl1);
            let dpsidx = plam[j] / ux2 - qlam[j] / xl2;
            let xa = pt.x[j] - self.alfa[j];
            let bx = self.beta[j] - pt.x[j];
            delx[j] = dpsidx - epsi / xa + epsi / bx;
            diagx[j] =
                2.0 * (plam[j] / (ux2 * ux1) + qlam[j] / (xl2 * xl1)) + pt.xsi[j] / xa + pt.eta[j] / bx;
            for i in 0..m {
                gg[i * n + j] = self.p[i * n + j] / ux2 - self.q[i * n + j] / xl2;
            }
        }
        let dely: Vec<f64> =
            (0..m).map(|i| self.c + self.d * pt.y[i] - pt.lam[i] - epsi / pt.y[i]).collect();
        let delz = 1.0 - epsi / pt.z;
        let dellam: Vec<f64> =
            (0..m).map(|i| gvec[i] - pt.y[i] - self.b[i] + epsi / pt.lam[i]).collect();
        let diagy: Vec<f64> = (0..m).map(|i| self.d + pt.mu[i] / pt.y[i]).collect();
        let diaglamyi: Vec<f64> = (0..m).map(|i| pt.s[i] / pt.lam[i] + 1.0 / diagy[i]).collect();

        let (dx, dlam, dz);
        if m < n {
            // reduced system in (lambda, z); a_i = 0 decouples z
            let mut a = DMatrix::<f64>::zeros(m, m);
            let mut rhs = DVector::<f64>::zeros(m);
            for i in 0..m {
                a[(i, i)] = diaglamyi[i];
                let mut s = 0.0;
                for j in 0..n {
                    s += gg[i * n + j] * delx[j] / diagx[j];
                }
                rhs[i] = dellam[i] + dely[i] / diagy[i] - s;
                for k in 0..=i {
                    let mut v = 0.0;
                    for j in 0..n {
                        v += gg[i * n + j] * gg[k * n + j] / diagx[j];
                    }
                    a[(i, k)] += v;
                    if k != i {
                        a[(k, i)] += v;
                    }
                }
            }
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or(Error::SubproblemDiverged { residual: f64::NAN })?;
            dlam = sol.as_slice().to_vec();
            dz = -delz * pt.z / pt.zet;
            dx = (0..n)
                .map(|j| {
                    let s: f64 = (0..m).map(|i| gg[i * n + j] * dlam[i]).sum();
                    -(delx[j] + s) / diagx[j]
                })
                .collect::<Vec<f64>>();
        } else {
            let dellamyi: Vec<f64> = (0..m).map(|i| dellam[i] + dely[i] / diagy[i]).collect();
            let mut a = DMatrix::<f64>::zeros(n, n);
            let mut rhs = DVector::<f64>::zeros(n);
            for j in 0..n {
                a[(j, j)] = diagx[j];
                let mut s = 0.0;
                for i in 0..m {
                    s += gg[i * n + j] * dellamyi[i] / diaglamyi[i];
                }
                rhs[j] = -(delx[j] + s);
                for k in 0..n {
                    let mut v = 0.0;
                    for i in 0..m {
                        v += gg[i * n + j] * gg[i * n + k] / diaglamyi[i];
                    }
                    a[(j, k)] += v;
                }
            }
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or(Error::SubproblemDiverged { residual: f64::NAN })?;
            dx = sol.as_slice().to_vec();
            dz = -delz * pt.z / pt.zet;
            dlam = (0..m)
                .map(|i| {
                    let s: f64 = (0..n).map(|j| gg[i * n + j] * dx[j]).sum();
                    (s + dellamyi[i]) / diaglamyi[i]
                })
                .collect();
        }
        let dy: Vec<f64> = (0..m).map(|i| (-dely[i] + dlam[i]) / diagy[i]).collect();
        let dxsi: Vec<f64> = (0..n)
            .map(|j| {
                let xa = pt.x[j] - self.alfa[j];
                -pt.xsi[j] + epsi / xa - pt.xsi[j] * dx[j] / xa
            })
            .collect();
        let deta: Vec<f64> = (0..n)
            .map(|j| {
                let bx = self.beta[j] - pt.x[j];
                -pt.eta[j] + epsi / bx + pt.eta[j] * dx[j] / bx
            })
            .collect();
        let dmu: Vec<f64> =
            (0..m).map(|i| -pt.mu[i] + epsi / pt.y[i] - pt.mu[i] * dy[i] / pt.y[i]).collect();
        let dzet = -pt.zet + epsi / pt.z - pt.zet * dz / pt.z;
        let ds: Vec<f64> =
            (0..m).map(|i| -pt.s[i] + epsi / pt.lam[i] - pt.s[i] * dlam[i] / pt.lam[i]).collect();
        Ok(Point { x: dx, y: dy, z: dz, lam: dlam, xsi: dxsi, eta: deta, mu: dmu, zet: dzet, s: ds })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}
