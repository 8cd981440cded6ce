//! Deferred-correction (DeC) time integration with Gauss–Lobatto
//! subtimenodes and a lumped-mass explicit correction.

use serde::{Deserialize, Serialize};

use crate::basis1d::{gauss_legendre, lagrange_eval, lobatto_rule};
use crate::error::{param, Error, Result};
use crate::grid_ops::StateField;
use crate::schemes::{SchemeOps, Workspace};
use crate::wellprep::AnalyticField;

pub const MAX_SUBSTEPS: usize = 5;

/// Subtimenodes `β^m` on [0, 1] and integration weights
/// `θ^m_r = ∫_0^{β^m} ℓ_r(s) ds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecTableau {
    pub m: usize,
    pub beta: Vec<f64>,
    /// `theta[m][r]`, row 0 is zero.
    pub theta: Vec<Vec<f64>>,
}

pub fn dec_tableau(m: usize) -> Result<DecTableau> {
    if !(1..=MAX_SUBSTEPS).contains(&m) {
        return param(format!(
            "subtimesteps must lie in 1..={MAX_SUBSTEPS}, got {m}"
        ));
    }
    let beta = lobatto_rule(m)?.nodes;
    let (gx, gw) = gauss_legendre(m + 1);
    let theta = beta
        .iter()
        .map(|&b| {
            (0..=m)
                .map(|r| {
                    gx.iter()
                        .zip(&gw)
                        .map(|(x, w)| w * b * lagrange_eval(&beta, r, b * x))
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(DecTableau { m, beta, theta })
}

/// Time-integration parameters; `None` selects the defaults
/// `M = ceil((K+1)/2)`, `P = K+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecConfig {
    pub cfl: f64,
    pub subtimesteps: Option<usize>,
    pub iterations: Option<usize>,
}

impl Default for DecConfig {
    fn default() -> Self {
        Self {
            cfl: 0.1,
            subtimesteps: None,
            iterations: None,
        }
    }
}

impl DecConfig {
    pub fn resolve(&self, k: usize) -> (usize, usize) {
        (
            self.subtimesteps.unwrap_or((k + 2) / 2),
            self.iterations.unwrap_or(k + 1),
        )
    }

    /// `Δt = cfl · h / (2K + 1)` for unit wave speed.
    pub fn dt(&self, h: f64, k: usize) -> f64 {
        self.cfl * h / (2 * k + 1) as f64
    }
}

/// Reusable buffers for repeated DeC steps on one scheme.
#[derive(Debug, Clone)]
pub struct DecStepper<'a> {
    ops: &'a SchemeOps,
    tab: DecTableau,
    iterations: usize,
    prev: Vec<StateField>,
    next: Vec<StateField>,
    e_prev: Vec<StateField>,
    diff: StateField,
    res: StateField,
    ws: Workspace,
    /// Dirichlet values per subtimenode (only boundary entries are used).
    bnd: Vec<StateField>,
    coords: Vec<(f64, f64)>,
}

impl<'a> DecStepper<'a> {
    pub fn new(ops: &'a SchemeOps, subtimesteps: usize, iterations: usize) -> Result<Self> {
        if iterations == 0 {
            return param("DeC needs at least one iteration");
        }
        let tab = dec_tableau(subtimesteps)?;
        let z = ops.grid().zeros();
        let m = tab.m;
        Ok(Self {
            ops,
            tab,
            iterations,
            prev: vec![z.clone(); m + 1],
            next: vec![z.clone(); m + 1],
            e_prev: vec![z.clone(); m + 1],
            diff: z.clone(),
            bnd: vec![z.clone(); m + 1],
            res: z,
            ws: ops.workspace(),
            coords: boundary_coords(ops),
        })
    }

    pub fn tableau(&self) -> &DecTableau {
        &self.tab
    }

    /// Advance `q` by `dt` in place, holding the Dirichlet values of `q`.
    pub fn step(&mut self, q: &mut StateField, dt: f64) -> Result<()> {
        self.step_with(q, 0.0, dt, None)
    }

    /// Advance `q` from time `t` by `dt`. With `boundary`, Dirichlet nodes take
    /// its values at each subtimenode; otherwise they keep the values of `q`.
    pub fn step_with(
        &mut self,
        q: &mut StateField,
        t: f64,
        dt: f64,
        boundary: Option<&dyn AnalyticField>,
    ) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return param(format!("time step must be positive, got {dt}"));
        }
        let m = self.tab.m;
        let ops = self.ops;
        let n = q.n();
        for sub in 0..=m {
            let ts = t + self.tab.beta[sub] * dt;
            for (&i, &(x, y)) in ops.boundary_nodes().iter().zip(&self.coords) {
                let vals = match boundary {
                    Some(f) => f.eval_at(x, y, ts),
                    None => [q.data[i], q.data[n + i], q.data[2 * n + i]],
                };
                for (c, v) in vals.into_iter().enumerate() {
                    self.bnd[sub].data[c * n + i] = v;
                }
            }
        }
        ops.apply_e(q, &mut self.e_prev[0], &mut self.ws);
        for r in 0..=m {
            self.prev[r].data.copy_from_slice(&q.data);
            if r > 0 {
                let (head, tail) = self.e_prev.split_at_mut(r);
                tail[0].data.copy_from_slice(&head[0].data);
            }
        }
        let has_a = ops.has_a_su();
        for p in 1..=self.iterations {
            let last = p == self.iterations;
            let targets = if last { m..=m } else { 1..=m };
            for sub in targets {
                let theta = &self.tab.theta[sub];
                let res = &mut self.res;
                // A (q^{(p-1),m} - q^0): the lumped inverse cancels the mass part
                for (d, (a, b)) in self
                    .diff
                    .data
                    .iter_mut()
                    .zip(self.prev[sub].data.iter().zip(&q.data))
                {
                    *d = a - b;
                }
                res.data.iter_mut().for_each(|x| *x = 0.0);
                if has_a {
                    ops.apply_a_su(&self.diff, res, &mut self.ws);
                }
                for (r, th) in theta.iter().enumerate() {
                    res.axpy(dt * th, &self.e_prev[r]);
                }
                ops.apply_l_inv(res);
                let out = &mut self.next[sub];
                for (o, ((x, dd), rr)) in out.data.iter_mut().zip(
                    self.prev[sub]
                        .data
                        .iter()
                        .zip(&self.diff.data)
                        .zip(&res.data),
                ) {
                    *o = x - dd - rr;
                }
                ops.impose(out, &self.bnd[sub]);
            }
            if last {
                break;
            }
            for sub in 1..=m {
                std::mem::swap(&mut self.prev[sub], &mut self.next[sub]);
                ops.apply_e(&self.prev[sub], &mut self.e_prev[sub], &mut self.ws);
            }
        }
        q.data.copy_from_slice(&self.next[m].data);
        Ok(())
    }
}

fn boundary_coords(ops: &SchemeOps) -> Vec<(f64, f64)> {
    let g = ops.grid();
    let xs = g.x.coords();
    let ys = g.y.coords();
    let ny = ys.len();
    ops.boundary_nodes()
        .iter()
        .map(|&i| (xs[i / ny], ys[i % ny]))
        .collect()
}

/// Single DeC step returning a new state.
pub fn dec_step(
    ops: &SchemeOps,
    q: &StateField,
    dt: f64,
    m: usize,
    p: usize,
) -> Result<StateField> {
    let mut out = q.clone();
    DecStepper::new(ops, m, p)?.step(&mut out, dt)?;
    Ok(out)
}

/// Control returned by an [`evolve`] observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveStats {
    pub steps: usize,
    pub time: f64,
    pub dt: f64,
}

/// Advance `q` from `t = 0` to `t_final`, holding Dirichlet values. The
/// observer sees `(step, t, q)` at `t = 0`, every `cadence` steps and at the
/// final time.
pub fn evolve<F>(
    ops: &SchemeOps,
    q: &mut StateField,
    t_final: f64,
    cfg: &DecConfig,
    cadence: usize,
    observe: F,
) -> Result<EvolveStats>
where
    F: FnMut(usize, f64, &StateField) -> Flow,
{
    evolve_with(ops, q, t_final, cfg, None, cadence, observe)
}

/// [`evolve`] with optional time-dependent Dirichlet data.
pub fn evolve_with<F>(
    ops: &SchemeOps,
    q: &mut StateField,
    t_final: f64,
    cfg: &DecConfig,
    boundary: Option<&dyn AnalyticField>,
    cadence: usize,
    mut observe: F,
) -> Result<EvolveStats>
where
    F: FnMut(usize, f64, &StateField) -> Flow,
{
    if !(cfg.cfl > 0.0 && cfg.cfl.is_finite()) {
        return param(format!("cfl must be positive, got {}", cfg.cfl));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return param(format!("final time must be >= 0, got {t_final}"));
    }
    let k = ops.grid().degree();
    let (m, p) = cfg.resolve(k);
    let dt = cfg.dt(ops.grid().h(), k);
    let mut stepper = DecStepper::new(ops, m, p)?;
    let cadence = cadence.max(1);
    let mut t = 0.0;
    let mut steps = 0;
    if observe(0, 0.0, q) == Flow::Stop || t_final == 0.0 {
        return Ok(EvolveStats { steps, time: t, dt });
    }
    let tol = 1e-12 * t_final.max(1.0);
    while t_final - t > tol {
        let h = dt.min(t_final - t);
        stepper.step_with(q, t, h, boundary)?;
        steps += 1;
        t = if t_final - t - h <= tol {
            t_final
        } else {
            t + h
        };
        if !q.is_finite() {
            return Err(Error::Instability {
                step: steps,
                time: t,
            });
        }
        let done = t >= t_final;
        if (steps % cadence == 0 || done) && observe(steps, t, q) == Flow::Stop {
            break;
        }
    }
    Ok(EvolveStats { steps, time: t, dt })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_and_midpoint_weights() {
        let t1 = dec_tableau(1).unwrap();
        assert!((t1.theta[1][0] - 0.5).abs() < 1e-15 && (t1.theta[1][1] - 0.5).abs() < 1e-15);
        let t2 = dec_tableau(2).unwrap();
        let want = [5.0 / 24.0, 1.0 / 3.0, -1.0 / 24.0];
        for (a, b) in t2.theta[1].iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn full_row_sums_to_one() {
        for m in 1..=MAX_SUBSTEPS {
            let t = dec_tableau(m).unwrap();
            assert!((t.theta[m].iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert_eq!(*t.beta.last().unwrap(), 1.0);
            assert!(t.theta[0].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn range_checked() {
        assert!(dec_tableau(0).is_err());
        assert!(dec_tableau(6).is_err());
    }

    #[test]
    fn default_substeps() {
        let c = DecConfig::default();
        assert_eq!(c.resolve(1), (1, 2));
        assert_eq!(c.resolve(2), (2, 3));
        assert_eq!(c.resolve(3), (2, 4));
        assert_eq!(c.resolve(4), (3, 5));
    }
}
