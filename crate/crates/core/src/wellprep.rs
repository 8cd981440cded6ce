//! Discretely divergence-free initial data: nodal sampling, line-by-line
//! quadrature projection and the minimum-distance projection onto the kernel
//! of the GFq divergence.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis1d::gauss_legendre;
use crate::error::{Error, Result};
use crate::grid_ops::{kron, Bc, Grid2D, Line1D, StateField};
use crate::schemes::Op1;

/// Closed-form `(u, v, p)` field, possibly time dependent.
pub trait AnalyticField: Sync {
    fn eval_at(&self, x: f64, y: f64, t: f64) -> [f64; 3];

    fn eval(&self, x: f64, y: f64) -> [f64; 3] {
        self.eval_at(x, y, 0.0)
    }

    /// `∂_x u + ∂_y v = 0` holds analytically.
    fn solenoidal(&self) -> bool {
        false
    }
}

/// Pointwise evaluation at every node, time `t`.
pub fn sample_nodal(f: &dyn AnalyticField, grid: &Grid2D, t: f64) -> StateField {
    let xs = grid.x.coords();
    let ys = grid.y.coords();
    let mut q = grid.zeros();
    let n = q.n();
    for (a, &x) in xs.iter().enumerate() {
        for (b, &y) in ys.iter().enumerate() {
            let [u, v, p] = f.eval_at(x, y, t);
            let i = a * ys.len() + b;
            q.data[i] = u;
            q.data[n + i] = v;
            q.data[2 * n + i] = p;
        }
    }
    q
}

/// Condition number above which a local marching system is rejected.
pub const LOCAL_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LlrrOptions {
    /// March from the top/right boundary with integrals anchored at the
    /// upper end of each element.
    pub reversed: bool,
}

/// Panels per sub-interval in the composite right-hand-side quadrature.
pub const QUAD_PANELS: usize = 4;

/// Integrals `∫_{x_{s-1}}^{x_s} g` over the sub-intervals of one element,
/// composite Gauss–Legendre on [`QUAD_PANELS`] panels each.
fn subinterval_integrals(
    g: &dyn Fn(f64) -> f64,
    x0: f64,
    dx: f64,
    nodes: &[f64],
    gl: &(Vec<f64>, Vec<f64>),
) -> Vec<f64> {
    nodes
        .windows(2)
        .map(|w| {
            let (a, b) = (x0 + w[0] * dx, x0 + w[1] * dx);
            let h = (b - a) / QUAD_PANELS as f64;
            (0..QUAD_PANELS)
                .map(|j| {
                    let lo = a + j as f64 * h;
                    gl.0.iter()
                        .zip(&gl.1)
                        .map(|(t, wt)| wt * g(lo + h * t))
                        .sum::<f64>()
                        * h
                })
                .sum()
        })
        .collect()
}

/// Marches one line: values at all nodes such that the integrals between
/// each node and the element's anchor node match those of `g`.
struct LineMarcher {
    line: Line1D,
    /// Interior columns (1..=K) of the forward integrator, LU-factored,
    /// or columns 0..K of the reversed one.
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    integ: DMatrix<f64>,
    reversed: bool,
    gl: (Vec<f64>, Vec<f64>),
}

impl LineMarcher {
    fn new(line: &Line1D, reversed: bool) -> Result<Self> {
        let k = line.degree;
        let blocks = line.blocks();
        let integ = if reversed {
            blocks.integ_reversed_full()
        } else {
            blocks.integ_full()
        };
        // rows s = 1..K (forward) or s = 0..K-1 (reversed); the anchored column is known
        let (rows, cols) = if reversed { (0, 0) } else { (1, 1) };
        let local = integ.view((rows, cols), (k, k)).into_owned();
        let sv = local.clone().singular_values();
        let cond = sv.max() / sv.min();
        if cond.is_nan() || cond >= LOCAL_COND_LIMIT {
            return Err(Error::Numerical(format!(
                "local integration system is singular (condition {cond:.3e}) on every element of the line"
            )));
        }
        Ok(Self {
            line: line.clone(),
            lu: local.lu(),
            integ,
            reversed,
            gl: gauss_legendre((k + 3).max(12)),
        })
    }

    fn march(&self, g: &dyn Fn(f64) -> f64, out: &mut [f64]) -> Result<()> {
        let k = self.line.degree;
        let dx = self.line.dx();
        let nodes = self.line.rule().nodes;
        let cells = self.line.cells;
        let coords = self.line.coords();
        if self.reversed {
            let last = self.line.n_nodes() - 1;
            out[last] = g(coords[last]);
        } else {
            out[0] = g(coords[0]);
        }
        let order: Vec<usize> = if self.reversed {
            (0..cells).rev().collect()
        } else {
            (0..cells).collect()
        };
        for i in order {
            let x0 = self.line.origin + i as f64 * dx;
            let pieces = subinterval_integrals(g, x0, dx, &nodes, &self.gl);
            let mut rhs = DVector::zeros(k);
            if self.reversed {
                // Ĩ_{s,·} q = −∫_{x_s}^{x_K} g, s = 0..K-1
                for s in 0..k {
                    rhs[s] = -pieces[s..].iter().sum::<f64>();
                    rhs[s] -= self.integ[(s, k)] * out[self.line.node(i, k)];
                }
            } else {
                let mut acc = 0.0;
                for s in 1..=k {
                    acc += pieces[s - 1];
                    rhs[s - 1] = acc - self.integ[(s, 0)] * out[self.line.node(i, 0)];
                }
            }
            let sol = self.lu.solve(&rhs).ok_or_else(|| {
                Error::Numerical(format!("local projection system singular in element {i}"))
            })?;
            for j in 0..k {
                let p = if self.reversed { j } else { j + 1 };
                out[self.line.node(i, p)] = sol[j];
            }
        }
        Ok(())
    }
}

/// Line-by-line quadrature projection: `u` marched along every vertical
/// line, `v` along every horizontal line, `p` sampled.
pub fn llrr_project(f: &dyn AnalyticField, grid: &Grid2D) -> Result<StateField> {
    llrr_project_with(f, grid, LlrrOptions::default())
}

pub fn llrr_project_with(
    f: &dyn AnalyticField,
    grid: &Grid2D,
    opts: LlrrOptions,
) -> Result<StateField> {
    if grid.bc() != Bc::Dirichlet {
        return Err(Error::Unsupported(
            "line-by-line projection starts from a physical boundary".into(),
        ));
    }
    let mut q = sample_nodal(f, grid, 0.0);
    let n = q.n();
    let (nx, ny) = (grid.nx(), grid.ny());
    let xs = grid.x.coords();
    let ys = grid.y.coords();
    let my = LineMarcher::new(&grid.y, opts.reversed)?;
    let mx = LineMarcher::new(&grid.x, opts.reversed)?;
    let mut col = vec![0.0; ny];
    for (a, &x) in xs.iter().enumerate() {
        my.march(&|y| f.eval(x, y)[0], &mut col)?;
        q.data[a * ny..(a + 1) * ny].copy_from_slice(&col);
    }
    let mut row = vec![0.0; nx];
    for (b, &y) in ys.iter().enumerate() {
        mx.march(&|x| f.eval(x, y)[1], &mut row)?;
        for (a, &r) in row.iter().enumerate() {
            q.data[n + a * ny + b] = r;
        }
    }
    Ok(q)
}

/// Dense solve up to this many constraint rows; CG on the normal equations beyond.
pub const DENSE_PROJECTION_ROWS: usize = 1200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptOptions {
    /// Relative constraint residual accepted after the solve.
    pub tol: f64,
    pub max_iter: usize,
    /// Force the iterative path regardless of size.
    pub iterative: bool,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 20_000,
            iterative: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptReport {
    pub dense: bool,
    pub iterations: usize,
    /// `‖C(u, v)‖_∞` after projection.
    pub residual: f64,
    /// Scale the residual is compared against.
    pub scale: f64,
}

/// The GFq divergence constraint `C(u, v) = (D ⊗ DI) u + (DI ⊗ D) v` with all rows.
struct Constraint {
    cu: crate::grid_ops::TensorOp,
    cv: crate::grid_ops::TensorOp,
}

impl Constraint {
    fn new(grid: &Grid2D) -> Result<Self> {
        Ok(Self {
            cu: crate::grid_ops::TensorOp::new(Op1::D.build(&grid.x)?, Op1::DI.build(&grid.y)?),
            cv: crate::grid_ops::TensorOp::new(Op1::DI.build(&grid.x)?, Op1::D.build(&grid.y)?),
        })
    }

    fn n(&self) -> usize {
        self.cu.len()
    }

    fn apply(&self, uv: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let n = self.n();
        let mut t2 = vec![0.0; n];
        self.cu.apply_with(&uv[..n], out, tmp).expect("sizes match");
        self.cv
            .apply_with(&uv[n..], &mut t2, tmp)
            .expect("sizes match");
        for (o, t) in out.iter_mut().zip(&t2) {
            *o += t;
        }
    }

    fn transpose(&self) -> Self {
        Self {
            cu: crate::grid_ops::TensorOp::new(self.cu.ax.transpose(), self.cu.by.transpose()),
            cv: crate::grid_ops::TensorOp::new(self.cv.ax.transpose(), self.cv.by.transpose()),
        }
    }

    /// `out = Cᵀ y` given the transposed constraint.
    fn apply_t(&self, y: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let n = self.n();
        self.cu
            .apply_with(y, &mut out[..n], tmp)
            .expect("sizes match");
        self.cv
            .apply_with(y, &mut out[n..], tmp)
            .expect("sizes match");
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, 2 * n);
        m.view_mut((0, 0), (n, n))
            .copy_from(&kron(&self.cu.ax.to_dense(), &self.cu.by.to_dense()));
        m.view_mut((0, n), (n, n))
            .copy_from(&kron(&self.cv.ax.to_dense(), &self.cv.by.to_dense()));
        m
    }

    fn row_scale(&self) -> f64 {
        let a = |op: &crate::grid_ops::TensorOp| {
            let r = |o: &crate::grid_ops::Operator1D| {
                (0..o.n())
                    .map(|i| o.row(i).map(|(_, v)| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            };
            r(&op.ax) * r(&op.by)
        };
        a(&self.cu) + a(&self.cv)
    }
}

/// `argmin ‖(u, v) − (u_e, v_e)‖²` subject to `C(u, v) = 0`; `p` sampled.
pub fn opt_project(
    f: &dyn AnalyticField,
    grid: &Grid2D,
    opts: &OptOptions,
) -> Result<(StateField, OptReport)> {
    let q0 = sample_nodal(f, grid, 0.0);
    opt_project_state(&q0, grid, opts)
}

/// Projection of an already sampled state (velocity only).
pub fn opt_project_state(
    q0: &StateField,
    grid: &Grid2D,
    opts: &OptOptions,
) -> Result<(StateField, OptReport)> {
    let c = Constraint::new(grid)?;
    let n = c.n();
    let x0: Vec<f64> = q0.data[..2 * n].to_vec();
    let data_scale = x0
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let scale = c.row_scale() * data_scale;
    let mut tmp = vec![0.0; n];
    let (x, dense, iterations) = if n <= DENSE_PROJECTION_ROWS && !opts.iterative {
        let ct = c.dense().transpose();
        let svd = ct.svd(true, false);
        let u = svd.u.expect("left vectors requested");
        let smax = svd.singular_values.max();
        let xv = DVector::from_column_slice(&x0);
        let mut x = xv.clone();
        for (j, &s) in svd.singular_values.iter().enumerate() {
            if s > 1e-12 * smax {
                let col = u.column(j);
                x -= col * col.dot(&xv);
            }
        }
        (x.as_slice().to_vec(), true, 0)
    } else {
        let (x, it) = cg_project(&c, &x0, opts, 1e-3 * opts.tol * scale)?;
        (x, false, it)
    };
    let mut cx = vec![0.0; n];
    c.apply(&x, &mut cx, &mut tmp);
    let residual = cx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual.is_nan() || residual > opts.tol * scale {
        return Err(Error::Convergence(format!(
            "constraint residual {residual:.3e} exceeds {:.3e}",
            opts.tol * scale
        )));
    }
    let mut q = q0.clone();
    q.data[..2 * n].copy_from_slice(&x);
    Ok((
        q,
        OptReport {
            dense,
            iterations,
            residual,
            scale,
        },
    ))
}

/// Jacobi-preconditioned CG on `C Cᵀ y = C x0` (consistent, semidefinite),
/// then `x = x0 − Cᵀ y`.
/// CG on `C Cᵀ y = C x0`. The residual of the normal system is the constraint
/// residual `C x` of the current iterate, so it stops once `‖C x‖_∞ ≤ target`.
fn cg_project(
    c: &Constraint,
    x0: &[f64],
    opts: &OptOptions,
    target: f64,
) -> Result<(Vec<f64>, usize)> {
    let n = c.n();
    let ct = c.transpose();
    let mut tmp = vec![0.0; n];
    let mut wide = vec![0.0; 2 * n];
    // diagonal of C Cᵀ: squared row norms
    let diag = {
        let rows = |op: &crate::grid_ops::TensorOp| {
            let r = |o: &crate::grid_ops::Operator1D| {
                (0..o.n())
                    .map(|i| o.row(i).map(|(_, v)| v * v).sum::<f64>())
                    .collect::<Vec<_>>()
            };
            let (a, b) = (r(&op.ax), r(&op.by));
            a.iter()
                .flat_map(|x| b.iter().map(move |y| x * y))
                .collect::<Vec<_>>()
        };
        let (a, b) = (rows(&c.cu), rows(&c.cv));
        a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<f64>>()
    };
    let normal = |y: &[f64], out: &mut [f64], wide: &mut [f64], tmp: &mut [f64]| {
        ct.apply_t(y, wide, tmp);
        c.apply(wide, out, tmp);
    };
    let mut b = vec![0.0; n];
    c.apply(x0, &mut b, &mut tmp);
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut y = vec![0.0; n];
    let mut iterations = 0;
    if bmax > target {
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        loop {
            if iterations >= opts.max_iter {
                return Err(Error::Convergence(format!(
                    "projection CG did not converge in {} iterations",
                    opts.max_iter
                )));
            }
            iterations += 1;
            normal(&p, &mut ap, &mut wide, &mut tmp);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                y[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if r.iter().all(|v| v.abs() <= target) {
                break;
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    ct.apply_t(&y, &mut wide, &mut tmp);
    let x = x0.iter().zip(&wide).map(|(a, b)| a - b).collect();
    Ok((x, iterations))
}
