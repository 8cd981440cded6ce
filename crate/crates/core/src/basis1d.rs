//! Gauss–Lobatto rules on the reference element [0, 1], nodal Lagrange bases
//! and the per-element operator blocks everything else is assembled from.
//!
//! Scaling: mass, derivative and stiffness blocks are divided by the cell
//! size so that, e.g., the Q1 mass stencil is `[0, 1, 0]`. The integrator
//! table keeps physical units (it is a plain integral).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

pub const MAX_DEGREE: usize = 8;

/// Legendre polynomial P_n and its derivative at x in [-1, 1].
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // endpoint formula P_n'(±1) = (±1)^{n-1} n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobattoRule {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Lobatto rule with K+1 points on [0, 1].
pub fn lobatto_rule(k: usize) -> Result<LobattoRule> {
    if !(1..=MAX_DEGREE).contains(&k) {
        return param(format!("lobatto degree {k} outside 1..={MAX_DEGREE}"));
    }
    let mut x: Vec<f64> = (0..=k)
        .map(|j| -(std::f64::consts::PI * j as f64 / k as f64).cos())
        .collect();
    x[0] = -1.0;
    x[k] = 1.0;
    let kf = k as f64;
    for xj in x.iter_mut().take(k).skip(1) {
        // Newton on P_K'(x) = 0, with P_K'' from the Legendre ODE.
        for _ in 0..100 {
            let (p, dp) = legendre(k, *xj);
            let ddp = (2.0 * *xj * dp - kf * (kf + 1.0) * p) / (1.0 - *xj * *xj);
            let step = dp / ddp;
            *xj -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
    }
    // symmetrize to kill round-off asymmetry
    for j in 0..=k / 2 {
        let a = 0.5 * (x[k - j] - x[j]);
        x[j] = -a;
        x[k - j] = a;
    }
    if k % 2 == 0 {
        x[k / 2] = 0.0;
    }
    let weights = x
        .iter()
        .map(|&xi| {
            let (p, _) = legendre(k, xi);
            1.0 / (kf * (kf + 1.0) * p * p)
        })
        .collect();
    let nodes = x.iter().map(|&xi| 0.5 * (xi + 1.0)).collect();
    Ok(LobattoRule {
        degree: k,
        nodes,
        weights,
    })
}

/// Gauss–Legendre rule with n points on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one point");
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

impl LobattoRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// φ_p(x) for the Lagrange basis on the rule's nodes.
    pub fn lagrange_eval(&self, p: usize, x: f64) -> f64 {
        lagrange_eval(&self.nodes, p, x)
    }

    /// φ_p'(x) on the reference element.
    pub fn lagrange_deriv(&self, p: usize, x: f64) -> f64 {
        lagrange_deriv(&self.nodes, p, x)
    }

    /// Reference differentiation matrix: `g[r][p] = φ_p'(x̂_r)`.
    pub fn diff_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |r, p| self.lagrange_deriv(p, self.nodes[r]))
    }
}

pub fn lagrange_eval(nodes: &[f64], p: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(q, _)| q != p)
        .map(|(_, &xq)| (x - xq) / (nodes[p] - xq))
        .product()
}

pub fn lagrange_deriv(nodes: &[f64], p: usize, x: f64) -> f64 {
    let n = nodes.len();
    let mut sum = 0.0;
    for m in 0..n {
        if m == p {
            continue;
        }
        let mut term = 1.0 / (nodes[p] - nodes[m]);
        for q in 0..n {
            if q != p && q != m {
                term *= (x - nodes[q]) / (nodes[p] - nodes[q]);
            }
        }
        sum += term;
    }
    sum
}

/// Per-element blocks on a cell of width `dx`.
#[derive(Debug, Clone)]
pub struct LocalBlocks {
    pub degree: usize,
    pub dx: f64,
    /// Diagonal of the collocated mass, `w_p`.
    pub mass: Vec<f64>,
    /// `∫ φ_s φ_p' / Δx`.
    pub d: DMatrix<f64>,
    /// `∫ φ_s' φ_p / Δx`, the derivative moved to the test function.
    pub dx_test: DMatrix<f64>,
    /// `∫ φ_s' φ_p' / Δx`.
    pub dxx: DMatrix<f64>,
    /// Rows s = 1..K of `∫_0^{x_s} φ_p` (physical units).
    pub integ: DMatrix<f64>,
}

pub fn local_blocks(rule: &LobattoRule, dx: f64) -> Result<LocalBlocks> {
    if !(dx > 0.0 && dx.is_finite()) {
        return param(format!("cell size must be positive, got {dx}"));
    }
    let k = rule.degree;
    let n = k + 1;
    let w = &rule.weights;
    let g = rule.diff_matrix();
    let d = DMatrix::from_fn(n, n, |s, p| w[s] * g[(s, p)] / dx);
    let dx_test = d.transpose();
    let dxx = DMatrix::from_fn(n, n, |s, p| {
        (0..n).map(|r| w[r] * g[(r, s)] * g[(r, p)]).sum::<f64>() / (dx * dx)
    });
    let (gx, gw) = gauss_legendre(n);
    let integ = DMatrix::from_fn(k, n, |s1, p| {
        let b = rule.nodes[s1 + 1];
        let acc: f64 = gx
            .iter()
            .zip(&gw)
            .map(|(&t, &wt)| wt * rule.lagrange_eval(p, b * t))
            .sum();
        dx * b * acc
    });
    Ok(LocalBlocks {
        degree: k,
        dx,
        mass: w.clone(),
        d,
        dx_test,
        dxx,
        integ,
    })
}

impl LocalBlocks {
    /// Integrator padded with the (zero) row of the starting node, so that it
    /// maps the K+1 local values to K+1 local primitives.
    pub fn integ_full(&self) -> DMatrix<f64> {
        let n = self.degree + 1;
        DMatrix::from_fn(
            n,
            n,
            |s, p| if s == 0 { 0.0 } else { self.integ[(s - 1, p)] },
        )
    }

    /// Integrator anchored at the right end of the cell:
    /// `Ĩ_{s,p} = -∫_{x_s}^{x_K} φ_p`.
    pub fn integ_reversed_full(&self) -> DMatrix<f64> {
        let n = self.degree + 1;
        let total = self.integ.row(self.degree - 1).clone_owned();
        DMatrix::from_fn(n, n, |s, p| {
            let partial = if s == 0 { 0.0 } else { self.integ[(s - 1, p)] };
            partial - total[p]
        })
    }
}
