//! Cartesian grids, global 1D operators and their lazy tensor products.

mod field;
mod operator;
mod tensor;

pub use field::StateField;
pub use operator::{assemble_1d, compose, OpKind, Operator1D};
pub use tensor::{dense_assemble_tensor, kron, TensorOp, DENSE_GUARD};

use serde::{Deserialize, Serialize};

use crate::basis1d::{lobatto_rule, local_blocks, LobattoRule, LocalBlocks};
use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    X,
    Y,
}

/// One coordinate direction of a tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Line1D {
    pub cells: usize,
    pub degree: usize,
    pub origin: f64,
    pub length: f64,
    pub bc: Bc,
}

impl Line1D {
    pub fn new(cells: usize, degree: usize, origin: f64, length: f64, bc: Bc) -> Result<Self> {
        if cells == 0 {
            return param("a line needs at least one cell");
        }
        if length.is_nan() || length <= 0.0 {
            return param(format!("domain length must be positive, got {length}"));
        }
        lobatto_rule(degree)?;
        Ok(Self {
            cells,
            degree,
            origin,
            length,
            bc,
        })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Number of stored nodal values (periodic lines drop the duplicate end node).
    pub fn n_nodes(&self) -> usize {
        match self.bc {
            Bc::Periodic => self.cells * self.degree,
            Bc::Dirichlet => self.cells * self.degree + 1,
        }
    }

    /// Global index of local node `p` in cell `i`.
    pub fn node(&self, i: usize, p: usize) -> usize {
        let g = i * self.degree + p;
        match self.bc {
            Bc::Periodic => g % (self.cells * self.degree),
            Bc::Dirichlet => g,
        }
    }

    pub fn rule(&self) -> LobattoRule {
        lobatto_rule(self.degree).expect("degree validated at construction")
    }

    pub fn blocks(&self) -> LocalBlocks {
        local_blocks(&self.rule(), self.dx()).expect("cell size validated at construction")
    }

    /// Node coordinates in storage order.
    pub fn coords(&self) -> Vec<f64> {
        let rule = self.rule();
        let dx = self.dx();
        (0..self.n_nodes())
            .map(|a| {
                let (i, p) = (a / self.degree, a % self.degree);
                self.origin + (i as f64 + rule.nodes[p]) * dx
            })
            .collect()
    }

    /// Diagonal of the assembled (normalized) mass.
    pub fn mass_diag(&self) -> Vec<f64> {
        let rule = self.rule();
        let mut m = vec![0.0; self.n_nodes()];
        for i in 0..self.cells {
            for p in 0..=self.degree {
                m[self.node(i, p)] += rule.weights[p];
            }
        }
        m
    }

    pub fn is_boundary(&self, a: usize) -> bool {
        self.bc == Bc::Dirichlet && (a == 0 || a + 1 == self.n_nodes())
    }
}

/// Tensor grid on a rectangle; nodal arrays are stored x-major
/// (`data[a * ny + b]` for x-node `a`, y-node `b`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub x: Line1D,
    pub y: Line1D,
}

impl Grid2D {
    /// Grid on the unit square.
    pub fn unit(nx: usize, ny: usize, degree: usize, bc: Bc) -> Result<Self> {
        Self::new(nx, ny, degree, [0.0, 1.0], [0.0, 1.0], bc)
    }

    pub fn new(
        nx: usize,
        ny: usize,
        degree: usize,
        xr: [f64; 2],
        yr: [f64; 2],
        bc: Bc,
    ) -> Result<Self> {
        Ok(Self {
            x: Line1D::new(nx, degree, xr[0], xr[1] - xr[0], bc)?,
            y: Line1D::new(ny, degree, yr[0], yr[1] - yr[0], bc)?,
        })
    }

    pub fn degree(&self) -> usize {
        self.x.degree
    }

    pub fn bc(&self) -> Bc {
        self.x.bc
    }

    pub fn dx(&self) -> f64 {
        self.x.dx()
    }

    pub fn dy(&self) -> f64 {
        self.y.dx()
    }

    pub fn h(&self) -> f64 {
        self.dx().min(self.dy())
    }

    pub fn line(&self, dir: Direction) -> &Line1D {
        match dir {
            Direction::X => &self.x,
            Direction::Y => &self.y,
        }
    }

    pub fn nx(&self) -> usize {
        self.x.n_nodes()
    }

    pub fn ny(&self) -> usize {
        self.y.n_nodes()
    }

    pub fn n_nodes(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn zeros(&self) -> StateField {
        StateField::zeros(self.nx(), self.ny())
    }

    /// Quadrature weights of the collocated 2D mass in physical units.
    pub fn quad_weights(&self) -> Vec<f64> {
        let mx = self.x.mass_diag();
        let my = self.y.mass_diag();
        let area = self.dx() * self.dy();
        let mut w = Vec::with_capacity(self.n_nodes());
        for &a in &mx {
            for &b in &my {
                w.push(area * a * b);
            }
        }
        w
    }

    /// Boundary node indices (empty for periodic grids).
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let (nx, ny) = (self.nx(), self.ny());
        let mut out = Vec::new();
        for a in 0..nx {
            for b in 0..ny {
                if self.x.is_boundary(a) || self.y.is_boundary(b) {
                    out.push(a * ny + b);
                }
            }
        }
        out
    }
}
