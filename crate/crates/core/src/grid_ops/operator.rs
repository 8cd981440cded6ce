use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Bc, Direction, Grid2D, Line1D};
use crate::error::{param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Identity,
    Mass,
    Lumped,
    /// `∫ φ_α ∂φ_β`
    D,
    /// `∫ ∂φ_α φ_β`
    DX,
    /// `∫ ∂φ_α ∂φ_β`
    DXX,
    /// Local primitive, rows owned by the cell on the left of each node.
    I,
    Composed,
}

/// Square sparse operator on the nodes of one grid line.
///
/// Stored as compressed rows; the line carries the boundary treatment, and
/// `k_max` bounds how many cells away a row may reach.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator1D {
    pub kind: OpKind,
    pub line: Line1D,
    pub k_max: usize,
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

pub fn assemble_1d(kind: OpKind, grid: &Grid2D, dir: Direction) -> Result<Operator1D> {
    Operator1D::assemble(kind, grid.line(dir))
}

/// Global composition `A ∘ B` (apply `B` first).
pub fn compose(a: &Operator1D, b: &Operator1D) -> Result<Operator1D> {
    a.check_compatible(b)?;
    let mut rows = vec![BTreeMap::new(); a.n];
    for (r, row) in rows.iter_mut().enumerate() {
        for (c, va) in a.row(r) {
            for (c2, vb) in b.row(c) {
                *row.entry(c2).or_insert(0.0) += va * vb;
            }
        }
    }
    Ok(Operator1D::from_rows(
        OpKind::Composed,
        a.line.clone(),
        a.k_max + b.k_max,
        rows,
    ))
}

impl Operator1D {
    pub fn assemble(kind: OpKind, line: &Line1D) -> Result<Self> {
        let b = line.blocks();
        let k = line.degree;
        match kind {
            OpKind::Identity => Ok(Self::diagonal(kind, line, vec![1.0; line.n_nodes()])),
            OpKind::Mass | OpKind::Lumped => Ok(Self::diagonal(kind, line, line.mass_diag())),
            OpKind::D => Ok(Self::from_local(kind, line, &b.d)),
            OpKind::DX => Ok(Self::from_local(kind, line, &b.dx_test)),
            OpKind::DXX => Ok(Self::from_local(kind, line, &b.dxx)),
            OpKind::I => {
                let mut rows = vec![BTreeMap::new(); line.n_nodes()];
                for i in 0..line.cells {
                    for s in 1..=k {
                        let r = line.node(i, s);
                        for p in 0..=k {
                            *rows[r].entry(line.node(i, p)).or_insert(0.0) += b.integ[(s - 1, p)];
                        }
                    }
                }
                Ok(Self::from_rows(kind, line.clone(), 1, rows))
            }
            OpKind::Composed => param("composed operators are built with compose()"),
        }
    }

    /// Element-by-element product `outer^E · I^E`, assembled. This is how the
    /// integrated operators `D I`, `D^x_x I` are realized: the per-cell
    /// starting constants of the local primitives are annihilated inside each
    /// element before assembly.
    pub fn gfq_product(outer: OpKind, line: &Line1D, reversed: bool) -> Result<Self> {
        let b = line.blocks();
        let inner = if reversed {
            b.integ_reversed_full()
        } else {
            b.integ_full()
        };
        let local = match outer {
            OpKind::D => &b.d * inner,
            OpKind::DX => &b.dx_test * inner,
            OpKind::DXX => &b.dxx * inner,
            other => return param(format!("no integrated form for {other:?}")),
        };
        Ok(Self::from_local(OpKind::Composed, line, &local))
    }

    /// `Z = D^x_x − D^x M^{-1} D`.
    pub fn z_operator(line: &Line1D) -> Result<Self> {
        let s = Self::assemble(OpKind::DXX, line)?;
        let dxm = compose(
            &Self::assemble(OpKind::DX, line)?,
            &Self::assemble(OpKind::Mass, line)?.diagonal_inverse()?,
        )?;
        let p = compose(&dxm, &Self::assemble(OpKind::D, line)?)?;
        s.add(&p, 1.0, -1.0)
    }

    /// Integrated `Z`: `(D^x_x I) − D^x M^{-1} (D I)`.
    pub fn z_integrated(line: &Line1D) -> Result<Self> {
        let si = Self::gfq_product(OpKind::DXX, line, false)?;
        let dxm = compose(
            &Self::assemble(OpKind::DX, line)?,
            &Self::assemble(OpKind::Mass, line)?.diagonal_inverse()?,
        )?;
        let p = compose(&dxm, &Self::gfq_product(OpKind::D, line, false)?)?;
        si.add(&p, 1.0, -1.0)
    }

    fn diagonal(kind: OpKind, line: &Line1D, d: Vec<f64>) -> Self {
        let n = d.len();
        Self {
            kind,
            line: line.clone(),
            k_max: 0,
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: d,
        }
    }

    /// Assemble a (K+1)×(K+1) element block over all cells.
    pub fn from_local(kind: OpKind, line: &Line1D, block: &DMatrix<f64>) -> Self {
        let k = line.degree;
        let mut rows = vec![BTreeMap::new(); line.n_nodes()];
        for i in 0..line.cells {
            for s in 0..=k {
                let r = line.node(i, s);
                for p in 0..=k {
                    *rows[r].entry(line.node(i, p)).or_insert(0.0) += block[(s, p)];
                }
            }
        }
        Self::from_rows(kind, line.clone(), 1, rows)
    }

    fn from_rows(
        kind: OpKind,
        line: Line1D,
        k_max: usize,
        rows: Vec<BTreeMap<usize, f64>>,
    ) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            kind,
            line,
            k_max,
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(kind: OpKind, line: &Line1D, k_max: usize, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != line.n_nodes() || m.ncols() != line.n_nodes() {
            return Err(Error::Shape {
                expected: line.n_nodes(),
                got: m.nrows(),
            });
        }
        let rows = (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| (c, m[(r, c)])).collect())
            .collect();
        Ok(Self::from_rows(kind, line.clone(), k_max, rows))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.line.degree
    }

    pub fn bc(&self) -> Bc {
        self.line.bc
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b]
            .iter()
            .copied()
            .zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    fn check_compatible(&self, other: &Operator1D) -> Result<()> {
        if self.line.degree != other.line.degree {
            return param(format!(
                "degree mismatch: {} vs {}",
                self.line.degree, other.line.degree
            ));
        }
        if self.line != other.line {
            return param("operators live on different lines");
        }
        Ok(())
    }

    /// `ca * self + cb * other`
    pub fn add(&self, other: &Operator1D, ca: f64, cb: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut rows = vec![BTreeMap::new(); self.n];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                *row.entry(c).or_insert(0.0) += ca * v;
            }
            for (c, v) in other.row(r) {
                *row.entry(c).or_insert(0.0) += cb * v;
            }
        }
        Ok(Self::from_rows(
            OpKind::Composed,
            self.line.clone(),
            self.k_max.max(other.k_max),
            rows,
        ))
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![BTreeMap::new(); self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                rows[c].insert(r, v);
            }
        }
        Self::from_rows(OpKind::Composed, self.line.clone(), self.k_max, rows)
    }

    pub fn diagonal_inverse(&self) -> Result<Self> {
        let mut d = Vec::with_capacity(self.n);
        for r in 0..self.n {
            let mut diag = 0.0;
            for (c, v) in self.row(r) {
                if c != r {
                    return Err(Error::Unsupported(
                        "inverse of a non-diagonal operator".into(),
                    ));
                }
                diag = v;
            }
            if diag == 0.0 {
                return Err(Error::Numerical(format!("zero diagonal entry in row {r}")));
            }
            d.push(1.0 / diag);
        }
        Ok(Self::diagonal(OpKind::Composed, &self.line, d))
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Act on the inner (contiguous) index of an `nouter × n` array.
    pub fn apply_inner(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (fa, oa) in f.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for (r, o) in oa.iter_mut().enumerate() {
                let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
                let mut acc = 0.0;
                for j in s..e {
                    acc += self.vals[j] * fa[self.cols[j]];
                }
                *o = acc;
            }
        }
    }

    /// `out += coef * (A ⊗ 1) f` on an `n × ninner` array.
    pub fn apply_outer_acc(&self, f: &[f64], out: &mut [f64], ninner: usize, coef: f64) {
        for (r, orow) in out.chunks_exact_mut(ninner).enumerate().take(self.n) {
            for j in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = coef * self.vals[j];
                let frow = &f[self.cols[j] * ninner..(self.cols[j] + 1) * ninner];
                for (o, x) in orow.iter_mut().zip(frow) {
                    *o += v * x;
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Identity on the same line.
    pub fn identity_like(&self) -> Self {
        Self::diagonal(OpKind::Identity, &self.line, vec![1.0; self.n])
    }
}
