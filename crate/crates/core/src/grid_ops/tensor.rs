use nalgebra::DMatrix;

use super::Operator1D;
use crate::error::{Error, Result};

/// Largest dense oracle the library agrees to build.
pub const DENSE_GUARD: usize = 20_000;

/// Lazy `Ax ⊗ By` acting on x-major nodal arrays.
#[derive(Debug, Clone)]
pub struct TensorOp {
    pub ax: Operator1D,
    pub by: Operator1D,
}

impl TensorOp {
    pub fn new(ax: Operator1D, by: Operator1D) -> Self {
        Self { ax, by }
    }

    pub fn len(&self) -> usize {
        self.ax.n() * self.by.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `out = (Ax ⊗ By) f`, `By` along the columns first, then `Ax` along rows.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        let mut tmp = vec![0.0; self.len()];
        self.apply_with(f, out, &mut tmp)
    }

    pub fn apply_with(&self, f: &[f64], out: &mut [f64], tmp: &mut [f64]) -> Result<()> {
        let n = self.len();
        for len in [f.len(), out.len(), tmp.len()] {
            if len != n {
                return Err(Error::Shape {
                    expected: n,
                    got: len,
                });
            }
        }
        self.by.apply_inner(f, tmp);
        out.iter_mut().for_each(|o| *o = 0.0);
        self.ax.apply_outer_acc(tmp, out, self.by.n(), 1.0);
        Ok(())
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        dense_assemble_tensor(&self.ax, &self.by)
    }
}

/// Dense Kronecker product with the x factor outermost.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn dense_assemble_tensor(ax: &Operator1D, by: &Operator1D) -> Result<DMatrix<f64>> {
    let n = ax.n() * by.n();
    if n > DENSE_GUARD {
        return Err(Error::SizeGuard {
            size: n,
            limit: DENSE_GUARD,
        });
    }
    Ok(kron(&ax.to_dense(), &by.to_dense()))
}
