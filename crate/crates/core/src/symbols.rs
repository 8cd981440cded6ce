//! Characteristic polynomials (Fourier symbols) of periodic block operators,
//! scheme symbols on the torus, involution checks and the 1D kernel audit.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector};

use crate::basis1d::{lagrange_deriv, lagrange_eval, lobatto_rule};
use crate::error::{Error, Result};
use crate::grid_ops::{Bc, Line1D, OpKind, Operator1D};
use crate::schemes::{build_scheme, Op1, SchemeConfig, SchemeKind, Term};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Relative singular-value threshold for kernel dimensions.
pub const KERNEL_TOL: f64 = 1e-10;

/// K×K matrix-valued Laurent polynomial `Σ_k α_k t^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentBlockPoly {
    pub k: usize,
    pub coeffs: BTreeMap<i64, DMatrix<f64>>,
}

impl LaurentBlockPoly {
    pub fn k_max(&self) -> usize {
        self.coeffs
            .keys()
            .map(|k| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, t: C64) -> CMatrix {
        let mut out = CMatrix::zeros(self.k, self.k);
        for (&e, a) in &self.coeffs {
            let tp = t.powi(e as i32);
            out += a.map(|x| C64::new(x, 0.0)) * tp;
        }
        out
    }

    /// Product of Laurent polynomials (matrix product of coefficients).
    pub fn mul(&self, other: &LaurentBlockPoly) -> LaurentBlockPoly {
        let mut coeffs: BTreeMap<i64, DMatrix<f64>> = BTreeMap::new();
        for (&ea, a) in &self.coeffs {
            for (&eb, b) in &other.coeffs {
                let e = coeffs
                    .entry(ea + eb)
                    .or_insert_with(|| DMatrix::zeros(self.k, self.k));
                *e += a * b;
            }
        }
        LaurentBlockPoly { k: self.k, coeffs }
    }
}

/// Symbol of a periodic operator: `F_{s,p} = Σ_k α^s_{k,p} t^k`, with the
/// K unique degrees of freedom per cell taken as local nodes 0..K−1.
pub fn extract_symbol(op: &Operator1D) -> Result<LaurentBlockPoly> {
    if op.bc() != Bc::Periodic {
        return Err(Error::Unsupported(
            "symbols exist only for periodic operators".into(),
        ));
    }
    let k = op.degree();
    let cells = op.line.cells;
    if cells < 2 * op.k_max + 1 {
        return Err(Error::Parameter(format!(
            "{cells} cells cannot resolve a stencil of half-width {}",
            op.k_max
        )));
    }
    let mut coeffs: BTreeMap<i64, DMatrix<f64>> = BTreeMap::new();
    for s in 0..k {
        for (c, v) in op.row(s) {
            let cell = (c / k) as i64;
            let p = c % k;
            let shift = if cell > cells as i64 / 2 {
                cell - cells as i64
            } else {
                cell
            };
            coeffs.entry(shift).or_insert_with(|| DMatrix::zeros(k, k))[(s, p)] += v;
        }
    }
    Ok(LaurentBlockPoly { k, coeffs })
}

pub fn ckron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// 3×3 block symbol of a scheme's `E` (or `A`).
#[derive(Debug, Clone)]
pub struct SymbolMatrix2D {
    pub k: usize,
    terms: Vec<(Term, LaurentBlockPoly, LaurentBlockPoly)>,
    sx: BTreeMap<Op1, LaurentBlockPoly>,
    sy: BTreeMap<Op1, LaurentBlockPoly>,
}

impl SymbolMatrix2D {
    pub fn from_terms(
        k: usize,
        terms: &[Term],
        sym_x: impl Fn(Op1) -> Result<LaurentBlockPoly>,
        sym_y: impl Fn(Op1) -> Result<LaurentBlockPoly>,
    ) -> Result<Self> {
        let mut sx = BTreeMap::new();
        let mut sy = BTreeMap::new();
        let mut out = Vec::new();
        for t in terms {
            if let Entry::Vacant(e) = sx.entry(t.x) {
                e.insert(sym_x(t.x)?);
            }
            if let Entry::Vacant(e) = sy.entry(t.y) {
                e.insert(sym_y(t.y)?);
            }
            out.push((*t, sx[&t.x].clone(), sy[&t.y].clone()));
        }
        Ok(Self {
            k,
            terms: out,
            sx,
            sy,
        })
    }

    pub fn dim(&self) -> usize {
        3 * self.k * self.k
    }

    pub fn eval(&self, tx: C64, ty: C64) -> CMatrix {
        let kk = self.k * self.k;
        let mut out = CMatrix::zeros(3 * kk, 3 * kk);
        let mut cache_x: BTreeMap<Op1, CMatrix> = BTreeMap::new();
        let mut cache_y: BTreeMap<Op1, CMatrix> = BTreeMap::new();
        for (op, p) in &self.sx {
            cache_x.insert(*op, p.eval(tx));
        }
        for (op, p) in &self.sy {
            cache_y.insert(*op, p.eval(ty));
        }
        for (t, _, _) in &self.terms {
            let block = ckron(&cache_x[&t.x], &cache_y[&t.y]) * C64::new(t.coef, 0.0);
            let mut view = out.view_mut((t.row * kk, t.col * kk), (kk, kk));
            view += block;
        }
        out
    }
}

/// Symbols of all 1D blocks of a periodic scheme.
#[derive(Debug, Clone)]
pub struct SchemeSymbols {
    pub cfg: SchemeConfig,
    pub e: SymbolMatrix2D,
    pub a_su: SymbolMatrix2D,
    x: Line1D,
    y: Line1D,
}

pub fn scheme_symbol(cfg: &SchemeConfig) -> Result<SchemeSymbols> {
    if cfg.grid.bc() != Bc::Periodic {
        return Err(Error::Unsupported(
            "scheme symbols need a periodic grid".into(),
        ));
    }
    let ops = build_scheme(cfg.clone())?;
    let k = cfg.grid.degree();
    // symbols do not depend on the number of cells; use enough to avoid aliasing
    let x = widen(&cfg.grid.x);
    let y = widen(&cfg.grid.y);
    let sym = |line: &Line1D| {
        let line = line.clone();
        move |op: Op1| extract_symbol(&op.build(&line)?)
    };
    let e = SymbolMatrix2D::from_terms(k, ops.e_terms(), sym(&x), sym(&y))?;
    let a_su = SymbolMatrix2D::from_terms(k, ops.a_terms(), sym(&x), sym(&y))?;
    Ok(SchemeSymbols {
        cfg: cfg.clone(),
        e,
        a_su,
        x,
        y,
    })
}

fn widen(line: &Line1D) -> Line1D {
    let cells = line.cells.max(9);
    Line1D::new(
        cells,
        line.degree,
        0.0,
        line.dx() * cells as f64,
        Bc::Periodic,
    )
    .expect("valid periodic line")
}

impl SchemeSymbols {
    pub fn k(&self) -> usize {
        self.cfg.grid.degree()
    }

    pub fn ah(&self) -> f64 {
        self.cfg.alpha * self.cfg.grid.h()
    }

    pub fn sym_x(&self, op: Op1) -> Result<LaurentBlockPoly> {
        extract_symbol(&op.build(&self.x)?)
    }

    pub fn sym_y(&self, op: Op1) -> Result<LaurentBlockPoly> {
        extract_symbol(&op.build(&self.y)?)
    }

    /// Symbol of the local primitive, `F(D)^{-1} F(D I)` — the integrator
    /// seen through the element-local products (not defined at t = 1).
    pub fn integrator_x(&self, t: C64) -> Result<CMatrix> {
        effective_integrator(&self.x, t)
    }

    pub fn integrator_y(&self, t: C64) -> Result<CMatrix> {
        effective_integrator(&self.y, t)
    }

    /// Reduced GFq matrix `Ê` acting on `(U + V, p)`: 3K² × 2K².
    pub fn reduced(&self, tx: C64, ty: C64) -> Result<CMatrix> {
        let kind = self.cfg.kind;
        let stab = match kind {
            SchemeKind::SupgGfq => Op1::S,
            SchemeKind::OssGfq => Op1::Z,
            _ => {
                return Err(Error::Unsupported(
                    "reduced matrix only for GFq schemes".into(),
                ))
            }
        };
        let ah = C64::new(self.ah(), 0.0);
        let ex = |op: Op1| self.sym_x(op).map(|p| p.eval(tx));
        let ey = |op: Op1| self.sym_y(op).map(|p| p.eval(ty));
        let (dx, mx, zx) = (ex(Op1::D)?, ex(Op1::M)?, ex(stab)?);
        let (dy, my, zy) = (ey(Op1::D)?, ey(Op1::M)?, ey(stab)?);
        let kk = self.k() * self.k();
        let mut out = CMatrix::zeros(3 * kk, 2 * kk);
        let blocks = [
            (0, 0, ckron(&zx, &dy) * ah),
            (0, 1, ckron(&dx, &my)),
            (1, 0, ckron(&dx, &zy) * ah),
            (1, 1, ckron(&mx, &dy)),
            (2, 0, ckron(&dx, &dy)),
            (2, 1, (ckron(&zx, &my) + ckron(&mx, &zy)) * ah),
        ];
        for (r, c, b) in blocks {
            out.view_mut((r * kk, c * kk), (kk, kk)).copy_from(&b);
        }
        Ok(out)
    }
}

fn effective_integrator(line: &Line1D, t: C64) -> Result<CMatrix> {
    let d = extract_symbol(&Operator1D::assemble(OpKind::D, line)?)?.eval(t);
    let di = extract_symbol(&Operator1D::gfq_product(OpKind::D, line, false)?)?.eval(t);
    d.lu()
        .solve(&di)
        .ok_or_else(|| Error::Numerical("derivative symbol is singular at this mode".into()))
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Number of singular values below `tol * reference`.
pub fn kernel_dim(sv: &[f64], reference: f64, tol: f64) -> usize {
    sv.iter().filter(|&&s| s < tol * reference).count()
}

/// Hadamard bound `Π_i ‖row_i‖`, the natural scale for `|det|`.
pub fn det_scale(m: &CMatrix) -> f64 {
    m.row_iter().map(|r| r.norm()).product()
}

pub fn unit(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeKernel {
    pub a: usize,
    pub b: usize,
    pub dim: usize,
    pub sigma_max: f64,
    /// Smallest singular value kept out of the kernel over the largest one
    /// counted in it (infinite when the kernel is trivial or everything is kernel).
    pub gap: f64,
}

/// Kernel dimension of the symbol at every mode of an `nx × ny` periodic grid.
/// The threshold is relative to the largest singular value over the whole scan,
/// which is the one a dense SVD of the assembled operator uses.
pub fn torus_kernel_scan(sym: &SymbolMatrix2D, nx: usize, ny: usize) -> Result<Vec<ModeKernel>> {
    if nx > 64 || ny > 64 {
        return Err(Error::SizeGuard {
            size: nx.max(ny),
            limit: 64,
        });
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut svs = Vec::with_capacity(nx * ny);
    for a in 0..nx {
        for b in 0..ny {
            let m = sym.eval(
                unit(tau * a as f64 / nx as f64),
                unit(tau * b as f64 / ny as f64),
            );
            svs.push((a, b, singular_values(&m)));
        }
    }
    let global = svs.iter().map(|(_, _, s)| s[0]).fold(0.0, f64::max);
    Ok(svs
        .into_iter()
        .map(|(a, b, s)| {
            let dim = kernel_dim(&s, global, KERNEL_TOL);
            let kept = s.len() - dim;
            let gap = if dim == 0 || kept == 0 {
                f64::INFINITY
            } else {
                s[kept - 1] / s[kept].max(f64::MIN_POSITIVE)
            };
            ModeKernel {
                a,
                b,
                dim,
                sigma_max: s[0],
                gap,
            }
        })
        .collect())
}

/// Dimension of the kernel of a dense real matrix, relative threshold.
pub fn dense_kernel_dim(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = m.clone().singular_values();
    let smax = s.max();
    let short = m.ncols().saturating_sub(s.len());
    s.iter().filter(|&&x| x < tol * smax).count() + short
}

/// Scalar Q1 symbols used by the closed-form involutions.
struct Q1Scalars {
    d: C64,
    m: C64,
    s: C64,
}

fn q1_scalars(sym: &SchemeSymbols, t: C64, x: bool, stab: Op1) -> Result<Q1Scalars> {
    let f = |op| if x { sym.sym_x(op) } else { sym.sym_y(op) }.map(|p| p.eval(t)[(0, 0)]);
    Ok(Q1Scalars {
        d: f(Op1::D)?,
        m: f(Op1::M)?,
        s: f(stab)?,
    })
}

/// Closed-form left-kernel vector of the Q1 SUPG-GFq symbol.
pub fn supg_gfq_q1_omega(sym: &SchemeSymbols, tx: C64, ty: C64) -> Result<[C64; 3]> {
    if sym.k() != 1 {
        return Err(Error::Unsupported(
            "closed-form involution only for Q1".into(),
        ));
    }
    let x = q1_scalars(sym, tx, true, Op1::S)?;
    let y = q1_scalars(sym, ty, false, Op1::S)?;
    let ah = sym.ah();
    let ah2 = ah * ah;
    let mix = y.s * x.m + x.s * y.m;
    Ok([
        x.d * (y.d * y.d * x.m - y.s * mix * ah2),
        y.d * (-x.d * x.d * y.m + x.s * mix * ah2),
        (-x.s * y.d * y.d * x.m + x.d * x.d * y.s * y.m) * ah,
    ])
}

/// Left-kernel vector of the Q1 OSS-GFq symbol. The coefficients `K_u`,
/// `K_v` are obtained by solving the two scalar relations
/// `F_y(D M²) F_x(M) K_u = −(F_y(D)² + F_y(S M)) B` and
/// `F_x(D M²) F_y(M) K_v = (F_x(D)² + F_x(S M)) B`, with
/// `B = F_y(D)² F_x(M)² − F_y(M)(−F_y(S) F_x(M)² − F_x(D)² F_y(M) − F_x(S M) F_y(M))`,
/// where `S` is the stiffness symbol.
pub fn oss_gfq_q1_vector(sym: &SchemeSymbols, tx: C64, ty: C64) -> Result<[C64; 3]> {
    if sym.k() != 1 {
        return Err(Error::Unsupported(
            "closed-form involution only for Q1".into(),
        ));
    }
    let x = q1_scalars(sym, tx, true, Op1::S)?;
    let y = q1_scalars(sym, ty, false, Op1::S)?;
    let ah = sym.ah();
    let bracket =
        y.d * y.d * x.m * x.m - y.m * (-y.s * x.m * x.m - x.d * x.d * y.m - x.s * x.m * y.m);
    let ku = solve_scalar(y.d * y.m * y.m * x.m, -(y.d * y.d + y.s * y.m) * bracket)?;
    let kv = solve_scalar(x.d * x.m * x.m * y.m, (x.d * x.d + x.s * x.m) * bracket)?;
    Ok([
        y.d * x.m + ku * ah * ah,
        -x.d * y.m + kv * ah * ah,
        (-x.s * y.d * x.m / x.d + x.d * y.s * y.m / y.d) * ah,
    ])
}

fn solve_scalar(a: C64, b: C64) -> Result<C64> {
    if a.norm() < 1e-300 {
        return Err(Error::Numerical(
            "degenerate mode in scalar relation".into(),
        ));
    }
    Ok(b / a)
}

/// `‖ω F(E)‖ / (‖ω‖ ‖F(E)‖)`
pub fn left_residual(omega: &[C64], m: &CMatrix) -> f64 {
    let w = DVector::from_column_slice(omega);
    let r = m.transpose() * &w;
    r.norm() / (w.norm() * m.norm())
}

/// Left-kernel dimension of a (possibly rectangular) complex matrix.
pub fn left_kernel_dim(m: &CMatrix, tol: f64) -> usize {
    let s = singular_values(m);
    let rank = s.iter().filter(|&&x| x >= tol * s[0]).count();
    m.nrows() - rank
}

/// Broken P^{K−1} trial space and zero-trace P^K test space operators
/// `(D̃_x, D̃^x_x)` on `cells` unit cells, plus full-space companions.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub k: usize,
    pub cells: usize,
    pub rank_dt: usize,
    pub rank_dtx: usize,
    /// max_i |q_{i,0} + q_{i−1,K−1}| for the unit-norm generator of ker D̃_x.
    pub interface_residual: f64,
    /// max deviation of the ker D̃^x_x generator from a constant (relative).
    pub dtx_kernel_const_dev: f64,
    /// dim ker of the square assembled D (all rows, non-periodic).
    pub ker_d_full_square: usize,
    /// dim ker of D restricted to zero-trace test rows.
    pub ker_d_zero_trace: usize,
    /// `D^x_x` applied to 1 and x, zero-trace rows.
    pub stiffness_linear_residual: f64,
    pub z_linear_residual: f64,
    pub z_asymmetry: f64,
    pub z_min_eig_zero_trace: f64,
    /// ‖Z w‖ / ‖w‖ for the D-kernel generator orthogonal to constants.
    pub z_w_ratio: f64,
}

type BasisFn = Box<dyn Fn(usize, f64) -> f64>;

/// Lagrange basis of the broken degree-(K−1) space on one cell: values at the
/// K+1 Lobatto points of the degree-K rule (constant for K = 1).
fn broken_basis(k: usize) -> Result<(Vec<f64>, BasisFn)> {
    if k == 1 {
        return Ok((vec![0.0], Box::new(|_, _| 1.0)));
    }
    let nodes = lobatto_rule(k - 1)?.nodes;
    let n2 = nodes.clone();
    Ok((nodes, Box::new(move |q, x| lagrange_eval(&n2, q, x))))
}

pub fn kernel_rank_audit(k: usize, cells: usize) -> Result<AuditReport> {
    if cells > 32 || k > 4 || k == 0 {
        return Err(Error::SizeGuard {
            size: cells.max(k),
            limit: 32,
        });
    }
    let line = Line1D::new(cells, k, 0.0, cells as f64, Bc::Dirichlet)?;
    let rule = line.rule();
    let n_full = line.n_nodes();
    let n_test = n_full - 2;
    let n_trial = cells * k;
    let (_, psi) = broken_basis(k)?;
    let mut dt = DMatrix::<f64>::zeros(n_test, n_trial);
    let mut dtx = DMatrix::<f64>::zeros(n_test, n_trial);
    for i in 0..cells {
        for s in 0..=k {
            let a = line.node(i, s);
            if a == 0 || a + 1 == n_full {
                continue;
            }
            for q in 0..k {
                let mut m = 0.0;
                let mut d = 0.0;
                for r in 0..=k {
                    let w = rule.weights[r];
                    let xr = rule.nodes[r];
                    m += w * lagrange_eval(&rule.nodes, s, xr) * psi(q, xr);
                    d += w * lagrange_deriv(&rule.nodes, s, xr) * psi(q, xr);
                }
                dt[(a - 1, i * k + q)] += m;
                dtx[(a - 1, i * k + q)] += d;
            }
        }
    }
    let rank = |m: &DMatrix<f64>| m.ncols() - dense_kernel_dim(m, KERNEL_TOL);
    let null_vec = |m: &DMatrix<f64>| null_space_dense(m, 1).remove(0);
    let g = null_vec(&dt);
    let interface_residual = (1..cells)
        .map(|i| (g[i * k] + g[(i - 1) * k + k - 1]).abs())
        .fold(0.0, f64::max);
    let c = null_vec(&dtx);
    let cmean = c.mean();
    let dtx_kernel_const_dev =
        c.iter().map(|x| (x - cmean).abs()).fold(0.0, f64::max) / cmean.abs();

    let d = Operator1D::assemble(OpKind::D, &line)?.to_dense();
    let s = Operator1D::assemble(OpKind::DXX, &line)?.to_dense();
    let z = Operator1D::z_operator(&line)?.to_dense();
    let d_int = d.rows(1, n_test).into_owned();
    let ker_d_full_square = dense_kernel_dim(&d, KERNEL_TOL);
    let ker_d_zero_trace = dense_kernel_dim(&d_int, KERNEL_TOL);
    let x = DVector::from_vec(line.coords());
    let one = DVector::from_element(n_full, 1.0);
    let scale = z.amax();
    let s_int = s.rows(1, n_test);
    let stiffness_linear_residual = (s_int * &one).amax().max((s_int * &x).amax()) / s.amax();
    let z_linear_residual = ((&z * &one).amax()).max((&z * &x).amax()) / scale;
    let z_asymmetry = (&z - z.transpose()).amax() / scale;
    let zi = z.view((1, 1), (n_test, n_test)).into_owned();
    let zi_sym = (&zi + zi.transpose()) * 0.5;
    let z_min_eig_zero_trace = zi_sym.symmetric_eigenvalues().min() / scale;
    // kernel of D on zero-trace rows is ⟨1, w⟩; take w ⟂ 1
    let basis = null_space_dense(&d_int, 2);
    let onen = one.normalize();
    let mut w = basis
        .iter()
        .map(|b| b - &onen * onen.dot(b))
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .expect("two kernel vectors");
    w /= w.norm();
    let z_w_ratio = (&z * &w).norm() / w.norm();
    Ok(AuditReport {
        k,
        cells,
        rank_dt: rank(&dt),
        rank_dtx: rank(&dtx),
        interface_residual,
        dtx_kernel_const_dev,
        ker_d_full_square,
        ker_d_zero_trace,
        stiffness_linear_residual,
        z_linear_residual,
        z_asymmetry,
        z_min_eig_zero_trace,
        z_w_ratio,
    })
}

/// Orthonormal basis of the `dim` smallest right singular directions.
pub fn null_space_dense(m: &DMatrix<f64>, dim: usize) -> Vec<DVector<f64>> {
    let g = m.transpose() * m;
    let eig = g.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    order[..dim]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// Dense `D` (zero-trace test rows, full trial space) and its kernel
/// generator `w ⟂ 1`, used for the 2D spurious-mode checks.
pub fn zero_trace_derivative(
    k: usize,
    cells: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let line = Line1D::new(cells, k, 0.0, cells as f64, Bc::Dirichlet)?;
    let n = line.n_nodes();
    let d = Operator1D::assemble(OpKind::D, &line)?
        .to_dense()
        .rows(1, n - 2)
        .into_owned();
    let s = Operator1D::assemble(OpKind::DXX, &line)?
        .to_dense()
        .rows(1, n - 2)
        .into_owned();
    let basis = null_space_dense(&d, 2);
    let one = DVector::from_element(n, 1.0).normalize();
    let w = basis
        .iter()
        .map(|b| b - &one * one.dot(b))
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .expect("two kernel vectors")
        .normalize();
    Ok((d, s, w))
}

/// `(D^x M^{-1} D)` and `D^x_x` entries coupling node `(i−1, 0)` with `(i, K)`
/// on a periodic line of `cells` cells, `i = 1`.
pub fn grad_div_witness(k: usize, cells: usize) -> Result<(f64, f64)> {
    let line = Line1D::new(cells, k, 0.0, 1.0, Bc::Periodic)?;
    let dx = Operator1D::assemble(OpKind::DX, &line)?;
    let minv = Operator1D::assemble(OpKind::Mass, &line)?.diagonal_inverse()?;
    let d = Operator1D::assemble(OpKind::D, &line)?;
    let p = crate::grid_ops::compose(&crate::grid_ops::compose(&dx, &minv)?, &d)?;
    let s = Operator1D::assemble(OpKind::DXX, &line)?;
    let (r, c) = (line.node(0, 0), line.node(1, k));
    Ok((p.get(r, c), s.get(r, c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_ops::Grid2D;

    #[test]
    fn q1_mass_symbol_is_one() {
        let line = Line1D::new(8, 1, 0.0, 1.0, Bc::Periodic).unwrap();
        let m = extract_symbol(&Operator1D::assemble(OpKind::Mass, &line).unwrap()).unwrap();
        let v = m.eval(unit(0.4));
        assert!((v[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn non_periodic_symbol_rejected() {
        let line = Line1D::new(8, 1, 0.0, 1.0, Bc::Dirichlet).unwrap();
        let d = Operator1D::assemble(OpKind::D, &line).unwrap();
        assert!(extract_symbol(&d).is_err());
    }

    #[test]
    fn q1_supg_det_nonzero_at_i_i() {
        let g = Grid2D::unit(8, 8, 1, Bc::Periodic).unwrap();
        let s = scheme_symbol(&SchemeConfig::new(SchemeKind::Supg, 0.1, g)).unwrap();
        let m = s.e.eval(C64::i(), C64::i());
        assert!(m.determinant().norm() > 1e-6 * det_scale(&m));
    }

    #[test]
    fn grad_div_witness_q1_to_q3() {
        for k in 1..=3 {
            let (p, s) = grad_div_witness(k, 6).unwrap();
            assert!(p.abs() > 1e-8, "k={k}");
            assert_eq!(s, 0.0);
        }
    }
}
