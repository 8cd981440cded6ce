//! Semi-discrete operators `A dq/dt + E q = 0` for Galerkin, SUPG, OSS and the
//! global-flux-quadrature (GFq) variants.
//!
//! Every block of `A` and `E` is a sum of Kronecker terms `c · (Ax ⊗ By)`
//! acting from one component of `q = (u, v, p)` into another. The terms are
//! compiled into a plan that applies each distinct `By` to each input
//! component once, combines the intermediates that share an `Ax`, and only
//! then applies `Ax`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid_ops::{kron, Bc, Grid2D, Line1D, OpKind, Operator1D, StateField, DENSE_GUARD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Galerkin,
    Supg,
    SupgGfq,
    Oss,
    OssGfq,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::Galerkin,
        SchemeKind::Supg,
        SchemeKind::SupgGfq,
        SchemeKind::Oss,
        SchemeKind::OssGfq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Galerkin => "galerkin",
            SchemeKind::Supg => "supg",
            SchemeKind::SupgGfq => "supg_gfq",
            SchemeKind::Oss => "oss",
            SchemeKind::OssGfq => "oss_gfq",
        }
    }

    pub fn is_gfq(self) -> bool {
        matches!(self, SchemeKind::SupgGfq | SchemeKind::OssGfq)
    }

    pub fn has_supg_mass(self) -> bool {
        matches!(self, SchemeKind::Supg | SchemeKind::SupgGfq)
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| Error::Parameter(format!("unknown scheme '{s}'")))
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Galerkin,
    Gfq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub alpha: f64,
    pub grid: Grid2D,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, alpha: f64, grid: Grid2D) -> Self {
        Self { kind, alpha, grid }
    }
}

/// The 1D building blocks, one set per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op1 {
    M,
    D,
    DX,
    S,
    /// `(D I)` element-local product
    DI,
    /// `(D^x_x I)` element-local product
    SI,
    Z,
    ZI,
}

impl Op1 {
    const COUNT: usize = 8;

    fn index(self) -> usize {
        self as usize
    }

    pub fn build(self, line: &Line1D) -> Result<Operator1D> {
        match self {
            Op1::M => Operator1D::assemble(OpKind::Mass, line),
            Op1::D => Operator1D::assemble(OpKind::D, line),
            Op1::DX => Operator1D::assemble(OpKind::DX, line),
            Op1::S => Operator1D::assemble(OpKind::DXX, line),
            Op1::DI => Operator1D::gfq_product(OpKind::D, line, false),
            Op1::SI => Operator1D::gfq_product(OpKind::DXX, line, false),
            Op1::Z => Operator1D::z_operator(line),
            Op1::ZI => Operator1D::z_integrated(line),
        }
    }
}

/// One Kronecker term `coef · (x ⊗ y)` from component `col` into `row`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub row: usize,
    pub col: usize,
    pub coef: f64,
    pub x: Op1,
    pub y: Op1,
}

const fn t(row: usize, col: usize, coef: f64, x: Op1, y: Op1) -> Term {
    Term {
        row,
        col,
        coef,
        x,
        y,
    }
}

/// Kronecker terms of `E` for a scheme, with `ah = α h`.
pub fn e_terms(kind: SchemeKind, ah: f64) -> Vec<Term> {
    use Op1::*;
    let central = [
        t(0, 2, 1.0, D, M),
        t(1, 2, 1.0, M, D),
        t(2, 0, 1.0, D, M),
        t(2, 1, 1.0, M, D),
    ];
    let central_gfq = [
        t(0, 2, 1.0, D, M),
        t(1, 2, 1.0, M, D),
        t(2, 0, 1.0, D, DI),
        t(2, 1, 1.0, DI, D),
    ];
    let mut out = Vec::new();
    match kind {
        SchemeKind::Galerkin => out.extend(central),
        SchemeKind::Supg => {
            out.extend(central);
            out.extend([
                t(0, 0, ah, S, M),
                t(0, 1, ah, DX, D),
                t(1, 0, ah, D, DX),
                t(1, 1, ah, M, S),
                t(2, 2, ah, S, M),
                t(2, 2, ah, M, S),
            ]);
        }
        SchemeKind::SupgGfq => {
            out.extend(central_gfq);
            out.extend([
                t(0, 0, ah, S, DI),
                t(0, 1, ah, SI, D),
                t(1, 0, ah, D, SI),
                t(1, 1, ah, DI, S),
                t(2, 2, ah, S, M),
                t(2, 2, ah, M, S),
            ]);
        }
        SchemeKind::Oss => {
            out.extend(central);
            out.extend([
                t(0, 0, ah, Z, M),
                t(1, 1, ah, M, Z),
                t(2, 2, ah, Z, M),
                t(2, 2, ah, M, Z),
            ]);
        }
        SchemeKind::OssGfq => {
            out.extend(central_gfq);
            out.extend([
                t(0, 0, ah, Z, DI),
                t(0, 1, ah, ZI, D),
                t(1, 0, ah, D, ZI),
                t(1, 1, ah, DI, Z),
                t(2, 2, ah, Z, M),
                t(2, 2, ah, M, Z),
            ]);
        }
    }
    out.retain(|t| t.coef != 0.0);
    out
}

/// Kronecker terms of the non-diagonal part `A_SU` of `A` (empty unless SUPG).
pub fn a_su_terms(kind: SchemeKind, ah: f64) -> Vec<Term> {
    use Op1::*;
    if !kind.has_supg_mass() || ah == 0.0 {
        return Vec::new();
    }
    vec![
        t(0, 2, ah, DX, M),
        t(1, 2, ah, M, DX),
        t(2, 0, ah, DX, M),
        t(2, 1, ah, M, DX),
    ]
}

#[derive(Debug, Clone)]
struct Group {
    row: usize,
    x: Op1,
    parts: Vec<(usize, f64)>,
}

/// Compiled evaluation order of a term list.
#[derive(Debug, Clone, Default)]
struct Plan {
    yjobs: Vec<(Op1, usize)>,
    groups: Vec<Group>,
}

impl Plan {
    fn new(terms: &[Term]) -> Self {
        let mut plan = Plan::default();
        for t in terms {
            let slot = match plan.yjobs.iter().position(|&j| j == (t.y, t.col)) {
                Some(s) => s,
                None => {
                    plan.yjobs.push((t.y, t.col));
                    plan.yjobs.len() - 1
                }
            };
            match plan
                .groups
                .iter_mut()
                .find(|g| g.row == t.row && g.x == t.x)
            {
                Some(g) => g.parts.push((slot, t.coef)),
                None => plan.groups.push(Group {
                    row: t.row,
                    x: t.x,
                    parts: vec![(slot, t.coef)],
                }),
            }
        }
        plan
    }
}

/// Scratch buffers for matrix-free applications.
#[derive(Debug, Clone)]
pub struct Workspace {
    slots: Vec<Vec<f64>>,
    acc: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SchemeOps {
    pub cfg: SchemeConfig,
    xops: Vec<Option<Operator1D>>,
    yops: Vec<Option<Operator1D>>,
    e_terms: Vec<Term>,
    a_terms: Vec<Term>,
    e_plan: Plan,
    a_plan: Plan,
    mass: Vec<f64>,
    lumped_inv: Vec<f64>,
    boundary: Vec<usize>,
}

pub fn build_scheme(cfg: SchemeConfig) -> Result<SchemeOps> {
    if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
        return param(format!(
            "stabilization constant must be >= 0, got {}",
            cfg.alpha
        ));
    }
    if cfg.grid.x.degree != cfg.grid.y.degree || cfg.grid.x.bc != cfg.grid.y.bc {
        return param("both directions must share degree and boundary condition");
    }
    let ah = cfg.alpha * cfg.grid.h();
    let e_terms = e_terms(cfg.kind, ah);
    let a_terms = a_su_terms(cfg.kind, ah);
    let mut xops = vec![None; Op1::COUNT];
    let mut yops = vec![None; Op1::COUNT];
    // the divergence diagnostics and the OSS projections need these as well
    let always = [Op1::M, Op1::D, Op1::DI, Op1::DX];
    for op in e_terms
        .iter()
        .chain(&a_terms)
        .flat_map(|t| [t.x, t.y])
        .chain(always)
    {
        if xops[op.index()].is_none() {
            xops[op.index()] = Some(op.build(&cfg.grid.x)?);
            yops[op.index()] = Some(op.build(&cfg.grid.y)?);
        }
    }
    let mx = cfg.grid.x.mass_diag();
    let my = cfg.grid.y.mass_diag();
    let mass: Vec<f64> = mx
        .iter()
        .flat_map(|a| my.iter().map(move |b| a * b))
        .collect();
    let lumped_inv = mass.iter().map(|m| 1.0 / m).collect();
    let boundary = cfg.grid.boundary_nodes();
    Ok(SchemeOps {
        e_plan: Plan::new(&e_terms),
        a_plan: Plan::new(&a_terms),
        cfg,
        xops,
        yops,
        e_terms,
        a_terms,
        mass,
        lumped_inv,
        boundary,
    })
}

impl SchemeOps {
    pub fn grid(&self) -> &Grid2D {
        &self.cfg.grid
    }

    pub fn kind(&self) -> SchemeKind {
        self.cfg.kind
    }

    pub fn n(&self) -> usize {
        self.cfg.grid.n_nodes()
    }

    pub fn divergence_kind(&self) -> DivergenceKind {
        if self.cfg.kind.is_gfq() {
            DivergenceKind::Gfq
        } else {
            DivergenceKind::Galerkin
        }
    }

    pub fn e_terms(&self) -> &[Term] {
        &self.e_terms
    }

    pub fn a_terms(&self) -> &[Term] {
        &self.a_terms
    }

    pub fn op_x(&self, op: Op1) -> &Operator1D {
        self.xops[op.index()]
            .as_ref()
            .expect("operator built for this scheme")
    }

    pub fn op_y(&self, op: Op1) -> &Operator1D {
        self.yops[op.index()]
            .as_ref()
            .expect("operator built for this scheme")
    }

    /// Diagonal of `M ⊗ M` (normalized), shared by all three components.
    pub fn mass_diag(&self) -> &[f64] {
        &self.mass
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.n();
        let slots = self.e_plan.yjobs.len().max(self.a_plan.yjobs.len()).max(2);
        Workspace {
            slots: vec![vec![0.0; n]; slots],
            acc: vec![0.0; n],
        }
    }

    fn run_plan(&self, plan: &Plan, q: &StateField, out: &mut StateField, ws: &mut Workspace) {
        let n = self.n();
        let ny = self.cfg.grid.ny();
        for (slot, &(y, col)) in plan.yjobs.iter().enumerate() {
            self.op_y(y).apply_inner(q.comp(col), &mut ws.slots[slot]);
        }
        for g in &plan.groups {
            let acc = &mut ws.acc;
            let (s0, c0) = g.parts[0];
            for (a, b) in acc.iter_mut().zip(&ws.slots[s0]) {
                *a = c0 * b;
            }
            for &(s, c) in &g.parts[1..] {
                for (a, b) in acc.iter_mut().zip(&ws.slots[s]) {
                    *a += c * b;
                }
            }
            let row = &mut out.data[g.row * n..(g.row + 1) * n];
            self.op_x(g.x).apply_outer_acc(acc, row, ny, 1.0);
        }
    }

    /// `out = E q`
    pub fn apply_e(&self, q: &StateField, out: &mut StateField, ws: &mut Workspace) {
        out.data.iter_mut().for_each(|x| *x = 0.0);
        self.run_plan(&self.e_plan, q, out, ws);
    }

    /// `out = A q = (M ⊗ M) q + A_SU q`
    pub fn apply_a(&self, q: &StateField, out: &mut StateField, ws: &mut Workspace) {
        let n = self.n();
        for c in 0..3 {
            for i in 0..n {
                out.data[c * n + i] = self.mass[i] * q.data[c * n + i];
            }
        }
        self.run_plan(&self.a_plan, q, out, ws);
    }

    /// `out = A_SU q` only.
    pub fn apply_a_su(&self, q: &StateField, out: &mut StateField, ws: &mut Workspace) {
        out.data.iter_mut().for_each(|x| *x = 0.0);
        self.run_plan(&self.a_plan, q, out, ws);
    }

    pub fn has_a_su(&self) -> bool {
        !self.a_terms.is_empty()
    }

    pub fn e_alloc(&self, q: &StateField) -> StateField {
        let mut out = self.cfg.grid.zeros();
        self.apply_e(q, &mut out, &mut self.workspace());
        out
    }

    /// Inverse of the lumped mass, in place.
    pub fn apply_l_inv(&self, q: &mut StateField) {
        let n = self.n();
        for c in 0..3 {
            for i in 0..n {
                q.data[c * n + i] *= self.lumped_inv[i];
            }
        }
    }

    pub fn lumped_inv(&self) -> &[f64] {
        &self.lumped_inv
    }

    /// Strong Dirichlet imposition: copy boundary values of `from` into `q`.
    pub fn impose(&self, q: &mut StateField, from: &StateField) {
        let n = self.n();
        for c in 0..3 {
            for &i in &self.boundary {
                q.data[c * n + i] = from.data[c * n + i];
            }
        }
    }

    fn tensor_into(&self, x: Op1, y: Op1, f: &[f64], out: &mut [f64], coef: f64) {
        let mut tmp = vec![0.0; f.len()];
        self.op_y(y).apply_inner(f, &mut tmp);
        self.op_x(x)
            .apply_outer_acc(&tmp, out, self.cfg.grid.ny(), coef);
    }

    /// Weak discrete divergence (not divided by the mass).
    pub fn discrete_divergence(&self, kind: DivergenceKind, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        match kind {
            DivergenceKind::Galerkin => {
                self.tensor_into(Op1::D, Op1::M, u, &mut out, 1.0);
                self.tensor_into(Op1::M, Op1::D, v, &mut out, 1.0);
            }
            DivergenceKind::Gfq => {
                self.tensor_into(Op1::D, Op1::DI, u, &mut out, 1.0);
                self.tensor_into(Op1::DI, Op1::D, v, &mut out, 1.0);
            }
        }
        out
    }

    /// Nodal (strong) divergence: the weak divergence divided by the mass.
    pub fn nodal_divergence(&self, kind: DivergenceKind, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut d = self.discrete_divergence(kind, u, v);
        for (x, m) in d.iter_mut().zip(&self.mass) {
            *x /= m;
        }
        d
    }

    /// Projections `(w^{div}, w^{p_x}, w^{p_y})` used by orthogonal subscale
    /// stabilization; the divergence follows the scheme's flavour.
    pub fn oss_projection(&self, q: &StateField) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let wdiv = self.nodal_divergence(self.divergence_kind(), q.u(), q.v());
        let mut wpx = vec![0.0; n];
        let mut wpy = vec![0.0; n];
        self.tensor_into(Op1::D, Op1::M, q.p(), &mut wpx, 1.0);
        self.tensor_into(Op1::M, Op1::D, q.p(), &mut wpy, 1.0);
        for i in 0..n {
            wpx[i] /= self.mass[i];
            wpy[i] /= self.mass[i];
        }
        (wdiv, wpx, wpy)
    }

    /// OSS stabilization assembled from the projections rather than from `Z`:
    /// `s^u = αh ∫ ∂_x φ (div − w^{div})`, `s^v` likewise, and
    /// `s^p = αh ∫ ∇φ · (∇p − w^{∇p})`. Standard OSS only.
    pub fn oss_stabilization(&self, q: &StateField) -> Result<StateField> {
        if self.cfg.kind != SchemeKind::Oss {
            return Err(Error::Unsupported(
                "projection-form stabilization is only provided for standard OSS".into(),
            ));
        }
        let n = self.n();
        let ah = self.cfg.alpha * self.cfg.grid.h();
        let mut xops = self.clone();
        for op in [Op1::S] {
            if xops.xops[op.index()].is_none() {
                xops.xops[op.index()] = Some(op.build(&self.cfg.grid.x)?);
                xops.yops[op.index()] = Some(op.build(&self.cfg.grid.y)?);
            }
        }
        let (wdiv, wpx, wpy) = self.oss_projection(q);
        let mut out = self.cfg.grid.zeros();
        {
            let su = &mut out.data[0..n];
            xops.tensor_into(Op1::S, Op1::M, q.u(), su, ah);
            xops.tensor_into(Op1::DX, Op1::D, q.v(), su, ah);
            xops.tensor_into(Op1::DX, Op1::M, &wdiv, su, -ah);
        }
        {
            let sv = &mut out.data[n..2 * n];
            xops.tensor_into(Op1::D, Op1::DX, q.u(), sv, ah);
            xops.tensor_into(Op1::M, Op1::S, q.v(), sv, ah);
            xops.tensor_into(Op1::M, Op1::DX, &wdiv, sv, -ah);
        }
        {
            let sp = &mut out.data[2 * n..3 * n];
            xops.tensor_into(Op1::S, Op1::M, q.p(), sp, ah);
            xops.tensor_into(Op1::M, Op1::S, q.p(), sp, ah);
            xops.tensor_into(Op1::DX, Op1::M, &wpx, sp, -ah);
            xops.tensor_into(Op1::M, Op1::DX, &wpy, sp, -ah);
        }
        Ok(out)
    }

    /// Per-element subcell integrals of the divergence,
    /// `Φ^E = (1 ⊗ I_y)(u − u_0) + (I_x ⊗ 1)(v − v_0)` with `u_0` the value at
    /// the bottom node of each element column and `v_0` at the left node of each
    /// element row. Element `(i, j)` occupies
    /// `out[(i * cells_y + j) * (K+1)^2 ..]`, local index `s * (K+1) + p`.
    pub fn subcell_phi(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let g = &self.cfg.grid;
        let k = g.degree();
        let n1 = k + 1;
        let bx = g.x.blocks().integ_full();
        let by = g.y.blocks().integ_full();
        let ny = g.ny();
        let mut out = vec![0.0; g.x.cells * g.y.cells * n1 * n1];
        for i in 0..g.x.cells {
            for j in 0..g.y.cells {
                let base = (i * g.y.cells + j) * n1 * n1;
                let at = |s: usize, p: usize| g.x.node(i, s) * ny + g.y.node(j, p);
                for s in 0..n1 {
                    for p in 0..n1 {
                        let mut acc = 0.0;
                        for r in 0..n1 {
                            acc += by[(p, r)] * (u[at(s, r)] - u[at(s, 0)]);
                            acc += bx[(s, r)] * (v[at(r, p)] - v[at(0, p)]);
                        }
                        out[base + s * n1 + p] = acc;
                    }
                }
            }
        }
        out
    }

    /// Element assembly of `(D^E ⊗ D^E) Φ^E`.
    pub fn assemble_phi(&self, phi: &[f64]) -> Vec<f64> {
        let g = &self.cfg.grid;
        let k = g.degree();
        let n1 = k + 1;
        let dx = g.x.blocks().d;
        let dy = g.y.blocks().d;
        let ny = g.ny();
        let mut out = vec![0.0; self.n()];
        for i in 0..g.x.cells {
            for j in 0..g.y.cells {
                let base = (i * g.y.cells + j) * n1 * n1;
                for s in 0..n1 {
                    for p in 0..n1 {
                        let mut acc = 0.0;
                        for a in 0..n1 {
                            for b in 0..n1 {
                                acc += dx[(s, a)] * dy[(p, b)] * phi[base + a * n1 + b];
                            }
                        }
                        out[g.x.node(i, s) * ny + g.y.node(j, p)] += acc;
                    }
                }
            }
        }
        out
    }

    fn dense_terms(&self, terms: &[Term]) -> Result<DMatrix<f64>> {
        let n = self.n();
        if 3 * n > DENSE_GUARD {
            return Err(Error::SizeGuard {
                size: 3 * n,
                limit: DENSE_GUARD,
            });
        }
        let mut m = DMatrix::zeros(3 * n, 3 * n);
        for t in terms {
            let block = kron(&self.op_x(t.x).to_dense(), &self.op_y(t.y).to_dense()) * t.coef;
            let mut view = m.view_mut((t.row * n, t.col * n), (n, n));
            view += block;
        }
        Ok(m)
    }

    /// Dense oracle of `E` assembled from Kronecker products.
    pub fn dense_e(&self) -> Result<DMatrix<f64>> {
        self.dense_terms(&self.e_terms)
    }

    /// Dense oracle of `A`.
    pub fn dense_a(&self) -> Result<DMatrix<f64>> {
        let mut m = self.dense_terms(&self.a_terms)?;
        let n = self.n();
        for c in 0..3 {
            for i in 0..n {
                m[(c * n + i, c * n + i)] += self.mass[i];
            }
        }
        Ok(m)
    }

    /// Dense oracle of the symmetric stabilization part of `E`.
    pub fn dense_e_stab(&self) -> Result<DMatrix<f64>> {
        let central = e_terms(SchemeKind::Galerkin, 0.0);
        let stab: Vec<Term> = self
            .e_terms
            .iter()
            .filter(|t| !central.contains(t))
            .copied()
            .collect();
        self.dense_terms(&stab)
    }

    /// `½ qᵀ A_C q + ½ αh qᵀ E_SU q` for SUPG; the plain quadratic energy otherwise.
    pub fn energy(&self, q: &StateField) -> f64 {
        let n = self.n();
        let mut e = 0.0;
        for c in 0..3 {
            for i in 0..n {
                e += 0.5 * self.mass[i] * q.data[c * n + i].powi(2);
            }
        }
        if self.cfg.kind == SchemeKind::Supg && self.cfg.alpha > 0.0 {
            let ah = self.cfg.alpha * self.cfg.grid.h();
            let mut stab = self.clone();
            stab.e_terms = e_terms(SchemeKind::Supg, ah)
                .into_iter()
                .filter(|t| !e_terms(SchemeKind::Galerkin, 0.0).contains(t))
                .collect();
            stab.e_plan = Plan::new(&stab.e_terms);
            let mut out = self.cfg.grid.zeros();
            stab.apply_e(q, &mut out, &mut stab.workspace());
            e += 0.5
                * ah
                * q.data
                    .iter()
                    .zip(&out.data)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
        e
    }

    pub fn bc(&self) -> Bc {
        self.cfg.grid.bc()
    }
}
