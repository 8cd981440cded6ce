//! Analytic test cases, error and divergence diagnostics, and the drivers
//! behind the numerical experiments.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dec_time::{evolve, evolve_with, DecConfig, Flow};
use crate::error::{param, Error, Result};
use crate::grid_ops::{Bc, Grid2D, StateField};
use crate::schemes::{build_scheme, DivergenceKind, SchemeConfig, SchemeKind, SchemeOps};
use crate::wellprep::{llrr_project, opt_project, sample_nodal, AnalyticField, OptOptions};

/// Plane acoustic wave travelling along `(cos θ, sin θ)` on the periodic unit
/// square: `u = sin(a ξ) sin(a t) cos θ`, `v = sin(a ξ) sin(a t) sin θ`,
/// `p = cos(a ξ) cos(a t)` with `ξ = x cos θ + y sin θ`, `a = 2π / (λ cos θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObliqueWave {
    pub theta: f64,
    pub lambda: f64,
}

impl Default for ObliqueWave {
    fn default() -> Self {
        Self {
            theta: PI / 4.0,
            lambda: 0.25,
        }
    }
}

/// Final time of the oblique-wave convergence runs, `a T = 9π/4` for the
/// default wave. At this phase no component of the exact solution vanishes
/// identically, so per-component errors are not dominated by cancellation.
pub const OBLIQUE_REFERENCE_TIME: f64 = 0.198_873_782_208_716_52;

impl ObliqueWave {
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / (self.lambda * self.theta.cos())
    }
}

impl AnalyticField for ObliqueWave {
    fn eval_at(&self, x: f64, y: f64, t: f64) -> [f64; 3] {
        let a = self.wavenumber();
        let xi = x * self.theta.cos() + y * self.theta.sin();
        // −(cos(a(ξ+t)) − cos(a(ξ−t)))/2 and (cos(a(ξ+t)) + cos(a(ξ−t)))/2
        let plus = (a * (xi + t)).cos();
        let minus = (a * (xi - t)).cos();
        let s = -0.5 * (plus - minus);
        [
            s * self.theta.cos(),
            s * self.theta.sin(),
            0.5 * (plus + minus),
        ]
    }
}

/// Radial profile of a stationary vortex `u = f(ρ)(y − y0)`, `v = −f(ρ)(x − x0)`, `p = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VortexProfile {
    /// `γ (1 + cos πρ)²`, six times continuously differentiable.
    C6,
    /// `2γ exp(−1/(2(1−ρ)²)) √(g / (r0 (1−ρ)³))`, infinitely smooth.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub profile: VortexProfile,
    pub center: (f64, f64),
    pub r0: f64,
}

impl Vortex {
    pub fn c6() -> Self {
        Self {
            profile: VortexProfile::C6,
            center: (0.5, 0.5),
            r0: 0.45,
        }
    }

    pub fn smooth() -> Self {
        Self {
            profile: VortexProfile::Smooth,
            center: (0.5, 0.5),
            r0: 0.45,
        }
    }

    pub fn f(&self, rho: f64) -> f64 {
        if rho >= 1.0 {
            return 0.0;
        }
        match self.profile {
            VortexProfile::C6 => {
                let gamma =
                    12.0 * PI * 0.981f64.sqrt() / (self.r0 * (315.0 * PI * PI - 2048.0).sqrt());
                gamma * (1.0 + (PI * rho).cos()).powi(2)
            }
            VortexProfile::Smooth => {
                let (gamma, g) = (0.2, 9.81);
                let d = 1.0 - rho;
                2.0 * gamma * (-0.5 / (d * d)).exp() * (g / (self.r0 * d * d * d)).sqrt()
            }
        }
    }
}

impl AnalyticField for Vortex {
    fn eval_at(&self, x: f64, y: f64, _t: f64) -> [f64; 3] {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let f = self.f((dx * dx + dy * dy).sqrt() / self.r0);
        [f * dy, -f * dx, 1.0]
    }

    fn solenoidal(&self) -> bool {
        true
    }
}

/// Compactly supported bump `ε exp(−1/(2(1−ρ)²) + 1/2)`, `ρ = |x − x_p| / r0`,
/// zero for `ρ ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureBump {
    pub eps: f64,
    pub center: (f64, f64),
    pub r0: f64,
}

impl Default for PressureBump {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            center: (0.4, 0.43),
            r0: 0.1,
        }
    }
}

impl PressureBump {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let rho = (x - self.center.0).hypot(y - self.center.1) / self.r0;
        if rho >= 1.0 {
            return 0.0;
        }
        self.eps * (-0.5 / (1.0 - rho).powi(2) + 0.5).exp()
    }

    /// Add the bump to the pressure of a nodal state.
    pub fn add_to(&self, grid: &Grid2D, q: &mut StateField) {
        let xs = grid.x.coords();
        let ys = grid.y.coords();
        let n = q.n();
        for (a, &x) in xs.iter().enumerate() {
            for (b, &y) in ys.iter().enumerate() {
                q.data[2 * n + a * ys.len() + b] += self.eval(x, y);
            }
        }
    }
}

/// Corner Riemann problem: `u = 1` in the quadrant `x > x0, y > y0`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannCorner {
    pub center: (f64, f64),
}

impl Default for RiemannCorner {
    fn default() -> Self {
        Self { center: (0.5, 0.5) }
    }
}

/// Exact wherever the disc of radius `t` around `(x, y)` meets at most one of
/// the two lines through the corner: there the data are locally
/// one-dimensional. The jump of `u` across the vertical line is a 1D acoustic
/// Riemann problem with middle state `u = 1/2`, `p = −1/2`; the jump across
/// the horizontal line is a stationary shear. Inside the cross `|x − x0| < t`,
/// `|y − y0| < t` the initial data are returned.
impl AnalyticField for RiemannCorner {
    fn eval_at(&self, x: f64, y: f64, t: f64) -> [f64; 3] {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let step = |s: f64| if s > 0.0 { 1.0 } else { 0.0 };
        if dy.abs() >= t && dy > 0.0 && dx.abs() < t {
            return [0.5, 0.0, -0.5];
        }
        [step(dx) * step(dy), 0.0, 0.0]
    }
}

/// `log((1 + √(1 − s²)) / s)` for `0 < s ≤ 1`.
pub fn riemann_log(s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Numerical(format!(
            "log profile defined on (0, 1], got {s}"
        )));
    }
    Ok(((1.0 + (1.0 - s * s).sqrt()) / s).ln())
}

/// Exact transverse velocity at distance `r` from the corner at time `t`
/// (unit sound speed); zero outside the sonic circle.
pub fn riemann_v_exact(r: f64, t: f64) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return param(format!("time must be positive, got {t}"));
    }
    let s = r / t;
    if s >= 1.0 {
        return Ok(0.0);
    }
    Ok(riemann_log(s)? / (2.0 * PI))
}

/// Central-difference residual of `∂_t q + (p_x + 0, 0 + p_y, u_x + v_y)`.
pub fn pde_residual(f: &dyn AnalyticField, x: f64, y: f64, t: f64, h: f64) -> [f64; 3] {
    let d = |dx: f64, dy: f64, dt: f64| {
        let a = f.eval_at(x + dx, y + dy, t + dt);
        let b = f.eval_at(x - dx, y - dy, t - dt);
        [0, 1, 2].map(|c| (a[c] - b[c]) / (2.0 * h))
    };
    let qt = d(0.0, 0.0, h);
    let qx = d(h, 0.0, 0.0);
    let qy = d(0.0, h, 0.0);
    [qt[0] + qx[2], qt[1] + qy[2], qt[2] + qx[0] + qy[1]]
}

/// Quadrature-weighted L2 errors per component.
pub fn l2_error(grid: &Grid2D, q: &StateField, f: &dyn AnalyticField, t: f64) -> [f64; 3] {
    let exact = sample_nodal(f, grid, t);
    let w = grid.quad_weights();
    let n = q.n();
    [0, 1, 2].map(|c| {
        (0..n)
            .map(|i| w[i] * (q.data[c * n + i] - exact.data[c * n + i]).powi(2))
            .sum::<f64>()
            .sqrt()
    })
}

/// Max nodal velocity error.
pub fn velocity_max_error(grid: &Grid2D, q: &StateField, f: &dyn AnalyticField) -> f64 {
    let exact = sample_nodal(f, grid, 0.0);
    let n = q.n();
    q.data[..2 * n]
        .iter()
        .zip(&exact.data[..2 * n])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Quadrature-weighted L2 norm of the nodal discrete divergence.
pub fn divergence_norm(ops: &SchemeOps, kind: DivergenceKind, q: &StateField) -> f64 {
    let d = ops.nodal_divergence(kind, q.u(), q.v());
    let w = ops.grid().quad_weights();
    d.iter().zip(&w).map(|(d, w)| w * d * d).sum::<f64>().sqrt()
}

/// `log(e_i / e_{i+1}) / log(N_{i+1} / N_i)` for consecutive pairs.
pub fn eoc(errors: &[f64], ns: &[usize]) -> Vec<f64> {
    errors
        .windows(2)
        .zip(ns.windows(2))
        .map(|(e, n)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Oblique,
    VortexC6,
    VortexSmooth,
    /// Smooth vortex plus a pressure bump.
    Perturbation,
    Riemann,
}

impl CaseKind {
    pub const ALL: [CaseKind; 5] = [
        CaseKind::Oblique,
        CaseKind::VortexC6,
        CaseKind::VortexSmooth,
        CaseKind::Perturbation,
        CaseKind::Riemann,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Oblique => "oblique",
            CaseKind::VortexC6 => "vortex_c6",
            CaseKind::VortexSmooth => "vortex_smooth",
            CaseKind::Perturbation => "perturbation",
            CaseKind::Riemann => "riemann",
        }
    }

    pub fn bc(self) -> Bc {
        match self {
            CaseKind::Oblique => Bc::Periodic,
            _ => Bc::Dirichlet,
        }
    }

    /// Initial (or stationary) analytic field.
    pub fn field(self) -> Box<dyn AnalyticField> {
        match self {
            CaseKind::Oblique => Box::new(ObliqueWave::default()),
            CaseKind::VortexC6 => Box::new(Vortex::c6()),
            CaseKind::VortexSmooth | CaseKind::Perturbation => Box::new(Vortex::smooth()),
            CaseKind::Riemann => Box::new(RiemannCorner::default()),
        }
    }

    /// Time-dependent Dirichlet data, when holding the initial boundary values
    /// is not exact.
    pub fn boundary_field(self) -> Option<Box<dyn AnalyticField>> {
        match self {
            CaseKind::Riemann => Some(Box::new(RiemannCorner::default())),
            _ => None,
        }
    }

    /// Whether `field()` is the exact solution at every time.
    pub fn has_exact(self) -> bool {
        matches!(
            self,
            CaseKind::Oblique | CaseKind::VortexC6 | CaseKind::VortexSmooth
        )
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        CaseKind::ALL
            .into_iter()
            .find(|c| c.name() == norm)
            .ok_or_else(|| Error::Parameter(format!("unknown case '{s}'")))
    }
}

/// Preparation of the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum InitMode {
    Sample,
    Llrr,
    Opt,
    /// Run SUPG-GFq from the sampled data for `t` time units and start from the result.
    Longtime {
        t: f64,
    },
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(InitMode::Sample),
            "llrr" => Ok(InitMode::Llrr),
            "opt" => Ok(InitMode::Opt),
            "longtime" => Ok(InitMode::Longtime { t: 100.0 }),
            _ => match s.strip_prefix("longtime:") {
                Some(t) => t
                    .parse()
                    .map(|t| InitMode::Longtime { t })
                    .map_err(|_| Error::Parameter(format!("bad long-time horizon in '{s}'"))),
                None => param(format!("unknown init mode '{s}'")),
            },
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitMode::Sample => f.write_str("sample"),
            InitMode::Llrr => f.write_str("llrr"),
            InitMode::Opt => f.write_str("opt"),
            InitMode::Longtime { t } => write!(f, "longtime:{t}"),
        }
    }
}

/// Initial state for `case` on `grid`. The pressure bump of the perturbation
/// case is added after the velocity preparation.
pub fn initial_state(
    case: CaseKind,
    grid: &Grid2D,
    init: InitMode,
    alpha: f64,
    dec: &DecConfig,
) -> Result<StateField> {
    let field = case.field();
    let mut q = match init {
        InitMode::Sample => sample_nodal(field.as_ref(), grid, 0.0),
        InitMode::Llrr => llrr_project(field.as_ref(), grid)?,
        InitMode::Opt => opt_project(field.as_ref(), grid, &OptOptions::default())?.0,
        InitMode::Longtime { t } => {
            let ops = build_scheme(SchemeConfig::new(SchemeKind::SupgGfq, alpha, grid.clone()))?;
            let mut q = sample_nodal(field.as_ref(), grid, 0.0);
            evolve(&ops, &mut q, t, dec, usize::MAX, |_, _, _| Flow::Continue)?;
            q
        }
    };
    if case == CaseKind::Perturbation {
        PressureBump::default().add_to(grid, &mut q);
    }
    Ok(q)
}

/// One diagnostics record of a time-dependent run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub err_u: f64,
    pub err_v: f64,
    pub err_p: f64,
    pub div_galerkin: f64,
    pub div_gfq: f64,
    pub drift: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub case: CaseKind,
    pub scheme: SchemeKind,
    pub k: usize,
    pub n: usize,
    pub alpha: f64,
    pub t_final: f64,
    pub init: InitMode,
    pub dec: DecConfig,
    /// Diagnostics every this many steps.
    pub cadence: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub grid: Grid2D,
    pub initial: StateField,
    pub last: StateField,
    pub history: Vec<DiagnosticsRow>,
    pub steps: usize,
    pub dt: f64,
}

fn diagnostics(
    ops: &SchemeOps,
    case: CaseKind,
    q0: &StateField,
    q: &StateField,
    t: f64,
) -> DiagnosticsRow {
    let err = if case.has_exact() {
        l2_error(ops.grid(), q, case.field().as_ref(), t)
    } else {
        [f64::NAN; 3]
    };
    DiagnosticsRow {
        t,
        err_u: err[0],
        err_v: err[1],
        err_p: err[2],
        div_galerkin: divergence_norm(ops, DivergenceKind::Galerkin, q),
        div_gfq: divergence_norm(ops, DivergenceKind::Gfq, q),
        drift: q.max_abs_diff(q0),
        energy: ops.energy(q),
    }
}

pub fn run_case(spec: &RunSpec) -> Result<RunOutput> {
    let grid = Grid2D::unit(spec.n, spec.n, spec.k, spec.case.bc())?;
    let ops = build_scheme(SchemeConfig::new(spec.scheme, spec.alpha, grid.clone()))?;
    let q0 = initial_state(spec.case, &grid, spec.init, spec.alpha, &spec.dec)?;
    let mut q = q0.clone();
    let mut history = Vec::new();
    let bnd = spec.case.boundary_field();
    let stats = evolve_with(
        &ops,
        &mut q,
        spec.t_final,
        &spec.dec,
        bnd.as_deref(),
        spec.cadence,
        |_, t, q| {
            history.push(diagnostics(&ops, spec.case, &q0, q, t));
            Flow::Continue
        },
    )?;
    Ok(RunOutput {
        grid,
        initial: q0,
        last: q,
        history,
        steps: stats.steps,
        dt: stats.dt,
    })
}

/// One line of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub err: [f64; 3],
    /// Orders against the previous row (NaN on the first).
    pub ord: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub case: CaseKind,
    pub scheme: SchemeKind,
    pub k: usize,
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub t_final: f64,
    pub init: InitMode,
    pub dec: DecConfig,
}

pub fn convergence_study(spec: &ConvergenceSpec) -> Result<Vec<ConvergenceRow>> {
    if !spec.case.has_exact() {
        return param(format!("case '{}' has no exact solution", spec.case));
    }
    if spec.ns.is_empty() {
        return param("at least one mesh is required");
    }
    let field = spec.case.field();
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in &spec.ns {
        let grid = Grid2D::unit(n, n, spec.k, spec.case.bc())?;
        let ops = build_scheme(SchemeConfig::new(spec.scheme, spec.alpha, grid.clone()))?;
        let mut q = initial_state(spec.case, &grid, spec.init, spec.alpha, &spec.dec)?;
        evolve(
            &ops,
            &mut q,
            spec.t_final,
            &spec.dec,
            usize::MAX,
            |_, _, _| Flow::Continue,
        )?;
        let err = l2_error(&grid, &q, field.as_ref(), spec.t_final);
        let ord = match rows.last() {
            Some(prev) => [0, 1, 2].map(|c| eoc(&[prev.err[c], err[c]], &[prev.n, n])[0]),
            None => [f64::NAN; 3],
        };
        rows.push(ConvergenceRow { n, err, ord });
    }
    Ok(rows)
}

/// Divergence of the sampled field for one mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub n: usize,
    pub div_galerkin: f64,
    pub div_gfq: f64,
}

pub fn divergence_study(case: CaseKind, k: usize, ns: &[usize]) -> Result<Vec<DivergenceRow>> {
    let field = case.field();
    ns.iter()
        .map(|&n| {
            let grid = Grid2D::unit(n, n, k, case.bc())?;
            let ops = build_scheme(SchemeConfig::new(SchemeKind::Galerkin, 0.0, grid.clone()))?;
            let q = sample_nodal(field.as_ref(), &grid, 0.0);
            Ok(DivergenceRow {
                n,
                div_galerkin: divergence_norm(&ops, DivergenceKind::Galerkin, &q),
                div_gfq: divergence_norm(&ops, DivergenceKind::Gfq, &q),
            })
        })
        .collect()
}

/// Nodal velocity error and GFq divergence of both projections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub n: usize,
    pub err_llrr: f64,
    pub err_opt: f64,
    pub div_llrr: f64,
    pub div_opt: f64,
}

pub fn projection_study(case: CaseKind, k: usize, ns: &[usize]) -> Result<Vec<ProjectionRow>> {
    let field = case.field();
    ns.iter()
        .map(|&n| {
            let grid = Grid2D::unit(n, n, k, Bc::Dirichlet)?;
            let ops = build_scheme(SchemeConfig::new(SchemeKind::Galerkin, 0.0, grid.clone()))?;
            let ql = llrr_project(field.as_ref(), &grid)?;
            let (qo, _) = opt_project(field.as_ref(), &grid, &OptOptions::default())?;
            Ok(ProjectionRow {
                n,
                err_llrr: velocity_max_error(&grid, &ql, field.as_ref()),
                err_opt: velocity_max_error(&grid, &qo, field.as_ref()),
                div_llrr: divergence_norm(&ops, DivergenceKind::Gfq, &ql),
                div_opt: divergence_norm(&ops, DivergenceKind::Gfq, &qo),
            })
        })
        .collect()
}

/// Transverse velocity against distance from the corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiemannProfile {
    /// `(r, v, v_exact)` per node inside the sonic circle.
    pub samples: Vec<(f64, f64, f64)>,
    /// Quadrature-weighted mean `|v − v_exact|` over `s_min ≤ r / t ≤ s_max`.
    pub l1: f64,
}

pub const RIEMANN_ANNULUS: (f64, f64) = (0.05, 0.9);

pub fn riemann_profile(grid: &Grid2D, q: &StateField, t: f64) -> Result<RiemannProfile> {
    let c = RiemannCorner::default().center;
    let xs = grid.x.coords();
    let ys = grid.y.coords();
    let w = grid.quad_weights();
    let (mut num, mut den) = (0.0, 0.0);
    let mut samples = Vec::new();
    for (a, &x) in xs.iter().enumerate() {
        for (b, &y) in ys.iter().enumerate() {
            let r = (x - c.0).hypot(y - c.1);
            if r >= t || r == 0.0 {
                continue;
            }
            let i = a * ys.len() + b;
            let exact = riemann_v_exact(r, t)?;
            let v = q.v()[i];
            samples.push((r, v, exact));
            let s = r / t;
            if (RIEMANN_ANNULUS.0..=RIEMANN_ANNULUS.1).contains(&s) {
                num += w[i] * (v - exact).abs();
                den += w[i];
            }
        }
    }
    if den == 0.0 {
        return param("no nodes inside the comparison annulus");
    }
    Ok(RiemannProfile {
        samples,
        l1: num / den,
    })
}
