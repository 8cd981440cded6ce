use gfq_core::cases::{divergence_norm, velocity_max_error, CaseKind, Vortex};
use gfq_core::wellprep::{
    llrr_project, llrr_project_with, opt_project, opt_project_state, sample_nodal, AnalyticField,
    LlrrOptions, OptOptions,
};
use gfq_core::{build_scheme, Bc, DivergenceKind, Grid2D, SchemeConfig, SchemeKind, SchemeOps};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn galerkin(grid: &Grid2D) -> SchemeOps {
    build_scheme(SchemeConfig::new(SchemeKind::Galerkin, 0.0, grid.clone())).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn both_projections_are_discretely_divergence_free() {
    for k in 1..=3 {
        let grid = Grid2D::unit(5, 5, k, Bc::Dirichlet).unwrap();
        let ops = galerkin(&grid);
        let f = Vortex::smooth();
        let ql = llrr_project(&f, &grid).unwrap();
        let (qo, report) = opt_project(&f, &grid, &OptOptions::default()).unwrap();
        assert!(report.dense);
        // the C6 profile is only finitely smooth at the rim, which limits the
        // line quadrature but not the exact projection
        let c6 = llrr_project(&Vortex::c6(), &grid).unwrap();
        assert!(
            divergence_norm(&ops, DivergenceKind::Gfq, &c6) < 1e-9,
            "k={k}"
        );
        let sampled = sample_nodal(&f, &grid, 0.0);
        let s = divergence_norm(&ops, DivergenceKind::Gfq, &sampled).max(1e-300);
        assert!(
            divergence_norm(&ops, DivergenceKind::Gfq, &ql) < 1e-12,
            "k={k}"
        );
        assert!(
            divergence_norm(&ops, DivergenceKind::Gfq, &qo) < 1e-12,
            "k={k}"
        );
        assert!(s > 1e-8, "sampled data should not already be in the kernel");
        // pressure is untouched
        assert_eq!(ql.p(), sampled.p());
        assert_eq!(qo.p(), sampled.p());
    }
}

#[test]
fn reversed_marching_is_also_admissible_and_close() {
    let grid = Grid2D::unit(6, 6, 2, Bc::Dirichlet).unwrap();
    let ops = galerkin(&grid);
    let f = Vortex::smooth();
    let fwd = llrr_project(&f, &grid).unwrap();
    let rev = llrr_project_with(&f, &grid, LlrrOptions { reversed: true }).unwrap();
    assert!(divergence_norm(&ops, DivergenceKind::Gfq, &rev) < 1e-12);
    let gap = fwd.max_abs_diff(&rev);
    assert!(
        gap > 0.0
            && gap
                < 5.0
                    * velocity_max_error(&grid, &fwd, &f).max(velocity_max_error(&grid, &rev, &f))
    );
}

#[test]
fn opt_is_an_orthogonal_projection() {
    let grid = Grid2D::unit(4, 4, 2, Bc::Dirichlet).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut random = || {
        let mut q = grid.zeros();
        q.data
            .iter_mut()
            .for_each(|x| *x = rng.random_range(-1.0..1.0));
        q
    };
    let (x0, y0) = (random(), random());
    let opts = OptOptions::default();
    let (px, _) = opt_project_state(&x0, &grid, &opts).unwrap();
    let (py, _) = opt_project_state(&y0, &grid, &opts).unwrap();
    let n = grid.n_nodes();
    // idempotent
    let (ppx, _) = opt_project_state(&px, &grid, &opts).unwrap();
    assert!(ppx.max_abs_diff(&px) < 1e-12);
    // residual orthogonal to the feasible set
    let r: Vec<f64> = x0.data[..2 * n]
        .iter()
        .zip(&px.data[..2 * n])
        .map(|(a, b)| a - b)
        .collect();
    assert!(dot(&r, &py.data[..2 * n]).abs() < 1e-11);
}

#[test]
fn iterative_and_dense_projection_agree() {
    let grid = Grid2D::unit(5, 5, 2, Bc::Dirichlet).unwrap();
    let f = Vortex::c6();
    let (dense, rd) = opt_project(&f, &grid, &OptOptions::default()).unwrap();
    let (iter, ri) = opt_project(
        &f,
        &grid,
        &OptOptions {
            iterative: true,
            ..OptOptions::default()
        },
    )
    .unwrap();
    assert!(rd.dense && !ri.dense && ri.iterations > 0);
    assert!(dense.max_abs_diff(&iter) < 1e-9);
}

/// `u = a x + b y`, `v = c x + d y`: a linear field with divergence `a + d`.
struct Linear([f64; 4]);

impl AnalyticField for Linear {
    fn eval_at(&self, x: f64, y: f64, _t: f64) -> [f64; 3] {
        let [a, b, c, d] = self.0;
        [a * x + b * y, c * x + d * y, 0.0]
    }
}

#[test]
fn divergence_of_linear_fields_is_exact() {
    for k in 1..=3 {
        let grid = Grid2D::unit(4, 3, k, Bc::Dirichlet).unwrap();
        let ops = galerkin(&grid);
        let q = sample_nodal(&Linear([0.3, 1.1, -2.0, -0.7]), &grid, 0.0);
        for kind in [DivergenceKind::Galerkin, DivergenceKind::Gfq] {
            let d = ops.nodal_divergence(kind, q.u(), q.v());
            assert!(d.iter().all(|x| (x + 0.4).abs() < 1e-12), "k={k} {kind:?}");
            assert!((divergence_norm(&ops, kind, &q) - 0.4).abs() < 1e-12);
        }
    }
}

#[test]
fn projections_reject_periodic_grids() {
    let grid = Grid2D::unit(4, 4, 1, Bc::Periodic).unwrap();
    assert!(llrr_project(CaseKind::VortexC6.field().as_ref(), &grid).is_err());
}

/// Stream function `ψ = x² y³ (1 − x)`: polynomial solenoidal data the line
/// quadrature integrates exactly.
struct PolyStream;

impl AnalyticField for PolyStream {
    fn eval_at(&self, x: f64, y: f64, _t: f64) -> [f64; 3] {
        let u = 3.0 * x * x * y * y * (1.0 - x);
        let v = -(2.0 * x - 3.0 * x * x) * y * y * y;
        [u, v, 1.0]
    }
}

#[test]
fn line_projection_of_polynomial_data_is_exactly_in_the_kernel() {
    for k in 1..=4 {
        let grid = Grid2D::unit(3, 4, k, Bc::Dirichlet).unwrap();
        let ops = galerkin(&grid);
        for reversed in [false, true] {
            let q = llrr_project_with(&PolyStream, &grid, LlrrOptions { reversed }).unwrap();
            assert!(
                divergence_norm(&ops, DivergenceKind::Gfq, &q) < 1e-13,
                "k={k}"
            );
        }
    }
}
