use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gfq_core::cases::CaseKind;
use gfq_core::symbols::{scheme_symbol, unit};
use gfq_core::wellprep::{llrr_project, sample_nodal};
use gfq_core::{build_scheme, Bc, DecStepper, Grid2D, SchemeConfig, SchemeKind};

fn apply_e(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_e");
    for (k, n) in [(1, 64), (2, 32), (3, 20), (4, 16)] {
        let grid = Grid2D::unit(n, n, k, Bc::Periodic).unwrap();
        for kind in [SchemeKind::Supg, SchemeKind::SupgGfq, SchemeKind::OssGfq] {
            let ops = build_scheme(SchemeConfig::new(kind, 0.1, grid.clone())).unwrap();
            let q = sample_nodal(CaseKind::Oblique.field().as_ref(), &grid, 0.0);
            let mut out = grid.zeros();
            let mut ws = ops.workspace();
            group.bench_with_input(
                BenchmarkId::new(kind.name(), format!("K{k}_N{n}")),
                &q,
                |b, q| b.iter(|| ops.apply_e(black_box(q), &mut out, &mut ws)),
            );
        }
    }
    group.finish();
}

fn dec_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("dec_step");
    for (k, n) in [(1, 32), (2, 16), (3, 10)] {
        let grid = Grid2D::unit(n, n, k, Bc::Dirichlet).unwrap();
        let ops = build_scheme(SchemeConfig::new(SchemeKind::SupgGfq, 0.1, grid.clone())).unwrap();
        let mut stepper = DecStepper::new(&ops, (k + 2) / 2, k + 1).unwrap();
        let mut q = sample_nodal(CaseKind::VortexSmooth.field().as_ref(), &grid, 0.0);
        let dt = 0.1 * grid.h() / (2 * k + 1) as f64;
        group.bench_function(format!("supg_gfq_K{k}_N{n}"), |b| {
            b.iter(|| stepper.step(&mut q, dt).unwrap())
        });
    }
    group.finish();
}

fn symbol_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("symbol_eval");
    for k in 1..=3 {
        let grid = Grid2D::unit(9, 9, k, Bc::Periodic).unwrap();
        let sym = scheme_symbol(&SchemeConfig::new(SchemeKind::SupgGfq, 0.1, grid)).unwrap();
        group.bench_function(format!("supg_gfq_K{k}"), |b| {
            b.iter(|| sym.e.eval(black_box(unit(0.7)), black_box(unit(2.1))))
        });
    }
    group.finish();
}

fn projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("llrr_project");
    for (k, n) in [(1, 32), (2, 16), (3, 10)] {
        let grid = Grid2D::unit(n, n, k, Bc::Dirichlet).unwrap();
        let field = CaseKind::VortexC6.field();
        group.bench_function(format!("K{k}_N{n}"), |b| {
            b.iter(|| llrr_project(field.as_ref(), &grid).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, apply_e, dec_step, symbol_eval, projection);
criterion_main!(benches);
