use gfq_core::basis1d::{gauss_legendre, lobatto_rule, MAX_DEGREE};
use gfq_core::grid_ops::{compose, dense_assemble_tensor};
use gfq_core::{Bc, Line1D, OpKind, Operator1D, TensorOp};
use proptest::prelude::*;

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_prime(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (j, c)| acc * x + j as f64 * c)
}

fn poly_integral(coeffs: &[f64], a: f64, b: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c * (b.powi(j as i32 + 1) - a.powi(j as i32 + 1)) / (j + 1) as f64)
        .sum()
}

#[test]
fn lobatto_exact_to_degree_2k_minus_1() {
    for k in 1..=MAX_DEGREE {
        let r = lobatto_rule(k).unwrap();
        for j in 0..2 * k {
            let q: f64 = r
                .nodes
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(j as i32))
                .sum();
            assert!((q - 1.0 / (j + 1) as f64).abs() < 1e-13, "k={k} j={j}");
        }
        // the next monomial is not integrated exactly
        let j = 2 * k;
        let q: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * x.powi(j as i32))
            .sum();
        assert!((q - 1.0 / (j + 1) as f64).abs() > 1e-11, "k={k}");
    }
}

#[test]
fn gauss_legendre_beats_lobatto_by_two_degrees() {
    for n in 1..=8 {
        let (x, w) = gauss_legendre(n);
        for j in 0..2 * n {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(j as i32)).sum();
            assert!((q - 1.0 / (j + 1) as f64).abs() < 1e-13, "n={n} j={j}");
        }
    }
}

#[test]
fn mass_is_quadrature_weights() {
    // normalized by 1/Δx: Δx Σ m_i is the line length
    for k in 1..=4 {
        let line = Line1D::new(5, k, 0.0, 2.0, Bc::Dirichlet).unwrap();
        let m = line.mass_diag();
        let total: f64 = m.iter().sum::<f64>() * line.dx();
        assert!((total - 2.0).abs() < 1e-13);
        assert!(m.iter().all(|&w| w > 0.0));
    }
}

#[test]
fn derivative_matches_exact_integral_of_polynomial_derivative() {
    // summing the rows of D tests the partition of unity: Σ_i ∫ φ_i f' = f(L) − f(0)
    let coeffs = [0.3, -1.0, 0.7, 0.25, -0.4];
    for k in 1..=4 {
        let line = Line1D::new(6, k, 0.0, 1.0, Bc::Dirichlet).unwrap();
        let f: Vec<f64> = line
            .coords()
            .iter()
            .map(|&x| poly(&coeffs[..=k], x))
            .collect();
        let d = Operator1D::assemble(OpKind::D, &line).unwrap();
        let mut out = vec![0.0; f.len()];
        d.apply(&f, &mut out);
        let lhs: f64 = out.iter().sum::<f64>() * line.dx();
        let rhs = poly(&coeffs[..=k], 1.0) - poly(&coeffs[..=k], 0.0);
        assert!((lhs - rhs).abs() < 1e-12, "k={k}");
    }
}

#[test]
fn derivative_row_against_quadrature_oracle() {
    // (D f)_i Δx = ∫ φ_i f' for f in the discrete space, computed by GL quadrature
    let coeffs = [0.1, 0.4, -0.3, 0.9];
    for k in 1..=3 {
        let line = Line1D::new(4, k, 0.0, 1.0, Bc::Dirichlet).unwrap();
        let xs = line.coords();
        let f: Vec<f64> = xs.iter().map(|&x| poly(&coeffs[..=k], x)).collect();
        let d = Operator1D::assemble(OpKind::D, &line).unwrap();
        let mut out = vec![0.0; f.len()];
        d.apply(&f, &mut out);
        let rule = line.rule();
        let (gx, gw) = gauss_legendre(k + 2);
        let h = line.dx();
        let mut oracle = vec![0.0; f.len()];
        for i in 0..line.cells {
            let x0 = i as f64 * h;
            for p in 0..=k {
                let val: f64 = gx
                    .iter()
                    .zip(&gw)
                    .map(|(s, w)| {
                        let x = x0 + s * h;
                        w * h
                            * gfq_core::basis1d::lagrange_eval(&rule.nodes, p, *s)
                            * poly_prime(&coeffs[..=k], x)
                    })
                    .sum();
                oracle[line.node(i, p)] += val / h;
            }
        }
        for (a, b) in out.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-11, "k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn local_integrator_gives_exact_primitives() {
    // row (i, s) of I integrates from the left node of cell i to node s
    let coeffs = [0.2, -0.5, 1.5, 0.3, 0.05];
    for k in 1..=4 {
        let line = Line1D::new(5, k, 0.0, 1.0, Bc::Dirichlet).unwrap();
        let xs = line.coords();
        let f: Vec<f64> = xs.iter().map(|&x| poly(&coeffs[..=k], x)).collect();
        let integ = Operator1D::assemble(OpKind::I, &line).unwrap();
        let mut out = vec![0.0; f.len()];
        integ.apply(&f, &mut out);
        for i in 0..line.cells {
            let a = xs[line.node(i, 0)];
            for s in 1..=k {
                let r = line.node(i, s);
                let exact = poly_integral(&coeffs[..=k], a, xs[r]);
                assert!((out[r] - exact).abs() < 1e-13, "k={k} i={i} s={s}");
            }
        }
    }
}

#[test]
fn periodic_derivative_is_skew() {
    for k in 1..=4 {
        let line = Line1D::new(7, k, 0.0, 1.0, Bc::Periodic).unwrap();
        let d = Operator1D::assemble(OpKind::D, &line).unwrap().to_dense();
        assert!((&d + d.transpose()).amax() < 1e-12, "k={k}");
        let s = Operator1D::assemble(OpKind::DXX, &line).unwrap().to_dense();
        assert!((&s - s.transpose()).amax() < 1e-10, "k={k}");
    }
}

fn kind_strategy() -> impl Strategy<Value = OpKind> {
    prop_oneof![
        Just(OpKind::Mass),
        Just(OpKind::D),
        Just(OpKind::DX),
        Just(OpKind::DXX),
        Just(OpKind::I),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lazy_tensor_matches_dense(
        k in 1usize..=4,
        nx in 2usize..=5,
        ny in 2usize..=5,
        periodic in any::<bool>(),
        kx in kind_strategy(),
        ky in kind_strategy(),
        seed in prop::collection::vec(-1.0f64..1.0, 1..64),
    ) {
        let bc = if periodic { Bc::Periodic } else { Bc::Dirichlet };
        let lx = Line1D::new(nx, k, 0.0, 1.0, bc).unwrap();
        let ly = Line1D::new(ny, k, 0.0, 0.7, bc).unwrap();
        let ax = Operator1D::assemble(kx, &lx).unwrap();
        let by = Operator1D::assemble(ky, &ly).unwrap();
        let t = TensorOp::new(ax.clone(), by.clone());
        let n = t.len();
        let f: Vec<f64> = (0..n).map(|i| seed[i % seed.len()] * (1.0 + i as f64).sin()).collect();
        let mut lazy = vec![0.0; n];
        t.apply(&f, &mut lazy).unwrap();
        let dense = dense_assemble_tensor(&ax, &by).unwrap() * nalgebra::DVector::from_vec(f);
        let scale = dense.amax().max(1.0);
        for (a, b) in lazy.iter().zip(dense.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn compose_is_sequential_application(
        k in 1usize..=3,
        cells in 3usize..=6,
        periodic in any::<bool>(),
        ka in kind_strategy(),
        kb in kind_strategy(),
        vals in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let bc = if periodic { Bc::Periodic } else { Bc::Dirichlet };
        let line = Line1D::new(cells, k, 0.0, 1.0, bc).unwrap();
        let a = Operator1D::assemble(ka, &line).unwrap();
        let b = Operator1D::assemble(kb, &line).unwrap();
        let ab = compose(&a, &b).unwrap();
        let n = a.n();
        let f = &vals[..n];
        let (mut bf, mut abf, mut direct) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        b.apply(f, &mut bf);
        a.apply(&bf, &mut abf);
        ab.apply(f, &mut direct);
        let scale = abf.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (x, y) in abf.iter().zip(&direct) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn stiffness_and_derivative_kill_constants(k in 1usize..=6, cells in 2usize..=8, c in -5.0f64..5.0) {
        let line = Line1D::new(cells, k, 0.0, 1.0, Bc::Periodic).unwrap();
        let f = vec![c; line.n_nodes()];
        for kind in [OpKind::D, OpKind::DX, OpKind::DXX] {
            let op = Operator1D::assemble(kind, &line).unwrap();
            let mut out = vec![0.0; f.len()];
            op.apply(&f, &mut out);
            prop_assert!(out.iter().all(|x| x.abs() < 1e-10 * (1.0 + c.abs()) * cells as f64));
        }
    }
}
