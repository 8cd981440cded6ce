use gfq_core::grid_ops::{compose, kron};
use gfq_core::symbols::*;
use gfq_core::{Bc, Grid2D, Line1D, OpKind, Operator1D, SchemeConfig, SchemeKind};
use nalgebra::DVector;

fn periodic(k: usize, cells: usize) -> Line1D {
    Line1D::new(cells, k, 0.0, 1.0, Bc::Periodic).unwrap()
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

const MODES: [f64; 4] = [0.37, 1.1, 2.3, 4.9];

#[test]
fn q1_closed_forms() {
    let line = periodic(1, 11);
    let h = line.dx();
    let sym = |op: &Operator1D| extract_symbol(op).unwrap();
    let d = sym(&Operator1D::assemble(OpKind::D, &line).unwrap());
    let s = sym(&Operator1D::assemble(OpKind::DXX, &line).unwrap());
    let di = sym(&Operator1D::gfq_product(OpKind::D, &line, false).unwrap());
    let si = sym(&Operator1D::gfq_product(OpKind::DXX, &line, false).unwrap());
    for th in MODES {
        let t = unit(th);
        let fd = (t * t - 1.0) / (t * 2.0 * h);
        let fs = -(t - 1.0).powi(2) / (t * h * h);
        assert!((d.eval(t)[(0, 0)] - fd).norm() < 1e-12 * fd.norm().max(1.0));
        assert!((s.eval(t)[(0, 0)] - fs).norm() < 1e-12 * fs.norm());
        let fdi = (t + 1.0).powi(2) / (t * 4.0);
        assert!((di.eval(t)[(0, 0)] - fdi).norm() < 1e-12);
        assert!((si.eval(t)[(0, 0)] + fd).norm() < 1e-12 * fd.norm().max(1.0));
    }
}

#[test]
fn compose_symbol_is_product() {
    for k in 1..=3 {
        let line = periodic(k, 12);
        let d = Operator1D::assemble(OpKind::D, &line).unwrap();
        let dx = Operator1D::assemble(OpKind::DX, &line).unwrap();
        let minv = Operator1D::assemble(OpKind::Mass, &line)
            .unwrap()
            .diagonal_inverse()
            .unwrap();
        let p = compose(&compose(&dx, &minv).unwrap(), &d).unwrap();
        let sp = extract_symbol(&p).unwrap();
        let (sd, sx, sm) = (
            extract_symbol(&d).unwrap(),
            extract_symbol(&dx).unwrap(),
            extract_symbol(&minv).unwrap(),
        );
        let prod = sx.mul(&sm).mul(&sd);
        for th in MODES {
            let diff = (sp.eval(unit(th)) - prod.eval(unit(th))).norm();
            assert!(diff < 1e-10 * prod.eval(unit(th)).norm(), "k={k}");
        }
    }
}

#[test]
fn symbol_matches_dense_periodic_operator() {
    // eigen-relation: A (t^j e_s) = t^j F(t) e_s on the Bloch wave t = e^{2πi m/N}
    let cells = 10;
    for k in 1..=3 {
        let line = periodic(k, cells);
        let op = Operator1D::z_operator(&line).unwrap();
        let a = op.to_dense().map(c);
        let f = extract_symbol(&op).unwrap();
        let t = unit(2.0 * std::f64::consts::PI * 3.0 / cells as f64);
        let ft = f.eval(t);
        for p in 0..k {
            let v = DVector::from_fn(cells * k, |idx, _| {
                let (j, s) = (idx / k, idx % k);
                if s == p {
                    t.powi(j as i32)
                } else {
                    c(0.0)
                }
            });
            let av = &a * &v;
            for s in 0..k {
                assert!((av[s] - ft[(s, p)]).norm() < 1e-9 * ft.norm().max(1.0));
            }
        }
    }
}

fn config(kind: SchemeKind, k: usize, cells: usize) -> SchemeConfig {
    SchemeConfig::new(
        kind,
        0.1,
        Grid2D::unit(cells, cells, k, Bc::Periodic).unwrap(),
    )
}

#[test]
fn q1_supg_gfq_involution() {
    let s = scheme_symbol(&config(SchemeKind::SupgGfq, 1, 11)).unwrap();
    for (a, b) in [(0.4, 1.3), (2.2, 5.1), (3.0, 0.9)] {
        let (tx, ty) = (unit(a), unit(b));
        let e = s.e.eval(tx, ty);
        let om = supg_gfq_q1_omega(&s, tx, ty).unwrap();
        assert!(left_residual(&om, &e) < 1e-13);
        let ix = s.integrator_x(tx).unwrap()[(0, 0)];
        let iy = s.integrator_y(ty).unwrap()[(0, 0)];
        let r = DVector::from_vec(vec![-ix, iy, c(0.0)]);
        assert!((&e * &r).norm() < 1e-12 * e.norm() * r.norm());
        let h = s.cfg.grid.h();
        let closed = (tx + 1.0) * h / ((tx - 1.0) * 2.0);
        assert!((ix - closed).norm() < 1e-12 * closed.norm());
    }
}

#[test]
fn q1_oss_gfq_involution() {
    let s = scheme_symbol(&config(SchemeKind::OssGfq, 1, 11)).unwrap();
    for (a, b) in [(0.4, 1.3), (2.2, 5.1), (3.0, 0.9)] {
        let (tx, ty) = (unit(a), unit(b));
        let e = s.e.eval(tx, ty);
        let v = oss_gfq_q1_vector(&s, tx, ty).unwrap();
        assert!(left_residual(&v, &e) < 1e-12);
    }
}

#[test]
fn generic_kernel_dims() {
    for k in 1..=3 {
        for kind in SchemeKind::ALL {
            let s = scheme_symbol(&config(kind, k, 11)).unwrap();
            let m = s.e.eval(unit(0.7), unit(2.9));
            let sv = singular_values(&m);
            let dim = kernel_dim(&sv, sv[0], KERNEL_TOL);
            let expected = match kind {
                SchemeKind::Galerkin => dim, // not asserted
                SchemeKind::SupgGfq | SchemeKind::OssGfq => k * k,
                SchemeKind::Supg | SchemeKind::Oss => (k - 1) * (k - 1),
            };
            assert_eq!(dim, expected, "{kind} k={k}");
        }
    }
}

#[test]
fn reduced_gfq_left_kernel() {
    for k in 1..=3 {
        for kind in [SchemeKind::SupgGfq, SchemeKind::OssGfq] {
            let s = scheme_symbol(&config(kind, k, 11)).unwrap();
            let r = s.reduced(unit(0.7), unit(2.9)).unwrap();
            assert_eq!(left_kernel_dim(&r, KERNEL_TOL), k * k, "{kind} k={k}");
        }
    }
}

#[test]
fn audit_q1_to_q4() {
    for k in 1..=4 {
        let r = kernel_rank_audit(k, 8).unwrap();
        assert_eq!(r.rank_dt, 8 * k - 1, "k={k}");
        assert_eq!(r.rank_dtx, 8 * k - 1, "k={k}");
        assert!(r.interface_residual < 1e-10, "k={k} {r:?}");
        assert!(r.dtx_kernel_const_dev < 1e-10, "k={k} {r:?}");
        assert_eq!(r.ker_d_full_square, 1);
        assert_eq!(r.ker_d_zero_trace, 2);
        assert!(r.stiffness_linear_residual < 1e-12);
        assert!(r.z_linear_residual < 1e-10, "{r:?}");
        assert!(r.z_asymmetry < 1e-12);
        assert!(r.z_min_eig_zero_trace > -1e-10, "{r:?}");
        assert!(r.z_w_ratio > 1e-6, "{r:?}");
    }
}

#[test]
fn spurious_2d_modes() {
    for k in 1..=3 {
        let (d, s, w) = zero_trace_derivative(k, 5).unwrap();
        let n = w.len();
        let one = DVector::from_element(n, 1.0);
        let dd = kron(&d, &d);
        let sd = kron(&s, &d);
        let ds = kron(&d, &s);
        let kv = |a: &DVector<f64>, b: &DVector<f64>| {
            DVector::from_fn(n * n, |i, _| a[i / n] * b[i % n])
        };
        for (a, b) in [(&one, &w), (&w, &one), (&w, &w)] {
            let m = kv(a, b);
            for op in [&dd, &sd, &ds] {
                assert!((op * &m).amax() < 1e-10 * op.amax() * m.amax(), "k={k}");
            }
        }
        // f ⊗ w with f outside ker D is not annihilated by D ⊗ S
        let f = DVector::from_fn(n, |i, _| ((i * i) as f64 * 0.37).sin());
        let m = kv(&f, &w);
        assert!((&ds * &m).amax() > 1e-6 * ds.amax() * m.amax());
    }
}
