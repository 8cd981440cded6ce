//! The five subcommands. Each resolves its settings, creates a run directory,
//! echoes the resolved configuration and writes CSV/JSON artifacts.

use std::f64::consts::TAU;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gfq_core::cases::{
    convergence_study, divergence_study, eoc, projection_study, riemann_profile, run_case,
    CaseKind, ConvergenceRow, ConvergenceSpec, RunSpec, OBLIQUE_REFERENCE_TIME,
};
use gfq_core::symbols::{
    det_scale, kernel_dim, kernel_rank_audit, left_kernel_dim, left_residual, oss_gfq_q1_vector,
    scheme_symbol, singular_values, supg_gfq_q1_omega, torus_kernel_scan, unit, KERNEL_TOL,
};
use gfq_core::{Bc, Grid2D, SchemeConfig, SchemeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    check_alpha, check_cells, check_degree, check_time, dec_config, parse_case, parse_init,
    parse_scheme, parse_schemes, run_dir, Settings,
};
use crate::error::CliError;
use crate::output::{artifact_stem, fmt17, RunDir};

pub const DEFAULT_ALPHA: f64 = 0.1;

fn alpha_of(s: &Settings) -> Result<f64, CliError> {
    check_alpha(s.alpha.unwrap_or(DEFAULT_ALPHA))
}

fn default_time(case: CaseKind) -> f64 {
    match case {
        CaseKind::Oblique => OBLIQUE_REFERENCE_TIME,
        CaseKind::Riemann => 0.4,
        _ => 1.0,
    }
}

fn mesh_list(s: &Settings) -> Result<Vec<usize>, CliError> {
    let ns = Settings::require(&s.ns, "ns")?;
    if ns.is_empty() {
        return Err(CliError::Config("'ns' must list at least one mesh".into()));
    }
    ns.into_iter().map(check_cells).collect()
}

#[derive(Debug, Serialize)]
struct RunResolved {
    case: CaseKind,
    scheme: SchemeKind,
    k: usize,
    n: usize,
    alpha: f64,
    t_final: f64,
    init: String,
    cfl: f64,
    m: usize,
    p: usize,
    cadence: usize,
    seed: u64,
    state: bool,
}

pub fn run(s: Settings, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let case = parse_case(&Settings::require(&s.case, "case")?)?;
    let scheme = parse_scheme(&Settings::require(&s.scheme, "scheme")?)?;
    let k = check_degree(Settings::require(&s.k, "k")?)?;
    let n = check_cells(Settings::require(&s.n, "n")?)?;
    let alpha = alpha_of(&s)?;
    let t_final = check_time(s.t_final.unwrap_or(default_time(case)))?;
    let init = parse_init(s.init.as_deref().unwrap_or("sample"))?;
    let dec = dec_config(&s)?;
    let (m, p) = dec.resolve(k);
    let resolved = RunResolved {
        case,
        scheme,
        k,
        n,
        alpha,
        t_final,
        init: init.to_string(),
        cfl: dec.cfl,
        m,
        p,
        cadence: s.cadence.unwrap_or(100).max(1),
        seed: s.seed.unwrap_or(0),
        state: s.state.unwrap_or(false),
    };
    let stem = artifact_stem(case.name(), scheme.name(), k, n);
    let mut dir = RunDir::create(run_dir(out, &format!("run_{stem}")))?;
    dir.write_config("run", &resolved)?;

    let output = run_case(&RunSpec {
        case,
        scheme,
        k,
        n,
        alpha,
        t_final,
        init,
        dec,
        cadence: resolved.cadence,
    })?;
    let rows: Vec<Vec<String>> = output
        .history
        .iter()
        .map(|r| {
            [
                r.t,
                r.err_u,
                r.err_v,
                r.err_p,
                r.div_galerkin,
                r.div_gfq,
                r.drift,
                r.energy,
            ]
            .map(fmt17)
            .to_vec()
        })
        .collect();
    dir.write_csv(
        &format!("{stem}.csv"),
        &[
            "t",
            "err u",
            "err v",
            "err p",
            "div galerkin",
            "div gfq",
            "drift",
            "energy",
        ],
        &rows,
    )?;

    let mut summary = json!({
        "steps": output.steps,
        "dt": output.dt,
        "final": output.history.last(),
    });
    if case == CaseKind::Riemann && t_final > 0.0 {
        let profile = riemann_profile(&output.grid, &output.last, t_final)?;
        let rows: Vec<Vec<String>> = profile
            .samples
            .iter()
            .map(|&(r, v, e)| vec![fmt17(r), fmt17(v), fmt17(e)])
            .collect();
        dir.write_csv(
            &format!("{stem}_profile.csv"),
            &["r", "v", "v exact"],
            &rows,
        )?;
        summary["riemann_l1"] = json!(profile.l1);
    }
    if resolved.state {
        write_state(&mut dir, &stem, &output.grid, &output.last)?;
    }
    dir.write_json("summary.json", &summary)?;
    Ok(dir.path().to_path_buf())
}

fn write_state(
    dir: &mut RunDir,
    stem: &str,
    grid: &Grid2D,
    q: &gfq_core::StateField,
) -> Result<(), CliError> {
    let xs = grid.x.coords();
    let ys = grid.y.coords();
    let mut rows = Vec::with_capacity(q.n());
    for (a, &x) in xs.iter().enumerate() {
        for (b, &y) in ys.iter().enumerate() {
            let i = a * ys.len() + b;
            rows.push([x, y, q.u()[i], q.v()[i], q.p()[i]].map(fmt17).to_vec());
        }
    }
    dir.write_csv(
        &format!("{stem}_state.csv"),
        &["x", "y", "u", "v", "p"],
        &rows,
    )
}

#[derive(Debug, Serialize)]
struct ConvergeResolved {
    case: CaseKind,
    schemes: Vec<SchemeKind>,
    k: usize,
    ns: Vec<usize>,
    alpha: f64,
    t_final: f64,
    init: String,
    cfl: f64,
    m: usize,
    p: usize,
    jobs: usize,
    seed: u64,
}

pub fn converge(s: Settings, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let case = parse_case(&Settings::require(&s.case, "case")?)?;
    let schemes = parse_schemes(&Settings::require(&s.scheme, "scheme")?)?;
    let k = check_degree(Settings::require(&s.k, "k")?)?;
    let ns = mesh_list(&s)?;
    let alpha = alpha_of(&s)?;
    let t_final = check_time(s.t_final.unwrap_or(default_time(case)))?;
    let init = parse_init(s.init.as_deref().unwrap_or("sample"))?;
    let dec = dec_config(&s)?;
    let (m, p) = dec.resolve(k);
    let jobs = s.jobs.unwrap_or(1).max(1);
    let resolved = ConvergeResolved {
        case,
        schemes: schemes.clone(),
        k,
        ns: ns.clone(),
        alpha,
        t_final,
        init: init.to_string(),
        cfl: dec.cfl,
        m,
        p,
        jobs,
        seed: s.seed.unwrap_or(0),
    };
    let finest = *ns.iter().max().expect("non-empty");
    let mut dir = RunDir::create(run_dir(
        out,
        &format!("converge_{}_ord{}", case.name(), k + 1),
    ))?;
    dir.write_config("converge", &resolved)?;

    let spec_for = |scheme| ConvergenceSpec {
        case,
        scheme,
        k,
        ns: ns.clone(),
        alpha,
        t_final,
        init,
        dec,
    };
    let results = run_parallel(&schemes, jobs, |&scheme| {
        convergence_study(&spec_for(scheme))
    })?;
    let mut summary = serde_json::Map::new();
    for (scheme, rows) in schemes.iter().zip(results) {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r: &ConvergenceRow| {
                let mut row = vec![r.n.to_string()];
                row.extend(r.err.iter().chain(&r.ord).map(|&x| fmt17(x)));
                row
            })
            .collect();
        dir.write_csv(
            &format!(
                "{}.csv",
                artifact_stem(case.name(), scheme.name(), k, finest)
            ),
            &["N", "err u", "err v", "err p", "ord u", "ord v", "ord p"],
            &table,
        )?;
        summary.insert(scheme.name().into(), json!(rows.last().map(|r| r.ord)));
    }
    dir.write_json("summary.json", &json!({ "final_orders": summary }))?;
    Ok(dir.path().to_path_buf())
}

/// Map `f` over `items` on at most `jobs` threads, keeping the input order.
fn run_parallel<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> gfq_core::Result<R> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<gfq_core::Result<R>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("result slot")
                .expect("every item visited")
                .map_err(CliError::from)
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SymbolsResolved {
    scheme: SchemeKind,
    k: usize,
    n: usize,
    alpha: f64,
    audit: String,
    samples: usize,
    seed: u64,
}

pub fn symbols(s: Settings, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let scheme = parse_scheme(&Settings::require(&s.scheme, "scheme")?)?;
    let k = check_degree(Settings::require(&s.k, "k")?)?;
    let n = check_cells(s.n.unwrap_or(16))?;
    let alpha = alpha_of(&s)?;
    let audit = s.audit.clone().unwrap_or_else(|| "det".into());
    let resolved = SymbolsResolved {
        scheme,
        k,
        n,
        alpha,
        audit: audit.clone(),
        samples: s.samples.unwrap_or(100).max(1),
        seed: s.seed.unwrap_or(0),
    };
    if !matches!(audit.as_str(), "det" | "torus" | "involution") {
        return Err(CliError::Config(format!(
            "unknown audit '{audit}' (expected det, torus or involution)"
        )));
    }
    if audit == "involution" && !scheme.is_gfq() {
        return Err(CliError::Config(
            "the involution audit needs a GFq scheme".into(),
        ));
    }
    let grid = Grid2D::unit(n, n, k, Bc::Periodic)?;
    let sym = scheme_symbol(&SchemeConfig::new(scheme, alpha, grid))?;
    let mut dir = RunDir::create(run_dir(
        out,
        &format!("symbols_{}_ord{}_{audit}", scheme.name(), k + 1),
    ))?;
    dir.write_config("symbols", &resolved)?;
    let stem = format!("symbols_{}_ord{}_{audit}", scheme.name(), k + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(resolved.seed);
    let mut draw = || rng.random_range(0.05..TAU - 0.05);

    match audit.as_str() {
        "det" => {
            // generic modes, then modes on the axes t_x = 1 and t_y = 1
            let mut modes: Vec<(&str, f64, f64)> = Vec::new();
            for _ in 0..resolved.samples {
                modes.push(("generic", draw(), draw()));
            }
            for _ in 0..resolved.samples.div_ceil(2) {
                modes.push(("axis", 0.0, draw()));
                modes.push(("axis", draw(), 0.0));
            }
            let mut rows = Vec::new();
            let (mut min_generic, mut max_axis) = (f64::INFINITY, 0.0f64);
            for (kind, a, b) in modes {
                let e = sym.e.eval(unit(a), unit(b));
                let det = e.clone().lu().determinant().norm();
                let scale = det_scale(&e);
                let rel = det / scale;
                let sv = singular_values(&e);
                let dim = kernel_dim(&sv, sv[0], KERNEL_TOL);
                if kind == "generic" {
                    min_generic = min_generic.min(rel);
                } else {
                    max_axis = max_axis.max(rel);
                }
                let mut row = vec![kind.to_string()];
                row.extend([a, b, det, scale, rel].map(fmt17));
                row.push(dim.to_string());
                rows.push(row);
            }
            dir.write_csv(
                &format!("{stem}.csv"),
                &[
                    "mode",
                    "theta x",
                    "theta y",
                    "det abs",
                    "scale",
                    "det rel",
                    "kernel dim",
                ],
                &rows,
            )?;
            dir.write_json(
                "summary.json",
                &json!({
                    "audit": "det",
                    "min_generic_det_rel": min_generic,
                    "max_axis_det_rel": max_axis,
                }),
            )?;
        }
        "torus" => {
            let scan = torus_kernel_scan(&sym.e, n.min(64), n.min(64))?;
            let rows: Vec<Vec<String>> = scan
                .iter()
                .map(|m| {
                    vec![
                        m.a.to_string(),
                        m.b.to_string(),
                        m.dim.to_string(),
                        fmt17(m.sigma_max),
                    ]
                })
                .collect();
            dir.write_csv(
                &format!("{stem}.csv"),
                &["a", "b", "kernel dim", "sigma max"],
                &rows,
            )?;
            let total: usize = scan.iter().map(|m| m.dim).sum();
            dir.write_json(
                "summary.json",
                &json!({ "audit": "torus", "kernel_dim_total": total }),
            )?;
        }
        _ => {
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            let mut dims = Vec::new();
            for _ in 0..resolved.samples {
                let (a, b) = (draw(), draw());
                let (tx, ty) = (unit(a), unit(b));
                let residual = if k == 1 {
                    let omega = match scheme {
                        SchemeKind::SupgGfq => supg_gfq_q1_omega(&sym, tx, ty)?,
                        _ => oss_gfq_q1_vector(&sym, tx, ty)?,
                    };
                    left_residual(&omega, &sym.e.eval(tx, ty))
                } else {
                    f64::NAN
                };
                let dim = left_kernel_dim(&sym.reduced(tx, ty)?, KERNEL_TOL);
                if residual.is_finite() {
                    worst = worst.max(residual);
                }
                dims.push(dim);
                let mut row: Vec<String> = [a, b, residual].map(fmt17).to_vec();
                row.push(dim.to_string());
                rows.push(row);
            }
            dir.write_csv(
                &format!("{stem}.csv"),
                &["theta x", "theta y", "residual", "reduced left kernel dim"],
                &rows,
            )?;
            dims.sort_unstable();
            dims.dedup();
            dir.write_json(
                "summary.json",
                &json!({
                    "audit": "involution",
                    "max_residual": if k == 1 { json!(worst) } else { json!(null) },
                    "reduced_left_kernel_dims": dims,
                }),
            )?;
        }
    }
    Ok(dir.path().to_path_buf())
}

#[derive(Debug, Serialize)]
struct ProjectResolved {
    case: CaseKind,
    k: usize,
    ns: Vec<usize>,
    seed: u64,
}

pub fn project(s: Settings, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let case = parse_case(s.case.as_deref().unwrap_or("vortex_c6"))?;
    if !matches!(case, CaseKind::VortexC6 | CaseKind::VortexSmooth) {
        return Err(CliError::Config(format!(
            "projection needs a vortex case, got '{case}'"
        )));
    }
    let k = check_degree(Settings::require(&s.k, "k")?)?;
    let ns = mesh_list(&s)?;
    let resolved = ProjectResolved {
        case,
        k,
        ns: ns.clone(),
        seed: s.seed.unwrap_or(0),
    };
    let finest = *ns.iter().max().expect("non-empty");
    let mut dir = RunDir::create(run_dir(
        out,
        &format!("project_{}_ord{}", case.name(), k + 1),
    ))?;
    dir.write_config("project", &resolved)?;

    let proj = projection_study(case, k, &ns)?;
    let err_l: Vec<f64> = proj.iter().map(|r| r.err_llrr).collect();
    let err_o: Vec<f64> = proj.iter().map(|r| r.err_opt).collect();
    let (ord_l, ord_o) = (orders(&err_l, &ns), orders(&err_o, &ns));
    let rows: Vec<Vec<String>> = proj
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![r.n.to_string()];
            row.extend(
                [
                    r.err_llrr, r.err_opt, r.div_llrr, r.div_opt, ord_l[i], ord_o[i],
                ]
                .map(fmt17),
            );
            row
        })
        .collect();
    dir.write_csv(
        &format!(
            "{}.csv",
            artifact_stem(case.name(), "projection", k, finest)
        ),
        &[
            "N", "err llrr", "err opt", "div llrr", "div opt", "ord llrr", "ord opt",
        ],
        &rows,
    )?;

    let div = divergence_study(case, k, &ns)?;
    let dg: Vec<f64> = div.iter().map(|r| r.div_galerkin).collect();
    let df: Vec<f64> = div.iter().map(|r| r.div_gfq).collect();
    let (ord_g, ord_f) = (orders(&dg, &ns), orders(&df, &ns));
    let rows: Vec<Vec<String>> = div
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![r.n.to_string()];
            row.extend([r.div_galerkin, r.div_gfq, ord_g[i], ord_f[i]].map(fmt17));
            row
        })
        .collect();
    dir.write_csv(
        &format!("{}.csv", artifact_stem(case.name(), "sampled", k, finest)),
        &["N", "div galerkin", "div gfq", "ord galerkin", "ord gfq"],
        &rows,
    )?;
    dir.write_json(
        "summary.json",
        &json!({ "max_div_llrr": proj.iter().map(|r| r.div_llrr).fold(0.0, f64::max),
                 "max_div_opt": proj.iter().map(|r| r.div_opt).fold(0.0, f64::max) }),
    )?;
    Ok(dir.path().to_path_buf())
}

/// Orders against the previous mesh, NaN in the first slot.
fn orders(errors: &[f64], ns: &[usize]) -> Vec<f64> {
    std::iter::once(f64::NAN).chain(eoc(errors, ns)).collect()
}

#[derive(Debug, Serialize)]
struct AuditResolved {
    degrees: Vec<usize>,
    cells: usize,
    seed: u64,
}

pub fn kernel_audit(s: Settings, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let degrees = match s.k {
        Some(k) => vec![k],
        None => vec![1, 2, 3, 4],
    };
    let cells = s.cells.unwrap_or(8);
    let resolved = AuditResolved {
        degrees: degrees.clone(),
        cells,
        seed: s.seed.unwrap_or(0),
    };
    let mut dir = RunDir::create(run_dir(out, &format!("kernel_audit_cells{cells:02}")))?;
    dir.write_config("kernel-audit", &resolved)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for k in degrees {
        let r = kernel_rank_audit(k, cells)?;
        let mut row = vec![
            k.to_string(),
            (cells * k - 1).to_string(),
            r.rank_dt.to_string(),
            r.rank_dtx.to_string(),
        ];
        row.extend(
            [
                r.interface_residual,
                r.stiffness_linear_residual,
                r.z_linear_residual,
                r.z_asymmetry,
                r.z_min_eig_zero_trace,
                r.z_w_ratio,
            ]
            .map(fmt17),
        );
        rows.push(row);
        reports.push(json!({
            "k": k,
            "expected_rank": cells * k - 1,
            "rank_dt": r.rank_dt,
            "rank_dtx": r.rank_dtx,
            "interface_residual": r.interface_residual,
            "ker_d_full_square": r.ker_d_full_square,
            "ker_d_zero_trace": r.ker_d_zero_trace,
            "z_linear_residual": r.z_linear_residual,
            "z_min_eig_zero_trace": r.z_min_eig_zero_trace,
            "z_w_ratio": r.z_w_ratio,
        }));
    }
    dir.write_csv(
        &format!("kernel_audit_cells{cells:02}.csv"),
        &[
            "K",
            "expected rank",
            "rank dt",
            "rank dtx",
            "interface residual",
            "stiffness linear residual",
            "z linear residual",
            "z asymmetry",
            "z min eig",
            "z w ratio",
        ],
        &rows,
    )?;
    dir.write_json("summary.json", &reports)?;
    Ok(dir.path().to_path_buf())
}
