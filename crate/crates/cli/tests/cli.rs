use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gfq(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfq"))
        .args(args)
        .env("GFQ_OUTPUT_ROOT", root)
        .output()
        .expect("spawn gfq")
}

fn error_category(out: &Output) -> String {
    let line = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(line.trim()).expect("machine-readable error");
    v["category"].as_str().unwrap().to_string()
}

fn run_dir(out: &Output) -> std::path::PathBuf {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap().trim().into()
}

#[test]
fn missing_required_flag_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gfq(
        &["run", "--scheme", "supg", "--K", "1", "--N", "4"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_category(&out), "config");
}

#[test]
fn range_validation() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &[
            "run", "--case", "oblique", "--scheme", "supg", "--K", "9", "--N", "4",
        ][..],
        &[
            "run", "--case", "oblique", "--scheme", "supg", "--K", "1", "--N", "2000",
        ][..],
        &[
            "run", "--case", "oblique", "--scheme", "supg", "--K", "1", "--N", "4", "--alpha", "-1",
        ][..],
        &[
            "run", "--case", "nowhere", "--scheme", "supg", "--K", "1", "--N", "4",
        ][..],
        &[
            "symbols",
            "--scheme",
            "supg",
            "--K",
            "1",
            "--audit",
            "involution",
        ][..],
        &["no-such-command"][..],
    ] {
        let out = gfq(args, tmp.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_category(&out), "config", "{args:?}");
    }
}

#[test]
fn blow_up_is_instability_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gfq(
        &[
            "run", "--case", "oblique", "--scheme", "galerkin", "--K", "1", "--N", "5", "--cfl",
            "20", "--T", "1000",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_category(&out), "instability");
}

#[test]
fn run_writes_named_artifacts_and_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gfq(
        &[
            "run", "--case", "riemann", "--scheme", "supg_gfq", "--K", "2", "--N", "10", "--T",
            "0.1", "--state",
        ],
        tmp.path(),
    );
    let dir = run_dir(&out);
    assert!(dir.starts_with(tmp.path()));
    for name in [
        "config.toml",
        "summary.json",
        "riemann_supg_gfq_ord3_N0010.csv",
        "riemann_supg_gfq_ord3_N0010_profile.csv",
        "riemann_supg_gfq_ord3_N0010_state.csv",
    ] {
        assert!(dir.join(name).is_file(), "{name}");
    }
    let cfg: toml::Table =
        toml::from_str(&fs::read_to_string(dir.join("config.toml")).unwrap()).unwrap();
    let run = cfg["run"].as_table().unwrap();
    assert_eq!(run["k"].as_integer(), Some(2));
    assert_eq!(run["m"].as_integer(), Some(2));
    assert_eq!(run["p"].as_integer(), Some(3));
    let csv = fs::read_to_string(dir.join("riemann_supg_gfq_ord3_N0010.csv")).unwrap();
    assert!(csv.starts_with("t,err u,err v,err p,div galerkin,div gfq,drift,energy\n"));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["riemann_l1"].as_f64().unwrap() > 0.0);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        "[run]\ncase = \"vortex_c6\"\nscheme = \"oss_gfq\"\nk = 1\nn = 4\nt_final = 0.05\nalpha = 0.2\n\n[symbols]\nk = 3\n",
    )
    .unwrap();
    let out = gfq(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--K",
            "2",
            "--out",
            tmp.path().join("o").to_str().unwrap(),
        ],
        tmp.path(),
    );
    let dir = run_dir(&out);
    assert_eq!(dir, tmp.path().join("o"));
    let echoed: toml::Table =
        toml::from_str(&fs::read_to_string(dir.join("config.toml")).unwrap()).unwrap();
    let run = echoed["run"].as_table().unwrap();
    assert_eq!(run["k"].as_integer(), Some(2));
    assert_eq!(run["alpha"].as_float(), Some(0.2));
    assert_eq!(run["scheme"].as_str(), Some("oss_gfq"));
    assert!(dir.join("vortex_c6_oss_gfq_ord3_N0004.csv").is_file());
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[run]\ncase = \"oblique\"\ndegree = 2\n").unwrap();
    let out = gfq(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn symbol_audit_is_deterministic_and_separates_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "symbols".to_string(),
            "--scheme".into(),
            "supg".into(),
            "--K".into(),
            "1".into(),
            "--audit".into(),
            "det".into(),
            "--samples".into(),
            "20".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            tmp.path().join(out).to_string_lossy().into_owned(),
        ]
    };
    let run = |out: &str| {
        let a = args(out);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        run_dir(&gfq(&refs, tmp.path()))
    };
    let (a, b) = (run("a"), run("b"));
    let name = "symbols_supg_ord2_det.csv";
    assert_eq!(
        fs::read(a.join(name)).unwrap(),
        fs::read(b.join(name)).unwrap()
    );
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert!(summary["min_generic_det_rel"].as_f64().unwrap() > 1e-6);
    assert!(summary["max_axis_det_rel"].as_f64().unwrap() < 1e-12);
}

#[test]
fn converge_table_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gfq(
        &[
            "converge",
            "--case",
            "oblique",
            "--scheme",
            "supg,supg_gfq",
            "--K",
            "1",
            "--Ns",
            "8,16",
            "--T",
            "0.05",
            "--jobs",
            "2",
        ],
        tmp.path(),
    );
    let dir = run_dir(&out);
    for scheme in ["supg", "supg_gfq"] {
        let text =
            fs::read_to_string(dir.join(format!("oblique_{scheme}_ord2_N0016.csv"))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "N,err u,err v,err p,ord u,ord v,ord p");
        assert_eq!(lines.len(), 3);
        // 17 significant digits in every numeric cell
        let cell = lines[2].split(',').nth(1).unwrap();
        assert_eq!(cell.split('e').next().unwrap().replace('.', "").len(), 17);
    }
}

#[test]
fn kernel_audit_reports_full_rank_minus_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_dir(&gfq(&["kernel-audit", "--cells", "6"], tmp.path()));
    let reports: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    for r in reports.as_array().unwrap() {
        assert_eq!(r["rank_dt"], r["expected_rank"]);
        assert_eq!(r["rank_dtx"], r["expected_rank"]);
    }
}

#[test]
fn projection_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_dir(&gfq(
        &["project", "--case", "vortex_c6", "--K", "2", "--Ns", "4,8"],
        tmp.path(),
    ));
    assert!(dir.join("vortex_c6_projection_ord3_N0008.csv").is_file());
    assert!(dir.join("vortex_c6_sampled_ord3_N0008.csv").is_file());
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["max_div_opt"].as_f64().unwrap() < 1e-10);
}
