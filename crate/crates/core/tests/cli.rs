use std::path::Path;
use std::process::{Command, Output};

use fqhe_core::report::parse_report;

fn fqhe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fqhe")).args(args).env_remove("FQHE_THREADS").output().expect("spawn fqhe")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn without_timing(report: &str) -> String {
    report.lines().filter(|l| !l.starts_with("timing = ")).collect::<Vec<_>>().join("\n")
}

#[test]
fn gram_example_matches_closed_form() {
    let o = fqhe(&["gram", "--k", "3", "--tau", "0+1i", "--xi-a", "0.2", "--xi-b", "0.1", "--grid", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = parse_report(&stdout(&o)).unwrap();
    let g = &r.matrices["gram"];
    assert_eq!(g.shape(), (3, 3));
    let expected = (1.0f64 / 6.0).sqrt() * (2.0 * std::f64::consts::PI * 0.04 / 3.0).exp();
    assert!((r.real("closed_form.diagonal").unwrap() - expected).abs() < 1e-15);
    for p in 0..3 {
        assert!((g[(p, p)].re - expected).abs() < 1e-9);
    }
    assert!(r.real("results.off_diagonal_max").unwrap() < 1e-9);
    assert_eq!(r.get("results.evaluations"), Some("4096"));
    assert_eq!(r.get("verdicts.overall"), Some("PASS"));
    assert!(r.get("timing").unwrap().starts_with("started "));
}

#[test]
fn wen_validate_examples() {
    let o = fqhe(&["wen-validate", "--K", "2 1; 1 2", "--n", "1 1"]);
    assert_eq!(o.status.code(), Some(0));
    let r = parse_report(&stdout(&o)).unwrap();
    assert_eq!(r.get("datum.d"), Some("3"));
    assert_eq!(r.get("datum.delta"), Some("3"));
    assert_eq!(r.get("datum.cyclic"), Some("true"));
    assert_eq!(r.get("datum.pi"), Some("0 0; 1/3 1/3; 2/3 2/3"));

    let o = fqhe(&["wen-validate", "--K", "2 0; 0 3", "--n", "1 1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mixes even and odd"));
    assert!(o.stdout.is_empty());
}

#[test]
fn exit_codes() {
    assert_eq!(fqhe(&["--help"]).status.code(), Some(0));
    assert_eq!(fqhe(&["--version"]).status.code(), Some(0));
    let o = fqhe(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(fqhe(&["gram"]).status.code(), Some(64), "missing --k");
    assert_eq!(fqhe(&["gram", "--k", "x"]).status.code(), Some(64));
    // Validation failures.
    assert_eq!(fqhe(&["norm", "--backend", "qmc"]).status.code(), Some(2), "qmc without seed");
    assert_eq!(fqhe(&["gram", "--k", "0"]).status.code(), Some(2));
    assert_eq!(fqhe(&["gram", "--k", "2", "--tau", "0-1i"]).status.code(), Some(2));
    assert_eq!(fqhe(&["kvw", "--K", "2 1; 2 2", "--n", "1 1"]).status.code(), Some(2));
    // Numerical failures: a field grid too coarse for the Richardson check,
    // and a failed verdict.
    let o = fqhe(&["curvature", "--field-model", "one-particle", "--k", "1", "--field-grid", "8"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("too coarse"));
    let o = fqhe(&["gram", "--k", "2", "--grid", "4", "--check-tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(parse_report(&stdout(&o)).unwrap().get("verdicts.overall"), Some("FAIL"));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_fqhe")).args(["gram", "--k", "1", "--grid", "8"]).env("FQHE_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(64));
    let o = Command::new(env!("CARGO_BIN_EXE_fqhe")).args(["gram", "--k", "1", "--grid", "8"]).env("FQHE_THREADS", "2").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_and_flags_are_equivalent() {
    let dir = tempfile::tempdir().unwrap();
    let out_cfg = dir.path().join("cfg.txt");
    let cfg = write(
        dir.path(),
        "exp.toml",
        &format!(
            "model = \"laughlin\"\n[torus]\nre = 0.0\nim = 1.0\n[model_parameters]\nm = 2\nn = 2\nxi_a = 0.1\n\
             [integration]\nbackend = \"qmc\"\nsamples = 4096\nseed = 9\nreplicates = 4\n[output]\npath = {:?}\n",
            out_cfg.to_str().unwrap()
        ),
    );
    let o = fqhe(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty(), "report goes to the configured path");

    let out_flags = dir.path().join("flags.txt");
    let o = fqhe(&[
        "norm", "--state", "hr", "--tau", "0+1i", "--m", "2", "--n", "2", "--xi-a", "0.1", "--backend", "qmc", "--samples", "4096",
        "--seed", "9", "--replicates", "4", "--out", out_flags.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read_to_string(&out_cfg).unwrap();
    let b = std::fs::read_to_string(&out_flags).unwrap();
    assert_eq!(without_timing(&a), without_timing(&b));
    assert!(a.contains("matrix gram 2x2"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", "command = \"gram\"\nk = 2\ngrid = 16\nxi_a = 0.25\n");
    let r = parse_report(&stdout(&fqhe(&["--config", &cfg, "--k", "3"]))).unwrap();
    assert_eq!(r.get("inputs.k"), Some("3"));
    assert_eq!(r.get("inputs.grid"), Some("16"));
    assert_eq!(r.real("inputs.xi_a"), Some(0.25));
    // An explicit subcommand on the command line also works with a config.
    let r = parse_report(&stdout(&fqhe(&["gram", "--config", &cfg]))).unwrap();
    assert_eq!(r.get("inputs.k"), Some("2"));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "k = [\n");
    assert_eq!(fqhe(&["--config", &cfg]).status.code(), Some(64));
    let cfg = write(dir.path(), "nomodel.toml", "k = 2\n");
    assert_eq!(fqhe(&["--config", &cfg]).status.code(), Some(64));
    assert_eq!(fqhe(&["--config", "/nonexistent/x.toml"]).status.code(), Some(64));
}

#[test]
fn seeded_runs_are_byte_identical_modulo_timing() {
    let args = ["kvw", "--K", "3", "--n", "2", "--xi-a", "0.2", "--backend", "qmc", "--samples", "2048", "--seed", "5", "--replicates", "4"];
    let a = fqhe(&args);
    let b = fqhe(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(without_timing(&stdout(&a)), without_timing(&stdout(&b)));
    let c = Command::new(env!("CARGO_BIN_EXE_fqhe")).args(args).env("FQHE_THREADS", "1").output().unwrap();
    assert_eq!(without_timing(&stdout(&a)), without_timing(&stdout(&c)), "thread count must not change results");
    let d = fqhe(&["kvw", "--K", "3", "--n", "2", "--xi-a", "0.2", "--backend", "qmc", "--samples", "2048", "--seed", "6", "--replicates", "4"]);
    assert_ne!(without_timing(&stdout(&a)), without_timing(&stdout(&d)));
}

#[test]
fn report_doubles_round_trip() {
    let o = fqhe(&["theta", "--a", "0.5", "--b", "0.5", "--z", "0.3+0.2i", "--tau", "0.3+0.8i"]);
    assert_eq!(o.status.code(), Some(0));
    let r = parse_report(&stdout(&o)).unwrap();
    let value = fqhe_core::report::parse_complex(r.get("results.value").unwrap()).unwrap();
    let tau = num_complex::Complex64::new(0.3, 0.8);
    let direct = fqhe_core::theta::theta_odd(num_complex::Complex64::new(0.3, 0.2), tau, fqhe_core::theta::Tolerance::new(1e-13).unwrap()).unwrap();
    assert!((value - direct).norm() < 1e-14);
}

#[test]
fn every_subcommand_reports() {
    let cases: [&[&str]; 6] = [
        &["theta", "--a", "0 0.5", "--b", "0.5 0", "--z", "0.1+0.2i 0.3-0.1i", "--K", "2 1; 1 2"],
        &["norm", "--n", "2", "--grid", "16"],
        &["norm", "--n", "2", "--state", "fay", "--grid", "12"],
        &["kvw", "--K", "2 1; 1 2", "--n", "1 1", "--grid", "12"],
        &["center-gram", "--K", "2 1; 1 2", "--grid", "24"],
        &["curvature", "--field-model", "one-layer", "--m", "3", "--n", "2"],
    ];
    for args in cases {
        let o = fqhe(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
        let r = parse_report(&stdout(&o)).unwrap();
        assert_eq!(r.get("verdicts.overall"), Some("PASS"), "{args:?}");
        assert!(r.get("timing").is_some());
    }
}

#[test]
fn curvature_report_fields() {
    let o = fqhe(&["curvature", "--field-model", "multilayer", "--K", "2 1; 1 2", "--n", "1 1"]);
    assert_eq!(o.status.code(), Some(0));
    let r = parse_report(&stdout(&o)).unwrap();
    assert!((r.real("results.degree").unwrap() + 2.0).abs() < 1e-6);
    assert!((r.real("results.slope").unwrap() + 2.0 / 3.0).abs() < 1e-6);
    assert_eq!(r.matrices["curvature_at_origin"].shape(), (3, 3));
    let o = fqhe(&["curvature", "--field-model", "profile", "--alpha", "2", "--rank", "2", "--fit"]);
    let r = parse_report(&stdout(&o)).unwrap();
    assert_eq!(r.get("results.curvature_backend"), Some("profile-fit"));
}
