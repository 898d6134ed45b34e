use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gradstream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradstream"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn rate_table_writes_one_row_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.cfg", "d=2000 seed=3\n");
    let out = dir.path().join("out.csv");
    let status = gradstream(&["rate-table", "--config", &cfg, "-o", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "scheme,k_frac,analytic_bits,measured_bits");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("topk,0.015,"));
    assert!(lines[5].starts_with("scaledsign,,1.0,"));
}

#[test]
fn identical_invocations_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.cfg",
        "# small run\nscheme=topkq k_frac=0.1 predictor=estk ef=true beta=0.9\nd=60 workers=3 iters=40 problem=logistic\n",
    );
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_gradstream"))
            .env("GRADSTREAM_THREADS", threads)
            .args(["simulate", "--config", &cfg, "--seed", "5", "--format", "json", "-o"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let rows: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 40 * 3);
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e.cfg", "d=100 k=5 iters=20");
    let a = gradstream(&["error-growth", "--config", &cfg, "--seed", "1"]);
    let b = gradstream(&["error-growth", "--config", &cfg, "--seed", "2"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
    assert!(String::from_utf8(a.stdout).unwrap().starts_with("t,error_norm_sq\n0,"));
}

#[test]
fn usage_errors_exit_two() {
    let unknown = gradstream(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));

    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("beta.cfg", "d=10 scheme=topk k=2 beta=1.0"),
        ("estk.cfg", "d=10 scheme=scaledsign predictor=estk"),
        ("unknown.cfg", "d=10 scheme=topk k=2 colour=red"),
    ] {
        let cfg = write_config(dir.path(), name, text);
        let out = gradstream(&["simulate", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(!out.stderr.is_empty());
    }
    let missing = gradstream(&["simulate", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(missing.status.code(), Some(2));
    let misplaced = write_config(dir.path(), "rt.cfg", "d=100 predictor=estk");
    assert_eq!(gradstream(&["rate-table", "--config", &misplaced]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let out = gradstream(&["rate-table", "-o", "/nonexistent/dir/out.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_lists_subcommands() {
    let out = gradstream(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "simulate",
        "timeseries",
        "error-growth",
        "convergence",
        "rate-table",
        "mse-compare",
        "master-momentum",
    ] {
        assert!(text.contains(sub), "{sub}");
    }
}

#[test]
fn experiment_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("timeseries", "d=200 k=4 iters=50 predictor=estk", "t,worker,loss"),
        ("convergence", "d=20 iters=400 delta=0.1", "seed,iterations"),
        ("mse-compare", "d=50 k=2 iters=60", "t,mse_zero,mse_estk"),
        (
            "master-momentum",
            "d=30 scheme=topk k=3 iters=20 problem=quadratic lr=0.1 master_beta=0.8",
            "t,worker,ef,deviation,oracle",
        ),
    ];
    for (sub, text, header) in cases {
        let cfg = write_config(dir.path(), &format!("{sub}.cfg"), text);
        let out = gradstream(&[sub, "--config", &cfg]);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8(out.stdout).unwrap().starts_with(header), "{sub}");
    }
}
