use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn csim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn csim")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = csim(args, dir);
    assert!(
        out.status.success(),
        "csim {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn log_events(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn sweep_sr_row_count_and_determinism() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str| {
        vec![
            "sweep-sr", "--n", "32", "--solver", "csim-alm", "--solver", "fista", "--sr", "0.5", "--sr",
            "0.75", "--sr", "1.0", "--trials", "5", "--max-iter", "20", "--seed", "9", "--out", out,
        ]
    };
    ok(&args("a.csv"), dir.path());
    ok(&args("b.csv"), dir.path());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,seed,solver,sr,n,p,dict,iters,psnr_db,ssim,relerr,runtime_ms"
    );
    assert_eq!(lines.count(), 30);
    let script = fs::read_to_string(dir.path().join("a_plot.py")).unwrap();
    assert!(script.contains("\"a.csv\""));
}

#[test]
fn sequential_flag_gives_the_same_csv() {
    let dir = TempDir::new().unwrap();
    let base = ["sweep-sr", "--n", "32", "--trials", "3", "--max-iter", "15"];
    let mut par = base.to_vec();
    par.extend(["--out", "par.csv"]);
    let mut seq = base.to_vec();
    seq.extend(["--out", "seq.csv", "--sequential"]);
    ok(&par, dir.path());
    ok(&seq, dir.path());
    assert_eq!(
        fs::read(dir.path().join("par.csv")).unwrap(),
        fs::read(dir.path().join("seq.csv")).unwrap()
    );
}

#[test]
fn sweep_iters_long_format() {
    let dir = TempDir::new().unwrap();
    ok(
        &["sweep-iters", "--n", "32", "--trials", "2", "--max-iter", "12", "--out", "it.csv"],
        dir.path(),
    );
    let text = fs::read_to_string(dir.path().join("it.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // 3 solvers x 3 default ratios x 2 trials x 12 iterations
    assert_eq!(rows.len(), 3 * 3 * 2 * 12);
    for trace in rows.chunks(12) {
        let iters: Vec<usize> = trace.iter().map(|r| r[4].parse().unwrap()).collect();
        assert_eq!(iters, (1..=12).collect::<Vec<_>>());
        let t: Vec<f64> = trace.iter().map(|r| r[6].parse().unwrap()).collect();
        assert!(t.windows(2).all(|w| w[1] > w[0]), "{t:?}");
    }
    assert!(dir.path().join("it_plot.py").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("exp.cfg"),
        "# small run\nn = 16\np = 16\nsr = 0.5, 1.0\ntrials = 2\nsolver = iht\nmax_iter = 5\n",
    )
    .unwrap();
    ok(&["sweep-sr", "--config", "exp.cfg", "--trials", "3", "--out", "c.csv"], dir.path());
    let text = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.lines().skip(1).all(|l| l.contains(",iht,") && l.contains(",16,16,dct,5,")));
}

#[test]
fn recover_at_full_sampling_reproduces_input() {
    let dir = TempDir::new().unwrap();
    let x: Vec<String> = (0..64)
        .map(|i| format!("{}", (i as f64 * 0.2).sin() + 0.5 * (i as f64 * 0.05).cos()))
        .collect();
    fs::write(dir.path().join("x.csv"), x.join("\n")).unwrap();
    ok(
        &["recover", "--input", "x.csv", "--sr", "1", "--out", "r.csv", "--max-iter", "10"],
        dir.path(),
    );
    let got: Vec<f64> = fs::read_to_string(dir.path().join("r.csv"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let want: Vec<f64> = x.iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(got, want);

    let events = log_events(&dir.path().join("r.csv.jsonl"));
    let config = &events[0];
    assert_eq!(config["event"], "config");
    let sc = &config["solver_config"];
    for key in [
        "sigma1", "sigma2", "gamma", "beta", "lambda0", "eta", "xi", "alpha_min", "alpha0", "max_iter",
        "k1", "k2", "feasibility_tol", "continuation", "projection",
    ] {
        assert!(sc.get(key).is_some(), "missing {key} in {sc}");
    }
    assert_eq!(sc["sigma1"], 0.4);
    assert_eq!(sc["k2"], 63.0);
    assert!(events.iter().any(|e| e["event"] == "iter" && e.get("residual_x").is_some()));
    let result = events.last().unwrap();
    assert_eq!(result["event"], "result");
    assert_eq!(result["data_fidelity"], 0.0);
}

#[test]
fn recover_image_and_denoise_identity() {
    let dir = TempDir::new().unwrap();
    ok(&["synth-image", "--height", "32", "--width", "40", "--seed", "3", "--out", "img.pgm"], dir.path());
    ok(
        &["recover", "--input", "img.pgm", "--sr", "0.8", "--solver", "fista", "--out", "rec.pgm"],
        dir.path(),
    );
    let rec = fs::read(dir.path().join("rec.pgm")).unwrap();
    assert!(rec.starts_with(b"P5"));
    assert!(dir.path().join("rec_masked.pgm").exists());
    let result = log_events(&dir.path().join("rec.pgm.jsonl")).pop().unwrap();
    assert!(result["psnr_db"].as_f64().unwrap() > 25.0, "{result}");

    ok(
        &["denoise", "--input", "img.pgm", "--sigma-n", "0", "--m", "1", "--out", "den.pgm"],
        dir.path(),
    );
    assert_eq!(
        fs::read(dir.path().join("img.pgm")).unwrap(),
        fs::read(dir.path().join("den.pgm")).unwrap()
    );
}

#[test]
fn params_report() {
    let dir = TempDir::new().unwrap();
    let text = ok(&["params", "--dict", "dct", "--n", "64"], dir.path());
    assert!(text.contains("coherence mu      0.000000"), "{text}");
    assert!(text.contains("rip bound"));

    let v: Value = serde_json::from_str(&ok(&["params", "--n", "64", "--p", "128", "--k", "40", "--json"], dir.path()))
        .unwrap();
    assert_eq!(v["source"], "default-fallback");
    assert_eq!(v["ratio"], 4.0);
    assert!((v["sensitivity_ratio"].as_f64().unwrap() - 4.015625).abs() < 1e-12);
    assert_eq!(v["kappa_feasible"], false);
}

#[test]
fn dict_info_writes_atoms() {
    let dir = TempDir::new().unwrap();
    let v: Value = serde_json::from_str(&ok(
        &["dict-info", "--dict", "haar-wp", "--n", "16", "--json", "--out", "d.csv"],
        dir.path(),
    ))
    .unwrap();
    assert_eq!(v["n"], 16);
    let csv = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 16);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| csim(args, dir.path()).status.code();
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["sweep-sr", "--solver", "lasso", "--out", "x.csv"]), Some(2));
    assert_eq!(code(&["sweep-sr", "--sr", "1.5", "--out", "x.csv"]), Some(2));
    assert_eq!(code(&["sweep-sr", "--trials", "0", "--out", "x.csv"]), Some(2));
    assert_eq!(code(&["params", "--dict", "wavelet"]), Some(2));
    assert_eq!(code(&["recover", "--input", "missing.csv", "--out", "o.csv"]), Some(3));
    assert!(!dir.path().join("o.csv.jsonl").exists());
    fs::write(dir.path().join("bad.pgm"), b"P2\n2 2\n255\n1 2 3\n").unwrap();
    assert_eq!(code(&["denoise", "--input", "bad.pgm", "--sigma-n", "1", "--out", "o.pgm"]), Some(3));
}
