use std::process::{Command, Output};

fn chernoff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chernoff")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn numbers(text: &str) -> Vec<f64> {
    text.lines().map(|l| l.parse().unwrap()).collect()
}

fn csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn pdf_at_the_mode() {
    let v = numbers(&stdout(&chernoff(&["pdf", "--c", "1", "--at", "0"])));
    assert!((v[0] - 0.7583445580537333).abs() < 1e-11);
}

#[test]
fn cdf_quantile_and_moment() {
    let v = numbers(&stdout(&chernoff(&["cdf", "--at", "-0.5,0", "--at", "5e-1"])));
    assert_eq!(v.len(), 3);
    assert!((v[1] - 0.5).abs() < 1e-8);
    assert!((v[0] + v[2] - 1.0).abs() < 1e-8);
    let q = numbers(&stdout(&chernoff(&["quantile", "--p", "0.975"])))[0];
    let back = numbers(&stdout(&chernoff(&["cdf", "--at", &q.to_string()])))[0];
    assert!((back - 0.975).abs() < 1e-8);
    let m2 = numbers(&stdout(&chernoff(&["moment", "--k", "2"])))[0];
    assert!((m2 - 0.2635596412996099).abs() < 1e-9);
}

#[test]
fn airy_and_gfun_tables() {
    let (header, rows) = csv(&stdout(&chernoff(&["airy", "--from", "-1", "--to", "1", "--step", "0.5", "--im", "-1"])));
    assert_eq!(header, ["z_re", "z_im", "ai_re", "ai_im"]);
    assert_eq!(rows.len(), 5);
    // mpmath: Ai(-i)
    assert!((rows[2][2] - 0.3314933054321412).abs() < 1e-13 && (rows[2][3] - 0.3174498589684438).abs() < 1e-13);

    let (header, rows) = csv(&stdout(&chernoff(&["gfun", "--from", "-1", "--to", "1", "--step", "1", "--order", "1"])));
    assert_eq!(header, ["x", "value"]);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), [-1.0, 0.0, 1.0]);
}

#[test]
fn gaussfact_residuals_vanish() {
    let (header, rows) = csv(&stdout(&chernoff(&["gaussfact", "--from", "-3", "--to", "3", "--step", "0.5"])));
    assert_eq!(header, ["z", "g", "residual"]);
    assert_eq!(rows.len(), 13);
    assert!(rows.iter().all(|r| r[1] > 0.0 && r[2].abs() < 1e-12));
}

#[test]
fn diagnose_json_summary() {
    let out = stdout(&chernoff(&["diagnose", "--c", "1", "--from", "-2.5", "--to", "2.5", "--step", "0.01", "--format", "json"]));
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert!((json["w0"].as_f64().unwrap() - 3.4052).abs() < 1e-3);
    assert!((json["sigma0"].as_f64().unwrap() - 0.541912).abs() < 1e-4);
    assert!(json["pf2_min_det"].as_f64().unwrap() >= -1e-10);
    assert!(json["corr_min"].is_null());
}

#[test]
fn diagnose_csv_and_svg() {
    let (header, rows) = csv(&stdout(&chernoff(&["diagnose", "--from", "-1", "--to", "1", "--step", "0.25"])));
    assert_eq!(header, ["t", "f", "neg_log_f", "w", "v"]);
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[3] > 0.0));

    let dir = tempfile::tempdir().unwrap();
    let out = chernoff(&["diagnose", "--from", "-1", "--to", "1", "--step", "0.1", "--format", "svg", "-o", dir.path().to_str().unwrap()]);
    stdout(&out);
    for name in ["density.svg", "neg_log_density.svg", "curvature.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    }
}

#[test]
fn sampling_is_deterministic() {
    let a = stdout(&chernoff(&["sample", "--dist", "hypoexp", "--rates", "1,2,4", "--n", "200", "--seed", "9"]));
    let b = stdout(&chernoff(&["sample", "--dist", "hypoexp", "--rates", "1,2,4", "--n", "200", "--seed", "9"]));
    assert_eq!(a, b);
    let v = numbers(&a);
    assert_eq!(v.len(), 200);
    assert!(v.iter().all(|&x| x > 0.0));
    let c = stdout(&chernoff(&["sample", "--dist", "hypoexp", "--rates", "1,2,4", "--n", "200", "--seed", "10"]));
    assert_ne!(a, c);
}

#[test]
fn binary_sample_stream() {
    let text = numbers(&stdout(&chernoff(&["sample", "--dist", "gtilde", "--n", "50", "--seed", "3"])));
    let out = chernoff(&["sample", "--dist", "gtilde", "--n", "50", "--seed", "3", "--binary"]);
    assert!(out.status.success());
    assert_eq!(out.stdout.len(), 50 * 8);
    let raw: Vec<f64> = out.stdout.chunks(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    for (x, y) in text.iter().zip(&raw) {
        assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
    }
}

#[test]
fn chernoff_and_argmax_samples() {
    let z = numbers(&stdout(&chernoff(&["sample", "--dist", "chernoff", "--n", "2000", "--seed", "4"])));
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    assert!(mean.abs() < 0.05);
    let a = numbers(&stdout(&chernoff(&["argmax-sim", "--n", "500", "--step", "1e-2", "--seed", "4"])));
    assert_eq!(a.len(), 500);
    assert!(a.iter().all(|x| x.abs() <= 3.0));
}

#[test]
fn figures_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&chernoff(&["figures", "--out", dir.path().to_str().unwrap()]));
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["density_argmax"], 0.0);
    assert!((json["curvature_min"].as_f64().unwrap() - 3.4052).abs() < 1e-3);
    let gaps: Vec<f64> = json["product_sup_gap"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(gaps[2] < gaps[0]);
    for name in ["fig1_airy_products.csv", "fig2_density.csv", "fig3_neg_log_density.csv", "fig4_curvature.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn verify_prints_a_line_per_criterion() {
    let out = stdout(&chernoff(&["verify", "--only", "1,3,5"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.starts_with("[PASS]")));
}

#[test]
fn output_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let out = chernoff(&["gaussfact", "--from", "0", "--to", "1", "--step", "1", "--output", path.to_str().unwrap()]);
    assert!(stdout(&out).is_empty());
    assert!(std::fs::read_to_string(path).unwrap().starts_with("z,g,residual\n"));
}

#[test]
fn exit_codes() {
    // usage errors
    for args in [
        &["bogus"][..],
        &["pdf"],
        &["gfun", "--from", "1", "--to", "0", "--step", "0.1"],
        &["gfun", "--from", "0", "--to", "1", "--step", "0.1", "--order", "9"],
        &["quantile", "--p", "1.5"],
        &["moment", "--k", "0"],
        &["sample", "--dist", "hypoexp"],
        &["diagnose", "--from", "0", "--to", "1", "--step", "1", "--format", "svg"],
        &["verify", "--only", "12"],
    ] {
        assert_eq!(chernoff(args).status.code(), Some(2), "{args:?}");
    }
    // validation failures
    assert_eq!(chernoff(&["pdf", "--c", "-1", "--at", "0"]).status.code(), Some(1));
    assert_eq!(chernoff(&["sample", "--dist", "hypoexp", "--rates", "1,1"]).status.code(), Some(1));
    assert_eq!(chernoff(&["gaussfact", "--from", "0", "--to", "50", "--step", "10"]).status.code(), Some(1));
}

#[test]
fn thread_cap_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_chernoff"))
            .args(["sample", "--dist", "gtilde", "--n", "10000", "--seed", "1"])
            .env("CHERNOFF_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let two = run("2");
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);
    assert_eq!(run("zero").status.code(), Some(2));
    assert_eq!(run("0").status.code(), Some(2));
}
