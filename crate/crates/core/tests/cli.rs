use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghost-spectra"))
        .args(args)
        .env_remove("GHOST_SPECTRA_THREADS")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn calibrate_null_example() {
    let v = json(&bin(&[
        "calibrate",
        "--c",
        "0.5",
        "--gamma",
        "0",
        "--f",
        "x2",
        "--n",
        "400",
    ]));
    assert!((v["m0"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert_eq!(v["m1"].as_f64().unwrap(), 0.0);
    // 4c(2 + 5c + 2c^2) at c = 1/2.
    assert!((v["v0"].as_f64().unwrap() - 10.0).abs() < 1e-8);
    assert_eq!(v["john"]["mean_nu"].as_f64().unwrap(), 201.0);
}

#[test]
fn calibrate_sign_flag_and_model() {
    let args = ["calibrate", "--c", "0.5", "--n", "400", "--gamma", "-400", "--f", "x2"];
    let mm = json(&bin(&args));
    let mut lit = args.to_vec();
    lit.extend(["--sign", "contour-literal"]);
    let pl = json(&bin(&lit));
    assert!((mm["m1"].as_f64().unwrap() + 1.0).abs() < 1e-9);
    assert_eq!(mm["m1"].as_f64().unwrap(), -pl["m1"].as_f64().unwrap());

    let m4 = json(&bin(&["calibrate", "--model", "M4", "--p", "200", "--f", "x"]));
    let gamma = m4["gamma_used"].as_f64().unwrap();
    assert!((gamma - 2139.3).abs() < 0.1, "{gamma}");
    assert!((m4["v0"].as_f64().unwrap() + m4["v1"].as_f64().unwrap() - 1.0 - gamma / 400.0).abs() < 1e-4);
}

#[test]
fn test_subcommand_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    // 40 observations of 5 variables, rows are observations.
    let mut text = String::from("a,b,c,d,e\n");
    let mut s = 1u64;
    for _ in 0..40 {
        let row: Vec<String> = (0..5)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                format!("{}", (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
            })
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(&path, &text).unwrap();
    let p = path.to_str().unwrap();
    let v = json(&bin(&["test", "--data", p, "--level", "0.05"]));
    assert_eq!(v["p"], 5);
    assert_eq!(v["n"], 40);
    let z = v["z_corrected"].as_f64().unwrap();
    assert_eq!(v["reject_corrected"].as_bool().unwrap(), z.abs() > 1.959963984540054);
    assert!(v["p_wy"].as_f64().is_some());

    let t = json(&bin(&["test", "--data", p, "--transpose"]));
    assert_eq!((t["p"].as_u64(), t["n"].as_u64()), (Some(40), Some(5)));

    let body = text.split_once('\n').unwrap().1;
    std::fs::write(&path, body).unwrap();
    let h = json(&bin(&["test", "--data", p, "--no-header"]));
    assert_eq!(h["u"], v["u"]);

    std::fs::write(&path, "1,2\n3,x\n").unwrap();
    assert_eq!(bin(&["test", "--data", p, "--no-header"]).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(bin(&["size", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bin(&["calibrate", "--c", "0.5"]).status.code(), Some(1));
    assert_eq!(bin(&["size", "--reps", "10"]).status.code(), Some(1));
}

#[test]
fn size_with_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"models": [{"name": "M2"}], "p_grid": [20, 30], "reps": 100}"#).unwrap();
    let out = dir.path().join("size.csv");
    let o = bin(&[
        "size",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--plots",
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("experiment_id,model,p,n,method,metric,value,reps,seed\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 6);
    assert!(dir.path().join("size_M2_rejection_rate.svg").exists());
}
