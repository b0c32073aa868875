mod common;

use common::{brwldp, brwldp_env, model, num, read_csv, stderr};

fn arg(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rates_figure_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rates.csv");
    let m = model("model_a");
    let o = brwldp(&["rates", "--model", arg(&m), "--xgrid=-1:1:0.01", "--out", arg(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["x", "I", "I_ind", "I_brw", "H_t_star"]);
    assert_eq!(rows.len(), 201);
    let x_star = 0.832_626_959_835_579_3;
    for r in &rows {
        let (x, ind, brw) = (num(&r[0]), num(&r[2]), num(&r[3]));
        if x < x_star {
            assert!(brw <= ind + 1e-12, "x = {x}");
            assert!(!r[4].is_empty());
        } else {
            assert_eq!(ind, brw, "x = {x}");
            assert!(r[4].is_empty());
        }
    }
    let bytes = std::fs::read(&out).unwrap();
    assert!(!bytes.contains(&b'\r'));
}

#[test]
fn rates_boettcher_is_infinite_below_speed() {
    let m = model("boettcher");
    let o = brwldp(&["rates", "--model", arg(&m), "--xgrid=-1:1:0.25"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if num(f[0]) < 1.0 {
            assert_eq!(f[2], "inf");
            assert_eq!(f[3], "inf");
        }
    }
}

#[test]
fn rates_with_speed_hits_zero() {
    let m = model("model_a");
    let o = brwldp(&["rates", "--model", arg(&m), "--xgrid=0:1:0.5", "--with-speed"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let row = text
        .lines()
        .find(|l| l.starts_with("0.83"))
        .expect("speed row");
    let f: Vec<&str> = row.split(',').collect();
    assert_eq!((f[2], f[3]), ("0", "0"));
}

fn exact_rows(x: &str, ns: &str) -> Vec<Vec<String>> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exact.csv");
    let m = model("model_a");
    let grid = format!("--xgrid={x}:{x}:1");
    let o = brwldp(&["exact", "--model", arg(&m), &grid, "--n", ns, "--out", arg(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out);
    assert_eq!(
        header,
        [
            "quantity",
            "x",
            "n",
            "direction",
            "threshold",
            "probability",
            "conditioned",
            "rate_estimate",
            "analytic",
            "abs_error"
        ]
    );
    rows
}

#[test]
fn exact_upper_deviation_converges() {
    let rows = exact_rows("0.9", "50,100,200");
    let last = rows.iter().rfind(|r| r[0] == "brw_max").unwrap();
    assert_eq!(last[2], "200");
    assert_eq!(last[3], "at_least");
    assert!(num(&last[9]) <= 0.02);
}

#[test]
fn exact_lower_deviation_approaches_variational_value() {
    let rows = exact_rows("0", "50,100,200");
    let last = rows.iter().rfind(|r| r[0] == "brw_max").unwrap();
    assert!((num(&last[7]) - 0.514).abs() < 0.03);
    // rows are sorted by n, then x
    let ns: Vec<usize> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(ns.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn exact_generation_zero_is_trivial() {
    for r in exact_rows("0.5", "0,10") {
        if r[2] == "0" {
            assert!(r[5] == "0" || r[5] == "1");
            assert!(r[7].is_empty());
        }
    }
}

#[test]
fn exact_budget_failure_names_generation() {
    let m = model("model_a");
    let o = brwldp(&["exact", "--model", arg(&m), "--xgrid=0:0:1", "--n", "10,9000000"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("9000000"));
}

#[test]
fn assumption_violations_are_named() {
    let cases = [
        ("gaussian", vec!["exact", "--xgrid=0:0:1", "--n", "5"], "lattice"),
        ("boettcher", vec!["exact", "--xgrid=0:0:1", "--n", "5"], "schroeder"),
        ("critical", vec!["rates", "--xgrid=0:0:1"], "supercritical"),
    ];
    for (name, args, key) in cases {
        let m = model(name);
        let mut full = args.clone();
        full.extend(["--model", arg(&m)]);
        let o = brwldp(&full);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(stderr(&o).contains(key), "{name}: {}", stderr(&o));
    }
}

#[test]
fn malformed_model_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"offspring": {"weights": [0.5, 0.6]}, "step": {"kind": "lattice", "offsets": [-1, 1], "probs": [0.5, 0.5]}}"#).unwrap();
    let o = brwldp(&["rates", "--model", arg(&p), "--xgrid=0:0:1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("offspring.weights"));
}

#[test]
fn cdf_table_and_dominance_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("cdf.csv");
    let m = model("model_a");
    let o = brwldp(&["cdf", "--model", arg(&m), "--n", "0,1,2,3", "--out", arg(&table)]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&table);
    assert_eq!(header, ["n", "y", "cdf_brw", "cdf_ind", "base"]);
    let row = rows.iter().find(|r| r[0] == "2" && r[1] == "-2").unwrap();
    assert_eq!(num(&row[2]), 0.111328125);
    assert_eq!(num(&row[3]), 0.09033203125);

    let ok = brwldp(&["dominance", "--from-csv", arg(&table), "--n", "3"]);
    assert_eq!(ok.status.code(), Some(0));

    // swap the two CDF columns: the independent maximum now looks smaller
    let swapped = dir.path().join("swapped.csv");
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&swapped).unwrap();
    w.write_record(&header).unwrap();
    for r in &rows {
        w.write_record([&r[0], &r[1], &r[3], &r[2], &r[4]]).unwrap();
    }
    w.flush().unwrap();
    let bad = brwldp(&["dominance", "--from-csv", arg(&swapped), "--n", "3"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}

#[test]
fn dominance_from_models() {
    for (name, n) in [("model_a", "50"), ("extinction", "30")] {
        let m = model(name);
        let o = brwldp(&["dominance", "--model", arg(&m), "--n", n]);
        assert_eq!(o.status.code(), Some(0), "{name}");
        let text = String::from_utf8_lossy(&o.stdout);
        assert!(text.contains("largest gap") && text.contains("PASS"));
    }
}

#[test]
fn gw_table() {
    let m = model("model_a");
    let o = brwldp(&["gw", "--model", arg(&m), "--xgrid=0:0:1", "--n", "8,16"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    // P(Z_16 = 1) = 2^-16
    assert_eq!(num(last[3]), 2f64.powi(-16));
    assert!(num(last[6]) < 1e-12);
    let capped = brwldp(&["gw", "--model", arg(&m), "--xgrid=0.2:0.2:1", "--n", "64", "--kcap", "1000"]);
    assert_eq!(capped.status.code(), Some(3));
}

fn json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_kesten_stigum_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ks.json");
    let m = model("model_a");
    let o = brwldp(&[
        "simulate", "--model", arg(&m), "--mode", "kesten-stigum", "--n", "20",
        "--replicates", "100000", "--seed", "42", "--out", arg(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&out);
    for key in [
        "point", "stderr", "ci_low", "ci_high", "confidence", "replicates", "censored", "used",
        "conditioned", "seed",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let point = v["point"].as_f64().unwrap();
    let se = v["stderr"].as_f64().unwrap();
    assert!((point - 1.0).abs() <= 3.0 * se);
}

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("model_a");
    let mut files = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("s{i}.json"));
        let snaps = dir.path().join(format!("s{i}.csv"));
        let o = brwldp_env(
            &[
                "simulate", "--model", arg(&m), "--mode", "speed", "--n", "10",
                "--replicates", "500", "--seed", "42", "--out", arg(&out), "--snapshots", arg(&snaps),
            ],
            "BRWLDP_THREADS",
            threads,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        files.push((std::fs::read(&out).unwrap(), std::fs::read(&snaps).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn simulate_gaussian_tilted_tail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tail.json");
    let m = model("gaussian");
    let o = brwldp(&[
        "simulate", "--model", arg(&m), "--mode", "tilted-tail", "--x", "2", "--n", "100",
        "--replicates", "10000", "--seed", "5", "--out", arg(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&out);
    // closed form: P(N(0, 1) >= 20)
    let exact = v["references"][0]["value"].as_f64().unwrap();
    assert!((exact / 2.753_624_118_411_543e-89 - 1.0).abs() < 1e-6);
    assert_eq!(v["references"][0]["within_ci"], true);
}

#[test]
fn simulate_seed_is_echoed_and_reusable() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("model_a");
    let first = dir.path().join("a.json");
    let o = brwldp(&[
        "simulate", "--model", arg(&m), "--mode", "kesten-stigum", "--n", "5",
        "--replicates", "200", "--out", arg(&first),
    ]);
    assert!(o.status.success());
    let echoed = stderr(&o);
    let seed = echoed.trim().strip_prefix("seed: ").expect("seed echoed");
    assert_eq!(json(&first)["seed"].to_string(), seed);
    let second = dir.path().join("b.json");
    let o = brwldp(&[
        "simulate", "--model", arg(&m), "--mode", "kesten-stigum", "--n", "5",
        "--replicates", "200", "--seed", seed, "--out", arg(&second),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn simulate_error_codes() {
    let m = model("boettcher");
    let censored = brwldp(&[
        "simulate", "--model", arg(&m), "--mode", "speed", "--n", "30", "--replicates", "100",
        "--seed", "1", "--budget", "1000",
    ]);
    assert_eq!(censored.status.code(), Some(3));
    let few = brwldp(&[
        "simulate", "--model", arg(&m), "--mode", "speed", "--n", "3", "--replicates", "10",
    ]);
    assert_eq!(few.status.code(), Some(2));
    let missing = brwldp(&[
        "simulate", "--model", arg(&m), "--mode", "tilted-tail", "--n", "3", "--seed", "1",
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("--x"));
}
