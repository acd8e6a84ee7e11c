use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const OUTPUTS: [&str; 5] = [
    "sources.json",
    "similarity.json",
    "characteristics.json",
    "transitions.json",
    "report.txt",
];

fn aerofactor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aerofactor"))
        .args(args)
        .output()
        .expect("spawn aerofactor")
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = aerofactor(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_writes_every_output_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let outs: Vec<_> = ["a", "b"].iter().map(|n| tmp.path().join(n)).collect();
    for out in &outs {
        let o = aerofactor(&[
            "run",
            "--data",
            data.to_str().unwrap(),
            "--p",
            "7",
            "--k",
            "3",
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in OUTPUTS {
        let a = fs::read(outs[0].join(name)).unwrap();
        let b = fs::read(outs[1].join(name)).unwrap();
        assert!(!a.is_empty(), "{name} empty");
        assert_eq!(a, b, "{name} differs between runs");
    }
    let sources: serde_json::Value = serde_json::from_slice(&fs::read(outs[0].join("sources.json")).unwrap()).unwrap();
    assert_eq!(sources["seed"], 4);
    assert_eq!(sources["data"]["profiles"].as_array().unwrap().len(), 7);
    let report = fs::read_to_string(outs[0].join("report.txt")).unwrap();
    assert!(report.contains("[imputation]") && report.contains("[factorization]"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--sources", "3", "--species", "12"]);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"dr_method": "pca2", "k": 5, "max_iter": 50}"#).unwrap();
    let out = tmp.path().join("out");
    let o = aerofactor(&[
        "run",
        "--data",
        data.to_str().unwrap(),
        "--p",
        "3",
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("similarity.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["dr_method"], "pca2");
    assert_eq!(v["config"]["k"], 3);
    assert_eq!(v["config"]["max_iter"], 50);
    assert_eq!(v["config"]["alpha_mode"]["mode"], "fixed");
}

#[test]
fn missing_p_is_usage_error() {
    let o = aerofactor(&["run", "--data", "x", "--out", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--p"));
}

#[test]
fn validation_and_failure_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--species", "10", "--sources", "2"]);
    let out = tmp.path().join("out");
    let run = |p: &str, k: &str| {
        aerofactor(&[
            "run",
            "--data",
            data.to_str().unwrap(),
            "--p",
            p,
            "--k",
            k,
            "--out",
            out.to_str().unwrap(),
        ])
    };
    assert_eq!(run("11", "3").status.code(), Some(2));
    assert_eq!(run("2", "13").status.code(), Some(2));
    assert_eq!(run("0", "3").status.code(), Some(2));

    let bad = tmp.path().join("bad");
    fs::create_dir(&bad).unwrap();
    fs::copy(data.join("stations.csv"), bad.join("stations.csv")).unwrap();
    fs::write(
        bad.join("species.csv"),
        "station_id,timestamp,X01\nS01,2018-03-12T00:00:00Z,-4\n",
    )
    .unwrap();
    let o = aerofactor(&[
        "run",
        "--data",
        bad.to_str().unwrap(),
        "--p",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("species.csv"));
    assert!(!out.join("sources.json").exists());
}

#[test]
fn synth_rejects_out_of_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = aerofactor(&[
        "synth",
        "--species",
        "3",
        "--sources",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = aerofactor(&["synth", "--clusters", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, &["--seed", "9"]);
    synth(&b, &["--seed", "9"]);
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn diag_p_shows_rank_two_elbow() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--sources", "2", "--species", "20", "--clusters", "2"]);
    let o = aerofactor(&["diag-p", "--data", data.to_str().unwrap(), "--pmin", "1", "--pmax", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p\texplained_variance_ratio\tobjective\titerations");
    assert_eq!(lines.len(), 5);
    let evr: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(evr[1] - evr[0] > 0.3, "{evr:?}");
    assert!(evr[3] - evr[1] < 0.05, "{evr:?}");
}

#[test]
fn diag_p_rejects_inverted_range() {
    let o = aerofactor(&["diag-p", "--data", "nowhere", "--pmin", "4", "--pmax", "2"]);
    assert_eq!(o.status.code(), Some(2));
}
