//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use aerofactor::analytics::{anomaly_scan, correlate_measures, dominance_periods, pearson, ThresholdMode};
use aerofactor::contrastive::{characterize, AlphaMode};
use aerofactor::data::unfold;
use aerofactor::data::UnfoldedMatrix;
use aerofactor::factorization::{run_nmf, source_labels, NmfConfig};
use aerofactor::ingest::{dataset_id, AuxiliarySeries, Dataset, SeriesKind};
use aerofactor::metrics::{adjusted_rand_index, greedy_match};
use aerofactor::multidr::{embed_stations, ContributionTensor, DrMethod, MultiDrConfig, UmapParams};
use aerofactor::pipeline::{run_pipeline, PipelineConfig};
use aerofactor::synth::{generate, SynthConfig};
use aerofactor_service::{app, AppState};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tower::ServiceExt;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String, ok: bool) -> Outcome {
    let took = start.elapsed();
    check(
        ok && took < limit,
        format!("{detail}; {:.1}s of {}s", took.as_secs_f64(), limit.as_secs()),
    )
}

fn shape_conformance() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = generate(&SynthConfig::default()).map_err(|e| e.to_string())?;
    s.write_dir(tmp.path()).map_err(|e| e.to_string())?;
    let ds = Dataset::load_dir(tmp.path()).map_err(|e| e.to_string())?;
    let id = dataset_id(tmp.path()).map_err(|e| e.to_string())?;
    let out = run_pipeline(
        &ds,
        &id,
        &PipelineConfig {
            p: 7,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let f = &out.factorization;
    let h = &f.h_hat.values;
    let w = &f.w_hat.values;
    let h_unit = h.rows().into_iter().all(|r| (r.dot(&r).sqrt() - 1.0).abs() < 1e-9);
    let w_unit = w
        .rows()
        .into_iter()
        .enumerate()
        .all(|(i, r)| f.w_hat.zero_rows.contains(&i) || (r.sum() - 1.0).abs() < 1e-9);
    let dims = [h.dim(), w.dim(), out.embedding.y.dim(), out.embedding.z.dim()];
    within(
        Duration::from_secs(10),
        start,
        format!("H {:?} W {:?} Y {:?} Z {:?}", dims[0], dims[1], dims[2], dims[3]),
        dims == [(7, 49), (480, 7), (12, 7), (12, 2)] && h_unit && w_unit,
    )
}

fn nmf_monotonicity() -> Outcome {
    let start = Instant::now();
    let sizes = [(60, 12, 3), (200, 30, 5), (480, 49, 7)];
    let mut worst = 0.0f64;
    let mut runs = 0;
    for &(m, d, p) in &sizes {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = Array2::from_shape_fn((m, d), |_| rng.random::<f64>());
            let cfg = NmfConfig {
                seed,
                max_iter: 200,
                tol: 0.0,
                ..NmfConfig::with_rank(p)
            };
            let fit = run_nmf(&UnfoldedMatrix::from_matrix(v), &cfg).map_err(|e| e.to_string())?;
            for pair in fit.objective_trace.windows(2) {
                worst = worst.max(pair[1] - pair[0]);
            }
            runs += 1;
        }
    }
    within(
        Duration::from_secs(60),
        start,
        format!("{runs} fits, largest increase {worst:.3e}"),
        worst <= 1e-9,
    )
}

fn planted(seed: u64) -> aerofactor::synth::Synthetic {
    generate(&SynthConfig {
        sources: 3,
        clusters: 3,
        seed,
        noise: 0.09,
        ..Default::default()
    })
    .expect("synth")
}

fn source_recovery() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    let mut min_snr = f64::INFINITY;
    for seed in 0..20 {
        let s = planted(seed);
        min_snr = min_snr.min(s.truth.snr_db.unwrap_or(f64::INFINITY));
        let v = unfold(&s.dataset.species).map_err(|e| e.to_string())?;
        let fit = run_nmf(
            &v,
            &NmfConfig {
                seed,
                ..NmfConfig::with_rank(3)
            },
        )
        .map_err(|e| e.to_string())?;
        if greedy_match(&s.truth.h0_matrix(), &fit.h).iter().all(|m| m.2 > 0.9) {
            hits += 1;
        }
    }
    within(
        Duration::from_secs(120),
        start,
        format!("{hits}/20 seeds matched, min SNR {min_snr:.1} dB"),
        hits >= 19 && min_snr >= 20.0,
    )
}

fn cluster_recovery() -> Outcome {
    let start = Instant::now();
    let (mut pca_ok, mut umap_ok) = (0, 0);
    for seed in 0..20 {
        let s = planted(seed);
        let v = unfold(&s.dataset.species).map_err(|e| e.to_string())?;
        let fit = run_nmf(
            &v,
            &NmfConfig {
                seed,
                ..NmfConfig::with_rank(3)
            },
        )
        .map_err(|e| e.to_string())?;
        let contrib = ContributionTensor::from_normalized(
            &fit.w_hat,
            s.dataset.species.time_index().to_vec(),
            s.dataset.species.station_index().to_vec(),
            source_labels(3),
        )
        .map_err(|e| e.to_string())?;
        for method in [DrMethod::Pca2, DrMethod::Umap] {
            let e = embed_stations(
                &contrib,
                &MultiDrConfig {
                    k: 3,
                    dr_method: method,
                    umap: UmapParams::default(),
                    seed,
                },
            )
            .map_err(|e| e.to_string())?;
            let ari = adjusted_rand_index(&e.cluster_labels, &s.truth.groups);
            match method {
                DrMethod::Pca2 => pca_ok += (ari == 1.0) as usize,
                DrMethod::Umap => umap_ok += (ari >= 0.8) as usize,
            }
        }
    }
    within(
        Duration::from_secs(120),
        start,
        format!("pca2 ARI=1 in {pca_ok}/20, umap ARI>=0.8 in {umap_ok}/20"),
        pca_ok >= 18 && umap_ok >= 18,
    )
}

fn sample_cov(y: &Array2<f64>) -> Array2<f64> {
    let c = y - &y.mean_axis(Axis(0)).unwrap();
    c.t().dot(&c) / (y.nrows() as f64 - 1.0)
}

fn top_eigvec(c: &Array2<f64>) -> (f64, Array1<f64>, f64) {
    let n = c.nrows();
    let eig = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| c[[i, j]]));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let v = Array1::from_iter(eig.eigenvectors.column(order[0]).iter().copied());
    let gap = if n > 1 {
        eig.eigenvalues[order[0]] - eig.eigenvalues[order[1]]
    } else {
        f64::INFINITY
    };
    (eig.eigenvalues[order[0]], v, gap)
}

fn ccpca() -> Outcome {
    let (p, per) = (7, 40);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst_pca = 0.0f64;
    let mut worst_residual = 0.0f64;
    let mut planted_hits = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planted = seed as usize % p;
        // target rows repeat the background rows with the planted source doubled
        let base = Array2::from_shape_fn((per, p), |_| normal.sample(&mut rng));
        let mut y = ndarray::concatenate(Axis(0), &[base.view(), base.view()]).unwrap();
        for i in 0..per {
            y[[i, planted]] *= 2.0;
        }
        let labels: Vec<usize> = (0..2 * per).map(|i| (i >= per) as usize).collect();
        let target = y.slice(ndarray::s![..per, ..]).to_owned();
        let background = y.slice(ndarray::s![per.., ..]).to_owned();
        let (c_tg, c_bg) = (sample_cov(&target), sample_cov(&background));

        let zero = characterize(&y, &labels, 0, AlphaMode::Fixed(0.0)).map_err(|e| e.to_string())?;
        let (_, v, gap) = top_eigvec(&c_tg);
        if gap > 1e-6 {
            let dot: f64 = zero.loadings.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            worst_pca = worst_pca.max((dot.abs() - 1.0).abs());
        }

        let auto = characterize(&y, &labels, 0, AlphaMode::Auto).map_err(|e| e.to_string())?;
        let lead = (0..p)
            .max_by(|&a, &b| auto.loadings[a].abs().total_cmp(&auto.loadings[b].abs()))
            .unwrap();
        planted_hits += (lead == planted) as usize;

        for c in [&zero, &auto] {
            let m = &c_tg - &(&c_bg * c.alpha);
            let a = Array1::from(c.loadings.clone());
            let r = m.dot(&a) - &a * c.eigenvalue;
            worst_residual = worst_residual.max(r.dot(&r).sqrt());
        }
    }
    check(
        worst_pca < 1e-8 && planted_hits == 20 && worst_residual < 1e-8,
        format!(
            "alpha=0 vs PCA {worst_pca:.1e}, planted source leads {planted_hits}/20, residual {worst_residual:.1e}"
        ),
    )
}

fn brute_dominance(values: &Array3<f64>, station: usize, source: usize) -> Vec<(usize, usize)> {
    let (t, _, p) = values.dim();
    let wins: Vec<bool> = (0..t)
        .map(|i| (0..p).all(|k| k == source || values[[i, station, source]] > values[[i, station, k]]))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < t {
        if wins[i] {
            let s = i;
            while i + 1 < t && wins[i + 1] {
                i += 1;
            }
            out.push((s, i));
        }
        i += 1;
    }
    out
}

fn dominance_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for case in 0..100 {
        let (t, n, p) = (rng.random_range(1..15), rng.random_range(1..4), rng.random_range(1..5));
        // small integer levels so ties are common
        let values = Array3::from_shape_fn((t, n, p), |_| rng.random_range(0..4) as f64);
        let times = (0..t).map(|i| Utc.timestamp_opt(i as i64 * 3600, 0).unwrap()).collect();
        let tensor = ContributionTensor::new(
            values.clone(),
            times,
            (0..n).map(|j| format!("S{j}")).collect(),
            source_labels(p),
        )
        .map_err(|e| e.to_string())?;
        for j in 0..n {
            for k in 0..p {
                let got: Vec<(usize, usize)> = dominance_periods(&tensor, j, k)
                    .map_err(|e| e.to_string())?
                    .iter()
                    .map(|d| (d.start, d.end))
                    .collect();
                if got != brute_dominance(&values, j, k) {
                    return Err(format!("case {case} station {j} source {k} differs"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("100 tensors, {checked} station/source pairs identical"))
}

fn hourly(name: &str, values: &BTreeMap<String, Vec<f64>>) -> AuxiliarySeries {
    let t0 = Utc.with_ymd_and_hms(2018, 3, 12, 0, 0, 0).unwrap();
    AuxiliarySeries {
        kind: SeriesKind::Pollutant,
        name: name.to_string(),
        samples: values
            .iter()
            .flat_map(|(s, vs)| {
                vs.iter()
                    .enumerate()
                    .map(move |(i, &v)| ((s.clone(), t0 + chrono::Duration::hours(i as i64)), v))
            })
            .collect(),
        cadence: chrono::Duration::hours(1),
    }
}

fn correlation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut max_abs = 0.0f64;
    let mut worst_self = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(3..40);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let b: Vec<f64> = if rng.random_bool(0.3) {
            a.iter().map(|x| -2.5 * x + 1.0).collect()
        } else {
            (0..n).map(|_| rng.random_range(-100.0..100.0)).collect()
        };
        if let Some(r) = pearson(&a, &b) {
            max_abs = max_abs.max(r.abs());
        }
        if let Some(r) = pearson(&a, &a) {
            worst_self = worst_self.max((r - 1.0).abs());
        }
    }
    let stations: Vec<String> = (1..=4).map(|i| format!("S{i:02}")).collect();
    let series = |f: &mut dyn FnMut() -> f64| -> BTreeMap<String, Vec<f64>> {
        stations
            .iter()
            .map(|s| (s.clone(), (0..48).map(|_| f()).collect()))
            .collect()
    };
    let measures = vec![
        hourly("pm25", &series(&mut || rng.random_range(5.0..150.0))),
        hourly("temperature", &series(&mut || rng.random_range(10.0..30.0))),
        hourly("flat", &series(&mut || 3.0)),
    ];
    let table = correlate_measures(&measures);
    for i in 0..2 {
        worst_self = worst_self.max((table.r[i][i].unwrap_or(f64::NAN) - 1.0).abs());
        for j in 0..2 {
            max_abs = max_abs.max(table.r[i][j].map_or(0.0, f64::abs));
        }
    }
    let flat_undefined = (0..3).all(|i| table.r[2][i].is_none() && table.r[i][2].is_none());
    check(
        max_abs <= 1.0 && worst_self <= 1e-12 && flat_undefined,
        format!("max |r| {max_abs}, self deviation {worst_self:.1e}, constant column undefined: {flat_undefined}"),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_aerofactor"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn multipart_body(dir: &Path, boundary: &str) -> Vec<u8> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut body = Vec::new();
    for path in files {
        let name = path.file_name().unwrap().to_string_lossy();
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\n\r\n")
                .as_bytes(),
        );
        body.extend_from_slice(&fs::read(&path).unwrap());
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    body
}

async fn call(router: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn service_payloads(data: &Path, state_dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    let router = app(AppState::new(state_dir).map_err(|e| e.to_string())?);
    let boundary = "acceptance-boundary";
    let req = Request::post("/datasets")
        .header("content-type", format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(multipart_body(data, boundary)))
        .unwrap();
    let (status, body) = call(&router, req).await;
    if status != StatusCode::CREATED {
        return Err(format!("upload {status}: {}", String::from_utf8_lossy(&body)));
    }
    let summary: serde_json::Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
    let ds = summary["dataset_id"].as_str().unwrap_or_default().to_string();
    let req = Request::post(format!("/datasets/{ds}/runs?wait=true"))
        .header("content-type", "application/json")
        .body(Body::from(r#"{"p": 7, "k": 3, "seed": 5}"#))
        .unwrap();
    let (status, body) = call(&router, req).await;
    if !status.is_success() {
        return Err(format!("run {status}: {}", String::from_utf8_lossy(&body)));
    }
    let run: serde_json::Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
    let id = run["run_id"].as_str().unwrap_or_default().to_string();
    let mut out = Vec::new();
    for view in [
        "sources",
        "similarity",
        "characteristics",
        "map",
        "transitions/sources",
        "transitions/pm25",
        "anomalies",
    ] {
        let (status, body) = call(
            &router,
            Request::get(format!("/runs/{id}/{view}")).body(Body::empty()).unwrap(),
        )
        .await;
        if status != StatusCode::OK {
            return Err(format!("{view} {status}"));
        }
        out.push(body);
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let data = root.join("data");
    run_cli(&["synth", "--seed", "3", "--out", data.to_str().unwrap()])?;
    let mut cli = Vec::new();
    for name in ["a", "b"] {
        let out = root.join(name);
        run_cli(&[
            "run",
            "--data",
            data.to_str().unwrap(),
            "--p",
            "7",
            "--k",
            "3",
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ])?;
        let files: Vec<Vec<u8>> = [
            "sources.json",
            "similarity.json",
            "characteristics.json",
            "transitions.json",
            "report.txt",
        ]
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap_or_default())
        .collect();
        cli.push(files);
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let first = rt.block_on(service_payloads(&data, &root.join("svc1")))?;
    let second = rt.block_on(service_payloads(&data, &root.join("svc2")))?;
    let cli_same = cli[0] == cli[1] && cli[0].iter().all(|f| !f.is_empty());
    let svc_same = first == second;
    check(
        cli_same && svc_same,
        format!(
            "{} CLI files identical: {cli_same}, {} service payloads identical: {svc_same}",
            cli[0].len(),
            first.len()
        ),
    )
}

fn anomaly() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2152);
    let mut values: BTreeMap<String, Vec<f64>> = (1..=6)
        .map(|i| {
            (
                format!("S{i:02}"),
                (0..24 * 14).map(|_| rng.random_range(5.0..199.0)).collect(),
            )
        })
        .collect();
    values.get_mut("S04").unwrap()[200] = 2152.0;
    let series = hourly("pm25", &values);
    let spike = Utc.with_ymd_and_hms(2018, 3, 12, 0, 0, 0).unwrap() + chrono::Duration::hours(200);
    let mut detail = Vec::new();
    let mut ok = true;
    for (label, mode) in [
        ("absolute(1000)", ThresholdMode::Absolute(1000.0)),
        ("robust-z(5)", ThresholdMode::RobustZ(5.0)),
    ] {
        let found = anomaly_scan(&series, mode);
        let top_ok = found
            .first()
            .is_some_and(|a| a.station_id == "S04" && a.timestamp == spike && a.value == 2152.0);
        ok &= top_ok;
        detail.push(format!("{label}: {} flagged, spike first {top_ok}", found.len()));
    }
    check(ok, detail.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("shape conformance", shape_conformance),
        ("nmf monotonicity", nmf_monotonicity),
        ("planted source recovery", source_recovery),
        ("cluster recovery", cluster_recovery),
        ("ccpca correctness", ccpca),
        ("dominance oracle", dominance_oracle),
        ("correlation bounds", correlation),
        ("determinism", determinism),
        ("anomaly fixture", anomaly),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
