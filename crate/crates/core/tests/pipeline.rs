use std::time::Instant;

use aerofactor::ingest::{dataset_id, Dataset};
use aerofactor::multidr::DrMethod;
use aerofactor::pipeline::{run_pipeline, to_canonical_json, PipelineConfig, Pm25Query};
use aerofactor::synth::{generate, SynthConfig};
use chrono::{TimeZone, Utc};

fn synth_dir(config: &SynthConfig) -> (tempfile::TempDir, Dataset, String) {
    let dir = tempfile::tempdir().unwrap();
    generate(config).unwrap().write_dir(dir.path()).unwrap();
    let ds = Dataset::load_dir(dir.path()).unwrap();
    let id = dataset_id(dir.path()).unwrap();
    (dir, ds, id)
}

#[test]
fn default_shapes_through_csv() {
    let (_dir, ds, id) = synth_dir(&SynthConfig::default());
    assert!(ds.warnings.is_empty(), "{:?}", ds.warnings);
    let start = Instant::now();
    let out = run_pipeline(&ds, &id, &PipelineConfig::default()).unwrap();
    assert!(start.elapsed().as_secs_f64() < 10.0);
    assert_eq!(out.factorization.h_hat.values.dim(), (7, 49));
    assert_eq!(out.factorization.w_hat.values.dim(), (480, 7));
    assert_eq!(out.embedding.y.dim(), (12, 7));
    assert_eq!(out.embedding.z.dim(), (12, 2));
    assert_eq!(out.characteristics.len(), 3);
    assert!(out.characteristics.iter().all(|c| c.loadings.len() == 7));
    assert_eq!(out.correlations.rows.len(), 7);
    assert_eq!(out.correlations.cols, vec!["pm25", "temperature"]);
    assert_eq!(out.grid.len(), 40);
}

#[test]
fn views_are_consistent() {
    let (_dir, ds, id) = synth_dir(&SynthConfig::default());
    let out = run_pipeline(
        &ds,
        &id,
        &PipelineConfig {
            dr_method: DrMethod::Pca2,
            ..Default::default()
        },
    )
    .unwrap();

    let sources = out.sources_view();
    assert_eq!(sources.top_species.len(), 15);
    assert_eq!(sources.profiles.len(), 7);

    let sim = out.similarity_view();
    assert_eq!(sim.stations.len(), 12);

    let map = out.map_view(Some(Utc.with_ymd_and_hms(2030, 1, 1, 0, 0, 0).unwrap()));
    assert!(map.grid.cells.is_empty());
    assert_eq!(map.stations.len(), 12);
    let map = out.map_view(None);
    assert_eq!(map.grid.cells.iter().map(|c| c.count).sum::<usize>(), 36);

    let from = Utc.with_ymd_and_hms(2018, 3, 15, 0, 0, 0).unwrap();
    let to = Utc.with_ymd_and_hms(2018, 3, 25, 0, 0, 0).unwrap();
    let view = out
        .transitions_pm25_view(&Pm25Query {
            stations: Some(vec!["S01".into(), "S05".into()]),
            source: Some("B".into()),
            from: Some(from),
            to: Some(to),
        })
        .unwrap();
    assert_eq!(view.stations.len(), 2);
    for st in &view.stations {
        assert!(st.pm25.timestamps.iter().all(|t| *t >= from && *t <= to));
        assert_eq!(st.contribution.timestamps.first(), Some(&from));
        assert_eq!(st.contribution.timestamps.last(), Some(&to));
        assert!(st.dominance.iter().all(|d| d.from >= from && d.to <= to));
    }
    let bad = Pm25Query {
        from: Some(to),
        to: Some(from),
        ..Default::default()
    };
    assert!(out.transitions_pm25_view(&bad).is_err());
    let bad = Pm25Query {
        source: Some("Z".into()),
        ..Default::default()
    };
    assert!(out.transitions_pm25_view(&bad).is_err());
}

#[test]
fn reruns_serialize_identically() {
    let (_dir, ds, id) = synth_dir(&SynthConfig {
        seed: 3,
        ..Default::default()
    });
    let config = PipelineConfig {
        seed: 11,
        ..Default::default()
    };
    let a = run_pipeline(&ds, &id, &config).unwrap();
    let b = run_pipeline(&ds, &id, &config).unwrap();
    assert_eq!(a.run_id, b.run_id);
    let bytes = |o: &aerofactor::pipeline::PipelineOutput| {
        [
            to_canonical_json(&o.envelope(o.sources_view())).unwrap(),
            to_canonical_json(&o.envelope(o.similarity_view())).unwrap(),
            to_canonical_json(&o.envelope(o.characteristics_view())).unwrap(),
            to_canonical_json(&o.envelope(o.transitions_export())).unwrap(),
            aerofactor::pipeline::render_report(o).into_bytes(),
        ]
    };
    assert_eq!(bytes(&a), bytes(&b));
}

#[test]
fn config_bounds_reported() {
    let (_dir, ds, id) = synth_dir(&SynthConfig::default());
    let err = run_pipeline(
        &ds,
        &id,
        &PipelineConfig {
            k: 13,
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(err.is_validation());
}
