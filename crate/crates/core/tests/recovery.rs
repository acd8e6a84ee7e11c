use aerofactor::data::unfold;
use aerofactor::factorization::{run_nmf, source_labels, NmfConfig};
use aerofactor::metrics::{adjusted_rand_index, greedy_match};
use aerofactor::multidr::{embed_stations, ContributionTensor, DrMethod, MultiDrConfig, UmapParams};
use aerofactor::synth::{generate, SynthConfig};

fn planted(seed: u64, noise: f64) -> aerofactor::synth::Synthetic {
    generate(&SynthConfig {
        sources: 3,
        clusters: 3,
        seed,
        noise,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn planted_sources_recovered() {
    let mut worst = f64::INFINITY;
    let mut hits = 0;
    for seed in 0..20 {
        let s = planted(seed, 0.1);
        assert!(s.truth.snr_db.unwrap() >= 20.0 - 0.5);
        let v = unfold(&s.dataset.species).unwrap();
        let fit = run_nmf(
            &v,
            &NmfConfig {
                seed,
                ..NmfConfig::with_rank(3)
            },
        )
        .unwrap();
        let m = greedy_match(&s.truth.h0_matrix(), &fit.h);
        let min = m.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
        worst = worst.min(min);
        if m.iter().all(|x| x.2 > 0.9) {
            hits += 1;
        }
    }
    eprintln!("worst matched cosine {worst}, {hits}/20");
    assert!(hits >= 19);
}

#[test]
fn planted_groups_recovered() {
    let (mut pca_ok, mut umap_ok) = (0, 0);
    for seed in 0..20 {
        let s = planted(seed, 0.1);
        let v = unfold(&s.dataset.species).unwrap();
        let fit = run_nmf(
            &v,
            &NmfConfig {
                seed,
                ..NmfConfig::with_rank(3)
            },
        )
        .unwrap();
        let contrib = ContributionTensor::from_normalized(
            &fit.w_hat,
            s.dataset.species.time_index().to_vec(),
            s.dataset.species.station_index().to_vec(),
            source_labels(3),
        )
        .unwrap();
        for (method, ok) in [(DrMethod::Pca2, &mut pca_ok), (DrMethod::Umap, &mut umap_ok)] {
            let e = embed_stations(
                &contrib,
                &MultiDrConfig {
                    k: 3,
                    dr_method: method,
                    umap: UmapParams::default(),
                    seed,
                },
            )
            .unwrap();
            let ari = adjusted_rand_index(&e.cluster_labels, &s.truth.groups);
            let pass = match method {
                DrMethod::Pca2 => ari == 1.0,
                DrMethod::Umap => ari >= 0.8,
            };
            if !pass {
                eprintln!("seed {seed} {method:?} ari {ari}");
            }
            *ok += pass as usize;
        }
    }
    eprintln!("pca2 {pca_ok}/20 umap {umap_ok}/20");
    assert!(pca_ok >= 18 && umap_ok >= 18);
}
