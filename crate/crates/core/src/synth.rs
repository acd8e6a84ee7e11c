//! Synthetic datasets with planted sources, station groups and peak windows.
//!
//! Each source owns a disjoint block of species, so planted profiles are
//! mutually orthogonal. Stations in group `g` carry an elevated level of
//! source `g mod p` throughout, boosted further inside the group's peak
//! window. Noise is Gaussian with a standard deviation given as a fraction of
//! the signal RMS, clipped at zero.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::SpatioTemporalTensor;
use crate::error::{Error, Result};
use crate::factorization::source_label;
use crate::ingest::{AuxiliarySeries, Dataset, GridSensor, GridSensorSet, SeriesKind, Station, StationCatalog};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub stations: usize,
    pub timestamps: usize,
    pub species: usize,
    pub sources: usize,
    pub clusters: usize,
    pub seed: u64,
    /// Noise standard deviation as a fraction of the signal RMS.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            stations: 12,
            timestamps: 40,
            species: 49,
            sources: 7,
            clusters: 3,
            seed: 0,
            noise: 0.05,
        }
    }
}

/// The window in which a group's signature source peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakWindow {
    pub group: usize,
    pub source: usize,
    /// Inclusive timestamp indices.
    pub start: usize,
    pub end: usize,
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub species: Vec<String>,
    pub source_ids: Vec<String>,
    /// Planted profiles, one row per source.
    pub h0: Vec<Vec<f64>>,
    pub station_ids: Vec<String>,
    /// Group of each station.
    pub groups: Vec<usize>,
    pub dominance: Vec<PeakWindow>,
    /// Realized signal-to-noise ratio of the species tensor; absent when
    /// noiseless.
    pub snr_db: Option<f64>,
}

impl GroundTruth {
    pub fn h0_matrix(&self) -> Array2<f64> {
        let (p, d) = (self.h0.len(), self.species.len());
        Array2::from_shape_fn((p, d), |(k, s)| self.h0[k][s])
    }
}

pub struct Synthetic {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

impl Synthetic {
    /// Writes the dataset CSVs and `ground_truth.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        self.dataset.write_dir(dir)?;
        let mut json = serde_json::to_string_pretty(&self.truth)?;
        json.push('\n');
        fs::write(dir.join(GROUND_TRUTH_FILE), json)?;
        Ok(())
    }
}

pub fn start_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2018, 3, 12, 0, 0, 0).unwrap()
}

/// Species cadence.
pub fn step() -> Duration {
    Duration::hours(12)
}

fn validate(c: &SynthConfig) -> Result<()> {
    let bad = |m: String| Err(Error::InvalidConfig(m));
    if c.stations == 0 || c.sources == 0 || c.clusters == 0 || c.species == 0 {
        return bad("stations, species, sources and clusters must be positive".into());
    }
    if c.timestamps < 2 {
        return bad(format!("need at least 2 timestamps, got {}", c.timestamps));
    }
    if c.species < c.sources {
        return bad(format!(
            "{} species cannot hold {} disjoint source blocks",
            c.species, c.sources
        ));
    }
    if c.clusters > c.stations {
        return bad(format!("{} clusters exceed {} stations", c.clusters, c.stations));
    }
    if !(c.noise >= 0.0 && c.noise.is_finite()) {
        return bad(format!("noise must be a non-negative number, got {}", c.noise));
    }
    Ok(())
}

fn round(v: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (v * f).round() / f
}

pub fn generate(config: &SynthConfig) -> Result<Synthetic> {
    validate(config)?;
    let SynthConfig {
        stations: n,
        timestamps: t,
        species: d,
        sources: p,
        clusters: g,
        ..
    } = *config;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let times: Vec<DateTime<Utc>> = (0..t).map(|i| start_time() + step() * i as i32).collect();
    let station_ids: Vec<String> = (0..n).map(|j| format!("S{:02}", j + 1)).collect();
    let species: Vec<String> = (0..d).map(|s| format!("X{:02}", s + 1)).collect();
    let source_ids: Vec<String> = (0..p).map(source_label).collect();

    // Profiles on disjoint species blocks.
    let mut h0 = Array2::<f64>::zeros((p, d));
    for k in 0..p {
        for s in (k * d / p)..((k + 1) * d / p) {
            h0[[k, s]] = rng.random_range(0.2..1.0);
        }
    }

    let mut groups: Vec<usize> = (0..n).map(|j| j * g / n).collect();
    groups.shuffle(&mut rng);

    let windows: Vec<PeakWindow> = (0..g)
        .map(|grp| {
            let (start, end) = (grp * t / g, ((grp + 1) * t / g).max(grp * t / g + 1) - 1);
            PeakWindow {
                group: grp,
                source: grp % p,
                start,
                end,
                from: times[start],
                to: times[end],
            }
        })
        .collect();

    let base: Vec<Vec<f64>> = (0..g)
        .map(|grp| {
            (0..p)
                .map(|k| rng.random_range(0.5..1.0) * if k == grp % p && p > 1 { 3.0 } else { 1.0 })
                .collect()
        })
        .collect();
    let station_scale: Vec<f64> = (0..n).map(|_| rng.random_range(0.9..1.1)).collect();
    let mut w0 = Array3::<f64>::zeros((t, n, p));
    for i in 0..t {
        for j in 0..n {
            let w = &windows[groups[j]];
            for k in 0..p {
                let peak = if k == w.source && (w.start..=w.end).contains(&i) {
                    2.0
                } else {
                    1.0
                };
                w0[[i, j, k]] = base[groups[j]][k] * peak * station_scale[j] * rng.random_range(0.9..1.1);
            }
        }
    }

    // V = W0 H0 + noise, per (time, station) row.
    let mut signal = Array3::<f64>::zeros((t, n, d));
    for i in 0..t {
        for j in 0..n {
            for s in 0..d {
                signal[[i, j, s]] = (0..p).map(|k| w0[[i, j, k]] * h0[[k, s]]).sum();
            }
        }
    }
    let rms = (signal.iter().map(|v| v * v).sum::<f64>() / signal.len() as f64).sqrt();
    let sd = config.noise * rms;
    let values = if sd > 0.0 {
        let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        signal.mapv(|v| round((v + normal.sample(&mut rng)).max(0.0), 6))
    } else {
        signal.mapv(|v| round(v, 6))
    };
    let noise_power: f64 = values.iter().zip(signal.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let signal_power: f64 = signal.iter().map(|v| v * v).sum();
    let snr_db = (sd > 0.0 && noise_power > 0.0).then(|| 10.0 * (signal_power / noise_power).log10());

    let species_tensor =
        SpatioTemporalTensor::complete(values.clone(), times.clone(), station_ids.clone(), species.clone())?;

    // Stations placed around one centre per group.
    let centres: Vec<(f64, f64)> = (0..g)
        .map(|grp| {
            let a = std::f64::consts::TAU * grp as f64 / g as f64;
            (24.0 + 0.3 * a.sin(), 120.7 + 0.3 * a.cos())
        })
        .collect();
    let stations: Vec<Station> = (0..n)
        .map(|j| {
            let (lat, lon) = centres[groups[j]];
            Station {
                station_id: station_ids[j].clone(),
                name: format!("Station {}", j + 1),
                lat: round(lat + rng.random_range(-0.08..0.08), 5),
                lon: round(lon + rng.random_range(-0.08..0.08), 5),
            }
        })
        .collect();

    // Hourly PM2.5 follows the species total of the enclosing 12 h step.
    let hours = (t - 1) * 12 + 12;
    let first_hour = start_time() - Duration::hours(11);
    let mut pm25 = BTreeMap::new();
    let mut temperature = BTreeMap::new();
    for (j, id) in station_ids.iter().enumerate() {
        for h in 0..hours {
            let ts = first_hour + Duration::hours(h as i64);
            let i = (h + 11) / 12;
            let total: f64 = (0..d).map(|s| values[[i.min(t - 1), j, s]]).sum();
            let diurnal = 1.0 + 0.2 * (std::f64::consts::TAU * (h % 24) as f64 / 24.0).sin();
            if rng.random_bool(0.01) {
                continue;
            }
            let v = 3.0 * total * diurnal * rng.random_range(0.9..1.1);
            pm25.insert((id.clone(), ts), round(v, 2));
            let temp = 22.0 + 5.0 * (std::f64::consts::TAU * ((h + 15) % 24) as f64 / 24.0).sin();
            temperature.insert((id.clone(), ts), round(temp + rng.random_range(-0.5..0.5), 2));
        }
    }
    let hourly = Duration::hours(1);
    let pollutants = vec![AuxiliarySeries {
        kind: SeriesKind::Pollutant,
        name: "pm25".into(),
        samples: pm25,
        cadence: hourly,
    }];
    let meteorology = vec![AuxiliarySeries {
        kind: SeriesKind::Meteorology,
        name: "temperature".into(),
        samples: temperature,
        cadence: hourly,
    }];

    // Three low-cost sensors near each station, read at species timestamps.
    let mut sensors = Vec::new();
    let mut readings = BTreeMap::new();
    for (j, st) in stations.iter().enumerate() {
        for q in 0..3 {
            let id = format!("G{:02}{}", j + 1, q + 1);
            sensors.push(GridSensor {
                sensor_id: id.clone(),
                lat: round(st.lat + rng.random_range(-0.03..0.03), 5),
                lon: round(st.lon + rng.random_range(-0.03..0.03), 5),
            });
            for (i, ts) in times.iter().enumerate() {
                let total: f64 = (0..d).map(|s| values[[i, j, s]]).sum();
                readings.insert((id.clone(), *ts), round(3.0 * total * rng.random_range(0.85..1.15), 2));
            }
        }
    }

    let truth = GroundTruth {
        config: *config,
        species,
        source_ids,
        h0: h0.rows().into_iter().map(|r| r.to_vec()).collect(),
        station_ids,
        groups,
        dominance: windows,
        snr_db,
    };
    let dataset = Dataset {
        catalog: StationCatalog::new(stations)?,
        species: species_tensor,
        pollutants,
        meteorology,
        grid: Some(GridSensorSet { sensors, readings }),
        warnings: Vec::new(),
    };
    Ok(Synthetic { dataset, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        for bad in [
            SynthConfig {
                sources: 0,
                ..Default::default()
            },
            SynthConfig {
                species: 2,
                sources: 3,
                ..Default::default()
            },
            SynthConfig {
                clusters: 13,
                ..Default::default()
            },
            SynthConfig {
                timestamps: 1,
                ..Default::default()
            },
            SynthConfig {
                noise: -0.1,
                ..Default::default()
            },
        ] {
            assert!(matches!(generate(&bad), Err(Error::InvalidConfig(_))), "{bad:?}");
        }
    }

    #[test]
    fn planted_structure() {
        let s = generate(&SynthConfig {
            sources: 3,
            species: 10,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.truth.h0.len(), 3);
        assert_eq!(s.truth.dominance.len(), 3);
        assert_eq!(s.dataset.species.dim(), (40, 12, 10));
        let mut counts = [0; 3];
        s.truth.groups.iter().for_each(|&g| counts[g] += 1);
        assert_eq!(counts, [4, 4, 4]);
        let h = s.truth.h0_matrix();
        for a in 0..3 {
            for b in (a + 1)..3 {
                assert_eq!(h.row(a).dot(&h.row(b)), 0.0);
            }
        }
        assert!(s.truth.snr_db.unwrap() > 20.0, "{:?}", s.truth.snr_db);
    }

    #[test]
    fn noiseless_is_exact_product() {
        let s = generate(&SynthConfig {
            noise: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(s.truth.snr_db.is_none());
        assert!(s.dataset.species.values().iter().all(|v| *v >= 0.0));
    }
}
