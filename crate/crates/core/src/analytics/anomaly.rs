use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::data::median;
use crate::ingest::AuxiliarySeries;

/// Scales the MAD to a standard-deviation estimate under normality.
const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "threshold")]
pub enum ThresholdMode {
    /// Flag values strictly above this level.
    Absolute(f64),
    /// Flag values whose per-station robust z-score exceeds this.
    RobustZ(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub station_id: String,
    pub timestamp: DateTime<Utc>,
    pub value: f64,
    /// Robust z-score, or the value itself in absolute mode.
    pub score: f64,
}

/// Flags unusual readings, highest value first.
pub fn anomaly_scan(series: &AuxiliarySeries, mode: ThresholdMode) -> Vec<Anomaly> {
    let mut out = Vec::new();
    for station in series.stations() {
        let samples: Vec<(DateTime<Utc>, f64)> = series.station_samples(station).collect();
        match mode {
            ThresholdMode::Absolute(level) => out.extend(samples.iter().filter(|(_, v)| *v > level).map(
                |&(timestamp, value)| Anomaly {
                    station_id: station.to_string(),
                    timestamp,
                    value,
                    score: value,
                },
            )),
            ThresholdMode::RobustZ(z) => {
                let Some(med) = median(samples.iter().map(|s| s.1).collect()) else {
                    continue;
                };
                let mad = median(samples.iter().map(|s| (s.1 - med).abs()).collect()).unwrap_or(0.0);
                if mad <= 0.0 {
                    continue;
                }
                for &(timestamp, value) in &samples {
                    let score = (value - med).abs() / (MAD_SCALE * mad);
                    if score > z {
                        out.push(Anomaly {
                            station_id: station.to_string(),
                            timestamp,
                            value,
                            score,
                        });
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then_with(|| a.station_id.cmp(&b.station_id))
            .then_with(|| a.timestamp.cmp(&b.timestamp))
    });
    out
}
