use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::catalog::StationCatalog;
use super::csvio::{open_csv, parse_number};
use super::species::csv_write_err;
use super::time::{format_timestamp, parse_timestamp};
use crate::data::modal_step;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Pollutant,
    Meteorology,
}

/// One measure (e.g. PM2.5 or temperature) across stations. Missing samples
/// are absent keys.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySeries {
    pub kind: SeriesKind,
    pub name: String,
    pub samples: BTreeMap<(String, DateTime<Utc>), f64>,
    pub cadence: Duration,
}

impl AuxiliarySeries {
    pub fn get(&self, station: &str, ts: DateTime<Utc>) -> Option<f64> {
        self.samples.get(&(station.to_string(), ts)).copied()
    }

    pub fn stations(&self) -> BTreeSet<&str> {
        self.samples.keys().map(|(s, _)| s.as_str()).collect()
    }

    /// Samples of one station in time order.
    pub fn station_samples<'a>(&'a self, station: &'a str) -> impl Iterator<Item = (DateTime<Utc>, f64)> + 'a {
        self.samples
            .range((station.to_string(), DateTime::<Utc>::MIN_UTC)..)
            .take_while(move |((s, _), _)| s == station)
            .map(|((_, t), v)| (*t, *v))
    }

    /// Keeps only the named stations.
    pub fn retain_stations(&self, keep: &[&str]) -> Self {
        let keep: BTreeSet<&str> = keep.iter().copied().collect();
        Self {
            samples: self
                .samples
                .iter()
                .filter(|((s, _), _)| keep.contains(s.as_str()))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuxiliaryLoad {
    pub series: Vec<AuxiliarySeries>,
    /// Non-fatal findings such as an irregular cadence.
    pub warnings: Vec<String>,
}

/// Share of timestamp steps allowed to deviate from the modal step before an
/// irregular-cadence warning is raised.
const IRREGULAR_STEP_SHARE: f64 = 0.05;

/// Reads `timestamp,station_id,<measure...>`; one series per measure column.
pub fn load_auxiliary(path: &Path, kind: SeriesKind, catalog: &StationCatalog) -> Result<AuxiliaryLoad> {
    let mut rows = open_csv(path)?;
    rows.expect_header(&["timestamp", "station_id"])?;
    let measures: Vec<String> = rows.header()[2..].to_vec();
    let mut samples: Vec<BTreeMap<(String, DateTime<Utc>), f64>> = vec![BTreeMap::new(); measures.len()];
    let mut seen: HashMap<(String, DateTime<Utc>), usize> = HashMap::new();
    let mut stamps = BTreeSet::new();

    while let Some(rec) = rows.next_record()? {
        let line = rows.line();
        let stamp = rec.get(0).unwrap_or_default();
        let ts = parse_timestamp(stamp).ok_or_else(|| rows.malformed(&format!("bad timestamp `{stamp}`")))?;
        let station = rec.get(1).unwrap_or_default().to_string();
        if catalog.position(&station).is_none() {
            return Err(Error::UnknownStation {
                file: rows.file().to_string(),
                line,
                station,
            });
        }
        if let Some(first) = seen.insert((station.clone(), ts), line) {
            return Err(Error::DuplicateSample {
                file: rows.file().to_string(),
                key: format!("{station}, {}", format_timestamp(&ts)),
                first_line: first,
                second_line: line,
            });
        }
        stamps.insert(ts);
        for (m, name) in measures.iter().enumerate() {
            let cell = rec.get(m + 2).unwrap_or_default();
            let v = parse_number(cell).map_err(|_| rows.malformed(&format!("`{cell}` is not a number ({name})")))?;
            if let Some(v) = v {
                samples[m].insert((station.clone(), ts), v);
            }
        }
    }

    let stamps: Vec<_> = stamps.into_iter().collect();
    let cadence = modal_step(&stamps).unwrap_or_else(|| Duration::hours(1));
    let mut warnings = Vec::new();
    let steps = stamps.len().saturating_sub(1);
    let deviating = stamps.windows(2).filter(|w| w[1] - w[0] != cadence).count();
    if steps > 0 && deviating as f64 > IRREGULAR_STEP_SHARE * steps as f64 {
        warnings.push(format!(
            "{}: irregular cadence, {deviating} of {steps} steps differ from the modal {}s",
            rows.file(),
            cadence.num_seconds()
        ));
    }

    let series = measures
        .into_iter()
        .zip(samples)
        .map(|(name, samples)| AuxiliarySeries {
            kind,
            name,
            samples,
            cadence,
        })
        .collect();
    Ok(AuxiliaryLoad { series, warnings })
}

/// An auxiliary series resampled onto the tensor's timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSeries {
    pub series: AuxiliarySeries,
    /// Cells averaged from fewer samples than the interval holds.
    pub partial: BTreeSet<(String, DateTime<Utc>)>,
}

/// Averages each station's samples over the interval `(ts - step, ts]` ending
/// at every tensor timestamp. Intervals without samples stay missing.
pub fn align_to_tensor_cadence(
    series: &AuxiliarySeries,
    tensor_times: &[DateTime<Utc>],
    tensor_step: Duration,
) -> Result<AlignedSeries> {
    let (s, t) = (series.cadence.num_seconds(), tensor_step.num_seconds());
    if s <= 0 || t <= 0 || t % s != 0 {
        return Err(Error::IncompatibleCadence {
            series_secs: s,
            tensor_secs: t,
        });
    }
    let expected = (t / s) as usize;
    let mut samples = BTreeMap::new();
    let mut partial = BTreeSet::new();
    for station in series.stations() {
        for &end in tensor_times {
            let lo = (station.to_string(), end - tensor_step + Duration::seconds(1));
            let hi = (station.to_string(), end);
            let (sum, count) = series
                .samples
                .range(lo..=hi)
                .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
            if count == 0 {
                continue;
            }
            samples.insert((station.to_string(), end), sum / count as f64);
            if count < expected {
                partial.insert((station.to_string(), end));
            }
        }
    }
    Ok(AlignedSeries {
        series: AuxiliarySeries {
            kind: series.kind,
            name: series.name.clone(),
            samples,
            cadence: tensor_step,
        },
        partial,
    })
}

/// Writes series sharing one file in `load_auxiliary` format.
pub fn write_auxiliary(series: &[AuxiliarySeries], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["timestamp".to_string(), "station_id".to_string()];
    header.extend(series.iter().map(|s| s.name.clone()));
    w.write_record(&header).map_err(csv_write_err)?;
    let keys: BTreeSet<(DateTime<Utc>, &str)> = series
        .iter()
        .flat_map(|s| s.samples.keys().map(|(st, t)| (*t, st.as_str())))
        .collect();
    for (ts, station) in keys {
        let mut rec = vec![format_timestamp(&ts), station.to_string()];
        rec.extend(series.iter().map(|s| match s.get(station, ts) {
            Some(v) => format!("{v}"),
            None => String::new(),
        }));
        w.write_record(&rec).map_err(csv_write_err)?;
    }
    w.flush()?;
    Ok(())
}
