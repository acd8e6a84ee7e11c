use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use ndarray::Array3;

use super::catalog::StationCatalog;
use super::csvio::{open_csv, parse_number};
use super::time::{format_timestamp, parse_timestamp};
use crate::data::{modal_step, SpatioTemporalTensor};
use crate::error::{Error, Result};

/// Reads `timestamp,station_id,<feature...>` into a tensor over every catalog
/// station. Cells that are empty or absent from the file stay unobserved.
pub fn load_species(path: &Path, catalog: &StationCatalog) -> Result<SpatioTemporalTensor> {
    let mut rows = open_csv(path)?;
    rows.expect_header(&["timestamp", "station_id"])?;
    let features: Vec<String> = rows.header()[2..].to_vec();
    if features.is_empty() {
        return Err(rows.malformed("no species columns"));
    }

    let mut cells: BTreeMap<(DateTime<Utc>, usize), (usize, Vec<Option<f64>>)> = BTreeMap::new();
    while let Some(rec) = rows.next_record()? {
        let line = rows.line();
        let stamp = rec.get(0).unwrap_or_default();
        let ts = parse_timestamp(stamp).ok_or_else(|| rows.malformed(&format!("bad timestamp `{stamp}`")))?;
        let station_id = rec.get(1).unwrap_or_default();
        let station = catalog.position(station_id).ok_or_else(|| Error::UnknownStation {
            file: rows.file().to_string(),
            line,
            station: station_id.to_string(),
        })?;
        let mut values = Vec::with_capacity(features.len());
        for (k, feature) in features.iter().enumerate() {
            let cell = rec.get(k + 2).unwrap_or_default();
            let v = parse_number(cell).map_err(|_| rows.malformed(&format!("`{cell}` is not a number ({feature})")))?;
            if let Some(v) = v.filter(|v| *v < 0.0) {
                return Err(Error::NegativeConcentration {
                    file: rows.file().to_string(),
                    line,
                    feature: feature.clone(),
                    value: v,
                });
            }
            values.push(v);
        }
        if let Some((first, _)) = cells.insert((ts, station), (line, values)) {
            return Err(Error::DuplicateSample {
                file: rows.file().to_string(),
                key: format!("{station_id}, {}", format_timestamp(&ts)),
                first_line: first,
                second_line: line,
            });
        }
    }

    let observed: BTreeSet<DateTime<Utc>> = cells.keys().map(|(ts, _)| *ts).collect();
    let time_index = regular_grid(&observed.into_iter().collect::<Vec<_>>());
    let time_pos: HashMap<DateTime<Utc>, usize> = time_index.iter().enumerate().map(|(i, t)| (*t, i)).collect();

    let (t, n, d) = (time_index.len(), catalog.len(), features.len());
    let mut values = Array3::zeros((t, n, d));
    let mut mask = Array3::from_elem((t, n, d), false);
    for ((ts, j), (_, row)) in &cells {
        let i = time_pos[ts];
        for (k, v) in row.iter().enumerate() {
            if let Some(v) = v {
                values[[i, *j, k]] = *v;
                mask[[i, *j, k]] = true;
            }
        }
    }
    SpatioTemporalTensor::new(values, mask, time_index, catalog.ids(), features)
}

/// Fills whole missing timestamps when every observed gap is a multiple of the
/// modal step; otherwise keeps the observed stamps as they are.
fn regular_grid(observed: &[DateTime<Utc>]) -> Vec<DateTime<Utc>> {
    let Some(step) = modal_step(observed) else {
        return observed.to_vec();
    };
    let secs = step.num_seconds();
    let aligned = secs > 0 && observed.windows(2).all(|w| (w[1] - w[0]).num_seconds() % secs == 0);
    if !aligned {
        return observed.to_vec();
    }
    let (first, last) = (observed[0], observed[observed.len() - 1]);
    let count = (last - first).num_seconds() / secs + 1;
    (0..count).map(|i| first + Duration::seconds(i * secs)).collect()
}

/// Writes observed cells back out in `load_species` format. Rows with no
/// observed feature are skipped.
pub fn write_species(tensor: &SpatioTemporalTensor, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["timestamp".to_string(), "station_id".to_string()];
    header.extend(tensor.feature_index().iter().cloned());
    w.write_record(&header).map_err(csv_write_err)?;
    let (t, n, d) = tensor.dim();
    for i in 0..t {
        for j in 0..n {
            if !(0..d).any(|k| tensor.mask()[[i, j, k]]) {
                continue;
            }
            let mut rec = vec![
                format_timestamp(&tensor.time_index()[i]),
                tensor.station_index()[j].clone(),
            ];
            rec.extend((0..d).map(|k| {
                if tensor.mask()[[i, j, k]] {
                    format!("{}", tensor.values()[[i, j, k]])
                } else {
                    String::new()
                }
            }));
            w.write_record(&rec).map_err(csv_write_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_write_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
