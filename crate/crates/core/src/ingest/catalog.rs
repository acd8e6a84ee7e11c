use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::csvio::{open_csv, parse_number, CsvRows};
use super::species::csv_write_err;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub station_id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// Monitoring stations with their GPS coordinates, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationCatalog {
    entries: Vec<Station>,
    positions: HashMap<String, usize>,
}

impl StationCatalog {
    pub fn new(entries: Vec<Station>) -> Result<Self> {
        let mut positions = HashMap::with_capacity(entries.len());
        for (i, s) in entries.iter().enumerate() {
            if !(-90.0..=90.0).contains(&s.lat) || !(-180.0..=180.0).contains(&s.lon) {
                return Err(Error::InvalidConfig(format!(
                    "station `{}` has out-of-range coordinates ({}, {})",
                    s.station_id, s.lat, s.lon
                )));
            }
            if positions.insert(s.station_id.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate station_id `{}`", s.station_id)));
            }
        }
        Ok(Self { entries, positions })
    }

    pub fn entries(&self) -> &[Station] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, station_id: &str) -> Option<usize> {
        self.positions.get(station_id).copied()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|s| s.station_id.clone()).collect()
    }
}

/// Reads `station_id,name,lat,lon`.
pub fn load_stations(path: &Path) -> Result<StationCatalog> {
    let mut rows = open_csv(path)?;
    rows.expect_header(&["station_id", "name", "lat", "lon"])?;
    let mut entries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    while let Some(rec) = rows.next_record()? {
        let line = rows.line();
        let station_id = rec.get(0).unwrap_or_default().trim().to_string();
        if station_id.is_empty() {
            return Err(rows.malformed("empty station_id"));
        }
        if let Some(first) = seen.insert(station_id.clone(), line) {
            return Err(Error::DuplicateSample {
                file: rows.file().to_string(),
                key: station_id,
                first_line: first,
                second_line: line,
            });
        }
        let lat = coordinate(&rows, rec.get(2), "lat", 90.0)?;
        let lon = coordinate(&rows, rec.get(3), "lon", 180.0)?;
        entries.push(Station {
            station_id,
            name: rec.get(1).unwrap_or_default().trim().to_string(),
            lat,
            lon,
        });
    }
    StationCatalog::new(entries)
}

pub fn write_stations(catalog: &StationCatalog, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["station_id", "name", "lat", "lon"])
        .map_err(csv_write_err)?;
    for s in catalog.entries() {
        w.write_record([
            s.station_id.clone(),
            s.name.clone(),
            s.lat.to_string(),
            s.lon.to_string(),
        ])
        .map_err(csv_write_err)?;
    }
    w.flush()?;
    Ok(())
}

fn coordinate(rows: &CsvRows, cell: Option<&str>, what: &str, bound: f64) -> Result<f64> {
    let v = parse_number(cell.unwrap_or_default())
        .map_err(|_| rows.malformed(&format!("{what} is not a number")))?
        .ok_or_else(|| rows.malformed(&format!("{what} is empty")))?;
    if v.abs() > bound {
        return Err(rows.malformed(&format!("{what} {v} outside [-{bound}, {bound}]")));
    }
    Ok(v)
}
