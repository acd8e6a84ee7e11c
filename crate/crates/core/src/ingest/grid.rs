use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::csvio::{open_csv, parse_number};
use super::species::csv_write_err;
use super::time::{format_timestamp, parse_timestamp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSensor {
    pub sensor_id: String,
    pub lat: f64,
    pub lon: f64,
}

/// Dense low-cost PM2.5 sensors and their readings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridSensorSet {
    pub sensors: Vec<GridSensor>,
    pub readings: BTreeMap<(String, DateTime<Utc>), f64>,
}

impl GridSensorSet {
    pub fn timestamps(&self) -> BTreeSet<DateTime<Utc>> {
        self.readings.keys().map(|(_, t)| *t).collect()
    }
}

/// Reads `grid_sensors.csv` (`sensor_id,lat,lon`) and `grid_readings.csv`
/// (`timestamp,sensor_id,pm25`).
pub fn load_grid(sensors_path: &Path, readings_path: &Path) -> Result<GridSensorSet> {
    let mut rows = open_csv(sensors_path)?;
    rows.expect_header(&["sensor_id", "lat", "lon"])?;
    let mut sensors = Vec::new();
    let mut lines: HashMap<String, usize> = HashMap::new();
    while let Some(rec) = rows.next_record()? {
        let id = rec.get(0).unwrap_or_default().to_string();
        let coord = |i: usize, bound: f64| -> Result<f64> {
            match parse_number(rec.get(i).unwrap_or_default()) {
                Ok(Some(v)) if v.abs() <= bound => Ok(v),
                _ => Err(rows.malformed("bad sensor coordinate")),
            }
        };
        let (lat, lon) = (coord(1, 90.0)?, coord(2, 180.0)?);
        if let Some(first) = lines.insert(id.clone(), rows.line()) {
            return Err(Error::DuplicateSample {
                file: rows.file().to_string(),
                key: id,
                first_line: first,
                second_line: rows.line(),
            });
        }
        sensors.push(GridSensor {
            sensor_id: id,
            lat,
            lon,
        });
    }

    let mut rows = open_csv(readings_path)?;
    rows.expect_header(&["timestamp", "sensor_id", "pm25"])?;
    let mut readings = BTreeMap::new();
    let mut seen: HashMap<(String, DateTime<Utc>), usize> = HashMap::new();
    while let Some(rec) = rows.next_record()? {
        let line = rows.line();
        let stamp = rec.get(0).unwrap_or_default();
        let ts = parse_timestamp(stamp).ok_or_else(|| rows.malformed(&format!("bad timestamp `{stamp}`")))?;
        let id = rec.get(1).unwrap_or_default().to_string();
        if !lines.contains_key(&id) {
            return Err(Error::UnknownStation {
                file: rows.file().to_string(),
                line,
                station: id,
            });
        }
        if let Some(first) = seen.insert((id.clone(), ts), line) {
            return Err(Error::DuplicateSample {
                file: rows.file().to_string(),
                key: format!("{id}, {}", format_timestamp(&ts)),
                first_line: first,
                second_line: line,
            });
        }
        let cell = rec.get(2).unwrap_or_default();
        match parse_number(cell) {
            Ok(None) => {}
            Ok(Some(v)) if v < 0.0 => {
                return Err(Error::NegativeConcentration {
                    file: rows.file().to_string(),
                    line,
                    feature: "pm25".into(),
                    value: v,
                })
            }
            Ok(Some(v)) => {
                readings.insert((id, ts), v);
            }
            Err(()) => return Err(rows.malformed(&format!("`{cell}` is not a number"))),
        }
    }
    Ok(GridSensorSet { sensors, readings })
}

pub fn write_grid(grid: &GridSensorSet, sensors_out: impl Write, readings_out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sensors_out);
    w.write_record(["sensor_id", "lat", "lon"]).map_err(csv_write_err)?;
    for s in &grid.sensors {
        w.write_record([s.sensor_id.clone(), s.lat.to_string(), s.lon.to_string()])
            .map_err(csv_write_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(readings_out);
    w.write_record(["timestamp", "sensor_id", "pm25"])
        .map_err(csv_write_err)?;
    let mut by_time: Vec<_> = grid.readings.iter().collect();
    by_time.sort_by(|a, b| (a.0 .1, &a.0 .0).cmp(&(b.0 .1, &b.0 .0)));
    for ((id, ts), v) in by_time {
        w.write_record([format_timestamp(ts), id.clone(), v.to_string()])
            .map_err(csv_write_err)?;
    }
    w.flush()?;
    Ok(())
}
