use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::GridSensorSet;

pub const DEFAULT_CELL_DEG: f64 = 0.05;

/// Slack for coordinates that land on a cell edge up to round-off.
const EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub row: i64,
    pub col: i64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub mean: f64,
    pub count: usize,
}

/// Mean PM2.5 per occupied cell at one timestamp. Cells are indexed from the
/// south-west corner of the sensors' bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub cell_deg: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub timestamp: DateTime<Utc>,
    pub cells: Vec<GridCell>,
}

fn index(x: f64, origin: f64, cell: f64) -> i64 {
    ((x - origin) / cell + EDGE_SLACK).floor() as i64
}

pub fn grid_pm25(grid: &GridSensorSet, cell_deg: f64, timestamp: DateTime<Utc>) -> Result<GridSummary> {
    if !(cell_deg > 0.0 && cell_deg.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "cell size must be positive, got {cell_deg}"
        )));
    }
    let origin_lat = grid.sensors.iter().map(|s| s.lat).fold(f64::INFINITY, f64::min);
    let origin_lon = grid.sensors.iter().map(|s| s.lon).fold(f64::INFINITY, f64::min);
    let mut acc: BTreeMap<(i64, i64), (f64, usize)> = BTreeMap::new();
    for s in &grid.sensors {
        if let Some(&v) = grid.readings.get(&(s.sensor_id.clone(), timestamp)) {
            let e = acc
                .entry((index(s.lat, origin_lat, cell_deg), index(s.lon, origin_lon, cell_deg)))
                .or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    let cells = acc
        .into_iter()
        .map(|((row, col), (sum, count))| GridCell {
            row,
            col,
            lat_min: origin_lat + row as f64 * cell_deg,
            lat_max: origin_lat + (row + 1) as f64 * cell_deg,
            lon_min: origin_lon + col as f64 * cell_deg,
            lon_max: origin_lon + (col + 1) as f64 * cell_deg,
            mean: sum / count as f64,
            count,
        })
        .collect();
    Ok(GridSummary {
        cell_deg,
        origin_lat: if origin_lat.is_finite() { origin_lat } else { 0.0 },
        origin_lon: if origin_lon.is_finite() { origin_lon } else { 0.0 },
        timestamp,
        cells,
    })
}
