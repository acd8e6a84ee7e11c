use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::auxiliary::{load_auxiliary, write_auxiliary, AuxiliarySeries, SeriesKind};
use super::catalog::{load_stations, write_stations, StationCatalog};
use super::grid::{load_grid, write_grid, GridSensorSet};
use super::species::{load_species, write_species};
use crate::data::SpatioTemporalTensor;
use crate::error::{Error, Result};

pub const STATIONS_FILE: &str = "stations.csv";
pub const SPECIES_FILE: &str = "species.csv";
pub const POLLUTANTS_FILE: &str = "pollutants.csv";
pub const METEOROLOGY_FILE: &str = "meteorology.csv";
pub const GRID_SENSORS_FILE: &str = "grid_sensors.csv";
pub const GRID_READINGS_FILE: &str = "grid_readings.csv";

/// The six input files, in hashing order.
pub const DATASET_FILES: [&str; 6] = [
    STATIONS_FILE,
    SPECIES_FILE,
    POLLUTANTS_FILE,
    METEOROLOGY_FILE,
    GRID_SENSORS_FILE,
    GRID_READINGS_FILE,
];

/// Everything loaded from one data directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub catalog: StationCatalog,
    pub species: SpatioTemporalTensor,
    pub pollutants: Vec<AuxiliarySeries>,
    pub meteorology: Vec<AuxiliarySeries>,
    pub grid: Option<GridSensorSet>,
    pub warnings: Vec<String>,
}

impl Dataset {
    /// Loads a directory holding the input CSVs. The catalog and species files
    /// are required; the rest are optional.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let catalog = load_stations(&dir.join(STATIONS_FILE))?;
        let species = load_species(&dir.join(SPECIES_FILE), &catalog)?;
        let mut warnings = Vec::new();

        let mut aux = |file: &str, kind: SeriesKind| -> Result<Vec<AuxiliarySeries>> {
            let path = dir.join(file);
            if !path.exists() {
                warnings.push(format!("{file} not provided"));
                return Ok(Vec::new());
            }
            let load = load_auxiliary(&path, kind, &catalog)?;
            warnings.extend(load.warnings);
            Ok(load.series)
        };
        let pollutants = aux(POLLUTANTS_FILE, SeriesKind::Pollutant)?;
        let meteorology = aux(METEOROLOGY_FILE, SeriesKind::Meteorology)?;

        let (gs, gr) = (dir.join(GRID_SENSORS_FILE), dir.join(GRID_READINGS_FILE));
        let grid = match (gs.exists(), gr.exists()) {
            (true, true) => Some(load_grid(&gs, &gr)?),
            (false, false) => {
                warnings.push("grid sensor files not provided".into());
                None
            }
            (false, true) => return Err(Error::MissingInput(gs)),
            (true, false) => return Err(Error::MissingInput(gr)),
        };
        if species.missing_count() > 0 {
            warnings.push(format!(
                "species tensor has {} unobserved cells",
                species.missing_count()
            ));
        }
        Ok(Self {
            catalog,
            species,
            pollutants,
            meteorology,
            grid,
            warnings,
        })
    }

    /// Writes the dataset in the layout `load_dir` reads. Empty optional parts
    /// are not written.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let create = |name: &str| fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        write_stations(&self.catalog, create(STATIONS_FILE)?)?;
        write_species(&self.species, create(SPECIES_FILE)?)?;
        if !self.pollutants.is_empty() {
            write_auxiliary(&self.pollutants, create(POLLUTANTS_FILE)?)?;
        }
        if !self.meteorology.is_empty() {
            write_auxiliary(&self.meteorology, create(METEOROLOGY_FILE)?)?;
        }
        if let Some(grid) = &self.grid {
            write_grid(grid, create(GRID_SENSORS_FILE)?, create(GRID_READINGS_FILE)?)?;
        }
        Ok(())
    }

    pub fn pm25(&self) -> Option<&AuxiliarySeries> {
        self.pollutants
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case("pm25") || s.name.eq_ignore_ascii_case("pm2.5"))
    }
}

/// Content hash over the input files present in `dir`, independent of file
/// timestamps or directory location.
pub fn dataset_id(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for name in DATASET_FILES {
        let path: PathBuf = dir.join(name);
        if !path.exists() {
            continue;
        }
        let bytes = fs::read(&path)?;
        hasher.update(name.as_bytes());
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(&hasher.finalize()[..12]))
}
