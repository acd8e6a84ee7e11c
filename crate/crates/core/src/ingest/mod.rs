//! Loading and validation of the CSV inputs, plus resampling of hourly
//! measurements onto the species tensor's timestamps.

mod auxiliary;
mod catalog;
mod csvio;
mod dataset;
mod grid;
mod species;
mod time;

pub use auxiliary::{
    align_to_tensor_cadence, load_auxiliary, write_auxiliary, AlignedSeries, AuxiliaryLoad, AuxiliarySeries, SeriesKind,
};
pub use catalog::{load_stations, write_stations, Station, StationCatalog};
pub use dataset::{
    dataset_id, Dataset, DATASET_FILES, GRID_READINGS_FILE, GRID_SENSORS_FILE, METEOROLOGY_FILE, POLLUTANTS_FILE,
    SPECIES_FILE, STATIONS_FILE,
};
pub use grid::{load_grid, write_grid, GridSensor, GridSensorSet};
pub use species::{load_species, write_species};
pub use time::{format_timestamp, parse_timestamp};
