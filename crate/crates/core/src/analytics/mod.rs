//! Summaries computed from pipeline outputs: source/measure correlations,
//! per-cluster transitions, dominance periods, gridded PM2.5 and anomalies.

mod anomaly;
mod correlation;
mod dominance;
mod grid;
mod transitions;

pub use anomaly::{anomaly_scan, Anomaly, ThresholdMode};
pub use correlation::{correlate_measures, correlate_sources, pearson, CorrelationTable, MIN_PAIRS};
pub use dominance::{dominance_intervals, dominance_periods, DominanceInterval};
pub use grid::{grid_pm25, GridCell, GridSummary, DEFAULT_CELL_DEG};
pub use transitions::{cluster_transitions, pm25_series, ClusterSeries, Pm25Series, StationSeries, TransitionSeries};
