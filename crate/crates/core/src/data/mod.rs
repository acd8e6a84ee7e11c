//! Tensor and matrix types shared by the pipeline, plus unfolding,
//! normalization, and missing-value handling.

mod impute;
mod normalize;
mod tensor;

pub(crate) use impute::median;
pub use impute::{impute, ImputationReport, ImputePolicy, Imputed, ImputedCount};
pub use normalize::{normalize_rows, NormKind, NormalizedMatrix};
pub(crate) use tensor::modal_step;
pub use tensor::{
    flatten_station_by_source, fold_rows, fold_to_station_by_source, unfold, SpatioTemporalTensor, UnfoldedMatrix,
};
