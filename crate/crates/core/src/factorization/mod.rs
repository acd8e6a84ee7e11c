//! Source extraction by NMF on the unfolded species matrix, with helpers for
//! reading the resulting profiles.

mod diagnostics;
mod interpret;
mod nmf;
mod nndsvd;

pub use diagnostics::{select_p_diagnostics, RankDiagnostic};
pub use interpret::{
    interpret_row, rank_species, source_label, source_labels, top_species, SourceProfile, SpeciesRank,
    DEFAULT_TOP_SPECIES,
};
pub use nmf::{explained_variance_ratio, run_nmf, FactorizationResult, NmfConfig, DENOMINATOR_EPSILON};
pub use nndsvd::{nndsvd, NndsvdFill};
