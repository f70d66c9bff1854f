//! Lie brackets of the drift and control fields, accessibility rank and
//! the classification of degenerate potentials.

mod degeneracy;
mod numeric;
mod rank;
mod series;

pub use degeneracy::{degeneracy_scan, kalman_rank, Classification, DegeneracyReport, ScanGrid};
pub use numeric::{numeric_bracket, numeric_bracket_with, StepRule, Stencil, VectorField};
pub use rank::{
    accessibility_family, ad_drift_powers, closed_form_bracket_family, default_depth,
    genericity_determinant, lie_rank, rank_of_family, spanning_chain, FamilyMember, RankReport,
    DEFAULT_RANK_TOL,
};
