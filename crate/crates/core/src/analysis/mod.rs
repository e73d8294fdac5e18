//! Error decomposition, theoretical bound evaluators and Monte-Carlo checks
//! of the spectral and concentration inequalities behind them.

mod bounds;
mod checks;
mod decomposition;

pub use bounds::{
    compressed_tolerance, corollary2_bound, empirical_vs_bound, theorem1_bound, BoundRecord,
    KappaRule,
};
pub use checks::{
    check_meta_concentration, check_prop1, check_var_spectrum, check_wishart_spectrum, CheckKind,
    RscReport,
};
pub use decomposition::{
    decompose_error, in_restricted_set, DecompositionCheck, ErrorDecomposition, Membership,
    RestrictedSetParams,
};
