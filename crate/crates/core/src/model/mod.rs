//! Game specification, validation and exact discretization of the error dynamics.

mod discretize;
pub(crate) mod expm;
mod spec;

pub use discretize::{
    discretize, error_drift, integrated_weighted_gramian, noise_gramian, weighted_gramian, DiscretizedModel,
    MAX_GAIN_CONDITION,
};
pub use expm::matrix_exponential;
pub use spec::{
    pbh_observable, pbh_stabilizable, q_sqrt, validate_spec, CommCosts, GameSpec, ValidationReport, PBH_RANK_TOL,
    PSD_TOL,
};
