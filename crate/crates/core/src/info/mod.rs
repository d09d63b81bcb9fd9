//! Plug-in information-theoretic estimators in bits.

pub(crate) mod coded;
mod estimate;
mod storage;
mod table;

pub use estimate::{
    bias_correction, conditional_entropy, conditional_mutual_information, entropy,
    mutual_information, BinCount, Estimator, InfoEstimate, Quantity, QuantityKind,
};
pub use storage::{active_information_storage, gaze_transition_entropy, local_ais, next_symbol_entropy};
pub use table::{empirical_distribution, ContingencyTable};
