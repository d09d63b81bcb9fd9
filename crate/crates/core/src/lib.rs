//! Predictability of discrete scanpaths via active information storage (AIS).
//!
//! The crate covers the whole path from raw gaze samples to group
//! statistics:
//!
//! - [`gaze`]: confidence filtering, dispersion-threshold fixation
//!   detection and AOI mapping into [`SymbolSequence`]s.
//! - [`info`]: plug-in entropy, conditional entropy, (conditional) mutual
//!   information, AIS, local AIS and gaze transition entropy, with
//!   Miller-Madow style bias correction.
//! - [`embedding`]: greedy non-uniform embedding of the past state with
//!   max-statistic permutation tests.
//! - [`stats`]: permutation tests for final AIS values and group contrasts.
//! - [`markov`]: order-k Markov chains with exact AIS/GTE for validation.
//! - [`experiment`]: per-trial analysis and per-participant comparisons.
//!
//! All quantities are in bits.
//!
//! ```
//! use scanpath_ais::{info, PastState, SymbolSequence};
//!
//! let cycle = SymbolSequence::new((0..101).map(|i| i % 4).collect(), 4).unwrap();
//! let ais = info::active_information_storage(&cycle, &PastState::full(1), 1).unwrap();
//! assert!((ais.plugin_value - 2.0).abs() < 1e-12);
//! ```

pub mod embedding;
pub mod error;
pub mod experiment;
pub mod gaze;
pub mod info;
pub mod markov;
pub mod seed;
pub mod sequence;
pub mod stats;
pub mod validation;

pub use embedding::{EmbeddingConfig, PastState, StateVectorSeries};
pub use error::{Error, Result};
pub use info::{ContingencyTable, InfoEstimate};
pub use markov::MarkovSpec;
pub use sequence::SymbolSequence;
