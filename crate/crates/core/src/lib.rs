//! Syllable nucleus detection and speech rate estimation.
//!
//! Speech is reduced to a sonority envelope, a weighted sum of seven
//! normalized log sub-band energies smoothed at 7 Hz. Prominent peaks of the
//! envelope on speech frames are syllable nuclei. The band weights and the
//! prominence threshold are fitted to labelled data by particle swarm
//! optimization against either an inverse F-score or a count MAE cost.

pub mod audio;
pub mod cli;
pub mod envelope;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod peaks;
pub mod pso;
pub mod synth;
pub mod training;

pub use audio::{AudioClip, Corpus, UtteranceRecord, VowelSegment};
pub use envelope::{PipelineConfig, WeightVector, NUM_BANDS};
pub use error::{Error, Result};
pub use peaks::DetectionResult;
pub use pso::{PsoConfig, SearchSpace, SwarmResult};
pub use training::{CostKind, ParamsFile, PipelineParams};
