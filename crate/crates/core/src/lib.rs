//! Relative transfer function estimation between two microphones and sparse
//! reconstruction of the relative impulse response from a subset of
//! trusted frequency bins.
//!
//! The usual flow is: estimate an RTF per bin ([`estimators`]), score and
//! select bins ([`selection`]), solve a weighted LASSO over the selected
//! bins ([`reconstruction`]), and measure target cancellation of the
//! resulting blocking filter ([`evaluation`]). [`scenario`] builds
//! synthetic or file-based test mixtures with ground truth.

pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod pipeline;
pub mod reconstruction;
pub mod scenario;
pub mod selection;
pub mod signal;

pub use error::{Error, Result};
pub use estimators::{EstimatorKind, RtfEstimate};
pub use evaluation::{Method, ScenarioTruth, SweepTable, TrialResult};
pub use pipeline::PipelineConfig;
pub use reconstruction::{SolverConfig, WeightProfileParams, WeightVector};
pub use scenario::{load_scenario, mix_at_snr, MixedScenario, ScenarioSpec};
pub use selection::{Rule, SelectionConfig, SelectionMode};
pub use signal::{FrequencyBinSet, ImpulseResponse, IncompleteRtf, StereoRecording, TimeSignal, Window};
