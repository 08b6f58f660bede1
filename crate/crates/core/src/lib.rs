//! Hallucination detection by multiple testing over uncertainty scores.
//!
//! Each prompt is scored by several uncertainty measures over its sampled
//! generations. Scores are mapped to conformal p-values against a table of
//! prompts whose generations were judged correct, and a harmonic-corrected
//! Benjamini-Hochberg test of the global null decides whether the prompt is
//! flagged.

pub mod calibration;
pub mod cli;
pub mod conformal;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod io;
pub mod numerics;
pub mod scores;
pub mod textsim;

pub use calibration::{
    label_dataset, min_calibration_size, size_condition_holds, CalibrationSizeSpec, LabelOutcome,
    LabelingConfig, ScanStrategy,
};
pub use conformal::{detect, CalibrationTable, CoefficientMode, Decision, DetectorConfig, PValueVector};
pub use error::{Error, Result};
pub use eval::{auroc, power_at_far, run_experiment, synth_scores, EvalConfig, EvalReport, SyntheticSpec};
pub use numerics::RngSeed;
pub use scores::{score_record, GenerationRecord, ScoreConfig, ScoreName, ScoreVector};
pub use textsim::{rouge_l, tokenize, EquivalenceOracle, SimilarityMatrix};
