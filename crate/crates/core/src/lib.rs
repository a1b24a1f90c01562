//! Detection of copy-number-neutral loss-of-heterozygosity (CNNLOH) regions
//! in B-allele-frequency sequences.
//!
//! BAF values are folded to tBAF (`y = 2|x - 0.5|`), modelled as a mixture of
//! a zero-inflated lower band and a one-inflated upper band fitted by EM on a
//! non-LOH training segment, and segmented with a two-state CUSUM whose alarm
//! thresholds are Monte-Carlo quantiles tied to a minimum segment length.

pub mod cli;
pub mod cusum;
pub mod error;
pub mod estimation;
pub mod evaluate;
pub mod model;
pub mod rng;
pub mod simulate;

pub use cusum::{
    calibrate, calibrate_threshold, cusum_scan, locate_change, segment, segment_with_thresholds, CusumTrace, Label,
    ModelPair, Segment, SegmenterConfig, Segmentation, Thresholds,
};
pub use error::{Error, Result};
pub use estimation::{fit_em, EmConfig, EmReport};
pub use evaluate::{compare_to_gold, confusion, metrics, ConfusionCounts, Metrics};
pub use model::{
    derive_loh_model, sample, tbaf_transform, MixtureModel, OneInflatedBeta, TBafSequence, ZeroInflatedBeta,
};
pub use simulate::{generate, run_study, LabeledSequence, ScenarioConfig, StudyConfig, StudyGrid, StudyTable};
