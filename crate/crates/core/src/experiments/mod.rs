//! Desk-scale versions of the necessity arguments: blow-up of special functions,
//! random-sign sums, norm scaling on single bands, and a weak-* limit.

mod blowup;
mod khintchine;
mod report;
mod scaling;
mod sequence;
mod weakstar;

pub use blowup::{experiment_blowup, BlowupConfig};
pub use khintchine::{
    experiment_khintchine, geometric_frequencies, synthetic_frequencies, FrequencyChoice, KhintchineConfig,
    DEFAULT_TRIALS, EXHAUSTIVE_LIMIT,
};
pub use report::{Column, Figure, Provenance, Report, Table, VERSION};
pub use scaling::{
    band_ball, experiment_multiscale, experiment_norm_scaling, scaled_ball, Band, MultiScaleConfig, ScalingConfig,
};
pub use sequence::{d_sequence, householder_to, BlowupSequence, SequenceRow};
pub use weakstar::{exact_moment, experiment_weakstar, pairing, support_measure, TestFunction};
