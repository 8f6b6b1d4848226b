//! Benchmarking toolkit for competing volumetric segmentations of thalamic
//! nuclei against a reference atlas.
//!
//! The crate is organised around the stages of the benchmark:
//!
//! * [`volgrid`] — labeled 3D volumes with voxel geometry, NIfTI-1 I/O
//! * [`harmonize`] — mapping source nomenclatures onto the unified
//!   10-nucleus-per-hemisphere scheme
//! * [`metrics`] — Dice overlap, average Hausdorff distances, probabilistic
//!   atlas construction and thresholding
//! * [`stats`] — paired t-tests, repeated-measures ANOVA, ANCOVA, Dunnett
//!   posthoc, Cohen's d, logistic regression and ROC/AUC
//! * [`bench`] — method ranking, agreement classes, best-method selection,
//!   atrophy effect maps, discrimination AUC tables, report emission
//! * [`phantom`] — deterministic synthetic volumes and cohorts for testing
//! * [`cohort`] — per-subject covariate/volume tables and their CSV format

pub mod bench;
pub mod cohort;
pub mod harmonize;
pub mod metrics;
pub mod phantom;
pub mod stats;
pub mod volgrid;
