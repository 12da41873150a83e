//! Pedigree-based cancer risk workbench.
//!
//! The crate covers the whole pipeline used to compare Mendelian carrier
//! models with neural networks trained on family histories:
//!
//! - [`pedigree`]: the family data model, relative classification and file I/O.
//! - [`genetics`]: two-locus genotype space, founder priors, transmission and
//!   penetrance tables.
//! - [`mendelian`]: carrier posteriors by peeling, a brute-force oracle, future
//!   risk and recalibration.
//! - [`sim`]: seeded cohort simulation plus misreporting / missingness
//!   perturbations.
//! - [`encoder`]: reference-structure standardization, flattening, neighborhood
//!   maps and min-max scaling.
//! - [`nn`]: fully-connected and pedigree-convolutional networks trained with
//!   Adam, plus gradient checking and random search.
//! - [`metrics`]: O/E, AUC, PR-AUC, Brier, bootstrap comparisons, IPCW and
//!   decile calibration.
//! - [`experiment`]: end-to-end experiment runner and the fixed scenario table.

pub mod encoder;
pub mod error;
pub mod experiment;
pub mod genetics;
pub mod mendelian;
pub mod metrics;
pub mod nn;
pub mod pedigree;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
