//! Command-line pipeline for PR-aware SZZ: ingest tracker data, match fixing
//! commits, trace bug-inducing commits per variant, write datasets and
//! evaluate against ground truth. Also hosts the synthetic fixture
//! generator used by the acceptance suite.

pub mod config;
pub mod error;
pub mod fixture;
pub mod pipeline;
