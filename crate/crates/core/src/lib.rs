//! Interactive reinforced feature selection.
//!
//! Per-feature Q-learning agents explore feature subsets; external trainers
//! (a mutual-information KBest ranker and a decision-tree importance ranker)
//! advise hesitant agents under a staged teaching schedule. A CLI harness
//! runs campaigns against CSV datasets and records Best-Acc curves against
//! classic one-shot baselines.

pub mod baselines;
pub mod dataset;
pub mod env;
pub mod error;
pub mod harness;
pub mod qpolicy;
pub mod stats;
pub mod trainers;
pub mod tree;

pub use error::{Error, Result};
