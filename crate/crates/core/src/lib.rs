//! Corpus complexity analysis for distillation data in machine translation.
//!
//! The crate measures how hard a parallel corpus is to learn from
//! (word-reordering degree, lexical diversity and faithfulness to a
//! reference corpus), selects distilled references from teacher k-best
//! lists, and computes confidence and calibration statistics from exported
//! model outputs. Word alignments come from a built-in IBM Model 1 aligner
//! or from Pharaoh files produced elsewhere.

pub mod aligner;
pub mod calibration;
#[cfg(feature = "cli")]
pub mod cli;
pub mod complexity;
pub mod corpus_io;
pub mod error;
pub mod preorder;
pub mod selection;
pub mod synthetic;

pub use error::{Error, Result};
