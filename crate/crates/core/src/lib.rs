//! Mixed-grained weighted training for edit-tagging grammatical error
//! correction.
//!
//! The pipeline runs left to right through the modules:
//!
//! * [`corpus`] reads pre-tokenized parallel text and M² gold edits.
//! * [`align`] turns each `(source, target)` pair into one edit tag per
//!   source slot and builds the capped tag vocabulary.
//! * [`signal`] holds per-position teacher statistics (probability of the
//!   gold tag and normalized entropy) and generates them from a tagger.
//! * [`weights`] converts those statistics into token- and sentence-level
//!   training weights.
//! * [`model`] is a small window-MLP tagger with hand-written gradients.
//! * [`trainer`] runs vanilla, weighted and distillation training, plus the
//!   ablation harness.
//! * [`eval`] scores corrections with edit-level precision, recall and F0.5.

pub mod align;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod hash;
mod jsonl;
pub mod model;
pub mod signal;
pub mod synth;
pub mod trainer;
pub mod weights;

pub use error::{Error, Result};
