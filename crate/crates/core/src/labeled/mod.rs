//! Labeled multi-Bernoulli and δ-GLMB densities, conversions between them,
//! presence and cardinality possibilities, and MAP state extraction.

mod glmb;
mod track;

pub use glmb::{delta_glmb_to_lmb, lmb_to_delta_glmb, DeltaGlmb, GlmbHypothesis};
pub use track::{BernoulliTrack, Label, LmbDensity, EXISTENCE_FLOOR};
