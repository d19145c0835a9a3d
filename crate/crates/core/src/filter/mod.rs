//! The possibility LMB recursion: prediction, measurement update (through
//! the δ-GLMB expansion or the joint single-hypothesis form) and births.

mod models;
mod predict;
mod update;

pub use models::{
    adaptive_birth, cv_process_noise, cv_transition, fixed_birth, BirthMode, BirthModel, MotionModel, SensorModel,
    CLUTTER_FLOOR,
};
pub use predict::{predict, predict_discounted};
pub use update::{
    detection_outcome, joint_predict_update, joint_update, miss_outcome, track_outcomes, update, JointPosterior,
    Outcome, TrackOutcomes, UpdateConfig,
};
