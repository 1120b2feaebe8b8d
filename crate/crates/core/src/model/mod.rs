//! Shared data types: actions, episodes, configuration and motion labels.

mod action;
mod config;
mod label;
mod trajectory;

pub use action::{ActionVector, ACTION_DIMS, GRIPPER};
pub use config::{Anchor, AxisConvention, ConfigError, PipelineConfig, BINS};
pub use label::{parse_label, GripperAction, MalformedMotionString, MotionLabel, MoveX, MoveY, MoveZ, Rotate, Tilt};
pub use trajectory::{validate_trajectory, Trajectory, TrajectoryStep, ValidationError};
