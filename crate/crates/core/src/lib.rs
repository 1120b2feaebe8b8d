//! Motion-aware language supervision for robot action datasets.
//!
//! Continuous 7-DoF action trajectories are tokenized into 256 bins per dimension,
//! scanned by a three-window motion detector with adaptive thresholds, rendered into
//! short motion phrases and packed into chat-formatted training samples.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The aliases at the
//! crate root use `f64`; [`single`] has the `f32` variants.

pub mod detector;
pub mod emitter;
pub mod eval;
pub mod io;
pub mod model;
pub mod oracle;
pub mod renderer;
pub mod scalar;
pub mod tokenizer;

pub use scalar::Scalar;

pub use detector::{DetectorVerdict, ThresholdPolicy, Window, WindowKind};
pub use emitter::{emit_dataset, emit_finetune, emit_pretrain, EmitError, EmitterTemplate, Stage, TrainingSample};
pub use model::{
    Anchor, AxisConvention, ConfigError, GripperAction, MalformedMotionString, MotionLabel, MoveX, MoveY, MoveZ,
    Rotate, Tilt, ValidationError, ACTION_DIMS, BINS, GRIPPER,
};
pub use renderer::{annotate_trajectory, AnnotationDiagnostics};
pub use tokenizer::{compute_dataset_stats, detokenize, tokenize_action, ActionTokens, TokenizerError};

pub type ActionVector = model::ActionVector<f64>;
pub type TrajectoryStep = model::TrajectoryStep<f64>;
pub type Trajectory = model::Trajectory<f64>;
pub type PipelineConfig = model::PipelineConfig<f64>;
pub type DatasetStats = tokenizer::DatasetStats<f64>;
pub type Annotator = renderer::Annotator<f64>;

/// `f32` aliases.
pub mod single {
    pub type ActionVector = crate::model::ActionVector<f32>;
    pub type TrajectoryStep = crate::model::TrajectoryStep<f32>;
    pub type Trajectory = crate::model::Trajectory<f32>;
    pub type PipelineConfig = crate::model::PipelineConfig<f32>;
    pub type DatasetStats = crate::tokenizer::DatasetStats<f32>;
    pub type Annotator = crate::renderer::Annotator<f32>;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Label(#[from] MalformedMotionString),
    #[error(transparent)]
    Emit(#[from] emitter::EmitError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}
