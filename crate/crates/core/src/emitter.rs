//! Chat-format training records for the pretrain (motion only) and finetune
//! (motion plus action tokens) stages.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{validate_trajectory, MotionLabel, PipelineConfig, Trajectory};
use crate::renderer::Annotator;
use crate::scalar::Scalar;
use crate::tokenizer::{tokenize_action, ActionTokens, DatasetStats};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Finetune,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Finetune => "finetune",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = EmitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pretrain" => Ok(Stage::Pretrain),
            "finetune" => Ok(Stage::Finetune),
            other => Err(EmitError::UnknownStage(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("finetune sample has no action tokens")]
    MissingAction,
    #[error("pretrain sample must not carry action tokens")]
    UnexpectedAction,
    #[error("sample stage is {found}, expected {expected}")]
    StageMismatch { expected: Stage, found: Stage },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("unknown stage {0:?} (expected pretrain or finetune)")]
    UnknownStage(String),
}

/// One (observation, instruction, motion, action) tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub frame_ref: Option<String>,
    pub instruction: String,
    pub motion: MotionLabel,
    pub action: Option<ActionTokens>,
    pub stage: Stage,
}

impl TrainingSample {
    pub fn pretrain(instruction: impl Into<String>, motion: MotionLabel) -> Self {
        Self {
            frame_ref: None,
            instruction: instruction.into(),
            motion,
            action: None,
            stage: Stage::Pretrain,
        }
    }

    pub fn finetune(instruction: impl Into<String>, motion: MotionLabel, action: ActionTokens) -> Self {
        Self {
            frame_ref: None,
            instruction: instruction.into(),
            motion,
            action: Some(action),
            stage: Stage::Finetune,
        }
    }
}

pub const INSTRUCTION_PLACEHOLDER: &str = "{instruction}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterTemplate {
    pub system_text: String,
    pub start_marker: String,
    pub stop_marker: String,
    /// Must contain `{instruction}` exactly once.
    pub question_format: String,
}

impl Default for EmitterTemplate {
    fn default() -> Self {
        Self {
            system_text: "You are Qwen, created by Alibaba Cloud. You are a helpful assistant.".into(),
            start_marker: "<|im_start|>".into(),
            stop_marker: "<|im_end|>".into(),
            question_format: "What action should the robot take to {instruction}?".into(),
        }
    }
}

impl EmitterTemplate {
    /// Reads a TOML document; missing keys keep their defaults.
    pub fn from_toml_str(doc: &str) -> Result<Self, EmitError> {
        let tpl: Self = toml::from_str(doc).map_err(|e| EmitError::InvalidTemplate(e.message().to_string()))?;
        tpl.validate()?;
        Ok(tpl)
    }

    pub fn validate(&self) -> Result<(), EmitError> {
        if self.start_marker.is_empty() || self.stop_marker.is_empty() {
            return Err(EmitError::InvalidTemplate("markers must be non-empty".into()));
        }
        if self.start_marker == self.stop_marker {
            return Err(EmitError::InvalidTemplate("start and stop markers must differ".into()));
        }
        if self.question_format.matches(INSTRUCTION_PLACEHOLDER).count() != 1 {
            return Err(EmitError::InvalidTemplate(format!(
                "question_format must contain {INSTRUCTION_PLACEHOLDER} exactly once"
            )));
        }
        Ok(())
    }

    pub fn question(&self, instruction: &str) -> String {
        self.question_format.replace(INSTRUCTION_PLACEHOLDER, instruction)
    }
}

/// Emitted text plus the byte ranges `[start, end)` that carry loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedText {
    pub text: String,
    pub loss_spans: Vec<[usize; 2]>,
}

struct Builder<'a> {
    tpl: &'a EmitterTemplate,
    text: String,
    spans: Vec<[usize; 2]>,
}

impl<'a> Builder<'a> {
    fn new(tpl: &'a EmitterTemplate) -> Self {
        Self {
            tpl,
            text: String::new(),
            spans: Vec::new(),
        }
    }

    fn push(&mut self, s: &str, loss: bool) {
        let start = self.text.len();
        self.text.push_str(s);
        if loss {
            self.spans.push([start, self.text.len()]);
        }
    }

    /// `body_parts` are pushed back to back, each with its own loss flag.
    fn turn(&mut self, role: &str, body_parts: &[(&str, bool)]) {
        self.push(&self.tpl.start_marker, false);
        self.push(role, false);
        self.push("\n", false);
        for (part, loss) in body_parts {
            self.push(part, *loss);
        }
        self.push(&self.tpl.stop_marker, true);
        self.push("\n", false);
    }

    fn finish(self) -> EmittedText {
        EmittedText {
            text: self.text,
            loss_spans: self.spans,
        }
    }
}

fn prompt_turns<'a>(sample: &TrainingSample, tpl: &'a EmitterTemplate) -> Result<Builder<'a>, EmitError> {
    tpl.validate()?;
    if sample.instruction.trim().is_empty() {
        return Err(EmitError::EmptyInstruction);
    }
    let mut b = Builder::new(tpl);
    b.turn("system", &[(&tpl.system_text, false)]);
    b.turn("user", &[(&tpl.question(&sample.instruction), false)]);
    b.turn("motion", &[(&sample.motion.to_string(), true)]);
    Ok(b)
}

fn expect_stage(sample: &TrainingSample, expected: Stage) -> Result<(), EmitError> {
    if sample.stage != expected {
        return Err(EmitError::StageMismatch {
            expected,
            found: sample.stage,
        });
    }
    Ok(())
}

/// System, user and motion turns. Loss covers the motion text and each stop marker.
pub fn emit_pretrain(sample: &TrainingSample, tpl: &EmitterTemplate) -> Result<EmittedText, EmitError> {
    expect_stage(sample, Stage::Pretrain)?;
    if sample.action.is_some() {
        return Err(EmitError::UnexpectedAction);
    }
    Ok(prompt_turns(sample, tpl)?.finish())
}

/// The pretrain layout followed by an assistant turn holding the seven action tokens.
pub fn emit_finetune(sample: &TrainingSample, tpl: &EmitterTemplate) -> Result<EmittedText, EmitError> {
    expect_stage(sample, Stage::Finetune)?;
    let action = sample.action.as_ref().ok_or(EmitError::MissingAction)?;
    let mut b = prompt_turns(sample, tpl)?;
    let tokens = action.rendered();
    let parts: Vec<(&str, bool)> = tokens.iter().map(|t| (t.as_str(), true)).collect();
    b.turn("assistant", &parts);
    Ok(b.finish())
}

pub fn emit_sample(sample: &TrainingSample, tpl: &EmitterTemplate) -> Result<EmittedText, EmitError> {
    match sample.stage {
        Stage::Pretrain => emit_pretrain(sample, tpl),
        Stage::Finetune => emit_finetune(sample, tpl),
    }
}

/// One JSONL line. Field order is part of the output format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub episode_id: String,
    pub step: usize,
    pub frame_ref: Option<String>,
    pub text: String,
    pub loss_spans: Vec<[usize; 2]>,
    pub stage: Stage,
    pub motion: MotionLabel,
    pub action_bins: Option<[u8; 7]>,
}

impl SampleRecord {
    pub fn to_json_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("record serialization is infallible");
        line.push('\n');
        line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedEpisode {
    pub episode_id: String,
    pub error: String,
}

/// Records grouped by episode in input order, plus the episodes that failed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetEmission {
    pub records: Vec<SampleRecord>,
    pub skipped: Vec<SkippedEpisode>,
}

impl DatasetEmission {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            out.write_all(r.to_json_line().as_bytes())?;
        }
        out.flush()
    }
}

/// All records for one episode.
pub fn emit_episode<S: Scalar>(
    traj: &Trajectory<S>,
    annotator: &Annotator<S>,
    tpl: &EmitterTemplate,
    stage: Stage,
) -> Result<Vec<SampleRecord>, Error> {
    let traj = validate_trajectory(traj.clone())?;
    let (labels, _) = annotator.annotate_valid(&traj);
    traj.steps
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(step, (s, motion))| {
            let action = match stage {
                Stage::Pretrain => None,
                Stage::Finetune => Some(tokenize_action(&s.action, annotator.stats())),
            };
            let sample = TrainingSample {
                frame_ref: s.frame_ref.clone(),
                instruction: traj.instruction.clone(),
                motion,
                action,
                stage,
            };
            let out = emit_sample(&sample, tpl)?;
            Ok(SampleRecord {
                episode_id: traj.id.clone(),
                step,
                frame_ref: sample.frame_ref,
                text: out.text,
                loss_spans: out.loss_spans,
                stage,
                motion,
                action_bins: action.map(|a| a.bins),
            })
        })
        .collect()
}

/// One record per step of every episode. A failing episode is skipped and reported.
pub fn emit_dataset<S: Scalar>(
    trajs: &[Trajectory<S>],
    stats: &DatasetStats<S>,
    cfg: &PipelineConfig<S>,
    tpl: &EmitterTemplate,
    stage: Stage,
) -> Result<DatasetEmission, Error> {
    tpl.validate()?;
    let annotator = Annotator::new(stats.clone(), cfg.clone())?;
    let per_episode: Vec<_> = trajs
        .par_iter()
        .map(|t| (t.id.clone(), emit_episode(t, &annotator, tpl, stage)))
        .collect();
    let mut emission = DatasetEmission::default();
    for (id, result) in per_episode {
        match result {
            Ok(records) => emission.records.extend(records),
            Err(e) => emission.skipped.push(SkippedEpisode {
                episode_id: id,
                error: e.to_string(),
            }),
        }
    }
    Ok(emission)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_label, ActionVector, TrajectoryStep};

    fn label(s: &str) -> MotionLabel {
        parse_label(s).unwrap()
    }

    #[test]
    fn pretrain_layout() {
        let s = TrainingSample::pretrain("pick up the cup", label("move forward"));
        let out = emit_pretrain(&s, &EmitterTemplate::default()).unwrap();
        assert_eq!(
            out.text,
            "<|im_start|>system\nYou are Qwen, created by Alibaba Cloud. You are a helpful assistant.<|im_end|>\n\
             <|im_start|>user\nWhat action should the robot take to pick up the cup?<|im_end|>\n\
             <|im_start|>motion\nmove forward<|im_end|>\n"
        );
        let masked: Vec<&str> = out.loss_spans.iter().map(|[a, b]| &out.text[*a..*b]).collect();
        assert_eq!(masked, ["<|im_end|>", "<|im_end|>", "move forward", "<|im_end|>"]);
    }

    #[test]
    fn stop_motion_body() {
        let s = TrainingSample::pretrain("wait", MotionLabel::STOP);
        let out = emit_pretrain(&s, &EmitterTemplate::default()).unwrap();
        assert!(out.text.contains("<|im_start|>motion\nstop<|im_end|>\n"));
    }

    #[test]
    fn finetune_assistant_turn() {
        let s = TrainingSample::finetune("open the drawer", MotionLabel::STOP, ActionTokens { bins: [128; 7] });
        let out = emit_finetune(&s, &EmitterTemplate::default()).unwrap();
        assert!(out.text.ends_with(
            "<|im_start|>assistant\n<extra_128><extra_128><extra_128><extra_128><extra_128><extra_128><extra_128><|im_end|>\n"
        ));
        assert_eq!(out.loss_spans.len(), 4 + 7 + 1);
        assert_eq!(out, emit_finetune(&s, &EmitterTemplate::default()).unwrap());
    }

    #[test]
    fn errors() {
        let tpl = EmitterTemplate::default();
        let empty = TrainingSample::pretrain("  ", MotionLabel::STOP);
        assert_eq!(emit_pretrain(&empty, &tpl), Err(EmitError::EmptyInstruction));
        let mut missing = TrainingSample::pretrain("x", MotionLabel::STOP);
        missing.stage = Stage::Finetune;
        assert_eq!(emit_finetune(&missing, &tpl), Err(EmitError::MissingAction));
        assert!(matches!(
            emit_pretrain(&missing, &tpl),
            Err(EmitError::StageMismatch { .. })
        ));
        let bad = EmitterTemplate {
            stop_marker: "<|im_start|>".into(),
            ..EmitterTemplate::default()
        };
        assert!(matches!(bad.validate(), Err(EmitError::InvalidTemplate(_))));
    }

    fn episode(id: &str, n: usize) -> Trajectory<f64> {
        Trajectory {
            id: id.into(),
            instruction: "push the block".into(),
            steps: (0..n)
                .map(|i| TrajectoryStep::from_action(ActionVector::new([0.01 * i as f64, 0., 0., 0., 0., 0., 1.])))
                .collect(),
        }
    }

    #[test]
    fn dataset_counts_and_skips() {
        let mut trajs = vec![episode("a", 5), episode("b", 7), episode("c", 2)];
        let cfg = PipelineConfig::default();
        let stats = DatasetStats::unit();
        let tpl = EmitterTemplate::default();
        let out = emit_dataset(&trajs, &stats, &cfg, &tpl, Stage::Pretrain).unwrap();
        assert_eq!(out.records.len(), 14);
        assert!(out.records.iter().all(|r| !r.text.contains("<extra_")));

        trajs[1].instruction.clear();
        let out = emit_dataset(&trajs, &stats, &cfg, &tpl, Stage::Finetune).unwrap();
        assert_eq!(out.records.len(), 7);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].episode_id, "b");
    }

    #[test]
    fn record_field_order() {
        let out = emit_dataset(
            &[episode("e", 1)],
            &DatasetStats::unit(),
            &PipelineConfig::default(),
            &EmitterTemplate::default(),
            Stage::Finetune,
        )
        .unwrap();
        let line = out.records[0].to_json_line();
        let keys = [
            "\"episode_id\"",
            "\"step\"",
            "\"frame_ref\"",
            "\"text\"",
            "\"loss_spans\"",
            "\"stage\"",
            "\"motion\"",
            "\"action_bins\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| line.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{line}");
        assert!(line.contains("\"frame_ref\":null"));
    }
}
