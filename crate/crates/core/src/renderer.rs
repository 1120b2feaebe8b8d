//! Turns detector verdicts and windowed per-axis displacement into motion labels.

use crate::detector::{window_span, EpisodeSignals, ThresholdPolicy, Window, WindowKind};
use crate::model::{
    validate_trajectory, GripperAction, MotionLabel, MoveX, MoveY, MoveZ, PipelineConfig, Rotate, Tilt, Trajectory,
};
use crate::scalar::Scalar;
use crate::tokenizer::DatasetStats;
use crate::Error;

/// Number of continuous axes that carry a displacement (translation and rotation).
pub const MOTION_AXES: usize = 6;
const ROLL: usize = 3;
const PITCH: usize = 4;
const YAW: usize = 5;

/// Per-axis displacement accumulated over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisActivation<S> {
    pub window: Window,
    /// Translational entries come from positions, rotational ones from summed deltas.
    pub acc: [S; MOTION_AXES],
    /// Threshold each `|acc|` is compared against.
    pub limits: [S; MOTION_AXES],
    pub exceeds: [bool; MOTION_AXES],
    /// Binarized gripper state before and after the window (`true` = open).
    pub gripper_before: bool,
    pub gripper_after: bool,
}

impl<S: Scalar> AxisActivation<S> {
    /// Builds an activation from explicit accumulations and limits.
    pub fn from_parts(
        window: Window,
        acc: [S; MOTION_AXES],
        limits: [S; MOTION_AXES],
        gripper_before: bool,
        gripper_after: bool,
    ) -> Self {
        let exceeds = std::array::from_fn(|i| acc[i].abs() > limits[i]);
        Self {
            window,
            acc,
            limits,
            exceeds,
            gripper_before,
            gripper_after,
        }
    }

    /// Accumulates the signals over `window`. Each axis limit is `limits[i] * scale`.
    pub fn over_window(
        signals: &EpisodeSignals<S>,
        window: Window,
        limits: &[S],
        scale: S,
        cfg: &PipelineConfig<S>,
    ) -> Self {
        let p = &signals.positions;
        let mut acc = [S::zero(); MOTION_AXES];
        for axis in 0..3 {
            acc[axis] = p[window.end][axis] - p[window.start][axis];
        }
        for s in window.start..window.end {
            for (axis, slot) in acc.iter_mut().enumerate().skip(3) {
                *slot = *slot + signals.normalized[s][axis];
            }
        }
        let open = |g: S| g >= cfg.gripper_cutoff;
        let (before, after) = if window.steps() == 0 {
            let g = open(signals.gripper[window.start.min(signals.len() - 1)]);
            (g, g)
        } else {
            (
                open(signals.gripper[window.start.saturating_sub(1)]),
                open(signals.gripper[window.end - 1]),
            )
        };
        let limits = std::array::from_fn(|i| limits[i] * scale);
        Self::from_parts(window, acc, limits, before, after)
    }
}

/// A rendered label plus what the grammar could not express.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rendered {
    pub label: MotionLabel,
    /// Roll exceeded its threshold; the grammar has no roll word.
    pub roll_exceeded: bool,
    /// The dominant-axis fallback produced the move word.
    pub used_fallback: bool,
}

/// Label from a motion decision and an activation.
///
/// Move words need `motion`; tilt, rotate and gripper words are decided per axis.
/// When motion is detected but no translational axis clears its threshold, the axis
/// with the largest displacement names the move.
pub fn render_words<S: Scalar>(motion: bool, act: &AxisActivation<S>, cfg: &PipelineConfig<S>) -> Rendered {
    let conv = &cfg.axis_convention;
    let negative = |axis: usize| act.acc[axis] < S::zero();
    let mut label = MotionLabel::STOP;
    let mut used_fallback = false;
    if motion {
        let mut on = [act.exceeds[0], act.exceeds[1], act.exceeds[2]];
        if !on.iter().any(|&b| b) {
            let mut best = 0;
            for axis in 1..3 {
                if act.acc[axis].abs() > act.acc[best].abs() {
                    best = axis;
                }
            }
            on[best] = true;
            used_fallback = true;
        }
        if on[0] {
            label.move_x = Some(MoveX::from_sign(conv.x, negative(0)));
        }
        if on[1] {
            label.move_y = Some(MoveY::from_sign(conv.y, negative(1)));
        }
        if on[2] {
            label.move_z = Some(MoveZ::from_sign(conv.z, negative(2)));
        }
    }
    if act.exceeds[PITCH] {
        label.tilt = Some(Tilt::from_sign(conv.pitch, negative(PITCH)));
    }
    if act.exceeds[YAW] {
        label.rotate = Some(Rotate::from_sign(conv.yaw, negative(YAW)));
    }
    label.gripper = match (act.gripper_before, act.gripper_after) {
        (true, false) => Some(GripperAction::Close),
        (false, true) => Some(GripperAction::Open),
        _ => None,
    };
    Rendered {
        label,
        roll_exceeded: act.exceeds[ROLL],
        used_fallback,
    }
}

pub fn render_label<S: Scalar>(
    verdict: &crate::detector::DetectorVerdict,
    act: &AxisActivation<S>,
    cfg: &PipelineConfig<S>,
) -> MotionLabel {
    render_words(verdict.motion(), act, cfg).label
}

/// Counters collected while annotating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnnotationDiagnostics {
    pub steps: usize,
    pub motion_steps: usize,
    pub roll_exceedances: usize,
    pub fallbacks: usize,
}

impl AnnotationDiagnostics {
    pub fn merge(self, other: Self) -> Self {
        Self {
            steps: self.steps + other.steps,
            motion_steps: self.motion_steps + other.motion_steps,
            roll_exceedances: self.roll_exceedances + other.roll_exceedances,
            fallbacks: self.fallbacks + other.fallbacks,
        }
    }
}

/// Labels one already validated episode with the hierarchical detector.
pub fn annotate_signals<S: Scalar>(
    signals: &EpisodeSignals<S>,
    cfg: &PipelineConfig<S>,
) -> (Vec<MotionLabel>, AnnotationDiagnostics) {
    let mut diag = AnnotationDiagnostics::default();
    let len = signals.positions.len();
    let labels = (0..signals.len())
        .map(|t| {
            let verdict = signals.verdict(t, cfg);
            let kind = verdict.fired_window().unwrap_or(WindowKind::Mid);
            let window = window_span(t, kind.size(cfg), len, cfg.anchor);
            let scale = S::count(window.steps()) / S::count(cfg.dt_fast);
            let act = AxisActivation::over_window(signals, window, &signals.thresholds[t], scale, cfg);
            let r = render_words(verdict.motion(), &act, cfg);
            diag.steps += 1;
            diag.motion_steps += verdict.motion() as usize;
            diag.roll_exceedances += r.roll_exceeded as usize;
            diag.fallbacks += r.used_fallback as usize;
            r.label
        })
        .collect();
    (labels, diag)
}

/// Validated, reusable annotation settings.
#[derive(Debug, Clone)]
pub struct Annotator<S> {
    stats: DatasetStats<S>,
    cfg: PipelineConfig<S>,
    policy: ThresholdPolicy<S>,
}

impl<S: Scalar> Annotator<S> {
    pub fn new(stats: DatasetStats<S>, cfg: PipelineConfig<S>) -> Result<Self, Error> {
        Self::with_policy(stats, cfg, ThresholdPolicy::Adaptive)
    }

    pub fn with_policy(
        stats: DatasetStats<S>,
        cfg: PipelineConfig<S>,
        policy: ThresholdPolicy<S>,
    ) -> Result<Self, Error> {
        cfg.validate()?;
        stats.validate()?;
        Ok(Self { stats, cfg, policy })
    }

    pub fn config(&self) -> &PipelineConfig<S> {
        &self.cfg
    }

    pub fn stats(&self) -> &DatasetStats<S> {
        &self.stats
    }

    /// Labels an episode that has already passed validation.
    pub fn annotate_valid(&self, traj: &Trajectory<S>) -> (Vec<MotionLabel>, AnnotationDiagnostics) {
        let signals = EpisodeSignals::new(traj, &self.stats, &self.cfg, self.policy);
        annotate_signals(&signals, &self.cfg)
    }

    pub fn annotate(&self, traj: &Trajectory<S>) -> Result<(Vec<MotionLabel>, AnnotationDiagnostics), Error> {
        // validation takes ownership; cloning keeps the API borrow-only
        let traj = validate_trajectory(traj.clone())?;
        Ok(self.annotate_valid(&traj))
    }
}

/// One label per step.
pub fn annotate_trajectory<S: Scalar>(
    traj: &Trajectory<S>,
    stats: &DatasetStats<S>,
    cfg: &PipelineConfig<S>,
) -> Result<Vec<MotionLabel>, Error> {
    let annotator = Annotator::new(stats.clone(), cfg.clone())?;
    Ok(annotator.annotate(traj)?.0)
}
