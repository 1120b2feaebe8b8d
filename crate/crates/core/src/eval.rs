//! Synthetic ground truth, a fixed-threshold baseline and accuracy scoring.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{window_span, EpisodeSignals, ThresholdPolicy};
use crate::model::{
    ActionVector, AxisConvention, MotionLabel, PipelineConfig, Trajectory, TrajectoryStep, ACTION_DIMS,
};
use crate::renderer::{render_words, Annotator, AxisActivation};
use crate::scalar::Scalar;
use crate::tokenizer::DatasetStats;
use crate::Error;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("prediction has {pred} labels but truth has {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("fixed threshold must be positive, got {0}")]
    InvalidFixedThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum JitterKind {
    #[default]
    #[serde(rename = "uniform")]
    Uniform,
    /// Gaussian with sigma = a/2, redrawn until it lands in [-a, a].
    #[serde(rename = "gaussian-truncated")]
    GaussianTruncated,
}

/// One constant-velocity stretch of an explicitly specified episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub words: MotionLabel,
    pub duration: usize,
    /// Per-step displacement on every named axis, in normalized units.
    pub magnitude: f64,
}

/// Randomized segment layout, used when no explicit segments are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomPlan {
    pub steps_per_episode: usize,
    pub max_segments: usize,
    pub min_duration: usize,
    pub stop_probability: f64,
    pub max_axes: usize,
    /// Per-step magnitude range as multiples of the axis base threshold.
    pub magnitude_multiple: [f64; 2],
}

impl Default for RandomPlan {
    fn default() -> Self {
        Self {
            steps_per_episode: 64,
            max_segments: 2,
            min_duration: 8,
            stop_probability: 0.25,
            max_axes: 2,
            magnitude_multiple: [2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_episodes: usize,
    /// Same layout for every episode when non-empty.
    pub segments: Vec<SegmentSpec>,
    pub random: RandomPlan,
    /// Per-step noise bound on each continuous dimension, normalized units.
    pub jitter_amplitude: f64,
    pub jitter_kind: JitterKind,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_episodes: 200,
            segments: Vec::new(),
            random: RandomPlan::default(),
            jitter_amplitude: 0.0,
            jitter_kind: JitterKind::Uniform,
        }
    }
}

impl SyntheticSpec {
    pub fn from_toml_str(doc: &str) -> Result<Self, EvalError> {
        toml::from_str(doc).map_err(|e| EvalError::InvalidSpec(e.message().to_string()))
    }

    pub fn validate(&self, dt_slow: usize) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidSpec(m));
        if self.n_episodes == 0 {
            return bad("n_episodes must be at least 1".into());
        }
        if !(self.jitter_amplitude.is_finite() && self.jitter_amplitude >= 0.0) {
            return bad(format!(
                "jitter_amplitude must be finite and >= 0, got {}",
                self.jitter_amplitude
            ));
        }
        if !self.segments.is_empty() {
            for (i, s) in self.segments.iter().enumerate() {
                if s.duration == 0 {
                    return bad(format!("segment {i} has zero duration"));
                }
                if !(s.magnitude.is_finite() && s.magnitude > 0.0) && !s.words.is_stop() {
                    return bad(format!("segment {i} needs a positive magnitude"));
                }
                if s.words.gripper.is_some() {
                    return bad(format!("segment {i}: gripper words cannot be synthesized"));
                }
            }
            if !self.segments.iter().any(|s| s.duration >= dt_slow) {
                return bad(format!("no segment lasts at least {dt_slow} steps"));
            }
            return Ok(());
        }
        let r = &self.random;
        if r.max_segments == 0 || r.min_duration == 0 || r.max_axes == 0 || r.max_axes > 5 {
            return bad("max_segments, min_duration and max_axes (<= 5) must be positive".into());
        }
        if r.steps_per_episode < r.max_segments * r.min_duration {
            return bad("steps_per_episode too short for max_segments * min_duration".into());
        }
        if r.steps_per_episode.div_ceil(r.max_segments).max(r.min_duration) < dt_slow {
            return bad(format!("no segment is guaranteed to last {dt_slow} steps"));
        }
        if !(0.0..=1.0).contains(&r.stop_probability) {
            return bad("stop_probability must lie in [0, 1]".into());
        }
        let [lo, hi] = r.magnitude_multiple;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return bad("magnitude_multiple must be 0 < lo <= hi".into());
        }
        Ok(())
    }
}

/// A generated episode and the per-step label of the clean signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEpisode<S> {
    pub trajectory: Trajectory<S>,
    pub truth: Vec<MotionLabel>,
}

/// Action dimension and signed unit for each motion word of a label.
fn axis_signs(label: &MotionLabel, conv: &AxisConvention) -> Vec<(usize, f64)> {
    let sign = |same: bool| if same { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    if let Some(w) = label.move_x {
        out.push((0, sign(w == conv.x)));
    }
    if let Some(w) = label.move_y {
        out.push((1, sign(w == conv.y)));
    }
    if let Some(w) = label.move_z {
        out.push((2, sign(w == conv.z)));
    }
    if let Some(w) = label.tilt {
        out.push((4, sign(w == conv.pitch)));
    }
    if let Some(w) = label.rotate {
        out.push((5, sign(w == conv.yaw)));
    }
    out
}

const RENDERABLE_AXES: [usize; 5] = [0, 1, 2, 4, 5];

fn random_segments(
    plan: &RandomPlan,
    t_base: &[f64; ACTION_DIMS],
    conv: &AxisConvention,
    rng: &mut ChaCha8Rng,
) -> Vec<(MotionLabel, usize, [f64; 6])> {
    let k = rng.gen_range(1..=plan.max_segments);
    let slack = plan.steps_per_episode - k * plan.min_duration;
    let mut cuts: Vec<usize> = (0..k - 1).map(|_| rng.gen_range(0..=slack)).collect();
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(slack);
    (0..k)
        .map(|s| {
            let duration = plan.min_duration + cuts[s + 1] - cuts[s];
            let mut velocity = [0.0; 6];
            if rng.gen::<f64>() >= plan.stop_probability {
                let n_axes = rng.gen_range(1..=plan.max_axes);
                for i in sample_indices(rng, RENDERABLE_AXES.len(), n_axes) {
                    let axis = RENDERABLE_AXES[i];
                    let [lo, hi] = plan.magnitude_multiple;
                    let m = rng.gen_range(lo..=hi) * t_base[axis];
                    velocity[axis] = if rng.gen::<bool>() { m } else { -m };
                }
            }
            (label_of_velocity(&velocity, conv), duration, velocity)
        })
        .collect()
}

/// Canonical label naming the sign of every nonzero axis.
fn label_of_velocity(v: &[f64; 6], conv: &AxisConvention) -> MotionLabel {
    use crate::model::{MoveX, MoveY, MoveZ, Rotate, Tilt};
    let word = |i: usize| (v[i] != 0.0).then_some(v[i] < 0.0);
    MotionLabel {
        move_x: word(0).map(|n| MoveX::from_sign(conv.x, n)),
        move_y: word(1).map(|n| MoveY::from_sign(conv.y, n)),
        move_z: word(2).map(|n| MoveZ::from_sign(conv.z, n)),
        tilt: word(4).map(|n| Tilt::from_sign(conv.pitch, n)),
        rotate: word(5).map(|n| Rotate::from_sign(conv.yaw, n)),
        gripper: None,
    }
}

fn jitter(kind: JitterKind, a: f64, rng: &mut ChaCha8Rng) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    match kind {
        JitterKind::Uniform => rng.gen_range(-a..=a),
        JitterKind::GaussianTruncated => {
            let normal = Normal::new(0.0, a / 2.0).expect("sigma is positive");
            loop {
                let x = normal.sample(rng);
                if (-a..=a).contains(&x) {
                    return x;
                }
            }
        }
    }
}

fn episode_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seeded piecewise-constant-velocity episodes in normalized units (use with
/// [`DatasetStats::unit`]). Truth comes from the clean signal; jitter is added after.
pub fn generate_synthetic<S: Scalar>(
    spec: &SyntheticSpec,
    cfg: &PipelineConfig<S>,
) -> Result<Vec<SyntheticEpisode<S>>, EvalError> {
    spec.validate(cfg.dt_slow)?;
    let t_base: [f64; ACTION_DIMS] = std::array::from_fn(|i| cfg.t_base[i].to_f64_lossy());
    let conv = cfg.axis_convention;
    let episodes = (0..spec.n_episodes)
        .into_par_iter()
        .map(|e| {
            // clean layout and noise come from separate streams so the clean signal
            // does not depend on the jitter settings
            let mut layout_rng = episode_rng(spec.seed, 2 * e as u64);
            let mut noise_rng = episode_rng(spec.seed, 2 * e as u64 + 1);
            let segments = if spec.segments.is_empty() {
                random_segments(&spec.random, &t_base, &conv, &mut layout_rng)
            } else {
                spec.segments
                    .iter()
                    .map(|s| {
                        let mut v = [0.0; 6];
                        for (axis, sign) in axis_signs(&s.words, &conv) {
                            v[axis] = sign * s.magnitude;
                        }
                        (s.words, s.duration, v)
                    })
                    .collect()
            };
            let mut steps = Vec::new();
            let mut truth = Vec::new();
            for (label, duration, v) in segments {
                for _ in 0..duration {
                    let mut a = [S::zero(); ACTION_DIMS];
                    for (i, slot) in a.iter_mut().take(6).enumerate() {
                        *slot = S::lit(v[i] + jitter(spec.jitter_kind, spec.jitter_amplitude, &mut noise_rng));
                    }
                    a[6] = S::one();
                    steps.push(TrajectoryStep::from_action(ActionVector::new(a)));
                    truth.push(label);
                }
            }
            SyntheticEpisode {
                trajectory: Trajectory {
                    id: format!("synthetic-{e:05}"),
                    instruction: "follow the synthetic path".into(),
                    steps,
                },
                truth,
            }
        })
        .collect();
    Ok(episodes)
}

/// Per-axis word thresholds for the fixed baseline: `fixed_t` scaled by each axis'
/// base threshold relative to the translational mean.
pub fn fixed_axis_thresholds<S: Scalar>(fixed_t: S, cfg: &PipelineConfig<S>) -> [S; 6] {
    let mean = cfg.translational_base();
    std::array::from_fn(|i| fixed_t * cfg.t_base[i] / mean)
}

/// Single-window, non-adaptive baseline. Motion iff `||p(end) - p(start)|| > fixed_t`.
pub fn fixed_threshold_annotate<S: Scalar>(
    traj: &Trajectory<S>,
    stats: &DatasetStats<S>,
    fixed_t: S,
    window: usize,
    cfg: &PipelineConfig<S>,
) -> Result<Vec<MotionLabel>, Error> {
    if fixed_t.is_nan() || fixed_t <= S::zero() {
        return Err(EvalError::InvalidFixedThreshold(fixed_t.to_f64_lossy()).into());
    }
    let signals = EpisodeSignals::new(traj, stats, cfg, ThresholdPolicy::Fixed(cfg.t_base));
    Ok(fixed_labels(&signals, fixed_t, window, cfg))
}

fn fixed_labels<S: Scalar>(
    signals: &EpisodeSignals<S>,
    fixed_t: S,
    window: usize,
    cfg: &PipelineConfig<S>,
) -> Vec<MotionLabel> {
    let limits = fixed_axis_thresholds(fixed_t, cfg);
    let p = &signals.positions;
    (0..signals.len())
        .map(|t| {
            let w = window_span(t, window.max(1), p.len(), cfg.anchor);
            let d: [S; 3] = std::array::from_fn(|i| p[w.end][i] - p[w.start][i]);
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let act = AxisActivation::over_window(signals, w, &limits, S::one(), cfg);
            render_words(norm > fixed_t, &act, cfg).label
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Adaptive,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub method: Method,
    pub per_episode: Vec<f64>,
    pub mean: f64,
    pub steps: u64,
    pub correct: u64,
    /// truth label -> predicted label -> count
    pub confusion: BTreeMap<String, BTreeMap<String, u64>>,
}

impl AccuracyReport {
    pub fn empty(method: Method) -> Self {
        Self {
            method,
            per_episode: Vec::new(),
            mean: 0.0,
            steps: 0,
            correct: 0,
            confusion: BTreeMap::new(),
        }
    }

    /// Appends another report's episodes; the mean stays Σcorrect / Σsteps.
    pub fn merge(mut self, other: &AccuracyReport) -> Self {
        self.per_episode.extend_from_slice(&other.per_episode);
        self.steps += other.steps;
        self.correct += other.correct;
        for (truth, row) in &other.confusion {
            let mine = self.confusion.entry(truth.clone()).or_default();
            for (pred, n) in row {
                *mine.entry(pred.clone()).or_default() += n;
            }
        }
        self.mean = if self.steps == 0 {
            0.0
        } else {
            self.correct as f64 / self.steps as f64
        };
        self
    }
}

/// Exact-string per-step accuracy for one episode.
pub fn score(pred: &[MotionLabel], truth: &[MotionLabel], method: Method) -> Result<AccuracyReport, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let mut report = AccuracyReport::empty(method);
    let mut correct = 0u64;
    for (p, t) in pred.iter().zip(truth) {
        let (ps, ts) = (p.to_string(), t.to_string());
        correct += (ps == ts) as u64;
        *report.confusion.entry(ts).or_default().entry(ps).or_default() += 1;
    }
    report.steps = pred.len() as u64;
    report.correct = correct;
    report.mean = if pred.is_empty() {
        0.0
    } else {
        correct as f64 / pred.len() as f64
    };
    report.per_episode.push(report.mean);
    Ok(report)
}

fn score_all(parts: Vec<AccuracyReport>, method: Method) -> AccuracyReport {
    parts.iter().fold(AccuracyReport::empty(method), |acc, r| acc.merge(r))
}

/// Multiples of the translational base threshold tried for the fixed baseline.
pub const DEFAULT_FIXED_SWEEP: [f64; 8] = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0];
pub const DEFAULT_FIXED_WINDOW: usize = 2;
/// Jitter amplitudes of the sweep, as multiples of the translational base threshold.
pub const DEFAULT_JITTER_SWEEP: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fixed_threshold: f64,
    pub accuracy: f64,
}

/// Paired comparison on identical episodes. `fixed` is the best threshold of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub adaptive: AccuracyReport,
    pub fixed: AccuracyReport,
    pub spec: SyntheticSpec,
    pub seed: u64,
    pub fixed_threshold: f64,
    pub fixed_window: usize,
    pub fixed_sweep: Vec<SweepPoint>,
}

impl BenchmarkReport {
    pub fn margin(&self) -> f64 {
        self.adaptive.mean - self.fixed.mean
    }
}

/// Scores adaptive annotation against the fixed baseline at each threshold in
/// `fixed_thresholds`, keeping the best fixed result (ties go to the earlier entry).
pub fn run_benchmark<S: Scalar>(
    spec: &SyntheticSpec,
    cfg: &PipelineConfig<S>,
    fixed_thresholds: &[S],
    window: usize,
) -> Result<BenchmarkReport, Error> {
    if fixed_thresholds.is_empty() {
        return Err(EvalError::InvalidSpec("at least one fixed threshold is required".into()).into());
    }
    if let Some(bad) = fixed_thresholds.iter().find(|f| f.is_nan() || **f <= S::zero()) {
        return Err(EvalError::InvalidFixedThreshold(bad.to_f64_lossy()).into());
    }
    let episodes = generate_synthetic(spec, cfg)?;
    let annotator = Annotator::new(DatasetStats::unit(), cfg.clone())?;
    let per_episode: Vec<(AccuracyReport, Vec<AccuracyReport>)> = episodes
        .par_iter()
        .map(|ep| {
            let signals = EpisodeSignals::new(&ep.trajectory, annotator.stats(), cfg, ThresholdPolicy::Adaptive);
            let adaptive = crate::renderer::annotate_signals(&signals, cfg).0;
            let adaptive = score(&adaptive, &ep.truth, Method::Adaptive)?;
            let fixed = fixed_thresholds
                .iter()
                .map(|&f| score(&fixed_labels(&signals, f, window, cfg), &ep.truth, Method::Fixed))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((adaptive, fixed))
        })
        .collect::<Result<_, EvalError>>()?;
    let adaptive = score_all(per_episode.iter().map(|(a, _)| a.clone()).collect(), Method::Adaptive);
    let fixed_reports: Vec<AccuracyReport> = (0..fixed_thresholds.len())
        .map(|k| score_all(per_episode.iter().map(|(_, f)| f[k].clone()).collect(), Method::Fixed))
        .collect();
    let mut best = 0;
    for (k, r) in fixed_reports.iter().enumerate() {
        if r.mean > fixed_reports[best].mean {
            best = k;
        }
    }
    let fixed_sweep = fixed_thresholds
        .iter()
        .zip(&fixed_reports)
        .map(|(f, r)| SweepPoint {
            fixed_threshold: f.to_f64_lossy(),
            accuracy: r.mean,
        })
        .collect();
    Ok(BenchmarkReport {
        adaptive,
        fixed: fixed_reports[best].clone(),
        spec: spec.clone(),
        seed: spec.seed,
        fixed_threshold: fixed_thresholds[best].to_f64_lossy(),
        fixed_window: window,
        fixed_sweep,
    })
}

/// `DEFAULT_FIXED_SWEEP` scaled by the translational base threshold.
pub fn default_fixed_thresholds<S: Scalar>(cfg: &PipelineConfig<S>) -> Vec<S> {
    DEFAULT_FIXED_SWEEP
        .iter()
        .map(|m| S::lit(*m) * cfg.translational_base())
        .collect()
}

/// One row of the jitter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterSweepRow {
    pub jitter_multiple: f64,
    pub jitter_amplitude: f64,
    pub adaptive_accuracy: f64,
    pub fixed_accuracy: f64,
    pub fixed_threshold: f64,
}

/// Runs the benchmark at each jitter multiple of the translational base threshold.
pub fn jitter_sweep<S: Scalar>(
    spec: &SyntheticSpec,
    cfg: &PipelineConfig<S>,
    multiples: &[f64],
    fixed_thresholds: &[S],
    window: usize,
) -> Result<Vec<JitterSweepRow>, Error> {
    let base = cfg.translational_base().to_f64_lossy();
    multiples
        .iter()
        .map(|&m| {
            let spec = SyntheticSpec {
                jitter_amplitude: m * base,
                ..spec.clone()
            };
            let r = run_benchmark(&spec, cfg, fixed_thresholds, window)?;
            Ok(JitterSweepRow {
                jitter_multiple: m,
                jitter_amplitude: spec.jitter_amplitude,
                adaptive_accuracy: r.adaptive.mean,
                fixed_accuracy: r.fixed.mean,
                fixed_threshold: r.fixed_threshold,
            })
        })
        .collect()
}
