//! Adaptive thresholds and the fast/mid/slow window detectors.
//!
//! The per-dimension threshold at step `t` is `T_base + beta * mean(|d_i(s)|)` over
//! the last `tau` normalized deltas (the available prefix near the episode start).
//! The positional detectors compare windowed gripper displacement against the mean
//! of the three translational thresholds:
//!
//! * fast: `|p(b) - p(a)| > 2T` over `dt_fast` steps
//! * mid: `|p(b) - p(a)| > T` and no unit step of zero length over `dt_mid` steps
//! * slow: `|p(b) - p(a)| > T`, every unit step longer than `T / (2 dt_slow)` and,
//!   optionally, every unit step pointing along the net displacement
//!
//! Motion is declared when any of the three fires.

use std::collections::VecDeque;

use crate::model::{Anchor, PipelineConfig, Trajectory, ACTION_DIMS};
use crate::scalar::Scalar;
use crate::tokenizer::{normalize, DatasetStats};

pub type Point<S> = [S; 3];

/// Span `[start, end]` over position indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    /// Number of unit steps covered.
    pub fn steps(&self) -> usize {
        self.end - self.start
    }
}

/// Window of nominal length `dt` anchored at `t`, kept inside `[0, len - 1]`.
///
/// Near the episode boundary the window slides inward instead of shrinking, so it
/// keeps `dt` steps whenever the episode has that many.
pub fn window_span(t: usize, dt: usize, len: usize, anchor: Anchor) -> Window {
    if len == 0 {
        return Window { start: 0, end: 0 };
    }
    let last = len - 1;
    match anchor {
        Anchor::Forward => {
            let end = (t + dt).min(last);
            Window {
                start: end.saturating_sub(dt),
                end,
            }
        }
        Anchor::Backward => {
            let start = t.min(last).saturating_sub(dt);
            Window {
                start,
                end: (start + dt).min(last),
            }
        }
    }
}

/// Gripper positions: verbatim when recorded, else integrated from normalized deltas.
///
/// Integrated positions have one more entry than the episode has steps: `p(0)` is the
/// origin and `p(k)` is the sum of the first `k` translational deltas.
pub fn reconstruct_positions<S: Scalar>(traj: &Trajectory<S>, stats: &DatasetStats<S>) -> Vec<Point<S>> {
    if traj.has_positions() {
        return traj.steps.iter().map(|s| s.position.expect("checked")).collect();
    }
    let normalized: Vec<_> = traj.actions().map(|a| normalize(a, stats)).collect();
    integrate_positions(&normalized)
}

pub fn integrate_positions<S: Scalar>(normalized: &[[S; ACTION_DIMS]]) -> Vec<Point<S>> {
    let mut out = Vec::with_capacity(normalized.len() + 1);
    let mut p = [S::zero(); 3];
    out.push(p);
    for d in normalized {
        p = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
        out.push(p);
    }
    out
}

fn sub<S: Scalar>(a: &Point<S>, b: &Point<S>) -> Point<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm<S: Scalar>(v: &Point<S>) -> S {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot<S: Scalar>(a: &Point<S>, b: &Point<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Rolling history of normalized displacement magnitudes for one episode.
#[derive(Debug, Clone)]
pub struct AdaptiveThresholdState<S> {
    tau: usize,
    history: VecDeque<[S; ACTION_DIMS]>,
    t: usize,
}

impl<S: Scalar> AdaptiveThresholdState<S> {
    pub fn new(tau: usize) -> Self {
        assert!(tau >= 1, "tau must be at least 1");
        Self {
            tau,
            history: VecDeque::with_capacity(tau),
            t: 0,
        }
    }

    /// Records the normalized delta of the current step.
    pub fn push(&mut self, normalized: &[S; ACTION_DIMS]) {
        if self.history.len() == self.tau {
            self.history.pop_front();
        }
        self.history.push_back(normalized.map(|v| v.abs()));
        self.t += 1;
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Steps pushed so far.
    pub fn steps_seen(&self) -> usize {
        self.t
    }

    fn mean(&self, dim: usize) -> S {
        let sum = self.history.iter().fold(S::zero(), |acc, m| acc + m[dim]);
        sum / S::count(self.history.len())
    }

    /// `T_i(t)`; requires at least one recorded step.
    pub fn threshold(&self, dim: usize, cfg: &PipelineConfig<S>) -> S {
        assert!(!self.history.is_empty(), "no displacement recorded yet");
        cfg.t_base[dim] + cfg.beta * self.mean(dim)
    }

    pub fn thresholds(&self, cfg: &PipelineConfig<S>) -> [S; ACTION_DIMS] {
        std::array::from_fn(|i| self.threshold(i, cfg))
    }
}

/// `T_i(t)` from an explicit history, for callers that do not keep a state.
pub fn adaptive_threshold<S: Scalar>(state: &AdaptiveThresholdState<S>, dim: usize, cfg: &PipelineConfig<S>) -> S {
    state.threshold(dim, cfg)
}

/// Scalar positional threshold: mean of the translational thresholds.
pub fn positional_threshold<S: Scalar>(thresholds: &[S; ACTION_DIMS]) -> S {
    (thresholds[0] + thresholds[1] + thresholds[2]) / S::lit(3.0)
}

/// How per-dimension thresholds evolve along an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy<S> {
    /// Raised by recent displacement magnitude, using the config's `beta` and `tau`.
    Adaptive,
    /// Constant per dimension.
    Fixed([S; ACTION_DIMS]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Fast,
    Mid,
    Slow,
}

impl WindowKind {
    pub fn size<S>(self, cfg: &PipelineConfig<S>) -> usize {
        match self {
            WindowKind::Fast => cfg.dt_fast,
            WindowKind::Mid => cfg.dt_mid,
            WindowKind::Slow => cfg.dt_slow,
        }
    }
}

/// Outcome of the three detectors at one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, serde::Serialize)]
pub struct DetectorVerdict {
    pub fast: bool,
    pub mid: bool,
    pub slow: bool,
}

impl DetectorVerdict {
    pub fn motion(&self) -> bool {
        self.fast || self.mid || self.slow
    }

    /// Smallest window that fired.
    pub fn fired_window(&self) -> Option<WindowKind> {
        if self.fast {
            Some(WindowKind::Fast)
        } else if self.mid {
            Some(WindowKind::Mid)
        } else if self.slow {
            Some(WindowKind::Slow)
        } else {
            None
        }
    }
}

fn min_step_norm<S: Scalar>(p: &[Point<S>], w: Window) -> S {
    (w.start..w.end)
        .map(|s| norm(&sub(&p[s + 1], &p[s])))
        .fold(S::infinity(), S::min)
}

pub fn detect_fast<S: Scalar>(p: &[Point<S>], t: usize, threshold: S, cfg: &PipelineConfig<S>) -> bool {
    let w = window_span(t, cfg.dt_fast, p.len(), cfg.anchor);
    w.steps() > 0 && norm(&sub(&p[w.end], &p[w.start])) > S::lit(2.0) * threshold
}

pub fn detect_mid<S: Scalar>(p: &[Point<S>], t: usize, threshold: S, cfg: &PipelineConfig<S>) -> bool {
    let w = window_span(t, cfg.dt_mid, p.len(), cfg.anchor);
    w.steps() > 0 && norm(&sub(&p[w.end], &p[w.start])) > threshold && min_step_norm(p, w) > S::zero()
}

pub fn detect_slow<S: Scalar>(p: &[Point<S>], t: usize, threshold: S, cfg: &PipelineConfig<S>) -> bool {
    let w = window_span(t, cfg.dt_slow, p.len(), cfg.anchor);
    if w.steps() == 0 {
        return false;
    }
    let net = sub(&p[w.end], &p[w.start]);
    if norm(&net) <= threshold {
        return false;
    }
    let floor = threshold / (S::lit(2.0) * S::count(cfg.dt_slow));
    (w.start..w.end).all(|s| {
        let step = sub(&p[s + 1], &p[s]);
        norm(&step) > floor && (!cfg.slow_direction_check || dot(&step, &net) > S::zero())
    })
}

pub fn detect_motion<S: Scalar>(p: &[Point<S>], t: usize, threshold: S, cfg: &PipelineConfig<S>) -> DetectorVerdict {
    DetectorVerdict {
        fast: detect_fast(p, t, threshold, cfg),
        mid: detect_mid(p, t, threshold, cfg),
        slow: detect_slow(p, t, threshold, cfg),
    }
}

/// Everything the detectors and the renderer read for one episode.
#[derive(Debug, Clone)]
pub struct EpisodeSignals<S> {
    /// Normalized action per step.
    pub normalized: Vec<[S; ACTION_DIMS]>,
    /// Raw gripper command per step.
    pub gripper: Vec<S>,
    pub positions: Vec<Point<S>>,
    /// Per-dimension threshold per step.
    pub thresholds: Vec<[S; ACTION_DIMS]>,
}

impl<S: Scalar> EpisodeSignals<S> {
    pub fn new(
        traj: &Trajectory<S>,
        stats: &DatasetStats<S>,
        cfg: &PipelineConfig<S>,
        policy: ThresholdPolicy<S>,
    ) -> Self {
        let normalized: Vec<_> = traj.actions().map(|a| normalize(a, stats)).collect();
        let positions = if traj.has_positions() {
            traj.steps.iter().map(|s| s.position.expect("checked")).collect()
        } else {
            integrate_positions(&normalized)
        };
        let thresholds = match policy {
            ThresholdPolicy::Adaptive => {
                let mut state = AdaptiveThresholdState::new(cfg.tau);
                normalized
                    .iter()
                    .map(|d| {
                        state.push(d);
                        state.thresholds(cfg)
                    })
                    .collect()
            }
            ThresholdPolicy::Fixed(t) => vec![t; normalized.len()],
        };
        Self {
            gripper: traj.actions().map(|a| a.gripper).collect(),
            normalized,
            positions,
            thresholds,
        }
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    pub fn positional_threshold(&self, t: usize) -> S {
        positional_threshold(&self.thresholds[t])
    }

    pub fn verdict(&self, t: usize, cfg: &PipelineConfig<S>) -> DetectorVerdict {
        detect_motion(&self.positions, t, self.positional_threshold(t), cfg)
    }
}

/// Detector verdict for every step of an episode.
pub fn detect_episode<S: Scalar>(
    traj: &Trajectory<S>,
    stats: &DatasetStats<S>,
    cfg: &PipelineConfig<S>,
) -> Vec<DetectorVerdict> {
    let signals = EpisodeSignals::new(traj, stats, cfg, ThresholdPolicy::Adaptive);
    (0..signals.len()).map(|t| signals.verdict(t, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionVector, TrajectoryStep};
    use approx::assert_abs_diff_eq;

    fn cfg() -> PipelineConfig<f64> {
        PipelineConfig::default()
    }

    fn line(steps: &[f64]) -> Vec<Point<f64>> {
        integrate_positions(&steps.iter().map(|&x| [x, 0., 0., 0., 0., 0., 0.]).collect::<Vec<_>>())
    }

    fn traj_from(deltas: &[[f64; 7]]) -> Trajectory<f64> {
        Trajectory {
            id: "t".into(),
            instruction: "go".into(),
            steps: deltas
                .iter()
                .map(|d| TrajectoryStep::from_action(ActionVector::new(*d)))
                .collect(),
        }
    }

    #[test]
    fn windows_slide_inside_the_episode() {
        assert_eq!(window_span(0, 2, 11, Anchor::Forward), Window { start: 0, end: 2 });
        assert_eq!(window_span(9, 4, 11, Anchor::Forward), Window { start: 6, end: 10 });
        assert_eq!(window_span(1, 8, 4, Anchor::Forward), Window { start: 0, end: 3 });
        assert_eq!(window_span(5, 2, 11, Anchor::Backward), Window { start: 3, end: 5 });
        assert_eq!(window_span(1, 4, 11, Anchor::Backward), Window { start: 0, end: 4 });
        assert_eq!(window_span(0, 4, 1, Anchor::Forward).steps(), 0);
    }

    #[test]
    fn reconstruct_uses_recorded_positions_verbatim() {
        let mut traj = traj_from(&[[0.3; 7]; 3]);
        for (i, s) in traj.steps.iter_mut().enumerate() {
            s.position = Some([i as f64, 2.0, -1.0]);
        }
        let p = reconstruct_positions(&traj, &DatasetStats::unit());
        assert_eq!(p, vec![[0., 2., -1.], [1., 2., -1.], [2., 2., -1.]]);
    }

    #[test]
    fn reconstruct_integrates_normalized_deltas() {
        let zero = reconstruct_positions(&traj_from(&[[0.0; 7]; 4]), &DatasetStats::unit());
        assert!(zero.iter().all(|p| *p == [0.0; 3]));
        let p = reconstruct_positions(&traj_from(&[[0.01, 0., 0., 0., 0., 0., 0.]; 5]), &DatasetStats::unit());
        assert_eq!(p.len(), 6);
        assert_abs_diff_eq!(p[5][0], 0.05, epsilon = 1e-15);
        assert_eq!((p[5][1], p[5][2]), (0.0, 0.0));
    }

    #[test]
    fn threshold_examples() {
        let mut c = cfg();
        let mut state = AdaptiveThresholdState::new(4);
        for m in [0.02, 0.04, 0.02, 0.04] {
            state.push(&[m; 7]);
        }
        assert_abs_diff_eq!(state.threshold(0, &c), 0.025, epsilon = 1e-15);
        c.beta = 0.0;
        assert_eq!(adaptive_threshold(&state, 0, &c), 0.01);
        // prefix mean before tau steps
        let mut state = AdaptiveThresholdState::new(4);
        state.push(&[0.02; 7]);
        assert_abs_diff_eq!(state.threshold(1, &cfg()), 0.02, epsilon = 1e-15);
        assert_eq!(state.len(), 1);
    }

    #[test]
    fn history_is_bounded_by_tau() {
        let mut state = AdaptiveThresholdState::<f64>::new(3);
        for i in 0..10 {
            state.push(&[i as f64; 7]);
        }
        assert_eq!(state.len(), 3);
        assert_eq!(state.steps_seen(), 10);
        assert_abs_diff_eq!(state.threshold(0, &cfg()), 0.01 + 0.5 * 8.0, epsilon = 1e-12);
    }

    #[test]
    fn jitter_raises_threshold_above_half_step() {
        // constant magnitude a: steady state T_base + beta * a
        let c = cfg();
        let a = 0.012;
        let mut state = AdaptiveThresholdState::new(c.tau);
        for i in 0..10 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            state.push(&[sign * a; 7]);
        }
        let t = state.threshold(0, &c);
        assert_abs_diff_eq!(t, 0.01 + 0.5 * a, epsilon = 1e-12);
        let step = 0.01 + 0.5 * a / 2.0;
        assert!(step < t);
    }

    #[test]
    fn fast_examples() {
        let c = cfg();
        let p = vec![[0.0; 3], [0.015, 0.0, 0.0], [0.03, 0.0, 0.0]];
        assert!(detect_fast(&p, 0, 0.01, &c));
        assert!(!detect_fast(&line(&[0.0, 0.0]), 0, 0.01, &c));
        let p = vec![[0.0; 3], [0.01, 0.0, 0.0], [0.02, 0.0, 0.0]];
        assert!(!detect_fast(&p, 0, 0.01, &c), "exactly 2T is not motion");
    }

    #[test]
    fn mid_examples() {
        let c = cfg();
        assert!(detect_mid(&line(&[0.004; 4]), 0, 0.01, &c));
        assert!(!detect_mid(&line(&[0.004, 0.004, 0.0, 0.008]), 0, 0.01, &c));
        assert!(!detect_mid(&line(&[0.0; 4]), 0, 0.01, &c));
    }

    #[test]
    fn slow_examples() {
        let c = cfg();
        assert!(detect_slow(&line(&[0.002; 8]), 0, 0.01, &c));
        let alternating: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 0.002 } else { -0.002 }).collect();
        assert!(!detect_slow(&line(&alternating), 0, 0.01, &c));
        let mut slowpoke = [0.002; 8];
        slowpoke[5] = 0.0005;
        assert!(!detect_slow(&line(&slowpoke), 0, 0.01, &c));
    }

    #[test]
    fn slow_direction_check_is_optional() {
        let mut c = cfg();
        let zigzag = [0.004, 0.004, 0.004, -0.001, 0.004, 0.004, 0.004, 0.004];
        assert!(!detect_slow(&line(&zigzag), 0, 0.01, &c));
        c.slow_direction_check = false;
        assert!(detect_slow(&line(&zigzag), 0, 0.01, &c));
    }

    #[test]
    fn verdict_fired_window() {
        let none = DetectorVerdict::default();
        assert!(!none.motion());
        assert_eq!(none.fired_window(), None);
        let fast = DetectorVerdict { fast: true, ..none };
        assert_eq!(fast.fired_window(), Some(WindowKind::Fast));
        let both = DetectorVerdict {
            mid: true,
            slow: true,
            ..none
        };
        assert_eq!(both.fired_window(), Some(WindowKind::Mid));
    }

    #[test]
    fn fixed_policy_ignores_history() {
        let traj = traj_from(&[[0.5; 7]; 6]);
        let c = cfg();
        let s = EpisodeSignals::new(&traj, &DatasetStats::unit(), &c, ThresholdPolicy::Fixed(c.t_base));
        assert!(s.thresholds.iter().all(|t| *t == c.t_base));
        let s = EpisodeSignals::new(&traj, &DatasetStats::unit(), &c, ThresholdPolicy::Adaptive);
        assert_abs_diff_eq!(s.thresholds[3][0], 0.01 + 0.25, epsilon = 1e-12);
    }
}
