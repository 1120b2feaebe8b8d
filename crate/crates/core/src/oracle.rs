//! Brute-force reference detector, written without the production helpers, and a
//! seeded random-walk equivalence check against it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::detector::{DetectorVerdict, EpisodeSignals, ThresholdPolicy, WindowKind};
use crate::model::{ActionVector, Anchor, PipelineConfig, Trajectory, TrajectoryStep, ACTION_DIMS};
use crate::scalar::Scalar;
use crate::tokenizer::DatasetStats;

/// Reference position `p(k)`: the sum of the first `k` translational deltas.
fn position<S: Scalar>(deltas: &[[S; ACTION_DIMS]], k: usize) -> [S; 3] {
    let mut p = [S::zero(); 3];
    for d in &deltas[..k] {
        for i in 0..3 {
            p[i] = p[i] + d[i];
        }
    }
    p
}

fn length<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
    let (x, y, z) = (b[0] - a[0], b[1] - a[1], b[2] - a[2]);
    (x * x + y * y + z * z).sqrt()
}

/// Reference `T_i(t)`, recomputed from scratch over the trailing `tau` steps.
pub fn reference_threshold<S: Scalar>(deltas: &[[S; ACTION_DIMS]], t: usize, dim: usize, cfg: &PipelineConfig<S>) -> S {
    let first = (t + 1).saturating_sub(cfg.tau);
    let mut sum = S::zero();
    for d in &deltas[first..=t] {
        sum = sum + d[dim].abs();
    }
    cfg.t_base[dim] + cfg.beta * (sum / S::count(t + 1 - first))
}

/// Reference window over positions `0..=last` as `(start, end)`.
fn reference_window(t: usize, dt: usize, last: usize, anchor: Anchor) -> (usize, usize) {
    let w = dt.min(last);
    match anchor {
        Anchor::Forward => {
            let start = t.min(last - w);
            (start, start + w)
        }
        Anchor::Backward => {
            let end = t.min(last).max(w);
            (end - w, end)
        }
    }
}

/// Reference verdict at step `t` of an episode given as normalized deltas.
pub fn reference_verdict<S: Scalar>(deltas: &[[S; ACTION_DIMS]], t: usize, cfg: &PipelineConfig<S>) -> DetectorVerdict {
    let last = deltas.len();
    let thr: Vec<S> = (0..3).map(|i| reference_threshold(deltas, t, i, cfg)).collect();
    let big_t = (thr[0] + thr[1] + thr[2]) / S::lit(3.0);
    let two = S::lit(2.0);

    let (a, b) = reference_window(t, cfg.dt_fast, last, cfg.anchor);
    let fast = b > a && length(position(deltas, a), position(deltas, b)) > two * big_t;

    let (a, b) = reference_window(t, cfg.dt_mid, last, cfg.anchor);
    let mut every_step_moves = true;
    for s in a..b {
        if length(position(deltas, s), position(deltas, s + 1)) <= S::zero() {
            every_step_moves = false;
        }
    }
    let mid = b > a && length(position(deltas, a), position(deltas, b)) > big_t && every_step_moves;

    let (a, b) = reference_window(t, cfg.dt_slow, last, cfg.anchor);
    let (pa, pb) = (position(deltas, a), position(deltas, b));
    let net = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
    let floor = big_t / (two * S::count(cfg.dt_slow));
    let mut slow = b > a && length(pa, pb) > big_t;
    for s in a..b {
        let (p0, p1) = (position(deltas, s), position(deltas, s + 1));
        let step = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
        let along = step[0] * net[0] + step[1] * net[1] + step[2] * net[2];
        if length(p0, p1) <= floor || (cfg.slow_direction_check && along <= S::zero()) {
            slow = false;
        }
    }
    DetectorVerdict { fast, mid, slow }
}

/// Random walk mixing still, sub-threshold and super-threshold steps.
pub fn random_walk_episode(rng: &mut ChaCha8Rng, max_len: usize, cfg: &PipelineConfig<f64>) -> Trajectory<f64> {
    let len = rng.gen_range(1..=max_len);
    let steps = (0..len)
        .map(|_| {
            let regime = rng.gen_range(0..3);
            let mut a = [0.0; ACTION_DIMS];
            for (i, slot) in a.iter_mut().take(6).enumerate() {
                let base = cfg.t_base[i];
                let m = match regime {
                    0 => 0.0,
                    1 => rng.gen_range(0.0..0.5) * base,
                    _ => rng.gen_range(1.0..4.0) * base,
                };
                *slot = if rng.gen() { m } else { -m };
            }
            a[6] = if rng.gen_bool(0.9) { 1.0 } else { 0.0 };
            TrajectoryStep::from_action(ActionVector::new(a))
        })
        .collect();
    Trajectory {
        id: "walk".into(),
        instruction: "wander".into(),
        steps,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub episode: usize,
    pub step: usize,
    pub production: DetectorVerdict,
    pub reference: DetectorVerdict,
    pub production_window: Option<WindowKind>,
    pub reference_window: Option<WindowKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EquivalenceReport {
    pub episodes: usize,
    pub steps: usize,
    pub mismatches: Vec<Mismatch>,
    /// Steps where at least one detector fired, to show the walks exercise both outcomes.
    pub motion_steps: usize,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares production and reference verdicts on `episodes` seeded random walks.
pub fn run_equivalence(episodes: usize, max_len: usize, seed: u64, cfg: &PipelineConfig<f64>) -> EquivalenceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stats = DatasetStats::unit();
    let mut report = EquivalenceReport {
        episodes,
        ..EquivalenceReport::default()
    };
    for e in 0..episodes {
        let traj = random_walk_episode(&mut rng, max_len, cfg);
        let signals = EpisodeSignals::new(&traj, &stats, cfg, ThresholdPolicy::Adaptive);
        for t in 0..signals.len() {
            let production = signals.verdict(t, cfg);
            let reference = reference_verdict(&signals.normalized, t, cfg);
            report.steps += 1;
            report.motion_steps += production.motion() as usize;
            if production != reference || production.fired_window() != reference.fired_window() {
                report.mismatches.push(Mismatch {
                    episode: e,
                    step: t,
                    production,
                    reference,
                    production_window: production.fired_window(),
                    reference_window: reference.fired_window(),
                });
            }
        }
    }
    report
}
