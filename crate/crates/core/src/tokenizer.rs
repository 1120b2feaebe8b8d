//! Percentile normalization and 256-bin action tokens.
//!
//! Statistics are computed in a separate pass over the whole dataset: for each of
//! the seven action dimensions the nearest-rank 1st and 99th percentiles bound the
//! normalization range, so a handful of outliers cannot stretch the bins.

use std::fmt::{self, Write as _};

use serde::Deserialize;
use thiserror::Error;

use crate::model::{ActionVector, Trajectory, ACTION_DIMS, BINS};
use crate::scalar::Scalar;

/// Half-width used to widen a dimension whose range collapsed to a point.
pub const DEGENERATE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizerError {
    #[error("dataset contains no steps")]
    EmptyDataset,
    #[error("bin {bin} in dimension {dim} is outside [0, {max}]", max = BINS - 1)]
    BinOutOfRange { dim: usize, bin: u32 },
    #[error("invalid stats: {0}")]
    InvalidStats(String),
}

/// Normalization bounds for one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimRange<S> {
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> DimRange<S> {
    pub fn width(&self) -> S {
        self.hi - self.lo
    }
}

/// Per-dimension 1st/99th percentile bounds over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats<S> {
    pub dims: [DimRange<S>; ACTION_DIMS],
    /// Number of steps aggregated.
    pub count: u64,
}

impl<S: Scalar> DatasetStats<S> {
    /// Bounds `[-1, 1]` on every dimension, which makes [`normalize`] a clamp.
    pub fn unit() -> Self {
        Self {
            dims: [DimRange {
                lo: -S::one(),
                hi: S::one(),
            }; ACTION_DIMS],
            count: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TokenizerError> {
        for (i, d) in self.dims.iter().enumerate() {
            if !d.lo.is_finite() || !d.hi.is_finite() {
                return Err(TokenizerError::InvalidStats(format!("dimension {i} is not finite")));
            }
            if d.lo >= d.hi {
                return Err(TokenizerError::InvalidStats(format!(
                    "dimension {i} has lo >= hi ({} >= {})",
                    d.lo, d.hi
                )));
            }
        }
        Ok(())
    }

    /// JSON document with every bound written to 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\"dims\": [");
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write!(out, "{{\"lo\": {:.16e}, \"hi\": {:.16e}}}", d.lo, d.hi).unwrap();
        }
        write!(out, "], \"count\": {}}}", self.count).unwrap();
        out.push('\n');
        out
    }

    pub fn from_json(doc: &str) -> Result<Self, TokenizerError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Dim {
            lo: f64,
            hi: f64,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            dims: Vec<Dim>,
            count: u64,
        }
        let doc: Doc = serde_json::from_str(doc).map_err(|e| TokenizerError::InvalidStats(e.to_string()))?;
        if doc.dims.len() != ACTION_DIMS {
            return Err(TokenizerError::InvalidStats(format!(
                "expected {ACTION_DIMS} dims, found {}",
                doc.dims.len()
            )));
        }
        let conv =
            |v: f64| S::from_f64(v).ok_or_else(|| TokenizerError::InvalidStats(format!("{v} not representable")));
        let mut dims = [DimRange {
            lo: S::zero(),
            hi: S::zero(),
        }; ACTION_DIMS];
        for (slot, d) in dims.iter_mut().zip(&doc.dims) {
            *slot = DimRange {
                lo: conv(d.lo)?,
                hi: conv(d.hi)?,
            };
        }
        let stats = Self { dims, count: doc.count };
        stats.validate()?;
        Ok(stats)
    }
}

/// Collects raw per-dimension values; partitions can be merged before finishing.
#[derive(Debug, Clone)]
pub struct StatsAccumulator<S> {
    values: [Vec<S>; ACTION_DIMS],
}

impl<S: Scalar> Default for StatsAccumulator<S> {
    fn default() -> Self {
        Self {
            values: Default::default(),
        }
    }
}

impl<S: Scalar> StatsAccumulator<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, action: &ActionVector<S>) {
        for (dim, v) in action.to_array().into_iter().enumerate() {
            self.values[dim].push(v);
        }
    }

    pub fn add_trajectory(&mut self, traj: &Trajectory<S>) {
        for a in traj.actions() {
            self.push(a);
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (mine, theirs) in self.values.iter_mut().zip(other.values) {
            mine.extend(theirs);
        }
        self
    }

    pub fn finish(mut self) -> Result<DatasetStats<S>, TokenizerError> {
        let n = self.len();
        if n == 0 {
            return Err(TokenizerError::EmptyDataset);
        }
        let (r01, r99) = percentile_ranks(n);
        let mut dims = [DimRange {
            lo: S::zero(),
            hi: S::zero(),
        }; ACTION_DIMS];
        for (slot, values) in dims.iter_mut().zip(self.values.iter_mut()) {
            values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite action values"));
            *slot = widen_degenerate(values[r01 - 1], values[r99 - 1]);
        }
        Ok(DatasetStats { dims, count: n as u64 })
    }
}

/// 1-indexed nearest ranks `ceil(0.01 n)` and `ceil(0.99 n)`, in exact integer arithmetic.
pub fn percentile_ranks(n: usize) -> (usize, usize) {
    let r01 = n.div_ceil(100).max(1);
    let r99 = (99 * n).div_ceil(100).max(1);
    (r01, r99)
}

fn widen_degenerate<S: Scalar>(lo: S, hi: S) -> DimRange<S> {
    if lo < hi {
        return DimRange { lo, hi };
    }
    let mut eps = S::lit(DEGENERATE_EPSILON);
    if lo - eps == lo || hi + eps == hi {
        // eps is below the spacing of representable values here
        eps = lo.abs() * S::epsilon() * S::lit(2.0);
    }
    DimRange {
        lo: lo - eps,
        hi: hi + eps,
    }
}

/// Two-pass statistics over a stream of episodes.
pub fn compute_dataset_stats<'a, S, I>(trajectories: I) -> Result<DatasetStats<S>, TokenizerError>
where
    S: Scalar,
    I: IntoIterator<Item = &'a Trajectory<S>>,
{
    let mut acc = StatsAccumulator::new();
    for t in trajectories {
        acc.add_trajectory(t);
    }
    acc.finish()
}

/// Maps one value into `[-1, 1]`.
pub fn normalize_value<S: Scalar>(x: S, range: &DimRange<S>) -> S {
    let two = S::lit(2.0);
    let v = two * (x - range.lo) / range.width() - S::one();
    v.max(-S::one()).min(S::one())
}

/// Maps every dimension of an action into `[-1, 1]`.
pub fn normalize<S: Scalar>(a: &ActionVector<S>, stats: &DatasetStats<S>) -> [S; ACTION_DIMS] {
    let raw = a.to_array();
    std::array::from_fn(|i| normalize_value(raw[i], &stats.dims[i]))
}

/// Bin index of one value: half-open bins, top edge folded into the last bin.
pub fn bin_value<S: Scalar>(x: S, range: &DimRange<S>) -> u8 {
    let scaled = ((x - range.lo) / range.width() * S::count(BINS)).floor();
    let clamped = scaled.max(S::zero()).min(S::count(BINS - 1));
    // NaN falls through both comparisons of max/min as the non-NaN operand
    clamped.to_u8().unwrap_or(0)
}

/// Seven discrete bins of one action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionTokens {
    pub bins: [u8; ACTION_DIMS],
}

impl ActionTokens {
    pub fn rendered(&self) -> [String; ACTION_DIMS] {
        std::array::from_fn(|i| token_string(self.bins[i]))
    }
}

impl fmt::Display for ActionTokens {
    /// All seven tokens, concatenated without separators.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bins {
            write!(f, "<extra_{b}>")?;
        }
        Ok(())
    }
}

pub fn token_string(bin: u8) -> String {
    format!("<extra_{bin}>")
}

pub fn tokenize_action<S: Scalar>(a: &ActionVector<S>, stats: &DatasetStats<S>) -> ActionTokens {
    let raw = a.to_array();
    ActionTokens {
        bins: std::array::from_fn(|i| bin_value(raw[i], &stats.dims[i])),
    }
}

/// Bin centers back in dataset units.
pub fn detokenize<S: Scalar>(
    bins: &[u32; ACTION_DIMS],
    stats: &DatasetStats<S>,
) -> Result<ActionVector<S>, TokenizerError> {
    let mut out = [S::zero(); ACTION_DIMS];
    for (dim, (&bin, range)) in bins.iter().zip(&stats.dims).enumerate() {
        if bin as usize >= BINS {
            return Err(TokenizerError::BinOutOfRange { dim, bin });
        }
        let center = S::count(bin as usize) + S::lit(0.5);
        out[dim] = range.lo + center * range.width() / S::count(BINS);
    }
    Ok(ActionVector::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn stats_1d(lo: f64, hi: f64) -> DatasetStats<f64> {
        DatasetStats {
            dims: [DimRange { lo, hi }; ACTION_DIMS],
            count: 1,
        }
    }

    fn dataset(values: &[f64]) -> Trajectory<f64> {
        use crate::model::TrajectoryStep;
        Trajectory {
            id: "d".into(),
            instruction: "x".into(),
            steps: values
                .iter()
                .map(|&v| TrajectoryStep::from_action(ActionVector::new([v; ACTION_DIMS])))
                .collect(),
        }
    }

    #[test]
    fn ranks() {
        assert_eq!(percentile_ranks(100), (1, 99));
        assert_eq!(percentile_ranks(1), (1, 1));
        assert_eq!(percentile_ranks(3), (1, 3));
        assert_eq!(percentile_ranks(200), (2, 198));
        assert_eq!(percentile_ranks(201), (3, 199));
    }

    #[test]
    fn one_to_hundred() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let stats = compute_dataset_stats([&dataset(&values)]).unwrap();
        assert_eq!(stats.dims[0], DimRange { lo: 1.0, hi: 99.0 });
        assert_eq!(stats.count, 100);
    }

    #[test]
    fn constant_dimension_is_widened() {
        let stats = compute_dataset_stats([&dataset(&[0.5; 10])]).unwrap();
        assert_eq!(stats.dims[3].lo, 0.5 - 1e-8);
        assert_eq!(stats.dims[3].hi, 0.5 + 1e-8);
        stats.validate().unwrap();
    }

    #[test]
    fn constant_dimension_widened_in_f32() {
        let mut acc = StatsAccumulator::<f32>::new();
        for _ in 0..5 {
            acc.push(&ActionVector::new([0.5; ACTION_DIMS]));
        }
        let stats = acc.finish().unwrap();
        assert!(stats.dims[0].lo < 0.5 && stats.dims[0].hi > 0.5);
    }

    #[test]
    fn single_low_outlier_is_rank_one_at_n_100() {
        // rank ceil(0.01 * 100) = 1 is the minimum itself; only the top outlier is excluded
        let mut values = vec![-1.0];
        values.extend((0..98).map(|i| -0.1 + 0.2 * i as f64 / 97.0));
        values.push(1.0);
        let d = compute_dataset_stats([&dataset(&values)]).unwrap().dims[0];
        assert_eq!(d.lo, -1.0);
        assert_eq!(d.hi, 0.1);
    }

    #[test]
    fn outliers_do_not_expand_range() {
        let mut values = vec![-1.0];
        values.extend((0..198).map(|i| -0.1 + 0.2 * i as f64 / 197.0));
        values.push(1.0);
        let d = compute_dataset_stats([&dataset(&values)]).unwrap().dims[0];
        assert!((-0.1..=0.1).contains(&d.lo) && (-0.1..=0.1).contains(&d.hi), "{d:?}");
    }

    #[test]
    fn empty_dataset() {
        assert_eq!(
            compute_dataset_stats::<f64, _>([]).unwrap_err(),
            TokenizerError::EmptyDataset
        );
    }

    #[test]
    fn normalize_examples() {
        let r = DimRange { lo: -0.1, hi: 0.1 };
        assert_eq!(normalize_value(-0.1, &r), -1.0);
        assert_eq!(normalize_value(0.0, &r), 0.0);
        assert_abs_diff_eq!(normalize_value(0.05, &r), 0.5, epsilon = 1e-12);
        assert_eq!(normalize_value(3.0, &r), 1.0);
        let r = DimRange { lo: 2.0, hi: 6.0 };
        assert_eq!(normalize_value(4.0, &r), 0.0);
    }

    #[test]
    fn tokenize_examples() {
        let stats = stats_1d(-0.1, 0.1);
        let t = tokenize_action(&ActionVector::new([0.0; ACTION_DIMS]), &stats);
        assert_eq!(t.bins, [128; ACTION_DIMS]);
        assert_eq!(t.rendered()[0], "<extra_128>");
        assert_eq!(bin_value(-0.1, &stats.dims[0]), 0);
        assert_eq!(bin_value(0.1, &stats.dims[0]), 255);
        assert_eq!(bin_value(-0.5, &stats.dims[0]), 0);
        assert_eq!(bin_value(7.0, &stats.dims[0]), 255);
    }

    #[test]
    fn detokenize_examples() {
        let stats = stats_1d(-0.1, 0.1);
        let a = detokenize(&[0, 128, 255, 0, 0, 0, 0], &stats).unwrap();
        assert_abs_diff_eq!(a.dx, -0.1 + 0.5 * (0.2 / 256.0), epsilon = 1e-15);
        assert_abs_diff_eq!(a.dx, -0.099609375, epsilon = 1e-15);
        assert_abs_diff_eq!(a.dy, 0.000390625, epsilon = 1e-15);
        assert_eq!(
            detokenize(&[0, 0, 256, 0, 0, 0, 0], &stats),
            Err(TokenizerError::BinOutOfRange { dim: 2, bin: 256 })
        );
    }

    #[test]
    fn rendered_tokens_concatenate() {
        let t = ActionTokens {
            bins: [128; ACTION_DIMS],
        };
        assert_eq!(t.to_string(), "<extra_128>".repeat(7));
    }

    #[test]
    fn exhaustive_round_trip_sweep() {
        let r = DimRange { lo: -0.3, hi: 0.7 };
        let stats = DatasetStats {
            dims: [r; ACTION_DIMS],
            count: 1,
        };
        let half = r.width() / 512.0;
        let n = 100_000;
        for k in 0..n {
            let x = r.lo + r.width() * k as f64 / n as f64;
            let bin = bin_value(x, &r) as u32;
            let back = detokenize(&[bin; ACTION_DIMS], &stats).unwrap().dx;
            assert!((back - x).abs() <= half, "x={x} bin={bin} back={back}");
        }
    }

    #[test]
    fn stats_json_round_trip_is_bit_exact() {
        let mut stats = stats_1d(-0.1, 0.1);
        stats.dims[2] = DimRange {
            lo: 1.0 / 3.0,
            hi: std::f64::consts::PI,
        };
        stats.count = 42;
        let json = stats.to_json();
        assert!(json.starts_with("{\"dims\": [{\"lo\": -1.0000000000000001e-1, \"hi\": 1.0000000000000001e-1}"));
        let back = DatasetStats::<f64>::from_json(&json).unwrap();
        assert_eq!(back, stats);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn stats_json_rejects_bad_documents() {
        assert!(DatasetStats::<f64>::from_json("{\"dims\": [], \"count\": 0}").is_err());
        let mut stats = stats_1d(-0.1, 0.1);
        stats.dims[0] = DimRange { lo: 0.2, hi: 0.1 };
        assert!(DatasetStats::<f64>::from_json(&stats.to_json()).is_err());
    }
}
