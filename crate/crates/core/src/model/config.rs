use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::action::ACTION_DIMS;
use super::label::{MoveX, MoveY, MoveZ, Rotate, Tilt};
use crate::scalar::Scalar;

/// Action token count per dimension.
pub const BINS: usize = 256;

/// Which side of step `t` a detection window covers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    /// `[t, t + dt]`: the label describes the upcoming actions.
    #[default]
    Forward,
    /// `[t - dt, t]`.
    Backward,
}

impl std::str::FromStr for Anchor {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Anchor::Forward),
            "backward" => Ok(Anchor::Backward),
            other => Err(ConfigError::UnknownValue {
                key: "anchor".into(),
                value: other.into(),
            }),
        }
    }
}

/// The word each positive axis direction maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AxisConvention {
    pub x: MoveX,
    pub y: MoveY,
    pub z: MoveZ,
    pub pitch: Tilt,
    pub yaw: Rotate,
}

impl Default for AxisConvention {
    /// `+x` forward, `+y` left, `+z` up, `+pitch` tilt up, `+yaw` counterclockwise.
    fn default() -> Self {
        Self {
            x: MoveX::Forward,
            y: MoveY::Left,
            z: MoveZ::Up,
            pitch: Tilt::Up,
            yaw: Rotate::Counterclockwise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("t_base[{dim}] must be finite and positive")]
    InvalidBaseThreshold { dim: usize },
    #[error("beta must be finite and non-negative")]
    InvalidBeta,
    #[error("tau must be at least 1")]
    InvalidTau,
    #[error("{name} must be at least 1")]
    NonPositiveWindow { name: &'static str },
    #[error("windows must satisfy dt_fast < dt_mid < dt_slow (got {fast}, {mid}, {slow})")]
    WindowOrder { fast: usize, mid: usize, slow: usize },
    #[error("gripper_cutoff must lie strictly between 0 and 1")]
    InvalidGripperCutoff,
    #[error("bins must be {BINS}, got {0}")]
    UnsupportedBins(usize),
    #[error("unknown value {value:?} for {key}")]
    UnknownValue { key: String, value: String },
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Every tunable of the annotation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PipelineConfig<S> {
    /// Base threshold per action dimension, in normalized units.
    pub t_base: [S; ACTION_DIMS],
    /// Sensitivity of the threshold to recent displacement magnitude.
    pub beta: S,
    /// Threshold adjustment window, in steps.
    pub tau: usize,
    pub dt_fast: usize,
    pub dt_mid: usize,
    pub dt_slow: usize,
    /// Require every unit step of a slow window to agree with the net displacement.
    pub slow_direction_check: bool,
    pub gripper_cutoff: S,
    pub bins: usize,
    pub axis_convention: AxisConvention,
    pub anchor: Anchor,
}

impl<S: Scalar> Default for PipelineConfig<S> {
    fn default() -> Self {
        let trans = S::lit(0.01);
        let rot = S::lit(0.02);
        Self {
            t_base: [trans, trans, trans, rot, rot, rot, rot],
            beta: S::lit(0.5),
            tau: 4,
            dt_fast: 2,
            dt_mid: 4,
            dt_slow: 8,
            slow_direction_check: true,
            gripper_cutoff: S::lit(0.5),
            bins: BINS,
            axis_convention: AxisConvention::default(),
            anchor: Anchor::Forward,
        }
    }
}

impl<S: Scalar> PipelineConfig<S> {
    /// Rejects every constraint violation; nothing is clamped.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(dim) = self.t_base.iter().position(|t| !t.is_finite() || *t <= S::zero()) {
            return Err(ConfigError::InvalidBaseThreshold { dim });
        }
        if !self.beta.is_finite() || self.beta < S::zero() {
            return Err(ConfigError::InvalidBeta);
        }
        if self.tau < 1 {
            return Err(ConfigError::InvalidTau);
        }
        for (name, dt) in [
            ("dt_fast", self.dt_fast),
            ("dt_mid", self.dt_mid),
            ("dt_slow", self.dt_slow),
        ] {
            if dt < 1 {
                return Err(ConfigError::NonPositiveWindow { name });
            }
        }
        if !(self.dt_fast < self.dt_mid && self.dt_mid < self.dt_slow) {
            return Err(ConfigError::WindowOrder {
                fast: self.dt_fast,
                mid: self.dt_mid,
                slow: self.dt_slow,
            });
        }
        if !(self.gripper_cutoff > S::zero() && self.gripper_cutoff < S::one()) {
            return Err(ConfigError::InvalidGripperCutoff);
        }
        if self.bins != BINS {
            return Err(ConfigError::UnsupportedBins(self.bins));
        }
        Ok(())
    }

    /// Applies the keys present in a flat TOML document on top of `self`, then validates.
    pub fn with_overrides(mut self, doc: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile<S> = toml::from_str(doc).map_err(|e| ConfigError::Parse(e.to_string()))?;
        file.apply(&mut self);
        self.validate()?;
        Ok(self)
    }

    /// Parses a flat TOML config, filling omitted keys with defaults.
    pub fn from_toml_str(doc: &str) -> Result<Self, ConfigError> {
        Self::default().with_overrides(doc)
    }

    /// Flat TOML rendering with every key, readable by [`Self::from_toml_str`].
    pub fn to_toml_string(&self) -> String {
        let file = ConfigFile::from_config(self);
        toml::to_string(&file).expect("config serializes")
    }

    /// Mean base threshold over the translational dimensions.
    pub fn translational_base(&self) -> S {
        (self.t_base[0] + self.t_base[1] + self.t_base[2]) / S::lit(3.0)
    }
}

/// On-disk shape of the config: flat keys, all optional.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "S: Scalar")]
struct ConfigFile<S> {
    #[serde(skip_serializing_if = "Option::is_none")]
    t_base: Option<[S; ACTION_DIMS]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<S>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt_fast: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt_mid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt_slow: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slow_direction_check: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gripper_cutoff: Option<S>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_x: Option<MoveX>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_y: Option<MoveY>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_z: Option<MoveZ>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_pitch: Option<Tilt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_yaw: Option<Rotate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    anchor: Option<Anchor>,
}

impl<S: Scalar> ConfigFile<S> {
    fn apply(self, cfg: &mut PipelineConfig<S>) {
        macro_rules! set {
            ($($field:ident => $($target:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$($target).+ = v; })*
            };
        }
        set!(
            t_base => t_base,
            beta => beta,
            tau => tau,
            dt_fast => dt_fast,
            dt_mid => dt_mid,
            dt_slow => dt_slow,
            slow_direction_check => slow_direction_check,
            gripper_cutoff => gripper_cutoff,
            bins => bins,
            axis_x => axis_convention.x,
            axis_y => axis_convention.y,
            axis_z => axis_convention.z,
            axis_pitch => axis_convention.pitch,
            axis_yaw => axis_convention.yaw,
            anchor => anchor,
        );
    }

    fn from_config(cfg: &PipelineConfig<S>) -> Self {
        Self {
            t_base: Some(cfg.t_base),
            beta: Some(cfg.beta),
            tau: Some(cfg.tau),
            dt_fast: Some(cfg.dt_fast),
            dt_mid: Some(cfg.dt_mid),
            dt_slow: Some(cfg.dt_slow),
            slow_direction_check: Some(cfg.slow_direction_check),
            gripper_cutoff: Some(cfg.gripper_cutoff),
            bins: Some(cfg.bins),
            axis_x: Some(cfg.axis_convention.x),
            axis_y: Some(cfg.axis_convention.y),
            axis_z: Some(cfg.axis_convention.z),
            axis_pitch: Some(cfg.axis_convention.pitch),
            axis_yaw: Some(cfg.axis_convention.yaw),
            anchor: Some(cfg.anchor),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Cfg = PipelineConfig<f64>;

    #[test]
    fn defaults_are_valid() {
        let cfg = Cfg::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.t_base[0], 0.01);
        assert_eq!(cfg.t_base[5], 0.02);
        assert_eq!((cfg.dt_fast, cfg.dt_mid, cfg.dt_slow), (2, 4, 8));
    }

    type Mutation = Box<dyn Fn(&mut Cfg)>;

    #[test]
    fn each_violation_has_its_own_error() {
        let cases: Vec<(Mutation, ConfigError)> = vec![
            (
                Box::new(|c| c.t_base[2] = 0.0),
                ConfigError::InvalidBaseThreshold { dim: 2 },
            ),
            (
                Box::new(|c| c.t_base[4] = f64::NAN),
                ConfigError::InvalidBaseThreshold { dim: 4 },
            ),
            (Box::new(|c| c.beta = -0.1), ConfigError::InvalidBeta),
            (Box::new(|c| c.tau = 0), ConfigError::InvalidTau),
            (
                Box::new(|c| c.dt_fast = 0),
                ConfigError::NonPositiveWindow { name: "dt_fast" },
            ),
            (
                Box::new(|c| c.dt_mid = 2),
                ConfigError::WindowOrder {
                    fast: 2,
                    mid: 2,
                    slow: 8,
                },
            ),
            (
                Box::new(|c| c.dt_slow = 3),
                ConfigError::WindowOrder {
                    fast: 2,
                    mid: 4,
                    slow: 3,
                },
            ),
            (Box::new(|c| c.gripper_cutoff = 1.0), ConfigError::InvalidGripperCutoff),
            (Box::new(|c| c.bins = 128), ConfigError::UnsupportedBins(128)),
        ];
        for (mutate, expected) in cases {
            let mut cfg = Cfg::default();
            mutate(&mut cfg);
            assert_eq!(cfg.validate(), Err(expected));
        }
    }

    #[test]
    fn toml_overrides_and_round_trip() {
        let cfg = Cfg::from_toml_str("beta = 0.25\ndt_slow = 10\naxis_y = \"right\"\nanchor = \"backward\"\n").unwrap();
        assert_eq!(cfg.beta, 0.25);
        assert_eq!(cfg.dt_slow, 10);
        assert_eq!(cfg.axis_convention.y, MoveY::Right);
        assert_eq!(cfg.anchor, Anchor::Backward);
        let again = Cfg::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn toml_rejects_unknown_keys_and_invalid_values() {
        assert!(matches!(Cfg::from_toml_str("gamma = 1.0"), Err(ConfigError::Parse(_))));
        assert_eq!(Cfg::from_toml_str("tau = 0"), Err(ConfigError::InvalidTau));
        assert!(matches!(
            Cfg::from_toml_str("axis_x = \"up\""),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let cfg = PipelineConfig::<f32>::from_toml_str("beta = 0.75").unwrap();
        assert_eq!(cfg.beta, 0.75f32);
    }
}
