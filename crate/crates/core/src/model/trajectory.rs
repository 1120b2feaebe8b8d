use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::action::ActionVector;
use crate::scalar::Scalar;

/// One step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TrajectoryStep<S> {
    pub action: ActionVector<S>,
    /// Absolute gripper position, when the source records one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[S; 3]>,
    /// Opaque reference to the observation frame for this step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_ref: Option<String>,
}

impl<S: Scalar> TrajectoryStep<S> {
    pub fn from_action(action: ActionVector<S>) -> Self {
        Self {
            action,
            position: None,
            frame_ref: None,
        }
    }
}

/// An episode: instruction plus ordered steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Trajectory<S> {
    pub id: String,
    pub instruction: String,
    pub steps: Vec<TrajectoryStep<S>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("episode {episode}: step {step} has a non-finite value in dimension {dim}")]
    NonFiniteValue { episode: String, step: usize, dim: usize },
    #[error("episode {episode}: no steps")]
    EmptyEpisode { episode: String },
    #[error("episode {episode}: empty instruction")]
    EmptyInstruction { episode: String },
    #[error("episode {episode}: step {step} position presence differs from step 0")]
    MixedPositionPresence { episode: String, step: usize },
}

impl<S: Scalar> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// True when every step carries an absolute position.
    pub fn has_positions(&self) -> bool {
        !self.steps.is_empty() && self.steps.iter().all(|s| s.position.is_some())
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionVector<S>> + '_ {
        self.steps.iter().map(|s| &s.action)
    }
}

/// Checks the episode invariants and hands the trajectory back untouched.
pub fn validate_trajectory<S: Scalar>(traj: Trajectory<S>) -> Result<Trajectory<S>, ValidationError> {
    let episode = || traj.id.clone();
    if traj.steps.is_empty() {
        return Err(ValidationError::EmptyEpisode { episode: episode() });
    }
    if traj.instruction.is_empty() {
        return Err(ValidationError::EmptyInstruction { episode: episode() });
    }
    let with_position = traj.steps[0].position.is_some();
    for (step, s) in traj.steps.iter().enumerate() {
        if let Some(dim) = s.action.first_non_finite() {
            return Err(ValidationError::NonFiniteValue {
                episode: episode(),
                step,
                dim,
            });
        }
        if s.position.is_some() != with_position {
            return Err(ValidationError::MixedPositionPresence {
                episode: episode(),
                step,
            });
        }
        if let Some(p) = &s.position {
            if let Some(k) = p.iter().position(|v| !v.is_finite()) {
                return Err(ValidationError::NonFiniteValue {
                    episode: episode(),
                    step,
                    dim: k,
                });
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(n: usize) -> Trajectory<f64> {
        Trajectory {
            id: "ep".into(),
            instruction: "pick up the cup".into(),
            steps: (0..n)
                .map(|i| TrajectoryStep::from_action(ActionVector::new([i as f64 * 0.01; 7])))
                .collect(),
        }
    }

    #[test]
    fn accepts_valid_episode_unchanged() {
        let traj = episode(10);
        assert_eq!(validate_trajectory(traj.clone()).unwrap(), traj);
    }

    #[test]
    fn rejects_nan() {
        let mut traj = episode(10);
        traj.steps[3].action.dy = f64::NAN;
        assert_eq!(
            validate_trajectory(traj),
            Err(ValidationError::NonFiniteValue {
                episode: "ep".into(),
                step: 3,
                dim: 1
            })
        );
    }

    #[test]
    fn rejects_infinite_position() {
        let mut traj = episode(3);
        for s in &mut traj.steps {
            s.position = Some([0.0; 3]);
        }
        traj.steps[2].position = Some([0.0, f64::INFINITY, 0.0]);
        assert!(matches!(
            validate_trajectory(traj),
            Err(ValidationError::NonFiniteValue { step: 2, .. })
        ));
    }

    #[test]
    fn rejects_partial_positions() {
        let mut traj = episode(10);
        for s in traj.steps.iter_mut().take(5) {
            s.position = Some([0.0; 3]);
        }
        assert_eq!(
            validate_trajectory(traj),
            Err(ValidationError::MixedPositionPresence {
                episode: "ep".into(),
                step: 5
            })
        );
    }

    #[test]
    fn rejects_empty() {
        assert!(matches!(
            validate_trajectory(episode(0)),
            Err(ValidationError::EmptyEpisode { .. })
        ));
        let mut traj = episode(2);
        traj.instruction.clear();
        assert!(matches!(
            validate_trajectory(traj),
            Err(ValidationError::EmptyInstruction { .. })
        ));
    }
}
