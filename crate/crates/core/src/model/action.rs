use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Number of action dimensions: three translations, three rotations, gripper.
pub const ACTION_DIMS: usize = 7;
/// Index of the gripper command inside an action.
pub const GRIPPER: usize = 6;

/// One delta-action step `(dx, dy, dz, droll, dpitch, dyaw, gripper)`.
///
/// Serialized as a flat array of seven numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[S; ACTION_DIMS]", into = "[S; ACTION_DIMS]")]
#[serde(bound = "S: Scalar")]
pub struct ActionVector<S> {
    pub dx: S,
    pub dy: S,
    pub dz: S,
    pub droll: S,
    pub dpitch: S,
    pub dyaw: S,
    pub gripper: S,
}

impl<S: Scalar> ActionVector<S> {
    pub fn new(values: [S; ACTION_DIMS]) -> Self {
        Self::from(values)
    }

    pub fn zero() -> Self {
        Self::from([S::zero(); ACTION_DIMS])
    }

    pub fn to_array(self) -> [S; ACTION_DIMS] {
        self.into()
    }

    pub fn get(&self, dim: usize) -> S {
        self.to_array()[dim]
    }

    /// Index of the first non-finite component, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.to_array().iter().position(|v| !v.is_finite())
    }
}

impl<S: Scalar> From<[S; ACTION_DIMS]> for ActionVector<S> {
    fn from(v: [S; ACTION_DIMS]) -> Self {
        Self {
            dx: v[0],
            dy: v[1],
            dz: v[2],
            droll: v[3],
            dpitch: v[4],
            dyaw: v[5],
            gripper: v[6],
        }
    }
}

impl<S: Scalar> From<ActionVector<S>> for [S; ACTION_DIMS] {
    fn from(a: ActionVector<S>) -> Self {
        [a.dx, a.dy, a.dz, a.droll, a.dpitch, a.dyaw, a.gripper]
    }
}
