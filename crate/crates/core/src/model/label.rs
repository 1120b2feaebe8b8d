use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed motion string {input:?}: {reason}")]
pub struct MalformedMotionString {
    pub input: String,
    pub reason: String,
}

impl MalformedMotionString {
    fn new(input: &str, reason: impl Into<String>) -> Self {
        Self {
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}

macro_rules! direction_word {
    ($(#[$meta:meta])* $name:ident { $pos:ident => $pos_word:literal, $neg:ident => $neg_word:literal }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $pos,
            $neg,
        }

        impl $name {
            pub const ALL: [$name; 2] = [$name::$pos, $name::$neg];

            pub fn as_str(self) -> &'static str {
                match self {
                    $name::$pos => $pos_word,
                    $name::$neg => $neg_word,
                }
            }

            pub fn opposite(self) -> Self {
                match self {
                    $name::$pos => $name::$neg,
                    $name::$neg => $name::$pos,
                }
            }

            /// Word for a signed displacement, given the word that names the positive direction.
            pub fn from_sign(positive: Self, negative_value: bool) -> Self {
                if negative_value {
                    positive.opposite()
                } else {
                    positive
                }
            }

            fn parse_word(word: &str) -> Option<Self> {
                match word {
                    $pos_word => Some($name::$pos),
                    $neg_word => Some($name::$neg),
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = MalformedMotionString;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::parse_word(s).ok_or_else(|| {
                    MalformedMotionString::new(s, concat!("expected ", $pos_word, " or ", $neg_word))
                })
            }
        }
    };
}

direction_word!(
    /// Translation along x.
    MoveX { Forward => "forward", Backward => "backward" }
);
direction_word!(
    /// Translation along y.
    MoveY { Left => "left", Right => "right" }
);
direction_word!(
    /// Translation along z.
    MoveZ { Up => "up", Down => "down" }
);
direction_word!(
    /// Pitch rotation.
    Tilt { Up => "up", Down => "down" }
);
direction_word!(
    /// Yaw rotation.
    Rotate { Clockwise => "clockwise", Counterclockwise => "counterclockwise" }
);
direction_word!(
    /// Gripper transition.
    GripperAction { Open => "open", Close => "close" }
);

/// A closed-vocabulary motion phrase. All components `None` means "stop".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MotionLabel {
    pub move_x: Option<MoveX>,
    pub move_y: Option<MoveY>,
    pub move_z: Option<MoveZ>,
    pub tilt: Option<Tilt>,
    pub rotate: Option<Rotate>,
    pub gripper: Option<GripperAction>,
}

impl MotionLabel {
    pub const STOP: MotionLabel = MotionLabel {
        move_x: None,
        move_y: None,
        move_z: None,
        tilt: None,
        rotate: None,
        gripper: None,
    };

    pub fn is_stop(&self) -> bool {
        *self == Self::STOP
    }

    pub fn has_translation(&self) -> bool {
        self.move_x.is_some() || self.move_y.is_some() || self.move_z.is_some()
    }

    /// Renders the canonical phrase.
    pub fn canonical_string(&self) -> String {
        self.to_string()
    }

    /// Every label of the grammar: 3^6 combinations, stop included.
    pub fn enumerate_all() -> Vec<MotionLabel> {
        fn opts<T: Copy>(all: [T; 2]) -> [Option<T>; 3] {
            [None, Some(all[0]), Some(all[1])]
        }
        let mut out = Vec::with_capacity(729);
        for move_x in opts(MoveX::ALL) {
            for move_y in opts(MoveY::ALL) {
                for move_z in opts(MoveZ::ALL) {
                    for tilt in opts(Tilt::ALL) {
                        for rotate in opts(Rotate::ALL) {
                            for gripper in opts(GripperAction::ALL) {
                                out.push(MotionLabel {
                                    move_x,
                                    move_y,
                                    move_z,
                                    tilt,
                                    rotate,
                                    gripper,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for MotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_stop() {
            return f.write_str("stop");
        }
        let mut words: Vec<&str> = Vec::with_capacity(10);
        if self.has_translation() {
            words.push("move");
            words.extend(self.move_x.map(MoveX::as_str));
            words.extend(self.move_y.map(MoveY::as_str));
            words.extend(self.move_z.map(MoveZ::as_str));
        }
        if let Some(t) = self.tilt {
            words.extend(["tilt", t.as_str()]);
        }
        if let Some(r) = self.rotate {
            words.extend(["rotate", r.as_str()]);
        }
        if let Some(g) = self.gripper {
            words.extend([g.as_str(), "gripper"]);
        }
        f.write_str(&words.join(" "))
    }
}

/// Parses a canonical motion phrase. Only the exact canonical rendering is accepted.
pub fn parse_label(s: &str) -> Result<MotionLabel, MalformedMotionString> {
    if s == "stop" {
        return Ok(MotionLabel::STOP);
    }
    let words: Vec<&str> = s.split(' ').collect();
    let mut label = MotionLabel::STOP;
    let mut i = 0;
    let peek = |i: usize| words.get(i).copied();

    if peek(i) == Some("move") {
        i += 1;
        if let Some(w) = peek(i).and_then(MoveX::parse_word) {
            label.move_x = Some(w);
            i += 1;
        }
        if let Some(w) = peek(i).and_then(MoveY::parse_word) {
            label.move_y = Some(w);
            i += 1;
        }
        if let Some(w) = peek(i).and_then(MoveZ::parse_word) {
            label.move_z = Some(w);
            i += 1;
        }
        if !label.has_translation() {
            return Err(MalformedMotionString::new(s, "\"move\" without a direction"));
        }
    }
    if peek(i) == Some("tilt") {
        let w = peek(i + 1)
            .and_then(Tilt::parse_word)
            .ok_or_else(|| MalformedMotionString::new(s, "\"tilt\" must be followed by up or down"))?;
        label.tilt = Some(w);
        i += 2;
    }
    if peek(i) == Some("rotate") {
        let w = peek(i + 1).and_then(Rotate::parse_word).ok_or_else(|| {
            MalformedMotionString::new(s, "\"rotate\" must be followed by clockwise or counterclockwise")
        })?;
        label.rotate = Some(w);
        i += 2;
    }
    if let Some(g) = peek(i).and_then(GripperAction::parse_word) {
        if peek(i + 1) != Some("gripper") {
            return Err(MalformedMotionString::new(s, "expected \"gripper\""));
        }
        label.gripper = Some(g);
        i += 2;
    }
    if i != words.len() {
        return Err(MalformedMotionString::new(s, format!("unexpected word {:?}", words[i])));
    }
    if label.is_stop() {
        return Err(MalformedMotionString::new(s, "empty motion phrase"));
    }
    Ok(label)
}

impl FromStr for MotionLabel {
    type Err = MalformedMotionString;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(s)
    }
}

impl Serialize for MotionLabel {
    fn serialize<Se: Serializer>(&self, serializer: Se) -> Result<Se::Ok, Se::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MotionLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_label(&s).map_err(serde::de::Error::custom)
    }
}
