//! Trajectory files: JSONL (one episode per line) and a CSV variant (one step per row).

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ActionVector, Trajectory, TrajectoryStep};
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported trajectory format {0:?} (expected .jsonl or .csv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    Jsonl,
    Csv,
}

impl TrajectoryFormat {
    /// `.csv` means CSV; anything else is read as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => TrajectoryFormat::Csv,
            _ => TrajectoryFormat::Jsonl,
        }
    }
}

/// An episode together with the 1-based line it started on.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcedTrajectory<S> {
    pub line: usize,
    pub trajectory: Trajectory<S>,
}

/// Reads one episode per non-blank line.
pub fn read_jsonl<S: Scalar, R: BufRead>(reader: R) -> Result<Vec<SourcedTrajectory<S>>, IoError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IoError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let trajectory = serde_json::from_str(&line).map_err(|e| IoError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(SourcedTrajectory {
            line: line_no,
            trajectory,
        });
    }
    Ok(out)
}

pub fn write_jsonl<'a, S: Scalar, W: Write>(
    mut writer: W,
    trajs: impl IntoIterator<Item = &'a Trajectory<S>>,
) -> std::io::Result<()> {
    for t in trajs {
        serde_json::to_writer(&mut writer, t)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// CSV row layout. Position columns and `frame_ref` are optional.
#[derive(Debug, Deserialize, Serialize)]
#[serde(bound = "S: Scalar")]
struct CsvRow<S> {
    episode_id: String,
    instruction: String,
    dx: S,
    dy: S,
    dz: S,
    droll: S,
    dpitch: S,
    dyaw: S,
    gripper: S,
    #[serde(default)]
    px: Option<S>,
    #[serde(default)]
    py: Option<S>,
    #[serde(default)]
    pz: Option<S>,
    #[serde(default)]
    frame_ref: Option<String>,
}

/// Reads CSV with a header row. Consecutive rows sharing `episode_id` form one episode.
pub fn read_csv<S: Scalar, R: std::io::Read>(reader: R) -> Result<Vec<SourcedTrajectory<S>>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: Vec<SourcedTrajectory<S>> = Vec::new();
    for (i, row) in rdr.deserialize::<CsvRow<S>>().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = row.map_err(|e| IoError::Parse {
            line,
            message: e.to_string(),
        })?;
        let position = match (row.px, row.py, row.pz) {
            (Some(x), Some(y), Some(z)) => Some([x, y, z]),
            (None, None, None) => None,
            _ => {
                return Err(IoError::Parse {
                    line,
                    message: "position needs all of px, py, pz".into(),
                })
            }
        };
        let step = TrajectoryStep {
            action: ActionVector::new([row.dx, row.dy, row.dz, row.droll, row.dpitch, row.dyaw, row.gripper]),
            position,
            frame_ref: row.frame_ref.filter(|f| !f.is_empty()),
        };
        match out.last_mut() {
            Some(last) if last.trajectory.id == row.episode_id => last.trajectory.steps.push(step),
            _ => out.push(SourcedTrajectory {
                line,
                trajectory: Trajectory {
                    id: row.episode_id,
                    instruction: row.instruction,
                    steps: vec![step],
                },
            }),
        }
    }
    Ok(out)
}

pub fn read_trajectories<S: Scalar>(path: &Path) -> Result<Vec<SourcedTrajectory<S>>, IoError> {
    let file = std::fs::File::open(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match TrajectoryFormat::from_path(path) {
        TrajectoryFormat::Jsonl => read_jsonl(std::io::BufReader::new(file)),
        TrajectoryFormat::Csv => read_csv(file),
    }
}
