use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use motion_lingua::emitter::{emit_episode, EmitterTemplate, SampleRecord, Stage};
use motion_lingua::eval::{default_fixed_thresholds, jitter_sweep, run_benchmark, SyntheticSpec, DEFAULT_JITTER_SWEEP};
use motion_lingua::io::read_trajectories;
use motion_lingua::model::validate_trajectory;
use motion_lingua::oracle::run_equivalence;
use motion_lingua::tokenizer::compute_dataset_stats;
use motion_lingua::{Annotator, DatasetStats, MotionLabel, PipelineConfig, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::manifest::{config_digest, Counts, RunManifest};
use crate::PipelineArgs;

/// Valid episodes in input order plus what was skipped.
struct Loaded {
    episodes: Vec<Trajectory>,
    counts: Counts,
}

fn load(inputs: &[PathBuf], strict: bool) -> Result<Loaded, CliError> {
    let mut episodes = Vec::new();
    let mut counts = Counts::default();
    for path in inputs {
        let sourced =
            read_trajectories::<f64>(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for s in sourced {
            counts.episodes += 1;
            counts.steps += s.trajectory.len();
            let len = s.trajectory.len();
            match validate_trajectory(s.trajectory) {
                Ok(t) => episodes.push(t),
                Err(e) if strict => {
                    return Err(CliError::Input(format!("{}:{}: {e}", path.display(), s.line)));
                }
                Err(e) => {
                    warn!("{}:{}: skipping episode: {e}", path.display(), s.line);
                    counts.skipped_episodes += 1;
                    counts.skipped_steps += len;
                }
            }
        }
    }
    info!(
        "loaded {} episodes ({} skipped)",
        episodes.len(),
        counts.skipped_episodes
    );
    Ok(Loaded { episodes, counts })
}

fn resolve_config(args: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let doc =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            PipelineConfig::from_toml_str(&doc).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(anchor) = args.anchor {
        cfg.anchor = anchor;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn read_stats(path: &Path) -> Result<DatasetStats, CliError> {
    let doc = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    DatasetStats::from_json(&doc).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(mut manifest: RunManifest, started: Instant) -> Result<(), CliError> {
    if !manifest.counts.reconciles() {
        return Err(CliError::Invariant(format!(
            "counts do not reconcile: {:?}",
            manifest.counts
        )));
    }
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Invariant(e.to_string()))?;
    println!("{json}");
    Ok(())
}

pub fn stats(inputs: &[PathBuf], out: &Path, strict: bool) -> Result<(), CliError> {
    let started = Instant::now();
    let mut loaded = load(inputs, strict)?;
    let stats = compute_dataset_stats(loaded.episodes.iter()).map_err(|e| CliError::Input(e.to_string()))?;
    std::fs::write(out, stats.to_json()).map_err(|e| CliError::io(out, e))?;
    loaded.counts.records = loaded.counts.steps - loaded.counts.skipped_steps;
    finish(
        RunManifest {
            command: "stats",
            inputs: inputs.to_vec(),
            config_digest: config_digest(&PipelineConfig::default()),
            stats_path: Some(out.to_path_buf()),
            output_path: Some(out.to_path_buf()),
            counts: loaded.counts,
            wall_time_secs: 0.0,
        },
        started,
    )
}

#[derive(Serialize)]
struct LabelRecord<'a> {
    episode_id: &'a str,
    step: usize,
    motion: MotionLabel,
}

pub fn annotate(
    inputs: &[PathBuf],
    stats_path: &Path,
    args: &PipelineArgs,
    out: &Path,
    strict: bool,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = resolve_config(args)?;
    let stats = read_stats(stats_path)?;
    let mut loaded = load(inputs, strict)?;
    let annotator = Annotator::new(stats, cfg.clone())?;
    let labels: Vec<Vec<MotionLabel>> = loaded
        .episodes
        .par_iter()
        .map(|t| annotator.annotate_valid(t).0)
        .collect();

    let mut w = create(out)?;
    for (traj, labels) in loaded.episodes.iter().zip(&labels) {
        for (step, motion) in labels.iter().enumerate() {
            let rec = LabelRecord {
                episode_id: &traj.id,
                step,
                motion: *motion,
            };
            serde_json::to_writer(&mut w, &rec).map_err(|e| CliError::Input(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| CliError::io(out, e))?;
            loaded.counts.records += 1;
        }
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    finish(
        RunManifest {
            command: "annotate",
            inputs: inputs.to_vec(),
            config_digest: config_digest(&cfg),
            stats_path: Some(stats_path.to_path_buf()),
            output_path: Some(out.to_path_buf()),
            counts: loaded.counts,
            wall_time_secs: 0.0,
        },
        started,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn emit(
    inputs: &[PathBuf],
    stats_path: &Path,
    args: &PipelineArgs,
    template: Option<&Path>,
    stage: Stage,
    out: &Path,
    strict: bool,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = resolve_config(args)?;
    let tpl = match template {
        Some(path) => {
            let doc =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            EmitterTemplate::from_toml_str(&doc).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => EmitterTemplate::default(),
    };
    let stats = read_stats(stats_path)?;
    let mut loaded = load(inputs, strict)?;
    let annotator = Annotator::new(stats, cfg.clone())?;
    let per_episode: Vec<Result<Vec<SampleRecord>, motion_lingua::Error>> = loaded
        .episodes
        .par_iter()
        .map(|t| emit_episode(t, &annotator, &tpl, stage))
        .collect();

    let mut w = create(out)?;
    for (traj, result) in loaded.episodes.iter().zip(per_episode) {
        match result {
            Ok(records) => {
                for r in &records {
                    w.write_all(r.to_json_line().as_bytes())
                        .map_err(|e| CliError::io(out, e))?;
                }
                loaded.counts.records += records.len();
            }
            Err(e) if strict => return Err(e.into()),
            Err(e) => {
                warn!("episode {}: skipping: {e}", traj.id);
                loaded.counts.skipped_episodes += 1;
                loaded.counts.skipped_steps += traj.len();
            }
        }
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    finish(
        RunManifest {
            command: "emit",
            inputs: inputs.to_vec(),
            config_digest: config_digest(&cfg),
            stats_path: Some(stats_path.to_path_buf()),
            output_path: Some(out.to_path_buf()),
            counts: loaded.counts,
            wall_time_secs: 0.0,
        },
        started,
    )
}

pub fn benchmark(
    spec_path: Option<&Path>,
    args: &PipelineArgs,
    seed: Option<u64>,
    jitter: Option<f64>,
    fixed_window: usize,
    sweep_csv: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = resolve_config(args)?;
    let mut spec = match spec_path {
        Some(path) => {
            let doc =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            SyntheticSpec::from_toml_str(&doc).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(m) = jitter {
        spec.jitter_amplitude = m * cfg.translational_base();
    }
    if fixed_window == 0 {
        return Err(CliError::Config("--fixed-window must be at least 1".into()));
    }
    let grid = default_fixed_thresholds(&cfg);
    let report = run_benchmark(&spec, &cfg, &grid, fixed_window)?;
    info!(
        "adaptive {:.4} vs fixed {:.4} (fixed_T = {})",
        report.adaptive.mean, report.fixed.mean, report.fixed_threshold
    );
    let mut w = create(out)?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(|e| CliError::Invariant(e.to_string()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(out, e))?;

    if let Some(path) = sweep_csv {
        let rows = jitter_sweep(&spec, &cfg, &DEFAULT_JITTER_SWEEP, &grid, fixed_window)?;
        let mut csv = csv::Writer::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for row in rows {
            csv.serialize(row)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        }
        csv.flush().map_err(|e| CliError::io(path, e))?;
    }

    let steps = report.adaptive.steps as usize;
    finish(
        RunManifest {
            command: "benchmark",
            inputs: spec_path.map(Path::to_path_buf).into_iter().collect(),
            config_digest: config_digest(&cfg),
            stats_path: None,
            output_path: Some(out.to_path_buf()),
            counts: Counts {
                episodes: spec.n_episodes,
                steps,
                records: steps,
                ..Counts::default()
            },
            wall_time_secs: 0.0,
        },
        started,
    )
}

#[derive(Serialize)]
struct OracleSummary<'a> {
    episodes: usize,
    steps: usize,
    motion_steps: usize,
    mismatches: usize,
    first_mismatches: &'a [motion_lingua::oracle::Mismatch],
}

pub fn oracle_check(args: &PipelineArgs, episodes: usize, max_len: usize, seed: u64) -> Result<(), CliError> {
    let cfg = resolve_config(args)?;
    if max_len == 0 {
        return Err(CliError::Config("--max-len must be at least 1".into()));
    }
    let report = run_equivalence(episodes, max_len, seed, &cfg);
    let summary = OracleSummary {
        episodes: report.episodes,
        steps: report.steps,
        motion_steps: report.motion_steps,
        mismatches: report.mismatches.len(),
        first_mismatches: &report.mismatches[..report.mismatches.len().min(5)],
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Invariant(e.to_string()))?
    );
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!(
            "{} detector verdicts differ from the reference",
            report.mismatches.len()
        )))
    }
}
