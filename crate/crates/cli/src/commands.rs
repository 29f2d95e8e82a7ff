use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use neuroevo::sim::{run_episode_observed, run_evolution_with, EvolutionRun, GenerationStats};
use neuroevo::{load_track, Layout, Track};
use serde_json::{json, Value};

use crate::config::{resolve, Experiment, Override};
use crate::error::{read_file, CliError};
use crate::replay::{config_hash, hex, RecordedEpisode, Replay};

pub const STATS_FILE: &str = "stats.csv";
pub const REPLAY_FILE: &str = "best.replay";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.json";
pub const SWEEP_FILE: &str = "sweep.csv";

pub const STATS_HEADER: [&str; 8] = [
    "generation",
    "best_score",
    "mean_score",
    "median_score",
    "completions",
    "crashes",
    "stalls",
    "timeouts",
];

pub const SWEEP_HEADER: [&str; 7] = [
    "layout",
    "crossover_rate",
    "mutation_rate",
    "seed",
    "generations_to_success",
    "total_individuals",
    "status",
];

/// Process exit status of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success,
    GenerationLimit,
}

impl Exit {
    pub fn code(self) -> i32 {
        match self {
            Exit::Success => 0,
            Exit::GenerationLimit => 2,
        }
    }
}

pub struct TrackInput {
    pub bytes: Vec<u8>,
    pub track: Track,
}

pub fn load_track_file(path: &Path) -> Result<TrackInput, CliError> {
    let bytes = read_file(path)?;
    let track = load_track(&bytes).map_err(|e| CliError::Parse {
        what: "track",
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(TrackInput { bytes, track })
}

/// Everything a finished run writes to its output directory.
pub struct RunArtifacts {
    pub run: EvolutionRun,
    pub stats_csv: Vec<u8>,
    pub replay: Replay,
}

/// Runs one experiment without touching the filesystem beyond the track.
pub fn execute(
    experiment: &Experiment,
    input: &TrackInput,
    threads: Option<usize>,
    mut progress: impl FnMut(&GenerationStats),
) -> Result<RunArtifacts, CliError> {
    let cfg = experiment.spec.evolution_config(threads)?;
    let run = run_evolution_with(&cfg, &input.track, &mut progress)
        .map_err(|e| CliError::Invalid(e.to_string()))?;

    let spec_json = experiment.spec.to_json();
    let episode = match (run.stats.last(), run.best_genomes.last()) {
        (Some(last), Some(best)) => {
            let mut controls = Vec::new();
            let result =
                run_episode_observed(best, cfg.arena(&input.track), |f| controls.push(f.controls))
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
            debug_assert_eq!(result, run.final_results[last.best_genome_id]);
            Some(RecordedEpisode {
                generation: last.generation,
                score: result.score,
                outcome: result.outcome,
                final_s: result.final_s,
                controls,
            })
        }
        _ => None,
    };
    let replay = Replay {
        seed: experiment.spec.seed,
        config_hash: config_hash(&spec_json, &input.bytes),
        spec_json,
        generation_bests: run.best_genomes.clone(),
        episode,
    };
    Ok(RunArtifacts {
        stats_csv: stats_csv(&run.stats),
        run,
        replay,
    })
}

/// `f64` in the shortest form that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x}")
}

pub fn stats_csv(stats: &[GenerationStats]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STATS_HEADER).expect("in-memory write");
    for s in stats {
        w.write_record([
            s.generation.to_string(),
            num(s.best_score),
            num(s.mean_score),
            num(s.median_score),
            s.completions.to_string(),
            s.crashes.to_string(),
            s.stalls.to_string(),
            s.timeouts.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_artifacts(experiment: &Experiment, artifacts: &RunArtifacts) -> Result<(), CliError> {
    let dir = &experiment.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join(STATS_FILE), &artifacts.stats_csv)?;
    write_file(&dir.join(REPLAY_FILE), &artifacts.replay.to_bytes())?;
    let mut echo =
        serde_json::to_vec_pretty(&experiment.effective_config()).expect("config serializes");
    echo.push(b'\n');
    write_file(&dir.join(EFFECTIVE_CONFIG_FILE), &echo)
}

pub fn print_generation(s: &GenerationStats) {
    eprintln!(
        "generation {:>4}  best {:>10.3}  median {:>10.3}  completed {:>3}  crashed {:>3}  stalled {:>3}  timed out {:>3}",
        s.generation, s.best_score, s.median_score, s.completions, s.crashes, s.stalls, s.timeouts
    );
}

pub fn run(
    raw: Value,
    overrides: &[Override],
    threads: Option<usize>,
    quiet: bool,
) -> Result<Exit, CliError> {
    let experiment = resolve(raw, overrides)?;
    let input = load_track_file(&experiment.track_path)?;
    let artifacts = execute(&experiment, &input, threads, |s| {
        if !quiet {
            print_generation(s)
        }
    })?;
    write_artifacts(&experiment, &artifacts)?;
    let run = &artifacts.run;
    match run.generations_to_success {
        Some(g) => {
            println!(
                "success after {g} generations; outputs in {}",
                experiment.out_dir.display()
            );
            Ok(Exit::Success)
        }
        None => {
            println!(
                "no success within {} generations; outputs in {}",
                run.generations(),
                experiment.out_dir.display()
            );
            Ok(Exit::GenerationLimit)
        }
    }
}

/// Grid axes of a sweep. Defaults cover both layouts with 80/90% crossover
/// and 20/10% mutation.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub layouts: Vec<Layout>,
    pub crossover_rates: Vec<f64>,
    pub mutation_rates: Vec<f64>,
    /// `None` uses the base config's seed.
    pub seeds: Option<Vec<u64>>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            layouts: vec![Layout::FR, Layout::FF],
            crossover_rates: vec![0.8, 0.9],
            mutation_rates: vec![0.2, 0.1],
            seeds: None,
        }
    }
}

pub struct SweepRow {
    pub layout: Layout,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub seed: u64,
    pub generations_to_success: Option<u64>,
    pub total_individuals: u64,
    pub status: String,
}

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.layout.to_string(),
            num(r.crossover_rate),
            num(r.mutation_rate),
            r.seed.to_string(),
            r.generations_to_success
                .map_or("-1".to_string(), |g| g.to_string()),
            r.total_individuals.to_string(),
            r.status.clone(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn cell_dir(root: &Path, layout: Layout, cr: f64, mr: f64, seed: u64) -> PathBuf {
    root.join(format!("{layout}_x{}_m{}_seed{seed}", num(cr), num(mr)))
}

fn run_cell(
    raw: &Value,
    overrides: &[Override],
    threads: Option<usize>,
    quiet: bool,
) -> Result<(Experiment, EvolutionRun), CliError> {
    let experiment = resolve(raw.clone(), overrides)?;
    let input = load_track_file(&experiment.track_path)?;
    let artifacts = execute(&experiment, &input, threads, |s| {
        if !quiet {
            print_generation(s)
        }
    })?;
    write_artifacts(&experiment, &artifacts)?;
    Ok((experiment, artifacts.run))
}

/// Runs every grid cell in order. Cell failures become rows; only a broken
/// base config or an unwritable output directory fails the sweep.
pub fn sweep(
    raw: Value,
    overrides: &[Override],
    grid: &SweepGrid,
    threads: Option<usize>,
    quiet: bool,
) -> Result<Vec<u8>, CliError> {
    let base = resolve(raw.clone(), overrides)?;
    let seeds = grid.seeds.clone().unwrap_or_else(|| vec![base.spec.seed]);
    let root = base.out_dir.clone();
    fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;

    let mut rows = Vec::new();
    for &layout in &grid.layouts {
        for &cr in &grid.crossover_rates {
            for &mr in &grid.mutation_rates {
                for &seed in &seeds {
                    let dir = cell_dir(&root, layout, cr, mr, seed);
                    let mut cell = overrides.to_vec();
                    cell.extend([
                        Override::set(&["physics", "layout"], json!(layout.to_string())),
                        Override::set(&["ga", "crossover_rate"], json!(cr)),
                        Override::set(&["ga", "mutation_rate"], json!(mr)),
                        Override::set(&["seed"], json!(seed)),
                        Override::set(&["out_dir"], json!(dir)),
                    ]);
                    if !quiet {
                        eprintln!("cell {}", dir.display());
                    }
                    let (generations_to_success, total_individuals, status) =
                        match run_cell(&raw, &cell, threads, quiet) {
                            Ok((e, run)) => {
                                let p = e.spec.ga.population as u64;
                                let g = run.generations_to_success;
                                let status = if g.is_some() {
                                    "success"
                                } else {
                                    "generation_limit"
                                };
                                (g, g.unwrap_or(run.generations()) * p, status.to_string())
                            }
                            Err(e) => (None, 0, format!("error: {e}")),
                        };
                    rows.push(SweepRow {
                        layout,
                        crossover_rate: cr,
                        mutation_rate: mr,
                        seed,
                        generations_to_success,
                        total_individuals,
                        status,
                    });
                }
            }
        }
    }
    let csv = sweep_csv(&rows);
    write_file(&root.join(SWEEP_FILE), &csv)?;
    println!(
        "{} cells; results in {}",
        rows.len(),
        root.join(SWEEP_FILE).display()
    );
    Ok(csv)
}

pub fn replay(replay_path: &Path, track_path: &Path) -> Result<(), CliError> {
    let bytes = read_file(replay_path)?;
    let replay = Replay::from_bytes(&bytes).map_err(|e| match e {
        CliError::Replay(m) => CliError::Parse {
            what: "replay",
            path: replay_path.to_path_buf(),
            message: m,
        },
        e => e,
    })?;
    let input = load_track_file(track_path)?;
    let expected = config_hash(&replay.spec_json, &input.bytes);
    if expected != replay.config_hash {
        return Err(CliError::Replay(format!(
            "config hash mismatch: the replay was recorded against different inputs than track '{}' \
             (recorded {}, computed {})",
            track_path.display(),
            hex(&replay.config_hash),
            hex(&expected)
        )));
    }
    let spec = replay.spec()?;
    let cfg = spec.evolution_config(Some(1))?;
    let Some(recorded) = &replay.episode else {
        return Err(CliError::Replay(
            "the replay holds no episode (zero generations were run)".into(),
        ));
    };
    let genome = replay
        .generation_bests
        .get(recorded.generation as usize)
        .ok_or_else(|| {
            CliError::Replay(format!(
                "no genome stored for generation {}",
                recorded.generation
            ))
        })?;

    let mut controls = Vec::new();
    let result = run_episode_observed(genome, cfg.arena(&input.track), |f| {
        controls.push(f.controls)
    })
    .map_err(|e| CliError::Replay(e.to_string()))?;
    println!(
        "score {} outcome {} frames {}",
        result.score, result.outcome, result.frames
    );

    if let Some(i) = controls
        .iter()
        .zip(&recorded.controls)
        .position(|(a, b)| !same_controls(a, b))
    {
        return Err(CliError::Replay(format!(
            "controls diverge at frame {}",
            i + 1
        )));
    }
    let mut diffs = Vec::new();
    if controls.len() != recorded.controls.len() {
        diffs.push(format!(
            "frames {} vs recorded {}",
            controls.len(),
            recorded.controls.len()
        ));
    }
    if result.score.to_bits() != recorded.score.to_bits() {
        diffs.push(format!(
            "score {} vs recorded {}",
            result.score, recorded.score
        ));
    }
    if result.outcome != recorded.outcome {
        diffs.push(format!(
            "outcome {} vs recorded {}",
            result.outcome, recorded.outcome
        ));
    }
    if result.final_s.to_bits() != recorded.final_s.to_bits() {
        diffs.push(format!(
            "final_s {} vs recorded {}",
            result.final_s, recorded.final_s
        ));
    }
    if !diffs.is_empty() {
        return Err(CliError::Replay(format!(
            "re-simulation diverged: {}",
            diffs.join(", ")
        )));
    }
    println!("replay matches the recording bit-exactly");
    std::io::stdout().flush().ok();
    Ok(())
}

fn same_controls(a: &neuroevo::Controls, b: &neuroevo::Controls) -> bool {
    a.throttle().to_bits() == b.throttle().to_bits()
        && a.brake().to_bits() == b.brake().to_bits()
        && a.steer().to_bits() == b.steer().to_bits()
}
