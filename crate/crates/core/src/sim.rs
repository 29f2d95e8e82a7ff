//! Episodes and the generation loop.
//!
//! An episode spawns one car at the track start and runs
//! sense -> forward -> step until the car crashes, finishes, stalls or runs
//! out of time. Its score is the gated, course-projected distance travelled.
//! Cars never interact, so a generation is a set of independent episodes.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brain::{forward_inputs, random_genome, BrainError, Genome, Topology};
use crate::evolution::{next_generation, EvolutionError, GaConfig};
use crate::rng::{tag, SeedStream};
use crate::sensors::{sense, SensorConfig, SensorConfigError};
use crate::track::{CoursePose, Track};
use crate::vehicle::{slip_angle, step, Controls, ParamsError, VehicleParams, VehicleState};

/// Consecutive generations with at least one finisher that count as success.
pub const SUCCESS_STREAK: usize = 3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid episode config: {0}")]
    Episode(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Sensors(#[from] SensorConfigError),
    #[error(transparent)]
    Brain(#[from] BrainError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error("genome expects {expected} inputs but sensors provide {actual}")]
    InputMismatch { expected: usize, actual: usize },
    #[error("could not build evaluator thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    /// Frame time, seconds.
    pub dt: f64,
    pub max_time: f64,
    /// Trailing window over which progress is measured for the stall rule.
    pub stall_window: f64,
    /// Minimum score gain over the window, meters.
    pub stall_min_progress: f64,
    /// Slip angle at or above which a frame earns nothing, radians.
    pub angle_threshold: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 60.0,
            max_time: 60.0,
            stall_window: 5.0,
            stall_min_progress: 2.0,
            angle_threshold: 10.0 * PI / 180.0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Episode(m));
        if !(self.dt > 0.0 && self.dt <= 0.05) {
            return err(format!("dt must be in (0, 0.05], got {}", self.dt));
        }
        if !(self.stall_window > 0.0
            && self.max_time > self.stall_window
            && self.max_time.is_finite())
        {
            return err(format!(
                "need max_time > stall_window > 0, got {} and {}",
                self.max_time, self.stall_window
            ));
        }
        if !(self.stall_min_progress >= 0.0 && self.stall_min_progress.is_finite()) {
            return err(format!(
                "stall_min_progress must be non-negative, got {}",
                self.stall_min_progress
            ));
        }
        if !(self.angle_threshold > 0.0 && self.angle_threshold < PI) {
            return err(format!(
                "angle_threshold must be in (0, pi), got {}",
                self.angle_threshold
            ));
        }
        Ok(())
    }

    pub fn max_frames(&self) -> u64 {
        (self.max_time / self.dt - 1e-9).ceil() as u64
    }

    pub fn stall_frames(&self) -> u64 {
        (self.stall_window / self.dt).round().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Completed,
    Crashed,
    Stalled,
    TimedOut,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Completed => 0,
            Outcome::Crashed => 1,
            Outcome::Stalled => 2,
            Outcome::TimedOut => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Outcome::Completed,
            1 => Outcome::Crashed,
            2 => Outcome::Stalled,
            3 => Outcome::TimedOut,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Completed => "completed",
            Outcome::Crashed => "crashed",
            Outcome::Stalled => "stalled",
            Outcome::TimedOut => "timed_out",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub score: f64,
    pub outcome: Outcome,
    pub frames: u64,
    pub final_s: f64,
}

/// Everything observable about one simulated frame.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub index: u64,
    pub controls: Controls,
    pub state: VehicleState,
    pub course: CoursePose,
    pub score_delta: f64,
    pub collided: bool,
}

/// Course-projected distance earned this frame; zero when the car slides at
/// or beyond `angle_threshold` or moves against the course.
pub fn frame_score(
    state: &VehicleState,
    course: &CoursePose,
    dt: f64,
    angle_threshold: f64,
) -> f64 {
    debug_assert!(dt > 0.0);
    let along = state.world_velocity().dot(course.tangent);
    if slip_angle(state) < angle_threshold && along > 0.0 {
        along * dt
    } else {
        0.0
    }
}

/// Static inputs shared by every episode of a run.
#[derive(Debug, Clone, Copy)]
pub struct Arena<'a> {
    pub track: &'a Track,
    pub params: &'a VehicleParams,
    pub sensors: &'a SensorConfig,
    pub episode: &'a EpisodeConfig,
}

pub fn run_episode(
    genome: &Genome,
    track: &Track,
    params: &VehicleParams,
    sensors: &SensorConfig,
    ep: &EpisodeConfig,
) -> Result<EpisodeResult, SimError> {
    run_episode_observed(
        genome,
        Arena {
            track,
            params,
            sensors,
            episode: ep,
        },
        |_| {},
    )
}

/// [`run_episode`] with a per-frame observer.
pub fn run_episode_observed(
    genome: &Genome,
    arena: Arena<'_>,
    mut observe: impl FnMut(&Frame),
) -> Result<EpisodeResult, SimError> {
    let Arena {
        track,
        params,
        sensors,
        episode: ep,
    } = arena;
    if genome.topology().input_size != sensors.input_size() {
        return Err(SimError::InputMismatch {
            expected: genome.topology().input_size,
            actual: sensors.input_size(),
        });
    }
    let start = track.start();
    let mut state = VehicleState::at_rest(start.pos, start.yaw);
    let max_frames = ep.max_frames();
    let window = ep.stall_frames() as usize;
    // Cumulative score after each frame; index 0 is the spawn.
    let mut cumulative = Vec::with_capacity(max_frames as usize + 1);
    cumulative.push(0.0);
    let mut score = 0.0;
    let mut inputs = Vec::with_capacity(sensors.input_size());

    for frame in 1..=max_frames {
        sense(&state, track, params, sensors).write_inputs(&mut inputs);
        let controls = forward_inputs(genome, &inputs).to_controls();
        state = step(&state, controls, params, ep.dt);
        let course = track.course_pose(state.position);
        let delta = frame_score(&state, &course, ep.dt, ep.angle_threshold);
        score += delta;
        cumulative.push(score);
        let collided = track.collides(state.position, state.yaw, params.footprint);
        observe(&Frame {
            index: frame,
            controls,
            state,
            course,
            score_delta: delta,
            collided,
        });

        let f = frame as usize;
        let outcome = if collided {
            Some(Outcome::Crashed)
        } else if course.s >= track.finish_s() {
            Some(Outcome::Completed)
        } else if f >= window && score - cumulative[f - window] < ep.stall_min_progress {
            Some(Outcome::Stalled)
        } else if frame == max_frames {
            Some(Outcome::TimedOut)
        } else {
            None
        };
        if let Some(outcome) = outcome {
            return Ok(EpisodeResult {
                score,
                outcome,
                frames: frame,
                final_s: course.s,
            });
        }
    }
    unreachable!("max_frames is at least one and the last frame always terminates")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u64,
    pub best_score: f64,
    pub mean_score: f64,
    pub median_score: f64,
    pub completions: usize,
    pub crashes: usize,
    pub stalls: usize,
    pub timeouts: usize,
    /// Population index of the best-scoring individual (lowest on ties).
    pub best_genome_id: usize,
}

impl GenerationStats {
    pub fn from_results(generation: u64, results: &[EpisodeResult]) -> Self {
        assert!(!results.is_empty());
        let scores: Vec<f64> = results.iter().map(|r| r.score).collect();
        let mut best_genome_id = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best_genome_id] {
                best_genome_id = i;
            }
        }
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median_score = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let count = |o: Outcome| results.iter().filter(|r| r.outcome == o).count();
        GenerationStats {
            generation,
            best_score: scores[best_genome_id],
            mean_score: scores.iter().sum::<f64>() / n as f64,
            median_score,
            completions: count(Outcome::Completed),
            crashes: count(Outcome::Crashed),
            stalls: count(Outcome::Stalled),
            timeouts: count(Outcome::TimedOut),
            best_genome_id,
        }
    }
}

/// Every knob of one evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub ga: GaConfig,
    pub params: VehicleParams,
    pub sensors: SensorConfig,
    pub hidden: Vec<usize>,
    pub episode: EpisodeConfig,
    pub seed: u64,
    pub max_generations: u64,
    /// Evaluator thread cap; `None` uses every available core. Never affects
    /// results.
    pub threads: Option<usize>,
}

impl EvolutionConfig {
    pub fn topology(&self) -> Result<Topology, SimError> {
        Ok(Topology::new(
            self.sensors.input_size(),
            self.hidden.clone(),
        )?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.ga.validate()?;
        self.params.validate()?;
        self.sensors.validate()?;
        self.episode.validate()?;
        self.topology()?;
        Ok(())
    }

    pub fn arena<'a>(&'a self, track: &'a Track) -> Arena<'a> {
        Arena {
            track,
            params: &self.params,
            sensors: &self.sensors,
            episode: &self.episode,
        }
    }
}

/// Outcome of [`run_evolution`].
#[derive(Debug, Clone)]
pub struct EvolutionRun {
    pub stats: Vec<GenerationStats>,
    /// Best genome of each evaluated generation.
    pub best_genomes: Vec<Genome>,
    /// Population of the last evaluated generation and its results.
    pub final_population: Vec<Genome>,
    pub final_results: Vec<EpisodeResult>,
    /// Generations evaluated when the success streak completed.
    pub generations_to_success: Option<u64>,
}

impl EvolutionRun {
    pub fn succeeded(&self) -> bool {
        self.generations_to_success.is_some()
    }

    pub fn generations(&self) -> u64 {
        self.stats.len() as u64
    }
}

/// Evaluates a population; output order matches input order regardless of
/// how episodes are scheduled.
pub fn evaluate_population(
    population: &[Genome],
    arena: Arena<'_>,
    pool: &rayon::ThreadPool,
) -> Result<Vec<EpisodeResult>, SimError> {
    pool.install(|| {
        population
            .par_iter()
            .map(|g| run_episode_observed(g, arena, |_| {}))
            .collect()
    })
}

pub fn run_evolution(cfg: &EvolutionConfig, track: &Track) -> Result<EvolutionRun, SimError> {
    run_evolution_with(cfg, track, |_| {})
}

/// [`run_evolution`] with a callback after each generation is evaluated.
pub fn run_evolution_with(
    cfg: &EvolutionConfig,
    track: &Track,
    mut on_generation: impl FnMut(&GenerationStats),
) -> Result<EvolutionRun, SimError> {
    cfg.validate()?;
    let topology = cfg.topology()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| SimError::ThreadPool(e.to_string()))?;
    let stream = SeedStream::new(cfg.seed);
    let arena = cfg.arena(track);

    let mut population: Vec<Genome> = (0..cfg.ga.population)
        .map(|i| random_genome(&topology, &mut stream.substream(&[tag::GENESIS, i as u64])))
        .collect();
    let mut run = EvolutionRun {
        stats: Vec::new(),
        best_genomes: Vec::new(),
        final_population: Vec::new(),
        final_results: Vec::new(),
        generations_to_success: None,
    };
    let mut streak = 0;
    for generation in 0..cfg.max_generations {
        let results = evaluate_population(&population, arena, &pool)?;
        let stats = GenerationStats::from_results(generation, &results);
        on_generation(&stats);
        run.best_genomes
            .push(population[stats.best_genome_id].clone());
        streak = if stats.completions > 0 { streak + 1 } else { 0 };
        run.stats.push(stats);

        let done = streak >= SUCCESS_STREAK || generation + 1 == cfg.max_generations;
        if streak >= SUCCESS_STREAK {
            run.generations_to_success = Some(generation + 1);
        }
        if done {
            run.final_population = population;
            run.final_results = results;
            break;
        }
        let scores: Vec<f64> = results.iter().map(|r| r.score).collect();
        population = next_generation(&population, &scores, &cfg.ga, &stream, generation)?;
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brain::Topology;
    use crate::geometry::Vec2;
    use crate::track::{s_curve, straight_corridor};
    use crate::vehicle::{default_params, Layout};

    fn ep() -> EpisodeConfig {
        EpisodeConfig::default()
    }

    fn state_with_slip(speed: f64, slip: f64) -> VehicleState {
        VehicleState {
            vx: speed * slip.cos(),
            vy: speed * slip.sin(),
            ..Default::default()
        }
    }

    fn straight_course() -> CoursePose {
        CoursePose {
            s: 0.0,
            tangent: Vec2::new(1.0, 0.0),
            lateral_offset: 0.0,
        }
    }

    #[test]
    fn frame_score_examples() {
        let dt = 1.0 / 60.0;
        let thr = 10f64.to_radians();
        let aligned = VehicleState {
            vx: 10.0,
            ..Default::default()
        };
        assert!((frame_score(&aligned, &straight_course(), dt, thr) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(
            frame_score(
                &state_with_slip(10.0, 15f64.to_radians()),
                &straight_course(),
                dt,
                thr
            ),
            0.0
        );
        let reverse = CoursePose {
            tangent: Vec2::new(-1.0, 0.0),
            ..straight_course()
        };
        assert_eq!(frame_score(&aligned, &reverse, dt, thr), 0.0);
    }

    #[test]
    fn frame_score_projects_onto_tangent() {
        let dt = 0.02;
        let s = VehicleState {
            vx: 10.0,
            yaw: 0.3,
            ..Default::default()
        };
        let c = straight_course();
        let expected = 10.0 * 0.3f64.cos() * dt;
        assert!((frame_score(&s, &c, dt, 0.2) - expected).abs() < 1e-12);
    }

    #[test]
    fn episode_config_validation() {
        assert!(ep().validate().is_ok());
        assert!(EpisodeConfig { dt: 0.1, ..ep() }.validate().is_err());
        assert!(EpisodeConfig {
            max_time: 4.0,
            ..ep()
        }
        .validate()
        .is_err());
        assert!(EpisodeConfig {
            angle_threshold: 4.0,
            ..ep()
        }
        .validate()
        .is_err());
        assert_eq!(ep().max_frames(), 3600);
        assert_eq!(ep().stall_frames(), 300);
    }

    fn topology() -> Topology {
        Topology::new(14, vec![12, 8]).unwrap()
    }

    /// Zero weights except the output biases, which fix the controls.
    fn constant_controls(throttle_bias: f64, brake_bias: f64, steer_bias: f64) -> Genome {
        let t = topology();
        let mut w = vec![0.0; t.genome_len()];
        let n = w.len();
        w[n - 3] = throttle_bias;
        w[n - 2] = brake_bias;
        w[n - 1] = steer_bias;
        Genome::new(t, w).unwrap()
    }

    #[test]
    fn zero_genome_stalls_at_window() {
        let track = straight_corridor(200.0);
        let r = run_episode(
            &Genome::zeros(topology()),
            &track,
            &default_params(Layout::FF),
            &SensorConfig::default(),
            &ep(),
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Stalled);
        assert_eq!(r.score, 0.0);
        assert_eq!(r.frames, ep().stall_frames());
    }

    #[test]
    fn straight_driver_completes_corridor() {
        let track = straight_corridor(200.0);
        let g = constant_controls(1.0, -1.0, 0.0);
        let r = run_episode(
            &g,
            &track,
            &default_params(Layout::FF),
            &SensorConfig::default(),
            &ep(),
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Completed);
        assert!(
            (r.score - track.finish_s()).abs() / track.finish_s() < 0.02,
            "{}",
            r.score
        );
        // Straight-line motion: score is exactly the x displacement.
        assert!(r.final_s >= 200.0);
    }

    #[test]
    fn hard_steer_crashes() {
        let track = straight_corridor(200.0);
        let g = constant_controls(1.0, -1.0, 3.0);
        let e = ep();
        let r = run_episode(
            &g,
            &track,
            &default_params(Layout::FF),
            &SensorConfig::default(),
            &e,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Crashed);
        assert!((r.frames as f64) * e.dt < e.max_time);
    }

    #[test]
    fn score_is_sum_of_frame_scores_and_only_last_frame_collides() {
        let track = s_curve();
        let p = default_params(Layout::FR);
        let e = ep();
        for steer in [0.0, 0.2, -0.3] {
            let g = constant_controls(0.8, -1.0, steer);
            let mut sum = 0.0;
            let mut frames = Vec::new();
            let r = run_episode_observed(
                &g,
                Arena {
                    track: &track,
                    params: &p,
                    sensors: &SensorConfig::default(),
                    episode: &e,
                },
                |f| {
                    sum += f.score_delta;
                    frames.push(*f);
                },
            )
            .unwrap();
            assert_eq!(sum, r.score);
            assert_eq!(frames.len() as u64, r.frames);
            let (last, rest) = frames.split_last().unwrap();
            assert!(rest.iter().all(|f| !f.collided));
            assert_eq!(last.collided, r.outcome == Outcome::Crashed);
            assert!((r.frames as f64) * e.dt <= e.max_time + e.dt);
        }
    }

    #[test]
    fn timeout_when_slow_but_steady() {
        // Gentle throttle with a long stall window and a short time limit.
        let track = straight_corridor(200.0);
        let e = EpisodeConfig {
            max_time: 3.0,
            stall_window: 2.0,
            stall_min_progress: 0.1,
            ..ep()
        };
        let g = constant_controls(0.2, -1.0, 0.0);
        let r = run_episode(
            &g,
            &track,
            &default_params(Layout::FF),
            &SensorConfig::default(),
            &e,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::TimedOut);
        assert_eq!(r.frames, e.max_frames());
    }

    #[test]
    fn mismatched_topology_rejected() {
        let track = straight_corridor(200.0);
        let g = Genome::zeros(Topology::new(5, vec![]).unwrap());
        let err = run_episode(
            &g,
            &track,
            &default_params(Layout::FF),
            &SensorConfig::default(),
            &ep(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SimError::InputMismatch {
                expected: 5,
                actual: 14
            }
        ));
    }

    #[test]
    fn stats_aggregate() {
        let mk = |score, outcome| EpisodeResult {
            score,
            outcome,
            frames: 1,
            final_s: 0.0,
        };
        let st = GenerationStats::from_results(
            4,
            &[
                mk(3.0, Outcome::Crashed),
                mk(9.0, Outcome::Completed),
                mk(9.0, Outcome::Stalled),
                mk(1.0, Outcome::TimedOut),
            ],
        );
        assert_eq!(st.best_score, 9.0);
        assert_eq!(st.best_genome_id, 1);
        assert_eq!(st.mean_score, 5.5);
        assert_eq!(st.median_score, 6.0);
        assert_eq!(
            (st.completions, st.crashes, st.stalls, st.timeouts),
            (1, 1, 1, 1)
        );
    }

    fn small_run(seed: u64, threads: Option<usize>) -> EvolutionConfig {
        EvolutionConfig {
            ga: GaConfig {
                population: 12,
                ..Default::default()
            },
            params: default_params(Layout::FF),
            sensors: SensorConfig::default(),
            hidden: vec![6],
            episode: EpisodeConfig {
                max_time: 20.0,
                ..ep()
            },
            seed,
            max_generations: 4,
            threads,
        }
    }

    #[test]
    fn evolution_is_deterministic_across_thread_counts() {
        let track = straight_corridor(200.0);
        let a = run_evolution(&small_run(5, Some(1)), &track).unwrap();
        let b = run_evolution(&small_run(5, Some(4)), &track).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.final_population, b.final_population);
        let c = run_evolution(&small_run(6, Some(2)), &track).unwrap();
        assert_ne!(a.stats, c.stats);
    }

    #[test]
    fn individuals_score_the_same_alone() {
        let track = straight_corridor(200.0);
        let cfg = small_run(8, Some(3));
        let run = run_evolution(&cfg, &track).unwrap();
        for (g, r) in run.final_population.iter().zip(&run.final_results) {
            let alone = run_episode(g, &track, &cfg.params, &cfg.sensors, &cfg.episode).unwrap();
            assert_eq!(alone, *r);
        }
    }

    #[test]
    fn zero_generations_is_empty_run() {
        let track = straight_corridor(200.0);
        let cfg = EvolutionConfig {
            max_generations: 0,
            ..small_run(1, Some(1))
        };
        let run = run_evolution(&cfg, &track).unwrap();
        assert!(run.stats.is_empty() && !run.succeeded());
    }

    #[test]
    fn bad_config_rejected_before_running() {
        let track = straight_corridor(200.0);
        let mut cfg = small_run(1, Some(1));
        cfg.ga.mutation_rate = 2.0;
        assert!(matches!(
            run_evolution(&cfg, &track),
            Err(SimError::Evolution(_))
        ));
        let mut cfg = small_run(1, Some(1));
        cfg.hidden = vec![0];
        assert!(matches!(
            run_evolution(&cfg, &track),
            Err(SimError::Brain(_))
        ));
    }
}
