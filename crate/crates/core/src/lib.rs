//! Neuroevolution of feed-forward driving controllers on 2D tracks.
//!
//! A population of fixed-topology networks drives planar bicycle-model cars
//! from ray-cast distance sensors. Each generation is scored by gated course
//! progress, and the next is bred by fitness-weighted arithmetic crossover of
//! the top performers followed by uniform replacement mutation. Every run is
//! a pure function of its configuration and seed.

pub mod brain;
pub mod evolution;
pub mod geometry;
pub mod rng;
pub mod sensors;
pub mod sim;
pub mod track;
pub mod vehicle;

pub use brain::{Genome, Topology};
pub use evolution::GaConfig;
pub use geometry::{Segment, Vec2};
pub use sensors::{SensorConfig, SensorReading};
pub use sim::{
    EpisodeConfig, EpisodeResult, EvolutionConfig, EvolutionRun, GenerationStats, Outcome,
};
pub use track::{load_track, Track};
pub use vehicle::{default_params, Controls, Layout, VehicleParams, VehicleState};
