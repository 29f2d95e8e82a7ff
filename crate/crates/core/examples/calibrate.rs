//! Runs the desk-scale benchmarks and prints generations-to-success per seed.
//!
//! cargo run --release -p neuroevo --example calibrate [corridor|s_curve] [max_generations]

use std::time::Instant;

use neuroevo::sim::{run_evolution_with, EpisodeConfig, EvolutionConfig};
use neuroevo::track::{s_curve, straight_corridor};
use neuroevo::{default_params, GaConfig, Layout, SensorConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("corridor");
    let max_generations = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(60);
    let (track, layouts) = match which {
        "s_curve" => (s_curve(), vec![Layout::FF, Layout::FR]),
        _ => (straight_corridor(200.0), vec![Layout::FF]),
    };
    for layout in layouts {
        let mut gens = Vec::new();
        for seed in 1..=5u64 {
            let cfg = EvolutionConfig {
                ga: GaConfig {
                    population: 50,
                    crossover_rate: 0.9,
                    mutation_rate: 0.1,
                    ..GaConfig::default()
                },
                params: default_params(layout),
                sensors: SensorConfig::default(),
                hidden: vec![12, 8],
                episode: EpisodeConfig::default(),
                seed,
                max_generations,
                threads: None,
            };
            let t = Instant::now();
            let run = run_evolution_with(&cfg, &track, |s| {
                eprintln!(
                    "  gen {:3} best {:8.2} median {:8.2} c/x/s/t {}/{}/{}/{}",
                    s.generation,
                    s.best_score,
                    s.median_score,
                    s.completions,
                    s.crashes,
                    s.stalls,
                    s.timeouts
                )
            })
            .expect("valid config");
            println!(
                "{which} {layout} seed {seed}: {:?} after {} generations in {:.1?}",
                run.generations_to_success,
                run.generations(),
                t.elapsed()
            );
            gens.push(
                run.generations_to_success
                    .map_or(f64::INFINITY, |g| g as f64),
            );
        }
        gens.sort_by(f64::total_cmp);
        println!("{which} {layout} median {}", gens[2]);
    }
}
