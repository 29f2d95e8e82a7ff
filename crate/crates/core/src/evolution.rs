//! Generation supervisor: relative fitness, top-n selection, fitness-weighted
//! arithmetic crossover, and uniform replacement mutation.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brain::Genome;
use crate::rng::{bernoulli, tag, uniform_symmetric, SeedStream};

#[derive(Debug, Error, PartialEq)]
pub enum EvolutionError {
    #[error("score {value} at index {index} is negative or not finite")]
    BadScore { index: usize, value: f64 },
    #[error("empty score vector")]
    Empty,
    #[error("crossover needs at least one parent")]
    NoParents,
    #[error("parent {0} has a different topology")]
    TopologyMismatch(usize),
    #[error("parent fitness must be non-negative with a positive sum")]
    DegenerateParentFitness,
    #[error("{populace} genomes but {scores} scores")]
    LengthMismatch { populace: usize, scores: usize },
    #[error("invalid GA config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population: usize,
    pub top_fraction: f64,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Mutated weights are redrawn uniformly on `[-range, range]`.
    pub mutation_range: f64,
    pub elitism: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            top_fraction: 0.1,
            crossover_rate: 0.8,
            mutation_rate: 0.2,
            mutation_range: 1.0,
            elitism: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let err = |m: String| Err(EvolutionError::Config(m));
        if self.population == 0 {
            return err("population must be positive".into());
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return err(format!(
                "top_fraction must be in (0, 1], got {}",
                self.top_fraction
            ));
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return err(format!("{name} must be in [0, 1], got {r}"));
            }
        }
        if !(self.mutation_range >= 0.0 && self.mutation_range.is_finite()) {
            return err(format!(
                "mutation_range must be finite and non-negative, got {}",
                self.mutation_range
            ));
        }
        Ok(())
    }

    /// `ceil(top_fraction * population)`, at least one.
    pub fn parent_count(&self) -> usize {
        ((self.top_fraction * self.population as f64).ceil() as usize).clamp(1, self.population)
    }
}

/// Relative fitness: each score over the population total.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessVector(Vec<f64>);

impl FitnessVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `score_i / Σ score`; uniform `1/p` when every score is zero.
pub fn compute_fitness(scores: &[f64]) -> Result<FitnessVector, EvolutionError> {
    if scores.is_empty() {
        return Err(EvolutionError::Empty);
    }
    if let Some((index, &value)) = scores
        .iter()
        .enumerate()
        .find(|(_, s)| !s.is_finite() || **s < 0.0)
    {
        return Err(EvolutionError::BadScore { index, value });
    }
    let total: f64 = scores.iter().sum();
    if total == 0.0 {
        let u = 1.0 / scores.len() as f64;
        return Ok(FitnessVector(vec![u; scores.len()]));
    }
    Ok(FitnessVector(scores.iter().map(|s| s / total).collect()))
}

/// Indices of the `n` largest fitness values, by descending fitness then
/// ascending index.
pub fn select_top(fitness: &FitnessVector, n: usize) -> Vec<usize> {
    let v = fitness.values();
    assert!(
        n >= 1 && n <= v.len(),
        "select_top: n = {n} outside 1..={}",
        v.len()
    );
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Fitness-weighted average of the parents' weights, with the fitness
/// renormalized over the parents so the child is a convex combination.
///
/// Each weight is computed as `w_0 + Σ f'_i (w_i - w_0)` around the first
/// parent, which is algebraically `Σ f'_i w_i` but reproduces a shared value
/// exactly when all parents agree on it.
pub fn crossover(parents: &[&Genome], parent_fitness: &[f64]) -> Result<Genome, EvolutionError> {
    let first = *parents.first().ok_or(EvolutionError::NoParents)?;
    if parent_fitness.len() != parents.len() {
        return Err(EvolutionError::LengthMismatch {
            populace: parents.len(),
            scores: parent_fitness.len(),
        });
    }
    if let Some(i) = parents
        .iter()
        .position(|p| p.topology() != first.topology())
    {
        return Err(EvolutionError::TopologyMismatch(i));
    }
    if parent_fitness.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(EvolutionError::DegenerateParentFitness);
    }
    let total: f64 = parent_fitness.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(EvolutionError::DegenerateParentFitness);
    }
    let shares: Vec<f64> = parent_fitness.iter().map(|f| f / total).collect();

    let weights = (0..first.len())
        .map(|k| {
            let anchor = first.weights()[k];
            let (mut lo, mut hi) = (anchor, anchor);
            let mut w = anchor;
            for (p, &share) in parents.iter().zip(&shares).skip(1) {
                let x = p.weights()[k];
                w += share * (x - anchor);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            w.clamp(lo, hi)
        })
        .collect();
    Ok(first.with_weights(weights))
}

/// Replaces each weight with probability `mutation_rate` by a fresh draw on
/// `[-mutation_range, mutation_range]`.
pub fn mutate<R: RngCore + ?Sized>(genome: &Genome, cfg: &GaConfig, rng: &mut R) -> Genome {
    mutate_traced(genome, cfg, rng).0
}

/// [`mutate`] plus the per-weight mask of which entries were replaced.
pub fn mutate_traced<R: RngCore + ?Sized>(
    genome: &Genome,
    cfg: &GaConfig,
    rng: &mut R,
) -> (Genome, Vec<bool>) {
    let mut mask = Vec::with_capacity(genome.len());
    let weights = genome
        .weights()
        .iter()
        .map(|&w| {
            let hit = bernoulli(rng, cfg.mutation_rate);
            mask.push(hit);
            if hit {
                uniform_symmetric(rng, cfg.mutation_range)
            } else {
                w
            }
        })
        .collect();
    (genome.with_weights(weights), mask)
}

/// One bred child together with the mutation mask that produced it.
#[derive(Debug, Clone)]
pub struct Offspring {
    pub genome: Genome,
    pub mutated: Vec<bool>,
}

/// Breeds the next population. All children descend from one crossover base
/// of the top `ceil(top_fraction * p)` individuals: per weight the child takes
/// the base value with probability `crossover_rate`, otherwise the fittest
/// parent's value, and is then mutated. With elitism, child 0 is the base
/// itself. Child `i` draws only from the stream keyed by `(generation, i)`.
pub fn next_generation(
    population: &[Genome],
    scores: &[f64],
    cfg: &GaConfig,
    stream: &SeedStream,
    generation: u64,
) -> Result<Vec<Genome>, EvolutionError> {
    Ok(
        next_generation_traced(population, scores, cfg, stream, generation)?
            .into_iter()
            .map(|o| o.genome)
            .collect(),
    )
}

pub fn next_generation_traced(
    population: &[Genome],
    scores: &[f64],
    cfg: &GaConfig,
    stream: &SeedStream,
    generation: u64,
) -> Result<Vec<Offspring>, EvolutionError> {
    cfg.validate()?;
    if population.len() != scores.len() {
        return Err(EvolutionError::LengthMismatch {
            populace: population.len(),
            scores: scores.len(),
        });
    }
    let fitness = compute_fitness(scores)?;
    let n = cfg.parent_count().min(population.len());
    let top = select_top(&fitness, n);
    let parents: Vec<&Genome> = top.iter().map(|&i| &population[i]).collect();
    let parent_fitness: Vec<f64> = top.iter().map(|&i| fitness.values()[i]).collect();
    // The top parent always has positive fitness (uniform when all scores are
    // zero), so the crossover weights never all vanish.
    let base = crossover(&parents, &parent_fitness)?;
    let fittest = parents[0];

    let children = (0..cfg.population)
        .map(|i| {
            if cfg.elitism && i == 0 {
                return Offspring {
                    genome: base.clone(),
                    mutated: vec![false; base.len()],
                };
            }
            let mut rng = stream.substream(&[tag::BREED, generation, i as u64]);
            let mixed = base
                .weights()
                .iter()
                .zip(fittest.weights())
                .map(|(&b, &f)| {
                    if bernoulli(&mut rng, cfg.crossover_rate) {
                        b
                    } else {
                        f
                    }
                })
                .collect();
            let (genome, mutated) = mutate_traced(&base.with_weights(mixed), cfg, &mut rng);
            Offspring { genome, mutated }
        })
        .collect();
    Ok(children)
}
