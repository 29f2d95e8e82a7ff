//! Fixed-topology feed-forward controller. Its flat weight vector is the
//! genome that evolution operates on.
//!
//! Weight layout, per layer in order: the `fan_out x fan_in` weight matrix in
//! row-major order (row = output neuron), then `fan_out` biases.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::uniform_symmetric;
use crate::sensors::SensorReading;
use crate::vehicle::Controls;

/// Throttle, brake, steer.
pub const OUTPUT_SIZE: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum BrainError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("genome has {actual} weights, topology needs {expected}")]
    Length { expected: usize, actual: usize },
    #[error("genome weight {0} is not finite")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub input_size: usize,
    pub hidden: Vec<usize>,
    pub output_size: usize,
}

/// Position of one genome entry inside the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSlot {
    Weight {
        layer: usize,
        row: usize,
        col: usize,
    },
    Bias {
        layer: usize,
        row: usize,
    },
}

impl Topology {
    pub fn new(input_size: usize, hidden: Vec<usize>) -> Result<Self, BrainError> {
        let t = Topology {
            input_size,
            hidden,
            output_size: OUTPUT_SIZE,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), BrainError> {
        if self.input_size < 3 {
            return Err(BrainError::Topology(format!(
                "input_size must be at least 3, got {}",
                self.input_size
            )));
        }
        if self.output_size != OUTPUT_SIZE {
            return Err(BrainError::Topology(format!(
                "output_size must be {OUTPUT_SIZE}, got {}",
                self.output_size
            )));
        }
        if self.hidden.contains(&0) {
            return Err(BrainError::Topology(
                "hidden layer widths must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_size);
        w.extend_from_slice(&self.hidden);
        w.push(self.output_size);
        w
    }

    /// Σ over layers of `fan_in * fan_out + fan_out`.
    pub fn genome_len(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn slot(&self, index: usize) -> Option<WeightSlot> {
        let mut base = 0;
        for (layer, w) in self.widths().windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let matrix = fan_in * fan_out;
            if index < base + matrix {
                let k = index - base;
                return Some(WeightSlot::Weight {
                    layer,
                    row: k / fan_in,
                    col: k % fan_in,
                });
            }
            if index < base + matrix + fan_out {
                return Some(WeightSlot::Bias {
                    layer,
                    row: index - base - matrix,
                });
            }
            base += matrix + fan_out;
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    weights: Vec<f64>,
    topology: Topology,
}

impl Genome {
    pub fn new(topology: Topology, weights: Vec<f64>) -> Result<Self, BrainError> {
        topology.validate()?;
        let expected = topology.genome_len();
        if weights.len() != expected {
            return Err(BrainError::Length {
                expected,
                actual: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(BrainError::NonFinite(i));
        }
        Ok(Self { weights, topology })
    }

    pub fn zeros(topology: Topology) -> Self {
        let n = topology.genome_len();
        Self {
            weights: vec![0.0; n],
            topology,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Same topology, new weights. Lengths must match.
    pub(crate) fn with_weights(&self, weights: Vec<f64>) -> Genome {
        debug_assert_eq!(weights.len(), self.weights.len());
        Genome {
            weights,
            topology: self.topology.clone(),
        }
    }

    /// Length-prefixed little-endian `f64` list in index order.
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_u64::<LittleEndian>(self.weights.len() as u64)?;
        for &x in &self.weights {
            w.write_f64::<LittleEndian>(x)?;
        }
        Ok(())
    }

    /// Reads weights written by [`Genome::write_to`] for a known topology.
    pub fn read_from<R: Read>(r: &mut R, topology: &Topology) -> io::Result<Genome> {
        let len = r.read_u64::<LittleEndian>()? as usize;
        if len != topology.genome_len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!(
                    "genome length {len} does not match topology ({})",
                    topology.genome_len()
                ),
            ));
        }
        let mut weights = vec![0.0; len];
        r.read_f64_into::<LittleEndian>(&mut weights)?;
        Genome::new(topology.clone(), weights)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

/// Every weight uniform on `[-1, 1]`, one draw per weight in index order.
pub fn random_genome<R: RngCore + ?Sized>(topology: &Topology, rng: &mut R) -> Genome {
    let weights = (0..topology.genome_len())
        .map(|_| uniform_symmetric(rng, 1.0))
        .collect();
    Genome {
        weights,
        topology: topology.clone(),
    }
}

/// Raw network outputs, each in `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawOutputs {
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
}

impl RawOutputs {
    /// Pedals take the positive part; steering passes through.
    pub fn to_controls(self) -> Controls {
        Controls::new(self.throttle.max(0.0), self.brake.max(0.0), self.steer)
    }
}

/// Dense tanh layers on the input vector (distances, speed, slip).
pub fn forward(genome: &Genome, reading: &SensorReading) -> RawOutputs {
    let inputs = reading.to_inputs();
    forward_inputs(genome, &inputs)
}

pub fn forward_inputs(genome: &Genome, inputs: &[f64]) -> RawOutputs {
    let topo = &genome.topology;
    assert_eq!(
        inputs.len(),
        topo.input_size,
        "input width does not match topology"
    );
    let mut act = inputs.to_vec();
    let mut next = Vec::new();
    let mut offset = 0;
    for w in topo.widths().windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let matrix = &genome.weights[offset..offset + fan_in * fan_out];
        let bias = &genome.weights[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        next.clear();
        next.extend(matrix.chunks_exact(fan_in).zip(bias).map(|(row, b)| {
            let z: f64 = row.iter().zip(&act).map(|(w, x)| w * x).sum::<f64>() + b;
            z.tanh()
        }));
        std::mem::swap(&mut act, &mut next);
        offset += fan_in * fan_out + fan_out;
    }
    RawOutputs {
        throttle: act[0],
        brake: act[1],
        steer: act[2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use proptest::prelude::*;

    fn topo(input: usize, hidden: &[usize]) -> Topology {
        Topology::new(input, hidden.to_vec()).unwrap()
    }

    #[test]
    fn genome_length_formula() {
        let t = topo(14, &[12, 8]);
        assert_eq!(t.genome_len(), 14 * 12 + 12 + 12 * 8 + 8 + 8 * 3 + 3);
        assert_eq!(topo(3, &[]).genome_len(), 3 * 3 + 3);
    }

    #[test]
    fn topology_validation() {
        assert!(Topology::new(2, vec![4]).is_err());
        assert!(Topology::new(5, vec![4, 0]).is_err());
        let bad = Topology {
            input_size: 5,
            hidden: vec![],
            output_size: 2,
        };
        assert!(bad.validate().is_err());
        assert!(matches!(
            Genome::new(topo(3, &[]), vec![0.0; 5]),
            Err(BrainError::Length {
                expected: 12,
                actual: 5
            })
        ));
        assert!(matches!(
            Genome::new(topo(3, &[]), vec![f64::NAN; 12]),
            Err(BrainError::NonFinite(0))
        ));
    }

    #[test]
    fn random_genome_is_seeded_and_in_range() {
        let t = topo(14, &[12, 8]);
        let s = SeedStream::new(3);
        let a = random_genome(&t, &mut s.substream(&[0]));
        let b = random_genome(&t, &mut s.substream(&[0]));
        assert_eq!(a, b);
        assert!(a.weights().iter().all(|w| (-1.0..=1.0).contains(w)));
        assert_ne!(a, random_genome(&t, &mut s.substream(&[1])));
    }

    #[test]
    fn random_genome_consumes_one_draw_per_weight() {
        use rand::Rng;
        let t = topo(3, &[2]);
        let s = SeedStream::new(11);
        let mut r1 = s.substream(&[]);
        random_genome(&t, &mut r1);
        let mut r2 = s.substream(&[]);
        for _ in 0..t.genome_len() {
            let _: f64 = r2.random();
        }
        assert_eq!(r1.random::<u64>(), r2.random::<u64>());
    }

    #[test]
    fn random_weights_have_zero_mean() {
        let t = topo(100, &[990]);
        let g = random_genome(&t, &mut SeedStream::new(5).substream(&[]));
        assert!(g.len() >= 100_000);
        let mean = g.weights().iter().take(100_000).sum::<f64>() / 100_000.0;
        assert!(mean.abs() <= 0.02, "{mean}");
    }

    #[test]
    fn zero_genome_outputs_zero() {
        let g = Genome::zeros(topo(14, &[12, 8]));
        let out = forward_inputs(&g, &[0.3; 14]);
        assert_eq!((out.throttle, out.brake, out.steer), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_two_three_matches_hand_computation() {
        // Topology with input 3 is the smallest allowed; use inputs (x0, x1, 0)
        // so the third column is inert and the net behaves as 2-2-3.
        let t = topo(3, &[2]);
        let w1 = [[0.5, -0.25, 0.9], [1.5, 0.75, -0.3]];
        let b1 = [0.1, -0.2];
        let w2 = [[1.0, -1.0], [0.3, 0.6], [-2.0, 0.5]];
        let b2 = [0.05, -0.4, 0.2];
        let mut flat = Vec::new();
        for r in &w1 {
            flat.extend_from_slice(r);
        }
        flat.extend_from_slice(&b1);
        for r in &w2 {
            flat.extend_from_slice(r);
        }
        flat.extend_from_slice(&b2);
        let g = Genome::new(t, flat).unwrap();
        let x = [0.8, -0.6, 0.0];

        let h: Vec<f64> = (0..2)
            .map(|i| (w1[i][0] * x[0] + w1[i][1] * x[1] + w1[i][2] * x[2] + b1[i]).tanh())
            .collect();
        let y: Vec<f64> = (0..3)
            .map(|i| (w2[i][0] * h[0] + w2[i][1] * h[1] + b2[i]).tanh())
            .collect();
        let out = forward_inputs(&g, &x);
        assert!((out.throttle - y[0]).abs() < 1e-9);
        assert!((out.brake - y[1]).abs() < 1e-9);
        assert!((out.steer - y[2]).abs() < 1e-9);
        // Hand value of the first hidden unit: tanh(0.4 + 0.15 + 0.1) = tanh(0.65).
        assert!((h[0] - 0.65f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn controls_take_positive_part() {
        let c = RawOutputs {
            throttle: -0.4,
            brake: 0.7,
            steer: -0.2,
        }
        .to_controls();
        assert_eq!((c.throttle(), c.brake(), c.steer()), (0.0, 0.7, -0.2));
    }

    #[test]
    fn slot_map_is_stable() {
        let t = topo(3, &[2]);
        assert_eq!(
            t.slot(0),
            Some(WeightSlot::Weight {
                layer: 0,
                row: 0,
                col: 0
            })
        );
        assert_eq!(
            t.slot(4),
            Some(WeightSlot::Weight {
                layer: 0,
                row: 1,
                col: 1
            })
        );
        assert_eq!(t.slot(6), Some(WeightSlot::Bias { layer: 0, row: 0 }));
        assert_eq!(
            t.slot(8),
            Some(WeightSlot::Weight {
                layer: 1,
                row: 0,
                col: 0
            })
        );
        assert_eq!(t.slot(14), Some(WeightSlot::Bias { layer: 1, row: 0 }));
        assert_eq!(t.slot(16), Some(WeightSlot::Bias { layer: 1, row: 2 }));
        assert_eq!(t.slot(17), None);
    }

    #[test]
    fn perturbing_one_slot_touches_only_that_position() {
        // Perturb each index in turn and check that the change in output is
        // explained by the slot the index map reports: a weight (l, r, c)
        // only matters when input c of layer l is non-zero.
        let t = topo(4, &[3]);
        let base = random_genome(&t, &mut SeedStream::new(9).substream(&[]));
        for i in 0..t.genome_len() {
            let slot = t.slot(i).unwrap();
            let mut w = base.weights().to_vec();
            w[i] += 0.5;
            let g = Genome::new(t.clone(), w).unwrap();
            if let WeightSlot::Weight { layer: 0, col, .. } = slot {
                let mut x = [0.3, -0.7, 0.2, 0.9];
                x[col] = 0.0;
                assert_eq!(
                    forward_inputs(&g, &x),
                    forward_inputs(&base, &x),
                    "index {i}"
                );
                x[col] = 0.5;
                assert_ne!(
                    forward_inputs(&g, &x),
                    forward_inputs(&base, &x),
                    "index {i}"
                );
            } else {
                assert_ne!(
                    forward_inputs(&g, &[0.3, -0.7, 0.2, 0.9]),
                    forward_inputs(&base, &[0.3, -0.7, 0.2, 0.9])
                );
            }
        }
    }

    proptest! {
        #[test]
        fn outputs_stay_open_interval(seed in any::<u64>(), xs in prop::collection::vec(-1.0..1.0f64, 14)) {
            let g = random_genome(&topo(14, &[12, 8]), &mut SeedStream::new(seed).substream(&[]));
            let o = forward_inputs(&g, &xs);
            for v in [o.throttle, o.brake, o.steer] {
                prop_assert!(v > -1.0 && v < 1.0);
            }
            prop_assert_eq!(o, forward_inputs(&g, &xs));
        }

        #[test]
        fn serialization_round_trips_bit_exactly(ws in prop::collection::vec(any::<f64>().prop_filter("finite", |w| w.is_finite()), 12)) {
            let t = topo(3, &[]);
            let g = Genome::new(t.clone(), ws).unwrap();
            let mut buf = Vec::new();
            g.write_to(&mut buf).unwrap();
            prop_assert_eq!(buf.len(), 8 + 8 * 12);
            let back = Genome::read_from(&mut buf.as_slice(), &t).unwrap();
            let bits = |g: &Genome| g.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&g));
        }
    }
}
