//! Binary replay files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "NEVOREPL"
//! version      u32
//! seed         u64
//! config hash  32 bytes sha256 over the sim spec JSON and the track bytes
//! spec json    u64 length + UTF-8 bytes
//! generations  u64 count, then one genome per generation
//! episode      u8 present flag; if 1:
//!              u64 generation, f64 score, u8 outcome, u64 frames,
//!              f64 final_s, then frames × (f64 throttle, brake, steer)
//! ```
//!
//! Nothing may follow the episode record.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use neuroevo::sim::Outcome;
use neuroevo::{Controls, Genome};
use sha2::{Digest, Sha256};

use crate::config::SimSpec;
use crate::error::CliError;

pub const MAGIC: &[u8; 8] = b"NEVOREPL";
pub const FORMAT_VERSION: u32 = 1;

// Bounds on lengths read from disk, so a corrupt header cannot trigger a
// huge allocation.
const MAX_SPEC_LEN: u64 = 1 << 24;
const MAX_GENERATIONS: u64 = 1 << 24;

/// Binds a replay to the exact inputs it was recorded with.
pub fn config_hash(spec_json: &str, track_bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((spec_json.len() as u64).to_le_bytes());
    h.update(spec_json.as_bytes());
    h.update(track_bytes);
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The best episode of the last generation, frame by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedEpisode {
    pub generation: u64,
    pub score: f64,
    pub outcome: Outcome,
    pub final_s: f64,
    pub controls: Vec<Controls>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub spec_json: String,
    pub generation_bests: Vec<Genome>,
    pub episode: Option<RecordedEpisode>,
}

impl Replay {
    pub fn spec(&self) -> Result<SimSpec, CliError> {
        serde_json::from_str(&self.spec_json)
            .map_err(|e| CliError::Replay(format!("embedded config: {e}")))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        w.write_all(&self.config_hash)?;
        w.write_u64::<LittleEndian>(self.spec_json.len() as u64)?;
        w.write_all(self.spec_json.as_bytes())?;
        w.write_u64::<LittleEndian>(self.generation_bests.len() as u64)?;
        for g in &self.generation_bests {
            g.write_to(w)?;
        }
        match &self.episode {
            None => w.write_u8(0)?,
            Some(ep) => {
                w.write_u8(1)?;
                w.write_u64::<LittleEndian>(ep.generation)?;
                w.write_f64::<LittleEndian>(ep.score)?;
                w.write_u8(ep.outcome.code())?;
                w.write_u64::<LittleEndian>(ep.controls.len() as u64)?;
                w.write_f64::<LittleEndian>(ep.final_s)?;
                for c in &ep.controls {
                    w.write_f64::<LittleEndian>(c.throttle())?;
                    w.write_f64::<LittleEndian>(c.brake())?;
                    w.write_f64::<LittleEndian>(c.steer())?;
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Replay, CliError> {
        let mut r = bytes;
        let replay = read_replay(&mut r).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => CliError::Replay("file is truncated".into()),
            _ => CliError::Replay(e.to_string()),
        })?;
        if !r.is_empty() {
            return Err(CliError::Replay(format!(
                "{} trailing bytes after the episode record",
                r.len()
            )));
        }
        Ok(replay)
    }
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_replay(r: &mut &[u8]) -> io::Result<Replay> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(invalid("not a replay file (bad magic)"));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(invalid(format!("unsupported format version {version}")));
    }
    let seed = r.read_u64::<LittleEndian>()?;
    let mut config_hash = [0u8; 32];
    r.read_exact(&mut config_hash)?;

    let spec_len = r.read_u64::<LittleEndian>()?;
    if spec_len > MAX_SPEC_LEN || spec_len > r.len() as u64 {
        return Err(if spec_len > MAX_SPEC_LEN {
            invalid(format!("embedded config length {spec_len} is implausible"))
        } else {
            io::ErrorKind::UnexpectedEof.into()
        });
    }
    let mut spec_bytes = vec![0u8; spec_len as usize];
    r.read_exact(&mut spec_bytes)?;
    let spec_json =
        String::from_utf8(spec_bytes).map_err(|_| invalid("embedded config is not UTF-8"))?;
    let spec: SimSpec =
        serde_json::from_str(&spec_json).map_err(|e| invalid(format!("embedded config: {e}")))?;
    if spec.seed != seed {
        return Err(invalid("header seed disagrees with embedded config"));
    }
    let topology = neuroevo::Topology::new(spec.rays.input_size(), spec.net.hidden.clone())
        .map_err(|e| invalid(format!("embedded config: {e}")))?;

    let n = r.read_u64::<LittleEndian>()?;
    if n > MAX_GENERATIONS {
        return Err(invalid(format!("generation count {n} is implausible")));
    }
    let mut generation_bests = Vec::with_capacity(n.min(1024) as usize);
    for _ in 0..n {
        generation_bests.push(Genome::read_from(r, &topology)?);
    }

    let episode = match r.read_u8()? {
        0 => None,
        1 => {
            let generation = r.read_u64::<LittleEndian>()?;
            let score = r.read_f64::<LittleEndian>()?;
            let outcome =
                Outcome::from_code(r.read_u8()?).ok_or_else(|| invalid("unknown outcome code"))?;
            let frames = r.read_u64::<LittleEndian>()?;
            let final_s = r.read_f64::<LittleEndian>()?;
            if frames.saturating_mul(24) > r.len() as u64 {
                return Err(io::ErrorKind::UnexpectedEof.into());
            }
            let mut controls = Vec::with_capacity(frames as usize);
            for _ in 0..frames {
                let t = r.read_f64::<LittleEndian>()?;
                let b = r.read_f64::<LittleEndian>()?;
                let s = r.read_f64::<LittleEndian>()?;
                let c = Controls::new(t, b, s);
                if (c.throttle(), c.brake(), c.steer()) != (t, b, s) {
                    return Err(invalid("recorded controls out of range"));
                }
                controls.push(c);
            }
            Some(RecordedEpisode {
                generation,
                score,
                outcome,
                final_s,
                controls,
            })
        }
        f => return Err(invalid(format!("bad episode flag {f}"))),
    };
    Ok(Replay {
        seed,
        config_hash,
        spec_json,
        generation_bests,
        episode,
    })
}
