//! Experiment configuration: the JSON file, flag overrides layered on top,
//! and resolution into the simulator's own config.

use std::path::{Path, PathBuf};

use neuroevo::sim::{EpisodeConfig, EvolutionConfig};
use neuroevo::{default_params, GaConfig, Layout, SensorConfig, VehicleParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{read_file, CliError};

pub const THREADS_ENV: &str = "NEUROEVO_THREADS";

pub const DEFAULT_MAX_GENERATIONS: u64 = 100;

fn default_max_generations() -> u64 {
    DEFAULT_MAX_GENERATIONS
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Layout plus any `VehicleParams` fields that replace the layout defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    #[serde(default = "default_layout")]
    pub layout: Layout,
    #[serde(flatten)]
    pub overrides: Map<String, Value>,
}

fn default_layout() -> Layout {
    Layout::FF
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            layout: default_layout(),
            overrides: Map::new(),
        }
    }
}

impl PhysicsConfig {
    pub fn resolve(&self) -> Result<VehicleParams, CliError> {
        let mut base = serde_json::to_value(default_params(self.layout)).expect("params serialize");
        let fields = base.as_object_mut().expect("params are an object");
        for (k, v) in &self.overrides {
            fields.insert(k.clone(), v.clone());
        }
        let params: VehicleParams =
            serde_json::from_value(base).map_err(|e| CliError::Invalid(format!("physics: {e}")))?;
        params
            .validate()
            .map_err(|e| CliError::Invalid(format!("physics: {e}")))?;
        Ok(params)
    }

    /// Every field spelled out, so the echo is independent of default changes.
    fn from_params(params: &VehicleParams) -> Self {
        let mut overrides = match serde_json::to_value(params).expect("params serialize") {
            Value::Object(m) => m,
            _ => unreachable!("params are an object"),
        };
        overrides.remove("layout");
        PhysicsConfig {
            layout: params.layout,
            overrides,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden: vec![12, 8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub track_path: PathBuf,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub rays: SensorConfig,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub episode: EpisodeConfig,
    pub seed: u64,
    #[serde(default = "default_max_generations")]
    pub max_generations: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

/// The parts of an experiment that determine simulation results. Stored in
/// replays and hashed together with the track bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub ga: GaConfig,
    pub physics: VehicleParams,
    pub rays: SensorConfig,
    pub net: NetConfig,
    pub episode: EpisodeConfig,
    pub seed: u64,
    pub max_generations: u64,
}

impl SimSpec {
    pub fn evolution_config(&self, threads: Option<usize>) -> Result<EvolutionConfig, CliError> {
        let cfg = EvolutionConfig {
            ga: self.ga.clone(),
            params: self.physics,
            sensors: self.rays.clone(),
            hidden: self.net.hidden.clone(),
            episode: self.episode.clone(),
            seed: self.seed,
            max_generations: self.max_generations,
            threads,
        };
        cfg.validate()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

/// A fully resolved, validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub track_path: PathBuf,
    pub out_dir: PathBuf,
    pub spec: SimSpec,
}

impl Experiment {
    /// The config as it was actually run, with every default filled in.
    pub fn effective_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            track_path: self.track_path.clone(),
            ga: self.spec.ga.clone(),
            physics: PhysicsConfig::from_params(&self.spec.physics),
            rays: self.spec.rays.clone(),
            net: self.spec.net.clone(),
            episode: self.spec.episode.clone(),
            seed: self.spec.seed,
            max_generations: self.spec.max_generations,
            out_dir: self.out_dir.clone(),
        }
    }
}

/// Reads the config file as a JSON object; no file means an empty one.
pub fn load_config_value(path: Option<&Path>) -> Result<Value, CliError> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let bytes = read_file(path)?;
    let value: Value = serde_json::from_slice(&bytes).map_err(|e| CliError::Parse {
        what: "config",
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if !value.is_object() {
        return Err(CliError::Parse {
            what: "config",
            path: path.to_path_buf(),
            message: "top level must be a JSON object".into(),
        });
    }
    Ok(value)
}

/// A `--a.b-c value` flag: the path is split on dots and dashes become
/// underscores. The value is JSON if it parses as JSON, otherwise a string.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

impl Override {
    pub fn new(key: &str, raw: &str) -> Result<Self, CliError> {
        let path: Vec<String> = key.split('.').map(|p| p.replace('-', "_")).collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::Usage(format!("malformed override key '--{key}'")));
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        Ok(Override { path, value })
    }

    pub fn set(path: &[&str], value: Value) -> Self {
        Override {
            path: path.iter().map(|s| s.to_string()).collect(),
            value,
        }
    }

    pub fn apply(&self, root: &mut Value) -> Result<(), CliError> {
        let (leaf, parents) = self.path.split_last().expect("non-empty path");
        let mut node = root;
        for key in parents {
            let obj = node.as_object_mut().ok_or_else(|| {
                CliError::Usage(format!(
                    "override '{}' descends into a non-object",
                    self.dotted()
                ))
            })?;
            node = obj
                .entry(key.clone())
                .or_insert_with(|| Value::Object(Map::new()));
        }
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Usage(format!(
                "override '{}' descends into a non-object",
                self.dotted()
            ))
        })?;
        obj.insert(leaf.clone(), self.value.clone());
        Ok(())
    }

    fn dotted(&self) -> String {
        self.path.join(".")
    }
}

/// Splits dotted `--a.b value` / `--a.b=value` flags out of an argument list,
/// returning the remaining arguments and the overrides in order.
pub fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<Override>), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (body, None),
        };
        if !key.contains('.') {
            rest.push(arg);
            continue;
        }
        let raw = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| CliError::Usage(format!("override '--{key}' needs a value")))?,
        };
        overrides.push(Override::new(key, &raw)?);
    }
    Ok((rest, overrides))
}

/// Applies overrides to the raw config and resolves it.
pub fn resolve(mut raw: Value, overrides: &[Override]) -> Result<Experiment, CliError> {
    for o in overrides {
        o.apply(&mut raw)?;
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(raw).map_err(|e| CliError::Invalid(e.to_string()))?;
    let physics = cfg.physics.resolve()?;
    let spec = SimSpec {
        ga: cfg.ga,
        physics,
        rays: cfg.rays,
        net: cfg.net,
        episode: cfg.episode,
        seed: cfg.seed,
        max_generations: cfg.max_generations,
    };
    spec.evolution_config(None)?;
    Ok(Experiment {
        track_path: cfg.track_path,
        out_dir: cfg.out_dir,
        spec,
    })
}

/// Evaluator thread cap from the environment. Unset means all cores.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Invalid(format!("{THREADS_ENV}: {e}"))),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Invalid(format!(
                "{THREADS_ENV} must be a positive integer, got '{s}'"
            ))),
        },
    }
}
