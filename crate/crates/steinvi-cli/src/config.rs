//! Experiment configuration: a flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Unknown keys are rejected so typos fail loudly. The resolved
//! configuration is echoed into each run directory as `config.txt` in a
//! fixed key order, which keeps artifacts diffable across runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::{CliError, CliResult};

/// Which algorithm a run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Svgd,
    Psvgd,
    PsvgdAdaptive,
    RwmhReference,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Svgd => "svgd",
            Algorithm::Psvgd => "psvgd",
            Algorithm::PsvgdAdaptive => "psvgd-adaptive",
            Algorithm::RwmhReference => "rwmh-reference",
        }
    }
}

/// Model selection plus its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    LinearGaussian {
        dim: usize,
        observations: usize,
        noise_rel: f64,
        laplacian_scale: f64,
        data_seed: u64,
    },
    ConditionalDiffusion {
        data_seed: u64,
    },
    LogisticSynthetic {
        dim: usize,
        n_data: usize,
        data_seed: u64,
    },
    LogisticFile {
        path: PathBuf,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::LinearGaussian { .. } => "linear-gaussian",
            ModelSpec::ConditionalDiffusion { .. } => "conditional-diffusion",
            ModelSpec::LogisticSynthetic { .. } => "logistic-synthetic",
            ModelSpec::LogisticFile { .. } => "logistic-file",
        }
    }
}

/// Prior selection; `ModelDefault` delegates to the model builder.
#[derive(Clone, Debug, PartialEq)]
pub enum PriorSpec {
    ModelDefault,
    GaussianIdentity,
    GaussianIsotropic { variance: f64 },
    UniformBox { half_width: f64 },
}

/// Step-norm stopping rule as written in config files.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ToleranceSpec {
    None,
    Auto,
    Value(f64),
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub prior: PriorSpec,
    pub algorithm: Algorithm,
    pub particles: usize,
    pub workers: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub line_search: bool,
    pub step_size: f64,
    pub tolerance: ToleranceSpec,
    pub w_tolerance: ToleranceSpec,
    pub bandwidth_fixed: Option<f64>,
    pub eigen_metric: bool,
    pub rank_threshold: f64,
    pub max_rank: Option<usize>,
    pub inner_per_adapt: usize,
    pub rwmh_chain_length: usize,
    pub rwmh_burn_in: usize,
    pub rwmh_proposal_scale: f64,
    pub out_dir: PathBuf,
}

const KNOWN_KEYS: &[&str] = &[
    "model",
    "model.dim",
    "model.observations",
    "model.noise_rel",
    "model.laplacian_scale",
    "model.data_seed",
    "model.n_data",
    "model.path",
    "prior",
    "prior.variance",
    "prior.half_width",
    "algorithm",
    "particles",
    "workers",
    "seed",
    "max_iterations",
    "step",
    "step.size",
    "tolerance",
    "w_tolerance",
    "kernel.bandwidth",
    "kernel.metric",
    "rank_threshold",
    "max_rank",
    "inner_per_adapt",
    "rwmh.chain_length",
    "rwmh.burn_in",
    "rwmh.proposal_scale",
    "out",
];

struct RawConfig {
    map: BTreeMap<String, String>,
}

impl RawConfig {
    fn parse(text: &str) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!(
                    "line {}: unknown key {key:?}",
                    lineno + 1
                )));
            }
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        Ok(Self { map })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<T>()
                .map_err(|_| CliError::config(format!("bad value for {key}: {v:?}"))),
        }
    }
}

fn parse_tolerance(raw: Option<&str>, default: ToleranceSpec) -> CliResult<ToleranceSpec> {
    match raw {
        None => Ok(default),
        Some("none") => Ok(ToleranceSpec::None),
        Some("auto") => Ok(ToleranceSpec::Auto),
        Some(v) => v
            .parse::<f64>()
            .map(ToleranceSpec::Value)
            .map_err(|_| CliError::config(format!("bad tolerance {v:?}"))),
    }
}

impl ExperimentConfig {
    /// Loads and validates a config file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses config text.
    pub fn parse(text: &str) -> CliResult<Self> {
        let raw = RawConfig::parse(text)?;

        let model = match raw.get("model") {
            Some("linear-gaussian") => ModelSpec::LinearGaussian {
                dim: raw.parse_or("model.dim", 17)?,
                observations: raw.parse_or("model.observations", 15)?,
                noise_rel: raw.parse_or("model.noise_rel", 0.01)?,
                laplacian_scale: raw.parse_or("model.laplacian_scale", 0.1)?,
                data_seed: raw.parse_or("model.data_seed", 0)?,
            },
            Some("conditional-diffusion") => ModelSpec::ConditionalDiffusion {
                data_seed: raw.parse_or("model.data_seed", 0)?,
            },
            Some("logistic-synthetic") => ModelSpec::LogisticSynthetic {
                dim: raw.parse_or("model.dim", 50)?,
                n_data: raw.parse_or("model.n_data", 100)?,
                data_seed: raw.parse_or("model.data_seed", 0)?,
            },
            Some("logistic-file") => ModelSpec::LogisticFile {
                path: PathBuf::from(
                    raw.get("model.path")
                        .ok_or_else(|| CliError::config("logistic-file needs model.path"))?,
                ),
            },
            Some(other) => {
                return Err(CliError::config(format!("unknown model {other:?}")));
            }
            None => return Err(CliError::config("missing required key `model`")),
        };

        let prior = match raw.get("prior") {
            None | Some("model-default") => PriorSpec::ModelDefault,
            Some("gaussian-identity") => PriorSpec::GaussianIdentity,
            Some("gaussian-isotropic") => PriorSpec::GaussianIsotropic {
                variance: raw.parse_or("prior.variance", 1.0)?,
            },
            Some("uniform-box") => PriorSpec::UniformBox {
                half_width: raw.parse_or("prior.half_width", 1.0)?,
            },
            Some(other) => return Err(CliError::config(format!("unknown prior {other:?}"))),
        };

        let algorithm = match raw.get("algorithm") {
            Some("svgd") => Algorithm::Svgd,
            Some("psvgd") => Algorithm::Psvgd,
            Some("psvgd-adaptive") => Algorithm::PsvgdAdaptive,
            Some("rwmh-reference") => Algorithm::RwmhReference,
            Some(other) => {
                return Err(CliError::config(format!("unknown algorithm {other:?}")));
            }
            None => return Err(CliError::config("missing required key `algorithm`")),
        };

        let line_search = match raw.get("step") {
            None | Some("line-search") => true,
            Some("fixed") => false,
            Some(other) => return Err(CliError::config(format!("unknown step rule {other:?}"))),
        };

        let bandwidth_fixed = match raw.get("kernel.bandwidth") {
            None | Some("median") => None,
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|_| CliError::config(format!("bad kernel.bandwidth {v:?}")))?,
            ),
        };

        let eigen_metric = match raw.get("kernel.metric") {
            None | Some("eigen-weighted") => true,
            Some("euclidean") => false,
            Some(other) => {
                return Err(CliError::config(format!("unknown kernel.metric {other:?}")));
            }
        };

        let max_rank = match raw.get("max_rank") {
            None | Some("none") => None,
            Some(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| CliError::config(format!("bad max_rank {v:?}")))?,
            ),
        };

        let default_tolerance = match algorithm {
            Algorithm::Svgd | Algorithm::Psvgd => ToleranceSpec::None,
            Algorithm::PsvgdAdaptive => ToleranceSpec::Auto,
            Algorithm::RwmhReference => ToleranceSpec::None,
        };
        // The logistic benchmark refreshes its basis every 100 iterations;
        // the default elsewhere is every 10.
        let default_inner = match model {
            ModelSpec::LogisticSynthetic { .. } | ModelSpec::LogisticFile { .. } => 100,
            _ => 10,
        };

        let config = Self {
            model,
            prior,
            algorithm,
            particles: raw.parse_or("particles", 128)?,
            workers: raw.parse_or("workers", 1)?,
            seed: raw.parse_or("seed", 0)?,
            max_iterations: raw.parse_or("max_iterations", 100)?,
            line_search,
            step_size: raw.parse_or("step.size", 1.0)?,
            tolerance: parse_tolerance(raw.get("tolerance"), default_tolerance)?,
            w_tolerance: parse_tolerance(raw.get("w_tolerance"), ToleranceSpec::Auto)?,
            bandwidth_fixed,
            eigen_metric,
            rank_threshold: raw.parse_or("rank_threshold", 1e-2)?,
            max_rank,
            inner_per_adapt: raw.parse_or("inner_per_adapt", default_inner)?,
            rwmh_chain_length: raw.parse_or("rwmh.chain_length", 100_000)?,
            rwmh_burn_in: raw.parse_or("rwmh.burn_in", 20_000)?,
            rwmh_proposal_scale: raw.parse_or("rwmh.proposal_scale", 0.4)?,
            out_dir: PathBuf::from(raw.get("out").unwrap_or("runs/experiment")),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        if self.particles == 0 {
            return Err(CliError::config("particles must be >= 1"));
        }
        if self.workers == 0 {
            return Err(CliError::config("workers must be >= 1"));
        }
        if self.particles % self.workers != 0 {
            return Err(CliError::config(format!(
                "particles ({}) must be divisible by workers ({})",
                self.particles, self.workers
            )));
        }
        if self.max_iterations == 0 && self.algorithm != Algorithm::RwmhReference {
            return Err(CliError::config("max_iterations must be >= 1"));
        }
        if !(self.step_size > 0.0) {
            return Err(CliError::config("step.size must be positive"));
        }
        if let Some(h) = self.bandwidth_fixed {
            if !(h > 0.0) {
                return Err(CliError::config("kernel.bandwidth must be positive"));
            }
        }
        if !(self.rank_threshold > 0.0) {
            return Err(CliError::config("rank_threshold must be positive"));
        }
        if self.inner_per_adapt == 0 {
            return Err(CliError::config("inner_per_adapt must be >= 1"));
        }
        if matches!(self.model, ModelSpec::LinearGaussian { .. })
            && self.prior != PriorSpec::ModelDefault
        {
            return Err(CliError::config(
                "linear-gaussian fixes its own smoothness prior; use prior = model-default",
            ));
        }
        Ok(())
    }

    /// Deterministic echo of the resolved configuration.
    pub fn echo(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        match &self.model {
            ModelSpec::LinearGaussian {
                dim,
                observations,
                noise_rel,
                laplacian_scale,
                data_seed,
            } => {
                lines.push("model = linear-gaussian".to_string());
                lines.push(format!("model.dim = {dim}"));
                lines.push(format!("model.observations = {observations}"));
                lines.push(format!("model.noise_rel = {noise_rel}"));
                lines.push(format!("model.laplacian_scale = {laplacian_scale}"));
                lines.push(format!("model.data_seed = {data_seed}"));
            }
            ModelSpec::ConditionalDiffusion { data_seed } => {
                lines.push("model = conditional-diffusion".to_string());
                lines.push(format!("model.data_seed = {data_seed}"));
            }
            ModelSpec::LogisticSynthetic {
                dim,
                n_data,
                data_seed,
            } => {
                lines.push("model = logistic-synthetic".to_string());
                lines.push(format!("model.dim = {dim}"));
                lines.push(format!("model.n_data = {n_data}"));
                lines.push(format!("model.data_seed = {data_seed}"));
            }
            ModelSpec::LogisticFile { path } => {
                lines.push("model = logistic-file".to_string());
                lines.push(format!("model.path = {}", path.display()));
            }
        }
        match &self.prior {
            PriorSpec::ModelDefault => lines.push("prior = model-default".to_string()),
            PriorSpec::GaussianIdentity => lines.push("prior = gaussian-identity".to_string()),
            PriorSpec::GaussianIsotropic { variance } => {
                lines.push("prior = gaussian-isotropic".to_string());
                lines.push(format!("prior.variance = {variance}"));
            }
            PriorSpec::UniformBox { half_width } => {
                lines.push("prior = uniform-box".to_string());
                lines.push(format!("prior.half_width = {half_width}"));
            }
        }
        lines.push(format!("algorithm = {}", self.algorithm.as_str()));
        lines.push(format!("particles = {}", self.particles));
        lines.push(format!("workers = {}", self.workers));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("max_iterations = {}", self.max_iterations));
        lines.push(format!(
            "step = {}",
            if self.line_search { "line-search" } else { "fixed" }
        ));
        lines.push(format!("step.size = {}", self.step_size));
        lines.push(format!("tolerance = {}", tolerance_str(self.tolerance)));
        lines.push(format!("w_tolerance = {}", tolerance_str(self.w_tolerance)));
        lines.push(format!(
            "kernel.bandwidth = {}",
            match self.bandwidth_fixed {
                None => "median".to_string(),
                Some(h) => h.to_string(),
            }
        ));
        lines.push(format!(
            "kernel.metric = {}",
            if self.eigen_metric { "eigen-weighted" } else { "euclidean" }
        ));
        lines.push(format!("rank_threshold = {}", self.rank_threshold));
        lines.push(format!(
            "max_rank = {}",
            match self.max_rank {
                None => "none".to_string(),
                Some(r) => r.to_string(),
            }
        ));
        lines.push(format!("inner_per_adapt = {}", self.inner_per_adapt));
        lines.push(format!("rwmh.chain_length = {}", self.rwmh_chain_length));
        lines.push(format!("rwmh.burn_in = {}", self.rwmh_burn_in));
        lines.push(format!("rwmh.proposal_scale = {}", self.rwmh_proposal_scale));
        lines.push(format!("out = {}", self.out_dir.display()));
        lines.join("\n") + "\n"
    }
}

fn tolerance_str(t: ToleranceSpec) -> String {
    match t {
        ToleranceSpec::None => "none".to_string(),
        ToleranceSpec::Auto => "auto".to_string(),
        ToleranceSpec::Value(v) => v.to_string(),
    }
}
