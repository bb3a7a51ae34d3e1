//! Flat `key = value` experiment configuration with flag and environment
//! overrides.

use std::path::Path;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "TG_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CheckTransport,
    BenchMvn,
    BenchMixture,
    SgviToy,
    AdaptAvf,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::CheckTransport => "check-transport",
            Experiment::BenchMvn => "bench-mvn",
            Experiment::BenchMixture => "bench-mixture",
            Experiment::SgviToy => "sgvi-toy",
            Experiment::AdaptAvf => "adapt-avf",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(de: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(de)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

/// Every key is optional; commands supply their own defaults. List-valued
/// keys accept a scalar or an array in the file and a comma-separated list
/// on the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Command to run when none is given positionally.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,

    /// Dimensions D.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub dim: Option<Vec<usize>>,

    /// Mixture component counts K.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<usize>>,

    /// Mixture families, or `all`.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub family: Option<Vec<String>>,

    /// Estimator tags.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<String>>,

    /// Test functions.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub test_function: Option<Vec<String>>,

    /// Monte Carlo samples (points per instance for check-transport).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// AVF rank M.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,

    /// Off-diagonal scales r.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub r_sweep: Option<Vec<f64>>,

    /// Optimization steps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,

    /// CSV destination; standard output when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size_theta: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size_lambda: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_step: Option<usize>,

    /// Scale of the random AVF initialization.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,

    /// Number of independent seeds (sgvi-toy).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,

    /// Gumbel-Softmax temperature.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,

    /// Bootstrap resamples for confidence intervals.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<usize>,

    /// check-transport field set: `positive` or `negative-example`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $(if $src.$f.is_some() { $dst.$f = $src.$f.clone(); })*
    };
}

impl ExperimentConfig {
    pub fn parse_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_toml(&text)
    }

    /// Keys set in `other` replace those in `self`.
    pub fn overlay(mut self, other: &ExperimentConfig) -> Self {
        overlay!(
            self,
            other,
            experiment,
            dim,
            components,
            family,
            estimators,
            test_function,
            samples,
            seed,
            rank,
            r_sweep,
            steps,
            out,
            step_size_theta,
            step_size_lambda,
            samples_per_step,
            init_scale,
            seeds,
            temperature,
            bootstrap,
            field
        );
        self
    }

    /// Applies `TG_SEED` when set.
    pub fn with_env_seed(mut self, value: Option<&str>) -> CliResult<Self> {
        if let Some(v) = value {
            let seed = v.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}={v} is not a u64 seed")))?;
            self.seed = Some(seed);
        }
        Ok(self)
    }

    /// Hex SHA-256 of the canonical TOML rendering, excluding the output path.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { out: None, ..self.clone() };
        let text = toml::to_string(&canonical).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> CliResult<()> {
        let positive = |name: &str, v: Option<usize>| match v {
            Some(0) => Err(CliError::Config(format!("{name} must be >= 1"))),
            _ => Ok(()),
        };
        positive("samples", self.samples)?;
        positive("rank", self.rank)?;
        positive("samples_per_step", self.samples_per_step)?;
        positive("seeds", self.seeds)?;
        positive("bootstrap", self.bootstrap)?;
        for (name, list) in [("dim", &self.dim), ("components", &self.components)] {
            if let Some(xs) = list {
                if xs.is_empty() || xs.contains(&0) {
                    return Err(CliError::Config(format!("{name} entries must be >= 1")));
                }
            }
        }
        for (name, v) in
            [("step_size_theta", self.step_size_theta), ("step_size_lambda", self.step_size_lambda), ("init_scale", self.init_scale)]
        {
            if let Some(x) = v {
                if !(x >= 0.0) || !x.is_finite() {
                    return Err(CliError::Config(format!("{name} must be finite and >= 0, got {x}")));
                }
            }
        }
        if let Some(t) = self.temperature {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CliError::Config(format!("temperature must be > 0, got {t}")));
            }
        }
        if let Some(rs) = &self.r_sweep {
            if rs.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                return Err(CliError::Config("r_sweep entries must be finite and >= 0".into()));
            }
        }
        if let Some(f) = &self.field {
            if f != "positive" && f != "negative-example" {
                return Err(CliError::Config(format!("field must be positive or negative-example, got {f}")));
            }
        }
        Ok(())
    }

    pub fn seed_or(&self, default: u64) -> u64 {
        self.seed.unwrap_or(default)
    }
}
