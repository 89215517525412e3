// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration: a single JSON document, validated at load time.

use std::fs;
use std::path::{Path, PathBuf};

use bqcd_core::models::{ArModel, DeterministicDrift, Density, ExpModel, MixtureModel, StateSpaceModel};
use bqcd_core::{Error as CoreError, Prior};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Exponential {
        #[serde(rename = "Q")]
        q: f64,
    },
    Ar {
        theta: f64,
        sigma: f64,
        #[serde(default)]
        deltas: Vec<f64>,
    },
    StateSpace {
        #[serde(rename = "F")]
        f: Vec<Vec<f64>>,
        #[serde(rename = "K_W")]
        k_w: Vec<Vec<f64>>,
        #[serde(rename = "K_V")]
        k_v: Vec<Vec<f64>>,
        nu_theta: Vec<f64>,
        nu_x: Vec<f64>,
    },
    Mixture {
        beta: f64,
        g1: Density,
        g2: Density,
        f1: Density,
    },
    Drift {
        q: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Geometric { rho: f64 },
    Tabulated { weights: Vec<f64> },
    /// One weight per line, or `k,weight` rows; relative to the config file.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationSpec {
    #[default]
    Conservative,
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignKind {
    Pfa,
    Add,
    CondAdd,
    Slope,
}

impl CampaignKind {
    pub fn name(self) -> &'static str {
        match self {
            CampaignKind::Pfa => "pfa",
            CampaignKind::Add => "add",
            CampaignKind::CondAdd => "cond_add",
            CampaignKind::Slope => "slope",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OvershootSpec {
    pub b: Option<f64>,
    pub n_trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    /// Change point; absent means no change.
    pub k: Option<usize>,
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub prior: PriorSpec,
    pub alpha: Option<f64>,
    #[serde(rename = "A")]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    pub overshoot: Option<OvershootSpec>,
    pub campaign: Option<CampaignKind>,
    pub horizon: Option<usize>,
    pub n_trials: Option<usize>,
    pub seed: Option<u64>,
    pub m_list: Option<Vec<u32>>,
    pub k_list: Option<Vec<usize>>,
    #[serde(rename = "A_grid")]
    pub a_grid: Option<Vec<f64>>,
    #[serde(rename = "B")]
    pub shiryaev_threshold: Option<f64>,
    pub trace: Option<TraceSpec>,
    pub outputs: Option<OutputSpec>,
}

pub enum AnyModel {
    Exponential(ExpModel),
    Ar(ArModel),
    StateSpace(StateSpaceModel),
    Mixture(MixtureModel),
    Drift(DeterministicDrift),
}

/// Runs `$body` with `$m` bound to the concrete model.
macro_rules! with_model {
    ($any:expr, $m:ident => $body:expr) => {
        match $any {
            $crate::config::AnyModel::Exponential($m) => $body,
            $crate::config::AnyModel::Ar($m) => $body,
            $crate::config::AnyModel::StateSpace($m) => $body,
            $crate::config::AnyModel::Mixture($m) => $body,
            $crate::config::AnyModel::Drift($m) => $body,
        }
    };
}
pub(crate) use with_model;

/// A parsed and validated configuration.
pub struct Loaded {
    pub config: RunConfig,
    pub model: AnyModel,
    pub prior: Prior,
    /// SHA-256 of the canonical (key-sorted) JSON document.
    pub hash: String,
}

fn key_error(prefix: &str, err: CoreError) -> CliError {
    match err {
        CoreError::InvalidParameter { name, reason } => CliError::config(format!("{prefix}.{name}"), reason),
        other => CliError::config(prefix, other.to_string()),
    }
}

fn check(ok: bool, key: &str, reason: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(key, reason))
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<AnyModel, CliError> {
        let model = match self {
            ModelSpec::Exponential { q } => ExpModel::new(*q).map(AnyModel::Exponential),
            ModelSpec::Ar { theta, sigma, deltas } => ArModel::new(*theta, *sigma, deltas.clone()).map(AnyModel::Ar),
            ModelSpec::StateSpace { f, k_w, k_v, nu_theta, nu_x } => {
                StateSpaceModel::from_rows(f, k_w, k_v, nu_theta, nu_x).map(AnyModel::StateSpace)
            }
            ModelSpec::Mixture { beta, g1, g2, f1 } => MixtureModel::new(*beta, *g1, *g2, *f1).map(AnyModel::Mixture),
            ModelSpec::Drift { q } => DeterministicDrift::new(*q).map(AnyModel::Drift),
        };
        model.map_err(|e| key_error("model", e))
    }
}

impl PriorSpec {
    pub fn build(&self, base: &Path) -> Result<Prior, CliError> {
        match self {
            PriorSpec::Geometric { rho } => Prior::geometric(*rho).map_err(|e| key_error("prior", e)),
            PriorSpec::Tabulated { weights } => Prior::tabulated(weights).map_err(|e| key_error("prior", e)),
            PriorSpec::Csv { path } => {
                let full = base.join(path);
                let file = fs::File::open(&full)
                    .map_err(|e| CliError::config("prior.path", format!("{}: {e}", full.display())))?;
                Prior::from_csv(file).map_err(|e| CliError::config("prior.path", e.to_string()))
            }
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        match (self.alpha, self.threshold) {
            (None, None) => return Err(CliError::config("alpha", "exactly one of `alpha` and `A` is required")),
            (Some(_), Some(_)) => return Err(CliError::config("A", "give either `alpha` or `A`, not both")),
            _ => {}
        }
        if let Some(alpha) = self.alpha {
            check(alpha > 0.0 && alpha < 1.0, "alpha", "must lie in (0, 1)")?;
        }
        if let Some(a) = self.threshold {
            check(a > 1.0 && a.is_finite(), "A", "must be a finite number greater than 1")?;
            check(
                self.calibration == CalibrationSpec::Conservative,
                "calibration",
                "calibration applies only when `alpha` is given",
            )?;
        }
        if let Some(o) = &self.overshoot {
            if let Some(b) = o.b {
                check(b > 0.0 && b.is_finite(), "overshoot.b", "must be positive")?;
            }
            if let Some(n) = o.n_trials {
                check(n >= 2, "overshoot.n_trials", "must be at least 2")?;
            }
        }
        if let Some(h) = self.horizon {
            check(h >= 1, "horizon", "must be at least 1")?;
        }
        if let Some(n) = self.n_trials {
            check(n >= 1, "n_trials", "must be at least 1")?;
        }
        if let Some(m) = &self.m_list {
            check(!m.is_empty() && m.iter().all(|&v| v >= 1), "m_list", "must be a nonempty list of positive integers")?;
        }
        if let Some(k) = &self.k_list {
            check(!k.is_empty() && k.iter().all(|&v| v >= 1), "k_list", "must be a nonempty list of positive integers")?;
        }
        if let Some(grid) = &self.a_grid {
            check(
                !grid.is_empty() && grid.iter().all(|a| *a > 1.0 && a.is_finite()),
                "A_grid",
                "thresholds must be finite and greater than 1",
            )?;
        }
        if let Some(b) = self.shiryaev_threshold {
            check(b > 0.0 && b < 1.0, "B", "must lie in (0, 1)")?;
        }
        if let Some(t) = &self.trace {
            if let Some(k) = t.k {
                check(k >= 1, "trace.k", "must be at least 1")?;
            }
            if let Some(n) = t.n_max {
                check(n >= 1, "trace.n_max", "must be at least 1")?;
            }
        }
        Ok(())
    }
}

pub fn config_hash(value: &serde_json::Value) -> String {
    // serde_json maps are ordered by key, so this text is canonical.
    let text = serde_json::to_string(value).expect("JSON values always serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse(text: &str, base: &Path) -> Result<Loaded, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::config("<document>", format!("not valid JSON: {e}")))?;
    let config: RunConfig = serde_path_to_error::deserialize(value.clone()).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<document>".to_string() } else { path };
        CliError::config(key, e.into_inner().to_string())
    })?;
    config.validate()?;
    let model = config.model.build()?;
    let prior = config.prior.build(base)?;
    Ok(Loaded {
        hash: config_hash(&value),
        config,
        model,
        prior,
    })
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
    parse(&text, path.parent().unwrap_or(Path::new(".")))
}
