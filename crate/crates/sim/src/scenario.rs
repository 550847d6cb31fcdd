//! Campaign description, read from TOML.

use std::path::Path;

use noma_core::baselines::FtpcConfig;
use noma_core::usma::Usma2Config;
use noma_core::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Parameter a campaign can sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "M", alias = "num_users")]
    NumUsers,
    #[serde(rename = "d_f", alias = "df")]
    Df,
    #[serde(rename = "d_v", alias = "dv")]
    Dv,
}

impl SweepVariable {
    pub fn label(self) -> &'static str {
        match self {
            SweepVariable::NumUsers => "M",
            SweepVariable::Df => "d_f",
            SweepVariable::Dv => "d_v",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "M" | "num_users" => Ok(SweepVariable::NumUsers),
            "d_f" | "df" => Ok(SweepVariable::Df),
            "d_v" | "dv" => Ok(SweepVariable::Dv),
            other => Err(SimError::Config(format!(
                "unknown sweep variable `{other}`"
            ))),
        }
    }

    pub fn apply(self, config: &SystemConfig, value: usize) -> SystemConfig {
        let mut c = config.clone();
        match self {
            SweepVariable::NumUsers => c.num_users = value,
            SweepVariable::Df => c.df = value,
            SweepVariable::Dv => c.dv = value,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<usize>,
}

impl SweepSpec {
    /// Parse the command-line form `var=v1,v2,...`.
    pub fn parse(s: &str) -> Result<Self> {
        let (var, vals) = s
            .split_once('=')
            .ok_or_else(|| SimError::Config(format!("sweep `{s}` must look like var=v1,v2")))?;
        let values = vals
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| SimError::Config(format!("bad sweep value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepSpec {
            variable: SweepVariable::parse(var.trim())?,
            values,
        })
    }
}

/// Outer-loop settings shared by both joint variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JspaSection {
    pub max_outer_iters: usize,
    pub convergence_tol: f64,
}

impl Default for JspaSection {
    fn default() -> Self {
        JspaSection {
            max_outer_iters: 50,
            convergence_tol: 1e-4,
        }
    }
}

fn default_trials() -> usize {
    1
}

fn default_slots() -> usize {
    30
}

fn default_ofdma_subchannels() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scheme: String,
    #[serde(default = "default_trials")]
    pub num_trials: usize,
    #[serde(default = "default_slots")]
    pub num_slots: usize,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub jspa: JspaSection,
    #[serde(default)]
    pub usma2: Usma2Config,
    #[serde(default)]
    pub ftpc: FtpcConfig,
    /// Divide the Jain index by the sub-channel count instead of the user count.
    #[serde(default)]
    pub jain_paper_denominator: bool,
    /// Sub-channel count of the orthogonal baseline over the same bandwidth.
    #[serde(default = "default_ofdma_subchannels")]
    pub ofdma_subchannels: usize,
    /// Power-grid resolution for the brute-force scheme; exact solve when unset.
    #[serde(default)]
    pub oracle_grid_steps: Option<usize>,
}

impl ScenarioSpec {
    pub fn new(scheme: &str, system: SystemConfig) -> Self {
        ScenarioSpec {
            scheme: scheme.to_string(),
            num_trials: default_trials(),
            num_slots: default_slots(),
            system,
            sweep: None,
            jspa: JspaSection::default(),
            usma2: Usma2Config::default(),
            ftpc: FtpcConfig::default(),
            jain_paper_denominator: false,
            ofdma_subchannels: default_ofdma_subchannels(),
            oracle_grid_steps: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// System configs to run, paired with their sweep value.
    pub fn points(&self) -> Vec<(Option<usize>, SystemConfig)> {
        match &self.sweep {
            None => vec![(None, self.system.clone())],
            Some(s) => s
                .values
                .iter()
                .map(|&v| (Some(v), s.variable.apply(&self.system, v)))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trials == 0 || self.num_slots == 0 {
            return Err(SimError::Config(
                "num_trials and num_slots must be positive".into(),
            ));
        }
        if self.ofdma_subchannels == 0 {
            return Err(SimError::Config(
                "ofdma_subchannels must be positive".into(),
            ));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(SimError::Config("sweep needs at least one value".into()));
            }
        }
        for (_, c) in self.points() {
            c.validate()?;
        }
        if self.jspa.max_outer_iters == 0 || !(self.jspa.convergence_tol > 0.0) {
            return Err(SimError::Config(
                "jspa.max_outer_iters and jspa.convergence_tol must be positive".into(),
            ));
        }
        self.usma2.validate()?;
        self.ftpc.validate()?;
        Ok(())
    }
}
