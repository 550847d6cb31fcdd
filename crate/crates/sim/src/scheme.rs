//! Allocation schemes behind a common trait, looked up by name.

use std::collections::BTreeMap;

use noma_core::baselines::{
    brute_force_joint, ofdma_baseline, prop2_relaxed_optimum, ra_noma, ug_ftpc, FtpcConfig,
    OracleMode,
};
use noma_core::jspa::{jspa_run, JspaConfig, JspaVariant};
use noma_core::{Allocation, ChannelRealization, SystemConfig, UserWeights};
use rand::RngCore;

use crate::error::{Result, SimError};
use crate::scenario::ScenarioSpec;

/// What one scheme produced for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub allocation: Allocation,
    pub outer_iters: usize,
    pub swap_count: usize,
}

impl SlotOutcome {
    fn one_shot(allocation: Allocation) -> Self {
        SlotOutcome {
            allocation,
            outer_iters: 0,
            swap_count: 0,
        }
    }
}

pub trait Scheme: Send + Sync {
    fn name(&self) -> &str;

    /// Configuration the scheme actually runs with (it may change the
    /// sub-channel count or the quotas).
    fn effective_config(&self, config: &SystemConfig) -> SystemConfig {
        config.clone()
    }

    fn allocate(
        &self,
        ch: &ChannelRealization,
        config: &SystemConfig,
        weights: &UserWeights,
        rng: &mut dyn RngCore,
    ) -> noma_core::Result<SlotOutcome>;
}

pub struct Jspa {
    name: &'static str,
    cfg: JspaConfig,
}

impl Jspa {
    pub fn new(cfg: JspaConfig) -> Self {
        let name = match cfg.variant {
            JspaVariant::Jspa1 => "jspa1",
            JspaVariant::Jspa2 => "jspa2",
        };
        Jspa { name, cfg }
    }
}

impl Scheme for Jspa {
    fn name(&self) -> &str {
        self.name
    }

    fn allocate(
        &self,
        ch: &ChannelRealization,
        config: &SystemConfig,
        weights: &UserWeights,
        rng: &mut dyn RngCore,
    ) -> noma_core::Result<SlotOutcome> {
        let r = jspa_run(ch, config, weights, &self.cfg, rng).map_err(|f| f.error)?;
        Ok(SlotOutcome {
            allocation: r.allocation,
            outer_iters: r.outer_iters,
            swap_count: r.swap_count,
        })
    }
}

pub struct RaNoma;

impl Scheme for RaNoma {
    fn name(&self) -> &str {
        "ra_noma"
    }

    fn allocate(
        &self,
        ch: &ChannelRealization,
        config: &SystemConfig,
        _weights: &UserWeights,
        rng: &mut dyn RngCore,
    ) -> noma_core::Result<SlotOutcome> {
        Ok(SlotOutcome::one_shot(ra_noma(ch, config, rng)))
    }
}

pub struct UgFtpc(pub FtpcConfig);

impl Scheme for UgFtpc {
    fn name(&self) -> &str {
        "ug_ftpc"
    }

    fn allocate(
        &self,
        ch: &ChannelRealization,
        config: &SystemConfig,
        _weights: &UserWeights,
        _rng: &mut dyn RngCore,
    ) -> noma_core::Result<SlotOutcome> {
        Ok(SlotOutcome::one_shot(ug_ftpc(ch, config, &self.0)))
    }
}

/// Orthogonal baseline on its own, finer sub-channel grid.
pub struct Ofdma {
    pub num_subchannels: usize,
}

impl Scheme for Ofdma {
    fn name(&self) -> &str {
        "ofdma"
    }

    fn effective_config(&self, config: &SystemConfig) -> SystemConfig {
        SystemConfig {
            num_subchannels: self.num_subchannels,
            df: 1,
            dv: config.dv.min(self.num_subchannels),
            ..config.clone()
        }
    }

    fn allocate(
        &self,
        ch: &ChannelRealization,
        config: &SystemConfig,
        weights: &UserWeights,
        _rng: &mut dyn RngCore,
    ) -> noma_core::Result<SlotOutcome> {
        Ok(SlotOutcome::one_shot(ofdma_baseline(ch, config, weights)))
    }
}

pub struct Prop2;

impl Scheme for Prop2 {
    fn name(&self) -> &str {
        "prop2"
    }

    fn allocate(
        &self,
        ch: &ChannelRealization,
        config: &SystemConfig,
        _weights: &UserWeights,
        _rng: &mut dyn RngCore,
    ) -> noma_core::Result<SlotOutcome> {
        Ok(SlotOutcome::one_shot(prop2_relaxed_optimum(ch, config)))
    }
}

pub struct BruteForce(pub OracleMode);

impl Scheme for BruteForce {
    fn name(&self) -> &str {
        "brute_force"
    }

    fn allocate(
        &self,
        ch: &ChannelRealization,
        config: &SystemConfig,
        weights: &UserWeights,
        _rng: &mut dyn RngCore,
    ) -> noma_core::Result<SlotOutcome> {
        Ok(SlotOutcome::one_shot(brute_force_joint(
            ch, config, weights, self.0,
        )?))
    }
}

/// Schemes keyed by name.
#[derive(Default)]
pub struct SchemeRegistry {
    schemes: BTreeMap<String, Box<dyn Scheme>>,
}

impl SchemeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every built-in scheme, parameterized from `spec`.
    pub fn standard(spec: &ScenarioSpec) -> Self {
        let jspa = |variant| JspaConfig {
            variant,
            max_outer_iters: spec.jspa.max_outer_iters,
            convergence_tol: spec.jspa.convergence_tol,
            usma2: spec.usma2,
        };
        let mut r = Self::new();
        r.register(Box::new(Jspa::new(jspa(JspaVariant::Jspa1))));
        r.register(Box::new(Jspa::new(jspa(JspaVariant::Jspa2))));
        r.register(Box::new(RaNoma));
        r.register(Box::new(UgFtpc(spec.ftpc)));
        r.register(Box::new(Ofdma {
            num_subchannels: spec.ofdma_subchannels,
        }));
        r.register(Box::new(Prop2));
        r.register(Box::new(BruteForce(match spec.oracle_grid_steps {
            Some(steps) => OracleMode::Grid(steps),
            None => OracleMode::Exact,
        })));
        r
    }

    /// Add a scheme, replacing any previous one with the same name.
    pub fn register(&mut self, scheme: Box<dyn Scheme>) {
        self.schemes.insert(scheme.name().to_string(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Scheme> {
        self.schemes
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| SimError::UnknownScheme(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.schemes.keys().map(String::as_str)
    }
}
