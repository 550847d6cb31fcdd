//! Monte-Carlo campaigns: independent seeded trials, each a sequence of
//! slots with proportional-fairness weights carried between them.

use noma_core::jspa::{update_weights, RateHistory};
use noma_core::{Allocation, SystemConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{drop_users, fade};
use crate::error::{Result, SimError};
use crate::metrics::{jain_index, mean_std, scheduled_user_count, spectral_efficiency};
use crate::scenario::ScenarioSpec;
use crate::scheme::{Scheme, SchemeRegistry};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` lets the pool pick.
    pub parallel: Option<usize>,
    /// Keep every slot's allocation in the trial results.
    pub keep_allocations: bool,
}

/// One aggregated output line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scheme: String,
    pub sweep_var: Option<String>,
    pub sweep_value: Option<usize>,
    /// Trials that completed.
    pub trials: usize,
    pub spectral_eff_mean: f64,
    pub spectral_eff_std: f64,
    pub sched_users_mean: f64,
    pub jain_mean: f64,
    pub outer_iters_mean: f64,
    pub swap_count_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    /// Mean over slots of the unweighted sum-rate per Hz.
    pub spectral_efficiency: f64,
    pub scheduled_users: f64,
    pub jain: f64,
    pub outer_iters: f64,
    pub swap_count: f64,
    /// Per-user rate averaged over all slots.
    pub avg_rates: Vec<f64>,
    /// Per-slot spectral efficiency.
    pub slot_spectral_efficiency: Vec<f64>,
    pub allocations: Vec<Allocation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub sweep_value: Option<usize>,
    pub trial: usize,
    pub seed: u64,
    pub outcome: std::result::Result<TrialMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub rows: Vec<MetricsRow>,
    pub trials: Vec<TrialResult>,
    pub failures: usize,
}

impl CampaignResult {
    pub fn all_failed(&self) -> bool {
        !self.trials.is_empty() && self.failures == self.trials.len()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one trial, a hash of the base seed, the sweep value and the index.
pub fn trial_seed(base_seed: u64, sweep_value: Option<usize>, trial: usize) -> u64 {
    let sv = sweep_value.map_or(u64::MAX, |v| v as u64);
    splitmix64(splitmix64(splitmix64(base_seed) ^ sv) ^ trial as u64)
}

/// Run one trial of `scheme` under `config`.
///
/// Users are dropped once per trial and every slot draws new fading. Channel
/// draws and the scheme's own randomness use separate streams of the same
/// seed, so schemes on the same sub-channel grid see identical channels.
pub fn run_trial(
    scheme: &dyn Scheme,
    config: &SystemConfig,
    spec: &ScenarioSpec,
    seed: u64,
    keep_allocations: bool,
) -> std::result::Result<TrialMetrics, String> {
    let config = scheme.effective_config(config);
    let k = config.num_subchannels;
    let mut chan_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut algo_rng = ChaCha8Rng::seed_from_u64(seed);
    algo_rng.set_stream(1);

    let distances = drop_users(&config, &mut chan_rng);
    let mut history = RateHistory::new(config.num_users, config.avg_window_slots);
    let mut total_rates = vec![0.0; config.num_users];
    let (mut se, mut sched, mut iters, mut swaps) = (Vec::new(), 0.0, 0.0, 0.0);
    let mut allocations = Vec::new();

    for _ in 0..spec.num_slots {
        let ch = fade(&config, &distances, k, &mut chan_rng);
        let weights = update_weights(&history.average(), config.weight_scale);
        let out = scheme
            .allocate(&ch, &config, &weights, &mut algo_rng)
            .map_err(|e| e.to_string())?;
        let rates = out.allocation.user_rates();
        for (t, r) in total_rates.iter_mut().zip(&rates) {
            *t += r;
        }
        history.push(rates);
        se.push(spectral_efficiency(&out.allocation));
        sched += scheduled_user_count(&out.allocation, config.total_power_watts) as f64;
        iters += out.outer_iters as f64;
        swaps += out.swap_count as f64;
        if keep_allocations {
            allocations.push(out.allocation);
        }
    }

    let n = spec.num_slots as f64;
    let avg_rates: Vec<f64> = total_rates.iter().map(|t| t / n).collect();
    let denominator = spec.jain_paper_denominator.then_some(k);
    let jain = jain_index(&avg_rates, denominator).map_err(|e| e.to_string())?;
    Ok(TrialMetrics {
        spectral_efficiency: se.iter().sum::<f64>() / n,
        scheduled_users: sched / n,
        jain,
        outer_iters: iters / n,
        swap_count: swaps / n,
        avg_rates,
        slot_spectral_efficiency: se,
        allocations,
    })
}

/// Run every sweep point and trial of `spec` and aggregate one row per point.
pub fn run_campaign(spec: &ScenarioSpec, options: RunOptions) -> Result<CampaignResult> {
    spec.validate()?;
    let registry = SchemeRegistry::standard(spec);
    let scheme = registry.get(&spec.scheme)?;
    let base_seed = spec.system.rng_seed;

    let jobs: Vec<(Option<usize>, SystemConfig, usize)> = spec
        .points()
        .into_iter()
        .flat_map(|(v, c)| (0..spec.num_trials).map(move |t| (v, c.clone(), t)))
        .collect();

    let work = || -> Vec<TrialResult> {
        jobs.par_iter()
            .map(|(v, c, t)| {
                let seed = trial_seed(base_seed, *v, *t);
                TrialResult {
                    sweep_value: *v,
                    trial: *t,
                    seed,
                    outcome: run_trial(scheme, c, spec, seed, options.keep_allocations),
                }
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallel.unwrap_or(0))
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    let trials = pool.install(work);

    let sweep_var = spec.sweep.as_ref().map(|s| s.variable.label().to_string());
    let rows = spec
        .points()
        .into_iter()
        .map(|(v, _)| {
            let ok: Vec<&TrialMetrics> = trials
                .iter()
                .filter(|t| t.sweep_value == v)
                .filter_map(|t| t.outcome.as_ref().ok())
                .collect();
            let col = |f: fn(&TrialMetrics) -> f64| ok.iter().map(|m| f(m)).collect::<Vec<_>>();
            let (se_mean, se_std) = mean_std(&col(|m| m.spectral_efficiency));
            MetricsRow {
                scheme: spec.scheme.clone(),
                sweep_var: sweep_var.clone(),
                sweep_value: v,
                trials: ok.len(),
                spectral_eff_mean: se_mean,
                spectral_eff_std: se_std,
                sched_users_mean: mean_std(&col(|m| m.scheduled_users)).0,
                jain_mean: mean_std(&col(|m| m.jain)).0,
                outer_iters_mean: mean_std(&col(|m| m.outer_iters)).0,
                swap_count_mean: mean_std(&col(|m| m.swap_count)).0,
            }
        })
        .collect();
    let failures = trials.iter().filter(|t| t.outcome.is_err()).count();
    Ok(CampaignResult {
        rows,
        trials,
        failures,
    })
}
