//! The joint loop: alternate sub-channel matching with power optimization
//! until the weighted sum-rate settles, and the proportional-fairness weights
//! that carry across time slots.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Allocation, ChannelRealization, Matching, PowerAllocation, SystemConfig, UserWeights,
};
use crate::power::{equal_power, optimize_power};
use crate::usma::{usma1_initialize, usma1_swap_phase, usma2_run_with_incumbent, Usma2Config};

/// Average-rate floor (bps/Hz) used when turning averages into weights.
pub const RATE_FLOOR: f64 = 1e-6;
/// Average rate assumed for every user before any slot has been served.
pub const INITIAL_AVG_RATE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JspaVariant {
    Jspa1,
    Jspa2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JspaConfig {
    pub variant: JspaVariant,
    pub max_outer_iters: usize,
    pub convergence_tol: f64,
    pub usma2: Usma2Config,
}

impl Default for JspaConfig {
    fn default() -> Self {
        JspaConfig {
            variant: JspaVariant::Jspa1,
            max_outer_iters: 50,
            convergence_tol: 1e-4,
            usma2: Usma2Config::default(),
        }
    }
}

impl JspaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be positive".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config("convergence_tol must be positive".into()));
        }
        self.usma2.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JspaReport {
    pub allocation: Allocation,
    /// Outer iterations performed.
    pub outer_iters: usize,
    /// `U_total` of the initial allocation followed by one entry per iteration.
    pub utility_trace: Vec<f64>,
    pub converged: bool,
    /// Swaps executed (USMA-1) or accepted (USMA-2), summed over iterations.
    pub swap_count: usize,
    /// Iterations whose result was worse than the incumbent and was discarded.
    pub rejected_iterates: usize,
    /// Largest relative drop among discarded iterates.
    pub max_rejected_drop: f64,
}

/// Failure inside the joint loop, with the last consistent allocation.
#[derive(Debug)]
pub struct JspaFailure {
    pub error: Error,
    pub last: Box<Allocation>,
}

impl std::fmt::Display for JspaFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "joint allocation failed: {}", self.error)
    }
}

impl std::error::Error for JspaFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// `w_j = a / max(avg_j, RATE_FLOOR)`.
pub fn update_weights(avg_rates: &[f64], a: f64) -> UserWeights {
    UserWeights::new(avg_rates.iter().map(|r| a / r.max(RATE_FLOOR)).collect())
        .expect("positive scale and floored rates give positive weights")
}

/// Run the joint loop on one channel realization.
pub fn jspa_run<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    config: &SystemConfig,
    weights: &UserWeights,
    cfg: &JspaConfig,
    rng: &mut R,
) -> std::result::Result<JspaReport, JspaFailure> {
    let budget = config.total_power_watts;
    let initial = match cfg.variant {
        JspaVariant::Jspa1 => usma1_initialize(ch, config, weights),
        JspaVariant::Jspa2 => crate::usma::random_feasible_matching(
            ch.num_users(),
            ch.num_subchannels(),
            config.df,
            config.dv,
            rng,
        ),
    };
    let power = equal_power(&initial, budget);
    let mut current =
        Allocation::evaluate(ch, initial, power, weights).map_err(|error| JspaFailure {
            error,
            last: Box::new(Allocation::empty(ch, config.df, config.dv)),
        })?;

    let mut trace = vec![current.total_utility];
    let mut swap_count = 0;
    let mut rejected = 0;
    let mut max_drop: f64 = 0.0;
    let mut converged = false;
    let mut iters = 0;

    while iters < cfg.max_outer_iters {
        iters += 1;
        let (matching, swaps) = match cfg.variant {
            JspaVariant::Jspa1 => {
                let r = usma1_swap_phase(
                    ch,
                    current.matching.clone(),
                    current.power.clone(),
                    weights,
                    config.eps_swap,
                );
                (r.final_matching, r.swap_count)
            }
            JspaVariant::Jspa2 => {
                let r = usma2_run_with_incumbent(
                    ch,
                    config,
                    weights,
                    &cfg.usma2,
                    Some(&current.matching),
                    rng,
                );
                (r.best_matching, r.accepted_swaps)
            }
        };
        swap_count += swaps;

        let candidate = power_step(ch, matching, weights, budget).map_err(|error| JspaFailure {
            error,
            last: Box::new(current.clone()),
        })?;

        let prev = current.total_utility;
        let next = if candidate.total_utility < prev {
            rejected += 1;
            max_drop =
                max_drop.max((prev - candidate.total_utility) / prev.abs().max(f64::MIN_POSITIVE));
            prev
        } else {
            let u = candidate.total_utility;
            current = candidate;
            u
        };
        trace.push(next);
        if (next - prev).abs() <= cfg.convergence_tol * prev.abs() {
            converged = true;
            break;
        }
    }

    Ok(JspaReport {
        allocation: current,
        outer_iters: iters,
        utility_trace: trace,
        converged,
        swap_count,
        rejected_iterates: rejected,
        max_rejected_drop: max_drop,
    })
}

fn power_step(
    ch: &ChannelRealization,
    matching: Matching,
    weights: &UserWeights,
    budget: f64,
) -> Result<Allocation> {
    let power: PowerAllocation = optimize_power(ch, &matching, weights, budget)?.powers;
    Allocation::evaluate(ch, matching, power, weights)
}

/// Per-slot reports and the final windowed average rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRun {
    pub reports: Vec<JspaReport>,
    /// Weights used in each slot.
    pub weights: Vec<UserWeights>,
    pub avg_rates: Vec<f64>,
}

/// Sliding-window average of realized per-user rates.
#[derive(Debug, Clone)]
pub struct RateHistory {
    window: usize,
    num_users: usize,
    slots: VecDeque<Vec<f64>>,
}

impl RateHistory {
    pub fn new(num_users: usize, window: usize) -> Self {
        RateHistory {
            window: window.max(1),
            num_users,
            slots: VecDeque::new(),
        }
    }

    pub fn push(&mut self, rates: Vec<f64>) {
        if self.slots.len() == self.window {
            self.slots.pop_front();
        }
        self.slots.push_back(rates);
    }

    pub fn average(&self) -> Vec<f64> {
        if self.slots.is_empty() {
            return vec![INITIAL_AVG_RATE; self.num_users];
        }
        let n = self.slots.len() as f64;
        (0..self.num_users)
            .map(|j| self.slots.iter().map(|s| s[j]).sum::<f64>() / n)
            .collect()
    }
}

/// Run the joint loop slot after slot, feeding realized rates back into the
/// proportional-fairness weights.
pub fn run_slots<R: Rng + ?Sized>(
    channels: &[ChannelRealization],
    config: &SystemConfig,
    cfg: &JspaConfig,
    rng: &mut R,
) -> std::result::Result<SlotRun, JspaFailure> {
    let num_users = channels.first().map_or(config.num_users, |c| c.num_users());
    let mut history = RateHistory::new(num_users, config.avg_window_slots);
    let mut reports = Vec::with_capacity(channels.len());
    let mut used = Vec::with_capacity(channels.len());
    for ch in channels {
        let w = update_weights(&history.average(), config.weight_scale);
        let report = jspa_run(ch, config, &w, cfg, rng)?;
        history.push(report.allocation.user_rates());
        reports.push(report);
        used.push(w);
    }
    Ok(SlotRun {
        reports,
        weights: used,
        avg_rates: history.average(),
    })
}
