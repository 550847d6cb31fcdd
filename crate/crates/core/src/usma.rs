//! Sub-channel assignment: deterministic swap search and simulated annealing.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    shannon, total_utility, ChannelRealization, Grid, Matching, PowerAllocation, SystemConfig,
    UserWeights,
};
use crate::swap::{
    apply_swap_in_place, apply_swap_with_power, enumerate_swaps, evaluate_swap, swaps_involving,
    utility_delta, SwapProposal,
};

/// Safety cap on executed swaps; the strict utility increase of every swap
/// keeps real runs far below it.
const MAX_SWAPS: usize = 10_000_000;
/// Rejection-sampling attempts before falling back to full enumeration.
const SAMPLE_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Usma1Report {
    pub final_matching: Matching,
    /// Powers at the end of the swap phase (they move with the users).
    pub final_power: PowerAllocation,
    pub initial_utility: f64,
    pub swap_count: usize,
    /// `U_total` after each executed swap.
    pub utility_trace: Vec<f64>,
    pub rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Usma2Config {
    pub ell_max: usize,
    pub temperature: f64,
}

impl Default for Usma2Config {
    fn default() -> Self {
        Usma2Config {
            ell_max: 2_000_000,
            temperature: 0.5,
        }
    }
}

impl Usma2Config {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.temperature > 0.0) {
            return Err(crate::Error::Config(
                "usma2 temperature must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Usma2Report {
    pub best_matching: Matching,
    pub best_utility: f64,
    pub initial_utility: f64,
    pub accepted_swaps: usize,
    pub iterations: usize,
}

/// Powers used while matching: every pair gets the configured per-pair share.
pub fn phase_powers(config: &SystemConfig, matching: &Matching) -> PowerAllocation {
    PowerAllocation::uniform_on(matching, config.phase_power())
}

/// Greedy start: users in descending weight order each take their best free
/// sub-channels by single-user rate, up to `d_v`.
pub fn usma1_initialize(
    ch: &ChannelRealization,
    config: &SystemConfig,
    weights: &UserWeights,
) -> Matching {
    let (k_count, m_count) = (ch.num_subchannels(), ch.num_users());
    let mut m = Matching::empty(m_count, k_count, config.df, config.dv);
    let phase = config.phase_power();

    let mut order: Vec<usize> = (0..m_count).collect();
    order.sort_by(|&a, &b| weights.get(b).total_cmp(&weights.get(a)).then(a.cmp(&b)));

    for j in order {
        let mut candidates: Vec<(usize, f64)> = (0..k_count)
            .filter(|&k| m.sub_has_room(k))
            .map(|k| (k, shannon(phase * ch.gain(k, j), ch.noise(k, j))))
            .collect();
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (k, _) in candidates.into_iter().take(config.dv) {
            m.add(k, j).expect("candidate has room");
        }
    }
    m
}

/// Greedy initialization followed by swap search under phase powers.
pub fn usma1_run(
    ch: &ChannelRealization,
    config: &SystemConfig,
    weights: &UserWeights,
) -> Usma1Report {
    let start = usma1_initialize(ch, config, weights);
    let power = phase_powers(config, &start);
    usma1_swap_phase(ch, start, power, weights, config.eps_swap)
}

/// Execute approved swaps until a full round over the users finds none.
///
/// Users are scanned in ascending index; for each user the proposals from
/// [`swaps_involving`] are tried in order and the first approved one not yet
/// executed this round is applied, after which the user is rescanned.
pub fn usma1_swap_phase(
    ch: &ChannelRealization,
    mut matching: Matching,
    mut power: PowerAllocation,
    weights: &UserWeights,
    eps: f64,
) -> Usma1Report {
    let initial_utility =
        total_utility(ch, &matching, &power, weights).expect("powers live on the matching");
    let mut utility = initial_utility;
    let mut trace = Vec::new();
    let mut rounds = 0;

    loop {
        rounds += 1;
        let mut executed: HashSet<SwapProposal> = HashSet::new();
        for u in 0..matching.num_users() {
            'rescan: loop {
                for s in swaps_involving(&matching, u) {
                    if executed.contains(&s) {
                        continue;
                    }
                    let v = evaluate_swap(ch, &matching, weights, &power, &s, eps)
                        .expect("generated proposals are valid");
                    if v.approved {
                        apply_swap_with_power(&mut matching, &mut power, &s)
                            .expect("generated proposals are valid");
                        utility += v.delta_total;
                        trace.push(utility);
                        executed.insert(s);
                        if trace.len() >= MAX_SWAPS {
                            break 'rescan;
                        }
                        continue 'rescan;
                    }
                }
                break;
            }
        }
        if executed.is_empty() || trace.len() >= MAX_SWAPS {
            break;
        }
    }

    Usma1Report {
        final_matching: matching,
        final_power: power,
        initial_utility,
        swap_count: trace.len(),
        utility_trace: trace,
        rounds,
    }
}

/// Acceptance probability `1 / (1 + exp(-T (u_new - u_old)))`.
pub fn annealing_probability(u_new: f64, u_old: f64, temperature: f64) -> f64 {
    let x = temperature * (u_new - u_old);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A maximal feasible matching: all `(k, j)` pairs in random order, each added
/// while both quotas allow.
pub fn random_feasible_matching<R: Rng + ?Sized>(
    num_users: usize,
    num_subchannels: usize,
    df: usize,
    dv: usize,
    rng: &mut R,
) -> Matching {
    let mut pairs: Vec<(usize, usize)> = (0..num_subchannels)
        .flat_map(|k| (0..num_users).map(move |j| (k, j)))
        .collect();
    pairs.shuffle(rng);
    let mut m = Matching::empty(num_users, num_subchannels, df, dv);
    for (k, j) in pairs {
        if m.sub_has_room(k) && m.user_has_room(j) {
            m.add(k, j).expect("room checked");
        }
    }
    m
}

/// Draw one structurally valid proposal uniformly at random, or `None` if the
/// matching admits none.
fn sample_proposal<R: Rng + ?Sized>(
    m: &Matching,
    pairs: &[(usize, usize)],
    rng: &mut R,
) -> Option<SwapProposal> {
    let np = pairs.len();
    if np == 0 {
        return None;
    }
    let nk = m.num_subchannels();
    let space = np * np + np * nk;
    for _ in 0..SAMPLE_ATTEMPTS {
        let idx = rng.random_range(0..space);
        let candidate = if idx < np * np {
            let (a, b) = (idx / np, idx % np);
            // each unordered exchange is drawn from two ordered pairs
            if !rng.random_bool(0.5) {
                continue;
            }
            let ((p, i), (q, j)) = (pairs[a], pairs[b]);
            if i == j {
                continue;
            }
            SwapProposal::exchange(i, p, j, q)
        } else {
            let rest = idx - np * np;
            let (p, i) = pairs[rest / nk];
            SwapProposal::vacant(i, p, rest % nk)
        };
        if candidate.is_valid_for(m) {
            return Some(candidate);
        }
    }
    let all = enumerate_swaps(m);
    if all.is_empty() {
        None
    } else {
        Some(all[rng.random_range(0..all.len())])
    }
}

/// Simulated annealing over swap proposals from a random feasible start.
pub fn usma2_run<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    config: &SystemConfig,
    weights: &UserWeights,
    cfg: &Usma2Config,
    rng: &mut R,
) -> Usma2Report {
    usma2_run_with_incumbent(ch, config, weights, cfg, None, rng)
}

/// Like [`usma2_run`], but the best-so-far record starts from `incumbent`
/// when it is given and better than the random start.
pub fn usma2_run_with_incumbent<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    config: &SystemConfig,
    weights: &UserWeights,
    cfg: &Usma2Config,
    incumbent: Option<&Matching>,
    rng: &mut R,
) -> Usma2Report {
    let (k_count, m_count) = (ch.num_subchannels(), ch.num_users());
    let phase = config.phase_power();
    // every occupant transmits the same power, so a filled grid serves any matching
    let flat = PowerAllocation {
        p: Grid::filled(k_count, m_count, phase),
    };
    let exact = |m: &Matching| {
        total_utility(ch, m, &PowerAllocation::uniform_on(m, phase), weights)
            .expect("uniform powers live on the matching")
    };

    let mut current = random_feasible_matching(m_count, k_count, config.df, config.dv, rng);
    let initial_utility = exact(&current);
    let mut utility = initial_utility;
    let mut best = current.clone();
    let mut best_utility = initial_utility;
    if let Some(inc) = incumbent {
        let u = exact(inc);
        if u > best_utility {
            best = inc.clone();
            best_utility = u;
        }
    }

    let mut pairs: Vec<(usize, usize)> = current.pairs().collect();
    let mut accepted = 0;
    for _ in 0..cfg.ell_max {
        let Some(s) = sample_proposal(&current, &pairs, rng) else {
            continue;
        };
        let delta = utility_delta(ch, &current, weights, &flat, &s);
        let candidate_utility = utility + delta;
        if candidate_utility > best_utility {
            let mut b = current.clone();
            apply_swap_in_place(&mut b, &s).expect("sampled proposal is valid");
            best_utility = exact(&b);
            best = b;
        }
        if rng.random::<f64>() < annealing_probability(candidate_utility, utility, cfg.temperature)
        {
            apply_swap_in_place(&mut current, &s).expect("sampled proposal is valid");
            utility = candidate_utility;
            accepted += 1;
            pairs = current.pairs().collect();
        }
    }

    Usma2Report {
        best_utility: exact(&best),
        best_matching: best,
        initial_utility,
        accepted_swaps: accepted,
        iterations: cfg.ell_max,
    }
}
