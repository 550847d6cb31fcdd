//! Comparison schemes and the exhaustive oracle for tiny instances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    coalition_utility, shannon, Allocation, ChannelRealization, Matching, PowerAllocation,
    SystemConfig, UserWeights,
};
use crate::power::{equal_power, optimize_power};
use crate::usma::random_feasible_matching;

/// Largest number of feasible matchings the oracle will enumerate.
pub const ORACLE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FtpcConfig {
    /// Decay exponent: power on a link is proportional to `gain^(-alpha)`.
    pub alpha: f64,
}

impl Default for FtpcConfig {
    fn default() -> Self {
        FtpcConfig { alpha: 0.4 }
    }
}

impl FtpcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "ftpc alpha = {} must lie in [0, 1]",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Random maximal feasible matching with the budget spread equally.
pub fn ra_noma<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    config: &SystemConfig,
    rng: &mut R,
) -> Allocation {
    let m = random_feasible_matching(
        ch.num_users(),
        ch.num_subchannels(),
        config.df,
        config.dv,
        rng,
    );
    let p = equal_power(&m, config.total_power_watts);
    Allocation::evaluate(ch, m, p, &UserWeights::uniform(ch.num_users()))
        .expect("equal power lives on the matching")
}

/// User grouping with fractional transmit power control.
///
/// Users are ranked by mean normalized gain and cut into `d_v` contiguous
/// groups. Each sub-channel takes the best available member of every group
/// and keeps the `d_f` strongest of those. The per-channel budget `P_s / K` is
/// split in proportion to `gain^(-alpha)`.
pub fn ug_ftpc(ch: &ChannelRealization, config: &SystemConfig, ftpc: &FtpcConfig) -> Allocation {
    let (k_count, m_count) = (ch.num_subchannels(), ch.num_users());
    let mean_gain =
        |j: usize| (0..k_count).map(|k| ch.normalized_gain(k, j)).sum::<f64>() / k_count as f64;
    let mut ranked: Vec<usize> = (0..m_count).collect();
    ranked.sort_by(|&a, &b| mean_gain(b).total_cmp(&mean_gain(a)).then(a.cmp(&b)));
    let groups = config.dv.min(m_count).max(1);
    let mut group_of = vec![0; m_count];
    for (rank, &j) in ranked.iter().enumerate() {
        group_of[j] = rank * groups / m_count;
    }

    let mut m = Matching::empty(m_count, k_count, config.df, config.dv);
    let mut power = PowerAllocation::zeros(k_count, m_count);
    let per_channel = config.total_power_watts / k_count as f64;
    for k in 0..k_count {
        let mut picks: Vec<usize> = (0..groups)
            .filter_map(|g| {
                (0..m_count)
                    .filter(|&j| group_of[j] == g && m.user_has_room(j))
                    .min_by(|&a, &b| ch.sic_cmp(k, a, b))
            })
            .collect();
        picks.sort_by(|&a, &b| ch.sic_cmp(k, a, b));
        picks.truncate(config.df);
        if picks.is_empty() {
            continue;
        }
        let share: Vec<f64> = picks
            .iter()
            .map(|&j| ch.normalized_gain(k, j).powf(-ftpc.alpha))
            .collect();
        let total: f64 = share.iter().sum();
        for (&j, s) in picks.iter().zip(&share) {
            m.add(k, j).expect("room checked");
            power.set(k, j, per_channel * s / total);
        }
    }
    Allocation::evaluate(ch, m, power, &UserWeights::uniform(m_count))
        .expect("powers live on the matching")
}

/// Orthogonal access: one user per sub-channel.
///
/// Sub-channels are visited in descending order of their best normalized
/// gain; each goes to the user with the largest weighted rate that still has
/// room under `d_v`. Every assigned sub-channel gets `P_s / K`.
pub fn ofdma_baseline(
    ch: &ChannelRealization,
    config: &SystemConfig,
    weights: &UserWeights,
) -> Allocation {
    let (k_count, m_count) = (ch.num_subchannels(), ch.num_users());
    let per_channel = config.total_power_watts / k_count as f64;
    let best = |k: usize| {
        (0..m_count)
            .map(|j| ch.normalized_gain(k, j))
            .fold(0.0, f64::max)
    };
    let mut order: Vec<usize> = (0..k_count).collect();
    order.sort_by(|&a, &b| best(b).total_cmp(&best(a)).then(a.cmp(&b)));

    let dv = config.dv.min(k_count);
    let mut m = Matching::empty(m_count, k_count, 1, dv);
    for k in order {
        let choice = (0..m_count)
            .filter(|&j| m.user_has_room(j))
            .map(|j| {
                (
                    j,
                    weights.get(j) * shannon(per_channel * ch.gain(k, j), ch.noise(k, j)),
                )
            })
            .fold(None, |acc: Option<(usize, f64)>, (j, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((j, v)),
            });
        if let Some((j, _)) = choice {
            m.add(k, j).expect("room checked");
        }
    }
    let p = PowerAllocation::uniform_on(&m, per_channel);
    Allocation::evaluate(ch, m, p, weights).expect("powers live on the matching")
}

/// Optimum of the relaxed problem with per-channel budgets `P_s / K` and no
/// per-user cap: each sub-channel serves only its strongest user.
///
/// Equal weights are assumed, and the returned matching uses `d_v = K`.
pub fn prop2_relaxed_optimum(ch: &ChannelRealization, config: &SystemConfig) -> Allocation {
    let (k_count, m_count) = (ch.num_subchannels(), ch.num_users());
    let per_channel = config.total_power_watts / k_count as f64;
    let mut m = Matching::empty(m_count, k_count, config.df.max(1), k_count);
    for k in 0..k_count {
        let best = (0..m_count)
            .min_by(|&a, &b| ch.sic_cmp(k, a, b))
            .expect("at least one user");
        m.add(k, best).expect("one user per channel fits");
    }
    let p = PowerAllocation::uniform_on(&m, per_channel);
    Allocation::evaluate(ch, m, p, &UserWeights::uniform(m_count))
        .expect("powers live on the matching")
}

/// How the oracle allocates power on each candidate matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMode {
    /// Solve the convex power problem.
    Exact,
    /// Exhaustive search over powers in steps of `P_s / steps`.
    Grid(usize),
}

/// Every matching that respects both quotas, in lexicographic order of the
/// per-channel occupant sets.
pub fn enumerate_feasible_matchings(
    num_users: usize,
    num_subchannels: usize,
    df: usize,
    dv: usize,
    limit: usize,
) -> Result<Vec<Matching>> {
    let subsets: Vec<Vec<usize>> = (0u64..1 << num_users)
        .filter(|mask| mask.count_ones() as usize <= df)
        .map(|mask| (0..num_users).filter(|j| mask >> j & 1 == 1).collect())
        .collect();
    let mut out = Vec::new();
    let mut m = Matching::empty(num_users, num_subchannels, df, dv);
    fn rec(
        k: usize,
        m: &mut Matching,
        subsets: &[Vec<usize>],
        out: &mut Vec<Matching>,
        limit: usize,
    ) -> Result<()> {
        if k == m.num_subchannels() {
            if out.len() >= limit {
                return Err(Error::OracleScaleExceeded { limit });
            }
            out.push(m.clone());
            return Ok(());
        }
        for s in subsets {
            if s.iter().all(|&j| m.user_has_room(j)) {
                for &j in s {
                    m.add(k, j)?;
                }
                let r = rec(k + 1, m, subsets, out, limit);
                for &j in s {
                    m.remove(k, j)?;
                }
                r?;
            }
        }
        Ok(())
    }
    rec(0, &mut m, &subsets, &mut out, limit)?;
    Ok(out)
}

fn is_maximal(m: &Matching) -> bool {
    (0..m.num_subchannels()).all(|k| {
        !m.sub_has_room(k) || (0..m.num_users()).all(|j| m.contains(k, j) || !m.user_has_room(j))
    })
}

/// Best joint allocation by exhaustive enumeration.
///
/// Adding a zero-power user to a matching never lowers the best achievable
/// utility, so only maximal matchings are solved; all feasible matchings count
/// toward [`ORACLE_LIMIT`]. Ties go to the smaller matching encoding.
pub fn brute_force_joint(
    ch: &ChannelRealization,
    config: &SystemConfig,
    weights: &UserWeights,
    mode: OracleMode,
) -> Result<Allocation> {
    let all = enumerate_feasible_matchings(
        ch.num_users(),
        ch.num_subchannels(),
        config.df,
        config.dv,
        ORACLE_LIMIT,
    )?;
    let mut best: Option<Allocation> = None;
    for m in all.into_iter().filter(is_maximal) {
        let candidate = match mode {
            OracleMode::Exact => {
                let sol = match optimize_power(ch, &m, weights, config.total_power_watts) {
                    Ok(sol) => sol,
                    Err(Error::SolverNonConvergence { best, .. }) => *best,
                    Err(e) => return Err(e),
                };
                Allocation::evaluate(ch, m, sol.powers, weights)?
            }
            OracleMode::Grid(steps) => {
                grid_search(ch, m, weights, config.total_power_watts, steps)?
            }
        };
        let better = match &best {
            None => true,
            Some(b) => {
                candidate.total_utility > b.total_utility
                    || (candidate.total_utility == b.total_utility
                        && candidate.matching.encoding() < b.matching.encoding())
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.unwrap_or_else(|| Allocation::empty(ch, config.df, config.dv)))
}

fn grid_search(
    ch: &ChannelRealization,
    m: Matching,
    weights: &UserWeights,
    budget: f64,
    steps: usize,
) -> Result<Allocation> {
    let steps = steps.max(1);
    let pairs: Vec<(usize, usize)> = m.pairs().collect();
    let unit = budget / steps as f64;
    let mut units = vec![0usize; pairs.len()];
    let mut best_units = units.clone();
    let mut best_u = f64::NEG_INFINITY;

    let utility = |units: &[usize]| -> f64 {
        let pw = |k: usize, j: usize| {
            pairs
                .iter()
                .position(|&pr| pr == (k, j))
                .map_or(0.0, |idx| units[idx] as f64 * unit)
        };
        (0..m.num_subchannels())
            .map(|k| coalition_utility(ch, k, m.users_on(k), |j| pw(k, j), weights))
            .sum()
    };

    // odometer over compositions with total at most `steps`
    loop {
        let u = utility(&units);
        if u > best_u {
            best_u = u;
            best_units.clone_from(&units);
        }
        let mut pos = 0;
        loop {
            if pos == units.len() {
                let mut power = PowerAllocation::zeros(m.num_subchannels(), m.num_users());
                for (idx, &(k, j)) in pairs.iter().enumerate() {
                    power.set(k, j, best_units[idx] as f64 * unit);
                }
                return Allocation::evaluate(ch, m, power, weights);
            }
            units[pos] += 1;
            if units.iter().sum::<usize>() <= steps {
                break;
            }
            units[pos] = 0;
            pos += 1;
        }
    }
}
