//! Domain types for a single-cell downlink NOMA system and the SIC rate model.
//!
//! Rates are expressed in bps/Hz per sub-channel. Within one sub-channel the
//! users are decoded in order of decreasing normalized gain `|h|^2 / n`; a user
//! treats the signals of every stronger user as noise and cancels the rest.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `rows x cols` matrix of reals.
///
/// Every per-link quantity in the crate is indexed `[sub-channel][user]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Grid {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Build from nested rows; all rows must share the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Grid {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Power rule used while the matching game evaluates swaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePowerRule {
    /// Every matched pair transmits `P_s / (K * d_f)`.
    #[default]
    EqualSlotShare,
}

/// Scenario parameters shared by every algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_subchannels: usize,
    /// Maximum number of users sharing one sub-channel.
    pub df: usize,
    /// Maximum number of sub-channels held by one user.
    pub dv: usize,
    pub total_power_watts: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub carrier_freq_hz: f64,
    pub cell_side_m: f64,
    /// Proportional-fairness scale `a` in `w_j = a / avg_rate_j`.
    pub weight_scale: f64,
    pub avg_window_slots: usize,
    pub matching_phase_power_rule: PhasePowerRule,
    pub rng_seed: u64,
    /// Absolute tolerance for "strictly prefers" in swap approval.
    pub eps_swap: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_users: 20,
            num_subchannels: 10,
            df: 3,
            dv: 5,
            // 46 dBm
            total_power_watts: 39.810_717_055_349_76,
            bandwidth_hz: 4.5e6,
            noise_psd_dbm_hz: -174.0,
            carrier_freq_hz: 2.0e9,
            cell_side_m: 350.0,
            weight_scale: 1.0,
            avg_window_slots: 30,
            matching_phase_power_rule: PhasePowerRule::EqualSlotShare,
            rng_seed: 1,
            eps_swap: 1e-9,
        }
    }
}

impl SystemConfig {
    /// A small config with the given shape and unit power budget.
    pub fn small(num_users: usize, num_subchannels: usize, df: usize, dv: usize) -> Self {
        SystemConfig {
            num_users,
            num_subchannels,
            df,
            dv,
            total_power_watts: 1.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_users == 0 || self.num_subchannels == 0 {
            return fail("num_users and num_subchannels must be positive".into());
        }
        if self.df == 0 || self.df > self.num_users {
            return fail(format!(
                "df = {} must be in 1..={}",
                self.df, self.num_users
            ));
        }
        if self.dv == 0 || self.dv > self.num_subchannels {
            return fail(format!(
                "dv = {} must be in 1..={}",
                self.dv, self.num_subchannels
            ));
        }
        if !(self.total_power_watts > 0.0) || !(self.bandwidth_hz > 0.0) {
            return fail("total_power_watts and bandwidth_hz must be positive".into());
        }
        if !(self.weight_scale > 0.0) {
            return fail("weight_scale must be positive".into());
        }
        if self.avg_window_slots == 0 {
            return fail("avg_window_slots must be positive".into());
        }
        if !(self.eps_swap >= 0.0) {
            return fail("eps_swap must be non-negative".into());
        }
        Ok(())
    }

    /// Per-pair power used by the matching phase.
    pub fn phase_power(&self) -> f64 {
        match self.matching_phase_power_rule {
            PhasePowerRule::EqualSlotShare => {
                self.total_power_watts / (self.num_subchannels * self.df) as f64
            }
        }
    }

    /// Noise power on one sub-channel of width `W / K`, in watts.
    pub fn subchannel_noise_watts(&self, num_subchannels: usize) -> f64 {
        let psd_w = 10f64.powf((self.noise_psd_dbm_hz - 30.0) / 10.0);
        psd_w * self.bandwidth_hz / num_subchannels as f64
    }
}

/// Squared channel gains and noise powers for one time slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// `|h_{k,j}|^2`, indexed `[k][j]`.
    pub gain_sq: Grid,
    /// `n_{k,j}` in watts.
    pub noise: Grid,
    pub user_distance_m: Vec<f64>,
}

impl ChannelRealization {
    pub fn new(gain_sq: Grid, noise: Grid, user_distance_m: Vec<f64>) -> Result<Self> {
        if gain_sq.rows() != noise.rows() || gain_sq.cols() != noise.cols() {
            return Err(Error::Config("gain and noise shapes differ".into()));
        }
        if user_distance_m.len() != gain_sq.cols() {
            return Err(Error::Config("distance vector length != num_users".into()));
        }
        if gain_sq.iter().any(|g| !(g >= 0.0) || !g.is_finite()) {
            return Err(Error::Config(
                "gains must be finite and non-negative".into(),
            ));
        }
        if noise.iter().any(|n| !(n > 0.0)) {
            return Err(Error::Config("noise powers must be positive".into()));
        }
        Ok(ChannelRealization {
            gain_sq,
            noise,
            user_distance_m,
        })
    }

    /// Channel with unit noise everywhere; handy for hand-built instances.
    pub fn with_unit_noise(gain_rows: &[Vec<f64>]) -> Self {
        let gain_sq = Grid::from_rows(gain_rows);
        let noise = Grid::filled(gain_sq.rows(), gain_sq.cols(), 1.0);
        let d = vec![1.0; gain_sq.cols()];
        Self::new(gain_sq, noise, d).expect("valid hand-built channel")
    }

    pub fn num_subchannels(&self) -> usize {
        self.gain_sq.rows()
    }

    pub fn num_users(&self) -> usize {
        self.gain_sq.cols()
    }

    #[inline]
    pub fn gain(&self, k: usize, j: usize) -> f64 {
        self.gain_sq.get(k, j)
    }

    #[inline]
    pub fn noise(&self, k: usize, j: usize) -> f64 {
        self.noise.get(k, j)
    }

    /// `|h_{k,j}|^2 / n_{k,j}`.
    #[inline]
    pub fn normalized_gain(&self, k: usize, j: usize) -> f64 {
        self.gain_sq.get(k, j) / self.noise.get(k, j)
    }

    /// SIC order comparator: stronger normalized gain first, lower index on ties.
    #[inline]
    pub fn sic_cmp(&self, k: usize, a: usize, b: usize) -> Ordering {
        self.normalized_gain(k, b)
            .total_cmp(&self.normalized_gain(k, a))
            .then(a.cmp(&b))
    }
}

/// Many-to-many assignment between users and sub-channels.
///
/// Both adjacency directions are kept sorted so equal matchings compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matching {
    df: usize,
    dv: usize,
    user_to_subs: Vec<Vec<usize>>,
    sub_to_users: Vec<Vec<usize>>,
}

impl Matching {
    pub fn empty(num_users: usize, num_subchannels: usize, df: usize, dv: usize) -> Self {
        Matching {
            df,
            dv,
            user_to_subs: vec![Vec::new(); num_users],
            sub_to_users: vec![Vec::new(); num_subchannels],
        }
    }

    pub fn for_config(config: &SystemConfig) -> Self {
        Self::empty(
            config.num_users,
            config.num_subchannels,
            config.df,
            config.dv,
        )
    }

    /// Build from `(k, j)` pairs, enforcing both quotas.
    pub fn from_pairs(
        num_users: usize,
        num_subchannels: usize,
        df: usize,
        dv: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let mut m = Self::empty(num_users, num_subchannels, df, dv);
        for &(k, j) in pairs {
            m.add(k, j)?;
        }
        Ok(m)
    }

    /// Build from `(k, j)` pairs without checking quotas. Used to load
    /// externally produced matchings that still have to go through [`validate`].
    pub fn from_pairs_unchecked(
        num_users: usize,
        num_subchannels: usize,
        df: usize,
        dv: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let mut m = Self::empty(num_users, num_subchannels, df, dv);
        for &(k, j) in pairs {
            if k >= num_subchannels || j >= num_users {
                return Err(Error::IndexOutOfRange { k, j });
            }
            if !m.contains(k, j) {
                m.insert_raw(k, j);
            }
        }
        Ok(m)
    }

    pub fn num_users(&self) -> usize {
        self.user_to_subs.len()
    }

    pub fn num_subchannels(&self) -> usize {
        self.sub_to_users.len()
    }

    pub fn df(&self) -> usize {
        self.df
    }

    pub fn dv(&self) -> usize {
        self.dv
    }

    /// `Psi(SC_k)`, sorted by user index.
    pub fn users_on(&self, k: usize) -> &[usize] {
        &self.sub_to_users[k]
    }

    /// `Psi(M_j)`, sorted by sub-channel index.
    pub fn subs_of(&self, j: usize) -> &[usize] {
        &self.user_to_subs[j]
    }

    pub fn contains(&self, k: usize, j: usize) -> bool {
        self.user_to_subs[j].binary_search(&k).is_ok()
    }

    pub fn sub_has_room(&self, k: usize) -> bool {
        self.sub_to_users[k].len() < self.df
    }

    pub fn user_has_room(&self, j: usize) -> bool {
        self.user_to_subs[j].len() < self.dv
    }

    pub fn pair_count(&self) -> usize {
        self.sub_to_users.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_count() == 0
    }

    /// All matched `(k, j)` pairs in ascending `(k, j)` order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sub_to_users
            .iter()
            .enumerate()
            .flat_map(|(k, us)| us.iter().map(move |&j| (k, j)))
    }

    /// The binary matrix `B`, `b[k][j] = 1` iff matched.
    pub fn to_binary(&self) -> Vec<Vec<u8>> {
        let mut b = vec![vec![0u8; self.num_users()]; self.num_subchannels()];
        for (k, j) in self.pairs() {
            b[k][j] = 1;
        }
        b
    }

    pub fn add(&mut self, k: usize, j: usize) -> Result<()> {
        if k >= self.num_subchannels() || j >= self.num_users() {
            return Err(Error::IndexOutOfRange { k, j });
        }
        if self.contains(k, j) {
            return Err(Error::InvalidSwap(format!(
                "pair ({k},{j}) already matched"
            )));
        }
        if !self.sub_has_room(k) {
            return Err(Error::QuotaOverflow(format!("sub-channel {k} is full")));
        }
        if !self.user_has_room(j) {
            return Err(Error::QuotaOverflow(format!("user {j} is full")));
        }
        self.insert_raw(k, j);
        Ok(())
    }

    pub fn remove(&mut self, k: usize, j: usize) -> Result<()> {
        match (
            self.user_to_subs[j].binary_search(&k),
            self.sub_to_users[k].binary_search(&j),
        ) {
            (Ok(a), Ok(b)) => {
                self.user_to_subs[j].remove(a);
                self.sub_to_users[k].remove(b);
                Ok(())
            }
            _ => Err(Error::InvalidSwap(format!("pair ({k},{j}) not matched"))),
        }
    }

    fn insert_raw(&mut self, k: usize, j: usize) {
        let us = &mut self.user_to_subs[j];
        let pos = us.binary_search(&k).unwrap_err();
        us.insert(pos, k);
        let ss = &mut self.sub_to_users[k];
        let pos = ss.binary_search(&j).unwrap_err();
        ss.insert(pos, j);
    }

    /// Lexicographic key over the binary matrix, used for deterministic tie-breaks.
    pub fn encoding(&self) -> Vec<u8> {
        self.to_binary().into_iter().flatten().collect()
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, us) in self.sub_to_users.iter().enumerate() {
            writeln!(f, "SC{k}: {us:?}")?;
        }
        Ok(())
    }
}

/// Transmit powers `p_{k,j}` in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p: Grid,
}

impl PowerAllocation {
    pub fn zeros(num_subchannels: usize, num_users: usize) -> Self {
        PowerAllocation {
            p: Grid::zeros(num_subchannels, num_users),
        }
    }

    /// The same power on every matched pair.
    pub fn uniform_on(matching: &Matching, per_pair: f64) -> Self {
        let mut p = Self::zeros(matching.num_subchannels(), matching.num_users());
        for (k, j) in matching.pairs() {
            p.p.set(k, j, per_pair);
        }
        p
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.p.get(k, j)
    }

    #[inline]
    pub fn set(&mut self, k: usize, j: usize, v: f64) {
        self.p.set(k, j, v)
    }

    pub fn total(&self) -> f64 {
        self.p.sum()
    }
}

/// Proportional-fairness weights `w_j > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserWeights(Vec<f64>);

impl UserWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::Config("weights must be finite and positive".into()));
        }
        Ok(UserWeights(w))
    }

    pub fn uniform(num_users: usize) -> Self {
        UserWeights(vec![1.0; num_users])
    }

    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A matching with its powers, per-link rates and total utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub matching: Matching,
    pub power: PowerAllocation,
    /// `R_{k,j}` in bps/Hz, zero on unmatched pairs.
    pub rates: Grid,
    pub total_utility: f64,
}

impl Allocation {
    /// Evaluate rates and weighted utility for `(matching, power)`.
    pub fn evaluate(
        ch: &ChannelRealization,
        matching: Matching,
        power: PowerAllocation,
        weights: &UserWeights,
    ) -> Result<Self> {
        check_support(&matching, &power)?;
        let rates = rate_grid(ch, &matching, &power);
        let total_utility = rates
            .iter()
            .enumerate()
            .map(|(idx, r)| r * weights.get(idx % rates.cols()))
            .sum();
        Ok(Allocation {
            matching,
            power,
            rates,
            total_utility,
        })
    }

    pub fn empty(ch: &ChannelRealization, df: usize, dv: usize) -> Self {
        let (k, m) = (ch.num_subchannels(), ch.num_users());
        Allocation {
            matching: Matching::empty(m, k, df, dv),
            power: PowerAllocation::zeros(k, m),
            rates: Grid::zeros(k, m),
            total_utility: 0.0,
        }
    }

    /// Unweighted rate of each user summed over its sub-channels.
    pub fn user_rates(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rates.cols()];
        for k in 0..self.rates.rows() {
            for (j, r) in self.rates.row(k).iter().enumerate() {
                out[j] += r;
            }
        }
        out
    }

    /// Unweighted sum-rate over all links, bps/Hz per sub-channel summed.
    pub fn sum_rate(&self) -> f64 {
        self.rates.sum()
    }
}

fn check_support(matching: &Matching, power: &PowerAllocation) -> Result<()> {
    if power.p.rows() != matching.num_subchannels() || power.p.cols() != matching.num_users() {
        return Err(Error::InconsistentPower("shape mismatch".into()));
    }
    for k in 0..power.p.rows() {
        for j in 0..power.p.cols() {
            let v = power.get(k, j);
            if v != 0.0 && !matching.contains(k, j) {
                return Err(Error::InconsistentPower(format!(
                    "power {v} on unmatched pair ({k},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Users of `users` sorted into SIC decoding order (strongest first).
pub fn decoding_order(ch: &ChannelRealization, k: usize, users: &[usize]) -> Result<Vec<usize>> {
    if users.is_empty() {
        return Err(Error::EmptyCoalition);
    }
    let mut order = users.to_vec();
    order.sort_by(|&a, &b| ch.sic_cmp(k, a, b));
    Ok(order)
}

/// Interference `I_{k,j}` seen by user `j` on sub-channel `k`, in watts.
pub fn user_interference(
    ch: &ChannelRealization,
    matching: &Matching,
    power: &PowerAllocation,
    k: usize,
    j: usize,
) -> Result<f64> {
    let users = matching.users_on(k);
    if !users.contains(&j) {
        return Err(Error::UserNotOnSubchannel { k, j });
    }
    let stronger: f64 = users
        .iter()
        .filter(|&&i| i != j && ch.sic_cmp(k, i, j) == Ordering::Less)
        .map(|&i| power.get(k, i))
        .sum();
    Ok(stronger * ch.gain(k, j))
}

/// `R_{k,j} = log2(1 + p |h|^2 / (n + I))`.
pub fn user_rate(
    ch: &ChannelRealization,
    matching: &Matching,
    power: &PowerAllocation,
    k: usize,
    j: usize,
) -> Result<f64> {
    let interference = user_interference(ch, matching, power, k, j)?;
    Ok(shannon(
        power.get(k, j) * ch.gain(k, j),
        ch.noise(k, j) + interference,
    ))
}

/// Weighted rate `R_{SC_k}` of one sub-channel.
pub fn subchannel_rate(
    ch: &ChannelRealization,
    matching: &Matching,
    power: &PowerAllocation,
    weights: &UserWeights,
    k: usize,
) -> f64 {
    coalition_utility(ch, k, matching.users_on(k), |j| power.get(k, j), weights)
}

/// `U_total`, the weighted sum-rate over every sub-channel.
pub fn total_utility(
    ch: &ChannelRealization,
    matching: &Matching,
    power: &PowerAllocation,
    weights: &UserWeights,
) -> Result<f64> {
    check_support(matching, power)?;
    Ok((0..matching.num_subchannels())
        .map(|k| subchannel_rate(ch, matching, power, weights, k))
        .sum())
}

#[inline]
pub(crate) fn shannon(signal: f64, noise_plus_interference: f64) -> f64 {
    (signal / noise_plus_interference).ln_1p() / std::f64::consts::LN_2
}

/// Rates of every member of a coalition on sub-channel `k`, returned in the
/// same order as `users`. `power_of` gives each member's transmit power.
pub(crate) fn coalition_rates(
    ch: &ChannelRealization,
    k: usize,
    users: &[usize],
    power_of: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.sort_by(|&a, &b| ch.sic_cmp(k, users[a], users[b]));
    let mut out = vec![0.0; users.len()];
    let mut stronger_power = 0.0;
    for idx in order {
        let j = users[idx];
        let p = power_of(j);
        let g = ch.gain(k, j);
        out[idx] = shannon(p * g, ch.noise(k, j) + stronger_power * g);
        stronger_power += p;
    }
    out
}

pub(crate) fn coalition_utility(
    ch: &ChannelRealization,
    k: usize,
    users: &[usize],
    power_of: impl Fn(usize) -> f64,
    weights: &UserWeights,
) -> f64 {
    coalition_rates(ch, k, users, power_of)
        .iter()
        .zip(users)
        .map(|(r, &j)| weights.get(j) * r)
        .sum()
}

/// Rate matrix for a consistent `(matching, power)` pair.
pub fn rate_grid(ch: &ChannelRealization, matching: &Matching, power: &PowerAllocation) -> Grid {
    let mut rates = Grid::zeros(matching.num_subchannels(), matching.num_users());
    for k in 0..matching.num_subchannels() {
        let users = matching.users_on(k);
        let rs = coalition_rates(ch, k, users, |j| power.get(k, j));
        for (&j, r) in users.iter().zip(rs) {
            rates.set(k, j, r);
        }
    }
    rates
}

/// A violated constraint of the joint allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// More than `d_f` users on sub-channel `k`.
    SubchannelQuota {
        k: usize,
        count: usize,
    },
    /// More than `d_v` sub-channels held by user `j`.
    UserQuota {
        j: usize,
        count: usize,
    },
    /// Power on an unmatched pair, or a matrix of the wrong shape.
    BinaryConsistency {
        k: usize,
        j: usize,
    },
    /// Total power over budget.
    TotalPower {
        total: f64,
        budget: f64,
    },
    NegativePower {
        k: usize,
        j: usize,
        value: f64,
    },
}

impl Violation {
    /// Constraint label of the joint problem this violation belongs to.
    pub fn constraint(&self) -> &'static str {
        match self {
            Violation::SubchannelQuota { .. } => "6b",
            Violation::UserQuota { .. } => "6c",
            Violation::BinaryConsistency { .. } => "6d",
            Violation::TotalPower { .. } => "6e",
            Violation::NegativePower { .. } => "6f",
        }
    }
}

/// Check every constraint of the joint problem; returns all violations.
pub fn validate(
    config: &SystemConfig,
    matching: &Matching,
    power: &PowerAllocation,
) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for k in 0..matching.num_subchannels() {
        let count = matching.users_on(k).len();
        if count > config.df {
            out.push(Violation::SubchannelQuota { k, count });
        }
    }
    for j in 0..matching.num_users() {
        let count = matching.subs_of(j).len();
        if count > config.dv {
            out.push(Violation::UserQuota { j, count });
        }
    }
    if power.p.rows() != matching.num_subchannels() || power.p.cols() != matching.num_users() {
        out.push(Violation::BinaryConsistency {
            k: power.p.rows(),
            j: power.p.cols(),
        });
        return Err(out);
    }
    for k in 0..power.p.rows() {
        for j in 0..power.p.cols() {
            let v = power.get(k, j);
            if v < 0.0 {
                out.push(Violation::NegativePower { k, j, value: v });
            } else if v > 0.0 && !matching.contains(k, j) {
                out.push(Violation::BinaryConsistency { k, j });
            }
        }
    }
    let total = power.total();
    let budget = config.total_power_watts;
    if total > budget * (1.0 + 1e-9) {
        out.push(Violation::TotalPower { total, budget });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
