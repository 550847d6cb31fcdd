//! Power allocation for a fixed matching.
//!
//! With SIC on every sub-channel the weighted sum-rate problem is convex in
//! the rate variables. Sort the occupants of sub-channel `k` strongest first
//! and let `m_t = n_t / |h_t|^2` (increasing in `t`, `m_0 = 0`). A rate
//! vector is reachable with total power `P_k` exactly when
//!
//! ```text
//! sum_t (m_t - m_{t-1}) * 2^(R_t + ... + R_last) <= P_k + m_last
//! ```
//!
//! Summing over sub-channels gives one smooth convex constraint in `R`,
//! handled here with a primal log-barrier method and Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{ChannelRealization, Grid, Matching, PowerAllocation, UserWeights};

/// Relative bump applied to an `m` value that ties with its predecessor.
const TIE_PERTURBATION: f64 = 1e-12;
/// Recovered powers below `-NEGATIVE_TOLERANCE` (W) are an error.
const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Occupants of one sub-channel in SIC order with their `m` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpChannel {
    pub k: usize,
    /// Users, strongest normalized gain first.
    pub users: Vec<usize>,
    /// Strictly increasing `n / |h|^2` per position, in watts.
    pub m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpInstance {
    pub num_subchannels: usize,
    pub num_users: usize,
    /// Non-empty sub-channels only.
    pub channels: Vec<GpChannel>,
    pub weights: Vec<f64>,
    pub budget: f64,
}

impl GpInstance {
    pub fn num_vars(&self) -> usize {
        self.channels.iter().map(|c| c.users.len()).sum()
    }

    /// Right-hand side of the rate-region constraint: `P_s + sum_k m_last`.
    pub fn constraint_bound(&self) -> f64 {
        self.budget
            + self
                .channels
                .iter()
                .map(|c| *c.m.last().unwrap())
                .sum::<f64>()
    }

    /// Left-hand side of the rate-region constraint at a flat rate vector.
    pub fn constraint_value(&self, rates: &[f64]) -> f64 {
        let mut off = 0;
        let mut g = 0.0;
        for c in &self.channels {
            let n = c.users.len();
            g += channel_terms(&c.m, &rates[off..off + n])
                .iter()
                .sum::<f64>();
            off += n;
        }
        g
    }

    fn flatten(&self, rates: &Grid) -> Vec<f64> {
        self.channels
            .iter()
            .flat_map(|c| c.users.iter().map(move |&j| rates.get(c.k, j)))
            .collect()
    }

    fn unflatten(&self, flat: &[f64]) -> Grid {
        let mut g = Grid::zeros(self.num_subchannels, self.num_users);
        let mut off = 0;
        for c in &self.channels {
            for (t, &j) in c.users.iter().enumerate() {
                g.set(c.k, j, flat[off + t]);
            }
            off += c.users.len();
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSolution {
    /// Optimal `R_{k,j}` (bps/Hz), zero off the matching.
    pub rates: Grid,
    pub powers: PowerAllocation,
    /// Weighted sum-rate at the returned point.
    pub objective: f64,
    /// Largest KKT violation, measured with weights scaled to max 1.
    pub kkt_residual: f64,
}

/// Order every sub-channel's occupants and compute their `m` values.
pub fn build_gp(
    ch: &ChannelRealization,
    matching: &Matching,
    weights: &UserWeights,
    total_power: f64,
) -> Result<GpInstance> {
    let mut channels = Vec::new();
    for k in 0..matching.num_subchannels() {
        let users = matching.users_on(k);
        if users.is_empty() {
            continue;
        }
        if let Some(&j) = users.iter().find(|&&j| !(ch.gain(k, j) > 0.0)) {
            return Err(Error::NonTransmittableLink { k, j });
        }
        let mut users = users.to_vec();
        users.sort_by(|&a, &b| ch.sic_cmp(k, a, b));
        let mut m: Vec<f64> = users
            .iter()
            .map(|&j| ch.noise(k, j) / ch.gain(k, j))
            .collect();
        for t in 1..m.len() {
            if m[t] <= m[t - 1] {
                m[t] = m[t - 1] * (1.0 + TIE_PERTURBATION);
            }
        }
        channels.push(GpChannel { k, users, m });
    }
    Ok(GpInstance {
        num_subchannels: matching.num_subchannels(),
        num_users: matching.num_users(),
        channels,
        weights: weights.as_slice().to_vec(),
        budget: total_power,
    })
}

/// `(m_t - m_{t-1}) * 2^(R_t + ... + R_last)` for each position `t`.
fn channel_terms(m: &[f64], r: &[f64]) -> Vec<f64> {
    let n = m.len();
    let mut out = vec![0.0; n];
    let mut suffix = 0.0;
    for t in (0..n).rev() {
        suffix += r[t];
        let prev = if t == 0 { 0.0 } else { m[t - 1] };
        out[t] = (m[t] - prev) * (LN_2 * suffix).exp();
    }
    out
}

/// Constraint value, gradient and Hessian at `r`.
fn constraint_derivs(inst: &GpInstance, r: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = r.len();
    let mut g = 0.0;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut off = 0;
    for c in &inst.channels {
        let len = c.users.len();
        let terms = channel_terms(&c.m, &r[off..off + len]);
        g += terms.iter().sum::<f64>();
        // d g / d R_s = ln2 * sum_{t <= s} term_t
        let mut prefix = 0.0;
        for s in 0..len {
            prefix += terms[s];
            grad[off + s] = LN_2 * prefix;
        }
        for a in 0..len {
            for b in 0..len {
                hess[(off + a, off + b)] = LN_2 * grad[off + a.min(b)];
            }
        }
        off += len;
    }
    (g, grad, hess)
}

struct Barrier<'a> {
    inst: &'a GpInstance,
    w: DVector<f64>,
    bound: f64,
}

impl Barrier<'_> {
    /// `-tau * w.R - log(bound - g) - sum log R`, or `None` outside the domain.
    fn value(&self, tau: f64, r: &[f64]) -> Option<f64> {
        if r.iter().any(|&x| !(x > 0.0)) {
            return None;
        }
        let slack = self.bound - self.inst.constraint_value(r);
        if !(slack > 0.0) {
            return None;
        }
        let lin: f64 = r.iter().zip(self.w.iter()).map(|(a, b)| a * b).sum();
        Some(-tau * lin - slack.ln() - r.iter().map(|x| x.ln()).sum::<f64>())
    }
}

const MAX_NEWTON_STEPS: usize = 200;
const TAU_GROWTH: f64 = 20.0;
const TAU_FINAL: f64 = 3e7;
/// Largest accepted KKT violation.
const KKT_TOLERANCE: f64 = 1e-6;

/// Maximize the weighted sum-rate for the instance's matching.
pub fn solve_gp(inst: &GpInstance) -> Result<GpSolution> {
    let n = inst.num_vars();
    if n == 0 {
        return Ok(GpSolution {
            rates: Grid::zeros(inst.num_subchannels, inst.num_users),
            powers: PowerAllocation::zeros(inst.num_subchannels, inst.num_users),
            objective: 0.0,
            kkt_residual: 0.0,
        });
    }

    let raw_w: Vec<f64> = inst
        .channels
        .iter()
        .flat_map(|c| c.users.iter().map(|&j| inst.weights[j]))
        .collect();
    let w_scale = raw_w.iter().cloned().fold(0.0, f64::max);
    let w = DVector::from_iterator(n, raw_w.iter().map(|x| x / w_scale));
    let barrier = Barrier {
        inst,
        w: w.clone(),
        bound: inst.constraint_bound(),
    };

    // strictly feasible start: small equal rates
    let mut delta = 1.0;
    let mut r = vec![delta; n];
    while barrier.value(1.0, &r).is_none() {
        delta *= 0.5;
        r = vec![delta; n];
        if delta < 1e-300 {
            return Err(Error::Config("empty rate region".into()));
        }
    }

    let mut tau = 1.0;
    let mut total_steps = 0;
    'outer: loop {
        // centering
        let mut prev_decrement = f64::INFINITY;
        let mut stalled = 0;
        for _ in 0..MAX_NEWTON_STEPS {
            total_steps += 1;
            let (g, gg, gh) = constraint_derivs(inst, &r);
            let slack = barrier.bound - g;
            let rv = DVector::from_column_slice(&r);
            let inv_r = rv.map(|x| 1.0 / x);
            let grad = -&w * tau + &gg / slack - &inv_r;
            let mut hess = &gh / slack + (&gg * gg.transpose()) / (slack * slack);
            for v in 0..n {
                hess[(v, v)] += inv_r[v] * inv_r[v];
            }
            let Some(chol) = hess.cholesky() else {
                break 'outer;
            };
            let step = chol.solve(&(-&grad));
            let decrement = -grad.dot(&step);
            // the barrier value is scaled by tau, so this gap is negligible
            if decrement / 2.0 <= 1e-9 {
                break;
            }
            if decrement < 1e-6 && decrement >= 0.5 * prev_decrement {
                stalled += 1;
                if stalled >= 5 {
                    break;
                }
            } else {
                stalled = 0;
            }
            prev_decrement = decrement;
            let mut alpha: f64 = 1.0;
            for v in 0..n {
                if step[v] < 0.0 {
                    alpha = alpha.min(-0.99 * r[v] / step[v]);
                }
            }
            let f0 = barrier.value(tau, &r).expect("iterate stays feasible");
            let trial_at = |a: f64| -> Vec<f64> {
                r.iter().zip(step.iter()).map(|(x, d)| x + a * d).collect()
            };
            let mut accepted = None;
            let mut a = alpha;
            for _ in 0..60 {
                let trial = trial_at(a);
                if let Some(f1) = barrier.value(tau, &trial) {
                    if f1 <= f0 - 0.25 * a * decrement {
                        accepted = Some(trial);
                        break;
                    }
                }
                a *= 0.5;
            }
            if accepted.is_none() {
                // Near the centre the barrier value loses precision against
                // `tau * w.R`; fall back to a damped, domain-preserving step.
                let mut a = alpha.min(1.0 / (1.0 + decrement.sqrt()));
                for _ in 0..60 {
                    let trial = trial_at(a);
                    if barrier.value(tau, &trial).is_some() {
                        accepted = Some(trial);
                        break;
                    }
                    a *= 0.5;
                }
            }
            match accepted {
                Some(next) => r = next,
                None => break,
            }
        }
        if tau >= TAU_FINAL {
            break;
        }
        tau = (tau * TAU_GROWTH).min(TAU_FINAL);
    }

    let mut residual = kkt(inst, &r, &w, tau);
    if let Some((refined, lambda)) = polish(inst, &r, &w, tau) {
        let refined_residual = kkt_with_multiplier(inst, &refined, &w, lambda);
        let feasible = inst.constraint_value(&refined) <= inst.constraint_bound() * (1.0 + 1e-12);
        if feasible && refined_residual < residual {
            r = refined;
            residual = refined_residual;
        }
    }
    let sol = finish(inst, &r, &w, w_scale, residual)?;
    if sol.kkt_residual > KKT_TOLERANCE {
        return Err(Error::SolverNonConvergence {
            iterations: total_steps,
            best: Box::new(sol),
        });
    }
    Ok(sol)
}

/// KKT violation at `r`, with weights scaled to max 1.
///
/// The budget multiplier is fitted by least squares on the stationarity
/// condition rather than read off the barrier slack, which loses precision
/// once the slack approaches rounding level.
fn kkt(inst: &GpInstance, r: &[f64], w: &DVector<f64>, tau: f64) -> f64 {
    let (_, gg, _) = constraint_derivs(inst, r);
    let num: f64 = (0..r.len())
        .map(|v| gg[v] * (w[v] + 1.0 / (tau * r[v])))
        .sum();
    let den: f64 = gg.iter().map(|x| x * x).sum();
    kkt_with_multiplier(inst, r, w, num / den)
}

/// KKT violation for a given budget multiplier. The multiplier of each
/// `R >= 0` bound is implied by stationarity; the residual is the worst of
/// its sign violation, its complementarity product and the budget
/// complementarity.
fn kkt_with_multiplier(inst: &GpInstance, r: &[f64], w: &DVector<f64>, lambda: f64) -> f64 {
    let (g, gg, _) = constraint_derivs(inst, r);
    let bound = inst.constraint_bound();
    let mut worst = (lambda * (bound - g) / bound).abs().max((-lambda).max(0.0));
    for v in 0..r.len() {
        let implied = lambda * gg[v] - w[v];
        worst = worst.max((-implied).max(0.0)).max((implied * r[v]).abs());
    }
    worst
}

/// Refine a barrier iterate with an active-set Newton method on the KKT
/// system: rates in the support satisfy `w = lambda * g'` and the budget is
/// tight, rates outside it are zero with a non-negative implied multiplier.
///
/// Returns the refined rates and budget multiplier, or `None` when no valid
/// point is reached.
fn polish(inst: &GpInstance, r0: &[f64], w: &DVector<f64>, tau: f64) -> Option<(Vec<f64>, f64)> {
    let n = r0.len();
    let split = 1.0 / tau.sqrt();
    let mut in_support: Vec<bool> = r0.iter().map(|&x| x > split).collect();
    let mut r: Vec<f64> = (0..n)
        .map(|v| if in_support[v] { r0[v] } else { 0.0 })
        .collect();
    let bound = inst.constraint_bound();
    let mut lambda = None;

    for _ in 0..4 * n + 4 {
        let support: Vec<usize> = (0..n).filter(|&v| in_support[v]).collect();
        if support.is_empty() {
            return None;
        }
        let s = support.len();
        let residual = |r: &[f64], lambda: f64| -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
            let (g, gg, gh) = constraint_derivs(inst, r);
            let mut f = DVector::zeros(s + 1);
            for (i, &v) in support.iter().enumerate() {
                f[i] = w[v] - lambda * gg[v];
            }
            f[s] = (g - bound) / bound;
            (f, gg, gh)
        };
        let mut lam = lambda.unwrap_or_else(|| {
            let (_, gg, _) = constraint_derivs(inst, &r);
            support.iter().map(|&v| gg[v] * w[v]).sum::<f64>()
                / support.iter().map(|&v| gg[v] * gg[v]).sum::<f64>()
        });
        let (mut f, mut gg, mut gh) = residual(&r, lam);
        let mut dropped = None;
        for _ in 0..100 {
            let merit = f.norm_squared();
            if f.amax() <= 1e-15 {
                break;
            }
            let mut jac = DMatrix::zeros(s + 1, s + 1);
            for (i, &a) in support.iter().enumerate() {
                for (k, &b) in support.iter().enumerate() {
                    jac[(i, k)] = -lam * gh[(a, b)];
                }
                jac[(i, s)] = -gg[a];
                jac[(s, i)] = gg[a] / bound;
            }
            let step = jac.lu().solve(&(-&f))?;
            let mut alpha: f64 = 1.0;
            let mut blocking = None;
            for (i, &v) in support.iter().enumerate() {
                if step[i] < 0.0 && -r[v] / step[i] < alpha {
                    alpha = -r[v] / step[i];
                    blocking = Some(v);
                }
            }
            if let Some(v) = blocking {
                dropped = Some(v);
                break;
            }
            let mut moved = false;
            for _ in 0..50 {
                let mut trial = r.clone();
                for (i, &v) in support.iter().enumerate() {
                    trial[v] += alpha * step[i];
                }
                let trial_lam = lam + alpha * step[s];
                let (tf, tgg, tgh) = residual(&trial, trial_lam);
                if tf.norm_squared() < merit * (1.0 - 1e-4 * alpha) {
                    r = trial;
                    lam = trial_lam;
                    f = tf;
                    gg = tgg;
                    gh = tgh;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        lambda = Some(lam);
        if let Some(v) = dropped {
            in_support[v] = false;
            r[v] = 0.0;
            continue;
        }
        if f.amax() > 1e-12 {
            return Some((r, lam));
        }
        // add the zero rate whose implied multiplier is most negative
        let entering = (0..n)
            .filter(|&v| !in_support[v])
            .map(|v| (v, lam * gg[v] - w[v]))
            .filter(|&(_, implied)| implied < -1e-12)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match entering {
            Some((v, _)) => {
                in_support[v] = true;
                r[v] = split;
            }
            None => return Some((r, lam)),
        }
    }
    lambda.map(|l| (r, l))
}

fn finish(
    inst: &GpInstance,
    r: &[f64],
    w: &DVector<f64>,
    w_scale: f64,
    kkt_residual: f64,
) -> Result<GpSolution> {
    let rates = inst.unflatten(r);
    let powers = recover_powers(inst, &rates)?;
    let objective = r.iter().zip(w.iter()).map(|(a, b)| a * b * w_scale).sum();
    Ok(GpSolution {
        rates,
        powers,
        objective,
        kkt_residual,
    })
}

/// Powers that put every sub-channel exactly on the boundary of its rate
/// region for the given rates.
///
/// With `S_t` the total power of the `t` strongest users,
/// `S_t + m_t = sum_{i <= t} (m_i - m_{i-1}) * 2^(R_i + ... + R_t)`.
pub fn recover_powers(inst: &GpInstance, rates: &Grid) -> Result<PowerAllocation> {
    let mut out = PowerAllocation::zeros(inst.num_subchannels, inst.num_users);
    for c in &inst.channels {
        let r: Vec<f64> = c.users.iter().map(|&j| rates.get(c.k, j)).collect();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config(format!(
                "rates on sub-channel {} must be finite and non-negative",
                c.k
            )));
        }
        // S_t + m_t, built incrementally: A_t = 2^{R_t} (A_{t-1} - m_{t-1} + m_t)
        let mut prev_cum = 0.0;
        let mut acc = 0.0;
        for (t, &rt) in r.iter().enumerate() {
            let prev_m = if t == 0 { 0.0 } else { c.m[t - 1] };
            acc = (acc + c.m[t] - prev_m) * (LN_2 * rt).exp();
            let cum = acc - c.m[t];
            let p = cum - prev_cum;
            if p < -NEGATIVE_TOLERANCE {
                return Err(Error::InfeasibleRates { k: c.k, value: p });
            }
            out.set(c.k, c.users[t], p.max(0.0));
            prev_cum = cum;
        }
    }
    Ok(out)
}

/// Spread the budget equally over every matched pair.
pub fn equal_power(matching: &Matching, total_power: f64) -> PowerAllocation {
    let pairs = matching.pair_count();
    if pairs == 0 {
        return PowerAllocation::zeros(matching.num_subchannels(), matching.num_users());
    }
    PowerAllocation::uniform_on(matching, total_power / pairs as f64)
}

/// Build, solve and recover in one call.
pub fn optimize_power(
    ch: &ChannelRealization,
    matching: &Matching,
    weights: &UserWeights,
    total_power: f64,
) -> Result<GpSolution> {
    solve_gp(&build_gp(ch, matching, weights, total_power)?)
}

#[doc(hidden)]
pub fn flatten_rates(inst: &GpInstance, rates: &Grid) -> Vec<f64> {
    inst.flatten(rates)
}
