mod common;

use common::{physical_channel, rng, sic_rates, unit_noise_channel};
use noma_core::power::{build_gp, equal_power, optimize_power, recover_powers, solve_gp};
use noma_core::usma::random_feasible_matching;
use noma_core::{total_utility, Matching, PowerAllocation, UserWeights};
use proptest::prelude::*;
use rand::Rng;

/// Best weighted sum-rate over all power splits on a grid of `steps` units
/// per watt-budget, evaluated with the direct SIC formula. `channels` lists,
/// per sub-channel, `(gain, weight)` for each occupant under unit noise.
fn grid_oracle(channels: &[Vec<(f64, f64)>], budget: f64, steps: usize) -> f64 {
    let slots: usize = channels.iter().map(|c| c.len()).sum();
    let mut best = 0.0f64;
    let mut alloc = vec![0usize; slots];
    fn rec(idx: usize, left: usize, alloc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if idx + 1 == alloc.len() {
            alloc[idx] = left;
            f(alloc);
            return;
        }
        for a in 0..=left {
            alloc[idx] = a;
            rec(idx + 1, left - a, alloc, f);
        }
    }
    let mut eval = |alloc: &[usize]| {
        let mut off = 0;
        let mut total = 0.0;
        for c in channels {
            let gains: Vec<f64> = c.iter().map(|x| x.0).collect();
            let powers: Vec<f64> = alloc[off..off + c.len()]
                .iter()
                .map(|&a| a as f64 * budget / steps as f64)
                .collect();
            let rates = sic_rates(&gains, &vec![1.0; c.len()], &powers);
            total += rates.iter().zip(c).map(|(r, x)| r * x.1).sum::<f64>();
            off += c.len();
        }
        best = best.max(total);
    };
    rec(0, steps, &mut alloc, &mut eval);
    best
}

#[test]
fn weak_user_favoured_pair_matches_grid_search() {
    let ch = noma_core::ChannelRealization::with_unit_noise(&[vec![4.0, 1.0]]);
    let m = Matching::from_pairs(2, 1, 2, 1, &[(0, 0), (0, 1)]).unwrap();
    let w = UserWeights::new(vec![1.0, 2.0]).unwrap();
    let sol = optimize_power(&ch, &m, &w, 1.0).unwrap();
    let oracle = grid_oracle(&[vec![(4.0, 1.0), (1.0, 2.0)]], 1.0, 2000);
    assert!(sol.objective >= oracle * (1.0 - 1e-3));
    assert!(sol.objective <= oracle * (1.0 + 1e-3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solver_is_at_least_as_good_as_the_grid(seed in any::<u64>(), two_channels in any::<bool>()) {
        let mut r = rng(seed);
        let k = if two_channels { 2 } else { 1 };
        let ch = unit_noise_channel(&mut r, k, 2);
        let w = common::random_weights(&mut r, 2);
        let mut pairs = vec![];
        for kk in 0..k {
            let n = r.random_range(1..=2);
            for j in 0..n {
                pairs.push((kk, (j + kk) % 2));
            }
        }
        let m = Matching::from_pairs(2, k, 2, 2, &pairs).unwrap();
        let budget = r.random_range(0.5..20.0);
        let sol = optimize_power(&ch, &m, &w, budget).unwrap();
        let channels: Vec<Vec<(f64, f64)>> = (0..k)
            .map(|kk| m.users_on(kk).iter().map(|&j| (ch.gain(kk, j), w.get(j))).collect())
            .collect();
        let steps = if two_channels { 120 } else { 2000 };
        let oracle = grid_oracle(&channels, budget, steps);
        prop_assert!(sol.objective >= oracle * (1.0 - 1e-3), "{} < {}", sol.objective, oracle);
    }

    #[test]
    fn solutions_satisfy_kkt_and_use_the_budget(seed in any::<u64>(), physical in any::<bool>()) {
        let mut r = rng(seed);
        let (m, k) = (r.random_range(2..12), r.random_range(1..8));
        let ch = if physical { physical_channel(&mut r, k, m) } else { unit_noise_channel(&mut r, k, m) };
        // proportional-fairness weights can span many decades
        let w = UserWeights::new((0..m).map(|_| 10f64.powf(r.random_range(-2.0..6.0))).collect()).unwrap();
        let mat = random_feasible_matching(m, k, 3.min(m), 3.min(k), &mut r);
        let budget = if physical { 39.81 } else { r.random_range(0.1..10.0) };
        let sol = optimize_power(&ch, &mat, &w, budget).unwrap();
        prop_assert!(sol.kkt_residual <= 1e-6);
        let total = sol.powers.total();
        prop_assert!((total - budget).abs() <= 1e-6 * budget, "{} vs {}", total, budget);
        prop_assert!(sol.powers.p.iter().all(|x| x >= 0.0));
        let inst = build_gp(&ch, &mat, &w, budget).unwrap();
        let flat = noma_core::power::flatten_rates(&inst, &sol.rates);
        prop_assert!(inst.constraint_value(&flat) <= inst.constraint_bound() * (1.0 + 1e-8));
        // the recovered powers reproduce the rates
        let achieved = noma_core::model::rate_grid(&ch, &mat, &sol.powers);
        for (a, b) in achieved.iter().zip(sol.rates.iter()) {
            prop_assert!((a - b).abs() <= 1e-6 * b.max(1.0));
        }
        let eq = equal_power(&mat, budget);
        let eq_u = total_utility(&ch, &mat, &eq, &w).unwrap();
        prop_assert!(sol.objective >= eq_u * (1.0 - 1e-9));
        let recomputed = total_utility(&ch, &mat, &sol.powers, &w).unwrap();
        prop_assert!((recomputed - sol.objective).abs() <= 1e-6 * sol.objective.max(1.0));
    }

    #[test]
    fn recovery_inverts_the_rate_map(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (m, k) = (r.random_range(1..8), r.random_range(1..5));
        let ch = unit_noise_channel(&mut r, k, m);
        let w = UserWeights::uniform(m);
        let mat = random_feasible_matching(m, k, 3.min(m), 2.min(k), &mut r);
        let mut p = PowerAllocation::zeros(k, m);
        for (kk, j) in mat.pairs() {
            p.set(kk, j, r.random_range(0.0..2.0));
        }
        let rates = noma_core::model::rate_grid(&ch, &mat, &p);
        let inst = build_gp(&ch, &mat, &w, p.total().max(1e-12)).unwrap();
        let back = recover_powers(&inst, &rates).unwrap();
        for kk in 0..k {
            let a: f64 = p.p.row(kk).iter().sum();
            let b: f64 = back.p.row(kk).iter().sum();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12), "sub-channel {}: {} vs {}", kk, a, b);
        }
    }

    #[test]
    fn constraint_is_midpoint_convex(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (m, k) = (r.random_range(1..8), r.random_range(1..5));
        let ch = unit_noise_channel(&mut r, k, m);
        let mat = random_feasible_matching(m, k, 3.min(m), 2.min(k), &mut r);
        let inst = build_gp(&ch, &mat, &UserWeights::uniform(m), 1.0).unwrap();
        let n = inst.num_vars();
        let a: Vec<f64> = (0..n).map(|_| r.random_range(0.0..6.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(0.0..6.0)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let lhs = inst.constraint_value(&mid);
        let rhs = 0.5 * (inst.constraint_value(&a) + inst.constraint_value(&b));
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }
}

#[test]
fn solver_handles_empty_and_single_channels() {
    let ch = noma_core::ChannelRealization::with_unit_noise(&[vec![2.0]]);
    let m = Matching::from_pairs(1, 1, 1, 1, &[(0, 0)]).unwrap();
    let inst = build_gp(&ch, &m, &UserWeights::uniform(1), 3.0).unwrap();
    let sol = solve_gp(&inst).unwrap();
    assert!((sol.powers.get(0, 0) - 3.0).abs() < 1e-9);
    assert!((sol.rates.get(0, 0) - 7f64.log2()).abs() < 1e-9);
}
