mod common;

use common::{config, physical_channel, rng, unit_noise_channel};
use noma_core::baselines::{
    brute_force_joint, ofdma_baseline, prop2_relaxed_optimum, ra_noma, ug_ftpc, FtpcConfig,
    OracleMode,
};
use noma_core::jspa::{jspa_run, JspaConfig};
use noma_core::{
    validate, ChannelRealization, Matching, PowerAllocation, SystemConfig, UserWeights,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn random_allocation_respects_quotas_over_many_seeds() {
    let ch = unit_noise_channel(&mut rng(0), 4, 7);
    let c = config(7, 4, 2, 2);
    for seed in 0..1000 {
        let a = ra_noma(&ch, &c, &mut rng(seed));
        assert!(validate(&c, &a.matching, &a.power).is_ok());
    }
    let one = config(4, 4, 1, 1);
    let ch4 = unit_noise_channel(&mut rng(1), 4, 4);
    let a = ra_noma(&ch4, &one, &mut rng(3));
    assert_eq!(a.matching.pair_count(), 4);
    assert_eq!(a, ra_noma(&ch4, &one, &mut rng(3)));
}

#[test]
fn ftpc_power_shares() {
    // two groups, so both users share each sub-channel
    let ch = ChannelRealization::with_unit_noise(&[vec![4.0, 1.0], vec![4.0, 1.0]]);
    let c = config(2, 2, 2, 2);
    let a = ug_ftpc(&ch, &c, &FtpcConfig { alpha: 1.0 });
    assert!((a.power.get(0, 1) / a.power.get(0, 0) - 4.0).abs() < 1e-12);
    let flat = ug_ftpc(&ch, &c, &FtpcConfig { alpha: 0.0 });
    assert_eq!(flat.power.get(0, 0), flat.power.get(0, 1));
}

#[test]
fn ofdma_single_user_takes_best_channels() {
    let ch = ChannelRealization::with_unit_noise(&[vec![1.0], vec![5.0], vec![3.0]]);
    let a = ofdma_baseline(&ch, &config(1, 3, 1, 2), &UserWeights::uniform(1));
    assert!(a.matching.contains(1, 0) && a.matching.contains(2, 0) && !a.matching.contains(0, 0));
}

#[test]
fn single_strongest_user_beats_every_shared_split() {
    // strongest-user-only versus every split of the same channel budget
    for seed in 0..100 {
        let mut r = rng(seed);
        let (g1, g2): (f64, f64) = (r.random_range(0.1..10.0), r.random_range(0.1..10.0));
        if g1 == g2 {
            continue;
        }
        let (strong, weak) = if g1 > g2 { (g1, g2) } else { (g2, g1) };
        let budget = r.random_range(0.1..5.0);
        let alone = (1.0 + budget * strong).log2();
        for b in 1..100 {
            let beta = b as f64 / 100.0;
            let shared = (1.0 + beta * budget * strong).log2()
                + (1.0 + (1.0 - beta) * budget * weak / (beta * budget * weak + 1.0)).log2();
            assert!(alone > shared);
        }
    }
}

#[test]
fn oracle_shapes() {
    let ch = ChannelRealization::with_unit_noise(&[vec![1.0, 3.0]]);
    let a = brute_force_joint(
        &ch,
        &config(2, 1, 1, 1),
        &UserWeights::uniform(2),
        OracleMode::Exact,
    )
    .unwrap();
    assert!(a.matching.contains(0, 1) && a.matching.pair_count() == 1);
    assert!((a.power.get(0, 1) - 1.0).abs() < 1e-9);
    let big = unit_noise_channel(&mut rng(0), 6, 12);
    let err = brute_force_joint(
        &big,
        &config(12, 6, 3, 3),
        &UserWeights::uniform(12),
        OracleMode::Exact,
    );
    assert!(matches!(
        err,
        Err(noma_core::Error::OracleScaleExceeded { .. })
    ));
}

#[test]
fn grid_and_exact_oracles_agree() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let (m, k) = (r.random_range(2..4), r.random_range(1..3));
        let ch = unit_noise_channel(&mut r, k, m);
        let c = config(m, k, 2, 1);
        let w = common::random_weights(&mut r, m);
        let exact = brute_force_joint(&ch, &c, &w, OracleMode::Exact)
            .unwrap()
            .total_utility;
        let grid = brute_force_joint(&ch, &c, &w, OracleMode::Grid(40))
            .unwrap()
            .total_utility;
        assert!(
            (exact - grid).abs() <= 1e-2 * exact,
            "seed {seed}: {exact} vs {grid}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn baselines_produce_valid_allocations(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (m, k) = (r.random_range(1..12), r.random_range(1..8));
        let (df, dv) = (r.random_range(1..4).min(m), r.random_range(1..5).min(k));
        let c = SystemConfig { num_users: m, num_subchannels: k, df, dv, ..Default::default() };
        let ch = physical_channel(&mut r, k, m);
        let w = common::random_weights(&mut r, m);

        let ra = ra_noma(&ch, &c, &mut r);
        prop_assert!(validate(&c, &ra.matching, &ra.power).is_ok());

        let ug = ug_ftpc(&ch, &c, &FtpcConfig::default());
        prop_assert!(validate(&c, &ug.matching, &ug.power).is_ok());
        let per = c.total_power_watts / k as f64;
        let groups = dv.min(m);
        for kk in 0..k {
            let users = ug.matching.users_on(kk);
            if !users.is_empty() {
                let s: f64 = ug.power.p.row(kk).iter().sum();
                prop_assert!((s - per).abs() <= 1e-12 * per);
            }
            // at most one member of each group per sub-channel
            let mut ranked: Vec<usize> = (0..m).collect();
            let mean = |j: usize| (0..k).map(|x| ch.normalized_gain(x, j)).sum::<f64>();
            ranked.sort_by(|&a, &b| mean(b).total_cmp(&mean(a)).then(a.cmp(&b)));
            let group = |j: usize| ranked.iter().position(|&x| x == j).unwrap() * groups / m;
            let mut seen = std::collections::HashSet::new();
            for &j in users {
                prop_assert!(seen.insert(group(j)));
            }
        }

        let of = ofdma_baseline(&ch, &c, &w);
        let ofc = SystemConfig { df: 1, ..c.clone() };
        prop_assert!(validate(&ofc, &of.matching, &of.power).is_ok());
        prop_assert!((0..k).all(|kk| of.matching.users_on(kk).len() <= 1));

        let p2 = prop2_relaxed_optimum(&ch, &c);
        for kk in 0..k {
            let occupant = p2.matching.users_on(kk)[0];
            for j in 0..m {
                prop_assert!(ch.normalized_gain(kk, occupant) >= ch.normalized_gain(kk, j));
                // any other single user on this channel with the same budget does no better
                let alt = (1.0 + per * ch.gain(kk, j) / ch.noise(kk, j)).log2();
                prop_assert!(p2.rates.get(kk, occupant) >= alt - 1e-12);
            }
        }
    }

    #[test]
    fn oracle_dominates_every_scheme(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (m, k) = (r.random_range(2..5), r.random_range(1..4));
        let c = config(m, k, 2, 2.min(k));
        let ch = unit_noise_channel(&mut r, k, m);
        let w = UserWeights::uniform(m);
        let oracle = brute_force_joint(&ch, &c, &w, OracleMode::Exact).unwrap().total_utility;
        let tol = 1e-9 * oracle;
        let others = [
            ra_noma(&ch, &c, &mut r).total_utility,
            ug_ftpc(&ch, &c, &FtpcConfig::default()).total_utility,
            jspa_run(&ch, &c, &w, &JspaConfig::default(), &mut r).unwrap().allocation.total_utility,
        ];
        for u in others {
            prop_assert!(u <= oracle + tol, "{} > {}", u, oracle);
        }
        let single = Matching::from_pairs(m, k, 2, 2.min(k), &[(0, 0)]).unwrap();
        let p = PowerAllocation::uniform_on(&single, c.total_power_watts);
        prop_assert!(noma_core::total_utility(&ch, &single, &p, &w).unwrap() <= oracle + tol);
    }
}
