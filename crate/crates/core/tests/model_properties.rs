mod common;

use common::{config, rng, sic_rates, unit_noise_channel};
use noma_core::usma::random_feasible_matching;
use noma_core::{
    decoding_order, subchannel_rate, total_utility, user_rate, validate, ChannelRealization,
    Matching, PowerAllocation, UserWeights, Violation,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn two_users_on_one_channel_hand_evaluation() {
    // Equal unit gains: user 0 decodes first by index, user 1 sees its power.
    let ch = ChannelRealization::with_unit_noise(&[vec![1.0, 1.0]]);
    let m = Matching::from_pairs(2, 1, 2, 1, &[(0, 0), (0, 1)]).unwrap();
    let mut p = PowerAllocation::zeros(1, 2);
    p.set(0, 0, 1.0);
    p.set(0, 1, 2.0);
    let expected = (1.0f64 + 1.0).log2() + (1.0f64 + 2.0 / (1.0 + 1.0)).log2();
    let u = total_utility(&ch, &m, &p, &UserWeights::uniform(2)).unwrap();
    assert!((u - expected).abs() < 1e-12);
}

#[test]
fn validate_reports_each_violation() {
    let c = config(3, 2, 1, 1);
    let ok = Matching::from_pairs(3, 2, 1, 1, &[(0, 0), (1, 1)]).unwrap();
    assert!(validate(&c, &ok, &PowerAllocation::uniform_on(&ok, 0.5)).is_ok());

    let crowded = Matching::from_pairs_unchecked(3, 2, 1, 1, &[(0, 0), (0, 1)]).unwrap();
    let v = validate(&c, &crowded, &PowerAllocation::uniform_on(&crowded, 0.1)).unwrap_err();
    assert!(v.contains(&Violation::SubchannelQuota { k: 0, count: 2 }));

    let v = validate(&c, &ok, &PowerAllocation::uniform_on(&ok, 0.505)).unwrap_err();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].constraint(), "6e");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matchings_stay_mutually_consistent(seed in any::<u64>(), m in 1usize..8, k in 1usize..6, df in 1usize..4, dv in 1usize..4) {
        let (df, dv) = (df.min(m), dv.min(k));
        let mut r = rng(seed);
        let mut mat = random_feasible_matching(m, k, df, dv, &mut r);
        for _ in 0..20 {
            let (kk, jj) = (r.random_range(0..k), r.random_range(0..m));
            if mat.contains(kk, jj) {
                mat.remove(kk, jj).unwrap();
            } else {
                let _ = mat.add(kk, jj);
            }
            for sub in 0..k {
                prop_assert!(mat.users_on(sub).len() <= df);
                for &u in mat.users_on(sub) {
                    prop_assert!(mat.subs_of(u).contains(&sub));
                }
            }
            for u in 0..m {
                prop_assert!(mat.subs_of(u).len() <= dv);
                for &sub in mat.subs_of(u) {
                    prop_assert!(mat.users_on(sub).contains(&u));
                }
            }
        }
    }

    #[test]
    fn rates_match_direct_sic_evaluation(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let ch = unit_noise_channel(&mut r, 1, n);
        let pairs: Vec<(usize, usize)> = (0..n).map(|j| (0, j)).collect();
        let mat = Matching::from_pairs(n, 1, n, 1, &pairs).unwrap();
        let mut p = PowerAllocation::zeros(1, n);
        let powers: Vec<f64> = (0..n).map(|_| r.random_range(0.01..3.0)).collect();
        for (j, &x) in powers.iter().enumerate() {
            p.set(0, j, x);
        }
        let gains: Vec<f64> = (0..n).map(|j| ch.gain(0, j)).collect();
        let expected = sic_rates(&gains, &vec![1.0; n], &powers);
        for (j, want) in expected.iter().enumerate() {
            let got = user_rate(&ch, &mat, &p, 0, j).unwrap();
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn weaker_peer_power_never_hurts(seed in any::<u64>(), n in 2usize..5, shrink in 0.0f64..1.0) {
        let mut r = rng(seed);
        let ch = unit_noise_channel(&mut r, 1, n);
        let pairs: Vec<(usize, usize)> = (0..n).map(|j| (0, j)).collect();
        let mat = Matching::from_pairs(n, 1, n, 1, &pairs).unwrap();
        let p = PowerAllocation::uniform_on(&mat, 1.0);
        let order = decoding_order(&ch, 0, mat.users_on(0)).unwrap();
        let strong = order[0];
        let mut reduced = p.clone();
        reduced.set(0, strong, shrink);
        for &j in &order[1..] {
            prop_assert!(user_rate(&ch, &mat, &reduced, 0, j).unwrap() >= user_rate(&ch, &mat, &p, 0, j).unwrap());
        }
    }

    #[test]
    fn utility_is_the_sum_of_subchannel_rates(seed in any::<u64>(), m in 1usize..8, k in 1usize..6) {
        let mut r = rng(seed);
        let ch = unit_noise_channel(&mut r, k, m);
        let w = common::random_weights(&mut r, m);
        let mat = random_feasible_matching(m, k, 2.min(m), 2.min(k), &mut r);
        let p = PowerAllocation::uniform_on(&mat, 0.3);
        let total = total_utility(&ch, &mat, &p, &w).unwrap();
        let sum: f64 = (0..k).map(|kk| subchannel_rate(&ch, &mat, &p, &w, kk)).sum();
        prop_assert!((total - sum).abs() <= 1e-12 * total.max(1e-300));
    }

    #[test]
    fn lone_user_has_interference_free_rate(seed in any::<u64>(), power in 0.0f64..10.0) {
        let mut r = rng(seed);
        let ch = unit_noise_channel(&mut r, 3, 3);
        let mat = Matching::from_pairs(3, 3, 1, 1, &[(0, 2), (1, 0), (2, 1)]).unwrap();
        let p = PowerAllocation::uniform_on(&mat, power);
        for (k, j) in mat.pairs() {
            let expected = (1.0 + power * ch.gain(k, j)).log2();
            prop_assert!((user_rate(&ch, &mat, &p, k, j).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn decoding_order_is_a_strict_total_order(gains in proptest::collection::vec(prop_oneof![Just(1.0), Just(2.0), 0.1f64..5.0], 1..7)) {
        let ch = ChannelRealization::with_unit_noise(std::slice::from_ref(&gains));
        let users: Vec<usize> = (0..gains.len()).rev().collect();
        let order = decoding_order(&ch, 0, &users).unwrap();
        prop_assert_eq!(order.len(), gains.len());
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            prop_assert!(gains[a] > gains[b] || (gains[a] == gains[b] && a < b));
            prop_assert_eq!(ch.sic_cmp(0, a, b), ch.sic_cmp(0, b, a).reverse());
            prop_assert_ne!(ch.sic_cmp(0, a, b), std::cmp::Ordering::Equal);
        }
    }
}
