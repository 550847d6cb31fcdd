#![allow(dead_code)]

use noma_core::{ChannelRealization, Grid, SystemConfig, UserWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit-noise channel with gains log-uniform in `[0.01, 100]`.
pub fn unit_noise_channel(rng: &mut impl Rng, k: usize, m: usize) -> ChannelRealization {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..m)
                .map(|_| 10f64.powf(rng.random_range(-2.0..2.0)))
                .collect()
        })
        .collect();
    ChannelRealization::with_unit_noise(&rows)
}

/// Channel on the physical scale of a macro cell: noise around 1e-14 W and
/// normalized gains spanning several decades.
pub fn physical_channel(rng: &mut impl Rng, k: usize, m: usize) -> ChannelRealization {
    let noise = 4.5e6 / k as f64 * 10f64.powf((-174.0 - 30.0) / 10.0);
    let gain: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..m)
                .map(|_| 10f64.powf(rng.random_range(-13.0..-9.0)))
                .collect()
        })
        .collect();
    ChannelRealization::new(
        Grid::from_rows(&gain),
        Grid::filled(k, m, noise),
        vec![100.0; m],
    )
    .unwrap()
}

pub fn random_weights(rng: &mut impl Rng, m: usize) -> UserWeights {
    UserWeights::new((0..m).map(|_| rng.random_range(0.2..5.0)).collect()).unwrap()
}

pub fn config(m: usize, k: usize, df: usize, dv: usize) -> SystemConfig {
    SystemConfig::small(m, k, df, dv)
}

/// Direct evaluation of the SIC rate formula for one sub-channel: users in
/// decreasing order of `gain / noise` (lower index first on ties), each one
/// interfered by the powers of the users decoded before it.
pub fn sic_rates(gain: &[f64], noise: &[f64], power: &[f64]) -> Vec<f64> {
    let n = gain.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (gain[b] / noise[b])
            .partial_cmp(&(gain[a] / noise[a]))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut rates = vec![0.0; n];
    for (pos, &u) in order.iter().enumerate() {
        let interference: f64 = order[..pos].iter().map(|&s| power[s]).sum::<f64>() * gain[u];
        rates[u] = (1.0 + power[u] * gain[u] / (noise[u] + interference)).log2();
    }
    rates
}
