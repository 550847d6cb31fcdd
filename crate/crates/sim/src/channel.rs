//! Large-scale path loss and Rayleigh block fading.

use noma_core::{ChannelRealization, Grid, SystemConfig};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Distances below this are clamped before applying the path-loss model.
pub const MIN_DISTANCE_M: f64 = 10.0;
pub const BS_HEIGHT_M: f64 = 30.0;
pub const MS_HEIGHT_M: f64 = 1.5;

/// COST-231 Hata urban path loss in dB for a medium-sized city.
pub fn hata_path_loss_db(distance_m: f64, carrier_freq_hz: f64) -> f64 {
    let f = carrier_freq_hz / 1e6;
    let lf = f.log10();
    let hb = BS_HEIGHT_M.log10();
    let a_hm = (1.1 * lf - 0.7) * MS_HEIGHT_M - (1.56 * lf - 0.8);
    let d_km = distance_m.max(MIN_DISTANCE_M) / 1000.0;
    46.3 + 33.9 * lf - 13.82 * hb - a_hm + (44.9 - 6.55 * hb) * d_km.log10()
}

/// Users placed uniformly in the square cell around the base station;
/// returns their distances in metres (clamped to [`MIN_DISTANCE_M`]).
pub fn drop_users<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Vec<f64> {
    let half = config.cell_side_m / 2.0;
    (0..config.num_users)
        .map(|_| {
            let x = rng.random_range(-half..=half);
            let y = rng.random_range(-half..=half);
            x.hypot(y).max(MIN_DISTANCE_M)
        })
        .collect()
}

/// One fading block for users at `distances_m` over `num_subchannels` bands.
pub fn fade<R: Rng + ?Sized>(
    config: &SystemConfig,
    distances_m: &[f64],
    num_subchannels: usize,
    rng: &mut R,
) -> ChannelRealization {
    let m = distances_m.len();
    let path_gain: Vec<f64> = distances_m
        .iter()
        .map(|&d| 10f64.powf(-hata_path_loss_db(d, config.carrier_freq_hz) / 10.0))
        .collect();
    let mut gain = Grid::zeros(num_subchannels, m);
    for k in 0..num_subchannels {
        for (j, pg) in path_gain.iter().enumerate() {
            let g: f64 = Exp1.sample(rng);
            gain.set(k, j, g * pg);
        }
    }
    let noise = Grid::filled(
        num_subchannels,
        m,
        config.subchannel_noise_watts(num_subchannels),
    );
    ChannelRealization::new(gain, noise, distances_m.to_vec())
        .expect("generated gains and noise are valid")
}

/// Fresh user drop and one fading block.
pub fn generate_channel<R: Rng + ?Sized>(
    config: &SystemConfig,
    rng: &mut R,
    num_subchannels: usize,
) -> ChannelRealization {
    let d = drop_users(config, rng);
    fade(config, &d, num_subchannels, rng)
}
