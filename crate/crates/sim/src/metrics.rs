//! Per-allocation and per-trial metrics.

use noma_core::Allocation;

use crate::error::{Result, SimError};

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)` with `n` the number of
/// users, or `denominator` when given.
pub fn jain_index(avg_rates: &[f64], denominator: Option<usize>) -> Result<f64> {
    let sum: f64 = avg_rates.iter().sum();
    let sq: f64 = avg_rates.iter().map(|x| x * x).sum();
    if !(sq > 0.0) {
        return Err(SimError::Core(noma_core::Error::NoThroughput));
    }
    let n = denominator.unwrap_or(avg_rates.len()) as f64;
    Ok(sum * sum / (n * sq))
}

/// Users holding at least one link with power above `1e-9 * total_power`.
pub fn scheduled_user_count(allocation: &Allocation, total_power: f64) -> usize {
    let eps = 1e-9 * total_power;
    let m = &allocation.matching;
    (0..m.num_users())
        .filter(|&j| {
            m.subs_of(j)
                .iter()
                .any(|&k| allocation.power.get(k, j) > eps)
        })
        .count()
}

/// Unweighted sum-rate divided by the number of sub-channels: bps per Hz of
/// the whole system bandwidth.
pub fn spectral_efficiency(allocation: &Allocation) -> f64 {
    allocation.sum_rate() / allocation.matching.num_subchannels() as f64
}

/// Sample mean and (n - 1) standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
