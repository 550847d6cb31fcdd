//! A self-contained instance with a matching, saved as JSON so that oracle
//! results can be certified later.

use std::path::Path;

use noma_core::swap::{is_two_sided_exchange_stable, Stability};
use noma_core::{Allocation, ChannelRealization, Grid, Matching, PowerAllocation, UserWeights};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedInstance {
    pub df: usize,
    pub dv: usize,
    pub total_power_watts: f64,
    /// `|h_{k,j}|^2`, one row per sub-channel.
    pub gain_sq: Vec<Vec<f64>>,
    /// Noise power per link, one row per sub-channel.
    pub noise: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Matched `[k, j]` pairs.
    pub pairs: Vec<[usize; 2]>,
    /// Power per link of the saved allocation, if any.
    #[serde(default)]
    pub power: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub total_utility: Option<f64>,
}

fn rows(g: &Grid) -> Vec<Vec<f64>> {
    (0..g.rows()).map(|r| g.row(r).to_vec()).collect()
}

impl SavedInstance {
    pub fn from_allocation(
        ch: &ChannelRealization,
        weights: &UserWeights,
        total_power_watts: f64,
        allocation: &Allocation,
    ) -> Self {
        SavedInstance {
            df: allocation.matching.df(),
            dv: allocation.matching.dv(),
            total_power_watts,
            gain_sq: rows(&ch.gain_sq),
            noise: rows(&ch.noise),
            weights: weights.as_slice().to_vec(),
            pairs: allocation.matching.pairs().map(|(k, j)| [k, j]).collect(),
            power: Some(rows(&allocation.power.p)),
            total_utility: Some(allocation.total_utility),
        }
    }

    pub fn channel(&self) -> Result<ChannelRealization> {
        let gain = Grid::from_rows(&self.gain_sq);
        let noise = Grid::from_rows(&self.noise);
        let m = gain.cols();
        Ok(ChannelRealization::new(gain, noise, vec![0.0; m])?)
    }

    pub fn matching(&self) -> Result<Matching> {
        let k = self.gain_sq.len();
        let m = self.gain_sq.first().map_or(0, Vec::len);
        let pairs: Vec<(usize, usize)> = self.pairs.iter().map(|p| (p[0], p[1])).collect();
        Ok(Matching::from_pairs(m, k, self.df, self.dv, &pairs)?)
    }

    /// Powers used while matching: every matched pair gets `P_s / (K d_f)`.
    pub fn phase_powers(&self, matching: &Matching) -> PowerAllocation {
        let per_pair = self.total_power_watts / (matching.num_subchannels() * self.df) as f64;
        PowerAllocation::uniform_on(matching, per_pair)
    }

    /// Exhaustive two-sided exchange stability of the saved matching under
    /// matching-phase powers. Saved powers are not used.
    pub fn stability(&self, eps: f64) -> Result<Stability> {
        let ch = self.channel()?;
        let m = self.matching()?;
        let w = UserWeights::new(self.weights.clone())?;
        if w.len() != ch.num_users() {
            return Err(SimError::Config(
                "weights length must equal the user count".into(),
            ));
        }
        let p = self.phase_powers(&m);
        Ok(is_two_sided_exchange_stable(&ch, &m, &w, &p, eps))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
