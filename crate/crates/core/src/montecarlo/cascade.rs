//! Photon-number resolution built from ordinary on/off detectors: split the
//! beam into `n` arms with balanced splitters and put a detector in each.
//!
//! For two photons in one input mode the output amplitude is
//! `(Σ_k b_k†/√n)² |0>/√2`, which puts probability `1/n²` on each `|2_k>` and
//! `2/n²` on each `|1_k 1_l>`. Both photons therefore share an arm with
//! probability `1/n`, in which case a single detector fires and the pair
//! is misread as one photon.

use serde::{Deserialize, Serialize};

use super::rng::EventStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonResponse {
    pub two_fire: f64,
    pub one_fires: f64,
    pub none_fire: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePhotonResponse {
    pub one_fires: f64,
    pub none_fire: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub fan_out: usize,
    pub efficiency: f64,
    /// Both photons of a same-mode pair exit the same arm.
    pub same_arm: f64,
    /// They exit different arms.
    pub split_arms: f64,
    pub two_photon: TwoPhotonResponse,
    pub single_photon: SinglePhotonResponse,
}

fn check(n: usize, efficiency: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameters(format!("fan-out {n} < 2")));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::InvalidParameters(format!("efficiency {efficiency} not in (0, 1]")));
    }
    Ok(())
}

pub fn cascade_misclassification(n: usize, efficiency: f64) -> Result<CascadeReport> {
    check(n, efficiency)?;
    let same = 1.0 / n as f64;
    let split = 1.0 - same;
    let miss = 1.0 - efficiency;
    Ok(CascadeReport {
        fan_out: n,
        efficiency,
        same_arm: same,
        split_arms: split,
        two_photon: TwoPhotonResponse {
            two_fire: split * efficiency * efficiency,
            one_fires: same * (1.0 - miss * miss) + split * 2.0 * efficiency * miss,
            none_fire: miss * miss,
        },
        single_photon: SinglePhotonResponse {
            one_fires: efficiency,
            none_fire: miss,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CascadeCounts {
    pub trials: u64,
    pub same_arm: u64,
    pub two_fire: u64,
    pub one_fires: u64,
    pub none_fire: u64,
}

/// Samples two-photon same-mode inputs photon by photon. A single input mode
/// splits like two independent particles, so each photon picks an arm
/// uniformly; each is then detected with probability `efficiency`.
pub fn sample_cascade(n: usize, efficiency: f64, trials: u64, seed: u64) -> Result<CascadeCounts> {
    check(n, efficiency)?;
    let mut rng = EventStream::new(seed);
    let mut counts = CascadeCounts {
        trials,
        ..Default::default()
    };
    for _ in 0..trials {
        let a = rng.index_below(n);
        let b = rng.index_below(n);
        let seen_a = rng.uniform() < efficiency;
        let seen_b = rng.uniform() < efficiency;
        if a == b {
            counts.same_arm += 1;
        }
        let fired = if a == b {
            usize::from(seen_a || seen_b)
        } else {
            usize::from(seen_a) + usize::from(seen_b)
        };
        match fired {
            0 => counts.none_fire += 1,
            1 => counts.one_fires += 1,
            _ => counts.two_fire += 1,
        }
    }
    Ok(counts)
}
