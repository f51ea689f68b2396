use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::PhotonStatistics;
use crate::numeric::{binomial, CompensatedSum};

/// Independent survival of each photon with probability `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossChannel {
    eta: f64,
}

impl LossChannel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && (0.0..=1.0).contains(&eta)) {
            return Err(Error::domain("eta", eta, "0 <= eta <= 1"));
        }
        Ok(LossChannel { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// rho'(k) = sum_{n >= k} rho(n) C(n,k) eta^k (1 - eta)^(n - k).
    pub fn apply(&self, rho: &PhotonStatistics) -> PhotonStatistics {
        let eta = self.eta;
        let n_max = rho.n_max();
        let probs = (0..=n_max)
            .map(|k| {
                let mut acc = CompensatedSum::default();
                for n in k..=n_max {
                    let p = rho.prob(n);
                    if p != 0.0 {
                        acc.add(p * binomial(n, k) * eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32));
                    }
                }
                acc.value()
            })
            .collect();
        PhotonStatistics::from_parts(probs, rho.truncation_deficit())
    }
}

pub fn apply_loss(rho: &PhotonStatistics, eta: f64) -> Result<PhotonStatistics> {
    Ok(LossChannel::new(eta)?.apply(rho))
}
