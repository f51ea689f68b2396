use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{partition_rng, partitions};
use crate::error::{Error, Result};

/// Relative standard error above which a Klyshko estimate is flagged.
pub const LOW_STATISTICS_REL_ERROR: f64 = 0.05;

/// Twin-beam run used for efficiency calibration: photon pairs with
/// thermal pair-number statistics, a yes/no herald detector and a yes/no
/// signal detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinBeamConfig {
    pub squeeze: f64,
    pub eta_signal: f64,
    pub eta_herald: f64,
    pub trials: u64,
    pub seed: u64,
}

impl TwinBeamConfig {
    fn validate(&self) -> Result<()> {
        if !(self.squeeze.is_finite() && (0.0..1.0).contains(&self.squeeze)) {
            return Err(Error::domain("squeeze", self.squeeze, "0 <= squeeze < 1"));
        }
        for (name, eta) in [("eta_signal", self.eta_signal), ("eta_herald", self.eta_herald)] {
            if !(eta.is_finite() && (0.0..=1.0).contains(&eta)) {
                return Err(Error::domain(name, eta, "0 <= eta <= 1"));
            }
        }
        if self.trials < 2 {
            return Err(Error::Usage("twin-beam run needs at least 2 trials".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlyshkoEstimate {
    pub efficiency: f64,
    pub stderr: f64,
    pub heralds: u64,
    pub coincidences: u64,
    pub accidentals: u64,
    /// Set when the relative standard error exceeds 5 %.
    pub low_statistics: bool,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    heralds: u64,
    coincidences: u64,
    accidentals: u64,
}

/// Klyshko efficiency of the signal arm: (coincidences - accidentals) /
/// herald singles. Accidentals pair each herald with the signal outcome of
/// the following trial (cyclically within a partition).
pub fn klyshko_efficiency(cfg: &TwinBeamConfig) -> Result<KlyshkoEstimate> {
    cfg.validate()?;
    let x = cfg.squeeze * cfg.squeeze;
    let ln_x = x.ln();
    let parts: Vec<(u64, u64)> = partitions(cfg.trials).collect();
    let tally = parts
        .par_iter()
        .map(|&(partition, len)| {
            let mut rng = partition_rng(cfg.seed, partition);
            let mut t = Tally::default();
            let mut first_signal = false;
            let mut prev_herald = false;
            for i in 0..len {
                // Thermal pair number: P(n) = (1 - x) x^n.
                let n = if x > 0.0 {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    (u.ln() / ln_x).floor() as i32
                } else {
                    0
                };
                let (herald, signal) = if n == 0 {
                    (false, false)
                } else {
                    let ph = 1.0 - (1.0 - cfg.eta_herald).powi(n);
                    let ps = 1.0 - (1.0 - cfg.eta_signal).powi(n);
                    (rng.random::<f64>() < ph, rng.random::<f64>() < ps)
                };
                if herald {
                    t.heralds += 1;
                    if signal {
                        t.coincidences += 1;
                    }
                }
                if i == 0 {
                    first_signal = signal;
                } else if prev_herald && signal {
                    t.accidentals += 1;
                }
                prev_herald = herald;
            }
            if prev_herald && first_signal && len > 1 {
                t.accidentals += 1;
            }
            t
        })
        .reduce(Tally::default, |a, b| Tally {
            heralds: a.heralds + b.heralds,
            coincidences: a.coincidences + b.coincidences,
            accidentals: a.accidentals + b.accidentals,
        });
    if tally.heralds == 0 {
        return Err(Error::NoHeralds);
    }
    let nh = tally.heralds as f64;
    let efficiency = (tally.coincidences as f64 - tally.accidentals as f64) / nh;
    let p = efficiency.clamp(0.0, 1.0);
    let stderr = ((p * (1.0 - p) + tally.accidentals as f64 / nh) / nh).sqrt();
    let low_statistics = efficiency <= 0.0 || stderr / efficiency > LOW_STATISTICS_REL_ERROR;
    Ok(KlyshkoEstimate {
        efficiency,
        stderr,
        heralds: tally.heralds,
        coincidences: tally.coincidences,
        accidentals: tally.accidentals,
        low_statistics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(squeeze: f64, eta_signal: f64, eta_herald: f64, trials: u64, seed: u64) -> TwinBeamConfig {
        TwinBeamConfig {
            squeeze,
            eta_signal,
            eta_herald,
            trials,
            seed,
        }
    }

    #[test]
    fn perfect_signal_detector() {
        let est = klyshko_efficiency(&cfg(0.1, 1.0, 0.2, 2_000_000, 4)).unwrap();
        assert!((est.efficiency - 1.0).abs() < 0.02, "{est:?}");
    }

    #[test]
    fn independent_of_herald_efficiency() {
        let a = klyshko_efficiency(&cfg(0.15, 0.4, 0.1, 4_000_000, 21)).unwrap();
        let b = klyshko_efficiency(&cfg(0.15, 0.4, 0.6, 4_000_000, 22)).unwrap();
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.efficiency - b.efficiency).abs() < 3.0 * se, "{a:?} {b:?}");
    }

    #[test]
    fn weak_source_is_flagged_not_rejected() {
        let est = klyshko_efficiency(&cfg(0.02, 0.3, 0.1, 200_000, 8)).unwrap();
        assert!(est.low_statistics);
        let strong = klyshko_efficiency(&cfg(0.1, 0.3, 0.1, 2_000_000, 8)).unwrap();
        assert!(est.stderr > strong.stderr);
    }

    #[test]
    fn no_heralds_is_an_error() {
        assert!(matches!(
            klyshko_efficiency(&cfg(0.0, 0.3, 0.1, 1000, 1)),
            Err(Error::NoHeralds)
        ));
        assert!(klyshko_efficiency(&cfg(1.0, 0.3, 0.1, 1000, 1)).is_err());
    }

    #[test]
    fn deterministic() {
        let c = cfg(0.2, 0.3, 0.3, 300_000, 99);
        assert_eq!(klyshko_efficiency(&c).unwrap(), klyshko_efficiency(&c).unwrap());
    }
}
