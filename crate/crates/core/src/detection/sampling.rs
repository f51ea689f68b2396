use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tmd::{subsets_of_size, TmdConfig};
use super::{partition_rng, partitions};
use crate::error::{Error, Result};
use crate::fock::PhotonStatistics;

/// Click tallies of a sampled TMD run. Every click pattern (bit mask over
/// bins) is counted, so coincidences for any bin subset can be recovered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CountsRepr", into = "CountsRepr")]
pub struct ClickCounts {
    trials: u64,
    seed: u64,
    singles: Vec<u64>,
    patterns: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct CountsRepr {
    trials: u64,
    seed: u64,
    bins: usize,
    singles: Vec<u64>,
    /// Non-empty click patterns as `[mask, count]`.
    patterns: Vec<(u32, u64)>,
}

impl TryFrom<CountsRepr> for ClickCounts {
    type Error = Error;

    fn try_from(r: CountsRepr) -> Result<Self> {
        let schema = |message: String| Error::Schema {
            path: "counts".into(),
            message,
        };
        if r.bins == 0 || r.bins > super::MAX_BINS || r.singles.len() != r.bins {
            return Err(schema(format!("{} singles for {} bins", r.singles.len(), r.bins)));
        }
        let mut patterns = vec![0u64; 1 << r.bins];
        // The no-click count is implied by the trial total.
        for (mask, count) in r.patterns.into_iter().filter(|&(mask, _)| mask != 0) {
            let slot = patterns
                .get_mut(mask as usize)
                .ok_or_else(|| schema(format!("pattern {mask} out of range")))?;
            *slot += count;
        }
        let clicked: u64 = patterns.iter().sum();
        if clicked > r.trials {
            return Err(schema("tally exceeds trial count".into()));
        }
        patterns[0] = r.trials - clicked;
        let counts = ClickCounts {
            trials: r.trials,
            seed: r.seed,
            singles: r.singles,
            patterns,
        };
        if counts.singles != counts.singles_from_patterns() {
            return Err(schema("singles disagree with click patterns".into()));
        }
        Ok(counts)
    }
}

impl From<ClickCounts> for CountsRepr {
    fn from(c: ClickCounts) -> Self {
        CountsRepr {
            trials: c.trials,
            seed: c.seed,
            bins: c.singles.len(),
            singles: c.singles,
            patterns: c
                .patterns
                .iter()
                .enumerate()
                .filter(|&(mask, &n)| mask != 0 && n > 0)
                .map(|(mask, &n)| (mask as u32, n))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetTally {
    pub subset: Vec<usize>,
    pub count: u64,
    pub trials: u64,
}

impl ClickCounts {
    fn from_patterns(trials: u64, seed: u64, bins: usize, patterns: Vec<u64>) -> Self {
        let mut counts = ClickCounts {
            trials,
            seed,
            singles: vec![0; bins],
            patterns,
        };
        counts.singles = counts.singles_from_patterns();
        counts
    }

    fn singles_from_patterns(&self) -> Vec<u64> {
        (0..self.singles.len()).map(|i| self.coincidence_mask(1 << i)).collect()
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bins(&self) -> usize {
        self.singles.len()
    }

    pub fn singles(&self) -> &[u64] {
        &self.singles
    }

    fn coincidence_mask(&self, mask: u32) -> u64 {
        self.patterns
            .iter()
            .enumerate()
            .filter(|&(p, _)| p as u32 & mask == mask)
            .map(|(_, &n)| n)
            .sum()
    }

    /// Trials in which every bin of `subset` clicked.
    pub fn coincidence(&self, subset: &[usize]) -> Result<u64> {
        let mut mask = 0u32;
        for &i in subset {
            if i >= self.bins() {
                return Err(Error::Usage(format!("bin index {i} out of range")));
            }
            mask |= 1 << i;
        }
        Ok(self.coincidence_mask(mask))
    }

    /// Coincidence tallies for every bin subset of size 2..=max_order.
    pub fn coincidence_table(&self, max_order: usize) -> Vec<SubsetTally> {
        let mut rows = Vec::new();
        for m in 2..=max_order.min(self.bins()) {
            for mask in subsets_of_size(self.bins(), m) {
                rows.push(SubsetTally {
                    subset: (0..self.bins()).filter(|i| mask & (1 << i) != 0).collect(),
                    count: self.coincidence_mask(mask),
                    trials: self.trials,
                });
            }
        }
        rows
    }

    /// CSV with columns `subset,count,trials`; subsets are written as
    /// dash-separated bin indices.
    pub fn write_coincidence_csv<W: std::io::Write>(&self, max_order: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["subset", "count", "trials"])?;
        for row in self.coincidence_table(max_order) {
            let subset = row.subset.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("-");
            w.write_record([subset, row.count.to_string(), row.trials.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Samples `trials` TMD detections of `rho`: draw n, thin each photon with
/// the detector efficiency, route survivors to bins, record which bins
/// clicked. Deterministic for a given `(trials, seed)`.
pub fn tmd_sample(rho: &PhotonStatistics, cfg: &TmdConfig, trials: u64, seed: u64) -> Result<ClickCounts> {
    if trials == 0 {
        return Err(Error::Usage("trials must be at least 1".into()));
    }
    let photon_cdf = cumulative(rho.probs());
    let photon_total = *photon_cdf.last().unwrap();
    let bin_cdf = cumulative(cfg.bin_probs());
    let bins = cfg.bins();
    let eta = cfg.eta();
    let dark = cfg.dark_count();

    let parts: Vec<(u64, u64)> = partitions(trials).collect();
    let patterns = parts
        .par_iter()
        .map(|&(partition, len)| {
            let mut rng = partition_rng(seed, partition);
            let mut hist = vec![0u64; 1 << bins];
            for _ in 0..len {
                let n = draw(&photon_cdf, rng.random::<f64>() * photon_total);
                let mut clicked = 0u32;
                for _ in 0..n {
                    if rng.random::<f64>() < eta {
                        clicked |= 1 << draw(&bin_cdf, rng.random::<f64>() * bin_cdf[bins - 1]);
                    }
                }
                if dark > 0.0 {
                    for i in 0..bins {
                        if rng.random::<f64>() < dark {
                            clicked |= 1 << i;
                        }
                    }
                }
                hist[clicked as usize] += 1;
            }
            hist
        })
        .reduce(
            || vec![0u64; 1 << bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(ClickCounts::from_patterns(trials, seed, bins, patterns))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledMoment {
    pub order: usize,
    pub value: f64,
    pub stderr: f64,
}

/// g^(m) from sampled tallies: per-subset coincidence frequency over the
/// product of single-click frequencies, averaged over all size-`m` subsets.
///
/// The standard error is a first-order (Poisson) estimate from the mean
/// coincidence and single tallies; subsets share trials, so it treats the
/// averaged coincidence count like a single subset's.
pub fn estimate_g_from_counts(counts: &ClickCounts, m: usize) -> Result<SampledMoment> {
    let bins = counts.bins();
    if m < 2 || m > bins {
        return Err(Error::domain("m", m as f64, "2 <= m <= bins"));
    }
    if counts.singles.contains(&0) {
        return Err(Error::UndefinedEstimator("a bin recorded no clicks".into()));
    }
    let n = counts.trials as f64;
    let freq: Vec<f64> = counts.singles.iter().map(|&s| s as f64 / n).collect();
    let mut ratio_sum = 0.0;
    let mut coinc_sum = 0.0;
    let mut subsets = 0usize;
    for mask in subsets_of_size(bins, m) {
        let c = counts.coincidence_mask(mask) as f64;
        let denom: f64 = (0..bins).filter(|i| mask & (1 << i) != 0).map(|i| freq[i]).product();
        ratio_sum += c / n / denom;
        coinc_sum += c;
        subsets += 1;
    }
    let value = ratio_sum / subsets as f64;
    let mean_coinc = coinc_sum / subsets as f64;
    let mean_single = counts.singles.iter().sum::<u64>() as f64 / bins as f64;
    let rel_single = m as f64 / (mean_single * bins as f64).sqrt();
    let stderr = if mean_coinc > 0.0 {
        value * (1.0 / mean_coinc + rel_single * rel_single).sqrt()
    } else {
        // One event's worth of coincidences.
        (1.0 / n) / (mean_single / n).powi(m as i32)
    };
    Ok(SampledMoment {
        order: m,
        value,
        stderr,
    })
}

/// Mean photon number from the summed single-click rate divided by the
/// calibrated detection efficiency.
pub fn estimate_mean(counts: &ClickCounts, eta_cal: f64) -> Result<f64> {
    if !(eta_cal.is_finite() && eta_cal > 0.0) {
        return Err(Error::domain("eta_cal", eta_cal, "eta_cal > 0"));
    }
    let clicks: u64 = counts.singles.iter().sum();
    Ok(clicks as f64 / counts.trials as f64 / eta_cal)
}
