use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::PhotonStatistics;
use crate::numeric::CompensatedSum;

/// Largest number of bins; click patterns are stored as bit masks.
pub const MAX_BINS: usize = 16;

/// Time-multiplexed detector: `bins` click detectors fed by a multinomial
/// split of the surviving photons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TmdRepr", into = "TmdRepr")]
pub struct TmdConfig {
    bin_probs: Vec<f64>,
    eta: f64,
    dark_count: f64,
}

#[derive(Serialize, Deserialize)]
struct TmdRepr {
    #[serde(default = "default_bins")]
    bins: usize,
    #[serde(default)]
    bin_probs: Option<Vec<f64>>,
    eta: f64,
    #[serde(default)]
    dark_count: f64,
}

fn default_bins() -> usize {
    8
}

impl TryFrom<TmdRepr> for TmdConfig {
    type Error = Error;

    fn try_from(r: TmdRepr) -> Result<Self> {
        let cfg = match r.bin_probs {
            Some(p) => {
                if p.len() != r.bins {
                    return Err(Error::Schema {
                        path: "detector.bin_probs".into(),
                        message: format!("{} entries for {} bins", p.len(), r.bins),
                    });
                }
                TmdConfig::new(p, r.eta)?
            }
            None => TmdConfig::uniform(r.bins, r.eta)?,
        };
        cfg.with_dark_count(r.dark_count)
    }
}

impl From<TmdConfig> for TmdRepr {
    fn from(c: TmdConfig) -> Self {
        TmdRepr {
            bins: c.bin_probs.len(),
            bin_probs: Some(c.bin_probs),
            eta: c.eta,
            dark_count: c.dark_count,
        }
    }
}

impl TmdConfig {
    pub fn new(bin_probs: Vec<f64>, eta: f64) -> Result<Self> {
        let bins = bin_probs.len();
        if bins == 0 || bins > MAX_BINS {
            return Err(Error::domain("bins", bins as f64, "1 <= bins <= 16"));
        }
        if bin_probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Schema {
                path: "detector.bin_probs".into(),
                message: "bin probabilities must be non-negative".into(),
            });
        }
        let total: f64 = bin_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain("sum(bin_probs)", total, "bin probabilities sum to 1"));
        }
        if !(eta.is_finite() && (0.0..=1.0).contains(&eta)) {
            return Err(Error::domain("eta", eta, "0 <= eta <= 1"));
        }
        Ok(TmdConfig {
            bin_probs,
            eta,
            dark_count: 0.0,
        })
    }

    pub fn uniform(bins: usize, eta: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::domain("bins", 0.0, "1 <= bins <= 16"));
        }
        Self::new(vec![1.0 / bins as f64; bins], eta)
    }

    /// Per-bin dark-click probability per trial. Zero unless set.
    pub fn with_dark_count(mut self, p: f64) -> Result<Self> {
        if !(p.is_finite() && (0.0..1.0).contains(&p)) {
            return Err(Error::domain("dark_count", p, "0 <= dark_count < 1"));
        }
        self.dark_count = p;
        Ok(self)
    }

    pub fn bins(&self) -> usize {
        self.bin_probs.len()
    }

    pub fn bin_probs(&self) -> &[f64] {
        &self.bin_probs
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dark_count(&self) -> f64 {
        self.dark_count
    }

    pub(crate) fn subset_mask(&self, subset: &[usize]) -> Result<u32> {
        if subset.is_empty() {
            return Err(Error::Usage("bin subset must be non-empty".into()));
        }
        let mut mask = 0u32;
        for &i in subset {
            if i >= self.bins() {
                return Err(Error::Usage(format!(
                    "bin index {i} out of range for {} bins",
                    self.bins()
                )));
            }
            mask |= 1 << i;
        }
        Ok(mask)
    }
}

/// Probability that every bin of `subset` clicks. Equal to the
/// inclusion-exclusion sum
/// P = sum_{T subset of S} (-1)^|T| (1 - d)^|T| G(1 - eta sum_{i in T} p_i),
/// but evaluated as a sum of non-negative terms: for n photons,
/// P(S covered | n) = n! [t^n] e^{q t} prod_{i in S} (e^{a_i t} - 1 + d)
/// with a_i = eta p_i and q = 1 - sum a_i. The alternating form loses all
/// precision at small eta and high order.
pub fn tmd_click_joint(rho: &PhotonStatistics, cfg: &TmdConfig, subset: &[usize]) -> Result<f64> {
    let mask = cfg.subset_mask(subset)?;
    Ok(joint_for_mask(rho, cfg, mask))
}

pub(crate) fn joint_for_mask(rho: &PhotonStatistics, cfg: &TmdConfig, mask: u32) -> f64 {
    let n_max = rho.support_max();
    let d = cfg.dark_count;
    let mut coeffs = vec![0.0; n_max + 1];
    coeffs[0] = 1.0;
    let mut covered = 0.0;
    for (i, &p) in cfg.bin_probs.iter().enumerate() {
        if mask & (1 << i) == 0 {
            continue;
        }
        let a = cfg.eta * p;
        covered += a;
        let mut factor = vec![d; n_max + 1];
        for k in 1..=n_max {
            factor[k] = if k == 1 { a } else { factor[k - 1] * a / k as f64 };
        }
        let mut next = vec![0.0; n_max + 1];
        for (j, &c) in coeffs.iter().enumerate().filter(|(_, &c)| c != 0.0) {
            for (k, &f) in factor.iter().enumerate().take(n_max + 1 - j) {
                next[j + k] += c * f;
            }
        }
        coeffs = next;
    }
    let q = (1.0 - covered).max(0.0);
    let mut acc = CompensatedSum::default();
    for (n, &rho_n) in rho.probs().iter().enumerate().take(n_max + 1) {
        if rho_n == 0.0 {
            continue;
        }
        // sum_k n!/(n-k)! q^(n-k) c_k
        let mut inner = 0.0;
        let mut falling = 1.0;
        for (k, &c) in coeffs.iter().enumerate().take(n + 1) {
            if k > 0 {
                falling *= (n + 1 - k) as f64;
            }
            inner += falling * q.powi((n - k) as i32) * c;
        }
        acc.add(rho_n * inner);
    }
    acc.value().clamp(0.0, 1.0)
}

/// All size-`m` subsets of `0..bins` as bit masks.
pub(crate) fn subsets_of_size(bins: usize, m: usize) -> impl Iterator<Item = u32> {
    (0u32..(1u32 << bins)).filter(move |s| s.count_ones() as usize == m)
}

/// Coincidence-based estimate of g^(m): the joint click probability of `m`
/// bins divided by the product of their single-click probabilities, averaged
/// over all size-`m` bin subsets.
pub fn tmd_estimate_g(rho: &PhotonStatistics, cfg: &TmdConfig, m: usize) -> Result<f64> {
    if m < 2 || m > cfg.bins() {
        return Err(Error::domain("m", m as f64, "2 <= m <= bins"));
    }
    let singles: Vec<f64> = (0..cfg.bins()).map(|i| joint_for_mask(rho, cfg, 1 << i)).collect();
    let mut acc = CompensatedSum::default();
    let mut count = 0usize;
    for mask in subsets_of_size(cfg.bins(), m) {
        let mut denom = 1.0;
        for (i, s) in singles.iter().enumerate() {
            if mask & (1 << i) != 0 {
                denom *= s;
            }
        }
        if denom <= 0.0 {
            return Err(Error::UndefinedEstimator(format!(
                "zero single-click probability in bin subset {mask:#b}"
            )));
        }
        acc.add(joint_for_mask(rho, cfg, mask) / denom);
        count += 1;
    }
    Ok(acc.value() / count as f64)
}
