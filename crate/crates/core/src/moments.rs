//! Normalized factorial moments, the moment generating function, and
//! reconstruction of photon statistics from a truncated set of moments.
//!
//! Moments above the highest supplied order are taken to be exactly zero.
//! Reconstructed probabilities are returned as computed, including values
//! outside `[0, 1]`; those are listed in the physicality report instead of
//! being clipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::PhotonStatistics;
use crate::numeric::{compensated_sum, factorial, CompensatedSum};

/// Threshold on the last term used by [`convergence_check`].
pub const CONVERGENCE_TOLERANCE: f64 = 1e-4;

/// Unnormalized factorial moments <n^(m)> for m = 1..=m_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMoments {
    values: Vec<f64>,
}

impl RawMoments {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidStatistics("non-finite factorial moment".into()));
        }
        if let Some(&mean) = values.first() {
            if mean < 0.0 {
                return Err(Error::domain("<n>", mean, "<n> >= 0"));
            }
        }
        Ok(RawMoments { values })
    }

    pub fn m_max(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// <n^(m)> with <n^(0)> = 1 and zero above `m_max`.
    pub fn get(&self, m: usize) -> f64 {
        match m {
            0 => 1.0,
            _ => self.values.get(m - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        self.get(1)
    }
}

/// g^(m) = <n^(m)> / <n>^m for m = 2..=m_max together with the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormalizedRepr", into = "NormalizedRepr")]
pub struct NormalizedMoments {
    mean: f64,
    g: Vec<f64>,
    errors: Option<Vec<f64>>,
    mean_error: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct NormalizedRepr {
    mean: f64,
    g: Vec<f64>,
    #[serde(default)]
    errors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_error: Option<f64>,
}

impl TryFrom<NormalizedRepr> for NormalizedMoments {
    type Error = Error;

    fn try_from(r: NormalizedRepr) -> Result<Self> {
        let mut m = NormalizedMoments::new(r.mean, r.g)?;
        if let Some(errors) = r.errors {
            m = m.with_errors(errors)?;
        }
        if let Some(e) = r.mean_error {
            m = m.with_mean_error(e)?;
        }
        Ok(m)
    }
}

impl From<NormalizedMoments> for NormalizedRepr {
    fn from(m: NormalizedMoments) -> Self {
        NormalizedRepr {
            mean: m.mean,
            g: m.g,
            errors: m.errors,
            mean_error: m.mean_error,
        }
    }
}

impl NormalizedMoments {
    /// `g` holds g^(2), g^(3), ... in order.
    pub fn new(mean: f64, g: Vec<f64>) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::ZeroMean);
        }
        for (i, &v) in g.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Schema {
                    path: format!("g[{i}]"),
                    message: format!("g^({}) = {v} must be finite and non-negative", i + 2),
                });
            }
        }
        Ok(NormalizedMoments {
            mean,
            g,
            errors: None,
            mean_error: None,
        })
    }

    /// Attaches per-order standard errors, one per g entry.
    pub fn with_errors(mut self, errors: Vec<f64>) -> Result<Self> {
        if errors.len() != self.g.len() {
            return Err(Error::Schema {
                path: "errors".into(),
                message: format!("expected {} entries, got {}", self.g.len(), errors.len()),
            });
        }
        if errors.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Schema {
                path: "errors".into(),
                message: "standard errors must be finite and non-negative".into(),
            });
        }
        self.errors = Some(errors);
        Ok(self)
    }

    pub fn with_mean_error(mut self, e: f64) -> Result<Self> {
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::domain("mean_error", e, "finite, >= 0"));
        }
        self.mean_error = Some(e);
        Ok(self)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m_max(&self) -> usize {
        self.g.len() + 1
    }

    /// g^(2), g^(3), ... as stored.
    pub fn values(&self) -> &[f64] {
        &self.g
    }

    pub fn errors(&self) -> Option<&[f64]> {
        self.errors.as_deref()
    }

    pub fn mean_error(&self) -> Option<f64> {
        self.mean_error
    }

    /// g^(m), using g^(0) = g^(1) = 1 and zero above `m_max`.
    pub fn g(&self, m: usize) -> f64 {
        match m {
            0 | 1 => 1.0,
            _ => self.g.get(m - 2).copied().unwrap_or(0.0),
        }
    }

    /// Standard error of g^(m), zero where unknown.
    pub fn error(&self, m: usize) -> f64 {
        match (&self.errors, m) {
            (Some(e), m) if m >= 2 => e.get(m - 2).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Keeps orders up to `m_max`.
    pub fn truncated(&self, m_max: usize) -> NormalizedMoments {
        let keep = m_max.saturating_sub(1).min(self.g.len());
        NormalizedMoments {
            mean: self.mean,
            g: self.g[..keep].to_vec(),
            errors: self.errors.as_ref().map(|e| e[..keep].to_vec()),
            mean_error: self.mean_error,
        }
    }

    /// Same moments with a different mean photon number.
    pub fn with_mean(&self, mean: f64) -> Result<NormalizedMoments> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::ZeroMean);
        }
        Ok(NormalizedMoments { mean, ..self.clone() })
    }

    /// <n^(m)> = g^(m) <n>^m for m = 1..=m_max.
    pub fn to_raw(&self) -> RawMoments {
        let values = (1..=self.m_max())
            .map(|m| self.g(m) * self.mean.powi(m as i32))
            .collect();
        RawMoments { values }
    }
}

pub fn normalize_moments(raw: &RawMoments) -> Result<NormalizedMoments> {
    let mean = raw.mean();
    if mean <= 0.0 {
        return Err(Error::ZeroMean);
    }
    let g = (2..=raw.m_max())
        .map(|m| (raw.get(m) / mean.powi(m as i32)).max(0.0))
        .collect();
    NormalizedMoments::new(mean, g)
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.is_finite() && (0.0..=2.0).contains(&mu)) {
        return Err(Error::domain("mu", mu, "0 <= mu <= 2"));
    }
    Ok(())
}

/// M(mu) = sum_n rho(n) (1 - mu)^n.
pub fn mgf_from_statistics(rho: &PhotonStatistics, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(rho.pgf(1.0 - mu))
}

/// Partial sum of the factorial-moment expansion of M(mu) up to the highest
/// available order.
pub fn mgf_from_moments(raw: &RawMoments, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(compensated_sum(expansion_terms(raw, mu)))
}

fn expansion_terms(raw: &RawMoments, mu: f64) -> impl Iterator<Item = f64> + '_ {
    (0..=raw.m_max()).map(move |m| {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sign * raw.get(m) * mu.powi(m as i32) / factorial(m)
    })
}

/// rho(n) from unnormalized factorial moments, truncated at `raw.m_max()`.
pub fn reconstruct_from_raw(raw: &RawMoments, n: usize) -> f64 {
    let inv_n_fact = 1.0 / factorial(n);
    let mut acc = CompensatedSum::default();
    for m in n..=raw.m_max() {
        let sign = if (m + n).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc.add(sign * raw.get(m) * inv_n_fact / factorial(m - n));
    }
    acc.value()
}

/// rho(n) from normalized moments and the mean photon number.
pub fn reconstruct_statistics(g: &NormalizedMoments, n: usize) -> f64 {
    reconstruct_from_raw(&g.to_raw(), n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityViolation {
    pub n: usize,
    pub value: f64,
}

/// Reconstructed rho(0..=m_max) and the entries outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub probs: Vec<f64>,
    pub violations: Vec<PhysicalityViolation>,
}

impl Reconstruction {
    fn from_probs(probs: Vec<f64>) -> Self {
        let violations = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| !(-1e-12..=1.0 + 1e-12).contains(&p))
            .map(|(n, &value)| PhysicalityViolation { n, value })
            .collect();
        Reconstruction { probs, violations }
    }

    pub fn is_physical(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    pub fn into_statistics(self) -> Result<PhotonStatistics> {
        if let Some(v) = self.violations.first() {
            return Err(Error::InvalidStatistics(format!(
                "reconstructed rho({}) = {} is unphysical",
                v.n, v.value
            )));
        }
        PhotonStatistics::new(self.probs)
    }
}

pub fn reconstruct_all_raw(raw: &RawMoments) -> Reconstruction {
    let probs = (0..=raw.m_max()).map(|n| reconstruct_from_raw(raw, n)).collect();
    Reconstruction::from_probs(probs)
}

pub fn reconstruct_all(g: &NormalizedMoments) -> Reconstruction {
    reconstruct_all_raw(&g.to_raw())
}

/// First-order standard errors of the reconstructed rho(n), propagating the
/// per-order errors of g and the error of the mean as independent.
pub fn reconstruction_errors(g: &NormalizedMoments) -> Vec<f64> {
    let mean = g.mean();
    let mean_err = g.mean_error().unwrap_or(0.0);
    (0..=g.m_max())
        .map(|n| {
            let inv_n_fact = 1.0 / factorial(n);
            let mut var = 0.0;
            let mut d_mean = CompensatedSum::default();
            for m in n..=g.m_max() {
                let sign = if (m + n).is_multiple_of(2) { 1.0 } else { -1.0 };
                let c = sign * inv_n_fact / factorial(m - n);
                if m >= 2 {
                    var += (c * mean.powi(m as i32) * g.error(m)).powi(2);
                }
                if m >= 1 {
                    d_mean.add(c * m as f64 * g.g(m) * mean.powi(m as i32 - 1));
                }
            }
            var += (d_mean.value() * mean_err).powi(2);
            var.sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostic {
    /// |term_m| of the expansion for m = 0..=m_max.
    pub terms: Vec<f64>,
    /// Ratio of the last two terms, when the second-to-last is non-zero.
    pub ratio: Option<f64>,
    pub converged: bool,
}

/// Inspects the terms of the factorial-moment expansion of M(mu).
///
/// Converged means the last three terms are non-increasing in magnitude and
/// the last one is below [`CONVERGENCE_TOLERANCE`].
pub fn convergence_check(raw: &RawMoments, mu: f64) -> Result<ConvergenceDiagnostic> {
    check_mu(mu)?;
    if raw.m_max() < 3 {
        return Err(Error::domain("m_max", raw.m_max() as f64, "m_max >= 3"));
    }
    let terms: Vec<f64> = expansion_terms(raw, mu).map(f64::abs).collect();
    let k = terms.len();
    let tail = &terms[k - 3..];
    let non_increasing = tail[0] >= tail[1] && tail[1] >= tail[2];
    let converged = non_increasing && tail[2] < CONVERGENCE_TOLERANCE;
    let ratio = (tail[1] > 0.0).then(|| tail[2] / tail[1]);
    Ok(ConvergenceDiagnostic {
        terms,
        ratio,
        converged,
    })
}
