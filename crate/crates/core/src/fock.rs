//! Truncated Fock-space numerics.
//!
//! Photon-number distributions are stored up to a truncation `n_max` together
//! with the probability mass that was lost to the truncation. Nothing here
//! renormalizes silently: the deficit is carried along so that downstream
//! reconstructions can tell tail loss from physics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{self, NormalizedMoments, RawMoments};
use crate::numeric::{compensated_sum, falling_factorial, ln_factorial, CompensatedSum};

/// Tolerance on individual probabilities and on over-normalization.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Deficits above this raise the truncation warning.
pub const TRUNCATION_WARNING: f64 = 1e-6;

/// Default truncation for displaced states.
pub const DEFAULT_N_MAX: usize = 40;

/// Largest accepted |beta|^2 for displacement matrix elements.
pub const MAX_DISPLACEMENT_SQ: f64 = 50.0;

/// A photon-number distribution rho(0..=n_max).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StatisticsRepr", into = "StatisticsRepr")]
pub struct PhotonStatistics {
    probs: Vec<f64>,
    deficit: f64,
}

#[derive(Serialize, Deserialize)]
struct StatisticsRepr {
    probs: Vec<f64>,
    #[serde(default)]
    truncation_deficit: f64,
}

impl TryFrom<StatisticsRepr> for PhotonStatistics {
    type Error = Error;

    fn try_from(repr: StatisticsRepr) -> Result<Self> {
        PhotonStatistics::with_deficit(repr.probs, repr.truncation_deficit)
    }
}

impl From<PhotonStatistics> for StatisticsRepr {
    fn from(stats: PhotonStatistics) -> Self {
        StatisticsRepr {
            probs: stats.probs,
            truncation_deficit: stats.deficit,
        }
    }
}

impl PhotonStatistics {
    /// Builds a distribution that must be normalized to within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_deficit(probs, 0.0)
    }

    /// Builds a distribution whose sum may fall short of one by the recorded
    /// truncation deficit.
    pub fn with_deficit(probs: Vec<f64>, deficit: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidStatistics("empty probability vector".into()));
        }
        if !(deficit.is_finite() && (0.0..=1.0).contains(&deficit)) {
            return Err(Error::InvalidStatistics(format!(
                "truncation deficit {deficit} not in [0, 1]"
            )));
        }
        for (n, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(-PROB_TOLERANCE..=1.0 + PROB_TOLERANCE).contains(&p) {
                return Err(Error::InvalidStatistics(format!("rho({n}) = {p} outside [0, 1]")));
            }
        }
        let sum = compensated_sum(probs.iter().copied());
        if sum > 1.0 + PROB_TOLERANCE.max(1e-9) || sum < 1.0 - deficit - 1e-9 {
            return Err(Error::InvalidStatistics(format!("sum {sum} not in [1 - {deficit}, 1]")));
        }
        let probs = probs.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(PhotonStatistics { probs, deficit })
    }

    /// Rescales non-negative weights to unit sum.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidStatistics(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total = compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidStatistics("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    // Internal constructor for distributions produced by this crate.
    pub(crate) fn from_parts(probs: Vec<f64>, deficit: f64) -> Self {
        debug_assert!(!probs.is_empty());
        PhotonStatistics {
            probs,
            deficit: deficit.clamp(0.0, 1.0),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// rho(n), zero above the truncation.
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn truncation_deficit(&self) -> f64 {
        self.deficit
    }

    pub fn truncation_warning(&self) -> bool {
        self.deficit > TRUNCATION_WARNING
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.probs.iter().enumerate().map(|(n, p)| n as f64 * p))
    }

    /// Largest photon number carrying non-zero probability.
    pub fn support_max(&self) -> usize {
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    /// Probability generating function G(z) = sum_n rho(n) z^n.
    pub fn pgf(&self, z: f64) -> f64 {
        // Horner keeps the evaluation stable for |z| <= 1.
        self.probs.iter().rev().fold(0.0, |acc, &p| acc * z + p)
    }
}

/// Prepared-source description, serialized as
/// `{"variant": "fock" | "coherent" | "heralded_pdc" | "measured", ..., "n_max": int}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(flatten)]
    pub kind: SourceKind,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SourceKind {
    Fock {
        n: usize,
    },
    Coherent {
        mean: f64,
    },
    HeraldedPdc {
        squeeze: f64,
        herald_efficiency: f64,
    },
    /// Statistics reconstructed from measured normalized moments of the
    /// prepared state, with moments above the last given order set to zero.
    Measured {
        mean: f64,
        g: Vec<f64>,
    },
}

impl SourceSpec {
    pub fn fock(n: usize) -> Self {
        SourceSpec {
            kind: SourceKind::Fock { n },
            n_max: DEFAULT_N_MAX,
        }
    }

    pub fn build(&self) -> Result<PhotonStatistics> {
        match &self.kind {
            SourceKind::Fock { n } => make_fock(*n, self.n_max),
            SourceKind::Coherent { mean } => make_coherent(*mean, self.n_max),
            SourceKind::HeraldedPdc {
                squeeze,
                herald_efficiency,
            } => make_heralded_pdc(*squeeze, *herald_efficiency, self.n_max),
            SourceKind::Measured { mean, g } => {
                let moments = NormalizedMoments::new(*mean, g.clone())?;
                let rec = moments::reconstruct_all(&moments);
                if let Some(v) = rec.violations.first() {
                    return Err(Error::InvalidStatistics(format!(
                        "measured moments reconstruct to unphysical rho({}) = {}",
                        v.n, v.value
                    )));
                }
                let mut probs = rec.probs;
                if probs.len() <= self.n_max {
                    probs.resize(self.n_max + 1, 0.0);
                }
                PhotonStatistics::new(probs)
            }
        }
    }
}

pub fn make_fock(n: usize, n_max: usize) -> Result<PhotonStatistics> {
    if n > n_max {
        return Err(Error::Truncation { n, n_max });
    }
    let mut probs = vec![0.0; n_max + 1];
    probs[n] = 1.0;
    Ok(PhotonStatistics::from_parts(probs, 0.0))
}

/// Poissonian statistics with mean `b`, truncated at `n_max`.
pub fn make_coherent(b: f64, n_max: usize) -> Result<PhotonStatistics> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::domain("b", b, "b >= 0"));
    }
    let probs: Vec<f64> = (0..=n_max).map(|n| poisson_pmf(n, b)).collect();
    let deficit = (1.0 - compensated_sum(probs.iter().copied())).max(0.0);
    Ok(PhotonStatistics::from_parts(probs, deficit))
}

pub(crate) fn poisson_pmf(n: usize, b: f64) -> f64 {
    if b == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * b.ln() - b - ln_factorial(n)).exp()
}

/// Signal-arm statistics of a two-mode squeezed vacuum conditioned on a
/// yes/no herald with efficiency `eta_h`:
/// P(n) ~ (1 - x) x^n [1 - (1 - eta_h)^n] with x = lambda^2.
pub fn make_heralded_pdc(lambda: f64, eta_h: f64, n_max: usize) -> Result<PhotonStatistics> {
    if !(lambda.is_finite() && (0.0..1.0).contains(&lambda)) {
        return Err(Error::domain("lambda", lambda, "0 <= lambda < 1"));
    }
    if !(eta_h.is_finite() && eta_h > 0.0 && eta_h <= 1.0) {
        return Err(Error::domain("eta_h", eta_h, "0 < eta_h <= 1"));
    }
    let x = lambda * lambda;
    // Closed-form normalization folded into the weights so that x -> 0 stays
    // finite: rho(n) = (1-x)(1-x+x eta)/eta * x^(n-1) [1 - (1-eta)^n].
    let scale = (1.0 - x) * (1.0 - x + x * eta_h) / eta_h;
    let mut probs = vec![0.0; n_max + 1];
    for (n, p) in probs.iter_mut().enumerate().skip(1) {
        let herald = 1.0 - (1.0 - eta_h).powi(n as i32);
        *p = scale * x.powi(n as i32 - 1) * herald;
    }
    let deficit = (1.0 - compensated_sum(probs.iter().copied())).max(0.0);
    Ok(PhotonStatistics::from_parts(probs, deficit))
}

/// Squeeze parameter for which the heralded source has the requested g^(2)
/// at fixed herald efficiency.
pub fn heralded_pdc_squeeze_for_g2(target_g2: f64, eta_h: f64, n_max: usize) -> Result<f64> {
    let g2_at = |lambda: f64| -> Result<f64> {
        let stats = make_heralded_pdc(lambda, eta_h, n_max)?;
        let raw = factorial_moments(&stats, 2)?;
        Ok(raw.get(2) / raw.get(1).powi(2))
    };
    let (mut lo, mut hi) = (0.0, 0.95);
    let g_hi = g2_at(hi)?;
    if !(target_g2 > 0.0 && target_g2 < g_hi) {
        return Err(Error::domain("g2", target_g2, "0 < g2 < g2(lambda = 0.95)"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g2_at(mid)? < target_g2 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn laguerre(k: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Matrix element <m| D(beta) |n> of the displacement operator.
pub fn displacement_element(m: usize, n: usize, beta: Complex64) -> Result<Complex64> {
    let b = beta.norm_sqr();
    if !(b.is_finite() && b <= MAX_DISPLACEMENT_SQ) {
        return Err(Error::domain("|beta|^2", b, "|beta|^2 <= 50"));
    }
    if b == 0.0 {
        return Ok(if m == n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        });
    }
    let (lo, hi) = (m.min(n), m.max(n));
    let d = hi - lo;
    let log_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + d as f64 * beta.norm().ln() - 0.5 * b;
    let lag = laguerre(lo, d as f64, b);
    // beta^(m-n) for m >= n, (-beta*)^(n-m) otherwise.
    let phase_base = if m >= n { beta } else { -beta.conj() };
    let phase = Complex64::from_polar(1.0, phase_base.arg() * d as f64);
    Ok(phase * (log_mag.exp() * lag))
}

/// |<m| D(beta) |n>|^2 for real beta with beta^2 = b.
pub(crate) fn displacement_probability(m: usize, n: usize, b: f64) -> f64 {
    if b == 0.0 {
        return if m == n { 1.0 } else { 0.0 };
    }
    let (lo, hi) = (m.min(n), m.max(n));
    let d = hi - lo;
    let log_mag = ln_factorial(lo) - ln_factorial(hi) + d as f64 * b.ln() - b;
    let lag = laguerre(lo, d as f64, b);
    log_mag.exp() * lag * lag
}

/// Output truncation large enough to hold the displaced tail of a source
/// supported up to `source_n_max`.
pub fn displaced_n_max(source_n_max: usize, b: f64) -> usize {
    let spread = b + 10.0 * b.sqrt() + 10.0;
    DEFAULT_N_MAX.max(source_n_max + spread.ceil() as usize)
}

/// Photon statistics after a phase-averaged displacement of magnitude
/// `beta_mag`. For Fock-diagonal input the result does not depend on the
/// phase, so a real amplitude is used.
pub fn displace_statistics(rho: &PhotonStatistics, beta_mag: f64, n_max_out: usize) -> Result<PhotonStatistics> {
    if !(beta_mag.is_finite() && beta_mag >= 0.0) {
        return Err(Error::domain("beta_mag", beta_mag, "beta_mag >= 0"));
    }
    let b = beta_mag * beta_mag;
    if b > MAX_DISPLACEMENT_SQ {
        return Err(Error::domain("|beta|^2", b, "|beta|^2 <= 50"));
    }
    if b == 0.0 {
        let mut probs = rho.probs.clone();
        let lost: f64 = probs.iter().skip(n_max_out + 1).sum();
        probs.resize(n_max_out + 1, 0.0);
        return Ok(PhotonStatistics::from_parts(probs, rho.deficit + lost));
    }
    let support: Vec<(usize, f64)> = rho
        .probs
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, p)| p > 0.0)
        .collect();
    let probs: Vec<f64> = (0..=n_max_out)
        .map(|m| {
            let mut acc = CompensatedSum::default();
            for &(n, p) in &support {
                acc.add(p * displacement_probability(m, n, b));
            }
            acc.value()
        })
        .collect();
    let lost = (rho.total() - compensated_sum(probs.iter().copied())).max(0.0);
    Ok(PhotonStatistics::from_parts(probs, rho.deficit + lost))
}

/// Factorial moments <n^(m)> for m = 1..=m_max.
pub fn factorial_moments(rho: &PhotonStatistics, m_max: usize) -> Result<RawMoments> {
    if m_max < 1 {
        return Err(Error::domain("m_max", m_max as f64, "m_max >= 1"));
    }
    let values = (1..=m_max)
        .map(|m| compensated_sum(rho.probs.iter().enumerate().map(|(n, p)| falling_factorial(n, m) * p)))
        .collect();
    RawMoments::new(values)
}

/// Discrete convolution of two distributions, truncated at `n_max`.
pub(crate) fn convolve(a: &PhotonStatistics, b: &PhotonStatistics, n_max: usize) -> PhotonStatistics {
    let probs: Vec<f64> = (0..=n_max)
        .map(|k| {
            let mut acc = CompensatedSum::default();
            for i in 0..=k.min(a.n_max()) {
                acc.add(a.prob(i) * b.prob(k - i));
            }
            acc.value()
        })
        .collect();
    let lost = (a.total() * b.total() - compensated_sum(probs.iter().copied())).max(0.0);
    PhotonStatistics::from_parts(probs, a.deficit + b.deficit + lost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Term-by-term oracle from the normally ordered form
    /// D = exp(-|beta|^2/2) exp(beta a^dag) exp(-beta* a).
    fn displacement_series(m: usize, n: usize, beta: Complex64) -> Complex64 {
        let fact = |k: usize| -> f64 { (1..=k).map(|i| i as f64).product() };
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..=n {
            let k = n - j;
            if m < k {
                continue;
            }
            let i = m - k;
            let lower = (-beta.conj()).powu(j as u32) / fact(j) * (fact(n) / fact(k)).sqrt();
            let raise = beta.powu(i as u32) / fact(i) * (fact(m) / fact(k)).sqrt();
            acc += lower * raise;
        }
        acc * (-0.5 * beta.norm_sqr()).exp()
    }

    #[test]
    fn fock_constructor() {
        let s = make_fock(1, 8).unwrap();
        assert_eq!(s.probs()[1], 1.0);
        assert_eq!(s.total(), 1.0);
        assert_eq!(make_fock(0, 4).unwrap().probs(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let two = make_fock(2, 8).unwrap();
        assert_eq!(factorial_moments(&two, 2).unwrap().get(2), 2.0);
        assert!(matches!(make_fock(5, 4), Err(Error::Truncation { n: 5, n_max: 4 })));
    }

    #[test]
    fn coherent_constructor() {
        let vac = make_coherent(0.0, 4).unwrap();
        assert_eq!(vac.probs()[0], 1.0);
        let c = make_coherent(1.0, 40).unwrap();
        assert_abs_diff_eq!(c.probs()[0], (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.probs()[0], 0.367879, epsilon = 1e-6);
        let raw = factorial_moments(&c, 5).unwrap();
        for m in 2..=5 {
            assert_abs_diff_eq!(raw.get(m) / raw.get(1).powi(m as i32), 1.0, epsilon = 1e-12);
        }
        assert!(make_coherent(-0.1, 4).is_err());
        // Truncation deficit is recorded rather than renormalized away.
        let short = make_coherent(3.0, 4).unwrap();
        assert!(short.truncation_warning());
        assert_abs_diff_eq!(short.total() + short.truncation_deficit(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn heralded_pdc_limits_and_g2() {
        let s = make_heralded_pdc(1e-6, 0.3, 10).unwrap();
        assert_eq!(s.probs()[0], 0.0);
        assert_abs_diff_eq!(s.probs()[1], 1.0, epsilon = 1e-10);
        let zero = make_heralded_pdc(0.0, 0.5, 10).unwrap();
        assert_eq!(zero.probs()[1], 1.0);

        // Two independent routes to g^(2).
        let s = make_heralded_pdc(0.3, 1.0, 60).unwrap();
        let raw = factorial_moments(&s, 2).unwrap();
        let via_moments = raw.get(2) / raw.get(1).powi(2);
        let (mut num, mut mean) = (0.0, 0.0);
        for (n, p) in s.probs().iter().enumerate() {
            let nf = n as f64;
            num += nf * (nf - 1.0) * p;
            mean += nf * p;
        }
        assert_abs_diff_eq!(via_moments, num / (mean * mean), epsilon = 1e-12);
        // Geometric from one photon with x = 0.09 has g2 = 2x.
        assert_abs_diff_eq!(via_moments, 0.18, epsilon = 1e-12);

        assert!(make_heralded_pdc(1.0, 0.5, 10).is_err());
        assert!(make_heralded_pdc(0.5, 0.0, 10).is_err());
    }

    #[test]
    fn heralded_pdc_tuned_to_measured_g2() {
        let lambda = heralded_pdc_squeeze_for_g2(0.184, 1.0, 60).unwrap();
        let s = make_heralded_pdc(lambda, 1.0, 60).unwrap();
        let raw = factorial_moments(&s, 2).unwrap();
        assert_abs_diff_eq!(raw.get(2) / raw.get(1).powi(2), 0.184, epsilon = 1e-10);
        assert!(s.probs()[2] > 0.05);
    }

    #[test]
    fn heralded_pdc_tail_is_monotone() {
        for &(lambda, eta) in &[(0.3, 1.0), (0.6, 0.2), (0.8, 0.05)] {
            let s = make_heralded_pdc(lambda, eta, 80).unwrap();
            assert_eq!(s.probs()[0], 0.0);
            let mode = (0..=80).max_by(|&a, &b| s.probs()[a].total_cmp(&s.probs()[b])).unwrap();
            for n in mode..80 {
                assert!(s.probs()[n + 1] <= s.probs()[n]);
            }
        }
    }

    #[test]
    fn displacement_element_against_series() {
        let beta = Complex64::new(1.0, 0.0);
        let e = displacement_element(0, 1, beta).unwrap();
        assert_abs_diff_eq!(e.norm_sqr(), (-1.0f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(e.norm_sqr(), 0.367879, epsilon = 1e-6);
        for &beta in &[
            Complex64::new(0.7, -0.4),
            Complex64::new(-1.3, 0.9),
            Complex64::new(0.0, 2.0),
        ] {
            for m in 0..8 {
                for n in 0..8 {
                    let a = displacement_element(m, n, beta).unwrap();
                    let o = displacement_series(m, n, beta);
                    assert!((a - o).norm() < 1e-12, "m={m} n={n} {a} vs {o}");
                }
            }
        }
        for n in 0..6 {
            assert_eq!(displacement_element(n, n, Complex64::new(0.0, 0.0)).unwrap().re, 1.0);
        }
        assert!(displacement_element(0, 0, Complex64::new(8.0, 0.0)).is_err());
    }

    #[test]
    fn displaced_fock_one_matches_closed_form() {
        let b: f64 = 1.7;
        let s = displace_statistics(&make_fock(1, 1).unwrap(), b.sqrt(), 40).unwrap();
        for n in 0..=20usize {
            let nf = n as f64;
            let expected = (-b).exp() * b.powf(nf - 1.0) * (nf - b).powi(2) / crate::numeric::factorial(n);
            assert_abs_diff_eq!(s.prob(n), expected, epsilon = 1e-13);
        }
        assert!(!s.truncation_warning());
    }

    #[test]
    fn displacement_edge_cases() {
        let src = make_heralded_pdc(0.4, 0.5, 12).unwrap();
        let same = displace_statistics(&src, 0.0, 12).unwrap();
        assert_eq!(same.probs(), src.probs());

        let vac = make_fock(0, 0).unwrap();
        let coh = displace_statistics(&vac, 1.2, 40).unwrap();
        let pois = make_coherent(1.44, 40).unwrap();
        for n in 0..=40 {
            assert_abs_diff_eq!(coh.prob(n), pois.prob(n), epsilon = 1e-14);
        }

        let cut = displace_statistics(&make_fock(1, 1).unwrap(), 2.0, 5).unwrap();
        assert!(cut.truncation_warning());
        assert!(displace_statistics(&vac, -1.0, 4).is_err());
    }

    #[test]
    fn factorial_moment_examples() {
        let one = factorial_moments(&make_fock(1, 5).unwrap(), 4).unwrap();
        assert_eq!(one.values(), &[1.0, 0.0, 0.0, 0.0]);
        let coh = factorial_moments(&make_coherent(0.8, 60).unwrap(), 5).unwrap();
        for m in 1..=5 {
            assert_abs_diff_eq!(coh.get(m), 0.8f64.powi(m as i32), epsilon = 1e-13);
        }
        assert!(factorial_moments(&make_fock(1, 5).unwrap(), 0).is_err());
    }

    #[test]
    fn source_spec_json() {
        let spec: SourceSpec =
            serde_json::from_str(r#"{"variant":"heralded_pdc","squeeze":0.3,"herald_efficiency":1.0,"n_max":30}"#)
                .unwrap();
        assert_eq!(spec.n_max, 30);
        let s = spec.build().unwrap();
        assert_eq!(s.n_max(), 30);
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<SourceSpec>(&back).unwrap(), spec);

        let fock: SourceSpec = serde_json::from_str(r#"{"variant":"fock","n":1}"#).unwrap();
        assert_eq!(fock.n_max, DEFAULT_N_MAX);

        let measured: SourceSpec =
            serde_json::from_str(r#"{"variant":"measured","mean":1.07,"g":[0.184,0.04],"n_max":3}"#).unwrap();
        let s = measured.build().unwrap();
        assert_abs_diff_eq!(s.mean(), 1.07, epsilon = 1e-12);
        let raw = factorial_moments(&s, 3).unwrap();
        assert_abs_diff_eq!(raw.get(2) / 1.07f64.powi(2), 0.184, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn displacement_columns_are_unitary(n in 0usize..=10, re in -1.4f64..1.4, im in -1.4f64..1.4) {
            let beta = Complex64::new(re, im);
            let col: f64 = (0..=60).map(|m| displacement_element(m, n, beta).unwrap().norm_sqr()).sum();
            prop_assert!((col - 1.0).abs() < 1e-9);
        }

        #[test]
        fn displacement_preserves_normalization(lambda in 0.0f64..0.6, beta in 0.0f64..2.0) {
            let src = make_heralded_pdc(lambda, 0.7, 30).unwrap();
            let out = displace_statistics(&src, beta, 70).unwrap();
            prop_assert!((out.total() + out.truncation_deficit() - 1.0).abs() < 1e-9);
            prop_assert!(out.total() <= 1.0 + 1e-12);
        }

        #[test]
        fn moments_vanish_above_support(weights in proptest::collection::vec(0.01f64..1.0, 1..8)) {
            let stats = PhotonStatistics::normalized(weights).unwrap();
            let n_max = stats.n_max();
            let raw = factorial_moments(&stats, n_max + 3).unwrap();
            for m in n_max + 1..=n_max + 3 {
                prop_assert_eq!(raw.get(m), 0.0);
            }
        }
    }
}
