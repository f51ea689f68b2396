//! Classicality tests, overlap fitting and reconstruction-range bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::displaced::{exact_statistics, mean_eff, predict_moments, DisplacedStateModel};
use crate::error::{Error, Result};
use crate::fock::PhotonStatistics;
use crate::moments::{reconstruct_all, reconstruction_errors, NormalizedMoments};

/// Bracket width at which the golden-section search stops.
pub const FIT_TOLERANCE: f64 = 1e-4;

/// Bisection tolerance for range boundaries, in mean photon number.
pub const RANGE_TOLERANCE: f64 = 1e-4;

/// Absolute deviation above which a reconstructed component is flagged.
pub const DEVIATION_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// g^(m) >= 1
    AtLeastOne,
    /// g^(m+1) >= g^(m)
    NonDecreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalityCheck {
    pub order: usize,
    pub inequality: Inequality,
    /// Amount by which the classical inequality fails; negative when it holds.
    pub margin: f64,
    pub sigma: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalityReport {
    pub checks: Vec<ClassicalityCheck>,
    pub nonclassical: bool,
}

impl ClassicalityReport {
    pub fn violations(&self) -> impl Iterator<Item = &ClassicalityCheck> {
        self.checks.iter().filter(|c| c.violated)
    }
}

/// Evaluates g^(m+1) >= g^(m) >= 1 for every available order. A check counts
/// as violated when its margin exceeds the propagated standard error (or is
/// positive when no errors are attached).
pub fn classicality_violations(g: &NormalizedMoments) -> Result<ClassicalityReport> {
    let m_max = g.m_max();
    if m_max < 2 {
        return Err(Error::domain("m_max", m_max as f64, "m_max >= 2"));
    }
    let mut checks = Vec::new();
    let mut push = |order, inequality, margin: f64, sigma: f64| {
        let violated = if sigma > 0.0 { margin > sigma } else { margin > 1e-12 };
        checks.push(ClassicalityCheck {
            order,
            inequality,
            margin,
            sigma,
            violated,
        });
    };
    for m in 2..=m_max {
        push(m, Inequality::AtLeastOne, 1.0 - g.g(m), g.error(m));
    }
    for m in 2..m_max {
        let sigma = (g.error(m).powi(2) + g.error(m + 1).powi(2)).sqrt();
        push(m, Inequality::NonDecreasing, g.g(m) - g.g(m + 1), sigma);
    }
    let nonclassical = checks.iter().any(|c| c.violated);
    Ok(ClassicalityReport { checks, nonclassical })
}

/// One measured point: calibrated mean and g^(2), g^(3), ... with optional
/// standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub mean: f64,
    pub g: Vec<f64>,
    #[serde(default)]
    pub errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub overlap_hat: f64,
    pub residual_sum: f64,
    pub stderr: f64,
    pub n_points: usize,
}

struct Weighted {
    disp_sq: f64,
    g: Vec<f64>,
    weights: Vec<f64>,
}

fn prepare(dataset: &[DataPoint], mean_sp: f64) -> Result<Vec<Weighted>> {
    if dataset.len() < 2 {
        return Err(Error::EmptyDataset { min: 2 });
    }
    let mut out = Vec::with_capacity(dataset.len());
    let mut any_weight = false;
    for (j, p) in dataset.iter().enumerate() {
        let disp_sq = p.mean - mean_sp;
        if !(disp_sq.is_finite() && disp_sq >= -1e-9) {
            return Err(Error::Schema {
                path: format!("dataset[{j}].mean"),
                message: format!("mean {} below the source mean {mean_sp}", p.mean),
            });
        }
        let weights = match &p.errors {
            None => vec![1.0; p.g.len()],
            Some(e) => {
                if e.len() != p.g.len() {
                    return Err(Error::Schema {
                        path: format!("dataset[{j}].errors"),
                        message: format!("{} errors for {} moments", e.len(), p.g.len()),
                    });
                }
                e.iter()
                    .map(|&s| {
                        if s.is_infinite() {
                            Ok(0.0)
                        } else if s.is_finite() && s > 0.0 {
                            Ok(1.0 / (s * s))
                        } else {
                            Err(Error::Schema {
                                path: format!("dataset[{j}].errors"),
                                message: format!("standard error {s} must be positive"),
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        any_weight |= weights.iter().any(|&w| w > 0.0);
        out.push(Weighted {
            disp_sq: disp_sq.max(0.0),
            g: p.g.clone(),
            weights,
        });
    }
    if !any_weight {
        return Err(Error::ZeroWeights);
    }
    Ok(out)
}

fn chi_square(source: &PhotonStatistics, points: &[Weighted], overlap: f64) -> Result<f64> {
    let mut chi2 = 0.0;
    for p in points {
        if p.g.is_empty() {
            continue;
        }
        let model = DisplacedStateModel::new(source.clone(), overlap, p.disp_sq)?;
        let pred = predict_moments(&model, p.g.len() + 1)?;
        for (k, (&obs, &w)) in p.g.iter().zip(&p.weights).enumerate() {
            chi2 += w * (pred.g(k + 2) - obs).powi(2);
        }
    }
    Ok(chi2)
}

/// Weighted least-squares estimate of the mode overlap. Each point's
/// displacement is its mean minus the source mean; the overlap is found by
/// golden-section search on [0, 1] and its standard error from the
/// curvature of chi^2 (delta chi^2 = 1).
pub fn fit_overlap(dataset: &[DataPoint], source: &PhotonStatistics) -> Result<FitResult> {
    let points = prepare(dataset, source.mean())?;
    let f = |m: f64| chi_square(source, &points, m);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > FIT_TOLERANCE {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let mut best = (0.5 * (a + b), f(0.5 * (a + b))?);
    for edge in [0.0, 1.0] {
        let fe = f(edge)?;
        if fe < best.1 {
            best = (edge, fe);
        }
    }
    let (overlap_hat, residual_sum) = best;

    let h = 1e-3;
    let centre = overlap_hat.clamp(h, 1.0 - h);
    let curvature = (f(centre + h)? - 2.0 * f(centre)? + f(centre - h)?) / (h * h);
    let stderr = if curvature > 0.0 {
        (2.0 / curvature).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(FitResult {
        overlap_hat,
        residual_sum,
        stderr,
        n_points: points.len(),
    })
}

/// Upper limit on the mean photon number from rho(3) >= 0 under order-4
/// truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBound {
    pub bound: f64,
    pub unbounded: bool,
}

pub fn truncation_bound(g3: f64, g4: f64) -> Result<TruncationBound> {
    if !(g3.is_finite() && g3 >= 0.0) {
        return Err(Error::domain("g3", g3, "g3 >= 0"));
    }
    if !(g4.is_finite() && g4 >= 0.0) {
        return Err(Error::domain("g4", g4, "g4 >= 0"));
    }
    if g4 == 0.0 {
        return Ok(TruncationBound {
            bound: f64::INFINITY,
            unbounded: true,
        });
    }
    Ok(TruncationBound {
        bound: g3 / g4,
        unbounded: false,
    })
}

/// Scan settings for boundaries located along the displacement axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeScan {
    pub b_max: f64,
    pub step: f64,
}

impl Default for RangeScan {
    fn default() -> Self {
        RangeScan { b_max: 8.0, step: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeResult {
    /// Mean photon number at the boundary (or at the scan ceiling).
    pub mean: f64,
    pub disp_sq: f64,
    /// No boundary was found below the ceiling.
    pub reached_ceiling: bool,
}

/// Smallest b in [0, b_max] at which `pred` turns true, refined by bisection.
/// Returns `None` when it stays false on the whole grid.
pub fn scan_first_true<F>(mut pred: F, scan: RangeScan, tol: f64) -> Result<Option<f64>>
where
    F: FnMut(f64) -> Result<bool>,
{
    if pred(0.0)? {
        return Ok(Some(0.0));
    }
    let steps = (scan.b_max / scan.step).ceil() as usize;
    let mut lo = 0.0;
    for i in 1..=steps {
        let b = (i as f64 * scan.step).min(scan.b_max);
        if pred(b)? {
            let mut hi = b;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if pred(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
        lo = b;
    }
    Ok(None)
}

fn range_result(model: &DisplacedStateModel, found: Option<f64>, scan: RangeScan) -> RangeResult {
    let disp_sq = found.unwrap_or(scan.b_max);
    RangeResult {
        mean: model.source().mean() + disp_sq,
        disp_sq,
        reached_ceiling: found.is_none(),
    }
}

/// The order-4 truncation bound evaluated on the model itself: the mean at
/// which <n> = g^(3)/g^(4) along the displacement axis.
pub fn model_truncation_bound(model: &DisplacedStateModel, scan: RangeScan) -> Result<RangeResult> {
    let found = scan_first_true(
        |b| {
            let m = model.with_disp_sq(b)?;
            if mean_eff(&m) <= 0.0 {
                return Ok(false);
            }
            let g = predict_moments(&m, 4)?;
            let bound = truncation_bound(g.g(3), g.g(4))?;
            Ok(!bound.unbounded && mean_eff(&m) >= bound.bound)
        },
        scan,
        RANGE_TOLERANCE,
    )?;
    Ok(range_result(model, found, scan))
}

/// True when the order-`m_max` reconstruction from `g` puts more weight on
/// its highest component than on the one below it.
pub fn ordering_artifact(g: &NormalizedMoments, m_max: usize) -> bool {
    let rec = reconstruct_all(&g.truncated(m_max));
    let top = rec.probs.len() - 1;
    top >= 1 && rec.probs[top - 1] < rec.probs[top]
}

/// Mean photon number at which the order-`m_max` truncated reconstruction
/// of the model's predicted moments first shows rho(m_max - 1) < rho(m_max).
pub fn reliable_range(model: &DisplacedStateModel, m_max: usize) -> Result<RangeResult> {
    reliable_range_with(model, m_max, RangeScan::default())
}

pub fn reliable_range_with(model: &DisplacedStateModel, m_max: usize, scan: RangeScan) -> Result<RangeResult> {
    if m_max < 3 {
        return Err(Error::domain("m_max", m_max as f64, "m_max >= 3"));
    }
    let found = scan_first_true(
        |b| {
            let m = model.with_disp_sq(b)?;
            if mean_eff(&m) <= 0.0 {
                return Ok(false);
            }
            Ok(ordering_artifact(&predict_moments(&m, m_max)?, m_max))
        },
        scan,
        RANGE_TOLERANCE,
    )?;
    Ok(range_result(model, found, scan))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub reconstructed: f64,
    pub sigma: f64,
    pub expected: f64,
    pub deviation: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub mean: f64,
    pub m_max: usize,
    pub reliable_range: RangeResult,
    pub inside_range: bool,
    /// rho(m_max) exceeds rho(m_max - 1).
    pub ordering_artifact: bool,
    pub rows: Vec<ReportRow>,
}

/// Compares the truncated reconstruction from `g` with the model's exact
/// statistics at the same mean photon number. Rows deviating by more than
/// [`DEVIATION_TOLERANCE`] (or three standard errors, if larger) are flagged.
pub fn reconstruction_report(g: &NormalizedMoments, model: &DisplacedStateModel) -> Result<ReconstructionReport> {
    let m_max = g.m_max();
    let disp_sq = (g.mean() - model.source().mean()).max(0.0);
    let at_mean = model.with_disp_sq(disp_sq)?;
    let expected = exact_statistics(&at_mean)?;
    let rec = reconstruct_all(g);
    let sigma = reconstruction_errors(g);
    let range = if m_max >= 3 {
        reliable_range(model, m_max)?
    } else {
        range_result(model, Some(0.0), RangeScan::default())
    };
    let rows = rec
        .probs
        .iter()
        .enumerate()
        .map(|(n, &r)| {
            let e = expected.prob(n);
            let deviation = r - e;
            ReportRow {
                n,
                reconstructed: r,
                sigma: sigma[n],
                expected: e,
                deviation,
                flagged: deviation.abs() > DEVIATION_TOLERANCE.max(3.0 * sigma[n]),
            }
        })
        .collect();
    Ok(ReconstructionReport {
        mean: g.mean(),
        m_max,
        inside_range: g.mean() <= range.mean,
        ordering_artifact: ordering_artifact(g, m_max),
        reliable_range: range,
        rows,
    })
}

/// Standard errors of the reconstructed components by resampling g and the
/// mean from independent normal distributions.
pub fn reconstruction_errors_mc(g: &NormalizedMoments, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m_max = g.m_max();
    let mut sum = vec![0.0; m_max + 1];
    let mut sum_sq = vec![0.0; m_max + 1];
    for _ in 0..samples {
        let z: f64 = StandardNormal.sample(&mut rng);
        let mean = (g.mean() + z * g.mean_error().unwrap_or(0.0)).max(f64::MIN_POSITIVE);
        let values = (2..=m_max)
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (g.g(m) + z * g.error(m)).max(0.0)
            })
            .collect();
        let rec = reconstruct_all(&NormalizedMoments::new(mean, values)?);
        for (n, p) in rec.probs.iter().enumerate() {
            sum[n] += p;
            sum_sq[n] += p * p;
        }
    }
    let k = samples as f64;
    Ok(sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, q)| ((q / k - (s / k).powi(2)) * k / (k - 1.0)).max(0.0).sqrt())
        .collect())
}
