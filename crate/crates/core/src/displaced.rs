//! Displaced single photons with imperfect mode overlap.
//!
//! The detected photon number is modelled as a displaced source mode (the
//! part of the reference field that overlaps with the signal, amplitude
//! `sqrt(overlap * b)`) plus an incoherent Poissonian background of mean
//! `(1 - overlap) * b`, where `b = |alpha|^2`. The detection efficiency
//! multiplies both pieces and drops out of every normalized moment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    convolve, displace_statistics, displaced_n_max, factorial_moments, make_coherent, PhotonStatistics, SourceSpec,
};
use crate::moments::{NormalizedMoments, RawMoments};
use crate::numeric::{binomial, CompensatedSum};

/// g^(m) of the ideal displaced single photon D(alpha)|1>, with b = |alpha|^2.
pub fn g_ideal(m: usize, b: f64) -> f64 {
    let mf = m as f64;
    b.powi(m as i32 - 1) * (mf * mf + b) / (1.0 + b).powi(m as i32)
}

/// Mean photon number of D(alpha)|1>.
pub fn mean_ideal(b: f64) -> f64 {
    1.0 + b
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacedStateModel {
    source: PhotonStatistics,
    overlap: f64,
    disp_sq: f64,
}

/// Source given either as a [`SourceSpec`] or as inline probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceInput {
    Spec(SourceSpec),
    Inline(PhotonStatistics),
}

impl SourceInput {
    pub fn build(&self) -> Result<PhotonStatistics> {
        match self {
            SourceInput::Spec(spec) => spec.build(),
            SourceInput::Inline(stats) => Ok(stats.clone()),
        }
    }
}

/// JSON form `{"source": ..., "overlap": x, "disp_sq": b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub source: SourceInput,
    pub overlap: f64,
    #[serde(default)]
    pub disp_sq: f64,
}

impl ModelSpec {
    pub fn build(&self) -> Result<DisplacedStateModel> {
        DisplacedStateModel::new(self.source.build()?, self.overlap, self.disp_sq)
    }
}

impl From<&DisplacedStateModel> for ModelSpec {
    fn from(model: &DisplacedStateModel) -> Self {
        ModelSpec {
            source: SourceInput::Inline(model.source.clone()),
            overlap: model.overlap,
            disp_sq: model.disp_sq,
        }
    }
}

impl DisplacedStateModel {
    pub fn new(source: PhotonStatistics, overlap: f64, disp_sq: f64) -> Result<Self> {
        if !(overlap.is_finite() && (0.0..=1.0).contains(&overlap)) {
            return Err(Error::domain("overlap", overlap, "0 <= overlap <= 1"));
        }
        if !(disp_sq.is_finite() && disp_sq >= 0.0) {
            return Err(Error::domain("disp_sq", disp_sq, "disp_sq >= 0"));
        }
        Ok(DisplacedStateModel {
            source,
            overlap,
            disp_sq,
        })
    }

    pub fn source(&self) -> &PhotonStatistics {
        &self.source
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn disp_sq(&self) -> f64 {
        self.disp_sq
    }

    pub fn with_disp_sq(&self, disp_sq: f64) -> Result<Self> {
        Self::new(self.source.clone(), self.overlap, disp_sq)
    }

    pub fn with_overlap(&self, overlap: f64) -> Result<Self> {
        Self::new(self.source.clone(), overlap, self.disp_sq)
    }

    /// Statistics of the displaced source mode alone.
    pub fn displaced_part(&self) -> Result<PhotonStatistics> {
        let b_coherent = self.overlap * self.disp_sq;
        let n_out = displaced_n_max(self.source.support_max(), b_coherent);
        displace_statistics(&self.source, b_coherent.sqrt(), n_out)
    }

    /// <n^(k)>_D for k = 1..=m_max.
    pub fn displaced_part_raw(&self, m_max: usize) -> Result<RawMoments> {
        factorial_moments(&self.displaced_part()?, m_max.max(1))
    }

    /// Effective (unnormalized) factorial moments of the detected mode,
    /// sum_k C(m,k) <n^(k)>_D <n^(m-k)>_bg, for m = 1..=m_max.
    pub fn effective_raw(&self, m_max: usize) -> Result<RawMoments> {
        let d = self.displaced_part_raw(m_max)?;
        let values = (1..=m_max)
            .map(|m| {
                let mut acc = CompensatedSum::default();
                for k in 0..=m {
                    acc.add(binomial(m, k) * d.get(k) * background_moments(self, m - k));
                }
                acc.value()
            })
            .collect();
        RawMoments::new(values)
    }
}

pub fn displaced_part_moments(model: &DisplacedStateModel, m: usize) -> Result<f64> {
    if m == 0 {
        return Ok(1.0);
    }
    Ok(model.displaced_part_raw(m)?.get(m))
}

/// Normally ordered moments of the background, [(1 - M) b]^m.
pub fn background_moments(model: &DisplacedStateModel, m: usize) -> f64 {
    ((1.0 - model.overlap) * model.disp_sq).powi(m as i32)
}

pub fn g_eff(model: &DisplacedStateModel, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::domain("m", m as f64, "m >= 2"));
    }
    let raw = model.effective_raw(m)?;
    let mean = raw.get(1);
    if mean <= 0.0 {
        return Err(Error::ZeroMean);
    }
    Ok(raw.get(m) / mean.powi(m as i32))
}

/// <n>_sp + b; the overlap only redistributes the mean between the two parts.
pub fn mean_eff(model: &DisplacedStateModel) -> f64 {
    model.source.mean() + model.disp_sq
}

/// Full photon statistics of the detected mode: the displaced source
/// convolved with the Poissonian background.
pub fn exact_statistics(model: &DisplacedStateModel) -> Result<PhotonStatistics> {
    let displaced = model.displaced_part()?;
    let bg_mean = (1.0 - model.overlap) * model.disp_sq;
    let n_out = displaced_n_max(displaced.n_max(), bg_mean).max(displaced.n_max());
    let background = make_coherent(bg_mean, n_out)?;
    Ok(convolve(&displaced, &background, n_out))
}

/// g^(2..=m_max) of the model and its effective mean.
pub fn predict_moments(model: &DisplacedStateModel, m_max: usize) -> Result<NormalizedMoments> {
    if m_max < 2 {
        return Err(Error::domain("m_max", m_max as f64, "m_max >= 2"));
    }
    let raw = model.effective_raw(m_max)?;
    let denom = raw.get(1);
    if denom <= 0.0 {
        return Err(Error::ZeroMean);
    }
    let g = (2..=m_max).map(|m| raw.get(m) / denom.powi(m as i32)).collect();
    NormalizedMoments::new(mean_eff(model), g)
}
