//! The `σ1/σ2` estimator: for every assumed period, the ratio of the two
//! largest singular values of the data matrix. A noiseless block repeated
//! at its true period gives a rank-one matrix and an unbounded ratio.

use nalgebra::{DMatrix, QR};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::period_finder::{DataMatrix, Method, PeriodEstimate};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvdConfig {
    /// Ratio recorded when `σ2` is negligible.
    pub cap_value: f64,
    /// `σ2 ≤ rel_threshold·σ1` counts as negligible.
    pub rel_threshold: f64,
}

impl Default for SvdConfig {
    fn default() -> Self {
        SvdConfig { cap_value: 1e15, rel_threshold: 1e-12 }
    }
}

/// Two largest singular values, `σ1 ≥ σ2 ≥ 0`.
///
/// The matrix is oriented tall, reduced by Householder QR to its square
/// triangular factor, and the factor's singular values are computed by
/// bidiagonalization. Both steps are backward stable, so a rank-one input
/// yields `σ2` at the rounding level of `σ1`.
pub fn top_two_singular_values(d: &DataMatrix) -> (f64, f64) {
    let (m, p) = (d.rows, d.cols());
    let tall = if m >= p {
        DMatrix::from_row_slice(m, p, &d.values)
    } else {
        DMatrix::from_column_slice(p, m, &d.values)
    };
    let r = QR::new(tall).r();
    let mut sv: Vec<f64> = r.singular_values().iter().copied().collect();
    sv.sort_unstable_by(|a, b| b.total_cmp(a));
    let s1 = sv.first().copied().unwrap_or(0.0);
    let s2 = sv.get(1).copied().unwrap_or(0.0);
    (s1.max(0.0), s2.max(0.0))
}

fn ratio(s1: f64, s2: f64, cfg: &SvdConfig) -> f64 {
    if s1 == 0.0 {
        1.0
    } else if s2 <= cfg.rel_threshold * s1 {
        cfg.cap_value
    } else {
        s1 / s2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvdSpectrum {
    pub signal_len: usize,
    /// `ratios[i]` belongs to `P = i + 2`.
    pub ratios: Vec<f64>,
    pub cap_value: f64,
}

impl SvdSpectrum {
    pub fn get(&self, period: usize) -> Option<f64> {
        period.checked_sub(2).and_then(|i| self.ratios.get(i)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.ratios.iter().enumerate().map(|(i, &v)| (i + 2, v))
    }

    pub fn is_capped(&self, period: usize) -> bool {
        self.get(period) == Some(self.cap_value)
    }
}

pub fn svd_spectrum(signal: &Signal) -> Result<SvdSpectrum> {
    svd_spectrum_with(signal, &SvdConfig::default())
}

pub fn svd_spectrum_with(signal: &Signal, cfg: &SvdConfig) -> Result<SvdSpectrum> {
    let n = signal.len();
    if n < 4 {
        return Err(Error::TooShort { len: n, min: 4 });
    }
    let samples = signal.samples();
    let ratios = (2..=n / 2)
        .into_par_iter()
        .map(|p| {
            let rows = n / p;
            let d = DataMatrix { period: p, rows, values: samples[..rows * p].to_vec() };
            let (s1, s2) = top_two_singular_values(&d);
            ratio(s1, s2, cfg)
        })
        .collect();
    Ok(SvdSpectrum { signal_len: n, ratios, cap_value: cfg.cap_value })
}

pub fn estimate_period_svd(signal: &Signal) -> Result<PeriodEstimate> {
    estimate_period_svd_with(signal, &SvdConfig::default())
}

pub fn estimate_period_svd_with(signal: &Signal, cfg: &SvdConfig) -> Result<PeriodEstimate> {
    let spectrum = svd_spectrum_with(signal, cfg)?;
    let (period, score) = spectrum
        .iter()
        .fold(None, |best: Option<(usize, f64)>, (p, r)| match best {
            Some((_, br)) if r <= br => best,
            _ => Some((p, r)),
        })
        .expect("spectrum covers at least P = 2");
    Ok(PeriodEstimate { period, score, method: Method::Svd, dips: Vec::new(), runs_consistent: None })
}
