//! Minimum-variance period estimation.
//!
//! For an assumed period `P` the signal is cut into `m = ⌊N/P⌋` blocks of
//! length `P` (the trailing `N mod P` samples are dropped) and stacked as
//! the rows of an `m × P` data matrix. Every column of that matrix is
//! constant exactly when `P` is a multiple of the composite period, and a
//! column computed at a multiple of a hidden period carries no variance
//! from that component. The mean column variance as a function of `P`
//! therefore dips at multiples of the hidden periods and drops to the
//! noise floor at multiples of the composite period.
//!
//! Two estimators are provided:
//!
//! * [`estimate_period_mvpf`] evaluates every column of every data matrix
//!   for `P = 2..=⌊N/2⌋`.
//! * [`estimate_period_montecarlo`] evaluates only a fixed number of
//!   randomly chosen columns, each on a fixed number of randomly chosen
//!   rows, repeats this over `k` resends and keeps the dip locations found
//!   in every run. Work per assumed period is constant, so the sweep is
//!   linear in `N`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::signal::Signal;

/// Blocks of length `period` stacked as rows, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub period: usize,
    pub rows: usize,
    pub values: Vec<f64>,
}

impl DataMatrix {
    /// Wraps an arbitrary row-major matrix with `cols` columns.
    pub fn from_row_major(cols: usize, values: Vec<f64>) -> Result<Self> {
        if cols == 0 || values.is_empty() || values.len() % cols != 0 {
            return Err(Error::BadParams(format!(
                "{} values do not form rows of {cols} columns",
                values.len()
            )));
        }
        Ok(DataMatrix { period: cols, rows: values.len() / cols, values })
    }

    pub fn cols(&self) -> usize {
        self.period
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.period + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.period..(row + 1) * self.period]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }
}

fn max_period(len: usize) -> usize {
    len / 2
}

fn check_period(len: usize, period: usize) -> Result<()> {
    let max = max_period(len);
    if period < 2 || period > max {
        return Err(Error::BadPeriod { period, max, len });
    }
    Ok(())
}

pub fn build_data_matrix(signal: &Signal, period: usize) -> Result<DataMatrix> {
    check_period(signal.len(), period)?;
    let rows = signal.len() / period;
    Ok(DataMatrix { period, rows, values: signal.samples()[..rows * period].to_vec() })
}

/// Population variance of column `col` of the row-major `data` (with
/// `cols` columns) restricted to `rows`.
fn column_popvar(data: &[f64], cols: usize, col: usize, rows: &[usize]) -> f64 {
    let m = rows.len() as f64;
    let mean = rows.iter().map(|&r| data[r * cols + col]).sum::<f64>() / m;
    rows.iter()
        .map(|&r| {
            let d = data[r * cols + col] - mean;
            d * d
        })
        .sum::<f64>()
        / m
}

fn mean_column_variance(data: &[f64], cols: usize, columns: &[usize], rows: &[usize]) -> f64 {
    columns
        .iter()
        .map(|&c| column_popvar(data, cols, c, rows))
        .sum::<f64>()
        / columns.len() as f64
}

/// Mean over the columns of the population (divide-by-`m`) variance.
pub fn column_variance_mean(d: &DataMatrix) -> Result<f64> {
    if d.rows < 2 {
        return Err(Error::BadPeriod {
            period: d.period,
            max: d.values.len() / 2,
            len: d.values.len(),
        });
    }
    let rows: Vec<usize> = (0..d.rows).collect();
    let columns: Vec<usize> = (0..d.period).collect();
    Ok(mean_column_variance(&d.values, d.period, &columns, &rows))
}

fn full_variance(samples: &[f64], period: usize) -> f64 {
    let rows: Vec<usize> = (0..samples.len() / period).collect();
    let columns: Vec<usize> = (0..period).collect();
    mean_column_variance(samples, period, &columns, &rows)
}

/// A per-assumed-period statistic over `P = 2..=⌊N/2⌋`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceProfile {
    pub signal_len: usize,
    /// `values[i]` belongs to `P = i + 2`.
    pub values: Vec<f64>,
}

impl VarianceProfile {
    pub fn min_period(&self) -> usize {
        2
    }

    pub fn max_period(&self) -> usize {
        max_period(self.signal_len)
    }

    pub fn get(&self, period: usize) -> Option<f64> {
        period.checked_sub(2).and_then(|i| self.values.get(i)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (i + 2, v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_len(len: usize) -> Result<()> {
    if len < 4 {
        return Err(Error::TooShort { len, min: 4 });
    }
    Ok(())
}

pub fn variance_profile(signal: &Signal) -> Result<VarianceProfile> {
    let n = signal.len();
    check_len(n)?;
    let samples = signal.samples();
    let values = (2..=max_period(n))
        .into_par_iter()
        .map(|p| full_variance(samples, p))
        .collect();
    Ok(VarianceProfile { signal_len: n, values })
}

/// A strict interior local minimum of a variance profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipRecord {
    pub period: usize,
    /// `max(var) − var[P]`
    pub measure1: f64,
    /// `max(var) + var[P−1] + var[P+1] − 3·var[P]`
    pub measure2: f64,
    /// `measure2⁴`
    pub score: f64,
}

pub fn detect_dips(profile: &VarianceProfile) -> Vec<DipRecord> {
    let v = &profile.values;
    if v.len() < 3 {
        return Vec::new();
    }
    let top = profile.max();
    (1..v.len() - 1)
        .filter(|&i| v[i] < v[i - 1] && v[i] < v[i + 1])
        .map(|i| {
            let measure2 = top + v[i - 1] + v[i + 1] - 3.0 * v[i];
            DipRecord {
                period: i + 2,
                measure1: top - v[i],
                measure2,
                score: measure2.powi(4),
            }
        })
        .collect()
}

/// Highest score, smallest period among ties.
fn best_dip<'a>(dips: impl IntoIterator<Item = &'a DipRecord>) -> Option<&'a DipRecord> {
    let mut best: Option<&DipRecord> = None;
    for d in dips {
        let better = best.is_none_or(|b| {
            d.score > b.score || (d.score == b.score && d.period < b.period)
        });
        if better {
            best = Some(d);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MVPF", alias = "variance", alias = "mvpf")]
    Mvpf,
    #[serde(rename = "MonteCarlo", alias = "montecarlo", alias = "mc")]
    MonteCarlo,
    #[serde(rename = "SVD", alias = "svd")]
    Svd,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "variance" | "mvpf" => Ok(Method::Mvpf),
            "montecarlo" | "monte-carlo" | "mc" => Ok(Method::MonteCarlo),
            "svd" => Ok(Method::Svd),
            other => Err(Error::BadParams(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mvpf => "MVPF",
            Method::MonteCarlo => "MonteCarlo",
            Method::Svd => "SVD",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodEstimate {
    pub period: usize,
    pub score: f64,
    pub method: Method,
    /// For the Monte Carlo estimator these are the consistent locations,
    /// with every field averaged over the runs.
    pub dips: Vec<DipRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs_consistent: Option<usize>,
}

pub fn estimate_period_mvpf(signal: &Signal) -> Result<PeriodEstimate> {
    let profile = variance_profile(signal)?;
    let dips = detect_dips(&profile);
    let best = *best_dip(&dips).ok_or(Error::NoDipsFound)?;
    Ok(PeriodEstimate {
        period: best.period,
        score: best.score,
        method: Method::Mvpf,
        dips,
        runs_consistent: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonteCarloParams {
    /// Number of runs `k` whose dip locations must agree.
    pub resends: usize,
    /// Columns sampled per assumed period.
    pub columns: usize,
    /// Rows sampled per column.
    pub rows: usize,
    pub seed: u64,
}

impl Default for MonteCarloParams {
    fn default() -> Self {
        MonteCarloParams { resends: 5, columns: 16, rows: 16, seed: crate::DEFAULT_SEED }
    }
}

impl MonteCarloParams {
    pub fn validate(&self) -> Result<()> {
        if self.resends < 1 {
            return Err(Error::BadParams("resends must be at least 1".into()));
        }
        if self.columns < 1 {
            return Err(Error::BadParams("columns must be at least 1".into()));
        }
        if self.rows < 2 {
            return Err(Error::BadParams("rows must be at least 2".into()));
        }
        Ok(())
    }
}

fn sample_sorted(rng: &mut impl rand::Rng, total: usize, amount: usize) -> Vec<usize> {
    if amount >= total {
        return (0..total).collect();
    }
    let mut picked = index::sample(rng, total, amount).into_vec();
    picked.sort_unstable();
    picked
}

fn subsampled(samples: &[f64], period: usize, params: &MonteCarloParams, run: u64) -> f64 {
    let m = samples.len() / period;
    let mut rng = rng::stream(params.seed, &[run, period as u64]);
    let columns = sample_sorted(&mut rng, period, params.columns);
    if m <= params.rows {
        let rows: Vec<usize> = (0..m).collect();
        return mean_column_variance(samples, period, &columns, &rows);
    }
    columns
        .iter()
        .map(|&c| {
            let rows = sample_sorted(&mut rng, m, params.rows);
            column_popvar(samples, period, c, &rows)
        })
        .sum::<f64>()
        / columns.len() as f64
}

/// Mean population variance over `params.columns` random columns of the
/// period-`P` data matrix, each on `params.rows` random rows. Sampling is
/// without replacement and falls back to all columns or rows when there
/// are not enough. The draws depend only on `(seed, run_index, P)`.
pub fn subsampled_variance(
    signal: &Signal,
    period: usize,
    params: &MonteCarloParams,
    run_index: u64,
) -> Result<f64> {
    check_period(signal.len(), period)?;
    params.validate()?;
    Ok(subsampled(signal.samples(), period, params, run_index))
}

pub fn subsampled_profile(
    signal: &Signal,
    params: &MonteCarloParams,
    run_index: u64,
) -> Result<VarianceProfile> {
    let n = signal.len();
    check_len(n)?;
    params.validate()?;
    let samples = signal.samples();
    let values = (2..=max_period(n))
        .into_par_iter()
        .map(|p| subsampled(samples, p, params, run_index))
        .collect();
    Ok(VarianceProfile { signal_len: n, values })
}

/// Randomized estimator.
///
/// `records` is either `params.resends` independent observations of the
/// same signal (run `l` uses record `l`), or a single record that every
/// run subsamples afresh. Dip locations present in all runs are ranked by
/// their mean score.
pub fn estimate_period_montecarlo(
    records: &[Signal],
    params: &MonteCarloParams,
) -> Result<PeriodEstimate> {
    params.validate()?;
    let k = params.resends;
    let first = records
        .first()
        .ok_or_else(|| Error::BadParams("at least one record is required".into()))?;
    if records.len() != 1 && records.len() != k {
        return Err(Error::BadParams(format!(
            "expected 1 or {k} records, got {}",
            records.len()
        )));
    }
    if let Some(r) = records.iter().find(|r| r.len() != first.len()) {
        return Err(Error::LengthMismatch { left: first.len(), right: r.len() });
    }

    // period -> (hits, Σmeasure1, Σmeasure2, Σscore)
    let mut tally: BTreeMap<usize, (usize, f64, f64, f64)> = BTreeMap::new();
    for run in 0..k {
        let record = if records.len() == 1 { first } else { &records[run] };
        let profile = subsampled_profile(record, params, run as u64)?;
        for d in detect_dips(&profile) {
            let e = tally.entry(d.period).or_insert((0, 0.0, 0.0, 0.0));
            e.0 += 1;
            e.1 += d.measure1;
            e.2 += d.measure2;
            e.3 += d.score;
        }
    }
    let runs = k as f64;
    let consistent: Vec<DipRecord> = tally
        .into_iter()
        .filter(|(_, t)| t.0 == k)
        .map(|(period, t)| DipRecord {
            period,
            measure1: t.1 / runs,
            measure2: t.2 / runs,
            score: t.3 / runs,
        })
        .collect();
    let best = *best_dip(&consistent).ok_or(Error::NoConsistentDips { runs: k })?;
    Ok(PeriodEstimate {
        period: best.period,
        score: best.score,
        method: Method::MonteCarlo,
        runs_consistent: Some(consistent.len()),
        dips: consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{compose, gen_triangular};

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    #[test]
    fn example_data_matrix() {
        let d = build_data_matrix(&sig(&[1., 2., 3., 1., 2., 3., 1., 2.]), 3).unwrap();
        assert_eq!(d.rows, 2);
        assert_eq!(d.row(0), &[1., 2., 3.]);
        assert_eq!(d.row(1), &[1., 2., 3.]);
        assert_eq!(column_variance_mean(&d).unwrap(), 0.0);
    }

    #[test]
    fn data_matrix_drops_remainder() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let d = build_data_matrix(&sig(&x), 4).unwrap();
        assert_eq!(d.rows, 2);
        assert_eq!(d.values, (0..8).map(f64::from).collect::<Vec<_>>());
        let d8 = build_data_matrix(&sig(&x[..8]), 4).unwrap();
        assert_eq!(d8.values.len(), 8);
        assert_eq!(d8.column(1), vec![1.0, 5.0]);
    }

    #[test]
    fn data_matrix_period_range() {
        let s = sig(&[0.0; 10]);
        assert!(matches!(build_data_matrix(&s, 1), Err(Error::BadPeriod { .. })));
        assert!(matches!(build_data_matrix(&s, 6), Err(Error::BadPeriod { .. })));
        assert!(build_data_matrix(&s, 5).is_ok());
    }

    #[test]
    fn column_variance_hand_values() {
        let s = sig(&[1., 2., 1., 2., 1., 2.]);
        assert_eq!(column_variance_mean(&build_data_matrix(&s, 2).unwrap()).unwrap(), 0.0);
        let v = column_variance_mean(&build_data_matrix(&s, 3).unwrap()).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let one_row = DataMatrix::from_row_major(3, vec![1., 2., 3.]).unwrap();
        assert!(column_variance_mean(&one_row).is_err());
    }

    #[test]
    fn profile_of_constant_is_zero() {
        let p = variance_profile(&sig(&[3.5; 40])).unwrap();
        assert_eq!(p.values.len(), 19);
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert_eq!(estimate_period_mvpf(&sig(&[3.5; 40])).unwrap_err(), Error::NoDipsFound);
        assert_eq!(variance_profile(&sig(&[1., 2., 3.])).unwrap_err(), Error::TooShort { len: 3, min: 4 });
    }

    #[test]
    fn dips_from_hand_profile() {
        let profile = VarianceProfile { signal_len: 13, values: vec![5., 3., 5., 1., 5.] };
        let dips = detect_dips(&profile);
        assert_eq!(
            dips,
            vec![
                DipRecord { period: 3, measure1: 2.0, measure2: 6.0, score: 1296.0 },
                DipRecord { period: 5, measure1: 4.0, measure2: 12.0, score: 20736.0 },
            ]
        );
        let mono = VarianceProfile { signal_len: 13, values: vec![5., 4., 3., 2., 1.] };
        assert!(detect_dips(&mono).is_empty());
        let short = VarianceProfile { signal_len: 7, values: vec![1., 0.] };
        assert!(detect_dips(&short).is_empty());
    }

    #[test]
    fn ties_go_to_smallest_period() {
        let dips = [
            DipRecord { period: 9, measure1: 1.0, measure2: 2.0, score: 16.0 },
            DipRecord { period: 4, measure1: 1.0, measure2: 2.0, score: 16.0 },
            DipRecord { period: 6, measure1: 1.0, measure2: 1.0, score: 1.0 },
        ];
        assert_eq!(best_dip(&dips).unwrap().period, 4);
    }

    #[test]
    fn triangles_seven_and_thirteen() {
        let n = 400;
        let x = compose(&[
            gen_triangular(7, 1.0, n).unwrap(),
            gen_triangular(13, 1.0, n).unwrap(),
        ])
        .unwrap();
        let profile = variance_profile(&x).unwrap();
        let dip_periods: Vec<usize> = detect_dips(&profile).iter().map(|d| d.period).collect();
        let hidden = |p: usize| p % 7 == 0 || p % 13 == 0;
        // multiples whose neighbours are not themselves multiples, while the
        // data matrix still has at least four rows
        for p in (3..=n / 4).filter(|&p| hidden(p) && !hidden(p - 1) && !hidden(p + 1)) {
            assert!(dip_periods.contains(&p), "missing dip at {p}: {dip_periods:?}");
        }
        assert!(dip_periods.contains(&91) && dip_periods.contains(&182));
        assert_eq!(estimate_period_mvpf(&x).unwrap().period, 91);
    }

    #[test]
    fn full_subsample_equals_exhaustive() {
        let x = compose(&[
            gen_triangular(5, 1.0, 120).unwrap(),
            gen_triangular(8, 1.0, 120).unwrap(),
        ])
        .unwrap();
        let params = MonteCarloParams { resends: 1, columns: 1000, rows: 1000, seed: 3 };
        for p in 2..=60 {
            let d = build_data_matrix(&x, p).unwrap();
            assert_eq!(
                subsampled_variance(&x, p, &params, 0).unwrap(),
                column_variance_mean(&d).unwrap()
            );
        }
        let mc = estimate_period_montecarlo(std::slice::from_ref(&x), &params).unwrap();
        let mvpf = estimate_period_mvpf(&x).unwrap();
        assert_eq!(mc.period, mvpf.period);
        assert_eq!(mc.score, mvpf.score);
        assert_eq!(mc.dips, mvpf.dips);
        assert_eq!(mc.runs_consistent, Some(mvpf.dips.len()));
    }

    #[test]
    fn subsample_is_deterministic_and_zero_at_period_multiples() {
        let x = gen_triangular(9, 1.0, 2000).unwrap();
        let params = MonteCarloParams { resends: 3, columns: 4, rows: 5, seed: 11 };
        for p in [9, 18, 27, 90] {
            assert!(subsampled_variance(&x, p, &params, 0).unwrap() < 1e-30);
        }
        let a = subsampled_variance(&x, 50, &params, 2).unwrap();
        assert_eq!(a, subsampled_variance(&x, 50, &params, 2).unwrap());
        assert_ne!(a, subsampled_variance(&x, 50, &params, 1).unwrap());
    }

    #[test]
    fn montecarlo_argument_errors() {
        let x = gen_triangular(9, 1.0, 200).unwrap();
        let y = gen_triangular(9, 1.0, 201).unwrap();
        let params = MonteCarloParams { resends: 3, ..Default::default() };
        assert!(matches!(estimate_period_montecarlo(&[], &params), Err(Error::BadParams(_))));
        assert!(matches!(
            estimate_period_montecarlo(&[x.clone(), x.clone()], &params),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            estimate_period_montecarlo(&[x.clone(), x.clone(), y], &params),
            Err(Error::LengthMismatch { .. })
        ));
        let bad = MonteCarloParams { rows: 1, ..Default::default() };
        assert!(estimate_period_montecarlo(&[x], &bad).is_err());
    }

    #[test]
    fn montecarlo_on_constant_signal_has_no_consistent_dips() {
        let x = sig(&[1.0; 64]);
        let params = MonteCarloParams { resends: 2, ..Default::default() };
        assert_eq!(
            estimate_period_montecarlo(&[x], &params).unwrap_err(),
            Error::NoConsistentDips { runs: 2 }
        );
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Mvpf, Method::MonteCarlo, Method::Svd] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!("variance".parse::<Method>().unwrap(), Method::Mvpf);
        assert_eq!(serde_json::to_string(&Method::Svd).unwrap(), "\"SVD\"");
    }
}
