//! Hit-miss, runtime-scaling and reconstruction-quality studies on
//! synthetic composites.
//!
//! Every trial draws its randomness from a seed derived from
//! `master_seed` and the trial coordinates, so reports are reproducible and
//! any single trial can be replayed. Only the timing fields vary between
//! reruns.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::csvio::csv_table;
use crate::error::{Error, Result};
use crate::period_finder::{
    estimate_period_montecarlo, estimate_period_mvpf, Method, MonteCarloParams, PeriodEstimate,
};
use crate::ramanujan::{decompose, normalized_strengths, reconstruct_components};
use crate::rng::derive_seed;
use crate::signal::{lcm_all, normalized_correlation, ComponentSpec, GroundTruth, Signal, Waveform};
use crate::svd_baseline::{estimate_period_svd_with, SvdConfig};

const TAG_HIT_MISS: u64 = 1;
const TAG_RUNTIME: u64 = 2;
const TAG_RECON: u64 = 3;

/// SNR values serialize as numbers, with `+∞` written as the string `"inf"`.
mod snr_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else {
            Repr::Text(if v > 0.0 { "inf" } else { "-inf" }.into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" | "noiseless" => Ok(f64::INFINITY),
                other => other
                    .parse()
                    .map_err(|_| E::custom(format!("invalid SNR `{other}`"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }
}

/// Parses an SNR given on the command line; accepts `inf`.
pub fn parse_snr(s: &str) -> Result<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "noiseless" => Ok(f64::INFINITY),
        other => other
            .parse()
            .map_err(|_| Error::BadParams(format!("invalid SNR `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hidden_periods: Vec<usize>,
    pub waveforms: Vec<Waveform>,
    pub amplitudes: Vec<f64>,
    pub n: usize,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    #[serde(with = "snr_serde::list")]
    pub snr_sweep: Vec<f64>,
    pub n_sweep: Vec<usize>,
    pub trials: usize,
    /// Noise realizations per SNR in the reconstruction study.
    pub seeds_per_snr: usize,
    /// Estimator; `None` picks Monte Carlo for hit-miss and MVPF for
    /// reconstruction.
    pub method: Option<Method>,
    /// The seed inside is replaced by a per-trial derived seed.
    pub monte_carlo: MonteCarloParams,
    pub svd: SvdConfig,
    pub bench_methods: Vec<Method>,
    pub repeats: usize,
    /// Each timing sample loops the estimator until this much time passed.
    pub min_measure_s: f64,
    pub threads: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            hidden_periods: vec![8, 11, 16],
            waveforms: vec![Waveform::Triangle, Waveform::Cosine, Waveform::Triangle],
            amplitudes: vec![1.0, 1.0, 1.0],
            n: 4119,
            snr_db: 32.0,
            snr_sweep: vec![5.0, 10.0, 20.0, 35.0],
            n_sweep: vec![4096, 8192, 16384, 32768],
            trials: 20,
            seeds_per_snr: 10,
            method: None,
            monte_carlo: MonteCarloParams::default(),
            svd: SvdConfig::default(),
            bench_methods: vec![Method::MonteCarlo, Method::Svd],
            repeats: 3,
            min_measure_s: 0.05,
            threads: 1,
            master_seed: crate::DEFAULT_SEED,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::BadConfig(e.to_string()))
    }

    pub fn specs(&self) -> Result<Vec<ComponentSpec>> {
        let k = self.hidden_periods.len();
        if k == 0 {
            return Err(Error::BadConfig("hidden_periods is empty".into()));
        }
        if self.waveforms.len() != k {
            return Err(Error::BadConfig(format!(
                "{} waveforms for {k} hidden periods",
                self.waveforms.len()
            )));
        }
        if self.amplitudes.len() != k {
            return Err(Error::BadConfig(format!(
                "{} amplitudes for {k} hidden periods",
                self.amplitudes.len()
            )));
        }
        for (&p, &a) in self.hidden_periods.iter().zip(&self.amplitudes) {
            if p < 2 {
                return Err(Error::BadConfig(format!("hidden period {p} is below 2")));
            }
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::BadConfig(format!("amplitude {a} is not positive")));
            }
        }
        Ok(self
            .hidden_periods
            .iter()
            .zip(&self.waveforms)
            .zip(&self.amplitudes)
            .map(|((&p, &w), &a)| ComponentSpec::new(p, w, a))
            .collect())
    }

    pub fn composite_period(&self) -> usize {
        lcm_all(&self.hidden_periods)
    }

    fn check_common(&self) -> Result<Vec<ComponentSpec>> {
        let specs = self.specs()?;
        self.monte_carlo
            .validate()
            .map_err(|e| Error::BadConfig(e.to_string()))?;
        Ok(specs)
    }

    fn check_length(&self, n: usize) -> Result<()> {
        let need = 4 * self.composite_period();
        if n < need {
            return Err(Error::BadConfig(format!(
                "length {n} is below 4·lcm(hidden_periods) = {need}"
            )));
        }
        Ok(())
    }

    fn check_snr(v: f64) -> Result<()> {
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(Error::BadConfig(format!("invalid SNR {v}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    HitMiss,
    Runtime,
    Reconstruction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub estimate: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub hit: bool,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitMissSummary {
    pub method: Method,
    pub composite_period: usize,
    pub hits: usize,
    pub misses: usize,
    pub mean_runtime_s: f64,
    pub std_runtime_s: f64,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeRow {
    pub method: Method,
    pub n: usize,
    pub median_s: f64,
    pub samples_s: Vec<f64>,
    /// Estimator calls per timing sample.
    pub iterations: Vec<usize>,
    pub estimate: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub method: Method,
    /// Least-squares slope of `ln(median_s)` against `ln(n)`.
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeSummary {
    pub rows: Vec<RuntimeRow>,
    pub slopes: Vec<SlopeRow>,
}

impl RuntimeSummary {
    pub fn slope(&self, method: Method) -> Option<f64> {
        self.slopes.iter().find(|s| s.method == method).map(|s| s.slope)
    }

    pub fn median(&self, method: Method, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.n == n)
            .map(|r| r.median_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconRecord {
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub seed_index: usize,
    pub seed: u64,
    pub estimated_period: Option<usize>,
    pub period_used: Option<usize>,
    /// Normalized correlation of each reconstruction with its ground truth
    /// over one period.
    pub correlations: BTreeMap<usize, f64>,
    /// Largest strength among subspaces `q` that divide no hidden period.
    pub max_nondivisor_strength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconAggregate {
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub valid: usize,
    pub mean_correlations: BTreeMap<usize, f64>,
    pub mean_max_nondivisor_strength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconSummary {
    pub method: Method,
    pub composite_period: usize,
    pub records: Vec<ReconRecord>,
    pub per_snr: Vec<ReconAggregate>,
    /// Spearman rank correlation between SNR and the mean largest
    /// non-divisor strength.
    pub strength_snr_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hit_miss: Option<HitMissSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<RuntimeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconSummary>,
}

impl ExperimentReport {
    fn new(kind: ExperimentKind, config: &ExperimentConfig) -> Self {
        ExperimentReport {
            schema_version: crate::SCHEMA_VERSION,
            kind,
            config: config.clone(),
            hit_miss: None,
            runtime: None,
            reconstruction: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// A copy with every wall-clock field zeroed, for determinism checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        if let Some(h) = r.hit_miss.as_mut() {
            h.mean_runtime_s = 0.0;
            h.std_runtime_s = 0.0;
            h.trials.iter_mut().for_each(|t| t.runtime_s = 0.0);
        }
        if let Some(rt) = r.runtime.as_mut() {
            for row in &mut rt.rows {
                row.median_s = 0.0;
                row.samples_s.iter_mut().for_each(|s| *s = 0.0);
                row.iterations.iter_mut().for_each(|i| *i = 0);
            }
            for s in &mut rt.slopes {
                s.slope = 0.0;
                s.intercept = 0.0;
            }
        }
        r
    }

    /// Companion CSV tables as `(file name, contents)`.
    pub fn csv_tables(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let Some(h) = &self.hit_miss {
            let rows = h.trials.iter().map(|t| {
                vec![
                    t.trial.to_string(),
                    t.seed.to_string(),
                    opt(t.estimate),
                    u8::from(t.hit).to_string(),
                    t.runtime_s.to_string(),
                    t.error.clone().unwrap_or_default().replace(',', ";"),
                ]
            });
            out.push((
                "trials.csv".into(),
                csv_table(&["trial", "seed", "estimate", "hit", "runtime_s", "error"], rows),
            ));
        }
        if let Some(rt) = &self.runtime {
            let rows = rt.rows.iter().map(|r| {
                vec![
                    r.method.to_string(),
                    r.n.to_string(),
                    r.median_s.to_string(),
                    opt(r.estimate),
                ]
            });
            out.push((
                "runtime.csv".into(),
                csv_table(&["method", "n", "median_s", "estimate"], rows),
            ));
            let rows = rt.slopes.iter().map(|s| {
                vec![s.method.to_string(), s.slope.to_string(), s.intercept.to_string()]
            });
            out.push(("slopes.csv".into(), csv_table(&["method", "slope", "intercept"], rows)));
        }
        if let Some(rc) = &self.reconstruction {
            let periods = &self.config.hidden_periods;
            let mut header = vec![
                "snr_db".to_string(),
                "seed_index".into(),
                "estimated_period".into(),
                "period_used".into(),
                "max_nondivisor_strength".into(),
            ];
            header.extend(periods.iter().map(|p| format!("corr_{p}")));
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = rc.records.iter().map(|r| {
                let mut row = vec![
                    r.snr_db.to_string(),
                    r.seed_index.to_string(),
                    opt(r.estimated_period),
                    opt(r.period_used),
                    opt(r.max_nondivisor_strength),
                ];
                row.extend(periods.iter().map(|p| opt(r.correlations.get(p))));
                row
            });
            out.push(("recon.csv".into(), csv_table(&header_refs, rows)));

            let mut header = vec!["snr_db".to_string(), "valid".into(), "mean_max_nondivisor_strength".into()];
            header.extend(periods.iter().map(|p| format!("mean_corr_{p}")));
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = rc.per_snr.iter().map(|a| {
                let mut row = vec![
                    a.snr_db.to_string(),
                    a.valid.to_string(),
                    opt(a.mean_max_nondivisor_strength),
                ];
                row.extend(periods.iter().map(|p| opt(a.mean_correlations.get(p))));
                row
            });
            out.push(("recon_summary.csv".into(), csv_table(&header_refs, rows)));
        }
        out
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn records_for(gt: &GroundTruth, method: Method, resends: usize) -> Result<Vec<Signal>> {
    let count = if method == Method::MonteCarlo { resends } else { 1 };
    (0..count as u64).map(|l| gt.resend(l)).collect()
}

fn run_estimator(
    method: Method,
    records: &[Signal],
    mc: &MonteCarloParams,
    svd: &SvdConfig,
) -> Result<PeriodEstimate> {
    match method {
        Method::Mvpf => estimate_period_mvpf(&records[0]),
        Method::Svd => estimate_period_svd_with(&records[0], svd),
        Method::MonteCarlo => estimate_period_montecarlo(records, mc),
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Repeated period estimation on fresh noise; a trial is a hit when the
/// estimate is a multiple of the composite period.
pub fn run_hit_miss(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let specs = config.check_common()?;
    config.check_length(config.n)?;
    ExperimentConfig::check_snr(config.snr_db)?;
    if config.trials < 1 {
        return Err(Error::BadConfig("trials must be at least 1".into()));
    }
    let method = config.method.unwrap_or(Method::MonteCarlo);
    let composite = config.composite_period();

    let mut trials = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        let seed = derive_seed(config.master_seed, &[TAG_HIT_MISS, t as u64]);
        let gt = GroundTruth::synthesize(&specs, config.n, config.snr_db, seed)?;
        let records = records_for(&gt, method, config.monte_carlo.resends)?;
        let mc = MonteCarloParams { seed, ..config.monte_carlo };
        let start = Instant::now();
        let result = run_estimator(method, &records, &mc, &config.svd);
        let runtime_s = start.elapsed().as_secs_f64();
        let (estimate, error) = match result {
            Ok(e) => (Some(e.period), None),
            Err(e) => (None, Some(e.to_string())),
        };
        trials.push(TrialRecord {
            trial: t,
            seed,
            estimate,
            error,
            hit: estimate.is_some_and(|p| p % composite == 0),
            runtime_s,
        });
    }
    let hits = trials.iter().filter(|t| t.hit).count();
    let times: Vec<f64> = trials.iter().map(|t| t.runtime_s).collect();
    let (mean_runtime_s, std_runtime_s) = mean_std(&times);
    let mut report = ExperimentReport::new(ExperimentKind::HitMiss, config);
    report.hit_miss = Some(HitMissSummary {
        method,
        composite_period: composite,
        hits,
        misses: trials.len() - hits,
        mean_runtime_s,
        std_runtime_s,
        trials,
    });
    Ok(report)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Wall-clock scaling of each estimator over `n_sweep`. Measurements run
/// one at a time inside a dedicated pool of `threads` workers.
pub fn run_runtime_comparison(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let specs = config.check_common()?;
    ExperimentConfig::check_snr(config.snr_db)?;
    let sweep = &config.n_sweep;
    if sweep.len() < 4 {
        return Err(Error::BadConfig("n_sweep needs at least 4 points".into()));
    }
    let (lo, hi) = (
        *sweep.iter().min().expect("non-empty"),
        *sweep.iter().max().expect("non-empty"),
    );
    if hi < 8 * lo {
        return Err(Error::BadConfig("n_sweep must span at least a factor of 8".into()));
    }
    for &n in sweep {
        config.check_length(n)?;
    }
    if config.repeats < 3 {
        return Err(Error::BadConfig("repeats must be at least 3".into()));
    }
    if config.bench_methods.is_empty() {
        return Err(Error::BadConfig("bench_methods is empty".into()));
    }
    if config.threads < 1 {
        return Err(Error::BadConfig("threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::BadConfig(e.to_string()))?;

    let mut rows = Vec::new();
    for &n in sweep {
        let seed = derive_seed(config.master_seed, &[TAG_RUNTIME, n as u64]);
        let gt = GroundTruth::synthesize(&specs, n, config.snr_db, seed)?;
        for &method in &config.bench_methods {
            let records = records_for(&gt, method, config.monte_carlo.resends)?;
            let mc = MonteCarloParams { seed, ..config.monte_carlo };
            let mut samples_s = Vec::with_capacity(config.repeats);
            let mut iterations = Vec::with_capacity(config.repeats);
            let mut estimate = None;
            for _ in 0..config.repeats {
                let (elapsed, iters, est) = pool.install(|| {
                    let start = Instant::now();
                    let mut iters = 0usize;
                    let mut est = None;
                    loop {
                        let r = run_estimator(method, &records, &mc, &config.svd);
                        iters += 1;
                        est = est.or(Some(r.ok().map(|e| e.period)));
                        if start.elapsed().as_secs_f64() >= config.min_measure_s {
                            break;
                        }
                    }
                    (start.elapsed().as_secs_f64(), iters, est.flatten())
                });
                samples_s.push(elapsed / iters as f64);
                iterations.push(iters);
                estimate = estimate.or(est);
            }
            rows.push(RuntimeRow {
                method,
                n,
                median_s: median(&samples_s),
                samples_s,
                iterations,
                estimate,
            });
        }
    }
    let slopes = config
        .bench_methods
        .iter()
        .map(|&method| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.method == method)
                .map(|r| ((r.n as f64).ln(), r.median_s.ln()))
                .unzip();
            let (slope, intercept) = linear_fit(&x, &y);
            SlopeRow { method, slope, intercept }
        })
        .collect();
    let mut report = ExperimentReport::new(ExperimentKind::Runtime, config);
    report.runtime = Some(RuntimeSummary { rows, slopes });
    Ok(report)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

fn reconstruct_once(
    gt: &GroundTruth,
    records: &[Signal],
    method: Method,
    mc: &MonteCarloParams,
    svd: &SvdConfig,
    hidden: &[usize],
) -> Result<(usize, usize, BTreeMap<usize, f64>, f64)> {
    let estimated = run_estimator(method, records, mc, svd)?.period;
    if let Some(&h) = hidden.iter().find(|&&h| estimated % h != 0) {
        return Err(Error::NotAFactor { hidden: h, period: estimated });
    }
    let dec = decompose(&records[0], estimated)?;
    let strengths = normalized_strengths(&dec)?;
    let max_nondivisor = strengths
        .iter()
        .filter(|(q, _)| hidden.iter().all(|h| h % **q != 0))
        .map(|(_, &s)| s)
        .fold(0.0, f64::max);
    let set = reconstruct_components(&dec, hidden)?;
    let correlations = set
        .components
        .iter()
        .map(|(&h, rec)| {
            let truth = &gt.components[&h].samples()[..estimated];
            (h, normalized_correlation(rec, truth))
        })
        .collect();
    Ok((estimated, estimated, correlations, max_nondivisor))
}

/// Estimate, decompose and reconstruct at every SNR of `snr_sweep`,
/// `seeds_per_snr` noise realizations each.
pub fn run_reconstruction_eval(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let specs = config.check_common()?;
    config.check_length(config.n)?;
    if config.snr_sweep.is_empty() {
        return Err(Error::BadConfig("snr_sweep is empty".into()));
    }
    for &s in &config.snr_sweep {
        ExperimentConfig::check_snr(s)?;
    }
    if config.seeds_per_snr < 1 {
        return Err(Error::BadConfig("seeds_per_snr must be at least 1".into()));
    }
    let method = config.method.unwrap_or(Method::Mvpf);
    let hidden = &config.hidden_periods;

    let mut records = Vec::new();
    let mut per_snr = Vec::new();
    for &snr in &config.snr_sweep {
        let mut group = Vec::with_capacity(config.seeds_per_snr);
        for s in 0..config.seeds_per_snr {
            let seed = derive_seed(config.master_seed, &[TAG_RECON, snr.to_bits(), s as u64]);
            let gt = GroundTruth::synthesize(&specs, config.n, snr, seed)?;
            let signals = records_for(&gt, method, config.monte_carlo.resends)?;
            let mc = MonteCarloParams { seed, ..config.monte_carlo };
            let mut rec = ReconRecord {
                snr_db: snr,
                seed_index: s,
                seed,
                estimated_period: None,
                period_used: None,
                correlations: BTreeMap::new(),
                max_nondivisor_strength: None,
                error: None,
            };
            match reconstruct_once(&gt, &signals, method, &mc, &config.svd, hidden) {
                Ok((est, used, corr, strength)) => {
                    rec.estimated_period = Some(est);
                    rec.period_used = Some(used);
                    rec.correlations = corr;
                    rec.max_nondivisor_strength = Some(strength);
                }
                Err(e) => {
                    if let Error::NotAFactor { period, .. } = e {
                        rec.estimated_period = Some(period);
                    }
                    rec.error = Some(e.to_string());
                }
            }
            group.push(rec);
        }
        let valid: Vec<&ReconRecord> = group.iter().filter(|r| r.error.is_none()).collect();
        let mean_correlations = hidden
            .iter()
            .filter(|_| !valid.is_empty())
            .map(|h| {
                let sum: f64 = valid.iter().map(|r| r.correlations[h]).sum();
                (*h, sum / valid.len() as f64)
            })
            .collect();
        let mean_max_nondivisor_strength = (!valid.is_empty()).then(|| {
            valid
                .iter()
                .filter_map(|r| r.max_nondivisor_strength)
                .sum::<f64>()
                / valid.len() as f64
        });
        per_snr.push(ReconAggregate {
            snr_db: snr,
            valid: valid.len(),
            mean_correlations,
            mean_max_nondivisor_strength,
        });
        records.extend(group);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = per_snr
        .iter()
        .filter_map(|a| a.mean_max_nondivisor_strength.map(|s| (a.snr_db, s)))
        .unzip();
    let mut report = ExperimentReport::new(ExperimentKind::Reconstruction, config);
    report.reconstruction = Some(ReconSummary {
        method,
        composite_period: config.composite_period(),
        records,
        per_snr,
        strength_snr_spearman: spearman(&x, &y),
    });
    Ok(report)
}
