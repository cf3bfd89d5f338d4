//! Synthetic periodic test signals, composition and SNR-calibrated noise.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A finite, non-empty sequence of real samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooShort { len: 0, min: 1 });
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::BadParams(format!("sample {i} is not finite")));
        }
        Ok(Signal(samples))
    }

    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mean-square power.
    pub fn power(&self) -> f64 {
        mean_square(&self.0)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn scaled(&self, s: f64) -> Result<Signal> {
        Signal::new(self.0.iter().map(|x| x * s).collect())
    }

    pub fn offset(&self, c: f64) -> Result<Signal> {
        Signal::new(self.0.iter().map(|x| x + c).collect())
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        check_len(self.len(), other.len())?;
        Signal::new(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl AsRef<[f64]> for Signal {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Uncentered normalized correlation `⟨a,b⟩ / (‖a‖‖b‖)`.
///
/// Returns 0 when either vector is zero.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    #[serde(alias = "tri", alias = "triangular")]
    Triangle,
    #[serde(alias = "cos")]
    Cosine,
    #[serde(alias = "rand", alias = "random")]
    Pattern,
}

impl FromStr for Waveform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tri" | "triangle" | "triangular" => Ok(Waveform::Triangle),
            "cos" | "cosine" => Ok(Waveform::Cosine),
            "rand" | "random" | "pattern" => Ok(Waveform::Pattern),
            other => Err(Error::BadParams(format!("unknown waveform `{other}`"))),
        }
    }
}

impl fmt::Display for Waveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Waveform::Triangle => "tri",
            Waveform::Cosine => "cos",
            Waveform::Pattern => "rand",
        })
    }
}

fn check_gen(period: usize, amplitude: f64, len: usize) -> Result<()> {
    if period < 2 {
        return Err(Error::BadParams(format!("period must be at least 2, got {period}")));
    }
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(Error::BadParams(format!("amplitude must be positive, got {amplitude}")));
    }
    if len < period {
        return Err(Error::BadParams(format!(
            "length {len} is shorter than the period {period}"
        )));
    }
    Ok(())
}

fn tile(template: &[f64], len: usize) -> Result<Signal> {
    Signal::new(template.iter().copied().cycle().take(len).collect())
}

fn remove_mean(template: &mut [f64]) {
    let mean = template.iter().sum::<f64>() / template.len() as f64;
    template.iter_mut().for_each(|x| *x -= mean);
}

/// One period of the mean-zero triangle: linear ramp from 0 up to
/// `amplitude` at `⌊period/2⌋` and back down.
pub fn triangle_template(period: usize, amplitude: f64) -> Vec<f64> {
    let half = (period / 2) as f64;
    let mut t: Vec<f64> = (0..period)
        .map(|n| amplitude * n.min(period - n) as f64 / half)
        .collect();
    remove_mean(&mut t);
    t
}

pub fn cosine_template(period: usize, amplitude: f64) -> Vec<f64> {
    (0..period)
        .map(|n| amplitude * (2.0 * PI * n as f64 / period as f64).cos())
        .collect()
}

/// Uniform draws on `[-amplitude, amplitude)`, mean removed.
pub fn pattern_template(period: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, &[period as u64]);
    let mut t: Vec<f64> = (0..period)
        .map(|_| amplitude * rng.random_range(-1.0..1.0))
        .collect();
    remove_mean(&mut t);
    t
}

pub fn gen_triangular(period: usize, amplitude: f64, len: usize) -> Result<Signal> {
    check_gen(period, amplitude, len)?;
    tile(&triangle_template(period, amplitude), len)
}

pub fn gen_cosine(period: usize, amplitude: f64, len: usize) -> Result<Signal> {
    check_gen(period, amplitude, len)?;
    tile(&cosine_template(period, amplitude), len)
}

pub fn gen_random_pattern(period: usize, len: usize, seed: u64) -> Result<Signal> {
    check_gen(period, 1.0, len)?;
    tile(&pattern_template(period, 1.0, seed), len)
}

/// Elementwise sum of equal-length signals.
pub fn compose(components: &[Signal]) -> Result<Signal> {
    let first = components
        .first()
        .ok_or_else(|| Error::BadParams("compose needs at least one component".into()))?;
    let mut acc = first.samples().to_vec();
    for c in &components[1..] {
        check_len(acc.len(), c.len())?;
        acc.iter_mut().zip(c.samples()).for_each(|(a, b)| *a += b);
    }
    Signal::new(acc)
}

/// Adds i.i.d. zero-mean Gaussian noise whose variance puts the target
/// SNR (mean-square convention) at `snr_db`. `+∞` returns `clean` as is.
pub fn add_noise_snr(clean: &Signal, snr_db: f64, seed: u64) -> Result<Signal> {
    if snr_db == f64::INFINITY {
        return Ok(clean.clone());
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::BadParams(format!("snr_db must be finite or +inf, got {snr_db}")));
    }
    let power = clean.power();
    if power == 0.0 {
        return Err(Error::ZeroPowerSignal);
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = rng::stream(seed, &[]);
    Signal::new(
        clean
            .samples()
            .iter()
            .map(|x| {
                let w: f64 = rng.sample(StandardNormal);
                x + sigma * w
            })
            .collect(),
    )
}

/// Realized SNR in dB: `10·log10(Σclean² / Σ(noisy − clean)²)`.
pub fn measure_snr(clean: &Signal, noisy: &Signal) -> Result<f64> {
    check_len(clean.len(), noisy.len())?;
    let signal: f64 = clean.samples().iter().map(|x| x * x).sum();
    let noise: f64 = clean
        .samples()
        .iter()
        .zip(noisy.samples())
        .map(|(c, n)| (n - c) * (n - c))
        .sum();
    if noise == 0.0 {
        return Err(Error::ZeroNoise);
    }
    Ok(10.0 * (signal / noise).log10())
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

pub fn lcm_all(periods: &[usize]) -> usize {
    periods.iter().copied().fold(1, lcm)
}

/// One hidden component of a synthetic composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub period: usize,
    pub wave: Waveform,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl ComponentSpec {
    pub fn new(period: usize, wave: Waveform, amplitude: f64) -> Self {
        ComponentSpec { period, wave, amplitude }
    }

    /// One period of this component. `seed` only matters for
    /// [`Waveform::Pattern`].
    pub fn template(&self, seed: u64) -> Result<Vec<f64>> {
        check_gen(self.period, self.amplitude, self.period)?;
        Ok(match self.wave {
            Waveform::Triangle => triangle_template(self.period, self.amplitude),
            Waveform::Cosine => cosine_template(self.period, self.amplitude),
            Waveform::Pattern => pattern_template(self.period, self.amplitude, seed),
        })
    }
}

/// A synthesized composite together with everything needed to score an
/// estimator or a reconstruction against it.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub specs: Vec<ComponentSpec>,
    /// Full-length tiling of each component, keyed by period.
    pub components: BTreeMap<usize, Signal>,
    pub clean: Signal,
    pub noisy: Signal,
    pub snr_db: f64,
    pub seed: u64,
}

impl GroundTruth {
    /// Builds the clean composite of `specs` at length `len` and one noisy
    /// observation of it. Pattern templates are drawn from `seed`; the noise
    /// uses a stream derived from `seed` as well.
    pub fn synthesize(specs: &[ComponentSpec], len: usize, snr_db: f64, seed: u64) -> Result<Self> {
        let clean_parts = Self::clean_components(specs, len, seed)?;
        let clean = compose(&clean_parts.values().cloned().collect::<Vec<_>>())?;
        let noisy = add_noise_snr(&clean, snr_db, rng::derive_seed(seed, &[NOISE_STREAM]))?;
        Ok(GroundTruth {
            specs: specs.to_vec(),
            components: clean_parts,
            clean,
            noisy,
            snr_db,
            seed,
        })
    }

    fn clean_components(
        specs: &[ComponentSpec],
        len: usize,
        seed: u64,
    ) -> Result<BTreeMap<usize, Signal>> {
        if specs.is_empty() {
            return Err(Error::BadParams("at least one component is required".into()));
        }
        let mut out = BTreeMap::new();
        for spec in specs {
            if len < spec.period {
                return Err(Error::BadParams(format!(
                    "length {len} is shorter than the period {}",
                    spec.period
                )));
            }
            let t = spec.template(seed)?;
            if out.insert(spec.period, tile(&t, len)?).is_some() {
                return Err(Error::BadParams(format!("duplicate period {}", spec.period)));
            }
        }
        Ok(out)
    }

    /// A further independent noisy observation of the same clean signal.
    pub fn resend(&self, index: u64) -> Result<Signal> {
        if index == 0 {
            return Ok(self.noisy.clone());
        }
        add_noise_snr(
            &self.clean,
            self.snr_db,
            rng::derive_seed(self.seed, &[NOISE_STREAM, index]),
        )
    }

    pub fn periods(&self) -> Vec<usize> {
        self.components.keys().copied().collect()
    }

    pub fn composite_period(&self) -> usize {
        lcm_all(&self.periods())
    }
}

const NOISE_STREAM: u64 = 0x4E01_5E;

#[cfg(test)]
mod tests {
    use super::*;

    fn is_periodic(x: &[f64], p: usize) -> bool {
        (0..x.len() - p).all(|n| x[n + p] == x[n])
    }

    #[test]
    fn triangle_period_two_is_mean_zero_step() {
        let s = gen_triangular(2, 1.0, 6).unwrap();
        assert_eq!(s.samples(), &[-0.5, 0.5, -0.5, 0.5, -0.5, 0.5]);
    }

    #[test]
    fn triangle_period_eight() {
        let s = gen_triangular(8, 1.0, 4119).unwrap();
        assert!(is_periodic(s.samples(), 8));
        let t = triangle_template(8, 1.0);
        assert!(t.iter().sum::<f64>().abs() <= 1e-12);
        // peak at index 4
        let argmax = (0..8).max_by(|&a, &b| t[a].total_cmp(&t[b])).unwrap();
        assert_eq!(argmax, 4);
    }

    #[test]
    fn even_triangle_is_half_wave_antisymmetric() {
        for p in [2usize, 8, 16, 24] {
            let t = triangle_template(p, 1.0);
            for n in 0..p / 2 {
                assert!((t[n] + t[n + p / 2]).abs() < 1e-12, "p={p} n={n}");
            }
        }
    }

    #[test]
    fn cosine_period_four() {
        let s = gen_cosine(4, 2.0, 8).unwrap();
        let expect = [2.0, 0.0, -2.0, 0.0, 2.0, 0.0, -2.0, 0.0];
        for (a, b) in s.samples().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let t = cosine_template(11, 1.0);
        assert!(t.iter().sum::<f64>().abs() <= 1e-12);
        assert!(is_periodic(gen_cosine(11, 1.0, 4119).unwrap().samples(), 11));
    }

    #[test]
    fn random_pattern_is_deterministic_and_periodic() {
        let a = gen_random_pattern(13, 200, 3).unwrap();
        let b = gen_random_pattern(13, 200, 3).unwrap();
        let c = gen_random_pattern(13, 200, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(is_periodic(a.samples(), 13));
    }

    #[test]
    fn generator_errors() {
        assert!(matches!(gen_triangular(1, 1.0, 10), Err(Error::BadParams(_))));
        assert!(matches!(gen_cosine(4, 0.0, 10), Err(Error::BadParams(_))));
        assert!(matches!(gen_random_pattern(8, 4, 0), Err(Error::BadParams(_))));
    }

    #[test]
    fn compose_errors_and_identity() {
        let a = gen_cosine(4, 1.0, 8).unwrap();
        assert_eq!(compose(std::slice::from_ref(&a)).unwrap(), a);
        let b = gen_cosine(4, 1.0, 9).unwrap();
        assert!(matches!(compose(&[a, b]), Err(Error::LengthMismatch { .. })));
        assert!(compose(&[]).is_err());
    }

    #[test]
    fn infinite_snr_is_identity() {
        let a = gen_cosine(4, 1.0, 8).unwrap();
        assert_eq!(add_noise_snr(&a, f64::INFINITY, 1).unwrap(), a);
        let z = Signal::new(vec![0.0; 8]).unwrap();
        assert_eq!(add_noise_snr(&z, 10.0, 1), Err(Error::ZeroPowerSignal));
    }

    #[test]
    fn noise_hits_target_snr() {
        let clean = compose(&[
            gen_triangular(8, 1.0, 4119).unwrap(),
            gen_cosine(11, 1.0, 4119).unwrap(),
            gen_triangular(16, 1.0, 4119).unwrap(),
        ])
        .unwrap();
        for (snr, seed) in [(32.0, 1u64), (14.56, 2), (7.39, 3)] {
            let noisy = add_noise_snr(&clean, snr, seed).unwrap();
            let got = measure_snr(&clean, &noisy).unwrap();
            assert!((got - snr).abs() <= 0.5, "target {snr} got {got}");
        }
        let a = add_noise_snr(&clean, 10.0, 5).unwrap();
        assert_eq!(a, add_noise_snr(&clean, 10.0, 5).unwrap());
        assert_ne!(a, add_noise_snr(&clean, 10.0, 6).unwrap());
    }

    #[test]
    fn measure_snr_definition() {
        let clean = Signal::new(vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let doubled = Signal::new(vec![2.0, -2.0, 2.0, -2.0]).unwrap();
        assert!(measure_snr(&clean, &doubled).unwrap().abs() < 1e-12);
        let k = 0.1f64.sqrt();
        let tenth = Signal::new(vec![1.0 + k, -1.0 + k, 1.0 + k, -1.0 + k]).unwrap();
        assert!((measure_snr(&clean, &tenth).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(measure_snr(&clean, &clean), Err(Error::ZeroNoise));
        let short = Signal::new(vec![1.0]).unwrap();
        assert!(matches!(measure_snr(&clean, &short), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn ground_truth_components_sum_to_clean() {
        let specs = [
            ComponentSpec::new(8, Waveform::Triangle, 1.0),
            ComponentSpec::new(11, Waveform::Cosine, 1.0),
            ComponentSpec::new(16, Waveform::Triangle, 1.0),
        ];
        let gt = GroundTruth::synthesize(&specs, 4119, 32.0, 1).unwrap();
        assert_eq!(gt.composite_period(), 176);
        for c in gt.components.values() {
            let whole = c.len() / 176 * 176;
            let mean = c.samples()[..whole].iter().sum::<f64>() / whole as f64;
            assert!(mean.abs() <= 1e-12);
        }
        let sum = compose(&gt.components.values().cloned().collect::<Vec<_>>()).unwrap();
        assert_eq!(sum, gt.clean);
        assert_ne!(gt.resend(1).unwrap(), gt.noisy);
        assert_eq!(gt.resend(0).unwrap(), gt.noisy);
    }

    #[test]
    fn signal_rejects_non_finite() {
        assert!(Signal::new(vec![1.0, f64::NAN]).is_err());
        assert!(Signal::new(vec![]).is_err());
    }
}
