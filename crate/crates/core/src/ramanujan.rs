//! Ramanujan sums, the integer Ramanujan basis of `R^p`, projection of a
//! folded signal onto the subspaces `S_q` (`q | p`), and reconstruction of
//! hidden components with the DC level shared equally between them.
//!
//! For a period `p` the subspaces `S_q`, one per divisor `q`, have
//! dimension `φ(q)`, are mutually orthogonal, and together span `R^p`.
//! `S_q` is spanned by the first `φ(q)` circular shifts of the
//! `p`-periodic extension of `c_q(n)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::signal::{gcd, Signal};

/// Prime factorization by trial division, as `(prime, exponent)` pairs.
fn factorize(mut n: usize) -> Vec<(usize, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Euler's totient `φ(q)`.
pub fn euler_totient(q: usize) -> usize {
    assert!(q >= 1, "totient of 0 is undefined");
    factorize(q)
        .into_iter()
        .fold(q, |acc, (prime, _)| acc / prime * (prime - 1))
}

/// Möbius function `μ(q)`.
pub fn mobius(q: usize) -> i64 {
    assert!(q >= 1, "mobius of 0 is undefined");
    let f = factorize(q);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// All divisors of `p` in ascending order.
pub fn divisors(p: usize) -> Vec<usize> {
    assert!(p >= 1, "divisors of 0 are undefined");
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut d = 1;
    while d * d <= p {
        if p % d == 0 {
            low.push(d);
            if d * d != p {
                high.push(p / d);
            }
        }
        d += 1;
    }
    low.extend(high.into_iter().rev());
    low
}

/// `c_q(n) = μ(q/g)·φ(q)/φ(q/g)` with `g = gcd(q, n)`.
pub fn ramanujan_sum(q: usize, n: i64) -> i64 {
    assert!(q >= 1, "c_0 is undefined");
    let r = n.rem_euclid(q as i64) as usize;
    let g = gcd(q, r);
    let k = q / g;
    mobius(k) * (euler_totient(q) / euler_totient(k)) as i64
}

/// Contiguous group of basis columns spanning one `S_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub q: usize,
    pub start: usize,
    pub width: usize,
}

/// The `p × p` integer Ramanujan basis, columns grouped by divisor.
#[derive(Debug, Clone, PartialEq)]
pub struct RamanujanBasis {
    period: usize,
    divisors: Vec<usize>,
    /// Column-major `p × p`.
    entries: Vec<i64>,
    blocks: BTreeMap<usize, Block>,
}

impl RamanujanBasis {
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn divisors(&self) -> &[usize] {
        &self.divisors
    }

    pub fn entry(&self, row: usize, col: usize) -> i64 {
        self.entries[col * self.period + row]
    }

    pub fn column(&self, col: usize) -> &[i64] {
        &self.entries[col * self.period..(col + 1) * self.period]
    }

    pub fn block(&self, q: usize) -> Option<Block> {
        self.blocks.get(&q).copied()
    }

    pub fn blocks(&self) -> impl Iterator<Item = Block> + '_ {
        self.blocks.values().copied()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let p = self.period;
        DMatrix::from_iterator(p, p, self.entries.iter().map(|&v| v as f64))
    }

    /// Exact rank over the rationals, bounded from below by Gaussian
    /// elimination modulo large primes. Full rank modulo any prime implies
    /// full rank over `Q`.
    pub fn rank(&self) -> usize {
        const PRIMES: [u64; 3] = [(1 << 61) - 1, 1_000_000_007, 998_244_353];
        let mut best = 0;
        for prime in PRIMES {
            best = best.max(rank_mod(&self.entries, self.period, prime));
            if best == self.period {
                break;
            }
        }
        best
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn rank_mod(col_major: &[i64], n: usize, prime: u64) -> usize {
    let to_field = |v: i64| v.rem_euclid(prime as i64) as u64;
    let mut rows: Vec<Vec<u64>> = (0..n)
        .map(|r| (0..n).map(|c| to_field(col_major[c * n + r])).collect())
        .collect();
    let mut rank = 0;
    for col in 0..n {
        let Some(pivot) = (rank..n).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = pow_mod(rows[rank][col], prime - 2, prime);
        for r in 0..n {
            if r == rank || rows[r][col] == 0 {
                continue;
            }
            let factor = mul_mod(rows[r][col], inv, prime);
            for c in col..n {
                let sub = mul_mod(factor, rows[rank][c], prime);
                rows[r][c] = (rows[r][c] + prime - sub) % prime;
            }
        }
        rank += 1;
    }
    rank
}

/// Builds the Ramanujan basis for period `p`.
///
/// Column `j` of block `q` is `n ↦ c_q(n − j)`, for `j = 0..φ(q)`.
pub fn build_basis(p: usize) -> RamanujanBasis {
    assert!(p >= 1, "period must be positive");
    let divs = divisors(p);
    let mut entries = Vec::with_capacity(p * p);
    let mut blocks = BTreeMap::new();
    let mut start = 0;
    for &q in &divs {
        let cq: Vec<i64> = (0..q as i64).map(|n| ramanujan_sum(q, n)).collect();
        let width = euler_totient(q);
        for shift in 0..width {
            entries.extend((0..p).map(|n| cq[(n + q * p - shift) % q]));
        }
        blocks.insert(q, Block { q, start, width });
        start += width;
    }
    debug_assert_eq!(start, p);
    RamanujanBasis { period: p, divisors: divs, entries, blocks }
}

/// Projection of a folded signal onto every `S_q`, `q | p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub period: usize,
    /// Mean of the `⌊N/p⌋` consecutive length-`p` blocks.
    pub folded: Vec<f64>,
    pub projections: BTreeMap<usize, Vec<f64>>,
    pub energies: BTreeMap<usize, f64>,
    /// Constant level of the `S_1` projection.
    pub dc_value: f64,
}

impl Decomposition {
    pub fn total_energy(&self) -> f64 {
        self.energies.values().sum()
    }
}

/// Averages the `⌊N/p⌋` leading blocks of length `p`.
pub fn fold(signal: &Signal, p: usize) -> Result<Vec<f64>> {
    let n = signal.len();
    if p == 0 || n < p {
        return Err(Error::InsufficientData { len: n, period: p });
    }
    let blocks = n / p;
    let mut folded = vec![0.0; p];
    for chunk in signal.samples()[..blocks * p].chunks_exact(p) {
        folded.iter_mut().zip(chunk).for_each(|(f, x)| *f += x);
    }
    folded.iter_mut().for_each(|f| *f /= blocks as f64);
    Ok(folded)
}

/// Folds `signal` at period `p` and solves `basis · a = folded` densely.
pub fn decompose(signal: &Signal, p: usize) -> Result<Decomposition> {
    let folded = fold(signal, p)?;
    let basis = build_basis(p);
    let coeffs = basis
        .to_matrix()
        .lu()
        .solve(&DVector::from_column_slice(&folded))
        .ok_or_else(|| Error::BadParams(format!("Ramanujan basis for p={p} is singular")))?;

    let mut projections = BTreeMap::new();
    let mut energies = BTreeMap::new();
    for block in basis.blocks() {
        let mut x = vec![0.0; p];
        for j in 0..block.width {
            let a = coeffs[block.start + j];
            for (xi, &b) in x.iter_mut().zip(basis.column(block.start + j)) {
                *xi += a * b as f64;
            }
        }
        energies.insert(block.q, x.iter().map(|v| v * v).sum());
        projections.insert(block.q, x);
    }
    let dc_value = projections[&1][0];
    Ok(Decomposition { period: p, folded, projections, energies, dc_value })
}

/// Energy share of every subspace; sums to one.
pub fn normalized_strengths(dec: &Decomposition) -> Result<BTreeMap<usize, f64>> {
    let total = dec.total_energy();
    if !(total > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    Ok(dec.energies.iter().map(|(&q, &e)| (q, e / total)).collect())
}

/// Hidden components rendered over one full period `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    pub components: BTreeMap<usize, Vec<f64>>,
    pub alphas: BTreeMap<usize, f64>,
    pub dc_value: f64,
}

impl ComponentSet {
    /// Sum of all components.
    pub fn total(&self) -> Vec<f64> {
        let len = self.components.values().next().map_or(0, Vec::len);
        let mut acc = vec![0.0; len];
        for c in self.components.values() {
            acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        acc
    }
}

/// Maps each divisor `q > 1` of `period` to the smallest hidden period it
/// divides. Divisors that divide none of them are left out.
pub fn assign_divisors(period: usize, hidden: &[usize]) -> BTreeMap<usize, usize> {
    let mut sorted = hidden.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    divisors(period)
        .into_iter()
        .filter(|&q| q > 1)
        .filter_map(|q| sorted.iter().find(|&&h| h % q == 0).map(|&h| (q, h)))
        .collect()
}

/// Sums the projections that belong to each hidden period and shares the
/// DC level equally between the resulting components.
pub fn reconstruct_components(dec: &Decomposition, hidden: &[usize]) -> Result<ComponentSet> {
    if hidden.is_empty() {
        return Err(Error::NoComponents);
    }
    for &h in hidden {
        if h < 2 {
            return Err(Error::BadParams(format!("hidden period must be at least 2, got {h}")));
        }
        if dec.period % h != 0 {
            return Err(Error::NotAFactor { hidden: h, period: dec.period });
        }
    }
    let mut raw: BTreeMap<usize, Vec<f64>> =
        hidden.iter().map(|&h| (h, vec![0.0; dec.period])).collect();
    for (q, h) in assign_divisors(dec.period, hidden) {
        let target = raw.get_mut(&h).expect("assigned period is listed");
        target.iter_mut().zip(&dec.projections[&q]).for_each(|(t, x)| *t += x);
    }
    redistribute_dc(raw, dec.dc_value)
}

/// Adds `d / k` to each of the `k` zero-mean components.
pub fn redistribute_dc(raw: BTreeMap<usize, Vec<f64>>, d: f64) -> Result<ComponentSet> {
    if raw.is_empty() {
        return Err(Error::NoComponents);
    }
    let alpha = 1.0 / raw.len() as f64;
    let alphas = raw.keys().map(|&k| (k, alpha)).collect();
    let components = raw
        .into_iter()
        .map(|(k, mut v)| {
            v.iter_mut().for_each(|x| *x += alpha * d);
            (k, v)
        })
        .collect();
    Ok(ComponentSet { components, alphas, dc_value: d })
}
