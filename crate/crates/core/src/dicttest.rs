//! The k-query dictatorship test built from a vanishing distribution.
//!
//! Each atom's distribution `η` is mixed with uniform noise,
//! `μ = (1-ε)η + εU_k`; `n` independent columns are drawn from `μ`, row `i`
//! is fed to `f_i`, and the test accepts with probability equal to the
//! multilinear extension of `P` at `(f_1(X_1), …, f_k(X_k))`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::{coord, negate, VertexSet};
use crate::distribution::{CorrelationMatrix, Distribution};
use crate::error::{Error, Result};
use crate::gaussian::isserlis;
use crate::multigraph::perfect_matchings;
use crate::predicate::{multilinear, walsh_hadamard_f64, Predicate};
use crate::rng::{mc_mean, Estimate, Rng};
use crate::scalar::{format_rational, Scalar};
use crate::vanishing::VanishingCertificate;

/// Largest `n` for tabulated functions and Fourier analysis.
pub const MAX_TABLE_N: usize = 20;
/// Largest `n` for lazily evaluated dictators and majorities.
pub const MAX_SAMPLED_N: usize = 30;
/// Exact-mode caps.
pub const EXACT_MAX_N: usize = 5;
pub const EXACT_MAX_SUPPORT: usize = 16;

#[derive(Clone, Debug)]
enum Kind {
    Dictator(usize),
    Majority,
    /// Full value table over `{-1,1}^n`.
    Table(Vec<f64>),
    /// Values on points with coordinate `n-1` equal to `+1`; extended oddly.
    Folded(Vec<f64>),
}

/// A function `{-1,1}^n → [-1,1]`, evaluated at point indices (bit `c` set
/// means coordinate `c` is `-1`).
#[derive(Clone, Debug)]
pub struct FunctionOracle {
    n: usize,
    kind: Kind,
    label: String,
}

impl FunctionOracle {
    pub fn from_table(n: usize, values: Vec<f64>) -> Result<Self> {
        check_table_n(n)?;
        if values.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::ShapeMismatch(format!("function value {v} outside [-1,1]")));
        }
        Ok(FunctionOracle { n, kind: Kind::Table(values), label: format!("table:{n}") })
    }

    /// Odd function given by its values on representatives (coordinate `n-1`
    /// equal to `+1`, i.e. indices below `2^(n-1)`).
    pub fn from_representatives(n: usize, reps: Vec<f64>) -> Result<Self> {
        check_table_n(n)?;
        if n == 0 {
            return Err(Error::ShapeMismatch("odd functions need n >= 1".into()));
        }
        if reps.len() != 1 << (n - 1) {
            return Err(Error::DimensionMismatch { expected: 1 << (n - 1), got: reps.len() });
        }
        if let Some(v) = reps.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::ShapeMismatch(format!("function value {v} outside [-1,1]")));
        }
        Ok(FunctionOracle { n, kind: Kind::Folded(reps), label: format!("folded:{n}") })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn with_label(mut self, label: String) -> Self {
        self.label = label;
        self
    }

    pub fn eval(&self, x: u32) -> f64 {
        match &self.kind {
            Kind::Dictator(j) => coord(x, *j) as f64,
            Kind::Majority => {
                if (x.count_ones() as usize) * 2 > self.n { -1.0 } else { 1.0 }
            }
            Kind::Table(t) => t[x as usize],
            Kind::Folded(r) => {
                if x >> (self.n - 1) & 1 == 0 {
                    r[x as usize]
                } else {
                    -r[negate(x, self.n) as usize]
                }
            }
        }
    }

    pub fn is_odd(&self) -> bool {
        match &self.kind {
            Kind::Dictator(_) | Kind::Majority | Kind::Folded(_) => true,
            Kind::Table(t) => (0..t.len() as u32).all(|x| t[x as usize] == -t[negate(x, self.n) as usize]),
        }
    }

    pub fn table(&self) -> Result<Vec<f64>> {
        check_table_n(self.n)?;
        Ok((0..1u32 << self.n).map(|x| self.eval(x)).collect())
    }

    /// Fourier coefficients indexed by subset mask.
    pub fn fourier(&self) -> Result<Vec<f64>> {
        let mut t = self.table()?;
        walsh_hadamard_f64(&mut t);
        let scale = (1u64 << self.n) as f64;
        t.iter_mut().for_each(|v| *v /= scale);
        Ok(t)
    }

    /// `Inf_j(f) = Σ_{T∋j} f̂(T)²`.
    pub fn influence(&self, j: usize) -> Result<f64> {
        self.low_degree_influence(j, self.n)
    }

    /// `Inf_j(f^{≤d})`.
    pub fn low_degree_influence(&self, j: usize, d: usize) -> Result<f64> {
        let f = self.fourier()?;
        Ok(f.iter()
            .enumerate()
            .filter(|(t, _)| t >> j & 1 == 1 && t.count_ones() as usize <= d)
            .map(|(_, c)| c * c)
            .sum())
    }

    pub fn max_influence(&self) -> Result<f64> {
        let f = self.fourier()?;
        Ok((0..self.n)
            .map(|j| f.iter().enumerate().filter(|(t, _)| t >> j & 1 == 1).map(|(_, c)| c * c).sum())
            .fold(0.0, f64::max))
    }

    /// `c · f` for `|c| ≤ 1`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&c) {
            return Err(Error::ShapeMismatch(format!("scale {c} outside [-1,1]")));
        }
        let reps: Vec<f64> = (0..1u32 << (self.n - 1)).map(|x| c * self.eval(x)).collect();
        let label = format!("scaled:{c}:{}", self.label);
        if self.is_odd() {
            Ok(Self::from_representatives(self.n, reps)?.with_label(label))
        } else {
            Ok(Self::from_table(self.n, self.table()?.iter().map(|v| c * v).collect())?.with_label(label))
        }
    }
}

fn check_table_n(n: usize) -> Result<()> {
    if n > MAX_TABLE_N {
        return Err(Error::CapExceeded { what: "function arity n", got: n, cap: MAX_TABLE_N });
    }
    Ok(())
}

pub fn make_dictator(n: usize, j: usize) -> Result<FunctionOracle> {
    if n > MAX_SAMPLED_N || j >= n {
        return Err(Error::ShapeMismatch(format!("dictator {j} on {n} coordinates")));
    }
    Ok(FunctionOracle { n, kind: Kind::Dictator(j), label: format!("dictator:{n}:{j}") })
}

pub fn make_majority(n: usize) -> Result<FunctionOracle> {
    if n % 2 == 0 {
        return Err(Error::EvenMajority(n));
    }
    if n > MAX_SAMPLED_N {
        return Err(Error::CapExceeded { what: "function arity n", got: n, cap: MAX_SAMPLED_N });
    }
    Ok(FunctionOracle { n, kind: Kind::Majority, label: format!("majority:{n}") })
}

/// Uniformly random odd ±1 function.
pub fn make_random_odd(n: usize, rng: &mut Rng) -> Result<FunctionOracle> {
    check_table_n(n)?;
    let reps = (0..1usize << n.saturating_sub(1)).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    Ok(FunctionOracle::from_representatives(n, reps)?.with_label(format!("random-odd:{n}")))
}

/// Random odd polynomial of degree at most 3 with unit coefficient norm,
/// clipped to `[-1,1]` (clipping preserves oddness).
pub fn make_poly3(n: usize, rng: &mut Rng) -> Result<FunctionOracle> {
    check_table_n(n)?;
    let sets: Vec<u32> = (1..1u32 << n).filter(|t| matches!(t.count_ones(), 1 | 3)).collect();
    let coefs: Vec<f64> = sets.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = coefs.iter().map(|c| c * c).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let reps = (0..1u32 << (n - 1))
        .map(|x| {
            let v: f64 = sets
                .iter()
                .zip(&coefs)
                .map(|(&t, c)| c / norm * crate::bits::chi(t, x) as f64)
                .sum();
            v.clamp(-1.0, 1.0)
        })
        .collect();
    Ok(FunctionOracle::from_representatives(n, reps)?.with_label(format!("poly3:{n}")))
}

/// `(1-noise)·x_j + noise·r(x)` with `r` a random odd ±1 function.
pub fn make_noisy_dictator(n: usize, j: usize, noise: f64, rng: &mut Rng) -> Result<FunctionOracle> {
    if j >= n || !(0.0..=1.0).contains(&noise) {
        return Err(Error::ShapeMismatch(format!("noisy dictator {j} on {n} with noise {noise}")));
    }
    let r = make_random_odd(n, rng)?;
    let reps = (0..1u32 << (n - 1))
        .map(|x| (1.0 - noise) * coord(x, j) as f64 + noise * r.eval(x))
        .collect();
    Ok(FunctionOracle::from_representatives(n, reps)?.with_label(format!("noisy-dictator:{n}:{j}:{noise}")))
}

/// Antisymmetrisation `f'(x) = (f(x) - f(-x))/2`.
pub fn fold(f: &FunctionOracle) -> Result<FunctionOracle> {
    check_table_n(f.n)?;
    let reps = (0..1u32 << (f.n - 1))
        .map(|x| (f.eval(x) - f.eval(negate(x, f.n))) / 2.0)
        .collect();
    Ok(FunctionOracle::from_representatives(f.n, reps)?.with_label(format!("fold:{}", f.label)))
}

/// Folding by representatives: keep `f` where coordinate `n-1` is `+1` and
/// extend oddly. Agrees with `f` whenever `f` is already odd.
pub fn fold_representatives(f: &FunctionOracle) -> Result<FunctionOracle> {
    check_table_n(f.n)?;
    let reps = (0..1u32 << (f.n - 1)).map(|x| f.eval(x)).collect();
    Ok(FunctionOracle::from_representatives(f.n, reps)?.with_label(format!("folded:{}", f.label)))
}

/// Parses a comma-separated list such as `dictator:4:0,majority:5,random-odd:5:7`.
///
/// Forms: `dictator:n:j`, `majority:n`, `scaled-majority:n:c`,
/// `random-odd:n[:seed]`, `poly3:n[:seed]`, `noisy-dictator:n:j:noise[:seed]`.
/// Random kinds without an explicit seed draw from stream `base_stream + i`.
pub fn parse_function_specs(spec: &str, seed: u64, base_stream: u64) -> Result<Vec<FunctionOracle>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, item)| {
            let parts: Vec<&str> = item.split(':').collect();
            let bad = || Error::Parse(format!("bad function spec {item:?}"));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let rng_for = |extra: Option<&&str>| -> Result<Rng> {
                Ok(match extra {
                    Some(s) => crate::rng::stream(s.parse::<u64>().map_err(|_| bad())?, 0),
                    None => crate::rng::stream(seed, base_stream + i as u64),
                })
            };
            match parts.as_slice() {
                ["dictator", n, j] => make_dictator(int(n)?, int(j)?),
                ["majority", n] => make_majority(int(n)?),
                ["scaled-majority", n, c] => make_majority(int(n)?)?.scaled(real(c)?),
                ["random-odd", n, rest @ ..] if rest.len() <= 1 => make_random_odd(int(n)?, &mut rng_for(rest.first())?),
                ["poly3", n, rest @ ..] if rest.len() <= 1 => make_poly3(int(n)?, &mut rng_for(rest.first())?),
                ["noisy-dictator", n, j, noise, rest @ ..] if rest.len() <= 1 => {
                    make_noisy_dictator(int(n)?, int(j)?, real(noise)?, &mut rng_for(rest.first())?)
                }
                _ => Err(bad()),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Mc,
}

#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub mode: Mode,
    pub probability: f64,
    /// Exact acceptance probability as `p/q` (exact mode only).
    pub exact_probability: Option<String>,
    pub std_err: Option<f64>,
    pub samples: Option<u64>,
    pub epsilon: String,
    pub k: usize,
    pub n: usize,
    pub atoms: usize,
    pub seed: Option<u64>,
    pub functions: Vec<String>,
    /// Largest coordinate influence per function (`None` beyond the table cap).
    pub max_influence: Vec<Option<f64>>,
    #[serde(skip)]
    pub exact_value: Option<BigRational>,
}

/// `μ = (1-ε)η + εU_k` as exact weights over `{-1,1}^k`.
fn noisy_atom(eta: &Distribution<BigRational>, eps: &BigRational) -> Vec<(u32, BigRational)> {
    let k = eta.arity();
    let keep = BigRational::from_ratio(1, 1) - eps.clone();
    let unif = eps.clone() / BigRational::from_ratio(1i64 << k, 1);
    (0..1u32 << k)
        .map(|x| (x, keep.clone() * eta.weight(x) + unif.clone()))
        .filter(|(_, w)| !w.is_zero())
        .collect()
}

/// Runs the test; `samples` is used in Monte Carlo mode only.
pub fn run_test(
    p: &Predicate,
    cert: &VanishingCertificate,
    eps: &BigRational,
    fs: &[FunctionOracle],
    mode: Mode,
    seed: u64,
    samples: u64,
) -> Result<TestReport> {
    let k = p.arity();
    if fs.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: fs.len() });
    }
    if let Some(i) = fs.iter().position(|f| !f.is_odd()) {
        return Err(Error::NotOdd(i));
    }
    let n = fs[0].n;
    if fs.iter().any(|f| f.n != n) {
        return Err(Error::ShapeMismatch("all functions must share n".into()));
    }
    if *eps < BigRational::zero() || *eps > BigRational::from_ratio(1, 1) {
        return Err(Error::Parse(format!("epsilon {eps} outside [0,1]")));
    }
    if cert.atoms.is_empty() || cert.atoms.iter().any(|a| a.distribution.arity() != k) {
        return Err(Error::CertificateMismatch("certificate atoms do not match the predicate".into()));
    }
    let mus: Vec<Vec<(u32, BigRational)>> = cert.atoms.iter().map(|a| noisy_atom(&a.distribution, eps)).collect();

    let (probability, exact_value, std_err, used_samples) = match mode {
        Mode::Exact => {
            if n > EXACT_MAX_N {
                return Err(Error::CapExceeded { what: "exact-mode n", got: n, cap: EXACT_MAX_N });
            }
            if let Some(mu) = mus.iter().find(|mu| mu.len() > EXACT_MAX_SUPPORT) {
                return Err(Error::CapExceeded { what: "exact-mode support", got: mu.len(), cap: EXACT_MAX_SUPPORT });
            }
            let terms = p.fourier_terms::<BigRational>();
            let mut total = BigRational::zero();
            for (atom, mu) in cert.atoms.iter().zip(&mus) {
                total += atom.weight.clone() * exact_acceptance(&terms, mu, fs, n)?;
            }
            (Scalar::to_f64(&total), Some(total), None, None)
        }
        Mode::Mc => {
            let est = mc_acceptance(p, cert, &mus, fs, n, seed, samples);
            (est.mean, None, Some(est.std_err), Some(est.samples))
        }
    };
    Ok(TestReport {
        mode,
        probability,
        exact_probability: exact_value.as_ref().map(format_rational),
        std_err,
        samples: used_samples,
        epsilon: format_rational(eps),
        k,
        n,
        atoms: cert.atoms.len(),
        seed: (mode == Mode::Mc).then_some(seed),
        functions: fs.iter().map(|f| f.label.clone()).collect(),
        max_influence: fs.iter().map(|f| f.max_influence().ok()).collect(),
        exact_value,
    })
}

/// Exact acceptance for one atom: enumerate every column choice from the
/// support, bucket integer weights by the tuple of function values, then
/// evaluate the multilinear extension once per bucket.
fn exact_acceptance(
    terms: &[(u32, BigRational)],
    mu: &[(u32, BigRational)],
    fs: &[FunctionOracle],
    n: usize,
) -> Result<BigRational> {
    let k = fs.len();
    let denom = mu.iter().fold(BigInt::from(1), |acc, (_, w)| {
        let d = w.denom();
        let g = num_integer_gcd(&acc, d);
        acc * d / g
    });
    let nums: Vec<u128> = mu
        .iter()
        .map(|(_, w)| (w.numer() * (&denom / w.denom())).to_u128())
        .collect::<Option<Vec<_>>>()
        .ok_or(Error::CapExceeded { what: "exact-mode weight numerator bits", got: 128, cap: 127 })?;
    let denom_u = denom.to_u128().ok_or(Error::CapExceeded { what: "exact-mode denominator bits", got: 128, cap: 127 })?;
    if denom_u.checked_pow(n as u32).is_none() {
        return Err(Error::CapExceeded { what: "exact-mode denominator bits", got: 128, cap: 127 });
    }

    // Distinct values of each function, and each input's value index.
    let mut value_lists: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut index_of: Vec<Vec<u32>> = Vec::with_capacity(k);
    for f in fs {
        let mut vals: Vec<f64> = Vec::new();
        let mut lookup: HashMap<u64, u32> = HashMap::new();
        let idx = (0..1u32 << n)
            .map(|x| {
                let v = f.eval(x);
                *lookup.entry(v.to_bits()).or_insert_with(|| {
                    vals.push(v);
                    (vals.len() - 1) as u32
                })
            })
            .collect();
        value_lists.push(vals);
        index_of.push(idx);
    }
    let radices: Vec<u64> = value_lists.iter().map(|v| v.len() as u64).collect();

    let points: Vec<u32> = mu.iter().map(|(x, _)| *x).collect();
    let buckets: Vec<HashMap<u64, u128>> = (0..points.len())
        .into_par_iter()
        .map(|first| {
            let mut acc = HashMap::new();
            let mut inputs = vec![0u32; k];
            place(&points, 0, first, &mut inputs);
            enumerate_columns(&points, &nums, &index_of, &radices, n, 1, nums[first], &mut inputs, &mut acc);
            acc
        })
        .collect();
    let mut merged: HashMap<u64, u128> = HashMap::new();
    for b in buckets {
        for (key, w) in b {
            *merged.entry(key).or_default() += w;
        }
    }

    let total_weight = BigInt::from(denom_u).pow(n as u32);
    let mut keys: Vec<u64> = merged.keys().copied().collect();
    keys.sort_unstable();
    let mut acc = BigRational::zero();
    for key in keys {
        let mut rest = key;
        let vals: Vec<BigRational> = (0..k)
            .map(|i| {
                let idx = (rest % radices[i]) as usize;
                rest /= radices[i];
                <BigRational as Scalar>::from_f64(value_lists[i][idx])
            })
            .collect();
        acc += BigRational::from_integer(BigInt::from(merged[&key])) * multilinear(terms, &vals);
    }
    Ok(acc / BigRational::from_integer(total_weight))
}

fn num_integer_gcd(a: &BigInt, b: &BigInt) -> BigInt {
    let (mut a, mut b) = (a.clone(), b.clone());
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}

/// Writes column `c` of the chosen support point into the row inputs.
fn place(points: &[u32], c: usize, s: usize, inputs: &mut [u32]) {
    let x = points[s];
    for (i, inp) in inputs.iter_mut().enumerate() {
        if x >> i & 1 == 1 {
            *inp |= 1 << c;
        } else {
            *inp &= !(1 << c);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate_columns(
    points: &[u32],
    nums: &[u128],
    index_of: &[Vec<u32>],
    radices: &[u64],
    n: usize,
    c: usize,
    weight: u128,
    inputs: &mut [u32],
    acc: &mut HashMap<u64, u128>,
) {
    if c == n {
        let mut key = 0u64;
        for i in (0..inputs.len()).rev() {
            key = key * radices[i] + index_of[i][inputs[i] as usize] as u64;
        }
        *acc.entry(key).or_default() += weight;
        return;
    }
    for s in 0..points.len() {
        place(points, c, s, inputs);
        enumerate_columns(points, nums, index_of, radices, n, c + 1, weight * nums[s], inputs, acc);
    }
}

fn mc_acceptance(
    p: &Predicate,
    cert: &VanishingCertificate,
    mus: &[Vec<(u32, BigRational)>],
    fs: &[FunctionOracle],
    n: usize,
    seed: u64,
    samples: u64,
) -> Estimate {
    let terms = p.fourier_terms::<f64>();
    let atom_cdf = cumulative(cert.atoms.iter().map(|a| Scalar::to_f64(&a.weight)));
    let mu_cdfs: Vec<(Vec<u32>, Vec<f64>)> = mus
        .iter()
        .map(|mu| (mu.iter().map(|(x, _)| *x).collect(), cumulative(mu.iter().map(|(_, w)| Scalar::to_f64(w)))))
        .collect();
    let k = fs.len();
    mc_mean(seed, 0, samples, |rng| {
        let a = pick(&atom_cdf, rng.random());
        let (pts, cdf) = &mu_cdfs[a];
        let mut inputs = vec![0u32; k];
        for c in 0..n {
            let x = pts[pick(cdf, rng.random())];
            for (i, inp) in inputs.iter_mut().enumerate() {
                *inp |= (x >> i & 1) << c;
            }
        }
        let vals: Vec<f64> = fs.iter().zip(&inputs).map(|(f, &x)| f.eval(x)).collect();
        multilinear(&terms, &vals)
    })
}

fn cumulative(ws: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = ws.map(|w| {
        acc += w;
        acc
    })
    .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

#[derive(Clone, Debug, Serialize)]
pub struct SoundnessEstimate {
    pub estimate: f64,
    /// Contribution `E[∏_{i∈S} f_i^{≤d}(G_i)]` per relevant set, averaged over atoms.
    pub per_set: Vec<(Vec<usize>, f64)>,
    pub graphs_checked: u64,
    /// Graphs `H(M̄)` with an even-degree vertex although every `|T_i|` was odd.
    pub odd_degree_violations: u64,
}

/// Gaussian counterpart of the acceptance probability: each `f_i` is replaced
/// by its degree-≤`d` part evaluated on Gaussian rows with column covariance
/// `ρ' = (1-ε)ρ + εI`, and the expectation is expanded over perfect matchings.
pub fn gaussian_soundness_estimate(
    p: &Predicate,
    atoms: &[(f64, CorrelationMatrix<f64>)],
    eps: f64,
    fs: &[FunctionOracle],
    d: usize,
) -> Result<SoundnessEstimate> {
    if d > 3 {
        return Err(Error::CapExceeded { what: "degree cap", got: d, cap: 3 });
    }
    let k = p.arity();
    if fs.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: fs.len() });
    }
    if let Some(i) = fs.iter().position(|f| !f.is_odd()) {
        return Err(Error::NotOdd(i));
    }
    let n = fs[0].n;
    let spectra: Vec<Vec<(u32, f64)>> = fs
        .iter()
        .map(|f| {
            Ok(f.fourier()?
                .into_iter()
                .enumerate()
                .filter(|(t, c)| (t.count_ones() as usize) <= d && c.abs() > 1e-15)
                .map(|(t, c)| (t as u32, c))
                .collect())
        })
        .collect::<Result<_>>()?;
    let all_odd = spectra.iter().all(|s| s.iter().all(|(t, _)| t.count_ones() % 2 == 1));
    let smoothed: Vec<(f64, CorrelationMatrix<f64>)> = atoms.iter().map(|(w, r)| (*w, r.smoothed(&eps))).collect();

    let mut estimate = p.coefficient(VertexSet::EMPTY).to_f64();
    let mut per_set = Vec::new();
    let mut graphs_checked = 0u64;
    let mut violations = 0u64;
    for s in p.relevant_sets() {
        let layers = s.elements();
        let mut value = 0.0;
        for (w, rho) in &smoothed {
            let (v, checked, bad) = set_expectation(&layers, &spectra, rho, n, all_odd);
            value += w * v;
            graphs_checked += checked;
            violations += bad;
        }
        estimate += p.coefficient(s).to_f64() * value;
        per_set.push((layers, value));
    }
    Ok(SoundnessEstimate { estimate, per_set, graphs_checked, odd_degree_violations: violations })
}

/// `Σ_{(T_i)} ∏ f̂_i(T_i) ∏_c E[∏_{i: c∈T_i} g_i]` for one set of layers, with
/// the odd-degree check over every matching combination.
fn set_expectation(
    layers: &[usize],
    spectra: &[Vec<(u32, f64)>],
    rho: &CorrelationMatrix<f64>,
    n: usize,
    check: bool,
) -> (f64, u64, u64) {
    let mut total = 0.0;
    let mut checked = 0u64;
    let mut bad = 0u64;
    let mut choice = vec![0usize; layers.len()];
    loop {
        let coef: f64 = layers.iter().zip(&choice).map(|(&i, &c)| spectra[i][c].1).product();
        let sets: Vec<u32> = layers.iter().zip(&choice).map(|(&i, &c)| spectra[i][c].0).collect();
        let columns: Vec<Vec<usize>> = (0..n)
            .map(|c| layers.iter().zip(&sets).filter(|(_, t)| *t >> c & 1 == 1).map(|(&i, _)| i).collect())
            .collect();
        if columns.iter().all(|col| col.len() % 2 == 0) {
            let value: f64 = columns.iter().map(|col| isserlis(rho, col)).product();
            total += coef * value;
            if check {
                let (c, b) = check_matching_graphs(layers, &columns);
                checked += c;
                bad += b;
            }
        }
        // Odometer over the Fourier supports of the chosen layers.
        let mut pos = 0;
        loop {
            if pos == layers.len() {
                return (total, checked, bad);
            }
            choice[pos] += 1;
            if choice[pos] < spectra[layers[pos]].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
        if spectra[layers[0]].is_empty() {
            return (total, checked, bad);
        }
    }
}

/// Builds `H(M̄)` for every combination of per-column perfect matchings and
/// counts those with a vertex of even degree.
fn check_matching_graphs(layers: &[usize], columns: &[Vec<usize>]) -> (u64, u64) {
    let per_col: Vec<Vec<Vec<(usize, usize)>>> = columns
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| perfect_matchings(c))
        .collect();
    let mut idx = vec![0usize; per_col.len()];
    let mut checked = 0u64;
    let mut bad = 0u64;
    loop {
        let mut deg = [0u32; 32];
        for (c, &m) in per_col.iter().zip(&idx) {
            for &(a, b) in &c[m] {
                deg[a] += 1;
                deg[b] += 1;
            }
        }
        checked += 1;
        if layers.iter().any(|&i| deg[i] % 2 == 0) {
            bad += 1;
        }
        let mut pos = 0;
        loop {
            if pos == per_col.len() {
                return (checked, bad);
            }
            idx[pos] += 1;
            if idx[pos] < per_col[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
