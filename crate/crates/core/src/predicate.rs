//! Boolean predicates `P: {-1,1}^k → {0,1}` and their exact Fourier expansion.

use std::fmt;

use crate::bits::{self, chi, negate, VertexSet};
use crate::error::{Error, Result};
use crate::scalar::{Dyadic, Scalar};

pub const MAX_ARITY: usize = 12;

/// A k-ary predicate with its Fourier coefficients cached at construction.
///
/// `fourier()[S]` is `P̂(S) = 2^{-k} Σ_x P(x) χ_S(x)`, indexed by the bit mask
/// of `S`.
#[derive(Clone, PartialEq, Eq)]
pub struct Predicate {
    k: usize,
    table: Vec<bool>,
    fourier: Vec<Dyadic>,
}

impl Predicate {
    pub fn from_truth_table(k: usize, table: Vec<bool>) -> Result<Self> {
        if !(1..=MAX_ARITY).contains(&k) {
            return Err(Error::ArityOutOfRange(k));
        }
        if table.len() != 1 << k {
            return Err(Error::DimensionMismatch { expected: 1 << k, got: table.len() });
        }
        let values: Vec<i64> = table.iter().map(|&b| b as i64).collect();
        let fourier = walsh_hadamard(values)
            .into_iter()
            .map(|s| Dyadic::new(s, k as u32))
            .collect();
        Ok(Predicate { k, table, fourier })
    }

    /// Truth table equal to 1 exactly on the listed points (duplicates allowed).
    pub fn from_satisfying_set(k: usize, sat: &[Vec<i64>]) -> Result<Self> {
        if !(1..=MAX_ARITY).contains(&k) {
            return Err(Error::ArityOutOfRange(k));
        }
        let mut table = vec![false; 1 << k];
        for point in sat {
            table[bits::signs_to_point(point, k)? as usize] = true;
        }
        Self::from_truth_table(k, table)
    }

    pub fn from_fn(k: usize, f: impl Fn(&[i8]) -> bool) -> Result<Self> {
        if !(1..=MAX_ARITY).contains(&k) {
            return Err(Error::ArityOutOfRange(k));
        }
        let table = (0..1u32 << k)
            .map(|x| f(&bits::point_to_signs(x, k)))
            .collect();
        Self::from_truth_table(k, table)
    }

    /// Built-in predicates: `xor2`, `lin3`, `lin4`, `nae3`, `sat3`, `glst`,
    /// and `const0:k` / `const1:k`.
    pub fn named(name: &str) -> Option<Self> {
        let parity = |x: &[i8]| x.iter().map(|&v| v as i32).product::<i32>();
        let p = match name {
            "xor2" => Self::from_fn(2, |x| x[0] != x[1]),
            "lin3" => Self::from_fn(3, |x| parity(x) == -1),
            "lin4" => Self::from_fn(4, |x| parity(x) == -1),
            "nae3" => Self::from_fn(3, |x| !(x[0] == x[1] && x[1] == x[2])),
            // -1 is "true": OR fails only on the all-(+1) point.
            "sat3" => Self::from_fn(3, |x| x.iter().any(|&v| v == -1)),
            "glst" => Self::from_fn(4, |x| if x[0] == -1 { x[1] != x[2] } else { x[1] != x[3] }),
            _ => {
                let (kind, k) = name.split_once(':')?;
                let k: usize = k.parse().ok()?;
                match kind {
                    "const0" => Self::from_fn(k, |_| false),
                    "const1" => Self::from_fn(k, |_| true),
                    _ => return None,
                }
            }
        };
        p.ok()
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn truth_table(&self) -> &[bool] {
        &self.table
    }

    pub fn eval(&self, x: u32) -> bool {
        self.table[x as usize]
    }

    pub fn satisfying_points(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.table.len() as u32).filter(|&x| self.table[x as usize])
    }

    pub fn satisfying_count(&self) -> usize {
        self.table.iter().filter(|&&b| b).count()
    }

    pub fn fourier(&self) -> &[Dyadic] {
        &self.fourier
    }

    pub fn coefficient(&self, set: VertexSet) -> Dyadic {
        self.fourier[set.mask() as usize]
    }

    /// `|P^{-1}(1)| / 2^k`, which equals `P̂(∅)`.
    pub fn density(&self) -> Dyadic {
        Dyadic::new(self.satisfying_count() as i64, self.k as u32)
    }

    /// A satisfying point whose negation is not satisfying, if any.
    pub fn evenness_witness(&self) -> Option<u32> {
        (0..self.table.len() as u32).find(|&x| self.table[x as usize] != self.table[negate(x, self.k) as usize])
    }

    pub fn is_even(&self) -> bool {
        self.evenness_witness().is_none()
    }

    pub fn require_even(&self) -> Result<()> {
        match self.evenness_witness() {
            None => Ok(()),
            Some(x) if self.eval(x) => Err(Error::NotEven(x)),
            Some(x) => Err(Error::NotEven(negate(x, self.k))),
        }
    }

    /// Nonempty `S` with `P̂(S) ≠ 0`, by size then lexicographically.
    pub fn relevant_sets(&self) -> Vec<VertexSet> {
        let mut sets: Vec<VertexSet> = (1..self.fourier.len() as u32)
            .filter(|&s| !self.fourier[s as usize].is_zero())
            .map(VertexSet)
            .collect();
        sets.sort();
        sets
    }

    /// Nonzero Fourier terms (including `∅`) converted to `T`.
    pub fn fourier_terms<T: Scalar>(&self) -> Vec<(u32, T)> {
        self.fourier
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(s, &c)| (s as u32, T::from_dyadic(c)))
            .collect()
    }

    /// Truth table reconstructed exactly from the Fourier coefficients.
    pub fn inverse_fourier(coeffs: &[Dyadic]) -> Vec<Dyadic> {
        let n = coeffs.len();
        (0..n as u32)
            .map(|x| {
                (0..n as u32).fold(Dyadic::ZERO, |acc, s| {
                    let c = coeffs[s as usize];
                    if chi(s, x) == 1 { acc + c } else { acc - c }
                })
            })
            .collect()
    }

    /// Hex encoding of the truth table: hex digit `i` holds points `4i..4i+3`,
    /// point `4i+b` in bit `b` of the digit.
    pub fn to_hex(&self) -> String {
        self.table
            .chunks(4)
            .map(|c| {
                let nib = c.iter().enumerate().fold(0u32, |a, (b, &v)| a | (v as u32) << b);
                char::from_digit(nib, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(k: usize, hex: &str) -> Result<Self> {
        if !(1..=MAX_ARITY).contains(&k) {
            return Err(Error::ArityOutOfRange(k));
        }
        let points = 1usize << k;
        let digits = points.div_ceil(4);
        if hex.len() != digits {
            return Err(Error::Parse(format!("truth_hex needs {digits} digits for k = {k}, got {}", hex.len())));
        }
        let mut table = Vec::with_capacity(points);
        for ch in hex.chars() {
            let nib = ch
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("bad hex digit {ch:?}")))?;
            for b in 0..4 {
                table.push(nib >> b & 1 == 1);
            }
        }
        if table[points..].iter().any(|&b| b) {
            return Err(Error::Parse("truth_hex sets bits beyond 2^k points".into()));
        }
        table.truncate(points);
        Self::from_truth_table(k, table)
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Predicate(k={}, hex={})", self.k, self.to_hex())
    }
}

/// Unnormalized Walsh–Hadamard transform: `out[S] = Σ_x v[x] χ_S(x)`.
pub fn walsh_hadamard(mut v: Vec<i64>) -> Vec<i64> {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
    v
}

/// Float variant used for real-valued functions.
pub fn walsh_hadamard_f64(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Multilinear extension `Σ_S P̂(S) ∏_{i∈S} values[i]` over precomputed terms.
pub fn multilinear<T: Scalar>(terms: &[(u32, T)], values: &[T]) -> T {
    let mut total = T::zero();
    for (s, c) in terms {
        let mut term = c.clone();
        let mut m = *s;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            term = term * values[i].clone();
            m &= m - 1;
        }
        total = total + term;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(p: &Predicate) -> Vec<Dyadic> {
        let k = p.arity();
        (0..1u32 << k)
            .map(|s| {
                let sum: i64 = p.satisfying_points().map(|x| chi(s, x) as i64).sum();
                Dyadic::new(sum, k as u32)
            })
            .collect()
    }

    fn set(e: &[usize]) -> VertexSet {
        VertexSet::from_elements(e)
    }

    #[test]
    fn xor2_from_satisfying_set() {
        let p = Predicate::from_satisfying_set(2, &[vec![1, -1], vec![-1, 1], vec![1, -1]]).unwrap();
        assert_eq!(p.satisfying_count(), 2);
        assert_eq!(p, Predicate::named("xor2").unwrap());
    }

    #[test]
    fn lin4_from_odd_parity_points() {
        let sat: Vec<Vec<i64>> = (0..16u32)
            .map(|x| bits::point_to_signs(x, 4).into_iter().map(i64::from).collect::<Vec<_>>())
            .filter(|v| v.iter().product::<i64>() == -1)
            .collect();
        assert_eq!(sat.len(), 8);
        let p = Predicate::from_satisfying_set(4, &sat).unwrap();
        assert_eq!(p, Predicate::named("lin4").unwrap());
        assert_eq!(p.fourier(), brute_force(&p).as_slice());
        assert_eq!(p.coefficient(VertexSet::EMPTY), Dyadic::new(1, 1));
        assert_eq!(p.coefficient(set(&[0, 1, 2, 3])), Dyadic::new(-1, 1));
        let nonzero = p.fourier().iter().filter(|c| !c.is_zero()).count();
        assert_eq!(nonzero, 2);
        assert_eq!(p.relevant_sets(), vec![set(&[0, 1, 2, 3])]);
        assert!(p.is_even());
        assert_eq!(p.density(), Dyadic::new(1, 1));
    }

    #[test]
    fn nae3_fourier_table() {
        let p = Predicate::named("nae3").unwrap();
        assert_eq!(p.satisfying_count(), 6);
        assert_eq!(p.fourier(), brute_force(&p).as_slice());
        assert_eq!(p.coefficient(VertexSet::EMPTY), Dyadic::new(3, 2));
        for pair in [[0, 1], [0, 2], [1, 2]] {
            assert_eq!(p.coefficient(set(&pair)), Dyadic::new(-1, 2));
        }
        assert_eq!(p.relevant_sets(), vec![set(&[0, 1]), set(&[0, 2]), set(&[1, 2])]);
    }

    #[test]
    fn evenness_and_density() {
        assert!(!Predicate::named("lin3").unwrap().is_even());
        let glst = Predicate::named("glst").unwrap();
        assert!(!glst.is_even());
        let w = glst.evenness_witness().unwrap();
        assert_ne!(glst.eval(w), glst.eval(negate(w, 4)));
        assert!(glst.require_even().is_err());
        assert_eq!(Predicate::named("sat3").unwrap().density(), Dyadic::new(7, 3));
        assert_eq!(Predicate::named("lin3").unwrap().density(), Dyadic::new(1, 1));
    }

    #[test]
    fn constant_predicates() {
        let zero = Predicate::named("const0:3").unwrap();
        assert!(zero.fourier().iter().all(Dyadic::is_zero));
        let one = Predicate::named("const1:5").unwrap();
        assert!(one.relevant_sets().is_empty());
        assert_eq!(one.density(), Dyadic::new(1, 0));
    }

    #[test]
    fn arity_and_dimension_errors() {
        assert!(matches!(Predicate::from_satisfying_set(0, &[]), Err(Error::ArityOutOfRange(0))));
        assert!(matches!(Predicate::from_satisfying_set(13, &[]), Err(Error::ArityOutOfRange(13))));
        assert!(matches!(
            Predicate::from_satisfying_set(3, &[vec![1, 1]]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn hex_round_trip() {
        let p = Predicate::named("glst").unwrap();
        let hex = p.to_hex();
        assert_eq!(hex.len(), 4);
        assert_eq!(Predicate::from_hex(4, &hex).unwrap(), p);
        let x = Predicate::named("xor2").unwrap();
        // points 1 and 2 satisfy: nibble 0b0110
        assert_eq!(x.to_hex(), "6");
        assert!(Predicate::from_hex(1, "f").is_err());
        assert!(Predicate::from_hex(2, "66").is_err());
    }

    #[test]
    fn multilinear_extension_matches_truth_table() {
        let p = Predicate::named("glst").unwrap();
        let terms = p.fourier_terms::<f64>();
        for x in 0..16u32 {
            let vals: Vec<f64> = bits::point_to_signs(x, 4).into_iter().map(f64::from).collect();
            assert_eq!(multilinear(&terms, &vals), p.eval(x) as i32 as f64);
        }
        let zeros = vec![0.0; 4];
        assert_eq!(multilinear(&terms, &zeros), p.density().to_f64());
    }
}
