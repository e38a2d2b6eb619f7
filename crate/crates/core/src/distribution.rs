//! Distributions on `{-1,1}^k`, their second-moment matrices, and the LP that
//! recognises P-supported correlation matrices.

use std::collections::BTreeMap;
use std::ops::Deref;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bits::{coord, negate};
use crate::error::{Error, Result};
use crate::lp::{self, Feasibility, LpOptions};
use crate::multigraph::{graph_value, Multigraph};
use crate::predicate::Predicate;
use crate::scalar::Scalar;

/// Eigenvalues below this are treated as a PSD violation.
pub const PSD_TOLERANCE: f64 = -1e-10;

/// Float weights must sum to one within this.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// A probability distribution on `{-1,1}^k`, stored sparsely by point index.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<T = f64> {
    k: usize,
    atoms: BTreeMap<u32, T>,
}

impl<T: Scalar> Distribution<T> {
    /// Validates nonnegativity and unit total mass; zero weights are dropped and
    /// repeated points are merged.
    pub fn new(k: usize, atoms: impl IntoIterator<Item = (u32, T)>) -> Result<Self> {
        let d = Self::from_weights_unchecked(k, atoms)?;
        let total = d.total_mass();
        let ok = if T::EXACT {
            total == T::one()
        } else {
            (total.to_f64() - 1.0).abs() <= WEIGHT_SUM_TOLERANCE
        };
        if !ok {
            return Err(Error::InvalidDistribution(format!("weights sum to {total:?}, not 1")));
        }
        Ok(d)
    }

    /// Like [`Distribution::new`] but rescales the weights to unit mass.
    pub fn normalized(k: usize, atoms: impl IntoIterator<Item = (u32, T)>) -> Result<Self> {
        let mut d = Self::from_weights_unchecked(k, atoms)?;
        let total = d.total_mass();
        if !(total > T::zero()) {
            return Err(Error::InvalidDistribution("no positive mass".into()));
        }
        for w in d.atoms.values_mut() {
            *w = w.clone() / total.clone();
        }
        Ok(d)
    }

    fn from_weights_unchecked(k: usize, atoms: impl IntoIterator<Item = (u32, T)>) -> Result<Self> {
        if !(1..=crate::predicate::MAX_ARITY).contains(&k) {
            return Err(Error::ArityOutOfRange(k));
        }
        let mut map: BTreeMap<u32, T> = BTreeMap::new();
        for (x, w) in atoms {
            if x >> k != 0 {
                return Err(Error::InvalidDistribution(format!("point {x:#x} outside {{-1,1}}^{k}")));
            }
            if w < T::zero() {
                return Err(Error::InvalidDistribution(format!("negative weight {w:?}")));
            }
            if w.is_zero() {
                continue;
            }
            let slot = map.entry(x).or_insert_with(T::zero);
            *slot = slot.clone() + w;
        }
        Ok(Distribution { k, atoms: map })
    }

    pub fn point_mass(k: usize, x: u32) -> Result<Self> {
        Self::new(k, [(x, T::one())])
    }

    pub fn uniform_over(k: usize, points: &[u32]) -> Result<Self> {
        let n = points.len() as i64;
        if n == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        Self::new(k, points.iter().map(|&x| (x, T::from_ratio(1, n))))
    }

    pub fn uniform(k: usize) -> Self {
        let pts: Vec<u32> = (0..1u32 << k).collect();
        Self::uniform_over(k, &pts).expect("nonempty cube")
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn atoms(&self) -> impl Iterator<Item = (u32, &T)> {
        self.atoms.iter().map(|(&x, w)| (x, w))
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn weight(&self, x: u32) -> T {
        self.atoms.get(&x).cloned().unwrap_or_else(T::zero)
    }

    pub fn total_mass(&self) -> T {
        self.atoms.values().fold(T::zero(), |a, w| a + w.clone())
    }

    /// First support point violating `p`, if any.
    pub fn support_violation(&self, p: &Predicate) -> Option<u32> {
        if p.arity() != self.k {
            return self.atoms.keys().next().copied();
        }
        self.atoms.keys().copied().find(|&x| !p.eval(x))
    }

    /// Mass on `P^{-1}(1)`.
    pub fn mass_on(&self, p: &Predicate) -> T {
        self.atoms
            .iter()
            .filter(|(&x, _)| p.eval(x))
            .fold(T::zero(), |a, (_, w)| a + w.clone())
    }

    pub fn biases(&self) -> Vec<T> {
        (0..self.k)
            .map(|i| {
                self.atoms.iter().fold(T::zero(), |a, (&x, w)| {
                    if coord(x, i) == 1 { a + w.clone() } else { a - w.clone() }
                })
            })
            .collect()
    }

    pub fn correlation_matrix(&self) -> CorrelationMatrix<T> {
        let k = self.k;
        let mut entries = vec![T::zero(); k * k];
        for i in 0..k {
            entries[i * k + i] = self.total_mass();
            for j in i + 1..k {
                let v = self.atoms.iter().fold(T::zero(), |a, (&x, w)| {
                    if coord(x, i) == coord(x, j) { a + w.clone() } else { a - w.clone() }
                });
                entries[i * k + j] = v.clone();
                entries[j * k + i] = v;
            }
        }
        CorrelationMatrix { k, entries }
    }

    /// Spreads each atom's weight equally over `x` and `-x`.
    pub fn symmetrize(&self, p: &Predicate) -> Result<Self> {
        p.require_even()?;
        if p.arity() != self.k {
            return Err(Error::DimensionMismatch { expected: p.arity(), got: self.k });
        }
        let half = T::from_ratio(1, 2);
        let atoms = self.atoms.iter().flat_map(|(&x, w)| {
            let h = w.clone() * half.clone();
            [(x, h.clone()), (negate(x, self.k), h)]
        });
        Distribution::new(self.k, atoms.collect::<Vec<_>>())
    }

    /// Restriction to `P^{-1}(1)`, renormalised.
    pub fn condition_on(&self, p: &Predicate) -> Result<Distribution<T>> {
        let mass = self.mass_on(p);
        if mass.is_negligible(0.0) || !(mass > T::zero()) {
            return Err(Error::ZeroSupportedMass);
        }
        let atoms: Vec<(u32, T)> = self
            .atoms
            .iter()
            .filter(|(&x, _)| p.eval(x))
            .map(|(&x, w)| (x, w.clone() / mass.clone()))
            .collect();
        Distribution::normalized(self.k, atoms)
    }

    pub fn to_f64(&self) -> Distribution<f64> {
        Distribution {
            k: self.k,
            atoms: self.atoms.iter().map(|(&x, w)| (x, w.to_f64())).collect(),
        }
    }

    /// Mixture `(1-λ)·self + λ·other`.
    pub fn mix(&self, other: &Distribution<T>, lambda: &T) -> Result<Self> {
        if other.k != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: other.k });
        }
        let keep = T::one() - lambda.clone();
        let atoms = self
            .atoms
            .iter()
            .map(|(&x, w)| (x, w.clone() * keep.clone()))
            .chain(other.atoms.iter().map(|(&x, w)| (x, w.clone() * lambda.clone())));
        Distribution::normalized(self.k, atoms.collect::<Vec<_>>())
    }
}

/// A distribution whose support lies inside `P^{-1}(1)` for a given `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportedDistribution<T = f64>(Distribution<T>);

impl<T: Scalar> SupportedDistribution<T> {
    pub fn new(p: &Predicate, dist: Distribution<T>) -> Result<Self> {
        if dist.arity() != p.arity() {
            return Err(Error::DimensionMismatch { expected: p.arity(), got: dist.arity() });
        }
        if let Some(x) = dist.support_violation(p) {
            return Err(Error::InvalidDistribution(format!(
                "point {x:#x} has positive weight but does not satisfy the predicate"
            )));
        }
        Ok(SupportedDistribution(dist))
    }

    pub fn into_inner(self) -> Distribution<T> {
        self.0
    }

    pub fn to_f64(&self) -> SupportedDistribution<f64> {
        SupportedDistribution(self.0.to_f64())
    }
}

impl<T> Deref for SupportedDistribution<T> {
    type Target = Distribution<T>;

    fn deref(&self) -> &Distribution<T> {
        &self.0
    }
}

/// Symmetric `k × k` matrix with unit diagonal and entries in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix<T = f64> {
    k: usize,
    entries: Vec<T>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    /// Checks shape, symmetry, unit diagonal and entry range (to `tol` for floats).
    pub fn new(k: usize, entries: Vec<T>, tol: f64) -> Result<Self> {
        if entries.len() != k * k {
            return Err(Error::InvalidCorrelation(format!("expected {} entries, got {}", k * k, entries.len())));
        }
        let close = |a: &T, b: &T| (a.clone() - b.clone()).is_negligible(tol);
        for i in 0..k {
            if !close(&entries[i * k + i], &T::one()) {
                return Err(Error::InvalidCorrelation(format!("diagonal entry {i} is {:?}", entries[i * k + i])));
            }
            for j in 0..k {
                let v = &entries[i * k + j];
                if !close(v, &entries[j * k + i]) {
                    return Err(Error::InvalidCorrelation(format!("not symmetric at ({i},{j})")));
                }
                if v.abs_val().to_f64() > 1.0 + tol {
                    return Err(Error::InvalidCorrelation(format!("entry ({i},{j}) = {v:?} outside [-1,1]")));
                }
            }
        }
        Ok(CorrelationMatrix { k, entries })
    }

    pub fn from_rows(rows: &[Vec<T>], tol: f64) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidCorrelation("matrix is not square".into()));
        }
        Self::new(k, rows.iter().flatten().cloned().collect(), tol)
    }

    /// Builds a matrix from its strictly-upper entries `(i, j, value)`.
    pub fn from_off_diagonal(k: usize, values: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let mut entries = vec![T::zero(); k * k];
        for i in 0..k {
            entries[i * k + i] = T::one();
        }
        for (i, j, v) in values {
            entries[i * k + j] = v.clone();
            entries[j * k + i] = v;
        }
        Self::new(k, entries, 0.0)
    }

    pub fn identity(k: usize) -> Self {
        Self::from_off_diagonal(k, std::iter::empty()).expect("identity is valid")
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.entries[i * self.k + j]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.entries.chunks(self.k).map(|c| c.to_vec()).collect()
    }

    pub fn to_f64(&self) -> CorrelationMatrix<f64> {
        CorrelationMatrix { k: self.k, entries: self.entries.iter().map(Scalar::to_f64).collect() }
    }

    /// `(1-ε)ρ + εI`.
    pub fn smoothed(&self, eps: &T) -> Self {
        let keep = T::one() - eps.clone();
        let mut entries = self.entries.clone();
        for i in 0..self.k {
            for j in 0..self.k {
                if i != j {
                    entries[i * self.k + j] = entries[i * self.k + j].clone() * keep.clone();
                }
            }
        }
        CorrelationMatrix { k: self.k, entries }
    }

    /// `ρ̃_ij = ρ_ij b_i b_j`.
    pub fn sign_flipped(&self, signs: &[i8]) -> Self {
        let k = self.k;
        let mut entries = self.entries.clone();
        for i in 0..k {
            for j in 0..k {
                if signs[i] * signs[j] < 0 {
                    entries[i * k + j] = -entries[i * k + j].clone();
                }
            }
        }
        CorrelationMatrix { k, entries }
    }

    pub fn max_abs_diff(&self, other: &CorrelationMatrix<T>) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a.clone() - b.clone()).abs_val().to_f64())
            .fold(0.0, f64::max)
    }
}

impl CorrelationMatrix<f64> {
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k, self.k, &self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.to_dmatrix())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= PSD_TOLERANCE
    }

    /// Clips negative eigenvalues to zero and rescales to unit diagonal.
    /// Returns the repaired matrix and the largest clipped magnitude (0 when
    /// the matrix already passes [`PSD_TOLERANCE`]).
    pub fn repair_psd(&self) -> (CorrelationMatrix<f64>, f64) {
        let m = self.to_dmatrix();
        let eig = SymmetricEigen::new(m);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min >= PSD_TOLERANCE {
            return (self.clone(), 0.0);
        }
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        let repaired = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let k = self.k;
        let diag: Vec<f64> = (0..k).map(|i| repaired[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
        let mut entries = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                entries[i * k + j] = if i == j {
                    1.0
                } else {
                    (repaired[(i, j)] / (diag[i] * diag[j])).clamp(-1.0, 1.0)
                };
            }
        }
        (CorrelationMatrix { k, entries }, -min)
    }
}

/// Linear functional proving a matrix is not P-supported: every satisfying
/// `x` has `constant + Σ coeff_ij x_i x_j ≤ 0`, while the same expression
/// evaluated at `ρ` is positive.
#[derive(Clone, Debug)]
pub struct SeparatingFunctional<T> {
    pub constant: T,
    pub pairs: Vec<((usize, usize), T)>,
}

impl<T: Scalar> SeparatingFunctional<T> {
    pub fn at_point(&self, x: u32) -> T {
        self.pairs.iter().fold(self.constant.clone(), |a, ((i, j), c)| {
            if coord(x, *i) == coord(x, *j) { a + c.clone() } else { a - c.clone() }
        })
    }

    pub fn at_matrix(&self, rho: &CorrelationMatrix<T>) -> T {
        self.pairs
            .iter()
            .fold(self.constant.clone(), |a, ((i, j), c)| a + c.clone() * rho.get(*i, *j).clone())
    }
}

#[derive(Clone, Debug)]
pub enum SupportMembership<T> {
    Supported(SupportedDistribution<T>),
    NotSupported(SeparatingFunctional<T>),
}

/// Decides whether `rho` is the correlation matrix of some P-supported
/// distribution. For even `P` the LP runs over antipodal pairs, so the
/// witness is unbiased.
pub fn is_p_supported_matrix<T: Scalar>(
    p: &Predicate,
    rho: &CorrelationMatrix<T>,
    tol: f64,
) -> Result<SupportMembership<T>> {
    let k = p.arity();
    if rho.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, got: rho.dim() });
    }
    let columns: Vec<u32> = if p.is_even() {
        p.satisfying_points().filter(|&x| x < negate(x, k)).collect()
    } else {
        p.satisfying_points().collect()
    };
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();

    let mut a = vec![vec![T::one(); columns.len()]];
    let mut b = vec![T::one()];
    for &(i, j) in &pairs {
        a.push(
            columns
                .iter()
                .map(|&x| T::from_ratio((coord(x, i) * coord(x, j)) as i64, 1))
                .collect(),
        );
        b.push(rho.get(i, j).clone());
    }
    let opts = LpOptions { tol: tol.clamp(1e-14, 1e-6), ..LpOptions::default() };
    match lp::feasibility(&a, &b, &opts)? {
        Feasibility::Feasible(x) => {
            let even = p.is_even();
            let half = T::from_ratio(1, 2);
            let atoms: Vec<(u32, T)> = columns
                .iter()
                .zip(x)
                .flat_map(|(&pt, w)| {
                    if even {
                        let h = w * half.clone();
                        vec![(pt, h.clone()), (negate(pt, k), h)]
                    } else {
                        vec![(pt, w)]
                    }
                })
                .collect();
            let dist = if T::EXACT {
                Distribution::new(k, atoms)?
            } else {
                Distribution::normalized(k, atoms)?
            };
            let witness = SupportedDistribution::new(p, dist)?;
            let err = witness.correlation_matrix().max_abs_diff(rho);
            if !T::EXACT && err > tol.max(1e-9) {
                return Err(Error::InvalidDistribution(format!(
                    "LP witness misses the target moments by {err:e}"
                )));
            }
            Ok(SupportMembership::Supported(witness))
        }
        Feasibility::Infeasible { ray, .. } => {
            let mut ray = ray.into_iter();
            let constant = ray.next().unwrap_or_else(T::zero);
            let pairs = pairs.into_iter().zip(ray).collect();
            Ok(SupportMembership::NotSupported(SeparatingFunctional { constant, pairs }))
        }
    }
}

/// Result of conditioning a distribution on `P^{-1}(1)`.
#[derive(Clone, Debug)]
pub struct Projection<T> {
    pub distribution: SupportedDistribution<T>,
    pub retained_mass: T,
    /// `max_G |ρ(G) - ρ'(G)|` over the supplied graphs.
    pub max_graph_deviation: f64,
}

/// Conditions `mu` on the satisfying set and reports how far graph values move.
pub fn conditional_projection<T: Scalar>(
    mu: &Distribution<T>,
    p: &Predicate,
    graphs: &[Multigraph],
) -> Result<Projection<T>> {
    let conditioned = mu.condition_on(p)?;
    let before = mu.correlation_matrix();
    let after = conditioned.correlation_matrix();
    let max_graph_deviation = graphs
        .iter()
        .map(|g| (graph_value(&before, g) - graph_value(&after, g)).abs_val().to_f64())
        .fold(0.0, f64::max);
    Ok(Projection {
        retained_mass: mu.mass_on(p),
        distribution: SupportedDistribution::new(p, conditioned)?,
        max_graph_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::chi;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    fn odd_parity_points() -> Vec<u32> {
        (0..16u32).filter(|&x| chi(0b1111, x) == -1).collect()
    }

    #[test]
    fn symmetrize_point_mass() {
        let p = Predicate::named("lin4").unwrap();
        let x = 0b0001; // (-1, 1, 1, 1), odd parity
        let mu = Distribution::<BigRational>::point_mass(4, x).unwrap();
        let s = mu.symmetrize(&p).unwrap();
        assert_eq!(s.weight(x), q(1, 2));
        assert_eq!(s.weight(negate(x, 4)), q(1, 2));
        assert!(s.biases().iter().all(|b| *b == q(0, 1)));
        assert_eq!(s.correlation_matrix(), mu.correlation_matrix());
    }

    #[test]
    fn symmetrize_uniform_is_unchanged() {
        let p = Predicate::named("lin4").unwrap();
        let mu = Distribution::<BigRational>::uniform_over(4, &odd_parity_points()).unwrap();
        assert_eq!(mu.symmetrize(&p).unwrap(), mu);
    }

    #[test]
    fn symmetrize_rejects_odd_predicates() {
        let p = Predicate::named("lin3").unwrap();
        let mu = Distribution::<f64>::point_mass(3, 0b001).unwrap();
        assert!(matches!(mu.symmetrize(&p), Err(Error::NotEven(_))));
    }

    #[test]
    fn correlation_examples() {
        let mu = Distribution::<BigRational>::uniform_over(4, &odd_parity_points()).unwrap();
        assert_eq!(mu.correlation_matrix(), CorrelationMatrix::identity(4));

        let nae = Predicate::named("nae3").unwrap();
        let sat: Vec<u32> = nae.satisfying_points().collect();
        let rho = Distribution::<BigRational>::uniform_over(3, &sat).unwrap().correlation_matrix();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(rho.get(i, j), &q(-1, 3));
        }

        let x = 0b0110u32;
        let pair = Distribution::<BigRational>::uniform_over(4, &[x, negate(x, 4)]).unwrap();
        let rho = pair.correlation_matrix();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(rho.get(i, j), &q((coord(x, i) * coord(x, j)) as i64, 1));
            }
        }
    }

    #[test]
    fn lin4_identity_is_supported_by_uniform() {
        let p = Predicate::named("lin4").unwrap();
        let SupportMembership::Supported(w) =
            is_p_supported_matrix(&p, &CorrelationMatrix::<BigRational>::identity(4), 0.0).unwrap()
        else {
            panic!("identity should be supported");
        };
        let uniform = Distribution::<BigRational>::uniform_over(4, &odd_parity_points()).unwrap();
        assert_eq!(*w, uniform);
    }

    #[test]
    fn nae3_identity_is_not_supported() {
        let p = Predicate::named("nae3").unwrap();
        for tol in [1e-9] {
            let SupportMembership::NotSupported(f) =
                is_p_supported_matrix(&p, &CorrelationMatrix::<f64>::identity(3), tol).unwrap()
            else {
                panic!("identity should not be NAE-supported");
            };
            assert!(f.at_matrix(&CorrelationMatrix::identity(3)) > 1e-9);
            assert!(p.satisfying_points().all(|x| f.at_point(x) <= 1e-9));
        }
        let SupportMembership::NotSupported(f) =
            is_p_supported_matrix(&p, &CorrelationMatrix::<BigRational>::identity(3), 0.0).unwrap()
        else {
            panic!();
        };
        assert!(f.at_matrix(&CorrelationMatrix::identity(3)) > q(0, 1));
        assert!(p.satisfying_points().all(|x| f.at_point(x) <= q(0, 1)));
    }

    #[test]
    fn xor2_anti_correlated_matrix() {
        let p = Predicate::named("xor2").unwrap();
        let rho = CorrelationMatrix::<BigRational>::from_off_diagonal(2, [(0, 1, q(-1, 1))]).unwrap();
        let SupportMembership::Supported(w) = is_p_supported_matrix(&p, &rho, 0.0).unwrap() else {
            panic!();
        };
        assert_eq!(w.weight(0b01), q(1, 2));
        assert_eq!(w.weight(0b10), q(1, 2));
    }

    #[test]
    fn conditioning_examples() {
        let p = Predicate::named("lin4").unwrap();
        let odd = odd_parity_points();
        let even: Vec<u32> = (0..16u32).filter(|x| !odd.contains(x)).collect();
        let uo = Distribution::<BigRational>::uniform_over(4, &odd).unwrap();
        let ue = Distribution::<BigRational>::uniform_over(4, &even).unwrap();
        let mixed = uo.mix(&ue, &q(1, 5)).unwrap();
        let graphs = crate::multigraph::enumerate_relevant_graphs(&p, 4);
        let proj = conditional_projection(&mixed, &p, &graphs).unwrap();
        assert_eq!(*proj.distribution, uo);
        assert_eq!(proj.retained_mass, q(4, 5));

        let already = conditional_projection(&uo, &p, &graphs).unwrap();
        assert_eq!(*already.distribution, uo);
        assert_eq!(already.max_graph_deviation, 0.0);

        let bad = Distribution::<f64>::uniform_over(4, &even).unwrap();
        assert!(matches!(conditional_projection(&bad, &p, &graphs), Err(Error::ZeroSupportedMass)));
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::<f64>::new(2, [(0, 0.5)]).is_err());
        assert!(Distribution::<f64>::new(2, [(0, 1.5), (1, -0.5)]).is_err());
        assert!(Distribution::<f64>::new(2, [(4, 1.0)]).is_err());
        let d = Distribution::<f64>::new(2, [(0, 0.5), (0, 0.5), (3, 0.0)]).unwrap();
        assert_eq!(d.support_size(), 1);
    }

    #[test]
    fn psd_repair_reports_magnitude() {
        // Pairwise correlations of -0.9 among three variables are not PSD.
        let bad = CorrelationMatrix::<f64>::from_off_diagonal(3, [(0, 1, -0.9), (0, 2, -0.9), (1, 2, -0.9)]).unwrap();
        assert!(!bad.is_psd());
        let (fixed, mag) = bad.repair_psd();
        assert!(mag > 0.7 && mag < 0.9, "magnitude {mag}");
        assert!(fixed.is_psd());
        for i in 0..3 {
            assert_eq!(*fixed.get(i, i), 1.0);
        }
        let good = CorrelationMatrix::<f64>::identity(3);
        assert_eq!(good.repair_psd().1, 0.0);
    }
}
