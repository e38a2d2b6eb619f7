//! Correlated standard Gaussians and their product moments.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::distribution::CorrelationMatrix;
use crate::multigraph::perfect_matchings;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Pivots below this are treated as zero in the semidefinite factorization.
const PIVOT_FLOOR: f64 = 1e-12;

/// Lower-triangular `L` with `L Lᵀ = a` for a PSD matrix `a`. Columns whose
/// pivot vanishes are left zero, so rank-deficient inputs are fine.
pub fn semidefinite_cholesky(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let d = a[(j, j)] - (0..j).map(|c| l[(j, c)] * l[(j, c)]).sum::<f64>();
        if d <= PIVOT_FLOOR {
            continue;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in j + 1..n {
            let s = a[(i, j)] - (0..j).map(|c| l[(i, c)] * l[(j, c)]).sum::<f64>();
            l[(i, j)] = s / root;
        }
    }
    l
}

/// Mean-zero, unit-variance Gaussians with a given correlation matrix.
#[derive(Clone, Debug)]
pub struct GaussianModel {
    cov: CorrelationMatrix<f64>,
    factor: DMatrix<f64>,
    repair: f64,
}

impl GaussianModel {
    pub fn new(cov: &CorrelationMatrix<f64>) -> Self {
        let (cov, repair) = cov.repair_psd();
        let factor = semidefinite_cholesky(&cov.to_dmatrix());
        GaussianModel { cov, factor, repair }
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// Covariance actually sampled from (after any PSD repair).
    pub fn covariance(&self) -> &CorrelationMatrix<f64> {
        &self.cov
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Largest eigenvalue clipped during repair; 0 if none.
    pub fn repair_magnitude(&self) -> f64 {
        self.repair
    }

    /// Largest entry of `|L Lᵀ - Σ|`.
    pub fn factor_error(&self) -> f64 {
        let recon = &self.factor * self.factor.transpose();
        (recon - self.cov.to_dmatrix()).abs().max()
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let r = self.dim();
        let z: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
        (0..r)
            .map(|i| (0..=i).map(|c| self.factor[(i, c)] * z[c]).sum())
            .collect()
    }
}

/// `E[∏ g_{idx}]` for jointly Gaussian unit-variance variables: the sum over
/// perfect matchings of the index positions. Repeated indices use `ρ_ii = 1`.
pub fn isserlis<T: Scalar>(rho: &CorrelationMatrix<T>, idx: &[usize]) -> T {
    let positions: Vec<usize> = (0..idx.len()).collect();
    perfect_matchings(&positions)
        .iter()
        .fold(T::zero(), |acc, m| {
            acc + m
                .iter()
                .fold(T::one(), |p, &(a, b)| p * rho.get(idx[a], idx[b]).clone())
        })
}
