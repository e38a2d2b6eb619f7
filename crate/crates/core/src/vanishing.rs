//! Vanishing distributions and separating hyperplanes.
//!
//! For an even predicate `P` and edge budget `m`, let `G_1..G_M` be the
//! canonical graph list and `q(ρ) = (ρ(G_1), …, ρ(G_M))`. An m-vanishing
//! distribution exists iff the origin lies in `Q = conv{q(ρ) : ρ P-supported}`.
//! [`search_vanishing`] runs Wolfe's minimum-norm-point method with a
//! projected-gradient separation oracle standing in for the linear minimiser
//! over `Q`. A zero minimum norm yields a primal certificate; a confirmed
//! positive gap yields a hyperplane `γ` with margin `δ`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng as _;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{coord, negate};
use crate::distribution::{CorrelationMatrix, Distribution, SupportedDistribution};
use crate::error::{Error, Result};
use crate::lp::{self, Feasibility, LpOptions};
use crate::multigraph::{enumerate_relevant_graphs, graph_value, Multigraph};
use crate::predicate::Predicate;
use crate::rng::{stream, Rng};
use crate::scalar::{Dyadic, Scalar};

/// Atom weights are snapped to multiples of `2^-SNAP_BITS` before the exact re-solve.
pub const SNAP_BITS: u32 = 20;

/// The canonical graph list together with the coefficients `P̂(S_t)`.
#[derive(Clone, Debug)]
pub struct GraphTable {
    pub m: usize,
    pub graphs: Vec<Multigraph>,
    pub coefficients: Vec<Dyadic>,
}

impl GraphTable {
    pub fn new(p: &Predicate, m: usize) -> Self {
        let graphs = enumerate_relevant_graphs(p, m);
        let coefficients = graphs.iter().map(|g| p.coefficient(g.vertices())).collect();
        GraphTable { m, graphs, coefficients }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// `q(ρ)`.
    pub fn q<T: Scalar>(&self, rho: &CorrelationMatrix<T>) -> Vec<T> {
        self.graphs.iter().map(|g| graph_value(rho, g)).collect()
    }

    /// `Σ_t γ_t ρ(G_t)`.
    pub fn functional(&self, gamma: &[f64], rho: &CorrelationMatrix<f64>) -> f64 {
        dot(gamma, &self.q(rho))
    }
}

/// One weighted atom `(λ, μ, ρ)` of a vanishing distribution.
#[derive(Clone, Debug)]
pub struct CertificateAtom {
    pub weight: BigRational,
    pub distribution: SupportedDistribution<BigRational>,
    pub correlation: CorrelationMatrix<BigRational>,
}

/// Primal evidence: a finite distribution over P-supported matrices.
/// `exact` marks certificates whose weights solve the vanishing system in
/// rational arithmetic; float-grade ones only meet the tolerance.
#[derive(Clone, Debug)]
pub struct VanishingCertificate {
    pub m: usize,
    pub exact: bool,
    pub atoms: Vec<CertificateAtom>,
}

impl VanishingCertificate {
    /// Single atom with weight one.
    pub fn singleton(p: &Predicate, m: usize, dist: Distribution<BigRational>) -> Result<Self> {
        let distribution = SupportedDistribution::new(p, dist)?;
        let correlation = distribution.correlation_matrix();
        Ok(VanishingCertificate {
            m,
            exact: true,
            atoms: vec![CertificateAtom { weight: BigRational::one(), distribution, correlation }],
        })
    }

    /// Weighted matrices in float form, as used by the dictatorship test.
    pub fn weighted_matrices(&self) -> Vec<(f64, CorrelationMatrix<f64>)> {
        self.atoms
            .iter()
            .map(|a| (Scalar::to_f64(&a.weight), a.correlation.to_f64()))
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VanishingReport {
    pub m: usize,
    pub graph_count: usize,
    pub atom_count: usize,
    pub exact: bool,
    /// `Λ(G_t)` for every graph, as floats.
    pub values: Vec<f64>,
    pub max_abs_value: f64,
    pub valid: bool,
}

/// Checks a primal certificate against the graph list for `(p, m)`.
///
/// Structural defects (bad weights, unsupported atoms, inconsistent
/// correlations, too many atoms) are errors; a nonzero `Λ(G_t)` yields a
/// report with `valid == false`.
pub fn validate_vanishing(p: &Predicate, m: usize, cert: &VanishingCertificate, tol: f64) -> Result<VanishingReport> {
    let table = GraphTable::new(p, m);
    if cert.atoms.is_empty() {
        return Err(Error::InvalidCertificate("no atoms".into()));
    }
    if cert.atoms.len() > table.len() + 1 {
        return Err(Error::InvalidCertificate(format!(
            "{} atoms exceeds the support bound {}",
            cert.atoms.len(),
            table.len() + 1
        )));
    }
    let mut total = BigRational::zero();
    for (n, atom) in cert.atoms.iter().enumerate() {
        if atom.weight < BigRational::zero() {
            return Err(Error::InvalidCertificate(format!("atom {n} has negative weight")));
        }
        total += atom.weight.clone();
        if atom.distribution.arity() != p.arity() || atom.correlation.dim() != p.arity() {
            return Err(Error::InvalidCertificate(format!("atom {n} has the wrong arity")));
        }
        if let Some(x) = atom.distribution.support_violation(p) {
            return Err(Error::InvalidCertificate(format!("atom {n} puts mass on unsatisfying point {x:#x}")));
        }
        let own = atom.distribution.correlation_matrix();
        let consistent = if cert.exact {
            own == atom.correlation
        } else {
            own.max_abs_diff(&atom.correlation) <= tol
        };
        if !consistent {
            return Err(Error::InvalidCertificate(format!(
                "atom {n}: correlation matrix does not match its distribution"
            )));
        }
    }
    let weights_ok = if cert.exact {
        total == BigRational::one()
    } else {
        (Scalar::to_f64(&total) - 1.0).abs() <= tol.max(1e-12)
    };
    if !weights_ok {
        return Err(Error::InvalidCertificate(format!("weights sum to {total}")));
    }

    let exact_values: Vec<BigRational> = table
        .graphs
        .iter()
        .map(|g| {
            cert.atoms
                .iter()
                .fold(BigRational::zero(), |acc, a| acc + a.weight.clone() * graph_value(&a.correlation, g))
        })
        .collect();
    let values: Vec<f64> = exact_values.iter().map(Scalar::to_f64).collect();
    let max_abs_value = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let valid = if cert.exact {
        exact_values.iter().all(Zero::is_zero)
    } else {
        max_abs_value <= tol
    };
    Ok(VanishingReport {
        m,
        graph_count: table.len(),
        atom_count: cert.atoms.len(),
        exact: cert.exact,
        values,
        max_abs_value,
        valid,
    })
}

/// Result of scaling `γ` so the rounding probabilities sum to at most one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalizationReport {
    /// Divisor `f` applied to `γ`.
    pub factor: f64,
    pub doublings: u32,
    /// Truncation level `B`.
    pub b: f64,
    pub tau: f64,
    pub gamma_scaled: Vec<f64>,
    /// `δ' = δ / f`.
    pub margin_scaled: f64,
    /// Predicted advantage `δ'/4` over the density.
    pub advantage: f64,
    /// `|γ'_t / P̂(S_t)| · B^{|S_t|}` per graph.
    pub probabilities: Vec<f64>,
    /// `1 - Σ_t probabilities_t`.
    pub residual: f64,
}

/// Dual evidence: `Σ_t γ_t ρ(G_t) ≥ δ` for every P-supported `ρ`, with `‖γ‖∞ ≤ 1`.
#[derive(Clone, Debug)]
pub struct SeparationCertificate {
    pub m: usize,
    pub gamma: Vec<f64>,
    pub margin: f64,
    /// Minimum found by the confirmation run (four times the restarts).
    pub confirm_margin: f64,
    pub oracle_restarts: usize,
    pub normalization: NormalizationReport,
}

/// Finds `f` (by doubling) with `Σ_t |γ_t/(f·P̂(S_t))| · B^{|S_t|} ≤ 1`, where
/// `τ = δ'/(4M)` and `B = 2·⌈(2m ln(1/τ))^{m/2}⌉` unless `b_override` fixes it.
pub fn normalize_hyperplane(
    gamma: &[f64],
    margin: f64,
    table: &GraphTable,
    b_override: Option<f64>,
) -> Result<NormalizationReport> {
    if margin.is_nan() || margin <= 0.0 {
        return Err(Error::NonPositiveMargin(margin));
    }
    if gamma.len() != table.len() {
        return Err(Error::DimensionMismatch { expected: table.len(), got: gamma.len() });
    }
    if gamma.iter().all(|g| *g == 0.0) {
        return Err(Error::InvalidCertificate("hyperplane is zero".into()));
    }
    const MAX_DOUBLINGS: u32 = 1024;
    let big_m = table.len() as f64;
    let m = table.m as f64;
    let mut factor = 1.0f64;
    for doublings in 0..=MAX_DOUBLINGS {
        let margin_scaled = margin / factor;
        let tau = margin_scaled / (4.0 * big_m);
        let b = b_override.unwrap_or_else(|| {
            let log = (1.0 / tau).ln().max(0.0);
            (2.0 * m * log).powf(m / 2.0).ceil().max(1.0) * 2.0
        });
        let probabilities: Vec<f64> = gamma
            .iter()
            .zip(&table.coefficients)
            .zip(&table.graphs)
            .map(|((g, c), graph)| (g / factor / c.to_f64()).abs() * b.powi(graph.vertices().len() as i32))
            .collect();
        let total: f64 = probabilities.iter().sum();
        if total <= 1.0 {
            return Ok(NormalizationReport {
                factor,
                doublings,
                b,
                tau,
                gamma_scaled: gamma.iter().map(|g| g / factor).collect(),
                margin_scaled,
                advantage: margin_scaled / 4.0,
                probabilities,
                residual: 1.0 - total,
            });
        }
        factor *= 2.0;
    }
    Err(Error::NormalizationDiverged(MAX_DOUBLINGS as usize))
}

/// Antipodal pairs `{x, -x}` of satisfying points and their pair products.
struct PairBasis {
    predicate: Predicate,
    k: usize,
    reps: Vec<u32>,
    /// `signs[p][e] = x_i x_j` for the e-th pair `(i, j)`, `i < j`.
    signs: Vec<Vec<f64>>,
    edge_index: Vec<usize>,
}

impl PairBasis {
    fn new(p: &Predicate) -> Result<Self> {
        p.require_even()?;
        let k = p.arity();
        let reps: Vec<u32> = p.satisfying_points().filter(|&x| x < negate(x, k)).collect();
        if reps.is_empty() {
            return Err(Error::InvalidDistribution("predicate has no satisfying points".into()));
        }
        let mut edge_index = vec![usize::MAX; k * k];
        let mut e = 0;
        for i in 0..k {
            for j in i + 1..k {
                edge_index[i * k + j] = e;
                edge_index[j * k + i] = e;
                e += 1;
            }
        }
        let signs = reps
            .iter()
            .map(|&x| {
                let mut row = vec![0.0; e];
                for i in 0..k {
                    for j in i + 1..k {
                        row[edge_index[i * k + j]] = (coord(x, i) * coord(x, j)) as f64;
                    }
                }
                row
            })
            .collect();
        Ok(PairBasis { predicate: p.clone(), k, reps, signs, edge_index })
    }

    fn len(&self) -> usize {
        self.reps.len()
    }

    fn edges(&self, g: &Multigraph) -> Vec<usize> {
        g.edges().iter().map(|&(i, j)| self.edge_index[i * self.k + j]).collect()
    }

    fn pair_products(&self, w: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.signs.first().map_or(0, Vec::len)];
        for (wp, row) in w.iter().zip(&self.signs) {
            if *wp != 0.0 {
                for (re, s) in r.iter_mut().zip(row) {
                    *re += wp * s;
                }
            }
        }
        r
    }

    fn distribution(&self, w: &[f64]) -> Result<SupportedDistribution<f64>> {
        let atoms = self.reps.iter().zip(w).flat_map(|(&x, &wp)| {
            let h = wp.max(0.0) / 2.0;
            [(x, h), (negate(x, self.k), h)]
        });
        SupportedDistribution::new(&self.predicate, Distribution::normalized(self.k, atoms.collect::<Vec<_>>())?)
    }

    /// Exact distribution from weights snapped to `2^-bits` multiples.
    fn snapped(&self, w: &[f64], bits: u32) -> Result<Distribution<BigRational>> {
        let unit = 1i64 << bits;
        let mut units: Vec<i64> = w.iter().map(|x| (x.max(0.0) * unit as f64).round() as i64).collect();
        let diff = unit - units.iter().sum::<i64>();
        let top = (0..units.len()).max_by(|&a, &b| units[a].cmp(&units[b]).then(b.cmp(&a))).unwrap_or(0);
        units[top] += diff;
        if units[top] < 0 {
            return Err(Error::InvalidDistribution("snapping produced a negative weight".into()));
        }
        let atoms = self.reps.iter().zip(&units).flat_map(|(&x, &u)| {
            let h = BigRational::from_ratio(u, 2 * unit);
            [(x, h.clone()), (negate(x, self.k), h)]
        });
        Distribution::new(self.k, atoms.collect::<Vec<_>>())
    }

    /// Exact conversion of float weights, renormalised.
    fn exact_from_float(&self, w: &[f64]) -> Result<Distribution<BigRational>> {
        let two = BigRational::from_ratio(2, 1);
        let atoms = self.reps.iter().zip(w).flat_map(|(&x, &wp)| {
            let h = <BigRational as Scalar>::from_f64(wp.max(0.0)) / two.clone();
            [(x, h.clone()), (negate(x, self.k), h)]
        });
        Distribution::normalized(self.k, atoms.collect::<Vec<_>>())
    }
}

/// `F(w) = Σ_t g_t ∏_{e∈G_t} r_e(w)` and its gradient in `w`.
struct Objective<'a> {
    basis: &'a PairBasis,
    graphs: Vec<Vec<usize>>,
    g: &'a [f64],
}

impl Objective<'_> {
    fn value_at_r(&self, r: &[f64]) -> f64 {
        self.graphs
            .iter()
            .zip(self.g)
            .filter(|(_, gt)| **gt != 0.0)
            .map(|(edges, gt)| gt * edges.iter().map(|&e| r[e]).product::<f64>())
            .sum()
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.value_at_r(&self.basis.pair_products(w))
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let r = self.basis.pair_products(w);
        let mut grad_r = vec![0.0; r.len()];
        for (edges, &gt) in self.graphs.iter().zip(self.g) {
            if gt == 0.0 {
                continue;
            }
            let n = edges.len();
            let mut prefix = vec![1.0; n + 1];
            for a in 0..n {
                prefix[a + 1] = prefix[a] * r[edges[a]];
            }
            let mut suffix = 1.0;
            for a in (0..n).rev() {
                grad_r[edges[a]] += gt * prefix[a] * suffix;
                suffix *= r[edges[a]];
            }
        }
        self.basis.signs.iter().map(|row| dot(row, &grad_r)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub restarts: usize,
    /// Projected-gradient steps per start.
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { restarts: 64, max_steps: 400, seed: 0 }
    }
}

/// Best P-supported point found for a direction `g`.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub distribution: SupportedDistribution<f64>,
    pub correlation: CorrelationMatrix<f64>,
    pub q: Vec<f64>,
    /// `Σ_t g_t ρ(G_t)` at the returned point.
    pub value: f64,
    pub starts: usize,
    pair_weights: Vec<f64>,
}

/// Approximately minimises `Σ_t g_t ρ(G_t)` over P-supported `ρ` by
/// multi-start projected gradient on antipodal-pair weights. Starts are the
/// best simplex vertices, the uniform point, and random Dirichlet points;
/// restart `r` of call `call` draws from stream `(call << 24) | r`.
pub fn separation_oracle(
    p: &Predicate,
    table: &GraphTable,
    g: &[f64],
    opts: &OracleOptions,
    call: u64,
) -> Result<OracleResult> {
    let basis = PairBasis::new(p)?;
    run_oracle(&basis, table, g, opts, call)
}

fn run_oracle(basis: &PairBasis, table: &GraphTable, g: &[f64], opts: &OracleOptions, call: u64) -> Result<OracleResult> {
    if g.len() != table.len() {
        return Err(Error::DimensionMismatch { expected: table.len(), got: g.len() });
    }
    let obj = Objective { basis, graphs: table.graphs.iter().map(|gr| basis.edges(gr)).collect(), g };
    let np = basis.len();
    let restarts = opts.restarts.max(1);

    let mut vertex_values: Vec<(f64, usize)> = (0..np)
        .map(|p| (obj.value_at_r(&basis.signs[p]), p))
        .collect();
    vertex_values.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let vertex_starts = (restarts / 4).max(1).min(np);

    let results: Vec<(f64, Vec<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(opts.seed, (call << 24) | r as u64);
            let start = if r < vertex_starts {
                let mut w = vec![0.0; np];
                w[vertex_values[r].1] = 1.0;
                w
            } else if r == vertex_starts {
                vec![1.0 / np as f64; np]
            } else {
                random_simplex_point(np, &mut rng)
            };
            projected_descent(&obj, start, opts.max_steps)
        })
        .collect();

    let (_, w) = results
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.0.total_cmp(&b.0).then(ia.cmp(ib)))
        .map(|(_, best)| best)
        .expect("at least one restart");
    let distribution = basis.distribution(&w)?;
    let correlation = distribution.correlation_matrix();
    let q = table.q(&correlation);
    Ok(OracleResult { value: dot(g, &q), distribution, correlation, q, starts: restarts, pair_weights: w })
}

/// Dirichlet(1) draw, sometimes restricted to a random subset for sparsity.
fn random_simplex_point(n: usize, rng: &mut Rng) -> Vec<f64> {
    let sparse = n > 2 && rng.random_bool(0.5);
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            let keep = !sparse || rng.random_bool(0.3);
            if keep { rng.sample::<f64, _>(Exp1) } else { 0.0 }
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        w[rng.random_range(0..n)] = 1.0;
        return w;
    }
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn projected_descent(obj: &Objective<'_>, mut w: Vec<f64>, max_steps: usize) -> (f64, Vec<f64>) {
    let mut f = obj.value(&w);
    let mut eta = 1.0f64;
    for _ in 0..max_steps {
        let grad = obj.gradient(&w);
        let mut moved = false;
        while eta > 1e-14 {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a - eta * g).collect();
            let next = project_simplex(&trial);
            let decrease: f64 = grad.iter().zip(w.iter().zip(&next)).map(|(g, (a, b))| g * (a - b)).sum();
            let step = w.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if step < 1e-13 {
                break;
            }
            let fn_next = obj.value(&next);
            if fn_next <= f - 1e-4 * decrease {
                w = next;
                f = fn_next;
                eta = (eta * 2.0).min(1e6);
                moved = true;
                break;
            }
            eta *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (f, w)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Minimum norm treated as zero.
    pub primal_tol: f64,
    /// Smallest margin accepted for a hyperplane.
    pub dual_min: f64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub oracle_steps: usize,
    pub seed: u64,
    pub b_override: Option<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            primal_tol: 1e-9,
            dual_min: 1e-6,
            restarts: 64,
            max_iterations: 500,
            oracle_steps: 400,
            seed: 0,
            b_override: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchStats {
    pub graph_count: usize,
    pub iterations: usize,
    pub oracle_calls: u64,
    /// Norm of the final minimum-norm point.
    pub final_norm: f64,
    /// Last `‖x‖² - min ⟨x, q⟩` reported by the oracle.
    pub final_gap: f64,
    pub note: String,
}

#[derive(Clone, Debug)]
pub enum SearchOutcome {
    Primal(VanishingCertificate, SearchStats),
    Dual(SeparationCertificate, SearchStats),
    Inconclusive(SearchStats),
}

impl SearchOutcome {
    pub fn stats(&self) -> &SearchStats {
        match self {
            SearchOutcome::Primal(_, s) | SearchOutcome::Dual(_, s) | SearchOutcome::Inconclusive(s) => s,
        }
    }
}

struct CorralPoint {
    q: Vec<f64>,
    w: Vec<f64>,
}

/// Decides whether the origin lies in `Q` for `(p, m)`; see the module docs.
pub fn search_vanishing(p: &Predicate, m: usize, opts: &SearchOptions) -> Result<SearchOutcome> {
    if m == 0 {
        return Err(Error::InvalidCertificate("edge budget m must be at least 1".into()));
    }
    let basis = PairBasis::new(p)?;
    let table = GraphTable::new(p, m);
    let oracle_opts = OracleOptions { restarts: opts.restarts, max_steps: opts.oracle_steps, seed: opts.seed };
    let mut stats = SearchStats {
        graph_count: table.len(),
        iterations: 0,
        oracle_calls: 0,
        final_norm: f64::NAN,
        final_gap: f64::NAN,
        note: String::new(),
    };

    let uniform = vec![1.0 / basis.len() as f64; basis.len()];
    let q0 = table.q(&basis.distribution(&uniform)?.correlation_matrix());
    let mut corral = vec![CorralPoint { q: q0, w: uniform }];
    let mut lambda = vec![1.0];
    let mut x = corral[0].q.clone();

    for iter in 0..opts.max_iterations {
        stats.iterations = iter + 1;
        let norm2 = dot(&x, &x);
        stats.final_norm = norm2.sqrt();
        if stats.final_norm <= opts.primal_tol {
            return primal_outcome(p, &table, &basis, &corral, &lambda, opts, stats);
        }
        let res = run_oracle(&basis, &table, &x, &oracle_opts, stats.oracle_calls)?;
        stats.oracle_calls += 1;
        let scale = corral.iter().map(|c| dot(&c.q, &c.q)).fold(1.0, f64::max);
        let gap = norm2 - res.value;
        stats.final_gap = gap;
        let duplicate = corral.iter().any(|c| c.w == res.pair_weights);
        if gap <= 1e-12 * scale || duplicate {
            return dual_outcome(&basis, &table, x, res.value, &oracle_opts, opts, stats);
        }
        corral.push(CorralPoint { q: res.q, w: res.pair_weights });
        lambda.push(0.0);
        minor_cycles(&mut corral, &mut lambda);
        x = combination(&corral, &lambda);
    }
    stats.note = "iteration budget exhausted".into();
    Ok(SearchOutcome::Inconclusive(stats))
}

fn combination(corral: &[CorralPoint], lambda: &[f64]) -> Vec<f64> {
    let dim = corral[0].q.len();
    let mut x = vec![0.0; dim];
    for (c, l) in corral.iter().zip(lambda) {
        for (xi, qi) in x.iter_mut().zip(&c.q) {
            *xi += l * qi;
        }
    }
    x
}

/// Affine minimiser of the corral: `argmin ‖Σ α_i p_i‖` subject to `Σ α_i = 1`.
fn affine_minimizer(corral: &[CorralPoint]) -> Vec<f64> {
    let n = corral.len();
    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = dot(&corral[i].q, &corral[j].q);
        }
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n + 1);
    b[n] = 1.0;
    let sol = a.clone().svd(true, true).solve(&b, 1e-13).unwrap_or_else(|_| {
        let mut fallback = DVector::zeros(n + 1);
        fallback[n - 1] = 1.0;
        fallback
    });
    let alpha: Vec<f64> = sol.iter().take(n).copied().collect();
    let total: f64 = alpha.iter().sum();
    alpha.iter().map(|v| v / total).collect()
}

fn minor_cycles(corral: &mut Vec<CorralPoint>, lambda: &mut Vec<f64>) {
    const DROP: f64 = 1e-15;
    loop {
        let alpha = affine_minimizer(corral);
        if alpha.iter().all(|&a| a > DROP) {
            *lambda = alpha;
            return;
        }
        let theta = lambda
            .iter()
            .zip(&alpha)
            .filter(|(_, &a)| a <= DROP)
            .map(|(&l, &a)| l / (l - a))
            .fold(1.0f64, f64::min)
            .clamp(0.0, 1.0);
        for (l, a) in lambda.iter_mut().zip(&alpha) {
            *l = theta * a + (1.0 - theta) * *l;
        }
        let mut n = 0;
        while n < corral.len() {
            if lambda[n] <= DROP {
                corral.remove(n);
                lambda.remove(n);
            } else {
                n += 1;
            }
        }
        if corral.is_empty() {
            unreachable!("minor cycle dropped every point");
        }
        let total: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|l| *l /= total);
        if corral.len() == 1 {
            lambda[0] = 1.0;
            return;
        }
    }
}

fn exact_atom(dist: Distribution<BigRational>, p: &Predicate, weight: BigRational) -> Result<CertificateAtom> {
    let distribution = SupportedDistribution::new(p, dist)?;
    let correlation = distribution.correlation_matrix();
    Ok(CertificateAtom { weight, distribution, correlation })
}

/// Merges atoms with identical distributions and drops zero weights.
fn merge_atoms(atoms: Vec<CertificateAtom>) -> Vec<CertificateAtom> {
    let mut merged: BTreeMap<String, CertificateAtom> = BTreeMap::new();
    for atom in atoms {
        if atom.weight.is_zero() {
            continue;
        }
        let key = format!("{:?}", atom.distribution.atoms().collect::<Vec<_>>());
        merged
            .entry(key)
            .and_modify(|a| a.weight += atom.weight.clone())
            .or_insert(atom);
    }
    merged.into_values().collect()
}

fn primal_outcome(
    p: &Predicate,
    table: &GraphTable,
    basis: &PairBasis,
    corral: &[CorralPoint],
    lambda: &[f64],
    opts: &SearchOptions,
    mut stats: SearchStats,
) -> Result<SearchOutcome> {
    let tol = opts.primal_tol;
    if let Some(cert) = exact_primal(p, table, basis, corral)? {
        if validate_vanishing(p, table.m, &cert, tol)?.valid {
            stats.note = "exact certificate".into();
            return Ok(SearchOutcome::Primal(cert, stats));
        }
    }
    let mut atoms = Vec::new();
    let total: f64 = lambda.iter().sum();
    for (c, &l) in corral.iter().zip(lambda) {
        let weight = <BigRational as Scalar>::from_f64(l / total);
        atoms.push(exact_atom(basis.exact_from_float(&c.w)?, p, weight)?);
    }
    let mut atoms = merge_atoms(atoms);
    let sum = atoms.iter().fold(BigRational::zero(), |a, x| a + x.weight.clone());
    for a in &mut atoms {
        a.weight = a.weight.clone() / sum.clone();
    }
    let cert = VanishingCertificate { m: table.m, exact: false, atoms };
    if validate_vanishing(p, table.m, &cert, tol)?.valid {
        stats.note = "float-grade certificate (exact re-solve failed)".into();
        return Ok(SearchOutcome::Primal(cert, stats));
    }
    stats.note = "minimum norm reached zero but no certificate validated".into();
    Ok(SearchOutcome::Inconclusive(stats))
}

/// Snaps corral atoms to dyadic weights and re-solves the vanishing system exactly.
fn exact_primal(
    p: &Predicate,
    table: &GraphTable,
    basis: &PairBasis,
    corral: &[CorralPoint],
) -> Result<Option<VanishingCertificate>> {
    let mut dists = Vec::with_capacity(corral.len());
    let mut qs = Vec::with_capacity(corral.len());
    for c in corral {
        let d = basis.snapped(&c.w, SNAP_BITS)?;
        qs.push(table.q(&d.correlation_matrix()));
        dists.push(d);
    }
    let mut a = vec![vec![BigRational::one(); corral.len()]];
    let mut b = vec![BigRational::one()];
    for t in 0..table.len() {
        a.push(qs.iter().map(|q| q[t].clone()).collect());
        b.push(BigRational::zero());
    }
    match lp::feasibility(&a, &b, &LpOptions::default())? {
        Feasibility::Feasible(weights) => {
            let atoms = dists
                .into_iter()
                .zip(weights)
                .map(|(d, w)| exact_atom(d, p, w))
                .collect::<Result<Vec<_>>>()?;
            Ok(Some(VanishingCertificate { m: table.m, exact: true, atoms: merge_atoms(atoms) }))
        }
        Feasibility::Infeasible { .. } => Ok(None),
    }
}

fn dual_outcome(
    basis: &PairBasis,
    table: &GraphTable,
    gamma: Vec<f64>,
    margin: f64,
    oracle_opts: &OracleOptions,
    opts: &SearchOptions,
    mut stats: SearchStats,
) -> Result<SearchOutcome> {
    if margin < opts.dual_min {
        stats.note = format!("minimum-norm point separated only by {margin:e}");
        return Ok(SearchOutcome::Inconclusive(stats));
    }
    let confirm_opts = OracleOptions { restarts: oracle_opts.restarts * 4, ..oracle_opts.clone() };
    // Fresh streams: confirmation calls live above every search call index.
    let confirm = run_oracle(basis, table, &gamma, &confirm_opts, (1 << 39) + stats.oracle_calls)?;
    stats.oracle_calls += 1;
    let confirmed = margin.min(confirm.value);
    if confirmed < opts.dual_min {
        stats.note = format!("confirmation run found margin {confirmed:e}");
        return Ok(SearchOutcome::Inconclusive(stats));
    }
    let normalization = normalize_hyperplane(&gamma, confirmed, table, opts.b_override)?;
    stats.note = "separating hyperplane confirmed".into();
    Ok(SearchOutcome::Dual(
        SeparationCertificate {
            m: table.m,
            gamma,
            margin: confirmed,
            confirm_margin: confirm.value,
            oracle_restarts: confirm_opts.restarts,
            normalization,
        },
        stats,
    ))
}
