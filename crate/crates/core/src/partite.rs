//! k-partite instances, vector/local-distribution solutions, and the
//! hyperplane-driven rounding algorithm.
//!
//! Variables are indexed layer-major: variable `j` of layer `i` lives at
//! `i * n + j` in every flat array.

use std::collections::{BTreeMap, HashMap};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bits::{coord, VertexSet};
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::gaussian::semidefinite_cholesky;
use crate::multigraph::Multigraph;
use crate::predicate::Predicate;
use crate::rng::{mc_mean, Estimate, Rng};
use crate::scalar::Scalar;
use crate::vanishing::{GraphTable, SeparationCertificate};

/// One constraint `P(b_1 x_{1,j_1}, …, b_k x_{k,j_k})`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub vars: Vec<usize>,
    pub signs: Vec<i8>,
}

impl Constraint {
    /// Literal values `b_l · a_{l, j_l}` as a point index.
    fn literal_point(&self, n: usize, a: &[i8]) -> u32 {
        let mut x = 0u32;
        for (l, (&j, &b)) in self.vars.iter().zip(&self.signs).enumerate() {
            if b * a[l * n + j] < 0 {
                x |= 1 << l;
            }
        }
        x
    }
}

#[derive(Clone, Debug)]
pub struct PartiteInstance {
    pub predicate: Predicate,
    pub n: usize,
    pub constraints: Vec<Constraint>,
}

impl PartiteInstance {
    pub fn new(predicate: Predicate, n: usize, constraints: Vec<Constraint>) -> Result<Self> {
        let k = predicate.arity();
        if n == 0 {
            return Err(Error::ShapeMismatch("layers must have at least one variable".into()));
        }
        for (c, con) in constraints.iter().enumerate() {
            if con.vars.len() != k || con.signs.len() != k {
                return Err(Error::ShapeMismatch(format!("constraint {c} must touch exactly one variable per layer")));
            }
            if let Some(&j) = con.vars.iter().find(|&&j| j >= n) {
                return Err(Error::ShapeMismatch(format!("constraint {c} uses variable {j} >= n = {n}")));
            }
            if let Some(&b) = con.signs.iter().find(|&&b| b != 1 && b != -1) {
                return Err(Error::NotASign(b as i64));
            }
        }
        Ok(PartiteInstance { predicate, n, constraints })
    }

    pub fn k(&self) -> usize {
        self.predicate.arity()
    }

    pub fn var_count(&self) -> usize {
        self.k() * self.n
    }

    /// Fraction of constraints satisfied by `a`.
    pub fn evaluate(&self, a: &Assignment) -> f64 {
        if self.constraints.is_empty() {
            return 1.0;
        }
        let sat = self
            .constraints
            .iter()
            .filter(|c| self.predicate.eval(c.literal_point(self.n, &a.values)))
            .count();
        sat as f64 / self.constraints.len() as f64
    }

    /// Mean satisfied fraction of uniformly random assignments.
    pub fn random_baseline(&self, seed: u64, stream_base: u64, rounds: u64) -> Estimate {
        mc_mean(seed, stream_base, rounds, |rng| self.evaluate(&Assignment::random(self.k(), self.n, rng)))
    }

    /// Sum over constraints of the multilinear extension at `α`.
    pub fn multilinear_value<T: Scalar>(&self, alpha: &[T]) -> T {
        let terms = self.predicate.fourier_terms::<T>();
        self.constraints
            .iter()
            .fold(T::zero(), |acc, c| acc + constraint_value(&terms, c, self.n, alpha))
    }

    /// For each variable, the constraints that touch it.
    fn occurrences(&self) -> Vec<Vec<usize>> {
        let mut occ = vec![Vec::new(); self.var_count()];
        for (c, con) in self.constraints.iter().enumerate() {
            for (l, &j) in con.vars.iter().enumerate() {
                occ[l * self.n + j].push(c);
            }
        }
        occ
    }
}

fn constraint_value<T: Scalar>(terms: &[(u32, T)], c: &Constraint, n: usize, alpha: &[T]) -> T {
    terms.iter().fold(T::zero(), |acc, (set, coef)| {
        let mut prod = coef.clone();
        for (l, (&j, &b)) in c.vars.iter().zip(&c.signs).enumerate() {
            if set >> l & 1 == 1 {
                let y = alpha[l * n + j].clone();
                prod = prod * if b > 0 { y } else { -y };
            }
        }
        acc + prod
    })
}

/// Integral assignment in `{-1,1}^{k×n}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub k: usize,
    pub n: usize,
    pub values: Vec<i8>,
}

impl Assignment {
    pub fn random(k: usize, n: usize, rng: &mut Rng) -> Self {
        let values = (0..k * n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        Assignment { k, n, values }
    }
}

/// Fractional assignment in `[-1,1]^{k×n}` (untruncated monomial rounding may
/// leave the range; see [`round_monomial`]).
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalAssignment {
    pub k: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

/// Unit vectors per variable plus a local distribution per constraint. Local
/// distributions live on the constraint's variables (not literals), with
/// coordinate `l` the variable from layer `l`.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub k: usize,
    pub n: usize,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    pub locals: Vec<Distribution<f64>>,
}

impl SdpSolution {
    pub fn vector(&self, layer: usize, j: usize) -> &[f64] {
        &self.vectors[layer * self.n + j]
    }
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds a value-1 instance around a pool of planted assignments.
///
/// Each constraint draws variables and signs uniformly and is kept only when
/// every pool member satisfies it (negations then do too, as `P` is even).
/// The solution comes from the uniform mixture over `{±σ}`.
pub fn gen_planted(
    p: &Predicate,
    n: usize,
    constraint_count: usize,
    pool: &[Vec<i8>],
    rng: &mut Rng,
    max_attempts: usize,
) -> Result<(PartiteInstance, SdpSolution)> {
    p.require_even()?;
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let k = p.arity();
    for sigma in pool {
        if sigma.len() != k * n {
            return Err(Error::ShapeMismatch(format!("pool assignment has {} values, expected {}", sigma.len(), k * n)));
        }
        if let Some(&v) = sigma.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::NotASign(v as i64));
        }
    }

    let mut constraints = Vec::with_capacity(constraint_count);
    let mut attempts = 0usize;
    while constraints.len() < constraint_count {
        if attempts >= max_attempts {
            return Err(Error::RejectionBudget { attempts, accepted: constraints.len() });
        }
        attempts += 1;
        let con = Constraint {
            vars: (0..k).map(|_| rng.random_range(0..n)).collect(),
            signs: (0..k).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect(),
        };
        if pool.iter().all(|s| p.eval(con.literal_point(n, s))) {
            constraints.push(con);
        }
    }
    let inst = PartiteInstance::new(p.clone(), n, constraints)?;

    let size = k * n;
    let r = pool.len() as f64;
    let mut gram = nalgebra::DMatrix::<f64>::zeros(size, size);
    for u in 0..size {
        for w in u..size {
            let v = pool.iter().map(|s| (s[u] * s[w]) as f64).sum::<f64>() / r;
            gram[(u, w)] = v;
            gram[(w, u)] = v;
        }
    }
    let l = semidefinite_cholesky(&gram);
    let cols: Vec<usize> = (0..size).filter(|&c| (0..size).any(|u| l[(u, c)] != 0.0)).collect();
    let vectors = (0..size).map(|u| cols.iter().map(|&c| l[(u, c)]).collect()).collect();

    let locals = inst
        .constraints
        .iter()
        .map(|con| {
            let atoms = pool.iter().flat_map(|s| {
                let x = (0..k).fold(0u32, |x, l| if s[l * n + con.vars[l]] < 0 { x | 1 << l } else { x });
                let h = 1.0 / (2.0 * r);
                [(x, h), (crate::bits::negate(x, k), h)]
            });
            Distribution::normalized(k, atoms.collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let sol = SdpSolution { k, n, dim: cols.len(), vectors, locals };
    Ok((inst, sol))
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub max_norm_violation: f64,
    pub max_bias: f64,
    pub max_inner_product_violation: f64,
    pub max_marginal_violation: f64,
    /// Largest violation of any kind, per constraint.
    pub per_constraint: Vec<f64>,
    pub feasible: bool,
}

/// Checks unit norms, unbiased locals, vector/local agreement and marginal
/// consistency between constraints that share variables.
pub fn check_feasibility(inst: &PartiteInstance, sol: &SdpSolution, tol: f64) -> Result<FeasibilityReport> {
    let k = inst.k();
    let n = inst.n;
    if sol.k != k || sol.n != n || sol.vectors.len() != k * n || sol.locals.len() != inst.constraints.len() {
        return Err(Error::ShapeMismatch("solution does not match the instance".into()));
    }
    if sol.vectors.iter().any(|v| v.len() != sol.dim) || sol.locals.iter().any(|d| d.arity() != k) {
        return Err(Error::ShapeMismatch("ragged vectors or local distributions".into()));
    }
    let max_norm_violation = sol
        .vectors
        .iter()
        .map(|v| (inner(v, v) - 1.0).abs())
        .fold(0.0, f64::max);

    let mut per_constraint = vec![0.0f64; inst.constraints.len()];
    let mut max_bias = 0.0f64;
    let mut max_inner = 0.0f64;
    for (c, (con, mu)) in inst.constraints.iter().zip(&sol.locals).enumerate() {
        let bias = mu.biases().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let rho = mu.correlation_matrix();
        let mut worst_inner = 0.0f64;
        for a in 0..k {
            for b in a + 1..k {
                let ip = inner(sol.vector(a, con.vars[a]), sol.vector(b, con.vars[b]));
                worst_inner = worst_inner.max((ip - rho.get(a, b)).abs());
            }
        }
        max_bias = max_bias.max(bias);
        max_inner = max_inner.max(worst_inner);
        per_constraint[c] = bias.max(worst_inner);
    }

    // Marginals of each constraint on every subset of its layers, keyed by the
    // variables involved; constraints sharing a variable set must agree.
    let mut seen: HashMap<Vec<usize>, (usize, BTreeMap<u32, f64>)> = HashMap::new();
    let mut max_marginal = 0.0f64;
    for (c, (con, mu)) in inst.constraints.iter().zip(&sol.locals).enumerate() {
        for layers in VertexSet::full(k).subsets().filter(|s| !s.is_empty()) {
            let key: Vec<usize> = layers.iter().map(|l| l * n + con.vars[l]).collect();
            let mut marg: BTreeMap<u32, f64> = BTreeMap::new();
            for (x, w) in mu.atoms() {
                *marg.entry(x & layers.mask()).or_default() += *w;
            }
            match seen.get(&key) {
                Some((other, prev)) => {
                    let diff = prev
                        .keys()
                        .chain(marg.keys())
                        .map(|x| (prev.get(x).unwrap_or(&0.0) - marg.get(x).unwrap_or(&0.0)).abs())
                        .fold(0.0, f64::max);
                    max_marginal = max_marginal.max(diff);
                    per_constraint[c] = per_constraint[c].max(diff);
                    per_constraint[*other] = per_constraint[*other].max(diff);
                }
                None => {
                    seen.insert(key, (c, marg));
                }
            }
        }
    }
    let feasible = max_norm_violation <= tol && max_bias <= tol && max_inner <= tol && max_marginal <= tol;
    Ok(FeasibilityReport {
        max_norm_violation,
        max_bias,
        max_inner_product_violation: max_inner,
        max_marginal_violation: max_marginal,
        per_constraint,
        feasible,
    })
}

/// Mean over constraints of `E_{x∼μ_c}[P(b ⊙ x)]`.
pub fn objective(inst: &PartiteInstance, sol: &SdpSolution) -> f64 {
    if inst.constraints.is_empty() {
        return 1.0;
    }
    let k = inst.k();
    let total: f64 = inst
        .constraints
        .iter()
        .zip(&sol.locals)
        .map(|(con, mu)| {
            let flip = (0..k).fold(0u32, |m, l| if con.signs[l] < 0 { m | 1 << l } else { m });
            mu.atoms().filter(|(x, _)| inst.predicate.eval(x ^ flip)).map(|(_, w)| *w).sum::<f64>()
        })
        .sum();
    total / inst.constraints.len() as f64
}

/// Gaussian monomial rounding on the layers of `g`: one standard Gaussian
/// vector per edge, `β_{i,j} = ∏_{e∋i} ⟨g_e, v_{i,j}⟩`, and `α = β/B` when
/// `|β| ≤ B` (or always, with `truncate == false`). Other layers are 0.
pub fn round_monomial(sol: &SdpSolution, g: &Multigraph, b: f64, truncate: bool, rng: &mut Rng) -> FractionalAssignment {
    let gs: Vec<Vec<f64>> = g
        .edges()
        .iter()
        .map(|_| (0..sol.dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let mut values = vec![0.0; sol.k * sol.n];
    for layer in g.vertices().iter() {
        let incident: Vec<usize> = g
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, &(a, c))| a == layer || c == layer)
            .map(|(e, _)| e)
            .collect();
        for j in 0..sol.n {
            let v = sol.vector(layer, j);
            let beta: f64 = incident.iter().map(|&e| inner(&gs[e], v)).product();
            values[layer * sol.n + j] = if !truncate || beta.abs() <= b { beta / b } else { 0.0 };
        }
    }
    FractionalAssignment { k: sol.k, n: sol.n, values }
}

/// Uniform random subset of `s` with the requested size parity (rejection).
pub fn random_parity_subset(s: VertexSet, odd: bool, rng: &mut Rng) -> VertexSet {
    assert!(!s.is_empty() || !odd, "no odd subset of the empty set");
    loop {
        let pick = s.iter().filter(|_| rng.random_bool(0.5)).fold(0u32, |m, i| m | 1 << i);
        let cand = VertexSet(pick);
        if (cand.len() % 2 == 1) == odd {
            return cand;
        }
    }
}

/// Which branch a full-rounding run took.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalOutcome {
    /// Graph index `t`, or `None` for the residual (uniform random) branch.
    pub choice: Option<usize>,
    pub alpha: FractionalAssignment,
    pub flipped: VertexSet,
}

/// Steps 1 to 3 of the rounding: pick `t`, round the monomial on `S_t`, and
/// negate a random subset of `S_t` whose size parity follows
/// `sign(γ_t P̂(S_t))`. The residual branch returns a uniform ±1 assignment.
pub fn round_fractional(
    inst: &PartiteInstance,
    sol: &SdpSolution,
    cert: &SeparationCertificate,
    table: &GraphTable,
    rng: &mut Rng,
) -> Result<FractionalOutcome> {
    check_certificate(inst, cert, table)?;
    let norm = &cert.normalization;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let choice = norm.probabilities.iter().position(|pt| {
        acc += pt;
        u < acc
    });
    let Some(t) = choice else {
        let a = Assignment::random(inst.k(), inst.n, rng);
        let values = a.values.iter().map(|&v| v as f64).collect();
        return Ok(FractionalOutcome {
            choice: None,
            alpha: FractionalAssignment { k: a.k, n: a.n, values },
            flipped: VertexSet::EMPTY,
        });
    };
    let g = &table.graphs[t];
    let mut alpha = round_monomial(sol, g, norm.b, true, rng);
    let sign = norm.gamma_scaled[t].signum() * table.coefficients[t].signum() as f64;
    let flipped = random_parity_subset(g.vertices(), sign < 0.0, rng);
    for layer in flipped.iter() {
        for v in &mut alpha.values[layer * inst.n..(layer + 1) * inst.n] {
            *v = -*v;
        }
    }
    Ok(FractionalOutcome { choice: Some(t), alpha, flipped })
}

fn check_certificate(inst: &PartiteInstance, cert: &SeparationCertificate, table: &GraphTable) -> Result<()> {
    let n = &cert.normalization;
    if cert.m != table.m
        || cert.gamma.len() != table.len()
        || n.probabilities.len() != table.len()
        || n.gamma_scaled.len() != table.len()
    {
        return Err(Error::CertificateMismatch("certificate does not match the graph table".into()));
    }
    if table.graphs.iter().any(|g| g.vertices().iter().any(|v| v >= inst.k())) {
        return Err(Error::CertificateMismatch("graph table refers to layers beyond the predicate arity".into()));
    }
    let expected: Vec<_> = table.graphs.iter().map(|g| inst.predicate.coefficient(g.vertices())).collect();
    if expected != table.coefficients {
        return Err(Error::CertificateMismatch("Fourier coefficients differ from the instance predicate".into()));
    }
    Ok(())
}

/// Full rounding: [`round_fractional`] followed by [`greedy_integralize`].
pub fn round_full(
    inst: &PartiteInstance,
    sol: &SdpSolution,
    cert: &SeparationCertificate,
    table: &GraphTable,
    rng: &mut Rng,
) -> Result<(Assignment, FractionalOutcome)> {
    let frac = round_fractional(inst, sol, cert, table, rng)?;
    let a = greedy_integralize(inst, &frac.alpha.values);
    Ok((a, frac))
}

/// Fixes non-integral variables one at a time in layer-major order, each to
/// the sign that does not decrease the multilinear objective (ties to +1).
/// Variables already at ±1 are kept.
pub fn greedy_integralize<T: Scalar>(inst: &PartiteInstance, alpha: &[T]) -> Assignment {
    let terms = inst.predicate.fourier_terms::<T>();
    let occ = inst.occurrences();
    let n = inst.n;
    let one = T::one();
    let mut cur: Vec<T> = alpha.to_vec();
    for u in 0..inst.var_count() {
        if cur[u] == one || cur[u] == -one.clone() {
            continue;
        }
        let layer = u / n;
        let slope = occ[u].iter().fold(T::zero(), |acc, &c| {
            let con = &inst.constraints[c];
            let d = terms.iter().filter(|(s, _)| s >> layer & 1 == 1).fold(T::zero(), |a, (set, coef)| {
                let mut prod = coef.clone();
                for (l, (&j, &b)) in con.vars.iter().zip(&con.signs).enumerate() {
                    if set >> l & 1 == 1 {
                        let y = if l == layer { one.clone() } else { cur[l * n + j].clone() };
                        prod = prod * if b > 0 { y } else { -y };
                    }
                }
                a + prod
            });
            acc + d
        });
        cur[u] = if slope < T::zero() { -one.clone() } else { one.clone() };
    }
    let values = cur.iter().map(|v| if *v < T::zero() { -1 } else { 1 }).collect();
    Assignment { k: inst.k(), n, values }
}

/// Converts a layer-major ±1 vector for a constraint's local point order.
pub fn local_point(values: &[i8]) -> u32 {
    values.iter().enumerate().fold(0, |x, (l, &v)| if v < 0 { x | 1 << l } else { x })
}

/// Signs of `x` as `i8` (helper for building pools).
pub fn point_signs(x: u32, k: usize) -> Vec<i8> {
    (0..k).map(|i| coord(x, i)).collect()
}
