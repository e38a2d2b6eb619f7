//! Dense phase-one simplex for `A x = b, x ≥ 0` feasibility.
//!
//! Runs over any [`Scalar`]; with `BigRational` the verdicts are exact. Pivoting
//! uses Bland's rule, so the exact path cannot cycle.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outcome of a feasibility solve.
#[derive(Clone, Debug)]
pub enum Feasibility<T> {
    /// A nonnegative `x` with `A x = b`.
    Feasible(Vec<T>),
    /// Farkas ray: `yᵀA ≤ 0` componentwise while `yᵀb > 0`.
    Infeasible { ray: Vec<T>, residual: T },
}

#[derive(Clone, Debug)]
pub struct LpOptions {
    /// Pivot/feasibility tolerance for floating solves; ignored for exact types.
    pub tol: f64,
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { tol: 1e-10, max_pivots: 50_000 }
    }
}

/// Solves `A x = b, x ≥ 0` where `a` is given row-major (`rows × cols`).
pub fn feasibility<T: Scalar>(
    a: &[Vec<T>],
    b: &[T],
    opts: &LpOptions,
) -> Result<Feasibility<T>> {
    let rows = a.len();
    assert_eq!(rows, b.len(), "row count mismatch");
    let cols = a.first().map_or(0, |r| r.len());
    let width = cols + rows + 1;
    let rhs = width - 1;

    // Tableau: rows × [structural | artificial | rhs], then the reduced-cost row.
    let mut row_sign = vec![T::one(); rows];
    let mut tab: Vec<Vec<T>> = Vec::with_capacity(rows + 1);
    for (i, (ai, bi)) in a.iter().zip(b).enumerate() {
        assert_eq!(ai.len(), cols, "ragged constraint matrix");
        let flip = *bi < T::zero();
        if flip {
            row_sign[i] = -T::one();
        }
        let mut row = vec![T::zero(); width];
        for (j, v) in ai.iter().enumerate() {
            row[j] = if flip { -v.clone() } else { v.clone() };
        }
        row[cols + i] = T::one();
        row[rhs] = if flip { -bi.clone() } else { bi.clone() };
        tab.push(row);
    }
    let mut cost = vec![T::zero(); width];
    for row in &tab {
        for j in 0..cols {
            cost[j] = cost[j].clone() - row[j].clone();
        }
        cost[rhs] = cost[rhs].clone() - row[rhs].clone();
    }
    tab.push(cost);
    let mut basis: Vec<usize> = (0..rows).map(|i| cols + i).collect();

    let tol = opts.tol;
    let negative = |v: &T| if T::EXACT { *v < T::zero() } else { v.to_f64() < -tol };
    let positive = |v: &T| if T::EXACT { *v > T::zero() } else { v.to_f64() > tol };

    let mut pivots = 0usize;
    loop {
        // Bland: lowest-index column with negative reduced cost.
        let entering = (0..cols + rows).find(|&j| negative(&tab[rows][j]));
        let Some(e) = entering else { break };
        let mut leave: Option<(usize, T)> = None;
        for i in 0..rows {
            if positive(&tab[i][e]) {
                let ratio = tab[i][rhs].clone() / tab[i][e].clone();
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < *lr || (!(ratio > *lr) && basis[i] < basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase one is bounded below by zero, so an entering column always has a pivot row.
        let Some((r, _)) = leave else { break };
        pivot(&mut tab, r, e);
        basis[r] = e;
        pivots += 1;
        if pivots > opts.max_pivots {
            return Err(Error::LpIterationLimit(opts.max_pivots));
        }
    }

    let residual = -tab[rows][rhs].clone();
    if positive(&residual) {
        // Duals of the sign-adjusted system: reduced cost of artificial i is 1 - y'_i.
        let ray = (0..rows)
            .map(|i| (T::one() - tab[rows][cols + i].clone()) * row_sign[i].clone())
            .collect();
        return Ok(Feasibility::Infeasible { ray, residual });
    }
    let mut x = vec![T::zero(); cols];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < cols {
            let v = tab[i][rhs].clone();
            x[bv] = if v < T::zero() { T::zero() } else { v };
        }
    }
    Ok(Feasibility::Feasible(x))
}

fn pivot<T: Scalar>(tab: &mut [Vec<T>], r: usize, e: usize) {
    let p = tab[r][e].clone();
    for v in tab[r].iter_mut() {
        *v = v.clone() / p.clone();
    }
    let pivot_row = tab[r].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let factor = row[e].clone();
        if factor.is_zero() {
            continue;
        }
        for (v, pv) in row.iter_mut().zip(&pivot_row) {
            if !pv.is_zero() {
                *v = v.clone() - factor.clone() * pv.clone();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    fn check_farkas(a: &[Vec<BigRational>], b: &[BigRational], ray: &[BigRational]) {
        for j in 0..a[0].len() {
            let s: BigRational = a.iter().zip(ray).map(|(r, y)| r[j].clone() * y.clone()).sum();
            assert!(s <= q(0, 1), "column {j} has yᵀA = {s}");
        }
        let yb: BigRational = b.iter().zip(ray).map(|(bi, y)| bi.clone() * y.clone()).sum();
        assert!(yb > q(0, 1));
    }

    #[test]
    fn exact_feasible_solution_satisfies_constraints() {
        // x1 + x2 + x3 = 1, x1 - x3 = 1/4
        let a = vec![vec![q(1, 1), q(1, 1), q(1, 1)], vec![q(1, 1), q(0, 1), q(-1, 1)]];
        let b = vec![q(1, 1), q(1, 4)];
        match feasibility(&a, &b, &LpOptions::default()).unwrap() {
            Feasibility::Feasible(x) => {
                for (row, bi) in a.iter().zip(&b) {
                    let s: BigRational = row.iter().zip(&x).map(|(a, x)| a * x).sum();
                    assert_eq!(&s, bi);
                }
                assert!(x.iter().all(|v| *v >= q(0, 1)));
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn exact_infeasible_returns_farkas_ray() {
        // x1 + x2 = 1, x1 + x2 = 2
        let a = vec![vec![q(1, 1), q(1, 1)], vec![q(1, 1), q(1, 1)]];
        let b = vec![q(1, 1), q(2, 1)];
        match feasibility(&a, &b, &LpOptions::default()).unwrap() {
            Feasibility::Infeasible { ray, .. } => check_farkas(&a, &b, &ray),
            other => panic!("expected infeasible, got {other:?}"),
        }
        // negative right-hand side: x1 = -1
        let a = vec![vec![q(1, 1)]];
        let b = vec![q(-1, 1)];
        match feasibility(&a, &b, &LpOptions::default()).unwrap() {
            Feasibility::Infeasible { ray, .. } => check_farkas(&a, &b, &ray),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn float_solve_matches_exact_verdict() {
        let a = vec![vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0]];
        let b = vec![1.0, 0.5];
        let Feasibility::Feasible(x) = feasibility(&a, &b, &LpOptions::default()).unwrap() else {
            panic!("expected feasible");
        };
        assert!((x[0] + x[1] + x[2] - 1.0).abs() < 1e-12);
        assert!((x[0] - x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Redundant rows and a zero right-hand side.
        let a = vec![
            vec![q(1, 1), q(-1, 1), q(0, 1)],
            vec![q(2, 1), q(-2, 1), q(0, 1)],
            vec![q(1, 1), q(1, 1), q(1, 1)],
        ];
        let b = vec![q(0, 1), q(0, 1), q(1, 1)];
        assert!(matches!(
            feasibility(&a, &b, &LpOptions::default()).unwrap(),
            Feasibility::Feasible(_)
        ));
    }
}
