//! Odd-degree multigraphs on subsets of `[k]` and their values on correlation
//! matrices.

use std::cmp::Ordering;
use std::fmt;

use serde_json::{json, Value};

use crate::bits::VertexSet;
use crate::distribution::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::predicate::Predicate;
use crate::scalar::Scalar;

/// Edge multiset on a vertex set, kept sorted with `i < j` in every edge.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Multigraph {
    vertices: VertexSet,
    edges: Vec<(usize, usize)>,
}

impl Multigraph {
    pub fn new(vertices: VertexSet, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at {a}")));
            }
            if !vertices.contains(a) || !vertices.contains(b) {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) leaves {vertices}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        Ok(Multigraph { vertices, edges: canon })
    }

    pub fn vertices(&self) -> VertexSet {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Degree of every vertex `0..=max(S)`.
    pub fn degrees(&self) -> Vec<usize> {
        let top = self.vertices.iter().last().map_or(0, |v| v + 1);
        let mut deg = vec![0; top];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// True when every vertex of `S` has odd degree.
    pub fn is_odd_degree(&self) -> bool {
        let deg = self.degrees();
        self.vertices.iter().all(|v| deg[v] % 2 == 1)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "S": self.vertices.elements(),
            "edges": self.edges.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("graph: {what}"));
        let s = v
            .get("S")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing \"S\""))?
            .iter()
            .map(|x| x.as_u64().filter(|&i| i < 32).map(|i| i as usize).ok_or_else(|| bad("bad vertex")))
            .collect::<Result<Vec<_>>>()?;
        let edges = v
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing \"edges\""))?
            .iter()
            .map(|e| match e.as_array().map(Vec::as_slice) {
                Some([a, b]) => match (a.as_u64(), b.as_u64()) {
                    (Some(a), Some(b)) => Ok((a as usize, b as usize)),
                    _ => Err(bad("bad edge")),
                },
                _ => Err(bad("edge must be a pair")),
            })
            .collect::<Result<Vec<_>>>()?;
        Multigraph::new(VertexSet::from_elements(&s), edges)
    }
}

impl Ord for Multigraph {
    fn cmp(&self, other: &Self) -> Ordering {
        self.vertices
            .cmp(&other.vertices)
            .then(self.edges.len().cmp(&other.edges.len()))
            .then_with(|| self.edges.cmp(&other.edges))
    }
}

impl PartialOrd for Multigraph {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Multigraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}[", self.vertices)?;
        for (n, (a, b)) in self.edges.iter().enumerate() {
            if n > 0 {
                write!(f, " ")?;
            }
            write!(f, "{a}-{b}")?;
        }
        write!(f, "]")
    }
}

/// Every multigraph on `s` with all degrees odd and at most `m` edges, in
/// canonical order (edge count, then sorted edge list).
pub fn enumerate_odd_multigraphs(s: VertexSet, m: usize) -> Vec<Multigraph> {
    let verts = s.elements();
    if verts.is_empty() || verts.len() % 2 == 1 {
        return Vec::new();
    }
    let pairs: Vec<(usize, usize)> = verts
        .iter()
        .enumerate()
        .flat_map(|(a, &u)| verts[a + 1..].iter().map(move |&v| (u, v)))
        .collect();
    // Index of the last pair touching each vertex; its parity is final after that.
    let mut last = vec![0usize; 32];
    for (p, &(u, v)) in pairs.iter().enumerate() {
        last[u] = p;
        last[v] = p;
    }

    struct Walk<'a> {
        pairs: &'a [(usize, usize)],
        last: &'a [usize],
        s: VertexSet,
        deg: [usize; 32],
        mult: Vec<usize>,
        out: Vec<Multigraph>,
    }

    impl Walk<'_> {
        fn go(&mut self, p: usize, budget: usize) {
            if p == self.pairs.len() {
                let edges = self
                    .pairs
                    .iter()
                    .zip(&self.mult)
                    .flat_map(|(&e, &c)| std::iter::repeat_n(e, c));
                self.out.push(Multigraph::new(self.s, edges).expect("pairs lie in S"));
                return;
            }
            let (u, v) = self.pairs[p];
            for c in 0..=budget {
                self.deg[u] += c;
                self.deg[v] += c;
                let closes_even = [u, v].iter().any(|&w| self.last[w] == p && self.deg[w] % 2 == 0);
                if !closes_even {
                    self.mult[p] = c;
                    self.go(p + 1, budget - c);
                }
                self.deg[u] -= c;
                self.deg[v] -= c;
            }
            self.mult[p] = 0;
        }
    }

    let mut walk = Walk {
        pairs: &pairs,
        last: &last,
        s,
        deg: [0; 32],
        mult: vec![0; pairs.len()],
        out: Vec::new(),
    };
    walk.go(0, m);
    let mut out = walk.out;
    out.sort();
    out
}

/// Canonical graph list `G_1..G_M`: odd multigraphs with at most `m` edges on
/// each relevant set of `p`, sets taken in canonical order.
pub fn enumerate_relevant_graphs(p: &Predicate, m: usize) -> Vec<Multigraph> {
    p.relevant_sets()
        .into_iter()
        .flat_map(|s| enumerate_odd_multigraphs(s, m))
        .collect()
}

/// Upper bound `2^k · k^{2m}` on the canonical list length (saturating).
pub fn graph_count_bound(k: usize, m: usize) -> u128 {
    let mut b = 1u128 << k;
    for _ in 0..2 * m {
        b = b.saturating_mul(k as u128);
    }
    b
}

/// `ρ(G) = ∏_{ij∈E} ρ_ij`.
pub fn graph_value<T: Scalar>(rho: &CorrelationMatrix<T>, g: &Multigraph) -> T {
    g.edges.iter().fold(T::one(), |acc, &(i, j)| acc * rho.get(i, j).clone())
}

/// `Λ(G)` for a weighted list of matrices.
pub fn lambda_value<T: Scalar>(atoms: &[(T, CorrelationMatrix<T>)], g: &Multigraph) -> T {
    atoms
        .iter()
        .fold(T::zero(), |acc, (w, rho)| acc + w.clone() * graph_value(rho, g))
}

/// Vertices of odd degree.
pub fn odd_vertices(g: &Multigraph) -> VertexSet {
    let deg = g.degrees();
    VertexSet::from_elements(&(0..deg.len()).filter(|&v| deg[v] % 2 == 1).collect::<Vec<_>>())
}

/// `χ_V(b) = ∏_{i∈V} b_i`.
pub fn sign_character(v: VertexSet, b: &[i8]) -> i8 {
    v.iter().fold(1, |acc, i| acc * b[i])
}

/// All perfect matchings on the given labels; empty for odd length.
pub fn perfect_matchings(items: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if items.len() % 2 == 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(items.len() / 2);
    let mut rest = items.to_vec();
    matchings_rec(&mut rest, &mut cur, &mut out);
    out
}

fn matchings_rec(rest: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
    if rest.is_empty() {
        out.push(cur.clone());
        return;
    }
    let first = rest.remove(0);
    for idx in 0..rest.len() {
        let partner = rest.remove(idx);
        cur.push((first, partner));
        matchings_rec(rest, cur, out);
        cur.pop();
        rest.insert(idx, partner);
    }
    rest.insert(0, first);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn set(v: &[usize]) -> VertexSet {
        VertexSet::from_elements(v)
    }

    /// Independent generator: every multiset of at most `m` pairs from `[k]`.
    fn brute_force(k: usize, m: usize, s: VertexSet) -> BTreeSet<Vec<(usize, usize)>> {
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        let mut out = BTreeSet::new();
        let mut stack: Vec<(Vec<(usize, usize)>, usize)> = vec![(vec![], 0)];
        while let Some((edges, from)) = stack.pop() {
            let mut deg = vec![0; k];
            for &(a, b) in &edges {
                deg[a] += 1;
                deg[b] += 1;
            }
            let touched: Vec<usize> = (0..k).filter(|&v| deg[v] > 0).collect();
            if !edges.is_empty() && set(&touched) == s && touched.iter().all(|&v| deg[v] % 2 == 1) {
                out.insert(edges.clone());
            }
            if edges.len() < m {
                for (p, &e) in pairs.iter().enumerate().skip(from) {
                    let mut next = edges.clone();
                    next.push(e);
                    stack.push((next, p));
                }
            }
        }
        out
    }

    #[test]
    fn enumeration_counts() {
        let two = enumerate_odd_multigraphs(set(&[0, 1]), 4);
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].edges(), &[(0, 1)]);
        assert_eq!(two[1].edges(), &[(0, 1); 3]);
        let four = enumerate_odd_multigraphs(set(&[0, 1, 2, 3]), 3);
        assert_eq!(four.len(), 7);
        assert_eq!(four.iter().filter(|g| g.edge_count() == 2).count(), 3);
        assert!(enumerate_odd_multigraphs(set(&[0]), 5).is_empty());
        assert!(enumerate_odd_multigraphs(set(&[0, 1, 2]), 6).is_empty());
        assert!(enumerate_odd_multigraphs(VertexSet::EMPTY, 3).is_empty());
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for k in 1..=4 {
            for m in 0..=4 {
                for s in VertexSet::full(k).subsets() {
                    let fast: BTreeSet<Vec<(usize, usize)>> = enumerate_odd_multigraphs(s, m)
                        .into_iter()
                        .map(|g| g.edges().to_vec())
                        .collect();
                    assert_eq!(fast, brute_force(k, m, s), "k={k} m={m} S={s}");
                }
            }
        }
    }

    #[test]
    fn relevant_graph_lists() {
        let lin4 = Predicate::named("lin4").unwrap();
        let gs = enumerate_relevant_graphs(&lin4, 3);
        assert_eq!(gs.len(), 7);
        assert!(gs.iter().all(|g| g.vertices() == set(&[0, 1, 2, 3])));
        let nae = Predicate::named("nae3").unwrap();
        let gs = enumerate_relevant_graphs(&nae, 1);
        let edges: Vec<_> = gs.iter().map(|g| g.edges().to_vec()).collect();
        assert_eq!(edges, vec![vec![(0, 1)], vec![(0, 2)], vec![(1, 2)]]);
        assert!(enumerate_relevant_graphs(&Predicate::named("const1:3").unwrap(), 4).is_empty());
    }

    #[test]
    fn values_and_characters() {
        use num_rational::BigRational;
        let q = |n, d| BigRational::from_ratio(n, d);
        let third = q(-1, 3);
        let rho = CorrelationMatrix::from_off_diagonal(3, [(0, 1, third.clone()), (0, 2, third.clone()), (1, 2, third)])
            .unwrap();
        let single = Multigraph::new(set(&[0, 1]), [(0, 1)]).unwrap();
        let triple = Multigraph::new(set(&[0, 1]), [(0, 1); 3]).unwrap();
        assert_eq!(graph_value(&rho, &single), q(-1, 3));
        assert_eq!(graph_value(&rho, &triple), q(-1, 27));
        assert_eq!(graph_value(&CorrelationMatrix::<BigRational>::identity(3), &single), q(0, 1));

        assert_eq!(odd_vertices(&single), set(&[0, 1]));
        assert_eq!(sign_character(odd_vertices(&single), &[-1, -1, 1]), 1);
        let double = Multigraph::new(set(&[0, 1]), [(0, 1); 2]).unwrap();
        assert_eq!(odd_vertices(&double), VertexSet::EMPTY);
    }

    #[test]
    fn matchings() {
        assert_eq!(perfect_matchings(&[0, 1]).len(), 1);
        assert_eq!(perfect_matchings(&[0, 1, 2, 3]).len(), 3);
        assert_eq!(perfect_matchings(&[0, 1, 2, 3, 4, 5]).len(), 15);
        assert!(perfect_matchings(&[0, 1, 2]).is_empty());
        assert_eq!(perfect_matchings(&[]).len(), 1);
    }

    #[test]
    fn json_round_trip() {
        let g = Multigraph::new(set(&[0, 2, 3, 5]), [(3, 0), (5, 2), (0, 2), (3, 5)]).unwrap();
        assert_eq!(Multigraph::from_json(&g.to_json()).unwrap(), g);
        assert!(Multigraph::new(set(&[0, 1]), [(0, 0)]).is_err());
        assert!(Multigraph::new(set(&[0, 1]), [(0, 2)]).is_err());
    }
}
