//! JSON encodings for predicates, distributions, certificates, instances and
//! SDP solutions. Points are written as ±1 arrays, rationals as `"p/q"`.

use std::path::Path;

use num_rational::BigRational;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::bits::{point_to_signs, signs_to_point};
use crate::distribution::{CorrelationMatrix, Distribution, SupportedDistribution};
use crate::error::{Error, Result};
use crate::multigraph::Multigraph;
use crate::partite::{Constraint, PartiteInstance, SdpSolution};
use crate::predicate::Predicate;
use crate::scalar::{format_rational, Scalar};
use crate::vanishing::{
    CertificateAtom, GraphTable, NormalizationReport, SeparationCertificate, VanishingCertificate,
};

/// Reads and parses a JSON file; parse errors carry line and column.
pub fn read_json(path: &Path) -> Result<(Value, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let v = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Ok((v, sha256_hex(text.as_bytes())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn field<'a>(v: &'a Value, key: &str, what: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Parse(format!("{what}: missing \"{key}\"")))
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| Error::Parse(format!("{what}: expected a non-negative integer")))
}

fn as_array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::Parse(format!("{what}: expected an array")))
}

fn sign_vec(v: &Value, what: &str) -> Result<Vec<i64>> {
    as_array(v, what)?
        .iter()
        .map(|x| x.as_i64().ok_or_else(|| Error::Parse(format!("{what}: expected integers"))))
        .collect()
}

fn point_from_json(v: &Value, k: usize, what: &str) -> Result<u32> {
    let s = sign_vec(v, what)?;
    if s.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: s.len() });
    }
    signs_to_point(&s, k)
}

pub fn predicate_to_json(p: &Predicate) -> Value {
    let sat: Vec<Vec<i8>> = p.satisfying_points().map(|x| point_to_signs(x, p.arity())).collect();
    json!({ "k": p.arity(), "sat": sat, "truth_hex": p.to_hex() })
}

/// Accepts `{"k", "sat"}` or `{"k", "truth_hex"}`; if both are present they must agree.
pub fn predicate_from_json(v: &Value) -> Result<Predicate> {
    let k = as_usize(field(v, "k", "predicate")?, "predicate k")?;
    let from_sat = match v.get("sat") {
        Some(sat) => {
            let rows = as_array(sat, "predicate sat")?
                .iter()
                .map(|r| sign_vec(r, "predicate sat"))
                .collect::<Result<Vec<_>>>()?;
            Some(Predicate::from_satisfying_set(k, &rows)?)
        }
        None => None,
    };
    let from_hex = match v.get("truth_hex") {
        Some(h) => {
            let h = h.as_str().ok_or_else(|| Error::Parse("predicate truth_hex: expected a string".into()))?;
            Some(Predicate::from_hex(k, h)?)
        }
        None => None,
    };
    match (from_sat, from_hex) {
        (Some(a), Some(b)) if a != b => Err(Error::Parse("predicate: sat and truth_hex disagree".into())),
        (Some(a), _) | (None, Some(a)) => Ok(a),
        (None, None) => Err(Error::Parse("predicate: need \"sat\" or \"truth_hex\"".into())),
    }
}

pub fn distribution_to_json<T: Scalar>(d: &Distribution<T>) -> Value {
    let atoms: Vec<Value> = d
        .atoms()
        .map(|(x, w)| json!({ "point": point_to_signs(x, d.arity()), "weight": w.to_json() }))
        .collect();
    json!({ "k": d.arity(), "atoms": atoms })
}

pub fn distribution_from_json<T: Scalar>(v: &Value) -> Result<Distribution<T>> {
    let k = as_usize(field(v, "k", "distribution")?, "distribution k")?;
    let atoms = as_array(field(v, "atoms", "distribution")?, "distribution atoms")?
        .iter()
        .map(|a| {
            let x = point_from_json(field(a, "point", "atom")?, k, "atom point")?;
            let w = T::from_json(field(a, "weight", "atom")?)?;
            Ok((x, w))
        })
        .collect::<Result<Vec<_>>>()?;
    Distribution::new(k, atoms)
}

pub fn correlation_to_json<T: Scalar>(rho: &CorrelationMatrix<T>) -> Value {
    let rows: Vec<Vec<Value>> = rho.rows().iter().map(|r| r.iter().map(Scalar::to_json).collect()).collect();
    Value::Array(rows.into_iter().map(Value::Array).collect())
}

pub fn correlation_from_json<T: Scalar>(v: &Value, tol: f64) -> Result<CorrelationMatrix<T>> {
    let rows = as_array(v, "matrix")?
        .iter()
        .map(|r| as_array(r, "matrix row")?.iter().map(T::from_json).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    CorrelationMatrix::from_rows(&rows, tol)
}

fn graphs_to_json(table: &GraphTable) -> Value {
    Value::Array(
        table
            .graphs
            .iter()
            .zip(&table.coefficients)
            .enumerate()
            .map(|(t, (g, c))| {
                let mut o = g.to_json();
                o["t"] = json!(t);
                o["coefficient"] = json!(format_rational(&c.to_rational()));
                o
            })
            .collect(),
    )
}

/// Rejects certificate files whose graph list differs from the canonical one.
fn check_graphs(v: &Value, table: &GraphTable) -> Result<()> {
    let Some(list) = v.get("graphs") else { return Ok(()) };
    let graphs = as_array(list, "certificate graphs")?
        .iter()
        .map(Multigraph::from_json)
        .collect::<Result<Vec<_>>>()?;
    if graphs != table.graphs {
        return Err(Error::CertificateMismatch("graph list differs from the canonical enumeration".into()));
    }
    Ok(())
}

pub fn vanishing_certificate_to_json(p: &Predicate, cert: &VanishingCertificate) -> Value {
    let table = GraphTable::new(p, cert.m);
    let atoms: Vec<Value> = cert
        .atoms
        .iter()
        .map(|a| {
            json!({
                "weight": format_rational(&a.weight),
                "distribution": distribution_to_json(&a.distribution),
                "correlation": correlation_to_json(&a.correlation),
            })
        })
        .collect();
    json!({
        "kind": "primal",
        "predicate": predicate_to_json(p),
        "m": cert.m,
        "exact": cert.exact,
        "graphs": graphs_to_json(&table),
        "atoms": atoms,
    })
}

/// Parses a primal certificate. Correlations are recomputed from the atom
/// distributions and must match any stored matrix exactly.
pub fn vanishing_certificate_from_json(p: &Predicate, v: &Value) -> Result<VanishingCertificate> {
    if v.get("kind").and_then(Value::as_str).is_some_and(|k| k != "primal") {
        return Err(Error::CertificateMismatch("expected a primal certificate".into()));
    }
    let m = as_usize(field(v, "m", "certificate")?, "certificate m")?;
    check_graphs(v, &GraphTable::new(p, m))?;
    let atoms = as_array(field(v, "atoms", "certificate")?, "certificate atoms")?
        .iter()
        .map(|a| {
            let weight = <BigRational as Scalar>::from_json(field(a, "weight", "atom")?)?;
            let dist = distribution_from_json::<BigRational>(field(a, "distribution", "atom")?)?;
            let distribution = SupportedDistribution::new(p, dist)?;
            let correlation = distribution.correlation_matrix();
            if let Some(stored) = a.get("correlation") {
                let stored = correlation_from_json::<BigRational>(stored, 0.0)?;
                if stored != correlation {
                    return Err(Error::InvalidCertificate("stored correlation differs from the atom distribution".into()));
                }
            }
            Ok(CertificateAtom { weight, distribution, correlation })
        })
        .collect::<Result<Vec<_>>>()?;
    let exact = v.get("exact").and_then(Value::as_bool).unwrap_or(true);
    Ok(VanishingCertificate { m, exact, atoms })
}

pub fn separation_certificate_to_json(p: &Predicate, cert: &SeparationCertificate) -> Value {
    let table = GraphTable::new(p, cert.m);
    json!({
        "kind": "dual",
        "predicate": predicate_to_json(p),
        "m": cert.m,
        "graphs": graphs_to_json(&table),
        "gamma": cert.gamma,
        "margin": cert.margin,
        "confirm_margin": cert.confirm_margin,
        "oracle_restarts": cert.oracle_restarts,
        "normalization": serde_json::to_value(&cert.normalization).expect("serializable"),
    })
}

pub fn separation_certificate_from_json(p: &Predicate, v: &Value) -> Result<SeparationCertificate> {
    if v.get("kind").and_then(Value::as_str).is_some_and(|k| k != "dual") {
        return Err(Error::CertificateMismatch("expected a dual certificate".into()));
    }
    let m = as_usize(field(v, "m", "certificate")?, "certificate m")?;
    check_graphs(v, &GraphTable::new(p, m))?;
    let floats = |key: &str| -> Result<Vec<f64>> {
        as_array(field(v, key, "certificate")?, key)?.iter().map(f64::from_json).collect()
    };
    let gamma = floats("gamma")?;
    let margin = f64::from_json(field(v, "margin", "certificate")?)?;
    let confirm_margin = v.get("confirm_margin").map(f64::from_json).transpose()?.unwrap_or(margin);
    let oracle_restarts = v.get("oracle_restarts").map(|r| as_usize(r, "oracle_restarts")).transpose()?.unwrap_or(0);
    let normalization: NormalizationReport = serde_json::from_value(field(v, "normalization", "certificate")?.clone())
        .map_err(|e| Error::Parse(format!("normalization: {e}")))?;
    Ok(SeparationCertificate { m, gamma, margin, confirm_margin, oracle_restarts, normalization })
}

pub fn instance_to_json(inst: &PartiteInstance) -> Value {
    let constraints: Vec<Value> = inst
        .constraints
        .iter()
        .map(|c| json!({ "vars": c.vars, "signs": c.signs }))
        .collect();
    json!({
        "k": inst.k(),
        "n": inst.n,
        "predicate": predicate_to_json(&inst.predicate),
        "constraints": constraints,
    })
}

/// Uses the embedded predicate when present, otherwise `fallback`.
pub fn instance_from_json(v: &Value, fallback: Option<&Predicate>) -> Result<PartiteInstance> {
    let predicate = match (v.get("predicate"), fallback) {
        (Some(pv), _) => predicate_from_json(pv)?,
        (None, Some(p)) => p.clone(),
        (None, None) => return Err(Error::Parse("instance: no predicate given".into())),
    };
    let k = as_usize(field(v, "k", "instance")?, "instance k")?;
    if k != predicate.arity() {
        return Err(Error::ShapeMismatch(format!("instance k = {k} but the predicate has arity {}", predicate.arity())));
    }
    let n = as_usize(field(v, "n", "instance")?, "instance n")?;
    let constraints = as_array(field(v, "constraints", "instance")?, "constraints")?
        .iter()
        .map(|c| {
            let vars = as_array(field(c, "vars", "constraint")?, "vars")?
                .iter()
                .map(|x| as_usize(x, "vars"))
                .collect::<Result<Vec<_>>>()?;
            let signs = sign_vec(field(c, "signs", "constraint")?, "signs")?;
            if let Some(&b) = signs.iter().find(|&&b| b != 1 && b != -1) {
                return Err(Error::NotASign(b));
            }
            Ok(Constraint { vars, signs: signs.iter().map(|&b| b as i8).collect() })
        })
        .collect::<Result<Vec<_>>>()?;
    PartiteInstance::new(predicate, n, constraints)
}

pub fn solution_to_json(sol: &SdpSolution) -> Value {
    json!({
        "k": sol.k,
        "n": sol.n,
        "dim": sol.dim,
        "vectors": sol.vectors,
        "locals": sol.locals.iter().map(distribution_to_json).collect::<Vec<_>>(),
    })
}

pub fn solution_from_json(v: &Value) -> Result<SdpSolution> {
    let k = as_usize(field(v, "k", "solution")?, "solution k")?;
    let n = as_usize(field(v, "n", "solution")?, "solution n")?;
    let dim = as_usize(field(v, "dim", "solution")?, "solution dim")?;
    let vectors = as_array(field(v, "vectors", "solution")?, "vectors")?
        .iter()
        .map(|r| {
            let r = as_array(r, "vector")?.iter().map(f64::from_json).collect::<Result<Vec<_>>>()?;
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    if vectors.len() != k * n {
        return Err(Error::DimensionMismatch { expected: k * n, got: vectors.len() });
    }
    let locals = as_array(field(v, "locals", "solution")?, "locals")?
        .iter()
        .map(distribution_from_json::<f64>)
        .collect::<Result<Vec<_>>>()?;
    Ok(SdpSolution { k, n, dim, vectors, locals })
}

/// Keys in insertion-independent (sorted) order.
pub fn object(pairs: impl IntoIterator<Item = (&'static str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::vanishing::{search_vanishing, SearchOptions, SearchOutcome};

    #[test]
    fn predicate_round_trip() {
        for name in ["lin4", "nae3", "xor2", "glst", "sat3"] {
            let p = Predicate::named(name).unwrap();
            assert_eq!(predicate_from_json(&predicate_to_json(&p)).unwrap(), p);
            let hex_only = json!({ "k": p.arity(), "truth_hex": p.to_hex() });
            assert_eq!(predicate_from_json(&hex_only).unwrap(), p);
        }
        assert!(predicate_from_json(&json!({ "k": 2, "sat": [[1, 0]] })).is_err());
        assert!(predicate_from_json(&json!({ "k": 2 })).is_err());
        let clash = json!({ "k": 2, "sat": [[1, 1]], "truth_hex": "0" });
        assert!(predicate_from_json(&clash).is_err());
    }

    #[test]
    fn distribution_round_trip() {
        let d = Distribution::<BigRational>::new(
            3,
            [(0, BigRational::from_ratio(1, 3)), (5, BigRational::from_ratio(2, 3))],
        )
        .unwrap();
        let v = distribution_to_json(&d);
        assert_eq!(v["atoms"][1]["point"], json!([-1, 1, -1]));
        assert_eq!(v["atoms"][1]["weight"], json!("2/3"));
        assert_eq!(distribution_from_json::<BigRational>(&v).unwrap(), d);
        let f = distribution_from_json::<f64>(&json!({ "k": 1, "atoms": [{ "point": [1], "weight": 0.25 }, { "point": [-1], "weight": "3/4" }] })).unwrap();
        assert_eq!(f.weight(1), 0.75);
    }

    #[test]
    fn certificates_round_trip() {
        let lin4 = Predicate::named("lin4").unwrap();
        let SearchOutcome::Primal(cert, _) = search_vanishing(&lin4, 4, &SearchOptions::default()).unwrap() else {
            panic!("expected primal");
        };
        let v = vanishing_certificate_to_json(&lin4, &cert);
        let back = vanishing_certificate_from_json(&lin4, &v).unwrap();
        assert_eq!(back.atoms.len(), cert.atoms.len());
        assert_eq!(vanishing_certificate_to_json(&lin4, &back), v);

        let nae = Predicate::named("nae3").unwrap();
        let SearchOutcome::Dual(sep, _) = search_vanishing(&nae, 1, &SearchOptions::default()).unwrap() else {
            panic!("expected dual");
        };
        let v = separation_certificate_to_json(&nae, &sep);
        let back = separation_certificate_from_json(&nae, &v).unwrap();
        assert_eq!(back.gamma, sep.gamma);
        assert_eq!(back.normalization.probabilities, sep.normalization.probabilities);
        assert!(separation_certificate_from_json(&nae, &vanishing_certificate_to_json(&lin4, &cert)).is_err());
    }

    #[test]
    fn instance_and_solution_round_trip() {
        let p = Predicate::named("lin4").unwrap();
        let mut rng = stream(3, 0);
        let pool: Vec<Vec<i8>> = (0..2).map(|_| (0..12).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()).collect();
        let Ok((inst, sol)) = crate::partite::gen_planted(&p, 3, 5, &pool, &mut rng, 100_000) else {
            return;
        };
        let back = instance_from_json(&instance_to_json(&inst), None).unwrap();
        assert_eq!(back.constraints, inst.constraints);
        let s = solution_from_json(&solution_to_json(&sol)).unwrap();
        assert_eq!(s.vectors, sol.vectors);
        assert_eq!(s.locals, sol.locals);
    }

    use rand::Rng as _;
}
