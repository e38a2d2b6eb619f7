//! Command-line front end. Every command prints (or writes to `--out`) one
//! JSON report; reports are byte-identical for identical inputs and seeds.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::{json, Value};

use crate::dicttest::{gaussian_soundness_estimate, parse_function_specs, run_test, Mode};
use crate::distribution::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::gaussian::isserlis;
use crate::io::{self, read_json, to_pretty};
use crate::multigraph::{enumerate_odd_multigraphs, graph_count_bound, perfect_matchings};
use crate::partite::{check_feasibility, gen_planted, objective, round_full, PartiteInstance};
use crate::predicate::Predicate;
use crate::rng::{mc_moments, stream};
use crate::bits::VertexSet;
use crate::scalar::{format_rational, parse_rational, Scalar};
use crate::vanishing::{search_vanishing, validate_vanishing, GraphTable, SearchOptions, SearchOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DUAL: i32 = 10;
pub const EXIT_INCONCLUSIVE: i32 = 20;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "resistkit", version, about = "Approximation resistance experiments for partite CSPs")]
pub struct Cli {
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fourier table, density, evenness and relevant sets of a predicate
    Analyze {
        #[arg(long)]
        predicate: PathBuf,
    },
    /// Search for an m-vanishing distribution or a separating hyperplane
    Vanish {
        #[arg(long)]
        predicate: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Norm below which the origin counts as reached
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[arg(long, default_value_t = 500)]
        max_iterations: usize,
        /// Fix the truncation level B instead of deriving it
        #[arg(long)]
        b_override: Option<f64>,
    },
    /// Generate a planted value-1 instance with its SDP solution
    Gen {
        #[arg(long)]
        predicate: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        constraints: usize,
        /// Number of random planted assignments
        #[arg(long, conflicts_with_all = ["pool_file", "pool_pattern"])]
        pool: Option<usize>,
        /// JSON array of planted assignments (each k·n signs, layer-major)
        #[arg(long)]
        pool_file: Option<PathBuf>,
        /// Layer sign patterns such as "1,1,-1;1,-1,1"; each layer is constant
        #[arg(long)]
        pool_pattern: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_attempts: usize,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Run the rounding algorithm repeatedly on an instance
    Round {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        /// Predicate for instances that do not embed one
        #[arg(long)]
        predicate: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        rounds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate the dictatorship test
    DictTest {
        #[arg(long)]
        predicate: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        /// Noise rate, parsed exactly ("0.1" or "1/10")
        #[arg(long)]
        epsilon: String,
        /// e.g. "dictator:4:0,majority:5,random-odd:5:7"; one per layer, or one for all
        #[arg(long)]
        functions: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo samples
        #[arg(long, default_value_t = 100_000)]
        rounds: u64,
        /// Also report the Gaussian estimate with this degree cap
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Gaussian product moment via perfect matchings
    Isserlis {
        /// Correlation matrix file (JSON rows) or "identity:r"
        #[arg(long)]
        cov: String,
        /// Comma-separated indices, repeats allowed
        #[arg(long)]
        indices: String,
    },
    /// List the odd-degree multigraphs on each relevant set
    EnumGraphs {
        #[arg(long, conflicts_with = "vertices")]
        predicate: Option<PathBuf>,
        /// Comma-separated vertex set instead of a predicate
        #[arg(long)]
        vertices: Option<String>,
        #[arg(long)]
        m: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Exact,
    Mc,
}

/// Outcome of one invocation.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    /// Report text.
    pub report: Option<String>,
    /// True when the report went to `--out`.
    pub written: bool,
    pub diagnostic: Option<String>,
}

/// Parses arguments and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return Outcome { code, report: None, written: false, diagnostic: Some(e.to_string()) };
        }
    };
    match execute(&cli.command) {
        Ok((code, report)) => {
            let text = to_pretty(&report);
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, &text) {
                    let diagnostic = Some(format!("{}: {e}", path.display()));
                    return Outcome { code: EXIT_USAGE, report: None, written: false, diagnostic };
                }
            }
            Outcome { code, report: Some(text), written: cli.out.is_some(), diagnostic: None }
        }
        Err(e) => Outcome { code: EXIT_INVALID, report: None, written: false, diagnostic: Some(format!("error: {e}")) },
    }
}

fn load_predicate(path: &Path) -> Result<(Predicate, String)> {
    let (v, hash) = read_json(path)?;
    Ok((io::predicate_from_json(&v)?, hash))
}

/// Certificate files may be bare certificates or `vanish` reports.
fn certificate_value(v: Value) -> Value {
    match v.get("certificate") {
        Some(c) => c.clone(),
        None => v,
    }
}

fn execute(cmd: &Command) -> Result<(i32, Value)> {
    match cmd {
        Command::Analyze { predicate } => analyze(predicate),
        Command::Vanish { predicate, m, seed, tol, restarts, max_iterations, b_override } => {
            let opts = SearchOptions {
                primal_tol: *tol,
                restarts: *restarts,
                max_iterations: *max_iterations,
                seed: *seed,
                b_override: *b_override,
                ..SearchOptions::default()
            };
            vanish(predicate, *m, &opts)
        }
        Command::Gen { predicate, n, constraints, pool, pool_file, pool_pattern, seed, max_attempts, instance, solution } => {
            let pool_src = match (pool, pool_file, pool_pattern) {
                (Some(r), _, _) => PoolSource::Random(*r),
                (_, Some(f), _) => PoolSource::File(f.clone()),
                (_, _, Some(p)) => PoolSource::Pattern(p.clone()),
                _ => PoolSource::Random(1),
            };
            gen(predicate, *n, *constraints, pool_src, *seed, *max_attempts, instance, solution)
        }
        Command::Round { instance, solution, certificate, predicate, rounds, seed } => {
            round(instance, solution, certificate, predicate.as_deref(), *rounds, *seed)
        }
        Command::DictTest { predicate, certificate, epsilon, functions, mode, seed, rounds, degree } => {
            dict_test(predicate, certificate, epsilon, functions, *mode, *seed, *rounds, *degree)
        }
        Command::Isserlis { cov, indices } => isserlis_cmd(cov, indices),
        Command::EnumGraphs { predicate, vertices, m } => enum_graphs(predicate.as_deref(), vertices.as_deref(), *m),
    }
}

fn analyze(path: &Path) -> Result<(i32, Value)> {
    let (p, hash) = load_predicate(path)?;
    let k = p.arity();
    let fourier: Vec<Value> = (0..1u32 << k)
        .map(VertexSet)
        .filter(|s| !p.coefficient(*s).is_zero())
        .map(|s| json!({ "set": s.elements(), "coefficient": format_rational(&p.coefficient(s).to_rational()) }))
        .collect();
    let witness = p.evenness_witness().map(|x| crate::bits::point_to_signs(x, k));
    Ok((
        EXIT_OK,
        json!({
            "command": "analyze",
            "inputs": { "predicate": hash },
            "k": k,
            "truth_hex": p.to_hex(),
            "satisfying_count": p.satisfying_count(),
            "density": format_rational(&p.coefficient(VertexSet::EMPTY).to_rational()),
            "even": p.is_even(),
            "evenness_witness": witness,
            "fourier": fourier,
            "relevant_sets": p.relevant_sets().into_iter().map(VertexSet::elements).collect::<Vec<_>>(),
        }),
    ))
}

fn vanish(path: &Path, m: usize, opts: &SearchOptions) -> Result<(i32, Value)> {
    let (p, hash) = load_predicate(path)?;
    let outcome = search_vanishing(&p, m, opts)?;
    let stats = serde_json::to_value(outcome.stats()).expect("serializable");
    let mut report = json!({
        "command": "vanish",
        "inputs": { "predicate": hash },
        "m": m,
        "seed": opts.seed,
        "stats": stats,
    });
    let code = match &outcome {
        SearchOutcome::Primal(cert, _) => {
            let validation = validate_vanishing(&p, m, cert, opts.primal_tol)?;
            report["verdict"] = json!("primal");
            report["validation"] = serde_json::to_value(&validation).expect("serializable");
            report["certificate"] = io::vanishing_certificate_to_json(&p, cert);
            if validation.valid { EXIT_OK } else { EXIT_INVALID }
        }
        SearchOutcome::Dual(cert, _) => {
            report["verdict"] = json!("dual");
            report["margin"] = json!(cert.margin);
            report["advantage"] = json!(cert.normalization.advantage);
            report["certificate"] = io::separation_certificate_to_json(&p, cert);
            EXIT_DUAL
        }
        SearchOutcome::Inconclusive(_) => {
            report["verdict"] = json!("inconclusive");
            EXIT_INCONCLUSIVE
        }
    };
    Ok((code, report))
}

enum PoolSource {
    Random(usize),
    File(PathBuf),
    Pattern(String),
}

#[allow(clippy::too_many_arguments)]
fn gen(
    path: &Path,
    n: usize,
    constraints: usize,
    pool_src: PoolSource,
    seed: u64,
    max_attempts: usize,
    instance_path: &Path,
    solution_path: &Path,
) -> Result<(i32, Value)> {
    let (p, hash) = load_predicate(path)?;
    let k = p.arity();
    let mut rng = stream(seed, 0);
    let mut inputs = json!({ "predicate": hash });
    let pool: Vec<Vec<i8>> = match pool_src {
        PoolSource::Random(r) => {
            use rand::Rng as _;
            (0..r).map(|_| (0..k * n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()).collect()
        }
        PoolSource::File(f) => {
            let (v, h) = read_json(&f)?;
            inputs["pool"] = json!(h);
            serde_json::from_value(v).map_err(|e| Error::Parse(format!("pool: {e}")))?
        }
        PoolSource::Pattern(s) => parse_patterns(&s, k, n)?,
    };
    let (inst, sol) = gen_planted(&p, n, constraints, &pool, &mut rng, max_attempts)?;
    let inst_text = to_pretty(&io::instance_to_json(&inst));
    let sol_text = to_pretty(&io::solution_to_json(&sol));
    std::fs::write(instance_path, &inst_text).map_err(|e| Error::Parse(format!("{}: {e}", instance_path.display())))?;
    std::fs::write(solution_path, &sol_text).map_err(|e| Error::Parse(format!("{}: {e}", solution_path.display())))?;
    let feas = check_feasibility(&inst, &sol, 1e-9)?;
    Ok((
        EXIT_OK,
        json!({
            "command": "gen",
            "inputs": inputs,
            "seed": seed,
            "k": k,
            "n": n,
            "constraints": inst.constraints.len(),
            "pool_size": pool.len(),
            "dim": sol.dim,
            "objective": objective(&inst, &sol),
            "feasible": feas.feasible,
            "max_norm_violation": feas.max_norm_violation,
            "max_inner_product_violation": feas.max_inner_product_violation,
            "max_marginal_violation": feas.max_marginal_violation,
            "outputs": {
                "instance": io::sha256_hex(inst_text.as_bytes()),
                "solution": io::sha256_hex(sol_text.as_bytes()),
            },
        }),
    ))
}

/// `"1,1,-1;1,-1,1"` → one assignment per pattern with constant layers.
fn parse_patterns(s: &str, k: usize, n: usize) -> Result<Vec<Vec<i8>>> {
    s.split(';')
        .map(|pat| {
            let signs: Vec<i8> = pat
                .split(',')
                .map(|x| x.trim().parse::<i8>().map_err(|_| Error::Parse(format!("bad pattern {pat:?}"))))
                .collect::<Result<_>>()?;
            if signs.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: signs.len() });
            }
            Ok(signs.iter().flat_map(|&b| std::iter::repeat_n(b, n)).collect())
        })
        .collect()
}

fn round(
    instance: &Path,
    solution: &Path,
    certificate: &Path,
    predicate: Option<&Path>,
    rounds: u64,
    seed: u64,
) -> Result<(i32, Value)> {
    let mut inputs = serde_json::Map::new();
    let fallback = match predicate {
        Some(path) => {
            let (p, h) = load_predicate(path)?;
            inputs.insert("predicate".into(), json!(h));
            Some(p)
        }
        None => None,
    };
    let (iv, ih) = read_json(instance)?;
    let (sv, sh) = read_json(solution)?;
    let (cv, ch) = read_json(certificate)?;
    inputs.insert("instance".into(), json!(ih));
    inputs.insert("solution".into(), json!(sh));
    inputs.insert("certificate".into(), json!(ch));
    let inst: PartiteInstance = io::instance_from_json(&iv, fallback.as_ref())?;
    let sol = io::solution_from_json(&sv)?;
    let p = &inst.predicate;
    let cert = io::separation_certificate_from_json(p, &certificate_value(cv))?;
    let table = GraphTable::new(p, cert.m);
    let feas = check_feasibility(&inst, &sol, 1e-6)?;
    if !feas.feasible {
        return Err(Error::ShapeMismatch("solution violates the SDP constraints".into()));
    }

    // Slot 0: satisfied fraction; slot 1: residual-branch indicator.
    let failures = std::sync::atomic::AtomicBool::new(false);
    let moments = mc_moments(seed, 0, rounds, |rng, sink| match round_full(&inst, &sol, &cert, &table, rng) {
        Ok((a, frac)) => {
            sink.push(inst.evaluate(&a));
            sink.push(if frac.choice.is_none() { 1.0 } else { 0.0 });
        }
        Err(_) => failures.store(true, std::sync::atomic::Ordering::Relaxed),
    });
    if failures.into_inner() {
        return Err(Error::CertificateMismatch("rounding rejected the certificate".into()));
    }
    let sat = moments[0].estimate();
    let residual = moments[1].estimate();
    let density = p.coefficient(VertexSet::EMPTY).to_f64();
    Ok((
        EXIT_OK,
        json!({
            "command": "round",
            "inputs": inputs,
            "seed": seed,
            "rounds": rounds,
            "satisfied_fraction": sat,
            "residual_branch_rate": residual,
            "density": density,
            "advantage": cert.normalization.advantage,
            "b": cert.normalization.b,
            "tau": cert.normalization.tau,
            "sdp_objective": objective(&inst, &sol),
            "graphs": table.graphs.iter().map(|g| g.to_json()).collect::<Vec<_>>(),
        }),
    ))
}

#[allow(clippy::too_many_arguments)]
fn dict_test(
    predicate: &Path,
    certificate: &Path,
    epsilon: &str,
    functions: &str,
    mode: ModeArg,
    seed: u64,
    rounds: u64,
    degree: Option<usize>,
) -> Result<(i32, Value)> {
    let (p, ph) = load_predicate(predicate)?;
    let (cv, ch) = read_json(certificate)?;
    let cert = io::vanishing_certificate_from_json(&p, &certificate_value(cv))?;
    let validation = validate_vanishing(&p, cert.m, &cert, 1e-9)?;
    if !validation.valid {
        return Err(Error::InvalidCertificate("certificate is not vanishing".into()));
    }
    let eps: BigRational = parse_rational(epsilon)?;
    let mut fs = parse_function_specs(functions, seed, 1 << 32)?;
    if fs.len() == 1 {
        fs = vec![fs[0].clone(); p.arity()];
    }
    let mode = match mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Mc => Mode::Mc,
    };
    let report = run_test(&p, &cert, &eps, &fs, mode, seed, rounds)?;
    let mut out = json!({
        "command": "dict-test",
        "inputs": { "predicate": ph, "certificate": ch },
        "report": serde_json::to_value(&report).expect("serializable"),
        "graphs": GraphTable::new(&p, cert.m).graphs.iter().map(|g| g.to_json()).collect::<Vec<_>>(),
    });
    if let Some(d) = degree {
        let est = gaussian_soundness_estimate(&p, &cert.weighted_matrices(), Scalar::to_f64(&eps), &fs, d)?;
        out["gaussian"] = serde_json::to_value(&est).expect("serializable");
    }
    Ok((EXIT_OK, out))
}

fn isserlis_cmd(cov: &str, indices: &str) -> Result<(i32, Value)> {
    let (rho, inputs): (CorrelationMatrix<BigRational>, Value) = match cov.strip_prefix("identity:") {
        Some(r) => {
            let r: usize = r.parse().map_err(|_| Error::Parse(format!("bad dimension in {cov:?}")))?;
            (CorrelationMatrix::identity(r), json!({}))
        }
        None => {
            let (v, h) = read_json(Path::new(cov))?;
            (io::correlation_from_json(&v, 1e-12)?, json!({ "cov": h }))
        }
    };
    let idx: Vec<usize> = indices
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad index {s:?}"))))
        .collect::<Result<_>>()?;
    if let Some(&i) = idx.iter().find(|&&i| i >= rho.dim()) {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: i + 1 });
    }
    let value = isserlis(&rho, &idx);
    let positions: Vec<usize> = (0..idx.len()).collect();
    Ok((
        EXIT_OK,
        json!({
            "command": "isserlis",
            "inputs": inputs,
            "indices": idx,
            "matchings": perfect_matchings(&positions).len(),
            "value": format_rational(&value),
            "value_f64": Scalar::to_f64(&value),
        }),
    ))
}

fn enum_graphs(predicate: Option<&Path>, vertices: Option<&str>, m: usize) -> Result<(i32, Value)> {
    let (sets, k, inputs) = match (predicate, vertices) {
        (Some(path), _) => {
            let (p, h) = load_predicate(path)?;
            (p.relevant_sets(), p.arity(), json!({ "predicate": h }))
        }
        (None, Some(v)) => {
            let elems: Vec<usize> = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<usize>().ok().filter(|&i| i < 32).ok_or_else(|| Error::Parse(format!("bad vertex {s:?}"))))
                .collect::<Result<_>>()?;
            let s = VertexSet::from_elements(&elems);
            let k = elems.iter().max().map_or(0, |&i| i + 1);
            (vec![s], k, json!({}))
        }
        (None, None) => return Err(Error::Parse("enum-graphs needs --predicate or --vertices".into())),
    };
    let per_set: Vec<Value> = sets
        .iter()
        .map(|&s| {
            let gs = enumerate_odd_multigraphs(s, m);
            json!({ "S": s.elements(), "count": gs.len(), "graphs": gs.iter().map(|g| g.to_json()).collect::<Vec<_>>() })
        })
        .collect();
    let total: usize = per_set.iter().map(|v| v["count"].as_u64().unwrap_or(0) as usize).sum();
    Ok((
        EXIT_OK,
        json!({
            "command": "enum-graphs",
            "inputs": inputs,
            "m": m,
            "total": total,
            "bound": graph_count_bound(k, m).to_string(),
            "sets": per_set,
        }),
    ))
}

/// Caps rayon's global pool from `RESISTKIT_THREADS` (ignored if unset or invalid).
pub fn configure_threads() {
    if let Some(t) = std::env::var("RESISTKIT_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
}
