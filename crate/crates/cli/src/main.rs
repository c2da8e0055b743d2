//! Command-line front end: batch computations and identity-audit runs
//! over JSON-serialized elements.
//!
//! Exit codes: 0 success, 1 identity-audit failure, 2 argument errors,
//! 3 resource-bound errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hoca_core::audit::{render_report, run_audit};
use hoca_core::config::EngineConfig;
use hoca_core::error::EngineError;
use hoca_core::graphs::{enumerate_graphs, evaluate_graph_op, invariant_span_compare, SpanBlock};
use hoca_core::hkr::{expected_exterior_dim, hkr_i, hkr_p, HomotopyTable};
use hoca_core::json as wire;
use hoca_core::polydiff::{brace, cup, g_bracket, hochschild_d, PolyDiffOp};
use hoca_core::polyvector::{poisson_check, schouten, wedge, Monomial, PolyVector};
use hoca_core::scalar::{rat_from_str, FormalSeries, Rat};
use hoca_core::transfer::{HLetter, TransferContext};
use hoca_core::twist::{
    grouplike_check, mc_check_b, mc_residual_b, moyal_series, op_letters_series, twist_b,
    twist_morphism_target, MCElement,
};

#[derive(Parser)]
#[command(
    name = "hoca",
    about = "Exact homotopy-algebra computations on poly-vector fields and poly-differential operators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Bounds {
    /// Number of variables (for commands that build their own elements).
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Bound on coefficient degrees in sampled elements.
    #[arg(long, default_value_t = 3)]
    max_degree: u32,
    /// Bound on total slot order for homotopy blocks.
    #[arg(long, default_value_t = 10)]
    max_order: u32,
    /// Bound on word lengths for homotopy blocks.
    #[arg(long, default_value_t = 6)]
    max_words: usize,
    /// Truncation order of the deformation parameter.
    #[arg(long, default_value_t = 3)]
    hbar_order: usize,
    /// Seed for reproducible sampling.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Schouten bracket of two poly-vector files.
    Schouten { a: PathBuf, b: PathBuf },
    /// Wedge product of two poly-vector files.
    Wedge { a: PathBuf, b: PathBuf },
    /// Poisson check of a bivector file.
    Poisson { pi: PathBuf },
    /// Brace of an operator against one or more operator arguments.
    Brace { d_op: PathBuf, args: Vec<PathBuf> },
    /// Hochschild differential of an operator file.
    Hochschild { d_op: PathBuf },
    /// Cup product of two operator files.
    Cup { a: PathBuf, b: PathBuf },
    /// Gerstenhaber bracket of two operator files.
    Gbracket { a: PathBuf, b: PathBuf },
    /// Antisymmetrization map, its one-sided inverse and the homotopy.
    Hkr {
        #[command(subcommand)]
        op: HkrOp,
    },
    /// Exact cohomology dimension of a constant-coefficient block.
    Cohomology {
        #[arg(long)]
        word_length: usize,
        #[arg(long)]
        order: u32,
        #[command(flatten)]
        bounds: Bounds,
    },
    /// Homotopy transfer evaluations and identity checks.
    Transfer {
        #[command(subcommand)]
        op: TransferOp,
    },
    /// Maurer-Cartan twisting.
    Twist {
        #[command(subcommand)]
        op: TwistOp,
    },
    /// Descent for derivation actions.
    Descent {
        #[command(subcommand)]
        op: DescentOp,
    },
    /// Admissible graphs.
    Graphs {
        #[command(subcommand)]
        op: GraphsOp,
    },
    /// Run the full identity-audit suite.
    Audit {
        #[command(flatten)]
        bounds: Bounds,
        /// Smaller sample counts for quick runs.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Subcommand)]
enum HkrOp {
    /// Antisymmetrize a poly-vector file into an operator.
    I { a: PathBuf },
    /// Project an operator file onto poly-vectors.
    P { d_op: PathBuf },
    /// Apply the block homotopy to an operator file.
    H {
        d_op: PathBuf,
        #[command(flatten)]
        bounds: Bounds,
    },
}

#[derive(Subcommand)]
enum TransferOp {
    /// Evaluate the transfer morphism coefficient on poly-vector files.
    Psi {
        #[arg(long)]
        arity: usize,
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        bounds: Bounds,
    },
    /// Evaluate the transferred structure coefficient on poly-vector files.
    Q1 {
        #[arg(long)]
        arity: usize,
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        bounds: Bounds,
    },
    /// Verify the transfer identities on seeded samples.
    Check {
        #[arg(long)]
        arity: usize,
        #[arg(long, default_value_t = 12)]
        samples: usize,
        #[command(flatten)]
        bounds: Bounds,
    },
}

#[derive(Subcommand)]
enum TwistOp {
    /// Check the Maurer-Cartan equation for a series operator file.
    Mc { omega: PathBuf },
    /// Apply the twisted differential to a series operator file.
    Apply { omega: PathBuf, gamma: PathBuf },
    /// Push a Maurer-Cartan element through a toy morphism with a
    /// quadratic correction weight.
    Morphism {
        omega: PathBuf,
        #[arg(long, default_value = "0/1")]
        quadratic: String,
    },
    /// Group-like identity for the exponential of a series operator.
    Grouplike { omega: PathBuf },
    /// Exponential series of a constant antisymmetric bidifferential.
    Moyal {
        /// Optional input word; the standard symplectic one when absent.
        pi: Option<PathBuf>,
        #[command(flatten)]
        bounds: Bounds,
    },
}

#[derive(Subcommand)]
enum DescentOp {
    /// Fixed subspace of the toy matrix-algebra action.
    Fixed {
        #[command(flatten)]
        bounds: Bounds,
    },
}

#[derive(Subcommand)]
enum GraphsOp {
    /// Enumerate admissible graphs for the given out-degrees and sinks.
    Enum {
        /// Out-degrees of the source vertices, comma separated.
        #[arg(long, value_delimiter = ',')]
        out: Vec<usize>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        allow_loops: bool,
    },
    /// Evaluate a graph file on poly-vector files (operator form).
    Eval { graph: PathBuf, inputs: Vec<PathBuf> },
    /// Compare the graph span against the affine-invariant operators.
    Span {
        #[arg(long, value_delimiter = ',')]
        out: Vec<usize>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        coeff_bound: u32,
        #[arg(long, default_value_t = 1)]
        deriv_bound: u32,
        #[arg(long, default_value_t = 1)]
        slot_bound: u32,
        #[command(flatten)]
        bounds: Bounds,
    },
}

fn read_value(path: &PathBuf) -> Result<Value, EngineError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn read_pv(path: &PathBuf) -> Result<PolyVector<Rat>, EngineError> {
    wire::polyvector_from_value(&read_value(path)?)
}

fn read_pd(path: &PathBuf) -> Result<PolyDiffOp<Rat>, EngineError> {
    wire::polydiff_from_value(&read_value(path)?)
}

fn read_pd_series(path: &PathBuf) -> Result<PolyDiffOp<FormalSeries>, EngineError> {
    wire::polydiff_from_value(&read_value(path)?)
}

fn emit(v: Value) {
    println!("{}", wire::to_canonical_string(&v));
}

fn standard_pi(d: usize) -> Result<PolyDiffOp<Rat>, EngineError> {
    if d < 2 {
        return Err(EngineError::argument(
            "the standard symplectic word needs at least two variables",
        ));
    }
    let mut e1 = Monomial::one(d);
    e1.0[0] = 1;
    let mut e2 = Monomial::one(d);
    e2.0[1] = 1;
    Ok(PolyDiffOp::from_terms(
        d,
        vec![
            (
                Monomial::one(d),
                vec![e1.clone(), e2.clone()],
                Rat::from_integer(1.into()),
            ),
            (
                Monomial::one(d),
                vec![e2, e1],
                -Rat::from_integer(1.into()),
            ),
        ],
    ))
}

fn sample_letters(rng: &mut impl rand::Rng, d: usize, count: usize) -> Vec<HLetter> {
    (0..count)
        .map(|_| {
            let deg: u32 = rng.gen_range(0..=1);
            let wedge_deg = rng.gen_range(0..=d);
            let mono = Monomial((0..d).map(|_| rng.gen_range(0..=deg)).collect());
            let mut all: Vec<usize> = (0..d).collect();
            for i in (1..all.len()).rev() {
                let j = rng.gen_range(0..=i);
                all.swap(i, j);
            }
            let mut wedge: Vec<usize> = all[..wedge_deg].to_vec();
            wedge.sort_unstable();
            HLetter((mono, wedge))
        })
        .collect()
}

fn run(cli: Cli) -> Result<bool, EngineError> {
    match cli.command {
        Command::Schouten { a, b } => {
            let r = schouten(&read_pv(&a)?, &read_pv(&b)?)?;
            emit(wire::polyvector_to_value(&r));
        }
        Command::Wedge { a, b } => {
            let r = wedge(&read_pv(&a)?, &read_pv(&b)?)?;
            emit(wire::polyvector_to_value(&r));
        }
        Command::Poisson { pi } => {
            let ok = poisson_check(&read_pv(&pi)?)?;
            emit(json!({"schema": wire::SCHEMA, "type": "report", "poisson": ok}));
        }
        Command::Brace { d_op, args } => {
            let d_op = read_pd(&d_op)?;
            let args: Result<Vec<_>, _> = args.iter().map(read_pd).collect();
            let r = brace(&d_op, &args?)?;
            emit(wire::polydiff_to_value(&r));
        }
        Command::Hochschild { d_op } => {
            let r = hochschild_d(&read_pd(&d_op)?);
            emit(wire::polydiff_to_value(&r));
        }
        Command::Cup { a, b } => {
            let r = cup(&read_pd(&a)?, &read_pd(&b)?)?;
            emit(wire::polydiff_to_value(&r));
        }
        Command::Gbracket { a, b } => {
            let r = g_bracket(&read_pd(&a)?, &read_pd(&b)?)?;
            emit(wire::polydiff_to_value(&r));
        }
        Command::Hkr { op } => match op {
            HkrOp::I { a } => {
                let r = hkr_i(&read_pv(&a)?);
                emit(wire::polydiff_to_value(&r));
            }
            HkrOp::P { d_op } => {
                let r = hkr_p(&read_pd(&d_op)?);
                emit(wire::polyvector_to_value(&r));
            }
            HkrOp::H { d_op, bounds } => {
                let op = read_pd(&d_op)?;
                let table =
                    HomotopyTable::new(op.dimension(), bounds.max_words, bounds.max_order);
                let r = table.h_apply(&op)?;
                emit(wire::polydiff_to_value(&r));
            }
        },
        Command::Cohomology {
            word_length,
            order,
            bounds,
        } => {
            let table = HomotopyTable::new(bounds.d, bounds.max_words, bounds.max_order);
            let dim = table.cohomology_dims(word_length, order)?;
            emit(json!({
                "schema": wire::SCHEMA,
                "type": "report",
                "word_length": word_length,
                "order": order,
                "dimension": dim,
                "exterior_dimension": expected_exterior_dim(bounds.d, word_length, order),
            }));
        }
        Command::Transfer { op } => match op {
            TransferOp::Psi {
                arity,
                inputs,
                bounds,
            } => {
                let inputs: Result<Vec<_>, _> = inputs.iter().map(read_pv).collect();
                let inputs = inputs?;
                let d = inputs
                    .first()
                    .map(PolyVector::dimension)
                    .unwrap_or(bounds.d);
                let table = HomotopyTable::new(d, bounds.max_words, bounds.max_order);
                let ctx = TransferContext::new(&table, arity.max(4))?;
                let r = ctx.psi_eval(arity, &inputs)?;
                emit(wire::polydiff_to_value(&r));
            }
            TransferOp::Q1 {
                arity,
                inputs,
                bounds,
            } => {
                let inputs: Result<Vec<_>, _> = inputs.iter().map(read_pv).collect();
                let inputs = inputs?;
                let d = inputs
                    .first()
                    .map(PolyVector::dimension)
                    .unwrap_or(bounds.d);
                let table = HomotopyTable::new(d, bounds.max_words, bounds.max_order);
                let ctx = TransferContext::new(&table, arity.max(4))?;
                let r = ctx.q1_eval(arity, &inputs)?;
                emit(wire::polyvector_to_value(&r));
            }
            TransferOp::Check {
                arity,
                samples,
                bounds,
            } => {
                use rand::SeedableRng;
                let table = HomotopyTable::new(bounds.d, bounds.max_words, bounds.max_order);
                let ctx = TransferContext::new(&table, arity + 1)?;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(bounds.seed);
                let mut tuples = Vec::new();
                for _ in 0..samples {
                    tuples.push(sample_letters(&mut rng, bounds.d, arity));
                    tuples.push(sample_letters(&mut rng, bounds.d, arity + 1));
                }
                let report = ctx.check_transfer(arity, &tuples)?;
                emit(json!({
                    "schema": wire::SCHEMA,
                    "type": "report",
                    "arity": report.arity,
                    "samples": report.samples,
                    "morphism_failures": report.morphism_failures,
                    "square_failures": report.square_failures,
                    "no_coverage": report.no_coverage,
                    "passed": report.passed(),
                }));
                return Ok(report.passed());
            }
        },
        Command::Twist { op } => match op {
            TwistOp::Mc { omega } => {
                let w = MCElement::new(read_pd_series(&omega)?)?;
                let residual = mc_residual_b(&w);
                emit(json!({
                    "schema": wire::SCHEMA,
                    "type": "report",
                    "maurer_cartan": mc_check_b(&w),
                    "residual_terms": residual.num_terms(),
                }));
            }
            TwistOp::Apply { omega, gamma } => {
                let w = MCElement::new(read_pd_series(&omega)?)?;
                let tw = twist_b(w)?;
                let g = read_pd_series(&gamma)?;
                emit(wire::polydiff_to_value(&tw.q1(&g)));
            }
            TwistOp::Morphism { omega, quadratic } => {
                let w = MCElement::new(read_pd_series(&omega)?)?;
                let c = rat_from_str(&quadratic)?;
                let d = w.dimension();
                let k = w
                    .op()
                    .terms()
                    .next()
                    .map(|(_, s)| s.truncation_order())
                    .unwrap_or(1);
                let we = op_letters_series(w.op());
                let mu = hoca_core::polydiff::mu_with_unit(
                    d,
                    FormalSeries::constant(Rat::from_integer(1.into()), k),
                );
                let mu_letter =
                    hoca_core::transfer::VLetter(mu.terms().next().unwrap().0.clone());
                let mut psi = |args: &[hoca_core::transfer::VLetter]| match args.len() {
                    1 => Ok(vec![(
                        args[0].clone(),
                        FormalSeries::constant(Rat::from_integer(1.into()), k),
                    )]),
                    2 => Ok(vec![(
                        mu_letter.clone(),
                        FormalSeries::constant(c.clone(), k),
                    )]),
                    _ => Ok(vec![]),
                };
                let target = twist_morphism_target(&mut psi, &we)?;
                let mut out = PolyDiffOp::zero(d);
                for (l, v) in target {
                    out.add_term(l.0 .0.clone(), l.0 .1.clone(), v);
                }
                emit(wire::polydiff_to_value(&out));
            }
            TwistOp::Grouplike { omega } => {
                let w = read_pd_series(&omega)?;
                let ok = grouplike_check(&op_letters_series(&w), 6);
                emit(json!({"schema": wire::SCHEMA, "type": "report", "grouplike": ok}));
            }
            TwistOp::Moyal { pi, bounds } => {
                let pi = match pi {
                    Some(p) => read_pd(&p)?,
                    None => standard_pi(bounds.d)?,
                };
                let w = moyal_series(&pi, bounds.hbar_order)?;
                emit(wire::polydiff_to_value(w.op()));
            }
        },
        Command::Descent { op } => match op {
            DescentOp::Fixed { bounds } => {
                use hoca_core::descent::*;
                let cx = gl_poly_toy(bounds.d, bounds.max_degree.min(2));
                let module = cx.module();
                let dd = cx.differential();
                let actions: Vec<BlockOperator> =
                    (0..cx.lie_dim).map(|s| cx.contraction(s)).collect();
                let fixed = fixed_subspace(&module, &actions, &dd)?;
                let dims: Vec<Value> = fixed
                    .iter()
                    .map(|(q, basis)| json!({"degree": q, "dimension": basis.len()}))
                    .collect();
                emit(json!({
                    "schema": wire::SCHEMA,
                    "type": "report",
                    "fixed_subspace": dims,
                }));
            }
        },
        Command::Graphs { op } => match op {
            GraphsOp::Enum {
                out,
                n,
                allow_loops,
            } => {
                let graphs = enumerate_graphs(&out, n, allow_loops, 100_000)?;
                let values: Vec<Value> = graphs.iter().map(wire::graph_to_value).collect();
                emit(json!({
                    "schema": wire::SCHEMA,
                    "type": "report",
                    "count": graphs.len(),
                    "graphs": values,
                }));
            }
            GraphsOp::Eval { graph, inputs } => {
                let g = wire::graph_from_value(&read_value(&graph)?)?;
                let inputs: Result<Vec<_>, _> = inputs.iter().map(read_pv).collect();
                let r = evaluate_graph_op(&g, &inputs?)?;
                emit(wire::polydiff_to_value(&r));
            }
            GraphsOp::Span {
                out,
                n,
                coeff_bound,
                deriv_bound,
                slot_bound,
                bounds,
            } => {
                let block = SpanBlock {
                    d: bounds.d,
                    out_degrees: out,
                    n,
                    coeff_bound,
                    input_deriv_bound: deriv_bound,
                    slot_bound,
                };
                let report = invariant_span_compare(&block, 100_000)?;
                emit(json!({
                    "schema": wire::SCHEMA,
                    "type": "report",
                    "rank_graphs": report.rank_graphs,
                    "rank_invariants": report.rank_invariants,
                    "rank_gl_invariants": report.rank_gl_invariants,
                    "graphs_considered": report.graphs_considered,
                    "graphs_in_block": report.graphs_in_block,
                    "contained": report.contained,
                    "equal": report.equal,
                }));
                return Ok(report.equal);
            }
        },
        Command::Audit { bounds, quick } => {
            let cfg = EngineConfig {
                d: bounds.d,
                max_poly_degree: bounds.max_degree,
                max_word_length: bounds.max_words,
                max_total_order: bounds.max_order,
                hbar_order: bounds.hbar_order,
                sample_seed: bounds.seed,
            };
            let report = run_audit(&cfg, quick)?;
            print!("{}", render_report(&report));
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(EngineError::Resource(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
