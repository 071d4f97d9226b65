mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cayley_qmc::analysis::{
    clustering_decay, ordered_solution, phase_diagram_scan, projector_expectation_closed, projector_observable,
    Projector,
};
use cayley_qmc::boundary::{
    critical_j0, phase_region, solve_disordered, solve_ordered, solve_xy_only, xy_only_alpha_check,
};
use cayley_qmc::model::{operator_coeffs, transfer_coeffs, transfer_coeffs_numeric, xy_only_coeffs};
use cayley_qmc::state::{eval_finite, eval_recursive};
use cayley_qmc::verify::run_all;
use cayley_qmc::{BoundarySolution, Branch, Error, EvalContext, ModelParams, Observable, Pauli, TreeCoord, C64};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{emit, fmt_f64, to_json};

const EXIT_FAILURE: u8 = 1;
const EXIT_DOMAIN: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_USAGE: u8 = 64;
const THREADS_VAR: &str = "QMC_TREE_THREADS";

/// Quantum Markov chains for the Ising model with competing XY interactions on the binary Cayley tree.
#[derive(Parser, Debug)]
#[command(name = "cayley-qmc", version)]
struct Cli {
    /// Write the document to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct ParamArgs {
    /// Ising coupling J0.
    #[arg(long, allow_negative_numbers = true)]
    j0: f64,
    /// Competing XY coupling J.
    #[arg(long, allow_negative_numbers = true)]
    j: f64,
    /// Inverse temperature.
    #[arg(long, allow_negative_numbers = true)]
    beta: f64,
}

impl ParamArgs {
    fn params(&self) -> cayley_qmc::Result<ModelParams> {
        ModelParams::new(self.j0, self.j, self.beta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the boundary equations on every branch.
    Solve(ParamArgs),
    /// Operator and transfer coefficients, closed form next to the numeric extraction.
    Coeffs(ParamArgs),
    /// Evaluate the state on an observable read from a JSON file.
    Evaluate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        observable: PathBuf,
        #[arg(long, default_value = "plus", value_parser = parse_branch)]
        branch: Branch,
        /// Also evaluate the finite-volume state on the ball of this radius by dense algebra.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Sign of Δ and the threshold classification over a (J, J0) grid.
    PhaseDiagram {
        #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
        j_min: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        j_max: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        j0_min: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        j0_max: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Projector expectations on the ball of radius n, closed form and recursive.
    Projector {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value = "plus", value_parser = parse_branch)]
        branch: Branch,
    },
    /// Deviation |φ(a τ_g f) − φ(a) φ(τ_g f)| for a = f = σz with g = (1, …, 1).
    Cluster {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "plus", value_parser = parse_branch)]
        branch: Branch,
        #[arg(long, default_value_t = 1)]
        min_level: usize,
        #[arg(long, default_value_t = 8)]
        max_level: usize,
    },
    /// Run the acceptance suite.
    Verify {
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

fn parse_branch(s: &str) -> std::result::Result<Branch, Error> {
    s.parse()
}

fn complex(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn context(p: ModelParams, branch: Branch) -> cayley_qmc::Result<EvalContext> {
    let sol = match branch {
        Branch::Disordered => solve_disordered(&p)?,
        Branch::XyOnly => solve_xy_only(&p)?,
        ordered => ordered_solution(&p, ordered)?,
    };
    EvalContext::new(p, &sol)
}

#[derive(Serialize)]
struct SolveReport {
    params: ModelParams,
    theta: f64,
    delta: f64,
    classification: String,
    threshold: f64,
    /// `present`, `absent`, or `not_positive` when `|J| > J0`.
    ordered: &'static str,
    solutions: Vec<BoundarySolution>,
}

fn solve(a: ParamArgs) -> Result<String> {
    let p = a.params()?;
    let region = phase_region(&p)?;
    let mut solutions = vec![solve_disordered(&p)?];
    let ordered = match solve_ordered(&p) {
        Ok(Some((plus, minus))) => {
            solutions.push(plus);
            solutions.push(minus);
            "present"
        }
        Ok(None) => "absent",
        Err(Error::SolutionNotPositive { .. }) => "not_positive",
        Err(e) => return Err(e.into()),
    };
    if p.j0 == 0.0 {
        solutions.push(solve_xy_only(&p)?);
    }
    Ok(to_json(&SolveReport {
        params: p,
        theta: p.theta(),
        delta: region.delta,
        classification: region.classification.to_string(),
        threshold: region.threshold,
        ordered,
        solutions,
    })?)
}

fn coeffs(a: ParamArgs) -> Result<String> {
    let p = a.params()?;
    let closed = transfer_coeffs(&p);
    let numeric = transfer_coeffs_numeric(&p)?;
    let mut doc = serde_json::json!({
        "params": p,
        "operator": operator_coeffs(&p),
        "transfer_closed": closed,
        "transfer_numeric": numeric,
        "max_rel_diff": closed.max_rel_diff(&numeric),
        "lambda": closed.c1 / closed.c3 - 0.5,
        "critical_j0": critical_j0(p.j, p.beta),
    });
    if p.j0 == 0.0 {
        doc["xy_only"] = serde_json::json!({
            "coeffs": xy_only_coeffs(&p)?,
            "alpha_check": xy_only_alpha_check(&p)?,
        });
    }
    Ok(to_json(&doc)?)
}

fn evaluate(a: ParamArgs, path: &PathBuf, branch: Branch, depth: Option<usize>) -> Result<String> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let obs = Observable::from_json(&text)?;
    let ctx = context(a.params()?, branch)?;
    let mut doc = serde_json::json!({
        "params": ctx.params,
        "branch": branch,
        "terms": obs.terms.len(),
        "support_levels": obs.max_level(),
        "value": complex(eval_recursive(&ctx, &obs)),
    });
    if let Some(n) = depth {
        doc["depth"] = n.into();
        doc["finite_value"] = serde_json::to_value(complex(eval_finite(&ctx, &obs, n)?))?;
    }
    Ok(to_json(&doc)?)
}

fn phase_diagram(j: (f64, f64), j0: (f64, f64), beta: f64, resolution: usize, format: Format) -> Result<String> {
    let rows = phase_diagram_scan(j, j0, beta, resolution)?;
    Ok(match format {
        Format::Json => to_json(&rows)?,
        Format::Csv => {
            let mut s = String::from("j,j0,delta,classification,threshold\n");
            for r in &rows {
                let delta = r.delta.map(fmt_f64).unwrap_or_default();
                let class = r.classification.map(|c| c.to_string()).unwrap_or_else(|| "singular".into());
                writeln!(s, "{},{},{},{},{}", fmt_f64(r.j), fmt_f64(r.j0), delta, class, fmt_f64(r.threshold))?;
            }
            s
        }
    })
}

#[derive(Serialize)]
struct ProjectorRow {
    kind: Projector,
    closed: f64,
    recursive: [f64; 2],
}

fn projector(a: ParamArgs, n: usize, branch: Branch) -> Result<String> {
    let p = a.params()?;
    let ctx = context(p, branch)?;
    let rows = [Projector::P, Projector::Q]
        .into_iter()
        .map(|kind| {
            Ok(ProjectorRow {
                kind,
                closed: projector_expectation_closed(&p, n, branch, kind)?,
                recursive: complex(eval_recursive(&ctx, &projector_observable(n, kind))),
            })
        })
        .collect::<cayley_qmc::Result<Vec<_>>>()?;
    Ok(to_json(&serde_json::json!({ "params": p, "branch": branch, "n": n, "rows": rows }))?)
}

fn cluster(a: ParamArgs, branch: Branch, min_level: usize, max_level: usize) -> Result<String> {
    if min_level > max_level {
        return Err(Error::Domain(format!("min-level {min_level} exceeds max-level {max_level}")).into());
    }
    let ctx = context(a.params()?, branch)?;
    let z = Observable::single_pauli(TreeCoord::root(), Pauli::Z);
    let levels: Vec<usize> = (min_level..=max_level).collect();
    let d = clustering_decay(&ctx, &z, &z, &levels);
    let rows: Vec<_> = d
        .rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "level": r.level,
                "correlation": complex(r.correlation),
                "product": complex(r.product),
                "deviation": r.deviation,
            })
        })
        .collect();
    Ok(to_json(&serde_json::json!({
        "params": ctx.params,
        "branch": branch,
        "rows": rows,
        "fitted_ratio": d.fitted_ratio,
        "lambda": d.lambda,
    }))?)
}

fn verify(format: Option<Format>) -> Result<(String, bool)> {
    let results = run_all();
    let ok = results.iter().all(|r| r.passed);
    let text = match format {
        Some(Format::Json) => to_json(&results)?,
        Some(Format::Csv) => {
            let mut s = String::from("id,name,passed\n");
            for r in &results {
                writeln!(s, "{},{},{}", r.id, r.name, r.passed)?;
            }
            s
        }
        None => {
            let mut s = String::new();
            for r in &results {
                writeln!(s, "{r}")?;
            }
            let passed = results.iter().filter(|r| r.passed).count();
            writeln!(s, "{passed}/{} criteria passed", results.len())?;
            s
        }
    };
    Ok((text, ok))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Domain(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let (text, ok) = match cli.command {
        Command::Solve(a) => (solve(a)?, true),
        Command::Coeffs(a) => (coeffs(a)?, true),
        Command::Evaluate { params, observable, branch, depth } => (evaluate(params, &observable, branch, depth)?, true),
        Command::PhaseDiagram { j_min, j_max, j0_min, j0_max, beta, resolution, format } => {
            (phase_diagram((j_min, j_max), (j0_min, j0_max), beta, resolution, format)?, true)
        }
        Command::Projector { params, n, branch } => (projector(params, n, branch)?, true),
        Command::Cluster { params, branch, min_level, max_level } => (cluster(params, branch, min_level, max_level)?, true),
        Command::Verify { format } => verify(format)?,
    };
    emit(cli.out.as_deref(), &text).context("writing output")?;
    Ok(ok)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Resource(_)) => EXIT_RESOURCE,
        Some(Error::ModelInconsistency { .. }) => EXIT_FAILURE,
        Some(_) => EXIT_DOMAIN,
        None => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
