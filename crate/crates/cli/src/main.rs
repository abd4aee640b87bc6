//! `condind`: blockness, derivation witnesses and entropy bounds for joint matrices.
//!
//! Exit codes: 0 ok or bound holds, 1 parse or I/O error, 2 block matrix,
//! 3 no convergence, 4 invalid witness, 5 inequality violated.

mod input;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use condind::construction::{derive_nonblock, ConstructionConfig};
use condind::distribution::{entropy, mutual_information};
use condind::inequalities::{check_theorem1, check_theorem3, gamma_sweep, rate_bound, BoundVerdict, RatePoint};
use condind::io::{gamma_from_json, witness_from_json_normalized, witness_to_json};
use condind::structure::{block_split, r_complexity_bound, BlockSplit, Blockness};
use condind::witness::validate_witness;
use condind::Error;

#[derive(Parser)]
#[command(name = "condind", version, about = "Conditional independence derivations for discrete pairs")]
struct Cli {
    /// Emit machine-readable JSON with full precision.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    #[value(name = "1")]
    One,
    #[value(name = "3")]
    Three,
}

#[derive(Subcommand)]
enum Command {
    /// Block verdict, r-complexity bound and entropies of a matrix.
    Analyze { matrix: PathBuf },
    /// Build and validate a derivation witness.
    Derive {
        matrix: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        delta: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 50_000)]
        max_order: usize,
        /// Witness output file.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Validate a witness file.
    Verify {
        witness: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Check the order-k entropy bound for a coupled variable.
    Check {
        matrix: PathBuf,
        #[arg(long, conflicts_with = "sweep", required_unless_present = "sweep")]
        gamma: Option<PathBuf>,
        /// Search all deterministic maps into `--range` values.
        #[arg(long)]
        sweep: bool,
        #[arg(long, default_value_t = 4)]
        range: usize,
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long, value_enum, default_value = "1")]
        thm: Theorem,
    },
    /// Evaluate the rate bound for an order-k pair.
    Rate {
        #[arg(long, allow_negative_numbers = true)]
        u: f64,
        #[arg(long, allow_negative_numbers = true)]
        v: f64,
        #[arg(long, allow_negative_numbers = true)]
        w: f64,
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long, allow_negative_numbers = true)]
        h_alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        h_beta: f64,
    },
}

const OK: u8 = 0;
const FAILED: u8 = 1;
const BLOCK: u8 = 2;
const NO_CONVERGENCE: u8 = 3;
const INVALID_WITNESS: u8 = 4;
const VIOLATED: u8 = 5;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => report_error(&e, cli.json),
    };
    ExitCode::from(code)
}

fn report_error(e: &Error, as_json: bool) -> u8 {
    let code = match e {
        Error::IsBlock(_) => BLOCK,
        Error::NoConvergence { .. } | Error::OrderCapExceeded { .. } => NO_CONVERGENCE,
        _ => FAILED,
    };
    if as_json {
        let mut out = json!({ "error": e.to_string() });
        if let Error::IsBlock(split) = e {
            out["split"] = json!(split);
        }
        println!("{out}");
    } else {
        eprintln!("error: {e}");
        if let Error::IsBlock(split) = e {
            print_split(split);
        }
    }
    code
}

fn run(cli: &Cli) -> Result<u8, Error> {
    match &cli.command {
        Command::Analyze { matrix } => analyze(matrix, cli.json),
        Command::Derive { matrix, delta, tol, max_order, output } => {
            let cfg = ConstructionConfig { delta: *delta, step_tol: *tol, max_order: *max_order, ..Default::default() };
            derive(matrix, &cfg, output.as_deref(), cli.json)
        }
        Command::Verify { witness, tol } => verify(witness, *tol, cli.json),
        Command::Check { matrix, gamma, sweep, range, k, thm } => {
            check(matrix, gamma.as_deref().filter(|_| !sweep), *range, *k, *thm, cli.json)
        }
        Command::Rate { u, v, w, k, h_alpha, h_beta } => {
            let verdict = rate_bound(RatePoint::new(*u, *v, *w)?, *k, *h_alpha, *h_beta)?;
            if cli.json {
                println!("{}", json!(verdict));
            } else {
                print_verdict("order bound", &verdict.order_bound);
                print_verdict("generic bound", &verdict.generic);
            }
            Ok(if verdict.order_bound.holds { OK } else { VIOLATED })
        }
    }
}

fn print_split(split: &BlockSplit) {
    println!("rows1 {:?}", split.rows1);
    println!("rows2 {:?}", split.rows2);
    println!("cols1 {:?}", split.cols1);
    println!("cols2 {:?}", split.cols2);
}

fn analyze(path: &Path, as_json: bool) -> Result<u8, Error> {
    let j = input::read_matrix(path)?;
    let h_a = entropy(&j.row_marginal());
    let h_b = entropy(&j.col_marginal());
    let h_ab = j.entropy();
    let mi = mutual_information(&j);
    let (split, bound) = match block_split(&j)? {
        Blockness::Block(split) => (Some(split), None),
        Blockness::NotBlock => (None, Some(r_complexity_bound(&j)?)),
    };
    if as_json {
        let out = json!({
            "rows": j.rows(),
            "cols": j.cols(),
            "block": split.is_some(),
            "split": split,
            "r_complexity_bound": bound,
            "h_a": h_a,
            "h_b": h_b,
            "h_ab": h_ab,
            "mi": mi,
        });
        println!("{out}");
    } else {
        println!("shape {}x{}", j.rows(), j.cols());
        match (&split, bound) {
            (Some(split), _) => {
                println!("block yes");
                print_split(split);
            }
            (None, Some(bound)) => {
                println!("block no");
                println!("r-complexity bound {bound}");
            }
            (None, None) => unreachable!(),
        }
        println!("H(a) {h_a:.6}");
        println!("H(b) {h_b:.6}");
        println!("H(a,b) {h_ab:.6}");
        println!("I(a:b) {mi:.6}");
    }
    Ok(if split.is_some() { BLOCK } else { OK })
}

fn derive(path: &Path, cfg: &ConstructionConfig, output: Option<&Path>, as_json: bool) -> Result<u8, Error> {
    let j = input::read_matrix(path)?;
    let result = derive_nonblock(&j, cfg)?;
    if let Some(out) = output {
        fs::write(out, witness_to_json(&result.witness))
            .map_err(|e| Error::Parse(format!("{}: {e}", out.display())))?;
    }
    let order = result.witness.order();
    let max_cmi = result.report.max_step_cmi();
    if as_json {
        let out = json!({
            "order": order,
            "achieved_tv": result.achieved_tv,
            "max_step_cmi": max_cmi,
            "final_mi": result.report.final_mi,
            "verdict": result.report.verdict,
        });
        println!("{out}");
    } else {
        println!("order {order} achieved_tv {:.6} max_step_cmi {:.6}", result.achieved_tv, max_cmi);
    }
    Ok(OK)
}

fn verify(path: &Path, tol: f64, as_json: bool) -> Result<u8, Error> {
    let witness = witness_from_json_normalized(&input::read_text(path)?)?;
    let report = validate_witness(&witness, tol);
    let failing = report.failing_steps();
    if as_json {
        println!("{}", json!({ "report": report, "failing_steps": failing }));
    } else {
        println!("step cmi_given_row cmi_given_col marginal_tv status");
        for (t, s) in report.per_step.iter().enumerate() {
            let status = if failing.contains(&t) { "FAIL" } else { "ok" };
            println!("{t} {:.6} {:.6} {:.6} {status}", s.cmi_given_row, s.cmi_given_col, s.marginal_tv);
        }
        println!("final_mi {:.6}", report.final_mi);
        println!("verdict {}", if report.verdict { "valid" } else { "invalid" });
    }
    Ok(if report.verdict { OK } else { INVALID_WITNESS })
}

fn check(
    path: &Path,
    gamma: Option<&Path>,
    range: usize,
    k: u32,
    thm: Theorem,
    as_json: bool,
) -> Result<u8, Error> {
    let j = input::read_matrix(path)?;
    let verdict = match gamma {
        Some(g) => {
            let g = gamma_from_json(&input::read_text(g)?)?;
            let verdict = match thm {
                Theorem::One => check_theorem1(&j, &g, k)?,
                Theorem::Three => check_theorem3(&j, &g, k)?,
            };
            if as_json {
                println!("{}", json!(verdict));
            } else {
                print_verdict("bound", &verdict);
            }
            verdict
        }
        None => {
            // Deterministic maps have H(g|ab) = 0, where both bounds coincide.
            let sweep = gamma_sweep(&j, k, range)?;
            let map: Vec<usize> = (0..j.rows())
                .flat_map(|a| (0..j.cols()).map(move |b| (a, b)))
                .map(|(a, b)| (0..sweep.worst.range()).find(|&g| sweep.worst.prob(a, b, g) > 0.5).unwrap_or(0))
                .collect();
            if as_json {
                println!("{}", json!({ "verdict": sweep.verdict, "worst_map": map, "max_ratio": sweep.max_ratio }));
            } else {
                print_verdict("worst bound", &sweep.verdict);
                println!("worst map {map:?}");
                println!("max ratio {:.6}", sweep.max_ratio);
            }
            sweep.verdict
        }
    };
    Ok(if verdict.holds { OK } else { VIOLATED })
}

fn print_verdict(label: &str, v: &BoundVerdict) {
    println!(
        "{label}: lhs {:.6} rhs {:.6} slack {:.6} {}",
        v.lhs,
        v.rhs,
        v.slack,
        if v.holds { "holds" } else { "violated" }
    );
}
