//! `qgt`: design, plan, generate, encode, decode and simulate quantitative
//! group tests from the command line.
//!
//! Exit codes: 0 success, 1 I/O or format error, 2 infeasible request or
//! usage error, 3 decoding finished without resolving every test.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use qgt_core::design::{
    compare_csv, compare_rows, default_degree, make_plan, optimize_psi, table_rows, tables_csv,
    DesignResult,
};
use qgt_core::qgt::io::{
    outcome_to_json, plan_from_json, plan_to_json, results_from_json, results_to_json,
    support_from_json, support_to_json,
};
use qgt_core::qgt::{encode, peel_decode, TestPlan};
use qgt_core::sim::{run_sweep, run_trials, sample_support_seeded, sweep_csv, TrialConfig};
use qgt_core::QgtError;

const EXIT_IO: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;

#[derive(Parser)]
#[command(name = "qgt", version, about = "Non-adaptive quantitative group testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct TArg {
    /// Defectives each test node can resolve (1..=4)
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    t: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise a degree profile and print the design as JSON
    Design {
        #[command(flatten)]
        t: TArg,
        /// Maximum left degree (default: 18 for t=1, else 17)
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan parameters (M, r, s, m) for a population
    Plan {
        #[arg(long = "N")]
        n: u64,
        #[arg(long = "K")]
        k: u64,
        #[command(flatten)]
        t: TArg,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a test plan file, and optionally a random support file
    Gen {
        #[arg(long = "N")]
        n: u64,
        #[arg(long = "K")]
        k: u64,
        #[command(flatten)]
        t: TArg,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Test plan output file
        #[arg(long)]
        out: PathBuf,
        /// Also write an i.i.d. support with K/N defect probability here
        #[arg(long)]
        support: Option<PathBuf>,
    },
    /// Compute test results for a plan and a support
    Encode {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        support: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the defective set from test results
    Decode {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo error probability at the planner's m or over a sweep
    Simulate {
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "K")]
        k: f64,
        #[command(flatten)]
        t: TArg,
        #[arg(long)]
        d: Option<usize>,
        /// Comma-separated test budgets; default is the planner's m
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Emit CSV instead of JSON
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep d and print c(t,d), ℓ and the profiles as CSV
    Tables {
        #[command(flatten)]
        t: TArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic test counts against the two baseline schemes, as CSV
    Compare {
        #[arg(long = "N")]
        n: f64,
        /// Comma-separated K values (default 2^6..2^20)
        #[arg(long = "K", value_delimiter = ',')]
        k: Vec<f64>,
        /// Maximum left degree for every t (default per t)
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<QgtError>() {
        Some(e) if e.is_infeasible() => EXIT_INFEASIBLE,
        Some(
            QgtError::UnsupportedT(_) | QgtError::InvalidParameter(_) | QgtError::FieldDegree(_),
        ) => EXIT_INFEASIBLE,
        _ => EXIT_IO,
    }
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    let mut text = text.to_owned();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialisable")
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn design_for(t: u8, d: Option<usize>) -> anyhow::Result<DesignResult> {
    let t = t as usize;
    Ok(optimize_psi(t, d.unwrap_or_else(|| default_degree(t)))?)
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Design { t, d, out } => {
            let res = design_for(t.t, d)?;
            write_output(out.as_deref(), &json(&res))?;
        }
        Command::Plan { n, k, t, d, out } => {
            let plan = make_plan(n, k, &design_for(t.t, d)?)?;
            write_output(out.as_deref(), &json(&plan))?;
        }
        Command::Gen {
            n,
            k,
            t,
            d,
            seed,
            out,
            support,
        } => {
            let seed = seed_or_entropy(seed);
            let design = design_for(t.t, d)?;
            let plan = make_plan(n, k, &design)?;
            let n = usize::try_from(n).context("N too large")?;
            let test_plan = TestPlan::sample(
                n,
                plan.m_nodes,
                plan.r,
                plan.t,
                &design.lambda_star,
                seed,
            )?;
            write_output(Some(&out), &plan_to_json(&test_plan))?;
            if let Some(path) = support {
                let gamma = k as f64 / n as f64;
                let x = sample_support_seeded(n, gamma, seed.wrapping_add(1))?;
                write_output(Some(&path), &support_to_json(&x))?;
            }
            eprintln!(
                "N = {n}, M = {}, r = {}, s = {}, m = {}",
                plan.m_nodes, plan.r, plan.s, plan.m
            );
        }
        Command::Encode { plan, support, out } => {
            let plan = plan_from_json(&read(&plan)?)?;
            let x = support_from_json(&read(&support)?, plan.graph().n())?;
            let y = encode(&plan, &x)?;
            write_output(out.as_deref(), &results_to_json(&y))?;
        }
        Command::Decode { plan, results, out } => {
            let plan = plan_from_json(&read(&plan)?)?;
            let y = results_from_json(&read(&results)?, &plan)?;
            let outcome = peel_decode(&plan, &y, None)?;
            write_output(out.as_deref(), &outcome_to_json(&outcome))?;
            if outcome.stalled || outcome.failed_nodes > 0 {
                eprintln!(
                    "decoding incomplete: {} unresolved nodes, {} failures",
                    outcome.unresolved_nodes, outcome.failed_nodes
                );
                return Ok(ExitCode::from(EXIT_INCOMPLETE));
            }
        }
        Command::Simulate {
            n,
            k,
            t,
            d,
            m,
            trials,
            seed,
            jobs,
            csv,
            out,
        } => {
            let seed = seed_or_entropy(seed);
            let design = design_for(t.t, d)?;
            let config = TrialConfig {
                n,
                k,
                t: design.t,
                d: design.d,
                nodes_override: None,
                trials,
                seed,
            };
            let reports = if m.is_empty() {
                vec![run_trials(&config, &design, jobs)?]
            } else {
                run_sweep(&config, &design, &m, jobs)?
            };
            for r in reports.iter().filter(|r| r.skipped.is_some()) {
                eprintln!("warning: {}", r.skipped.as_deref().unwrap_or_default());
            }
            if csv {
                write_output(out.as_deref(), &sweep_csv(&reports))?;
            } else {
                #[derive(Serialize)]
                struct Report<'a> {
                    config: &'a TrialConfig,
                    c: f64,
                    ell: f64,
                    reports: &'a [qgt_core::sim::SimReport],
                }
                let body = Report {
                    config: &config,
                    c: design.c,
                    ell: design.ell,
                    reports: &reports,
                };
                write_output(out.as_deref(), &json(&body))?;
            }
        }
        Command::Tables { t, out } => {
            let rows = table_rows(t.t as usize)?;
            write_output(out.as_deref(), &tables_csv(&rows))?;
        }
        Command::Compare { n, k, d, out } => {
            let ks = if k.is_empty() {
                (6..=20).map(|e| 2f64.powi(e)).collect()
            } else {
                k
            };
            if let Some(bad) = ks.iter().find(|&&k| !(k > 1.0 && k < n)) {
                bail!(QgtError::OutOfRegime(format!("K = {bad} outside (1, N)")));
            }
            let designs = (1..=3)
                .map(|t| optimize_psi(t, d.unwrap_or_else(|| default_degree(t))))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = compare_rows(n, &ks, &designs)?;
            write_output(out.as_deref(), &compare_csv(&rows, &designs))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
