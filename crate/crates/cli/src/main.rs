//! `bfm` — generate procurement instances, sweep mechanisms over random
//! tapes, and run the verification suites.
//!
//! Sweeps print CSV (one row per tape seed); single outcomes and
//! verification reports are JSON. Every source of randomness is keyed by an
//! explicit seed, so repeating an invocation with the same flags reproduces
//! the output byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use bfm_core::{
    arrival_order, broken_control_suite, brute_force_opt, gen_constraint, gen_instance,
    generate_xos_hard_pair, load_instance, mix_seed, run_suite, save_instance, ConstraintKind,
    ConstraintSpec, Family, GenParams, Instance, MechanismId, MechanismOutcome, RandomTape, Scale,
    ValueOracle, VerificationReport,
};

#[derive(Parser)]
#[command(name = "bfm", version, about = "Budget-feasible procurement mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance (or a planted-optimum pair) as JSON.
    Gen(GenArgs),
    /// Sweep one mechanism over tape seeds and print a CSV row per run.
    Run(RunArgs),
    /// Run verification suites and report violations.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Valuation family: additive | cut | coverage | xos-hard.
    family: String,
    /// Number of agents.
    #[arg(long)]
    n: usize,
    /// Edge / membership probability for cut and coverage families.
    #[arg(long, default_value_t = 0.4)]
    p: f64,
    /// Budget as a fraction of the total cost.
    #[arg(long, default_value_t = 0.5)]
    budget_frac: f64,
    /// Absolute budget, overriding --budget-frac.
    #[arg(long)]
    budget: Option<f64>,
    /// Independence constraint: none | cardinality | partition | matching.
    #[arg(long, default_value = "none")]
    constraint: String,
    /// Hardness knob for xos-hard; the hidden optimum gap is n^(1 - eps/2).
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path. xos-hard writes <out>.base.json, <out>.planted.json and
    /// <out>.r.json instead of a single file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Instance file produced by `bfm gen`.
    #[arg(long)]
    instance: PathBuf,
    /// Mechanism id: simultaneous-greedy | gensm-main | gensm-online | sks |
    /// monsm-constrained | gensm-constrained | broken-first-price.
    #[arg(long)]
    mechanism: String,
    /// How many tape seeds to sweep.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// First tape seed of the sweep.
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    /// Base seed for the per-tape arrival orders used by the online rules.
    #[arg(long, default_value_t = 7)]
    order_seed: u64,
    /// Also compute the exhaustive optimum (n <= 20) and fill the opt and
    /// ratio columns.
    #[arg(long)]
    with_opt: bool,
    /// Worker threads for the sweep; 0 uses every core. Rows are sorted by
    /// seed either way.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every outcome, trace included, as a JSON array.
    #[arg(long)]
    details: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// truthfulness | feasibility | sampling-lemma | feige | ratios |
    /// submodularity | all.
    #[arg(default_value = "all")]
    suite: String,
    /// Master seed. The BFM_SEED environment variable overrides this flag.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// smoke | desk | full.
    #[arg(long, default_value = "desk")]
    scale: String,
    /// Write the full JSON reports here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check the deliberately manipulable first-price control instead. Its
    /// report fails by design, so the exit status is 1 when the harness is
    /// working.
    #[arg(long)]
    broken: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => gen(args).map(|()| ExitCode::SUCCESS),
        Command::Run(args) => run(args).map(|()| ExitCode::SUCCESS),
        Command::Verify(args) => verify(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn gen(args: GenArgs) -> Result<()> {
    if args.family == "xos-hard" {
        let pair = generate_xos_hard_pair(args.n, args.eps, args.seed)?;
        let base = args.out.with_extension("base.json");
        let planted = args.out.with_extension("planted.json");
        let r = args.out.with_extension("r.json");
        save_instance(&base, &pair.base)?;
        save_instance(&planted, &pair.planted)?;
        let r_doc = serde_json::json!({ "r": pair.r, "tau": pair.tau });
        std::fs::write(&r, format!("{:#}\n", r_doc))
            .with_context(|| format!("writing {}", r.display()))?;
        for path in [&base, &planted, &r] {
            println!("wrote {}", path.display());
        }
        return Ok(());
    }

    let family: Family = args.family.parse().map_err(anyhow::Error::msg)?;
    if !(0.0..=1.0).contains(&args.p) {
        bail!("--p must lie in [0, 1], got {}", args.p);
    }
    if args.budget.is_none() && args.budget_frac <= 0.0 {
        bail!("--budget-frac must be positive, got {}", args.budget_frac);
    }
    let params = GenParams {
        p: args.p,
        budget_frac: args.budget_frac,
    };
    let mut inst = gen_instance(family, args.n, &params, args.seed);
    let kind: ConstraintKind = args.constraint.parse().map_err(anyhow::Error::msg)?;
    if kind != ConstraintKind::None {
        inst.constraint = gen_constraint(kind, args.n, mix_seed(&[args.seed, 5]));
    }
    if let Some(b) = args.budget {
        inst.budget = b;
    }
    inst.validate()?;
    save_instance(&args.out, &inst)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

const CSV_HEADER: &str = "mechanism,seed,n,value,opt,ratio,total_payment,budget,queries,winner_count";

#[derive(Serialize)]
struct Detail<'a> {
    seed: u64,
    order: &'a [usize],
    outcome: &'a MechanismOutcome,
}

fn run(args: RunArgs) -> Result<()> {
    let inst = load_instance(&args.instance)
        .with_context(|| format!("loading {}", args.instance.display()))?;
    inst.validate()?;
    let id: MechanismId = args.mechanism.parse().map_err(anyhow::Error::msg)?;

    let opt = if args.with_opt {
        if inst.n > 20 {
            bail!("--with-opt is exhaustive and limited to 20 agents, got {}", inst.n);
        }
        let oracle = ValueOracle::new(&inst.valuation);
        let domain: Vec<usize> = (0..inst.n).collect();
        // The constrained rules compete against the constrained optimum;
        // everything else against the budget-only one.
        let sys = match id {
            MechanismId::MonsmConstrained | MechanismId::GensmConstrained => &inst.constraint,
            _ => &ConstraintSpec::None,
        };
        Some(brute_force_opt(&oracle, &domain, &inst.costs, Some(inst.budget), sys).value)
    } else {
        None
    };

    let sweep = || -> Result<Vec<(u64, Vec<usize>, MechanismOutcome)>, anyhow::Error> {
        (0..args.seeds)
            .into_par_iter()
            .map(|k| {
                let seed = args.first_seed + k;
                let order = arrival_order(inst.n, mix_seed(&[args.order_seed, seed]));
                let tape = RandomTape::draw(seed, inst.n);
                let out = run_mechanism_row(id, &inst, &order, &tape)?;
                Ok((seed, order, out))
            })
            .collect()
    };
    let mut rows = if args.jobs == 0 {
        sweep()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .context("building the worker pool")?
            .install(sweep)?
    };
    rows.sort_by_key(|(seed, _, _)| *seed);

    let mut csv = String::with_capacity(64 * (rows.len() + 1));
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for (seed, _, out) in &rows {
        let (opt_cell, ratio_cell) = match opt {
            None => (String::new(), String::new()),
            Some(opt) => (format!("{opt}"), format!("{}", opt / out.value)),
        };
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            id,
            seed,
            inst.n,
            out.value,
            opt_cell,
            ratio_cell,
            out.total_payment(),
            inst.budget,
            out.queries,
            out.winners.len()
        )
        .expect("writing to a String cannot fail");
    }
    match &args.out {
        None => print!("{csv}"),
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
    }

    if let Some(path) = &args.details {
        let details: Vec<Detail> = rows
            .iter()
            .map(|(seed, order, out)| Detail {
                seed: *seed,
                order,
                outcome: out,
            })
            .collect();
        let doc = serde_json::to_string_pretty(&details)?;
        std::fs::write(path, format!("{doc}\n"))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote details to {}", path.display());
    }
    Ok(())
}

fn run_mechanism_row(
    id: MechanismId,
    inst: &Instance,
    order: &[usize],
    tape: &RandomTape,
) -> Result<MechanismOutcome> {
    bfm_core::run_mechanism(id, inst, &inst.costs, Some(order), tape)
        .with_context(|| format!("running {id}"))
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let master = match std::env::var("BFM_SEED") {
        Ok(raw) => raw
            .parse::<u64>()
            .with_context(|| format!("BFM_SEED must be an unsigned integer, got '{raw}'"))?,
        Err(_) => args.seed,
    };
    let scale: Scale = args.scale.parse().map_err(anyhow::Error::msg)?;
    let reports = if args.broken {
        vec![broken_control_suite(master, scale)]
    } else {
        run_suite(&args.suite, master, scale).map_err(anyhow::Error::msg)?
    };

    let mut all_passed = true;
    for report in &reports {
        all_passed &= report.passed();
        print_report(report);
    }
    if let Some(path) = &args.out {
        write_reports(path, &reports)?;
        println!("wrote {}", path.display());
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn print_report(report: &VerificationReport) {
    let status = if report.passed() { "PASS" } else { "FAIL" };
    println!(
        "{status} {:<32} trials={:<9} violations={}",
        report.suite,
        report.trials,
        report.violations.len()
    );
    for (key, value) in &report.stats {
        println!("       {key} = {value}");
    }
    for notice in &report.notices {
        println!("       note: {notice}");
    }
    for violation in report.violations.iter().take(3) {
        println!(
            "       violation: {} tape={} {}",
            violation.instance, violation.tape_seed, violation.detail
        );
    }
}

fn write_reports(path: &Path, reports: &[VerificationReport]) -> Result<()> {
    let doc = serde_json::to_string_pretty(reports)?;
    std::fs::write(path, format!("{doc}\n"))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
