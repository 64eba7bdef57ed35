use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use veclab::binary::{binary_from_async, commutativity_check, BinaryError};
use veclab::explore::{
    check_properties, evaluate, explore, fuzz, run_case_suite, run_case_suite_with_values, split_decision_scenario,
    ExploreOptions, ExploreOutcome, FuzzOptions,
};
use veclab::sim::{replay, run_scenario, ScenarioConfig, SchedulerSpec, SimError, Trace};

const PASS: u8 = 0;
const USAGE: u8 = 1;
const COUNTEREXAMPLE: u8 = 2;
const BOUND_EXHAUSTED: u8 = 3;

#[derive(Parser)]
#[command(name = "veclab", about = "Vector consensus simulator, explorer and checker", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the run's (or counterexample's) trace here as JSONL.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and check its properties.
    Run {
        scenario: PathBuf,
        /// Override the random scheduler's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_events: Option<u64>,
        #[arg(long)]
        fairness_bound: Option<u64>,
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
        tie_rule: u8,
        #[command(flatten)]
        out: Output,
    },
    /// Run the scripted case schedules.
    CaseSuite {
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
        tie_rule: u8,
        #[command(flatten)]
        out: Output,
    },
    /// Seeded random runs over the crash grid.
    Fuzz {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1000)]
        seeds: u64,
        #[arg(long)]
        max_events: Option<u64>,
        #[arg(long)]
        fairness_bound: Option<u64>,
        /// Zero uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        no_minimize: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Exhaustive interleaving search from the scenario's start.
    Explore {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1_000)]
        max_depth: usize,
        #[arg(long, default_value_t = 5_000_000)]
        max_configs: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        no_dedupe: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Re-execute a trace and check it reproduces its verdict.
    Replay {
        trace_file: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare the two termination paradigms over every instance.
    Commute {
        n: usize,
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
        tie_rule: u8,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    Version,
}

#[derive(Debug)]
enum CliError {
    Sim(SimError),
    Binary(BinaryError),
    Io(PathBuf, std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Binary(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl From<BinaryError> for CliError {
    fn from(e: BinaryError) -> Self {
        CliError::Binary(e)
    }
}

fn write_report(path: &Option<PathBuf>, value: &impl Serialize) -> Result<(), CliError> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        std::fs::write(p, text + "\n").map_err(|e| CliError::Io(p.clone(), e))?;
    }
    Ok(())
}

fn write_trace(path: &Path, trace: &Trace) -> Result<(), CliError> {
    trace.write_to(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn lift_line(trace: &Trace, tie: u8) -> String {
    match binary_from_async(trace, tie) {
        Ok(l) => format!("binary (tie {tie}): {}", l.bit),
        Err(BinaryError::NotABit { .. }) => "binary: n/a (initial values are not bits)".into(),
        Err(e) => format!("binary (tie {tie}): none ({e})"),
    }
}

fn print_trace(trace: &Trace) {
    let v = &trace.verdict;
    println!("stop: {} after {} events, {} undelivered", v.stop, v.event_count, v.undelivered.len());
    for (i, o) in v.outcomes.iter().enumerate() {
        println!("  P{}: {}", i + 1, o);
    }
    println!("config hash: {}", v.config_hash);
}

fn cmd_run(
    scenario: &Path,
    seed: Option<u64>,
    max_events: Option<u64>,
    fairness_bound: Option<u64>,
    tie: u8,
    out: &Output,
) -> Result<u8, CliError> {
    let mut cfg = ScenarioConfig::load(scenario)?;
    if let Some(m) = max_events {
        cfg.bounds.max_events = m;
    }
    if seed.is_some() || fairness_bound.is_some() {
        let (s0, b0) = match cfg.scheduler {
            SchedulerSpec::Random { seed, fairness_bound } => (seed, fairness_bound),
            _ => (0, veclab::sim::DEFAULT_FAIRNESS_BOUND),
        };
        cfg.scheduler =
            SchedulerSpec::Random { seed: seed.unwrap_or(s0), fairness_bound: fairness_bound.unwrap_or(b0) };
    }
    cfg.validate()?;
    let trace = run_scenario(&cfg)?;
    let config = replay(&trace)?;
    let report = evaluate(&config, Some(trace.verdict.stop));
    print_trace(&trace);
    println!("properties: {report}");
    println!("{}", lift_line(&trace, tie));
    if let Some(p) = &out.trace {
        write_trace(p, &trace)?;
    }
    write_report(&out.report, &serde_json::json!({ "verdict": trace.verdict, "properties": report }))?;
    Ok(if report.is_ok() { PASS } else { COUNTEREXAMPLE })
}

fn cmd_case_suite(tie: u8, out: &Output) -> Result<u8, CliError> {
    let results = run_case_suite()?;
    for r in &results {
        println!("{}", r.summary());
    }
    let bits = [1, 1, 0, 0, 1];
    let lifted = run_case_suite_with_values(&veclab::binary::bit_values(&bits))?;
    let mut lift_failures = 0;
    for r in lifted.iter().filter(|r| r.report.agreement.is_pass()) {
        if binary_from_async(&r.trace, tie).is_err() {
            lift_failures += 1;
        }
    }
    println!("binary lift with bits {bits:?}, tie {tie}: {} traces, {lift_failures} failures", lifted.len());

    let split = run_scenario(&split_decision_scenario())?;
    let split_report = check_properties(&split)?;
    println!("illustration: crash-free split decision");
    print_trace(&split);
    println!("properties: {split_report}");
    if let Some(p) = &out.trace {
        write_trace(p, &split)?;
    }
    write_report(&out.report, &serde_json::json!({ "cases": results, "split_decision": split_report }))?;
    let ok = results.iter().all(|r| r.passed()) && lift_failures == 0;
    println!("case suite: {}", if ok { "pass" } else { "FAIL" });
    Ok(if ok { PASS } else { COUNTEREXAMPLE })
}

fn cmd_fuzz(
    scenario: &Path,
    seeds: u64,
    max_events: Option<u64>,
    fairness_bound: Option<u64>,
    workers: usize,
    no_minimize: bool,
    out: &Output,
) -> Result<u8, CliError> {
    let cfg = ScenarioConfig::load(scenario)?;
    let mut opts = FuzzOptions::new(cfg.n, seeds);
    opts.rules = cfg.rules;
    opts.workers = workers;
    opts.minimize = !no_minimize;
    opts.max_events = max_events.unwrap_or(cfg.bounds.max_events);
    if let Some(b) = fairness_bound {
        opts.fairness_bound = b;
    } else if let SchedulerSpec::Random { fairness_bound, .. } = cfg.scheduler {
        opts.fairness_bound = fairness_bound;
    }
    opts.binary_lift = cfg.initial_values.iter().all(|v| matches!(v.as_bytes(), [0 | 1]));
    opts.initial_values = Some(cfg.initial_values);
    let report = fuzz(&opts)?;
    println!("{}", report.summary());
    if let (Some(p), Some(c)) = (&out.trace, &report.counterexample) {
        write_trace(p, c.minimized.as_ref().unwrap_or(&c.trace))?;
    }
    write_report(&out.report, &report)?;
    Ok(if report.counterexample.is_some() || report.lift.failed > 0 { COUNTEREXAMPLE } else { PASS })
}

fn cmd_explore(
    scenario: &Path,
    max_depth: usize,
    max_configs: u64,
    workers: usize,
    no_dedupe: bool,
    out: &Output,
) -> Result<u8, CliError> {
    let cfg = ScenarioConfig::load(scenario)?;
    let opts = ExploreOptions { max_depth, max_configs, dedupe: !no_dedupe, workers, collect_leaves: false };
    let report = explore(&cfg, &opts)?;
    println!("{}", report.summary());
    write_report(&out.report, &report)?;
    Ok(match &report.outcome {
        ExploreOutcome::AllPass => PASS,
        ExploreOutcome::Counterexample { trace, .. } => {
            if let Some(p) = &out.trace {
                write_trace(p, trace)?;
            }
            COUNTEREXAMPLE
        }
        ExploreOutcome::BoundExhausted => BOUND_EXHAUSTED,
    })
}

fn cmd_replay(path: &Path, report_path: &Option<PathBuf>) -> Result<u8, CliError> {
    let trace = Trace::read_from(path)?;
    let config = replay(&trace)?;
    let report = evaluate(&config, Some(trace.verdict.stop));
    println!("replay: verdict reproduced");
    print_trace(&trace);
    println!("properties: {report}");
    write_report(report_path, &serde_json::json!({ "verdict": trace.verdict, "properties": report }))?;
    Ok(if report.is_ok() { PASS } else { COUNTEREXAMPLE })
}

fn cmd_commute(n: usize, tie: u8, report_path: &Option<PathBuf>) -> Result<u8, CliError> {
    let report = commutativity_check(n, tie)?;
    println!("{}", report.summary());
    for m in &report.mismatches {
        println!("  mismatch bits={:?} faulty={:?}: {:?} vs {:?}", m.bits, m.faulty, m.traditional, m.new_paradigm);
    }
    write_report(report_path, &report)?;
    Ok(if report.mismatches.is_empty() { PASS } else { COUNTEREXAMPLE })
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { scenario, seed, max_events, fairness_bound, tie_rule, out } => {
            cmd_run(&scenario, seed, max_events, fairness_bound, tie_rule, &out)
        }
        Command::CaseSuite { tie_rule, out } => cmd_case_suite(tie_rule, &out),
        Command::Fuzz { scenario, seeds, max_events, fairness_bound, workers, no_minimize, out } => {
            cmd_fuzz(&scenario, seeds, max_events, fairness_bound, workers, no_minimize, &out)
        }
        Command::Explore { scenario, max_depth, max_configs, workers, no_dedupe, out } => {
            cmd_explore(&scenario, max_depth, max_configs, workers, no_dedupe, &out)
        }
        Command::Replay { trace_file, report } => cmd_replay(&trace_file, &report),
        Command::Commute { n, tie_rule, report } => cmd_commute(n, tie_rule, &report),
        Command::Version => {
            println!("veclab {} (trace format {})", env!("CARGO_PKG_VERSION"), veclab::sim::TRACE_FORMAT);
            Ok(PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { PASS });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE)
        }
    }
}
