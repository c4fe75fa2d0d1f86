//! Command-line front end for the out-of-coverage V2V scheduling simulator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error,
//! 3 comparison gate failure (for CI gating).

mod scenario_source;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nnkit::Checkpoint;
use vrls_sim::eval::{evaluate, make_scheduler, EvalConfig, RunReport, SummaryStats};
use vrls_sim::scenario::ScenarioConfig;
use vrls_sim::simcore::WindowRecord;
use vrls_sim::vrls::{train, CurvePoint, TrainConfig};
use vrls_sim::SimError;

use scenario_source::load_scenario;

#[derive(Parser)]
#[command(
    name = "vrls",
    about = "Simulate and train schedulers for periodic V2V broadcasts in a delimited out-of-coverage area",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the learning scheduler and write a checkpoint plus a curve file.
    Train(TrainArgs),
    /// Evaluate one scheduler and write raw windows plus a summary.
    Eval(EvalArgs),
    /// Evaluate several schedulers across seeds into one combined CSV.
    Compare(CompareArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Built-in scenario name (mcd, mcd_nofade, scd_i, scd_ii, scd_iii) or a
    /// scenario file path.
    #[arg(long, env = "VRLS_SCENARIO")]
    scenario: String,
    #[arg(long, default_value_t = 500, env = "VRLS_EPOCHS")]
    epochs: u64,
    #[arg(long, default_value_t = 16, env = "VRLS_WORKERS")]
    workers: usize,
    /// Deterministic lockstep training (averaged gradients, fixed order).
    #[arg(long, env = "VRLS_SYNC")]
    sync: bool,
    #[arg(long, default_value_t = 0, env = "VRLS_SEED")]
    seed: u64,
    /// Warm-start checkpoint; enables the retraining workflow.
    #[arg(long, env = "VRLS_INIT_CHECKPOINT")]
    init_checkpoint: Option<PathBuf>,
    /// Continue the step-size schedule from the loaded checkpoint's epoch
    /// instead of restarting it.
    #[arg(long, env = "VRLS_RESUME_SCHEDULE")]
    resume_schedule: bool,
    #[arg(long, default_value_t = 0.99, env = "VRLS_GAMMA")]
    gamma: f64,
    #[arg(long, default_value_t = 0.01, env = "VRLS_ENTROPY_BETA")]
    entropy_beta: f64,
    #[arg(long, default_value_t = 60, env = "VRLS_ACTIONS_PER_EPOCH")]
    actions_per_epoch: usize,
    /// Step-size schedule base / (1 + scale * epoch^power).
    #[arg(long, default_value_t = 1e-3, env = "VRLS_LR_BASE")]
    lr_base: f64,
    #[arg(long, default_value_t = 0.01, env = "VRLS_LR_SCALE")]
    lr_scale: f64,
    #[arg(long, default_value_t = 1.1, env = "VRLS_LR_POWER")]
    lr_power: f64,
    #[arg(long, default_value = "out", env = "VRLS_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, env = "VRLS_SCENARIO")]
    scenario: String,
    /// One of: random, mode4, oracle, vrls.
    #[arg(long, env = "VRLS_SCHEDULER")]
    scheduler: String,
    /// Checkpoint path; required for the vrls scheduler.
    #[arg(long, env = "VRLS_CHECKPOINT")]
    checkpoint: Option<PathBuf>,
    /// Minimum simulated duration in seconds; the run extends until the
    /// minimum action count is also reached.
    #[arg(long, default_value_t = 600.0, env = "VRLS_DURATION")]
    duration: f64,
    #[arg(long, default_value_t = 1000, env = "VRLS_MIN_ACTIONS")]
    min_actions: u64,
    #[arg(long, default_value_t = 2, env = "VRLS_SEED")]
    seed: u64,
    /// Settling time in seconds before measurement; defaults to one full
    /// traversal of the area.
    #[arg(long, env = "VRLS_SETTLE")]
    settle: Option<f64>,
    /// Also write the per-transmission trace (trace.csv).
    #[arg(long, env = "VRLS_TRACE")]
    trace: bool,
    #[arg(long, default_value = "out", env = "VRLS_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, env = "VRLS_SCENARIO")]
    scenario: String,
    /// Comma-separated scheduler names.
    #[arg(long, env = "VRLS_SCHEDULERS", value_delimiter = ',')]
    schedulers: Vec<String>,
    /// Comma-separated seeds.
    #[arg(long, env = "VRLS_SEEDS", value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long, env = "VRLS_CHECKPOINT")]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 600.0, env = "VRLS_DURATION")]
    duration: f64,
    #[arg(long, default_value_t = 1000, env = "VRLS_MIN_ACTIONS")]
    min_actions: u64,
    /// Settling time in seconds before measurement; defaults to one full
    /// traversal of the area.
    #[arg(long, env = "VRLS_SETTLE")]
    settle: Option<f64>,
    /// Exit with code 3 unless the learning scheduler's mean PRR beats every
    /// other compared scheduler.
    #[arg(long, env = "VRLS_GATE_VRLS")]
    gate_vrls: bool,
    #[arg(long, default_value = "out", env = "VRLS_OUT")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
    Gate(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Gate(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) | CliError::Gate(m) => m,
        }
    }
}

fn classify(err: SimError) -> CliError {
    match err {
        SimError::Scenario(_)
        | SimError::Config(_)
        | SimError::CheckpointMismatch(_)
        | SimError::Scheduler(_) => CliError::Config(err.to_string()),
        _ => CliError::Runtime(err.to_string()),
    }
}

fn io_runtime(context: &str, err: std::io::Error) -> CliError {
    CliError::Runtime(format!("{context}: {err}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path)
        .map_err(|e| CliError::Config(format!("checkpoint {}: {e}", path.display())))
}

fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("epoch,mean_reward,mean_min_prr,lr\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.epoch, p.mean_reward, p.mean_min_prr, p.lr
        ));
    }
    out
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let init = args
        .init_checkpoint
        .as_deref()
        .map(load_checkpoint)
        .transpose()?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        workers: args.workers,
        sync: args.sync,
        seed: args.seed,
        gamma: args.gamma,
        entropy_beta: args.entropy_beta,
        actions_per_epoch: args.actions_per_epoch,
        resume_schedule: args.resume_schedule,
        lr: nnkit::LrSchedule {
            base: args.lr_base,
            scale: args.lr_scale,
            power: args.lr_power,
        },
        ..TrainConfig::default()
    };
    let (checkpoint, curve) = train(&scenario, &cfg, init.as_ref()).map_err(classify)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_runtime("creating out dir", e))?;
    let ck_path = args.out.join("checkpoint.bin");
    checkpoint
        .save(&ck_path)
        .map_err(|e| CliError::Runtime(format!("saving checkpoint: {e}")))?;
    std::fs::write(args.out.join("curve.csv"), curve_csv(&curve))
        .map_err(|e| io_runtime("writing curve", e))?;
    if let Some(last) = curve.last() {
        println!(
            "trained {} epochs on {}: mean_reward {:.4}, mean_min_prr {:.4}, lr {:.3e}",
            checkpoint.epoch, scenario.name, last.mean_reward, last.mean_min_prr, last.lr
        );
    } else {
        println!(
            "wrote initialized checkpoint for {} (no training epochs)",
            scenario.name
        );
    }
    println!("checkpoint: {}", ck_path.display());
    Ok(())
}

fn run_one_eval(
    scenario: &ScenarioConfig,
    scheduler_name: &str,
    checkpoint: Option<&Checkpoint>,
    seed: u64,
    duration: f64,
    min_actions: u64,
    settle: Option<f64>,
    trace_path: Option<PathBuf>,
) -> Result<RunReport, CliError> {
    let mut scheduler =
        make_scheduler(scheduler_name, scenario, seed, checkpoint).map_err(classify)?;
    let cfg = EvalConfig {
        duration_s: duration,
        min_actions,
        seed,
        settle_s: settle,
        trace_path,
    };
    evaluate(scenario, scheduler.as_mut(), &cfg).map_err(classify)
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let checkpoint = args.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_runtime("creating out dir", e))?;
    let trace_path = args.trace.then(|| args.out.join("trace.csv"));
    let report = run_one_eval(
        &scenario,
        &args.scheduler,
        checkpoint.as_ref(),
        args.seed,
        args.duration,
        args.min_actions,
        args.settle,
        trace_path,
    )?;
    std::fs::write(args.out.join("windows.csv"), report.windows_csv())
        .map_err(|e| io_runtime("writing windows", e))?;
    std::fs::write(args.out.join("summary.txt"), report.summary_text())
        .map_err(|e| io_runtime("writing summary", e))?;
    print!("{}", report.summary_text());
    Ok(())
}

fn compare_csv_rows(out: &mut String, scheduler: &str, seed: u64, windows: &[WindowRecord]) {
    let body = vrls_sim::eval::windows_to_csv(windows);
    for line in body.lines().skip(1) {
        out.push_str(&format!("{scheduler},{seed},{line}\n"));
    }
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    if args.schedulers.is_empty() {
        return Err(CliError::Config(
            "at least one scheduler required (--schedulers)".to_string(),
        ));
    }
    let scenario = load_scenario(&args.scenario)?;
    let checkpoint = args.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_runtime("creating out dir", e))?;

    let mut csv = format!("scheduler,seed,{}\n", vrls_sim::eval::WINDOW_CSV_HEADER);
    let mut summary = String::new();
    let mut means: Vec<(String, f64)> = Vec::new();
    let mut failures: Vec<(String, CliError)> = Vec::new();
    for scheduler in &args.schedulers {
        let mut samples: Vec<f64> = Vec::new();
        let mut per_seed = String::new();
        let mut failed = false;
        for &seed in &args.seeds {
            match run_one_eval(
                &scenario,
                scheduler,
                checkpoint.as_ref(),
                seed,
                args.duration,
                args.min_actions,
                args.settle,
                None,
            ) {
                Ok(report) => {
                    compare_csv_rows(&mut csv, scheduler, seed, &report.windows);
                    if let Some(stats) = &report.pooled {
                        per_seed.push_str(&format!(
                            "  seed {seed}: mean {:.4} median {:.4} (n={})\n",
                            stats.mean, stats.median, stats.count
                        ));
                    }
                    samples.extend(report.windows.iter().filter_map(|w| {
                        if w.partial {
                            None
                        } else {
                            w.counts.pooled_prr()
                        }
                    }));
                }
                Err(e) => {
                    failures.push((scheduler.clone(), e));
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            continue;
        }
        let stats = SummaryStats::from_samples(samples);
        summary.push_str(&format!("scheduler {scheduler}:\n{per_seed}"));
        if let Some(s) = &stats {
            summary.push_str(&format!(
                "  overall: mean {:.4} median {:.4} p1 {:.4} p25 {:.4} p75 {:.4} p99 {:.4} (n={})\n",
                s.mean, s.median, s.p1, s.p25, s.p75, s.p99, s.count
            ));
            means.push((scheduler.clone(), s.mean));
        }
    }
    for (scheduler, err) in &failures {
        summary.push_str(&format!("scheduler {scheduler}: FAILED: {}\n", err.message()));
    }
    std::fs::write(args.out.join("compare.csv"), &csv)
        .map_err(|e| io_runtime("writing compare csv", e))?;
    std::fs::write(args.out.join("summary.txt"), &summary)
        .map_err(|e| io_runtime("writing summary", e))?;
    print!("{summary}");

    if !failures.is_empty() {
        let (name, err) = &failures[0];
        return Err(CliError::Config(format!(
            "scheduler {name} failed: {}",
            err.message()
        )));
    }
    if args.gate_vrls {
        let vrls_mean = means
            .iter()
            .find(|(n, _)| n == "vrls")
            .map(|(_, m)| *m)
            .ok_or_else(|| {
                CliError::Config("--gate-vrls requires the vrls scheduler".to_string())
            })?;
        for (name, mean) in &means {
            if name != "vrls" && vrls_mean <= *mean {
                return Err(CliError::Gate(format!(
                    "gate failed: vrls mean {vrls_mean:.4} does not beat {name} mean {mean:.4}"
                )));
            }
        }
    }
    Ok(())
}
