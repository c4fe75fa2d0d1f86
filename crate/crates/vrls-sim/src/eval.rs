//! Evaluation runs, per-window reports, and their CSV/text serializations.
//!
//! An evaluation steps the engine until both the requested duration and the
//! minimum number of scheduler actions are reached, then flushes a partial
//! window if one is pending. Summary statistics cover full, non-empty
//! windows; the CSV carries everything, so the summary is recomputable from
//! it.

use std::path::PathBuf;
use std::time::Instant;

use nnkit::Checkpoint;

use crate::scenario::ScenarioConfig;
use crate::schedulers::{
    Mode4Config, Mode4Scheduler, OracleScheduler, RandomScheduler, Scheduler,
};
use crate::simcore::{BinCount, Engine, TraceWriter, WindowCounts, WindowRecord};
use crate::vrls::{ActMode, VrlsScheduler};
use crate::SimError;

pub const SCHEDULER_NAMES: [&str; 4] = ["random", "mode4", "oracle", "vrls"];

/// Builds a scheduler by CLI name. The learning scheduler needs a
/// checkpoint; the oracle refuses non-SCD channels.
pub fn make_scheduler(
    name: &str,
    scenario: &ScenarioConfig,
    seed: u64,
    checkpoint: Option<&Checkpoint>,
) -> Result<Box<dyn Scheduler>, SimError> {
    match name {
        "random" => Ok(Box::new(RandomScheduler::new(seed))),
        "mode4" => Ok(Box::new(Mode4Scheduler::new(Mode4Config::default(), seed))),
        "oracle" => Ok(Box::new(OracleScheduler::new(scenario)?)),
        "vrls" => {
            let ck = checkpoint.ok_or_else(|| {
                SimError::Config("scheduler vrls requires a checkpoint".to_string())
            })?;
            Ok(Box::new(VrlsScheduler::from_checkpoint(
                ck,
                scenario,
                seed,
                ActMode::Greedy,
            )?))
        }
        other => Err(SimError::Config(format!(
            "unknown scheduler {other:?} (valid: {})",
            SCHEDULER_NAMES.join(", ")
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub duration_s: f64,
    pub min_actions: u64,
    pub seed: u64,
    /// Settling time before measurement starts, rounded up to a window
    /// boundary. None picks one full traversal, enough for the random
    /// warm-up assignment to wash out.
    pub settle_s: Option<f64>,
    pub trace_path: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            duration_s: 600.0,
            min_actions: 1000,
            seed: 2,
            settle_s: None,
            trace_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p1: f64,
    pub p25: f64,
    pub p75: f64,
    pub p99: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

impl SummaryStats {
    pub fn from_samples(mut samples: Vec<f64>) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("finite PRR"));
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        Some(SummaryStats {
            count: samples.len(),
            mean,
            median: percentile(&samples, 50.0),
            p1: percentile(&samples, 1.0),
            p25: percentile(&samples, 25.0),
            p75: percentile(&samples, 75.0),
            p99: percentile(&samples, 99.0),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub scheduler: String,
    pub seed: u64,
    pub windows: Vec<WindowRecord>,
    pub n_actions: u64,
    pub n_transmissions: u64,
    /// Full windows containing at least one loss of the given kind.
    pub hd_windows: u64,
    pub collision_windows: u64,
    pub full_windows: u64,
    pub empty_windows: u64,
    /// Pooled-over-bins PRR summary across full non-empty windows.
    pub pooled: Option<SummaryStats>,
    pub per_bin: Vec<((f64, f64), Option<SummaryStats>)>,
    pub wall_clock_s: f64,
}

/// Runs one evaluation: warm-up, stepping, partial-window flush, report.
pub fn evaluate(
    scenario: &ScenarioConfig,
    scheduler: &mut dyn Scheduler,
    cfg: &EvalConfig,
) -> Result<RunReport, SimError> {
    let started = Instant::now();
    let mut engine = Engine::new(scenario.clone(), cfg.seed);
    engine.warmup(scheduler);

    // Settle phase: run unrecorded until the first window boundary past the
    // requested settling time, so measured windows see a steady population.
    let settle_s = cfg.settle_s.unwrap_or_else(|| {
        if scenario.speed_mps > 0.0 {
            scenario.geometry.length_m / scenario.speed_mps
        } else {
            0.0
        }
    });
    let window_ms = scenario.prr_window_ms();
    let settle_ms = ((settle_s * 1000.0).ceil() as u64).div_ceil(window_ms) * window_ms;
    engine.set_record_windows(false);
    engine.run_ms(settle_ms, scheduler)?;
    engine.set_record_windows(true);
    if let Some(path) = &cfg.trace_path {
        engine.set_trace(TraceWriter::create(path)?);
    }

    let measured_from_actions = engine.actions();
    let measured_from_tx = engine.total_transmissions();
    let end_ms = settle_ms + (cfg.duration_s * 1000.0).round() as u64;
    while engine.time_ms() < end_ms
        || engine.actions() - measured_from_actions < cfg.min_actions
    {
        engine.step(scheduler)?;
    }
    engine.flush_partial_window();
    engine.finish_trace()?;

    let windows = engine.take_windows();
    Ok(build_report(
        scenario,
        scheduler.name().to_string(),
        cfg.seed,
        windows,
        engine.actions() - measured_from_actions,
        engine.total_transmissions() - measured_from_tx,
        started.elapsed().as_secs_f64(),
    ))
}

fn build_report(
    scenario: &ScenarioConfig,
    scheduler: String,
    seed: u64,
    windows: Vec<WindowRecord>,
    n_actions: u64,
    n_transmissions: u64,
    wall_clock_s: f64,
) -> RunReport {
    let full: Vec<&WindowRecord> = windows.iter().filter(|w| !w.partial).collect();
    let pooled_samples: Vec<f64> = full
        .iter()
        .filter_map(|w| w.counts.pooled_prr())
        .collect();
    let empty_windows = full.iter().filter(|w| w.counts.is_empty()).count() as u64;
    let hd_windows = full.iter().filter(|w| w.counts.hd_losses > 0).count() as u64;
    let collision_windows = full
        .iter()
        .filter(|w| w.counts.collision_losses > 0)
        .count() as u64;
    let per_bin = scenario
        .prr_range_bins
        .iter()
        .enumerate()
        .map(|(i, &bin)| {
            let samples: Vec<f64> = full
                .iter()
                .filter_map(|w| w.counts.bins[i].prr())
                .collect();
            (bin, SummaryStats::from_samples(samples))
        })
        .collect();
    RunReport {
        scenario: scenario.name.clone(),
        scheduler,
        seed,
        full_windows: full.len() as u64,
        empty_windows,
        hd_windows,
        collision_windows,
        pooled: SummaryStats::from_samples(pooled_samples),
        per_bin,
        windows,
        n_actions,
        n_transmissions,
        wall_clock_s,
    }
}

pub const WINDOW_CSV_HEADER: &str =
    "window_index,start_ms,end_ms,partial,kind,bin_lo,bin_hi,successes,in_range,prr,hd_losses,collision_losses";

/// Deterministic CSV of the raw windows: one row per (window, bin) plus a
/// pooled `total` row per window. Wall-clock never appears here, so two runs
/// with identical flags produce identical bytes.
pub fn windows_to_csv(windows: &[WindowRecord]) -> String {
    let mut out = String::from(WINDOW_CSV_HEADER);
    out.push('\n');
    for w in windows {
        let base = format!(
            "{},{},{},{}",
            w.index,
            w.start_ms,
            w.end_ms,
            if w.partial { 1 } else { 0 }
        );
        for bin in &w.counts.bins {
            let prr = bin.prr().map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{base},bin,{},{},{},{},{prr},{},{}\n",
                bin.lo_m, bin.hi_m, bin.successes, bin.in_range, w.counts.hd_losses,
                w.counts.collision_losses
            ));
        }
        let successes: u64 = w.counts.bins.iter().map(|b| b.successes).sum();
        let in_range: u64 = w.counts.bins.iter().map(|b| b.in_range).sum();
        let prr = w.counts.pooled_prr().map(|p| p.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{base},total,,,{successes},{in_range},{prr},{},{}\n",
            w.counts.hd_losses, w.counts.collision_losses
        ));
    }
    out
}

/// Parses a window CSV back into records; the inverse of `windows_to_csv`
/// up to the derived `total` rows.
pub fn parse_windows_csv(text: &str) -> Result<Vec<WindowRecord>, SimError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == WINDOW_CSV_HEADER => {}
        other => {
            return Err(SimError::Config(format!(
                "bad window CSV header: {other:?}"
            )))
        }
    }
    let mut windows: Vec<WindowRecord> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(SimError::Config(format!(
                "window CSV line {}: {} fields",
                lineno + 2,
                f.len()
            )));
        }
        let bad =
            |what: &str| SimError::Config(format!("window CSV line {}: bad {what}", lineno + 2));
        let index: u64 = f[0].parse().map_err(|_| bad("index"))?;
        let start_ms: u64 = f[1].parse().map_err(|_| bad("start"))?;
        let end_ms: u64 = f[2].parse().map_err(|_| bad("end"))?;
        let partial = f[3] == "1";
        let hd_losses: u64 = f[10].parse().map_err(|_| bad("hd_losses"))?;
        let collision_losses: u64 = f[11].parse().map_err(|_| bad("collision_losses"))?;
        if windows.last().map(|w: &WindowRecord| w.index) != Some(index) {
            windows.push(WindowRecord {
                index,
                start_ms,
                end_ms,
                partial,
                counts: WindowCounts {
                    bins: Vec::new(),
                    hd_losses,
                    collision_losses,
                },
            });
        }
        if f[4] == "bin" {
            let current = windows.last_mut().expect("pushed above");
            current.counts.bins.push(BinCount {
                lo_m: f[5].parse().map_err(|_| bad("bin_lo"))?,
                hi_m: f[6].parse().map_err(|_| bad("bin_hi"))?,
                successes: f[7].parse().map_err(|_| bad("successes"))?,
                in_range: f[8].parse().map_err(|_| bad("in_range"))?,
            });
        }
    }
    Ok(windows)
}

fn fmt_stats(stats: &Option<SummaryStats>) -> String {
    match stats {
        None => "no samples".to_string(),
        Some(s) => format!(
            "mean {:.4} median {:.4} p1 {:.4} p25 {:.4} p75 {:.4} p99 {:.4} (n={})",
            s.mean, s.median, s.p1, s.p25, s.p75, s.p99, s.count
        ),
    }
}

impl RunReport {
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario: {}\n", self.scenario));
        out.push_str(&format!("scheduler: {}\n", self.scheduler));
        out.push_str(&format!("seed: {}\n", self.seed));
        out.push_str(&format!(
            "actions: {}  transmissions: {}\n",
            self.n_actions, self.n_transmissions
        ));
        out.push_str(&format!(
            "windows: {} full ({} empty), hd-loss windows: {}, collision windows: {}\n",
            self.full_windows, self.empty_windows, self.hd_windows, self.collision_windows
        ));
        out.push_str(&format!("prr pooled: {}\n", fmt_stats(&self.pooled)));
        for ((lo, hi), stats) in &self.per_bin {
            out.push_str(&format!("prr bin [{lo}, {hi}): {}\n", fmt_stats(stats)));
        }
        out.push_str(&format!("wall_clock_s: {:.3}\n", self.wall_clock_s));
        out
    }

    pub fn windows_csv(&self) -> String {
        windows_to_csv(&self.windows)
    }

    /// Recomputes the pooled summary from a parsed CSV; consistency hook for
    /// tests and downstream tooling.
    pub fn summary_from_csv(text: &str) -> Result<Option<SummaryStats>, SimError> {
        let windows = parse_windows_csv(text)?;
        let samples: Vec<f64> = windows
            .iter()
            .filter(|w| !w.partial)
            .filter_map(|w| w.counts.pooled_prr())
            .collect();
        Ok(SummaryStats::from_samples(samples))
    }
}
