//! Command-line interface.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use pheromone_core::domain::AntCycle;
use pheromone_core::engine::{Engine, EngineConfig};
use pheromone_core::events::EventMessage;
use pheromone_core::metrics::{compute_metrics, match_episodes, ConfusionMatrix, MetricSet};
use pheromone_core::monitor::{tune_thresholds, AlarmEvent, LabeledDay};
use pheromone_core::scoring::{Emission, Pipeline, ScoreRecord, ScoreStatus};
use pheromone_core::simulator::simulate;
use serde_json::json;

use crate::broadcast::Broadcaster;
use crate::config::Config;
use crate::csv_io::{ingest_csv_path, read_labels_path, write_cycles_csv, write_labels_csv, Ingested};
use crate::eventlog::{read_event_log_path, EventLogWriter};
use crate::line::{spawn_line, LineInput, LineSink};
use crate::server::{self, AppState};
use crate::summary::{daily_summary, write_daily_summary, write_ts_grid};

#[derive(Debug, Parser)]
#[command(name = "pheromone", version, about = "Pheromone-score process monitor")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Batch-score a cycle CSV and print finalised score records as JSON lines.
    Score {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write labelled synthetic days as cycle CSVs plus label sidecars.
    Simulate {
        #[arg(long)]
        days: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the live pipeline over a cycle CSV.
    Replay(ReplayArgs),
    /// Match alarms against labels and print the confusion matrix and metrics.
    Evaluate {
        /// Event log (JSON lines); alarm messages are used.
        #[arg(long)]
        alarms: PathBuf,
        /// Label CSV.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_parser = parse_lead_window)]
        lead_window: Option<chrono::Duration>,
        #[arg(long)]
        json: bool,
    },
    /// Grid-search alarm thresholds over a directory of labelled days.
    Tune {
        #[arg(long)]
        training: PathBuf,
        #[arg(long, value_parser = parse_lead_window)]
        lead_window: Option<chrono::Duration>,
    },
    /// Export per-day score distributions and the hour-by-day TS grid.
    Export {
        #[arg(long, required = true)]
        daily_summary: bool,
        /// Cycle CSV, or JSON lines holding score messages.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub csv: PathBuf,
    /// Serve the event stream and command endpoint while replaying.
    #[arg(long)]
    pub serve: bool,
    /// Listening port; defaults to $PHEROMONE_PORT or 7878.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Event log destination; stdout when omitted and not serving.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Delay between cycles while serving.
    #[arg(long, default_value_t = 0)]
    pub interval_ms: u64,
    /// Stop serving once the replay is done instead of waiting for Ctrl-C.
    #[arg(long)]
    pub exit_when_done: bool,
}

/// Accepts humantime durations (`30m`, `1h 15m`) or bare minutes.
pub fn parse_lead_window(s: &str) -> Result<chrono::Duration, String> {
    let std = match s.trim().parse::<u64>() {
        Ok(minutes) => Duration::from_secs(minutes * 60),
        Err(_) => humantime::parse_duration(s).map_err(|e| e.to_string())?,
    };
    chrono::Duration::from_std(std).map_err(|e| e.to_string())
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => Config::default(),
    };
    match cli.command {
        CliCommand::Score { csv, out } => cmd_score(&config, &csv, out.as_deref()),
        CliCommand::Simulate { days, seed, out } => cmd_simulate(&config, days, seed, &out),
        CliCommand::Replay(args) => cmd_replay(&config, args),
        CliCommand::Evaluate {
            alarms,
            labels,
            lead_window,
            json,
        } => cmd_evaluate(&config, &alarms, &labels, lead_window, json),
        CliCommand::Tune {
            training,
            lead_window,
        } => cmd_tune(&config, &training, lead_window),
        CliCommand::Export { input, out, .. } => cmd_export(&config, &input, &out),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write + Send>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Reads a cycle CSV, reporting bad rows on stderr.
pub fn load_cycles(config: &Config, path: &Path) -> Result<Vec<AntCycle>> {
    let Ingested { cycles, errors } = ingest_csv_path(path, &config.engine.calendar)
        .with_context(|| format!("reading {}", path.display()))?;
    for e in &errors {
        eprintln!("{}: {e}", path.display());
    }
    Ok(cycles)
}

/// Finalised records for a cycle stream, in order.
pub fn score_cycles(engine: &EngineConfig, cycles: Vec<AntCycle>) -> Result<Vec<ScoreRecord>> {
    let mut pipeline = Pipeline::new(engine.annotator.clone(), engine.calendar);
    let mut out = Vec::new();
    let keep = |e: Emission, out: &mut Vec<ScoreRecord>| {
        if let Emission::Finalized { record, .. } = e {
            out.push(record);
        }
    };
    for c in cycles {
        for e in pipeline.push_cycle(c)? {
            keep(e, &mut out);
        }
    }
    for e in pipeline.finish_day() {
        keep(e, &mut out);
    }
    Ok(out)
}

/// Full event log for a cycle stream; out-of-order cycles abort.
pub fn replay_cycles(engine: &EngineConfig, cycles: Vec<AntCycle>) -> Result<Vec<EventMessage>> {
    let mut engine = Engine::new(engine.clone());
    let mut log = Vec::new();
    for c in cycles {
        log.extend(engine.push_cycle(c)?);
    }
    log.extend(engine.finish());
    Ok(log)
}

fn cmd_score(config: &Config, csv: &Path, out: Option<&Path>) -> Result<()> {
    let records = score_cycles(&config.engine, load_cycles(config, csv)?)?;
    let mut w = EventLogWriter::new(output(out)?);
    for r in records {
        w.write(&EventMessage::Score(r))?;
    }
    Ok(())
}

pub fn cycles_file(dir: &Path, day: chrono::NaiveDate) -> PathBuf {
    dir.join(format!("cycles-{day}.csv"))
}

pub fn labels_file(dir: &Path, day: chrono::NaiveDate) -> PathBuf {
    dir.join(format!("labels-{day}.csv"))
}

fn cmd_simulate(config: &Config, days: Option<u32>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut sim = config.simulation.clone();
    if let Some(d) = days {
        sim.days = d;
    }
    if let Some(s) = seed {
        sim.seed = s;
    }
    fs::create_dir_all(out)?;
    for day in simulate(&sim)? {
        write_cycles_csv(File::create(cycles_file(out, day.date))?, &day.cycles)?;
        write_labels_csv(File::create(labels_file(out, day.date))?, &day.labels)?;
        info!("{}: {} regimes", day.date, day.regimes.len());
    }
    Ok(())
}

fn cmd_replay(config: &Config, args: ReplayArgs) -> Result<()> {
    let cycles = load_cycles(config, &args.csv)?;
    if !args.serve {
        let mut w = EventLogWriter::new(output(args.log.as_deref())?);
        for msg in replay_cycles(&config.engine, cycles)? {
            w.write(&msg)?;
        }
        return Ok(());
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve_replay(config, cycles, args))
}

async fn serve_replay(config: &Config, cycles: Vec<AntCycle>, args: ReplayArgs) -> Result<()> {
    let broadcaster = Arc::new(Broadcaster::new(
        config.stream.consumer_buffer,
        config.stream.backlog_capacity,
    ));
    let log = match &args.log {
        Some(p) => Some(EventLogWriter::new(output(Some(p))?)),
        None => None,
    };
    let line = spawn_line(
        Engine::new(config.engine.clone()),
        LineSink {
            broadcaster: Some(broadcaster.clone()),
            log,
        },
    );
    let port = args.port.unwrap_or_else(server::default_port);
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);

    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let state = AppState {
        broadcaster: broadcaster.clone(),
        line: line.input.clone(),
        heartbeat: config.stream.heartbeat(),
    };
    let server = tokio::spawn(server::serve(listener, state, async {
        let _ = stop_rx.await;
    }));

    for c in cycles {
        if args.interval_ms > 0 {
            tokio::time::sleep(Duration::from_millis(args.interval_ms)).await;
        }
        if line.input.send(LineInput::Cycle(c)).await.is_err() {
            bail!("line task stopped");
        }
    }
    if line.input.send(LineInput::EndOfCycles).await.is_err() || !line.sync().await {
        bail!("line task stopped");
    }
    eprintln!("replay complete");
    if !args.exit_when_done {
        tokio::signal::ctrl_c().await?;
    }
    broadcaster.close_all();
    let _ = stop_tx.send(());
    server.await??;
    drop(line.input);
    line.task.await?;
    Ok(())
}

fn alarms_from_log(path: &Path) -> Result<Vec<AlarmEvent>> {
    Ok(read_event_log_path(path)
        .with_context(|| format!("reading {}", path.display()))?
        .into_iter()
        .filter_map(|m| match m {
            EventMessage::Alarm(a) => Some(a),
            _ => None,
        })
        .collect())
}

fn format_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| format!("{x:.4}"))
}

pub fn metrics_report(cm: &ConfusionMatrix, m: &MetricSet) -> String {
    let mut s = format!("TP {}\nFN {}\nFP {}\nTN {}\n", cm.tp, cm.fn_, cm.fp, cm.tn);
    for (k, v) in m.entries() {
        s.push_str(&format!("{k} {}\n", format_metric(v)));
    }
    s
}

fn metrics_json(cm: &ConfusionMatrix, m: &MetricSet) -> serde_json::Value {
    let mut doc = serde_json::Map::new();
    doc.insert("TP".into(), cm.tp.into());
    doc.insert("FN".into(), cm.fn_.into());
    doc.insert("FP".into(), cm.fp.into());
    doc.insert("TN".into(), cm.tn.into());
    for (k, v) in m.entries() {
        doc.insert(k.into(), v.map_or(serde_json::Value::Null, Into::into));
    }
    doc.into()
}

fn cmd_evaluate(
    config: &Config,
    alarms: &Path,
    labels: &Path,
    lead_window: Option<chrono::Duration>,
    as_json: bool,
) -> Result<()> {
    let alarms = alarms_from_log(alarms)?;
    let labels = read_labels_path(labels).with_context(|| format!("reading {}", labels.display()))?;
    let cm = match_episodes(&alarms, &labels, lead_window.unwrap_or_else(|| config.lead_window()))?;
    let m = compute_metrics(&cm);
    if as_json {
        println!("{}", metrics_json(&cm, &m));
    } else {
        print!("{}", metrics_report(&cm, &m));
    }
    Ok(())
}

/// Pairs every `cycles-<day>.csv` in `dir` with its label sidecar.
pub fn load_training(config: &Config, dir: &Path) -> Result<Vec<LabeledDay>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("cycles-") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    let mut days = Vec::new();
    for f in files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let label_path = dir.join(name.replacen("cycles-", "labels-", 1));
        if !label_path.exists() {
            warn!("{} has no label file, skipped", f.display());
            continue;
        }
        let records = score_cycles(&config.engine, load_cycles(config, &f)?)?;
        let labels = read_labels_path(&label_path)?;
        days.push(LabeledDay { records, labels });
    }
    Ok(days)
}

fn cmd_tune(config: &Config, dir: &Path, lead_window: Option<chrono::Duration>) -> Result<()> {
    let days = load_training(config, dir)?;
    let lead = lead_window.unwrap_or_else(|| config.lead_window());
    let best = tune_thresholds(&days, &config.grid, &config.engine.policy, lead, config.engine.auto_resume)?;
    let m = compute_metrics(&best.confusion);
    let doc = json!({
        "policy": best.policy,
        "days": days.len(),
        "metrics": metrics_json(&best.confusion, &m),
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn load_scores(config: &Config, input: &Path) -> Result<Vec<ScoreRecord>> {
    if input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return score_cycles(&config.engine, load_cycles(config, input)?);
    }
    Ok(read_event_log_path(input)?
        .into_iter()
        .filter_map(|m| match m {
            EventMessage::Score(r) if r.status == ScoreStatus::Finalized => Some(r),
            _ => None,
        })
        .collect())
}

fn cmd_export(config: &Config, input: &Path, out: &Path) -> Result<()> {
    let records = load_scores(config, input)?;
    fs::create_dir_all(out)?;
    write_daily_summary(File::create(out.join("daily_summary.csv"))?, &daily_summary(&records))?;
    write_ts_grid(File::create(out.join("ts_grid.csv"))?, &records)?;
    Ok(())
}
