use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::{Local, NaiveDate};
use clap::{Parser, Subcommand};
use lapse_cli::api::{self, AppState, DEFAULT_BIND};
use lapse_cli::recorder::SyntheticBackend;
use lapse_cli::settings;
use lapse_core::retrieval::SystemLauncher;
use lapse_core::store::GcError;
use lapse_core::{estimate_disk, FrameStore, RetentionPolicy, SharedCategoryMap};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "lapse", version, about = "Record, browse, and reopen a local visual history of the screen")]
struct Cli {
    /// Directory holding blobs, journals, and settings.
    #[arg(long, global = true, env = settings::STORAGE_ENV)]
    storage_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Control recording in a running service.
    Record {
        #[arg(value_enum)]
        action: RecordAction,
        /// Address of the service.
        #[arg(long, default_value = DEFAULT_BIND)]
        addr: String,
    },
    /// Predict disk use for a number of recorded hours.
    Estimate {
        #[arg(long)]
        hours: f64,
        /// Native screen size as WIDTHxHEIGHT.
        #[arg(long, default_value = "1440x1080", value_parser = parse_dims)]
        native: (u32, u32),
    },
    /// Apply the retention policy now.
    Gc,
    /// Print storage statistics.
    Stats,
    /// Run the local HTTP service.
    Serve {
        #[arg(long, default_value = DEFAULT_BIND)]
        bind: String,
        /// Refuse requests that change settings or storage.
        #[arg(long)]
        read_only: bool,
    },
    /// Copy one day's journal and its blobs to another directory.
    Export {
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum RecordAction {
    Start,
    Stop,
    Status,
}

fn parse_dims(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(w)?, parse(h)?))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let root = cli.storage_root.unwrap_or_else(settings::default_storage_root);
    match cli.command {
        Command::Record { action, addr } => record(action, &addr),
        Command::Estimate { hours, native } => {
            if !(hours.is_finite() && hours >= 0.0) {
                bail!("--hours must be a non-negative number");
            }
            let cfg = settings::load_config(&root)?;
            let est = estimate_disk(&cfg, native.0, native.1, hours);
            println!(
                "{} bytes ({:.2} GB) for {:.0} frames at {} s, scale {}, quality {}",
                est.bytes.round() as u64,
                est.bytes / 1e9,
                est.frames,
                cfg.interval_s,
                cfg.scale,
                cfg.quality
            );
            Ok(())
        }
        Command::Gc => {
            let cfg = settings::load_config(&root)?;
            let store = FrameStore::open(&root)?;
            match store.run_gc(RetentionPolicy::new(cfg.retention_days), Local::now().date_naive()) {
                Ok(report) => print_json(&report),
                Err(GcError::Partial { report, survivors }) => {
                    print_json(&report)?;
                    bail!("{} paths could not be deleted; rerun gc to retry", survivors.len())
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Stats => print_json(&FrameStore::open(&root)?.stats()?),
        Command::Export { date, out } => {
            let report = FrameStore::open(&root)?.export_day(date, &out)?;
            print_json(&report)
        }
        Command::Serve { bind, read_only } => serve(root, &bind, read_only),
    }
}

fn record(action: RecordAction, addr: &str) -> anyhow::Result<()> {
    let client = reqwest::blocking::Client::new();
    let base = format!("http://{addr}");
    let response = match action {
        RecordAction::Start => client.post(format!("{base}/record/start")).send(),
        RecordAction::Stop => client.post(format!("{base}/record/stop")).send(),
        RecordAction::Status => client.get(format!("{base}/record/status")).send(),
    }
    .with_context(|| format!("contacting the service at {addr}; is `lapse serve` running?"))?;
    let status = response.status();
    let body: serde_json::Value = response.json().context("decoding service response")?;
    print_json(&body)?;
    if !status.is_success() {
        bail!("service answered {status}");
    }
    Ok(())
}

fn serve(root: PathBuf, bind: &str, read_only: bool) -> anyhow::Result<()> {
    let addr = api::resolve_bind(bind)?;
    std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    let cfg = settings::load_config(&root)?;
    let (map, warnings) = settings::load_categories(&root)?;
    for w in &warnings {
        tracing::warn!("{w}");
    }
    let state = Arc::new(AppState::new(
        Arc::new(FrameStore::open(&root)?),
        cfg,
        Arc::new(SharedCategoryMap::new(map)),
        Arc::new(SystemLauncher),
        Arc::new(SyntheticBackend::default()),
        read_only,
    ));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = api::bind(addr).await?;
        tracing::info!("listening on http://{addr} (storage {})", root.display());
        if !read_only {
            api::spawn_daily_gc(Arc::clone(&state));
        }
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        api::serve(listener, Arc::clone(&state), shutdown).await?;
        state.recorder.stop();
        Ok(())
    })
}
