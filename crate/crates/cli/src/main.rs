//! `entropywalks <kind> --config <file> [--seed N] [--out DIR] [--emit-csv]`
//!
//! Exit status: 0 when everything checked holds, 1 when a falsifying
//! witness was found (written to `witness.json`), 2 on any error.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;
use thiserror::Error;

use config::{load_input, ExperimentConfig, Kind, Params};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot parse {path}: line {line}, column {column}: {message}")]
    ConfigParse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("input not found: {0}")]
    InputNotFound(PathBuf),
    #[error(transparent)]
    Core(#[from] entropywalks::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(
    name = "entropywalks",
    version,
    about = "Certification, contraction and mixing experiments on down-up walks and Glauber dynamics"
)]
struct Cli {
    kind: Kind,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Root for run directories; defaults to the config's output_dir, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    emit_csv: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok((dir, falsified)) => {
            println!("{} {}", if falsified { "falsified" } else { "verified" }, dir.display());
            ExitCode::from(u8::from(falsified))
        }
        Err(e) => {
            eprintln!("error: {}: {e}", cli.kind);
            ExitCode::from(2)
        }
    }
}

fn threads() -> Result<Option<usize>, RunError> {
    match std::env::var("ENTROPYWALKS_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RunError::Invalid(format!(
                "ENTROPYWALKS_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn execute(cli: &Cli) -> Result<(PathBuf, bool), RunError> {
    let config = ExperimentConfig::load(&cli.config)?;
    if let Some(k) = config.kind {
        if k != cli.kind {
            return Err(RunError::Invalid(format!("config is for {k}, not {}", cli.kind)));
        }
    }
    let seed = cli
        .seed
        .or(config.seed)
        .ok_or_else(|| RunError::Invalid("no seed: set \"seed\" in the config or pass --seed".into()))?;
    let threads = threads()?;
    let pool = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n),
        None => rayon::ThreadPoolBuilder::new(),
    }
    .build()
    .map_err(|e| RunError::Invalid(format!("thread pool: {e}")))?;

    let (model, input_bytes) = match &config.input {
        Some(spec) => {
            let (m, b) = load_input(spec)?;
            (Some(m), b)
        }
        None => (None, Vec::new()),
    };
    let echo = json!({
        "kind": cli.kind,
        "input": config.input,
        "params": config.params,
        "seed": seed,
    });
    let hash = report::content_hash(&echo, &input_bytes);

    let started = chrono::Utc::now();
    let clock = Instant::now();
    let mut params = Params::new(&config.params);
    let outcome = pool.install(|| run::dispatch(cli.kind, model.as_ref(), &mut params, seed))?;
    params.finish()?;
    let wall = clock.elapsed().as_secs_f64();

    let root = cli
        .out
        .clone()
        .or(config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let dir = report::create_run_dir(&root, &started.format("%Y%m%dT%H%M%SZ").to_string(), &hash)?;
    let falsified = outcome.witness.is_some();
    let mut files = vec!["manifest.json".to_string(), "summary.json".to_string()];
    if let Some(w) = &outcome.witness {
        report::write_json(&dir.join("witness.json"), w)?;
        files.push("witness.json".into());
    }
    if cli.emit_csv || config.emit_csv {
        for t in &outcome.tables {
            let name = format!("{}.csv", t.name);
            std::fs::write(dir.join(&name), t.render()?)?;
            files.push(name);
        }
    }
    let mut summary = json!({
        "kind": cli.kind,
        "status": if falsified { "falsified" } else { "verified" },
    });
    if let (Some(obj), serde_json::Value::Object(extra)) = (summary.as_object_mut(), outcome.summary) {
        obj.extend(extra);
    }
    report::write_json(&dir.join("summary.json"), &summary)?;
    report::write_json(
        &dir.join("manifest.json"),
        &json!({
            "tool": "entropywalks",
            "version": env!("CARGO_PKG_VERSION"),
            "config": echo,
            "config_path": cli.config,
            "input_sha256": hash,
            "threads": pool.current_num_threads(),
            "started": started.to_rfc3339(),
            "wall_seconds": wall,
            "files": files,
        }),
    )?;
    Ok((dir, falsified))
}
