use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use evidesk_core::corpus::SourceFormat;
use evidesk_core::designclf::{read_validation, replay};
use evidesk_core::evalkit::{derive_metrics, ConfusionCounts};
use evidesk_core::screener::{accuracy, save_model, synthetic_corpus, train};
use serde_json::json;

use crate::config::Config;
use crate::engine::{Engine, ReviewStatus};
use crate::error::ServiceError;
use crate::ops::{self, Reply, TrendFormat};

#[derive(Debug, Parser)]
#[command(name = "evidesk", version, about = "Living evidence-synthesis service")]
pub struct Cli {
    /// JSON config file; defaults apply when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
    Ris,
}

impl From<FormatArg> for SourceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => SourceFormat::Jsonl,
            FormatArg::Csv => SourceFormat::Csv,
            FormatArg::Ris => SourceFormat::Ris,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatusArg {
    Pending,
    Accepted,
    Overridden,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TrendFormatArg {
    Json,
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve,
    /// Parse a bibliographic export and add its records.
    Ingest {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
    },
    /// Apply a JSON array of records to a fitted review.
    Update { file: PathBuf },
    /// Fit topics on the whole corpus.
    Fit,
    Records {
        #[arg(long, default_value_t = 0)]
        offset: usize,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Reviewer queue.
    Queue {
        #[arg(long, value_enum)]
        status: Option<StatusArg>,
    },
    Screening { id: String },
    /// Record a reviewer decision.
    Decide {
        id: String,
        #[arg(long, value_enum)]
        decision: StatusArg,
        #[arg(long)]
        reviewer: String,
        /// Override payload as JSON, e.g. '{"design":"cohort"}'.
        #[arg(long = "override")]
        override_json: Option<String>,
    },
    Topics,
    Trends {
        #[arg(long, requires = "to")]
        from: Option<i32>,
        #[arg(long, requires = "from")]
        to: Option<i32>,
        #[arg(long, value_enum, default_value = "json")]
        format: TrendFormatArg,
    },
    Terms {
        #[arg(allow_negative_numbers = true)]
        topic: i64,
    },
    Query { text: String },
    /// Graph query as JSON, e.g. '{"op":"stats"}'.
    GraphQuery { json: String },
    Metrics,
    Audit {
        #[arg(long, default_value_t = 0)]
        since: u64,
    },
    Health,
    /// Train the PICO sentence tagger on the synthetic corpus and save it.
    TrainScreener {
        #[arg(long)]
        out: PathBuf,
        /// Held-out sentences used to report accuracy.
        #[arg(long, default_value_t = 300)]
        holdout: usize,
    },
    /// Print metrics for a confusion-count JSON object or a design validation JSONL file.
    Eval { fixture: PathBuf },
}

fn status(s: StatusArg) -> ReviewStatus {
    match s {
        StatusArg::Pending => ReviewStatus::Pending,
        StatusArg::Accepted => ReviewStatus::Accepted,
        StatusArg::Overridden => ReviewStatus::Overridden,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, ServiceError> {
    std::fs::read(path).map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))
}

pub fn eval_fixture(path: &Path) -> Result<Reply, ServiceError> {
    let bytes = read(path)?;
    let counts = match serde_json::from_slice::<ConfusionCounts>(&bytes) {
        Ok(c) => c,
        Err(_) => {
            let entries = read_validation(BufReader::new(bytes.as_slice()))?;
            replay(&entries)
        }
    };
    Ok(Reply::json(&derive_metrics(counts)?))
}

fn train_screener(config: &Config, out: &Path, holdout: usize) -> Result<Reply, ServiceError> {
    let b = &config.screening.bootstrap;
    let outcome = train(&synthetic_corpus(b.corpus_size, b.corpus_seed), b.model, &b.train)?;
    save_model(&outcome.model, out)?;
    let held_out = synthetic_corpus(holdout, b.corpus_seed.wrapping_add(1));
    Ok(Reply::json(&json!({
        "model": out.display().to_string(),
        "epochs": outcome.loss_curve.len() - 1,
        "final_loss": outcome.loss_curve.last(),
        "holdout_accuracy": accuracy(&outcome.model, &held_out),
    })))
}

/// Runs a non-serving subcommand and returns what it prints.
pub fn run(config: Config, command: Command) -> Result<Reply, ServiceError> {
    match command {
        Command::Serve => Err(ServiceError::BadRequest("serve is handled by the binary".into())),
        Command::TrainScreener { out, holdout } => train_screener(&config, &out, holdout),
        Command::Eval { fixture } => eval_fixture(&fixture),
        command => {
            let engine = Engine::new(config)?;
            match command {
                Command::Ingest { file, format } => ops::ingest(&engine, &read(&file)?, format.into()),
                Command::Update { file } => ops::update(&engine, &read(&file)?),
                Command::Fit => ops::fit(&engine),
                Command::Records { offset, limit } => ops::records(&engine, offset, limit),
                Command::Queue { status: s } => ops::screening_queue(&engine, s.map(status)),
                Command::Screening { id } => ops::screening(&engine, &id),
                Command::Decide {
                    id,
                    decision,
                    reviewer,
                    override_json,
                } => {
                    let payload = match override_json {
                        Some(text) => Some(
                            serde_json::from_str::<serde_json::Value>(&text)
                                .map_err(|e| ServiceError::BadRequest(format!("--override: {e}")))?,
                        ),
                        None => None,
                    };
                    let body = json!({ "decision": status(decision), "reviewer": reviewer, "override": payload });
                    ops::decide(&engine, &id, body.to_string().as_bytes())
                }
                Command::Topics => ops::topics(&engine),
                Command::Trends { from, to, format } => {
                    let format = match format {
                        TrendFormatArg::Json => TrendFormat::Json,
                        TrendFormatArg::Csv => TrendFormat::Csv,
                        TrendFormatArg::Jsonl => TrendFormat::Jsonl,
                    };
                    ops::trends(&engine, from.zip(to), format)
                }
                Command::Terms { topic } => ops::terms(&engine, topic),
                Command::Query { text } => ops::query(&engine, json!({ "query": text }).to_string().as_bytes()),
                Command::GraphQuery { json } => ops::graph_query(&engine, json.as_bytes()),
                Command::Metrics => ops::metrics(&engine),
                Command::Audit { since } => ops::audit(&engine, since),
                Command::Health => ops::health(&engine),
                Command::Serve | Command::TrainScreener { .. } | Command::Eval { .. } => unreachable!("handled above"),
            }
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<Config, ServiceError> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}
