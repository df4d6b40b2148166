//! Operator commands: compile scripts, train profiles, serve, replay
//! transcripts and audit the ledger.
//!
//! [`run`] returns the process exit code so the commands can be driven
//! in-process from tests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::DateTime;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use smsauth::authenticator::AuthPolicy;
use smsauth::gateway::{self, Directory, Gateway, GatewayConfig, SmsFrame, UserEntry};
use smsauth::ledger::{self, Ledger};
use smsauth::mapper::{self, MapperError};
use smsauth::registry;
use smsauth::risk::{self, TrainingRow, UserProfile};
use smsauth::workflow::WorkflowDefinition;

pub const TRAIN_HEADER: [&str; 5] = ["user_id", "timestamp_iso8601", "amount", "event_name", "valid"];

#[derive(Debug, Parser)]
#[command(name = "smsauth", version, about = "SMS/USSD authentication gateway")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Seed for instance and challenge ids.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Fixed clock (unix seconds) for frames that carry no timestamp.
    #[arg(long, global = true)]
    pub now: Option<i64>,
    /// Laplace smoothing constant.
    #[arg(long, global = true, default_value_t = risk::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, global = true, default_value_t = 0.95)]
    pub theta_max: f64,
    #[arg(long, global = true, default_value_t = 0.50)]
    pub theta_min: f64,
    #[arg(long, global = true, default_value_t = 20.0)]
    pub tau: f64,
    #[arg(long, global = true, default_value_t = 3)]
    pub k_questions: usize,
    #[arg(long, global = true, default_value_t = 2)]
    pub max_rounds: u32,
    /// Seconds east of UTC for time-of-day bins at serve time.
    #[arg(long, global = true, default_value_t = 3 * 3600, allow_hyphen_values = true)]
    pub utc_offset: i32,
    /// Comma-separated risk signals.
    #[arg(long, global = true, default_value = "bn,rate")]
    pub signals: String,
    /// Message tagger used when compiling.
    #[arg(long, global = true, default_value = "rule")]
    pub tagger: String,
}

impl Default for GlobalOpts {
    fn default() -> Self {
        Cli::parse_from(["smsauth", "ledger", "verify", "-"]).global
    }
}

impl GlobalOpts {
    pub fn policy(&self) -> AuthPolicy {
        AuthPolicy {
            theta_max: self.theta_max,
            theta_min: self.theta_min,
            tau: self.tau,
            k_questions: self.k_questions,
            max_rounds: self.max_rounds,
            ..AuthPolicy::default()
        }
    }

    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            policy: self.policy(),
            utc_offset: self.utc_offset,
            seed: self.seed,
            signals: self.signals.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a dialog script into a workflow file.
    Compile {
        script: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Fit per-user profiles from a transaction log CSV.
    Train {
        log: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the gateway over TCP (`--listen`) or stdin/stdout.
    Serve {
        #[command(flatten)]
        artifacts: Artifacts,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Feed a transcript through the gateway and check the replies.
    Replay {
        transcript: PathBuf,
        #[command(flatten)]
        artifacts: Artifacts,
    },
    /// Ledger maintenance.
    Ledger {
        #[command(subcommand)]
        command: LedgerCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum LedgerCommand {
    /// Check the hash chain of a ledger file.
    Verify { path: PathBuf },
}

#[derive(Debug, Clone, Args)]
pub struct Artifacts {
    /// Compiled workflow, or a `.flow` script compiled on the fly.
    #[arg(long)]
    pub workflow: PathBuf,
    #[arg(long)]
    pub users: PathBuf,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Ledger file; in-memory when omitted.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error("divergence at frame {frame}: {reason}")]
    Divergence { frame: usize, reason: String },
    #[error("chain broken at seq {first_bad_seq}")]
    ChainBroken { first_bad_seq: u64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Divergence { .. } | CliError::ChainBroken { .. } => 1,
            CliError::Io { .. } | CliError::Invalid(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Runs a parsed command line; returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Compile { script, out: target } => cmd_compile(&script, &target, &cli.global, out),
        Command::Train { log, out: target } => cmd_train(&log, &target, &cli.global, out),
        Command::Serve { artifacts, listen } => cmd_serve(&artifacts, listen.as_deref(), &cli.global, err),
        Command::Replay { transcript, artifacts } => cmd_replay(&transcript, &artifacts, &cli.global, out),
        Command::Ledger { command: LedgerCommand::Verify { path } } => cmd_ledger_verify(&path, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_compile(script: &Path, target: &Path, opts: &GlobalOpts, out: &mut dyn Write) -> Result<(), CliError> {
    let source = read(script)?;
    let tagger = registry::taggers().create(&opts.tagger).map_err(|e| CliError::Invalid(e.to_string()))?;
    let definition = mapper::compile_with(&source, tagger.as_ref()).map_err(|e| mapper_error(script, e))?;
    fs::write(target, mapper::to_portable(&definition)).map_err(io_err(target))?;
    let _ = writeln!(
        out,
        "compiled {}: {} steps, {} templates",
        definition.workflow_id,
        definition.steps.len(),
        definition.templates.len()
    );
    Ok(())
}

fn mapper_error(path: &Path, e: MapperError) -> CliError {
    let line = match &e {
        MapperError::Parse { line, .. } | MapperError::Portable { line, .. } => *line,
        _ => 0,
    };
    let reason = match e {
        MapperError::Parse { reason, .. } | MapperError::Portable { reason, .. } => reason,
        other => other.to_string(),
    };
    CliError::Parse { path: path.to_path_buf(), line, reason }
}

/// Parses a transaction log. Row numbers in errors are file line numbers.
pub fn parse_training_log(path: &Path, text: &str) -> Result<Vec<TrainingRow>, CliError> {
    let bad = |line: usize, reason: String| CliError::Parse { path: path.to_path_buf(), line, reason };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != TRAIN_HEADER {
        return Err(bad(1, format!("expected header `{}`", TRAIN_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            bad(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let ts = DateTime::parse_from_rfc3339(&record[1])
            .map_err(|e| bad(line, format!("bad timestamp `{}`: {e}", &record[1])))?;
        let amount: f64 = record[2]
            .parse()
            .ok()
            .filter(|a: &f64| a.is_finite() && *a >= 0.0)
            .ok_or_else(|| bad(line, format!("bad amount `{}`", &record[2])))?;
        let valid = match &record[4] {
            "true" => true,
            "false" => false,
            other => return Err(bad(line, format!("bad valid flag `{other}`"))),
        };
        if record[0].is_empty() {
            return Err(bad(line, "empty user_id".into()));
        }
        rows.push(TrainingRow {
            user_id: record[0].to_string(),
            ts: ts.timestamp(),
            utc_offset: ts.offset().local_minus_utc(),
            amount,
            valid,
        });
    }
    Ok(rows)
}

pub fn cmd_train(log: &Path, target: &Path, opts: &GlobalOpts, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = parse_training_log(log, &read(log)?)?;
    let profiles = risk::train_profiles(&rows, opts.alpha).map_err(|e| CliError::Invalid(e.to_string()))?;
    fs::write(target, risk::profiles_to_json(&profiles)).map_err(io_err(target))?;
    let _ = writeln!(out, "trained {} profiles from {} rows", profiles.len(), rows.len());
    Ok(())
}

/// `msisdn,user_id,role` per line; a leading header row is optional.
pub fn parse_users(path: &Path, text: &str) -> Result<Directory, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse { path: path.to_path_buf(), line: i + 1, reason: e.to_string() })?;
        if i == 0 && record.get(0) == Some("msisdn") {
            continue;
        }
        if record.len() != 3 || record.iter().any(str::is_empty) {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: record.position().map_or(i + 1, |p| p.line() as usize),
                reason: "expected msisdn,user_id,role".into(),
            });
        }
        entries.push(UserEntry { msisdn: record[0].into(), user_id: record[1].into(), role: record[2].into() });
    }
    Directory::new(entries).map_err(|e| CliError::Invalid(e.to_string()))
}

pub fn load_workflow(path: &Path, opts: &GlobalOpts) -> Result<WorkflowDefinition, CliError> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "flow") {
        let tagger = registry::taggers().create(&opts.tagger).map_err(|e| CliError::Invalid(e.to_string()))?;
        mapper::compile_with(&text, tagger.as_ref()).map_err(|e| mapper_error(path, e))
    } else {
        mapper::from_portable(&text).map_err(|e| mapper_error(path, e))
    }
}

pub fn build_gateway(artifacts: &Artifacts, opts: &GlobalOpts) -> Result<Gateway, CliError> {
    let definition = load_workflow(&artifacts.workflow, opts)?;
    let directory = parse_users(&artifacts.users, &read(&artifacts.users)?)?;
    let profiles: BTreeMap<String, UserProfile> = match &artifacts.profiles {
        Some(p) => risk::profiles_from_json(&read(p)?).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    let ledger = match &artifacts.ledger {
        Some(p) => Ledger::open(p).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?,
        None => Ledger::in_memory(),
    };
    Gateway::new(definition, directory, profiles, ledger, opts.gateway_config()).map_err(|e| CliError::Invalid(e.to_string()))
}

pub fn cmd_serve(
    artifacts: &Artifacts,
    listen: Option<&str>,
    opts: &GlobalOpts,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let gateway = Arc::new(build_gateway(artifacts, opts)?);
    let result = match listen {
        Some(addr) => {
            let listener = TcpListener::bind(addr).map_err(|e| CliError::Invalid(format!("bind {addr}: {e}")))?;
            let local = listener.local_addr().map(|a| a.to_string()).unwrap_or_else(|_| addr.to_string());
            let _ = writeln!(err, "smsauth listening on {local}");
            gateway::serve_tcp(Arc::clone(&gateway), listener)
        }
        None => {
            let _ = writeln!(err, "smsauth serving on stdin/stdout");
            gateway::serve_lines(&gateway, io::stdin().lock(), io::stdout().lock())
        }
    };
    gateway.flush().map_err(|e| CliError::Invalid(e.to_string()))?;
    result.map_err(|e| CliError::Invalid(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TranscriptFrame {
    pub msisdn: String,
    pub text: String,
    #[serde(default)]
    pub ts: Option<i64>,
    #[serde(default)]
    pub expect: Vec<String>,
}

pub fn parse_transcript(path: &Path, text: &str, now: Option<i64>) -> Result<Vec<TranscriptFrame>, CliError> {
    let mut frames: Vec<TranscriptFrame> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| CliError::Parse { path: path.to_path_buf(), line: i + 1, reason };
        let mut frame: TranscriptFrame = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let ts = match (frame.ts, now) {
            (Some(ts), _) => ts,
            (None, Some(now)) => now + frames.len() as i64,
            (None, None) => return Err(bad("frame has no ts and no --now was given".into())),
        };
        if frames.last().is_some_and(|p| p.ts.unwrap_or(i64::MIN) >= ts) {
            return Err(bad("timestamps must be strictly increasing".into()));
        }
        frame.ts = Some(ts);
        frames.push(frame);
    }
    Ok(frames)
}

/// Checks that each expected substring occurs, in order, among the replies.
pub fn match_expectations(expect: &[String], replies: &[SmsFrame]) -> Result<(), String> {
    let mut at = 0;
    for want in expect {
        match replies[at..].iter().position(|r| r.text.contains(want.as_str())) {
            Some(p) => at += p + 1,
            None => {
                let got: Vec<&str> = replies.iter().map(|r| r.text.as_str()).collect();
                return Err(format!("expected {want:?} in order, got {got:?}"));
            }
        }
    }
    Ok(())
}

/// Replays frames through `gateway`, stopping at the first divergence.
pub fn replay_frames(gateway: &Gateway, frames: &[TranscriptFrame], out: &mut dyn Write) -> Result<(), CliError> {
    for (i, f) in frames.iter().enumerate() {
        let frame = SmsFrame::inbound(&f.msisdn, &f.text, f.ts.expect("filled by parse_transcript"));
        let replies = gateway
            .handle_frame(&frame)
            .unwrap_or_else(|e| vec![SmsFrame::outbound(&f.msisdn, format!("Error: {e}"), frame.ts)]);
        for r in &replies {
            let _ = writeln!(out, "[{i}] -> {}: {}", r.msisdn, r.text.replace('\n', " | "));
        }
        match_expectations(&f.expect, &replies).map_err(|reason| CliError::Divergence { frame: i, reason })?;
    }
    Ok(())
}

pub fn cmd_replay(transcript: &Path, artifacts: &Artifacts, opts: &GlobalOpts, out: &mut dyn Write) -> Result<(), CliError> {
    let frames = parse_transcript(transcript, &read(transcript)?, opts.now)?;
    let gateway = build_gateway(artifacts, opts)?;
    let result = replay_frames(&gateway, &frames, out);
    gateway.flush().map_err(|e| CliError::Invalid(e.to_string()))?;
    result?;
    let _ = writeln!(out, "replay ok: {} frames", frames.len());
    Ok(())
}

pub fn cmd_ledger_verify(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let report = ledger::verify_bytes(&bytes);
    if report.ok {
        let _ = writeln!(out, "ok: {} events", report.length);
        Ok(())
    } else {
        let seq = report.first_bad_seq.unwrap_or(0);
        let _ = writeln!(out, "first_bad_seq: {seq}");
        Err(CliError::ChainBroken { first_bad_seq: seq })
    }
}

/// Convenience for callers holding an open reader.
pub fn serve_reader<R: io::Read>(gateway: &Gateway, input: R, output: impl Write) -> io::Result<()> {
    gateway::serve_lines(gateway, BufReader::new(input), output)
}
