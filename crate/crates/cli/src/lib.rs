//! Experiment recipes behind the `bngeom` command-line tool.
//!
//! Each subcommand validates its flags, runs one recipe, and writes CSV,
//! SVG and checkpoint files stamped with the hash of an
//! [`manifest::ExperimentManifest`], which is itself written next to them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod common;
pub mod error;
pub mod manifest;
pub mod protocol;
pub mod recipes;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use args::{Cli, Command};
pub use error::{CliError, Result};

/// What a subcommand wrote and a human-readable result line.
#[derive(Debug, Clone)]
pub struct Summary {
    pub files: Vec<PathBuf>,
    pub message: String,
}

/// Runs the parsed command, inside a pool of `--threads` workers if given.
pub fn run(cli: &Cli) -> Result<Summary> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(&cli.command))
        }
        None => dispatch(&cli.command),
    }
}

fn dispatch(cmd: &Command) -> Result<Summary> {
    use recipes::{basic, diag, geometry, tables};
    match cmd {
        Command::Train(a) => basic::train_cmd(a),
        Command::FreezeBatch(a) => basic::freeze_batch_cmd(a),
        Command::Enumerate(a) => basic::enumerate_cmd(a),
        Command::Offsets(a) => diag::offsets_cmd(a),
        Command::Diagnose(a) => diag::diagnose_cmd(a),
        Command::ArrangementSelftest(a) => geometry::selftest_cmd(a),
        Command::PullbackCheck(a) => geometry::pullback_cmd(a),
        Command::DensityProfile(a) => basic::density_profile_cmd(a),
        Command::DecisionMap(a) => basic::decision_map_cmd(a),
        Command::ReproduceTable1(a) => tables::table1_cmd(a),
        Command::ReproduceTable2(a) => tables::table2_cmd(a),
    }
}

#[derive(Debug)]
pub enum ParseFailure {
    /// Grammar error, or `--help` / `--version`.
    Clap(clap::Error),
    /// The config file could not be used.
    Config(CliError),
}

/// Parses the command line, with defaults taken from the `[subcommand]`
/// table of the `--config` TOML file. Flags given on the command line win.
pub fn parse_with_config<I, T>(args: I) -> std::result::Result<Cli, ParseFailure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args).map_err(ParseFailure::Clap)?;
    let Some(path) = &cli.config else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| ParseFailure::Config(CliError::Io(format!("{}: {e}", path.display()))))?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e| ParseFailure::Config(CliError::Usage(format!("{}: {e}", path.display()))))?;
    let name = cli.command.name();
    let mut extra: Vec<OsString> = Vec::new();
    if let Some(v) = doc.get(name) {
        let table = v
            .as_table()
            .ok_or_else(|| ParseFailure::Config(CliError::Usage(format!("config entry [{name}] must be a table"))))?;
        for (key, value) in table {
            let flag = format!("--{key}");
            match value {
                toml::Value::Boolean(true) => extra.push(flag.into()),
                toml::Value::Boolean(false) => {}
                toml::Value::Array(items) => {
                    let parts: Vec<String> = items.iter().map(scalar_text).collect::<std::result::Result<_, _>>().map_err(ParseFailure::Config)?;
                    extra.push(flag.into());
                    extra.push(parts.join(",").into());
                }
                other => {
                    extra.push(flag.into());
                    extra.push(scalar_text(other).map_err(ParseFailure::Config)?.into());
                }
            }
        }
    }
    let mut merged = args.clone();
    if cli.threads.is_none() {
        if let Some(t) = doc.get("threads") {
            let n = t
                .as_integer()
                .ok_or_else(|| ParseFailure::Config(CliError::Usage("config threads must be an integer".into())))?;
            merged.insert(1, n.to_string().into());
            merged.insert(1, "--threads".into());
        }
    }
    let at = merged
        .iter()
        .position(|a| a.to_str() == Some(name))
        .expect("parsed subcommand appears in the arguments");
    for (i, a) in extra.into_iter().enumerate() {
        merged.insert(at + 1 + i, a);
    }
    Cli::try_parse_from(&merged).map_err(ParseFailure::Clap)
}

fn scalar_text(v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(format!("{f:?}")),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(CliError::Usage(format!("unsupported config value {other}"))),
    }
}
