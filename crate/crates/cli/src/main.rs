//! `dtapprox`: train a tree, explore approximate designs, emit Verilog and
//! summarize runs. Talks to a dtapprox service; without `--server` it starts
//! one in-process.
//!
//! Exit codes: 0 success, 2 bad input or usage, 3 internal failure.

mod commands;
mod config;
mod output;

use std::net::SocketAddr;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dtapprox_client::{Client, ClientError};

use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "dtapprox",
    version,
    about = "Approximate bespoke decision-tree design exploration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Train a CART tree and report the exact baseline design.
    Train,
    /// Search precision/threshold settings; writes the Pareto front.
    Optimize,
    /// Write Verilog for one front member after an equivalence check.
    Emit,
    /// Summarize one or more runs and write plot data.
    Report,
}

const USER_ERROR: u8 = 2;
const INTERNAL_ERROR: u8 = 3;

fn is_internal(err: &anyhow::Error) -> bool {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ClientError>() {
            return e.is_internal();
        }
        if let Some(e) = cause.downcast_ref::<dtapprox_core::Error>() {
            return e.is_internal();
        }
    }
    false
}

async fn connect(cfg: &RunConfig) -> Result<Client> {
    if let Some(url) = &cfg.server {
        return Ok(Client::new(url.clone()));
    }
    let (addr, _server) = dtapprox_server::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .context("cannot start the in-process service")?;
    Ok(Client::new(format!("http://{addr}")))
}

async fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(&cli.flags)?;
    let client = connect(&cfg).await?;
    match cli.command {
        Command::Train => commands::train(&client, &cfg).await,
        Command::Optimize => commands::optimize(&client, &cfg).await,
        Command::Emit => commands::emit(&client, &cfg).await,
        Command::Report => commands::report(&client, &cfg).await,
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_internal(&err) { INTERNAL_ERROR } else { USER_ERROR })
        }
    }
}
