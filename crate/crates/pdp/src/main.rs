use std::io;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rppm_core::formats::DocumentPaths;
use rppm_pdp::{serve, serve_stream, Service};

/// Policy decision point over a line protocol.
#[derive(Debug, Parser)]
#[command(name = "rppm-pdp", version)]
struct Args {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:7878", conflicts_with = "stdio")]
    listen: String,
    /// Serve a single session on stdin/stdout instead of TCP.
    #[arg(long)]
    stdio: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let paths = DocumentPaths {
        model: args.model,
        graph: args.graph,
        policy: args.policy,
        config: args.config,
    };
    let mut service = match Service::load(&paths) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_status() as u8);
        }
    };
    let result = if args.stdio {
        serve_stream(&mut service, io::stdin().lock(), io::stdout().lock())
    } else {
        TcpListener::bind(&args.listen).and_then(|listener| {
            eprintln!("listening on {}", listener.local_addr()?);
            serve(service, listener).map(drop)
        })
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
