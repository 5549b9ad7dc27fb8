mod args;
mod inputs;
mod run;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::Cli;
use run::{Outcome, EXIT_PRECONDITION};

/// Variant name of an error, e.g. `NotPowerBounded`.
fn error_kind(e: &opdyn::Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("Error")
        .to_string()
}

fn emit(cli: &Cli, out: Outcome) -> std::io::Result<u8> {
    let text = serde_json::to_string_pretty(&out.report).expect("reports are plain JSON") + "\n";
    match &cli.command.common().out {
        Some(path) => {
            fs::write(path, text)?;
            if let Some(csv) = &out.csv {
                fs::write(path.with_extension("csv"), csv)?;
            }
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(out.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run::run(&cli.command) {
        Ok(out) => match emit(&cli, out) {
            Ok(code) => ExitCode::from(code),
            Err(e) => {
                eprintln!(
                    "{}",
                    json!({"error": {"kind": "Io", "message": e.to_string()}})
                );
                ExitCode::from(EXIT_PRECONDITION)
            }
        },
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": {"kind": error_kind(&e), "message": e.to_string()}})
            );
            ExitCode::from(EXIT_PRECONDITION)
        }
    }
}
