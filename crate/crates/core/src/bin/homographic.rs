use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use homographic::cli::{execute, Cli, EXIT_FAILURE};

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let cfg = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(e.exit_code());
        }
    };
    let mut out: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let outcome = execute(cli.command, &cfg, &mut out);
    out.flush().context("flushing output")?;
    drop(out);
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(e.exit_code());
        }
    };
    let meta = serde_json::to_string_pretty(&outcome.metadata(cli.command, &cfg))?;
    match &cli.out {
        Some(p) => {
            let mut path = p.clone().into_os_string();
            path.push(".meta.json");
            std::fs::write(&path, meta + "\n").with_context(|| format!("writing {}", path.to_string_lossy()))?;
        }
        None => eprintln!("{meta}"),
    }
    for n in &outcome.notes {
        eprintln!("note: {n}");
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}
