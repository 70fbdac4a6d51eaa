use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use molchan_cli::{run, Command, Invocation};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    FptScan,
    PermEstimate,
    AdimaScan,
    DbarScan,
    MixingScan,
    Capacity,
    CodeEval,
    SourceChannel,
    PaperSuite,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::FptScan => Command::FptScan,
            Sub::PermEstimate => Command::PermEstimate,
            Sub::AdimaScan => Command::AdimaScan,
            Sub::DbarScan => Command::DbarScan,
            Sub::MixingScan => Command::MixingScan,
            Sub::Capacity => Command::Capacity,
            Sub::CodeEval => Command::CodeEval,
            Sub::SourceChannel => Command::SourceChannel,
            Sub::PaperSuite => Command::PaperSuite,
        }
    }
}

/// Simulation experiments on diffusion-based molecular channels.
#[derive(Debug, Parser)]
#[command(name = "molchan", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Sub,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the subcommand's main trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(k) = args.workers {
        if k == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let inv = Invocation {
        command: args.subcommand.into(),
        config: args.config,
        seed: args.seed,
        out: args.out,
        trials: args.trials,
    };
    match run(&inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
