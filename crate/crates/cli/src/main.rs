//! `stl`: train, sweep, evaluate and verify spatiotemporal linear forecasters.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data or I/O
//! error, 3 numeric abort, 4 self-check failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stl_core::runfile::{Preset, Protocol};

#[derive(Parser, Debug)]
#[command(name = "stl", version, about = "Spatiotemporal linear forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Electricity,
    Etth1,
    Ettm1,
    Weather,
    Jaad,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Electricity => Preset::Electricity,
            PresetArg::Etth1 => Preset::Etth1,
            PresetArg::Ettm1 => Preset::Ettm1,
            PresetArg::Weather => Preset::Weather,
            PresetArg::Jaad => Preset::Jaad,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProtocolArg {
    Scarce,
    BestT,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Scarce => Protocol::Scarce,
            ProtocolArg::BestT => Protocol::BestT,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML run file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override the training seed and use it as the only experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for grid cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Dataset defaults to apply; explicit run-file keys still win.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model and write checkpoint, epoch log and manifests.
    Train(RunArgs),
    /// Train and evaluate every cell of the experiment grid.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Replace the variants with the four ablation variants.
        #[arg(long)]
        ablation: bool,
        /// Replace the T and tau grids with a standard protocol.
        #[arg(long, value_enum)]
        protocol: Option<ProtocolArg>,
    },
    /// Evaluate a checkpoint on the test split of the run file's dataset.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Test window whose predictions are exported as traces.
        #[arg(long, default_value_t = 0)]
        window: usize,
        /// Channel exported in the trace file.
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
    /// Write a synthetic dataset as CSV.
    Synth {
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Full spec, e.g. "len=4000,channels=4,period=24,lag=1<0:3:0.8,spike=2@12:2,noise=0.1,seed=2021".
        #[arg(long)]
        spec: Option<String>,
        /// Start from the ablation dataset instead of the default spec.
        #[arg(long)]
        ablation: bool,
        #[arg(long)]
        len: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run gradient checks, oracle checks and a determinism check.
    Selfcheck {
        /// Also write the report to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    // clap exits 2 on bad arguments; that code is reserved for data errors here.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Sweep { run, ablation, protocol } => commands::sweep(&run, ablation, protocol.map(Into::into)),
        Command::Eval {
            run,
            checkpoint,
            window,
            channel,
        } => commands::eval(&run, &checkpoint, window, channel),
        Command::Synth {
            out,
            spec,
            ablation,
            len,
            channels,
            noise,
            seed,
        } => commands::synth(&out, spec.as_deref(), ablation, len, channels, noise, seed),
        Command::Selfcheck { out } => commands::selfcheck(out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
