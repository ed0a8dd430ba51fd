use std::path::PathBuf;
use std::process::ExitCode;

use alphaforge::commands::{self, CommandError, Overrides};
use alphaforge::{fixture, RunConfig};
use alphaforge_core::StrategyMode;
use clap::{Parser, Subcommand, ValueEnum};

/// Hybrid ML and rule-based daily trading backtester.
#[derive(Debug, Parser)]
#[command(name = "alphaforge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Strategy mode, overriding the config.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated ticker subset.
    #[arg(long, global = true, value_delimiter = ',')]
    tickers: Option<Vec<String>>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the data directory and print per-ticker bar counts.
    Ingest,
    /// Fit the scaler and boosted trees on the training range.
    Train,
    /// Run the strategy over the backtest range and write its logs.
    Backtest,
    /// Compute metrics, benchmarks and plot data from backtest logs.
    Report,
    /// Run hybrid and baseline side by side.
    Compare,
    /// Write a synthetic fixture (prices, news, manifest) into --out.
    Fixture {
        /// Fixture spec (JSON); the built-in standard fixture when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Hybrid,
    Baseline,
}

fn write_fixture(spec: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), CommandError> {
    let out = out.ok_or_else(|| CommandError::Invalid("--out is required".into()))?;
    let spec = match spec {
        None => fixture::standard_spec(),
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CommandError::Invalid(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CommandError::Invalid(format!("{}: {e}", path.display())))?
        }
    };
    let data = fixture::generate(&spec).map_err(|e| CommandError::Invalid(e.to_string()))?;
    fixture::write(&out, &spec, &data).map_err(|e| CommandError::Runtime(e.to_string()))?;
    println!(
        "{} tickers, {} days, {} articles written to {}",
        spec.tickers.len(),
        spec.days,
        data.articles.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CommandError> {
    if let Command::Fixture { spec } = cli.command {
        return write_fixture(spec, cli.out);
    }
    let path = cli
        .config
        .ok_or_else(|| CommandError::Invalid("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    Overrides {
        mode: cli.mode.map(|m| match m {
            Mode::Hybrid => StrategyMode::Hybrid,
            Mode::Baseline => StrategyMode::Baseline,
        }),
        output_dir: cli.out,
        tickers: cli.tickers,
        seed: cli.seed,
    }
    .apply(&mut cfg);
    let stdout = std::io::stdout();
    let out = &mut stdout.lock();
    match cli.command {
        Command::Ingest => commands::cmd_ingest(&cfg, out).map(drop),
        Command::Train => commands::cmd_train(&cfg, out).map(drop),
        Command::Backtest => commands::cmd_backtest(&cfg, out).map(drop),
        Command::Report => commands::cmd_report(&cfg, out).map(drop),
        Command::Compare => commands::cmd_compare(&cfg, out).map(drop),
        Command::Fixture { .. } => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ALPHAFORGE_LOG", "warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
