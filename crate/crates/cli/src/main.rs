use std::path::PathBuf;
use std::process::ExitCode;

use adapterd_cli::commands::{
    self, BenchArgs, Format, LiftArgs, ServeArgs, SimulateArgs, SweepArgs,
};
use adapterd_cli::scenarios;
use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "adapterd",
    version,
    about = "Multi-adapter serving simulator, live service and task profiler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    InSample,
    Cv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario in virtual time and print latency metrics.
    Simulate {
        /// Bundled scenario name or path to a scenario JSON file.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        users: Option<u32>,
        /// Write the report here.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        /// Include per-request records in the JSON report.
        #[arg(long)]
        records: bool,
    },
    /// Run a scenario once per concurrent-user count.
    Sweep {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated user counts; defaults to the scenario's sweep.
        #[arg(long, value_delimiter = ',')]
        users: Option<Vec<u32>>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Serve the streaming HTTP API (ADAPTERD_PORT overrides --port).
    Serve {
        /// Take engine settings and adapter count from this scenario.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        adapters: Option<u32>,
    },
    /// Drive running services with closed-loop users.
    Bench {
        /// Service base URL; repeat for round-robin across replicas.
        #[arg(long = "url", required = true)]
        urls: Vec<String>,
        #[arg(long, default_value_t = 1)]
        users: u32,
        #[arg(long = "duration-s", default_value_t = 120.0)]
        duration_s: f64,
        #[arg(long, default_value_t = 25)]
        adapters: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute complexity heuristics of a JSON-lines dataset.
    Profile {
        dataset: PathBuf,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit linear models from heuristics to quality metrics.
    Lift {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        quality: PathBuf,
        /// Quality metric to fit, or "all".
        #[arg(long, default_value = "all")]
        target: String,
        #[arg(long, value_enum, default_value = "in-sample")]
        mode: Mode,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Correlate heuristics with quality metrics.
    Correlate {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        quality: PathBuf,
    },
    /// List bundled scenarios.
    Scenarios,
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Simulate {
            scenario,
            seed,
            users,
            output,
            format,
            records,
        } => {
            let (_, table) = commands::simulate(&SimulateArgs {
                scenario,
                seed,
                users,
                output,
                format: match format {
                    OutputFormat::Json => Format::Json,
                    OutputFormat::Csv => Format::Csv,
                },
                records,
            })?;
            print!("{table}");
        }
        Command::Sweep {
            scenario,
            seed,
            users,
            output,
        } => {
            let (_, table) = commands::sweep(&SweepArgs {
                scenario,
                seed,
                users,
                output,
            })?;
            print!("{table}");
        }
        Command::Serve {
            scenario,
            port,
            adapters,
        } => commands::serve(&ServeArgs {
            scenario,
            port,
            adapters,
        })?,
        Command::Bench {
            urls,
            users,
            duration_s,
            adapters,
            seed,
            output,
        } => {
            let (outcome, table) = commands::bench(&BenchArgs {
                urls,
                users,
                duration_s,
                adapters,
                seed,
                output,
            })?;
            print!("{table}");
            if commands::bench_failed(&outcome) {
                eprintln!("error: no request completed");
                return Ok(ExitCode::from(1));
            }
        }
        Command::Profile {
            dataset,
            name,
            output,
        } => {
            let profile = commands::profile(&dataset, name.as_deref(), output.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&profile)?);
        }
        Command::Lift {
            profiles,
            quality,
            target,
            mode,
            output,
        } => {
            let (_, text) = commands::lift(&LiftArgs {
                profiles,
                quality,
                target: Some(target),
                mode: match mode {
                    Mode::InSample => adapterd_core::profiler::RmseMode::InSample,
                    Mode::Cv => adapterd_core::profiler::RmseMode::LeaveOneOut,
                },
                output,
            })?;
            print!("{text}");
        }
        Command::Correlate { profiles, quality } => {
            let (_, text) = commands::correlate(&profiles, &quality)?;
            print!("{text}");
        }
        Command::Scenarios => {
            for name in scenarios::names() {
                println!("{name}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err) as u8)
        }
    }
}
