use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dots::commands::{verdict_json, CommandError, CommandResult, SimulateOptions, Workspace};
use dots::Error;

#[derive(Parser)]
#[command(
    name = "dots",
    version,
    about = "Compose and run open systems along wiring diagrams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a .uwd diagram to open Petri nets, or a .dwd diagram to machines or ODEs.
    Compose {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        systems: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a machine or an ODE system and print its trace.
    Simulate {
        #[arg(long)]
        system: PathBuf,
        /// State name (machines) or comma-separated numbers (ODEs).
        #[arg(long, allow_hyphen_values = true)]
        init: String,
        /// Inline list, or a path to a .csv file with one input per line.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        inputs: String,
        #[arg(long)]
        steps: Option<usize>,
        /// Euler step size for ODE systems.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check that a map file is a valid map between two systems. Exits 1 on failure.
    CheckMap {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
    },
    /// Emit Graphviz DOT for a system or diagram.
    Render {
        #[arg(long)]
        system: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn emit(text: &str, output: Option<&Path>) -> CommandResult<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| CommandError {
            error: Error::from(e),
            file: Some(p.to_owned()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CommandResult<bool> {
    let mut ws = Workspace::new();
    match cli.command {
        Command::Compose {
            diagram,
            systems,
            output,
        } => {
            let d = ws.load(&diagram)?;
            let names = systems
                .iter()
                .map(|p| ws.load(p))
                .collect::<CommandResult<Vec<_>>>()?;
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let composite = ws.compose(&d, &refs).map_err(|error| CommandError {
                error,
                file: Some(diagram.clone()),
            })?;
            emit(&composite.write(), output.as_deref())?;
        }
        Command::Simulate {
            system,
            init,
            inputs,
            steps,
            h,
            format,
            output,
        } => {
            let name = ws.load(&system)?;
            let inputs = if inputs.ends_with(".csv") && Path::new(&inputs).is_file() {
                std::fs::read_to_string(&inputs).map_err(|e| CommandError {
                    error: Error::from(e),
                    file: Some(inputs.clone().into()),
                })?
            } else {
                inputs
            };
            let opts = SimulateOptions {
                init,
                inputs,
                steps,
                h,
            };
            let report = ws.simulate(&name, &opts).map_err(|error| CommandError {
                error,
                file: Some(system.clone()),
            })?;
            let text = match format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv(),
            };
            emit(&text, output.as_deref())?;
        }
        Command::CheckMap { map, from, to } => {
            let m = ws.load(&map)?;
            let a = ws.load(&from)?;
            let b = ws.load(&to)?;
            let verdict = ws.check_map(&m, &a, &b).map_err(|error| CommandError {
                error,
                file: Some(map.clone()),
            })?;
            print!("{}", verdict_json(&verdict));
            return Ok(verdict.is_pass());
        }
        Command::Render { system, output } => {
            let name = ws.load(&system)?;
            emit(&ws.render(&name)?, output.as_deref())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
