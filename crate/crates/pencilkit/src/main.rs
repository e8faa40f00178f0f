use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pencilkit::cli::{corpus, run_source, Overrides, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "pencilkit", version, about = "Check metric pencils and F-manifolds described in TOML files")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the checks of a problem file, or of a bundled entry given as `corpus:<name>`.
    Run {
        file: String,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Comma-separated pencil parameters.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Option<Vec<f64>>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Record wall time per check (makes the JSON run-dependent).
        #[arg(long)]
        timings: bool,
        /// Evaluate sample points on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// List the bundled problem files.
    Corpus {
        /// Print the source of one entry instead.
        #[arg(long)]
        show: Option<String>,
    },
}

fn load(file: &str) -> Result<String, String> {
    match file.strip_prefix("corpus:") {
        Some(name) => corpus::find(name)
            .map(|e| e.source.to_string())
            .ok_or_else(|| format!("no corpus entry {name:?}")),
        None => std::fs::read_to_string(file).map_err(|e| format!("{file}: {e}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Corpus { show: None } => {
            print!("{}", corpus::catalog());
            ExitCode::SUCCESS
        }
        Cmd::Corpus { show: Some(name) } => match corpus::find(&name) {
            Some(e) => {
                print!("{}", e.source);
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("config error: no corpus entry {name:?}");
                ExitCode::from(EXIT_CONFIG as u8)
            }
        },
        Cmd::Run {
            file,
            points,
            seed,
            tol,
            lambda,
            json,
            timings,
            sequential,
        } => {
            let ov = Overrides {
                points,
                seed,
                tol,
                lambdas: lambda,
                sequential,
                timings,
            };
            let report = load(&file).and_then(|src| run_source(&src, &ov).map_err(|e| e.to_string()));
            let report = match report {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            print!("{}", report.render_text());
            if let Some(path) = json {
                if let Err(e) = std::fs::write(&path, report.to_json()) {
                    eprintln!("cannot write {}: {e}", path.display());
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            }
            ExitCode::from(report.exit_code() as u8)
        }
    }
}
