use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use madelung_lab_cli::config::ExperimentConfig;
use madelung_lab_cli::error::CliError;
use madelung_lab_cli::{report, scenario, sweep};

/// Exit status: 0 when every criterion passes, 1 on any failure, 2 on a usage or config error.
#[derive(Parser)]
#[command(
    name = "madelung-lab",
    version,
    about = "Run madelung-lab scenarios from JSON configs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run { config: PathBuf },
    /// Run a scenario once per value of a parameter and fit a convergence order.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated numbers, at least three.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Metric to tabulate; defaults to the scenario's primary metric.
        #[arg(long)]
        metric: Option<String>,
    },
    /// Summarize every manifest under a directory.
    Report { dir: PathBuf },
}

fn read_template(path: &PathBuf) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn execute(cmd: Command) -> Result<bool, CliError> {
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (m, dir) = scenario::run(&cfg)?;
            for v in &m.criteria {
                println!(
                    "{} criterion {} {}",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.criterion,
                    v.name
                );
                for c in v.checks.iter().filter(|c| !c.pass) {
                    let value = c
                        .value
                        .map_or("non-finite".to_string(), |x| format!("{x:e}"));
                    println!("    {}: {value} (limit {:e})", c.what, c.limit);
                }
            }
            println!(
                "manifest: {}",
                dir.join(madelung_lab_cli::manifest::MANIFEST_FILE)
                    .display()
            );
            Ok(m.passed())
        }
        Command::Sweep {
            config,
            param,
            values,
            metric,
        } => {
            let values = sweep::parse_values(&values)?;
            let template = read_template(&config)?;
            let (table, out) = sweep::sweep(&template, &param, &values, metric.as_deref())?;
            print!("{}", table.to_csv());
            println!("order: {}", table.order);
            println!(
                "table: {}",
                out.join(format!("sweep_{param}.csv")).display()
            );
            Ok(table.all_passed())
        }
        Command::Report { dir } => {
            let s = report::summarize(&dir);
            if dir.is_dir() {
                s.write(&dir)?;
            }
            print!("{}", s.to_text());
            Ok(s.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
