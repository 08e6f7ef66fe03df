use clap::{Parser, Subcommand, ValueEnum};
use coarse_cli::{classify, run, sheaf, CliError, Overrides, SheafCommand, BUNDLED};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "coarse",
    version,
    about = "Verify scenarios about action groupoids, bundles, sheaves and forms"
)]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    report: Format,
    /// Seed for sampling and randomized trials (default 0, or the scenario's).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Samples per domain (default 64, or the scenario's).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Tolerance override, e.g. `--tol eq_tol=1e-8`; repeatable.
    #[arg(long = "tol", value_name = "KEY=VALUE", global = true)]
    tol: Vec<String>,
    /// Stop at the first mismatching assertion.
    #[arg(long, global = true)]
    fail_fast: bool,
    /// Include wall-clock time in the report.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run every assertion of a scenario file or bundled scenario.
    Run { file: String },
    /// Isomorphism, discretization and coarse classes of a bundle list.
    Classify { file: String, list: String },
    /// Presheaf operations on the scenario's finite tables.
    Sheaf {
        #[arg(value_enum)]
        subcommand: SheafSub,
        file: String,
    },
    /// List bundled scenarios.
    Scenarios,
}

#[derive(Clone, Copy, ValueEnum)]
enum SheafSub {
    Concreteness,
    Kappa,
    Sheafify,
    AdjunctionCheck,
}

fn overrides(cli: &Cli) -> Result<Overrides, CliError> {
    let mut o = Overrides {
        seed: cli.seed,
        samples: cli.samples,
        fail_fast: cli.fail_fast,
        timing: cli.timing,
        ..Overrides::default()
    };
    for kv in &cli.tol {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("--tol expects KEY=VALUE, got {kv}")))?;
        let value: f64 = v
            .parse()
            .map_err(|_| CliError::Invalid(format!("--tol {k}: {v} is not a number")))?;
        o.tol.set(k, value)?;
    }
    Ok(o)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = overrides(&cli).and_then(|o| match &cli.command {
        Command::Run { file } => run(file, &o).map(Some),
        Command::Classify { file, list } => classify(file, list, &o).map(Some),
        Command::Sheaf { subcommand, file } => {
            let cmd = match subcommand {
                SheafSub::Concreteness => SheafCommand::Concreteness,
                SheafSub::Kappa => SheafCommand::Kappa,
                SheafSub::Sheafify => SheafCommand::Sheafify,
                SheafSub::AdjunctionCheck => SheafCommand::AdjunctionCheck,
            };
            sheaf(cmd, file, &o).map(Some)
        }
        Command::Scenarios => {
            for (name, _) in BUNDLED {
                println!("{name}");
            }
            Ok(None)
        }
    });
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(report)) => {
            match cli.report {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => print!("{}", report.to_json()),
            }
            if report.all_matched() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
