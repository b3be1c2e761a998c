use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use propnsm::cli::{self, error_line, exit_code};
use propnsm::data::fmt_f64;
use propnsm::Result;

#[derive(Parser)]
#[command(
    name = "propnsm",
    version,
    about = "Zero-shot classification with property embeddings"
)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config value, e.g. `--set protocol.trials=10`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Worker threads for evaluation trials.
    #[arg(long, default_value_t = 1, global = true)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a seen/unseen split.
    Split,
    /// Fit the property model and mapping for one split.
    Train,
    /// Run the configured evaluation protocol.
    Eval,
    /// Compare analytic gradients with finite differences.
    Gradcheck,
    /// Summarize evaluation reports into one CSV.
    Report {
        #[arg(long, short)]
        output: PathBuf,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn run(args: &Args) -> Result<()> {
    if let Command::Report { output, reports } = &args.command {
        cli::cmd_report(reports, output)?;
        println!("wrote {}", output.display());
        return Ok(());
    }
    let lc = cli::load_config(args.config.as_deref(), &args.overrides)?;
    match &args.command {
        Command::Split => {
            let path = cli::cmd_split(&lc)?;
            println!("wrote {}", path.display());
        }
        Command::Train => {
            let path = cli::cmd_train(&lc)?;
            println!("wrote {}", path.display());
        }
        Command::Eval => {
            let (report, json, csv) = cli::cmd_eval(&lc, args.jobs)?;
            for s in &report.summary {
                for (metric, v) in &s.means {
                    println!("{} {}={}", s.method, metric, fmt_f64(*v));
                }
            }
            println!("wrote {}", json.display());
            println!("wrote {}", csv.display());
        }
        Command::Gradcheck => {
            let g = cli::cmd_gradcheck(&lc)?;
            println!("j_s max_rel_err={}", fmt_f64(g.j_s));
            println!("j_u max_rel_err={}", fmt_f64(g.j_u));
            println!("u max_rel_err={}", fmt_f64(g.u));
            if g.max() > 1e-4 {
                return Err(propnsm::Error::Numeric(format!(
                    "gradient check failed, max relative error {}",
                    fmt_f64(g.max())
                )));
            }
        }
        Command::Report { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
