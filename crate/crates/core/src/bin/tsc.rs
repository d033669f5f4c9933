use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tscbench::bench::{self, BenchError};
use tscbench::format::{ConversionOptions, FormatKind};

#[derive(Parser)]
#[command(name = "tsc", version, about = "Traffic signal control benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a network/flow pair between file formats.
    Convert {
        #[arg(long)]
        from: FormatKind,
        #[arg(long)]
        to: FormatKind,
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        flow: PathBuf,
        /// Yellow interval applied to every signalized intersection.
        #[arg(long)]
        yellow: Option<f64>,
        /// Keep origin/destination-only routes instead of completing them.
        #[arg(long)]
        no_route_completion: bool,
        #[arg(long, default_value = "converted")]
        out: PathBuf,
    },
    /// Run one experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank finished runs (summary.json files or run directories).
    Compare {
        #[arg(required = true, num_args = 2..)]
        results: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<u8, BenchError> {
    match command {
        Command::Convert {
            from,
            to,
            net,
            flow,
            yellow,
            no_route_completion,
            out,
        } => {
            let opts = ConversionOptions {
                yellow_time_override: yellow,
                complete_routes: !no_route_completion,
                ..ConversionOptions::default()
            };
            let done = bench::cmd_convert(&net, &flow, from, to, &opts, &out)?;
            println!("wrote {}", done.network_path.display());
            println!("wrote {}", done.flow_path.display());
            if done.report.is_empty() {
                println!("validation: ok");
                Ok(0)
            } else {
                println!("validation:\n{}", done.report);
                Ok(1)
            }
        }
        Command::Run { config, seed, out } => {
            let (dir, result) = bench::cmd_run(&config, seed, out.as_deref())?;
            let s = &result.summary;
            println!(
                "{} seed {}: {} episode(s), final travel_time {:.2}, best episode {}",
                s.agent.name(),
                s.seed,
                s.episodes,
                s.final_metrics.travel_time,
                s.best_episode
            );
            println!("results in {}", dir.display());
            Ok(0)
        }
        Command::Compare { results } => {
            let runs = results
                .iter()
                .map(|p| bench::load_summary(p))
                .collect::<Result<Vec<_>, _>>()?;
            print!("{}", bench::compare(&runs)?);
            Ok(0)
        }
    }
}
