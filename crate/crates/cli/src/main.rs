//! Benchmark front end: simulate conversation suites, run the separation
//! pipeline, and score the outputs. Deterministic for a fixed seed.

mod config;
mod pool;
mod score;
mod separate;
mod sessionio;
mod simulate;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "css-bench",
    about = "Continuous speech separation benchmark: simulate, separate, score",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render simulated-conversation mini sessions at the six overlap
    /// conditions and write audio, references, and manifests.
    Simulate(simulate::SimulateArgs),
    /// Run sliding-window separation on a simulated session.
    Separate(separate::SeparateArgs),
    /// Score separated outputs (SI-SNR tables and/or WER protocols).
    Score(score::ScoreArgs),
}

fn main() {
    // Thread-count override for the compute pool.
    if let Ok(v) = std::env::var("CSS_BENCH_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(args),
        Command::Separate(args) => separate::run(args),
        Command::Score(args) => score::run(args),
    };
    if let Err(err) = result {
        // One stable category prefix per error class.
        let category = err
            .downcast_ref::<css_core::Error>()
            .map(|e| e.category())
            .unwrap_or("error");
        eprintln!("{category}: {err:#}");
        std::process::exit(1);
    }
}
