use std::path::PathBuf;
use std::process::ExitCode;

use bvfim::bench::BenchConfig;
use bvfim::io::{keys_help, to_sorted_json};
use bvfim::verify::Level;
use bvfim::Error;
use bvfim_cli::{bench_summary, cmd_bench, cmd_compare, cmd_run, cmd_verify, diagnostic, exit_code, OUTPUT_ROOT_ENV};
use clap::{Parser, Subcommand};

fn config_help() -> String {
    format!(
        "Run specs are INI documents. Accepted keys:\n\n{}\nOutputs go to ${OUTPUT_ROOT_ENV} (else [run] output_dir, else ./bvfim-out), \
         in a directory named by the spec hash.\n\nExit codes: 0 ok, 2 config error, 3 solver divergence, \
         4 verification failure, 5 I/O error.",
        keys_help()
    )
}

#[derive(Parser)]
#[command(name = "bvfim", version, about = "Bilevel solvers with a value-function barrier method and gradient-based baselines")]
#[command(after_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one spec and write trace.csv, summary.json and spec.ini.
    #[command(after_help = config_help())]
    Run { spec: PathBuf },
    /// Run every .ini spec in a directory and merge their curves.
    Compare {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the numerical verification suite.
    Verify {
        #[arg(long, default_value = "quick")]
        level: Level,
    },
    /// Time hypergradient computation across LL dimensions and inner budgets.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 1000, 10000])]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [30usize, 60, 90, 120, 150, 180])]
        steps: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 7)]
        reps: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
    },
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("{}", diagnostic(err));
    ExitCode::from(exit_code(err))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { spec } => match cmd_run(&spec) {
            Ok(out) => {
                println!("{}", out.dir.display());
                match out.error() {
                    Some(e) => fail(e),
                    None => ExitCode::SUCCESS,
                }
            }
            Err(e) => fail(&e),
        },
        Command::Compare { dir, jobs } => match cmd_compare(&dir, jobs) {
            Ok(out) => {
                println!("{}", out.merged.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Verify { level } => {
            let (report, result) = cmd_verify(level);
            match to_sorted_json(&report) {
                Ok(text) => print!("{text}"),
                Err(e) => return fail(&e),
            }
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
        Command::Bench { dims, steps, jobs, reps, warmup } => {
            let cfg = BenchConfig { dims: dims.clone(), steps, jobs, reps, warmup, ..BenchConfig::default() };
            match cmd_bench(&cfg) {
                Ok(report) => {
                    let stdout = std::io::stdout();
                    if let Err(e) = report.write_csv(stdout.lock()) {
                        return fail(&Error::io(std::path::Path::new("<stdout>"), e));
                    }
                    eprint!("{}", bench_summary(&report, &dims));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
