use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cyclebounds::Method;
use cyclebounds_cli::{cmd_bench, cmd_bounds, cmd_simulate, BenchArgs, BoundsArgs, SimulateArgs};

#[derive(Parser)]
#[command(name = "cyclebounds", version, about = "Counterfactual share bounds from cyclic monotonicity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    AllCycles,
    TwoCycle,
    Oracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::AllCycles => Method::AllCycles,
            MethodArg::TwoCycle => Method::TwoCycle,
            MethodArg::Oracle => Method::Oracle,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bound counterfactual shares for markets read from a file.
    Bounds {
        /// Market file (TOML) or market table (`.csv`).
        #[arg(short, long)]
        input: PathBuf,
        /// Additional counterfactual as `name=d1,...,dJ`; repeatable.
        #[arg(short, long = "counterfactual")]
        counterfactuals: Vec<String>,
        #[arg(short, long, value_enum, default_value = "all-cycles")]
        method: MethodArg,
        /// Proceed even if the data contain a negative cycle.
        #[arg(long)]
        allow_cm_violation: bool,
        /// Output JSON path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the Monte Carlo comparison of the 2-cycle and all-cycles systems.
    Simulate {
        /// Experiment configuration (TOML); built-in defaults when omitted.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output_dir: PathBuf,
        /// Write mean timings into report.csv too.
        #[arg(long)]
        timings_in_csv: bool,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Time weights + Floyd-Warshall + sharp system over market counts.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![125usize, 250, 500, 1000])]
        m_list: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Include the 2J bound LPs in the timing.
        #[arg(long)]
        end_to_end: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr();
    let code = match cli.command {
        Command::Bounds {
            input,
            counterfactuals,
            method,
            allow_cm_violation,
            output,
        } => cmd_bounds(
            &BoundsArgs {
                input,
                counterfactuals,
                method: method.into(),
                allow_cm_violation,
                output,
            },
            &mut stdout,
            &mut stderr,
        ),
        Command::Simulate {
            config,
            output_dir,
            timings_in_csv,
            quiet,
        } => cmd_simulate(
            &SimulateArgs {
                config,
                output_dir,
                timings_in_csv,
                quiet,
            },
            &mut stderr,
        ),
        Command::Bench {
            m_list,
            repeats,
            end_to_end,
            seed,
        } => cmd_bench(
            &BenchArgs {
                m_list,
                repeats,
                end_to_end,
                seed,
            },
            &mut stdout,
            &mut stderr,
        ),
    };
    ExitCode::from(code as u8)
}
