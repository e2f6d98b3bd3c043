use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use convdistill::{Lambda, Normalization, WorkerPool};
use convdistill_cli::commands::{self, SegSpec};
use convdistill_cli::{bench, formats, CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "convdistill",
    version,
    about = "Distill input/output pairs into a convolution kernel and explain it"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// 2-D DFT (or inverse) of a CSV or CDM matrix, written as CDM.
    Fft {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "unnorm", value_parser = commands::parse_norm)]
        norm: Normalization,
        #[arg(long, env = "CONVDISTILL_CORES")]
        cores: Option<usize>,
        #[arg(long)]
        inverse: bool,
    },
    /// Fit a kernel K with X ⊛ K ≈ Y over one or more pairs.
    Distill {
        #[arg(long = "x", num_args = 1.., required = true)]
        x: Vec<PathBuf>,
        #[arg(long = "y", num_args = 1.., required = true)]
        y: Vec<PathBuf>,
        /// Regularization strength, or `auto`.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        lambda: String,
        #[arg(long, env = "CONVDISTILL_CORES")]
        cores: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-feature contribution factors of a fitted kernel.
    Explain {
        #[arg(long = "x")]
        x: PathBuf,
        #[arg(long = "y")]
        y: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// `block:R,C`, `cols` or `rows`.
        #[arg(long, value_parser = str::parse::<SegSpec>)]
        seg: SegSpec,
        #[arg(long, env = "CONVDISTILL_CORES")]
        cores: Option<usize>,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Time direct, serial and pooled transforms across sizes.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 256])]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        cores: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite a matrix file as CSV or CDM.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        csv: bool,
    },
}

fn default_cores() -> usize {
    WorkerPool::available().workers()
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fft {
            input,
            output,
            norm,
            cores,
            inverse,
        } => commands::fft(
            &input,
            &output,
            norm,
            cores.unwrap_or_else(default_cores),
            inverse,
        ),
        Command::Distill {
            x,
            y,
            lambda,
            cores,
            out,
        } => {
            let lambda: Lambda = lambda
                .parse()
                .map_err(|e: convdistill::Error| CliError::Usage(e.to_string()))?;
            let summary =
                commands::distill(&x, &y, lambda, cores.unwrap_or_else(default_cores), &out)?;
            print!("{}", summary.to_text());
            Ok(())
        }
        Command::Explain {
            x,
            y,
            model,
            seg,
            cores,
            out_prefix,
        } => {
            let s = commands::explain(
                &x,
                &y,
                &model,
                seg,
                cores.unwrap_or_else(default_cores),
                &out_prefix,
            )?;
            println!("features={}", s.features);
            println!("completeness_residual={:e}", s.completeness_residual);
            println!(
                "completeness={}",
                if s.complete() { "ok" } else { "inexact" }
            );
            println!("weights={}", s.weights_path.display());
            println!("heatmap={}", s.heatmap_path.display());
            Ok(())
        }
        Command::Bench { sizes, cores, out } => {
            let cores = cores.unwrap_or_else(|| {
                let env = std::env::var("CONVDISTILL_CORES")
                    .ok()
                    .and_then(|v| v.parse().ok());
                let mut list = vec![1, env.unwrap_or_else(default_cores)];
                list.dedup();
                list
            });
            let rows = bench::run(&sizes, &cores)?;
            let report = bench::format_report(&rows);
            formats::write_file(&out, &report)?;
            print!("{report}");
            Ok(())
        }
        Command::Convert { input, output, csv } => commands::convert(&input, &output, csv),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
