use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use exciton::analyze::analyze_dirs;
use exciton::bench::{render, run_chain_bench};
use exciton::config::parse_window;
use exciton::runner::{default_workers, run_config_file, PointStatus, RunOptions};
use exciton::CliResult;
use exciton_core::analysis::FitWindow;

const FILES_HELP: &str = "\
Output files (floats with 17 significant digits, `#` lines are metadata):
  survival_avg.csv        t,tau,pi_mean,pi_min,pi_max,jensen_lb
  gamma_avg.csv           l,l_over_n,gamma_mean
  survival_exact_avg.csv  t,tau,pi            (exact mode)
  nodes.csv               node_index,x1,x2,x3,is_trap   (r = 1)
  spectrum.csv            l,epsilon,gamma                (r = 1)
  survival.csv            t,tau,pi                       (r = 1)
  checkpoints/real_<r>.csv  l,gamma with `# gamma_r=<v> seed=<v>`
  fits.csv                n,gamma,eta,eta_err,window_lo,window_hi,residual
  scaling.csv             gamma,eta0,mu
  <run>/density.csv       gamma_bin,rho
Times tau are rescaled, tau = t * gamma / n^3; fit windows use tau.
Exit status: 1 for invalid input, 2 for failed computations.";

#[derive(Parser)]
#[command(name = "exciton", version, about = "Coherent exciton trapping on random long-range networks", after_help = FILES_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensembles of a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Continue an unfinished run from its checkpoints.
        #[arg(long)]
        resume: bool,
        /// Also compute the survival from the full propagator.
        #[arg(long)]
        exact: bool,
    },
    /// Fit finished runs and write fits, scaling and densities.
    Analyze {
        /// Run directories or single point directories.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Fit windows `tau_lo:tau_hi` or `auto`, comma separated.
        #[arg(long, value_delimiter = ',')]
        windows: Vec<String>,
    },
    /// Linear chain with a trap at one end.
    ChainBench {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, out, workers, resume, exact } => {
            let opts = RunOptions { workers: workers.unwrap_or_else(default_workers), resume, exact };
            for o in run_config_file(&config, &out, opts)? {
                match (&o.status, &o.result) {
                    (PointStatus::UpToDate, _) => println!("{}: up to date", o.dir.display()),
                    (PointStatus::Computed { resumed }, Some(r)) => println!(
                        "{}: {} realizations ({} from checkpoints), <Gamma_r> = {:.6e}",
                        o.dir.display(),
                        r.config.realizations,
                        resumed,
                        r.mean_gamma_r
                    ),
                    _ => {}
                }
            }
        }
        Command::Analyze { runs, out, windows } => {
            let windows: Vec<FitWindow> = windows
                .iter()
                .map(|w| parse_window(w).map_err(|m| exciton::CliError::Validation(format!("--windows: {m}"))))
                .collect::<CliResult<_>>()?;
            let report = analyze_dirs(&runs, &windows, &out)?;
            for f in &report.fits {
                println!(
                    "n = {:>5}  gamma = {:<8e} eta = {:.5} ± {:.1e}  window {:.2e}..{:.2e}",
                    f.n, f.gamma, f.fit.exponent, f.fit.eta_err, f.fit.window.0, f.fit.window.1
                );
            }
            for s in &report.scaling {
                println!("gamma = {:e}: mu = {:.4}, eta0 = {:.4}", s.gamma, s.mu, s.eta0);
            }
            for n in &report.notices {
                eprintln!("notice: {n}");
            }
        }
        Command::ChainBench { n, gamma, out } => {
            let report = run_chain_bench(n, gamma, out.as_deref())?;
            print!("{}", render(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
