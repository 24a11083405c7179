use std::path::PathBuf;
use std::process::ExitCode;

use axibouss_core::diagnostics::decay_fit;
use axibouss_lab::csvio::{self, num};
use axibouss_lab::{estimates, scenario, selfcheck, LabError, EXIT_GATE, EXIT_PASS, EXIT_USAGE};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "axibouss",
    version,
    about = "Axisymmetric Boussinesq lab with measure initial data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario config and check its gates.
    Run { config: PathBuf },
    /// Sweep semigroup and Biot-Savart estimates.
    VerifyEstimates { config: PathBuf },
    /// Check the S1 kernel against its PDE and its small-time mass.
    KernelsSelfcheck,
    /// Fit a power law to the `t,value` columns of a CSV file.
    DecayFit {
        csv: PathBuf,
        /// Leading rows to ignore.
        #[arg(long, default_value_t = 0)]
        skip: usize,
    },
}

fn run(cmd: Cmd) -> Result<i32, LabError> {
    match cmd {
        Cmd::Run { config } => {
            let out = scenario::run_scenario(&config)?;
            for g in &out.gates {
                println!("{}", g.line());
            }
            for n in &out.notes {
                println!("note: {n}");
            }
            Ok(out.exit_code())
        }
        Cmd::VerifyEstimates { config } => {
            let (reports, code) = estimates::verify_estimates(&config)?;
            for rep in &reports {
                for s in &rep.summaries {
                    println!(
                        "{} {:?} case {}: power {} fitted {} max constant {}{}",
                        rep.kind.label(),
                        rep.kind.parameters(),
                        s.case,
                        num(rep.kind.power()),
                        num(s.fitted_power),
                        num(s.max_ratio),
                        if s.flagged { " FLAGGED" } else { "" }
                    );
                }
            }
            Ok(code)
        }
        Cmd::KernelsSelfcheck => {
            let c = selfcheck::run_selfcheck()?;
            for (n, r) in &c.residuals {
                println!("residual n={n}: {}", num(*r));
            }
            for h in &c.halvings {
                println!("halving ratio: {}", num(*h));
            }
            for (t, m) in &c.masses {
                println!("mass t={t}: {}", num(*m));
            }
            println!("{}", if c.passed() { "PASS" } else { "FAIL" });
            Ok(if c.passed() { EXIT_PASS } else { EXIT_GATE })
        }
        Cmd::DecayFit { csv, skip } => {
            let (t, v) = csvio::read_series(&csv)?;
            let skip = skip.min(t.len());
            let fit = decay_fit(&t[skip..], &v[skip..]).map_err(|e| LabError::Data(e.to_string()))?;
            println!("slope {}", num(fit.slope));
            println!("intercept {}", num(fit.intercept));
            println!("r_squared {}", num(fit.r_squared));
            println!("points {}", fit.times.len());
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.cmd) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    debug_assert!([EXIT_PASS, EXIT_GATE, EXIT_USAGE].contains(&code));
    ExitCode::from(code as u8)
}
