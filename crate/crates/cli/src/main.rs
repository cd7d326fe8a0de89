use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riwm::output::{run_to_dir, sweep_to_dir, write_report, write_theory_curve};
use riwm::verify::{bound_battery, purity_battery, render_report, PURITY_COUPLINGS};
use riwm::{ExperimentConfig, Overrides, Result};

#[derive(Parser)]
#[command(name = "riwm", version, about = "Weak-measurement test of the relativistic-independence bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Six-acquisition protocol at a single mismatch angle.
    Run(Common),
    /// Protocol at every configured mismatch angle, plus theory curves.
    Sweep(Common),
    /// Bound-chain and purity-expansion verification batteries.
    Verify(Common),
    /// Closed-form theory curves only.
    Theory(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mismatch angle in radians; repeat to set the sweep list.
    #[arg(long, allow_hyphen_values = true)]
    delta: Vec<f64>,
    /// Events per acquisition.
    #[arg(long)]
    events: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    visibility: Option<f64>,
    /// Coupling strength for all four couplings, in units of the pointer width.
    #[arg(long)]
    g_over_sigma: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random states in the verification battery.
    #[arg(long)]
    states: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let overrides = Overrides {
            deltas: (!self.delta.is_empty()).then(|| self.delta.clone()),
            events: self.events,
            seed: self.seed,
            visibility: self.visibility,
            g_over_sigma: self.g_over_sigma,
            out: self.out.clone(),
            verify_states: self.states,
        };
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let delta = cfg.deltas[0];
            let (p, files) = run_to_dir(&cfg, delta)?;
            let r = p.record();
            println!("delta = {delta}");
            println!("B     = {:.4} ± {:.4}  (theory {:.4})", r.B, r.sigma_B, p.theory.B_theory);
            println!("Delta = {:.4} ± {:.4}  (theory {:.4})", r.Delta, r.sigma_Delta, p.theory.Delta_theory);
            println!("RI    = {:.4} ± {:.4}  (theory {:.4})", r.RI, r.sigma_RI, p.theory.RI_theory);
            println!("wrote {} files to {}", files.len(), cfg.out.display());
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let (rows, files) = sweep_to_dir(&cfg)?;
            println!("{:>9} {:>16} {:>16} {:>16} {:>9}", "delta", "B", "Delta", "RI", "RI_theory");
            for row in &rows {
                let (e, t) = (&row.point.estimates, &row.point.theory);
                println!(
                    "{:>9.4} {:>8.4} ± {:<5.3} {:>8.4} ± {:<5.3} {:>8.4} ± {:<5.3} {:>9.4}",
                    e.delta, e.B, e.sigma_B, e.Delta, e.sigma_Delta, e.RI, e.sigma_RI, t.RI_theory
                );
            }
            println!("wrote {} files to {}", files.len(), cfg.out.display());
        }
        Command::Verify(c) => {
            let cfg = c.load()?;
            let bounds = bound_battery(cfg.verify_states, cfg.seed)?;
            let purity = purity_battery(&PURITY_COUPLINGS)?;
            let text = render_report(cfg.seed, &bounds, &purity);
            print!("{text}");
            let path = write_report(&cfg, &text)?;
            println!("wrote {}", path.display());
            return Ok(bounds.passed() && purity.passed());
        }
        Command::Theory(c) => {
            let cfg = c.load()?;
            let path = write_theory_curve(&cfg)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
