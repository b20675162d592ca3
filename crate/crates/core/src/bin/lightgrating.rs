use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lightgrating::config::{load_config, SimulationConfig, OUT_DIR_ENV};
use lightgrating::grating::GratingBeam;
use lightgrating::run::{exit_code, run_compare, run_orders, run_power_scan, run_simulate};
use lightgrating::units::{absorption_cross_section, catalog, de_broglie_wavelength, CONSTANTS};
use lightgrating::Result;

#[derive(Parser)]
#[command(
    name = "lightgrating",
    version,
    about = "Matter-wave diffraction at a standing light wave"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble diffraction pattern: writes the pattern CSV and a JSON summary.
    Simulate {
        config: PathBuf,
        /// Override the output directory (also settable via LIGHTGRATING_OUT_DIR).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Order spectrum and absorption statistics only.
    Orders {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// One simulation per laser power (W).
    Scan {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        powers: Vec<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Align two pattern CSV files and report shift and residual.
    Compare { a: PathBuf, b: PathBuf },
    /// Physical constants and the species catalog.
    Constants,
}

fn load(path: &Path, out_dir: Option<PathBuf>) -> Result<SimulationConfig> {
    let mut cfg = load_config(path)?;
    if let Some(dir) = out_dir {
        if std::env::var_os(OUT_DIR_ENV).is_none() {
            cfg.run.output_dir = std::env::current_dir()?.join(dir);
        }
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out_dir } => {
            let cfg = load(&config, out_dir)?;
            let (_, summary, files) = run_simulate(&cfg)?;
            println!("species        {}", summary.species);
            println!("power          {} W", summary.power_w);
            println!(
                "phi            {:.6} + {:.6}i",
                summary.phi.re, summary.phi.im
            );
            println!("mean photons   {:.6}", summary.mean_photon_number);
            println!("order spacing  {:.3} um", summary.order_spacing_um);
            for (j, e) in summary
                .order_efficiencies
                .iter()
                .filter(|(j, _)| j.abs() <= 3)
            {
                println!("efficiency {j:+}  {e:.4}");
            }
            println!("visibility     {:.4}", summary.visibility);
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {}", files.pattern_csv.display());
            println!("wrote {}", files.summary_json.display());
        }
        Command::Orders { config, out_dir } => {
            let cfg = load(&config, out_dir)?;
            let (report, path) = run_orders(&cfg)?;
            println!(
                "phi {:.6} + {:.6}i, mean photons {:.6}",
                report.phi.re, report.phi.im, report.mean_photon_number
            );
            println!("{:>4}  {:>14}", "m", "intensity");
            for (m, v) in report.order_spectrum.orders().filter(|(_, v)| *v > 1e-6) {
                println!("{m:>4}  {v:>14.8}");
            }
            for (n, f) in report
                .absorbed_fractions
                .iter()
                .enumerate()
                .filter(|(_, f)| **f > 1e-6)
            {
                println!("absorbed {n} photon(s): {f:.6}");
            }
            println!("wrote {}", path.display());
        }
        Command::Scan {
            config,
            powers,
            out_dir,
        } => {
            let cfg = load(&config, out_dir)?;
            let scan = run_power_scan(&cfg, &powers)?;
            println!(
                "{:>10}  {:>10}  {:>10}  {:>8}  {:>8}",
                "power_w", "phi_re", "phi_im", "eff_0", "eff_1"
            );
            for p in &scan.points {
                let s = &p.summary;
                let eff = |j: i64| {
                    s.order_efficiencies
                        .iter()
                        .find(|e| e.0 == j)
                        .map(|e| e.1)
                        .unwrap_or(0.0)
                };
                println!(
                    "{:>10.4}  {:>10.5}  {:>10.5}  {:>8.4}  {:>8.4}",
                    p.power_w,
                    s.phi.re,
                    s.phi.im,
                    eff(0),
                    0.5 * (eff(1) + eff(-1))
                );
            }
            println!("wrote {}", scan.pattern_csv.display());
            println!("wrote {}", scan.table_csv.display());
            println!("wrote {}", scan.summary_json.display());
        }
        Command::Compare { a, b } => {
            let c = run_compare(&a, &b)?;
            println!("shift_um {:.6}", c.shift * 1e6);
            println!("nrmse {:.9}", c.nrmse);
        }
        Command::Constants => {
            let k = CONSTANTS;
            println!("hbar   {:e} J s", k.hbar);
            println!("h      {:e} J s", k.h);
            println!("c      {:e} m/s", k.c);
            println!("eps0   {:e} F/m", k.eps0);
            println!("amu    {:e} kg", k.amu);
            let beam = GratingBeam::argon_green(1.0);
            println!();
            println!(
                "{:<6} {:>8} {:>12} {:>12} {:>16} {:>14}",
                "name", "mass_u", "Re a [A^3]", "Im a [A^3]", "sigma [cm^2]", "lambda_dB(120)"
            );
            for s in catalog() {
                let sigma = absorption_cross_section(&s, beam.k_l()) * 1e4;
                let ldb = de_broglie_wavelength(&s, 120.0)?;
                println!(
                    "{:<6} {:>8} {:>12} {:>12} {:>16.4e} {:>11.3} pm",
                    s.name,
                    s.mass,
                    s.polarizability.real_volume,
                    s.polarizability.imag_volume,
                    sigma,
                    ldb * 1e12
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
