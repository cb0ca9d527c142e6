use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ifepic::driver::{self, run_scaling_suite, run_simulation, SimulationConfig};
use ifepic::oracle::{oml_sheath_profile, ManufacturedSphere, OmlParameters};
use ifepic::{Error, Result};

/// Environment variable that replaces `[output] directory` from the config.
const OUTPUT_DIR_ENV: &str = "IFEPIC_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "ifepic",
    version,
    about = "Electrostatic IFE-PIC simulator with overlapping Schwarz field solves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Strong-scaling runs of one configuration.
    Scale {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated list such as `1x1x1,2x2x2,2x2x4`.
        #[arg(long, value_delimiter = ',', value_parser = parse_decomp)]
        decomps: Vec<[usize; 3]>,
    },
    /// Write reference profiles: the OML sheath and the manufactured sphere.
    Oracle {
        #[arg(long, default_value = "oracle")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.401)]
        radius_debye: f64,
        /// Ion to electron temperature ratio.
        #[arg(long, default_value_t = 1.0)]
        temperature_ratio: f64,
        #[arg(long, default_value_t = 1836.0)]
        mass_ratio: f64,
        #[arg(long, default_value_t = 5.0)]
        r_max_debye: f64,
        /// Permittivity inside the manufactured sphere.
        #[arg(long, default_value_t = 4.0)]
        permittivity: f64,
        #[arg(long, default_value_t = 0.0)]
        surface_charge: f64,
    },
}

fn parse_decomp(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .trim()
        .split('x')
        .map(|t| t.parse::<usize>().map_err(|e| format!("{s}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok([a, b, c]),
        _ => Err(format!("{s}: expected NXxNYxNZ with positive counts")),
    }
}

fn load_config(path: &PathBuf) -> Result<SimulationConfig> {
    let mut cfg = SimulationConfig::load(path)?;
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        cfg.output.directory = PathBuf::from(dir);
    }
    Ok(cfg)
}

fn oracle(
    out: &PathBuf,
    radius: f64,
    tau: f64,
    mu: f64,
    r_max: f64,
    eps: f64,
    sigma: f64,
) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let oml = oml_sheath_profile(&OmlParameters::new(radius, tau, mu, r_max))?;
    driver::output::write_text(&out.join("oml_profile.csv"), &oml.to_csv())?;
    let ms = ManufacturedSphere::new([0.0; 3], radius, eps, 1.0).with_surface_charge(sigma);
    let mut s = String::from("r,phi\n");
    let n = 200;
    for k in 0..=n {
        let r = r_max * k as f64 / n as f64;
        s.push_str(&format!("{r:.6e},{:.9e}\n", ms.phi([r, 0.0, 0.0])));
    }
    driver::output::write_text(&out.join("manufactured_profile.csv"), &s)?;
    println!(
        "OML surface potential {:.4} (residual {:.2e}); wrote {}",
        oml.surface_potential,
        oml.residual,
        out.display()
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let summary = run_simulation(cfg)?;
            print!("{}", summary.to_text());
            println!("{}", summary.timers.to_table());
        }
        Command::Scale { config, decomps } => {
            if decomps.is_empty() {
                return Err(Error::Config("--decomps needs at least one entry".into()));
            }
            let cfg = load_config(&config)?;
            for r in run_scaling_suite(&cfg, &decomps)? {
                println!(
                    "{}x{}x{}  workers {:>3}  {:>10.3} s  S {:>6.3}  E {:>6.1}%{}",
                    r.decomposition[0],
                    r.decomposition[1],
                    r.decomposition[2],
                    r.workers,
                    r.total_seconds,
                    r.speedup,
                    r.efficiency_percent,
                    if r.reliable { "" } else { "  (oversubscribed)" }
                );
            }
        }
        Command::Oracle {
            out,
            radius_debye,
            temperature_ratio,
            mass_ratio,
            r_max_debye,
            permittivity,
            surface_charge,
        } => oracle(
            &out,
            radius_debye,
            temperature_ratio,
            mass_ratio,
            r_max_debye,
            permittivity,
            surface_charge,
        )?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
