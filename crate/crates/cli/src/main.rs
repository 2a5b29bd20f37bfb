use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mkdv_ist::campaign::{self, CampaignReport};
use mkdv_ist::config::ExperimentConfig;
use mkdv_ist::io;
use mkdv_ist::Error;

/// Validation campaigns for numerical inverse scattering of defocusing mKdV.
///
/// Exit status: 0 when every verdict passes, 2 when some are inconclusive,
/// 1 on any failure or error.
#[derive(Debug, Parser)]
#[command(name = "mkdv-lab", version)]
struct Cli {
    /// TOML experiment configuration; defaults apply to anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding the configuration's.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for the job pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for the random-input audits.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Direct scattering of the configured datum; writes the coefficient cache.
    Scatter,
    /// Direct then inverse map at three spectral resolutions.
    Roundtrip,
    /// Oracle runs: free-flow consistency, conservation and temporal order.
    Evolve,
    /// Decay and region-by-region comparison with the long-time formulas.
    Asymptotics,
    /// Perturbed coefficient flow: kernel decay, Cauchy rate, cross-check.
    Perturbed,
    /// Projection identities, resolvent bound and a priori L² bounds.
    Audit,
}

fn run(cli: &Cli) -> mkdv_ist::Result<CampaignReport> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    let out = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(out)?;
    cfg.save(&out.join("config.toml"))?;
    io::write_plot_stub(out)?;
    let out = Some(out);
    match cli.command {
        Command::Scatter => campaign::scatter(&cfg, out),
        Command::Roundtrip => campaign::roundtrip(&cfg, out).map(|r| r.0),
        Command::Evolve => campaign::evolve(&cfg, out),
        Command::Asymptotics => campaign::asymptotics(&cfg, out),
        Command::Perturbed => campaign::perturbed(&cfg, out).map(|r| r.0),
        Command::Audit => campaign::audit(&cfg, out),
    }
}

fn hint(e: &Error) -> Option<&'static str> {
    Some(match e {
        Error::Gate(_) => "lower epsilon or start from a smaller datum so the flow stays inside the norm gates",
        Error::DecayGate { .. } => "widen grids.x_half_width; the datum does not decay inside the box",
        Error::Nyquist { .. } => "raise grids.z_points or shrink the (x, t) range",
        Error::Boundary { .. } | Error::Cfl { .. } => "widen the oracle box, add a sponge, or reduce dt",
        Error::RhoNotBelowOne { .. } => "reduce datum.amplitude",
        Error::AtPosition { source, .. } => return hint(source),
        _ => return None,
    })
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as "inconclusive".
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(rep) => {
            print!("{}", rep.render());
            ExitCode::from(rep.verdict.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(h) = hint(&e) {
                eprintln!("hint: {h}");
            }
            ExitCode::from(1)
        }
    }
}
