use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ymaxial_cli::{render, run, CliError, Command, Format, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Flags override the corresponding fields of the --config file.
#[derive(Debug, Parser)]
#[command(name = "ymaxial", version, about = "Axial-gauge Yang-Mills numerics: areas, area laws, Wilson-loop Monte Carlo, grid holonomy")]
struct Args {
    /// JSON RunConfig file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// area | abelian | limit | potential | mc | grid-check | holonomy | duality
    #[arg(long)]
    command: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated κ values.
    #[arg(long, value_delimiter = ',')]
    kappa: Option<Vec<f64>>,
    #[arg(long)]
    cutoff: Option<u32>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    ode_steps: Option<usize>,
    /// Worker threads; default is every available core.
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Turn resolution warnings into exit code 3.
    #[arg(long)]
    strict: bool,
}

fn build_config(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_json_str(&fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &args.command {
        cfg.command = Some(Command::parse(c)?);
    }
    if let Some(v) = args.seed {
        cfg.seed = Some(v);
    }
    if let Some(v) = &args.kappa {
        cfg.kappa = v.clone();
    }
    if let Some(v) = args.cutoff {
        cfg.cutoff = v;
    }
    if let Some(v) = args.resolution {
        cfg.resolution = v;
    }
    if let Some(v) = args.samples {
        cfg.samples = v;
    }
    if let Some(v) = args.ode_steps {
        cfg.ode_steps = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = Some(v);
    }
    if let Some(v) = &args.out {
        cfg.out = Some(v.clone());
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    cfg.strict |= args.strict;
    Ok(cfg)
}

fn main_inner() -> Result<(), CliError> {
    let args = Args::try_parse().map_err(|e| {
        let _ = e.print();
        CliError::Config("bad command line".into())
    })?;
    let cfg = build_config(&args)?;
    let out = run(&cfg)?;
    let text = render(&out, &cfg)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    match &cfg.out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ymaxial: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
