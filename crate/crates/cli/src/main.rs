use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use copolymer::Exec;
use copolymer_cli::commands::{self, COMMANDS};
use copolymer_cli::config::{Format, RunConfig};
use copolymer_cli::{selftest, CliError};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Annealed,
    QuenchedFe,
    SOfG,
    CriticalCurve,
    Bounds,
    Slope,
    Paths,
    Selftest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Copolymer near a selective interface: phase diagrams, bounds, slope
/// constants and path statistics.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    command: Command,
    /// Key-value or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed; required without --config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn name(c: Command) -> &'static str {
    match c {
        Command::Annealed => COMMANDS[0],
        Command::QuenchedFe => COMMANDS[1],
        Command::SOfG => COMMANDS[2],
        Command::CriticalCurve => COMMANDS[3],
        Command::Bounds => COMMANDS[4],
        Command::Slope => COMMANDS[5],
        Command::Paths => COMMANDS[6],
        Command::Selftest => COMMANDS[7],
    }
}

fn config(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match (&args.config, args.seed) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(seed)) => RunConfig::with_seed(seed),
        (None, None) => return Err(CliError::Config("a seed is required (--seed or a config file)".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(f) = args.format {
        cfg.output.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    Ok(cfg)
}

fn run(args: &Args) -> Result<bool, CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = config(args)?;
    let law = cfg.validate()?;
    let exec = Exec::Parallel;
    let command = name(args.command);
    let (dir, format) = (&cfg.output.dir, cfg.output.format);
    let mut ok = true;
    let mut written = Vec::new();
    match args.command {
        Command::Annealed => written.push(commands::annealed(&cfg, &law)?.write(dir, command, command, format)?),
        Command::QuenchedFe => {
            written.push(commands::quenched_fe(&cfg, &law, exec)?.write(dir, command, command, format)?)
        }
        Command::SOfG => written.push(commands::s_of_g(&cfg, &law, exec)?.write(dir, command, command, format)?),
        Command::CriticalCurve => {
            written.push(commands::critical_curve(&cfg, &law, exec)?.write(dir, command, command, format)?)
        }
        Command::Bounds => written.push(commands::bounds(&cfg, &law)?.write(dir, command, command, format)?),
        Command::Slope => written.push(commands::slope(&cfg, &law)?.write(dir, command, command, format)?),
        Command::Paths => {
            let (summary, samples) = commands::paths(&cfg, &law, exec)?;
            written.push(summary.write(dir, command, command, format)?);
            written.push(samples.write(dir, "paths_samples", command, format)?);
        }
        Command::Selftest => {
            let (table, pass) = selftest::run()?;
            let (s, c, v, l, p) = (0, 1, 2, 3, 4);
            for row in &table.rows {
                let text = |i: usize| match &row[i] {
                    copolymer_cli::output::Cell::Text(t) => t.clone(),
                    copolymer_cli::output::Cell::Num(x) => copolymer_cli::output::fmt_g(*x),
                    copolymer_cli::output::Cell::Int(k) => k.to_string(),
                };
                let mark = if text(p) == "true" { "PASS" } else { "FAIL" };
                println!("{mark} [{}] {}: {} (limit {})", text(s), text(c), text(v), text(l));
            }
            ok = pass;
            written.push(table.write(dir, command, command, format)?);
        }
    }
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("selftest: some checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
