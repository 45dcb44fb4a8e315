use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stfs_sim::codebook::{
    gen_random_codebook, gen_unitary_codebook_with, optimize_codebook, Codebook, Construction, Criterion,
    ScoreContext, UnitarySource,
};
use stfs_sim::modem::{Constellation, ModulationKind};
use stfs_sim::rng::{substream, tag, SimRng};
use stfs_sim::{emit_results, preset, run_experiment, run_experiment_with_workers, Error, OutputFormat, SystemConfig};

#[derive(Parser)]
#[command(name = "stfsim", version, about = "Space-time-frequency spreading link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its result table.
    Run(RunArgs),
    /// Generate or optimize a dispersion-vector codebook.
    #[command(subcommand)]
    Codebook(CodebookCommand),
    /// Check a configuration file against the system constraints.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// fig3, fig4, fig5, fig6 or fig7
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory; the table is printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CodebookArgs {
    #[arg(long)]
    q: usize,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CodebookCommand {
    Gen {
        #[command(flatten)]
        common: CodebookArgs,
        #[arg(long, value_parser = parse_construction, default_value = "random_gaussian")]
        construction: Construction,
        #[arg(long, value_parser = parse_source, default_value = "dft")]
        source: UnitarySource,
    },
    Optimize {
        #[command(flatten)]
        common: CodebookArgs,
        #[arg(long, value_parser = parse_criterion, default_value = "max_min_distance")]
        criterion: Criterion,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        /// PSK order of the design constellation.
        #[arg(long, default_value_t = 4)]
        order: usize,
        /// Linear SINR for the error-probability and capacity criteria.
        #[arg(long, default_value_t = 10.0)]
        sinr: f64,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn parse_construction(s: &str) -> Result<Construction, String> {
    parse_enum(s)
}

fn parse_source(s: &str) -> Result<UnitarySource, String> {
    parse_enum(s)
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    parse_enum(s)
}

fn run(args: RunArgs) -> stfs_sim::Result<()> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => SystemConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = Some(seed);
    }
    if let Some(trials) = args.trials {
        cfg.n_trials = trials;
    }
    cfg.validate()?;
    let table = match args.workers {
        Some(w) => run_experiment_with_workers(&cfg, w)?,
        None => run_experiment(&cfg)?,
    };
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            let path = dir.join(format!("results.{}", args.format.extension()));
            emit_results(&table, args.format, &path)?;
            eprintln!("wrote {} rows to {}", table.len(), path.display());
        }
        None => print!("{}", table.render(args.format)?),
    }
    Ok(())
}

fn write_codebook(cb: &Codebook, out: &Option<PathBuf>) -> stfs_sim::Result<()> {
    match out {
        Some(path) => cb.save(path),
        None => {
            print!("{}", cb.to_text());
            Ok(())
        }
    }
}

fn codebook(cmd: CodebookCommand) -> stfs_sim::Result<()> {
    match cmd {
        CodebookCommand::Gen { common, construction, source } => {
            let mut rng = substream(common.seed, &[tag::CODEBOOK]);
            let mut cb = match construction {
                Construction::RandomGaussian => gen_random_codebook(common.q, common.t, &mut rng)?,
                Construction::Unitary => gen_unitary_codebook_with(common.q, common.t, source, &mut rng)?,
            };
            cb.seed = Some(common.seed);
            write_codebook(&cb, &common.out)
        }
        CodebookCommand::Optimize { common, criterion, budget, order, sinr } => {
            let constellation = Constellation::new(ModulationKind::Psk, order)?;
            let ctx = ScoreContext { constellation: &constellation, sinr };
            let mut rng = substream(common.seed, &[tag::CODEBOOK]);
            let (q, t) = (common.q, common.t);
            let (mut cb, score) = optimize_codebook(
                |r: &mut SimRng| gen_random_codebook(q, t, r),
                criterion,
                &ctx,
                budget,
                &mut rng,
            )?;
            cb.seed = Some(common.seed);
            eprintln!("best {} score: {score}", criterion.name());
            write_codebook(&cb, &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Codebook(cmd) => codebook(cmd),
        Command::Validate { config } => SystemConfig::load(&config).map(|_| println!("{}: ok", config.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
