//! Command-line experiment runner.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::datasets::NoiseSemantics;
use crate::error::{Error, Result};
use crate::sim::{aggregate_runs, kn_sweep, run_seeds, Algorithm, Domain, ExperimentConfig};

pub use output::{
    DiagnosticsRow, ExposureRow, KernelRow, Manifest, RegretRow, Summary, SweepRow, Table1Row, OUT_DIR_ENV,
};

pub const PAPER_SCALE_EPISODES: u64 = 10_000;
pub const PAPER_SCALE_HORIZON: u32 = 200;

#[derive(Debug, Parser)]
#[command(name = "fair-rmab", version, about = "Merit-fair online restless bandit experiments")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration over every seed, or a K/N sweep.
    Run(RunArgs),
    /// Measure t0 and G over a grid of (N, K) for each domain.
    Table1(Table1Args),
    /// Write the true transition kernels a seed generates.
    Kernels(KernelArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML file with flat keys named after the config fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_domain)]
    pub domain: Option<Domain>,
    #[arg(long = "arms")]
    pub num_arms: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub episodes: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Use seeds 0..N.
    #[arg(long, conflicts_with = "seed_list")]
    pub seeds: Option<u64>,
    /// Explicit comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "algo", value_parser = parse_algorithm)]
    pub algorithm: Option<Algorithm>,
    /// Keep arm states across episodes instead of redrawing them.
    #[arg(long)]
    pub carry_over: bool,
    #[arg(long, value_parser = parse_noise)]
    pub noise_semantics: Option<NoiseSemantics>,
    /// T = 10000 episodes of H = 200 steps (explicit --episodes/--horizon win).
    #[arg(long)]
    pub paper_scale: bool,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for seed-level parallelism (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Comma-separated K/N ratios; writes sweep.csv instead of per-run files.
    #[arg(long, value_delimiter = ',')]
    pub sweep_kn: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct Table1Args {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Comma-separated N:K cells.
    #[arg(long, value_delimiter = ',', default_value = "5:1,10:2,20:4")]
    pub grid: Vec<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_domain,
          default_value = "synthetic,synthetic-alternate,cpap")]
    pub domains: Vec<Domain>,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

fn parse_domain(s: &str) -> std::result::Result<Domain, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_noise(s: &str) -> std::result::Result<NoiseSemantics, String> {
    match s {
        "std" => Ok(NoiseSemantics::Std),
        "variance" => Ok(NoiseSemantics::Variance),
        other => Err(format!("unknown noise semantics '{other}' (std | variance)")),
    }
}

impl ConfigArgs {
    /// Defaults, then the config file, then `--paper-scale`, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::default(),
        };
        if self.paper_scale {
            cfg.episodes = PAPER_SCALE_EPISODES;
            cfg.horizon = PAPER_SCALE_HORIZON;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(domain, num_arms, budget, episodes, horizon, c, delta, epsilon, algorithm);
        if let Some(n) = self.noise_semantics {
            cfg.cpap_noise_semantics = n;
        }
        if let Some(n) = self.seeds {
            cfg.seeds = (0..n).collect();
        }
        if let Some(list) = &self.seed_list {
            cfg.seeds = list.clone();
        }
        if self.carry_over {
            cfg.carry_over_state = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))
}

pub fn config_to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes to TOML")
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvariantViolation(_) => 3,
        Error::Io(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Run(args) => run(args),
        Command::Table1(args) => table1(args),
        Command::Kernels(args) => kernels(args),
    }
}

fn print_config(cfg: &ExperimentConfig) {
    print!("{}", config_to_toml(cfg));
}

pub fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    if args.config.print_config {
        print_config(&cfg);
        return Ok(());
    }
    let dir = args.output.out.join(cfg.config_hash());
    std::fs::create_dir_all(&dir)?;

    if let Some(ratios) = &args.sweep_kn {
        let points = kn_sweep(&cfg, ratios, args.output.workers)?;
        let path = dir.join("sweep.csv");
        output::write_rows(&path, points.iter().map(SweepRow::from))?;
        output::append_manifest(&args.output.out, &Manifest::new("sweep", &cfg, vec![path]))?;
        println!("{}", dir.display());
        return Ok(());
    }

    let records = run_seeds(&cfg, args.output.workers)?;
    let aggregate = aggregate_runs(&records)?;
    let paths = output::write_run(&dir, &cfg, &records, &aggregate)?;
    output::append_manifest(&args.output.out, &Manifest::new("run", &cfg, paths))?;
    log::info!(
        "FR^T = {:.3} +- {:.3}, t0 = {:.1}, G = {:?}",
        aggregate.final_fr_mean,
        aggregate.final_fr_std,
        aggregate.t0_mean,
        aggregate.g_mean
    );
    println!("{}", dir.display());
    Ok(())
}

/// Parses `N:K`.
pub fn parse_cell(cell: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidConfig(format!("grid cell '{cell}' is not N:K"));
    let (n, k) = cell.split_once(':').ok_or_else(bad)?;
    Ok((n.trim().parse().map_err(|_| bad())?, k.trim().parse().map_err(|_| bad())?))
}

pub fn table1(args: &Table1Args) -> Result<()> {
    let base = ExperimentConfig {
        algorithm: Algorithm::MfRmab,
        ..args.config.resolve()?
    };
    let cells = args.grid.iter().map(|c| parse_cell(c)).collect::<Result<Vec<_>>>()?;
    let mut configs = Vec::new();
    for &domain in &args.domains {
        for &(num_arms, budget) in &cells {
            let cfg = ExperimentConfig {
                domain,
                num_arms,
                budget,
                ..base.clone()
            };
            cfg.validate()?;
            configs.push(cfg);
        }
    }
    if args.config.print_config {
        print_config(&base);
        return Ok(());
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let records = run_seeds(cfg, args.output.workers)?;
        let agg = aggregate_runs(&records)?;
        log::info!(
            "{:?} N={} K={}: G = {:?}, t0 = {:.1}",
            cfg.domain,
            cfg.num_arms,
            cfg.budget,
            agg.g_mean,
            agg.t0_mean
        );
        rows.push(Table1Row::new(cfg, &agg));
    }
    let dir = args.output.out.join(base.config_hash());
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("table1.csv");
    output::write_rows(&path, rows)?;
    output::append_manifest(&args.output.out, &Manifest::new("table1", &base, vec![path]))?;
    println!("{}", dir.display());
    Ok(())
}

pub fn kernels(args: &KernelArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    if args.config.print_config {
        print_config(&cfg);
        return Ok(());
    }
    let dir = args.out.join(cfg.config_hash());
    std::fs::create_dir_all(&dir)?;
    let mut paths = Vec::new();
    for &seed in &cfg.seeds {
        let path = dir.join(format!("kernels-{seed}.csv"));
        output::write_rows(&path, KernelRow::table(&cfg.population(seed)?))?;
        paths.push(path);
    }
    output::append_manifest(&args.out, &Manifest::new("kernels", &cfg, paths))?;
    println!("{}", dir.display());
    Ok(())
}
