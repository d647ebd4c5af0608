use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use morse_link::linktheory::CircleConfig;
use morse_link::Error;
use morse_link_cli::{beta_csv, beta_rows, export, oracle_report, report_json, run_verify, write_reports, RunConfig, Suite};

#[derive(Parser)]
#[command(name = "morselink", version, about = "Morse complexes, boundary depth and linking checks on model manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write one JSON report per check.
    Verify(RunArgs),
    /// Print the per-degree separation table as CSV.
    Beta(RunArgs),
    /// Write complexes, trajectories and witness chains to --out.
    Export(RunArgs),
    /// Compare the exact circle oracle with the flow pipeline.
    Oracle {
        /// Circle configuration (TOML).
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML file with the same fields as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// circle-a, circle-random, torus-c, sphere-b or round-sphere.
    #[arg(long)]
    model: Option<String>,
    /// Z, Q, Z2 or Zp:<p>.
    #[arg(long)]
    ring: Option<String>,
    #[arg(long = "degree")]
    degrees: Vec<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "suite", value_enum)]
    suites: Vec<Suite>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of circle-random.
    #[arg(long)]
    model_seed: Option<u64>,
    /// Number of maxima of circle-random.
    #[arg(long)]
    maxima: Option<usize>,
    #[arg(long)]
    random_pairs: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        if let Some(r) = &self.ring {
            cfg.ring = r.clone();
        }
        if !self.degrees.is_empty() {
            cfg.degrees = self.degrees.clone();
        }
        if self.tol.is_some() {
            cfg.tol = self.tol;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.suites.is_empty() {
            cfg.suites = self.suites.clone();
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if let Some(s) = self.model_seed {
            cfg.params.seed = s;
        }
        if let Some(m) = self.maxima {
            cfg.params.m = m;
        }
        if let Some(p) = self.random_pairs {
            cfg.random_pairs = p;
        }
        Ok(cfg)
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error[{}]: {e}", e.code());
    ExitCode::from(2)
}

fn verify(cfg: &RunConfig) -> Result<ExitCode, Error> {
    let reports = run_verify(cfg)?;
    if let Some(dir) = &cfg.out {
        write_reports(dir, &reports)?;
    }
    for r in &reports {
        let k = r.k.map(|k| format!(" k={k}")).unwrap_or_default();
        println!("{} {} {}{k} residual={}", r.status.to_uppercase(), r.theorem, r.fixture, r.residual);
    }
    println!("{} reports", reports.len());
    match reports.iter().find(|r| !r.passed()) {
        Some(r) => {
            eprintln!("first failing report: {}", r.theorem);
            eprint!("{}", report_json(r));
            Ok(ExitCode::from(1))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Verify(args) => verify(&args.resolve()?),
        Command::Beta(args) => {
            let cfg = args.resolve()?;
            let csv = beta_csv(&beta_rows(&cfg)?)?;
            if let Some(dir) = &cfg.out {
                std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("beta.csv"), &csv)).map_err(|e| Error::Parse(format!("io: {e}")))?;
            }
            print!("{csv}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Export(args) => {
            let cfg = args.resolve()?;
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("export"));
            for path in export(&cfg, &dir)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { config, seed } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Parse(format!("{}: {e}", config.display())))?;
            let r = oracle_report(&CircleConfig::from_toml(&text)?, seed)?;
            print!("{}", report_json(&r));
            Ok(if r.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}
