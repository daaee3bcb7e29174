//! `specsolve` runs convergence, sampling and localization studies from a
//! JSON experiment config and writes CSV tables, field files and JSON summaries.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use specsolve::config::{ExperimentConfig, StudyKind};
use specsolve::output::Sink;
use specsolve::studies;
use specsolve_core::Error;

#[derive(Parser)]
#[command(name = "specsolve", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic eigenpairs: FEM against MsFEM over coarse levels.
    SolveEvp(Common),
    /// Expectations of the eigenvalues with the configured pipeline.
    Uq(Common),
    /// Expectation errors against FEM over coarse levels.
    HStudy(Common),
    /// Truncation dimension study.
    SStudy(Common),
    /// Sample-count study, qMC against MC.
    NStudy(Common),
    /// Offline snapshot count study for MsFEM-POD.
    QStudy(Common),
    /// One realization with eigenfunction fields and participation ratios.
    Localization(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config, default `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "SPECSOLVE_THREADS")]
    threads: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(self) -> (StudyKind, Common) {
        match self {
            Command::SolveEvp(c) => (StudyKind::SolveEvp, c),
            Command::Uq(c) => (StudyKind::Uq, c),
            Command::HStudy(c) => (StudyKind::HStudy, c),
            Command::SStudy(c) => (StudyKind::SStudy, c),
            Command::NStudy(c) => (StudyKind::NStudy, c),
            Command::QStudy(c) => (StudyKind::QStudy, c),
            Command::Localization(c) => (StudyKind::Localization, c),
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ADMISSIBILITY: u8 = 4;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (kind, args) = Cli::parse().command.split();

    let mut exp = match ExperimentConfig::load(&args.config) {
        Ok(e) => e,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Some(seed) = args.seed {
        exp.uq.seed = seed;
    }
    if let Err(e) = exp.check(kind) {
        return fail(EXIT_CONFIG, e);
    }
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(EXIT_CONFIG, format!("cannot set {n} threads: {e}"));
        }
    }
    let dir = args.out.or(exp.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut sink = match Sink::create(&dir, exp.emit.csv, exp.emit.fields, exp.emit.json_summary) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, format!("output directory {} is not writable: {e}", dir.display())),
    };

    match studies::run(kind, &exp, &mut sink) {
        Ok(()) => {
            for p in sink.written() {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = match e.downcast_ref::<Error>() {
                Some(Error::Admissibility(_)) => EXIT_ADMISSIBILITY,
                _ => EXIT_NUMERICAL,
            };
            fail(code, format!("{e:#}"))
        }
    }
}
