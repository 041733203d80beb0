//! Command line front end: subgroup graphs, censuses, samples and verification reports.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use amalgam::experiments::{
    graph_export, run_census, run_sample, run_density_report, run_walk_report, write_files, ExperimentConfig,
    ExperimentKind, Verdict,
};
use amalgam::forms::Kind;
use amalgam::{Error, Result};
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "amalgam", version, about = "Normal forms and stability experiments for amalgamated free products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fold the subgroup graphs and print them as DOT.
    Build(Common),
    /// Exact (n,k) census of every form kind.
    Census(Common),
    /// Draw random normal forms.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Form kind: ef, rf, cnf or crf.
        #[arg(long, default_value = "cnf")]
        form: String,
        /// Stop probability of the syllable walks.
        #[arg(long, default_value_t = 0.25)]
        s: f64,
    },
    /// Density decay report for unstable forms.
    #[command(name = "theorem-a")]
    DensityDecay(Common),
    /// Walk-weight decay and separator containment report.
    #[command(name = "theorem-b")]
    WalkDecay(Common),
    /// Check the spec file and the settings without running anything.
    Validate(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 6)]
    n_max: usize,
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long)]
    radius: Option<usize>,
}

impl Common {
    fn config(&self, kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.spec_path = Some(self.spec.clone());
        c.out = self.out.clone();
        c.seed = self.seed;
        c.n_max = self.n_max;
        c.k_max = self.k_max;
        c.samples = self.samples;
        c.radius = self.radius;
        c
    }
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Malformed(_) | Error::AlphabetMismatch(_) | Error::Precondition(_) | Error::Io(_) => {
            EXIT_CONFIG
        }
        Error::Guard(_) => EXIT_GUARD,
        Error::Inconclusive(_) => EXIT_INCONCLUSIVE,
        _ => EXIT_FAIL,
    }
}

fn parse_kind(s: &str) -> Result<Kind> {
    Kind::ALL
        .iter()
        .copied()
        .find(|k| k.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::Config(format!("unknown form kind {s:?}")))
}

fn emit(out: Option<&Path>, files: &[(String, String)]) -> Result<()> {
    match out {
        Some(dir) => {
            for p in write_files(dir, files)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            for (_, body) in files {
                print!("{body}");
            }
        }
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Validate(c) => {
            let cfg = c.config(ExperimentKind::Census);
            cfg.validate()?;
            let spec = cfg.load_spec()?;
            println!("ok {}", cfg.fingerprint(&spec));
            Ok(EXIT_OK)
        }
        Command::Build(c) => {
            let cfg = c.config(ExperimentKind::GraphExport);
            cfg.validate()?;
            let spec = cfg.load_spec()?;
            let files = graph_export(&spec);
            match &cfg.out {
                Some(_) => emit(cfg.out.as_deref(), &files)?,
                None => {
                    for (name, body) in files.iter().filter(|f| f.0.ends_with(".dot")) {
                        println!("// {name}");
                        print!("{body}");
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Census(c) => {
            let cfg = c.config(ExperimentKind::Census);
            let spec = cfg.load_spec()?;
            let out = run_census(&cfg, &spec)?;
            emit(cfg.out.as_deref(), &out.files())?;
            Ok(EXIT_OK)
        }
        Command::Sample { common, form, s } => {
            let cfg = common.config(ExperimentKind::SampleSweep);
            cfg.validate()?;
            let kind = parse_kind(&form)?;
            let spec = cfg.load_spec()?;
            let dump = run_sample(&cfg, &spec, kind, s)?;
            emit(cfg.out.as_deref(), &[(format!("samples_{}.txt", kind.name()), dump)])?;
            Ok(EXIT_OK)
        }
        Command::DensityDecay(c) => {
            let cfg = c.config(ExperimentKind::DensityDecay);
            cfg.validate()?;
            let spec = cfg.load_spec()?;
            let report = run_density_report(&cfg, &spec)?;
            match &cfg.out {
                Some(_) => emit(cfg.out.as_deref(), &report.files())?,
                None => print!("{}", report.render()),
            }
            Ok(if report.pass() { EXIT_OK } else { EXIT_FAIL })
        }
        Command::WalkDecay(c) => {
            let cfg = c.config(ExperimentKind::WalkDecay);
            cfg.validate()?;
            let spec = cfg.load_spec()?;
            let report = run_walk_report(&cfg, &spec)?;
            emit(cfg.out.as_deref(), &[("walk_report.txt".into(), report.render())])?;
            Ok(match report.verdict {
                Verdict::Pass => EXIT_OK,
                Verdict::Fail => EXIT_FAIL,
                Verdict::Inconclusive => EXIT_INCONCLUSIVE,
            })
        }
    }
}

/// Parses `args` (program name first) and runs the command, returning the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
