// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kirchhoff_cli::config::{ExperimentConfig, Mode, SweepSection};
use kirchhoff_cli::pipeline::{self, output_root, sweep_report, RunError, Setup};
use kirchhoff_cli::profile_doc::ProfileDocument;
use kirchhoff_cli::table::{read_table, write_table, SweepRow, TableMeta};
use kirchhoff_core::domain_potential::classify_wells;
use kirchhoff_core::{solve_ground_state, ShootingConfig};

#[derive(Parser)]
#[command(name = "kirchhoff", version, about = "Ground states of the mass-critical Kirchhoff problem")]
struct Cli {
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportMode {
    Inner,
    Boundary,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the ground-state profile and print it as JSON.
    Qprofile {
        #[arg(long = "dim")]
        dimension: usize,
        /// Relative tolerance of the ODE integrator.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Print the well classification of a configuration as JSON.
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Minimise at one value of `a` and print a CSV row.
    Minimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        a: f64,
    },
    /// Continuation sweep over `a`, printed as CSV. Flags override the config's sweep section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        a_from: Option<f64>,
        #[arg(long)]
        a_to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Space the values linearly instead of geometrically.
        #[arg(long)]
        linear: bool,
    },
    /// Trial-state energy at `a` against its asymptotic law, as JSON.
    Trial {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        a: f64,
    },
    /// Verification report for a sweep table: JSON on stdout, markdown to a file or stderr.
    Report {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, value_enum)]
        mode: ReportMode,
        #[arg(long)]
        markdown: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full pipeline; artifacts go under $KIRCHHOFF_OUT.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    ExperimentConfig::parse(&read(path)?).map_err(RunError::Schema)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| RunError::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn print_rows(config: &ExperimentConfig, rows: &[SweepRow]) -> Result<(), RunError> {
    let meta = TableMeta { config: config.clone() };
    let stdout = io::stdout();
    write_table(stdout.lock(), &meta, rows)?;
    Ok(())
}

fn execute(command: Command) -> Result<(), RunError> {
    match command {
        Command::Qprofile { dimension, tol } => {
            let mut cfg = ShootingConfig::default();
            if let Some(t) = tol {
                if !(t > 0.0) {
                    return Err(RunError::Io(format!("--tol must be positive, got {t}")));
                }
                cfg.rtol = t;
            }
            let profile = solve_ground_state(dimension, &cfg)?;
            print_json(&ProfileDocument::from(&profile))
        }
        Command::Classify { config } => {
            let config = load(&config)?;
            let profile = solve_ground_state(config.dimension, &ShootingConfig::default())?;
            print_json(&classify_wells(&config.potential(), &config.domain_spec(), &profile)?)
        }
        Command::Minimize { config, a } => {
            let config = load(&config)?;
            let r = Setup::new(&config)?.minimize(a)?;
            print_rows(&config, &[SweepRow::from(&r)])
        }
        Command::Sweep {
            config,
            a_from,
            a_to,
            points,
            linear,
        } => {
            let mut config = load(&config)?;
            let base = config.sweep.clone();
            let pick = |flag: Option<f64>, field: Option<f64>, name: &str| {
                flag.or(field).ok_or_else(|| RunError::Schema(vec![missing(name)]))
            };
            let section = SweepSection {
                a_from: pick(a_from, base.as_ref().map(|s| s.a_from), "sweep.a_from")?,
                a_to: pick(a_to, base.as_ref().map(|s| s.a_to), "sweep.a_to")?,
                points: points
                    .or(base.as_ref().map(|s| s.points))
                    .ok_or_else(|| RunError::Schema(vec![missing("sweep.points")]))?,
                geometric: !linear && base.as_ref().is_none_or(|s| s.geometric),
            };
            config.sweep = Some(section);
            let diags = config.check_with(false);
            if !diags.is_empty() {
                return Err(RunError::Schema(diags));
            }
            let values = config.sweep.as_ref().expect("set above").values();
            let results = Setup::new(&config)?.sweep(&values)?;
            let rows: Vec<SweepRow> = results.iter().map(SweepRow::from).collect();
            print_rows(&config, &rows)
        }
        Command::Trial { config, a } => {
            let config = load(&config)?;
            print_json(&Setup::new(&config)?.trial(a)?)
        }
        Command::Report {
            sweep,
            profile,
            mode,
            markdown,
        } => {
            let file = fs::File::open(&sweep).map_err(|e| RunError::Io(format!("{}: {e}", sweep.display())))?;
            let (meta, rows) = read_table(BufReader::new(file))?;
            let doc = ProfileDocument::from_json(&read(&profile)?)?;
            let setup = Setup::with_profile(&meta.config, doc.to_profile()?)?;
            let mode = match mode {
                ReportMode::Inner => Mode::Inner,
                ReportMode::Boundary => Mode::Boundary,
            };
            let report = sweep_report(&meta.config, &setup.classification, &rows, mode)?;
            print_json(&report)?;
            match markdown {
                Some(path) => fs::write(path, report.to_markdown())?,
                None => eprint!("{}", report.to_markdown()),
            }
            Ok(())
        }
        Command::Validate { config } => {
            let diags = kirchhoff_cli::validate(&read(&config)?);
            print_json(&diags)?;
            if diags.is_empty() {
                Ok(())
            } else {
                Err(RunError::Schema(diags))
            }
        }
        Command::Run { config } => {
            let text = read(&config)?;
            let out = pipeline::run(&text, &output_root())?;
            println!("{}", out.directory.display());
            print!("{}", out.report.to_markdown());
            Ok(())
        }
    }
}

fn missing(path: &str) -> kirchhoff_cli::Diagnostic {
    kirchhoff_cli::Diagnostic {
        path: path.into(),
        message: "required: give it in the config or as a flag".into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
