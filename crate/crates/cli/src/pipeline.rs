//! Experiment pipeline: profile solve, well classification, the runs a mode
//! calls for, and the artifacts they leave on disk.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kirchhoff_core::asymptotics::{boundary_energy_law, boundary_tau, boundary_trial_energy, inner_energy_law, inner_trial_energy};
use kirchhoff_core::domain_potential::{
    build_grid, classify_wells, evaluate_potential, DomainSpec, Grid, GridFunction, PotentialSpec, Regime,
    WellClassification,
};
use kirchhoff_core::energy::{EnergyBreakdown, KirchhoffParams, Problem};
use kirchhoff_core::minimizer::{
    continuation_sweep, init_trial, normalized_gradient_flow, optimize_trial, random_inits, uniqueness_probe,
    MinimizerResult, SweepOptions,
};
use kirchhoff_core::{solve_ground_state, Error, RadialProfile, ShootingConfig};

use crate::config::{Diagnostic, ExperimentConfig, Mode, SweepSection};
use crate::profile_doc::ProfileDocument;
use crate::report::{
    boundary_report, inner_report, nonexistence_report, uniqueness_report, CollapseRecord, VerificationReport,
};
use crate::table::{write_table, SweepRow, TableError, TableMeta};

/// Environment variable naming the root under which run directories are created.
pub const OUT_ENV: &str = "KIRCHHOFF_OUT";
const DEFAULT_OUT: &str = "kirchhoff-out";

/// `α` in the boundary trial's cut-off width `η = g^{−α}`.
pub const BOUNDARY_ALPHA: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", format_diagnostics(.0))]
    Schema(Vec<Diagnostic>),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("i/o failure: {0}")]
    Io(String),
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e)
        } else {
            RunError::Io(e.to_string())
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<TableError> for RunError {
    fn from(e: TableError) -> Self {
        RunError::Io(e.to_string())
    }
}

/// Everything derived from a configuration before any flow runs.
pub struct Setup {
    pub config: ExperimentConfig,
    pub profile: RadialProfile,
    pub spec: DomainSpec,
    pub potential: PotentialSpec,
    pub grid: Arc<Grid>,
    pub classification: WellClassification,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self, RunError> {
        let profile = solve_ground_state(config.dimension, &ShootingConfig::default())?;
        Self::with_profile(config, profile)
    }

    pub fn with_profile(config: &ExperimentConfig, profile: RadialProfile) -> Result<Self, RunError> {
        let spec = config.domain_spec();
        let potential = config.potential();
        let classification = classify_wells(&potential, &spec, &profile)?;
        let grid = Arc::new(build_grid(&spec)?);
        Ok(Self {
            config: config.clone(),
            profile,
            spec,
            potential,
            grid,
            classification,
        })
    }

    pub fn problem(&self, a: f64) -> Result<Problem, RunError> {
        self.problem_on(&self.grid, a)
    }

    fn problem_on(&self, grid: &Arc<Grid>, a: f64) -> Result<Problem, RunError> {
        let v = evaluate_potential(&self.potential, grid)?;
        let params = KirchhoffParams::critical(a, self.config.b, &self.profile);
        Ok(Problem::new(grid.clone(), v, params)?)
    }

    fn p(&self) -> f64 {
        self.classification.p
    }

    /// Start for the flow at `a`: the rescaled ground state at the governing
    /// well, optimised over position and width when that well is on the boundary.
    pub fn initial_state(&self, a: f64) -> Result<GridFunction, RunError> {
        // No concentration scale without a; start from a seeded bump instead.
        if a <= 0.0 {
            return Ok(random_inits(&self.grid, 1, self.config.seed).remove(0));
        }
        let well = self.classification.dominant();
        let p = self.p();
        match self.classification.regime {
            Regime::Inner => {
                let lambda = well.lambda.expect("interior flattest wells carry λ");
                let tau = lambda * a.powf(-1.0 / (p + 2.0));
                Ok(init_trial(&self.profile, tau, &well.location, &self.grid)?.state)
            }
            Regime::Boundary => {
                let kappa = well.kappa.finite().expect("flattest wells carry κ");
                let problem = self.problem(a)?;
                let tau = boundary_tau(p, kappa, a.min(0.5));
                let g = ((p + 4.0) / 2.0 * tau.ln()).max(1.0);
                let normal = self.spec.outward_normal(&well.location);
                let depth = (1.0 + g.powf(-BOUNDARY_ALPHA)) * g / tau;
                let center: Vec<f64> = well.location.iter().zip(&normal).map(|(x, n)| x - depth * n).collect();
                Ok(optimize_trial(&problem, &self.profile, tau, &center)?.state)
            }
        }
    }

    fn sweep_options(&self) -> SweepOptions {
        let well = self.classification.dominant();
        SweepOptions {
            predictor: true,
            anchor: (!self.grid.is_radial()).then(|| well.location[0]),
            initial_exponent: Some(1.0 / (self.p() + 2.0)),
        }
    }

    /// Warm-started sweep over the given decreasing values of `a`.
    pub fn sweep(&self, values: &[f64]) -> Result<Vec<MinimizerResult>, RunError> {
        let first = *values.first().ok_or_else(|| RunError::Io("empty sweep".into()))?;
        let problem = self.problem(first)?;
        let init = self.initial_state(first)?;
        Ok(continuation_sweep(&problem, values, &init, &self.config.flow, &self.sweep_options())?)
    }

    pub fn minimize(&self, a: f64) -> Result<MinimizerResult, RunError> {
        let problem = self.problem(a)?;
        let init = self.initial_state(a)?;
        Ok(normalized_gradient_flow(&problem, &init, &self.config.flow)?)
    }

    /// Trial-state energy at `a` and the law it is compared with.
    pub fn trial(&self, a: f64) -> Result<TrialSummary, RunError> {
        let problem = self.problem(a)?;
        let well = self.classification.dominant();
        let p = self.p();
        let (tau, breakdown, predicted) = match self.classification.regime {
            Regime::Inner => {
                let t = inner_trial_energy(&problem, well, &self.profile, None)?;
                let lambda = well.lambda.expect("interior flattest wells carry λ");
                (t.tau, t.breakdown, inner_energy_law(p, lambda, a))
            }
            Regime::Boundary => {
                let t = boundary_trial_energy(&problem, well, &self.profile, BOUNDARY_ALPHA)?;
                let kappa = well.kappa.finite().expect("flattest wells carry κ");
                (t.tau, t.breakdown, boundary_energy_law(p, kappa, a))
            }
        };
        Ok(TrialSummary {
            a,
            regime: self.classification.regime,
            well: well.index,
            tau,
            predicted,
            ratio: breakdown.total / predicted,
            breakdown,
        })
    }

    fn collapse_family(&self) -> Result<Vec<CollapseRecord>, RunError> {
        let base = self.config.grid.nodes;
        (0..self.config.nonexistence.refinements)
            .into_par_iter()
            .map(|k| {
                let mut spec = self.spec.clone();
                spec.node_count = (base - 1) * (1 << k) + 1;
                let grid = Arc::new(build_grid(&spec)?);
                let problem = self.problem_on(&grid, 0.0)?;
                let init = random_inits(&grid, 1, self.config.seed).remove(0);
                match normalized_gradient_flow(&problem, &init, &self.config.flow) {
                    Err(Error::Collapse { epsilon, h, steps, energy, .. }) => Ok(CollapseRecord {
                        nodes: spec.node_count,
                        h,
                        collapsed: true,
                        energy,
                        epsilon,
                        steps,
                    }),
                    Ok(r) => Ok(CollapseRecord {
                        nodes: spec.node_count,
                        h: grid.h,
                        collapsed: false,
                        energy: r.energy.total,
                        epsilon: r.epsilon,
                        steps: r.steps,
                    }),
                    Err(e) => Err(e.into()),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSummary {
    pub a: f64,
    pub regime: Regime,
    pub well: usize,
    pub tau: f64,
    pub breakdown: EnergyBreakdown,
    pub predicted: f64,
    pub ratio: f64,
}

/// Report for a sweep table in inner or boundary mode.
pub fn sweep_report(
    config: &ExperimentConfig,
    cls: &WellClassification,
    rows: &[SweepRow],
    mode: Mode,
) -> Result<VerificationReport, RunError> {
    let rep = match mode {
        Mode::Inner => inner_report(rows, cls, config.dimension, config.b)?,
        Mode::Boundary => boundary_report(rows, cls, config.dimension, config.b)?,
        other => {
            return Err(RunError::Schema(vec![Diagnostic {
                path: "mode".into(),
                message: format!("sweep reports cover inner and boundary modes, not {other}"),
            }]))
        }
    };
    Ok(rep)
}

/// Hex SHA-256 of the normalised configuration (defaults filled in).
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("configurations serialise");
    hex::encode(Sha256::digest(&canonical))
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from)
}

/// Where a run of `config` writes its artifacts.
pub fn run_directory(root: &Path, config: &ExperimentConfig) -> PathBuf {
    root.join(&config_hash(config)[..16])
}

pub struct RunOutcome {
    pub directory: PathBuf,
    pub report: VerificationReport,
}

pub fn sweep_section(config: &ExperimentConfig) -> Result<&SweepSection, RunError> {
    config.sweep.as_ref().ok_or_else(|| {
        RunError::Schema(vec![Diagnostic {
            path: "sweep".into(),
            message: "section required".into(),
        }])
    })
}

/// Run the pipeline for a configuration file's text, writing under `root`.
pub fn run(text: &str, root: &Path) -> Result<RunOutcome, RunError> {
    let config = ExperimentConfig::parse(text).map_err(RunError::Schema)?;
    let setup = Setup::new(&config)?;
    let dir = run_directory(root, &config);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), text)?;
    let doc = ProfileDocument::from(&setup.profile);
    fs::write(dir.join("profile.json"), serde_json::to_string_pretty(&doc).expect("profile serialises"))?;
    let p = setup.classification.p;
    let report = match config.mode {
        Mode::Inner | Mode::Boundary => {
            let results = setup.sweep(&sweep_section(&config)?.values())?;
            let rows: Vec<SweepRow> = results.iter().map(SweepRow::from).collect();
            write_csv(&dir.join("sweep.csv"), &config, &rows)?;
            sweep_report(&config, &setup.classification, &rows, config.mode)?
        }
        Mode::Uniqueness => {
            let u = config.uniqueness.as_ref().expect("validated");
            let problem = setup.problem(u.a)?;
            let inits = random_inits(&setup.grid, u.inits, config.seed);
            let probe = uniqueness_probe(&problem, &inits, &config.flow, u.tolerance)?;
            let rows: Vec<SweepRow> = probe.results.iter().map(SweepRow::from).collect();
            write_csv(&dir.join("sweep.csv"), &config, &rows)?;
            uniqueness_report(&probe, u.tolerance, config.dimension, p)
        }
        Mode::Nonexistence => {
            let records = setup.collapse_family()?;
            fs::write(
                dir.join("collapse.json"),
                serde_json::to_string_pretty(&records).expect("records serialise"),
            )?;
            nonexistence_report(&records, config.dimension, p)
        }
    };
    write_report(&dir, &report)?;
    Ok(RunOutcome { directory: dir, report })
}

pub fn write_csv(path: &Path, config: &ExperimentConfig, rows: &[SweepRow]) -> Result<(), RunError> {
    let file = BufWriter::new(fs::File::create(path)?);
    let meta = TableMeta { config: config.clone() };
    write_table(file, &meta, rows)?;
    Ok(())
}

pub fn write_report(dir: &Path, report: &VerificationReport) -> Result<(), RunError> {
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report).expect("reports serialise"))?;
    fs::write(dir.join("report.md"), report.to_markdown())?;
    Ok(())
}
