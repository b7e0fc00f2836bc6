//! Experiment configuration files (TOML) and their validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use kirchhoff_core::domain_potential::{central_stencil, DomainShape, DomainSpec, PotentialSpec, Well, MIN_NODES};
use kirchhoff_core::minimizer::{geometric_sequence, FlowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Inner,
    Boundary,
    Nonexistence,
    Uniqueness,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Inner => "inner",
            Mode::Boundary => "boundary",
            Mode::Nonexistence => "nonexistence",
            Mode::Uniqueness => "uniqueness",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nodes: usize,
    #[serde(default = "default_order")]
    pub stencil_order: usize,
}

fn default_order() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub a_from: f64,
    pub a_to: f64,
    pub points: usize,
    #[serde(default = "yes")]
    pub geometric: bool,
}

fn yes() -> bool {
    true
}

impl SweepSection {
    /// Decreasing values of `a`.
    pub fn values(&self) -> Vec<f64> {
        if self.geometric {
            geometric_sequence(self.a_from, self.a_to, self.points)
        } else if self.points <= 1 {
            vec![self.a_from]
        } else {
            let step = (self.a_to - self.a_from) / (self.points - 1) as f64;
            (0..self.points)
                .map(|k| if k == self.points - 1 { self.a_to } else { self.a_from + step * k as f64 })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessSection {
    pub a: f64,
    #[serde(default = "default_inits")]
    pub inits: usize,
    #[serde(default = "default_uniqueness_tol")]
    pub tolerance: f64,
}

fn default_inits() -> usize {
    5
}

fn default_uniqueness_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonexistenceSection {
    /// Grids in the family; each doubles the node count of the previous one.
    #[serde(default = "default_refinements")]
    pub refinements: usize,
}

fn default_refinements() -> usize {
    3
}

impl Default for NonexistenceSection {
    fn default() -> Self {
        Self {
            refinements: default_refinements(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    #[serde(default = "default_b")]
    pub b: f64,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainShape,
    pub grid: GridSection,
    pub wells: Vec<Well>,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub uniqueness: Option<UniquenessSection>,
    #[serde(default)]
    pub nonexistence: NonexistenceSection,
}

fn default_b() -> f64 {
    1.0
}

/// A problem found in a configuration, tied to the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl ExperimentConfig {
    /// Parse and validate; any diagnostic rejects the file.
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let cfg = Self::parse_schema(text).map_err(|d| vec![d])?;
        let diags = cfg.check();
        if diags.is_empty() {
            Ok(cfg)
        } else {
            Err(diags)
        }
    }

    fn parse_schema(text: &str) -> Result<Self, Diagnostic> {
        let de = toml::Deserializer::parse(text).map_err(|e| Diagnostic::new("", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            Diagnostic::new(path, e.inner().message().to_string())
        })
    }

    pub fn domain_spec(&self) -> DomainSpec {
        match self.domain {
            DomainShape::Interval { lo, hi } => DomainSpec::interval(lo, hi, self.grid.nodes, self.grid.stencil_order),
            DomainShape::Ball { radius } => {
                DomainSpec::ball(self.dimension, radius, self.grid.nodes, self.grid.stencil_order)
            }
        }
    }

    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec {
            wells: self.wells.clone(),
        }
    }

    /// Semantic checks on an already parsed configuration.
    pub fn check(&self) -> Vec<Diagnostic> {
        self.check_with(true)
    }

    /// As [`check`](Self::check); with `fits` false the sweep only has to be
    /// well formed, not long enough for a scaling fit.
    pub fn check_with(&self, fits: bool) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        if !(1..=3).contains(&self.dimension) {
            d.push(Diagnostic::new("dimension", format!("dimension must be 1, 2 or 3, got {}", self.dimension)));
            return d;
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            d.push(Diagnostic::new("b", format!("b must be positive, got {}", self.b)));
        }
        let domain_ok = self.check_domain(&mut d);
        self.check_grid(&mut d);
        self.check_flow(&mut d);
        if self.wells.is_empty() {
            d.push(Diagnostic::new("wells", "at least one well is required"));
        }
        let mut wells_ok = !self.wells.is_empty();
        let spec = self.domain_spec();
        for (i, w) in self.wells.iter().enumerate() {
            if !(w.exponent > 0.0 && w.exponent.is_finite()) {
                d.push(Diagnostic::new(
                    format!("wells[{i}].exponent"),
                    format!("exponent must be positive, got {}", w.exponent),
                ));
                wells_ok = false;
            }
            if w.location.len() != self.dimension {
                d.push(Diagnostic::new(
                    format!("wells[{i}].location"),
                    format!("expected {} coordinates, got {}", self.dimension, w.location.len()),
                ));
                wells_ok = false;
            } else if domain_ok && spec.boundary_distance(&w.location) < -1e-12 * spec.size() {
                d.push(Diagnostic::new(format!("wells[{i}].location"), "well lies outside the domain"));
                wells_ok = false;
            }
        }
        if wells_ok && domain_ok && matches!(self.domain, DomainShape::Ball { .. }) {
            let at_origin = self.wells.len() == 1 && self.wells[0].location.iter().all(|v| v.abs() <= 1e-12);
            if !at_origin {
                d.push(Diagnostic::new("wells", "radial grids support a single well at the origin"));
            }
        }
        if wells_ok && domain_ok {
            self.check_mode(&spec, &mut d);
        }
        self.check_sweep(fits, &mut d);
        d
    }

    fn check_domain(&self, d: &mut Vec<Diagnostic>) -> bool {
        match self.domain {
            DomainShape::Interval { lo, hi } => {
                if self.dimension != 1 {
                    d.push(Diagnostic::new("domain.kind", "interval domains need dimension 1"));
                    return false;
                }
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    d.push(Diagnostic::new("domain.hi", format!("need lo < hi, got [{lo}, {hi}]")));
                    return false;
                }
            }
            DomainShape::Ball { radius } => {
                if self.dimension == 1 {
                    d.push(Diagnostic::new("domain.kind", "use an interval in dimension 1"));
                    return false;
                }
                if !(radius > 0.0 && radius.is_finite()) {
                    d.push(Diagnostic::new("domain.radius", format!("radius must be positive, got {radius}")));
                    return false;
                }
            }
        }
        true
    }

    fn check_grid(&self, d: &mut Vec<Diagnostic>) {
        if self.grid.nodes < MIN_NODES {
            d.push(Diagnostic::new(
                "grid.nodes",
                format!("grid too coarse: {} nodes, need at least {MIN_NODES}", self.grid.nodes),
            ));
        }
        if self.dimension != 2 {
            if let Err(e) = central_stencil(self.grid.stencil_order) {
                d.push(Diagnostic::new("grid.stencil_order", e.to_string()));
            }
        }
    }

    fn check_flow(&self, d: &mut Vec<Diagnostic>) {
        let f = &self.flow;
        let positive = [
            ("flow.dt", f.dt),
            ("flow.residual_tol", f.residual_tol),
            ("flow.step_tol", f.step_tol),
            ("flow.dt_growth", f.dt_growth),
            ("flow.dt_max", f.dt_max),
            ("flow.dt_min", f.dt_min),
            ("flow.collapse_spacings", f.collapse_spacings),
            ("flow.max_step", f.max_step),
        ];
        for (path, v) in positive {
            if !(v > 0.0) {
                d.push(Diagnostic::new(path, format!("must be positive, got {v}")));
            }
        }
        if f.max_steps == 0 {
            d.push(Diagnostic::new("flow.max_steps", "must be at least 1"));
        }
    }

    fn check_mode(&self, spec: &DomainSpec, d: &mut Vec<Diagnostic>) {
        let (interior, _) = self.potential().flattest_split(spec);
        match self.mode {
            Mode::Inner if interior.is_empty() => d.push(Diagnostic::new(
                "wells",
                "inner mode needs an interior flattest well, but Z1 is empty",
            )),
            Mode::Boundary if !interior.is_empty() => d.push(Diagnostic::new(
                "wells",
                format!("Z1 must be empty in boundary mode; interior flattest wells: {interior:?}"),
            )),
            Mode::Boundary if self.dimension != 1 => {
                d.push(Diagnostic::new("dimension", "boundary mode runs on intervals only"))
            }
            Mode::Uniqueness => match &self.uniqueness {
                None => d.push(Diagnostic::new("uniqueness", "section required in uniqueness mode")),
                Some(u) => {
                    if !(u.a > 0.0 && u.a.is_finite()) {
                        d.push(Diagnostic::new("uniqueness.a", format!("a must be positive, got {}", u.a)));
                    }
                    if u.inits < 2 {
                        d.push(Diagnostic::new("uniqueness.inits", "at least two initial states are needed"));
                    }
                    if !(u.tolerance > 0.0) {
                        d.push(Diagnostic::new("uniqueness.tolerance", "must be positive"));
                    }
                }
            },
            Mode::Nonexistence if self.nonexistence.refinements == 0 => {
                d.push(Diagnostic::new("nonexistence.refinements", "must be at least 1"))
            }
            _ => {}
        }
    }

    fn check_sweep(&self, fits: bool, d: &mut Vec<Diagnostic>) {
        let needs_fit = fits && matches!(self.mode, Mode::Inner | Mode::Boundary);
        let Some(s) = &self.sweep else {
            if needs_fit {
                d.push(Diagnostic::new("sweep", format!("section required in {} mode", self.mode)));
            }
            return;
        };
        if !(s.a_to > 0.0 && s.a_to.is_finite()) {
            d.push(Diagnostic::new("sweep.a_to", format!("sweep.a_to must be positive, got {}", s.a_to)));
        }
        if !(s.a_from > s.a_to) || !s.a_from.is_finite() {
            d.push(Diagnostic::new(
                "sweep.a_from",
                format!("sweep.a_from must exceed sweep.a_to, got a_from = {} and a_to = {}", s.a_from, s.a_to),
            ));
        }
        if s.points < 2 {
            d.push(Diagnostic::new("sweep.points", "a sweep needs at least 2 points"));
        } else if needs_fit && s.points < 4 {
            d.push(Diagnostic::new("sweep.points", "scaling fits need at least 4 points"));
        }
        if needs_fit && s.a_from > s.a_to && s.a_to > 0.0 && s.a_from / s.a_to < 100.0 {
            d.push(Diagnostic::new("sweep.a_to", "scaling fits need a sweep spanning at least 2 decades of a"));
        }
        if self.mode == Mode::Boundary && !(s.a_from < 1.0) {
            d.push(Diagnostic::new("sweep.a_from", "boundary laws need a < 1"));
        }
    }
}

/// Diagnostics for a configuration text; empty when it is valid.
pub fn validate(text: &str) -> Vec<Diagnostic> {
    match ExperimentConfig::parse(text) {
        Ok(_) => Vec::new(),
        Err(d) => d,
    }
}
