//! Constrained minimisation of the discrete energy on `{∫u² = 1, u ≥ 0}`.
//!
//! The default scheme is a linearly implicit normalised gradient flow
//! (pseudo-transient continuation): each step solves
//!
//! ```text
//! [ M/Δt + J   −My ] [δ ]   [ −F          ]
//! [ (My)ᵀ       0  ] [δμ] = [ −(yᵀMy − 1)/2 ]
//! ```
//!
//! where `F` is the weighted Euler–Lagrange residual and `J` its Jacobian.
//! Accepted steps must not raise the energy; `Δt` grows after every accepted
//! step, so the iteration turns into Newton's method near a minimiser.
//! The plain semi-implicit flow (frozen `K`, explicit nonlinearity) is
//! available for comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::banded::BandLu;
use crate::domain_potential::{Grid, GridFunction, Layout};
use crate::energy::{rayleigh_multiplier, weighted_residual, EnergyBreakdown, Multiplier, Problem};
use crate::error::{Error, Result};
use crate::numeric::ksum;
use crate::scalar_field::RadialProfile;

/// Treatment of the nonlocal factor `a + bK` inside one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KirchhoffFreeze {
    /// `K` is evaluated at the current iterate and held fixed during the step.
    PerStep,
    /// Pseudo-transient steps also linearise `K`, adding the rank-one term
    /// `2b(Ay)(Ay)ᵀ`. Semi-implicit steps always freeze it.
    #[default]
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FlowScheme {
    /// Implicit diffusion, explicit nonlinearity, then renormalisation.
    SemiImplicit,
    /// Linearly implicit step on the bordered system.
    #[default]
    PseudoTransient,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub dt: f64,
    pub max_steps: usize,
    /// Relative weighted-L² Euler–Lagrange residual below which the full
    /// Newton correction is measured.
    pub residual_tol: f64,
    /// L² length of the full Newton correction declaring convergence. The
    /// residual is normalised by the stiff terms and at small `a` cannot see
    /// the forces that place the peak.
    pub step_tol: f64,
    /// Relative energy change treated as no progress.
    pub stall_tol: f64,
    pub kirchhoff_freeze: KirchhoffFreeze,
    pub scheme: FlowScheme,
    pub dt_growth: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    /// Abort when `ε = K^{-1/2}` drops below this many grid spacings.
    pub collapse_spacings: f64,
    /// Accepted steps without progress before declaring a stall.
    pub stall_window: usize,
    /// A stalled run still counts as converged when its Newton correction is
    /// below `floor_factor · step_tol`: it has reached its rounding floor.
    pub floor_factor: f64,
    /// Largest L² distance an accepted step may move the state; keeps Newton-like
    /// steps out of spurious grid-scale basins.
    pub max_step: f64,
    /// Small-step relaxations applied to a rejected Newton-like candidate
    /// before damping it. Soft modes of the energy curve through stiff ones,
    /// so straight steps along them overshoot the valley floor.
    pub corrector_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            max_steps: 2000,
            residual_tol: 1e-7,
            step_tol: 1e-8,
            stall_tol: 1e-14,
            kirchhoff_freeze: KirchhoffFreeze::Coupled,
            scheme: FlowScheme::PseudoTransient,
            dt_growth: 4.0,
            dt_max: 1e12,
            dt_min: 1e-16,
            collapse_spacings: 4.0,
            stall_window: 20,
            floor_factor: 1e4,
            max_step: 0.25,
            corrector_steps: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxSteps,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct MinimizerResult {
    pub a: f64,
    pub state: GridFunction,
    pub energy: EnergyBreakdown,
    pub multiplier: Multiplier,
    pub epsilon: f64,
    /// Peak location (the origin for radial grids).
    pub z: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Relative weighted-L² residual.
    pub residual: f64,
    /// Max-norm of the pointwise residual.
    pub residual_abs: f64,
    /// L² length of the full Newton correction at the returned state.
    pub newton_step: f64,
    /// Energy after every accepted step, starting with the initial state.
    pub energy_trace: Vec<f64>,
}

impl MinimizerResult {
    /// Signed peak coordinate along the first axis.
    pub fn z_scalar(&self) -> f64 {
        self.z.first().copied().unwrap_or(0.0)
    }
}

fn normalise_abs(grid: &Grid, y: &mut [f64]) -> Result<()> {
    for v in y.iter_mut() {
        *v = v.abs();
    }
    let m = grid.mass_of(y);
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::DegenerateInput("state has zero or non-finite mass".into()));
    }
    let inv = m.sqrt().recip();
    for v in y.iter_mut() {
        *v *= inv;
    }
    Ok(())
}

/// Residual norms of a normalised unknown vector.
#[derive(Clone, Copy)]
struct Residual {
    relative: f64,
    /// Magnitude of the stiffest terms, used to normalise `relative`.
    scale: f64,
    absolute: f64,
    mu: f64,
}

fn residual(problem: &Problem, y: &[f64], it: &crate::energy::Integrals) -> Residual {
    let grid = &problem.grid;
    let mu = rayleigh_multiplier(it, &problem.params);
    let (f, _) = weighted_residual(grid, y, &problem.potential.values, &problem.params, it.grad_sq, mu);
    let l2 = ksum(f.iter().zip(&grid.mass).map(|(f, m)| f * f / m)).sqrt();
    let absolute = f
        .iter()
        .zip(&grid.mass)
        .zip(&grid.scale)
        .map(|((f, m), s)| (s * f / m).abs())
        .fold(0.0, f64::max);
    let p = &problem.params;
    let scale = mu.abs().max((p.a + p.b * it.grad_sq) * it.grad_sq).max(f64::MIN_POSITIVE);
    Residual {
        relative: l2 / (scale * it.mass.sqrt()),
        scale,
        absolute,
        mu,
    }
}

/// One trial step from normalised `y`; returns the unnormalised candidate.
fn propose(problem: &Problem, y: &[f64], it: &crate::energy::Integrals, mu: f64, dt: f64, cfg: &FlowConfig) -> Result<Vec<f64>> {
    let grid = &problem.grid;
    let p = &problem.params;
    let n = y.len();
    let s = 8.0 / grid.dimension() as f64;
    let coef = p.a + p.b * it.grad_sq;
    let coupled = cfg.kirchhoff_freeze == KirchhoffFreeze::Coupled && p.b != 0.0;
    let v = &problem.potential.values;
    let nl: Vec<f64> = (0..n).map(|j| p.beta_star * (grid.scale[j] * y[j]).abs().powf(s)).collect();

    let mut stiff = grid.stiffness.clone();
    scale_band(&mut stiff, coef);
    let g = grid.apply_stiffness(y);
    let sm = |lu: &BandLu, rhs: &[f64], xg: &[f64], denom: f64| -> Vec<f64> {
        let x = lu.solve(rhs);
        if !coupled {
            return x;
        }
        let c = 2.0 * p.b * dot(&g, &x) / denom;
        x.iter().zip(xg).map(|(a, b)| a - c * b).collect()
    };
    match cfg.scheme {
        FlowScheme::PseudoTransient => {
            let shift: Vec<f64> = (0..n)
                .map(|j| grid.mass[j] * (v[j] - (s + 1.0) * nl[j] - mu + 1.0 / dt))
                .collect();
            let lu = BandLu::factor_shifted(&stiff, &shift)?;
            let (f, _) = weighted_residual(grid, y, v, p, it.grad_sq, mu);
            let w: Vec<f64> = y.iter().zip(&grid.mass).map(|(a, m)| a * m).collect();
            let xg = if coupled { lu.solve(&g) } else { Vec::new() };
            let denom = if coupled { 1.0 + 2.0 * p.b * dot(&g, &xg) } else { 1.0 };
            let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
            let z_f = sm(&lu, &neg_f, &xg, denom);
            let z_w = sm(&lu, &w, &xg, denom);
            let rhs_c = -(it.mass - 1.0) / 2.0;
            let ww = dot(&w, &z_w);
            if ww == 0.0 || !ww.is_finite() {
                return Err(Error::Singular("bordered system is singular".into()));
            }
            let dmu = (rhs_c - dot(&w, &z_f)) / ww;
            Ok((0..n).map(|j| y[j] + z_f[j] + dmu * z_w[j]).collect())
        }
        FlowScheme::SemiImplicit => {
            // K and |u|^{8/N} frozen at the current iterate but applied to the
            // new one, so fixed points solve the Euler–Lagrange equation for
            // every Δt. A linearised K would break that after renormalisation.
            let shift: Vec<f64> = (0..n).map(|j| grid.mass[j] * (1.0 / dt + v[j] - nl[j])).collect();
            let lu = BandLu::factor_shifted(&stiff, &shift)?;
            let rhs: Vec<f64> = (0..n).map(|j| grid.mass[j] * y[j] / dt).collect();
            Ok(lu.solve(&rhs))
        }
    }
}

fn scale_band(a: &mut crate::banded::SymBand, c: f64) {
    let n = a.dim();
    for m in 0..=a.half_bandwidth() {
        for i in 0..n.saturating_sub(m) {
            let v = a.get(i, i + m);
            a.add(i, i + m, (c - 1.0) * v);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    ksum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Peak location with parabolic refinement on interval grids.
pub fn peak_location(u: &GridFunction) -> Vec<f64> {
    let grid = &u.grid;
    if grid.is_radial() {
        return vec![0.0; grid.dimension()];
    }
    let j = u.argmax();
    let left = if j == 0 { 0.0 } else { u.values[j - 1] };
    let right = u.values.get(j + 1).copied().unwrap_or(0.0);
    let c = u.values[j];
    let denom = left - 2.0 * c + right;
    let shift = if denom < 0.0 { (0.5 * (left - right) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    vec![grid.coords[j] + shift * grid.h]
}

/// L² length of the full bordered Newton correction at `y`, or infinity while
/// the residual is above the gate or the Newton system is singular.
fn newton_length(problem: &Problem, y: &[f64], it: &crate::energy::Integrals, res: &Residual, cfg: &FlowConfig) -> f64 {
    if !(res.relative < cfg.residual_tol) {
        return f64::INFINITY;
    }
    let newton = FlowConfig { scheme: FlowScheme::PseudoTransient, ..cfg.clone() };
    match propose(problem, y, it, res.mu, f64::INFINITY, &newton) {
        Ok(raw) => {
            let diff: Vec<f64> = raw.iter().zip(y).map(|(a, b)| a - b).collect();
            problem.grid.mass_of(&diff).sqrt()
        }
        Err(_) => f64::INFINITY,
    }
}

/// Minimise from `init` with the configured flow.
pub fn normalized_gradient_flow(problem: &Problem, init: &GridFunction, cfg: &FlowConfig) -> Result<MinimizerResult> {
    let grid = problem.grid.clone();
    if init.values.len() != grid.len() {
        return Err(Error::Precondition("initial state lives on a different grid".into()));
    }
    if !(problem.params.a >= 0.0) || !(problem.params.b >= 0.0) {
        return Err(Error::Precondition(format!(
            "need a ≥ 0 and b ≥ 0, got a = {}, b = {}",
            problem.params.a, problem.params.b
        )));
    }
    let mut y = init.unknowns();
    normalise_abs(&grid, &mut y)?;
    let mut it = problem.integrals(&y);
    let mut e = problem.breakdown(&it);
    let mut res = residual(problem, &y, &it);
    let mut trace = vec![e.total];
    let mut dt = cfg.dt;
    let mut steps = 0usize;
    let mut attempts = 0usize;
    let mut newton = newton_length(problem, &y, &it, &res, cfg);
    let mut best_res = res.relative;
    let mut best_newton = newton;
    let mut since_progress = 0usize;
    let mut termination = Termination::MaxSteps;
    // Below the energy's rounding floor the iterates wander along soft modes;
    // the one closest to the critical point is reported.
    let mut best = (y.clone(), it, e, res, newton);

    while !(newton < cfg.step_tol) {
        if steps >= cfg.max_steps || attempts >= 4 * cfg.max_steps + 100 {
            termination = Termination::MaxSteps;
            break;
        }
        attempts += 1;
        let evaluate = |mut c: Vec<f64>| -> Result<Option<(Vec<f64>, crate::energy::Integrals, EnergyBreakdown)>> {
            normalise_abs(&grid, &mut c)?;
            let diff: Vec<f64> = c.iter().zip(&y).map(|(p, q)| p - q).collect();
            if grid.mass_of(&diff).sqrt() > cfg.max_step {
                return Ok(None);
            }
            let it_c = problem.integrals(&c);
            let e_c = problem.breakdown(&it_c);
            let slack = 1e-12_f64.max(4.0 * f64::EPSILON * e.magnitude().max(e_c.magnitude()));
            Ok((e_c.total.is_finite() && e_c.total <= e.total + slack).then_some((c, it_c, e_c)))
        };
        let mut backtracked = false;
        let accepted = match propose(problem, &y, &it, res.mu, dt, cfg) {
            Ok(raw) => {
                let mut found = evaluate(raw.clone())?;
                // Pseudo-transient steps at large dt are Newton-like. Relax the
                // stiff modes of a rejected candidate with steps short enough to
                // leave the soft ones alone, then damp along the raw direction
                // before falling back to a smaller dt.
                if found.is_none() && cfg.scheme == FlowScheme::PseudoTransient && cfg.corrector_steps > 0 {
                    let mut c = raw.clone();
                    for _ in 0..cfg.corrector_steps {
                        if normalise_abs(&grid, &mut c).is_err() {
                            break;
                        }
                        let it_c = problem.integrals(&c);
                        let r_c = residual(problem, &c, &it_c);
                        let dt_c = 4.0 / r_c.scale;
                        match propose(problem, &c, &it_c, r_c.mu, dt_c, cfg) {
                            Ok(next) => c = next,
                            Err(_) => break,
                        }
                    }
                    found = evaluate(c)?;
                }
                if found.is_none() && cfg.scheme == FlowScheme::PseudoTransient {
                    let mut alpha = 0.5;
                    while found.is_none() && alpha >= 0.06 {
                        let damped: Vec<f64> = y.iter().zip(&raw).map(|(a, b)| a + alpha * (b - a)).collect();
                        found = evaluate(damped)?;
                        alpha *= 0.5;
                    }
                    backtracked = found.is_some();
                }
                found
            }
            Err(Error::Singular(_)) | Err(Error::DegenerateInput(_)) => None,
            Err(other) => return Err(other),
        };
        match accepted {
            Some((c, it_c, e_c)) => {
                let de = (e.total - e_c.total).abs();
                y = c;
                it = it_c;
                e = e_c;
                res = residual(problem, &y, &it);
                newton = newton_length(problem, &y, &it, &res, cfg);
                trace.push(e.total);
                let floor = 32.0 * f64::EPSILON * e.magnitude();
                if (newton, res.relative) < (best.4, best.3.relative) || best.2.total > e.total + floor {
                    best = (y.clone(), it, e, res, newton);
                }
                steps += 1;
                if !backtracked {
                    dt = (dt * cfg.dt_growth).min(cfg.dt_max);
                }
                let eps = it.grad_sq.powf(-0.5);
                if eps < cfg.collapse_spacings * grid.h {
                    return Err(Error::Collapse {
                        epsilon: eps,
                        h: grid.h,
                        spacings: cfg.collapse_spacings,
                        steps,
                        energy: e.total,
                    });
                }
                let noise = 32.0 * f64::EPSILON * e.magnitude();
                if res.relative < 0.5 * best_res
                    || newton < 0.5 * best_newton
                    || de > (cfg.stall_tol * e.total.abs()).max(noise)
                {
                    best_res = best_res.min(res.relative);
                    best_newton = best_newton.min(newton);
                    since_progress = 0;
                } else {
                    since_progress += 1;
                }
                let stalled = since_progress >= cfg.stall_window;
                if stalled {
                    termination = Termination::Stalled;
                    break;
                }
            }
            None => {
                dt *= 0.25;
                if dt < cfg.dt_min {
                    termination = Termination::Stalled;
                    break;
                }
            }
        }
    }
    if (best.4, best.3.relative) < (newton, res.relative) && best.2.total <= e.total + 32.0 * f64::EPSILON * e.magnitude() {
        (y, it, e, res, newton) = best;
    }
    let converged =
        newton < cfg.step_tol || (termination == Termination::Stalled && newton < cfg.floor_factor * cfg.step_tol);
    if converged {
        termination = Termination::Converged;
    }
    let state = GridFunction::from_unknowns(grid.clone(), &y);
    let multiplier = Multiplier {
        mu: res.mu,
        rayleigh: res.mu,
        epsilon: it.grad_sq.powf(-0.5),
    };
    let mu_formula = crate::energy::multiplier(&state, &problem.potential, &problem.params, e.total)?;
    Ok(MinimizerResult {
        a: problem.params.a,
        z: peak_location(&state),
        epsilon: multiplier.epsilon,
        multiplier: mu_formula,
        state,
        energy: e,
        steps,
        converged,
        termination,
        residual: res.relative,
        residual_abs: res.absolute,
        newton_step: newton,
        energy_trace: trace,
    })
}

/// Trial state `τ^{N/2} φ Q(τ(x − c)) / |Q|₂` normalised on the grid, and the
/// normalising factor `A_τ²` it needed.
#[derive(Debug, Clone)]
pub struct TrialState {
    pub state: GridFunction,
    pub amplitude_sq: f64,
    pub cutoff_radius: f64,
}

/// Smooth step equal to 1 for `t ≤ 1` and 0 for `t ≥ 2`.
pub fn smooth_cutoff(t: f64) -> f64 {
    let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let a = psi(2.0 - t);
        a / (a + psi(t - 1.0))
    }
}

/// Minimum number of grid spacings across the half-width `1/τ` of a trial state.
pub const TRIAL_MIN_NODES: f64 = 8.0;

/// Fraction of the boundary distance on which the default trial cutoff is 1.
pub const TRIAL_PLATEAU: f64 = 0.9;

/// Trial state with the cutoff equal to 1 inside 90% of the distance from
/// `center` to the boundary and 0 beyond that distance. A wide plateau keeps
/// the Gagliardo–Nirenberg deficit of the truncated profile small, which the
/// nearly cancelling Kirchhoff and interaction terms would otherwise amplify.
pub fn init_trial(profile: &RadialProfile, tau: f64, center: &[f64], grid: &Arc<Grid>) -> Result<TrialState> {
    let dist = grid.spec.boundary_distance(center);
    init_trial_with_cutoff(profile, tau, center, grid, TRIAL_PLATEAU * dist, dist)
}

/// Trial state whose cutoff is 1 for `|x − c| ≤ inner` and 0 for `|x − c| ≥ outer`.
pub fn init_trial_with_cutoff(
    profile: &RadialProfile,
    tau: f64,
    center: &[f64],
    grid: &Arc<Grid>,
    inner: f64,
    outer: f64,
) -> Result<TrialState> {
    let n = grid.dimension();
    if profile.dimension != n || center.len() != n {
        return Err(Error::Precondition("trial center or profile has the wrong dimension".into()));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Precondition(format!("τ must be positive, got {tau}")));
    }
    let dist = grid.spec.boundary_distance(center);
    if !(dist > 0.0) {
        return Err(Error::Domain("trial center must lie in the open domain".into()));
    }
    if grid.is_radial() && center.iter().any(|c| c.abs() > 0.0) {
        return Err(Error::Domain("radial grids only support trials centred at the origin".into()));
    }
    if 1.0 / tau < TRIAL_MIN_NODES * grid.h {
        return Err(Error::Resolution(format!(
            "trial half-width 1/τ = {:.3e} spans fewer than {TRIAL_MIN_NODES} spacings of h = {:.3e}",
            1.0 / tau,
            grid.h
        )));
    }
    if !(inner > 0.0 && outer > inner && outer <= dist * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "cutoff radii {inner} < {outer} must fit inside the boundary distance {dist}"
        )));
    }
    let width = outer - inner;
    let norm = profile.l2_norm();
    let amp = tau.powf(n as f64 / 2.0) / norm;
    let values: Vec<f64> = grid
        .coords
        .iter()
        .map(|&c| {
            let r = if grid.is_radial() { c } else { (c - center[0]).abs() };
            amp * smooth_cutoff(1.0 + (r - inner) / width) * profile.value(tau * r)
        })
        .collect();
    let raw = GridFunction::new(grid.clone(), values)?;
    let m = raw.mass();
    if !(m > 0.0) {
        return Err(Error::DegenerateInput("trial state vanishes on the grid".into()));
    }
    let k = m.sqrt().recip();
    let state = GridFunction::new(grid.clone(), raw.values.iter().map(|v| v * k).collect())?;
    Ok(TrialState {
        state,
        amplitude_sq: 1.0 / m,
        cutoff_radius: inner,
    })
}

/// Trial state minimising the energy over its centre and scale, by alternating
/// golden-section searches in `ln τ` and in the centre (interval grids only).
pub fn optimize_trial(problem: &Problem, profile: &RadialProfile, tau: f64, center: &[f64]) -> Result<TrialState> {
    let grid = &problem.grid;
    let energy_at = |tau: f64, c: &[f64]| -> f64 {
        init_trial(profile, tau, c, grid)
            .and_then(|t| problem.energy(&t.state))
            .map(|e| e.total)
            .unwrap_or(f64::INFINITY)
    };
    let tau_max = 1.0 / (TRIAL_MIN_NODES * grid.h);
    let mut tau = tau.min(tau_max);
    let mut c = center.to_vec();
    let movable = !grid.is_radial();
    for round in 0..4 {
        let width = 1.5 * 0.5f64.powi(round);
        let lo = (tau.ln() - width).max(1e-3f64.ln());
        let hi = (tau.ln() + width).min(tau_max.ln());
        tau = golden(|t| energy_at(t.exp(), &c), lo, hi, 1e-4).exp();
        if movable {
            let span = 3.0 * 0.5f64.powi(round) / tau;
            let (dlo, dhi) = match grid.spec.shape {
                crate::domain_potential::DomainShape::Interval { lo, hi } => (lo, hi),
                crate::domain_potential::DomainShape::Ball { radius } => (-radius, radius),
            };
            let a = (c[0] - span).max(dlo + 1e-9);
            let b = (c[0] + span).min(dhi - 1e-9);
            c[0] = golden(|x| energy_at(tau, &[x]), a, b, 1e-4 / tau);
        }
    }
    init_trial(profile, tau, &c, grid)
}

fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Dilate a state by `factor` about `center` (`x ↦ c + (x − c)/factor`) and renormalise.
pub fn dilate(u: &GridFunction, factor: f64, center: f64) -> Result<GridFunction> {
    transform(u, factor, center, center)
}

/// Dilate by `factor` about `from` and move that point to `to`
/// (`x ↦ to + (x − from)·factor`), then renormalise.
pub fn transform(u: &GridFunction, factor: f64, from: f64, to: f64) -> Result<GridFunction> {
    let grid = &u.grid;
    let y = u.unknowns();
    let mut out: Vec<f64> = grid
        .coords
        .iter()
        .map(|&c| {
            let src = from + (c - to) / factor;
            let v = grid.interpolate_unknown(&y, src);
            if grid.layout == Layout::RadialOdd {
                v * factor
            } else {
                v
            }
        })
        .collect();
    normalise_abs(grid, &mut out)?;
    Ok(GridFunction::from_unknowns(grid.clone(), &out))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Predict each new start by dilating the previous minimiser with the
    /// scale ratio extrapolated from the last two points.
    pub predictor: bool,
    /// Point the peak approaches. When set, the predictor also extrapolates
    /// the peak's distance from it; otherwise the peak stays put.
    #[serde(default)]
    pub anchor: Option<f64>,
    /// Assumed exponent of `ε ∝ a^θ` for predicting the second point, before
    /// two points are available to extrapolate from.
    #[serde(default)]
    pub initial_exponent: Option<f64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            predictor: true,
            anchor: None,
            initial_exponent: None,
        }
    }
}

/// Geometric sequence from `from` to `to` with `points` entries.
pub fn geometric_sequence(from: f64, to: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![from];
    }
    let r = (to / from).ln() / (points - 1) as f64;
    (0..points)
        .map(|k| if k == points - 1 { to } else { from * (r * k as f64).exp() })
        .collect()
}

/// Warm-started sweep over decreasing `a`.
pub fn continuation_sweep(
    problem: &Problem,
    a_values: &[f64],
    init: &GridFunction,
    cfg: &FlowConfig,
    options: &SweepOptions,
) -> Result<Vec<MinimizerResult>> {
    continuation_sweep_with(problem, a_values, init, cfg, options, |_| {})
}

/// [`continuation_sweep`] calling `on_point` after each value of `a`.
pub fn continuation_sweep_with(
    problem: &Problem,
    a_values: &[f64],
    init: &GridFunction,
    cfg: &FlowConfig,
    options: &SweepOptions,
    mut on_point: impl FnMut(&MinimizerResult),
) -> Result<Vec<MinimizerResult>> {
    if a_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("sweep values of a must be strictly decreasing".into()));
    }
    let mut out: Vec<MinimizerResult> = Vec::with_capacity(a_values.len());
    for &a in a_values {
        let predict = |prev: &MinimizerResult, eps_ratio: f64, dist_ratio: f64| {
            let z = prev.z_scalar();
            let to = options.anchor.map_or(z, |x0| x0 + (z - x0) * dist_ratio);
            transform(&prev.state, eps_ratio, z, to)
        };
        let start = match out.len() {
            0 => init.clone(),
            1 => match options.initial_exponent {
                Some(theta) if options.predictor => {
                    let ratio = (a / out[0].a).powf(theta);
                    predict(&out[0], ratio, ratio)?
                }
                _ => out[0].state.clone(),
            },
            k if options.predictor => {
                let (p1, p2) = (&out[k - 2], &out[k - 1]);
                let rho = (a / p2.a).ln() / (p2.a / p1.a).ln();
                let eps_ratio = (p2.epsilon / p1.epsilon).powf(rho);
                let dist = |r: &MinimizerResult| options.anchor.map_or(0.0, |x0| (r.z_scalar() - x0).abs());
                let dist_ratio = if dist(p1) > 0.0 && dist(p2) > 0.0 {
                    (dist(p2) / dist(p1)).powf(rho)
                } else {
                    eps_ratio
                };
                predict(p2, eps_ratio, dist_ratio)?
            }
            k => out[k - 1].state.clone(),
        };
        let r = normalized_gradient_flow(&problem.with_a(a), &start, cfg).map_err(|e| Error::Sweep {
            a,
            source: Box::new(e),
        })?;
        on_point(&r);
        out.push(r);
    }
    Ok(out)
}

/// Random smooth positive field vanishing at the boundary, unit mass.
pub fn random_init(grid: &Arc<Grid>, rng: &mut impl Rng) -> GridFunction {
    let n = grid.len();
    let modes = 6;
    let amps: Vec<f64> = (0..modes).map(|_| rng.random_range(0.0..1.0)).collect();
    let phases: Vec<f64> = (0..modes).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let (lo, len) = match grid.spec.shape {
        crate::domain_potential::DomainShape::Interval { lo, hi } => (lo, hi - lo),
        crate::domain_potential::DomainShape::Ball { radius } => (-radius, 2.0 * radius),
    };
    let mut y: Vec<f64> = (0..n)
        .map(|j| {
            let t = (grid.coords[j] - lo) / len;
            let envelope = (std::f64::consts::PI * t).sin();
            let bump: f64 = amps
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(k, (a, ph))| a * (std::f64::consts::TAU * (k + 1) as f64 * t + ph).cos())
                .sum();
            let u = envelope * (1.5 + bump / modes as f64).exp();
            u / grid.scale[j]
        })
        .collect();
    normalise_abs(grid, &mut y).expect("random field has positive mass");
    GridFunction::from_unknowns(grid.clone(), &y)
}

#[derive(Debug, Clone)]
pub struct UniquenessProbe {
    pub results: Vec<MinimizerResult>,
    /// Largest pairwise `L²` distance among converged runs.
    pub max_distance: f64,
    pub all_converged: bool,
    /// Some runs ended at different states.
    pub non_unique: bool,
}

/// Run the flow from the given initial states and compare the end points.
pub fn uniqueness_probe(
    problem: &Problem,
    inits: &[GridFunction],
    cfg: &FlowConfig,
    tolerance: f64,
) -> Result<UniquenessProbe> {
    if inits.len() < 2 {
        return Err(Error::Precondition("uniqueness probe needs at least two initial states".into()));
    }
    let results: Vec<MinimizerResult> = inits
        .par_iter()
        .map(|u0| normalized_gradient_flow(problem, u0, cfg))
        .collect::<Result<_>>()?;
    let grid = &problem.grid;
    let mut max_distance = 0.0_f64;
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let yi = results[i].state.unknowns();
            let yj = results[j].state.unknowns();
            let d: Vec<f64> = yi.iter().zip(&yj).map(|(a, b)| a - b).collect();
            max_distance = max_distance.max(grid.mass_of(&d).sqrt());
        }
    }
    let all_converged = results.iter().all(|r| r.converged);
    Ok(UniquenessProbe {
        non_unique: max_distance > tolerance,
        max_distance,
        all_converged,
        results,
    })
}

/// `count` random initial states from a seeded generator.
pub fn random_inits(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_init(grid, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_potential::{build_grid, evaluate_potential, DomainSpec, PotentialSpec};
    use crate::energy::KirchhoffParams;
    use crate::scalar_field::{solve_ground_state, ShootingConfig};
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn q1() -> &'static RadialProfile {
        static P: OnceLock<RadialProfile> = OnceLock::new();
        P.get_or_init(|| solve_ground_state(1, &ShootingConfig::default()).unwrap())
    }

    fn harmonic(nodes: usize, order: usize, a: f64) -> Problem {
        let g = Arc::new(build_grid(&DomainSpec::interval(-1.0, 1.0, nodes, order)).unwrap());
        let v = evaluate_potential(&PotentialSpec::single(vec![0.0], 2.0), &g).unwrap();
        Problem::new(g, v, KirchhoffParams::critical(a, 1.0, q1())).unwrap()
    }

    fn distance(u: &GridFunction, w: &GridFunction) -> f64 {
        let d: Vec<f64> = u.unknowns().iter().zip(w.unknowns()).map(|(a, b)| a - b).collect();
        u.grid.mass_of(&d).sqrt()
    }

    fn seeded(grid: &Arc<Grid>) -> GridFunction {
        random_inits(grid, 1, 7).remove(0)
    }

    #[test]
    fn symmetric_minimiser_at_moderate_a() {
        let prob = harmonic(801, 8, 0.1);
        let r = normalized_gradient_flow(&prob, &seeded(&prob.grid), &FlowConfig::default()).unwrap();
        assert!(r.converged, "{:?}", r.termination);
        assert!((r.state.mass() - 1.0).abs() < 1e-12);
        let n = r.state.values.len();
        let asym = (0..n).map(|j| (r.state.values[j] - r.state.values[n - 1 - j]).abs()).fold(0.0, f64::max);
        assert!(asym < 1e-6, "reflection residual {asym:e}");
        assert!(r.state.values[1..n - 1].iter().all(|&v| v > 0.0));
        for w in r.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "energy rose by {:e}", w[1] - w[0]);
        }
        assert!(r.z[0].abs() < prob.grid.h);
    }

    #[test]
    fn schemes_reach_the_same_minimiser() {
        let prob = harmonic(401, 8, 0.1);
        let init = seeded(&prob.grid);
        let newton = normalized_gradient_flow(&prob, &init, &FlowConfig::default()).unwrap();
        let cfg = FlowConfig {
            scheme: FlowScheme::SemiImplicit,
            dt: 1e-2,
            dt_max: 1e-2,
            max_steps: 20000,
            ..Default::default()
        };
        let plain = normalized_gradient_flow(&prob, &init, &cfg).unwrap();
        assert!(
            (plain.energy.total - newton.energy.total).abs() < 1e-8 * newton.energy.total,
            "{} vs {}",
            plain.energy.total,
            newton.energy.total
        );
        assert!(distance(&plain.state, &newton.state) < 1e-4);
    }

    #[test]
    fn linear_limit_is_the_ground_eigenmode() {
        let g = Arc::new(build_grid(&DomainSpec::interval(0.0, 1.0, 201, 2)).unwrap());
        let v = GridFunction::new(g.clone(), vec![0.0; g.len()]).unwrap();
        let prob = Problem::new(g.clone(), v, KirchhoffParams { a: 1.0, b: 0.0, beta_star: 0.0 }).unwrap();
        let r = normalized_gradient_flow(&prob, &seeded(&g), &FlowConfig::default()).unwrap();
        assert!(r.converged);
        let h = g.h;
        let lambda = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!((r.energy.total - lambda).abs() < 1e-10 * lambda, "{} vs {lambda}", r.energy.total);
        let mode: Vec<f64> = g.coords.iter().map(|&x| (PI * x).sin()).collect();
        let k = g.mass_of(&mode).sqrt();
        let mode = GridFunction::from_unknowns(g.clone(), &mode.iter().map(|v| v / k).collect::<Vec<_>>());
        assert!(distance(&r.state, &mode) < 1e-8);
    }

    #[test]
    fn zero_a_collapses() {
        for nodes in [1001, 2001, 4001] {
            let prob = harmonic(nodes, 8, 0.0);
            match normalized_gradient_flow(&prob, &seeded(&prob.grid), &FlowConfig::default()) {
                Err(Error::Collapse { energy, .. }) => assert!(energy < 1e-2, "energy {energy}"),
                other => panic!("expected collapse on {nodes} nodes, got {other:?}"),
            }
        }
    }

    #[test]
    fn trial_state_contract() {
        let prob = harmonic(2001, 8, 1e-3);
        let g = &prob.grid;
        for tau in [5.0, 20.0, 60.0] {
            let t = init_trial(q1(), tau, &[0.1], g).unwrap();
            assert!((t.state.mass() - 1.0).abs() < 1e-12);
            assert!((peak_location(&t.state)[0] - 0.1).abs() <= g.h);
            if tau * 0.9 > 30.0 {
                assert!(t.amplitude_sq >= 1.0 - 1e-12 && t.amplitude_sq <= 1.0 + 1e-6, "{}", t.amplitude_sq);
            }
        }
        let too_narrow = 1.0 / (7.0 * g.h);
        assert!(matches!(init_trial(q1(), too_narrow, &[0.0], g), Err(Error::Resolution(_))));
        assert!(matches!(init_trial(q1(), 10.0, &[1.0], g), Err(Error::Domain(_))));
    }

    #[test]
    fn optimised_trial_improves_on_the_guess() {
        let prob = harmonic(2001, 8, 1e-3);
        let guess = init_trial(q1(), 3.0, &[0.2], &prob.grid).unwrap();
        let best = optimize_trial(&prob, q1(), 3.0, &[0.2]).unwrap();
        let e0 = prob.energy(&guess.state).unwrap().total;
        let e1 = prob.energy(&best.state).unwrap().total;
        assert!(e1 < e0);
        assert!(peak_location(&best.state)[0].abs() < 0.05);
    }

    #[test]
    fn transform_moves_and_scales() {
        let g = Arc::new(build_grid(&DomainSpec::interval(-1.0, 1.0, 1601, 8)).unwrap());
        let bump = |c: f64, w: f64| {
            let y: Vec<f64> = g.coords.iter().map(|&x| (-((x - c) / w).powi(2)).exp()).collect();
            let k = g.mass_of(&y).sqrt();
            GridFunction::from_unknowns(g.clone(), &y.iter().map(|v| v / k).collect::<Vec<_>>())
        };
        let u = bump(-0.1, 0.05);
        assert!(distance(&dilate(&u, 1.0, 0.3).unwrap(), &u) < 1e-14);
        let w = transform(&u, 2.0, -0.1, 0.2).unwrap();
        let d = distance(&w, &bump(0.2, 0.1));
        assert!(d < 1e-6, "{d:e}");
    }

    #[test]
    fn uniqueness_probe_needs_two_starts() {
        let prob = harmonic(201, 4, 0.1);
        let inits = random_inits(&prob.grid, 1, 3);
        assert!(matches!(
            uniqueness_probe(&prob, &inits, &FlowConfig::default(), 1e-6),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn sweep_is_monotone_and_granularity_independent() {
        let prob = harmonic(1601, 8, 1e-2);
        let init = init_trial(q1(), 3.0, &[0.0], &prob.grid).unwrap().state;
        let cfg = FlowConfig::default();
        let coarse = continuation_sweep(&prob, &geometric_sequence(1e-2, 1e-4, 5), &init, &cfg, &SweepOptions::default()).unwrap();
        let fine = continuation_sweep(&prob, &geometric_sequence(1e-2, 1e-4, 9), &init, &cfg, &SweepOptions::default()).unwrap();
        for w in coarse.windows(2) {
            assert!(w[0].energy.total >= w[1].energy.total);
        }
        let (a, b) = (coarse.last().unwrap(), fine.last().unwrap());
        assert!(a.converged && b.converged);
        assert!((a.energy.total - b.energy.total).abs() < 1e-8, "{:e}", a.energy.total - b.energy.total);
        assert!(a.epsilon < coarse[0].epsilon / 1.5);
    }

    #[test]
    fn second_order_grids_refine_quadratically() {
        let e: Vec<f64> = [201, 401, 801]
            .iter()
            .map(|&n| {
                let prob = harmonic(n, 2, 0.1);
                let init = seeded(&prob.grid);
                normalized_gradient_flow(&prob, &init, &FlowConfig::default()).unwrap().energy.total
            })
            .collect();
        let ratio = (e[0] - e[1]) / (e[1] - e[2]);
        assert!((3.0..=5.0).contains(&ratio), "refinement ratio {ratio}");
    }
}
