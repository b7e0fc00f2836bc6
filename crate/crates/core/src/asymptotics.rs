//! Small-`a` asymptotics: scaling fits, trial-state upper bounds, blow-up
//! diagnostics, the auxiliary `f_r` minimisation and moment Hessians.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::domain_potential::{Regime, WellInfo};
use crate::energy::{EnergyBreakdown, Problem};
use crate::error::{Error, Result};
use crate::minimizer::{init_trial, init_trial_with_cutoff, MinimizerResult, TrialState};
use crate::scalar_field::{sphere_area, RadialProfile};

/// Fit of `value ≈ C a^θ (ln 1/a)^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Zero unless the log correction was fitted.
    pub log_exponent: f64,
    /// `ln value − ln fit` at each point.
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

impl ScalingFit {
    pub fn predict(&self, a: f64) -> f64 {
        let log_part = if self.log_exponent == 0.0 {
            1.0
        } else {
            (1.0 / a).ln().powf(self.log_exponent)
        };
        self.prefactor * a.powf(self.exponent) * log_part
    }
}

/// Least squares in log space on at least 4 points spanning 2 decades of `a`.
/// With `with_log_correction` the three coefficients are fitted jointly.
pub fn fit_power_law(series: &[(f64, f64)], with_log_correction: bool) -> Result<ScalingFit> {
    if series.len() < 4 {
        return Err(Error::Precondition(format!("need at least 4 points, got {}", series.len())));
    }
    for &(a, v) in series {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Domain(format!("a must be positive, got {a}")));
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("values must be positive, got {v} at a = {a}")));
        }
        if with_log_correction && !(a < 1.0) {
            return Err(Error::Domain(format!("log correction needs a < 1, got {a}")));
        }
    }
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(l, h), &(a, _)| (l.min(a), h.max(a)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "points span only {:.2} decades of a",
            (hi / lo).log10()
        )));
    }
    let rows: Vec<Vec<f64>> = series
        .iter()
        .map(|&(a, _)| {
            let mut r = vec![1.0, a.ln()];
            if with_log_correction {
                r.push((1.0 / a).ln().ln());
            }
            r
        })
        .collect();
    let rhs: Vec<f64> = series.iter().map(|&(_, v)| v.ln()).collect();
    let coef = least_squares(&rows, &rhs)?;
    let fitted: Vec<f64> = rows.iter().map(|r| r.iter().zip(&coef).map(|(x, c)| x * c).sum()).collect();
    let residuals: Vec<f64> = rhs.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
    let ss_tot: f64 = rhs.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(ScalingFit {
        exponent: coef[1],
        prefactor: coef[0].exp(),
        log_exponent: coef.get(2).copied().unwrap_or(0.0),
        residuals,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    })
}

/// Smallest-`a` end of a series: the fewest points, at least 4, whose values
/// of `a` span `decades`. Laws valid as `a → 0` are fitted there.
pub fn asymptotic_tail(series: &[(f64, f64)], decades: f64) -> Vec<(f64, f64)> {
    let mut sorted = series.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let lo = match sorted.first() {
        Some(&(a, _)) => a,
        None => return sorted,
    };
    let mut k = sorted.len().min(4);
    while k < sorted.len() && sorted[k - 1].0 / lo < 10f64.powf(decades) * (1.0 - 1e-12) {
        k += 1;
    }
    sorted.truncate(k);
    sorted.reverse();
    sorted
}

/// Least squares by modified Gram–Schmidt on column-scaled data.
fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = rows.len();
    let n = rows[0].len();
    let mut q: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut r = vec![vec![0.0; n]; n];
    for j in 0..n {
        for i in 0..j {
            let d: f64 = (0..m).map(|k| q[i][k] * q[j][k]).sum();
            r[i][j] = d;
            for k in 0..m {
                q[j][k] -= d * q[i][k];
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = rows.iter().map(|row| row[j].abs()).fold(0.0, f64::max).max(1.0);
        if norm <= 1e-12 * scale * (m as f64).sqrt() {
            return Err(Error::DegenerateInput("fit columns are linearly dependent".into()));
        }
        r[j][j] = norm;
        for v in q[j].iter_mut() {
            *v /= norm;
        }
    }
    let qt_b: Vec<f64> = (0..n).map(|j| (0..m).map(|k| q[j][k] * rhs[k]).sum()).collect();
    let mut x = vec![0.0; n];
    for j in (0..n).rev() {
        let s: f64 = (j + 1..n).map(|i| r[j][i] * x[i]).sum();
        x[j] = (qt_b[j] - s) / r[j][j];
    }
    Ok(x)
}

/// Upper-bound law `((p+2)/p) λ² a^{p/(p+2)}` for concentration at an interior well.
pub fn inner_energy_law(p: f64, lambda: f64, a: f64) -> f64 {
    (p + 2.0) / p * lambda * lambda * a.powf(p / (p + 2.0))
}

/// Blow-up length `a^{1/(p+2)} / λ` at an interior well.
pub fn inner_epsilon_law(p: f64, lambda: f64, a: f64) -> f64 {
    a.powf(1.0 / (p + 2.0)) / lambda
}

/// Coefficient `r = κ ((p+4)/2)^p` of the auxiliary function governing boundary wells.
pub fn boundary_coefficient(p: f64, kappa: f64) -> f64 {
    kappa * ((p + 4.0) / 2.0).powf(p)
}

/// Energy law for concentration at a boundary well.
pub fn boundary_energy_law(p: f64, kappa: f64, a: f64) -> f64 {
    let e = p + 2.0;
    kappa.powf(2.0 / e)
        * ((p + 4.0) / (2.0 * e)).powf(2.0 * p / e)
        * ((p / 2.0).powf(2.0 / e) + (2.0 / p).powf(p / e))
        * a.powf(p / e)
        * (1.0 / a).ln().powf(2.0 * p / e)
}

/// Blow-up length at a boundary well.
pub fn boundary_epsilon_law(p: f64, kappa: f64, a: f64) -> f64 {
    let e = p + 2.0;
    (2.0f64.powf(p + 1.0) / (p * kappa * (p + 4.0).powf(p))).powf(1.0 / e)
        * e.powf(p / e)
        * a.powf(1.0 / e)
        * (1.0 / a).ln().powf(-p / e)
}

/// Optimal trial scale at a boundary well, the reciprocal of [`boundary_epsilon_law`].
pub fn boundary_tau(p: f64, kappa: f64, a: f64) -> f64 {
    1.0 / boundary_epsilon_law(p, kappa, a)
}

/// Limit of `ε⁴ μ`: `b (N − 4) / (2N)`.
pub fn multiplier_limit(dimension: usize, b: f64) -> f64 {
    let n = dimension as f64;
    b * (n - 4.0) / (2.0 * n)
}

/// `(a, ε⁴ μ)` along a sweep.
pub fn multiplier_series(sweep: &[MinimizerResult]) -> Vec<(f64, f64)> {
    sweep
        .iter()
        .map(|r| (r.a, r.multiplier.mu * r.epsilon.powi(4)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct InnerTrial {
    pub tau: f64,
    pub trial: TrialState,
    pub breakdown: EnergyBreakdown,
}

/// Energy of the rescaled ground state centred at an interior flattest well,
/// with `τ = λ a^{−1/(p+2)}` unless given.
pub fn inner_trial_energy(
    problem: &Problem,
    well: &WellInfo,
    profile: &RadialProfile,
    tau: Option<f64>,
) -> Result<InnerTrial> {
    let lambda = match (well.flattest && well.interior, well.lambda) {
        (true, Some(l)) => l,
        _ => {
            return Err(Error::Precondition(format!(
                "well {} is not an interior flattest well",
                well.index
            )))
        }
    };
    let a = problem.params.a;
    if !(a > 0.0) {
        return Err(Error::Precondition(format!("trial scale needs a > 0, got {a}")));
    }
    let p = well.exponent;
    let tau = tau.unwrap_or_else(|| lambda * a.powf(-1.0 / (p + 2.0)));
    let trial = init_trial(profile, tau, &well.location, &problem.grid)?;
    let breakdown = problem.energy(&trial.state)?;
    Ok(InnerTrial { tau, trial, breakdown })
}

#[derive(Debug, Clone)]
pub struct BoundaryTrial {
    pub tau: f64,
    /// `g(τ) = ((p+4)/2) ln τ`.
    pub g: f64,
    /// `R_τ = g(τ)/τ`.
    pub radius: f64,
    /// `η = g^{−α}`.
    pub eta: f64,
    /// `x_i − (1+η) R_τ n`.
    pub center: Vec<f64>,
    pub trial: TrialState,
    pub breakdown: EnergyBreakdown,
}

/// Energy of the boundary trial state: the ground state centred at distance
/// `(1+η)R_τ` inside the boundary well, cut off to the ball of that radius.
pub fn boundary_trial_energy(
    problem: &Problem,
    well: &WellInfo,
    profile: &RadialProfile,
    alpha: f64,
) -> Result<BoundaryTrial> {
    let grid = &problem.grid;
    if grid.dimension() != 1 || grid.is_radial() {
        return Err(Error::Precondition("the boundary trial is built on intervals only".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!("α must lie in (0, 1), got {alpha}")));
    }
    let kappa = match (well.flattest && !well.interior, well.kappa.finite()) {
        (true, Some(k)) => k,
        _ => {
            return Err(Error::Precondition(format!(
                "well {} is not a boundary flattest well",
                well.index
            )))
        }
    };
    let a = problem.params.a;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Precondition(format!("boundary scale needs 0 < a < 1, got {a}")));
    }
    let p = well.exponent;
    let tau = boundary_tau(p, kappa, a);
    let g = (p + 4.0) / 2.0 * tau.ln();
    if !(g > 0.0) {
        return Err(Error::Domain(format!("τ = {tau} gives a nonpositive g(τ)")));
    }
    let radius = g / tau;
    let eta = g.powf(-alpha);
    let normal = grid.spec.outward_normal(&well.location);
    let center: Vec<f64> = well
        .location
        .iter()
        .zip(&normal)
        .map(|(x, n)| x - (1.0 + eta) * radius * n)
        .collect();
    let outer = (1.0 + eta) * radius;
    if grid.spec.boundary_distance(&center) < outer * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "ball of radius {outer:.4e} about the trial centre leaves the domain"
        )));
    }
    let trial = init_trial_with_cutoff(profile, tau, &center, grid, radius, outer)?;
    let breakdown = problem.energy(&trial.state)?;
    Ok(BoundaryTrial {
        tau,
        g,
        radius,
        eta,
        center,
        trial,
        breakdown,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupPoint {
    pub a: f64,
    pub epsilon: f64,
    pub z: Vec<f64>,
    /// `‖ε^{N/2} u(εx + z) − Q/|Q|₂‖` over the rescaled domain.
    pub l2_distance: f64,
    pub linf_distance: f64,
    /// Mass of `Q/|Q|₂` outside the rescaled domain, not included above.
    pub outside_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub regime: Regime,
    /// Sorted by decreasing `a`.
    pub points: Vec<BlowupPoint>,
    /// Values of `a` whose runs had not converged.
    pub skipped: Vec<f64>,
}

impl BlowupReport {
    pub fn l2_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].l2_distance < w[0].l2_distance)
    }

    pub fn last(&self) -> Option<&BlowupPoint> {
        self.points.last()
    }
}

/// Distances between the rescaled minimisers and `Q/|Q|₂`.
///
/// By the change of variables `x = z + εξ` the rescaled distance equals the
/// distance on `Ω` between `u` and `ε^{−N/2} Q(|x − z|/ε)/|Q|₂`, which is
/// evaluated with the grid's own quadrature.
pub fn blowup_report(sweep: &[MinimizerResult], regime: Regime, profile: &RadialProfile) -> Result<BlowupReport> {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for r in sweep {
        if !r.converged {
            skipped.push(r.a);
            continue;
        }
        let grid = &r.state.grid;
        if profile.dimension != grid.dimension() {
            return Err(Error::Precondition("profile and sweep dimensions differ".into()));
        }
        let n = grid.dimension() as f64;
        let eps = r.epsilon;
        let amp = eps.powf(-n / 2.0) / profile.l2_norm();
        let z = if grid.is_radial() { 0.0 } else { r.z[0] };
        let target: Vec<f64> = grid
            .coords
            .iter()
            .map(|&c| amp * profile.value((c - z).abs() / eps))
            .collect();
        let diff: Vec<f64> = r.state.values.iter().zip(&target).map(|(u, t)| u - t).collect();
        let l2 = grid.mass_of(&grid.to_unknowns(&diff)).sqrt();
        let linf = eps.powf(n / 2.0) * diff.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let inside = grid.mass_of(&grid.to_unknowns(&target));
        points.push(BlowupPoint {
            a: r.a,
            epsilon: eps,
            z: r.z.clone(),
            l2_distance: l2,
            linf_distance: linf,
            outside_mass: (1.0 - inside).max(0.0),
        });
    }
    points.sort_by(|x, y| y.a.total_cmp(&x.a));
    Ok(BlowupReport { regime, points, skipped })
}

/// Summary of a ratio series that should approach a limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendStat {
    pub first_third_mean: f64,
    pub last_third_mean: f64,
    /// Least-squares slope against `log10(1/a)`.
    pub slope: f64,
}

impl TrendStat {
    /// Thirds of `v` ordered by decreasing `a`.
    pub fn of(a: &[f64], v: &[f64]) -> Self {
        let k = (v.len() / 3).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let x: Vec<f64> = a.iter().map(|a| -a.log10()).collect();
        let (mx, mv) = (mean(&x), mean(v));
        let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
        let sxv: f64 = x.iter().zip(v).map(|(x, v)| (x - mx) * (v - mv)).sum();
        Self {
            first_third_mean: mean(&v[..k]),
            last_third_mean: mean(&v[v.len() - k..]),
            slope: if sxx > 0.0 { sxv / sxx } else { 0.0 },
        }
    }

    /// The last third sits closer to `target` than the first third.
    pub fn approaches(&self, target: f64) -> bool {
        (self.last_third_mean - target).abs() < (self.first_third_mean - target).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRatePoint {
    pub a: f64,
    pub epsilon: f64,
    /// `|z − x_i| / (ε |ln ε|)`
    pub offset_ratio: f64,
    /// `ε` over [`boundary_epsilon_law`].
    pub epsilon_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRateReport {
    pub points: Vec<BoundaryRatePoint>,
    pub offset: TrendStat,
    pub epsilon: TrendStat,
    /// Predicted limit `(p+4)/2` of the offset ratio.
    pub offset_limit: f64,
}

pub fn boundary_rate_report(sweep: &[MinimizerResult], well: &WellInfo) -> Result<BoundaryRateReport> {
    let kappa = well
        .kappa
        .finite()
        .ok_or_else(|| Error::Precondition(format!("well {} is not flattest", well.index)))?;
    if sweep.is_empty() {
        return Err(Error::Precondition("empty sweep".into()));
    }
    let p = well.exponent;
    let mut points: Vec<BoundaryRatePoint> = sweep
        .iter()
        .map(|r| {
            let dist = r
                .z
                .iter()
                .zip(&well.location)
                .map(|(z, x)| (z - x).powi(2))
                .sum::<f64>()
                .sqrt();
            BoundaryRatePoint {
                a: r.a,
                epsilon: r.epsilon,
                offset_ratio: dist / (r.epsilon * r.epsilon.ln().abs()),
                epsilon_ratio: r.epsilon / boundary_epsilon_law(p, kappa, r.a),
            }
        })
        .collect();
    points.sort_by(|x, y| y.a.total_cmp(&x.a));
    let a: Vec<f64> = points.iter().map(|q| q.a).collect();
    let off: Vec<f64> = points.iter().map(|q| q.offset_ratio).collect();
    let eps: Vec<f64> = points.iter().map(|q| q.epsilon_ratio).collect();
    Ok(BoundaryRateReport {
        offset: TrendStat::of(&a, &off),
        epsilon: TrendStat::of(&a, &eps),
        offset_limit: (p + 4.0) / 2.0,
        points,
    })
}

/// `f_r(s) = a s^{−2} + r s^p (ln 1/s)^p`.
pub fn f_r(a: f64, r: f64, p: f64, s: f64) -> f64 {
    a / (s * s) + r * s.powf(p) * (1.0 / s).ln().powf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrAnalysis {
    pub numeric_argmin: f64,
    pub asymptotic_argmin: f64,
    pub numeric_min: f64,
    pub asymptotic_min: f64,
}

/// Numeric and asymptotic minimiser of `f_r` on `(0, 1/(e+1))`.
pub fn f_r_analysis(a: f64, r: f64, p: f64) -> Result<FrAnalysis> {
    if !(a > 0.0 && r > 0.0 && p > 0.0) || !(a < 1.0) {
        return Err(Error::Precondition(format!("need 0 < a < 1, r > 0, p > 0; got a = {a}, r = {r}, p = {p}")));
    }
    let hi = 1.0 / (std::f64::consts::E + 1.0);
    let f = |s: f64| f_r(a, r, p, s);
    // Golden section in ln s keeps the relative resolution uniform.
    let (mut lo_t, mut hi_t) = ((1e-12 * hi).ln(), hi.ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi_t - phi * (hi_t - lo_t);
    let mut x2 = lo_t + phi * (hi_t - lo_t);
    let (mut f1, mut f2) = (f(x1.exp()), f(x2.exp()));
    while (hi_t.exp() - lo_t.exp()) > 1e-12 {
        if f1 <= f2 {
            hi_t = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi_t - phi * (hi_t - lo_t);
            f1 = f(x1.exp());
        } else {
            lo_t = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo_t + phi * (hi_t - lo_t);
            f2 = f(x2.exp());
        }
    }
    let s = (0.5 * (lo_t + hi_t)).exp();
    if s > hi * (1.0 - 1e-6) || s < 1e-12 * hi * (1.0 + 1e-6) {
        return Err(Error::AsymptoticRegimeNotReached(format!(
            "minimiser of f_r sits at the bracket edge s = {s:.3e}"
        )));
    }
    let e = p + 2.0;
    let l = (1.0 / a).ln();
    let asymptotic_argmin = (2.0 / (p * r)).powf(1.0 / e) * a.powf(1.0 / e) * e.powf(p / e) * l.powf(-p / e);
    let asymptotic_min = (1.0 / e).powf(2.0 * p / e)
        * ((p / 2.0).powf(2.0 / e) + (2.0 / p).powf(p / e))
        * r.powf(2.0 / e)
        * a.powf(p / e)
        * l.powf(2.0 * p / e);
    Ok(FrAnalysis {
        numeric_argmin: s,
        asymptotic_argmin,
        numeric_min: f(s),
        asymptotic_min,
    })
}

/// Default finite-difference step of [`moment_hessian`].
pub const HESSIAN_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentHessian {
    pub matrix: Vec<Vec<f64>>,
    pub determinant: f64,
    pub nondegenerate: bool,
    /// `G''(0)` of the radial reduction `H(y) = G(|y|)`.
    pub second_derivative: f64,
}

/// Shifted moment `∫|x + s e|^p Q(x)² dx` for a unit vector `e`.
pub fn shifted_moment(profile: &RadialProfile, p: f64, s: f64) -> f64 {
    let n = profile.dimension;
    let s = s.abs();
    match n {
        1 => profile.table_integral(|r, q| q * q * ((r + s).abs().powf(p) + (r - s).abs().powf(p))),
        3 => profile.table_integral(|r, q| r * r * q * q * sphere_shell_mean(r, s, p)),
        _ => {
            const M: usize = 512;
            let area = sphere_area(n);
            profile.table_integral(|r, q| {
                let ring: f64 = (0..M)
                    .map(|k| {
                        let th = 2.0 * PI * k as f64 / M as f64;
                        (r * r + s * s + 2.0 * r * s * th.cos()).max(0.0).powf(p / 2.0)
                    })
                    .sum::<f64>()
                    / M as f64;
                r.powi(n as i32 - 1) * q * q * area * ring
            })
        }
    }
}

/// `∫_{S²} |rω + s e|^p dω`, written to avoid cancellation for small `s/r`.
fn sphere_shell_mean(r: f64, s: f64, p: f64) -> f64 {
    let (big, small) = if r >= s { (r, s) } else { (s, r) };
    if big == 0.0 {
        return 0.0;
    }
    let q = p + 2.0;
    let t = small / big;
    // ((1+t)^q − (1−t)^q)/t
    let phi = if t == 0.0 {
        2.0 * q
    } else if t >= 1.0 {
        2f64.powf(q)
    } else {
        (1.0 - t).powf(q) * (2.0 * q * t.atanh()).exp_m1() / t
    };
    2.0 * PI * big.powf(p) * phi / q
}

/// Hessian at `y = 0` of `H(y) = ∫|x + y|^p Q²`, by Richardson-refined central
/// differences with step `step`. Radial symmetry makes it a multiple of the identity.
pub fn moment_hessian_with_step(profile: &RadialProfile, p: f64, step: f64) -> Result<MomentHessian> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("nondegeneracy needs p > 1, got {p}")));
    }
    if !(step > 0.0) {
        return Err(Error::Precondition(format!("difference step must be positive, got {step}")));
    }
    let g0 = shifted_moment(profile, p, 0.0);
    let d = |h: f64| 2.0 * (shifted_moment(profile, p, h) - g0) / (h * h);
    let second = (4.0 * d(0.5 * step) - d(step)) / 3.0;
    let n = profile.dimension;
    let matrix: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { second } else { 0.0 }).collect())
        .collect();
    let determinant = second.powi(n as i32);
    Ok(MomentHessian {
        matrix,
        determinant,
        nondegenerate: determinant.abs() > 1e-8 * g0.powi(n as i32),
        second_derivative: second,
    })
}

pub fn moment_hessian(profile: &RadialProfile, p: f64) -> Result<MomentHessian> {
    moment_hessian_with_step(profile, p, HESSIAN_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar_field::{solve_ground_state, ShootingConfig};
    use std::sync::OnceLock;

    fn profile(n: usize) -> &'static RadialProfile {
        static P: [OnceLock<RadialProfile>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        P[n - 1].get_or_init(|| solve_ground_state(n, &ShootingConfig::default()).unwrap())
    }

    #[test]
    fn tail_spans_the_requested_decades() {
        let series: Vec<(f64, f64)> = (0..13).map(|k| (10f64.powf(-2.0 - k as f64 / 3.0), 1.0)).collect();
        let tail = asymptotic_tail(&series, 2.0);
        assert_eq!(tail.len(), 7);
        assert!(tail.windows(2).all(|w| w[1].0 < w[0].0));
        assert!((tail[0].0 / tail[6].0 - 100.0).abs() < 1e-9);
        assert_eq!(asymptotic_tail(&series[..3], 2.0).len(), 3);
        assert_eq!(asymptotic_tail(&series, 9.0).len(), 13);
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let s: Vec<(f64, f64)> = (0..8).map(|k| 10f64.powf(-0.5 * k as f64)).map(|a| (a, 3.0 * a.sqrt())).collect();
        let f = fit_power_law(&s, false).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn log_corrected_law_is_recovered() {
        let s: Vec<(f64, f64)> = (0..10)
            .map(|k| 10f64.powf(-2.0 - 0.7 * k as f64))
            .map(|a| (a, a.sqrt() * (1.0 / a).ln()))
            .collect();
        let f = fit_power_law(&s, true).unwrap();
        assert!((f.log_exponent - 1.0).abs() < 0.05, "{f:?}");
        assert!((f.exponent - 0.5).abs() < 1e-6);
        assert!((f.predict(1e-5) / (1e-5f64.sqrt() * 1e5f64.ln()) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fit_rejects_bad_series() {
        let short = [(1e-2, 1.0), (1e-3, 1.0), (1e-4, 1.0)];
        assert!(matches!(fit_power_law(&short, false), Err(Error::Precondition(_))));
        let narrow = [(1e-2, 1.0), (5e-3, 1.0), (3e-3, 1.0), (2e-3, 1.0)];
        assert!(matches!(fit_power_law(&narrow, false), Err(Error::Precondition(_))));
        let neg = [(1e-1, 1.0), (1e-2, -1.0), (1e-3, 1.0), (1e-4, 1.0)];
        assert!(matches!(fit_power_law(&neg, false), Err(Error::Domain(_))));
    }

    #[test]
    fn f_r_matches_closed_form_example() {
        let r = f_r_analysis(1e-8, 1.0, 2.0).unwrap();
        // Quoted to four significant digits.
        assert!((r.asymptotic_argmin / 0.004661 - 1.0).abs() < 5e-4, "{r:?}");
        assert!((r.numeric_argmin / r.asymptotic_argmin - 1.0).abs() < 0.1);
        assert!(r.numeric_min <= f_r(1e-8, 1.0, 2.0, r.asymptotic_argmin));
        let s = r.numeric_argmin;
        assert!(f_r(1e-8, 1.0, 2.0, s + 1e-6) > r.numeric_min);
        assert!(f_r(1e-8, 1.0, 2.0, s - 1e-6) > r.numeric_min);
    }

    #[test]
    fn f_r_argmin_solves_stationarity() {
        // Independent oracle: bisection on f_r'(s) = 0.
        let (a, r, p) = (1e-6, 2.0, 3.0);
        let df = |s: f64| {
            let l = (1.0 / s).ln();
            -2.0 * a / s.powi(3) + p * r * s.powf(p - 1.0) * l.powf(p - 1.0) * (l - 1.0)
        };
        let (mut lo, mut hi) = (1e-6, 1.0 / (std::f64::consts::E + 1.0));
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if df(m) < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let got = f_r_analysis(a, r, p).unwrap();
        assert!((got.numeric_argmin / lo - 1.0).abs() < 1e-6, "{} vs {lo}", got.numeric_argmin);
    }

    #[test]
    fn boundary_laws_are_consistent_with_f_r() {
        let (p, kappa, a) = (2.0, 1.3, 1e-9);
        let fr = f_r_analysis(a, boundary_coefficient(p, kappa), p).unwrap();
        assert!((fr.asymptotic_argmin / boundary_epsilon_law(p, kappa, a) - 1.0).abs() < 1e-12);
        assert!((fr.asymptotic_min / boundary_energy_law(p, kappa, a) - 1.0).abs() < 1e-12);
        assert!((boundary_tau(p, kappa, a) * boundary_epsilon_law(p, kappa, a) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn multiplier_limits() {
        assert_eq!(multiplier_limit(1, 1.0), -1.5);
        assert!((multiplier_limit(3, 2.0) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_moment_hessian_is_twice_the_mass() {
        for n in 1..=3 {
            let q = profile(n);
            let h = moment_hessian(q, 2.0).unwrap();
            let want = 2.0 * q.mass_sq;
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { want } else { 0.0 };
                    assert!((h.matrix[i][j] - e).abs() < 1e-6 * want, "N={n}: {} vs {e}", h.matrix[i][j]);
                }
            }
            assert!((h.determinant / want.powi(n as i32) - 1.0).abs() < 1e-6);
            assert!(h.nondegenerate);
        }
    }

    #[test]
    fn cubic_moment_hessian_matches_analytic_second_derivative() {
        let q = profile(1);
        let h = moment_hessian(q, 3.0).unwrap();
        let oracle = 6.0 * q.weighted_moment(1.0).unwrap();
        assert!((h.second_derivative / oracle - 1.0).abs() < 1e-4, "{} vs {oracle}", h.second_derivative);
        let half = moment_hessian_with_step(q, 3.0, 0.5 * HESSIAN_STEP).unwrap();
        assert!((half.determinant / h.determinant - 1.0).abs() < 1e-4);
    }

    #[test]
    fn shell_mean_matches_direct_quadrature() {
        for &(r, s, p) in &[(1.0, 0.3, 3.0), (0.2, 0.9, 2.5), (0.5, 0.5, 3.0), (2.0, 1e-4, 2.0)] {
            let m = 20000;
            let direct: f64 = (0..m)
                .map(|k| {
                    let c = -1.0 + (k as f64 + 0.5) * 2.0 / m as f64;
                    (r * r + s * s + 2.0 * r * s * c).powf(p / 2.0)
                })
                .sum::<f64>()
                * 2.0
                / m as f64
                * 2.0
                * PI;
            let got = sphere_shell_mean(r, s, p);
            assert!((got / direct - 1.0).abs() < 1e-6, "{r} {s} {p}: {got} vs {direct}");
        }
    }

    #[test]
    fn hessian_rejects_small_exponent() {
        assert!(matches!(moment_hessian(profile(1), 1.0), Err(Error::Domain(_))));
    }
}
