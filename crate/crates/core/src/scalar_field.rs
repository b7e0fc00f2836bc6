//! Positive radial ground state `Q` of
//! `-2ΔQ + ((4-N)/N) Q = Q^{1+8/N}` in dimension `N ∈ {1, 2, 3}`,
//! computed by shooting on the radial ODE, together with the sharp
//! Gagliardo–Nirenberg data derived from it.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ui;

use crate::error::{Error, Result};
use crate::numeric::{hermite, simpson, trapezoid, DormandPrince};

/// Tolerances for the shooting solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingConfig {
    pub q0_min: f64,
    pub q0_max: f64,
    /// Points in the geometric scan used to locate a sign change.
    pub bracket_points: usize,
    /// Relative bracket width at which bisection stops. Bisection also stops
    /// once the bracket endpoints are adjacent doubles.
    pub bisection_width: f64,
    pub rtol: f64,
    pub atol: f64,
    pub r_start: f64,
    /// Output grid spacing.
    pub dr: f64,
    /// Give up if neither crossing nor turning happens before this radius.
    pub r_limit: f64,
    /// The tabulated profile extends until `Q` drops below this value.
    pub truncation: f64,
    /// `Q/Q(0)` below which the linear tail regime is assumed.
    pub linear_regime: f64,
    /// `Q/Q(0)` at which the integrated solution is replaced by the fitted
    /// tail; below it the unstable mode seeded by integration error dominates.
    pub matching_level: f64,
    /// Relative divergence of the two bracketing trajectories that also
    /// ends the integrated part.
    pub divergence_tol: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            q0_min: 0.1,
            q0_max: 10.0,
            bracket_points: 48,
            bisection_width: 1e-15,
            rtol: 1e-13,
            atol: 1e-16,
            r_start: 1e-4,
            dr: 1e-3,
            r_limit: 2000.0,
            truncation: 1e-12,
            linear_regime: 1e-3,
            matching_level: 1e-5,
            divergence_tol: 1e-3,
        }
    }
}

/// Tabulated ground state on the uniform grid `r_k = k·dr`, with an
/// exponential tail `A r^{-(N-1)/2} e^{-μ r}` beyond the last sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dimension: usize,
    pub peak_value: f64,
    pub dr: f64,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    /// Radius where the integrated solution was replaced by the tail.
    pub matching_radius: f64,
    pub truncation_radius: f64,
    pub decay_rate: f64,
    pub tail_amplitude: f64,
    pub mass_sq: f64,
    pub gn_best: f64,
    pub beta_star_unit: f64,
    pub pohozaev_residuals: [f64; 2],
}

/// Sharp constants computed from the profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpConstants {
    pub dimension: usize,
    /// `∫Q²`
    pub mass_sq: f64,
    /// `∫|∇Q|²`
    pub kinetic: f64,
    /// `∫Q^{2+8/N}`
    pub nonlinear: f64,
    /// Best constant of `∫|u|^{2+8/N} ≤ C (∫|∇u|²)² (∫u²)^{4/N-1}`.
    pub gn_best: f64,
    /// Critical interaction strength for unit Kirchhoff coefficient,
    /// `|Q|₂^{8/N}/2`. It is evaluated as `(N+4)/(2N·G(Q))` with `G` the
    /// Gagliardo–Nirenberg quotient of the profile: the two agree exactly for
    /// the true ground state, but `G` is stationary there, so the quotient form
    /// is insensitive to first-order errors in the tabulated profile.
    pub beta_star_unit: f64,
    /// Three-dimensional companion constant `(8/7)(6/7)³ |Q|₂^{-8}`; `None` otherwise.
    pub carlen_cprime: Option<f64>,
    pub pohozaev_residuals: [f64; 2],
}

/// Surface measure of the unit sphere in `ℝ^N` (two points for `N = 1`).
pub fn sphere_area(dimension: usize) -> f64 {
    match dimension {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    }
}

/// Explicit one-dimensional ground state `15^{1/8} sech^{1/4}(2√6 x)`.
pub fn closed_form_1d(x: f64) -> f64 {
    15f64.powf(0.125) * (1.0 / (2.0 * 6f64.sqrt() * x).cosh()).powf(0.25)
}

/// Exponent `s = 8/N` and linear coefficient `c = (4-N)/N`.
fn coefficients(dimension: usize) -> (f64, f64) {
    let n = dimension as f64;
    (8.0 / n, (4.0 - n) / n)
}

fn check_dimension(dimension: usize) -> Result<()> {
    if (1..=3).contains(&dimension) {
        Ok(())
    } else {
        Err(Error::Domain(format!("dimension must be 1, 2 or 3, got {dimension}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// Crossed zero: the shooting value is too large.
    Crossed,
    /// Turned upward while positive: the shooting value is too small.
    Turned,
}

struct Shooter {
    dimension: usize,
    s: f64,
    c: f64,
    cfg: ShootingConfig,
}

impl Shooter {
    fn rhs(&self) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
        let friction = (self.dimension - 1) as f64;
        move |r: f64, y: &[f64; 2]| {
            let q = y[0];
            let nl = q.abs().powf(self.s) * q;
            [y[1], -friction / r * y[1] + 0.5 * (self.c * q - nl)]
        }
    }

    fn start(&self, q0: f64) -> [f64; 2] {
        let curv = (self.c * q0 - q0.powf(1.0 + self.s)) / (2.0 * self.dimension as f64);
        let r0 = self.cfg.r_start;
        [q0 + 0.5 * curv * r0 * r0, curv * r0]
    }

    fn shoot(&self, q0: f64) -> Result<Shot> {
        let f = self.rhs();
        let mut dp = DormandPrince::new(self.cfg.rtol, self.cfg.atol, 1e-3);
        let mut r = self.cfg.r_start;
        let mut y = self.start(q0);
        if y[1] > 0.0 {
            return Ok(Shot::Turned);
        }
        while r < self.cfg.r_limit {
            let (rn, yn) = dp.step(&f, r, &y, self.cfg.r_limit);
            r = rn;
            y = yn;
            if y[0] < 0.0 {
                return Ok(Shot::Crossed);
            }
            if y[1] > 0.0 {
                return Ok(Shot::Turned);
            }
        }
        Err(Error::ProfileInvalid(format!(
            "trajectory from Q(0) = {q0} neither crossed nor turned before r = {}",
            self.cfg.r_limit
        )))
    }

    /// Samples on the output grid until an event or `r_limit`.
    fn trace(&self, q0: f64) -> (Vec<f64>, Vec<f64>) {
        let f = self.rhs();
        let dr = self.cfg.dr;
        let mut dp = DormandPrince::new(self.cfg.rtol, self.cfg.atol, 1e-4);
        let mut q = vec![q0];
        let mut dq = vec![0.0];
        let mut r = self.cfg.r_start;
        let mut y = self.start(q0);
        let mut k = 1usize;
        loop {
            let target = k as f64 * dr;
            if target > self.cfg.r_limit {
                break;
            }
            y = dp.integrate(&f, r, y, target);
            r = target;
            q.push(y[0]);
            dq.push(y[1]);
            if y[0] < 0.0 || y[1] > 0.0 {
                break;
            }
            k += 1;
        }
        (q, dq)
    }
}

/// Compute the positive radial ground state.
pub fn solve_ground_state(dimension: usize, cfg: &ShootingConfig) -> Result<RadialProfile> {
    check_dimension(dimension)?;
    let (s, c) = coefficients(dimension);
    let shooter = Shooter {
        dimension,
        s,
        c,
        cfg: cfg.clone(),
    };

    let (lo_end, hi_end) = (cfg.q0_min, cfg.q0_max);
    if !(lo_end > 0.0 && hi_end > lo_end) {
        return Err(Error::BracketFailure {
            lo: lo_end,
            hi: hi_end,
            detail: "bracket must satisfy 0 < lo < hi".into(),
        });
    }
    if shooter.shoot(lo_end)? != Shot::Turned || shooter.shoot(hi_end)? != Shot::Crossed {
        return Err(Error::BracketFailure {
            lo: lo_end,
            hi: hi_end,
            detail: "endpoint trajectories do not change behaviour".into(),
        });
    }
    let points = cfg.bracket_points.max(2);
    let ratio = (hi_end / lo_end).powf(1.0 / (points - 1) as f64);
    let mut lo = lo_end;
    let mut hi = hi_end;
    let mut prev = lo_end;
    for k in 1..points {
        let q = if k == points - 1 { hi_end } else { lo_end * ratio.powi(k as i32) };
        if shooter.shoot(q)? == Shot::Crossed {
            lo = prev;
            hi = q;
            break;
        }
        prev = q;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= cfg.bisection_width * hi {
            break;
        }
        match shooter.shoot(mid)? {
            Shot::Turned => lo = mid,
            Shot::Crossed => hi = mid,
        }
    }

    let (q_lo, dq_lo) = shooter.trace(lo);
    let (q_hi, dq_hi) = shooter.trace(hi);
    let len = q_lo.len().min(q_hi.len());
    let peak = 0.5 * (lo + hi);
    let mut values = Vec::with_capacity(len);
    let mut derivs = Vec::with_capacity(len);
    for k in 0..len {
        let qa = 0.5 * (q_lo[k] + q_hi[k]);
        let da = 0.5 * (dq_lo[k] + dq_hi[k]);
        let diverged = (q_hi[k] - q_lo[k]).abs() > cfg.divergence_tol * qa.abs();
        let event = q_lo[k] < 0.0 || q_hi[k] < 0.0 || (k > 0 && (dq_lo[k] > 0.0 || dq_hi[k] > 0.0));
        if diverged || event {
            break;
        }
        values.push(qa);
        derivs.push(da);
        if qa < cfg.matching_level * peak {
            break;
        }
    }
    build_profile(dimension, peak, values, derivs, cfg)
}

/// Fit the tail, extend the table to the truncation radius and compute
/// the derived constants.
fn build_profile(
    dimension: usize,
    peak: f64,
    mut values: Vec<f64>,
    mut derivs: Vec<f64>,
    cfg: &ShootingConfig,
) -> Result<RadialProfile> {
    let dr = cfg.dr;
    let half = (dimension as f64 - 1.0) / 2.0;
    let start = values
        .iter()
        .position(|&q| q < cfg.linear_regime * peak)
        .ok_or_else(|| Error::ProfileInvalid("integration never reached the linear tail regime".into()))?;
    let end = values.len();
    if end < start + 20 {
        return Err(Error::ProfileInvalid(format!(
            "only {} samples in the linear tail regime",
            end.saturating_sub(start)
        )));
    }
    // Least squares for ln(Q r^{(N-1)/2}) = ln A − μ r over the tail window.
    let xs: Vec<f64> = (start..end).map(|k| k as f64 * dr).collect();
    let ys: Vec<f64> = (start..end)
        .map(|k| (values[k] * (k as f64 * dr).powf(half)).ln())
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let decay_rate = -sxy / sxx;
    if !(decay_rate > 0.0) {
        return Err(Error::ProfileInvalid(format!("non-decaying tail (rate {decay_rate})")));
    }
    let matching_radius = (end - 1) as f64 * dr;
    let tail_amplitude =
        values[end - 1] * matching_radius.powf(half) * (decay_rate * matching_radius).exp();
    let mut k = end;
    while *values.last().unwrap() >= cfg.truncation {
        let r = k as f64 * dr;
        let q = tail_amplitude * r.powf(-half) * (-decay_rate * r).exp();
        values.push(q);
        derivs.push(-q * (decay_rate + half / r));
        k += 1;
    }
    if values.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::ProfileInvalid("profile is not strictly positive".into()));
    }
    if derivs.iter().skip(1).any(|&d| d > 0.0) {
        return Err(Error::ProfileInvalid("profile is not radially non-increasing".into()));
    }
    let truncation_radius = (values.len() - 1) as f64 * dr;
    let mut profile = RadialProfile {
        dimension,
        peak_value: peak,
        dr,
        values,
        derivatives: derivs,
        matching_radius,
        truncation_radius,
        decay_rate,
        tail_amplitude,
        mass_sq: 0.0,
        gn_best: 0.0,
        beta_star_unit: 0.0,
        pohozaev_residuals: [0.0; 2],
    };
    let sc = profile.sharp_constants();
    profile.mass_sq = sc.mass_sq;
    profile.gn_best = sc.gn_best;
    profile.beta_star_unit = sc.beta_star_unit;
    profile.pohozaev_residuals = sc.pohozaev_residuals;
    Ok(profile)
}

impl RadialProfile {
    /// `Q(r)` for any real `r` (the profile is even).
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        let pos = r / self.dr;
        let k = pos.floor() as usize;
        if k + 1 >= self.values.len() {
            return self.tail(r);
        }
        let t = pos - k as f64;
        hermite(
            t,
            self.dr,
            self.values[k],
            self.derivatives[k],
            self.values[k + 1],
            self.derivatives[k + 1],
        )
    }

    fn tail(&self, r: f64) -> f64 {
        let half = (self.dimension as f64 - 1.0) / 2.0;
        self.tail_amplitude * r.powf(-half) * (-self.decay_rate * r).exp()
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.dr)
    }

    /// Radial integral `S_{N-1} ∫_0^∞ r^{N-1} g(r, Q, Q') dr` over the table.
    /// When the integrand extends to a smooth even function of `r` (odd `N`
    /// and `g` even) the trapezoid rule is spectrally accurate; otherwise
    /// Simpson is used.
    fn radial_integral<F: Fn(f64, f64, f64) -> f64>(&self, even: bool, g: F) -> f64 {
        let nm1 = self.dimension as i32 - 1;
        let samples: Vec<f64> = self
            .radii()
            .zip(self.values.iter().zip(&self.derivatives))
            .map(|(r, (&q, &d))| r.powi(nm1) * g(r, q, d))
            .collect();
        let integral = if even && self.dimension % 2 == 1 {
            trapezoid(&samples, self.dr)
        } else {
            simpson(&samples, self.dr)
        };
        sphere_area(self.dimension) * integral
    }

    /// `∫_{ℝ^N} |x|^p Q(x)² dx`, with the tail beyond the table integrated in closed form.
    pub fn weighted_moment(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::Precondition(format!("moment exponent must be ≥ 0, got {p}")));
        }
        let even = p.fract() == 0.0 && (p as i64) % 2 == 0;
        let body = self.radial_integral(even, |r, q, _| if p == 0.0 { q * q } else { r.powf(p) * q * q });
        let two_mu = 2.0 * self.decay_rate;
        let tail = sphere_area(self.dimension)
            * self.tail_amplitude.powi(2)
            * gamma_ui(p + 1.0, two_mu * self.truncation_radius)
            / two_mu.powf(p + 1.0);
        Ok(body + tail)
    }

    pub fn sharp_constants(&self) -> SharpConstants {
        let n = self.dimension as f64;
        let (s, _) = coefficients(self.dimension);
        let mass = self.weighted_moment(0.0).unwrap_or(f64::NAN);
        let kinetic = self.radial_integral(true, |_, _, d| d * d);
        let nonlinear = self.radial_integral(true, |_, q, _| q.powf(2.0 + s));
        let gn_best = (n + 4.0) / (n * mass.powf(4.0 / n));
        let carlen = (self.dimension == 3).then(|| 8.0 / 7.0 * (6.0f64 / 7.0).powi(3) * mass.powi(-4));
        SharpConstants {
            dimension: self.dimension,
            mass_sq: mass,
            kinetic,
            nonlinear,
            gn_best,
            beta_star_unit: 0.5 * (n + 4.0) / (n * nonlinear / (kinetic * kinetic * mass.powf(4.0 / n - 1.0))),
            carlen_cprime: carlen,
            pohozaev_residuals: [
                (kinetic - mass) / mass,
                (mass - n / (n + 4.0) * nonlinear) / mass,
            ],
        }
    }

    /// `β* = (b/2) |Q|₂^{8/N}` (see [`SharpConstants::beta_star_unit`]).
    pub fn beta_star(&self, b: f64) -> f64 {
        b * self.beta_star_unit
    }

    /// `|Q|₂`
    /// Simpson sum of `g(r, Q(r))` over the tabulated radii (no angular factor,
    /// no tail).
    pub fn table_integral<F: Fn(f64, f64) -> f64>(&self, g: F) -> f64 {
        let samples: Vec<f64> = self.radii().zip(&self.values).map(|(r, &q)| g(r, q)).collect();
        simpson(&samples, self.dr)
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass_sq.sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: RadialProfile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        p.check()?;
        Ok(p)
    }

    /// Consistency of a profile assembled from external data.
    pub fn check(&self) -> Result<()> {
        check_dimension(self.dimension)?;
        if self.values.len() != self.derivatives.len() || self.values.len() < 4 || !(self.dr > 0.0) {
            return Err(Error::ProfileInvalid("inconsistent tabulation".into()));
        }
        Ok(())
    }
}

/// Largest absolute deviation of the tabulated profile from `reference`.
pub fn max_abs_deviation<F: Fn(f64) -> f64>(profile: &RadialProfile, reference: F) -> f64 {
    profile
        .radii()
        .zip(&profile.values)
        .map(|(r, q)| (q - reference(r)).abs())
        .fold(0.0, f64::max)
}
