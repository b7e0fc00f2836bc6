//! Discrete Kirchhoff energy, Lagrange multiplier, Euler–Lagrange residual
//! and Gagliardo–Nirenberg quotient.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain_potential::{Grid, GridFunction};
use crate::error::{Error, Result};
use crate::numeric::ksum;
use crate::scalar_field::RadialProfile;

/// Tolerance on `∫u² = 1` for quantities defined on the constraint set.
pub const MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KirchhoffParams {
    pub a: f64,
    pub b: f64,
    pub beta_star: f64,
}

impl KirchhoffParams {
    /// Parameters at the critical interaction strength `β* = (b/2)|Q|₂^{8/N}`.
    pub fn critical(a: f64, b: f64, profile: &RadialProfile) -> Self {
        Self {
            a,
            b,
            beta_star: profile.beta_star(b),
        }
    }

    pub fn with_a(&self, a: f64) -> Self {
        Self { a, ..*self }
    }
}

/// Nonlinearity exponent `2 + 8/N`.
pub fn critical_exponent(dimension: usize) -> f64 {
    2.0 + 8.0 / dimension as f64
}

/// Raw discrete integrals of an unknown vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Integrals {
    /// `∫|∇u|²`
    pub grad_sq: f64,
    /// `∫V u²`
    pub potential: f64,
    /// `∫|u|^{2+8/N}`
    pub nonlinear: f64,
    pub mass: f64,
}

pub(crate) fn integrals(grid: &Grid, y: &[f64], v: &[f64]) -> Integrals {
    let q = critical_exponent(grid.dimension());
    let grad_sq = grid.grad_sq(y);
    let potential = ksum(y.iter().zip(&grid.mass).zip(v).map(|((y, m), v)| m * v * y * y));
    let nonlinear = ksum(
        y.iter()
            .zip(&grid.mass)
            .zip(&grid.scale)
            .map(|((y, m), s)| m / (s * s) * (s * y).abs().powf(q)),
    );
    let mass = grid.mass_of(y);
    Integrals {
        grad_sq,
        potential,
        nonlinear,
        mass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `a K`
    pub kinetic: f64,
    /// `(b/2) K²`
    pub kirchhoff: f64,
    /// `∫V u²`
    pub potential: f64,
    /// `−(N/(N+4)) β* ∫|u|^{2+8/N}`
    pub interaction: f64,
    /// Sum of the four terms, with the Kirchhoff and interaction terms
    /// paired first since they nearly cancel near a ground state.
    pub total: f64,
    /// `K = ∫|∇u|²`
    pub grad_sq: f64,
    /// `∫|u|^{2+8/N}`
    pub nonlinear: f64,
    pub mass: f64,
}

impl EnergyBreakdown {
    pub(crate) fn from_integrals(it: &Integrals, params: &KirchhoffParams, dimension: usize) -> Self {
        let n = dimension as f64;
        let kinetic = params.a * it.grad_sq;
        let kirchhoff = 0.5 * params.b * it.grad_sq * it.grad_sq;
        let interaction = -n / (n + 4.0) * params.beta_star * it.nonlinear;
        Self {
            kinetic,
            kirchhoff,
            potential: it.potential,
            interaction,
            total: kinetic + it.potential + (kirchhoff + interaction),
            grad_sq: it.grad_sq,
            nonlinear: it.nonlinear,
            mass: it.mass,
        }
    }

    /// Size of the largest cancelling terms; the total cannot be resolved
    /// more finely than a few ulps of this.
    pub fn magnitude(&self) -> f64 {
        self.kinetic.abs() + self.kirchhoff.abs() + self.potential.abs() + self.interaction.abs()
    }
}

fn check_pair(u: &GridFunction, v: &GridFunction) -> Result<()> {
    if !Arc::ptr_eq(&u.grid, &v.grid) && (u.grid.spec != v.grid.spec || u.values.len() != v.values.len()) {
        return Err(Error::Precondition("state and potential live on different grids".into()));
    }
    Ok(())
}

/// Discrete energy of `u`.
pub fn energy(u: &GridFunction, v: &GridFunction, params: &KirchhoffParams) -> Result<EnergyBreakdown> {
    check_pair(u, v)?;
    let y = u.unknowns();
    let it = integrals(&u.grid, &y, &v.values);
    if !(it.mass > 0.0) {
        return Err(Error::DegenerateInput("state has zero mass".into()));
    }
    Ok(EnergyBreakdown::from_integrals(&it, params, u.grid.dimension()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    /// `2e − aK − ((4−N)/(N+4)) β* ∫|u|^q − ∫V u²`
    pub mu: f64,
    /// `⟨(a + bK)(−Δu) + Vu − β*|u|^{8/N}u, u⟩ / ∫u²`
    pub rayleigh: f64,
    /// `K^{-1/2}`
    pub epsilon: f64,
}

/// Lagrange multiplier of a normalised state with energy `e_total`.
pub fn multiplier(
    u: &GridFunction,
    v: &GridFunction,
    params: &KirchhoffParams,
    e_total: f64,
) -> Result<Multiplier> {
    check_pair(u, v)?;
    let y = u.unknowns();
    let it = integrals(&u.grid, &y, &v.values);
    if (it.mass - 1.0).abs() > MASS_TOL {
        return Err(Error::Precondition(format!(
            "multiplier needs a normalised state, mass = {}",
            it.mass
        )));
    }
    let n = u.grid.dimension() as f64;
    let mu = 2.0 * e_total
        - params.a * it.grad_sq
        - (4.0 - n) / (n + 4.0) * params.beta_star * it.nonlinear
        - it.potential;
    Ok(Multiplier {
        mu,
        rayleigh: rayleigh_multiplier(&it, params),
        epsilon: it.grad_sq.powf(-0.5),
    })
}

pub(crate) fn rayleigh_multiplier(it: &Integrals, params: &KirchhoffParams) -> f64 {
    ((params.a + params.b * it.grad_sq) * it.grad_sq + it.potential - params.beta_star * it.nonlinear) / it.mass
}

/// Weighted residual `F = (a + bK)Ay + m(V − β*|u|^{8/N} − μ)y` in unknown space.
pub(crate) fn weighted_residual(
    grid: &Grid,
    y: &[f64],
    v: &[f64],
    params: &KirchhoffParams,
    grad_sq: f64,
    mu: f64,
) -> (Vec<f64>, Vec<f64>) {
    let s = 8.0 / grid.dimension() as f64;
    let ay = grid.apply_stiffness(y);
    let coef = params.a + params.b * grad_sq;
    let f = (0..y.len())
        .map(|j| {
            let u = grid.scale[j] * y[j];
            coef * ay[j] + grid.mass[j] * (v[j] - params.beta_star * u.abs().powf(s) - mu) * y[j]
        })
        .collect();
    (f, ay)
}

/// Pointwise Euler–Lagrange residual
/// `(a + bK)(−Δ_h u) + Vu − β*|u|^{8/N}u − μu`.
pub fn el_residual(
    u: &GridFunction,
    v: &GridFunction,
    params: &KirchhoffParams,
    mu: f64,
) -> Result<GridFunction> {
    check_pair(u, v)?;
    let grid = &u.grid;
    let y = u.unknowns();
    let grad_sq = grid.grad_sq(&y);
    let (f, _) = weighted_residual(grid, &y, &v.values, params, grad_sq, mu);
    let values = f
        .iter()
        .zip(&grid.mass)
        .zip(&grid.scale)
        .map(|((f, m), s)| s * f / m)
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// `∫|u|^{2+8/N} / ((∫|∇u|²)² (∫u²)^{4/N−1})`.
pub fn gn_ratio(u: &GridFunction) -> Result<f64> {
    let y = u.unknowns();
    let n = u.grid.dimension() as f64;
    let zero = vec![0.0; y.len()];
    let it = integrals(&u.grid, &y, &zero);
    if !(it.mass > 0.0) || !(it.grad_sq > 0.0) {
        return Err(Error::DegenerateInput("gn ratio of a zero or constant function".into()));
    }
    Ok(it.nonlinear / (it.grad_sq * it.grad_sq * it.mass.powf(4.0 / n - 1.0)))
}

/// A discretised minimisation problem: grid, sampled potential and coefficients.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<Grid>,
    pub potential: GridFunction,
    pub params: KirchhoffParams,
}

impl Problem {
    pub fn new(grid: Arc<Grid>, potential: GridFunction, params: KirchhoffParams) -> Result<Self> {
        if !Arc::ptr_eq(&grid, &potential.grid) {
            return Err(Error::Precondition("potential sampled on a different grid".into()));
        }
        Ok(Self { grid, potential, params })
    }

    pub fn with_a(&self, a: f64) -> Self {
        Self {
            params: self.params.with_a(a),
            ..self.clone()
        }
    }

    pub fn energy(&self, u: &GridFunction) -> Result<EnergyBreakdown> {
        energy(u, &self.potential, &self.params)
    }

    pub(crate) fn integrals(&self, y: &[f64]) -> Integrals {
        integrals(&self.grid, y, &self.potential.values)
    }

    pub(crate) fn breakdown(&self, it: &Integrals) -> EnergyBreakdown {
        EnergyBreakdown::from_integrals(it, &self.params, self.grid.dimension())
    }
}
