//! Computational domains, their discretisation and trapping potentials
//! `V(x) = Π |x − x_i|^{p_i}`.
//!
//! Every mesh is expressed through one abstraction: an unknown vector `y`
//! with physical values `u_j = scale_j · y_j`, lumped mass weights `m_j`
//! and a symmetric banded stiffness `A` with `∫|∇u|² ≈ yᵀAy`.
//!
//! * `N = 1`, interval: `y = u` at interior nodes; `A = h(−D₂)` where `D₂` is
//!   the central second-difference stencil of order `2k`, closed by odd
//!   reflection at both walls (homogeneous Dirichlet).
//! * `N = 3`, ball: `y = r u`, which turns the radial problem into a
//!   one-dimensional Dirichlet problem on `(0, R)`; the same stencils apply.
//! * `N = 2`, ball: second-order finite volumes on `r_j = j h`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::SymBand;
use crate::error::{Error, Result};
use crate::numeric::{ksum, lagrange4};
use crate::scalar_field::RadialProfile;

/// Smallest accepted `node_count`.
pub const MIN_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainShape {
    Interval { lo: f64, hi: f64 },
    Ball { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dimension: usize,
    pub shape: DomainShape,
    /// Number of grid nodes including boundary nodes (and the origin for balls).
    pub node_count: usize,
    /// Order of the central difference stencil (even; ignored for `N = 2`).
    pub stencil_order: usize,
}

impl DomainSpec {
    pub fn interval(lo: f64, hi: f64, node_count: usize, stencil_order: usize) -> Self {
        Self {
            dimension: 1,
            shape: DomainShape::Interval { lo, hi },
            node_count,
            stencil_order,
        }
    }

    pub fn ball(dimension: usize, radius: f64, node_count: usize, stencil_order: usize) -> Self {
        Self {
            dimension,
            shape: DomainShape::Ball { radius },
            node_count,
            stencil_order,
        }
    }

    /// Distance from a point to the boundary (negative outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self.shape {
            DomainShape::Interval { lo, hi } => (x[0] - lo).min(hi - x[0]),
            DomainShape::Ball { radius } => radius - x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Characteristic size used for relative tolerances.
    pub fn size(&self) -> f64 {
        match self.shape {
            DomainShape::Interval { lo, hi } => hi - lo,
            DomainShape::Ball { radius } => radius,
        }
    }

    /// Outward unit normal at the boundary point nearest to `x` (one-dimensional domains).
    pub fn outward_normal(&self, x: &[f64]) -> Vec<f64> {
        match self.shape {
            DomainShape::Interval { lo, hi } => {
                if (x[0] - lo) <= (hi - x[0]) {
                    vec![-1.0]
                } else {
                    vec![1.0]
                }
            }
            DomainShape::Ball { .. } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter().map(|v| v / r).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Interval,
    /// Unknown `y = r u`.
    RadialOdd,
    RadialVolume,
}

/// Discretisation of a domain.
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: DomainSpec,
    pub layout: Layout,
    pub h: f64,
    /// Coordinate (`x` or `r`) of each unknown.
    pub coords: Vec<f64>,
    pub mass: Vec<f64>,
    pub scale: Vec<f64>,
    pub stiffness: SymBand,
    /// `d_0, …, d_k` of the second-difference stencil (unscaled by `h²`).
    pub stencil: Vec<f64>,
}

/// Weights `d_0..=d_k` of the order-`2k` central approximation
/// `u'' ≈ h⁻² (d_0 u_i + Σ_j d_j (u_{i+j} + u_{i−j}))`.
pub fn central_stencil(order: usize) -> Result<Vec<f64>> {
    if order < 2 || !order.is_multiple_of(2) || order > 24 {
        return Err(Error::Configuration(format!(
            "stencil order must be an even number in [2, 24], got {order}"
        )));
    }
    let k = order / 2;
    let mut d = vec![0.0; k + 1];
    for j in 1..=k {
        // (k!)² / ((k−j)!(k+j)!) = Π_{i=1}^{j} (k−j+i)/(k+i)
        let mut ratio = 1.0;
        for i in 1..=j {
            ratio *= (k - j + i) as f64 / (k + i) as f64;
        }
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        d[j] = 2.0 * sign * ratio / (j * j) as f64;
    }
    d[0] = -2.0 * d[1..].iter().sum::<f64>();
    Ok(d)
}

/// `h·(−D₂)` on `n` unknowns at positions `1..=n` of a uniform grid whose
/// nodes `0` and `n+1` carry homogeneous Dirichlet data, closed by odd reflection.
fn dirichlet_stiffness(n: usize, h: f64, stencil: &[f64], factor: f64) -> SymBand {
    let k = stencil.len() - 1;
    let mut a = SymBand::zeros(n, k.min(n.saturating_sub(1)));
    let total = n as isize + 1;
    let c = -factor / h;
    for i in 0..n {
        let pos = i as isize + 1;
        a.add(i, i, c * stencil[0]);
        for (m, &dm) in stencil.iter().enumerate().skip(1) {
            for target in [pos + m as isize, pos - m as isize] {
                // Reflect into [0, n+1] with a sign flip per reflection.
                let mut t = target;
                let mut sign = 1.0;
                loop {
                    if t < 0 {
                        t = -t;
                        sign = -sign;
                    } else if t > total {
                        t = 2 * total - t;
                        sign = -sign;
                    } else {
                        break;
                    }
                }
                if t == 0 || t == total {
                    continue;
                }
                let j = (t - 1) as usize;
                if j >= i {
                    let v = c * dm * sign;
                    if j == i {
                        a.add(i, i, v);
                    } else {
                        // Each off-diagonal pair is visited from both rows; halve.
                        a.add(i, j, 0.5 * v);
                    }
                } else {
                    a.add(j, i, 0.5 * c * dm * sign);
                }
            }
        }
    }
    a
}

/// Build the grid for a domain.
pub fn build_grid(spec: &DomainSpec) -> Result<Grid> {
    if spec.node_count < MIN_NODES {
        return Err(Error::Configuration(format!(
            "grid too coarse: node_count {} < {MIN_NODES}",
            spec.node_count
        )));
    }
    match (&spec.shape, spec.dimension) {
        (DomainShape::Interval { lo, hi }, 1) => {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Domain(format!("invalid interval [{lo}, {hi}]")));
            }
            let stencil = central_stencil(spec.stencil_order)?;
            let n = spec.node_count - 2;
            let h = (hi - lo) / (spec.node_count - 1) as f64;
            let coords = (1..=n).map(|j| lo + j as f64 * h).collect();
            Ok(Grid {
                spec: spec.clone(),
                layout: Layout::Interval,
                h,
                coords,
                mass: vec![h; n],
                scale: vec![1.0; n],
                stiffness: dirichlet_stiffness(n, h, &stencil, 1.0),
                stencil,
            })
        }
        (DomainShape::Ball { radius }, 3) => {
            if !(*radius > 0.0) || !radius.is_finite() {
                return Err(Error::Domain(format!("invalid radius {radius}")));
            }
            let stencil = central_stencil(spec.stencil_order)?;
            let n = spec.node_count - 2;
            let h = radius / (spec.node_count - 1) as f64;
            let coords: Vec<f64> = (1..=n).map(|j| j as f64 * h).collect();
            let four_pi = 4.0 * std::f64::consts::PI;
            Ok(Grid {
                spec: spec.clone(),
                layout: Layout::RadialOdd,
                h,
                scale: coords.iter().map(|r| 1.0 / r).collect(),
                coords,
                mass: vec![four_pi * h; n],
                stiffness: dirichlet_stiffness(n, h, &stencil, four_pi),
                stencil,
            })
        }
        (DomainShape::Ball { radius }, 2) => {
            if !(*radius > 0.0) || !radius.is_finite() {
                return Err(Error::Domain(format!("invalid radius {radius}")));
            }
            let n = spec.node_count - 1;
            let h = radius / n as f64;
            let two_pi = 2.0 * std::f64::consts::PI;
            let coords: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
            let mut mass: Vec<f64> = coords.iter().map(|r| two_pi * r * h).collect();
            mass[0] = std::f64::consts::PI * h * h / 4.0;
            let mut a = SymBand::zeros(n, 1);
            for j in 0..n {
                let w = two_pi * (j as f64 + 0.5) * h / h;
                a.add(j, j, w);
                if j + 1 < n {
                    a.add(j + 1, j + 1, w);
                    a.add(j, j + 1, -w);
                }
            }
            Ok(Grid {
                spec: spec.clone(),
                layout: Layout::RadialVolume,
                h,
                coords,
                mass,
                scale: vec![1.0; n],
                stiffness: a,
                stencil: vec![-2.0, 1.0],
            })
        }
        (shape, n) => Err(Error::Domain(format!(
            "unsupported domain {shape:?} in dimension {n}: use an interval for N = 1 and a ball for N = 2, 3"
        ))),
    }
}

impl Grid {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.layout, Layout::Interval)
    }

    /// Unknowns from physical values.
    pub fn to_unknowns(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.scale).map(|(v, s)| v / s).collect()
    }

    pub fn to_physical(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.scale).map(|(v, s)| v * s).collect()
    }

    /// Odd periodic extension of the unknowns (period `2(n+1)`) sampled on
    /// indices `−k ..= n+1+k`, where index `t` sits at position `t + k`.
    fn odd_extension(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len() as isize;
        let k = (self.stencil.len() - 1) as isize;
        let period = 2 * (n + 1);
        (-k..=n + 1 + k)
            .map(|t| {
                let t = t.rem_euclid(period);
                if t == 0 || t == n + 1 {
                    0.0
                } else if t <= n {
                    y[(t - 1) as usize]
                } else {
                    -y[(period - t - 1) as usize]
                }
            })
            .collect()
    }

    fn stencil_factor(&self) -> f64 {
        match self.layout {
            Layout::RadialOdd => 4.0 * std::f64::consts::PI,
            _ => 1.0,
        }
    }

    /// `Ay`, evaluated from differences `y_{i±m} − y_i` so that rounding
    /// errors scale with the first rather than the second difference.
    pub fn apply_stiffness(&self, y: &[f64]) -> Vec<f64> {
        if self.layout == Layout::RadialVolume {
            return self.stiffness.matvec(y);
        }
        let k = self.stencil.len() - 1;
        let ext = self.odd_extension(y);
        let c = -self.stencil_factor() / self.h;
        (0..y.len())
            .map(|i| {
                let centre = i + 1 + k;
                let yc = ext[centre];
                let acc = ksum((1..=k).map(|m| {
                    self.stencil[m] * ((ext[centre + m] - yc) + (ext[centre - m] - yc))
                }));
                c * acc
            })
            .collect()
    }

    /// `∫|∇u|² = yᵀAy` as a weighted sum of squared differences, which keeps
    /// full relative precision even for sharply concentrated states.
    pub fn grad_sq(&self, y: &[f64]) -> f64 {
        if self.layout == Layout::RadialVolume {
            let two_pi = 2.0 * std::f64::consts::PI;
            let n = y.len();
            return ksum((0..n).map(|j| {
                let next = if j + 1 < n { y[j + 1] } else { 0.0 };
                two_pi * (j as f64 + 0.5) * (next - y[j]).powi(2)
            }));
        }
        let k = self.stencil.len() - 1;
        let n = y.len();
        let period = 2 * (n + 1);
        // One full period of the odd extension followed by k wrapped entries.
        let per: Vec<f64> = (0..period + k)
            .map(|t| {
                let t = t % period;
                if t == 0 || t == n + 1 {
                    0.0
                } else if t <= n {
                    y[t - 1]
                } else {
                    -y[period - t - 1]
                }
            })
            .collect();
        let value = |t: usize| per[t];
        let total = ksum((1..=k).map(|m| {
            let sm = ksum((0..period).map(|j| {
                let d = value(j + m) - value(j);
                d * d
            }));
            self.stencil[m] * sm
        }));
        self.stencil_factor() * total / (2.0 * self.h)
    }

    /// `∫u²` of the unknown vector.
    pub fn mass_of(&self, y: &[f64]) -> f64 {
        ksum(y.iter().zip(&self.mass).map(|(v, m)| m * v * v))
    }

    /// Discrete `Δu` in physical values.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let y = self.to_unknowns(u);
        let ay = self.apply_stiffness(&y);
        ay.iter()
            .zip(&self.mass)
            .zip(&self.scale)
            .map(|((a, m), s)| -s * a / m)
            .collect()
    }

    /// Unknown vector padded with its boundary values, as a uniformly spaced
    /// sequence starting at coordinate `origin`.
    fn padded(&self, y: &[f64]) -> (f64, Vec<f64>) {
        match (&self.layout, &self.spec.shape) {
            (Layout::Interval, DomainShape::Interval { lo, .. }) => {
                let mut v = Vec::with_capacity(y.len() + 2);
                v.push(0.0);
                v.extend_from_slice(y);
                v.push(0.0);
                (*lo, v)
            }
            (Layout::RadialOdd, _) => {
                let mut v = Vec::with_capacity(y.len() + 2);
                v.push(0.0);
                v.extend_from_slice(y);
                v.push(0.0);
                (0.0, v)
            }
            _ => {
                let mut v = y.to_vec();
                v.push(0.0);
                (0.0, v)
            }
        }
    }

    /// Interpolate the unknown field at coordinate `t` (zero outside the domain).
    pub fn interpolate_unknown(&self, y: &[f64], t: f64) -> f64 {
        let (origin, v) = self.padded(y);
        let s = (t - origin) / self.h;
        if self.is_radial() {
            if s < 0.0 || s > (v.len() - 1) as f64 {
                return 0.0;
            }
            // Reflect about the origin: odd for y = r u, even for finite volumes.
            let parity = if self.layout == Layout::RadialOdd { -1.0 } else { 1.0 };
            let mut ext = Vec::with_capacity(v.len() + 3);
            for j in (1..=3).rev() {
                ext.push(parity * v.get(j).copied().unwrap_or(0.0));
            }
            ext.extend_from_slice(&v);
            return lagrange4(&ext, s + 3.0);
        }
        if s < 0.0 || s > (v.len() - 1) as f64 {
            return 0.0;
        }
        lagrange4(&v, s)
    }
}

/// Values on the unknowns of a grid (physical values `u`).
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "grid function has {} values for {} unknowns",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_unknowns(grid: Arc<Grid>, y: &[f64]) -> Self {
        let values = grid.to_physical(y);
        Self { grid, values }
    }

    pub fn unknowns(&self) -> Vec<f64> {
        self.grid.to_unknowns(&self.values)
    }

    pub fn spacing(&self) -> f64 {
        self.grid.h
    }

    pub fn mass(&self) -> f64 {
        self.grid.mass_of(&self.unknowns())
    }

    /// Node of the largest value.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = j;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub location: Vec<f64>,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub wells: Vec<Well>,
}

impl PotentialSpec {
    pub fn single(location: Vec<f64>, exponent: f64) -> Self {
        Self {
            wells: vec![Well { location, exponent }],
        }
    }

    /// `V` at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.wells
            .iter()
            .map(|w| {
                let d: f64 = w.location.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                d.powf(w.exponent)
            })
            .product()
    }

    pub fn max_exponent(&self) -> f64 {
        self.wells.iter().map(|w| w.exponent).fold(f64::NEG_INFINITY, f64::max)
    }

    fn is_flattest(&self, w: &Well) -> bool {
        let p = self.max_exponent();
        (w.exponent - p).abs() <= 1e-12 * p
    }

    /// Indices of the flattest wells, split into interior and boundary ones.
    /// Needs no profile, unlike [`classify_wells`].
    pub fn flattest_split(&self, spec: &DomainSpec) -> (Vec<usize>, Vec<usize>) {
        let (mut interior, mut boundary) = (Vec::new(), Vec::new());
        for (i, w) in self.wells.iter().enumerate().filter(|(_, w)| self.is_flattest(w)) {
            if is_interior(spec, &w.location) {
                interior.push(i);
            } else {
                boundary.push(i);
            }
        }
        (interior, boundary)
    }

    fn check(&self, spec: &DomainSpec) -> Result<()> {
        if self.wells.is_empty() {
            return Err(Error::Configuration("potential needs at least one well".into()));
        }
        let tol = 1e-12 * spec.size();
        for (i, w) in self.wells.iter().enumerate() {
            if !(w.exponent > 0.0) || !w.exponent.is_finite() {
                return Err(Error::Configuration(format!(
                    "well {i}: exponent must be positive, got {}",
                    w.exponent
                )));
            }
            if w.location.len() != spec.dimension {
                return Err(Error::Configuration(format!(
                    "well {i}: location has {} coordinates in dimension {}",
                    w.location.len(),
                    spec.dimension
                )));
            }
            if spec.boundary_distance(&w.location) < -tol {
                return Err(Error::Domain(format!("well {i} lies outside the domain")));
            }
        }
        if matches!(spec.shape, DomainShape::Ball { .. })
            && (self.wells.len() != 1 || self.wells[0].location.iter().any(|v| v.abs() > tol))
        {
            return Err(Error::Domain(
                "radial grids support a single well at the origin".into(),
            ));
        }
        Ok(())
    }
}

fn is_interior(spec: &DomainSpec, x: &[f64]) -> bool {
    spec.boundary_distance(x) > 1e-12 * spec.size()
}

/// Sample `V` at the grid unknowns.
pub fn evaluate_potential(potential: &PotentialSpec, grid: &Arc<Grid>) -> Result<GridFunction> {
    potential.check(&grid.spec)?;
    let values = grid
        .coords
        .iter()
        .map(|&c| {
            if grid.is_radial() {
                let mut x = vec![0.0; grid.dimension()];
                x[0] = c;
                potential.eval(&x)
            } else {
                potential.eval(&[c])
            }
        })
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// Flatness constant; non-flattest wells carry an explicit infinite marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Kappa {
    Finite(f64),
    Infinite,
}

impl Kappa {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Kappa::Finite(v) => Some(*v),
            Kappa::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellInfo {
    pub index: usize,
    pub location: Vec<f64>,
    pub exponent: f64,
    pub flattest: bool,
    pub interior: bool,
    pub kappa: Kappa,
    /// Concentration constant of interior flattest wells.
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Some flattest well lies in the interior.
    Inner,
    /// All flattest wells lie on the boundary.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellClassification {
    pub p: f64,
    pub wells: Vec<WellInfo>,
    /// Indices of flattest interior wells.
    pub interior_flattest: Vec<usize>,
    /// Indices of flattest boundary wells.
    pub boundary_flattest: Vec<usize>,
    pub regime: Regime,
    /// Smallest concentration constant among interior flattest wells.
    pub lambda_min: Option<f64>,
    /// Several interior flattest wells share the smallest constant.
    pub tied: bool,
}

impl WellClassification {
    /// Well that governs concentration: the interior well with the smallest
    /// constant, otherwise the boundary well with the smallest flatness constant.
    pub fn dominant(&self) -> &WellInfo {
        let pick = |ids: &[usize], key: &dyn Fn(&WellInfo) -> f64| {
            ids.iter()
                .copied()
                .min_by(|&a, &b| key(&self.wells[a]).total_cmp(&key(&self.wells[b])))
        };
        let idx = match self.regime {
            Regime::Inner => pick(&self.interior_flattest, &|w| w.lambda.unwrap_or(f64::INFINITY)),
            Regime::Boundary => pick(&self.boundary_flattest, &|w| w.kappa.finite().unwrap_or(f64::INFINITY)),
        };
        &self.wells[idx.expect("classification always has a flattest well")]
    }
}

/// `λ = (p κ ∫|x|^p Q² / (2 ∫Q²))^{1/(p+2)}`.
pub fn concentration_constant(p: f64, kappa: f64, profile: &RadialProfile) -> Result<f64> {
    let moment = profile.weighted_moment(p)?;
    Ok((p * kappa * moment / (2.0 * profile.mass_sq)).powf(1.0 / (p + 2.0)))
}

/// Split the wells into flattest interior and boundary sets and compute their constants.
pub fn classify_wells(
    potential: &PotentialSpec,
    domain: &DomainSpec,
    profile: &RadialProfile,
) -> Result<WellClassification> {
    potential.check(domain)?;
    if profile.dimension != domain.dimension {
        return Err(Error::Precondition(format!(
            "profile dimension {} differs from domain dimension {}",
            profile.dimension, domain.dimension
        )));
    }
    let p = potential.max_exponent();
    let mut wells = Vec::with_capacity(potential.wells.len());
    let mut interior_flattest = Vec::new();
    let mut boundary_flattest = Vec::new();
    for (i, w) in potential.wells.iter().enumerate() {
        let flattest = potential.is_flattest(w);
        let interior = is_interior(domain, &w.location);
        let kappa = if flattest {
            let k: f64 = potential
                .wells
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, o)| {
                    let d: f64 = o
                        .location
                        .iter()
                        .zip(&w.location)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    d.powf(o.exponent)
                })
                .product();
            if !(k > 0.0) {
                return Err(Error::DegenerateConfiguration(format!(
                    "flattest well {i} coincides with another well (κ = 0)"
                )));
            }
            Kappa::Finite(k)
        } else {
            Kappa::Infinite
        };
        let lambda = match (flattest && interior, kappa) {
            (true, Kappa::Finite(k)) => Some(concentration_constant(p, k, profile)?),
            _ => None,
        };
        if flattest {
            if interior {
                interior_flattest.push(i);
            } else {
                boundary_flattest.push(i);
            }
        }
        wells.push(WellInfo {
            index: i,
            location: w.location.clone(),
            exponent: w.exponent,
            flattest,
            interior,
            kappa,
            lambda,
        });
    }
    let regime = if interior_flattest.is_empty() {
        Regime::Boundary
    } else {
        Regime::Inner
    };
    let lambdas: Vec<f64> = interior_flattest.iter().filter_map(|&i| wells[i].lambda).collect();
    let lambda_min = lambdas.iter().copied().reduce(f64::min);
    let tied = lambda_min.is_some_and(|m| lambdas.iter().filter(|&&l| (l - m).abs() <= 1e-12 * m).count() > 1);
    Ok(WellClassification {
        p,
        wells,
        interior_flattest,
        boundary_flattest,
        regime,
        lambda_min,
        tied,
    })
}
