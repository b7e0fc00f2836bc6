//! JSON form of a ground-state profile.

use serde::{Deserialize, Serialize};

use kirchhoff_core::{Error, RadialProfile};

/// Exponential tail used beyond the tabulated radii.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailDocument {
    pub matching_radius: f64,
    pub truncation_radius: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub dimension: usize,
    pub peak_value: f64,
    pub mass_sq: f64,
    pub gn_best: f64,
    pub pohozaev_residuals: [f64; 2],
    pub decay_rate: f64,
    pub beta_star_unit: f64,
    pub tail: TailDocument,
    /// `[r, Q(r), Q'(r)]` on a uniform radial grid starting at 0.
    pub grid: Vec<[f64; 3]>,
}

impl From<&RadialProfile> for ProfileDocument {
    fn from(p: &RadialProfile) -> Self {
        Self {
            dimension: p.dimension,
            peak_value: p.peak_value,
            mass_sq: p.mass_sq,
            gn_best: p.gn_best,
            pohozaev_residuals: p.pohozaev_residuals,
            decay_rate: p.decay_rate,
            beta_star_unit: p.beta_star_unit,
            tail: TailDocument {
                matching_radius: p.matching_radius,
                truncation_radius: p.truncation_radius,
                amplitude: p.tail_amplitude,
            },
            grid: p
                .radii()
                .zip(p.values.iter().zip(&p.derivatives))
                .map(|(r, (&q, &d))| [r, q, d])
                .collect(),
        }
    }
}

impl ProfileDocument {
    pub fn to_profile(&self) -> Result<RadialProfile, Error> {
        let dr = self.grid.get(1).map(|g| g[0]).unwrap_or(f64::NAN);
        let p = RadialProfile {
            dimension: self.dimension,
            peak_value: self.peak_value,
            dr,
            values: self.grid.iter().map(|g| g[1]).collect(),
            derivatives: self.grid.iter().map(|g| g[2]).collect(),
            matching_radius: self.tail.matching_radius,
            truncation_radius: self.tail.truncation_radius,
            decay_rate: self.decay_rate,
            tail_amplitude: self.tail.amplitude,
            mass_sq: self.mass_sq,
            gn_best: self.gn_best,
            beta_star_unit: self.beta_star_unit,
            pohozaev_residuals: self.pohozaev_residuals,
        };
        p.check()?;
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}
