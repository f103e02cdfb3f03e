//! Two-box (surface + deep ocean) energy balance, stepped annually.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmParams {
    /// Forcing for doubled CO2 (W/m²).
    pub f2x: f64,
    /// Heat capacities (W yr m⁻² K⁻¹).
    pub c_surface: f64,
    pub c_deep: f64,
    /// Surface–deep exchange coefficient (W m⁻² K⁻¹).
    pub gamma: f64,
    /// Surface warming above preindustrial in the first year.
    pub offset: f64,
    /// Deep-ocean warming above preindustrial in the first year.
    pub deep_initial: f64,
}

impl Default for EbmParams {
    fn default() -> Self {
        Self {
            f2x: 3.71,
            c_surface: 9.0,
            c_deep: 100.0,
            gamma: 1.5,
            offset: 0.95,
            deep_initial: 0.3,
        }
    }
}

impl EbmParams {
    pub fn validate(&self, ecs: f64) -> Result<()> {
        if !(self.c_surface > 0.0 && self.c_deep > 0.0) {
            return Err(Error::UnstableModel(format!(
                "heat capacities must be positive (surface {}, deep {})",
                self.c_surface, self.c_deep
            )));
        }
        if !(self.gamma >= 0.0) || !(self.f2x > 0.0) {
            return Err(Error::UnstableModel("exchange coefficient must be ≥ 0 and F2x > 0".into()));
        }
        if !(ecs > 0.0) {
            return Err(Error::OutOfRange {
                what: "climate sensitivity",
                value: ecs,
            });
        }
        let lambda = self.f2x / ecs;
        if (lambda + self.gamma) / self.c_surface >= 1.0 || self.gamma / self.c_deep >= 1.0 {
            return Err(Error::UnstableModel(format!(
                "annual step too long for surface capacity {} at sensitivity {ecs}",
                self.c_surface
            )));
        }
        Ok(())
    }
}

/// Surface temperature anomaly per year for the given forcing series.
pub fn simulate_global_temperature(forcing: &[f64], ecs: f64, p: &EbmParams) -> Result<Vec<f64>> {
    p.validate(ecs)?;
    let lambda = p.f2x / ecs;
    let mut t = p.offset;
    let mut d = p.deep_initial;
    let mut out = Vec::with_capacity(forcing.len());
    for &f in forcing {
        out.push(t);
        let exchange = p.gamma * (t - d);
        let dt = (f - lambda * t - exchange) / p.c_surface;
        d += exchange / p.c_deep;
        t += dt;
    }
    Ok(out)
}
