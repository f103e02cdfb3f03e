use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Triangular distribution of equilibrium climate sensitivity (°C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcsDistribution {
    pub min: f64,
    pub mode: f64,
    pub max: f64,
}

impl Default for EcsDistribution {
    fn default() -> Self {
        Self {
            min: 2.5,
            mode: 3.0,
            max: 4.0,
        }
    }
}

impl EcsDistribution {
    pub fn new(min: f64, mode: f64, max: f64) -> Result<Self> {
        let d = Self { min, mode, max };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min < self.mode && self.mode < self.max && self.max.is_finite()) {
            return Err(Error::invalid(format!(
                "climate sensitivity needs 0 < min < mode < max, got ({}, {}, {})",
                self.min, self.mode, self.max
            )));
        }
        Ok(())
    }

    /// CDF value at the mode.
    pub fn mode_cdf(&self) -> f64 {
        (self.mode - self.min) / (self.max - self.min)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let (a, c, b) = (self.min, self.mode, self.max);
        let u = u.clamp(0.0, 1.0);
        if u < self.mode_cdf() {
            a + (u * (b - a) * (c - a)).sqrt()
        } else {
            b - ((1.0 - u) * (b - a) * (b - c)).sqrt()
        }
    }

    pub fn mean(&self) -> f64 {
        (self.min + self.mode + self.max) / 3.0
    }

    pub fn variance(&self) -> f64 {
        let (a, c, b) = (self.min, self.mode, self.max);
        (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0
    }
}

pub fn sample_ecs<R: Rng + ?Sized>(dist: &EcsDistribution, rng: &mut R) -> f64 {
    dist.quantile(rng.gen::<f64>())
}
