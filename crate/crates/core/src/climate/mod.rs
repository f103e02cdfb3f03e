//! Emissions → concentrations → forcing → global warming, scaled to cells.

pub mod carbon;
pub mod ebm;
pub mod ecs;
pub mod forcing;
pub mod pattern;
pub mod uhi;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::axis::Cube;
use crate::error::{Error, Result};
use crate::rng::{stream, Module};
use crate::scenario::EmissionsPathway;

pub use carbon::{concentrations, CarbonParams, Concentrations};
pub use ebm::{simulate_global_temperature, EbmParams};
pub use ecs::{sample_ecs, EcsDistribution};
pub use forcing::{forcing, ForcingParams};
pub use pattern::{load_patterns, pattern_scale, EsmPattern};
pub use uhi::{uhi_cube, uhi_increment, UhiParams};

/// Climate calibration, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClimateParams {
    pub ecs: EcsDistribution,
    pub carbon: CarbonParams,
    pub forcing: ForcingParams,
    pub ebm: EbmParams,
    pub uhi: UhiParams,
}

impl ClimateParams {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: ClimateParams = toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(path, line, e.message().to_string())
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.ecs.validate()?;
        self.carbon.validate()?;
        self.ebm.validate(self.ecs.min)?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("climate params serialize")
    }
}

/// Total forcing path for a pathway; shared by every realization.
pub fn scenario_forcing(emissions: &EmissionsPathway, p: &ClimateParams) -> Result<Vec<f64>> {
    let conc = concentrations(emissions, &p.carbon);
    forcing(&conc, &emissions.other_wm2, &p.forcing)
}

/// The random draws that define one ensemble member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub ecs: f64,
    pub pattern: usize,
}

/// ECS and pattern are drawn independently from their own streams; the
/// same seed and realization give the same draws in every scenario.
pub fn draw_realization(seed: u64, realization: u64, ecs: &EcsDistribution, n_patterns: usize) -> Draw {
    let mut r_ecs = stream(seed, realization, Module::ClimateSensitivity);
    let mut r_pat = stream(seed, realization, Module::Pattern);
    Draw {
        ecs: sample_ecs(ecs, &mut r_ecs),
        pattern: r_pat.gen_range(0..n_patterns.max(1)),
    }
}

/// Annual per-cell climate for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateField {
    pub global: Vec<f64>,
    pub dt: Cube,
    pub dp: Cube,
    pub uhi: Cube,
}

impl ClimateField {
    pub fn new(global: Vec<f64>, pattern: &EsmPattern, uhi: Cube) -> Result<Self> {
        let (dt, dp) = pattern_scale(&global, pattern);
        if uhi.years != dt.years || uhi.cells != dt.cells {
            return Err(Error::GridMismatch {
                expected: format!("{}×{}", dt.years, dt.cells),
                found: format!("{}×{} UHI cube", uhi.years, uhi.cells),
            });
        }
        Ok(Self { global, dt, dp, uhi })
    }

    /// Local temperature with the urban increment added when `with_uhi`.
    #[inline]
    pub fn effective(&self, year: usize, cell: usize, with_uhi: bool) -> f64 {
        effective_temperature(self.dt.get(year, cell), self.uhi.get(year, cell), with_uhi)
    }
}

#[inline]
pub fn effective_temperature(dt: f64, uhi: f64, with_uhi: bool) -> f64 {
    if with_uhi {
        dt + uhi
    } else {
        dt
    }
}
