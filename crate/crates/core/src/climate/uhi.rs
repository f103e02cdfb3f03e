//! Urban heat island warming from cell population.

use serde::{Deserialize, Serialize};

use crate::axis::Cube;
use crate::scenario::UrbanMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhiParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for UhiParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 5.0 }
    }
}

/// max(0, α·log10(pop) − β) for urban cells, 0 otherwise.
pub fn uhi_increment(pop: f64, urban: bool, p: &UhiParams) -> f64 {
    if !urban || pop <= 0.0 {
        return 0.0;
    }
    (p.alpha * pop.log10() - p.beta).max(0.0)
}

pub fn uhi_cube(mask: &UrbanMask, p: &UhiParams) -> Cube {
    let data = mask
        .population
        .data
        .iter()
        .zip(&mask.urban)
        .map(|(&pop, &u)| uhi_increment(pop, u, p))
        .collect();
    Cube::from_vec(mask.population.years, mask.population.cells, data)
}
