//! Spatial patterns that scale the global temperature path to cells.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::axis::{Cube, Unit};
use crate::error::{Error, Result};
use crate::grid::{csv_err, GridSpec, RegionMap};

/// Lowest allowed precipitation change (%).
pub const MIN_PRECIP_CHANGE: f64 = -100.0;

/// Per-cell local warming per degree of global warming, and precipitation
/// change (%) per degree.
#[derive(Debug, Clone, PartialEq)]
pub struct EsmPattern {
    pub id: String,
    pub grid: GridSpec,
    pub t_scale: Vec<f64>,
    pub p_scale: Vec<f64>,
}

impl EsmPattern {
    /// Area-weighted mean of the temperature scaling over every cell.
    pub fn mean_t_scale(&self) -> f64 {
        let areas = self.grid.areas();
        let total: f64 = areas.iter().sum();
        areas.iter().zip(&self.t_scale).map(|(a, s)| a * s).sum::<f64>() / total
    }

    pub fn validate(&self, map: &RegionMap) -> Result<()> {
        map.ensure_same_grid(&self.grid)?;
        let n = self.grid.n_cells();
        if self.t_scale.len() != n || self.p_scale.len() != n {
            return Err(Error::invalid(format!("pattern {} does not cover the grid", self.id)));
        }
        if let Some(c) = map.land_cells().into_iter().find(|&c| !(self.t_scale[c] > 0.0)) {
            return Err(Error::invalid(format!(
                "pattern {} has non-positive temperature scaling on land cell {c}",
                self.id
            )));
        }
        let m = self.mean_t_scale();
        if (m - 1.0).abs() > 0.05 {
            return Err(Error::invalid(format!(
                "pattern {} area-weighted temperature scaling is {m:.4}, expected 1 ± 0.05",
                self.id
            )));
        }
        Ok(())
    }
}

/// Cell ΔT = t_scale · ΔT_global, ΔP = p_scale · ΔT_global clamped at −100 %.
pub fn pattern_scale(global: &[f64], pattern: &EsmPattern) -> (Cube, Cube) {
    let n = pattern.t_scale.len();
    let mut dt = Cube::zeros(global.len(), n);
    let mut dp = Cube::zeros(global.len(), n);
    for (y, &g) in global.iter().enumerate() {
        for c in 0..n {
            dt.data[y * n + c] = pattern.t_scale[c] * g;
            dp.data[y * n + c] = (pattern.p_scale[c] * g).max(MIN_PRECIP_CHANGE);
        }
    }
    (dt, dp)
}

#[derive(Debug, Deserialize)]
struct PatternRow {
    pattern: String,
    cell: usize,
    t_scale: f64,
    p_scale: f64,
}

/// Read `pattern,cell,t_scale,p_scale`. A file may hold several patterns;
/// every pattern must list every cell of `grid`.
pub fn load_patterns(path: &Path, grid: &GridSpec) -> Result<Vec<EsmPattern>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let n = grid.n_cells();
    let mut found: BTreeMap<String, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<PatternRow>().enumerate() {
        let row = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        if row.cell >= n {
            return Err(Error::GridMismatch {
                expected: grid.id(),
                found: format!("cell {} in {}", row.cell, path.display()),
            });
        }
        if !row.t_scale.is_finite() || !row.p_scale.is_finite() {
            return Err(Error::parse(path, i + 2, "non-finite scaling"));
        }
        let e = found
            .entry(row.pattern)
            .or_insert_with(|| (vec![f64::NAN; n], vec![f64::NAN; n], 0));
        if e.0[row.cell].is_nan() {
            e.2 += 1;
        }
        e.0[row.cell] = row.t_scale;
        e.1[row.cell] = row.p_scale;
    }
    if found.is_empty() {
        return Err(Error::parse(path, 1, "no pattern rows"));
    }
    found
        .into_iter()
        .map(|(id, (t, p, count))| {
            if count != n {
                return Err(Error::GridMismatch {
                    expected: format!("{n} cells"),
                    found: format!("{count} cells for pattern {id} in {}", path.display()),
                });
            }
            Ok(EsmPattern {
                id,
                grid: *grid,
                t_scale: t,
                p_scale: p,
            })
        })
        .collect()
}

pub fn write_pattern(path: &Path, pattern: &EsmPattern) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "pattern,cell,t_scale,p_scale").unwrap();
    for c in 0..pattern.t_scale.len() {
        writeln!(out, "{},{c},{},{}", pattern.id, pattern.t_scale[c], pattern.p_scale[c]).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Units of the two scaled outputs.
pub const UNITS: (Unit, Unit) = (Unit::Celsius, Unit::Percent);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(10.0, 14.0, 0.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn unit_pattern_copies_global() {
        let g = grid();
        let p = EsmPattern {
            id: "u".into(),
            grid: g,
            t_scale: vec![1.0; g.n_cells()],
            p_scale: vec![0.0; g.n_cells()],
        };
        let (dt, dp) = pattern_scale(&[0.0, 1.5, 2.0], &p);
        assert!(dt.year(0).iter().all(|&v| v == 0.0));
        assert!(dt.year(1).iter().all(|&v| v == 1.5));
        assert!(dp.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn drying_is_clamped() {
        let g = grid();
        let p = EsmPattern {
            id: "d".into(),
            grid: g,
            t_scale: vec![1.0; g.n_cells()],
            p_scale: vec![-60.0; g.n_cells()],
        };
        let (_, dp) = pattern_scale(&[3.0], &p);
        assert!(dp.data.iter().all(|&v| v == -100.0));
    }

    proptest! {
        #[test]
        fn weighted_mean_ratio_matches_pattern_mean(
            scales in proptest::collection::vec(0.2f64..3.0, 8),
            global in 0.1f64..6.0,
        ) {
            let g = grid();
            let p = EsmPattern { id: "r".into(), grid: g, t_scale: scales, p_scale: vec![1.0; 8] };
            let (dt, _) = pattern_scale(&[global], &p);
            let areas = g.areas();
            let total: f64 = areas.iter().sum();
            let m: f64 = areas.iter().zip(dt.year(0)).map(|(a, v)| a * v).sum::<f64>() / total;
            prop_assert!((m / global - p.mean_t_scale()).abs() <= 1e-9 * p.mean_t_scale());
        }

        #[test]
        fn scaling_is_linear(a in 0.1f64..4.0, global in 0.0f64..3.0) {
            let g = grid();
            let p = EsmPattern { id: "l".into(), grid: g, t_scale: vec![1.3; 8], p_scale: vec![2.0; 8] };
            let (t1, p1) = pattern_scale(&[global], &p);
            let (t2, p2) = pattern_scale(&[a * global], &p);
            for c in 0..8 {
                prop_assert!((t2.data[c] - a * t1.data[c]).abs() < 1e-12);
                prop_assert!((p2.data[c] - a * p1.data[c]).abs() < 1e-12);
            }
        }
    }
}
