//! Composition of base functions and extensions into full loss fields.

use std::collections::HashMap;

use crate::axis::Cube;
use crate::climate::ClimateField;
use crate::damage::extensions::{apply_persistence, downscale_global, regional_to_grid, update_rescale};
use crate::damage::functions::{dice2016, kompas_cell, weitzman_global, Quadratic};
use crate::damage::params::DamageParams;
use crate::damage::variant::{Base, DamageSpec, Target, VariantId};
use crate::error::{Error, Result};
use crate::grid::{partition, Level, RegionMap};

/// Per-cell annual loss fractions and dollar losses (fraction × GDP).
#[derive(Debug, Clone, PartialEq)]
pub struct LossField {
    pub variant: VariantId,
    pub fraction: Cube,
    pub value: Cube,
}

impl LossField {
    fn from_fraction(variant: VariantId, fraction: Cube, gdp: &Cube) -> Self {
        let value = fraction.data.iter().zip(&gdp.data).map(|(f, g)| f * g).collect();
        Self {
            variant,
            value: Cube::from_vec(fraction.years, fraction.cells, value),
            fraction,
        }
    }
}

struct RegionCells {
    cells: Vec<usize>,
    rice: Quadratic,
    panel: Quadratic,
}

/// Damage calibration bound to one region map.
pub struct DamageModel {
    params: DamageParams,
    regions: Vec<RegionCells>,
    land: Vec<usize>,
    n_cells: usize,
}

#[derive(Default)]
struct Intermediates {
    regional: HashMap<(bool, bool), Cube>,
    lambda: Option<(Cube, Vec<f64>)>,
    mu: Option<(Cube, Vec<f64>)>,
}

impl DamageModel {
    pub fn new(params: DamageParams, map: &RegionMap) -> Result<Self> {
        params.validate(map)?;
        let regions = partition(map, Level::Region)
            .into_iter()
            .map(|(code, cells)| {
                let rice = *params.rice.get(&code).ok_or_else(|| Error::UnknownKey {
                    kind: "rice region",
                    key: code.clone(),
                })?;
                let panel = *params.panel.get(&code).ok_or_else(|| Error::UnknownKey {
                    kind: "kw region",
                    key: code.clone(),
                })?;
                Ok(RegionCells { cells, rice, panel })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            regions,
            land: map.land_cells(),
            n_cells: map.n_cells(),
        })
    }

    pub fn params(&self) -> &DamageParams {
        &self.params
    }

    fn check(&self, climate: &ClimateField, gdp: &Cube) -> Result<()> {
        if climate.dt.cells != self.n_cells || gdp.cells != self.n_cells || gdp.years != climate.dt.years {
            return Err(Error::GridMismatch {
                expected: format!("{}×{}", climate.dt.years, self.n_cells),
                found: format!("climate {}×{}, gdp {}×{}", climate.dt.years, climate.dt.cells, gdp.years, gdp.cells),
            });
        }
        Ok(())
    }

    fn kompas(&self, climate: &ClimateField, uhi: bool) -> Cube {
        let mut out = Cube::zeros(climate.dt.years, self.n_cells);
        for y in 0..out.years {
            for &c in &self.land {
                out.set(y, c, kompas_cell(climate.effective(y, c, uhi), self.params.kompas[c]));
            }
        }
        out
    }

    /// Regional quadratic at the GDP-weighted regional mean temperature,
    /// distributed to cells by their own response.
    fn regional(&self, climate: &ClimateField, gdp: &Cube, panel: bool, uhi: bool) -> Result<Cube> {
        let mut out = Cube::zeros(climate.dt.years, self.n_cells);
        for y in 0..out.years {
            let g = gdp.year(y);
            for r in &self.regions {
                let q = if panel { r.panel } else { r.rice };
                let temps: Vec<f64> = r.cells.iter().map(|&c| climate.effective(y, c, uhi)).collect();
                let gdps: Vec<f64> = r.cells.iter().map(|&c| g[c]).collect();
                let total: f64 = gdps.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::Degenerate("region has zero GDP".into()));
                }
                let mean_t = temps.iter().zip(&gdps).map(|(t, g)| t * g).sum::<f64>() / total;
                let response: Vec<f64> = temps.iter().map(|&t| q.response(t)).collect();
                let cells = regional_to_grid(q.fraction(mean_t), &response, &gdps)?;
                for (&c, f) in r.cells.iter().zip(cells) {
                    out.set(y, c, f);
                }
            }
        }
        Ok(out)
    }

    fn regional_cached<'a>(
        &self,
        cache: &'a mut Intermediates,
        climate: &ClimateField,
        gdp: &Cube,
        panel: bool,
        uhi: bool,
    ) -> Result<&'a Cube> {
        if !cache.regional.contains_key(&(panel, uhi)) {
            let c = self.regional(climate, gdp, panel, uhi)?;
            cache.regional.insert((panel, uhi), c);
        }
        Ok(&cache.regional[&(panel, uhi)])
    }

    /// The RICE field rescaled to the DICE global loss each year, and the
    /// per-year multiplier.
    fn dice_update(&self, rice: &Cube, climate: &ClimateField, gdp: &Cube) -> Result<(Cube, Vec<f64>)> {
        let mut out = Cube::zeros(rice.years, self.n_cells);
        let mut lambda = Vec::with_capacity(rice.years);
        for y in 0..rice.years {
            let f: Vec<f64> = self.land.iter().map(|&c| rice.get(y, c)).collect();
            let g: Vec<f64> = self.land.iter().map(|&c| gdp.get(y, c)).collect();
            let target = dice2016(climate.global[y].max(0.0), self.params.dice_a);
            let (scaled, l) = update_rescale(&f, target, &g)?;
            for (&c, v) in self.land.iter().zip(scaled) {
                out.set(y, c, v);
            }
            lambda.push(l);
        }
        Ok((out, lambda))
    }

    /// The global catastrophic loss placed on cells in proportion to the
    /// same-year RICE dollar losses, and the per-year multiplier on the
    /// RICE fractions.
    fn weitzman_downscale(&self, rice: &Cube, climate: &ClimateField, gdp: &Cube) -> Result<(Cube, Vec<f64>)> {
        let mut out = Cube::zeros(rice.years, self.n_cells);
        let mut mu = Vec::with_capacity(rice.years);
        for y in 0..rice.years {
            let total_gdp: f64 = self.land.iter().map(|&c| gdp.get(y, c)).sum();
            let global_loss = weitzman_global(climate.global[y], &self.params.weitzman) * total_gdp;
            let weights: Vec<f64> = self.land.iter().map(|&c| rice.get(y, c) * gdp.get(y, c)).collect();
            let cell_loss = downscale_global(global_loss, &weights)?;
            let wsum: f64 = weights.iter().sum();
            for (&c, loss) in self.land.iter().zip(cell_loss) {
                let g = gdp.get(y, c);
                out.set(y, c, if g > 0.0 { (loss / g).min(1.0) } else { 0.0 });
            }
            mu.push(if global_loss == 0.0 { 0.0 } else { global_loss / wsum });
        }
        Ok((out, mu))
    }

    fn scaled(&self, field: &Cube, factor: &[f64]) -> Cube {
        let mut out = Cube::zeros(field.years, field.cells);
        for y in 0..field.years {
            for &c in &self.land {
                out.set(y, c, (factor[y] * field.get(y, c)).min(1.0));
            }
        }
        out
    }

    fn persist(&self, field: Cube, rho: f64) -> Cube {
        let mut out = field;
        for &c in &self.land {
            let d = apply_persistence(&out.cell_series(c), rho);
            for (y, v) in d.into_iter().enumerate() {
                out.set(y, c, v);
            }
        }
        out
    }

    fn fraction(
        &self,
        spec: &DamageSpec,
        climate: &ClimateField,
        gdp: &Cube,
        cache: &mut Intermediates,
    ) -> Result<Cube> {
        let v = spec.variant;
        let uhi = v.uhi();
        let field = match (v.base(), v.target()) {
            (Base::Kompas, _) => self.kompas(climate, uhi),
            (Base::Panel, _) => self.regional_cached(cache, climate, gdp, true, uhi)?.clone(),
            (Base::Rice, Target::None) => self.regional_cached(cache, climate, gdp, false, uhi)?.clone(),
            (Base::Rice, Target::Dice) => {
                if cache.lambda.is_none() {
                    let rice = self.regional_cached(cache, climate, gdp, false, false)?.clone();
                    cache.lambda = Some(self.dice_update(&rice, climate, gdp)?);
                }
                let (rd, lambda) = cache.lambda.as_ref().unwrap();
                if uhi {
                    let lambda = lambda.clone();
                    let ru = self.regional_cached(cache, climate, gdp, false, true)?;
                    self.scaled(ru, &lambda)
                } else {
                    rd.clone()
                }
            }
            (Base::Rice, Target::Weitzman) => {
                if cache.mu.is_none() {
                    let rice = self.regional_cached(cache, climate, gdp, false, false)?.clone();
                    cache.mu = Some(self.weitzman_downscale(&rice, climate, gdp)?);
                }
                let (w, mu) = cache.mu.as_ref().unwrap();
                if uhi {
                    let mu = mu.clone();
                    let ru = self.regional_cached(cache, climate, gdp, false, true)?;
                    self.scaled(ru, &mu)
                } else {
                    w.clone()
                }
            }
        };
        Ok(if v.persistence() { self.persist(field, spec.rho) } else { field })
    }

    pub fn evaluate(&self, spec: &DamageSpec, climate: &ClimateField, gdp: &Cube) -> Result<LossField> {
        Ok(self.evaluate_many(std::slice::from_ref(spec), climate, gdp)?.remove(0))
    }

    /// Evaluate several variants on one climate, sharing intermediate fields.
    pub fn evaluate_many(&self, specs: &[DamageSpec], climate: &ClimateField, gdp: &Cube) -> Result<Vec<LossField>> {
        self.check(climate, gdp)?;
        let mut cache = Intermediates::default();
        specs
            .iter()
            .map(|s| Ok(LossField::from_fraction(s.variant, self.fraction(s, climate, gdp, &mut cache)?, gdp)))
            .collect()
    }
}
