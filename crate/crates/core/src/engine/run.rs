//! Ensemble execution.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::axis::{Cube, TimeAxis};
use crate::climate::{
    draw_realization, load_patterns, scenario_forcing, simulate_global_temperature, uhi_cube, ClimateField,
    ClimateParams, EsmPattern,
};
use crate::damage::{DamageModel, DamageParams, DamageSpec, LossField};
use crate::engine::config::{validate_config, RunConfig};
use crate::engine::store::{write_store, StoreData};
use crate::error::{Error, Result};
use crate::grid::{load_grid, Level, RegionMap, GLOBAL_KEY};
use crate::metrics::present_value;
use crate::scenario::{
    bundle_from_parts, load_emissions, load_national_series, load_shares, ScenarioBundle, ScenarioId,
    SocioScenario,
};

/// Inputs shared by all scenarios of a configuration.
pub struct Assets {
    pub map: RegionMap,
    pub patterns: Vec<EsmPattern>,
    pub climate: ClimateParams,
    pub damage: DamageParams,
    pub socio: SocioScenario,
}

impl Assets {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let map = load_grid(&cfg.grid)?;
        let mut patterns = Vec::new();
        for p in &cfg.patterns {
            patterns.extend(load_patterns(p, map.grid())?);
        }
        for p in &patterns {
            p.validate(&map)?;
        }
        let climate = ClimateParams::load(&cfg.climate)?;
        let damage = DamageParams::load(&cfg.calibration_files(), &map)?;
        let axis = cfg.axis();
        let socio = SocioScenario {
            ssp: cfg.socio.ssp.clone(),
            axis,
            national: load_national_series(&cfg.socio.national, axis)?,
            base: load_shares(&cfg.socio.base_shares, &map)?,
            target: load_shares(&cfg.socio.target_shares, &map)?,
        };
        socio.validate(&map)?;
        Ok(Self {
            map,
            patterns,
            climate,
            damage,
            socio,
        })
    }

    pub fn scenario(&self, cfg: &RunConfig, id: &ScenarioId) -> Result<ScenarioBundle> {
        let emissions = load_emissions(cfg.emissions_path(id)?, id.clone())?;
        if emissions.axis != cfg.axis() {
            return Err(Error::invalid(format!(
                "emissions for {id} cover {}–{}, expected 2010–2100",
                emissions.axis.start,
                emissions.axis.end()
            )));
        }
        bundle_from_parts(emissions, self.socio.clone(), &self.map, cfg.urban_threshold)
    }
}

/// Aggregation keys stored with every run, in storage order.
pub fn aggregate_keys(map: &RegionMap) -> Vec<(String, Vec<usize>)> {
    let mut keys = vec![(GLOBAL_KEY.to_string(), map.land_cells())];
    for level in [Level::Region, Level::Country] {
        for (k, cells) in crate::grid::partition(map, level) {
            keys.push((format!("{}:{k}", level.as_str()), cells));
        }
    }
    keys
}

/// Everything needed to regenerate one realization's fields.
pub struct Realizer {
    pub axis: TimeAxis,
    pub map: RegionMap,
    pub patterns: Vec<EsmPattern>,
    pub climate: ClimateParams,
    pub model: DamageModel,
    pub specs: Vec<DamageSpec>,
    pub forcing: Vec<f64>,
    pub gdp: Cube,
    pub population: Cube,
    pub uhi: Cube,
    pub seed: u64,
}

impl Realizer {
    pub fn new(cfg: &RunConfig, assets: Assets, bundle: &ScenarioBundle) -> Result<Self> {
        let forcing = scenario_forcing(&bundle.emissions, &assets.climate)?;
        let uhi = uhi_cube(&bundle.urban, &assets.climate.uhi);
        if assets.patterns.is_empty() {
            return Err(Error::invalid("no climate patterns loaded"));
        }
        Ok(Self {
            axis: cfg.axis(),
            model: DamageModel::new(assets.damage, &assets.map)?,
            map: assets.map,
            patterns: assets.patterns,
            climate: assets.climate,
            specs: cfg.damage_specs()?,
            forcing,
            gdp: bundle.gdp.clone(),
            population: bundle.population().clone(),
            uhi,
            seed: cfg.seed,
        })
    }

    pub fn draw(&self, r: usize) -> crate::climate::Draw {
        draw_realization(self.seed, r as u64, &self.climate.ecs, self.patterns.len())
    }

    pub fn global_path(&self, ecs: f64) -> Result<Vec<f64>> {
        simulate_global_temperature(&self.forcing, ecs, &self.climate.ebm)
    }

    pub fn climate_from(&self, global: Vec<f64>, pattern: usize) -> Result<ClimateField> {
        ClimateField::new(global, &self.patterns[pattern], self.uhi.clone())
    }

    pub fn losses(&self, climate: &ClimateField, specs: &[DamageSpec]) -> Result<Vec<LossField>> {
        self.model.evaluate_many(specs, climate, &self.gdp)
    }
}

/// Results of one realization.
pub struct RealizationOutput {
    pub ecs: f64,
    pub pattern: u32,
    pub global: Vec<f64>,
    /// Per variant: `keys × years` aggregated annual losses.
    pub aggregates: Vec<Vec<f64>>,
    /// Per variant: per-cell present value of losses.
    pub cell_pv: Vec<Vec<f64>>,
}

fn realize(rz: &Realizer, keys: &[(String, Vec<usize>)], rate: f64, r: usize) -> Result<RealizationOutput> {
    let draw = rz.draw(r);
    let global = rz.global_path(draw.ecs)?;
    let climate = rz.climate_from(global.clone(), draw.pattern)?;
    let losses = rz.losses(&climate, &rz.specs)?;
    let years = rz.axis.len;
    let mut aggregates = Vec::with_capacity(losses.len());
    let mut cell_pv = Vec::with_capacity(losses.len());
    for lf in &losses {
        let mut agg = vec![0.0; keys.len() * years];
        for (ki, (_, cells)) in keys.iter().enumerate() {
            for y in 0..years {
                let row = lf.value.year(y);
                agg[ki * years + y] = cells.iter().map(|&c| row[c]).sum();
            }
        }
        aggregates.push(agg);
        cell_pv.push((0..lf.value.cells).map(|c| present_value(&lf.value.cell_series(c), rate)).collect());
    }
    Ok(RealizationOutput {
        ecs: draw.ecs,
        pattern: draw.pattern as u32,
        global,
        aggregates,
        cell_pv,
    })
}

/// Options that affect execution but not results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

/// Run one scenario and write its store under `out_dir/<run_name>-<scenario>`.
pub fn run_ensemble(cfg: &RunConfig, scenario: &ScenarioId, out_dir: &Path, opts: &RunOptions) -> Result<PathBuf> {
    let diags = validate_config(cfg);
    if !diags.is_empty() {
        return Err(Error::invalid(
            diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "),
        ));
    }
    let config_hash = cfg.config_hash()?;
    let assets = Assets::load(cfg)?;
    let bundle = assets.scenario(cfg, scenario)?;
    let rz = Realizer::new(cfg, assets, &bundle)?;
    let keys = aggregate_keys(&rz.map);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let outputs: Vec<RealizationOutput> = pool.install(|| {
        (0..cfg.n_realizations)
            .into_par_iter()
            .map(|r| realize(&rz, &keys, cfg.discount_rate, r))
            .collect::<Result<Vec<_>>>()
    })?;

    let run_id = format!("{}-{}", cfg.run_name, scenario);
    let dir = out_dir.join(&run_id);
    write_store(
        &dir,
        &StoreData {
            run_id,
            scenario: scenario.clone(),
            config: cfg,
            config_hash,
            keys: keys.into_iter().map(|(k, _)| k).collect(),
            grid: *rz.map.grid(),
            forcing: &rz.forcing,
            gdp: &rz.gdp,
            population: &rz.population,
            uhi: &rz.uhi,
            outputs: &outputs,
        },
    )?;
    Ok(dir)
}
