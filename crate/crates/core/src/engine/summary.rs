//! Read-only queries over completed stores: PV tables, loss-percentage and
//! risk-ratio series, cell series, risk-level maps and locality summaries.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::axis::{Cube, TimeAxis};
use crate::damage::VariantId;
use crate::engine::store::EnsembleStore;
use crate::error::{Error, Result};
use crate::grid::{lookup_cells, Level, GLOBAL_KEY};
use crate::metrics::{self, present_value, PvReport, PvTable};
use crate::risk::{
    self, combine_dates, exceedance_date, joint_exceedance_date, realization_joint_dates, DateMode, ExceedanceMap,
    RiskIndexSpec, RiskLevels, RiskThreshold, Variable, HIGH_CODE, MODERATE_CODE,
};
use crate::stats;

/// What a report aggregates over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Global,
    Key(Level, String),
    Cell(usize),
}

impl FromStr for Selector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == GLOBAL_KEY {
            return Ok(Selector::Global);
        }
        let (level, key) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("bad level `{s}`; use global, country:X, region:X, admin1:X, admin2:X or cell:N")))?;
        match level {
            "cell" => key
                .parse()
                .map(Selector::Cell)
                .map_err(|_| Error::invalid(format!("bad cell index `{key}`"))),
            "country" => Ok(Selector::Key(Level::Country, key.into())),
            "region" => Ok(Selector::Key(Level::Region, key.into())),
            "admin1" | "state" => Ok(Selector::Key(Level::State, key.into())),
            "admin2" | "municipality" => Ok(Selector::Key(Level::Municipality, key.into())),
            other => Err(Error::invalid(format!("unknown level `{other}`"))),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Global => f.write_str(GLOBAL_KEY),
            Selector::Key(l, k) => write!(f, "{}:{k}", l.as_str()),
            Selector::Cell(c) => write!(f, "cell:{c}"),
        }
    }
}

impl Selector {
    /// Name of the stored aggregate series, when one exists.
    fn stored_key(&self) -> Option<String> {
        match self {
            Selector::Global => Some(GLOBAL_KEY.to_string()),
            Selector::Key(Level::Country | Level::Region, _) => Some(self.to_string()),
            _ => None,
        }
    }
}

pub fn cells_of(store: &EnsembleStore, sel: &Selector) -> Result<Vec<usize>> {
    match sel {
        Selector::Global => Ok(store.map().land_cells()),
        Selector::Key(level, key) => lookup_cells(store.map(), *level, key),
        Selector::Cell(c) => {
            if *c >= store.grid.n_cells() {
                Err(Error::UnknownKey {
                    kind: "cell",
                    key: c.to_string(),
                })
            } else {
                Ok(vec![*c])
            }
        }
    }
}

/// Per-realization annual loss series (US$2005) for a selection.
pub fn loss_series(store: &EnsembleStore, sel: &Selector, variant: VariantId) -> Result<Vec<Vec<f64>>> {
    if let Some(key) = sel.stored_key() {
        return Ok(store.aggregate(variant, &key)?.into_iter().map(<[f64]>::to_vec).collect());
    }
    let cells = cells_of(store, sel)?;
    (0..store.n_realizations)
        .into_par_iter()
        .map(|r| {
            let lf = store.losses(r, &[variant])?.remove(0);
            Ok((0..store.axis.len)
                .map(|y| cells.iter().map(|&c| lf.value.get(y, c)).sum())
                .collect())
        })
        .collect()
}

/// Per-realization present values for a selection.
pub fn pv_samples(store: &EnsembleStore, sel: &Selector, variant: VariantId, rate: f64) -> Result<Vec<f64>> {
    if sel.stored_key().is_none() && rate == store.config.discount_rate {
        let cells = cells_of(store, sel)?;
        return (0..store.n_realizations)
            .map(|r| {
                let pv = store.cell_pv(variant, r)?;
                Ok(cells.iter().map(|&c| pv[c]).sum())
            })
            .collect();
    }
    Ok(loss_series(store, sel, variant)?
        .iter()
        .map(|s| present_value(s, rate))
        .collect())
}

pub fn reference_gdp(store: &EnsembleStore, sel: &Selector) -> Result<f64> {
    let cells = cells_of(store, sel)?;
    let y = store
        .axis
        .index_of(store.config.reference_year)
        .ok_or(Error::OutOfRange { what: "reference year", value: store.config.reference_year as f64 })?;
    Ok(cells.iter().map(|&c| store.gdp.get(y, c)).sum())
}

pub fn pv_report(store: &EnsembleStore, sel: &Selector, variant: VariantId, rate: f64) -> Result<PvReport> {
    let samples = pv_samples(store, sel, variant, rate)?;
    PvReport::from_samples(variant, store.scenario.as_str(), &samples, rate, reference_gdp(store, sel)?)
}

/// Scenario rows (in the order given) plus the CP − B2 row.
pub fn pv_table(stores: &[&EnsembleStore], sel: &Selector, variants: &[VariantId], rate: f64) -> Result<PvTable> {
    if stores.is_empty() {
        return Err(Error::invalid("no runs to tabulate"));
    }
    let grid = stores[0].grid;
    let mut rows = Vec::new();
    for s in stores {
        if s.grid != grid {
            return Err(Error::GridMismatch {
                expected: grid.id(),
                found: s.grid.id(),
            });
        }
        let reports = variants
            .iter()
            .map(|&v| pv_report(s, sel, v, rate))
            .collect::<Result<Vec<_>>>()?;
        rows.push((s.scenario.clone(), reports));
    }
    PvTable::build(variants, rows, 1e9)
}

/// Per-year (or per-start-year) median and 90 % band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSeries {
    pub years: Vec<i32>,
    pub p5: Vec<f64>,
    pub p50: Vec<f64>,
    pub p95: Vec<f64>,
    pub unit: String,
}

impl BandSeries {
    fn from_members(years: Vec<i32>, members: &[Vec<f64>], unit: &str) -> Self {
        let mut s = BandSeries {
            years,
            p5: Vec::new(),
            p50: Vec::new(),
            p95: Vec::new(),
            unit: unit.to_string(),
        };
        for i in 0..s.years.len() {
            let col: Vec<f64> = members.iter().map(|m| m[i]).collect();
            let q = stats::quantiles(&col, &[0.05, 0.5, 0.95]);
            s.p5.push(q[0]);
            s.p50.push(q[1]);
            s.p95.push(q[2]);
        }
        s
    }

    pub fn to_csv(&self, value_name: &str) -> String {
        let mut out = format!("year,{value_name}_p5,{value_name}_p50,{value_name}_p95\n");
        for i in 0..self.years.len() {
            out.push_str(&format!("{},{:.6},{:.6},{:.6}\n", self.years[i], self.p5[i], self.p50[i], self.p95[i]));
        }
        out
    }

    pub fn value_at(&self, year: i32) -> Option<(f64, f64, f64)> {
        let i = self.years.iter().position(|&y| y == year)?;
        Some((self.p5[i], self.p50[i], self.p95[i]))
    }
}

/// Annual losses as % of the selection's GDP.
pub fn pct_series(store: &EnsembleStore, sel: &Selector, variant: VariantId) -> Result<BandSeries> {
    let gdp = store.gdp_series(&cells_of(store, sel)?);
    let members = loss_series(store, sel, variant)?
        .iter()
        .map(|s| s.iter().zip(&gdp).map(|(l, g)| metrics::pct(*l, *g)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(BandSeries::from_members(store.axis.years().collect(), &members, "percent"))
}

fn rolling_members(store: &EnsembleStore, sel: &Selector, variant: VariantId, rate: f64, window: usize) -> Result<Vec<Vec<f64>>> {
    loss_series(store, sel, variant)?
        .iter()
        .map(|s| metrics::rolling_pv(s, rate, window))
        .collect()
}

fn start_years(axis: TimeAxis, window: usize) -> Vec<i32> {
    (0..=axis.len - window).map(|i| axis.year(i)).collect()
}

/// Rolling-window present value per start year.
pub fn rolling_series(store: &EnsembleStore, sel: &Selector, variant: VariantId, rate: f64, window: usize) -> Result<BandSeries> {
    let members = rolling_members(store, sel, variant, rate, window)?;
    Ok(BandSeries::from_members(start_years(store.axis, window), &members, "USD2005"))
}

/// Rolling PV relative to the reference-year window, computed per
/// realization before taking quantiles.
pub fn risk_ratio_series(store: &EnsembleStore, sel: &Selector, variant: VariantId, rate: f64, window: usize) -> Result<BandSeries> {
    let base = store
        .axis
        .index_of(store.config.reference_year)
        .filter(|&i| i + window <= store.axis.len)
        .ok_or_else(|| Error::invalid("reference year has no complete rolling window"))?;
    let members = rolling_members(store, sel, variant, rate, window)?
        .iter()
        .map(|m| metrics::relative_risk_change(m, base))
        .collect::<Result<Vec<_>>>()?;
    let years = start_years(store.axis, window);
    Ok(BandSeries::from_members(years[base..].to_vec(), &members.iter().map(|m| m[base..].to_vec()).collect::<Vec<_>>(), "ratio"))
}

/// Threshold-variable values for one realization, year-major over cells.
pub fn variable_cube(store: &EnsembleStore, r: usize, var: Variable, variant: Option<VariantId>) -> Result<Cube> {
    let climate = store.climate(r)?;
    Ok(match var {
        Variable::DeltaT => climate.dt,
        Variable::DeltaP => climate.dp,
        Variable::LossPct | Variable::LossValue => {
            let v = variant.ok_or_else(|| Error::MissingVariable(format!("{var} needs a damage variant")))?;
            let lf = store.losses(r, &[v])?.remove(0);
            if var == Variable::LossValue {
                lf.value
            } else {
                let mut f = lf.fraction;
                f.data.iter_mut().for_each(|x| *x *= 100.0);
                f
            }
        }
    })
}

/// Series for every threshold of `spec` in one realization, sharing the
/// climate and damage evaluation across thresholds.
fn threshold_series(store: &EnsembleStore, r: usize, spec: &RiskIndexSpec, fallback: VariantId) -> Result<Vec<Vec<f64>>> {
    let climate = store.climate(r)?;
    let mut variants: Vec<VariantId> = spec
        .thresholds
        .iter()
        .filter_map(|t| spec.resolved_variant(t, fallback))
        .collect();
    variants.sort();
    variants.dedup();
    let losses = if variants.is_empty() { Vec::new() } else { store.losses(r, &variants)? };
    spec.thresholds
        .iter()
        .map(|t| {
            Ok(match t.variable {
                Variable::DeltaT => climate.dt.data.clone(),
                Variable::DeltaP => climate.dp.data.clone(),
                var => {
                    let v = spec.resolved_variant(t, fallback).unwrap();
                    let lf = losses.iter().find(|l| l.variant == v).unwrap();
                    if var == Variable::LossValue {
                        lf.value.data.clone()
                    } else {
                        lf.fraction.data.iter().map(|x| 100.0 * x).collect()
                    }
                }
            })
        })
        .collect()
}

/// Check that every variable the index reads is in the store.
pub fn check_index(store: &EnsembleStore, spec: &RiskIndexSpec) -> Result<VariantId> {
    spec.validate()?;
    let fallback = spec.variant.unwrap_or(store.variants[0]);
    for t in &spec.thresholds {
        if let Some(v) = spec.resolved_variant(t, fallback) {
            if !store.has_variant(v) {
                return Err(Error::MissingVariable(format!("{} for variant {v}", t.variable)));
            }
        }
    }
    Ok(fallback)
}

/// Moderate and high risk-level maps.
pub fn risk_index(store: &EnsembleStore, spec: &RiskIndexSpec, mode: DateMode) -> Result<RiskLevels> {
    let fallback = check_index(store, spec)?;
    let cells = store.grid.n_cells();
    let axis = store.axis;
    let per_real: Vec<(Vec<Option<i32>>, Vec<Option<i32>>)> = (0..store.n_realizations)
        .into_par_iter()
        .map(|r| {
            let series = threshold_series(store, r, spec, fallback)?;
            Ok(realization_joint_dates(spec, &series, cells, axis))
        })
        .collect::<Result<_>>()?;
    let (moderate, high): (Vec<_>, Vec<_>) = per_real.into_iter().unzip();
    let mut levels = RiskLevels {
        moderate: combine_dates(&moderate, store.grid, axis, MODERATE_CODE),
        high: combine_dates(&high, store.grid, axis, HIGH_CODE),
    };
    if mode == DateMode::MedianPath {
        let (m, h) = median_path_dates(store, spec, fallback)?;
        levels.moderate.dates = m;
        levels.high.dates = h;
    }
    Ok(levels)
}

/// Memory budget for one block of per-realization series (values).
const BLOCK_VALUES: usize = 32 << 20;

/// Joint dates on the per-year ensemble median of each threshold variable,
/// processed in cell blocks to bound memory.
fn median_path_dates(store: &EnsembleStore, spec: &RiskIndexSpec, fallback: VariantId) -> Result<(Vec<Option<i32>>, Vec<Option<i32>>)> {
    let cells = store.grid.n_cells();
    let (n, years, nt) = (store.n_realizations, store.axis.len, spec.thresholds.len());
    let block = (BLOCK_VALUES / (n * years * nt)).clamp(1, cells);
    let mut moderate = vec![None; cells];
    let mut high = vec![None; cells];
    for start in (0..cells).step_by(block) {
        let end = (start + block).min(cells);
        let members: Vec<Vec<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let s = threshold_series(store, r, spec, fallback)?;
                Ok(s.into_iter()
                    .map(|v| (0..years).flat_map(|y| v[y * cells + start..y * cells + end].to_vec()).collect())
                    .collect())
            })
            .collect::<Result<_>>()?;
        let width = end - start;
        let mut col = vec![0.0; n];
        let mut path = vec![0.0; years];
        let mut dates = vec![None; nt];
        for c in 0..width {
            for (ti, t) in spec.thresholds.iter().enumerate() {
                for y in 0..years {
                    for (r, m) in members.iter().enumerate() {
                        col[r] = m[ti][y * width + c];
                    }
                    path[y] = stats::quantile(&col, 0.5);
                }
                dates[ti] = exceedance_date(&path, t, store.axis);
            }
            moderate[start + c] = joint_exceedance_date(&dates, spec.k_moderate);
            high[start + c] = joint_exceedance_date(&dates, spec.k_high);
        }
    }
    Ok((moderate, high))
}

/// Single-threshold exceedance map.
pub fn threshold_map(store: &EnsembleStore, threshold: &RiskThreshold, variant: Option<VariantId>) -> Result<ExceedanceMap> {
    let spec = RiskIndexSpec {
        thresholds: vec![threshold.clone()],
        k_moderate: 1,
        k_high: 1,
        variant,
    };
    let mut levels = risk_index(store, &spec, DateMode::MedianOfDates)?;
    levels.moderate.variable_code = threshold.variable.code();
    Ok(levels.moderate)
}

/// Per-cell q-quantile of a variable in one year.
pub fn percentile_map(store: &EnsembleStore, var: Variable, variant: Option<VariantId>, year: i32, q: f64) -> Result<Vec<f64>> {
    let y = store.axis.index_of(year).ok_or(Error::OutOfRange { what: "year", value: year as f64 })?;
    let rows: Vec<Vec<f64>> = (0..store.n_realizations)
        .into_par_iter()
        .map(|r| Ok(variable_cube(store, r, var, variant)?.year(y).to_vec()))
        .collect::<Result<_>>()?;
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    risk::percentile_field(&refs, q)
}

/// Quantile time series for one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSeries {
    pub run_id: String,
    pub config_hash: String,
    pub cell: usize,
    pub lat: f64,
    pub lon: f64,
    pub variable: String,
    pub variant: Option<String>,
    pub unit: String,
    pub years: Vec<i32>,
    /// Quantiles in percent.
    pub quantiles: Vec<f64>,
    /// values[k][t]: quantile k in year t.
    pub values: Vec<Vec<f64>>,
}

impl CellSeries {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("year");
        for q in &self.quantiles {
            s.push_str(&format!(",q{q}"));
        }
        s.push('\n');
        for (t, y) in self.years.iter().enumerate() {
            s.push_str(&y.to_string());
            for k in 0..self.quantiles.len() {
                s.push_str(&format!(",{}", self.values[k][t]));
            }
            s.push('\n');
        }
        s
    }
}

pub fn parse_quantiles(text: &str) -> Result<Vec<f64>> {
    let qs: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad quantile `{s}`"))))
        .collect::<Result<_>>()?;
    if qs.is_empty() || qs.iter().any(|q| !(0.0..=100.0).contains(q)) {
        return Err(Error::invalid("quantiles must be percentages in [0, 100]"));
    }
    Ok(qs)
}

pub fn cell_series(store: &EnsembleStore, cell: usize, var: Variable, variant: Option<VariantId>, quantiles: &[f64]) -> Result<CellSeries> {
    cells_of(store, &Selector::Cell(cell))?;
    let variant = if var.needs_variant() {
        let v = variant.unwrap_or(store.variants[0]);
        if !store.has_variant(v) {
            return Err(Error::MissingVariable(format!("losses for variant {v}")));
        }
        Some(v)
    } else {
        None
    };
    let members: Vec<Vec<f64>> = (0..store.n_realizations)
        .into_par_iter()
        .map(|r| Ok(variable_cube(store, r, var, variant)?.cell_series(cell)))
        .collect::<Result<_>>()?;
    let years = store.axis.len;
    let mut values = vec![Vec::with_capacity(years); quantiles.len()];
    for t in 0..years {
        let col: Vec<f64> = members.iter().map(|m| m[t]).collect();
        let q: Vec<f64> = quantiles.iter().map(|q| q / 100.0).collect();
        for (k, v) in stats::quantiles(&col, &q).into_iter().enumerate() {
            values[k].push(v);
        }
    }
    let (lat, lon) = store.grid.center(cell);
    Ok(CellSeries {
        run_id: store.run_id.clone(),
        config_hash: store.config_hash.clone(),
        cell,
        lat,
        lon,
        variable: var.to_string(),
        variant: variant.map(|v| v.to_string()),
        unit: var.unit().to_string(),
        years: store.axis.years().collect(),
        quantiles: quantiles.to_vec(),
        values,
    })
}

/// First year the lower quantile of the selection's loss percentage stays
/// above the noise level.
pub fn emergence(store: &EnsembleStore, sel: &Selector, variant: VariantId) -> Result<Option<i32>> {
    let gdp = store.gdp_series(&cells_of(store, sel)?);
    let members: Vec<Vec<f64>> = loss_series(store, sel, variant)?
        .iter()
        .map(|s| s.iter().zip(&gdp).map(|(l, g)| if *g > 0.0 { 100.0 * l / g } else { 0.0 }).collect())
        .collect();
    risk::time_of_emergence(&members, store.config.risk.toe_noise, store.config.risk.toe_quantile, store.axis)
}

/// Aggregated metrics for one locality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalitySummary {
    pub run_id: String,
    pub config_hash: String,
    pub locality: String,
    pub variant: String,
    pub cells: usize,
    pub discount_rate: f64,
    pub reference_year: i32,
    pub reference_gdp: f64,
    pub pv: f64,
    pub pv_p5: f64,
    pub pv_p95: f64,
    pub relative_pv: f64,
    pub relative_pv_p5: f64,
    pub relative_pv_p95: f64,
    pub pv_unit: String,
    pub relative_unit: String,
    /// Earliest cell date in the locality for each risk level.
    pub moderate_date: Option<i32>,
    pub high_date: Option<i32>,
    pub time_of_emergence: Option<i32>,
}

pub fn locality_summary(store: &EnsembleStore, sel: &Selector, variant: VariantId, levels: &RiskLevels) -> Result<LocalitySummary> {
    let cells = cells_of(store, sel)?;
    let report = pv_report(store, sel, variant, store.config.discount_rate)?;
    let earliest = |m: &ExceedanceMap| cells.iter().filter_map(|&c| m.dates[c]).min();
    Ok(LocalitySummary {
        run_id: store.run_id.clone(),
        config_hash: store.config_hash.clone(),
        locality: sel.to_string(),
        variant: variant.to_string(),
        cells: cells.len(),
        discount_rate: report.discount_rate,
        reference_year: store.config.reference_year,
        reference_gdp: report.reference_gdp,
        pv: report.pv,
        pv_p5: report.p5,
        pv_p95: report.p95,
        relative_pv: report.relative,
        relative_pv_p5: report.relative_p5,
        relative_pv_p95: report.relative_p95,
        pv_unit: "USD2005".into(),
        relative_unit: format!("GDP {}", store.config.reference_year),
        moderate_date: earliest(&levels.moderate),
        high_date: earliest(&levels.high),
        time_of_emergence: emergence(store, sel, variant)?,
    })
}

/// Latitude/longitude box used to restrict exports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<()> {
        if !(self.lat_min < self.lat_max && self.lon_min < self.lon_max) {
            return Err(Error::invalid("bounding box must have min < max on both axes"));
        }
        Ok(())
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }
}

/// Land cells in export order, optionally restricted to a box.
pub fn export_cells(store: &EnsembleStore, bbox: Option<&BoundingBox>) -> Vec<usize> {
    store
        .map()
        .land_cells()
        .into_iter()
        .filter(|&c| {
            let (lat, lon) = store.grid.center(c);
            bbox.is_none_or(|b| b.contains(lat, lon))
        })
        .collect()
}

/// The run's configured threshold index, or the built-in default.
pub fn default_spec(store: &EnsembleStore) -> Result<RiskIndexSpec> {
    match &store.config.risk.thresholds {
        Some(p) => crate::engine::load_thresholds(p),
        None => Ok(RiskIndexSpec::default_index()),
    }
}

/// Per-cell median present value over realizations, divided by the cell's
/// reference-year GDP (zero where the cell has no GDP).
pub fn relative_pv_field(store: &EnsembleStore, variant: VariantId) -> Result<Vec<f64>> {
    let y = store
        .axis
        .index_of(store.config.reference_year)
        .ok_or(Error::OutOfRange { what: "reference year", value: store.config.reference_year as f64 })?;
    let rows: Vec<&[f64]> = (0..store.n_realizations).map(|r| store.cell_pv(variant, r)).collect::<Result<_>>()?;
    let median = risk::percentile_field(&rows, 0.5)?;
    Ok(median
        .iter()
        .enumerate()
        .map(|(c, pv)| {
            let g = store.gdp.get(y, c);
            if g > 0.0 { pv / g } else { 0.0 }
        })
        .collect())
}

/// Parse `global`, `level:code`, `cell:N` or a bare code looked up across
/// levels (country first).
pub fn resolve_selector(store: &EnsembleStore, text: &str) -> Result<Selector> {
    let sel = if text.contains(':') || text == GLOBAL_KEY {
        text.parse()?
    } else {
        let level = store.map().find_key(text).ok_or_else(|| Error::UnknownKey {
            kind: "locality",
            key: text.to_string(),
        })?;
        Selector::Key(level, text.to_string())
    };
    cells_of(store, &sel)?;
    Ok(sel)
}
