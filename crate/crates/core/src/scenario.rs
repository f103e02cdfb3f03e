//! Emissions pathways, national socioeconomic series, dynamic pattern
//! downscaling of GDP/population, and urban-cell identification.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::axis::{Cube, TimeAxis, Unit};
use crate::error::{Error, Result};
use crate::grid::{csv_err, CellField, Level, RegionMap};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ScenarioId {
    /// Current Policies.
    CP,
    /// Below 2 °C.
    B2,
    /// Delayed Transition.
    DT,
    /// Asymmetric: one country stays on CP while the rest of the world follows B2.
    FR,
    Custom(String),
}

impl ScenarioId {
    pub fn as_str(&self) -> &str {
        match self {
            ScenarioId::CP => "CP",
            ScenarioId::B2 => "B2",
            ScenarioId::DT => "DT",
            ScenarioId::FR => "FR",
            ScenarioId::Custom(s) => s,
        }
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Ok(match t {
            "CP" => ScenarioId::CP,
            "B2" => ScenarioId::B2,
            "DT" => ScenarioId::DT,
            "FR" => ScenarioId::FR,
            "" => return Err(Error::invalid("empty scenario id")),
            other if other.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') => {
                ScenarioId::Custom(other.to_string())
            }
            other => return Err(Error::invalid(format!("bad scenario id `{other}`"))),
        })
    }
}

impl From<ScenarioId> for String {
    fn from(s: ScenarioId) -> String {
        s.as_str().to_string()
    }
}

impl TryFrom<String> for ScenarioId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Annual global emissions. CO2 in GtC/yr, CH4 and N2O in Mt/yr, plus an
/// exogenous forcing term for everything else (W/m²).
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionsPathway {
    pub id: ScenarioId,
    pub axis: TimeAxis,
    pub co2_gtc: Vec<f64>,
    pub ch4_mt: Vec<f64>,
    pub n2o_mt: Vec<f64>,
    pub other_wm2: Vec<f64>,
}

impl EmissionsPathway {
    pub fn new(
        id: ScenarioId,
        axis: TimeAxis,
        co2_gtc: Vec<f64>,
        ch4_mt: Vec<f64>,
        n2o_mt: Vec<f64>,
        other_wm2: Vec<f64>,
    ) -> Result<Self> {
        for (name, s) in [("co2", &co2_gtc), ("ch4", &ch4_mt), ("n2o", &n2o_mt), ("other", &other_wm2)] {
            if s.len() != axis.len {
                return Err(Error::invalid(format!(
                    "{name} series has {} values, expected {}",
                    s.len(),
                    axis.len
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("{name} series has non-finite values")));
            }
        }
        for (name, s) in [("co2_gtc", &co2_gtc), ("ch4_mt", &ch4_mt), ("n2o_mt", &n2o_mt)] {
            if let Some(i) = s.iter().position(|&v| v < 0.0) {
                return Err(Error::invalid(format!(
                    "negative {name} emissions in {}",
                    axis.year(i)
                )));
            }
        }
        Ok(Self {
            id,
            axis,
            co2_gtc,
            ch4_mt,
            n2o_mt,
            other_wm2,
        })
    }

    /// Constant-zero pathway over `axis`.
    pub fn zeros(id: ScenarioId, axis: TimeAxis) -> Self {
        let z = vec![0.0; axis.len];
        Self::new(id, axis, z.clone(), z.clone(), z.clone(), z).unwrap()
    }
}

/// Read an emissions file with columns `year,co2_gtc,ch4_mt,n2o_mt[,other_wm2]`.
pub fn load_emissions(path: &Path, id: ScenarioId) -> Result<EmissionsPathway> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = ["year", "co2_gtc", "ch4_mt", "n2o_mt"];
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(required) {
        *slot = col(name).ok_or_else(|| Error::parse(path, 1, format!("missing column `{name}`")))?;
    }
    let other_idx = col("other_wm2");

    let mut years = Vec::new();
    let (mut co2, mut ch4, mut n2o, mut other) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = rec
                .get(i)
                .ok_or_else(|| Error::parse(path, line, format!("missing `{name}`")))?;
            raw.parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("bad {name} value `{raw}`")))
        };
        let year_raw = rec.get(idx[0]).unwrap_or("");
        let year: i32 = year_raw
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad year `{year_raw}`")))?;
        if let Some(&prev) = years.last() {
            if year != prev + 1 {
                let missing = if year > prev { prev + 1 } else { year };
                return Err(Error::parse(
                    path,
                    line,
                    format!("years not contiguous: first missing year {missing}"),
                ));
            }
        }
        years.push(year);
        co2.push(field(idx[1], "co2_gtc")?);
        ch4.push(field(idx[2], "ch4_mt")?);
        n2o.push(field(idx[3], "n2o_mt")?);
        other.push(match other_idx.and_then(|i| rec.get(i)) {
            None | Some("") => 0.0,
            Some(_) => field(other_idx.unwrap(), "other_wm2")?,
        });
    }
    let (Some(&first), Some(&last)) = (years.first(), years.last()) else {
        return Err(Error::parse(path, 1, "no emissions rows"));
    };
    EmissionsPathway::new(id, TimeAxis::new(first, last), co2, ch4, n2o, other).map_err(|e| match e {
        Error::Invalid(m) => Error::parse(path, 0, m),
        other => other,
    })
}

pub fn write_emissions(path: &Path, e: &EmissionsPathway) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# emissions pathway {}", e.id).unwrap();
    writeln!(out, "year,co2_gtc,ch4_mt,n2o_mt,other_wm2").unwrap();
    for i in 0..e.axis.len {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.axis.year(i),
            e.co2_gtc[i],
            e.ch4_mt[i],
            e.n2o_mt[i],
            e.other_wm2[i]
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|err| Error::io(path, err))
}

/// National GDP (US$2005) and population (persons) series for one country.
#[derive(Debug, Clone, PartialEq)]
pub struct NationalSeries {
    pub gdp: Vec<f64>,
    pub population: Vec<f64>,
}

/// Per-cell share grids for one pattern year; each country's shares sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareGrid {
    pub gdp: CellField,
    pub population: CellField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocioScenario {
    pub ssp: String,
    pub axis: TimeAxis,
    pub national: BTreeMap<String, NationalSeries>,
    pub base: ShareGrid,
    pub target: ShareGrid,
}

const SHARE_TOL: f64 = 1e-9;

impl SocioScenario {
    pub fn validate(&self, map: &RegionMap) -> Result<()> {
        map.ensure_same_grid(&self.base.gdp.grid)?;
        map.ensure_same_grid(&self.target.gdp.grid)?;
        for (name, series) in &self.national {
            if series.gdp.len() != self.axis.len || series.population.len() != self.axis.len {
                return Err(Error::invalid(format!("series for {name} does not span the time axis")));
            }
            if series.gdp.iter().chain(&series.population).any(|v| !(*v >= 0.0)) {
                return Err(Error::invalid(format!("negative GDP or population for {name}")));
            }
        }
        for (label, grid) in [("base", &self.base), ("target", &self.target)] {
            for (what, field) in [("gdp", &grid.gdp), ("population", &grid.population)] {
                let sums = crate::grid::aggregate_values(&field.values, Level::Country, map);
                for (country, s) in sums {
                    if !self.national.contains_key(&country) {
                        continue;
                    }
                    if (s - 1.0).abs() > SHARE_TOL {
                        return Err(Error::invalid(format!(
                            "{label} {what} shares for {country} sum to {s}"
                        )));
                    }
                }
                if field.values.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::invalid(format!("negative {label} {what} share")));
                }
            }
        }
        for country in self.national.keys() {
            if map.region_of_country(country).is_none() {
                return Err(Error::UnknownKey {
                    kind: "country",
                    key: country.clone(),
                });
            }
        }
        Ok(())
    }

    /// Downscaled GDP and population cubes over the whole axis.
    pub fn downscale(&self, map: &RegionMap) -> Result<(Cube, Cube)> {
        let n = map.n_cells();
        let mut gdp = Cube::zeros(self.axis.len, n);
        let mut pop = Cube::zeros(self.axis.len, n);
        for (country, series) in &self.national {
            let mask: Vec<bool> = (0..n)
                .map(|c| map.is_land(c) && map.code(Level::Country, c) == Some(country.as_str()))
                .collect();
            let masked = |f: &CellField| -> CellField {
                let values = f
                    .values
                    .iter()
                    .zip(&mask)
                    .map(|(&v, &m)| if m { v } else { 0.0 })
                    .collect();
                CellField {
                    grid: f.grid,
                    unit: f.unit,
                    values,
                }
            };
            let (bg, tg) = (masked(&self.base.gdp), masked(&self.target.gdp));
            let (bp, tp) = (masked(&self.base.population), masked(&self.target.population));
            for (yi, year) in self.axis.years().enumerate() {
                let g = downscale_series(&series.gdp, self.axis, &bg, &tg, year)?;
                let p = downscale_series(&series.population, self.axis, &bp, &tp, year)?;
                for c in 0..n {
                    if mask[c] {
                        gdp.data[yi * n + c] += g.values[c];
                        pop.data[yi * n + c] += p.values[c];
                    }
                }
            }
        }
        Ok((gdp, pop))
    }
}

/// Shares for `year`: linear interpolation from base (axis start) to target
/// (axis end), renormalised to sum to 1.
pub fn interpolate_shares(base: &CellField, target: &CellField, axis: TimeAxis, year: i32) -> Result<Vec<f64>> {
    if base.grid != target.grid {
        return Err(Error::GridMismatch {
            expected: base.grid.id(),
            found: target.grid.id(),
        });
    }
    let span = (axis.end() - axis.start).max(1) as f64;
    let w = ((year - axis.start) as f64 / span).clamp(0.0, 1.0);
    let mut shares: Vec<f64> = base
        .values
        .iter()
        .zip(&target.values)
        .map(|(&b, &t)| (1.0 - w) * b + w * t)
        .collect();
    let total: f64 = shares.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("shares are all zero and cannot be normalised".into()));
    }
    shares.iter_mut().for_each(|s| *s /= total);
    Ok(shares)
}

/// Cell values for `year` = national total × interpolated share.
pub fn downscale_series(
    national: &[f64],
    axis: TimeAxis,
    base_shares: &CellField,
    target_shares: &CellField,
    year: i32,
) -> Result<CellField> {
    let yi = axis.index_of(year).ok_or(Error::OutOfRange {
        what: "year",
        value: year as f64,
    })?;
    let total = *national.get(yi).ok_or_else(|| Error::invalid("national series shorter than axis"))?;
    if total == 0.0 {
        return Ok(CellField::filled(base_shares.grid, base_shares.unit, 0.0));
    }
    let shares = interpolate_shares(base_shares, target_shares, axis, year)?;
    let values = shares.into_iter().map(|s| total * s).collect();
    CellField::new(base_shares.grid, base_shares.unit, values)
}

/// Per-cell, per-year urban flags and the population they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct UrbanMask {
    pub threshold: f64,
    pub population: Cube,
    pub urban: Vec<bool>,
}

impl UrbanMask {
    pub fn is_urban(&self, year: usize, cell: usize) -> bool {
        self.urban[year * self.population.cells + cell]
    }

    pub fn urban_cells_in(&self, year: usize) -> usize {
        let n = self.population.cells;
        self.urban[year * n..(year + 1) * n].iter().filter(|&&u| u).count()
    }

    pub fn any_urban(&self) -> bool {
        self.urban.iter().any(|&u| u)
    }
}

/// Flag cells whose population reaches `threshold` (inclusive).
pub fn identify_urban(pop: &CellField, threshold: f64) -> Vec<bool> {
    pop.values.iter().map(|&p| p >= threshold).collect()
}

/// Year-by-year urban identification over a population cube, so cells that
/// grow past the threshold become urban from the year they cross it.
pub fn urban_mask(population: Cube, threshold: f64) -> UrbanMask {
    let urban = population.data.iter().map(|&p| p >= threshold).collect();
    UrbanMask {
        threshold,
        population,
        urban,
    }
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    country: String,
    year: i32,
    gdp_usd2005: f64,
    population: f64,
}

/// Read `country,year,gdp_usd2005,population`.
pub fn load_national_series(path: &Path, axis: TimeAxis) -> Result<BTreeMap<String, NationalSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut out: BTreeMap<String, NationalSeries> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<SeriesRow>().enumerate() {
        let row = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let yi = axis
            .index_of(row.year)
            .ok_or_else(|| Error::parse(path, i + 2, format!("year {} outside {}–{}", row.year, axis.start, axis.end())))?;
        let entry = out.entry(row.country.clone()).or_insert_with(|| NationalSeries {
            gdp: vec![f64::NAN; axis.len],
            population: vec![f64::NAN; axis.len],
        });
        if !entry.gdp[yi].is_nan() {
            return Err(Error::parse(path, i + 2, format!("duplicate {} {}", row.country, row.year)));
        }
        entry.gdp[yi] = row.gdp_usd2005;
        entry.population[yi] = row.population;
    }
    for (country, s) in &out {
        if let Some(i) = s.gdp.iter().position(|v| v.is_nan()) {
            return Err(Error::parse(path, 0, format!("{country} missing year {}", axis.year(i))));
        }
    }
    Ok(out)
}

pub fn write_national_series(path: &Path, axis: TimeAxis, series: &BTreeMap<String, NationalSeries>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "country,year,gdp_usd2005,population").unwrap();
    for (country, s) in series {
        for (i, year) in axis.years().enumerate() {
            writeln!(out, "{country},{year},{},{}", s.gdp[i], s.population[i]).unwrap();
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct ShareRow {
    cell: usize,
    gdp_share: f64,
    pop_share: f64,
}

/// Read `cell,lat,lon,gdp_share,pop_share`; absent cells get zero share.
pub fn load_shares(path: &Path, map: &RegionMap) -> Result<ShareGrid> {
    let grid = *map.grid();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut gdp = vec![0.0; grid.n_cells()];
    let mut pop = vec![0.0; grid.n_cells()];
    for (i, rec) in rdr.deserialize::<ShareRow>().enumerate() {
        let row = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        if row.cell >= grid.n_cells() {
            return Err(Error::GridMismatch {
                expected: grid.id(),
                found: format!("cell {} in {}", row.cell, path.display()),
            });
        }
        if !map.is_land(row.cell) && (row.gdp_share != 0.0 || row.pop_share != 0.0) {
            return Err(Error::parse(path, i + 2, format!("water cell {} has a share", row.cell)));
        }
        gdp[row.cell] = row.gdp_share;
        pop[row.cell] = row.pop_share;
    }
    Ok(ShareGrid {
        gdp: CellField::new(grid, Unit::Fraction, gdp)?,
        population: CellField::new(grid, Unit::Fraction, pop)?,
    })
}

pub fn write_shares(path: &Path, map: &RegionMap, shares: &ShareGrid) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "cell,lat,lon,gdp_share,pop_share").unwrap();
    for cell in map.land_cells() {
        let (lat, lon) = map.grid().center(cell);
        writeln!(
            out,
            "{cell},{lat},{lon},{},{}",
            shares.gdp.values[cell], shares.population.values[cell]
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// File references for one scenario bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioAssets {
    pub id: ScenarioId,
    pub emissions: PathBuf,
    pub national_series: PathBuf,
    pub base_shares: PathBuf,
    pub target_shares: PathBuf,
    pub urban_threshold: f64,
    pub ssp: String,
}

/// Mutually consistent scenario inputs on one grid.
#[derive(Debug, Clone)]
pub struct ScenarioBundle {
    pub emissions: EmissionsPathway,
    pub socio: SocioScenario,
    pub gdp: Cube,
    pub urban: UrbanMask,
}

impl ScenarioBundle {
    pub fn population(&self) -> &Cube {
        &self.urban.population
    }
}

pub fn build_scenario(assets: &ScenarioAssets, map: &RegionMap, axis: TimeAxis) -> Result<ScenarioBundle> {
    let emissions = load_emissions(&assets.emissions, assets.id.clone())?;
    if emissions.axis != axis {
        return Err(Error::invalid(format!(
            "emissions cover {}–{}, run needs {}–{}",
            emissions.axis.start,
            emissions.axis.end(),
            axis.start,
            axis.end()
        )));
    }
    let socio = SocioScenario {
        ssp: assets.ssp.clone(),
        axis,
        national: load_national_series(&assets.national_series, axis)?,
        base: load_shares(&assets.base_shares, map)?,
        target: load_shares(&assets.target_shares, map)?,
    };
    bundle_from_parts(emissions, socio, map, assets.urban_threshold)
}

pub fn bundle_from_parts(
    emissions: EmissionsPathway,
    socio: SocioScenario,
    map: &RegionMap,
    urban_threshold: f64,
) -> Result<ScenarioBundle> {
    if socio.national.is_empty() {
        return Err(Error::invalid("socioeconomic scenario has no countries"));
    }
    socio.validate(map)?;
    let (gdp, pop) = socio.downscale(map)?;
    Ok(ScenarioBundle {
        emissions,
        socio,
        gdp,
        urban: urban_mask(pop, urban_threshold),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellCodes, GridSpec};
    use proptest::prelude::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(0.0, 1.0, 0.0, n as f64, 1.0).unwrap()
    }

    fn field(values: Vec<f64>) -> CellField {
        CellField::new(grid(values.len()), Unit::Fraction, values).unwrap()
    }

    #[test]
    fn two_cell_split() {
        let axis = TimeAxis::standard();
        let national = vec![100.0; axis.len];
        let s = field(vec![0.25, 0.75]);
        let out = downscale_series(&national, axis, &s, &s, 2050).unwrap();
        assert_eq!(out.values, vec![25.0, 75.0]);
    }

    #[test]
    fn identical_patterns_are_static() {
        let axis = TimeAxis::standard();
        let s = field(vec![0.1, 0.2, 0.7]);
        let a = interpolate_shares(&s, &s, axis, 2010).unwrap();
        let b = interpolate_shares(&s, &s, axis, 2077).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_shares_are_degenerate() {
        let axis = TimeAxis::standard();
        let z = field(vec![0.0, 0.0]);
        assert!(matches!(
            downscale_series(&[1.0; 91], axis, &z, &z, 2010),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn urban_threshold_is_inclusive() {
        assert_eq!(identify_urban(&field(vec![0.0, 0.0]), 1e6), vec![false, false]);
        assert_eq!(identify_urban(&field(vec![1e6, 999_999.0]), 1e6), vec![true, false]);
    }

    #[test]
    fn growing_city_becomes_urban_when_crossing() {
        let axis = TimeAxis::standard();
        // 800k in 2010 growing 1%/yr: crosses 1e6 when 1.01^t >= 1.25.
        let pop: Vec<f64> = (0..axis.len).map(|t| 8e5 * 1.01f64.powi(t as i32)).collect();
        let crossing = (0..axis.len).find(|&t| pop[t] >= 1e6).map(|t| axis.year(t)).unwrap();
        assert_eq!(crossing, 2033);
        // A series shaped to cross in 2044 exactly.
        let pop: Vec<f64> = (0..axis.len).map(|t| 6e5 + 1.2e4 * t as f64 - 1.0).collect();
        let mask = urban_mask(Cube::from_vec(axis.len, 1, pop.clone()), 1e6);
        let first = (0..axis.len).find(|&t| mask.is_urban(t, 0)).map(|t| axis.year(t));
        let expected = (0..axis.len).find(|&t| pop[t] >= 1e6).map(|t| axis.year(t));
        assert_eq!(first, expected);
        assert_eq!(first, Some(2044));
        assert!((axis.index_of(2044).unwrap()..axis.len).all(|t| mask.is_urban(t, 0)));
    }

    #[test]
    fn emissions_loader_validates() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.csv");
        let mut text = String::from("year,co2_gtc,ch4_mt,n2o_mt\n");
        for y in 2010..=2100 {
            text.push_str(&format!("{y},10,300,7\n"));
        }
        std::fs::write(&good, &text).unwrap();
        let e = load_emissions(&good, ScenarioId::CP).unwrap();
        assert_eq!(e.axis, TimeAxis::standard());
        assert!(e.other_wm2.iter().all(|&v| v == 0.0));

        let gap = dir.path().join("gap.csv");
        std::fs::write(&gap, "year,co2_gtc,ch4_mt,n2o_mt\n2010,1,1,1\n2011,1,1,1\n2013,1,1,1\n").unwrap();
        let err = load_emissions(&gap, ScenarioId::CP).unwrap_err().to_string();
        assert!(err.contains("first missing year 2012"), "{err}");

        let neg = dir.path().join("neg.csv");
        std::fs::write(&neg, "year,co2_gtc,ch4_mt,n2o_mt\n2010,-1,1,1\n").unwrap();
        assert!(load_emissions(&neg, ScenarioId::CP).unwrap_err().to_string().contains("negative"));

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "year,co2_gtc,ch4_mt,n2o_mt\n2010,1,1,1\n2011,x,1,1\n").unwrap();
        let err = load_emissions(&bad, ScenarioId::CP).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
    }

    #[test]
    fn scenario_ids_parse() {
        assert_eq!("CP".parse::<ScenarioId>().unwrap(), ScenarioId::CP);
        assert_eq!("my_case".parse::<ScenarioId>().unwrap(), ScenarioId::Custom("my_case".into()));
        assert!("bad id!".parse::<ScenarioId>().is_err());
    }

    fn three_cell_map() -> RegionMap {
        let g = grid(3);
        let codes = (0..3)
            .map(|c| CellCodes {
                country: Some(if c < 2 { "A" } else { "B" }.into()),
                region: Some("R".into()),
                admin1: None,
                admin2: None,
                land: true,
            })
            .collect::<Vec<_>>();
        RegionMap::from_codes(g, &codes).unwrap()
    }

    #[test]
    fn bundle_conserves_national_totals() {
        let map = three_cell_map();
        let axis = TimeAxis::standard();
        let mut national = BTreeMap::new();
        national.insert(
            "A".to_string(),
            NationalSeries {
                gdp: (0..axis.len).map(|t| 1e12 * 1.02f64.powi(t as i32)).collect(),
                population: vec![1e8; axis.len],
            },
        );
        national.insert(
            "B".to_string(),
            NationalSeries {
                gdp: vec![5e11; axis.len],
                population: vec![2e7; axis.len],
            },
        );
        let shares = |a: f64| ShareGrid {
            gdp: field(vec![a, 1.0 - a, 1.0]),
            population: field(vec![1.0 - a, a, 1.0]),
        };
        let socio = SocioScenario {
            ssp: "SSP2".into(),
            axis,
            national: national.clone(),
            base: shares(0.3),
            target: shares(0.6),
        };
        let b = bundle_from_parts(EmissionsPathway::zeros(ScenarioId::CP, axis), socio, &map, 5e7).unwrap();
        for t in 0..axis.len {
            let a: f64 = b.gdp.get(t, 0) + b.gdp.get(t, 1);
            assert!((a - national["A"].gdp[t]).abs() <= 1e-9 * national["A"].gdp[t]);
            assert_eq!(b.gdp.get(t, 2), 5e11);
        }
        assert!(b.urban.is_urban(0, 0));
        assert!(!b.urban.is_urban(0, 2));
    }

    proptest! {
        #[test]
        fn downscaling_conserves_mass(
            raw_base in proptest::collection::vec(0.0f64..1.0, 2..40),
            seed in 0.0f64..1.0,
            year in 2010i32..=2100,
            total in 1.0f64..1e13,
        ) {
            let n = raw_base.len();
            let raw_target: Vec<f64> = raw_base.iter().enumerate().map(|(i, b)| ((i as f64 + seed) * 0.731).fract() + b * 0.1).collect();
            let norm = |v: &[f64]| { let s: f64 = v.iter().sum::<f64>().max(1e-300); v.iter().map(|x| x / s).collect::<Vec<_>>() };
            let (b, t) = (field(norm(&raw_base)), field(norm(&raw_target)));
            prop_assume!(b.values.iter().sum::<f64>() > 0.5);
            let axis = TimeAxis::standard();
            let out = downscale_series(&vec![total; axis.len], axis, &b, &t, year).unwrap();
            let sum: f64 = out.values.iter().sum();
            prop_assert!((sum - total).abs() <= 1e-9 * total);
            prop_assert_eq!(out.values.len(), n);
        }

        #[test]
        fn ordered_shares_move_monotonically(b0 in 0.0f64..0.5, t0 in 0.5f64..1.0, y in 2010i32..2100) {
            let axis = TimeAxis::standard();
            let base = field(vec![b0, 1.0 - b0]);
            let target = field(vec![t0, 1.0 - t0]);
            let s1 = interpolate_shares(&base, &target, axis, y).unwrap();
            let s2 = interpolate_shares(&base, &target, axis, y + 1).unwrap();
            prop_assert!(s2[0] >= s1[0] - 1e-15);
            prop_assert!(s2[1] <= s1[1] + 1e-15);
        }

        #[test]
        fn more_population_never_removes_urban(pop in proptest::collection::vec(0.0f64..3e6, 1..30), bump in 0.0f64..1e6) {
            let before = identify_urban(&field(pop.clone()), 1e6);
            let after = identify_urban(&field(pop.iter().map(|p| p + bump).collect()), 1e6);
            for (a, b) in before.iter().zip(&after) {
                prop_assert!(!a || *b);
            }
        }
    }
}
