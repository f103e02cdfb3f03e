//! Spatial lattice, region mappings and conservative aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::axis::Unit;
use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Code written in region columns for cells without a value.
pub const NO_CODE: &str = "-";

/// Regular lat/lon lattice. Cells are numbered row-major from the south-west
/// corner: `index = row * n_lon + col`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub resolution: f64,
    pub n_lat: usize,
    pub n_lon: usize,
}

impl GridSpec {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::OutOfRange {
                what: "resolution",
                value: resolution,
            });
        }
        if lat_min < -90.0 || lat_max > 90.0 || lat_min >= lat_max || lon_min >= lon_max {
            return Err(Error::invalid(format!(
                "bad bounding box lat {lat_min}..{lat_max}, lon {lon_min}..{lon_max}"
            )));
        }
        let count = |span: f64| -> Result<usize> {
            let n = span / resolution;
            let rounded = n.round();
            if (n - rounded).abs() > 1e-6 || rounded < 1.0 {
                return Err(Error::invalid(format!(
                    "extent {span} is not a whole number of {resolution}° cells"
                )));
            }
            Ok(rounded as usize)
        };
        Ok(Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            resolution,
            n_lat: count(lat_max - lat_min)?,
            n_lon: count(lon_max - lon_min)?,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn row_col(&self, cell: usize) -> (usize, usize) {
        (cell / self.n_lon, cell % self.n_lon)
    }

    /// Centre of a cell as `(lat, lon)`.
    pub fn center(&self, cell: usize) -> (f64, f64) {
        let (row, col) = self.row_col(cell);
        (
            self.lat_min + (row as f64 + 0.5) * self.resolution,
            self.lon_min + (col as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing a point. Points on the upper edges belong to the last row/column.
    pub fn cell_at(&self, lat: f64, lon: f64) -> Option<usize> {
        if lat < self.lat_min || lat > self.lat_max || lon < self.lon_min || lon > self.lon_max {
            return None;
        }
        let row = (((lat - self.lat_min) / self.resolution).floor() as usize).min(self.n_lat - 1);
        let col = (((lon - self.lon_min) / self.resolution).floor() as usize).min(self.n_lon - 1);
        Some(row * self.n_lon + col)
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let (lat, _) = self.center(cell);
        cell_area(lat, self.resolution).expect("cell centres lie within ±90°")
    }

    pub fn areas(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|c| self.cell_area(c)).collect()
    }

    /// Short identity string used in mismatch diagnostics and metadata.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lat[{},{}] lon[{},{}] res {} ({}x{})",
            self.lat_min, self.lat_max, self.lon_min, self.lon_max, self.resolution, self.n_lat, self.n_lon
        )
    }
}

/// Area in km² of a `resolution`×`resolution` cell centred at `lat` on a
/// spherical Earth: R²·Δλ·Δφ·cos φ.
pub fn cell_area(lat: f64, resolution: f64) -> Result<f64> {
    if !(lat.abs() <= 90.0) {
        return Err(Error::OutOfRange {
            what: "latitude",
            value: lat,
        });
    }
    let d = resolution.to_radians();
    Ok(EARTH_RADIUS_KM * EARTH_RADIUS_KM * d * d * lat.to_radians().cos().max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Country,
    Region,
    State,
    Municipality,
    Global,
}

impl Level {
    pub fn parse(s: &str) -> Option<Level> {
        Some(match s {
            "country" => Level::Country,
            "region" => Level::Region,
            "state" | "admin1" => Level::State,
            "municipality" | "admin2" => Level::Municipality,
            "global" => Level::Global,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Country => "country",
            Level::Region => "region",
            Level::State => "state",
            Level::Municipality => "municipality",
            Level::Global => "global",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const GLOBAL_KEY: &str = "global";

/// Interned per-cell code column.
#[derive(Debug, Clone, Default, PartialEq)]
struct CodeColumn {
    names: Vec<String>,
    lookup: HashMap<String, u32>,
    per_cell: Vec<Option<u32>>,
}

impl CodeColumn {
    fn with_cells(n: usize) -> Self {
        Self {
            per_cell: vec![None; n],
            ..Default::default()
        }
    }

    fn set(&mut self, cell: usize, code: Option<&str>) {
        self.per_cell[cell] = code.map(|c| match self.lookup.get(c) {
            Some(&i) => i,
            None => {
                let i = self.names.len() as u32;
                self.names.push(c.to_string());
                self.lookup.insert(c.to_string(), i);
                i
            }
        });
    }

    fn get(&self, cell: usize) -> Option<&str> {
        self.per_cell[cell].map(|i| self.names[i as usize].as_str())
    }
}

/// Per-cell codes for one cell, as read from or written to a grid file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellCodes {
    pub country: Option<String>,
    pub region: Option<String>,
    pub admin1: Option<String>,
    pub admin2: Option<String>,
    pub land: bool,
}

/// Land mask and country / macro-region / admin mappings on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    grid: GridSpec,
    land: Vec<bool>,
    country: CodeColumn,
    region: CodeColumn,
    admin1: CodeColumn,
    admin2: CodeColumn,
}

impl RegionMap {
    pub fn from_codes(grid: GridSpec, codes: &[CellCodes]) -> Result<Self> {
        let n = grid.n_cells();
        if codes.len() != n {
            return Err(Error::invalid(format!(
                "region map has {} cells, grid expects {n}",
                codes.len()
            )));
        }
        let mut map = Self {
            grid,
            land: vec![false; n],
            country: CodeColumn::with_cells(n),
            region: CodeColumn::with_cells(n),
            admin1: CodeColumn::with_cells(n),
            admin2: CodeColumn::with_cells(n),
        };
        let mut admin1_parent: HashMap<&str, &str> = HashMap::new();
        let mut admin2_parent: HashMap<&str, &str> = HashMap::new();
        for (cell, c) in codes.iter().enumerate() {
            if c.land {
                let (Some(country), Some(_)) = (&c.country, &c.region) else {
                    return Err(Error::invalid(format!(
                        "land cell {cell} lacks a country or region code"
                    )));
                };
                if let Some(a1) = &c.admin1 {
                    check_parent(&mut admin1_parent, a1, country, "admin1")?;
                }
                if let Some(a2) = &c.admin2 {
                    let Some(a1) = &c.admin1 else {
                        return Err(Error::invalid(format!("cell {cell} has admin2 without admin1")));
                    };
                    check_parent(&mut admin2_parent, a2, a1, "admin2")?;
                }
            } else if c.country.is_some() || c.region.is_some() || c.admin1.is_some() || c.admin2.is_some() {
                return Err(Error::invalid(format!("water cell {cell} carries region codes")));
            }
            map.land[cell] = c.land;
            map.country.set(cell, c.country.as_deref());
            map.region.set(cell, c.region.as_deref());
            map.admin1.set(cell, c.admin1.as_deref());
            map.admin2.set(cell, c.admin2.as_deref());
        }
        Ok(map)
    }

    /// Every cell land, one country and region.
    pub fn single_country(grid: GridSpec, country: &str, region: &str) -> Self {
        let codes: Vec<CellCodes> = (0..grid.n_cells())
            .map(|_| CellCodes {
                country: Some(country.into()),
                region: Some(region.into()),
                admin1: None,
                admin2: None,
                land: true,
            })
            .collect();
        Self::from_codes(grid, &codes).expect("uniform map is valid")
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_cells(&self) -> usize {
        self.land.len()
    }

    pub fn is_land(&self, cell: usize) -> bool {
        self.land[cell]
    }

    pub fn land_cells(&self) -> Vec<usize> {
        (0..self.n_cells()).filter(|&c| self.land[c]).collect()
    }

    pub fn code(&self, level: Level, cell: usize) -> Option<&str> {
        match level {
            Level::Country => self.country.get(cell),
            Level::Region => self.region.get(cell),
            Level::State => self.admin1.get(cell),
            Level::Municipality => self.admin2.get(cell),
            Level::Global => self.land[cell].then_some(GLOBAL_KEY),
        }
    }

    pub fn cell_codes(&self, cell: usize) -> CellCodes {
        CellCodes {
            country: self.country.get(cell).map(String::from),
            region: self.region.get(cell).map(String::from),
            admin1: self.admin1.get(cell).map(String::from),
            admin2: self.admin2.get(cell).map(String::from),
            land: self.land[cell],
        }
    }

    /// Sorted distinct keys present at a level.
    pub fn keys(&self, level: Level) -> Vec<String> {
        let names = match level {
            Level::Country => &self.country.names,
            Level::Region => &self.region.names,
            Level::State => &self.admin1.names,
            Level::Municipality => &self.admin2.names,
            Level::Global => return vec![GLOBAL_KEY.to_string()],
        };
        let mut keys = names.clone();
        keys.sort();
        keys
    }

    /// Locate a code at any level, most specific first.
    pub fn find_key(&self, key: &str) -> Option<Level> {
        if key == GLOBAL_KEY {
            return Some(Level::Global);
        }
        [Level::Municipality, Level::State, Level::Country, Level::Region]
            .into_iter()
            .find(|&l| self.column(l).is_some_and(|c| c.lookup.contains_key(key)))
    }

    fn column(&self, level: Level) -> Option<&CodeColumn> {
        match level {
            Level::Country => Some(&self.country),
            Level::Region => Some(&self.region),
            Level::State => Some(&self.admin1),
            Level::Municipality => Some(&self.admin2),
            Level::Global => None,
        }
    }

    /// Country → region lookup (first cell wins; codes nest by construction).
    pub fn region_of_country(&self, country: &str) -> Option<&str> {
        (0..self.n_cells())
            .find(|&c| self.country.get(c) == Some(country))
            .and_then(|c| self.region.get(c))
    }

    pub fn ensure_same_grid(&self, other: &GridSpec) -> Result<()> {
        if &self.grid != other {
            return Err(Error::GridMismatch {
                expected: self.grid.id(),
                found: other.id(),
            });
        }
        Ok(())
    }
}

fn check_parent<'a>(
    parents: &mut HashMap<&'a str, &'a str>,
    child: &'a str,
    parent: &'a str,
    kind: &str,
) -> Result<()> {
    match parents.insert(child, parent) {
        Some(prev) if prev != parent => Err(Error::invalid(format!(
            "{kind} code `{child}` appears under both `{prev}` and `{parent}`"
        ))),
        _ => Ok(()),
    }
}

/// Per-cell scalar field with unit metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub grid: GridSpec,
    pub unit: Unit,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: GridSpec, unit: Unit, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::invalid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        Ok(Self { grid, unit, values })
    }

    pub fn filled(grid: GridSpec, unit: Unit, value: f64) -> Self {
        Self {
            values: vec![value; grid.n_cells()],
            grid,
            unit,
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Sum of member-cell values per key at `level`. Water cells never contribute;
/// land cells without a code at that level are skipped.
pub fn aggregate(field: &CellField, level: Level, map: &RegionMap) -> Result<BTreeMap<String, f64>> {
    map.ensure_same_grid(&field.grid)?;
    Ok(aggregate_values(&field.values, level, map))
}

/// Unchecked form of [`aggregate`] over a raw slice on the map's grid.
pub fn aggregate_values(values: &[f64], level: Level, map: &RegionMap) -> BTreeMap<String, f64> {
    debug_assert_eq!(values.len(), map.n_cells());
    let mut out = BTreeMap::new();
    for (cell, &v) in values.iter().enumerate() {
        if !map.land[cell] {
            continue;
        }
        if let Some(key) = map.code(level, cell) {
            *out.entry(key.to_string()).or_insert(0.0) += v;
        }
    }
    out
}

/// Cells carrying `key` at `level`, in ascending index order.
pub fn lookup_cells(map: &RegionMap, level: Level, key: &str) -> Result<Vec<usize>> {
    let cells: Vec<usize> = (0..map.n_cells())
        .filter(|&c| map.land[c] && map.code(level, c) == Some(key))
        .collect();
    if cells.is_empty() {
        return Err(Error::UnknownKey {
            kind: level_kind(level),
            key: key.to_string(),
        });
    }
    Ok(cells)
}

fn level_kind(level: Level) -> &'static str {
    match level {
        Level::Country => "country",
        Level::Region => "region",
        Level::State => "state",
        Level::Municipality => "municipality",
        Level::Global => "global key",
    }
}

/// Member cells for every key at `level` (land cells only).
pub fn partition(map: &RegionMap, level: Level) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for cell in 0..map.n_cells() {
        if !map.land[cell] {
            continue;
        }
        if let Some(key) = map.code(level, cell) {
            out.entry(key.to_string()).or_default().push(cell);
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct GridRow {
    lat: f64,
    lon: f64,
    country: String,
    region: String,
    admin1: String,
    admin2: String,
    land: u8,
}

fn code_opt(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty() && t != NO_CODE).then(|| t.to_string())
}

/// Read a grid + region map from delimited text: one row per cell with
/// columns `lat,lon,country,region,admin1,admin2,land`. The lattice is
/// inferred from the cell centres; every cell must appear exactly once.
pub fn load_grid(path: &Path) -> Result<RegionMap> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<GridRow>().enumerate() {
        let row = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        if row.land > 1 {
            return Err(Error::parse(path, i + 2, "land flag must be 0 or 1"));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "grid file has no cells"));
    }
    let lat_vals: BTreeSet<i64> = rows.iter().map(|r| quantize(r.lat)).collect();
    let lon_vals: BTreeSet<i64> = rows.iter().map(|r| quantize(r.lon)).collect();
    let spacing = |vals: &BTreeSet<i64>| -> Option<f64> {
        vals.iter()
            .zip(vals.iter().skip(1))
            .map(|(a, b)| (b - a) as f64 / QUANT)
            .reduce(f64::min)
    };
    let res = match (spacing(&lat_vals), spacing(&lon_vals)) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => {
            return Err(Error::parse(path, 1, "cannot infer resolution from a single cell"));
        }
    };
    let lat_lo = *lat_vals.first().unwrap() as f64 / QUANT;
    let lat_hi = *lat_vals.last().unwrap() as f64 / QUANT;
    let lon_lo = *lon_vals.first().unwrap() as f64 / QUANT;
    let lon_hi = *lon_vals.last().unwrap() as f64 / QUANT;
    let grid = GridSpec::new(
        lat_lo - res / 2.0,
        lat_hi + res / 2.0,
        lon_lo - res / 2.0,
        lon_hi + res / 2.0,
        res,
    )?;
    let mut codes: Vec<Option<CellCodes>> = vec![None; grid.n_cells()];
    for (i, r) in rows.iter().enumerate() {
        let cell = grid
            .cell_at(r.lat, r.lon)
            .ok_or_else(|| Error::parse(path, i + 2, "cell centre outside inferred grid"))?;
        if codes[cell].is_some() {
            return Err(Error::parse(path, i + 2, format!("duplicate cell at ({}, {})", r.lat, r.lon)));
        }
        codes[cell] = Some(CellCodes {
            country: code_opt(&r.country),
            region: code_opt(&r.region),
            admin1: code_opt(&r.admin1),
            admin2: code_opt(&r.admin2),
            land: r.land == 1,
        });
    }
    let codes: Vec<CellCodes> = codes
        .into_iter()
        .enumerate()
        .map(|(c, v)| {
            v.ok_or_else(|| {
                let (lat, lon) = grid.center(c);
                Error::parse(path, 0, format!("missing cell at ({lat}, {lon})"))
            })
        })
        .collect::<Result<_>>()?;
    RegionMap::from_codes(grid, &codes)
}

const QUANT: f64 = 1e6;

fn quantize(x: f64) -> i64 {
    (x * QUANT).round() as i64
}

pub fn write_grid(path: &Path, map: &RegionMap) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "lat,lon,country,region,admin1,admin2,land").unwrap();
    for cell in 0..map.n_cells() {
        let (lat, lon) = map.grid.center(cell);
        let c = map.cell_codes(cell);
        let s = |o: &Option<String>| o.clone().unwrap_or_else(|| NO_CODE.to_string());
        writeln!(
            out,
            "{lat},{lon},{},{},{},{},{}",
            s(&c.country),
            s(&c.region),
            s(&c.admin1),
            s(&c.admin2),
            u8::from(c.land)
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, 0, format!("{other:?}")),
    }
}
