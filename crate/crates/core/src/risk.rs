//! Threshold risk indices: exceedance dates, joint dates, exceedance
//! probabilities, time of emergence, percentile fields and hotspots.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::axis::{TimeAxis, Unit};
use crate::damage::VariantId;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::stats;

pub const DEFAULT_WINDOW: usize = 21;
pub const DEFAULT_TOE_QUANTILE: f64 = 0.05;
pub const DEFAULT_TOE_NOISE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    /// Pattern-scaled local warming (°C), without the urban increment.
    #[serde(rename = "dT")]
    DeltaT,
    /// Precipitation change (%).
    #[serde(rename = "dP")]
    DeltaP,
    /// Annual loss as % of cell GDP.
    #[serde(rename = "loss_pct")]
    LossPct,
    /// Annual loss per cell (US$2005).
    #[serde(rename = "loss_value")]
    LossValue,
}

impl Variable {
    pub const ALL: [Variable; 4] = [Variable::DeltaT, Variable::DeltaP, Variable::LossPct, Variable::LossValue];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variable::DeltaT => "dT",
            Variable::DeltaP => "dP",
            Variable::LossPct => "loss_pct",
            Variable::LossValue => "loss_value",
        }
    }

    pub fn unit(&self) -> Unit {
        match self {
            Variable::DeltaT => Unit::Celsius,
            Variable::DeltaP | Variable::LossPct => Unit::Percent,
            Variable::LossValue => Unit::Usd2005,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            Variable::DeltaT => 1,
            Variable::DeltaP => 2,
            Variable::LossPct => 3,
            Variable::LossValue => 4,
        }
    }

    pub fn needs_variant(&self) -> bool {
        matches!(self, Variable::LossPct | Variable::LossValue)
    }
}

impl FromStr for Variable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::MissingVariable(s.to_string()))
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

impl Comparator {
    #[inline]
    pub fn holds(&self, value: f64, level: f64) -> bool {
        match self {
            Comparator::Ge => value >= level,
            Comparator::Le => value <= level,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
        }
    }
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskThreshold {
    pub variable: Variable,
    pub comparator: Comparator,
    pub level: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Damage variant for loss variables; falls back to the index default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantId>,
}

impl RiskThreshold {
    pub fn new(variable: Variable, comparator: Comparator, level: f64) -> Self {
        Self {
            variable,
            comparator,
            level,
            window: DEFAULT_WINDOW,
            variant: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.level.is_finite() {
            return Err(Error::invalid(format!("threshold level for {} must be finite", self.variable)));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::invalid(format!(
                "smoothing window for {} must be odd and at least 1, got {}",
                self.variable, self.window
            )));
        }
        Ok(())
    }
}

fn default_k_moderate() -> usize {
    2
}
fn default_k_high() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskIndexSpec {
    pub thresholds: Vec<RiskThreshold>,
    #[serde(default = "default_k_moderate")]
    pub k_moderate: usize,
    #[serde(default = "default_k_high")]
    pub k_high: usize,
    /// Variant used by loss thresholds that do not name one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantId>,
}

impl RiskIndexSpec {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::invalid("risk index needs at least one threshold"));
        }
        for t in &self.thresholds {
            t.validate()?;
        }
        let n = self.thresholds.len();
        if !(1 <= self.k_moderate && self.k_moderate <= self.k_high && self.k_high <= n) {
            return Err(Error::invalid(format!(
                "need 1 ≤ k_moderate ≤ k_high ≤ {n}, got k_moderate = {}, k_high = {}",
                self.k_moderate, self.k_high
            )));
        }
        Ok(())
    }

    /// Variant each threshold reads, if it is a loss threshold.
    pub fn resolved_variant(&self, t: &RiskThreshold, fallback: VariantId) -> Option<VariantId> {
        t.variable.needs_variant().then(|| t.variant.or(self.variant).unwrap_or(fallback))
    }

    /// Parse the line-oriented thresholds format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = RiskIndexSpec {
            thresholds: Vec::new(),
            k_moderate: 2,
            k_high: 3,
            variant: None,
        };
        let bad = |line: usize, msg: String| Error::Parse {
            path: "thresholds".into(),
            line,
            message: msg,
        };
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let header = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, _)| matches!(*k, "k_moderate" | "k_high" | "variant"));
            if let Some((key, value)) = header {
                match key {
                    "k_moderate" => {
                        spec.k_moderate = value.parse().map_err(|_| bad(ln, format!("bad k_moderate `{value}`")))?
                    }
                    "k_high" => spec.k_high = value.parse().map_err(|_| bad(ln, format!("bad k_high `{value}`")))?,
                    _ => spec.variant = Some(value.parse().map_err(|e: Error| bad(ln, e.to_string()))?),
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(var), Some(cmp), Some(level)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad(ln, format!("expected `<variable> <comparator> <level>`, got `{line}`")));
            };
            let variable: Variable = var.parse().map_err(|_| {
                bad(ln, format!("unknown variable `{var}`; expected one of dT, dP, loss_pct, loss_value"))
            })?;
            let comparator = match cmp {
                ">=" | "≥" => Comparator::Ge,
                "<=" | "≤" => Comparator::Le,
                other => return Err(bad(ln, format!("unknown comparator `{other}`; use >= or <="))),
            };
            let level: f64 = level.parse().map_err(|_| bad(ln, format!("bad level `{level}`")))?;
            let mut t = RiskThreshold::new(variable, comparator, level);
            for opt in parts {
                match opt.split_once('=') {
                    Some(("window", w)) => t.window = w.parse().map_err(|_| bad(ln, format!("bad window `{w}`")))?,
                    Some(("variant", v)) => t.variant = Some(v.parse().map_err(|e: Error| bad(ln, e.to_string()))?),
                    _ => return Err(bad(ln, format!("unknown option `{opt}`"))),
                }
            }
            t.validate().map_err(|e| bad(ln, e.to_string()))?;
            spec.thresholds.push(t);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("k_moderate = {}\nk_high = {}\n", self.k_moderate, self.k_high);
        if let Some(v) = self.variant {
            s.push_str(&format!("variant = {v}\n"));
        }
        for t in &self.thresholds {
            s.push_str(&format!("{} {} {} window={}", t.variable, t.comparator.as_str(), t.level, t.window));
            if let Some(v) = t.variant {
                s.push_str(&format!(" variant={v}"));
            }
            s.push('\n');
        }
        s
    }

    /// The packaged four-threshold index: 3 °C warming, 10 % drying,
    /// 10 %/yr losses and US$1 billion/yr per cell.
    pub fn default_index() -> Self {
        RiskIndexSpec {
            thresholds: vec![
                RiskThreshold::new(Variable::DeltaT, Comparator::Ge, 3.0),
                RiskThreshold::new(Variable::DeltaP, Comparator::Le, -10.0),
                RiskThreshold::new(Variable::LossPct, Comparator::Ge, 10.0),
                RiskThreshold::new(Variable::LossValue, Comparator::Ge, 1e9),
            ],
            k_moderate: 2,
            k_high: 3,
            variant: Some(VariantId::RPUW),
        }
    }
}

/// Centered running mean, truncated at the series ends.
pub fn running_mean(series: &[f64], window: usize) -> Vec<f64> {
    let n = series.len();
    let half = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in series {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// First year the smoothed series satisfies the threshold.
pub fn exceedance_date(series: &[f64], t: &RiskThreshold, axis: TimeAxis) -> Option<i32> {
    let smooth = if t.window <= 1 { series.to_vec() } else { running_mean(series, t.window) };
    smooth
        .iter()
        .position(|&v| t.comparator.holds(v, t.level))
        .map(|i| axis.year(i))
}

/// k-th smallest defined date.
pub fn joint_exceedance_date(dates: &[Option<i32>], k: usize) -> Option<i32> {
    assert!(k >= 1 && k <= dates.len(), "k must lie in 1..=number of thresholds");
    let mut d: Vec<i32> = dates.iter().flatten().copied().collect();
    if d.len() < k {
        return None;
    }
    d.sort_unstable();
    Some(d[k - 1])
}

/// Fraction of members whose exceedance date is on or before `year`.
pub fn exceedance_probability(dates: &[Option<i32>], year: i32) -> Result<f64> {
    if dates.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    Ok(dates.iter().filter(|d| d.is_some_and(|y| y <= year)).count() as f64 / dates.len() as f64)
}

/// First year from which the q-quantile of the ensemble stays strictly
/// above `noise_level` through the end of the series.
pub fn time_of_emergence(ensemble: &[Vec<f64>], noise_level: f64, q: f64, axis: TimeAxis) -> Result<Option<i32>> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(Error::OutOfRange { what: "emergence quantile", value: q });
    }
    if ensemble.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    let n = ensemble[0].len();
    let mut first = None;
    for y in (0..n).rev() {
        let col: Vec<f64> = ensemble.iter().map(|m| m[y]).collect();
        if stats::quantile(&col, q) > noise_level {
            first = Some(axis.year(y));
        } else {
            break;
        }
    }
    Ok(first)
}

/// Per-cell date (or none) with the probability of a date this century.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceMap {
    pub grid: GridSpec,
    pub axis: TimeAxis,
    pub variable_code: u8,
    pub dates: Vec<Option<i32>>,
    pub probability: Vec<f64>,
}

impl ExceedanceMap {
    pub fn dated_cells(&self) -> usize {
        self.dates.iter().filter(|d| d.is_some()).count()
    }

    /// Restrict to cells whose centers fall in the box; returned cell ids
    /// index the full grid.
    pub fn subset(&self, cells: &[usize]) -> Vec<(usize, Option<i32>, f64)> {
        cells.iter().map(|&c| (c, self.dates[c], self.probability[c])).collect()
    }
}

/// Moderate and high risk-level maps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskLevels {
    pub moderate: ExceedanceMap,
    pub high: ExceedanceMap,
}

pub const MODERATE_CODE: u8 = 10;
pub const HIGH_CODE: u8 = 11;

/// How per-realization information is reduced to one date per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DateMode {
    /// Lower median over realizations of each realization's date.
    #[default]
    MedianOfDates,
    /// Date computed on the per-year ensemble median of each variable.
    MedianPath,
}

/// Per-cell joint dates for one realization. `series[t]` holds the values
/// of threshold t as a year-major `years × cells` array.
pub fn realization_joint_dates(
    spec: &RiskIndexSpec,
    series: &[Vec<f64>],
    cells: usize,
    axis: TimeAxis,
) -> (Vec<Option<i32>>, Vec<Option<i32>>) {
    let mut moderate = Vec::with_capacity(cells);
    let mut high = Vec::with_capacity(cells);
    let mut buf = vec![0.0; axis.len];
    let mut dates = vec![None; spec.thresholds.len()];
    for c in 0..cells {
        for (ti, t) in spec.thresholds.iter().enumerate() {
            for y in 0..axis.len {
                buf[y] = series[ti][y * cells + c];
            }
            dates[ti] = exceedance_date(&buf, t, axis);
        }
        moderate.push(joint_exceedance_date(&dates, spec.k_moderate));
        high.push(joint_exceedance_date(&dates, spec.k_high));
    }
    (moderate, high)
}

/// Combine per-realization per-cell dates into a map.
pub fn combine_dates(per_realization: &[Vec<Option<i32>>], grid: GridSpec, axis: TimeAxis, code: u8) -> ExceedanceMap {
    let cells = grid.n_cells();
    let n = per_realization.len();
    let mut dates = Vec::with_capacity(cells);
    let mut probability = Vec::with_capacity(cells);
    let mut col = Vec::with_capacity(n);
    for c in 0..cells {
        col.clear();
        col.extend(per_realization.iter().map(|r| r[c]));
        dates.push(stats::median_date(&col));
        probability.push(col.iter().filter(|d| d.is_some()).count() as f64 / n as f64);
    }
    ExceedanceMap {
        grid,
        axis,
        variable_code: code,
        dates,
        probability,
    }
}

/// Cells dated on or before `cutoff_year`, earliest first (ties by cell id).
pub fn hotspots(map: &ExceedanceMap, cutoff_year: i32) -> Vec<usize> {
    let mut cells: Vec<(i32, usize)> = map
        .dates
        .iter()
        .enumerate()
        .filter_map(|(c, d)| d.filter(|&y| y <= cutoff_year).map(|y| (y, c)))
        .collect();
    cells.sort_unstable();
    cells.into_iter().map(|(_, c)| c).collect()
}

/// Per-cell empirical q-quantile over members (each a per-cell slice).
pub fn percentile_field(members: &[&[f64]], q: f64) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange { what: "quantile", value: q });
    }
    let cells = members[0].len();
    let mut col = Vec::with_capacity(members.len());
    Ok((0..cells)
        .map(|c| {
            col.clear();
            col.extend(members.iter().map(|m| m[c]));
            stats::sort_finite(&mut col);
            stats::quantile_sorted(&col, q)
        })
        .collect())
}

pub const NA: &str = "NA";

/// `lat,lon,date,probability`, one row per cell in `cells`.
pub fn map_to_csv(map: &ExceedanceMap, cells: &[usize]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "lat,lon,date,probability").unwrap();
    for &c in cells {
        let (lat, lon) = map.grid.center(c);
        let date = map.dates[c].map(|y| y.to_string()).unwrap_or_else(|| NA.to_string());
        writeln!(out, "{lat},{lon},{date},{:.6}", map.probability[c]).unwrap();
    }
    out
}

pub const RASTER_MAGIC: &[u8; 8] = b"PRSKRAST";
pub const RASTER_VERSION: u32 = 1;

/// Binary raster: header then two little-endian f32 layers (date with NaN
/// for none, probability), row-major from the south-west corner.
pub fn map_to_raster(map: &ExceedanceMap) -> Vec<u8> {
    let g = &map.grid;
    let mut out = Vec::with_capacity(64 + 8 * g.n_cells());
    out.extend_from_slice(RASTER_MAGIC);
    out.extend_from_slice(&RASTER_VERSION.to_le_bytes());
    for v in [g.lat_min, g.lat_max, g.lon_min, g.lon_max, g.resolution] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(g.n_lat as u32).to_le_bytes());
    out.extend_from_slice(&(g.n_lon as u32).to_le_bytes());
    out.push(map.variable_code);
    out.extend_from_slice(&[0u8; 3]);
    out.extend_from_slice(&map.axis.start.to_le_bytes());
    out.extend_from_slice(&map.axis.end().to_le_bytes());
    for d in &map.dates {
        let v = d.map(|y| y as f32).unwrap_or(f32::NAN);
        out.extend_from_slice(&v.to_le_bytes());
    }
    for p in &map.probability {
        out.extend_from_slice(&(*p as f32).to_le_bytes());
    }
    out
}

/// Decoded raster header and layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub grid: GridSpec,
    pub variable_code: u8,
    pub first_year: i32,
    pub last_year: i32,
    pub dates: Vec<f32>,
    pub probability: Vec<f32>,
}

pub fn read_raster(bytes: &[u8]) -> Result<Raster> {
    let bad = |m: &str| Error::invalid(format!("raster: {m}"));
    if bytes.len() < 76 || &bytes[..8] != RASTER_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != RASTER_VERSION {
        return Err(bad("unsupported version"));
    }
    let grid = GridSpec::new(f64_at(12), f64_at(20), f64_at(28), f64_at(36), f64_at(44))?;
    let n = grid.n_cells();
    if (u32_at(52) as usize, u32_at(56) as usize) != (grid.n_lat, grid.n_lon) {
        return Err(bad("shape disagrees with grid"));
    }
    let code = bytes[60];
    let first_year = i32::from_le_bytes(bytes[64..68].try_into().unwrap());
    let last_year = i32::from_le_bytes(bytes[68..72].try_into().unwrap());
    let body = &bytes[72..];
    if body.len() != 8 * n {
        return Err(bad("layer size disagrees with grid"));
    }
    let layer = |k: usize| -> Vec<f32> {
        (0..n)
            .map(|c| f32::from_le_bytes(body[4 * (k * n + c)..4 * (k * n + c) + 4].try_into().unwrap()))
            .collect()
    };
    Ok(Raster {
        grid,
        variable_code: code,
        first_year,
        last_year,
        dates: layer(0),
        probability: layer(1),
    })
}
