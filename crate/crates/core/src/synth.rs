//! Synthetic demo inputs: a Mexico grid at 0.5° and a coarse world grid,
//! emissions proxies, socioeconomic shares, climate patterns and damage
//! calibrations. Output depends only on the seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::axis::{TimeAxis, Unit};
use crate::climate::{concentrations, ClimateParams, EsmPattern};
use crate::damage::{CalibrationFiles, DamageParams, Quadratic, WeitzmanParams};
use crate::engine::config::{DamageConfig, RiskConfig, RunConfig, SocioConfig};
use crate::error::{Error, Result};
use crate::grid::{write_grid, CellCodes, CellField, GridSpec, Level, RegionMap};
use crate::risk::RiskIndexSpec;
use crate::scenario::{write_emissions, write_national_series, write_shares, EmissionsPathway, NationalSeries, ScenarioId, ShareGrid};

pub const DEFAULT_SEED: u64 = 20_240_101;
pub const N_PATTERNS: usize = 8;

/// 2024 GDP of the focus country in the Mexico demo (US$2005).
pub const MEXICO_GDP_2024: f64 = 1779e9;

type Polygon = &'static [(f64, f64)];

// (lon, lat) vertices.
const MEX_MAINLAND: Polygon = &[
    (-114.8, 32.5), (-114.7, 32.7), (-111.0, 31.3), (-108.2, 31.3), (-108.2, 31.8), (-106.5, 31.8),
    (-104.5, 29.6), (-103.0, 29.0), (-102.4, 29.8), (-101.0, 29.8), (-99.5, 27.5), (-97.2, 25.9),
    (-97.7, 24.0), (-97.3, 21.5), (-96.0, 19.5), (-94.5, 18.2), (-92.0, 18.6), (-90.5, 19.5),
    (-90.4, 21.0), (-87.0, 21.5), (-87.5, 18.5), (-88.3, 18.0), (-89.1, 17.8), (-90.9, 17.8),
    (-91.4, 17.3), (-90.4, 16.4), (-91.7, 16.0), (-92.2, 14.5), (-94.0, 16.1), (-96.0, 15.7),
    (-98.5, 16.3), (-101.5, 17.8), (-104.3, 19.0), (-105.5, 20.0), (-105.5, 21.5), (-107.0, 23.8),
    (-109.0, 25.5), (-110.5, 27.5), (-112.2, 29.0), (-113.2, 31.0),
];
const MEX_BAJA: Polygon = &[
    (-117.1, 32.5), (-114.8, 32.5), (-114.8, 31.5), (-114.5, 30.0), (-112.8, 28.5), (-111.5, 26.5),
    (-110.3, 24.2), (-109.4, 23.0), (-110.0, 22.9), (-112.0, 24.6), (-114.0, 27.5), (-115.8, 29.8),
    (-116.7, 31.5),
];
const USA_SOUTH: Polygon = &[
    (-118.5, 34.0), (-117.1, 32.5), (-114.7, 32.7), (-111.0, 31.3), (-108.2, 31.3), (-108.2, 31.8),
    (-106.5, 31.8), (-104.5, 29.6), (-103.0, 29.0), (-102.4, 29.8), (-101.0, 29.8), (-99.5, 27.5),
    (-97.2, 25.9), (-97.4, 27.5), (-96.0, 28.6), (-94.0, 29.6), (-90.0, 29.2), (-89.0, 30.3),
    (-85.5, 30.0), (-85.5, 34.0),
];
const GUATEMALA: Polygon = &[
    (-92.2, 14.5), (-91.7, 16.0), (-90.4, 16.4), (-91.4, 17.3), (-90.9, 17.8), (-89.1, 17.8),
    (-89.2, 15.9), (-88.2, 15.7), (-89.3, 14.4), (-90.1, 13.7), (-91.5, 13.9),
];
const BELIZE: Polygon = &[(-89.1, 17.8), (-88.3, 18.5), (-88.1, 17.0), (-88.9, 15.9), (-89.2, 15.9)];
const HONDURAS: Polygon = &[(-89.3, 14.4), (-88.2, 15.7), (-85.5, 16.0), (-85.5, 13.0), (-87.7, 13.2), (-88.5, 13.9)];
const EL_SALVADOR: Polygon = &[(-90.1, 13.7), (-89.3, 14.4), (-88.5, 13.9), (-87.7, 13.2), (-89.8, 13.4)];

/// State codes and capital coordinates (lat, lon); Baja states second.
const STATES: &[(&str, f64, f64)] = &[
    ("AGU", 21.88, -102.29), ("CAM", 19.85, -90.53), ("CHP", 16.75, -93.12), ("CHH", 28.63, -106.07),
    ("CMX", 19.43, -99.13), ("COA", 25.42, -101.00), ("COL", 19.24, -103.72), ("DUR", 24.02, -104.65),
    ("GUA", 21.02, -101.26), ("GRO", 17.55, -99.50), ("HID", 20.10, -98.76), ("JAL", 20.67, -103.35),
    ("MEX", 19.29, -99.65), ("MIC", 19.70, -101.19), ("MOR", 18.92, -99.23), ("NAY", 21.50, -104.89),
    ("NLE", 25.67, -100.31), ("OAX", 17.06, -96.72), ("PUE", 19.04, -98.21), ("QUE", 20.59, -100.39),
    ("ROO", 18.50, -88.30), ("SLP", 22.15, -100.98), ("SIN", 24.81, -107.39), ("SON", 29.07, -110.96),
    ("TAB", 17.99, -92.93), ("TAM", 23.74, -99.15), ("TLA", 19.32, -98.24), ("VER", 19.54, -96.91),
    ("YUC", 20.97, -89.62), ("ZAC", 22.77, -102.58), ("BCN", 32.62, -115.45), ("BCS", 24.14, -110.31),
];
const N_MAINLAND_STATES: usize = 30;

/// Macro regions of the regional damage functions.
pub const REGIONS: [&str; 12] = [
    "US", "EU", "Japan", "Russia", "Eurasia", "China", "India", "MidEast", "Africa", "LatAm", "OHI", "OthAsia",
];

struct City {
    lat: f64,
    lon: f64,
    pop_2010: f64,
    pop_2100: f64,
}

const fn city(lat: f64, lon: f64, p0: f64, p1: f64) -> City {
    City {
        lat,
        lon,
        pop_2010: p0 * 1e6,
        pop_2100: p1 * 1e6,
    }
}

const MEXICO_CITIES: &[City] = &[
    city(19.43, -99.13, 20.1, 27.0), // Mexico City
    city(20.67, -103.35, 4.4, 7.2),  // Guadalajara
    city(25.67, -100.31, 4.1, 7.5),  // Monterrey
    city(19.04, -98.21, 2.7, 4.0),   // Puebla
    city(19.29, -99.65, 1.9, 3.1),   // Toluca
    city(32.51, -117.04, 1.8, 3.6),  // Tijuana
    city(21.12, -101.68, 1.6, 2.8),  // León
    city(31.69, -106.42, 1.3, 2.0),  // Ciudad Juárez
    city(25.54, -103.41, 1.2, 1.9),  // Torreón
    city(20.59, -100.39, 1.1, 2.6),  // Querétaro
    city(22.15, -100.98, 1.0, 1.7),  // San Luis Potosí
    city(20.97, -89.62, 0.97, 1.8),  // Mérida
    city(32.62, -115.45, 0.94, 1.5), // Mexicali
    city(21.88, -102.29, 0.93, 1.6), // Aguascalientes
    city(16.86, -99.88, 0.86, 1.1),  // Acapulco
    city(24.81, -107.39, 0.86, 1.4), // Culiacán
    city(21.16, -86.85, 0.68, 2.2),  // Cancún
    city(29.07, -110.96, 0.78, 1.4), // Hermosillo
    city(28.63, -106.07, 0.85, 1.3), // Chihuahua
    city(19.18, -96.14, 0.80, 1.2),  // Veracruz
    city(17.99, -92.93, 0.76, 1.2),  // Villahermosa
    city(23.24, -106.41, 0.44, 0.95), // Mazatlán
    city(16.75, -93.12, 0.64, 1.1),  // Tuxtla
    city(19.70, -101.19, 0.81, 1.2), // Morelia
    city(18.92, -99.23, 0.92, 1.3),  // Cuernavaca
    city(20.65, -105.23, 0.38, 1.05), // Puerto Vallarta
];

const OTHER_CITIES: &[(&str, City)] = &[
    ("USA", city(32.72, -117.16, 3.1, 4.4)), // San Diego
    ("USA", city(33.45, -112.07, 4.2, 7.0)), // Phoenix
    ("USA", city(32.22, -110.97, 0.98, 1.6)), // Tucson
    ("USA", city(31.76, -106.49, 0.80, 1.3)), // El Paso
    ("USA", city(29.42, -98.49, 2.1, 3.8)),  // San Antonio
    ("USA", city(30.27, -97.74, 1.7, 4.0)),  // Austin
    ("USA", city(29.76, -95.37, 5.9, 10.5)), // Houston
    ("USA", city(32.78, -96.80, 6.4, 11.0)), // Dallas
    ("USA", city(30.00, -90.07, 1.2, 1.3)),  // New Orleans
    ("GTM", city(14.63, -90.51, 2.9, 5.5)),  // Guatemala City
    ("HND", city(15.50, -88.03, 0.8, 1.8)),  // San Pedro Sula
];

fn in_polygon(lon: f64, lat: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > lat) != (yj > lat) && lon < (xj - xi) * (lat - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn land(country: &str, region: &str) -> CellCodes {
    CellCodes {
        country: Some(country.into()),
        region: Some(region.into()),
        admin1: None,
        admin2: None,
        land: true,
    }
}

fn nearest_state(lat: f64, lon: f64, states: &[(&str, f64, f64)]) -> &'static str {
    let mut best = (f64::INFINITY, "");
    for &(code, slat, slon) in states {
        let d = (lat - slat).powi(2) + ((lon - slon) * lat.to_radians().cos()).powi(2);
        if d < best.0 {
            best = (d, code);
        }
    }
    STATES.iter().find(|s| s.0 == best.1).unwrap().0
}

pub fn mexico_grid() -> GridSpec {
    GridSpec::new(14.0, 33.5, -118.0, -86.0, 0.5).expect("valid demo grid")
}

/// Mexico and its neighbours at 0.5°, with 32 states as nearest-capital
/// cells and municipalities as 1° blocks within each state.
pub fn mexico_map() -> RegionMap {
    let grid = mexico_grid();
    let n = grid.n_cells();
    let mut codes = vec![CellCodes::default(); n];
    for (cell, code) in codes.iter_mut().enumerate() {
        let (lat, lon) = grid.center(cell);
        let mainland = in_polygon(lon, lat, MEX_MAINLAND);
        let baja = in_polygon(lon, lat, MEX_BAJA);
        *code = if mainland || baja {
            let states = if baja { &STATES[N_MAINLAND_STATES..] } else { &STATES[..N_MAINLAND_STATES] };
            let mut c = land("MEX", "LatAm");
            c.admin1 = Some(format!("MX-{}", nearest_state(lat, lon, states)));
            c
        } else if in_polygon(lon, lat, USA_SOUTH) {
            land("USA", "US")
        } else if in_polygon(lon, lat, GUATEMALA) {
            land("GTM", "LatAm")
        } else if in_polygon(lon, lat, BELIZE) {
            land("BLZ", "LatAm")
        } else if in_polygon(lon, lat, HONDURAS) {
            land("HND", "LatAm")
        } else if in_polygon(lon, lat, EL_SALVADOR) {
            land("SLV", "LatAm")
        } else {
            CellCodes::default()
        };
    }
    // Each capital's own cell belongs to its state.
    for &(state, lat, lon) in STATES {
        if let Some(c) = grid.cell_at(lat, lon) {
            if codes[c].country.as_deref() == Some("MEX") {
                codes[c].admin1 = Some(format!("MX-{state}"));
            }
        }
    }
    for (cell, code) in codes.iter_mut().enumerate() {
        if let Some(state) = &code.admin1 {
            let (lat, lon) = grid.center(cell);
            code.admin2 = Some(format!("{state}-N{}W{}", lat.floor() as i32, (-lon).ceil() as i32));
        }
    }
    RegionMap::from_codes(grid, &codes).expect("demo map is consistent")
}

/// Country boxes for the coarse world grid: (country, region, lat, lon ranges).
const WORLD_BOXES: &[(&str, &str, f64, f64, f64, f64)] = &[
    ("JPN", "Japan", 31.0, 45.0, 129.0, 146.0),
    ("IND", "India", 8.0, 35.0, 68.0, 89.0),
    ("SAU", "MidEast", 12.0, 37.0, 35.0, 60.0),
    ("CHN", "China", 20.0, 50.0, 89.0, 123.0),
    ("IDN", "OthAsia", -10.0, 20.0, 92.0, 141.0),
    ("RUS", "Russia", 50.0, 75.0, 30.0, 180.0),
    ("KAZ", "Eurasia", 37.0, 50.0, 30.0, 89.0),
    ("EUU", "EU", 36.0, 71.0, -10.0, 30.0),
    ("AFR", "Africa", -35.0, 36.0, -17.0, 51.0),
    ("USA", "US", 25.0, 49.0, -125.0, -67.0),
    ("CAN", "OHI", 49.0, 70.0, -140.0, -55.0),
    ("AUS", "OHI", -39.0, -11.0, 113.0, 154.0),
    ("BRA", "LatAm", -55.0, 12.0, -81.0, -35.0),
    ("CAM", "LatAm", 8.0, 14.0, -90.0, -77.0),
];

pub fn world_grid() -> GridSpec {
    GridSpec::new(-56.0, 76.0, -180.0, 180.0, 2.0).expect("valid world grid")
}

/// Coarse 2° world: box countries plus Mexico by polygon.
pub fn world_map() -> RegionMap {
    let grid = world_grid();
    let codes: Vec<CellCodes> = (0..grid.n_cells())
        .map(|cell| {
            let (lat, lon) = grid.center(cell);
            if in_polygon(lon, lat, MEX_MAINLAND) || in_polygon(lon, lat, MEX_BAJA) {
                return land("MEX", "LatAm");
            }
            WORLD_BOXES
                .iter()
                .find(|b| lat >= b.2 && lat < b.3 && lon >= b.4 && lon < b.5)
                .map(|b| land(b.0, b.1))
                .unwrap_or_default()
        })
        .collect();
    RegionMap::from_codes(grid, &codes).expect("world map is consistent")
}

/// Piecewise-linear interpolation through (year, value) knots.
fn knots(axis: TimeAxis, pts: &[(i32, f64)]) -> Vec<f64> {
    axis.years()
        .map(|y| {
            let i = pts.iter().position(|p| p.0 >= y).unwrap_or(pts.len() - 1);
            if i == 0 || pts[i].0 <= y {
                return pts[i].1;
            }
            let (y0, v0) = pts[i - 1];
            let (y1, v1) = pts[i];
            v0 + (v1 - v0) * f64::from(y - y0) / f64::from(y1 - y0)
        })
        .collect()
}

/// Mexico's share of world emissions in the fragmented scenario.
pub const MEXICO_EMISSIONS_SHARE: f64 = 0.013;

/// Emissions proxies: current policies, below 2 °C, delayed transition and
/// fragmented (Mexico alone stays on current policies).
pub fn demo_emissions(id: &ScenarioId) -> Result<EmissionsPathway> {
    let axis = TimeAxis::standard();
    let (co2, ch4, n2o, other): (&[(i32, f64)], &[(i32, f64)], &[(i32, f64)], &[(i32, f64)]) = match id {
        ScenarioId::CP => (
            &[(2010, 10.0), (2020, 11.0), (2030, 12.2), (2050, 14.0), (2070, 15.0), (2100, 15.5)],
            &[(2010, 330.0), (2050, 400.0), (2100, 430.0)],
            &[(2010, 6.5), (2050, 8.0), (2100, 9.0)],
            &[(2010, -0.35), (2050, -0.25), (2100, -0.1)],
        ),
        ScenarioId::B2 => (
            &[(2010, 10.0), (2020, 11.0), (2030, 8.0), (2040, 5.5), (2050, 3.5), (2060, 2.0), (2070, 1.0), (2080, 0.3), (2100, 0.0)],
            &[(2010, 330.0), (2020, 340.0), (2050, 220.0), (2100, 180.0)],
            &[(2010, 6.5), (2020, 6.8), (2050, 5.2), (2100, 4.5)],
            &[(2010, -0.35), (2050, -0.1), (2100, 0.05)],
        ),
        ScenarioId::DT => (
            &[(2010, 10.0), (2020, 11.0), (2030, 12.0), (2040, 8.0), (2050, 4.0), (2060, 1.0), (2100, 0.0)],
            &[(2010, 330.0), (2030, 360.0), (2060, 220.0), (2100, 200.0)],
            &[(2010, 6.5), (2030, 7.2), (2060, 5.5), (2100, 5.0)],
            &[(2010, -0.35), (2060, -0.1), (2100, 0.05)],
        ),
        ScenarioId::FR => {
            // Below 2 °C everywhere except Mexico's share, which stays on current policies.
            let cp = demo_emissions(&ScenarioId::CP)?;
            let b2 = demo_emissions(&ScenarioId::B2)?;
            let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
                a.iter().zip(b).map(|(c, b)| b + MEXICO_EMISSIONS_SHARE * (c - b)).collect()
            };
            return EmissionsPathway::new(
                id.clone(),
                axis,
                mix(&cp.co2_gtc, &b2.co2_gtc),
                mix(&cp.ch4_mt, &b2.ch4_mt),
                mix(&cp.n2o_mt, &b2.n2o_mt),
                mix(&cp.other_wm2, &b2.other_wm2),
            );
        }
        ScenarioId::Custom(s) => return Err(Error::invalid(format!("no demo emissions for scenario `{s}`"))),
    };
    EmissionsPathway::new(
        id.clone(),
        axis,
        knots(axis, co2),
        knots(axis, ch4),
        knots(axis, n2o),
        knots(axis, other),
    )
}

/// Carbon-pool state at the start of 2010 from an exponentially growing
/// emissions history scaled to reach `co2_ppm`.
fn spun_up_pools(params: &ClimateParams, co2_ppm: f64) -> Vec<f64> {
    let c = &params.carbon;
    let history = 260;
    let axis = TimeAxis::new(2010 - history, 2010);
    let e: Vec<f64> = axis.years().map(|y| (f64::from(y - 2009) / 45.0).exp()).collect();
    let zeros = vec![0.0; axis.len];
    let path = EmissionsPathway {
        id: ScenarioId::Custom("spin-up".into()),
        axis,
        co2_gtc: e.clone(),
        ch4_mt: zeros.clone(),
        n2o_mt: zeros.clone(),
        other_wm2: zeros,
    };
    let mut p = c.clone();
    p.initial_pools_gtc = vec![0.0; c.pool_fractions.len() + 1];
    // Pools at the last state are linear in the emissions scale.
    let mut pools = p.initial_pools_gtc.clone();
    for &x in &e[..axis.len - 1] {
        pools[0] += p.permanent_fraction * x;
        for (i, (&a, &tau)) in p.pool_fractions.iter().zip(&p.pool_lifetimes).enumerate() {
            let k = (-1.0 / tau).exp();
            pools[i + 1] = pools[i + 1] * k + a * x * tau * (1.0 - k);
        }
    }
    let conc = concentrations(&path, &p);
    debug_assert!((conc.co2_ppm.last().unwrap() - 278.0 - pools.iter().sum::<f64>() / p.gtc_per_ppm).abs() < 1e-6);
    let scale = (co2_ppm - c.co2_preindustrial) * c.gtc_per_ppm / pools.iter().sum::<f64>();
    pools.iter().map(|v| v * scale).collect()
}

/// Climate calibration for the demo emissions.
pub fn demo_climate() -> ClimateParams {
    let mut p = ClimateParams::default();
    p.carbon.ch4_initial = 1800.0;
    p.carbon.n2o_initial = 323.0;
    p.carbon.initial_pools_gtc = spun_up_pools(&p, 389.0)
        .into_iter()
        .map(|v| (v * 1e6).round() / 1e6)
        .collect();
    p.ebm.c_surface = 9.0;
    p.ebm.c_deep = 100.0;
    p.ebm.gamma = 1.5;
    p.ebm.offset = 0.95;
    p.ebm.deep_initial = 0.3;
    p
}

/// Population and GDP share grids for 2010 and 2100, with national series.
pub struct SocioDemo {
    pub national: BTreeMap<String, NationalSeries>,
    pub base: ShareGrid,
    pub target: ShareGrid,
}

/// (country, 2010 GDP bn, 2010 population M, 2100 population M, peak year).
/// Values cover the part of each country inside the grid.
const MEXICO_GRID_COUNTRIES: &[(&str, f64, f64, f64, i32)] = &[
    ("MEX", 0.0, 114.0, 140.0, 2060),
    ("USA", 1250.0, 38.0, 62.0, 2100),
    ("GTM", 31.0, 14.5, 27.0, 2085),
    ("BLZ", 1.3, 0.32, 0.6, 2090),
    ("HND", 8.0, 4.5, 8.0, 2080),
    ("SLV", 3.0, 1.5, 1.7, 2060),
];

const WORLD_COUNTRIES: &[(&str, f64, f64, f64, i32)] = &[
    ("MEX", 0.0, 114.0, 140.0, 2060),
    ("USA", 13000.0, 310.0, 420.0, 2100),
    ("CAN", 1200.0, 34.0, 48.0, 2100),
    ("AUS", 800.0, 22.0, 40.0, 2100),
    ("BRA", 2600.0, 390.0, 480.0, 2060),
    ("CAM", 150.0, 45.0, 70.0, 2080),
    ("EUU", 14000.0, 500.0, 470.0, 2030),
    ("JPN", 4500.0, 128.0, 85.0, 2010),
    ("RUS", 900.0, 143.0, 120.0, 2020),
    ("KAZ", 600.0, 200.0, 260.0, 2070),
    ("CHN", 4500.0, 1340.0, 1000.0, 2030),
    ("IND", 1300.0, 1230.0, 1550.0, 2065),
    ("SAU", 1500.0, 320.0, 550.0, 2090),
    ("AFR", 1200.0, 1000.0, 3500.0, 2100),
    ("IDN", 1500.0, 600.0, 750.0, 2060),
];

/// GDP growth rate: fast now, converging to a slow long-run rate.
fn growth(year: i32, fast: f64) -> f64 {
    let slow = 0.012;
    slow + (fast - slow) * (-f64::from(year - 2010) / 40.0).exp()
}

fn gdp_series(axis: TimeAxis, gdp_2010: f64, fast: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(axis.len);
    let mut g = gdp_2010;
    for y in axis.years() {
        out.push(g);
        g *= 1.0 + growth(y, fast);
    }
    out
}

fn population_series(axis: TimeAxis, p0: f64, p1: f64, peak: i32) -> Vec<f64> {
    // Hump through (2010, p0), (peak, max), (2100, p1).
    let top = if peak <= 2010 || peak >= 2100 { p0.max(p1) } else { p0.max(p1) * 1.08 };
    let pts: Vec<(i32, f64)> = if peak <= 2010 {
        vec![(2010, p0), (2100, p1)]
    } else if peak >= 2100 {
        vec![(2010, p0), (2100, p1)]
    } else {
        vec![(2010, p0), (peak, top), (2100, p1)]
    };
    knots(axis, &pts).into_iter().map(|v| (v * 1e6).round()).collect()
}

fn national_table(axis: TimeAxis, table: &[(&str, f64, f64, f64, i32)]) -> BTreeMap<String, NationalSeries> {
    let ref_index = axis.index_of(2024).unwrap();
    table
        .iter()
        .map(|&(code, gdp_bn, p0, p1, peak)| {
            let fast = if code == "MEX" { 0.022 } else { 0.03 };
            let mut gdp = gdp_series(axis, 1.0, fast);
            let scale = if code == "MEX" { MEXICO_GDP_2024 / gdp[ref_index] } else { gdp_bn * 1e9 };
            gdp.iter_mut().for_each(|g| *g = (*g * scale / 1e3).round() * 1e3);
            if code == "MEX" {
                gdp[ref_index] = MEXICO_GDP_2024;
            }
            (
                code.to_string(),
                NationalSeries {
                    gdp,
                    population: population_series(axis, p0, p1, peak),
                },
            )
        })
        .collect()
}

/// Population weights per cell from point cities (70 % in the home cell,
/// the rest over same-country neighbours) plus a uniform rural level.
fn population_weights(
    map: &RegionMap,
    cities: &[(&str, &City)],
    national: &BTreeMap<String, NationalSeries>,
    target: bool,
) -> Vec<f64> {
    let grid = map.grid();
    let n = grid.n_cells();
    let mut pop = vec![0.0; n];
    let mut city_total: BTreeMap<&str, f64> = BTreeMap::new();
    for (country, c) in cities {
        let Some(home) = grid.cell_at(c.lat, c.lon) else { continue };
        if map.code(Level::Country, home) != Some(*country) {
            continue;
        }
        let p = if target { c.pop_2100 } else { c.pop_2010 };
        *city_total.entry(country).or_default() += p;
        let (r, col) = grid.row_col(home);
        let mut neighbours = Vec::new();
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (rr, cc) = (r as i64 + dr, col as i64 + dc);
                if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= grid.n_lat as i64 || cc >= grid.n_lon as i64 {
                    continue;
                }
                let nb = rr as usize * grid.n_lon + cc as usize;
                if map.code(Level::Country, nb) == Some(*country) {
                    neighbours.push(nb);
                }
            }
        }
        if neighbours.is_empty() {
            pop[home] += p;
        } else {
            pop[home] += 0.7 * p;
            for &nb in &neighbours {
                pop[nb] += 0.3 * p / neighbours.len() as f64;
            }
        }
    }
    for (country, cells) in crate::grid::partition(map, Level::Country) {
        let Some(series) = national.get(&country) else { continue };
        let total = if target { *series.population.last().unwrap() } else { series.population[0] };
        let urban = city_total.get(country.as_str()).copied().unwrap_or(0.0);
        let rural = (total - urban).max(0.1 * total) / cells.len() as f64;
        for c in cells {
            pop[c] += rural;
        }
    }
    pop
}

/// Income per person relative to the national mean: higher in the north
/// and in big cities.
fn income_factor(lat: f64, pop: f64) -> f64 {
    let north = 0.7 + 0.6 * ((lat - 14.0) / 19.5).clamp(0.0, 1.0);
    let urban = if pop > 5e5 { 1.4 } else { 1.0 };
    north * urban
}

fn normalise_by_country(map: &RegionMap, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; weights.len()];
    for (_, cells) in crate::grid::partition(map, Level::Country) {
        let total: f64 = cells.iter().map(|&c| weights[c]).sum();
        for &c in &cells {
            out[c] = weights[c] / total;
        }
    }
    // Renormalise once more so rounding in the division leaves sums at 1.
    for (_, cells) in crate::grid::partition(map, Level::Country) {
        let total: f64 = cells.iter().map(|&c| out[c]).sum();
        for &c in &cells {
            out[c] /= total;
        }
    }
    out
}

pub fn demo_socio(map: &RegionMap, world: bool) -> Result<SocioDemo> {
    let axis = TimeAxis::standard();
    let table = if world { WORLD_COUNTRIES } else { MEXICO_GRID_COUNTRIES };
    let national = national_table(axis, table);
    let mut cities: Vec<(&str, &City)> = MEXICO_CITIES.iter().map(|c| ("MEX", c)).collect();
    if !world {
        cities.extend(OTHER_CITIES.iter().map(|(k, c)| (*k, c)));
    }
    let grid = *map.grid();
    let share = |target: bool| -> Result<ShareGrid> {
        let pop = population_weights(map, &cities, &national, target);
        let gdp_w: Vec<f64> = (0..grid.n_cells())
            .map(|c| pop[c] * income_factor(grid.center(c).0, pop[c]))
            .collect();
        Ok(ShareGrid {
            gdp: CellField::new(grid, Unit::Fraction, normalise_by_country(map, &gdp_w))?,
            population: CellField::new(grid, Unit::Fraction, normalise_by_country(map, &pop))?,
        })
    };
    Ok(SocioDemo {
        base: share(false)?,
        target: share(true)?,
        national,
    })
}

/// Smooth random field: a few low-wavenumber sinusoids.
fn smooth_noise(rng: &mut ChaCha8Rng, grid: &GridSpec, amplitude: f64) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.05..0.3),
                rng.gen_range(0.05..0.3),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    (0..grid.n_cells())
        .map(|c| {
            let (lat, lon) = grid.center(c);
            amplitude * waves.iter().map(|(kx, ky, ph, a)| a * (kx * lon + ky * lat + ph).sin()).sum::<f64>() / 2.0
        })
        .collect()
}

/// Patterns with land amplification, poleward warming gradient and
/// subtropical drying of varying strength.
pub fn demo_patterns(map: &RegionMap, seed: u64) -> Vec<EsmPattern> {
    let grid = *map.grid();
    let areas = grid.areas();
    let total_area: f64 = areas.iter().sum();
    (0..N_PATTERNS)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0000 + k as u64));
            let kf = k as f64;
            let land_amp = 1.12 + 0.03 * (k % 4) as f64;
            let polar = 0.006 + 0.002 * kf;
            let drying = 5.0 + 0.6 * kf;
            let t_noise = smooth_noise(&mut rng, &grid, 0.04);
            let p_noise = smooth_noise(&mut rng, &grid, 0.8);
            let mut t: Vec<f64> = (0..grid.n_cells())
                .map(|c| {
                    let lat = grid.center(c).0;
                    let base = if map.is_land(c) { land_amp } else { 0.82 };
                    (base * (1.0 + polar * (lat.abs() - 23.0)) + t_noise[c]).max(0.3)
                })
                .collect();
            let mean = areas.iter().zip(&t).map(|(a, s)| a * s).sum::<f64>() / total_area;
            let target = 1.0 + 0.008 * (kf - 3.5);
            t.iter_mut().for_each(|v| *v = (*v * target / mean * 1e6).round() / 1e6);
            let p: Vec<f64> = (0..grid.n_cells())
                .map(|c| {
                    let lat = grid.center(c).0;
                    let sub = -drying * (-((lat.abs() - 27.0) / 7.0).powi(2)).exp();
                    let wet = 2.0 * (-((lat.abs() - 8.0) / 5.0).powi(2)).exp() + if lat.abs() > 45.0 { 3.0 } else { 0.0 };
                    let v: f64 = sub + wet + p_noise[c];
                    (v * 1e4).round() / 1e4
                })
                .collect();
            EsmPattern {
                id: format!("esm{:02}", k + 1),
                grid,
                t_scale: t,
                p_scale: p,
            }
        })
        .collect()
}

/// Regional quadratic coefficients (linear, quadratic) for the regional
/// functions; the panel function sits above them.
fn rice_coefficients(region: &str) -> (f64, f64) {
    match region {
        "US" => (0.0, 0.00141),
        "EU" => (0.0, 0.00159),
        "Japan" => (0.0, 0.00162),
        "Russia" => (0.0, 0.00100),
        "Eurasia" => (0.0, 0.00140),
        "China" => (0.0, 0.00180),
        "India" => (0.0020, 0.00400),
        "MidEast" => (0.0010, 0.00290),
        "Africa" => (0.0015, 0.00360),
        "LatAm" => (0.0010, 0.00260),
        "OHI" => (0.0, 0.00120),
        _ => (0.0012, 0.00300),
    }
}

pub fn demo_damage(map: &RegionMap, socio: &SocioDemo, seed: u64) -> DamageParams {
    let grid = map.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xda3a_6e00);
    let mut rice = BTreeMap::new();
    let mut panel = BTreeMap::new();
    for r in REGIONS {
        let (t1, t2) = rice_coefficients(r);
        rice.insert(r.to_string(), Quadratic { c1: t1, c2: t2 });
        panel.insert(
            r.to_string(),
            Quadratic {
                c1: t1 + 0.012,
                c2: ((t2 * 2.6) * 1e7).round() / 1e7,
            },
        );
    }
    // κ rises toward the equator and with economic density.
    let dens: Vec<f64> = (0..grid.n_cells())
        .map(|c| socio.base.gdp.values[c] / grid.cell_area(c))
        .collect();
    let land = map.land_cells();
    let mean_dens = land.iter().map(|&c| dens[c]).sum::<f64>() / land.len().max(1) as f64;
    let kompas = (0..grid.n_cells())
        .map(|c| {
            let jitter: f64 = rng.gen_range(0.9..1.1);
            if !map.is_land(c) {
                return 0.0;
            }
            let lat = grid.center(c).0.abs();
            let k = 0.0021 * (1.0 + 0.03 * (33.5 - lat).max(0.0)) * (1.0 + 0.1 * (1.0 + dens[c] / mean_dens).ln()) * jitter;
            (k * 1e8).round() / 1e8
        })
        .collect();
    DamageParams {
        dice_a: 0.00236,
        weitzman: WeitzmanParams::default(),
        rice,
        panel,
        kompas,
    }
}

fn rel(p: &str) -> PathBuf {
    PathBuf::from(p)
}

fn demo_config(run_name: &str, focus: &str, scenarios: &[ScenarioId], dir_prefix: &str) -> RunConfig {
    let p = |s: &str| rel(&format!("{dir_prefix}{s}"));
    RunConfig {
        run_name: run_name.into(),
        n_realizations: 500,
        seed: DEFAULT_SEED,
        discount_rate: crate::metrics::DEFAULT_DISCOUNT_RATE,
        reference_year: crate::metrics::DEFAULT_REFERENCE_YEAR,
        focus_country: focus.into(),
        variants: crate::damage::VariantId::HEADLINE.iter().map(|v| v.to_string()).collect(),
        rho: crate::damage::DEFAULT_RHO,
        urban_threshold: 1e6,
        grid: p("grid.csv"),
        patterns: (1..=N_PATTERNS).map(|k| p(&format!("patterns/esm{k:02}.csv"))).collect(),
        climate: rel("climate.toml"),
        socio: SocioConfig {
            ssp: "SSP2".into(),
            national: p("socio_national.csv"),
            base_shares: p("shares_2010.csv"),
            target_shares: p("shares_2100.csv"),
        },
        damage: DamageConfig {
            dice: rel("damage/dice2016.csv"),
            weitzman: rel("damage/weitzman.csv"),
            rice: rel("damage/rice2010.csv"),
            kw: rel("damage/kalkuhl_wenz.csv"),
            kompas: p("damage/kompas.csv"),
        },
        scenarios: scenarios
            .iter()
            .map(|s| (s.to_string(), rel(&format!("emissions/{s}.csv"))))
            .collect(),
        risk: RiskConfig {
            thresholds: Some(rel("thresholds.txt")),
            ..RiskConfig::default()
        },
    }
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_area(out: &Path, prefix: &str, map: &RegionMap, world: bool, seed: u64) -> Result<()> {
    let dir = out.join(prefix);
    mkdir(&dir.join("patterns"))?;
    mkdir(&dir.join("damage"))?;
    write_grid(&dir.join("grid.csv"), map)?;
    let socio = demo_socio(map, world)?;
    write_national_series(&dir.join("socio_national.csv"), TimeAxis::standard(), &socio.national)?;
    write_shares(&dir.join("shares_2010.csv"), map, &socio.base)?;
    write_shares(&dir.join("shares_2100.csv"), map, &socio.target)?;
    for p in demo_patterns(map, seed) {
        crate::climate::pattern::write_pattern(&dir.join(format!("patterns/{}.csv", p.id)), &p)?;
    }
    let damage = demo_damage(map, &socio, seed);
    let files = CalibrationFiles {
        dice: out.join("damage/dice2016.csv"),
        weitzman: out.join("damage/weitzman.csv"),
        rice: out.join("damage/rice2010.csv"),
        panel: out.join("damage/kalkuhl_wenz.csv"),
        kompas: dir.join("damage/kompas.csv"),
    };
    damage.write(&files, map)
}

/// Write the complete demo asset set under `out`:
///
/// ```text
/// config.toml, config_world.toml, climate.toml, thresholds.txt
/// emissions/{CP,B2,DT,FR}.csv
/// damage/{dice2016,weitzman,rice2010,kalkuhl_wenz}.csv
/// mexico/{grid.csv, socio_national.csv, shares_2010.csv, shares_2100.csv,
///         patterns/esm01..08.csv, damage/kompas.csv}
/// world/  (same layout on the 2° grid)
/// ```
pub fn generate(out: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    mkdir(&out.join("emissions"))?;
    mkdir(&out.join("damage"))?;
    let scenarios = [ScenarioId::CP, ScenarioId::B2, ScenarioId::DT, ScenarioId::FR];
    for s in &scenarios {
        write_emissions(&out.join(format!("emissions/{s}.csv")), &demo_emissions(s)?)?;
    }
    write(&out.join("climate.toml"), demo_climate().to_toml())?;
    write(&out.join("thresholds.txt"), RiskIndexSpec::default_index().to_text())?;
    write_area(out, "world", &world_map(), true, seed)?;
    write_area(out, "mexico", &mexico_map(), false, seed)?;
    let mut cfg = demo_config("demo", "MEX", &scenarios, "mexico/");
    cfg.seed = seed;
    write(&out.join("config.toml"), cfg.to_toml())?;
    let mut world = demo_config("world", "MEX", &scenarios, "world/");
    world.seed = seed;
    world.n_realizations = 100;
    write(&out.join("config_world.toml"), world.to_toml())?;
    let mut files = Vec::new();
    collect_files(out, &mut files)?;
    files.sort();
    Ok(files)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}
