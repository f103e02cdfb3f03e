//! Annual time axis and physical units shared by every module.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const FIRST_YEAR: i32 = 2010;
pub const LAST_YEAR: i32 = 2100;

/// Contiguous run of calendar years, inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub start: i32,
    pub len: usize,
}

impl TimeAxis {
    pub fn new(start: i32, end: i32) -> Self {
        assert!(end >= start, "empty time axis {start}..={end}");
        Self {
            start,
            len: (end - start + 1) as usize,
        }
    }

    /// The 2010–2100 simulation horizon.
    pub fn standard() -> Self {
        Self::new(FIRST_YEAR, LAST_YEAR)
    }

    pub fn end(&self) -> i32 {
        self.start + self.len as i32 - 1
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        if year < self.start || year > self.end() {
            None
        } else {
            Some((year - self.start) as usize)
        }
    }

    pub fn year(&self, index: usize) -> i32 {
        self.start + index as i32
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end()
    }

    pub fn contains(&self, year: i32) -> bool {
        self.index_of(year).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "degC")]
    Celsius,
    #[serde(rename = "percent")]
    Percent,
    #[serde(rename = "fraction")]
    Fraction,
    #[serde(rename = "persons")]
    Persons,
    #[serde(rename = "USD2005")]
    Usd2005,
    #[serde(rename = "km2")]
    SquareKm,
    #[serde(rename = "degC/degC")]
    CelsiusPerCelsius,
    #[serde(rename = "percent/degC")]
    PercentPerCelsius,
    #[serde(rename = "W/m2")]
    WattsPerSquareMetre,
    #[serde(rename = "1")]
    Dimensionless,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Celsius => "degC",
            Unit::Percent => "percent",
            Unit::Fraction => "fraction",
            Unit::Persons => "persons",
            Unit::Usd2005 => "USD2005",
            Unit::SquareKm => "km2",
            Unit::CelsiusPerCelsius => "degC/degC",
            Unit::PercentPerCelsius => "percent/degC",
            Unit::WattsPerSquareMetre => "W/m2",
            Unit::Dimensionless => "1",
        }
    }

    pub fn parse(s: &str) -> Option<Unit> {
        Some(match s {
            "degC" => Unit::Celsius,
            "percent" => Unit::Percent,
            "fraction" => Unit::Fraction,
            "persons" => Unit::Persons,
            "USD2005" => Unit::Usd2005,
            "km2" => Unit::SquareKm,
            "degC/degC" => Unit::CelsiusPerCelsius,
            "percent/degC" => Unit::PercentPerCelsius,
            "W/m2" => Unit::WattsPerSquareMetre,
            "1" => Unit::Dimensionless,
            _ => return None,
        })
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Year-major dense array: `data[year_index * cells + cell]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub years: usize,
    pub cells: usize,
    pub data: Vec<f64>,
}

impl Cube {
    pub fn zeros(years: usize, cells: usize) -> Self {
        Self {
            years,
            cells,
            data: vec![0.0; years * cells],
        }
    }

    pub fn from_vec(years: usize, cells: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), years * cells, "cube shape mismatch");
        Self { years, cells, data }
    }

    #[inline]
    pub fn get(&self, year: usize, cell: usize) -> f64 {
        self.data[year * self.cells + cell]
    }

    #[inline]
    pub fn set(&mut self, year: usize, cell: usize, value: f64) {
        self.data[year * self.cells + cell] = value;
    }

    pub fn year(&self, year: usize) -> &[f64] {
        &self.data[year * self.cells..(year + 1) * self.cells]
    }

    pub fn year_mut(&mut self, year: usize) -> &mut [f64] {
        &mut self.data[year * self.cells..(year + 1) * self.cells]
    }

    pub fn cell_series(&self, cell: usize) -> Vec<f64> {
        (0..self.years).map(|y| self.get(y, cell)).collect()
    }
}
