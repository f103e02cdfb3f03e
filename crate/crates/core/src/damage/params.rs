//! Damage calibration files. Each is delimited text whose first column,
//! `function`, names the damage function the row belongs to.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::damage::functions::{Quadratic, WeitzmanParams};
use crate::error::{Error, Result};
use crate::grid::{csv_err, RegionMap};

pub const DICE_ID: &str = "dice2016";
pub const WEITZMAN_ID: &str = "weitzman";
pub const RICE_ID: &str = "rice2010";
pub const PANEL_ID: &str = "kalkuhl_wenz";
pub const KOMPAS_ID: &str = "kompas";

#[derive(Debug, Clone, PartialEq)]
pub struct DamageParams {
    pub dice_a: f64,
    pub weitzman: WeitzmanParams,
    pub rice: BTreeMap<String, Quadratic>,
    pub panel: BTreeMap<String, Quadratic>,
    /// Per-cell κ; water cells may be zero.
    pub kompas: Vec<f64>,
}

/// Paths of the five calibration files.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFiles {
    pub dice: PathBuf,
    pub weitzman: PathBuf,
    pub rice: PathBuf,
    pub panel: PathBuf,
    pub kompas: PathBuf,
}

impl CalibrationFiles {
    pub fn all(&self) -> [(&'static str, &Path); 5] {
        [
            ("dice", &self.dice),
            ("weitzman", &self.weitzman),
            ("rice", &self.rice),
            ("kw", &self.panel),
            ("kompas", &self.kompas),
        ]
    }
}

struct Table {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn read(path: &Path, function: &str, columns: &[&str]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.first().map(String::as_str) != Some("function") {
            return Err(Error::parse(path, 1, "first column must be `function`"));
        }
        for c in columns {
            if !headers.iter().any(|h| h == c) {
                return Err(Error::parse(path, 1, format!("missing column `{c}`")));
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.get(0) != Some(function) {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected function `{function}`, found `{}`", rec.get(0).unwrap_or("")),
                ));
            }
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        if rows.is_empty() {
            return Err(Error::parse(path, 1, "no calibration rows"));
        }
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    fn col(&self, name: &str) -> usize {
        self.headers.iter().position(|h| h == name).unwrap()
    }

    fn num(&self, row: usize, name: &str) -> Result<f64> {
        let (line, vals) = &self.rows[row];
        let raw = vals.get(self.col(name)).map(String::as_str).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::parse(&self.path, *line, format!("bad {name} `{raw}`")))?;
        if !v.is_finite() {
            return Err(Error::parse(&self.path, *line, format!("non-finite {name}")));
        }
        Ok(v)
    }

    fn text(&self, row: usize, name: &str) -> &str {
        self.rows[row].1.get(self.col(name)).map(String::as_str).unwrap_or("")
    }
}

fn regional(path: &Path, function: &str, c1: &str, c2: &str) -> Result<BTreeMap<String, Quadratic>> {
    let t = Table::read(path, function, &["region", c1, c2])?;
    let mut out = BTreeMap::new();
    for i in 0..t.rows.len() {
        let q = Quadratic {
            c1: t.num(i, c1)?,
            c2: t.num(i, c2)?,
        };
        if out.insert(t.text(i, "region").to_string(), q).is_some() {
            return Err(Error::parse(path, t.rows[i].0, "duplicate region"));
        }
    }
    Ok(out)
}

impl DamageParams {
    pub fn load(files: &CalibrationFiles, map: &RegionMap) -> Result<Self> {
        let dice = Table::read(&files.dice, DICE_ID, &["a"])?;
        let w = Table::read(&files.weitzman, WEITZMAN_ID, &["c1", "c2", "p"])?;
        let kompas_t = Table::read(&files.kompas, KOMPAS_ID, &["cell", "kappa"])?;
        let mut kompas = vec![0.0; map.n_cells()];
        let mut seen = vec![false; map.n_cells()];
        for i in 0..kompas_t.rows.len() {
            let raw = kompas_t.text(i, "cell");
            let cell: usize = raw
                .parse()
                .ok()
                .filter(|&c| c < map.n_cells())
                .ok_or_else(|| Error::parse(&files.kompas, kompas_t.rows[i].0, format!("bad cell `{raw}`")))?;
            kompas[cell] = kompas_t.num(i, "kappa")?;
            seen[cell] = true;
        }
        let params = Self {
            dice_a: dice.num(0, "a")?,
            weitzman: WeitzmanParams {
                c1: w.num(0, "c1")?,
                c2: w.num(0, "c2")?,
                p: w.num(0, "p")?,
            },
            rice: regional(&files.rice, RICE_ID, "theta1", "theta2")?,
            panel: regional(&files.panel, PANEL_ID, "b1", "b2")?,
            kompas,
        };
        if let Some(c) = map.land_cells().into_iter().find(|&c| !seen[c]) {
            return Err(Error::invalid(format!(
                "{}: no kompas coefficient for land cell {c}",
                files.kompas.display()
            )));
        }
        params.validate(map)?;
        Ok(params)
    }

    pub fn validate(&self, map: &RegionMap) -> Result<()> {
        if self.kompas.len() != map.n_cells() {
            return Err(Error::GridMismatch {
                expected: format!("{} cells", map.n_cells()),
                found: format!("{} kompas coefficients", self.kompas.len()),
            });
        }
        for region in map.keys(crate::grid::Level::Region) {
            for (name, table) in [("rice", &self.rice), ("kw", &self.panel)] {
                if !table.contains_key(&region) {
                    return Err(Error::UnknownKey {
                        kind: if name == "rice" { "rice region" } else { "kw region" },
                        key: region.clone(),
                    });
                }
            }
        }
        if !(self.weitzman.c1 > 0.0 && self.weitzman.c2 > 0.0 && self.weitzman.p > 0.0) {
            return Err(Error::invalid("weitzman parameters must be positive"));
        }
        Ok(())
    }

    pub fn write(&self, files: &CalibrationFiles, map: &RegionMap) -> Result<()> {
        let put = |path: &Path, body: String| std::fs::write(path, body).map_err(|e| Error::io(path, e));
        put(&files.dice, format!("function,a\n{DICE_ID},{}\n", self.dice_a))?;
        put(
            &files.weitzman,
            format!(
                "function,c1,c2,p\n{WEITZMAN_ID},{},{},{}\n",
                self.weitzman.c1, self.weitzman.c2, self.weitzman.p
            ),
        )?;
        let regional = |id: &str, h: &str, t: &BTreeMap<String, Quadratic>| {
            let mut s = format!("function,region,{h}\n");
            for (r, q) in t {
                s.push_str(&format!("{id},{r},{},{}\n", q.c1, q.c2));
            }
            s
        };
        put(&files.rice, regional(RICE_ID, "theta1,theta2", &self.rice))?;
        put(&files.panel, regional(PANEL_ID, "b1,b2", &self.panel))?;
        let mut out = Vec::new();
        writeln!(out, "function,cell,kappa").unwrap();
        for c in map.land_cells() {
            writeln!(out, "{KOMPAS_ID},{c},{}", self.kompas[c]).unwrap();
        }
        std::fs::write(&files.kompas, out).map_err(|e| Error::io(&files.kompas, e))
    }
}
