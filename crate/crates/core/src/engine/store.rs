//! On-disk run store: one directory per run holding little-endian binary
//! arrays, copies of every input, and a plain-text manifest with shapes,
//! units and sha256 checksums.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::axis::{Cube, TimeAxis, Unit};
use crate::climate::ClimateField;
use crate::damage::{LossField, VariantId};
use crate::engine::config::RunConfig;
use crate::engine::run::{Assets, RealizationOutput, Realizer};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scenario::ScenarioId;

pub const MANIFEST: &str = "manifest.txt";
pub const INCOMPLETE: &str = "INCOMPLETE";
pub const FORMAT_VERSION: u32 = 1;
const MANIFEST_HEADER: &str = "# physrisk run store";

pub struct StoreData<'a> {
    pub run_id: String,
    pub scenario: ScenarioId,
    pub config: &'a RunConfig,
    pub config_hash: String,
    pub keys: Vec<String>,
    pub grid: GridSpec,
    pub forcing: &'a [f64],
    pub gdp: &'a Cube,
    pub population: &'a Cube,
    pub uhi: &'a Cube,
    pub outputs: &'a [RealizationOutput],
}

/// One manifest `array` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayEntry {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub unit: String,
    pub sha256: String,
    pub file: String,
}

/// Parsed manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub fields: BTreeMap<String, String>,
    pub keys: Vec<String>,
    pub inputs: Vec<(String, String, String)>,
    pub arrays: Vec<ArrayEntry>,
}

impl Manifest {
    pub fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Store(format!("manifest lacks `{key}`")))
    }

    pub fn array(&self, name: &str) -> Result<&ArrayEntry> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Store(format!("manifest lacks array `{name}`")))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest {
            fields: BTreeMap::new(),
            keys: Vec::new(),
            inputs: Vec::new(),
            arrays: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Store(format!("manifest line {}: `{line}`", i + 1));
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts[0] {
                "key" if parts.len() == 2 => m.keys.push(parts[1].to_string()),
                "input" if parts.len() == 4 => {
                    m.inputs.push((parts[1].to_string(), parts[2].to_string(), parts[3].to_string()))
                }
                "array" if parts.len() == 7 => m.arrays.push(ArrayEntry {
                    name: parts[1].to_string(),
                    dtype: parts[2].to_string(),
                    shape: parts[3]
                        .split('x')
                        .map(|s| s.parse().map_err(|_| bad()))
                        .collect::<Result<_>>()?,
                    unit: parts[4].to_string(),
                    sha256: parts[5].to_string(),
                    file: parts[6].to_string(),
                }),
                _ => {
                    let (k, v) = line.split_once('=').ok_or_else(bad)?;
                    m.fields.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }
        Ok(m)
    }
}

fn f64_bytes(v: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.len() * 8);
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn u32_bytes(v: &[u32]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn input_file_name(role: &str, path: &Path) -> String {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("txt");
    format!("{}.{ext}", role.replace('.', "_"))
}

/// Config hash recorded in an existing store, if its manifest exists.
pub fn existing_hash(dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(dir.join(MANIFEST)).ok()?;
    Manifest::parse(&text).ok()?.fields.get("config_hash").cloned()
}

pub fn write_store(dir: &Path, data: &StoreData) -> Result<()> {
    if let Some(h) = existing_hash(dir) {
        if h != data.config_hash {
            return Err(Error::Store(format!(
                "{} holds results from config {h}; refusing to write results from config {}",
                dir.display(),
                data.config_hash
            )));
        }
    }
    if dir.exists() {
        io(dir, std::fs::remove_dir_all(dir))?;
    }
    let inputs_dir = dir.join("inputs");
    let arrays_dir = dir.join("arrays");
    io(dir, std::fs::create_dir_all(&inputs_dir))?;
    io(dir, std::fs::create_dir_all(&arrays_dir))?;
    let marker = dir.join(INCOMPLETE);
    io(&marker, std::fs::write(&marker, "run in progress\n"))?;

    // Inputs, plus a config pointing at the copies.
    let mut local = data.config.clone();
    let mut input_lines = Vec::new();
    let mut copies: BTreeMap<PathBuf, String> = BTreeMap::new();
    for (role, path) in data.config.inputs() {
        let name = input_file_name(&role, &path);
        let target = inputs_dir.join(&name);
        io(&path, std::fs::copy(&path, &target))?;
        input_lines.push(format!("input {role} inputs/{name} {}", crate::engine::config::file_sha256(&target)?));
        copies.insert(path, name);
    }
    local.map_paths(|p| PathBuf::from(copies.get(p).cloned().unwrap_or_else(|| p.display().to_string())));
    let cfg_path = inputs_dir.join("config.toml");
    io(&cfg_path, std::fs::write(&cfg_path, local.to_toml()))?;

    let n = data.outputs.len();
    let years = data.forcing.len();
    let cells = data.grid.n_cells();
    let variants = data.config.variant_ids()?;
    let mut array_lines = Vec::new();
    let mut put = |name: &str, dtype: &str, shape: &[usize], unit: &str, bytes: Vec<u8>| -> Result<()> {
        let file = format!("arrays/{name}.bin");
        let path = dir.join(&file);
        let sha = hex::encode(Sha256::digest(&bytes));
        io(&path, std::fs::write(&path, &bytes))?;
        let shape = shape.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x");
        array_lines.push(format!("array {name} {dtype} {shape} {unit} {sha} {file}"));
        Ok(())
    };
    let concat = |f: &dyn Fn(&RealizationOutput) -> &[f64]| -> Vec<f64> {
        data.outputs.iter().flat_map(|o| f(o).iter().copied()).collect()
    };
    put("forcing", "f64", &[years], Unit::WattsPerSquareMetre.as_str(), f64_bytes(data.forcing))?;
    put("global_dt", "f64", &[n, years], Unit::Celsius.as_str(), f64_bytes(&concat(&|o| &o.global)))?;
    let ecs: Vec<f64> = data.outputs.iter().map(|o| o.ecs).collect();
    put("ecs", "f64", &[n], Unit::Celsius.as_str(), f64_bytes(&ecs))?;
    let pats: Vec<u32> = data.outputs.iter().map(|o| o.pattern).collect();
    put("pattern_index", "u32", &[n], Unit::Dimensionless.as_str(), u32_bytes(&pats))?;
    put("gdp", "f64", &[years, cells], Unit::Usd2005.as_str(), f64_bytes(&data.gdp.data))?;
    put("population", "f64", &[years, cells], Unit::Persons.as_str(), f64_bytes(&data.population.data))?;
    put("uhi", "f64", &[years, cells], Unit::Celsius.as_str(), f64_bytes(&data.uhi.data))?;
    for (vi, v) in variants.iter().enumerate() {
        let agg = concat(&|o| &o.aggregates[vi]);
        put(
            &format!("loss_agg.{v}"),
            "f64",
            &[n, data.keys.len(), years],
            Unit::Usd2005.as_str(),
            f64_bytes(&agg),
        )?;
        let pv = concat(&|o| &o.cell_pv[vi]);
        put(&format!("pv_cell.{v}"), "f64", &[n, cells], Unit::Usd2005.as_str(), f64_bytes(&pv))?;
    }

    let cfg = data.config;
    let mut m = String::new();
    writeln!(m, "{MANIFEST_HEADER}").unwrap();
    writeln!(m, "format = {FORMAT_VERSION}").unwrap();
    writeln!(m, "run_id = {}", data.run_id).unwrap();
    writeln!(m, "scenario = {}", data.scenario).unwrap();
    writeln!(m, "config_hash = {}", data.config_hash).unwrap();
    writeln!(m, "code_version = {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(m, "realizations = {n}").unwrap();
    writeln!(m, "seed = {}", cfg.seed).unwrap();
    writeln!(m, "discount_rate = {}", cfg.discount_rate).unwrap();
    writeln!(m, "reference_year = {}", cfg.reference_year).unwrap();
    writeln!(m, "focus_country = {}", cfg.focus_country).unwrap();
    writeln!(m, "variants = {}", variants.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(",")).unwrap();
    writeln!(m, "rho = {}", cfg.rho).unwrap();
    let g = data.grid;
    writeln!(m, "grid = {},{},{},{},{}", g.lat_min, g.lat_max, g.lon_min, g.lon_max, g.resolution).unwrap();
    writeln!(m, "cells = {cells}").unwrap();
    writeln!(m, "years = {}-{}", cfg.axis().start, cfg.axis().end()).unwrap();
    for k in &data.keys {
        writeln!(m, "key {k}").unwrap();
    }
    for l in input_lines {
        writeln!(m, "{l}").unwrap();
    }
    for l in array_lines {
        writeln!(m, "{l}").unwrap();
    }
    let mpath = dir.join(MANIFEST);
    io(&mpath, std::fs::write(&mpath, m))?;
    io(&marker, std::fs::remove_file(&marker))?;
    Ok(())
}

/// A completed run opened for reading.
pub struct EnsembleStore {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub config: RunConfig,
    pub run_id: String,
    pub scenario: ScenarioId,
    pub config_hash: String,
    pub grid: GridSpec,
    pub axis: TimeAxis,
    pub variants: Vec<VariantId>,
    pub keys: Vec<String>,
    pub n_realizations: usize,
    pub forcing: Vec<f64>,
    pub global_dt: Vec<f64>,
    pub ecs: Vec<f64>,
    pub pattern_index: Vec<u32>,
    pub gdp: Cube,
    pub population: Cube,
    pub uhi: Cube,
    loss_agg: BTreeMap<VariantId, Vec<f64>>,
    pv_cell: BTreeMap<VariantId, Vec<f64>>,
    realizer: Realizer,
}

impl std::fmt::Debug for EnsembleStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnsembleStore").field("run_id", &self.run_id).field("dir", &self.dir).finish()
    }
}

fn read_f64(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
}

fn read_u32(bytes: &[u8]) -> Vec<u32> {
    bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()
}

impl EnsembleStore {
    pub fn is_run_dir(dir: &Path) -> bool {
        dir.join(MANIFEST).is_file() || dir.join(INCOMPLETE).is_file()
    }

    pub fn open(dir: &Path) -> Result<Self> {
        if dir.join(INCOMPLETE).exists() {
            return Err(Error::Store(format!("{} is incomplete (interrupted or failed run)", dir.display())));
        }
        let mpath = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest = Manifest::parse(&text)?;
        if manifest.get("format")? != FORMAT_VERSION.to_string() {
            return Err(Error::Store(format!("unsupported store format {}", manifest.get("format")?)));
        }
        let config = RunConfig::load(&dir.join("inputs").join("config.toml"))?;
        let read = |name: &str, dtype: &str| -> Result<(Vec<u8>, Vec<usize>)> {
            let a = manifest.array(name)?;
            if a.dtype != dtype {
                return Err(Error::Store(format!("array {name} has dtype {}, expected {dtype}", a.dtype)));
            }
            let path = dir.join(&a.file);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if hex::encode(Sha256::digest(&bytes)) != a.sha256 {
                return Err(Error::Store(format!("checksum mismatch for {}", path.display())));
            }
            let width = if dtype == "u32" { 4 } else { 8 };
            if bytes.len() != a.shape.iter().product::<usize>() * width {
                return Err(Error::Store(format!("array {name} size disagrees with its shape")));
            }
            Ok((bytes, a.shape.clone()))
        };
        let n: usize = manifest
            .get("realizations")?
            .parse()
            .map_err(|_| Error::Store("bad realization count".into()))?;
        let variants: Vec<VariantId> =
            manifest.get("variants")?.split(',').map(|v| v.parse()).collect::<Result<_>>()?;
        let scenario: ScenarioId = manifest.get("scenario")?.parse()?;
        let axis = config.axis();
        let forcing = read_f64(&read("forcing", "f64")?.0);
        let global_dt = read_f64(&read("global_dt", "f64")?.0);
        let ecs = read_f64(&read("ecs", "f64")?.0);
        let pattern_index = read_u32(&read("pattern_index", "u32")?.0);
        let cube = |name: &str| -> Result<Cube> {
            let (b, shape) = read(name, "f64")?;
            Ok(Cube::from_vec(shape[0], shape[1], read_f64(&b)))
        };
        let gdp = cube("gdp")?;
        let population = cube("population")?;
        let uhi = cube("uhi")?;
        let mut loss_agg = BTreeMap::new();
        let mut pv_cell = BTreeMap::new();
        for v in &variants {
            loss_agg.insert(*v, read_f64(&read(&format!("loss_agg.{v}"), "f64")?.0));
            pv_cell.insert(*v, read_f64(&read(&format!("pv_cell.{v}"), "f64")?.0));
        }
        if ecs.len() != n || global_dt.len() != n * axis.len {
            return Err(Error::Store("realization count disagrees with stored arrays".into()));
        }

        let assets = Assets::load(&config)?;
        let grid = *assets.map.grid();
        let bundle = assets.scenario(&config, &scenario)?;
        let realizer = Realizer::new(&config, assets, &bundle)?;
        if realizer.forcing != forcing || realizer.gdp != gdp {
            return Err(Error::Store("stored inputs do not reproduce the stored forcing/GDP".into()));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            run_id: manifest.get("run_id")?.to_string(),
            config_hash: manifest.get("config_hash")?.to_string(),
            keys: manifest.keys.clone(),
            manifest,
            config,
            scenario,
            grid,
            axis,
            variants,
            n_realizations: n,
            forcing,
            global_dt,
            ecs,
            pattern_index,
            gdp,
            population,
            uhi,
            loss_agg,
            pv_cell,
            realizer,
        })
    }

    pub fn realizer(&self) -> &Realizer {
        &self.realizer
    }

    pub fn map(&self) -> &crate::grid::RegionMap {
        &self.realizer.map
    }

    pub fn has_variant(&self, v: VariantId) -> bool {
        self.variants.contains(&v)
    }

    fn require(&self, v: VariantId) -> Result<()> {
        if self.has_variant(v) {
            Ok(())
        } else {
            Err(Error::MissingVariable(format!("losses for variant {v}")))
        }
    }

    pub fn global_path(&self, r: usize) -> &[f64] {
        &self.global_dt[r * self.axis.len..(r + 1) * self.axis.len]
    }

    /// Per-realization annual loss series for a stored aggregate key.
    pub fn aggregate(&self, variant: VariantId, key: &str) -> Result<Vec<&[f64]>> {
        self.require(variant)?;
        let ki = self.keys.iter().position(|k| k == key).ok_or_else(|| Error::UnknownKey {
            kind: "aggregate",
            key: key.to_string(),
        })?;
        let data = &self.loss_agg[&variant];
        let (k, y) = (self.keys.len(), self.axis.len);
        Ok((0..self.n_realizations)
            .map(|r| &data[(r * k + ki) * y..(r * k + ki + 1) * y])
            .collect())
    }

    /// Per-cell present value for realization r at the run's discount rate.
    pub fn cell_pv(&self, variant: VariantId, r: usize) -> Result<&[f64]> {
        self.require(variant)?;
        let c = self.grid.n_cells();
        Ok(&self.pv_cell[&variant][r * c..(r + 1) * c])
    }

    pub fn climate(&self, r: usize) -> Result<ClimateField> {
        self.realizer
            .climate_from(self.global_path(r).to_vec(), self.pattern_index[r] as usize)
    }

    /// Regenerate the per-cell loss fields of one realization.
    pub fn losses(&self, r: usize, variants: &[VariantId]) -> Result<Vec<LossField>> {
        for v in variants {
            self.require(*v)?;
        }
        let specs: Vec<_> = variants
            .iter()
            .map(|&v| crate::damage::DamageSpec::new(v, self.config.rho))
            .collect::<Result<_>>()?;
        let climate = self.climate(r)?;
        self.realizer.losses(&climate, &specs)
    }

    /// GDP series summed over `cells`.
    pub fn gdp_series(&self, cells: &[usize]) -> Vec<f64> {
        (0..self.axis.len).map(|y| cells.iter().map(|&c| self.gdp.get(y, c)).sum()).collect()
    }
}
