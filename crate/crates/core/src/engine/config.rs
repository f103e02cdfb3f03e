//! Run configuration: a TOML file whose paths are relative to the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::axis::TimeAxis;
use crate::damage::{CalibrationFiles, DamageSpec, VariantId, DEFAULT_RHO};
use crate::error::{Error, Result};
use crate::metrics::{DEFAULT_DISCOUNT_RATE, DEFAULT_REFERENCE_YEAR};
use crate::risk::{DEFAULT_TOE_NOISE, DEFAULT_TOE_QUANTILE};
use crate::scenario::{ScenarioAssets, ScenarioId};

fn default_realizations() -> usize {
    500
}
fn default_rate() -> f64 {
    DEFAULT_DISCOUNT_RATE
}
fn default_reference_year() -> i32 {
    DEFAULT_REFERENCE_YEAR
}
fn default_rho() -> f64 {
    DEFAULT_RHO
}
fn default_urban() -> f64 {
    1e6
}
fn default_variants() -> Vec<String> {
    VariantId::HEADLINE.iter().map(|v| v.to_string()).collect()
}
fn default_ssp() -> String {
    "SSP2".into()
}
fn default_toe_q() -> f64 {
    DEFAULT_TOE_QUANTILE
}
fn default_toe_noise() -> f64 {
    DEFAULT_TOE_NOISE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocioConfig {
    #[serde(default = "default_ssp")]
    pub ssp: String,
    pub national: PathBuf,
    pub base_shares: PathBuf,
    pub target_shares: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamageConfig {
    pub dice: PathBuf,
    pub weitzman: PathBuf,
    pub rice: PathBuf,
    pub kw: PathBuf,
    pub kompas: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskConfig {
    pub thresholds: Option<PathBuf>,
    #[serde(default = "default_toe_q")]
    pub toe_quantile: f64,
    #[serde(default = "default_toe_noise")]
    pub toe_noise: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            thresholds: None,
            toe_quantile: DEFAULT_TOE_QUANTILE,
            toe_noise: DEFAULT_TOE_NOISE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_name: String,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    pub seed: u64,
    #[serde(default = "default_rate")]
    pub discount_rate: f64,
    #[serde(default = "default_reference_year")]
    pub reference_year: i32,
    /// Country whose aggregates headline the reports.
    pub focus_country: String,
    #[serde(default = "default_variants")]
    pub variants: Vec<String>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_urban")]
    pub urban_threshold: f64,
    pub grid: PathBuf,
    pub patterns: Vec<PathBuf>,
    pub climate: PathBuf,
    pub socio: SocioConfig,
    pub damage: DamageConfig,
    /// Scenario id → emissions file.
    pub scenarios: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub risk: RiskConfig,
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub file: Option<PathBuf>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(p) => write!(f, "{} ({}): {}", self.field, p.display(), self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

impl RunConfig {
    /// Parse and resolve every path against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::parse(path, line, message),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::parse("config", 1, "empty configuration"));
        }
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(0);
            Error::parse("config", line, e.message().to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.map_paths(|p| if p.is_absolute() { p.clone() } else { base.join(p) });
    }

    pub fn map_paths(&mut self, mut f: impl FnMut(&PathBuf) -> PathBuf) {
        self.grid = f(&self.grid);
        self.climate = f(&self.climate);
        for p in &mut self.patterns {
            *p = f(p);
        }
        for p in [
            &mut self.socio.national,
            &mut self.socio.base_shares,
            &mut self.socio.target_shares,
            &mut self.damage.dice,
            &mut self.damage.weitzman,
            &mut self.damage.rice,
            &mut self.damage.kw,
            &mut self.damage.kompas,
        ] {
            *p = f(p);
        }
        for p in self.scenarios.values_mut() {
            *p = f(p);
        }
        if let Some(t) = &mut self.risk.thresholds {
            *t = f(t);
        }
    }

    pub fn axis(&self) -> TimeAxis {
        TimeAxis::standard()
    }

    pub fn variant_ids(&self) -> Result<Vec<VariantId>> {
        let mut out = Vec::new();
        for v in &self.variants {
            let id: VariantId = v.parse()?;
            if !out.contains(&id) {
                out.push(id);
            }
        }
        if out.is_empty() {
            return Err(Error::invalid("no damage variants requested"));
        }
        Ok(out)
    }

    pub fn damage_specs(&self) -> Result<Vec<DamageSpec>> {
        self.variant_ids()?
            .into_iter()
            .map(|v| DamageSpec::new(v, self.rho))
            .collect()
    }

    pub fn calibration_files(&self) -> CalibrationFiles {
        CalibrationFiles {
            dice: self.damage.dice.clone(),
            weitzman: self.damage.weitzman.clone(),
            rice: self.damage.rice.clone(),
            panel: self.damage.kw.clone(),
            kompas: self.damage.kompas.clone(),
        }
    }

    pub fn scenario_ids(&self) -> Result<Vec<ScenarioId>> {
        self.scenarios.keys().map(|k| k.parse()).collect()
    }

    pub fn emissions_path(&self, id: &ScenarioId) -> Result<&Path> {
        self.scenarios
            .get(id.as_str())
            .map(PathBuf::as_path)
            .ok_or_else(|| Error::UnknownKey {
                kind: "scenario",
                key: format!("{id} (configured: {})", self.scenarios.keys().cloned().collect::<Vec<_>>().join(", ")),
            })
    }

    pub fn scenario_assets(&self, id: &ScenarioId) -> Result<ScenarioAssets> {
        Ok(ScenarioAssets {
            id: id.clone(),
            emissions: self.emissions_path(id)?.to_path_buf(),
            national_series: self.socio.national.clone(),
            base_shares: self.socio.base_shares.clone(),
            target_shares: self.socio.target_shares.clone(),
            urban_threshold: self.urban_threshold,
            ssp: self.socio.ssp.clone(),
        })
    }

    /// Every referenced input, as (role, path).
    pub fn inputs(&self) -> Vec<(String, PathBuf)> {
        let mut v = vec![
            ("grid".to_string(), self.grid.clone()),
            ("climate".to_string(), self.climate.clone()),
            ("socio.national".to_string(), self.socio.national.clone()),
            ("socio.base_shares".to_string(), self.socio.base_shares.clone()),
            ("socio.target_shares".to_string(), self.socio.target_shares.clone()),
        ];
        for (role, p) in self.calibration_files().all() {
            v.push((format!("damage.{role}"), p.to_path_buf()));
        }
        for (i, p) in self.patterns.iter().enumerate() {
            v.push((format!("patterns.{i}"), p.clone()));
        }
        for (k, p) in &self.scenarios {
            v.push((format!("scenarios.{k}"), p.clone()));
        }
        if let Some(t) = &self.risk.thresholds {
            v.push(("risk.thresholds".to_string(), t.clone()));
        }
        v
    }

    /// sha256 over the scalar settings and the contents of every input.
    /// Paths do not enter the hash, so relocated copies hash the same.
    pub fn config_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        let scalars = format!(
            "run_name={}\nn_realizations={}\nseed={}\ndiscount_rate={:?}\nreference_year={}\nfocus_country={}\nvariants={}\nrho={:?}\nurban_threshold={:?}\nssp={}\ntoe_quantile={:?}\ntoe_noise={:?}\n",
            self.run_name,
            self.n_realizations,
            self.seed,
            self.discount_rate,
            self.reference_year,
            self.focus_country,
            self.variants.join(","),
            self.rho,
            self.urban_threshold,
            self.socio.ssp,
            self.risk.toe_quantile,
            self.risk.toe_noise,
        );
        h.update(scalars.as_bytes());
        for (role, path) in self.inputs() {
            h.update(format!("{role}={}\n", file_sha256(&path)?).as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Check cross-references; returns every problem found (empty = ok).
pub fn validate_config(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    fn push(out: &mut Vec<Diagnostic>, field: &str, file: Option<&Path>, message: String) {
        out.push(Diagnostic {
            field: field.to_string(),
            file: file.map(Path::to_path_buf),
            message,
        })
    }
    macro_rules! diag {
        ($f:expr, $file:expr, $m:expr) => {
            push(&mut out, $f, $file, $m)
        };
    }
    if cfg.run_name.is_empty() || cfg.run_name.contains(['/', '\\']) {
        diag!("run_name", None, "must be a non-empty name without path separators".into());
    }
    if cfg.n_realizations < 1 {
        diag!("n_realizations", None, "must be at least 1".into());
    }
    if !(cfg.discount_rate > -1.0) {
        diag!("discount_rate", None, format!("must exceed −1, got {}", cfg.discount_rate));
    }
    if !cfg.axis().contains(cfg.reference_year) {
        diag!("reference_year", None, format!("{} is outside 2010–2100", cfg.reference_year));
    }
    if !(0.0..=1.0).contains(&cfg.rho) {
        diag!("rho", None, format!("must lie in [0, 1], got {}", cfg.rho));
    }
    if !(cfg.urban_threshold >= 0.0) {
        diag!("urban_threshold", None, "must be non-negative".into());
    }
    if !(cfg.risk.toe_quantile > 0.0 && cfg.risk.toe_quantile <= 0.5) {
        diag!("risk.toe_quantile", None, "must lie in (0, 0.5]".into());
    }
    for v in &cfg.variants {
        if v.parse::<VariantId>().is_err() {
            diag!("variants", None, format!("unknown variant `{v}`; valid ids: {}", VariantId::valid_list()));
        }
    }
    if cfg.variants.is_empty() {
        diag!("variants", None, "no damage variants requested".into());
    }
    if cfg.patterns.is_empty() {
        diag!("patterns", None, "at least one pattern file is required".into());
    }
    if cfg.scenarios.is_empty() {
        diag!("scenarios", None, "no scenarios configured".into());
    }
    for k in cfg.scenarios.keys() {
        if let Err(e) = k.parse::<ScenarioId>() {
            diag!("scenarios", None, e.to_string());
        }
    }
    let mut missing = false;
    for (role, path) in cfg.inputs() {
        if !path.is_file() {
            missing = true;
            diag!(&role, Some(&path), "file not found".into());
        }
    }
    if missing || !out.is_empty() {
        return out;
    }
    // Every file exists: load the assets to check their content.
    match crate::engine::run::Assets::load(cfg) {
        Ok(assets) => {
            for id in cfg.scenario_ids().unwrap_or_default() {
                if let Err(e) = assets.scenario(cfg, &id) {
                    diag!(&format!("scenarios.{id}"), cfg.emissions_path(&id).ok(), e.to_string());
                }
            }
            if let Some(t) = &cfg.risk.thresholds {
                if let Err(e) = crate::engine::load_thresholds(t) {
                    diag!("risk.thresholds", Some(t), e.to_string());
                }
            }
            if !assets.map.keys(crate::grid::Level::Country).contains(&cfg.focus_country) {
                diag!("focus_country", Some(&cfg.grid), format!("country `{}` not in grid", cfg.focus_country));
            }
        }
        Err(e) => {
            let (field, file) = attribute(cfg, &e);
            diag!(&field, file.as_deref(), e.to_string());
        }
    }
    out
}

fn attribute(cfg: &RunConfig, e: &Error) -> (String, Option<PathBuf>) {
    let path = match e {
        Error::Io { path, .. } | Error::Parse { path, .. } => Some(path.clone()),
        _ => None,
    };
    let text = e.to_string();
    for (role, p) in cfg.inputs() {
        if path.as_ref() == Some(&p) || text.contains(&p.display().to_string()) {
            return (role, Some(p));
        }
    }
    ("inputs".into(), path)
}
