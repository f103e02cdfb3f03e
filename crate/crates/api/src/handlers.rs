use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use physrisk_core::damage::VariantId;
use physrisk_core::engine::summary::{self, BoundingBox};
use physrisk_core::engine::EnsembleStore;
use physrisk_core::grid::GridSpec;
use physrisk_core::risk::{map_to_csv, map_to_raster, DateMode, ExceedanceMap, RiskIndexSpec, RiskLevels, RiskThreshold, Variable};

use crate::error::ApiError;
use crate::state::{ApiSession, RequestLogEntry};

type ApiResult<T> = Result<T, ApiError>;

const REQUEST_HASH: HeaderName = HeaderName::from_static("x-request-hash");
const CONFIG_HASH: HeaderName = HeaderName::from_static("x-config-hash");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub id: String,
    pub scenario: String,
    pub variants: Vec<String>,
    pub n_realizations: usize,
    pub grid: GridSpec,
    pub first_year: i32,
    pub last_year: i32,
    pub config_hash: String,
    pub focus_country: String,
    pub discount_rate: f64,
    pub reference_year: i32,
}

impl RunDescriptor {
    fn of(s: &EnsembleStore) -> Self {
        Self {
            id: s.run_id.clone(),
            scenario: s.scenario.to_string(),
            variants: s.variants.iter().map(|v| v.to_string()).collect(),
            n_realizations: s.n_realizations,
            grid: s.grid,
            first_year: s.axis.start,
            last_year: s.axis.end(),
            config_hash: s.config_hash.clone(),
            focus_country: s.config.focus_country.clone(),
            discount_rate: s.config.discount_rate,
            reference_year: s.config.reference_year,
        }
    }
}

pub async fn list_runs(State(session): State<Arc<ApiSession>>) -> Json<Vec<RunDescriptor>> {
    Json(session.stores().map(|s| RunDescriptor::of(s)).collect())
}

pub async fn get_run(State(session): State<Arc<ApiSession>>, Path(id): Path<String>) -> ApiResult<Json<RunDescriptor>> {
    let store = session.run(&id)?;
    Ok(Json(RunDescriptor::of(&store)))
}

/// Run blocking work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> physrisk_core::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {e}"),
        })?
        .map_err(ApiError::from)
}

fn parse_variant(v: Option<&String>) -> ApiResult<Option<VariantId>> {
    v.map(|s| s.parse::<VariantId>()).transpose().map_err(ApiError::from)
}

fn parse_variable(v: &str) -> ApiResult<Variable> {
    v.parse::<Variable>().map_err(ApiError::from)
}

fn hash_of(value: &impl Serialize) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("request serializes")))
}

#[derive(Debug, Deserialize)]
pub struct SeriesQuery {
    variable: Option<String>,
    variant: Option<String>,
    quantiles: Option<String>,
    format: Option<String>,
}

pub async fn cell_series(
    State(session): State<Arc<ApiSession>>,
    Path((id, cell)): Path<(String, String)>,
    Query(q): Query<SeriesQuery>,
) -> ApiResult<Response> {
    let store = session.run(&id)?;
    let cell: usize = cell
        .parse()
        .ok()
        .filter(|&c| c < store.grid.n_cells())
        .ok_or_else(|| ApiError::not_found(format!("unknown cell `{cell}`")))?;
    let variable = parse_variable(q.variable.as_deref().unwrap_or("dT"))?;
    let variant = parse_variant(q.variant.as_ref())?;
    let quantiles = summary::parse_quantiles(q.quantiles.as_deref().unwrap_or("5,50,95"))?;
    let csv = match q.format.as_deref() {
        None | Some("json") => false,
        Some("csv") => true,
        Some(other) => return Err(ApiError::bad_request(format!("unknown format `{other}`; use json or csv"))),
    };
    session.record(RequestLogEntry {
        method: "GET".into(),
        path: format!("/runs/{id}/cells/{cell}/series"),
        request_hash: None,
        cached: false,
    });
    let series = blocking(move || summary::cell_series(&store, cell, variable, variant, &quantiles)).await?;
    Ok(if csv {
        ([(header::CONTENT_TYPE, "text/csv")], series.to_csv()).into_response()
    } else {
        Json(series).into_response()
    })
}

#[derive(Debug, Deserialize)]
pub struct FieldQuery {
    variant: Option<String>,
    year: Option<i32>,
    percentile: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FieldCell {
    pub cell: usize,
    pub lat: f64,
    pub lon: f64,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct FieldPayload {
    pub run_id: String,
    pub config_hash: String,
    pub variable: String,
    pub variant: Option<String>,
    pub unit: String,
    pub year: Option<i32>,
    pub percentile: Option<f64>,
    pub cells: Vec<FieldCell>,
}

/// Per-cell percentile of a variable in one year, or `relative_pv`: the
/// median PV over the cell's reference-year GDP.
pub async fn field(
    State(session): State<Arc<ApiSession>>,
    Path((id, variable)): Path<(String, String)>,
    Query(q): Query<FieldQuery>,
) -> ApiResult<Json<FieldPayload>> {
    let store = session.run(&id)?;
    let variant = parse_variant(q.variant.as_ref())?;
    let s = store.clone();
    let (unit, year, percentile, values) = if variable == "relative_pv" {
        let v = variant.unwrap_or(store.variants[0]);
        let values = blocking(move || summary::relative_pv_field(&s, v)).await?;
        (format!("GDP {}", store.config.reference_year), None, None, values)
    } else {
        let var = parse_variable(&variable)?;
        let year = q.year.ok_or_else(|| ApiError::bad_request("`year` is required"))?;
        let pct = q.percentile.unwrap_or(50.0);
        if !(0.0..=100.0).contains(&pct) {
            return Err(ApiError::bad_request("percentile must lie in [0, 100]"));
        }
        let v = var.needs_variant().then(|| variant.unwrap_or(store.variants[0]));
        if let Some(v) = v {
            if !store.has_variant(v) {
                return Err(physrisk_core::Error::MissingVariable(format!("losses for variant {v}")).into());
            }
        }
        let values = blocking(move || summary::percentile_map(&s, var, v, year, pct / 100.0)).await?;
        (var.unit().to_string(), Some(year), Some(pct), values)
    };
    let cells = summary::export_cells(&store, None)
        .into_iter()
        .map(|c| {
            let (lat, lon) = store.grid.center(c);
            FieldCell { cell: c, lat, lon, value: values[c] }
        })
        .collect();
    Ok(Json(FieldPayload {
        run_id: store.run_id.clone(),
        config_hash: store.config_hash.clone(),
        variable,
        variant: variant.map(|v| v.to_string()),
        unit,
        year,
        percentile,
        cells,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MapFormat {
    #[default]
    Json,
    Csv,
    Raster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RiskLevelName {
    #[default]
    Moderate,
    High,
}

/// Body of `POST /runs/{id}/risk-index`. Thresholds come either as a list
/// of objects or as `text` in the thresholds-file format; with neither, the
/// run's configured index is used.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskIndexRequest {
    #[serde(default)]
    pub thresholds: Option<Vec<RiskThreshold>>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub k_moderate: Option<usize>,
    #[serde(default)]
    pub k_high: Option<usize>,
    #[serde(default)]
    pub variant: Option<VariantId>,
    #[serde(default)]
    pub bbox: Option<BoundingBox>,
    #[serde(default)]
    pub mode: DateMode,
    #[serde(default)]
    pub format: MapFormat,
    /// Level exported by the CSV and raster formats.
    #[serde(default)]
    pub level: RiskLevelName,
}

impl RiskIndexRequest {
    pub fn spec(&self, store: &EnsembleStore) -> physrisk_core::Result<RiskIndexSpec> {
        let mut spec = match (&self.thresholds, &self.text) {
            (Some(_), Some(_)) => {
                return Err(physrisk_core::Error::invalid("give either `thresholds` or `text`, not both"))
            }
            (Some(t), None) => RiskIndexSpec {
                thresholds: t.clone(),
                k_moderate: 2,
                k_high: 3,
                variant: None,
            },
            (None, Some(text)) => RiskIndexSpec::parse(text)?,
            (None, None) => summary::default_spec(store)?,
        };
        if let Some(k) = self.k_moderate {
            spec.k_moderate = k;
        }
        if let Some(k) = self.k_high {
            spec.k_high = k;
        }
        if self.variant.is_some() {
            spec.variant = self.variant;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Serialize)]
struct MapCell {
    cell: usize,
    lat: f64,
    lon: f64,
    moderate_date: Option<i32>,
    moderate_probability: f64,
    high_date: Option<i32>,
    high_probability: f64,
}

#[derive(Debug, Serialize)]
struct Units {
    date: &'static str,
    probability: &'static str,
}

#[derive(Debug, Serialize)]
struct MapPayload<'a> {
    run_id: &'a str,
    config_hash: &'a str,
    request_hash: &'a str,
    scenario: String,
    spec: &'a RiskIndexSpec,
    mode: DateMode,
    first_year: i32,
    last_year: i32,
    resolution: f64,
    units: Units,
    moderate_cells: usize,
    high_cells: usize,
    cells: Vec<MapCell>,
}

async fn levels_for(session: &Arc<ApiSession>, store: &Arc<EnsembleStore>, spec: &RiskIndexSpec, mode: DateMode) -> ApiResult<Arc<RiskLevels>> {
    let key = hash_of(&(&store.run_id, spec, mode));
    if let Some(l) = session.levels.lock().unwrap().get(&key) {
        return Ok(l.clone());
    }
    let (s, sp) = (store.clone(), spec.clone());
    let levels = Arc::new(blocking(move || summary::risk_index(&s, &sp, mode)).await?);
    session.levels.lock().unwrap().entry(key).or_insert(levels.clone());
    Ok(levels)
}

fn map_payload(store: &EnsembleStore, spec: &RiskIndexSpec, req: &RiskIndexRequest, levels: &RiskLevels, hash: &str) -> Vec<u8> {
    let cells = summary::export_cells(store, req.bbox.as_ref());
    let payload = MapPayload {
        run_id: &store.run_id,
        config_hash: &store.config_hash,
        request_hash: hash,
        scenario: store.scenario.to_string(),
        spec,
        mode: req.mode,
        first_year: store.axis.start,
        last_year: store.axis.end(),
        resolution: store.grid.resolution,
        units: Units {
            date: "year",
            probability: "fraction",
        },
        moderate_cells: cells.iter().filter(|&&c| levels.moderate.dates[c].is_some()).count(),
        high_cells: cells.iter().filter(|&&c| levels.high.dates[c].is_some()).count(),
        cells: cells
            .iter()
            .map(|&c| {
                let (lat, lon) = store.grid.center(c);
                MapCell {
                    cell: c,
                    lat,
                    lon,
                    moderate_date: levels.moderate.dates[c],
                    moderate_probability: levels.moderate.probability[c],
                    high_date: levels.high.dates[c],
                    high_probability: levels.high.probability[c],
                }
            })
            .collect(),
    };
    serde_json::to_vec(&payload).expect("map payload serializes")
}

pub async fn risk_index(
    State(session): State<Arc<ApiSession>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let store = session.run(&id)?;
    let req: RiskIndexRequest = if body.iter().all(u8::is_ascii_whitespace) {
        RiskIndexRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))?
    };
    if let Some(b) = &req.bbox {
        b.validate()?;
        if req.format == MapFormat::Raster {
            return Err(ApiError::bad_request("the raster format always covers the full grid; drop `bbox`"));
        }
    }
    let spec = req.spec(&store)?;
    summary::check_index(&store, &spec)?;
    let hash = hash_of(&(&store.run_id, &spec, req.mode, &req.bbox, req.format, req.level));
    let cached = session.responses.lock().unwrap().get(&hash).cloned();
    session.record(RequestLogEntry {
        method: "POST".into(),
        path: format!("/runs/{id}/risk-index"),
        request_hash: Some(hash.clone()),
        cached: cached.is_some(),
    });
    let entry = match cached {
        Some(e) => e,
        None => {
            let levels = levels_for(&session, &store, &spec, req.mode).await?;
            let pick = |l: &RiskLevels| -> ExceedanceMap {
                match req.level {
                    RiskLevelName::Moderate => l.moderate.clone(),
                    RiskLevelName::High => l.high.clone(),
                }
            };
            let (ctype, bytes) = match req.format {
                MapFormat::Json => ("application/json", map_payload(&store, &spec, &req, &levels, &hash)),
                MapFormat::Csv => ("text/csv", map_to_csv(&pick(&levels), &summary::export_cells(&store, req.bbox.as_ref()))),
                MapFormat::Raster => ("application/octet-stream", map_to_raster(&pick(&levels))),
            };
            let e = Arc::new((ctype.to_string(), bytes));
            session.responses.lock().unwrap().entry(hash.clone()).or_insert(e).clone()
        }
    };
    let mut resp = (StatusCode::OK, entry.1.clone()).into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_str(&entry.0).unwrap());
    h.insert(REQUEST_HASH, HeaderValue::from_str(&hash).unwrap());
    h.insert(CONFIG_HASH, HeaderValue::from_str(&store.config_hash).unwrap());
    Ok(resp)
}

pub async fn locality_summary(
    State(session): State<Arc<ApiSession>>,
    Path((id, admin)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<summary::LocalitySummary>> {
    let store = session.run(&id)?;
    if let Some(k) = q.keys().find(|k| k.as_str() != "variant") {
        return Err(ApiError::bad_request(format!("unknown query parameter `{k}`")));
    }
    let sel = summary::resolve_selector(&store, &admin).map_err(|e| match e {
        physrisk_core::Error::Invalid(m) => ApiError::not_found(m),
        other => other.into(),
    })?;
    let variant = parse_variant(q.get("variant"))?.unwrap_or(store.variants[0]);
    if !store.has_variant(variant) {
        return Err(physrisk_core::Error::MissingVariable(format!("losses for variant {variant}")).into());
    }
    let spec = summary::default_spec(&store)?;
    summary::check_index(&store, &spec)?;
    let levels = levels_for(&session, &store, &spec, DateMode::MedianOfDates).await?;
    session.record(RequestLogEntry {
        method: "GET".into(),
        path: format!("/runs/{id}/localities/{admin}/summary"),
        request_hash: None,
        cached: false,
    });
    let out = blocking(move || summary::locality_summary(&store, &sel, variant, &levels)).await?;
    Ok(Json(out))
}
