use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use physrisk_api::{router, ApiSession};
use physrisk_core::engine::{run_ensemble, EnsembleStore, RunConfig, RunOptions};
use physrisk_core::scenario::ScenarioId;
use physrisk_core::synth;

/// Synthetic assets plus CP and B2 runs with `n` realizations.
fn runs(dir: &Path, n: usize, variants: &[&str]) -> std::path::PathBuf {
    synth::generate(&dir.join("data"), synth::DEFAULT_SEED).unwrap();
    let mut cfg = RunConfig::load(&dir.join("data/config.toml")).unwrap();
    cfg.n_realizations = n;
    cfg.variants = variants.iter().map(|v| v.to_string()).collect();
    let out = dir.join("runs");
    for id in ["CP", "B2"] {
        run_ensemble(&cfg, &id.parse::<ScenarioId>().unwrap(), &out, &RunOptions { workers: 2 }).unwrap();
    }
    out
}

struct Reply {
    status: StatusCode,
    hash: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let hash = resp.headers().get("x-request-hash").map(|h| h.to_str().unwrap().to_string());
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, hash, body }
}

fn mounted(root: &Path) -> (Arc<ApiSession>, Router) {
    let session = Arc::new(ApiSession::mount(root).unwrap());
    (session.clone(), router(session))
}

#[tokio::test]
async fn empty_mount_lists_no_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, app) = mounted(tmp.path());
    let r = call(&app, "GET", "/runs", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json(), serde_json::json!([]));
    assert_eq!(call(&app, "GET", "/runs/nope", None).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn descriptors_series_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let root = runs(tmp.path(), 4, &["K", "KU"]);
    let (session, app) = mounted(&root);

    let list = call(&app, "GET", "/runs", None).await.json();
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|d| d["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["demo-B2", "demo-CP"]);
    assert_eq!(list[1]["n_realizations"], 4);
    assert_eq!(list[1]["scenario"], "CP");

    let store = session.run("demo-CP").unwrap();
    let m = &store.manifest;
    assert_eq!(list[1]["config_hash"], m.get("config_hash").unwrap());
    assert_eq!(list[1]["n_realizations"].to_string(), m.get("realizations").unwrap());
    let variants: Vec<&str> = list[1]["variants"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(variants.join(","), m.get("variants").unwrap());
    assert_eq!(call(&app, "GET", "/runs/demo-CP", None).await.json(), list[1]);
    let cell = (0..store.grid.n_cells()).find(|&c| store.map().is_land(c)).unwrap();

    let field = call(&app, "GET", "/runs/demo-CP/fields/dT?year=2050&percentile=95", None).await;
    assert_eq!(field.status, StatusCode::OK);
    let field = field.json();
    assert_eq!(field["cells"].as_array().unwrap().len(), store.map().land_cells().len());
    assert_eq!(field["unit"], "degC");
    let pv = call(&app, "GET", "/runs/demo-CP/fields/relative_pv?variant=KU", None).await.json();
    assert!(pv["cells"].as_array().unwrap().iter().all(|c| c["value"].as_f64().unwrap() >= 0.0));

    let series = call(&app, "GET", &format!("/runs/demo-CP/cells/{cell}/series?variable=loss_pct&variant=KU"), None).await;
    assert_eq!(series.status, StatusCode::OK);
    let v = series.json();
    assert_eq!(v["years"].as_array().unwrap().len(), 91);
    let q = v["values"].as_array().unwrap();
    for t in 0..91 {
        let (a, b, c) = (q[0][t].as_f64().unwrap(), q[1][t].as_f64().unwrap(), q[2][t].as_f64().unwrap());
        assert!(a <= b && b <= c, "year {t}: {a} {b} {c}");
    }

    let csv = call(&app, "GET", &format!("/runs/demo-CP/cells/{cell}/series?format=csv"), None).await;
    assert!(String::from_utf8(csv.body).unwrap().starts_with("year,q5,q50,q95\n"));

    let n = store.grid.n_cells();
    for (uri, status) in [
        (format!("/runs/demo-CP/cells/{n}/series"), StatusCode::NOT_FOUND),
        ("/runs/demo-XX/cells/0/series".to_string(), StatusCode::NOT_FOUND),
        (format!("/runs/demo-CP/cells/{cell}/series?quantiles=150"), StatusCode::BAD_REQUEST),
        (format!("/runs/demo-CP/cells/{cell}/series?variable=wind"), StatusCode::UNPROCESSABLE_ENTITY),
        (format!("/runs/demo-CP/cells/{cell}/series?variable=loss_pct&variant=RPU_w"), StatusCode::UNPROCESSABLE_ENTITY),
        ("/runs/demo-CP/localities/ZZZ/summary".to_string(), StatusCode::NOT_FOUND),
        ("/runs/demo-CP/fields/dT".to_string(), StatusCode::BAD_REQUEST),
        ("/runs/demo-CP/fields/dT?year=2050&percentile=101".to_string(), StatusCode::BAD_REQUEST),
        ("/runs/demo-CP/fields/loss_pct?year=2050&variant=KWU".to_string(), StatusCode::UNPROCESSABLE_ENTITY),
        ("/runs/demo-CP/localities/MEX/summary?foo=1".to_string(), StatusCode::BAD_REQUEST),
    ] {
        let r = call(&app, "GET", &uri, None).await;
        assert_eq!(r.status, status, "{uri}: {}", String::from_utf8_lossy(&r.body));
        assert!(r.json()["error"].is_string());
    }

    // The configured index reads losses under RPU_w, which these runs lack.
    let missing = call(&app, "POST", "/runs/demo-CP/risk-index", None).await;
    assert_eq!(missing.status, StatusCode::UNPROCESSABLE_ENTITY);
    for body in [
        "{not json",
        r#"{"variant":"KU","k_moderate":3,"k_high":2}"#,
        r#"{"unknown":1}"#,
        r#"{"text":"dT >>= 3"}"#,
        r#"{"variant":"KU","format":"raster","bbox":{"lat_min":15,"lat_max":20,"lon_min":-100,"lon_max":-95}}"#,
    ] {
        let r = call(&app, "POST", "/runs/demo-CP/risk-index", Some(body)).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{body}: {}", String::from_utf8_lossy(&r.body));
    }
}

#[tokio::test]
async fn risk_index_bbox_and_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let root = runs(tmp.path(), 4, &["K", "RPU_w"]);
    let (session, app) = mounted(&root);

    let full = call(&app, "POST", "/runs/demo-CP/risk-index", Some(r#"{"format":"csv"}"#)).await;
    assert_eq!(full.status, StatusCode::OK, "{}", String::from_utf8_lossy(&full.body));
    let full_text = String::from_utf8(full.body.clone()).unwrap();
    assert_eq!(full_text.lines().next(), Some("lat,lon,date,probability"));

    let bbox = r#"{"format":"csv","bbox":{"lat_min":17,"lat_max":22,"lon_min":-104,"lon_max":-96}}"#;
    let part = call(&app, "POST", "/runs/demo-CP/risk-index", Some(bbox)).await;
    assert_eq!(part.status, StatusCode::OK);
    let part_text = String::from_utf8(part.body).unwrap();
    let rows: std::collections::HashSet<&str> = full_text.lines().skip(1).collect();
    let sub: Vec<&str> = part_text.lines().skip(1).collect();
    assert!(!sub.is_empty() && sub.len() < rows.len());
    for line in &sub {
        assert!(rows.contains(line), "{line}");
        let lat: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!((17.0..=22.0).contains(&lat));
    }

    let json_body = r#"{"k_moderate":1,"k_high":2}"#;
    let first = call(&app, "POST", "/runs/demo-CP/risk-index", Some(json_body)).await;
    let second = call(&app, "POST", "/runs/demo-CP/risk-index", Some(json_body)).await;
    assert_eq!(first.status, StatusCode::OK);
    assert_eq!(first.hash, second.hash);
    assert_eq!(first.body, second.body);
    let map = first.json();
    assert_eq!(map["request_hash"].as_str(), first.hash.as_deref());
    assert!(map["moderate_cells"].as_u64().unwrap() >= map["high_cells"].as_u64().unwrap());

    let log = session.request_log();
    let hits: Vec<_> = log.iter().filter(|e| e.request_hash == first.hash).collect();
    assert_eq!(hits.len(), 2);
    assert!(!hits[0].cached);
    assert!(hits[1].cached);
}

#[tokio::test]
async fn locality_summaries_add_up() {
    let tmp = tempfile::tempdir().unwrap();
    // One realization makes the reported medians exact sample values, so sums must hold.
    let root = runs(tmp.path(), 1, &["K", "RPU_w"]);
    let (session, app) = mounted(&root);
    let store: Arc<EnsembleStore> = session.run("demo-CP").unwrap();

    let get = |uri: String| {
        let app = app.clone();
        async move {
            let r = call(&app, "GET", &uri, None).await;
            assert_eq!(r.status, StatusCode::OK, "{uri}: {}", String::from_utf8_lossy(&r.body));
            r.json()
        }
    };
    let cell = store.map().land_cells()[40];
    let series = get(format!("/runs/demo-CP/cells/{cell}/series?variable=loss_value&variant=K&quantiles=50")).await;
    let raw = physrisk_core::engine::summary::variable_cube(&store, 0, physrisk_core::risk::Variable::LossValue, Some("K".parse().unwrap()))
        .unwrap()
        .cell_series(cell);
    let median: Vec<f64> = series["values"][0].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(median, raw);

    let national = get("/runs/demo-CP/localities/country:MEX/summary?variant=RPU_w".into()).await;
    let pv = national["pv"].as_f64().unwrap();
    assert!(pv > 0.0);

    let states: Vec<String> = store.map().keys(physrisk_core::grid::Level::State).into_iter().filter(|k| k.starts_with("MX-")).collect();
    assert_eq!(states.len(), 32);
    let mut total = 0.0;
    for s in &states {
        total += get(format!("/runs/demo-CP/localities/admin1:{s}/summary?variant=RPU_w")).await["pv"].as_f64().unwrap();
    }
    assert!((total - pv).abs() <= 1e-9 * pv, "{total} vs {pv}");

    let global = get("/runs/demo-CP/localities/global/summary?variant=RPU_w".into()).await;
    let mut countries = 0.0;
    for c in store.map().keys(physrisk_core::grid::Level::Country) {
        countries += get(format!("/runs/demo-CP/localities/country:{c}/summary?variant=RPU_w")).await["pv"].as_f64().unwrap();
    }
    let g = global["pv"].as_f64().unwrap();
    assert!((countries - g).abs() <= 1e-9 * g, "{countries} vs {g}");
    assert_eq!(global["cells"].as_u64().unwrap() as usize, store.map().land_cells().len());
}
