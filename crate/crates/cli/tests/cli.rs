use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

fn physrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_physrisk"))
        .args(args)
        .env_remove("PHYSRISK_DATA")
        .output()
        .expect("spawn physrisk")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _tmp: tempfile::TempDir,
    data: PathBuf,
    runs: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        let out = physrisk(&["synth-data", "--out", s(&data)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let runs = tmp.path().join("runs");
        Fixture { _tmp: tmp, data, runs }
    }

    fn config(&self) -> PathBuf {
        self.data.join("config.toml")
    }

    fn run(&self, scenario: &str, workers: &str, out: &Path) -> PathBuf {
        let o = physrisk(&[
            "run", "--config", s(&self.config()), "--scenario", scenario, "--realizations", "6", "--workers", workers, "--out",
            s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out.join(format!("demo-{scenario}"))
    }
}

#[test]
fn validate_reports_exit_codes() {
    let fx = Fixture::new();
    assert_eq!(code(&physrisk(&["validate", "--config", s(&fx.config())])), 0);

    let missing = physrisk(&["validate", "--config", "/nonexistent/config.toml"]);
    assert_eq!(code(&missing), 2);

    let text = std::fs::read_to_string(fx.config()).unwrap();
    let broken = fx.data.join("broken.toml");
    std::fs::write(&broken, text.replace("discount_rate = 0.015", "discount_rate = -2.0").replace("rho = 0.5", "rho = 1.5"))
        .unwrap();
    let out = physrisk(&["validate", "--config", s(&broken)]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("discount_rate"), "{stderr}");
    assert!(stderr.contains("rho"), "{stderr}");

    let unknown = physrisk(&["run", "--config", s(&fx.config()), "--scenario", "ZZ", "--out", s(&fx.runs)]);
    assert_eq!(code(&unknown), 2);
    assert!(!fx.runs.join("demo-ZZ").exists());
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let fx = Fixture::new();
    let a = fx.run("CP", "1", &fx.runs.join("a"));
    let b = fx.run("CP", "3", &fx.runs.join("b"));
    let ma = std::fs::read(a.join("manifest.txt")).unwrap();
    let mb = std::fs::read(b.join("manifest.txt")).unwrap();
    assert!(!ma.is_empty());
    assert_eq!(ma, mb);
}

#[test]
fn report_and_risk_index_outputs() {
    let fx = Fixture::new();
    let cp = fx.run("CP", "0", &fx.runs);
    let b2 = fx.run("B2", "0", &fx.runs);

    let pv = physrisk(&["report", "--run", s(&cp), "--run", s(&b2), "--metric", "pv", "--format", "csv"]);
    assert_eq!(code(&pv), 0, "{}", String::from_utf8_lossy(&pv.stderr));
    let table = String::from_utf8(pv.stdout).unwrap();
    for row in ["CP,", "B2,", "AL,"] {
        assert!(table.lines().any(|l| l.starts_with(row)), "{table}");
    }

    let bad_variant = physrisk(&["report", "--run", s(&cp), "--metric", "pct", "--variant", "XYZ", "--format", "csv"]);
    assert_eq!(code(&bad_variant), 2);

    let ratio = physrisk(&["report", "--run", s(&cp), "--metric", "risk-ratio", "--variant", "KU", "--format", "csv"]);
    assert_eq!(code(&ratio), 0);
    let text = String::from_utf8(ratio.stdout).unwrap();
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("CP,KU,2024,ratio,1.000000,1.000000,1.000000"), "{first}");

    let inverted = physrisk(&["risk-index", "--run", s(&cp), "--k-moderate", "3", "--k-high", "2", "--out", s(&fx.runs)]);
    assert_eq!(code(&inverted), 2);

    let bad = fx.data.join("bad_thresholds.txt");
    std::fs::write(&bad, "dT >>= 3\n").unwrap();
    let malformed = physrisk(&["risk-index", "--run", s(&cp), "--thresholds", s(&bad), "--out", s(&fx.runs)]);
    assert_eq!(code(&malformed), 2);

    let maps = fx.runs.join("maps");
    let ok = physrisk(&["risk-index", "--run", s(&cp), "--out", s(&maps)]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    for f in ["demo-CP-moderate.csv", "demo-CP-high.csv", "demo-CP-moderate.prr", "demo-CP-high.prr"] {
        assert!(maps.join(f).is_file(), "{f}");
    }
    let again = fx.runs.join("maps2");
    assert_eq!(code(&physrisk(&["risk-index", "--run", s(&cp), "--out", s(&again)])), 0);
    assert_eq!(
        std::fs::read(maps.join("demo-CP-moderate.prr")).unwrap(),
        std::fs::read(again.join("demo-CP-moderate.prr")).unwrap()
    );

    // The HTTP service must hand back the same bytes for the same query.
    let session = Arc::new(physrisk_api::ApiSession::mount(&fx.runs).unwrap());
    let rt = tokio::runtime::Runtime::new().unwrap();
    for (level, format, file) in [
        ("moderate", "csv", "demo-CP-moderate.csv"),
        ("high", "csv", "demo-CP-high.csv"),
        ("moderate", "raster", "demo-CP-moderate.prr"),
    ] {
        let body = format!(r#"{{"format":"{format}","level":"{level}"}}"#);
        let bytes = rt.block_on(async {
            let resp = physrisk_api::router(session.clone())
                .oneshot(
                    Request::post("/runs/demo-CP/risk-index")
                        .header("content-type", "application/json")
                        .body(Body::from(body))
                        .unwrap(),
                )
                .await
                .unwrap();
            assert_eq!(resp.status(), StatusCode::OK);
            resp.into_body().collect().await.unwrap().to_bytes()
        });
        assert_eq!(bytes.as_ref(), std::fs::read(maps.join(file)).unwrap().as_slice(), "{file}");
    }

    let field = fx.runs.join("dt.csv");
    let export = physrisk(&["map-export", "--run", s(&cp), "--variable", "dT", "--year", "2050", "--out", s(&field)]);
    assert_eq!(code(&export), 0, "{}", String::from_utf8_lossy(&export.stderr));
    let text = std::fs::read_to_string(&field).unwrap();
    assert_eq!(text.lines().next(), Some("lat,lon,value"));
    assert!(text.lines().count() > 100);

    let no_year = physrisk(&["map-export", "--run", s(&cp), "--variable", "dT", "--out", s(&field)]);
    assert_eq!(code(&no_year), 2);
}

#[test]
fn data_env_var_supplies_default_paths() {
    let fx = Fixture::new();
    let out = Command::new(env!("CARGO_BIN_EXE_physrisk"))
        .arg("validate")
        .env("PHYSRISK_DATA", &fx.data)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}
