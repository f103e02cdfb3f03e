//! `physrisk`: run ensembles, report metrics, export risk maps and serve runs.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use physrisk_core::damage::VariantId;
use physrisk_core::engine::summary::{self, BandSeries, Selector};
use physrisk_core::engine::{load_thresholds, run_ensemble, validate_config, EnsembleStore, RunConfig, RunOptions};
use physrisk_core::risk::{map_to_csv, map_to_raster, DateMode, ExceedanceMap, RiskIndexSpec};
use physrisk_core::scenario::ScenarioId;
use physrisk_core::{synth, Error};

/// Default data directory when `PHYSRISK_DATA` is unset.
const DEFAULT_DATA_DIR: &str = "data/demo";

#[derive(Parser)]
#[command(name = "physrisk", version, about = "Gridded climate physical-risk ensembles")]
struct Cli {
    /// Data directory holding config.toml and runs/.
    #[arg(long, global = true, env = "PHYSRISK_DATA", default_value = DEFAULT_DATA_DIR)]
    data: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo ensembles and write one store per scenario.
    Run(RunArgs),
    /// Check a configuration and print every problem found.
    Validate(ValidateArgs),
    /// Summarize stored runs: PV tables and loss series.
    Report(ReportArgs),
    /// Compute moderate and high risk-level maps.
    RiskIndex(RiskIndexArgs),
    /// Export one map: a threshold, a risk level or a percentile field.
    MapExport(MapExportArgs),
    /// Serve mounted runs over HTTP.
    Serve(ServeArgs),
    /// Write the synthetic demo asset set.
    SynthData(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration [default: <data>/config.toml].
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario id; repeat for several [default: every configured scenario].
    #[arg(long)]
    scenario: Vec<String>,
    /// Override the number of realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: <data>/runs].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Pv,
    Pct,
    Rolling,
    RiskRatio,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Text,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory; repeat to tabulate several scenarios.
    #[arg(long, required = true)]
    run: Vec<PathBuf>,
    #[arg(long, value_enum)]
    metric: Metric,
    /// Discount rate [default: the run's rate].
    #[arg(long)]
    discount: Option<f64>,
    /// Rolling window in years.
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Aggregation: global, country:X, region:X, admin1:X, admin2:X, cell:N or a bare code
    /// [default: the focus country].
    #[arg(long)]
    level: Option<String>,
    /// Damage variant; repeat for several [default: every stored variant].
    #[arg(long)]
    variant: Vec<String>,
    /// Print to stdout in this format.
    #[arg(long, value_enum)]
    format: Option<TableFormat>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    MedianOfDates,
    MedianPath,
}

impl From<Mode> for DateMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::MedianOfDates => DateMode::MedianOfDates,
            Mode::MedianPath => DateMode::MedianPath,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MapFormat {
    Csv,
    Raster,
    Both,
}

#[derive(Args)]
struct IndexArgs {
    /// Thresholds file [default: the run's configured thresholds].
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[arg(long)]
    k_moderate: Option<usize>,
    #[arg(long)]
    k_high: Option<usize>,
    /// Default variant for loss thresholds.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, value_enum, default_value = "median-of-dates")]
    mode: Mode,
}

#[derive(Args)]
struct RiskIndexArgs {
    #[arg(long)]
    run: PathBuf,
    #[command(flatten)]
    index: IndexArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    format: MapFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Moderate,
    High,
}

#[derive(Args)]
struct MapExportArgs {
    #[arg(long)]
    run: PathBuf,
    /// Single threshold, e.g. "dT >= 3 window=21".
    #[arg(long, group = "what")]
    threshold: Option<String>,
    /// Risk level from the threshold index.
    #[arg(long, value_enum, group = "what")]
    risk_level: Option<Level>,
    /// Variable for a percentile field (dT, dP, loss_pct, loss_value).
    #[arg(long, group = "what")]
    variable: Option<String>,
    /// Median PV per cell over the cell's reference-year GDP.
    #[arg(long, group = "what")]
    relative_pv: bool,
    #[arg(long)]
    year: Option<i32>,
    /// Percentile in [0, 100].
    #[arg(long, default_value_t = 50.0)]
    percentile: f64,
    #[command(flatten)]
    index: IndexArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: MapFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Directory of run stores [default: <data>/runs].
    #[arg(long)]
    mount: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory [default: <data>].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = synth::DEFAULT_SEED)]
    seed: u64,
}

/// Failure with its exit code.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure::Usage(e.to_string())
    }
    fn runtime(e: impl ToString) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Errors caused by the request rather than the computation.
fn classify(e: Error) -> Failure {
    match e {
        Error::Invalid(_)
        | Error::Parse { .. }
        | Error::UnknownKey { .. }
        | Error::UnknownVariant { .. }
        | Error::MissingVariable(_)
        | Error::OutOfRange { .. } => Failure::usage(e),
        other => Failure::runtime(other),
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(&cli.data, a),
        Command::Validate(a) => validate(&cli.data, a),
        Command::Report(a) => report(a),
        Command::RiskIndex(a) => risk_index(a),
        Command::MapExport(a) => map_export(a),
        Command::Serve(a) => serve(&cli.data, a),
        Command::SynthData(a) => synth_data(&cli.data, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_config(data: &Path, path: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    let path = path.cloned().unwrap_or_else(|| data.join("config.toml"));
    RunConfig::load(&path).map_err(Failure::usage)
}

fn run(data: &Path, a: &RunArgs) -> CliResult {
    let mut cfg = load_config(data, a.config.as_ref())?;
    if let Some(n) = a.realizations {
        cfg.n_realizations = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let diags = validate_config(&cfg);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("{d}");
        }
        return Err(Failure::usage(format!("{} configuration problem(s)", diags.len())));
    }
    let scenarios: Vec<ScenarioId> = if a.scenario.is_empty() {
        cfg.scenario_ids().map_err(Failure::usage)?
    } else {
        a.scenario
            .iter()
            .map(|s| {
                let id: ScenarioId = s.parse().map_err(Failure::usage)?;
                cfg.emissions_path(&id).map_err(Failure::usage)?;
                Ok(id)
            })
            .collect::<Result<_, Failure>>()?
    };
    let out = a.out.clone().unwrap_or_else(|| data.join("runs"));
    let opts = RunOptions { workers: a.workers };
    for id in &scenarios {
        let start = std::time::Instant::now();
        let dir = run_ensemble(&cfg, id, &out, &opts).map_err(Failure::runtime)?;
        eprintln!(
            "{id}: {} realizations in {:.1}s -> {}",
            cfg.n_realizations,
            start.elapsed().as_secs_f64(),
            dir.display()
        );
    }
    Ok(())
}

fn validate(data: &Path, a: &ValidateArgs) -> CliResult {
    let cfg = load_config(data, a.config.as_ref())?;
    let diags = validate_config(&cfg);
    for d in &diags {
        eprintln!("{d}");
    }
    if diags.is_empty() {
        eprintln!("ok");
        Ok(())
    } else {
        Err(Failure::usage(format!("{} configuration problem(s)", diags.len())))
    }
}

fn open(dir: &Path) -> Result<EnsembleStore, Failure> {
    if !EnsembleStore::is_run_dir(dir) {
        return Err(Failure::usage(format!("{} is not a complete run directory", dir.display())));
    }
    EnsembleStore::open(dir).map_err(Failure::runtime)
}

fn parse_variants(list: &[String], store: &EnsembleStore) -> Result<Vec<VariantId>, Failure> {
    if list.is_empty() {
        return Ok(store.variants.clone());
    }
    list.iter()
        .map(|v| {
            let id: VariantId = v.parse().map_err(Failure::usage)?;
            if !store.has_variant(id) {
                return Err(Failure::usage(format!("variant {id} is not stored in {}", store.run_id)));
            }
            Ok(id)
        })
        .collect()
}

fn emit(out: Option<&PathBuf>, format_given: bool, default_name: &str, body: &[u8]) -> CliResult {
    match out {
        Some(p) => std::fs::write(p, body).map_err(|e| Failure::runtime(Error::io(p, e))),
        None if format_given => std::io::stdout().write_all(body).map_err(Failure::runtime),
        None => {
            let p = PathBuf::from(default_name);
            std::fs::write(&p, body).map_err(|e| Failure::runtime(Error::io(&p, e)))?;
            eprintln!("wrote {}", p.display());
            Ok(())
        }
    }
}

fn series_table(rows: &[(String, VariantId, BandSeries)], year_label: &str, format: TableFormat) -> String {
    let mut s = String::new();
    match format {
        TableFormat::Csv => {
            s.push_str(&format!("scenario,variant,{year_label},unit,p5,p50,p95\n"));
            for (scenario, v, b) in rows {
                for i in 0..b.years.len() {
                    s.push_str(&format!(
                        "{scenario},{v},{},{},{:.6},{:.6},{:.6}\n",
                        b.years[i], b.unit, b.p5[i], b.p50[i], b.p95[i]
                    ));
                }
            }
        }
        TableFormat::Text => {
            s.push_str(&format!("{:<8} {:<7} {:>10} {:>14} {:>14} {:>14}\n", "scenario", "variant", year_label, "p5", "p50", "p95"));
            for (scenario, v, b) in rows {
                for i in 0..b.years.len() {
                    s.push_str(&format!(
                        "{scenario:<8} {:<7} {:>10} {:>14.4} {:>14.4} {:>14.4}\n",
                        v.to_string(),
                        b.years[i],
                        b.p5[i],
                        b.p50[i],
                        b.p95[i]
                    ));
                }
            }
        }
    }
    s
}

fn report(a: &ReportArgs) -> CliResult {
    let stores = a.run.iter().map(|d| open(d)).collect::<Result<Vec<_>, _>>()?;
    let first = &stores[0];
    let level = a.level.clone().unwrap_or_else(|| format!("country:{}", first.config.focus_country));
    let sel: Selector = summary::resolve_selector(first, &level).map_err(Failure::usage)?;
    let variants = parse_variants(&a.variant, first)?;
    let rate = a.discount.unwrap_or(first.config.discount_rate);
    if !(rate > -1.0) {
        return Err(Failure::usage("discount rate must exceed -1"));
    }
    if a.window == 0 || a.window > first.axis.len {
        return Err(Failure::usage(format!("window must lie in 1..={}", first.axis.len)));
    }
    let format = a.format.unwrap_or(TableFormat::Csv);
    let name = |m: &str| format!("{}-{m}.{}", first.run_id, if format == TableFormat::Csv { "csv" } else { "txt" });
    let body = match a.metric {
        Metric::Pv => {
            let refs: Vec<&EnsembleStore> = stores.iter().collect();
            let table = summary::pv_table(&refs, &sel, &variants, rate).map_err(classify)?;
            (if format == TableFormat::Csv { table.to_csv() } else { table.to_text() }, name("pv"))
        }
        metric => {
            let mut rows = Vec::new();
            for s in &stores {
                for &v in &variants {
                    if !s.has_variant(v) {
                        return Err(Failure::usage(format!("variant {v} is not stored in {}", s.run_id)));
                    }
                    let b = match metric {
                        Metric::Pct => summary::pct_series(s, &sel, v),
                        Metric::Rolling => summary::rolling_series(s, &sel, v, rate, a.window),
                        _ => summary::risk_ratio_series(s, &sel, v, rate, a.window),
                    }
                    .map_err(classify)?;
                    rows.push((s.scenario.to_string(), v, b));
                }
            }
            let (label, m) = match metric {
                Metric::Pct => ("year", "pct"),
                Metric::Rolling => ("start_year", "rolling"),
                _ => ("start_year", "risk-ratio"),
            };
            (series_table(&rows, label, format), name(m))
        }
    };
    emit(a.out.as_ref(), a.format.is_some(), &body.1, body.0.as_bytes())
}

fn index_spec(store: &EnsembleStore, a: &IndexArgs) -> Result<RiskIndexSpec, Failure> {
    let mut spec = match &a.thresholds {
        Some(p) => load_thresholds(p).map_err(Failure::usage)?,
        None => summary::default_spec(store).map_err(Failure::usage)?,
    };
    if let Some(k) = a.k_moderate {
        spec.k_moderate = k;
    }
    if let Some(k) = a.k_high {
        spec.k_high = k;
    }
    if let Some(v) = &a.variant {
        spec.variant = Some(v.parse().map_err(Failure::usage)?);
    }
    spec.validate().map_err(Failure::usage)?;
    summary::check_index(store, &spec).map_err(Failure::usage)?;
    Ok(spec)
}

fn write_file(path: &Path, body: &[u8]) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::runtime(Error::io(parent, e)))?;
    }
    std::fs::write(path, body).map_err(|e| Failure::runtime(Error::io(path, e)))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_map(store: &EnsembleStore, map: &ExceedanceMap, base: &Path, format: MapFormat) -> CliResult {
    if format != MapFormat::Raster {
        let cells = summary::export_cells(store, None);
        write_file(&base.with_extension("csv"), &map_to_csv(map, &cells))?;
    }
    if format != MapFormat::Csv {
        write_file(&base.with_extension("prr"), &map_to_raster(map))?;
    }
    Ok(())
}

fn risk_index(a: &RiskIndexArgs) -> CliResult {
    let store = open(&a.run)?;
    let spec = index_spec(&store, &a.index)?;
    let levels = summary::risk_index(&store, &spec, a.index.mode.into()).map_err(classify)?;
    for (name, map) in [("moderate", &levels.moderate), ("high", &levels.high)] {
        write_map(&store, map, &a.out.join(format!("{}-{name}", store.run_id)), a.format)?;
        eprintln!("{name}: {} cells reach the level by {}", map.dated_cells(), store.axis.end());
    }
    Ok(())
}

fn map_export(a: &MapExportArgs) -> CliResult {
    let store = open(&a.run)?;
    let variant: Option<VariantId> = a.index.variant.as_ref().map(|v| v.parse()).transpose().map_err(Failure::usage)?;
    let exceedance = if let Some(line) = &a.threshold {
        let spec = RiskIndexSpec::parse(line).map_err(Failure::usage)?;
        let [t] = spec.thresholds.as_slice() else {
            return Err(Failure::usage("--threshold takes exactly one threshold"));
        };
        Some(summary::threshold_map(&store, t, variant.or(spec.variant)).map_err(classify)?)
    } else if let Some(level) = a.risk_level {
        let spec = index_spec(&store, &a.index)?;
        let levels = summary::risk_index(&store, &spec, a.index.mode.into()).map_err(classify)?;
        Some(match level {
            Level::Moderate => levels.moderate,
            Level::High => levels.high,
        })
    } else {
        None
    };
    if let Some(map) = exceedance {
        if a.format == MapFormat::Both {
            return write_map(&store, &map, &a.out, a.format);
        }
        let body = if a.format == MapFormat::Csv {
            map_to_csv(&map, &summary::export_cells(&store, None))
        } else {
            map_to_raster(&map)
        };
        return write_file(&a.out, &body);
    }
    if a.format != MapFormat::Csv {
        return Err(Failure::usage("value fields export as csv only"));
    }
    let (values, header) = if a.relative_pv {
        let v = variant.unwrap_or(store.variants[0]);
        (summary::relative_pv_field(&store, v).map_err(classify)?, "relative_pv")
    } else if let Some(var) = &a.variable {
        let var = var.parse().map_err(Failure::usage)?;
        let year = a.year.ok_or_else(|| Failure::usage("--year is required with --variable"))?;
        if !(0.0..=100.0).contains(&a.percentile) {
            return Err(Failure::usage("--percentile must lie in [0, 100]"));
        }
        let v = variant.or(Some(store.variants[0]));
        (summary::percentile_map(&store, var, v, year, a.percentile / 100.0).map_err(classify)?, "value")
    } else {
        return Err(Failure::usage("give one of --threshold, --risk-level, --variable or --relative-pv"));
    };
    let mut body = format!("lat,lon,{header}\n");
    for c in summary::export_cells(&store, None) {
        let (lat, lon) = store.grid.center(c);
        body.push_str(&format!("{lat},{lon},{}\n", values[c]));
    }
    write_file(&a.out, body.as_bytes())
}

fn serve(data: &Path, a: &ServeArgs) -> CliResult {
    let mount = a.mount.clone().unwrap_or_else(|| data.join("runs"));
    let session = physrisk_api::ApiSession::mount(&mount).map_err(Failure::usage)?;
    let addr: std::net::SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Failure::usage(format!("bad address: {e}")))?;
    let rt = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    rt.block_on(physrisk_api::serve(Arc::new(session), addr)).map_err(Failure::runtime)
}

fn synth_data(data: &Path, a: &SynthArgs) -> CliResult {
    let out = a.out.clone().unwrap_or_else(|| data.to_path_buf());
    let files = synth::generate(&out, a.seed).map_err(Failure::runtime)?;
    eprintln!("wrote {} files under {}", files.len(), out.display());
    Ok(())
}
