//! Loss metrics: percentage of GDP, present value, relative present value,
//! rolling-window present value and relative systematic-risk change.

use std::fmt::Write as _;

use serde::Serialize;

use crate::axis::TimeAxis;
use crate::damage::VariantId;
use crate::error::{Error, Result};
use crate::scenario::ScenarioId;
use crate::stats;

pub const DEFAULT_DISCOUNT_RATE: f64 = 0.015;
pub const DEFAULT_REFERENCE_YEAR: i32 = 2024;

/// Annual losses and GDP (US$2005) for one aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSeries {
    pub axis: TimeAxis,
    pub losses: Vec<f64>,
    pub gdp: Vec<f64>,
}

impl LossSeries {
    pub fn new(axis: TimeAxis, losses: Vec<f64>, gdp: Vec<f64>) -> Result<Self> {
        if losses.len() != axis.len || gdp.len() != axis.len {
            return Err(Error::invalid("loss and GDP series must span the time axis"));
        }
        Ok(Self { axis, losses, gdp })
    }
}

pub fn loss_pct_gdp(series: &LossSeries, year: i32) -> Result<f64> {
    let i = series.axis.index_of(year).ok_or(Error::OutOfRange {
        what: "year",
        value: year as f64,
    })?;
    pct(series.losses[i], series.gdp[i])
}

pub fn pct(loss: f64, gdp: f64) -> Result<f64> {
    if !(gdp > 0.0) {
        return Err(Error::Degenerate("GDP is zero; loss percentage undefined".into()));
    }
    Ok(100.0 * loss / gdp)
}

/// Σ loss_t / (1 + rate)^(t − t0), with t0 the first element.
pub fn present_value(losses: &[f64], rate: f64) -> f64 {
    assert!(rate > -1.0, "discount rate must exceed −1");
    let v = 1.0 / (1.0 + rate);
    let mut factor = 1.0;
    let mut pv = 0.0;
    for &l in losses {
        pv += l * factor;
        factor *= v;
    }
    pv
}

/// Present value between two years, still discounted to the first series year.
pub fn present_value_between(series: &LossSeries, rate: f64, t0: i32, t1: i32) -> Result<f64> {
    let (a, b) = (
        series.axis.index_of(t0).ok_or(Error::OutOfRange { what: "year", value: t0 as f64 })?,
        series.axis.index_of(t1).ok_or(Error::OutOfRange { what: "year", value: t1 as f64 })?,
    );
    let v = 1.0 / (1.0 + rate);
    Ok((a..=b).map(|i| series.losses[i] * v.powi((i) as i32)).sum())
}

pub fn relative_pv(pv: f64, reference_gdp: f64) -> Result<f64> {
    if !(reference_gdp > 0.0) {
        return Err(Error::Degenerate("reference GDP is zero".into()));
    }
    Ok(pv / reference_gdp)
}

/// PV of each `window`-year block, discounted to its own start year.
pub fn rolling_pv(losses: &[f64], rate: f64, window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("rolling window must be at least one year"));
    }
    if window > losses.len() {
        return Err(Error::invalid(format!(
            "rolling window of {window} years exceeds the {}-year series",
            losses.len()
        )));
    }
    Ok((0..=losses.len() - window)
        .map(|s| present_value(&losses[s..s + window], rate))
        .collect())
}

/// rolling(s) / rolling(base).
pub fn relative_risk_change(rolling: &[f64], base_index: usize) -> Result<Vec<f64>> {
    let base = *rolling
        .get(base_index)
        .ok_or(Error::OutOfRange { what: "base index", value: base_index as f64 })?;
    if !(base > 0.0) {
        return Err(Error::Degenerate("base-year rolling present value is zero".into()));
    }
    Ok(rolling.iter().map(|r| r / base).collect())
}

/// Median and 90 % band of per-realization present values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PvReport {
    pub variant: VariantId,
    pub scenario: String,
    pub discount_rate: f64,
    pub reference_gdp: f64,
    pub pv: f64,
    pub p5: f64,
    pub p95: f64,
    pub relative: f64,
    pub relative_p5: f64,
    pub relative_p95: f64,
}

impl PvReport {
    pub fn from_samples(
        variant: VariantId,
        scenario: &str,
        samples: &[f64],
        discount_rate: f64,
        reference_gdp: f64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("no realizations to summarize"));
        }
        let q = stats::quantiles(samples, &[0.5, 0.05, 0.95]);
        Ok(Self {
            variant,
            scenario: scenario.to_string(),
            discount_rate,
            reference_gdp,
            pv: q[0],
            p5: q[1],
            p95: q[2],
            relative: relative_pv(q[0], reference_gdp)?,
            relative_p5: relative_pv(q[1], reference_gdp)?,
            relative_p95: relative_pv(q[2], reference_gdp)?,
        })
    }
}

pub fn avoided_losses(cp: &PvReport, b2: &PvReport) -> Result<f64> {
    check_comparable(cp, b2)?;
    Ok(cp.pv - b2.pv)
}

fn check_comparable(a: &PvReport, b: &PvReport) -> Result<()> {
    if a.variant != b.variant {
        return Err(Error::invalid(format!("variant mismatch: {} vs {}", a.variant, b.variant)));
    }
    if a.discount_rate != b.discount_rate {
        return Err(Error::invalid("discount rates differ"));
    }
    Ok(())
}

/// Column-wise difference of two reports (central value and both bounds).
pub fn avoided_report(cp: &PvReport, b2: &PvReport) -> Result<PvReport> {
    check_comparable(cp, b2)?;
    Ok(PvReport {
        variant: cp.variant,
        scenario: "AL".into(),
        discount_rate: cp.discount_rate,
        reference_gdp: cp.reference_gdp,
        pv: cp.pv - b2.pv,
        p5: cp.p5 - b2.p5,
        p95: cp.p95 - b2.p95,
        relative: cp.relative - b2.relative,
        relative_p5: cp.relative_p5 - b2.relative_p5,
        relative_p95: cp.relative_p95 - b2.relative_p95,
    })
}

/// Scenario × variant PV table with an avoided-loss row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PvTable {
    pub unit_scale: f64,
    pub variants: Vec<VariantId>,
    /// (row label, one report per variant).
    pub rows: Vec<(String, Vec<PvReport>)>,
}

impl PvTable {
    /// Rows in the given scenario order, then `AL` = first − second when
    /// both CP and B2 are present.
    pub fn build(variants: &[VariantId], rows: Vec<(ScenarioId, Vec<PvReport>)>, unit_scale: f64) -> Result<Self> {
        let mut out: Vec<(String, Vec<PvReport>)> =
            rows.iter().map(|(s, r)| (s.to_string(), r.clone())).collect();
        let find = |id: &ScenarioId| rows.iter().find(|(s, _)| s == id).map(|(_, r)| r);
        if let (Some(cp), Some(b2)) = (find(&ScenarioId::CP), find(&ScenarioId::B2)) {
            let al = cp.iter().zip(b2).map(|(a, b)| avoided_report(a, b)).collect::<Result<Vec<_>>>()?;
            out.push(("AL".into(), al));
        }
        Ok(Self {
            unit_scale,
            variants: variants.to_vec(),
            rows: out,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scenario,variant,pv,relative_pv,pv_p5,pv_p95,relative_p5,relative_p95,discount_rate\n");
        for (label, reports) in &self.rows {
            for r in reports {
                writeln!(
                    s,
                    "{label},{},{:.3},{:.4},{:.3},{:.3},{:.4},{:.4},{}",
                    r.variant,
                    r.pv / self.unit_scale,
                    r.relative,
                    r.p5 / self.unit_scale,
                    r.p95 / self.unit_scale,
                    r.relative_p5,
                    r.relative_p95,
                    r.discount_rate
                )
                .unwrap();
            }
        }
        s
    }

    /// Aligned text: `central [relative]` over `(p5, p95) [rel p5, rel p95]`.
    pub fn to_text(&self) -> String {
        let width = 24;
        let mut s = String::new();
        write!(s, "{:<6}", "").unwrap();
        for v in &self.variants {
            write!(s, "{:>width$}", v.as_str()).unwrap();
        }
        s.push('\n');
        for (label, reports) in &self.rows {
            write!(s, "{label:<6}").unwrap();
            for r in reports {
                write!(s, "{:>width$}", format!("{:.0} [{:.2}]", r.pv / self.unit_scale, r.relative)).unwrap();
            }
            s.push('\n');
            write!(s, "{:<6}", "").unwrap();
            for r in reports {
                write!(s, "{:>width$}", format!("({:.0}, {:.0})", r.p5 / self.unit_scale, r.p95 / self.unit_scale)).unwrap();
            }
            s.push('\n');
            write!(s, "{:<6}", "").unwrap();
            for r in reports {
                write!(s, "{:>width$}", format!("[{:.2}, {:.2}]", r.relative_p5, r.relative_p95)).unwrap();
            }
            s.push('\n');
        }
        if let Some(r) = self.rows.first().and_then(|(_, r)| r.first()) {
            writeln!(s, "discount rate: {}%", r.discount_rate * 100.0).unwrap();
        }
        s
    }
}
