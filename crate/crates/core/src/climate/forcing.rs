//! Radiative forcing from well-mixed greenhouse gases.

use serde::{Deserialize, Serialize};

use crate::climate::carbon::Concentrations;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingParams {
    pub co2_coefficient: f64,
    pub co2_reference: f64,
    pub ch4_reference: f64,
    pub n2o_reference: f64,
    /// Multiplier on the exogenous forcing column.
    pub other_scale: f64,
}

impl Default for ForcingParams {
    fn default() -> Self {
        Self {
            co2_coefficient: 5.35,
            co2_reference: 278.0,
            ch4_reference: 720.0,
            n2o_reference: 270.0,
            other_scale: 1.0,
        }
    }
}

/// CH4–N2O band overlap term (ppb inputs).
fn overlap(m: f64, n: f64) -> f64 {
    0.47 * (1.0 + 2.01e-5 * (m * n).powf(0.75) + 5.31e-15 * m * (m * n).powf(1.52)).ln()
}

pub fn co2_forcing(c: f64, p: &ForcingParams) -> f64 {
    p.co2_coefficient * (c / p.co2_reference).ln()
}

pub fn ch4_forcing(m: f64, p: &ForcingParams) -> f64 {
    let (m0, n0) = (p.ch4_reference, p.n2o_reference);
    0.036 * (m.sqrt() - m0.sqrt()) - (overlap(m, n0) - overlap(m0, n0))
}

pub fn n2o_forcing(n: f64, p: &ForcingParams) -> f64 {
    let (m0, n0) = (p.ch4_reference, p.n2o_reference);
    0.12 * (n.sqrt() - n0.sqrt()) - (overlap(m0, n) - overlap(m0, n0))
}

/// Total forcing per year (W/m²).
pub fn forcing(conc: &Concentrations, other: &[f64], p: &ForcingParams) -> Result<Vec<f64>> {
    let n = conc.co2_ppm.len();
    if other.len() != n {
        return Err(Error::invalid("other-forcing series length differs from concentrations"));
    }
    (0..n)
        .map(|t| {
            let (c, m, no) = (conc.co2_ppm[t], conc.ch4_ppb[t], conc.n2o_ppb[t]);
            if !(c > 0.0 && m > 0.0 && no > 0.0) {
                return Err(Error::OutOfRange {
                    what: "concentration",
                    value: c.min(m).min(no),
                });
            }
            Ok(co2_forcing(c, p) + ch4_forcing(m, p) + n2o_forcing(no, p) + p.other_scale * other[t])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one(c: f64, m: f64, n: f64) -> f64 {
        let conc = Concentrations {
            co2_ppm: vec![c],
            ch4_ppb: vec![m],
            n2o_ppb: vec![n],
        };
        forcing(&conc, &[0.0], &ForcingParams::default()).unwrap()[0]
    }

    #[test]
    fn baseline_is_zero() {
        assert_eq!(one(278.0, 720.0, 270.0), 0.0);
    }

    #[test]
    fn doubled_co2() {
        assert!((one(556.0, 720.0, 270.0) - 5.35 * 2f64.ln()).abs() < 1e-12);
        assert!((one(556.0, 720.0, 270.0) - 3.71).abs() < 0.01);
    }

    #[test]
    fn nonpositive_concentration_errors() {
        let conc = Concentrations {
            co2_ppm: vec![0.0],
            ch4_ppb: vec![720.0],
            n2o_ppb: vec![270.0],
        };
        assert!(forcing(&conc, &[0.0], &ForcingParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_each_gas(c in 200.0f64..1500.0, m in 300.0f64..5000.0, n in 200.0f64..600.0, d in 0.1f64..50.0) {
            let f = one(c, m, n);
            prop_assert!(one(c + d, m, n) > f);
            prop_assert!(one(c, m + d, n) > f);
            prop_assert!(one(c, m, n + d) > f);
        }
    }
}
