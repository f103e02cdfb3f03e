//! Concentrations from emissions: an impulse-response carbon cycle for CO2
//! (one permanent fraction plus decaying pools) and single-box decay for
//! CH4 and N2O.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::EmissionsPathway;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonParams {
    /// Preindustrial concentrations: ppm, ppb, ppb.
    pub co2_preindustrial: f64,
    pub ch4_preindustrial: f64,
    pub n2o_preindustrial: f64,
    /// Fraction of each CO2 pulse that never decays.
    pub permanent_fraction: f64,
    pub pool_fractions: Vec<f64>,
    pub pool_lifetimes: Vec<f64>,
    /// Excess atmospheric carbon in each pool at the first year (GtC),
    /// permanent pool first.
    pub initial_pools_gtc: Vec<f64>,
    pub gtc_per_ppm: f64,
    pub ch4_lifetime: f64,
    pub ch4_mt_per_ppb: f64,
    pub ch4_initial: f64,
    pub n2o_lifetime: f64,
    pub n2o_mt_per_ppb: f64,
    pub n2o_initial: f64,
}

impl Default for CarbonParams {
    fn default() -> Self {
        Self {
            co2_preindustrial: 278.0,
            ch4_preindustrial: 720.0,
            n2o_preindustrial: 270.0,
            permanent_fraction: 0.2173,
            pool_fractions: vec![0.2240, 0.2824, 0.2763],
            pool_lifetimes: vec![394.4, 36.54, 4.304],
            initial_pools_gtc: vec![0.0; 4],
            gtc_per_ppm: 2.124,
            ch4_lifetime: 9.1,
            ch4_mt_per_ppb: 2.78,
            ch4_initial: 720.0,
            n2o_lifetime: 121.0,
            n2o_mt_per_ppb: 4.79,
            n2o_initial: 270.0,
        }
    }
}

impl CarbonParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.pool_fractions.len();
        if self.pool_lifetimes.len() != n || self.initial_pools_gtc.len() != n + 1 {
            return Err(Error::invalid(
                "carbon pools: fractions and lifetimes must match, initial pools need one extra permanent entry",
            ));
        }
        let total = self.permanent_fraction + self.pool_fractions.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("carbon pool fractions sum to {total}, expected 1")));
        }
        let positive = [
            self.co2_preindustrial,
            self.ch4_preindustrial,
            self.n2o_preindustrial,
            self.gtc_per_ppm,
            self.ch4_lifetime,
            self.ch4_mt_per_ppb,
            self.n2o_lifetime,
            self.n2o_mt_per_ppb,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.pool_lifetimes.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("carbon-cycle constants and lifetimes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concentrations {
    pub co2_ppm: Vec<f64>,
    pub ch4_ppb: Vec<f64>,
    pub n2o_ppb: Vec<f64>,
}

/// Exact one-year update of a linear decay box fed by a constant flux.
fn decay_step(excess: f64, inflow: f64, lifetime: f64) -> f64 {
    let e = (-1.0 / lifetime).exp();
    excess * e + inflow * lifetime * (1.0 - e)
}

/// Year t holds the state at the start of year t; emissions of year t
/// arrive in year t + 1.
pub fn concentrations(emissions: &EmissionsPathway, p: &CarbonParams) -> Concentrations {
    let n = emissions.axis.len;
    let mut pools = p.initial_pools_gtc.clone();
    let mut ch4 = p.ch4_initial - p.ch4_preindustrial;
    let mut n2o = p.n2o_initial - p.n2o_preindustrial;
    let mut out = Concentrations {
        co2_ppm: Vec::with_capacity(n),
        ch4_ppb: Vec::with_capacity(n),
        n2o_ppb: Vec::with_capacity(n),
    };
    for t in 0..n {
        out.co2_ppm.push(p.co2_preindustrial + pools.iter().sum::<f64>() / p.gtc_per_ppm);
        out.ch4_ppb.push(p.ch4_preindustrial + ch4);
        out.n2o_ppb.push(p.n2o_preindustrial + n2o);

        let e = emissions.co2_gtc[t];
        pools[0] += p.permanent_fraction * e;
        for (i, (&a, &tau)) in p.pool_fractions.iter().zip(&p.pool_lifetimes).enumerate() {
            pools[i + 1] = decay_step(pools[i + 1], a * e, tau);
        }
        ch4 = decay_step(ch4, emissions.ch4_mt[t] / p.ch4_mt_per_ppb, p.ch4_lifetime);
        n2o = decay_step(n2o, emissions.n2o_mt[t] / p.n2o_mt_per_ppb, p.n2o_lifetime);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axis::TimeAxis;
    use crate::scenario::ScenarioId;

    #[test]
    fn zero_emissions_hold_baseline() {
        let e = EmissionsPathway::zeros(ScenarioId::CP, TimeAxis::standard());
        let c = concentrations(&e, &CarbonParams::default());
        assert!(c.co2_ppm.iter().all(|&v| v == 278.0));
        assert!(c.ch4_ppb.iter().all(|&v| v == 720.0));
        assert!(c.n2o_ppb.iter().all(|&v| v == 270.0));
    }

    #[test]
    fn pulse_decays_toward_permanent_fraction() {
        let p = CarbonParams::default();
        let mut e = EmissionsPathway::zeros(ScenarioId::CP, TimeAxis::new(2010, 3000));
        e.co2_gtc[0] = 100.0;
        let c = concentrations(&e, &p);
        let asymptote = 278.0 + p.permanent_fraction * 100.0 / p.gtc_per_ppm;
        for t in 2..c.co2_ppm.len() {
            assert!(c.co2_ppm[t] < c.co2_ppm[t - 1]);
            assert!(c.co2_ppm[t] > asymptote);
        }
        // Analytic impulse response one year after the pulse.
        let a: f64 = p.permanent_fraction
            + p.pool_fractions
                .iter()
                .zip(&p.pool_lifetimes)
                .map(|(a, tau)| a * tau * (1.0 - (-1.0 / tau).exp()))
                .sum::<f64>();
        assert!((c.co2_ppm[1] - (278.0 + 100.0 * a / p.gtc_per_ppm)).abs() < 1e-9);
        let irf_990: f64 = p.permanent_fraction
            + p.pool_fractions
                .iter()
                .zip(&p.pool_lifetimes)
                .map(|(a, tau)| a * tau * (1.0 - (-1.0 / tau).exp()) * (-989.0 / tau).exp())
                .sum::<f64>();
        assert!((c.co2_ppm[990] - (278.0 + 100.0 * irf_990 / p.gtc_per_ppm)).abs() < 1e-9);
    }

    #[test]
    fn constant_methane_reaches_steady_state() {
        let p = CarbonParams::default();
        let mut e = EmissionsPathway::zeros(ScenarioId::CP, TimeAxis::new(2010, 2300));
        e.ch4_mt.iter_mut().for_each(|v| *v = 300.0);
        let c = concentrations(&e, &p);
        let steady = p.ch4_preindustrial + 300.0 * p.ch4_lifetime / p.ch4_mt_per_ppb;
        assert!((c.ch4_ppb.last().unwrap() - steady).abs() < 1e-6);
    }
}
