//! Base damage functions: temperature (°C) to fraction of GDP lost.

use serde::{Deserialize, Serialize};

#[inline]
fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Global quadratic: a·T².
pub fn dice2016(t: f64, a: f64) -> f64 {
    clamp01(a * t * t)
}

/// Coefficients of a regional quadratic c1·T + c2·T².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub c1: f64,
    pub c2: f64,
}

impl Quadratic {
    /// Unclamped response, floored at zero.
    #[inline]
    pub fn response(&self, t: f64) -> f64 {
        (self.c1 * t + self.c2 * t * t).max(0.0)
    }

    #[inline]
    pub fn fraction(&self, t: f64) -> f64 {
        clamp01(self.c1 * t + self.c2 * t * t)
    }
}

/// Regional RICE-style quadratic θ1·T + θ2·T².
pub fn rice_regional(t: f64, theta: Quadratic) -> f64 {
    theta.fraction(t)
}

/// Regional panel quadratic b1·T + b2·T².
pub fn kw_panel(t: f64, b: Quadratic) -> f64 {
    b.fraction(t)
}

/// Cell-level quadratic κ·T².
pub fn kompas_cell(t: f64, kappa: f64) -> f64 {
    clamp01(kappa * t * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeitzmanParams {
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
}

impl Default for WeitzmanParams {
    fn default() -> Self {
        Self {
            c1: 20.46,
            c2: 6.081,
            p: 6.754,
        }
    }
}

/// 1 − 1/(1 + (T/c1)² + (T/c2)^p).
pub fn weitzman_global(t: f64, w: &WeitzmanParams) -> f64 {
    let t = t.max(0.0);
    1.0 - 1.0 / (1.0 + (t / w.c1).powi(2) + (t / w.c2).powf(w.p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert_eq!(dice2016(0.0, 0.00236), 0.0);
        assert!((dice2016(3.0, 0.00236) - 0.02124).abs() < 1e-15);
        assert!(dice2016(2.70, 0.00236) < 0.02);
        let r = Quadratic { c1: 0.0, c2: 0.0024 };
        assert!((rice_regional(2.0, r) - 0.0096).abs() < 1e-15);
        assert!((kompas_cell(2.0, 0.001) - 0.004).abs() < 1e-15);
        let w = WeitzmanParams::default();
        assert_eq!(weitzman_global(0.0, &w), 0.0);
        let expected = 1.0 - 1.0 / (2.0 + (6.081f64 / 20.46).powi(2));
        assert!((weitzman_global(6.081, &w) - expected).abs() < 1e-12);
        assert!((weitzman_global(6.081, &w) - 0.5211).abs() < 1e-4);
        assert!(weitzman_global(4.0, &w) > dice2016(4.0, 0.00236));
    }

    #[test]
    fn weitzman_convex_past_three_degrees() {
        // The curve is logistic in shape; its inflection sits near 5.8 °C.
        let w = WeitzmanParams::default();
        let h = 0.01;
        let mut t = 3.0;
        while t < 5.6 {
            let d2 = weitzman_global(t + h, &w) - 2.0 * weitzman_global(t, &w) + weitzman_global(t - h, &w);
            assert!(d2 > 0.0, "not convex at {t}");
            assert!(weitzman_global(t + h, &w) > weitzman_global(t, &w));
            t += 0.1;
        }
    }

    proptest! {
        #[test]
        fn base_functions_monotone(t in 0.0f64..6.0, dt in 0.0f64..0.5, c2 in 0.0f64..0.01, c1 in 0.0f64..0.01) {
            let q = Quadratic { c1, c2 };
            prop_assert!(rice_regional(t + dt, q) >= rice_regional(t, q));
            prop_assert!(kw_panel(t + dt, q) >= kw_panel(t, q));
            prop_assert!(kompas_cell(t + dt, c2) >= kompas_cell(t, c2));
            prop_assert!(dice2016(t + dt, c2) >= dice2016(t, c2));
            prop_assert!(weitzman_global(t + dt, &WeitzmanParams::default()) >= weitzman_global(t, &WeitzmanParams::default()));
        }

        #[test]
        fn quadratic_matches_independent_evaluation(t in 0.0f64..6.0, c1 in 0.0f64..0.01, c2 in 0.0f64..0.01) {
            let q = Quadratic { c1, c2 };
            let direct = c1 * t + c2 * t.powi(2);
            prop_assert!((kw_panel(t, q) - direct.min(1.0)).abs() < 1e-15);
        }
    }
}
