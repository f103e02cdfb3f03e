//! Extensions applied on top of base damages: persistence, rescaling to a
//! global target, global-to-cell downscaling and regional-to-cell
//! distribution. Fractions are per cell; dollar amounts are fraction × GDP.

use crate::error::{Error, Result};

/// Convergence tolerance for capped rescaling.
const CAP_TOL: f64 = 1e-9;

/// D_t = min(1, d_t + ρ·D_{t−1}), starting from D = 0 before the first year.
pub fn apply_persistence(d: &[f64], rho: f64) -> Vec<f64> {
    let mut prev = 0.0;
    d.iter()
        .map(|&x| {
            prev = (x + rho * prev).min(1.0);
            prev
        })
        .collect()
}

/// Fractions `s·base_i`, capped at 1, with `s` chosen so that
/// Σ gdp_i·fraction_i equals `target_loss`. Capped cells' residual is
/// redistributed over the uncapped ones until no new cap binds.
/// Returns the fractions and the final multiplier for uncapped cells.
pub fn scale_to_total(base: &[f64], gdp: &[f64], target_loss: f64) -> Result<(Vec<f64>, f64)> {
    assert_eq!(base.len(), gdp.len());
    let n = base.len();
    if target_loss == 0.0 {
        return Ok((vec![0.0; n], 0.0));
    }
    let mut capped = vec![false; n];
    loop {
        let capped_loss: f64 = (0..n).filter(|&i| capped[i]).map(|i| gdp[i]).sum();
        let free: f64 = (0..n).filter(|&i| !capped[i]).map(|i| gdp[i] * base[i]).sum();
        let remaining = target_loss - capped_loss;
        if !(free > 0.0) {
            return Err(Error::Degenerate(format!(
                "cannot place loss {target_loss:.6e}: no uncapped cells with positive response"
            )));
        }
        let s = remaining / free;
        let mut changed = false;
        for i in 0..n {
            if !capped[i] && s * base[i] > 1.0 + CAP_TOL {
                capped[i] = true;
                changed = true;
            }
        }
        if !changed {
            let out = (0..n)
                .map(|i| if capped[i] { 1.0 } else { (s * base[i]).min(1.0) })
                .collect();
            return Ok((out, s));
        }
    }
}

/// Rescale cell fractions so the aggregate loss fraction equals
/// `global_target`. Returns the rescaled fractions and the multiplier λ.
pub fn update_rescale(fractions: &[f64], global_target: f64, gdp: &[f64]) -> Result<(Vec<f64>, f64)> {
    let total_gdp: f64 = gdp.iter().sum();
    let losses: f64 = fractions.iter().zip(gdp).map(|(f, g)| f * g).sum();
    if global_target == 0.0 {
        return Ok((vec![0.0; fractions.len()], 0.0));
    }
    if !(losses > 0.0) {
        return Err(Error::Degenerate(
            "regional losses are zero but the global target is positive".into(),
        ));
    }
    scale_to_total(fractions, gdp, global_target * total_gdp)
}

/// Split a global dollar loss across cells in proportion to `weights`.
pub fn downscale_global(global_loss: f64, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("downscaling weights must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if global_loss == 0.0 {
        return Ok(vec![0.0; weights.len()]);
    }
    if !(total > 0.0) {
        return Err(Error::Degenerate("downscaling weights are all zero".into()));
    }
    Ok(weights.iter().map(|w| global_loss * w / total).collect())
}

/// Cell fractions proportional to each cell's own temperature response,
/// scaled so their GDP-weighted mean equals `regional_fraction`. If no cell
/// responds, the regional fraction is applied uniformly.
pub fn regional_to_grid(regional_fraction: f64, response: &[f64], gdp: &[f64]) -> Result<Vec<f64>> {
    let total_gdp: f64 = gdp.iter().sum();
    if !(total_gdp > 0.0) {
        return Err(Error::Degenerate("region has zero GDP".into()));
    }
    if regional_fraction == 0.0 {
        return Ok(vec![0.0; response.len()]);
    }
    let weighted: f64 = response.iter().zip(gdp).map(|(r, g)| r * g).sum();
    if !(weighted > 0.0) {
        return Ok(vec![regional_fraction; response.len()]);
    }
    Ok(scale_to_total(response, gdp, regional_fraction * total_gdp)?.0)
}
