//! Empirical quantiles and moments.

/// Quantile of already-sorted data by linear interpolation between order
/// statistics: position h = (n − 1)·q.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sort_finite(values: &mut [f64]) {
    values.sort_by(|a, b| a.total_cmp(b));
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    sort_finite(&mut v);
    quantile_sorted(&v, q)
}

pub fn quantiles(values: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    sort_finite(&mut v);
    qs.iter().map(|&q| quantile_sorted(&v, q)).collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Lower median of optional years; `None` sorts after every year, so the
/// result is `None` when at least half the members never cross.
pub fn median_date(dates: &[Option<i32>]) -> Option<i32> {
    assert!(!dates.is_empty(), "median of empty ensemble");
    let mut d = dates.to_vec();
    d.sort_by_key(|x| x.unwrap_or(i32::MAX));
    d[(d.len() - 1) / 2]
}
