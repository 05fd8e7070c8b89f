//! Summary statistics used by the Monte Carlo harness and the test suites.

use crate::maps::GridMap;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Linear-interpolated percentile, `q` in [0, 100].
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, q)
}

pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fraction of samples strictly greater than `threshold`.
pub fn exceedance(xs: &[f64], threshold: f64) -> f64 {
    xs.iter().filter(|&&x| x > threshold).count() as f64 / xs.len() as f64
}

/// Fraction of samples strictly below `threshold`.
pub fn fraction_below(xs: &[f64], threshold: f64) -> f64 {
    xs.iter().filter(|&&x| x < threshold).count() as f64 / xs.len() as f64
}

/// Empirical CDF as sorted `(value, F(value))` pairs.
pub fn ecdf(xs: &[f64]) -> Vec<(f64, f64)> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Map autocorrelation at lags `0..=max_lag` cells, averaged over the row and
/// column directions, normalized by the map's own mean and variance.
pub fn row_autocorrelation(map: &GridMap, max_lag: usize) -> Vec<f64> {
    let m = mean(&map.values);
    let var = map.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / map.values.len() as f64;
    let (w, h) = (map.width, map.height);
    (0..=max_lag)
        .map(|lag| {
            let mut acc = 0.0;
            let mut count = 0usize;
            for j in 0..h {
                for i in 0..w.saturating_sub(lag) {
                    acc += (map.get(i, j) - m) * (map.get(i + lag, j) - m);
                    count += 1;
                }
            }
            for j in 0..h.saturating_sub(lag) {
                for i in 0..w {
                    acc += (map.get(i, j) - m) * (map.get(i, j + lag) - m);
                    count += 1;
                }
            }
            acc / count as f64 / var
        })
        .collect()
}

/// Correlation distance of an autocorrelation sequence: the lag (meters) at
/// which it first decays to 1/e, linearly interpolated between lags. This is
/// the scale `d` of the exponential `exp(-lag/d)` passing through that point.
pub fn correlation_distance(acf: &[f64], granularity_m: f64) -> Option<f64> {
    let target = (-1.0f64).exp();
    acf.windows(2).enumerate().find_map(|(k, w)| {
        (w[1] <= target).then(|| (k as f64 + (w[0] - target) / (w[0] - w[1])) * granularity_m)
    })
}

/// Mean |difference| between horizontally adjacent cells.
pub fn mean_abs_step(map: &GridMap) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for j in 0..map.height {
        for w in map.row(j).windows(2) {
            acc += (w[1] - w[0]).abs();
            n += 1;
        }
    }
    acc / n as f64
}

/// Mean length of constant-value runs along the rows.
pub fn mean_run_length(map: &GridMap) -> f64 {
    let mut runs = 0usize;
    for j in 0..map.height {
        let row = map.row(j);
        runs += 1 + row.windows(2).filter(|w| w[0] != w[1]).count();
    }
    (map.width * map.height) as f64 / runs as f64
}
