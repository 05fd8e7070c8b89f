//! Spatially correlated 2-D maps of shadow fading and LOS/NLOS condition.
//!
//! An i.i.d. Gaussian grid is convolved with a radially symmetric exponential
//! kernel and rescaled back to the requested marginal standard deviation. The
//! LOS map thresholds a unit-variance correlated field at the normal quantile
//! of the LOS probability, so neighbouring cells share the same condition.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    SfDb,
    LosIndicator,
}

/// Row-major grid; row `j` is the line `y = origin.1 + j * granularity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub origin_m: (f64, f64),
    pub granularity_m: f64,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub kind: MapKind,
}

impl GridMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.width..(j + 1) * self.width]
    }

    /// Grid indices of the cell nearest to `pos`, if inside the extent.
    pub fn nearest_cell(&self, pos: (f64, f64)) -> Option<(usize, usize)> {
        let fi = ((pos.0 - self.origin_m.0) / self.granularity_m).round();
        let fj = ((pos.1 - self.origin_m.1) / self.granularity_m).round();
        if !(fi >= 0.0 && fj >= 0.0) || fi >= self.width as f64 || fj >= self.height as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn contains(&self, pos: (f64, f64)) -> bool {
        self.nearest_cell(pos).is_some()
    }

    /// Writes the values as a CSV matrix plus a `<stem>.meta.json` sidecar.
    pub fn write_csv(&self, path: &Path, seed: u64) -> Result<()> {
        let mut text = String::with_capacity(self.values.len() * 8);
        for j in 0..self.height {
            let line: Vec<String> = self.row(j).iter().map(|v| format!("{v:.6}")).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| SimError::io(path, e))?;

        let meta = MapMetadata {
            kind: self.kind,
            origin_x_m: self.origin_m.0,
            origin_y_m: self.origin_m.1,
            granularity_m: self.granularity_m,
            width: self.width,
            height: self.height,
            seed,
        };
        let meta_path = path.with_extension("meta.json");
        let body = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        fs::write(&meta_path, body + "\n").map_err(|e| SimError::io(&meta_path, e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapMetadata {
    pub kind: MapKind,
    pub origin_x_m: f64,
    pub origin_y_m: f64,
    pub granularity_m: f64,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

/// Square exponential kernel `h(p, q) = exp(-r / scale)` with `r` in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFilter {
    /// Decay length of the taps, meters.
    pub d_co_m: f64,
    pub granularity_m: f64,
    /// Odd side length, in taps.
    pub length_taps: usize,
    pub taps: Vec<f64>,
}

impl ExponentialFilter {
    pub fn half_span(&self) -> usize {
        self.length_taps / 2
    }

    /// Tap at offset `(p, q)` grid cells from the center.
    pub fn tap(&self, p: isize, q: isize) -> f64 {
        let h = self.half_span() as isize;
        assert!(
            p.abs() <= h && q.abs() <= h,
            "tap ({p}, {q}) outside filter"
        );
        self.taps[((q + h) as usize) * self.length_taps + (p + h) as usize]
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Normalized autocorrelation of the kernel along one axis at `lag` cells.
    ///
    /// White noise filtered by this kernel has exactly this spatial
    /// correlation, so it predicts the correlation of the generated maps.
    pub fn output_correlation(&self, lag: usize) -> f64 {
        let n = self.length_taps;
        if lag >= n {
            return 0.0;
        }
        let mut acc = 0.0;
        for q in 0..n {
            let row = &self.taps[q * n..(q + 1) * n];
            acc += row[..n - lag]
                .iter()
                .zip(&row[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        acc / self.energy()
    }

    /// Distance in meters at which [`output_correlation`] falls to 1/e.
    ///
    /// [`output_correlation`]: ExponentialFilter::output_correlation
    pub fn output_correlation_distance(&self) -> f64 {
        let target = (-1.0f64).exp();
        let mut prev = 1.0;
        for lag in 1..self.length_taps {
            let rho = self.output_correlation(lag);
            if rho <= target {
                let frac = (prev - target) / (prev - rho);
                return (lag as f64 - 1.0 + frac) * self.granularity_m;
            }
            prev = rho;
        }
        self.length_taps as f64 * self.granularity_m
    }

    /// Kernel whose filtered-noise output decorrelates to 1/e at `d_co_m`.
    ///
    /// The autocorrelation of a field filtered with `exp(-r/b)` decays much
    /// slower than `exp(-r/b)` itself (to 1/e near `2.5 b`), so the tap decay
    /// length `b` is solved for by bisection.
    pub fn for_correlation_distance(d_co_m: f64, granularity_m: f64) -> Result<Self> {
        if !(d_co_m > 0.0) || !(granularity_m > 0.0) {
            return Err(SimError::InvalidArgument(format!(
                "correlation distance and granularity must be positive, got {d_co_m} m / {granularity_m} m"
            )));
        }
        let (mut lo, mut hi) = (1e-3 * d_co_m, d_co_m);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let f = make_filter(mid, granularity_m)?;
            if f.output_correlation_distance() < d_co_m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        make_filter(0.5 * (lo + hi), granularity_m)
    }
}

/// Exponential kernel spanning 8 decay lengths (rounded up to an odd tap count).
pub fn make_filter(d_co_m: f64, granularity_m: f64) -> Result<ExponentialFilter> {
    if !(d_co_m > 0.0) || !(granularity_m > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "filter decay length and granularity must be positive, got {d_co_m} m / {granularity_m} m"
        )));
    }
    let mut len = (8.0 * d_co_m / granularity_m - 1e-9).ceil().max(1.0) as usize;
    if len.is_multiple_of(2) {
        len += 1;
    }
    let half = (len / 2) as isize;
    let mut taps = Vec::with_capacity(len * len);
    for q in -half..=half {
        for p in -half..=half {
            let r = granularity_m * ((p * p + q * q) as f64).sqrt();
            taps.push((-r / d_co_m).exp());
        }
    }
    Ok(ExponentialFilter {
        d_co_m,
        granularity_m,
        length_taps: len,
        taps,
    })
}

/// Unit-variance correlated Gaussian field of `width x height` cells.
///
/// The noise grid is drawn with a margin of one filter half-span on every
/// side, so every output cell sees a full kernel window (no edge droop).
fn correlated_unit_field<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    filter: &ExponentialFilter,
    rng: &mut R,
) -> Vec<f64> {
    let half = filter.half_span();
    let pw = width + 2 * half;
    let ph = height + 2 * half;
    let noise: Vec<f64> = (0..pw * ph).map(|_| rng.sample(StandardNormal)).collect();
    let n = filter.length_taps;
    let norm = filter.energy().sqrt();

    let mut out = vec![0.0; width * height];
    out.par_chunks_mut(width).enumerate().for_each(|(j, row)| {
        for (i, cell) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for q in 0..n {
                let taps = &filter.taps[q * n..(q + 1) * n];
                // Kernel is point-symmetric, so correlation equals convolution.
                let src = &noise[(j + q) * pw + i..(j + q) * pw + i + n];
                acc += taps.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
            }
            *cell = acc / norm;
        }
    });
    out
}

/// Spatially correlated shadow-fading map with marginal `N(0, sigma_db^2)`.
pub fn correlated_map<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    sigma_db: f64,
    filter: &ExponentialFilter,
    origin_m: (f64, f64),
    rng: &mut R,
) -> Result<GridMap> {
    check_dims(width, height)?;
    if !(sigma_db >= 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "shadow fading sigma must be non-negative, got {sigma_db}"
        )));
    }
    let values = if sigma_db == 0.0 {
        vec![0.0; width * height]
    } else {
        correlated_unit_field(width, height, filter, rng)
            .into_iter()
            .map(|v| v * sigma_db)
            .collect()
    };
    Ok(GridMap {
        origin_m,
        granularity_m: filter.granularity_m,
        width,
        height,
        values,
        kind: MapKind::SfDb,
    })
}

/// Binary LOS map (1 = LOS) whose marginal LOS fraction is `p_los`.
pub fn los_condition_map<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    p_los: f64,
    filter: &ExponentialFilter,
    origin_m: (f64, f64),
    rng: &mut R,
) -> Result<GridMap> {
    check_dims(width, height)?;
    if !(0.0..=1.0).contains(&p_los) {
        return Err(SimError::InvalidArgument(format!(
            "LOS probability must lie in [0, 1], got {p_los}"
        )));
    }
    let threshold = normal_quantile(p_los);
    let field = correlated_unit_field(width, height, filter, rng);
    Ok(GridMap {
        origin_m,
        granularity_m: filter.granularity_m,
        width,
        height,
        values: field
            .into_iter()
            .map(|v| if v <= threshold { 1.0 } else { 0.0 })
            .collect(),
        kind: MapKind::LosIndicator,
    })
}

/// Standard normal quantile; +/- infinity at the endpoints.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        StatNormal::standard().inverse_cdf(p)
    }
}

/// Nearest-grid-point lookup.
pub fn sample_map(map: &GridMap, position_m: (f64, f64)) -> Result<f64> {
    map.nearest_cell(position_m)
        .map(|(i, j)| map.get(i, j))
        .ok_or(SimError::OutsideMap {
            x: position_m.0,
            y: position_m.1,
        })
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(SimError::InvalidArgument(format!(
            "map dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}
