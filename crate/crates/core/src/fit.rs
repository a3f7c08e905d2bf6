//! Log-log regression and log-spaced grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{kahan_sum, Real};

/// Result of a least-squares line fit in log-log coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Abscissa range of the points used, in the original (not log) units.
    pub window: (f64, f64),
    pub n_points: usize,
    /// Standard error of the slope.
    pub slope_stderr: f64,
}

impl ScalingFit {
    /// Symmetric confidence interval for the slope at roughly 95%.
    pub fn slope_ci(&self) -> (f64, f64) {
        let half = 2.0 * self.slope_stderr;
        (self.slope - half, self.slope + half)
    }
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::DegenerateWindow(format!("{n} points")));
    }
    let nf = n as f64;
    let mx = kahan_sum(xs.iter().copied()) / nf;
    let my = kahan_sum(ys.iter().copied()) / nf;
    let sxx = kahan_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = kahan_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let syy = kahan_sum(ys.iter().map(|y| (y - my) * (y - my)));
    if sxx <= 0.0 {
        return Err(Error::DegenerateWindow("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = kahan_sum(xs.iter().zip(ys).map(|(x, y)| {
        let e = y - (slope * x + intercept);
        e * e
    }));
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    Ok((slope, intercept, r2, stderr))
}

/// Regress `log y` against `log x`, dropping non-positive or non-finite
/// samples. At least `min_points` usable samples are required.
pub fn log_log_fit<T: Real>(xs: &[T], ys: &[T], min_points: usize) -> Result<ScalingFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.to_f() > 0.0 && y.to_f() > 0.0 && y.is_finite())
        .map(|(x, y)| (x.to_f().ln(), y.to_f().ln()))
        .unzip();
    if lx.len() < min_points.max(2) {
        return Err(Error::DegenerateWindow(format!("{} usable points, need {}", lx.len(), min_points)));
    }
    let (slope, intercept, r_squared, slope_stderr) = linear_fit(&lx, &ly)?;
    let lo = lx.iter().cloned().fold(f64::INFINITY, f64::min).exp();
    let hi = lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    Ok(ScalingFit { slope, intercept, r_squared, window: (lo, hi), n_points: lx.len(), slope_stderr })
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / T::from_usize_(count - 1);
    (0..count)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == count => hi,
            _ => (a + step * T::from_usize_(i)).exp(),
        })
        .collect()
}

/// Log-spaced grid with the given density per decade, endpoints included.
pub fn log_grid<T: Real>(lo: T, hi: T, per_decade: usize) -> Vec<T> {
    if !(lo > T::zero()) || !(hi > lo) {
        return if lo > T::zero() && lo == hi { vec![lo] } else { Vec::new() };
    }
    let decades = (hi / lo).log10().to_f();
    let count = ((decades * per_decade as f64).ceil() as usize).max(1) + 1;
    log_space(lo, hi, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs: Vec<f64> = log_space(0.01, 1.0, 9);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.7)).collect();
        let fit = log_log_fit(&xs, &ys, 6).unwrap();
        assert!((fit.slope - 1.7).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert_eq!(fit.n_points, 9);
        assert!(fit.window.0 < fit.window.1);
    }

    #[test]
    fn too_few_points() {
        let xs = [1.0, 2.0, 3.0];
        assert!(log_log_fit(&xs, &xs, 4).is_err());
        let zeros = [0.0; 8];
        let xs: Vec<f64> = (1..=8).map(f64::from).collect();
        assert!(log_log_fit(&xs, &zeros, 4).is_err());
    }

    #[test]
    fn grid_density() {
        let g = log_grid(1e-4_f64, 1e-1, 16);
        assert_eq!(g.len(), 49);
        assert_eq!(g[0], 1e-4);
        assert_eq!(*g.last().unwrap(), 1e-1);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
