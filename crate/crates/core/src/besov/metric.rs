//! Metric (Korevaar–Schoen type) seminorms and scaling estimates of the
//! critical exponent.
//!
//! Pair sums over `{d(x, y) < r}` use the mesh-smoothed indicator of
//! [`smoothed_pair_sums`], which keeps lattice steps out of the scaling fits.

use serde::{Deserialize, Serialize};

use super::{check_field, check_p, is_constant};
use crate::error::{Error, Result};
use crate::fit::{log_log_fit, ScalingFit};
use crate::mmspace::{smoothed_pair_sums, MetricMeasureSpace};
use crate::scalar::{abs_pow, kahan_sum, par_row_sum, Real};

/// `M(r) = sum_{d(x,y) < r} mu_x mu_y |f(x) - f(y)|^p` for an ascending grid.
pub fn metric_pair_mass<T: Real>(space: &MetricMeasureSpace<T>, f: &[T], p: T, r_grid: &[T]) -> Result<Vec<T>> {
    check_field(f, space.len())?;
    check_p(p)?;
    if let Some(r) = r_grid.iter().find(|r| !(**r > T::zero())) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if !r_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("radii must be strictly ascending".into()));
    }
    if is_constant(f) {
        return Ok(vec![T::zero(); r_grid.len()]);
    }
    Ok(smoothed_pair_sums(space, r_grid, |x, y| abs_pow(f[x] - f[y], p)))
}

/// `N^a_p(f, r) = r^{-a - d_H/p} M(r)^{1/p}`.
pub fn metric_seminorm<T: Real>(space: &MetricMeasureSpace<T>, f: &[T], p: T, a: T, r: T) -> Result<T> {
    if !(r > T::zero()) || r > space.meta.diameter {
        return Err(Error::InvalidArgument(format!("radius {r} outside (0, diameter]")));
    }
    let m = metric_pair_mass(space, f, p, &[r])?[0];
    Ok(scale(m, r, p, a, space.d_h()))
}

fn scale<T: Real>(m: T, r: T, p: T, a: T, d_h: T) -> T {
    r.powf(-a - d_h / p) * m.max(T::zero()).powf(T::one() / p)
}

fn metric_profile<T: Real>(space: &MetricMeasureSpace<T>, f: &[T], p: T, a: T, r_grid: &[T]) -> Result<Vec<T>> {
    if r_grid.is_empty() {
        return Err(Error::DegenerateWindow("empty radius grid".into()));
    }
    let m = metric_pair_mass(space, f, p, r_grid)?;
    Ok(r_grid.iter().zip(&m).map(|(r, m)| scale(*m, *r, p, a, space.d_h())).collect())
}

/// `sup_r N^a_p(f, r)` over the grid.
pub fn metric_sup<T: Real>(space: &MetricMeasureSpace<T>, f: &[T], p: T, a: T, r_grid: &[T]) -> Result<T> {
    Ok(metric_profile(space, f, p, a, r_grid)?.into_iter().fold(T::zero(), T::max))
}

/// `(int N^a_p(f, r)^q dr / r)^{1/q}` by the trapezoid rule in `log r`.
pub fn metric_seminorm_q<T: Real>(space: &MetricMeasureSpace<T>, f: &[T], p: T, q: T, a: T, r_grid: &[T]) -> Result<T> {
    if q < p {
        return Err(Error::InvalidArgument(format!("need q >= p, got q = {q}, p = {p}")));
    }
    if r_grid.len() < 2 {
        return Err(Error::DegenerateWindow("the q-integral needs at least two radii".into()));
    }
    let vals: Vec<T> = metric_profile(space, f, p, a, r_grid)?.into_iter().map(|v| v.powf(q)).collect();
    let half = T::lit(0.5);
    let integral =
        kahan_sum((1..r_grid.len()).map(|i| (r_grid[i].ln() - r_grid[i - 1].ln()) * (vals[i] + vals[i - 1]) * half));
    Ok(integral.powf(T::one() / q))
}

/// `W_{1,1}(f) = sum_{x != y} mu_x mu_y |f(x) - f(y)| / d(x, y)^{d_H + d_W}`.
pub fn singular_seminorm<T: Real>(space: &MetricMeasureSpace<T>, f: &[T]) -> Result<T> {
    singular_seminorm_with(space, f, space.d_h() + space.d_w()?)
}

/// [`singular_seminorm`] with an explicit distance exponent.
pub fn singular_seminorm_with<T: Real>(space: &MetricMeasureSpace<T>, f: &[T], e: T) -> Result<T> {
    check_field(f, space.len())?;
    let mu = space.measure();
    let n = space.len();
    Ok(par_row_sum(n, |x, acc| {
        for y in 0..n {
            if y != x && f[x] != f[y] {
                acc.add(mu[x] * mu[y] * (f[x] - f[y]).abs() / space.dist(x, y).powf(e));
            }
        }
    }))
}

/// Scaling estimate of the critical exponent: fit `log M(r) ~ sigma log r`
/// and set `alpha* = (sigma - d_H) / (p d_W)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponent {
    pub fit: ScalingFit,
    pub sigma: f64,
    pub alpha_star: f64,
    pub r_squared: f64,
    /// `alpha*_p + alpha*_q` for the conjugate `q = p/(p-1)` on the same
    /// window, reported for comparison with the conjectured value 1.
    /// Absent for `p = 1`.
    pub conjugate_sum: Option<f64>,
}

fn alpha_star<T: Real>(space: &MetricMeasureSpace<T>, f: &[T], p: T, r_window: &[T]) -> Result<(ScalingFit, f64)> {
    let m = metric_pair_mass(space, f, p, r_window)?;
    if m.iter().all(|v| *v == T::zero()) {
        return Err(Error::DegenerateInput("pair mass vanishes; no finite scaling slope".into()));
    }
    let fit = log_log_fit(r_window, &m, 6)?;
    let a = (fit.slope - space.d_h().to_f()) / (p.to_f() * space.d_w()?.to_f());
    Ok((fit, a))
}

pub fn critical_exponent_estimate<T: Real>(
    space: &MetricMeasureSpace<T>,
    f: &[T],
    p: T,
    r_window: &[T],
) -> Result<CriticalExponent> {
    space.check_radius_grid(r_window, 6)?;
    let (fit, a) = alpha_star(space, f, p, r_window)?;
    let conjugate_sum = if p > T::one() {
        let q = p / (p - T::one());
        Some(a + alpha_star(space, f, q, r_window)?.1)
    } else {
        None
    };
    Ok(CriticalExponent { sigma: fit.slope, alpha_star: a, r_squared: fit.r_squared, fit, conjugate_sum })
}
