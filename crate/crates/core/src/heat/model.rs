//! Closed-form model kernels built from two-sided heat kernel bounds.
//!
//! A bound `L <= p_t <= U` does not define a kernel, so the model takes the
//! geometric midpoint `sqrt(L U)` and then rescales it symmetrically,
//! `p = s_x k s_y`, until it is Markov.

use serde::{Deserialize, Serialize};

use super::{check_time, KernelMatrix, KernelSource};
use crate::error::{Error, Result};
use crate::mmspace::MetricMeasureSpace;
use crate::scalar::{kahan_sum, Real};

pub const MAX_SINKHORN_SWEEPS: usize = 50;
pub const SINKHORN_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    /// Sub-Gaussian form with `d_W = 2`.
    Gaussian,
    /// `t^{-d_H/d_W} exp(-c (d^{d_W}/t)^{1/(d_W-1)})`.
    Subgaussian,
    /// `t^{-d_H/d_W} (1 + c d / t^{1/d_W})^{-d_H-d_W}`.
    Nonlocal,
}

/// Lower bound uses `(c3, c4)`, upper bound `(c5, c6)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelKernelParams {
    pub family: ModelFamily,
    pub d_h: f64,
    pub d_w: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

impl ModelKernelParams {
    pub fn new(family: ModelFamily, d_h: f64, d_w: f64) -> Self {
        let d_w = if family == ModelFamily::Gaussian { 2.0 } else { d_w };
        ModelKernelParams { family, d_h, d_w, c3: 1.0, c4: 1.0, c5: 1.0, c6: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_w > 0.0) || !(self.d_h > 0.0) {
            return Err(Error::Constraint(format!("need d_H, d_W > 0, got {}, {}", self.d_h, self.d_w)));
        }
        match self.family {
            ModelFamily::Gaussian if self.d_w != 2.0 => {
                return Err(Error::Constraint("gaussian family has d_W = 2".into()))
            }
            ModelFamily::Subgaussian if !(self.d_w > 1.0) => {
                return Err(Error::Constraint(format!("sub-Gaussian form needs d_W > 1, got {}", self.d_w)))
            }
            ModelFamily::Nonlocal if self.d_w > self.d_h + 1.0 => {
                return Err(Error::Constraint(format!(
                    "non-local form needs d_W <= d_H + 1, got d_W = {}, d_H = {}",
                    self.d_w, self.d_h
                )))
            }
            _ => {}
        }
        if [self.c3, self.c4, self.c5, self.c6].iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Constraint("kernel constants must be positive".into()));
        }
        Ok(())
    }

    /// Geometric midpoint of the two bounds at distance `d`, time `t`.
    pub fn midpoint<T: Real>(&self, d: T, t: T) -> T {
        let (dh, dw) = (T::lit(self.d_h), T::lit(self.d_w));
        let pre = T::lit((self.c3 * self.c5).sqrt()) * t.powf(-dh / dw);
        let c = T::lit(0.5 * (self.c4 + self.c6));
        match self.family {
            ModelFamily::Gaussian | ModelFamily::Subgaussian => {
                if d == T::zero() {
                    return pre;
                }
                let z = (d.powf(dw) / t).powf(T::one() / (dw - T::one()));
                pre * (-c * z).exp()
            }
            ModelFamily::Nonlocal => {
                let s = t.powf(T::one() / dw);
                let lo = T::one() + T::lit(self.c4) * d / s;
                let hi = T::one() + T::lit(self.c6) * d / s;
                pre * (lo * hi).powf(-(dh + dw) / T::lit(2.0))
            }
        }
    }
}

/// The midpoint kernel before normalization.
pub fn model_kernel_raw<T: Real>(
    space: &MetricMeasureSpace<T>,
    t: T,
    params: &ModelKernelParams,
) -> Result<KernelMatrix<T>> {
    check_time(t)?;
    params.validate()?;
    let n = space.len();
    let mut values = vec![T::zero(); n * n];
    for x in 0..n {
        values[x * n + x] = params.midpoint(T::zero(), t);
        for y in x + 1..n {
            let v = params.midpoint(space.dist(x, y), t);
            values[x * n + y] = v;
            values[y * n + x] = v;
        }
    }
    Ok(KernelMatrix { t, n, values })
}

/// Midpoint kernel made Markov by the symmetric scaling iteration
/// `s <- sqrt(s / (K mu s))`.
pub fn model_kernel<T: Real>(
    space: &MetricMeasureSpace<T>,
    t: T,
    params: &ModelKernelParams,
) -> Result<KernelMatrix<T>> {
    let mut k = model_kernel_raw(space, t, params)?;
    let n = space.len();
    let mu = space.measure();
    let mut s = vec![T::one(); n];
    let row = |k: &KernelMatrix<T>, s: &[T], x: usize| kahan_sum((0..n).map(|y| k.get(x, y) * mu[y] * s[y]));
    let tol = T::lit(SINKHORN_TOL);
    let mut residual = T::infinity();
    for _ in 0..MAX_SINKHORN_SWEEPS {
        let r: Vec<T> = (0..n).map(|x| row(&k, &s, x)).collect();
        residual = (0..n).map(|x| (s[x] * r[x] - T::one()).abs()).fold(T::zero(), T::max);
        if residual <= tol {
            break;
        }
        for x in 0..n {
            s[x] = (s[x] / r[x]).sqrt();
        }
    }
    if residual > tol {
        return Err(Error::NormalizationFailed { sweeps: MAX_SINKHORN_SWEEPS, residual: residual.to_f() });
    }
    for x in 0..n {
        for y in 0..n {
            k.values[x * n + y] = s[x] * k.values[x * n + y] * s[y];
        }
    }
    Ok(k)
}

/// A model kernel family on a fixed space, usable wherever a heat kernel is.
pub struct ModelKernelSource<'a, T> {
    pub space: &'a MetricMeasureSpace<T>,
    pub params: ModelKernelParams,
}

impl<'a, T: Real> ModelKernelSource<'a, T> {
    pub fn new(space: &'a MetricMeasureSpace<T>, params: ModelKernelParams) -> Result<Self> {
        params.validate()?;
        Ok(ModelKernelSource { space, params })
    }
}

impl<T: Real> KernelSource<T> for ModelKernelSource<'_, T> {
    fn len(&self) -> usize {
        self.space.len()
    }

    fn measure(&self) -> &[T] {
        self.space.measure()
    }

    fn kernel(&self, t: T) -> Result<KernelMatrix<T>> {
        model_kernel(self.space, t, &self.params)
    }
}
