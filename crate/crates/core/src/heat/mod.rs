//! Heat semigroups on finite spaces.
//!
//! The generator `L` is self-adjoint on `l^2(mu)`, so it is diagonalized
//! through the symmetric matrix `M^{1/2} L M^{-1/2}`. Everything downstream
//! (kernels, semigroup action, energies, pair sums) is evaluated mode by
//! mode from that decomposition.

mod cache;
mod model;
mod walk;

pub use cache::{model_from_json, model_to_json};
pub use model::{model_kernel, model_kernel_raw, ModelFamily, ModelKernelParams, ModelKernelSource};
pub use walk::{fit_walk_dimension, heat_trace, verify_subgaussian, walk_fit_window, WalkDimensionFit};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::log_grid;
use crate::mmspace::{io::space_hash, MetricMeasureSpace, SpaceKind};
use crate::scalar::{kahan_sum, KahanSum, Real};

/// Largest point count accepted by the dense eigensolver.
pub const MAX_SPECTRAL_POINTS: usize = 4500;

/// Modes with `lambda t` above this are dropped from kernel sums
/// (`e^-50 ~ 2e-22`).
pub const MODE_CUTOFF: f64 = 50.0;

/// Per-level resistance scaling of the carpet, used for its time renormalization.
pub const CARPET_RESISTANCE_SCALE: f64 = 1.251;

/// Renormalization settings for [`assemble_generator_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenormConfig {
    pub carpet_resistance: f64,
}

impl Default for RenormConfig {
    fn default() -> Self {
        RenormConfig { carpet_resistance: CARPET_RESISTANCE_SCALE }
    }
}

/// Time renormalization applied on top of `(D - A) / mu`.
///
/// The `1/mu` factor already supplies the mass scaling (`3^n` on the gasket,
/// `8^n` on the carpet), so only the resistance scaling remains: `5/3` per
/// gasket level and `rho` per carpet level. Grid edges already carry
/// conductance `1/h`, and plain graphs are left as they are.
pub fn renorm_factor<T: Real>(space: &MetricMeasureSpace<T>, cfg: &RenormConfig) -> T {
    let level = space.meta.level.unwrap_or(0) as i32;
    match space.meta.kind {
        SpaceKind::Gasket => T::lit(5.0 / 3.0).powi(level),
        SpaceKind::Carpet => T::lit(cfg.carpet_resistance).powi(level),
        SpaceKind::Circle | SpaceKind::Interval | SpaceKind::Graph => T::one(),
    }
}

/// Dense generator `L`, row-major, with `L_xy = -renorm w_xy / mu_x`.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    pub n: usize,
    pub renorm: T,
    pub values: Vec<T>,
    pub measure: Vec<T>,
    pub space_hash: String,
}

impl<T: Real> Generator<T> {
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[x * self.n + y]
    }

    /// `M^{1/2} L M^{-1/2}`.
    fn symmetrized(&self) -> Vec<T> {
        let n = self.n;
        let sq: Vec<T> = self.measure.iter().map(|m| m.sqrt()).collect();
        let mut s = vec![T::zero(); n * n];
        for x in 0..n {
            for y in 0..n {
                let v = self.values[x * n + y];
                if v != T::zero() {
                    s[x * n + y] = if x == y { v } else { v * sq[x] / sq[y] };
                }
            }
        }
        // exact symmetry for the eigensolver
        for x in 0..n {
            for y in x + 1..n {
                let m = (s[x * n + y] + s[y * n + x]) / T::lit(2.0);
                s[x * n + y] = m;
                s[y * n + x] = m;
            }
        }
        s
    }
}

pub fn assemble_generator<T: Real>(space: &MetricMeasureSpace<T>) -> Result<Generator<T>> {
    assemble_generator_with(space, &RenormConfig::default())
}

pub fn assemble_generator_with<T: Real>(space: &MetricMeasureSpace<T>, cfg: &RenormConfig) -> Result<Generator<T>> {
    let comps = space.components();
    if comps.len() > 1 {
        return Err(Error::Disconnected {
            count: comps.len(),
            representatives: comps.iter().map(|c| c[0]).collect(),
            sizes: comps.iter().map(Vec::len).collect(),
        });
    }
    let n = space.len();
    let renorm = renorm_factor(space, cfg);
    let mu = space.measure();
    let mut values = vec![T::zero(); n * n];
    for e in space.edges() {
        values[e.a * n + e.b] = values[e.a * n + e.b] - renorm * e.w / mu[e.a];
        values[e.b * n + e.a] = values[e.b * n + e.a] - renorm * e.w / mu[e.b];
    }
    for x in 0..n {
        let off = kahan_sum((0..n).filter(|&y| y != x).map(|y| values[x * n + y]));
        values[x * n + x] = -off;
    }
    Ok(Generator { n, renorm, values, measure: mu.to_vec(), space_hash: space_hash(space)? })
}

/// Eigen-decomposed generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralHeatModel<T> {
    pub space_hash: String,
    pub renorm: T,
    n: usize,
    eigenvalues: Vec<T>,
    /// `phi[x * n + k] = phi_k(x)`.
    phi: Vec<T>,
    measure: Vec<T>,
}

pub fn spectral_decompose<T: Real>(gen: &Generator<T>) -> Result<SpectralHeatModel<T>> {
    let n = gen.n;
    if n > MAX_SPECTRAL_POINTS {
        return Err(Error::ResourceBound { what: "spectral point count", value: n, limit: MAX_SPECTRAL_POINTS });
    }
    let (vals, vecs) = T::symmetric_eigen(n, gen.symmetrized()).ok_or(Error::EigenNoConvergence(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).expect("finite eigenvalues"));

    let inv_sq: Vec<T> = gen.measure.iter().map(|m| T::one() / m.sqrt()).collect();
    let mut eigenvalues = Vec::with_capacity(n);
    let mut phi = vec![T::zero(); n * n];
    for (k, &j) in order.iter().enumerate() {
        eigenvalues.push(vals[j].max(T::zero()));
        for x in 0..n {
            phi[x * n + k] = vecs[x * n + j] * inv_sq[x];
        }
    }
    // Pin the ground state to the constant 1 and remove its component from
    // the other modes.
    eigenvalues[0] = T::zero();
    for x in 0..n {
        phi[x * n] = T::one();
    }
    let mu = &gen.measure;
    for k in 1..n {
        let c = kahan_sum((0..n).map(|x| mu[x] * phi[x * n + k]));
        let mut norm = KahanSum::new();
        for x in 0..n {
            let v = phi[x * n + k] - c;
            phi[x * n + k] = v;
            norm.add(mu[x] * v * v);
        }
        let s = norm.value().sqrt();
        for x in 0..n {
            phi[x * n + k] = phi[x * n + k] / s;
        }
    }
    Ok(SpectralHeatModel {
        space_hash: gen.space_hash.clone(),
        renorm: gen.renorm,
        n,
        eigenvalues,
        phi,
        measure: gen.measure.clone(),
    })
}

/// Sorted eigenvalues without eigenvectors (ground state pinned to 0).
pub fn spectrum_only<T: Real>(gen: &Generator<T>) -> Result<Vec<T>> {
    if gen.n > MAX_SPECTRAL_POINTS {
        return Err(Error::ResourceBound { what: "spectral point count", value: gen.n, limit: MAX_SPECTRAL_POINTS });
    }
    let mut vals = T::symmetric_eigenvalues(gen.n, gen.symmetrized());
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNoConvergence(gen.n));
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    vals[0] = T::zero();
    for v in vals.iter_mut() {
        *v = v.max(T::zero());
    }
    Ok(vals)
}

/// Heat kernel density `p_t(x, y)` against `mu x mu`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix<T> {
    pub t: T,
    pub n: usize,
    pub values: Vec<T>,
}

impl<T: Real> KernelMatrix<T> {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.values[x * self.n..(x + 1) * self.n]
    }

    /// `sum_y p_t(x, y) mu_y` for every `x`.
    pub fn row_sums(&self, measure: &[T]) -> Vec<T> {
        (0..self.n).map(|x| kahan_sum(self.row(x).iter().zip(measure).map(|(p, m)| *p * *m))).collect()
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for x in 0..self.n {
            for y in x + 1..self.n {
                worst = worst.max((self.get(x, y) - self.get(y, x)).abs());
            }
        }
        worst
    }

    pub fn min_entry(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// `(P_t f)(x) = sum_y p_t(x, y) f(y) mu_y`.
    pub fn apply(&self, f: &[T], measure: &[T]) -> Vec<T> {
        (0..self.n).map(|x| kahan_sum(self.row(x).iter().zip(f).zip(measure).map(|((p, v), m)| *p * *v * *m))).collect()
    }
}

impl<T: Real> SpectralHeatModel<T> {
    /// Assemble and decompose in one step.
    pub fn from_space(space: &MetricMeasureSpace<T>) -> Result<Self> {
        spectral_decompose(&assemble_generator(space)?)
    }

    pub(crate) fn from_parts(
        space_hash: String,
        renorm: T,
        eigenvalues: Vec<T>,
        phi: Vec<T>,
        measure: Vec<T>,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if phi.len() != n * n || measure.len() != n {
            return Err(Error::InvalidArgument("inconsistent model dimensions".into()));
        }
        Ok(SpectralHeatModel { space_hash, renorm, n, eigenvalues, phi, measure })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn measure(&self) -> &[T] {
        &self.measure
    }

    /// `phi_k(x)`.
    #[inline]
    pub fn phi(&self, x: usize, k: usize) -> T {
        self.phi[x * self.n + k]
    }

    pub fn mode(&self, k: usize) -> Vec<T> {
        (0..self.n).map(|x| self.phi(x, k)).collect()
    }

    /// Spectral gap.
    pub fn lambda_1(&self) -> T {
        self.eigenvalues.get(1).copied().unwrap_or(T::zero())
    }

    pub fn lambda_max(&self) -> T {
        self.eigenvalues[self.n - 1]
    }

    /// Bulk time window `[0.1 / lambda_max, 0.1 / lambda_1]`.
    pub fn bulk_time_window(&self) -> (T, T) {
        (T::lit(0.1) / self.lambda_max(), T::lit(0.1) / self.lambda_1())
    }

    /// 16 log-spaced times per decade over the bulk window.
    pub fn default_time_grid(&self) -> Vec<T> {
        let (lo, hi) = self.bulk_time_window();
        log_grid(lo, hi, 16)
    }

    /// Number of leading modes with `lambda t <= MODE_CUTOFF`.
    pub fn active_modes(&self, t: T) -> usize {
        let cut = T::lit(MODE_CUTOFF);
        self.eigenvalues.partition_point(|l| *l * t <= cut).max(1)
    }

    /// `c_k = <f, phi_k>_mu`.
    pub fn coefficients(&self, f: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|k| kahan_sum((0..n).map(|x| self.measure[x] * f[x] * self.phi[x * n + k])))
            .collect()
    }

    /// Gram matrix of the modes under `mu`, worst deviation from the identity.
    pub fn orthonormality_error(&self) -> T {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|a| {
                let mut worst = T::zero();
                for b in a..n {
                    let g = kahan_sum((0..n).map(|x| self.measure[x] * self.phi(x, a) * self.phi(x, b)));
                    let target = if a == b { T::one() } else { T::zero() };
                    worst = worst.max((g - target).abs());
                }
                worst
            })
            .reduce(T::zero, T::max)
    }

    pub fn check_space(&self, space: &MetricMeasureSpace<T>) -> Result<()> {
        let actual = space_hash(space)?;
        if actual != self.space_hash {
            return Err(Error::HashMismatch { expected: self.space_hash.clone(), actual });
        }
        Ok(())
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::NonPositiveTime(t.to_f()));
    }
    Ok(())
}

/// `p_t(x, y) = sum_k e^{-lambda_k t} phi_k(x) phi_k(y)`.
pub fn heat_kernel<T: Real>(model: &SpectralHeatModel<T>, t: T) -> Result<KernelMatrix<T>> {
    check_time(t)?;
    let n = model.n;
    let k = model.active_modes(t);
    let half = T::lit(0.5);
    let damp: Vec<T> = model.eigenvalues[..k].iter().map(|l| (-*l * t * half).exp()).collect();
    let mut a = vec![T::zero(); n * k];
    for x in 0..n {
        for j in 0..k {
            a[x * k + j] = model.phi[x * n + j] * damp[j];
        }
    }
    let mut values = T::mul_abt(n, n, k, &a, &a);
    for x in 0..n {
        for y in x + 1..n {
            let m = (values[x * n + y] + values[y * n + x]) * half;
            values[x * n + y] = m;
            values[y * n + x] = m;
        }
    }
    Ok(KernelMatrix { t, n, values })
}

/// `P_t f` evaluated spectrally. Uses `P_t 1 = 1` to shift out `f(0)`, so
/// constants are reproduced exactly.
pub fn apply_semigroup<T: Real>(model: &SpectralHeatModel<T>, f: &[T], t: T) -> Result<Vec<T>> {
    check_time(t)?;
    let n = model.n;
    if f.len() != n {
        return Err(Error::InvalidArgument(format!("field has {} values for {n} points", f.len())));
    }
    let shift = f[0];
    let g: Vec<T> = f.iter().map(|v| *v - shift).collect();
    if g.iter().all(|v| *v == T::zero()) {
        return Ok(f.to_vec());
    }
    let c = model.coefficients(&g);
    let k = model.active_modes(t);
    let w: Vec<T> = (0..k).map(|j| (-model.eigenvalues[j] * t).exp() * c[j]).collect();
    Ok((0..n)
        .into_par_iter()
        .map(|x| {
            let row = &model.phi[x * n..x * n + k];
            shift + kahan_sum(row.iter().zip(&w).map(|(p, c)| *p * *c))
        })
        .collect())
}

/// Anything that can produce a Markov kernel `p_t` on a fixed measured
/// point set: the exact spectral model or a closed-form model kernel.
pub trait KernelSource<T: Real>: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn measure(&self) -> &[T];

    fn kernel(&self, t: T) -> Result<KernelMatrix<T>>;

    /// `sum_{x != y} mu_x mu_y w_xy p_t(x, y)` for each `t`, where `w` is a
    /// row-major `n x n` weight table.
    fn pair_sums(&self, w: &[T], t_grid: &[T]) -> Result<Vec<T>> {
        let mu = self.measure();
        let n = self.len();
        t_grid
            .iter()
            .map(|&t| {
                let k = self.kernel(t)?;
                Ok(crate::scalar::par_row_sum(n, |x, acc| {
                    for y in 0..n {
                        if y != x {
                            acc.add(mu[x] * mu[y] * w[x * n + y] * k.get(x, y));
                        }
                    }
                }))
            })
            .collect()
    }

    /// `P_t f`.
    fn apply(&self, f: &[T], t: T) -> Result<Vec<T>> {
        Ok(self.kernel(t)?.apply(f, self.measure()))
    }
}

impl<T: Real> KernelSource<T> for SpectralHeatModel<T> {
    fn len(&self) -> usize {
        self.n
    }

    fn measure(&self) -> &[T] {
        &self.measure
    }

    fn kernel(&self, t: T) -> Result<KernelMatrix<T>> {
        heat_kernel(self, t)
    }

    /// Modal form: `sum_k e^{-lambda_k t} phi_k^T W' phi_k` with
    /// `W'_xy = mu_x mu_y w_xy` (diagonal dropped). One `n^3` product serves
    /// every `t`.
    fn pair_sums(&self, w: &[T], t_grid: &[T]) -> Result<Vec<T>> {
        for &t in t_grid {
            check_time(t)?;
        }
        let g = self.modal_weights(w);
        Ok(t_grid
            .iter()
            .map(|&t| {
                let k = self.active_modes(t);
                kahan_sum((0..k).map(|j| (-self.eigenvalues[j] * t).exp() * g[j]))
            })
            .collect())
    }

    fn apply(&self, f: &[T], t: T) -> Result<Vec<T>> {
        apply_semigroup(self, f, t)
    }
}

/// Kernels precomputed on a fixed time grid. Only the grid times can be
/// queried; used when many functions are evaluated against the same kernels.
pub struct KernelTable<T> {
    measure: Vec<T>,
    kernels: Vec<KernelMatrix<T>>,
}

impl<T: Real> KernelTable<T> {
    pub fn build<S: KernelSource<T> + ?Sized>(src: &S, t_grid: &[T]) -> Result<Self> {
        let kernels = t_grid.par_iter().map(|&t| src.kernel(t)).collect::<Result<Vec<_>>>()?;
        Ok(KernelTable { measure: src.measure().to_vec(), kernels })
    }

    pub fn times(&self) -> Vec<T> {
        self.kernels.iter().map(|k| k.t).collect()
    }

    pub fn kernels(&self) -> &[KernelMatrix<T>] {
        &self.kernels
    }
}

impl<T: Real> KernelSource<T> for KernelTable<T> {
    fn len(&self) -> usize {
        self.measure.len()
    }

    fn measure(&self) -> &[T] {
        &self.measure
    }

    fn kernel(&self, t: T) -> Result<KernelMatrix<T>> {
        self.kernels
            .iter()
            .find(|k| k.t == t)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("time {t:e} is not in the kernel table")))
    }

    fn pair_sums(&self, w: &[T], t_grid: &[T]) -> Result<Vec<T>> {
        let n = self.len();
        let mu = &self.measure;
        t_grid
            .iter()
            .map(|&t| {
                let k = self
                    .kernels
                    .iter()
                    .find(|k| k.t == t)
                    .ok_or_else(|| Error::InvalidArgument(format!("time {t:e} is not in the kernel table")))?;
                Ok(crate::scalar::par_row_sum(n, |x, acc| {
                    for y in 0..n {
                        if y != x {
                            acc.add(mu[x] * mu[y] * w[x * n + y] * k.get(x, y));
                        }
                    }
                }))
            })
            .collect()
    }
}

impl<T: Real> SpectralHeatModel<T> {
    /// `G_k = sum_{x != y} mu_x mu_y w_xy phi_k(x) phi_k(y)` for all modes.
    pub fn modal_weights(&self, w: &[T]) -> Vec<T> {
        let n = self.n;
        let mu = &self.measure;
        let mut wm = vec![T::zero(); n * n];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    wm[x * n + y] = mu[x] * mu[y] * w[x * n + y];
                }
            }
        }
        // modes-major copy of phi, so that (W' Phi)^T = Phi^T W'^T is an A B^T product
        let mut pt = vec![T::zero(); n * n];
        for x in 0..n {
            for k in 0..n {
                pt[k * n + x] = self.phi[x * n + k];
            }
        }
        // m[k * n + x] = sum_y phi_k(y) W'_xy
        let m = T::mul_abt(n, n, n, &pt, &wm);
        (0..n).map(|k| kahan_sum((0..n).map(|x| pt[k * n + x] * m[k * n + x]))).collect()
    }
}
