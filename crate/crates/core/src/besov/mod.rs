//! Heat-semigroup Besov seminorms, their metric counterparts and the
//! energies of the Dirichlet form.
//!
//! The heat seminorm of `f` at time `t` is
//! `t^{-alpha} (sum_{x != y} mu_x mu_y |f(x) - f(y)|^p p_t(x, y))^{1/p}`;
//! the supremum over `t > 0` is replaced by the supremum over a time grid.

mod metric;

pub use metric::{
    critical_exponent_estimate, metric_pair_mass, metric_seminorm, metric_seminorm_q, metric_sup, singular_seminorm,
    singular_seminorm_with, CriticalExponent,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::log_space;
use crate::heat::{KernelSource, SpectralHeatModel};
use crate::mmspace::{smoothed_pair_sums, MetricMeasureSpace};
use crate::scalar::{abs_pow, kahan_sum, Real};

/// Real-valued function on the points of a space.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFunction<T> {
    pub space_hash: String,
    pub values: Vec<T>,
}

impl<T: Real> FieldFunction<T> {
    pub fn new(space: &MetricMeasureSpace<T>, values: Vec<T>) -> Result<Self> {
        check_field(&values, space.len())?;
        Ok(FieldFunction { space_hash: crate::mmspace::io::space_hash(space)?, values })
    }
}

pub(crate) fn check_field<T: Real>(f: &[T], n: usize) -> Result<()> {
    if f.len() != n {
        return Err(Error::InvalidArgument(format!("field has {} values for {n} points", f.len())));
    }
    if let Some(i) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("field value at point {i} is not finite")));
    }
    Ok(())
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("need p >= 1, got {p}")));
    }
    Ok(())
}

pub(crate) fn is_constant<T: Real>(f: &[T]) -> bool {
    f.iter().all(|v| *v == f[0])
}

/// Indicator of a set of point ids.
pub fn indicator<T: Real>(n: usize, members: &[usize]) -> Vec<T> {
    let mut f = vec![T::zero(); n];
    for &i in members {
        f[i] = T::one();
    }
    f
}

/// Uniform values in `[-1, 1]`.
pub fn random_field<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| T::lit(rng.gen_range(-1.0..=1.0))).collect()
}

/// Random signs.
pub fn rademacher_field<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| if rng.gen::<bool>() { T::one() } else { -T::one() }).collect()
}

/// `|f(x) - f(y)|^p` as a row-major table.
pub(crate) fn diff_table<T: Real>(f: &[T], p: T) -> Vec<T> {
    let n = f.len();
    let mut w = vec![T::zero(); n * n];
    for x in 0..n {
        for y in 0..n {
            w[x * n + y] = abs_pow(f[x] - f[y], p);
        }
    }
    w
}

/// Sampled heat seminorm `t -> t^{-alpha} (sum mu mu |df|^p p_t)^{1/p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormProfile {
    pub alpha: f64,
    pub p: f64,
    /// `(t, value)` in grid order.
    pub samples: Vec<(f64, f64)>,
    pub sup: f64,
    pub argsup_t: f64,
    /// The supremum sits at an end of the grid, so a wider grid could raise it.
    pub boundary_flag: bool,
    pub flags: Vec<String>,
}

impl SeminormProfile {
    /// Profile with every value rescaled to exponent `beta`:
    /// `value_beta(t) = t^{alpha - beta} value_alpha(t)`.
    pub fn with_alpha(&self, beta: f64) -> SeminormProfile {
        let pairs: Vec<(f64, f64)> = self.samples.iter().map(|(t, v)| (*t, t.powf(self.alpha - beta) * v)).collect();
        profile_from_values(beta, self.p, pairs)
    }

    pub fn value_at(&self, i: usize) -> f64 {
        self.samples[i].1
    }
}

fn profile_from_values(alpha: f64, p: f64, samples: Vec<(f64, f64)>) -> SeminormProfile {
    let mut best = 0;
    for (i, s) in samples.iter().enumerate() {
        if s.1 > samples[best].1 {
            best = i;
        }
    }
    let (argsup_t, sup) = samples[best];
    let mut flags = Vec::new();
    let (tmin, tmax) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.0), b.max(s.0)));
    let boundary_flag = sup > 0.0 && (argsup_t == tmin || argsup_t == tmax) && samples.len() > 1;
    if boundary_flag {
        flags.push(if argsup_t == tmin {
            "sup attained at smallest grid time; the grid may truncate it".to_string()
        } else {
            "sup attained at largest grid time; the grid may truncate it".to_string()
        });
    }
    SeminormProfile { alpha, p, samples, sup, argsup_t, boundary_flag, flags }
}

/// Build a profile from raw pair sums `S(t)`.
pub(crate) fn profile_from_sums<T: Real>(t_grid: &[T], sums: &[T], p: T, alpha: T) -> SeminormProfile {
    let inv_p = T::one() / p;
    let samples = t_grid
        .iter()
        .zip(sums)
        .map(|(t, s)| {
            let v = t.powf(-alpha) * s.max(T::zero()).powf(inv_p);
            (t.to_f(), v.to_f())
        })
        .collect();
    profile_from_values(alpha.to_f(), p.to_f(), samples)
}

pub(crate) fn check_time_grid<T: Real>(t_grid: &[T]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::DegenerateWindow("empty time grid".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t > T::zero()) || !t.is_finite()) {
        return Err(Error::NonPositiveTime(t.to_f()));
    }
    Ok(())
}

/// `sum_{x != y} mu_x mu_y |f(x) - f(y)|^p p_t(x, y)` for each `t`.
pub fn heat_pair_sums<T, S>(src: &S, f: &[T], p: T, t_grid: &[T]) -> Result<Vec<T>>
where
    T: Real,
    S: KernelSource<T> + ?Sized,
{
    check_field(f, src.len())?;
    check_p(p)?;
    check_time_grid(t_grid)?;
    if is_constant(f) {
        return Ok(vec![T::zero(); t_grid.len()]);
    }
    src.pair_sums(&diff_table(f, p), t_grid)
}

/// Heat seminorm profile of `f` over `t_grid`. Any positive grid is
/// accepted; the exact checks deliberately sample outside the bulk window
/// (down to `0.01 / lambda_max` and up to `1 / lambda_1`).
pub fn besov_seminorm<T, S>(src: &S, f: &[T], p: T, alpha: T, t_grid: &[T]) -> Result<SeminormProfile>
where
    T: Real,
    S: KernelSource<T> + ?Sized,
{
    if !(alpha >= T::zero()) {
        return Err(Error::InvalidArgument(format!("need alpha >= 0, got {alpha}")));
    }
    let sums = heat_pair_sums(src, f, p, t_grid)?;
    Ok(profile_from_sums(t_grid, &sums, p, alpha))
}

/// Mode coefficients of `f - f(0)`; the shift only touches the ground state,
/// which carries no energy.
fn centered_coefficients<T: Real>(model: &SpectralHeatModel<T>, f: &[T]) -> Result<Option<Vec<T>>> {
    check_field(f, model.len())?;
    if is_constant(f) {
        return Ok(None);
    }
    let g: Vec<T> = f.iter().map(|v| *v - f[0]).collect();
    Ok(Some(model.coefficients(&g)))
}

/// `E_t(f) = (1/t) <(I - P_t) f, f> = (1/t) sum_k (1 - e^{-lambda_k t}) c_k^2`.
pub fn approx_energy<T: Real>(model: &SpectralHeatModel<T>, f: &[T], t: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::NonPositiveTime(t.to_f()));
    }
    let Some(c) = centered_coefficients(model, f)? else {
        return Ok(T::zero());
    };
    let ev = model.eigenvalues();
    Ok(kahan_sum((1..c.len()).map(|k| -(-ev[k] * t).exp_m1() * c[k] * c[k])) / t)
}

/// `E(f) = sum_k lambda_k c_k^2`.
pub fn dirichlet_energy<T: Real>(model: &SpectralHeatModel<T>, f: &[T]) -> Result<T> {
    let Some(c) = centered_coefficients(model, f)? else {
        return Ok(T::zero());
    };
    let ev = model.eigenvalues();
    Ok(kahan_sum((1..c.len()).map(|k| ev[k] * c[k] * c[k])))
}

/// Heat integrand against the metric one at matched scales `t = r^{d_W}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRatio {
    pub lo: f64,
    pub hi: f64,
    pub radii: Vec<f64>,
    /// `t^{-alpha p} S(t) / N^{alpha d_W}_p(f, r)^p` at each radius.
    pub ratios: Vec<f64>,
}

impl EquivalenceRatio {
    pub fn spread(&self) -> f64 {
        self.hi / self.lo
    }
}

/// Radii in `[mesh, diameter / 4]` whose matched times `r^{d_W}` fall in the
/// model's bulk time window. The radius floor is the mesh rather than the
/// usual `3 mesh`: on coarse fractal levels the stricter floor leaves no
/// overlap with the time window at all.
pub fn matched_radii<T: Real>(
    model: &SpectralHeatModel<T>,
    space: &MetricMeasureSpace<T>,
    count: usize,
) -> Result<Vec<T>> {
    let d_w = space.d_w()?;
    let (r_lo, r_hi) = (space.meta.mesh, space.radius_window().1);
    let (t_lo, t_hi) = model.bulk_time_window();
    let inv = T::one() / d_w;
    let lo = r_lo.max(t_lo.powf(inv));
    let hi = r_hi.min(t_hi.powf(inv));
    if !(hi > lo) {
        return Err(Error::DegenerateWindow(format!(
            "radius window [{r_lo:e}, {r_hi:e}] and time window [{t_lo:e}, {t_hi:e}] do not overlap"
        )));
    }
    Ok(log_space(lo, hi, count))
}

/// Ratio of the heat-seminorm integrand at `t = r^{d_W}` to the metric
/// integrand `N^{alpha d_W}_p(f, r)^p` across the common window. A bounded
/// spread `hi / lo` is what comparability of the two seminorms predicts.
pub fn equivalence_ratio<T: Real>(
    model: &SpectralHeatModel<T>,
    space: &MetricMeasureSpace<T>,
    f: &[T],
    p: T,
    alpha: T,
) -> Result<EquivalenceRatio> {
    model.check_space(space)?;
    check_field(f, space.len())?;
    check_p(p)?;
    if is_constant(f) {
        return Err(Error::DegenerateInput("ratio undefined for a constant field".into()));
    }
    let (d_h, d_w) = (space.d_h(), space.d_w()?);
    let radii = matched_radii(model, space, 12)?;
    let times: Vec<T> = radii.iter().map(|r| r.powf(d_w)).collect();
    let heat = heat_pair_sums(model, f, p, &times)?;
    let metric = smoothed_pair_sums(space, &radii, |x, y| abs_pow(f[x] - f[y], p));
    let a = alpha * d_w;
    let ratios: Vec<f64> = radii
        .iter()
        .zip(times.iter().zip(heat.iter().zip(&metric)))
        .map(|(r, (t, (s, m)))| {
            let h = t.powf(-alpha * p) * *s;
            let n = r.powf(-a * p - d_h) * *m;
            (h / n).to_f()
        })
        .collect();
    if ratios.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::DegenerateInput("a metric or heat integrand vanishes in the window".into()));
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(EquivalenceRatio { lo, hi, radii: radii.iter().map(|r| r.to_f()).collect(), ratios })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::heat::SpectralHeatModel;
    use crate::mmspace::{build_circle_grid, build_gasket, from_graph, Edge};

    pub(crate) fn two_point() -> MetricMeasureSpace<f64> {
        from_graph("two", vec![0.5, 0.5], vec![Edge { a: 0, b: 1, w: 1.0 }]).unwrap()
    }

    #[test]
    fn constant_field_has_zero_seminorm() {
        let g = build_gasket::<f64>(2).unwrap();
        let m = SpectralHeatModel::from_space(&g).unwrap();
        let prof = besov_seminorm(&m, &vec![3.0; g.len()], 1.0, 0.5, &m.default_time_grid()).unwrap();
        assert_eq!(prof.sup, 0.0);
        assert!(!prof.boundary_flag);
        assert_eq!(approx_energy(&m, &vec![3.0; g.len()], 0.1).unwrap(), 0.0);
        assert_eq!(dirichlet_energy(&m, &vec![3.0; g.len()]).unwrap(), 0.0);
    }

    #[test]
    fn two_point_profile_closed_form() {
        let m = SpectralHeatModel::from_space(&two_point()).unwrap();
        let grid = log_space(1e-4, 1.0, 9);
        let prof = besov_seminorm(&m, &[1.0, -1.0], 1.0, 1.0, &grid).unwrap();
        for (t, v) in &prof.samples {
            let exact = (1.0 - (-4.0 * t).exp()) / t;
            assert!((v - exact).abs() < 1e-9 * exact, "t={t}: {v} vs {exact}");
        }
        // increasing toward 4 as t -> 0
        assert!(prof.samples.windows(2).all(|w| w[0].1 > w[1].1));
        assert!((prof.sup - 4.0).abs() < 1e-2);
        assert_eq!(prof.argsup_t, 1e-4);
        assert!(prof.boundary_flag);
    }

    #[test]
    fn euclidean_constant_on_the_circle() {
        let s = build_circle_grid::<f64>(512).unwrap();
        let m = SpectralHeatModel::from_space(&s).unwrap();
        let f: Vec<f64> = (0..512).map(|i| (std::f64::consts::TAU * i as f64 / 512.0).sin()).collect();
        let prof = besov_seminorm(&m, &f, 1.0, 0.5, &m.default_time_grid()).unwrap();
        let ratio = prof.sup / 4.0;
        let target = 2.0 / std::f64::consts::PI.sqrt();
        assert!((ratio / target - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn two_point_energies() {
        let m = SpectralHeatModel::from_space(&two_point()).unwrap();
        let f = [1.0, -1.0];
        assert!((dirichlet_energy(&m, &f).unwrap() - 4.0).abs() < 1e-12);
        for t in [1e-3, 0.1, 2.0] {
            let e = approx_energy(&m, &f, t).unwrap();
            assert!((e - (1.0 - (-4.0 * t).exp()) / t).abs() < 1e-12);
        }
    }

    #[test]
    fn approx_energy_increases_as_time_shrinks() {
        let g = build_gasket::<f64>(3).unwrap();
        let m = SpectralHeatModel::from_space(&g).unwrap();
        let f = random_field::<f64>(g.len(), 11);
        let e = dirichlet_energy(&m, &f).unwrap();
        let vals: Vec<f64> = log_space(1e-6, 10.0, 30).iter().map(|t| approx_energy(&m, &f, *t).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        assert!(vals.iter().all(|v| *v <= e));
        assert!((vals[0] / e - 1.0).abs() < 1e-2);
    }

    #[test]
    fn equivalence_on_gasket_cell() {
        let g = build_gasket::<f64>(5).unwrap();
        let m = SpectralHeatModel::from_space(&g).unwrap();
        let cell = &g.cells(1)[0];
        let f = indicator::<f64>(g.len(), &cell.members);
        let alpha = g.d_h() / g.d_w().unwrap();
        let r = equivalence_ratio(&m, &g, &f, 1.0, alpha).unwrap();
        assert!(r.spread() <= 50.0, "spread {} over {:?}", r.spread(), r.ratios);
        assert!(equivalence_ratio(&m, &g, &vec![1.0; g.len()], 1.0, alpha).is_err());
    }

    #[test]
    fn equivalence_on_circle() {
        let s = build_circle_grid::<f64>(256).unwrap();
        let m = SpectralHeatModel::from_space(&s).unwrap();
        let f: Vec<f64> = (0..256).map(|i| (std::f64::consts::TAU * i as f64 / 256.0).cos()).collect();
        let r = equivalence_ratio(&m, &s, &f, 2.0, 0.5).unwrap();
        assert!(r.spread() <= 10.0, "spread {} over {:?}", r.spread(), r.ratios);
    }
}
