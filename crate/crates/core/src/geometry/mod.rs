//! Set-level quantities: fractional perimeters, inner boundary
//! neighbourhoods, Minkowski fits and coarea formulas.
//!
//! Radius cut-offs are smeared over one mesh width, as for the metric
//! seminorms, so that lattice steps do not leak into scaling fits.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::besov::{besov_seminorm, check_field, indicator};
use crate::error::{Error, Result};
use crate::fit::{log_log_fit, log_space, ScalingFit};
use crate::heat::{apply_semigroup, SpectralHeatModel};
use crate::mmspace::{smoothed_pair_sums, Cell, MetricMeasureSpace};
use crate::scalar::{kahan_sum, par_row_sums, Real};
use crate::verify::{CheckReport, Tier};

/// Nonempty proper subset of the points of a space.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<T> {
    members: Vec<usize>,
    mask: Vec<bool>,
    mass: T,
}

impl<T: Real> PointSet<T> {
    pub fn new(space: &MetricMeasureSpace<T>, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let n = space.len();
        let members: Vec<usize> = members.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidPointSet(format!("point {bad} out of range (n = {n})")));
        }
        if members.is_empty() || members.len() == n {
            return Err(Error::InvalidPointSet("set must be nonempty and proper".into()));
        }
        let mut mask = vec![false; n];
        for &i in &members {
            mask[i] = true;
        }
        let mass = space.mass_of(members.iter().copied());
        if !(mass > T::zero() && mass < T::one()) {
            return Err(Error::InvalidPointSet(format!("set measure {mass} outside (0, 1)")));
        }
        Ok(PointSet { members, mask, mass })
    }

    /// Union of the members of the given cells.
    pub fn from_cells<'a>(space: &MetricMeasureSpace<T>, cells: impl IntoIterator<Item = &'a Cell>) -> Result<Self> {
        Self::new(space, cells.into_iter().flat_map(|c| c.members.iter().copied()))
    }

    pub fn complement(&self, space: &MetricMeasureSpace<T>) -> Result<Self> {
        Self::new(space, (0..self.mask.len()).filter(|&i| !self.mask[i]))
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, x: usize) -> bool {
        self.mask[x]
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn indicator(&self) -> Vec<T> {
        indicator(self.mask.len(), &self.members)
    }

    fn check(&self, space: &MetricMeasureSpace<T>) -> Result<()> {
        if self.mask.len() != space.len() {
            return Err(Error::InvalidPointSet("set belongs to a different space".into()));
        }
        Ok(())
    }
}

/// A set quantity sampled over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeomProfile {
    pub quantity: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub sup: f64,
    pub flags: Vec<String>,
}

impl GeomProfile {
    fn new<T: Real>(quantity: &str, grid: &[T], values: &[T]) -> Self {
        let values: Vec<f64> = values.iter().map(|v| v.to_f()).collect();
        GeomProfile {
            quantity: quantity.to_string(),
            grid: grid.iter().map(|v| v.to_f()).collect(),
            sup: values.iter().cloned().fold(0.0, f64::max),
            values,
            flags: Vec::new(),
        }
    }

    pub fn argsup(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

fn check_radii<T: Real>(r_grid: &[T]) -> Result<()> {
    if r_grid.is_empty() {
        return Err(Error::DegenerateWindow("empty radius grid".into()));
    }
    if let Some(r) = r_grid.iter().find(|r| !(**r > T::zero())) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if !r_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("radii must be strictly ascending".into()));
    }
    Ok(())
}

/// `(mu x mu)({(x, y) in E x E^c : d(x, y) < r})` for each radius.
///
/// Summed over ordered pairs that straddle the set, with weight `1/2`, so the
/// sum for `E` and for `E^c` is the same computation and agrees bit for bit.
pub fn pair_counts<T: Real>(space: &MetricMeasureSpace<T>, e: &PointSet<T>, r_grid: &[T]) -> Result<Vec<T>> {
    e.check(space)?;
    check_radii(r_grid)?;
    let half = T::lit(0.5);
    Ok(smoothed_pair_sums(space, r_grid, |x, y| if e.mask[x] != e.mask[y] { half } else { T::zero() }))
}

pub fn pair_count<T: Real>(space: &MetricMeasureSpace<T>, e: &PointSet<T>, r: T) -> Result<T> {
    Ok(pair_counts(space, e, &[r])?[0])
}

/// Local slope below which a perimeter profile that peaks at the smallest
/// radius is reported as divergent.
const DIVERGENCE_SLOPE: f64 = -0.05;

/// `sup_r pair_count(r) / r^{alpha d_W + d_H}` over the grid. When the sup
/// sits at the smallest radius and the profile is still rising there, the
/// perimeter is flagged as divergent.
pub fn fractional_perimeter<T: Real>(
    space: &MetricMeasureSpace<T>,
    e: &PointSet<T>,
    alpha: T,
    r_grid: &[T],
) -> Result<GeomProfile> {
    let d_w = space.d_w()?;
    let expo = alpha * d_w + space.d_h();
    let counts = pair_counts(space, e, r_grid)?;
    let values: Vec<T> = r_grid.iter().zip(&counts).map(|(r, c)| *c / r.powf(expo)).collect();
    let mut prof = GeomProfile::new("fractional_perimeter", r_grid, &values);
    if prof.argsup() == 0 && r_grid.len() >= 3 {
        let k = (r_grid.len() / 2).max(3);
        if let Ok(fit) = log_log_fit(&r_grid[..k], &values[..k], 3) {
            if fit.slope < DIVERGENCE_SLOPE {
                prof.flags.push(format!("divergent: sup at smallest radius, local slope {:.3}", fit.slope));
            }
        }
    }
    Ok(prof)
}

/// Distance from each point of `E` to `E^c`.
fn distance_to_complement<T: Real>(space: &MetricMeasureSpace<T>, e: &PointSet<T>) -> Vec<T> {
    let n = space.len();
    let outside: Vec<usize> = (0..n).filter(|&y| !e.mask[y]).collect();
    e.members.iter().map(|&x| outside.iter().map(|&y| space.dist(x, y)).fold(T::infinity(), T::min)).collect()
}

/// `mu{x in E : d(x, E^c) < r}` for each radius.
///
/// Each point stands for a slab one mesh wide whose far edge sits at
/// `d(x, E^c) - mesh/2` from the interface, and counts with the fraction of
/// that slab inside the `r`-neighbourhood: `clamp((r - d) / mesh + 1, 0, 1)`.
/// On a uniform lattice this reproduces the continuum strip measure exactly.
pub fn inner_neighborhood_measures<T: Real>(
    space: &MetricMeasureSpace<T>,
    e: &PointSet<T>,
    r_grid: &[T],
) -> Result<Vec<T>> {
    e.check(space)?;
    check_radii(r_grid)?;
    let h = space.meta.mesh;
    let mu = space.measure();
    let dist = distance_to_complement(space, e);
    let rows = par_row_sums(e.members.len(), r_grid.len(), |i, acc| {
        let x = e.members[i];
        for (k, r) in r_grid.iter().enumerate() {
            let w = ((*r - dist[i]) / h + T::one()).max(T::zero()).min(T::one());
            acc[k].add(mu[x] * w);
        }
    });
    Ok(rows)
}

pub fn inner_neighborhood_measure<T: Real>(space: &MetricMeasureSpace<T>, e: &PointSet<T>, r: T) -> Result<T> {
    Ok(inner_neighborhood_measures(space, e, &[r])?[0])
}

/// Regress `log mu((dE)_r^-)` against `log r`; the slope is `d_H` minus the
/// boundary dimension.
pub fn minkowski_fit<T: Real>(space: &MetricMeasureSpace<T>, e: &PointSet<T>, r_grid: &[T]) -> Result<ScalingFit> {
    let m = inner_neighborhood_measures(space, e, r_grid)?;
    log_log_fit(r_grid, &m, 4)
}

/// `h(u, s)` over level thresholds and its integral in `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoareaH {
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    pub integral: f64,
    pub radii: Vec<f64>,
}

/// `h(u, s) = sup_{r <= R} r^{-alpha d_W} mu((d{u > s})_r^-)` with radii
/// log-spaced over `[mesh, R]`, integrated over `s`.
///
/// With `s_grid = None` the thresholds are the sorted distinct values of
/// `u`; level sets only change there, so the integral is exact for any `u`.
/// An explicit grid is integrated by the midpoint rule.
pub fn coarea_h<T: Real>(
    space: &MetricMeasureSpace<T>,
    u: &[T],
    alpha: T,
    big_r: T,
    s_grid: Option<&[T]>,
) -> Result<CoareaH> {
    check_field(u, space.len())?;
    let d_w = space.d_w()?;
    let mesh = space.meta.mesh;
    if !(big_r >= mesh) {
        return Err(Error::InvalidArgument(format!("R = {big_r} below the mesh {mesh}")));
    }
    let radii = if big_r > mesh { log_space(mesh, big_r, 12) } else { vec![mesh] };
    let h_of = |s: T| -> Result<T> {
        let members: Vec<usize> = (0..u.len()).filter(|&i| u[i] > s).collect();
        if members.is_empty() || members.len() == u.len() {
            return Ok(T::zero());
        }
        let e = PointSet::new(space, members)?;
        let m = inner_neighborhood_measures(space, &e, &radii)?;
        Ok(radii.iter().zip(&m).map(|(r, m)| *m / r.powf(alpha * d_w)).fold(T::zero(), T::max))
    };
    let (levels, widths): (Vec<T>, Vec<T>) = match s_grid {
        None => {
            let mut v = u.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite field"));
            v.dedup();
            (0..v.len().saturating_sub(1)).map(|i| (v[i], v[i + 1] - v[i])).unzip()
        }
        Some(g) => {
            if !g.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidArgument("thresholds must be strictly ascending".into()));
            }
            let half = T::lit(0.5);
            (0..g.len().saturating_sub(1)).map(|i| ((g[i] + g[i + 1]) * half, g[i + 1] - g[i])).unzip()
        }
    };
    let h = levels.iter().map(|s| h_of(*s)).collect::<Result<Vec<T>>>()?;
    let integral = kahan_sum(h.iter().zip(&widths).map(|(h, w)| *h * *w));
    Ok(CoareaH {
        s: levels.iter().map(|v| v.to_f()).collect(),
        h: h.iter().map(|v| v.to_f()).collect(),
        integral: integral.to_f(),
        radii: radii.iter().map(|r| r.to_f()).collect(),
    })
}

/// Points of `E` joined by an edge to `E^c`, counted once per location.
pub fn boundary_cardinality<T: Real>(space: &MetricMeasureSpace<T>, e: &PointSet<T>) -> Result<usize> {
    e.check(space)?;
    let mut pts = BTreeSet::new();
    for ed in space.edges() {
        if e.mask[ed.a] != e.mask[ed.b] {
            pts.insert(if e.mask[ed.a] { ed.a } else { ed.b });
        }
    }
    let coords = space.coords();
    if coords.is_empty() {
        return Ok(pts.len());
    }
    let mut locs: Vec<Vec<u64>> = pts.iter().map(|&i| coords[i].iter().map(|c| c.to_f().to_bits()).collect()).collect();
    locs.sort();
    locs.dedup();
    Ok(locs.len())
}

/// `||1_E||_{1, d_H/d_W} / |dE|` over a family of sets. The two-sided bound
/// `c |dE| <= ||1_E|| <= C |dE|` predicts a bounded spread; passes when the
/// spread is at most `max_spread`.
pub fn perimeter_vs_boundary<T: Real>(
    model: &SpectralHeatModel<T>,
    space: &MetricMeasureSpace<T>,
    family: &[PointSet<T>],
    t_grid: &[T],
    max_spread: f64,
) -> Result<CheckReport> {
    model.check_space(space)?;
    let alpha = space.d_h() / space.d_w()?;
    let mut report = CheckReport::new("perimeter_vs_boundary", Tier::Empirical, "geometry", "perimeter_vs_boundary");
    report.grid(t_grid).columns(&["set", "mu_E", "boundary", "seminorm", "ratio"]);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (i, e) in family.iter().enumerate() {
        let b = boundary_cardinality(space, e)?;
        let prof = besov_seminorm(model, &e.indicator(), T::one(), alpha, t_grid)?;
        for f in &prof.flags {
            report.flag(format!("set {i}: {f}"));
        }
        if b == 0 {
            report.flag(format!("set {i} has empty boundary"));
            continue;
        }
        let ratio = prof.sup / b as f64;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        report.row(vec![i as f64, e.mass().to_f(), b as f64, prof.sup, ratio]);
    }
    if report.details.is_empty() {
        return Err(Error::DegenerateInput("no set with a nonempty boundary".into()));
    }
    let spread = hi / lo;
    report.constant("c_lower", lo).constant("c_upper", hi).constant("spread", spread);
    report.tolerance = max_spread;
    report.passed = spread <= max_spread;
    report.worst_case = format!("ratio range [{lo:.4e}, {hi:.4e}], spread {spread:.3}");
    Ok(report)
}

/// Edge conductance across the boundary of `{u > s}`.
fn cut<T: Real>(space: &MetricMeasureSpace<T>, u: &[T], s: T) -> T {
    kahan_sum(space.edges().iter().filter(|e| (u[e.a] > s) != (u[e.b] > s)).map(|e| e.w))
}

/// `sum_edges w |u(x) - u(y)| = int cut({u > s}) ds`, the discrete layer-cake
/// identity. The right side is evaluated level by level over the distinct
/// values of `u`.
pub fn discrete_coarea_identity<T: Real>(space: &MetricMeasureSpace<T>, u: &[T]) -> Result<CheckReport> {
    check_field(u, space.len())?;
    let lhs = kahan_sum(space.edges().iter().map(|e| e.w * (u[e.a] - u[e.b]).abs()));
    let mut v = u.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite field"));
    v.dedup();
    let rhs = kahan_sum((0..v.len().saturating_sub(1)).map(|i| (v[i + 1] - v[i]) * cut(space, u, v[i])));
    let (l, r) = (lhs.to_f(), rhs.to_f());
    let err = (l - r).abs();
    let tol = 1e-12 * l.abs().max(1.0);
    let mut report = CheckReport::new("discrete_coarea", Tier::Exact, "geometry", "discrete_coarea_identity");
    report.constant("lhs", l).constant("rhs", r).constant("abs_error", err);
    report.tolerance = tol;
    report.passed = err <= tol;
    report.vacuous = l == 0.0 && r == 0.0;
    report.worst_case = format!("|{l:.6e} - {r:.6e}| = {err:.3e} over {} levels", v.len());
    report.columns(&["level", "width", "cut"]);
    for i in 0..v.len().saturating_sub(1) {
        report.row(vec![v[i].to_f(), (v[i + 1] - v[i]).to_f(), cut(space, u, v[i]).to_f()]);
    }
    Ok(report)
}

/// `||P_t 1_E - 1_E||_{L^1}` across the grid, scaled by `t^{-delta/d_W}`.
/// Reports the sup (boundedness) and inf (non-degeneracy) of the scaled
/// norm, and checks the identity `||P_t 1_E - 1_E||_1 = 2(mu(E) -
/// ||P_{t/2} 1_E||_2^2)` to `1e-9`, which must hold exactly.
pub fn pt_indicator_decay<T: Real>(
    model: &SpectralHeatModel<T>,
    space: &MetricMeasureSpace<T>,
    e: &PointSet<T>,
    t_grid: &[T],
    delta: T,
) -> Result<CheckReport> {
    model.check_space(space)?;
    e.check(space)?;
    crate::besov::check_time_grid(t_grid)?;
    let (d_h, d_w) = (space.d_h(), space.d_w()?);
    if !(delta > T::zero() && delta <= d_h) {
        return Err(Error::InvalidArgument(format!("need 0 < delta <= d_H, got {delta}")));
    }
    let mu = space.measure();
    let one_e = e.indicator();
    let mut report = CheckReport::new("pt_indicator_decay", Tier::Empirical, "geometry", "pt_indicator_decay");
    report.grid(t_grid).columns(&["t", "l1_norm", "scaled", "identity_rhs"]);
    let (mut sup, mut inf, mut worst_id) = (0.0f64, f64::INFINITY, 0.0f64);
    for &t in t_grid {
        let pt = apply_semigroup(model, &one_e, t)?;
        let l1 = kahan_sum((0..mu.len()).map(|x| mu[x] * (pt[x] - one_e[x]).abs()));
        let half = apply_semigroup(model, &one_e, t / T::lit(2.0))?;
        let rhs = T::lit(2.0) * (e.mass() - kahan_sum((0..mu.len()).map(|x| mu[x] * half[x] * half[x])));
        let scaled = (t.powf(-delta / d_w) * l1).to_f();
        sup = sup.max(scaled);
        inf = inf.min(scaled);
        worst_id = worst_id.max((l1 - rhs).abs().to_f());
        report.row(vec![t.to_f(), l1.to_f(), scaled, rhs.to_f()]);
    }
    report
        .constant("sup_scaled", sup)
        .constant("inf_scaled", inf)
        .constant("identity_error", worst_id)
        .constant("equilibrium", 2.0 * e.mass().to_f() * (1.0 - e.mass().to_f()));
    report.tolerance = 1e-9;
    report.passed = sup.is_finite() && inf > 0.0 && worst_id <= 1e-9;
    report.worst_case = format!("scaled norm in [{inf:.4e}, {sup:.4e}], identity error {worst_id:.2e}");
    Ok(report)
}
