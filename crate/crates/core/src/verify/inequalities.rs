//! Inequalities that hold for every conservative symmetric semigroup.

use super::{lp_norm, refine_grid, CheckReport, Tier};
use crate::besov::{
    approx_energy, besov_seminorm, check_field, check_time_grid, dirichlet_energy, is_constant, SeminormProfile,
};
use crate::error::{Error, Result};
use crate::heat::{apply_semigroup, KernelSource, SpectralHeatModel};
use crate::scalar::Real;

const EXACT_SLACK: f64 = 1e-9;

/// `||P_t f - f||_p <= t^alpha ||f||_{p,alpha}` at every grid time, with the
/// seminorm taken as the sup over the same grid.
pub fn check_pseudo_poincare<T, S>(src: &S, f: &[T], p: T, alpha: T, t_grid: &[T]) -> Result<CheckReport>
where
    T: Real,
    S: KernelSource<T> + ?Sized,
{
    let prof = besov_seminorm(src, f, p, alpha, t_grid)?;
    let mut report = CheckReport::new("pseudo_poincare", Tier::Exact, "verify", "check_pseudo_poincare");
    report.grid(t_grid).columns(&["t", "lp_diff", "bound", "ratio"]);
    report.tolerance = EXACT_SLACK;
    report.constant("seminorm", prof.sup);
    if is_constant(f) {
        report.passed = true;
        report.vacuous = true;
        report.worst_case = "constant field: 0 <= 0".into();
        return Ok(report);
    }
    let mu = src.measure();
    let mut worst = (0.0f64, 0.0f64);
    for &t in t_grid {
        let pt = src.apply(f, t)?;
        let d: Vec<T> = pt.iter().zip(f).map(|(a, b)| *a - *b).collect();
        let lhs = lp_norm(mu, &d, p).to_f();
        let bound = t.to_f().powf(alpha.to_f()) * prof.sup;
        let ratio = lhs / bound;
        if ratio > worst.0 {
            worst = (ratio, t.to_f());
        }
        report.row(vec![t.to_f(), lhs, bound, ratio]);
    }
    report.constant("max_ratio", worst.0);
    report.passed = worst.0 <= 1.0 + EXACT_SLACK;
    report.worst_case = format!("max ||P_t f - f|| / (t^a ||f||) = {:.12} at t = {:.3e}", worst.0, worst.1);
    Ok(report)
}

/// Exponents for `||f||_{p,alpha} <= ||f||_{q,beta}^theta ||f||_{r,gamma}^{1-theta}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl InterpolationParams {
    /// `alpha = theta beta + (1 - theta) gamma`.
    pub fn alpha(&self) -> f64 {
        self.theta * self.beta + (1.0 - self.theta) * self.gamma
    }

    /// Exponents with `1/p = theta/q + (1-theta)/r`.
    pub fn with_p_from(q: f64, r: f64, beta: f64, gamma: f64, theta: f64) -> Self {
        let p = 1.0 / (theta / q + (1.0 - theta) / r);
        InterpolationParams { p, q, r, beta, gamma, theta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Constraint(format!("need theta in [0, 1], got {}", self.theta)));
        }
        if [self.p, self.q, self.r].iter().any(|v| !(*v >= 1.0)) {
            return Err(Error::Constraint("need p, q, r >= 1".into()));
        }
        if self.beta < 0.0 || self.gamma < 0.0 {
            return Err(Error::Constraint("need beta, gamma >= 0".into()));
        }
        let lhs = 1.0 / self.p;
        let rhs = self.theta / self.q + (1.0 - self.theta) / self.r;
        if (lhs - rhs).abs() > 1e-12 * lhs {
            return Err(Error::Constraint(format!("1/p = {lhs} but theta/q + (1-theta)/r = {rhs}")));
        }
        Ok(())
    }
}

/// Hölder applied sample by sample: the inequality holds at every `t`, so
/// it also holds for the sups.
pub fn check_interpolation<T, S>(src: &S, f: &[T], params: &InterpolationParams, t_grid: &[T]) -> Result<CheckReport>
where
    T: Real,
    S: KernelSource<T> + ?Sized,
{
    params.validate()?;
    let th = params.theta;
    let a = besov_seminorm(src, f, T::lit(params.p), T::lit(params.alpha()), t_grid)?;
    let b = besov_seminorm(src, f, T::lit(params.q), T::lit(params.beta), t_grid)?;
    let c = besov_seminorm(src, f, T::lit(params.r), T::lit(params.gamma), t_grid)?;
    let mut report = CheckReport::new("interpolation", Tier::Exact, "verify", "check_interpolation");
    report.grid(t_grid).columns(&["t", "lhs", "rhs", "ratio"]);
    report.tolerance = EXACT_SLACK;
    let combine = |x: f64, y: f64| x.powf(th) * y.powf(1.0 - th);
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..t_grid.len() {
        let lhs = a.value_at(i);
        let rhs = combine(b.value_at(i), c.value_at(i));
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        if ratio > worst.0 {
            worst = (ratio, a.samples[i].0);
        }
        report.row(vec![a.samples[i].0, lhs, rhs, ratio]);
    }
    let sup_rhs = combine(b.sup, c.sup);
    report.constant("lhs_sup", a.sup).constant("rhs_sup", sup_rhs).constant("max_ratio", worst.0);
    report.vacuous = a.sup == 0.0;
    report.passed = worst.0 <= 1.0 + EXACT_SLACK && a.sup <= sup_rhs * (1.0 + EXACT_SLACK);
    report.worst_case =
        format!("max sample ratio {:.12} at t = {:.3e}; sups {:.6e} <= {:.6e}", worst.0, worst.1, a.sup, sup_rhs);
    Ok(report)
}

/// `||h||_p^p` and the sampled `t^{-alpha p} S_t(h)` for one function.
fn norm_parts<T, S>(src: &S, h: &[T], p: T, alpha: T, t_grid: &[T]) -> Result<(f64, Vec<f64>)>
where
    T: Real,
    S: KernelSource<T> + ?Sized,
{
    let prof = besov_seminorm(src, h, p, alpha, t_grid)?;
    let pf = p.to_f();
    let lp = lp_norm(src.measure(), h, p).to_f().powf(pf);
    Ok((lp, prof.samples.iter().map(|(_, v)| v.powf(pf)).collect()))
}

/// Clarkson's inequality for the norm `(||h||_p^p + ||h||_{p,alpha}^p)^{1/p}`,
/// the seminorm being the sup over the grid. With `u = (f+g)/2`,
/// `v = (f-g)/2` and `N = norm^p`:
///
/// - `p >= 2`: `N(u) + N(v) <= (N(f) + N(g)) / 2`
/// - `1 < p < 2`: `N(u)^{q/p} + N(v)^{q/p} <= ((N(f) + N(g)) / 2)^{q-1}`, `q = p/(p-1)`
///
/// For a fixed `t` the norm is an `L^p` norm on the disjoint union of the
/// space and the pair space, so the inequality holds time by time; that
/// per-time form is reported as `pointwise_excess`. The sup over `t` of a
/// sum is not the sum of sups, so the sup form can fail when `u` and `v`
/// peak at different times.
pub fn check_clarkson<T, S>(src: &S, f: &[T], g: &[T], p: T, alpha: T, t_grid: &[T]) -> Result<CheckReport>
where
    T: Real,
    S: KernelSource<T> + ?Sized,
{
    if !(p > T::one()) {
        return Err(Error::Constraint(format!("Clarkson needs p > 1, got {p}")));
    }
    check_field(f, src.len())?;
    check_field(g, src.len())?;
    let half = T::lit(0.5);
    let u: Vec<T> = f.iter().zip(g).map(|(a, b)| (*a + *b) * half).collect();
    let v: Vec<T> = f.iter().zip(g).map(|(a, b)| (*a - *b) * half).collect();
    let parts =
        [f, g, &u[..], &v[..]].iter().map(|h| norm_parts(src, h, p, alpha, t_grid)).collect::<Result<Vec<_>>>()?;
    let pf = p.to_f();
    let sup_norm = |(lp, s): &(f64, Vec<f64>)| lp + s.iter().cloned().fold(0.0, f64::max);
    let (nf, ng, nu, nv) = (sup_norm(&parts[0]), sup_norm(&parts[1]), sup_norm(&parts[2]), sup_norm(&parts[3]));
    let sides = |nf: f64, ng: f64, nu: f64, nv: f64| {
        if pf >= 2.0 {
            (nu + nv, 0.5 * (nf + ng))
        } else {
            let q = pf / (pf - 1.0);
            (nu.powf(q / pf) + nv.powf(q / pf), (0.5 * (nf + ng)).powf(q - 1.0))
        }
    };
    let (lhs, rhs) = sides(nf, ng, nu, nv);
    let mut report = CheckReport::new("clarkson", Tier::Exact, "verify", "check_clarkson");
    report.grid(t_grid).columns(&["t", "lhs_t", "rhs_t", "excess_t"]);
    report.tolerance = EXACT_SLACK;
    let mut pointwise = f64::NEG_INFINITY;
    for (i, &t) in t_grid.iter().enumerate() {
        let at = |k: usize| parts[k].0 + parts[k].1[i];
        let (l, r) = sides(at(0), at(1), at(2), at(3));
        let ex = if r > 0.0 { l / r - 1.0 } else { 0.0 };
        pointwise = pointwise.max(ex);
        report.row(vec![t.to_f(), l, r, ex]);
    }
    let excess = if rhs > 0.0 { lhs / rhs - 1.0 } else { 0.0 };
    report.constant("lhs", lhs).constant("rhs", rhs).constant("excess", excess).constant("pointwise_excess", pointwise);
    report.vacuous = rhs == 0.0;
    report.passed = lhs <= rhs * (1.0 + EXACT_SLACK);
    if pointwise > EXACT_SLACK {
        report.flag("per-time inequality violated");
    }
    report.worst_case =
        format!("lhs {lhs:.12e}, rhs {rhs:.12e}, relative excess {excess:.3e} (per-time worst {pointwise:.3e})");
    Ok(report)
}

/// `sup_t 2 E_t(f) = 2 E(f)` and `||f||_{2,1/2}(t)^2 = 2 E_t(f)`. The sup
/// is approached as `t -> 0`, so the grid must reach `0.01 / lambda_max`.
pub fn check_energy_identity<T: Real>(model: &SpectralHeatModel<T>, f: &[T], t_grid: &[T]) -> Result<CheckReport> {
    check_time_grid(t_grid)?;
    let need = T::lit(0.01) / model.lambda_max();
    let tmin = t_grid.iter().copied().fold(T::infinity(), T::min);
    if tmin > need * T::lit(1.0 + 1e-9) {
        return Err(Error::Constraint(format!("grid starts at {tmin:e}; the sup needs t <= {need:e}")));
    }
    let two = T::lit(2.0);
    let prof = besov_seminorm(model, f, two, T::lit(0.5), t_grid)?;
    let target = (two * dirichlet_energy(model, f)?).to_f();
    let mut report = CheckReport::new("energy_identity", Tier::Exact, "verify", "check_energy_identity");
    report.grid(t_grid).columns(&["t", "two_e_t", "profile_sq", "rel_diff"]);
    let (mut sup, mut worst_id) = (0.0f64, 0.0f64);
    for (i, &t) in t_grid.iter().enumerate() {
        let e = (two * approx_energy(model, f, t)?).to_f();
        let sq = prof.value_at(i).powi(2);
        let rel = if e == 0.0 && sq == 0.0 { 0.0 } else { (sq - e).abs() / e.abs().max(sq.abs()) };
        sup = sup.max(e);
        worst_id = worst_id.max(rel);
        report.row(vec![t.to_f(), e, sq, rel]);
    }
    let gap = if target == 0.0 { sup } else { (sup - target).abs() / target };
    report
        .constant("two_energy", target)
        .constant("sup_two_e_t", sup)
        .constant("relative_gap", gap)
        .constant("identity_error", worst_id);
    report.tolerance = 0.01;
    report.vacuous = target == 0.0 && sup == 0.0;
    report.passed = gap <= 0.01 && worst_id <= EXACT_SLACK;
    report.worst_case =
        format!("sup 2E_t = {sup:.10e} vs 2E = {target:.10e} (gap {gap:.2e}); profile identity error {worst_id:.2e}");
    Ok(report)
}

fn regularization_constant<T: Real>(
    model: &SpectralHeatModel<T>,
    f: &[T],
    p: T,
    t_grid: &[T],
    norm: f64,
) -> Result<(f64, f64, Vec<SeminormProfile>)> {
    let half = T::lit(0.5);
    let mut best = (0.0f64, 0.0f64);
    let mut profs = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let g = apply_semigroup(model, f, t)?;
        let prof = besov_seminorm(model, &g, p, half, t_grid)?;
        let c = t.to_f().sqrt() * prof.sup / norm;
        if c > best.0 {
            best = (c, t.to_f());
        }
        profs.push(prof);
    }
    Ok((best.0, best.1, profs))
}

/// `sup_t t^{1/2} ||P_t f||_{p,1/2} / ||f||_p`, for `1 < p <= 2`. The constant
/// is fitted on `t_grid` and again on a twice-refined grid; passes when it is
/// finite and the two agree within 50%.
pub fn check_semigroup_regularization<T: Real>(
    model: &SpectralHeatModel<T>,
    f: &[T],
    p: T,
    t_grid: &[T],
) -> Result<CheckReport> {
    if !(p > T::one() && p <= T::lit(2.0)) {
        return Err(Error::Constraint(format!("need 1 < p <= 2, got {p}")));
    }
    check_field(f, model.len())?;
    check_time_grid(t_grid)?;
    let mut report =
        CheckReport::new("semigroup_regularization", Tier::Empirical, "verify", "check_semigroup_regularization");
    report.grid(t_grid);
    report.tolerance = 0.5;
    if is_constant(f) {
        report.passed = true;
        report.vacuous = true;
        report.worst_case = "constant field: P_t f is constant".into();
        return Ok(report);
    }
    let norm = lp_norm(model.measure(), f, p).to_f();
    let (c, at, profs) = regularization_constant(model, f, p, t_grid, norm)?;
    let fine = refine_grid(t_grid);
    let (c_fine, _, _) = regularization_constant(model, f, p, &fine, norm)?;
    report.columns(&["t", "scaled_seminorm"]);
    for (&t, prof) in t_grid.iter().zip(&profs) {
        report.row(vec![t.to_f(), t.to_f().sqrt() * prof.sup / norm]);
    }
    let change = c_fine / c - 1.0;
    report.constant("c", c).constant("c_refined", c_fine).constant("refinement_change", change);
    report.passed = c.is_finite() && c > 0.0 && change.abs() <= 0.5;
    report.worst_case = format!("C = {c:.4e} at t = {at:.3e}; refined {c_fine:.4e} ({:+.1}%)", 100.0 * change);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::{random_field, tests::two_point};
    use crate::fit::log_grid;
    use crate::mmspace::{build_circle_grid, build_gasket};

    #[test]
    fn pseudo_poincare_holds_on_gasket() {
        let g = build_gasket::<f64>(3).unwrap();
        let m = SpectralHeatModel::from_space(&g).unwrap();
        let grid = m.default_time_grid();
        for seed in 0..3 {
            let f = random_field::<f64>(g.len(), seed);
            for (p, a) in [(1.0, 0.3), (2.0, 0.5), (1.5, 0.43)] {
                let r = check_pseudo_poincare(&m, &f, p, a, &grid).unwrap();
                assert!(r.passed, "{}", r.summary());
            }
        }
        let r = check_pseudo_poincare(&m, &vec![2.0; g.len()], 1.0, 0.5, &grid).unwrap();
        assert!(r.passed && r.vacuous);
    }

    #[test]
    fn interpolation_parameters_are_validated() {
        let bad = InterpolationParams { p: 2.0, q: 1.0, r: 3.0, beta: 0.5, gamma: 0.1, theta: 0.5 };
        assert!(bad.validate().is_err());
        let ok = InterpolationParams::with_p_from(1.0, 3.0, 0.5, 0.1, 0.4);
        ok.validate().unwrap();
        assert!((ok.alpha() - 0.26).abs() < 1e-15);
    }

    #[test]
    fn interpolation_holds() {
        let g = build_gasket::<f64>(3).unwrap();
        let m = SpectralHeatModel::from_space(&g).unwrap();
        let f = random_field::<f64>(g.len(), 5);
        let params = InterpolationParams::with_p_from(1.2, 4.0, 0.6, 0.2, 0.35);
        let r = check_interpolation(&m, &f, &params, &m.default_time_grid()).unwrap();
        assert!(r.passed, "{}", r.summary());
    }

    #[test]
    fn clarkson_rejects_p_one() {
        let s = two_point();
        let m = SpectralHeatModel::from_space(&s).unwrap();
        assert!(check_clarkson(&m, &[1.0, 0.0], &[0.0, 1.0], 1.0, 0.5, &[0.1]).is_err());
    }

    #[test]
    fn clarkson_per_time_form_always_holds() {
        let s = build_circle_grid::<f64>(64).unwrap();
        let m = SpectralHeatModel::from_space(&s).unwrap();
        let grid = m.default_time_grid();
        for seed in 0..4 {
            let f = random_field::<f64>(64, 2 * seed);
            let g = random_field::<f64>(64, 2 * seed + 1);
            for p in [1.5, 2.0, 3.0] {
                let r = check_clarkson(&m, &f, &g, p, 0.3, &grid).unwrap();
                assert!(r.fitted_constants["pointwise_excess"] <= 1e-9, "{}", r.summary());
            }
        }
    }

    #[test]
    fn energy_identity_on_circle() {
        let s = build_circle_grid::<f64>(128).unwrap();
        let m = SpectralHeatModel::from_space(&s).unwrap();
        let lo = 0.01 / m.lambda_max();
        let grid = log_grid(lo, 1.0 / m.lambda_1(), 8);
        let f = random_field::<f64>(128, 3);
        let r = check_energy_identity(&m, &f, &grid).unwrap();
        assert!(r.passed, "{}", r.summary());
        let late = log_grid(0.1 / m.lambda_max(), 1.0, 8);
        assert!(matches!(check_energy_identity(&m, &f, &late), Err(Error::Constraint(_))));
    }

    #[test]
    fn regularization_constant_is_stable() {
        let g = build_gasket::<f64>(3).unwrap();
        let m = SpectralHeatModel::from_space(&g).unwrap();
        let f = random_field::<f64>(g.len(), 8);
        let r = check_semigroup_regularization(&m, &f, 1.5, &m.default_time_grid()).unwrap();
        assert!(r.passed, "{}", r.summary());
        assert!(check_semigroup_regularization(&m, &f, 2.5, &m.default_time_grid()).is_err());
    }
}
