//! Heat seminorms of a non-local (jump-type) kernel against their metric
//! counterparts.

use super::{CheckReport, Tier};
use crate::besov::{besov_seminorm, check_field, is_constant, metric_pair_mass, singular_seminorm_with};
use crate::error::{Error, Result};
use crate::heat::{KernelTable, ModelFamily, ModelKernelParams, ModelKernelSource};
use crate::mmspace::MetricMeasureSpace;
use crate::scalar::Real;

pub const NONLOCAL_MAX_SPREAD: f64 = 20.0;

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(0.0, f64::max);
    hi / lo
}

/// For each `f` in the family, with the normalized non-local model kernel
/// `p_t` of `params`:
///
/// - `||f||_{1,1} / W_{1,1}(f)`, where `W_{1,1}` weights pairs by
///   `d^{-(d_H + d_W)}` with the kernel's own exponents;
/// - `||f||_{p,alpha} / sup_r N^{alpha d_W}_p(f, r)`, the metric side taken
///   over the radii `r = t^{1/d_W}` (those up to the diameter) with the
///   kernel's `d_H`, `alpha < 1/p`.
///
/// Passes when both ratios have spread at most 20 across the family.
pub fn check_nonlocal_equivalence<T: Real>(
    space: &MetricMeasureSpace<T>,
    family: &[Vec<T>],
    params: &ModelKernelParams,
    t_grid: &[T],
    p: T,
    alpha: T,
) -> Result<CheckReport> {
    if params.family != ModelFamily::Nonlocal {
        return Err(Error::Constraint("the equivalence is for the non-local family".into()));
    }
    if !(alpha > T::zero() && alpha * p < T::one()) {
        return Err(Error::Constraint(format!("need 0 < alpha < 1/p, got alpha = {alpha}, p = {p}")));
    }
    if family.is_empty() {
        return Err(Error::DegenerateInput("empty function family".into()));
    }
    for (i, f) in family.iter().enumerate() {
        check_field(f, space.len())?;
        if is_constant(f) {
            return Err(Error::DegenerateInput(format!("function {i} is constant; the ratios are undefined")));
        }
    }
    let src = ModelKernelSource::new(space, *params)?;
    let table = KernelTable::build(&src, t_grid)?;
    let (d_h, d_w) = (T::lit(params.d_h), T::lit(params.d_w));
    let mut radii: Vec<T> =
        t_grid.iter().map(|t| t.powf(T::one() / d_w)).filter(|r| *r <= space.meta.diameter).collect();
    radii.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    radii.dedup();
    if radii.is_empty() {
        return Err(Error::DegenerateWindow("no matched radius below the diameter".into()));
    }
    let a = alpha * d_w;
    let mut report = CheckReport::new("nonlocal_equivalence", Tier::Empirical, "verify", "check_nonlocal_equivalence");
    report.grid(t_grid).columns(&[
        "function",
        "besov_1_1",
        "w_1_1",
        "ratio_1",
        "besov_p_alpha",
        "metric_sup",
        "ratio_p",
    ]);
    let (mut r1, mut r2) = (Vec::new(), Vec::new());
    for (i, f) in family.iter().enumerate() {
        let b11 = besov_seminorm(&table, f, T::one(), T::one(), t_grid)?;
        let w = singular_seminorm_with(space, f, d_h + d_w)?.to_f();
        let bpa = besov_seminorm(&table, f, p, alpha, t_grid)?;
        let m = metric_pair_mass(space, f, p, &radii)?;
        let n = radii
            .iter()
            .zip(&m)
            .map(|(r, m)| (r.powf(-a - d_h / p) * m.max(T::zero()).powf(T::one() / p)).to_f())
            .fold(0.0, f64::max);
        for fl in b11.flags.iter().chain(&bpa.flags) {
            report.flag(format!("function {i}: {fl}"));
        }
        r1.push(b11.sup / w);
        r2.push(bpa.sup / n);
        report.row(vec![i as f64, b11.sup, w, b11.sup / w, bpa.sup, n, bpa.sup / n]);
    }
    let (s1, s2) = (spread(&r1), spread(&r2));
    report.constant("spread_1_1", s1).constant("spread_p_alpha", s2);
    report.tolerance = NONLOCAL_MAX_SPREAD;
    report.passed = s1 <= NONLOCAL_MAX_SPREAD && s2 <= NONLOCAL_MAX_SPREAD;
    report.worst_case = format!(
        "d_H = {}, d_W = {}: ||f||_(1,1)/W spread {s1:.3}, ||f||_(p,a)/N spread {s2:.3}",
        params.d_h, params.d_w
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::indicator;
    use crate::fit::log_grid;
    use crate::mmspace::build_circle_grid;

    #[test]
    fn circle_family_is_comparable() {
        let n = 128;
        let s = build_circle_grid::<f64>(n).unwrap();
        let fam: Vec<Vec<f64>> = vec![
            indicator(n, &(0..n / 2).collect::<Vec<_>>()),
            indicator(n, &(0..n / 4).collect::<Vec<_>>()),
            (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect(),
        ];
        for d_w in [0.8, 1.5] {
            let params = ModelKernelParams::new(ModelFamily::Nonlocal, 1.0, d_w);
            let mesh = 1.0 / n as f64;
            let grid = log_grid((0.1 * mesh).powf(d_w), 0.5f64.powf(d_w), 6);
            let r = check_nonlocal_equivalence(&s, &fam, &params, &grid, 2.0, 0.3).unwrap();
            assert!(r.passed, "{}", r.summary());
        }
    }

    #[test]
    fn rejects_bad_input() {
        let s = build_circle_grid::<f64>(16).unwrap();
        let params = ModelKernelParams::new(ModelFamily::Nonlocal, 1.0, 1.0);
        let fam = vec![vec![1.0; 16]];
        assert!(matches!(
            check_nonlocal_equivalence(&s, &fam, &params, &[0.01], 1.0, 0.5),
            Err(Error::DegenerateInput(_))
        ));
        let fam = vec![indicator(16, &[0, 1])];
        assert!(check_nonlocal_equivalence(&s, &fam, &params, &[0.01], 2.0, 0.6).is_err());
    }
}
