use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SpectralHeatModel;
use crate::error::{Error, Result};
use crate::fit::{linear_fit, log_log_fit, ScalingFit};
use crate::mmspace::MetricMeasureSpace;
use crate::scalar::{kahan_sum, Real};
use crate::verify::{CheckReport, Tier};

/// Below `t lambda_max = LATTICE_FLOOR` the kernel still resolves single
/// lattice steps.
pub const LATTICE_FLOOR: f64 = 20.0;
/// Above the time where the heat trace drops to `MODE_FLOOR` the ground
/// state carries more than 5% of the on-diagonal kernel.
pub const MODE_FLOOR: f64 = 20.0;

/// `sum_k e^{-lambda_k t}`, which equals the point average
/// `sum_x mu_x p_t(x, x)` because the modes are `mu`-normalized.
pub fn heat_trace<T: Real>(eigenvalues: &[T], t: T) -> T {
    kahan_sum(eigenvalues.iter().map(|l| (-*l * t).exp()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkDimensionFit {
    /// `log Z(t)` against `log t`; the slope is `-d_H / d_W`.
    pub fit: ScalingFit,
    pub d_w: f64,
    /// Two standard errors, propagated from the slope.
    pub d_w_ci: (f64, f64),
}

/// The part of `t_grid` where the on-diagonal kernel is in its scaling
/// regime: `t lambda_max >= 20` and heat trace `>= 20`.
pub fn walk_fit_window<T: Real>(eigenvalues: &[T], t_grid: &[T]) -> Vec<T> {
    let lmax = eigenvalues[eigenvalues.len() - 1];
    t_grid
        .iter()
        .copied()
        .filter(|&t| t * lmax >= T::lit(LATTICE_FLOOR) && heat_trace(eigenvalues, t) >= T::lit(MODE_FLOOR))
        .collect()
}

/// Regress the log of the point-averaged diagonal `p_t(x, x)` against
/// `log t` and return `d_W = -d_H / slope`. The grid must lie in the bulk
/// window `[0.1 / lambda_max, 0.1 / lambda_1]`; only its scaling part
/// (see [`walk_fit_window`]) enters the regression.
pub fn fit_walk_dimension<T: Real>(eigenvalues: &[T], d_h: T, t_grid: &[T]) -> Result<WalkDimensionFit> {
    let n = eigenvalues.len();
    if n < 3 {
        return Err(Error::DegenerateWindow("spectrum too short".into()));
    }
    let lo = T::lit(0.1) / eigenvalues[n - 1];
    let hi = T::lit(0.1) / eigenvalues[1];
    let slack = T::lit(1e-9);
    if t_grid.iter().any(|t| *t < lo * (T::one() - slack) || *t > hi * (T::one() + slack)) {
        return Err(Error::DegenerateWindow(format!(
            "times outside the bulk window [{:e}, {:e}]",
            lo.to_f(),
            hi.to_f()
        )));
    }
    let used = walk_fit_window(eigenvalues, t_grid);
    if used.len() < 4 {
        return Err(Error::DegenerateWindow(format!("{} times in the scaling regime, need 4", used.len())));
    }
    let z: Vec<T> = used.iter().map(|t| heat_trace(eigenvalues, *t)).collect();
    let fit = log_log_fit(&used, &z, 4)?;
    if !(fit.slope < 0.0) {
        return Err(Error::DegenerateInput(format!("heat trace slope {} is not negative", fit.slope)));
    }
    let dh = d_h.to_f();
    let d_w = -dh / fit.slope;
    let half = 2.0 * dh * fit.slope_stderr / (fit.slope * fit.slope);
    Ok(WalkDimensionFit { d_w, d_w_ci: (d_w - half, d_w + half), fit })
}

/// Fit `log p_t(x,y) + (d_H/d_W) log t = log c3 - c4 (d^{d_W}/t)^{1/(d_W-1)}`
/// on random `(t, x, y)` samples and report the fit quality.
///
/// Times come from the scaling part of the bulk window, pairs from
/// `0 < d(x, y) <= diameter / 4`. Kernel values below `1e-12` are numerical
/// noise and are skipped. Passes when `R^2 >= r2_min`.
pub fn verify_subgaussian<T: Real>(
    model: &SpectralHeatModel<T>,
    space: &MetricMeasureSpace<T>,
    d_h: T,
    d_w: T,
    sample_size: usize,
    seed: u64,
    r2_min: f64,
) -> Result<CheckReport> {
    if !(d_w > T::one()) {
        return Err(Error::Constraint(format!("sub-Gaussian form needs d_W > 1, got {d_w}")));
    }
    let mut report = CheckReport::new("subgaussian", Tier::Empirical, "heat", "verify_subgaussian");
    let times = walk_fit_window(model.eigenvalues(), &model.default_time_grid());
    if times.len() < 2 {
        return Err(Error::DegenerateWindow("no scaling regime in the bulk time window".into()));
    }
    report.grid(&times);
    let (tlo, thi) = (times[0].to_f().ln(), times[times.len() - 1].to_f().ln());
    let n = space.len();
    let rmax = space.meta.diameter / T::lit(4.0);
    let (dh, dw) = (d_h.to_f(), d_w.to_f());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    report.columns(&["t", "x", "y", "d", "p_t", "z", "log_p_scaled"]);
    let mut attempts = 0;
    while xs.len() < sample_size && attempts < 50 * sample_size.max(1) {
        attempts += 1;
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let d = space.dist(x, y);
        if x == y || d > rmax {
            continue;
        }
        let t = T::lit(rng.gen_range(tlo..=thi).exp());
        let k = model.active_modes(t);
        let p = kahan_sum((0..k).map(|j| (-model.eigenvalues()[j] * t).exp() * model.phi(x, j) * model.phi(y, j)));
        if !(p.to_f() > 1e-12) {
            continue;
        }
        let (tf, df, pf) = (t.to_f(), d.to_f(), p.to_f());
        let z = (df.powf(dw) / tf).powf(1.0 / (dw - 1.0));
        let v = pf.ln() + dh / dw * tf.ln();
        xs.push(z);
        ys.push(v);
        report.row(vec![tf, x as f64, y as f64, df, pf, z, v]);
    }
    if xs.len() < 4 {
        return Err(Error::DegenerateWindow(format!("only {} usable samples", xs.len())));
    }
    let (slope, intercept, r2, _) = linear_fit(&xs, &ys)?;
    let widen = 10f64.ln();
    let mut violations = 0usize;
    let mut worst = (0.0, 0usize);
    for (i, (z, v)) in xs.iter().zip(&ys).enumerate() {
        let resid = (v - (intercept + slope * z)).abs();
        if resid > widen {
            violations += 1;
        }
        if resid > worst.0 {
            worst = (resid, i);
        }
    }
    let frac = violations as f64 / xs.len() as f64;
    report
        .constant("r_squared", r2)
        .constant("c3", intercept.exp())
        .constant("c4", -slope)
        .constant("violation_fraction", frac)
        .constant("samples", xs.len() as f64);
    report.tolerance = r2_min;
    report.passed = r2 >= r2_min;
    let w = &report.details[worst.1];
    report.worst_case = format!(
        "R^2 = {r2:.4}; largest log-residual {:.3} at t={:e}, d={:e}; {:.1}% outside 10x band",
        worst.0,
        w[0],
        w[3],
        100.0 * frac
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{assemble_generator, spectrum_only};
    use crate::mmspace::build_circle_grid;

    #[test]
    fn circle_walk_dimension() {
        let s = build_circle_grid::<f64>(1024).unwrap();
        let ev = spectrum_only(&assemble_generator(&s).unwrap()).unwrap();
        let grid = crate::fit::log_grid(0.1 / ev[ev.len() - 1], 0.1 / ev[1], 16);
        let fit = fit_walk_dimension(&ev, 1.0, &grid).unwrap();
        assert!((fit.d_w - 2.0).abs() < 0.05, "d_W {}", fit.d_w);
        assert!(fit.d_w_ci.0 < fit.d_w && fit.d_w < fit.d_w_ci.1);
    }

    #[test]
    fn grid_outside_bulk_rejected() {
        let s = build_circle_grid::<f64>(64).unwrap();
        let ev = spectrum_only(&assemble_generator(&s).unwrap()).unwrap();
        let grid = crate::fit::log_grid(1e-9, 1.0, 16);
        assert!(fit_walk_dimension(&ev, 1.0, &grid).is_err());
    }

    #[test]
    fn trace_is_mean_diagonal() {
        let s = crate::mmspace::build_gasket::<f64>(3).unwrap();
        let m = SpectralHeatModel::from_space(&s).unwrap();
        let t = 1e-3;
        let k = crate::heat::heat_kernel(&m, t).unwrap();
        let diag: f64 = (0..s.len()).map(|x| s.measure()[x] * k.get(x, x)).sum();
        assert!((diag - heat_trace(m.eigenvalues(), t)).abs() < 1e-10);
    }

    #[test]
    fn circle_is_gaussian() {
        let s = build_circle_grid::<f64>(512).unwrap();
        let m = SpectralHeatModel::from_space(&s).unwrap();
        let r = verify_subgaussian(&m, &s, 1.0, 2.0, 400, 7, 0.98).unwrap();
        assert!(r.passed, "{}", r.worst_case);
        // the exact Gaussian has c4 = 1/4
        let c4 = r.fitted_constants["c4"];
        assert!((c4 - 0.25).abs() < 0.05, "c4 {c4}");
        let again = verify_subgaussian(&m, &s, 1.0, 2.0, 400, 7, 0.98).unwrap();
        assert_eq!(r, again);
    }
}
