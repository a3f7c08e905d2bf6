//! Job runner for the standard check suites on one space and model.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::*;
use crate::besov::random_field;
use crate::error::{Error, Result};
use crate::fit::log_grid;
use crate::geometry::{discrete_coarea_identity, perimeter_vs_boundary, pt_indicator_decay, PointSet};
use crate::heat::{verify_subgaussian, ModelFamily, ModelKernelParams, SpectralHeatModel};
use crate::mmspace::{MetricMeasureSpace, SpaceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Exact,
    Empirical,
    All,
}

impl Suite {
    fn includes(self, tier: Tier) -> bool {
        matches!((self, tier), (Suite::All, _) | (Suite::Exact, Tier::Exact) | (Suite::Empirical, Tier::Empirical))
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Suite::Exact),
            "empirical" => Ok(Suite::Empirical),
            "all" => Ok(Suite::All),
            _ => Err(Error::InvalidArgument(format!("unknown suite {s:?}; expected exact, empirical or all"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Random functions (or pairs) per randomized exact check.
    pub trials: usize,
    /// Points per decade of the exact-check grid `[0.01/lambda_max, 1/lambda_1]`.
    pub points_per_decade: usize,
    /// Samples for the sub-Gaussian fit.
    pub sample_size: usize,
    pub subgaussian_r2_min: f64,
    /// Largest accepted spread of `||1_E|| / |dE|` over the cell family.
    pub perimeter_max_spread: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            trials: 4,
            points_per_decade: 8,
            sample_size: 2000,
            subgaussian_r2_min: 0.95,
            perimeter_max_spread: 20.0,
        }
    }
}

type Job<'a> = Box<dyn Fn() -> Result<CheckReport> + Send + Sync + 'a>;

/// Failed report standing in for a job that errored.
fn error_report(name: &str, tier: Tier, err: &Error) -> CheckReport {
    let mut r = CheckReport::new(name, tier, "verify", "run_suite");
    r.flag("error");
    r.worst_case = err.to_string();
    r
}

/// Runs every check of `suite` that applies to `space`. Jobs run in
/// parallel; reports come back in a fixed order. A job that errors is
/// reported as a failure.
pub fn run_suite<T: Real>(
    space: &MetricMeasureSpace<T>,
    model: &SpectralHeatModel<T>,
    suite: Suite,
    cfg: &SuiteConfig,
) -> Result<Vec<CheckReport>> {
    model.check_space(space)?;
    if cfg.points_per_decade < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 points per decade, got {}",
            cfg.points_per_decade
        )));
    }
    let n = space.len();
    let exact_grid = log_grid(T::lit(0.01) / model.lambda_max(), T::one() / model.lambda_1(), cfg.points_per_decade);
    let bulk = model.default_time_grid();
    let d_h = space.d_h();
    let d_w = space.d_w().ok();
    let field = |k: u64| random_field::<T>(n, cfg.seed.wrapping_mul(1_000_003).wrapping_add(k));
    let cells: Vec<PointSet<T>> =
        (1..=2).flat_map(|l| space.cells(l)).filter_map(|c| PointSet::from_cells(space, [&c]).ok()).collect();
    let mut jobs: Vec<(&'static str, Tier, Job)> = Vec::new();
    let eg = &exact_grid;

    for i in 0..cfg.trials as u64 {
        for (p, a) in [(1.0, 0.25), (1.0, 0.5), (2.0, 0.25), (2.0, 0.5)] {
            let f = field(i);
            jobs.push((
                "pseudo_poincare",
                Tier::Exact,
                Box::new(move || check_pseudo_poincare(model, &f, T::lit(p), T::lit(a), eg)),
            ));
        }
        let f = field(100 + i);
        jobs.push((
            "interpolation",
            Tier::Exact,
            Box::new(move || {
                let params = InterpolationParams::with_p_from(1.0, 3.0, 0.6, 0.2, 0.5);
                check_interpolation(model, &f, &params, eg)
            }),
        ));
        for p in [1.5, 2.0, 3.0] {
            let (f, g) = (field(200 + 2 * i), field(201 + 2 * i));
            jobs.push((
                "clarkson",
                Tier::Exact,
                Box::new(move || check_clarkson(model, &f, &g, T::lit(p), T::lit(0.3), eg)),
            ));
        }
        let f = field(300 + i);
        jobs.push(("energy_identity", Tier::Exact, Box::new(move || check_energy_identity(model, &f, eg))));
        let f = field(400 + i);
        jobs.push(("discrete_coarea", Tier::Exact, Box::new(move || discrete_coarea_identity(space, &f))));
    }
    if n <= MAX_CHEEGER_POINTS {
        for a in [0.5, 1.0] {
            jobs.push(("cheeger", Tier::Exact, Box::new(move || cheeger_bruteforce(model, space, T::lit(a), eg))));
        }
    }

    if let Some(d_w) = d_w {
        let beta = d_h / d_w;
        let f = field(500);
        jobs.push((
            "weak_sobolev",
            Tier::Empirical,
            Box::new(move || check_weak_sobolev(model, &f, T::one(), T::lit(0.5) * beta, beta)),
        ));
        let f = field(501);
        let bg = &bulk;
        jobs.push((
            "semigroup_regularization",
            Tier::Empirical,
            Box::new(move || check_semigroup_regularization(model, &f, T::lit(1.5), bg)),
        ));
        if space.meta.kind != SpaceKind::Graph {
            let walk = crate::heat::walk_fit_window(model.eigenvalues(), &bulk);
            if d_w > T::one() && walk.len() >= 2 {
                let (size, seed, r2) = (cfg.sample_size, cfg.seed, cfg.subgaussian_r2_min);
                jobs.push((
                    "subgaussian",
                    Tier::Empirical,
                    Box::new(move || verify_subgaussian(model, space, d_h, d_w, size, seed, r2)),
                ));
            }
            let family = default_function_family(space, cfg.seed);
            let kappa = if d_w - d_h > T::zero() { d_w - d_h } else { T::one() };
            jobs.push((
                "be_kappa_bound",
                Tier::Empirical,
                Box::new(move || check_be_kappa(model, space, kappa, &family, bg, BeMode::Bound)),
            ));
            jobs.push((
                "be_kappa_exponent",
                Tier::Empirical,
                Box::new(move || check_be_kappa(model, space, kappa, &[], bg, BeMode::Exponent)),
            ));
        }
        if !cells.is_empty() {
            let cs = &cells;
            jobs.push((
                "isoperimetric",
                Tier::Empirical,
                Box::new(move || check_isoperimetric(model, space, cs, T::lit(0.5) * beta)),
            ));
            let spread = cfg.perimeter_max_spread;
            jobs.push((
                "perimeter_vs_boundary",
                Tier::Empirical,
                Box::new(move || perimeter_vs_boundary(model, space, cs, bg, spread)),
            ));
            jobs.push((
                "pt_indicator_decay",
                Tier::Empirical,
                Box::new(move || pt_indicator_decay(model, space, &cs[0], bg, d_h)),
            ));
        }
        if space.meta.kind == SpaceKind::Circle {
            let fam: Vec<Vec<T>> = vec![
                crate::besov::indicator(n, &(0..n / 2).collect::<Vec<_>>()),
                crate::besov::indicator(n, &(0..n / 4).collect::<Vec<_>>()),
                (0..n).map(|i| T::lit((std::f64::consts::TAU * i as f64 / n as f64).sin())).collect(),
            ];
            let mesh = space.meta.mesh.to_f();
            let diam = space.meta.diameter.to_f();
            for dw in [0.8, 1.5] {
                let params = ModelKernelParams::new(ModelFamily::Nonlocal, d_h.to_f(), dw);
                let grid: Vec<T> = log_grid((0.1 * mesh).powf(dw), diam.powf(dw), 6).into_iter().map(T::lit).collect();
                let fam = fam.clone();
                jobs.push((
                    "nonlocal_equivalence",
                    Tier::Empirical,
                    Box::new(move || check_nonlocal_equivalence(space, &fam, &params, &grid, T::lit(2.0), T::lit(0.3))),
                ));
            }
        }
    }

    jobs.retain(|(_, tier, _)| suite.includes(*tier));
    Ok(jobs.par_iter().map(|(name, tier, job)| job().unwrap_or_else(|e| error_report(name, *tier, &e))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmspace::{build_gasket, random_connected_graph};

    #[test]
    fn exact_suite_passes_on_gasket() {
        let g = build_gasket::<f64>(3).unwrap();
        let m = SpectralHeatModel::from_space(&g).unwrap();
        let cfg = SuiteConfig { trials: 2, ..Default::default() };
        let reports = run_suite(&g, &m, Suite::Exact, &cfg).unwrap();
        assert!(reports.iter().all(|r| r.tier == Tier::Exact));
        for r in &reports {
            assert!(r.passed, "{}", r.summary());
        }
        assert_eq!(reports, run_suite(&g, &m, Suite::Exact, &cfg).unwrap());
    }

    #[test]
    fn small_graph_runs_cheeger() {
        let s = random_connected_graph::<f64>(8, 3).unwrap();
        let m = SpectralHeatModel::from_space(&s).unwrap();
        let cfg = SuiteConfig { trials: 1, ..Default::default() };
        let reports = run_suite(&s, &m, Suite::All, &cfg).unwrap();
        assert!(reports.iter().any(|r| r.name == "cheeger"));
        assert!("nope".parse::<Suite>().is_err());
    }
}
