use std::sync::OnceLock;

use besovlab::besov::{approx_energy, besov_seminorm, dirichlet_energy, random_field};
use besovlab::fit::log_space;
use besovlab::geometry::{discrete_coarea_identity, fractional_perimeter, pair_count, pt_indicator_decay, PointSet};
use besovlab::heat::{apply_semigroup, SpectralHeatModel};
use besovlab::mmspace::{build_gasket, random_connected_graph};
use besovlab::Space;
use proptest::prelude::*;

type Model = SpectralHeatModel<f64>;

fn gasket3() -> &'static (Space, Model) {
    static G: OnceLock<(Space, Model)> = OnceLock::new();
    G.get_or_init(|| {
        let s: Space = build_gasket(3).unwrap();
        let m = Model::from_space(&s).unwrap();
        (s, m)
    })
}

const N: usize = 42;

fn field() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0..4.0f64, N)
}

/// A proper non-empty subset of the gasket's points.
fn subset() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(0..N, 1..N).prop_map(|s| s.into_iter().collect())
}

fn norm(f: &[f64], p: f64, alpha: f64) -> f64 {
    let (_, m) = gasket3();
    besov_seminorm(m, f, p, alpha, &m.default_time_grid()).unwrap().sup
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seminorm_triangle_inequality(f in field(), g in field(), p in 1.0..3.0f64, alpha in 0.1..0.9f64) {
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let (a, b, c) = (norm(&f, p, alpha), norm(&g, p, alpha), norm(&sum, p, alpha));
        prop_assert!(c <= (a + b) * (1.0 + 1e-12), "{c} > {a} + {b}");
    }

    #[test]
    fn seminorm_homogeneous_under_powers_of_two(f in field(), k in -6i32..6, p in 1.0..3.0f64) {
        let c = 2f64.powi(k);
        let scaled: Vec<f64> = f.iter().map(|v| -c * v).collect();
        let (a, b) = (norm(&f, p, 0.5), norm(&scaled, p, 0.5));
        prop_assert!((b - c * a).abs() <= 1e-12 * c * a, "{b} vs {}", c * a);
    }

    #[test]
    fn smaller_alpha_is_controlled_on_a_bounded_grid(f in field(), lo in 0.05..0.5f64, gap in 0.05..0.4f64) {
        // t^{-lo} <= t_max^{hi - lo} t^{-hi} for t <= t_max
        let (_, m) = gasket3();
        let grid = m.default_time_grid();
        let t_max = grid[grid.len() - 1];
        let hi = lo + gap;
        let (a, b) = (norm(&f, 2.0, lo), norm(&f, 2.0, hi));
        prop_assert!(a <= t_max.powf(gap) * b * (1.0 + 1e-12));
    }

    #[test]
    fn approximate_energy_below_dirichlet_energy(f in field(), t in 1e-6..10.0f64) {
        let (_, m) = gasket3();
        let e = dirichlet_energy(m, &f).unwrap();
        let a = approx_energy(m, &f, t).unwrap();
        prop_assert!(a <= e * (1.0 + 1e-12), "{a} > {e}");
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn energy_identity_at_small_time(f in field()) {
        let (_, m) = gasket3();
        let e = dirichlet_energy(m, &f).unwrap();
        let a = approx_energy(m, &f, 1e-4 / m.lambda_max()).unwrap();
        prop_assert!((a / e - 1.0).abs() < 1e-3);
    }

    #[test]
    fn pair_count_symmetric_and_monotone(ids in subset(), r1 in 0.05..1.0f64, r2 in 0.05..1.0f64) {
        let (s, _) = gasket3();
        prop_assume!(ids.len() < N);
        let e = PointSet::new(s, ids).unwrap();
        let c = e.complement(s).unwrap();
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let (a, b) = (pair_count(s, &e, lo).unwrap(), pair_count(s, &e, hi).unwrap());
        prop_assert_eq!(a, pair_count(s, &c, lo).unwrap());
        prop_assert!(a <= b);
        prop_assert!(b <= e.mass() * (1.0 - e.mass()) + 1e-15);
    }

    #[test]
    fn coarea_identity_holds(levels in prop::collection::vec(-3i32..3, N), scale in 0.1..10.0f64) {
        let (s, _) = gasket3();
        let u: Vec<f64> = levels.iter().map(|l| *l as f64 * scale).collect();
        let r = discrete_coarea_identity(s, &u).unwrap();
        prop_assert!(r.passed, "{}", r.worst_case);
    }

    #[test]
    fn indicator_decay_identity(ids in subset()) {
        let (s, m) = gasket3();
        prop_assume!(ids.len() < N);
        let e = PointSet::new(s, ids).unwrap();
        let r = pt_indicator_decay(m, s, &e, &m.default_time_grid(), s.d_h()).unwrap();
        prop_assert!(r.fitted_constants["identity_error"] <= 1e-9);
    }

    #[test]
    fn perimeter_rescales_with_alpha(ids in subset(), a in 0.1..0.9f64, b in 0.1..0.9f64) {
        let (s, _) = gasket3();
        prop_assume!(ids.len() < N);
        let e = PointSet::new(s, ids).unwrap();
        let grid = log_space(s.meta.mesh, s.meta.diameter / 4.0, 6);
        let d_w = s.d_w().unwrap();
        let (pa, pb) = (fractional_perimeter(s, &e, a, &grid).unwrap(), fractional_perimeter(s, &e, b, &grid).unwrap());
        for ((r, va), vb) in grid.iter().zip(&pa.values).zip(&pb.values) {
            let expect = va * r.powf((a - b) * d_w);
            prop_assert!((vb - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
        }
    }

    #[test]
    fn semigroup_is_positive_and_contracting(f in field(), t in 1e-5..1.0f64) {
        let (s, m) = gasket3();
        let g = apply_semigroup(m, &f, t).unwrap();
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        prop_assert!(sup(&g) <= sup(&f) * (1.0 + 1e-10));
        let pos: Vec<f64> = f.iter().map(|v| v.abs()).collect();
        prop_assert!(apply_semigroup(m, &pos, t).unwrap().iter().all(|v| *v >= -1e-10));
        let mean = |v: &[f64]| v.iter().zip(s.measure()).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((mean(&g) - mean(&f)).abs() <= 1e-10 * sup(&f).max(1.0));
    }

    #[test]
    fn seeded_generators_are_deterministic(seed in any::<u64>(), n in 4usize..12) {
        prop_assert_eq!(random_field::<f64>(n, seed), random_field::<f64>(n, seed));
        let a: Space = random_connected_graph(n, seed).unwrap();
        let b: Space = random_connected_graph(n, seed).unwrap();
        prop_assert_eq!(besovlab::mmspace::io::to_json(&a).unwrap(), besovlab::mmspace::io::to_json(&b).unwrap());
        prop_assert_eq!(a.components().len(), 1);
    }
}

#[test]
fn single_precision_tracks_double() {
    let s32 = build_gasket::<f32>(3).unwrap();
    let m32 = SpectralHeatModel::from_space(&s32).unwrap();
    let f64s = random_field::<f64>(N, 17);
    let f32s: Vec<f32> = f64s.iter().map(|v| *v as f32).collect();
    let a = besov_seminorm(&m32, &f32s, 2.0f32, 0.5, &m32.default_time_grid()).unwrap().sup;
    let b = norm(&f64s, 2.0, 0.5);
    assert!((a / b - 1.0).abs() < 1e-3, "{a} vs {b}");
}
