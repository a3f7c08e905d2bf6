use std::collections::{BTreeMap, BTreeSet};

use super::{Cell, Edge, MetricKind, MetricMeasureSpace, SpaceKind, SpaceMeta};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_GASKET_LEVEL: u32 = 8;

/// `3 (3^n + 1) / 2`.
pub fn gasket_vertex_count(level: u32) -> usize {
    3 * (3usize.pow(level) + 1) / 2
}

/// Upward cell `(i0, j0, side)` in lattice units of the triangular basis
/// `e1 = (1, 0)`, `e2 = (1/2, sqrt(3)/2)` scaled by `2^-level`.
type Tri = (i64, i64, i64);

fn children((i, j, s): Tri) -> [Tri; 3] {
    let h = s / 2;
    [(i, j, h), (i + h, j, h), (i, j + h, h)]
}

fn cells_at(level: u32, top_side: i64) -> Vec<(Vec<u8>, Tri)> {
    let mut cur = vec![(Vec::new(), (0, 0, top_side))];
    for _ in 0..level {
        cur = cur
            .into_iter()
            .flat_map(|(addr, t)| {
                children(t).into_iter().enumerate().map(move |(k, c)| {
                    let mut a = addr.clone();
                    a.push(k as u8);
                    (a, c)
                })
            })
            .collect();
    }
    cur
}

fn corners((i, j, s): Tri) -> [(i64, i64); 3] {
    [(i, j), (i + s, j), (i, j + s)]
}

/// Level-`n` approximation of the compact Sierpinski gasket with unit side.
///
/// Vertices are the corners of the `3^n` level-`n` cells; each cell carries
/// mass `3^-n`, split evenly among its three corners. Edges are the cell
/// sides with unit conductance.
pub fn build_gasket<T: Real>(level: u32) -> Result<MetricMeasureSpace<T>> {
    if level > MAX_GASKET_LEVEL {
        return Err(Error::ResourceBound {
            what: "gasket level",
            value: level as usize,
            limit: MAX_GASKET_LEVEL as usize,
        });
    }
    let side = 1i64 << level;
    let top = cells_at(level, side);

    let mut verts = BTreeSet::new();
    for (_, t) in &top {
        verts.extend(corners(*t).map(|(i, j)| (j, i)));
    }
    let lattice: Vec<(i64, i64)> = verts.into_iter().map(|(j, i)| (i, j)).collect();
    let index: BTreeMap<(i64, i64), usize> = lattice.iter().enumerate().map(|(k, p)| (*p, k)).collect();

    let cell_mass = T::one() / T::from_usize_(3usize.pow(level));
    let third = cell_mass / T::lit(3.0);
    let mut measure = vec![T::zero(); lattice.len()];
    let mut edges = Vec::with_capacity(3 * top.len());
    for (_, t) in &top {
        let c = corners(*t).map(|p| index[&p]);
        for &v in &c {
            measure[v] = measure[v] + third;
        }
        for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[0], c[2])] {
            edges.push(Edge { a: a.min(b), b: a.max(b), w: T::one() });
        }
    }
    edges.sort_by_key(|e| (e.a, e.b));

    let scale = T::one() / T::from_usize_(side as usize);
    let h = T::lit(3.0).sqrt() / T::lit(2.0);
    let coords = lattice
        .iter()
        .map(|&(i, j)| {
            let (fi, fj) = (T::from_i64(i).unwrap(), T::from_i64(j).unwrap());
            vec![(fi + fj / T::lit(2.0)) * scale, fj * h * scale]
        })
        .collect();

    let meta = SpaceMeta {
        name: format!("gasket-{level}"),
        kind: SpaceKind::Gasket,
        level: Some(level),
        d_h: T::lit(3.0).ln() / T::lit(2.0).ln(),
        d_w: Some(T::lit(5.0).ln() / T::lit(2.0).ln()),
        diameter: T::one(),
        mesh: scale,
        metric: MetricKind::Euclidean,
    };
    MetricMeasureSpace::assemble(meta, coords, measure, edges, lattice)
}

/// Lattice coordinates recovered from planar coordinates.
pub(super) fn lattice_from_coords<T: Real>(coords: &[Vec<T>], level: u32) -> Vec<(i64, i64)> {
    let side = (1u64 << level) as f64;
    let h = 3f64.sqrt() / 2.0;
    coords
        .iter()
        .map(|c| {
            let j = (c[1].to_f() / h * side).round();
            let i = (c[0].to_f() * side - j / 2.0).round();
            (i as i64, j as i64)
        })
        .collect()
}

pub(super) fn cells<T: Real>(space: &MetricMeasureSpace<T>, level: u32) -> Vec<Cell> {
    let Some(top_level) = space.meta.level else { return Vec::new() };
    if level > top_level {
        return Vec::new();
    }
    let side = 1i64 << top_level;
    let lattice = space.lattice();
    let index: BTreeMap<(i64, i64), usize> = lattice.iter().enumerate().map(|(k, p)| (*p, k)).collect();
    cells_at(level, side)
        .into_iter()
        .map(|(address, t @ (i0, j0, s))| {
            let members = lattice
                .iter()
                .enumerate()
                .filter(|(_, &(i, j))| i >= i0 && j >= j0 && (i - i0) + (j - j0) <= s)
                .map(|(k, _)| k)
                .collect();
            let corners = corners(t).iter().map(|p| index[p]).collect();
            Cell { level, address, members, corners }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{log_log_fit, log_space};
    use crate::mmspace::mean_ball_mass;

    #[test]
    fn level_zero_triangle() {
        let g = build_gasket::<f64>(0).unwrap();
        assert_eq!(g.len(), 3);
        for m in g.measure() {
            assert!((m - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(g.edges().len(), 3);
    }

    #[test]
    fn vertex_count_recurrence() {
        // oracle: V_{n+1} = 3 V_n - 3 against explicit enumeration
        let mut v = 3;
        for level in 0..=6 {
            let g = build_gasket::<f64>(level).unwrap();
            assert_eq!(g.len(), v, "level {level}");
            assert_eq!(g.len(), gasket_vertex_count(level));
            assert_eq!(g.edges().len(), 3usize.pow(level + 1));
            v = 3 * v - 3;
        }
        assert_eq!(build_gasket::<f64>(1).unwrap().len(), 6);
        assert_eq!(build_gasket::<f64>(3).unwrap().len(), 42);
    }

    #[test]
    fn level_above_limit_rejected() {
        assert!(matches!(build_gasket::<f64>(9), Err(Error::ResourceBound { .. })));
    }

    #[test]
    fn measure_and_geometry() {
        let g = build_gasket::<f64>(4).unwrap();
        g.validate().unwrap();
        assert!((g.meta.mesh - 1.0 / 16.0).abs() < 1e-15);
        assert!((g.meta.diameter - 1.0).abs() < 1e-15);
        // interior vertices carry two cells' worth of mass
        let max = g.measure().iter().cloned().fold(0.0, f64::max);
        let min = g.measure().iter().cloned().fold(1.0, f64::min);
        assert!((max / min - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_roundtrip() {
        let g = build_gasket::<f64>(5).unwrap();
        assert_eq!(lattice_from_coords(g.coords(), 5), g.lattice());
    }

    #[test]
    fn cells_partition_mass() {
        let g = build_gasket::<f64>(4).unwrap();
        for level in 0..=3 {
            let cells = g.cells(level);
            assert_eq!(cells.len(), 3usize.pow(level));
            for c in &cells {
                assert_eq!(c.corners.len(), 3);
                assert_eq!(c.members.len(), gasket_vertex_count(4 - level));
            }
        }
    }

    #[test]
    fn ahlfors_slope_level_three() {
        // [3 mesh, diam/4] is empty at level 3; start at the mesh instead
        let g = build_gasket::<f64>(3).unwrap();
        let grid = log_space(g.meta.mesh, 0.25, 8);
        let fit = log_log_fit(&grid, &mean_ball_mass(&g, &grid), 6).unwrap();
        assert!((fit.slope - 1.585).abs() < 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn f32_generator() {
        let g = build_gasket::<f32>(3).unwrap();
        assert_eq!(g.len(), 42);
        let total: f32 = g.measure().iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}
