use super::{Cell, Edge, MetricKind, MetricMeasureSpace, SpaceKind, SpaceMeta};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_CARPET_LEVEL: u32 = 4;

/// A cell survives iff no base-3 digit position has both digits equal to 1.
fn survives(mut i: i64, mut j: i64, level: u32) -> bool {
    for _ in 0..level {
        if i % 3 == 1 && j % 3 == 1 {
            return false;
        }
        i /= 3;
        j /= 3;
    }
    true
}

/// Level-`n` Sierpinski carpet on the unit square, discretized by the
/// centers of its `8^n` surviving cells with uniform mass and side-adjacency
/// edges of unit conductance. The walk dimension is left unset.
pub fn build_carpet<T: Real>(level: u32) -> Result<MetricMeasureSpace<T>> {
    if level > MAX_CARPET_LEVEL {
        return Err(Error::ResourceBound {
            what: "carpet level",
            value: level as usize,
            limit: MAX_CARPET_LEVEL as usize,
        });
    }
    let side = 3i64.pow(level);
    let mut lattice = Vec::with_capacity(8usize.pow(level));
    for j in 0..side {
        for i in 0..side {
            if survives(i, j, level) {
                lattice.push((i, j));
            }
        }
    }
    let index = |i: i64, j: i64| lattice.binary_search_by_key(&(j, i), |&(a, b)| (b, a)).ok();
    let mut edges = Vec::new();
    for (k, &(i, j)) in lattice.iter().enumerate() {
        for (di, dj) in [(1, 0), (0, 1)] {
            if let Some(m) = index(i + di, j + dj) {
                edges.push(Edge { a: k, b: m, w: T::one() });
            }
        }
    }
    edges.sort_by_key(|e| (e.a, e.b));

    let s = T::from_i64(side).unwrap();
    let half = T::lit(0.5);
    let coords = lattice
        .iter()
        .map(|&(i, j)| vec![(T::from_i64(i).unwrap() + half) / s, (T::from_i64(j).unwrap() + half) / s])
        .collect();
    let n = lattice.len();
    let meta = SpaceMeta {
        name: format!("carpet-{level}"),
        kind: SpaceKind::Carpet,
        level: Some(level),
        d_h: T::lit(8.0).ln() / T::lit(3.0).ln(),
        d_w: None,
        diameter: T::lit(2.0).sqrt() * (T::one() - T::one() / s),
        mesh: T::one() / s,
        metric: MetricKind::Euclidean,
    };
    let meta = if n == 1 { SpaceMeta { diameter: T::one(), ..meta } } else { meta };
    MetricMeasureSpace::assemble(meta, coords, vec![T::one() / T::from_usize_(n); n], edges, lattice)
}

pub(super) fn lattice_from_coords<T: Real>(coords: &[Vec<T>], level: u32) -> Vec<(i64, i64)> {
    let side = 3f64.powi(level as i32);
    coords.iter().map(|c| ((c[0].to_f() * side).floor() as i64, (c[1].to_f() * side).floor() as i64)).collect()
}

pub(super) fn cells<T: Real>(space: &MetricMeasureSpace<T>, level: u32) -> Vec<Cell> {
    let Some(top) = space.meta.level else { return Vec::new() };
    if level > top {
        return Vec::new();
    }
    let side = 3i64.pow(level);
    let div = 3i64.pow(top - level);
    let mut out = Vec::new();
    for cj in 0..side {
        for ci in 0..side {
            if !survives(ci, cj, level) {
                continue;
            }
            let members: Vec<usize> = space
                .lattice()
                .iter()
                .enumerate()
                .filter(|(_, &(i, j))| i / div == ci && j / div == cj)
                .map(|(k, _)| k)
                .collect();
            let mut address = Vec::with_capacity(level as usize);
            let (mut a, mut b) = (ci, cj);
            for _ in 0..level {
                address.push((3 * (b % 3) + a % 3) as u8);
                a /= 3;
                b /= 3;
            }
            address.reverse();
            out.push(Cell { level, address, members, corners: Vec::new() });
        }
    }
    out
}
