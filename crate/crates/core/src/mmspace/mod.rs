//! Finite metric measure spaces: point clouds with distances, a probability
//! measure, a weighted edge graph and dimension metadata.
//!
//! Generators cover the compact Sierpinski gasket and carpet approximations,
//! the unit circle and unit interval, and arbitrary weighted graphs.

mod carpet;
mod gasket;
mod graph;
mod grid;
pub mod io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{log_log_fit, log_space, ScalingFit};
use crate::scalar::{kahan_sum, par_row_sums, KahanSum, Real};

pub use carpet::{build_carpet, MAX_CARPET_LEVEL};
pub use gasket::{build_gasket, gasket_vertex_count, MAX_GASKET_LEVEL};
pub use graph::{from_graph, random_connected_graph};
pub use grid::{build_circle_grid, build_interval_grid, MAX_GRID_POINTS, MIN_GRID_POINTS};

/// Largest point count for which the full distance table is stored.
pub const DENSE_DISTANCE_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Gasket,
    Carpet,
    Circle,
    Interval,
    Graph,
}

impl SpaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceKind::Gasket => "gasket",
            SpaceKind::Carpet => "carpet",
            SpaceKind::Circle => "circle",
            SpaceKind::Interval => "interval",
            SpaceKind::Graph => "graph",
        }
    }
}

/// How distances are derived from the stored data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    /// Geodesic distance on a circle of the given circumference; coords are
    /// one-dimensional arc-length positions.
    Periodic {
        period: f64,
    },
    /// Hop distance in the edge graph.
    Graph,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceMeta<T> {
    pub name: String,
    pub kind: SpaceKind,
    pub level: Option<u32>,
    pub d_h: T,
    /// `None` when the walk dimension is unknown and must be estimated.
    pub d_w: Option<T>,
    pub diameter: T,
    /// Smallest edge length.
    pub mesh: T,
    pub metric: MetricKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<T> {
    pub a: usize,
    pub b: usize,
    /// Conductance.
    pub w: T,
}

/// Self-similar cell of a fractal generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub level: u32,
    /// Word of child indices from the root cell.
    pub address: Vec<u8>,
    /// Point ids inside the closed cell, ascending.
    pub members: Vec<usize>,
    /// Corner point ids (gasket: the 3 vertices; carpet: empty).
    pub corners: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum DistanceTable<T> {
    /// Strict upper triangle, row-major.
    Packed(Vec<T>),
    OnDemand,
}

/// A finite metric measure space with graph structure.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricMeasureSpace<T> {
    pub meta: SpaceMeta<T>,
    coords: Vec<Vec<T>>,
    measure: Vec<T>,
    edges: Vec<Edge<T>>,
    /// Integer lattice positions for cell bookkeeping (fractal generators).
    lattice: Vec<(i64, i64)>,
    dist: DistanceTable<T>,
    /// Hop distances for graph metrics.
    hops: Option<Vec<u32>>,
}

impl<T: Real> MetricMeasureSpace<T> {
    /// Assemble a space, normalizing the measure and building the distance
    /// table. Used by all generators and by the JSON loader.
    pub(crate) fn assemble(
        mut meta: SpaceMeta<T>,
        coords: Vec<Vec<T>>,
        measure: Vec<T>,
        edges: Vec<Edge<T>>,
        lattice: Vec<(i64, i64)>,
    ) -> Result<Self> {
        let n = measure.len();
        if n == 0 {
            return Err(Error::InvalidArgument("space has no points".into()));
        }
        if meta.metric != MetricKind::Graph && coords.len() != n {
            return Err(Error::InvalidArgument(format!("{} coordinate rows for {n} points", coords.len())));
        }
        if let Some(bad) = measure.iter().position(|m| !(*m > T::zero()) || !m.is_finite()) {
            return Err(Error::InvalidArgument(format!("point {bad} has non-positive mass")));
        }
        for e in &edges {
            if e.a >= n || e.b >= n || e.a == e.b {
                return Err(Error::InvalidArgument(format!("bad edge ({}, {})", e.a, e.b)));
            }
            if !(e.w > T::zero()) {
                return Err(Error::InvalidArgument(format!("edge ({}, {}) has weight {}", e.a, e.b, e.w)));
            }
        }
        let total = kahan_sum(measure.iter().copied());
        let measure: Vec<T> = measure.into_iter().map(|m| m / total).collect();

        let hops = (meta.metric == MetricKind::Graph).then(|| graph::hop_distances(n, &edges));
        let mut space = MetricMeasureSpace {
            meta: meta.clone(),
            coords,
            measure,
            edges,
            lattice,
            dist: DistanceTable::OnDemand,
            hops,
        };
        if n <= DENSE_DISTANCE_LIMIT {
            let mut packed = Vec::with_capacity(n * (n - 1) / 2);
            for x in 0..n {
                for y in x + 1..n {
                    packed.push(space.raw_distance(x, y));
                }
            }
            space.dist = DistanceTable::Packed(packed);
        }
        let mut mesh = T::infinity();
        for e in &space.edges {
            mesh = mesh.min(space.dist(e.a, e.b));
        }
        if !mesh.is_finite() {
            mesh = T::one();
        }
        meta.mesh = mesh;
        if meta.diameter <= T::zero() {
            meta.diameter = space.computed_diameter();
        }
        space.meta = meta;
        Ok(space)
    }

    fn raw_distance(&self, x: usize, y: usize) -> T {
        match self.meta.metric {
            MetricKind::Euclidean => {
                let s = self.coords[x]
                    .iter()
                    .zip(&self.coords[y])
                    .map(|(a, b)| (*a - *b) * (*a - *b))
                    .fold(T::zero(), |acc, v| acc + v);
                s.sqrt()
            }
            MetricKind::Periodic { period } => {
                let p = T::lit(period);
                let d = (self.coords[x][0] - self.coords[y][0]).abs() % p;
                d.min(p - d)
            }
            MetricKind::Graph => {
                let n = self.len();
                let h = self.hops.as_ref().expect("hop table present for graph metric")[x * n + y];
                if h == u32::MAX {
                    T::infinity()
                } else {
                    T::from_u32(h).unwrap()
                }
            }
        }
    }

    fn computed_diameter(&self) -> T {
        let n = self.len();
        let mut d = T::zero();
        for x in 0..n {
            for y in x + 1..n {
                d = d.max(self.dist(x, y));
            }
        }
        d
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn measure(&self) -> &[T] {
        &self.measure
    }

    pub fn coords(&self) -> &[Vec<T>] {
        &self.coords
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub(crate) fn lattice(&self) -> &[(i64, i64)] {
        &self.lattice
    }

    pub fn d_h(&self) -> T {
        self.meta.d_h
    }

    pub fn d_w(&self) -> Result<T> {
        self.meta.d_w.ok_or(Error::MissingDimension("d_W"))
    }

    /// Sets or replaces the walk dimension (e.g. with an estimate).
    pub fn with_walk_dimension(mut self, d_w: T) -> Self {
        self.meta.d_w = Some(d_w);
        self
    }

    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> T {
        if x == y {
            return T::zero();
        }
        match &self.dist {
            DistanceTable::Packed(p) => {
                let (a, b) = if x < y { (x, y) } else { (y, x) };
                let n = self.len();
                // offset of row a in the strict upper triangle
                let row = a * (2 * n - a - 1) / 2;
                p[row + (b - a - 1)]
            }
            DistanceTable::OnDemand => self.raw_distance(x, y),
        }
    }

    /// Distances from `x` to every point.
    pub fn dist_row(&self, x: usize) -> Vec<T> {
        (0..self.len()).map(|y| self.dist(x, y)).collect()
    }

    /// Neighbor lists with conductances.
    pub fn adjacency(&self) -> Vec<Vec<(usize, T)>> {
        let mut adj = vec![Vec::new(); self.len()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.w));
            adj[e.b].push((e.a, e.w));
        }
        adj
    }

    /// Connected components of the edge graph, each sorted ascending and
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        graph::components(self.len(), &self.edges)
    }

    /// Mass of a set of points.
    pub fn mass_of(&self, ids: impl IntoIterator<Item = usize>) -> T {
        kahan_sum(ids.into_iter().map(|i| self.measure[i]))
    }

    /// Self-similar cells at generation `level` (fractal generators only).
    pub fn cells(&self, level: u32) -> Vec<Cell> {
        match self.meta.kind {
            SpaceKind::Gasket => gasket::cells(self, level),
            SpaceKind::Carpet => carpet::cells(self, level),
            _ => Vec::new(),
        }
    }

    /// Check metric, measure and (for fractals) Ahlfors invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        let total = kahan_sum(self.measure.iter().copied());
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!("total mass {total} != 1")));
        }
        let dtol = T::epsilon() * T::lit(16.0) * self.meta.diameter.max(T::one());
        let check = |x: usize, y: usize, z: usize| -> Result<()> {
            if self.dist(x, z) > self.dist(x, y) + self.dist(y, z) + dtol {
                return Err(Error::InvalidArgument(format!("triangle inequality fails at ({x},{y},{z})")));
            }
            Ok(())
        };
        for x in 0..n.min(200) {
            if (self.dist(x, (x + 1) % n) - self.dist((x + 1) % n, x)).abs() > T::zero() {
                return Err(Error::InvalidArgument("asymmetric distance".into()));
            }
        }
        if n <= 200 {
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        check(x, y, z)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7419);
            for _ in 0..10_000 {
                check(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n))?;
            }
        }
        Ok(())
    }

    /// Ordered pairs `(x, y)`, `x != y`, with `d(x, y) < r`, weighted by
    /// `mu_x * mu_y`, in row-major order.
    pub fn pairs_within(&self, r: T) -> PairsWithin<'_, T> {
        PairsWithin { space: self, r, x: 0, y: 0 }
    }

    /// `mu(B(x, r))` for every point and every radius, `r_grid` ascending.
    pub fn ball_masses(&self, r_grid: &[T]) -> Vec<Vec<T>> {
        let n = self.len();
        (0..n)
            .map(|x| {
                let mut acc = vec![KahanSum::new(); r_grid.len()];
                for y in 0..n {
                    let d = self.dist(x, y);
                    let first = r_grid.partition_point(|r| *r <= d);
                    if first < r_grid.len() {
                        acc[first].add(self.measure[y]);
                    }
                }
                let mut run = T::zero();
                acc.iter()
                    .map(|s| {
                        run = run + s.value();
                        run
                    })
                    .collect()
            })
            .collect()
    }

    /// `sum_{d(x,y) < r} mu_x mu_y g(x, y)` over ordered off-diagonal pairs,
    /// for every `r` in the ascending grid.
    pub fn pair_sums_by_radius<F>(&self, r_grid: &[T], g: F) -> Vec<T>
    where
        F: Fn(usize, usize) -> T + Sync,
    {
        let n = self.len();
        let rmax = match r_grid.last() {
            Some(r) => *r,
            None => return Vec::new(),
        };
        let buckets = par_row_sums(n, r_grid.len(), |x, acc| {
            let mx = self.measure[x];
            for y in 0..n {
                if y == x {
                    continue;
                }
                let d = self.dist(x, y);
                if d >= rmax {
                    continue;
                }
                let v = g(x, y);
                if v == T::zero() {
                    continue;
                }
                let first = r_grid.partition_point(|r| *r <= d);
                acc[first].add(mx * self.measure[y] * v);
            }
        });
        let mut run = KahanSum::new();
        buckets
            .into_iter()
            .map(|b| {
                run.add(b);
                run.value()
            })
            .collect()
    }

    /// Largest `c2 / c1` bounds for `c1 r^{d_H} <= mu(B(x,r)) <= c2 r^{d_H}`
    /// over all points and the given radii.
    pub fn ahlfors_constants(&self, r_grid: &[T]) -> (T, T) {
        let masses = self.ball_masses(r_grid);
        let mut c1 = T::infinity();
        let mut c2 = T::zero();
        for row in &masses {
            for (m, r) in row.iter().zip(r_grid) {
                let c = *m / r.powf(self.meta.d_h);
                c1 = c1.min(c);
                c2 = c2.max(c);
            }
        }
        (c1, c2)
    }

    /// Bulk radius window `[3 mesh, diameter / 4]`.
    pub fn radius_window(&self) -> (T, T) {
        (T::lit(3.0) * self.meta.mesh, self.meta.diameter / T::lit(4.0))
    }

    /// Default log-spaced radii filling the bulk window.
    pub fn default_radius_grid(&self, count: usize) -> Vec<T> {
        let (lo, hi) = self.radius_window();
        log_space(lo, hi, count.max(6))
    }

    /// Check that a radius grid is ascending, has at least `min_len` entries
    /// and sits inside the bulk window.
    pub fn check_radius_grid(&self, r_grid: &[T], min_len: usize) -> Result<()> {
        let (lo, hi) = self.radius_window();
        let slack = T::one() + T::lit(1e-9);
        if r_grid.len() < min_len {
            return Err(Error::DegenerateWindow(format!("{} radii, need {min_len}", r_grid.len())));
        }
        if !r_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::DegenerateWindow("radii must be strictly ascending".into()));
        }
        if r_grid[0] * slack < lo || r_grid[r_grid.len() - 1] > hi * slack || lo >= hi {
            return Err(Error::DegenerateWindow(format!(
                "radii [{}, {}] outside bulk window [{lo}, {hi}]",
                r_grid[0],
                r_grid[r_grid.len() - 1]
            )));
        }
        Ok(())
    }
}

/// Streaming iterator returned by [`MetricMeasureSpace::pairs_within`].
pub struct PairsWithin<'a, T> {
    space: &'a MetricMeasureSpace<T>,
    r: T,
    x: usize,
    y: usize,
}

impl<T: Real> Iterator for PairsWithin<'_, T> {
    type Item = (usize, usize, T);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.space.len();
        while self.x < n {
            let (x, y) = (self.x, self.y);
            self.y += 1;
            if self.y == n {
                self.y = 0;
                self.x += 1;
            }
            if x != y && self.space.dist(x, y) < self.r {
                let m = self.space.measure();
                return Some((x, y, m[x] * m[y]));
            }
        }
        None
    }
}

/// Estimate `d_H` by regressing the log of the mean ball mass
/// `sum_x mu_x mu(B(x,r))` against `log r`.
pub fn ahlfors_fit<T: Real>(space: &MetricMeasureSpace<T>, r_grid: &[T]) -> Result<ScalingFit> {
    space.check_radius_grid(r_grid, 6)?;
    log_log_fit(r_grid, &mean_ball_mass(space, r_grid), 6)
}

/// `sum_x mu_x mu(B(x, r))` for each radius, with each point's mass spread
/// over a mesh-width shell (see [`smoothed_pair_sums`]). This removes the
/// lattice staircase, so a uniform grid on the circle gives exactly `2r`.
pub fn mean_ball_mass<T: Real>(space: &MetricMeasureSpace<T>, r_grid: &[T]) -> Vec<T> {
    smoothed_pair_sums(space, r_grid, |_, _| T::one())
}

/// `sum_{x,y} mu_x mu_y g(x, y) s_r(d(x, y))` for each `r` in the ascending
/// grid, where `s_r(d) = clamp((r - d) / mesh + 1/2, 0, 1)` is the
/// indicator of `d < r` smeared over one mesh width. The diagonal is included
/// whenever `g(x, x) != 0`.
pub fn smoothed_pair_sums<T, F>(space: &MetricMeasureSpace<T>, r_grid: &[T], g: F) -> Vec<T>
where
    T: Real,
    F: Fn(usize, usize) -> T + Sync,
{
    let n = space.len();
    let h = space.meta.mesh;
    let half = T::lit(0.5);
    let mu = space.measure();
    let rmax = match r_grid.last() {
        Some(r) => *r,
        None => return Vec::new(),
    };
    // bucket k holds increments that switch on at r_grid[k]
    let incs = par_row_sums(n, r_grid.len(), |x, acc| {
        for y in 0..n {
            let d = space.dist(x, y);
            if d - half * h >= rmax {
                continue;
            }
            let v = g(x, y);
            if v == T::zero() {
                continue;
            }
            let w = mu[x] * mu[y] * v;
            let mut prev = T::zero();
            let start = r_grid.partition_point(|r| *r <= d - half * h);
            for (k, r) in r_grid.iter().enumerate().skip(start) {
                let f = ((*r - d) / h + half).min(T::one());
                acc[k].add(w * (f - prev));
                prev = f;
                if f >= T::one() {
                    break;
                }
            }
        }
    });
    let mut run = KahanSum::new();
    incs.into_iter()
        .map(|v| {
            run.add(v);
            run.value()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_beyond_diameter_are_all_pairs() {
        let s = build_circle_grid::<f64>(12).unwrap();
        let n = s.len();
        assert_eq!(s.pairs_within(10.0).count(), n * (n - 1));
        let total: f64 = s.pairs_within(10.0).map(|p| p.2).sum();
        assert!((total - (1.0 - 1.0 / n as f64)).abs() < 1e-14);
    }

    #[test]
    fn pairs_below_half_mesh_are_empty() {
        let s = build_interval_grid::<f64>(50).unwrap();
        assert_eq!(s.pairs_within(s.meta.mesh / 2.0).count(), 0);
        let g = build_gasket::<f64>(3).unwrap();
        assert_eq!(g.pairs_within(g.meta.mesh / 2.0).count(), 0);
    }

    #[test]
    fn circle_eight_neighbors_at_r_02() {
        let s = build_circle_grid::<f64>(8).unwrap();
        let pairs: Vec<_> = s.pairs_within(0.2).collect();
        assert_eq!(pairs.len(), 16);
        assert!(pairs.iter().all(|(x, y, _)| (x + 1) % 8 == *y || (y + 1) % 8 == *x));
        // deterministic row-major order
        assert_eq!(pairs[0].0, 0);
        assert!(pairs.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
    }

    #[test]
    fn packed_and_on_demand_distances_agree() {
        let s = build_gasket::<f64>(2).unwrap();
        for x in 0..s.len() {
            assert_eq!(s.dist(x, x), 0.0);
            for y in 0..s.len() {
                if x != y {
                    assert_eq!(s.dist(x, y), s.raw_distance(x, y));
                    assert_eq!(s.dist(x, y), s.dist(y, x));
                }
            }
        }
    }

    #[test]
    fn pair_sums_match_stream() {
        let s = build_gasket::<f64>(3).unwrap();
        let f: Vec<f64> = (0..s.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let grid = [0.1, 0.2, 0.3];
        let sums = s.pair_sums_by_radius(&grid, |x, y| (f[x] - f[y]).abs());
        for (r, v) in grid.iter().zip(&sums) {
            let brute: f64 = s.pairs_within(*r).map(|(x, y, w)| w * (f[x] - f[y]).abs()).sum();
            assert!((brute - v).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_ahlfors_slope_is_one() {
        let s = build_circle_grid::<f64>(1024).unwrap();
        let grid = s.default_radius_grid(10);
        let fit = ahlfors_fit(&s, &grid).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.02, "slope {}", fit.slope);
        for (r, m) in grid.iter().zip(mean_ball_mass(&s, &grid)) {
            assert!((m - 2.0 * r).abs() < 1e-12);
        }
    }

    #[test]
    fn gasket_ahlfors_slope_level_six() {
        let g = build_gasket::<f64>(6).unwrap();
        let fit = ahlfors_fit(&g, &g.default_radius_grid(10)).unwrap();
        assert!((fit.slope - 3f64.ln() / 2f64.ln()).abs() < 0.08, "slope {}", fit.slope);
    }

    #[test]
    fn radius_grid_outside_window_rejected() {
        let s = build_circle_grid::<f64>(64).unwrap();
        let bad = log_space(s.meta.mesh, 0.2, 8);
        assert!(ahlfors_fit(&s, &bad).is_err());
        let short = log_space(0.05, 0.2, 4);
        assert!(ahlfors_fit(&s, &short).is_err());
    }
}
