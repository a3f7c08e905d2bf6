use super::{Edge, MetricKind, MetricMeasureSpace, SpaceKind, SpaceMeta};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MIN_GRID_POINTS: usize = 8;
pub const MAX_GRID_POINTS: usize = 4096;

fn check_n(n: usize) -> Result<()> {
    if !(MIN_GRID_POINTS..=MAX_GRID_POINTS).contains(&n) {
        return Err(Error::InvalidArgument(format!("grid size {n} outside [{MIN_GRID_POINTS}, {MAX_GRID_POINTS}]")));
    }
    Ok(())
}

// Grid edges carry conductance 1/h so that the generator approximates the
// standard Laplacian -f'' without further renormalization.

/// `n` equally spaced points on the circle of circumference 1 with the
/// geodesic metric.
pub fn build_circle_grid<T: Real>(n: usize) -> Result<MetricMeasureSpace<T>> {
    check_n(n)?;
    let nf = T::from_usize_(n);
    let h = T::one() / nf;
    let coords = (0..n).map(|i| vec![T::from_usize_(i) / nf]).collect();
    let edges = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            Edge { a: i.min(j), b: i.max(j), w: nf }
        })
        .collect();
    let meta = SpaceMeta {
        name: format!("circle-{n}"),
        kind: SpaceKind::Circle,
        level: None,
        d_h: T::one(),
        d_w: Some(T::lit(2.0)),
        diameter: T::lit(0.5),
        mesh: h,
        metric: MetricKind::Periodic { period: 1.0 },
    };
    MetricMeasureSpace::assemble(meta, coords, vec![h; n], edges, Vec::new())
}

/// `n` equally spaced points on `[0, 1]` (endpoints included).
pub fn build_interval_grid<T: Real>(n: usize) -> Result<MetricMeasureSpace<T>> {
    check_n(n)?;
    let gaps = T::from_usize_(n - 1);
    let coords = (0..n).map(|i| vec![T::from_usize_(i) / gaps]).collect();
    let edges = (0..n - 1).map(|i| Edge { a: i, b: i + 1, w: gaps }).collect();
    let meta = SpaceMeta {
        name: format!("interval-{n}"),
        kind: SpaceKind::Interval,
        level: None,
        d_h: T::one(),
        d_w: Some(T::lit(2.0)),
        diameter: T::one(),
        mesh: T::one() / gaps,
        metric: MetricKind::Euclidean,
    };
    MetricMeasureSpace::assemble(meta, coords, vec![T::one() / T::from_usize_(n); n], edges, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_limits() {
        assert!(build_circle_grid::<f64>(4).is_err());
        assert!(build_circle_grid::<f64>(4097).is_err());
        assert!(build_interval_grid::<f64>(7).is_err());
        assert!(build_circle_grid::<f64>(8).is_ok());
    }

    #[test]
    fn circle_antipode() {
        let c = build_circle_grid::<f64>(8).unwrap();
        assert_eq!(c.dist(0, 4), 0.5);
        assert_eq!(c.dist(0, 7), 0.125);
        c.validate().unwrap();
    }

    #[test]
    fn interval_extent() {
        let s = build_interval_grid::<f64>(101).unwrap();
        assert!((s.meta.diameter - 1.0).abs() < 1e-15);
        assert!((s.meta.mesh - 0.01).abs() < 1e-15);
        assert!((s.dist(0, 100) - 1.0).abs() < 1e-15);
        s.validate().unwrap();
    }
}
