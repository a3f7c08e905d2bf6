//! JSON form of a space: `{meta, points: [{id, coords, mu}], edges: [{a, b, w}]}`.
//! Distances are not stored; they are recomputed from coords on load.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{carpet, gasket, Edge, MetricKind, MetricMeasureSpace, SpaceKind, SpaceMeta};
use crate::error::{Error, Result};
use crate::report::to_json_string;
use crate::scalar::Real;

#[derive(Serialize, Deserialize)]
struct MetaDoc {
    name: String,
    kind: SpaceKind,
    level: Option<u32>,
    d_h: f64,
    d_w: Option<f64>,
    diameter: f64,
    mesh: f64,
    metric: MetricKind,
}

#[derive(Serialize, Deserialize)]
struct PointDoc {
    id: usize,
    coords: Vec<f64>,
    mu: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    a: usize,
    b: usize,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct SpaceDoc {
    meta: MetaDoc,
    points: Vec<PointDoc>,
    edges: Vec<EdgeDoc>,
}

pub fn to_json<T: Real>(space: &MetricMeasureSpace<T>) -> Result<String> {
    let m = &space.meta;
    let doc = SpaceDoc {
        meta: MetaDoc {
            name: m.name.clone(),
            kind: m.kind,
            level: m.level,
            d_h: m.d_h.to_f(),
            d_w: m.d_w.map(Real::to_f),
            diameter: m.diameter.to_f(),
            mesh: m.mesh.to_f(),
            metric: m.metric,
        },
        points: (0..space.len())
            .map(|id| PointDoc {
                id,
                coords: space.coords.get(id).map(|c| c.iter().map(|v| v.to_f()).collect()).unwrap_or_default(),
                mu: space.measure[id].to_f(),
            })
            .collect(),
        edges: space.edges.iter().map(|e| EdgeDoc { a: e.a, b: e.b, w: e.w.to_f() }).collect(),
    };
    to_json_string(&doc)
}

pub fn from_json<T: Real>(text: &str) -> Result<MetricMeasureSpace<T>> {
    let doc: SpaceDoc = serde_json::from_str(text)?;
    let n = doc.points.len();
    let mut coords = vec![Vec::new(); n];
    let mut measure = vec![T::zero(); n];
    let mut seen = vec![false; n];
    for p in doc.points {
        if p.id >= n || seen[p.id] {
            return Err(Error::InvalidArgument(format!("point ids must be 0..{n} without repeats")));
        }
        seen[p.id] = true;
        coords[p.id] = p.coords.into_iter().map(T::lit).collect();
        measure[p.id] = T::lit(p.mu);
    }
    let edges = doc.edges.into_iter().map(|e| Edge { a: e.a, b: e.b, w: T::lit(e.w) }).collect();
    if doc.meta.metric == MetricKind::Graph {
        coords.clear();
    }
    let lattice = match (doc.meta.kind, doc.meta.level) {
        (SpaceKind::Gasket, Some(l)) => gasket::lattice_from_coords(&coords, l),
        (SpaceKind::Carpet, Some(l)) => carpet::lattice_from_coords(&coords, l),
        _ => Vec::new(),
    };
    let m = doc.meta;
    let meta = SpaceMeta {
        name: m.name,
        kind: m.kind,
        level: m.level,
        d_h: T::lit(m.d_h),
        d_w: m.d_w.map(T::lit),
        diameter: T::lit(m.diameter),
        mesh: T::lit(m.mesh),
        metric: m.metric,
    };
    MetricMeasureSpace::assemble(meta, coords, measure, edges, lattice)
}

/// SHA-256 of the canonical JSON form, hex encoded.
pub fn space_hash<T: Real>(space: &MetricMeasureSpace<T>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(to_json(space)?.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmspace::{build_carpet, build_circle_grid, build_gasket, from_graph};

    #[test]
    fn gasket_round_trip() {
        let g = build_gasket::<f64>(3).unwrap();
        let back: MetricMeasureSpace<f64> = from_json(&to_json(&g).unwrap()).unwrap();
        assert_eq!(back.len(), 42);
        assert_eq!(back.lattice(), g.lattice());
        assert_eq!(back.edges(), g.edges());
        for x in 0..g.len() {
            assert!((back.measure()[x] - g.measure()[x]).abs() < 1e-16);
            for y in 0..g.len() {
                assert!((back.dist(x, y) - g.dist(x, y)).abs() < 1e-15);
            }
        }
        assert_eq!(back.cells(2), g.cells(2));
    }

    #[test]
    fn carpet_and_circle_round_trip() {
        let c = build_carpet::<f64>(2).unwrap();
        let back: MetricMeasureSpace<f64> = from_json(&to_json(&c).unwrap()).unwrap();
        assert_eq!(back.lattice(), c.lattice());
        assert!(back.meta.d_w.is_none());
        let s = build_circle_grid::<f64>(16).unwrap();
        let back: MetricMeasureSpace<f64> = from_json(&to_json(&s).unwrap()).unwrap();
        assert_eq!(back.dist(0, 8), 0.5);
    }

    #[test]
    fn graph_round_trip() {
        let edges = vec![Edge { a: 0, b: 1, w: 2.0 }, Edge { a: 1, b: 2, w: 1.0 }];
        let g = from_graph::<f64>("p3", vec![1.0; 3], edges).unwrap();
        let back: MetricMeasureSpace<f64> = from_json(&to_json(&g).unwrap()).unwrap();
        assert_eq!(back.dist(0, 2), 2.0);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = space_hash(&build_gasket::<f64>(2).unwrap()).unwrap();
        assert_eq!(a, space_hash(&build_gasket::<f64>(2).unwrap()).unwrap());
        assert_ne!(a, space_hash(&build_gasket::<f64>(3).unwrap()).unwrap());
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = r#"{"meta":{"name":"x","kind":"graph","level":null,"d_h":1.0,"d_w":2.0,
            "diameter":1.0,"mesh":1.0,"metric":{"type":"graph"}},
            "points":[{"id":0,"coords":[],"mu":0.5},{"id":0,"coords":[],"mu":0.5}],"edges":[]}"#;
        assert!(from_json::<f64>(text).is_err());
    }
}
