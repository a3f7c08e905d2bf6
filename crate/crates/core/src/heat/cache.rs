//! Model cache: `{space_hash, renorm, measure, modes: [{eigenvalue, vector}]}`.

use serde::{Deserialize, Serialize};

use super::SpectralHeatModel;
use crate::error::Result;
use crate::report::to_json_string;
use crate::scalar::Real;

#[derive(Serialize, Deserialize)]
struct ModeDoc {
    eigenvalue: f64,
    vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    space_hash: String,
    renorm: f64,
    measure: Vec<f64>,
    modes: Vec<ModeDoc>,
}

pub fn model_to_json<T: Real>(model: &SpectralHeatModel<T>) -> Result<String> {
    let n = model.len();
    let doc = ModelDoc {
        space_hash: model.space_hash.clone(),
        renorm: model.renorm.to_f(),
        measure: model.measure().iter().map(|m| m.to_f()).collect(),
        modes: (0..n)
            .map(|k| ModeDoc {
                eigenvalue: model.eigenvalues()[k].to_f(),
                vector: (0..n).map(|x| model.phi(x, k).to_f()).collect(),
            })
            .collect(),
    };
    to_json_string(&doc)
}

pub fn model_from_json<T: Real>(text: &str) -> Result<SpectralHeatModel<T>> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    let n = doc.modes.len();
    let mut phi = vec![T::zero(); n * n];
    let mut eigenvalues = Vec::with_capacity(n);
    for (k, m) in doc.modes.iter().enumerate() {
        if m.vector.len() != n {
            return Err(crate::Error::InvalidArgument(format!(
                "mode {k} has {} entries, expected {n}",
                m.vector.len()
            )));
        }
        eigenvalues.push(T::lit(m.eigenvalue));
        for (x, v) in m.vector.iter().enumerate() {
            phi[x * n + k] = T::lit(*v);
        }
    }
    SpectralHeatModel::from_parts(
        doc.space_hash,
        T::lit(doc.renorm),
        eigenvalues,
        phi,
        doc.measure.into_iter().map(T::lit).collect(),
    )
}
