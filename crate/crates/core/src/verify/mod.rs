//! Checks of the inequalities and identities that are testable on a finite
//! space, each producing a [`CheckReport`].

mod inequalities;
mod nonlocal;
mod report;
mod smoothing;
mod sobolev;
mod suite;

pub use inequalities::{
    check_clarkson, check_energy_identity, check_interpolation, check_pseudo_poincare, check_semigroup_regularization,
    InterpolationParams,
};
pub use nonlocal::{check_nonlocal_equivalence, NONLOCAL_MAX_SPREAD};
pub use report::{describe_grid, CheckReport, Provenance, Tier};
pub use smoothing::{check_be_kappa, default_function_family, BeMode};
pub use sobolev::{check_isoperimetric, check_weak_sobolev, cheeger_bruteforce, weak_lq_norm, MAX_CHEEGER_POINTS};
pub use suite::{run_suite, Suite, SuiteConfig};

use crate::scalar::{abs_pow, kahan_sum, Real};

/// `(sum mu |f|^p)^{1/p}`.
pub fn lp_norm<T: Real>(measure: &[T], f: &[T], p: T) -> T {
    kahan_sum(measure.iter().zip(f).map(|(m, v)| *m * abs_pow(*v, p))).powf(T::one() / p)
}

/// The grid with the geometric midpoint of each consecutive pair inserted.
pub fn refine_grid<T: Real>(grid: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for (i, &t) in grid.iter().enumerate() {
        out.push(t);
        if let Some(&next) = grid.get(i + 1) {
            out.push((t * next).sqrt());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refinement_doubles_density() {
        let g = refine_grid(&[1.0, 4.0, 16.0]);
        assert_eq!(g, vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        assert!((lp_norm(&[0.5, 0.5], &[3.0, -4.0], 2.0) - 12.5f64.sqrt()).abs() < 1e-15);
    }
}
