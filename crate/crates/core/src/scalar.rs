//! Scalar abstraction shared by every numerical module.
//!
//! All generators, heat models and seminorms are generic over [`Real`], which
//! is implemented for `f32` and `f64`. The dense symmetric eigensolver is the
//! only place where a concrete backend is needed, so it lives on the trait.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use nalgebra::DMatrix;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rayon::prelude::*;

/// Floating point scalar usable throughout the crate.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Eigen-decomposition of a dense symmetric `n x n` matrix stored
    /// row-major. Returns unsorted eigenvalues and the eigenvectors as the
    /// columns of a row-major `n x n` matrix, or `None` when the iteration
    /// fails to converge.
    fn symmetric_eigen(n: usize, data: Vec<Self>) -> Option<(Vec<Self>, Vec<Self>)>;

    /// Eigenvalues only (unsorted); much cheaper than [`Real::symmetric_eigen`].
    fn symmetric_eigenvalues(n: usize, data: Vec<Self>) -> Vec<Self>;

    /// `C = A B^T` for row-major `A` (`ra x k`) and `B` (`rb x k`); `C` is
    /// row-major `ra x rb`.
    fn mul_abt(ra: usize, rb: usize, k: usize, a: &[Self], b: &[Self]) -> Vec<Self>;

    /// Lossless for f64, rounding for f32.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in a float")
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn symmetric_eigen(n: usize, data: Vec<Self>) -> Option<(Vec<Self>, Vec<Self>)> {
                // symmetric input: row-major and column-major layouts coincide
                let m = DMatrix::<$t>::from_vec(n, n, data);
                let eig = nalgebra::SymmetricEigen::try_new(m, <$t>::EPSILON, 0)?;
                let vals = eig.eigenvalues.iter().copied().collect();
                let mut vecs = vec![0.0 as $t; n * n];
                for j in 0..n {
                    for i in 0..n {
                        vecs[i * n + j] = eig.eigenvectors[(i, j)];
                    }
                }
                Some((vals, vecs))
            }

            fn symmetric_eigenvalues(n: usize, data: Vec<Self>) -> Vec<Self> {
                let m = DMatrix::<$t>::from_vec(n, n, data);
                m.symmetric_eigenvalues().iter().copied().collect()
            }

            fn mul_abt(ra: usize, rb: usize, k: usize, a: &[Self], b: &[Self]) -> Vec<Self> {
                // row-major A is column-major A^T; C^T = B A^T is column-major
                // rb x ra, i.e. row-major C
                let at = DMatrix::<$t>::from_column_slice(k, ra, a);
                let bt = DMatrix::<$t>::from_column_slice(k, rb, b);
                bt.tr_mul(&at).as_slice().to_vec()
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> KahanSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator.
pub fn kahan_sum<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    let mut acc = KahanSum::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

/// Rows per block for parallel pair scans.
pub(crate) const ROW_BLOCK: usize = 32;

/// Parallel compensated sum of `row_sum(x)` over `0..n`.
///
/// Rows are grouped into fixed blocks and the block partials are combined in
/// index order, so the result does not depend on the thread count.
pub fn par_row_sum<T, F>(n: usize, row_sum: F) -> T
where
    T: Real,
    F: Fn(usize, &mut KahanSum<T>) + Sync,
{
    let blocks: Vec<KahanSum<T>> = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = KahanSum::new();
            for x in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                row_sum(x, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = KahanSum::new();
    for b in &blocks {
        total.merge(b);
    }
    total.value()
}

/// Like [`par_row_sum`] but accumulating a fixed-length vector of sums.
pub fn par_row_sums<T, F>(n: usize, len: usize, row_sum: F) -> Vec<T>
where
    T: Real,
    F: Fn(usize, &mut [KahanSum<T>]) + Sync,
{
    let blocks: Vec<Vec<KahanSum<T>>> = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![KahanSum::new(); len];
            for x in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                row_sum(x, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![KahanSum::new(); len];
    for b in &blocks {
        for (t, s) in total.iter_mut().zip(b) {
            t.merge(s);
        }
    }
    total.iter().map(|s| s.value()).collect()
}

/// `|x|^p` with exact fast paths for the common exponents.
#[inline]
pub fn abs_pow<T: Real>(x: T, p: T) -> T {
    let a = x.abs();
    if p == T::one() {
        a
    } else if p == T::lit(2.0) {
        a * a
    } else if a == T::zero() {
        T::zero()
    } else {
        a.powf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut xs = vec![1.0e16_f64];
        xs.extend(std::iter::repeat_n(1.0, 1000));
        xs.push(-1.0e16);
        assert_eq!(kahan_sum(xs), 1000.0);
    }

    #[test]
    fn par_row_sum_is_thread_independent() {
        let f = |x: usize, acc: &mut KahanSum<f64>| acc.add(1.0 / (x as f64 + 1.0));
        let a = par_row_sum(10_000, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| par_row_sum(10_000, f));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn eigen_two_by_two() {
        let (mut vals, _) = f64::symmetric_eigen(2, vec![2.0, -2.0, -2.0, 2.0]).unwrap();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(vals[0].abs() < 1e-14 && (vals[1] - 4.0).abs() < 1e-14);
        let (vals32, _) = f32::symmetric_eigen(2, vec![2.0, -2.0, -2.0, 2.0]).unwrap();
        assert!(vals32.iter().any(|v| (v - 4.0).abs() < 1e-5));
        let mut only = f64::symmetric_eigenvalues(2, vec![2.0, -2.0, -2.0, 2.0]);
        only.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((only[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn mul_abt_small() {
        // A = [[1,2],[3,4],[5,6]], B = [[1,0],[0,1]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(f64::mul_abt(3, 2, 2, &a, &b), a.to_vec());
        let c = f64::mul_abt(3, 3, 2, &a, &a);
        assert_eq!(c[1], 11.0);
        assert_eq!(c[3], 11.0);
        assert_eq!(c[8], 61.0);
    }
}
