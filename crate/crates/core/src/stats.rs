//! Robust univariate primitives and seeded random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{cmp, Scalar};

/// Median with the midpoint convention for even lengths.
pub fn median<T: Scalar>(x: &[T]) -> Result<T> {
    if x.is_empty() {
        return Err(Error::Empty("median of an empty vector"));
    }
    let mut v = x.to_vec();
    Ok(median_in_place(&mut v))
}

/// Median of a non-empty buffer; reorders the buffer.
pub(crate) fn median_in_place<T: Scalar>(v: &mut [T]) -> T {
    let n = v.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (lower, hi, _) = v.select_nth_unstable_by(mid, cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = lower.iter().copied().fold(T::neg_infinity(), T::max);
        (lo + hi) / T::lit(2.0)
    }
}

/// Median absolute deviation about the median (unscaled).
pub fn mad<T: Scalar>(x: &[T]) -> Result<T> {
    if x.is_empty() {
        return Err(Error::Empty("MAD of an empty vector"));
    }
    let mut v = x.to_vec();
    Ok(mad_in_place(&mut v).1)
}

/// Returns `(median, mad)`; reorders and overwrites the buffer.
pub(crate) fn mad_in_place<T: Scalar>(v: &mut [T]) -> (T, T) {
    let med = median_in_place(v);
    for x in v.iter_mut() {
        *x = (*x - med).abs();
    }
    (med, median_in_place(v))
}

/// Right-continuous empirical CDF of `x` evaluated at `q`.
pub fn ecdf<T: Scalar>(x: &[T], q: T) -> Result<T> {
    if x.is_empty() {
        return Err(Error::Empty("ECDF of an empty vector"));
    }
    let below = x.iter().filter(|&&v| v <= q).count();
    Ok(T::from_count(below) / T::from_count(x.len()))
}

/// Ranks `1..=n` in ascending order; ties share the mean of their rank range.
pub fn mid_ranks<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    mid_ranks_within(x, T::zero())
}

/// Mid-ranks where values closer than `rel_tol * max(|a|, |b|, 1)` to their
/// sorted neighbour are treated as tied.
pub fn mid_ranks_within<T: Scalar>(x: &[T], rel_tol: T) -> Result<Vec<T>> {
    if x.is_empty() {
        return Err(Error::Empty("ranks of an empty vector"));
    }
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp(&x[a], &x[b]).then(a.cmp(&b)));
    let close = |a: T, b: T| {
        let scale = a.abs().max(b.abs()).max(T::one());
        (b - a).abs() <= rel_tol * scale
    };
    let mut ranks = vec![T::zero(); n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && close(x[order[end - 1]], x[order[end]]) {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let r = T::from_count(start + 1 + end) / T::lit(2.0);
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    Ok(ranks)
}

/// Sample mean and standard deviation (n - 1 denominator, 0 for n < 2).
pub fn mean_sd<T: Scalar>(x: &[T]) -> (T, T) {
    if x.is_empty() {
        return (T::nan(), T::nan());
    }
    let n = T::from_count(x.len());
    let mean = x.iter().fold(T::zero(), |a, &b| a + b) / n;
    if x.len() < 2 {
        return (mean, T::zero());
    }
    let ss = x.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean));
    (mean, (ss / (n - T::one())).sqrt())
}

/// A reproducible random substream.
///
/// Every `(seed, stream_id)` pair maps to an independent ChaCha8 stream, so
/// work split by substream gives identical draws whatever the thread count.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Next standard normal variate.
    pub fn normal_variate<T: Scalar>(&mut self) -> T {
        let z: f64 = self.rng.sample(StandardNormal);
        T::lit(z)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Stream identifiers reserved per purpose so that independent parts of a
/// run never share draws.
pub mod streams {
    const SHIFT: u32 = 56;

    pub const REPLICATION: u64 = 1 << SHIFT;
    pub const BASELINE: u64 = 2 << SHIFT;
    pub const PERMUTATION: u64 = 3 << SHIFT;
    pub const DIRECTIONS: u64 = 4 << SHIFT;

    pub fn id(purpose: u64, index: u64) -> u64 {
        debug_assert!(index < (1 << SHIFT));
        purpose | index
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 3.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(median(&[7.0]).unwrap(), 7.0);
        assert_eq!(median(&[4.0f32, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert!(median::<f64>(&[]).is_err());
    }

    #[test]
    fn mad_examples() {
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 1.0);
        assert_eq!(mad(&[3.3; 6]).unwrap(), 0.0);
        // deviations from 0.5 are all 0.5
        assert_eq!(mad(&[0.0, 0.0, 1.0, 1.0]).unwrap(), 0.5);
        assert!(mad::<f64>(&[]).is_err());
    }

    #[test]
    fn ecdf_examples() {
        let x = [0.0f64, 1.0, 2.0];
        assert!((ecdf(&x, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ecdf(&x, -0.5).unwrap(), 0.0);
        assert_eq!(ecdf(&x, 2.0).unwrap(), 1.0);
        assert!(ecdf::<f64>(&[], 0.0).is_err());
    }

    #[test]
    fn mid_rank_examples() {
        assert_eq!(mid_ranks(&[10.0, 30.0, 20.0]).unwrap(), vec![1.0, 3.0, 2.0]);
        assert_eq!(mid_ranks(&[5.0, 5.0, 7.0]).unwrap(), vec![1.5, 1.5, 3.0]);
        assert_eq!(mid_ranks(&[1.0; 4]).unwrap(), vec![2.5; 4]);
        assert!(mid_ranks::<f64>(&[]).is_err());
    }

    #[test]
    fn tolerant_ranks_merge_near_ties() {
        let r = mid_ranks_within(&[0.5, 0.5 + 1e-15, 0.9], 1e-12).unwrap();
        assert_eq!(r, vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RandomStream::new(42, 7);
        let mut b = RandomStream::new(42, 7);
        let mut c = RandomStream::new(42, 8);
        let xa: Vec<f64> = (0..16).map(|_| a.normal_variate()).collect();
        let xb: Vec<f64> = (0..16).map(|_| b.normal_variate()).collect();
        let xc: Vec<f64> = (0..16).map(|_| c.normal_variate()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn normal_moments() {
        let mut s = RandomStream::new(2024, 0);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| s.normal_variate()).collect();
        let (mean, sd) = mean_sd(&draws);
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((sd * sd - 1.0).abs() < 0.01, "var {}", sd * sd);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-1e3f64..1e3, 1..40)
        }

        proptest! {
            #[test]
            fn median_and_mad_equivariance(x in vec_strategy(), c in -50.0f64..50.0, s in -4.0f64..4.0) {
                let m = median(&x).unwrap();
                let d = mad(&x).unwrap();
                let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
                let scaled: Vec<f64> = x.iter().map(|v| v * s).collect();
                prop_assert!((median(&shifted).unwrap() - (m + c)).abs() < 1e-9);
                prop_assert!((mad(&shifted).unwrap() - d).abs() < 1e-9);
                prop_assert!((mad(&scaled).unwrap() - s.abs() * d).abs() < 1e-9);
                let mut rev = x.clone();
                rev.reverse();
                prop_assert_eq!(median(&rev).unwrap(), m);
            }

            #[test]
            fn rank_sum_is_triangular(x in prop::collection::vec(0i32..5, 1..50)) {
                let x: Vec<f64> = x.into_iter().map(f64::from).collect();
                let n = x.len() as f64;
                let sum: f64 = mid_ranks(&x).unwrap().iter().sum();
                prop_assert_eq!(sum, n * (n + 1.0) / 2.0);
            }
        }
    }
}
