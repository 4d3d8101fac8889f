//! Functional depths (modified band, Fraiman–Muniz, extremal), the
//! functional median and the median-difference contrast between two groups.
//!
//! All three depths depend on the data only through the pointwise order of
//! the curves, so they are evaluated from integer counts and converted to the
//! scalar type once at the end.

use std::cmp::Ordering;

use crate::data::{DepthMethod, DepthVector, FunctionalSample, UnitId};
use crate::error::{Error, Result};
use crate::scalar::{cmp, Scalar};

/// Calls `f(j, counts)` for every grid position `j`, where `counts[i]` holds
/// for curve `i` the number of curves strictly below it, at or below it, and
/// strictly above it at that position.
fn for_each_column<T: Scalar>(sample: &FunctionalSample<T>, mut f: impl FnMut(usize, &[(usize, usize, usize)])) {
    let n = sample.len();
    let m = sample.grid_len();
    let mut by_column = vec![T::zero(); n * m];
    for (i, curve) in sample.curves().iter().enumerate() {
        for (j, &v) in curve.iter().enumerate() {
            by_column[j * n + i] = v;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut counts = vec![(0, 0, 0); n];
    for (j, column) in by_column.chunks_exact(n).enumerate() {
        let value = |i: usize| column[i];
        // the previous column's order is usually close to sorted
        order.sort_by(|&a, &b| cmp(&value(a), &value(b)));
        let mut start = 0;
        while start < n {
            let v = value(order[start]);
            let mut end = start + 1;
            while end < n && value(order[end]) == v {
                end += 1;
            }
            for &i in &order[start..end] {
                counts[i] = (start, end, n - end);
            }
            start = end;
        }
        f(j, &counts);
    }
}

fn choose2(k: usize) -> u64 {
    let k = k as u64;
    k * k.saturating_sub(1) / 2
}

/// Modified band depth with bands formed by pairs of curves.
///
/// A pair `(i, j)` covers `x(t)` unless both curves lie strictly on the same
/// side of it, so the number of covering pairs at `t` is
/// `C(n,2) - C(below,2) - C(above,2)`.
pub fn mbd<T: Scalar>(sample: &FunctionalSample<T>) -> Result<DepthVector<T>> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::TooFewCurves { required: 2, actual: n });
    }
    let m = sample.grid_len();
    let pairs = choose2(n);
    let mut covered = vec![0u64; n];
    for_each_column(sample, |_, counts| {
        for (acc, &(below, _, above)) in covered.iter_mut().zip(counts) {
            *acc += pairs - choose2(below) - choose2(above);
        }
    });
    let denom = T::lit((pairs * m as u64) as f64);
    let values = covered.into_iter().map(|c| T::lit(c as f64) / denom).collect();
    Ok(DepthVector::new(values, DepthMethod::Mbd, sample.units().to_vec()))
}

/// Fraiman–Muniz depth: grid average of `1 - |1/2 - F_t(x(t))|` with the
/// right-continuous pointwise ECDF `F_t`.
pub fn fm_depth<T: Scalar>(sample: &FunctionalSample<T>) -> Result<DepthVector<T>> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::Empty("functional sample"));
    }
    let m = sample.grid_len();
    // 1 - |1/2 - k/n| = (2n - |n - 2k|) / 2n
    let mut num = vec![0u64; n];
    for_each_column(sample, |_, counts| {
        for (acc, &(_, at_or_below, _)) in num.iter_mut().zip(counts) {
            *acc += (2 * n - n.abs_diff(2 * at_or_below)) as u64;
        }
    });
    let denom = T::lit((2 * n as u64 * m as u64) as f64);
    let values = num.into_iter().map(|c| T::lit(c as f64) / denom).collect();
    Ok(DepthVector::new(values, DepthMethod::Fm, sample.units().to_vec()))
}

/// Pointwise univariate depth of one curve used by the extremal depth.
#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseDepthCurve<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
}

/// Distribution of a curve's pointwise depths over the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthCdf<T> {
    /// Sorted distinct pointwise depth levels.
    pub levels: Vec<T>,
    /// Fraction of grid points with pointwise depth `<=` the matching level.
    pub masses: Vec<T>,
}

/// Pointwise depth numerators `n - |below - above|` (depth = numerator / n).
fn pointwise_numerators<T: Scalar>(sample: &FunctionalSample<T>) -> Vec<Vec<usize>> {
    let n = sample.len();
    let m = sample.grid_len();
    let mut out = vec![Vec::with_capacity(m); n];
    for_each_column(sample, |_, counts| {
        for (row, &(below, _, above)) in out.iter_mut().zip(counts) {
            row.push(n - below.abs_diff(above));
        }
    });
    out
}

/// Pointwise depths `1 - |#{below} - #{above}| / n` for every curve.
pub fn pointwise_depths<T: Scalar>(sample: &FunctionalSample<T>) -> Vec<PointwiseDepthCurve<T>> {
    let n = T::from_count(sample.len());
    pointwise_numerators(sample)
        .into_iter()
        .map(|row| PointwiseDepthCurve {
            grid: sample.grid().to_vec(),
            values: row.into_iter().map(|k| T::from_count(k) / n).collect(),
        })
        .collect()
}

/// Cumulative counts of grid points with pointwise numerator `<= k`, for
/// `k = 0..=n`. Lexicographically smaller means deeper.
fn cumulative_profile(numerators: &[usize], n: usize) -> Vec<u32> {
    let mut hist = vec![0u32; n + 1];
    for &k in numerators {
        hist[k] += 1;
    }
    let mut acc = 0;
    hist.iter()
        .map(|&h| {
            acc += h;
            acc
        })
        .collect()
}

/// Depth distribution of every curve.
pub fn depth_cdfs<T: Scalar>(sample: &FunctionalSample<T>) -> Vec<DepthCdf<T>> {
    let n = sample.len();
    let m = T::from_count(sample.grid_len());
    pointwise_numerators(sample)
        .iter()
        .map(|row| {
            let profile = cumulative_profile(row, n);
            let mut levels = Vec::new();
            let mut masses = Vec::new();
            let mut prev = 0;
            for (k, &c) in profile.iter().enumerate() {
                if c != prev {
                    levels.push(T::from_count(k) / T::from_count(n));
                    masses.push(T::lit(f64::from(c)) / m);
                    prev = c;
                }
            }
            DepthCdf { levels, masses }
        })
        .collect()
}

/// Compares two depth distributions: `Greater` when `a` is deeper than `b`,
/// i.e. `a` puts less mass at the smallest level where the two differ.
pub fn compare_depth_cdfs<T: Scalar>(a: &DepthCdf<T>, b: &DepthCdf<T>) -> Ordering {
    let mut levels: Vec<T> = a.levels.iter().chain(&b.levels).copied().collect();
    levels.sort_by(cmp);
    levels.dedup();
    let mass_at = |cdf: &DepthCdf<T>, r: T| {
        let k = cdf.levels.partition_point(|&l| l <= r);
        if k == 0 {
            T::zero()
        } else {
            cdf.masses[k - 1]
        }
    };
    for r in levels {
        let (ma, mb) = (mass_at(a, r), mass_at(b, r));
        if ma != mb {
            return cmp(&mb, &ma);
        }
    }
    Ordering::Equal
}

/// Extremal depth: `ED(g) = #{j : g ⪰ g_j} / n` under the left-tail
/// lexicographic order of pointwise depth distributions.
pub fn extremal_depth<T: Scalar>(sample: &FunctionalSample<T>) -> Result<DepthVector<T>> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::Empty("functional sample"));
    }
    if ed_grid_is_sparse(sample) {
        log::warn!(
            "extremal depth on a sparse grid ({} points for {} curves); consider replicating the series",
            sample.grid_len(),
            n
        );
    }
    let profiles: Vec<Vec<u32>> = pointwise_numerators(sample)
        .iter()
        .map(|row| cumulative_profile(row, n))
        .collect();
    let mut sorted = profiles.clone();
    sorted.sort();
    let values = profiles
        .iter()
        .map(|p| {
            // curves dominated by p have a lexicographically larger-or-equal profile
            let strictly_deeper = sorted.partition_point(|q| q < p);
            T::from_count(n - strictly_deeper) / T::from_count(n)
        })
        .collect();
    Ok(DepthVector::new(values, DepthMethod::Ed, sample.units().to_vec()))
}

/// True when the grid is too coarse relative to the number of curves for the
/// extremal depth to separate them well.
pub fn ed_grid_is_sparse<T: Scalar>(sample: &FunctionalSample<T>) -> bool {
    sample.grid_len() < 2 * sample.len()
}

/// Dispatches to the requested functional depth.
pub fn functional_depth<T: Scalar>(sample: &FunctionalSample<T>, method: DepthMethod) -> Result<DepthVector<T>> {
    match method {
        DepthMethod::Mbd => mbd(sample),
        DepthMethod::Fm => fm_depth(sample),
        DepthMethod::Ed => extremal_depth(sample),
        DepthMethod::Projection => Err(Error::invalid("projection depth is not a functional depth")),
    }
}

/// Index of the largest value; ties go to the smallest index.
pub(crate) fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// The deepest sample curve under `method`; ties resolve to the lowest unit
/// index. A single curve is its own median under every method.
pub fn functional_median<T: Scalar>(sample: &FunctionalSample<T>, method: DepthMethod) -> Result<(UnitId, Vec<T>)> {
    if sample.is_empty() {
        return Err(Error::Empty("functional sample"));
    }
    let best = if sample.len() == 1 {
        0
    } else {
        argmax(&functional_depth(sample, method)?.values)
    };
    Ok((sample.units()[best].clone(), sample.curve(best).to_vec()))
}

/// Trapezoidal integral of `values` over `grid`.
pub fn trapezoid<T: Scalar>(grid: &[T], values: &[T]) -> T {
    let half = T::lit(0.5);
    grid.windows(2)
        .zip(values.windows(2))
        .fold(T::zero(), |acc, (t, v)| acc + (t[1] - t[0]) * (v[0] + v[1]) * half)
}

/// Pointwise difference between two functional medians.
#[derive(Clone, Debug, PartialEq)]
pub struct MedianDifference<T> {
    pub grid: Vec<T>,
    pub diff: Vec<T>,
    pub sup_norm: T,
    pub l2_norm: T,
}

impl<T: Scalar> MedianDifference<T> {
    pub fn from_diff(grid: Vec<T>, diff: Vec<T>) -> Self {
        let sup_norm = diff.iter().fold(T::zero(), |a, d| a.max(d.abs()));
        let sq: Vec<T> = diff.iter().map(|d| *d * *d).collect();
        let l2_norm = trapezoid(&grid, &sq).sqrt();
        Self {
            grid,
            diff,
            sup_norm,
            l2_norm,
        }
    }
}

/// Median of `central` minus median of `peripheral`, with sup and L2 norms.
pub fn median_difference<T: Scalar>(
    central: &FunctionalSample<T>,
    peripheral: &FunctionalSample<T>,
    method: DepthMethod,
) -> Result<MedianDifference<T>> {
    if central.grid() != peripheral.grid() {
        return Err(Error::GridMismatch);
    }
    let (_, mf) = functional_median(central, method)?;
    let (_, mc) = functional_median(peripheral, method)?;
    let diff = mf.iter().zip(&mc).map(|(a, b)| *a - *b).collect();
    Ok(MedianDifference::from_diff(central.grid().to_vec(), diff))
}

/// Fraction of the time domain (trapezoidal measure) on which the absolute
/// median difference exceeds `tau`.
pub fn causal_strength<T: Scalar>(md: &MedianDifference<T>, tau: T) -> Result<T> {
    if tau.is_nan() || tau < T::zero() {
        return Err(Error::invalid("tau must be non-negative"));
    }
    let indicator: Vec<T> = md
        .diff
        .iter()
        .map(|d| if d.abs() > tau { T::one() } else { T::zero() })
        .collect();
    match md.grid.len() {
        0 => Err(Error::Empty("median difference")),
        1 => Ok(indicator[0]),
        m => {
            let span = md.grid[m - 1] - md.grid[0];
            Ok(trapezoid(&md.grid, &indicator) / span)
        }
    }
}
