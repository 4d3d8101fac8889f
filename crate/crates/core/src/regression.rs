//! Regression depth of a line, the deepest line, and normal-error
//! replication of short series around it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{cmp, Scalar};
use crate::stats::{mad, mean_sd, RandomStream};

/// Normal-consistency factor for the MAD.
pub const MAD_NORMAL_FACTOR: f64 = 1.4826;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScaleEstimator {
    /// `1.4826 * MAD`.
    #[default]
    Mad,
    /// Sample standard deviation.
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    pub rdepth: usize,
    pub sigma: T,
}

impl<T: Scalar> LinearFit<T> {
    pub fn predict(&self, t: T) -> T {
        self.intercept + self.slope * t
    }
}

/// Regression depth of the line `y = intercept + slope * t`.
///
/// Minimum over split points (between consecutive distinct `t`, plus both
/// infinities) of the number of points that would have to be removed to make
/// the line a nonfit. Zero residuals count as both signs.
pub fn regression_depth<T: Scalar>(slope: T, intercept: T, points: &[(T, T)]) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::Empty("regression depth of no points"));
    }
    let mut obs: Vec<(T, T)> = points
        .iter()
        .map(|&(t, y)| (t, residual(slope, intercept, t, y)))
        .collect();
    obs.sort_by(|a, b| cmp(&a.0, &b.0));

    let zero = T::zero();
    let total_pos = obs.iter().filter(|o| o.1 >= zero).count();
    let total_neg = obs.iter().filter(|o| o.1 <= zero).count();
    // split at -inf: everything on the right
    let mut best = total_neg.min(total_pos);
    let (mut left_pos, mut left_neg) = (0, 0);
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        while i < obs.len() && obs[i].0 == t {
            if obs[i].1 >= zero {
                left_pos += 1;
            }
            if obs[i].1 <= zero {
                left_neg += 1;
            }
            i += 1;
        }
        let right_pos = total_pos - left_pos;
        let right_neg = total_neg - left_neg;
        best = best.min((left_pos + right_neg).min(left_neg + right_pos));
    }
    Ok(best)
}

/// Residual `y - (intercept + slope * t)`, snapped to zero when it is within
/// rounding error of the terms, so lines through two observations keep both
/// of them on the line.
fn residual<T: Scalar>(slope: T, intercept: T, t: T, y: T) -> T {
    let fitted = slope * t;
    let r = y - intercept - fitted;
    let scale = y.abs() + intercept.abs() + fitted.abs();
    if r.abs() <= T::lit(16.0) * T::epsilon() * scale {
        T::zero()
    } else {
        r
    }
}

fn l1_residual<T: Scalar>(slope: T, intercept: T, points: &[(T, T)]) -> T {
    points
        .iter()
        .fold(T::zero(), |a, &(t, y)| a + residual(slope, intercept, t, y).abs())
}

/// Deepest line with the default MAD residual scale.
pub fn deepest_line<T: Scalar>(points: &[(T, T)]) -> Result<LinearFit<T>> {
    deepest_line_with_scale(points, ScaleEstimator::Mad)
}

/// Deepest line among all lines through two observations with distinct `t`.
///
/// Ties on depth go to the smaller sum of absolute residuals, then to the
/// lexicographically smaller `(slope, intercept)`.
pub fn deepest_line_with_scale<T: Scalar>(points: &[(T, T)], scale: ScaleEstimator) -> Result<LinearFit<T>> {
    let n = points.len();
    let mut candidates = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (ti, yi) = points[i];
            let (tj, yj) = points[j];
            if ti != tj {
                let slope = (yj - yi) / (tj - ti);
                candidates.push((slope, yi - slope * ti));
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::invalid("deepest line needs at least two distinct t values"));
    }

    let scored: Vec<(usize, T, T, T)> = candidates
        .par_iter()
        .map(|&(b, a)| {
            let depth = regression_depth(b, a, points).unwrap_or(0);
            (depth, l1_residual(b, a, points), b, a)
        })
        .collect();
    let best = scored
        .iter()
        .copied()
        .reduce(|x, y| {
            let order =
                y.0.cmp(&x.0)
                    .then(cmp(&x.1, &y.1))
                    .then(cmp(&x.2, &y.2))
                    .then(cmp(&x.3, &y.3));
            if order.is_gt() {
                y
            } else {
                x
            }
        })
        .expect("non-empty candidates");
    let (rdepth, _, slope, intercept) = best;

    let residuals: Vec<T> = points.iter().map(|&(t, y)| residual(slope, intercept, t, y)).collect();
    let sigma = match scale {
        ScaleEstimator::Mad => sigma_hat(&residuals)?,
        ScaleEstimator::Classical => mean_sd(&residuals).1,
    };
    Ok(LinearFit {
        slope,
        intercept,
        rdepth,
        sigma,
    })
}

/// Normal-consistent MAD scale of residuals.
pub fn sigma_hat<T: Scalar>(residuals: &[T]) -> Result<T> {
    Ok(T::lit(MAD_NORMAL_FACTOR) * mad(residuals)?)
}

/// `m` equally spaced points on `[t0, t1]`, endpoints included.
pub fn uniform_grid<T: Scalar>(t0: T, t1: T, m: usize) -> Result<Vec<T>> {
    if m == 0 {
        return Err(Error::invalid("replication needs m >= 1"));
    }
    if t0.is_nan() || t1.is_nan() || t1 <= t0 {
        return Err(Error::invalid("replication needs t1 > t0"));
    }
    if m == 1 {
        return Ok(vec![t0]);
    }
    let step = (t1 - t0) / T::from_count(m - 1);
    Ok((0..m)
        .map(|j| if j == m - 1 { t1 } else { t0 + step * T::from_count(j) })
        .collect())
}

/// Noisy trend `intercept + slope * t + sigma * e`, `e` standard normal, on a
/// uniform `m`-point grid over `[t0, t1]`. Returns `(grid, values)`.
pub fn replicate_series<T: Scalar>(
    fit: &LinearFit<T>,
    t0: T,
    t1: T,
    m: usize,
    stream: &mut RandomStream,
) -> Result<(Vec<T>, Vec<T>)> {
    let grid = uniform_grid(t0, t1, m)?;
    let values = grid
        .iter()
        .map(|&t| {
            let e: T = stream.normal_variate();
            fit.predict(t) + fit.sigma * e
        })
        .collect();
    Ok((grid, values))
}
