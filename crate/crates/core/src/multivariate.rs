//! Projection depth of outcome vectors and depth-induced ranks.

use rayon::prelude::*;

use crate::data::{DepthMethod, DepthVector, MultivariateSample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{mad_in_place, mid_ranks_within, streams, RandomStream};

/// Number of evenly spaced half-circle directions added to the exact 2-d
/// critical set.
pub const CIRCULAR_GRID: usize = 1024;

/// Default number of random directions for dimensions above two.
pub const DEFAULT_DIRECTIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionKind {
    Exact1D,
    Exact2DCircular,
    MonteCarlo { count: usize, seed: u64 },
}

/// Unit directions over which projection outlyingness is maximised.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSet<T> {
    directions: Vec<Vec<T>>,
    kind: DirectionKind,
}

impl<T: Scalar> DirectionSet<T> {
    pub fn exact_1d() -> Self {
        Self {
            directions: vec![vec![T::one()]],
            kind: DirectionKind::Exact1D,
        }
    }

    /// Every direction at which the projected median or MAD of `sample` can
    /// switch to a different linear expression, plus a circular grid.
    ///
    /// Projected medians and MADs are order statistics of `u·X_i` and of
    /// `|u·X_i - med|`, with `med` a point or a midpoint of two points. Their
    /// active expressions can only change where `u` is orthogonal to some
    /// `X_i + X_j - X_k - X_l`. Between two such directions the outlyingness
    /// is a ratio `|a·u| / |b·u|` with fixed `a, b`, which is monotone in the
    /// angle, so its supremum is attained on the critical set.
    pub fn exact_2d(sample: &MultivariateSample<T>) -> Result<Self> {
        if sample.dim() != 2 {
            return Err(Error::invalid(format!(
                "exact 2-d directions need 2 variables, got {}",
                sample.dim()
            )));
        }
        let pts = sample.points();
        let n = pts.len();
        let pairs: Vec<(T, T)> = (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| (pts[i][0] + pts[j][0], pts[i][1] + pts[j][1]))
            .collect();

        let mut dirs: Vec<[T; 2]> = Vec::with_capacity(pairs.len() * pairs.len() / 2 + CIRCULAR_GRID);
        for (p, a) in pairs.iter().enumerate() {
            for b in &pairs[p + 1..] {
                let (vx, vy) = (a.0 - b.0, a.1 - b.1);
                let norm = vx.hypot(vy);
                if norm > T::zero() {
                    dirs.push(canonical([-vy / norm, vx / norm]));
                }
            }
        }
        let pi = T::lit(std::f64::consts::PI);
        for k in 0..CIRCULAR_GRID {
            let theta = pi * T::from_count(k) / T::from_count(CIRCULAR_GRID);
            dirs.push(canonical([theta.cos(), theta.sin()]));
        }
        dirs.sort_by(|a, b| crate::scalar::cmp(&a[0], &b[0]).then(crate::scalar::cmp(&a[1], &b[1])));
        dirs.dedup();
        Ok(Self {
            directions: dirs.into_iter().map(|d| d.to_vec()).collect(),
            kind: DirectionKind::Exact2DCircular,
        })
    }

    /// `count` directions uniform on the unit sphere in `R^dim`. The first
    /// `k` directions do not depend on `count`.
    pub fn monte_carlo(dim: usize, count: usize, seed: u64) -> Result<Self> {
        if dim == 0 || count == 0 {
            return Err(Error::invalid("Monte Carlo directions need dim >= 1 and count >= 1"));
        }
        let mut stream = RandomStream::new(seed, streams::id(streams::DIRECTIONS, dim as u64));
        let mut directions = Vec::with_capacity(count);
        while directions.len() < count {
            let v: Vec<T> = (0..dim).map(|_| stream.normal_variate()).collect();
            let norm = v.iter().fold(T::zero(), |a, x| a + *x * *x).sqrt();
            if norm > T::lit(1e-6) {
                directions.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        Ok(Self {
            directions,
            kind: DirectionKind::MonteCarlo { count, seed },
        })
    }

    /// Exact directions for one and two variables, `mc_count` random
    /// directions otherwise.
    pub fn for_sample(sample: &MultivariateSample<T>, mc_count: usize, seed: u64) -> Result<Self> {
        match sample.dim() {
            1 => Ok(Self::exact_1d()),
            2 => Self::exact_2d(sample),
            l => Self::monte_carlo(l, mc_count, seed),
        }
    }

    pub fn directions(&self) -> &[Vec<T>] {
        &self.directions
    }

    pub fn kind(&self) -> DirectionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.directions.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Picks the representative of `{u, -u}` in the upper half plane.
fn canonical<T: Scalar>(u: [T; 2]) -> [T; 2] {
    if u[1] < T::zero() || (u[1] == T::zero() && u[0] < T::zero()) {
        [-u[0], -u[1]]
    } else {
        // avoid -0.0 so dedup sees equal directions
        [u[0] + T::zero(), u[1] + T::zero()]
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Projected median and MAD of a sample along each direction.
#[derive(Clone, Debug)]
pub struct ProjectionProfile<T> {
    directions: Vec<Vec<T>>,
    medians: Vec<T>,
    mads: Vec<T>,
}

impl<T: Scalar> ProjectionProfile<T> {
    pub fn new(sample: &MultivariateSample<T>, dirs: &DirectionSet<T>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Empty("multivariate sample"));
        }
        if dirs.dim() != sample.dim() {
            return Err(Error::invalid(format!(
                "directions have dimension {} but the sample has {}",
                dirs.dim(),
                sample.dim()
            )));
        }
        let (medians, mads): (Vec<T>, Vec<T>) = dirs
            .directions
            .par_iter()
            .map_init(
                || Vec::with_capacity(sample.len()),
                |buf, u| {
                    buf.clear();
                    buf.extend(sample.points().iter().map(|p| dot(u, p)));
                    mad_in_place(buf)
                },
            )
            .unzip();
        Ok(Self {
            directions: dirs.directions.clone(),
            medians,
            mads,
        })
    }

    /// Largest robustly standardised deviation of `x` over the directions.
    /// A zero MAD gives infinite outlyingness off the median and none on it.
    pub fn outlyingness(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for ((u, &med), &mad) in self.directions.iter().zip(&self.medians).zip(&self.mads) {
            let dev = (dot(u, x) - med).abs();
            let o = if mad > T::zero() {
                dev / mad
            } else if dev > T::zero() {
                T::infinity()
            } else {
                T::zero()
            };
            if o > worst {
                worst = o;
            }
        }
        worst
    }

    /// `1 / (1 + O(x))`.
    pub fn depth(&self, x: &[T]) -> T {
        let o = self.outlyingness(x);
        if o.is_infinite() {
            T::zero()
        } else {
            T::one() / (T::one() + o)
        }
    }
}

/// Projection depth of `x` relative to `sample`.
pub fn projection_depth<T: Scalar>(x: &[T], sample: &MultivariateSample<T>, dirs: &DirectionSet<T>) -> Result<T> {
    if x.len() != sample.dim() {
        return Err(Error::invalid("point dimension differs from the sample"));
    }
    Ok(ProjectionProfile::new(sample, dirs)?.depth(x))
}

/// Projection depth of every row with respect to the pooled sample.
pub fn projection_depths<T: Scalar>(sample: &MultivariateSample<T>, dirs: &DirectionSet<T>) -> Result<DepthVector<T>> {
    let profile = ProjectionProfile::new(sample, dirs)?;
    let values = sample.points().par_iter().map(|p| profile.depth(p)).collect();
    Ok(DepthVector::new(
        values,
        DepthMethod::Projection,
        sample.units().to_vec(),
    ))
}

/// Relative tolerance under which two depths count as tied when ranking.
pub fn rank_tie_tolerance<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// Mid-ranks of the rows' projection depths: rank 1 is the most outlying
/// row, rank `n` the deepest.
pub fn depth_ranks<T: Scalar>(sample: &MultivariateSample<T>, dirs: &DirectionSet<T>) -> Result<Vec<T>> {
    let depths = projection_depths(sample, dirs)?;
    mid_ranks_within(&depths.values, rank_tie_tolerance())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(v: &[f64]) -> MultivariateSample<f64> {
        MultivariateSample::from_points(v.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    fn diamond() -> MultivariateSample<f64> {
        MultivariateSample::from_points(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap()
    }

    #[test]
    fn one_dimensional_closed_form() {
        let s = one_d(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let d = DirectionSet::exact_1d();
        assert_eq!(projection_depth(&[3.0], &s, &d).unwrap(), 1.0);
        assert_eq!(projection_depth(&[5.0], &s, &d).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn diamond_center_and_vertex() {
        let s = diamond();
        let d = DirectionSet::exact_2d(&s).unwrap();
        assert_eq!(projection_depth(&[0.0, 0.0], &s, &d).unwrap(), 1.0);
        // O = 2|c| / (|c| + |s|), maximal along the first axis
        let pd = projection_depth(&[1.0, 0.0], &s, &d).unwrap();
        assert!((pd - 1.0 / 3.0).abs() < 1e-12, "{pd}");
    }

    #[test]
    fn degenerate_mad() {
        let s = one_d(&[2.0, 2.0, 2.0, 7.0]);
        let d = DirectionSet::exact_1d();
        assert_eq!(projection_depth(&[2.0], &s, &d).unwrap(), 1.0);
        assert_eq!(projection_depth(&[3.0], &s, &d).unwrap(), 0.0);
        let empty = MultivariateSample::<f64>::from_points(vec![]);
        assert!(empty.is_err());
    }

    #[test]
    fn rank_examples() {
        let d = DirectionSet::exact_1d();
        assert_eq!(depth_ranks(&one_d(&[0.0, 1.0, 2.0]), &d).unwrap(), vec![1.5, 3.0, 1.5]);
        assert_eq!(depth_ranks(&one_d(&[4.2]), &d).unwrap(), vec![1.0]);
    }

    #[test]
    fn directions_are_unit_vectors() {
        let s = diamond();
        for set in [
            DirectionSet::exact_2d(&s).unwrap(),
            DirectionSet::monte_carlo(6, 500, 9).unwrap(),
        ] {
            for u in set.directions() {
                let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monte_carlo_prefix_never_deepens() {
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|i| (0..4).map(|j| ((i * 7 + j * 3) % 11) as f64 - 5.0).collect())
            .collect();
        let s = MultivariateSample::from_points(pts).unwrap();
        let small = DirectionSet::monte_carlo(4, 50, 3).unwrap();
        let large = DirectionSet::monte_carlo(4, 400, 3).unwrap();
        assert_eq!(small.directions(), &large.directions()[..50]);
        for p in s.points() {
            let a = projection_depth(p, &s, &small).unwrap();
            let b = projection_depth(p, &s, &large).unwrap();
            assert!(b <= a);
        }
    }

    #[test]
    fn one_d_depth_decreases_along_rays() {
        let s = one_d(&[0.3, 1.2, 2.0, 2.2, 4.0, 5.5, 6.1]);
        let d = DirectionSet::exact_1d();
        let med = 2.2;
        let mut prev = 1.0;
        for k in 0..40 {
            let x = med + 0.25 * k as f64;
            let pd = projection_depth(&[x], &s, &d).unwrap();
            assert!(pd <= prev);
            prev = pd;
        }
    }
}
