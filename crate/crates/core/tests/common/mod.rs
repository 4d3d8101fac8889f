//! Independent oracles and synthetic datasets shared by the integration
//! tests. Nothing here calls into the library's depth or test routines.

#![allow(dead_code)]

use depthcause::{FunctionalSample, MultivariateSample, UnitId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Modified band depth by enumerating every pair and grid point.
pub fn mbd_oracle(curves: &[Vec<f64>]) -> Vec<f64> {
    let n = curves.len();
    let m = curves[0].len();
    let pairs = (n * (n - 1) / 2) as f64;
    curves
        .iter()
        .map(|x| {
            let mut total = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    let inside = (0..m)
                        .filter(|&t| {
                            let lo = curves[i][t].min(curves[j][t]);
                            let hi = curves[i][t].max(curves[j][t]);
                            lo <= x[t] && x[t] <= hi
                        })
                        .count();
                    total += inside as f64 / m as f64;
                }
            }
            total / pairs
        })
        .collect()
}

/// Fraiman–Muniz depth from the pointwise ECDF counted directly.
pub fn fm_oracle(curves: &[Vec<f64>]) -> Vec<f64> {
    let n = curves.len() as f64;
    let m = curves[0].len();
    curves
        .iter()
        .map(|x| {
            (0..m)
                .map(|t| {
                    let f = curves.iter().filter(|c| c[t] <= x[t]).count() as f64 / n;
                    1.0 - (0.5 - f).abs()
                })
                .sum::<f64>()
                / m as f64
        })
        .collect()
}

/// Pointwise depth `1 - |#below - #above| / n` of every curve.
pub fn pointwise_oracle(curves: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = curves.len();
    curves
        .iter()
        .map(|x| {
            (0..x.len())
                .map(|t| {
                    let below = curves.iter().filter(|c| c[t] < x[t]).count() as f64;
                    let above = curves.iter().filter(|c| c[t] > x[t]).count() as f64;
                    1.0 - (below - above).abs() / n as f64
                })
                .collect()
        })
        .collect()
}

/// Empirical CDF of pointwise depths evaluated at `r`.
fn depth_cdf_at(d: &[f64], r: f64) -> f64 {
    d.iter().filter(|&&v| v <= r).count() as f64 / d.len() as f64
}

/// True when `a` is at least as deep as `b` under the left-tail order.
pub fn ed_dominates(a: &[f64], b: &[f64]) -> bool {
    let mut levels: Vec<f64> = a.iter().chain(b).copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    for r in levels {
        let (fa, fb) = (depth_cdf_at(a, r), depth_cdf_at(b, r));
        if fa != fb {
            return fa < fb;
        }
    }
    true
}

/// Extremal depth by pairwise comparison of depth distributions.
pub fn ed_oracle(curves: &[Vec<f64>]) -> Vec<f64> {
    let pw = pointwise_oracle(curves);
    let n = curves.len();
    (0..n)
        .map(|g| (0..n).filter(|&j| ed_dominates(&pw[g], &pw[j])).count() as f64 / n as f64)
        .collect()
}

/// A line with rational coefficients `y = (a_num + b_num * t) / den`, so
/// residual signs on integer data are computed exactly.
#[derive(Clone, Copy, Debug)]
pub struct ExactLine {
    pub a_num: i64,
    pub b_num: i64,
    pub den: i64,
}

impl ExactLine {
    pub fn through(p: (i64, i64), q: (i64, i64)) -> Self {
        // (y - p.y)(q.t - p.t) = (q.y - p.y)(t - p.t)
        let den = q.0 - p.0;
        let b_num = q.1 - p.1;
        let a_num = p.1 * den - b_num * p.0;
        if den < 0 {
            Self {
                a_num: -a_num,
                b_num: -b_num,
                den: -den,
            }
        } else {
            Self { a_num, b_num, den }
        }
    }

    pub fn slope(&self) -> f64 {
        self.b_num as f64 / self.den as f64
    }

    pub fn intercept(&self) -> f64 {
        self.a_num as f64 / self.den as f64
    }

    fn residual_sign(&self, t: i64, y: i64) -> i64 {
        (y * self.den - self.a_num - self.b_num * t).signum()
    }
}

/// Regression depth over every split point and both orientations, with
/// exact residual signs.
pub fn rdepth_oracle(line: ExactLine, pts: &[(i64, i64)]) -> usize {
    let mut ts: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut splits = vec![f64::NEG_INFINITY, f64::INFINITY];
    splits.extend(ts.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    let res: Vec<(f64, i64)> = pts.iter().map(|&(t, y)| (t as f64, line.residual_sign(t, y))).collect();
    let mut best = usize::MAX;
    for u in splits {
        let lp = res.iter().filter(|(t, r)| *t <= u && *r >= 0).count();
        let ln = res.iter().filter(|(t, r)| *t <= u && *r <= 0).count();
        let rp = res.iter().filter(|(t, r)| *t > u && *r >= 0).count();
        let rn = res.iter().filter(|(t, r)| *t > u && *r <= 0).count();
        best = best.min((lp + rn).min(ln + rp));
    }
    best
}

fn sorted_median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Projection depth of `x` maximising outlyingness over `k` evenly spaced
/// half-circle directions.
pub fn pd_grid_oracle(x: [f64; 2], sample: &[[f64; 2]], k: usize) -> f64 {
    let mut worst: f64 = 0.0;
    let mut proj = vec![0.0; sample.len()];
    for step in 0..k {
        let theta = std::f64::consts::PI * step as f64 / k as f64;
        let (c, s) = (theta.cos(), theta.sin());
        for (p, q) in proj.iter_mut().zip(sample) {
            *p = c * q[0] + s * q[1];
        }
        let med = sorted_median(&mut proj);
        let mut dev: Vec<f64> = proj.iter().map(|p| (p - med).abs()).collect();
        let mad = sorted_median(&mut dev);
        let o = (c * x[0] + s * x[1] - med).abs() / mad;
        if o.is_nan() {
            continue;
        }
        worst = worst.max(o);
    }
    1.0 / (1.0 + worst)
}

/// One-dimensional projection depth in closed form.
pub fn pd_1d_closed_form(x: f64, sample: &[f64]) -> f64 {
    let mut v = sample.to_vec();
    let med = sorted_median(&mut v);
    let mut dev: Vec<f64> = sample.iter().map(|s| (s - med).abs()).collect();
    let mad = sorted_median(&mut dev);
    1.0 / (1.0 + (x - med).abs() / mad)
}

/// Calls `f` on every size-`k` subset of `0..n`.
pub fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact two-sided permutation p-value of a rank sum by enumeration.
pub fn exact_pvalue(ranks: &[f64], group: &[usize]) -> f64 {
    let n = ranks.len();
    let k = group.len();
    let mean = k as f64 * (n as f64 + 1.0) / 2.0;
    let w: f64 = group.iter().map(|&i| ranks[i]).sum();
    let target = (w - mean).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for_each_subset(n, k, |s| {
        let ws: f64 = s.iter().map(|&i| ranks[i]).sum();
        total += 1;
        if (ws - mean).abs() >= target {
            hits += 1;
        }
    });
    hits as f64 / total as f64
}

/// Observation years with the missing 2015 point.
pub fn study_years() -> Vec<f64> {
    [2012, 2013, 2014, 2016, 2017, 2018]
        .iter()
        .map(|&y| f64::from(y))
        .collect()
}

fn units(n: usize) -> Vec<UnitId> {
    (0..n).map(|i| UnitId::new(format!("unit{i:02}"), i)).collect()
}

/// Trajectories and outcomes drawn independently of each other.
pub fn null_dataset(seed: u64) -> (FunctionalSample<f64>, MultivariateSample<f64>) {
    let mut r = rng(seed);
    let grid = study_years();
    let n = 16;
    let curves = (0..n)
        .map(|_| {
            let level = 5.0 + normal(&mut r);
            let slope = 0.2 * normal(&mut r);
            grid.iter()
                .map(|t| level + slope * (t - 2012.0) + 0.3 * normal(&mut r))
                .collect()
        })
        .collect();
    let points = (0..n).map(|_| (0..6).map(|_| normal(&mut r)).collect()).collect();
    let names = (1..=6).map(|k| format!("a{k}")).collect();
    (
        FunctionalSample::new(grid, curves, units(n)).unwrap(),
        MultivariateSample::new(points, units(n), names).unwrap(),
    )
}

/// Trajectories spread around a common trend; each unit's outcome lies at a
/// distance from the outcome centre that grows with its trajectory's
/// distance from the central trajectory.
pub fn planted_dataset(seed: u64) -> (FunctionalSample<f64>, MultivariateSample<f64>) {
    planted_dataset_of(seed, 16)
}

pub fn planted_dataset_of(seed: u64, n: usize) -> (FunctionalSample<f64>, MultivariateSample<f64>) {
    let mut r = rng(seed);
    let grid = study_years();
    let centre = (n as f64 - 1.0) / 2.0;
    // distinct offsets, alternating sides of the trend
    let offsets: Vec<f64> = (0..n)
        .map(|v| if v % 2 == 0 { 0.5 * v as f64 } else { -0.5 * v as f64 })
        .collect();
    let curves = offsets
        .iter()
        .map(|d| {
            grid.iter()
                .map(|t| 10.0 + 0.3 * (t - 2012.0) + d + 0.1 * normal(&mut r))
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| offsets[a].total_cmp(&offsets[b]));
    let mut position = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        position[v] = p;
    }
    let points = (0..n)
        .map(|v| {
            let spread = (position[v] as f64 - centre).abs();
            let dir: Vec<f64> = (0..6).map(|_| normal(&mut r)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            dir.into_iter().map(|x| spread * x / norm).collect()
        })
        .collect();
    let names = (1..=6).map(|k| format!("a{k}")).collect();
    (
        FunctionalSample::new(grid, curves, units(n)).unwrap(),
        MultivariateSample::new(points, units(n), names).unwrap(),
    )
}

/// Random curves with small integer values, so ties are common.
pub fn small_fixture(r: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..m).map(|_| f64::from(r.random_range(0..4))).collect())
        .collect()
}

pub fn fixture_sample(curves: Vec<Vec<f64>>) -> FunctionalSample<f64> {
    let m = curves[0].len();
    FunctionalSample::from_curves((0..m).map(|t| t as f64).collect(), curves).unwrap()
}
