//! Centrality-oriented causal procedure: replicate the treatment series,
//! split units by functional depth, rank outcomes by projection depth and
//! compare the groups with the rank-sum statistic, against a random-split
//! baseline.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{DepthMethod, DepthVector, FunctionalSample, MultivariateSample, UnitId};
use crate::error::{Error, Result};
use crate::functional::{argmax, causal_strength, functional_depth, median_difference, MedianDifference};
use crate::multivariate::{depth_ranks, DirectionSet, DEFAULT_DIRECTIONS};
use crate::rank_tests::{permutation_pvalue, random_group_sums, wilcoxon_sum, WilcoxonResult};
use crate::regression::{deepest_line_with_scale, replicate_series, LinearFit, ScaleEstimator};
use crate::scalar::{cmp, Scalar};
use crate::stats::{mean_sd, streams, RandomStream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitMode {
    /// F = units with depth `>= alpha`.
    Threshold,
    /// C = the `floor(q * n)` lowest-depth units.
    Quantile(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Replication {
    None,
    Linear { m: usize, inner_reps: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub depth_method: DepthMethod,
    pub split_mode: SplitMode,
    pub alpha: f64,
    pub replication: Replication,
    pub outer_reps: usize,
    pub baseline_reps: usize,
    pub permutation_reps: usize,
    pub seed: u64,
    pub outlyingness_variant: bool,
    /// Share of grid points a curve must spend on one side of the functional
    /// median to count as one-sided in the outlyingness variant.
    pub one_sided_fraction: f64,
    pub direction_count: usize,
    pub scale: ScaleEstimator,
    pub strength_tau: f64,
    /// Worker threads; 0 uses the global pool. Never affects results.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            depth_method: DepthMethod::Ed,
            split_mode: SplitMode::Threshold,
            alpha: 0.5,
            replication: Replication::Linear {
                m: 500,
                inner_reps: 1000,
            },
            outer_reps: 100,
            baseline_reps: 1000,
            permutation_reps: 1000,
            seed: 1,
            outlyingness_variant: false,
            one_sided_fraction: 0.8,
            direction_count: DEFAULT_DIRECTIONS,
            scale: ScaleEstimator::Mad,
            strength_tau: 0.0,
            threads: 0,
        }
    }
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::invalid(format!("bad boolean {value:?} for {key}"))),
    }
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
            line: i + 1,
            message: format!("expected `key = value`, found {line:?}"),
        })?;
        out.push((i + 1, k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

impl PipelineConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "depth_method" | "method" => self.depth_method = value.parse()?,
            "split_mode" => {
                self.split_mode = match value.to_ascii_lowercase().as_str() {
                    "threshold" => SplitMode::Threshold,
                    "quantile" => SplitMode::Quantile(match self.split_mode {
                        SplitMode::Quantile(q) => q,
                        SplitMode::Threshold => 0.5,
                    }),
                    _ => return Err(Error::invalid(format!("unknown split_mode {value:?}"))),
                }
            }
            "quantile" => self.split_mode = SplitMode::Quantile(parse_value(key, value)?),
            "alpha" => self.alpha = parse_value(key, value)?,
            "replication" => {
                self.replication = match value.to_ascii_lowercase().as_str() {
                    "none" => Replication::None,
                    "linear" => match self.replication {
                        r @ Replication::Linear { .. } => r,
                        Replication::None => Replication::Linear {
                            m: 500,
                            inner_reps: 1000,
                        },
                    },
                    _ => return Err(Error::invalid(format!("unknown replication {value:?}"))),
                }
            }
            "m" | "inner_reps" => {
                let v: usize = parse_value(key, value)?;
                let (mut m, mut inner) = match self.replication {
                    Replication::Linear { m, inner_reps } => (m, inner_reps),
                    Replication::None => (500, 1000),
                };
                if key == "m" {
                    m = v;
                } else {
                    inner = v;
                }
                self.replication = Replication::Linear { m, inner_reps: inner };
            }
            // the only grid implemented; accepted so configs can state it
            "replication_grid" => {
                if !value.eq_ignore_ascii_case("uniform") {
                    return Err(Error::invalid(format!("unsupported replication_grid {value:?}")));
                }
            }
            "outer_reps" => self.outer_reps = parse_value(key, value)?,
            "baseline_reps" => self.baseline_reps = parse_value(key, value)?,
            "permutation_reps" => self.permutation_reps = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "outlyingness_variant" => self.outlyingness_variant = parse_bool(key, value)?,
            "one_sided_fraction" => self.one_sided_fraction = parse_value(key, value)?,
            "direction_count" => self.direction_count = parse_value(key, value)?,
            "scale" => {
                self.scale = match value.to_ascii_lowercase().as_str() {
                    "mad" => ScaleEstimator::Mad,
                    "classical" | "sd" => ScaleEstimator::Classical,
                    _ => return Err(Error::invalid(format!("unknown scale {value:?}"))),
                }
            }
            "strength_tau" | "tau" => self.strength_tau = parse_value(key, value)?,
            "threads" => self.threads = parse_value(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a full config file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, k, v) in parse_key_values(text)? {
            cfg.set(&k, &v).map_err(|e| Error::Config {
                line,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if let SplitMode::Quantile(q) = self.split_mode {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::invalid("quantile must lie in (0, 1)"));
            }
        }
        if let Replication::Linear { m, inner_reps } = self.replication {
            if m == 0 || inner_reps == 0 {
                return Err(Error::invalid("replication needs m >= 1 and inner_reps >= 1"));
            }
        }
        if self.outer_reps == 0 || self.baseline_reps == 0 || self.permutation_reps == 0 {
            return Err(Error::invalid("repetition counts must be at least 1"));
        }
        if !(self.one_sided_fraction >= 0.0 && self.one_sided_fraction < 1.0) {
            return Err(Error::invalid("one_sided_fraction must lie in [0, 1)"));
        }
        if self.direction_count == 0 {
            return Err(Error::invalid("direction_count must be at least 1"));
        }
        if self.strength_tau.is_nan() || self.strength_tau < 0.0 {
            return Err(Error::invalid("strength_tau must be non-negative"));
        }
        if self.depth_method == DepthMethod::Projection {
            return Err(Error::invalid("the trajectory depth must be mbd, fm or ed"));
        }
        Ok(())
    }

    /// Every result-affecting field as `key = value` pairs, in a fixed order.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        let mut kv = vec![("depth_method", self.depth_method.to_string())];
        match self.split_mode {
            SplitMode::Threshold => kv.push(("split_mode", "threshold".into())),
            SplitMode::Quantile(q) => {
                kv.push(("split_mode", "quantile".into()));
                kv.push(("quantile", q.to_string()));
            }
        }
        kv.push(("alpha", self.alpha.to_string()));
        match self.replication {
            Replication::None => kv.push(("replication", "none".into())),
            Replication::Linear { m, inner_reps } => {
                kv.push(("replication", "linear".into()));
                kv.push(("m", m.to_string()));
                kv.push(("inner_reps", inner_reps.to_string()));
                kv.push(("replication_grid", "uniform".into()));
            }
        }
        kv.push(("outer_reps", self.outer_reps.to_string()));
        kv.push(("baseline_reps", self.baseline_reps.to_string()));
        kv.push(("permutation_reps", self.permutation_reps.to_string()));
        kv.push(("seed", self.seed.to_string()));
        kv.push(("outlyingness_variant", self.outlyingness_variant.to_string()));
        kv.push(("one_sided_fraction", self.one_sided_fraction.to_string()));
        kv.push(("direction_count", self.direction_count.to_string()));
        kv.push((
            "scale",
            match self.scale {
                ScaleEstimator::Mad => "mad",
                ScaleEstimator::Classical => "classical",
            }
            .into(),
        ));
        kv.push(("strength_tau", self.strength_tau.to_string()));
        kv
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_key_values() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Central (factual) and peripheral (counterfactual) units, as sorted row
/// indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupSplit {
    pub f: Vec<usize>,
    pub c: Vec<usize>,
}

impl GroupSplit {
    fn from_c(n: usize, mut c: Vec<usize>) -> Result<Self> {
        c.sort_unstable();
        let mut in_c = vec![false; n];
        for &i in &c {
            in_c[i] = true;
        }
        let f: Vec<usize> = (0..n).filter(|&i| !in_c[i]).collect();
        if c.is_empty() {
            return Err(Error::EmptyGroup('C'));
        }
        if f.is_empty() {
            return Err(Error::EmptyGroup('F'));
        }
        Ok(Self { f, c })
    }

    /// Group label of every unit, `'F'` or `'C'`.
    pub fn labels(&self) -> Vec<char> {
        let n = self.f.len() + self.c.len();
        let mut out = vec!['F'; n];
        for &i in &self.c {
            out[i] = 'C';
        }
        out
    }
}

/// Splits units by depth: C holds the low-depth units.
pub fn split_groups<T: Scalar>(depths: &DepthVector<T>, cfg: &PipelineConfig) -> Result<GroupSplit> {
    let n = depths.len();
    if n < 2 {
        return Err(Error::TooFewCurves { required: 2, actual: n });
    }
    let c = match cfg.split_mode {
        SplitMode::Threshold => {
            let alpha = T::lit(cfg.alpha);
            (0..n).filter(|&i| depths.values[i] < alpha).collect()
        }
        SplitMode::Quantile(q) => {
            let k = (q * n as f64).floor() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| cmp(&depths.values[a], &depths.values[b]).then(a.cmp(&b)));
            order.truncate(k);
            order
        }
    };
    GroupSplit::from_c(n, c)
}

/// Outlyingness-oriented split: among the low-depth units of
/// [`split_groups`], those lying strictly above (or strictly below) the
/// functional median on more than `one_sided_fraction` of the grid form F;
/// everything else forms C.
pub fn outlyingness_split<T: Scalar>(
    depths: &DepthVector<T>,
    functional: &FunctionalSample<T>,
    cfg: &PipelineConfig,
) -> Result<GroupSplit> {
    if depths.len() != functional.len() {
        return Err(Error::UnitMismatch);
    }
    let low = split_groups(depths, cfg)?.c;
    let median = functional.curve(argmax(&depths.values));
    let m = functional.grid_len() as f64;
    let f: Vec<usize> = low
        .into_iter()
        .filter(|&i| {
            let curve = functional.curve(i);
            let above = curve.iter().zip(median).filter(|(x, y)| x > y).count() as f64;
            let below = curve.iter().zip(median).filter(|(x, y)| x < y).count() as f64;
            above.max(below) / m > cfg.one_sided_fraction
        })
        .collect();
    if f.is_empty() {
        return Err(Error::EmptyGroup('F'));
    }
    let n = functional.len();
    let mut in_f = vec![false; n];
    for &i in &f {
        in_f[i] = true;
    }
    GroupSplit::from_c(n, (0..n).filter(|&i| !in_f[i]).collect())
}

/// Depths of the sample under the configured method and the split they induce.
pub fn depth_split<T: Scalar>(
    sample: &FunctionalSample<T>,
    cfg: &PipelineConfig,
) -> Result<(DepthVector<T>, GroupSplit)> {
    let depths = functional_depth(sample, cfg.depth_method)?;
    let split = if cfg.outlyingness_variant {
        outlyingness_split(&depths, sample, cfg)?
    } else {
        split_groups(&depths, cfg)?
    };
    Ok((depths, split))
}

/// Deepest-line fit of every unit's series.
pub fn fit_units<T: Scalar>(sample: &FunctionalSample<T>, scale: ScaleEstimator) -> Result<Vec<LinearFit<T>>> {
    sample
        .curves()
        .iter()
        .map(|c| {
            let pts: Vec<(T, T)> = sample.grid().iter().copied().zip(c.iter().copied()).collect();
            deepest_line_with_scale(&pts, scale)
        })
        .collect()
}

/// Replicates every unit on a common uniform `m`-point grid spanning the
/// original grid, drawing units in order from one stream.
pub fn replicate_sample<T: Scalar>(
    sample: &FunctionalSample<T>,
    fits: &[LinearFit<T>],
    m: usize,
    stream: &mut RandomStream,
) -> Result<FunctionalSample<T>> {
    let grid = sample.grid();
    let (t0, t1) = (grid[0], grid[grid.len() - 1]);
    let mut out_grid = Vec::new();
    let mut curves = Vec::with_capacity(fits.len());
    for fit in fits {
        let (g, y) = replicate_series(fit, t0, t1, m, stream)?;
        out_grid = g;
        curves.push(y);
    }
    FunctionalSample::new(out_grid, curves, sample.units().to_vec())
}

/// Mean depth of each unit over `reps` replications of the sample.
pub fn mean_replicated_depth<T: Scalar>(
    sample: &FunctionalSample<T>,
    method: DepthMethod,
    m: usize,
    reps: usize,
    seed: u64,
    scale: ScaleEstimator,
) -> Result<DepthVector<T>> {
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    let fits = fit_units(sample, scale)?;
    let runs: Vec<Result<Vec<T>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = RandomStream::new(seed, streams::id(streams::REPLICATION, r));
            let rep = replicate_sample(sample, &fits, m, &mut stream)?;
            Ok(functional_depth(&rep, method)?.values)
        })
        .collect();
    let mut sums = vec![T::zero(); sample.len()];
    for run in runs {
        for (s, v) in sums.iter_mut().zip(run?) {
            *s = *s + v;
        }
    }
    let r = T::from_count(reps);
    let values = sums.into_iter().map(|s| s / r).collect();
    Ok(DepthVector::new(values, method, sample.units().to_vec()))
}

/// Checks that both samples describe the same units and returns the outcomes
/// in trajectory order.
pub fn align<T: Scalar>(
    functional: &FunctionalSample<T>,
    outcomes: &MultivariateSample<T>,
) -> Result<MultivariateSample<T>> {
    outcomes.aligned_to(functional.units())
}

/// Outcome ranks by projection depth with the configured direction set.
pub fn outcome_ranks<T: Scalar>(outcomes: &MultivariateSample<T>, cfg: &PipelineConfig) -> Result<Vec<T>> {
    let dirs = DirectionSet::for_sample(outcomes, cfg.direction_count, cfg.seed)?;
    depth_ranks(outcomes, &dirs)
}

/// Inputs that stay fixed across replications.
struct Prepared<T> {
    ranks: Vec<T>,
    fits: Option<Vec<LinearFit<T>>>,
}

impl<T: Scalar> Prepared<T> {
    fn new(functional: &FunctionalSample<T>, outcomes: &MultivariateSample<T>, cfg: &PipelineConfig) -> Result<Self> {
        let outcomes = align(functional, outcomes)?;
        let ranks = outcome_ranks(&outcomes, cfg)?;
        let fits = match cfg.replication {
            Replication::None => None,
            Replication::Linear { .. } => Some(fit_units(functional, cfg.scale)?),
        };
        Ok(Self { ranks, fits })
    }

    fn run(
        &self,
        functional: &FunctionalSample<T>,
        cfg: &PipelineConfig,
        stream: &mut RandomStream,
    ) -> Result<WilcoxonResult<T>> {
        let replicated;
        let sample = match (&self.fits, cfg.replication) {
            (Some(fits), Replication::Linear { m, .. }) => {
                replicated = replicate_sample(functional, fits, m, stream)?;
                &replicated
            }
            _ => functional,
        };
        let (_, split) = depth_split(sample, cfg)?;
        wilcoxon_sum(&self.ranks, &split.c)
    }
}

/// One pass of the procedure: optional replication, functional depth and
/// split, depth ranks of the outcomes, rank sum over C.
pub fn run_once<T: Scalar>(
    functional: &FunctionalSample<T>,
    outcomes: &MultivariateSample<T>,
    cfg: &PipelineConfig,
    stream: &mut RandomStream,
) -> Result<WilcoxonResult<T>> {
    cfg.validate()?;
    Prepared::new(functional, outcomes, cfg)?.run(functional, cfg, stream)
}

fn baseline_from_ranks<T: Scalar>(ranks: &[T], n_c: usize, reps: usize, stream: &mut RandomStream) -> Result<(T, T)> {
    if reps == 0 {
        return Err(Error::invalid("baseline needs reps >= 1"));
    }
    let sums = random_group_sums(ranks, n_c, reps, stream)?;
    Ok(mean_sd(&sums))
}

/// Mean and standard deviation of the rank sum over uniformly random groups
/// of size `n_c`, ranking outcomes with the default direction set.
pub fn run_baseline<T: Scalar>(
    outcomes: &MultivariateSample<T>,
    n_c: usize,
    reps: usize,
    stream: &mut RandomStream,
) -> Result<(T, T)> {
    let dirs = DirectionSet::for_sample(outcomes, DEFAULT_DIRECTIONS, stream.seed())?;
    let ranks = depth_ranks(outcomes, &dirs)?;
    baseline_from_ranks(&ranks, n_c, reps, stream)
}

#[derive(Clone, Debug)]
pub struct CausalReport<T> {
    pub method: DepthMethod,
    pub units: Vec<UnitId>,
    /// Mean rank sum of each outer repetition.
    pub outer_means: Vec<T>,
    pub grand_mean_w: T,
    pub sd_of_means: T,
    pub baseline_mean_w: T,
    pub baseline_sd: T,
    pub null_mean: T,
    /// Statistic on the original data's split, with its permutation p-value.
    pub original: WilcoxonResult<T>,
    pub split: GroupSplit,
    pub ranks: Vec<T>,
    pub depth_table: Vec<DepthVector<T>>,
    pub median_difference: MedianDifference<T>,
    pub strength: T,
    pub p_value: T,
}

/// Full procedure with nested Monte Carlo summaries.
///
/// Outer repetition `o`, inner repetition `i` draws from substream
/// `o * inner_reps + i`, and averages are reduced in index order, so the
/// report does not depend on the number of worker threads.
pub fn run_pipeline<T: Scalar>(
    functional: &FunctionalSample<T>,
    outcomes: &MultivariateSample<T>,
    cfg: &PipelineConfig,
) -> Result<CausalReport<T>> {
    cfg.validate()?;
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?;
        pool.install(|| pipeline_inner(functional, outcomes, cfg))
    } else {
        pipeline_inner(functional, outcomes, cfg)
    }
}

fn pipeline_inner<T: Scalar>(
    functional: &FunctionalSample<T>,
    outcomes: &MultivariateSample<T>,
    cfg: &PipelineConfig,
) -> Result<CausalReport<T>> {
    let prepared = Prepared::new(functional, outcomes, cfg)?;

    let (_, split) = depth_split(functional, cfg)?;
    let mut original = wilcoxon_sum(&prepared.ranks, &split.c)?;
    let mut perm_stream = RandomStream::new(cfg.seed, streams::id(streams::PERMUTATION, 0));
    let p_value = permutation_pvalue(&prepared.ranks, &split.c, cfg.permutation_reps, &mut perm_stream)?;
    original.p_value = Some(p_value);

    let outer_means = match cfg.replication {
        Replication::None => vec![original.w; cfg.outer_reps],
        Replication::Linear { inner_reps, .. } => {
            let total = cfg.outer_reps * inner_reps;
            let ws: Vec<Result<T>> = (0..total as u64)
                .into_par_iter()
                .map(|k| {
                    let mut stream = RandomStream::new(cfg.seed, streams::id(streams::REPLICATION, k));
                    prepared.run(functional, cfg, &mut stream).map(|r| r.w)
                })
                .collect();
            let ws: Vec<T> = ws.into_iter().collect::<Result<_>>()?;
            ws.chunks(inner_reps).map(|c| mean_sd(c).0).collect()
        }
    };
    let (grand_mean_w, sd_of_means) = mean_sd(&outer_means);

    let mut base_stream = RandomStream::new(cfg.seed, streams::id(streams::BASELINE, 0));
    let (baseline_mean_w, baseline_sd) =
        baseline_from_ranks(&prepared.ranks, split.c.len(), cfg.baseline_reps, &mut base_stream)?;

    let depth_table = DepthMethod::FUNCTIONAL
        .iter()
        .map(|&m| functional_depth(functional, m))
        .collect::<Result<Vec<_>>>()?;
    let md = median_difference(
        &functional.select(&split.f)?,
        &functional.select(&split.c)?,
        cfg.depth_method,
    )?;
    let strength = causal_strength(&md, T::lit(cfg.strength_tau))?;

    Ok(CausalReport {
        method: cfg.depth_method,
        units: functional.units().to_vec(),
        outer_means,
        grand_mean_w,
        sd_of_means,
        baseline_mean_w,
        baseline_sd,
        null_mean: original.null_mean,
        original,
        split,
        ranks: prepared.ranks,
        depth_table,
        median_difference: md,
        strength,
        p_value,
    })
}
