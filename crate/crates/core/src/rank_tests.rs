//! Rank-sum statistic over the peripheral group, its null moments and a
//! permutation p-value.

use std::collections::HashSet;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::scalar::{cmp, Scalar};
use crate::stats::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WilcoxonResult<T> {
    /// Sum of ranks over group C.
    pub w: T,
    pub n_c: usize,
    pub n_f: usize,
    pub null_mean: T,
    pub null_sd: T,
    pub p_value: Option<T>,
}

impl<T: Scalar> WilcoxonResult<T> {
    /// Rank sum over the complementary group F.
    pub fn w_f(&self) -> T {
        let n = T::from_count(self.n_c + self.n_f);
        n * (n + T::one()) / T::lit(2.0) - self.w
    }
}

fn check_group(n: usize, group_c: &[usize]) -> Result<()> {
    if group_c.is_empty() {
        return Err(Error::EmptyGroup('C'));
    }
    if group_c.len() >= n {
        return Err(Error::EmptyGroup('F'));
    }
    let mut seen = HashSet::with_capacity(group_c.len());
    for &i in group_c {
        if i >= n {
            return Err(Error::invalid(format!("group index {i} out of range for {n} ranks")));
        }
        if !seen.insert(i) {
            return Err(Error::invalid(format!("group index {i} repeated")));
        }
    }
    Ok(())
}

/// `sum(t^3 - t)` over groups of tied ranks.
fn tie_term<T: Scalar>(ranks: &[T]) -> T {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(cmp);
    let mut total = T::zero();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = T::from_count(j - i);
        total = total + t * t * t - t;
        i = j;
    }
    total
}

/// Null mean `n_c (N + 1) / 2` and tie-corrected null standard deviation.
pub fn null_moments<T: Scalar>(ranks: &[T], n_c: usize) -> (T, T) {
    let big_n = ranks.len();
    let n = T::from_count(big_n);
    let nc = T::from_count(n_c);
    let nf = T::from_count(big_n - n_c);
    let twelve = T::lit(12.0);
    let mean = nc * (n + T::one()) / T::lit(2.0);
    let ties = if big_n > 1 {
        tie_term(ranks) / (n * (n - T::one()))
    } else {
        T::zero()
    };
    let var = nc * nf / twelve * ((n + T::one()) - ties);
    (mean, var.max(T::zero()).sqrt())
}

/// Rank sum of `group_c` with its null moments.
pub fn wilcoxon_sum<T: Scalar>(ranks: &[T], group_c: &[usize]) -> Result<WilcoxonResult<T>> {
    check_group(ranks.len(), group_c)?;
    let w = group_c.iter().fold(T::zero(), |a, &i| a + ranks[i]);
    let (null_mean, null_sd) = null_moments(ranks, group_c.len());
    Ok(WilcoxonResult {
        w,
        n_c: group_c.len(),
        n_f: ranks.len() - group_c.len(),
        null_mean,
        null_sd,
        p_value: None,
    })
}

/// Two-sided Monte Carlo permutation p-value
/// `(1 + #{|w* - mean| >= |w - mean|}) / (reps + 1)` over random subsets of
/// the same size as `group_c`.
pub fn permutation_pvalue<T: Scalar>(
    ranks: &[T],
    group_c: &[usize],
    reps: usize,
    stream: &mut RandomStream,
) -> Result<T> {
    if reps == 0 {
        return Err(Error::invalid("permutation test needs reps >= 1"));
    }
    let observed = wilcoxon_sum(ranks, group_c)?;
    let target = (observed.w - observed.null_mean).abs();
    let n = ranks.len();
    let mut hits = 0usize;
    for _ in 0..reps {
        let w = index::sample(stream.rng(), n, group_c.len())
            .into_iter()
            .fold(T::zero(), |a, i| a + ranks[i]);
        if (w - observed.null_mean).abs() >= target {
            hits += 1;
        }
    }
    Ok(T::from_count(1 + hits) / T::from_count(reps + 1))
}

/// Rank sums over `reps` uniformly random groups of size `n_c`.
pub fn random_group_sums<T: Scalar>(ranks: &[T], n_c: usize, reps: usize, stream: &mut RandomStream) -> Result<Vec<T>> {
    if n_c == 0 || n_c >= ranks.len() {
        return Err(Error::invalid(format!(
            "group size {n_c} must lie in 1..{}",
            ranks.len()
        )));
    }
    Ok((0..reps)
        .map(|_| {
            index::sample(stream.rng(), ranks.len(), n_c)
                .into_iter()
                .fold(T::zero(), |a, i| a + ranks[i])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranks(n: usize) -> Vec<f64> {
        (1..=n).map(|r| r as f64).collect()
    }

    #[test]
    fn sum_examples() {
        let r = wilcoxon_sum(&[1.0, 2.0, 3.0], &[2]).unwrap();
        assert_eq!(r.w, 3.0);
        let r = wilcoxon_sum(&ranks(16), &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(r.null_mean, 59.5);
        assert!((r.null_sd * r.null_sd - 7.0 * 9.0 * 17.0 / 12.0).abs() < 1e-12);
        assert_eq!(r.w + r.w_f(), 136.0);
    }

    #[test]
    fn group_errors() {
        assert!(matches!(wilcoxon_sum(&ranks(3), &[]), Err(Error::EmptyGroup('C'))));
        assert!(matches!(
            wilcoxon_sum(&ranks(3), &[0, 1, 2]),
            Err(Error::EmptyGroup('F'))
        ));
        assert!(wilcoxon_sum(&ranks(3), &[0, 0]).is_err());
        assert!(wilcoxon_sum(&ranks(3), &[5]).is_err());
    }

    #[test]
    fn tie_corrected_variance() {
        // ranks of {5, 5, 7, 9}: one tie of size 2
        let r = [1.5, 1.5, 3.0, 4.0];
        let (_, sd): (f64, f64) = null_moments(&r, 2);
        let expected = 2.0 * 2.0 / 12.0 * (5.0 - 6.0 / 12.0);
        assert!((sd * sd - expected).abs() < 1e-12);
    }

    #[test]
    fn single_draw_pvalue() {
        let r = ranks(10);
        for seed in 0..20 {
            let p = permutation_pvalue(&r, &[0, 1, 2], 1, &mut RandomStream::new(seed, 0)).unwrap();
            assert!(p == 0.5 || p == 1.0, "{p}");
        }
        assert!(permutation_pvalue(&r, &[0], 0, &mut RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn random_sums_respect_identity_with_singleton_complement() {
        let r = ranks(16);
        let sums = random_group_sums(&r, 15, 200, &mut RandomStream::new(3, 3)).unwrap();
        for s in sums {
            let excluded = 136.0 - s;
            assert!(r.contains(&excluded));
        }
        assert!(random_group_sums(&r, 16, 1, &mut RandomStream::new(3, 3)).is_err());
    }
}
