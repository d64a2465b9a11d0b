//! Statistical distances, seeded random streams and parallel tallying.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qkernel::{int, to_f64, ExactScalar};

/// The random stream for sample `index` under `seed`.
///
/// Streams are independent ChaCha8 sequences, so a sample's draws do not
/// depend on how the samples are split across threads.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Tallies `f` over `samples` independent streams, in parallel.
///
/// `init` builds per-thread scratch state (sampler tables and the like).
pub fn sample_counts<K, S, I, F>(samples: u64, seed: u64, init: I, f: F) -> BTreeMap<K, u64>
where
    K: Ord + Send,
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut ChaCha8Rng) -> K + Sync + Send,
{
    (0..samples)
        .into_par_iter()
        .fold(
            || (init(), BTreeMap::new()),
            |(mut state, mut acc), i| {
                let mut rng = stream_rng(seed, i);
                *acc.entry(f(&mut state, &mut rng)).or_insert(0u64) += 1;
                (state, acc)
            },
        )
        .map(|(_, acc)| acc)
        .reduce(BTreeMap::new, merge_counts)
}

/// Fallible version of [`sample_counts`]; the first error seen is returned.
pub fn try_sample_counts<K, S, I, F>(samples: u64, seed: u64, init: I, f: F) -> Result<BTreeMap<K, u64>>
where
    K: Ord + Send,
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut ChaCha8Rng) -> Result<K> + Sync + Send,
{
    (0..samples)
        .into_par_iter()
        .try_fold(
            || (init(), BTreeMap::new()),
            |(mut state, mut acc), i| {
                let mut rng = stream_rng(seed, i);
                *acc.entry(f(&mut state, &mut rng)?).or_insert(0u64) += 1;
                Ok((state, acc))
            },
        )
        .map(|r| r.map(|(_, acc)| acc))
        .try_reduce(BTreeMap::new, |a, b| Ok(merge_counts(a, b)))
}

fn merge_counts<K: Ord>(mut a: BTreeMap<K, u64>, b: BTreeMap<K, u64>) -> BTreeMap<K, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, c) in b {
        *a.entry(k).or_insert(0) += c;
    }
    a
}

pub fn empirical_pmf<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> BTreeMap<K, f64> {
    let total: u64 = counts.values().sum();
    counts
        .iter()
        .map(|(k, &c)| (k.clone(), c as f64 / total as f64))
        .collect()
}

pub fn to_float_pmf<K: Ord + Clone>(p: &BTreeMap<K, ExactScalar>) -> BTreeMap<K, f64> {
    p.iter().map(|(k, v)| (k.clone(), to_f64(v))).collect()
}

/// `(1/2) Σ |p - r|` for pmfs given on the same key set.
pub fn tv_distance<K: Ord>(p: &BTreeMap<K, f64>, r: &BTreeMap<K, f64>) -> Result<f64> {
    if p.len() != r.len() || p.keys().zip(r.keys()).any(|(a, b)| a != b) {
        return Err(Error::SupportMismatch);
    }
    for m in [p, r] {
        let s: f64 = m.values().sum();
        if (s - 1.0).abs() > 1e-12 * m.len().max(1) as f64 {
            return Err(Error::Invalid(format!("pmf sums to {s}")));
        }
    }
    Ok(0.5 * p.values().zip(r.values()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// TV distance where keys missing from either side carry mass zero.
pub fn tv_distance_padded<K: Ord>(p: &BTreeMap<K, f64>, r: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, a) in p {
        sum += (a - r.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in r {
        if !p.contains_key(k) {
            sum += b.abs();
        }
    }
    0.5 * sum
}

/// Exact TV distance; keys missing from either side carry mass zero.
pub fn exact_tv_distance<K: Ord>(p: &BTreeMap<K, ExactScalar>, r: &BTreeMap<K, ExactScalar>) -> Result<ExactScalar> {
    let one = int(1);
    for m in [p, r] {
        if m.values().sum::<ExactScalar>() != one {
            return Err(Error::Invalid("exact pmf does not sum to 1".into()));
        }
    }
    let zero = ExactScalar::zero();
    let mut sum = ExactScalar::zero();
    for (k, a) in p {
        sum += (a - r.get(k).unwrap_or(&zero)).abs();
    }
    for (k, b) in r {
        if !p.contains_key(k) {
            sum += b.abs();
        }
    }
    Ok(sum / int(2))
}

/// Pearson statistic of observed counts against an exact law, with its
/// degrees of freedom (cells of positive expected mass minus one).
pub fn chi_square<K: Ord>(counts: &BTreeMap<K, u64>, law: &BTreeMap<K, f64>) -> (f64, usize) {
    let n: u64 = counts.values().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (k, &p) in law {
        if p <= 0.0 {
            continue;
        }
        cells += 1;
        let expected = p * n as f64;
        let observed = counts.get(k).copied().unwrap_or(0) as f64;
        stat += (observed - expected).powi(2) / expected;
    }
    (stat, cells.saturating_sub(1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub law: String,
    pub samples: u64,
    pub tv: f64,
    pub chi_square: f64,
    pub dof: usize,
}

impl DistanceReport {
    pub fn compare<K: Ord + Clone>(law: impl Into<String>, counts: &BTreeMap<K, u64>, exact: &BTreeMap<K, ExactScalar>) -> Self {
        let exact = to_float_pmf(exact);
        let (chi_square, dof) = chi_square(counts, &exact);
        DistanceReport {
            law: law.into(),
            samples: counts.values().sum(),
            tv: tv_distance_padded(&empirical_pmf(counts), &exact),
            chi_square,
            dof,
        }
    }
}

/// Maps `q > 1` to `1/q` together with an instruction to reverse the alphabet order.
pub fn q_reversal_guard(q: &ExactScalar) -> Result<(ExactScalar, bool)> {
    let one = int(1);
    if !q.is_positive() {
        return Err(Error::Parse(format!("q must be positive, got {q}")));
    }
    if *q == one {
        return Err(Error::Unsupported(
            "q = 1 is classical exchangeability and is not handled".into(),
        ));
    }
    if *q > one {
        Ok((q.recip(), true))
    } else {
        Ok((q.clone(), false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkernel::ratio;
    use rand::RngCore;

    #[test]
    fn tv_trivial_cases() {
        let p: BTreeMap<_, _> = [(1, 0.25), (2, 0.75)].into();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        let a: BTreeMap<_, _> = [(1, 1.0), (2, 0.0)].into();
        let b: BTreeMap<_, _> = [(1, 0.0), (2, 1.0)].into();
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        let c: BTreeMap<_, _> = [(3, 1.0)].into();
        assert_eq!(tv_distance(&a, &c), Err(Error::SupportMismatch));
        assert_eq!(tv_distance_padded(&a, &c), 1.0);
    }

    #[test]
    fn exact_tv() {
        let p: BTreeMap<_, _> = [(1, ratio(1, 3)), (2, ratio(2, 3))].into();
        let r: BTreeMap<_, _> = [(1, ratio(1, 2)), (3, ratio(1, 2))].into();
        assert_eq!(exact_tv_distance(&p, &r).unwrap(), ratio(2, 3));
    }

    #[test]
    fn reversal_guard() {
        assert_eq!(q_reversal_guard(&ratio(1, 2)).unwrap(), (ratio(1, 2), false));
        assert_eq!(q_reversal_guard(&int(2)).unwrap(), (ratio(1, 2), true));
        assert!(matches!(q_reversal_guard(&int(1)), Err(Error::Unsupported(_))));
        assert!(matches!(q_reversal_guard(&int(0)), Err(Error::Parse(_))));
    }

    #[test]
    fn counts_do_not_depend_on_thread_split() {
        let f = |_: &mut (), rng: &mut ChaCha8Rng| rng.next_u32() % 5;
        let a = sample_counts(2000, 9, || (), f);
        let serial = (0..2000u64).fold(BTreeMap::new(), |mut m, i| {
            *m.entry(stream_rng(9, i).next_u32() % 5).or_insert(0u64) += 1;
            m
        });
        assert_eq!(a, serial);
    }

    #[test]
    fn chi_square_of_a_perfect_fit_is_zero() {
        let counts: BTreeMap<_, _> = [(0, 50u64), (1, 50)].into();
        let law: BTreeMap<_, _> = [(0, 0.5), (1, 0.5)].into();
        assert_eq!(chi_square(&counts, &law), (0.0, 1));
    }
}
