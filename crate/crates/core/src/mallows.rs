//! The Mallows measure `Q_n` on `S_n`: exact pmf, the backward-rank and finite
//! q-shuffle samplers, the exact shuffle outcome law, and the finite
//! q-exchangeability verifier.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fenwick::OrderStatTree;
use crate::geometric::TruncatedGeometric;
use crate::qkernel::{q_factorial, ExactScalar, QParam};
use crate::words::{inversions, next_permutation, FiniteWord, Letter, ENUMERATION_BUDGET};

/// A permutation of `{1, …, n}` stored as its word `σ(1) ⋯ σ(n)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n + 1];
        for &x in &images {
            if x == 0 || x > n || std::mem::replace(&mut seen[x], true) {
                return Err(Error::Invalid(format!("{images:?} is not a permutation of 1..={n}")));
            }
        }
        Ok(Permutation(images))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((1..=n).collect())
    }

    /// The transposition of `i` and `j` inside `S_n`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut p = Self::identity(n);
        p.0.swap(i - 1, j - 1);
        p
    }

    /// `S_n` in lexicographic order of permutation words.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut cur: Vec<usize> = (1..=n).collect();
        let mut out = vec![Permutation(cur.clone())];
        while next_permutation(&mut cur) {
            out.push(Permutation(cur.clone()));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    /// `σ(i)` for 1-based `i`; fixed beyond the stored length.
    pub fn apply(&self, i: usize) -> usize {
        if i >= 1 && i <= self.0.len() {
            self.0[i - 1]
        } else {
            i
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (j, &i) in self.0.iter().enumerate() {
            inv[i - 1] = j + 1;
        }
        Permutation(inv)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        let n = self.len().max(other.len());
        Permutation((1..=n).map(|i| self.apply(other.apply(i))).collect())
    }

    /// The same permutation viewed inside `S_n`, `n ≥ len`.
    pub fn extend_to(&self, n: usize) -> Permutation {
        Permutation((1..=n.max(self.len())).map(|i| self.apply(i)).collect())
    }

    /// First position beyond `len` that is not fixed.
    pub fn moved_beyond(&self, len: usize) -> Option<usize> {
        (len + 1..=self.len()).find(|&i| self.0[i - 1] != i)
    }

    pub fn inversions(&self) -> u64 {
        inversions(&self.0)
    }

    pub fn as_word(&self) -> FiniteWord {
        FiniteWord(self.0.iter().map(|&x| x as Letter).collect())
    }

    pub fn from_word(w: &FiniteWord) -> Result<Self> {
        Self::from_images(w.letters().iter().map(|&a| a as usize).collect())
    }

    /// Reflection of the permutation matrix in the secondary diagonal,
    /// `(i, j) ↦ (n+1-j, n+1-i)`.
    pub fn antidiagonal_reflection(&self) -> Permutation {
        let n = self.len();
        let mut out = vec![0; n];
        for (j0, &i) in self.0.iter().enumerate() {
            let j = j0 + 1;
            out[n - i] = n + 1 - j;
        }
        Permutation(out)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.as_word().fmt(f)
    }
}

impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_word(&s.parse()?)
    }
}

/// `Q_n(σ) = q^{inv(σ)} / [n]_q!`.
pub fn mallows_pmf(sigma: &Permutation, q: &QParam) -> ExactScalar {
    q.pow(sigma.inversions() as i64) / q_factorial(sigma.len() as u64, q)
}

/// The whole of `Q_n` as a pmf on permutation words.
pub fn mallows_distribution(n: usize, q: &QParam) -> BTreeMap<FiniteWord, ExactScalar> {
    let norm = q_factorial(n as u64, q);
    Permutation::all(n)
        .into_iter()
        .map(|s| {
            let p = q.pow(s.inversions() as i64) / &norm;
            (s.as_word(), p)
        })
        .collect()
}

/// `β_j = #{i ≤ j : σ(i) ≤ σ(j)}`.
pub fn backward_ranks(sigma: &Permutation) -> Vec<usize> {
    let imgs = sigma.images();
    let n = imgs.len();
    // count of earlier values ≤ σ(j), via a Fenwick tree over values
    let mut tree = vec![0usize; n + 1];
    let mut out = Vec::with_capacity(n);
    for &x in imgs {
        let mut i = x;
        let mut below = 0;
        while i > 0 {
            below += tree[i];
            i -= i & i.wrapping_neg();
        }
        out.push(below + 1);
        let mut i = x;
        while i <= n {
            tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }
    out
}

/// Inverse of [`backward_ranks`]; needs `1 ≤ β_j ≤ j`.
pub fn from_backward_ranks(ranks: &[usize]) -> Result<Permutation> {
    let n = ranks.len();
    if let Some((j, &b)) = ranks.iter().enumerate().find(|&(j, &b)| b == 0 || b > j + 1) {
        return Err(Error::Invalid(format!("backward rank β_{} = {b} out of range", j + 1)));
    }
    // σ(j) is the β_j-th smallest value not used by σ(j+1), …, σ(n)
    let mut free = OrderStatTree::full(n);
    let mut images = vec![0; n];
    for j in (0..n).rev() {
        images[j] = free.take_kth(ranks[j] as u32);
    }
    Ok(Permutation(images))
}

/// Backward-rank sampler for `Q_n`: `j - β_j + 1 ~ G_{q,j}` independently.
#[derive(Debug, Clone)]
pub struct RankSampler {
    laws: Vec<TruncatedGeometric>,
}

impl RankSampler {
    pub fn new(n: usize, q: &QParam) -> Self {
        assert!(n >= 1);
        RankSampler {
            laws: (1..=n).map(|j| TruncatedGeometric::new(q, j)).collect(),
        }
    }

    pub fn sample_ranks<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.laws
            .iter()
            .enumerate()
            .map(|(j0, g)| j0 + 2 - g.sample(rng))
            .collect()
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Permutation {
        from_backward_ranks(&self.sample_ranks(rng)).expect("ranks in range")
    }
}

pub fn sample_mallows_ranks<R: RngCore + ?Sized>(n: usize, q: &QParam, rng: &mut R) -> Permutation {
    RankSampler::new(n, q).sample(rng)
}

/// The finite q-shuffle of words of a fixed length: step `m` takes the
/// `ξ_m`-th remaining letter, `ξ_m ~ G_{q, n-m+1}`.
#[derive(Debug, Clone)]
pub struct ShuffleSampler {
    // laws[k] is G_{q,k+1}
    laws: Vec<TruncatedGeometric>,
}

impl ShuffleSampler {
    pub fn new(n: usize, q: &QParam) -> Self {
        ShuffleSampler {
            laws: (1..=n).map(|k| TruncatedGeometric::new(q, k)).collect(),
        }
    }

    /// The selected positions `ξ_1, …, ξ_n`.
    pub fn sample_indices<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n = self.laws.len();
        (0..n).map(|m| self.laws[n - m - 1].sample(rng)).collect()
    }

    /// Applies the shuffle to `v` using an order-statistic tree over positions.
    pub fn shuffle<R: RngCore + ?Sized>(&self, v: &FiniteWord, rng: &mut R) -> FiniteWord {
        assert_eq!(v.len(), self.laws.len(), "sampler built for a different length");
        let xs = self.sample_indices(rng);
        apply_selection(v, &xs)
    }

    pub fn sample_permutation<R: RngCore + ?Sized>(&self, rng: &mut R) -> Permutation {
        let n = self.laws.len();
        let xs = self.sample_indices(rng);
        let mut free = OrderStatTree::full(n);
        Permutation(xs.iter().map(|&x| free.take_kth(x as u32)).collect())
    }
}

/// Output of the shuffle given the selection sequence.
pub fn apply_selection(v: &FiniteWord, xs: &[usize]) -> FiniteWord {
    let mut free = OrderStatTree::full(v.len());
    FiniteWord(xs.iter().map(|&x| v.letters()[free.take_kth(x as u32) - 1]).collect())
}

/// Same as [`apply_selection`] by deleting from a vector.
pub fn apply_selection_linear(v: &FiniteWord, xs: &[usize]) -> FiniteWord {
    let mut rest = v.letters().to_vec();
    FiniteWord(xs.iter().map(|&x| rest.remove(x - 1)).collect())
}

pub fn finite_qshuffle<R: RngCore + ?Sized>(v: &FiniteWord, q: &QParam, rng: &mut R) -> FiniteWord {
    if v.is_empty() {
        return FiniteWord::default();
    }
    ShuffleSampler::new(v.len(), q).shuffle(v, rng)
}

/// Exact law of [`finite_qshuffle`] for `|v| ≤ 8`.
pub fn shuffle_distribution(v: &FiniteWord, q: &QParam) -> Result<BTreeMap<FiniteWord, ExactScalar>> {
    shuffle_distribution_with_budget(v, q, ENUMERATION_BUDGET)
}

pub fn shuffle_distribution_with_budget(
    v: &FiniteWord,
    q: &QParam,
    budget: usize,
) -> Result<BTreeMap<FiniteWord, ExactScalar>> {
    let n = v.len();
    if n > budget {
        return Err(Error::Budget {
            what: "word length",
            limit: budget,
            got: n,
        });
    }
    let laws: Vec<TruncatedGeometric> = (1..=n).map(|k| TruncatedGeometric::new(q, k)).collect();
    let pmfs: Vec<Vec<ExactScalar>> = laws
        .iter()
        .map(|g| (1..=g.support_size()).map(|i| g.pmf(i)).collect())
        .collect();

    fn walk(
        rest: &mut Vec<Letter>,
        out: &mut Vec<Letter>,
        mass: ExactScalar,
        pmfs: &[Vec<ExactScalar>],
        acc: &mut BTreeMap<FiniteWord, ExactScalar>,
    ) {
        if rest.is_empty() {
            *acc.entry(FiniteWord(out.clone())).or_insert_with(ExactScalar::zero) += mass;
            return;
        }
        let law = &pmfs[rest.len() - 1];
        #[allow(clippy::needless_range_loop)]
        for x in 0..rest.len() {
            let a = rest.remove(x);
            out.push(a);
            walk(rest, out, &mass * &law[x], pmfs, acc);
            out.pop();
            rest.insert(x, a);
        }
    }

    let mut acc = BTreeMap::new();
    walk(
        &mut v.letters().to_vec(),
        &mut Vec::with_capacity(n),
        ExactScalar::from_integer(1.into()),
        &pmfs,
        &mut acc,
    );
    Ok(acc)
}

/// Where finite q-exchangeability fails: swapping positions `position` and
/// `position + 1` of `word` does not scale its mass by `q^{±1}` (or 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeWitness {
    pub word: FiniteWord,
    pub position: usize,
    pub mass: ExactScalar,
    pub swapped_mass: ExactScalar,
}

impl fmt::Display for ExchangeWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P({}) = {} but P(swap at {}) = {}",
            self.word, self.mass, self.position, self.swapped_mass
        )
    }
}

/// Checks `P(T_σ w) = q^{inv(T_σ w) - inv(w)} P(w)` for every adjacent
/// transposition and every word of positive mass.
pub fn verify_finite_qexchangeable(
    dist: &BTreeMap<FiniteWord, ExactScalar>,
    q: &QParam,
) -> std::result::Result<(), ExchangeWitness> {
    let zero = ExactScalar::zero();
    for (w, p) in dist {
        if p.is_zero() {
            continue;
        }
        let letters = w.letters();
        for i in 1..w.len() {
            let (a, b) = (letters[i - 1], letters[i]);
            let swapped = w.swap_adjacent(i);
            let ps = dist.get(&swapped).unwrap_or(&zero);
            let expect = match a.cmp(&b) {
                std::cmp::Ordering::Less => p * q.exact(),
                std::cmp::Ordering::Greater => p / q.exact(),
                std::cmp::Ordering::Equal => p.clone(),
            };
            if *ps != expect {
                return Err(ExchangeWitness {
                    word: w.clone(),
                    position: i,
                    mass: p.clone(),
                    swapped_mass: ps.clone(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkernel::{int, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(a: i64, b: i64) -> QParam {
        QParam::from_ratio(a, b).unwrap()
    }

    fn perm(s: &str) -> Permutation {
        s.parse().unwrap()
    }

    #[test]
    fn pmf_examples() {
        let h = q(1, 2);
        assert_eq!(mallows_pmf(&perm("321"), &h), ratio(1, 21));
        assert_eq!(mallows_pmf(&Permutation::identity(3), &h), ratio(8, 21));
    }

    #[test]
    fn pmf_near_one_is_nearly_uniform() {
        let near = QParam::new(int(1) - ratio(1, 1_000_000)).unwrap();
        for s in Permutation::all(4) {
            let p = crate::qkernel::to_f64(&mallows_pmf(&s, &near));
            assert!((p - 1.0 / 24.0).abs() < 1e-5);
        }
    }

    #[test]
    fn backward_rank_examples() {
        assert_eq!(backward_ranks(&perm("1324")), vec![1, 2, 2, 4]);
        assert_eq!(backward_ranks(&Permutation::identity(5)), vec![1, 2, 3, 4, 5]);
        assert_eq!(backward_ranks(&perm("54321")), vec![1, 1, 1, 1, 1]);
    }

    #[test]
    fn backward_ranks_biject() {
        for n in 1..=6 {
            let all = Permutation::all(n);
            let mut seen = std::collections::HashSet::new();
            for s in &all {
                let b = backward_ranks(s);
                assert!(b.iter().enumerate().all(|(j, &x)| x >= 1 && x <= j + 1));
                assert_eq!(from_backward_ranks(&b).unwrap(), *s);
                // inv(σ) = Σ (j - β_j)
                let inv: usize = b.iter().enumerate().map(|(j, &x)| j + 1 - x).sum();
                assert_eq!(inv as u64, s.inversions());
                seen.insert(b);
            }
            assert_eq!(seen.len(), all.len());
        }
        assert!(from_backward_ranks(&[1, 3]).is_err());
    }

    #[test]
    fn permutation_algebra() {
        let s = perm("2431");
        assert_eq!(s.compose(&s.inverse()), Permutation::identity(4));
        assert_eq!(s.inverse().inverse(), s);
        assert!(Permutation::from_images(vec![1, 1]).is_err());
        assert_eq!(perm("3124").antidiagonal_reflection().antidiagonal_reflection(), perm("3124"));
    }

    #[test]
    fn single_letter_samplers_are_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(sample_mallows_ranks(1, &q(1, 2), &mut rng), Permutation::identity(1));
            assert_eq!(finite_qshuffle(&"7".parse().unwrap(), &q(1, 2), &mut rng).to_string(), "7");
        }
    }

    #[test]
    fn rank_sampler_keeps_the_inversion_decomposition() {
        let s = RankSampler::new(9, &q(2, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let ranks = s.sample_ranks(&mut rng);
            let sigma = from_backward_ranks(&ranks).unwrap();
            let inv: usize = ranks.iter().enumerate().map(|(j, &b)| j + 1 - b).sum();
            assert_eq!(sigma.inversions(), inv as u64);
        }
    }

    #[test]
    fn tree_and_linear_selection_agree() {
        let s = ShuffleSampler::new(12, &q(1, 3));
        let v: FiniteWord = "1,1,2,3,3,3,5,7,7,8,9,9".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let xs = s.sample_indices(&mut rng);
            assert_eq!(apply_selection(&v, &xs), apply_selection_linear(&v, &xs));
        }
    }

    #[test]
    fn shuffle_distribution_examples() {
        let h = q(1, 2);
        // the selection path (3, 1) has mass G_{1/2,3}(3) G_{1/2,2}(1) = 2/21,
        // and (3, 2) yields the same word
        let path = TruncatedGeometric::new(&h, 3).pmf(3) * TruncatedGeometric::new(&h, 2).pmf(1);
        assert_eq!(path, ratio(2, 21));
        let d = shuffle_distribution(&"112".parse().unwrap(), &h).unwrap();
        assert_eq!(d[&"211".parse().unwrap()], ratio(1, 7));
        assert_eq!(d[&"121".parse().unwrap()], ratio(2, 7));
        let d = shuffle_distribution(&"12".parse().unwrap(), &h).unwrap();
        assert_eq!(d[&"12".parse().unwrap()], ratio(2, 3));
        assert_eq!(d[&"21".parse().unwrap()], ratio(1, 3));
        let total: ExactScalar = shuffle_distribution(&"1223".parse().unwrap(), &h)
            .unwrap()
            .values()
            .sum();
        assert_eq!(total, int(1));
        assert!(matches!(
            shuffle_distribution(&"123456789".parse().unwrap(), &h),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn shuffle_of_identity_is_mallows() {
        for n in 1..=6 {
            let h = q(1, 2);
            let v = Permutation::identity(n).as_word();
            assert_eq!(shuffle_distribution(&v, &h).unwrap(), mallows_distribution(n, &h));
        }
    }

    #[test]
    fn exchangeability_verdicts() {
        let h = q(1, 3);
        assert!(verify_finite_qexchangeable(&mallows_distribution(4, &h), &h).is_ok());
        let uniform: BTreeMap<_, _> = Permutation::all(3)
            .into_iter()
            .map(|s| (s.as_word(), ratio(1, 6)))
            .collect();
        let w = verify_finite_qexchangeable(&uniform, &h).unwrap_err();
        assert_eq!(w.mass, w.swapped_mass);
        let reversed = shuffle_distribution(&"21".parse().unwrap(), &h).unwrap();
        assert!(verify_finite_qexchangeable(&reversed, &h).is_err());
    }
}
