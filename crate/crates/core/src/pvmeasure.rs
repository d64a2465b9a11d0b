//! The extreme q-exchangeable laws `P^(v)`: transition and marginal formulas,
//! the infinite q-shuffle sampler in two backends, and the truncated
//! monomial-matrix law of the infinite Mallows measure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometric::{draw, PowerThresholds};
use crate::harness::{exact_tv_distance, sample_counts, to_float_pmf, tv_distance_padded, empirical_pmf};
use crate::mallows::{mallows_pmf, Permutation, RankSampler};
use crate::qkernel::{descending_pochhammer, int, to_f64, ExactScalar, Multiplicity, QParam};
use crate::words::{inversions, FiniteWord, InversionFreeWord, Letter, SupportKind};

/// Default bound on letters scanned by one letterwise step.
pub const ITERATION_CAP: usize = 1_000_000;

/// A prefix `u` emitted by the shuffle of `v`, with its letter counts `μ_a(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixState {
    v: InversionFreeWord,
    consumed: BTreeMap<Letter, u64>,
    emitted: FiniteWord,
}

impl PrefixState {
    pub fn new(v: InversionFreeWord) -> Self {
        PrefixState {
            v,
            consumed: BTreeMap::new(),
            emitted: FiniteWord::default(),
        }
    }

    /// The state after emitting `u`; fails if `u` uses more of a letter than `v` has.
    pub fn after(v: InversionFreeWord, u: &FiniteWord) -> Result<Self> {
        let mut s = Self::new(v);
        for &a in u.letters() {
            s.push(a)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, a: Letter) -> Result<()> {
        if self.residual(a) == Multiplicity::ZERO {
            return Err(Error::Invalid(format!("letter {a} is exhausted in {}", self.v)));
        }
        *self.consumed.entry(a).or_insert(0) += 1;
        self.emitted.push(a);
        Ok(())
    }

    pub fn word(&self) -> &InversionFreeWord {
        &self.v
    }

    pub fn emitted(&self) -> &FiniteWord {
        &self.emitted
    }

    pub fn consumed(&self, a: Letter) -> u64 {
        self.consumed.get(&a).copied().unwrap_or(0)
    }

    /// `l_a - μ_a(u)`.
    pub fn residual(&self, a: Letter) -> Multiplicity {
        self.v.multiplicity(a).minus(self.consumed(a))
    }

    /// `Σ_{b < a} (l_b - μ_b)`, always finite for `a` in the support.
    fn residual_below(&self, a: Letter) -> u64 {
        self.v
            .support()
            .take_while(|r| r.0 < a)
            .map(|(b, _)| self.residual(b).finite().expect("finite below a support letter"))
            .sum()
    }

    /// `x(a) = q^{Σ_{b ≤ a} (l_b - μ_b)}`, the chance the next letter exceeds `a`.
    pub fn survival(&self, a: Letter, q: &QParam) -> ExactScalar {
        let mut sum = 0u64;
        for (b, _) in self.v.support().take_while(|r| r.0 <= a) {
            match self.residual(b) {
                Multiplicity::Infinite => return ExactScalar::zero(),
                Multiplicity::Finite(r) => sum += r,
            }
        }
        q.pow(sum as i64)
    }
}

/// Probability that the shuffle emits `a` next.
pub fn transition_prob(state: &PrefixState, a: Letter, q: &QParam) -> ExactScalar {
    if !state.v.contains(a) {
        return ExactScalar::zero();
    }
    match state.v.kind() {
        SupportKind::Finite => {
            let below = state.residual_below(a);
            q.pow(below as i64) * (int(1) - q.pow_mult(state.residual(a)))
        }
        SupportKind::Infinite => {
            let prev = state.v.support().take_while(|r| r.0 < a).last().map(|r| r.0);
            let x_prev = prev.map_or_else(ExactScalar::one, |b| state.survival(b, q));
            x_prev - state.survival(a, q)
        }
    }
}

/// Next-letter masses over the support letters `≤ max_letter`.
pub fn transition_masses(state: &PrefixState, q: &QParam, max_letter: Letter) -> Vec<(Letter, ExactScalar)> {
    state
        .v
        .support()
        .take_while(|r| r.0 <= max_letter)
        .map(|(a, _)| (a, transition_prob(state, a, q)))
        .collect()
}

/// `P^(v)_n(u)` from the closed-form marginal.
pub fn marginal_prob(v: &InversionFreeWord, u: &FiniteWord, q: &QParam) -> ExactScalar {
    let mu = u.multiplicities();
    if mu.keys().any(|&a| !v.contains(a)) {
        return ExactScalar::zero();
    }
    let mut exponent = u.inversions() as i64;
    let mut seen = 0i64;
    for &m in mu.values() {
        exponent -= seen * m as i64;
        seen += m as i64;
    }
    let mut out = ExactScalar::one();
    for (&a, &m) in &mu {
        let l = v.multiplicity(a);
        let factor = descending_pochhammer(q, l, m);
        if factor.is_zero() {
            return factor;
        }
        let mass_below: u64 = v
            .support()
            .take_while(|r| r.0 < a)
            .map(|r| r.1.finite().expect("finite below a support letter"))
            .sum();
        out *= factor;
        exponent += m as i64 * mass_below as i64;
    }
    out * q.pow(exponent)
}

/// `P^(v)_n(u)` as the product of transitions along `u`.
pub fn marginal_by_transitions(v: &InversionFreeWord, u: &FiniteWord, q: &QParam) -> ExactScalar {
    let mut state = PrefixState::new(v.clone());
    let mut out = ExactScalar::one();
    for &a in u.letters() {
        out *= transition_prob(&state, a, q);
        if out.is_zero() || state.push(a).is_err() {
            return ExactScalar::zero();
        }
    }
    out
}

/// All words of length `n` over `alphabet`, in lexicographic order.
pub fn words_over(alphabet: &[Letter], n: usize) -> Vec<FiniteWord> {
    let mut out = vec![FiniteWord::default()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|w| {
                alphabet.iter().map(move |&a| {
                    let mut w = w.clone();
                    w.push(a);
                    w
                })
            })
            .collect();
    }
    out
}

/// Positive masses of `P^(v)_n` on words over the support letters `≤ max_letter`.
pub fn marginal_distribution(
    v: &InversionFreeWord,
    n: usize,
    q: &QParam,
    max_letter: Letter,
) -> BTreeMap<FiniteWord, ExactScalar> {
    let alphabet: Vec<Letter> = v.support().map(|r| r.0).take_while(|&a| a <= max_letter).collect();
    words_over(&alphabet, n)
        .into_iter()
        .filter_map(|u| {
            let p = marginal_prob(v, &u, q);
            (!p.is_zero()).then_some((u, p))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// geometric draws select positions of `v`
    #[default]
    Positional,
    /// inverse transform over the next-letter law
    Letterwise,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positional" => Ok(Backend::Positional),
            "letterwise" => Ok(Backend::Letterwise),
            _ => Err(Error::Parse(format!("unknown backend `{s}`"))),
        }
    }
}

/// One positional sample path: `word[j] = v[positions[j]]`, where
/// `positions[j]` is the `xis[j]`-th position of `v` not taken before step `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionalTrace {
    pub word: FiniteWord,
    pub xis: Vec<u64>,
    pub positions: Vec<u64>,
}

/// Sampler for prefixes of the infinite q-shuffle of `v`.
#[derive(Debug, Clone)]
pub struct PvSampler {
    v: InversionFreeWord,
    backend: Backend,
    powers: PowerThresholds,
    cap: usize,
}

impl PvSampler {
    pub fn new(v: &InversionFreeWord, q: &QParam, backend: Backend) -> Self {
        PvSampler {
            v: v.clone(),
            backend,
            powers: PowerThresholds::new(q),
            cap: ITERATION_CAP,
        }
    }

    pub fn with_iteration_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn sample<R: RngCore + ?Sized>(&mut self, n: usize, rng: &mut R) -> Result<FiniteWord> {
        match self.backend {
            Backend::Positional => Ok(self.sample_traced(n, rng).word),
            Backend::Letterwise => self.sample_letterwise(n, rng),
        }
    }

    /// Positional sampling, also returning the geometric draws and the positions of `v` they select.
    pub fn sample_traced<R: RngCore + ?Sized>(&mut self, n: usize, rng: &mut R) -> PositionalTrace {
        // consumed positions of v, sorted
        let mut taken: Vec<u64> = Vec::with_capacity(n);
        let mut trace = PositionalTrace {
            word: FiniteWord(Vec::with_capacity(n)),
            xis: Vec::with_capacity(n),
            positions: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let xi = self.powers.geometric_index(draw(rng));
            let below = taken_below(&taken, xi);
            let pos = xi + below as u64;
            taken.insert(below, pos);
            trace.xis.push(xi);
            trace.positions.push(pos);
            trace.word.push(self.v.letter_at(pos));
        }
        trace
    }

    fn sample_letterwise<R: RngCore + ?Sized>(&mut self, n: usize, rng: &mut R) -> Result<FiniteWord> {
        let mut state = PrefixState::new(self.v.clone());
        for _ in 0..n {
            let u = draw(rng);
            let mut residual_sum = 0u64;
            let mut chosen = None;
            for (steps, (a, _)) in self.v.support().enumerate() {
                if steps >= self.cap {
                    return Err(Error::IterationCap(self.cap));
                }
                match state.residual(a) {
                    Multiplicity::Infinite => {
                        chosen = Some(a);
                        break;
                    }
                    Multiplicity::Finite(0) => continue,
                    Multiplicity::Finite(r) => {
                        residual_sum += r;
                        if u < self.powers.threshold(Multiplicity::Finite(residual_sum)) {
                            chosen = Some(a);
                            break;
                        }
                    }
                }
            }
            let a = chosen.expect("a finite support ends with an infinite letter");
            state.push(a)?;
        }
        Ok(state.emitted)
    }
}

/// Number of taken positions below the `xi`-th free one.
fn taken_below(taken: &[u64], xi: u64) -> usize {
    // taken[k] - (k + 1) free positions lie below taken[k], nondecreasing in k
    let (mut lo, mut hi) = (0, taken.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if taken[mid] - (mid as u64 + 1) < xi {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn sample_prefix<R: RngCore + ?Sized>(
    v: &InversionFreeWord,
    n: usize,
    q: &QParam,
    rng: &mut R,
    backend: Backend,
) -> Result<FiniteWord> {
    PvSampler::new(v, q, backend).sample(n, rng)
}

/// A `k × k` 0-1 matrix with at most one 1 in each row and column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonomialMatrix {
    k: usize,
    entries: BTreeSet<(usize, usize)>,
}

impl MonomialMatrix {
    /// `entries` are 1-based `(row, col)` positions of ones.
    pub fn new(k: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let entries: BTreeSet<_> = entries.into_iter().collect();
        let mut rows = BTreeSet::new();
        let mut cols = BTreeSet::new();
        for &(i, j) in &entries {
            if i == 0 || j == 0 || i > k || j > k {
                return Err(Error::Invalid(format!("entry ({i}, {j}) outside a {k}x{k} matrix")));
            }
            if !rows.insert(i) || !cols.insert(j) {
                return Err(Error::Invalid("two ones share a row or a column".into()));
            }
        }
        Ok(MonomialMatrix { k, entries })
    }

    pub fn zero(k: usize) -> Self {
        MonomialMatrix { k, entries: BTreeSet::new() }
    }

    pub fn identity(k: usize) -> Self {
        MonomialMatrix {
            k,
            entries: (1..=k).map(|i| (i, i)).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().copied()
    }

    pub fn rank(&self) -> usize {
        self.entries.len()
    }

    pub fn rows(&self) -> BTreeSet<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn cols(&self) -> BTreeSet<usize> {
        self.entries.iter().map(|e| e.1).collect()
    }

    /// Pairs of ones whose row and column differences have opposite signs.
    pub fn inversions(&self) -> u64 {
        let by_col: Vec<usize> = {
            let mut e: Vec<_> = self.entries.iter().map(|&(i, j)| (j, i)).collect();
            e.sort_unstable();
            e.into_iter().map(|(_, i)| i).collect()
        };
        inversions(&by_col)
    }

    pub fn transpose(&self) -> Self {
        MonomialMatrix {
            k: self.k,
            entries: self.entries.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }

    /// Every weakly monomial `k × k` matrix.
    pub fn all(k: usize) -> Vec<MonomialMatrix> {
        // column j holds a one in row rows[j], or none
        fn go(k: usize, j: usize, used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<MonomialMatrix>) {
            if j > k {
                out.push(MonomialMatrix {
                    k,
                    entries: cur.iter().copied().collect(),
                });
                return;
            }
            go(k, j + 1, used, cur, out);
            for i in 1..=k {
                if !used[i] {
                    used[i] = true;
                    cur.push((i, j));
                    go(k, j + 1, used, cur, out);
                    cur.pop();
                    used[i] = false;
                }
            }
        }
        let mut out = Vec::new();
        go(k, 1, &mut vec![false; k + 1], &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for MonomialMatrix {
    /// Row-major rows of 0/1 joined by `;`, e.g. `01;00`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = (1..=self.k)
            .map(|i| {
                (1..=self.k)
                    .map(|j| if self.entries.contains(&(i, j)) { '1' } else { '0' })
                    .collect()
            })
            .collect();
        f.write_str(&rows.join(";"))
    }
}

impl FromStr for MonomialMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rows: Vec<&str> = s.trim().split(';').map(str::trim).collect();
        let k = rows.len();
        let mut entries = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.chars().count() != k {
                return Err(Error::Parse(format!("matrix row `{row}` is not of length {k}")));
            }
            for (j, c) in row.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => entries.push((i + 1, j + 1)),
                    _ => return Err(Error::Parse(format!("bad matrix entry `{c}`"))),
                }
            }
        }
        MonomialMatrix::new(k, entries)
    }
}

/// `θ_k`: the `k × k` corner of the permutation matrix, 1 at `(i, j)` iff `w_j = i ≤ k`.
///
/// `prefix` holds the first letters of a permutation word of `N` (or of `S_n`).
pub fn theta_truncation(prefix: &FiniteWord, k: usize) -> Result<MonomialMatrix> {
    if prefix.len() < k {
        return Err(Error::NeedsMoreSamples {
            needed: k,
            got: prefix.len(),
        });
    }
    let entries = prefix.letters()[..k]
        .iter()
        .enumerate()
        .filter(|&(_, &a)| (a as usize) <= k)
        .map(|(j, &a)| (a as usize, j + 1));
    MonomialMatrix::new(k, entries)
}

/// Mass of `{θ_k = m}` under the infinite Mallows measure.
pub fn theta_pmf(m: &MonomialMatrix, q: &QParam) -> ExactScalar {
    let k = m.k as i64;
    let r = m.rank() as i64;
    let sum_i: usize = m.rows().iter().sum();
    let sum_j: usize = m.cols().iter().sum();
    let e = k * k - 2 * k * r - r + m.inversions() as i64 + sum_i as i64 + sum_j as i64;
    (int(1) - q.exact()).pow(r as i32) * q.pow(e)
}

pub fn theta_law(k: usize, q: &QParam) -> BTreeMap<MonomialMatrix, ExactScalar> {
    MonomialMatrix::all(k)
        .into_iter()
        .map(|m| {
            let p = theta_pmf(&m, q);
            (m, p)
        })
        .collect()
}

/// Exact `θ_k` pushforward of `Q_n`.
pub fn theta_pushforward_exact(k: usize, n: usize, q: &QParam) -> Result<BTreeMap<MonomialMatrix, ExactScalar>> {
    if n > crate::words::ENUMERATION_BUDGET {
        return Err(Error::Budget {
            what: "permutation size",
            limit: crate::words::ENUMERATION_BUDGET,
            got: n,
        });
    }
    let mut out = BTreeMap::new();
    for s in Permutation::all(n) {
        let m = theta_truncation(&s.as_word(), k)?;
        *out.entry(m).or_insert_with(ExactScalar::zero) += mallows_pmf(&s, q);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub tv: f64,
    /// computed by enumeration rather than sampling
    pub exact: bool,
}

/// TV distance from the `θ_k` law of `Q_n` to that of `Q`, along `n_grid`.
///
/// Sizes up to the enumeration budget are exact; larger ones use `samples`
/// draws from the backward-rank sampler.
pub fn weak_convergence_check(
    k: usize,
    n_grid: &[usize],
    q: &QParam,
    samples: u64,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    if k > 3 {
        return Err(Error::Budget { what: "truncation size", limit: 3, got: k });
    }
    let limit = theta_law(k, q);
    let limit_f = to_float_pmf(&limit);
    n_grid
        .iter()
        .map(|&n| {
            if n < k {
                return Err(Error::Invalid(format!("n = {n} is below k = {k}")));
            }
            if n <= crate::words::ENUMERATION_BUDGET {
                let law = theta_pushforward_exact(k, n, q)?;
                Ok(ConvergenceRow {
                    n,
                    tv: to_f64(&exact_tv_distance(&law, &limit)?),
                    exact: true,
                })
            } else {
                let counts = sample_counts(
                    samples,
                    seed,
                    || RankSampler::new(n, q),
                    |s, rng| theta_truncation(&s.sample(rng).as_word(), k).expect("n ≥ k"),
                );
                Ok(ConvergenceRow {
                    n,
                    tv: tv_distance_padded(&empirical_pmf(&counts), &limit_f),
                    exact: false,
                })
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// TV between the sampled `θ_k` law and the law of its transpose
    pub empirical_tv: f64,
    /// `Q_n(σ) = Q_n(σ^{-1})` for every `σ ∈ S_n`, `n ≤ 6`
    pub exact_holds: bool,
    pub holds: bool,
}

/// Inversion invariance of the Mallows measure, exactly on `S_n` and
/// empirically through `θ_k` of sampled permutations of `N`.
pub fn inversion_invariance_check(samples: u64, k: usize, q: &QParam, seed: u64, tol: f64) -> Result<InvarianceReport> {
    if k > 3 {
        return Err(Error::Budget { what: "truncation size", limit: 3, got: k });
    }
    let exact_holds = (1..=6).all(|n| {
        Permutation::all(n)
            .iter()
            .all(|s| mallows_pmf(s, q) == mallows_pmf(&s.inverse(), q))
    });
    let v = InversionFreeWord::ones();
    let counts = crate::harness::try_sample_counts(
        samples,
        seed,
        || PvSampler::new(&v, q, Backend::Positional),
        |s, rng| theta_truncation(&s.sample(k, rng)?, k),
    )?;
    let law = empirical_pmf(&counts);
    let transposed: BTreeMap<_, _> = law.iter().map(|(m, &p)| (m.transpose(), p)).collect();
    let empirical_tv = tv_distance_padded(&law, &transposed);
    Ok(InvarianceReport {
        empirical_tv,
        exact_holds,
        holds: exact_holds && empirical_tv <= tol,
    })
}
