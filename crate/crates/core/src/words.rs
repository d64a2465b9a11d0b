//! Words over integer alphabets: inversions, the inversion cocycle, inversion-free
//! words with finite or infinite support, height functions and monotone maps.
//!
//! Positions are 1-based throughout, letters are positive integers ordered as
//! integers.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mallows::Permutation;
use crate::qkernel::{gaussian_multinomial, rpow, ExactScalar, Multiplicity, QValue};

pub type Letter = u32;

/// Orbits above this length are not enumerated.
pub const ENUMERATION_BUDGET: usize = 8;

/// A finite word `w_1 ⋯ w_n`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FiniteWord(pub Vec<Letter>);

impl FiniteWord {
    pub fn new(letters: Vec<Letter>) -> Self {
        FiniteWord(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `μ_a(w)` for every letter present.
    pub fn multiplicities(&self) -> BTreeMap<Letter, u64> {
        let mut m = BTreeMap::new();
        for &a in &self.0 {
            *m.entry(a).or_insert(0) += 1;
        }
        m
    }

    pub fn count(&self, a: Letter) -> u64 {
        self.0.iter().filter(|&&b| b == a).count() as u64
    }

    pub fn is_inversion_free(&self) -> bool {
        self.0.windows(2).all(|p| p[0] <= p[1])
    }

    pub fn inversions(&self) -> u64 {
        inversions(&self.0)
    }

    /// Swaps positions `i` and `i+1` (1-based).
    pub fn swap_adjacent(&self, i: usize) -> FiniteWord {
        let mut w = self.0.clone();
        w.swap(i - 1, i);
        FiniteWord(w)
    }

    pub fn push(&mut self, a: Letter) {
        self.0.push(a);
    }
}

impl From<Vec<Letter>> for FiniteWord {
    fn from(v: Vec<Letter>) -> Self {
        FiniteWord(v)
    }
}

impl fmt::Display for FiniteWord {
    /// Single-digit alphabets print as `1324`, anything wider as `1,10,3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let compact = self.0.iter().all(|&a| (1..=9).contains(&a));
        let sep = if compact { "" } else { "," };
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join(sep))
    }
}

impl FromStr for FiniteWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |t: &str| Error::Parse(format!("bad letter `{t}` in word `{s}`"));
        let letters: Result<Vec<Letter>> = if s.contains(',') || s.contains(' ') {
            s.split([',', ' '])
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<Letter>().map_err(|_| bad(t)))
                .collect()
        } else {
            s.chars()
                .map(|c| c.to_digit(10).ok_or_else(|| bad(&c.to_string())))
                .collect()
        };
        let letters = letters?;
        if letters.contains(&0) {
            return Err(Error::Parse("letters are positive integers".into()));
        }
        Ok(FiniteWord(letters))
    }
}

/// Number of pairs `i < j` with `w_i > w_j`, by merge counting.
pub fn inversions<T: Ord + Copy>(w: &[T]) -> u64 {
    fn sort_count<T: Ord + Copy>(a: &mut [T], buf: &mut Vec<T>) -> u64 {
        let n = a.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut inv = sort_count(&mut a[..mid], buf) + sort_count(&mut a[mid..], buf);
        buf.clear();
        let (mut i, mut j) = (0, mid);
        while i < mid && j < n {
            // ties are not inversions, so the left run wins them
            if a[i] <= a[j] {
                buf.push(a[i]);
                i += 1;
            } else {
                buf.push(a[j]);
                inv += (mid - i) as u64;
                j += 1;
            }
        }
        buf.extend_from_slice(&a[i..mid]);
        buf.extend_from_slice(&a[j..n]);
        a.copy_from_slice(buf);
        inv
    }
    let mut a = w.to_vec();
    let mut buf = Vec::with_capacity(a.len());
    sort_count(&mut a, &mut buf)
}

/// Quadratic reference count.
pub fn inversions_naive<T: Ord>(w: &[T]) -> u64 {
    let mut inv = 0;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            if w[i] > w[j] {
                inv += 1;
            }
        }
    }
    inv
}

fn check_prefix(sigma: &Permutation, len: usize) -> Result<()> {
    if let Some(p) = sigma.moved_beyond(len) {
        return Err(Error::OutsidePrefix {
            position: p,
            prefix: len,
        });
    }
    Ok(())
}

/// `T_σ w` with `(T_σ w)_i = w_{σ^{-1}(i)}`, acting on the prefix; letters past
/// the support of `σ` are untouched.
pub fn act(sigma: &Permutation, w: &FiniteWord) -> Result<FiniteWord> {
    check_prefix(sigma, w.len())?;
    let mut out = w.0.clone();
    for (j, &img) in sigma.images().iter().enumerate().take(w.len()) {
        out[img - 1] = w.0[j];
    }
    Ok(FiniteWord(out))
}

/// The additive cocycle `c(σ, w) = inv(T_σ w) - inv(w)` (stable value).
pub fn cocycle(sigma: &Permutation, w: &FiniteWord) -> Result<i64> {
    let moved = act(sigma, w)?;
    Ok(moved.inversions() as i64 - w.inversions() as i64)
}

/// `ρ_q(σ, w) = q^{c(σ, w)}`.
pub fn rho_q<Q: QValue + ?Sized>(sigma: &Permutation, w: &FiniteWord, q: &Q) -> Result<ExactScalar> {
    Ok(rpow(q.q_value(), cocycle(sigma, w)?))
}

/// Checks `c(στ, w) = c(σ, T_τ w) + c(τ, w)`.
pub fn cocycle_additivity_check(sigma: &Permutation, tau: &Permutation, w: &FiniteWord) -> Result<bool> {
    let n = sigma.len().max(tau.len());
    let (s, t) = (sigma.extend_to(n), tau.extend_to(n));
    let lhs = cocycle(&s.compose(&t), w)?;
    let rhs = cocycle(&s, &act(&t, w)?)? + cocycle(&t, w)?;
    Ok(lhs == rhs)
}

/// Rule generating the multiplicities of an infinite support past the explicit runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tail {
    /// every further letter once: `a (a+1) (a+2) …`
    Ones,
    /// every further letter `c` times
    Constant(u64),
}

impl Tail {
    pub fn step(self) -> u64 {
        match self {
            Tail::Ones => 1,
            Tail::Constant(c) => c,
        }
    }
}

impl FromStr for Tail {
    type Err = Error;

    /// `ones` or `const=C`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "ones" {
            return Ok(Tail::Ones);
        }
        match s.strip_prefix("const=") {
            Some(c) => c
                .parse()
                .map(Tail::Constant)
                .map_err(|_| Error::Parse(format!("bad tail constant `{c}`"))),
            None => Err(Error::Parse(format!("unknown tail rule `{s}`"))),
        }
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tail::Ones => f.write_str("ones"),
            Tail::Constant(c) => write!(f, "const={c}"),
        }
    }
}

/// The two shapes an infinite inversion-free word can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportKind {
    /// finite support, last letter with infinite multiplicity
    Finite,
    /// countable support, all multiplicities finite
    Infinite,
}

/// An infinite inversion-free word `v`, given by its letter multiplicities `l_a`.
#[derive(Debug, Clone, Eq, Serialize, Deserialize)]
pub struct InversionFreeWord {
    runs: Vec<(Letter, Multiplicity)>,
    tail: Option<Tail>,
}

impl InversionFreeWord {
    /// Finite support: all runs finite except the last, which must be infinite.
    pub fn finite_support(runs: Vec<(Letter, Multiplicity)>) -> Result<Self> {
        Self::build(runs, None)
    }

    /// Infinite support: finite explicit runs followed by a tail rule starting at
    /// the letter after the last explicit one (letter 1 if there are none).
    pub fn infinite_support(runs: Vec<(Letter, u64)>, tail: Tail) -> Result<Self> {
        let runs = runs.into_iter().map(|(a, l)| (a, Multiplicity::Finite(l))).collect();
        Self::build(runs, Some(tail))
    }

    /// `v = 1·2·3⋯`, the word whose shuffle is the Mallows measure on permutations of N.
    pub fn ones() -> Self {
        InversionFreeWord {
            runs: Vec::new(),
            tail: Some(Tail::Ones),
        }
    }

    /// `1·2⋯k·(k+1)(k+1)⋯`.
    pub fn ones_then_infinite(k: Letter) -> Self {
        let mut runs: Vec<_> = (1..=k).map(|a| (a, Multiplicity::Finite(1))).collect();
        runs.push((k + 1, Multiplicity::Infinite));
        InversionFreeWord { runs, tail: None }
    }

    fn build(runs: Vec<(Letter, Multiplicity)>, tail: Option<Tail>) -> Result<Self> {
        let invalid = |m: &str| Err(Error::Invalid(format!("inversion-free word: {m}")));
        if runs.iter().any(|&(a, _)| a == 0) {
            return invalid("letters must be positive");
        }
        if runs.windows(2).any(|p| p[0].0 >= p[1].0) {
            return invalid("letters must be strictly increasing");
        }
        if runs.iter().any(|&(_, l)| l == Multiplicity::ZERO) {
            return invalid("multiplicities must be positive");
        }
        match tail {
            None => {
                let Some((last, head)) = runs.split_last() else {
                    return invalid("finite support must be nonempty");
                };
                if !last.1.is_infinite() || head.iter().any(|r| r.1.is_infinite()) {
                    return invalid("with finite support exactly the last letter is infinite");
                }
            }
            Some(t) => {
                if t.step() == 0 {
                    return invalid("tail multiplicity must be positive");
                }
                if runs.iter().any(|r| r.1.is_infinite()) {
                    return invalid("with infinite support every multiplicity is finite");
                }
            }
        }
        Ok(InversionFreeWord { runs, tail })
    }

    pub fn kind(&self) -> SupportKind {
        if self.tail.is_some() {
            SupportKind::Infinite
        } else {
            SupportKind::Finite
        }
    }

    pub fn tail(&self) -> Option<Tail> {
        self.tail
    }

    pub fn explicit_runs(&self) -> &[(Letter, Multiplicity)] {
        &self.runs
    }

    fn tail_start(&self) -> Letter {
        self.runs.last().map_or(1, |r| r.0 + 1)
    }

    /// `(a, l_a)` for the support in increasing order; endless for infinite support.
    pub fn support(&self) -> impl Iterator<Item = (Letter, Multiplicity)> + '_ {
        let start = self.tail_start();
        let tail = self.tail;
        self.runs.iter().copied().chain(
            (0..)
                .map_while(move |i: u32| tail.map(|t| (start + i, Multiplicity::Finite(t.step())))),
        )
    }

    /// `l_a`, zero when `a ∉ supp(v)`.
    pub fn multiplicity(&self, a: Letter) -> Multiplicity {
        if let Some(&(_, l)) = self.runs.iter().find(|r| r.0 == a) {
            return l;
        }
        match self.tail {
            Some(t) if a >= self.tail_start() => Multiplicity::Finite(t.step()),
            _ => Multiplicity::ZERO,
        }
    }

    pub fn contains(&self, a: Letter) -> bool {
        self.multiplicity(a) != Multiplicity::ZERO
    }

    /// Largest letter of a finite support.
    pub fn last_letter(&self) -> Option<Letter> {
        match self.tail {
            None => self.runs.last().map(|r| r.0),
            Some(_) => None,
        }
    }

    /// `v_pos` for a 1-based position.
    pub fn letter_at(&self, pos: u64) -> Letter {
        assert!(pos >= 1, "positions are 1-based");
        let mut seen = 0u64;
        for &(a, l) in &self.runs {
            match l {
                Multiplicity::Infinite => return a,
                Multiplicity::Finite(l) => {
                    if pos <= seen + l {
                        return a;
                    }
                    seen += l;
                }
            }
        }
        let step = self.tail.expect("finite support ends with an infinite run").step();
        let offset = (pos - seen - 1) / step;
        self.tail_start() + offset as Letter
    }

    /// The first `n` letters.
    pub fn prefix(&self, n: usize) -> FiniteWord {
        let mut out = Vec::with_capacity(n);
        for (a, l) in self.support() {
            if out.len() == n {
                break;
            }
            let take = match l {
                Multiplicity::Finite(l) => (l as usize).min(n - out.len()),
                Multiplicity::Infinite => n - out.len(),
            };
            out.extend(std::iter::repeat_n(a, take));
        }
        FiniteWord(out)
    }

    /// Pushforward under `f_d(a) = min(a, d)`.
    pub fn clamp(&self, d: Letter) -> InversionFreeWord {
        let mut runs: Vec<(Letter, Multiplicity)> =
            self.support().take_while(|r| r.0 < d).collect();
        // Everything at or above d merges; with infinite support that is infinitely many letters.
        let merged = match self.tail {
            Some(_) => Multiplicity::Infinite,
            None => self
                .runs
                .iter()
                .filter(|r| r.0 >= d)
                .fold(Multiplicity::ZERO, |acc, r| acc + r.1),
        };
        if merged != Multiplicity::ZERO {
            runs.push((d, merged));
        }
        InversionFreeWord { runs, tail: None }
    }
}

impl PartialEq for InversionFreeWord {
    fn eq(&self, other: &Self) -> bool {
        if self.tail != other.tail {
            return false;
        }
        match self.tail {
            None => self.runs == other.runs,
            Some(_) => {
                // Same rule past both explicit parts, so compare one letter beyond.
                let horizon = self.tail_start().max(other.tail_start());
                (1..=horizon).all(|a| self.multiplicity(a) == other.multiplicity(a))
            }
        }
    }
}

impl fmt::Display for InversionFreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let runs: Vec<String> = self.runs.iter().map(|(a, l)| format!("{a}:{l}")).collect();
        f.write_str(&runs.join(","))?;
        match self.tail {
            None => Ok(()),
            Some(Tail::Ones) => f.write_str(";ones"),
            Some(Tail::Constant(c)) => write!(f, ";const={c}"),
        }
    }
}

impl FromStr for InversionFreeWord {
    type Err = Error;

    /// `1:2,2:inf` (finite support), `1:1,2:1;ones` or `1:2;const=3` (infinite support).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, tail) = match s.split_once(';') {
            None => (s, None),
            Some((body, rule)) => {
                (body, Some(rule.parse::<Tail>()?))
            }
        };
        let mut runs = Vec::new();
        for item in body.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (a, l) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("expected letter:multiplicity, got `{item}`")))?;
            let a: Letter = a
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad letter `{a}`")))?;
            runs.push((a, l.parse::<Multiplicity>()?));
        }
        InversionFreeWord::build(runs, tail)
    }
}

/// All distinct rearrangements of `w`, in lexicographic order.
pub fn rearrangements(w: &FiniteWord) -> Vec<FiniteWord> {
    let mut cur = w.0.clone();
    cur.sort_unstable();
    let mut out = vec![FiniteWord(cur.clone())];
    while next_permutation(&mut cur) {
        out.push(FiniteWord(cur.clone()));
    }
    out
}

pub(crate) fn next_permutation<T: Ord>(a: &mut [T]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// The inversion-free word `1^{λ_1} 2^{λ_2} ⋯ d^{λ_d}`.
pub fn word_of_counts(lambda: &[u64]) -> FiniteWord {
    let mut w = Vec::new();
    for (i, &c) in lambda.iter().enumerate() {
        w.extend(std::iter::repeat_n(i as Letter + 1, c as usize));
    }
    FiniteWord(w)
}

/// `Σ q^{inv(w)}` over the orbit with letter counts `λ`, by enumeration.
pub fn orbit_inversion_gf_enumerated<Q: QValue + ?Sized>(lambda: &[u64], q: &Q) -> Result<ExactScalar> {
    let n: u64 = lambda.iter().sum();
    if n as usize > ENUMERATION_BUDGET {
        return Err(Error::Budget {
            what: "orbit length",
            limit: ENUMERATION_BUDGET,
            got: n as usize,
        });
    }
    Ok(rearrangements(&word_of_counts(lambda))
        .iter()
        .map(|w| rpow(q.q_value(), w.inversions() as i64))
        .sum())
}

/// Inversion generating function of the orbit of the first `n` letters of `v`.
///
/// Always the Gaussian multinomial; for `n ≤ 8` the orbit is also enumerated and
/// the two results must agree.
pub fn orbit_inversion_gf<Q: QValue + ?Sized>(v: &InversionFreeWord, n: usize, q: &Q) -> Result<ExactScalar> {
    let prefix = v.prefix(n);
    let lambda: Vec<u64> = prefix.multiplicities().values().copied().collect();
    let closed = gaussian_multinomial(&lambda, q);
    if n <= ENUMERATION_BUDGET {
        let brute = orbit_inversion_gf_enumerated(&lambda, q)?;
        if brute != closed {
            return Err(Error::OracleMismatch(format!(
                "orbit gf for λ = {lambda:?}: enumeration {brute} vs multinomial {closed}"
            )));
        }
    }
    Ok(closed)
}

/// `I(k)`: number of orbit words with exactly `k` inversions, for letter counts `λ`.
pub fn orbit_inversion_counts(lambda: &[u64]) -> Vec<u64> {
    // Append the last letter: it creates one inversion with every larger letter before it.
    fn go(lambda: &mut Vec<u64>, memo: &mut HashMap<Vec<u64>, Vec<u64>>) -> Vec<u64> {
        if lambda.iter().all(|&c| c == 0) {
            return vec![1];
        }
        if let Some(p) = memo.get(lambda.as_slice()) {
            return p.clone();
        }
        let mut acc: Vec<u64> = Vec::new();
        for a in 0..lambda.len() {
            if lambda[a] == 0 {
                continue;
            }
            lambda[a] -= 1;
            let shift: u64 = lambda[a + 1..].iter().sum();
            let sub = go(lambda, memo);
            lambda[a] += 1;
            let need = sub.len() + shift as usize;
            if acc.len() < need {
                acc.resize(need, 0);
            }
            for (k, c) in sub.iter().enumerate() {
                acc[k + shift as usize] += c;
            }
        }
        memo.insert(lambda.clone(), acc.clone());
        acc
    }
    go(&mut lambda.to_vec(), &mut HashMap::new())
}

/// A weakly increasing `h` with values in `Z_+ ∪ {∞}`, `h(0) = 0`.
///
/// Without a tail the domain is `N_d` (`d = values.len()`, `h(d) = ∞`); with a
/// tail the domain is `N` and increments past the explicit values follow the rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeightFunction {
    values: Vec<Multiplicity>,
    tail: Option<Tail>,
}

impl HeightFunction {
    /// Height function on `N_d`.
    pub fn on_finite(values: Vec<Multiplicity>) -> Result<Self> {
        let h = HeightFunction { values, tail: None };
        h.validate()?;
        Ok(h)
    }

    /// Height function on `N` with explicit finite values and a tail rule.
    pub fn on_naturals(values: Vec<u64>, tail: Tail) -> Result<Self> {
        let h = HeightFunction {
            values: values.into_iter().map(Multiplicity::Finite).collect(),
            tail: Some(tail),
        };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        if self.values.windows(2).any(|p| p[0] > p[1]) {
            return Err(Error::Invalid("height function must be weakly increasing".into()));
        }
        match self.tail {
            None => {
                if self.values.last() != Some(&Multiplicity::Infinite) {
                    return Err(Error::Invalid("height function on N_d needs h(d) = ∞".into()));
                }
            }
            Some(t) => {
                if t.step() == 0 || self.values.iter().any(|v| v.is_infinite()) {
                    return Err(Error::Invalid(
                        "height function on N must be finite with an increasing tail".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `d` for a height function on `N_d`.
    pub fn domain_size(&self) -> Option<usize> {
        match self.tail {
            None => Some(self.values.len()),
            Some(_) => None,
        }
    }

    /// `h(a)`, with `h(0) = 0`.
    pub fn get(&self, a: usize) -> Multiplicity {
        if a == 0 {
            return Multiplicity::ZERO;
        }
        if a <= self.values.len() {
            return self.values[a - 1];
        }
        match self.tail {
            None => Multiplicity::Infinite,
            Some(t) => {
                let base = self.values.last().copied().unwrap_or(Multiplicity::ZERO);
                base + Multiplicity::Finite(t.step() * (a - self.values.len()) as u64)
            }
        }
    }

    /// `h(a) - h(a-1)`, with `∞ - ∞ = 0`.
    pub fn increment(&self, a: usize) -> Multiplicity {
        match (self.get(a), self.get(a - 1)) {
            (Multiplicity::Infinite, Multiplicity::Infinite) => Multiplicity::ZERO,
            (Multiplicity::Infinite, _) => Multiplicity::Infinite,
            (Multiplicity::Finite(x), Multiplicity::Finite(y)) => Multiplicity::Finite(x - y),
            (Multiplicity::Finite(_), Multiplicity::Infinite) => unreachable!("weakly increasing"),
        }
    }
}

impl PartialEq for HeightFunction {
    fn eq(&self, other: &Self) -> bool {
        if self.tail != other.tail {
            return false;
        }
        let horizon = self.values.len().max(other.values.len()) + 1;
        (1..=horizon).all(|a| self.get(a) == other.get(a))
    }
}

impl FromStr for HeightFunction {
    type Err = Error;

    /// `1,inf` (on `N_2`) or `1,2;ones` (on `N`).
    fn from_str(s: &str) -> Result<Self> {
        let (body, tail) = match s.trim().split_once(';') {
            None => (s.trim(), None),
            Some((body, rule)) => (body, Some(rule.parse::<Tail>()?)),
        };
        let values = body
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse::<Multiplicity>)
            .collect::<Result<Vec<_>>>()?;
        match tail {
            None => HeightFunction::on_finite(values),
            Some(t) => {
                let finite = values
                    .into_iter()
                    .map(|m| m.finite().ok_or_else(|| Error::Invalid("height function on N must be finite".into())))
                    .collect::<Result<Vec<_>>>()?;
                HeightFunction::on_naturals(finite, t)
            }
        }
    }
}

impl fmt::Display for HeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|m| m.to_string()).collect();
        f.write_str(&parts.join(","))?;
        match self.tail {
            Some(t) => write!(f, ";{t}"),
            None => Ok(()),
        }
    }
}

/// `l_a = h(a) - h(a-1)`; letters with zero increment are absent.
pub fn height_to_word(h: &HeightFunction) -> InversionFreeWord {
    match h.tail {
        None => {
            let mut runs = Vec::new();
            for a in 1..=h.values.len() {
                let l = h.increment(a);
                if l != Multiplicity::ZERO {
                    runs.push((a as Letter, l));
                }
                if l.is_infinite() {
                    break;
                }
            }
            InversionFreeWord { runs, tail: None }
        }
        Some(t) => {
            // Materialize the first tail letter so the explicit runs end next to the tail.
            let mut runs = Vec::new();
            for a in 1..=h.values.len() + 1 {
                let l = h.increment(a);
                if l != Multiplicity::ZERO {
                    runs.push((a as Letter, l));
                }
            }
            InversionFreeWord { runs, tail: Some(t) }
        }
    }
}

/// Inverse of [`height_to_word`]. For finite support the domain is `N_d` with
/// `d = max(d_min, last letter)`.
pub fn word_to_height(v: &InversionFreeWord, d_min: usize) -> HeightFunction {
    match v.tail {
        None => {
            let last = v.last_letter().expect("finite support") as usize;
            let d = d_min.max(last);
            let mut acc = Multiplicity::ZERO;
            let values = (1..=d)
                .map(|a| {
                    acc = acc + v.multiplicity(a as Letter);
                    acc
                })
                .collect();
            HeightFunction { values, tail: None }
        }
        Some(t) => {
            let upto = v.tail_start() as usize - 1;
            let mut acc = Multiplicity::ZERO;
            let values = (1..=upto)
                .map(|a| {
                    acc = acc + v.multiplicity(a as Letter);
                    acc
                })
                .collect();
            HeightFunction { values, tail: Some(t) }
        }
    }
}

/// Letterwise image `f(w_1) f(w_2) ⋯`. `f` is expected to be weakly increasing.
pub fn monotone_pushforward<F: Fn(Letter) -> Letter>(f: F, w: &FiniteWord) -> FiniteWord {
    FiniteWord(w.0.iter().map(|&a| f(a)).collect())
}

/// `f_d(a) = min(a, d)`.
pub fn clamp_map(d: Letter) -> impl Fn(Letter) -> Letter {
    move |a| a.min(d)
}

/// Pushforward of a finite pmf on words under a letter map.
pub fn pushforward_distribution<F: Fn(Letter) -> Letter>(
    dist: &BTreeMap<FiniteWord, ExactScalar>,
    f: F,
) -> BTreeMap<FiniteWord, ExactScalar> {
    let mut out: BTreeMap<FiniteWord, ExactScalar> = BTreeMap::new();
    for (w, p) in dist {
        *out.entry(monotone_pushforward(&f, w)).or_default() += p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkernel::{int, ratio, QParam};

    fn w(s: &str) -> FiniteWord {
        s.parse().unwrap()
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(w("1324").inversions(), 1);
        assert_eq!(w("112233").inversions(), 0);
        assert_eq!(w("2211").inversions(), 4);
        assert_eq!(inversions::<u32>(&[]), 0);
    }

    #[test]
    fn cocycle_examples() {
        let id = Permutation::identity(3);
        assert_eq!(cocycle(&id, &w("312")).unwrap(), 0);
        let s12 = Permutation::transposition(3, 1, 2);
        assert_eq!(cocycle(&s12, &w("123")).unwrap(), 1);
        assert_eq!(cocycle(&s12, &w("213")).unwrap(), -1);
        assert_eq!(cocycle(&s12, &w("113")).unwrap(), 0);
        let s13 = Permutation::transposition(3, 1, 3);
        assert_eq!(act(&s13, &w("123")).unwrap(), w("321"));
        assert_eq!(cocycle(&s13, &w("123")).unwrap(), 3);
    }

    #[test]
    fn cocycle_rejects_moves_outside_prefix() {
        let s = Permutation::transposition(4, 3, 4);
        assert_eq!(
            cocycle(&s, &w("12")),
            Err(Error::OutsidePrefix { position: 3, prefix: 2 })
        );
        // a longer permutation that fixes the tail is fine
        let s = Permutation::transposition(5, 1, 2);
        assert_eq!(cocycle(&s, &w("12")).unwrap(), 1);
    }

    #[test]
    fn rho_examples() {
        let q = QParam::from_ratio(1, 2).unwrap();
        assert_eq!(rho_q(&Permutation::identity(2), &w("21"), &q).unwrap(), int(1));
        assert_eq!(
            rho_q(&Permutation::transposition(2, 1, 2), &w("12"), &q).unwrap(),
            ratio(1, 2)
        );
        assert_eq!(
            rho_q(&Permutation::transposition(3, 1, 3), &w("123"), &q).unwrap(),
            ratio(1, 8)
        );
        assert_eq!(
            rho_q(&Permutation::transposition(2, 1, 2), &w("21"), &q).unwrap(),
            int(2)
        );
    }

    #[test]
    fn additivity_examples() {
        let id = Permutation::identity(3);
        assert!(cocycle_additivity_check(&id, &id, &w("312")).unwrap());
        let s = Permutation::transposition(3, 1, 2);
        let t = Permutation::transposition(3, 2, 3);
        assert!(cocycle_additivity_check(&s, &t, &w("312")).unwrap());
    }

    #[test]
    fn additivity_exhaustive_s4_binary_words() {
        let perms = Permutation::all(4);
        for bits in 0..16u32 {
            let word = FiniteWord((0..4).map(|i| 1 + ((bits >> i) & 1)).collect());
            for s in &perms {
                for t in &perms {
                    assert!(cocycle_additivity_check(s, t, &word).unwrap());
                }
            }
        }
    }

    #[test]
    fn inversion_free_word_text_round_trip() {
        for s in ["1:2,2:inf", "1:1,2:1;ones", ";ones", "2:3,5:1;const=4", "3:inf"] {
            let v: InversionFreeWord = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        for bad in ["1:2,2:3", "2:1,1:inf", "1:inf,2:inf", "1:0,2:inf", "1:inf;ones", "1:2;nope", ""] {
            assert!(bad.parse::<InversionFreeWord>().is_err(), "{bad}");
        }
    }

    #[test]
    fn inversion_free_word_queries() {
        let v: InversionFreeWord = "1:2,3:1;ones".parse().unwrap();
        assert_eq!(v.kind(), SupportKind::Infinite);
        assert_eq!(v.prefix(6), w("113456"));
        assert_eq!(v.letter_at(1), 1);
        assert_eq!(v.letter_at(3), 3);
        assert_eq!(v.letter_at(4), 4);
        assert_eq!(v.letter_at(10), 10);
        assert_eq!(v.multiplicity(2), Multiplicity::ZERO);
        assert_eq!(v.multiplicity(7), Multiplicity::Finite(1));
        let c: InversionFreeWord = "1:1;const=3".parse().unwrap();
        assert_eq!(c.prefix(8), w("12223334"));
        let f: InversionFreeWord = "1:2,2:inf".parse().unwrap();
        assert_eq!(f.prefix(5), w("11222"));
        assert_eq!(f.letter_at(1000), 2);
        assert_eq!(InversionFreeWord::ones().prefix(4), w("1234"));
        // two spellings of the same infinite word
        let a: InversionFreeWord = "1:1;ones".parse().unwrap();
        assert_eq!(a, InversionFreeWord::ones());
    }

    #[test]
    fn clamp_merges_the_top() {
        let v: InversionFreeWord = "1:1,3:2,4:inf".parse().unwrap();
        assert_eq!(v.clamp(2).to_string(), "1:1,2:inf");
        assert_eq!(v.clamp(3).to_string(), "1:1,3:inf");
        assert_eq!(v.clamp(9), v);
        assert_eq!(InversionFreeWord::ones().clamp(3).to_string(), "1:1,2:1,3:inf");
    }

    #[test]
    fn orbit_gf_examples() {
        let q = QParam::from_ratio(1, 3).unwrap();
        let x = q.exact().clone();
        let v: InversionFreeWord = "1:1,2:inf".parse().unwrap();
        assert_eq!(orbit_inversion_gf(&v, 3, &q).unwrap(), int(1) + &x + &x * &x);
        let single: InversionFreeWord = "4:inf".parse().unwrap();
        assert_eq!(orbit_inversion_gf(&single, 7, &q).unwrap(), int(1));
        let v: InversionFreeWord = "1:2,2:inf".parse().unwrap();
        let expect = int(1) + &x + int(2) * rpow(&x, 2) + rpow(&x, 3) + rpow(&x, 4);
        assert_eq!(orbit_inversion_gf(&v, 4, &q).unwrap(), expect);
        assert_eq!(orbit_inversion_counts(&[2, 2]), vec![1, 1, 2, 1, 1]);
        assert_eq!(orbit_inversion_counts(&[1, 1, 1]), vec![1, 2, 2, 1]);
    }

    #[test]
    fn height_examples() {
        let h = HeightFunction::on_finite(vec![0.into(), Multiplicity::Infinite]).unwrap();
        assert_eq!(height_to_word(&h).to_string(), "2:inf");
        let h = HeightFunction::on_finite(vec![2.into(), Multiplicity::Infinite]).unwrap();
        assert_eq!(height_to_word(&h).to_string(), "1:2,2:inf");
        let h = HeightFunction::on_naturals(vec![], Tail::Ones).unwrap();
        assert_eq!(height_to_word(&h), InversionFreeWord::ones());
        assert_eq!(h.get(5), Multiplicity::Finite(5));
        // ∞ - ∞ = 0: letters after the first infinite height are absent
        let h = HeightFunction::on_finite(vec![1.into(), Multiplicity::Infinite, Multiplicity::Infinite])
            .unwrap();
        assert_eq!(h.increment(3), Multiplicity::ZERO);
        assert_eq!(height_to_word(&h).to_string(), "1:1,2:inf");
        assert!(HeightFunction::on_finite(vec![3.into(), 1.into(), Multiplicity::Infinite]).is_err());
        assert!(HeightFunction::on_finite(vec![3.into()]).is_err());
    }

    #[test]
    fn height_round_trip_exhaustive() {
        let vals: Vec<Multiplicity> = (0..=6)
            .map(Multiplicity::Finite)
            .chain([Multiplicity::Infinite])
            .collect();
        for d in 1..=5usize {
            // weakly increasing sequences of length d-1 over vals, then ∞
            let mut idx = vec![0usize; d - 1];
            loop {
                if idx.windows(2).all(|p| p[0] <= p[1]) {
                    let mut values: Vec<Multiplicity> = idx.iter().map(|&i| vals[i]).collect();
                    values.push(Multiplicity::Infinite);
                    let h = HeightFunction::on_finite(values).unwrap();
                    let v = height_to_word(&h);
                    assert_eq!(word_to_height(&v, d), h);
                }
                // odometer
                let mut k = 0;
                while k < idx.len() {
                    idx[k] += 1;
                    if idx[k] < vals.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == idx.len() {
                    break;
                }
            }
        }
    }

    #[test]
    fn height_round_trip_infinite_support() {
        let h = HeightFunction::on_naturals(vec![2, 2, 5], Tail::Constant(2)).unwrap();
        let v = height_to_word(&h);
        assert_eq!(v.to_string(), "1:2,3:3,4:2;const=2");
        assert_eq!(word_to_height(&v, 0), h);
    }

    #[test]
    fn pushforward_examples() {
        assert_eq!(monotone_pushforward(|a| a, &w("3142")), w("3142"));
        assert_eq!(monotone_pushforward(clamp_map(2), &w("1325")), w("1222"));
        let v: InversionFreeWord = "1:1,2:2,3:1,4:inf".parse().unwrap();
        let pushed = monotone_pushforward(clamp_map(2), &v.prefix(6));
        assert!(pushed.is_inversion_free());
        assert_eq!(pushed, v.clamp(2).prefix(6));
    }

    #[test]
    fn height_function_text_round_trip() {
        for text in ["1,inf", "2,2,inf", "1,3;ones", "0,2;const=3"] {
            let h: HeightFunction = text.parse().unwrap();
            assert_eq!(h.to_string(), text);
        }
        assert!("1,2".parse::<HeightFunction>().is_err());
        assert!("2,1,inf".parse::<HeightFunction>().is_err());
        assert!("1,inf;ones".parse::<HeightFunction>().is_err());
    }
}
