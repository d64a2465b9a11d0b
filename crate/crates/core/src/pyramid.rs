//! The q-Pascal pyramid `Γ(q, d)`: edge and path weights, dimension functions,
//! the Martin kernel with its boundary limits, and Gibbs-harmonic functions.
//!
//! `Γ(q, ∞)` is handled through finitely supported vertices: a query is
//! answered in `Γ(q, d)` for `d` covering the support.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pvmeasure::marginal_prob;
use crate::qkernel::{
    descending_pochhammer, gaussian_multinomial, int, q_pochhammer, to_f64, ExactScalar, Mode, Multiplicity,
    QParam,
};
use crate::words::{height_to_word, word_of_counts, FiniteWord, HeightFunction, InversionFreeWord, Letter};

/// A vertex `λ ∈ Z_+^d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticeVertex(pub Vec<u64>);

impl LatticeVertex {
    pub fn new(coords: Vec<u64>) -> Self {
        LatticeVertex(coords)
    }

    pub fn zero(d: usize) -> Self {
        LatticeVertex(vec![0; d])
    }

    pub fn unit(d: usize, a: usize) -> Self {
        let mut v = Self::zero(d);
        v.0[a - 1] = 1;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[u64] {
        &self.0
    }

    /// `λ_a` for 1-based `a`, zero beyond `d`.
    pub fn get(&self, a: usize) -> u64 {
        self.0.get(a.wrapping_sub(1)).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn step(&self, a: usize) -> LatticeVertex {
        let mut v = self.clone();
        v.0[a - 1] += 1;
        v
    }

    pub fn back(&self, a: usize) -> Option<LatticeVertex> {
        let mut v = self.clone();
        v.0[a - 1] = v.0[a - 1].checked_sub(1)?;
        Some(v)
    }

    /// Coordinatewise `self ≤ other`.
    pub fn below(&self, other: &LatticeVertex) -> bool {
        (1..=self.dim().max(other.dim())).all(|a| self.get(a) <= other.get(a))
    }

    /// `λ - μ` when it lies in `Z_+^d`.
    pub fn minus(&self, mu: &LatticeVertex) -> Option<LatticeVertex> {
        let d = self.dim().max(mu.dim());
        (1..=d)
            .map(|a| self.get(a).checked_sub(mu.get(a)))
            .collect::<Option<Vec<_>>>()
            .map(LatticeVertex)
    }

    /// `h_λ(a) = λ_1 + ⋯ + λ_a`.
    pub fn height(&self, a: usize) -> u64 {
        (1..=a).map(|b| self.get(b)).sum()
    }

    /// The same vertex in `Γ(q, d)`, `d ≥` the last nonzero coordinate.
    pub fn embed(&self, d: usize) -> Result<LatticeVertex> {
        if self.0.iter().skip(d).any(|&x| x != 0) {
            return Err(Error::Invalid(format!("{self} is not supported in the first {d} coordinates")));
        }
        Ok(LatticeVertex((1..=d).map(|a| self.get(a)).collect()))
    }

    /// Index of the last nonzero coordinate (0 for the root).
    pub fn support_dim(&self) -> usize {
        self.0.iter().rposition(|&x| x != 0).map_or(0, |i| i + 1)
    }

    /// `Σ_{b<a} λ_b λ_a`.
    fn e2(&self) -> u64 {
        let mut seen = 0;
        let mut acc = 0;
        for &x in &self.0 {
            acc += seen * x;
            seen += x;
        }
        acc
    }
}

impl fmt::Display for LatticeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for LatticeVertex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Parse(format!("bad lattice coordinate `{t}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(LatticeVertex)
    }
}

/// All vertices of level `n` in `Γ(q, d)`, lexicographically decreasing.
pub fn level(d: usize, n: u64) -> Vec<LatticeVertex> {
    fn go(d: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<LatticeVertex>) {
        if cur.len() + 1 == d {
            cur.push(left);
            out.push(LatticeVertex(cur.clone()));
            cur.pop();
            return;
        }
        for x in (0..=left).rev() {
            cur.push(x);
            go(d, left - x, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if d == 0 {
        if n == 0 {
            out.push(LatticeVertex(Vec::new()));
        }
        return out;
    }
    go(d, n, &mut Vec::new(), &mut out);
    out
}

/// `weight(λ, λ + e_a) = q^{λ_{a+1} + ⋯ + λ_d}`.
pub fn edge_weight(lambda: &LatticeVertex, a: usize, q: &QParam) -> ExactScalar {
    assert!(a >= 1 && a <= lambda.dim(), "direction {a} outside 1..={}", lambda.dim());
    let tail: u64 = lambda.0[a..].iter().sum();
    q.pow(tail as i64)
}

/// `dim(λ)`, the total weight of standard paths from the root to `λ`.
pub fn dim_vertex(lambda: &LatticeVertex, q: &QParam) -> ExactScalar {
    gaussian_multinomial(lambda.coords(), q)
}

/// Total weight of monotone paths from `mu` to `lambda`, by dynamic
/// programming over the box between them.
pub fn dim_pair_by_paths(mu: &LatticeVertex, lambda: &LatticeVertex, q: &QParam) -> ExactScalar {
    let d = lambda.dim().max(mu.dim());
    let (Ok(mu), Ok(lambda)) = (mu.embed(d), lambda.embed(d)) else {
        return ExactScalar::zero();
    };
    if !mu.below(&lambda) {
        return ExactScalar::zero();
    }
    let mut memo: BTreeMap<LatticeVertex, ExactScalar> = BTreeMap::new();
    memo.insert(mu.clone(), ExactScalar::one());
    // visit the box level by level so predecessors are always ready
    let span = lambda.degree() - mu.degree();
    for step in 1..=span {
        for delta in level(d, step) {
            let nu = LatticeVertex((0..d).map(|i| mu.0[i] + delta.0[i]).collect());
            if !nu.below(&lambda) {
                continue;
            }
            let mut acc = ExactScalar::zero();
            for a in 1..=d {
                if let Some(prev) = nu.back(a) {
                    if let Some(w) = memo.get(&prev) {
                        acc += w * edge_weight(&prev, a, q);
                    }
                }
            }
            memo.insert(nu, acc);
        }
    }
    memo.remove(&lambda).unwrap_or_else(ExactScalar::zero)
}

pub fn dim_by_paths(lambda: &LatticeVertex, q: &QParam) -> ExactScalar {
    dim_pair_by_paths(&LatticeVertex::zero(lambda.dim()), lambda, q)
}

/// `dim(μ, λ) = q^{N(μ, λ)} dim(λ - μ)`, zero unless `μ ≤ λ`.
pub fn dim_pair(mu: &LatticeVertex, lambda: &LatticeVertex, q: &QParam) -> ExactScalar {
    let Some(diff) = lambda.minus(mu) else {
        return ExactScalar::zero();
    };
    let d = diff.dim();
    let mut n = 0i64;
    for a in 1..=d {
        for b in 1..a {
            n += (lambda.get(b) as i64 - mu.get(b) as i64) * mu.get(a) as i64;
        }
    }
    q.pow(n) * dim_vertex(&diff, q)
}

/// `(q; q)_k`.
fn q_shifted_factorial(q: &QParam, k: u64) -> ExactScalar {
    q_pochhammer(q.exact(), q.exact(), Multiplicity::Finite(k)).expect("finite length")
}

/// Closed form of `dim(μ, λ) / dim(λ)` valid for every pair `(μ, λ)`.
pub fn martin_kernel_closed_form(mu: &LatticeVertex, lambda: &LatticeVertex, q: &QParam) -> ExactScalar {
    let (m, n) = (mu.degree(), lambda.degree());
    if m > n {
        return ExactScalar::zero();
    }
    let d = mu.dim().max(lambda.dim());
    let mut out = q.pow(-(mu.e2() as i64)) * q_shifted_factorial(q, n - m) / q_shifted_factorial(q, n);
    let mut exponent = 0i64;
    for a in 1..=d {
        let mu_a = mu.get(a);
        if mu_a == 0 {
            continue;
        }
        let factor = descending_pochhammer(q, Multiplicity::Finite(lambda.get(a)), mu_a);
        if factor.is_zero() {
            return factor;
        }
        out *= factor;
        exponent += (mu_a * lambda.height(a - 1)) as i64;
    }
    out * q.pow(exponent)
}

/// The Martin kernel `dim(μ, λ) / dim(λ)`, computed as a ratio and in closed
/// form; the two must agree.
pub fn martin_kernel(mu: &LatticeVertex, lambda: &LatticeVertex, q: &QParam) -> Result<ExactScalar> {
    let direct = dim_pair(mu, lambda, q) / dim_vertex(lambda, q);
    let closed = martin_kernel_closed_form(mu, lambda, q);
    if direct != closed {
        return Err(Error::OracleMismatch(format!(
            "martin kernel at ({mu}; {lambda}): ratio {direct} vs closed form {closed}"
        )));
    }
    Ok(direct)
}

/// Float evaluation of the closed form.
pub fn martin_kernel_float(mu: &LatticeVertex, lambda: &LatticeVertex, q: f64) -> f64 {
    let (m, n) = (mu.degree(), lambda.degree());
    if m > n {
        return 0.0;
    }
    let qq = |k: u64| (1..=k).map(|i| 1.0 - q.powi(i as i32)).product::<f64>();
    let mut out = q.powi(-(mu.e2() as i32)) * qq(n - m) / qq(n);
    for a in 1..=mu.dim().max(lambda.dim()) {
        let (mu_a, l_a) = (mu.get(a), lambda.get(a));
        for i in 0..mu_a {
            if i >= l_a {
                return 0.0;
            }
            out *= 1.0 - q.powi((l_a - i) as i32);
        }
        out *= q.powi((mu_a * lambda.height(a - 1)) as i32);
    }
    out
}

/// `q^{μ_a h(a-1)}` with `q^∞ = 0` and `q^{0·∞} = 1`.
fn height_power(q: &QParam, mu_a: u64, h_prev: Multiplicity) -> ExactScalar {
    match h_prev {
        _ if mu_a == 0 => ExactScalar::one(),
        Multiplicity::Infinite => ExactScalar::zero(),
        Multiplicity::Finite(h) => q.pow((mu_a * h) as i64),
    }
}

/// Limit of the Martin kernel `K(μ, λ)` along `h_λ → h`.
pub fn boundary_limit(mu: &LatticeVertex, h: &HeightFunction, q: &QParam) -> ExactScalar {
    let mut out = q.pow(-(mu.e2() as i64));
    for a in 1..=mu.dim() {
        let mu_a = mu.get(a);
        if mu_a == 0 {
            continue;
        }
        out *= descending_pochhammer(q, h.increment(a), mu_a) * height_power(q, mu_a, h.get(a - 1));
        if out.is_zero() {
            break;
        }
    }
    out
}

pub fn boundary_limit_float(mu: &LatticeVertex, h: &HeightFunction, q: f64) -> f64 {
    let mut out = q.powi(-(mu.e2() as i32));
    for a in 1..=mu.dim() {
        let mu_a = mu.get(a);
        if mu_a == 0 {
            continue;
        }
        if let Multiplicity::Finite(inc) = h.increment(a) {
            for i in 0..mu_a {
                if i >= inc {
                    return 0.0;
                }
                out *= 1.0 - q.powi((inc - i) as i32);
            }
        }
        match h.get(a - 1) {
            Multiplicity::Infinite => return 0.0,
            Multiplicity::Finite(hp) => out *= q.powi((mu_a * hp) as i32),
        }
    }
    out
}

/// The vertex of level `n` approaching `h`: finite increments of `h` are kept
/// and the first infinite one absorbs the rest of the level.
pub fn approach_vertex(h: &HeightFunction, d: usize, n: u64) -> Option<LatticeVertex> {
    let mut coords = vec![0; d];
    let mut used = 0u64;
    for a in 1..=d {
        match h.increment(a) {
            Multiplicity::Finite(l) if !h.get(a).is_infinite() => {
                coords[a - 1] = l;
                used += l;
            }
            _ => {
                coords[a - 1] = n.checked_sub(used)?;
                return Some(LatticeVertex(coords));
            }
        }
    }
    (used == n).then_some(LatticeVertex(coords))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    pub level: u64,
    pub lambda: String,
    pub kernel: f64,
    pub limit: f64,
    pub error: f64,
}

/// `|K(μ, λ_n) - limit|` along [`approach_vertex`]; levels with no such vertex
/// are skipped. Exact mode evaluates rationally and converts at the end.
pub fn kernel_convergence_table(
    mu: &LatticeVertex,
    h: &HeightFunction,
    q: &QParam,
    levels: &[u64],
) -> Result<Vec<KernelRow>> {
    let d = h
        .domain_size()
        .ok_or_else(|| Error::Unsupported("kernel tables need a height function on N_d".into()))?;
    if mu.support_dim() > d {
        return Err(Error::Invalid(format!("μ = {mu} lives outside N_{d}")));
    }
    let mu = mu.embed(d)?;
    let exact_limit = boundary_limit(&mu, h, q);
    let mut rows = Vec::new();
    for &n in levels {
        let Some(lambda) = approach_vertex(h, d, n) else {
            continue;
        };
        let (kernel, limit, error) = match q.mode() {
            Mode::Exact => {
                let k = martin_kernel(&mu, &lambda, q)?;
                let err = (&k - &exact_limit).abs();
                (to_f64(&k), to_f64(&exact_limit), to_f64(&err))
            }
            Mode::Float => {
                let k = martin_kernel_float(&mu, &lambda, q.as_f64());
                let l = boundary_limit_float(&mu, h, q.as_f64());
                (k, l, (k - l).abs())
            }
        };
        rows.push(KernelRow {
            level: n,
            lambda: lambda.to_string(),
            kernel,
            limit,
            error,
        });
    }
    Ok(rows)
}


/// A Gibbs-harmonic function on levels `0..=depth` of `Γ(q, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicFunction {
    d: usize,
    depth: u64,
    values: BTreeMap<LatticeVertex, ExactScalar>,
}

impl HarmonicFunction {
    pub fn from_fn<F: FnMut(&LatticeVertex) -> ExactScalar>(d: usize, depth: u64, mut f: F) -> Self {
        let values = (0..=depth)
            .flat_map(|n| level(d, n))
            .map(|lambda| {
                let x = f(&lambda);
                (lambda, x)
            })
            .collect();
        HarmonicFunction { d, depth, values }
    }

    /// Values on every vertex of levels `0..=depth`.
    pub fn from_values(d: usize, depth: u64, values: BTreeMap<LatticeVertex, ExactScalar>) -> Result<Self> {
        let expected: usize = (0..=depth).map(|n| level(d, n).len()).sum();
        let inside = values.keys().all(|k| k.dim() == d && k.degree() <= depth);
        if !inside || values.len() != expected {
            return Err(Error::Invalid(format!("values do not cover levels 0..={depth} of Γ(q, {d})")));
        }
        Ok(HarmonicFunction { d, depth, values })
    }

    /// `φ(λ)`: the `P^(v)` mass of a path to `λ` divided by its weight.
    pub fn from_pv(v: &InversionFreeWord, d: usize, depth: u64, q: &QParam) -> Result<Self> {
        match v.last_letter() {
            Some(z) if z as usize <= d => {}
            _ => {
                return Err(Error::Invalid(format!("{v} is not a word over N_{d}")));
            }
        }
        // the inversion-free representative has weight 1
        Ok(Self::from_fn(d, depth, |lambda| {
            marginal_prob(v, &word_of_counts(lambda.coords()), q)
        }))
    }

    /// `φ(λ) = boundary_limit(λ, h)`.
    pub fn from_height(h: &HeightFunction, depth: u64, q: &QParam) -> Result<Self> {
        let d = h
            .domain_size()
            .ok_or_else(|| Error::Unsupported("height function on N needs a finite truncation".into()))?;
        Ok(Self::from_fn(d, depth, |lambda| boundary_limit(lambda, h, q)))
    }

    /// `t φ + (1 - t) ψ`.
    pub fn convex(&self, other: &HarmonicFunction, t: &ExactScalar) -> Result<Self> {
        if self.d != other.d || self.depth != other.depth {
            return Err(Error::Invalid("harmonic functions on different domains".into()));
        }
        let s = int(1) - t;
        let values = self
            .values
            .iter()
            .map(|(k, a)| (k.clone(), a * t + &other.values[k] * &s))
            .collect();
        Ok(HarmonicFunction {
            d: self.d,
            depth: self.depth,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn get(&self, lambda: &LatticeVertex) -> Option<&ExactScalar> {
        self.values.get(lambda)
    }

    pub fn values(&self) -> &BTreeMap<LatticeVertex, ExactScalar> {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GibbsFailure {
    Negative,
    Root,
    /// `φ(λ) ≠ Σ_a weight(λ, λ + e_a) φ(λ + e_a)`
    Recursion,
    /// `Σ_{|λ| = n} dim(λ) φ(λ) ≠ 1`
    Normalization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GibbsWitness {
    pub failure: GibbsFailure,
    pub vertex: LatticeVertex,
    pub expected: ExactScalar,
    pub found: ExactScalar,
}

impl fmt::Display for GibbsWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} fails at {}: expected {}, found {}",
            self.failure, self.vertex, self.expected, self.found
        )
    }
}

/// Checks nonnegativity, `φ(0) = 1`, the recursion below the top level and
/// the level normalization.
pub fn gibbs_check(phi: &HarmonicFunction, q: &QParam) -> std::result::Result<(), GibbsWitness> {
    let d = phi.d;
    let root = LatticeVertex::zero(d);
    for (lambda, x) in &phi.values {
        if x.is_negative() {
            return Err(GibbsWitness {
                failure: GibbsFailure::Negative,
                vertex: lambda.clone(),
                expected: ExactScalar::zero(),
                found: x.clone(),
            });
        }
    }
    if phi.values[&root] != int(1) {
        return Err(GibbsWitness {
            failure: GibbsFailure::Root,
            vertex: root,
            expected: int(1),
            found: phi.values[&LatticeVertex::zero(d)].clone(),
        });
    }
    for n in 0..phi.depth {
        for lambda in level(d, n) {
            let rhs: ExactScalar = (1..=d)
                .map(|a| edge_weight(&lambda, a, q) * &phi.values[&lambda.step(a)])
                .sum();
            if rhs != phi.values[&lambda] {
                return Err(GibbsWitness {
                    failure: GibbsFailure::Recursion,
                    expected: rhs,
                    found: phi.values[&lambda].clone(),
                    vertex: lambda,
                });
            }
        }
    }
    for n in 1..=phi.depth {
        let total: ExactScalar = level(d, n)
            .iter()
            .map(|lambda| dim_vertex(lambda, q) * &phi.values[lambda])
            .sum();
        if total != int(1) {
            return Err(GibbsWitness {
                failure: GibbsFailure::Normalization,
                vertex: LatticeVertex(vec![n]),
                expected: int(1),
                found: total,
            });
        }
    }
    Ok(())
}

/// The standard path of `w`: `0, e_{w_1}, e_{w_1} + e_{w_2}, …`.
pub fn word_path(w: &FiniteWord, d: usize) -> Result<Vec<LatticeVertex>> {
    let mut cur = LatticeVertex::zero(d);
    let mut path = vec![cur.clone()];
    for &a in w.letters() {
        if a == 0 || a as usize > d {
            return Err(Error::Invalid(format!("letter {a} outside N_{d}")));
        }
        cur = cur.step(a as usize);
        path.push(cur.clone());
    }
    Ok(path)
}

/// Inverse of [`word_path`]; consecutive vertices must differ by a unit vector.
pub fn path_word(path: &[LatticeVertex]) -> Result<FiniteWord> {
    let mut out = FiniteWord::default();
    for p in path.windows(2) {
        let diff = p[1]
            .minus(&p[0])
            .filter(|x| x.degree() == 1)
            .ok_or_else(|| Error::Invalid(format!("{} → {} is not a lattice step", p[0], p[1])))?;
        out.push(diff.support_dim() as Letter);
    }
    Ok(out)
}

pub fn path_weight(path: &[LatticeVertex], q: &QParam) -> ExactScalar {
    path.windows(2)
        .map(|p| {
            let a = p[1].minus(&p[0]).expect("monotone path").support_dim();
            edge_weight(&p[0], a, q)
        })
        .product()
}

/// The path of `w` with its weight, checked against `q^{inv(w)}`.
pub fn word_path_bijection(w: &FiniteWord, d: usize, q: &QParam) -> Result<(Vec<LatticeVertex>, ExactScalar)> {
    let path = word_path(w, d)?;
    let weight = path_weight(&path, q);
    let expect = q.pow(w.inversions() as i64);
    if weight != expect {
        return Err(Error::OracleMismatch(format!(
            "path weight {weight} of {w} differs from q^inv = {expect}"
        )));
    }
    Ok((path, weight))
}

/// `dim(λ)` in `Γ(q, ∞)` for a finitely supported `λ`, computed in `Γ(q, d)`
/// and `Γ(q, d + 1)` with `d` the support size; the two must agree.
pub fn dim_infinite(lambda: &LatticeVertex, q: &QParam) -> Result<ExactScalar> {
    let d = lambda.support_dim().max(1);
    let a = dim_by_paths(&lambda.embed(d)?, q);
    let b = dim_by_paths(&lambda.embed(d + 1)?, q);
    if a != b {
        return Err(Error::OracleMismatch(format!("dim({lambda}) depends on the truncation: {a} vs {b}")));
    }
    Ok(a)
}

/// `φ` of `P^(v)` and of its height function in one call, for `v` over `N_d`.
pub fn harmonic_pair(v: &InversionFreeWord, d: usize, depth: u64, q: &QParam) -> Result<(HarmonicFunction, HarmonicFunction)> {
    let h = crate::words::word_to_height(v, d);
    debug_assert_eq!(height_to_word(&h), *v);
    Ok((HarmonicFunction::from_pv(v, d, depth, q)?, HarmonicFunction::from_height(&h, depth, q)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkernel::ratio;

    fn q(a: i64, b: i64) -> QParam {
        QParam::from_ratio(a, b).unwrap()
    }

    fn lv(s: &str) -> LatticeVertex {
        s.parse().unwrap()
    }

    fn poly(coeffs: &[i64], x: &QParam) -> ExactScalar {
        coeffs.iter().enumerate().map(|(i, &c)| int(c) * x.pow(i as i64)).sum()
    }

    #[test]
    fn edge_weight_examples() {
        let h = q(1, 2);
        assert_eq!(edge_weight(&lv("1,2,3"), 1, &h), h.pow(5));
        assert_eq!(edge_weight(&lv("1,2,3"), 3, &h), int(1));
        assert_eq!(edge_weight(&lv("0,0,0"), 2, &h), int(1));
    }

    #[test]
    fn dim_examples() {
        let h = q(1, 3);
        assert_eq!(dim_vertex(&lv("4,0,0"), &h), int(1));
        assert_eq!(dim_vertex(&lv("2,2"), &h), poly(&[1, 1, 2, 1, 1], &h));
        assert_eq!(dim_by_paths(&lv("2,2"), &h), poly(&[1, 1, 2, 1, 1], &h));
        assert_eq!(dim_by_paths(&lv("1,1,1"), &h), poly(&[1, 2, 2, 1], &h));
        // 1 + 1/2 + 2/4 + 1/8 + 1/16
        assert_eq!(dim_vertex(&lv("2,2"), &q(1, 2)), ratio(35, 16));
    }

    #[test]
    fn dim_pair_examples() {
        let h = q(2, 5);
        assert_eq!(dim_pair(&lv("1,1"), &lv("2,2"), &h), h.pow(1) * (int(1) + h.exact()));
        assert_eq!(dim_pair(&lv("2,0"), &lv("1,1"), &h), int(0));
        assert_eq!(dim_pair(&lv("0,0"), &lv("3,1"), &h), dim_vertex(&lv("3,1"), &h));
        for (mu, lambda) in [("1,1", "2,2"), ("0,1,0", "2,1,2"), ("1,0,1", "1,3,2")] {
            assert_eq!(dim_pair(&lv(mu), &lv(lambda), &h), dim_pair_by_paths(&lv(mu), &lv(lambda), &h));
        }
    }

    #[test]
    fn paths_concatenate() {
        let h = q(1, 2);
        for n in 0..=6 {
            for lambda in level(3, n) {
                for m in 0..=n {
                    let through: ExactScalar = level(3, m)
                        .iter()
                        .map(|mu| dim_vertex(mu, &h) * dim_pair(mu, &lambda, &h))
                        .sum();
                    assert_eq!(through, dim_vertex(&lambda, &h));
                }
            }
        }
    }

    #[test]
    fn martin_kernel_examples() {
        let h = q(1, 2);
        assert_eq!(martin_kernel(&lv("0,0"), &lv("3,4"), &h).unwrap(), int(1));
        assert_eq!(martin_kernel(&lv("2,0"), &lv("1,5"), &h).unwrap(), int(0));
        // (1 - q) / (1 - q^6)
        assert_eq!(martin_kernel(&lv("1,0"), &lv("1,5"), &h).unwrap(), ratio(32, 63));
        let f = martin_kernel_float(&lv("1,0"), &lv("1,5"), 0.5);
        assert!((f - 32.0 / 63.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_limit_examples() {
        let h = q(1, 2);
        let one_inf = HeightFunction::on_finite(vec![1.into(), Multiplicity::Infinite]).unwrap();
        assert_eq!(boundary_limit(&lv("0,0"), &one_inf, &h), int(1));
        assert_eq!(boundary_limit(&lv("1,0"), &one_inf, &h), ratio(1, 2));
        assert_eq!(boundary_limit(&lv("0,1"), &one_inf, &h), ratio(1, 2));
        assert_eq!(boundary_limit(&lv("2,0"), &one_inf, &h), int(0));
        let flat = HeightFunction::on_finite(vec![1.into(), 1.into(), Multiplicity::Infinite]).unwrap();
        assert_eq!(boundary_limit(&lv("0,1,0"), &flat, &h), int(0));
        // letters past the infinite one never occur
        let early = HeightFunction::on_finite(vec![Multiplicity::Infinite, Multiplicity::Infinite]).unwrap();
        assert_eq!(boundary_limit(&lv("3,0"), &early, &h), int(1));
        assert_eq!(boundary_limit(&lv("0,1"), &early, &h), int(0));
        assert_eq!(boundary_limit_float(&lv("0,1"), &early, 0.5), 0.0);
    }

    #[test]
    fn boundary_limit_matches_pv_marginals() {
        let h = q(1, 3);
        let v: InversionFreeWord = "1:1,2:2,3:inf".parse().unwrap();
        let ht = crate::words::word_to_height(&v, 3);
        for u in crate::pvmeasure::words_over(&[1, 2, 3], 4) {
            let mu = LatticeVertex((1..=3).map(|a| u.count(a)).collect());
            let lhs = h.pow(u.inversions() as i64) * boundary_limit(&mu, &ht, &h);
            assert_eq!(lhs, marginal_prob(&v, &u, &h), "{u}");
        }
    }

    #[test]
    fn convergence_table_shrinks() {
        let one_inf = HeightFunction::on_finite(vec![1.into(), Multiplicity::Infinite]).unwrap();
        let levels: Vec<u64> = (1..=30).collect();
        for mode in [Mode::Exact, Mode::Float] {
            let h = q(1, 2).with_mode(mode);
            let rows = kernel_convergence_table(&lv("1,1"), &one_inf, &h, &levels).unwrap();
            assert_eq!(rows[0].level, 1);
            assert!(rows.windows(2).all(|p| p[1].error < p[0].error));
            assert!(rows.last().unwrap().error < 1e-8);
        }
        let rows = kernel_convergence_table(&lv("0,0"), &one_inf, &q(1, 2), &levels).unwrap();
        assert!(rows.iter().all(|r| r.error == 0.0 && r.kernel == 1.0));
    }

    #[test]
    fn approach_vertex_follows_the_height() {
        let h = HeightFunction::on_finite(vec![2.into(), 2.into(), Multiplicity::Infinite, Multiplicity::Infinite]).unwrap();
        assert_eq!(approach_vertex(&h, 4, 7), Some(lv("2,0,5,0")));
        assert_eq!(approach_vertex(&h, 4, 1), None);
    }

    #[test]
    fn harmonic_functions_from_words_and_heights() {
        let h = q(1, 2);
        for spec in ["1:1,2:inf", "1:2,2:1,3:inf", "2:inf", "1:inf"] {
            let v: InversionFreeWord = spec.parse().unwrap();
            let (a, b) = harmonic_pair(&v, 3, 5, &h).unwrap();
            assert_eq!(a, b, "{spec}");
            assert_eq!(gibbs_check(&a, &h), Ok(()));
        }
    }

    #[test]
    fn gibbs_check_verdicts() {
        let h = q(1, 3);
        let a = HarmonicFunction::from_pv(&"1:1,2:inf".parse().unwrap(), 2, 4, &h).unwrap();
        let b = HarmonicFunction::from_pv(&"1:3,2:inf".parse().unwrap(), 2, 4, &h).unwrap();
        assert!(gibbs_check(&a.convex(&b, &ratio(2, 7)).unwrap(), &h).is_ok());
        let mut k = 0;
        let junk = HarmonicFunction::from_fn(2, 3, |lambda| {
            k += 1;
            if lambda.degree() == 0 {
                int(1)
            } else {
                ratio(k, 17)
            }
        });
        let w = gibbs_check(&junk, &h).unwrap_err();
        assert_eq!(w.failure, GibbsFailure::Recursion);
        assert_ne!(w.expected, w.found);
    }

    #[test]
    fn word_path_examples() {
        let h = q(1, 2);
        let (path, weight) = word_path_bijection(&"21".parse().unwrap(), 2, &h).unwrap();
        assert_eq!(path, vec![lv("0,0"), lv("0,1"), lv("1,1")]);
        assert_eq!(weight, ratio(1, 2));
        let (_, weight) = word_path_bijection(&"1111".parse().unwrap(), 2, &h).unwrap();
        assert_eq!(weight, int(1));
        assert_eq!(path_word(&path).unwrap().to_string(), "21");
        assert!(word_path(&"13".parse().unwrap(), 2).is_err());
    }

    #[test]
    fn infinite_pyramid_is_truncation_stable() {
        let h = q(1, 2);
        assert_eq!(dim_infinite(&lv("1,0,2,0,0"), &h).unwrap(), dim_vertex(&lv("1,0,2"), &h));
        assert_eq!(dim_infinite(&lv("0"), &h).unwrap(), int(1));
    }
}
