//! Decreasing flags in `V_n = F^n` over a small Galois field, their orbit
//! types, projection counts `weight'`, and the passage between Gibbs-harmonic
//! functions on the pyramid and invariant measures on flags.
//!
//! Here `q = 1/q̃` where `q̃` is the field order.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pyramid::{edge_weight, gibbs_check, level, GibbsWitness, HarmonicFunction, LatticeVertex};
use crate::qkernel::{gaussian_multinomial, int, ratio, ExactScalar, QParam};

/// Largest `q̃^n` the brute-force enumerations accept.
pub const FLAG_BUDGET: u64 = 4096;

/// `F_{q̃}` for `q̃ ∈ {2, 3, 4, 5, 7, 8, 9}`, as addition and multiplication tables.
///
/// Elements are `0..q̃`; for `q̃ = p^k` an element encodes the coefficients of a
/// polynomial of degree `< k` in base `p`, reduced modulo a fixed irreducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaloisField {
    order: u8,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
}

impl GaloisField {
    pub fn new(order: u64) -> Result<Self> {
        // (p, modulus coefficients low to high, monic)
        let (p, modulus): (u8, &[u8]) = match order {
            2 | 3 | 5 | 7 => (order as u8, &[0, 1]),
            4 => (2, &[1, 1, 1]),
            8 => (2, &[1, 1, 0, 1]),
            9 => (3, &[1, 0, 1]),
            _ => {
                return Err(Error::Unsupported(format!(
                    "field order {order}; supported orders are 2, 3, 4, 5, 7, 8, 9"
                )))
            }
        };
        let q = order as u8;
        let k = modulus.len() - 1;
        let digits = |x: u8| -> Vec<u8> {
            let mut x = x;
            (0..k)
                .map(|_| {
                    let d = x % p;
                    x /= p;
                    d
                })
                .collect()
        };
        let undigits = |ds: &[u8]| -> u8 { ds.iter().rev().fold(0, |acc, &d| acc * p + d) };
        let size = q as usize;
        let mut add = vec![0; size * size];
        let mut mul = vec![0; size * size];
        for x in 0..q {
            for y in 0..q {
                let (dx, dy) = (digits(x), digits(y));
                let sum: Vec<u8> = dx.iter().zip(&dy).map(|(a, b)| (a + b) % p).collect();
                add[x as usize * size + y as usize] = undigits(&sum);
                let mut prod = vec![0u8; 2 * k];
                for (i, a) in dx.iter().enumerate() {
                    for (j, b) in dy.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + a * b) % p;
                    }
                }
                // reduce by the monic modulus from the top degree down
                for deg in (k..2 * k).rev() {
                    let c = prod[deg];
                    if c != 0 {
                        for (i, m) in modulus.iter().enumerate() {
                            let idx = deg - k + i;
                            prod[idx] = (prod[idx] + (p - c) * m) % p;
                        }
                    }
                }
                mul[x as usize * size + y as usize] = undigits(&prod[..k]);
            }
        }
        let neg = (0..q)
            .map(|x| (0..q).find(|&y| add[x as usize * size + y as usize] == 0).unwrap())
            .collect();
        let inv = (0..q)
            .map(|x| {
                if x == 0 {
                    0
                } else {
                    (1..q).find(|&y| mul[x as usize * size + y as usize] == 1).unwrap()
                }
            })
            .collect();
        Ok(GaloisField { order: q, add, mul, neg, inv })
    }

    pub fn order(&self) -> u64 {
        self.order as u64
    }

    pub fn add(&self, x: u8, y: u8) -> u8 {
        self.add[x as usize * self.order as usize + y as usize]
    }

    pub fn mul(&self, x: u8, y: u8) -> u8 {
        self.mul[x as usize * self.order as usize + y as usize]
    }

    pub fn neg(&self, x: u8) -> u8 {
        self.neg[x as usize]
    }

    pub fn sub(&self, x: u8, y: u8) -> u8 {
        self.add(x, self.neg(y))
    }

    /// Multiplicative inverse; `inv(0)` is reported as 0.
    pub fn inv(&self, x: u8) -> u8 {
        self.inv[x as usize]
    }

    /// Exhaustive check of the field axioms.
    pub fn verify_axioms(&self) -> bool {
        let els: Vec<u8> = (0..self.order).collect();
        for &x in &els {
            if self.add(x, 0) != x || self.mul(x, 1) != x || self.add(x, self.neg(x)) != 0 {
                return false;
            }
            if x != 0 && self.mul(x, self.inv(x)) != 1 {
                return false;
            }
            for &y in &els {
                if self.add(x, y) != self.add(y, x) || self.mul(x, y) != self.mul(y, x) {
                    return false;
                }
                for &z in &els {
                    let assoc_add = self.add(self.add(x, y), z) == self.add(x, self.add(y, z));
                    let assoc_mul = self.mul(self.mul(x, y), z) == self.mul(x, self.mul(y, z));
                    let distrib = self.mul(x, self.add(y, z)) == self.add(self.mul(x, y), self.mul(x, z));
                    if !(assoc_add && assoc_mul && distrib) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// `q = 1/q̃`.
    pub fn q(&self) -> QParam {
        QParam::from_ratio(1, self.order as i64).expect("order ≥ 2")
    }

    fn check_budget(&self, n: usize) -> Result<()> {
        let size = (self.order as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
        if size > FLAG_BUDGET {
            return Err(Error::Budget {
                what: "q̃^n",
                limit: FLAG_BUDGET as usize,
                got: size.min(usize::MAX as u64) as usize,
            });
        }
        Ok(())
    }
}

/// Reduced row-echelon form: nonzero rows with leading 1s, pivots cleared above and below.
fn rref(f: &GaloisField, mut rows: Vec<Vec<u8>>, n: usize) -> Vec<Vec<u8>> {
    let mut r = 0;
    for col in 0..n {
        let Some(pivot) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(r, pivot);
        let s = f.inv(rows[r][col]);
        for x in rows[r].iter_mut() {
            *x = f.mul(*x, s);
        }
        for i in 0..rows.len() {
            if i != r && rows[i][col] != 0 {
                let c = rows[i][col];
                let pivot = rows[r].clone();
                for (x, &p) in rows[i].iter_mut().zip(&pivot) {
                    *x = f.sub(*x, f.mul(c, p));
                }
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    rows
}

/// A subspace of `F^n`, stored as its canonical reduced echelon basis.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subspace {
    n: usize,
    rows: Vec<Vec<u8>>,
}

impl Subspace {
    pub fn span(f: &GaloisField, n: usize, vectors: Vec<Vec<u8>>) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != n || v.iter().any(|&x| x >= f.order)) {
            return Err(Error::Invalid(format!("vectors are not in F_{}^{n}", f.order)));
        }
        Ok(Subspace { n, rows: rref(f, vectors, n) })
    }

    pub fn zero(n: usize) -> Self {
        Subspace { n, rows: Vec::new() }
    }

    /// `span(e_1, …, e_k)`.
    pub fn coordinate(n: usize, k: usize) -> Self {
        let rows = (0..k)
            .map(|i| (0..n).map(|j| u8::from(i == j)).collect())
            .collect();
        Subspace { n, rows }
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn basis(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn contains(&self, f: &GaloisField, other: &Subspace) -> bool {
        let mut all = self.rows.clone();
        all.extend(other.rows.iter().cloned());
        rref(f, all, self.n).len() == self.dim()
    }

    /// `X ∩ V_{n-1}` read inside `F^{n-1}` (the last coordinate dropped).
    pub fn restrict(&self, f: &GaloisField) -> Subspace {
        let last = self.n - 1;
        let mut rows = self.rows.clone();
        if let Some(k) = rows.iter().position(|r| r[last] != 0) {
            let pivot = rows.remove(k);
            let s = f.inv(pivot[last]);
            for r in rows.iter_mut() {
                let c = f.mul(r[last], s);
                if c != 0 {
                    for j in 0..self.n {
                        let t = f.mul(c, pivot[j]);
                        r[j] = f.sub(r[j], t);
                    }
                }
            }
        }
        let rows = rows.into_iter().map(|mut r| {
            r.truncate(last);
            r
        });
        Subspace {
            n: last,
            rows: rref(f, rows.collect(), last),
        }
    }
}

/// Every subspace of `F^n`, enumerated through echelon forms.
pub fn enumerate_subspaces(f: &GaloisField, n: usize) -> Result<Vec<Subspace>> {
    f.check_budget(n)?;
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let pivots: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        // free slots: (row i, column j) with j > pivot_i and j not a pivot
        let free: Vec<(usize, usize)> = pivots
            .iter()
            .enumerate()
            .flat_map(|(i, &p)| (p + 1..n).filter(|j| !pivots.contains(j)).map(move |j| (i, j)))
            .collect();
        let total = (f.order as u64).pow(free.len() as u32);
        for code in 0..total {
            let mut rows: Vec<Vec<u8>> = pivots
                .iter()
                .map(|&p| (0..n).map(|j| u8::from(j == p)).collect())
                .collect();
            let mut c = code;
            for &(i, j) in &free {
                rows[i][j] = (c % f.order as u64) as u8;
                c /= f.order as u64;
            }
            out.push(Subspace { n, rows });
        }
    }
    Ok(out)
}

/// `V_n = X(0) ⊇ X(1) ⊇ ⋯ ⊇ X(d) = {0}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlagChain {
    spaces: Vec<Subspace>,
}

impl FlagChain {
    pub fn new(f: &GaloisField, spaces: Vec<Subspace>) -> Result<Self> {
        let Some(first) = spaces.first() else {
            return Err(Error::Invalid("a flag needs at least X(0) and X(d)".into()));
        };
        let n = first.ambient();
        if spaces.len() < 2 || first.dim() != n || spaces.last().unwrap().dim() != 0 {
            return Err(Error::Invalid("a flag runs from V_n down to {0}".into()));
        }
        if spaces.iter().any(|s| s.ambient() != n) || spaces.windows(2).any(|p| !p[0].contains(f, &p[1])) {
            return Err(Error::Invalid("flag spaces must be nested in one ambient space".into()));
        }
        Ok(FlagChain { spaces })
    }

    /// The flag with `X(i) = span(e_1, …, e_{λ_{i+1} + ⋯ + λ_d})`.
    pub fn coordinate(lambda: &LatticeVertex) -> Self {
        let n = lambda.degree() as usize;
        let d = lambda.dim();
        let spaces = (0..=d)
            .map(|i| {
                let dim: u64 = lambda.coords()[i..].iter().sum();
                Subspace::coordinate(n, dim as usize)
            })
            .collect();
        FlagChain { spaces }
    }

    pub fn d(&self) -> usize {
        self.spaces.len() - 1
    }

    pub fn ambient(&self) -> usize {
        self.spaces[0].ambient()
    }

    pub fn spaces(&self) -> &[Subspace] {
        &self.spaces
    }

    /// Intersection of every space with `V_{n-1}`.
    pub fn project(&self, f: &GaloisField) -> FlagChain {
        FlagChain {
            spaces: self.spaces.iter().map(|s| s.restrict(f)).collect(),
        }
    }
}

/// `λ_i = dim X(i-1) - dim X(i)`.
pub fn flag_type(x: &FlagChain) -> LatticeVertex {
    LatticeVertex::new(
        x.spaces
            .windows(2)
            .map(|p| (p[0].dim() - p[1].dim()) as u64)
            .collect(),
    )
}

/// All decreasing `d`-flags in `F^n`.
pub fn enumerate_flags(n: usize, d: usize, f: &GaloisField) -> Result<Vec<FlagChain>> {
    if d == 0 {
        return Err(Error::Invalid("flags need d ≥ 1".into()));
    }
    let subspaces = enumerate_subspaces(f, n)?;
    let mut out = Vec::new();
    let mut chain = vec![Subspace::coordinate(n, n)];
    fn go(
        f: &GaloisField,
        d: usize,
        n: usize,
        subspaces: &[Subspace],
        chain: &mut Vec<Subspace>,
        out: &mut Vec<FlagChain>,
    ) {
        if chain.len() == d {
            let mut spaces = chain.clone();
            spaces.push(Subspace::zero(n));
            out.push(FlagChain { spaces });
            return;
        }
        let top = chain.last().unwrap().clone();
        for s in subspaces.iter().filter(|s| s.dim() <= top.dim() && top.contains(f, s)) {
            chain.push(s.clone());
            go(f, d, n, subspaces, chain, out);
            chain.pop();
        }
    }
    go(f, d, n, &subspaces, &mut chain, &mut out);
    Ok(out)
}

/// Number of flags of each type, by enumeration.
pub fn flag_counts(n: usize, d: usize, f: &GaloisField) -> Result<BTreeMap<LatticeVertex, u64>> {
    let mut out = BTreeMap::new();
    for x in enumerate_flags(n, d, f)? {
        *out.entry(flag_type(&x)).or_insert(0) += 1;
    }
    Ok(out)
}

/// `[n; λ]` at `q̃`, the closed-form number of flags of type `λ`.
pub fn flag_count_formula(lambda: &LatticeVertex, f: &GaloisField) -> ExactScalar {
    gaussian_multinomial(lambda.coords(), &int(f.order() as i64))
}

/// `weight'(λ, λ + e_a) = q̃^{n-k}` with `k = λ_{a+1} + ⋯ + λ_d`, as stated.
pub fn weight_prime(lambda: &LatticeVertex, a: usize, f: &GaloisField) -> u64 {
    let n = lambda.degree();
    let k: u64 = lambda.coords()[a..].iter().sum();
    f.order().pow((n - k) as u32)
}

/// Number of lifts counted against the true fibre: the new vector is free
/// modulo `X_n(a-1)`, so the exponent is `n - (λ_a + ⋯ + λ_d)`.
pub fn weight_prime_lifts(lambda: &LatticeVertex, a: usize, f: &GaloisField) -> u64 {
    let n = lambda.degree();
    let k: u64 = lambda.coords()[a - 1..].iter().sum();
    f.order().pow((n - k) as u32)
}

/// Caches flag enumerations by ambient dimension.
#[derive(Debug, Clone)]
pub struct FlagCensus {
    field: GaloisField,
    d: usize,
    flags: BTreeMap<usize, Vec<FlagChain>>,
}

impl FlagCensus {
    pub fn new(field: GaloisField, d: usize) -> Self {
        FlagCensus {
            field,
            d,
            flags: BTreeMap::new(),
        }
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    pub fn flags(&mut self, n: usize) -> Result<&[FlagChain]> {
        if !self.flags.contains_key(&n) {
            let all = enumerate_flags(n, self.d, &self.field)?;
            self.flags.insert(n, all);
        }
        Ok(&self.flags[&n])
    }

    /// Flags of type `λ + e_a` in `V_{n+1}` projecting onto the coordinate flag of type `λ`.
    pub fn weight_prime_counted(&mut self, lambda: &LatticeVertex, a: usize) -> Result<u64> {
        if lambda.dim() != self.d {
            return Err(Error::Invalid(format!("{lambda} is not a type for d = {}", self.d)));
        }
        let n = lambda.degree() as usize;
        let base = FlagChain::coordinate(lambda);
        let target = lambda.step(a);
        let field = self.field.clone();
        Ok(self
            .flags(n + 1)?
            .iter()
            .filter(|x| flag_type(x) == target && x.project(&field) == base)
            .count() as u64)
    }

    pub fn type_counts(&mut self, n: usize) -> Result<BTreeMap<LatticeVertex, u64>> {
        let mut out = BTreeMap::new();
        for x in self.flags(n)? {
            *out.entry(flag_type(x)).or_insert(0) += 1;
        }
        Ok(out)
    }
}

fn check_reciprocal(q: &QParam, f: &GaloisField) -> Result<()> {
    if *q.exact() != ratio(1, f.order() as i64) {
        return Err(Error::InvalidQ(format!("q = {} is not 1/{}", q, f.order())));
    }
    Ok(())
}

/// `weight'(λ, λ + e_a) = weight(λ, λ + e_a) q^{-n}` for the stated `weight'`.
pub fn weights_relation_check(lambda: &LatticeVertex, a: usize, q: &QParam, f: &GaloisField) -> Result<bool> {
    check_reciprocal(q, f)?;
    let lhs = int(weight_prime(lambda, a, f) as i64);
    let rhs = edge_weight(lambda, a, q) * q.pow(-(lambda.degree() as i64));
    Ok(lhs == rhs)
}

/// A function of the flag type, `ψ(λ)`, on levels `0..=depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeFunction {
    d: usize,
    depth: u64,
    values: BTreeMap<LatticeVertex, ExactScalar>,
}

impl TypeFunction {
    pub fn from_fn<F: FnMut(&LatticeVertex) -> ExactScalar>(d: usize, depth: u64, mut f: F) -> Self {
        let values = (0..=depth)
            .flat_map(|n| level(d, n))
            .map(|lambda| {
                let x = f(&lambda);
                (lambda, x)
            })
            .collect();
        TypeFunction { d, depth, values }
    }

    pub fn get(&self, lambda: &LatticeVertex) -> Option<&ExactScalar> {
        self.values.get(lambda)
    }

    pub fn values(&self) -> &BTreeMap<LatticeVertex, ExactScalar> {
        &self.values
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.d
    }
}

/// How `φ` and `ψ` are matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiRule {
    /// `φ(λ) = q^{n(n-1)/2} ψ(λ)`, as stated
    Stated,
    /// `ψ(λ) = q^{e_2(λ)} φ(λ)`, `e_2(λ) = Σ_{a<b} λ_a λ_b`, matching the counted `weight'`
    Corrected,
}

impl PsiRule {
    /// Exponent `t` with `ψ(λ) = q^t φ(λ)`.
    fn exponent(self, lambda: &LatticeVertex) -> i64 {
        let n = lambda.degree() as i64;
        match self {
            PsiRule::Stated => -(n * (n - 1) / 2),
            PsiRule::Corrected => {
                let sq: u64 = lambda.coords().iter().map(|&x| x * x).sum();
                ((n * n) as u64 - sq) as i64 / 2
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToPsi,
    ToPhi,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlagFailure {
    Negative,
    Root,
    /// `ψ(λ) ≠ Σ_a weight'(λ, λ + e_a) ψ(λ + e_a)` with counted `weight'`
    Recursion,
    /// `Σ_X ψ(type X) ≠ 1` over the flags of one level
    Normalization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlagWitness {
    pub failure: FlagFailure,
    pub vertex: LatticeVertex,
    pub expected: ExactScalar,
    pub found: ExactScalar,
}

impl fmt::Display for FlagWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} fails at {}: expected {}, found {}",
            self.failure, self.vertex, self.expected, self.found
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransformError {
    Phi(GibbsWitness),
    Psi(FlagWitness),
    Other(Error),
}

impl From<Error> for TransformError {
    fn from(e: Error) -> Self {
        TransformError::Other(e)
    }
}

impl fmt::Display for TransformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformError::Phi(w) => write!(f, "input φ: {w}"),
            TransformError::Psi(w) => write!(f, "input ψ: {w}"),
            TransformError::Other(e) => e.fmt(f),
        }
    }
}

/// Checks that `ψ` defines a consistent family of invariant measures on flags,
/// using `weight'` counted by projecting enumerated flags.
///
/// Enumeration errors (field or budget) are reported as [`TransformError::Other`].
pub fn invariant_measure_check(
    psi: &TypeFunction,
    census: &mut FlagCensus,
) -> std::result::Result<(), TransformError> {
    let d = psi.d;
    let root = LatticeVertex::zero(d);
    let fail = |failure, vertex: &LatticeVertex, expected: ExactScalar, found: &ExactScalar| {
        TransformError::Psi(FlagWitness {
            failure,
            vertex: vertex.clone(),
            expected,
            found: found.clone(),
        })
    };
    for (lambda, x) in &psi.values {
        if x.is_negative() {
            return Err(fail(FlagFailure::Negative, lambda, ExactScalar::zero(), x));
        }
    }
    if psi.values[&root] != int(1) {
        return Err(fail(FlagFailure::Root, &root, int(1), &psi.values[&root]));
    }
    for n in 0..psi.depth {
        for lambda in level(d, n) {
            let mut rhs = ExactScalar::zero();
            for a in 1..=d {
                let w = census.weight_prime_counted(&lambda, a)?;
                rhs += int(w as i64) * &psi.values[&lambda.step(a)];
            }
            if rhs != psi.values[&lambda] {
                return Err(fail(FlagFailure::Recursion, &lambda, rhs, &psi.values[&lambda]));
            }
        }
    }
    for n in 1..=psi.depth {
        let counts = census.type_counts(n as usize)?;
        let total: ExactScalar = counts
            .iter()
            .map(|(lambda, &c)| int(c as i64) * &psi.values[lambda])
            .sum();
        if total != int(1) {
            return Err(fail(FlagFailure::Normalization, &LatticeVertex::new(vec![n]), int(1), &total));
        }
    }
    Ok(())
}

/// Moves between `φ` (Gibbs-harmonic on the pyramid) and `ψ` (mass per flag).
///
/// The input is verified first: `φ` against the pyramid recursion, `ψ`
/// against the counted flag recursion.
pub fn phi_psi_transform(
    input: &TypeFunction,
    direction: Direction,
    rule: PsiRule,
    census: &mut FlagCensus,
) -> std::result::Result<TypeFunction, TransformError> {
    let q = census.field().q();
    let sign = match direction {
        Direction::ToPsi => {
            let phi = HarmonicFunction::from_values(input.d, input.depth, input.values.clone())?;
            gibbs_check(&phi, &q).map_err(TransformError::Phi)?;
            1
        }
        Direction::ToPhi => {
            invariant_measure_check(input, census)?;
            -1
        }
    };
    Ok(rescale(input, rule, sign, &q))
}

/// The transform without verifying the input.
pub fn rescale(input: &TypeFunction, rule: PsiRule, sign: i64, q: &QParam) -> TypeFunction {
    TypeFunction {
        d: input.d,
        depth: input.depth,
        values: input
            .values
            .iter()
            .map(|(lambda, x)| (lambda.clone(), x * q.pow(sign * rule.exponent(lambda))))
            .collect(),
    }
}

impl From<&HarmonicFunction> for TypeFunction {
    fn from(phi: &HarmonicFunction) -> Self {
        TypeFunction {
            d: phi.dim(),
            depth: phi.depth(),
            values: phi.values().clone(),
        }
    }
}
