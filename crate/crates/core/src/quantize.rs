//! Quantile words of a finitely supported law `ν`, the discrete laws `ν̃_q`,
//! and the approach of `P^(v)` marginals to `ν^⊗n` as `q → 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{empirical_pmf, sample_counts, to_float_pmf, tv_distance_padded};
use crate::pvmeasure::{marginal_distribution, Backend, PvSampler};
use crate::qkernel::{format_rational, int, parse_rational, rpow, to_f64, ExactScalar, Multiplicity, QParam};
use crate::words::{InversionFreeWord, Letter};

/// A probability law on finitely many rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantileSpec {
    /// atoms in increasing order, each of positive mass
    atoms: Vec<(ExactScalar, ExactScalar)>,
}

impl QuantileSpec {
    /// From `(x, ν{x})` pairs; zero masses are dropped, repeated atoms merged.
    pub fn from_pmf(pairs: Vec<(ExactScalar, ExactScalar)>) -> Result<Self> {
        let mut atoms: BTreeMap<ExactScalar, ExactScalar> = BTreeMap::new();
        for (x, p) in pairs {
            if p.is_negative() {
                return Err(Error::Invalid(format!("negative mass {p} at {x}")));
            }
            *atoms.entry(x).or_insert_with(ExactScalar::zero) += p;
        }
        atoms.retain(|_, p| !p.is_zero());
        let total: ExactScalar = atoms.values().sum();
        if total != int(1) {
            return Err(Error::Invalid(format!("masses sum to {total}")));
        }
        Ok(QuantileSpec {
            atoms: atoms.into_iter().collect(),
        })
    }

    /// From the jumps of a step CDF: `(x, F(x))` with `F` increasing to 1.
    pub fn from_cdf(jumps: Vec<(ExactScalar, ExactScalar)>) -> Result<Self> {
        let mut prev_x: Option<ExactScalar> = None;
        let mut prev_f = ExactScalar::zero();
        let mut pairs = Vec::with_capacity(jumps.len());
        for (x, f) in jumps {
            if prev_x.as_ref().is_some_and(|p| *p >= x) || f < prev_f {
                return Err(Error::Invalid("CDF jumps must be listed in increasing order".into()));
            }
            pairs.push((x.clone(), &f - &prev_f));
            prev_x = Some(x);
            prev_f = f;
        }
        Self::from_pmf(pairs)
    }

    pub fn point_mass(c: ExactScalar) -> Self {
        QuantileSpec {
            atoms: vec![(c, int(1))],
        }
    }

    pub fn atoms(&self) -> &[(ExactScalar, ExactScalar)] {
        &self.atoms
    }

    /// `F(x_i)` for each atom.
    fn cumulative(&self) -> Vec<ExactScalar> {
        self.atoms
            .iter()
            .scan(ExactScalar::zero(), |acc, (_, p)| {
                *acc += p;
                Some(acc.clone())
            })
            .collect()
    }

    /// `F⁻¹(p) = inf{x : F(x) ≥ p}` for `0 < p ≤ 1`.
    pub fn quantile(&self, p: &ExactScalar) -> &ExactScalar {
        let i = self.cumulative().iter().position(|c| c >= p).unwrap_or(self.atoms.len() - 1);
        &self.atoms[i].0
    }

    /// `K_i = #{k ≥ 1 : α_k ≤ x_i}`, infinite for the last atom.
    fn run_ends(&self, q: &QParam) -> Vec<Multiplicity> {
        let c = self.cumulative();
        c.iter()
            .map(|ci| {
                let t = int(1) - ci;
                if t.is_zero() {
                    Multiplicity::Infinite
                } else {
                    Multiplicity::Finite(max_power_at_least(q.exact(), &t))
                }
            })
            .collect()
    }
}

impl FromStr for QuantileSpec {
    type Err = Error;

    /// `0:1/2,1:1/2`
    fn from_str(s: &str) -> Result<Self> {
        let pairs = s
            .split(',')
            .map(|item| {
                let (x, p) = item
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("`{item}` is not `value:mass`")))?;
                Ok((parse_rational(x)?, parse_rational(p)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pmf(pairs)
    }
}

impl fmt::Display for QuantileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .atoms
            .iter()
            .map(|(x, p)| format!("{}:{}", x, p))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Largest `k ≥ 0` with `q^k ≥ t`, for `0 < q < 1` and `0 < t ≤ 1`.
fn max_power_at_least(q: &ExactScalar, t: &ExactScalar) -> u64 {
    let estimate = (to_f64(t).ln() / to_f64(q).ln()).floor().max(0.0) as u64;
    let mut k = estimate;
    while k > 0 && rpow(q, k as i64) < *t {
        k -= 1;
    }
    while rpow(q, k as i64 + 1) >= *t {
        k += 1;
    }
    k
}

/// `α_k = F⁻¹(1 - q^k)` for `k = 1..=k_max`.
pub fn quantile_word(spec: &QuantileSpec, q: &QParam, k_max: usize) -> Vec<ExactScalar> {
    let mut power = ExactScalar::one();
    (1..=k_max)
        .map(|_| {
            power *= q.exact();
            spec.quantile(&(int(1) - &power)).clone()
        })
        .collect()
}

/// `ν̃_q = Σ_k G_q(k) δ_{α_k}`, with the geometric runs summed in closed form.
pub fn tilde_nu(spec: &QuantileSpec, q: &QParam) -> BTreeMap<ExactScalar, ExactScalar> {
    let mut prev = ExactScalar::one();
    let mut out = BTreeMap::new();
    for ((x, _), end) in spec.atoms.iter().zip(spec.run_ends(q)) {
        // P(α ≤ x_i) = 1 - q^{K_i}
        let tail = q.pow_mult(end);
        let mass = &prev - &tail;
        if !mass.is_zero() {
            out.insert(x.clone(), mass);
        }
        prev = tail;
    }
    out
}

/// The quantile word with its distinct values renamed `1..s` in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedQuantiles {
    pub word: InversionFreeWord,
    /// `values[a - 1]` is the real value of letter `a`
    pub values: Vec<ExactScalar>,
}

impl EncodedQuantiles {
    pub fn value(&self, a: Letter) -> &ExactScalar {
        &self.values[a as usize - 1]
    }
}

/// Letter encoding of the quantile word: a type-I inversion-free word.
pub fn encode_quantile_word(spec: &QuantileSpec, q: &QParam) -> Result<EncodedQuantiles> {
    let mut runs = Vec::new();
    let mut values = Vec::new();
    let mut prev = 0u64;
    for ((x, _), end) in spec.atoms.iter().zip(spec.run_ends(q)) {
        let len = match end {
            Multiplicity::Finite(k) if k == prev => continue,
            Multiplicity::Finite(k) => {
                let len = Multiplicity::Finite(k - prev);
                prev = k;
                len
            }
            Multiplicity::Infinite => Multiplicity::Infinite,
        };
        values.push(x.clone());
        runs.push((values.len() as Letter, len));
    }
    Ok(EncodedQuantiles {
        word: InversionFreeWord::finite_support(runs)?,
        values,
    })
}

/// Exact law of the first `n` quantile values read off `P^(v)` for the encoded quantile word.
pub fn marginal_values(spec: &QuantileSpec, n: usize, q: &QParam) -> Result<BTreeMap<Vec<ExactScalar>, ExactScalar>> {
    let enc = encode_quantile_word(spec, q)?;
    let mut out = BTreeMap::new();
    for (w, p) in marginal_distribution(&enc.word, n, q, enc.values.len() as Letter) {
        let key = w.letters().iter().map(|&a| enc.value(a).clone()).collect();
        *out.entry(key).or_insert_with(ExactScalar::zero) += p;
    }
    Ok(out)
}

/// `ν^⊗n`.
pub fn product_law(spec: &QuantileSpec, n: usize) -> BTreeMap<Vec<ExactScalar>, ExactScalar> {
    let mut out: BTreeMap<Vec<ExactScalar>, ExactScalar> = [(Vec::new(), int(1))].into();
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|(key, p)| {
                spec.atoms.iter().map(move |(x, m)| {
                    let mut k = key.clone();
                    k.push(x.clone());
                    (k, &p * m)
                })
            })
            .collect();
    }
    out
}

fn exact_tv<K: Ord>(p: &BTreeMap<K, ExactScalar>, r: &BTreeMap<K, ExactScalar>) -> ExactScalar {
    let zero = ExactScalar::zero();
    let mut sum = ExactScalar::zero();
    for (k, a) in p {
        sum += (a - r.get(k).unwrap_or(&zero)).abs();
    }
    for (k, b) in r {
        if !p.contains_key(k) {
            sum += b;
        }
    }
    sum / int(2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizeRow {
    #[serde(serialize_with = "crate::qkernel::serialize_rational")]
    pub q: ExactScalar,
    /// exact TV distance between the `n`-letter marginal and `ν^⊗n`
    #[serde(serialize_with = "crate::qkernel::serialize_rational")]
    pub tv: ExactScalar,
    pub tv_float: f64,
    /// TV distance of the empirical positional-sampler law to `ν^⊗n`
    pub tv_empirical: Option<f64>,
    /// sample paths violating `ξ_j ≤ w_j < ξ_j + j`
    pub sandwich_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizeReport {
    pub n: usize,
    pub rows: Vec<QuantizeRow>,
    /// exact TV is non-increasing along the grid
    pub monotone: bool,
}

/// Exact marginal distances along `grid`, plus `samples` positional sample
/// paths per grid point when `samples > 0`.
pub fn convergence_experiment(
    spec: &QuantileSpec,
    n: usize,
    grid: &[QParam],
    samples: u64,
    seed: u64,
) -> Result<QuantizeReport> {
    if n > 4 {
        return Err(Error::Budget {
            what: "marginal length",
            limit: 4,
            got: n,
        });
    }
    let target = product_law(spec, n);
    let mut rows = Vec::with_capacity(grid.len());
    for q in grid {
        let tv = exact_tv(&marginal_values(spec, n, q)?, &target);
        let (tv_empirical, sandwich_violations) = if samples > 0 {
            let (counts, violations) = sample_values(spec, n, q, samples, seed)?;
            (Some(tv_distance_padded(&empirical_pmf(&counts), &to_float_pmf(&target))), violations)
        } else {
            (None, 0)
        };
        rows.push(QuantizeRow {
            q: q.exact().clone(),
            tv_float: to_f64(&tv),
            tv,
            tv_empirical,
            sandwich_violations,
        });
    }
    let monotone = rows.windows(2).all(|p| p[1].tv <= p[0].tv);
    Ok(QuantizeReport { n, rows, monotone })
}

type ValueCounts = BTreeMap<Vec<ExactScalar>, u64>;

/// Positional samples mapped to values, with the number of paths breaking the sandwich bound.
fn sample_values(spec: &QuantileSpec, n: usize, q: &QParam, samples: u64, seed: u64) -> Result<(ValueCounts, u64)> {
    let enc = encode_quantile_word(spec, q)?;
    let tallies = sample_counts(
        samples,
        seed,
        || PvSampler::new(&enc.word, q, Backend::Positional),
        |s, rng| {
            let t = s.sample_traced(n, rng);
            let ok = sandwich_holds(&t.xis, &t.positions);
            let key: Vec<ExactScalar> = t.word.letters().iter().map(|&a| enc.value(a).clone()).collect();
            (key, ok)
        },
    );
    let mut counts = BTreeMap::new();
    let mut violations = 0;
    for ((key, ok), c) in tallies {
        if !ok {
            violations += c;
        }
        *counts.entry(key).or_insert(0) += c;
    }
    Ok((counts, violations))
}

/// `ξ_j ≤ w_j < ξ_j + j` for every step `j` (1-based).
pub fn sandwich_holds(xis: &[u64], positions: &[u64]) -> bool {
    xis.iter()
        .zip(positions)
        .enumerate()
        .all(|(j, (&xi, &w))| xi <= w && w < xi + j as u64 + 1)
}

impl fmt::Display for QuantizeRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q={} tv={:.6}", format_rational(&self.q), self.tv_float)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkernel::ratio;

    fn q(num: i64, den: i64) -> QParam {
        QParam::from_ratio(num, den).unwrap()
    }

    fn coin() -> QuantileSpec {
        "0:1/2,1:1/2".parse().unwrap()
    }

    #[test]
    fn parsing_and_validation() {
        assert_eq!(coin().atoms().len(), 2);
        assert!("0:1/2,1:1/3".parse::<QuantileSpec>().is_err());
        assert!("0:-1/2,1:3/2".parse::<QuantileSpec>().is_err());
        let cdf = QuantileSpec::from_cdf(vec![(int(0), ratio(1, 2)), (int(1), int(1))]).unwrap();
        assert_eq!(cdf, coin());
        assert!(QuantileSpec::from_cdf(vec![(int(1), ratio(1, 2)), (int(0), int(1))]).is_err());
    }

    #[test]
    fn quantile_examples() {
        let c = QuantileSpec::point_mass(ratio(7, 3));
        assert!(quantile_word(&c, &q(1, 2), 5).iter().all(|x| *x == ratio(7, 3)));
        let w = quantile_word(&coin(), &q(3, 5), 4);
        assert_eq!(w, vec![int(0), int(1), int(1), int(1)]);
        let w = quantile_word(&coin(), &q(9, 10), 8);
        assert_eq!(w.iter().filter(|x| x.is_zero()).count(), 6);
        assert_eq!(w[6], int(1));
    }

    #[test]
    fn tilde_nu_examples() {
        let t = tilde_nu(&coin(), &q(3, 5));
        assert_eq!(t[&int(0)], ratio(2, 5));
        assert_eq!(t[&int(1)], ratio(3, 5));
        let point = tilde_nu(&QuantileSpec::point_mass(int(4)), &q(1, 3));
        assert_eq!(point, [(int(4), int(1))].into());
        // 68 is the largest k with 0.99^k ≥ 1/2
        let h = q(99, 100);
        let t = tilde_nu(&coin(), &h);
        assert_eq!(t[&int(0)], int(1) - rpow(h.exact(), 68));
        assert!((to_f64(&t[&int(0)]) - 0.495114).abs() < 1e-6);
    }

    #[test]
    fn tilde_nu_agrees_with_the_quantile_word() {
        // oracle: sum G_q(k) over a long quantile word, tail lumped on the last atom
        let spec: QuantileSpec = "-1:1/5,0:1/10,2:3/10,5:2/5".parse().unwrap();
        let h = q(4, 5);
        let k_max = 200;
        let word = quantile_word(&spec, &h, k_max);
        let mut oracle: BTreeMap<ExactScalar, ExactScalar> = BTreeMap::new();
        for (k, x) in word.iter().enumerate() {
            let g = (int(1) - h.exact()) * rpow(h.exact(), k as i64);
            *oracle.entry(x.clone()).or_insert_with(ExactScalar::zero) += g;
        }
        *oracle.get_mut(&int(5)).unwrap() += rpow(h.exact(), k_max as i64);
        assert_eq!(tilde_nu(&spec, &h), oracle);
    }

    #[test]
    fn skipped_atoms_get_no_letter() {
        // at q = 1/10 the first quantile already passes the small middle atom
        let spec: QuantileSpec = "0:1/100,1:1/100,2:98/100".parse().unwrap();
        let enc = encode_quantile_word(&spec, &q(1, 10)).unwrap();
        assert_eq!(enc.values, vec![int(2)]);
        assert_eq!(enc.word.to_string(), "1:inf");
        let enc = encode_quantile_word(&coin(), &q(9, 10)).unwrap();
        assert_eq!(enc.word.to_string(), "1:6,2:inf");
    }

    #[test]
    fn one_letter_marginal_is_tilde_nu() {
        let h = q(3, 5);
        let m = marginal_values(&coin(), 1, &h).unwrap();
        let t = tilde_nu(&coin(), &h);
        for (x, p) in t {
            assert_eq!(m[&vec![x]], p);
        }
    }

    #[test]
    fn point_mass_has_zero_distance() {
        let spec = QuantileSpec::point_mass(int(1));
        let report = convergence_experiment(&spec, 2, &[q(1, 2), q(9, 10)], 0, 0).unwrap();
        assert!(report.rows.iter().all(|r| r.tv.is_zero()));
    }

    #[test]
    fn coin_distance_shrinks() {
        let grid = [q(3, 5), q(9, 10), q(99, 100)];
        let report = convergence_experiment(&coin(), 1, &grid, 0, 0).unwrap();
        assert!(report.rows.windows(2).all(|p| p[1].tv < p[0].tv), "{:?}", report.rows);
        // n = 1: |P(ξ ≤ k0) - 1/2|
        let expect = (int(1) - rpow(&ratio(99, 100), 68) - ratio(1, 2)).abs();
        assert_eq!(report.rows[2].tv, expect);
    }

    #[test]
    fn sampled_paths_respect_the_sandwich() {
        let report = convergence_experiment(&coin(), 3, &[q(1, 2), q(9, 10)], 2000, 5).unwrap();
        for row in &report.rows {
            assert_eq!(row.sandwich_violations, 0);
            assert!(row.tv_empirical.unwrap() < row.tv_float + 0.05);
        }
        assert!(!sandwich_holds(&[2, 1], &[2, 3]));
        assert!(convergence_experiment(&coin(), 5, &[q(1, 2)], 0, 0).is_err());
    }
}
