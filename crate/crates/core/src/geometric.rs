//! Inverse-transform sampling of (truncated) geometric laws.
//!
//! A draw is one `u64`, read as the fraction `u / 2^64`. Every cumulative mass
//! `C` is turned into the integer threshold `ceil(C · 2^64)`, so in exact mode
//! `u < threshold` is the exact comparison `u / 2^64 < C`. Float mode builds the
//! same tables from the `f64` image of `q`.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::qkernel::{int, q_int, ExactScalar, Mode, Multiplicity, QParam};

/// `2^64`, the resolution of one draw.
pub const SCALE: u128 = 1 << 64;

pub fn draw<R: RngCore + ?Sized>(rng: &mut R) -> u128 {
    rng.next_u64() as u128
}

/// `ceil(p · 2^64)` for `0 ≤ p ≤ 1`.
pub fn exact_threshold(p: &ExactScalar) -> u128 {
    let scaled = p * ExactScalar::from_integer(BigInt::from(SCALE));
    scaled
        .ceil()
        .to_integer()
        .to_u128()
        .expect("probability in [0, 1]")
        .min(SCALE)
}

pub fn float_threshold(p: f64) -> u128 {
    let p = p.clamp(0.0, 1.0);
    ((p * SCALE as f64).ceil() as u128).min(SCALE)
}

/// `ceil(S (1 - q^i) / (1 - q^n))` for `i = 1..=n`, computed over the integers.
///
/// With `q = a/b` this is `ceil(S (b^n - a^i b^{n-i}) / (b^n - a^n))`. Once
/// `a^i b^{n-i} · S ≤ b^n - a^n` the remaining mass is below `2^-64` and every
/// later threshold is `S`.
fn exact_cumulative_thresholds(q: &QParam, n: usize) -> Vec<u128> {
    let (a, b) = (q.exact().numer(), q.exact().denom());
    let bn = b.pow(n as u32);
    let d = &bn - a.pow(n as u32);
    let scale = BigInt::from(SCALE);
    let mut p = bn.clone();
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        p = p / b * a;
        if i == n || &p * &scale <= d {
            out.resize(n, SCALE);
            break;
        }
        let num = (&bn - &p) * &scale;
        let t = (num + &d - 1u32) / &d;
        out.push(t.to_u128().expect("threshold at most 2^64"));
    }
    out
}

/// The law `G_{q,n}(i) = q^{i-1} / [n]_q` on `{1, …, n}`.
#[derive(Debug, Clone)]
pub struct TruncatedGeometric {
    n: usize,
    q: QParam,
    thresholds: Vec<u128>,
}

impl TruncatedGeometric {
    pub fn new(q: &QParam, n: usize) -> Self {
        assert!(n >= 1, "support must be nonempty");
        let thresholds = match q.mode() {
            Mode::Exact => exact_cumulative_thresholds(q, n),
            Mode::Float => {
                let x = q.as_f64();
                let total = 1.0 - x.powi(n as i32);
                (1..=n)
                    .map(|i| {
                        if i == n {
                            SCALE
                        } else {
                            float_threshold((1.0 - x.powi(i as i32)) / total)
                        }
                    })
                    .collect()
            }
        };
        TruncatedGeometric {
            n,
            q: q.clone(),
            thresholds,
        }
    }

    pub fn support_size(&self) -> usize {
        self.n
    }

    pub fn pmf(&self, i: usize) -> ExactScalar {
        if i == 0 || i > self.n {
            return ExactScalar::zero();
        }
        self.q.pow(i as i64 - 1) / q_int(self.n as u64, &self.q)
    }

    /// A value in `1..=n`.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let u = draw(rng);
        self.thresholds.partition_point(|&t| t <= u) + 1
    }
}

/// Lazily extended table of `T(e) = ceil((1 - q^e) · 2^64)`, `e = 0, 1, 2, …`.
///
/// `T` is the scaled mass of `{ξ ≤ e}` for `ξ ~ G_q`, and also the scaled
/// survival complement needed by letterwise transitions.
#[derive(Debug, Clone)]
pub struct PowerThresholds {
    q: QParam,
    // exact q^e as numer/denom powers; q is in lowest terms so these stay coprime
    num_pow: BigInt,
    den_pow: BigInt,
    table: Vec<u128>,
}

impl PowerThresholds {
    pub fn new(q: &QParam) -> Self {
        PowerThresholds {
            q: q.clone(),
            num_pow: BigInt::one(),
            den_pow: BigInt::one(),
            table: vec![0],
        }
    }

    fn saturated(&self) -> bool {
        self.table.last() == Some(&SCALE)
    }

    fn extend(&mut self) {
        let e = self.table.len();
        let t = if self.saturated() {
            SCALE
        } else {
            match self.q.mode() {
                Mode::Exact => {
                    self.num_pow *= self.q.exact().numer();
                    self.den_pow *= self.q.exact().denom();
                    // 2^64 - floor(q^e · 2^64)
                    let floor = (&self.num_pow << 64u32) / &self.den_pow;
                    SCALE - floor.to_u128().expect("q^e < 1")
                }
                Mode::Float => {
                    let tail = self.q.as_f64().powi(e as i32);
                    SCALE - ((tail * SCALE as f64).floor() as u128).min(SCALE)
                }
            }
        };
        self.table.push(t);
    }

    /// `T(e)`, with `T(∞) = 2^64`.
    pub fn threshold(&mut self, e: Multiplicity) -> u128 {
        match e {
            Multiplicity::Infinite => SCALE,
            Multiplicity::Finite(e) => {
                let e = e as usize;
                while self.table.len() <= e {
                    if self.saturated() {
                        return SCALE;
                    }
                    self.extend();
                }
                self.table[e]
            }
        }
    }

    /// Smallest `i ≥ 1` with `u < T(i)`; this is a `G_q` draw when `u` is uniform.
    pub fn geometric_index(&mut self, u: u128) -> u64 {
        while *self.table.last().unwrap() <= u {
            self.extend();
        }
        self.table.partition_point(|&t| t <= u) as u64
    }
}

/// The geometric law `G_q(i) = (1 - q) q^{i-1}` on `N`.
#[derive(Debug, Clone)]
pub struct Geometric {
    powers: PowerThresholds,
}

impl Geometric {
    pub fn new(q: &QParam) -> Self {
        Geometric {
            powers: PowerThresholds::new(q),
        }
    }

    pub fn pmf(q: &QParam, i: u64) -> ExactScalar {
        if i == 0 {
            return ExactScalar::zero();
        }
        (int(1) - q.exact()) * q.pow(i as i64 - 1)
    }

    pub fn sample<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> u64 {
        let u = draw(rng);
        self.powers.geometric_index(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkernel::ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn integer_thresholds_match_rational_ceilings() {
        for (a, b) in [(1, 2), (1, 3), (9, 10), (3, 4)] {
            let q = QParam::from_ratio(a, b).unwrap();
            for n in 1..=40 {
                let total = q_int(n as u64, &q);
                let mut acc = ExactScalar::zero();
                let naive: Vec<u128> = (0..n)
                    .map(|i| {
                        acc += q.pow(i as i64);
                        exact_threshold(&(&acc / &total))
                    })
                    .collect();
                assert_eq!(exact_cumulative_thresholds(&q, n), naive, "q = {a}/{b}, n = {n}");
            }
        }
    }

    #[test]
    fn truncated_pmf_sums_to_one() {
        let q = QParam::from_ratio(1, 2).unwrap();
        for n in 1..=6 {
            let g = TruncatedGeometric::new(&q, n);
            let total: ExactScalar = (1..=n).map(|i| g.pmf(i)).sum();
            assert_eq!(total, int(1));
        }
        let g = TruncatedGeometric::new(&q, 3);
        assert_eq!(g.pmf(3), ratio(1, 7));
    }

    #[test]
    fn thresholds_partition_the_unit_interval() {
        let q = QParam::from_ratio(1, 2).unwrap();
        let g = TruncatedGeometric::new(&q, 2);
        // G_{1/2,2}(1) = 2/3, so the first threshold is ceil(2^65 / 3)
        assert_eq!(g.thresholds[0], (2 * SCALE).div_ceil(3));
        assert_eq!(g.thresholds[1], SCALE);
        let mut p = PowerThresholds::new(&q);
        assert_eq!(p.threshold(Multiplicity::Finite(0)), 0);
        assert_eq!(p.threshold(Multiplicity::Finite(1)), SCALE / 2);
        assert_eq!(p.threshold(Multiplicity::Finite(2)), 3 * SCALE / 4);
        assert_eq!(p.threshold(Multiplicity::Finite(200)), SCALE);
        assert_eq!(p.threshold(Multiplicity::Infinite), SCALE);
    }

    #[test]
    fn boundary_draws_map_to_the_right_cells() {
        let q = QParam::from_ratio(1, 2).unwrap();
        let mut p = PowerThresholds::new(&q);
        assert_eq!(p.geometric_index(0), 1);
        assert_eq!(p.geometric_index(SCALE / 2 - 1), 1);
        assert_eq!(p.geometric_index(SCALE / 2), 2);
        assert_eq!(p.geometric_index(SCALE - 2), 64);
        assert_eq!(p.geometric_index(SCALE - 1), 65);
    }

    #[test]
    fn float_and_exact_tables_agree_closely() {
        let q = QParam::from_ratio(9, 10).unwrap();
        let mut exact = PowerThresholds::new(&q);
        let mut float = PowerThresholds::new(&q.clone().with_mode(Mode::Float));
        for e in 0..50 {
            let a = exact.threshold(Multiplicity::Finite(e)) as f64;
            let b = float.threshold(Multiplicity::Finite(e)) as f64;
            assert!((a - b).abs() / SCALE as f64 <= 1e-12);
        }
    }

    #[test]
    fn geometric_sample_mean() {
        let q = QParam::from_ratio(1, 2).unwrap();
        let mut g = Geometric::new(&q);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50_000;
        let mean = (0..n).map(|_| g.sample(&mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.03, "{mean}");
    }
}
