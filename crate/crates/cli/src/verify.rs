//! `verify`: small exact identity suites, one line per check.

use serde_json::{json, Value};

use qshuffle_core::flags::{self, phi_psi_transform, Direction, FlagCensus, PsiRule, TypeFunction};
use qshuffle_core::mallows::{mallows_distribution, shuffle_distribution, verify_finite_qexchangeable};
use qshuffle_core::pvmeasure::{marginal_by_transitions, marginal_prob, theta_law, words_over};
use qshuffle_core::pyramid::{dim_by_paths, dim_vertex, level, martin_kernel};
use qshuffle_core::qkernel::{gaussian_multinomial, int};
use qshuffle_core::quantize::tilde_nu;
use qshuffle_core::words::orbit_inversion_gf_enumerated;
use qshuffle_core::{FiniteWord, GaloisField, HarmonicFunction, InversionFreeWord, QParam, QuantileSpec};

use crate::Report;

type Check = (&'static str, Result<bool, String>);

fn grid() -> Vec<QParam> {
    [(1, 3), (1, 2), (7, 10)]
        .into_iter()
        .map(|(a, b)| QParam::from_ratio(a, b).expect("inside (0, 1)"))
        .collect()
}

fn word(s: &str) -> FiniteWord {
    s.parse().expect("fixed word")
}

fn macmahon() -> Result<bool, String> {
    for q in grid() {
        for d in 1..=3 {
            for n in 0..=6 {
                for lambda in level(d, n) {
                    let brute = orbit_inversion_gf_enumerated(lambda.coords(), &q).map_err(|e| e.to_string())?;
                    if brute != gaussian_multinomial(lambda.coords(), &q) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

fn mallows() -> Result<bool, String> {
    for q in grid() {
        for n in 0..=6 {
            if mallows_distribution(n, &q).values().sum::<qshuffle_core::ExactScalar>() != int(1) {
                return Ok(false);
            }
        }
        let shuffled = shuffle_distribution(&word("1234"), &q).map_err(|e| e.to_string())?;
        if shuffled != mallows_distribution(4, &q) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn exchangeability() -> Result<bool, String> {
    let q = QParam::from_ratio(1, 2).expect("inside (0, 1)");
    for v in ["1122", "1123", "11222"] {
        let dist = shuffle_distribution(&word(v), &q).map_err(|e| e.to_string())?;
        if verify_finite_qexchangeable(&dist, &q).is_err() {
            return Ok(false);
        }
    }
    // a word with an inversion is not a valid shuffle seed
    let dist = shuffle_distribution(&word("2211"), &q).map_err(|e| e.to_string())?;
    Ok(verify_finite_qexchangeable(&dist, &q).is_err())
}

fn marginals() -> Result<bool, String> {
    for spec in ["1:2,2:inf", "1:1,2:2,3:inf"] {
        let v: InversionFreeWord = spec.parse().map_err(|e: qshuffle_core::Error| e.to_string())?;
        for q in grid() {
            for n in 0..=4 {
                for u in words_over(&[1, 2, 3], n) {
                    if marginal_prob(&v, &u, &q) != marginal_by_transitions(&v, &u, &q) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

fn pyramid() -> Result<bool, String> {
    for q in grid() {
        for d in 1..=3 {
            for n in 0..=5 {
                for lambda in level(d, n) {
                    if dim_by_paths(&lambda, &q) != dim_vertex(&lambda, &q) {
                        return Ok(false);
                    }
                    for m in 0..=n.min(3) {
                        for mu in level(d, m) {
                            martin_kernel(&mu, &lambda, &q).map_err(|e| e.to_string())?;
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

fn theta() -> Result<bool, String> {
    Ok(grid().iter().all(|q| {
        (1..=3).all(|k| theta_law(k, q).values().sum::<qshuffle_core::ExactScalar>() == int(1))
    }))
}

fn flag_counts() -> Result<bool, String> {
    let f = GaloisField::new(2).map_err(|e| e.to_string())?;
    for n in 0..=3 {
        for (lambda, c) in flags::flag_counts(n, 2, &f).map_err(|e| e.to_string())? {
            if int(c as i64) != flags::flag_count_formula(&lambda, &f) {
                return Ok(false);
            }
        }
    }
    let mut census = FlagCensus::new(f.clone(), 2);
    let v: InversionFreeWord = "1:1,2:inf".parse().map_err(|e: qshuffle_core::Error| e.to_string())?;
    let phi = HarmonicFunction::from_pv(&v, 2, 3, &f.q()).map_err(|e| e.to_string())?;
    let phi = TypeFunction::from(&phi);
    Ok(phi_psi_transform(&phi, Direction::ToPsi, PsiRule::Corrected, &mut census).is_ok())
}

fn quantiles() -> Result<bool, String> {
    let spec: QuantileSpec = "0:1/2,1:1/2".parse().map_err(|e: qshuffle_core::Error| e.to_string())?;
    Ok(grid()
        .iter()
        .all(|q| tilde_nu(&spec, q).values().sum::<qshuffle_core::ExactScalar>() == int(1)))
}

pub(crate) fn run() -> Report {
    let checks: Vec<Check> = vec![
        ("macmahon", macmahon()),
        ("mallows", mallows()),
        ("finite_exchangeability", exchangeability()),
        ("marginals", marginals()),
        ("pyramid", pyramid()),
        ("theta", theta()),
        ("flags", flag_counts()),
        ("quantize", quantiles()),
    ];
    let ok = checks.iter().all(|(_, r)| matches!(r, Ok(true)));
    let items: Vec<Value> = checks
        .iter()
        .map(|(name, r)| match r {
            Ok(pass) => json!({ "check": name, "pass": pass }),
            Err(e) => json!({ "check": name, "pass": false, "error": e }),
        })
        .collect();
    Report {
        json: json!({ "command": "verify", "pass": ok, "checks": items }),
        header: vec!["check", "pass"],
        rows: checks
            .iter()
            .map(|(name, r)| vec![name.to_string(), matches!(r, Ok(true)).to_string()])
            .collect(),
        ok,
    }
}
