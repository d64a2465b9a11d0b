//! Command-line front end. [`run_cli`] parses arguments, runs one
//! subcommand and renders its report as JSON or CSV.

use std::collections::BTreeMap;
use std::ffi::OsString;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use qshuffle_core::flags::{
    self, phi_psi_transform, rescale, weight_prime, weight_prime_lifts, Direction, FlagCensus, PsiRule,
    TypeFunction,
};
use qshuffle_core::harness::{q_reversal_guard, sample_counts, try_sample_counts, DistanceReport};
use qshuffle_core::mallows::{mallows_distribution, RankSampler, ShuffleSampler};
use qshuffle_core::pvmeasure::{marginal_by_transitions, marginal_prob, theta_law, theta_pmf, PvSampler};
use qshuffle_core::pyramid::{dim_vertex, kernel_convergence_table};
use qshuffle_core::qkernel::{format_rational, int, parse_rational, to_f64};
use qshuffle_core::quantize::convergence_experiment;
use qshuffle_core::{
    Backend, Error, ExactScalar, FiniteWord, GaloisField, HarmonicFunction, HeightFunction, InversionFreeWord,
    LatticeVertex, Mode, MonomialMatrix, Permutation, QParam, QuantileSpec,
};

mod verify;

const DEFAULT_SAMPLES: u64 = 100_000;

#[derive(Debug, Parser)]
#[command(name = "qshuffle", version, about = "Exact q-shuffle, Mallows and q-Pascal pyramid computations")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// q as `A/B` or a decimal; q > 1 is reduced to 1/q with the alphabet order reversed
    #[arg(long, global = true, default_value = "1/2")]
    q: String,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo sample count (default 100000; quantize samples only when given)
    #[arg(long, global = true)]
    samples: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// exact rational evaluation (default)
    #[arg(long, global = true, conflicts_with = "float")]
    exact: bool,
    /// float evaluation where the computation allows it
    #[arg(long, global = true)]
    float: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MallowsSampler {
    Ranks,
    Shuffle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Positional,
    Letterwise,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Positional => Backend::Positional,
            BackendArg::Letterwise => Backend::Letterwise,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample Mallows permutations and compare with the exact law
    SampleMallows {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = MallowsSampler::Ranks)]
        sampler: MallowsSampler,
    },
    /// Sample prefixes of P^(v)
    SamplePv {
        #[arg(long)]
        v: InversionFreeWord,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = BackendArg::Positional)]
        backend: BackendArg,
    },
    /// Exact P^(v) mass of a finite word
    PvMarginal {
        #[arg(long)]
        v: InversionFreeWord,
        #[arg(long)]
        u: FiniteWord,
    },
    /// Law of the k x k truncation of an infinite Mallows permutation
    ThetaPmf {
        #[arg(long)]
        k: usize,
        /// rows of 0/1 joined by `;`, e.g. `01;00`
        #[arg(long)]
        matrix: Option<MonomialMatrix>,
    },
    /// Number of weighted paths from the root to a pyramid vertex
    PyramidDim {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        lambda: LatticeVertex,
    },
    /// Martin kernel along the approach path of a height function
    Martin {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        mu: LatticeVertex,
        /// e.g. `1,inf`
        #[arg(long)]
        h: HeightFunction,
        /// inclusive range `A..B`
        #[arg(long, default_value = "1..40")]
        levels: String,
    },
    /// Flag counts, projection counts and the harmonic/invariant correspondence over F_qtilde
    FlagsCheck {
        #[arg(long)]
        qtilde: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "1:1,2:inf")]
        from_v: InversionFreeWord,
    },
    /// Distance of quantile-word marginals to a product law along a q grid
    Quantize {
        #[arg(long)]
        pmf: QuantileSpec,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.6,0.9,0.99")]
        q_grid: Vec<String>,
    },
    /// Run the exact identity suites
    Verify,
}

/// Report produced by a subcommand.
struct Report {
    json: Value,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    ok: bool,
}

impl Report {
    fn render(&self, format: Format) -> Result<String, String> {
        match format {
            Format::Json => serde_json::to_string_pretty(&self.json)
                .map(|s| s + "\n")
                .map_err(|e| e.to_string()),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header).map_err(|e| e.to_string())?;
                for row in &self.rows {
                    w.write_record(row).map_err(|e| e.to_string())?;
                }
                String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
            }
        }
    }
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the command line `args` (program name first).
///
/// Exit codes: 0 success, 1 a check reported failure, 2 bad input or an
/// unsupported case.
pub fn run_cli<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let fail = |msg: String| Outcome {
        code: 2,
        stdout: String::new(),
        stderr: format!("error: {msg}\n"),
    };
    let ctx = match Context::new(&cli.global) {
        Ok(ctx) => ctx,
        Err(e) => return fail(e.to_string()),
    };
    let report = match dispatch(&cli.command, &ctx) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    match report.render(cli.global.format) {
        Ok(stdout) => Outcome {
            code: if report.ok { 0 } else { 1 },
            stdout,
            stderr: String::new(),
        },
        Err(e) => fail(e),
    }
}

struct Context {
    q: QParam,
    reversed: bool,
    seed: u64,
    samples: Option<u64>,
    mode: Mode,
}

impl Context {
    fn new(g: &Global) -> Result<Self, Error> {
        let (q, reversed) = q_reversal_guard(&parse_rational(&g.q)?)?;
        let mode = if g.float { Mode::Float } else { Mode::Exact };
        Ok(Context {
            q: QParam::new(q)?.with_mode(mode),
            reversed,
            seed: g.seed,
            samples: g.samples,
            mode,
        })
    }

    /// An exact value as `A/B`, or as a float in float mode.
    fn value(&self, x: &ExactScalar) -> Value {
        match self.mode {
            Mode::Exact => Value::String(format_rational(x)),
            Mode::Float => json!(to_f64(x)),
        }
    }

    fn cell(&self, x: &ExactScalar) -> String {
        match self.mode {
            Mode::Exact => format_rational(x),
            Mode::Float => to_f64(x).to_string(),
        }
    }

    fn header(&self, command: &str) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("command".into(), json!(command));
        m.insert("q".into(), json!(format_rational(self.q.exact())));
        m.insert("order_reversed".into(), json!(self.reversed));
        m
    }
}

fn dispatch(command: &Command, ctx: &Context) -> Result<Report, Error> {
    let uses_q = !matches!(
        command,
        Command::SampleMallows { .. } | Command::FlagsCheck { .. } | Command::Quantize { .. } | Command::Verify
    );
    if ctx.reversed && uses_q {
        return Err(Error::Unsupported(format!(
            "q > 1 reduces to q = {} with the alphabet order reversed; rerun with that q on the reversed input",
            format_rational(ctx.q.exact())
        )));
    }
    match command {
        Command::SampleMallows { n, sampler } => sample_mallows(ctx, *n, *sampler),
        Command::SamplePv { v, n, backend } => sample_pv(ctx, v, *n, (*backend).into()),
        Command::PvMarginal { v, u } => pv_marginal(ctx, v, u),
        Command::ThetaPmf { k, matrix } => theta(ctx, *k, matrix.as_ref()),
        Command::PyramidDim { d, lambda } => pyramid_dim(ctx, *d, lambda),
        Command::Martin { d, mu, h, levels } => martin(ctx, *d, mu, h, levels),
        Command::FlagsCheck { qtilde, n, d, from_v } => flags_check(*qtilde, *n, *d, from_v),
        Command::Quantize { pmf, n, q_grid } => quantize(ctx, pmf, *n, q_grid),
        Command::Verify => Ok(verify::run()),
    }
}

fn sample_mallows(ctx: &Context, n: usize, sampler: MallowsSampler) -> Result<Report, Error> {
    let q = &ctx.q;
    let flip = ctx.reversed;
    // q > 1: reverse the value order, which sends inv to C(n,2) - inv
    let finish = |s: Permutation| {
        let w = s.as_word();
        if flip {
            FiniteWord::new(w.letters().iter().map(|&x| n as u32 + 1 - x).collect())
        } else {
            w
        }
    };
    let samples = ctx.samples.unwrap_or(DEFAULT_SAMPLES);
    let counts = match sampler {
        MallowsSampler::Ranks => {
            let s = RankSampler::new(n, q);
            sample_counts(samples, ctx.seed, || (), |_, rng| finish(s.sample(rng)))
        }
        MallowsSampler::Shuffle => {
            let s = ShuffleSampler::new(n, q);
            sample_counts(samples, ctx.seed, || (), |_, rng| finish(s.sample_permutation(rng)))
        }
    };
    let exact = if n <= qshuffle_core::words::ENUMERATION_BUDGET {
        let mut law = mallows_distribution(n, q);
        if flip {
            law = law
                .into_iter()
                .map(|(w, p)| (FiniteWord::new(w.letters().iter().map(|&x| n as u32 + 1 - x).collect()), p))
                .collect();
        }
        Some(law)
    } else {
        None
    };
    let mut out = ctx.header("sample-mallows");
    out.insert("n".into(), json!(n));
    out.insert("sampler".into(), json!(format!("{sampler:?}").to_lowercase()));
    out.insert("seed".into(), json!(ctx.seed));
    out.insert("samples".into(), json!(samples));
    if let Some(law) = &exact {
        let report = DistanceReport::compare(format!("Q_{n}"), &counts, law);
        out.insert("distance".into(), serde_json::to_value(&report).expect("plain data"));
    }
    let keys: Vec<FiniteWord> = match &exact {
        Some(law) => law.keys().cloned().collect(),
        None => counts.keys().cloned().collect(),
    };
    let mut rows = Vec::new();
    let mut items = Vec::new();
    for w in keys {
        let c = counts.get(&w).copied().unwrap_or(0);
        let p = exact.as_ref().map(|law| &law[&w]);
        items.push(json!({
            "permutation": w.to_string(),
            "count": c,
            "exact": p.map(|p| ctx.value(p)),
        }));
        rows.push(vec![w.to_string(), c.to_string(), p.map(|p| ctx.cell(p)).unwrap_or_default()]);
    }
    out.insert("rows".into(), Value::Array(items));
    Ok(Report {
        json: Value::Object(out),
        header: vec!["permutation", "count", "exact"],
        rows,
        ok: true,
    })
}

fn sample_pv(ctx: &Context, v: &InversionFreeWord, n: usize, backend: Backend) -> Result<Report, Error> {
    let q = &ctx.q;
    let samples = ctx.samples.unwrap_or(DEFAULT_SAMPLES);
    let counts = try_sample_counts(
        samples,
        ctx.seed,
        || PvSampler::new(v, q, backend),
        |s, rng| s.sample(n, rng),
    )?;
    let mut out = ctx.header("sample-pv");
    out.insert("v".into(), json!(v.to_string()));
    out.insert("n".into(), json!(n));
    out.insert("backend".into(), json!(backend));
    out.insert("seed".into(), json!(ctx.seed));
    out.insert("samples".into(), json!(samples));
    let mut rows = Vec::new();
    let mut items = Vec::new();
    for (w, c) in &counts {
        let p = marginal_prob(v, w, q);
        items.push(json!({ "word": w.to_string(), "count": c, "exact": ctx.value(&p) }));
        rows.push(vec![w.to_string(), c.to_string(), ctx.cell(&p)]);
    }
    out.insert("rows".into(), Value::Array(items));
    Ok(Report {
        json: Value::Object(out),
        header: vec!["word", "count", "exact"],
        rows,
        ok: true,
    })
}

fn pv_marginal(ctx: &Context, v: &InversionFreeWord, u: &FiniteWord) -> Result<Report, Error> {
    let p = marginal_prob(v, u, &ctx.q);
    let by_transitions = marginal_by_transitions(v, u, &ctx.q);
    let ok = p == by_transitions;
    let mut out = ctx.header("pv-marginal");
    out.insert("v".into(), json!(v.to_string()));
    out.insert("u".into(), json!(u.to_string()));
    out.insert("prob".into(), ctx.value(&p));
    out.insert("transitions_agree".into(), json!(ok));
    Ok(Report {
        json: Value::Object(out),
        header: vec!["v", "u", "prob"],
        rows: vec![vec![v.to_string(), u.to_string(), ctx.cell(&p)]],
        ok,
    })
}

fn theta(ctx: &Context, k: usize, matrix: Option<&MonomialMatrix>) -> Result<Report, Error> {
    let law: BTreeMap<MonomialMatrix, ExactScalar> = match matrix {
        Some(m) if m.size() != k => {
            return Err(Error::Invalid(format!("matrix `{m}` is not {k} x {k}")));
        }
        Some(m) => [(m.clone(), theta_pmf(m, &ctx.q))].into(),
        None if k > 4 => {
            return Err(Error::Budget { what: "truncation size", limit: 4, got: k });
        }
        None => theta_law(k, &ctx.q),
    };
    let mut out = ctx.header("theta-pmf");
    out.insert("k".into(), json!(k));
    let items: Vec<Value> = law
        .iter()
        .map(|(m, p)| json!({ "matrix": m.to_string(), "prob": ctx.value(p) }))
        .collect();
    if let [single] = &items[..] {
        out.insert("matrix".into(), single["matrix"].clone());
        out.insert("prob".into(), single["prob"].clone());
    } else {
        out.insert("rows".into(), Value::Array(items));
    }
    Ok(Report {
        json: Value::Object(out),
        header: vec!["matrix", "prob"],
        rows: law.iter().map(|(m, p)| vec![m.to_string(), ctx.cell(p)]).collect(),
        ok: true,
    })
}

fn check_dim(d: Option<usize>, v: &LatticeVertex) -> Result<(), Error> {
    match d {
        Some(d) if d != v.dim() => Err(Error::Invalid(format!("{v} does not have {d} coordinates"))),
        _ => Ok(()),
    }
}

fn pyramid_dim(ctx: &Context, d: Option<usize>, lambda: &LatticeVertex) -> Result<Report, Error> {
    check_dim(d, lambda)?;
    let dim = dim_vertex(lambda, &ctx.q);
    let mut out = ctx.header("pyramid-dim");
    out.insert("lambda".into(), json!(lambda.to_string()));
    out.insert("dim".into(), ctx.value(&dim));
    Ok(Report {
        json: Value::Object(out),
        header: vec!["lambda", "dim"],
        rows: vec![vec![lambda.to_string(), ctx.cell(&dim)]],
        ok: true,
    })
}

fn parse_levels(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Parse(format!("levels `{s}` are not of the form A..B"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn martin(
    ctx: &Context,
    d: Option<usize>,
    mu: &LatticeVertex,
    h: &HeightFunction,
    levels: &str,
) -> Result<Report, Error> {
    if let (Some(d), Some(dh)) = (d, h.domain_size()) {
        if d != dh {
            return Err(Error::Invalid(format!("h = {h} is defined on N_{dh}, not N_{d}")));
        }
    }
    let rows = kernel_convergence_table(mu, h, &ctx.q, &parse_levels(levels)?)?;
    let mut out = ctx.header("martin");
    out.insert("mu".into(), json!(mu.to_string()));
    out.insert("h".into(), json!(h.to_string()));
    out.insert("mode".into(), json!(ctx.mode));
    out.insert("rows".into(), serde_json::to_value(&rows).expect("plain data"));
    Ok(Report {
        json: Value::Object(out),
        header: vec!["level", "lambda", "kernel", "limit", "error"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.level.to_string(),
                    r.lambda.clone(),
                    r.kernel.to_string(),
                    r.limit.to_string(),
                    r.error.to_string(),
                ]
            })
            .collect(),
        ok: true,
    })
}

fn flags_check(qtilde: u64, n: usize, d: usize, v: &InversionFreeWord) -> Result<Report, Error> {
    let field = GaloisField::new(qtilde)?;
    let q = field.q();
    let mut census = FlagCensus::new(field.clone(), d);
    let mut rows = Vec::new();

    let mut type_items = Vec::new();
    let mut counts_ok = true;
    for level in 0..=n {
        for (lambda, count) in census.type_counts(level)? {
            let formula = flags::flag_count_formula(&lambda, &field);
            let agree = int(count as i64) == formula;
            counts_ok &= agree;
            type_items.push(json!({
                "lambda": lambda.to_string(),
                "count": count,
                "gaussian_multinomial": format_rational(&formula),
                "agree": agree,
            }));
            rows.push(vec![
                "type_count".into(),
                lambda.to_string(),
                String::new(),
                count.to_string(),
                format_rational(&formula),
                agree.to_string(),
            ]);
        }
    }

    let mut weight_items = Vec::new();
    let (mut stated_ok, mut lifts_ok) = (true, true);
    for level in 0..n as u64 {
        for lambda in qshuffle_core::pyramid::level(d, level) {
            for a in 1..=d {
                let counted = census.weight_prime_counted(&lambda, a)?;
                let stated = weight_prime(&lambda, a, &field);
                let lifts = weight_prime_lifts(&lambda, a, &field);
                stated_ok &= counted == stated;
                lifts_ok &= counted == lifts;
                weight_items.push(json!({
                    "lambda": lambda.to_string(),
                    "a": a,
                    "counted": counted,
                    "stated": stated,
                    "lifts": lifts,
                }));
                rows.push(vec![
                    "weight_prime".into(),
                    lambda.to_string(),
                    a.to_string(),
                    counted.to_string(),
                    stated.to_string(),
                    (counted == stated).to_string(),
                ]);
            }
        }
    }

    let phi: TypeFunction = (&HarmonicFunction::from_pv(v, d, n as u64, &q)?).into();
    let corrected = match phi_psi_transform(&phi, Direction::ToPsi, PsiRule::Corrected, &mut census) {
        Ok(psi) => flags::invariant_measure_check(&psi, &mut census),
        Err(e) => Err(e),
    };
    let stated_psi = rescale(&phi, PsiRule::Stated, 1, &q);
    let stated = flags::invariant_measure_check(&stated_psi, &mut census);
    let outcome = |r: &Result<(), flags::TransformError>| match r {
        Ok(()) => json!({ "pass": true }),
        Err(e) => json!({ "pass": false, "witness": e.to_string() }),
    };
    for (name, r) in [("transform_stated", &stated), ("transform_corrected", &corrected)] {
        rows.push(vec![
            name.into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            r.is_ok().to_string(),
        ]);
    }

    let ok = counts_ok && lifts_ok && corrected.is_ok();
    let report = json!({
        "command": "flags-check",
        "qtilde": qtilde,
        "q": format_rational(q.exact()),
        "n": n,
        "d": d,
        "v": v.to_string(),
        "type_counts": { "pass": counts_ok, "rows": type_items },
        "weight_prime": {
            "stated_matches_count": stated_ok,
            "lifts_match_count": lifts_ok,
            "rows": weight_items,
        },
        "transform_stated": outcome(&stated),
        "transform_corrected": outcome(&corrected),
        "pass": ok,
    });
    Ok(Report {
        json: report,
        header: vec!["check", "lambda", "a", "counted", "expected", "agree"],
        rows,
        ok,
    })
}

fn quantize(ctx: &Context, pmf: &QuantileSpec, n: usize, grid: &[String]) -> Result<Report, Error> {
    let grid = grid
        .iter()
        .map(|s| QParam::new(parse_rational(s)?))
        .collect::<Result<Vec<_>, _>>()?;
    let samples = ctx.samples.unwrap_or(0);
    let report = convergence_experiment(pmf, n, &grid, samples, ctx.seed)?;
    let mut out = Map::new();
    out.insert("command".into(), json!("quantize"));
    out.insert("pmf".into(), json!(pmf.to_string()));
    out.insert("n".into(), json!(n));
    out.insert("monotone".into(), json!(report.monotone));
    let items: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "q": format_rational(&r.q),
                "tv": ctx.value(&r.tv),
                "tv_empirical": r.tv_empirical,
                "sandwich_violations": r.sandwich_violations,
            })
        })
        .collect();
    out.insert("rows".into(), Value::Array(items));
    Ok(Report {
        json: Value::Object(out),
        header: vec!["q", "tv", "tv_float"],
        rows: report
            .rows
            .iter()
            .map(|r| vec![format_rational(&r.q), ctx.cell(&r.tv), r.tv_float.to_string()])
            .collect(),
        ok: true,
    })
}
