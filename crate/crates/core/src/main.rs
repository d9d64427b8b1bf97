use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use minimax_fdiv::constructions::{
    build_cov_family, cap_distance, cap_geometry, claim_ratio, covmat_bound_assembly, default_delta_a, gaussian_kl,
    hamming, kl_frobenius_check, spectral_separation, sphere_packing_points, support_packing_bound, vg_code,
    CovmatConstants,
};
use minimax_fdiv::dist::{product_distribution, DiscreteDistribution, Ensemble, DEFAULT_PRODUCT_CAP};
use minimax_fdiv::entropy::{
    analytic_divergence, builtin_profile, custom_profile, lattice_separated_count, support_schedule, theorem3_optimize,
    theorem3_point, AnalyticModel, EntropyProfile, LossSpec, ProfileParams, ProfileTable, StarKind,
    DEFAULT_GRID_POINTS,
};
use minimax_fdiv::fdiv::{eval_divergence, g_derivative, g_function, Generator};
use minimax_fdiv::jf::{
    covering_specialization, covering_upper_bound, jf_best, jf_closed_form, jf_numeric, max_min_error, simple_chain,
    CoverKind, CoveringFamily, DEFAULT_JF_TOL,
};
use minimax_fdiv::mixture::{
    explicit_bound, invert_implicit_bound, named_bound, named_bound_from_ensemble, theorem1_check, theorem1_rhs,
    two_point_search, two_point_sharpness, NamedFamily, FAMILY_NAMES,
};
use minimax_fdiv::report::{float, BoundReport};
use minimax_fdiv::testing_risk::{
    bayes_risk_exact, error_probability, map_test, member_errors, minimax_risk, TestAssignment, DEFAULT_MINIMAX_TOL,
};
use minimax_fdiv::verify;
use minimax_fdiv::Error;

/// Which library operations each subcommand exposes.
const DISPATCH: &[(&str, &[&str])] = &[
    ("divergence", &["validate", "product_distribution", "eval_divergence"]),
    (
        "bayes-risk",
        &["bayes_risk_exact", "map_test", "error_probability", "member_errors"],
    ),
    ("minimax-risk", &["minimax_risk"]),
    (
        "bound",
        &[
            "g_function",
            "g_derivative",
            "theorem1_rhs",
            "theorem1_check",
            "invert_implicit_bound",
            "explicit_bound",
            "named_bound",
            "named_bound_from_ensemble",
            "two_point_sharpness",
            "two_point_search",
        ],
    ),
    ("jf", &["jf_closed_form", "jf_numeric", "jf_best", "simple_chain"]),
    (
        "jf-cover",
        &["max_min_error", "covering_upper_bound", "covering_specialization"],
    ),
    (
        "entropy-bound",
        &[
            "builtin_profile",
            "custom_profile",
            "theorem3_point",
            "theorem3_optimize",
            "analytic_divergence",
            "support_schedule",
            "lattice_separated_count",
        ],
    ),
    (
        "covmat-bound",
        &[
            "build_cov_family",
            "spectral_separation",
            "gaussian_kl",
            "kl_frobenius_check",
            "covmat_bound_assembly",
        ],
    ),
    ("vg", &["vg_code", "hamming"]),
    (
        "cap-packing",
        &[
            "cap_geometry",
            "cap_distance",
            "claim_ratio",
            "sphere_packing_points",
            "support_packing_bound",
        ],
    ),
    ("verify", &["verify_suites"]),
];

#[derive(Parser, Debug)]
#[command(
    name = "minimax-fdiv",
    version,
    about = "f-divergence minimax lower bounds on finite spaces"
)]
struct Cli {
    /// Seed for every randomized routine.
    #[arg(long, global = true, env = "MINIMAX_FDIV_SEED", default_value_t = 0)]
    seed: u64,

    /// Output format; csv is available for grid sweeps only.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum JfMethodArg {
    Best,
    Closed,
    Numeric,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// D_f(P‖Q) for two distribution files.
    Divergence {
        #[arg(long = "gen")]
        generator: String,
        p: PathBuf,
        q: PathBuf,
        /// Compare the n-fold products instead.
        #[arg(long)]
        product: Option<usize>,
    },
    /// Exact Bayes testing risk and the MAP test.
    BayesRisk {
        ensemble: PathBuf,
        /// Replace the ensemble's prior.
        #[arg(long, value_delimiter = ',')]
        prior: Option<Vec<f64>>,
        /// Also evaluate this deterministic test (one hypothesis index per point).
        #[arg(long, value_delimiter = ',')]
        test: Option<Vec<usize>>,
    },
    /// Minimax testing risk with a least-favourable prior.
    MinimaxRisk {
        ensemble: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MINIMAX_TOL)]
        tol: f64,
    },
    /// Lower bounds on the Bayes risk.
    ///
    /// Families: fano, chi2, hellinger, tv, power_l, reverse_kl_tv (with
    /// --stats or --from-ensemble); implicit (N, sum), explicit (N, sum, a),
    /// theorem1 (--from-ensemble and --q, or W and rbar), two_point (V) and
    /// g (N, a), which take --gen.
    Bound {
        #[arg(long)]
        family: String,
        /// Comma-separated key=value statistics, e.g. N=16,avgKL=1.
        #[arg(long)]
        stats: Option<String>,
        #[arg(long)]
        from_ensemble: Option<PathBuf>,
        #[arg(long = "gen")]
        generator: Option<String>,
        #[arg(long)]
        l: Option<f64>,
        /// Reference distribution for theorem1.
        #[arg(long)]
        q: Option<PathBuf>,
    },
    /// J_f = inf_Q (1/N) Σ D_f(P_θ‖Q).
    Jf {
        #[arg(long = "gen")]
        generator: String,
        ensemble: PathBuf,
        #[arg(long, value_enum, default_value_t = JfMethodArg::Best)]
        method: JfMethodArg,
        #[arg(long, default_value_t = DEFAULT_JF_TOL)]
        tol: f64,
    },
    /// Covering upper bounds on J_f.
    JfCover {
        /// kl, chi2, hellinger_sq or power:l.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        candidates: PathBuf,
        ensemble: PathBuf,
    },
    /// Global-entropy minimax lower bounds.
    EntropyBound(Box<EntropyArgs>),
    /// Covariance-matrix lower bound and its lemma checks.
    CovmatBound {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long = "delta-a")]
        delta_a: Option<f64>,
        #[arg(long)]
        delta_report: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        /// 0/1 word; with --tau-prime checks spectral separation, with --m the
        /// Frobenius step.
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        tau_prime: Option<String>,
        /// JSON matrices for a direct Gaussian KL.
        #[arg(long)]
        sigma0: Option<PathBuf>,
        #[arg(long)]
        sigma1: Option<PathBuf>,
    },
    /// Greedy Varshamov–Gilbert code.
    Vg {
        #[arg(long)]
        k: usize,
    },
    /// Cap geometry, cap distances and the convex-body packing.
    CapPacking {
        #[arg(long)]
        d: u32,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
    },
    /// Seeded invariant suites; exits 1 on any violation.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(clap::Args, Debug)]
struct EntropyArgs {
    /// kl, chi2, power:l or power_l (with --l).
    #[arg(long)]
    kind: String,
    #[arg(long)]
    l: Option<f64>,
    /// Built-in profile name.
    #[arg(long)]
    model: Option<String>,
    /// Tabulated profile JSON.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    c3: Option<f64>,
    #[arg(long)]
    c_prime: Option<f64>,
    #[arg(long)]
    c_dprime: Option<f64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    /// Loss exponent p in ℓ(x) = x^p (default 1 for support_function, else 2).
    #[arg(long)]
    loss_power: Option<f64>,
    /// Grid for η: `lo:hi:count` (log-spaced) or a comma list.
    #[arg(long)]
    eta_grid: Option<String>,
    #[arg(long)]
    eps_grid: Option<String>,
    /// Evaluate a single point instead of optimizing.
    #[arg(long, requires = "eps")]
    eta: Option<f64>,
    #[arg(long, requires = "eta")]
    eps: Option<f64>,
    /// Closed-form divergences for gaussian_location, uniform_scale or uniform_shift.
    #[arg(long)]
    analytic: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    theta_prime: Option<f64>,
    /// σ for gaussian_location or the candidate widening for uniform_shift.
    #[arg(long)]
    extra: Option<f64>,
    /// Print the support-function (η(n), ε(n)) schedule.
    #[arg(long)]
    schedule: bool,
    /// Count a greedy separated subset of a planar lattice in the disc of radius --gamma.
    #[arg(long, requires = "lattice_spacing")]
    lattice_radius: Option<f64>,
    #[arg(long)]
    lattice_spacing: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Compute(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownName(_) | Error::MissingParameter(_) | Error::Parse(_) => Self::Usage(e.to_string()),
            other => Self::Compute(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Compute(Error::Parse(format!("{}: {e}", path.display()))))
}

/// Accepts `{"pmf": [...]}` or a bare array.
fn read_distribution(path: &Path) -> CliResult<DiscreteDistribution> {
    let v: Value = read_json(path)?;
    let pmf = match v.get("pmf").unwrap_or(&v) {
        Value::Array(xs) => xs
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| Error::Parse(format!("{}: non-numeric mass", path.display())))
            })
            .collect::<Result<Vec<f64>, Error>>()?,
        _ => return Err(Error::Parse(format!("{}: expected a pmf array", path.display())).into()),
    };
    Ok(DiscreteDistribution::new(pmf)?)
}

fn parse_stats(s: &str) -> CliResult<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((k, v)) = part.split_once('=') else {
            return usage(format!("expected key=value in --stats, got `{part}`"));
        };
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad number in --stats: `{part}`")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn stat(stats: &BTreeMap<String, f64>, key: &str) -> CliResult<f64> {
    stats
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(key))
        .map(|(_, v)| *v)
        .ok_or_else(|| CliError::Usage(format!("--stats needs `{key}`")))
}

fn stat_n(stats: &BTreeMap<String, f64>) -> CliResult<usize> {
    let n = stat(stats, "N")?;
    if n.fract() != 0.0 || n < 2.0 {
        return usage("N must be an integer >= 2");
    }
    Ok(n as usize)
}

fn parse_word(s: &str) -> CliResult<Vec<u8>> {
    s.chars()
        .filter(|c| *c != ',' && !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => usage(format!("bad bit `{c}` in word `{s}`")),
        })
        .collect()
}

fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("bad grid `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(bad());
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        let (a, b) = (lo.ln(), hi.ln());
        return Ok((0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect());
    }
    spec.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn gen_arg(name: Option<&str>) -> CliResult<Generator> {
    match name {
        Some(n) => Ok(n.parse()?),
        None => usage("this family needs --gen"),
    }
}

enum Output {
    Json(Value),
    Csv(Vec<String>, Vec<Vec<String>>),
}

fn to_json(v: impl Serialize) -> Output {
    Output::Json(serde_json::to_value(v).unwrap_or(Value::Null))
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        float(x).as_str().unwrap_or("nan").to_string()
    }
}

fn run(cli: &Cli) -> CliResult<(Output, bool)> {
    let csv_ok = matches!(cli.command, Command::EntropyBound(_) | Command::CapPacking { .. });
    if cli.format == Format::Csv && !csv_ok {
        return usage("csv output is available for entropy-bound and cap-packing only");
    }
    let out = match &cli.command {
        Command::Divergence {
            generator,
            p,
            q,
            product,
        } => {
            let gen: Generator = generator.parse()?;
            let (mut p, mut q) = (read_distribution(p)?, read_distribution(q)?);
            if let Some(n) = *product {
                p = product_distribution(&p, n, DEFAULT_PRODUCT_CAP)?;
                q = product_distribution(&q, n, DEFAULT_PRODUCT_CAP)?;
            }
            let mut v = json!({
                "generator": gen.name(),
                "value": float(eval_divergence(&gen, &p, &q)?),
            });
            if let Some(n) = product {
                v["product"] = json!(n);
            }
            Output::Json(v)
        }
        Command::BayesRisk { ensemble, prior, test } => {
            let mut ens: Ensemble = read_json(ensemble)?;
            if let Some(w) = prior {
                ens = ens.with_prior(w.clone())?;
            }
            let r = bayes_risk_exact(&ens);
            let map = map_test(&ens);
            let mut report = BoundReport::new("bayes_risk", r, 1.0)
                .input("members", ens.len())
                .input("support_size", ens.support_size())
                .input("prior", ens.prior())
                .intermediate("map_test", &map.choice)
                .intermediate("map_member_errors", member_errors(&ens, &map)?);
            if let Some(choice) = test {
                let t = TestAssignment::new(choice.clone(), ens.len())?;
                report = report
                    .intermediate("test", &t.choice)
                    .intermediate("test_error", error_probability(&ens, &t)?)
                    .intermediate("test_member_errors", member_errors(&ens, &t)?);
            }
            to_json(report)
        }
        Command::MinimaxRisk { ensemble, tol } => {
            let ens: Ensemble = read_json(ensemble)?;
            let m = minimax_risk(&ens, *tol)?;
            to_json(
                BoundReport::new("minimax_risk", m.value, 1.0)
                    .input("members", ens.len())
                    .input("tol", tol)
                    .intermediate("randomized_upper", m.randomized_upper)
                    .intermediate("gap", m.gap)
                    .intermediate("map_worst_case", m.map_worst_case)
                    .with_witness(json!({ "prior": m.prior, "map_test": m.map_test.choice })),
            )
        }
        Command::Bound {
            family,
            stats,
            from_ensemble,
            generator,
            l,
            q,
        } => bound(
            family,
            stats.as_deref(),
            from_ensemble.as_deref(),
            generator.as_deref(),
            *l,
            q.as_deref(),
        )?,
        Command::Jf {
            generator,
            ensemble,
            method,
            tol,
        } => {
            let gen: Generator = generator.parse()?;
            let ens: Ensemble = read_json(ensemble)?;
            let r = match method {
                JfMethodArg::Best => jf_best(&gen, &ens)?,
                JfMethodArg::Closed => jf_closed_form(&gen, &ens)?,
                JfMethodArg::Numeric => jf_numeric(&gen, &ens, *tol)?,
            };
            let chain = simple_chain(&gen, &ens)?;
            Output::Json(json!({
                "generator": gen.name(),
                "value": float(r.value),
                "method": r.method.as_str(),
                "gap": r.gap,
                "minimizer": r.minimizer.pmf(),
                "chain": {
                    "to_mixture": float(chain.to_mixture),
                    "pairwise_average": float(chain.pairwise_average),
                    "pairwise_max": float(chain.pairwise_max),
                },
            }))
        }
        Command::JfCover {
            kind,
            candidates,
            ensemble,
        } => {
            let kind = CoverKind::parse(kind)?;
            let gen = kind.generator();
            let fam: CoveringFamily = read_json(candidates)?;
            let ens: Ensemble = read_json(ensemble)?;
            let (err, argmin) = max_min_error(&gen, &ens, &fam)?;
            let b = covering_upper_bound(&gen, &ens, &fam)?;
            let spec = covering_specialization(kind, fam.len(), err)?;
            let exact = jf_best(&gen, &ens)?;
            Output::Json(json!({
                "kind": gen.name(),
                "candidates": fam.len(),
                "max_min_error": float(err),
                "closest": argmin,
                "covering_bound": float(b.value),
                "assignment": b.assignment,
                "errors": b.errors.iter().map(|&e| float(e)).collect::<Vec<_>>(),
                "specialization": float(spec),
                "jf": float(exact.value),
            }))
        }
        Command::EntropyBound(args) => entropy(args, cli.format)?,
        Command::CovmatBound {
            n,
            p,
            alpha,
            delta_a,
            delta_report,
            m,
            tau,
            tau_prime,
            sigma0,
            sigma1,
        } => {
            if let (Some(s0), Some(s1)) = (sigma0, sigma1) {
                let a: Vec<Vec<f64>> = read_json(s0)?;
                let b: Vec<Vec<f64>> = read_json(s1)?;
                let to_matrix = |rows: &[Vec<f64>]| -> CliResult<nalgebra::DMatrix<f64>> {
                    let p = rows.len();
                    if p == 0 || rows.iter().any(|r| r.len() != p) {
                        return usage("matrices must be square and nonempty");
                    }
                    Ok(nalgebra::DMatrix::from_fn(p, p, |i, j| rows[i][j]))
                };
                let kl = gaussian_kl(&to_matrix(&a)?, &to_matrix(&b)?, n.unwrap_or(1) as f64)?;
                Output::Json(json!({ "gaussian_kl": kl, "n": n.unwrap_or(1) }))
            } else if let Some(tau) = tau {
                let tau = parse_word(tau)?;
                let k = tau.len();
                let p = p.unwrap_or(2 * k);
                let da = match delta_a {
                    Some(d) => *d,
                    None => default_delta_a(*alpha)?,
                };
                let fam = build_cov_family(p, k, *alpha, da)?;
                if let Some(tp) = tau_prime {
                    let s = spectral_separation(&fam, &tau, &parse_word(tp)?)?;
                    Output::Json(json!({
                        "p": p, "k": k, "alpha": alpha, "delta_A": da,
                        "S_k": fam.harmonic_tail(),
                        "achieved": s.achieved, "guaranteed": s.guaranteed, "hamming": s.hamming,
                        "holds": s.achieved >= s.guaranteed - 1e-10,
                    }))
                } else if let Some(m) = m {
                    let c = kl_frobenius_check(&fam, &tau, *m)?;
                    Output::Json(json!({
                        "p": p, "k": k, "m": m, "alpha": alpha, "delta_A": da,
                        "tau_prime": c.tau_prime,
                        "exact_kl": c.exact_kl,
                        "frobenius_sq": c.frobenius_sq,
                        "tail_bound": c.tail_bound,
                        "c_spec": c.c_spec,
                        "holds": c.frobenius_sq <= c.tail_bound + 1e-12,
                    }))
                } else {
                    return usage("--tau needs --tau-prime or --m");
                }
            } else {
                let (Some(n), Some(p)) = (n, p) else {
                    return usage("covmat-bound needs --n and --p");
                };
                let constants = CovmatConstants {
                    delta_a: *delta_a,
                    delta_report: *delta_report,
                    m: *m,
                    seed: cli.seed,
                };
                to_json(covmat_bound_assembly(*n, *p, *alpha, &constants)?)
            }
        }
        Command::Vg { k } => {
            let code = vg_code(*k, cli.seed)?;
            let mut min_d = *k;
            for i in 0..code.len() {
                for j in i + 1..code.len() {
                    min_d = min_d.min(hamming(&code.words[i], &code.words[j]));
                }
            }
            let words: Vec<String> = code
                .words
                .iter()
                .map(|w| w.iter().map(|b| char::from(b'0' + b)).collect())
                .collect();
            Output::Json(json!({
                "k": k,
                "seed": cli.seed,
                "size": code.len(),
                "target": (*k as f64 / 8.0).exp().ceil(),
                "min_distance": min_d,
                "required_distance": *k as f64 / 4.0,
                "words": words,
            }))
        }
        Command::CapPacking { d, p, eps } => caps(*d, *p, eps, cli.seed, cli.format)?,
        Command::Verify { suite } => {
            let reports = verify::run(suite, cli.seed)?;
            let passed = reports.iter().all(|r| r.passed);
            return Ok((
                Output::Json(json!({ "seed": cli.seed, "passed": passed, "suites": reports })),
                passed,
            ));
        }
    };
    Ok((out, true))
}

fn bound(
    family: &str,
    stats: Option<&str>,
    from_ensemble: Option<&Path>,
    generator: Option<&str>,
    l: Option<f64>,
    q: Option<&Path>,
) -> CliResult<Output> {
    let stats = match stats {
        Some(s) => Some(parse_stats(s)?),
        None => None,
    };
    let need_stats = || {
        stats
            .clone()
            .ok_or_else(|| CliError::Usage(format!("--family {family} needs --stats")))
    };
    match family {
        f if FAMILY_NAMES.contains(&f) => match (&stats, from_ensemble) {
            (Some(s), None) => {
                let mut s = s.clone();
                if let Some(l) = l {
                    s.insert("l".into(), l);
                }
                Ok(to_json(named_bound(&NamedFamily::from_stats(f, &s)?)?))
            }
            (None, Some(path)) => {
                let ens: Ensemble = read_json(path)?;
                Ok(to_json(named_bound_from_ensemble(f, &ens, l)?))
            }
            _ => usage("give exactly one of --stats and --from-ensemble"),
        },
        "implicit" => {
            let gen = gen_arg(generator)?;
            let s = need_stats()?;
            let n = stat_n(&s)?;
            let sum = stat(&s, "sum")?;
            let inv = invert_implicit_bound(&gen, n, sum)?;
            Ok(to_json(
                BoundReport::new("implicit", inv.value, 1.0)
                    .input("generator", gen.name())
                    .input("N", n)
                    .input("sum", float(sum))
                    .intermediate("bracket", [inv.bracket.0, inv.bracket.1])
                    .intermediate("g_lo", float(inv.g_lo))
                    .intermediate("g_hi", float(inv.g_hi)),
            ))
        }
        "explicit" => {
            let gen = gen_arg(generator)?;
            let s = need_stats()?;
            let n = stat_n(&s)?;
            let (sum, a) = (stat(&s, "sum")?, stat(&s, "a")?);
            let v = explicit_bound(&gen, n, sum, a)?;
            Ok(to_json(
                BoundReport::new("explicit", v, 1.0)
                    .input("generator", gen.name())
                    .input("N", n)
                    .input("sum", float(sum))
                    .input("a", a),
            ))
        }
        "g" => {
            let gen = gen_arg(generator)?;
            let s = need_stats()?;
            let n = stat_n(&s)?;
            let a = stat(&s, "a")?;
            let g = g_function(&gen, n, a)?;
            let slope = if gen.has_derivative() {
                float(g_derivative(&gen, n, a)?)
            } else {
                Value::Null
            };
            Ok(Output::Json(json!({
                "generator": gen.name(), "N": n, "a": a, "g": float(g), "g_prime": slope,
            })))
        }
        "theorem1" => {
            let gen = gen_arg(generator)?;
            match (from_ensemble, q) {
                (Some(path), Some(q)) => {
                    let ens: Ensemble = read_json(path)?;
                    let q = read_distribution(q)?;
                    let c = theorem1_check(&gen, &ens, &q)?;
                    Ok(Output::Json(json!({
                        "generator": gen.name(),
                        "divergence_sum": float(c.divergence_sum),
                        "rhs": float(c.rhs),
                        "w_t": c.w_t,
                        "rbar": c.rbar,
                        "slack": float(c.slack()),
                    })))
                }
                (None, None) => {
                    let s = need_stats()?;
                    let (w, r) = (stat(&s, "W")?, stat(&s, "rbar")?);
                    Ok(Output::Json(json!({
                        "generator": gen.name(), "w_t": w, "rbar": r,
                        "rhs": float(theorem1_rhs(&gen, w, r)?),
                    })))
                }
                _ => usage("theorem1 needs both --from-ensemble and --q, or --stats W=..,rbar=.."),
            }
        }
        "two_point" => {
            let gen = gen_arg(generator)?;
            let v = stat(&need_stats()?, "V")?;
            let t = two_point_sharpness(v, &gen)?;
            let (numeric, a) = two_point_search(&gen, v)?;
            Ok(Output::Json(json!({
                "generator": gen.name(),
                "V": v,
                "target": float(t.target),
                "witness_value": float(t.achieved),
                "numeric_value": float(numeric),
                "numeric_a": a,
                "p1": t.p1.pmf(), "p2": t.p2.pmf(), "q": t.q.pmf(),
            })))
        }
        other => usage(format!(
            "unknown family `{other}`; expected one of {}, implicit, explicit, g, theorem1, two_point",
            FAMILY_NAMES.join(", ")
        )),
    }
}

fn entropy(args: &EntropyArgs, format: Format) -> CliResult<Output> {
    if let Some(model) = &args.analytic {
        let model = AnalyticModel::parse(model)?;
        let (Some(t), Some(tp)) = (args.theta, args.theta_prime) else {
            return usage("--analytic needs --theta and --theta-prime");
        };
        let n = args.n.unwrap_or(1.0);
        if n.fract() != 0.0 || n < 1.0 {
            return usage("--n must be a positive integer");
        }
        let r = analytic_divergence(model, t, tp, n as u32, args.extra)?;
        return Ok(Output::Json(json!({
            "model": model, "theta": t, "theta_prime": tp, "n": n,
            "kl": r.kl.map(float), "chi2": float(r.chi2),
        })));
    }
    if args.schedule {
        let (Some(n), Some(d), Some(sigma), Some(gamma)) = (args.n, args.d, args.sigma, args.gamma) else {
            return usage("--schedule needs --n, --d, --sigma and --gamma");
        };
        let s = support_schedule(
            n,
            d,
            sigma,
            gamma,
            args.c_prime.unwrap_or(1.0),
            args.c_dprime.unwrap_or(1.0),
        )?;
        return Ok(to_json(s));
    }
    if let (Some(r), Some(h)) = (args.lattice_radius, args.lattice_spacing) {
        let Some(gamma) = args.gamma else {
            return usage("--lattice-radius needs --gamma");
        };
        let count = lattice_separated_count(gamma, r, h)?;
        return Ok(Output::Json(json!({
            "gamma": gamma, "radius": r, "spacing": h, "count": count,
            "packing_floor": (gamma / r).powi(2), "packing_ceiling": (3.0 * gamma / r).powi(2),
        })));
    }
    let kind = StarKind::parse(&args.kind, args.l)?;
    let profile: EntropyProfile = match (&args.model, &args.profile) {
        (Some(m), None) => builtin_profile(
            m,
            &ProfileParams {
                n: args.n,
                d: args.d,
                sigma: args.sigma,
                gamma: args.gamma,
                c1: args.c1,
                c2: args.c2,
                c3: args.c3,
                c_prime: args.c_prime,
                c_dprime: args.c_dprime,
                eta0: args.eta0,
                eps0: args.eps0,
            },
        )?,
        (None, Some(path)) => custom_profile(&read_json::<ProfileTable>(path)?)?,
        _ => return usage("give exactly one of --model and --profile"),
    };
    let default_power = if args.model.as_deref() == Some("support_function") {
        1.0
    } else {
        2.0
    };
    let loss = LossSpec::power(args.loss_power.unwrap_or(default_power))?;
    if let (Some(eta), Some(eps)) = (args.eta, args.eps) {
        let v = theorem3_point(kind, &profile, &loss, eta, eps)?;
        return Ok(Output::Json(json!({
            "kind": kind.name(), "loss": loss.name(), "eta": eta, "eps": eps, "value": v,
            "warnings": profile.warnings,
        })));
    }
    let (def_eta, def_eps) = profile.default_grids(DEFAULT_GRID_POINTS);
    let etas = match &args.eta_grid {
        Some(g) => parse_grid(g)?,
        None => def_eta,
    };
    let epss = match &args.eps_grid {
        Some(g) => parse_grid(g)?,
        None => def_eps,
    };
    if format == Format::Csv {
        let mut rows = Vec::new();
        for &eta in &etas {
            for &eps in &epss {
                let (ln, lm) = (profile.log_packing(eta), profile.log_covering(kind, eps));
                let v = theorem3_point(kind, &profile, &loss, eta, eps);
                let cell = |r: &Result<f64, Error>| r.as_ref().map(|x| fmt_num(*x)).unwrap_or_default();
                rows.push(vec![fmt_num(eta), fmt_num(eps), cell(&ln), cell(&lm), cell(&v)]);
            }
        }
        let header = ["eta", "eps", "log_N", "log_M", "value"].map(String::from).to_vec();
        return Ok(Output::Csv(header, rows));
    }
    let report = theorem3_optimize(kind, &profile, &loss, &etas, &epss)?;
    let report = match &args.model {
        Some(m) => report.input("model", m),
        None => report.input("model", "table"),
    };
    Ok(to_json(report))
}

fn caps(d: u32, p: f64, eps: &[f64], seed: u64, format: Format) -> CliResult<Output> {
    let mut items = Vec::new();
    let mut rows = Vec::new();
    for &e in eps {
        let g = cap_geometry(e, d, p)?;
        let dist = cap_distance(&g)?;
        let ratio = claim_ratio(&g)?;
        let sphere = sphere_packing_points(d, e, seed)?;
        let packing = support_packing_bound(d, p, e, seed).ok();
        let closed = (d == 2 && p == 1.0).then(|| 2.0 * (g.alpha_angle - g.alpha_angle.sin()));
        rows.push(vec![
            fmt_num(e),
            fmt_num(g.alpha_angle),
            fmt_num(g.beta_angle),
            fmt_num(g.sin_beta()),
            fmt_num(g.sin_beta_floor()),
            fmt_num(dist),
            closed.map(fmt_num).unwrap_or_default(),
            fmt_num(ratio),
            sphere.points.len().to_string(),
            packing.as_ref().map(|s| fmt_num(s.log_count)).unwrap_or_default(),
            packing.as_ref().map(|s| fmt_num(s.min_distance)).unwrap_or_default(),
        ]);
        items.push(json!({
            "epsilon": e,
            "geometry": g,
            "sin_beta": g.sin_beta(),
            "sin_beta_floor": g.sin_beta_floor(),
            "cap_distance": dist,
            "closed_form": closed,
            "claim_ratio": ratio,
            "sphere_points": sphere.points.len(),
            "sphere_min_distance": sphere.min_distance,
            "c1": sphere.c1,
            "packing": packing,
        }));
    }
    if format == Format::Csv {
        let header = [
            "eps",
            "alpha",
            "beta",
            "sin_beta",
            "sin_beta_floor",
            "cap_distance",
            "closed_form",
            "claim_ratio",
            "caps",
            "log_count",
            "min_distance",
        ]
        .map(String::from)
        .to_vec();
        return Ok(Output::Csv(header, rows));
    }
    Ok(Output::Json(json!({ "d": d, "p": p, "seed": seed, "results": items })))
}

fn emit(out: Output) -> io::Result<()> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match out {
        Output::Json(v) => {
            let text = serde_json::to_string_pretty(&v).map_err(io::Error::other)?;
            writeln!(lock, "{text}")
        }
        Output::Csv(header, rows) => {
            let mut w = csv::Writer::from_writer(lock);
            w.write_record(&header).map_err(io::Error::other)?;
            for r in rows {
                w.write_record(&r).map_err(io::Error::other)?;
            }
            w.flush()
        }
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    info!("seed {}", cli.seed);
    if let Some((_, ops)) = DISPATCH.iter().find(|(c, _)| Some(*c) == matches.subcommand_name()) {
        debug!("operations: {}", ops.join(", "));
    }
    debug!("{:?}", cli.command);
    match run(&cli) {
        Ok((out, passed)) => {
            match emit(out) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => return ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
                Ok(()) => {}
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIBRARY_OPS: &[&str] = &[
        "validate",
        "product_distribution",
        "eval_divergence",
        "g_function",
        "g_derivative",
        "bayes_risk_exact",
        "map_test",
        "error_probability",
        "member_errors",
        "minimax_risk",
        "theorem1_rhs",
        "theorem1_check",
        "invert_implicit_bound",
        "explicit_bound",
        "named_bound",
        "named_bound_from_ensemble",
        "two_point_sharpness",
        "two_point_search",
        "jf_closed_form",
        "jf_numeric",
        "jf_best",
        "simple_chain",
        "max_min_error",
        "covering_upper_bound",
        "covering_specialization",
        "builtin_profile",
        "custom_profile",
        "theorem3_point",
        "theorem3_optimize",
        "analytic_divergence",
        "support_schedule",
        "lattice_separated_count",
        "vg_code",
        "hamming",
        "build_cov_family",
        "spectral_separation",
        "gaussian_kl",
        "kl_frobenius_check",
        "covmat_bound_assembly",
        "cap_geometry",
        "cap_distance",
        "claim_ratio",
        "sphere_packing_points",
        "support_packing_bound",
        "verify_suites",
    ];

    #[test]
    fn dispatch_covers_every_operation_once() {
        for op in LIBRARY_OPS {
            let owners: Vec<&str> = DISPATCH
                .iter()
                .filter(|(_, ops)| ops.contains(op))
                .map(|(cmd, _)| *cmd)
                .collect();
            assert_eq!(owners.len(), 1, "{op} is exposed by {owners:?}");
        }
        let listed: usize = DISPATCH.iter().map(|(_, ops)| ops.len()).sum();
        assert_eq!(listed, LIBRARY_OPS.len());
    }

    #[test]
    fn dispatch_matches_subcommands() {
        let cmd = Cli::command();
        let mut names: Vec<&str> = cmd.get_subcommands().map(|c| c.get_name()).collect();
        names.sort();
        let mut table: Vec<&str> = DISPATCH.iter().map(|(c, _)| *c).collect();
        table.sort();
        assert_eq!(names, table);
        cmd.debug_assert();
    }

    #[test]
    fn stats_parsing() {
        let s = parse_stats("N=16, avgKL=1").unwrap();
        assert_eq!(stat(&s, "n").unwrap(), 16.0);
        assert_eq!(stat(&s, "avgkl").unwrap(), 1.0);
        assert!(parse_stats("N16").is_err());
        assert!(parse_stats("N=x").is_err());
    }

    #[test]
    fn grids_and_words() {
        assert_eq!(parse_grid("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        let g = parse_grid("0.01:1:3").unwrap();
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert!(parse_grid("1:0.1:3").is_err());
        assert_eq!(parse_word("1,0,1").unwrap(), vec![1, 0, 1]);
        assert_eq!(parse_word("011").unwrap(), vec![0, 1, 1]);
        assert!(parse_word("012").is_err());
    }
}
