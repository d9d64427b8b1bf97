//! Seeded invariant suites.
//!
//! Each suite draws random instances from a ChaCha stream seeded by the
//! caller and records, per check, the number of cases, the number of
//! violations and the smallest slack observed. Reports contain no timing
//! information, so equal seeds give byte-identical JSON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::constructions::{
    build_cov_family, cap_distance, cap_geometry, default_delta_a, kl_frobenius_check, spectral_separation, vg_code,
};
use crate::dist::{product_distribution, DiscreteDistribution, Ensemble, DEFAULT_PRODUCT_CAP};
use crate::entropy::{builtin_profile, theorem3_value, ProfileParams, StarKind};
use crate::error::{Error, Result};
use crate::fdiv::{builtin_generators, eval_divergence, g_function, hellinger_sq_distance, Generator};
use crate::jf::{
    covering_specialization, covering_upper_bound, jf_best, jf_closed_form, jf_numeric, simple_chain, CoverKind,
    CoveringFamily,
};
use crate::mixture::{explicit_bound, invert_implicit_bound, named_bound, theorem1_check, NamedFamily};
use crate::report::float;
use crate::testing_risk::{bayes_risk_exact, error_probability, minimax_risk, TestAssignment};

/// Suite names accepted by [`run`].
pub const SUITES: [&str; 8] = [
    "dist",
    "fdiv",
    "testing",
    "mixture",
    "jf",
    "entropy",
    "constructions",
    "all",
];

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Smallest `slack` seen; a check fails when `slack < −tolerance`.
    pub worst_slack: Value,
    pub tolerance: f64,
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

struct Check {
    name: &'static str,
    tol: f64,
    cases: usize,
    failures: usize,
    worst: f64,
}

impl Check {
    fn new(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            tol,
            cases: 0,
            failures: 0,
            worst: f64::INFINITY,
        }
    }

    fn slack(&mut self, s: f64) {
        self.cases += 1;
        if s.is_nan() || s < -self.tol {
            self.failures += 1;
        }
        if s.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.min(s);
        }
    }

    fn holds(&mut self, ok: bool) {
        self.slack(if ok { 0.0 } else { -1.0 });
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name.to_string(),
            cases: self.cases,
            failures: self.failures,
            worst_slack: float(self.worst),
            tolerance: self.tol,
        }
    }
}

/// A random probability vector of length `size`; each coordinate is zeroed
/// with probability `sparsity` (at least one stays positive).
pub fn random_distribution<R: Rng>(rng: &mut R, size: usize, sparsity: f64) -> DiscreteDistribution {
    loop {
        let w: Vec<f64> = (0..size)
            .map(|_| {
                if rng.random::<f64>() < sparsity {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        if let Ok(d) = DiscreteDistribution::from_weights(&w) {
            return d;
        }
    }
}

/// `n` random members on `size` points with a random prior.
pub fn random_ensemble<R: Rng>(rng: &mut R, n: usize, size: usize, sparsity: f64) -> Ensemble {
    let members = (0..n).map(|_| random_distribution(rng, size, sparsity)).collect();
    let prior = random_distribution(rng, n, 0.0).pmf().to_vec();
    Ensemble::new(members, Some(prior)).expect("valid random ensemble")
}

/// Runs one suite, or every suite for `"all"`.
pub fn run(suite: &str, seed: u64) -> Result<Vec<SuiteReport>> {
    let names: Vec<&str> = match suite {
        "all" => SUITES[..SUITES.len() - 1].to_vec(),
        s if SUITES.contains(&s) => vec![s],
        other => return Err(Error::UnknownName(other.to_string())),
    };
    names.into_iter().map(|s| run_one(s, seed)).collect()
}

fn run_one(suite: &str, seed: u64) -> Result<SuiteReport> {
    // each suite gets its own stream so that suites are independent of order
    let offset = SUITES.iter().position(|s| *s == suite).unwrap_or(0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(offset);
    let checks = match suite {
        "dist" => dist_suite(&mut rng)?,
        "fdiv" => fdiv_suite(&mut rng)?,
        "testing" => testing_suite(&mut rng)?,
        "mixture" => mixture_suite(&mut rng)?,
        "jf" => jf_suite(&mut rng)?,
        "entropy" => entropy_suite(&mut rng)?,
        "constructions" => constructions_suite(&mut rng, seed)?,
        other => return Err(Error::UnknownName(other.to_string())),
    };
    let checks: Vec<CheckOutcome> = checks.into_iter().map(Check::finish).collect();
    Ok(SuiteReport {
        suite: suite.to_string(),
        seed,
        passed: checks.iter().all(|c| c.failures == 0),
        checks,
    })
}

fn dist_suite(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut marg = Check::new("product_marginals", 1e-12);
    let mut mix = Check::new("mixture_normalized", 1e-12);
    let mut tv = Check::new("tv_symmetric_bounded", 1e-15);
    for _ in 0..100 {
        let size = rng.random_range(2..5);
        let base = random_distribution(rng, size, 0.2);
        let n = rng.random_range(1..4);
        let prod = product_distribution(&base, n, DEFAULT_PRODUCT_CAP)?;
        for c in 0..n {
            let m = prod.marginal(size, n, c)?;
            let err = m
                .pmf()
                .iter()
                .zip(base.pmf())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            marg.slack(-err);
        }
        let n_members = rng.random_range(2..6);
        let ens = random_ensemble(rng, n_members, size, 0.3);
        mix.slack(-(ens.mixture().pmf().iter().sum::<f64>() - 1.0).abs());
        let (a, b) = (ens.member(0), ens.member(1));
        let (v1, v2) = (a.total_variation(b)?, b.total_variation(a)?);
        tv.slack(-(v1 - v2).abs());
        tv.slack(v1.min(1.0 - v1));
    }
    Ok(vec![marg, mix, tv])
}

fn fdiv_suite(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let gens = builtin_generators();
    let mut nonneg = Check::new("nonnegative", 1e-12);
    let mut self_zero = Check::new("self_divergence_zero", 1e-12);
    let mut pinsker = Check::new("pinsker", 1e-12);
    let mut lecam = Check::new("tv_hellinger", 1e-12);
    let mut hfactor = Check::new("hellinger_factor_two", 1e-12);
    let mut g_shape = Check::new("g_decreasing_convex", 1e-9);
    let kl = Generator::kl();
    for _ in 0..200 {
        let size = rng.random_range(2..8);
        let p = random_distribution(rng, size, 0.2);
        let q = random_distribution(rng, size, 0.2);
        for g in &gens {
            nonneg.slack(eval_divergence(g, &p, &q)?);
            self_zero.slack(-eval_divergence(g, &p, &p)?.abs());
        }
        let v = p.total_variation(&q)?;
        let d = eval_divergence(&kl, &p, &q)?;
        pinsker.slack(if d.is_infinite() { 0.0 } else { d - 2.0 * v * v });
        let h2 = hellinger_sq_distance(&p, &q)?;
        let h = h2.sqrt();
        lecam.slack(h * (1.0 - h2 / 4.0).max(0.0).sqrt() - v);
        let half = eval_divergence(&Generator::hellinger_half(), &p, &q)?;
        let sq = eval_divergence(&Generator::hellinger_sq(), &p, &q)?;
        hfactor.slack(if sq.is_infinite() && half.is_infinite() {
            0.0
        } else {
            -(sq - 2.0 * half).abs()
        });
    }
    for g in gens.iter().filter(|g| !g.is_custom()) {
        for n in 2..7 {
            let top = 1.0 - 1.0 / n as f64;
            let grid: Vec<f64> = (0..=40).map(|i| top * i as f64 / 40.0).collect();
            let vals: Vec<f64> = grid.iter().map(|&a| g_function(g, n, a)).collect::<Result<_>>()?;
            for w in vals.windows(2) {
                if w[0].is_finite() {
                    g_shape.slack(w[0] - w[1]);
                }
            }
            for w in vals.windows(3) {
                if w.iter().all(|x| x.is_finite()) {
                    g_shape.slack(w[0] + w[2] - 2.0 * w[1]);
                }
            }
        }
    }
    Ok(vec![nonneg, self_zero, pinsker, lecam, hfactor, g_shape])
}

fn testing_suite(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut map_opt = Check::new("map_is_optimal", 1e-12);
    let mut trivial = Check::new("below_guessing", 1e-12);
    let mut minimax = Check::new("minimax_sandwich", 1e-6);
    for i in 0..100 {
        let n = rng.random_range(2..5);
        let s = rng.random_range(2..7);
        let ens = random_ensemble(rng, n, s, 0.3);
        let r = bayes_risk_exact(&ens);
        for _ in 0..5 {
            let choice: Vec<usize> = (0..s).map(|_| rng.random_range(0..n)).collect();
            let t = TestAssignment::new(choice, n)?;
            map_opt.slack(error_probability(&ens, &t)? - r);
        }
        let top = ens.prior().iter().cloned().fold(0.0, f64::max);
        trivial.slack(1.0 - top - r);
        if i % 4 == 0 {
            let m = minimax_risk(&ens.uniform(), 1e-6)?;
            let ru = bayes_risk_exact(&ens.uniform());
            minimax.slack(m.value - ru);
            minimax.slack(m.randomized_upper - m.value);
            minimax.slack(m.map_worst_case - m.value);
        }
    }
    Ok(vec![map_opt, trivial, minimax])
}

fn mixture_suite(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let gens = builtin_generators();
    let mut t1 = Check::new("mixture_inequality", 1e-9);
    let mut inv = Check::new("inversion_below_bayes", 1e-9);
    let mut expl = Check::new("explicit_below_implicit", 1e-9);
    let mut named = Check::new("named_bounds_sound", 1e-9);
    for _ in 0..100 {
        let n = rng.random_range(2..6);
        let s = rng.random_range(2..9);
        let ens = random_ensemble(rng, n, s, 0.25);
        let q = random_distribution(rng, s, 0.1);
        for g in &gens {
            t1.slack(theorem1_check(g, &ens, &q)?.slack());
        }
        let uni = ens.uniform();
        let r = bayes_risk_exact(&uni);
        for g in gens.iter().filter(|g| !g.is_tv()) {
            let sum = n as f64 * jf_best(g, &uni)?.value;
            let implicit = invert_implicit_bound(g, n, sum)?.value;
            inv.slack(r - implicit);
            if g.has_derivative() {
                for a in [0.0, 0.25, 0.5] {
                    let a = a * (1.0 - 1.0 / n as f64);
                    if let Ok(e) = explicit_bound(g, n, sum, a) {
                        expl.slack(implicit - e);
                    }
                }
            }
        }
        let kl_avg = jf_closed_form(&Generator::kl(), &uni)?.value;
        let chi_sum = n as f64 * jf_closed_form(&Generator::chi2(), &uni)?.value;
        let tv_sum = n as f64 * jf_best(&Generator::tv(), &uni)?.value;
        for fam in [
            NamedFamily::Fano { n, avg_kl: kl_avg },
            NamedFamily::Chi2 { n, inf_sum: chi_sum },
            NamedFamily::Tv { n, inf_sum: tv_sum },
        ] {
            named.slack(r - named_bound(&fam)?.lower_bound);
        }
    }
    Ok(vec![t1, inv, expl, named])
}

fn jf_suite(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut agree = Check::new("closed_form_matches_numeric", 1e-6);
    let mut chain = Check::new("simple_chain_ordered", 1e-9);
    let mut cover = Check::new("covering_bounds_dominate", 1e-9);
    for _ in 0..60 {
        let n = rng.random_range(2..5);
        let s = rng.random_range(2..6);
        let ens = random_ensemble(rng, n, s, 0.0).uniform();
        for g in [Generator::kl(), Generator::chi2(), Generator::hellinger_half()] {
            let c = jf_closed_form(&g, &ens)?.value;
            let num = jf_numeric(&g, &ens, 1e-8)?.value;
            agree.slack(-(c - num).abs());
            let sc = simple_chain(&g, &ens)?;
            chain.slack(sc.to_mixture - c);
            chain.slack(sc.pairwise_average - sc.to_mixture);
            chain.slack(sc.pairwise_max - sc.pairwise_average);
        }
        let m = rng.random_range(1..4);
        let cands = (0..m).map(|_| random_distribution(rng, s, 0.0)).collect();
        let fam = CoveringFamily::new(cands, None)?;
        for kind in [
            CoverKind::Kl,
            CoverKind::Chi2,
            CoverKind::PowerL(3.0),
            CoverKind::HellingerSq,
        ] {
            let g = kind.generator();
            let exact = jf_best(&g, &ens)?.value;
            let b = covering_upper_bound(&g, &ens, &fam)?;
            cover.slack(b.value - exact);
            let spec = covering_specialization(kind, fam.len(), b.max_min_error)?;
            cover.slack(spec - exact);
        }
    }
    Ok(vec![agree, chain, cover])
}

fn entropy_suite(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut mono = Check::new("monotone_in_packing_and_covering", 1e-12);
    let mut points = Check::new("point_values", 1e-5);
    let mut prof = Check::new("profiles_monotone", 0.0);
    for _ in 0..200 {
        let ln = rng.random_range(0.1..20.0);
        let lm = rng.random_range(0.0..10.0);
        let e2 = rng.random_range(0.0..3.0);
        let dn = rng.random_range(0.0..5.0);
        for kind in [StarKind::Kl, StarKind::Chi2, StarKind::PowerL(3.0)] {
            let base = theorem3_value(kind, ln, lm, e2, 1.0)?;
            mono.slack(theorem3_value(kind, ln + dn, lm, e2, 1.0)? - base);
            mono.slack(base - theorem3_value(kind, ln, lm + dn, e2, 1.0)?);
        }
    }
    let cases = [
        (StarKind::Chi2, 100f64, 0.07072),
        (StarKind::Kl, 1024f64, 0.05557),
        (StarKind::PowerL(3.0), 100f64, 0.08511),
    ];
    for (kind, n, expected) in cases {
        points.slack(-(theorem3_value(kind, n.ln(), 4f64.ln(), 1.0, 0.1)? - expected).abs());
    }
    for model in ["gaussian_1d", "uniform_scale", "uniform_shift"] {
        let p = builtin_profile(
            model,
            &ProfileParams {
                n: Some(100.0),
                ..Default::default()
            },
        )?;
        for _ in 0..50 {
            let a = rng.random_range(0.01..0.99);
            let b = rng.random_range(0.01..0.99);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prof.slack(p.log_packing(lo)? - p.log_packing(hi)?);
            for kind in [StarKind::Kl, StarKind::Chi2, StarKind::PowerL(3.0)] {
                prof.slack(p.log_covering(kind, lo)? - p.log_covering(kind, hi)?);
            }
        }
    }
    Ok(vec![mono, points, prof])
}

fn constructions_suite(rng: &mut ChaCha8Rng, seed: u64) -> Result<Vec<Check>> {
    let mut codes = Check::new("vg_codes", 0.0);
    let mut sep = Check::new("spectral_separation", 1e-10);
    let mut frob = Check::new("frobenius_tail", 1e-12);
    let mut caps = Check::new("cap_closed_form", 1e-9);
    let mut sinb = Check::new("sin_beta_floor", 0.0);
    for k in [8usize, 16, 24, 32] {
        codes.holds(vg_code(k, seed).and_then(|c| c.verify()).is_ok());
    }
    for (p, k, alpha) in [(8usize, 3usize, 0.5), (12, 4, 1.0), (16, 6, 2.0)] {
        let fam = build_cov_family(p, k, alpha, default_delta_a(alpha)?)?;
        let mut done = 0;
        while done < 30 {
            let a: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
            let b: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
            if a == b {
                continue;
            }
            let s = spectral_separation(&fam, &a, &b)?;
            sep.slack(s.achieved - s.guaranteed);
            let m = rng.random_range(1..k);
            let c = kl_frobenius_check(&fam, &a, m)?;
            frob.slack(c.tail_bound - c.frobenius_sq);
            done += 1;
        }
    }
    for i in 0..50 {
        let e = 0.001 + (0.5 - 0.001) * i as f64 / 49.0;
        let g = cap_geometry(e, 2, 1.0)?;
        let a = g.alpha_angle;
        caps.slack(-(cap_distance(&g)? - 2.0 * (a - a.sin())).abs());
        sinb.slack(g.sin_beta() - g.sin_beta_floor());
    }
    Ok(vec![codes, sep, frob, caps, sinb])
}
