//! Lower bounds on the Bayes risk from an f-divergence budget.
//!
//! For a convex `f`, a prior `w`, any `Q` and the MAP test `T`,
//!
//! ```text
//! Σ_θ w_θ D_f(P_θ‖Q) ≥ W f((1 − r̄_w)/W) + (1 − W) f(r̄_w/(1 − W)),   W = Σ_x w_{T(x)} q(x)
//! ```
//!
//! and under the uniform prior `Σ_θ D_f(P_θ‖Q) ≥ g(r̄)`. Since `g` is
//! non-increasing on `[0, 1 − 1/N]`, any upper bound on the divergence sum
//! turns into a lower bound on `r̄`. [`named_bound`] collects the closed-form
//! inversions for the standard generators.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dist::{DiscreteDistribution, Ensemble};
use crate::error::{out_of_range, Error, Result};
use crate::fdiv::{eval_divergence, g_derivative, g_function, g_unchecked, hellinger_sq_distance, Generator};
use crate::jf;
use crate::numeric::golden_min;
use crate::report::{float, BoundReport};
use crate::testing_risk::{bayes_risk_exact, map_test};

/// Bisection tolerance used by [`invert_implicit_bound`].
pub const INVERSION_TOL: f64 = 1e-10;

fn check_n(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(out_of_range("N", n as f64, "N >= 2"));
    }
    Ok(n as f64)
}

/// `W f((1 − r̄)/W) + (1 − W) f(r̄/(1 − W))`.
pub fn theorem1_rhs(gen: &Generator, w_t: f64, rbar: f64) -> Result<f64> {
    if !(w_t > 0.0 && w_t < 1.0) {
        return Err(out_of_range("W", w_t, "(0, 1)"));
    }
    if !(0.0..=1.0).contains(&rbar) {
        return Err(out_of_range("rbar", rbar, "[0, 1]"));
    }
    Ok(w_t * gen.eval((1.0 - rbar) / w_t) + (1.0 - w_t) * gen.eval(rbar / (1.0 - w_t)))
}

/// Both sides of the weighted mixture inequality for a concrete `Q`, computed
/// from the exact Bayes risk and the MAP test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Check {
    pub divergence_sum: f64,
    pub rhs: f64,
    pub w_t: f64,
    pub rbar: f64,
}

impl Theorem1Check {
    /// `lhs − rhs`; nonnegative whenever the inequality holds.
    pub fn slack(&self) -> f64 {
        if self.divergence_sum == f64::INFINITY {
            f64::INFINITY
        } else {
            self.divergence_sum - self.rhs
        }
    }
}

/// Evaluates `Σ_θ w_θ D_f(P_θ‖Q)` and the right-hand side at the exact `r̄_w`.
pub fn theorem1_check(gen: &Generator, ens: &Ensemble, q: &DiscreteDistribution) -> Result<Theorem1Check> {
    let mut divergence_sum = 0.0;
    for (m, &w) in ens.members().iter().zip(ens.prior()) {
        if w > 0.0 {
            divergence_sum += w * eval_divergence(gen, m, q)?;
        }
    }
    let test = map_test(ens);
    let w_t: f64 = test
        .choice
        .iter()
        .zip(q.pmf())
        .map(|(&c, &qx)| ens.prior()[c] * qx)
        .sum();
    let rbar = bayes_risk_exact(ens);
    let rhs = theorem1_rhs(gen, w_t, rbar)?;
    Ok(Theorem1Check {
        divergence_sum,
        rhs,
        w_t,
        rbar,
    })
}

/// Result of inverting `g(a) ≤ s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inversion {
    /// Certified lower bound on `r̄`.
    pub value: f64,
    /// Final bracket `[lo, hi]` with `g(lo) > s ≥ g(hi)`.
    pub bracket: (f64, f64),
    pub g_lo: f64,
    pub g_hi: f64,
}

/// Lower bound on `r̄` from `Σ_θ D_f(P_θ‖Q) ≤ divergence_sum`.
///
/// Returns the left end of a bisection bracket of width at most
/// [`INVERSION_TOL`] around `inf {a ∈ [0, 1 − 1/N] : g(a) ≤ divergence_sum}`,
/// so the value never exceeds the exact inverse. Gives `0` when
/// `g(0) ≤ divergence_sum` and `1 − 1/N` when `divergence_sum ≤ 0`.
pub fn invert_implicit_bound(gen: &Generator, n: usize, divergence_sum: f64) -> Result<Inversion> {
    let nf = check_n(n)?;
    if divergence_sum.is_nan() {
        return Err(out_of_range("divergence_sum", divergence_sum, "[0, ∞]"));
    }
    let top = 1.0 - 1.0 / nf;
    let g = |a: f64| g_unchecked(gen, nf, a);
    if divergence_sum <= 0.0 {
        return Ok(Inversion {
            value: top,
            bracket: (top, top),
            g_lo: 0.0,
            g_hi: 0.0,
        });
    }
    let g0 = g(0.0);
    if g0 <= divergence_sum {
        return Ok(Inversion {
            value: 0.0,
            bracket: (0.0, 0.0),
            g_lo: g0,
            g_hi: g0,
        });
    }
    let (mut lo, mut hi) = (0.0, top);
    let (mut g_lo, mut g_hi) = (g0, g(top));
    while hi - lo > INVERSION_TOL {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm > divergence_sum {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
        }
    }
    Ok(Inversion {
        value: lo,
        bracket: (lo, hi),
        g_lo,
        g_hi,
    })
}

/// Tangent-line bound `a + (s − g(a))/g'(a)`, clamped to `[0, 1 − 1/N]`.
///
/// Needs a generator with an exact derivative.
pub fn explicit_bound(gen: &Generator, n: usize, divergence_sum: f64, a: f64) -> Result<f64> {
    let nf = check_n(n)?;
    let top = 1.0 - 1.0 / nf;
    if !(a >= 0.0 && a < top) {
        return Err(out_of_range("a", a, format!("[0, {top})")));
    }
    if !gen.has_derivative() {
        return Err(Error::Unsupported(format!(
            "generator `{}` has no derivative; use the implicit inversion",
            gen.name()
        )));
    }
    if divergence_sum.is_nan() || divergence_sum < 0.0 {
        return Err(out_of_range("divergence_sum", divergence_sum, "[0, ∞]"));
    }
    let ga = g_function(gen, n, a)?;
    if !ga.is_finite() {
        return Err(out_of_range("a", a, "points where g is finite"));
    }
    let slope = g_derivative(gen, n, a)?;
    if slope == 0.0 {
        return Err(Error::ZeroDerivative(a));
    }
    if divergence_sum == f64::INFINITY {
        return Ok(0.0);
    }
    let v = if slope == f64::NEG_INFINITY {
        a
    } else {
        a + (divergence_sum - ga) / slope
    };
    Ok(v.clamp(0.0, top))
}

/// The named closed-form specializations and their parameters.
///
/// `inf_sum` is always the divergence *sum* `Σ_θ D_f(P_θ‖Q)` (or its infimum
/// over `Q`), not the average.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NamedFamily {
    Fano { n: usize, avg_kl: f64 },
    Chi2 { n: usize, inf_sum: f64 },
    Hellinger { n: usize, h2: f64 },
    Tv { n: usize, inf_sum: f64 },
    PowerL { n: usize, l: f64, inf_sum: f64 },
    ReverseKlTv { inf_sum: f64 },
}

/// Family names accepted by [`NamedFamily::from_stats`].
pub const FAMILY_NAMES: [&str; 6] = ["fano", "chi2", "hellinger", "tv", "power_l", "reverse_kl_tv"];

impl NamedFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Fano { .. } => "fano",
            Self::Chi2 { .. } => "chi2",
            Self::Hellinger { .. } => "hellinger",
            Self::Tv { .. } => "tv",
            Self::PowerL { .. } => "power_l",
            Self::ReverseKlTv { .. } => "reverse_kl_tv",
        }
    }

    /// Builds a family from `key=value` statistics such as `N=16, avgKL=1`.
    ///
    /// Keys: `N`, `avgKL`, `inf_sum`, `h2`, `l` (case-insensitive).
    pub fn from_stats(name: &str, stats: &BTreeMap<String, f64>) -> Result<Self> {
        let lower: BTreeMap<String, f64> = stats.iter().map(|(k, v)| (k.to_ascii_lowercase(), *v)).collect();
        let get = |k: &str| {
            lower
                .get(&k.to_ascii_lowercase())
                .copied()
                .ok_or_else(|| Error::MissingParameter(k.to_string()))
        };
        let n = || -> Result<usize> {
            let v = get("N")?;
            if v.fract() != 0.0 || v < 2.0 {
                return Err(out_of_range("N", v, "integer >= 2"));
            }
            Ok(v as usize)
        };
        match name {
            "fano" => Ok(Self::Fano {
                n: n()?,
                avg_kl: get("avgKL")?,
            }),
            "chi2" => Ok(Self::Chi2 {
                n: n()?,
                inf_sum: get("inf_sum")?,
            }),
            "hellinger" => Ok(Self::Hellinger {
                n: n()?,
                h2: get("h2")?,
            }),
            "tv" => Ok(Self::Tv {
                n: n()?,
                inf_sum: get("inf_sum")?,
            }),
            "power_l" => Ok(Self::PowerL {
                n: n()?,
                l: get("l")?,
                inf_sum: get("inf_sum")?,
            }),
            "reverse_kl_tv" => Ok(Self::ReverseKlTv {
                inf_sum: get("inf_sum")?,
            }),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

fn nonneg(name: &'static str, v: f64) -> Result<f64> {
    if v.is_nan() || v < 0.0 {
        return Err(out_of_range(name, v, "[0, ∞]"));
    }
    Ok(v)
}

/// Evaluates a named closed-form bound.
///
/// `reverse_kl_tv` bounds the total variation of a pair from above,
/// `V ≤ sqrt(1 − e^{−s})`; its report carries that bound as `tv_upper_bound`
/// and the implied `r̄ = (1 − V)/2 ≥ (1 − V_upper)/2` as `lower_bound`.
pub fn named_bound(family: &NamedFamily) -> Result<BoundReport> {
    let report = match *family {
        NamedFamily::Fano { n, avg_kl } => {
            let nf = check_n(n)?;
            let avg_kl = nonneg("avgKL", avg_kl)?;
            let raw = 1.0 - (std::f64::consts::LN_2 + avg_kl) / nf.ln();
            BoundReport::new("fano", raw, 1.0)
                .input("N", n)
                .input("avgKL", float(avg_kl))
        }
        NamedFamily::Chi2 { n, inf_sum } => {
            let nf = check_n(n)?;
            let s = nonneg("inf_sum", inf_sum)?;
            let raw = 1.0 - 1.0 / nf - (s / nf).sqrt() / nf.sqrt();
            BoundReport::new("chi2", raw, 1.0)
                .input("N", n)
                .input("inf_sum", float(s))
        }
        NamedFamily::Hellinger { n, h2 } => {
            let nf = check_n(n)?;
            if !(0.0..=2.0).contains(&h2) {
                return Err(out_of_range("h2", h2, "[0, 2]"));
            }
            let raw = 1.0
                - 1.0 / nf
                - (nf - 2.0) / nf * h2 / 2.0
                - (nf - 1.0).sqrt() / nf * (h2 * (2.0 - h2)).max(0.0).sqrt();
            BoundReport::new("hellinger", raw, 1.0).input("N", n).input("h2", h2)
        }
        NamedFamily::Tv { n, inf_sum } => {
            let nf = check_n(n)?;
            let s = nonneg("inf_sum", inf_sum)?;
            let raw = 1.0 - 1.0 / nf - s / nf;
            BoundReport::new("tv", raw, 1.0)
                .input("N", n)
                .input("inf_sum", float(s))
        }
        NamedFamily::PowerL { n, l, inf_sum } => {
            let nf = check_n(n)?;
            if !(l > 1.0 && l.is_finite()) {
                return Err(out_of_range("l", l, "(1, ∞)"));
            }
            let s = nonneg("inf_sum", inf_sum)?;
            let raw = 1.0 - (nf.powf(1.0 - l) + s / nf.powf(l)).powf(1.0 / l);
            BoundReport::new("power_l", raw, 1.0)
                .input("N", n)
                .input("l", l)
                .input("inf_sum", float(s))
        }
        NamedFamily::ReverseKlTv { inf_sum } => {
            let s = nonneg("inf_sum", inf_sum)?;
            let v_upper = (1.0 - (-s).exp()).max(0.0).sqrt();
            BoundReport::new("reverse_kl_tv", 0.5 * (1.0 - v_upper), 1.0)
                .input("N", 2)
                .input("inf_sum", float(s))
                .intermediate("tv_upper_bound", v_upper)
        }
    };
    Ok(report)
}

/// `h² = Σ_{θ,θ'} H²(P_θ, P_θ')/N²`, diagonal terms included.
pub fn average_hellinger_h2(ens: &Ensemble) -> f64 {
    let n = ens.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += 2.0 * hellinger_sq_distance(ens.member(i), ens.member(j)).expect("members share a support");
        }
    }
    total / (n * n) as f64
}

/// Computes the exact statistic a family needs from an ensemble (via the
/// J_f solvers) and evaluates the bound. `l` is required for `power_l`.
pub fn named_bound_from_ensemble(name: &str, ens: &Ensemble, l: Option<f64>) -> Result<BoundReport> {
    let ens = ens.uniform();
    let n = ens.len();
    let nf = n as f64;
    let jf_sum = |gen: Generator| -> Result<(f64, &'static str)> {
        let r = jf::jf_best(&gen, &ens)?;
        Ok((nf * r.value, r.method.as_str()))
    };
    let (family, method) = match name {
        "fano" => {
            let r = jf::jf_closed_form(&Generator::kl(), &ens)?;
            (NamedFamily::Fano { n, avg_kl: r.value }, "closed_form")
        }
        "chi2" => {
            let (s, m) = jf_sum(Generator::chi2())?;
            (NamedFamily::Chi2 { n, inf_sum: s }, m)
        }
        "hellinger" => (
            NamedFamily::Hellinger {
                n,
                h2: average_hellinger_h2(&ens).min(2.0),
            },
            "pairwise",
        ),
        "tv" => {
            let (s, m) = jf_sum(Generator::tv())?;
            (NamedFamily::Tv { n, inf_sum: s }, m)
        }
        "power_l" => {
            let l = l.ok_or_else(|| Error::MissingParameter("l".into()))?;
            let (s, m) = jf_sum(Generator::power(l)?)?;
            (NamedFamily::PowerL { n, l, inf_sum: s }, m)
        }
        "reverse_kl_tv" => {
            if n != 2 {
                return Err(Error::Unsupported("reverse_kl_tv applies to pairs only".into()));
            }
            let (s, m) = jf_sum(Generator::reverse_kl())?;
            (NamedFamily::ReverseKlTv { inf_sum: s }, m)
        }
        other => return Err(Error::UnknownName(other.to_string())),
    };
    Ok(named_bound(&family)?.intermediate("statistic_method", method))
}

/// The sharp two-point instance for a total-variation level `V`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPoint {
    pub p1: DiscreteDistribution,
    pub p2: DiscreteDistribution,
    pub q: DiscreteDistribution,
    /// `D_f(P₁‖Q) + D_f(P₂‖Q)`.
    pub achieved: f64,
    /// `f(1 + V) + f(1 − V)`.
    pub target: f64,
    pub tv: f64,
}

/// `P₁ = ((1+V)/2, (1−V)/2)`, `P₂` its mirror image, `Q` uniform.
pub fn two_point_sharpness(v: f64, gen: &Generator) -> Result<TwoPoint> {
    if !(0.0..=1.0).contains(&v) {
        return Err(out_of_range("V", v, "[0, 1]"));
    }
    let p1 = DiscreteDistribution::new(vec![0.5 * (1.0 + v), 0.5 * (1.0 - v)])?;
    let p2 = DiscreteDistribution::new(vec![0.5 * (1.0 - v), 0.5 * (1.0 + v)])?;
    let q = DiscreteDistribution::uniform(2)?;
    let achieved = eval_divergence(gen, &p1, &q)? + eval_divergence(gen, &p2, &q)?;
    let tv = p1.total_variation(&p2)?;
    Ok(TwoPoint {
        achieved,
        target: gen.eval(1.0 + v) + gen.eval(1.0 - v),
        tv,
        p1,
        p2,
        q,
    })
}

/// Numerically minimizes `inf_Q [D_f(P₁‖Q) + D_f(P₂‖Q)]` over binary pairs
/// `P₁ = (a, 1 − a)`, `P₂ = (a − V, 1 − a + V)` with `TV(P₁, P₂) = V`.
///
/// Returns `(minimum, a)`.
pub fn two_point_search(gen: &Generator, v: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&v) {
        return Err(out_of_range("V", v, "[0, 1]"));
    }
    let objective = |a: f64| -> f64 {
        let a = a.clamp(v, 1.0);
        let ens = Ensemble::from_pmfs(vec![vec![a, 1.0 - a], vec![a - v, 1.0 - a + v]]);
        match ens.and_then(|e| jf::jf_best(gen, &e)) {
            Ok(r) => 2.0 * r.value,
            Err(_) => f64::INFINITY,
        }
    };
    if v >= 1.0 {
        return Ok((objective(1.0), 1.0));
    }
    // coarse scan, then golden-section refinement around the best cell
    let cells = 64;
    let width = (1.0 - v) / cells as f64;
    let (mut best_a, mut best) = (v, objective(v));
    for i in 1..=cells {
        let a = v + width * i as f64;
        let val = objective(a);
        if val < best {
            best = val;
            best_a = a;
        }
    }
    let lo = (best_a - width).max(v);
    let hi = (best_a + width).min(1.0);
    let (a, val) = golden_min(objective, lo, hi, 1e-10);
    Ok(if val < best { (val, a) } else { (best, best_a) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdiv::builtin_generators;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    #[test]
    fn rhs_examples() {
        let chi2 = Generator::chi2();
        assert!((theorem1_rhs(&chi2, 0.5, 0.25).unwrap() - 0.25).abs() < 1e-15);
        for g in builtin_generators() {
            for n in 2..6 {
                let w = 1.0 / n as f64;
                assert!(theorem1_rhs(&g, w, 1.0 - w).unwrap().abs() < 1e-12);
            }
        }
        let v = theorem1_rhs(&Generator::kl(), 0.5, 0.0).unwrap();
        assert!((v - LN_2).abs() < 1e-15);
        assert!(theorem1_rhs(&chi2, 0.0, 0.1).is_err());
        assert!(theorem1_rhs(&chi2, 1.0, 0.1).is_err());
    }

    #[test]
    fn inversion_examples() {
        let chi2 = Generator::chi2();
        let r = invert_implicit_bound(&chi2, 2, 0.5).unwrap();
        assert!((r.value - 0.25).abs() < 1e-9);
        assert!(r.value <= 0.25);
        for g in builtin_generators().iter().filter(|g| g.is_strict()) {
            assert_eq!(invert_implicit_bound(g, 5, 0.0).unwrap().value, 0.8);
        }
        let r = invert_implicit_bound(&Generator::kl(), 2, 2.0 * LN_2).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(invert_implicit_bound(&chi2, 3, f64::INFINITY).unwrap().value, 0.0);
    }

    #[test]
    fn explicit_examples() {
        let kl = Generator::kl();
        for n in [2usize, 4, 16, 100] {
            let nf = n as f64;
            let a = (nf - 1.0) / (2.0 * nf - 1.0);
            for avg_kl in [0.01, 0.3, 1.0] {
                let v = explicit_bound(&kl, n, nf * avg_kl, a).unwrap();
                let closed = 1.0 - (((2.0 * nf - 1.0) / nf).ln() + avg_kl) / nf.ln();
                assert!((v - closed.clamp(0.0, 1.0 - 1.0 / nf)).abs() < 1e-12);
                let fano = named_bound(&NamedFamily::Fano { n, avg_kl }).unwrap();
                assert!(fano.lower_bound <= v + 1e-12);
            }
        }
        let chi2 = Generator::chi2();
        assert!((explicit_bound(&chi2, 2, 0.5, 0.25).unwrap() - 0.25).abs() < 1e-15);
        for n in 2..6 {
            let a = 0.3 * (1.0 - 1.0 / n as f64);
            let s = g_function(&chi2, n, a).unwrap();
            assert!((explicit_bound(&chi2, n, s, a).unwrap() - a).abs() < 1e-12);
        }
        assert!(explicit_bound(&Generator::tv(), 2, 0.5, 0.1).is_err());
        assert!(explicit_bound(&chi2, 2, 0.5, 0.5).is_err());
    }

    #[test]
    fn named_examples() {
        let b = |f| named_bound(&f).unwrap().lower_bound;
        let fano = b(NamedFamily::Fano { n: 16, avg_kl: 1.0 });
        assert!((fano - (1.0 - (LN_2 + 1.0) / 16f64.ln())).abs() < 1e-15);
        assert!((fano - 0.3893).abs() < 1e-4);
        assert_eq!(b(NamedFamily::Chi2 { n: 2, inf_sum: 0.0 }), 0.5);
        assert!(b(NamedFamily::Hellinger { n: 2, h2: 1.0 }).abs() < 1e-15);
        let h = b(NamedFamily::Hellinger { n: 2, h2: 0.5 });
        assert!((h - (0.5 - 0.5 * 0.75f64.sqrt())).abs() < 1e-15);
        let p = b(NamedFamily::PowerL {
            n: 2,
            l: 3.0,
            inf_sum: 0.0,
        });
        assert!((p - (1.0 - 0.25f64.cbrt())).abs() < 1e-15);
        assert_eq!(b(NamedFamily::Tv { n: 2, inf_sum: 1.0 }), 0.0);
        let r = named_bound(&NamedFamily::Fano { n: 2, avg_kl: 5.0 }).unwrap();
        assert!(r.vacuous);
        assert!(named_bound(&NamedFamily::Hellinger { n: 2, h2: 2.5 }).is_err());
        assert!(named_bound(&NamedFamily::PowerL {
            n: 2,
            l: 1.0,
            inf_sum: 0.0
        })
        .is_err());
    }

    #[test]
    fn stats_parsing() {
        let stats: BTreeMap<String, f64> = [("N".to_string(), 16.0), ("avgKL".to_string(), 1.0)].into();
        assert_eq!(
            NamedFamily::from_stats("fano", &stats).unwrap(),
            NamedFamily::Fano { n: 16, avg_kl: 1.0 }
        );
        assert!(matches!(
            NamedFamily::from_stats("chi2", &stats),
            Err(Error::MissingParameter(_))
        ));
        assert!(NamedFamily::from_stats("bogus", &stats).is_err());
    }

    #[test]
    fn reverse_kl_pair() {
        // pair with TV = 0.5: the bound on V must hold
        let e = Ensemble::from_pmfs(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        let r = named_bound_from_ensemble("reverse_kl_tv", &e, None).unwrap();
        assert!(r.get("tv_upper_bound").unwrap() >= 0.5 - 1e-9);
        assert!(r.lower_bound <= bayes_risk_exact(&e) + 1e-9);
    }

    #[test]
    fn sharpness_examples() {
        let t = two_point_sharpness(0.3, &Generator::chi2()).unwrap();
        assert!((t.achieved - 0.18).abs() < 1e-12);
        assert!((t.tv - 0.3).abs() < 1e-12);
        let t = two_point_sharpness(0.0, &Generator::kl()).unwrap();
        assert_eq!(t.achieved, 0.0);
        let t = two_point_sharpness(1.0, &Generator::kl()).unwrap();
        assert!((t.achieved - 2.0 * LN_2).abs() < 1e-12);
        assert!(two_point_sharpness(1.1, &Generator::kl()).is_err());
    }

    #[test]
    fn sharpness_search_attains_target() {
        for g in [Generator::kl(), Generator::chi2()] {
            for v in [0.0, 0.4, 1.0] {
                let (val, _) = two_point_search(&g, v).unwrap();
                let target = g.eval(1.0 + v) + g.eval(1.0 - v);
                assert!((val - target).abs() < 1e-6, "{} {v}: {val} vs {target}", g.name());
            }
        }
    }

    fn ensemble_and_q() -> impl Strategy<Value = (Ensemble, DiscreteDistribution)> {
        (2usize..=4, 2usize..=6)
            .prop_flat_map(|(n, s)| {
                (
                    prop::collection::vec(prop::collection::vec(0.0f64..1.0, s), n),
                    prop::collection::vec(0.05f64..1.0, n),
                    prop::collection::vec(0.05f64..1.0, s),
                )
            })
            .prop_filter_map("degenerate", |(rows, w, q)| {
                let members = rows
                    .iter()
                    .map(|r| DiscreteDistribution::from_weights(r).ok())
                    .collect::<Option<Vec<_>>>()?;
                let total: f64 = w.iter().sum();
                let prior = w.iter().map(|x| x / total).collect();
                let ens = Ensemble::new(members, Some(prior)).ok()?;
                Some((ens, DiscreteDistribution::from_weights(&q).ok()?))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn theorem1_holds((ens, q) in ensemble_and_q()) {
            for g in builtin_generators() {
                let c = theorem1_check(&g, &ens, &q).unwrap();
                prop_assert!(c.slack() >= -1e-9, "{}: {:?}", g.name(), c);
            }
        }

        #[test]
        fn explicit_below_implicit(n in 2usize..8, s in 0.0f64..5.0, frac in 0.0f64..0.99) {
            let a = frac * (1.0 - 1.0 / n as f64);
            for g in builtin_generators().iter().filter(|g| g.has_derivative()) {
                let imp = invert_implicit_bound(g, n, s).unwrap().value;
                if let Ok(exp) = explicit_bound(g, n, s, a) {
                    prop_assert!(exp <= imp + 1e-9, "{} a={a}: {exp} > {imp}", g.name());
                }
            }
        }

        #[test]
        fn named_bounds_sound((ens, _) in ensemble_and_q()) {
            let rbar = bayes_risk_exact(&ens.uniform());
            for name in FAMILY_NAMES {
                if name == "reverse_kl_tv" && ens.len() != 2 {
                    continue;
                }
                let r = named_bound_from_ensemble(name, &ens, Some(3.0)).unwrap();
                prop_assert!(r.lower_bound <= rbar + 1e-9, "{name}: {} > {rbar}", r.lower_bound);
            }
        }
    }
}
