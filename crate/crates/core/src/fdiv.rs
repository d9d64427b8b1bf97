//! Convex generators and f-divergences between finite distributions.
//!
//! | name             | f(x)          | f(0+) |
//! |------------------|---------------|-------|
//! | `kl`             | x ln x        | 0     |
//! | `chi2`           | x² − 1        | −1    |
//! | `hellinger_half` | 1 − √x        | 1     |
//! | `hellinger_sq`   | (√x − 1)²     | 1     |
//! | `tv`             | \|x − 1\| / 2 | 1/2   |
//! | `power:l`        | x^l − 1       | −1    |
//! | `reverse_kl`     | −ln x         | +∞    |
//!
//! `D_f(P‖Q) = Σ_x q(x) f(p(x)/q(x))`. Points with `q(x) = 0 < p(x)` make the
//! divergence `+∞` (no absolute continuity); points with `p(x) = 0 < q(x)`
//! contribute `q(x)·f(0+)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dist::{same_support, DiscreteDistribution};
use crate::error::{out_of_range, Error, Result};

/// Divergence values this close to zero are reported as exactly zero.
pub const ZERO_CLAMP: f64 = 1e-12;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Kl,
    Chi2,
    HellingerHalf,
    HellingerSq,
    Tv,
    Power(f64),
    ReverseKl,
    Custom { f: RealFn, derivative: Option<RealFn> },
}

/// A convex function `f` on `[0, ∞)` with `f(1) = 0`.
#[derive(Clone)]
pub struct Generator {
    name: String,
    kind: Kind,
    f_at_zero: f64,
    strict: bool,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator")
            .field("name", &self.name)
            .field("f_at_zero", &self.f_at_zero)
            .field("strict", &self.strict)
            .finish()
    }
}

impl PartialEq for Generator {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

/// Names accepted by [`Generator::from_str`], excluding the `power:l` family.
pub const BUILTIN_NAMES: [&str; 6] = ["kl", "chi2", "hellinger_half", "hellinger_sq", "tv", "reverse_kl"];

impl Generator {
    /// `x ln x`: Kullback–Leibler divergence.
    pub fn kl() -> Self {
        Self::builtin("kl", Kind::Kl, 0.0, true)
    }

    /// `x² − 1`: chi-squared divergence.
    pub fn chi2() -> Self {
        Self::builtin("chi2", Kind::Chi2, -1.0, true)
    }

    /// `1 − √x`: half the squared Hellinger distance.
    pub fn hellinger_half() -> Self {
        Self::builtin("hellinger_half", Kind::HellingerHalf, 1.0, true)
    }

    /// `(√x − 1)²`: squared Hellinger distance.
    pub fn hellinger_sq() -> Self {
        Self::builtin("hellinger_sq", Kind::HellingerSq, 1.0, true)
    }

    /// `|x − 1| / 2`: total variation distance.
    pub fn tv() -> Self {
        Self::builtin("tv", Kind::Tv, 0.5, false)
    }

    /// `x^l − 1` for `l > 1`.
    pub fn power(l: f64) -> Result<Self> {
        if !(l > 1.0 && l.is_finite()) {
            return Err(out_of_range("l", l, "(1, ∞)"));
        }
        Ok(Self::builtin(&format!("power:{l}"), Kind::Power(l), -1.0, true))
    }

    /// `−ln x`: reverse Kullback–Leibler divergence, `D_f(P‖Q) = KL(Q‖P)`.
    pub fn reverse_kl() -> Self {
        Self::builtin("reverse_kl", Kind::ReverseKl, f64::INFINITY, true)
    }

    fn builtin(name: &str, kind: Kind, f_at_zero: f64, strict: bool) -> Self {
        Self {
            name: name.to_string(),
            kind,
            f_at_zero,
            strict,
        }
    }

    /// A user-supplied generator.
    ///
    /// Accepted only if `f(1) = 0` exactly and midpoint convexity holds on a
    /// grid over `[0, 16]` (with `f(0)` read from `f_at_zero`). Strictness at 1
    /// is probed numerically.
    pub fn custom<F>(
        name: &str,
        f: F,
        f_at_zero: f64,
        derivative: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if f_at_zero.is_nan() || f_at_zero == f64::NEG_INFINITY {
            return Err(Error::InvalidGenerator(format!(
                "f(0+) = {f_at_zero} is not admissible"
            )));
        }
        let f: RealFn = Arc::new(f);
        let one = f(1.0);
        if one != 0.0 {
            return Err(Error::InvalidGenerator(format!("f(1) = {one}, expected 0")));
        }
        let h = 1e-3;
        let strict = f(1.0 - h) + f(1.0 + h) > 1e-12;
        let gen = Self {
            name: name.to_string(),
            kind: Kind::Custom { f, derivative },
            f_at_zero,
            strict,
        };
        gen.check_convexity()?;
        Ok(gen)
    }

    /// Midpoint convexity on the grid `{0, 1/8, .., 16}`.
    pub fn check_convexity(&self) -> Result<()> {
        let grid: Vec<f64> = (0..=128).map(|i| i as f64 / 8.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| self.eval(x)).collect();
        for (i, &x) in grid.iter().enumerate() {
            for (j, &y) in grid.iter().enumerate().skip(i + 1) {
                let (fx, fy) = (vals[i], vals[j]);
                if fx.is_infinite() || fy.is_infinite() {
                    continue;
                }
                let mid = self.eval(0.5 * (x + y));
                if !mid.is_finite() && mid != f64::NEG_INFINITY {
                    return Err(Error::InvalidGenerator(format!("f({}) is not finite", 0.5 * (x + y))));
                }
                if mid > 0.5 * (fx + fy) + 1e-12 {
                    return Err(Error::InvalidGenerator(format!(
                        "midpoint convexity fails between {x} and {y}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The limit `f(0+)`, possibly `+∞`.
    pub fn f_at_zero(&self) -> f64 {
        self.f_at_zero
    }

    /// Whether `f` is strictly convex at 1.
    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// The exponent `l` for the `power:l` family.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power(l) => Some(l),
            Kind::Chi2 => Some(2.0),
            _ => None,
        }
    }

    pub fn is_kl(&self) -> bool {
        matches!(self.kind, Kind::Kl)
    }

    pub fn is_tv(&self) -> bool {
        matches!(self.kind, Kind::Tv)
    }

    pub fn is_custom(&self) -> bool {
        matches!(self.kind, Kind::Custom { .. })
    }

    /// `f(x)` for `x ≥ 0`; `f(0)` is the stored limit.
    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.f_at_zero;
        }
        match &self.kind {
            Kind::Kl => x * x.ln(),
            Kind::Chi2 => x * x - 1.0,
            Kind::HellingerHalf => 1.0 - x.sqrt(),
            Kind::HellingerSq => {
                let s = x.sqrt() - 1.0;
                s * s
            }
            Kind::Tv => 0.5 * (x - 1.0).abs(),
            Kind::Power(l) => x.powf(*l) - 1.0,
            Kind::ReverseKl => -x.ln(),
            Kind::Custom { f, .. } => f(x),
        }
    }

    /// Whether an exact derivative is available (all built-ins but `tv`, and
    /// custom generators that supplied one).
    pub fn has_derivative(&self) -> bool {
        match &self.kind {
            Kind::Tv => false,
            Kind::Custom { derivative, .. } => derivative.is_some(),
            _ => true,
        }
    }

    /// `f'(x)` for `x ≥ 0` (the right derivative at 0, possibly `−∞`), if an
    /// exact derivative is available.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        Some(match &self.kind {
            Kind::Kl => x.ln() + 1.0,
            Kind::Chi2 => 2.0 * x,
            Kind::HellingerHalf => -0.5 / x.sqrt(),
            Kind::HellingerSq => 1.0 - 1.0 / x.sqrt(),
            Kind::Tv => return None,
            Kind::Power(l) => l * x.powf(l - 1.0),
            Kind::ReverseKl => -1.0 / x,
            Kind::Custom { derivative, .. } => return derivative.as_ref().map(|d| d(x)),
        })
    }

    /// `f'(x)`, falling back to a central difference when no exact derivative
    /// is known.
    pub fn slope(&self, x: f64) -> f64 {
        if let Some(d) = self.derivative(x) {
            return d;
        }
        let h = 1e-6 * x.max(1e-3);
        let lo = (x - h).max(0.0);
        (self.eval(x + h) - self.eval(lo)) / (x + h - lo)
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(Self::kl()),
            "chi2" => Ok(Self::chi2()),
            "hellinger_half" => Ok(Self::hellinger_half()),
            "hellinger_sq" => Ok(Self::hellinger_sq()),
            "tv" => Ok(Self::tv()),
            "reverse_kl" => Ok(Self::reverse_kl()),
            _ => match s.strip_prefix("power:") {
                Some(l) => {
                    let l: f64 = l.parse().map_err(|_| Error::Parse(format!("bad exponent in `{s}`")))?;
                    Self::power(l)
                }
                None => Err(Error::UnknownName(s.to_string())),
            },
        }
    }
}

/// All seven built-in generators, with `power:3` standing in for the family.
pub fn builtin_generators() -> Vec<Generator> {
    vec![
        Generator::kl(),
        Generator::chi2(),
        Generator::hellinger_half(),
        Generator::hellinger_sq(),
        Generator::tv(),
        Generator::power(3.0).expect("valid exponent"),
        Generator::reverse_kl(),
    ]
}

fn clamp_zero(v: f64) -> f64 {
    if v.abs() <= ZERO_CLAMP {
        0.0
    } else {
        v
    }
}

/// `D_f(P‖Q)` with the absolute-continuity convention; may be `+∞`.
pub fn eval_divergence(gen: &Generator, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    same_support(p, q)?;
    Ok(divergence_slices(gen, p.pmf(), q.pmf()))
}

/// [`eval_divergence`] on raw slices of equal length.
pub(crate) fn divergence_slices(gen: &Generator, p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&px, &qx) in p.iter().zip(q) {
        if qx == 0.0 {
            if px > 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        let term = if px == 0.0 {
            qx * gen.f_at_zero()
        } else {
            qx * gen.eval(px / qx)
        };
        if term == f64::INFINITY {
            return f64::INFINITY;
        }
        total += term;
    }
    clamp_zero(total)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(out_of_range("N", n as f64, "N >= 2"));
    }
    Ok(())
}

fn check_a(n: usize, a: f64) -> Result<f64> {
    let top = 1.0 - 1.0 / n as f64;
    if !(a >= -1e-12 && a <= top + 1e-12) {
        return Err(out_of_range("a", a, format!("[0, {top}]")));
    }
    Ok(a.clamp(0.0, top))
}

/// `g(a) = f(N(1 − a)) + (N − 1) f(Na/(N − 1))` on `[0, 1 − 1/N]`.
pub fn g_function(gen: &Generator, n: usize, a: f64) -> Result<f64> {
    check_n(n)?;
    let a = check_a(n, a)?;
    Ok(g_unchecked(gen, n as f64, a))
}

pub(crate) fn g_unchecked(gen: &Generator, n: f64, a: f64) -> f64 {
    gen.eval(n * (1.0 - a)) + (n - 1.0) * gen.eval(n * a / (n - 1.0))
}

/// `g'(a) = N [f'(Na/(N − 1)) − f'(N(1 − a))]`.
pub fn g_derivative(gen: &Generator, n: usize, a: f64) -> Result<f64> {
    check_n(n)?;
    let a = check_a(n, a)?;
    let nf = n as f64;
    let inner = nf * a / (nf - 1.0);
    match (gen.derivative(inner), gen.derivative(nf * (1.0 - a))) {
        (Some(d1), Some(d2)) => Ok(nf * (d1 - d2)),
        _ => Err(Error::Unsupported(format!(
            "generator `{}` has no derivative",
            gen.name()
        ))),
    }
}

/// Total variation distance `V(P, Q) = ½ Σ |p − q|`.
pub fn total_variation(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    p.total_variation(q)
}

/// Squared Hellinger distance `H² = Σ (√p − √q)² ∈ [0, 2]`.
pub fn hellinger_sq_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    same_support(p, q)?;
    Ok(p.pmf()
        .iter()
        .zip(q.pmf())
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum())
}

/// Kullback–Leibler divergence `D(P‖Q)`.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    eval_divergence(&Generator::kl(), p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn divergence_examples() {
        let v = eval_divergence(&Generator::chi2(), &d(&[0.5, 0.5]), &d(&[0.25, 0.75])).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let p = d(&[0.3, 0.2, 0.5]);
        for g in builtin_generators() {
            assert_eq!(eval_divergence(&g, &p, &p).unwrap(), 0.0, "{}", g.name());
        }
        let v = eval_divergence(&Generator::kl(), &d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    #[test]
    fn zero_mass_conventions() {
        let p = d(&[1.0, 0.0]);
        let q = d(&[0.5, 0.5]);
        let kl = eval_divergence(&Generator::kl(), &p, &q).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-15);
        assert_eq!(
            eval_divergence(&Generator::reverse_kl(), &p, &q).unwrap(),
            f64::INFINITY
        );
        let tv = eval_divergence(&Generator::tv(), &p, &q).unwrap();
        assert!((tv - 0.5).abs() < 1e-15);
    }

    #[test]
    fn support_mismatch() {
        assert!(matches!(
            eval_divergence(&Generator::kl(), &d(&[1.0]), &d(&[0.5, 0.5])),
            Err(Error::SupportMismatch { .. })
        ));
    }

    #[test]
    fn g_examples() {
        let chi2 = Generator::chi2();
        assert!((g_function(&chi2, 2, 0.25).unwrap() - 0.5).abs() < 1e-15);
        for n in 2..7 {
            let top = 1.0 - 1.0 / n as f64;
            for g in builtin_generators() {
                assert!(g_function(&g, n, top).unwrap().abs() < 1e-12);
            }
            // closed form N³/(N−1)·(1−1/N−a)² for chi2
            for i in 0..=10 {
                let a = top * i as f64 / 10.0;
                let closed = (n as f64).powi(3) / (n as f64 - 1.0) * (top - a).powi(2);
                assert!((g_function(&chi2, n, a).unwrap() - closed).abs() < 1e-9);
            }
        }
        let v = g_function(&Generator::kl(), 2, 0.0).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(g_function(&chi2, 2, 0.6).is_err());
        assert!(g_function(&chi2, 1, 0.0).is_err());
    }

    #[test]
    fn g_derivative_matches_difference_quotient() {
        for g in builtin_generators().into_iter().filter(|g| g.has_derivative()) {
            for n in [2usize, 3, 7] {
                let top = 1.0 - 1.0 / n as f64;
                for a in [0.1 * top, 0.5 * top, 0.9 * top] {
                    let h = 1e-6;
                    let fd = (g_function(&g, n, a + h).unwrap() - g_function(&g, n, a - h).unwrap()) / (2.0 * h);
                    let an = g_derivative(&g, n, a).unwrap();
                    assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "{}", g.name());
                }
            }
        }
        assert!(g_derivative(&Generator::tv(), 2, 0.1).is_err());
    }

    #[test]
    fn names_round_trip() {
        for name in BUILTIN_NAMES {
            assert_eq!(name.parse::<Generator>().unwrap().name(), name);
        }
        let p: Generator = "power:3".parse().unwrap();
        assert_eq!(p.power_exponent(), Some(3.0));
        assert!("power:0.5".parse::<Generator>().is_err());
        assert!(matches!("renyi".parse::<Generator>(), Err(Error::UnknownName(_))));
    }

    #[test]
    fn custom_generators_are_checked() {
        let ok = Generator::custom("sq", |x| (x - 1.0) * (x - 1.0), 1.0, None).unwrap();
        assert!(ok.is_strict());
        assert!((ok.slope(2.0) - 2.0).abs() < 1e-6);
        assert!(Generator::custom("shift", |x| x * x, 0.0, None).is_err());
        assert!(Generator::custom("concave", |x| 1.0 - x * x, 1.0, None).is_err());
        assert!(Generator::custom("sqrt", |x: f64| x.sqrt() - 1.0, -1.0, None).is_err());
    }

    fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2..=max_len)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(0.0f64..1.0, n),
                    prop::collection::vec(0.0f64..1.0, n),
                )
            })
            .prop_filter_map("zero mass", |(a, b)| {
                let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
                (sa > 1e-3 && sb > 1e-3)
                    .then(|| (a.iter().map(|x| x / sa).collect(), b.iter().map(|x| x / sb).collect()))
            })
    }

    proptest! {
        #[test]
        fn nonnegative((p, q) in pair(16)) {
            let (p, q) = (d(&p), d(&q));
            for g in builtin_generators() {
                prop_assert!(eval_divergence(&g, &p, &q).unwrap() >= 0.0, "{}", g.name());
            }
        }

        #[test]
        fn hellinger_factor_two((p, q) in pair(16)) {
            let (p, q) = (d(&p), d(&q));
            let half = eval_divergence(&Generator::hellinger_half(), &p, &q).unwrap();
            let sq = eval_divergence(&Generator::hellinger_sq(), &p, &q).unwrap();
            prop_assert!((sq - 2.0 * half).abs() <= 1e-12);
            prop_assert!((sq - hellinger_sq_distance(&p, &q).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn pinsker_le_cam_topsoe((p, q) in pair(16)) {
            let (p, q) = (d(&p), d(&q));
            let v = total_variation(&p, &q).unwrap();
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 2.0 * v * v - 1e-12);
            let h2 = hellinger_sq_distance(&p, &q).unwrap();
            prop_assert!(v <= h2.sqrt() * (1.0 - h2 / 4.0).max(0.0).sqrt() + 1e-12);
            let mid = p.mix(&q, 0.5).unwrap();
            let lhs = kl_divergence(&p, &mid).unwrap() + kl_divergence(&q, &mid).unwrap();
            let xlx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
            prop_assert!(lhs >= xlx(1.0 + v) + xlx(1.0 - v) - 1e-12);
        }

        #[test]
        fn g_monotone_and_convex(n in 2usize..9, idx in 0usize..7) {
            let g = &builtin_generators()[idx];
            let top = 1.0 - 1.0 / n as f64;
            let grid: Vec<f64> = (0..=40).map(|i| top * i as f64 / 40.0).collect();
            let vals: Vec<f64> = grid.iter().map(|&a| g_function(g, n, a).unwrap()).collect();
            for w in vals.windows(2) {
                prop_assert!(w[0] >= w[1] - 1e-12 || w[0].is_infinite());
            }
            for i in 1..grid.len() - 1 {
                if vals[i - 1].is_finite() {
                    prop_assert!(vals[i] <= 0.5 * (vals[i - 1] + vals[i + 1]) + 1e-12);
                }
            }
        }
    }
}
