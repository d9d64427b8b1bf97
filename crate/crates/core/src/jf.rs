//! `J_f = inf_Q (1/N) Σ_θ D_f(P_θ‖Q)` and its upper bounds.
//!
//! Closed forms:
//!
//! | generator        | minimizer `q`             | value                          |
//! |------------------|---------------------------|--------------------------------|
//! | `kl`             | `P̄`                       | `(1/N) Σ D(P_θ‖P̄)`             |
//! | `chi2`           | `∝ sqrt(Σ_θ p_θ²)`        | `((Σ_x sqrt(Σ_θ p_θ²))² − N)/N` |
//! | `hellinger_half` | `∝ u²`, `u = Σ_θ √p_θ`    | `1 − sqrt(Σ_x u²)/N`           |
//!
//! Any other generator goes through [`jf_numeric`], which solves the
//! separable optimality conditions exactly up to root-finding precision, or
//! through the piecewise-linear solver for `tv`.

use serde::{Deserialize, Serialize};

use crate::dist::{DiscreteDistribution, Ensemble};
use crate::error::{out_of_range, Error, Result};
use crate::fdiv::{divergence_slices, eval_divergence, Generator};
use crate::numeric::illinois;

/// Default duality-gap tolerance for [`jf_numeric`].
pub const DEFAULT_JF_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JfMethod {
    ClosedForm,
    Numeric,
}

impl JfMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ClosedForm => "closed_form",
            Self::Numeric => "numeric",
        }
    }
}

/// A minimizing `Q` and the objective value there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JfResult {
    /// `(1/N) Σ_θ D_f(P_θ‖minimizer)`, evaluated exactly; may be `+∞`.
    pub value: f64,
    pub minimizer: DiscreteDistribution,
    pub method: JfMethod,
    /// Frank–Wolfe duality gap at the minimizer (0 for closed forms).
    pub gap: f64,
}

/// `(1/N) Σ_θ D_f(P_θ‖Q)`, ignoring the ensemble prior.
pub fn average_divergence(gen: &Generator, ens: &Ensemble, q: &DiscreteDistribution) -> Result<f64> {
    let mut total = 0.0;
    for m in ens.members() {
        total += eval_divergence(gen, m, q)?;
    }
    Ok(total / ens.len() as f64)
}

fn finish(gen: &Generator, ens: &Ensemble, q: Vec<f64>, method: JfMethod, gap: f64) -> Result<JfResult> {
    let minimizer = DiscreteDistribution::from_weights(&q)?;
    let value = average_divergence(gen, ens, &minimizer)?;
    Ok(JfResult {
        value,
        minimizer,
        method,
        gap,
    })
}

/// Closed-form minimizer for `kl`, `chi2` and `hellinger_half`.
pub fn jf_closed_form(gen: &Generator, ens: &Ensemble) -> Result<JfResult> {
    let s = ens.support_size();
    let q: Vec<f64> = match gen.name() {
        "kl" => ens.mixture().pmf().to_vec(),
        "chi2" => (0..s)
            .map(|x| ens.members().iter().map(|m| m.get(x) * m.get(x)).sum::<f64>().sqrt())
            .collect(),
        "hellinger_half" => (0..s)
            .map(|x| {
                let u: f64 = ens.members().iter().map(|m| m.get(x).sqrt()).sum();
                u * u
            })
            .collect(),
        other => return Err(Error::Unsupported(format!("no closed form for generator `{other}`"))),
    };
    finish(gen, ens, q, JfMethod::ClosedForm, 0.0)
}

/// Per-point objective `φ_x(y) = (1/N) Σ_θ y f(p_θ(x)/y)` and its derivative.
struct Column<'a> {
    gen: &'a Generator,
    p: Vec<f64>,
}

impl Column<'_> {
    /// `φ'_x(y) = (1/N) Σ_θ ψ(p_θ/y)` with `ψ(t) = f(t) − t f'(t)`.
    fn slope(&self, y: f64) -> f64 {
        let n = self.p.len() as f64;
        self.p
            .iter()
            .map(|&p| {
                let t = p / y;
                if t == 0.0 {
                    self.gen.f_at_zero()
                } else {
                    self.gen.eval(t) - t * self.gen.slope(t)
                }
            })
            .sum::<f64>()
            / n
    }

    /// Solves `φ'_x(y) = λ` for `y > 0`, starting from `y0`.
    fn solve(&self, lambda: f64, y0: f64) -> Result<f64> {
        let h = |ly: f64| self.slope(ly.exp()) - lambda;
        let l0 = y0.ln();
        let h0 = h(l0);
        if h0 == 0.0 {
            return Ok(y0);
        }
        // φ' is nondecreasing in y: walk outwards until the sign flips
        let dir = if h0 > 0.0 { -1.0 } else { 1.0 };
        let mut step = 1.0;
        let mut far = l0 + dir * step;
        loop {
            let hf = h(far);
            if hf == 0.0 {
                return Ok(far.exp());
            }
            if hf.signum() != h0.signum() {
                break;
            }
            if far.abs() > 700.0 || !hf.is_finite() {
                return Ok(far.clamp(-700.0, 700.0).exp());
            }
            step *= 2.0;
            far = l0 + dir * step;
        }
        let (lo, hi) = if dir < 0.0 { (far, l0) } else { (l0, far) };
        Ok(illinois(h, lo, hi, 1e-15, 0.0, 400)?.exp())
    }
}

/// Minimizes `Q ↦ (1/N) Σ_θ D_f(P_θ‖Q)` over the simplex.
///
/// `Q` lives on the union of the member supports (mass elsewhere never
/// helps). At the optimum `φ'_x(q_x)` is the same for every `x`; the common
/// value `λ` is found by an outer root search on `Σ_x q_x(λ) = 1` and each
/// `q_x(λ)` by an inner one. The returned `gap` is the Frank–Wolfe duality
/// gap `Σ_x q_x φ'_x(q_x) − min_x φ'_x(q_x)`, which bounds the distance to
/// the optimum from above; exceeding `tol` is an error.
pub fn jf_numeric(gen: &Generator, ens: &Ensemble, tol: f64) -> Result<JfResult> {
    if !(tol > 0.0) {
        return Err(out_of_range("tol", tol, "(0, ∞)"));
    }
    if gen.is_tv() {
        return jf_tv(ens);
    }
    let s = ens.support_size();
    let union = ens.union_support();
    if gen.f_at_zero() == f64::INFINITY && union.len() != ens.common_support().len() {
        // any Q either misses a member's support or pays f(0+) = ∞
        return finish(gen, ens, ens.mixture().pmf().to_vec(), JfMethod::Numeric, 0.0);
    }
    let mixture = ens.mixture();
    let columns: Vec<Column> = union
        .iter()
        .map(|&x| Column {
            gen,
            p: ens.members().iter().map(|m| m.get(x)).collect(),
        })
        .collect();
    let start: Vec<f64> = union.iter().map(|&x| mixture.get(x)).collect();
    let slopes: Vec<f64> = columns.iter().zip(&start).map(|(c, &y)| c.slope(y)).collect();
    let lam_lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let lam_hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let solve_all =
        |lambda: f64| -> Result<Vec<f64>> { columns.iter().zip(&start).map(|(c, &y0)| c.solve(lambda, y0)).collect() };
    let y = if lam_hi - lam_lo <= 1e-15 * (1.0 + lam_lo.abs()) {
        start.clone()
    } else {
        let mut failure = None;
        let mass = |lambda: f64| match solve_all(lambda) {
            Ok(y) => y.iter().sum::<f64>() - 1.0,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let lambda = illinois(mass, lam_lo, lam_hi, 1e-15 * (1.0 + lam_hi.abs()), 1e-15, 400);
        if let Some(e) = failure {
            return Err(e);
        }
        match lambda {
            Ok(l) => solve_all(l)?,
            Err(_) => start.clone(),
        }
    };
    let total: f64 = y.iter().sum();
    let mut q = vec![0.0; s];
    for (&x, &yx) in union.iter().zip(&y) {
        q[x] = yx / total;
    }
    let grads: Vec<f64> = columns.iter().zip(&union).map(|(c, &x)| c.slope(q[x])).collect();
    let mean: f64 = union.iter().zip(&grads).map(|(&x, g)| q[x] * g).sum();
    let min = grads.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = (mean - min).max(0.0);
    if !(gap <= tol) {
        return Err(Error::NonConvergence {
            routine: "J_f solver",
            iterations: 400,
            gap,
        });
    }
    finish(gen, ens, q, JfMethod::Numeric, gap)
}

/// Exact `J_tv` by filling the cheapest linear pieces of each per-point
/// objective until the mass reaches 1.
///
/// Between consecutive sorted values `b_(k) < y < b_(k+1)` of `{p_θ(x)}` the
/// per-point objective has slope `(2k − N)/(2N)`.
fn jf_tv(ens: &Ensemble) -> Result<JfResult> {
    let n = ens.len();
    let s = ens.support_size();
    let mut pieces: Vec<(f64, usize, f64)> = Vec::new();
    for x in 0..s {
        let mut b: Vec<f64> = ens.members().iter().map(|m| m.get(x)).collect();
        b.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for (k, &bk) in b.iter().enumerate() {
            let len = bk - prev;
            if len > 0.0 {
                let slope = (2.0 * k as f64 - n as f64) / (2.0 * n as f64);
                pieces.push((slope, x, len));
            }
            prev = bk;
        }
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut q = vec![0.0; s];
    let mut remaining = 1.0;
    for (_, x, len) in pieces {
        if remaining <= 0.0 {
            break;
        }
        let take = len.min(remaining);
        q[x] += take;
        remaining -= take;
    }
    if remaining > 1e-12 {
        return Err(Error::NonConvergence {
            routine: "J_tv solver",
            iterations: 0,
            gap: remaining,
        });
    }
    // The piecewise-linear optimum may put no mass where some member does,
    // which the absolute-continuity convention prices at +∞; the infimum is
    // approached by an arbitrarily small admixture of P̄.
    let blend = 1e-12;
    for (qx, px) in q.iter_mut().zip(ens.mixture().pmf()) {
        *qx = (1.0 - blend) * *qx + blend * px;
    }
    finish(&Generator::tv(), ens, q, JfMethod::Numeric, blend)
}

/// Closed form when available, the exact piecewise-linear solver for `tv`,
/// and [`jf_numeric`] at [`DEFAULT_JF_TOL`] otherwise.
pub fn jf_best(gen: &Generator, ens: &Ensemble) -> Result<JfResult> {
    match gen.name() {
        "kl" | "chi2" | "hellinger_half" => jf_closed_form(gen, ens),
        "hellinger_sq" => {
            let half = jf_closed_form(&Generator::hellinger_half(), ens)?;
            finish(gen, ens, half.minimizer.pmf().to_vec(), JfMethod::ClosedForm, 0.0)
        }
        _ => jf_numeric(gen, ens, DEFAULT_JF_TOL),
    }
}

/// The three elementary upper bounds on `J_f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleChain {
    /// `(1/N) Σ_θ D_f(P_θ‖P̄)`.
    pub to_mixture: f64,
    /// `(1/N²) Σ_{θ,θ'} D_f(P_θ‖P_θ')`.
    pub pairwise_average: f64,
    /// `max_{θ,θ'} D_f(P_θ‖P_θ')`.
    pub pairwise_max: f64,
}

/// Evaluates the chain `J_f ≤ avg to P̄ ≤ pairwise average ≤ pairwise max`.
pub fn simple_chain(gen: &Generator, ens: &Ensemble) -> Result<SimpleChain> {
    let to_mixture = average_divergence(gen, ens, &ens.mixture())?;
    let n = ens.len();
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = eval_divergence(gen, ens.member(i), ens.member(j))?;
            sum += d;
            max = max.max(d);
        }
    }
    Ok(SimpleChain {
        to_mixture,
        pairwise_average: sum / (n * n) as f64,
        pairwise_max: max,
    })
}

/// Candidate centres `Q_α` and an optional member-to-candidate map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringFamily {
    pub candidates: Vec<DiscreteDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<usize>>,
}

impl CoveringFamily {
    pub fn new(candidates: Vec<DiscreteDistribution>, assignment: Option<Vec<usize>>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(a) = &assignment {
            if let Some(&bad) = a.iter().find(|&&j| j >= candidates.len()) {
                return Err(out_of_range(
                    "assignment",
                    bad as f64,
                    format!("[0, {})", candidates.len()),
                ));
            }
        }
        Ok(Self { candidates, assignment })
    }

    /// `M`.
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// A covering bound with the data it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverBound {
    /// Upper bound on `J_f`; may be `+∞`.
    pub value: f64,
    pub assignment: Vec<usize>,
    /// `D_f(P_θ‖Q_{j(θ)})` per member.
    pub errors: Vec<f64>,
    /// `max_θ min_α D_f(P_θ‖Q_α)`.
    pub max_min_error: f64,
}

/// `max_θ min_α D_f(P_θ‖Q_α)` and the argmin map (ties to the lowest index).
pub fn max_min_error(gen: &Generator, ens: &Ensemble, fam: &CoveringFamily) -> Result<(f64, Vec<usize>)> {
    let mut worst: f64 = 0.0;
    let mut argmin = Vec::with_capacity(ens.len());
    for m in ens.members() {
        let mut best = (f64::INFINITY, 0);
        for (a, c) in fam.candidates.iter().enumerate() {
            let d = eval_divergence(gen, m, c)?;
            if d < best.0 {
                best = (d, a);
            }
        }
        worst = worst.max(best.0);
        argmin.push(best.1);
    }
    Ok((worst, argmin))
}

/// `(1/N) Σ_θ Σ_x (q_{j(θ)}/M) f(M p_θ/q_{j(θ)}) + (1 − 1/M) f(0+)`.
///
/// Without an explicit assignment each member goes to its closest candidate.
pub fn covering_upper_bound(gen: &Generator, ens: &Ensemble, fam: &CoveringFamily) -> Result<CoverBound> {
    for c in &fam.candidates {
        crate::dist::same_support(ens.member(0), c)?;
    }
    let (max_min, argmin) = max_min_error(gen, ens, fam)?;
    let assignment = match &fam.assignment {
        Some(a) if a.len() != ens.len() => {
            return Err(Error::PriorLength {
                expected: ens.len(),
                got: a.len(),
            })
        }
        Some(a) => a.clone(),
        None => argmin,
    };
    let m = fam.len() as f64;
    let mut total = 0.0;
    let mut errors = Vec::with_capacity(ens.len());
    for (member, &j) in ens.members().iter().zip(&assignment) {
        let q = fam.candidates[j].pmf();
        errors.push(divergence_slices(gen, member.pmf(), q));
        // Σ_x (q/M) f(M p/q) = (1/M) Σ_x q f((M p)/q)
        let scaled: Vec<f64> = member.pmf().iter().map(|p| m * p).collect();
        total += divergence_term_sum(gen, &scaled, q) / m;
    }
    let tail = if fam.len() == 1 {
        0.0
    } else {
        (1.0 - 1.0 / m) * gen.f_at_zero()
    };
    let value = total / ens.len() as f64 + tail;
    Ok(CoverBound {
        value,
        assignment,
        errors,
        max_min_error: max_min,
    })
}

/// `Σ_x q f(a/q)` with the same zero conventions as a divergence but
/// without clamping (`a` need not be a probability vector).
fn divergence_term_sum(gen: &Generator, a: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&ax, &qx) in a.iter().zip(q) {
        if qx == 0.0 {
            if ax > 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        let term = if ax == 0.0 {
            qx * gen.f_at_zero()
        } else {
            qx * gen.eval(ax / qx)
        };
        if term == f64::INFINITY {
            return f64::INFINITY;
        }
        total += term;
    }
    total
}

/// Covering bounds specialized to particular generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverKind {
    Kl,
    Chi2,
    PowerL(f64),
    HellingerSq,
}

impl CoverKind {
    /// Parses `kl`, `chi2`, `hellinger_sq` or `power:l`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "kl" => Ok(Self::Kl),
            "chi2" => Ok(Self::Chi2),
            "hellinger_sq" => Ok(Self::HellingerSq),
            _ => {
                let gen: Generator = name.parse()?;
                match gen.power_exponent() {
                    Some(l) => Ok(Self::PowerL(l)),
                    None => Err(Error::UnknownName(name.to_string())),
                }
            }
        }
    }

    /// The generator whose divergence the kind is measured in.
    pub fn generator(&self) -> Generator {
        match *self {
            Self::Kl => Generator::kl(),
            Self::Chi2 => Generator::chi2(),
            Self::PowerL(l) => Generator::power(l).expect("validated exponent"),
            Self::HellingerSq => Generator::hellinger_sq(),
        }
    }
}

/// Closed-form covering bound from `M` centres and approximation error `e`:
/// `kl → ln M + e`, `chi2 → M(e + 1) − 1`, `power_l → M^{l−1}(e + 1) − 1`,
/// `hellinger_sq → 2 − (2 − e)/√M`.
pub fn covering_specialization(kind: CoverKind, m: usize, approx_error: f64) -> Result<f64> {
    if m == 0 {
        return Err(out_of_range("M", 0.0, "M >= 1"));
    }
    if approx_error.is_nan() || approx_error < 0.0 {
        return Err(out_of_range("approx_error", approx_error, "[0, ∞]"));
    }
    let mf = m as f64;
    let e = approx_error;
    Ok(match kind {
        CoverKind::Kl => mf.ln() + e,
        CoverKind::Chi2 => mf * (e + 1.0) - 1.0,
        CoverKind::PowerL(l) => {
            if !(l > 1.0) {
                return Err(out_of_range("l", l, "(1, ∞)"));
            }
            mf.powf(l - 1.0) * (e + 1.0) - 1.0
        }
        CoverKind::HellingerSq => 2.0 - (2.0 - e) / mf.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdiv::builtin_generators;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn singular() -> Ensemble {
        Ensemble::from_pmfs(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    /// `min_a (1/N) Σ D_f(P_θ‖(a, 1−a))` on a grid of step 1e-3.
    fn grid_two_point(gen: &Generator, ens: &Ensemble) -> f64 {
        (0..=1000)
            .map(|i| {
                let a = i as f64 / 1000.0;
                let q = DiscreteDistribution::new(vec![a, 1.0 - a]).unwrap();
                average_divergence(gen, ens, &q).unwrap()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn closed_form_examples() {
        let r = jf_closed_form(&Generator::chi2(), &singular()).unwrap();
        assert_eq!(r.minimizer.pmf(), &[0.5, 0.5]);
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!((grid_two_point(&Generator::chi2(), &singular()) - 1.0).abs() < 1e-12);

        let r = jf_closed_form(&Generator::kl(), &singular()).unwrap();
        assert!((r.value - LN_2).abs() < 1e-15);

        let r = jf_closed_form(&Generator::hellinger_half(), &singular()).unwrap();
        assert_eq!(r.minimizer.pmf(), &[0.5, 0.5]);
        assert!((r.value - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);

        let same = Ensemble::from_pmfs(vec![vec![0.2, 0.3, 0.5]; 3]).unwrap();
        for name in ["kl", "chi2", "hellinger_half"] {
            let r = jf_closed_form(&name.parse().unwrap(), &same).unwrap();
            assert!(r.value.abs() < 1e-15);
            for (a, b) in r.minimizer.pmf().iter().zip([0.2, 0.3, 0.5]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(jf_closed_form(&Generator::tv(), &same).is_err());
    }

    #[test]
    fn numeric_examples() {
        let cube = Generator::power(3.0).unwrap();
        let same = Ensemble::from_pmfs(vec![vec![0.6, 0.4]; 2]).unwrap();
        assert!(jf_numeric(&cube, &same, DEFAULT_JF_TOL).unwrap().value.abs() < 1e-12);

        let r = jf_numeric(&cube, &singular(), DEFAULT_JF_TOL).unwrap();
        let grid = grid_two_point(&cube, &singular());
        assert!(r.value <= grid + 1e-12);
        assert!(grid - r.value < 1e-5);
        // symmetric pair: q = (1/2, 1/2), value (1/2)(2³·½ − 1)·... = 3
        assert!((r.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn tv_solver_matches_grid() {
        let e = Ensemble::from_pmfs(vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap();
        let r = jf_numeric(&Generator::tv(), &e, DEFAULT_JF_TOL).unwrap();
        assert!((r.value - grid_two_point(&Generator::tv(), &e)).abs() < 1e-12);
        let r = jf_numeric(&Generator::tv(), &singular(), DEFAULT_JF_TOL).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn reverse_kl_needs_common_support() {
        let r = jf_numeric(&Generator::reverse_kl(), &singular(), DEFAULT_JF_TOL).unwrap();
        assert_eq!(r.value, f64::INFINITY);
        let e = Ensemble::from_pmfs(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let r = jf_numeric(&Generator::reverse_kl(), &e, DEFAULT_JF_TOL).unwrap();
        // optimum is proportional to the geometric mean
        let g: Vec<f64> = vec![(0.9f64 * 0.2).sqrt(), (0.1f64 * 0.8).sqrt()];
        let z: f64 = g.iter().sum();
        assert!((r.minimizer.get(0) - g[0] / z).abs() < 1e-9);
        assert!((r.value + z.ln()).abs() < 1e-12);
    }

    #[test]
    fn chain_examples() {
        let same = Ensemble::from_pmfs(vec![vec![0.2, 0.8]; 3]).unwrap();
        let c = simple_chain(&Generator::kl(), &same).unwrap();
        assert_eq!((c.to_mixture, c.pairwise_average, c.pairwise_max), (0.0, 0.0, 0.0));

        let pair = Ensemble::from_pmfs(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        let c = simple_chain(&Generator::chi2(), &pair).unwrap();
        assert!((c.pairwise_average - 2.0 / 3.0).abs() < 1e-12);

        let c = simple_chain(&Generator::kl(), &singular()).unwrap();
        assert!((c.to_mixture - LN_2).abs() < 1e-15);
        assert_eq!(c.pairwise_average, f64::INFINITY);
        assert_eq!(c.pairwise_max, f64::INFINITY);
    }

    #[test]
    fn covering_examples() {
        let e = Ensemble::from_pmfs(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.1, 0.8], vec![0.3, 0.4, 0.3]]).unwrap();
        let fam = CoveringFamily::new(e.members().to_vec(), Some(vec![0, 1, 2])).unwrap();
        let b = covering_upper_bound(&Generator::kl(), &e, &fam).unwrap();
        assert!((b.value - 3f64.ln()).abs() < 1e-12);
        assert!(b.value >= jf_closed_form(&Generator::kl(), &e).unwrap().value);

        let half = DiscreteDistribution::uniform(2).unwrap();
        let fam = CoveringFamily::new(vec![half], None).unwrap();
        let b = covering_upper_bound(&Generator::chi2(), &singular(), &fam).unwrap();
        assert!((b.value - 1.0).abs() < 1e-15);
        assert!((covering_specialization(CoverKind::Chi2, 1, b.max_min_error).unwrap() - 1.0).abs() < 1e-15);

        let same = Ensemble::from_pmfs(vec![vec![0.2, 0.8]; 2]).unwrap();
        let fam = CoveringFamily::new(vec![same.member(0).clone()], None).unwrap();
        for g in builtin_generators() {
            assert!(covering_upper_bound(&g, &same, &fam).unwrap().value.abs() < 1e-12);
        }

        let point = DiscreteDistribution::point_mass(2, 0).unwrap();
        let fam = CoveringFamily::new(vec![point], None).unwrap();
        let b = covering_upper_bound(&Generator::kl(), &singular(), &fam).unwrap();
        assert_eq!(b.value, f64::INFINITY);
        assert!(CoveringFamily::new(vec![], None).is_err());
    }

    #[test]
    fn specialization_examples() {
        assert_eq!(covering_specialization(CoverKind::Kl, 1, 0.0).unwrap(), 0.0);
        assert_eq!(covering_specialization(CoverKind::Chi2, 4, 1.0).unwrap(), 7.0);
        assert_eq!(covering_specialization(CoverKind::HellingerSq, 4, 0.0).unwrap(), 1.0);
        assert!(covering_specialization(CoverKind::Kl, 0, 0.0).is_err());
        assert_eq!(CoverKind::parse("power:3").unwrap(), CoverKind::PowerL(3.0));
        assert!(CoverKind::parse("tv").is_err());
    }

    fn ensemble(max_n: usize, max_s: usize) -> impl Strategy<Value = Ensemble> {
        (2usize..=max_n, 1usize..=max_s)
            .prop_flat_map(|(n, s)| prop::collection::vec(prop::collection::vec(0.0f64..1.0, s), n))
            .prop_filter_map("degenerate", |rows| {
                let members = rows
                    .iter()
                    .map(|r| DiscreteDistribution::from_weights(r).ok())
                    .collect::<Option<Vec<_>>>()?;
                Ensemble::new(members, None).ok()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn closed_forms_match_numeric(e in ensemble(5, 6)) {
            for name in ["kl", "chi2", "hellinger_half"] {
                let g: Generator = name.parse().unwrap();
                let c = jf_closed_form(&g, &e).unwrap();
                let n = jf_numeric(&g, &e, DEFAULT_JF_TOL).unwrap();
                prop_assert!((c.value - n.value).abs() <= 1e-6, "{name}: {} vs {}", c.value, n.value);
            }
        }

        #[test]
        fn compensation_identity(e in ensemble(5, 6), raw in prop::collection::vec(0.05f64..1.0, 6)) {
            let q = DiscreteDistribution::from_weights(&raw[..e.support_size()]).unwrap();
            let kl = Generator::kl();
            let n = e.len() as f64;
            let lhs = n * average_divergence(&kl, &e, &q).unwrap();
            let pbar = e.mixture();
            let rhs = n * average_divergence(&kl, &e, &pbar).unwrap()
                + n * eval_divergence(&kl, &pbar, &q).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn chain_is_ordered(e in ensemble(4, 5)) {
            for g in builtin_generators() {
                let c = simple_chain(&g, &e).unwrap();
                let j = jf_best(&g, &e).unwrap().value;
                prop_assert!(c.pairwise_average >= c.to_mixture - 1e-12, "{}", g.name());
                prop_assert!(c.pairwise_max >= c.pairwise_average - 1e-12);
                prop_assert!(c.to_mixture >= j - 1e-9 || j.is_infinite());
            }
            let c = simple_chain(&Generator::kl(), &e).unwrap();
            let j = jf_closed_form(&Generator::kl(), &e).unwrap().value;
            prop_assert!((c.to_mixture - j).abs() <= 1e-12);
        }

        #[test]
        fn covers_dominate_jf(e in ensemble(4, 5), extra in ensemble(3, 5)) {
            let s = e.support_size();
            let cands: Vec<DiscreteDistribution> = extra
                .members()
                .iter()
                .map(|m| {
                    let mut w: Vec<f64> = m.pmf().iter().cycle().take(s).copied().collect();
                    w.iter_mut().for_each(|x| *x += 0.05);
                    DiscreteDistribution::from_weights(&w).unwrap()
                })
                .collect();
            let fam = CoveringFamily::new(cands, None).unwrap();
            for kind in [CoverKind::Kl, CoverKind::Chi2, CoverKind::PowerL(3.0), CoverKind::HellingerSq] {
                let g = kind.generator();
                let j = jf_best(&g, &e).unwrap().value;
                let b = covering_upper_bound(&g, &e, &fam).unwrap();
                let spec = covering_specialization(kind, fam.len(), b.max_min_error).unwrap();
                prop_assert!(b.value >= j - 1e-9, "{:?}", kind);
                prop_assert!(spec >= b.value - 1e-9, "{:?}", kind);
            }
        }
    }
}
