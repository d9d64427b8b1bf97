//! Exact testing risks on a finite ensemble.
//!
//! The Bayes risk under prior `w` is `r̄_w = 1 − Σ_x max_θ w_θ p_θ(x)`,
//! attained by the MAP test. The minimax risk `r` is bounded below by every
//! `r̄_w`; [`minimax_risk`] computes `max_w r̄_w` as a linear program and
//! certifies it with the dual program over randomized tests.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::Serialize;

use crate::dist::Ensemble;
use crate::error::{out_of_range, Error, Result};

/// Default tolerance for [`minimax_risk`].
pub const DEFAULT_MINIMAX_TOL: f64 = 1e-6;

/// A deterministic test: the member chosen at each sample point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestAssignment {
    pub choice: Vec<usize>,
}

impl TestAssignment {
    /// Checks that every entry names a member of an `n`-member ensemble.
    pub fn new(choice: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&bad) = choice.iter().find(|&&c| c >= n) {
            return Err(out_of_range("choice", bad as f64, format!("[0, {n})")));
        }
        Ok(Self { choice })
    }
}

/// `r̄_w = 1 − Σ_x max_θ w_θ p_θ(x)` under the ensemble's prior.
pub fn bayes_risk_exact(ens: &Ensemble) -> f64 {
    let w = ens.prior();
    let mut hit = 0.0;
    for x in 0..ens.support_size() {
        hit += ens
            .members()
            .iter()
            .zip(w)
            .map(|(m, &wt)| wt * m.get(x))
            .fold(0.0, f64::max);
    }
    (1.0 - hit).clamp(0.0, 1.0)
}

/// The MAP test `T(x) = argmax_θ w_θ p_θ(x)`, ties going to the lowest index.
pub fn map_test(ens: &Ensemble) -> TestAssignment {
    let w = ens.prior();
    let choice = (0..ens.support_size())
        .map(|x| {
            let mut best = 0;
            let mut best_val = w[0] * ens.member(0).get(x);
            for (theta, m) in ens.members().iter().enumerate().skip(1) {
                let v = w[theta] * m.get(x);
                if v > best_val {
                    best = theta;
                    best_val = v;
                }
            }
            best
        })
        .collect();
    TestAssignment { choice }
}

/// Per-member error probabilities `P_θ{T ≠ θ}`.
pub fn member_errors(ens: &Ensemble, test: &TestAssignment) -> Result<Vec<f64>> {
    check_test(ens, test)?;
    Ok(ens
        .members()
        .iter()
        .enumerate()
        .map(|(theta, m)| {
            let correct: f64 = test
                .choice
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == theta)
                .map(|(x, _)| m.get(x))
                .sum();
            (1.0 - correct).max(0.0)
        })
        .collect())
}

/// Average error `Σ_θ w_θ P_θ{T ≠ θ}` of a deterministic test.
pub fn error_probability(ens: &Ensemble, test: &TestAssignment) -> Result<f64> {
    check_test(ens, test)?;
    let correct: f64 = test
        .choice
        .iter()
        .enumerate()
        .map(|(x, &c)| ens.prior()[c] * ens.member(c).get(x))
        .sum();
    Ok((1.0 - correct).clamp(0.0, 1.0))
}

fn check_test(ens: &Ensemble, test: &TestAssignment) -> Result<()> {
    if test.choice.len() != ens.support_size() {
        return Err(Error::SupportMismatch {
            left: test.choice.len(),
            right: ens.support_size(),
        });
    }
    TestAssignment::new(test.choice.clone(), ens.len()).map(|_| ())
}

/// The value `max_w r̄_w` with its certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxRisk {
    /// `r̄_w` recomputed exactly at the witness prior.
    pub value: f64,
    /// Least-favourable prior (among optimal priors, one maximizing `min_θ w_θ`).
    pub prior: Vec<f64>,
    /// Worst-case error of the best randomized test; an upper bound on `max_w r̄_w`.
    pub randomized_upper: f64,
    /// `randomized_upper − value`.
    pub gap: f64,
    /// MAP test for the witness prior.
    pub map_test: TestAssignment,
    /// `max_θ P_θ{T ≠ θ}` for that MAP test; an upper bound on `r`.
    pub map_worst_case: f64,
}

fn lp_error(e: minilp::Error) -> Error {
    Error::LinearProgram(e.to_string())
}

/// Solves `max_w r̄_w` over the prior simplex.
///
/// Returns an error if the primal value and the randomized-test dual differ by
/// more than `tol`.
pub fn minimax_risk(ens: &Ensemble, tol: f64) -> Result<MinimaxRisk> {
    if !(tol > 0.0) {
        return Err(out_of_range("tol", tol, "(0, ∞)"));
    }
    let n = ens.len();
    let s = ens.support_size();

    // primal: minimize Σ t_x subject to t_x ≥ w_θ p_θ(x), Σ w = 1
    let build = |direction, t_cost| {
        let mut lp = Problem::new(direction);
        let w: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let t: Vec<_> = (0..s).map(|_| lp.add_var(t_cost, (0.0, 1.0))).collect();
        for (x, &tx) in t.iter().enumerate() {
            for (theta, m) in ens.members().iter().enumerate() {
                let p = m.get(x);
                if p > 0.0 {
                    lp.add_constraint([(tx, 1.0), (w[theta], -p)], ComparisonOp::Ge, 0.0);
                }
            }
        }
        lp.add_constraint(w.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
        (lp, w, t)
    };
    let (lp, _, _) = build(OptimizationDirection::Minimize, 1.0);
    let mass = lp.solve().map_err(lp_error)?.objective();

    // among optimal priors, maximize the smallest weight
    let (mut lp, w, t) = build(OptimizationDirection::Maximize, 0.0);
    let floor = lp.add_var(1.0, (0.0, 1.0));
    for &v in &w {
        lp.add_constraint([(v, 1.0), (floor, -1.0)], ComparisonOp::Ge, 0.0);
    }
    lp.add_constraint(
        t.iter().map(|&v| (v, 1.0)),
        ComparisonOp::Le,
        mass + 1e-12 * (1.0 + s as f64),
    );
    let sol = lp.solve().map_err(lp_error)?;
    let raw: Vec<f64> = w.iter().map(|&v| sol[v].max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    let prior: Vec<f64> = raw.iter().map(|v| v / total).collect();

    let witness = ens.with_prior(prior.clone())?;
    let value = bayes_risk_exact(&witness);
    let test = map_test(&witness);
    let map_worst_case = member_errors(&witness, &test)?.into_iter().fold(0.0, f64::max);

    let randomized_upper = randomized_minimax(ens)?;
    let gap = randomized_upper - value;
    if gap > tol {
        return Err(Error::NonConvergence {
            routine: "minimax risk",
            iterations: 1,
            gap,
        });
    }
    Ok(MinimaxRisk {
        value,
        prior,
        randomized_upper,
        gap: gap.max(0.0),
        map_test: test,
        map_worst_case,
    })
}

/// `min_δ max_θ (1 − Σ_x p_θ(x) δ(θ | x))` over randomized tests `δ`.
fn randomized_minimax(ens: &Ensemble) -> Result<f64> {
    let n = ens.len();
    let s = ens.support_size();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let z = lp.add_var(1.0, (0.0, 1.0));
    let delta: Vec<Vec<_>> = (0..s)
        .map(|_| (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect())
        .collect();
    for row in &delta {
        lp.add_constraint(row.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    }
    for (theta, m) in ens.members().iter().enumerate() {
        // z + Σ_x p_θ(x) δ(θ|x) ≥ 1
        let mut row = vec![(z, 1.0)];
        row.extend((0..s).filter(|&x| m.get(x) > 0.0).map(|x| (delta[x][theta], m.get(x))));
        lp.add_constraint(row, ComparisonOp::Ge, 1.0);
    }
    let sol = lp.solve().map_err(lp_error)?;
    Ok(sol[z].clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DiscreteDistribution;
    use proptest::prelude::*;

    fn pair() -> Ensemble {
        Ensemble::from_pmfs(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap()
    }

    #[test]
    fn bayes_examples() {
        assert!((bayes_risk_exact(&pair()) - 0.25).abs() < 1e-15);
        let p = vec![0.2, 0.3, 0.5];
        for n in 2..6 {
            let e = Ensemble::from_pmfs(vec![p.clone(); n]).unwrap();
            assert!((bayes_risk_exact(&e) - (1.0 - 1.0 / n as f64)).abs() < 1e-15);
            assert!(map_test(&e).choice.iter().all(|&c| c == 0));
        }
        let e = pair().with_prior(vec![1.0, 0.0]).unwrap();
        assert_eq!(bayes_risk_exact(&e), 0.0);
        assert_eq!(map_test(&e).choice, vec![0, 0]);
        assert_eq!(map_test(&pair()).choice, vec![0, 1]);
    }

    #[test]
    fn minimax_examples() {
        let r = minimax_risk(&pair(), DEFAULT_MINIMAX_TOL).unwrap();
        assert!((r.value - 0.25).abs() < 1e-9);
        assert!((r.prior[0] - 0.5).abs() < 1e-9);
        assert!(r.gap <= DEFAULT_MINIMAX_TOL);

        let same = Ensemble::from_pmfs(vec![vec![0.4, 0.6]; 3]).unwrap();
        let r = minimax_risk(&same, DEFAULT_MINIMAX_TOL).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-9);

        let singular = Ensemble::from_pmfs(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let r = minimax_risk(&singular, DEFAULT_MINIMAX_TOL).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert_eq!(r.map_worst_case, 0.0);

        assert!(minimax_risk(&pair(), 0.0).is_err());
    }

    #[test]
    fn minimax_matches_prior_grid() {
        let e = Ensemble::from_pmfs(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]]).unwrap();
        let grid_best = (0..=10_000)
            .map(|i| {
                let a = i as f64 / 10_000.0;
                bayes_risk_exact(&e.with_prior(vec![a, 1.0 - a]).unwrap())
            })
            .fold(0.0, f64::max);
        let r = minimax_risk(&e, DEFAULT_MINIMAX_TOL).unwrap();
        assert!(r.value >= grid_best - 1e-9);
        assert!(r.value <= grid_best + 1e-4);
    }

    #[test]
    fn bad_test_rejected() {
        let e = pair();
        assert!(error_probability(&e, &TestAssignment { choice: vec![0] }).is_err());
        assert!(TestAssignment::new(vec![0, 2], 2).is_err());
    }

    fn ensemble_strategy() -> impl Strategy<Value = (Ensemble, Vec<f64>, Vec<f64>)> {
        (2usize..=5, 1usize..=8)
            .prop_flat_map(|(n, s)| {
                (
                    prop::collection::vec(prop::collection::vec(0.0f64..1.0, s), n),
                    prop::collection::vec(0.01f64..1.0, n),
                    prop::collection::vec(0.01f64..1.0, n),
                )
            })
            .prop_filter_map("degenerate", |(rows, w1, w2)| {
                let members = rows
                    .iter()
                    .map(|r| DiscreteDistribution::from_weights(r).ok())
                    .collect::<Option<Vec<_>>>()?;
                let norm = |w: Vec<f64>| {
                    let s: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / s).collect::<Vec<_>>()
                };
                Some((Ensemble::new(members, None).ok()?, norm(w1), norm(w2)))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn map_attains_bayes((e, w1, _) in ensemble_strategy()) {
            let e = e.with_prior(w1).unwrap();
            let t = map_test(&e);
            let err = error_probability(&e, &t).unwrap();
            prop_assert!((err - bayes_risk_exact(&e)).abs() <= 1e-12);
        }

        #[test]
        fn bayes_concave_in_prior((e, w1, w2) in ensemble_strategy()) {
            let mid: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| 0.5 * (a + b)).collect();
            let r1 = bayes_risk_exact(&e.with_prior(w1).unwrap());
            let r2 = bayes_risk_exact(&e.with_prior(w2).unwrap());
            let rm = bayes_risk_exact(&e.with_prior(mid).unwrap());
            prop_assert!(rm >= 0.5 * (r1 + r2) - 1e-12);
        }

        #[test]
        fn minimax_dominates_every_prior((e, w1, w2) in ensemble_strategy()) {
            let r = minimax_risk(&e, DEFAULT_MINIMAX_TOL).unwrap();
            prop_assert!(bayes_risk_exact(&e) <= r.value + DEFAULT_MINIMAX_TOL);
            for w in [w1, w2] {
                prop_assert!(bayes_risk_exact(&e.with_prior(w).unwrap()) <= r.value + DEFAULT_MINIMAX_TOL);
            }
            prop_assert!(bayes_risk_exact(&e) <= 1.0 - 1.0 / e.len() as f64 + 1e-12);
        }
    }
}
