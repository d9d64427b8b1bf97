//! The banded covariance family `A(τ)` and the Fano + covering assembly for
//! spectral-norm covariance estimation.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::Serialize;
use serde_json::json;

use super::vg::{hamming, vg_code};
use crate::error::{out_of_range, Error, Result};
use crate::report::BoundReport;

/// Smallest integer exceeding `2 Σ_{j≥1} j^{−α−1} + 1` (sum truncated at
/// `10⁶` terms), which makes every `A(τ)` diagonally dominant.
pub fn default_delta_a(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(out_of_range("alpha", alpha, "(0, ∞)"));
    }
    // summed smallest-first for accuracy
    let s: f64 = (1..=1_000_000u32).rev().map(|j| (j as f64).powf(-alpha - 1.0)).sum();
    Ok((2.0 * s + 1.0).floor() + 1.0)
}

/// `A` with unit diagonal and `a_ij = 1/(Δ|i−j|^{α+1})`, partitioned after
/// the first `k` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovFamily {
    pub p: usize,
    pub k: usize,
    pub alpha: f64,
    pub delta_a: f64,
    #[serde(skip)]
    pub base: DMatrix<f64>,
}

pub fn build_cov_family(p: usize, k: usize, alpha: f64, delta_a: f64) -> Result<CovFamily> {
    if k == 0 || 2 * k > p {
        return Err(out_of_range("k", k as f64, format!("1 <= k <= p/2 = {}", p / 2)));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(out_of_range("alpha", alpha, "(0, ∞)"));
    }
    if !(delta_a >= 1.0 && delta_a.is_finite()) {
        return Err(out_of_range("delta_A", delta_a, "[1, ∞)"));
    }
    let base = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            1.0 / (delta_a * (i.abs_diff(j) as f64).powf(alpha + 1.0))
        }
    });
    if Cholesky::new(base.clone()).is_none() {
        return Err(Error::NotPositiveDefinite(format!(
            "A with delta_A = {delta_a}; increase delta_A"
        )));
    }
    Ok(CovFamily {
        p,
        k,
        alpha,
        delta_a,
        base,
    })
}

fn check_word(fam: &CovFamily, tau: &[u8]) -> Result<()> {
    if tau.len() != fam.k || tau.iter().any(|&t| t > 1) {
        return Err(Error::Unsupported(format!(
            "tau must be a 0/1 word of length k = {}",
            fam.k
        )));
    }
    Ok(())
}

impl CovFamily {
    /// `A(τ)`: rows `r < k` of the off-diagonal block scaled by `τ_r`,
    /// mirrored below the diagonal.
    pub fn matrix(&self, tau: &[u8]) -> Result<DMatrix<f64>> {
        check_word(self, tau)?;
        let mut m = self.base.clone();
        for (r, &t) in tau.iter().enumerate() {
            if t == 0 {
                for c in self.k..self.p {
                    m[(r, c)] = 0.0;
                    m[(c, r)] = 0.0;
                }
            }
        }
        Ok(m)
    }

    /// `S_k = Σ_{i=k}^{2k−1} 1/(Δ i^{α+1})`.
    pub fn harmonic_tail(&self) -> f64 {
        (self.k..2 * self.k)
            .map(|i| 1.0 / (self.delta_a * (i as f64).powf(self.alpha + 1.0)))
            .sum()
    }

    /// `A₁₂ A₁₂ᵀ`, used to evaluate `‖A(τ) − A(τ′)‖` on the rows where the
    /// words differ.
    fn block_gram(&self) -> DMatrix<f64> {
        let b = self.base.view((0, self.k), (self.k, self.p - self.k));
        b * b.transpose()
    }
}

/// Achieved and guaranteed spectral separation of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Separation {
    pub achieved: f64,
    pub guaranteed: f64,
    pub hamming: usize,
}

fn spectral_norm(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// `‖A(τ) − A(τ′)‖` by a dense symmetric eigen-solve, against
/// `S_k sqrt(Υ(τ, τ′)/k)`.
pub fn spectral_separation(fam: &CovFamily, tau: &[u8], tau_prime: &[u8]) -> Result<Separation> {
    check_word(fam, tau)?;
    check_word(fam, tau_prime)?;
    let h = hamming(tau, tau_prime);
    if h == 0 {
        return Err(Error::Unsupported("spectral separation needs tau != tau'".into()));
    }
    let diff = fam.matrix(tau)? - fam.matrix(tau_prime)?;
    Ok(Separation {
        achieved: spectral_norm(diff),
        guaranteed: fam.harmonic_tail() * (h as f64 / fam.k as f64).sqrt(),
        hamming: h,
    })
}

/// `n (tr(Σ₁⁻¹Σ₀) − p + ln det Σ₁ − ln det Σ₀) / 2`.
pub fn gaussian_kl(sigma0: &DMatrix<f64>, sigma1: &DMatrix<f64>, n: f64) -> Result<f64> {
    let p = sigma0.nrows();
    if sigma0.ncols() != p || sigma1.nrows() != p || sigma1.ncols() != p {
        return Err(Error::SupportMismatch {
            left: p,
            right: sigma1.nrows(),
        });
    }
    for s in [sigma0, sigma1] {
        if (s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
            return Err(Error::NotPositiveDefinite("matrix is not symmetric".into()));
        }
    }
    let c0 = Cholesky::new(sigma0.clone()).ok_or_else(|| Error::NotPositiveDefinite("sigma0".into()))?;
    let c1 = Cholesky::new(sigma1.clone()).ok_or_else(|| Error::NotPositiveDefinite("sigma1".into()))?;
    let logdet =
        |c: &Cholesky<f64, nalgebra::Dyn>| -> f64 { 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() };
    let trace = c1.solve(sigma0).trace();
    let kl = 0.5 * (trace - p as f64 + logdet(&c1) - logdet(&c0));
    Ok(n * kl.max(0.0))
}

/// Quantities behind the KL-by-Frobenius step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlFrobenius {
    pub tau_prime: Vec<u8>,
    /// `D(N(0, A(τ)) ‖ N(0, A(τ′)))`.
    pub exact_kl: f64,
    /// `‖A(τ) − A(τ′)‖_F²`.
    pub frobenius_sq: f64,
    /// `2 Σ_{r<m} Σ_j a_{r,k+j}²`.
    pub tail_bound: f64,
    /// `1 / (4 λ_min(Σ₁)² min(1, λ_min(Σ₀)/λ_max(Σ₁)))` with `Σ₀ = A(τ)`,
    /// `Σ₁ = A(τ′)`; `exact_kl ≤ c_spec · frobenius_sq`.
    pub c_spec: f64,
}

/// Compares `A(τ)` with `τ′ = (0, …, 0, τ_m, …, τ_k)` (1-based `m`).
pub fn kl_frobenius_check(fam: &CovFamily, tau: &[u8], m: usize) -> Result<KlFrobenius> {
    check_word(fam, tau)?;
    if m < 1 || m >= fam.k {
        return Err(out_of_range("m", m as f64, format!("1 <= m < k = {}", fam.k)));
    }
    let mut tau_prime = tau.to_vec();
    tau_prime[..m - 1].fill(0);
    let s0 = fam.matrix(tau)?;
    let s1 = fam.matrix(&tau_prime)?;
    let exact_kl = gaussian_kl(&s0, &s1, 1.0)?;
    let frobenius_sq = (&s0 - &s1).norm_squared();
    let tail_bound = 2.0
        * (0..m - 1)
            .map(|r| (fam.k..fam.p).map(|c| fam.base[(r, c)].powi(2)).sum::<f64>())
            .sum::<f64>();
    let e1 = SymmetricEigen::new(s1).eigenvalues;
    let e0 = SymmetricEigen::new(s0).eigenvalues;
    let (min1, max1) = (e1.min(), e1.max());
    let c_spec = 1.0 / (4.0 * min1 * min1 * (e0.min() / max1).min(1.0));
    Ok(KlFrobenius {
        tau_prime,
        exact_kl,
        frobenius_sq,
        tail_bound,
        c_spec,
    })
}

/// Tunable constants for [`covmat_bound_assembly`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CovmatConstants {
    /// Matrix constant `Δ_A`; defaults to [`default_delta_a`].
    pub delta_a: Option<f64>,
    /// `Δ_report` in `k = ⌈4 Δ_report n^{1/(2α+1)}⌉`; defaults to 1.
    pub delta_report: Option<f64>,
    /// Fixes `m` instead of optimizing over `1 ≤ m < k`.
    pub m: Option<usize>,
    pub seed: u64,
}

/// `k = ⌈4 Δ_report n^{1/(2α+1)}⌉`.
pub fn covmat_k(n: f64, alpha: f64, delta_report: f64) -> usize {
    let x = 4.0 * delta_report * n.powf(1.0 / (2.0 * alpha + 1.0));
    (x - 1e-9 * x.max(1.0)).ceil().max(1.0) as usize
}

/// Lower bound on the spectral-norm minimax risk over the banded class.
///
/// The packing is `{A(τ) : τ ∈ W}` for a greedy VG code `W ⊂ {0,1}^k`;
/// separation comes from the harmonic tail `S_k` at the code's minimum
/// distance, and the mutual information is bounded by covering with the
/// `2^{k−m+1}` matrices `A(0, …, 0, t)`. The reported value is
///
/// ```text
/// (η/2) (1 − (ln 2 + (k−m+1) ln 2 + n max_τ D(A(τ) ‖ A(τ′))) / ln |W|)
/// ```
///
/// maximized over `m` unless `m` is fixed.
pub fn covmat_bound_assembly(n: u64, p: usize, alpha: f64, constants: &CovmatConstants) -> Result<BoundReport> {
    if n == 0 {
        return Err(out_of_range("n", 0.0, "n >= 1"));
    }
    let nf = n as f64;
    let mut warnings = Vec::new();
    let delta_a = match constants.delta_a {
        Some(d) => d,
        None => default_delta_a(alpha)?,
    };
    let delta_report = constants.delta_report.unwrap_or_else(|| {
        warnings.push("constant delta_report not supplied; using 1.0".to_string());
        1.0
    });
    if !(delta_report > 0.0 && delta_report.is_finite()) {
        return Err(out_of_range("delta_report", delta_report, "(0, ∞)"));
    }
    let k = covmat_k(nf, alpha, delta_report);
    if 2 * k > p {
        return Err(out_of_range(
            "p",
            p as f64,
            format!("p >= 2k = {} (k = ceil(4 delta_report n^(1/(2 alpha + 1))))", 2 * k),
        ));
    }
    if k < 8 {
        return Err(out_of_range("k", k as f64, "k >= 8; increase n or delta_report"));
    }
    let fam = build_cov_family(p, k, alpha, delta_a)?;
    let code = vg_code(k, constants.seed)?;
    let log_w = (code.len() as f64).ln();
    let s_k = fam.harmonic_tail();

    // Separation: every pair is checked against S_k sqrt(Υ/k) through the
    // Gram matrix of the rows where the words differ.
    let gram = fam.block_gram();
    let mut min_hamming = k;
    let mut min_achieved = f64::INFINITY;
    let mut worst_slack = f64::INFINITY;
    for i in 0..code.len() {
        for j in i + 1..code.len() {
            let rows: Vec<usize> = (0..k).filter(|&r| code.words[i][r] != code.words[j][r]).collect();
            let sub = DMatrix::from_fn(rows.len(), rows.len(), |a, b| gram[(rows[a], rows[b])]);
            let achieved = SymmetricEigen::new(sub).eigenvalues.max().max(0.0).sqrt();
            let guaranteed = s_k * (rows.len() as f64 / k as f64).sqrt();
            min_hamming = min_hamming.min(rows.len());
            min_achieved = min_achieved.min(achieved);
            worst_slack = worst_slack.min(achieved - guaranteed);
        }
    }
    if worst_slack < -1e-10 {
        return Err(Error::NonConvergence {
            routine: "spectral separation check",
            iterations: code.len() * (code.len() - 1) / 2,
            gap: -worst_slack,
        });
    }
    let eta = s_k * (min_hamming as f64 / k as f64).sqrt();

    let ln2 = std::f64::consts::LN_2;
    let value_at = |m: usize, e: f64| (eta / 2.0) * (1.0 - (ln2 + (k - m + 1) as f64 * ln2 + e) / log_w);
    let worst_kl = |m: usize| -> Result<(f64, usize)> {
        let mut best = (0.0f64, 0usize);
        for (idx, tau) in code.words.iter().enumerate() {
            let mut tp = tau.clone();
            tp[..m - 1].fill(0);
            let kl = gaussian_kl(&fam.matrix(tau)?, &fam.matrix(&tp)?, nf)?;
            if kl > best.0 {
                best = (kl, idx);
            }
        }
        Ok(best)
    };
    let candidates: Vec<usize> = match constants.m {
        Some(m) => {
            if m < 1 || m >= k {
                return Err(out_of_range("m", m as f64, format!("1 <= m < k = {k}")));
            }
            vec![m]
        }
        None => (1..k).rev().collect(),
    };
    let mut best: Option<(f64, usize, f64, usize)> = None;
    for m in candidates {
        // the value only decreases in (k − m) once the KL term is dropped
        if let Some(b) = best {
            if value_at(m, 0.0) <= b.0 {
                break;
            }
        }
        let (e, worst) = worst_kl(m)?;
        let v = value_at(m, e);
        if best.is_none_or(|b| v > b.0) {
            best = Some((v, m, e, worst));
        }
    }
    let (raw, m, e, worst) = best.expect("at least one m");
    let frob = kl_frobenius_check(&fam, &code.words[worst], m)?;
    if frob.frobenius_sq > frob.tail_bound + 1e-12 {
        return Err(Error::NonConvergence {
            routine: "Frobenius tail check",
            iterations: 1,
            gap: frob.frobenius_sq - frob.tail_bound,
        });
    }
    let j_bound = (k - m + 1) as f64 * ln2 + e;
    let mut report = BoundReport::new("covmat_fano_covering", raw, f64::INFINITY)
        .input("n", n)
        .input("p", p)
        .input("alpha", alpha)
        .input("delta_A", delta_a)
        .input("delta_report", delta_report)
        .input("seed", constants.seed)
        .intermediate("k", k)
        .intermediate("m", m)
        .intermediate("code_size", code.len())
        .intermediate("log_code_size", log_w)
        .intermediate("min_hamming", min_hamming)
        .intermediate("S_k", s_k)
        .intermediate("separation_guaranteed", eta)
        .intermediate("separation_achieved_min", min_achieved)
        .intermediate("pairs_verified", code.len() * (code.len() - 1) / 2)
        .intermediate("covering_log_count", (k - m + 1) as f64 * ln2)
        .intermediate("covering_error", e)
        .intermediate("jf_upper", j_bound)
        .intermediate("fano_factor", 1.0 - (ln2 + j_bound) / log_w)
        .intermediate("rate_scaled", raw * nf.powf(alpha / (2.0 * alpha + 1.0)))
        .intermediate("frobenius_sq", frob.frobenius_sq)
        .intermediate("frobenius_tail_bound", frob.tail_bound)
        .intermediate("kl_per_sample", frob.exact_kl)
        .intermediate("c_spec", frob.c_spec)
        .with_witness(json!({
            "worst_tau": code.words[worst],
            "candidate_tau": frob.tau_prime,
            "code": code.words,
        }));
    for w in warnings {
        report = report.warn(w);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn base_matrix_entries() {
        let fam = build_cov_family(4, 2, 1.0, 4.0).unwrap();
        assert_eq!(fam.base[(0, 1)], 0.25);
        assert_eq!(fam.base[(0, 2)], 1.0 / 16.0);
        assert_eq!(fam.base[(0, 3)], 1.0 / 36.0);
        assert_eq!(fam.matrix(&[1, 1]).unwrap(), fam.base);
        let z = fam.matrix(&[0, 0]).unwrap();
        for r in 0..2 {
            for c in 2..4 {
                assert_eq!(z[(r, c)], 0.0);
                assert_eq!(z[(c, r)], 0.0);
            }
        }
        assert!(build_cov_family(4, 3, 1.0, 4.0).is_err());
        assert!(matches!(
            build_cov_family(40, 10, 0.5, 1.0),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn delta_a_default() {
        assert_eq!(default_delta_a(1.0).unwrap(), 5.0);
        assert_eq!(default_delta_a(2.0).unwrap(), 4.0);
    }

    #[test]
    fn separation_example() {
        let fam = build_cov_family(4, 2, 1.0, 4.0).unwrap();
        let s = spectral_separation(&fam, &[1, 0], &[0, 0]).unwrap();
        let s2 = 0.25 * (0.25 + 1.0 / 9.0);
        assert!((fam.harmonic_tail() - s2).abs() < 1e-15);
        assert!((s.guaranteed - s2 * 0.5f64.sqrt()).abs() < 1e-15);
        let exact = (1.0f64 / 256.0 + 1.0 / 1296.0).sqrt();
        assert!((s.achieved - exact).abs() < 1e-12);
        assert!(s.achieved >= s.guaranteed);
        let full = spectral_separation(&fam, &[1, 1], &[0, 0]).unwrap();
        assert!((full.guaranteed - s2).abs() < 1e-15);
        assert!(spectral_separation(&fam, &[1, 0], &[1, 0]).is_err());
    }

    #[test]
    fn harmonic_tail_floor() {
        for alpha in [0.5, 1.0, 2.0] {
            for k in 1..20 {
                let fam = build_cov_family(2 * k, k, alpha, 4.0).unwrap();
                assert!(fam.harmonic_tail() >= 2f64.powf(-alpha - 1.0) * (k as f64).powf(-alpha) / 4.0);
            }
        }
    }

    #[test]
    fn gaussian_kl_examples() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let two = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(gaussian_kl(&one, &one, 3.0).unwrap(), 0.0);
        let v = gaussian_kl(&one, &two, 1.0).unwrap();
        assert!((v - 0.5 * (0.5 - 1.0 + 2f64.ln())).abs() < 1e-15);
        assert!((gaussian_kl(&one, &two, 2.0).unwrap() - 2.0 * v).abs() < 1e-15);
        let bad = DMatrix::from_element(1, 1, -1.0);
        assert!(gaussian_kl(&one, &bad, 1.0).is_err());
    }

    #[test]
    fn frobenius_examples() {
        let fam = build_cov_family(6, 3, 1.0, 4.0).unwrap();
        let c = kl_frobenius_check(&fam, &[1, 1, 1], 2).unwrap();
        assert_eq!(c.tau_prime, vec![0, 1, 1]);
        let row: f64 = (3..6).map(|j| fam.base[(0, j)].powi(2)).sum();
        assert!((c.frobenius_sq - 2.0 * row).abs() < 1e-15);
        assert!((c.tail_bound - 2.0 * row).abs() < 1e-15);
        assert!(c.exact_kl <= c.c_spec * c.frobenius_sq);
        let same = kl_frobenius_check(&fam, &[0, 1, 0], 2).unwrap();
        assert_eq!((same.exact_kl, same.frobenius_sq), (0.0, 0.0));
        assert!(kl_frobenius_check(&fam, &[1, 1, 1], 3).is_err());
    }

    #[test]
    fn tail_rate() {
        let fam = build_cov_family(60, 20, 1.0, 5.0).unwrap();
        let tau = vec![1u8; 20];
        let scaled: Vec<f64> = (1..=6)
            .map(|gap| {
                let c = kl_frobenius_check(&fam, &tau, 20 - gap).unwrap();
                assert!(c.frobenius_sq <= c.tail_bound + 1e-12);
                c.tail_bound * (gap as f64).powi(2)
            })
            .collect();
        let (lo, hi) = scaled
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi / lo < 10.0, "{scaled:?}");
    }

    #[test]
    fn assembly_small() {
        let c = CovmatConstants {
            delta_report: Some(1.5),
            ..Default::default()
        };
        let r = covmat_bound_assembly(64, 48, 1.0, &c).unwrap();
        assert!(r.lower_bound > 0.0, "{r:?}");
        assert!(r.get("separation_achieved_min").unwrap() >= r.get("separation_guaranteed").unwrap());
        assert!(covmat_bound_assembly(64, 40, 1.0, &c).is_err());
        let fixed = CovmatConstants {
            m: Some(0),
            ..c.clone()
        };
        assert!(covmat_bound_assembly(64, 48, 1.0, &fixed).is_err());
        let plain = covmat_bound_assembly(64, 40, 1.0, &CovmatConstants::default()).unwrap();
        assert!(!plain.warnings.is_empty());
    }

    #[test]
    fn random_pairs_separate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (p, k, alpha) in [(8, 3, 0.5), (12, 4, 1.0), (16, 6, 2.0)] {
            let fam = build_cov_family(p, k, alpha, default_delta_a(alpha).unwrap()).unwrap();
            let mut done = 0;
            while done < 100 {
                let a: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
                let b: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
                if a == b {
                    continue;
                }
                let s = spectral_separation(&fam, &a, &b).unwrap();
                assert!(s.achieved >= s.guaranteed - 1e-10);
                done += 1;
            }
        }
    }

    proptest! {
        #[test]
        fn frobenius_below_tail(bits in proptest::collection::vec(0u8..2, 8), m in 1usize..8) {
            let fam = build_cov_family(20, 8, 1.0, 5.0).unwrap();
            let c = kl_frobenius_check(&fam, &bits, m).unwrap();
            prop_assert!(c.frobenius_sq <= c.tail_bound + 1e-12);
            prop_assert!(c.exact_kl <= c.c_spec * c.frobenius_sq + 1e-15);
        }
    }
}
