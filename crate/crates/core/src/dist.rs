//! Finite discrete distributions and ensembles.
//!
//! The dominating measure is always counting measure on `{0, .., support_size - 1}`,
//! so a density is just the probability vector. Every oracle in the crate
//! (exact Bayes risk, divergence sums, J_f) works on these types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization slack accepted at input boundaries (user-supplied vectors).
pub const INPUT_TOLERANCE: f64 = 1e-9;
/// Normalization slack maintained internally.
pub const INTERNAL_TOLERANCE: f64 = 1e-12;
/// Default cap on the number of points of a product space.
pub const DEFAULT_PRODUCT_CAP: usize = 1_000_000;

/// Probability vector over a finite sample space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct DiscreteDistribution {
    pmf: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    pmf: Vec<f64>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        DiscreteDistribution::new(raw.pmf)
    }
}

/// Checks nonnegativity and normalization of a raw weight vector and returns it
/// rescaled so that its sum is 1 to machine precision.
pub(crate) fn checked_simplex_vector(mut v: Vec<f64>) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty);
    }
    for (index, &value) in v.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        if value < 0.0 {
            return Err(Error::Negative { index, value });
        }
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > INPUT_TOLERANCE {
        return Err(Error::NotNormalized { sum });
    }
    if sum != 1.0 {
        v.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(v)
}

impl DiscreteDistribution {
    /// Validates a raw probability vector.
    ///
    /// Entries must be finite and nonnegative and sum to 1 within
    /// [`INPUT_TOLERANCE`]; accepted vectors are rescaled to sum to 1.
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        Ok(Self {
            pmf: checked_simplex_vector(pmf)?,
        })
    }

    /// Uniform distribution on `size` points.
    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Empty);
        }
        Ok(Self {
            pmf: vec![1.0 / size as f64; size],
        })
    }

    /// Point mass at `index` on a space of `size` points.
    pub fn point_mass(size: usize, index: usize) -> Result<Self> {
        if index >= size {
            return Err(crate::error::out_of_range(
                "index",
                index as f64,
                format!("[0, {size})"),
            ));
        }
        let mut pmf = vec![0.0; size];
        pmf[index] = 1.0;
        Ok(Self { pmf })
    }

    /// Normalizes an arbitrary nonnegative weight vector.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NotNormalized { sum: total });
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn support_size(&self) -> usize {
        self.pmf.len()
    }

    pub fn get(&self, x: usize) -> f64 {
        self.pmf[x]
    }

    /// Indices carrying positive mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.pmf.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, _)| i)
    }

    /// Total variation distance: half the L1 distance.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        same_support(self, other)?;
        Ok(0.5 * self.pmf.iter().zip(&other.pmf).map(|(p, q)| (p - q).abs()).sum::<f64>())
    }

    /// Convex combination `(1 - t) self + t other`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        same_support(self, other)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(crate::error::out_of_range("t", t, "[0, 1]"));
        }
        Ok(Self {
            pmf: self
                .pmf
                .iter()
                .zip(&other.pmf)
                .map(|(p, q)| (1.0 - t) * p + t * q)
                .collect(),
        })
    }

    /// Marginal of coordinate `coord` when `self` lives on the `n`-fold
    /// product of a `base_size`-point space in lexicographic order.
    pub fn marginal(&self, base_size: usize, n: usize, coord: usize) -> Result<Self> {
        let expected = (base_size as u128).pow(n as u32);
        if expected != self.pmf.len() as u128 || coord >= n {
            return Err(Error::SupportMismatch {
                left: self.pmf.len(),
                right: expected as usize,
            });
        }
        let stride = base_size.pow((n - 1 - coord) as u32);
        let mut out = vec![0.0; base_size];
        for (idx, &p) in self.pmf.iter().enumerate() {
            out[(idx / stride) % base_size] += p;
        }
        Ok(Self { pmf: out })
    }
}

pub(crate) fn same_support(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.support_size() != q.support_size() {
        return Err(Error::SupportMismatch {
            left: p.support_size(),
            right: q.support_size(),
        });
    }
    Ok(())
}

/// The `n`-fold i.i.d. product of `base`, listed in lexicographic order with
/// the first coordinate most significant.
///
/// Rejects products with more than `cap` points.
pub fn product_distribution(base: &DiscreteDistribution, n: usize, cap: usize) -> Result<DiscreteDistribution> {
    if n == 0 {
        return Err(crate::error::out_of_range("n", 0.0, "n >= 1"));
    }
    let points = (base.support_size() as u128).checked_pow(n as u32);
    match points {
        Some(points) if points <= cap as u128 => {}
        Some(points) => return Err(Error::SizeCap { points, cap }),
        None => return Err(Error::SizeCap { points: u128::MAX, cap }),
    }
    let mut pmf = vec![1.0];
    for _ in 0..n {
        pmf = pmf.iter().flat_map(|&a| base.pmf.iter().map(move |&b| a * b)).collect();
    }
    Ok(DiscreteDistribution { pmf })
}

/// A finite family `{P_θ}` with a prior over its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble")]
pub struct Ensemble {
    members: Vec<DiscreteDistribution>,
    prior: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawEnsemble {
    members: Vec<DiscreteDistribution>,
    #[serde(default)]
    prior: Option<Vec<f64>>,
    #[serde(default)]
    labels: Option<Vec<f64>>,
}

impl TryFrom<RawEnsemble> for Ensemble {
    type Error = Error;

    fn try_from(raw: RawEnsemble) -> Result<Self> {
        let mut ens = Ensemble::new(raw.members, raw.prior)?;
        if let Some(labels) = raw.labels {
            ens = ens.with_labels(labels)?;
        }
        Ok(ens)
    }
}

impl Ensemble {
    /// Builds an ensemble; `prior = None` means uniform.
    pub fn new(members: Vec<DiscreteDistribution>, prior: Option<Vec<f64>>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::TooFewMembers(members.len()));
        }
        let size = members[0].support_size();
        for m in &members[1..] {
            if m.support_size() != size {
                return Err(Error::SupportMismatch {
                    left: size,
                    right: m.support_size(),
                });
            }
        }
        let n = members.len();
        let prior = match prior {
            None => vec![1.0 / n as f64; n],
            Some(p) if p.len() != n => {
                return Err(Error::PriorLength {
                    expected: n,
                    got: p.len(),
                })
            }
            Some(p) => checked_simplex_vector(p)?,
        };
        Ok(Self {
            members,
            prior,
            labels: None,
        })
    }

    /// Convenience constructor from raw probability vectors with a uniform prior.
    pub fn from_pmfs(pmfs: Vec<Vec<f64>>) -> Result<Self> {
        let members = pmfs
            .into_iter()
            .map(DiscreteDistribution::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(members, None)
    }

    pub fn with_prior(&self, prior: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.members.clone(), Some(prior))?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.members.len() {
            return Err(Error::PriorLength {
                expected: self.members.len(),
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Same members under the uniform prior.
    pub fn uniform(&self) -> Self {
        let n = self.members.len();
        Self {
            members: self.members.clone(),
            prior: vec![1.0 / n as f64; n],
            labels: self.labels.clone(),
        }
    }

    pub fn members(&self) -> &[DiscreteDistribution] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &DiscreteDistribution {
        &self.members[i]
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Number of members `N`.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.members[0].support_size()
    }

    /// Uniform mixture `P̄ = (1/N) Σ_θ P_θ`.
    pub fn mixture(&self) -> DiscreteDistribution {
        let n = self.len() as f64;
        let mut pmf = vec![0.0; self.support_size()];
        for m in &self.members {
            for (acc, p) in pmf.iter_mut().zip(m.pmf()) {
                *acc += p / n;
            }
        }
        DiscreteDistribution { pmf }
    }

    /// Points where at least one member has positive mass.
    pub fn union_support(&self) -> Vec<usize> {
        (0..self.support_size())
            .filter(|&x| self.members.iter().any(|m| m.get(x) > 0.0))
            .collect()
    }

    /// Points where every member has positive mass.
    pub fn common_support(&self) -> Vec<usize> {
        (0..self.support_size())
            .filter(|&x| self.members.iter().all(|m| m.get(x) > 0.0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_examples() {
        assert!(DiscreteDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            DiscreteDistribution::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(DiscreteDistribution::new(vec![1.0, 0.0]).is_ok());
        assert!(matches!(
            DiscreteDistribution::new(vec![1.5, -0.5]),
            Err(Error::Negative { index: 1, .. })
        ));
        assert!(matches!(DiscreteDistribution::new(vec![]), Err(Error::Empty)));
        assert!(DiscreteDistribution::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn input_slack_is_renormalized() {
        let d = DiscreteDistribution::new(vec![0.5 + 4e-10, 0.5]).unwrap();
        let sum: f64 = d.pmf().iter().sum();
        assert!((sum - 1.0).abs() < INTERNAL_TOLERANCE);
    }

    #[test]
    fn product_examples() {
        let coin = DiscreteDistribution::new(vec![0.5, 0.5]).unwrap();
        let p = product_distribution(&coin, 2, DEFAULT_PRODUCT_CAP).unwrap();
        assert_eq!(p.pmf(), &[0.25, 0.25, 0.25, 0.25]);

        let one = DiscreteDistribution::new(vec![1.0]).unwrap();
        let p = product_distribution(&one, 3, DEFAULT_PRODUCT_CAP).unwrap();
        assert_eq!(p.pmf(), &[1.0]);

        let skew = DiscreteDistribution::new(vec![0.2, 0.8]).unwrap();
        let p = product_distribution(&skew, 2, DEFAULT_PRODUCT_CAP).unwrap();
        // direct multiplication, first coordinate most significant
        let expected = [0.2 * 0.2, 0.2 * 0.8, 0.8 * 0.2, 0.8 * 0.8];
        for (a, b) in p.pmf().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn product_cap_enforced() {
        let d = DiscreteDistribution::uniform(10).unwrap();
        assert!(matches!(
            product_distribution(&d, 7, DEFAULT_PRODUCT_CAP),
            Err(Error::SizeCap { .. })
        ));
        assert!(product_distribution(&d, 6, DEFAULT_PRODUCT_CAP).is_ok());
        assert!(product_distribution(&d, 0, DEFAULT_PRODUCT_CAP).is_err());
    }

    #[test]
    fn ensemble_validation() {
        let a = DiscreteDistribution::new(vec![0.5, 0.5]).unwrap();
        let b = DiscreteDistribution::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            Ensemble::new(vec![a.clone()], None),
            Err(Error::TooFewMembers(1))
        ));
        assert!(matches!(
            Ensemble::new(vec![a.clone(), b], None),
            Err(Error::SupportMismatch { .. })
        ));
        assert!(matches!(
            Ensemble::new(vec![a.clone(), a.clone()], Some(vec![1.0])),
            Err(Error::PriorLength { .. })
        ));
        let e = Ensemble::new(vec![a.clone(), a], Some(vec![0.25, 0.75])).unwrap();
        assert_eq!(e.prior(), &[0.25, 0.75]);
    }

    #[test]
    fn json_schema() {
        let e: Ensemble = serde_json::from_str(r#"{"members":[{"pmf":[0.75,0.25]},{"pmf":[0.25,0.75]}]}"#).unwrap();
        assert_eq!(e.prior(), &[0.5, 0.5]);
        let bad = serde_json::from_str::<Ensemble>(r#"{"members":[{"pmf":[0.75,0.35]},{"pmf":[0.25,0.75]}]}"#);
        assert!(bad.is_err());
        let d: DiscreteDistribution = serde_json::from_str(r#"{"pmf":[0.2,0.8]}"#).unwrap();
        assert_eq!(serde_json::to_string(&d).unwrap(), r#"{"pmf":[0.2,0.8]}"#);
    }

    fn simplex(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..=max_len).prop_filter_map("zero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn product_is_valid_with_exact_marginals(base in simplex(4), n in 1usize..5) {
            let base = DiscreteDistribution::new(base).unwrap();
            let prod = product_distribution(&base, n, DEFAULT_PRODUCT_CAP).unwrap();
            prop_assert!(DiscreteDistribution::new(prod.pmf().to_vec()).is_ok());
            for coord in 0..n {
                let m = prod.marginal(base.support_size(), n, coord).unwrap();
                for (a, b) in m.pmf().iter().zip(base.pmf()) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }
}
