//! Minimax lower bounds from global packing and covering numbers.
//!
//! For a packing lower bound `N(η)` and a covering upper bound `M_f(ε)`,
//!
//! ```text
//! R ≥ sup_{η, ε} ℓ(η/2) (1 − ★)
//! ```
//!
//! with `★` one of
//!
//! | kind      | ★                                                        |
//! |-----------|----------------------------------------------------------|
//! | `kl`      | `(ln 2 + ln M_KL(ε) + ε²) / ln N(η)`                     |
//! | `chi2`    | `1/N(η) + sqrt((1 + ε²) M_C(ε) / N(η))`                  |
//! | `power:l` | `(N^{−(l−1)} + (1 + ε²) M_l^{l−1} / N^{l−1})^{1/l}`      |
//!
//! Profiles are evaluated in log space (`ln N`, `ln M`), since the
//! support-function profile is exponential in `η^{−(d−1)/2}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{out_of_range, Error, Result};
use crate::numeric::logspace;
use crate::report::BoundReport;

/// Number of points per axis in default grids.
pub const DEFAULT_GRID_POINTS: usize = 32;

/// Which divergence the covering is measured in, and hence which `★`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StarKind {
    Kl,
    Chi2,
    PowerL(f64),
}

impl StarKind {
    /// Parses `kl`, `chi2`, `power:l`, or `power_l` together with `l`.
    pub fn parse(name: &str, l: Option<f64>) -> Result<Self> {
        let kind = match name {
            "kl" => Self::Kl,
            "chi2" => Self::Chi2,
            "power_l" => Self::PowerL(l.ok_or_else(|| Error::MissingParameter("l".into()))?),
            _ => match name.strip_prefix("power:") {
                Some(v) => Self::PowerL(
                    v.parse()
                        .map_err(|_| Error::Parse(format!("bad exponent in `{name}`")))?,
                ),
                None => return Err(Error::UnknownName(name.to_string())),
            },
        };
        if let Self::PowerL(l) = kind {
            if !(l > 1.0 && l.is_finite()) || l == 2.0 {
                return Err(out_of_range("l", l, "l > 1, l != 2 (use chi2 for l = 2)"));
            }
        }
        Ok(kind)
    }

    pub fn name(&self) -> String {
        match self {
            Self::Kl => "kl".into(),
            Self::Chi2 => "chi2".into(),
            Self::PowerL(l) => format!("power:{l}"),
        }
    }
}

/// `★` from `ln N`, `ln M` and `ε²`.
pub fn theorem3_star(kind: StarKind, log_n: f64, log_m: f64, eps2: f64) -> Result<f64> {
    match kind {
        StarKind::Kl => {
            if !(log_n > 0.0) {
                return Err(out_of_range("N(eta)", log_n.exp(), "N > 1 for the kl form"));
            }
            Ok((std::f64::consts::LN_2 + log_m + eps2) / log_n)
        }
        StarKind::Chi2 => Ok((-log_n).exp() + (0.5 * ((1.0 + eps2).ln() + log_m - log_n)).exp()),
        StarKind::PowerL(l) => {
            let a = -(l - 1.0) * log_n;
            let b = (1.0 + eps2).ln() + (l - 1.0) * (log_m - log_n);
            let hi = a.max(b);
            let log_sum = hi + ((a - hi).exp() + (b - hi).exp()).ln();
            Ok((log_sum / l).exp())
        }
    }
}

/// `ℓ(η/2)(1 − ★)` from explicit quantities, clamped below at 0.
pub fn theorem3_value(kind: StarKind, log_n: f64, log_m: f64, eps2: f64, loss_half_eta: f64) -> Result<f64> {
    Ok((loss_half_eta * (1.0 - theorem3_star(kind, log_n, log_m, eps2)?)).max(0.0))
}

/// A nondecreasing loss `ℓ: [0, ∞) → [0, ∞)`.
#[derive(Clone)]
pub struct LossSpec {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LossSpec({})", self.name)
    }
}

impl LossSpec {
    /// `ℓ(x) = x^p`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(out_of_range("loss power", p, "(0, ∞)"));
        }
        Ok(Self {
            name: format!("x^{p}"),
            f: Arc::new(move |x: f64| x.powf(p)),
        })
    }

    pub fn identity() -> Self {
        Self::power(1.0).expect("valid power")
    }

    pub fn squared() -> Self {
        Self::power(2.0).expect("valid power")
    }

    /// A user-supplied loss, checked for monotonicity and nonnegativity on a
    /// grid over `[0, 100]`.
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: &str, f: F) -> Result<Self> {
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 10.0).collect();
        let mut prev = f(0.0);
        if !(prev >= 0.0) {
            return Err(out_of_range("loss(0)", prev, "[0, ∞)"));
        }
        for &x in &grid[1..] {
            let v = f(x);
            if !(v >= prev) {
                return Err(Error::InvalidGenerator(format!("loss `{name}` decreases near {x}")));
            }
            prev = v;
        }
        Ok(Self {
            name: name.to_string(),
            f: Arc::new(f),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// Closed-form divergences between members of the analytic models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticDivergence {
    pub kl: Option<f64>,
    pub chi2: f64,
}

/// Models with closed-form divergences between `n`-fold products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticModel {
    /// `N(θ, σ²)`.
    GaussianLocation,
    /// `U[0, θ]`.
    UniformScale,
    /// `U[θ, θ + 1]` against the widened candidate `U[θ', θ' + 1 + width]`.
    UniformShift,
}

impl AnalyticModel {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gaussian_location" => Ok(Self::GaussianLocation),
            "uniform_scale" => Ok(Self::UniformScale),
            "uniform_shift" => Ok(Self::UniformShift),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

/// `KL` and `χ²` from `P_θ` to `P_θ'` (each the `n`-fold product).
///
/// `extra` is `σ` for the Gaussian model (default 1) and the candidate's
/// extra width for the shift model (default 0).
pub fn analytic_divergence(
    model: AnalyticModel,
    theta: f64,
    theta_prime: f64,
    n: u32,
    extra: Option<f64>,
) -> Result<AnalyticDivergence> {
    if n == 0 {
        return Err(out_of_range("n", 0.0, "n >= 1"));
    }
    if !theta.is_finite() || !theta_prime.is_finite() {
        return Err(out_of_range("theta", theta, "finite values"));
    }
    let nf = n as f64;
    match model {
        AnalyticModel::GaussianLocation => {
            let sigma = extra.unwrap_or(1.0);
            if !(sigma > 0.0) {
                return Err(out_of_range("sigma", sigma, "(0, ∞)"));
            }
            let d2 = (theta - theta_prime).powi(2) / (sigma * sigma);
            Ok(AnalyticDivergence {
                kl: Some(nf * d2 / 2.0),
                chi2: (nf * d2).exp_m1(),
            })
        }
        AnalyticModel::UniformScale => {
            if !(theta > 0.0 && theta_prime > 0.0) {
                return Err(out_of_range("theta", theta.min(theta_prime), "(0, ∞)"));
            }
            if theta <= theta_prime {
                let r = (theta_prime / theta).ln();
                Ok(AnalyticDivergence {
                    kl: Some(nf * r),
                    chi2: (nf * r).exp_m1(),
                })
            } else {
                Ok(AnalyticDivergence {
                    kl: Some(f64::INFINITY),
                    chi2: f64::INFINITY,
                })
            }
        }
        AnalyticModel::UniformShift => {
            let w = extra.unwrap_or(0.0);
            if !(w >= 0.0) {
                return Err(out_of_range("width", w, "[0, ∞)"));
            }
            let contained = theta_prime <= theta && theta + 1.0 <= theta_prime + 1.0 + w;
            if contained {
                let r = (1.0 + w).ln();
                Ok(AnalyticDivergence {
                    kl: Some(nf * r),
                    chi2: (nf * r).exp_m1(),
                })
            } else {
                Ok(AnalyticDivergence {
                    kl: Some(f64::INFINITY),
                    chi2: f64::INFINITY,
                })
            }
        }
    }
}

/// Model parameters and named constants for [`builtin_profile`].
///
/// Model parameters (`n`, `d`, `sigma`, `gamma`) are required where the model
/// uses them. Unspecified named constants default to 1 and produce a warning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub n: Option<f64>,
    pub d: Option<u32>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c_prime: Option<f64>,
    pub c_dprime: Option<f64>,
    pub eta0: Option<f64>,
    pub eps0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
enum Model {
    Gaussian1d {
        c1: f64,
        c2: f64,
        n: f64,
        sigma: f64,
        eta0: f64,
        eps0: f64,
    },
    UniformScale {
        c1: f64,
        c3: f64,
        n: f64,
        eta0: f64,
        eps0: f64,
    },
    UniformShift {
        c1: f64,
        c2: f64,
        n: f64,
        eta0: f64,
        eps0: f64,
    },
    GaussianBall {
        d: u32,
        gamma: f64,
        sigma: f64,
    },
    SupportFunction {
        d: u32,
        n: f64,
        sigma: f64,
        gamma: f64,
        c_prime: f64,
        c_dprime: f64,
        eta0: f64,
        eps0: f64,
    },
    Table {
        packing: Vec<(f64, f64)>,
        covering: Vec<(f64, f64)>,
    },
}

/// Packing lower bound `N(η)` and covering upper bound `M_f(ε)` with their
/// validity ranges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyProfile {
    model: Model,
    pub warnings: Vec<String>,
}

/// Names accepted by [`builtin_profile`].
pub const PROFILE_NAMES: [&str; 5] = [
    "gaussian_1d",
    "uniform_scale",
    "uniform_shift",
    "gaussian_ball",
    "support_function",
];

/// JSON form of a tabulated profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub packing: Vec<(f64, f64)>,
    pub covering: Vec<(f64, f64)>,
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(out_of_range(name, v, "(0, ∞)"));
    }
    Ok(v)
}

/// Builds one of the analytic profiles.
///
/// | model              | `N(η)`                  | `M_C(ε)`                                |
/// |--------------------|-------------------------|-----------------------------------------|
/// | `gaussian_1d`      | `c₁/η`                  | `c₂√n / (σ sqrt(ln(1+ε²)))`             |
/// | `uniform_scale`    | `c₁/η`                  | `c₃ n / ln(1+ε²)`                       |
/// | `uniform_shift`    | `c₁/η`                  | `c₂ / ((1+ε²)^{1/n} − 1)`               |
/// | `gaussian_ball`    | `(Γ/η)^d`               | `(3Γ / (σ sqrt(ln(1+ε²))))^d`           |
/// | `support_function` | `exp(c′(Γ/η)^{(d−1)/2})` | `exp(c″(Γ√n/(σ sqrt(ln(1+ε²))))^{(d−1)/2})` |
///
/// The one-dimensional models also carry KL and power-`l` coverings derived
/// from the same closed-form divergences; the support-function profile
/// only has the chi² covering.
pub fn builtin_profile(model: &str, params: &ProfileParams) -> Result<EntropyProfile> {
    let mut warnings = Vec::new();
    let mut constant = |name: &str, v: Option<f64>| -> Result<f64> {
        match v {
            Some(v) => {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::OutOfRange {
                        name: "constant",
                        value: v,
                        range: format!("{name} in (0, ∞)"),
                    });
                }
                Ok(v)
            }
            None => {
                warnings.push(format!("constant {name} not supplied; using 1.0"));
                Ok(1.0)
            }
        }
    };
    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| Error::MissingParameter(name.into()));
    let built = match model {
        "gaussian_1d" => Model::Gaussian1d {
            c1: constant("c1", params.c1)?,
            c2: constant("c2", params.c2)?,
            eta0: constant("eta0", params.eta0)?,
            eps0: constant("eps0", params.eps0)?,
            n: positive("n", need("n", params.n)?)?,
            sigma: positive("sigma", params.sigma.unwrap_or(1.0))?,
        },
        "uniform_scale" => Model::UniformScale {
            c1: constant("c1", params.c1)?,
            c3: constant("c3", params.c3)?,
            eta0: constant("eta0", params.eta0)?,
            eps0: constant("eps0", params.eps0)?,
            n: positive("n", need("n", params.n)?)?,
        },
        "uniform_shift" => Model::UniformShift {
            c1: constant("c1", params.c1)?,
            c2: constant("c2", params.c2)?,
            eta0: constant("eta0", params.eta0)?,
            eps0: constant("eps0", params.eps0)?,
            n: positive("n", need("n", params.n)?)?,
        },
        "gaussian_ball" => {
            let d = params.d.ok_or_else(|| Error::MissingParameter("d".into()))?;
            if d == 0 {
                return Err(out_of_range("d", 0.0, "d >= 1"));
            }
            Model::GaussianBall {
                d,
                gamma: positive("gamma", need("gamma", params.gamma)?)?,
                sigma: positive("sigma", need("sigma", params.sigma)?)?,
            }
        }
        "support_function" => {
            let d = params.d.ok_or_else(|| Error::MissingParameter("d".into()))?;
            if d < 2 {
                return Err(out_of_range("d", d as f64, "d >= 2"));
            }
            Model::SupportFunction {
                c_prime: constant("c_prime", params.c_prime)?,
                c_dprime: constant("c_dprime", params.c_dprime)?,
                eta0: constant("eta0", params.eta0)?,
                eps0: constant("eps0", params.eps0)?,
                d,
                n: positive("n", need("n", params.n)?)?,
                sigma: positive("sigma", need("sigma", params.sigma)?)?,
                gamma: positive("gamma", need("gamma", params.gamma)?)?,
            }
        }
        other => return Err(Error::UnknownName(other.to_string())),
    };
    Ok(EntropyProfile { model: built, warnings })
}

/// A tabulated profile; `ln N` and `ln M` are interpolated linearly between
/// the listed points and the profile is valid only inside the tables' ranges.
pub fn custom_profile(table: &ProfileTable) -> Result<EntropyProfile> {
    let check = |name: &str, rows: &[(f64, f64)]| -> Result<Vec<(f64, f64)>> {
        if rows.is_empty() {
            return Err(Error::Parse(format!("{name} table is empty")));
        }
        let mut rows = rows.to_vec();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Parse(format!("{name} table repeats radius {}", w[0].0)));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::Parse(format!(
                    "{name} table must be non-increasing in the radius"
                )));
            }
        }
        for &(r, v) in &rows {
            if !(r > 0.0 && v >= 1.0 && r.is_finite() && v.is_finite()) {
                return Err(Error::Parse(format!(
                    "{name} entries need radius > 0 and count >= 1, got ({r}, {v})"
                )));
            }
        }
        Ok(rows)
    };
    Ok(EntropyProfile {
        model: Model::Table {
            packing: check("packing", &table.packing)?,
            covering: check("covering", &table.covering)?,
        },
        warnings: Vec::new(),
    })
}

fn interpolate_log(rows: &[(f64, f64)], x: f64) -> Option<f64> {
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    if x < first.0 || x > last.0 {
        return None;
    }
    if rows.len() == 1 {
        return Some(first.1.ln());
    }
    let i = rows.partition_point(|r| r.0 <= x).clamp(1, rows.len() - 1);
    let (a, b) = (rows[i - 1], rows[i]);
    let t = (x - a.0) / (b.0 - a.0);
    Some((1.0 - t) * a.1.ln() + t * b.1.ln())
}

impl EntropyProfile {
    /// `ln N(η)`, or an error outside the packing validity range.
    pub fn log_packing(&self, eta: f64) -> Result<f64> {
        if !(eta > 0.0) {
            return Err(out_of_range("eta", eta, "(0, ∞)"));
        }
        let invalid = |hi: f64| out_of_range("eta", eta, format!("(0, {hi}]"));
        match &self.model {
            Model::Gaussian1d { c1, eta0, .. }
            | Model::UniformScale { c1, eta0, .. }
            | Model::UniformShift { c1, eta0, .. } => {
                if eta > *eta0 {
                    return Err(invalid(*eta0));
                }
                Ok((c1 / eta).ln())
            }
            Model::GaussianBall { d, gamma, .. } => {
                if eta > *gamma {
                    return Err(invalid(*gamma));
                }
                Ok(*d as f64 * (gamma / eta).ln())
            }
            Model::SupportFunction {
                d,
                gamma,
                c_prime,
                eta0,
                ..
            } => {
                if eta > *eta0 {
                    return Err(invalid(*eta0));
                }
                Ok(c_prime * (gamma / eta).powf((*d as f64 - 1.0) / 2.0))
            }
            Model::Table { packing, .. } => interpolate_log(packing, eta).ok_or_else(|| {
                out_of_range(
                    "eta",
                    eta,
                    format!("[{}, {}]", packing[0].0, packing[packing.len() - 1].0),
                )
            }),
        }
    }

    /// `ln M_f(ε)` for the requested kind, or an error outside validity.
    pub fn log_covering(&self, kind: StarKind, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(out_of_range("eps", eps, "(0, ∞)"));
        }
        let lg = (eps * eps).ln_1p();
        let invalid = |range: String| out_of_range("eps", eps, range);
        // radius r such that D_f ≤ ε² whenever the parameters are within r,
        // in units where the Gaussian chi² radius is sqrt(ln(1+ε²))
        let gaussian_radius = |sigma: f64| match kind {
            StarKind::Kl => sigma * std::f64::consts::SQRT_2 * eps,
            StarKind::Chi2 => sigma * lg.sqrt(),
            StarKind::PowerL(l) => sigma * (2.0 * lg / (l * (l - 1.0))).sqrt(),
        };
        match &self.model {
            Model::Gaussian1d { c2, n, sigma, eps0, .. } => {
                if eps > *eps0 {
                    return Err(invalid(format!("(0, {eps0}]")));
                }
                Ok((c2 * n.sqrt() / gaussian_radius(*sigma)).ln())
            }
            Model::UniformScale { c3, n, eps0, .. } => {
                if eps > *eps0 {
                    return Err(invalid(format!("(0, {eps0}]")));
                }
                let width = match kind {
                    StarKind::Kl => eps * eps,
                    StarKind::Chi2 => lg,
                    StarKind::PowerL(l) => lg / (l - 1.0),
                };
                Ok((c3 * n / width).ln())
            }
            Model::UniformShift { c2, n, eps0, .. } => {
                if eps > *eps0 {
                    return Err(invalid(format!("(0, {eps0}]")));
                }
                let grow = match kind {
                    StarKind::Kl => (eps * eps / n).exp_m1(),
                    StarKind::Chi2 => (lg / n).exp_m1(),
                    StarKind::PowerL(l) => (lg / (n * (l - 1.0))).exp_m1(),
                };
                Ok((c2 / grow).ln())
            }
            Model::GaussianBall { d, gamma, sigma } => {
                let r = gaussian_radius(*sigma);
                if r > *gamma {
                    return Err(invalid(format!("covering radius {r} must not exceed gamma = {gamma}")));
                }
                Ok(*d as f64 * (3.0 * gamma / r).ln())
            }
            Model::SupportFunction {
                d,
                n,
                sigma,
                gamma,
                c_dprime,
                eps0,
                ..
            } => {
                if kind != StarKind::Chi2 {
                    return Err(Error::Unsupported(
                        "the support-function profile has a chi2 covering only".into(),
                    ));
                }
                if lg > n * eps0 * eps0 / (sigma * sigma) {
                    return Err(invalid("ln(1+eps^2) <= n eps0^2 / sigma^2".into()));
                }
                Ok(c_dprime * (gamma * n.sqrt() / (sigma * lg.sqrt())).powf((*d as f64 - 1.0) / 2.0))
            }
            Model::Table { covering, .. } => interpolate_log(covering, eps)
                .ok_or_else(|| invalid(format!("[{}, {}]", covering[0].0, covering[covering.len() - 1].0))),
        }
    }

    /// `N(η)` (may overflow to `+∞` for the support-function profile).
    pub fn packing(&self, eta: f64) -> Result<f64> {
        Ok(self.log_packing(eta)?.exp())
    }

    /// `M_f(ε)`.
    pub fn covering(&self, kind: StarKind, eps: f64) -> Result<f64> {
        Ok(self.log_covering(kind, eps)?.exp())
    }

    /// The largest admissible `η` (for default grids).
    pub fn eta_max(&self) -> f64 {
        match &self.model {
            Model::Gaussian1d { eta0, .. }
            | Model::UniformScale { eta0, .. }
            | Model::UniformShift { eta0, .. }
            | Model::SupportFunction { eta0, .. } => *eta0,
            Model::GaussianBall { gamma, .. } => *gamma,
            Model::Table { packing, .. } => packing[packing.len() - 1].0,
        }
    }

    /// The largest admissible `ε` for the chi² covering (for default grids).
    pub fn eps_max(&self) -> f64 {
        match &self.model {
            Model::Gaussian1d { eps0, .. } | Model::UniformScale { eps0, .. } | Model::UniformShift { eps0, .. } => {
                *eps0
            }
            Model::GaussianBall { gamma, sigma, .. } => ((gamma / sigma).powi(2).exp_m1()).sqrt(),
            Model::SupportFunction { n, sigma, eps0, .. } => (n * eps0 * eps0 / (sigma * sigma)).exp_m1().sqrt(),
            Model::Table { covering, .. } => covering[covering.len() - 1].0,
        }
    }

    /// Log-spaced grids spanning three decades below the maxima.
    pub fn default_grids(&self, points: usize) -> (Vec<f64>, Vec<f64>) {
        let grid = |hi: f64, lo_table: Option<f64>| {
            let hi = hi.min(1e300);
            let lo = lo_table.unwrap_or(hi * 1e-3);
            logspace(lo, hi, points)
        };
        match &self.model {
            Model::Table { packing, covering } => (
                grid(self.eta_max(), Some(packing[0].0)),
                grid(self.eps_max(), Some(covering[0].0)),
            ),
            _ => (grid(self.eta_max(), None), grid(self.eps_max(), None)),
        }
    }
}

/// `ℓ(η/2)(1 − ★)` with `N = N(η)` and `M = M_f(ε)` read from the profile.
pub fn theorem3_point(kind: StarKind, profile: &EntropyProfile, loss: &LossSpec, eta: f64, eps: f64) -> Result<f64> {
    let log_n = profile.log_packing(eta)?;
    let log_m = profile.log_covering(kind, eps)?;
    theorem3_value(kind, log_n, log_m, eps * eps, loss.eval(eta / 2.0))
}

/// Maximizes `ℓ(η/2)(1 − ★)` over a grid.
///
/// Points outside the profile's validity (or with `N ≤ 1` for the kl form)
/// are skipped; ties keep the smallest `(η, ε)`. The report's `raw_value` is
/// the best unclamped value and `vacuous` flags a nonpositive optimum.
pub fn theorem3_optimize(
    kind: StarKind,
    profile: &EntropyProfile,
    loss: &LossSpec,
    eta_grid: &[f64],
    eps_grid: &[f64],
) -> Result<BoundReport> {
    let mut etas = eta_grid.to_vec();
    let mut epss = eps_grid.to_vec();
    etas.sort_by(f64::total_cmp);
    epss.sort_by(f64::total_cmp);
    etas.dedup();
    epss.dedup();
    let covering: Vec<Option<f64>> = epss.iter().map(|&e| profile.log_covering(kind, e).ok()).collect();
    let mut best: Option<(f64, f64, f64, f64, f64, f64)> = None;
    let mut feasible = 0usize;
    for &eta in &etas {
        let Ok(log_n) = profile.log_packing(eta) else {
            continue;
        };
        let loss_value = loss.eval(eta / 2.0);
        for (&eps, log_m) in epss.iter().zip(&covering) {
            let Some(log_m) = *log_m else { continue };
            let Ok(star) = theorem3_star(kind, log_n, log_m, eps * eps) else {
                continue;
            };
            feasible += 1;
            let raw = loss_value * (1.0 - star);
            if best.is_none_or(|b| raw > b.0) {
                best = Some((raw, eta, eps, log_n, log_m, star));
            }
        }
    }
    let (raw, eta, eps, log_n, log_m, star) = best.ok_or(Error::EmptyGrid)?;
    let mut report = BoundReport::new(format!("theorem3_{}", kind.name()), raw, f64::INFINITY)
        .input("kind", kind.name())
        .input("loss", loss.name())
        .input("eta_grid_points", etas.len())
        .input("eps_grid_points", epss.len())
        .intermediate("log_N", log_n)
        .intermediate("log_M", log_m)
        .intermediate("star", star)
        .intermediate("loss_half_eta", loss.eval(eta / 2.0))
        .intermediate("feasible_points", feasible)
        .with_witness(json!({ "eta": eta, "eps": eps }));
    for w in &profile.warnings {
        report = report.warn(w.clone());
    }
    Ok(report)
}

/// The `(η(n), u(n), ε(n))` schedule for the support-function profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportSchedule {
    /// `c` with `c^{(d−1)/2} = c′/(2 + 2c″)`.
    pub c: f64,
    pub eta: f64,
    pub u: f64,
    /// `ε(n)` with `ln(1 + ε²) = u²`; `+∞` once `u²` overflows.
    pub eps: f64,
    /// `ln N(η(n)) = c′/c^{(d−1)/2} · u²`.
    pub log_n: f64,
    /// `ln M_C(ε(n)) = c″ u²`.
    pub log_m: f64,
}

/// `η(n) = c σ^{4/(d+3)} Γ^{(d−1)/(d+3)} n^{−2/(d+3)}` and
/// `u(n) = (Γ√n/σ)^{(d−1)/(d+3)}`.
pub fn support_schedule(
    n: f64,
    d: u32,
    sigma: f64,
    gamma: f64,
    c_prime: f64,
    c_dprime: f64,
) -> Result<SupportSchedule> {
    if d < 2 {
        return Err(out_of_range("d", d as f64, "d >= 2"));
    }
    for (name, v) in [
        ("n", n),
        ("sigma", sigma),
        ("gamma", gamma),
        ("c_prime", c_prime),
        ("c_dprime", c_dprime),
    ] {
        positive(name, v)?;
    }
    let df = d as f64;
    let half = (df - 1.0) / 2.0;
    let c = (c_prime / (2.0 + 2.0 * c_dprime)).powf(1.0 / half);
    let eta = c * sigma.powf(4.0 / (df + 3.0)) * gamma.powf((df - 1.0) / (df + 3.0)) * n.powf(-2.0 / (df + 3.0));
    let u = (gamma * n.sqrt() / sigma).powf((df - 1.0) / (df + 3.0));
    let u2 = u * u;
    Ok(SupportSchedule {
        c,
        eta,
        u,
        eps: u2.exp_m1().sqrt(),
        log_n: c_prime / c.powf(half) * u2,
        log_m: c_dprime * u2,
    })
}

/// Size of a greedy maximal `radius`-separated subset of the lattice
/// `spacing·ℤ²` inside the disc of radius `gamma`.
///
/// Such a set is a packing at separation `radius` (so at most
/// `(1 + 2Γ/radius)²` points) and covers every lattice point of the disc
/// within `radius`.
pub fn lattice_separated_count(gamma: f64, radius: f64, spacing: f64) -> Result<usize> {
    positive("gamma", gamma)?;
    positive("radius", radius)?;
    positive("spacing", spacing)?;
    let k = (gamma / spacing).floor() as i64;
    if (2 * k + 1).pow(2) > 50_000_000 {
        return Err(Error::SizeCap {
            points: ((2 * k + 1) as u128).pow(2),
            cap: 50_000_000,
        });
    }
    let cell = radius;
    let mut buckets: BTreeMap<(i64, i64), Vec<(f64, f64)>> = BTreeMap::new();
    let mut count = 0usize;
    let r2 = radius * radius;
    for i in -k..=k {
        for j in -k..=k {
            let (x, y) = (i as f64 * spacing, j as f64 * spacing);
            if x * x + y * y > gamma * gamma {
                continue;
            }
            let (bx, by) = ((x / cell).floor() as i64, (y / cell).floor() as i64);
            let mut clear = true;
            'scan: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(v) = buckets.get(&(bx + dx, by + dy)) {
                        if v.iter().any(|&(u, w)| (u - x).powi(2) + (w - y).powi(2) < r2) {
                            clear = false;
                            break 'scan;
                        }
                    }
                }
            }
            if clear {
                buckets.entry((bx, by)).or_default().push((x, y));
                count += 1;
            }
        }
    }
    Ok(count)
}
