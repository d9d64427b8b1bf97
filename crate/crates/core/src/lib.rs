//! f-divergence machinery for minimax lower bounds.
//!
//! Everything runs on finite sample spaces so that each inequality can be
//! checked against an exact oracle:
//!
//! - [`dist`]: probability vectors, product measures and ensembles.
//! - [`fdiv`]: convex generators, `D_f(P‖Q)` and the `g` function.
//! - [`testing_risk`]: exact Bayes testing risk, the MAP test and minimax risk.
//! - [`mixture`]: mixture lower bounds on the Bayes risk and their named
//!   specializations (Fano, chi², Hellinger, TV, power, reverse KL).
//! - [`jf`]: `J_f = inf_Q (1/N) Σ D_f(P_θ‖Q)` in closed form and numerically,
//!   plus covering upper bounds.
//! - [`entropy`]: global metric-entropy bounds on the minimax risk and the
//!   analytic models they are instantiated on.
//! - [`constructions`]: Varshamov–Gilbert codes, the banded covariance family
//!   and spherical-cap packings.
//! - [`verify`]: seeded invariant suites used by the CLI.
//!
//! ```
//! use minimax_fdiv::{eval_divergence, DiscreteDistribution, Generator};
//! use minimax_fdiv::mixture::{named_bound, NamedFamily};
//!
//! let p = DiscreteDistribution::new(vec![0.5, 0.5])?;
//! let q = DiscreteDistribution::new(vec![0.25, 0.75])?;
//! let chi2 = eval_divergence(&Generator::chi2(), &p, &q)?;
//! assert!((chi2 - 1.0 / 3.0).abs() < 1e-12);
//!
//! let fano = named_bound(&NamedFamily::Fano { n: 16, avg_kl: 1.0 })?;
//! assert!((fano.lower_bound - 0.3893).abs() < 1e-4);
//! # Ok::<(), minimax_fdiv::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constructions;
pub mod dist;
pub mod entropy;
pub mod error;
pub mod fdiv;
pub mod jf;
pub mod mixture;
pub(crate) mod numeric;
pub mod report;
pub mod testing_risk;
pub mod verify;

pub use dist::{product_distribution, DiscreteDistribution, Ensemble};
pub use error::{Error, Result};
pub use fdiv::{eval_divergence, g_function, Generator};
pub use report::BoundReport;
