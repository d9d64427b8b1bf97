//! Packings behind the covariance and convex-body examples.

pub mod caps;
pub mod covmat;
pub mod vg;

pub use caps::{
    cap_distance, cap_geometry, claim_ratio, sphere_packing_points, support_packing_bound, CapGeometry, SpherePacking,
    SupportPacking,
};
pub use covmat::{
    build_cov_family, covmat_bound_assembly, covmat_k, default_delta_a, gaussian_kl, kl_frobenius_check,
    spectral_separation, CovFamily, CovmatConstants, KlFrobenius, Separation,
};
pub use vg::{hamming, vg_code, BinaryCode};
