//! Spherical caps, the support-function distance of a truncated cap and the
//! resulting packing of convex bodies.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::vg::{hamming, vg_code};
use crate::error::{out_of_range, Error, Result};
use crate::numeric::adaptive_simpson;

/// Absolute tolerance of the cap-distance quadrature.
pub const CAP_QUADRATURE_TOL: f64 = 1e-10;

/// Largest candidate mesh used on the 2-sphere.
pub const MAX_MESH: usize = 400_000;

/// Angles of a cap cut at depth `ε` and its half-depth shrink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapGeometry {
    pub epsilon: f64,
    /// `acos(1 − ε)`.
    pub alpha_angle: f64,
    /// `α − acos(1 − ε/2)`.
    pub beta_angle: f64,
    pub d: u32,
    pub p: f64,
}

impl CapGeometry {
    /// `sqrt(ε)/(2√2)`, a floor for `sin β`.
    pub fn sin_beta_floor(&self) -> f64 {
        self.epsilon.sqrt() / (2.0 * std::f64::consts::SQRT_2)
    }

    pub fn sin_beta(&self) -> f64 {
        self.beta_angle.sin()
    }

    /// `C₆`: `2` on the circle, otherwise the area of `S^{d−2}`.
    pub fn c6(&self) -> f64 {
        if self.d == 2 {
            2.0
        } else {
            let s = (self.d as f64 - 1.0) / 2.0;
            2.0 * PI.powf(s) / gamma(s)
        }
    }
}

fn gamma(x: f64) -> f64 {
    // the arguments used here are positive half-integers
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|i| i as f64).product()
    } else {
        let mut acc = PI.sqrt();
        let mut t = 0.5;
        while t < x - 1e-12 {
            acc *= t;
            t += 1.0;
        }
        acc
    }
}

pub fn cap_geometry(epsilon: f64, d: u32, p: f64) -> Result<CapGeometry> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(out_of_range("epsilon", epsilon, "(0, 1)"));
    }
    if d < 2 {
        return Err(out_of_range("d", d as f64, "d >= 2"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(out_of_range("p", p, "[1, ∞)"));
    }
    let alpha_angle = (1.0 - epsilon).acos();
    let beta_angle = alpha_angle - (1.0 - epsilon / 2.0).acos();
    let geom = CapGeometry {
        epsilon,
        alpha_angle,
        beta_angle,
        d,
        p,
    };
    if !(geom.sin_beta() >= geom.sin_beta_floor()) {
        return Err(Error::NonConvergence {
            routine: "cap geometry",
            iterations: 0,
            gap: geom.sin_beta_floor() - geom.sin_beta(),
        });
    }
    Ok(geom)
}

/// `δ_p^p = C₆ ∫₀^α (1 − cos(α − θ))^p sin^{d−2} θ dθ`.
pub fn cap_distance_pow(geom: &CapGeometry) -> Result<f64> {
    let (a, p, e) = (geom.alpha_angle, geom.p, geom.d as i32 - 2);
    let integral = adaptive_simpson(
        |t| (1.0 - (a - t).cos()).powf(p) * t.sin().powi(e),
        0.0,
        a,
        CAP_QUADRATURE_TOL,
    )?;
    Ok(geom.c6() * integral)
}

/// `δ_p` between a body and the body with one cap removed.
pub fn cap_distance(geom: &CapGeometry) -> Result<f64> {
    Ok(cap_distance_pow(geom)?.powf(1.0 / geom.p))
}

/// `δ_p^p / (ε^p ε^{(d−1)/2})`, bounded below uniformly in small `ε`.
pub fn claim_ratio(geom: &CapGeometry) -> Result<f64> {
    let e = geom.epsilon;
    Ok(cap_distance_pow(geom)? / (e.powf(geom.p) * e.powf((geom.d as f64 - 1.0) / 2.0)))
}

/// Unit vectors with pairwise distance strictly above `2√2 √ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpherePacking {
    pub d: u32,
    pub epsilon: f64,
    pub points: Vec<Vec<f64>>,
    pub min_distance: f64,
    /// `count / ε^{−(d−1)/2}`.
    pub c1: f64,
    pub mesh_size: usize,
}

fn min_pairwise(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    best
}

fn fibonacci_sphere(m: usize, rotation: f64) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64 + rotation;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Points on `S^{d−1}` separated by more than `2√2 √ε`.
///
/// On the circle the points are equally spaced at the largest admissible
/// count (the seed is unused). On the 2-sphere they are chosen by greedy
/// farthest-point selection from a seeded Fibonacci mesh, refined until the
/// mesh is fine relative to the separation.
pub fn sphere_packing_points(d: u32, epsilon: f64, seed: u64) -> Result<SpherePacking> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(out_of_range("epsilon", epsilon, "(0, 1)"));
    }
    let sep = 2.0 * std::f64::consts::SQRT_2 * epsilon.sqrt();
    let points: Vec<Vec<f64>>;
    let mesh_size;
    match d {
        2 => {
            if sep >= 2.0 {
                return Err(out_of_range("epsilon", epsilon, "epsilon < 1/2 on the circle"));
            }
            let step = 2.0 * (sep / 2.0).asin();
            let mut count = (2.0 * PI / step).floor() as usize;
            while count > 1 && 2.0 * (PI / count as f64).sin() <= sep {
                count -= 1;
            }
            if count < 2 {
                return Err(out_of_range("epsilon", epsilon, "too large for two points"));
            }
            points = (0..count)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / count as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect();
            mesh_size = count;
        }
        3 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rotation = rng.random::<f64>() * 2.0 * PI;
            let mut m = ((200.0 / (sep * sep)).ceil() as usize).clamp(2_000, MAX_MESH);
            loop {
                let mesh = fibonacci_sphere(m, rotation);
                let start = rng.random_range(0..m);
                let mut dist2: Vec<f64> = vec![f64::INFINITY; m];
                let mut chosen = vec![start];
                let sep2 = sep * sep;
                loop {
                    let last = mesh[*chosen.last().expect("nonempty")];
                    let mut far = (0usize, -1.0f64);
                    for (i, q) in mesh.iter().enumerate() {
                        let d2 = (q[0] - last[0]).powi(2) + (q[1] - last[1]).powi(2) + (q[2] - last[2]).powi(2);
                        if d2 < dist2[i] {
                            dist2[i] = d2;
                        }
                        if dist2[i] > far.1 {
                            far = (i, dist2[i]);
                        }
                    }
                    if far.1 <= sep2 {
                        break;
                    }
                    chosen.push(far.0);
                }
                if chosen.len() >= 2 || m >= MAX_MESH {
                    points = chosen.iter().map(|&i| mesh[i].to_vec()).collect();
                    mesh_size = m;
                    break;
                }
                m = (m * 4).min(MAX_MESH);
            }
            if points.len() < 2 {
                return Err(out_of_range("epsilon", epsilon, "too large for two points"));
            }
        }
        _ => return Err(Error::Unsupported("sphere packings are built for d in {2, 3}".into())),
    }
    let min_distance = min_pairwise(&points);
    if !(min_distance > sep) {
        return Err(Error::NonConvergence {
            routine: "sphere packing verification",
            iterations: points.len(),
            gap: sep - min_distance,
        });
    }
    let count = points.len() as f64;
    Ok(SpherePacking {
        d,
        epsilon,
        c1: count * epsilon.powf((d as f64 - 1.0) / 2.0),
        points,
        min_distance,
        mesh_size,
    })
}

/// A packing of convex bodies built from cap removals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportPacking {
    /// Number of caps `N`.
    pub caps: usize,
    /// `ln |W|`.
    pub log_count: f64,
    /// `min_{τ≠τ′} Υ(τ, τ′)^{1/p} δ_p(cap)`.
    pub min_distance: f64,
    pub cap_distance: f64,
    pub min_hamming: usize,
    /// Largest relative gap between the per-cap sum and `Υ δ_p^p` over pairs.
    pub additivity_error: f64,
    pub witnesses: serde_json::Value,
}

/// Packing of bodies `Φ(τ)`, `τ` in a VG code over the caps at the packing
/// points; `δ_p(Φ(τ), Φ(τ′))^p` is the sum of per-cap distances over the
/// coordinates where `τ` and `τ′` differ.
pub fn support_packing_bound(d: u32, p: f64, epsilon: f64, seed: u64) -> Result<SupportPacking> {
    let geom = cap_geometry(epsilon, d, p)?;
    let sphere = sphere_packing_points(d, epsilon, seed)?;
    let n = sphere.points.len();
    if n < 8 {
        return Err(out_of_range("epsilon", epsilon, "small enough for at least 8 caps"));
    }
    let code = vg_code(n, seed)?;
    // caps are congruent, so one quadrature serves every cap
    let per_cap: Vec<f64> = vec![cap_distance_pow(&geom)?; n];
    let cap_pow = per_cap[0];
    let mut min_pow = f64::INFINITY;
    let mut min_hamming = n;
    let mut additivity_error = 0.0f64;
    for i in 0..code.len() {
        for j in i + 1..code.len() {
            let (a, b) = (&code.words[i], &code.words[j]);
            let summed: f64 = (0..n).filter(|&r| a[r] != b[r]).map(|r| per_cap[r]).sum();
            let h = hamming(a, b);
            let direct = h as f64 * cap_pow;
            additivity_error = additivity_error.max((summed - direct).abs() / direct);
            min_hamming = min_hamming.min(h);
            min_pow = min_pow.min(summed);
        }
    }
    Ok(SupportPacking {
        caps: n,
        log_count: (code.len() as f64).ln(),
        min_distance: min_pow.powf(1.0 / p),
        cap_distance: cap_pow.powf(1.0 / p),
        min_hamming,
        additivity_error,
        witnesses: json!({
            "geometry": geom,
            "sin_beta": geom.sin_beta(),
            "sin_beta_floor": geom.sin_beta_floor(),
            "points": sphere.points,
            "sphere_min_distance": sphere.min_distance,
            "c1": sphere.c1,
            "code": code.words,
        }),
    })
}
