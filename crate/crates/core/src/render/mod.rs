//! Green functions, Böttcher coordinates, external rays, equipotentials,
//! puzzle-piece boundaries and Julia images, in double precision.

mod angle;
mod image;
mod rays;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub use angle::{angle_catalog, RayAngle};
pub use image::{julia_image, write_pgm, GrayImage, Window};
pub use rays::{
    equipotential, equipotential_parameter, puzzle_boundary, trace_ray_dynamical, trace_ray_parameter, PieceKind,
};

/// Orbits are followed until `|z| > BAILOUT`; the Böttcher map there differs
/// from the identity by a relative `|c| / BAILOUT^2`.
pub const BAILOUT: f64 = 1e10;
pub const MAX_ITER: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolylineKind {
    Ray,
    ParameterRay,
    Equipotential,
    ParameterEquipotential,
}

#[derive(Clone, Debug, Serialize)]
pub struct Polyline {
    pub kind: PolylineKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<RayAngle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    pub points: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landing_estimate: Option<[f64; 2]>,
    /// Newton failed before the requested potential was reached.
    pub stalled: bool,
}

impl Polyline {
    pub fn last(&self) -> Option<Complex64> {
        self.points.last().map(|p| Complex64::new(p[0], p[1]))
    }

    pub fn landing(&self) -> Option<Complex64> {
        self.landing_estimate.map(|p| Complex64::new(p[0], p[1]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenValue {
    pub value: f64,
    /// The orbit did not leave the bailout disk within the budget, so
    /// `value` is 0 and the point may lie in the filled Julia set or close
    /// to its boundary.
    pub unresolved: bool,
}

/// Escape index and the orbit point past the bailout.
fn escape(c: Complex64, z: Complex64) -> Option<(usize, Complex64)> {
    let mut z = z;
    for n in 0..MAX_ITER {
        if z.norm() > BAILOUT {
            return Some((n, z));
        }
        z = z * z + c;
    }
    None
}

/// `G_c(z) = lim 2^-N log|f^N(z)|`.
pub fn green_function(c: Complex64, z: Complex64) -> GreenValue {
    match escape(c, z) {
        Some((n, w)) => {
            // log|phi(w)| = log|w| + log|1 + c/(2w^2) + ...|
            let corr = (Complex64::new(1.0, 0.0) + c / (2.0 * w * w)).norm().ln();
            GreenValue { value: (w.norm().ln() + corr) * 0.5f64.powi(n as i32), unresolved: false }
        }
        None => GreenValue { value: 0.0, unresolved: true },
    }
}

/// `phi_c(z)`, defined where `G_c(z) > G_c(0)`.
pub fn bottcher(c: Complex64, z: Complex64) -> Result<Complex64> {
    let g0 = green_function(c, Complex64::new(0.0, 0.0)).value;
    let gz = green_function(c, z).value;
    if !(gz > g0) {
        return Err(Error::Domain(format!("G_c(z) = {gz} does not exceed G_c(0) = {g0}")));
    }
    let mut orbit = vec![z];
    let mut w = z;
    while w.norm() <= BAILOUT {
        w = w * w + c;
        orbit.push(w);
    }
    let last = *orbit.last().expect("orbit is non-empty");
    let mut phi = last * (Complex64::new(1.0, 0.0) + c / (2.0 * last * last));
    // Pull back one square root at a time, keeping phi(z_k) on the side
    // of z_k; phi(z) / z -> 1 as z -> infinity.
    for zk in orbit.iter().rev().skip(1) {
        let r = phi.sqrt();
        phi = if (r * zk.conj()).re >= 0.0 { r } else { -r };
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn green_at_chebyshev() {
        let g = green_function(cx(-2.0, 0.0), cx(3.0, 0.0));
        assert!((g.value - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
        assert!(!g.unresolved);
        let g = green_function(cx(-2.0, 0.0), cx(1.0, 0.0));
        assert_eq!(g.value, 0.0);
        assert!(g.unresolved);
    }

    #[test]
    fn green_functional_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for c in [cx(-2.0, 0.0), cx(-1.9, 0.0), cx(0.25, 0.3)] {
            let mut done = 0;
            while done < 100 {
                let z = cx(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                let g = green_function(c, z);
                if g.unresolved {
                    continue;
                }
                let g2 = green_function(c, z * z + c).value;
                assert!((g2 - 2.0 * g.value).abs() <= 1e-10, "c={c} z={z}");
                done += 1;
            }
        }
    }

    #[test]
    fn bottcher_values() {
        let phi = bottcher(cx(-2.0, 0.0), cx(3.0, 0.0)).unwrap();
        assert!((phi - cx((3.0 + 5f64.sqrt()) / 2.0, 0.0)).norm() < 1e-12);
        for z in [cx(1.5, 0.2), cx(-0.3, 1.1), cx(-4.0, -2.0)] {
            assert!((bottcher(cx(0.0, 0.0), z).unwrap() - z).norm() < 1e-13);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = cx(-2.0, 0.0);
        for _ in 0..100 {
            let z = cx(rng.gen_range(-3.0..3.0), rng.gen_range(0.05..3.0));
            let phi = bottcher(c, z).unwrap();
            // Chebyshev model: phi(z) = (z + sqrt(z^2 - 4)) / 2 outside [-2, 2].
            let s = (z * z - 4.0).sqrt();
            let model = if ((z + s) / 2.0).norm() >= 1.0 { (z + s) / 2.0 } else { (z - s) / 2.0 };
            assert!((phi - model).norm() < 1e-9, "z={z}: {phi} vs {model}");
            assert!((phi.norm().ln() - green_function(c, z).value).abs() < 1e-10);
        }
        assert!(matches!(bottcher(cx(-1.0, 0.0), cx(0.1, 0.0)), Err(Error::Domain(_))));
    }
}
