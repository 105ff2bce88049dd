use std::f64::consts::TAU;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{green_function, Polyline, PolylineKind, RayAngle};
use crate::error::{Error, Result};

/// Potential at which tracing starts. Targets have modulus at least `R^2`,
/// where the Böttcher map is the identity up to a relative `|c| / R^4`.
const LOG_R: f64 = 18.420680743952367; // ln 1e8
/// Ladder points per halving of the potential.
const STEPS: usize = 8;
const NEWTON_ITERS: usize = 60;

#[derive(Clone, Copy)]
enum Plane {
    Dynamical(Complex64),
    Parameter,
}

impl Plane {
    /// `f^m` and its derivative, in `z` or in `c`.
    fn eval(&self, x: Complex64, m: usize) -> (Complex64, Complex64) {
        let one = Complex64::new(1.0, 0.0);
        match *self {
            Plane::Dynamical(c) => {
                let (mut z, mut d) = (x, one);
                for _ in 0..m {
                    d = 2.0 * z * d;
                    z = z * z + c;
                }
                (z, d)
            }
            Plane::Parameter => {
                let (mut z, mut d) = (x, one);
                for _ in 0..m {
                    d = 2.0 * z * d + one;
                    z = z * z + x;
                }
                (z, d)
            }
        }
    }

    fn potential(&self, x: Complex64) -> f64 {
        match *self {
            Plane::Dynamical(c) => green_function(c, x).value,
            Plane::Parameter => green_function(x, x).value,
        }
    }
}

/// `2^m num / den mod 1` as a float, exact in the integer part.
fn doubled_angle(num: u64, den: u64, m: usize) -> f64 {
    let mut a = (num % den) as u128;
    for _ in 0..m {
        a = (2 * a) % den as u128;
    }
    a as f64 / den as f64
}

struct Trace {
    points: Vec<(f64, Complex64)>,
    stalled: bool,
}

/// Potentials `LOG_R * 2^(-i/STEPS)` down to `g_min`, which is included.
fn ladder(g_min: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        let g = LOG_R * (-(i as f64) / STEPS as f64).exp2();
        if g <= g_min * (1.0 + 1e-12) {
            out.push(g_min);
            return out;
        }
        out.push(g);
        i += 1;
    }
}

fn trace(plane: Plane, num: u64, den: u64, g_min: f64) -> Trace {
    let mut z = Complex64::from_polar(LOG_R.exp(), TAU * doubled_angle(num, den, 0));
    let mut points = Vec::new();
    for g in ladder(g_min) {
        let m = (LOG_R / g).log2().ceil().max(0.0) as usize + 1;
        let w = Complex64::from_polar((g * (m as f64).exp2()).exp(), TAU * doubled_angle(num, den, m));
        let mut accepted = false;
        let mut x = z;
        for _ in 0..NEWTON_ITERS {
            let (fx, dfx) = plane.eval(x, m);
            let resid = fx - w;
            if !(resid.norm().is_finite() && dfx.norm() > 0.0) {
                break;
            }
            let step = resid / dfx;
            // Residual scaled back to the plane: evaluation of f^m loses
            // accuracy along orbits that pass near 0.
            if step.norm() <= 1e-12 * x.norm().max(1.0) {
                accepted = true;
                break;
            }
            x -= step;
        }
        // Newton may settle on another preimage of the target.
        let gx = plane.potential(x);
        if !accepted || (gx - g).abs() > 1e-6 * g.max(1e-300) + 1e-14 {
            return Trace { points, stalled: true };
        }
        z = x;
        points.push((g, z));
    }
    Trace { points, stalled: false }
}

/// Least `p` with `2^j (2^p - 1) num = 0 mod den` for some `j`: the period
/// of the eventual cycle of the angle, used to space the landing
/// extrapolation.
fn eventual_period(num: u64, den: u64) -> usize {
    let odd = den >> den.trailing_zeros();
    let a = (num % odd) as u128;
    for p in 1..=2usize {
        if (a * ((1u128 << p) - 1)) % odd as u128 == 0 {
            return p;
        }
    }
    2
}

/// Aitken extrapolation on three ladder points one eventual period apart.
fn landing_estimate(points: &[(f64, Complex64)], spacing: usize) -> Option<Complex64> {
    let last = *points.last()?;
    let n = points.len();
    let gap = spacing * STEPS;
    if n < 2 * gap + 1 {
        return Some(last.1);
    }
    let (z0, z1, z2) = (points[n - 1 - 2 * gap].1, points[n - 1 - gap].1, last.1);
    let (d1, d2) = (z1 - z0, z2 - z1);
    let denom = d2 - d1;
    if denom.norm() == 0.0 {
        return Some(z2);
    }
    let est = z2 - d2 * d2 / denom;
    if (est - z2).norm() > 10.0 * d2.norm() || !est.norm().is_finite() {
        Some(z2)
    } else {
        Some(est)
    }
}

fn polyline(kind: PolylineKind, angle: RayAngle, t: Trace) -> Polyline {
    let spacing = eventual_period(angle.numerator(), angle.denominator());
    let landing = landing_estimate(&t.points, spacing).map(|z| [z.re, z.im]);
    Polyline {
        kind,
        angle: Some(angle),
        level: None,
        points: t.points.iter().map(|(_, z)| [z.re, z.im]).collect(),
        landing_estimate: landing,
        stalled: t.stalled,
    }
}

fn check_gmin(g_min: f64) -> Result<()> {
    if !(g_min > 0.0 && g_min < LOG_R) {
        return Err(Error::Precondition(format!("G_min must lie in (0, {LOG_R}), got {g_min}")));
    }
    Ok(())
}

/// The external ray `R_c(angle)` from potential `ln 1e8` down to `g_min`.
pub fn trace_ray_dynamical(c: Complex64, angle: RayAngle, g_min: f64) -> Result<Polyline> {
    check_gmin(g_min)?;
    let t = trace(Plane::Dynamical(c), angle.numerator(), angle.denominator(), g_min);
    Ok(polyline(PolylineKind::Ray, angle, t))
}

/// The parameter ray of `angle`, solving `f_c^m(c) = Phi(c)^(2^m)` with
/// the analytic `c`-derivative.
pub fn trace_ray_parameter(angle: RayAngle, g_min: f64) -> Result<Polyline> {
    check_gmin(g_min)?;
    let t = trace(Plane::Parameter, angle.numerator(), angle.denominator(), g_min);
    Ok(polyline(PolylineKind::ParameterRay, angle, t))
}

fn equi(plane: Plane, kind: PolylineKind, level: f64, samples: usize, arc: Option<(u64, u64, u64)>) -> Result<Polyline> {
    check_gmin(level)?;
    if samples < 2 {
        return Err(Error::Precondition("need at least 2 samples".into()));
    }
    // Angles num/den; an arc (a, b, d) runs from a/d to b/d.
    let (den, nums): (u64, Vec<u64>) = match arc {
        None => (samples as u64, (0..=samples as u64).collect()),
        Some((a, b, d)) => {
            let den = d * samples as u64;
            (den, (a * samples as u64..=b * samples as u64).collect())
        }
    };
    let traced: Vec<Option<Complex64>> = nums
        .par_iter()
        .map(|&k| {
            let t = trace(plane, k % den, den, level);
            if t.stalled {
                None
            } else {
                t.points.last().map(|p| p.1)
            }
        })
        .collect();
    let stalled = traced.iter().any(Option::is_none);
    Ok(Polyline {
        kind,
        angle: None,
        level: Some(level),
        points: traced.into_iter().flatten().map(|z| [z.re, z.im]).collect(),
        landing_estimate: None,
        stalled,
    })
}

/// The closed equipotential `G_c = level` through `samples` angles `k / samples`.
pub fn equipotential(c: Complex64, level: f64, samples: usize) -> Result<Polyline> {
    equi(Plane::Dynamical(c), PolylineKind::Equipotential, level, samples, None)
}

pub fn equipotential_parameter(level: f64, samples: usize) -> Result<Polyline> {
    equi(Plane::Parameter, PolylineKind::ParameterEquipotential, level, samples, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    Center,
    Beta,
    MinusBeta,
}

impl FromStr for PieceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" => Ok(PieceKind::Center),
            "beta" => Ok(PieceKind::Beta),
            "minus_beta" | "minus-beta" => Ok(PieceKind::MinusBeta),
            _ => Err(Error::Unsupported(format!("piece '{s}'; expected center, beta or minus_beta"))),
        }
    }
}

const CATALOG: &str = "supported: minus_beta and beta at depth 0..=12, center at depth 1..=12";

/// Bounding rays and equipotential arcs `(a, b, d)` of a puzzle piece.
///
/// `P_n(-beta)` is cut out by the rays landing at `alpha_{n-1}` and
/// `P_n(beta)` by those landing at `alpha~_{n-1}`. For `d >= 2` the center
/// piece is the preimage of `P_{d-1}(-beta)`, which holds while `c` lies in
/// that piece, as it does near `-2`.
fn catalog(depth: usize, which: PieceKind) -> Result<(Vec<RayAngle>, Vec<(u64, u64, u64)>)> {
    let r = |a: u64, b: u64| RayAngle::new(a, b).expect("catalog angles have the right form");
    let unsupported = || Error::Unsupported(format!("{which:?} at depth {depth}; {CATALOG}"));
    if depth > 12 {
        return Err(unsupported());
    }
    let n = depth as u32;
    Ok(match (which, depth) {
        (PieceKind::MinusBeta, 0) => (vec![r(1, 3), r(2, 3)], vec![(1, 2, 3)]),
        (PieceKind::Beta, 0) => (vec![r(1, 3), r(2, 3)], vec![(2, 4, 3)]),
        (PieceKind::Center, 0) => return Err(unsupported()),
        (PieceKind::MinusBeta, _) => {
            let d = 3 * 2u64.pow(n);
            let h = 3 * 2u64.pow(n - 1);
            (vec![r(h - 1, d), r(h + 1, d)], vec![(h - 1, h + 1, d)])
        }
        (PieceKind::Beta, _) => {
            let d = 3 * 2u64.pow(n);
            (vec![r(1, d), r(d - 1, d)], vec![(d - 1, d + 1, d)])
        }
        (PieceKind::Center, 1) => {
            (vec![r(1, 3), r(2, 3), r(1, 6), r(5, 6)], vec![(1, 2, 6), (4, 5, 6)])
        }
        (PieceKind::Center, _) => {
            let d = 3 * 2u64.pow(n - 1);
            let h = 3 * 2u64.pow(n - 2);
            let (a, b) = (h - 1, h + 1);
            let dd = 2 * d;
            let rays = vec![r(a, dd), r(b, dd), r(a + d, dd), r(b + d, dd)];
            (rays, vec![(a, b, dd), (a + d, b + d, dd)])
        }
    })
}

/// The boundary of a puzzle piece of `f_c` as polylines: the bounding rays
/// below the equipotential `2^-depth`, then the equipotential arcs.
pub fn puzzle_boundary(c: Complex64, depth: usize, which: PieceKind, g_min: f64) -> Result<Vec<Polyline>> {
    check_gmin(g_min)?;
    let (rays, arcs) = catalog(depth, which)?;
    let level = 0.5f64.powi(depth as i32);
    if g_min >= level {
        return Err(Error::Precondition("G_min must lie below the piece's equipotential".into()));
    }
    let mut out: Vec<Polyline> = rays
        .par_iter()
        .map(|&a| {
            let t = trace(Plane::Dynamical(c), a.numerator(), a.denominator(), g_min);
            let mut line = polyline(PolylineKind::Ray, a, t);
            let keep = line.points.len();
            let start = ladder(g_min).iter().take(keep).take_while(|&&g| g > level * (1.0 + 1e-12)).count();
            line.points.drain(..start.min(keep));
            line
        })
        .collect();
    for (a, b, d) in arcs {
        let mut arc = equi(Plane::Dynamical(c), PolylineKind::Equipotential, level, 64, Some((a, b, d)))?;
        arc.level = Some(level);
        out.push(arc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn cx(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn a(s: &str) -> RayAngle {
        s.parse().unwrap()
    }

    /// Chebyshev model: the point of potential `g` on the ray `theta`.
    fn psi(g: f64, theta: f64) -> Complex64 {
        let w = Complex64::from_polar(g.exp(), TAU * theta);
        w + 1.0 / w
    }

    #[test]
    fn chebyshev_landings() {
        let c = cx(-2.0, 0.0);
        for (s, land, tol) in [("0/1", cx(2.0, 0.0), 1e-6), ("1/2", cx(-2.0, 0.0), 1e-6), ("1/3", cx(-1.0, 0.0), 1e-4)] {
            let ray = trace_ray_dynamical(c, a(s), 1e-8).unwrap();
            let est = ray.landing().unwrap();
            assert!((est - land).norm() < tol, "{s}: {est} stalled={}", ray.stalled);
        }
        let ray = trace_ray_dynamical(c, a("0/1"), 1e-8).unwrap();
        assert!(ray.points.iter().all(|p| p[1].abs() < 1e-12 && p[0] >= 2.0 - 1e-12));
    }

    #[test]
    fn chebyshev_model_agreement() {
        let c = cx(-2.0, 0.0);
        for s in ["1/3", "5/12", "7/24", "1/6", "3/8"] {
            let ang = a(s);
            let ray = trace_ray_dynamical(c, ang, 1e-3).unwrap();
            assert!(!ray.stalled);
            for (g, p) in ladder(1e-3).iter().zip(&ray.points) {
                let model = psi(*g, ang.value());
                assert!((cx(p[0], p[1]) - model).norm() < 1e-8 * model.norm().max(1.0), "{s} g={g}");
            }
        }
    }

    #[test]
    fn equipotentials() {
        let e = equipotential(cx(-2.0, 0.0), LN_2, 64).unwrap();
        assert!((e.points[0][0] - 2.5).abs() < 1e-10 && e.points[0][1].abs() < 1e-12);
        let c = cx(-1.9, 0.1);
        let e = equipotential(c, 0.3, 48).unwrap();
        assert!(!e.stalled);
        for p in &e.points {
            let z = cx(p[0], p[1]);
            assert!((green_function(c, z * z + c).value - 0.6).abs() <= 1e-8);
        }
        let e = equipotential(cx(0.0, 0.0), 0.2, 32).unwrap();
        assert!(e.points.iter().all(|p| (p[0].hypot(p[1]) - 0.2f64.exp()).abs() < 1e-12));
    }

    #[test]
    fn doubling_commutes_with_f() {
        let c = cx(-1.95, 0.0);
        let ang = a("5/24");
        let r1 = trace(Plane::Dynamical(c), ang.numerator(), ang.denominator(), 1e-4);
        let d = ang.double();
        for (g, z) in r1.points.iter().step_by(5).skip(1) {
            let img = trace(Plane::Dynamical(c), d.numerator(), d.denominator(), 2.0 * g);
            let w = img.points.last().unwrap().1;
            assert!((z * z + c - w).norm() < 1e-6 * w.norm().max(1.0), "g={g}");
        }
    }

    #[test]
    fn rays_cross_equipotentials_orthogonally() {
        let c = cx(-1.9, 0.05);
        let (num, den) = (5u64, 24u64);
        let at = |num: u64, den: u64, g: f64| trace(Plane::Dynamical(c), num, den, g).points.last().unwrap().1;
        let g = 0.05;
        let h = 1e-4;
        let ray_t = at(num, den, g * (1.0 + h)) - at(num, den, g * (1.0 - h));
        let eq_t = at(num * 1000 + 1, den * 1000, g) - at(num * 1000 - 1, den * 1000, g);
        let dot = (ray_t.re * eq_t.re + ray_t.im * eq_t.im) / (ray_t.norm() * eq_t.norm());
        assert!(dot.abs() <= 1e-3, "dot = {dot}");
    }

    #[test]
    fn parameter_rays() {
        let r = trace_ray_parameter(a("1/2"), 1e-8).unwrap();
        assert!((r.landing().unwrap() - cx(-2.0, 0.0)).norm() < 1e-6);
        let up = trace_ray_parameter(a("5/12"), 1e-6).unwrap();
        let down = trace_ray_parameter(a("7/12"), 1e-6).unwrap();
        assert_eq!(up.points.len(), down.points.len());
        for (p, q) in up.points.iter().zip(&down.points) {
            let scale = 1e-9 * p[0].hypot(p[1]).max(1.0);
            assert!((p[0] - q[0]).abs() < scale && (p[1] + q[1]).abs() < scale, "{p:?} {q:?}");
        }
        assert!(up.landing_estimate.unwrap()[1].abs() <= 1e-4, "{:?}", up.landing_estimate);
        let e = equipotential_parameter(1.0, 32).unwrap();
        for p in &e.points {
            let c = cx(p[0], p[1]);
            assert!((green_function(c, c).value - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn puzzle_catalogs() {
        let (rays, arcs) = catalog(1, PieceKind::Center).unwrap();
        assert_eq!(rays, vec![a("1/3"), a("2/3"), a("1/6"), a("5/6")]);
        assert_eq!(arcs.len(), 2);
        assert_eq!(catalog(2, PieceKind::MinusBeta).unwrap().0, vec![a("5/12"), a("7/12")]);
        let mut p3 = catalog(3, PieceKind::Center).unwrap().0;
        p3.sort();
        assert_eq!(p3, vec![a("5/24"), a("7/24"), a("17/24"), a("19/24")]);
        assert!(catalog(0, PieceKind::Center).is_err());
        assert!(catalog(13, PieceKind::Beta).is_err());
    }

    #[test]
    fn center_piece_rays_land_on_the_central_interval() {
        let c = cx(-2.0, 0.0);
        let lines = puzzle_boundary(c, 3, PieceKind::Center, 1e-7).unwrap();
        let s = 2.0 * (5.0 * PI / 12.0).cos();
        for l in lines.iter().filter(|l| l.kind == PolylineKind::Ray) {
            let z = l.landing().unwrap();
            assert!((z.re.abs() - s).abs() < 1e-5 && z.im.abs() < 1e-5, "{:?}: {z}", l.angle);
            let first = cx(l.points[0][0], l.points[0][1]);
            assert!(green_function(c, first).value <= 0.125 * (1.0 + 1e-9));
        }
        let arcs: Vec<_> = lines.iter().filter(|l| l.kind == PolylineKind::Equipotential).collect();
        assert_eq!(arcs.len(), 2);
    }
}
