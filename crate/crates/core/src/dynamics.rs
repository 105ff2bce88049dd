//! Iteration of `f_c(z) = z^2 + c`, fixed points, the period-3 cycles and
//! the Chebyshev reference at `c = -2`.

use num_complex::Complex64;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::precision::{real, HighReal};

/// A real parameter together with its fixed points.
///
/// `beta` is the repelling fixed point `(1 + sqrt(1 - 4c)) / 2`, `alpha` the
/// other one, and `interval_ic = [c, c^2 + c]` is the dynamical interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub c: HighReal,
    pub alpha: HighReal,
    pub beta: HighReal,
    pub interval_ic: (HighReal, HighReal),
}

impl Parameter {
    pub fn new(c: HighReal) -> Result<Self> {
        let (alpha, beta) = fixed_points(&c)?;
        let p = c.prec();
        let right = Float::with_val(p, c.square_ref()) + &c;
        Ok(Parameter { interval_ic: (c.clone(), right), c, alpha, beta })
    }

    pub fn from_f64(c: f64, prec: u32) -> Result<Self> {
        Parameter::new(real(prec, c))
    }

    pub fn prec(&self) -> u32 {
        self.c.prec()
    }

    pub fn to_f64(&self) -> f64 {
        self.c.to_f64()
    }
}

/// Fixed points `(alpha, beta)` of a real parameter with `c <= 1/4`.
pub fn fixed_points(c: &HighReal) -> Result<(HighReal, HighReal)> {
    let p = c.prec();
    let disc = Float::with_val(p, 1) - Float::with_val(p, c * 4u32);
    if disc.is_sign_negative() && !disc.is_zero() {
        return Err(Error::Precondition(format!("c = {} > 1/4 has no real fixed points", c.to_f64())));
    }
    let r = disc.sqrt();
    let beta = Float::with_val(p, 1 + &r) / 2u32;
    let alpha = Float::with_val(p, 1 - &r) / 2u32;
    Ok((alpha, beta))
}

/// Fixed points of a complex parameter, `beta` being the root with the
/// larger real part of `sqrt(1 - 4c)`.
pub fn fixed_points_complex(c: Complex64) -> (Complex64, Complex64) {
    let r = (Complex64::new(1.0, 0.0) - 4.0 * c).sqrt();
    ((1.0 - r) / 2.0, (1.0 + r) / 2.0)
}

/// Points of an orbit and `log|Df^j|` along it.
///
/// `log_abs_derivative[j] = log|Df^j(z_0)|`, with the empty product stored
/// as `0` at `j = 0`. An orbit that lands exactly on the critical point
/// stops there with `critical_hit` set instead of carrying `-inf`.
#[derive(Clone, Debug)]
pub struct OrbitLog {
    pub points: Vec<HighReal>,
    pub log_abs_derivative: Vec<HighReal>,
    pub escaped_at: Option<usize>,
    pub critical_hit: Option<usize>,
}

impl OrbitLog {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn default_escape_radius(c: &HighReal) -> f64 {
    (c.to_f64().abs() + 2.0).max(4.0)
}

/// Iterate `m` times from `z0`, stopping early on escape or a critical hit.
pub fn iterate(c: &Parameter, z0: &HighReal, m: usize) -> OrbitLog {
    iterate_with_radius(&c.c, z0, m, default_escape_radius(&c.c))
}

pub fn iterate_with_radius(c: &HighReal, z0: &HighReal, m: usize, radius: f64) -> OrbitLog {
    let p = c.prec().max(z0.prec());
    let mut z = Float::with_val(p, z0);
    let mut ld = Float::new(p);
    let mut points = Vec::with_capacity(m + 1);
    let mut logs = Vec::with_capacity(m + 1);
    points.push(z.clone());
    logs.push(ld.clone());
    let mut escaped_at = None;
    let mut critical_hit = None;
    for j in 0..m {
        if z.is_zero() {
            critical_hit = Some(j);
            break;
        }
        ld += Float::with_val(p, &z * 2u32).abs().ln();
        z = Float::with_val(p, z.square_ref()) + c;
        points.push(z.clone());
        logs.push(ld.clone());
        if z.clone().abs() > radius {
            escaped_at = Some(j + 1);
            break;
        }
    }
    OrbitLog { points, log_abs_derivative: logs, escaped_at, critical_hit }
}

/// Which period-3 cycle: `P` has its point in `(alpha, -alpha)` negative,
/// `Q` positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CycleLabel {
    P,
    Q,
}

#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub label: CycleLabel,
    pub period: usize,
    /// Starts at the unique orbit point inside `(alpha, -alpha)`.
    pub points: Vec<HighReal>,
    pub multiplier_sign: i8,
    pub log_abs_multiplier: HighReal,
}

impl PeriodicOrbit {
    fn from_points(label: CycleLabel, points: Vec<HighReal>) -> Self {
        let p = points[0].prec();
        let mut log = Float::new(p);
        let mut negatives = 0;
        for x in &points {
            if x.is_sign_negative() {
                negatives += 1;
            }
            log += Float::with_val(p, x * 2u32).abs().ln();
        }
        PeriodicOrbit {
            label,
            period: points.len(),
            points,
            multiplier_sign: if negatives % 2 == 0 { 1 } else { -1 },
            log_abs_multiplier: log,
        }
    }

    /// Signed multiplier `Df^period` along the cycle.
    pub fn multiplier(&self) -> HighReal {
        let m = self.log_abs_multiplier.clone().exp();
        if self.multiplier_sign < 0 {
            -m
        } else {
            m
        }
    }
}

type Poly = Vec<Float>;

fn poly_mul(a: &Poly, b: &Poly, p: u32) -> Poly {
    let mut out = vec![Float::new(p); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += Float::with_val(p, x * y);
        }
    }
    out
}

fn horner(poly: &Poly, x: &Float) -> Float {
    let p = x.prec();
    let mut acc = Float::with_val(p, poly.last().unwrap());
    for a in poly.iter().rev().skip(1) {
        acc *= x;
        acc += a;
    }
    acc
}

/// Coefficients (low to high) of `(f^3(z) - z) / (z^2 - z + c)`.
fn period3_factor(c: &Float) -> Poly {
    let p = c.prec();
    let f1: Poly = vec![Float::with_val(p, c), Float::new(p), Float::with_val(p, 1)];
    let mut f2 = poly_mul(&f1, &f1, p);
    f2[0] += c;
    let mut f3 = poly_mul(&f2, &f2, p);
    f3[0] += c;
    f3[1] -= 1u32;
    // Synthetic division by the monic quadratic z^2 - z + c.
    let deg = f3.len() - 1;
    let mut rem = f3;
    let mut q = vec![Float::new(p); deg - 1];
    for k in (2..=deg).rev() {
        let lead = rem[k].clone();
        q[k - 2] = lead.clone();
        rem[k] -= &lead;
        rem[k - 1] += &lead;
        rem[k - 2] -= Float::with_val(p, &lead * c);
    }
    q
}

fn derivative(poly: &Poly) -> Poly {
    poly.iter().enumerate().skip(1).map(|(i, a)| Float::with_val(a.prec(), a * i as u32)).collect()
}

/// Find all sign changes of `poly` on `[lo, hi]` scanned with `cells` cells
/// and refine each by bisection handing off to Newton.
fn real_roots(poly: &Poly, lo: f64, hi: f64, cells: usize, p: u32) -> Vec<Float> {
    let dpoly = derivative(poly);
    let step = (hi - lo) / cells as f64;
    let mut roots = Vec::new();
    let mut xa = real(p, lo);
    let mut fa = horner(poly, &xa);
    for i in 1..=cells {
        let xb = real(p, lo + step * i as f64);
        let fb = horner(poly, &xb);
        if fb.is_zero() {
            roots.push(xb.clone());
        } else if !fa.is_zero() && fa.is_sign_negative() != fb.is_sign_negative() {
            roots.push(refine_root(poly, &dpoly, xa.clone(), xb.clone(), fa.is_sign_negative()));
        }
        xa = xb;
        fa = fb;
    }
    roots
}

fn refine_root(poly: &Poly, dpoly: &Poly, mut a: Float, mut b: Float, neg_at_a: bool) -> Float {
    let p = a.prec();
    for _ in 0..40 {
        let m = Float::with_val(p, &a + &b) / 2u32;
        let fm = horner(poly, &m);
        if fm.is_zero() {
            return m;
        }
        if fm.is_sign_negative() == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    let mut x = Float::with_val(p, &a + &b) / 2u32;
    for _ in 0..12 {
        let fx = horner(poly, &x);
        let dx = horner(dpoly, &x);
        if dx.is_zero() {
            break;
        }
        let step = Float::with_val(p, &fx / &dx);
        let next = Float::with_val(p, &x - &step);
        if next < a || next > b || step.is_zero() {
            break;
        }
        x = next;
    }
    x
}

/// The two real period-3 cycles `(P, Q)`.
///
/// Fails with [`Error::CyclesNotReal`] unless the degree-6 factor has six
/// real roots, which holds for `c < -7/4`.
pub fn period3_orbits(c: &Parameter) -> Result<(PeriodicOrbit, PeriodicOrbit)> {
    let p = c.prec();
    let q = period3_factor(&c.c);
    let bound = c.beta.to_f64().max(2.0) + 1e-3;
    let roots = real_roots(&q, -bound, bound, 4096, p);
    if roots.len() != 6 {
        return Err(Error::CyclesNotReal { found: roots.len() });
    }
    let neg_alpha = Float::with_val(p, -&c.alpha);
    let inside = |x: &Float| x > &c.alpha && x < &neg_alpha;
    let f = |x: &Float| Float::with_val(p, x.square_ref()) + &c.c;
    let nearest = |x: &Float| {
        roots
            .iter()
            .min_by(|a, b| {
                let da = Float::with_val(p, *a - x).abs();
                let db = Float::with_val(p, *b - x).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap()
            .clone()
    };
    let mut found: [Option<PeriodicOrbit>; 2] = [None, None];
    for r in roots.iter().filter(|r| inside(r)) {
        let label = if r.is_sign_negative() { CycleLabel::P } else { CycleLabel::Q };
        let r1 = nearest(&f(r));
        let r2 = nearest(&f(&r1));
        let slot = if label == CycleLabel::P { 0 } else { 1 };
        if found[slot].is_some() {
            return Err(Error::Degenerate("two cycle points inside (alpha, -alpha) share a sign".into()));
        }
        found[slot] = Some(PeriodicOrbit::from_points(label, vec![r.clone(), r1, r2]));
    }
    match found {
        [Some(a), Some(b)] => Ok((a, b)),
        _ => Err(Error::Degenerate("could not separate the two period-3 cycles".into())),
    }
}

/// `d/dc Df^3` along a period-3 cycle from its symmetric functions.
pub fn multiplier_c_derivative(c: &Parameter, cycle: &PeriodicOrbit) -> Result<HighReal> {
    let p = c.prec();
    let [x, y, z] = [&cycle.points[0], &cycle.points[1], &cycle.points[2]];
    let e1 = Float::with_val(p, x + y) + z;
    let e2 = Float::with_val(p, x * y) + Float::with_val(p, x * z) + Float::with_val(p, y * z);
    let e3 = Float::with_val(p, x * y) * z;
    let den = Float::with_val(p, &e3 * 8u32) - 1u32;
    let tol = Float::with_val(p, 1) >> (p / 2);
    if Float::with_val(p, den.abs_ref()) < tol {
        return Err(Error::DerivativeSingular(den.to_f64().abs()));
    }
    let c = &c.c;
    let num = Float::with_val(p, &e2 * 7u32) - Float::with_val(p, c * &e1) * 10u32
        + Float::with_val(p, c.square_ref()) * 12u32;
    Ok(Float::with_val(p, -num * 8u32) / den)
}

/// Finite-difference cross-check of [`multiplier_c_derivative`]: re-solve
/// the labelled cycle at `c +- h`, difference `log|Df^3|` and scale back by
/// the multiplier at `c`.
pub fn multiplier_c_derivative_fd(c: &Parameter, label: CycleLabel, h: &HighReal) -> Result<HighReal> {
    let p = c.prec();
    let pick = |par: &Parameter| -> Result<PeriodicOrbit> {
        let (a, b) = period3_orbits(par)?;
        Ok(if label == CycleLabel::P { a } else { b })
    };
    let plus = pick(&Parameter::new(Float::with_val(p, &c.c + h))?)?;
    let minus = pick(&Parameter::new(Float::with_val(p, &c.c - h))?)?;
    let here = pick(c)?;
    let dlog = Float::with_val(p, &plus.log_abs_multiplier - &minus.log_abs_multiplier) / Float::with_val(p, h * 2u32);
    Ok(dlog * here.multiplier())
}

/// Chebyshev polynomial `T_k(x)` by the three-term recurrence.
pub fn chebyshev_eval(k: usize, x: &HighReal) -> HighReal {
    let p = x.prec();
    let mut t0 = Float::with_val(p, 1);
    if k == 0 {
        return t0;
    }
    let mut t1 = x.clone();
    for _ in 1..k {
        let t2 = Float::with_val(p, x * &t1) * 2u32 - &t0;
        t0 = t1;
        t1 = t2;
    }
    t1
}

/// Geometric pressure of `z^2 - 2`: `max{(1 - t) log 2, -2 t log 2}`.
pub fn cheb_pressure_reference(t: f64) -> f64 {
    let l2 = std::f64::consts::LN_2;
    ((1.0 - t) * l2).max(-2.0 * t * l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cm2() -> Parameter {
        Parameter::from_f64(-2.0, 106).unwrap()
    }

    #[test]
    fn fixed_points_at_minus_two() {
        let c = cm2();
        assert_eq!(c.beta, 2);
        assert_eq!(c.alpha, -1);
        assert_eq!(c.interval_ic.1, 2);
        assert!(Parameter::from_f64(0.3, 106).is_err());
    }

    #[test]
    fn orbit_of_minus_two_sticks_at_beta() {
        let c = cm2();
        let o = iterate(&c, &real(106, -2.0), 5);
        let pts: Vec<f64> = o.points.iter().map(|x| x.to_f64()).collect();
        assert_eq!(pts, vec![-2.0, 2.0, 2.0, 2.0, 2.0, 2.0]);
        let expected = 5.0 * 4f64.ln();
        assert!((o.log_abs_derivative[5].to_f64() - expected).abs() < 1e-14);
        assert_eq!(o.log_abs_derivative[0], 0);
    }

    #[test]
    fn critical_hit_is_flagged() {
        let c = Parameter::from_f64(-1.0, 106).unwrap();
        let o = iterate(&c, &real(106, -1.0), 4);
        assert_eq!(o.critical_hit, Some(1));
        assert_eq!(o.len(), 2);
    }

    #[test]
    fn escape_stops_early() {
        let c = cm2();
        let o = iterate(&c, &real(106, 3.0), 10);
        assert_eq!(o.escaped_at, Some(1));
    }

    #[test]
    fn period3_cycles_at_minus_two_are_cosines() {
        let c = cm2();
        let (p, q) = period3_orbits(&c).unwrap();
        let p0 = 2.0 * (4.0 * PI / 7.0).cos();
        let q0 = 2.0 * (4.0 * PI / 9.0).cos();
        assert!((p.points[0].to_f64() - p0).abs() < 1e-15);
        assert!((q.points[0].to_f64() - q0).abs() < 1e-15);
        assert_eq!(p.multiplier_sign, 1);
        assert_eq!(q.multiplier_sign, -1);
        assert!((p.multiplier().to_f64() - 8.0).abs() < 1e-25);
        assert!((q.multiplier().to_f64() + 8.0).abs() < 1e-25);
    }

    #[test]
    fn cycle_points_are_periodic_to_a_few_ulp() {
        let c = cm2();
        let (p, q) = period3_orbits(&c).unwrap();
        for orbit in [p, q] {
            let o = iterate(&c, &orbit.points[0], 3);
            let d = crate::precision::ulps_between(&orbit.points[0], &o.points[3]);
            assert!(d <= 64.0, "returned point off by {d} ulp");
        }
    }

    #[test]
    fn multiplier_derivatives_at_minus_two() {
        let c = cm2();
        let (p, q) = period3_orbits(&c).unwrap();
        let dp = multiplier_c_derivative(&c, &p).unwrap().to_f64();
        let dq = multiplier_c_derivative(&c, &q).unwrap().to_f64();
        assert!((dp + 16.0).abs() < 1e-12, "{dp}");
        assert!((dq - 24.0).abs() < 1e-12, "{dq}");
    }

    #[test]
    fn closed_form_matches_finite_difference() {
        for cv in [-2.0, -1.99, -1.95] {
            let c = Parameter::from_f64(cv, 128).unwrap();
            let h = real(128, 1e-6);
            let (p, q) = period3_orbits(&c).unwrap();
            for orbit in [p, q] {
                let exact = multiplier_c_derivative(&c, &orbit).unwrap().to_f64();
                let fd = multiplier_c_derivative_fd(&c, orbit.label, &h).unwrap().to_f64();
                assert!((exact - fd).abs() < 1e-4, "c={cv}: {exact} vs {fd}");
            }
        }
    }

    #[test]
    fn no_real_cycles_past_the_tangency() {
        let c = Parameter::from_f64(-1.5, 106).unwrap();
        assert!(matches!(period3_orbits(&c), Err(Error::CyclesNotReal { .. })));
    }

    #[test]
    fn chebyshev_conjugacy() {
        for k in [0usize, 1, 2, 5, 11] {
            for x in [-2.0, -1.3, 0.0, 0.7, 2.0] {
                let t = chebyshev_eval(k, &real(106, x / 2.0)).to_f64() * 2.0;
                let theta = (x / 2.0f64).acos();
                assert!((t - 2.0 * (k as f64 * theta).cos()).abs() < 1e-12);
            }
        }
        // f_{-2}^k(x) = 2 T_{2^k}(x/2)
        let c = cm2();
        let x = real(106, 0.3);
        let o = iterate(&c, &x, 4);
        let t = chebyshev_eval(16, &real(106, 0.15)) * 2u32;
        assert!((o.points[4].to_f64() - t.to_f64()).abs() < 1e-25);
    }

    #[test]
    fn reference_pressure_kink() {
        assert!((cheb_pressure_reference(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((cheb_pressure_reference(-1.0) - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((cheb_pressure_reference(2.0) + std::f64::consts::LN_2).abs() < 1e-15);
    }
}
