//! The Cantor repeller of the third-return map `g = f^3` restricted to the
//! two traps `Y` (negative) and `Y~` (positive) inside `(alpha, -alpha)`.

use rug::Float;
use serde::Serialize;

use crate::dynamics::{iterate, Parameter};
use crate::error::{Error, Result};
use crate::precision::{HighReal, Interval};
use crate::symbolic::ItineraryWord;

/// Three-valued answer of a certified test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Certified {
    Yes,
    No,
    Undecided,
}

/// `[alpha_0, alpha_1, ..., alpha_len]` with `alpha_{k+1} = -sqrt(alpha~_k - c)`,
/// where `alpha~_0 = -alpha` and `alpha~_{k+1} = sqrt(alpha~_k - c)`.
pub fn alpha_chain(c: &Parameter, len: usize) -> Vec<HighReal> {
    let p = c.prec();
    let mut out = vec![c.alpha.clone()];
    let mut tilde = Float::with_val(p, -&c.alpha);
    for _ in 0..len {
        let r = Float::with_val(p, &tilde - &c.c).sqrt();
        out.push(Float::with_val(p, -&r));
        tilde = r;
    }
    out
}

/// Outward-rounded version of [`alpha_chain`] for an interval of parameters.
pub fn alpha_chain_interval(c: &Interval, len: usize) -> Option<Vec<Interval>> {
    let alpha = alpha_interval(c)?;
    let mut out = vec![alpha.clone()];
    let mut tilde = alpha.neg();
    for _ in 0..len {
        let r = tilde.sub(c).sqrt()?;
        out.push(r.neg());
        tilde = r;
    }
    Some(out)
}

/// `alpha(c) = (1 - sqrt(1 - 4c)) / 2` over an interval of `c`.
pub fn alpha_interval(c: &Interval) -> Option<Interval> {
    let p = c.prec();
    let one = Interval::point(&Float::with_val(p, 1));
    let r = one.sub(&c.scale2(2)).sqrt()?;
    Some(one.sub(&r).scale2(-1))
}

/// Rigorous enclosures of the trap endpoints `(Y_lo, Y_hi, Y~_lo, Y~_hi)`:
/// `Y = (-sqrt(alpha_1 - c), -sqrt(alpha_2 - c))` and `Y~ = -Y`.
pub fn trap_enclosures(c: &Interval) -> Option<[Interval; 4]> {
    let chain = alpha_chain_interval(c, 2)?;
    let outer = chain[1].sub(c).sqrt()?;
    let inner = chain[2].sub(c).sqrt()?;
    Some([outer.neg(), inner.neg(), inner, outer])
}

#[derive(Clone, Debug)]
pub struct CantorSystem {
    pub param: Parameter,
    pub trap_y: (HighReal, HighReal),
    pub trap_yt: (HighReal, HighReal),
    /// Left endpoint of `Y`, `gamma = -sqrt(alpha_1 - c)`.
    pub gamma: HighReal,
    pub p: HighReal,
    pub pt: HighReal,
    pub log_mult_p: HighReal,
    pub log_mult_pt: HighReal,
    /// `|Dg(p)| / |Dg(p~)|`.
    pub eta: HighReal,
}

fn g(c: &Float, x: &Float) -> Float {
    let p = x.prec().max(c.prec());
    let mut z = Float::with_val(p, x);
    for _ in 0..3 {
        z = Float::with_val(p, z.square_ref()) + c;
    }
    z
}

fn log_dg(c: &Float, x: &Float) -> Float {
    let p = x.prec();
    let mut z = Float::with_val(p, x);
    let mut acc = Float::new(p);
    for _ in 0..3 {
        acc += Float::with_val(p, &z * 2u32).abs().ln();
        z = Float::with_val(p, z.square_ref()) + c;
    }
    acc
}

fn dg(c: &Float, x: &Float) -> Float {
    let p = x.prec();
    let f1 = Float::with_val(p, x.square_ref()) + c;
    let f2 = Float::with_val(p, f1.square_ref()) + c;
    Float::with_val(p, x * &f1) * &f2 * 8u32
}

/// Bisection on a sign change of `h` over `[a, b]`, to full precision.
pub(crate) fn bisect<F: Fn(&Float) -> Float>(h: F, mut a: Float, mut b: Float) -> Result<Float> {
    let p = a.prec();
    let ha = h(&a);
    let hb = h(&b);
    if ha.is_zero() {
        return Ok(a);
    }
    if hb.is_zero() {
        return Ok(b);
    }
    if ha.is_sign_negative() == hb.is_sign_negative() {
        return Err(Error::NoSignChange { lo: a.to_f64(), hi: b.to_f64() });
    }
    let neg_a = ha.is_sign_negative();
    for _ in 0..(p + 8) {
        let m = Float::with_val(p, &a + &b) / 2u32;
        if m == a || m == b {
            break;
        }
        let hm = h(&m);
        if hm.is_zero() {
            return Ok(m);
        }
        if hm.is_sign_negative() == neg_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Float::with_val(p, &a + &b) / 2u32)
}

/// Locate the traps by a sign scan of `f^3 -+ alpha` on `(alpha, -alpha)`.
fn scan_traps(c: &Parameter) -> Result<Vec<(Float, Float)>> {
    const CELLS: usize = 2048;
    let p = c.prec();
    let lo = c.alpha.clone();
    let hi = Float::with_val(p, -&c.alpha);
    let mut cuts = vec![lo.clone()];
    for target in [c.alpha.clone(), Float::with_val(p, -&c.alpha)] {
        let h = |x: &Float| g(&c.c, x) - &target;
        let width = Float::with_val(p, &hi - &lo);
        let mut xa = lo.clone();
        let mut ha = h(&xa);
        for i in 1..=CELLS {
            let xb = Float::with_val(p, &width * i as u32) / CELLS as u32 + &lo;
            let hb = h(&xb);
            if !ha.is_zero() && !hb.is_zero() && ha.is_sign_negative() != hb.is_sign_negative() {
                cuts.push(bisect(h, xa.clone(), xb.clone())?);
            }
            xa = xb;
            ha = hb;
        }
    }
    cuts.push(hi.clone());
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut comps = Vec::new();
    for w in cuts.windows(2) {
        if w[0] >= w[1] {
            continue;
        }
        let mid = Float::with_val(p, &w[0] + &w[1]) / 2u32;
        let v = g(&c.c, &mid);
        if v > lo && v < hi {
            comps.push((w[0].clone(), w[1].clone()));
        }
    }
    Ok(comps)
}

/// Unique fixed point of `g` inside a trap, by bisection then Newton.
fn trap_fixed_point(c: &Float, a: &Float, b: &Float) -> Result<Float> {
    let p = a.prec();
    let mut x = bisect(|x| g(c, x) - x, a.clone(), b.clone())?;
    for _ in 0..3 {
        let r = g(c, &x) - &x;
        let d = dg(c, &x) - 1u32;
        let next = Float::with_val(p, &x - Float::with_val(p, &r / &d));
        if next <= *a || next >= *b {
            break;
        }
        x = next;
    }
    Ok(x)
}

pub fn build_cantor_system(c: &Parameter) -> Result<CantorSystem> {
    let comps = scan_traps(c)?;
    if comps.len() != 2 || !comps[0].1.is_sign_negative() || comps[1].0.is_sign_negative() {
        return Err(Error::OutsideAdmissibleWindow { components: comps.len() });
    }
    let (y, yt) = (comps[0].clone(), comps[1].clone());
    let p = trap_fixed_point(&c.c, &y.0, &y.1)?;
    let pt = trap_fixed_point(&c.c, &yt.0, &yt.1)?;
    let log_mult_p = log_dg(&c.c, &p);
    let log_mult_pt = log_dg(&c.c, &pt);
    let eta = Float::with_val(c.prec(), &log_mult_p - &log_mult_pt).exp();
    Ok(CantorSystem {
        param: c.clone(),
        gamma: y.0.clone(),
        trap_y: y,
        trap_yt: yt,
        p,
        pt,
        log_mult_p,
        log_mult_pt,
        eta,
    })
}

impl CantorSystem {
    /// `Some(0)` for `Y`, `Some(1)` for `Y~`, `None` outside both traps.
    pub fn trap_of(&self, x: &Float) -> Option<u8> {
        if x > &self.trap_y.0 && x < &self.trap_y.1 {
            Some(0)
        } else if x > &self.trap_yt.0 && x < &self.trap_yt.1 {
            Some(1)
        } else {
            None
        }
    }

    pub fn g(&self, x: &Float) -> Float {
        g(&self.param.c, x)
    }
}

/// Inverse of `g` on the trap `s`: `+-sqrt(-sqrt(sqrt(y - c) - c) - c)`.
pub fn inverse_branch(c: &Interval, y: &Interval, symbol: u8) -> Option<Interval> {
    let r = y.sub(c).sqrt()?.sub(c).sqrt()?.neg().sub(c).sqrt()?;
    Some(if symbol == 0 { r.neg() } else { r })
}

/// Compare `|Dg(p)|` with `|Dg(p~)|` using rigorous enclosures of both
/// fixed points; `Yes` means `eta > 1`.
pub fn eta_positive_check(sys: &CantorSystem) -> Certified {
    let c = Interval::point(&sys.param.c);
    let (Some(lp), Some(lpt)) = (enclosed_log_multiplier(&c, &sys.p), enclosed_log_multiplier(&c, &sys.pt)) else {
        return Certified::Undecided;
    };
    let margin = lp.sub(&lpt);
    if margin.is_positive() {
        Certified::Yes
    } else if margin.is_negative() {
        Certified::No
    } else {
        Certified::Undecided
    }
}

fn g_interval(c: &Interval, x: &Interval) -> Interval {
    x.quad(c).quad(c).quad(c)
}

/// Grow `[x - d, x + d]` until `g(t) - t` provably changes sign across it,
/// then enclose `log|Dg|` over that interval.
fn enclosed_log_multiplier(c: &Interval, x: &Float) -> Option<Interval> {
    let p = x.prec();
    let mut d = crate::precision::ulp(x) * 4u32;
    for _ in 0..20 {
        let lo = Interval::point(&Float::with_val(p, x - &d));
        let hi = Interval::point(&Float::with_val(p, x + &d));
        let rl = g_interval(c, &lo).sub(&lo);
        let rh = g_interval(c, &hi).sub(&hi);
        let brackets = (rl.is_positive() && rh.is_negative()) || (rl.is_negative() && rh.is_positive());
        if brackets {
            let xi = Interval::new(lo.lo, hi.hi);
            let f1 = xi.quad(c);
            let f2 = f1.quad(c);
            let prod = xi.mul(&f1).mul(&f2).scale2(3).abs();
            return prod.ln();
        }
        d *= 16u32;
    }
    None
}

/// Nested pull-back of `[alpha, -alpha]` along `word`; returns the midpoint
/// of the resulting cylinder and its width.
pub fn point_from_itinerary(sys: &CantorSystem, word: &ItineraryWord) -> Result<(HighReal, HighReal)> {
    let c = Interval::point(&sys.param.c);
    let p = sys.param.prec();
    let mut j = Interval::new(sys.param.alpha.clone(), Float::with_val(p, -&sys.param.alpha));
    for &s in word.0.iter().rev() {
        j = inverse_branch(&c, &j, s).ok_or_else(|| Error::Domain("pull-back left the real line".into()))?;
    }
    Ok((j.mid(), j.width()))
}

/// Symbols of `x, g(x), ..., g^{len-1}(x)`.
pub fn itinerary_of_point(sys: &CantorSystem, x: &HighReal, len: usize) -> Result<ItineraryWord> {
    let mut z = x.clone();
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        let s = sys.trap_of(&z).ok_or(Error::Escape { index: k })?;
        out.push(s);
        z = sys.g(&z);
    }
    Ok(ItineraryWord(out))
}

#[derive(Clone, Debug, Serialize)]
pub struct ChiCrit {
    pub horizon: usize,
    /// `(1/h) log|Df^h(c)|`.
    pub estimate: f64,
    /// `(1/3) log|Dg(p~)|`; meaningful only when the critical itinerary has
    /// vanishing zero density.
    pub formula_value: Option<f64>,
    /// Number of consecutive epochs `k` with `f^{n+3k}(c)` in a trap.
    pub epochs_in_cantor: usize,
}

pub fn chi_crit(c: &Parameter, n: usize, horizon: usize) -> Result<ChiCrit> {
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    let orbit = iterate(c, &c.c, horizon);
    if let Some(j) = orbit.critical_hit {
        return Err(Error::CriticalHit { index: j });
    }
    if orbit.len() <= horizon {
        return Err(Error::Escape { index: orbit.len() - 1 });
    }
    let estimate = orbit.log_abs_derivative[horizon].to_f64() / horizon as f64;
    let sys = build_cantor_system(c).ok();
    let mut epochs = 0;
    if let Some(s) = &sys {
        let mut j = n;
        while j <= horizon && s.trap_of(&orbit.points[j]).is_some() {
            epochs += 1;
            j += 3;
        }
    }
    Ok(ChiCrit {
        horizon,
        estimate,
        formula_value: sys.map(|s| s.log_mult_pt.to_f64() / 3.0),
        epochs_in_cantor: epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::real;
    use std::f64::consts::PI;

    fn sys(c: f64) -> CantorSystem {
        build_cantor_system(&Parameter::from_f64(c, 106).unwrap()).unwrap()
    }

    #[test]
    fn traps_at_minus_two() {
        let s = sys(-2.0);
        let outer = (2.0 - 3f64.sqrt()).sqrt();
        let inner = (2.0 - (2.0 + 3f64.sqrt()).sqrt()).sqrt();
        assert!((s.trap_y.0.to_f64() + outer).abs() < 1e-15);
        assert!((s.trap_y.1.to_f64() + inner).abs() < 1e-15);
        assert!((s.trap_yt.0.to_f64() - inner).abs() < 1e-15);
        assert!((s.trap_yt.1.to_f64() - outer).abs() < 1e-15);
        assert!((s.p.to_f64() - 2.0 * (4.0 * PI / 7.0).cos()).abs() < 1e-15);
        assert!((s.pt.to_f64() - 2.0 * (4.0 * PI / 9.0).cos()).abs() < 1e-15);
        assert!((s.eta.to_f64() - 1.0).abs() < 1e-25);
        assert_eq!(s.gamma, s.trap_y.0);
    }

    #[test]
    fn scan_matches_alpha_chain_closed_form() {
        for cv in [-2.0, -1.999, -1.98, -1.9] {
            let c = Parameter::from_f64(cv, 106).unwrap();
            let s = build_cantor_system(&c).unwrap();
            let enc = trap_enclosures(&Interval::point(&c.c)).unwrap();
            let ends = [&s.trap_y.0, &s.trap_y.1, &s.trap_yt.0, &s.trap_yt.1];
            for (e, x) in enc.iter().zip(ends) {
                let d = Float::with_val(106, x - e.mid()).abs().to_f64();
                assert!(d < 1e-28, "c={cv}: endpoint off by {d}");
            }
        }
    }

    #[test]
    fn eta_exceeds_one_just_right_of_minus_two() {
        assert_eq!(eta_positive_check(&sys(-2.0 + 1e-3)), Certified::Yes);
        assert!(sys(-2.0 + 1e-3).eta > 1);
        assert_eq!(eta_positive_check(&sys(-2.0)), Certified::Undecided);
    }

    #[test]
    fn outside_window_is_rejected() {
        let c = Parameter::from_f64(-0.9, 106).unwrap();
        assert!(matches!(build_cantor_system(&c), Err(Error::OutsideAdmissibleWindow { .. })));
    }

    #[test]
    fn constant_words_give_fixed_points() {
        let s = sys(-2.0);
        let (x, w) = point_from_itinerary(&s, &"1111111111".parse().unwrap()).unwrap();
        assert!((x.to_f64() - s.pt.to_f64()).abs() < 1e-8);
        assert!(w.to_f64() < 1e-8);
        let (x, _) = point_from_itinerary(&s, &"0000000000".parse().unwrap()).unwrap();
        assert!((x.to_f64() - s.p.to_f64()).abs() < 1e-8);
    }

    #[test]
    fn gamma_point_escapes() {
        let s = sys(-2.0);
        assert!(matches!(itinerary_of_point(&s, &s.gamma, 3), Err(Error::Escape { index: 0 })));
    }

    #[test]
    fn itinerary_round_trip_all_short_words() {
        let s = sys(-1.99);
        for len in 1..=8usize {
            for bits in 0..(1u32 << len) {
                let w = ItineraryWord((0..len).map(|i| (bits >> i & 1) as u8).collect());
                let (x, _) = point_from_itinerary(&s, &w).unwrap();
                assert_eq!(itinerary_of_point(&s, &x, len).unwrap(), w);
            }
        }
    }

    #[test]
    fn chi_crit_at_minus_two() {
        let c = Parameter::from_f64(-2.0, 106).unwrap();
        let r = chi_crit(&c, 2, 40).unwrap();
        assert!((r.estimate - 4f64.ln()).abs() < 1e-12);
        assert!((r.formula_value.unwrap() - 8f64.ln() / 3.0).abs() < 1e-12);
        assert_eq!(r.epochs_in_cantor, 0);
        let _ = real(106, 0.0);
    }
}
