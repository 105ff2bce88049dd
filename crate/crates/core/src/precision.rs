//! Arbitrary-precision reals (MPFR) and outward-rounded intervals.

use rug::float::Round;
use rug::Float;

use crate::error::{Error, Result};

/// Real number with a configurable mantissa width.
pub type HighReal = Float;

pub const DEFAULT_PRECISION: u32 = 106;
pub const MIN_PRECISION: u32 = 53;
pub const MAX_PRECISION: u32 = 1 << 14;

pub fn real(prec: u32, v: f64) -> HighReal {
    Float::with_val(prec, v)
}

pub fn parse_real(s: &str, prec: u32) -> Result<HighReal> {
    let p = Float::parse(s.trim()).map_err(|e| Error::Precondition(format!("cannot parse {s:?}: {e}")))?;
    Ok(Float::with_val(prec, p))
}

pub fn check_precision(prec: u32) -> Result<u32> {
    if (MIN_PRECISION..=MAX_PRECISION).contains(&prec) {
        Ok(prec)
    } else {
        Err(Error::Precondition(format!(
            "precision {prec} outside [{MIN_PRECISION}, {MAX_PRECISION}]"
        )))
    }
}

/// Unit in the last place of `x` at its own precision.
pub fn ulp(x: &Float) -> Float {
    let prec = x.prec();
    let exp = x.get_exp().unwrap_or(-(prec as i32));
    Float::with_val(prec, 1) << (exp - prec as i32)
}

/// Distance `|a - b|` measured in units of `ulp(a)`.
pub fn ulps_between(a: &Float, b: &Float) -> f64 {
    let d = Float::with_val(a.prec().max(b.prec()) * 2, a - b).abs();
    (d / ulp(a)).to_f64()
}

macro_rules! down {
    ($p:expr, $e:expr) => {
        Float::with_val_round($p, $e, Round::Down).0
    };
}
macro_rules! up {
    ($p:expr, $e:expr) => {
        Float::with_val_round($p, $e, Round::Up).0
    };
}

/// Closed interval `[lo, hi]` whose arithmetic rounds outward.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: Float,
    pub hi: Float,
}

impl Interval {
    pub fn new(lo: Float, hi: Float) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn point(x: &Float) -> Self {
        Interval { lo: x.clone(), hi: x.clone() }
    }

    pub fn from_f64(prec: u32, lo: f64, hi: f64) -> Self {
        Interval::new(down!(prec, lo), up!(prec, hi))
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    pub fn add(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval { lo: down!(p, &self.lo + &o.lo), hi: up!(p, &self.hi + &o.hi) }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval { lo: down!(p, &self.lo - &o.hi), hi: up!(p, &self.hi - &o.lo) }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: Float::with_val(self.prec(), -&self.hi), hi: Float::with_val(self.prec(), -&self.lo) }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo = down!(p, pairs[0].0 * pairs[0].1);
        let mut hi = up!(p, pairs[0].0 * pairs[0].1);
        for (a, b) in &pairs[1..] {
            let l = down!(p, *a * *b);
            let h = up!(p, *a * *b);
            if l < lo {
                lo = l;
            }
            if h > hi {
                hi = h;
            }
        }
        Interval { lo, hi }
    }

    pub fn sqr(&self) -> Interval {
        let p = self.prec();
        if self.lo.is_sign_positive() && !self.lo.is_zero() || self.lo.is_zero() {
            Interval { lo: down!(p, self.lo.square_ref()), hi: up!(p, self.hi.square_ref()) }
        } else if self.hi.is_sign_negative() || self.hi.is_zero() {
            Interval { lo: down!(p, self.hi.square_ref()), hi: up!(p, self.lo.square_ref()) }
        } else {
            let a = up!(p, self.lo.square_ref());
            let b = up!(p, self.hi.square_ref());
            Interval { lo: Float::new(p), hi: if a > b { a } else { b } }
        }
    }

    /// Square root; `None` unless the interval is non-negative.
    pub fn sqrt(&self) -> Option<Interval> {
        if self.lo.is_sign_negative() && !self.lo.is_zero() {
            return None;
        }
        let p = self.prec();
        Some(Interval { lo: down!(p, self.lo.sqrt_ref()), hi: up!(p, self.hi.sqrt_ref()) })
    }

    /// Natural log; `None` unless the interval is strictly positive.
    pub fn ln(&self) -> Option<Interval> {
        if !self.is_positive() {
            return None;
        }
        let p = self.prec();
        Some(Interval { lo: down!(p, self.lo.ln_ref()), hi: up!(p, self.hi.ln_ref()) })
    }

    pub fn abs(&self) -> Interval {
        if self.is_positive() || self.lo.is_zero() {
            self.clone()
        } else if self.is_negative() || self.hi.is_zero() {
            self.neg()
        } else {
            let a = Float::with_val(self.prec(), -&self.lo);
            let hi = if a > self.hi { a } else { self.hi.clone() };
            Interval { lo: Float::new(self.prec()), hi }
        }
    }

    /// Multiply by a power of two (exact).
    pub fn scale2(&self, k: i32) -> Interval {
        Interval { lo: self.lo.clone() << k, hi: self.hi.clone() << k }
    }

    /// One step of `z -> z^2 + c`.
    pub fn quad(&self, c: &Interval) -> Interval {
        self.sqr().add(c)
    }

    pub fn is_positive(&self) -> bool {
        self.lo.is_sign_positive() && !self.lo.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.hi.is_sign_negative() && !self.hi.is_zero()
    }

    pub fn contains_zero(&self) -> bool {
        !self.is_positive() && !self.is_negative()
    }

    pub fn contains(&self, x: &Float) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    /// True when every point of `self` is strictly below every point of `o`.
    pub fn lt(&self, o: &Interval) -> bool {
        self.hi < o.lo
    }

    pub fn mid(&self) -> Float {
        let p = self.prec() + 1;
        Float::with_val(p, &self.lo + &self.hi) >> 1
    }

    pub fn width(&self) -> Float {
        up!(self.prec(), &self.hi - &self.lo)
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        let lo = if self.lo < o.lo { self.lo.clone() } else { o.lo.clone() };
        let hi = if self.hi > o.hi { self.hi.clone() } else { o.hi.clone() };
        Interval { lo, hi }
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.lo.to_f64_round(Round::Down), self.hi.to_f64_round(Round::Up))
    }
}
