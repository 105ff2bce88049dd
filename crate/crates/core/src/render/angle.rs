use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// An angle `numerator / denominator` in `[0, 1)` with denominator `2^k`
/// or `3 * 2^k`, kept reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RayAngle {
    numerator: u64,
    denominator: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl RayAngle {
    pub fn new(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 || denominator > 1 << 62 {
            return Err(Error::Precondition(format!("bad denominator {denominator}")));
        }
        let num = numerator % denominator;
        let g = gcd(num, denominator).max(1);
        let (num, den) = (num / g, denominator / g);
        let odd = den >> den.trailing_zeros();
        if odd != 1 && odd != 3 {
            return Err(Error::Unsupported(format!("denominator {den} is not 2^k or 3*2^k")));
        }
        Ok(RayAngle { numerator: num, denominator: den })
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// `2 theta mod 1`, exact.
    pub fn double(&self) -> RayAngle {
        let num = (2 * self.numerator) % self.denominator;
        if self.denominator % 2 == 0 {
            RayAngle::new(num, self.denominator).expect("halving keeps the form")
        } else {
            RayAngle { numerator: num, denominator: self.denominator }
        }
    }

    pub fn double_n(&self, k: usize) -> RayAngle {
        (0..k).fold(*self, |a, _| a.double())
    }

    /// `1 - theta mod 1`.
    pub fn conjugate(&self) -> RayAngle {
        RayAngle::new(self.denominator - self.numerator, self.denominator).expect("same denominator")
    }

    /// The two preimages under doubling, `theta / 2` and `(theta + 1) / 2`.
    pub fn halves(&self) -> [RayAngle; 2] {
        let d = 2 * self.denominator;
        [
            RayAngle::new(self.numerator, d).expect("doubling the denominator keeps the form"),
            RayAngle::new(self.numerator + self.denominator, d).expect("doubling the denominator keeps the form"),
        ]
    }
}

impl fmt::Display for RayAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl FromStr for RayAngle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once('/').unwrap_or((s, "1"));
        let a: u64 = a.trim().parse().map_err(|_| Error::Precondition(format!("bad angle '{s}'")))?;
        let b: u64 = b.trim().parse().map_err(|_| Error::Precondition(format!("bad angle '{s}'")))?;
        RayAngle::new(a, b)
    }
}

impl Serialize for RayAngle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `J_n`: angles `t` in `[1/3, 2/3]` with `2^n t mod 1` in `{1/3, 2/3}`.
pub fn angle_catalog(n: usize) -> Result<Vec<RayAngle>> {
    if n > 40 {
        return Err(Error::Unsupported("catalog depth above 40".into()));
    }
    let den = 3u64 << n;
    let lo = 1u64 << n;
    Ok((lo..=2 * lo).filter(|k| k % 3 != 0).map(|k| RayAngle::new(k, den).expect("form 3*2^n")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> RayAngle {
        s.parse().unwrap()
    }

    #[test]
    fn reduction_and_doubling() {
        assert_eq!(a("2/6"), a("1/3"));
        assert_eq!(a("1/3").double(), a("2/3"));
        assert_eq!(a("2/3").double(), a("1/3"));
        assert_eq!(a("5/12").double(), a("5/6"));
        assert_eq!(a("1/2").double(), a("0/1"));
        assert_eq!(a("7/24").double_n(3), a("1/3"));
        assert!(RayAngle::new(1, 5).is_err());
        assert_eq!(a("1/6").conjugate(), a("5/6"));
        assert_eq!(a("5/12").to_string(), "5/12");
        for h in a("7/12").halves() {
            assert_eq!(h.double(), a("7/12"));
        }
    }

    #[test]
    fn catalogs() {
        assert_eq!(angle_catalog(0).unwrap(), vec![a("1/3"), a("2/3")]);
        assert_eq!(angle_catalog(2).unwrap(), vec![a("1/3"), a("5/12"), a("7/12"), a("2/3")]);
        let mut prev = angle_catalog(0).unwrap();
        for n in 1..=8 {
            let next = angle_catalog(n).unwrap();
            assert!(next.len() >= prev.len());
            assert!(prev.iter().all(|t| next.contains(t)));
            for t in &next {
                let d = t.double_n(n);
                assert!(d == a("1/3") || d == a("2/3"));
            }
            prev = next;
        }
    }
}
