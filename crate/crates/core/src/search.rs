//! Certified search for parameters whose critical orbit follows a prescribed
//! trap itinerary, using outward-rounded interval evaluation of the orbit.

use rug::Float;
use serde::Serialize;

use crate::cantor::{alpha_chain_interval, trap_enclosures};
use crate::dynamics::Parameter;
use crate::error::{Error, Result};
use crate::precision::{check_precision, HighReal, Interval};
use crate::symbolic::ItineraryWord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Refuted,
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    /// `c < 0`.
    NegativeParameter,
    /// `f^j(c) > 0` for `0 < j < n`.
    Preperiod,
    /// `f^{n+3k+1}(c) < 0`.
    SignNegative,
    /// `f^{n+3k+2}(c) > 0`.
    SignPositive,
    /// `f^{n+3k}(c)` in `Y` or `Y~`.
    Trap,
    /// `f^{n+3k}(c)` in the trap named by the prescribed symbol.
    Symbol,
    /// The traps exist at all.
    AdmissibleWindow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Condition {
    pub kind: ConditionKind,
    pub epoch: Option<usize>,
    /// Orbit index `j` of `f^j(c)` involved.
    pub index: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub verdict: Verdict,
    /// First refuted condition, or the first undecided one if none is refuted.
    pub first_failing_condition: Option<Condition>,
    /// Lower bound on the distance of the orbit to the nearest boundary of a
    /// condition; only meaningful when verified.
    pub margin: f64,
    pub epochs: usize,
}

#[derive(Clone, Copy)]
enum Tri {
    True,
    False,
    Unknown,
}

struct Checker {
    verdict: Verdict,
    failure: Option<Condition>,
    margin: f64,
}

impl Checker {
    fn new() -> Self {
        Checker { verdict: Verdict::Verified, failure: None, margin: f64::INFINITY }
    }

    /// Returns `false` once a condition is refuted.
    fn record(&mut self, t: Tri, cond: Condition, margin: f64) -> bool {
        match t {
            Tri::True => {
                self.margin = self.margin.min(margin);
                true
            }
            Tri::False => {
                self.verdict = Verdict::Refuted;
                self.failure = Some(cond);
                false
            }
            Tri::Unknown => {
                if self.verdict == Verdict::Verified {
                    self.verdict = Verdict::Undecided;
                    self.failure = Some(cond);
                }
                self.margin = 0.0;
                true
            }
        }
    }
}

fn sign_test(z: &Interval, positive: bool) -> (Tri, f64) {
    let (lo, hi) = z.to_f64_pair();
    if positive {
        if z.is_positive() {
            (Tri::True, lo)
        } else if !z.hi.is_sign_positive() || z.hi.is_zero() {
            (Tri::False, 0.0)
        } else {
            (Tri::Unknown, 0.0)
        }
    } else if z.is_negative() {
        (Tri::True, -hi)
    } else if z.lo.is_sign_positive() || z.lo.is_zero() {
        (Tri::False, 0.0)
    } else {
        (Tri::Unknown, 0.0)
    }
}

/// Membership of `z` in the open interval with enclosed endpoints `a`, `b`.
fn inside(z: &Interval, a: &Interval, b: &Interval) -> (Tri, f64) {
    if z.lo > a.hi && z.hi < b.lo {
        let m1 = Float::with_val(53, &z.lo - &a.hi).to_f64();
        let m2 = Float::with_val(53, &b.lo - &z.hi).to_f64();
        (Tri::True, m1.min(m2))
    } else if z.hi <= a.lo || z.lo >= b.hi {
        (Tri::False, 0.0)
    } else {
        (Tri::Unknown, 0.0)
    }
}

/// Whether the traps exist over the whole parameter interval.
fn window(c: &Interval) -> Tri {
    let Some(alpha) = crate::cantor::alpha_interval(c) else { return Tri::Unknown };
    // alpha_1 - c = -sqrt(-alpha - c) - c >= 0 iff -alpha - c <= c^2.
    let slack = c.sqr().add(&alpha).add(c);
    if slack.is_positive() {
        match alpha_chain_interval(c, 2) {
            Some(_) => Tri::True,
            None => Tri::Unknown,
        }
    } else if slack.is_negative() {
        Tri::False
    } else {
        Tri::Unknown
    }
}

/// Check every condition over a parameter interval, through epoch `k_max`,
/// forcing the trap symbols listed in `symbols` for the first epochs.
pub fn evaluate(c: &Interval, n: usize, k_max: usize, symbols: &[u8]) -> MembershipReport {
    let mut ck = Checker::new();
    let report = |ck: Checker| MembershipReport {
        verdict: ck.verdict,
        first_failing_condition: ck.failure,
        margin: if ck.verdict == Verdict::Verified { ck.margin } else { 0.0 },
        epochs: k_max,
    };
    let neg = sign_test(c, false);
    if !ck.record(neg.0, Condition { kind: ConditionKind::NegativeParameter, epoch: None, index: 0 }, neg.1) {
        return report(ck);
    }
    let len = n + 3 * k_max + 2;
    let mut orbit = Vec::with_capacity(len + 1);
    orbit.push(c.clone());
    for j in 1..=len {
        let z = orbit[j - 1].quad(c);
        orbit.push(z);
    }
    for (j, z) in orbit.iter().enumerate().take(n).skip(1) {
        let (t, m) = sign_test(z, true);
        if !ck.record(t, Condition { kind: ConditionKind::Preperiod, epoch: None, index: j }, m) {
            return report(ck);
        }
    }
    let mut traps = None;
    for k in 0..=k_max {
        let base = n + 3 * k;
        let (t, m) = sign_test(&orbit[base + 1], false);
        if !ck.record(t, Condition { kind: ConditionKind::SignNegative, epoch: Some(k), index: base + 1 }, m) {
            return report(ck);
        }
        let (t, m) = sign_test(&orbit[base + 2], true);
        if !ck.record(t, Condition { kind: ConditionKind::SignPositive, epoch: Some(k), index: base + 2 }, m) {
            return report(ck);
        }
        if traps.is_none() {
            let w = window(c);
            let cond = Condition { kind: ConditionKind::AdmissibleWindow, epoch: Some(k), index: base };
            match w {
                Tri::True => traps = trap_enclosures(c),
                _ => {
                    ck.record(w, cond, 0.0);
                    return report(ck);
                }
            }
            if traps.is_none() {
                ck.record(Tri::Unknown, cond, 0.0);
                return report(ck);
            }
        }
        let [ya, yb, ta, tb] = traps.as_ref().unwrap();
        let z = &orbit[base];
        let in_y = inside(z, ya, yb);
        let in_t = inside(z, ta, tb);
        let (t, m, kind) = match symbols.get(k) {
            Some(0) => (in_y.0, in_y.1, ConditionKind::Symbol),
            Some(_) => (in_t.0, in_t.1, ConditionKind::Symbol),
            None => match (in_y.0, in_t.0) {
                (Tri::True, _) => (Tri::True, in_y.1, ConditionKind::Trap),
                (_, Tri::True) => (Tri::True, in_t.1, ConditionKind::Trap),
                (Tri::False, Tri::False) => (Tri::False, 0.0, ConditionKind::Trap),
                _ => (Tri::Unknown, 0.0, ConditionKind::Trap),
            },
        };
        if !ck.record(t, Condition { kind, epoch: Some(k), index: base }, m) {
            return report(ck);
        }
    }
    report(ck)
}

/// Whether `c` lies in the parameter set `K_n` as far as epoch `k_max`.
pub fn kn_membership(c: &Parameter, n: usize, k_max: usize) -> MembershipReport {
    evaluate(&Interval::point(&c.c), n, k_max, &[])
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub precision: u32,
    pub max_precision: u32,
    pub max_cells: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { precision: crate::precision::DEFAULT_PRECISION, max_precision: 1024, max_cells: 2_000_000 }
    }
}

/// Parameter interval whose midpoint is certified to follow the prefix.
#[derive(Clone, Debug)]
pub struct CertifiedInterval {
    pub lo: HighReal,
    pub hi: HighReal,
    pub n: usize,
    pub prefix: ItineraryWord,
    /// Epochs verified: `0..=prefix.len()`.
    pub epochs: usize,
    pub precision: u32,
    pub margin: f64,
    pub cells_examined: usize,
    /// Whether `[lo, hi]` is the whole (numerically resolved) component.
    pub full_component: bool,
}

impl CertifiedInterval {
    pub fn midpoint(&self) -> HighReal {
        Float::with_val(self.precision, &self.lo + &self.hi) / 2u32
    }

    pub fn parameter(&self) -> Parameter {
        Parameter::new(self.midpoint()).expect("certified parameters lie below 1/4")
    }

    pub fn width(&self) -> f64 {
        Float::with_val(self.precision, &self.hi - &self.lo).to_f64()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifiedIntervalJson {
    pub lo: String,
    pub hi: String,
    pub midpoint: String,
    pub width: f64,
    pub n: usize,
    pub prefix: ItineraryWord,
    pub epochs: usize,
    pub precision: u32,
    pub margin: f64,
    pub cells_examined: usize,
    pub full_component: bool,
}

impl From<&CertifiedInterval> for CertifiedIntervalJson {
    fn from(c: &CertifiedInterval) -> Self {
        CertifiedIntervalJson {
            lo: c.lo.to_string_radix(10, None),
            hi: c.hi.to_string_radix(10, None),
            midpoint: c.midpoint().to_string_radix(10, None),
            width: c.width(),
            n: c.n,
            prefix: c.prefix.clone(),
            epochs: c.epochs,
            precision: c.precision,
            margin: c.margin,
            cells_examined: c.cells_examined,
            full_component: c.full_component,
        }
    }
}

fn point_verified(x: &Float, n: usize, prefix: &[u8]) -> bool {
    evaluate(&Interval::point(x), n, prefix.len(), prefix).verdict == Verdict::Verified
}

/// Move from the verified point `inside` towards `dir` (+-1) until leaving
/// the verified set, then bisect the crossing down to `eps`.
fn component_edge(inside: &Float, dir: i32, start: &Float, eps: &Float, n: usize, prefix: &[u8]) -> Float {
    let p = inside.prec();
    let mut good = inside.clone();
    let mut step = start.clone();
    let limit_lo = Float::with_val(p, -2);
    let limit_hi = Float::with_val(p, -0.75);
    let mut bad;
    loop {
        let cand = if dir < 0 { Float::with_val(p, &good - &step) } else { Float::with_val(p, &good + &step) };
        if cand <= limit_lo || cand >= limit_hi || !point_verified(&cand, n, prefix) {
            bad = cand;
            break;
        }
        good = cand;
        step *= 2u32;
    }
    while Float::with_val(p, &bad - &good).abs() > *eps {
        let m = Float::with_val(p, &good + &bad) / 2u32;
        if m == good || m == bad {
            break;
        }
        if point_verified(&m, n, prefix) {
            good = m;
        } else {
            bad = m;
        }
    }
    good
}

/// Leftmost certified interval of width at most `tol` whose midpoint has
/// critical orbit following `prefix` (epochs `0..prefix.len()`) and
/// entering a trap at epoch `prefix.len()`.
pub fn find_parameter(n: usize, prefix: &ItineraryWord, tol: f64, opts: &SearchOptions) -> Result<CertifiedInterval> {
    if n < 1 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition("tol must be positive".into()));
    }
    check_precision(opts.precision)?;
    let symbols = &prefix.0[..];
    let k_max = symbols.len();
    let mut prec = opts.precision;
    let mut stack: Vec<(Float, Float, u32)> = vec![(Float::with_val(prec, -2), Float::with_val(prec, -0.75), prec)];
    let mut examined = 0usize;
    let mut exhausted = 0usize;
    let min_width = tol * 2f64.powi(-24);
    let found = loop {
        let Some((a, b, cp)) = stack.pop() else {
            return Err(Error::NotFound(format!(
                "no certified cell after {examined} cells ({exhausted} unresolved at the width floor)"
            )));
        };
        examined += 1;
        if examined > opts.max_cells {
            return Err(Error::NotFound(format!("cell budget {} exhausted", opts.max_cells)));
        }
        let cell = Interval::new(a.clone(), b.clone());
        match evaluate(&cell, n, k_max, symbols).verdict {
            Verdict::Refuted => continue,
            Verdict::Verified => {
                prec = cp;
                break (a, b);
            }
            Verdict::Undecided => {}
        }
        let width = Float::with_val(cp, &b - &a);
        if width.to_f64() < min_width {
            exhausted += 1;
            continue;
        }
        let floor = crate::precision::ulp(&a) << 8u32;
        if width < floor {
            if cp * 2 > opts.max_precision {
                exhausted += 1;
                continue;
            }
            let np = cp * 2;
            stack.push((Float::with_val(np, &a), Float::with_val(np, &b), np));
            continue;
        }
        let m = Float::with_val(cp, &a + &b) / 2u32;
        stack.push((m.clone(), b, cp));
        stack.push((a, m, cp));
    };

    let (a, b) = found;
    let cell_width = Float::with_val(prec, &b - &a);
    let eps = Float::with_val(prec, &cell_width >> 12u32);
    let start = Float::with_val(prec, &cell_width >> 4u32);
    let lo = component_edge(&a, -1, &start, &eps, n, symbols);
    let hi = component_edge(&b, 1, &start, &eps, n, symbols);
    let comp_width = Float::with_val(prec, &hi - &lo).to_f64();
    let (mut lo, mut hi, mut full) = (lo, hi, true);
    if comp_width > tol {
        let mid = Float::with_val(prec, &lo + &hi) / 2u32;
        let half = Float::with_val(prec, tol / 2.0);
        lo = Float::with_val(prec, &mid - &half);
        hi = Float::with_val(prec, &mid + &half);
        full = false;
    }
    let mut mid = Float::with_val(prec, &lo + &hi) / 2u32;
    let mut check = evaluate(&Interval::point(&mid), n, k_max, symbols);
    if check.verdict != Verdict::Verified {
        // The resolved component had a hole; fall back to the verified cell.
        lo = a.clone();
        hi = b.clone();
        if Float::with_val(prec, &hi - &lo).to_f64() > tol {
            hi = Float::with_val(prec, &lo + tol);
        }
        full = false;
        mid = Float::with_val(prec, &lo + &hi) / 2u32;
        check = evaluate(&Interval::point(&mid), n, k_max, symbols);
        if check.verdict != Verdict::Verified {
            return Err(Error::NotFound("verified cell lost its certificate at the midpoint".into()));
        }
    }
    Ok(CertifiedInterval {
        lo,
        hi,
        n,
        prefix: prefix.clone(),
        epochs: k_max,
        precision: prec,
        margin: check.margin,
        cells_examined: examined,
        full_component: full,
    })
}

/// `z_a(c) - z_b(c)` and its `c`-derivative, where `z_0 = c` and
/// `z_{j+1} = z_j^2 + c`.
pub fn preperiodic_residual(c: &Float, a: usize, b: usize) -> (Float, Float) {
    let p = c.prec();
    let mut z = c.clone();
    let mut dz = Float::with_val(p, 1);
    let (mut za, mut dza, mut zb, mut dzb) = (Float::new(p), Float::new(p), Float::new(p), Float::new(p));
    for j in 0..=a.max(b) {
        if j == a {
            za = z.clone();
            dza = dz.clone();
        }
        if j == b {
            zb = z.clone();
            dzb = dz.clone();
        }
        let nz = Float::with_val(p, z.square_ref()) + c;
        dz = Float::with_val(p, &z * &dz) * 2u32 + 1u32;
        z = nz;
    }
    (za - zb, dza - dzb)
}

/// Root of `z_a(c) = z_b(c)` in `[lo, hi]` by safeguarded Newton.
pub fn refine_preperiodic_root(a: usize, b: usize, lo: &Float, hi: &Float) -> Result<Float> {
    let p = lo.prec().max(hi.prec());
    let mut lo = Float::with_val(p, lo);
    let mut hi = Float::with_val(p, hi);
    let (glo, _) = preperiodic_residual(&lo, a, b);
    let (ghi, _) = preperiodic_residual(&hi, a, b);
    if glo.is_zero() {
        return Ok(lo);
    }
    if ghi.is_zero() {
        return Ok(hi);
    }
    if glo.is_sign_negative() == ghi.is_sign_negative() {
        return Err(Error::NoSignChange { lo: lo.to_f64(), hi: hi.to_f64() });
    }
    let neg_lo = glo.is_sign_negative();
    let mut x = Float::with_val(p, &lo + &hi) / 2u32;
    for _ in 0..(4 * p) {
        let (g, dg) = preperiodic_residual(&x, a, b);
        if g.is_zero() {
            return Ok(x);
        }
        if g.is_sign_negative() == neg_lo {
            lo = x.clone();
        } else {
            hi = x.clone();
        }
        let newton = if dg.is_zero() { None } else { Some(Float::with_val(p, &x - Float::with_val(p, &g / &dg))) };
        let next = match newton {
            Some(nx) if nx > lo && nx < hi => nx,
            _ => Float::with_val(p, &lo + &hi) / 2u32,
        };
        if next == x {
            return Ok(x);
        }
        let step = Float::with_val(p, &next - &x).abs();
        x = next;
        if step <= crate::precision::ulp(&x) {
            return Ok(x);
        }
        if lo >= hi {
            break;
        }
    }
    Ok(x)
}

/// Parameter with `f^{n+3(pre+per)}(c) = f^{n+3 pre}(c)` inside `seed`.
pub fn refine_eventually_periodic(
    n: usize,
    preperiod: usize,
    period: usize,
    seed: &CertifiedInterval,
) -> Result<Parameter> {
    if period == 0 {
        return Err(Error::Precondition("period must be positive".into()));
    }
    let a = n + 3 * (preperiod + period);
    let b = n + 3 * preperiod;
    // z_j counts from z_0 = c, i.e. z_j = f^{j+1}(0) = f^j(c).
    let root = refine_preperiodic_root(a, b, &seed.lo, &seed.hi)?;
    Parameter::new(root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::real;

    fn par(c: f64) -> Parameter {
        Parameter::from_f64(c, 106).unwrap()
    }

    #[test]
    fn minus_two_fails_first_sign_condition() {
        let r = kn_membership(&par(-2.0), 6, 1);
        assert_eq!(r.verdict, Verdict::Refuted);
        let f = r.first_failing_condition.unwrap();
        assert_eq!(f.kind, ConditionKind::SignNegative);
        assert_eq!(f.index, 7);
        assert_eq!(f.epoch, Some(0));
    }

    #[test]
    fn outside_window_fails_early() {
        let r = kn_membership(&par(-0.9), 3, 0);
        assert_eq!(r.verdict, Verdict::Refuted);
        let f = r.first_failing_condition.unwrap();
        assert_eq!(f.kind, ConditionKind::Preperiod);
        assert_eq!(f.index, 1);
        assert_eq!(kn_membership(&par(0.1), 3, 0).first_failing_condition.unwrap().kind, ConditionKind::NegativeParameter);
    }

    #[test]
    fn finds_short_prefix_and_certifies_midpoint() {
        let w: ItineraryWord = "1".parse().unwrap();
        let ci = find_parameter(4, &w, 1e-3, &SearchOptions::default()).unwrap();
        assert!(ci.lo < ci.hi);
        assert!(ci.width() <= 1e-3 + 1e-18);
        let r = evaluate(&Interval::point(&ci.midpoint()), 4, 1, &[1]);
        assert_eq!(r.verdict, Verdict::Verified);
        assert!(r.margin > 0.0);
    }

    #[test]
    fn residual_analog_at_minus_two() {
        // f^3(c) = f(c) at c = -2.
        let (g, _) = preperiodic_residual(&real(106, -2.0), 3, 1);
        assert_eq!(g, 0);
        let root = refine_preperiodic_root(3, 1, &real(106, -2.1), &real(106, -1.9)).unwrap();
        assert!((root.to_f64() + 2.0).abs() < 1e-28);
    }

    #[test]
    fn rejects_bad_inputs() {
        let w = ItineraryWord::default();
        assert!(find_parameter(0, &w, 1e-3, &SearchOptions::default()).is_err());
        assert!(find_parameter(3, &w, 0.0, &SearchOptions::default()).is_err());
    }
}
