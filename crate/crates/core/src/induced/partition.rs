use serde::Serialize;

use super::{BranchInventory, ReturnBranch, Truncation};
use crate::dynamics::{iterate, Parameter};
use crate::error::{Error, Result};
use crate::pressure::{lse2, RATIO_MARGIN};

/// Two-sided bounds on `log Z_ell(t, p)`.
#[derive(Clone, Debug, Serialize)]
pub struct ZReport {
    pub t: f64,
    pub p: f64,
    pub ell: usize,
    /// Partial sum with `inf |D phi|`, raised to the power `ell`.
    pub log_z_lower: f64,
    /// Partial sum with `sup |D phi|` plus the truncation tail, to the power `ell`.
    pub log_z_upper: f64,
    /// Tail added to the `ell = 1` upper sum, if the decay allowed one.
    pub log_tail: Option<f64>,
    /// Worst per-step decay ratio among the tails.
    pub ratio: f64,
}

fn term_bounds(b: &ReturnBranch, t: f64, p: f64) -> (f64, f64) {
    let base = -(b.return_time as f64) * p;
    let (x, y) = (-t * b.log_sup_df, -t * b.log_inf_df);
    (base + x.min(y), base + x.max(y))
}

fn lse(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, lse2)
}

/// Geometric tail after `buckets`, from the ratio of the last two blocks of
/// three. Returns `(log tail, per-step ratio)`; the tail is `+inf` when the
/// ratio is not below `1 - RATIO_MARGIN`.
fn block_tail(buckets: &[f64]) -> (f64, f64) {
    let k = buckets.len();
    if k < 6 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let b1 = lse(buckets[k - 3..].iter().cloned());
    let b0 = lse(buckets[k - 6..k - 3].iter().cloned());
    if b1 == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, 0.0);
    }
    let log_r = b1 - b0;
    let ratio = (log_r / 3.0).exp();
    if !(ratio <= 1.0 - RATIO_MARGIN) {
        return (f64::INFINITY, ratio);
    }
    let r = log_r.exp();
    (b1 + log_r - (1.0 - r).ln(), ratio)
}

/// `(log Z_1^-, log Z_1^+, log tail, ratio)`.
fn z1_bounds(inv: &BranchInventory, t: f64, p: f64) -> (f64, f64, f64, f64) {
    let lower = lse(inv.branches.iter().map(|b| term_bounds(b, t, p).0));
    match inv.truncation {
        Truncation::ReturnTime { m_max } => {
            let mut buckets = vec![f64::NEG_INFINITY; m_max + 1];
            for b in &inv.branches {
                buckets[b.return_time] = lse2(buckets[b.return_time], term_bounds(b, t, p).1);
            }
            let partial = lse(buckets.iter().cloned());
            let (tail, ratio) = block_tail(&buckets[1..]);
            (lower, lse2(partial, tail), tail, ratio)
        }
        Truncation::Levels { k_max, m_land } => {
            let mut per_level = vec![vec![f64::NEG_INFINITY; m_land + 1]; k_max + 1];
            for b in &inv.branches {
                let Some(k) = b.level else { continue };
                let base = inv.n + 3 * k + 1;
                if k > k_max || b.return_time < base || b.return_time - base > m_land {
                    continue;
                }
                let cell = &mut per_level[k][b.return_time - base];
                *cell = lse2(*cell, term_bounds(b, t, p).1);
            }
            let mut worst: f64 = 0.0;
            let totals: Vec<f64> = per_level
                .iter()
                .map(|buckets| {
                    let (tail, ratio) = block_tail(buckets);
                    worst = worst.max(ratio);
                    lse2(lse(buckets.iter().cloned()), tail)
                })
                .collect();
            let partial = lse(totals.iter().cloned());
            let (tail, ratio) = block_tail(&totals);
            worst = worst.max(ratio);
            let upper = lse2(partial, tail);
            let enumerated = lse(per_level.iter().flatten().cloned());
            let tail = if upper > enumerated { upper + (-(enumerated - upper).exp()).ln_1p() } else { f64::NEG_INFINITY };
            (lower, upper, tail, worst)
        }
    }
}

/// `Z_ell(t, p)` bounded through `Z_1`: the sums over words of length
/// `ell` lie between the `ell`-th powers of the `ell = 1` bounds.
pub fn z_partition_sum(inv: &BranchInventory, t: f64, p: f64, ell: usize) -> Result<ZReport> {
    if !(1..=3).contains(&ell) {
        return Err(Error::Precondition("ell must lie in 1..=3".into()));
    }
    let (lo, hi, tail, ratio) = z1_bounds(inv, t, p);
    if !hi.is_finite() {
        return Err(Error::TruncationUnsound { ratio });
    }
    let l = ell as f64;
    Ok(ZReport {
        t,
        p,
        ell,
        log_z_lower: l * lo,
        log_z_upper: l * hi,
        log_tail: tail.is_finite().then_some(tail),
        ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BowenRoot {
    pub t: f64,
    pub p_star: f64,
    /// `[root of log Z_1^-, root of log Z_1^+]`.
    pub bracket: (f64, f64),
}

impl BowenRoot {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.bracket.1 - self.bracket.0)
    }
}

/// Root of a decreasing function that may be `+inf` on the left.
fn decreasing_root(h: impl Fn(f64) -> f64, limit: f64) -> Option<f64> {
    let mut lo = -1.0;
    while !(h(lo) > 0.0) {
        lo *= 2.0;
        if lo < -limit {
            return None;
        }
    }
    let mut hi = 1.0;
    while !(h(hi) < 0.0) {
        hi *= 2.0;
        if hi > limit {
            return None;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// The `p` at which the two-variable pressure changes sign, bracketed by
/// the roots of the lower and upper `ell = 1` bounds.
pub fn bowen_root(inv: &BranchInventory, t: f64) -> Result<BowenRoot> {
    if inv.branches.is_empty() {
        return Err(Error::Precondition("empty branch inventory".into()));
    }
    let limit = 64.0 * (1.0 + t.abs());
    let lo = decreasing_root(|p| z1_bounds(inv, t, p).0, limit)
        .ok_or_else(|| Error::NotFound(format!("lower bound has no root in [-{limit}, {limit}]")))?;
    let hi = decreasing_root(|p| z1_bounds(inv, t, p).1, limit)
        .ok_or_else(|| Error::NotFound(format!("upper bound has no sound root in [-{limit}, {limit}]")))?;
    Ok(BowenRoot { t, p_star: 0.5 * (lo + hi), bracket: (lo, hi) })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelTerm {
    pub k: usize,
    /// `log sum e^{-m p} sup|D phi|^t` over the enumerated branches of level `k`.
    pub log_level_sum: f64,
    /// `-(n+3k) p - (t/2) log|Df^{n+3k}(c)|`.
    pub log_postcritical_term: f64,
    pub log_ratio: f64,
    pub branches: usize,
}

pub fn level_decomposition(inv: &BranchInventory, c: &Parameter, t: f64, p: f64) -> Result<Vec<LevelTerm>> {
    let top = inv.branches.iter().filter_map(|b| b.level).max();
    let Some(top) = top else {
        return Err(Error::Precondition("inventory has no levels".into()));
    };
    let orbit = iterate(c, &c.c, inv.n + 3 * top);
    if orbit.len() <= inv.n + 3 * top {
        return Err(Error::Escape { index: orbit.len() - 1 });
    }
    let mut out = Vec::new();
    for k in 0..=top {
        let members: Vec<&ReturnBranch> = inv.branches.iter().filter(|b| b.level == Some(k)).collect();
        if members.is_empty() {
            continue;
        }
        let sum = lse(members.iter().map(|b| term_bounds(b, t, p).1));
        let j = inv.n + 3 * k;
        let post = -(j as f64) * p - 0.5 * t * orbit.log_abs_derivative[j].to_f64();
        out.push(LevelTerm { k, log_level_sum: sum, log_postcritical_term: post, log_ratio: sum - post, branches: members.len() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::induced::enumerate_return_branches;
    use std::f64::consts::LN_2;

    fn inv() -> BranchInventory {
        enumerate_return_branches(&Parameter::from_f64(-2.0, 106).unwrap(), 2, 22).unwrap()
    }

    #[test]
    fn z_is_monotone() {
        let inv = inv();
        let a = z_partition_sum(&inv, 2.0, -0.5, 1).unwrap();
        let b = z_partition_sum(&inv, 2.0, -0.4, 1).unwrap();
        let c = z_partition_sum(&inv, 2.5, -0.5, 1).unwrap();
        assert!(b.log_z_upper < a.log_z_upper && b.log_z_lower < a.log_z_lower);
        assert!(c.log_z_upper < a.log_z_upper);
        let two = z_partition_sum(&inv, 2.0, -0.5, 2).unwrap();
        assert!(0.5 * two.log_z_upper <= a.log_z_upper + 1e-12);
    }

    #[test]
    fn minimal_branches_dominate_for_large_p() {
        let inv = inv();
        let r = z_partition_sum(&inv, 0.0, 20.0, 1).unwrap();
        assert!((r.log_z_lower - (2f64.ln() - 3.0 * 20.0)).abs() < 1e-6);
    }

    #[test]
    fn chebyshev_bowen_root() {
        let inv = inv();
        let mut prev = f64::INFINITY;
        for t in [2.0, 3.0, 4.0] {
            let r = bowen_root(&inv, t).unwrap();
            let exact = (1.0 - t) * LN_2;
            assert!(r.bracket.0 <= exact && exact <= r.bracket.1, "t = {t}: {:?}", r.bracket);
            assert!(r.p_star < prev);
            prev = r.p_star;
        }
    }

    #[test]
    fn unsound_tail_is_refused() {
        let inv = inv();
        assert!(matches!(z_partition_sum(&inv, 0.0, -2.0, 1), Err(Error::TruncationUnsound { .. })));
    }
}
