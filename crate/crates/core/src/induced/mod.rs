//! The real first-return map `F` of `f_c` to the central interval
//! `V = P_{n+1}(0) ∩ R`, its branch inventory and the two-variable
//! pressure sums built from it.

mod enumerate;
mod partition;

use rug::Float;
use serde::Serialize;

use crate::cantor::alpha_chain;
use crate::dynamics::{iterate, Parameter};
use crate::error::{Error, Result};
use crate::precision::HighReal;

pub use enumerate::{
    enumerate_level_branches, enumerate_return_branches, first_return_runs, inverse_along, landing_scan, verify_branch,
    BranchCheck, ExponentReport, LandingRate, LandingScan,
};
pub use partition::{bowen_root, level_decomposition, z_partition_sum, BowenRoot, LevelTerm, ZReport};

/// `V ∩ R = (-s, s)` with `s = sqrt(alpha_{n-1} - c)`.
#[derive(Clone, Debug)]
pub struct CentralInterval {
    pub n: usize,
    pub s: HighReal,
    /// `alpha~_0, ..., alpha~_{n-2}, alpha_{n-1}`.
    pub alpha_chain: Vec<HighReal>,
}

pub fn central_interval(c: &Parameter, n: usize) -> Result<CentralInterval> {
    if n < 2 {
        return Err(Error::Precondition("central interval needs n >= 2".into()));
    }
    let p = c.prec();
    let mut chain = Vec::with_capacity(n);
    let mut tilde = Float::with_val(p, -&c.alpha);
    for _ in 0..n - 1 {
        chain.push(tilde.clone());
        let d = Float::with_val(p, &tilde - &c.c);
        if d.is_sign_negative() {
            return Err(Error::Degenerate("alpha chain argument below c".into()));
        }
        tilde = d.sqrt();
    }
    let last = alpha_chain(c, n - 1).pop().expect("chain is non-empty");
    let d = Float::with_val(p, &last - &c.c);
    if d.is_sign_negative() || d.is_zero() {
        return Err(Error::Degenerate("alpha_{n-1} <= c".into()));
    }
    chain.push(last);
    Ok(CentralInterval { n, s: d.sqrt(), alpha_chain: chain })
}

/// Half-widths `s_k` of `P_{n+3k+2}(0) ∩ R` for the consecutive epochs `k`
/// at which `f^{n+3k}(c)` lies in `(alpha, -alpha)`, at most `k_max + 1`.
///
/// `P_{n+3k+1}(c)` is the pull-back of `(alpha, -alpha)` along the critical
/// orbit and `P_{n+3k+2}(0)` its preimage.
pub fn level_radii(c: &Parameter, n: usize, k_max: usize) -> Vec<HighReal> {
    let p = c.prec();
    let orbit = iterate(c, &c.c, n + 3 * k_max);
    let neg_alpha = Float::with_val(p, -&c.alpha);
    let mut out = Vec::new();
    for k in 0..=k_max {
        let top = n + 3 * k;
        if top >= orbit.len() || orbit.points[top] <= c.alpha || orbit.points[top] >= neg_alpha {
            break;
        }
        let mut ends = [c.alpha.clone(), neg_alpha.clone()];
        for j in (0..top).rev() {
            for e in ends.iter_mut() {
                let r = Float::with_val(p, &*e - &c.c).sqrt();
                *e = if orbit.points[j].is_sign_negative() { -r } else { r };
            }
        }
        let v = if ends[0] > ends[1] { &ends[0] } else { &ends[1] };
        let d = Float::with_val(p, v - &c.c);
        if d.is_sign_negative() {
            break;
        }
        out.push(d.sqrt());
    }
    out
}

/// How an inventory was truncated, which decides how tails are bounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Truncation {
    /// Every branch with return time at most `m_max`.
    ReturnTime { m_max: usize },
    /// Every branch of level at most `k_max` whose landing part has time at
    /// most `m_land`.
    Levels { k_max: usize, m_land: usize },
}

/// A monotone branch `F = f^m : (a, b) -> (-s, s)`.
#[derive(Clone, Debug, Serialize)]
pub struct ReturnBranch {
    pub a: f64,
    pub b: f64,
    pub return_time: usize,
    pub level: Option<usize>,
    pub monotone_sign: i8,
    pub log_inf_df: f64,
    pub log_sup_df: f64,
    /// `sup |DF| / inf |DF|` on the branch.
    pub distortion: f64,
    /// Signs of `f^j` on the branch for `j < m`.
    pub itinerary: String,
    /// The branch `W_k` through the landing domains next to `alpha` and
    /// `-alpha`, with `m = n + 3k + 3`.
    pub special: bool,
}

/// A first-landing branch `f^m : (a, b) -> (-s, s)` with `(a, b)` outside `V`.
#[derive(Clone, Debug, Serialize)]
pub struct LandingBranch {
    pub a: f64,
    pub b: f64,
    pub landing_time: usize,
    pub monotone_sign: i8,
    pub log_inf_dl: f64,
    pub log_sup_dl: f64,
    pub distortion: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    /// Pull-backs that straddled the boundary of `V`.
    pub partial: usize,
    /// Pull-back targets containing the critical value.
    pub critical_targets: usize,
    /// Pull-backs straddling the right end of `I_c`.
    pub straddling: usize,
    /// Branches whose convexity bound for `sup |DF|` degenerated.
    pub loose_sup_bounds: usize,
    /// `2s` minus the total length of the branches.
    pub residual_measure: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchInventory {
    pub c: f64,
    pub n: usize,
    pub s: f64,
    pub truncation: Truncation,
    /// `s_k` for the levels that are defined at this parameter.
    pub level_radii: Vec<f64>,
    /// Sorted by left endpoint.
    pub branches: Vec<ReturnBranch>,
    pub diagnostics: Diagnostics,
}

impl BranchInventory {
    pub fn count_by_time(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut out = std::collections::BTreeMap::new();
        for b in &self.branches {
            *out.entry(b.return_time).or_insert(0) += 1;
        }
        out
    }

    pub fn max_distortion(&self) -> f64 {
        self.branches.iter().map(|b| b.distortion).fold(1.0, f64::max)
    }

    pub fn special(&self, k: usize) -> Option<&ReturnBranch> {
        self.branches.iter().rev().find(|b| b.special && b.level == Some(k))
    }
}
