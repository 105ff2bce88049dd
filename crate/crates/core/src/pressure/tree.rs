use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which preimages of the critical point enter the tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeMode {
    /// Real preimages inside `I_c = [c, c^2 + c]`.
    Real,
    /// All `2^m` complex preimages.
    Complex,
}

/// Preimages closer than this to `0` are treated as critical hits.
pub const CRITICAL_TOL: f64 = 1e-12;
pub const MAX_DEPTH: usize = 24;
const PAR_CHUNK: usize = 1 << 12;

/// `log|Df^d(y)|` for every `y` in `f^{-d}(0)`, `d = 1..=depth`.
#[derive(Clone, Debug)]
pub struct PreimageTree {
    pub c: f64,
    pub mode: TreeMode,
    pub depth: usize,
    levels: Vec<Vec<f64>>,
    flags: Vec<Vec<bool>>,
}

#[derive(Clone, Copy)]
struct Node {
    z: Complex64,
    log_df: f64,
    flagged: bool,
}

fn children(c: f64, mode: TreeMode, node: &Node) -> [Option<Node>; 2] {
    let w = node.z - c;
    let (r, ok_pos, ok_neg) = match mode {
        TreeMode::Complex => (w.sqrt(), true, true),
        TreeMode::Real => {
            let x = w.re.max(0.0).sqrt();
            let right = c * c + c;
            (Complex64::new(x, 0.0), x <= right * (1.0 + 1e-15) + 1e-15, -x >= c * (1.0 + 1e-15) - 1e-15)
        }
    };
    if mode == TreeMode::Real && w.re < -1e-12 {
        return [None, None];
    }
    let a = 2.0 * r.norm();
    let flagged = node.flagged || r.norm() < CRITICAL_TOL;
    let log_df = node.log_df + a.max(2.0 * CRITICAL_TOL).ln();
    let mk = |z| Node { z, log_df, flagged };
    [ok_pos.then(|| mk(r)), ok_neg.then(|| mk(-r))]
}

impl PreimageTree {
    pub fn build(c: f64, depth: usize, mode: TreeMode) -> Result<Self> {
        if !(1..=MAX_DEPTH).contains(&depth) {
            return Err(Error::Precondition(format!("tree depth must lie in 1..={MAX_DEPTH}")));
        }
        if !c.is_finite() || c > 0.25 {
            return Err(Error::Precondition(format!("c = {c} must be a real parameter <= 1/4")));
        }
        let mut frontier = vec![Node { z: Complex64::new(0.0, 0.0), log_df: 0.0, flagged: false }];
        let mut levels = Vec::with_capacity(depth);
        let mut flags = Vec::with_capacity(depth);
        for _ in 0..depth {
            let next: Vec<Node> = if frontier.len() >= PAR_CHUNK {
                frontier.par_iter().flat_map_iter(|n| children(c, mode, n).into_iter().flatten()).collect()
            } else {
                frontier.iter().flat_map(|n| children(c, mode, n).into_iter().flatten()).collect()
            };
            if next.is_empty() {
                return Err(Error::Degenerate("preimage tree died out".into()));
            }
            levels.push(next.iter().map(|n| n.log_df).collect());
            flags.push(next.iter().map(|n| n.flagged).collect());
            frontier = next;
        }
        Ok(PreimageTree { c, mode, depth, levels, flags })
    }

    pub fn leaves(&self, d: usize) -> usize {
        self.levels[d - 1].len()
    }

    pub fn flagged(&self, d: usize) -> usize {
        self.flags[d - 1].iter().filter(|f| **f).count()
    }

    /// `log sum_{y in f^{-d}(0)} |Df^d(y)|^{-t}`.
    pub fn log_sum(&self, t: f64, d: usize) -> f64 {
        log_sum_exp(&self.levels[d - 1], -t, None)
    }

    fn log_sum_unflagged(&self, t: f64, d: usize) -> f64 {
        log_sum_exp(&self.levels[d - 1], -t, Some(&self.flags[d - 1]))
    }

    /// Pressure estimate at depth `depth` with the three-depth error bar.
    pub fn pressure(&self, t: f64) -> Result<PressureEstimate> {
        let m = self.depth;
        if m < 3 {
            return Err(Error::Precondition("pressure estimate needs depth >= 3".into()));
        }
        let per_depth: Vec<f64> = (m - 2..=m).map(|d| self.log_sum(t, d) / d as f64).collect();
        let max = per_depth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = per_depth.iter().cloned().fold(f64::INFINITY, f64::min);
        // With log Z_d = dP + C + o(1) the estimate is off by C/m, which the
        // spread alone sees only as O(C/m^2). Add the distance to the
        // difference estimator log Z_m - log Z_{m-1}, which is C/m.
        let bias = (m - 1) as f64 * (per_depth[2] - per_depth[1]).abs();
        let mut error_bar = 2.0 * (max - min) + bias;
        let flagged = self.flagged(m);
        if flagged > 0 {
            let clean = self.log_sum_unflagged(t, m) / m as f64;
            error_bar += (per_depth[2] - clean).abs();
        }
        Ok(PressureEstimate {
            t,
            depth: m,
            estimate: per_depth[2],
            error_bar,
            per_depth,
            leaves: self.leaves(m),
            flagged,
        })
    }
}

/// Deterministic pairwise log-sum-exp of `scale * x_i`; the split points do
/// not depend on the thread count, so results are bitwise reproducible.
fn log_sum_exp(xs: &[f64], scale: f64, skip: Option<&[bool]>) -> f64 {
    fn rec(xs: &[f64], scale: f64, skip: Option<&[bool]>) -> f64 {
        if xs.len() <= 64 {
            let mut hi = f64::NEG_INFINITY;
            for (i, x) in xs.iter().enumerate() {
                if skip.map_or(false, |s| s[i]) {
                    continue;
                }
                hi = hi.max(scale * x);
            }
            if hi == f64::NEG_INFINITY {
                return hi;
            }
            let mut acc = 0.0;
            for (i, x) in xs.iter().enumerate() {
                if skip.map_or(false, |s| s[i]) {
                    continue;
                }
                acc += (scale * x - hi).exp();
            }
            return hi + acc.ln();
        }
        let mid = xs.len() / 2;
        let (l, r) = xs.split_at(mid);
        let (sl, sr) = match skip {
            Some(s) => {
                let (a, b) = s.split_at(mid);
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        let (a, b) = if xs.len() >= PAR_CHUNK {
            rayon::join(|| rec(l, scale, sl), || rec(r, scale, sr))
        } else {
            (rec(l, scale, sl), rec(r, scale, sr))
        };
        lse2(a, b)
    }
    rec(xs, scale, skip)
}

pub fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a == f64::INFINITY || b == f64::INFINITY {
        return f64::INFINITY;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureEstimate {
    pub t: f64,
    pub depth: usize,
    pub estimate: f64,
    /// Twice the spread of the estimates at depths `m - 2, m - 1, m`, plus
    /// the `O(1/m)` bias seen by `log Z_m - log Z_{m-1}`.
    pub error_bar: f64,
    pub per_depth: Vec<f64>,
    pub leaves: usize,
    pub flagged: usize,
}

/// `(1/m) log sum |Df^m(y)|^{-t}` over `y in f^{-m}(0)`.
pub fn tree_pressure(c: f64, t: f64, m: usize, mode: TreeMode) -> Result<PressureEstimate> {
    PreimageTree::build(c, m, mode)?.pressure(t)
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureCurve {
    pub c: f64,
    pub mode: TreeMode,
    pub depth: usize,
    pub t: Vec<f64>,
    pub estimate: Vec<f64>,
    pub error_bar: Vec<f64>,
}

impl PressureCurve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

pub fn pressure_curve(c: f64, t_grid: &[f64], m: usize, mode: TreeMode) -> Result<PressureCurve> {
    let tree = PreimageTree::build(c, m, mode)?;
    let mut estimate = Vec::with_capacity(t_grid.len());
    let mut error_bar = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let e = tree.pressure(t)?;
        estimate.push(e.estimate);
        error_bar.push(e.error_bar);
    }
    Ok(PressureCurve { c, mode, depth: m, t: t_grid.to_vec(), estimate, error_bar })
}

/// Evenly spaced grid `lo, lo + h, ..., hi`.
pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    let h = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + h * i as f64).collect()
}
