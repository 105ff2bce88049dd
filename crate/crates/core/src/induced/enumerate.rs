use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use super::{central_interval, level_radii, BranchInventory, Diagnostics, LandingBranch, ReturnBranch, Truncation};
use crate::cantor::build_cantor_system;
use crate::dynamics::{iterate, Parameter};
use crate::error::{Error, Result};
use crate::precision::{ulp, HighReal};

/// Sample points per branch, images of an even grid on `[-s, s]`.
const SAMPLES: usize = 9;
const MAX_TIME: usize = 120;
const SPLIT_FRONTIER: usize = 64;
const EDGE_TOL: f64 = 1e-13;

#[derive(Clone)]
struct Node {
    ys: [f64; SAMPLES],
    ld: [f64; SAMPLES],
    m: usize,
    /// Bit `j` set when `f^j < 0` on the node.
    bits: u128,
}

impl Node {
    fn root(s: f64) -> Node {
        let mut ys = [0.0; SAMPLES];
        for (i, y) in ys.iter_mut().enumerate() {
            *y = s * (-1.0 + 2.0 * i as f64 / (SAMPLES - 1) as f64);
        }
        Node { ys, ld: [0.0; SAMPLES], m: 0, bits: 0 }
    }

    fn lo(&self) -> f64 {
        self.ys[0].min(self.ys[SAMPLES - 1])
    }

    fn hi(&self) -> f64 {
        self.ys[0].max(self.ys[SAMPLES - 1])
    }
}

struct Ctx {
    c: f64,
    right: f64,
    s: f64,
    m_max: usize,
    keep: Keep,
}

#[derive(Clone, Copy, PartialEq)]
enum Keep {
    Nothing,
    All,
    /// Only landing nodes inside `(lo, hi)`.
    Within(f64, f64),
}

#[derive(Default)]
struct Collector {
    returns: Vec<Node>,
    landings: Vec<Node>,
    partial: usize,
    critical: usize,
    straddling: usize,
}

impl Collector {
    fn merge(&mut self, o: Collector) {
        self.returns.extend(o.returns);
        self.landings.extend(o.landings);
        self.partial += o.partial;
        self.critical += o.critical;
        self.straddling += o.straddling;
    }
}

/// Pull `node` back once; return branches go to `col`, landing nodes are
/// handed back.
fn pull(ctx: &Ctx, node: &Node, col: &mut Collector) -> Vec<Node> {
    let mut out = Vec::new();
    if node.lo() < ctx.c - EDGE_TOL {
        col.critical += 1;
        return out;
    }
    let mut r = [0.0; SAMPLES];
    for i in 0..SAMPLES {
        r[i] = (node.ys[i] - ctx.c).max(0.0).sqrt();
    }
    if r.iter().any(|&x| x == 0.0) {
        col.critical += 1;
        return out;
    }
    let m = node.m + 1;
    for sign in [1.0, -1.0] {
        let mut child = Node { ys: [0.0; SAMPLES], ld: [0.0; SAMPLES], m, bits: node.bits << 1 };
        if sign < 0.0 {
            child.bits |= 1;
        }
        for i in 0..SAMPLES {
            child.ys[i] = sign * r[i];
            child.ld[i] = node.ld[i] + (2.0 * r[i]).ln();
        }
        let (lo, hi) = (child.lo(), child.hi());
        if sign > 0.0 && hi > ctx.right + EDGE_TOL {
            if lo <= ctx.right {
                col.straddling += 1;
            }
            continue;
        }
        if lo > -ctx.s - EDGE_TOL && hi < ctx.s + EDGE_TOL {
            col.returns.push(child);
        } else if hi <= -ctx.s + EDGE_TOL || lo >= ctx.s - EDGE_TOL {
            let keep = match ctx.keep {
                Keep::Nothing => false,
                Keep::All => true,
                Keep::Within(a, b) => lo > a && hi < b,
            };
            if keep {
                col.landings.push(child.clone());
            }
            if m < ctx.m_max {
                out.push(child);
            }
        } else {
            col.partial += 1;
        }
    }
    out
}

fn dfs(ctx: &Ctx, node: &Node, col: &mut Collector) {
    for child in pull(ctx, node, col) {
        dfs(ctx, &child, col);
    }
}

fn traverse(ctx: &Ctx) -> Collector {
    let mut col = Collector::default();
    let mut frontier = vec![Node::root(ctx.s)];
    while !frontier.is_empty() && frontier.len() < SPLIT_FRONTIER {
        let mut next = Vec::new();
        for node in &frontier {
            next.extend(pull(ctx, node, &mut col));
        }
        frontier = next;
    }
    let parts: Vec<Collector> = frontier
        .par_iter()
        .map(|node| {
            let mut c = Collector::default();
            dfs(ctx, node, &mut c);
            c
        })
        .collect();
    for p in parts {
        col.merge(p);
    }
    col
}

/// `(log inf |DF|, log sup |DF|, loose)` on a monotone branch sampled at
/// `xs`. `|DF|^{-1/2}` is convex (negative Schwarzian), so the infimum
/// sits at a sample and secant lines bound the supremum.
fn log_df_bounds(xs: &[f64; SAMPLES], ld: &[f64; SAMPLES]) -> (f64, f64, bool) {
    let mut idx: Vec<usize> = (0..SAMPLES).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let x: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
    let inf = ld.iter().cloned().fold(f64::INFINITY, f64::min);
    let g: Vec<f64> = idx.iter().map(|&i| (-(ld[i] - inf) / 2.0).exp()).collect();
    let line = |i: usize, j: usize| {
        let (x0, g0, slope) = (x[i], g[i], (g[j] - g[i]) / (x[j] - x[i]));
        move |t: f64| g0 + slope * (t - x0)
    };
    let mut lb = g.iter().cloned().fold(f64::INFINITY, f64::min);
    for i in 0..SAMPLES - 1 {
        let (p, q) = (x[i], x[i + 1]);
        if q <= p {
            continue;
        }
        let left = (i >= 1 && x[i] > x[i - 1]).then(|| line(i - 1, i));
        let right = (i + 2 < SAMPLES && x[i + 2] > x[i + 1]).then(|| line(i + 1, i + 2));
        let bound = match (left, right) {
            (Some(l), Some(r)) => {
                let h = |t: f64| l(t).max(r(t));
                let mut b = h(p).min(h(q));
                let dl = (l(q) - l(p)) / (q - p);
                let dr = (r(q) - r(p)) / (q - p);
                if dl != dr {
                    let t = p + (r(p) - l(p)) / (dl - dr);
                    if t > p && t < q {
                        b = b.min(h(t));
                    }
                }
                b
            }
            (Some(l), None) => l(p).min(l(q)),
            (None, Some(r)) => r(p).min(r(q)),
            (None, None) => g[i].min(g[i + 1]),
        };
        lb = lb.min(bound);
    }
    let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let loose = !(lb > 0.25 * gmin);
    let lb = if loose { 0.25 * gmin } else { lb };
    (inf, inf - 2.0 * lb.ln(), loose)
}

fn itinerary(bits: u128, m: usize) -> String {
    (0..m).map(|j| if bits >> j & 1 == 1 { '-' } else { '+' }).collect()
}

fn sign_of(bits: u128, m: usize) -> i8 {
    let mask = if m >= 128 { u128::MAX } else { (1u128 << m) - 1 };
    if (bits & mask).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

fn to_return(node: &Node, level: Option<usize>, special: bool, loose: &mut usize) -> ReturnBranch {
    let (inf, sup, l) = log_df_bounds(&node.ys, &node.ld);
    if l {
        *loose += 1;
    }
    ReturnBranch {
        a: node.lo(),
        b: node.hi(),
        return_time: node.m,
        level,
        monotone_sign: sign_of(node.bits, node.m),
        log_inf_df: inf,
        log_sup_df: sup,
        distortion: (sup - inf).exp(),
        itinerary: itinerary(node.bits, node.m),
        special,
    }
}

/// Apply the inverse branch with the given itinerary to `y`.
pub fn inverse_along(c: &Float, itinerary: &str, y: &Float) -> Option<Float> {
    let p = y.prec().max(c.prec());
    let mut x = Float::with_val(p, y);
    for ch in itinerary.chars().rev() {
        let d = Float::with_val(p, &x - c);
        if d.is_sign_negative() {
            return None;
        }
        x = d.sqrt();
        if ch == '-' {
            x = -x;
        }
    }
    Some(x)
}

/// Recompute both endpoints in high precision along the itinerary.
fn polish(c: &Float, s: &Float, b: &mut ReturnBranch) {
    let neg = Float::with_val(s.prec(), -s);
    if let (Some(u), Some(v)) = (inverse_along(c, &b.itinerary, s), inverse_along(c, &b.itinerary, &neg)) {
        let (u, v) = (u.to_f64(), v.to_f64());
        b.a = u.min(v);
        b.b = u.max(v);
    }
}

fn assign_level(radii: &[f64], a: f64, b: f64) -> Option<usize> {
    let r = a.abs().max(b.abs());
    radii.iter().rposition(|&s| r < s)
}

/// All real first-return branches to `V` with return time at most `m_max`,
/// found by pulling `V` back along landing domains.
pub fn enumerate_return_branches(c: &Parameter, n: usize, m_max: usize) -> Result<BranchInventory> {
    if !(1..=MAX_TIME).contains(&m_max) {
        return Err(Error::Precondition(format!("m_max must lie in 1..={MAX_TIME}")));
    }
    let v = central_interval(c, n)?;
    let s = v.s.to_f64();
    let ctx = Ctx { c: c.to_f64(), right: c.interval_ic.1.to_f64(), s, m_max, keep: Keep::Nothing };
    let col = traverse(&ctx);
    let radii: Vec<f64> = level_radii(c, n, (m_max / 3).max(1)).iter().map(|r| r.to_f64()).collect();
    let mut loose = 0;
    let mut branches: Vec<ReturnBranch> = col
        .returns
        .iter()
        .map(|node| to_return(node, None, false, &mut loose))
        .collect();
    branches.par_iter_mut().for_each(|b| {
        polish(&c.c, &v.s, b);
        b.level = assign_level(&radii, b.a, b.b);
    });
    branches.sort_by(|x, y| x.a.total_cmp(&y.a));
    let covered: f64 = branches.iter().map(|b| b.b - b.a).sum();
    let diagnostics = Diagnostics {
        partial: col.partial,
        critical_targets: col.critical,
        straddling: col.straddling,
        loose_sup_bounds: loose,
        residual_measure: 2.0 * s - covered,
        notes: Vec::new(),
    };
    Ok(BranchInventory {
        c: c.to_f64(),
        n,
        s,
        truncation: Truncation::ReturnTime { m_max },
        level_radii: radii,
        branches,
        diagnostics,
    })
}

/// Return branches organised by level: for each epoch `k` the branches are
/// the pull-backs along the critical orbit of `V` and of the landing
/// domains in the half of `(alpha, -alpha)` covered by
/// `f^{n+3k}([c, v_k))`, except those inside the trap of `f^{n+3k}(c)`.
pub fn enumerate_level_branches(c: &Parameter, n: usize, k_max: usize, m_land: usize) -> Result<BranchInventory> {
    let v = central_interval(c, n)?;
    let s = v.s.to_f64();
    let sys = build_cantor_system(c)?;
    let radii_hr = level_radii(c, n, k_max);
    if radii_hr.is_empty() {
        return Err(Error::Precondition("no level structure at this parameter".into()));
    }
    let levels = radii_hr.len();
    if n + 3 * (levels - 1) + 1 + m_land > MAX_TIME {
        return Err(Error::Precondition("return times beyond the supported range".into()));
    }
    let cf = c.to_f64();
    let alpha = c.alpha.to_f64();
    let ctx = Ctx { c: cf, right: c.interval_ic.1.to_f64(), s, m_max: m_land, keep: Keep::Within(alpha, -alpha) };
    let col = if m_land == 0 { Collector::default() } else { traverse(&ctx) };
    let mut targets = vec![Node::root(s)];
    targets.extend(col.landings.iter().filter(|w| w.m <= m_land).cloned());

    let gamma = sys.gamma.to_f64();
    let orbit = iterate(c, &c.c, n + 3 * (levels - 1));
    let z: Vec<f64> = orbit.points.iter().map(|p| p.to_f64()).collect();
    let traps = [
        (sys.trap_y.0.to_f64(), sys.trap_y.1.to_f64()),
        (sys.trap_yt.0.to_f64(), sys.trap_yt.1.to_f64()),
    ];
    let radii: Vec<f64> = radii_hr.iter().map(|r| r.to_f64()).collect();
    let mut loose = 0;
    let mut branches = Vec::new();
    let mut notes = Vec::new();
    for k in 0..levels {
        let top = n + 3 * k;
        let zt = z[top];
        let Some(trap) = sys.trap_of(&orbit.points[top]) else {
            notes.push(format!("level {k}: f^{top}(c) outside the traps"));
            break;
        };
        let trap = traps[trap as usize];
        let negatives = z[..top].iter().filter(|x| **x < 0.0).count();
        let half = if negatives % 2 == 0 { (zt, -alpha) } else { (alpha, zt) };
        let level: Vec<(Node, bool)> = targets
            .par_iter()
            .filter(|w| w.lo() > half.0 && w.hi() < half.1 && (w.hi() <= trap.0 || w.lo() >= trap.1))
            .flat_map_iter(|w| {
                let special = w.m == 2 && ((w.lo() > alpha && w.hi() < gamma) || (w.lo() > -gamma && w.hi() < -alpha));
                pull_along_orbit(cf, &z[..=top], w).into_iter().map(move |b| (b, special))
            })
            .collect();
        for (node, special) in level {
            let b = to_return(&node, Some(k), special, &mut loose);
            if assign_level(&radii, b.a, b.b).map_or(false, |l| l < k) {
                notes.push(format!("level {k}: branch at {} outside P_(n+3k+2)(0)", b.a));
            }
            branches.push(b);
        }
    }
    branches.sort_by(|x, y| x.a.total_cmp(&y.a));
    let covered: f64 = branches.iter().map(|b| b.b - b.a).sum();
    Ok(BranchInventory {
        c: cf,
        n,
        s,
        truncation: Truncation::Levels { k_max: levels - 1, m_land },
        level_radii: radii,
        branches,
        diagnostics: Diagnostics {
            partial: col.partial,
            critical_targets: col.critical,
            straddling: col.straddling,
            loose_sup_bounds: loose,
            residual_measure: 2.0 * s - covered,
            notes,
        },
    })
}

/// Pull the samples of `w` back along `z_0 = c, ..., z_top` and then
/// through both square roots. Offsets from the critical orbit are carried
/// so that the final step `x = ±sqrt(y_0 - c)` keeps full relative accuracy.
fn pull_along_orbit(c: f64, z: &[f64], w: &Node) -> Vec<Node> {
    let top = z.len() - 1;
    let mut xs = [0.0; SAMPLES];
    let mut ld = [0.0; SAMPLES];
    for i in 0..SAMPLES {
        let mut y = w.ys[i];
        let mut delta = y - z[top];
        let mut acc = w.ld[i];
        for j in (0..top).rev() {
            let r = (y - c).max(0.0).sqrt();
            let yj = if z[j] < 0.0 { -r } else { r };
            delta /= yj + z[j];
            acc += (2.0 * yj).abs().ln();
            y = yj;
        }
        if !(delta > 0.0) {
            return Vec::new();
        }
        xs[i] = delta.sqrt();
        ld[i] = acc + (2.0 * xs[i]).ln();
    }
    let mut bits = w.bits;
    for j in (0..top).rev() {
        bits = bits << 1 | (z[j] < 0.0) as u128;
    }
    let m = w.m + top + 1;
    let pos = Node { ys: xs, ld, m, bits: bits << 1 };
    let mut neg = pos.clone();
    for x in neg.ys.iter_mut() {
        *x = -*x;
    }
    neg.bits |= 1;
    vec![pos, neg]
}

/// Per-`m` summary of the first-landing derivatives.
#[derive(Clone, Debug, Serialize)]
pub struct LandingRate {
    pub m: usize,
    pub count: usize,
    /// `min (1/m) log inf |DL|` over branches with landing time `m`.
    pub min_rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentReport {
    pub per_m: Vec<LandingRate>,
    /// Smallest `(1/m) log inf|DL|` over all branches.
    pub min_rate: f64,
    /// Smallest `C_1` with `inf |DL| >= C_1^{-1} 2^{0.6 m}` on every branch.
    pub log_c1_at_0_6: f64,
}

impl ExponentReport {
    pub fn min_rate_from(&self, m0: usize) -> Option<f64> {
        self.per_m.iter().filter(|r| r.m >= m0).map(|r| r.min_rate).reduce(f64::min)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LandingScan {
    pub c: f64,
    pub n: usize,
    pub s: f64,
    pub m_max: usize,
    pub branches: Vec<LandingBranch>,
    pub report: ExponentReport,
}

/// First-landing branches to `V` inside `I_c` with landing time at most `m_max`.
pub fn landing_scan(c: &Parameter, n: usize, m_max: usize) -> Result<LandingScan> {
    if !(1..=MAX_TIME).contains(&m_max) {
        return Err(Error::Precondition(format!("m_max must lie in 1..={MAX_TIME}")));
    }
    let v = central_interval(c, n)?;
    let s = v.s.to_f64();
    let ctx = Ctx { c: c.to_f64(), right: c.interval_ic.1.to_f64(), s, m_max: m_max + 1, keep: Keep::All };
    let col = traverse(&ctx);
    let mut branches: Vec<LandingBranch> = col
        .landings
        .iter()
        .filter(|w| w.m <= m_max)
        .map(|w| {
            let (inf, sup, _) = log_df_bounds(&w.ys, &w.ld);
            LandingBranch {
                a: w.lo(),
                b: w.hi(),
                landing_time: w.m,
                monotone_sign: sign_of(w.bits, w.m),
                log_inf_dl: inf,
                log_sup_dl: sup,
                distortion: (sup - inf).exp(),
            }
        })
        .collect();
    branches.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut per_m: Vec<LandingRate> = Vec::new();
    for m in 1..=m_max {
        let rates: Vec<f64> = branches
            .iter()
            .filter(|b| b.landing_time == m)
            .map(|b| b.log_inf_dl / m as f64)
            .collect();
        if !rates.is_empty() {
            per_m.push(LandingRate { m, count: rates.len(), min_rate: rates.iter().cloned().fold(f64::INFINITY, f64::min) });
        }
    }
    let min_rate = per_m.iter().map(|r| r.min_rate).fold(f64::INFINITY, f64::min);
    let log_c1_at_0_6 = branches
        .iter()
        .map(|b| 0.6 * b.landing_time as f64 * std::f64::consts::LN_2 - b.log_inf_dl)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LandingScan { c: c.to_f64(), n, s, m_max, branches, report: ExponentReport { per_m, min_rate, log_c1_at_0_6 } })
}

/// High-precision check of one branch.
#[derive(Clone, Debug, Serialize)]
pub struct BranchCheck {
    /// Backward error of the stored endpoints, in `f64` ulps: `|F(e) - (±s)| / |DF(e)|`.
    pub endpoint_ulps: f64,
    /// No intermediate iterate of the branch midpoint lies in `V`.
    pub first_return: bool,
    /// `F` at the midpoint lies in `V`.
    pub lands: bool,
}

pub fn verify_branch(c: &Parameter, s: &HighReal, branch: &ReturnBranch) -> BranchCheck {
    let p = 2 * c.prec();
    let cc = Float::with_val(p, &c.c);
    let m = branch.return_time;
    let forward = |x0: f64| {
        let mut x = Float::with_val(p, x0);
        let mut d = Float::with_val(p, 1);
        let mut path = Vec::with_capacity(m);
        for _ in 0..m {
            path.push(x.to_f64());
            d *= Float::with_val(p, &x * 2u32);
            x = Float::with_val(p, x.square_ref()) + &cc;
        }
        (x, d, path)
    };
    let sf = s.to_f64();
    let mut worst: f64 = 0.0;
    for e in [branch.a, branch.b] {
        let (fx, d, _) = forward(e);
        let target = if fx.is_sign_negative() { Float::with_val(p, -s) } else { Float::with_val(p, s) };
        let err = Float::with_val(p, &fx - &target).abs() / d.abs();
        let u = ulp(&Float::with_val(53, e)).to_f64();
        worst = worst.max(err.to_f64() / u);
    }
    let mid = 0.5 * (branch.a + branch.b);
    let (fx, _, path) = forward(mid);
    let first_return = path.iter().skip(1).all(|y| y.abs() >= sf);
    BranchCheck { endpoint_ulps: worst, first_return, lands: fx.to_f64().abs() < sf }
}

/// Brute-force oracle: first return times on a grid of `points` in `V`,
/// grouped into maximal runs with constant time and no jump of `F` larger
/// than `s`. Returns the number of runs per return time `m <= m_cap`.
pub fn first_return_runs(c: f64, s: f64, points: usize, m_cap: usize) -> std::collections::BTreeMap<usize, usize> {
    let h = 2.0 * s / points as f64;
    let times: Vec<(usize, f64)> = (0..points)
        .into_par_iter()
        .map(|i| {
            let x0 = -s + (i as f64 + 0.5) * h;
            let mut x = x0;
            for m in 1..=m_cap {
                x = x * x + c;
                if x.abs() < s {
                    return (m, x);
                }
            }
            (0, 0.0)
        })
        .collect();
    let mut out = std::collections::BTreeMap::new();
    let mut prev: Option<(usize, f64)> = None;
    for &(m, fx) in &times {
        let continues = matches!(prev, Some((pm, pf)) if pm == m && (fx - pf).abs() <= s);
        if m > 0 && !continues {
            *out.entry(m).or_insert(0) += 1;
        }
        prev = Some((m, fx));
    }
    out
}
