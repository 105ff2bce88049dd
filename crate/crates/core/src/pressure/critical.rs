use rug::Float;
use serde::Serialize;

use crate::dynamics::{iterate, Parameter};
use crate::error::{Error, Result};
use crate::induced::{enumerate_level_branches, inverse_along};
use crate::precision::ulp;

#[derive(Clone, Debug, Serialize)]
pub struct CriticalLinePoint {
    pub k: usize,
    pub period: usize,
    pub point: f64,
    /// `(1/period) log|Df^period|` at the point.
    pub lyapunov: f64,
    /// `log|Df^{n+3k}(c)|`.
    pub log_df_critical: f64,
    /// `log|Df^period(p_k)| - (1/2) log|Df^{n+3k}(c)|`.
    pub log_constant: f64,
    /// `|f^period(x) - x| / |Df^period(x) - 1|` in ulps of `x`.
    pub residual_ulps: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicOrbitLine {
    pub points: Vec<CriticalLinePoint>,
    pub diagnostics: Vec<String>,
}

impl PeriodicOrbitLine {
    /// `(max - min) / max` of the constants `C_k`.
    pub fn constant_variation(&self) -> f64 {
        let cs: Vec<f64> = self.points.iter().map(|p| p.log_constant.exp()).collect();
        let max = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        (max - min) / max
    }
}

/// For `k = 0..=big_k`, the periodic point of period `n + 3k + 3` in the
/// special return branch of level `k`, and its Lyapunov exponent.
pub fn periodic_orbit_line(c: &Parameter, n: usize, big_k: usize) -> Result<PeriodicOrbitLine> {
    let inv = enumerate_level_branches(c, n, big_k, 2)?;
    let p = c.prec();
    let orbit = iterate(c, &c.c, n + 3 * big_k);
    if orbit.len() <= n + 3 * big_k {
        return Err(Error::Escape { index: orbit.len() - 1 });
    }
    let mut points = Vec::new();
    let mut diagnostics = Vec::new();
    for k in 0..=big_k {
        let Some(branch) = inv.special(k) else {
            diagnostics.push(format!("level {k}: special branch not found"));
            continue;
        };
        let period = branch.return_time;
        // The last square root loses about 2 log2(1/|x|) bits to cancellation.
        let w = 2 * p;
        let cw = Float::with_val(w, &c.c);
        let mut x = Float::with_val(w, 0.5 * (branch.a + branch.b));
        let mut converged = false;
        for _ in 0..200 {
            let Some(next) = inverse_along(&cw, &branch.itinerary, &x) else { break };
            let step = Float::with_val(w, &next - &x).abs();
            x = next;
            if step <= ulp(&x) {
                converged = true;
                break;
            }
        }
        if !converged {
            diagnostics.push(format!("level {k}: fixed-point iteration did not settle"));
            continue;
        }
        let x = Float::with_val(p, &x);
        let q = 2 * p;
        let cc = Float::with_val(q, &c.c);
        let mut y = Float::with_val(q, &x);
        let mut d = Float::with_val(q, 1);
        for _ in 0..period {
            d *= Float::with_val(q, &y * 2u32);
            y = Float::with_val(q, y.square_ref()) + &cc;
        }
        let resid = Float::with_val(q, &y - &x).abs() / Float::with_val(q, &d - 1u32).abs();
        let log_df = Float::with_val(q, d.abs_ref()).ln().to_f64();
        let log_crit = orbit.log_abs_derivative[n + 3 * k].to_f64();
        points.push(CriticalLinePoint {
            k,
            period,
            point: x.to_f64(),
            lyapunov: log_df / period as f64,
            log_df_critical: log_crit,
            log_constant: log_df - 0.5 * log_crit,
            residual_ulps: resid.to_f64() / ulp(&x).to_f64(),
        });
    }
    Ok(PeriodicOrbitLine { points, diagnostics })
}
