use serde::Serialize;

use super::tree::PressureCurve;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionVerdict {
    Detected,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransitionReport {
    pub t_star: Option<f64>,
    /// Slope of the curve right of `t_star` minus its slope left of it.
    pub slope_gap: Option<f64>,
    pub verdict: TransitionVerdict,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Locate where the curve leaves the reference line `line(t)` (the curve
/// being above it on the left). `threshold` is the minimal excess `curve -
/// line` that counts as a departure.
pub fn detect_transition<F: Fn(f64) -> f64>(curve: &PressureCurve, line: F, threshold: f64) -> TransitionReport {
    let inconclusive = TransitionReport { t_star: None, slope_gap: None, verdict: TransitionVerdict::Inconclusive };
    let t = &curve.t;
    if t.len() < 4 {
        return inconclusive;
    }
    let d: Vec<f64> = t.iter().zip(&curve.estimate).map(|(&t, &p)| p - line(t)).collect();
    let big_d = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(big_d > threshold) {
        return inconclusive;
    }
    // Departed branch: points with excess at least half of the maximum.
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        t.iter().zip(&curve.estimate).zip(&d).filter(|(_, &di)| di >= big_d / 2.0).map(|((&a, &b), _)| (a, b)).unzip();
    let Some((slope_r, icpt_r)) = least_squares(&xs, &ys) else { return inconclusive };
    let (l1, l0) = (line(1.0), line(0.0));
    let slope_line = l1 - l0;
    if (slope_r - slope_line).abs() < 1e-15 {
        return inconclusive;
    }
    let t_star = (l0 - icpt_r) / (slope_r - slope_line);
    let left: Vec<usize> = (0..t.len()).filter(|&i| t[i] < t_star).collect();
    let slope_left = if left.len() >= 2 {
        let (a, b) = (left[0], left[left.len() - 1]);
        (curve.estimate[b] - curve.estimate[a]) / (t[b] - t[a])
    } else {
        slope_line
    };
    let gap = slope_r - slope_left;
    let max_err = curve.error_bar.windows(2).map(|w| w[0].max(w[1])).fold(0.0, f64::max);
    let verdict = if gap.abs() > 2.0 * max_err { TransitionVerdict::Detected } else { TransitionVerdict::Inconclusive };
    TransitionReport { t_star: Some(t_star), slope_gap: Some(gap), verdict }
}

#[derive(Clone, Debug, Serialize)]
pub struct LegendrePoint {
    pub lambda: f64,
    /// `min_t (P(t) + t lambda)` over the grid.
    pub value: f64,
    /// Whether a (near-)minimiser sits strictly inside the grid. A minimum
    /// only at the boundary means the true value is `-inf`.
    pub interior: bool,
}

pub fn legendre_transform(curve: &PressureCurve, lambda_grid: &[f64]) -> Result<Vec<LegendrePoint>> {
    if curve.len() < 3 {
        return Err(Error::Precondition("Legendre transform needs at least 3 grid points".into()));
    }
    let last = curve.len() - 1;
    Ok(lambda_grid
        .iter()
        .map(|&lambda| {
            let vals: Vec<f64> = curve.t.iter().zip(&curve.estimate).map(|(t, p)| p + t * lambda).collect();
            let value = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let tol = 1e-12 * (1.0 + value.abs());
            let interior = vals.iter().enumerate().any(|(i, v)| i != 0 && i != last && *v <= value + tol);
            LegendrePoint { lambda, value, interior }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::tree::{grid, TreeMode};

    fn synthetic(f: impl Fn(f64) -> f64) -> PressureCurve {
        synthetic_on(grid(-1.0, 3.0, 41), f)
    }

    fn synthetic_on(t: Vec<f64>, f: impl Fn(f64) -> f64) -> PressureCurve {
        PressureCurve {
            c: -2.0,
            mode: TreeMode::Real,
            depth: 0,
            estimate: t.iter().map(|&x| f(x)).collect(),
            error_bar: vec![1e-6; t.len()],
            t,
        }
    }

    #[test]
    fn finds_the_kink() {
        let curve = synthetic(|t: f64| (1.0 - t).max(2.0 - 2.0 * t));
        let r = detect_transition(&curve, |t| 2.0 - 2.0 * t, 1e-3);
        assert_eq!(r.verdict, TransitionVerdict::Detected);
        assert!((r.t_star.unwrap() - 1.0).abs() < 1e-9);
        assert!((r.slope_gap.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn smooth_curve_is_inconclusive() {
        let curve = synthetic(|t| 1.0 - t);
        let r = detect_transition(&curve, |t| 1.0 - t, 1e-3);
        assert_eq!(r.verdict, TransitionVerdict::Inconclusive);
    }

    #[test]
    fn legendre_flags_interior_minimisers() {
        let curve = synthetic_on(grid(-3.0, 3.0, 61), |t: f64| (1.0 - t).max(-2.0 * t));
        let pts = legendre_transform(&curve, &[0.5, 1.5, 3.0]).unwrap();
        assert!(!pts[0].interior);
        assert!(pts[1].interior);
        assert!((pts[1].value - (-1.0 + 1.5)).abs() < 1e-12);
        assert!(!pts[2].interior);
    }
}
