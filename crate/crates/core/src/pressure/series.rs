use serde::Serialize;

use super::tree::{lse2, PreimageTree, TreeMode};
use crate::dynamics::{iterate, Parameter};
use crate::error::{Error, Result};

/// Ratio margin: a tail is extrapolated only for ratios below `1 - 2^-4`.
pub const RATIO_MARGIN: f64 = 1.0 / 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    /// The full sum is at most the threshold.
    ConvergesLeq,
    /// The full sum is at least the threshold (possibly infinite).
    DivergesGeq,
    Inconclusive,
}

/// Series with positive terms, kept in log-space.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesReport {
    pub terms_computed: usize,
    pub log_terms: Vec<f64>,
    pub log_partial_sum: f64,
    /// `log(last * r / (1 - r))` when the terms decay geometrically.
    pub log_tail_bound: Option<f64>,
    /// Mean term ratio over the last five terms.
    pub ratio: f64,
    pub log_threshold: f64,
    pub verdict: SeriesVerdict,
}

/// Classify a series from its log-terms against `log_threshold`.
pub fn classify(log_terms: Vec<f64>, log_threshold: f64) -> SeriesReport {
    let partial = log_terms.iter().fold(f64::NEG_INFINITY, |a, &b| lse2(a, b));
    let k = log_terms.len();
    let window = 5.min(k);
    let ratio = if window >= 2 {
        ((log_terms[k - 1] - log_terms[k - window]) / (window - 1) as f64).exp()
    } else {
        f64::NAN
    };
    const SLACK: f64 = 1e-9;
    let mut tail = None;
    let verdict = if partial > log_threshold + SLACK {
        SeriesVerdict::DivergesGeq
    } else if ratio <= 1.0 - RATIO_MARGIN {
        let lt = log_terms[k - 1] + ratio.ln() - (1.0 - ratio).ln();
        tail = Some(lt);
        if lse2(partial, lt) < log_threshold - SLACK {
            SeriesVerdict::ConvergesLeq
        } else {
            SeriesVerdict::Inconclusive
        }
    } else if ratio >= 1.0 + RATIO_MARGIN {
        SeriesVerdict::DivergesGeq
    } else {
        SeriesVerdict::Inconclusive
    };
    SeriesReport {
        terms_computed: k,
        log_terms,
        log_partial_sum: partial,
        log_tail_bound: tail,
        ratio,
        log_threshold,
        verdict,
    }
}

/// `sum_j e^{-jp} sum_{y in f^{-j}(0)} |Df^j(y)|^{-t}` for `j = 1..=big_j`.
pub fn poincare_series(c: f64, t: f64, p: f64, big_j: usize, mode: TreeMode) -> Result<SeriesReport> {
    let tree = PreimageTree::build(c, big_j, mode)?;
    let terms = (1..=big_j).map(|j| tree.log_sum(t, j) - j as f64 * p).collect();
    Ok(classify(terms, f64::INFINITY))
}

/// `sum_k e^{-(n+3k)p} |Df^{n+3k}(c)|^{-t/2}` for `k = 0..=big_k`.
pub fn postcritical_series(
    c: &Parameter,
    n: usize,
    t: f64,
    p: f64,
    big_k: usize,
    log_threshold: f64,
) -> Result<SeriesReport> {
    let horizon = n + 3 * big_k;
    let orbit = iterate(c, &c.c, horizon);
    if let Some(j) = orbit.critical_hit {
        return Err(Error::CriticalHit { index: j });
    }
    if orbit.len() <= horizon {
        return Err(Error::Escape { index: orbit.len() - 1 });
    }
    let terms = (0..=big_k)
        .map(|k| {
            let j = n + 3 * k;
            -(j as f64) * p - 0.5 * t * orbit.log_abs_derivative[j].to_f64()
        })
        .collect();
    Ok(classify(terms, log_threshold))
}
