use clap::ValueEnum;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use quadtherm_core::cantor::{build_cantor_system, chi_crit, itinerary_of_point, point_from_itinerary};
use quadtherm_core::dynamics::{
    cheb_pressure_reference, multiplier_c_derivative, multiplier_c_derivative_fd, period3_orbits,
};
use quadtherm_core::induced::{bowen_root, enumerate_level_branches, enumerate_return_branches, level_decomposition};
use quadtherm_core::precision::real;
use quadtherm_core::pressure::{detect_transition, grid, periodic_orbit_line, pressure_curve, tree_pressure};
use quadtherm_core::render::{self, green_function};
use quadtherm_core::search::{find_parameter, kn_membership, CertifiedInterval, CertifiedIntervalJson, SearchOptions};
use quadtherm_core::symbolic::{density_bounds_hold, density_stats};
use quadtherm_core::{ItineraryWord, Parameter, PhasedSpec, TreeMode, Verdict};

use crate::{Outcome, Output};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Target {
    Appendix,
    ChebPressure,
    Transition,
    Phased,
    FindParam,
    Cantor,
    Bowen,
    OrbitLine,
    Levels,
    Render,
}

/// Preperiod and trap prefix of the parameter used by the induced-map runs.
pub const SEARCH_N: usize = 8;
pub const SEARCH_PREFIX: &str = "111100";

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn certified(out: &Output) -> Result<CertifiedInterval, String> {
    let opts = SearchOptions { precision: out.config.precision_bits, ..Default::default() };
    find_parameter(SEARCH_N, &SEARCH_PREFIX.parse().map_err(err)?, out.config.tol, &opts).map_err(err)
}

pub fn appendix(out: &Output) -> Result<Outcome, String> {
    let prec = out.config.precision_bits;
    let c = Parameter::from_f64(-2.0, prec).map_err(err)?;
    let (p, q) = period3_orbits(&c).map_err(err)?;
    let h = real(prec, 1e-8);
    let dp = multiplier_c_derivative(&c, &p).map_err(err)?.to_f64();
    let dq = multiplier_c_derivative(&c, &q).map_err(err)?.to_f64();
    let fp = multiplier_c_derivative_fd(&c, p.label, &h).map_err(err)?.to_f64();
    let fq = multiplier_c_derivative_fd(&c, q.label, &h).map_err(err)?.to_f64();
    let residuals = [(fp - dp).abs(), (fq - dq).abs()];
    out.json(json!({
        "dP": dp,
        "dPt": dq,
        "closed_form_errors": [(dp + 16.0).abs(), (dq - 24.0).abs()],
        "fd_values": [fp, fq],
        "fd_check_residuals": residuals,
    }))?;
    if (dp + 16.0).abs() <= 1e-12 && (dq - 24.0).abs() <= 1e-12 && residuals.iter().all(|r| *r <= 1e-4) {
        Ok(Outcome::Done)
    } else {
        Err("multiplier derivatives disagree with -16 and 24".into())
    }
}

pub fn run(target: Target, out: &Output) -> Result<Outcome, String> {
    let cfg = &out.config;
    match target {
        Target::Appendix => appendix(out),
        Target::ChebPressure => {
            let mut rows = Vec::new();
            for t in [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0] {
                let e = tree_pressure(-2.0, t, cfg.tree_depth, TreeMode::Complex).map_err(err)?;
                let r = cheb_pressure_reference(t);
                rows.push(vec![
                    format!("{t}"),
                    format!("{:.15e}", e.estimate),
                    format!("{r:.15e}"),
                    format!("{:.3e}", (e.estimate - r).abs()),
                    format!("{:.3e}", e.error_bar),
                ]);
            }
            out.csv(&["t", "estimate", "reference", "abs_error", "error_bar"], &rows)?;
            Ok(Outcome::Done)
        }
        Target::Transition => {
            let curve = pressure_curve(-2.0, &grid(-2.0, 0.0, 41), cfg.tree_depth, TreeMode::Complex).map_err(err)?;
            let report = detect_transition(&curve, |t| -t * 4f64.ln(), 1e-3);
            let detected = report.verdict == quadtherm_core::pressure::TransitionVerdict::Detected;
            out.json(json!({ "curve": curve, "report": report }))?;
            Ok(if detected { Outcome::Done } else { Outcome::Inconclusive })
        }
        Target::Phased => {
            let mut rows = Vec::new();
            for (n, l0) in [(1, 1), (2, 2), (3, 2), (4, 2)] {
                let spec = PhasedSpec::new(n, l0).map_err(err)?;
                for k in [l0 * l0 + 1, 100, 1000, 10_000, 100_000] {
                    let s = density_stats(&spec, k);
                    rows.push(vec![
                        n.to_string(),
                        l0.to_string(),
                        k.to_string(),
                        s.zeros.to_string(),
                        s.blocks.to_string(),
                        density_bounds_hold(&spec, k).to_string(),
                    ]);
                }
            }
            out.csv(&["n_zeros_block", "l0", "k", "zeros", "blocks", "bounds_hold"], &rows)?;
            Ok(Outcome::Done)
        }
        Target::FindParam => {
            let found = certified(out)?;
            let mid = found.parameter();
            let check = kn_membership(&mid, SEARCH_N, SEARCH_PREFIX.len());
            let doubled = Parameter::new(real(2 * cfg.precision_bits, 0.0) + &mid.c).map_err(err)?;
            let recheck = kn_membership(&doubled, SEARCH_N, SEARCH_PREFIX.len());
            let ok = check.verdict == Verdict::Verified && recheck.verdict == Verdict::Verified;
            out.json(json!({
                "interval": CertifiedIntervalJson::from(&found),
                "membership": check,
                "membership_doubled_precision": recheck,
            }))?;
            Ok(if ok { Outcome::Done } else { Outcome::Inconclusive })
        }
        Target::Cantor => {
            let found = certified(out)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut report = Vec::new();
            for c in [Parameter::from_f64(-2.0, cfg.precision_bits).map_err(err)?, found.parameter()] {
                let sys = build_cantor_system(&c).map_err(err)?;
                let mut recovered = 0;
                for _ in 0..100 {
                    let w = ItineraryWord((0..12).map(|_| rng.gen_range(0..2u8)).collect());
                    let (x, _) = point_from_itinerary(&sys, &w).map_err(err)?;
                    if itinerary_of_point(&sys, &x, 12).map_err(err)? == w {
                        recovered += 1;
                    }
                }
                report.push(json!({ "c": c.to_f64(), "words": 100, "recovered": recovered }));
            }
            out.json(report)?;
            Ok(Outcome::Done)
        }
        Target::Bowen => {
            let mut rows = Vec::new();
            let cheb = Parameter::from_f64(-2.0, cfg.precision_bits).map_err(err)?;
            let found = certified(out)?.parameter();
            let runs = [
                (cheb.clone(), enumerate_return_branches(&cheb, 2, 22).map_err(err)?),
                (found.clone(), enumerate_level_branches(&found, SEARCH_N, cfg.big_k, 14).map_err(err)?),
            ];
            for (c, inv) in &runs {
                for t in [2.0, 3.0, 4.0] {
                    let b = bowen_root(inv, t).map_err(err)?;
                    let e = tree_pressure(c.to_f64(), t, cfg.tree_depth, TreeMode::Real).map_err(err)?;
                    rows.push(vec![
                        format!("{:.17}", c.to_f64()),
                        format!("{t}"),
                        format!("{:.10}", b.p_star),
                        format!("{:.10}", b.bracket.0),
                        format!("{:.10}", b.bracket.1),
                        format!("{:.10}", e.estimate),
                        format!("{:.3e}", e.error_bar),
                    ]);
                }
            }
            out.csv(&["c", "t", "p_star", "bracket_lo", "bracket_hi", "tree_pressure", "tree_error_bar"], &rows)?;
            Ok(Outcome::Done)
        }
        Target::OrbitLine => {
            let found = certified(out)?.parameter();
            let line = periodic_orbit_line(&found, SEARCH_N, 4).map_err(err)?;
            out.json(json!({ "constant_variation": line.constant_variation(), "line": line }))?;
            Ok(Outcome::Done)
        }
        Target::Levels => {
            let found = certified(out)?.parameter();
            let chi = chi_crit(&found, SEARCH_N, 26).map_err(err)?;
            let inv = enumerate_level_branches(&found, SEARCH_N, cfg.big_k, 14).map_err(err)?;
            let p = -1.5 * chi.estimate;
            let terms = level_decomposition(&inv, &found, 3.0, p).map_err(err)?;
            out.json(json!({ "chi_crit": chi, "t": 3.0, "p": p, "terms": terms }))?;
            Ok(Outcome::Done)
        }
        Target::Render => {
            let c = Complex64::new(-2.0, 0.0);
            let mut landings = Vec::new();
            for a in ["0/1", "1/2", "1/3"] {
                let ray = render::trace_ray_dynamical(c, a.parse().map_err(err)?, 1e-8).map_err(err)?;
                landings.push(json!({ "angle": a, "landing": ray.landing_estimate, "stalled": ray.stalled }));
            }
            let g = green_function(c, Complex64::new(3.0, 0.0)).value;
            let eq = render::equipotential(c, 2f64.ln(), 64).map_err(err)?;
            let resid = eq
                .points
                .iter()
                .map(|p| {
                    let z = Complex64::new(p[0], p[1]);
                    (green_function(c, z * z + c).value - 2.0 * 2f64.ln()).abs()
                })
                .fold(0.0, f64::max);
            out.json(json!({
                "landings": landings,
                "green_minus2_at_3": g,
                "green_closed_form": ((3.0 + 5f64.sqrt()) / 2.0).ln(),
                "equipotential_residual": resid,
            }))?;
            Ok(Outcome::Done)
        }
    }
}
