//! Geometric pressure `P(t)` from preimage trees, the Poincare and
//! postcritical series, transition detection and the critical line.

pub mod critical;
pub mod series;
pub mod transition;
pub mod tree;

pub use critical::{periodic_orbit_line, CriticalLinePoint, PeriodicOrbitLine};
pub use series::{classify, RATIO_MARGIN, poincare_series, postcritical_series, SeriesReport, SeriesVerdict};
pub use transition::{detect_transition, legendre_transform, LegendrePoint, TransitionReport, TransitionVerdict};
pub use tree::{grid, lse2, pressure_curve, tree_pressure, PreimageTree, PressureCurve, PressureEstimate, TreeMode};

/// The critical line `-t chi / 2`.
pub fn critical_line(t: f64, chi: f64) -> f64 {
    -t * chi / 2.0
}
