//! Numerical laboratory for the thermodynamic formalism of real quadratic
//! maps `f_c(z) = z^2 + c` near the Chebyshev parameter `c = -2`.

pub mod cantor;
pub mod dynamics;
pub mod error;
pub mod induced;
pub mod precision;
pub mod pressure;
pub mod render;
pub mod search;
pub mod symbolic;

pub use cantor::CantorSystem;
pub use dynamics::{CycleLabel, OrbitLog, Parameter, PeriodicOrbit};
pub use error::{Error, Result};
pub use induced::{BranchInventory, ReturnBranch, Truncation};
pub use precision::{HighReal, Interval, DEFAULT_PRECISION};
pub use pressure::{PressureCurve, PressureEstimate, TreeMode};
pub use render::{Polyline, RayAngle};
pub use search::{CertifiedInterval, MembershipReport, Verdict};
pub use symbolic::{ItineraryWord, PhasedSpec};
