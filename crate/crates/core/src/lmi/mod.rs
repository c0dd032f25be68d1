//! Sufficient stability conditions: LMI assembly, SDP backends, delay
//! bisection and region sweeps.

pub mod blocks;
pub mod feasibility;
pub mod region;
pub mod sdp;

pub use blocks::{assemble_blocks, phi_minus, phi_plus, LmiBlocks};
pub use feasibility::{
    certificate_margins, max_delay, max_delay_scan, solve_feasibility, verify_certificate,
    Certificate, FeasibilityReport, Margins, MaxDelay, Provenance, Verdict,
};
pub use region::{region_sweep, RegionCell, RegionGrid};
pub use sdp::{EigenCheck, InteriorPoint, SdpBackend, SdpProblem, SdpSolution, SdpStatus};
