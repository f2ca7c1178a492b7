//! Certificates for the absorbing set, the connection graph between
//! equilibria and the dimension experiment.

mod bounds;
mod graph;
mod manifold;
mod scan;

pub use bounds::{
    absorbing_ball, certify_dissipation, certify_smoothing, linf_bound, run_trials, smoothing_profile,
    trial_suite, uniform_gronwall, verify_linf, AbsorbingBall, BoundCertificate, LinfBound,
    SmoothingCertificates, SmoothingProfile, TrialRuns,
};
pub use manifold::{
    omega_limit, resolve_forward, trace_unstable_manifold, ManifoldTrace, OmegaLimit, TraceOptions,
};
pub use graph::{
    build_attractor, edge_curves, edge_file_name, energy_descent_audit, is_negation_symmetric, AuditReport,
    BuildParams, ConnectionGraph, Edge, EdgeAudit, EdgeReport, EpsReport, GraphReport, NodeLevel, NodeReport,
    StableSideReport, UnresolvedTrace,
};
pub use scan::{count_below, dimension_scan, linearized_count, nearest_safe_k, resonance, DimensionScan, ScanRow};
