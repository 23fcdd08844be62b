//! Constructive equidecomposition toolkit on finite grid-by-cyclic ambients.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`lattice`]: ambient spaces, point sets, cubes, edges.
//! 2. [`oracle`]: independent reference deciders (max-flow and brute force)
//!    the fast paths are tested against.

pub mod conditions;
pub mod equidecomp;
pub mod lattice;
pub mod oracle;
pub mod real_flow;
pub mod rounding;
pub mod tiling;

pub use conditions::{
    check_k_hall, discrepancy, equidistribution_report, least_hall_k, DiscrepancyReport,
    DiscrepancyRow, HallVerdict, HallWitness, SiteFunction,
};
pub use equidecomp::{
    aggregate_flow, choose_tile_size, decompose, finite_orbit_decompose, quotient_by_delta,
    resolve_tiles, restrict_decomposition, verify_decomposition, DecomposeReport,
    GroupElement, Piece, PieceAssignment, TileFlowGraph, TileResolution, VerifyReport,
};
pub use lattice::{
    edges, edges_plus, interior_boundary, make_ambient, Ambient, CubeSpec, GridKind,
    OrientedEdge, Point, PointSet,
};
pub use real_flow::{
    build_exact_flow, build_real_flow, lift_function, path_flow, tile_matching, FlowMap,
    Lift, LiftedSpace, PartialMatching, RealFlowReport,
};
pub use rounding::{
    boundary_correction, make_integer_flow, round_cube, round_slab, round_slab_axis,
    theta_flow, RoundingReport, RoundingTrace, ThetaCycle,
};
pub use tiling::{
    interior_iterate, invariance_defect, invariant_core, meet, nested_family,
    nestedness_violations, tile_cubes, CubeTiling, FamilyMeta, NestedFamily, NestedStage,
    TileCore,
};

/// Which side of a mass-transport inequality failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HallSide {
    /// Positive mass in the witness exceeds reachable negative mass.
    Positive,
    /// Negative mass in the witness exceeds reachable positive mass.
    Negative,
}

/// Errors across the pipeline.
///
/// `HallViolation` and `SizeMismatch` are verdicts about the input;
/// `Internal` means a stage broke one of its own invariants.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid ambient: {0}")]
    InvalidAmbient(String),

    #[error("arguments live on different ambients")]
    AmbientMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no feasible choice: {0}")]
    Infeasible(String),

    #[error("point sets have different sizes: {a} vs {b}")]
    SizeMismatch { a: usize, b: usize },

    #[error(
        "Hall condition fails at distance {k}: {side:?} mass exceeds by {deficit} \
         over a witness of {witness_size} points"
    )]
    HallViolation {
        k: usize,
        side: HallSide,
        deficit: i64,
        witness_size: usize,
    },

    #[error("{stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}
