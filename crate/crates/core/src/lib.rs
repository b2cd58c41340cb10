//! Exact rate-distortion-perception function of Bernoulli vector sources
//! under Hamming distortion and a sum-of-marginal-gaps perception measure.
//!
//! All rates are in nats.

pub mod entropy;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod roots;
pub mod scalar;
pub mod solver;
pub mod source;

pub use error::{RdpError, Result};
pub use graph::{flatten, graph_rdp, load_matrix, EdgeProbabilityMatrix};
pub use oracle::{allocation_grid_oracle, s_of_d_oracle, scalar_channel_oracle, GridSpec, ScalarChannel};
pub use scalar::{scalar_rdp, scalar_rdp_at, scalar_region, Rate, ScalarPoint, ScalarRegion};
pub use solver::{
    classify, length_bounds, rate_distortion, rdp, rdp_p_zero, rdp_with, s_of_d, solve_region_a, solve_region_b,
    solve_region_c, t_of_d, Allocation, BudgetPair, KktCertificate, LengthBounds, OptimalityStructure,
    PlaneRegion, RdpResult, SolverConfig,
};
pub use source::BernoulliVectorSource;
