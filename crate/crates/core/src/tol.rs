//! Numeric tolerances and solver defaults, all in one place.
//!
//! Every threshold the library compares against is named here; call sites
//! convert with [`crate::real`]. Nothing else in the crate hard-codes a
//! tolerance.

/// Primal feasibility slack: ||e - (x - Ac)|| and similar residuals.
pub const FEAS_TOL: f64 = 1e-8;

/// Dual feasibility slack: sign conditions and ||A^T nu||_inf <= 1 checks.
/// Looser than FEAS_TOL because dual quantities carry a factor of lambda.
pub const DUAL_TOL: f64 = 1e-6;

/// Orthonormality of subspace bases: ||U^T U - I||_max.
pub const ORTHO_TOL: f64 = 1e-10;

/// Membership of a vector/generator in a carrier subspace, relative residual.
pub const SPAN_TOL: f64 = 1e-10;

/// Unit-norm check on clean data columns.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// ADMM stopping: both the primal residual ||c - z|| and the dual residual
/// rho ||z - z_prev|| must drop below this. Tighter than the certificate
/// tolerances above so converged solutions certify with slack.
pub const ADMM_STOP_TOL: f64 = 1e-10;

/// Stopping residual for the equality-constrained solve, which carries no
/// data-fit term and converges fast enough to afford the extra digits.
pub const NOISELESS_STOP_TOL: f64 = 1e-12;

/// ADMM penalty parameter; fixed, no over-relaxation.
pub const ADMM_RHO: f64 = 1.0;

/// Iteration cap before the solver reports non-convergence.
pub const ADMM_MAX_ITERATIONS: usize = 200_000;

/// Support identification: |c_j| > SUPPORT_REL_TOL * max(1, ||c||_inf).
pub const SUPPORT_REL_TOL: f64 = 1e-6;

/// A dual vector below this norm (relative to lambda * max(1, ||x||)) is
/// treated as degenerate; its direction is undefined.
pub const NU_ZERO_TOL: f64 = 1e-12;

/// Feasibility slack when accepting a candidate vertex of the polar polytope.
pub const VERTEX_FEAS_TOL: f64 = 1e-9;

/// Residual slack on the linear solve that produces a candidate vertex.
pub const VERTEX_SOLVE_TOL: f64 = 1e-8;

/// Relative singular-value cutoff when ranking generator spans.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Degree assigned to isolated affinity-graph vertices so the normalized
/// Laplacian stays defined; such vertices are flagged.
pub const ISOLATED_DEGREE: f64 = 1e-12;

/// Laplacian eigenvalues must land in [0, 2] within this slack.
pub const EIG_RANGE_TOL: f64 = 1e-8;

/// Consecutive eigengaps within this of the running maximum count as ties;
/// the earliest (largest cluster count) wins. Absolute scale is fine because
/// the spectrum lives in [0, 2].
pub const EIGENGAP_TIE_TOL: f64 = 1e-9;

/// Embedding rows with norm at or below this stay unnormalized (they carry
/// no directional information for k-means).
pub const EMBEDDING_ZERO_TOL: f64 = 1e-12;

/// Randomized inradius search: restarts are RANDOMIZED_RESTARTS_PER_DIM * dim.
pub const RANDOMIZED_RESTARTS_PER_DIM: usize = 64;

/// Randomized inradius search: projected subgradient steps per restart,
/// step size 1/k.
pub const RANDOMIZED_STEPS: usize = 500;

/// k-means restarts inside spectral clustering.
pub const KMEANS_RESTARTS: usize = 20;

/// k-means Lloyd-iteration cap per restart.
pub const KMEANS_MAX_ITERATIONS: usize = 100;
