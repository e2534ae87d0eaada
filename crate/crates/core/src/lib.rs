//! Sparse self-representation subspace clustering for corrupted data.
//!
//! Each data column is written as a sparse combination of the remaining
//! columns by solving
//!
//! ```text
//!     min_c ||c||_1 + (lambda/2) ||x - A c||_2^2
//! ```
//!
//! per column (`solver`), the coefficient matrix is symmetrized into an
//! affinity graph, the number of clusters is read off the eigengap of the
//! normalized Laplacian, and spectral clustering produces labels
//! (`clustering`). The `geometry` module measures the quantities that decide
//! whether this succeeds (restricted inradii of leave-one-out symmetrized
//! hulls, incoherence via dual directions), and `certificates` evaluates the
//! detection/nontriviality conditions and dual-vector norm bounds built from
//! them. `generator` draws synthetic unions of subspaces with bounded or
//! missing-entry corruption, deterministically from keyed RNG streams.
//!
//! All numeric code is generic over [`Real`] (f32 or f64); the `*64`/`*32`
//! aliases below pin the common instantiations. Matrices are column-major
//! [`nalgebra`] types; data points are columns. Labels and indices are
//! 0-based everywhere in the library; 1-based labels appear only in external
//! interfaces (CSV, JSON, CLI output).

pub mod certificates;
pub mod clustering;
pub mod error;
pub mod generator;
pub mod geometry;
pub mod solver;
pub mod tol;
pub mod types;

use num_traits::{FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Scalar type the whole crate is generic over.
///
/// `nalgebra::RealField` supplies the factorization-grade arithmetic, the
/// num-traits bounds supply exact conversions from the f64 constants in
/// [`tol`]. Implemented by f32 and f64.
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + Send + Sync
{
}

impl<T> Real for T where
    T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + Send + Sync
{
}

/// Converts an f64 constant into the working scalar type.
///
/// Panics only if `x` is not representable at all (never for finite f64 into
/// f32/f64 in the tolerance/constant range this crate uses).
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant must be representable in the scalar type")
}

/// Converts the working scalar back to f64 for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar must convert to f64")
}

/// Dynamically sized matrix over the working scalar.
pub type Mat<T> = nalgebra::DMatrix<T>;
/// Dynamically sized column vector over the working scalar.
pub type Col<T> = nalgebra::DVector<T>;

pub type Mat64 = Mat<f64>;
pub type Col64 = Col<f64>;
pub type Mat32 = Mat<f32>;
pub type Col32 = Col<f32>;

pub type DataMatrix64 = types::DataMatrix<f64>;
pub type SubspaceEnsemble64 = types::SubspaceEnsemble<f64>;
pub type ColumnSolution64 = types::ColumnSolution<f64>;
pub type GeometrySummary64 = types::GeometrySummary<f64>;
pub type DataMatrix32 = types::DataMatrix<f32>;
pub type SubspaceEnsemble32 = types::SubspaceEnsemble<f32>;
