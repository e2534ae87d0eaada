//! Shared data types: data matrices, union-of-subspace ground truth,
//! per-column solutions, masks, geometry summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{real, tol, Col, Mat, Real};

/// What a matrix's columns represent in the corruption model X = Y + Z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// X: what the algorithm sees.
    Observed,
    /// Y: unit-norm points on the union of subspaces.
    Clean,
    /// Z: the corruption itself.
    Corruption,
}

/// An n x N matrix whose columns are data points, tagged with its [`Role`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix<T: Real> {
    pub values: Mat<T>,
    pub role: Role,
}

impl<T: Real> DataMatrix<T> {
    /// Wraps a matrix after checking finiteness; `Clean` additionally
    /// requires unit columns.
    pub fn new(values: Mat<T>, role: Role) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data matrix entry".into()));
        }
        if role == Role::Clean {
            let tol = real::<T>(tol::UNIT_NORM_TOL);
            for (j, col) in values.column_iter().enumerate() {
                if (col.norm() - T::one()).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "clean column {j} is not unit norm"
                    )));
                }
            }
        }
        Ok(Self { values, role })
    }

    /// Ambient dimension n.
    pub fn ambient_dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of points N.
    pub fn num_points(&self) -> usize {
        self.values.ncols()
    }

    /// The matrix with column `i` removed (the per-column dictionary).
    pub fn leave_one_out(&self, i: usize) -> Mat<T> {
        remove_column(&self.values, i)
    }
}

/// Copy of `m` without column `i`.
pub fn remove_column<T: Real>(m: &Mat<T>, i: usize) -> Mat<T> {
    let (n, cols) = m.shape();
    assert!(i < cols, "column index out of range");
    let mut out = Mat::<T>::zeros(n, cols - 1);
    let mut k = 0;
    for j in 0..cols {
        if j != i {
            out.set_column(k, &m.column(j));
            k += 1;
        }
    }
    out
}

/// Observation mask for missing-entry corruption; `true` means observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskMatrix {
    pub observed: DMatrix<bool>,
}

impl MaskMatrix {
    pub fn fully_observed(n: usize, cols: usize) -> Self {
        Self {
            observed: DMatrix::from_element(n, cols, true),
        }
    }

    /// Number of observed entries in column `j`.
    pub fn observed_count(&self, j: usize) -> usize {
        self.observed.column(j).iter().filter(|&&b| b).count()
    }
}

/// Ground truth for a union of L subspaces.
///
/// `bases[l]` is an n x d_l matrix with orthonormal columns; `labels[i]` is
/// the 0-based subspace index of point i; `counts[l]` points were drawn from
/// subspace l; `kappas[l] = counts[l] / dims[l]` is the sampling density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceEnsemble<T: Real> {
    pub bases: Vec<Mat<T>>,
    pub labels: Vec<usize>,
    pub dims: Vec<usize>,
    pub counts: Vec<usize>,
    pub kappas: Vec<T>,
}

impl<T: Real> SubspaceEnsemble<T> {
    pub fn new(bases: Vec<Mat<T>>, labels: Vec<usize>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::InvalidParameter("no subspaces".into()));
        }
        let n = bases[0].nrows();
        let ortho = real::<T>(tol::ORTHO_TOL);
        for (l, u) in bases.iter().enumerate() {
            if u.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "basis {l} has ambient dim {} instead of {n}",
                    u.nrows()
                )));
            }
            if u.ncols() == 0 || u.ncols() > n {
                return Err(Error::InvalidParameter(format!(
                    "basis {l} has invalid rank {}",
                    u.ncols()
                )));
            }
            let gram = u.transpose() * u;
            let eye = Mat::<T>::identity(u.ncols(), u.ncols());
            if (gram - eye).amax() > ortho {
                return Err(Error::InvalidParameter(format!(
                    "basis {l} is not orthonormal"
                )));
            }
        }
        let num = bases.len();
        let mut counts = vec![0usize; num];
        for &l in &labels {
            if l >= num {
                return Err(Error::LabelMismatch(format!(
                    "label {l} out of range for {num} subspaces"
                )));
            }
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::LabelMismatch("a subspace has no points".into()));
        }
        let dims: Vec<usize> = bases.iter().map(|u| u.ncols()).collect();
        let kappas = counts
            .iter()
            .zip(&dims)
            .map(|(&c, &d)| real::<T>(c as f64 / d as f64))
            .collect();
        Ok(Self {
            bases,
            labels,
            dims,
            counts,
            kappas,
        })
    }

    pub fn num_subspaces(&self) -> usize {
        self.bases.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.bases[0].nrows()
    }

    pub fn num_points(&self) -> usize {
        self.labels.len()
    }

    /// Indices of the points drawn from subspace `l`, in column order.
    pub fn members(&self, l: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &lab)| lab == l)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Solution of one per-column problem min ||c||_1 + (lambda/2)||x - A c||^2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnSolution<T: Real> {
    /// Coefficients over the dictionary columns (length = A.ncols()).
    pub coefficients: Col<T>,
    /// Residual e = x - A c.
    pub residual: Col<T>,
    /// Dual vector nu = lambda * e.
    pub dual: Col<T>,
    /// Indices j with |c_j| above the support threshold.
    pub support: Vec<usize>,
    /// ||c||_1 + (lambda/2) ||e||^2.
    pub objective: T,
    /// Set when x = 0: the zero solution is returned and the dual direction
    /// is undefined.
    pub degenerate_dual: bool,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    /// Objective snapshots every 100 iterations when requested (else empty).
    pub objective_history: Vec<T>,
}

/// Measured geometry of a dataset: restricted inradii, incoherence, noise
/// level, and the induced lambda window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometrySummary<T: Real> {
    pub r_per_subspace: Vec<T>,
    pub r: T,
    pub mu_per_subspace: Vec<T>,
    pub mu: T,
    pub delta: T,
    pub lambda_lower: T,
    pub lambda_upper: T,
    pub criterion_holds: bool,
}

/// Soft invariant violations found by [`validate_dataset`]; hard shape
/// errors are returned as `Err` instead.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a dataset against its ground truth: finite entries, unit clean
/// columns, orthonormal bases, label/count consistency, kappa > 1, and at
/// least one nonzero entry per observed column.
pub fn validate_dataset<T: Real>(
    observed: &DataMatrix<T>,
    clean: &DataMatrix<T>,
    truth: &SubspaceEnsemble<T>,
) -> Result<ValidationReport> {
    let n = truth.ambient_dim();
    let total = truth.num_points();
    if observed.ambient_dim() != n || clean.ambient_dim() != n {
        return Err(Error::DimensionMismatch(
            "ambient dimension differs between data and bases".into(),
        ));
    }
    if observed.num_points() != total || clean.num_points() != total {
        return Err(Error::DimensionMismatch(
            "point count differs between data and labels".into(),
        ));
    }

    let mut report = ValidationReport::default();
    if observed.values.iter().any(|v| !v.is_finite()) {
        report
            .violations
            .push("observed matrix has non-finite entries".into());
    }
    let unit = real::<T>(tol::UNIT_NORM_TOL);
    for (j, col) in clean.values.column_iter().enumerate() {
        if (col.norm() - T::one()).abs() > unit {
            report
                .violations
                .push(format!("clean column {j} is not unit norm"));
        }
    }
    let span = real::<T>(tol::SPAN_TOL);
    for (i, &l) in truth.labels.iter().enumerate() {
        let y = clean.values.column(i);
        let u = &truth.bases[l];
        let res = (&y - u * (u.transpose() * &y)).norm();
        if res > span {
            report.violations.push(format!(
                "clean column {i} leaves its subspace (residual {res:?})"
            ));
        }
    }
    for (l, &kappa) in truth.kappas.iter().enumerate() {
        if kappa <= T::one() {
            report.violations.push(format!(
                "subspace {l} has kappa <= 1; geometry bounds need kappa > 1"
            ));
        }
    }
    for j in 0..total {
        if observed.values.column(j).amax() == T::zero() {
            report
                .violations
                .push(format!("observed column {j} is identically zero"));
        }
    }
    Ok(report)
}
