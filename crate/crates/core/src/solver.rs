//! Per-column sparse self-representation solves.
//!
//! `solve_column` minimizes ||c||_1 + (lambda/2)||x - A c||_2^2 by ADMM on
//! the consensus split c = z (penalty rho fixed, no over-relaxation). The
//! reported solution is the sparse iterate z, the residual e = x - A c is
//! formed from it, and the dual vector is always nu = lambda * e, never the
//! splitting's internal multiplier. The dual problem
//!
//! ```text
//!     max <x, nu> - (1/(2 lambda)) ||nu||^2   s.t.  ||A^T nu||_inf <= 1
//! ```
//!
//! is strongly concave, so nu is unique even when c is not; tests rely on
//! this. `solve_noiseless_l1` handles the equality-constrained limit
//! min ||c||_1 s.t. B c = y and returns the minimal-norm dual optimum.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ColumnSolution, DataMatrix};
use crate::{real, to_f64, tol, Col, Mat, Real};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions<T: Real> {
    pub max_iterations: usize,
    /// Stop when ||c - z|| falls below this...
    pub primal_tolerance: T,
    /// ...and rho * ||z - z_prev|| below this.
    pub dual_tolerance: T,
    /// ADMM penalty rho.
    pub penalty: T,
    /// Support threshold is support_rel_tolerance * max(1, ||c||_inf).
    pub support_rel_tolerance: T,
    /// When set, z and u start at seeded uniform values instead of zero.
    /// Exists so tests can verify that the dual does not depend on the path.
    pub init_seed: Option<u64>,
    /// Record the objective every 100 iterations into objective_history.
    pub log_objective: bool,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: tol::ADMM_MAX_ITERATIONS,
            primal_tolerance: real(tol::ADMM_STOP_TOL),
            dual_tolerance: real(tol::ADMM_STOP_TOL),
            penalty: real(tol::ADMM_RHO),
            support_rel_tolerance: real(tol::SUPPORT_REL_TOL),
            init_seed: None,
            log_objective: false,
        }
    }
}

fn soft<T: Real>(v: T, threshold: T) -> T {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        T::zero()
    }
}

fn check_finite<T: Real>(m: impl Iterator<Item = T>, what: &str) -> Result<()> {
    for v in m {
        if !v.is_finite() {
            return Err(Error::NonFinite(what.into()));
        }
    }
    Ok(())
}

fn objective_value<T: Real>(x: &Col<T>, a: &Mat<T>, c: &Col<T>, lambda: T) -> T {
    let e = x - a * c;
    c.iter().fold(T::zero(), |s, &v| s + v.abs()) + lambda * e.norm_squared() / real::<T>(2.0)
}

/// Solves min ||c||_1 + (lambda/2)||x - A c||^2 for one column.
pub fn solve_column<T: Real>(
    x: &Col<T>,
    dictionary: &Mat<T>,
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<ColumnSolution<T>> {
    let a = dictionary;
    let n = a.nrows();
    let m = a.ncols();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "x has length {} but the dictionary has {n} rows",
            x.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("dictionary has no columns".into()));
    }
    if !lambda.is_finite() || lambda <= T::zero() {
        return Err(Error::InvalidParameter(
            "lambda must be finite and positive".into(),
        ));
    }
    check_finite(x.iter().copied(), "target column")?;
    check_finite(a.iter().copied(), "dictionary")?;

    // x = 0: the zero solution is optimal and the dual direction undefined.
    if x.amax() == T::zero() {
        return Ok(ColumnSolution {
            coefficients: Col::zeros(m),
            residual: Col::zeros(n),
            dual: Col::zeros(n),
            support: Vec::new(),
            objective: T::zero(),
            degenerate_dual: true,
            iterations: 0,
            primal_residual: T::zero(),
            dual_residual: T::zero(),
            objective_history: Vec::new(),
        });
    }

    let q = a.transpose() * x;
    // ||lambda A^T x||_inf <= 1: c = 0 satisfies the optimality condition
    // with nu = lambda x exactly; no iteration needed.
    if q.amax() * lambda <= T::one() {
        let nu = x * lambda;
        return Ok(ColumnSolution {
            coefficients: Col::zeros(m),
            residual: x.clone(),
            dual: nu,
            support: Vec::new(),
            objective: lambda * x.norm_squared() / real::<T>(2.0),
            degenerate_dual: false,
            iterations: 0,
            primal_residual: T::zero(),
            dual_residual: T::zero(),
            objective_history: Vec::new(),
        });
    }

    let rho = opts.penalty;
    if !rho.is_finite() || rho <= T::zero() {
        return Err(Error::InvalidParameter(
            "penalty must be finite and positive".into(),
        ));
    }
    let mut gram = a.transpose() * a;
    gram *= lambda;
    for k in 0..m {
        gram[(k, k)] += rho;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Geometry("normal matrix is not positive definite".into()))?;

    let (mut z, mut u) = match opts.init_seed {
        None => (Col::<T>::zeros(m), Col::<T>::zeros(m)),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw = |rng: &mut ChaCha8Rng| real::<T>(rng.random::<f64>() - 0.5);
            (
                Col::<T>::from_fn(m, |_, _| draw(&mut rng)),
                Col::<T>::from_fn(m, |_, _| draw(&mut rng)),
            )
        }
    };

    let shrink = T::one() / rho;
    let mut rhs = Col::<T>::zeros(m);
    let mut c = Col::<T>::zeros(m);
    let mut history = Vec::new();
    let mut primal = T::zero();
    let mut dual = T::zero();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iterations {
        iterations = it;
        // c-update: (lambda A^T A + rho I) c = lambda A^T x + rho (z - u).
        rhs.copy_from(&z);
        rhs -= &u;
        rhs *= rho;
        rhs.axpy(lambda, &q, T::one());
        chol.solve_mut(&mut rhs);
        c.copy_from(&rhs);

        // z-update: soft threshold at 1/rho; u-update accumulates c - z.
        let mut dual_sq = T::zero();
        let mut primal_sq = T::zero();
        for j in 0..m {
            let zj = soft(c[j] + u[j], shrink);
            let dz = zj - z[j];
            dual_sq += dz * dz;
            z[j] = zj;
            let rj = c[j] - zj;
            primal_sq += rj * rj;
            u[j] += rj;
        }
        primal = primal_sq.sqrt();
        dual = rho * dual_sq.sqrt();

        if opts.log_objective && it % 100 == 0 {
            history.push(objective_value(x, a, &z, lambda));
        }
        if primal <= opts.primal_tolerance && dual <= opts.dual_tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            primal: to_f64(primal),
            dual: to_f64(dual),
        });
    }

    // Report the sparse iterate; e and nu are formed from it.
    let e = x - a * &z;
    let nu = &e * lambda;
    let threshold = opts.support_rel_tolerance * T::one().max(z.amax());
    let support: Vec<usize> = (0..m).filter(|&j| z[j].abs() > threshold).collect();
    let objective = objective_value(x, a, &z, lambda);

    Ok(ColumnSolution {
        coefficients: z,
        residual: e,
        dual: nu,
        support,
        objective,
        degenerate_dual: false,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        objective_history: history,
    })
}

/// Full self-representation solve: every column against all the others.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LsSscSolution<T: Real> {
    /// N x N coefficient matrix with a zero diagonal.
    pub coefficients: Mat<T>,
    pub columns: Vec<ColumnSolution<T>>,
    /// Sum of the per-column objectives.
    pub objective: T,
}

pub fn solve_lsssc<T: Real>(
    data: &DataMatrix<T>,
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<LsSscSolution<T>> {
    let total = data.num_points();
    if total < 2 {
        return Err(Error::InvalidParameter(
            "self-representation needs at least two columns".into(),
        ));
    }
    let solved: Vec<ColumnSolution<T>> = (0..total)
        .into_par_iter()
        .map(|i| {
            let a = data.leave_one_out(i);
            let x = Col::from(data.values.column(i));
            solve_column(&x, &a, lambda, opts).map_err(|e| Error::Column {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut coefficients = Mat::<T>::zeros(total, total);
    let mut objective = T::zero();
    for (i, sol) in solved.iter().enumerate() {
        for (k, &value) in sol.coefficients.iter().enumerate() {
            let j = if k < i { k } else { k + 1 };
            coefficients[(j, i)] = value;
        }
        objective += sol.objective;
    }
    Ok(LsSscSolution {
        coefficients,
        columns: solved,
        objective,
    })
}

/// Normalized dual direction v = nu / ||nu||_2 for one column solve.
pub fn dual_direction<T: Real>(
    x: &Col<T>,
    dictionary: &Mat<T>,
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<(Col<T>, ColumnSolution<T>)> {
    let sol = solve_column(x, dictionary, lambda, opts)?;
    let norm = sol.dual.norm();
    let floor = real::<T>(tol::NU_ZERO_TOL) * lambda * T::one().max(x.norm());
    if sol.degenerate_dual || norm <= floor {
        return Err(Error::DegenerateDual);
    }
    Ok((&sol.dual / norm, sol))
}

/// Solution of min ||c||_1 s.t. B c = y with its minimal-norm dual optimum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiselessSolution<T: Real> {
    pub coefficients: Col<T>,
    /// Minimal-norm maximizer of <y, nu> over ||B^T nu||_inf <= 1; lies in
    /// the span of B's columns.
    pub dual: Col<T>,
    pub objective: T,
}

/// Equality-constrained l1 minimization by ADMM over the affine set
/// {c : B c = y}, projecting with the pseudo-inverse. Errors with
/// `Infeasible` when y is outside the span of B.
pub fn solve_noiseless_l1<T: Real>(y: &Col<T>, b: &Mat<T>) -> Result<NoiselessSolution<T>> {
    let n = b.nrows();
    let k = b.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has length {} but B has {n} rows",
            y.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("dictionary has no columns".into()));
    }
    check_finite(y.iter().copied(), "target")?;
    check_finite(b.iter().copied(), "dictionary")?;

    if y.amax() == T::zero() {
        return Ok(NoiselessSolution {
            coefficients: Col::zeros(k),
            dual: Col::zeros(n),
            objective: T::zero(),
        });
    }

    let svd = b.clone().svd(true, true);
    let u_full = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let sigma_max = svd.singular_values.max();
    let cutoff = real::<T>(tol::RANK_REL_TOL) * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank == 0 {
        return Err(Error::InvalidParameter(
            "dictionary is numerically zero".into(),
        ));
    }

    // Feasibility: y must lie in the span of the first `rank` left vectors.
    let u_r = u_full.columns(0, rank);
    let proj = &u_r * (u_r.transpose() * y);
    let span_residual = (y - &proj).norm();
    if span_residual > real::<T>(tol::SPAN_TOL) * T::one().max(y.norm()) {
        return Err(Error::Infeasible {
            residual: to_f64(span_residual),
        });
    }

    // B^+ = V_r diag(1/sigma) U_r^T (k x n).
    let v_r = v_t.rows(0, rank).transpose();
    let mut scaled = v_r.clone();
    for s in 0..rank {
        let inv = T::one() / svd.singular_values[s];
        scaled.column_mut(s).scale_mut(inv);
    }
    let pinv = &scaled * u_r.transpose();
    let pinv_y = &pinv * y;

    let rho = real::<T>(tol::ADMM_RHO);
    let shrink = T::one() / rho;
    let stop = real::<T>(tol::NOISELESS_STOP_TOL);
    let mut z = Col::<T>::zeros(k);
    let mut u = Col::<T>::zeros(k);
    let mut converged = false;
    let mut iterations = 0;
    let mut primal = T::zero();
    let mut dual = T::zero();

    for it in 1..=tol::ADMM_MAX_ITERATIONS {
        iterations = it;
        // Projection of z - u onto {c : B c = y}.
        let w = &z - &u;
        let c = &w - &pinv * (b * &w) + &pinv_y;

        let mut primal_sq = T::zero();
        let mut dual_sq = T::zero();
        for j in 0..k {
            let zj = soft(c[j] + u[j], shrink);
            let dz = zj - z[j];
            dual_sq += dz * dz;
            z[j] = zj;
            let rj = c[j] - zj;
            primal_sq += rj * rj;
            u[j] += rj;
        }
        primal = primal_sq.sqrt();
        dual = rho * dual_sq.sqrt();
        if primal <= stop && dual <= stop {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            primal: to_f64(primal),
            dual: to_f64(dual),
        });
    }

    // rho u converges to a subgradient of ||.||_1 at z that lies in the row
    // space of B; the minimal-norm dual solves B^T nu = rho u, i.e.
    // nu = (B^T)^+ (rho u) = (B^+)^T (rho u), automatically in span(B).
    let g = &u * rho;
    let nu = pinv.transpose() * &g;
    let objective = z.iter().fold(T::zero(), |s, &v| s + v.abs());

    let feas = (b * &z - y).norm();
    let gap = (objective - y.dot(&nu)).abs();
    let dual_feas = (b.transpose() * &nu).amax();
    let feas_tol = real::<T>(tol::FEAS_TOL) * T::one().max(y.norm());
    let dual_tol = real::<T>(tol::DUAL_TOL);
    if feas > feas_tol
        || gap > dual_tol * T::one().max(objective)
        || dual_feas > T::one() + dual_tol
    {
        return Err(Error::NonConvergence {
            iterations,
            primal: to_f64(feas),
            dual: to_f64(gap),
        });
    }

    Ok(NoiselessSolution {
        coefficients: z,
        dual: nu,
        objective,
    })
}
