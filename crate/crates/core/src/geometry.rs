//! Convex-geometry diagnostics: restricted inradii of symmetrized hulls,
//! incoherence between dual directions and foreign points, and the
//! polar-duality identity used to cross-check the two.
//!
//! For a symmetric polytope P = conv(±p_1, ..., ±p_k) inside a carrier
//! subspace S, the restricted inradius is
//!
//! ```text
//!     r_S(P) = min_{u in S, ||u|| = 1} max_i |<p_i, u>|
//! ```
//!
//! and equals 1 / R_S(P° ∩ S), the reciprocal circumradius of the polar.
//! Exact values (carrier dimension <= 4) come from enumerating polar
//! vertices; higher dimensions fall back to a randomized descent that
//! reports an upper bound together with a certified lower bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{dual_direction, SolverOptions};
use crate::types::{DataMatrix, SubspaceEnsemble};
use crate::{real, tol, Col, Mat, Real};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Symmetrized convex hull conv(±p_1, ..., ±p_k) of the generator columns,
/// optionally restricted to a carrier subspace given by an orthonormal basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetricPolytope<T: Real> {
    /// One generator per column, in ambient coordinates.
    pub generators: Mat<T>,
    /// Orthonormal basis of the carrier subspace; `None` means the span of
    /// the generators themselves.
    pub carrier: Option<Mat<T>>,
}

impl<T: Real> SymmetricPolytope<T> {
    pub fn new(generators: Mat<T>, carrier: Option<Mat<T>>) -> Result<Self> {
        if generators.ncols() == 0 {
            return Err(Error::InvalidParameter("polytope has no generators".into()));
        }
        if generators.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("polytope generators".into()));
        }
        if let Some(basis) = &carrier {
            if basis.nrows() != generators.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "carrier lives in dimension {} but generators in {}",
                    basis.nrows(),
                    generators.nrows()
                )));
            }
            let gram = basis.transpose() * basis;
            if (gram - Mat::<T>::identity(basis.ncols(), basis.ncols())).amax()
                > real(tol::ORTHO_TOL)
            {
                return Err(Error::InvalidParameter(
                    "carrier basis is not orthonormal".into(),
                ));
            }
            // Every generator must lie in the carrier.
            let proj = basis * (basis.transpose() * &generators);
            let off = (&generators - proj).amax();
            if off > real(tol::SPAN_TOL) {
                return Err(Error::Geometry(format!(
                    "generator leaves the carrier subspace by {off:?}"
                )));
            }
        }
        Ok(Self {
            generators,
            carrier,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InradiusMode {
    /// Polar vertex enumeration; carrier dimension must be <= 4.
    Exact,
    /// Subgradient descent of u -> max_i |<p_i, u>| from seeded random
    /// starts. Returns an upper bound on the inradius.
    Randomized { seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InradiusResult<T: Real> {
    /// The inradius (exact mode) or an upper bound on it (randomized mode).
    pub value: T,
    /// Certified lower bound: equals `value` in exact mode; in randomized
    /// mode it is sigma_min(Q)/sqrt(k) for the reduced generator matrix Q.
    pub lower_bound: T,
    /// value - lower_bound.
    pub gap: T,
    /// Generators fail to span the carrier; the restricted inradius is 0.
    pub degenerate: bool,
    pub exact: bool,
    /// Randomized mode only: the gap exceeds 5% of the value.
    pub large_gap: bool,
}

impl<T: Real> InradiusResult<T> {
    fn degenerate() -> Self {
        Self {
            value: T::zero(),
            lower_bound: T::zero(),
            gap: T::zero(),
            degenerate: true,
            exact: true,
            large_gap: false,
        }
    }
}

/// Orthonormal basis of the column span, with the numerical rank.
fn span_basis<T: Real>(m: &Mat<T>) -> (Mat<T>, usize) {
    let svd = m.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd with u");
    let smax = svd.singular_values.max();
    let cutoff = real::<T>(tol::RANK_REL_TOL) * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    (u.columns(0, rank).into_owned(), rank)
}

fn numerical_rank<T: Real>(m: &Mat<T>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == T::zero() {
        return 0;
    }
    let cutoff = real::<T>(tol::RANK_REL_TOL) * smax;
    svd.singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Visits all `choose(k, d)` index subsets in lexicographic order.
fn for_each_subset(k: usize, d: usize, mut f: impl FnMut(&[usize])) {
    if d == 0 || d > k {
        return;
    }
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        f(&idx);
        // Advance the rightmost index that can still move.
        let mut t = d;
        while t > 0 && idx[t - 1] == k - d + t - 1 {
            t -= 1;
        }
        if t == 0 {
            return;
        }
        idx[t - 1] += 1;
        for j in t..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Circumradius of the polar {v : |<q_i, v>| <= 1} of the reduced polytope,
/// by enumerating its vertices. Requires q to have full row rank (else the
/// polar is unbounded). q is dim x k with dim <= 4.
fn polar_circumradius<T: Real>(q: &Mat<T>) -> Result<T> {
    let dim = q.nrows();
    let k = q.ncols();
    let mut best: Option<T> = None;
    let feas = T::one() + real::<T>(tol::VERTEX_FEAS_TOL);

    for_each_subset(k, dim, |idx| {
        // Rows of m are the chosen generators; a vertex solves m v = s for
        // a sign pattern s. Symmetry lets us pin the first sign to +1.
        let mut m = Mat::<T>::zeros(dim, dim);
        for (row, &i) in idx.iter().enumerate() {
            for a in 0..dim {
                m[(row, a)] = q[(a, i)];
            }
        }
        let lu = nalgebra::linalg::LU::new(m.clone());
        for mask in 0..(1usize << (dim - 1)) {
            let s = Col::<T>::from_fn(dim, |j, _| {
                if j > 0 && (mask >> (j - 1)) & 1 == 1 {
                    -T::one()
                } else {
                    T::one()
                }
            });
            let Some(v) = lu.solve(&s) else { continue };
            let residual = (&m * &v - &s).amax();
            if residual > real::<T>(tol::VERTEX_SOLVE_TOL) * T::one().max(v.amax()) {
                continue;
            }
            let worst = (q.transpose() * &v).amax();
            if worst <= feas {
                let norm = v.norm();
                if best.map_or(true, |b| norm > b) {
                    best = Some(norm);
                }
            }
        }
    });

    best.ok_or_else(|| Error::Geometry("polar vertex enumeration found no vertex".into()))
}

/// Inradius of the reduced polytope by enumerating its facets directly:
/// candidate facet hyperplanes pass through dim signed generators, with
/// normals built from cofactor expansion rather than a linear solve. Kept
/// deliberately independent of `polar_circumradius` so the duality identity
/// is a real cross-check of two code paths.
fn primal_facet_inradius<T: Real>(q: &Mat<T>) -> Result<T> {
    let dim = q.nrows();
    let k = q.ncols();
    if dim == 1 {
        // Facets of a segment are its endpoints.
        let mut best = T::zero();
        for i in 0..k {
            best = best.max(q[(0, i)].abs());
        }
        return if best > T::zero() {
            Ok(best)
        } else {
            Err(Error::Geometry("all generators are zero".into()))
        };
    }

    let mut best: Option<T> = None;
    for_each_subset(k, dim, |idx| {
        for mask in 0..(1usize << (dim - 1)) {
            let sign = |j: usize| -> T {
                if j > 0 && (mask >> (j - 1)) & 1 == 1 {
                    -T::one()
                } else {
                    T::one()
                }
            };
            let p0 = q.column(idx[0]).into_owned() * sign(0);
            // Columns of w span the facet's direction space.
            let mut w = Mat::<T>::zeros(dim, dim - 1);
            for j in 1..dim {
                let pj = q.column(idx[j]).into_owned() * sign(j);
                w.set_column(j - 1, &(pj - &p0));
            }
            let normal = generalized_cross(&w);
            let norm = normal.norm();
            let scale = w.amax().max(p0.amax()).max(T::one());
            if norm <= real::<T>(tol::VERTEX_SOLVE_TOL) * scale {
                continue; // degenerate point set
            }
            let unit = normal / norm;
            let h = p0.dot(&unit).abs();
            if h <= real::<T>(tol::VERTEX_SOLVE_TOL) {
                continue; // hyperplane through the origin cannot be a facet
            }
            // Supporting check: no generator may lie strictly beyond.
            let reach = (q.transpose() * &unit).amax();
            if reach <= h * (T::one() + real::<T>(tol::VERTEX_FEAS_TOL)) {
                if best.map_or(true, |b| h < b) {
                    best = Some(h);
                }
            }
        }
    });
    best.ok_or_else(|| Error::Geometry("facet enumeration found no facet".into()))
}

/// Vector orthogonal to the dim-1 columns of w in R^dim (cofactor expansion
/// of the determinant along an appended coordinate column).
fn generalized_cross<T: Real>(w: &Mat<T>) -> Col<T> {
    let dim = w.nrows();
    let mut n = Col::<T>::zeros(dim);
    for i in 0..dim {
        let minor = w.clone().remove_row(i);
        let det = minor.determinant();
        n[i] = if i % 2 == 0 { det } else { -det };
    }
    n
}

fn randomized_min_max<T: Real>(q: &Mat<T>, seed: u64) -> T {
    let dim = q.nrows();
    let k = q.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let restarts = tol::RANDOMIZED_RESTARTS_PER_DIM * dim;
    let mut best = T::max_value().unwrap_or_else(T::one);

    let eval = |u: &Col<T>| -> (T, usize, T) {
        let d = q.transpose() * u;
        let mut worst = T::zero();
        let mut arg = 0;
        let mut sgn = T::one();
        for j in 0..k {
            let a = d[j].abs();
            if a > worst {
                worst = a;
                arg = j;
                sgn = if d[j] >= T::zero() {
                    T::one()
                } else {
                    -T::one()
                };
            }
        }
        (worst, arg, sgn)
    };

    for _ in 0..restarts {
        let mut u = Col::<T>::from_fn(dim, |_, _| {
            real(<StandardNormal as Distribution<f64>>::sample(
                &StandardNormal,
                &mut rng,
            ))
        });
        let norm = u.norm();
        if norm == T::zero() {
            continue;
        }
        u /= norm;
        for step in 1..=tol::RANDOMIZED_STEPS {
            let (h, j, s) = eval(&u);
            if h < best {
                best = h;
            }
            // Subgradient of the active term, projected onto the tangent
            // space of the sphere; unit step length 1/step.
            let g = q.column(j).into_owned() * s;
            let mut gt = &g - &u * g.dot(&u);
            let gn = gt.norm();
            if gn <= real(tol::NU_ZERO_TOL) {
                break;
            }
            gt /= gn;
            u -= gt * real::<T>(1.0 / step as f64);
            let un = u.norm();
            if un == T::zero() {
                break;
            }
            u /= un;
        }
        let (h, _, _) = eval(&u);
        if h < best {
            best = h;
        }
    }
    best
}

/// Largest disk within the carrier inscribed in the symmetrized hull.
pub fn restricted_inradius<T: Real>(
    p: &SymmetricPolytope<T>,
    mode: InradiusMode,
) -> Result<InradiusResult<T>> {
    let k = p.generators.ncols();
    if k == 0 {
        return Err(Error::InvalidParameter("polytope has no generators".into()));
    }
    let basis = match &p.carrier {
        Some(b) => b.clone(),
        None => span_basis(&p.generators).0,
    };
    let dim = basis.ncols();
    if dim == 0 {
        // All generators are numerically zero.
        return Ok(InradiusResult::degenerate());
    }
    let q = basis.transpose() * &p.generators;
    if numerical_rank(&q) < dim {
        return Ok(InradiusResult::degenerate());
    }

    match mode {
        InradiusMode::Exact => {
            if dim > 4 {
                return Err(Error::Geometry(format!(
                    "exact enumeration handles carrier dimension <= 4, got {dim}; \
                     use the randomized mode"
                )));
            }
            let r = T::one() / polar_circumradius(&q)?;
            Ok(InradiusResult {
                value: r,
                lower_bound: r,
                gap: T::zero(),
                degenerate: false,
                exact: true,
                large_gap: false,
            })
        }
        InradiusMode::Randomized { seed } => {
            let value = randomized_min_max(&q, seed);
            let svd = q.clone().svd(false, false);
            let sigma_min = svd
                .singular_values
                .iter()
                .copied()
                .fold(T::max_value().unwrap_or_else(T::one), T::min);
            let lower = sigma_min / real::<T>(k as f64).sqrt();
            let gap = value - lower;
            Ok(InradiusResult {
                value,
                lower_bound: lower,
                gap,
                degenerate: false,
                exact: false,
                large_gap: gap > real::<T>(0.05) * value,
            })
        }
    }
}

/// |r_S(P) * R_S(P° ∩ S) - 1|, with the two radii computed by independent
/// routes (facet enumeration vs polar vertex enumeration).
pub fn polar_duality_check<T: Real>(p: &SymmetricPolytope<T>) -> Result<T> {
    let basis = match &p.carrier {
        Some(b) => b.clone(),
        None => span_basis(&p.generators).0,
    };
    let dim = basis.ncols();
    if dim == 0 {
        return Err(Error::Geometry("polytope is numerically zero".into()));
    }
    if dim > 4 {
        return Err(Error::Geometry(format!(
            "polar duality check handles carrier dimension <= 4, got {dim}"
        )));
    }
    let q = basis.transpose() * &p.generators;
    if numerical_rank(&q) < dim {
        return Err(Error::Geometry(
            "generators do not span the carrier; the polar is unbounded".into(),
        ));
    }
    let r = primal_facet_inradius(&q)?;
    let big_r = polar_circumradius(&q)?;
    Ok((r * big_r - T::one()).abs())
}

/// Leave-one-out restricted inradii: per-column values, their per-subspace
/// minima r_l, and the overall r = min_l r_l.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RSummary<T: Real> {
    /// r_l for each subspace label.
    pub per_subspace: Vec<T>,
    /// Leave-one-out inradius for each column of Y.
    pub per_column: Vec<T>,
    /// min_l r_l.
    pub r: T,
    /// Columns whose leave-one-out hull failed to span the carrier.
    pub degenerate_columns: Vec<usize>,
}

pub fn compute_r<T: Real>(
    y: &DataMatrix<T>,
    truth: &SubspaceEnsemble<T>,
    mode: InradiusMode,
) -> Result<RSummary<T>> {
    let total = y.num_points();
    if total != truth.labels.len() {
        return Err(Error::LabelMismatch(format!(
            "{} columns but {} labels",
            total,
            truth.labels.len()
        )));
    }
    for (l, (&count, &dim)) in truth.counts.iter().zip(truth.dims.iter()).enumerate() {
        if count < dim + 1 {
            return Err(Error::InvalidParameter(format!(
                "subspace {l} has {count} points; leave-one-out needs at least {}",
                dim + 1
            )));
        }
    }

    let per_column: Vec<(T, bool)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let l = truth.labels[i];
            let members = truth.members(l);
            let mut gens = Mat::<T>::zeros(y.ambient_dim(), members.len() - 1);
            let mut at = 0;
            for &j in &members {
                if j == i {
                    continue;
                }
                gens.set_column(at, &y.values.column(j));
                at += 1;
            }
            let column_mode = match mode {
                InradiusMode::Exact => InradiusMode::Exact,
                InradiusMode::Randomized { seed } => InradiusMode::Randomized {
                    seed: seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                },
            };
            let p = SymmetricPolytope::new(gens, Some(truth.bases[l].clone()))?;
            let res = restricted_inradius(&p, column_mode)?;
            Ok((res.value, res.degenerate))
        })
        .collect::<Result<_>>()?;

    let num_subspaces = truth.dims.len();
    let mut per_subspace = vec![T::max_value().unwrap_or_else(T::one); num_subspaces];
    let mut degenerate_columns = Vec::new();
    for (i, &(value, degenerate)) in per_column.iter().enumerate() {
        let l = truth.labels[i];
        per_subspace[l] = per_subspace[l].min(value);
        if degenerate {
            degenerate_columns.push(i);
        }
    }
    let r = per_subspace
        .iter()
        .copied()
        .fold(T::max_value().unwrap_or_else(T::one), T::min);
    Ok(RSummary {
        per_subspace,
        per_column: per_column.into_iter().map(|(v, _)| v).collect(),
        r,
        degenerate_columns,
    })
}

/// Incoherence of each subspace's dual directions against all foreign clean
/// points, mu_l = max_{i in l} max_{y outside l} |<v_i, y>|, and mu = max_l.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IncoherenceSummary<T: Real> {
    pub per_subspace: Vec<T>,
    pub mu: T,
    /// Normalized dual direction per column; `None` where the dual was
    /// degenerate and the column was skipped.
    pub directions: Vec<Option<Col<T>>>,
    /// ||nu||_2 per column, aligned with `directions`.
    pub nu_norms: Vec<Option<T>>,
    /// Number of columns skipped for a degenerate dual.
    pub skipped: usize,
    /// Only one subspace: mu = 0 by convention and carries no information.
    pub single_subspace: bool,
}

/// Dual directions are solved on the observed data `x` (same-subspace
/// leave-one-out dictionaries); inner products are taken against the clean
/// points `y`.
pub fn compute_incoherence<T: Real>(
    x: &DataMatrix<T>,
    y: &DataMatrix<T>,
    truth: &SubspaceEnsemble<T>,
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<IncoherenceSummary<T>> {
    let total = x.num_points();
    if y.num_points() != total || truth.labels.len() != total {
        return Err(Error::LabelMismatch(
            "observed data, clean data, and labels must agree in length".into(),
        ));
    }
    if x.ambient_dim() != y.ambient_dim() {
        return Err(Error::DimensionMismatch(
            "observed and clean data have different ambient dimensions".into(),
        ));
    }
    let num_subspaces = truth.dims.len();
    if num_subspaces == 1 {
        return Ok(IncoherenceSummary {
            per_subspace: Vec::new(),
            mu: T::zero(),
            directions: vec![None; total],
            nu_norms: vec![None; total],
            skipped: 0,
            single_subspace: true,
        });
    }

    let solved: Vec<Option<(Col<T>, T)>> = (0..total)
        .into_par_iter()
        .map(|i| {
            let l = truth.labels[i];
            let members = truth.members(l);
            if members.len() < 2 {
                return Ok(None); // no same-subspace dictionary to solve against
            }
            let mut dict = Mat::<T>::zeros(x.ambient_dim(), members.len() - 1);
            let mut at = 0;
            for &j in &members {
                if j == i {
                    continue;
                }
                dict.set_column(at, &x.values.column(j));
                at += 1;
            }
            let xi = Col::from(x.values.column(i));
            match dual_direction(&xi, &dict, lambda, opts) {
                Ok((v, sol)) => Ok(Some((v, sol.dual.norm()))),
                Err(Error::DegenerateDual) => Ok(None),
                Err(e) => Err(Error::Column {
                    index: i,
                    source: Box::new(e),
                }),
            }
        })
        .collect::<Result<_>>()?;

    let mut per_subspace = vec![T::zero(); num_subspaces];
    let mut skipped = 0;
    for (i, entry) in solved.iter().enumerate() {
        let l = truth.labels[i];
        match entry {
            None => skipped += 1,
            Some((v, _)) => {
                for j in 0..total {
                    if truth.labels[j] == l {
                        continue;
                    }
                    let dot = v.dot(&Col::from(y.values.column(j))).abs();
                    per_subspace[l] = per_subspace[l].max(dot);
                }
            }
        }
    }
    let mu = per_subspace.iter().copied().fold(T::zero(), T::max);
    let (directions, nu_norms) = solved
        .into_iter()
        .map(|e| match e {
            Some((v, n)) => (Some(v), Some(n)),
            None => (None, None),
        })
        .unzip();
    Ok(IncoherenceSummary {
        per_subspace,
        mu,
        directions,
        nu_norms,
        skipped,
        single_subspace: false,
    })
}

/// Inradius surviving a perturbation of every generator by at most delta:
/// r(T) >= r(Q) - delta. `None` when r(Q) <= delta (bound inapplicable).
pub fn perturbation_inradius_bound<T: Real>(q_inradius: T, delta: T) -> Option<T> {
    if q_inradius <= delta {
        None
    } else {
        Some(q_inradius - delta)
    }
}
