//! Closed-form success criteria and mechanical certificate checks.
//!
//! The functions here evaluate the inequalities that govern when the
//! per-column solves separate subspaces: the deterministic noise-tolerance
//! criterion with its lambda window, the per-subspace intermediate detection
//! and nontriviality thresholds, the random-model and missing-data variants
//! with their explicit constants, and the dual-norm bounds. Each returns a
//! `CriterionReport` echoing its inputs so sweeps can serialize the full
//! decision trail. `check_optimality_certificate`, `check_subspace_detection`
//! and `check_nontrivial` verify solver output directly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{IncoherenceSummary, RSummary};
use crate::types::GeometrySummary;
use crate::{real, tol, Col, Mat, Real};

/// Constant in the random-model dimension condition.
pub const C1: f64 = 1.0 / 48.0;
/// Constant in the random-model noise condition: 1/(10 sqrt(2)).
pub const C2: f64 = 0.07071067811865475;
/// Constant in the missing-entry cap: C2^2 / 4 = 1/800.
pub const C3: f64 = 1.0 / 800.0;

/// Default separation constant c(kappa); configurable because the underlying
/// estimate only pins it down asymptotically.
pub fn default_c_kappa<T: Real>(_kappa: T) -> T {
    real(1.0 / 8.0f64.sqrt())
}

/// One evaluated inequality instance, with inputs echoed for serialization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionReport<T: Real> {
    pub name: String,
    /// The statement's preconditions hold, so the verdict is meaningful.
    pub hypotheses_hold: bool,
    pub inputs: BTreeMap<String, T>,
    pub lambda_interval: Option<(T, T)>,
    pub bound: Option<T>,
    pub probability: Option<T>,
    pub per_subspace: Vec<SubspaceCriterion<T>>,
    pub verdict: bool,
    /// Signed slack of the binding inequality; positive iff verdict.
    pub margin: T,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubspaceCriterion<T: Real> {
    pub label: usize,
    pub verdict: bool,
    pub margin: T,
    /// The hypothesis degenerates (e.g. mu + delta = 0) and the condition
    /// holds for every lambda.
    pub vacuous: bool,
    pub details: BTreeMap<String, T>,
}

fn map_of<T: Real>(entries: &[(&str, T)]) -> BTreeMap<String, T> {
    entries.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Noise tolerance delta < (r - mu)/5 with the lambda window
/// (5/(2r + 3mu), 15/(2r + 8mu)).
pub fn deterministic_criterion<T: Real>(r: T, mu: T, delta: T) -> CriterionReport<T> {
    let five = real::<T>(5.0);
    let hypotheses_hold = r.is_finite()
        && mu.is_finite()
        && delta.is_finite()
        && r > T::zero()
        && mu >= T::zero()
        && delta >= T::zero();
    let margin = (r - mu) / five - delta;
    let verdict = hypotheses_hold && margin > T::zero();
    let lambda_interval = if hypotheses_hold {
        let lo = five / (real::<T>(2.0) * r + real::<T>(3.0) * mu);
        let hi = real::<T>(15.0) / (real::<T>(2.0) * r + real::<T>(8.0) * mu);
        Some((lo, hi))
    } else {
        None
    };
    CriterionReport {
        name: "deterministic".into(),
        hypotheses_hold,
        inputs: map_of(&[("r", r), ("mu", mu), ("delta", delta)]),
        lambda_interval,
        bound: Some((r - mu) / five),
        probability: None,
        per_subspace: Vec::new(),
        verdict,
        margin,
    }
}

/// Per-subspace detection condition 2*lambda*delta < (r_l - mu_l - 2delta)
/// / (mu_l + delta). Vacuous (true for every lambda) when mu_l + delta = 0
/// and the subspace is nondegenerate.
pub fn intermediate_detection_criterion<T: Real>(
    r_per_subspace: &[T],
    mu_per_subspace: &[T],
    delta: T,
    lambda: T,
) -> Result<CriterionReport<T>> {
    if r_per_subspace.len() != mu_per_subspace.len() {
        return Err(Error::LabelMismatch(format!(
            "{} inradii but {} incoherences",
            r_per_subspace.len(),
            mu_per_subspace.len()
        )));
    }
    if !delta.is_finite() || delta < T::zero() || !lambda.is_finite() || lambda <= T::zero() {
        return Err(Error::InvalidParameter(
            "delta must be nonnegative and lambda positive".into(),
        ));
    }
    let two = real::<T>(2.0);
    let lhs = two * lambda * delta;
    let mut per_subspace = Vec::with_capacity(r_per_subspace.len());
    let mut verdict = true;
    let mut margin = T::max_value().unwrap_or_else(T::one);
    for (l, (&r, &mu)) in r_per_subspace.iter().zip(mu_per_subspace).enumerate() {
        let denom = mu + delta;
        let (v, m, vacuous, rhs) = if denom == T::zero() {
            (r > T::zero(), r, true, T::zero())
        } else {
            let rhs = (r - mu - two * delta) / denom;
            (lhs < rhs, rhs - lhs, false, rhs)
        };
        verdict &= v;
        margin = margin.min(m);
        per_subspace.push(SubspaceCriterion {
            label: l,
            verdict: v,
            margin: m,
            vacuous,
            details: map_of(&[("r", r), ("mu", mu), ("lhs", lhs), ("rhs", rhs)]),
        });
    }
    Ok(CriterionReport {
        name: "intermediate_detection".into(),
        hypotheses_hold: true,
        inputs: map_of(&[("delta", delta), ("lambda", lambda)]),
        lambda_interval: None,
        bound: None,
        probability: None,
        per_subspace,
        verdict,
        margin,
    })
}

/// Smallest lambda guaranteeing nonzero columns for a subspace:
/// 1/(r_l - 2delta - delta^2). `None` when the denominator is nonpositive
/// (the bound is inapplicable).
pub fn nontriviality_lambda_lower<T: Real>(r_l: T, delta: T) -> Option<T> {
    let denom = r_l - real::<T>(2.0) * delta - delta * delta;
    if denom > T::zero() {
        Some(T::one() / denom)
    } else {
        None
    }
}

fn ln<T: Real>(x: T) -> T {
    x.ln()
}

fn validate_model<T: Real>(
    n: usize,
    total_points: usize,
    dims: &[usize],
    kappas: &[T],
) -> Result<()> {
    if dims.len() != kappas.len() || dims.is_empty() {
        return Err(Error::LabelMismatch(format!(
            "{} dims but {} kappas",
            dims.len(),
            kappas.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter(
            "ambient dimension must be positive".into(),
        ));
    }
    if total_points < 2 {
        return Err(Error::InvalidParameter(
            "need at least two points for the log N factors".into(),
        ));
    }
    for (l, &kappa) in kappas.iter().enumerate() {
        if !kappa.is_finite() || kappa <= T::one() {
            return Err(Error::InvalidParameter(format!(
                "subspace {l}: kappa must exceed 1, got {kappa:?}"
            )));
        }
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParameter(
            "subspace dimensions must be positive".into(),
        ));
    }
    Ok(())
}

/// Success-probability lower bound shared by the random-model criteria:
/// 1 - 2/N - sum_l N_l exp(-sqrt(kappa_l) d_l), minus the missing-entry
/// term when caps are supplied.
fn model_probability<T: Real>(
    total_points: usize,
    dims: &[usize],
    kappas: &[T],
    m_caps: Option<&[T]>,
) -> T {
    let n_t = real::<T>(total_points as f64);
    let mut p = T::one() - real::<T>(2.0) / n_t;
    for (l, (&d, &kappa)) in dims.iter().zip(kappas).enumerate() {
        let n_l = (kappa * real::<T>(d as f64)).round();
        p -= n_l * (-kappa.sqrt() * real::<T>(d as f64)).exp();
        if let Some(caps) = m_caps {
            p -= real::<T>(2.0) * n_l * (-caps[l] / real::<T>(16.0)).exp();
        }
    }
    p
}

/// Random-model criteria: the per-subspace dimension and noise conditions,
/// the lambda window sqrt(n/(6 log N)) * (5/7, 10/3), and the probability
/// expression. `c_kappa` is the separation constant (see `default_c_kappa`).
pub fn random_model_criteria<T: Real>(
    n: usize,
    total_points: usize,
    dims: &[usize],
    kappas: &[T],
    delta: T,
    c_kappa: impl Fn(T) -> T,
) -> Result<CriterionReport<T>> {
    validate_model(n, total_points, dims, kappas)?;
    if !delta.is_finite() || delta < T::zero() {
        return Err(Error::InvalidParameter("delta must be nonnegative".into()));
    }
    let n_f = real::<T>(n as f64);
    let log_total = ln(real::<T>(total_points as f64));

    let mut per_subspace = Vec::with_capacity(dims.len());
    let mut verdict = true;
    let mut margin = T::max_value().unwrap_or_else(T::one);
    for (l, (&d, &kappa)) in dims.iter().zip(kappas).enumerate() {
        let c = c_kappa(kappa);
        let d_f = real::<T>(d as f64);
        let d_cap = real::<T>(C1) * c * c * ln(kappa) / log_total * n_f;
        let d_margin = d_cap - d_f;
        let delta_cap = real::<T>(C2) * c * (ln(kappa) / d_f).sqrt();
        let delta_margin = delta_cap - delta;
        let v = d_f < d_cap && delta < delta_cap;
        let m = d_margin.min(delta_margin);
        verdict &= v;
        margin = margin.min(m);
        per_subspace.push(SubspaceCriterion {
            label: l,
            verdict: v,
            margin: m,
            vacuous: false,
            details: map_of(&[
                ("d", d_f),
                ("kappa", kappa),
                ("d_cap", d_cap),
                ("delta_cap", delta_cap),
            ]),
        });
    }

    let base = (n_f / (real::<T>(6.0) * log_total)).sqrt();
    let interval = (real::<T>(5.0 / 7.0) * base, real::<T>(10.0 / 3.0) * base);
    let probability = model_probability(total_points, dims, kappas, None);
    Ok(CriterionReport {
        name: "random_model".into(),
        hypotheses_hold: verdict,
        inputs: map_of(&[
            ("n", n_f),
            ("N", real(total_points as f64)),
            ("delta", delta),
        ]),
        lambda_interval: Some(interval),
        bound: None,
        probability: Some(probability),
        per_subspace,
        verdict,
        margin,
    })
}

/// Missing-data criteria: per-subspace caps M_l = C3 c(kappa)^2 log(kappa)
/// n / d_l on the number of unobserved entries per column, the shared
/// dimension condition, and the augmented probability expression.
pub fn missing_data_criteria<T: Real>(
    n: usize,
    total_points: usize,
    dims: &[usize],
    kappas: &[T],
    c_kappa: impl Fn(T) -> T,
) -> Result<CriterionReport<T>> {
    validate_model(n, total_points, dims, kappas)?;
    let n_f = real::<T>(n as f64);
    let log_total = ln(real::<T>(total_points as f64));

    let mut per_subspace = Vec::with_capacity(dims.len());
    let mut caps = Vec::with_capacity(dims.len());
    let mut verdict = true;
    let mut margin = T::max_value().unwrap_or_else(T::one);
    let mut min_cap = T::max_value().unwrap_or_else(T::one);
    for (l, (&d, &kappa)) in dims.iter().zip(kappas).enumerate() {
        let c = c_kappa(kappa);
        let d_f = real::<T>(d as f64);
        let m_cap = real::<T>(C3) * c * c * ln(kappa) * n_f / d_f;
        let m_floor = m_cap.floor();
        let d_cap = real::<T>(C1) * c * c * ln(kappa) / log_total * n_f;
        let v = d_f < d_cap;
        verdict &= v;
        margin = margin.min(d_cap - d_f);
        min_cap = min_cap.min(m_cap);
        caps.push(m_cap);
        per_subspace.push(SubspaceCriterion {
            label: l,
            verdict: v,
            margin: d_cap - d_f,
            vacuous: false,
            details: map_of(&[
                ("d", d_f),
                ("kappa", kappa),
                ("d_cap", d_cap),
                ("m_cap", m_cap),
                ("m_floor", m_floor),
            ]),
        });
    }
    let probability = model_probability(total_points, dims, kappas, Some(&caps));
    Ok(CriterionReport {
        name: "missing_data".into(),
        hypotheses_hold: verdict,
        inputs: map_of(&[("n", n_f), ("N", real(total_points as f64))]),
        lambda_interval: None,
        bound: Some(min_cap),
        probability: Some(probability),
        per_subspace,
        verdict,
        margin,
    })
}

/// Closed-form bounds on the dual norm and its in-subspace/orthogonal parts.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NuNormBounds<T: Real> {
    /// Bound on the in-carrier component ||nu_1||.
    pub nu1: T,
    /// Bound on the orthogonal component ||nu_2||.
    pub nu2: T,
    /// Bound on the full ||nu||.
    pub nu: T,
}

/// `None` when delta >= r (the bounds are inapplicable). Accepts delta = 0,
/// where the bounds collapse to 1/r.
pub fn nu_norm_diagnostics<T: Real>(r: T, delta: T, lambda: T) -> Option<NuNormBounds<T>> {
    if !(r > T::zero()) || !(delta >= T::zero()) || delta >= r || !(lambda > T::zero()) {
        return None;
    }
    let nu2 = lambda * delta / r + lambda * delta;
    let nu1 = (T::one() + delta * nu2) / (r - delta);
    let nu = (T::one() + lambda * delta * (T::one() + r)) / (r - delta);
    Some(NuNormBounds { nu1, nu2, nu })
}

/// Outcome of the four-part optimality check for one column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateCheck<T: Real> {
    /// (1) ||A_S^T nu - sign(c_S)||_inf within DUAL_TOL.
    pub sign_condition: bool,
    /// (2) nu agrees with lambda * e.
    pub residual_condition: bool,
    /// (3) |<a_j, nu>| <= 1 + DUAL_TOL on the same-subspace complement of S.
    pub same_subspace_condition: bool,
    /// (4) |<a_j, nu>| < 1 - DUAL_TOL strictly outside the subspace.
    pub foreign_condition: bool,
    /// 1 - max foreign |<a_j, nu>|; positive means strict feasibility.
    pub foreign_margin: T,
    /// The foreign margin sits within DUAL_TOL of zero either way.
    pub near_boundary: bool,
    pub sign_residual: T,
    pub residual_mismatch: T,
    pub same_subspace_max: T,
}

impl<T: Real> CertificateCheck<T> {
    pub fn passed(&self) -> bool {
        self.sign_condition
            && self.residual_condition
            && self.same_subspace_condition
            && self.foreign_condition
    }
}

/// Verifies that (c, e, nu) certify optimality with support confined to the
/// index set `same_subspace`: sign agreement on the support, nu = lambda e,
/// dual feasibility inside the subspace, and strict infeasibility outside.
#[allow(clippy::too_many_arguments)]
pub fn check_optimality_certificate<T: Real>(
    dictionary: &Mat<T>,
    x: &Col<T>,
    lambda: T,
    c: &Col<T>,
    e: &Col<T>,
    nu: &Col<T>,
    support: &[usize],
    same_subspace: &[usize],
) -> Result<CertificateCheck<T>> {
    let m = dictionary.ncols();
    if x.len() != dictionary.nrows() || c.len() != m || e.len() != x.len() || nu.len() != x.len() {
        return Err(Error::DimensionMismatch(
            "certificate pieces disagree in shape".into(),
        ));
    }
    let mut in_t = vec![false; m];
    for &j in same_subspace {
        if j >= m {
            return Err(Error::InvalidParameter(format!("index {j} out of range")));
        }
        in_t[j] = true;
    }
    for &j in support {
        if j >= m || !in_t[j] {
            return Err(Error::InvalidParameter(format!(
                "support index {j} is not inside the same-subspace set"
            )));
        }
    }
    let residual = (x - dictionary * c - e).norm();
    if residual > real::<T>(tol::FEAS_TOL) * (T::one() + x.norm()) {
        return Err(Error::InvalidParameter(format!(
            "e does not equal x - A c (residual {residual:?})"
        )));
    }

    let dual_tol = real::<T>(tol::DUAL_TOL);
    let grad = dictionary.transpose() * nu;

    let mut sign_residual = T::zero();
    for &j in support {
        let target = if c[j] >= T::zero() {
            T::one()
        } else {
            -T::one()
        };
        sign_residual = sign_residual.max((grad[j] - target).abs());
    }
    let residual_mismatch = (nu - e * lambda).norm();
    let mut in_s = vec![false; m];
    for &j in support {
        in_s[j] = true;
    }
    let mut same_subspace_max = T::zero();
    for &j in same_subspace {
        if !in_s[j] {
            same_subspace_max = same_subspace_max.max(grad[j].abs());
        }
    }
    let mut foreign_max = T::zero();
    for j in 0..m {
        if !in_t[j] {
            foreign_max = foreign_max.max(grad[j].abs());
        }
    }
    let foreign_margin = T::one() - foreign_max;

    Ok(CertificateCheck {
        sign_condition: sign_residual <= dual_tol,
        residual_condition: residual_mismatch <= real::<T>(tol::FEAS_TOL) * (T::one() + nu.norm()),
        same_subspace_condition: same_subspace_max <= T::one() + dual_tol,
        foreign_condition: foreign_margin >= dual_tol,
        foreign_margin,
        near_boundary: foreign_margin.abs() < dual_tol,
        sign_residual,
        residual_mismatch,
        same_subspace_max,
    })
}

/// Detection property: no coefficient links points with different labels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectionReport<T: Real> {
    pub holds: bool,
    /// Entries (column i, row j, value) with |C_ji| above the threshold and
    /// labels[i] != labels[j].
    pub false_positives: Vec<(usize, usize, T)>,
}

/// `coefficients` must have a zero diagonal (as produced by the full solve).
pub fn check_subspace_detection<T: Real>(
    coefficients: &Mat<T>,
    labels: &[usize],
    threshold: T,
) -> Result<DetectionReport<T>> {
    let n = coefficients.ncols();
    if coefficients.nrows() != n || labels.len() != n {
        return Err(Error::LabelMismatch(format!(
            "{}x{} coefficients with {} labels",
            coefficients.nrows(),
            n,
            labels.len()
        )));
    }
    let mut false_positives = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if labels[i] != labels[j] && coefficients[(j, i)].abs() > threshold {
                false_positives.push((i, j, coefficients[(j, i)]));
            }
        }
    }
    Ok(DetectionReport {
        holds: false_positives.is_empty(),
        false_positives,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NontrivialityReport {
    pub holds: bool,
    pub zero_columns: Vec<usize>,
}

/// True when every column of the coefficient matrix has an entry above the
/// threshold. Zero columns mean the solve collapsed for those points.
pub fn check_nontrivial<T: Real>(coefficients: &Mat<T>, threshold: T) -> NontrivialityReport {
    let zero_columns: Vec<usize> = (0..coefficients.ncols())
        .filter(|&i| coefficients.column(i).amax() <= threshold)
        .collect();
    NontrivialityReport {
        holds: zero_columns.is_empty(),
        zero_columns,
    }
}

/// Bundles measured inradii and incoherences with the deterministic
/// criterion's verdict and lambda window.
pub fn geometry_summary<T: Real>(
    radii: &RSummary<T>,
    incoherence: &IncoherenceSummary<T>,
    delta: T,
) -> GeometrySummary<T> {
    let report = deterministic_criterion(radii.r, incoherence.mu, delta);
    let (lo, hi) = report.lambda_interval.unwrap_or((T::zero(), T::zero()));
    GeometrySummary {
        r_per_subspace: radii.per_subspace.clone(),
        r: radii.r,
        mu_per_subspace: incoherence.per_subspace.clone(),
        mu: incoherence.mu,
        delta,
        lambda_lower: lo,
        lambda_upper: hi,
        criterion_holds: report.verdict,
    }
}
