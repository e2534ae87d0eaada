//! End-to-end certificate construction on a toy where every quantity is known
//! in closed form: two orthogonal 1-d subspaces, two antipodal unit points
//! each, lambda = 4.
//!
//! Solving for x = e1 against its own subspace gives c = -3/4 on the single
//! same-subspace column -e1 (stationarity: sign + lambda(1 + c) = 0 on the
//! negative branch), hence e = x - Ac = e1/4 and nu = lambda e = e1. That
//! triple must certify optimality over the full leave-one-out dictionary.

use lsssc::certificates::check_optimality_certificate;
use lsssc::solver::{solve_column, solve_lsssc, SolverOptions};
use lsssc::types::{DataMatrix, Role};
use lsssc::{tol, Col64, Mat64};

const LAMBDA: f64 = 4.0;

/// Columns: [e1, -e1, e2, -e2]; labels [0, 0, 1, 1].
fn toy_data() -> Mat64 {
    Mat64::from_columns(&[
        Col64::from_column_slice(&[1.0, 0.0]),
        Col64::from_column_slice(&[-1.0, 0.0]),
        Col64::from_column_slice(&[0.0, 1.0]),
        Col64::from_column_slice(&[0.0, -1.0]),
    ])
}

#[test]
fn hand_built_certificate_passes_all_four_conditions() {
    let data = toy_data();
    let x = Col64::from(data.column(0));
    // Leave-one-out dictionary for column 0: [-e1, e2, -e2].
    let dictionary = Mat64::from_columns(&[data.column(1), data.column(2), data.column(3)]);
    let c = Col64::from_column_slice(&[-0.75, 0.0, 0.0]);
    let e = Col64::from_column_slice(&[0.25, 0.0]);
    let nu = Col64::from_column_slice(&[1.0, 0.0]);
    let check =
        check_optimality_certificate(&dictionary, &x, LAMBDA, &c, &e, &nu, &[0], &[0]).unwrap();
    assert!(check.passed(), "{check:?}");
    assert!((check.foreign_margin - 1.0).abs() <= tol::DUAL_TOL);
    assert!(!check.near_boundary);
}

#[test]
fn solver_reproduces_the_closed_form_triple() {
    let data = toy_data();
    let x = Col64::from(data.column(0));
    let same_subspace = Mat64::from_columns(&[data.column(1)]);
    let sol = solve_column(&x, &same_subspace, LAMBDA, &SolverOptions::default()).unwrap();
    assert!((sol.coefficients[0] + 0.75).abs() <= 1e-8);
    assert!((sol.residual[0] - 0.25).abs() <= 1e-8);
    assert!((sol.dual[0] - 1.0).abs() <= 1e-8);
    assert_eq!(sol.support, vec![0]);

    // Embed into the full dictionary: the same triple must still certify.
    let dictionary = Mat64::from_columns(&[data.column(1), data.column(2), data.column(3)]);
    let mut c = Col64::zeros(3);
    c[0] = sol.coefficients[0];
    let check = check_optimality_certificate(
        &dictionary,
        &x,
        LAMBDA,
        &c,
        &sol.residual,
        &sol.dual,
        &sol.support,
        &[0],
    )
    .unwrap();
    assert!(check.passed(), "{check:?}");
}

#[test]
fn zero_certificate_is_vacuously_valid() {
    let dictionary = toy_data();
    let zero2 = Col64::zeros(2);
    let zero4 = Col64::zeros(4);
    let check = check_optimality_certificate(
        &dictionary,
        &zero2,
        LAMBDA,
        &zero4,
        &zero2,
        &zero2,
        &[],
        &[0, 1],
    )
    .unwrap();
    assert!(check.passed(), "{check:?}");
}

#[test]
fn inflated_foreign_product_fails_condition_four_with_the_expected_margin() {
    let data = toy_data();
    let x = Col64::from(data.column(0));
    let dictionary = Mat64::from_columns(&[data.column(1), data.column(2), data.column(3)]);
    let c = Col64::from_column_slice(&[-0.75, 0.0, 0.0]);
    let e = Col64::from_column_slice(&[0.25, 0.0]);
    // nu pushed toward the foreign subspace: <e2, nu> = 1.5.
    let nu = Col64::from_column_slice(&[1.0, 1.5]);
    let check =
        check_optimality_certificate(&dictionary, &x, LAMBDA, &c, &e, &nu, &[0], &[0]).unwrap();
    assert!(!check.foreign_condition);
    assert!((check.foreign_margin + 0.5).abs() <= 1e-12);
    assert!(!check.passed());
}

#[test]
fn full_solve_confines_every_support_to_its_own_subspace() {
    let data = toy_data();
    let labels = [0usize, 0, 1, 1];
    let observed = DataMatrix::new(data.clone(), Role::Observed).unwrap();
    let solution = solve_lsssc(&observed, LAMBDA, &SolverOptions::default()).unwrap();

    for i in 0..4 {
        let dictionary = observed.leave_one_out(i);
        let x = Col64::from(data.column(i));
        let same: Vec<usize> = (0..4)
            .filter(|&j| j != i && labels[j] == labels[i])
            .map(|j| if j > i { j - 1 } else { j })
            .collect();
        let column = &solution.columns[i];
        for &j in &column.support {
            assert!(same.contains(&j), "column {i} used a foreign atom {j}");
        }
        let check = check_optimality_certificate(
            &dictionary,
            &x,
            LAMBDA,
            &column.coefficients,
            &column.residual,
            &column.dual,
            &column.support,
            &same,
        )
        .unwrap();
        assert!(check.passed(), "column {i}: {check:?}");
    }
    // Off-diagonal-block entries of C are exactly zero on this toy.
    for i in 0..4 {
        for j in 0..4 {
            if labels[i] != labels[j] {
                assert_eq!(solution.coefficients[(j, i)], 0.0);
            }
        }
    }
}
