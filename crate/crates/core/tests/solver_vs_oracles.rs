//! Cross-checks the ADMM solver against two independent oracles: exhaustive
//! sign-pattern enumeration for the penalized program and a simplex LP for
//! the equality-constrained one. The oracles share no code with the solver.

use lsssc::solver::{solve_column, solve_noiseless_l1, SolverOptions};
use lsssc::{tol, Col64, Mat64};
use lsssc_oracles::{lasso, lp};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Col64, Mat64) {
    let mut a = Mat64::from_fn(n, m, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    // x leans on a couple of columns so nontrivial supports appear.
    let mut x = Col64::zeros(n);
    for _ in 0..2 {
        let j = rng.random_range(0..m);
        let w = rng.random::<f64>() * 2.0 - 1.0;
        x += a.column(j) * w;
    }
    for v in x.iter_mut() {
        *v += 0.05 * (rng.random::<f64>() * 2.0 - 1.0);
    }
    let norm = x.norm();
    if norm > 0.0 {
        x /= norm;
    }
    (x, a)
}

#[test]
fn admm_objective_matches_the_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let opts = SolverOptions::default();
    for k in 0..15 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=7);
        let lambda = [0.5, 2.0, 10.0][k % 3];
        let (x, a) = random_instance(&mut rng, n, m);
        let sol = solve_column(&x, &a, lambda, &opts).unwrap();
        let (_, oracle_obj) = lasso::lasso_minimum(&x, &a, lambda);
        assert!(
            (sol.objective - oracle_obj).abs() <= 1e-8,
            "instance {k}: solver {} vs oracle {oracle_obj}",
            sol.objective
        );

        // KKT residuals of the returned triple.
        let e = &x - &a * &sol.coefficients;
        assert!((&e - &sol.residual).norm() <= tol::FEAS_TOL * (1.0 + x.norm()));
        assert!((&sol.dual - &(e * lambda)).norm() <= tol::FEAS_TOL * lambda);
        let products = a.transpose() * &sol.dual;
        assert!(products.amax() <= 1.0 + tol::DUAL_TOL);
        for &j in &sol.support {
            let s = sol.coefficients[j].signum();
            assert!(
                (products[j] - s).abs() <= tol::DUAL_TOL,
                "instance {k}: support sign mismatch at {j}"
            );
        }
    }
}

#[test]
fn noiseless_solver_matches_the_simplex_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbead);
    for k in 0..10 {
        let rows = rng.random_range(2..=5);
        let cols = rows + rng.random_range(1..=4);
        let b = Mat64::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let mut c0 = Col64::zeros(cols);
        for _ in 0..2 {
            c0[rng.random_range(0..cols)] = rng.random::<f64>() * 2.0 - 1.0;
        }
        let y = &b * &c0;
        let sol = solve_noiseless_l1(&y, &b).unwrap();
        let (_, oracle_obj) = lp::basis_pursuit(&y, &b).expect("feasible by construction");
        assert!(
            (sol.objective - oracle_obj).abs() <= 1e-7,
            "instance {k}: solver {} vs simplex {oracle_obj}",
            sol.objective
        );
        assert!((&b * &sol.coefficients - &y).norm() <= tol::FEAS_TOL * (1.0 + y.norm()));
    }
}

#[test]
fn both_routes_reject_points_outside_the_span() {
    let b = Mat64::from_columns(&[
        Col64::from_column_slice(&[1.0, 0.0, 0.0]),
        Col64::from_column_slice(&[0.0, 1.0, 0.0]),
    ]);
    let y = Col64::from_column_slice(&[0.3, -0.2, 0.5]);
    assert!(solve_noiseless_l1(&y, &b).is_err());
    assert!(lp::basis_pursuit(&y, &b).is_none());
}

#[test]
fn dual_vector_is_independent_of_the_admm_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd0a1);
    for _ in 0..5 {
        let (x, a) = random_instance(&mut rng, 6, 5);
        let cold = SolverOptions::default();
        let warm = SolverOptions {
            init_seed: Some(rng.random()),
            ..SolverOptions::default()
        };
        let a_sol = solve_column(&x, &a, 2.0, &cold).unwrap();
        let b_sol = solve_column(&x, &a, 2.0, &warm).unwrap();
        assert!(
            (&a_sol.dual - &b_sol.dual).norm() <= 1e-6,
            "dual moved {} between initializations",
            (&a_sol.dual - &b_sol.dual).norm()
        );
    }
}
