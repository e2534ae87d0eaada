//! Exhaustive lasso reference: minimize ||c||_1 + (lambda/2)||x - A c||^2
//! by enumerating every support/sign pattern.
//!
//! For a fixed support S and sign vector s, stationarity reads
//! A_S^T A_S c_S = A_S^T x - s/lambda, a plain linear solve. Every such
//! candidate (plus c = 0) gets its objective evaluated exactly; since no
//! candidate can score below the global minimum and the true optimum shows
//! up under its own support/sign pattern, the minimum over candidates is
//! the optimum. Cost is 3^m solves, so keep m small (<= ~12).

use nalgebra::{DMatrix, DVector};

pub fn objective(x: &DVector<f64>, a: &DMatrix<f64>, c: &DVector<f64>, lambda: f64) -> f64 {
    let e = x - a * c;
    c.iter().map(|v| v.abs()).sum::<f64>() + 0.5 * lambda * e.norm_squared()
}

/// Global minimizer and optimal objective, by brute force.
pub fn lasso_minimum(x: &DVector<f64>, a: &DMatrix<f64>, lambda: f64) -> (DVector<f64>, f64) {
    let n = a.nrows();
    let m = a.ncols();
    assert!(
        m <= 16,
        "support enumeration is exponential; got {m} columns"
    );
    assert!(lambda > 0.0);

    let mut best_c = DVector::<f64>::zeros(m);
    let mut best = objective(x, a, &best_c, lambda);

    // Iterate supports as bitmasks, signs as sub-masks over the support.
    for support in 1u32..(1 << m) {
        let size = support.count_ones() as usize;
        if size > n {
            continue; // gram is singular; such candidates are redundant
        }
        let cols: Vec<usize> = (0..m).filter(|&j| support >> j & 1 == 1).collect();
        let a_s = a.select_columns(cols.iter());
        let gram = a_s.transpose() * &a_s;
        let at_x = a_s.transpose() * x;
        let Some(gram_inv) = nalgebra::linalg::LU::new(gram).try_inverse() else {
            continue;
        };
        for signs in 0u32..(1 << size) {
            let mut rhs = at_x.clone();
            for (bit, _) in cols.iter().enumerate() {
                let s = if signs >> bit & 1 == 1 { -1.0 } else { 1.0 };
                rhs[bit] -= s / lambda;
            }
            let c_s = &gram_inv * rhs;
            let mut c = DVector::<f64>::zeros(m);
            for (bit, &j) in cols.iter().enumerate() {
                c[j] = c_s[bit];
            }
            let value = objective(x, a, &c, lambda);
            if value < best {
                best = value;
                best_c = c;
            }
        }
    }
    (best_c, best)
}
