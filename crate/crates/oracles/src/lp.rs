//! Dense two-phase simplex, used as a basis pursuit reference:
//! min ||c||_1 s.t. B c = y becomes a standard-form LP over the split
//! c = p - q with p, q >= 0. Bland's rule keeps it cycle-free; everything
//! is a plain dense tableau.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

/// min cost^T z s.t. constraints z = rhs, z >= 0. Returns the argmin, or
/// `None` when infeasible (basis pursuit is never unbounded, but an
/// unbounded ray also yields `None` defensively).
pub fn solve_standard_form(
    constraints: &DMatrix<f64>,
    rhs: &DVector<f64>,
    cost: &DVector<f64>,
) -> Option<DVector<f64>> {
    let m = constraints.nrows();
    let n = constraints.ncols();
    assert_eq!(rhs.len(), m);
    assert_eq!(cost.len(), n);

    // Tableau with artificial variables appended: columns [z | artificial],
    // rows normalized so rhs >= 0.
    let total = n + m;
    let mut tab = DMatrix::<f64>::zeros(m, total + 1);
    for i in 0..m {
        let flip = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[(i, j)] = flip * constraints[(i, j)];
        }
        tab[(i, n + i)] = 1.0;
        tab[(i, total)] = flip * rhs[i];
    }
    let mut basis: Vec<usize> = (n..total).collect();

    // Phase 1: minimize the artificial sum.
    let mut phase1 = DVector::<f64>::zeros(total);
    for j in n..total {
        phase1[j] = 1.0;
    }
    run_simplex(&mut tab, &mut basis, &phase1, total)?;
    let artificial_sum: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= n)
        .map(|(i, _)| tab[(i, total)])
        .sum();
    if artificial_sum > FEAS_TOL {
        return None;
    }
    // Pivot remaining artificials out where possible; rows that cannot
    // pivot are redundant constraints and can stay (their rhs is ~0).
    for row in 0..m {
        if basis[row] >= n {
            if let Some(col) = (0..n).find(|&j| tab[(row, j)].abs() > PIVOT_TOL) {
                pivot(&mut tab, &mut basis, row, col);
            }
        }
    }

    // Phase 2 on the original objective, artificial columns frozen.
    let mut phase2 = DVector::<f64>::zeros(total);
    for j in 0..n {
        phase2[j] = cost[j];
    }
    run_simplex(&mut tab, &mut basis, &phase2, n)?;

    let mut z = DVector::<f64>::zeros(n);
    for (row, &b) in basis.iter().enumerate() {
        if b < n {
            z[b] = tab[(row, total)];
        }
    }
    Some(z)
}

/// Simplex iterations with Bland's rule over the first `active` columns.
/// Returns `None` on an unbounded ray.
fn run_simplex(
    tab: &mut DMatrix<f64>,
    basis: &mut [usize],
    cost: &DVector<f64>,
    active: usize,
) -> Option<()> {
    let m = tab.nrows();
    let rhs_col = tab.ncols() - 1;
    loop {
        // Reduced costs: c_j - c_B^T (current column j).
        let mut entering = None;
        for j in 0..active {
            let mut reduced = cost[j];
            for i in 0..m {
                reduced -= cost[basis[i]] * tab[(i, j)];
            }
            if reduced < -PIVOT_TOL {
                entering = Some(j);
                break; // Bland: smallest improving index
            }
        }
        let Some(col) = entering else { return Some(()) };

        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if tab[(i, col)] > PIVOT_TOL {
                let ratio = tab[(i, rhs_col)] / tab[(i, col)];
                let better = ratio < best_ratio - 1e-12
                    || (ratio < best_ratio + 1e-12
                        && leaving.map_or(true, |l| basis[i] < basis[l]));
                if better {
                    best_ratio = ratio;
                    leaving = Some(i);
                }
            }
        }
        let row = leaving?; // no positive entry: unbounded
        pivot(tab, basis, row, col);
    }
}

fn pivot(tab: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let m = tab.nrows();
    let w = tab.ncols();
    let p = tab[(row, col)];
    for j in 0..w {
        tab[(row, j)] /= p;
    }
    for i in 0..m {
        if i != row {
            let f = tab[(i, col)];
            if f != 0.0 {
                for j in 0..w {
                    tab[(i, j)] -= f * tab[(row, j)];
                }
            }
        }
    }
    basis[row] = col;
}

/// min ||c||_1 s.t. B c = y. Returns (c, ||c||_1), or `None` if y is not
/// reachable.
pub fn basis_pursuit(y: &DVector<f64>, b: &DMatrix<f64>) -> Option<(DVector<f64>, f64)> {
    let k = b.ncols();
    // c = p - q with p, q >= 0; cost is the sum of both halves.
    let mut constraints = DMatrix::<f64>::zeros(b.nrows(), 2 * k);
    for i in 0..b.nrows() {
        for j in 0..k {
            constraints[(i, j)] = b[(i, j)];
            constraints[(i, k + j)] = -b[(i, j)];
        }
    }
    let cost = DVector::<f64>::from_element(2 * k, 1.0);
    let z = solve_standard_form(&constraints, y, &cost)?;
    let c = DVector::<f64>::from_fn(k, |j, _| z[j] - z[k + j]);
    let norm = c.iter().map(|v| v.abs()).sum();
    Some((c, norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dictionary_returns_the_target() {
        let b = DMatrix::<f64>::identity(3, 3);
        let y = DVector::from_column_slice(&[0.3, -0.2, 0.0]);
        let (c, norm) = basis_pursuit(&y, &b).unwrap();
        assert!((c - y).norm() < 1e-9);
        assert!((norm - 0.5).abs() < 1e-9);
    }

    #[test]
    fn split_mass_costs_the_same_as_concentrated_mass() {
        // c1 + c2 = 1 with unit atoms: any split has l1 norm 1.
        let b = DMatrix::from_column_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::from_column_slice(&[1.0]);
        let (_, norm) = basis_pursuit(&y, &b).unwrap();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_target_beats_dense_representations() {
        // Columns e1, e2, (e1+e2)/sqrt(2): the cheapest representation of
        // y = (1,1)/sqrt(2) is the single third atom with weight 1.
        let s = 1.0 / 2.0_f64.sqrt();
        let b = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, s, s]);
        let y = DVector::from_column_slice(&[s, s]);
        let (c, norm) = basis_pursuit(&y, &b).unwrap();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!((c[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unreachable_targets_are_infeasible() {
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = DVector::from_column_slice(&[0.5, 0.5]);
        assert!(basis_pursuit(&y, &b).is_none());
    }

    #[test]
    fn negative_rhs_rows_are_handled() {
        let b = DMatrix::<f64>::identity(2, 2);
        let y = DVector::from_column_slice(&[-0.7, 0.1]);
        let (c, norm) = basis_pursuit(&y, &b).unwrap();
        assert!((c[0] + 0.7).abs() < 1e-9);
        assert!((norm - 0.8).abs() < 1e-9);
    }
}
