//! Small dense linear-algebra helpers shared by the solver, the sparsifier
//! and the oracles. Everything here works on `nalgebra` dynamic matrices.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on singular values used for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

fn svd_threshold(sv: &DVector<f64>, rtol: f64) -> f64 {
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    rtol * smax.max(f64::MIN_POSITIVE)
}

/// Numerical rank from the singular values.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let thr = svd_threshold(&sv, rtol);
    sv.iter().filter(|&&s| s > thr).count()
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_space(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let thr = svd_threshold(sv, rtol);
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > thr).collect();
    DMatrix::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad to at least square so the SVD returns a full V
    let rows = m.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let thr = if smax == 0.0 { 0.0 } else { svd_threshold(sv, rtol) };
    let null_rows: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= thr).collect();
    DMatrix::from_fn(cols, null_rows.len(), |r, c| vt[(null_rows[c], r)])
}

/// Rows spanning the orthogonal complement of the columns of `basis`
/// (assumed orthonormal) in `R^dim`, themselves orthonormal.
pub fn orthogonal_complement_rows(basis: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let mut vecs: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let start = vecs.len();
    for i in 0..dim {
        if vecs.len() == dim {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &vecs {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let nrm = v.norm();
        if nrm > 1e-8 {
            vecs.push(v / nrm);
        }
    }
    let k = vecs.len() - start;
    DMatrix::from_fn(k, dim, |r, c| vecs[start + r][c])
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let thr = svd_threshold(&svd.singular_values, RANK_RTOL);
    svd.solve(b, thr).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Reduced row echelon kernel vector: eliminates columns left to right with
/// partial row pivoting and returns the kernel vector attached to the
/// lowest-index free column, normalised to unit max-norm. `None` when the
/// columns are independent.
pub fn kernel_vector(m: &DMatrix<f64>, rtol: f64) -> Option<DVector<f64>> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return None;
    }
    let scale = m.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        let mut g = DVector::zeros(cols);
        g[0] = 1.0;
        return Some(g);
    }
    let tol = rtol * scale;
    let mut a = m.clone();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut row = 0;
    let mut free = None;
    for col in 0..cols {
        if row < rows {
            let (best, val) =
                (row..rows)
                    .map(|r| (r, a[(r, col)].abs()))
                    .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if val > tol {
                a.swap_rows(row, best);
                let p = a[(row, col)];
                for c in 0..cols {
                    a[(row, c)] /= p;
                }
                for r in 0..rows {
                    if r != row {
                        let f = a[(r, col)];
                        if f != 0.0 {
                            for c in 0..cols {
                                let v = a[(row, c)];
                                a[(r, c)] -= f * v;
                            }
                        }
                    }
                }
                pivots.push((row, col));
                row += 1;
                continue;
            }
        }
        free = Some(col);
        break;
    }
    let f = free?;
    let mut g = DVector::zeros(cols);
    g[f] = 1.0;
    for &(r, c) in &pivots {
        g[c] = -a[(r, f)];
    }
    let mx = g.amax();
    Some(g / mx)
}

/// Stacks column vectors into a matrix.
pub fn hstack(cols: &[DVector<f64>], rows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_vector_uses_lowest_free_column() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let g = kernel_vector(&m, 1e-12).unwrap();
        assert_eq!(g.as_slice(), &[-1.0, 1.0, 0.0]);
    }

    #[test]
    fn kernel_vector_none_for_independent_columns() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(kernel_vector(&m, 1e-12).is_none());
    }

    #[test]
    fn complement_is_orthonormal() {
        let b = DMatrix::from_column_slice(3, 1, &[1.0 / 3f64.sqrt(); 3]);
        let q = orthogonal_complement_rows(&b, 3);
        assert_eq!(q.nrows(), 2);
        let qqt = &q * q.transpose();
        assert!((qqt - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((&q * &b).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = null_space(&m, RANK_RTOL);
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).norm() < 1e-12);
    }

    #[test]
    fn lstsq_min_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = lstsq(&a, &DVector::from_vec(vec![2.0]));
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
