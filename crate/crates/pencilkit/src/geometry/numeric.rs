//! Pointwise numeric kernels on flat, row-major component slices.

use nalgebra::{DMatrix, DVector};

/// Curvature values `R^l_kij` at `[l][k][i][j]` from `Γ` and `∂Γ` values, with
/// the magnitude of the largest term entering each component.
pub fn riemann_at(n: usize, gamma: &[f64], dgamma: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let g = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    let d = |m: usize, k: usize, i: usize, j: usize| dgamma[((m * n + k) * n + i) * n + j];
    let mut r = vec![0.0; n * n * n * n];
    let mut scale = vec![0.0; n * n * n * n];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut t = crate::report::Terms::new();
                    t.push(d(i, l, j, k));
                    t.push(-d(j, l, i, k));
                    for s in 0..n {
                        t.push(g(l, i, s) * g(s, j, k));
                        t.push(-g(l, j, s) * g(s, i, k));
                    }
                    let a = ((l * n + k) * n + i) * n + j;
                    let b = ((l * n + k) * n + j) * n + i;
                    r[a] = t.value();
                    r[b] = -t.value();
                    scale[a] = t.scale();
                    scale[b] = t.scale();
                }
            }
        }
    }
    (r, scale)
}

pub fn matrix(n: usize, m: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, m, v)
}

pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn inverse(n: usize, v: &[f64]) -> Option<Vec<f64>> {
    matrix(n, n, v).try_inverse().map(|m| to_row_major(&m))
}

pub fn determinant(n: usize, v: &[f64]) -> f64 {
    matrix(n, n, v).determinant()
}

pub fn solve(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    matrix(n, n, a)
        .lu()
        .solve(&DVector::from_column_slice(b))
        .map(|x| x.iter().copied().collect())
}

/// Least-squares residual of `v` against the column span of the n×m matrix
/// `j`, relative to `1 + |v|`.
pub fn span_residual(j: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let svd = j.clone().svd(true, true);
    let coeffs = match svd.solve(v, 1e-12) {
        Ok(c) => c,
        Err(_) => return f64::INFINITY,
    };
    let r = v - j * coeffs;
    crate::report::normalized(r.norm(), v.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_membership() {
        let j = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 0.0]);
        assert!(span_residual(&j, &DVector::from_row_slice(&[2.0, 2.0, 0.0])) < 1e-14);
        assert!(span_residual(&j, &DVector::from_row_slice(&[1.0, 0.0, 0.0])) > 0.1);
    }

    #[test]
    fn inverse_and_solve_agree() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let inv = inverse(2, &a).unwrap();
        let x = solve(2, &a, &[1.0, 0.0]).unwrap();
        assert!((inv[0] - x[0]).abs() < 1e-15 && (inv[2] - x[1]).abs() < 1e-15);
        assert!((determinant(2, &a) - 5.0).abs() < 1e-14);
    }
}
