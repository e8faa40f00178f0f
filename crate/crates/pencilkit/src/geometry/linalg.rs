//! Small symbolic matrix helpers (row-major, n ≤ 4).

use crate::error::{Error, Result};
use crate::expr::Expr;

pub const MAX_SYMBOLIC_DIM: usize = 4;

fn minor(m: &[Expr], n: usize, row: usize, col: usize) -> Vec<Expr> {
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for i in (0..n).filter(|&i| i != row) {
        for j in (0..n).filter(|&j| j != col) {
            out.push(m[i * n + j].clone());
        }
    }
    out
}

pub fn determinant(m: &[Expr], n: usize) -> Result<Expr> {
    if n > MAX_SYMBOLIC_DIM {
        return Err(Error::DimensionTooLarge(n));
    }
    Ok(det_unchecked(m, n))
}

fn det_unchecked(m: &[Expr], n: usize) -> Expr {
    match n {
        0 => Expr::one(),
        1 => m[0].clone(),
        2 => m[0].mul(&m[3]).sub(&m[1].mul(&m[2])),
        _ => Expr::sum((0..n).map(|j| {
            let c = m[j].mul(&det_unchecked(&minor(m, n, 0, j), n - 1));
            if j % 2 == 0 {
                c
            } else {
                c.neg()
            }
        })),
    }
}

pub fn is_diagonal(m: &[Expr], n: usize) -> bool {
    (0..n).all(|i| (0..n).all(|j| i == j || m[i * n + j].is_zero()))
}

/// Symbolic inverse via the adjugate; diagonal matrices are inverted entrywise.
pub fn inverse(m: &[Expr], n: usize) -> Result<Vec<Expr>> {
    if n > MAX_SYMBOLIC_DIM {
        return Err(Error::DimensionTooLarge(n));
    }
    if m.len() != n * n {
        return Err(Error::Dimension(format!("expected {} entries, got {}", n * n, m.len())));
    }
    if is_diagonal(m, n) {
        let mut out = vec![Expr::zero(); n * n];
        for i in 0..n {
            out[i * n + i] = Expr::one().div(&m[i * n + i]);
        }
        return Ok(out);
    }
    let det = det_unchecked(m, n);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            // adj[i][j] = (-1)^(i+j) det(minor(j, i))
            let c = det_unchecked(&minor(m, n, j, i), n - 1);
            let c = if (i + j) % 2 == 0 { c } else { c.neg() };
            out.push(c.div(&det));
        }
    }
    Ok(out)
}

pub fn matmul(a: &[Expr], b: &[Expr], n: usize) -> Vec<Expr> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(Expr::sum((0..n).map(|k| a[i * n + k].mul(&b[k * n + j]))));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn adjugate_inverse_matches_numeric() {
        let names: Vec<String> = vec!["x1".into(), "x2".into(), "x3".into()];
        let src = [
            "1 + x1^2", "x1*x2", "sin(x3)", //
            "x1*x2", "2", "x3", //
            "sin(x3)", "x3", "3 + x2^2",
        ];
        let m: Vec<Expr> = src.iter().map(|s| parse(s, &names).unwrap()).collect();
        let inv = inverse(&m, 3).unwrap();
        let prod = matmul(&m, &inv, 3);
        for p in [[0.3, -0.2, 0.9], [1.1, 0.4, -0.5]] {
            for i in 0..3 {
                for j in 0..3 {
                    let v = prod[i * 3 + j].evaluate(&p).unwrap();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-12);
                }
            }
            let num = nalgebra::Matrix3::from_fn(|i, j| m[i * 3 + j].evaluate(&p).unwrap());
            let d = determinant(&m, 3).unwrap().evaluate(&p).unwrap();
            assert!((d - num.determinant()).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_cap() {
        let m = vec![Expr::one(); 25];
        assert_eq!(inverse(&m, 5), Err(Error::DimensionTooLarge(5)));
    }
}
