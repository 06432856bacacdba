//! Small dense linear algebra on `Vec<Vec<f64>>` (d ≤ a handful).

/// LU factorisation with partial pivoting. Returns the packed factors, the
/// row permutation and the permutation sign, or `None` for an exactly
/// singular matrix.
fn lu(a: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, Vec<usize>, f64)> {
    let n = a.len();
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return None;
        }
        if pivot != col {
            m.swap(pivot, col);
            perm.swap(pivot, col);
            sign = -sign;
        }
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            m[row][col] = f;
            for k in col + 1..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    Some((m, perm, sign))
}

pub fn det(a: &[Vec<f64>]) -> f64 {
    match lu(a) {
        Some((m, _, sign)) => sign * (0..a.len()).map(|i| m[i][i]).product::<f64>(),
        None => 0.0,
    }
}

pub fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let (m, perm, _) = lu(a)?;
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        // solve L U x = P e_col
        let mut x: Vec<f64> = perm.iter().map(|&p| if p == col { 1.0 } else { 0.0 }).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= m[i][k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= m[i][k] * x[k];
            }
            x[i] /= m[i][i];
        }
        for i in 0..n {
            inv[i][col] = x[i];
        }
    }
    Some(inv)
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = a.len();
    let cols = a[0].len();
    (0..cols).map(|j| (0..rows).map(|i| a[i][j]).collect()).collect()
}

/// Induced 1-norm (max column sum).
pub fn norm1(a: &[Vec<f64>]) -> f64 {
    let cols = a[0].len();
    (0..cols)
        .map(|j| a.iter().map(|row| row[j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip_needs_pivoting() {
        let a = vec![
            vec![0.0, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![3.0, 0.0, 1.0],
        ];
        let inv = invert(&a).unwrap();
        let id = matmul(&a, &inv);
        for (i, row) in id.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-14);
            }
        }
        assert!((det(&a) - (-5.0)).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(invert(&a).is_none());
        assert_eq!(det(&a), 0.0);
    }
}
