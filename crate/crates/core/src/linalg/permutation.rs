use alloc::vec;
use alloc::vec::Vec;

use super::{Matrix, OrthogonalMatrix};

/// Orthogonal matrix with entries in {0, ±1}: column `j` holds `signs[j]` at
/// row `rows[j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedPermutation {
    rows: Vec<usize>,
    signs: Vec<i8>,
}

impl SignedPermutation {
    /// `rows` must be a permutation of `0..n` and every sign ±1.
    pub fn new(rows: Vec<usize>, signs: Vec<i8>) -> Option<Self> {
        let n = rows.len();
        if signs.len() != n || signs.iter().any(|&s| s != 1 && s != -1) {
            return None;
        }
        let mut seen = vec![false; n];
        for &r in &rows {
            if r >= n || seen[r] {
                return None;
            }
            seen[r] = true;
        }
        Some(Self { rows, signs })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: (0..n).collect(),
            signs: vec![1; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row_of_column(&self, j: usize) -> usize {
        self.rows[j]
    }

    pub fn sign_of_column(&self, j: usize) -> i8 {
        self.signs[j]
    }

    pub fn to_matrix(&self) -> OrthogonalMatrix {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for (j, (&r, &s)) in self.rows.iter().zip(&self.signs).enumerate() {
            m[(r, j)] = f64::from(s);
        }
        OrthogonalMatrix::new(m).expect("signed permutation is orthogonal")
    }
}

/// Nearest signed permutation and the normalized squared distance
/// `‖W − P‖_F² / n`.
///
/// Entries are visited by decreasing magnitude and each is accepted when its
/// row and column are still free, carrying the entry's sign. On matrices whose
/// column-wise maxima sit in distinct rows this is the column-wise argmax.
pub fn nearest_signed_permutation(w: &Matrix) -> (SignedPermutation, f64) {
    assert!(w.is_square(), "nearest_signed_permutation needs a square matrix");
    let n = w.rows();
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push((w[(i, j)].abs(), i, j));
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut row_used = vec![false; n];
    let mut rows = vec![usize::MAX; n];
    let mut signs = vec![1i8; n];
    let mut assigned = 0;
    for (_, i, j) in entries {
        if row_used[i] || rows[j] != usize::MAX {
            continue;
        }
        row_used[i] = true;
        rows[j] = i;
        signs[j] = if w[(i, j)] < 0.0 { -1 } else { 1 };
        assigned += 1;
        if assigned == n {
            break;
        }
    }
    let p = SignedPermutation { rows, signs };
    let dist = w.frobenius_distance(&p.to_matrix()).powi(2) / n as f64;
    (p, dist)
}
