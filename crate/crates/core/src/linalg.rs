//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, SymmetricEigen};

pub type Mat = DMatrix<f64>;

/// Reciprocal 2-norm condition number, `σ_min / σ_max`. Zero for the zero matrix.
pub fn rcond(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 || !max.is_finite() {
        return 0.0;
    }
    sv.min() / max
}

/// Solves `a x = b` with partial-pivot LU.
pub fn solve(a: &Mat, b: &Mat) -> Option<Mat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return None;
    }
    a.clone().lu().solve(b)
}

/// `m · n⁻¹`, computed as the transpose of `n⁻ᵀ mᵀ`.
pub fn right_divide(m: &Mat, n: &Mat) -> Option<Mat> {
    solve(&n.transpose(), &m.transpose()).map(|x| x.transpose())
}

/// Inverse through LU solves against identity columns.
pub fn inverse(a: &Mat) -> Option<Mat> {
    solve(a, &Mat::identity(a.nrows(), a.ncols()))
}

/// Induced ∞-norm (max absolute row sum).
pub fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry(m: &Mat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect()
}

/// Largest eigenvalue of a symmetric matrix; `0.0` for an empty one.
pub fn sym_max_eig(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sym_eigenvalues(m).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix; `0.0` for an empty one.
pub fn sym_min_eig(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sym_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

/// `[I_m; 0_{(n-m)×m}]`.
pub fn padded_identity(n: usize, m: usize) -> Mat {
    let mut out = Mat::zeros(n, m);
    for i in 0..m.min(n) {
        out[(i, i)] = 1.0;
    }
    out
}

/// Writes `block` into `target` with its top-left corner at `(r, c)`.
pub fn set_block(target: &mut Mat, r: usize, c: usize, block: &Mat) {
    target
        .view_mut((r, c), (block.nrows(), block.ncols()))
        .copy_from(block);
}

/// Builds a dense matrix from a grid of equally-compatible blocks.
pub fn block_matrix(blocks: &[Vec<&Mat>]) -> Mat {
    let heights: Vec<usize> = blocks.iter().map(|row| row[0].nrows()).collect();
    let widths: Vec<usize> = blocks[0].iter().map(|b| b.ncols()).collect();
    let mut out = Mat::zeros(heights.iter().sum(), widths.iter().sum());
    let mut r = 0;
    for (i, row) in blocks.iter().enumerate() {
        let mut c = 0;
        for (j, b) in row.iter().enumerate() {
            debug_assert_eq!(b.nrows(), heights[i]);
            debug_assert_eq!(b.ncols(), widths[j]);
            set_block(&mut out, r, c, b);
            c += widths[j];
        }
        r += heights[i];
    }
    out
}

/// Row-major nested vectors.
pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Inverse of [`to_rows`]. Returns `None` on ragged input.
pub fn from_rows(rows: &[Vec<f64>]) -> Option<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serde adapter storing a matrix as row-major nested arrays.
pub mod serde_rows {
    use super::{from_rows, to_rows, Mat};
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| D::Error::custom("matrix rows have different lengths"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_divide_matches_inverse_product() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let n = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let direct = &m * inverse(&n).unwrap();
        let divided = right_divide(&m, &n).unwrap();
        assert!((direct - divided).abs().max() < 1e-14);
    }

    #[test]
    fn rcond_of_singular_is_zero_ish() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(rcond(&m) < 1e-15);
        assert_eq!(rcond(&Mat::identity(3, 3)), 1.0);
    }

    #[test]
    fn eig_extremes() {
        let m = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![-3.0, 0.5, 2.0]));
        assert_eq!(sym_max_eig(&m), 2.0);
        assert_eq!(sym_min_eig(&m), -3.0);
        assert_eq!(sym_max_eig(&Mat::zeros(0, 0)), 0.0);
    }

    #[test]
    fn rows_round_trip() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(from_rows(&to_rows(&m)).unwrap(), m);
        assert!(from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_none());
    }
}
