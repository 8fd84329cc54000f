//! Matrix-valued affine expressions in the decision variables.

use std::ops::{Add, Mul, Neg, Sub};

use super::variable::{VarId, VariableSet};
use super::LmiError;
use crate::linalg::Mat;

/// `left · V · right` or `left · Vᵀ · right`.
#[derive(Debug, Clone)]
pub struct Term {
    pub left: Mat,
    pub var: VarId,
    pub transposed: bool,
    pub right: Mat,
}

/// `constant + Σ terms`, every piece having shape `rows × cols`.
#[derive(Debug, Clone)]
pub struct AffineExpr {
    pub constant: Mat,
    pub terms: Vec<Term>,
}

impl AffineExpr {
    pub fn constant(m: Mat) -> Self {
        Self {
            constant: m,
            terms: Vec::new(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Mat::zeros(rows, cols))
    }

    pub fn var(vars: &VariableSet, id: VarId) -> Self {
        let (r, c) = vars.shape(id);
        Self {
            constant: Mat::zeros(r, c),
            terms: vec![Term {
                left: Mat::identity(r, r),
                var: id,
                transposed: false,
                right: Mat::identity(c, c),
            }],
        }
    }

    pub fn rows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn cols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn transpose(&self) -> Self {
        Self {
            constant: self.constant.transpose(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    left: t.right.transpose(),
                    var: t.var,
                    transposed: !t.transposed,
                    right: t.left.transpose(),
                })
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            constant: &self.constant * s,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    left: &t.left * s,
                    ..t.clone()
                })
                .collect(),
        }
    }

    pub fn left_mul(&self, m: &Mat) -> Self {
        Self {
            constant: m * &self.constant,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    left: m * &t.left,
                    ..t.clone()
                })
                .collect(),
        }
    }

    pub fn right_mul(&self, m: &Mat) -> Self {
        Self {
            constant: &self.constant * m,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    right: &t.right * m,
                    ..t.clone()
                })
                .collect(),
        }
    }

    /// `self + selfᵀ`
    pub fn sym2(&self) -> Self {
        self.clone() + self.transpose()
    }

    /// Places `self` at `(row, col)` inside a zero `rows × cols` expression.
    pub fn embed(&self, rows: usize, cols: usize, row: usize, col: usize) -> Self {
        assert!(row + self.rows() <= rows && col + self.cols() <= cols, "embed out of range");
        let sel_l = Mat::from_fn(rows, self.rows(), |i, j| if i == row + j { 1.0 } else { 0.0 });
        let sel_r = Mat::from_fn(self.cols(), cols, |i, j| if j == col + i { 1.0 } else { 0.0 });
        self.left_mul(&sel_l).right_mul(&sel_r)
    }

    /// Assembles a block matrix; `None` blocks are zero. Row heights and
    /// column widths are inferred from the populated blocks.
    pub fn blocks(grid: &[Vec<Option<AffineExpr>>]) -> Result<Self, LmiError> {
        let nr = grid.len();
        let nc = grid.first().map_or(0, Vec::len);
        if grid.iter().any(|r| r.len() != nc) {
            return Err(LmiError::Structure("ragged block grid".into()));
        }
        let mut heights = vec![None; nr];
        let mut widths = vec![None; nc];
        for (i, row) in grid.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    for (slot, v) in [(&mut heights[i], b.rows()), (&mut widths[j], b.cols())] {
                        match slot {
                            None => *slot = Some(v),
                            Some(prev) if *prev != v => {
                                return Err(LmiError::Structure(format!(
                                    "block ({i},{j}) does not line up with its neighbours"
                                )))
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights
            .into_iter()
            .map(|h| h.ok_or_else(|| LmiError::Structure("empty block row".into())))
            .collect::<Result<_, _>>()?;
        let widths: Vec<usize> = widths
            .into_iter()
            .map(|w| w.ok_or_else(|| LmiError::Structure("empty block column".into())))
            .collect::<Result<_, _>>()?;
        let rows: usize = heights.iter().sum();
        let cols: usize = widths.iter().sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for (i, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    out = out + b.embed(rows, cols, r0, c0);
                }
                c0 += widths[j];
            }
            r0 += heights[i];
        }
        Ok(out)
    }

    pub fn eval(&self, vars: &VariableSet, y: &[f64]) -> Mat {
        let mut out = self.constant.clone();
        for t in &self.terms {
            let v = vars.value(t.var, y);
            let v = if t.transposed { v.transpose() } else { v };
            out += &t.left * v * &t.right;
        }
        out
    }

    /// Lowers to `F0 + Σ y_k F_k`; `coeffs[k]` is `None` when `y_k` is absent.
    pub fn lower(&self, vars: &VariableSet) -> (Mat, Vec<Option<Mat>>) {
        let mut coeffs: Vec<Option<Mat>> = vec![None; vars.n_scalars()];
        for t in &self.terms {
            let (vr, vc) = vars.shape(t.var);
            for i in 0..vr {
                for j in 0..vc {
                    let Some((k, s)) = vars.entry(t.var, i, j) else {
                        continue;
                    };
                    // V = Σ e_i e_jᵀ v_ij, Vᵀ = Σ e_j e_iᵀ v_ij
                    let (li, rj) = if t.transposed { (j, i) } else { (i, j) };
                    let contrib = t.left.column(li) * t.right.row(rj) * s;
                    match &mut coeffs[k] {
                        Some(m) => *m += contrib,
                        slot @ None => *slot = Some(contrib),
                    }
                }
            }
        }
        (self.constant.clone(), coeffs)
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in expression sum");
        self.constant += rhs.constant;
        self.terms.extend(rhs.terms);
        self
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        self + (-rhs)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scale(-1.0)
    }
}

impl Mul<AffineExpr> for &Mat {
    type Output = AffineExpr;
    fn mul(self, rhs: AffineExpr) -> AffineExpr {
        assert_eq!(self.ncols(), rhs.rows(), "shape mismatch in left product");
        rhs.left_mul(self)
    }
}

impl Mul<&Mat> for AffineExpr {
    type Output = AffineExpr;
    fn mul(self, rhs: &Mat) -> AffineExpr {
        assert_eq!(self.cols(), rhs.nrows(), "shape mismatch in right product");
        self.right_mul(rhs)
    }
}

impl From<Mat> for AffineExpr {
    fn from(m: Mat) -> Self {
        Self::constant(m)
    }
}
