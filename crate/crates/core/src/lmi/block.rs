use std::collections::BTreeMap;

use serde_json::json;

use super::expr::AffineExpr;
use super::variable::VariableSet;
use super::LmiError;
use crate::linalg::{self, Mat};

/// Symmetric block matrix `F(y) ≺ 0`. Only blocks with `i ≤ j` are stored;
/// block `(j, i)` is the transpose of `(i, j)` and unset blocks are zero.
#[derive(Debug, Clone)]
pub struct BlockLmi {
    pub name: String,
    sizes: Vec<usize>,
    blocks: BTreeMap<(usize, usize), AffineExpr>,
}

/// Tolerance for the symmetry audit, relative to `1 + ‖M‖∞`.
pub const SYMMETRY_TOL: f64 = 1e-12;

impl BlockLmi {
    pub fn new(name: impl Into<String>, sizes: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            sizes,
            blocks: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, i: usize, j: usize, expr: AffineExpr) -> Result<(), LmiError> {
        let (i, j, expr) = if i > j { (j, i, expr.transpose()) } else { (i, j, expr) };
        if j >= self.sizes.len() {
            return Err(LmiError::Structure(format!("{}: block ({i},{j}) out of range", self.name)));
        }
        if expr.shape() != (self.sizes[i], self.sizes[j]) {
            return Err(LmiError::Structure(format!(
                "{}: block ({i},{j}) is {:?}, expected {:?}",
                self.name,
                expr.shape(),
                (self.sizes[i], self.sizes[j])
            )));
        }
        self.blocks.insert((i, j), expr);
        Ok(())
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&AffineExpr> {
        self.blocks.get(&(i, j))
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn offsets(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect()
    }

    /// The whole matrix as one expression, lower blocks mirrored.
    pub fn expr(&self) -> AffineExpr {
        let d = self.dim();
        let off = self.offsets();
        let mut out = AffineExpr::zeros(d, d);
        for (&(i, j), e) in &self.blocks {
            out = out + e.embed(d, d, off[i], off[j]);
            if i != j {
                out = out + e.transpose().embed(d, d, off[j], off[i]);
            }
        }
        out
    }

    /// Numerical value, audited for symmetry then symmetrized.
    pub fn eval(&self, vars: &VariableSet, y: &[f64]) -> Result<Mat, LmiError> {
        let d = self.dim();
        let off = self.offsets();
        let mut m = Mat::zeros(d, d);
        for (&(i, j), e) in &self.blocks {
            let v = e.eval(vars, y);
            linalg::set_block(&mut m, off[i], off[j], &v);
            if i != j {
                linalg::set_block(&mut m, off[j], off[i], &v.transpose());
            }
        }
        let asym = linalg::asymmetry(&m);
        if asym > SYMMETRY_TOL * (1.0 + linalg::inf_norm(&m)) {
            return Err(LmiError::Structure(format!(
                "{}: assembled matrix is not symmetric (asymmetry {asym:.3e})",
                self.name
            )));
        }
        Ok(linalg::symmetrize(&m))
    }

    /// `F0 + Σ y_k F_k` with symmetrized coefficients.
    pub fn lower(&self, vars: &VariableSet) -> (Mat, Vec<Option<Mat>>) {
        let (f0, fk) = self.expr().lower(vars);
        (
            linalg::symmetrize(&f0),
            fk.into_iter().map(|f| f.map(|f| linalg::symmetrize(&f))).collect(),
        )
    }

    /// Debug description: block shapes, variables per block, constant parts.
    pub fn describe(&self, vars: &VariableSet) -> serde_json::Value {
        let blocks: Vec<_> = self
            .blocks
            .iter()
            .map(|(&(i, j), e)| {
                let mut names: Vec<&str> = e.terms.iter().map(|t| vars.get(t.var).name.as_str()).collect();
                names.sort_unstable();
                names.dedup();
                json!({
                    "block": [i, j],
                    "shape": [e.rows(), e.cols()],
                    "variables": names,
                    "constant": linalg::to_rows(&e.constant),
                })
            })
            .collect();
        json!({ "name": self.name, "sizes": self.sizes, "blocks": blocks })
    }
}
