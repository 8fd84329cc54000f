//! Matrix decision variables and their mapping onto scalar unknowns.

use std::collections::BTreeMap;

use serde::Serialize;

use super::LmiError;
use crate::linalg::Mat;

/// Handle to a declared variable inside a [`VariableSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Structure {
    Full,
    Symmetric,
    /// Symmetric and required to be positive definite (with margin).
    SymmetricPositiveDefinite,
    /// A 1×1 variable required to be positive (with margin).
    ScalarPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TieTransform {
    Identity,
    Transpose,
    Negate,
}

/// A sub-block of a variable that is an exact copy of another variable.
#[derive(Debug, Clone, Serialize)]
pub struct Tie {
    pub row: usize,
    pub col: usize,
    pub source: VarId,
    pub transform: TieTransform,
}

/// A sub-block pinned to zero.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroBlock {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixVariable {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub structure: Structure,
    pub ties: Vec<Tie>,
    pub zeros: Vec<ZeroBlock>,
}

impl MatrixVariable {
    pub fn full(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::with_structure(name, rows, cols, Structure::Full)
    }

    pub fn symmetric(name: impl Into<String>, n: usize) -> Self {
        Self::with_structure(name, n, n, Structure::Symmetric)
    }

    pub fn positive_definite(name: impl Into<String>, n: usize) -> Self {
        Self::with_structure(name, n, n, Structure::SymmetricPositiveDefinite)
    }

    pub fn scalar_positive(name: impl Into<String>) -> Self {
        Self::with_structure(name, 1, 1, Structure::ScalarPositive)
    }

    fn with_structure(name: impl Into<String>, rows: usize, cols: usize, structure: Structure) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            structure,
            ties: Vec::new(),
            zeros: Vec::new(),
        }
    }

    pub fn tie(mut self, row: usize, col: usize, source: VarId, transform: TieTransform) -> Self {
        self.ties.push(Tie {
            row,
            col,
            source,
            transform,
        });
        self
    }

    pub fn zero_block(mut self, row: usize, col: usize, rows: usize, cols: usize) -> Self {
        self.zeros.push(ZeroBlock { row, col, rows, cols });
        self
    }

    pub fn is_positive(&self) -> bool {
        matches!(
            self.structure,
            Structure::SymmetricPositiveDefinite | Structure::ScalarPositive
        )
    }
}

/// Linear image of one matrix entry: `sign · y[index]`, or structurally zero.
pub(crate) type Entry = Option<(usize, f64)>;

/// Ordered collection of variables with a fixed scalar layout.
#[derive(Debug, Clone, Default)]
pub struct VariableSet {
    vars: Vec<MatrixVariable>,
    entries: Vec<Vec<Entry>>,
    n_scalars: usize,
}

impl VariableSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, var: MatrixVariable) -> Result<VarId, LmiError> {
        let bad = |msg: String| LmiError::Structure(format!("variable {}: {msg}", var.name));
        if var.rows == 0 || var.cols == 0 {
            return Err(bad("empty shape".into()));
        }
        if self.vars.iter().any(|v| v.name == var.name) {
            return Err(bad("duplicate name".into()));
        }
        match var.structure {
            Structure::Full => {}
            Structure::Symmetric | Structure::SymmetricPositiveDefinite if var.rows == var.cols => {
                if !var.ties.is_empty() || !var.zeros.is_empty() {
                    return Err(bad("ties and zero blocks are only supported on full variables".into()));
                }
            }
            Structure::ScalarPositive if var.rows == 1 && var.cols == 1 => {}
            _ => return Err(bad("shape does not match structure".into())),
        }

        // None = free, Some(entry) = fixed by a tie or zero block
        let mut fixed: Vec<Option<Entry>> = vec![None; var.rows * var.cols];
        let idx = |i: usize, j: usize| i * var.cols + j;
        for z in &var.zeros {
            if z.row + z.rows > var.rows || z.col + z.cols > var.cols {
                return Err(bad("zero block out of range".into()));
            }
            for i in z.row..z.row + z.rows {
                for j in z.col..z.col + z.cols {
                    fixed[idx(i, j)] = Some(None);
                }
            }
        }
        for t in &var.ties {
            let src = self
                .vars
                .get(t.source.0)
                .ok_or_else(|| bad("tie source must be declared first".into()))?;
            let (sr, sc) = match t.transform {
                TieTransform::Transpose => (src.cols, src.rows),
                _ => (src.rows, src.cols),
            };
            if t.row + sr > var.rows || t.col + sc > var.cols {
                return Err(bad(format!("tie to {} out of range", src.name)));
            }
            let src_entries = &self.entries[t.source.0];
            for i in 0..sr {
                for j in 0..sc {
                    let e = match t.transform {
                        TieTransform::Identity => src_entries[i * src.cols + j],
                        TieTransform::Transpose => src_entries[j * src.cols + i],
                        TieTransform::Negate => src_entries[i * src.cols + j].map(|(k, s)| (k, -s)),
                    };
                    let slot = &mut fixed[idx(t.row + i, t.col + j)];
                    if slot.is_some() {
                        return Err(bad("overlapping ties or zero blocks".into()));
                    }
                    *slot = Some(e);
                }
            }
        }

        let symmetric = matches!(
            var.structure,
            Structure::Symmetric | Structure::SymmetricPositiveDefinite
        );
        let mut entries = vec![None; var.rows * var.cols];
        for i in 0..var.rows {
            for j in 0..var.cols {
                entries[idx(i, j)] = if let Some(e) = fixed[idx(i, j)] {
                    e
                } else if symmetric && i > j {
                    entries[idx(j, i)]
                } else {
                    self.n_scalars += 1;
                    Some((self.n_scalars - 1, 1.0))
                };
            }
        }
        self.vars.push(var);
        self.entries.push(entries);
        Ok(VarId(self.vars.len() - 1))
    }

    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, id: VarId) -> &MatrixVariable {
        &self.vars[id.0]
    }

    pub fn shape(&self, id: VarId) -> (usize, usize) {
        let v = &self.vars[id.0];
        (v.rows, v.cols)
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len()).map(VarId)
    }

    pub(crate) fn entry(&self, id: VarId, i: usize, j: usize) -> Entry {
        self.entries[id.0][i * self.vars[id.0].cols + j]
    }

    /// Value of one variable for the scalar vector `y`.
    pub fn value(&self, id: VarId, y: &[f64]) -> Mat {
        let (r, c) = self.shape(id);
        Mat::from_fn(r, c, |i, j| self.entry(id, i, j).map_or(0.0, |(k, s)| s * y[k]))
    }

    /// Values of every variable, keyed by name.
    pub fn assignment(&self, y: &[f64]) -> BTreeMap<String, Mat> {
        self.ids().map(|id| (self.get(id).name.clone(), self.value(id, y))).collect()
    }

    /// Recovers the scalar vector from a named assignment, checking that the
    /// assignment honours every structural constraint exactly.
    pub fn pack(&self, assignment: &BTreeMap<String, Mat>) -> Result<Vec<f64>, LmiError> {
        let mut y: Vec<Option<f64>> = vec![None; self.n_scalars];
        for id in self.ids() {
            let var = self.get(id);
            let m = assignment
                .get(&var.name)
                .ok_or_else(|| LmiError::MissingAssignment(var.name.clone()))?;
            if m.shape() != (var.rows, var.cols) {
                return Err(LmiError::Structure(format!(
                    "{} has shape {:?}, expected {:?}",
                    var.name,
                    m.shape(),
                    (var.rows, var.cols)
                )));
            }
            for i in 0..var.rows {
                for j in 0..var.cols {
                    let v = m[(i, j)];
                    let ok = match self.entry(id, i, j) {
                        None => v == 0.0,
                        Some((k, s)) => match y[k] {
                            None => {
                                y[k] = Some(v / s);
                                true
                            }
                            Some(prev) => prev * s == v,
                        },
                    };
                    if !ok {
                        return Err(LmiError::Structure(format!(
                            "{}[{i},{j}] violates its declared structure",
                            var.name
                        )));
                    }
                }
            }
        }
        Ok(y.into_iter().map(|v| v.unwrap_or(0.0)).collect())
    }
}
