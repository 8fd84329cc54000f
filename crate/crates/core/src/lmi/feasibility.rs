use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::Serialize;

use super::block::BlockLmi;
use super::expr::AffineExpr;
use super::sdp::{self, ConeBlock, SdpOptions, SdpProblem, SdpStatus};
use super::variable::{Structure, VariableSet};
use super::LmiError;
use crate::linalg::{self, Mat};

/// Default strictness margin: `F ⪯ −margin·I`, PD variables `⪰ margin·I`.
pub const DEFAULT_MARGIN: f64 = 1e-6;

/// A set of LMIs over one variable layout.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub vars: VariableSet,
    pub lmis: Vec<BlockLmi>,
}

impl LmiProblem {
    pub fn lmi(&self, name: &str) -> Option<&BlockLmi> {
        self.lmis.iter().find(|l| l.name == name)
    }

    /// JSON listing of every LMI, for cross-checking assembled structure.
    pub fn debug_dump(&self) -> serde_json::Value {
        let vars: Vec<_> = self.vars.ids().map(|id| self.vars.get(id).clone()).collect();
        serde_json::json!({
            "variables": vars,
            "lmis": self.lmis.iter().map(|l| l.describe(&self.vars)).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityOptions {
    pub margin: f64,
    /// Every scalar unknown is confined to `[−box_bound, box_bound]`, which
    /// normalizes homogeneous problems and keeps the margin maximization bounded.
    pub box_bound: f64,
    pub sdp: SdpOptions,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self {
            margin: DEFAULT_MARGIN,
            box_bound: 1e3,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolverStatus {
    /// Converged and re-verified.
    Success,
    /// Iteration limit or numerical trouble, but the final point re-verified.
    Inaccurate,
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub assignment: BTreeMap<String, Mat>,
    /// Smallest of `−λ_max` over the LMIs and `λ_min` over the positive variables.
    pub achieved_margin: f64,
    pub solver_status: SolverStatus,
    pub iterations: usize,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// `(name, λ_max)` per LMI.
    pub lmi_max_eigs: Vec<(String, f64)>,
    /// `(name, λ_min)` per positive-definite or positive-scalar variable.
    pub positive_min_eigs: Vec<(String, f64)>,
}

impl Certificate {
    pub fn margin(&self) -> f64 {
        let lmi = self.lmi_max_eigs.iter().map(|(_, v)| -v);
        let pos = self.positive_min_eigs.iter().map(|(_, v)| *v);
        lmi.chain(pos).fold(f64::INFINITY, f64::min)
    }

    pub fn satisfied(&self, margin: f64) -> bool {
        self.margin() >= margin
    }
}

fn certificate_for(problem: &LmiProblem, y: &[f64]) -> Result<Certificate, LmiError> {
    let mut lmi_max_eigs = Vec::new();
    for lmi in &problem.lmis {
        let m = lmi.eval(&problem.vars, y)?;
        lmi_max_eigs.push((lmi.name.clone(), linalg::sym_max_eig(&m)));
    }
    let positive_min_eigs = problem
        .vars
        .ids()
        .filter(|&id| problem.vars.get(id).is_positive())
        .map(|id| {
            (
                problem.vars.get(id).name.clone(),
                linalg::sym_min_eig(&problem.vars.value(id, y)),
            )
        })
        .collect();
    Ok(Certificate {
        lmi_max_eigs,
        positive_min_eigs,
    })
}

/// Re-evaluates every LMI at `assignment`, after checking each variable's
/// declared structure exactly.
pub fn verify_solution(problem: &LmiProblem, assignment: &BTreeMap<String, Mat>) -> Result<Certificate, LmiError> {
    let y = problem.vars.pack(assignment)?;
    certificate_for(problem, &y)
}

/// Maximizes a common margin `t` over `F_j(y) ⪯ −tI`, `V ⪰ tI`, then accepts
/// the point only if its independently recomputed margin reaches `opts.margin`.
pub fn solve_feasibility(problem: &LmiProblem, opts: &FeasibilityOptions) -> Result<LmiSolution, LmiError> {
    if !(opts.margin >= 0.0) || !(opts.box_bound > 0.0) {
        return Err(LmiError::InvalidParameter("margin must be ≥ 0 and box bound > 0".into()));
    }
    let vars = &problem.vars;
    let ny = vars.n_scalars();
    let t_idx = ny;
    let nv = ny + 1;
    let mut blocks = Vec::new();

    // F0 + Σ y_k F_k + t I ⪯ 0  ⇔  −F0 − Σ y_k F_k − t I ⪰ 0
    for lmi in &problem.lmis {
        let (f0, fk) = lmi.lower(vars);
        let d = f0.nrows();
        let mut a: Vec<Option<Mat>> = fk;
        a.push(Some(Mat::identity(d, d)));
        blocks.push(ConeBlock::Psd { c: -f0, a });
    }

    let mut lp_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for id in vars.ids() {
        let var = vars.get(id);
        match var.structure {
            Structure::SymmetricPositiveDefinite => {
                // V(y) − tI ⪰ 0  ⇔  0 − Σ y_k (−V_k) − t(I) ⪰ 0
                let (_, vk) = AffineExpr::var(vars, id).lower(vars);
                let mut a: Vec<Option<Mat>> = vk.into_iter().map(|m| m.map(|m| -linalg::symmetrize(&m))).collect();
                a.push(Some(Mat::identity(var.rows, var.cols)));
                blocks.push(ConeBlock::Psd {
                    c: Mat::zeros(var.rows, var.cols),
                    a,
                });
            }
            Structure::ScalarPositive => {
                if let Some((k, s)) = vars.entry(id, 0, 0) {
                    lp_rows.push((vec![(k, -s), (t_idx, 1.0)], 0.0));
                }
            }
            _ => {}
        }
    }
    for k in 0..ny {
        lp_rows.push((vec![(k, 1.0)], opts.box_bound));
        lp_rows.push((vec![(k, -1.0)], opts.box_bound));
    }
    if !lp_rows.is_empty() {
        let mut a = Mat::zeros(lp_rows.len(), nv);
        let mut c = DVector::zeros(lp_rows.len());
        for (r, (coeffs, rhs)) in lp_rows.iter().enumerate() {
            for &(k, v) in coeffs {
                a[(r, k)] += v;
            }
            c[r] = *rhs;
        }
        blocks.push(ConeBlock::Nonneg { c, a });
    }
    if problem.lmis.is_empty() && blocks.is_empty() {
        return Ok(LmiSolution {
            assignment: BTreeMap::new(),
            achieved_margin: f64::INFINITY,
            solver_status: SolverStatus::Success,
            iterations: 0,
            y: Vec::new(),
        });
    }

    let mut b = DVector::zeros(nv);
    b[t_idx] = 1.0;
    let prob = SdpProblem { b, blocks };
    let res = sdp::solve(&prob, &opts.sdp).map_err(LmiError::Structure)?;

    let y: Vec<f64> = res.y.iter().take(ny).copied().collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LmiError::NumericalFailure("solver returned non-finite values".into()));
    }
    let cert = certificate_for(problem, &y)?;
    let achieved = cert.margin();
    if achieved >= opts.margin {
        return Ok(LmiSolution {
            assignment: vars.assignment(&y),
            achieved_margin: achieved,
            solver_status: if res.status == SdpStatus::Converged {
                SolverStatus::Success
            } else {
                SolverStatus::Inaccurate
            },
            iterations: res.iterations,
            y,
        });
    }
    // a converged optimum below the margin certifies infeasibility up to
    // solver accuracy; one above it that fails re-verification does not.
    // A stalled run still certifies when one of its nearly feasible primal
    // iterates bounds the optimum below the margin: for any feasible y,
    // bᵀy ≤ ⟨C, X⟩ + ‖b − A(X)‖·‖y‖. The box caps every y_k, and t cannot
    // exceed the box either once a positive variable is present.
    let y_cap = opts.box_bound * (nv as f64).sqrt();
    let primal_bound = res
        .primal_history
        .iter()
        .map(|(pobj, resid)| pobj + resid * y_cap)
        .fold(f64::INFINITY, f64::min);
    let stalled_bound = res.dual_objective < opts.margin && primal_bound < opts.margin;
    let certified = match res.status {
        SdpStatus::Converged => res.dual_objective < opts.margin,
        SdpStatus::MaxIterations | SdpStatus::NumericalFailure => stalled_bound,
    };
    match certified {
        true => Err(LmiError::Infeasible {
            best_margin: achieved,
            upper_bound: if res.status == SdpStatus::Converged {
                res.primal_objective
            } else {
                primal_bound
            },
        }),
        false => Err(LmiError::NumericalFailure(format!(
            "solver stopped ({:?}) at margin {achieved:.3e} after {} iterations",
            res.status, res.iterations
        ))),
    }
}
