//! Assembly of the robust, H∞ and model-based LMI conditions.

use super::block::BlockLmi;
use super::expr::AffineExpr;
use super::feasibility::LmiProblem;
use super::variable::{MatrixVariable, TieTransform, VarId, VariableSet};
use super::LmiError;
use crate::descriptor::{AugmentedDescriptor, DescriptorData};
use crate::linalg::{padded_identity, Mat};

/// `s · M` for a scalar variable `s`.
pub fn scalar_times(vars: &VariableSet, id: VarId, m: &Mat) -> AffineExpr {
    assert_eq!(vars.shape(id), (1, 1), "scalar_times needs a 1×1 variable");
    let mut out = AffineExpr::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        if m.column(j).iter().all(|v| *v == 0.0) {
            continue;
        }
        let left = Mat::from_column_slice(m.nrows(), 1, m.column(j).as_slice());
        let right = Mat::from_fn(1, m.ncols(), |_, c| if c == j { 1.0 } else { 0.0 });
        out = out + (&left * AffineExpr::var(vars, id)) * &right;
    }
    out
}

fn var(vars: &VariableSet, id: VarId) -> AffineExpr {
    AffineExpr::var(vars, id)
}

/// Handles of the robust-condition variables.
#[derive(Debug, Clone, Copy)]
pub struct RobustVars {
    pub p: VarId,
    pub q: VarId,
    pub z: VarId,
    pub k: VarId,
    pub h3: VarId,
    pub h4: VarId,
    pub g3: VarId,
    pub g4: VarId,
    pub h: VarId,
    pub g: VarId,
    pub eps: VarId,
}

fn declare_robust_vars(vars: &mut VariableSet, n: usize, m: usize) -> Result<RobustVars, LmiError> {
    let p = vars.declare(MatrixVariable::positive_definite("P", 2 * n))?;
    let q = vars.declare(MatrixVariable::full("Q", 2 * n, n))?;
    let z = vars.declare(MatrixVariable::full("Z", m, n))?;
    let k = vars.declare(MatrixVariable::full("K", n, n))?;
    let h3 = vars.declare(MatrixVariable::full("H3", n, n))?;
    let h4 = vars.declare(MatrixVariable::full("H4", n, n))?;
    let g3 = vars.declare(MatrixVariable::full("G3", n, n))?;
    let g4 = vars.declare(MatrixVariable::full("G4", n, n))?;
    let structured = |name: &str, lower_left: VarId, lower_right: VarId| {
        MatrixVariable::full(name, 2 * n, 2 * n)
            .tie(0, 0, k, TieTransform::Identity)
            .zero_block(0, n, n, n)
            .tie(n, 0, lower_left, TieTransform::Identity)
            .tie(n, n, lower_right, TieTransform::Identity)
    };
    let h = vars.declare(structured("H", h3, h4))?;
    let g = vars.declare(structured("G", g3, g4))?;
    let eps = vars.declare(MatrixVariable::scalar_positive("eps"))?;
    Ok(RobustVars {
        p,
        q,
        z,
        k,
        h3,
        h4,
        g3,
        g4,
        h,
        g,
        eps,
    })
}

fn robust_lmi(
    name: &str,
    aug: &AugmentedDescriptor,
    vars: &VariableSet,
    rv: &RobustVars,
    bw_hat: Option<&Mat>,
) -> Result<BlockLmi, LmiError> {
    let n = aug.n();
    let a_me = &aug.a - &aug.e;
    let i_hat = padded_identity(2 * n, n).transpose();
    let s = Mat::identity(2 * n, 2 * n).columns(n, n).into_owned();
    let h = var(vars, rv.h);
    let g = var(vars, rv.g);
    let bzi = (&aug.b * var(vars, rv.z)) * &i_hat;
    let kbzi = (&aug.kb * var(vars, rv.z)) * &i_hat;

    let mut phi11 = (&a_me * h.clone()).sym2() + bzi.sym2();
    if let Some(bw) = bw_hat {
        phi11 = phi11 + scalar_times(vars, rv.eps, &(bw * bw.transpose()));
    }
    let phi12 = &aug.e * var(vars, rv.p) + var(vars, rv.q) * &s.transpose() - h.transpose()
        + &a_me * g.clone()
        + bzi;
    let phi13 = (&aug.ka * h + kbzi.clone()).transpose();
    let phi22 = -g.sym2() + var(vars, rv.p);
    let phi23 = (&aug.ka * g + kbzi).transpose();
    let phi33 = -scalar_times(vars, rv.eps, &Mat::identity(n, n));

    let mut lmi = BlockLmi::new(name, vec![2 * n, 2 * n, n]);
    lmi.set(0, 0, phi11)?;
    lmi.set(0, 1, phi12)?;
    lmi.set(0, 2, phi13)?;
    lmi.set(1, 1, phi22)?;
    lmi.set(1, 2, phi23)?;
    lmi.set(2, 2, phi33)?;
    Ok(lmi)
}

/// Data-only robust stabilization condition `Φ′ ≺ 0` (size 5n).
pub fn assemble_robust_lmi(aug: &AugmentedDescriptor) -> Result<(LmiProblem, RobustVars), LmiError> {
    let mut vars = VariableSet::new();
    let rv = declare_robust_vars(&mut vars, aug.n(), aug.m())?;
    let lmi = robust_lmi("robust", aug, &vars, &rv, None)?;
    Ok((LmiProblem { vars, lmis: vec![lmi] }, rv))
}

/// Model-side robust condition `Φ ≺ 0`: `Φ′` plus `ε·B̂wB̂wᵀ` in the leading
/// block, with `B̂w = [0; B_wd]`. Needs the true disturbance channel.
pub fn assemble_model_robust(aug: &AugmentedDescriptor, bwd: &Mat) -> Result<(LmiProblem, RobustVars), LmiError> {
    let n = aug.n();
    if bwd.nrows() != n {
        return Err(LmiError::Structure(format!("B_wd has {} rows, expected {n}", bwd.nrows())));
    }
    let mut bw_hat = Mat::zeros(2 * n, bwd.ncols());
    bw_hat.view_mut((n, 0), bwd.shape()).copy_from(bwd);
    let mut vars = VariableSet::new();
    let rv = declare_robust_vars(&mut vars, n, aug.m())?;
    let lmi = robust_lmi("robust-model", aug, &vars, &rv, Some(&bw_hat))?;
    Ok((LmiProblem { vars, lmis: vec![lmi] }, rv))
}

#[derive(Debug, Clone, Copy)]
pub struct HinfVars {
    pub p1: VarId,
    pub p4: VarId,
    pub s1: VarId,
    pub s2: VarId,
    pub k1: VarId,
    pub eps: VarId,
}

/// Data-only H∞ condition `Ψ ≺ 0` at attenuation level `gamma` (size 5n+p).
pub fn assemble_hinf_lmi(d: &DescriptorData, gamma: f64) -> Result<(LmiProblem, HinfVars), LmiError> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(LmiError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let (n, m, p) = (d.n(), d.m(), d.p());
    let mut vars = VariableSet::new();
    let hv = HinfVars {
        p1: vars.declare(MatrixVariable::positive_definite("P1", n))?,
        p4: vars.declare(MatrixVariable::positive_definite("P4", n))?,
        s1: vars.declare(MatrixVariable::full("S1", n, n))?,
        s2: vars.declare(MatrixVariable::full("S2", n, n))?,
        k1: vars.declare(MatrixVariable::full("K1", m, n))?,
        eps: vars.declare(MatrixVariable::scalar_positive("eps"))?,
    };
    let (p1, p4, s1, s2, k1) = (
        var(&vars, hv.p1),
        var(&vars, hv.p4),
        var(&vars, hv.s1),
        var(&vars, hv.s2),
        var(&vars, hv.k1),
    );
    let e = &d.e;
    let et = d.e.transpose();
    let ket = d.ke.transpose();

    let psi11 = AffineExpr::blocks(&[
        vec![
            Some(s1.sym2() - p1.clone()),
            Some(-(s1.clone() * &et) + s2.transpose()),
        ],
        vec![
            Some(-(e * s1.transpose()) + s2.clone()),
            Some(-(e * s2.transpose()) - s2.clone() * &et),
        ],
    ])?;
    let psi13 = AffineExpr::blocks(&[
        vec![Some(AffineExpr::zeros(n, n)), Some(-p4.clone())],
        vec![Some(&d.a * p1.clone() + &d.b * k1.clone()), Some(-(e * p4.clone()))],
    ])?;
    let psi14 = AffineExpr::blocks(&[vec![Some(-(s1 * &ket))], vec![Some(-(s2 * &ket))]])?;
    let psi23 = AffineExpr::blocks(&[vec![
        Some(&d.c * p1.clone() + &d.d * k1),
        Some(AffineExpr::zeros(p, n)),
    ]])?;
    let psi33 = -AffineExpr::blocks(&[vec![Some(p1), None], vec![None, Some(p4)]])?;
    let psi44 = -scalar_times(&vars, hv.eps, &Mat::identity(n, n));

    let mut lmi = BlockLmi::new("hinf", vec![2 * n, p, 2 * n, n]);
    lmi.set(0, 0, psi11)?;
    lmi.set(0, 2, psi13)?;
    lmi.set(0, 3, psi14)?;
    lmi.set(1, 1, AffineExpr::constant(Mat::identity(p, p) * (-gamma * gamma)))?;
    lmi.set(1, 2, psi23)?;
    lmi.set(2, 2, psi33)?;
    lmi.set(3, 3, psi44)?;
    Ok((LmiProblem { vars, lmis: vec![lmi] }, hv))
}

/// Descriptor realization `(Ê, Â, B̂w, Ĉ)` of the state-space system
/// `(a, bw, c)`, with the same shape as the augmented data model:
/// `Ê = diag(I, 0)`, `Â = [[0, I], [a, −I]]`, `B̂w = [0; bw]`, `Ĉ = [c, 0]`.
pub fn descriptor_realization(a: &Mat, bw: &Mat, c: &Mat) -> (Mat, Mat, Mat, Mat) {
    let n = a.nrows();
    let mut e_hat = Mat::zeros(2 * n, 2 * n);
    e_hat.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut a_hat = Mat::zeros(2 * n, 2 * n);
    a_hat.view_mut((0, n), (n, n)).fill_with_identity();
    a_hat.view_mut((n, 0), (n, n)).copy_from(a);
    a_hat.view_mut((n, n), (n, n)).copy_from(&-Mat::identity(n, n));
    let mut bw_hat = Mat::zeros(2 * n, bw.ncols());
    bw_hat.view_mut((n, 0), bw.shape()).copy_from(bw);
    let mut c_hat = Mat::zeros(c.nrows(), 2 * n);
    c_hat.view_mut((0, 0), c.shape()).copy_from(c);
    (e_hat, a_hat, bw_hat, c_hat)
}

#[derive(Debug, Clone, Copy)]
pub struct ModelHinfVars {
    pub p_hat: VarId,
    pub s_hat: VarId,
}

/// Descriptor bounded-real condition `Θ ≺ 0` for the closed loop
/// `(Ê, Â, B̂w, Ĉ)` at level `gamma`. `R̂ = [0; I_r]` spans the trailing rows
/// where `Ê` vanishes.
pub fn assemble_model_hinf(
    e_hat: &Mat,
    a_hat: &Mat,
    bw_hat: &Mat,
    c_hat: &Mat,
    gamma: f64,
) -> Result<(LmiProblem, ModelHinfVars), LmiError> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(LmiError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let nn = e_hat.nrows();
    let (q, p) = (bw_hat.ncols(), c_hat.nrows());
    if e_hat.shape() != (nn, nn) || a_hat.shape() != (nn, nn) || bw_hat.nrows() != nn || c_hat.ncols() != nn {
        return Err(LmiError::Structure("inconsistent descriptor realization".into()));
    }
    let r = (0..nn)
        .rev()
        .take_while(|&i| e_hat.row(i).iter().all(|v| *v == 0.0))
        .count();
    if r == 0 {
        return Err(LmiError::Structure("E has no zero rows to build R from".into()));
    }
    let r_hat = Mat::identity(nn, nn).columns(nn - r, r).into_owned();

    let mut vars = VariableSet::new();
    let mv = ModelHinfVars {
        p_hat: vars.declare(MatrixVariable::positive_definite("P", nn))?,
        s_hat: vars.declare(MatrixVariable::full("S", nn, r))?,
    };
    let ph = var(&vars, mv.p_hat);
    let sr = var(&vars, mv.s_hat) * &r_hat.transpose();
    let theta11 = (sr.clone() * a_hat).sym2() - (&e_hat.transpose() * ph.clone()) * e_hat;

    let mut lmi = BlockLmi::new("bounded-real", vec![nn, q, nn, p]);
    lmi.set(0, 0, theta11)?;
    lmi.set(0, 1, sr * bw_hat)?;
    lmi.set(0, 2, &a_hat.transpose() * ph.clone())?;
    lmi.set(0, 3, AffineExpr::constant(c_hat.transpose()))?;
    lmi.set(1, 1, AffineExpr::constant(Mat::identity(q, q) * (-gamma * gamma)))?;
    lmi.set(1, 2, &bw_hat.transpose() * ph.clone())?;
    lmi.set(2, 2, -ph)?;
    lmi.set(3, 3, AffineExpr::constant(-Mat::identity(p, p)))?;
    Ok((LmiProblem { vars, lmis: vec![lmi] }, mv))
}
