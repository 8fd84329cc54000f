//! Data-based descriptor model and its augmented form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{relative_residual, Experiment1Aggregate, Experiment2Aggregate};
use crate::linalg::{self, Mat};
use crate::plant::PlantModel;

/// Nominal descriptor matrices plus the shapers of the structured
/// uncertainty `ΔE = B_wd Δ K_e`, `ΔA = B_wd Δ K_a`, `ΔB = B_wd Δ K_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorData {
    #[serde(with = "linalg::serde_rows")]
    pub e: Mat,
    #[serde(with = "linalg::serde_rows")]
    pub a: Mat,
    #[serde(with = "linalg::serde_rows")]
    pub b: Mat,
    #[serde(with = "linalg::serde_rows")]
    pub c: Mat,
    #[serde(with = "linalg::serde_rows")]
    pub d: Mat,
    #[serde(with = "linalg::serde_rows")]
    pub ke: Mat,
    #[serde(with = "linalg::serde_rows")]
    pub ka: Mat,
    #[serde(with = "linalg::serde_rows")]
    pub kb: Mat,
    pub s0: f64,
    pub delta: f64,
    pub l: usize,
}

impl DescriptorData {
    pub fn n(&self) -> usize {
        self.e.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Certainty-equivalent state matrices `(E⁻¹A, E⁻¹B)` of the nominal model.
    pub fn nominal_state_space(&self) -> Option<(Mat, Mat)> {
        Some((linalg::solve(&self.e, &self.a)?, linalg::solve(&self.e, &self.b)?))
    }

    fn validate(&self) -> Result<()> {
        let (n, m, p) = (self.n(), self.m(), self.p());
        let checks: [(&str, &Mat, usize, usize); 8] = [
            ("E_d", &self.e, n, n),
            ("A_d", &self.a, n, n),
            ("B_d", &self.b, n, m),
            ("C_d", &self.c, p, n),
            ("D_d", &self.d, p, m),
            ("K_e", &self.ke, n, n),
            ("K_a", &self.ka, n, n),
            ("K_b", &self.kb, n, m),
        ];
        for (name, mat, r, c) in checks {
            if mat.nrows() != r || mat.ncols() != c {
                return Err(Error::dim(name, format!("{r}×{c}"), format!("{}×{}", mat.nrows(), mat.ncols())));
            }
        }
        if m > n {
            return Err(Error::InvalidInput(format!("m = {m} exceeds n = {n}")));
        }
        Ok(())
    }
}

fn inverse_checked(mat: &Mat, name: &'static str) -> Result<Mat> {
    let rc = linalg::rcond(mat);
    if !(rc > 0.0) {
        return Err(Error::Conditioning { name, rcond: rc });
    }
    linalg::inverse(mat).ok_or(Error::Conditioning { name, rcond: rc })
}

/// Replaces every model quantity of the descriptor form by data.
pub fn build_descriptor(
    agg1: &Experiment1Aggregate,
    agg2: &Experiment2Aggregate,
    s0: f64,
    delta: f64,
    l: usize,
) -> Result<DescriptorData> {
    let n = agg1.n_mat.nrows();
    let m = agg2.r0.ncols();
    if m > n {
        return Err(Error::InvalidInput(format!("m = {m} exceeds n = {n}")));
    }
    if agg2.r0.nrows() != n || agg2.r1.nrows() != n || agg2.xp.nrows() != n {
        return Err(Error::dim("experiment 2 aggregate", format!("{n} rows"), agg2.r0.nrows()));
    }
    if !(delta >= 0.0) || l == 0 {
        return Err(Error::InvalidInput("need delta ≥ 0 and l ≥ 1".into()));
    }
    let n_inv = inverse_checked(&agg1.n_mat, "N")?;
    let t_inv = inverse_checked(&agg1.t, "T")?;
    let x_inv = inverse_checked(&agg1.x, "X")?;

    let e = &agg1.m_mat * &n_inv;
    let a = &agg1.v * &t_inv;
    let b = &e * &agg2.r1 - &a * &agg2.r0;
    let c = &agg1.y * &x_inv;
    let d = &agg2.yp - &c * &agg2.xp;

    let scale = l as f64 * (delta * n as f64).sqrt();
    let ke = &n_inv * -scale;
    let ka = &t_inv * (-s0 * scale);
    let kb = (&n_inv * &agg2.r1 - &t_inv * &agg2.r0 * s0) * -scale
        - linalg::padded_identity(n, m) * (delta * m as f64).sqrt();

    Ok(DescriptorData { e, a, b, c, d, ke, ka, kb, s0, delta, l })
}

/// `Ê x̂⁺ = Â x̂ + B̂ u`, `y = Ĉ x̂ + D̂ u` with `x̂ = (x_k, x_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDescriptor {
    pub e: Mat,
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub ka: Mat,
    pub kb: Mat,
}

impl AugmentedDescriptor {
    /// Half the augmented state dimension.
    pub fn n(&self) -> usize {
        self.e.nrows() / 2
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
}

pub fn augment(d: &DescriptorData) -> Result<AugmentedDescriptor> {
    d.validate()?;
    let (n, m, p) = (d.n(), d.m(), d.p());
    let eye = Mat::identity(n, n);
    let zero = Mat::zeros(n, n);
    Ok(AugmentedDescriptor {
        e: linalg::block_matrix(&[vec![&eye, &zero], vec![&zero, &zero]]),
        a: linalg::block_matrix(&[vec![&zero, &eye], vec![&d.a, &(-&d.e)]]),
        b: linalg::block_matrix(&[vec![&Mat::zeros(n, m)], vec![&d.b]]),
        c: linalg::block_matrix(&[vec![&d.c, &Mat::zeros(p, n)]]),
        d: d.d.clone(),
        ka: linalg::block_matrix(&[vec![&d.ka, &(-&d.ke)]]),
        kb: d.kb.clone(),
    })
}

/// How far the data-based matrices sit from the exact noise-corrected
/// identities, using the true plant and recorded noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub e_residual: f64,
    pub a_residual: f64,
    pub b_residual: f64,
    pub c_residual: f64,
    pub d_residual: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        [self.e_residual, self.a_residual, self.b_residual, self.c_residual, self.d_residual]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Residuals of
/// `E* = E_d − B_wd W N⁻¹`, `E*A = A_d − s0 B_wd W T⁻¹`,
/// `E*B = B_d − B_wd (W (N⁻¹R₁ − s0 T⁻¹R₀) + W₀)`, `C_d = C`, `D_d = D`.
pub fn residual_report(
    d: &DescriptorData,
    plant: &PlantModel,
    agg1: &Experiment1Aggregate,
    agg2: &Experiment2Aggregate,
) -> Result<ResidualReport> {
    let truth = plant.true_descriptor(d.s0)?;
    let n_inv = inverse_checked(&agg1.n_mat, "N")?;
    let t_inv = inverse_checked(&agg1.t, "T")?;
    let w = &agg1.oracle_w;
    let noise_e = &truth.bwd * w * &n_inv;
    let noise_a = &truth.bwd * w * &t_inv * d.s0;
    let noise_b = &truth.bwd * (w * (&n_inv * &agg2.r1 - &t_inv * &agg2.r0 * d.s0) + &agg2.oracle_w0);
    Ok(ResidualReport {
        e_residual: relative_residual(&d.e, &(&truth.e + noise_e)),
        a_residual: relative_residual(&d.a, &(&truth.a + noise_a)),
        b_residual: relative_residual(&d.b, &(&truth.b + noise_b)),
        c_residual: relative_residual(&d.c, plant.c()),
        d_residual: relative_residual(&d.d, plant.d()),
    })
}

/// `Δ_F = W / (l √(δ n))`, the normalized uncertainty implied by the
/// recorded noise. Simulator-side only.
pub fn implied_uncertainty(d: &DescriptorData, oracle_w: &Mat) -> Mat {
    oracle_w / (d.l as f64 * (d.delta * d.n() as f64).sqrt())
}
