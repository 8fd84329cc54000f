use super::LmiError;
use crate::linalg::{self, Mat};

/// Sufficient condition for `Z + XΔY + YᵀΔᵀXᵀ ≺ 0` over all `ΔᵀΔ ⪯ I`:
/// `λ_max(Z + ε·XXᵀ + ε⁻¹·YᵀY) < 0`.
pub fn petersen_sufficient(z: &Mat, x: &Mat, y: &Mat, eps: f64) -> Result<bool, LmiError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(LmiError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let d = z.nrows();
    if z.ncols() != d || x.nrows() != d || y.ncols() != d {
        return Err(LmiError::Structure(format!(
            "incompatible shapes Z {:?}, X {:?}, Y {:?}",
            z.shape(),
            x.shape(),
            y.shape()
        )));
    }
    let bound = z + x * x.transpose() * eps + y.transpose() * y / eps;
    Ok(linalg::sym_max_eig(&bound) < 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_to_z_negative() {
        let z = -Mat::identity(3, 3);
        for eps in [1e-3, 1.0, 1e3] {
            assert!(petersen_sufficient(&z, &Mat::zeros(3, 2), &Mat::zeros(2, 3), eps).unwrap());
        }
    }

    #[test]
    fn non_strict_fails() {
        let z = Mat::zeros(2, 2);
        for eps in [1e-3, 1.0, 1e3] {
            assert!(!petersen_sufficient(&z, &Mat::zeros(2, 1), &Mat::zeros(1, 2), eps).unwrap());
        }
    }

    #[test]
    fn rejects_bad_eps() {
        let z = -Mat::identity(1, 1);
        let x = Mat::zeros(1, 1);
        assert!(petersen_sufficient(&z, &x, &x, 0.0).is_err());
        assert!(petersen_sufficient(&z, &x, &x, -1.0).is_err());
    }
}
