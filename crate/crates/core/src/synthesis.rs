//! Controller gains from the robust and H∞ LMI conditions.

use serde::{Deserialize, Serialize};

use crate::descriptor::{augment, DescriptorData};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::lmi::{
    self, assemble_hinf_lmi, assemble_robust_lmi, FeasibilityOptions, LmiError, LmiProblem, LmiSolution,
};

/// Below this reciprocal condition number `K` is treated as singular.
pub const EXTRACTION_RCOND_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Robust,
    Hinf,
}

/// Where a gain came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Provenance {
    pub dataset_hash: Option<String>,
    pub seed: Option<u64>,
    pub delta: f64,
    pub s0: f64,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerGain {
    #[serde(rename = "F", with = "linalg::serde_rows")]
    pub f: Mat,
    pub method: Method,
    pub gamma: Option<f64>,
    pub eps: f64,
    /// `(LMI name, λ_max)` at the returned solution.
    pub margins: Vec<(String, f64)>,
    pub achieved_margin: f64,
    #[serde(default)]
    pub provenance: Provenance,
}

/// A gain together with the LMI problem and solution it was read from.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub gain: ControllerGain,
    pub problem: LmiProblem,
    pub solution: LmiSolution,
}

fn solve(problem: &LmiProblem, opts: &FeasibilityOptions) -> Result<(LmiSolution, Vec<(String, f64)>)> {
    let sol = lmi::solve_feasibility(problem, opts).map_err(|e| match e {
        LmiError::Infeasible { best_margin, .. } => Error::SynthesisInfeasible { best_margin },
        other => Error::Lmi(other),
    })?;
    let cert = lmi::verify_solution(problem, &sol.assignment)?;
    if !cert.satisfied(opts.margin / 2.0) {
        return Err(Error::Lmi(LmiError::NumericalFailure(format!(
            "returned point re-verifies at margin {:.3e}",
            cert.margin()
        ))));
    }
    Ok((sol, cert.lmi_max_eigs))
}

fn value<'a>(sol: &'a LmiSolution, name: &str) -> &'a Mat {
    &sol.assignment[name]
}

fn provenance(d: &DescriptorData) -> Provenance {
    Provenance {
        dataset_hash: None,
        seed: None,
        delta: d.delta,
        s0: d.s0,
        l: d.l,
    }
}

/// Robust stabilizing gain `F = Z K⁻¹` from the data-only robust condition.
pub fn synth_robust(d: &DescriptorData, opts: &FeasibilityOptions) -> Result<ControllerGain> {
    synth_robust_full(d, opts).map(|s| s.gain)
}

pub fn synth_robust_full(d: &DescriptorData, opts: &FeasibilityOptions) -> Result<Synthesis> {
    let aug = augment(d)?;
    let (problem, _) = assemble_robust_lmi(&aug)?;
    let (solution, margins) = solve(&problem, opts)?;
    let k = value(&solution, "K");
    let rc = linalg::rcond(k);
    if !(rc >= EXTRACTION_RCOND_FLOOR) {
        return Err(Error::ExtractionSingular { name: "K", rcond: rc });
    }
    let f = linalg::right_divide(value(&solution, "Z"), k).ok_or(Error::ExtractionSingular { name: "K", rcond: rc })?;
    let gain = ControllerGain {
        f,
        method: Method::Robust,
        gamma: None,
        eps: value(&solution, "eps")[(0, 0)],
        margins,
        achieved_margin: solution.achieved_margin,
        provenance: provenance(d),
    };
    Ok(Synthesis {
        gain,
        problem,
        solution,
    })
}

/// H∞ gain `F = K₁ P₁⁻¹` from the data-only H∞ condition at level `gamma`.
pub fn synth_hinf(d: &DescriptorData, gamma: f64, opts: &FeasibilityOptions) -> Result<ControllerGain> {
    synth_hinf_full(d, gamma, opts).map(|s| s.gain)
}

pub fn synth_hinf_full(d: &DescriptorData, gamma: f64, opts: &FeasibilityOptions) -> Result<Synthesis> {
    let (problem, _) = assemble_hinf_lmi(d, gamma)?;
    let (solution, margins) = solve(&problem, opts)?;
    let p1 = value(&solution, "P1");
    let rc = linalg::rcond(p1);
    if !(rc >= EXTRACTION_RCOND_FLOOR) {
        return Err(Error::ExtractionSingular { name: "P1", rcond: rc });
    }
    let f = linalg::right_divide(value(&solution, "K1"), p1).ok_or(Error::ExtractionSingular { name: "P1", rcond: rc })?;
    let gain = ControllerGain {
        f,
        method: Method::Hinf,
        gamma: Some(gamma),
        eps: value(&solution, "eps")[(0, 0)],
        margins,
        achieved_margin: solution.achieved_margin,
        provenance: provenance(d),
    };
    Ok(Synthesis {
        gain,
        problem,
        solution,
    })
}
