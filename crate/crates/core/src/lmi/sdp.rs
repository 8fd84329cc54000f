//! Dense primal-dual interior-point solver for small semidefinite programs.
//!
//! Problems are stated in the LMI-friendly dual form
//!
//! ```text
//! maximize  bᵀy   subject to   Z = C − Σ yᵢ Aᵢ ⪰ 0
//! ```
//!
//! over a block-diagonal cone made of PSD blocks and nonnegative-orthant
//! blocks. The paired primal is `min ⟨C, X⟩ s.t. ⟨Aᵢ, X⟩ = bᵢ, X ⪰ 0`.
//! Iterations follow the HKM search direction with a Mehrotra
//! predictor-corrector step and an infeasible start.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

type Mat = DMatrix<f64>;
type Vector = DVector<f64>;

/// One diagonal block of the cone.
#[derive(Debug, Clone)]
pub enum ConeBlock {
    /// `C − Σ yᵢ Aᵢ ⪰ 0`; `a[i]` is `None` when variable `i` does not appear.
    Psd { c: Mat, a: Vec<Option<Mat>> },
    /// `c − A y ≥ 0` elementwise, `a` is `rows × n_vars`.
    Nonneg { c: Vector, a: Mat },
}

impl ConeBlock {
    fn size(&self) -> usize {
        match self {
            ConeBlock::Psd { c, .. } => c.nrows(),
            ConeBlock::Nonneg { c, .. } => c.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub b: Vector,
    pub blocks: Vec<ConeBlock>,
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Print one line per iteration to stderr.
    pub verbose: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iter: 120,
            tol: 1e-8,
            step_fraction: 0.98,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Converged,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpResult {
    pub y: Vector,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    /// `(⟨C, X⟩, ‖b − A(X)‖)` for every primal iterate; each one bounds the
    /// dual optimum once the size of `y` is known.
    pub primal_history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
enum BlockVal {
    Psd(Mat),
    Nonneg(Vector),
}

impl BlockVal {
    fn dot(&self, other: &BlockVal) -> f64 {
        match (self, other) {
            (BlockVal::Psd(a), BlockVal::Psd(b)) => a.dot(b),
            (BlockVal::Nonneg(a), BlockVal::Nonneg(b)) => a.dot(b),
            _ => unreachable!("block kinds always line up"),
        }
    }

    fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    fn axpy(&mut self, alpha: f64, other: &BlockVal) {
        match (self, other) {
            (BlockVal::Psd(a), BlockVal::Psd(b)) => *a += b * alpha,
            (BlockVal::Nonneg(a), BlockVal::Nonneg(b)) => *a += b * alpha,
            _ => unreachable!("block kinds always line up"),
        }
    }
}

impl SdpProblem {
    pub fn n_vars(&self) -> usize {
        self.b.len()
    }

    fn validate(&self) -> Result<(), String> {
        let nv = self.n_vars();
        for (k, blk) in self.blocks.iter().enumerate() {
            match blk {
                ConeBlock::Psd { c, a } => {
                    if c.nrows() != c.ncols() || a.len() != nv {
                        return Err(format!("PSD block {k} is malformed"));
                    }
                    if a.iter().flatten().any(|m| m.shape() != c.shape()) {
                        return Err(format!("PSD block {k} has a coefficient of the wrong shape"));
                    }
                }
                ConeBlock::Nonneg { c, a } => {
                    if a.nrows() != c.len() || a.ncols() != nv {
                        return Err(format!("orthant block {k} is malformed"));
                    }
                }
            }
        }
        Ok(())
    }

    /// `Σ yᵢ Aᵢ` per block.
    fn apply_adjoint(&self, y: &Vector) -> Vec<BlockVal> {
        self.blocks
            .iter()
            .map(|blk| match blk {
                ConeBlock::Psd { c, a } => {
                    let mut out = Mat::zeros(c.nrows(), c.ncols());
                    for (ai, yi) in a.iter().zip(y.iter()) {
                        if let Some(ai) = ai {
                            if *yi != 0.0 {
                                out += ai * *yi;
                            }
                        }
                    }
                    BlockVal::Psd(out)
                }
                ConeBlock::Nonneg { a, .. } => BlockVal::Nonneg(a * y),
            })
            .collect()
    }

    /// `(⟨Aᵢ, X⟩)ᵢ`
    fn apply(&self, xs: &[BlockVal]) -> Vector {
        let mut out = Vector::zeros(self.n_vars());
        for (blk, x) in self.blocks.iter().zip(xs) {
            match (blk, x) {
                (ConeBlock::Psd { a, .. }, BlockVal::Psd(x)) => {
                    for (i, ai) in a.iter().enumerate() {
                        if let Some(ai) = ai {
                            out[i] += ai.dot(x);
                        }
                    }
                }
                (ConeBlock::Nonneg { a, .. }, BlockVal::Nonneg(x)) => out += a.transpose() * x,
                _ => unreachable!(),
            }
        }
        out
    }

    /// `Z = C − Σ yᵢ Aᵢ` per block.
    pub fn slack(&self, y: &Vector) -> Vec<(bool, Mat)> {
        let aty = self.apply_adjoint(y);
        self.blocks
            .iter()
            .zip(aty)
            .map(|(blk, v)| match (blk, v) {
                (ConeBlock::Psd { c, .. }, BlockVal::Psd(v)) => (true, c - v),
                (ConeBlock::Nonneg { c, .. }, BlockVal::Nonneg(v)) => {
                    let z = c - v;
                    (false, Mat::from_column_slice(z.len(), 1, z.as_slice()))
                }
                _ => unreachable!(),
            })
            .collect()
    }
}

fn sym(m: Mat) -> Mat {
    (&m + m.transpose()) * 0.5
}

/// Largest `α` with `x + α dx` still in the cone interior (∞ if unbounded).
fn max_step(x: &BlockVal, dx: &BlockVal) -> Option<f64> {
    match (x, dx) {
        (BlockVal::Psd(x), BlockVal::Psd(dx)) => {
            let chol = Cholesky::new(x.clone())?;
            let l = chol.l();
            let linv_dx = l.solve_lower_triangular(dx)?;
            let w = l.solve_lower_triangular(&linv_dx.transpose())?;
            let lam = SymmetricEigen::new(sym(w)).eigenvalues.min();
            Some(if lam >= 0.0 { f64::INFINITY } else { -1.0 / lam })
        }
        (BlockVal::Nonneg(x), BlockVal::Nonneg(dx)) => Some(
            x.iter()
                .zip(dx.iter())
                .filter(|(_, d)| **d < 0.0)
                .map(|(v, d)| -v / d)
                .fold(f64::INFINITY, f64::min),
        ),
        _ => unreachable!(),
    }
}

struct Factors {
    zinv: Vec<BlockVal>,
    schur: Cholesky<f64, Dyn>,
}

struct Direction {
    dy: Vector,
    dx: Vec<BlockVal>,
    dz: Vec<BlockVal>,
}

struct Solver<'a> {
    prob: &'a SdpProblem,
    opts: &'a SdpOptions,
    nu: f64,
}

impl Solver<'_> {
    fn initial_point(&self) -> (Vec<BlockVal>, Vector, Vec<BlockVal>) {
        let b = &self.prob.b;
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        for blk in &self.prob.blocks {
            let s = blk.size() as f64;
            let (a_norms, c_norm): (Vec<f64>, f64) = match blk {
                ConeBlock::Psd { c, a } => (a.iter().map(|m| m.as_ref().map_or(0.0, |m| m.norm())).collect(), c.norm()),
                ConeBlock::Nonneg { c, a } => (a.column_iter().map(|col| col.norm()).collect(), c.norm()),
            };
            let xi = a_norms
                .iter()
                .zip(b.iter())
                .map(|(an, bi)| s * (1.0 + bi.abs()) / (1.0 + an))
                .fold(10.0f64.max(s.sqrt()), f64::max);
            let eta = a_norms.iter().copied().fold(c_norm, f64::max).max(10.0).max(s.sqrt());
            match blk {
                ConeBlock::Psd { c, .. } => {
                    let n = c.nrows();
                    xs.push(BlockVal::Psd(Mat::identity(n, n) * xi));
                    zs.push(BlockVal::Psd(Mat::identity(n, n) * eta));
                }
                ConeBlock::Nonneg { c, .. } => {
                    xs.push(BlockVal::Nonneg(Vector::from_element(c.len(), xi)));
                    zs.push(BlockVal::Nonneg(Vector::from_element(c.len(), eta)));
                }
            }
        }
        (xs, Vector::zeros(self.prob.n_vars()), zs)
    }

    fn factor(&self, xs: &[BlockVal], zs: &[BlockVal]) -> Option<Factors> {
        let nv = self.prob.n_vars();
        let mut schur = Mat::zeros(nv, nv);
        let mut zinv = Vec::with_capacity(zs.len());
        for ((blk, x), z) in self.prob.blocks.iter().zip(xs).zip(zs) {
            match (blk, x, z) {
                (ConeBlock::Psd { a, .. }, BlockVal::Psd(x), BlockVal::Psd(z)) => {
                    let zi = Cholesky::new(z.clone())?.inverse();
                    let present: Vec<usize> = (0..nv).filter(|&i| a[i].is_some()).collect();
                    for &j in &present {
                        let t = x * a[j].as_ref().unwrap() * &zi;
                        for &i in &present {
                            if i <= j {
                                schur[(i, j)] += a[i].as_ref().unwrap().dot(&t);
                            }
                        }
                    }
                    zinv.push(BlockVal::Psd(zi));
                }
                (ConeBlock::Nonneg { a, .. }, BlockVal::Nonneg(x), BlockVal::Nonneg(z)) => {
                    if z.iter().any(|v| !(*v > 0.0)) {
                        return None;
                    }
                    let ratio = x.component_div(z);
                    let mut scaled = a.clone();
                    for (mut row, r) in scaled.row_iter_mut().zip(ratio.iter()) {
                        row *= *r;
                    }
                    let contrib = a.transpose() * scaled;
                    for j in 0..nv {
                        for i in 0..=j {
                            schur[(i, j)] += contrib[(i, j)];
                        }
                    }
                    zinv.push(BlockVal::Nonneg(z.map(|v| 1.0 / v)));
                }
                _ => unreachable!(),
            }
        }
        for j in 0..nv {
            for i in 0..j {
                schur[(j, i)] = schur[(i, j)];
            }
        }
        let max_diag = schur.diagonal().iter().copied().fold(0.0f64, f64::max).max(1e-300);
        let mut shift = 0.0;
        for _ in 0..6 {
            let mut trial = schur.clone();
            for i in 0..nv {
                trial[(i, i)] += shift;
            }
            if let Some(chol) = Cholesky::new(trial) {
                return Some(Factors { zinv, schur: chol });
            }
            shift = if shift == 0.0 { max_diag * 1e-14 } else { shift * 100.0 };
        }
        None
    }

    /// Direction for the linearized centrality target `G = XZ + ΔX Z + X ΔZ`.
    fn direction(
        &self,
        xs: &[BlockVal],
        factors: &Factors,
        rp: &Vector,
        rd: &[BlockVal],
        target: &[BlockVal],
    ) -> Option<Direction> {
        // rhs = r_p + A(sym(X R_d Z⁻¹ − G Z⁻¹))
        let aux: Vec<BlockVal> = xs
            .iter()
            .zip(rd)
            .zip(target)
            .zip(&factors.zinv)
            .map(|(((x, r), g), zi)| match (x, r, g, zi) {
                (BlockVal::Psd(x), BlockVal::Psd(r), BlockVal::Psd(g), BlockVal::Psd(zi)) => {
                    BlockVal::Psd(sym((x * r - g) * zi))
                }
                (BlockVal::Nonneg(x), BlockVal::Nonneg(r), BlockVal::Nonneg(g), BlockVal::Nonneg(zi)) => {
                    BlockVal::Nonneg((x.component_mul(r) - g).component_mul(zi))
                }
                _ => unreachable!(),
            })
            .collect();
        let rhs = rp + self.prob.apply(&aux);
        let dy = factors.schur.solve(&rhs);
        if dy.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let aty = self.prob.apply_adjoint(&dy);
        let dz: Vec<BlockVal> = rd
            .iter()
            .zip(aty)
            .map(|(r, a)| {
                let mut d = r.clone();
                d.axpy(-1.0, &a);
                d
            })
            .collect();
        let dx = xs
            .iter()
            .zip(&dz)
            .zip(target)
            .zip(&factors.zinv)
            .map(|(((x, dz), g), zi)| match (x, dz, g, zi) {
                (BlockVal::Psd(x), BlockVal::Psd(dz), BlockVal::Psd(g), BlockVal::Psd(zi)) => {
                    BlockVal::Psd(sym((g - x * dz) * zi))
                }
                (BlockVal::Nonneg(x), BlockVal::Nonneg(dz), BlockVal::Nonneg(g), BlockVal::Nonneg(zi)) => {
                    BlockVal::Nonneg((g - x.component_mul(dz)).component_mul(zi))
                }
                _ => unreachable!(),
            })
            .collect();
        Some(Direction { dy, dx, dz })
    }

    fn step_length(&self, vals: &[BlockVal], dirs: &[BlockVal]) -> Option<f64> {
        let mut alpha = f64::INFINITY;
        for (v, d) in vals.iter().zip(dirs) {
            alpha = alpha.min(max_step(v, d)?);
        }
        Some(alpha)
    }

    fn run(&self) -> SdpResult {
        let prob = self.prob;
        let c_vals: Vec<BlockVal> = prob
            .blocks
            .iter()
            .map(|b| match b {
                ConeBlock::Psd { c, .. } => BlockVal::Psd(c.clone()),
                ConeBlock::Nonneg { c, .. } => BlockVal::Nonneg(c.clone()),
            })
            .collect();
        let b_norm = prob.b.norm();
        let c_norm = c_vals.iter().map(BlockVal::norm_sq).sum::<f64>().sqrt();
        let (mut xs, mut y, mut zs) = self.initial_point();

        let mut status = SdpStatus::MaxIterations;
        let mut iterations = 0;
        let (mut pinf, mut dinf);
        let mut primal_history = Vec::new();
        loop {
            let rp = &prob.b - prob.apply(&xs);
            let aty = prob.apply_adjoint(&y);
            let rd: Vec<BlockVal> = c_vals
                .iter()
                .zip(&zs)
                .zip(aty)
                .map(|((c, z), a)| {
                    let mut r = c.clone();
                    r.axpy(-1.0, z);
                    r.axpy(-1.0, &a);
                    r
                })
                .collect();
            let gap: f64 = xs.iter().zip(&zs).map(|(x, z)| x.dot(z)).sum();
            let pobj: f64 = c_vals.iter().zip(&xs).map(|(c, x)| c.dot(x)).sum();
            let dobj = prob.b.dot(&y);
            primal_history.push((pobj, rp.norm()));
            pinf = rp.norm() / (1.0 + b_norm);
            dinf = rd.iter().map(BlockVal::norm_sq).sum::<f64>().sqrt() / (1.0 + c_norm);
            let rel_gap = gap.max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
            if self.opts.verbose {
                eprintln!(
                    "{iterations:3} pobj {pobj:+.6e} dobj {dobj:+.6e} pinf {pinf:.2e} dinf {dinf:.2e} gap {rel_gap:.2e}"
                );
            }
            if pinf <= self.opts.tol && dinf <= self.opts.tol && rel_gap <= self.opts.tol {
                status = SdpStatus::Converged;
                break;
            }
            if iterations >= self.opts.max_iter {
                break;
            }
            iterations += 1;
            let mu = gap / self.nu;

            let Some(factors) = self.factor(&xs, &zs) else {
                status = SdpStatus::NumericalFailure;
                break;
            };

            // predictor: target G = −XZ
            let neg_xz: Vec<BlockVal> = xs
                .iter()
                .zip(&zs)
                .map(|(x, z)| match (x, z) {
                    (BlockVal::Psd(x), BlockVal::Psd(z)) => BlockVal::Psd(-(x * z)),
                    (BlockVal::Nonneg(x), BlockVal::Nonneg(z)) => BlockVal::Nonneg(-x.component_mul(z)),
                    _ => unreachable!(),
                })
                .collect();
            let Some(aff) = self.direction(&xs, &factors, &rp, &rd, &neg_xz) else {
                status = SdpStatus::NumericalFailure;
                break;
            };
            let (Some(ap), Some(ad)) = (self.step_length(&xs, &aff.dx), self.step_length(&zs, &aff.dz)) else {
                status = SdpStatus::NumericalFailure;
                break;
            };
            let ap = ap.min(1.0);
            let ad = ad.min(1.0);
            let mut gap_aff = 0.0;
            for ((x, dx), (z, dz)) in xs.iter().zip(&aff.dx).zip(zs.iter().zip(&aff.dz)) {
                let mut xn = x.clone();
                xn.axpy(ap, dx);
                let mut zn = z.clone();
                zn.axpy(ad, dz);
                gap_aff += xn.dot(&zn);
            }
            let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

            // corrector: G = σμI − XZ − ΔXₐΔZₐ
            let target: Vec<BlockVal> = neg_xz
                .iter()
                .zip(aff.dx.iter().zip(&aff.dz))
                .map(|(g, (dx, dz))| match (g, dx, dz) {
                    (BlockVal::Psd(g), BlockVal::Psd(dx), BlockVal::Psd(dz)) => {
                        let n = g.nrows();
                        BlockVal::Psd(g + Mat::identity(n, n) * (sigma * mu) - dx * dz)
                    }
                    (BlockVal::Nonneg(g), BlockVal::Nonneg(dx), BlockVal::Nonneg(dz)) => {
                        BlockVal::Nonneg(g.add_scalar(sigma * mu) - dx.component_mul(dz))
                    }
                    _ => unreachable!(),
                })
                .collect();
            let Some(dir) = self.direction(&xs, &factors, &rp, &rd, &target) else {
                status = SdpStatus::NumericalFailure;
                break;
            };
            let (Some(ap), Some(ad)) = (self.step_length(&xs, &dir.dx), self.step_length(&zs, &dir.dz)) else {
                status = SdpStatus::NumericalFailure;
                break;
            };
            let ap = (self.opts.step_fraction * ap).min(1.0);
            let ad = (self.opts.step_fraction * ad).min(1.0);
            for (x, dx) in xs.iter_mut().zip(&dir.dx) {
                x.axpy(ap, dx);
            }
            for (z, dz) in zs.iter_mut().zip(&dir.dz) {
                z.axpy(ad, dz);
            }
            y += &dir.dy * ad;
            if ap < 1e-12 && ad < 1e-12 {
                status = SdpStatus::NumericalFailure;
                break;
            }
        }
        let pobj: f64 = c_vals.iter().zip(&xs).map(|(c, x)| c.dot(x)).sum();
        SdpResult {
            dual_objective: prob.b.dot(&y),
            y,
            primal_objective: pobj,
            iterations,
            status,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            primal_history,
        }
    }
}

/// Solves `max bᵀy s.t. C − Σ yᵢAᵢ ⪰ 0`.
pub fn solve(prob: &SdpProblem, opts: &SdpOptions) -> Result<SdpResult, String> {
    prob.validate()?;
    let nu = prob.blocks.iter().map(ConeBlock::size).sum::<usize>() as f64;
    if nu == 0.0 {
        return Err("problem has no cone blocks".into());
    }
    Ok(Solver { prob, opts, nu }.run())
}
