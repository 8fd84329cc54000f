//! Ground-truth plant simulation.
//!
//! Everything here is simulator-side: the synthesis path only ever sees the
//! aggregates produced by [`crate::experiments`].

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::rng::{self, label};

pub type Vector = DVector<f64>;

/// Reciprocal condition number below which `s0·I − A` counts as singular.
pub const SHIFT_RCOND_FLOOR: f64 = 1e-10;

/// Discrete LTI plant `x⁺ = A x + B u + B_w w`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlantJson", into = "PlantJson")]
pub struct PlantModel {
    a: Mat,
    b: Mat,
    bw: Mat,
    c: Mat,
    d: Mat,
}

impl PlantModel {
    pub fn new(a: Mat, b: Mat, bw: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::dim("plant A", "square n×n with n ≥ 1", shape(&a)));
        }
        let m = b.ncols();
        let q = bw.ncols();
        let p = c.nrows();
        if b.nrows() != n || m == 0 {
            return Err(Error::dim("plant B", format!("{n}×m, m ≥ 1"), shape(&b)));
        }
        if bw.nrows() != n || q == 0 {
            return Err(Error::dim("plant Bw", format!("{n}×q, q ≥ 1"), shape(&bw)));
        }
        if c.ncols() != n || p == 0 {
            return Err(Error::dim("plant C", format!("p×{n}, p ≥ 1"), shape(&c)));
        }
        if d.nrows() != p || d.ncols() != m {
            return Err(Error::dim("plant D", format!("{p}×{m}"), shape(&d)));
        }
        if m > n {
            return Err(Error::InvalidInput(format!(
                "input dimension m = {m} exceeds state dimension n = {n}"
            )));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("Bw", &bw), ("C", &c), ("D", &d)] {
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("plant {name} has a non-finite entry")));
            }
        }
        Ok(Self { a, b, bw, c, d })
    }

    /// The unstable third-order benchmark plant with two inputs and two
    /// outputs used throughout the examples and the reproduction harness.
    pub fn benchmark() -> Self {
        let a = Mat::from_row_slice(
            3,
            3,
            &[0.850, -0.038, -0.380, 0.735, 0.815, 1.594, -0.664, 0.697, -0.064],
        );
        let b = Mat::from_row_slice(3, 2, &[1.431, 0.705, 1.620, -1.129, 0.913, 0.369]);
        let c = Mat::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        Self::new(a, b, Mat::identity(3, 3), c, Mat::identity(2, 2))
            .expect("benchmark plant is well-formed")
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn bw(&self) -> &Mat {
        &self.bw
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn q(&self) -> usize {
        self.bw.ncols()
    }

    /// One step of the plant equations.
    pub fn step(&self, x: &Vector, u: &Vector, w: &Vector) -> Result<(Vector, Vector)> {
        self.check_vec("state", x, self.n())?;
        self.check_vec("input", u, self.m())?;
        self.check_vec("noise", w, self.q())?;
        Ok(self.step_unchecked(x, u, w))
    }

    fn step_unchecked(&self, x: &Vector, u: &Vector, w: &Vector) -> (Vector, Vector) {
        let x_next = &self.a * x + &self.b * u + &self.bw * w;
        let y = &self.c * x + &self.d * u;
        (x_next, y)
    }

    fn check_vec(&self, what: &str, v: &Vector, len: usize) -> Result<()> {
        if v.len() != len {
            return Err(Error::dim(format!("{what} vector"), len, v.len()));
        }
        Ok(())
    }

    /// Open-loop simulation driven by `inputs`; noise for step `k` is draw `k`
    /// of `noise`.
    pub fn simulate(&self, x0: &Vector, inputs: &[Vector], noise: &NoiseProcess) -> Result<Trajectory> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput("input sequence is empty".into()));
        }
        self.check_vec("initial state", x0, self.n())?;
        for u in inputs {
            self.check_vec("input", u, self.m())?;
        }
        let mut traj = Trajectory::with_capacity(inputs.len());
        traj.states.push(x0.clone());
        let mut x = x0.clone();
        for (k, u) in inputs.iter().enumerate() {
            let w = noise.sample(self.q(), k as u64);
            let (x_next, y) = self.step_unchecked(&x, u, &w);
            traj.inputs.push(u.clone());
            traj.noises.push(w);
            traj.outputs.push(y);
            traj.states.push(x_next.clone());
            x = x_next;
        }
        Ok(traj)
    }

    /// Closed-loop simulation under `u_k = F x_k` for `steps` steps.
    pub fn simulate_closed_loop(
        &self,
        gain: &Mat,
        x0: &Vector,
        noise: &NoiseProcess,
        steps: usize,
    ) -> Result<Trajectory> {
        if steps == 0 {
            return Err(Error::InvalidInput("closed-loop horizon must be at least 1".into()));
        }
        if gain.nrows() != self.m() || gain.ncols() != self.n() {
            return Err(Error::dim("feedback gain", format!("{}×{}", self.m(), self.n()), shape(gain)));
        }
        self.check_vec("initial state", x0, self.n())?;
        let mut traj = Trajectory::with_capacity(steps);
        traj.states.push(x0.clone());
        let mut x = x0.clone();
        for k in 0..steps {
            let u = gain * &x;
            let w = noise.sample(self.q(), k as u64);
            let (x_next, y) = self.step_unchecked(&x, &u, &w);
            traj.inputs.push(u);
            traj.noises.push(w);
            traj.outputs.push(y);
            traj.states.push(x_next.clone());
            x = x_next;
        }
        Ok(traj)
    }

    /// Model-side descriptor matrices for shift `s0`. Oracle for tests and
    /// verification only.
    pub fn true_descriptor(&self, s0: f64) -> Result<TrueDescriptor> {
        let n = self.n();
        let shifted = Mat::identity(n, n) * s0 - &self.a;
        let rc = linalg::rcond(&shifted);
        if !(rc >= SHIFT_RCOND_FLOOR) {
            return Err(Error::SingularShift { rcond: rc });
        }
        let e = linalg::inverse(&shifted).ok_or(Error::SingularShift { rcond: rc })?;
        Ok(TrueDescriptor {
            a: &e * &self.a,
            b: &e * &self.b,
            bwd: &e * &self.bw,
            e,
        })
    }

    /// Closed-loop state matrix `A + B F`.
    pub fn closed_loop(&self, gain: &Mat) -> Mat {
        &self.a + &self.b * gain
    }
}

fn shape(m: &Mat) -> String {
    format!("{}×{}", m.nrows(), m.ncols())
}

#[derive(Serialize, Deserialize)]
struct PlantJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "Bw")]
    bw: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

impl TryFrom<PlantJson> for PlantModel {
    type Error = Error;

    fn try_from(j: PlantJson) -> Result<Self> {
        let conv = |name: &str, rows: &[Vec<f64>]| {
            linalg::from_rows(rows).ok_or_else(|| Error::InvalidInput(format!("plant {name} has ragged rows")))
        };
        PlantModel::new(
            conv("A", &j.a)?,
            conv("B", &j.b)?,
            conv("Bw", &j.bw)?,
            conv("C", &j.c)?,
            conv("D", &j.d)?,
        )
    }
}

impl From<PlantModel> for PlantJson {
    fn from(p: PlantModel) -> Self {
        PlantJson {
            a: linalg::to_rows(&p.a),
            b: linalg::to_rows(&p.b),
            bw: linalg::to_rows(&p.bw),
            c: linalg::to_rows(&p.c),
            d: linalg::to_rows(&p.d),
        }
    }
}

/// `E* = (s0·I − A)⁻¹` and the matching `A*`, `B*`, `B_wd`.
#[derive(Debug, Clone)]
pub struct TrueDescriptor {
    pub e: Mat,
    pub a: Mat,
    pub b: Mat,
    pub bwd: Mat,
}

/// Energy-bounded disturbance source: every draw satisfies `‖w‖₂² ≤ delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProcess {
    pub delta: f64,
    pub seed: u64,
}

impl NoiseProcess {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidInput(format!("noise bound must be finite and ≥ 0, got {delta}")));
        }
        Ok(Self { delta, seed })
    }

    pub fn silent() -> Self {
        Self { delta: 0.0, seed: 0 }
    }

    /// Child process with an independent stream.
    pub fn derive(&self, key: &[u64]) -> Self {
        Self {
            delta: self.delta,
            seed: rng::derive_key(self.seed, key),
        }
    }

    /// Draw number `index`, uniform on the ball of radius `√delta` in `R^q`.
    pub fn sample(&self, q: usize, index: u64) -> Vector {
        if self.delta == 0.0 {
            return Vector::zeros(q);
        }
        let mut rng = rng::stream(self.seed, &[label::NOISE, index]);
        rng::uniform_ball(&mut rng, q, self.delta)
    }
}

/// States `x_0..x_L`, and inputs, noises and outputs for steps `0..L-1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub noises: Vec<Vector>,
    pub outputs: Vec<Vector>,
}

impl Trajectory {
    fn with_capacity(steps: usize) -> Self {
        Self {
            states: Vec::with_capacity(steps + 1),
            inputs: Vec::with_capacity(steps),
            noises: Vec::with_capacity(steps),
            outputs: Vec::with_capacity(steps),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Largest one-step residual `‖x_{k+1} − A x_k − B u_k − B_w w_k‖ / (1 + ‖x_k‖)`.
    pub fn max_step_residual(&self, plant: &PlantModel) -> f64 {
        (0..self.len())
            .map(|k| {
                let x = &self.states[k];
                let pred = plant.a() * x + plant.b() * &self.inputs[k] + plant.bw() * &self.noises[k];
                (&self.states[k + 1] - pred).norm() / (1.0 + x.norm())
            })
            .fold(0.0, f64::max)
    }

    /// CSV with header `k,x1..xn,u1..um,w1..wq,y1..yp`. The final state
    /// `x_L` gets its own row with empty input, noise and output fields.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |v| v.len());
        let m = self.inputs.first().map_or(0, |v| v.len());
        let q = self.noises.first().map_or(0, |v| v.len());
        let p = self.outputs.first().map_or(0, |v| v.len());
        let mut out = String::from("k");
        for (prefix, count) in [("x", n), ("u", m), ("w", q), ("y", p)] {
            for i in 1..=count {
                let _ = write!(out, ",{prefix}{i}");
            }
        }
        out.push('\n');
        for k in 0..self.states.len() {
            let _ = write!(out, "{k}");
            push_fields(&mut out, Some(&self.states[k]), n);
            push_fields(&mut out, self.inputs.get(k), m);
            push_fields(&mut out, self.noises.get(k), q);
            push_fields(&mut out, self.outputs.get(k), p);
            out.push('\n');
        }
        out
    }
}

fn push_fields(out: &mut String, v: Option<&Vector>, width: usize) {
    for i in 0..width {
        match v {
            Some(v) => {
                let _ = write!(out, ",{:?}", v[i]);
            }
            None => out.push(','),
        }
    }
}
