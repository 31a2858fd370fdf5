//! The discretised semi-homogeneous field on a Euclidean ball `B(0, a)`.
//!
//! Nodes sit on a polar grid `r_i = i h₁`, `θ_j = j h₂` (0-based here,
//! `i = 0..=N`, `j = 0..=M`) and the integral term uses the rectangular rule
//! over every node, including the duplicated `θ = 2π` column, with weight
//! `q_k = r_k / (1 - r_k²)²`.

pub mod analysis;
pub mod io;
pub mod ode;
mod sim;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{dist_disk, DiskPoint, GeometryError};
use crate::kernels::{KernelError, RadialKernel};

pub use ode::{Dopri5Options, OdeError, OdeStats, OdeSystem};
pub use sim::{default_snapshots, BoundsReport, Simulation, Trajectory, BOUND_SLACK};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid parameter {name} = {value}: {constraint}")]
    Parameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("kernel matrix needs {entries} entries, above the cap of {cap}")]
    Memory { entries: usize, cap: usize },
    #[error("state has {got} values, grid has {want} nodes")]
    Dimension { got: usize, want: usize },
    #[error("norm bound violated at t = {t}: |V| = {norm} > {bound}")]
    BoundViolated { t: f64, norm: f64, bound: f64 },
    #[error("attracting-ball entry at t = {entry} exceeds the bound {bound}")]
    EntryTime { entry: f64, bound: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Polar node layout on the Euclidean ball of radius `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    a: f64,
    n: usize,
    m: usize,
    r: Vec<f64>,
    theta: Vec<f64>,
    q: Vec<f64>,
}

impl FieldGrid {
    pub fn new(a: f64, n: usize, m: usize) -> Result<Self, FieldError> {
        if !(a > 0.0 && a < 1.0) {
            return Err(FieldError::Grid(format!(
                "radius a = {a} must lie in (0, 1)"
            )));
        }
        if n < 2 || m < 4 {
            return Err(FieldError::Grid(format!(
                "need N >= 2 and M >= 4, got N = {n}, M = {m}"
            )));
        }
        let h1 = a / n as f64;
        let h2 = TAU / m as f64;
        let mut r: Vec<f64> = (0..=n).map(|i| i as f64 * h1).collect();
        r[n] = a;
        let mut theta: Vec<f64> = (0..=m).map(|j| j as f64 * h2).collect();
        theta[m] = TAU;
        let q = r.iter().map(|&x| x / (1.0 - x * x).powi(2)).collect();
        Ok(Self {
            a,
            n,
            m,
            r,
            theta,
            q,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h1(&self) -> f64 {
        self.a / self.n as f64
    }

    pub fn h2(&self) -> f64 {
        TAU / self.m as f64
    }

    /// Euclidean node radii `r_0 = 0, ..., r_N = a`.
    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn angles(&self) -> &[f64] {
        &self.theta
    }

    /// Quadrature factors `q_k`; `q_0 = 0`.
    pub fn weights(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        (self.n + 1) * (self.m + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * (self.m + 1) + j
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / (self.m + 1), idx % (self.m + 1))
    }

    pub fn point(&self, i: usize, j: usize) -> DiskPoint {
        let z = Complex64::from_polar(self.r[i], self.theta[j]);
        DiskPoint::from_complex(z).expect("grid nodes lie inside the disk")
    }

    /// Hyperbolic distance between nodes `(i, j)` and `(k, l)`.
    pub fn node_distance(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let steps = (j as i64 - l as i64).rem_euclid(self.m as i64) as usize;
        euclid_polar_distance(self.r[i], self.r[k], steps as f64 * self.h2())
    }

    /// Representatives of each distinct point: the centre once, then every
    /// ring without its `θ = 2π` duplicate.
    pub fn unique_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        std::iter::once((0, 0))
            .chain((1..=self.n).flat_map(move |i| (0..self.m).map(move |j| (i, j))))
    }

    /// Index of the node holding the same point as `(i, j)` in its
    /// canonical form (centre collapses to `(0, 0)`, `j = M` to `j = 0`).
    pub fn canonical(&self, i: usize, j: usize) -> (usize, usize) {
        if i == 0 {
            (0, 0)
        } else if j == self.m {
            (i, 0)
        } else {
            (i, j)
        }
    }

    /// Copies canonical values onto duplicated nodes.
    pub fn symmetrize(&self, v: &mut [f64]) {
        let c = v[0];
        for j in 0..=self.m {
            v[self.index(0, j)] = c;
        }
        for i in 1..=self.n {
            v[self.index(i, self.m)] = v[self.index(i, 0)];
        }
    }
}

/// Hyperbolic distance between Euclidean polar points `(ra, 0)` and
/// `(rb, δ)`, written to stay accurate when the points coincide.
pub fn euclid_polar_distance(ra: f64, rb: f64, delta: f64) -> f64 {
    let s = (0.5 * delta).sin();
    let cross = 4.0 * ra * rb * s * s;
    let num = (ra - rb) * (ra - rb) + cross;
    if num == 0.0 {
        return 0.0;
    }
    let den = (1.0 - ra * rb) * (1.0 - ra * rb) + cross;
    (num / den)
        .sqrt()
        .min(crate::geometry::ARTANH_CLAMP)
        .atanh()
}

/// Nonlinearity `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiringRate {
    /// `1 / (1 + e^{-μx})`.
    Sigmoid { mu: f64 },
    /// The sigmoid minus ½, vanishing at 0.
    ShiftedSigmoid { mu: f64 },
    /// `H(x - κ)`.
    Heaviside { kappa: f64 },
}

impl FiringRate {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FiringRate::Sigmoid { mu } => logistic(mu * x),
            FiringRate::ShiftedSigmoid { mu } => logistic(mu * x) - 0.5,
            FiringRate::Heaviside { kappa } => {
                if x >= kappa {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `S^m = sup |S|`.
    pub fn sup_value(&self) -> f64 {
        match self {
            FiringRate::ShiftedSigmoid { .. } => 0.5,
            _ => 1.0,
        }
    }

    /// `sup |S'|`; infinite for the Heaviside step.
    pub fn slope_max(&self) -> f64 {
        match *self {
            FiringRate::Sigmoid { mu } | FiringRate::ShiftedSigmoid { mu } => 0.25 * mu.abs(),
            FiringRate::Heaviside { .. } => f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        match *self {
            FiringRate::Sigmoid { mu } | FiringRate::ShiftedSigmoid { mu }
                if !(mu >= 0.0 && mu.is_finite()) =>
            {
                Err(FieldError::Parameter {
                    name: "rate.mu",
                    value: mu,
                    constraint: "must be finite and >= 0",
                })
            }
            FiringRate::Heaviside { kappa } if !kappa.is_finite() => Err(FieldError::Parameter {
                name: "rate.kappa",
                value: kappa,
                constraint: "must be finite",
            }),
            _ => Ok(()),
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Which denominator a Gaussian input uses in its exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputConvention {
    /// `e^{-d²/σ²}`.
    SigmaSq,
    /// `e^{-d²/(2σ²)}`.
    TwoSigmaSq,
}

impl InputConvention {
    fn denominator(self, sigma: f64) -> f64 {
        match self {
            InputConvention::SigmaSq => sigma * sigma,
            InputConvention::TwoSigmaSq => 2.0 * sigma * sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExternalInput {
    Zero,
    Constant(f64),
    /// `I₀ e^{-d(z, 0)²/den}`.
    GaussianBump {
        i0: f64,
        sigma: f64,
        convention: InputConvention,
    },
    /// Gaussian bump centred at `r₀ e^{iΩ₀t}` (Euclidean `r₀`).
    RotatingBump {
        i0: f64,
        sigma: f64,
        r0: f64,
        omega0: f64,
        convention: InputConvention,
    },
}

impl ExternalInput {
    pub fn validate(&self) -> Result<(), FieldError> {
        let (i0, sigma, r0) = match *self {
            ExternalInput::Zero => return Ok(()),
            ExternalInput::Constant(c) => {
                return if c.is_finite() {
                    Ok(())
                } else {
                    Err(FieldError::Parameter {
                        name: "input.i0",
                        value: c,
                        constraint: "must be finite",
                    })
                }
            }
            ExternalInput::GaussianBump { i0, sigma, .. } => (i0, sigma, 0.0),
            ExternalInput::RotatingBump { i0, sigma, r0, .. } => (i0, sigma, r0),
        };
        if !(i0 >= 0.0 && i0.is_finite()) {
            return Err(FieldError::Parameter {
                name: "input.i0",
                value: i0,
                constraint: "must be >= 0",
            });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FieldError::Parameter {
                name: "input.sigma",
                value: sigma,
                constraint: "must be > 0",
            });
        }
        if !(0.0..1.0).contains(&r0) {
            return Err(FieldError::Parameter {
                name: "input.r0",
                value: r0,
                constraint: "must lie in [0, 1)",
            });
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, ExternalInput::RotatingBump { .. })
    }

    /// Upper bound on `sup_t ‖I(t)‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            ExternalInput::Zero => 0.0,
            ExternalInput::Constant(c) => c.abs(),
            ExternalInput::GaussianBump { i0, .. } | ExternalInput::RotatingBump { i0, .. } => {
                i0.abs()
            }
        }
    }

    pub fn eval(&self, p: DiskPoint, t: f64) -> f64 {
        match *self {
            ExternalInput::Zero => 0.0,
            ExternalInput::Constant(c) => c,
            ExternalInput::GaussianBump {
                i0,
                sigma,
                convention,
            } => {
                let (r, _) = p.to_polar();
                i0 * (-r * r / convention.denominator(sigma)).exp()
            }
            ExternalInput::RotatingBump {
                i0,
                sigma,
                r0,
                omega0,
                convention,
            } => {
                let c = DiskPoint::from_complex(Complex64::from_polar(r0, omega0 * t))
                    .expect("rotating centre is inside the disk");
                let d = dist_disk(p, c);
                i0 * (-d * d / convention.denominator(sigma)).exp()
            }
        }
    }

    /// Input sampled on every grid node at time `t`.
    pub fn sample(&self, grid: &FieldGrid, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        self.sample_into(grid, t, &mut out);
        out
    }

    pub fn sample_into(&self, grid: &FieldGrid, t: f64, out: &mut [f64]) {
        for i in 0..=grid.n() {
            for j in 0..=grid.m() {
                out[grid.index(i, j)] = self.eval(grid.point(i, j), t);
            }
        }
    }
}

/// Initial state of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    Constant(f64),
    /// Independent uniform values in `[-amplitude, amplitude]` per distinct
    /// node, drawn from a seeded ChaCha stream.
    Noise {
        amplitude: f64,
        seed: u64,
    },
    Values(Vec<f64>),
}

impl InitialCondition {
    pub fn realize(&self, grid: &FieldGrid) -> Result<Vec<f64>, FieldError> {
        match self {
            InitialCondition::Zero => Ok(vec![0.0; grid.len()]),
            InitialCondition::Constant(c) => Ok(vec![*c; grid.len()]),
            InitialCondition::Noise { amplitude, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut v = vec![0.0; grid.len()];
                for (i, j) in grid.unique_nodes() {
                    v[grid.index(i, j)] = if *amplitude > 0.0 {
                        rng.gen_range(-*amplitude..=*amplitude)
                    } else {
                        0.0
                    };
                }
                grid.symmetrize(&mut v);
                Ok(v)
            }
            InitialCondition::Values(v) => {
                if v.len() != grid.len() {
                    return Err(FieldError::Dimension {
                        got: v.len(),
                        want: grid.len(),
                    });
                }
                Ok(v.clone())
            }
        }
    }
}

/// Default cap on dense kernel-matrix entries (about 1 GB of `f64`).
pub const DEFAULT_MATRIX_CAP: usize = 120_000_000;

/// Treatment of the `θ = 2π` column in the angular sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngularRule {
    /// Sum over all `M + 1` columns, counting `θ = 0 ≡ 2π` twice.
    #[default]
    Verbatim,
    /// Drop the duplicated column: the periodic rectangle rule, which keeps
    /// the discrete operator exactly rotation-equivariant.
    Periodic,
}

impl AngularRule {
    pub fn name(&self) -> &'static str {
        match self {
            AngularRule::Verbatim => "verbatim",
            AngularRule::Periodic => "periodic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "verbatim" => Some(AngularRule::Verbatim),
            "periodic" => Some(AngularRule::Periodic),
            _ => None,
        }
    }
}

/// Dense quadrature matrix `W̃[(i,j),(k,l)] = w(d(node_ij, node_kl)) q_k`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl KernelMatrix {
    pub fn assemble(grid: &FieldGrid, kernel: &RadialKernel) -> Result<Self, FieldError> {
        Self::assemble_with_cap(grid, kernel, DEFAULT_MATRIX_CAP)
    }

    pub fn assemble_with_cap(
        grid: &FieldGrid,
        kernel: &RadialKernel,
        cap: usize,
    ) -> Result<Self, FieldError> {
        Self::assemble_with(grid, kernel, AngularRule::Verbatim, cap)
    }

    pub fn assemble_with(
        grid: &FieldGrid,
        kernel: &RadialKernel,
        rule: AngularRule,
        cap: usize,
    ) -> Result<Self, FieldError> {
        let dim = grid.len();
        let entries = dim * dim;
        if entries > cap {
            return Err(FieldError::Memory { entries, cap });
        }
        let (n, m) = (grid.n(), grid.m());
        // Distances only depend on (i, k, (j - l) mod M).
        let table: Vec<f64> = (0..(n + 1) * (n + 1) * m)
            .into_par_iter()
            .map(|t| {
                let (ik, d) = (t / m, t % m);
                let (i, k) = (ik / (n + 1), ik % (n + 1));
                kernel.eval(euclid_polar_distance(
                    grid.r[i],
                    grid.r[k],
                    d as f64 * grid.h2(),
                ))
            })
            .collect();
        let mut data = vec![0.0; entries];
        data.par_chunks_mut(dim).enumerate().for_each(|(row, out)| {
            let (i, j) = grid.coords(row);
            for k in 0..=n {
                let base = (i * (n + 1) + k) * m;
                let qk = grid.q[k];
                let cols = match rule {
                    AngularRule::Verbatim => m + 1,
                    AngularRule::Periodic => m,
                };
                for l in 0..cols {
                    let d = (j + m - l % m) % m;
                    out[k * (m + 1) + l] = table[base + d] * qk;
                }
            }
        });
        Ok(Self { dim, entries: data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    /// `out = scale · K x`. Rows are split across threads but each row is
    /// summed sequentially, so results do not depend on the thread count.
    pub fn apply(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let dim = self.dim;
        out.par_iter_mut()
            .with_min_len(16)
            .enumerate()
            .for_each(|(row, o)| {
                let r = &self.entries[row * dim..(row + 1) * dim];
                *o = scale * dot(r, x);
            });
    }

    /// `max_row Σ |K|`.
    pub fn max_abs_row_sum(&self) -> f64 {
        self.entries
            .par_chunks(self.dim)
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .reduce(|| 0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorise while keeping
    // a fixed summation order.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let o = 4 * c;
        acc[0] += a[o] * b[o];
        acc[1] += a[o + 1] * b[o + 1];
        acc[2] += a[o + 2] * b[o + 2];
        acc[3] += a[o + 3] * b[o + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for o in 4 * chunks..a.len() {
        s += a[o] * b[o];
    }
    s
}

/// The discrete field equation
/// `dV/dt = -αV + h₁h₂ K S(V) + I(t)`.
#[derive(Debug, Clone)]
pub struct FieldModel {
    grid: FieldGrid,
    matrix: KernelMatrix,
    kernel: RadialKernel,
    rate: FiringRate,
    alpha: f64,
    input: ExternalInput,
    static_input: Vec<f64>,
}

impl FieldModel {
    pub fn new(
        grid: FieldGrid,
        kernel: &RadialKernel,
        rate: FiringRate,
        alpha: f64,
        input: ExternalInput,
    ) -> Result<Self, FieldError> {
        let matrix = KernelMatrix::assemble(&grid, kernel)?;
        Self::with_matrix(grid, matrix, kernel, rate, alpha, input)
    }

    /// Like [`FieldModel::new`] with an explicit angular quadrature rule.
    pub fn with_rule(
        grid: FieldGrid,
        kernel: &RadialKernel,
        rate: FiringRate,
        alpha: f64,
        input: ExternalInput,
        rule: AngularRule,
    ) -> Result<Self, FieldError> {
        let matrix = KernelMatrix::assemble_with(&grid, kernel, rule, DEFAULT_MATRIX_CAP)?;
        Self::with_matrix(grid, matrix, kernel, rate, alpha, input)
    }

    pub fn with_matrix(
        grid: FieldGrid,
        matrix: KernelMatrix,
        kernel: &RadialKernel,
        rate: FiringRate,
        alpha: f64,
        input: ExternalInput,
    ) -> Result<Self, FieldError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(FieldError::Parameter {
                name: "alpha",
                value: alpha,
                constraint: "must be > 0",
            });
        }
        if matrix.dim() != grid.len() {
            return Err(FieldError::Dimension {
                got: matrix.dim(),
                want: grid.len(),
            });
        }
        rate.validate()?;
        input.validate()?;
        let static_input = if input.is_static() {
            input.sample(&grid, 0.0)
        } else {
            Vec::new()
        };
        Ok(Self {
            grid,
            matrix,
            kernel: kernel.clone(),
            rate,
            alpha,
            input,
            static_input,
        })
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &KernelMatrix {
        &self.matrix
    }

    pub fn kernel(&self) -> &RadialKernel {
        &self.kernel
    }

    pub fn rate(&self) -> FiringRate {
        self.rate
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn input(&self) -> ExternalInput {
        self.input
    }

    pub fn quadrature_scale(&self) -> f64 {
        self.grid.h1() * self.grid.h2()
    }

    /// `h₁h₂ K S(V)`.
    pub fn coupling(&self, v: &[f64], out: &mut [f64]) {
        let s: Vec<f64> = v.iter().map(|&x| self.rate.eval(x)).collect();
        self.matrix.apply(&s, self.quadrature_scale(), out);
    }

    /// Input vector at time `t`.
    pub fn input_at(&self, t: f64) -> Vec<f64> {
        if self.input.is_static() {
            self.static_input.clone()
        } else {
            self.input.sample(&self.grid, t)
        }
    }

    /// Effective `𝒲₀` for the discrete bounds: the larger of the continuous
    /// `L¹` norm and the discrete `h₁h₂ max_row Σ|K|`.
    pub fn w0(&self) -> Result<f64, FieldError> {
        let cont = self.kernel.l1_norm()?;
        Ok(cont.max(self.quadrature_scale() * self.matrix.max_abs_row_sum()))
    }

    /// Radius `ρ = (2/α)(S^m 𝒲₀ + sup‖I‖)` of the attracting ball.
    pub fn attracting_radius(&self) -> Result<f64, FieldError> {
        Ok(2.0 / self.alpha * (self.rate.sup_value() * self.w0()? + self.input.sup_norm()))
    }
}

impl OdeSystem for FieldModel {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self.coupling(y, dy);
        if self.input.is_static() {
            for ((d, &v), &i) in dy.iter_mut().zip(y).zip(&self.static_input) {
                *d += i - self.alpha * v;
            }
        } else {
            for i in 0..=self.grid.n() {
                for j in 0..=self.grid.m() {
                    let idx = self.grid.index(i, j);
                    dy[idx] += self.input.eval(self.grid.point(i, j), t) - self.alpha * y[idx];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_layout_example() {
        let g = FieldGrid::new(0.5, 2, 4).unwrap();
        assert_eq!(g.radii(), &[0.0, 0.25, 0.5]);
        let want = [0.0, PI / 2.0, PI, 1.5 * PI, 2.0 * PI];
        for (a, b) in g.angles().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(g.weights()[0], 0.0);
        assert!((g.weights()[2] - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(g.len(), 15);
        assert!(FieldGrid::new(1.0, 4, 4).is_err());
        assert!(FieldGrid::new(0.5, 1, 4).is_err());
    }

    #[test]
    fn node_distance_matches_disk_distance() {
        let g = FieldGrid::new(0.6, 6, 8).unwrap();
        for (i, j, k, l) in [
            (1, 2, 3, 7),
            (6, 0, 6, 8),
            (0, 0, 4, 3),
            (5, 5, 5, 5),
            (2, 8, 2, 0),
        ] {
            let a = g.node_distance(i, j, k, l);
            let b = dist_disk(g.point(i, j), g.point(k, l));
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn firing_rate_values() {
        let s = FiringRate::Sigmoid { mu: 10.0 };
        assert_eq!(s.eval(0.0), 0.5);
        assert!(s.eval(-1000.0) >= 0.0 && s.eval(1000.0) <= 1.0);
        assert_eq!(s.slope_max(), 2.5);
        let sh = FiringRate::ShiftedSigmoid { mu: 3.0 };
        assert_eq!(sh.eval(0.0), 0.0);
        assert_eq!(sh.sup_value(), 0.5);
        let h = FiringRate::Heaviside { kappa: 0.04 };
        assert_eq!(h.eval(0.039), 0.0);
        assert_eq!(h.eval(0.04), 1.0);
        assert!(FiringRate::Sigmoid { mu: -1.0 }.validate().is_err());
    }

    #[test]
    fn kernel_matrix_structure() {
        let g = FieldGrid::new(0.5, 5, 8).unwrap();
        let k = RadialKernel::exponential(0.2).unwrap();
        let mx = KernelMatrix::assemble(&g, &k).unwrap();
        for i in 0..=5 {
            for j in 0..=8 {
                let d = g.index(i, j);
                assert_eq!(mx.get(d, d), k.eval(0.0) * g.weights()[i]);
            }
        }
        // Rotational structure and weighted symmetry.
        for (i, j, kk, l) in [(1, 2, 3, 7), (4, 0, 2, 5), (5, 8, 1, 1)] {
            let e = mx.get(g.index(i, j), g.index(kk, l));
            let e2 = mx.get(g.index(i, (j + 3) % 8), g.index(kk, (l + 3) % 8));
            assert!((e - e2).abs() < 1e-12);
            let direct = k.eval(dist_disk(g.point(i, j), g.point(kk, l))) * g.weights()[kk];
            assert!((e - direct).abs() < 1e-12);
            if i > 0 {
                let back = mx.get(g.index(kk, l), g.index(i, j));
                assert!((e / g.weights()[kk] - back / g.weights()[i]).abs() < 1e-12);
            }
        }
        let z = KernelMatrix::assemble(&g, &RadialKernel::zero()).unwrap();
        assert!((0..z.dim()).all(|r| z.row(r).iter().all(|&v| v == 0.0)));
        assert!(matches!(
            KernelMatrix::assemble_with_cap(&g, &k, 10),
            Err(FieldError::Memory { .. })
        ));
    }

    #[test]
    fn rhs_examples() {
        let g = FieldGrid::new(0.5, 6, 8).unwrap();
        let k = RadialKernel::gabor(0.2).unwrap();
        let zero = vec![0.0; g.len()];
        let mut dy = vec![1.0; g.len()];
        let shifted = FieldModel::new(
            g.clone(),
            &k,
            FiringRate::ShiftedSigmoid { mu: 10.0 },
            0.1,
            ExternalInput::Zero,
        )
        .unwrap();
        shifted.rhs(0.0, &zero, &mut dy);
        assert!(dy.iter().all(|&v| v == 0.0));

        let model = FieldModel::new(
            g.clone(),
            &k,
            FiringRate::Sigmoid { mu: 10.0 },
            0.1,
            ExternalInput::Zero,
        )
        .unwrap();
        model.rhs(0.0, &zero, &mut dy);
        let h = g.h1() * g.h2();
        for row in [0, 7, 40] {
            let want = h * 0.5 * model.matrix().row(row).iter().sum::<f64>();
            assert!((dy[row] - want).abs() < 1e-14 * want.abs().max(1.0));
        }

        // Independent loop over nodes at a random state.
        let v: Vec<f64> = (0..g.len())
            .map(|x| ((x * 37 % 11) as f64 - 5.0) * 0.03)
            .collect();
        let input = ExternalInput::GaussianBump {
            i0: 0.1,
            sigma: 0.05,
            convention: InputConvention::SigmaSq,
        };
        let model =
            FieldModel::new(g.clone(), &k, FiringRate::Sigmoid { mu: 10.0 }, 0.1, input).unwrap();
        model.rhs(0.0, &v, &mut dy);
        for (i, j) in [(0, 0), (3, 5), (6, 8)] {
            let mut s = 0.0;
            for kk in 0..=6 {
                for l in 0..=8 {
                    let d = dist_disk(g.point(i, j), g.point(kk, l));
                    s += k.eval(d) * g.weights()[kk] * model.rate().eval(v[g.index(kk, l)]);
                }
            }
            let p = g.point(i, j);
            let want = -0.1 * v[g.index(i, j)] + h * s + input.eval(p, 0.0);
            assert!((dy[g.index(i, j)] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_initial_condition_is_seeded_and_consistent() {
        let g = FieldGrid::new(0.5, 4, 6).unwrap();
        let ic = InitialCondition::Noise {
            amplitude: 0.01,
            seed: 7,
        };
        let a = ic.realize(&g).unwrap();
        let b = ic.realize(&g).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() <= 0.01));
        for j in 0..=6 {
            assert_eq!(a[g.index(0, j)], a[0]);
        }
        for i in 1..=4 {
            assert_eq!(a[g.index(i, 6)], a[g.index(i, 0)]);
        }
        let c = InitialCondition::Noise {
            amplitude: 0.01,
            seed: 8,
        }
        .realize(&g)
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rotating_input_moves_centre() {
        let inp = ExternalInput::RotatingBump {
            i0: 0.1,
            sigma: 0.05,
            r0: 0.4,
            omega0: 0.01,
            convention: InputConvention::SigmaSq,
        };
        let t = 100.0;
        let p = DiskPoint::from_complex(Complex64::from_polar(0.4, 1.0)).unwrap();
        assert!((inp.eval(p, t) - 0.1).abs() < 1e-12);
        assert!(inp.validate().is_ok());
    }
}
