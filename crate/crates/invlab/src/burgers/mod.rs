//! Burgers'-equation machinery: smoothed derivative stencils, the
//! differentiable PDE-residual and boundary losses, a raised-cosine boundary
//! family, an explicit Euler reference solver, and relative-l2 evaluation.
//!
//! Fields are space-time grids: rows are space on `x in [0,1]`, columns are
//! time on `t in [0,0.2]`. The advected quantity is nonnegative for the
//! boundary family used here.

mod optimize;
mod solver;

pub use optimize::{
    optimize_field, train_generator, EvalRow, FieldObjectives, FieldOptimization,
    GeneratorConfig, GeneratorTraining, OptimizeOptions, TrainedGenerator,
};
pub use solver::{euler_solve, euler_solve_linear_advection, SolverError};

use std::f64::consts::PI;

use thiserror::Error;

use crate::autodiff::{NodeId, Tape, Tensor};
use crate::linalg::{Grid2D, Matrix, Vector};

#[derive(Debug, Error)]
pub enum BurgersError {
    #[error("boundary frequency {0} outside the supported range [2.0, 6.5]")]
    FrequencyOutOfRange(f64),
    #[error("boundary frequency {c} aliases on {d} spatial points (need c <= d/10)")]
    FrequencyAliases { c: f64, d: usize },
    #[error("viscosity {0} outside (0, 0.1]")]
    ViscosityOutOfRange(f64),
    #[error("loss weights must be positive")]
    NonPositiveWeights,
}

/// Raised-cosine boundary profile parameterized by frequency.
#[derive(Clone, Copy, Debug)]
pub struct BoundarySpec {
    /// Frequency of the raised cosine.
    pub c: f64,
    /// Number of spatial sample points.
    pub d: usize,
}

impl BoundarySpec {
    pub fn new(c: f64, d: usize) -> Result<Self, BurgersError> {
        if !(2.0..=6.5).contains(&c) {
            return Err(BurgersError::FrequencyOutOfRange(c));
        }
        if c > d as f64 / 10.0 {
            return Err(BurgersError::FrequencyAliases { c, d });
        }
        Ok(Self { c, d })
    }
}

/// The raised cosine `0.5 (1 - cos(2 pi c x))` at a normalized position.
pub fn boundary_value(c: f64, x: f64) -> f64 {
    0.5 * (1.0 - (2.0 * PI * c * x).cos())
}

/// Profile sampled at `x_i = i / (d - 1)`.
pub fn boundary_profile(spec: &BoundarySpec) -> Vector<f64> {
    let denom = (spec.d - 1) as f64;
    Vector::from_fn(spec.d, |i| boundary_value(spec.c, i as f64 / denom))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdeForm {
    Inviscid,
    Viscid,
}

/// PDE selection: nonlinear advection, optionally with diffusion.
#[derive(Clone, Copy, Debug)]
pub struct PdeSpec {
    pub form: PdeForm,
    pub nu: f64,
}

impl PdeSpec {
    pub fn inviscid() -> Self {
        Self {
            form: PdeForm::Inviscid,
            nu: 0.0,
        }
    }

    pub fn viscid(nu: f64) -> Result<Self, BurgersError> {
        if !(nu > 0.0 && nu <= 0.1) {
            return Err(BurgersError::ViscosityOutOfRange(nu));
        }
        Ok(Self {
            form: PdeForm::Viscid,
            nu,
        })
    }

    /// Either form from a plain viscosity value (zero means inviscid).
    pub fn from_nu(nu: f64) -> Result<Self, BurgersError> {
        if nu == 0.0 {
            Ok(Self::inviscid())
        } else {
            Self::viscid(nu)
        }
    }
}

/// Grid resolution and physical spacings of the space-time field.
#[derive(Clone, Copy, Debug)]
pub struct Discretization {
    pub nx: usize,
    pub nt: usize,
    pub dx: f64,
    pub dt: f64,
    /// Internal Euler substeps per output column. `None` picks the smallest
    /// count that satisfies the marching stability bounds.
    pub substeps: Option<usize>,
}

impl Default for Discretization {
    fn default() -> Self {
        // 64x64 on x in [0,1], t in [0,0.2]: Courant number 0.2.
        Self {
            nx: 64,
            nt: 64,
            dx: 1.0 / 64.0,
            dt: 0.2 / 64.0,
            substeps: None,
        }
    }
}

impl Discretization {
    pub fn courant(&self) -> f64 {
        self.dt / self.dx
    }

    /// Node-aligned grid on `x in [0,1]`, `t in [0,0.2]` with `n` points per
    /// axis; spacing `1/(n-1)` keeps sample positions nested under
    /// refinement.
    pub fn node_aligned(n: usize) -> Self {
        let h = (n - 1) as f64;
        Self {
            nx: n,
            nt: n,
            dx: 1.0 / h,
            dt: 0.2 / h,
            substeps: None,
        }
    }
}

/// Weights of the combined objective.
#[derive(Clone, Copy, Debug)]
pub struct LossWeights {
    pub lambda_pde: f64,
    pub lambda_bc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_pde: 1.0,
            lambda_bc: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), BurgersError> {
        if self.lambda_pde > 0.0 && self.lambda_bc > 0.0 {
            Ok(())
        } else {
            Err(BurgersError::NonPositiveWeights)
        }
    }
}

/// Smoothed first-derivative stencil along space (rows), normalized by
/// `1/(8 dx)` so affine fields differentiate exactly at interior points.
pub fn sobel_x_kernel(dx: f64) -> [[f64; 3]; 3] {
    let s = 1.0 / (8.0 * dx);
    [
        [-s, -2.0 * s, -s],
        [0.0, 0.0, 0.0],
        [s, 2.0 * s, s],
    ]
}

/// Smoothed first-derivative stencil along time (columns), `1/(8 dt)`.
pub fn sobel_t_kernel(dt: f64) -> [[f64; 3]; 3] {
    let s = 1.0 / (8.0 * dt);
    [
        [-s, 0.0, s],
        [-2.0 * s, 0.0, 2.0 * s],
        [-s, 0.0, s],
    ]
}

/// Smoothed second-derivative stencil along space, calibrated so that
/// `u = x^2` yields exactly 2 at interior points: `1/(4 dx^2)`.
pub fn laplacian_x_kernel(dx: f64) -> [[f64; 3]; 3] {
    let s = 1.0 / (4.0 * dx * dx);
    [
        [s, 2.0 * s, s],
        [-2.0 * s, -4.0 * s, -2.0 * s],
        [s, 2.0 * s, s],
    ]
}

fn kernel_matrix(k: [[f64; 3]; 3]) -> Matrix<f64> {
    Matrix::from_fn(3, 3, |i, j| k[i][j])
}

/// First spatial derivative of a field (replicate borders).
pub fn sobel_dx(g: &Grid2D<f64>) -> Grid2D<f64> {
    g.conv2d_replicate(&kernel_matrix(sobel_x_kernel(g.dx())))
}

/// First time derivative of a field (replicate borders).
pub fn sobel_dt(g: &Grid2D<f64>) -> Grid2D<f64> {
    g.conv2d_replicate(&kernel_matrix(sobel_t_kernel(g.dt())))
}

/// Second spatial derivative of a field (replicate borders).
pub fn sobel_dxx(g: &Grid2D<f64>) -> Grid2D<f64> {
    g.conv2d_replicate(&kernel_matrix(laplacian_x_kernel(g.dx())))
}

/// 0/1 interior indicator: zero on the one-cell border where the replicate
/// stencils are biased.
fn interior_mask(nx: usize, nt: usize) -> Tensor<f64> {
    Tensor::from_fn(nx, nt, |i, j| {
        if i > 0 && i + 1 < nx && j > 0 && j + 1 < nt {
            1.0
        } else {
            0.0
        }
    })
}

/// Differentiable PDE residual: mean over interior cells of
/// `(u_t + u .* u_x - nu u_xx)^2`. `nu_field` supplies the viscosity as a
/// full-shape node (input or constant); `None` selects the inviscid form.
pub fn build_pde_residual(
    tape: &mut Tape<f64>,
    u: NodeId,
    nx: usize,
    nt: usize,
    dx: f64,
    dt: f64,
    nu_field: Option<NodeId>,
) -> NodeId {
    let ut = tape.conv2d(sobel_t_kernel(dt), u);
    let ux = tape.conv2d(sobel_x_kernel(dx), u);
    let advection = tape.hadamard(u, ux);
    let mut residual = tape.add(ut, advection);
    if let Some(nu) = nu_field {
        let uxx = tape.conv2d(laplacian_x_kernel(dx), u);
        let diffusion = tape.hadamard(nu, uxx);
        residual = tape.sub(residual, diffusion);
    }
    let mask = tape.constant(interior_mask(nx, nt));
    let masked = tape.hadamard(residual, mask);
    let ss = tape.sum_squares(masked);
    let n_interior = ((nx - 2) * (nt - 2)) as f64;
    tape.scale(1.0 / n_interior, ss)
}

/// Differentiable boundary loss: mean squared difference between the first
/// time column of `u` and the target column node (full-shape, nonzero only
/// on column zero).
pub fn build_boundary_loss(
    tape: &mut Tape<f64>,
    u: NodeId,
    target_field: NodeId,
    nx: usize,
    nt: usize,
) -> NodeId {
    let column_mask = tape.constant(Tensor::from_fn(nx, nt, |_, j| {
        if j == 0 {
            1.0
        } else {
            0.0
        }
    }));
    let diff = tape.sub(u, target_field);
    let masked = tape.hadamard(diff, column_mask);
    let ss = tape.sum_squares(masked);
    tape.scale(1.0 / nx as f64, ss)
}

/// Boundary profile broadcast onto column zero of a full-shape tensor.
pub fn boundary_target_tensor(b: &Vector<f64>, nt: usize) -> Tensor<f64> {
    Tensor::from_fn(b.dim(), nt, |i, j| if j == 0 { b[i] } else { 0.0 })
}

/// PDE residual of a concrete field, evaluated through the same
/// differentiable graph used during optimization.
pub fn pde_residual(g: &Grid2D<f64>, spec: &PdeSpec) -> f64 {
    let mut tape = Tape::new();
    let u = tape.param(Tensor::from_grid(g));
    let nu_field = match spec.form {
        PdeForm::Inviscid => None,
        PdeForm::Viscid => {
            Some(tape.constant(Tensor::from_fn(g.nx(), g.nt(), |_, _| spec.nu)))
        }
    };
    let out = build_pde_residual(&mut tape, u, g.nx(), g.nt(), g.dx(), g.dt(), nu_field);
    tape.forward().expect("residual graph is well-formed");
    tape.scalar_value(out)
}

/// Boundary loss of a concrete field against a profile.
pub fn boundary_loss(g: &Grid2D<f64>, b: &Vector<f64>) -> f64 {
    assert_eq!(b.dim(), g.nx(), "boundary length must match nx");
    let mut tape = Tape::new();
    let u = tape.param(Tensor::from_grid(g));
    let target = tape.constant(boundary_target_tensor(b, g.nt()));
    let out = build_boundary_loss(&mut tape, u, target, g.nx(), g.nt());
    tape.forward().expect("boundary graph is well-formed");
    tape.scalar_value(out)
}

/// Frobenius relative error against a reference field.
pub fn relative_l2(a: &Grid2D<f64>, reference: &Grid2D<f64>) -> f64 {
    a.relative_l2(reference)
}
