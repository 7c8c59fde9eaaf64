use thiserror::Error;

use crate::burgers::{Discretization, PdeForm, PdeSpec};
use crate::linalg::{Grid2D, Vector};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(
        "advective stability violated: courant number {courant} > 0.5 at the marching step \
         (substeps {substeps})"
    )]
    CflViolation { courant: f64, substeps: usize },
    #[error(
        "diffusive stability violated: nu dt/dx^2 = {ratio} > 0.5 at the marching step \
         (substeps {substeps})"
    )]
    DiffusionViolation { ratio: f64, substeps: usize },
    #[error("no substep count up to {0} satisfies the stability bounds")]
    NoStableSubstepping(usize),
    #[error("boundary length {b_len} does not match nx {nx}")]
    BoundaryMismatch { b_len: usize, nx: usize },
}

const MAX_SUBSTEPS: usize = 100_000;

/// Pick the marching substep count: the requested one (validated) or the
/// smallest count satisfying both explicit-stability bounds.
fn resolve_substeps(disc: &Discretization, nu: f64) -> Result<usize, SolverError> {
    let check = |k: usize| -> Result<(), SolverError> {
        let dt_s = disc.dt / k as f64;
        let courant = dt_s / disc.dx;
        if courant > 0.5 + 1e-12 {
            return Err(SolverError::CflViolation {
                courant,
                substeps: k,
            });
        }
        let ratio = nu * dt_s / (disc.dx * disc.dx);
        if ratio > 0.5 + 1e-12 {
            return Err(SolverError::DiffusionViolation {
                ratio,
                substeps: k,
            });
        }
        Ok(())
    };
    match disc.substeps {
        Some(k) => {
            assert!(k >= 1, "substeps must be at least 1");
            check(k)?;
            Ok(k)
        }
        None => {
            let mut k = 1;
            while k <= MAX_SUBSTEPS {
                if check(k).is_ok() {
                    return Ok(k);
                }
                k *= 2;
            }
            Err(SolverError::NoStableSubstepping(MAX_SUBSTEPS))
        }
    }
}

/// Explicit Euler reference solver for the nonlinear equation.
///
/// Column zero is the boundary profile verbatim. Marching uses sign-aware
/// upwind differences for the advection term (left-biased for the
/// nonnegative profiles of this family) and central second differences for
/// diffusion; the spatial ends are clamped to the profile's end values.
/// Refuses to run outside the explicit stability region instead of
/// producing NaN.
pub fn euler_solve(
    b: &Vector<f64>,
    spec: &PdeSpec,
    disc: &Discretization,
) -> Result<Grid2D<f64>, SolverError> {
    if b.dim() != disc.nx {
        return Err(SolverError::BoundaryMismatch {
            b_len: b.dim(),
            nx: disc.nx,
        });
    }
    let nu = match spec.form {
        PdeForm::Inviscid => 0.0,
        PdeForm::Viscid => spec.nu,
    };
    let substeps = resolve_substeps(disc, nu)?;
    let dt_s = disc.dt / substeps as f64;
    let dx = disc.dx;
    let nx = disc.nx;

    let mut grid = Grid2D::zeros(nx, disc.nt, dx, disc.dt);
    let mut current: Vec<f64> = b.as_slice().to_vec();
    for i in 0..nx {
        grid.set(i, 0, current[i]);
    }
    let mut next = vec![0.0f64; nx];
    for j in 1..disc.nt {
        for _ in 0..substeps {
            for i in 1..nx - 1 {
                let u = current[i];
                let advection = if u >= 0.0 {
                    u * (u - current[i - 1]) / dx
                } else {
                    u * (current[i + 1] - u) / dx
                };
                let diffusion = if nu > 0.0 {
                    nu * (current[i + 1] - 2.0 * u + current[i - 1]) / (dx * dx)
                } else {
                    0.0
                };
                next[i] = u + dt_s * (diffusion - advection);
            }
            next[0] = b[0];
            next[nx - 1] = b[nx - 1];
            std::mem::swap(&mut current, &mut next);
        }
        for i in 0..nx {
            grid.set(i, j, current[i]);
        }
    }
    Ok(grid)
}

/// Solver mode for the linear transport equation `u_t + u_x = 0`: the
/// profile translates right at unit speed. Upwind differences need no
/// condition at the outflow end, so only the inflow is clamped.
pub fn euler_solve_linear_advection(
    b: &Vector<f64>,
    disc: &Discretization,
) -> Result<Grid2D<f64>, SolverError> {
    if b.dim() != disc.nx {
        return Err(SolverError::BoundaryMismatch {
            b_len: b.dim(),
            nx: disc.nx,
        });
    }
    let substeps = resolve_substeps(disc, 0.0)?;
    let dt_s = disc.dt / substeps as f64;
    let dx = disc.dx;
    let nx = disc.nx;

    let mut grid = Grid2D::zeros(nx, disc.nt, dx, disc.dt);
    let mut current: Vec<f64> = b.as_slice().to_vec();
    for i in 0..nx {
        grid.set(i, 0, current[i]);
    }
    let mut next = vec![0.0f64; nx];
    for j in 1..disc.nt {
        for _ in 0..substeps {
            for i in 1..nx {
                next[i] = current[i] - dt_s * (current[i] - current[i - 1]) / dx;
            }
            next[0] = b[0];
            std::mem::swap(&mut current, &mut next);
        }
        for i in 0..nx {
            grid.set(i, j, current[i]);
        }
    }
    Ok(grid)
}
