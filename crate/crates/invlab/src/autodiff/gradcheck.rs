use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{NodeId, Tape, TapeError};
use crate::scalar::Real;

/// Settings for the finite-difference gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckOptions<T> {
    /// Central-difference half step.
    pub step: T,
    /// Maximum accepted relative error.
    pub tolerance: T,
    /// Per-parameter coordinate budget; `None` checks every coordinate.
    pub max_coords_per_param: Option<usize>,
    /// Seed for coordinate sampling.
    pub seed: u64,
    /// Probes whose relu pre-activations come this close to zero are
    /// skipped: the central difference straddles the kink there.
    pub relu_kink_tol: T,
}

impl<T: Real> Default for GradCheckOptions<T> {
    fn default() -> Self {
        Self {
            step: T::of(1e-5),
            tolerance: T::of(1e-6),
            max_coords_per_param: None,
            seed: 0,
            relu_kink_tol: T::of(1e-3),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamCheck<T> {
    pub param: NodeId,
    pub max_rel_error: T,
    pub coords_checked: usize,
    pub coords_skipped: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport<T> {
    pub entries: Vec<ParamCheck<T>>,
    pub tolerance: T,
    pub passed: bool,
}

/// Central difference of the scalar `output` w.r.t. one parameter entry.
pub fn central_difference<T: Real>(
    tape: &mut Tape<T>,
    output: NodeId,
    param: NodeId,
    coord: usize,
    step: T,
) -> Result<T, TapeError> {
    let original = tape.param_value(param).clone();
    let mut plus = original.clone();
    plus.data_mut()[coord] += step;
    tape.set_param(param, plus);
    tape.forward()?;
    let f_plus = tape.scalar_value(output);
    let mut minus = original.clone();
    minus.data_mut()[coord] -= step;
    tape.set_param(param, minus);
    tape.forward()?;
    let f_minus = tape.scalar_value(output);
    tape.set_param(param, original);
    Ok((f_plus - f_minus) / (T::of(2.0) * step))
}

fn near_relu_kink<T: Real>(tape: &Tape<T>, tol: T) -> bool {
    match tape.min_abs_relu_input() {
        Some(m) => m <= tol,
        None => false,
    }
}

/// Compare reverse-mode adjoints of `output` against central differences,
/// parameter by parameter.
///
/// Relative error uses `max(|fd|, |adjoint|, 1e-3)` as the denominator so
/// that finite-difference roundoff on near-zero gradient entries does not
/// register as failure; sign or scale errors on any meaningful gradient
/// still do.
pub fn grad_check<T: Real>(
    tape: &mut Tape<T>,
    output: NodeId,
    opts: &GradCheckOptions<T>,
) -> Result<GradCheckReport<T>, TapeError> {
    tape.forward()?;
    tape.backward(output)?;
    let params = tape.params();
    let analytic: Vec<Vec<T>> = params
        .iter()
        .map(|&p| tape.adjoint(p).data().to_vec())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let floor = T::of(1e-3);
    let mut entries = Vec::new();
    for (pi, &param) in params.iter().enumerate() {
        let dim = tape.param_value(param).len();
        let mut coords: Vec<usize> = (0..dim).collect();
        if let Some(budget) = opts.max_coords_per_param {
            coords.shuffle(&mut rng);
            coords.truncate(budget);
            coords.sort_unstable();
        }
        let mut max_rel = T::zero();
        let mut checked = 0;
        let mut skipped = 0;
        for &coord in &coords {
            let original = tape.param_value(param).clone();
            let mut plus = original.clone();
            plus.data_mut()[coord] += opts.step;
            tape.set_param(param, plus);
            tape.forward()?;
            let f_plus = tape.scalar_value(output);
            let kink_plus = near_relu_kink(tape, opts.relu_kink_tol);
            let mut minus = original.clone();
            minus.data_mut()[coord] -= opts.step;
            tape.set_param(param, minus);
            tape.forward()?;
            let f_minus = tape.scalar_value(output);
            let kink_minus = near_relu_kink(tape, opts.relu_kink_tol);
            tape.set_param(param, original);
            if kink_plus || kink_minus {
                skipped += 1;
                continue;
            }
            let fd = (f_plus - f_minus) / (T::of(2.0) * opts.step);
            let ad = analytic[pi][coord];
            let rel = (fd - ad).abs() / fd.abs().max(ad.abs()).max(floor);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
        entries.push(ParamCheck {
            param,
            max_rel_error: max_rel,
            coords_checked: checked,
            coords_skipped: skipped,
        });
    }
    // Leave the tape in a consistent evaluated state.
    tape.forward()?;
    tape.backward(output)?;
    let passed = entries.iter().all(|e| e.max_rel_error <= opts.tolerance);
    Ok(GradCheckReport {
        entries,
        tolerance: opts.tolerance,
        passed,
    })
}
