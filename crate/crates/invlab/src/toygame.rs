//! Linear minimax game with closed-form equilibria and exactly analyzable
//! training dynamics.
//!
//! The generator shifts its input by `theta`; the discriminator is the
//! linear functional `<psi, .>`. In the infinite-sample limit the
//! adversarial part collapses to `<psi, v - theta>`, and an invariance
//! penalty `(mu/2) ||P(theta - motif)||^2` pins a motif on the masked
//! coordinates. The whole game is affine-quadratic, so gradient descent and
//! extra-gradient descent are affine iterations whose spectra decide
//! stability.

use crate::linalg::{CoordMask, Matrix, Vector};
use crate::scalar::Real;

/// Discriminator variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscKind {
    /// Sees every coordinate of `v - theta`.
    Standard,
    /// Sees only the coordinates outside the motif mask.
    Modified,
}

/// Stepping scheme for the two-player updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Gd,
    Egd,
}

/// Where the extra-gradient full step is applied from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExtraGradStyle {
    /// Gradients from the half-point applied to the original point.
    #[default]
    FromOriginal,
    /// Extrapolation variant: full step taken from the half-point.
    FromHalfPoint,
}

/// Game instance: data mean, motif on a coordinate mask, invariance weight.
#[derive(Clone, Debug)]
pub struct ToyGame<T = f64> {
    data_mean: Vector<T>,
    motif: Vector<T>,
    mask: CoordMask,
    invariance_weight: T,
    disc: DiscKind,
}

/// Generator offset and discriminator weights.
#[derive(Clone, Debug, PartialEq)]
pub struct GameState<T = f64> {
    pub theta: Vector<T>,
    pub psi: Vector<T>,
}

impl<T: Real> GameState<T> {
    pub fn new(theta: Vector<T>, psi: Vector<T>) -> Self {
        assert_eq!(theta.dim(), psi.dim(), "theta/psi dimension mismatch");
        Self { theta, psi }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(Vector::zeros(dim), Vector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    /// Pack as `theta ++ psi`, the state vector of the affine systems.
    pub fn pack(&self) -> Vector<T> {
        self.theta.concat(&self.psi)
    }

    pub fn unpack(s: &Vector<T>) -> Self {
        let d = s.dim() / 2;
        Self::new(s.slice(0..d), s.slice(d..2 * d))
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.psi.is_finite()
    }

    pub fn norm(&self) -> T {
        self.pack().norm()
    }
}

impl<T: Real> ToyGame<T> {
    pub fn new(
        data_mean: Vector<T>,
        motif: Vector<T>,
        mask: CoordMask,
        invariance_weight: T,
        disc: DiscKind,
    ) -> Self {
        let d = data_mean.dim();
        assert_eq!(motif.dim(), d, "motif dimension mismatch");
        assert_eq!(mask.dim(), d, "mask dimension mismatch");
        assert!(
            invariance_weight > T::zero(),
            "invariance weight must be positive"
        );
        Self {
            data_mean,
            motif,
            mask,
            invariance_weight,
            disc,
        }
    }

    pub fn dim(&self) -> usize {
        self.data_mean.dim()
    }

    pub fn data_mean(&self) -> &Vector<T> {
        &self.data_mean
    }

    pub fn motif(&self) -> &Vector<T> {
        &self.motif
    }

    pub fn mask(&self) -> &CoordMask {
        &self.mask
    }

    pub fn invariance_weight(&self) -> T {
        self.invariance_weight
    }

    pub fn disc(&self) -> DiscKind {
        self.disc
    }

    pub fn with_invariance_weight(&self, mu: T) -> Self {
        assert!(mu > T::zero(), "invariance weight must be positive");
        let mut g = self.clone();
        g.invariance_weight = mu;
        g
    }

    /// Non-fatal diagnostics: the instability analysis is only interesting
    /// when the mask is a proper nonempty subset.
    pub fn validate(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.mask.is_empty() {
            warnings.push("mask is empty: the invariance term vanishes".to_string());
        }
        if self.mask.is_full() {
            warnings
                .push("mask covers every coordinate: no unconstrained block remains".to_string());
        }
        warnings
    }

    /// Loss value at a state.
    ///
    /// Standard: `<psi, v - theta> + (mu/2) ||P(theta - m)||^2`.
    /// Modified: the inner product only sees the mask complement.
    pub fn loss(&self, s: &GameState<T>) -> T {
        assert_eq!(s.dim(), self.dim(), "state dimension mismatch");
        let half = T::of(0.5);
        let residual = &self.data_mean - &s.theta;
        let adversarial = match self.disc {
            DiscKind::Standard => s.psi.dot(&residual),
            DiscKind::Modified => {
                let comp = self.mask.complement();
                comp.project(&s.psi).dot(&comp.project(&residual))
            }
        };
        let motif_err = self.mask.project(&(&s.theta - &self.motif));
        adversarial + half * self.invariance_weight * motif_err.dot(&motif_err)
    }

    /// Loss gradients `(d/dtheta, d/dpsi)` at a state.
    pub fn gradients(&self, s: &GameState<T>) -> (Vector<T>, Vector<T>) {
        assert_eq!(s.dim(), self.dim(), "state dimension mismatch");
        let motif_term = self
            .mask
            .project(&(&s.theta - &self.motif))
            .scale(self.invariance_weight);
        match self.disc {
            DiscKind::Standard => {
                let g_theta = &motif_term - &s.psi;
                let g_psi = &self.data_mean - &s.theta;
                (g_theta, g_psi)
            }
            DiscKind::Modified => {
                let comp = self.mask.complement();
                let g_theta = &motif_term - &comp.project(&s.psi);
                let g_psi = comp.project(&(&self.data_mean - &s.theta));
                (g_theta, g_psi)
            }
        }
    }

    /// Closed-form equilibrium. `kappa` fills the free masked discriminator
    /// coordinates of the Modified variant and is ignored for Standard.
    pub fn equilibrium(&self, kappa: &Vector<T>) -> GameState<T> {
        match self.disc {
            DiscKind::Standard => {
                let theta = self.data_mean.clone();
                let psi = self
                    .mask
                    .project(&(&self.data_mean - &self.motif))
                    .scale(self.invariance_weight);
                GameState::new(theta, psi)
            }
            DiscKind::Modified => {
                let comp = self.mask.complement();
                let theta = &self.mask.project(&self.motif) + &comp.project(&self.data_mean);
                let psi = self.mask.project(kappa);
                GameState::new(theta, psi)
            }
        }
    }

    /// One simultaneous gradient step: both players use gradients evaluated
    /// at the incoming state.
    pub fn gd_step(&self, s: &GameState<T>, eta: T) -> GameState<T> {
        assert!(eta >= T::zero() && eta.is_finite(), "step size must be >= 0");
        let (g_theta, g_psi) = self.gradients(s);
        GameState::new(
            s.theta.add_scaled(&g_theta, -eta),
            s.psi.add_scaled(&g_psi, eta),
        )
    }

    /// One extra-gradient step with the default style: gradients evaluated
    /// at the half-point are applied to the original point.
    pub fn egd_step(&self, s: &GameState<T>, eta: T) -> GameState<T> {
        self.egd_step_with(s, eta, ExtraGradStyle::FromOriginal)
    }

    pub fn egd_step_with(&self, s: &GameState<T>, eta: T, style: ExtraGradStyle) -> GameState<T> {
        let half = self.gd_step(s, eta);
        let (g_theta, g_psi) = self.gradients(&half);
        let base = match style {
            ExtraGradStyle::FromOriginal => s,
            ExtraGradStyle::FromHalfPoint => &half,
        };
        GameState::new(
            base.theta.add_scaled(&g_theta, -eta),
            base.psi.add_scaled(&g_psi, eta),
        )
    }

    /// The affine map `s -> A s + b` of one step, assembled from the
    /// gradient formulas (not transcribed from any printed matrix).
    pub fn iteration_system(&self, method: Method, eta: T) -> IterationSystem<T> {
        self.iteration_system_with(method, eta, ExtraGradStyle::FromOriginal)
    }

    pub fn iteration_system_with(
        &self,
        method: Method,
        eta: T,
        style: ExtraGradStyle,
    ) -> IterationSystem<T> {
        assert!(eta >= T::zero() && eta.is_finite(), "step size must be >= 0");
        let (m, c) = self.gd_affine_map(eta);
        let (a, b) = match method {
            Method::Gd => (m, c),
            Method::Egd => match style {
                ExtraGradStyle::FromOriginal => {
                    // s' = s + eta F(s + eta F(s)) with the gd map M = I + eta F:
                    // A = I + (M - I) M, b = M c.
                    let identity = Matrix::identity(2 * self.dim());
                    let a = &identity + &(&m - &identity).matmul(&m);
                    let b = m.apply(&c);
                    (a, b)
                }
                ExtraGradStyle::FromHalfPoint => {
                    // Two consecutive gd steps: A = M^2, b = M c + c.
                    let a = m.matmul(&m);
                    let b = &m.apply(&c) + &c;
                    (a, b)
                }
            },
        };
        IterationSystem { a, b, method, eta }
    }

    /// Simultaneous-gd affine map `(M, c)` from the gradient formulas.
    fn gd_affine_map(&self, eta: T) -> (Matrix<T>, Vector<T>) {
        let d = self.dim();
        let mu = self.invariance_weight;
        let p_mask: Matrix<T> = self.mask.projection_matrix();
        let coupling: Matrix<T> = match self.disc {
            DiscKind::Standard => Matrix::identity(d),
            DiscKind::Modified => self.mask.complement().projection_matrix(),
        };
        let mut a = Matrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                // theta' = (I - eta mu P) theta + eta E psi + eta mu P m
                a[(i, j)] = kronecker::<T>(i, j) - eta * mu * p_mask[(i, j)];
                a[(i, d + j)] = eta * coupling[(i, j)];
                // psi' = -eta E theta + psi + eta E v
                a[(d + i, j)] = -eta * coupling[(i, j)];
                a[(d + i, d + j)] = kronecker::<T>(i, j);
            }
        }
        let b_theta = self.mask.project(&self.motif).scale(eta * mu);
        let b_psi = coupling.apply(&self.data_mean).scale(eta);
        (a, b_theta.concat(&b_psi))
    }

    /// Iterate the chosen method, recording block distances to equilibrium.
    pub fn simulate(
        &self,
        s0: &GameState<T>,
        method: Method,
        eta: T,
        steps: usize,
        opts: &SimulateOptions<T>,
    ) -> Trajectory<T> {
        assert!(steps >= 1, "simulate needs at least one step");
        let mut state = s0.clone();
        let mut records = Vec::with_capacity(steps + 1);
        let mut outcome = Outcome::Inconclusive;
        records.push(self.distance_record(0, &state));
        for step in 1..=steps {
            state = match method {
                Method::Gd => self.gd_step(&state, eta),
                Method::Egd => self.egd_step_with(&state, eta, opts.egd_style),
            };
            if !state.is_finite() || state.norm() > opts.divergence_norm {
                outcome = Outcome::Diverged { step };
                break;
            }
            let record = self.distance_record(step, &state);
            let dist = record.dist_total;
            records.push(record);
            if dist < opts.convergence_dist {
                outcome = Outcome::Converged { step };
                break;
            }
        }
        Trajectory {
            records,
            outcome,
            final_state: state,
        }
    }

    /// Stability table over a step-size/weight grid: spectra of the linear
    /// part plus the observed simulation outcome.
    pub fn stability_map(
        &self,
        method: Method,
        eta_grid: &[T],
        mu_grid: &[T],
        s0: &GameState<T>,
        budget: usize,
        opts: &SimulateOptions<T>,
    ) -> Vec<StabilityRow<T>> {
        assert!(
            !eta_grid.is_empty() && !mu_grid.is_empty(),
            "stability_map grids must be nonempty"
        );
        let mut rows = Vec::with_capacity(eta_grid.len() * mu_grid.len());
        for &eta in eta_grid {
            for &mu in mu_grid {
                let game = self.with_invariance_weight(mu);
                let system = game.iteration_system(method, eta);
                let outcome = if eta == T::zero() {
                    // Identity iteration: nothing moves.
                    Outcome::Inconclusive
                } else {
                    game.simulate(s0, method, eta, budget, opts).outcome
                };
                rows.push(StabilityRow {
                    eta,
                    mu,
                    sigma_max: system.a.max_singular_value(),
                    spectral_radius: system.a.spectral_radius(),
                    outcome,
                });
            }
        }
        rows
    }

    /// Distances to the closed-form equilibrium, split into mask block and
    /// complement block. For the Modified variant the free masked
    /// discriminator coordinates are excluded by choosing `kappa` equal to
    /// their current value.
    fn distance_record(&self, step: usize, s: &GameState<T>) -> StepRecord<T> {
        let eq = match self.disc {
            DiscKind::Standard => self.equilibrium(&Vector::zeros(self.dim())),
            DiscKind::Modified => self.equilibrium(&s.psi),
        };
        let err_theta = &s.theta - &eq.theta;
        let err_psi = &s.psi - &eq.psi;
        let comp = self.mask.complement();
        let sq = |v: &Vector<T>| v.dot(v);
        let omega = sq(&self.mask.project(&err_theta)) + sq(&self.mask.project(&err_psi));
        let omega_c = sq(&comp.project(&err_theta)) + sq(&comp.project(&err_psi));
        StepRecord {
            step,
            dist_total: (omega + omega_c).sqrt(),
            dist_omega: omega.sqrt(),
            dist_omega_c: omega_c.sqrt(),
        }
    }
}

fn kronecker<T: Real>(i: usize, j: usize) -> T {
    if i == j {
        T::one()
    } else {
        T::zero()
    }
}

/// Affine iteration `s_{l+1} = A s_l + b` over packed states.
#[derive(Clone, Debug)]
pub struct IterationSystem<T = f64> {
    pub a: Matrix<T>,
    pub b: Vector<T>,
    pub method: Method,
    pub eta: T,
}

impl<T: Real> IterationSystem<T> {
    pub fn apply(&self, s: &GameState<T>) -> GameState<T> {
        let next = &self.a.apply(&s.pack()) + &self.b;
        GameState::unpack(&next)
    }

    /// Fixed point `(I - A)^{-1} b`, when `I - A` is invertible.
    pub fn fixed_point(&self) -> Option<GameState<T>> {
        let n = self.a.rows();
        let i_minus_a = &Matrix::identity(n) - &self.a;
        i_minus_a.solve(&self.b).map(|s| GameState::unpack(&s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Converged { step: usize },
    Diverged { step: usize },
    Inconclusive,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Converged { .. } => "converged",
            Outcome::Diverged { .. } => "diverged",
            Outcome::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulateOptions<T = f64> {
    /// State norm beyond which the run is declared diverged.
    pub divergence_norm: T,
    /// Distance to equilibrium below which the run is declared converged.
    pub convergence_dist: T,
    pub egd_style: ExtraGradStyle,
}

impl<T: Real> Default for SimulateOptions<T> {
    fn default() -> Self {
        Self {
            divergence_norm: T::of(1e12),
            convergence_dist: T::of(1e-8),
            egd_style: ExtraGradStyle::FromOriginal,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepRecord<T = f64> {
    pub step: usize,
    pub dist_total: T,
    pub dist_omega: T,
    pub dist_omega_c: T,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T = f64> {
    pub records: Vec<StepRecord<T>>,
    pub outcome: Outcome,
    pub final_state: GameState<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,dist_total,dist_omega,dist_omega_c\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.step, r.dist_total, r.dist_omega, r.dist_omega_c
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StabilityRow<T = f64> {
    pub eta: T,
    pub mu: T,
    pub sigma_max: T,
    pub spectral_radius: T,
    pub outcome: Outcome,
}

pub fn stability_rows_to_csv<T: Real>(rows: &[StabilityRow<T>]) -> String {
    let mut out = String::from("eta,mu,sigma_max,spectral_radius,outcome\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.eta,
            r.mu,
            r.sigma_max,
            r.spectral_radius,
            r.outcome.label()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// d=2 instance used by the worked examples: mask {0}, v=(1,2),
    /// motif=(5,0), mu=1.
    fn example_game(disc: DiscKind) -> ToyGame<f64> {
        ToyGame::new(
            Vector::new(vec![1.0, 2.0]),
            Vector::new(vec![5.0, 0.0]),
            CoordMask::from_indices(2, &[0]),
            1.0,
            disc,
        )
    }

    fn random_game(rng: &mut ChaCha8Rng, disc: DiscKind) -> ToyGame<f64> {
        let d = rng.gen_range(2..8);
        let n_masked = rng.gen_range(1..d);
        let mut idx: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            idx.swap(i, rng.gen_range(0..=i));
        }
        let mask = CoordMask::from_indices(d, &idx[..n_masked]);
        let motif = Vector::from_fn(d, |i| {
            if mask.contains(i) {
                rng.gen_range(-2.0..2.0)
            } else {
                0.0
            }
        });
        ToyGame::new(
            Vector::from_fn(d, |_| rng.gen_range(-2.0..2.0)),
            motif,
            mask,
            rng.gen_range(0.1..3.0),
            disc,
        )
    }

    fn random_state(rng: &mut ChaCha8Rng, d: usize) -> GameState<f64> {
        GameState::new(
            Vector::from_fn(d, |_| rng.gen_range(-2.0..2.0)),
            Vector::from_fn(d, |_| rng.gen_range(-2.0..2.0)),
        )
    }

    #[test]
    fn loss_hand_examples() {
        let game = example_game(DiscKind::Standard);
        // theta = v and matched motif: both terms vanish.
        let matched = ToyGame::new(
            Vector::new(vec![1.0, 2.0]),
            Vector::new(vec![1.0, 0.0]),
            CoordMask::from_indices(2, &[0]),
            1.0,
            DiscKind::Standard,
        );
        let s = GameState::new(Vector::new(vec![1.0, 2.0]), Vector::new(vec![7.0, -3.0]));
        assert_eq!(matched.loss(&s), 0.0);

        let s = GameState::new(Vector::new(vec![1.0, 2.0]), Vector::new(vec![1.0, 1.0]));
        assert_eq!(game.loss(&s), 8.0);

        let modified = example_game(DiscKind::Modified);
        let s = GameState::new(Vector::new(vec![1.0, 2.0]), Vector::new(vec![9.0, 1.0]));
        assert_eq!(modified.loss(&s), 8.0);
    }

    #[test]
    fn gradients_hand_example() {
        let game = example_game(DiscKind::Standard);
        let s = GameState::zeros(2);
        let (g_theta, g_psi) = game.gradients(&s);
        assert_eq!(g_theta.as_slice(), &[-5.0, 0.0]);
        assert_eq!(g_psi.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let h = 1e-6;
        for trial in 0..100 {
            let disc = if trial % 2 == 0 {
                DiscKind::Standard
            } else {
                DiscKind::Modified
            };
            let game = random_game(&mut rng, disc);
            let s = random_state(&mut rng, game.dim());
            let (g_theta, g_psi) = game.gradients(&s);
            for i in 0..game.dim() {
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp.theta[i] += h;
                sm.theta[i] -= h;
                let fd = (game.loss(&sp) - game.loss(&sm)) / (2.0 * h);
                assert!(
                    (fd - g_theta[i]).abs() / fd.abs().max(g_theta[i].abs()).max(1.0) < 1e-6,
                    "theta[{i}]: fd={fd}, ad={}",
                    g_theta[i]
                );
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp.psi[i] += h;
                sm.psi[i] -= h;
                let fd = (game.loss(&sp) - game.loss(&sm)) / (2.0 * h);
                assert!(
                    (fd - g_psi[i]).abs() / fd.abs().max(g_psi[i].abs()).max(1.0) < 1e-6,
                    "psi[{i}]: fd={fd}, ad={}",
                    g_psi[i]
                );
            }
        }
    }

    #[test]
    fn equilibrium_hand_examples() {
        let game = example_game(DiscKind::Standard);
        let eq = game.equilibrium(&Vector::zeros(2));
        assert_eq!(eq.theta.as_slice(), &[1.0, 2.0]);
        assert_eq!(eq.psi.as_slice(), &[-4.0, 0.0]);

        let modified = example_game(DiscKind::Modified);
        let kappa = Vector::new(vec![0.37, 99.0]);
        let eq = modified.equilibrium(&kappa);
        assert_eq!(eq.theta.as_slice(), &[5.0, 2.0]);
        assert_eq!(eq.psi.as_slice(), &[0.37, 0.0]);
    }

    #[test]
    fn matched_motif_recovers_plain_adversarial_equilibrium() {
        // When the data mean already exhibits the motif, the Standard
        // equilibrium is (v, 0).
        let game = ToyGame::new(
            Vector::new(vec![5.0, 2.0]),
            Vector::new(vec![5.0, 0.0]),
            CoordMask::from_indices(2, &[0]),
            1.3,
            DiscKind::Standard,
        );
        let eq = game.equilibrium(&Vector::zeros(2));
        assert_eq!(eq.theta.as_slice(), &[5.0, 2.0]);
        assert_eq!(eq.psi.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn equilibrium_gradients_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        for trial in 0..100 {
            let disc = if trial % 2 == 0 {
                DiscKind::Standard
            } else {
                DiscKind::Modified
            };
            let game = random_game(&mut rng, disc);
            let kappa = Vector::from_fn(game.dim(), |_| rng.gen_range(-2.0..2.0));
            let eq = game.equilibrium(&kappa);
            let (g_theta, g_psi) = game.gradients(&eq);
            assert!(g_theta.norm() <= 1e-12);
            assert!(g_psi.norm() <= 1e-12);
        }
    }

    #[test]
    fn gd_step_hand_example() {
        let game = example_game(DiscKind::Standard);
        let s = game.gd_step(&GameState::zeros(2), 0.1);
        assert!((s.theta[0] - 0.5).abs() < 1e-15);
        assert!(s.theta[1].abs() < 1e-15);
        assert!((s.psi[0] - 0.1).abs() < 1e-15);
        assert!((s.psi[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn steps_fix_the_equilibrium() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for trial in 0..20 {
            let disc = if trial % 2 == 0 {
                DiscKind::Standard
            } else {
                DiscKind::Modified
            };
            let game = random_game(&mut rng, disc);
            let eq = game.equilibrium(&Vector::from_fn(game.dim(), |_| rng.gen_range(-1.0..1.0)));
            let after_gd = game.gd_step(&eq, 0.2);
            let after_egd = game.egd_step(&eq, 0.2);
            assert!((&after_gd.pack() - &eq.pack()).norm() < 1e-14);
            assert!((&after_egd.pack() - &eq.pack()).norm() < 1e-14);
        }
    }

    /// Extract the affine map of a one-step operation by probing it on basis
    /// states: independent route used to validate the symbolic composition.
    fn probe_affine_map(
        game: &ToyGame<f64>,
        step: impl Fn(&GameState<f64>) -> GameState<f64>,
    ) -> (Matrix<f64>, Vector<f64>) {
        let d = game.dim();
        let zero = GameState::zeros(d);
        let b = step(&zero).pack();
        let mut a = Matrix::zeros(2 * d, 2 * d);
        for j in 0..2 * d {
            let mut e = Vector::zeros(2 * d);
            e[j] = 1.0;
            let col = &step(&GameState::unpack(&e)).pack() - &b;
            for i in 0..2 * d {
                a[(i, j)] = col[i];
            }
        }
        (a, b)
    }

    #[test]
    fn egd_step_equals_symbolically_composed_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        for trial in 0..20 {
            let disc = if trial % 2 == 0 {
                DiscKind::Standard
            } else {
                DiscKind::Modified
            };
            let game = random_game(&mut rng, disc);
            let eta = rng.gen_range(0.05..0.5);
            // Compose the two half-steps symbolically from the probed gd map:
            // s' = s + (M - I)(M s + c) + c  for the default style.
            let (m, c) = probe_affine_map(&game, |s| game.gd_step(s, eta));
            let d2 = 2 * game.dim();
            let identity = Matrix::<f64>::identity(d2);
            let a_expected = &identity + &(&m - &identity).matmul(&m);
            let b_expected = m.apply(&c);
            for _ in 0..5 {
                let s = random_state(&mut rng, game.dim());
                let direct = game.egd_step(&s, eta).pack();
                let composed = &a_expected.apply(&s.pack()) + &b_expected;
                assert!((&direct - &composed).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gd_standard_system_matches_block_formula() {
        let game = example_game(DiscKind::Standard);
        let eta = 0.1;
        let mu = 1.0;
        let system = game.iteration_system(Method::Gd, eta);
        // [[I - eta mu P, eta I], [-eta I, I]]
        let expected = Matrix::from_rows(&[
            vec![1.0 - eta * mu, 0.0, eta, 0.0],
            vec![0.0, 1.0, 0.0, eta],
            vec![-eta, 0.0, 1.0, 0.0],
            vec![0.0, -eta, 0.0, 1.0],
        ]);
        assert!((&system.a - &expected).frobenius_norm() < 1e-15);
        // b = (eta mu P m, eta v)
        assert_eq!(system.b.as_slice(), &[0.5, 0.0, 0.1, 0.2]);
    }

    #[test]
    fn gd_modified_coupling_block_has_no_weight_factor() {
        // Differentiating the modified loss gives an upper-right block
        // eta*P_complement, with no invariance-weight factor.
        let game = example_game(DiscKind::Modified).with_invariance_weight(3.0);
        let eta = 0.2;
        let system = game.iteration_system(Method::Gd, eta);
        let d = game.dim();
        for i in 0..d {
            for j in 0..d {
                let expected = if i == j && !game.mask().contains(i) {
                    eta
                } else {
                    0.0
                };
                assert!((system.a[(i, d + j)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn egd_complement_block_is_rotation_scaling() {
        let game = example_game(DiscKind::Standard);
        for &eta in &[0.1, 0.3, 0.5] {
            let system = game.iteration_system(Method::Egd, eta);
            let d = game.dim();
            // Complement coordinate 1: state indices 1 (theta) and d+1 (psi).
            let idx = [1usize, d + 1];
            let block = system.a.select(&idx, &idx);
            let a = 1.0 - eta * eta;
            assert!((block[(0, 0)] - a).abs() < 1e-14);
            assert!((block[(0, 1)] - eta).abs() < 1e-14);
            assert!((block[(1, 0)] + eta).abs() < 1e-14);
            assert!((block[(1, 1)] - a).abs() < 1e-14);
        }
    }

    #[test]
    fn step_operations_match_affine_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        for trial in 0..100 {
            let disc = if trial % 2 == 0 {
                DiscKind::Standard
            } else {
                DiscKind::Modified
            };
            let game = random_game(&mut rng, disc);
            let eta = rng.gen_range(0.01..0.4);
            for &method in &[Method::Gd, Method::Egd] {
                let system = game.iteration_system(method, eta);
                let mut s = random_state(&mut rng, game.dim());
                let mut s_sys = s.clone();
                for _ in 0..20 {
                    s = match method {
                        Method::Gd => game.gd_step(&s, eta),
                        Method::Egd => game.egd_step(&s, eta),
                    };
                    s_sys = system.apply(&s_sys);
                }
                assert!(
                    (&s.pack() - &s_sys.pack()).norm() <= 1e-10,
                    "method {method:?} diverged from affine system"
                );
            }
        }
    }

    #[test]
    fn gd_fixed_point_matches_equilibrium() {
        let mut rng = ChaCha8Rng::seed_from_u64(106);
        for _ in 0..50 {
            let game = random_game(&mut rng, DiscKind::Standard);
            let system = game.iteration_system(Method::Gd, rng.gen_range(0.05..0.3));
            let fixed = system.fixed_point().expect("standard gd system is regular");
            let eq = game.equilibrium(&Vector::zeros(game.dim()));
            assert!((&fixed.pack() - &eq.pack()).norm() <= 1e-10);
        }
    }

    #[test]
    fn modified_fixed_point_is_singular() {
        // The masked discriminator coordinates are free at equilibrium, so
        // I - A is singular and the linear solve reports it.
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let game = random_game(&mut rng, DiscKind::Modified);
        let system = game.iteration_system(Method::Gd, 0.1);
        assert!(system.fixed_point().is_none());
    }

    #[test]
    fn gd_complement_distance_grows_at_exact_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(108);
        let game = random_game(&mut rng, DiscKind::Standard);
        let eta = 0.1;
        let s0 = random_state(&mut rng, game.dim());
        let traj = game.simulate(&s0, Method::Gd, eta, 1000, &SimulateOptions::default());
        let factor = (1.0 + eta * eta).sqrt();
        for w in traj.records.windows(2) {
            if w[0].dist_omega_c < 1e-9 {
                continue;
            }
            let ratio = w[1].dist_omega_c / w[0].dist_omega_c;
            assert!(
                (ratio - factor).abs() / factor < 0.01,
                "step {}: ratio {ratio} vs {factor}",
                w[1].step
            );
        }
    }

    #[test]
    fn egd_converges_at_moderate_step_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let game = random_game(&mut rng, DiscKind::Standard).with_invariance_weight(0.3);
        let s0 = random_state(&mut rng, game.dim());
        let opts = SimulateOptions {
            convergence_dist: 1e-6,
            ..SimulateOptions::default()
        };
        let traj = game.simulate(&s0, Method::Egd, 0.3, 50_000, &opts);
        assert!(matches!(traj.outcome, Outcome::Converged { .. }));
    }

    #[test]
    fn egd_modified_plants_the_motif() {
        // Motif differs from the data mean on the mask; the modified game
        // still drives the masked generator coordinates onto the motif.
        let game = ToyGame::new(
            Vector::new(vec![1.0, 2.0, -0.5]),
            Vector::new(vec![5.0, 0.0, 0.0]),
            CoordMask::from_indices(3, &[0]),
            0.5,
            DiscKind::Modified,
        );
        let s0 = GameState::new(
            Vector::new(vec![0.3, -0.7, 1.1]),
            Vector::new(vec![0.9, 0.2, -0.4]),
        );
        let opts = SimulateOptions {
            convergence_dist: 1e-9,
            ..SimulateOptions::default()
        };
        let traj = game.simulate(&s0, Method::Egd, 0.3, 100_000, &opts);
        let masked_err = game
            .mask()
            .project(&(&traj.final_state.theta - game.motif()));
        assert!(masked_err.norm() <= 1e-6);
    }

    #[test]
    fn gd_divergence_is_detected_not_crashed() {
        let mut rng = ChaCha8Rng::seed_from_u64(110);
        let game = random_game(&mut rng, DiscKind::Standard);
        let s0 = random_state(&mut rng, game.dim());
        let traj = game.simulate(&s0, Method::Gd, 0.5, 500_000, &SimulateOptions::default());
        assert!(matches!(traj.outcome, Outcome::Diverged { .. }));
        assert!(traj.final_state.is_finite());
    }

    #[test]
    fn stability_map_gd_rows_never_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(111);
        for &disc in &[DiscKind::Standard, DiscKind::Modified] {
            let game = random_game(&mut rng, disc);
            let s0 = random_state(&mut rng, game.dim());
            let rows = game.stability_map(
                Method::Gd,
                &[1e-3, 1e-2, 1e-1],
                &[0.1, 1.0, 10.0],
                &s0,
                2000,
                &SimulateOptions::default(),
            );
            assert_eq!(rows.len(), 9);
            for row in rows {
                assert!(row.sigma_max >= 1.0 - 1e-9, "sigma_max {}", row.sigma_max);
            }
        }
    }

    #[test]
    fn egd_spectral_radius_approaches_complement_formula_for_tiny_weight() {
        let game = example_game(DiscKind::Standard).with_invariance_weight(1e-9);
        for &eta in &[0.1, 0.3, 0.5, 0.8] {
            let system = game.iteration_system(Method::Egd, eta);
            let expected = ((1.0 - eta * eta).powi(2) + eta * eta).sqrt();
            assert!(
                (system.a.spectral_radius() - expected).abs() < 1e-6,
                "eta={eta}"
            );
        }
    }

    #[test]
    fn zero_step_size_is_the_identity_map() {
        let game = example_game(DiscKind::Standard);
        let system = game.iteration_system(Method::Gd, 0.0);
        assert!((&system.a - &Matrix::identity(4)).frobenius_norm() < 1e-15);
        assert_eq!(system.b.as_slice(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_mask_trajectory_ignores_invariance_weight() {
        // Pure bilinear game: the invariance weight multiplies an empty
        // projection, so rescaling it cannot move the generator trajectory.
        let mut rng = ChaCha8Rng::seed_from_u64(112);
        let d = 3;
        let game_a = ToyGame::new(
            Vector::from_fn(d, |_| rng.gen_range(-1.0..1.0)),
            Vector::zeros(d),
            CoordMask::empty(d),
            0.7,
            DiscKind::Standard,
        );
        let game_b = game_a.with_invariance_weight(7000.0);
        let s0 = random_state(&mut rng, d);
        let mut sa = s0.clone();
        let mut sb = s0;
        for _ in 0..200 {
            sa = game_a.gd_step(&sa, 0.1);
            sb = game_b.gd_step(&sb, 0.1);
            assert!((&sa.theta - &sb.theta).norm() <= 1e-9);
        }
    }

    #[test]
    fn validation_warns_on_degenerate_masks() {
        let game = ToyGame::new(
            Vector::zeros(2),
            Vector::zeros(2),
            CoordMask::empty(2),
            1.0,
            DiscKind::Standard,
        );
        assert_eq!(game.validate().len(), 1);
        let game = ToyGame::new(
            Vector::zeros(2),
            Vector::zeros(2),
            CoordMask::from_indices(2, &[0, 1]),
            1.0,
            DiscKind::Standard,
        );
        assert_eq!(game.validate().len(), 1);
        assert!(example_game(DiscKind::Standard).validate().is_empty());
    }

    #[test]
    fn trajectory_csv_has_contract_header() {
        let game = example_game(DiscKind::Standard);
        let traj = game.simulate(
            &GameState::zeros(2),
            Method::Egd,
            0.2,
            3,
            &SimulateOptions::default(),
        );
        let csv = traj.to_csv();
        assert!(csv.starts_with("step,dist_total,dist_omega,dist_omega_c\n"));
        let rows = game.stability_map(
            Method::Gd,
            &[0.1],
            &[1.0],
            &GameState::zeros(2),
            10,
            &SimulateOptions::default(),
        );
        assert!(
            stability_rows_to_csv(&rows).starts_with("eta,mu,sigma_max,spectral_radius,outcome\n")
        );
    }
}
