//! Alternating-optimization driver and its extra-gradient variant.
//!
//! The driver is generic over an [`Objectives`] pair: a minimax objective
//! seen by the generator/discriminator loops and an invariance objective
//! seen by the dedicated invariance loop. Each outer iteration runs the
//! three inner loops in order (generator, discriminator, invariance),
//! evaluating every gradient at the current, just-updated state.

use crate::toygame::{GameState, ToyGame};
use crate::linalg::Vector;

/// Differentiable objective pair over a `(theta, psi)` parameter split.
///
/// `main_*` is the minimax objective; `invariance_*` the constraint term
/// driven by the third loop and watched by the stopping rule. Methods take
/// `&mut self` so implementations may reuse internal tapes.
pub trait Objectives {
    fn theta_dim(&self) -> usize;
    /// Zero selects the discriminator-free regime.
    fn psi_dim(&self) -> usize;
    fn main_loss(&mut self, theta: &[f64], psi: &[f64]) -> f64;
    fn main_grad_theta(&mut self, theta: &[f64], psi: &[f64]) -> Vec<f64>;
    fn main_grad_psi(&mut self, theta: &[f64], psi: &[f64]) -> Vec<f64>;
    fn invariance_loss(&mut self, theta: &[f64]) -> f64;
    fn invariance_grad_theta(&mut self, theta: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    PlainGd,
    Momentum { beta: f64 },
    AdaptiveMoments { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adaptive_default() -> Self {
        OptimizerKind::AdaptiveMoments {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter-block optimizer state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    momentum: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, dim: usize) -> Self {
        Self {
            kind,
            momentum: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
        }
    }

    /// One descent step along `grad` with step size `eta`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], eta: f64) {
        assert_eq!(params.len(), grad.len(), "optimizer_step: shape mismatch");
        match self.kind {
            OptimizerKind::PlainGd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= eta * g;
                }
            }
            OptimizerKind::Momentum { beta } => {
                for ((p, g), v) in params.iter_mut().zip(grad).zip(&mut self.momentum) {
                    *v = beta * *v + g;
                    *p -= eta * *v;
                }
            }
            OptimizerKind::AdaptiveMoments {
                beta1,
                beta2,
                epsilon,
            } => {
                self.step_count += 1;
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(self.momentum.iter_mut().zip(&mut self.second_moment))
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= eta * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }

    /// One ascent step (used for the discriminator).
    pub fn step_ascent(&mut self, params: &mut [f64], grad: &[f64], eta: f64) {
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        self.step(params, &neg, eta);
    }
}

#[derive(Clone, Debug)]
pub struct AltOptConfig {
    /// Generator steps per outer iteration.
    pub n_g: usize,
    /// Discriminator steps per outer iteration; zero means data-free.
    pub n_d: usize,
    /// Invariance steps per outer iteration.
    pub n_i: usize,
    pub eta_g: f64,
    pub eta_d: f64,
    /// Step size of the invariance loop; the algorithm listing reuses the
    /// discriminator rate there, so `None` falls back to `eta_d`.
    pub eta_i: Option<f64>,
    pub optimizer: OptimizerKind,
    pub max_outer: usize,
    /// Invariance-loss threshold of the stopping rule.
    pub stop_tol: f64,
    /// Loss magnitude beyond which the run is declared diverged.
    pub divergence_loss: f64,
}

impl Default for AltOptConfig {
    fn default() -> Self {
        Self {
            n_g: 1,
            n_d: 0,
            n_i: 1,
            eta_g: 1e-3,
            eta_d: 1e-3,
            eta_i: None,
            optimizer: OptimizerKind::adaptive_default(),
            max_outer: 10_000,
            stop_tol: 1e-10,
            divergence_loss: 1e12,
        }
    }
}

impl AltOptConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_g == 0 && self.n_i == 0 {
            return Err("at least one of the generator/invariance loop counts must be positive".into());
        }
        if !(self.eta_g > 0.0 && self.eta_d > 0.0) {
            return Err("step sizes must be positive".into());
        }
        if let Some(eta_i) = self.eta_i {
            if eta_i <= 0.0 {
                return Err("invariance step size must be positive".into());
            }
        }
        if self.max_outer == 0 {
            return Err("outer budget must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LedgerRecord {
    pub iter: usize,
    pub l_total: f64,
    pub l_g: f64,
    pub l_d: f64,
    pub l_i: f64,
    pub gnorm_theta: f64,
    pub gnorm_psi: f64,
}

/// Append-only per-outer-iteration loss history.
#[derive(Clone, Debug, Default)]
pub struct LossLedger {
    records: Vec<LedgerRecord>,
}

impl LossLedger {
    pub fn push(&mut self, record: LedgerRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.iter > last.iter, "ledger iterations must increase");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&LedgerRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,L_total,L_G,L_D,L_I,gnorm_theta,gnorm_psi\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.iter, r.l_total, r.l_g, r.l_d, r.l_i, r.gnorm_theta, r.gnorm_psi
            ));
        }
        out
    }
}

/// Why a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunOutcome {
    /// Stopping rule met: small invariance loss and a stalled generator.
    Stopped { iter: usize },
    BudgetExhausted,
    /// Non-finite or runaway loss; the offending iteration is recorded.
    Diverged { iter: usize, loss: f64 },
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
    pub ledger: LossLedger,
    pub outcome: RunOutcome,
    /// Generator parameters at the lowest total loss seen.
    pub best_theta: Vec<f64>,
    pub best_loss: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative generator movement used by the stopping rule.
fn relative_step(theta_old: &[f64], theta_new: &[f64]) -> f64 {
    let diff: f64 = theta_old
        .iter()
        .zip(theta_new)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / norm(theta_old).max(1.0)
}

const STALL_WINDOW: usize = 10;
const STALL_TOL: f64 = 1e-7;

/// Three-way alternating optimization: `n_g` generator descent steps on the
/// minimax objective, `n_d` discriminator ascent steps, then `n_i` generator
/// descent steps on the invariance objective, repeated until the invariance
/// loss drops below `stop_tol` while the generator has stalled, or the
/// budget runs out.
pub fn run_alternating<O: Objectives>(
    objectives: &mut O,
    theta0: &[f64],
    psi0: &[f64],
    cfg: &AltOptConfig,
) -> RunResult {
    cfg.validate().expect("invalid alternating-optimization config");
    assert_eq!(theta0.len(), objectives.theta_dim());
    assert_eq!(psi0.len(), objectives.psi_dim());
    let mut theta = theta0.to_vec();
    let mut psi = psi0.to_vec();
    let mut opt_g = Optimizer::new(cfg.optimizer, theta.len());
    let mut opt_d = Optimizer::new(cfg.optimizer, psi.len());
    let mut opt_i = Optimizer::new(cfg.optimizer, theta.len());
    let eta_i = cfg.eta_i.unwrap_or(cfg.eta_d);
    let mut ledger = LossLedger::default();
    let mut recent_steps: Vec<f64> = Vec::new();
    let mut outcome = RunOutcome::BudgetExhausted;
    let mut best_theta = theta.clone();
    let mut best_loss = objectives.main_loss(&theta, &psi) + objectives.invariance_loss(&theta);

    for iter in 0..cfg.max_outer {
        let theta_before = theta.clone();
        let mut gnorm_theta = 0.0;
        let mut gnorm_psi = 0.0;

        for _ in 0..cfg.n_g {
            let g = objectives.main_grad_theta(&theta, &psi);
            gnorm_theta = norm(&g);
            opt_g.step(&mut theta, &g, cfg.eta_g);
        }
        let l_g = objectives.main_loss(&theta, &psi);

        for _ in 0..cfg.n_d {
            let g = objectives.main_grad_psi(&theta, &psi);
            gnorm_psi = norm(&g);
            opt_d.step_ascent(&mut psi, &g, cfg.eta_d);
        }
        let l_d = objectives.main_loss(&theta, &psi);

        for _ in 0..cfg.n_i {
            let g = objectives.invariance_grad_theta(&theta);
            opt_i.step(&mut theta, &g, eta_i);
        }
        let l_i = objectives.invariance_loss(&theta);

        let l_main = objectives.main_loss(&theta, &psi);
        let l_total = l_main + l_i;
        ledger.push(LedgerRecord {
            iter,
            l_total,
            l_g,
            l_d,
            l_i,
            gnorm_theta,
            gnorm_psi,
        });

        if l_total.is_finite() && l_total < best_loss {
            best_loss = l_total;
            best_theta.copy_from_slice(&theta);
        }

        if !l_total.is_finite() || l_total.abs() > cfg.divergence_loss {
            outcome = RunOutcome::Diverged {
                iter,
                loss: l_total,
            };
            break;
        }

        recent_steps.push(relative_step(&theta_before, &theta));
        if recent_steps.len() > STALL_WINDOW {
            recent_steps.remove(0);
        }
        let stalled = recent_steps.len() == STALL_WINDOW
            && recent_steps.iter().all(|&s| s < STALL_TOL);
        if l_i < cfg.stop_tol && stalled {
            outcome = RunOutcome::Stopped { iter };
            break;
        }
    }

    RunResult {
        theta,
        psi,
        ledger,
        outcome,
        best_theta,
        best_loss,
    }
}

/// Extra-gradient runs: each outer iteration takes a provisional
/// simultaneous step, then applies the gradients evaluated at that
/// half-point to the original point. Plain steps only; the two-phase update
/// is the method.
pub fn run_egd<O: Objectives>(
    objectives: &mut O,
    theta0: &[f64],
    psi0: &[f64],
    cfg: &AltOptConfig,
) -> RunResult {
    cfg.validate().expect("invalid extra-gradient config");
    assert_eq!(theta0.len(), objectives.theta_dim());
    assert_eq!(psi0.len(), objectives.psi_dim());
    let mut theta = theta0.to_vec();
    let mut psi = psi0.to_vec();
    let mut ledger = LossLedger::default();
    let mut recent_steps: Vec<f64> = Vec::new();
    let mut outcome = RunOutcome::BudgetExhausted;
    let mut best_theta = theta.clone();
    let mut best_loss = objectives.main_loss(&theta, &psi) + objectives.invariance_loss(&theta);

    for iter in 0..cfg.max_outer {
        let g_theta = objectives.main_grad_theta(&theta, &psi);
        let g_psi = objectives.main_grad_psi(&theta, &psi);
        let theta_half: Vec<f64> = theta
            .iter()
            .zip(&g_theta)
            .map(|(p, g)| p - cfg.eta_g * g)
            .collect();
        let psi_half: Vec<f64> = psi
            .iter()
            .zip(&g_psi)
            .map(|(p, g)| p + cfg.eta_d * g)
            .collect();
        let g_theta_half = objectives.main_grad_theta(&theta_half, &psi_half);
        let g_psi_half = objectives.main_grad_psi(&theta_half, &psi_half);
        let theta_before = theta.clone();
        for (p, g) in theta.iter_mut().zip(&g_theta_half) {
            *p -= cfg.eta_g * g;
        }
        for (p, g) in psi.iter_mut().zip(&g_psi_half) {
            *p += cfg.eta_d * g;
        }

        let l_main = objectives.main_loss(&theta, &psi);
        let l_i = objectives.invariance_loss(&theta);
        let l_total = l_main + l_i;
        ledger.push(LedgerRecord {
            iter,
            l_total,
            l_g: l_main,
            l_d: l_main,
            l_i,
            gnorm_theta: norm(&g_theta_half),
            gnorm_psi: norm(&g_psi_half),
        });

        if l_total.is_finite() && l_total < best_loss {
            best_loss = l_total;
            best_theta.copy_from_slice(&theta);
        }

        if !l_total.is_finite() || l_total.abs() > cfg.divergence_loss {
            outcome = RunOutcome::Diverged {
                iter,
                loss: l_total,
            };
            break;
        }
        recent_steps.push(relative_step(&theta_before, &theta));
        if recent_steps.len() > STALL_WINDOW {
            recent_steps.remove(0);
        }
        let stalled = recent_steps.len() == STALL_WINDOW
            && recent_steps.iter().all(|&s| s < STALL_TOL);
        if l_i < cfg.stop_tol && stalled {
            outcome = RunOutcome::Stopped { iter };
            break;
        }
    }

    RunResult {
        theta,
        psi,
        ledger,
        outcome,
        best_theta,
        best_loss,
    }
}

/// Adapter exposing the linear minimax game through the [`Objectives`]
/// trait: the main objective is the full game loss, the invariance
/// objective its motif penalty.
pub struct ToyGameObjectives {
    game: ToyGame<f64>,
}

impl ToyGameObjectives {
    pub fn new(game: ToyGame<f64>) -> Self {
        Self { game }
    }

    fn state(&self, theta: &[f64], psi: &[f64]) -> GameState<f64> {
        GameState::new(Vector::new(theta.to_vec()), Vector::new(psi.to_vec()))
    }
}

impl Objectives for ToyGameObjectives {
    fn theta_dim(&self) -> usize {
        self.game.dim()
    }

    fn psi_dim(&self) -> usize {
        self.game.dim()
    }

    fn main_loss(&mut self, theta: &[f64], psi: &[f64]) -> f64 {
        self.game.loss(&self.state(theta, psi))
    }

    fn main_grad_theta(&mut self, theta: &[f64], psi: &[f64]) -> Vec<f64> {
        self.game.gradients(&self.state(theta, psi)).0.into_vec()
    }

    fn main_grad_psi(&mut self, theta: &[f64], psi: &[f64]) -> Vec<f64> {
        self.game.gradients(&self.state(theta, psi)).1.into_vec()
    }

    fn invariance_loss(&mut self, theta: &[f64]) -> f64 {
        let t = Vector::new(theta.to_vec());
        let err = self.game.mask().project(&(&t - self.game.motif()));
        0.5 * self.game.invariance_weight() * err.dot(&err)
    }

    fn invariance_grad_theta(&mut self, theta: &[f64]) -> Vec<f64> {
        let t = Vector::new(theta.to_vec());
        self.game
            .mask()
            .project(&(&t - self.game.motif()))
            .scale(self.game.invariance_weight())
            .into_vec()
    }
}
