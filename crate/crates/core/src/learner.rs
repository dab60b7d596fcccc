//! Learn-control cycles.
//!
//! A cycle of length `tau = (m + 1) dt` applies the steering input `u_0` and then
//! `m` perturbed copies `u_j = u_0 + s_j eps e_j`, each for `dt`. The `m + 2`
//! sampled states give finite-difference velocities `w_j = (x_{j+1} - x_j) / dt`,
//! and since the dynamics are affine in `u`, any affine combination
//! `sum lambda_j w_j` estimates the velocity under `u_lambda = sum lambda_j u_j`.
//!
//! The weights are allowed to be negative (affine, not convex, combinations).
//! Restricting them to the simplex would confine `u_lambda` to a tiny
//! neighbourhood of `u_0` and the next steering input could never turn.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, Lipschitz};
use crate::plant::Plant;
use crate::proxy::{spectral_norm, ProxyParams};

/// Default constant `C` in the advisory check `eps > C dt^2`.
pub const DEFAULT_EPS_DT2_CONSTANT: f64 = 100.0;

const ADMISSIBLE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("invalid cycle configuration: {0}")]
    InvalidConfig(String),
    #[error("base input |u0| = {norm} exceeds 1 - eps = {limit}")]
    InadmissibleBase { norm: f64, limit: f64 },
    #[error("invalid weights: {0}")]
    Parameter(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// `(dt, eps, k)` plus the input dimension `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    pub dt: f64,
    pub eps: f64,
    pub k: f64,
    pub m: usize,
}

impl CycleConfig {
    pub fn new(dt: f64, eps: f64, k: f64, m: usize) -> Result<Self, LearnerError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(LearnerError::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(LearnerError::InvalidConfig(format!(
                "eps must lie in (0, 1), got {eps}"
            )));
        }
        if !(k >= 1.0) || !k.is_finite() {
            return Err(LearnerError::InvalidConfig(format!("k must be >= 1, got {k}")));
        }
        if m == 0 {
            return Err(LearnerError::InvalidConfig("input dimension must be >= 1".into()));
        }
        Ok(Self { dt, eps, k, m })
    }

    /// Cycle length `(m + 1) dt`.
    pub fn tau(&self) -> f64 {
        (self.m + 1) as f64 * self.dt
    }

    /// Advisory: `eps > constant * dt^2`. Never enforced.
    pub fn eps_dominates_dt2(&self, constant: f64) -> bool {
        self.eps > constant * self.dt * self.dt
    }
}

/// Constants entering the error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Bound on `sup |f|` and `sup ||G||` over the proxy domain.
    pub m0: f64,
    /// Auxiliary constant of the suboptimality bound.
    pub m1: f64,
    /// Lipschitz constant of `d_z(x) = |x - z|^2` on the proxy domain.
    pub dz_lipschitz: f64,
    /// `max(L_f, L_G)`.
    pub l_max: f64,
}

impl BoundConstants {
    /// Defaults from `x0`-local data.
    ///
    /// `M0` extends `|f(x0)|` and `||G(x0)||` over the domain with the Lipschitz
    /// bounds, `L = 2 (b/c + |y|)` bounds the gradient of `d_z` there, and
    /// `M1 = M0`.
    pub fn from_local(
        f_x0: &DVector<f64>,
        g_x0: &DMatrix<f64>,
        lipschitz: Lipschitz,
        proxy: &ProxyParams,
        target_offset: f64,
    ) -> Self {
        let radius = proxy.domain_radius();
        let m0 = (f_x0.norm() + lipschitz.drift * radius).max(spectral_norm(g_x0) + lipschitz.actuation * radius);
        Self {
            m0,
            m1: m0,
            dz_lipschitz: 2.0 * (radius + target_offset),
            l_max: lipschitz.max(),
        }
    }

    pub fn validate(&self, f_x0: &DVector<f64>, g_x0: &DMatrix<f64>) -> Result<(), LearnerError> {
        let all = [self.m0, self.m1, self.dz_lipschitz, self.l_max];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(LearnerError::InvalidConfig(format!(
                "bound constants must be finite and >= 0: {self:?}"
            )));
        }
        let need = f_x0.norm().max(spectral_norm(g_x0));
        if self.m0 < need {
            return Err(LearnerError::InvalidConfig(format!(
                "M0 = {} is below max(|f(x0)|, ||G(x0)||) = {need}",
                self.m0
            )));
        }
        Ok(())
    }
}

/// The `m + 1` inputs of one cycle and the perturbation signs `s_1..s_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub inputs: Vec<DVector<f64>>,
    pub signs: Vec<f64>,
}

/// `u_j = u0 + s_j eps e_j` with `s_j = -sign(u0_j)` (and `+1` when `u0_j = 0`),
/// which keeps every input inside the unit ball when `|u0| <= 1 - eps`.
pub fn perturbation_inputs(u0: &DVector<f64>, eps: f64) -> Result<Perturbation, LearnerError> {
    let limit = 1.0 - eps;
    if u0.norm() > limit + ADMISSIBLE_SLACK {
        return Err(LearnerError::InadmissibleBase { norm: u0.norm(), limit });
    }
    let signs: Vec<f64> = u0.iter().map(|&c| if c > 0.0 { -1.0 } else { 1.0 }).collect();
    let mut inputs = Vec::with_capacity(u0.len() + 1);
    inputs.push(u0.clone());
    for (j, s) in signs.iter().enumerate() {
        let mut u = u0.clone();
        u[j] += s * eps;
        inputs.push(u);
    }
    Ok(Perturbation { inputs, signs })
}

/// Inputs and sampled states of one learn-control cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub index: usize,
    pub start_time: f64,
    pub dt: f64,
    pub eps: f64,
    pub inputs: Vec<DVector<f64>>,
    pub signs: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl CycleRecord {
    pub fn input_dim(&self) -> usize {
        self.signs.len()
    }

    /// State at the end of the cycle, which is where the next cycle starts.
    pub fn anchor(&self) -> &DVector<f64> {
        self.states.last().expect("complete cycle")
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.inputs.len() as f64 * self.dt
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.states.len())
            .map(|j| self.start_time + j as f64 * self.dt)
            .collect()
    }

    /// `w_j = (x_{j+1} - x_j) / dt` for `j = 0..=m`.
    pub fn finite_differences(&self) -> Vec<DVector<f64>> {
        self.states.windows(2).map(|w| (&w[1] - &w[0]) / self.dt).collect()
    }

    /// `u_lambda = sum lambda_j u_j`.
    pub fn parameterized_input(&self, lambda: &DVector<f64>) -> Result<DVector<f64>, LearnerError> {
        self.check_weights(lambda)?;
        let mut u = DVector::zeros(self.input_dim());
        for (l, uj) in lambda.iter().zip(&self.inputs) {
            u.axpy(*l, uj, 1.0);
        }
        Ok(u)
    }

    /// The unique affine weights with `u_lambda = u`.
    pub fn weights_for_input(&self, u: &DVector<f64>) -> DVector<f64> {
        let m = self.input_dim();
        let mut lambda = DVector::zeros(m + 1);
        let base = &self.inputs[0];
        for j in 0..m {
            lambda[j + 1] = self.signs[j] * (u[j] - base[j]) / self.eps;
        }
        lambda[0] = 1.0 - lambda.rows(1, m).sum();
        lambda
    }

    fn check_weights(&self, lambda: &DVector<f64>) -> Result<(), LearnerError> {
        if lambda.len() != self.inputs.len() {
            return Err(LearnerError::DimensionMismatch {
                what: "weights",
                expected: self.inputs.len(),
                got: lambda.len(),
            });
        }
        let sum = lambda.sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(LearnerError::Parameter(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Runs one cycle on the plant starting from its current state and time.
pub fn run_cycle(
    plant: &mut dyn Plant,
    u0: &DVector<f64>,
    cfg: &CycleConfig,
    index: usize,
) -> Result<CycleRecord, LearnerError> {
    if u0.len() != plant.input_dim() {
        return Err(LearnerError::DimensionMismatch {
            what: "input",
            expected: plant.input_dim(),
            got: u0.len(),
        });
    }
    let Perturbation { inputs, signs } = perturbation_inputs(u0, cfg.eps)?;
    let start_time = plant.time();
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(plant.state().clone());
    for u in &inputs {
        states.push(plant.apply(u, cfg.dt)?);
    }
    Ok(CycleRecord {
        index,
        start_time,
        dt: cfg.dt,
        eps: cfg.eps,
        inputs,
        signs,
        states,
    })
}

/// `sum lambda_j (x_{j+1} - x_j) / dt`.
pub fn velocity_estimate(rec: &CycleRecord, lambda: &DVector<f64>) -> Result<DVector<f64>, LearnerError> {
    rec.check_weights(lambda)?;
    let mut v = DVector::zeros(rec.states[0].len());
    for (l, w) in lambda.iter().zip(rec.finite_differences()) {
        v.axpy(*l, &w, 1.0);
    }
    Ok(v)
}

/// Velocity-estimate error bound `C(dt, eps)`.
pub fn bound_c(cfg: &CycleConfig, consts: &BoundConstants) -> f64 {
    let m = cfg.m as f64;
    2.0 * consts.m0 * consts.l_max * (m + 1.0).powi(3) * cfg.dt * (4.0 * m.powf(1.5) + cfg.eps) / cfg.eps
}

/// Suboptimality bound `mu(dt, eps)` of minimizing over the learned inputs.
pub fn bound_mu(cfg: &CycleConfig, consts: &BoundConstants) -> f64 {
    let m = cfg.m as f64;
    let l = consts.dz_lipschitz;
    6.0 * l * (consts.m0 + 1.0) * (consts.m1 + 1.0) * (m + 1.0).powi(3) * (1.0 + 4.0 * m * m.sqrt() / cfg.eps) * cfg.dt
        + l * consts.m0 * (m + 1.0) * cfg.dt
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgminResult {
    /// Minimizing input `u*` in the unit ball.
    pub control: DVector<f64>,
    /// Affine weights with `u_lambda* = u*`.
    pub weights: DVector<f64>,
    /// Objective `<g, v_tilde(u*)>`.
    pub value: f64,
    /// The objective was flat in `u`; `u*` falls back to `u_0`.
    pub degenerate: bool,
}

/// Minimizes `<g, sum lambda_j w_j>` over affine weights with `u_lambda` in the unit ball.
///
/// The objective equals `<g, w_0> + <h, u - u_0>` with
/// `h_j = s_j <g, w_j - w_0> / eps`, so the minimizer is `u* = -h / |h|`.
pub fn argmin_direction(rec: &CycleRecord, g: &DVector<f64>) -> Result<ArgminResult, LearnerError> {
    let d = rec.states[0].len();
    if g.len() != d {
        return Err(LearnerError::DimensionMismatch {
            what: "gradient",
            expected: d,
            got: g.len(),
        });
    }
    let w = rec.finite_differences();
    let base = g.dot(&w[0]);
    let h = DVector::from_iterator(
        rec.input_dim(),
        (0..rec.input_dim()).map(|j| rec.signs[j] * (g.dot(&w[j + 1]) - base) / rec.eps),
    );
    let hn = h.norm();
    let scale = g.norm() * w.iter().map(|wj| wj.norm()).fold(0.0, f64::max) / rec.eps;
    let degenerate = !(hn > 1e-14 * scale) || hn == 0.0;
    let control = if degenerate { rec.inputs[0].clone() } else { -&h / hn };
    let weights = rec.weights_for_input(&control);
    let value = base + h.dot(&(&control - &rec.inputs[0]));
    Ok(ArgminResult {
        control,
        weights,
        value,
        degenerate,
    })
}

/// `<g, v_tilde(u_lambda)>`.
pub fn objective(rec: &CycleRecord, g: &DVector<f64>, lambda: &DVector<f64>) -> Result<f64, LearnerError> {
    Ok(g.dot(&velocity_estimate(rec, lambda)?))
}

/// One line of the cycle log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleLogEntry {
    pub n: usize,
    pub tau_n: f64,
    pub inputs: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub objective: f64,
    pub degenerate: bool,
    pub bound_c: f64,
    pub bound_mu: f64,
}

impl CycleLogEntry {
    pub fn new(rec: &CycleRecord, argmin: &ArgminResult, bound_c: f64, bound_mu: f64) -> Self {
        let rows = |vs: &[DVector<f64>]| {
            vs.iter()
                .map(|v| v.iter().copied().map(crate::io::round_sig).collect())
                .collect()
        };
        Self {
            n: rec.index,
            tau_n: crate::io::round_sig(rec.start_time),
            inputs: rows(&rec.inputs),
            states: rows(&rec.states),
            lambda: argmin.weights.iter().copied().map(crate::io::round_sig).collect(),
            objective: crate::io::round_sig(argmin.value),
            degenerate: argmin.degenerate,
            bound_c: crate::io::round_sig(bound_c),
            bound_mu: crate::io::round_sig(bound_mu),
        }
    }
}
