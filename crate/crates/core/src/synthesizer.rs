//! Waypoint tracking and the two synthesis loops.
//!
//! Both loops steer the anchor `xi_n` (the state at the start of cycle `n`,
//! relative to `x0`) towards a waypoint `z_n = theta_n y_ref` kept at distance `r`
//! ahead on the segment `[0, y_ref]`. After each cycle the new anchor must be
//! strictly closer than `r` to the old waypoint; the next waypoint is then pushed
//! forward to distance `r` again and the next steering input descends
//! `|x - z_{n+1}|^2` using the velocities learned in the cycle just run.
//!
//! [`Variant::Algorithm1`] tracks `y` itself and stops once the waypoint is
//! within `r` of it. [`Variant::Algorithm2`] works in drift-subtracted
//! coordinates `x - x0 - a t`, tracks `y - aT` and stops at the horizon. Use the
//! first when `2|a| < b`, the second otherwise.
//!
//! The loops only see a [`Plant`] and a [`LocalModel`]; the vector field itself
//! is never evaluated here.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ControlAffineField, DynamicsError, Lipschitz, PiecewiseConstantControl, Trajectory};
use crate::io::round_sig;
use crate::learner::{
    argmin_direction, bound_c, bound_mu, run_cycle, BoundConstants, CycleConfig, CycleLogEntry, CycleRecord,
    LearnerError, DEFAULT_EPS_DT2_CONSTANT,
};
use crate::plant::Plant;
use crate::proxy::{spectral_norm, ProxyError, ProxyParams, RadiusVariant};

/// Default cap on the number of cycles in one run.
pub const DEFAULT_MAX_CYCLES: usize = 20_000;
/// Consecutive failed decrease checks before a run is abandoned.
pub const DEFAULT_REGRESS_LIMIT: usize = 3;

const BOUNDARY_TOL: f64 = 1e-9;
const REACH_TOL: f64 = 1e-7;
const REFERENCE_SAMPLES: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("invalid synthesis configuration: {0}")]
    InvalidConfig(String),
    #[error("target direction is zero; nothing to steer towards")]
    TrivialTarget,
    #[error("target at distance {distance} from x0 is on or beyond the proxy domain boundary (radius {radius})")]
    TargetOnDomainBoundary { distance: f64, radius: f64 },
    #[error("the proxy input towards the target saturates at the domain boundary before the horizon")]
    TargetClamped,
    #[error("{called} requires variant {expected}, got {got}")]
    VariantMismatch {
        called: &'static str,
        expected: Variant,
        got: Variant,
    },
    #[error("target is {distance} from x0 + aT but the reachable set only extends {reach} in that direction")]
    TargetUnreachable { distance: f64, reach: f64 },
    #[error("waypoint regressed: anchor is {distance} from the waypoint at theta = {theta}, radius {radius}")]
    Regressed { theta: f64, distance: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Algorithm1,
    Algorithm2,
}

impl Variant {
    /// `Algorithm1` when `2|a| < b`, else `Algorithm2`.
    pub fn recommended(proxy: &ProxyParams) -> Self {
        if 2.0 * proxy.drift.norm() < proxy.gain {
            Variant::Algorithm1
        } else {
            Variant::Algorithm2
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Algorithm1 => "algorithm1",
            Variant::Algorithm2 => "algorithm2",
        }
    }

    fn radius_variant(&self) -> RadiusVariant {
        match self {
            Variant::Algorithm1 => RadiusVariant::Raw,
            Variant::Algorithm2 => RadiusVariant::DriftSubtracted,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "algorithm1" | "1" => Ok(Variant::Algorithm1),
            "algorithm2" | "2" => Ok(Variant::Algorithm2),
            other => Err(format!("unknown variant '{other}' (expected algorithm1 or algorithm2)")),
        }
    }
}

/// Everything the synthesis loop knows about the system besides observed states.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    pub x0: DVector<f64>,
    pub f_x0: DVector<f64>,
    pub g_x0: DMatrix<f64>,
    pub lipschitz: Lipschitz,
}

impl LocalModel {
    pub fn from_field<F: ControlAffineField + ?Sized>(field: &F, x0: &DVector<f64>) -> Result<Self, DynamicsError> {
        crate::dynamics::check_dim("state", field.state_dim(), x0.len())?;
        Ok(Self {
            x0: x0.clone(),
            f_x0: field.drift(x0),
            g_x0: field.actuation(x0),
            lipschitz: field.lipschitz(),
        })
    }

    pub fn proxy(&self) -> Result<ProxyParams, ProxyError> {
        Ok(ProxyParams::derive(&self.f_x0, &self.g_x0, self.lipschitz)?.with_origin(self.x0.clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub target: DVector<f64>,
    pub horizon: f64,
    pub variant: Variant,
    pub cycle: CycleConfig,
    /// Overrides the defaults of [`BoundConstants::from_local`].
    pub constants: Option<BoundConstants>,
    pub max_cycles: usize,
    pub regress_limit: usize,
    /// Constant of the advisory check `eps > C dt^2`.
    pub eps_dt2_constant: f64,
}

impl SynthesisConfig {
    pub fn new(target: DVector<f64>, horizon: f64, variant: Variant, cycle: CycleConfig) -> Self {
        Self {
            target,
            horizon,
            variant,
            cycle,
            constants: None,
            max_cycles: DEFAULT_MAX_CYCLES,
            regress_limit: DEFAULT_REGRESS_LIMIT,
            eps_dt2_constant: DEFAULT_EPS_DT2_CONSTANT,
        }
    }

    fn validate(&self, d: usize) -> Result<(), SynthesisError> {
        if self.target.len() != d {
            return Err(SynthesisError::InvalidConfig(format!(
                "target has dimension {}, state has {d}",
                self.target.len()
            )));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(SynthesisError::InvalidConfig(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        if self.max_cycles == 0 {
            return Err(SynthesisError::InvalidConfig("max_cycles must be >= 1".into()));
        }
        if self.regress_limit == 0 {
            return Err(SynthesisError::InvalidConfig("regress_limit must be >= 1".into()));
        }
        Ok(())
    }
}

/// One point of the waypoint chain, in the loop's own coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointState {
    pub n: usize,
    pub theta: f64,
    pub z: DVector<f64>,
    pub anchor: DVector<f64>,
    pub r: f64,
    /// `theta` was capped at 1, so `|z - anchor| = r` need not hold.
    pub capped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Sufficient condition for per-cycle decrease.
///
/// `2 (M0 (m+1)^2 dt + r L) M0 (m+1)^2 dt + mu <= (1 - eps)(r - M0 (m+1)^2 dt)(b - c |x| - 2|a|)`.
/// Advisory only.
pub fn check_condition(
    p: &ProxyParams,
    cfg: &CycleConfig,
    consts: &BoundConstants,
    r: f64,
    x_norm: f64,
) -> ConditionCheck {
    let m1 = (cfg.m + 1) as f64;
    let step = consts.m0 * m1 * m1 * cfg.dt;
    let lhs = 2.0 * (step + r * consts.l_max) * step + bound_mu(cfg, consts);
    let rhs = (1.0 - cfg.eps) * (r - step) * (p.gain - p.decay * x_norm - 2.0 * p.drift.norm());
    ConditionCheck {
        holds: lhs <= rhs,
        lhs,
        rhs,
    }
}

/// `(1 - eps) G^+ w / (||G^+|| |w|)` with `w = y - x0` or `w = y - aT - x0`.
pub fn initial_control(
    g_x0: &DMatrix<f64>,
    x0: &DVector<f64>,
    y: &DVector<f64>,
    eps: f64,
    variant: Variant,
    a: &DVector<f64>,
    horizon: f64,
) -> Result<DVector<f64>, SynthesisError> {
    let w = match variant {
        Variant::Algorithm1 => y - x0,
        Variant::Algorithm2 => y - a * horizon - x0,
    };
    let wn = w.norm();
    if !(wn > 1e-12 * y.norm().max(1.0)) {
        return Err(SynthesisError::TrivialTarget);
    }
    let pinv = g_x0
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| SynthesisError::InvalidConfig(e.to_string()))?;
    let pn = spectral_norm(&pinv);
    if !(pn > 0.0) {
        return Err(ProxyError::DegenerateActuation.into());
    }
    Ok((pinv * w) * ((1.0 - eps) / (pn * wn)))
}

/// Larger root of `|theta y_ref - xi|^2 = r^2`; must exceed `theta_n`.
pub fn next_waypoint(xi: &DVector<f64>, y_ref: &DVector<f64>, theta_n: f64, r: f64) -> Result<f64, SynthesisError> {
    let distance = (xi - y_ref * theta_n).norm();
    let regressed = SynthesisError::Regressed {
        theta: theta_n,
        distance,
        radius: r,
    };
    if !(distance < r) {
        return Err(regressed);
    }
    let a = y_ref.norm_squared();
    if a == 0.0 {
        return Err(SynthesisError::TrivialTarget);
    }
    let b = y_ref.dot(xi);
    let c = xi.norm_squared() - r * r;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return Err(regressed);
    }
    let theta = (b + disc.sqrt()) / a;
    if theta > theta_n {
        Ok(theta)
    } else {
        Err(regressed)
    }
}

/// Accuracy radius of the finite-horizon loop after `n` cycles.
pub fn gamma_bound(p: &ProxyParams, cfg: &CycleConfig, consts: &BoundConstants, n: usize) -> f64 {
    let r = p.learning_radius(cfg.k, cfg.dt, cfg.m, RadiusVariant::DriftSubtracted);
    gamma_bound_with_radius(p, cfg, consts, n, r)
}

pub fn gamma_bound_with_radius(p: &ProxyParams, cfg: &CycleConfig, consts: &BoundConstants, n: usize, r: f64) -> f64 {
    let m1 = (cfg.m + 1) as f64;
    let nf = n as f64;
    let dt = cfg.dt;
    let r_min = p.min_travel(cfg.tau());
    let nu = consts.m0 * m1 * m1 * dt - r_min;
    let step2 = consts.m0 * m1 * m1 * dt * dt;
    let mu = bound_mu(cfg, consts);
    nf * nu + r * p.decay * nf * nu * dt + step2 * p.gain + 2.0 * (step2 + r * consts.l_max) * step2 + mu * mu
}

/// Coordinates the loop tracks in: `x - x0`, minus `a (t - t0)` for `Algorithm2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub origin: DVector<f64>,
    pub drift: Option<DVector<f64>>,
    pub t0: f64,
}

impl Frame {
    pub fn new(variant: Variant, origin: DVector<f64>, drift: &DVector<f64>, t0: f64) -> Self {
        Self {
            origin,
            drift: matches!(variant, Variant::Algorithm2).then(|| drift.clone()),
            t0,
        }
    }

    pub fn map(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        let mut s = x - &self.origin;
        if let Some(a) = &self.drift {
            s.axpy(-(t - self.t0), a, 1.0);
        }
        s
    }
}

/// Time window of one cycle and the waypoint it was steering towards.
#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseWindow {
    pub n: usize,
    pub start: f64,
    pub end: f64,
    pub waypoint: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecreaseStats {
    pub n: usize,
    pub samples: usize,
    pub negative: usize,
    pub fraction: f64,
}

/// Finite-difference sign of `d/dt |s(t) - z_n|^2` over each window, `s` in `frame`.
pub fn lyapunov_diagnostics(traj: &Trajectory, windows: &[DecreaseWindow], frame: &Frame) -> Vec<DecreaseStats> {
    windows
        .iter()
        .map(|w| {
            let lo = traj.times.partition_point(|&t| t < w.start - 1e-12);
            let hi = traj.times.partition_point(|&t| t <= w.end + 1e-12);
            let d: Vec<f64> = (lo..hi)
                .map(|i| (frame.map(&traj.states[i], traj.times[i]) - &w.waypoint).norm_squared())
                .collect();
            let samples = d.len().saturating_sub(1);
            let negative = d.windows(2).filter(|p| p[1] < p[0]).count();
            DecreaseStats {
                n: w.n,
                samples,
                negative,
                fraction: if samples == 0 {
                    1.0
                } else {
                    negative as f64 / samples as f64
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleOutcome {
    /// Decrease achieved and the waypoint moved forward.
    Advanced,
    /// Decrease achieved with the waypoint already capped at `y_ref`.
    Holding,
    /// Decrease failed; the waypoint stays put.
    Regressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleDiagnostics {
    pub n: usize,
    pub start_time: f64,
    pub end_time: f64,
    /// `theta_n` of the waypoint steered towards during the cycle.
    pub theta: f64,
    /// `|xi_{n+1} - z_n|`.
    pub distance: f64,
    pub outcome: CycleOutcome,
    /// Gradient `2 (xi_{n+1} - z_{n+1})` handed to the argmin.
    pub gradient: Vec<f64>,
    pub objective: f64,
    pub degenerate: bool,
    pub condition: ConditionCheck,
    pub bound_c: f64,
    pub bound_mu: f64,
    /// Fraction of samples in the cycle with decreasing `|s - z_n|^2`.
    pub decrease_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TargetRadius,
    HorizonReached,
    MaxCycles,
    DomainExit,
    Regressed,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::TargetRadius => "target_radius",
            Termination::HorizonReached => "horizon_reached",
            Termination::MaxCycles => "max_cycles",
            Termination::DomainExit => "domain_exit",
            Termination::Regressed => "regressed",
        }
    }

    /// The run ended the way its variant intends.
    pub fn is_success(&self) -> bool {
        matches!(self, Termination::TargetRadius | Termination::HorizonReached)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distance of the trajectory from the reference segment `[0, y_ref]` in the loop frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDeviation {
    /// Largest distance from a trajectory sample to the segment.
    pub lateral: f64,
    /// Symmetric (Hausdorff) distance between the trajectory and the segment.
    pub hausdorff: f64,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub variant: Variant,
    pub target: DVector<f64>,
    /// `y_ref` relative to `x0` in the loop frame.
    pub reference_target: DVector<f64>,
    pub frame: Frame,
    pub radius: f64,
    pub cycle: CycleConfig,
    pub constants: BoundConstants,
    pub bound_c: f64,
    pub bound_mu: f64,
    pub eps_dominates_dt2: bool,
    pub trajectory: Trajectory,
    pub control: PiecewiseConstantControl,
    pub waypoints: Vec<WaypointState>,
    pub diagnostics: Vec<CycleDiagnostics>,
    pub cycle_log: Vec<CycleLogEntry>,
    /// Unrounded inputs and samples of every cycle.
    pub records: Vec<CycleRecord>,
    pub final_state: DVector<f64>,
    pub final_error: f64,
    pub termination: Termination,
    /// Why the run stopped early, if it did.
    pub message: Option<String>,
    pub gamma: Option<f64>,
}

impl SynthesisResult {
    pub fn cycles(&self) -> usize {
        self.diagnostics.len()
    }

    /// `theta` after every cycle (unchanged on cycles that did not advance).
    pub fn theta_series(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.diagnostics.len());
        let mut wp = self.waypoints.iter().skip(1).peekable();
        let mut theta = 0.0;
        for d in &self.diagnostics {
            if d.outcome == CycleOutcome::Advanced {
                if let Some(w) = wp.next() {
                    theta = w.theta;
                }
            }
            out.push(theta);
        }
        out
    }

    pub fn reference_deviation(&self) -> ReferenceDeviation {
        let seg = &self.reference_target;
        let len2 = seg.norm_squared();
        let points: Vec<DVector<f64>> = self
            .trajectory
            .times
            .iter()
            .zip(&self.trajectory.states)
            .map(|(t, x)| self.frame.map(x, *t))
            .collect();
        let to_segment = |s: &DVector<f64>| {
            let t = if len2 > 0.0 {
                (s.dot(seg) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (s - seg * t).norm()
        };
        let lateral = points.iter().map(to_segment).fold(0.0, f64::max);
        let coverage = (0..=REFERENCE_SAMPLES)
            .map(|i| {
                let q = seg * (i as f64 / REFERENCE_SAMPLES as f64);
                points.iter().map(|p| (p - &q).norm()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        ReferenceDeviation {
            lateral,
            hausdorff: lateral.max(coverage),
        }
    }

    pub fn decrease_windows(&self) -> Vec<DecreaseWindow> {
        self.diagnostics
            .iter()
            .map(|d| DecreaseWindow {
                n: d.n,
                start: d.start_time,
                end: d.end_time,
                waypoint: &self.reference_target * d.theta,
            })
            .collect()
    }

    pub fn diagnostics_report(&self, scenario: &str, runtime_s: Option<f64>) -> DiagnosticsReport {
        DiagnosticsReport {
            scenario: scenario.to_string(),
            variant: self.variant,
            params: ReportParams {
                dt: self.cycle.dt,
                eps: self.cycle.eps,
                k: self.cycle.k,
            },
            r: round_sig(self.radius),
            target: self.target.iter().copied().map(round_sig).collect(),
            final_state: self.final_state.iter().copied().map(round_sig).collect(),
            cycles: self.cycles(),
            condition_per_cycle: self.diagnostics.iter().map(|d| d.condition.holds).collect(),
            theta: self.theta_series().into_iter().map(round_sig).collect(),
            decrease_fraction: self
                .diagnostics
                .iter()
                .map(|d| round_sig(d.decrease_fraction))
                .collect(),
            bound_c: round_sig(self.bound_c),
            bound_mu: round_sig(self.bound_mu),
            eps_dominates_dt2: self.eps_dominates_dt2,
            final_error: round_sig(self.final_error),
            termination: self.termination,
            message: self.message.clone(),
            gamma: self.gamma.map(round_sig),
            runtime_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub dt: f64,
    pub eps: f64,
    pub k: f64,
}

/// Contents of `diag.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub scenario: String,
    pub variant: Variant,
    pub params: ReportParams,
    pub r: f64,
    pub target: Vec<f64>,
    pub final_state: Vec<f64>,
    pub cycles: usize,
    pub condition_per_cycle: Vec<bool>,
    pub theta: Vec<f64>,
    pub decrease_fraction: Vec<f64>,
    pub bound_c: f64,
    pub bound_mu: f64,
    pub eps_dominates_dt2: bool,
    pub final_error: f64,
    pub termination: Termination,
    pub message: Option<String>,
    pub gamma: Option<f64>,
    pub runtime_s: Option<f64>,
}

/// Tracks `y` until the waypoint is within `r` of it.
pub fn synthesize(
    plant: &mut dyn Plant,
    local: &LocalModel,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult, SynthesisError> {
    if cfg.variant != Variant::Algorithm1 {
        return Err(SynthesisError::VariantMismatch {
            called: "synthesize",
            expected: Variant::Algorithm1,
            got: cfg.variant,
        });
    }
    run_loop(plant, local, cfg)
}

/// Tracks `y - aT` in drift-subtracted coordinates until the horizon.
pub fn synthesize_finite_time(
    plant: &mut dyn Plant,
    local: &LocalModel,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult, SynthesisError> {
    if cfg.variant != Variant::Algorithm2 {
        return Err(SynthesisError::VariantMismatch {
            called: "synthesize_finite_time",
            expected: Variant::Algorithm2,
            got: cfg.variant,
        });
    }
    run_loop(plant, local, cfg)
}

/// Dispatches on `cfg.variant`.
pub fn run_synthesis(
    plant: &mut dyn Plant,
    local: &LocalModel,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult, SynthesisError> {
    run_loop(plant, local, cfg)
}

fn check_target(proxy: &ProxyParams, cfg: &SynthesisConfig) -> Result<(), SynthesisError> {
    let radius = proxy.domain_radius();
    let distance = (&cfg.target - &proxy.origin).norm();
    if distance >= radius * (1.0 - BOUNDARY_TOL) {
        return Err(SynthesisError::TargetOnDomainBoundary { distance, radius });
    }
    let u_hat = match proxy.unique_boundary_control(&cfg.target, cfg.horizon) {
        Ok(u) => u,
        Err(ProxyError::TrivialTarget) if cfg.variant == Variant::Algorithm1 => return Ok(()),
        Err(e) => return Err(e.into()),
    };
    let path = proxy.flow(&u_hat, cfg.horizon, None);
    if path.clamped {
        return Err(SynthesisError::TargetClamped);
    }
    let center = &proxy.origin + &proxy.drift * cfg.horizon;
    let distance = (&cfg.target - &center).norm();
    let reach = (path.endpoint() - &center).norm();
    if distance > reach * (1.0 + REACH_TOL) {
        return Err(SynthesisError::TargetUnreachable { distance, reach });
    }
    Ok(())
}

fn run_loop(
    plant: &mut dyn Plant,
    local: &LocalModel,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult, SynthesisError> {
    let d = local.x0.len();
    if plant.state_dim() != d || local.f_x0.len() != d {
        return Err(SynthesisError::InvalidConfig(format!(
            "plant state dimension {} does not match x0 dimension {d}",
            plant.state_dim()
        )));
    }
    if plant.input_dim() != local.g_x0.ncols() || cfg.cycle.m != plant.input_dim() {
        return Err(SynthesisError::InvalidConfig(format!(
            "input dimension mismatch: plant {}, G(x0) {}, cycle {}",
            plant.input_dim(),
            local.g_x0.ncols(),
            cfg.cycle.m
        )));
    }
    cfg.validate(d)?;
    let proxy = local.proxy()?;
    check_target(&proxy, cfg)?;

    let variant = cfg.variant;
    let cyc = cfg.cycle;
    let eps = cyc.eps;
    let a = &local.f_x0;
    let y_ref = match variant {
        Variant::Algorithm1 => &cfg.target - &local.x0,
        Variant::Algorithm2 => &cfg.target - a * cfg.horizon - &local.x0,
    };
    let consts = match cfg.constants {
        Some(c) => c,
        None => BoundConstants::from_local(
            a,
            &local.g_x0,
            local.lipschitz,
            &proxy,
            (&cfg.target - &local.x0).norm(),
        ),
    };
    consts.validate(a, &local.g_x0)?;
    let r = proxy.learning_radius(cyc.k, cyc.dt, cyc.m, variant.radius_variant());
    if !(r > 0.0) {
        return Err(SynthesisError::InvalidConfig(format!(
            "learning radius must be positive, got {r}"
        )));
    }
    let c_bound = bound_c(&cyc, &consts);
    let mu = bound_mu(&cyc, &consts);

    let mut u = initial_control(&local.g_x0, &local.x0, &cfg.target, eps, variant, a, cfg.horizon)?;
    let t0 = plant.time();
    let frame = Frame::new(variant, local.x0.clone(), a, t0);
    let mut waypoints = vec![WaypointState {
        n: 0,
        theta: 0.0,
        z: DVector::zeros(d),
        anchor: frame.map(plant.state(), t0),
        r,
        capped: false,
    }];
    let mut theta = 0.0;
    let mut capped = false;
    let mut failures = 0usize;
    let mut diagnostics = Vec::new();
    let mut cycle_log = Vec::new();
    let mut records = Vec::new();
    let mut message = None;
    let termination;

    loop {
        let n = diagnostics.len();
        if n >= cfg.max_cycles {
            message = Some(format!("cycle cap of {} reached", cfg.max_cycles));
            termination = Termination::MaxCycles;
            break;
        }
        let theta_n = theta;
        let z = &y_ref * theta;
        let x_norm = (plant.state() - &local.x0).norm();
        let condition = check_condition(&proxy, &cyc, &consts, r, x_norm);
        let rec = match run_cycle(plant, &u, &cyc, n) {
            Ok(rec) => rec,
            Err(LearnerError::Dynamics(e @ DynamicsError::DomainExit { .. })) => {
                message = Some(e.to_string());
                termination = Termination::DomainExit;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let anchor = frame.map(rec.anchor(), rec.end_time());
        let distance = (&anchor - &z).norm();
        let outcome = if distance >= r {
            failures += 1;
            CycleOutcome::Regressed
        } else if capped {
            failures = 0;
            CycleOutcome::Holding
        } else {
            failures = 0;
            let mut next = next_waypoint(&anchor, &y_ref, theta, r)?;
            if variant == Variant::Algorithm2 && next > 1.0 {
                next = 1.0;
                capped = true;
            }
            theta = next;
            waypoints.push(WaypointState {
                n: n + 1,
                theta,
                z: &y_ref * theta,
                anchor: anchor.clone(),
                r,
                capped,
            });
            CycleOutcome::Advanced
        };
        let z_next = &y_ref * theta;
        let g = (&anchor - &z_next) * 2.0;
        let argmin = argmin_direction(&rec, &g)?;
        u = &argmin.control * (1.0 - eps);
        cycle_log.push(CycleLogEntry::new(&rec, &argmin, c_bound, mu));
        diagnostics.push(CycleDiagnostics {
            n,
            start_time: rec.start_time,
            end_time: rec.end_time(),
            theta: theta_n,
            distance,
            outcome,
            gradient: g.iter().copied().collect(),
            objective: argmin.value,
            degenerate: argmin.degenerate,
            condition,
            bound_c: c_bound,
            bound_mu: mu,
            decrease_fraction: 1.0,
        });
        records.push(rec);
        if failures >= cfg.regress_limit {
            message = Some(
                SynthesisError::Regressed {
                    theta,
                    distance,
                    radius: r,
                }
                .to_string(),
            );
            termination = Termination::Regressed;
            break;
        }
        match variant {
            Variant::Algorithm1 => {
                if outcome == CycleOutcome::Advanced && (&z_next - &y_ref).norm() < r {
                    termination = Termination::TargetRadius;
                    break;
                }
            }
            Variant::Algorithm2 => {
                if (n + 1) as f64 * cyc.tau() >= cfg.horizon * (1.0 - 1e-12) {
                    termination = Termination::HorizonReached;
                    break;
                }
            }
        }
    }

    let final_state = plant.state().clone();
    let final_error = (&final_state - &cfg.target).norm();
    let gamma = match variant {
        Variant::Algorithm2 if !diagnostics.is_empty() => {
            Some(gamma_bound_with_radius(&proxy, &cyc, &consts, diagnostics.len(), r))
        }
        _ => None,
    };
    let mut result = SynthesisResult {
        variant,
        target: cfg.target.clone(),
        reference_target: y_ref,
        frame,
        radius: r,
        cycle: cyc,
        constants: consts,
        bound_c: c_bound,
        bound_mu: mu,
        eps_dominates_dt2: cyc.eps_dominates_dt2(cfg.eps_dt2_constant),
        trajectory: plant.trajectory().clone(),
        control: plant.control().clone(),
        waypoints,
        diagnostics,
        cycle_log,
        records,
        final_state,
        final_error,
        termination,
        message,
        gamma,
    };
    let stats = lyapunov_diagnostics(&result.trajectory, &result.decrease_windows(), &result.frame);
    for (diag, s) in result.diagnostics.iter_mut().zip(stats) {
        diag.decrease_fraction = s.fraction;
    }
    Ok(result)
}
