//! Property suites run by `grsreach verify` and the test suite.
//!
//! Every check compares a measured residual (or ratio) against a tolerance.
//! [`VerifyOptions::tolerance_scale`] multiplies all tolerances; a negative scale
//! makes every check fail, which is how the failure path is exercised.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::casestudy::{
    build_quadrotor, quadrotor_proxy, run_scenario, scenario, scenario_radii, QuadrotorParams, RunOptions, ScenarioId,
    DEFAULT_ANGLES, DEFAULT_HORIZON,
};
use crate::dynamics::{AffineField, ControlAffineField, Lipschitz};
use crate::learner::{bound_c, objective, velocity_estimate, CycleRecord};
use crate::plant::Simulator;
use crate::proxy::{radial_closed_form, ProxyParams, RadiusVariant, DEFAULT_DIRECTIONS};
use crate::synthesizer::{
    synthesize, synthesize_finite_time, LocalModel, SynthesisConfig, SynthesisResult, Termination, Variant,
};

/// Points on the unit circle used by the brute-force argmin oracle.
pub const BRUTE_FORCE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub tolerance_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Proxy,
    Learner,
    Synth,
    Casestudy,
    All,
}

impl Suite {
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Proxy, Suite::Learner, Suite::Synth, Suite::Casestudy],
            s => vec![s],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Proxy => "proxy",
            Suite::Learner => "learner",
            Suite::Synth => "synth",
            Suite::Casestudy => "casestudy",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proxy" => Ok(Suite::Proxy),
            "learner" => Ok(Suite::Learner),
            "synth" => Ok(Suite::Synth),
            "casestudy" => Ok(Suite::Casestudy),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

struct Recorder<'a> {
    suite: &'static str,
    opts: &'a VerifyOptions,
    out: Vec<CheckOutcome>,
}

impl<'a> Recorder<'a> {
    fn new(suite: &'static str, opts: &'a VerifyOptions) -> Self {
        Self {
            suite,
            opts,
            out: Vec::new(),
        }
    }

    /// Passes when `value <= tolerance * scale`.
    fn at_most(&mut self, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) {
        let tol = tolerance * self.opts.tolerance_scale;
        self.out.push(CheckOutcome {
            suite: self.suite,
            name: name.to_string(),
            passed: !tol.is_sign_negative() && value <= tol,
            value,
            tolerance: tol,
            detail: detail.into(),
        });
    }

    fn flag(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.at_most(name, if ok { 0.0 } else { 1.0 }, 0.5, detail);
    }

    fn fail(&mut self, name: &str, err: impl fmt::Display) {
        self.out.push(CheckOutcome {
            suite: self.suite,
            name: name.to_string(),
            passed: false,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: err.to_string(),
        });
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Vec<CheckOutcome> {
    suite
        .expand()
        .into_iter()
        .flat_map(|s| match s {
            Suite::Proxy => proxy_suite(opts),
            Suite::Learner => learner_suite(opts),
            Suite::Synth => synth_suite(opts),
            Suite::Casestudy => casestudy_suite(opts),
            Suite::All => unreachable!("expanded"),
        })
        .collect()
}

/// Largest relative component of `x - a t - x0` orthogonal to the input direction.
pub fn collinearity_residual(p: &ProxyParams, horizon: f64, n_dirs: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for dir in p.direction_grid(n_dirs) {
        let u = &dir.vector;
        let path = p.flow(u, horizon, None);
        for (t, x) in path.trajectory.times.iter().zip(&path.trajectory.states) {
            let s = x - &p.drift * *t - &p.origin;
            let n = s.norm();
            if n == 0.0 {
                continue;
            }
            let cross = (&s - u * s.dot(u)).norm();
            worst = worst.max(cross / n);
        }
    }
    worst
}

/// Time-scaling residual: flowing `k u` for `T` against flowing `u` for `kT`
/// (shifted by `a (T - kT)`), over `|u| = 1/k` on the direction grid.
pub fn scaling_residual(p: &ProxyParams, horizon: f64, factors: &[f64], n_dirs: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for &k in factors {
        for dir in p.direction_grid(n_dirs) {
            let slow = &dir.vector / k;
            let fast = p.flow(&(&slow * k), horizon, None).endpoint().clone();
            let long =
                p.flow(&slow, k * horizon, None).endpoint().clone() - &p.drift * (k * horizon) + &p.drift * horizon;
            worst = worst.max((fast - long).norm());
        }
    }
    worst
}

/// Largest gap between integrated drift-free endpoint radii and the closed form.
pub fn radial_oracle_residual(gain: f64, decay: f64, horizon: f64, n_dirs: usize) -> f64 {
    let p = ProxyParams::from_constants(DVector::zeros(2), gain, decay).expect("valid constants");
    let exact = radial_closed_form(gain, decay, horizon);
    p.direction_grid(n_dirs)
        .iter()
        .map(|dir| (p.flow(&dir.vector, horizon, None).endpoint().norm() - exact).abs())
        .fold(0.0, f64::max)
}

/// Smallest ratio `|phi(t) - y| / (0.5 (T - t)(b - c|y - x0|))` over `t = 0.1T..0.9T`
/// and all unclamped boundary directions. At least 1 means the margin holds.
pub fn boundary_margin_ratio(p: &ProxyParams, horizon: f64, n_dirs: usize) -> f64 {
    let mut worst = f64::INFINITY;
    for dir in p.direction_grid(n_dirs) {
        let path = p.flow(&dir.vector, horizon, None);
        let y = path.endpoint();
        let gap = p.gain - p.decay * (y - &p.origin).norm();
        if path.clamped || gap <= 0.0 {
            continue;
        }
        let traj = &path.trajectory;
        for i in 1..=9 {
            let t = horizon * i as f64 / 10.0;
            let idx = traj.times.partition_point(|&s| s < t - 1e-12 * horizon.max(1.0));
            let idx = idx.min(traj.len() - 1);
            let ts = traj.times[idx];
            let need = 0.5 * (horizon - ts) * gap;
            if need > 0.0 {
                worst = worst.min((&traj.states[idx] - y).norm() / need);
            }
        }
    }
    worst
}

/// Worst observed-to-bound ratios over a run's cycles; all must be at most 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionReport {
    pub cycles: usize,
    /// `|x_j - x_k| / (M0 (m+1) |j-k| dt)`.
    pub displacement: f64,
    /// `|w_j - v_{x_{j+1}}(u_j)| / (M0 L (m+1)^2 dt / 2)`.
    pub difference: f64,
    /// `|v_{x_{j+1}}(u_j) - v_{xi}(u_j)| / (M0 L (m+1)^3 dt)`.
    pub drift_along_cycle: f64,
    /// `|v_tilde(u_lambda) - v_{xi}(u_lambda)| / C(dt, eps)` at the argmin and base weights.
    pub estimate: f64,
}

impl PrecisionReport {
    pub fn worst(&self) -> f64 {
        self.displacement
            .max(self.difference)
            .max(self.drift_along_cycle)
            .max(self.estimate)
    }
}

/// Checks the per-cycle precision bounds against the true field.
///
/// The estimate bound is checked at the base input, the argmin input and `-u_0`.
pub fn learner_precision<F: ControlAffineField + ?Sized>(field: &F, result: &SynthesisResult) -> PrecisionReport {
    let consts = result.constants;
    let cfg = result.cycle;
    let m1 = (cfg.m + 1) as f64;
    let dt = cfg.dt;
    let b1 = consts.m0 * m1 * dt;
    let b2 = consts.m0 * consts.l_max * m1 * m1 * dt / 2.0;
    let b3 = consts.m0 * consts.l_max * m1.powi(3) * dt;
    let bc = bound_c(&cfg, &consts);
    let mut rep = PrecisionReport {
        cycles: result.records.len(),
        displacement: 0.0,
        difference: 0.0,
        drift_along_cycle: 0.0,
        estimate: 0.0,
    };
    let ratio = |v: f64, b: f64| {
        if b > 0.0 {
            v / b
        } else if v == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    for (rec, diag) in result.records.iter().zip(&result.diagnostics) {
        let xs = &rec.states;
        for j in 0..xs.len() {
            for k in j + 1..xs.len() {
                let d = (&xs[j] - &xs[k]).norm();
                rep.displacement = rep.displacement.max(ratio(d, b1 * (k - j) as f64));
            }
        }
        let anchor = rec.anchor();
        let w = rec.finite_differences();
        for (j, u) in rec.inputs.iter().enumerate() {
            let v_next = field.velocity(&xs[j + 1], u);
            rep.difference = rep.difference.max(ratio((&w[j] - &v_next).norm(), b2));
            let v_anchor = field.velocity(anchor, u);
            rep.drift_along_cycle = rep.drift_along_cycle.max(ratio((&v_next - &v_anchor).norm(), b3));
        }
        let mut base = DVector::zeros(rec.inputs.len());
        base[0] = 1.0;
        let g = DVector::from_vec(diag.gradient.clone());
        let u_star = crate::learner::argmin_direction(rec, &g)
            .map(|a| a.control)
            .unwrap_or_else(|_| rec.inputs[0].clone());
        let reversed = -&rec.inputs[0];
        for lambda in [base, rec.weights_for_input(&u_star), rec.weights_for_input(&reversed)] {
            if let (Ok(est), Ok(u)) = (velocity_estimate(rec, &lambda), rec.parameterized_input(&lambda)) {
                if u.norm() <= 1.0 + 1e-12 {
                    let truth = field.velocity(anchor, &u);
                    rep.estimate = rep.estimate.max(ratio((est - truth).norm(), bc));
                }
            }
        }
    }
    rep
}

/// Relative amount by which the closed-form argmin exceeds the best of
/// `samples` unit inputs (negative or zero when the closed form wins).
pub fn argmin_brute_force_gap(rec: &CycleRecord, g: &DVector<f64>, samples: usize) -> f64 {
    let closed = crate::learner::argmin_direction(rec, g).expect("consistent dimensions");
    let m = rec.input_dim();
    let mut best = f64::INFINITY;
    for i in 0..samples {
        let u = match m {
            1 => DVector::from_element(1, if i % 2 == 0 { 1.0 } else { -1.0 }),
            _ => {
                let th = std::f64::consts::TAU * i as f64 / samples as f64;
                let mut u = DVector::zeros(m);
                u[0] = th.cos();
                u[1] = th.sin();
                u
            }
        };
        let lambda = rec.weights_for_input(&u);
        best = best.min(objective(rec, g, &lambda).expect("affine weights"));
    }
    (closed.value - best) / best.abs().max(1e-300)
}

/// Checks the waypoint chain; returns the number of transitions checked.
pub fn waypoint_chain(result: &SynthesisResult) -> Result<usize, String> {
    let r = result.radius;
    let tol = 1e-9 * r.max(1.0);
    let mut checked = 0;
    for pair in result.waypoints.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        if !(next.theta > prev.theta) {
            return Err(format!(
                "theta did not increase at n = {}: {} -> {}",
                next.n, prev.theta, next.theta
            ));
        }
        if next.capped {
            continue;
        }
        if ((&next.z - &next.anchor).norm() - r).abs() > tol {
            return Err(format!("|z - xi| != r at n = {}", next.n));
        }
        let step = (&next.z - &prev.z).norm();
        let lower = r - (&next.anchor - &prev.z).norm();
        if step < lower - tol || step >= 2.0 * r {
            return Err(format!(
                "waypoint step {step} outside [{lower}, {}) at n = {}",
                2.0 * r,
                next.n
            ));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Wraps a field and counts how often it is evaluated.
pub struct CountingField<F> {
    inner: F,
    drift_calls: AtomicUsize,
    actuation_calls: AtomicUsize,
}

impl<F> CountingField<F> {
    pub fn new(inner: F) -> Self {
        Self {
            inner,
            drift_calls: AtomicUsize::new(0),
            actuation_calls: AtomicUsize::new(0),
        }
    }

    pub fn counts(&self) -> (usize, usize) {
        (
            self.drift_calls.load(Ordering::Relaxed),
            self.actuation_calls.load(Ordering::Relaxed),
        )
    }

    pub fn reset(&self) {
        self.drift_calls.store(0, Ordering::Relaxed);
        self.actuation_calls.store(0, Ordering::Relaxed);
    }
}

impl<F: ControlAffineField> ControlAffineField for CountingField<F> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        self.drift_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.drift(x)
    }
    fn actuation(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.actuation_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.actuation(x)
    }
    fn lipschitz(&self) -> Lipschitz {
        self.inner.lipschitz()
    }
}

/// `f = 0`, `G = I` in the plane with `L_f = L_G = 0.5` (so `b = c = 1`).
pub fn trivial_field() -> AffineField {
    AffineField::new(
        DVector::zeros(2),
        DMatrix::zeros(2, 2),
        DMatrix::identity(2, 2),
        Lipschitz::new(0.5, 0.5),
    )
    .expect("consistent")
}

fn trivial_run(variant: Variant) -> Result<SynthesisResult, String> {
    let field = trivial_field();
    let x0 = DVector::zeros(2);
    let local = LocalModel::from_field(&field, &x0).map_err(|e| e.to_string())?;
    let cycle = crate::learner::CycleConfig::new(1e-3, 0.1, 2.0, 2).map_err(|e| e.to_string())?;
    let cfg = SynthesisConfig::new(DVector::from_vec(vec![0.1, 0.0]), 0.25, variant, cycle);
    let mut sim = Simulator::new(field, x0, 0.0, 1e-3 / 20.0).map_err(|e| e.to_string())?;
    match variant {
        Variant::Algorithm1 => synthesize(&mut sim, &local, &cfg),
        Variant::Algorithm2 => synthesize_finite_time(&mut sim, &local, &cfg),
    }
    .map_err(|e| e.to_string())
}

fn proxy_suite(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let mut rec = Recorder::new("proxy", opts);
    let quad = quadrotor_proxy(&QuadrotorParams::default());
    let n = DEFAULT_DIRECTIONS;
    let t = DEFAULT_HORIZON;
    rec.at_most(
        "collinearity",
        collinearity_residual(&quad, t, n),
        1e-8,
        "relative off-line component of x - a t - x0, quadrotor proxy",
    );
    let flat = ProxyParams::from_constants(DVector::zeros(2), quad.gain, quad.decay).expect("valid");
    rec.at_most(
        "scaling",
        scaling_residual(&flat, t, &[1.0, 1.5, 2.0, 4.0], n),
        1e-7,
        "k u over T vs u over kT, drift-free quadrotor gains",
    );
    rec.at_most(
        "radial_oracle",
        radial_oracle_residual(quad.gain, quad.decay, t, n).max(radial_oracle_residual(1.0, 1.0, 1.0, n)),
        1e-8,
        "drift-free endpoint radius vs closed form",
    );
    let ratio = boundary_margin_ratio(&quad, t, n).min(boundary_margin_ratio(&flat, t, n));
    rec.at_most(
        "boundary_not_early",
        1.0 / ratio,
        1.0,
        format!("min |phi(t) - y| / (0.5 (T - t)(b - c|y|)) = {ratio:.6}"),
    );
    let closed = radial_closed_form(flat.gain, flat.decay, 5.0 * 3.0 * 1e-4);
    rec.at_most(
        "learning_radius_closed_form",
        (flat.learning_radius(5.0, 1e-4, 2, RadiusVariant::Raw) - closed).abs(),
        1e-9,
        "a = 0 learning radius vs closed form",
    );
    rec.out
}

fn learner_suite(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let mut rec = Recorder::new("learner", opts);
    let params = QuadrotorParams::default();
    let run = match run_scenario(ScenarioId::A, DEFAULT_ANGLES[0], &RunOptions::default()) {
        Ok(run) => run,
        Err(e) => {
            rec.fail("scenario_a_run", e);
            return rec.out;
        }
    };
    let field = build_quadrotor(&params);
    let report = learner_precision(&field, &run.result);
    rec.at_most(
        "precision_displacement",
        report.displacement,
        1.0,
        format!("{} cycles", report.cycles),
    );
    rec.at_most(
        "precision_difference",
        report.difference,
        1.0,
        "finite difference vs true velocity",
    );
    rec.at_most(
        "precision_along_cycle",
        report.drift_along_cycle,
        1.0,
        "velocity change across a cycle",
    );
    rec.at_most(
        "estimate_within_c",
        report.estimate,
        1.0,
        "velocity estimate error / C(dt, eps)",
    );
    let mut worst = f64::NEG_INFINITY;
    let step = (run.result.records.len() / 10).max(1);
    for (record, diag) in run.result.records.iter().zip(&run.result.diagnostics).step_by(step) {
        let g = DVector::from_vec(diag.gradient.clone());
        worst = worst.max(argmin_brute_force_gap(record, &g, BRUTE_FORCE_SAMPLES));
    }
    rec.at_most(
        "argmin_vs_brute_force",
        worst.max(0.0),
        1e-9,
        format!("closed form minus best of {BRUTE_FORCE_SAMPLES} samples, relative"),
    );
    rec.out
}

fn synth_suite(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let mut rec = Recorder::new("synth", opts);
    match trivial_run(Variant::Algorithm1) {
        Ok(res) => {
            rec.flag(
                "trivial_terminates",
                res.termination == Termination::TargetRadius,
                format!("termination {} after {} cycles", res.termination, res.cycles()),
            );
            rec.at_most(
                "trivial_accuracy",
                res.final_error / (2.0 * res.radius),
                1.0,
                "final error / 2r",
            );
            match waypoint_chain(&res) {
                Ok(n) => rec.flag("trivial_waypoint_chain", true, format!("{n} transitions")),
                Err(e) => rec.flag("trivial_waypoint_chain", false, e),
            }
        }
        Err(e) => rec.fail("trivial_run", e),
    }

    match (trivial_run(Variant::Algorithm1), trivial_run(Variant::Algorithm2)) {
        (Ok(a), Ok(b)) => {
            let n = a.control.len().min(b.control.len());
            let same = a.control.values()[..n] == b.control.values()[..n]
                && a.control.breakpoints()[..=n] == b.control.breakpoints()[..=n];
            rec.flag("zero_drift_equivalence", same, format!("{n} common pieces"));
            let expected = (0.25 / b.cycle.tau()).ceil() as usize;
            rec.flag(
                "finite_time_cycle_count",
                b.cycles() == expected,
                format!("{} cycles, expected {expected}", b.cycles()),
            );
        }
        (Err(e), _) | (_, Err(e)) => rec.fail("zero_drift_equivalence", e),
    }

    let counted = CountingField::new(trivial_field());
    let x0 = DVector::zeros(2);
    let outcome = LocalModel::from_field(&counted, &x0)
        .map_err(|e| e.to_string())
        .and_then(|local| {
            counted.reset();
            let cycle = crate::learner::CycleConfig::new(1e-3, 0.1, 2.0, 2).map_err(|e| e.to_string())?;
            let cfg = SynthesisConfig::new(DVector::from_vec(vec![0.1, 0.0]), 0.25, Variant::Algorithm1, cycle);
            let mut sim = Simulator::new(&counted, x0.clone(), 0.0, 1e-3 / 20.0).map_err(|e| e.to_string())?;
            synthesize(&mut sim, &local, &cfg).map_err(|e| e.to_string())?;
            Ok(sim.rk_steps())
        });
    match outcome {
        Ok(steps) => {
            let (nd, na) = counted.counts();
            let extra = (nd + na) as f64 - 8.0 * steps as f64;
            rec.at_most(
                "information_firewall",
                extra.abs(),
                0.0,
                format!("{nd} drift and {na} actuation calls for {steps} RK4 steps"),
            );
        }
        Err(e) => rec.fail("information_firewall", e),
    }

    match run_scenario(ScenarioId::A, DEFAULT_ANGLES[0], &RunOptions::default()) {
        Ok(run) => {
            let worst = run
                .result
                .diagnostics
                .iter()
                .skip(1)
                .map(|d| d.decrease_fraction)
                .fold(1.0, f64::min);
            rec.at_most(
                "lyapunov_decrease_a",
                0.99 - worst,
                0.0,
                format!("worst per-cycle negative fraction {worst:.4}"),
            );
            match waypoint_chain(&run.result) {
                Ok(n) => rec.flag("waypoint_chain_a", true, format!("{n} transitions")),
                Err(e) => rec.flag("waypoint_chain_a", false, e),
            }
            let cond = &run.result.diagnostics[0].condition;
            rec.flag(
                "condition_reported",
                cond.lhs.is_finite() && cond.rhs.is_finite() && run.result.cycles() > 1,
                format!("lhs {:.6e}, rhs {:.6e}, holds {}", cond.lhs, cond.rhs, cond.holds),
            );
        }
        Err(e) => rec.fail("scenario_a_run", e),
    }

    let opts_b = RunOptions {
        variant: Some(Variant::Algorithm2),
        ..RunOptions::default()
    };
    match run_scenario(ScenarioId::B, DEFAULT_ANGLES[0], &opts_b) {
        Ok(run) => {
            let gamma = run.result.gamma.unwrap_or(f64::NAN);
            rec.at_most(
                "gamma_bound_b",
                run.result.final_error / gamma,
                1.0,
                format!("final error {:.6}, gamma {gamma:.6e}", run.result.final_error),
            );
            match waypoint_chain(&run.result) {
                Ok(n) => rec.flag("waypoint_chain_b2", true, format!("{n} transitions")),
                Err(e) => rec.flag("waypoint_chain_b2", false, e),
            }
        }
        Err(e) => rec.fail("scenario_b_run", e),
    }
    rec.out
}

fn casestudy_suite(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let mut rec = Recorder::new("casestudy", opts);
    let params = QuadrotorParams::default();
    let p = quadrotor_proxy(&params);
    rec.at_most("gain_b", (p.gain - 111.11).abs(), 0.5, format!("b = {:.6}", p.gain));
    rec.at_most("decay_c", (p.decay - 2.0).abs(), 0.0, format!("c = {}", p.decay));
    let drift_err = (p.drift[0] + 8.73).abs().max((p.drift[1] - 13.09).abs());
    rec.at_most(
        "drift_a",
        drift_err,
        0.02,
        format!("a = ({:.6}, {:.6})", p.drift[0], p.drift[1]),
    );
    for sc in crate::casestudy::scenarios() {
        let (raw, sub) = scenario_radii(&params, &sc);
        let rel = |r: f64| (r - sc.expected_r).abs() / sc.expected_r;
        rec.at_most(
            &format!("radius_{}", sc.id),
            rel(raw).max(rel(sub)),
            0.15,
            format!("raw {raw:.6}, drift-subtracted {sub:.6}, expected {}", sc.expected_r),
        );
    }

    let mut deviations = Vec::new();
    for id in ScenarioId::ALL {
        let angles: &[f64] = match id {
            ScenarioId::A | ScenarioId::B => &DEFAULT_ANGLES,
            _ => &DEFAULT_ANGLES[..1],
        };
        for &angle in angles {
            match run_scenario(id, angle, &RunOptions::default()) {
                Ok(run) => {
                    let r = &run.result;
                    if matches!(id, ScenarioId::A | ScenarioId::B) {
                        let bound = 2.0 * scenario(id).expected_r;
                        rec.at_most(
                            &format!("accuracy_{id}_{angle}"),
                            r.final_error,
                            bound,
                            format!("termination {}, {} cycles", r.termination, r.cycles()),
                        );
                    }
                    let pieces_ok = r.control.len() == 3 * r.cycles();
                    rec.flag(
                        &format!("pieces_{id}_{angle}"),
                        pieces_ok,
                        format!("{} pieces", r.control.len()),
                    );
                    if angle == DEFAULT_ANGLES[0] {
                        deviations.push((id, r.reference_deviation().hausdorff));
                    }
                }
                Err(e) => rec.fail(&format!("run_{id}_{angle}"), e),
            }
        }
    }
    let monotone = deviations.len() == 4 && deviations.windows(2).all(|w| w[0].1 < w[1].1);
    let listing = deviations
        .iter()
        .map(|(id, d)| format!("{id} {d:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    rec.flag("deviation_ordering", monotone, listing);
    rec.out
}
