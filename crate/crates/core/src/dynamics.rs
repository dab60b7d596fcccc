//! Control-affine vector fields, piecewise-constant inputs, sampled trajectories
//! and the fixed-step RK4 integrator that ties them together.
//!
//! Everything here is deterministic: the same field, control and step size
//! produce bit-identical trajectories.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::io::fmt_num;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("state left the guard region at t = {time} (distance {distance} > radius {radius})")]
    DomainExit { time: f64, distance: f64, radius: f64 },
    #[error("invalid control signal: {0}")]
    InvalidControl(String),
    #[error("invalid integration request: {0}")]
    InvalidRequest(String),
}

/// Lipschitz bounds of the drift and actuation maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lipschitz {
    pub drift: f64,
    pub actuation: f64,
}

impl Lipschitz {
    pub fn new(drift: f64, actuation: f64) -> Self {
        Self { drift, actuation }
    }

    /// `max(L_f, L_G)`
    pub fn max(&self) -> f64 {
        self.drift.max(self.actuation)
    }

    /// `L_f + L_G`
    pub fn sum(&self) -> f64 {
        self.drift + self.actuation
    }
}

/// Dynamics of the form `x' = f(x) + G(x) u`, evaluable pointwise.
///
/// Implementations must be deterministic.
pub trait ControlAffineField: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    fn actuation(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn lipschitz(&self) -> Lipschitz;

    /// `f(x) + G(x) u` without dimension checks.
    fn velocity(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut v = self.drift(x);
        v.gemv(1.0, &self.actuation(x), u, 1.0);
        v
    }
}

impl<T: ControlAffineField + ?Sized> ControlAffineField for &T {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).drift(x)
    }
    fn actuation(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (**self).actuation(x)
    }
    fn lipschitz(&self) -> Lipschitz {
        (**self).lipschitz()
    }
}

/// `f(x) = f0 + A x`, `G(x) = G0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineField {
    pub offset: DVector<f64>,
    pub linear: DMatrix<f64>,
    pub actuation: DMatrix<f64>,
    pub lipschitz: Lipschitz,
}

impl AffineField {
    pub fn new(
        offset: DVector<f64>,
        linear: DMatrix<f64>,
        actuation: DMatrix<f64>,
        lipschitz: Lipschitz,
    ) -> Result<Self, DynamicsError> {
        let d = offset.len();
        if linear.nrows() != d || linear.ncols() != d {
            return Err(DynamicsError::DimensionMismatch {
                what: "drift matrix",
                expected: d,
                got: if linear.nrows() != d {
                    linear.nrows()
                } else {
                    linear.ncols()
                },
            });
        }
        if actuation.nrows() != d {
            return Err(DynamicsError::DimensionMismatch {
                what: "actuation matrix rows",
                expected: d,
                got: actuation.nrows(),
            });
        }
        Ok(Self {
            offset,
            linear,
            actuation,
            lipschitz,
        })
    }

    /// Spectral norm of the linear part, i.e. the smallest valid `L_f`.
    pub fn exact_drift_lipschitz(&self) -> f64 {
        self.linear.clone().svd(false, false).singular_values.max()
    }
}

impl ControlAffineField for AffineField {
    fn state_dim(&self) -> usize {
        self.offset.len()
    }
    fn input_dim(&self) -> usize {
        self.actuation.ncols()
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.offset + &self.linear * x
    }
    fn actuation(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.actuation.clone()
    }
    fn lipschitz(&self) -> Lipschitz {
        self.lipschitz
    }
}

type DriftFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type ActuationFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// A field given by closures; handy for nonlinear test plants.
pub struct FnField {
    state_dim: usize,
    input_dim: usize,
    drift: Box<DriftFn>,
    actuation: Box<ActuationFn>,
    lipschitz: Lipschitz,
}

impl FnField {
    pub fn new(
        state_dim: usize,
        input_dim: usize,
        drift: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        actuation: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        lipschitz: Lipschitz,
    ) -> Self {
        Self {
            state_dim,
            input_dim,
            drift: Box::new(drift),
            actuation: Box::new(actuation),
            lipschitz,
        }
    }
}

impl std::fmt::Debug for FnField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnField")
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl ControlAffineField for FnField {
    fn state_dim(&self) -> usize {
        self.state_dim
    }
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }
    fn actuation(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.actuation)(x)
    }
    fn lipschitz(&self) -> Lipschitz {
        self.lipschitz
    }
}

/// `v_x(u) = f(x) + G(x) u`, checking both dimensions.
pub fn evaluate_velocity(
    field: &dyn ControlAffineField,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    check_dim("state", field.state_dim(), x.len())?;
    check_dim("input", field.input_dim(), u.len())?;
    Ok(field.velocity(x, u))
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), DynamicsError> {
    if expected == got {
        Ok(())
    } else {
        Err(DynamicsError::DimensionMismatch { what, expected, got })
    }
}

/// Slack allowed on `|u| <= 1` for roundoff in `(1 - eps)` scalings.
pub const ADMISSIBLE_SLACK: f64 = 1e-12;

/// Piecewise-constant input: `values[i]` holds on `[breakpoints[i], breakpoints[i + 1])`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewiseConstantControl {
    breakpoints: Vec<f64>,
    values: Vec<DVector<f64>>,
}

impl PiecewiseConstantControl {
    pub fn new(breakpoints: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self, DynamicsError> {
        if breakpoints.len() != values.len() + 1 {
            return Err(DynamicsError::InvalidControl(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                values.len()
            )));
        }
        if breakpoints
            .windows(2)
            .any(|w| w[1] <= w[0] || !w[0].is_finite() || !w[1].is_finite())
        {
            return Err(DynamicsError::InvalidControl(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if let Some(m) = values.first().map(|v| v.len()) {
            if values.iter().any(|v| v.len() != m) {
                return Err(DynamicsError::InvalidControl("inconsistent input dimension".into()));
            }
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.norm() > 1.0 + ADMISSIBLE_SLACK)
        {
            return Err(DynamicsError::InvalidControl(format!(
                "piece {i} has |u| = {} > 1",
                v.norm()
            )));
        }
        Ok(Self { breakpoints, values })
    }

    /// A single constant piece on `[t0, t1)`.
    pub fn constant(u: DVector<f64>, t0: f64, t1: f64) -> Result<Self, DynamicsError> {
        Self::new(vec![t0, t1], vec![u])
    }

    /// Empty signal starting at `t0`; extend with [`push`](Self::push).
    pub fn starting_at(t0: f64) -> Self {
        Self {
            breakpoints: vec![t0],
            values: Vec::new(),
        }
    }

    /// Appends a piece of the given duration.
    pub fn push(&mut self, u: DVector<f64>, duration: f64) -> Result<(), DynamicsError> {
        if !(duration > 0.0) {
            return Err(DynamicsError::InvalidControl("piece duration must be positive".into()));
        }
        if u.norm() > 1.0 + ADMISSIBLE_SLACK {
            return Err(DynamicsError::InvalidControl(format!("|u| = {} > 1", u.norm())));
        }
        if let Some(prev) = self.values.first() {
            if prev.len() != u.len() {
                return Err(DynamicsError::InvalidControl("inconsistent input dimension".into()));
            }
        }
        let start = *self.breakpoints.last().expect("at least one breakpoint");
        self.breakpoints.push(start + duration);
        self.values.push(u);
        Ok(())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().expect("at least one breakpoint")
    }

    /// Iterates `(t_start, t_end, u)`.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, &DVector<f64>)> {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, u)| (w[0], w[1], u))
    }

    /// Value at `t`; the last piece is closed on the right.
    pub fn value_at(&self, t: f64) -> Option<&DVector<f64>> {
        if self.values.is_empty() || t < self.start() || t > self.end() {
            return None;
        }
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        Some(&self.values[idx.saturating_sub(1).min(self.values.len() - 1)])
    }

    /// Writes `t_start,t_end,u1,...,um`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let m = self.values.first().map_or(0, |v| v.len());
        let mut header = String::from("t_start,t_end");
        for i in 1..=m {
            header.push_str(&format!(",u{i}"));
        }
        writeln!(w, "{header}")?;
        for (t0, t1, u) in self.pieces() {
            let mut row = format!("{},{}", fmt_num(t0), fmt_num(t1));
            for v in u.iter() {
                row.push(',');
                row.push_str(&fmt_num(*v));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Sampled solution `t -> phi_u(t, x0)`.
///
/// `inputs[i]` is the control held on the interval that starts at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub substep: f64,
}

impl Trajectory {
    pub fn new(t0: f64, x0: DVector<f64>, u0: DVector<f64>, substep: f64) -> Self {
        Self {
            times: vec![t0],
            states: vec![x0],
            inputs: vec![u0],
            substep,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("non-empty trajectory")
    }

    fn push(&mut self, t: f64, x: DVector<f64>, u: DVector<f64>) {
        self.times.push(t);
        self.states.push(x);
        self.inputs.push(u);
    }

    /// Index of the sample at exactly `t`, if any.
    pub fn sample_index(&self, t: f64) -> Option<usize> {
        let idx = self.times.partition_point(|&s| s < t);
        (idx < self.times.len() && self.times[idx] == t).then_some(idx)
    }

    /// Writes `t,x1,...,xd,u1,...,um`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.states.first().map_or(0, |x| x.len());
        let m = self.inputs.first().map_or(0, |u| u.len());
        let mut header = String::from("t");
        for i in 1..=d {
            header.push_str(&format!(",x{i}"));
        }
        for i in 1..=m {
            header.push_str(&format!(",u{i}"));
        }
        writeln!(w, "{header}")?;
        for ((t, x), u) in self.times.iter().zip(&self.states).zip(&self.inputs) {
            let mut row = fmt_num(*t);
            for v in x.iter().chain(u.iter()) {
                row.push(',');
                row.push_str(&fmt_num(*v));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Closed ball the state must stay in; leaving it aborts integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl Guard {
    pub fn new(center: DVector<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    fn check(&self, t: f64, x: &DVector<f64>) -> Result<(), DynamicsError> {
        let distance = (x - &self.center).norm();
        if distance > self.radius || !distance.is_finite() {
            Err(DynamicsError::DomainExit {
                time: t,
                distance,
                radius: self.radius,
            })
        } else {
            Ok(())
        }
    }
}

/// One classical RK4 step of an autonomous vector field.
pub fn rk4_step<F>(rhs: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let k1 = rhs(x);
    let k2 = rhs(&(x + &k1 * (0.5 * h)));
    let k3 = rhs(&(x + &k2 * (0.5 * h)));
    let k4 = rhs(&(x + &k3 * h));
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// Sub-step times for `[t0, t1]` with nominal step `h`.
///
/// The last step is shortened so the grid lands on `t1` exactly; a relative
/// slack of 1e-6 steps absorbs roundoff in `(t1 - t0) / h`.
pub fn substep_grid(t0: f64, t1: f64, h: f64) -> Vec<f64> {
    let ratio = (t1 - t0) / h;
    let n = ((ratio - 1e-6).ceil() as usize).max(1);
    let mut grid: Vec<f64> = (1..n).map(|i| t0 + i as f64 * h).collect();
    grid.push(t1);
    grid
}

/// Integrates `x' = f(x) + G(x) u` with `u` held constant on `[t0, t1]`,
/// appending every sub-step sample to `out`. Returns the number of RK4 steps.
pub(crate) fn advance_constant(
    field: &dyn ControlAffineField,
    u: &DVector<f64>,
    t0: f64,
    t1: f64,
    h: f64,
    guard: Option<&Guard>,
    out: &mut Trajectory,
) -> Result<usize, DynamicsError> {
    if let Some(last) = out.inputs.last_mut() {
        *last = u.clone();
    }
    let mut x = out.final_state().clone();
    let mut t = t0;
    let grid = substep_grid(t0, t1, h);
    let steps = grid.len();
    for t_next in grid {
        x = rk4_step(|s| field.velocity(s, u), &x, t_next - t);
        t = t_next;
        if let Some(g) = guard {
            g.check(t, &x)?;
        }
        out.push(t, x.clone(), u.clone());
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    pub substep: f64,
    pub guard: Option<Guard>,
}

impl IntegratorOptions {
    pub fn new(substep: f64) -> Self {
        Self { substep, guard: None }
    }

    pub fn with_guard(mut self, guard: Guard) -> Self {
        self.guard = Some(guard);
        self
    }
}

/// Fixed-step RK4 integration over `[t_a, t_b]`.
///
/// Samples are emitted at every sub-step and at every control breakpoint
/// inside the span; the final sample is at `t_b` exactly.
pub fn integrate(
    field: &dyn ControlAffineField,
    control: &PiecewiseConstantControl,
    x0: &DVector<f64>,
    span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<Trajectory, DynamicsError> {
    let (ta, tb) = span;
    if !(opts.substep > 0.0) || !opts.substep.is_finite() {
        return Err(DynamicsError::InvalidRequest("substep must be positive".into()));
    }
    if !(tb >= ta) {
        return Err(DynamicsError::InvalidRequest("t_b must not precede t_a".into()));
    }
    if control.is_empty() || control.start() > ta || control.end() < tb {
        return Err(DynamicsError::InvalidRequest(format!(
            "control covers [{}, {}], span is [{ta}, {tb}]",
            if control.is_empty() { f64::NAN } else { control.start() },
            control.end()
        )));
    }
    check_dim("state", field.state_dim(), x0.len())?;
    check_dim("input", field.input_dim(), control.values()[0].len())?;

    let u0 = control.value_at(ta).expect("covered").clone();
    let mut traj = Trajectory::new(ta, x0.clone(), u0, opts.substep);
    if let Some(g) = &opts.guard {
        g.check(ta, x0)?;
    }
    for (s, e, u) in control.pieces() {
        let lo = s.max(ta);
        let hi = e.min(tb);
        if hi <= lo {
            continue;
        }
        advance_constant(field, u, lo, hi, opts.substep, opts.guard.as_ref(), &mut traj)?;
    }
    Ok(traj)
}
