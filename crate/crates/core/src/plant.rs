//! Black-box access to the true system.
//!
//! The synthesis loop only ever sees a [`Plant`]: it can apply a constant input
//! for a while and read back the resulting state. The vector field stays behind
//! the [`Simulator`], which is the one place it is evaluated.

use nalgebra::DVector;

use crate::dynamics::{
    advance_constant, check_dim, ControlAffineField, DynamicsError, Guard, PiecewiseConstantControl, Trajectory,
};

pub trait Plant {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn time(&self) -> f64;
    fn state(&self) -> &DVector<f64>;
    /// Holds `u` for `duration` seconds and returns the state reached.
    fn apply(&mut self, u: &DVector<f64>, duration: f64) -> Result<DVector<f64>, DynamicsError>;
    /// Everything observed so far.
    fn trajectory(&self) -> &Trajectory;
    /// Everything applied so far.
    fn control(&self) -> &PiecewiseConstantControl;
}

/// Simulated plant: RK4 with a fixed sub-step, recording everything it does.
pub struct Simulator<F> {
    field: F,
    substep: f64,
    guard: Option<Guard>,
    trajectory: Trajectory,
    control: PiecewiseConstantControl,
    rk_steps: usize,
}

impl<F: ControlAffineField> Simulator<F> {
    pub fn new(field: F, x0: DVector<f64>, t0: f64, substep: f64) -> Result<Self, DynamicsError> {
        check_dim("state", field.state_dim(), x0.len())?;
        if !(substep > 0.0) {
            return Err(DynamicsError::InvalidRequest("substep must be positive".into()));
        }
        let m = field.input_dim();
        Ok(Self {
            field,
            substep,
            guard: None,
            trajectory: Trajectory::new(t0, x0, DVector::zeros(m), substep),
            control: PiecewiseConstantControl::starting_at(t0),
            rk_steps: 0,
        })
    }

    pub fn with_guard(mut self, guard: Guard) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    /// Number of RK4 steps taken so far (each evaluates the field four times).
    pub fn rk_steps(&self) -> usize {
        self.rk_steps
    }

    pub fn into_parts(self) -> (Trajectory, PiecewiseConstantControl) {
        (self.trajectory, self.control)
    }
}

impl<F: ControlAffineField> Plant for Simulator<F> {
    fn state_dim(&self) -> usize {
        self.field.state_dim()
    }

    fn input_dim(&self) -> usize {
        self.field.input_dim()
    }

    fn time(&self) -> f64 {
        self.trajectory.final_time()
    }

    fn state(&self) -> &DVector<f64> {
        self.trajectory.final_state()
    }

    fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    fn control(&self) -> &PiecewiseConstantControl {
        &self.control
    }

    fn apply(&mut self, u: &DVector<f64>, duration: f64) -> Result<DVector<f64>, DynamicsError> {
        check_dim("input", self.field.input_dim(), u.len())?;
        self.control.push(u.clone(), duration)?;
        let t0 = self.time();
        let t1 = self.control.end();
        let before = self.trajectory.len();
        let steps = advance_constant(
            &self.field,
            u,
            t0,
            t1,
            self.substep,
            self.guard.as_ref(),
            &mut self.trajectory,
        );
        match steps {
            Ok(n) => {
                self.rk_steps += n;
                Ok(self.state().clone())
            }
            Err(e) => {
                // the failing step was computed but not recorded
                self.rk_steps += self.trajectory.len() - before + 1;
                Err(e)
            }
        }
    }
}
