//! The underapproximating proxy system `x' = a + (b - c|x - x0|) u_hat`.
//!
//! `a = f(x0)`, `b = 1 / ||G(x0)^+||` and `c = L_f + L_G` are all computable from
//! data at the single point `x0`. Every state the proxy can reach within `T` is
//! reachable by the true system, so its reachable set is a guaranteed
//! reachable set (GRS). Inputs `u_hat` live in the unit ball of `Im(G(x0))`.
//!
//! The proxy is only meaningful on `B = {x : |x - x0| <= b / c}`, where the gain
//! `b - c|x - x0|` is nonnegative. Integration clamps the gain at zero so a flow
//! that touches the boundary of `B` stops being driven by its input.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{rk4_step, substep_grid, Lipschitz, Trajectory};
use crate::io::fmt_num;

/// Direction count used by `learning_radius` and `min_travel`.
pub const DEFAULT_DIRECTIONS: usize = 360;
/// Minimum direction count accepted by [`ProxyParams::grs_boundary`].
pub const MIN_DIRECTIONS: usize = 8;
/// Sub-steps per proxy flow when no explicit step is requested.
pub const DEFAULT_PROXY_STEPS: usize = 1000;

const IMAGE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxyError {
    #[error("G(x0) has no nonzero singular value; the proxy has no actuation")]
    DegenerateActuation,
    #[error("invalid proxy parameter: {0}")]
    InvalidParameter(String),
    #[error("state at distance {distance} from x0 is outside the proxy domain of radius {radius}")]
    OutsideDomain { distance: f64, radius: f64 },
    #[error("direction is not admissible: {0}")]
    InadmissibleDirection(String),
    #[error("target direction has a component of size {residual} outside Im(G(x0))")]
    UnreachableDirection { residual: f64 },
    #[error("target coincides with the drift endpoint x0 + aT; no boundary control exists")]
    TrivialTarget,
    #[error("at least {MIN_DIRECTIONS} directions are required, got {0}")]
    TooFewDirections(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Whether the learning radius measures raw or drift-subtracted displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusVariant {
    Raw,
    DriftSubtracted,
}

/// The proxy triple `(a, b, c)`, the base point `x0` and an orthonormal basis of `Im(G(x0))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyParams {
    pub drift: DVector<f64>,
    pub gain: f64,
    pub decay: f64,
    pub image_basis: DMatrix<f64>,
    pub origin: DVector<f64>,
}

/// A unit input direction and the label it is reported under
/// (angle in degrees for a planar image, index otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub label: f64,
    pub vector: DVector<f64>,
}

/// A proxy flow under a constant input.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyPath {
    pub trajectory: Trajectory,
    /// The flow reached the boundary of `B`, where the input stops acting.
    pub clamped: bool,
}

impl ProxyPath {
    pub fn endpoint(&self) -> &DVector<f64> {
        self.trajectory.final_state()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub label: f64,
    pub direction: DVector<f64>,
    pub endpoint: DVector<f64>,
    pub clamped: bool,
}

/// Sampled boundary of the proxy reachable set at horizon `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrsBoundary {
    pub horizon: f64,
    pub origin: DVector<f64>,
    pub points: Vec<BoundaryPoint>,
}

impl GrsBoundary {
    /// `(min, max)` of `|y - x0|` over the sampled endpoints.
    pub fn radius_range(&self) -> (f64, f64) {
        self.points.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), p| {
            let r = (&p.endpoint - &self.origin).norm();
            (lo.min(r), hi.max(r))
        })
    }

    /// Writes `angle_or_index,y1,...,yd,clamped`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.origin.len();
        let mut header = String::from("angle_or_index");
        for i in 1..=d {
            header.push_str(&format!(",y{i}"));
        }
        header.push_str(",clamped");
        writeln!(w, "{header}")?;
        for p in &self.points {
            let mut row = fmt_num(p.label);
            for v in p.endpoint.iter() {
                row.push(',');
                row.push_str(&fmt_num(*v));
            }
            row.push_str(if p.clamped { ",1" } else { ",0" });
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// `(b / c)(1 - exp(-c t))`: radius of the drift-free proxy flow at time `t`.
pub fn radial_closed_form(gain: f64, decay: f64, t: f64) -> f64 {
    if decay * t < 1e-12 {
        gain * t
    } else {
        -(gain / decay) * (-decay * t).exp_m1()
    }
}

/// Spectral norm of a matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `||M^+||^-1`, the smallest nonzero singular value. `None` when `M = 0`.
pub fn pseudoinverse_norm_inv(m: &DMatrix<f64>) -> Option<f64> {
    if m.is_empty() {
        return None;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    if !(top > 0.0) {
        return None;
    }
    let tol = top * f64::EPSILON * m.nrows().max(m.ncols()) as f64;
    sv.iter().copied().filter(|&s| s > tol).reduce(f64::min)
}

/// Orthonormal basis of the column span, by modified Gram-Schmidt over the columns.
///
/// Columns are visited in order, so a diagonal `G` yields the canonical basis.
pub fn column_space_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let tol = scale * 1e-10;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for col in m.column_iter() {
        let mut v: DVector<f64> = col.into_owned();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let n = v.norm();
        if n > tol {
            basis.push(v / n);
        }
    }
    if basis.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

impl ProxyParams {
    /// Builds the proxy from `f(x0)`, `G(x0)` and the Lipschitz bounds, with `x0 = 0`.
    pub fn derive(f_x0: &DVector<f64>, g_x0: &DMatrix<f64>, lipschitz: Lipschitz) -> Result<Self, ProxyError> {
        if g_x0.nrows() != f_x0.len() {
            return Err(ProxyError::DimensionMismatch {
                expected: f_x0.len(),
                got: g_x0.nrows(),
            });
        }
        let decay = lipschitz.sum();
        if !(lipschitz.drift >= 0.0 && lipschitz.actuation >= 0.0) || !(decay > 0.0) || !decay.is_finite() {
            return Err(ProxyError::InvalidParameter(format!(
                "need L_f, L_G >= 0 with L_f + L_G > 0, got ({}, {})",
                lipschitz.drift, lipschitz.actuation
            )));
        }
        let gain = pseudoinverse_norm_inv(g_x0).ok_or(ProxyError::DegenerateActuation)?;
        Ok(Self {
            drift: f_x0.clone(),
            gain,
            decay,
            image_basis: column_space_basis(g_x0),
            origin: DVector::zeros(f_x0.len()),
        })
    }

    /// Builds a proxy directly from `(a, b, c)` with the full space as input image.
    pub fn from_constants(drift: DVector<f64>, gain: f64, decay: f64) -> Result<Self, ProxyError> {
        if !(gain >= 0.0) || !(decay > 0.0) {
            return Err(ProxyError::InvalidParameter(format!(
                "need b >= 0 and c > 0, got b = {gain}, c = {decay}"
            )));
        }
        let d = drift.len();
        Ok(Self {
            drift,
            gain,
            decay,
            image_basis: DMatrix::identity(d, d),
            origin: DVector::zeros(d),
        })
    }

    pub fn with_origin(mut self, origin: DVector<f64>) -> Self {
        self.origin = origin;
        self
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn image_rank(&self) -> usize {
        self.image_basis.ncols()
    }

    /// Radius `b / c` of the domain `B`.
    pub fn domain_radius(&self) -> f64 {
        self.gain / self.decay
    }

    /// Gain `b - c|x - x0|` (negative outside `B`).
    pub fn gain_at(&self, x: &DVector<f64>) -> f64 {
        self.gain - self.decay * (x - &self.origin).norm()
    }

    /// Component of `v` orthogonal to `Im(G(x0))`.
    pub fn image_residual(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.project_to_image(v)
    }

    pub fn project_to_image(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.image_basis * (self.image_basis.transpose() * v)
    }

    fn check_input(&self, u_hat: &DVector<f64>) -> Result<(), ProxyError> {
        if u_hat.len() != self.dim() {
            return Err(ProxyError::DimensionMismatch {
                expected: self.dim(),
                got: u_hat.len(),
            });
        }
        let n = u_hat.norm();
        if n > 1.0 + 1e-12 {
            return Err(ProxyError::InadmissibleDirection(format!("|u_hat| = {n} > 1")));
        }
        let off = self.image_residual(u_hat).norm();
        if off > IMAGE_TOL * n.max(1.0) {
            return Err(ProxyError::InadmissibleDirection(format!(
                "component {off} outside Im(G(x0))"
            )));
        }
        Ok(())
    }

    /// Proxy velocity `a + (b - c|x - x0|) u_hat`.
    pub fn velocity(&self, x: &DVector<f64>, u_hat: &DVector<f64>) -> Result<DVector<f64>, ProxyError> {
        self.check_input(u_hat)?;
        if x.len() != self.dim() {
            return Err(ProxyError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let g = self.gain_at(x);
        if g < -1e-12 * self.gain.max(1.0) {
            return Err(ProxyError::OutsideDomain {
                distance: (x - &self.origin).norm(),
                radius: self.domain_radius(),
            });
        }
        Ok(&self.drift + u_hat * g.max(0.0))
    }

    fn clamped_velocity(&self, x: &DVector<f64>, control: &DVector<f64>) -> DVector<f64> {
        &self.drift + control * self.gain_at(x).max(0.0)
    }

    /// Flow from `x0` under an arbitrary constant input vector, unchecked.
    ///
    /// `substep = None` uses [`DEFAULT_PROXY_STEPS`] steps over the horizon.
    pub fn flow(&self, control: &DVector<f64>, horizon: f64, substep: Option<f64>) -> ProxyPath {
        let h = substep.unwrap_or(horizon / DEFAULT_PROXY_STEPS as f64);
        let mut traj = Trajectory::new(0.0, self.origin.clone(), control.clone(), h);
        let limit = self.domain_radius() * (1.0 - 1e-9);
        let mut clamped = false;
        if horizon > 0.0 {
            let mut x = self.origin.clone();
            let mut t = 0.0;
            for t_next in substep_grid(0.0, horizon, h) {
                x = rk4_step(|s| self.clamped_velocity(s, control), &x, t_next - t);
                t = t_next;
                clamped |= (&x - &self.origin).norm() >= limit;
                traj.times.push(t);
                traj.states.push(x.clone());
                traj.inputs.push(control.clone());
            }
        }
        ProxyPath {
            trajectory: traj,
            clamped,
        }
    }

    /// Flow from `x0` under a constant admissible direction for time `horizon`.
    pub fn integrate(&self, u_hat: &DVector<f64>, horizon: f64, substep: Option<f64>) -> Result<ProxyPath, ProxyError> {
        self.check_input(u_hat)?;
        if !(horizon >= 0.0) {
            return Err(ProxyError::InvalidParameter(format!("horizon {horizon} < 0")));
        }
        if let Some(h) = substep {
            if !(h > 0.0) {
                return Err(ProxyError::InvalidParameter("substep must be positive".into()));
            }
        }
        Ok(self.flow(u_hat, horizon, substep))
    }

    /// `n` deterministic unit directions spread over `Im(G(x0))`.
    ///
    /// Planar image: uniform angular grid starting at angle 0 of the first basis
    /// vector. Rank one: the two unit vectors. Higher rank: a Halton sequence
    /// pushed through Box-Muller and normalized.
    pub fn direction_grid(&self, n: usize) -> Vec<Direction> {
        let basis = &self.image_basis;
        match basis.ncols() {
            0 => Vec::new(),
            1 => vec![
                Direction {
                    label: 0.0,
                    vector: basis.column(0).into_owned(),
                },
                Direction {
                    label: 1.0,
                    vector: -basis.column(0).into_owned(),
                },
            ],
            2 => (0..n)
                .map(|i| {
                    let deg = 360.0 * i as f64 / n as f64;
                    let th = deg.to_radians();
                    Direction {
                        label: deg,
                        vector: basis.column(0) * th.cos() + basis.column(1) * th.sin(),
                    }
                })
                .collect(),
            rank => {
                let primes = first_primes(rank + rank % 2);
                (0..n)
                    .map(|i| {
                        let mut coords = DVector::zeros(rank);
                        for pair in 0..rank.div_ceil(2) {
                            let u1 = radical_inverse(i as u64 + 1, primes[2 * pair]);
                            let u2 = radical_inverse(i as u64 + 1, primes[2 * pair + 1]);
                            let rad = (-2.0 * u1.ln()).sqrt();
                            let ang = std::f64::consts::TAU * u2;
                            coords[2 * pair] = rad * ang.cos();
                            if 2 * pair + 1 < rank {
                                coords[2 * pair + 1] = rad * ang.sin();
                            }
                        }
                        let v = basis * coords;
                        let norm = v.norm();
                        Direction {
                            label: i as f64,
                            vector: v / norm,
                        }
                    })
                    .collect()
            }
        }
    }

    /// Endpoints of constant unit-input flows at `horizon` for `n_dirs` directions.
    pub fn grs_boundary(&self, horizon: f64, n_dirs: usize) -> Result<GrsBoundary, ProxyError> {
        if n_dirs < MIN_DIRECTIONS {
            return Err(ProxyError::TooFewDirections(n_dirs));
        }
        if !(horizon >= 0.0) {
            return Err(ProxyError::InvalidParameter(format!("horizon {horizon} < 0")));
        }
        let points = self
            .direction_grid(n_dirs)
            .into_iter()
            .map(|dir| {
                let path = self.flow(&dir.vector, horizon, None);
                BoundaryPoint {
                    label: dir.label,
                    endpoint: path.endpoint().clone(),
                    clamped: path.clamped,
                    direction: dir.vector,
                }
            })
            .collect();
        Ok(GrsBoundary {
            horizon,
            origin: self.origin.clone(),
            points,
        })
    }

    /// The only (a.e.) proxy input reaching a boundary point `y` at time `horizon`:
    /// the unit vector along `y - aT - x0`.
    pub fn unique_boundary_control(&self, y: &DVector<f64>, horizon: f64) -> Result<DVector<f64>, ProxyError> {
        if y.len() != self.dim() {
            return Err(ProxyError::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        let w = y - &self.drift * horizon - &self.origin;
        let n = w.norm();
        if n <= 1e-12 * y.norm().max(1.0) {
            return Err(ProxyError::TrivialTarget);
        }
        let p = self.project_to_image(&w);
        let residual = (&w - &p).norm();
        if residual > IMAGE_TOL * n.max(1.0) {
            return Err(ProxyError::UnreachableDirection { residual });
        }
        let pn = p.norm();
        Ok(p / pn)
    }

    /// Largest displacement of the proxy over `k (m + 1) dt` under constant unit inputs.
    pub fn learning_radius(&self, k: f64, dt: f64, m: usize, variant: RadiusVariant) -> f64 {
        self.learning_radius_with(k, dt, m, variant, DEFAULT_DIRECTIONS)
    }

    pub fn learning_radius_with(&self, k: f64, dt: f64, m: usize, variant: RadiusVariant, n_dirs: usize) -> f64 {
        let horizon = k * (m + 1) as f64 * dt;
        if self.drift.norm() == 0.0 {
            return radial_closed_form(self.gain, self.decay, horizon);
        }
        self.displacements(horizon, variant, n_dirs).fold(0.0, f64::max)
    }

    /// Smallest drift-subtracted displacement over `horizon` under constant unit inputs.
    pub fn min_travel(&self, horizon: f64) -> f64 {
        if self.drift.norm() == 0.0 {
            return radial_closed_form(self.gain, self.decay, horizon);
        }
        self.displacements(horizon, RadiusVariant::DriftSubtracted, DEFAULT_DIRECTIONS)
            .fold(f64::INFINITY, f64::min)
    }

    fn displacements(&self, horizon: f64, variant: RadiusVariant, n_dirs: usize) -> impl Iterator<Item = f64> + '_ {
        self.direction_grid(n_dirs).into_iter().map(move |dir| {
            let end = self.flow(&dir.vector, horizon, None).endpoint().clone();
            let shift = match variant {
                RadiusVariant::Raw => DVector::zeros(self.dim()),
                RadiusVariant::DriftSubtracted => &self.drift * horizon,
            };
            (end - shift - &self.origin).norm()
        })
    }
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes
            .iter()
            .take_while(|&&p| p * p <= c)
            .all(|&p| !c.is_multiple_of(p))
        {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn quad() -> ProxyParams {
        let j = 0.009;
        let g = DMatrix::from_diagonal(&v(&[1.0 / j, 1.0 / j]));
        let a = v(&[
            std::f64::consts::PI * (0.009 - 0.014) * 10.0 / (2.0 * j),
            std::f64::consts::PI * (0.014 - 0.009) * 15.0 / (2.0 * j),
        ]);
        ProxyParams::derive(&a, &g, Lipschitz::new(1.0, 1.0)).unwrap()
    }

    fn unit() -> ProxyParams {
        ProxyParams::from_constants(v(&[0.0, 0.0]), 1.0, 1.0).unwrap()
    }

    #[test]
    fn derive_quadrotor_constants() {
        let p = quad();
        assert_abs_diff_eq!(p.gain, 111.11, epsilon = 0.01);
        assert_eq!(p.decay, 2.0);
        assert_eq!(p.image_basis, DMatrix::identity(2, 2));
    }

    #[test]
    fn derive_identity() {
        let p = ProxyParams::derive(&v(&[0.0, 0.0]), &DMatrix::identity(2, 2), Lipschitz::new(0.5, 0.5)).unwrap();
        assert_abs_diff_eq!(p.gain, 1.0, epsilon = 1e-14);
        assert_eq!(p.decay, 1.0);
    }

    #[test]
    fn derive_anisotropic_diagonal() {
        let g = DMatrix::from_diagonal(&v(&[2.0, 0.5]));
        let p = ProxyParams::derive(&v(&[0.0, 0.0]), &g, Lipschitz::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p.gain, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn derive_rejects_zero_actuation() {
        let err = ProxyParams::derive(&v(&[1.0, 0.0]), &DMatrix::zeros(2, 2), Lipschitz::new(1.0, 1.0)).unwrap_err();
        assert_eq!(err, ProxyError::DegenerateActuation);
    }

    #[test]
    fn rank_deficient_image() {
        let g = DMatrix::from_row_slice(3, 1, &[0.0, 3.0, 4.0]);
        let p = ProxyParams::derive(&v(&[0.0, 0.0, 0.0]), &g, Lipschitz::new(1.0, 1.0)).unwrap();
        assert_eq!(p.image_rank(), 1);
        assert_abs_diff_eq!(p.gain, 5.0, epsilon = 1e-12);
        assert!(p.velocity(&v(&[0.0, 0.0, 0.0]), &v(&[1.0, 0.0, 0.0])).is_err());
        assert!(p.unique_boundary_control(&v(&[1.0, 0.0, 0.0]), 1.0).is_err());
        let u = p.unique_boundary_control(&v(&[0.0, 0.6, 0.8]), 1.0).unwrap();
        assert_abs_diff_eq!(u[2], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn velocity_examples() {
        let p = unit();
        assert_eq!(p.velocity(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
        let q = quad();
        let w = q.velocity(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(w[0], 102.38, epsilon = 0.02);
        assert_abs_diff_eq!(w[1], 13.09, epsilon = 0.02);
        let edge = v(&[q.domain_radius(), 0.0]);
        assert_eq!(q.velocity(&edge, &v(&[0.0, 1.0])).unwrap(), q.drift);
        let out = v(&[q.domain_radius() + 1.0, 0.0]);
        assert!(matches!(
            q.velocity(&out, &v(&[0.0, 1.0])),
            Err(ProxyError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn integrate_matches_closed_form() {
        let p = unit();
        let path = p.integrate(&v(&[1.0, 0.0]), 1.0, Some(1e-3)).unwrap();
        assert_abs_diff_eq!(path.endpoint()[0], 1.0 - (-1.0f64).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(path.endpoint()[1], 0.0, epsilon = 1e-15);
        assert!(!path.clamped);
    }

    #[test]
    fn long_horizon_saturates_at_domain_radius() {
        let p = ProxyParams::from_constants(v(&[0.0, 0.0]), 3.0, 2.0).unwrap();
        let path = p.integrate(&v(&[0.0, -1.0]), 40.0, Some(0.01)).unwrap();
        assert_abs_diff_eq!(path.endpoint().norm(), 1.5, epsilon = 1e-9);
        assert!(path.clamped);
    }

    #[test]
    fn zero_gain_is_pure_drift() {
        let p = ProxyParams::from_constants(v(&[1.0, 0.0]), 0.0, 1.0).unwrap();
        let path = p.integrate(&v(&[0.0, 1.0]), 2.0, Some(0.01)).unwrap();
        assert_abs_diff_eq!(path.endpoint()[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(path.endpoint()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(radial_closed_form(2.0, 1.0, 2f64.ln()), 1.0, epsilon = 1e-15);
        assert_eq!(radial_closed_form(2.0, 1.0, 0.0), 0.0);
        assert_eq!(radial_closed_form(3.0, 1e-14, 0.5), 1.5);
    }

    #[test]
    fn boundary_on_axes() {
        let b = unit().grs_boundary(1.0, 8).unwrap();
        let want = 1.0 - (-1.0f64).exp();
        for (i, p) in b.points.iter().enumerate().step_by(2) {
            assert_abs_diff_eq!(p.endpoint.norm(), want, epsilon = 1e-9);
            assert_abs_diff_eq!(p.label, 45.0 * i as f64, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(b.points[2].endpoint[1], want, epsilon = 1e-9);
    }

    #[test]
    fn boundary_of_quadrotor_is_inside_domain_and_skewed() {
        let q = quad();
        let b = q.grs_boundary(0.25, 360).unwrap();
        assert!(b
            .points
            .iter()
            .all(|p| p.endpoint.norm() < q.domain_radius() && !p.clamped));
        let (lo, hi) = b.radius_range();
        assert!(hi - lo > 1.0, "boundary should not be a circle: {lo} {hi}");
    }

    #[test]
    fn zero_horizon_boundary_is_origin() {
        let b = quad().grs_boundary(0.0, 16).unwrap();
        assert!(b.points.iter().all(|p| p.endpoint == DVector::zeros(2)));
    }

    #[test]
    fn too_few_directions() {
        assert_eq!(
            unit().grs_boundary(1.0, 3).unwrap_err(),
            ProxyError::TooFewDirections(3)
        );
    }

    #[test]
    fn unique_control_examples() {
        let p = unit();
        assert_eq!(p.unique_boundary_control(&v(&[3.0, 0.0]), 7.0).unwrap(), v(&[1.0, 0.0]));
        let q = quad();
        let y = q.integrate(&v(&[0.0, 1.0]), 0.25, None).unwrap().endpoint().clone();
        let u = q.unique_boundary_control(&y, 0.25).unwrap();
        assert_abs_diff_eq!(u[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(u[1], 1.0, epsilon = 1e-6);
        let drift_end = &q.drift * 0.25;
        assert_eq!(
            q.unique_boundary_control(&drift_end, 0.25).unwrap_err(),
            ProxyError::TrivialTarget
        );
    }

    #[test]
    fn learning_radius_drift_free_is_closed_form() {
        let p = ProxyParams::from_constants(v(&[0.0, 0.0]), 111.0, 2.0).unwrap();
        for variant in [RadiusVariant::Raw, RadiusVariant::DriftSubtracted] {
            let r = p.learning_radius(5.0, 1e-4, 2, variant);
            assert_abs_diff_eq!(r, radial_closed_form(111.0, 2.0, 1.5e-3), epsilon = 1e-9);
        }
        // the sweep agrees with the short-circuit
        let tiny = ProxyParams::from_constants(v(&[1e-300, 0.0]), 111.0, 2.0).unwrap();
        let swept = tiny.learning_radius(5.0, 1e-4, 2, RadiusVariant::DriftSubtracted);
        assert_abs_diff_eq!(swept, radial_closed_form(111.0, 2.0, 1.5e-3), epsilon = 1e-9);
    }

    #[test]
    fn learning_radius_scenarios() {
        let q = quad();
        let a = q.learning_radius(5.0, 1e-4, 2, RadiusVariant::Raw);
        assert!((a - 0.18).abs() <= 0.15 * 0.18, "{a}");
        let d = q.learning_radius(40.0, 1.5e-3, 2, RadiusVariant::Raw);
        assert!((d - 18.83).abs() <= 0.15 * 18.83, "{d}");
    }

    #[test]
    fn high_rank_grid_is_unit_and_distinct() {
        let p = ProxyParams::from_constants(DVector::zeros(4), 1.0, 1.0).unwrap();
        let grid = p.direction_grid(64);
        assert_eq!(grid.len(), 64);
        for (i, d) in grid.iter().enumerate() {
            assert_abs_diff_eq!(d.vector.norm(), 1.0, epsilon = 1e-12);
            for e in &grid[..i] {
                assert!((&d.vector - &e.vector).norm() > 1e-6);
            }
        }
    }

    #[test]
    fn grs_csv_layout() {
        let b = unit().grs_boundary(1.0, 8).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("angle_or_index,y1,y2,clamped\n"));
        assert_eq!(text.lines().count(), 9);
    }
}
