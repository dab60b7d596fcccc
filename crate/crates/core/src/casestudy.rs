//! Quadrotor roll/pitch benchmark.
//!
//! Roll and pitch rates `(p, q)` of a quadrotor with a spherical central mass and
//! four point-mass propellers, driven by two torques. Yaw is decoupled and held
//! out. States are shifted so the nominal rates `(15, 10)` rad/s sit at the
//! origin: `x = (p - 15, q - 10)`.
//!
//! The propeller mass defaults to 0.01 kg, which gives `J_x = J_y = 0.009` and
//! `J_z = 0.014`. [`LITERAL_PROP_MASS`] (0.1 kg) is available for comparison and
//! gives much larger inertias.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{AffineField, Guard, Lipschitz};
use crate::learner::{CycleConfig, LearnerError};
use crate::plant::Simulator;
use crate::proxy::{GrsBoundary, ProxyParams, ProxyPath, RadiusVariant, DEFAULT_DIRECTIONS};
use crate::synthesizer::{run_synthesis, LocalModel, SynthesisConfig, SynthesisError, SynthesisResult, Variant};

pub const DEFAULT_PROP_MASS: f64 = 0.01;
pub const LITERAL_PROP_MASS: f64 = 0.1;
pub const NOMINAL_RATES: [f64; 2] = [15.0, 10.0];
pub const DEFAULT_HORIZON: f64 = 0.25;
pub const DEFAULT_ANGLES: [f64; 4] = [30.0, 120.0, 210.0, 300.0];
/// RK4 sub-steps per `dt`.
pub const DEFAULT_SUBSTEP_DIVISOR: usize = 20;
/// Declared (conservative) Lipschitz bound for both `f` and `G`.
pub const DECLARED_LIPSCHITZ: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrotorParams {
    /// Central mass, kg.
    pub mass: f64,
    /// Central radius, m.
    pub radius: f64,
    /// Mass of each propeller, kg.
    pub prop_mass: f64,
    /// Arm length, m.
    pub arm_length: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            radius: 0.1,
            prop_mass: DEFAULT_PROP_MASS,
            arm_length: 0.5,
        }
    }
}

impl QuadrotorParams {
    pub fn with_prop_mass(self, prop_mass: f64) -> Self {
        Self { prop_mass, ..self }
    }

    fn sphere(&self) -> f64 {
        2.0 * self.mass * self.radius * self.radius / 5.0
    }

    pub fn jx(&self) -> f64 {
        self.sphere() + 2.0 * self.arm_length * self.arm_length * self.prop_mass
    }

    pub fn jy(&self) -> f64 {
        self.jx()
    }

    pub fn jz(&self) -> f64 {
        self.sphere() + 4.0 * self.arm_length * self.arm_length * self.prop_mass
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.mass, self.radius, self.prop_mass, self.arm_length];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(format!("quadrotor parameters must be positive and finite: {self:?}"));
        }
        Ok(())
    }
}

/// `f(x) = (pi (J_y - J_z)(x_2 + 10) / (2 J_x), pi (J_z - J_x)(x_1 + 15) / (2 J_y))`,
/// `G = diag(1 / J_x, 1 / J_y)`.
pub fn build_quadrotor(params: &QuadrotorParams) -> AffineField {
    let (jx, jy, jz) = (params.jx(), params.jy(), params.jz());
    let kx = std::f64::consts::PI * (jy - jz) / (2.0 * jx);
    let ky = std::f64::consts::PI * (jz - jx) / (2.0 * jy);
    let linear = DMatrix::from_row_slice(2, 2, &[0.0, kx, ky, 0.0]);
    let offset = DVector::from_vec(vec![kx * NOMINAL_RATES[1], ky * NOMINAL_RATES[0]]);
    let actuation = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / jx, 1.0 / jy]));
    AffineField::new(
        offset,
        linear,
        actuation,
        Lipschitz::new(DECLARED_LIPSCHITZ, DECLARED_LIPSCHITZ),
    )
    .expect("quadrotor field is consistent by construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    A,
    B,
    C,
    D,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [ScenarioId::A, ScenarioId::B, ScenarioId::C, ScenarioId::D];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioId::A => "A",
            ScenarioId::B => "B",
            ScenarioId::C => "C",
            ScenarioId::D => "D",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ScenarioId::A),
            "B" => Ok(ScenarioId::B),
            "C" => Ok(ScenarioId::C),
            "D" => Ok(ScenarioId::D),
            other => Err(format!("unknown scenario '{other}' (expected A, B, C or D)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: ScenarioId,
    pub dt: f64,
    pub eps: f64,
    pub k: f64,
    /// Published learning radius.
    pub expected_r: f64,
}

impl Scenario {
    pub fn cycle(&self) -> CycleConfig {
        CycleConfig::new(self.dt, self.eps, self.k, 2).expect("scenario table is valid")
    }
}

pub fn scenarios() -> [Scenario; 4] {
    [
        Scenario {
            id: ScenarioId::A,
            dt: 1e-4,
            eps: 0.005,
            k: 5.0,
            expected_r: 0.18,
        },
        Scenario {
            id: ScenarioId::B,
            dt: 5e-4,
            eps: 0.01,
            k: 6.0,
            expected_r: 1.11,
        },
        Scenario {
            id: ScenarioId::C,
            dt: 8e-4,
            eps: 0.08,
            k: 12.0,
            expected_r: 3.48,
        },
        Scenario {
            id: ScenarioId::D,
            dt: 1.5e-3,
            eps: 0.10,
            k: 40.0,
            expected_r: 18.83,
        },
    ]
}

pub fn scenario(id: ScenarioId) -> Scenario {
    scenarios()[id as usize]
}

/// Proxy of the quadrotor at the origin.
pub fn quadrotor_proxy(params: &QuadrotorParams) -> ProxyParams {
    let field = build_quadrotor(params);
    let local = LocalModel::from_field(&field, &DVector::zeros(2)).expect("2-d field");
    local.proxy().expect("quadrotor actuation is nondegenerate")
}

/// Learning radius of a scenario in both variants, `(raw, drift_subtracted)`.
pub fn scenario_radii(params: &QuadrotorParams, sc: &Scenario) -> (f64, f64) {
    let p = quadrotor_proxy(params);
    (
        p.learning_radius(sc.k, sc.dt, 2, RadiusVariant::Raw),
        p.learning_radius(sc.k, sc.dt, 2, RadiusVariant::DriftSubtracted),
    )
}

/// Unit input at `angle_deg` in the input plane.
pub fn unit_direction(angle_deg: f64) -> DVector<f64> {
    let th = angle_deg.to_radians();
    DVector::from_vec(vec![th.cos(), th.sin()])
}

/// The GRS boundary point reached at `horizon` by the constant proxy input at `angle_deg`.
pub fn boundary_target(proxy: &ProxyParams, angle_deg: f64, horizon: f64) -> ProxyPath {
    proxy.flow(&unit_direction(angle_deg), horizon, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: f64,
    /// `None` picks the recommended variant.
    pub variant: Option<Variant>,
    pub params: QuadrotorParams,
    pub substep_divisor: usize,
    pub max_cycles: Option<usize>,
    pub grs_samples: usize,
    /// Stop the run if the state leaves the proxy domain.
    pub guard: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            variant: None,
            params: QuadrotorParams::default(),
            substep_divisor: DEFAULT_SUBSTEP_DIVISOR,
            max_cycles: None,
            grs_samples: DEFAULT_DIRECTIONS,
            guard: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub angle_deg: f64,
    pub proxy: ProxyParams,
    /// Exact Lipschitz constant of the affine drift, logged next to the declared one.
    pub exact_drift_lipschitz: f64,
    pub boundary: GrsBoundary,
    /// Proxy path to the target under its constant input.
    pub reference: ProxyPath,
    pub result: SynthesisResult,
}

impl ScenarioRun {
    pub fn name(&self) -> String {
        self.scenario.id.to_string()
    }
}

pub fn run_scenario(id: ScenarioId, angle_deg: f64, opts: &RunOptions) -> Result<ScenarioRun, SynthesisError> {
    if opts.substep_divisor == 0 {
        return Err(SynthesisError::InvalidConfig("substep divisor must be >= 1".into()));
    }
    opts.params.validate().map_err(SynthesisError::InvalidConfig)?;
    let sc = scenario(id);
    let field = build_quadrotor(&opts.params);
    let x0 = DVector::zeros(2);
    let local = LocalModel::from_field(&field, &x0)?;
    let proxy = local.proxy()?;
    let boundary = proxy.grs_boundary(opts.horizon, opts.grs_samples)?;
    let reference = boundary_target(&proxy, angle_deg, opts.horizon);
    let target = reference.endpoint().clone();
    let variant = opts.variant.unwrap_or_else(|| Variant::recommended(&proxy));
    let mut cfg = SynthesisConfig::new(target, opts.horizon, variant, sc.cycle());
    if let Some(n) = opts.max_cycles {
        cfg.max_cycles = n;
    }
    let exact_drift_lipschitz = field.exact_drift_lipschitz();
    let mut sim =
        Simulator::new(field, x0.clone(), 0.0, sc.dt / opts.substep_divisor as f64).map_err(LearnerError::from)?;
    if opts.guard {
        sim = sim.with_guard(Guard::new(x0, proxy.domain_radius()));
    }
    let result = run_synthesis(&mut sim, &local, &cfg)?;
    Ok(ScenarioRun {
        scenario: sc,
        angle_deg,
        proxy,
        exact_drift_lipschitz,
        boundary,
        reference,
        result,
    })
}

/// Writes the artifacts of one synthesis run into `dir` and returns their paths.
///
/// `trajectory.csv` (or `scenario.csv` for case-study runs), `control.csv`,
/// `diag.json`, `cycles.jsonl`, plus `grs.csv` and `reference.csv` when given.
pub fn write_run_artifacts(
    dir: &Path,
    name: &str,
    trajectory_file: &str,
    result: &SynthesisResult,
    boundary: Option<&GrsBoundary>,
    reference: Option<&ProxyPath>,
    runtime_s: Option<f64>,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut open = |file: &str| -> io::Result<(PathBuf, BufWriter<File>)> {
        let path = dir.join(file);
        let w = BufWriter::new(File::create(&path)?);
        written.push(path.clone());
        Ok((path, w))
    };

    let (_, mut w) = open(trajectory_file)?;
    result.trajectory.write_csv(&mut w)?;
    w.flush()?;
    let (_, mut w) = open("control.csv")?;
    result.control.write_csv(&mut w)?;
    w.flush()?;
    if let Some(b) = boundary {
        let (_, mut w) = open("grs.csv")?;
        b.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = reference {
        let (_, mut w) = open("reference.csv")?;
        p.trajectory.write_csv(&mut w)?;
        w.flush()?;
    }
    let (_, mut w) = open("diag.json")?;
    serde_json::to_writer_pretty(&mut w, &result.diagnostics_report(name, runtime_s))?;
    writeln!(w)?;
    w.flush()?;
    let (_, mut w) = open("cycles.jsonl")?;
    for entry in &result.cycle_log {
        serde_json::to_writer(&mut w, entry)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(written)
}

impl ScenarioRun {
    pub fn write_artifacts(&self, dir: &Path, runtime_s: Option<f64>) -> io::Result<Vec<PathBuf>> {
        write_run_artifacts(
            dir,
            &self.name(),
            "scenario.csv",
            &self.result,
            Some(&self.boundary),
            Some(&self.reference),
            runtime_s,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlAffineField;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inertias() {
        let p = QuadrotorParams::default();
        assert_abs_diff_eq!(p.jx(), 0.009, epsilon = 1e-15);
        assert_abs_diff_eq!(p.jz(), 0.014, epsilon = 1e-15);
        let lit = p.with_prop_mass(LITERAL_PROP_MASS);
        assert_abs_diff_eq!(lit.jx(), 0.054, epsilon = 1e-15);
    }

    #[test]
    fn field_at_origin() {
        let f = build_quadrotor(&QuadrotorParams::default());
        let x0 = DVector::zeros(2);
        let a = f.drift(&x0);
        assert_abs_diff_eq!(a[0], -8.727, epsilon = 0.01);
        assert_abs_diff_eq!(a[1], 13.090, epsilon = 0.01);
        let g = f.actuation(&x0);
        assert_abs_diff_eq!(g[(0, 0)], 111.11, epsilon = 0.01);
        assert_abs_diff_eq!(g[(1, 1)], 111.11, epsilon = 0.01);
        assert_eq!(g[(0, 1)], 0.0);
        assert!(f.exact_drift_lipschitz() <= DECLARED_LIPSCHITZ);
        assert_abs_diff_eq!(f.exact_drift_lipschitz(), 0.873, epsilon = 0.001);
    }

    #[test]
    fn drift_matches_shifted_rates() {
        let p = QuadrotorParams::default();
        let f = build_quadrotor(&p);
        let x = DVector::from_vec(vec![1.5, -2.0]);
        let (pr, qr) = (x[0] + 15.0, x[1] + 10.0);
        let expected = [
            std::f64::consts::PI * (p.jy() - p.jz()) * qr / (2.0 * p.jx()),
            std::f64::consts::PI * (p.jz() - p.jx()) * pr / (2.0 * p.jy()),
        ];
        let v = f.drift(&x);
        assert_abs_diff_eq!(v[0], expected[0], epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], expected[1], epsilon = 1e-12);
    }

    #[test]
    fn scenario_table() {
        let s = scenarios();
        assert_eq!((s[0].dt, s[0].eps, s[0].k, s[0].expected_r), (1e-4, 0.005, 5.0, 0.18));
        assert_eq!(
            (s[3].dt, s[3].eps, s[3].k, s[3].expected_r),
            (1.5e-3, 0.10, 40.0, 18.83)
        );
        assert!(s.windows(2).all(|w| w[0].dt < w[1].dt));
        assert_eq!(scenario(ScenarioId::C).id, ScenarioId::C);
        assert_eq!("b".parse::<ScenarioId>().unwrap(), ScenarioId::B);
        assert!("E".parse::<ScenarioId>().is_err());
    }

    #[test]
    fn proxy_constants() {
        let p = quadrotor_proxy(&QuadrotorParams::default());
        assert_abs_diff_eq!(p.gain, 111.11, epsilon = 0.01);
        assert_eq!(p.decay, 2.0);
        assert_eq!(p.dim(), 2);
        assert_eq!(Variant::recommended(&p), Variant::Algorithm1);
    }
}
