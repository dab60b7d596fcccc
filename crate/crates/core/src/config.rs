//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Vectors are comma separated (`x0 = 0, 0`); matrices separate rows with `;`
//! (`g_const = 1, 0; 0, 1`). Unknown keys and non-finite numbers are rejected.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `system` | `quadrotor` | `quadrotor` or `affine` |
//! | `scenario` | none | `A`..`D`, supplies `dt`, `eps`, `k` |
//! | `m_prop` | 0.01 | quadrotor propeller mass |
//! | `d`, `m` | required for `affine` | state and input dimension |
//! | `f_offset`, `f_linear`, `g_const` | required for `affine` | `f(x) = f_offset + f_linear x`, `G = g_const` |
//! | `lf`, `lg` | 1, 1 for the quadrotor; required for `affine` | Lipschitz bounds |
//! | `x0` | origin | base point |
//! | `f_x0`, `g_x0` | evaluated at `x0` | local data handed to the synthesizer |
//! | `dt`, `eps`, `k` | from `scenario` | cycle parameters |
//! | `T` | 0.25 | horizon |
//! | `variant` | recommended | `algorithm1` or `algorithm2` |
//! | `angle` | 30 | target direction in degrees (rank-2 input image) |
//! | `y` | none | explicit target, overrides `angle` |
//! | `max_cycles` | 20000 | cycle cap |
//! | `out_dir` | none | output directory |
//! | `substep_divisor` | 20 | RK4 sub-steps per `dt` |
//! | `samples` | 360 | GRS boundary directions |
//! | `guard` | true | stop when leaving the proxy domain |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::casestudy::{
    build_quadrotor, scenario, QuadrotorParams, ScenarioId, DEFAULT_HORIZON, DEFAULT_PROP_MASS, DEFAULT_SUBSTEP_DIVISOR,
};
use crate::dynamics::{AffineField, ControlAffineField, Guard, Lipschitz};
use crate::learner::CycleConfig;
use crate::plant::Simulator;
use crate::proxy::{GrsBoundary, ProxyError, ProxyParams, ProxyPath, DEFAULT_DIRECTIONS};
use crate::synthesizer::{
    run_synthesis, LocalModel, SynthesisConfig, SynthesisError, SynthesisResult, Variant, DEFAULT_MAX_CYCLES,
};

const KEYS: &[&str] = &[
    "system",
    "scenario",
    "m_prop",
    "d",
    "m",
    "f_offset",
    "f_linear",
    "g_const",
    "lf",
    "lg",
    "x0",
    "f_x0",
    "g_x0",
    "dt",
    "eps",
    "k",
    "T",
    "variant",
    "angle",
    "y",
    "max_cycles",
    "out_dir",
    "substep_divisor",
    "samples",
    "guard",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid value for '{key}': {msg}")]
    Value { key: String, msg: String },
    #[error("missing required key '{0}'")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Quadrotor,
    Affine,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Angle(f64),
    Point(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemKind,
    pub scenario: Option<ScenarioId>,
    pub m_prop: f64,
    pub d: Option<usize>,
    pub m: Option<usize>,
    pub f_offset: Option<DVector<f64>>,
    pub f_linear: Option<Vec<Vec<f64>>>,
    pub g_const: Option<Vec<Vec<f64>>>,
    pub lf: Option<f64>,
    pub lg: Option<f64>,
    pub x0: Option<DVector<f64>>,
    pub f_x0: Option<DVector<f64>>,
    pub g_x0: Option<Vec<Vec<f64>>>,
    pub dt: Option<f64>,
    pub eps: Option<f64>,
    pub k: Option<f64>,
    pub horizon: f64,
    pub variant: Option<Variant>,
    pub target: TargetSpec,
    pub max_cycles: usize,
    pub out_dir: Option<PathBuf>,
    pub substep_divisor: usize,
    pub samples: usize,
    pub guard: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Quadrotor,
            scenario: None,
            m_prop: DEFAULT_PROP_MASS,
            d: None,
            m: None,
            f_offset: None,
            f_linear: None,
            g_const: None,
            lf: None,
            lg: None,
            x0: None,
            f_x0: None,
            g_x0: None,
            dt: None,
            eps: None,
            k: None,
            horizon: DEFAULT_HORIZON,
            variant: None,
            target: TargetSpec::Angle(30.0),
            max_cycles: DEFAULT_MAX_CYCLES,
            out_dir: None,
            substep_divisor: DEFAULT_SUBSTEP_DIVISOR,
            samples: DEFAULT_DIRECTIONS,
            guard: true,
        }
    }
}

fn value_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, ConfigError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| value_err(key, format!("'{}' is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(value_err(key, "must be finite"));
    }
    Ok(v)
}

fn parse_usize(key: &str, s: &str) -> Result<usize, ConfigError> {
    s.trim()
        .parse()
        .map_err(|_| value_err(key, format!("'{}' is not a nonnegative integer", s.trim())))
}

fn parse_vec(key: &str, s: &str) -> Result<DVector<f64>, ConfigError> {
    let xs = s.split(',').map(|p| parse_f64(key, p)).collect::<Result<Vec<_>, _>>()?;
    Ok(DVector::from_vec(xs))
}

fn parse_rows(key: &str, s: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    let rows = s
        .split(';')
        .map(|row| row.split(',').map(|p| parse_f64(key, p)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(value_err(key, "rows have different lengths"));
    }
    Ok(rows)
}

fn parse_bool(key: &str, s: &str) -> Result<bool, ConfigError> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(value_err(key, format!("'{other}' is not a boolean"))),
    }
}

fn to_matrix(key: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>, ConfigError> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(value_err(key, format!("expected a {nrows}x{ncols} matrix")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("empty value for '{key}'"),
                });
            }
            if seen.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
        }

        let mut cfg = RunConfig::default();
        for (key, value) in &seen {
            let key = key.as_str();
            let v = value.as_str();
            match key {
                "system" => {
                    cfg.system = match v {
                        "quadrotor" => SystemKind::Quadrotor,
                        "affine" => SystemKind::Affine,
                        other => return Err(value_err(key, format!("unknown system '{other}'"))),
                    }
                }
                "scenario" => cfg.scenario = Some(v.parse().map_err(|e: String| value_err(key, e))?),
                "m_prop" => cfg.m_prop = parse_f64(key, v)?,
                "d" => cfg.d = Some(parse_usize(key, v)?),
                "m" => cfg.m = Some(parse_usize(key, v)?),
                "f_offset" => cfg.f_offset = Some(parse_vec(key, v)?),
                "f_linear" => cfg.f_linear = Some(parse_rows(key, v)?),
                "g_const" => cfg.g_const = Some(parse_rows(key, v)?),
                "lf" => cfg.lf = Some(parse_f64(key, v)?),
                "lg" => cfg.lg = Some(parse_f64(key, v)?),
                "x0" => cfg.x0 = Some(parse_vec(key, v)?),
                "f_x0" => cfg.f_x0 = Some(parse_vec(key, v)?),
                "g_x0" => cfg.g_x0 = Some(parse_rows(key, v)?),
                "dt" => cfg.dt = Some(parse_f64(key, v)?),
                "eps" => cfg.eps = Some(parse_f64(key, v)?),
                "k" => cfg.k = Some(parse_f64(key, v)?),
                "T" => cfg.horizon = parse_f64(key, v)?,
                "variant" => cfg.variant = Some(v.parse().map_err(|e: String| value_err(key, e))?),
                "angle" => {
                    if !seen.contains_key("y") {
                        cfg.target = TargetSpec::Angle(parse_f64(key, v)?);
                    }
                }
                "y" => cfg.target = TargetSpec::Point(parse_vec(key, v)?),
                "max_cycles" => cfg.max_cycles = parse_usize(key, v)?,
                "out_dir" => cfg.out_dir = Some(PathBuf::from(v)),
                "substep_divisor" => cfg.substep_divisor = parse_usize(key, v)?,
                "samples" => cfg.samples = parse_usize(key, v)?,
                "guard" => cfg.guard = parse_bool(key, v)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        if cfg.horizon < 0.0 {
            return Err(value_err("T", "must be >= 0"));
        }
        if cfg.max_cycles == 0 {
            return Err(value_err("max_cycles", "must be >= 1"));
        }
        if cfg.substep_divisor == 0 {
            return Err(value_err("substep_divisor", "must be >= 1"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn field(&self) -> Result<AffineField, ConfigError> {
        match self.system {
            SystemKind::Quadrotor => {
                let params = QuadrotorParams::default().with_prop_mass(self.m_prop);
                params.validate().map_err(|e| value_err("m_prop", e))?;
                let mut field = build_quadrotor(&params);
                field.lipschitz = Lipschitz::new(
                    self.lf.unwrap_or(field.lipschitz.drift),
                    self.lg.unwrap_or(field.lipschitz.actuation),
                );
                Ok(field)
            }
            SystemKind::Affine => {
                let d = self.d.ok_or_else(|| ConfigError::Missing("d".into()))?;
                let m = self.m.ok_or_else(|| ConfigError::Missing("m".into()))?;
                if d == 0 || m == 0 {
                    return Err(ConfigError::Invalid("d and m must be >= 1".into()));
                }
                let offset = self.f_offset.clone().unwrap_or_else(|| DVector::zeros(d));
                let linear = match &self.f_linear {
                    Some(rows) => to_matrix("f_linear", rows, d, d)?,
                    None => DMatrix::zeros(d, d),
                };
                let g = to_matrix(
                    "g_const",
                    self.g_const
                        .as_ref()
                        .ok_or_else(|| ConfigError::Missing("g_const".into()))?,
                    d,
                    m,
                )?;
                let lf = self.lf.ok_or_else(|| ConfigError::Missing("lf".into()))?;
                let lg = self.lg.ok_or_else(|| ConfigError::Missing("lg".into()))?;
                AffineField::new(offset, linear, g, Lipschitz::new(lf, lg))
                    .map_err(|e| ConfigError::Invalid(e.to_string()))
            }
        }
    }

    pub fn x0(&self, d: usize) -> Result<DVector<f64>, ConfigError> {
        match &self.x0 {
            Some(x) if x.len() != d => Err(value_err("x0", format!("expected {d} components"))),
            Some(x) => Ok(x.clone()),
            None => Ok(DVector::zeros(d)),
        }
    }

    /// Local data at `x0`, evaluated from the field unless given explicitly.
    pub fn local_model(&self, field: &AffineField) -> Result<LocalModel, ConfigError> {
        let (d, m) = (field.state_dim(), field.input_dim());
        let x0 = self.x0(d)?;
        let mut local = LocalModel::from_field(field, &x0).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(f) = &self.f_x0 {
            if f.len() != d {
                return Err(value_err("f_x0", format!("expected {d} components")));
            }
            local.f_x0 = f.clone();
        }
        if let Some(rows) = &self.g_x0 {
            local.g_x0 = to_matrix("g_x0", rows, d, m)?;
        }
        Ok(local)
    }

    pub fn cycle(&self, m: usize) -> Result<CycleConfig, ConfigError> {
        let sc = self.scenario.map(scenario);
        let pick = |key: &str, v: Option<f64>, fallback: Option<f64>| {
            v.or(fallback).ok_or_else(|| ConfigError::Missing(key.to_string()))
        };
        let dt = pick("dt", self.dt, sc.map(|s| s.dt))?;
        let eps = pick("eps", self.eps, sc.map(|s| s.eps))?;
        let k = pick("k", self.k, sc.map(|s| s.k))?;
        CycleConfig::new(dt, eps, k, m).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Unit proxy input selected by the target spec, when it is an angle.
    pub fn angle_input(&self, proxy: &ProxyParams, angle_deg: f64) -> Result<DVector<f64>, ConfigError> {
        if proxy.image_rank() != 2 {
            return Err(value_err(
                "angle",
                format!(
                    "angle targets need a rank-2 input image, got rank {}; give 'y' instead",
                    proxy.image_rank()
                ),
            ));
        }
        let th = angle_deg.to_radians();
        Ok(proxy.image_basis.column(0) * th.cos() + proxy.image_basis.column(1) * th.sin())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

/// A configured system ready to run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub field: AffineField,
    pub local: LocalModel,
    pub proxy: ProxyParams,
}

#[derive(Debug, Clone)]
pub struct ConfiguredRun {
    pub proxy: ProxyParams,
    pub boundary: GrsBoundary,
    /// Proxy path to the target, when the target has a boundary control.
    pub reference: Option<ProxyPath>,
    pub result: SynthesisResult,
}

impl RunConfig {
    pub fn setup(&self) -> Result<Setup, RunError> {
        let field = self.field()?;
        let local = self.local_model(&field)?;
        let proxy = local.proxy()?;
        Ok(Setup { field, local, proxy })
    }

    /// Target point and, when it exists, the proxy path reaching it at `T`.
    pub fn resolve_target(&self, proxy: &ProxyParams) -> Result<(DVector<f64>, Option<ProxyPath>), RunError> {
        match &self.target {
            TargetSpec::Angle(deg) => {
                let path = proxy.flow(&self.angle_input(proxy, *deg)?, self.horizon, None);
                Ok((path.endpoint().clone(), Some(path)))
            }
            TargetSpec::Point(y) => {
                if y.len() != proxy.dim() {
                    return Err(value_err("y", format!("expected {} components", proxy.dim())).into());
                }
                let path = proxy
                    .unique_boundary_control(y, self.horizon)
                    .ok()
                    .map(|u| proxy.flow(&u, self.horizon, None));
                Ok((y.clone(), path))
            }
        }
    }

    pub fn run(&self) -> Result<ConfiguredRun, RunError> {
        let Setup { field, local, proxy } = self.setup()?;
        let cycle = self.cycle(field.input_dim())?;
        let boundary = proxy.grs_boundary(self.horizon, self.samples)?;
        let (target, reference) = self.resolve_target(&proxy)?;
        let variant = self.variant.unwrap_or_else(|| Variant::recommended(&proxy));
        let mut cfg = SynthesisConfig::new(target, self.horizon, variant, cycle);
        cfg.max_cycles = self.max_cycles;
        let x0 = local.x0.clone();
        let mut sim = Simulator::new(field, x0.clone(), 0.0, cycle.dt / self.substep_divisor as f64)
            .map_err(SynthesisError::from)?;
        if self.guard {
            sim = sim.with_guard(Guard::new(x0, proxy.domain_radius()));
        }
        let result = run_synthesis(&mut sim, &local, &cfg)?;
        Ok(ConfiguredRun {
            proxy,
            boundary,
            reference,
            result,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_quadrotor_scenario() {
        let cfg = RunConfig::parse("# demo\nscenario = B\nangle = 120 # deg\nvariant = algorithm2\n").unwrap();
        assert_eq!(cfg.system, SystemKind::Quadrotor);
        assert_eq!(cfg.target, TargetSpec::Angle(120.0));
        assert_eq!(cfg.variant, Some(Variant::Algorithm2));
        let c = cfg.cycle(2).unwrap();
        assert_eq!((c.dt, c.eps, c.k), (5e-4, 0.01, 6.0));
    }

    #[test]
    fn parses_affine_system() {
        let text = "system = affine\nd = 2\nm = 2\nf_linear = 0, 1; -1, 0\ng_const = 1, 0; 0, 2\nlf = 1\nlg = 0.5\ny = 0.1, 0\ndt = 0.001\neps = 0.1\nk = 2\n";
        let cfg = RunConfig::parse(text).unwrap();
        let f = cfg.field().unwrap();
        assert_eq!(f.actuation[(1, 1)], 2.0);
        assert_eq!(f.linear[(1, 0)], -1.0);
        assert_eq!(cfg.target, TargetSpec::Point(DVector::from_vec(vec![0.1, 0.0])));
        let local = cfg.local_model(&f).unwrap();
        assert_eq!(local.lipschitz, Lipschitz::new(1.0, 0.5));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            RunConfig::parse("colour = red"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(RunConfig::parse("dt = inf"), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::parse("dt = nan"), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::parse("just text"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(
            RunConfig::parse("dt = 1\ndt = 2"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            RunConfig::parse("g_const = 1, 0; 1"),
            Err(ConfigError::Value { .. })
        ));
        assert!(matches!(
            RunConfig::parse("").unwrap().cycle(2),
            Err(ConfigError::Missing(_))
        ));
    }

    #[test]
    fn explicit_target_wins_over_angle() {
        let cfg = RunConfig::parse("y = 1, 2\nangle = 45").unwrap();
        assert_eq!(cfg.target, TargetSpec::Point(DVector::from_vec(vec![1.0, 2.0])));
    }
}
