//! Python bindings, importable as `grsreach`.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::grsreach::casestudy::{self, QuadrotorParams, RunOptions, ScenarioId};
use ::grsreach::config::RunConfig;
use ::grsreach::dynamics::Lipschitz;
use ::grsreach::proxy::{GrsBoundary, ProxyParams, ProxyPath, RadiusVariant, DEFAULT_DIRECTIONS};
use ::grsreach::synthesizer::{SynthesisResult, Variant};
use ::grsreach::verify::{run_suite, Suite, VerifyOptions};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(value_err("matrix must be a non-empty list of equal-length rows"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn parse_variant(v: Option<&str>) -> PyResult<Option<Variant>> {
    v.map(|s| s.parse::<Variant>().map_err(value_err)).transpose()
}

/// Proxy system `x' = a + (b - c|x - x0|) u` with `|u| = 1`.
#[pyclass(name = "Proxy", module = "grsreach", frozen)]
struct PyProxy {
    inner: ProxyParams,
}

#[pymethods]
impl PyProxy {
    /// Derives the proxy from local data `f(x0)`, `G(x0)` and Lipschitz bounds.
    #[new]
    #[pyo3(signature = (f_x0, g_x0, lf, lg, x0 = None))]
    fn new(f_x0: Vec<f64>, g_x0: Vec<Vec<f64>>, lf: f64, lg: f64, x0: Option<Vec<f64>>) -> PyResult<Self> {
        let g = matrix(&g_x0)?;
        let mut inner = ProxyParams::derive(&DVector::from_vec(f_x0), &g, Lipschitz::new(lf, lg)).map_err(value_err)?;
        if let Some(x0) = x0 {
            if x0.len() != inner.dim() {
                return Err(value_err(format!(
                    "x0 has length {}, expected {}",
                    x0.len(),
                    inner.dim()
                )));
            }
            inner = inner.with_origin(DVector::from_vec(x0));
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (prop_mass = casestudy::DEFAULT_PROP_MASS))]
    fn quadrotor(prop_mass: f64) -> PyResult<Self> {
        let params = QuadrotorParams::default().with_prop_mass(prop_mass);
        params.validate().map_err(value_err)?;
        Ok(Self {
            inner: casestudy::quadrotor_proxy(&params),
        })
    }

    #[getter]
    fn drift(&self) -> Vec<f64> {
        vec_of(&self.inner.drift)
    }

    #[getter]
    fn gain(&self) -> f64 {
        self.inner.gain
    }

    #[getter]
    fn decay(&self) -> f64 {
        self.inner.decay
    }

    #[getter]
    fn origin(&self) -> Vec<f64> {
        vec_of(&self.inner.origin)
    }

    #[getter]
    fn domain_radius(&self) -> f64 {
        self.inner.domain_radius()
    }

    #[getter]
    fn image_rank(&self) -> usize {
        self.inner.image_rank()
    }

    /// Endpoint of the flow under the constant unit input `u`, and whether it hit the domain edge.
    fn endpoint(&self, u: Vec<f64>, horizon: f64) -> PyResult<(Vec<f64>, bool)> {
        if u.len() != self.inner.dim() {
            return Err(value_err(format!(
                "u has length {}, expected {}",
                u.len(),
                self.inner.dim()
            )));
        }
        let path = self.inner.flow(&DVector::from_vec(u), horizon, None);
        Ok((vec_of(path.endpoint()), path.clamped))
    }

    /// Boundary samples of the reachable set at `horizon` as `(label, point)` pairs.
    #[pyo3(signature = (horizon, samples = DEFAULT_DIRECTIONS))]
    fn grs_boundary(&self, horizon: f64, samples: usize) -> PyResult<Vec<(f64, Vec<f64>)>> {
        let b = self.inner.grs_boundary(horizon, samples).map_err(value_err)?;
        Ok(b.points.iter().map(|p| (p.label, vec_of(&p.endpoint))).collect())
    }

    #[pyo3(signature = (k, dt, m, drift_subtracted = false))]
    fn learning_radius(&self, k: f64, dt: f64, m: usize, drift_subtracted: bool) -> f64 {
        let v = if drift_subtracted {
            RadiusVariant::DriftSubtracted
        } else {
            RadiusVariant::Raw
        };
        self.inner.learning_radius(k, dt, m, v)
    }

    fn __repr__(&self) -> String {
        format!(
            "Proxy(a={:?}, b={}, c={})",
            self.drift(),
            self.inner.gain,
            self.inner.decay
        )
    }
}

/// Outcome of one synthesis run.
#[pyclass(name = "Run", module = "grsreach", frozen)]
struct PyRun {
    name: String,
    trajectory_file: &'static str,
    result: SynthesisResult,
    boundary: GrsBoundary,
    reference: Option<ProxyPath>,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn variant(&self) -> &'static str {
        self.result.variant.as_str()
    }

    #[getter]
    fn termination(&self) -> &'static str {
        self.result.termination.as_str()
    }

    #[getter]
    fn success(&self) -> bool {
        self.result.termination.is_success()
    }

    #[getter]
    fn message(&self) -> Option<String> {
        self.result.message.clone()
    }

    #[getter]
    fn final_error(&self) -> f64 {
        self.result.final_error
    }

    #[getter]
    fn final_state(&self) -> Vec<f64> {
        vec_of(&self.result.final_state)
    }

    #[getter]
    fn target(&self) -> Vec<f64> {
        vec_of(&self.result.target)
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.result.radius
    }

    #[getter]
    fn cycles(&self) -> usize {
        self.result.cycles()
    }

    #[getter]
    fn gamma(&self) -> Option<f64> {
        self.result.gamma
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.result.trajectory.times.clone()
    }

    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        self.result.trajectory.states.iter().map(vec_of).collect()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.result.theta_series()
    }

    /// Whether the bound condition held on each cycle.
    #[getter]
    fn condition(&self) -> Vec<bool> {
        self.result.diagnostics.iter().map(|d| d.condition.holds).collect()
    }

    /// `(lateral, hausdorff)` distance of the trajectory from the straight reference segment.
    fn reference_deviation(&self) -> (f64, f64) {
        let d = self.result.reference_deviation();
        (d.lateral, d.hausdorff)
    }

    /// Writes the CSV/JSON artifacts into `dir` and returns their paths.
    #[pyo3(signature = (dir, runtime_s = None))]
    fn write_artifacts(&self, dir: PathBuf, runtime_s: Option<f64>) -> PyResult<Vec<String>> {
        let paths = casestudy::write_run_artifacts(
            &dir,
            &self.name,
            self.trajectory_file,
            &self.result,
            Some(&self.boundary),
            self.reference.as_ref(),
            runtime_s,
        )
        .map_err(|e| PyIOError::new_err(format!("{}: {e}", dir.display())))?;
        Ok(paths.into_iter().map(|p| p.display().to_string()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Run({}, {}, cycles={}, termination={}, final_error={})",
            self.name,
            self.variant(),
            self.cycles(),
            self.termination(),
            self.result.final_error
        )
    }
}

/// Quadrotor inertias and proxy constants.
#[pyfunction]
#[pyo3(signature = (prop_mass = casestudy::DEFAULT_PROP_MASS))]
fn quadrotor_constants(py: Python<'_>, prop_mass: f64) -> PyResult<Bound<'_, PyDict>> {
    let params = QuadrotorParams::default().with_prop_mass(prop_mass);
    params.validate().map_err(value_err)?;
    let proxy = casestudy::quadrotor_proxy(&params);
    let d = PyDict::new(py);
    d.set_item("jx", params.jx())?;
    d.set_item("jz", params.jz())?;
    d.set_item("a", vec_of(&proxy.drift))?;
    d.set_item("b", proxy.gain)?;
    d.set_item("c", proxy.decay)?;
    Ok(d)
}

/// Cycle parameters of a named scenario.
#[pyfunction]
fn scenario<'py>(py: Python<'py>, id: &str) -> PyResult<Bound<'py, PyDict>> {
    let id: ScenarioId = id.parse().map_err(value_err)?;
    let sc = casestudy::scenario(id);
    let d = PyDict::new(py);
    d.set_item("id", id.as_str())?;
    d.set_item("dt", sc.dt)?;
    d.set_item("eps", sc.eps)?;
    d.set_item("k", sc.k)?;
    d.set_item("expected_r", sc.expected_r)?;
    Ok(d)
}

/// Runs a quadrotor scenario towards the boundary point at `angle` degrees.
#[pyfunction]
#[pyo3(signature = (id, angle = casestudy::DEFAULT_ANGLES[0], variant = None, horizon = casestudy::DEFAULT_HORIZON, prop_mass = casestudy::DEFAULT_PROP_MASS, max_cycles = None))]
fn run_scenario(
    py: Python<'_>,
    id: &str,
    angle: f64,
    variant: Option<&str>,
    horizon: f64,
    prop_mass: f64,
    max_cycles: Option<usize>,
) -> PyResult<PyRun> {
    let id: ScenarioId = id.parse().map_err(value_err)?;
    let opts = RunOptions {
        horizon,
        variant: parse_variant(variant)?,
        params: QuadrotorParams::default().with_prop_mass(prop_mass),
        max_cycles,
        ..RunOptions::default()
    };
    let run = py
        .detach(|| casestudy::run_scenario(id, angle, &opts))
        .map_err(value_err)?;
    Ok(PyRun {
        name: run.name(),
        trajectory_file: "scenario.csv",
        result: run.result,
        boundary: run.boundary,
        reference: Some(run.reference),
    })
}

/// Runs a flat `key = value` configuration file.
#[pyfunction]
fn run_config(py: Python<'_>, path: PathBuf) -> PyResult<PyRun> {
    let cfg = RunConfig::load(&path).map_err(value_err)?;
    let run = py.detach(|| cfg.run()).map_err(value_err)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "config".into());
    Ok(PyRun {
        name,
        trajectory_file: "trajectory.csv",
        result: run.result,
        boundary: run.boundary,
        reference: run.reference,
    })
}

/// Runs a property suite and returns one dict per check.
#[pyfunction]
#[pyo3(signature = (suite = "all", tolerance_scale = 1.0))]
fn verify<'py>(py: Python<'py>, suite: &str, tolerance_scale: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let suite: Suite = suite.parse().map_err(value_err)?;
    let outcomes = py.detach(|| run_suite(suite, &VerifyOptions { tolerance_scale }));
    outcomes
        .into_iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("suite", c.suite)?;
            d.set_item("name", c.name)?;
            d.set_item("passed", c.passed)?;
            d.set_item("value", c.value)?;
            d.set_item("tolerance", c.tolerance)?;
            d.set_item("detail", c.detail)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "grsreach")]
fn grsreach_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProxy>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(quadrotor_constants, m)?)?;
    m.add_function(wrap_pyfunction!(scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add(
        "SCENARIOS",
        ScenarioId::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
    )?;
    Ok(())
}
