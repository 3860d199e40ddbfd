//! Python bindings for the `se23nav` crate.
//!
//! The extension module `se23nav_py` exposes the Lie-group kernels, landmark
//! constellations, the continuous geometric observer, gain certification and
//! the TOML-driven experiment runner. Rotations travel as 3×3 nested lists,
//! vectors as 3-element lists; everything stays plain Python types so the
//! module works without numpy.

use nalgebra::{Matrix3, Vector3};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use se23nav::bench::{run_experiment, ExperimentConfig};
use se23nav::geometric::{
    fixed_gain_design, innovations, CertificationVerdict, ContinuousObserver,
};
use se23nav::lie;
use se23nav::scenario::Scenario;
use se23nav::world::{check_observability_conditions, LandmarkSet, DEFAULT_GRAVITY};
use se23nav::{ExtendedPose, GainSet, Rotation};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn mat3_from(rows: [[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

fn mat3_to(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn vec3_from(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn vec3_to(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Rotation exponential: axis-angle vector -> rotation matrix.
#[pyfunction]
fn so3_exp(theta: [f64; 3]) -> [[f64; 3]; 3] {
    mat3_to(lie::exp_so3(&vec3_from(theta)).matrix())
}

/// Rotation logarithm: rotation matrix -> axis-angle vector.
#[pyfunction]
fn so3_log(rotation: [[f64; 3]; 3]) -> PyResult<[f64; 3]> {
    let r = Rotation::from_matrix(mat3_from(rotation)).map_err(value_err)?;
    Ok(vec3_to(&lie::log_so3(&r)))
}

/// Extended-pose exponential: 9-vector (rotation, velocity, position blocks)
/// -> 5x5 homogeneous matrix.
#[pyfunction]
fn se23_exp(xi: [f64; 9]) -> [[f64; 5]; 5] {
    let t = lie::Tangent9::new(
        Vector3::new(xi[0], xi[1], xi[2]),
        Vector3::new(xi[3], xi[4], xi[5]),
        Vector3::new(xi[6], xi[7], xi[8]),
    );
    let m = lie::exp_se23(&t).embed();
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// An extended pose (rotation, velocity, position).
#[pyclass(name = "Pose", skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyPose(ExtendedPose);

#[pymethods]
impl PyPose {
    #[new]
    fn new(rotation: [[f64; 3]; 3], velocity: [f64; 3], position: [f64; 3]) -> PyResult<Self> {
        let rot = Rotation::from_matrix(mat3_from(rotation)).map_err(value_err)?;
        Ok(Self(ExtendedPose::new(rot, vec3_from(velocity), vec3_from(position))))
    }

    #[staticmethod]
    fn identity() -> Self {
        Self(ExtendedPose::identity())
    }

    fn rotation(&self) -> [[f64; 3]; 3] {
        mat3_to(self.0.rot.matrix())
    }

    fn velocity(&self) -> [f64; 3] {
        vec3_to(&self.0.vel)
    }

    fn position(&self) -> [f64; 3] {
        vec3_to(&self.0.pos)
    }

    /// Group composition `self * other`.
    fn compose(&self, other: &PyPose) -> Self {
        Self(self.0 * other.0)
    }

    fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    /// The 5x5 homogeneous embedding.
    fn matrix(&self) -> [[f64; 5]; 5] {
        let m = self.0.embed();
        std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
    }

    fn __repr__(&self) -> String {
        format!(
            "Pose(position={:?}, velocity={:?})",
            vec3_to(&self.0.pos),
            vec3_to(&self.0.vel)
        )
    }
}

/// A weighted landmark constellation.
#[pyclass(name = "Constellation", skip_from_py_object)]
#[derive(Clone)]
struct PyConstellation(LandmarkSet);

#[pymethods]
impl PyConstellation {
    #[new]
    #[pyo3(signature = (positions, weights = None))]
    fn new(positions: Vec<[f64; 3]>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let pos: Vec<_> = positions.iter().map(|p| vec3_from(*p)).collect();
        let n = pos.len();
        let w = weights.unwrap_or_else(|| vec![1.0 / n as f64; n]);
        LandmarkSet::new(pos, w).map(Self).map_err(value_err)
    }

    /// The default regular-tetrahedron constellation (edge length 10).
    #[staticmethod]
    fn tetrahedron() -> Self {
        Self(Scenario::default_landmarks())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Observability report as a dict: collinearity/eigenvalue checks, the
    /// discrete attitude-gain bound and the basin estimate.
    fn observability<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let rep = check_observability_conditions(&self.0);
        let d = PyDict::new(py);
        d.set_item("non_collinear", rep.non_collinear)?;
        d.set_item("distinct_eigenvalues", rep.distinct_eigenvalues)?;
        d.set_item("complement_positive_definite", rep.complement_positive_definite)?;
        d.set_item("kr_bound", rep.kr_bound)?;
        d.set_item("basin_ratio", rep.basin_ratio)?;
        d.set_item("eigenvalues", rep.eigenvalues)?;
        Ok(d)
    }
}

/// The continuous geometric observer with fixed isotropic gains.
#[pyclass(name = "GeometricObserver")]
struct PyGeometricObserver(ContinuousObserver);

#[pymethods]
impl PyGeometricObserver {
    #[new]
    #[pyo3(signature = (initial, kr, kp, kv, gravity = None))]
    fn new(
        initial: &PyPose,
        kr: f64,
        kp: f64,
        kv: f64,
        gravity: Option<[f64; 3]>,
    ) -> PyResult<Self> {
        let gains = GainSet::isotropic(kr, kp, kv).map_err(value_err)?;
        let g = gravity.map_or(DEFAULT_GRAVITY, vec3_from);
        Ok(Self(ContinuousObserver::new(initial.0, gains, g)))
    }

    /// Advances one IMU step, fusing the body-frame landmark observations
    /// held over the step.
    fn step(
        &mut self,
        gyro: [f64; 3],
        accel: [f64; 3],
        body_obs: Vec<[f64; 3]>,
        constellation: &PyConstellation,
        dt: f64,
    ) -> PyResult<()> {
        let obs: Vec<_> = body_obs.iter().map(|y| vec3_from(*y)).collect();
        self.0
            .step(&vec3_from(gyro), &vec3_from(accel), &obs, &constellation.0, dt)
            .map_err(runtime_err)
    }

    fn pose(&self) -> PyPose {
        PyPose(*self.0.est())
    }
}

/// Position/attitude innovations of an estimate against body-frame landmark
/// observations: returns `(sigma_r, y)`.
#[pyfunction]
fn innovation_pair(
    pose: &PyPose,
    body_obs: Vec<[f64; 3]>,
    constellation: &PyConstellation,
) -> PyResult<([f64; 3], [f64; 3])> {
    let obs: Vec<_> = body_obs.iter().map(|y| vec3_from(*y)).collect();
    let inn = innovations(&pose.0, &obs, &constellation.0).map_err(value_err)?;
    Ok((vec3_to(&inn.sigma_r), vec3_to(&inn.y)))
}

/// Certifies fixed translational gains over a landmark-gap range via a
/// sampled Lyapunov decrease condition. Returns `(certified, margin)`.
#[pyfunction]
#[pyo3(signature = (kp, kv, t_min, t_max, grid_size = 101))]
fn certify_gains(
    kp: f64,
    kv: f64,
    t_min: f64,
    t_max: f64,
    grid_size: usize,
) -> PyResult<(bool, f64)> {
    let cert = fixed_gain_design(kp, kv, t_min, t_max, grid_size).map_err(value_err)?;
    Ok((cert.verdict == CertificationVerdict::CertifiedOnGrid, cert.margin))
}

/// Runs a benchmark experiment from TOML configuration text (same schema as
/// the `se23nav` CLI). Writes the configured CSV outputs and returns the
/// per-observer aggregates as a list of dicts.
#[pyfunction]
fn run_config<'py>(py: Python<'py>, text: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::from_str(text).map_err(value_err)?;
    let report = run_experiment(&cfg).map_err(runtime_err)?;
    report
        .aggregates
        .iter()
        .map(|a| {
            let d = PyDict::new(py);
            d.set_item("observer", a.spec.name())?;
            d.set_item("runs", a.runs)?;
            d.set_item("rmse_att_deg", a.rmse_att_deg)?;
            d.set_item("rmse_pos", a.rmse_pos)?;
            d.set_item("rmse_vel", a.rmse_vel)?;
            d.set_item("mean_final_pos", a.mean_final_pos)?;
            d.set_item("p_min", a.p_min)?;
            d.set_item("p_max", a.p_max)?;
            d.set_item("pass", a.pass)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn se23nav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(so3_exp, m)?)?;
    m.add_function(wrap_pyfunction!(so3_log, m)?)?;
    m.add_function(wrap_pyfunction!(se23_exp, m)?)?;
    m.add_function(wrap_pyfunction!(innovation_pair, m)?)?;
    m.add_function(wrap_pyfunction!(certify_gains, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_class::<PyPose>()?;
    m.add_class::<PyConstellation>()?;
    m.add_class::<PyGeometricObserver>()?;
    Ok(())
}
