//! Python bindings for the reflecting-surface simulator.
//!
//! Angles cross the boundary in degrees, positions as `(x, y, z)` tuples in
//! metres and fields as Python `complex` values.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use irs_core::geometry::fresnel_bounds;
use irs_core::modulation::{self, FramePlan, ReceiverSpec};
use irs_core::propagation::{self, ElementPattern};
use irs_core::scenario::{self, ConfigError};
use irs_core::synthesis::{self, SteeringSpec};
use irs_core::timevarying;
use irs_core::{IrsError, ObservationGrid};

type Xyz = (f64, f64, f64);

fn err(e: IrsError) -> PyErr {
    match e {
        IrsError::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn point(p: Xyz) -> irs_core::Point3 {
    irs_core::Point3::new(p.0, p.1, p.2)
}

fn xyz(p: irs_core::Point3) -> Xyz {
    (p.x, p.y, p.z)
}

fn direction(theta_deg: f64, phi_deg: f64) -> PyResult<irs_core::DirectionAngles> {
    irs_core::DirectionAngles::from_degrees(theta_deg, phi_deg).map_err(err)
}

#[pyclass(name = "PropagationContext", frozen, from_py_object)]
#[derive(Clone)]
struct PyContext(irs_core::PropagationContext);

#[pymethods]
impl PyContext {
    #[new]
    #[pyo3(signature = (frequency, wave_speed = irs_core::SPEED_OF_LIGHT))]
    fn new(frequency: f64, wave_speed: f64) -> PyResult<Self> {
        irs_core::PropagationContext::new(frequency, wave_speed)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn frequency(&self) -> f64 {
        self.0.frequency()
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.0.wavelength()
    }

    #[getter]
    fn wavenumber(&self) -> f64 {
        self.0.wavenumber()
    }

    fn __repr__(&self) -> String {
        format!("PropagationContext(frequency={})", self.0.frequency())
    }
}

#[pyclass(name = "ApertureGrid", frozen, from_py_object)]
#[derive(Clone)]
struct PyAperture(irs_core::ApertureGrid);

#[pymethods]
impl PyAperture {
    #[new]
    fn new(count_x: usize, count_y: usize, spacing_x: f64, spacing_y: f64) -> PyResult<Self> {
        irs_core::ApertureGrid::new(count_x, count_y, spacing_x, spacing_y)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn square(count: usize, spacing: f64) -> PyResult<Self> {
        irs_core::ApertureGrid::square(count, spacing)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn count_x(&self) -> usize {
        self.0.count_x()
    }

    #[getter]
    fn count_y(&self) -> usize {
        self.0.count_y()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Element centres in row-major order (x fastest).
    fn positions(&self) -> Vec<Xyz> {
        self.0.element_positions().into_iter().map(xyz).collect()
    }

    fn aperture_size(&self) -> f64 {
        self.0.aperture_size()
    }

    /// `(lower, upper)` radiative near-field limits in metres.
    fn fresnel_bounds(&self, ctx: &PyContext) -> PyResult<(f64, f64)> {
        let b = fresnel_bounds(&self.0, &ctx.0).map_err(err)?;
        Ok((b.lower, b.upper))
    }

    fn __repr__(&self) -> String {
        format!(
            "ApertureGrid({}x{}, spacing=({}, {}))",
            self.0.count_x(),
            self.0.count_y(),
            self.0.spacing_x(),
            self.0.spacing_y()
        )
    }
}

#[pyclass(name = "SourceModel", frozen, from_py_object)]
#[derive(Clone)]
struct PySource(irs_core::SourceModel);

#[pymethods]
impl PySource {
    #[staticmethod]
    fn point(position: Xyz) -> Self {
        Self(irs_core::SourceModel::point(point(position)))
    }

    /// Unit source at `distance` along `(theta_deg, phi_deg)` from the origin.
    #[staticmethod]
    fn from_incidence(theta_deg: f64, phi_deg: f64, distance: f64) -> PyResult<Self> {
        irs_core::SourceModel::from_incidence(
            direction(theta_deg, phi_deg)?,
            distance,
            irs_core::Point3::ORIGIN,
        )
        .map(Self)
        .map_err(err)
    }

    fn positions(&self) -> Vec<Xyz> {
        self.0.positions().into_iter().map(xyz).collect()
    }
}

#[pyclass(name = "PhaseProfile", frozen, from_py_object)]
#[derive(Clone)]
struct PyProfile(irs_core::PhaseProfile);

#[pymethods]
impl PyProfile {
    #[new]
    fn new(phases: Vec<f64>) -> PyResult<Self> {
        irs_core::PhaseProfile::new(phases).map(Self).map_err(err)
    }

    #[getter]
    fn phases(&self) -> Vec<f64> {
        self.0.phases().to_vec()
    }

    #[getter]
    fn quantization_bits(&self) -> Option<u32> {
        self.0.quantization_bits()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn quantized(&self, bits: u32) -> PyResult<Self> {
        synthesis::quantize_profile(&self.0, bits)
            .map(Self)
            .map_err(err)
    }

    fn to_text(&self, count_x: usize) -> PyResult<String> {
        self.0.to_text_matrix(count_x).map_err(err)
    }
}

fn incident(
    aperture: &PyAperture,
    source: &PySource,
    ctx: &PyContext,
) -> PyResult<irs_core::ComplexField> {
    irs_core::incident_on_aperture(&source.0, &aperture.0, &ctx.0).map_err(err)
}

#[pyfunction]
fn steering_profile(
    aperture: &PyAperture,
    source: &PySource,
    theta_deg: f64,
    phi_deg: f64,
    ctx: &PyContext,
) -> PyResult<PyProfile> {
    let reference = incident(aperture, source, ctx)?;
    let spec = SteeringSpec {
        direction: direction(theta_deg, phi_deg)?,
    };
    synthesis::steering_profile(&aperture.0, &reference, &spec, &ctx.0)
        .map(PyProfile)
        .map_err(err)
}

#[pyfunction]
fn focusing_profile(
    aperture: &PyAperture,
    source: &PySource,
    focal_point: Xyz,
    ctx: &PyContext,
) -> PyResult<PyProfile> {
    let reference = incident(aperture, source, ctx)?;
    let spec =
        irs_core::FocalSpec::from_point(point(focal_point), aperture.0.origin()).map_err(err)?;
    synthesis::focusing_profile(&aperture.0, &reference, &spec, &ctx.0)
        .map(PyProfile)
        .map_err(err)
}

#[pyfunction]
fn randomized_profile(aperture: &PyAperture, seed: u64) -> PyProfile {
    PyProfile(synthesis::randomized_profile(&aperture.0, seed))
}

/// Reflected field at arbitrary points.
#[pyfunction]
fn field_at(
    aperture: &PyAperture,
    source: &PySource,
    profile: &PyProfile,
    points: Vec<Xyz>,
    ctx: &PyContext,
) -> PyResult<Vec<Complex64>> {
    let reference = incident(aperture, source, ctx)?;
    let grid = ObservationGrid::points(points.into_iter().map(point).collect()).map_err(err)?;
    let field = propagation::reflect_and_radiate(
        &aperture.0,
        &reference,
        &profile.0,
        &grid,
        &ctx.0,
        &ElementPattern::Isotropic,
    )
    .map_err(err)?;
    Ok(field.values().to_vec())
}

/// Far-field pattern over a theta-major `(theta, phi)` lattice in degrees.
#[pyfunction]
fn far_field_pattern(
    aperture: &PyAperture,
    source: &PySource,
    profile: &PyProfile,
    thetas_deg: Vec<f64>,
    phis_deg: Vec<f64>,
    ctx: &PyContext,
) -> PyResult<Vec<Complex64>> {
    let reference = incident(aperture, source, ctx)?;
    let grid = ObservationGrid::angular(
        thetas_deg.into_iter().map(f64::to_radians).collect(),
        phis_deg.into_iter().map(f64::to_radians).collect(),
        None,
    )
    .map_err(err)?;
    let field = propagation::reflect_and_radiate(
        &aperture.0,
        &reference,
        &profile.0,
        &grid,
        &ctx.0,
        &ElementPattern::Isotropic,
    )
    .map_err(err)?;
    Ok(field.values().to_vec())
}

/// `(range, dB)` pairs along broadside, normalized to their maximum.
#[pyfunction]
fn depth_profile(
    aperture: &PyAperture,
    source: &PySource,
    profile: &PyProfile,
    ranges: Vec<f64>,
    ctx: &PyContext,
) -> PyResult<Vec<(f64, f64)>> {
    modulation::depth_profile(&aperture.0, &source.0, &profile.0, &ranges, &ctx.0).map_err(err)
}

/// Runs a focus/defocus link and returns its report as a dict.
#[pyfunction]
#[pyo3(signature = (aperture, source, receiver, bits, seed, ctx, threshold_db = modulation::DEFAULT_THRESHOLD_DB))]
#[allow(clippy::too_many_arguments)]
fn run_link<'py>(
    py: Python<'py>,
    aperture: &PyAperture,
    source: &PySource,
    receiver: Xyz,
    bits: Vec<bool>,
    seed: u64,
    ctx: &PyContext,
    threshold_db: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let rx = ReceiverSpec::new(point(receiver), threshold_db).map_err(err)?;
    let plan = FramePlan::new(bits, seed).map_err(err)?;
    let report = modulation::run_link(&aperture.0, &source.0, &rx, &plan, &ctx.0).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item(
        "magnitude_db",
        report
            .frames
            .iter()
            .map(|f| f.magnitude_db)
            .collect::<Vec<_>>(),
    )?;
    d.set_item("decoded", report.decoded_bits())?;
    d.set_item("bit_errors", report.bit_errors)?;
    d.set_item("contrast_db", modulation::contrast(&report).ok())?;
    d.set_item("median_contrast_db", report.median_contrast_db)?;
    d.set_item("warnings", report.warnings.clone())?;
    Ok(d)
}

#[pyfunction]
fn square_wave_coefficient(k: i32, mod_frequency: f64, delay: f64) -> Complex64 {
    timevarying::square_wave_coefficient(k, mod_frequency, delay)
}

/// Per-lattice delays that steer harmonic `k` to `(theta_deg, phi_deg)`.
#[pyfunction]
fn steering_delays(
    aperture: &PyAperture,
    theta_deg: f64,
    phi_deg: f64,
    k: i32,
    ctx: &PyContext,
    mod_frequency: f64,
) -> PyResult<Vec<f64>> {
    timevarying::steering_delays(
        &aperture.0,
        direction(theta_deg, phi_deg)?,
        k,
        &ctx.0,
        mod_frequency,
    )
    .map_err(err)
}

/// Harmonic-`k` far-field pattern; `k = 0` with no delays gives the static pattern.
#[pyfunction]
#[pyo3(signature = (aperture, delays, mod_frequency, k, thetas_deg, phis_deg, ctx))]
fn harmonic_pattern(
    aperture: &PyAperture,
    delays: Option<Vec<f64>>,
    mod_frequency: f64,
    k: i32,
    thetas_deg: Vec<f64>,
    phis_deg: Vec<f64>,
    ctx: &PyContext,
) -> PyResult<Vec<Complex64>> {
    let grid = ObservationGrid::angular(
        thetas_deg.into_iter().map(f64::to_radians).collect(),
        phis_deg.into_iter().map(f64::to_radians).collect(),
        None,
    )
    .map_err(err)?;
    let delays = delays.unwrap_or_else(|| vec![0.0; aperture.0.len()]);
    let profile =
        irs_core::SquareWaveProfile::new(mod_frequency, &aperture.0, delays).map_err(err)?;
    let pattern = if k == 0 {
        timevarying::invariant_pattern(&aperture.0, &grid, &ctx.0, &ElementPattern::Isotropic)
    } else {
        timevarying::harmonic_pattern(
            &aperture.0,
            &profile,
            k,
            &grid,
            &ctx.0,
            &ElementPattern::Isotropic,
        )
    }
    .map_err(err)?;
    Ok(pattern.values)
}

/// Parses `config_text`, runs it into `out_dir` and returns the summary metrics.
#[pyfunction]
#[pyo3(signature = (config_text, out_dir, seed = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    config_text: &str,
    out_dir: &str,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = scenario::parse_config(config_text)
        .map_err(|e: ConfigError| PyValueError::new_err(e.to_string()))?;
    config.output_dir = out_dir.into();
    if let Some(s) = seed {
        config.seed = s;
    }
    let out = scenario::run_scenario(&config).map_err(|e| err(e.source))?;
    let d = PyDict::new(py);
    for (k, v) in &out.metrics {
        d.set_item(k, v)?;
    }
    d.set_item("warnings", out.warnings.clone())?;
    d.set_item(
        "files",
        out.files
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

#[pymodule]
fn irs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SPEED_OF_LIGHT", irs_core::SPEED_OF_LIGHT)?;
    m.add_class::<PyContext>()?;
    m.add_class::<PyAperture>()?;
    m.add_class::<PySource>()?;
    m.add_class::<PyProfile>()?;
    m.add_function(wrap_pyfunction!(steering_profile, m)?)?;
    m.add_function(wrap_pyfunction!(focusing_profile, m)?)?;
    m.add_function(wrap_pyfunction!(randomized_profile, m)?)?;
    m.add_function(wrap_pyfunction!(field_at, m)?)?;
    m.add_function(wrap_pyfunction!(far_field_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(depth_profile, m)?)?;
    m.add_function(wrap_pyfunction!(run_link, m)?)?;
    m.add_function(wrap_pyfunction!(square_wave_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(steering_delays, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
