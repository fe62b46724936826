use std::path::PathBuf;

use actinr::metrics::psnr as psnr_db;
use actinr::tasks::{self, FitConfig, ModelBundle, SamplePoint};
use actinr::toy::{self, ToySpec};
use actinr::video::{self, VideoTensor};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

/// `(frames, height, width, channels)`.
type Shape = (usize, usize, usize, usize);

fn to_py(e: actinr::Error) -> PyErr {
    match e {
        actinr::Error::Config(_) | actinr::Error::Range(_) | actinr::Error::Dimension { .. } => {
            PyValueError::new_err(e.to_string())
        }
        actinr::Error::Io { .. } | actinr::Error::Ingest { .. } => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn config_from(preset: &str, config: Option<&str>) -> PyResult<FitConfig> {
    let base = match preset {
        "paper" => FitConfig::default(),
        "desk" => FitConfig::desk(),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown preset `{other}` (paper or desk)"
            )))
        }
    };
    match config {
        Some(text) => base.apply_json_str(text).map_err(to_py),
        None => Ok(base),
    }
}

/// A fitted video model.
#[pyclass(name = "Model", module = "actinr")]
struct PyModel {
    bundle: ModelBundle,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            bundle: tasks::load_bundle(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        tasks::save_bundle(&self.bundle, &path).map_err(to_py)
    }

    /// `(frames, height, width, channels)` of the fitted video.
    #[getter]
    fn shape(&self) -> Shape {
        let g = &self.bundle.grid;
        (g.frames, g.height, g.width, self.bundle.channels)
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.bundle.parameter_count()
    }

    /// Resolved configuration as flat JSON.
    fn config_json(&self) -> String {
        serde_json::Value::Object(self.bundle.config.to_flat()).to_string()
    }

    /// Reconstruction at the training grid, flattened in (t, y, x, c) order.
    fn render(&self) -> PyResult<Vec<f64>> {
        Ok(self.bundle.render().map_err(to_py)?.data().to_vec())
    }

    /// Values at continuous `(x, y, t)` positions, `len(points) * channels` floats.
    fn sample(&self, points: Vec<(f64, f64, f64)>) -> PyResult<Vec<f64>> {
        let pts: Vec<SamplePoint> = points.into_iter().map(|(x, y, t)| SamplePoint { x, y, t }).collect();
        tasks::sample_continuous(&self.bundle, &pts).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let (t, h, w, c) = self.shape();
        format!(
            "Model(shape=({t}, {h}, {w}, {c}), parameters={})",
            self.parameter_count()
        )
    }
}

/// Fits a flat `(t, y, x, c)` array; returns the model and the training PSNR.
#[pyfunction]
#[pyo3(signature = (data, shape, config=None, preset="desk"))]
fn fit(py: Python<'_>, data: Vec<f64>, shape: Shape, config: Option<&str>, preset: &str) -> PyResult<(PyModel, f64)> {
    let cfg = config_from(preset, config)?;
    let (t, h, w, c) = shape;
    let video = VideoTensor::new(t, h, w, c, data).map_err(to_py)?;
    let result = py.allow_threads(|| tasks::fit_task(&video, &cfg)).map_err(to_py)?;
    Ok((PyModel { bundle: result.bundle }, result.train_psnr_db))
}

/// Loads a directory of PNG frames as `(flat data, shape)`.
#[pyfunction]
#[pyo3(signature = (path, channels=1))]
fn load_frames(path: PathBuf, channels: usize) -> PyResult<(Vec<f64>, Shape)> {
    let v = video::load_frames(&path, channels).map_err(to_py)?;
    Ok((v.data().to_vec(), v.dims()))
}

/// Writes one of the built-in synthetic videos as PNG frames.
#[pyfunction]
fn write_toy(kind: &str, out: PathBuf) -> PyResult<()> {
    let v = match kind {
        "blob" => toy::gaussian_blob_video(&ToySpec::blob()),
        "circle" => toy::moving_circle_video(&ToySpec::circle()),
        "bar" => toy::oscillating_bar_video(&ToySpec::bar()),
        "texture" => toy::texture_video(&ToySpec::texture()),
        other => return Err(PyValueError::new_err(format!("unknown toy `{other}`"))),
    }
    .map_err(to_py)?;
    toy::write_toy(&v, &out).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (a, b, peak=1.0))]
fn psnr(a: Vec<f64>, b: Vec<f64>, peak: f64) -> PyResult<f64> {
    psnr_db(&a, &b, peak).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "actinr")]
fn actinr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(load_frames, m)?)?;
    m.add_function(wrap_pyfunction!(write_toy, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    Ok(())
}
