use std::path::PathBuf;
use std::sync::Mutex;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use netrepair::data::{make_synthetic, load_dataset, save_dataset};
use netrepair::eval;
use netrepair::nn::TrainOptions;
use netrepair::orchestrator::datasets::load_named;
use netrepair::orchestrator::{default_params, parse_cli, run_pipeline, Invocation};
use netrepair::repair::{self, PsoParams, RepairConfig, RepairData, RepairMethod};
use netrepair::store::{self, DefectKind, DefectSpec};
use netrepair::{ConstraintSpec, Error, LabeledDataset, Split, Tensor};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::UnsupportedArchitecture { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py_json<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Labeled images in NCHW layout with pixels in `[0, 1]`.
#[pyclass(name = "Dataset", module = "pynetrepair", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: LabeledDataset,
}

#[pymethods]
impl PyDataset {
    /// `images` is flat, `len(labels) * c * h * w` values.
    #[new]
    #[pyo3(signature = (images, shape, labels, classes, split = "train"))]
    fn new(images: Vec<f32>, shape: [usize; 3], labels: Vec<usize>, classes: usize, split: &str) -> PyResult<Self> {
        let split: Split = split.parse().map_err(py_err)?;
        let mut dims = vec![labels.len()];
        dims.extend(shape);
        let images = Tensor::new(dims, images).map_err(py_err)?;
        let inner = LabeledDataset::new(images, labels, split, classes).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (classes, n_per_class, shape, seed, split = "train"))]
    fn synthetic(classes: usize, n_per_class: usize, shape: [usize; 3], seed: u64, split: &str) -> PyResult<Self> {
        let split: Split = split.parse().map_err(py_err)?;
        let inner = make_synthetic(classes, n_per_class, shape, seed, split).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    /// `(train, test)` for a named corpus such as `"synthetic"` or `"mnist"`.
    #[staticmethod]
    #[pyo3(signature = (name, data_dir = None))]
    fn named(name: &str, data_dir: Option<PathBuf>) -> PyResult<(Self, Self)> {
        let (train, test) = load_named(name, data_dir.as_deref()).map_err(py_err)?;
        Ok((PyDataset { inner: train }, PyDataset { inner: test }))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: load_dataset(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_dataset(&self.inner, path).map_err(py_err)
    }

    fn subset(&self, indices: Vec<usize>) -> PyResult<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.inner.len()) {
            return Err(PyValueError::new_err(format!("index {i} out of range")));
        }
        Ok(PyDataset {
            inner: self.inner.subset(&indices),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn images(&self) -> Vec<f32> {
        self.inner.images().data().to_vec()
    }

    #[getter]
    fn shape(&self) -> [usize; 3] {
        self.inner.image_shape()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.class_count()
    }

    #[getter]
    fn split(&self) -> String {
        self.inner.split().to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(len={}, shape={:?}, classes={}, split={})",
            self.inner.len(),
            self.inner.image_shape(),
            self.inner.class_count(),
            self.inner.split()
        )
    }
}

#[pyclass(name = "Model", module = "pynetrepair", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: store::Model,
}

#[pymethods]
impl PyModel {
    /// Freshly initialized registry architecture.
    #[staticmethod]
    #[pyo3(signature = (arch, depth, input_shape, classes, seed = 0))]
    fn build(arch: &str, depth: usize, input_shape: [usize; 3], classes: usize, seed: u64) -> PyResult<Self> {
        let inner = store::build_architecture(arch, depth, input_shape, classes, seed).map_err(py_err)?;
        Ok(PyModel { inner })
    }

    /// Trains a registry architecture with SGD and momentum 0.9.
    #[staticmethod]
    #[pyo3(signature = (arch, depth, train, epochs = 3, batch_size = 64, lr = 0.05, seed = 0))]
    fn train(
        py: Python<'_>,
        arch: &str,
        depth: usize,
        train: &PyDataset,
        epochs: usize,
        batch_size: usize,
        lr: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let opts = TrainOptions {
            epochs,
            batch_size,
            lr,
            seed,
            ..TrainOptions::default()
        };
        let data = &train.inner;
        let inner = py
            .detach(|| netrepair::orchestrator::train_baseline(arch, depth, data, &opts, &mut |_, _| {}))
            .map_err(py_err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: store::load_model(path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyModel {
            inner: store::model_from_bytes(data).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        store::save_model(&self.inner, path).map_err(py_err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = store::model_to_bytes(&self.inner).map_err(py_err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    #[getter]
    fn arch(&self) -> String {
        self.inner.arch_name.clone()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.num_classes
    }

    #[getter]
    fn layer_names(&self) -> Vec<String> {
        self.inner.layers.iter().map(|l| l.name.clone()).collect()
    }

    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    fn trainable_names(&self) -> Vec<String> {
        self.inner.trainable_names()
    }

    /// Flat copy of one parameter tensor.
    fn weights(&self, name: &str) -> PyResult<Vec<f32>> {
        self.inner
            .weights
            .get(name)
            .map(|t| t.data().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("no parameter `{name}`")))
    }

    fn logits(&self, py: Python<'_>, data: &PyDataset) -> PyResult<Vec<Vec<f32>>> {
        let t = py.detach(|| eval::logits(&self.inner, &data.inner)).map_err(py_err)?;
        Ok((0..t.rows()).map(|i| t.row(i).to_vec()).collect())
    }

    fn predict(&self, py: Python<'_>, data: &PyDataset) -> PyResult<Vec<usize>> {
        py.detach(|| eval::predict(&self.inner, &data.inner)).map_err(py_err)
    }

    fn accuracy(&self, py: Python<'_>, data: &PyDataset) -> PyResult<f64> {
        py.detach(|| eval::accuracy(&self.inner, &data.inner)).map_err(py_err)
    }

    /// Clean metrics as a dict; `groups` defaults to the built-in constraint.
    #[pyo3(signature = (data, groups = None, threshold = 0.05))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        data: &PyDataset,
        groups: Option<Vec<Vec<usize>>>,
        threshold: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let spec = match groups {
            Some(g) => ConstraintSpec::new(g, threshold),
            None => ConstraintSpec::default_for(self.inner.num_classes),
        };
        let report = py
            .detach(|| eval::evaluate(&self.inner, &data.inner, &spec, &[]))
            .map_err(py_err)?;
        to_py_json(py, &report)
    }

    /// Copy of the model with a seeded defect.
    #[pyo3(signature = (kind, layer, magnitude, seed = 0, data = None))]
    fn inject_defect(&self, kind: &str, layer: &str, magnitude: f64, seed: u64, data: Option<&PyDataset>) -> PyResult<Self> {
        let kind: DefectKind = kind.parse().map_err(py_err)?;
        let spec = DefectSpec::new(kind, layer, magnitude, seed);
        let inner = store::inject_defect(&self.inner, &spec, data.map(|d| &d.inner)).map_err(py_err)?;
        Ok(PyModel { inner })
    }

    /// Copy with an identity-initialized correction unit before layer `position`.
    #[pyo3(signature = (position, width = 64, seed = 0))]
    fn attach_correction_unit(&self, position: usize, width: usize, seed: u64) -> PyResult<Self> {
        let inner = repair::attach_correction_unit(&self.inner, position, width, seed).map_err(py_err)?;
        Ok(PyModel { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(arch={}, depth={}, classes={}, params={})",
            self.inner.arch_name,
            self.inner.depth,
            self.inner.num_classes,
            self.inner.parameter_count()
        )
    }
}

/// Repairs `model` and returns `(repaired, summary)`. `overrides` are
/// `key=value` hyperparameter strings applied over the method defaults.
#[pyfunction]
#[pyo3(signature = (model, train, test, method, seed = 0, overrides = Vec::new(), dataset = "synthetic"))]
fn repair_model<'py>(
    py: Python<'py>,
    model: &PyModel,
    train: &PyDataset,
    test: &PyDataset,
    method: &str,
    seed: u64,
    overrides: Vec<String>,
    dataset: &str,
) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
    let method: RepairMethod = method.parse().map_err(py_err)?;
    let mut params = default_params(method, &model.inner.arch_name, dataset);
    params.apply_overrides(&overrides).map_err(py_err)?;
    let data = RepairData::new(train.inner.clone(), test.inner.clone()).map_err(py_err)?;
    let config = RepairConfig::new(method, params, seed);
    let outcome = py
        .detach(|| repair::repair(&model.inner, &data, &config, &mut |_, _| {}))
        .map_err(py_err)?;
    let summary = to_py_json(py, &outcome)?;
    let repaired = PyModel {
        inner: outcome.model().clone(),
    };
    Ok((repaired, summary))
}

/// Maximizes a Python callable over a box; returns `(best, fitness, trace)`.
#[pyfunction]
#[pyo3(signature = (fitness, bounds, swarm = 32, iters = 100, seed = 0))]
fn pso_optimize(
    py: Python<'_>,
    fitness: Py<PyAny>,
    bounds: Vec<(f64, f64)>,
    swarm: usize,
    iters: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, f64, Vec<f64>)> {
    let params = PsoParams {
        swarm,
        iters,
        ..PsoParams::default()
    };
    let failure: Mutex<Option<PyErr>> = Mutex::new(None);
    let f = |x: &[f64]| -> f64 {
        Python::attach(|py| match fitness.call1(py, (x.to_vec(),)).and_then(|v| v.extract::<f64>(py)) {
            Ok(v) => v,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        })
    };
    let result = py.detach(|| repair::pso_optimize(f, &bounds, &params, seed));
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let r = result.map_err(py_err)?;
    Ok((r.best, r.best_fitness, r.trace))
}

/// Runs a command line (without the program name) and returns the run
/// records as dicts. Reports and logs land in the configured output dir.
#[pyfunction]
fn run(py: Python<'_>, args: Vec<String>) -> PyResult<Bound<'_, PyAny>> {
    let argv = std::iter::once("netrepair".to_string()).chain(args);
    let config = match parse_cli(argv).map_err(py_err)? {
        Invocation::Run(c) => c,
        Invocation::TrainBaseline(_) => {
            return Err(PyValueError::new_err("use Model.train for baseline training"));
        }
    };
    let records = py.detach(|| run_pipeline(&config)).map_err(py_err)?;
    to_py_json(py, &records)
}

#[pymodule]
fn pynetrepair(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(repair_model, m)?)?;
    m.add_function(wrap_pyfunction!(pso_optimize, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("METHODS", RepairMethod::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>())?;
    Ok(())
}
