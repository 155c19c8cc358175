//! Python bindings: images, partitions, mixing, SSIM, restore bounds and
//! augmentation. Heavy calls release the GIL.

use std::path::PathBuf;

use blockmix::model::{DonorShortagePolicy, SingletonLabelPolicy};
use blockmix::{security, ssim as ssim_mod, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

create_exception!(pyblockmix, BlockmixError, PyValueError, "Invalid input or configuration.");

fn to_py(e: Error) -> PyErr {
    if e.is_user_error() {
        BlockmixError::new_err(e.to_string())
    } else {
        PyOSError::new_err(e.to_string())
    }
}

/// RGB image with its class label and a stable `label/name.ext` id.
#[pyclass(name = "LabeledImage", module = "pyblockmix", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: blockmix::LabeledImage,
}

impl PyImage {
    fn wrap(inner: blockmix::LabeledImage) -> Self {
        Self { inner }
    }
}

fn unwrap_all(images: &[PyRef<'_, PyImage>]) -> Vec<blockmix::LabeledImage> {
    images.iter().map(|i| i.inner.clone()).collect()
}

fn wrap_all(images: Vec<blockmix::LabeledImage>) -> Vec<PyImage> {
    images.into_iter().map(PyImage::wrap).collect()
}

#[pymethods]
impl PyImage {
    /// `pixels` is row-major RGB, `width * height * 3` bytes.
    #[new]
    fn new(width: u32, height: u32, pixels: Vec<u8>, label: String, source_id: String) -> PyResult<Self> {
        blockmix::LabeledImage::new(width, height, pixels, label, source_id)
            .map(Self::wrap)
            .map_err(to_py)
    }

    #[staticmethod]
    fn uniform(width: u32, height: u32, rgb: [u8; 3], label: String, source_id: String) -> PyResult<Self> {
        blockmix::LabeledImage::uniform(width, height, rgb, label, source_id)
            .map(Self::wrap)
            .map_err(to_py)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    #[getter]
    fn label(&self) -> &str {
        self.inner.label()
    }

    #[getter]
    fn source_id(&self) -> &str {
        self.inner.source_id()
    }

    #[getter]
    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.pixels())
    }

    fn pixel(&self, x: u32, y: u32) -> PyResult<[u8; 3]> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(BlockmixError::new_err(format!("pixel ({x}, {y}) is outside the image")));
        }
        Ok(self.inner.pixel(x, y))
    }

    fn resized(&self, width: u32, height: u32) -> Self {
        Self::wrap(self.inner.resized((width, height)))
    }

    fn __eq__(&self, other: PyRef<'_, Self>) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "LabeledImage({}x{}, label={:?}, source_id={:?})",
            self.inner.width(),
            self.inner.height(),
            self.inner.label(),
            self.inner.source_id()
        )
    }
}

/// Even block grid over a canonical image size.
#[pyclass(name = "PartitionSpec", module = "pyblockmix", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyPartition {
    inner: blockmix::PartitionSpec,
}

#[pymethods]
impl PyPartition {
    #[getter]
    fn block_len(&self) -> u32 {
        self.inner.block_len()
    }

    #[getter]
    fn block_wid(&self) -> u32 {
        self.inner.block_wid()
    }

    #[getter]
    fn rows(&self) -> u32 {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> u32 {
        self.inner.cols()
    }

    #[getter]
    fn block_count(&self) -> u32 {
        self.inner.block_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "PartitionSpec(block={}x{}, grid={}x{}, blocks={})",
            self.inner.block_len(),
            self.inner.block_wid(),
            self.inner.rows(),
            self.inner.cols(),
            self.inner.block_count()
        )
    }
}

/// Grid of `block_len x block_wid` blocks over a `(length, width)` image.
#[pyfunction]
fn derive_partition(size: (u32, u32), block_len: u32, block_wid: u32) -> PyResult<PyPartition> {
    blockmix::derive_partition(size, block_len, block_wid)
        .map(|inner| PyPartition { inner })
        .map_err(to_py)
}

#[allow(clippy::too_many_arguments)]
fn mix_config(
    size: (u32, u32),
    block_len: u32,
    block_wid: u32,
    rounds: u32,
    donors: u32,
    prob: f64,
    seed: u64,
    donor_shortage: &str,
    singleton: &str,
) -> PyResult<blockmix::MixConfig> {
    let mut c = blockmix::MixConfig::new(size, block_len, block_wid).map_err(to_py)?;
    c.rounds = rounds;
    c.donors_per_image = donors;
    c.replace_prob = prob;
    c.master_seed = seed;
    c.donor_shortage_policy = match donor_shortage {
        "error" => DonorShortagePolicy::Error,
        "resample" => DonorShortagePolicy::SampleWithReplacement,
        other => return Err(BlockmixError::new_err(format!("unknown donor_shortage `{other}`"))),
    };
    c.singleton_label_policy = match singleton {
        "error" => SingletonLabelPolicy::Error,
        "passthrough" => SingletonLabelPolicy::PassthroughWithWarning,
        other => return Err(BlockmixError::new_err(format!("unknown singleton `{other}`"))),
    };
    c.validate().map_err(to_py)?;
    Ok(c)
}

/// Mix a dataset. Returns `(mixed_images, manifest_json)`; the manifest
/// carries per-image donor provenance only when `audit` is true.
#[pyfunction]
#[pyo3(signature = (
    images, size, block_len, block_wid, *, rounds = 1, donors = 10, prob = 0.5, seed = 0,
    donor_shortage = "error", singleton = "error", workers = None, audit = false
))]
#[allow(clippy::too_many_arguments)]
fn mix_dataset(
    py: Python<'_>,
    images: Vec<PyRef<'_, PyImage>>,
    size: (u32, u32),
    block_len: u32,
    block_wid: u32,
    rounds: u32,
    donors: u32,
    prob: f64,
    seed: u64,
    donor_shortage: &str,
    singleton: &str,
    workers: Option<usize>,
    audit: bool,
) -> PyResult<(Vec<PyImage>, String)> {
    let config = mix_config(size, block_len, block_wid, rounds, donors, prob, seed, donor_shortage, singleton)?;
    let data = unwrap_all(&images);
    let (mixed, manifest) = py
        .detach(|| {
            let out = match workers {
                Some(w) => blockmix::mix_dataset_with_workers(&data, &config, w),
                None => blockmix::mix_dataset(&data, &config),
            }?;
            let manifest = blockmix::MixManifest::from_run(&config, &out).to_json(audit)?;
            Ok::<_, Error>((out.images, manifest))
        })
        .map_err(to_py)?;
    Ok((wrap_all(mixed), manifest))
}

/// Mean SSIM on Rec.601 luma with an 11x11, sigma 1.5 Gaussian window.
#[pyfunction]
fn ssim(py: Python<'_>, a: PyRef<'_, PyImage>, b: PyRef<'_, PyImage>) -> PyResult<f64> {
    let (a, b) = (a.inner.clone(), b.inner.clone());
    py.detach(|| ssim_mod::ssim(&a, &b, &ssim_mod::SsimParams::default()))
        .map_err(to_py)
}

/// Pair images by id (extension ignored). Returns `(mean, [(id, ssim), ...])`.
#[pyfunction]
fn dataset_ssim(
    py: Python<'_>,
    originals: Vec<PyRef<'_, PyImage>>,
    mixed: Vec<PyRef<'_, PyImage>>,
) -> PyResult<(f64, Vec<(String, f64)>)> {
    let (o, m) = (unwrap_all(&originals), unwrap_all(&mixed));
    let report = py
        .detach(|| ssim_mod::dataset_ssim(&o, &m, &ssim_mod::SsimParams::default()))
        .map_err(to_py)?;
    Ok((report.mean_ssim, report.per_image))
}

/// `log10` probability of restoring one category.
#[pyfunction]
fn restore_log_prob_category(block_count: u64, category_size: u64) -> f64 {
    security::restore_log_prob_category(block_count, category_size)
}

/// `(total, [(label, per_category), ...])` for a census of category sizes.
#[pyfunction]
#[pyo3(signature = (block_count, counts, labels = None))]
fn restore_log_prob_total(
    block_count: u64,
    counts: Vec<u64>,
    labels: Option<Vec<String>>,
) -> PyResult<(f64, Vec<(String, f64)>)> {
    let census = match labels {
        None => security::CategoryCensus::from_counts(&counts, block_count),
        Some(l) if l.len() == counts.len() => {
            security::CategoryCensus::new(l.into_iter().zip(counts).collect(), block_count)
        }
        Some(l) => {
            return Err(BlockmixError::new_err(format!("{} labels for {} counts", l.len(), counts.len())))
        }
    }
    .map_err(to_py)?;
    let bound = security::restore_log_prob_total(&census);
    Ok((bound.log10_prob_total, bound.log10_prob_per_category))
}

/// Brute-force reassembly of a tiny category. `mixed[i][j]` / `truth[i][j]`
/// is block `j` of image `i`. Returns `(total_assemblies, successful)`.
#[pyfunction]
fn enumerate_reassemblies(mixed: Vec<Vec<i64>>, truth: Vec<Vec<i64>>) -> PyResult<(u64, u64)> {
    let r = security::enumerate_reassemblies(&mixed, &truth).map_err(to_py)?;
    Ok((r.total_assemblies, r.successful))
}

#[pyfunction]
fn flip(img: PyRef<'_, PyImage>) -> PyImage {
    PyImage::wrap(blockmix::flip(&img.inner))
}

/// Counter-clockwise rotation about the centre; uncovered pixels are black.
#[pyfunction]
fn rotate(img: PyRef<'_, PyImage>, degrees: f64) -> PyImage {
    PyImage::wrap(blockmix::rotate(&img.inner, degrees))
}

#[pyfunction]
fn brighten(img: PyRef<'_, PyImage>, factor: f64) -> PyImage {
    PyImage::wrap(blockmix::brighten(&img.inner, factor))
}

/// With `emit_all` each image is followed by one variant per enabled
/// augmentation; otherwise the enabled ones are chained in place.
#[pyfunction]
#[pyo3(signature = (images, *, flip = true, rotate = Some(15.0), brighten = Some(1.3), emit_all = true))]
fn augment_dataset(
    images: Vec<PyRef<'_, PyImage>>,
    flip: bool,
    rotate: Option<f64>,
    brighten: Option<f64>,
    emit_all: bool,
) -> PyResult<Vec<PyImage>> {
    let config = blockmix::AugmentConfig {
        flip_horizontal: flip,
        rotation_degrees: rotate,
        brightness_factor: brighten,
        emit_all_variants: emit_all,
    };
    blockmix::augment_dataset(&unwrap_all(&images), &config)
        .map(wrap_all)
        .map_err(to_py)
}

/// Load a directory-per-label tree, resized to `(length, width)`.
#[pyfunction]
fn load_dataset(py: Python<'_>, root: PathBuf, size: (u32, u32)) -> PyResult<Vec<PyImage>> {
    py.detach(|| blockmix::load_dataset(&root, size))
        .map(wrap_all)
        .map_err(to_py)
}

/// Write images as `root/<label>/<stem>.png`.
#[pyfunction]
fn save_dataset(py: Python<'_>, images: Vec<PyRef<'_, PyImage>>, root: PathBuf) -> PyResult<()> {
    let data = unwrap_all(&images);
    py.detach(|| blockmix::save_dataset(&data, &root)).map_err(to_py)
}

/// Seeded uniform-noise images, labels `class0..`, round-robin.
#[pyfunction]
fn random_dataset(n: usize, labels: usize, size: (u32, u32), seed: u64) -> Vec<PyImage> {
    wrap_all(blockmix::synth::random_dataset(n, labels, size, seed))
}

/// Seeded smooth textures, labels `class0..`, round-robin.
#[pyfunction]
fn texture_dataset(n: usize, labels: usize, size: (u32, u32), seed: u64) -> Vec<PyImage> {
    wrap_all(blockmix::synth::texture_dataset(n, labels, size, seed))
}

#[pymodule]
fn pyblockmix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("BlockmixError", m.py().get_type::<BlockmixError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyPartition>()?;
    m.add_function(wrap_pyfunction!(derive_partition, m)?)?;
    m.add_function(wrap_pyfunction!(mix_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_ssim, m)?)?;
    m.add_function(wrap_pyfunction!(restore_log_prob_category, m)?)?;
    m.add_function(wrap_pyfunction!(restore_log_prob_total, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_reassemblies, m)?)?;
    m.add_function(wrap_pyfunction!(flip, m)?)?;
    m.add_function(wrap_pyfunction!(rotate, m)?)?;
    m.add_function(wrap_pyfunction!(brighten, m)?)?;
    m.add_function(wrap_pyfunction!(augment_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(save_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(random_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(texture_dataset, m)?)?;
    Ok(())
}
