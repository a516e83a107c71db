//! Python bindings: the raster types, the synthesis chain, and the
//! evaluation metrics, for driving generation from training scripts.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use blurgen::baseline;
use blurgen::evaluation;
use blurgen::io::{self, OutputFormat};
use blurgen::kernel;
use blurgen::maskops;
use blurgen::pipeline;
use blurgen::synthesis;
use blurgen::{BinaryMask, Error, GeneratorConfig, Image};

fn to_py_err(e: Error) -> PyErr {
    match &e {
        Error::Io { .. } | Error::Decode { .. } | Error::Format { .. } => {
            PyIOError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// An image raster: row-major, channel-interleaved f64 samples in [0, 1].
#[pyclass(name = "Image")]
struct PyImage {
    inner: Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(PyImage { inner: Image::new(width, height, channels, data).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn filled(width: usize, height: usize, channels: usize, value: f64) -> PyResult<Self> {
        Ok(PyImage { inner: Image::filled(width, height, channels, value).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyImage { inner: io::load_image(path).map_err(to_py_err)? })
    }

    /// Save as PNG, or as JPEG when a quality is given.
    #[pyo3(signature = (path, jpeg_quality=None))]
    fn save(&self, path: &str, jpeg_quality: Option<u8>) -> PyResult<()> {
        let format = match jpeg_quality {
            Some(q) => OutputFormat::Jpeg { quality: q },
            None => OutputFormat::Png,
        };
        io::save_image(&self.inner, path, format).map_err(to_py_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn luma(&self) -> Vec<f64> {
        self.inner.luma()
    }

    fn hflip(&self) -> PyImage {
        PyImage { inner: self.inner.hflip() }
    }

    fn __repr__(&self) -> String {
        format!(
            "Image({}x{}x{})",
            self.inner.width(),
            self.inner.height(),
            self.inner.channels()
        )
    }
}

/// A boolean raster; true marks the region to blur.
#[pyclass(name = "BinaryMask")]
struct PyMask {
    inner: BinaryMask,
}

#[pymethods]
impl PyMask {
    #[new]
    fn new(width: usize, height: usize, data: Vec<bool>) -> PyResult<Self> {
        Ok(PyMask { inner: BinaryMask::new(width, height, data).map_err(to_py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (path, threshold=0.5))]
    fn load(path: &str, threshold: f64) -> PyResult<Self> {
        Ok(PyMask { inner: io::load_mask(path, threshold).map_err(to_py_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        io::save_mask(&self.inner, path).map_err(to_py_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn data(&self) -> Vec<bool> {
        self.inner.data().to_vec()
    }

    fn count_true(&self) -> usize {
        self.inner.count_true()
    }

    fn complement(&self) -> PyMask {
        PyMask { inner: self.inner.complement() }
    }

    fn __repr__(&self) -> String {
        format!(
            "BinaryMask({}x{}, {} true)",
            self.inner.width(),
            self.inner.height(),
            self.inner.count_true()
        )
    }
}

/// A unit-mass blur stencil.
#[pyclass(name = "BlurKernel")]
struct PyKernel {
    inner: kernel::BlurKernel,
}

#[pymethods]
impl PyKernel {
    /// Isotropic Gaussian defocus kernel.
    #[staticmethod]
    fn gaussian(sigma: f64) -> PyResult<Self> {
        Ok(PyKernel { inner: kernel::gaussian_kernel(sigma).map_err(to_py_err)? })
    }

    /// Non-linear motion kernel: a line of length m, rotated, elastically
    /// deformed by a field described by (seed, amplitude, smoothness).
    #[staticmethod]
    #[pyo3(signature = (length, angle_deg, elastic_seed=0, elastic_amplitude=0.0, elastic_smoothness=1.0))]
    fn motion(
        length: u32,
        angle_deg: f64,
        elastic_seed: u64,
        elastic_amplitude: f64,
        elastic_smoothness: f64,
    ) -> PyResult<Self> {
        let spec = kernel::BlurSpec::Motion {
            length,
            angle_deg,
            elastic: kernel::ElasticSpec {
                seed: elastic_seed,
                amplitude: elastic_amplitude,
                smoothness: elastic_smoothness,
            },
        };
        Ok(PyKernel { inner: kernel::realize_kernel(&spec).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn delta() -> Self {
        PyKernel { inner: kernel::BlurKernel::delta() }
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("BlurKernel({0}x{0})", self.inner.size())
    }
}

/// Per-channel 2D correlation with reflect-101 borders.
#[pyfunction]
fn convolve(img: &PyImage, kernel: &PyKernel) -> PyResult<PyImage> {
    Ok(PyImage { inner: synthesis::convolve(&img.inner, &kernel.inner).map_err(to_py_err)? })
}

/// Blurred where the mask is true, sharp elsewhere.
#[pyfunction]
fn composite(sharp: &PyImage, blurred: &PyImage, mask: &PyMask) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: synthesis::composite(&sharp.inner, &blurred.inner, &mask.inner)
            .map_err(to_py_err)?,
    })
}

/// Telea fast-marching inpainting of the hole region.
#[pyfunction]
#[pyo3(signature = (img, hole, radius=5))]
fn inpaint(img: &PyImage, hole: &PyMask, radius: u32) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: synthesis::inpaint(&img.inner, &hole.inner, radius).map_err(to_py_err)?,
    })
}

/// Blur-then-paste-back compositing (keeps halo artifacts).
#[pyfunction]
fn synthesize_naive(img: &PyImage, mask: &PyMask, kernel: &PyKernel) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: synthesis::synthesize_naive(&img.inner, &mask.inner, &kernel.inner)
            .map_err(to_py_err)?,
    })
}

/// Halo-free compositing: inpaint the sharp region before blurring.
#[pyfunction]
#[pyo3(signature = (img, mask, kernel, inpaint_radius=5))]
fn synthesize_halo_free(
    img: &PyImage,
    mask: &PyMask,
    kernel: &PyKernel,
    inpaint_radius: u32,
) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: synthesis::synthesize_halo_free(
            &img.inner,
            &mask.inner,
            &kernel.inner,
            inpaint_radius,
        )
        .map_err(to_py_err)?,
    })
}

/// Connected components of the true pixels as (id, pixel_count, mask)
/// triples, largest first.
#[pyfunction]
#[pyo3(signature = (mask, connectivity=8))]
fn connected_components(
    mask: &PyMask,
    connectivity: u8,
) -> PyResult<Vec<(u32, usize, PyMask)>> {
    let connectivity = match connectivity {
        4 => maskops::Connectivity::Four,
        8 => maskops::Connectivity::Eight,
        other => return Err(PyValueError::new_err(format!("connectivity must be 4 or 8, got {}", other))),
    };
    Ok(maskops::connected_components(&mask.inner, connectivity)
        .into_iter()
        .map(|c| (c.id, c.pixel_count, PyMask { inner: c.mask }))
        .collect())
}

/// Numerically stable softmax over objectness scores.
#[pyfunction]
fn proposal_distribution(scores: Vec<f64>) -> PyResult<Vec<f64>> {
    maskops::proposal_distribution(&scores).map_err(to_py_err)
}

/// Rank-based ROC AUC with ties counted 0.5.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    evaluation::roc_auc(&scores, &labels).map_err(to_py_err)
}

/// Non-interpolated average precision.
#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    evaluation::average_precision(&scores, &labels).map_err(to_py_err)
}

/// (AUC, AP) of a prediction map against a ground-truth mask; the
/// prediction is upscaled bilinearly if sizes differ.
#[pyfunction]
fn evaluate_image(pred: &PyImage, gt: &PyMask) -> PyResult<(f64, f64)> {
    evaluation::evaluate_image(&pred.inner, &gt.inner).map_err(to_py_err)
}

/// Gradient-energy blurriness map in [0, 1]; higher = more blurred.
#[pyfunction]
#[pyo3(signature = (img, scales=None))]
fn sharpness_map(img: &PyImage, scales: Option<Vec<f64>>) -> PyResult<PyImage> {
    let scales = scales.unwrap_or_else(|| baseline::DEFAULT_SCALES.to_vec());
    Ok(PyImage { inner: baseline::sharpness_map(&img.inner, &scales).map_err(to_py_err)? })
}

/// Generate one sample from a TOML config: returns (image, mask,
/// manifest-record JSON).
#[pyfunction]
fn generate_sample(
    config_toml: &str,
    image_index: usize,
    sample_index: usize,
) -> PyResult<(PyImage, PyMask, String)> {
    let cfg = GeneratorConfig::from_toml_str(config_toml).map_err(to_py_err)?;
    let pair = pipeline::generate_sample(&cfg, image_index, sample_index).map_err(to_py_err)?;
    let record = serde_json::json!({
        "id": pair.meta.id,
        "source_image": pair.meta.source_image,
        "blur_kind": pair.meta.spec.kind_name(),
        "sample_seed": pair.meta.sample_seed,
        "inverted": pair.meta.inverted,
    });
    Ok((
        PyImage { inner: pair.image },
        PyMask { inner: pair.mask },
        record.to_string(),
    ))
}

/// Run the full dataset generation described by a TOML config file.
/// Returns (manifest_path, record_count, skipped_count).
#[pyfunction]
fn generate_dataset(config_path: &str) -> PyResult<(String, usize, usize)> {
    let cfg = GeneratorConfig::from_toml_file(config_path).map_err(to_py_err)?;
    let manifest = pipeline::generate_dataset(&cfg).map_err(to_py_err)?;
    Ok((
        manifest.path.to_string_lossy().into_owned(),
        manifest.records.len(),
        manifest.skipped.len(),
    ))
}

/// The default generator configuration as a TOML string.
#[pyfunction]
fn default_config_toml() -> String {
    GeneratorConfig::default().to_toml_string()
}

#[pymodule]
fn pyblurgen(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyKernel>()?;
    m.add_function(wrap_pyfunction!(convolve, m)?)?;
    m.add_function(wrap_pyfunction!(composite, m)?)?;
    m.add_function(wrap_pyfunction!(inpaint, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_naive, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_halo_free, m)?)?;
    m.add_function(wrap_pyfunction!(connected_components, m)?)?;
    m.add_function(wrap_pyfunction!(proposal_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_image, m)?)?;
    m.add_function(wrap_pyfunction!(sharpness_map, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sample, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_toml, m)?)?;
    m.add("CONFIG_SCHEMA_VERSION", blurgen::CONFIG_SCHEMA_VERSION)?;
    Ok(())
}
