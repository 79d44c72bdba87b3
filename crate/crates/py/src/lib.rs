//! Python bindings: domains, rasters, quasihyperbolic distance fields,
//! integrals and sweeps, tube certificates, and the union/weight checks.
//!
//! Report-shaped results come back as plain Python dicts/lists (converted
//! from the library's serialized form); scalars come back as floats. Cells
//! that are unreachable carry `float('inf')`; the JSON conversion maps
//! non-finite numbers to `None` inside nested reports.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use qhavg::geom::{AlignedBox, DomainSpec, Point};
use qhavg::qh::{solve, Stencil};
use qhavg::raster::{rasterize, rasterize_in_box, RasterDomain};
use qhavg::tubes;
use qhavg::weights::Weight;
use qhavg::whitney;

fn err(e: qhavg::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pt(coords: &[f64]) -> PyResult<Point> {
    Point::from_slice(coords).map_err(err)
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    match v {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else if let Some(u) = n.as_u64() {
                u.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        Value::String(s) => s.into_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn report_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(value)
        .map_err(|e| PyRuntimeError::new_err(format!("serialization failed: {e}")))?;
    json_to_py(py, &v)
}

fn stencil_from(name: &str) -> PyResult<Stencil> {
    match name {
        "full" => Ok(Stencil::Full),
        "axis" => Ok(Stencil::Axis),
        other => Err(PyValueError::new_err(format!(
            "unknown stencil {other:?}; expected \"full\" or \"axis\""
        ))),
    }
}

/// A bounded open domain from the built-in catalog.
#[pyclass(module = "qhavg_py", name = "Domain", skip_from_py_object)]
#[derive(Clone)]
pub struct PyDomain {
    spec: DomainSpec,
}

impl PyDomain {
    fn wrap(spec: DomainSpec) -> PyResult<Self> {
        spec.validate().map_err(err)?;
        Ok(PyDomain { spec })
    }
}

#[pymethods]
impl PyDomain {
    /// Open unit cube (0,1)^n, n in {2,3}.
    #[staticmethod]
    fn unit_cube(n: usize) -> PyResult<Self> {
        Self::wrap(DomainSpec::UnitCube { n })
    }

    /// Open unit ball, n in {2,3}.
    #[staticmethod]
    fn unit_ball(n: usize) -> PyResult<Self> {
        Self::wrap(DomainSpec::UnitBall { n })
    }

    /// Power cusp {0 < x < 1, |y| < x^alpha}, alpha > 1.
    #[staticmethod]
    fn cusp(alpha: f64, n: usize) -> PyResult<Self> {
        Self::wrap(DomainSpec::Cusp { alpha, n })
    }

    /// Planar chain of rooms joined by factorially thin halls.
    #[staticmethod]
    fn rooms_and_halls(j_max: u32) -> PyResult<Self> {
        Self::wrap(DomainSpec::RoomsAndHalls { j_max })
    }

    /// Unit disk with rectangular rooms attached along boundary chords.
    #[staticmethod]
    fn disk_and_rooms(j_max: u32) -> PyResult<Self> {
        Self::wrap(DomainSpec::DiskAndRooms { j_max })
    }

    /// Tower of shrinking cubes stacked above the unit cube.
    #[staticmethod]
    fn block_tower(n: usize, m_max: u32) -> PyResult<Self> {
        Self::wrap(DomainSpec::BlockTower { n, m_max })
    }

    /// Interior of a union of closed axis-aligned boxes, given as
    /// (lo, hi) coordinate pairs.
    #[staticmethod]
    fn box_union(n: usize, boxes: Vec<(Vec<f64>, Vec<f64>)>) -> PyResult<Self> {
        let mut parts = Vec::with_capacity(boxes.len());
        for (lo, hi) in boxes {
            if lo.len() != n || hi.len() != n {
                return Err(PyValueError::new_err(
                    "each box needs exactly n lo and n hi coordinates",
                ));
            }
            let mut b = AlignedBox {
                lo: [0.0; 3],
                hi: [0.0; 3],
                dim: n,
            };
            b.lo[..n].copy_from_slice(&lo);
            b.hi[..n].copy_from_slice(&hi);
            parts.push(b);
        }
        Self::wrap(DomainSpec::BoxUnion { n, boxes: parts })
    }

    /// Ambient dimension (2 or 3).
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Interior-exact membership test.
    fn contains(&self, point: Vec<f64>) -> PyResult<bool> {
        self.spec.contains(&pt(&point)?).map_err(err)
    }

    /// Axis-aligned bounding box as (lo, hi) coordinate lists.
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let b = self.spec.bounding_box();
        let n = self.spec.dim();
        (b.lo[..n].to_vec(), b.hi[..n].to_vec())
    }

    /// Sample the domain on a grid of pitch `h` (features below resolution
    /// are dropped and recorded on the raster's truncation notes).
    fn rasterize(&self, h: f64) -> PyResult<PyRaster> {
        Ok(PyRaster {
            raster: rasterize(&self.spec, h).map_err(err)?,
        })
    }

    /// Rasterize on the grid frame spanned by `lo`/`hi` instead of the
    /// domain's own bounding box (for cell-by-cell domain comparisons).
    fn rasterize_in_box(&self, h: f64, lo: Vec<f64>, hi: Vec<f64>) -> PyResult<PyRaster> {
        let n = self.spec.dim();
        if lo.len() != n || hi.len() != n {
            return Err(PyValueError::new_err("box needs n lo and n hi coordinates"));
        }
        let mut b = AlignedBox {
            lo: [0.0; 3],
            hi: [0.0; 3],
            dim: n,
        };
        b.lo[..n].copy_from_slice(&lo);
        b.hi[..n].copy_from_slice(&hi);
        Ok(PyRaster {
            raster: rasterize_in_box(&self.spec, h, &b).map_err(err)?,
        })
    }

    /// JSON form of the domain description.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.spec)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: DomainSpec = serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("bad domain JSON: {e}")))?;
        Self::wrap(spec)
    }

    fn __repr__(&self) -> String {
        format!("Domain({:?})", self.spec)
    }
}

/// A domain sampled at cell centers with exact boundary distances.
#[pyclass(module = "qhavg_py", name = "Raster")]
pub struct PyRaster {
    raster: RasterDomain,
}

#[pymethods]
impl PyRaster {
    #[getter]
    fn h(&self) -> f64 {
        self.raster.grid.h
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.raster.grid.dims[..self.raster.grid.n].to_vec()
    }

    #[getter]
    fn inside_count(&self) -> usize {
        self.raster.inside_count()
    }

    #[getter]
    fn volume_estimate(&self) -> f64 {
        self.raster.volume_estimate()
    }

    /// What the resolution policy dropped, with a measure bound.
    fn truncation(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        report_to_py(py, &self.raster.truncation)
    }

    /// Boundary distance at the inside cell nearest `point`.
    fn dist_at(&self, point: Vec<f64>) -> PyResult<f64> {
        let cell = self.raster.nearest_inside_cell(&pt(&point)?).map_err(err)?;
        Ok(self.raster.dist[self.raster.grid.idx(cell)])
    }

    /// Solve the quasihyperbolic distance field from `z0`.
    #[pyo3(signature = (z0, stencil = "full"))]
    fn solve(&self, z0: Vec<f64>, stencil: &str) -> PyResult<PyField> {
        let field = solve(&self.raster, &pt(&z0)?, stencil_from(stencil)?).map_err(err)?;
        Ok(PyField { field })
    }

    /// Write the raster in the flat binary format.
    fn save(&self, path: &str) -> PyResult<()> {
        let mut f = std::fs::File::create(path)?;
        qhavg::io::write_raster(&mut f, &self.raster).map_err(err)
    }

    /// Write inside-cell centers and distances as CSV.
    fn save_csv(&self, path: &str) -> PyResult<()> {
        let mut f = std::fs::File::create(path)?;
        qhavg::io::raster_csv(&mut f, &self.raster).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Raster(h={}, dims={:?}, inside={})",
            self.raster.grid.h,
            &self.raster.grid.dims[..self.raster.grid.n],
            self.raster.inside_count()
        )
    }
}

/// A solved quasihyperbolic distance field.
#[pyclass(module = "qhavg_py", name = "Field")]
pub struct PyField {
    field: qhavg::qh::QhField,
}

#[pymethods]
impl PyField {
    /// Field value at the inside cell nearest `point` (inf if unreachable).
    fn value_at(&self, point: Vec<f64>) -> PyResult<f64> {
        self.field.value_at(&pt(&point)?).map_err(err)
    }

    /// Discrete geodesic from the base to `point`, as cell centers.
    fn geodesic(&self, point: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let n = self.field.grid.n;
        let path = self.field.geodesic(&pt(&point)?).map_err(err)?;
        Ok(path.iter().map(|p| p.coords()[..n].to_vec()).collect())
    }

    #[getter]
    fn base_center(&self) -> Vec<f64> {
        self.field.base_center.coords().to_vec()
    }

    #[getter]
    fn n_unreachable(&self) -> usize {
        self.field.n_unreachable
    }

    #[getter]
    fn max_finite(&self) -> f64 {
        self.field.max_finite()
    }

    /// L^s integral of the field: returns a dict with the raw sum, the
    /// normalized mean, the weighted cell mass, and exclusion counts.
    #[pyo3(signature = (s, weight = None))]
    fn ls_integral(
        &self,
        py: Python<'_>,
        s: f64,
        weight: Option<PyWeight>,
    ) -> PyResult<Py<PyAny>> {
        let li = qhavg::integrals::ls_integral(&self.field, s, weight.as_ref().map(|w| &w.weight))
            .map_err(err)?;
        report_to_py(py, &li)
    }

    /// Write the field in the flat binary format.
    fn save(&self, path: &str) -> PyResult<()> {
        let mut f = std::fs::File::create(path)?;
        qhavg::io::write_field(&mut f, &self.field).map_err(err)
    }

    /// Write inside-cell centers and values as CSV.
    fn save_csv(&self, path: &str) -> PyResult<()> {
        let mut f = std::fs::File::create(path)?;
        qhavg::io::field_csv(&mut f, &self.field).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Field(base={:?}, inside={}, unreachable={})",
            &self.field.base_center.coords()[..self.field.grid.n],
            self.field.inside_count(),
            self.field.n_unreachable
        )
    }
}

/// A positive weight for weighted means.
#[pyclass(module = "qhavg_py", name = "Weight", from_py_object)]
#[derive(Clone)]
pub struct PyWeight {
    weight: Weight,
}

#[pymethods]
impl PyWeight {
    /// Constant weight `value > 0`.
    #[staticmethod]
    fn constant(value: f64) -> Self {
        PyWeight {
            weight: Weight::Constant { value },
        }
    }

    /// Power weight `dist(z, center)^beta`.
    #[staticmethod]
    fn power(center: Vec<f64>, beta: f64) -> PyResult<Self> {
        Ok(PyWeight {
            weight: Weight::Power {
                center: pt(&center)?,
                beta,
            },
        })
    }

    fn __repr__(&self) -> String {
        format!("Weight({:?})", self.weight)
    }
}

/// A family of essential tubes with its divergence-series parameters.
#[pyclass(module = "qhavg_py", name = "TubeFamily", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTubeFamily {
    family: tubes::TubeFamily,
}

#[pymethods]
impl PyTubeFamily {
    /// Hall tubes of the rooms-and-halls chain.
    #[staticmethod]
    fn rooms(count: u32) -> Self {
        PyTubeFamily {
            family: tubes::rooms_halls_tubes(count),
        }
    }

    /// Neck tubes of the disk-and-rooms domain.
    #[staticmethod]
    fn disk_rooms(count: u32) -> Self {
        PyTubeFamily {
            family: tubes::disk_rooms_tubes(count),
        }
    }

    /// Dyadic tip tubes of the power cusp.
    #[staticmethod]
    fn cusp(alpha: f64, n: usize, count: u32) -> Self {
        PyTubeFamily {
            family: tubes::cusp_tubes(alpha, n, count),
        }
    }

    /// Generation tubes of the block tower.
    #[staticmethod]
    fn block(n: usize, count: u32) -> Self {
        PyTubeFamily {
            family: tubes::block_tubes(n, count),
        }
    }

    #[getter]
    fn name(&self) -> String {
        self.family.name.clone()
    }

    fn __len__(&self) -> usize {
        self.family.tubes.len()
    }

    /// Classify the divergence series of the family at exponent `s`.
    fn series(&self, py: Python<'_>, s: f64) -> PyResult<Py<PyAny>> {
        let rep = tubes::family_series(&self.family, s, None).map_err(err)?;
        report_to_py(py, &rep)
    }

    /// Verify every tube against the domain and certify that the term series
    /// diverges at `s`. Raises ValueError (certificate refused) otherwise.
    #[pyo3(signature = (domain, s, n_slices = 24, samples_per_slice = 24, tol = 0.05))]
    fn certify(
        &self,
        py: Python<'_>,
        domain: &PyDomain,
        s: f64,
        n_slices: usize,
        samples_per_slice: usize,
        tol: f64,
    ) -> PyResult<Py<PyAny>> {
        let cert = tubes::certify_not_averaging(
            &domain.spec,
            &self.family,
            s,
            n_slices,
            samples_per_slice,
            tol,
        )
        .map_err(err)?;
        let dict = PyDict::new(py);
        dict.set_item("report", report_to_py(py, &cert)?)?;
        dict.set_item("text", tubes::certificate_text(&cert))?;
        dict.into_py_any(py)
    }
}

/// Joint grid-refinement / domain-truncation sweep of the normalized L^s
/// integral, with the growth classification.
#[pyfunction]
fn refinement_sweep(
    py: Python<'_>,
    domain: &PyDomain,
    z0: Vec<f64>,
    s: f64,
    h_list: Vec<f64>,
    truncation_list: Vec<u32>,
) -> PyResult<Py<PyAny>> {
    let rep = qhavg::integrals::refinement_sweep(
        &domain.spec,
        &pt(&z0)?,
        s,
        &h_list,
        &truncation_list,
    )
    .map_err(err)?;
    report_to_py(py, &rep)
}

/// Classify every exponent of `s_grid` and bracket the growth threshold.
#[pyfunction]
fn threshold_scan(
    py: Python<'_>,
    domain: &PyDomain,
    z0: Vec<f64>,
    s_grid: Vec<f64>,
    h_list: Vec<f64>,
    truncation_list: Vec<u32>,
) -> PyResult<Py<PyAny>> {
    let scan = qhavg::integrals::threshold_scan(
        &domain.spec,
        &pt(&z0)?,
        &s_grid,
        &h_list,
        &truncation_list,
    )
    .map_err(err)?;
    report_to_py(py, &scan)
}

/// Oscillation/gradient ratio of the hall test function against its
/// closed-form lower bound.
#[pyfunction]
fn poincare_ratio(py: Python<'_>, j: u32, p: f64, h: f64) -> PyResult<Py<PyAny>> {
    let rep = qhavg::integrals::poincare_ratio(j, p, h).map_err(err)?;
    report_to_py(py, &rep)
}

/// Two-domain union inequalities at one pitch: pointwise sum bound, subset
/// monotonicity, and the averaged chain.
#[pyfunction]
#[pyo3(signature = (domain1, domain2, z0, h, s, weight = None))]
fn union_check(
    py: Python<'_>,
    domain1: &PyDomain,
    domain2: &PyDomain,
    z0: Vec<f64>,
    h: f64,
    s: f64,
    weight: Option<PyWeight>,
) -> PyResult<Py<PyAny>> {
    let rep = qhavg::weights::union_check(
        &domain1.spec,
        &domain2.spec,
        &pt(&z0)?,
        h,
        s,
        weight.as_ref().map(|w| &w.weight),
    )
    .map_err(err)?;
    report_to_py(py, &rep)
}

/// Discrete Hölder comparison of normalized means at exponents `t <= s`.
#[pyfunction]
fn holder_check(
    py: Python<'_>,
    field: &PyField,
    weight: &PyWeight,
    t: f64,
    s: f64,
) -> PyResult<Py<PyAny>> {
    let rep = qhavg::weights::holder_check(&field.field, &weight.weight, t, s).map_err(err)?;
    report_to_py(py, &rep)
}

/// Sampled Muckenhoupt-style product over random balls (seeded).
#[pyfunction]
fn ar_estimate(
    py: Python<'_>,
    weight: &PyWeight,
    raster: &PyRaster,
    r: f64,
    n_balls: usize,
    radius_grid: Vec<f64>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let rep = qhavg::weights::ar_estimate(
        &weight.weight,
        &raster.raster,
        r,
        n_balls,
        &radius_grid,
        seed,
    )
    .map_err(err)?;
    report_to_py(py, &rep)
}

/// Index chain m -> floor(m/2) -> ... -> 1.
#[pyfunction]
fn lambda_chain(m: u64) -> PyResult<Vec<u64>> {
    whitney::lambda_chain(m).map_err(err)
}

/// Upper series for the cusp subdivision: converges exactly below the
/// averaging threshold.
#[pyfunction]
fn cusp_upper_series(
    py: Python<'_>,
    alpha: f64,
    n: usize,
    s: f64,
    j_max: u32,
    m_max: u64,
) -> PyResult<Py<PyAny>> {
    let rep = whitney::cusp_upper_series(alpha, n, s, j_max, m_max).map_err(err)?;
    report_to_py(py, &rep)
}

/// Upper series for the block tower subdivision.
#[pyfunction]
fn block_upper_series(
    py: Python<'_>,
    n: usize,
    s: f64,
    m_max: u64,
    i_max: u32,
) -> PyResult<Py<PyAny>> {
    let rep = whitney::block_upper_series(n, s, m_max, i_max).map_err(err)?;
    report_to_py(py, &rep)
}

/// Chain-of-sets upper bound on k(z, center) in the unit cube.
#[pyfunction]
fn cube_chain_bound(py: Python<'_>, n: usize, z: Vec<f64>) -> PyResult<Py<PyAny>> {
    let chain = whitney::cube_chain(n, &pt(&z)?).map_err(err)?;
    let idx: Vec<usize> = (0..chain.len()).collect();
    let bound = whitney::chain_bound(&chain, &idx).map_err(err)?;
    report_to_py(py, &bound)
}

#[pymodule]
fn qhavg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", qhavg::VERSION)?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyRaster>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyWeight>()?;
    m.add_class::<PyTubeFamily>()?;
    m.add_function(wrap_pyfunction!(refinement_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_scan, m)?)?;
    m.add_function(wrap_pyfunction!(poincare_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(union_check, m)?)?;
    m.add_function(wrap_pyfunction!(holder_check, m)?)?;
    m.add_function(wrap_pyfunction!(ar_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_chain, m)?)?;
    m.add_function(wrap_pyfunction!(cusp_upper_series, m)?)?;
    m.add_function(wrap_pyfunction!(block_upper_series, m)?)?;
    m.add_function(wrap_pyfunction!(cube_chain_bound, m)?)?;
    Ok(())
}
