//! Python bindings: geometry, assignment, MOT records, the tracker,
//! evaluation and the entropy / feature-block diagnostics.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use panotrack_core::assignment::{self, CostMatrix};
use panotrack_core::entropy;
use panotrack_core::metrics::{self, EvalOptions};
use panotrack_core::mot_io::{self, AnnotationRecord, FrameMap};
use panotrack_core::ssm_block;
use panotrack_core::{geometry, Canvas, Detection, Error, Mode, Rect, SequenceMeta, TrackerConfig};

/// `(frame, id, left, top, width, height, confidence, class, visibility)`.
type RecordTuple = (u32, i64, f64, f64, f64, f64, f64, i32, f64);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_tuple(r: &AnnotationRecord) -> RecordTuple {
    (r.frame, r.track_id, r.left, r.top, r.width, r.height, r.confidence, r.class_id, r.visibility)
}

fn from_tuple(t: RecordTuple) -> AnnotationRecord {
    AnnotationRecord {
        frame: t.0,
        track_id: t.1,
        left: t.2,
        top: t.3,
        width: t.4,
        height: t.5,
        confidence: t.6,
        class_id: t.7,
        visibility: t.8,
    }
}

fn meta(width: u32, height: u32, n_frames: u32, panoramic: bool) -> PyResult<SequenceMeta> {
    let m = SequenceMeta {
        name: "python".into(),
        image_width: width,
        image_height: height,
        frame_rate: 1.0,
        n_frames,
        panoramic,
    };
    m.validate().map_err(py_err)?;
    Ok(m)
}

/// Maps `x` into `[0, width)`.
#[pyfunction]
fn wrap_x(x: f64, width: f64) -> PyResult<f64> {
    geometry::wrap_x(x, width).map_err(py_err)
}

/// Shortest signed displacement from `x1` to `x2` on a circle of `width` pixels.
#[pyfunction]
fn angular_delta(x1: f64, x2: f64, width: f64) -> PyResult<f64> {
    geometry::angular_delta(x1, x2, width).map_err(py_err)
}

/// IoU of two `(left, top, width, height)` boxes; wraps at `image_width` when `panoramic`.
#[pyfunction]
#[pyo3(signature = (a, b, image_width, panoramic = true))]
fn pano_iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), image_width: u32, panoramic: bool) -> PyResult<f64> {
    let canvas = Canvas::new(image_width, 1, panoramic).map_err(py_err)?;
    let ra = Rect::from_ltwh(a.0, a.1, a.2, a.3);
    let rb = Rect::from_ltwh(b.0, b.1, b.2, b.3);
    if !(ra.w > 0.0 && ra.h > 0.0 && rb.w > 0.0 && rb.h > 0.0) {
        return Err(PyValueError::new_err("boxes need positive width and height"));
    }
    Ok(canvas.iou(&ra, &rb))
}

/// Minimum-cost assignment on a rectangular matrix. `gate[i][j] = False`
/// forbids a pair; the result has maximum cardinality among admissible pairs.
#[pyfunction]
#[pyo3(signature = (cost, gate = None))]
fn hungarian(cost: Vec<Vec<f64>>, gate: Option<Vec<Vec<bool>>>) -> PyResult<Vec<(usize, usize)>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("cost rows differ in length"));
    }
    let values: Vec<f64> = cost.into_iter().flatten().collect();
    let m = match gate {
        None => CostMatrix::new(rows, cols, values),
        Some(g) => {
            if g.len() != rows || g.iter().any(|r| r.len() != cols) {
                return Err(PyValueError::new_err("gate shape differs from cost shape"));
            }
            CostMatrix::with_gate(rows, cols, values, g.into_iter().flatten().collect())
        }
    }
    .map_err(py_err)?;
    Ok(assignment::hungarian(&m))
}

/// Parses one 9-field MOT line.
#[pyfunction]
fn parse_mot_line(line: &str) -> PyResult<RecordTuple> {
    mot_io::parse_mot_line(line, 1).map(|r| to_tuple(&r)).map_err(py_err)
}

/// Formats a record the way tracker output is written.
#[pyfunction]
fn format_mot_record(record: RecordTuple) -> String {
    mot_io::format_record(&from_tuple(record))
}

/// Shannon entropy in nats of a probability vector.
#[pyfunction]
fn shannon_entropy(p: Vec<f64>) -> PyResult<f64> {
    entropy::shannon_entropy(&p).map_err(py_err)
}

/// Runs the feature-block invariant suite: `[(name, passed, detail)]`.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn dssm_check(seed: u64) -> PyResult<Vec<(String, bool, String)>> {
    Ok(ssm_block::check_invariants(seed)
        .map_err(py_err)?
        .into_iter()
        .map(|o| (o.name, o.passed, o.detail))
        .collect())
}

fn frame_map(records: Vec<RecordTuple>) -> FrameMap {
    let mut map = FrameMap::new();
    for t in records {
        map.entry(t.0).or_default().push(from_tuple(t));
    }
    map
}

/// Scores predicted records against ground truth; fractions in `[0, 1]`.
#[pyfunction]
#[pyo3(signature = (gt, pred, width, height, n_frames, panoramic = true, iou_threshold = 0.5))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    gt: Vec<RecordTuple>,
    pred: Vec<RecordTuple>,
    width: u32,
    height: u32,
    n_frames: u32,
    panoramic: bool,
    iou_threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = meta(width, height, n_frames, panoramic)?;
    let gt = mot_io::ground_truth_from_records(frame_map(gt).into_values().flatten().collect(), &m).map_err(py_err)?;
    let pred = mot_io::tracks_from_records(frame_map(pred).into_values().flatten().collect(), &m).map_err(py_err)?;
    let opts = EvalOptions {
        iou_threshold,
        ..EvalOptions::default()
    };
    opts.validate().map_err(py_err)?;
    let r = metrics::evaluate(&gt, &pred, &m, &opts).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("hota", r.hota)?;
    d.set_item("deta", r.deta)?;
    d.set_item("assa", r.assa)?;
    d.set_item("loca", r.loca)?;
    d.set_item("mota", r.mota)?;
    d.set_item("idf1", r.idf1)?;
    d.set_item("ospa", r.ospa)?;
    d.set_item("tp", r.tp)?;
    d.set_item("fp", r.fp)?;
    d.set_item("fn", r.fn_)?;
    d.set_item("idsw", r.idsw)?;
    Ok(d)
}

/// Frame-by-frame tracker.
#[pyclass(name = "Tracker")]
struct PyTracker {
    inner: panotrack_core::Tracker,
    canvas: Canvas,
}

#[pymethods]
impl PyTracker {
    #[new]
    #[pyo3(signature = (width, height, panoramic = true, mode = "e2e", tau_init = 0.55, tau_update = 0.45,
        noise = 0.5, gate = 100.0, max_age = 1, min_hits = 1, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        width: u32,
        height: u32,
        panoramic: bool,
        mode: &str,
        tau_init: f64,
        tau_update: f64,
        noise: f64,
        gate: f64,
        max_age: u32,
        min_hits: u32,
        seed: u64,
    ) -> PyResult<Self> {
        let canvas = Canvas::new(width, height, panoramic).map_err(py_err)?;
        let config = TrackerConfig {
            mode: mode.parse::<Mode>().map_err(py_err)?,
            tau_init,
            tau_update,
            noise_scale: noise,
            gate_radius: gate,
            max_age,
            min_hits,
            rng_seed: seed,
            ..TrackerConfig::default()
        };
        let inner = panotrack_core::Tracker::new(config, canvas).map_err(py_err)?;
        Ok(PyTracker { inner, canvas })
    }

    /// Processes one frame of `(left, top, width, height, score)` detections
    /// and returns the emitted records.
    fn step(&mut self, frame: u32, detections: Vec<(f64, f64, f64, f64, f64)>) -> PyResult<Vec<RecordTuple>> {
        let dets: Vec<Detection> = detections
            .into_iter()
            .map(|(l, t, w, h, s)| Detection::new(self.canvas.normalize(Rect::from_ltwh(l, t, w, h)), s, 1))
            .collect();
        let out = self.inner.process_frame(frame, &dets).map_err(py_err)?;
        Ok(out.iter().map(to_tuple).collect())
    }

    /// Ids of the tracks the tracker currently holds (active or lost).
    fn track_ids(&self) -> Vec<u64> {
        self.inner.tracks().iter().map(|t| t.track_id).collect()
    }
}

#[pymodule]
fn panotrack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(wrap_x, m)?)?;
    m.add_function(wrap_pyfunction!(angular_delta, m)?)?;
    m.add_function(wrap_pyfunction!(pano_iou, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(parse_mot_line, m)?)?;
    m.add_function(wrap_pyfunction!(format_mot_record, m)?)?;
    m.add_function(wrap_pyfunction!(shannon_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(dssm_check, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<PyTracker>()?;
    Ok(())
}
