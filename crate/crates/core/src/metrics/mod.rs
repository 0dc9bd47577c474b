//! Tracking evaluation: HOTA, CLEAR MOTA, IDF1 and track-level OSPA.
//!
//! The computations follow the reference TrackEval implementations closely
//! (same matching rules, same epsilon handling). Two departures are
//! deliberate: IoU is wrap-aware when the sequence is panoramic, and an empty
//! prediction set evaluated against empty ground truth scores as perfect
//! rather than zero.
//!
//! Multi-sequence results are pooled by summing counts before forming ratios.

mod clear;
mod hota;
mod identity;
mod ospa;
pub mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_matching;
use crate::error::{Error, Result};
use crate::geometry::{Canvas, Rect};
use crate::mot_io::{AnnotationRecord, FrameMap, SequenceMeta};

pub use clear::ClearCounts;
pub use hota::{alpha, HotaCounts, N_ALPHAS};
pub use identity::IdentityCounts;
pub use ospa::OspaAccumulator;

/// Float tolerance used around thresholds, as in the reference code.
pub(crate) const EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// IoU threshold of CLEAR, IDF1 and ignore-region matching.
    pub iou_threshold: f64,
    pub ospa_cutoff: f64,
    pub ospa_order: f64,
    /// Drop boxes (ground truth and predictions) smaller than this many pixels.
    pub min_area: Option<f64>,
    /// Override the sequence's panoramic flag.
    pub panoramic: Option<bool>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            iou_threshold: 0.5,
            ospa_cutoff: 1.0,
            ospa_order: 1.0,
            min_area: None,
            panoramic: None,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::argument(format!("IoU threshold {} outside (0, 1]", self.iou_threshold)));
        }
        if !(self.ospa_cutoff > 0.0 && self.ospa_cutoff.is_finite()) || !(self.ospa_order >= 1.0 && self.ospa_order.is_finite()) {
            return Err(Error::argument("OSPA needs a positive cutoff and an order of at least 1"));
        }
        Ok(())
    }
}

/// One optimal per-frame matching.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    /// `(gt index, prediction index, IoU)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub false_negatives: usize,
    pub false_positives: usize,
}

impl FrameMatch {
    pub fn total_similarity(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }
}

/// Maximum-total-IoU matching among pairs with IoU ≥ `threshold`.
pub fn match_frame(canvas: &Canvas, gt: &[Rect], pred: &[Rect], threshold: f64) -> FrameMatch {
    let sim: Vec<f64> = gt.iter().flat_map(|g| pred.iter().map(move |p| canvas.iou(g, p))).collect();
    let admissible: Vec<bool> = sim.iter().map(|s| *s >= threshold - EPS).collect();
    let pairs: Vec<(usize, usize, f64)> = max_weight_matching(gt.len(), pred.len(), &sim, &admissible)
        .into_iter()
        .map(|(i, j)| (i, j, sim[i * pred.len() + j]))
        .collect();
    FrameMatch {
        false_negatives: gt.len() - pairs.len(),
        false_positives: pred.len() - pairs.len(),
        pairs,
    }
}

/// One frame after preprocessing, with identities mapped to dense indices.
#[derive(Debug, Clone, Default)]
pub(crate) struct FrameData {
    pub gt: Vec<usize>,
    pub tr: Vec<usize>,
    /// Row-major `gt × tr` IoU.
    pub sim: Vec<f64>,
}

impl FrameData {
    pub fn sim(&self, i: usize, j: usize) -> f64 {
        self.sim[i * self.tr.len() + j]
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Prepared {
    pub frames: Vec<FrameData>,
    pub n_gt_ids: usize,
    pub n_tr_ids: usize,
}

fn check_frames(map: &FrameMap, meta: &SequenceMeta, what: &str) -> Result<()> {
    for (&f, recs) in map {
        if f == 0 || f > meta.n_frames {
            return Err(Error::validation(format!(
                "{}: {what} frame {f} outside 1..={}",
                meta.name, meta.n_frames
            )));
        }
        let mut ids: Vec<i64> = recs.iter().map(|r| r.track_id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(format!(
                "{}: {what} id {} repeated in frame {f}",
                meta.name, w[0]
            )));
        }
    }
    Ok(())
}

fn iou_matrix(canvas: &Canvas, gt: &[&AnnotationRecord], tr: &[&AnnotationRecord]) -> Vec<f64> {
    gt.iter()
        .flat_map(|g| tr.iter().map(move |t| canvas.iou(&canvas.normalize(g.rect()), &canvas.normalize(t.rect()))))
        .collect()
}

/// Removes predictions that match ignored ground truth, then the ignored
/// ground truth itself, and maps identities to dense indices.
pub(crate) fn prepare(gt: &FrameMap, pred: &FrameMap, meta: &SequenceMeta, canvas: &Canvas, opts: &EvalOptions) -> Result<Prepared> {
    check_frames(gt, meta, "ground-truth")?;
    check_frames(pred, meta, "prediction")?;
    let keep = |r: &&AnnotationRecord| opts.min_area.is_none_or(|a| !r.is_small(a));
    let empty = Vec::new();
    let frames: Vec<u32> = gt.keys().chain(pred.keys()).copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();

    let mut kept: Vec<(Vec<&AnnotationRecord>, Vec<&AnnotationRecord>)> = Vec::with_capacity(frames.len());
    for f in &frames {
        let g: Vec<&AnnotationRecord> = gt.get(f).unwrap_or(&empty).iter().filter(keep).collect();
        let t: Vec<&AnnotationRecord> = pred.get(f).unwrap_or(&empty).iter().filter(keep).collect();
        let mut drop_tr = vec![false; t.len()];
        if g.iter().any(|r| r.is_ignored()) {
            let sim = iou_matrix(canvas, &g, &t);
            let admissible: Vec<bool> = sim.iter().map(|s| *s >= opts.iou_threshold - EPS).collect();
            for (i, j) in max_weight_matching(g.len(), t.len(), &sim, &admissible) {
                if g[i].is_ignored() {
                    drop_tr[j] = true;
                }
            }
        }
        let g: Vec<&AnnotationRecord> = g.into_iter().filter(|r| !r.is_ignored()).collect();
        let t: Vec<&AnnotationRecord> = t.into_iter().zip(drop_tr).filter(|(_, d)| !d).map(|(r, _)| r).collect();
        kept.push((g, t));
    }

    let index = |ids: &mut dyn Iterator<Item = i64>| -> BTreeMap<i64, usize> {
        let mut m: BTreeMap<i64, usize> = ids.map(|i| (i, 0)).collect();
        for (k, v) in m.values_mut().enumerate() {
            *v = k;
        }
        m
    };
    let gt_index = index(&mut kept.iter().flat_map(|(g, _)| g.iter().map(|r| r.track_id)));
    let tr_index = index(&mut kept.iter().flat_map(|(_, t)| t.iter().map(|r| r.track_id)));

    let frames = kept
        .into_iter()
        .map(|(g, t)| FrameData {
            sim: iou_matrix(canvas, &g, &t),
            gt: g.iter().map(|r| gt_index[&r.track_id]).collect(),
            tr: t.iter().map(|r| tr_index[&r.track_id]).collect(),
        })
        .collect();
    Ok(Prepared {
        frames,
        n_gt_ids: gt_index.len(),
        n_tr_ids: tr_index.len(),
    })
}

/// Raw counts for one sequence (or a pool of sequences).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub hota: HotaCounts,
    pub clear: ClearCounts,
    pub identity: IdentityCounts,
    pub ospa: OspaAccumulator,
}

impl EvalCounts {
    pub fn empty(opts: &EvalOptions) -> Self {
        EvalCounts {
            hota: HotaCounts::default(),
            clear: ClearCounts::default(),
            identity: IdentityCounts::default(),
            ospa: OspaAccumulator::new(opts.ospa_cutoff, opts.ospa_order),
        }
    }

    pub fn add(&mut self, other: &EvalCounts) {
        self.hota.add(&other.hota);
        self.clear.add(&other.clear);
        self.identity.add(&other.identity);
        self.ospa.add(&other.ospa);
    }

    pub fn result(&self) -> EvalResult {
        EvalResult {
            hota: self.hota.hota(),
            deta: self.hota.deta(),
            assa: self.hota.assa(),
            loca: self.hota.loca(),
            mota: self.clear.mota(),
            idf1: self.identity.idf1(),
            ospa: self.ospa.value(),
            tp: self.clear.tp,
            fp: self.clear.fp,
            fn_: self.clear.fn_,
            idsw: self.clear.idsw,
        }
    }
}

/// Headline numbers as fractions in `[0, 1]` (MOTA may be negative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub mota: f64,
    pub idf1: f64,
    pub ospa: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub idsw: u64,
}

/// Counts for one sequence.
pub fn evaluate_counts(gt: &FrameMap, pred: &FrameMap, meta: &SequenceMeta, opts: &EvalOptions) -> Result<EvalCounts> {
    opts.validate()?;
    let canvas = meta.canvas_with(opts.panoramic.unwrap_or(meta.panoramic));
    let data = prepare(gt, pred, meta, &canvas, opts)?;
    Ok(EvalCounts {
        hota: hota::compute(&data),
        clear: clear::compute(&data, opts.iou_threshold),
        identity: identity::compute(&data, opts.iou_threshold),
        ospa: ospa::compute(&data, opts.ospa_cutoff, opts.ospa_order),
    })
}

pub fn evaluate(gt: &FrameMap, pred: &FrameMap, meta: &SequenceMeta, opts: &EvalOptions) -> Result<EvalResult> {
    Ok(evaluate_counts(gt, pred, meta, opts)?.result())
}

/// Pools per-sequence counts into one aggregate.
pub fn pool<'a, I: IntoIterator<Item = &'a EvalCounts>>(counts: I, opts: &EvalOptions) -> EvalCounts {
    let mut total = EvalCounts::empty(opts);
    for c in counts {
        total.add(c);
    }
    total
}
