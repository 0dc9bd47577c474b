//! Track priors fed back into the next frame's decoding.
//!
//! Every live track is turned into a [`TrackPrior`]: a 128-d feature vector and
//! a 128-d anchor embedding, both optionally perturbed with seeded Gaussian
//! noise. The decoder here is geometric: each prior claims at most one
//! detection inside its spatial gate, resolved jointly by optimal assignment.
//! Claimed detections inherit the prior's identity, the rest stay free.
//!
//! Anchor layout: dims 0–3 hold `cx/W, cy/H, w/W, h/H`, dims 4–127 are zero
//! before noise. Feature layout: dims 0–7 hold the normalised motion state
//! (position and per-frame rates), dim 8 the last confidence, the rest zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assignment::{hungarian, CostMatrix};
use crate::entropy::GatedCandidates;
use crate::error::{Error, Result};
use crate::geometry::{Canvas, Rect};
use crate::motion::MIN_EXTENT;
use crate::mot_io::{AnnotationRecord, DETECTION_ID};

pub const EMBED_DIM: usize = 128;

/// Default anchor noise, in units of the box's own width/height.
pub const DEFAULT_NOISE_SCALE: f64 = 0.5;

/// One detection in a frame. `track_id` is [`DETECTION_ID`] until a prior claims it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub rect: Rect,
    pub score: f64,
    pub class_id: i32,
    pub track_id: i64,
}

impl Detection {
    pub fn new(rect: Rect, score: f64, class_id: i32) -> Self {
        Detection {
            rect,
            score,
            class_id,
            track_id: DETECTION_ID,
        }
    }

    pub fn from_record(r: &AnnotationRecord, canvas: &Canvas) -> Self {
        Detection::new(canvas.normalize(r.rect()), r.confidence, r.class_id)
    }

    pub fn is_bound(&self) -> bool {
        self.track_id != DETECTION_ID
    }
}

/// What a prior is built from: the state of a live track, advanced to the
/// frame being decoded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSource {
    pub track_id: u64,
    pub rect: Rect,
    /// Per-frame rates of `(cx, cy, w, h)`.
    pub velocity: [f64; 4],
    pub score: f64,
    pub class_id: i32,
}

/// Noise applied when building priors. Anchor noise is measured in units of
/// the box's half-extent: at scale `λ` the center moves by `λ·w/2`
/// horizontally and `λ·h/2` vertically per standard deviation, and the size
/// likewise. The feature noise is absolute and defaults to the anchor scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorNoise {
    pub anchor_scale: f64,
    pub feature_scale: Option<f64>,
}

impl PriorNoise {
    pub fn new(anchor_scale: f64) -> Self {
        PriorNoise {
            anchor_scale,
            feature_scale: None,
        }
    }

    pub fn none() -> Self {
        PriorNoise::new(0.0)
    }

    pub fn feature_scale(&self) -> f64 {
        self.feature_scale.unwrap_or(self.anchor_scale)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64| s >= 0.0 && s.is_finite();
        if !ok(self.anchor_scale) || !ok(self.feature_scale()) {
            return Err(Error::argument(format!(
                "noise scales must be finite and non-negative, got {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for PriorNoise {
    fn default() -> Self {
        PriorNoise::new(DEFAULT_NOISE_SCALE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPrior {
    pub track_id: u64,
    pub class_id: i32,
    pub score: f64,
    pub feature: [f64; EMBED_DIM],
    pub anchor: [f64; EMBED_DIM],
}

impl TrackPrior {
    /// Box encoded in anchor dims 0–3, mapped back onto the canvas.
    pub fn anchor_rect(&self, canvas: &Canvas) -> Rect {
        let (w_img, h_img) = (canvas.width as f64, canvas.height as f64);
        let mut w = (self.anchor[2] * w_img).abs().max(MIN_EXTENT);
        if canvas.panoramic {
            w = w.min(w_img);
        }
        Rect::new(
            canvas.wrap_x(self.anchor[0] * w_img),
            self.anchor[1] * h_img,
            w,
            (self.anchor[3] * h_img).abs().max(MIN_EXTENT),
        )
    }
}

/// Noise-free anchor for a box.
pub fn encode_anchor(rect: &Rect, canvas: &Canvas) -> [f64; EMBED_DIM] {
    let (w_img, h_img) = (canvas.width as f64, canvas.height as f64);
    let mut a = [0.0; EMBED_DIM];
    a[0] = rect.cx / w_img;
    a[1] = rect.cy / h_img;
    a[2] = rect.w / w_img;
    a[3] = rect.h / h_img;
    a
}

fn encode_feature(src: &PriorSource, canvas: &Canvas) -> [f64; EMBED_DIM] {
    let (w_img, h_img) = (canvas.width as f64, canvas.height as f64);
    let norm = [w_img, h_img, w_img, h_img];
    let mut f = [0.0; EMBED_DIM];
    let r = &src.rect;
    for (k, v) in [r.cx, r.cy, r.w, r.h].into_iter().enumerate() {
        f[k] = v / norm[k];
        f[k + 4] = src.velocity[k] / norm[k];
    }
    f[8] = src.score;
    f
}

/// Builds one prior per source, drawing noise from `rng` in source order.
pub fn make_priors_with_rng<R: Rng + ?Sized>(
    sources: &[PriorSource],
    canvas: &Canvas,
    noise: &PriorNoise,
    rng: &mut R,
) -> Result<Vec<TrackPrior>> {
    noise.validate()?;
    let (w_img, h_img) = (canvas.width as f64, canvas.height as f64);
    let feature_scale = noise.feature_scale();
    Ok(sources
        .iter()
        .map(|src| {
            let mut anchor = encode_anchor(&src.rect, canvas);
            let mut feature = encode_feature(src, canvas);
            if noise.anchor_scale > 0.0 {
                let (hw, hh) = (src.rect.w / (2.0 * w_img), src.rect.h / (2.0 * h_img));
                let rel = [hw, hh, hw, hh];
                for (k, unit) in rel.iter().enumerate() {
                    let eps: f64 = rng.sample(StandardNormal);
                    anchor[k] += noise.anchor_scale * unit * eps;
                }
            }
            if feature_scale > 0.0 {
                for v in feature.iter_mut() {
                    let eps: f64 = rng.sample(StandardNormal);
                    *v += feature_scale * eps;
                }
            }
            TrackPrior {
                track_id: src.track_id,
                class_id: src.class_id,
                score: src.score,
                feature,
                anchor,
            }
        })
        .collect())
}

/// Seeded convenience wrapper around [`make_priors_with_rng`].
pub fn make_priors(sources: &[PriorSource], canvas: &Canvas, noise: &PriorNoise, seed: u64) -> Result<Vec<TrackPrior>> {
    make_priors_with_rng(sources, canvas, noise, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Output of the prior-guided decoder.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Decoded {
    /// Detections claimed by a prior, carrying its track id.
    pub bound: Vec<Detection>,
    /// Unclaimed detections, track id [`DETECTION_ID`].
    pub free: Vec<Detection>,
    /// `(prior index, detection index)` for every claim.
    pub claims: Vec<(usize, usize)>,
}

/// Splits `dets` into identity-bound and free detections.
///
/// A prior may claim a detection of its own class whose center lies within
/// `gate_radius` pixels (wrap-aware) of the anchor center. Claims are resolved
/// by minimum [`decode_cost`] assignment; input order is preserved in both outputs.
pub fn decode_with_priors(priors: &[TrackPrior], dets: &[Detection], canvas: &Canvas, gate_radius: f64) -> Result<Decoded> {
    if !(gate_radius > 0.0) {
        return Err(Error::argument(format!("gate radius must be positive, got {gate_radius}")));
    }
    let anchors: Vec<Rect> = priors.iter().map(|p| p.anchor_rect(canvas)).collect();
    let mut values = Vec::with_capacity(priors.len() * dets.len());
    let mut gate = Vec::with_capacity(priors.len() * dets.len());
    for (p, a) in priors.iter().zip(&anchors) {
        for d in dets {
            values.push(decode_cost(canvas, a, &d.rect));
            gate.push(p.class_id == d.class_id && canvas.center_distance(a, &d.rect) <= gate_radius);
        }
    }
    let cost = CostMatrix::with_gate(priors.len(), dets.len(), values, gate)?;
    let claims = hungarian(&cost);

    let mut owner = vec![None; dets.len()];
    for &(p, d) in &claims {
        owner[d] = Some(priors[p].track_id);
    }
    let mut out = Decoded {
        claims,
        ..Decoded::default()
    };
    for (d, who) in dets.iter().zip(owner) {
        match who {
            Some(id) => out.bound.push(Detection {
                track_id: id as i64,
                ..*d
            }),
            None => out.free.push(Detection {
                track_id: DETECTION_ID,
                ..*d
            }),
        }
    }
    Ok(out)
}

/// Distance-IoU cost `1 - IoU + ρ²/c²`, where `ρ` is the (wrap-aware) center
/// distance and `c` the diagonal of the smallest box enclosing both. Unlike
/// plain `1 - IoU` it still ranks candidates that do not overlap at all.
pub fn decode_cost(canvas: &Canvas, a: &Rect, b: &Rect) -> f64 {
    let dx = canvas.delta_x(a.cx, b.cx);
    let dy = b.cy - a.cy;
    let bx = a.cx + dx;
    let cw = (a.cx + a.w / 2.0).max(bx + b.w / 2.0) - (a.cx - a.w / 2.0).min(bx - b.w / 2.0);
    let ch = (a.cy + a.h / 2.0).max(b.cy + b.h / 2.0) - (a.cy - a.h / 2.0).min(b.cy - b.h / 2.0);
    1.0 - canvas.iou(a, b) + (dx * dx + dy * dy) / (cw * cw + ch * ch)
}

/// Numerically stable softmax of `-costs` at temperature 1.
pub fn softmax_neg(costs: &[f64]) -> Vec<f64> {
    let Some(min) = costs.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let e: Vec<f64> = costs.iter().map(|c| (-(c - min)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Candidate distribution of every prior over this frame's detections, with
/// the spatial gate marked. Priors with nothing to choose from are skipped.
pub fn candidate_distributions(priors: &[TrackPrior], dets: &[Detection], canvas: &Canvas, gate_radius: f64) -> Vec<GatedCandidates> {
    if dets.is_empty() {
        return Vec::new();
    }
    priors
        .iter()
        .map(|p| {
            let a = p.anchor_rect(canvas);
            let costs: Vec<f64> = dets.iter().map(|d| decode_cost(canvas, &a, &d.rect)).collect();
            let in_gate = dets
                .iter()
                .map(|d| canvas.center_distance(&a, &d.rect) <= gate_radius)
                .collect();
            GatedCandidates {
                probs: softmax_neg(&costs),
                in_gate,
            }
        })
        .collect()
}
