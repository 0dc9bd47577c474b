//! Track lifecycle: update, initialize, delete.
//!
//! Each frame, live tracks are predicted, turned into priors and used to split
//! the frame's detections into identity-bound (`D_F`) and free (`D_L`) sets.
//! Two lifecycle policies consume that split:
//!
//! * [`Mode::E2e`] is purely threshold-driven: a bound detection scoring above
//!   `tau_update` updates its track, a free detection above `tau_init` starts a
//!   new one, and everything else takes the delete path.
//! * [`Mode::Da`] re-runs an IoU assignment between predicted tracks and the
//!   detections not already (confidently) bound, in the style of SORT/ByteTrack.
//!
//! Tracks missing for `max_age` consecutive frames are removed. With
//! `max_age = 1` a track disappears the first frame it is not updated.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{cascade_match, iou_cost_matrix, DEFAULT_GATE_THRESHOLD};
use crate::entropy::GatedCandidates;
use crate::error::{Error, Result};
pub use crate::feedback::Detection;
use crate::feedback::{
    candidate_distributions, decode_with_priors, make_priors_with_rng, PriorNoise, PriorSource, DEFAULT_NOISE_SCALE,
};
use crate::geometry::{Canvas, Rect};
use crate::mot_io::{AnnotationRecord, FrameMap};
use crate::motion::{KalmanState, MotionConfig};

pub const DEFAULT_TAU_INIT: f64 = 0.55;
pub const DEFAULT_TAU_UPDATE: f64 = 0.45;
pub const DEFAULT_GATE_RADIUS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    E2e,
    Da,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e2e" => Ok(Mode::E2e),
            "da" => Ok(Mode::Da),
            _ => Err(Error::argument(format!("unknown mode '{s}' (expected e2e or da)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::E2e => "e2e",
            Mode::Da => "da",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Active,
    Lost,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub mode: Mode,
    pub tau_init: f64,
    pub tau_update: f64,
    /// Spatial gate of the prior decoder, in pixels. May be infinite
    /// (serialized as the string `"inf"`, which JSON has no number for).
    #[serde(with = "radius_serde")]
    pub gate_radius: f64,
    pub noise_scale: f64,
    /// Feature noise; defaults to `noise_scale`.
    pub feature_noise_scale: Option<f64>,
    pub max_age: u32,
    pub min_hits: u32,
    /// Detections scoring at least this are matched first in `da` mode.
    pub conf_split: f64,
    /// In `da` mode, discard decoder bindings and re-associate everything.
    pub da_rebind: bool,
    /// Largest `1 - IoU` accepted by the `da` association.
    pub iou_gate: f64,
    /// Fill frames a track was missed in once it is re-matched.
    pub interpolate_gaps: bool,
    pub rng_seed: u64,
    pub motion: MotionConfig,
}

mod radius_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            mode: Mode::E2e,
            tau_init: DEFAULT_TAU_INIT,
            tau_update: DEFAULT_TAU_UPDATE,
            gate_radius: DEFAULT_GATE_RADIUS,
            noise_scale: DEFAULT_NOISE_SCALE,
            feature_noise_scale: None,
            max_age: 1,
            min_hits: 1,
            conf_split: 0.0,
            da_rebind: false,
            iou_gate: DEFAULT_GATE_THRESHOLD,
            interpolate_gaps: true,
            rng_seed: 0,
            motion: MotionConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn noise(&self) -> PriorNoise {
        PriorNoise {
            anchor_scale: self.noise_scale,
            feature_scale: self.feature_noise_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::argument(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("tau_init", self.tau_init)?;
        unit("tau_update", self.tau_update)?;
        unit("conf_split", self.conf_split)?;
        unit("iou_gate", self.iou_gate)?;
        if !(self.gate_radius > 0.0) {
            return Err(Error::argument(format!("gate_radius must be positive, got {}", self.gate_radius)));
        }
        if self.max_age < 1 || self.min_hits < 1 {
            return Err(Error::argument("max_age and min_hits must be at least 1"));
        }
        self.noise().validate()?;
        self.motion.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u64,
    pub kstate: KalmanState,
    pub score: f64,
    pub class_id: i32,
    /// Frames since initialisation, counting the first.
    pub age: u32,
    pub hits: u32,
    pub time_since_update: u32,
    pub status: TrackStatus,
    /// Set when a bound detection fell below `tau_update`; the track no longer
    /// produces a prior and can only reappear as a new track.
    pub feedback_suspended: bool,
    last_emitted: Option<(u32, Rect)>,
}

impl Track {
    fn prior_source(&self) -> PriorSource {
        PriorSource {
            track_id: self.track_id,
            rect: self.kstate.rect(),
            velocity: self.kstate.velocity(),
            score: self.score,
            class_id: self.class_id,
        }
    }

    pub fn rect(&self) -> Rect {
        self.kstate.rect()
    }
}

/// Online tracker for one sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    canvas: Canvas,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
    rng: ChaCha8Rng,
    candidates: Option<Vec<Vec<GatedCandidates>>>,
}

impl Tracker {
    pub fn new(config: TrackerConfig, canvas: Canvas) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        Ok(Tracker {
            config,
            canvas,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            rng,
            candidates: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn canvas(&self) -> &Canvas {
        &self.canvas
    }

    /// Live (not yet removed) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().find(|t| t.track_id == id)
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.last_frame
    }

    /// Starts recording each frame's candidate distributions for entropy reports.
    pub fn record_candidates(&mut self) {
        self.candidates.get_or_insert_with(Vec::new);
    }

    pub fn take_candidates(&mut self) -> Vec<Vec<GatedCandidates>> {
        self.candidates.take().unwrap_or_default()
    }

    /// Runs one frame through prior construction, decoding and the configured
    /// lifecycle. Skipped frame numbers are processed as empty frames first.
    pub fn process_frame(&mut self, frame: u32, dets: &[Detection]) -> Result<Vec<AnnotationRecord>> {
        self.check_order(frame)?;
        let mut out = Vec::new();
        if let Some(last) = self.last_frame {
            for f in last + 1..frame {
                out.extend(self.process_one(f, &[])?);
            }
        }
        out.extend(self.process_one(frame, dets)?);
        Ok(out)
    }

    fn process_one(&mut self, frame: u32, dets: &[Detection]) -> Result<Vec<AnnotationRecord>> {
        self.begin_frame(frame)?;
        let dets: Vec<Detection> = dets
            .iter()
            .map(|d| Detection {
                rect: self.canvas.normalize(d.rect),
                ..*d
            })
            .collect();
        let sources: Vec<PriorSource> = self
            .tracks
            .iter()
            .filter(|t| !t.feedback_suspended)
            .map(Track::prior_source)
            .collect();
        let priors = make_priors_with_rng(&sources, &self.canvas, &self.config.noise(), &mut self.rng)?;
        if let Some(frames) = self.candidates.as_mut() {
            frames.push(candidate_distributions(&priors, &dets, &self.canvas, self.config.gate_radius));
        }
        let decoded = decode_with_priors(&priors, &dets, &self.canvas, self.config.gate_radius)?;
        match self.config.mode {
            Mode::E2e => self.apply_e2e(frame, &decoded.bound, &decoded.free),
            Mode::Da => self.apply_da(frame, &decoded.bound, &decoded.free),
        }
    }

    /// Threshold lifecycle on an explicit `D_F`/`D_L` split (tracks are
    /// predicted to `frame` first).
    pub fn step_e2e(&mut self, frame: u32, d_f: &[Detection], d_l: &[Detection]) -> Result<Vec<AnnotationRecord>> {
        self.check_order(frame)?;
        self.begin_frame(frame)?;
        self.apply_e2e(frame, d_f, d_l)
    }

    /// Assignment lifecycle; bound detections in `dets` keep their id unless
    /// rebinding is enabled or the track no longer overlaps them.
    pub fn step_da(&mut self, frame: u32, dets: &[Detection]) -> Result<Vec<AnnotationRecord>> {
        self.check_order(frame)?;
        self.begin_frame(frame)?;
        let (d_f, d_l): (Vec<Detection>, Vec<Detection>) = dets.iter().partition(|d| d.is_bound());
        self.apply_da(frame, &d_f, &d_l)
    }

    fn check_order(&self, frame: u32) -> Result<()> {
        if frame == 0 {
            return Err(Error::validation("frame numbers start at 1"));
        }
        match self.last_frame {
            Some(last) if frame <= last => Err(Error::validation(format!(
                "frame {frame} arrived after frame {last}; frames must be strictly increasing"
            ))),
            _ => Ok(()),
        }
    }

    fn begin_frame(&mut self, frame: u32) -> Result<()> {
        self.last_frame = Some(frame);
        for t in &mut self.tracks {
            t.kstate = t.kstate.predict();
            t.age += 1;
            t.time_since_update += 1;
        }
        Ok(())
    }

    fn index_of(&self, d: &Detection) -> Result<usize> {
        let found = u64::try_from(d.track_id)
            .ok()
            .and_then(|id| self.tracks.iter().position(|t| t.track_id == id));
        found.ok_or_else(|| {
            Error::Consistency(format!(
                "bound detection refers to track {} which is not live",
                d.track_id
            ))
        })
    }

    fn apply_e2e(&mut self, frame: u32, d_f: &[Detection], d_l: &[Detection]) -> Result<Vec<AnnotationRecord>> {
        let mut out = Vec::new();
        let mut seen = vec![false; self.tracks.len()];
        for d in d_f {
            let i = self.index_of(d)?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Consistency(format!("track {} bound twice in frame {frame}", d.track_id)));
            }
            if d.score > self.config.tau_update {
                self.update_track(i, frame, d, &mut out)?;
            } else {
                self.tracks[i].feedback_suspended = true;
            }
        }
        let tau_init = self.config.tau_init;
        for d in d_l.iter().filter(|d| d.score > tau_init) {
            self.init_track(frame, d, &mut out)?;
        }
        self.finish_frame();
        Ok(out)
    }

    fn apply_da(&mut self, frame: u32, d_f: &[Detection], d_l: &[Detection]) -> Result<Vec<AnnotationRecord>> {
        let mut out = Vec::new();
        let mut track_taken = vec![false; self.tracks.len()];
        let mut pool: Vec<Detection> = Vec::with_capacity(d_f.len() + d_l.len());
        for d in d_f {
            let i = self.index_of(d)?;
            let keep = !self.config.da_rebind
                && !track_taken[i]
                && self.tracks[i].class_id == d.class_id
                && 1.0 - self.canvas.iou(&self.tracks[i].rect(), &d.rect) <= self.config.iou_gate;
            if keep {
                track_taken[i] = true;
                self.update_track(i, frame, d, &mut out)?;
            } else {
                pool.push(Detection {
                    track_id: crate::mot_io::DETECTION_ID,
                    ..*d
                });
            }
        }
        pool.extend_from_slice(d_l);

        let free_tracks: Vec<usize> = (0..self.tracks.len()).filter(|&i| !track_taken[i]).collect();
        let rects: Vec<Rect> = free_tracks.iter().map(|&i| self.tracks[i].rect()).collect();
        let det_rects: Vec<Rect> = pool.iter().map(|d| d.rect).collect();
        let mut cost = iou_cost_matrix(&self.canvas, &rects, &det_rects, self.config.iou_gate);
        for (r, &i) in free_tracks.iter().enumerate() {
            for (c, d) in pool.iter().enumerate() {
                if self.tracks[i].class_id != d.class_id {
                    cost.gate_out(r, c);
                }
            }
        }
        let scores: Vec<f64> = pool.iter().map(|d| d.score).collect();
        let matching = cascade_match(&cost, &scores, self.config.conf_split)?;
        for &(r, c) in &matching.matched {
            self.update_track(free_tracks[r], frame, &pool[c], &mut out)?;
        }
        for &c in &matching.unmatched_cols {
            if pool[c].score > self.config.tau_init {
                self.init_track(frame, &pool[c], &mut out)?;
            }
        }
        self.finish_frame();
        Ok(out)
    }

    fn update_track(&mut self, i: usize, frame: u32, d: &Detection, out: &mut Vec<AnnotationRecord>) -> Result<()> {
        let min_hits = self.config.min_hits;
        let interpolate = self.config.interpolate_gaps;
        let canvas = self.canvas;
        let t = &mut self.tracks[i];
        t.kstate = t.kstate.update(&d.rect)?;
        let prev_score = t.score;
        t.score = d.score;
        t.hits += 1;
        t.time_since_update = 0;
        t.feedback_suspended = false;
        t.status = if t.age >= min_hits {
            TrackStatus::Active
        } else {
            TrackStatus::Tentative
        };
        if t.status == TrackStatus::Active {
            if let (true, Some((f0, r0))) = (interpolate, t.last_emitted) {
                for f in f0 + 1..frame {
                    let s = (f - f0) as f64 / (frame - f0) as f64;
                    let r = interpolate_rect(&canvas, &r0, &d.rect, s);
                    out.push(AnnotationRecord::from_rect(f, t.track_id as i64, &r, prev_score, t.class_id));
                }
            }
            out.push(AnnotationRecord::from_rect(frame, t.track_id as i64, &d.rect, d.score, t.class_id));
            t.last_emitted = Some((frame, d.rect));
        }
        Ok(())
    }

    fn init_track(&mut self, frame: u32, d: &Detection, out: &mut Vec<AnnotationRecord>) -> Result<()> {
        let kstate = KalmanState::init(&d.rect, self.canvas, &self.config.motion)?;
        let track_id = self.next_id;
        self.next_id += 1;
        self.tracks.push(Track {
            track_id,
            kstate,
            score: d.score,
            class_id: d.class_id,
            age: 1,
            hits: 1,
            time_since_update: 0,
            status: TrackStatus::Tentative,
            feedback_suspended: false,
            last_emitted: None,
        });
        // Emission and status follow the same rule as an update.
        let i = self.tracks.len() - 1;
        let t = &mut self.tracks[i];
        if t.age >= self.config.min_hits {
            t.status = TrackStatus::Active;
            out.push(AnnotationRecord::from_rect(frame, track_id as i64, &d.rect, d.score, d.class_id));
            t.last_emitted = Some((frame, d.rect));
        }
        Ok(())
    }

    /// Ages unmatched tracks and drops those that have been missing too long.
    fn finish_frame(&mut self) {
        let max_age = self.config.max_age;
        for t in &mut self.tracks {
            if t.time_since_update == 0 {
                continue;
            }
            t.status = if t.status == TrackStatus::Tentative || t.time_since_update >= max_age {
                TrackStatus::Removed
            } else {
                TrackStatus::Lost
            };
        }
        self.tracks.retain(|t| t.status != TrackStatus::Removed);
    }
}

/// Wrap-aware linear interpolation between two boxes, `s ∈ [0, 1]`.
pub fn interpolate_rect(canvas: &Canvas, a: &Rect, b: &Rect, s: f64) -> Rect {
    Rect::new(
        canvas.wrap_x(a.cx + s * canvas.delta_x(a.cx, b.cx)),
        a.cy + s * (b.cy - a.cy),
        a.w + s * (b.w - a.w),
        a.h + s * (b.h - a.h),
    )
}

/// Runs a whole detection stream and returns the emitted records sorted by
/// frame and id.
pub fn run_frames<I>(frames: I, canvas: Canvas, config: &TrackerConfig) -> Result<Vec<AnnotationRecord>>
where
    I: IntoIterator<Item = (u32, Vec<Detection>)>,
{
    let mut tracker = Tracker::new(config.clone(), canvas)?;
    let mut out = Vec::new();
    for (frame, dets) in frames {
        out.extend(tracker.process_frame(frame, &dets)?);
    }
    out.sort_by_key(|r| (r.frame, r.track_id));
    Ok(out)
}

/// [`run_frames`] over MOT detection records grouped by frame.
pub fn run_sequence(detections: &FrameMap, canvas: Canvas, config: &TrackerConfig) -> Result<Vec<AnnotationRecord>> {
    run_frames(
        detections
            .iter()
            .map(|(f, recs)| (*f, recs.iter().map(|r| Detection::from_record(r, &canvas)).collect())),
        canvas,
        config,
    )
}
