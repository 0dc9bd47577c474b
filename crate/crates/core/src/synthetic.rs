//! Seeded synthetic panoramic scenes with known identities.
//!
//! Objects move at constant horizontal velocity inside their own horizontal
//! band, so boxes of different objects never overlap and identities are
//! unambiguous. The first object starts just left of the seam and crosses it
//! within a few frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Canvas, Rect};
use crate::mot_io::{detections_from_records, ground_truth_from_records, AnnotationRecord, FrameMap, SequenceMeta, DETECTION_ID};

pub const MAX_OBJECTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub name: String,
    pub n_objects: usize,
    pub n_frames: u32,
    pub width: u32,
    pub height: u32,
    /// Range of |vx| in pixels per frame.
    pub min_speed: f64,
    pub max_speed: f64,
    /// Probability that a detection is missing.
    pub dropout: f64,
    /// Standard deviation of detection center noise, pixels.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            name: "synthetic".into(),
            n_objects: 5,
            n_frames: 100,
            width: 2048,
            height: 800,
            min_speed: 2.0,
            max_speed: 8.0,
            dropout: 0.0,
            jitter: 0.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_objects == 0 || self.n_objects > MAX_OBJECTS {
            return Err(Error::argument(format!("need 1..={MAX_OBJECTS} objects, got {}", self.n_objects)));
        }
        if self.n_frames == 0 || self.width < 256 || self.height < 20 * self.n_objects as u32 {
            return Err(Error::argument("scene too small for the requested objects"));
        }
        if !(0.0..1.0).contains(&self.dropout) || !(self.jitter >= 0.0) {
            return Err(Error::argument("dropout must be in [0, 1) and jitter non-negative"));
        }
        if !(self.min_speed >= 0.0 && self.min_speed <= self.max_speed) {
            return Err(Error::argument("speed range is empty"));
        }
        Ok(())
    }

    pub fn meta(&self) -> SequenceMeta {
        SequenceMeta {
            name: self.name.clone(),
            image_width: self.width,
            image_height: self.height,
            frame_rate: 10.0,
            n_frames: self.n_frames,
            panoramic: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPath {
    pub id: i64,
    pub start: Rect,
    pub vx: f64,
}

impl ObjectPath {
    pub fn at(&self, canvas: &Canvas, frame: u32) -> Rect {
        let t = (frame - 1) as f64;
        Rect {
            cx: canvas.wrap_x(self.start.cx + self.vx * t),
            ..self.start
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub meta: SequenceMeta,
    pub objects: Vec<ObjectPath>,
    pub ground_truth: Vec<AnnotationRecord>,
    pub detections: Vec<AnnotationRecord>,
}

impl Scene {
    pub fn canvas(&self) -> Canvas {
        self.meta.canvas()
    }

    pub fn ground_truth_map(&self) -> FrameMap {
        ground_truth_from_records(self.ground_truth.clone(), &self.meta).expect("generated ground truth is valid")
    }

    pub fn detection_map(&self) -> FrameMap {
        detections_from_records(self.detections.clone(), &self.meta).expect("generated detections are valid")
    }

    /// Number of objects whose box crosses or touches the seam at some frame.
    pub fn seam_crossers(&self) -> usize {
        let c = self.canvas();
        self.objects
            .iter()
            .filter(|o| (1..=self.meta.n_frames).any(|f| {
                let r = o.at(&c, f);
                r.cx - r.w / 2.0 < 0.0 || r.cx + r.w / 2.0 > c.width as f64
            }))
            .count()
    }
}

pub fn generate(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let meta = cfg.meta();
    let canvas = meta.canvas();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let band = cfg.height as f64 / cfg.n_objects as f64;
    let (w_img, _) = (cfg.width as f64, cfg.height as f64);

    let objects: Vec<ObjectPath> = (0..cfg.n_objects)
        .map(|k| {
            let h = (0.75 * band).min(120.0);
            let w = rng.random_range(0.35..0.6) * h;
            let speed = rng.random_range(cfg.min_speed..=cfg.max_speed);
            let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let vx = if k == 0 { speed } else { dir * speed };
            let cx = if k == 0 {
                w_img - 3.0 * speed.max(1.0) - w / 2.0
            } else {
                rng.random_range(0.0..w_img)
            };
            let cy = band * (k as f64 + 0.5);
            ObjectPath {
                id: k as i64 + 1,
                start: Rect::new(cx, cy, w, h),
                vx,
            }
        })
        .collect();

    let noise = Normal::new(0.0, cfg.jitter.max(f64::MIN_POSITIVE)).map_err(|e| Error::argument(e.to_string()))?;
    let mut ground_truth = Vec::new();
    let mut detections = Vec::new();
    for f in 1..=cfg.n_frames {
        for o in &objects {
            let r = o.at(&canvas, f);
            ground_truth.push(AnnotationRecord::from_rect(f, o.id, &r, 1.0, 1));
            // Draws happen whether or not the detection is kept, so the
            // dropout pattern does not shift the noise sequence.
            let keep = rng.random::<f64>() >= cfg.dropout;
            let (ex, ey): (f64, f64) = if cfg.jitter > 0.0 {
                (rng.sample(noise), rng.sample(noise))
            } else {
                let _: f64 = rng.sample(StandardNormal);
                (0.0, 0.0)
            };
            let score = rng.random_range(0.7..0.99);
            if keep {
                let d = Rect {
                    cx: canvas.wrap_x(r.cx + ex),
                    cy: r.cy + ey,
                    ..r
                };
                detections.push(AnnotationRecord::from_rect(f, DETECTION_ID, &d, score, 1));
            }
        }
    }
    Ok(Scene {
        meta,
        objects,
        ground_truth,
        detections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let cfg = SceneConfig {
            n_objects: 10,
            dropout: 0.1,
            jitter: 1.0,
            seed: 3,
            ..SceneConfig::default()
        };
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        assert_eq!(a.ground_truth.len(), 1000);
        assert!(a.detections.len() < 1000 && a.detections.len() > 800);
        assert!(a.seam_crossers() >= 1);
        a.ground_truth_map();
        a.detection_map();
    }

    #[test]
    fn bands_never_overlap() {
        let s = generate(&SceneConfig {
            n_objects: 10,
            ..SceneConfig::default()
        })
        .unwrap();
        let c = s.canvas();
        for f in [1, 50, 100] {
            let rects: Vec<Rect> = s.objects.iter().map(|o| o.at(&c, f)).collect();
            for i in 0..rects.len() {
                for j in i + 1..rects.len() {
                    assert_eq!(c.iou(&rects[i], &rects[j]), 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_too_many_objects() {
        let cfg = SceneConfig {
            n_objects: 11,
            ..SceneConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }
}
