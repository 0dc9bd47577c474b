//! Box geometry on an equirectangular (cylindrical) image.
//!
//! Only the horizontal axis wraps: x = 0 and x = W are the same column. The
//! vertical axis is planar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps `x` into `[0, width)`.
pub fn wrap_x(x: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::argument(format!("image width must be positive, got {width}")));
    }
    Ok(wrap_unchecked(x, width))
}

#[inline]
pub(crate) fn wrap_unchecked(x: f64, width: f64) -> f64 {
    let r = x.rem_euclid(width);
    // rem_euclid can round up to exactly `width` for tiny negative inputs
    if r >= width {
        0.0
    } else {
        r
    }
}

/// Signed minimal displacement from `x1` to `x2` on a cylinder of circumference
/// `width`, in `[-width/2, width/2)`.
pub fn angular_delta(x1: f64, x2: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::argument(format!("image width must be positive, got {width}")));
    }
    Ok(delta_unchecked(x1, x2, width))
}

#[inline]
pub(crate) fn delta_unchecked(x1: f64, x2: f64, width: f64) -> f64 {
    let half = width / 2.0;
    wrap_unchecked(x2 - x1 + half, width) - half
}

/// Center-form box with no topology attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Rect { cx, cy, w, h }
    }

    /// From MOT-style top-left corner and extent.
    pub fn from_ltwh(left: f64, top: f64, w: f64, h: f64) -> Self {
        Rect {
            cx: left + w / 2.0,
            cy: top + h / 2.0,
            w,
            h,
        }
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    fn is_valid(&self) -> bool {
        self.cx.is_finite()
            && self.cy.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0
    }
}

/// Axis-aligned, non-wrapping piece of a box: `[left, right) × [top, bottom)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl Fragment {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn area(&self) -> f64 {
        (self.right - self.left) * (self.bottom - self.top)
    }
}

/// A box on a panorama of width `image_width`. `cx` is always in `[0, W)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanoBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    image_width: u32,
}

impl PanoBox {
    /// Builds a box, wrapping `cx` onto the cylinder. Boxes wider than the
    /// panorama are rejected.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, image_width: u32) -> Result<Self> {
        if image_width == 0 {
            return Err(Error::argument("image width must be positive"));
        }
        let rect = Rect::new(cx, cy, w, h);
        if !rect.is_valid() {
            return Err(Error::argument(format!(
                "box needs finite coordinates and positive extent, got {rect:?}"
            )));
        }
        let width = image_width as f64;
        if w > width {
            return Err(Error::argument(format!(
                "box width {w} exceeds panorama width {image_width}"
            )));
        }
        Ok(PanoBox {
            cx: wrap_unchecked(cx, width),
            cy,
            w,
            h,
            image_width,
        })
    }

    pub fn from_ltwh(left: f64, top: f64, w: f64, h: f64, image_width: u32) -> Result<Self> {
        let r = Rect::from_ltwh(left, top, w, h);
        PanoBox::new(r.cx, r.cy, r.w, r.h, image_width)
    }

    pub fn from_rect(rect: Rect, image_width: u32) -> Result<Self> {
        PanoBox::new(rect.cx, rect.cy, rect.w, rect.h, image_width)
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn rect(&self) -> Rect {
        Rect::new(self.cx, self.cy, self.w, self.h)
    }

    pub fn crosses_seam(&self) -> bool {
        let width = self.image_width as f64;
        self.cx - self.w / 2.0 < 0.0 || self.cx + self.w / 2.0 > width
    }

    /// Rotates the box by `dx` pixels around the cylinder.
    pub fn shifted(&self, dx: f64) -> PanoBox {
        PanoBox {
            cx: wrap_unchecked(self.cx + dx, self.image_width as f64),
            ..*self
        }
    }

    /// Splits the box at the seam into one or two planar pieces.
    pub fn to_fragments(&self) -> Vec<Fragment> {
        let (top, bottom) = (self.cy - self.h / 2.0, self.cy + self.h / 2.0);
        x_intervals(self.cx, self.w, self.image_width as f64)
            .into_iter()
            .flatten()
            .map(|(left, right)| Fragment {
                left,
                top,
                right,
                bottom,
            })
            .collect()
    }
}

/// Arc `[cx - w/2, cx + w/2)` as at most two intervals inside `[0, W]`.
fn x_intervals(cx: f64, w: f64, width: f64) -> [Option<(f64, f64)>; 2] {
    let left = wrap_unchecked(cx - w / 2.0, width);
    let right = left + w;
    if right <= width {
        [Some((left, right)), None]
    } else {
        [Some((left, width)), Some((0.0, right - width))]
    }
}

fn overlap_1d(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Horizontal overlap of two boxes on the circle, with each box's own extent
/// measured on the same interval endpoints.
fn arc_overlap(a: &Rect, b: &Rect, width: f64) -> XOverlap {
    // Intersect A with B and with B shifted one turn either way. Working on
    // whole arcs (rather than seam fragments) keeps identical boxes exact.
    let arc = |r: &Rect| {
        let w = r.w.min(width);
        let left = wrap_unchecked(r.cx - w / 2.0, width);
        (left, left + w)
    };
    let (ia, ib) = (arc(a), arc(b));
    XOverlap {
        overlap: [-width, 0.0, width].iter().map(|k| overlap_1d(ia, (ib.0 + k, ib.1 + k))).sum(),
        len_a: ia.1 - ia.0,
        len_b: ib.1 - ib.0,
    }
}

struct XOverlap {
    overlap: f64,
    len_a: f64,
    len_b: f64,
}

fn iou_from_overlap(a: &Rect, b: &Rect, x: XOverlap) -> f64 {
    let ya = (a.cy - a.h / 2.0, a.cy + a.h / 2.0);
    let yb = (b.cy - b.h / 2.0, b.cy + b.h / 2.0);
    let inter = x.overlap * overlap_1d(ya, yb);
    if inter <= 0.0 {
        return 0.0;
    }
    // Areas from the same endpoints as the intersection, so that a box
    // compared with itself scores exactly 1.
    let union = x.len_a * (ya.1 - ya.0) + x.len_b * (yb.1 - yb.0) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Intersection-over-union of two boxes on the same panorama.
pub fn pano_iou(a: &PanoBox, b: &PanoBox) -> Result<f64> {
    if a.image_width != b.image_width {
        return Err(Error::argument(format!(
            "boxes live on panoramas of different width ({} vs {})",
            a.image_width, b.image_width
        )));
    }
    let (ra, rb) = (a.rect(), b.rect());
    Ok(iou_from_overlap(
        &ra,
        &rb,
        arc_overlap(&ra, &rb, a.image_width as f64),
    ))
}

/// Plain IoU with no wrapping.
pub fn planar_iou(a: &Rect, b: &Rect) -> f64 {
    let xa = (a.cx - a.w / 2.0, a.cx + a.w / 2.0);
    let xb = (b.cx - b.w / 2.0, b.cx + b.w / 2.0);
    let x = XOverlap {
        overlap: overlap_1d(xa, xb),
        len_a: xa.1 - xa.0,
        len_b: xb.1 - xb.0,
    };
    iou_from_overlap(a, b, x)
}

/// Image geometry of one sequence. When `panoramic` is false every operation
/// degenerates to its planar counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    pub panoramic: bool,
}

impl Canvas {
    pub fn new(width: u32, height: u32, panoramic: bool) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument(format!(
                "canvas dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Canvas {
            width,
            height,
            panoramic,
        })
    }

    pub fn panorama(width: u32, height: u32) -> Self {
        Canvas {
            width: width.max(1),
            height: height.max(1),
            panoramic: true,
        }
    }

    pub fn with_panoramic(mut self, panoramic: bool) -> Self {
        self.panoramic = panoramic;
        self
    }

    pub fn wrap_x(&self, x: f64) -> f64 {
        if self.panoramic {
            wrap_unchecked(x, self.width as f64)
        } else {
            x
        }
    }

    /// Displacement `x2 - x1`, the short way round on a panorama.
    pub fn delta_x(&self, x1: f64, x2: f64) -> f64 {
        if self.panoramic {
            delta_unchecked(x1, x2, self.width as f64)
        } else {
            x2 - x1
        }
    }

    /// Euclidean distance between box centers with a wrap-aware x component.
    pub fn center_distance(&self, a: &Rect, b: &Rect) -> f64 {
        let dx = self.delta_x(a.cx, b.cx);
        let dy = b.cy - a.cy;
        dx.hypot(dy)
    }

    pub fn iou(&self, a: &Rect, b: &Rect) -> f64 {
        if self.panoramic {
            iou_from_overlap(a, b, arc_overlap(a, b, self.width as f64))
        } else {
            planar_iou(a, b)
        }
    }

    /// Brings a box into canonical form: wrapped center, width at most one turn.
    pub fn normalize(&self, r: Rect) -> Rect {
        if self.panoramic {
            let width = self.width as f64;
            Rect::new(wrap_unchecked(r.cx, width), r.cy, r.w.min(width), r.h)
        } else {
            r
        }
    }
}
