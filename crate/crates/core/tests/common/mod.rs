//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code under test except to read plain data.
#![allow(dead_code, clippy::too_many_arguments, clippy::needless_range_loop)]

use panotrack_core::mot_io::{AnnotationRecord, FrameMap};
use panotrack_core::ssm_block::{DssmParams, FeatureMap};
use rand::Rng;

/// Minimum-cost complete assignment of the smaller side by enumeration.
pub fn brute_force_min(rows: usize, cols: usize, cost: &[f64]) -> f64 {
    fn rec(r: usize, rows: usize, cols: usize, cost: &[f64], used: &mut [bool], acc: f64, best: &mut f64, transpose: bool) {
        if r == rows {
            *best = best.min(acc);
            return;
        }
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                let v = if transpose { cost[c * rows + r] } else { cost[r * cols + c] };
                rec(r + 1, rows, cols, cost, used, acc + v, best, transpose);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    if rows <= cols {
        rec(0, rows, cols, cost, &mut vec![false; cols], 0.0, &mut best, false);
    } else {
        rec(0, cols, rows, cost, &mut vec![false; rows], 0.0, &mut best, true);
    }
    best
}

/// Best `(cardinality, cost)` over all matchings restricted to admissible
/// cells: maximum cardinality first, then minimum cost.
pub fn brute_force_gated(rows: usize, cols: usize, cost: &[f64], ok: &[bool]) -> (usize, f64) {
    fn rec(r: usize, rows: usize, cols: usize, cost: &[f64], ok: &[bool], used: &mut [bool], n: usize, acc: f64, best: &mut (usize, f64)) {
        if r == rows {
            if n > best.0 || (n == best.0 && acc < best.1) {
                *best = (n, acc);
            }
            return;
        }
        rec(r + 1, rows, cols, cost, ok, used, n, acc, best);
        for c in 0..cols {
            if !used[c] && ok[r * cols + c] {
                used[c] = true;
                rec(r + 1, rows, cols, cost, ok, used, n + 1, acc + cost[r * cols + c], best);
                used[c] = false;
            }
        }
    }
    let mut best = (0, 0.0);
    rec(0, rows, cols, cost, ok, &mut vec![false; cols], 0, 0.0, &mut best);
    best
}

/// Box given by its left/top corner and extent on a `width`-periodic canvas.
#[derive(Debug, Clone, Copy)]
pub struct RasterBox {
    pub left: f64,
    pub top: f64,
    pub w: f64,
    pub h: f64,
}

/// IoU by counting sample points on a grid of pitch `step`. A sample at
/// `(x, y)` (cell center) lies in a box when `(x - left) mod W < w` and
/// `top <= y < top + h`.
pub fn raster_iou(a: RasterBox, b: RasterBox, width: f64, height: f64, step: f64) -> f64 {
    let inside = |r: &RasterBox, x: f64, y: f64| (x - r.left).rem_euclid(width) < r.w && y >= r.top && y < r.top + r.h;
    let (nx, ny) = ((width / step) as usize, (height / step) as usize);
    let (mut inter, mut union) = (0u64, 0u64);
    for i in 0..nx {
        let x = (i as f64 + 0.5) * step;
        for j in 0..ny {
            let y = (j as f64 + 0.5) * step;
            let (ia, ib) = (inside(&a, x, y), inside(&b, x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

// ---------------------------------------------------------------------------
// Straight-line reimplementation of the feature block on flat buffers.

pub struct Flat {
    pub b: usize,
    pub c: usize,
    pub w: usize,
    pub h: usize,
    pub v: Vec<f64>,
}

impl Flat {
    pub fn from_map(m: &FeatureMap) -> Flat {
        let (b, c, w, h) = m.dim();
        let mut v = Vec::with_capacity(b * c * w * h);
        for bi in 0..b {
            for ci in 0..c {
                for x in 0..w {
                    for y in 0..h {
                        v.push(m[[bi, ci, x, y]]);
                    }
                }
            }
        }
        Flat { b, c, w, h, v }
    }

    fn zeros_like(&self) -> Flat {
        Flat {
            v: vec![0.0; self.v.len()],
            ..*self
        }
    }

    fn at(&self, b: usize, c: usize, x: usize, y: usize) -> f64 {
        self.v[((b * self.c + c) * self.w + x) * self.h + y]
    }

    fn set(&mut self, b: usize, c: usize, x: usize, y: usize, val: f64) {
        let i = ((b * self.c + c) * self.w + x) * self.h + y;
        self.v[i] = val;
    }
}

/// Cross-correlation through an explicitly padded copy (wrap in x, zeros in y).
fn conv(x: &Flat, weight: &[f64], bias: &[f64], k: usize) -> Flat {
    let r = k / 2;
    let (pw, ph) = (x.w + 2 * r, x.h + 2 * r);
    let mut out = x.zeros_like();
    for b in 0..x.b {
        let mut padded = vec![0.0; x.c * pw * ph];
        for c in 0..x.c {
            for px in 0..pw {
                let sx = (px + x.w - r % x.w) % x.w;
                for py in r..r + x.h {
                    padded[(c * pw + px) * ph + py] = x.at(b, c, sx, py - r);
                }
            }
        }
        for o in 0..x.c {
            for ox in 0..x.w {
                for oy in 0..x.h {
                    let mut acc = bias[o];
                    for i in 0..x.c {
                        for kx in 0..k {
                            for ky in 0..k {
                                acc += weight[((o * x.c + i) * k + kx) * k + ky] * padded[(i * pw + ox + kx) * ph + oy + ky];
                            }
                        }
                    }
                    out.set(b, o, ox, oy, acc);
                }
            }
        }
    }
    out
}

/// Runs distortion/scale → dynamic convolution → scans → fusion.
pub fn dssm_oracle(input: &FeatureMap, p: &DssmParams) -> FeatureMap {
    let x = Flat::from_map(input);
    let d = conv(&x, &p.distortion.weight, &p.distortion.bias, p.distortion.k);
    let mut s = conv(&x, &p.scale.weight, &p.scale.bias, p.scale.k);
    for v in s.v.iter_mut() {
        *v = 1.0 / (1.0 + (-*v).exp());
    }

    // per-sample kernel mix from pooled d*s
    let nk = p.dyn_kernels.len();
    let kk = p.dyn_kernels[0].k;
    let mut mitigated = x.zeros_like();
    for b in 0..x.b {
        let mut pooled = vec![0.0; x.c];
        for c in 0..x.c {
            let mut sum = 0.0;
            for xx in 0..x.w {
                for y in 0..x.h {
                    sum += d.at(b, c, xx, y) * s.at(b, c, xx, y);
                }
            }
            pooled[c] = sum / (x.w * x.h) as f64;
        }
        let logits: Vec<f64> = (0..nk).map(|k| (0..x.c).map(|c| p.routing[k * x.c + c] * pooled[c]).sum()).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        let alpha: Vec<f64> = logits.iter().map(|l| l.exp() / z).collect();
        let mut weight = vec![0.0; p.dyn_kernels[0].weight.len()];
        let mut bias = vec![0.0; x.c];
        for (k, kern) in p.dyn_kernels.iter().enumerate() {
            for (wv, kv) in weight.iter_mut().zip(&kern.weight) {
                *wv += alpha[k] * kv;
            }
            for (bv, kv) in bias.iter_mut().zip(&kern.bias) {
                *bv += alpha[k] * kv;
            }
        }
        let single = Flat {
            b: 1,
            c: x.c,
            w: x.w,
            h: x.h,
            v: x.v[b * x.c * x.w * x.h..(b + 1) * x.c * x.w * x.h].to_vec(),
        };
        let y = conv(&single, &weight, &bias, kk);
        let base = b * x.c * x.w * x.h;
        mitigated.v[base..base + y.v.len()].copy_from_slice(&y.v);
    }

    // scans: flat index lists per direction
    let n = x.w * x.h;
    let row_major: Vec<(usize, usize)> = (0..n).map(|t| (t % x.w, t / x.w)).collect();
    let col_major: Vec<(usize, usize)> = (0..n).map(|t| (t / x.h, t % x.h)).collect();
    let mut orders = vec![row_major.clone()];
    if p.n_scans >= 2 {
        orders.push(row_major.iter().rev().copied().collect());
    }
    if p.n_scans == 4 {
        orders.push(col_major.clone());
        orders.push(col_major.iter().rev().copied().collect());
    }
    let mut d_star = x.zeros_like();
    for b in 0..x.b {
        for c in 0..x.c {
            let (a, gain, out_gain) = (p.ssm[c].a, p.ssm[c].b, p.ssm[c].c);
            for order in &orders {
                let mut h = 0.0;
                for &(px, py) in order {
                    h = a * h + gain * mitigated.at(b, c, px, py);
                    let prev = d_star.at(b, c, px, py);
                    d_star.set(b, c, px, py, prev + out_gain * h / orders.len() as f64);
                }
            }
        }
    }

    let res = conv(&x, &p.residual.weight, &p.residual.bias, p.residual.k);
    let mut out = x.zeros_like();
    for b in 0..x.b {
        for o in 0..x.c {
            for xx in 0..x.w {
                for y in 0..x.h {
                    let mut acc = p.fusion.bias[o];
                    for i in 0..x.c {
                        acc += p.fusion.weight[o * x.c + i] * (res.at(b, i, xx, y) + d_star.at(b, i, xx, y));
                    }
                    out.set(b, o, xx, y, acc);
                }
            }
        }
    }
    FeatureMap::from_shape_vec((x.b, x.c, x.w, x.h), out.v).unwrap()
}

// ---------------------------------------------------------------------------
// Metric fixtures.

pub fn gt_record(frame: u32, id: i64, left: f64, top: f64) -> AnnotationRecord {
    AnnotationRecord {
        frame,
        track_id: id,
        left,
        top,
        width: 40.0,
        height: 80.0,
        confidence: 1.0,
        class_id: 1,
        visibility: 1.0,
    }
}

pub fn frame_map(recs: impl IntoIterator<Item = AnnotationRecord>) -> FrameMap {
    let mut m = FrameMap::new();
    for r in recs {
        m.entry(r.frame).or_default().push(r);
    }
    m
}

/// Single object on 10 frames; predictions perfect but labelled 1 on
/// frames 1–6 and 2 on frames 7–10.
pub fn id_switch_fixture() -> (FrameMap, FrameMap) {
    let gt = frame_map((1..=10).map(|f| gt_record(f, 1, 100.0 + 5.0 * f as f64, 50.0)));
    let pred = frame_map((1..=10).map(|f| gt_record(f, if f <= 6 { 1 } else { 2 }, 100.0 + 5.0 * f as f64, 50.0)));
    (gt, pred)
}

/// Random ground truth: objects with random lifetimes and random-walk boxes.
pub fn random_sequence(rng: &mut impl Rng, n_frames: u32, width: f64, height: f64) -> FrameMap {
    let n_obj = rng.random_range(1..=8);
    let mut recs = Vec::new();
    for id in 1..=n_obj {
        let start = rng.random_range(1..=n_frames);
        let end = rng.random_range(start..=n_frames);
        let (mut x, mut y) = (rng.random_range(-20.0..width), rng.random_range(0.0..height - 100.0));
        let (w, h) = (rng.random_range(10.0..80.0), rng.random_range(20.0..100.0));
        for f in start..=end {
            if rng.random_bool(0.9) {
                recs.push(AnnotationRecord {
                    width: w,
                    height: h,
                    ..gt_record(f, id, x, y)
                });
            }
            x += rng.random_range(-5.0..5.0);
            y = (y + rng.random_range(-2.0..2.0)).clamp(0.0, height - h);
        }
    }
    frame_map(recs)
}

/// Largest total weight over matchings that use only admissible cells.
pub fn brute_force_max_weight(rows: usize, cols: usize, weight: &[f64], ok: &[bool]) -> f64 {
    fn rec(r: usize, rows: usize, cols: usize, weight: &[f64], ok: &[bool], used: &mut [bool], acc: f64, best: &mut f64) {
        if r == rows {
            *best = best.max(acc);
            return;
        }
        rec(r + 1, rows, cols, weight, ok, used, acc, best);
        for c in 0..cols {
            if !used[c] && ok[r * cols + c] {
                used[c] = true;
                rec(r + 1, rows, cols, weight, ok, used, acc + weight[r * cols + c], best);
                used[c] = false;
            }
        }
    }
    let mut best = 0.0;
    rec(0, rows, cols, weight, ok, &mut vec![false; cols], 0.0, &mut best);
    best
}
