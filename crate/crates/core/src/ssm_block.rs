//! Forward-only distortion-aware state-space block on small feature maps.
//!
//! Maps are `B × C × W × H` arrays. The block runs four stages:
//!
//! 1. `d = D(S)` and `s = σ(M(S))`: distortion and scale estimates, both convolutions.
//! 2. `D = DynConv(S; d ⊙ s)`: a convolution whose kernel is a softmax-weighted
//!    mix of `K` candidate kernels, the weights routed from the spatially pooled
//!    modulation `d ⊙ s` (one mix per sample).
//! 3. `D* = (1/N) Σ_dir unscan(ssm(scan_dir(D)))`: a per-channel linear recurrence
//!    `h_t = a·h_{t-1} + b·u_t`, `y_t = c·h_t` run along 1, 2 or 4 scan orders.
//! 4. `F = F(C(S) + D*)`: residual convolution plus scan output, then a 1×1 fusion.
//!
//! Convolutions use "same" padding, circular along the width axis (the
//! panorama wraps horizontally) and zero along the height axis.
//!
//! Parameters serialise to JSON; see [`DssmParams`].

use ndarray::{Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type FeatureMap = Array4<f64>;

pub fn check_map(m: &FeatureMap) -> Result<()> {
    if m.shape().contains(&0) {
        return Err(Error::argument(format!("feature map has an empty axis: {:?}", m.shape())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument("feature map contains non-finite values"));
    }
    Ok(())
}

fn same_shape(a: &FeatureMap, b: &FeatureMap, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::argument(format!("{what}: shapes {:?} and {:?} differ", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Square 2-D convolution kernel, weights laid out `[out][in][kx][ky]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub out_ch: usize,
    pub in_ch: usize,
    pub k: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(out_ch: usize, in_ch: usize, k: usize) -> Self {
        Conv2d {
            out_ch,
            in_ch,
            k,
            weight: vec![0.0; out_ch * in_ch * k * k],
            bias: vec![0.0; out_ch],
        }
    }

    /// Passes each channel through unchanged.
    pub fn identity(ch: usize, k: usize) -> Self {
        let mut c = Conv2d::zeros(ch, ch, k);
        for o in 0..ch {
            let r = k / 2;
            *c.at_mut(o, o, r, r) = 1.0;
        }
        c
    }

    pub fn random<R: Rng + ?Sized>(out_ch: usize, in_ch: usize, k: usize, rng: &mut R) -> Self {
        let std = 1.0 / ((in_ch * k * k) as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("finite std");
        let mut c = Conv2d::zeros(out_ch, in_ch, k);
        c.weight.iter_mut().for_each(|w| *w = rng.sample(dist));
        c.bias.iter_mut().for_each(|b| *b = 0.1 * rng.sample::<f64, _>(StandardNormal));
        c
    }

    fn index(&self, o: usize, i: usize, kx: usize, ky: usize) -> usize {
        ((o * self.in_ch + i) * self.k + kx) * self.k + ky
    }

    pub fn at(&self, o: usize, i: usize, kx: usize, ky: usize) -> f64 {
        self.weight[self.index(o, i, kx, ky)]
    }

    pub fn at_mut(&mut self, o: usize, i: usize, kx: usize, ky: usize) -> &mut f64 {
        let idx = self.index(o, i, kx, ky);
        &mut self.weight[idx]
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.is_multiple_of(2) || self.out_ch == 0 || self.in_ch == 0 {
            return Err(Error::argument(format!(
                "kernel {}x{}x{}x{} must have odd size and non-empty channels",
                self.out_ch, self.in_ch, self.k, self.k
            )));
        }
        if self.weight.len() != self.out_ch * self.in_ch * self.k * self.k || self.bias.len() != self.out_ch {
            return Err(Error::argument("kernel weight/bias length does not match its shape"));
        }
        if self.weight.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::argument("kernel contains non-finite values"));
        }
        Ok(())
    }

    /// Weighted sum of kernels of identical shape.
    fn mix(kernels: &[Conv2d], weights: &[f64]) -> Conv2d {
        let mut out = Conv2d::zeros(kernels[0].out_ch, kernels[0].in_ch, kernels[0].k);
        for (kern, &a) in kernels.iter().zip(weights) {
            out.weight.iter_mut().zip(&kern.weight).for_each(|(o, w)| *o += a * w);
            out.bias.iter_mut().zip(&kern.bias).for_each(|(o, b)| *o += a * b);
        }
        out
    }

    pub fn apply(&self, x: &FeatureMap) -> Result<FeatureMap> {
        let (b, c, w, h) = x.dim();
        if c != self.in_ch {
            return Err(Error::argument(format!("kernel expects {} channels, map has {c}", self.in_ch)));
        }
        let mut out = FeatureMap::zeros((b, self.out_ch, w, h));
        for bi in 0..b {
            self.apply_sample(x, bi, &mut out);
        }
        Ok(out)
    }

    fn apply_sample(&self, x: &FeatureMap, bi: usize, out: &mut FeatureMap) {
        let (_, _, w, h) = x.dim();
        let r = (self.k / 2) as isize;
        for o in 0..self.out_ch {
            for xx in 0..w {
                for yy in 0..h {
                    let mut acc = self.bias[o];
                    for i in 0..self.in_ch {
                        for kx in 0..self.k {
                            let sx = (xx as isize + kx as isize - r).rem_euclid(w as isize) as usize;
                            for ky in 0..self.k {
                                let sy = yy as isize + ky as isize - r;
                                if sy < 0 || sy >= h as isize {
                                    continue;
                                }
                                acc += self.at(o, i, kx, ky) * x[[bi, i, sx, sy as usize]];
                            }
                        }
                    }
                    out[[bi, o, xx, yy]] = acc;
                }
            }
        }
    }
}

/// Per-channel recurrence coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsmCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Flattening orders of a `W × H` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanOrder {
    /// Row by row, x fastest.
    Forward,
    Backward,
    /// Column by column, y fastest.
    VerticalForward,
    VerticalBackward,
}

impl ScanOrder {
    pub fn for_count(n_scans: usize) -> Result<&'static [ScanOrder]> {
        const ALL: [ScanOrder; 4] = [
            ScanOrder::Forward,
            ScanOrder::Backward,
            ScanOrder::VerticalForward,
            ScanOrder::VerticalBackward,
        ];
        match n_scans {
            1 | 2 | 4 => Ok(&ALL[..n_scans]),
            _ => Err(Error::argument(format!("n_scans must be 1, 2 or 4, got {n_scans}"))),
        }
    }

    /// `(x, y)` positions in visiting order.
    pub fn positions(&self, w: usize, h: usize) -> Vec<(usize, usize)> {
        let mut p: Vec<(usize, usize)> = match self {
            ScanOrder::Forward | ScanOrder::Backward => (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).collect(),
            _ => (0..w).flat_map(|x| (0..h).map(move |y| (x, y))).collect(),
        };
        if matches!(self, ScanOrder::Backward | ScanOrder::VerticalBackward) {
            p.reverse();
        }
        p
    }
}

/// `y_t = c·h_t`, `h_t = a·h_{t-1} + b·u_t`, `h_0 = 0`.
pub fn recurrence(u: &[f64], k: SsmCoeffs) -> Vec<f64> {
    let mut h = 0.0;
    u.iter()
        .map(|&x| {
            h = k.a * h + k.b * x;
            k.c * h
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DssmParams {
    pub channels: usize,
    /// `D`: distortion estimate.
    pub distortion: Conv2d,
    /// `M`: pre-sigmoid scale estimate.
    pub scale: Conv2d,
    /// Candidate kernels mixed by the dynamic convolution.
    pub dyn_kernels: Vec<Conv2d>,
    /// Routing matrix, `K × C` row-major, from pooled modulation to mixing logits.
    pub routing: Vec<f64>,
    pub ssm: Vec<SsmCoeffs>,
    /// `C`: residual branch.
    pub residual: Conv2d,
    /// `F`: 1×1 fusion.
    pub fusion: Conv2d,
    pub n_scans: usize,
}

impl DssmParams {
    /// Parameters under which the block returns its input unchanged: the
    /// recurrence has zero input gain, so `D* = 0` and `F = S`.
    pub fn identity(channels: usize) -> Self {
        DssmParams {
            channels,
            distortion: Conv2d::identity(channels, 3),
            scale: Conv2d::zeros(channels, channels, 3),
            dyn_kernels: vec![Conv2d::identity(channels, 3)],
            routing: vec![0.0; channels],
            ssm: vec![SsmCoeffs { a: 0.0, b: 0.0, c: 0.0 }; channels],
            residual: Conv2d::identity(channels, 3),
            fusion: Conv2d::identity(channels, 1),
            n_scans: 4,
        }
    }

    /// Seeded random parameters with `n_kernels` candidate kernels and stable
    /// recurrences (`0.2 ≤ a ≤ 0.9`).
    pub fn random(channels: usize, n_kernels: usize, n_scans: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let decay = Uniform::new(0.2, 0.9).map_err(|e| Error::argument(e.to_string()))?;
        let gain = Uniform::new(0.5, 1.5).map_err(|e| Error::argument(e.to_string()))?;
        let p = DssmParams {
            channels,
            distortion: Conv2d::random(channels, channels, 3, &mut rng),
            scale: Conv2d::random(channels, channels, 3, &mut rng),
            dyn_kernels: (0..n_kernels.max(1)).map(|_| Conv2d::random(channels, channels, 3, &mut rng)).collect(),
            routing: (0..n_kernels.max(1) * channels).map(|_| rng.sample(StandardNormal)).collect(),
            ssm: (0..channels)
                .map(|_| SsmCoeffs {
                    a: rng.sample(decay),
                    b: rng.sample(gain),
                    c: rng.sample(gain),
                })
                .collect(),
            residual: Conv2d::random(channels, channels, 3, &mut rng),
            fusion: Conv2d::random(channels, channels, 1, &mut rng),
            n_scans,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels;
        let square = |k: &Conv2d, name: &str| -> Result<()> {
            k.validate()?;
            if k.in_ch != c || k.out_ch != c {
                return Err(Error::argument(format!("{name} kernel must map {c} channels to {c}")));
            }
            Ok(())
        };
        square(&self.distortion, "distortion")?;
        square(&self.scale, "scale")?;
        square(&self.residual, "residual")?;
        square(&self.fusion, "fusion")?;
        if self.fusion.k != 1 {
            return Err(Error::argument("fusion must be a 1x1 convolution"));
        }
        if self.dyn_kernels.is_empty() {
            return Err(Error::argument("dynamic convolution needs at least one kernel"));
        }
        for k in &self.dyn_kernels {
            square(k, "dynamic")?;
            if k.k != self.dyn_kernels[0].k {
                return Err(Error::argument("dynamic kernels must share a size"));
            }
        }
        if self.routing.len() != self.dyn_kernels.len() * c || self.routing.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("routing matrix must be finite with K x C entries"));
        }
        if self.ssm.len() != c || self.ssm.iter().any(|s| ![s.a, s.b, s.c].iter().all(|v| v.is_finite())) {
            return Err(Error::argument("need finite (a, b, c) for every channel"));
        }
        ScanOrder::for_count(self.n_scans)?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: DssmParams = serde_json::from_str(text).map_err(|e| Error::validation(format!("parameter file: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    fn check_input(&self, m: &FeatureMap) -> Result<()> {
        check_map(m)?;
        if m.dim().1 != self.channels {
            return Err(Error::argument(format!(
                "block has {} channels, map has {}",
                self.channels,
                m.dim().1
            )));
        }
        Ok(())
    }
}

/// `(d, s) = (D(S), σ(M(S)))`.
pub fn distortion_scale(s4: &FeatureMap, p: &DssmParams) -> Result<(FeatureMap, FeatureMap)> {
    p.check_input(s4)?;
    let d = p.distortion.apply(s4)?;
    let s = p.scale.apply(s4)?.mapv(sigmoid);
    Ok((d, s))
}

/// Softmax mixing weights for every sample, from the pooled modulation.
pub fn routing_weights(modulation: &FeatureMap, p: &DssmParams) -> Vec<Vec<f64>> {
    let (b, c, w, h) = modulation.dim();
    let n_k = p.dyn_kernels.len();
    (0..b)
        .map(|bi| {
            let pooled: Vec<f64> = (0..c)
                .map(|ci| modulation.index_axis(Axis(0), bi).index_axis(Axis(0), ci).sum() / (w * h) as f64)
                .collect();
            let logits: Vec<f64> = (0..n_k)
                .map(|k| (0..c).map(|ci| p.routing[k * c + ci] * pooled[ci]).sum())
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

/// Dynamic convolution of `s4` conditioned on `d ⊙ s`.
pub fn mitigate_distortion(d: &FeatureMap, s: &FeatureMap, s4: &FeatureMap, p: &DssmParams) -> Result<FeatureMap> {
    p.check_input(s4)?;
    same_shape(d, s4, "distortion map")?;
    same_shape(s, s4, "scale map")?;
    let modulation = d * s;
    let weights = routing_weights(&modulation, p);
    let mut out = FeatureMap::zeros(s4.dim());
    for (bi, alpha) in weights.iter().enumerate() {
        Conv2d::mix(&p.dyn_kernels, alpha).apply_sample(s4, bi, &mut out);
    }
    Ok(out)
}

/// One scan order of the recurrence over every `(batch, channel)` plane.
pub fn scan_direction(x: &FeatureMap, order: ScanOrder, coeffs: &[SsmCoeffs]) -> Result<FeatureMap> {
    let (b, c, w, h) = x.dim();
    if coeffs.len() != c {
        return Err(Error::argument(format!("{} recurrences for {c} channels", coeffs.len())));
    }
    let pos = order.positions(w, h);
    let mut out = FeatureMap::zeros(x.dim());
    for bi in 0..b {
        for ci in 0..c {
            let u: Vec<f64> = pos.iter().map(|&(px, py)| x[[bi, ci, px, py]]).collect();
            for (&(px, py), y) in pos.iter().zip(recurrence(&u, coeffs[ci])) {
                out[[bi, ci, px, py]] = y;
            }
        }
    }
    Ok(out)
}

/// Mean over the configured scan orders.
pub fn ssm_scan(x: &FeatureMap, p: &DssmParams) -> Result<FeatureMap> {
    check_map(x)?;
    let orders = ScanOrder::for_count(p.n_scans)?;
    let mut acc = FeatureMap::zeros(x.dim());
    for &o in orders {
        acc += &scan_direction(x, o, &p.ssm)?;
    }
    acc /= orders.len() as f64;
    Ok(acc)
}

/// `F(C(S) + D*)`.
pub fn fuse(s4: &FeatureMap, d_star: &FeatureMap, p: &DssmParams) -> Result<FeatureMap> {
    p.check_input(s4)?;
    same_shape(d_star, s4, "scan output")?;
    let mixed = p.residual.apply(s4)? + d_star;
    p.fusion.apply(&mixed)
}

/// The whole block.
pub fn dssm_forward(s4: &FeatureMap, p: &DssmParams) -> Result<FeatureMap> {
    let (d, s) = distortion_scale(s4, p)?;
    let mitigated = mitigate_distortion(&d, &s, s4, p)?;
    let d_star = ssm_scan(&mitigated, p)?;
    fuse(s4, &d_star, p)
}

/// One scale of the multi-scale neck: a plain convolution, or the block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub plain: Conv2d,
    pub block: DssmParams,
}

impl ScaleParams {
    pub fn identity(channels: usize) -> Self {
        ScaleParams {
            plain: Conv2d::identity(channels, 3),
            block: DssmParams::identity(channels),
        }
    }

    pub fn random(channels: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        Ok(ScaleParams {
            plain: Conv2d::random(channels, channels, 3, &mut rng),
            block: DssmParams::random(channels, 3, 4, seed)?,
        })
    }
}

/// Three-scale processing; `placement[i]` selects the block for scale `i`
/// (`S3, S4, S5`). The default applies it to the middle scale only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckParams {
    pub scales: [ScaleParams; 3],
    pub placement: [bool; 3],
}

pub const DEFAULT_PLACEMENT: [bool; 3] = [false, true, false];

impl NeckParams {
    pub fn identity(channels: [usize; 3]) -> Self {
        NeckParams {
            scales: channels.map(ScaleParams::identity),
            placement: DEFAULT_PLACEMENT,
        }
    }
}

pub fn multiscale_forward(s3: &FeatureMap, s4: &FeatureMap, s5: &FeatureMap, p: &NeckParams) -> Result<[FeatureMap; 3]> {
    let run = |x: &FeatureMap, i: usize| -> Result<FeatureMap> {
        check_map(x)?;
        if p.placement[i] {
            dssm_forward(x, &p.scales[i].block)
        } else {
            p.scales[i].plain.apply(x)
        }
    };
    Ok([run(s3, 0)?, run(s4, 1)?, run(s5, 2)?])
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn max_abs_diff(a: &FeatureMap, b: &FeatureMap) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_map(shape: (usize, usize, usize, usize), rng: &mut impl Rng) -> FeatureMap {
    FeatureMap::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
}

/// Runs the block's structural invariants on random parameters and maps.
pub fn check_invariants(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = DssmParams::random(3, 3, 4, seed)?;
    let x = random_map((2, 3, 6, 5), &mut rng);
    let y = random_map((2, 3, 6, 5), &mut rng);
    let mut out = Vec::new();

    let (d, s) = distortion_scale(&x, &p)?;
    let in_range = s.iter().all(|v| *v > 0.0 && *v < 1.0);
    out.push(outcome("sigmoid range", in_range, format!("min {:.3e}", s.iter().copied().fold(1.0, f64::min))));

    let full = dssm_forward(&x, &p)?;
    let shapes = d.shape() == x.shape() && s.shape() == x.shape() && full.shape() == x.shape();
    out.push(outcome("shape preservation", shapes, format!("{:?}", full.shape())));

    let (alpha, beta) = (0.7, -1.3);
    let lhs = ssm_scan(&(&x * alpha + &y * beta), &p)?;
    let rhs = ssm_scan(&x, &p)? * alpha + ssm_scan(&y, &p)? * beta;
    let err = max_abs_diff(&lhs, &rhs);
    out.push(outcome("scan linearity", err <= 1e-10, format!("max |Δ| {err:.2e}")));

    let a = recurrence(&[1.0, 0.0, 0.0], SsmCoeffs { a: 0.5, b: 1.0, c: 1.0 });
    out.push(outcome("unrolled recurrence", a == [1.0, 0.5, 0.25], format!("{a:?}")));

    let k = p.ssm[0];
    let long = recurrence(&vec![1.0; 200], k);
    let steady = k.c * k.b / (1.0 - k.a);
    let err = (long[199] - steady).abs();
    out.push(outcome("steady state", err <= 1e-6, format!("|Δ| {err:.2e}")));

    let m1 = mitigate_distortion(&d, &s, &x, &p)?;
    let m2 = mitigate_distortion(&s, &d, &x, &p)?;
    out.push(outcome("modulation symmetry", m1 == m2, String::new()));

    let again = dssm_forward(&x, &p)?;
    out.push(outcome("determinism", again == full, String::new()));
    Ok(out)
}
