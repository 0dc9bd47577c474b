//! Constant-velocity Kalman filter over `(cx, cy, w, h)` and their rates.
//!
//! The only place the panorama's topology enters estimation is the x
//! innovation, which is taken as the short way round the cylinder, and the
//! re-wrapping of `cx` after every transform.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Canvas, Rect};

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;
type MeasMatrix = SMatrix<f64, 4, 4>;
type ObsMatrix = SMatrix<f64, 4, 8>;

/// Smallest width/height the filter will ever report.
pub const MIN_EXTENT: f64 = 1e-3;

/// Noise configuration. Process and measurement standard deviations are
/// proportional to the current box size (`[w, h, w, h]`), the usual SORT-family
/// convention; the initial covariance is an absolute diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    /// Diagonal of the initial covariance for `(cx, cy, w, h, vcx, vcy, vw, vh)`.
    pub init_variance: [f64; 8],
    pub process_std_position: f64,
    pub process_std_velocity: f64,
    pub measurement_std: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            init_variance: [16.0, 16.0, 16.0, 16.0, 100.0, 100.0, 10.0, 10.0],
            process_std_position: 1.0 / 20.0,
            process_std_velocity: 1.0 / 160.0,
            measurement_std: 1.0 / 20.0,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_variance.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::argument("initial variances must be positive and finite"));
        }
        let stds = [self.process_std_position, self.process_std_velocity, self.measurement_std];
        if stds.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::argument("noise weights must be non-negative and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateMatrix,
    pub canvas: Canvas,
    config: MotionConfig,
}

fn observation_matrix() -> ObsMatrix {
    let mut h = ObsMatrix::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn transition(dt: f64) -> StateMatrix {
    let mut f = StateMatrix::identity();
    for i in 0..4 {
        f[(i, i + 4)] = dt;
    }
    f
}

fn symmetrize(m: &mut StateMatrix) {
    let t = m.transpose();
    *m = (*m + t) * 0.5;
}

impl KalmanState {
    /// Starts a track at `rect` with zero velocity.
    pub fn init(rect: &Rect, canvas: Canvas, config: &MotionConfig) -> Result<Self> {
        if !(rect.w > 0.0 && rect.h > 0.0) || !rect.cx.is_finite() || !rect.cy.is_finite() {
            return Err(Error::argument(format!("cannot start a track from {rect:?}")));
        }
        config.validate()?;
        let r = canvas.normalize(*rect);
        let mean = StateVector::from_column_slice(&[r.cx, r.cy, r.w, r.h, 0.0, 0.0, 0.0, 0.0]);
        let covariance = StateMatrix::from_diagonal(&StateVector::from_column_slice(&config.init_variance));
        Ok(KalmanState {
            mean,
            covariance,
            canvas,
            config: *config,
        })
    }

    pub fn config(&self) -> &MotionConfig {
        &self.config
    }

    /// Current box estimate.
    pub fn rect(&self) -> Rect {
        Rect::new(
            self.mean[0],
            self.mean[1],
            self.mean[2].max(MIN_EXTENT),
            self.mean[3].max(MIN_EXTENT),
        )
    }

    pub fn velocity(&self) -> [f64; 4] {
        [self.mean[4], self.mean[5], self.mean[6], self.mean[7]]
    }

    fn size_scale(&self) -> [f64; 4] {
        let (w, h) = (self.mean[2].max(MIN_EXTENT), self.mean[3].max(MIN_EXTENT));
        [w, h, w, h]
    }

    fn process_noise(&self, dt: f64) -> StateMatrix {
        let s = self.size_scale();
        let mut diag = StateVector::zeros();
        for i in 0..4 {
            diag[i] = (self.config.process_std_position * s[i]).powi(2);
            diag[i + 4] = (self.config.process_std_velocity * s[i]).powi(2);
        }
        StateMatrix::from_diagonal(&(diag * dt.abs()))
    }

    fn measurement_noise(&self) -> MeasMatrix {
        let s = self.size_scale();
        let diag = SVector::<f64, 4>::from_iterator(s.iter().map(|v| (self.config.measurement_std * v).powi(2)));
        MeasMatrix::from_diagonal(&diag)
    }

    fn tidy(&mut self) {
        self.mean[0] = self.canvas.wrap_x(self.mean[0]);
        if self.canvas.panoramic {
            self.mean[2] = self.mean[2].min(self.canvas.width as f64);
        }
        self.mean[2] = self.mean[2].max(MIN_EXTENT);
        self.mean[3] = self.mean[3].max(MIN_EXTENT);
        symmetrize(&mut self.covariance);
    }

    /// Advances one frame.
    pub fn predict(&self) -> KalmanState {
        self.predict_by(1.0)
    }

    /// Advances by `dt` frames under the constant-velocity model.
    pub fn predict_by(&self, dt: f64) -> KalmanState {
        let f = transition(dt);
        let mut next = self.clone();
        next.mean = f * self.mean;
        next.covariance = f * self.covariance * f.transpose() + self.process_noise(dt);
        next.tidy();
        next
    }

    /// Kalman correction with a wrap-aware x innovation.
    pub fn update(&self, obs: &Rect) -> Result<KalmanState> {
        if !(obs.w > 0.0 && obs.h > 0.0) || !obs.cx.is_finite() || !obs.cy.is_finite() {
            return Err(Error::argument(format!("invalid observation {obs:?}")));
        }
        let h = observation_matrix();
        let innovation = SVector::<f64, 4>::new(
            self.canvas.delta_x(self.mean[0], obs.cx),
            obs.cy - self.mean[1],
            obs.w - self.mean[2],
            obs.h - self.mean[3],
        );
        let r = self.measurement_noise();
        let pht = self.covariance * h.transpose();
        let s = h * pht + r;
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
        // K = P H^T S^-1, solved as S K^T = H P
        let gain = chol.solve(&pht.transpose()).transpose();
        let mut next = self.clone();
        next.mean = self.mean + gain * innovation;
        let i_kh = StateMatrix::identity() - gain * h;
        next.covariance = i_kh * self.covariance * i_kh.transpose() + gain * r * gain.transpose();
        next.tidy();
        if next.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("state diverged to a non-finite value".into()));
        }
        Ok(next)
    }

    /// True when the covariance admits a Cholesky factorisation.
    pub fn covariance_is_pd(&self) -> bool {
        let c = self.covariance;
        (c - c.transpose()).abs().max() <= 1e-9 * c.abs().max().max(1.0) && c.cholesky().is_some()
    }
}
