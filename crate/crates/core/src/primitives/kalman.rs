//! Constant-velocity Kalman filter over `[cx, cy, s, r, vcx, vcy, vs]`, where
//! `s` is box area and `r` the aspect ratio `w / h` (held constant).

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BBox;

pub type StateVec = SVector<f64, 7>;
pub type StateCov = SMatrix<f64, 7, 7>;
type MeasVec = SVector<f64, 4>;
type MeasCov = SMatrix<f64, 4, 4>;
type MeasMat = SMatrix<f64, 4, 7>;

const MIN_ASPECT: f64 = 1e-6;

/// Noise model. Standard deviations are per frame, in state units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanParams {
    /// Measurement std on `[cx, cy, s, r]`.
    pub meas_std: [f64; 4],
    /// Initial std on `[cx, cy, s, r, vcx, vcy, vs]`.
    pub init_std: [f64; 7],
    /// Process (random-walk) std added per predict.
    pub process_std: [f64; 7],
}

impl Default for KalmanParams {
    fn default() -> Self {
        let meas_std = [1.0, 1.0, 10.0, 0.01];
        Self {
            meas_std,
            init_std: [
                meas_std[0] * 3.0,
                meas_std[1] * 3.0,
                meas_std[2] * 3.0,
                meas_std[3] * 3.0,
                10.0,
                10.0,
                100.0,
            ],
            // Position noise at measurement scale with slow velocity drift
            // gives an overdamped response on static targets.
            process_std: [1.0, 1.0, 10.0, 1e-3, 0.1, 0.1, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVec,
    pub cov: StateCov,
}

impl KalmanState {
    pub fn bbox(&self) -> BBox {
        state_to_bbox(&self.mean)
    }

    pub fn max_asymmetry(&self) -> f64 {
        (self.cov - self.cov.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (self.cov + self.cov.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

pub fn bbox_to_measurement(b: &BBox) -> [f64; 4] {
    let c = b.center();
    [c.x, c.y, b.w * b.h, if b.h > 0.0 { b.w / b.h } else { 0.0 }]
}

fn state_to_bbox(m: &StateVec) -> BBox {
    let s = m[2].max(0.0);
    let r = m[3].max(MIN_ASPECT);
    let w = (s * r).sqrt();
    let h = if w > 0.0 { s / w } else { 0.0 };
    BBox::new(m[0] - w / 2.0, m[1] - h / 2.0, w, h)
}

fn measurement_matrix() -> MeasMat {
    let mut h = MeasMat::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn transition() -> StateCov {
    let mut f = StateCov::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    f
}

fn symmetrize(p: &StateCov) -> StateCov {
    (p + p.transpose()) * 0.5
}

pub fn kf_init(b: &BBox, params: &KalmanParams) -> Result<KalmanState> {
    if !(b.w > 0.0 && b.h > 0.0) {
        return Err(Error::DegenerateBox);
    }
    let z = bbox_to_measurement(b);
    let mean = StateVec::from_column_slice(&[z[0], z[1], z[2], z[3], 0.0, 0.0, 0.0]);
    let var = params.init_std.map(|s| s * s);
    let cov = StateCov::from_diagonal(&StateVec::from_column_slice(&var));
    Ok(KalmanState { mean, cov })
}

pub fn kf_predict(s: &KalmanState, params: &KalmanParams) -> KalmanState {
    let mut mean = s.mean;
    // Area may not go negative.
    if mean[2] + mean[6] <= 0.0 {
        mean[6] = 0.0;
    }
    let f = transition();
    let q = StateCov::from_diagonal(&StateVec::from_column_slice(&params.process_std.map(|v| v * v)));
    let mean = f * mean;
    let cov = symmetrize(&(f * s.cov * f.transpose() + q));
    KalmanState { mean, cov }
}

pub fn kf_update(s: &KalmanState, z: &BBox, params: &KalmanParams) -> KalmanState {
    let h = measurement_matrix();
    let zv = MeasVec::from_column_slice(&bbox_to_measurement(z));
    let r = MeasCov::from_diagonal(&MeasVec::from_column_slice(&params.meas_std.map(|v| v * v)));
    let innovation = zv - h * s.mean;
    let sys = h * s.cov * h.transpose() + r;
    let Some(sys_inv) = sys.try_inverse() else {
        return s.clone();
    };
    let gain = s.cov * h.transpose() * sys_inv;
    let mut mean = s.mean + gain * innovation;
    mean[3] = mean[3].max(MIN_ASPECT);
    mean[2] = mean[2].max(0.0);
    // Joseph form keeps the covariance symmetric positive semi-definite.
    let ikh = StateCov::identity() - gain * h;
    let cov = ikh * s.cov * ikh.transpose() + gain * r * gain.transpose();
    KalmanState {
        mean,
        cov: symmetrize(&cov),
    }
}
