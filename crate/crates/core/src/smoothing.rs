//! First-order low-pass filter on the virtual tracking-space frame.
//!
//! Each update moves the smoothed pose a fixed fraction (`rate`) of the way
//! toward the target: linearly for translation, along the great arc for
//! rotation. Smaller rates give smoother output and more lag.

use nalgebra::{Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::lag::{estimate_lag, LagError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("filter rate must be in (0, 1], got {0}")]
    InvalidRate(f64),
    #[error(transparent)]
    Lag(#[from] LagError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub smoothed: Pose,
    pub rate: f64,
    /// Update interval, seconds.
    pub period: f64,
    pub filter_translation: bool,
    pub filter_rotation: bool,
}

impl FilterState {
    pub fn new(initial: Pose, rate: f64, period: f64) -> Result<Self, FilterError> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(FilterError::InvalidRate(rate));
        }
        Ok(Self {
            smoothed: initial,
            rate,
            period,
            filter_translation: true,
            filter_rotation: true,
        })
    }

    /// Jumps straight to `pose`, dropping the filter history.
    pub fn reset(&mut self, pose: Pose) {
        self.smoothed = pose;
    }

    /// Analytic low-frequency group delay, `(1 - rate) / rate * period`.
    pub fn nominal_delay(&self) -> f64 {
        (1.0 - self.rate) / self.rate * self.period
    }
}

pub fn filter_step(state: &FilterState, target: &Pose) -> FilterState {
    let rate = state.rate;
    let prev = state.smoothed;
    let translation = if !state.filter_translation || rate == 1.0 {
        target.translation
    } else {
        prev.translation + (target.translation - prev.translation) * rate
    };
    let rotation = if !state.filter_rotation || rate == 1.0 {
        target.rotation
    } else {
        arc_step(&prev.rotation, &target.rotation, rate)
    };
    FilterState {
        smoothed: Pose::new(rotation, translation),
        ..*state
    }
}

/// Rotation a fraction `t` of the way from `a` to `b` along the shorter arc.
/// The angle comes from `atan2`, so tiny residual rotations keep shrinking
/// geometrically instead of stalling at the `acos` precision floor.
fn arc_step(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, t: f64) -> UnitQuaternion<f64> {
    let d = a.inverse() * b;
    let q = d.quaternion();
    let (w, v) = if q.w < 0.0 { (-q.w, -q.imag()) } else { (q.w, q.imag()) };
    let s = v.norm();
    if s == 0.0 {
        return *b;
    }
    let angle = 2.0 * s.atan2(w);
    a * UnitQuaternion::from_axis_angle(&Unit::new_unchecked(v / s), angle * t)
}

/// Runs `signal` through a fresh filter and returns the filtered poses.
pub fn run_filter(rate: f64, period: f64, signal: &[Pose]) -> Result<Vec<Pose>, FilterError> {
    let Some(first) = signal.first() else {
        return Ok(Vec::new());
    };
    let mut state = FilterState::new(*first, rate, period)?;
    Ok(signal
        .iter()
        .map(|p| {
            state = filter_step(&state, p);
            state.smoothed
        })
        .collect())
}

/// Search horizon for the lag estimate: five filter time constants.
fn lag_horizon(rate: f64) -> usize {
    if rate >= 1.0 {
        return 1;
    }
    let tau_samples = -1.0 / (1.0 - rate).ln();
    (5.0 * tau_samples).ceil().max(1.0) as usize
}

/// Filter lag on `signal` (seconds), measured by cross-correlating input and
/// output yaw traces.
pub fn measure_filter_lag(rate: f64, period: f64, signal: &[Pose]) -> Result<f64, FilterError> {
    let output = run_filter(rate, period, signal)?;
    let yaw_in = unwrapped_yaw(signal);
    let yaw_out = unwrapped_yaw(&output);
    Ok(estimate_lag(&yaw_in, &yaw_out, period, lag_horizon(rate))?)
}

/// Yaw of each pose's forward axis, unwrapped to be continuous.
pub fn unwrapped_yaw(poses: &[Pose]) -> Vec<f64> {
    let mut out = Vec::with_capacity(poses.len());
    let mut prev: Option<f64> = None;
    for p in poses {
        let mut y = p.yaw_pitch().0;
        if let Some(q) = prev {
            while y - q > std::f64::consts::PI {
                y -= std::f64::consts::TAU;
            }
            while y - q < -std::f64::consts::PI {
                y += std::f64::consts::TAU;
            }
        }
        prev = Some(y);
        out.push(y);
    }
    out
}
