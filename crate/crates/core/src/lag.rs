//! Time-lag estimation between two uniformly sampled traces.
//!
//! The lag is the non-negative shift (in whole samples) that maximizes the
//! Pearson correlation between a window of the output trace and the input
//! trace shifted back by that many samples. Ties go to the smaller shift.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LagError {
    #[error("trace has zero variance over the analysis window")]
    DegenerateSignal,
    #[error("traces too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("traces differ in length ({input} vs {output})")]
    LengthMismatch { input: usize, output: usize },
}

/// Lag in seconds over the whole trace, searching shifts `0..=max_lag`
/// samples. The first `max_lag` output samples are used only as shifted
/// input.
pub fn estimate_lag(input: &[f64], output: &[f64], period: f64, max_lag: usize) -> Result<f64, LagError> {
    if input.len() != output.len() {
        return Err(LagError::LengthMismatch {
            input: input.len(),
            output: output.len(),
        });
    }
    lag_in_window(input, output, period, max_lag, output.len().saturating_sub(max_lag))
}

/// Lag of the output samples in `[start, end)` relative to the input, where
/// `start = end - window`. Requires `start >= max_lag`.
pub fn lag_in_window(
    input: &[f64],
    output: &[f64],
    period: f64,
    max_lag: usize,
    window: usize,
) -> Result<f64, LagError> {
    let end = output.len().min(input.len());
    let needed = max_lag + window.max(2);
    if window < 2 || end < needed {
        return Err(LagError::TooShort { needed, got: end });
    }
    let start = end - window;
    let out = &output[start..end];
    let out_mean = mean(out);
    let out_var: f64 = out.iter().map(|y| (y - out_mean) * (y - out_mean)).sum();
    if out_var == 0.0 {
        return Err(LagError::DegenerateSignal);
    }
    let mut best: Option<(usize, f64)> = None;
    let mut any_variance = false;
    for k in 0..=max_lag {
        let inp = &input[start - k..end - k];
        let in_mean = mean(inp);
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        for (x, y) in inp.iter().zip(out) {
            let dx = x - in_mean;
            sxy += dx * (y - out_mean);
            sxx += dx * dx;
        }
        if sxx == 0.0 {
            continue;
        }
        any_variance = true;
        let r = sxy / (sxx * out_var).sqrt();
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((k, r));
        }
    }
    match best {
        Some((k, _)) if any_variance => Ok(k as f64 * period),
        _ => Err(LagError::DegenerateSignal),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
