//! Per-tick metrics rows and the run summary.

use std::io;

use serde::{Deserialize, Serialize};

use super::config::{Mode, ScenarioConfig};
use crate::lag::lag_in_window;
use crate::netsim::measure_head_latency;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub time_s: f64,
    pub tick: u64,
    /// Commanded head orientation (HMD seen from the virtual robot body).
    pub operator_yaw_deg: f64,
    pub operator_pitch_deg: f64,
    /// Robot head joints as last reported back to the operator.
    pub robot_yaw_deg: f64,
    pub robot_pitch_deg: f64,
    /// Windowed head-to-head lag; empty until enough history exists or
    /// while the head is still.
    pub lag_s: Option<f64>,
    pub live_fraction: f64,
    pub mesh_fraction: f64,
    pub blank_fraction: f64,
    /// Pose distance (meters plus radians) between the rendered virtual HMD
    /// and the virtual camera.
    pub calibration_residual: f64,
    /// Angle between commanded and reported head orientation.
    pub gap_deg: f64,
    pub mesh_cells: usize,
    pub scanning: bool,
}

pub fn write_csv<W: io::Write>(rows: &[MetricsRow], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(r: R) -> Result<Vec<MetricsRow>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub mode: Mode,
    pub seed: u64,
    pub ticks: u64,
    /// Mean and peak of the windowed lag column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_lag_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_lag_s: Option<f64>,
    /// Lag over the whole run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head_lag_s: Option<f64>,
    /// Lag over the second half of the network instability episode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode_lag_s: Option<f64>,
    pub steady_gap_deg: f64,
    pub steady_live_fraction: f64,
    pub steady_mesh_fraction: f64,
    pub steady_blank_fraction: f64,
    pub mean_live_fraction: f64,
    pub mean_mesh_fraction: f64,
    pub mean_blank_fraction: f64,
    /// Largest deviation of live + mesh + blank from one.
    pub max_partition_error: f64,
    pub final_calibration_residual: f64,
    pub mesh_cells: usize,
}

impl Summary {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("summary is always representable as TOML")
    }

    pub fn from_rows(config: &ScenarioConfig, rows: &[MetricsRow]) -> Self {
        let dt = config.tick_period();
        let lags: Vec<f64> = rows.iter().filter_map(|r| r.lag_s).collect();
        let op: Vec<f64> = rows.iter().map(|r| r.operator_yaw_deg).collect();
        let rb: Vec<f64> = rows.iter().map(|r| r.robot_yaw_deg).collect();
        let max_lag = config.metrics.lag_max_s;

        let episode_lag_s = config.network.instability.and_then(|ep| {
            let end = (((ep.start_s + ep.duration_s) / dt).round() as usize).min(op.len());
            let window = ((ep.duration_s / 2.0) / dt).round() as usize;
            let max_k = (max_lag / dt).round() as usize;
            lag_in_window(&op[..end], &rb[..end], dt, max_k, window).ok()
        });

        let steady_n = ((config.metrics.steady_state_s / dt).round() as usize).clamp(1, rows.len().max(1));
        let steady = &rows[rows.len().saturating_sub(steady_n)..];

        Self {
            name: config.name.clone(),
            mode: config.mode,
            seed: config.seed,
            ticks: rows.len() as u64,
            mean_lag_s: (!lags.is_empty()).then(|| mean(lags.iter().copied())),
            peak_lag_s: lags.iter().copied().reduce(f64::max),
            head_lag_s: measure_head_latency(&op, &rb, dt, max_lag).ok(),
            episode_lag_s,
            steady_gap_deg: mean(steady.iter().map(|r| r.gap_deg)),
            steady_live_fraction: mean(steady.iter().map(|r| r.live_fraction)),
            steady_mesh_fraction: mean(steady.iter().map(|r| r.mesh_fraction)),
            steady_blank_fraction: mean(steady.iter().map(|r| r.blank_fraction)),
            mean_live_fraction: mean(rows.iter().map(|r| r.live_fraction)),
            mean_mesh_fraction: mean(rows.iter().map(|r| r.mesh_fraction)),
            mean_blank_fraction: mean(rows.iter().map(|r| r.blank_fraction)),
            max_partition_error: rows
                .iter()
                .map(|r| (r.live_fraction + r.mesh_fraction + r.blank_fraction - 1.0).abs())
                .fold(0.0, f64::max),
            final_calibration_residual: rows.last().map_or(0.0, |r| r.calibration_residual),
            mesh_cells: rows.last().map_or(0, |r| r.mesh_cells),
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tick: u64, lag: Option<f64>) -> MetricsRow {
        MetricsRow {
            time_s: tick as f64 / 60.0,
            tick,
            operator_yaw_deg: 1.5,
            operator_pitch_deg: -0.25,
            robot_yaw_deg: 1.0 / 3.0,
            robot_pitch_deg: 0.0,
            lag_s: lag,
            live_fraction: 0.1,
            mesh_fraction: 0.2,
            blank_fraction: 0.7,
            calibration_residual: 1e-17,
            gap_deg: 20.000000000000004,
            mesh_cells: 12,
            scanning: tick.is_multiple_of(2),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![row(0, None), row(1, Some(0.5)), row(2, Some(2.0 / 3.0))];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_s,tick,operator_yaw_deg"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }
}
