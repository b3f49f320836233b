//! Scenario runner: configuration, built-in presets, the simulation engine,
//! metrics and the mode comparison.

pub mod config;
pub mod engine;
pub mod metrics;
pub mod presets;
pub mod wire;

use std::fmt;

use thiserror::Error;

pub use config::{Action, ConfigError, Mode, ScenarioConfig, ScriptEvent};
pub use engine::{Command, CommandError, Engine, Snapshot};
pub use metrics::{MetricsRow, Summary};

use crate::geometry::{Pose, Vec3};
use crate::smoothing::{measure_filter_lag, FilterError};
use crate::world::PointCloudFrame;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub summary: Summary,
    /// Full point cloud from the last reported camera pose.
    pub last_frame: PointCloudFrame,
}

/// Runs a scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    let mut engine = Engine::new(config.clone())?;
    let mut rows = Vec::with_capacity(config.total_ticks() as usize);
    while !engine.is_finished() {
        rows.push(engine.step());
    }
    let summary = Summary::from_rows(config, &rows);
    log::info!(
        "{} [{}]: {} ticks, mean blank {:.4}",
        config.name,
        config.mode,
        rows.len(),
        summary.mean_blank_fraction
    );
    Ok(RunOutput {
        last_frame: engine.capture_latest_frame(),
        rows,
        summary,
    })
}

/// Summaries of the same scenario in every display mode, in
/// [`Mode::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub summaries: Vec<Summary>,
}

impl Comparison {
    pub fn get(&self, mode: Mode) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.mode == mode)
    }

    /// Whether time-averaged blank fractions are ordered fixed-RGB >=
    /// decoupled >= decoupled with mesh.
    pub fn blank_ordering_holds(&self) -> bool {
        let b = |m| self.get(m).map(|s| s.mean_blank_fraction);
        match (b(Mode::FixedRgb), b(Mode::Decoupled), b(Mode::DecoupledWithMesh)) {
            (Some(f), Some(d), Some(m)) => f >= d && d >= m,
            _ => false,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<20} {:>10} {:>10} {:>10} {:>12} {:>10}",
            "mode", "live", "mesh", "blank", "steady_blank", "lag_s"
        )?;
        for s in &self.summaries {
            let lag = s.head_lag_s.map_or_else(|| "-".to_string(), |l| format!("{l:.3}"));
            writeln!(
                f,
                "{:<20} {:>10.4} {:>10.4} {:>10.4} {:>12.4} {:>10}",
                s.mode.name(),
                s.mean_live_fraction,
                s.mean_mesh_fraction,
                s.mean_blank_fraction,
                s.steady_blank_fraction,
                lag
            )?;
        }
        Ok(())
    }
}

/// Runs `base` once per mode, concurrently. The mode field of `base` is
/// ignored.
pub fn compare_modes(base: &ScenarioConfig) -> Result<Comparison, ConfigError> {
    base.validate()?;
    let results: Vec<Result<Summary, ConfigError>> = std::thread::scope(|s| {
        let handles: Vec<_> = Mode::ALL
            .iter()
            .map(|&mode| {
                let cfg = ScenarioConfig { mode, ..base.clone() };
                s.spawn(move || run_scenario(&cfg).map(|o| o.summary))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });
    Ok(Comparison {
        summaries: results.into_iter().collect::<Result<_, _>>()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSweepRow {
    pub rate: f64,
    pub lag_ms: f64,
}

/// Filter lag for each rate, measured on the scenario's commanded head yaw.
pub fn sweep_filter(config: &ScenarioConfig, rates: &[f64]) -> Result<Vec<FilterSweepRow>, HarnessError> {
    let out = run_scenario(config)?;
    let signal: Vec<Pose> = out
        .rows
        .iter()
        .map(|r| Pose::from_yaw_pitch(r.operator_yaw_deg.to_radians(), 0.0, Vec3::zeros()))
        .collect();
    rates
        .iter()
        .map(|&rate| {
            let lag = measure_filter_lag(rate, config.tick_period(), &signal)?;
            Ok(FilterSweepRow {
                rate,
                lag_ms: lag * 1000.0,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[FilterSweepRow], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rate", "lag_ms"])?;
    for r in rows {
        out.write_record([r.rate.to_string(), r.lag_ms.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
