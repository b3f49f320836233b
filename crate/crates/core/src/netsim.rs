//! Seeded delay channels for the operator-to-robot command path and the
//! robot-to-operator feedback path.
//!
//! Time is simulated (seconds as `f64`); nothing here reads the wall clock.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::lag::{lag_in_window, LagError};

/// Deliveries due within this many seconds of `now` count as due.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Instability {
    pub start: f64,
    pub duration: f64,
    pub extra_delay: f64,
}

impl Instability {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub base_delay: f64,
    pub jitter_stddev: f64,
    pub instability: Option<Instability>,
    pub seed: u64,
    pub tick_rate: f64,
}

impl ChannelConfig {
    pub fn fixed(base_delay: f64, tick_rate: f64) -> Self {
        Self {
            base_delay,
            jitter_stddev: 0.0,
            instability: None,
            seed: 0,
            tick_rate,
        }
    }
}

#[derive(Debug, Clone)]
struct InFlight<T> {
    payload: T,
    send_time: f64,
    deliver_time: f64,
}

/// FIFO link with per-message delay `base + max(0, jitter) + episode extra`.
/// Delivery times are kept monotone so jitter never reorders messages.
#[derive(Debug, Clone)]
pub struct DelayedChannel<T> {
    config: ChannelConfig,
    rng: ChaCha8Rng,
    jitter: Option<Normal<f64>>,
    queue: VecDeque<InFlight<T>>,
    last_send: f64,
    last_deliver: f64,
    sent: u64,
}

impl<T> DelayedChannel<T> {
    pub fn new(config: ChannelConfig) -> Self {
        let jitter = (config.jitter_stddev > 0.0)
            .then(|| Normal::new(0.0, config.jitter_stddev).expect("finite jitter stddev"));
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            jitter,
            config,
            queue: VecDeque::new(),
            last_send: f64::NEG_INFINITY,
            last_deliver: f64::NEG_INFINITY,
            sent: 0,
        }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    /// Delay that a message sent at `now` would see, before FIFO clamping.
    fn draw_delay(&mut self, now: f64) -> f64 {
        let jitter = match &self.jitter {
            Some(n) => n.sample(&mut self.rng).max(0.0),
            None => 0.0,
        };
        let extra = match self.config.instability {
            Some(ep) if ep.contains(now) => ep.extra_delay,
            _ => 0.0,
        };
        self.config.base_delay + jitter + extra
    }

    pub fn send(&mut self, payload: T, now: f64) {
        debug_assert!(now >= self.last_send, "send times must be monotone");
        let deliver_time = (now + self.draw_delay(now)).max(self.last_deliver);
        self.last_send = now;
        self.last_deliver = deliver_time;
        self.sent += 1;
        self.queue.push_back(InFlight {
            payload,
            send_time: now,
            deliver_time,
        });
    }

    /// Removes and returns every payload due at `now`, in send order.
    pub fn poll(&mut self, now: f64) -> Vec<T> {
        self.poll_timed(now).into_iter().map(|(p, _)| p).collect()
    }

    /// Like [`poll`](Self::poll) but also returns each payload's send time.
    pub fn poll_timed(&mut self, now: f64) -> Vec<(T, f64)> {
        let mut out = Vec::new();
        while self
            .queue
            .front()
            .is_some_and(|m| m.deliver_time <= now + TIME_EPS)
        {
            let m = self.queue.pop_front().expect("front checked");
            out.push((m.payload, m.send_time));
        }
        out
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    /// Delivery time of the oldest message still in flight.
    pub fn next_delivery(&self) -> Option<f64> {
        self.queue.front().map(|m| m.deliver_time)
    }
}

/// Head-to-head latency: the shift (seconds) that best aligns the robot yaw
/// trace with the operator yaw trace. Both traces are sampled every
/// `period` seconds on the same clock.
pub fn measure_head_latency(
    operator_trace: &[f64],
    robot_trace: &[f64],
    period: f64,
    max_lag: f64,
) -> Result<f64, LagError> {
    let n = operator_trace.len().min(robot_trace.len());
    if operator_trace.len() != robot_trace.len() {
        return Err(LagError::LengthMismatch {
            input: operator_trace.len(),
            output: robot_trace.len(),
        });
    }
    let max_lag = (max_lag / period).round() as usize;
    lag_in_window(operator_trace, robot_trace, period, max_lag, n.saturating_sub(max_lag))
}
