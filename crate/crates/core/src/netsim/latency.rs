use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed per-frame processing times, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub t_server_render_ms: f64,
    pub t_server_encode_ms: f64,
    pub t_client_decode_ms: f64,
    pub t_inference_ms: f64,
    pub t_gs_ms: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            t_server_render_ms: 3.6,
            t_server_encode_ms: 4.5,
            t_client_decode_ms: 7.2,
            t_inference_ms: 22.0,
            t_gs_ms: 7.0,
        }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.t_server_render_ms,
            self.t_server_encode_ms,
            self.t_client_decode_ms,
            self.t_inference_ms,
            self.t_gs_ms,
        ];
        if all.iter().all(|t| *t >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config("latency components must be non-negative".into()))
        }
    }

    pub fn transmission_ms(bytes: usize, throughput_mbps: f64) -> f64 {
        bytes as f64 * 8.0 / (throughput_mbps * 1000.0)
    }

    /// Input-to-decoded-frame latency without recovery.
    pub fn non_recovery_ms(&self, rtt_ms: f64, bytes: usize, throughput_mbps: f64) -> f64 {
        rtt_ms + self.t_server_render_ms + self.t_server_encode_ms + Self::transmission_ms(bytes, throughput_mbps) + self.t_client_decode_ms
    }

    /// Display time of a recovered frame: recovery starts once the frame has
    /// arrived or the timeout fires, but never before the game state is ready.
    pub fn recovery_ms(&self, timeout_ms: f64, non_recovery_ms: f64) -> f64 {
        timeout_ms.min(non_recovery_ms).max(self.t_gs_ms) + self.t_inference_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub budget_ms: f64,
    pub frame_interval_ms: f64,
    pub timeout_ms: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self::new(80.0, LatencyModel::default().t_inference_ms)
    }
}

impl SchedulerConfig {
    /// Timeout that leaves exactly `t_inference_ms` of the budget for recovery.
    pub fn new(budget_ms: f64, t_inference_ms: f64) -> Self {
        Self {
            budget_ms,
            frame_interval_ms: 1000.0 / 30.0,
            timeout_ms: budget_ms - t_inference_ms,
        }
    }

    /// Packets arriving later than this are useless.
    pub fn deadline_ms(&self) -> f64 {
        self.budget_ms + self.frame_interval_ms
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_ms > 0.0 && self.timeout_ms < self.budget_ms) {
            return Err(Error::Config(format!(
                "timeout {} ms must lie strictly inside the {} ms budget",
                self.timeout_ms, self.budget_ms
            )));
        }
        if !(self.frame_interval_ms > 0.0) {
            return Err(Error::Config("frame interval must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_timeout_is_budget_minus_inference() {
        let s = SchedulerConfig::default();
        assert_eq!(s.timeout_ms, 58.0);
        assert!((s.deadline_ms() - 113.333_333).abs() < 1e-3);
        s.validate().unwrap();
    }

    #[test]
    fn latency_sums_components() {
        let m = LatencyModel::default();
        // 10 kB at 40 Mbps takes 2 ms.
        assert!((LatencyModel::transmission_ms(10_000, 40.0) - 2.0).abs() < 1e-12);
        assert!((m.non_recovery_ms(36.0, 10_000, 40.0) - (36.0 + 3.6 + 4.5 + 2.0 + 7.2)).abs() < 1e-12);
    }

    #[test]
    fn recovery_time_is_clamped() {
        let m = LatencyModel::default();
        assert_eq!(m.recovery_ms(58.0, 90.0), 80.0);
        assert_eq!(m.recovery_ms(58.0, 40.0), 62.0);
        assert_eq!(m.recovery_ms(58.0, 3.0), 29.0);
    }

    #[test]
    fn bad_timeout_rejected() {
        let mut s = SchedulerConfig::default();
        s.timeout_ms = 80.0;
        assert!(s.validate().is_err());
    }
}
