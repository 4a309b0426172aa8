//! Trace-driven session simulation.
//!
//! A session replays a network trace over an encoded frame sequence. Each
//! frame's packets are dropped according to the trace row covering its send
//! time, its arrival is modeled from the trace RTT and throughput, and the
//! timeout scheduler decides whether it is shown as decoded, recovered from a
//! partial decode, or predicted outright.

mod latency;
mod report;
mod session;
mod trace;

pub use latency::{LatencyModel, SchedulerConfig};
pub use report::{burst_report, conditional_loss, run_lengths, BurstBin, BurstHistogram, FrameRecord, SessionReport, SessionSummary};
pub use session::{fec_baseline, simulate_session, simulate_session_with, FrameOutcome, ShownFrame, FrameStatus, Scheme, SessionConfig, SessionInputs};
pub use trace::{
    generate_trace, generate_trace_with, GilbertParams, LossModel, NetworkTrace, Profile, ProfileStats, TraceConfig, TraceRow,
    MIN_TRACE_SECONDS, ROW_INTERVAL_MS,
};
