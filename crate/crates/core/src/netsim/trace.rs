use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROW_INTERVAL_MS: f64 = 100.0;
pub const MIN_TRACE_SECONDS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Profile {
    #[serde(rename = "4G")]
    FourG,
    #[serde(rename = "5G")]
    FiveG,
    #[serde(rename = "WiFi")]
    Wifi,
    #[serde(rename = "LEO")]
    Leo,
}

/// Long-run averages a generated trace is built around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileStats {
    pub throughput_mbps: f64,
    pub loss_rate: f64,
    pub rtt_ms: f64,
}

impl Profile {
    pub const ALL: [Profile; 4] = [Profile::FourG, Profile::FiveG, Profile::Wifi, Profile::Leo];

    pub fn stats(self) -> ProfileStats {
        let (throughput_mbps, loss_pct, rtt_ms) = match self {
            Profile::FourG => (32.5, 3.2, 36.0),
            Profile::FiveG => (61.7, 2.3, 30.0),
            Profile::Wifi => (72.8, 0.9, 15.0),
            Profile::Leo => (28.9, 9.4, 42.0),
        };
        ProfileStats {
            throughput_mbps,
            loss_rate: loss_pct / 100.0,
            rtt_ms,
        }
    }

    /// FEC redundancy an oracle with advance knowledge of the network picks.
    pub fn oracle_fec_overhead(self) -> f64 {
        match self {
            Profile::FourG => 0.40,
            Profile::FiveG => 0.35,
            Profile::Wifi => 0.25,
            Profile::Leo => 0.70,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::FourG => "4G",
            Profile::FiveG => "5G",
            Profile::Wifi => "WiFi",
            Profile::Leo => "LEO",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "4g" => Ok(Profile::FourG),
            "5g" => Ok(Profile::FiveG),
            "wifi" => Ok(Profile::Wifi),
            "leo" => Ok(Profile::Leo),
            _ => Err(Error::UnknownProfile(s.to_string())),
        }
    }
}

/// Two-state burst process over trace rows. Bad rows carry `bad_loss`; good
/// rows carry `good_share` of the profile mean, zero by default. The trace
/// is then rescaled so its mean is exactly the profile's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GilbertParams {
    pub mean_burst_ms: f64,
    pub bad_loss: f64,
    pub good_share: f64,
}

impl Default for GilbertParams {
    fn default() -> Self {
        Self {
            mean_burst_ms: 1000.0,
            bad_loss: 0.5,
            good_share: 0.0,
        }
    }
}

impl GilbertParams {
    pub fn good_loss(&self, mean_loss: f64) -> f64 {
        self.good_share * mean_loss
    }

    /// Fraction of rows in the bad state for the given mean loss.
    pub fn bad_fraction(&self, mean_loss: f64) -> f64 {
        let g = self.good_loss(mean_loss);
        ((mean_loss - g) / (self.bad_loss - g)).clamp(0.0, 1.0)
    }

    /// Row loss rates: geometric bursts at uniformly random offsets, with the
    /// number of bad rows fixed to the expected occupancy.
    fn rows(&self, n: usize, mean_loss: f64, rng: &mut impl Rng) -> Vec<f64> {
        let bad_rows = ((self.bad_fraction(mean_loss) * n as f64).round() as usize).min(n);
        let p = (ROW_INTERVAL_MS / self.mean_burst_ms).clamp(1e-6, 1.0);
        let geo = Geometric::new(p).expect("probability in (0, 1]");
        let mut bursts = Vec::new();
        let mut total = 0;
        while total < bad_rows {
            let len = (1 + geo.sample(rng) as usize).min(bad_rows - total);
            bursts.push(len);
            total += len;
        }
        let good_rows = n - bad_rows;
        let mut offsets: Vec<usize> = bursts.iter().map(|_| rng.random_range(0..=good_rows)).collect();
        offsets.sort_unstable();
        let good = self.good_loss(mean_loss);
        let mut out = Vec::with_capacity(n);
        let mut placed_good = 0;
        for (&offset, &len) in offsets.iter().zip(&bursts) {
            out.extend(std::iter::repeat_n(good, offset - placed_good));
            placed_good = offset;
            out.extend(std::iter::repeat_n(self.bad_loss, len));
        }
        out.extend(std::iter::repeat_n(good, good_rows - placed_good));
        out
    }
}

/// Scales `loss` by the factor that makes its capped mean equal `target`.
fn normalize_mean(loss: &mut [f64], target: f64) {
    let n = loss.len() as f64;
    let capped_mean = |s: f64| loss.iter().map(|l| (l * s).min(1.0)).sum::<f64>() / n;
    if loss.iter().all(|&l| l == 0.0) || capped_mean(f64::MAX) < target {
        return;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while capped_mean(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if capped_mean(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for l in loss.iter_mut() {
        *l = (*l * hi).min(1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossModel {
    Gilbert(GilbertParams),
    /// Every row carries the profile mean; packet losses are independent.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub loss: LossModel,
    pub throughput_cv: f64,
    pub rtt_cv: f64,
    /// Lag-one correlation of the log-throughput and log-RTT processes.
    pub correlation: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            loss: LossModel::Gilbert(GilbertParams::default()),
            throughput_cv: 0.3,
            rtt_cv: 0.2,
            correlation: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_ms: f64,
    pub throughput_mbps: f64,
    pub loss_rate: f64,
    pub rtt_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTrace {
    pub name: String,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
}

/// Stationary lognormal AR(1) with the given mean and coefficient of variation.
struct LogAr1 {
    mu: f64,
    sigma: f64,
    phi: f64,
    state: f64,
}

impl LogAr1 {
    fn new(mean: f64, cv: f64, phi: f64, rng: &mut impl Rng) -> Self {
        let sigma = (1.0 + cv * cv).ln().sqrt();
        let mu = mean.ln() - sigma * sigma / 2.0;
        let z: f64 = StandardNormal.sample(rng);
        Self {
            mu,
            sigma,
            phi,
            state: sigma * z,
        }
    }

    fn next(&mut self, rng: &mut impl Rng) -> f64 {
        let value = (self.mu + self.state).exp();
        let z: f64 = StandardNormal.sample(rng);
        self.state = self.phi * self.state + self.sigma * (1.0 - self.phi * self.phi).sqrt() * z;
        value
    }
}

pub fn generate_trace(profile: Profile, duration_s: f64, seed: u64) -> Result<NetworkTrace> {
    generate_trace_with(profile, duration_s, seed, &TraceConfig::default())
}

pub fn generate_trace_with(profile: Profile, duration_s: f64, seed: u64, cfg: &TraceConfig) -> Result<NetworkTrace> {
    if !(duration_s >= MIN_TRACE_SECONDS) {
        return Err(Error::Config(format!("trace duration must be at least {MIN_TRACE_SECONDS} s, got {duration_s}")));
    }
    let stats = profile.stats();
    let n = (duration_s * 1000.0 / ROW_INTERVAL_MS).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut thr = LogAr1::new(stats.throughput_mbps, cfg.throughput_cv, cfg.correlation, &mut rng);
    let mut rtt = LogAr1::new(stats.rtt_ms, cfg.rtt_cv, cfg.correlation, &mut rng);
    let mut loss = vec![stats.loss_rate; n];
    if let LossModel::Gilbert(g) = cfg.loss {
        loss = g.rows(n, stats.loss_rate, &mut rng);
        normalize_mean(&mut loss, stats.loss_rate);
    }
    let rows = loss
        .into_iter()
        .enumerate()
        .map(|(i, loss_rate)| TraceRow {
            t_ms: i as f64 * ROW_INTERVAL_MS,
            throughput_mbps: thr.next(&mut rng),
            loss_rate,
            rtt_ms: rtt.next(&mut rng),
        })
        .collect();
    Ok(NetworkTrace {
        name: profile.name().to_string(),
        seed,
        rows,
    })
}

impl NetworkTrace {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::format("trace", "no rows"));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 && r.t_ms <= self.rows[i - 1].t_ms {
                return Err(Error::format("trace", format!("row {i}: timestamps must increase")));
            }
            if !(0.0..=1.0).contains(&r.loss_rate) {
                return Err(Error::format("trace", format!("row {i}: loss rate {} outside [0, 1]", r.loss_rate)));
            }
            if !(r.throughput_mbps > 0.0) {
                return Err(Error::format("trace", format!("row {i}: throughput must be positive")));
            }
            if !(r.rtt_ms >= 0.0) {
                return Err(Error::format("trace", format!("row {i}: negative rtt")));
            }
        }
        Ok(())
    }

    /// End of the last row's interval.
    pub fn duration_ms(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(_), Some(last)) => last.t_ms + self.row_span(self.rows.len() - 1),
            _ => 0.0,
        }
    }

    fn row_span(&self, i: usize) -> f64 {
        match self.rows.get(i + 1) {
            Some(next) => next.t_ms - self.rows[i].t_ms,
            None if i > 0 => self.rows[i].t_ms - self.rows[i - 1].t_ms,
            None => ROW_INTERVAL_MS,
        }
    }

    /// The row in effect at `t_ms`.
    pub fn row_at(&self, t_ms: f64) -> Option<&TraceRow> {
        if t_ms < self.rows.first()?.t_ms || t_ms >= self.duration_ms() {
            return None;
        }
        let i = self.rows.partition_point(|r| r.t_ms <= t_ms);
        self.rows.get(i.saturating_sub(1))
    }

    fn mean_of(&self, f: impl Fn(&TraceRow) -> f64) -> f64 {
        crate::metrics::mean(self.rows.iter().map(f))
    }

    pub fn mean_throughput(&self) -> f64 {
        self.mean_of(|r| r.throughput_mbps)
    }

    pub fn mean_loss_rate(&self) -> f64 {
        self.mean_of(|r| r.loss_rate)
    }

    pub fn mean_rtt(&self) -> f64 {
        self.mean_of(|r| r.rtt_ms)
    }

    /// A constant trace, handy for controlled experiments.
    pub fn constant(name: &str, duration_s: f64, row: TraceRow) -> Self {
        let n = (duration_s * 1000.0 / ROW_INTERVAL_MS).ceil() as usize;
        let rows = (0..n)
            .map(|i| TraceRow {
                t_ms: i as f64 * ROW_INTERVAL_MS,
                ..row
            })
            .collect();
        Self {
            name: name.to_string(),
            seed: 0,
            rows,
        }
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read, name: &str, seed: u64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_ms", "throughput_mbps", "loss_rate", "rtt_ms"] {
            return Err(Error::format("trace", format!("unexpected header {headers:?}")));
        }
        let rows = rd.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        let trace = Self {
            name: name.to_string(),
            seed,
            rows,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string();
        Self::read_csv(std::fs::File::open(path)?, &name, 0)
    }
}
