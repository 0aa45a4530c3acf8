//! Deterministic stand-ins for the physical rig: a ground-truth sinusoid
//! source, a tracker channel with latency / jitter / onset-lag / noise, and
//! an ideal kinematic robot plant driven by the trajectory generator.
//!
//! Everything runs on virtual time and seeded randomness: identical
//! configurations and seeds produce bit-identical traces.

use crate::trajgen::{Generator, Target, TrajError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time {t_s} s is outside the trace span")]
    OutOfRange { t_s: f64 },
    #[error("trace has no samples")]
    Empty,
    #[error("trace CSV parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },
    #[error("plant retarget rejected: {0}")]
    Retarget(#[from] TrajError),
}

/// Ground-truth excitation: at rest until `start_time_s`, then a sinusoid.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidSpec {
    /// Peak value, in the trace's value unit (rad or m).
    pub amplitude: f64,
    pub frequency_hz: f64,
    /// Joint index or Cartesian axis index the motion applies to.
    pub axis: usize,
    /// Motion is identically zero before this time.
    pub start_time_s: f64,
}

impl Default for SinusoidSpec {
    fn default() -> Self {
        Self {
            amplitude: 0.4,
            frequency_hz: 0.5,
            axis: 0,
            start_time_s: 1.0,
        }
    }
}

impl SinusoidSpec {
    pub fn period_s(&self) -> f64 {
        1.0 / self.frequency_hz
    }
}

/// Ground-truth value at time `t`: zero before motion start, then
/// `amplitude * sin(2*pi*frequency*(t - start))`.
pub fn sample_truth(spec: &SinusoidSpec, t: f64) -> f64 {
    if t < spec.start_time_s {
        0.0
    } else {
        let phase = 2.0 * std::f64::consts::PI * spec.frequency_hz * (t - spec.start_time_s);
        spec.amplitude * phase.sin()
    }
}

/// Tracker channel model: sampling at `sample_rate_hz`, each sample taken
/// at receiver time `t` reports the truth evaluated at `t - d(t) + lead_s`
/// plus observation noise, where the delay `d(t)` is Gaussian around
/// `steady_delay_s` with an extra Gaussian onset term inside the onset
/// window after motion start.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerChannelConfig {
    pub steady_delay_s: f64,
    pub steady_jitter_sd_s: f64,
    /// Mean extra delay within the onset window (adds to the steady term).
    pub onset_extra_delay_s: f64,
    pub onset_sd_s: f64,
    /// Length of the onset regime, seconds after motion start.
    pub onset_window_s: f64,
    /// Observation noise sd, in the trace's value unit.
    pub pos_noise_sd: f64,
    /// Predictive lead of the tracker (produces negative latency).
    pub lead_s: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for TrackerChannelConfig {
    fn default() -> Self {
        Self {
            steady_delay_s: 0.0,
            steady_jitter_sd_s: 0.0,
            onset_extra_delay_s: 0.0,
            onset_sd_s: 0.0,
            onset_window_s: 2.0,
            pos_noise_sd: 0.0,
            lead_s: 0.0,
            sample_rate_hz: 90.0,
            seed: 0,
        }
    }
}

impl TrackerChannelConfig {
    /// The two-regime latency profile reported for the reference headset:
    /// steady mean 27.8 ms (sd 13.7 ms) and onset total 177.4 ms (sd 78 ms,
    /// of which the steady term contributes its own 13.7 ms).
    pub fn headset_like(seed: u64) -> Self {
        Self {
            steady_delay_s: 0.0278,
            steady_jitter_sd_s: 0.0137,
            onset_extra_delay_s: 0.1774 - 0.0278,
            onset_sd_s: 0.078,
            onset_window_s: 2.0,
            pos_noise_sd: 0.001,
            lead_s: 0.0,
            sample_rate_hz: 90.0,
            seed,
        }
    }
}

/// Who produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSource {
    GroundTruth,
    Tracker,
    RobotReported,
}

impl TraceSource {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceSource::GroundTruth => "ground_truth",
            TraceSource::Tracker => "tracker",
            TraceSource::RobotReported => "robot_reported",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ground_truth" => Some(TraceSource::GroundTruth),
            "tracker" => Some(TraceSource::Tracker),
            "robot_reported" => Some(TraceSource::RobotReported),
            _ => None,
        }
    }
}

/// Time-ordered samples from one source; timestamps strictly increase.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub source: TraceSource,
    /// `(timestamp_us, values)`; every sample has the same value count.
    pub samples: Vec<(u64, Vec<f64>)>,
}

impl Trace {
    pub fn new(source: TraceSource) -> Self {
        Self {
            source,
            samples: Vec::new(),
        }
    }

    /// Append a sample; timestamps must strictly increase.
    pub fn push(&mut self, timestamp_us: u64, values: Vec<f64>) {
        if let Some((last, first_vals)) = self.samples.last().map(|(t, v)| (*t, v.len())) {
            assert!(
                timestamp_us > last,
                "trace timestamps must strictly increase"
            );
            assert_eq!(values.len(), first_vals, "trace width must be constant");
        }
        self.samples.push((timestamp_us, values));
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn width(&self) -> usize {
        self.samples.first().map_or(0, |(_, v)| v.len())
    }

    pub fn start_s(&self) -> Option<f64> {
        self.samples.first().map(|(t, _)| *t as f64 * 1e-6)
    }

    pub fn end_s(&self) -> Option<f64> {
        self.samples.last().map(|(t, _)| *t as f64 * 1e-6)
    }

    /// `(t_s, value)` pairs of one column, for fitting.
    pub fn column(&self, col: usize) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .map(|(t, v)| (*t as f64 * 1e-6, v[col]))
            .collect()
    }

    /// Linearly interpolated value of `col` at `t_s`; errors outside the span.
    pub fn value_at(&self, t_s: f64, col: usize) -> Result<f64, SimError> {
        let (start, end) = match (self.start_s(), self.end_s()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(SimError::Empty),
        };
        if t_s < start - 1e-12 || t_s > end + 1e-12 {
            return Err(SimError::OutOfRange { t_s });
        }
        Ok(self.value_at_clamped(t_s, col))
    }

    /// Linearly interpolated value of `col` at `t_s`, clamped to the first/
    /// last sample outside the span (the tracker reports the oldest or
    /// newest pose it knows at the edges).
    pub fn value_at_clamped(&self, t_s: f64, col: usize) -> f64 {
        assert!(!self.samples.is_empty(), "empty trace");
        let t_us = t_s * 1e6;
        let idx = self.samples.partition_point(|(ts, _)| (*ts as f64) <= t_us);
        if idx == 0 {
            return self.samples[0].1[col];
        }
        if idx == self.samples.len() {
            return self.samples[idx - 1].1[col];
        }
        let (t0, v0) = (&self.samples[idx - 1].0, &self.samples[idx - 1].1);
        let (t1, v1) = (&self.samples[idx].0, &self.samples[idx].1);
        let alpha = (t_us - *t0 as f64) / (*t1 as f64 - *t0 as f64);
        v0[col] + alpha * (v1[col] - v0[col])
    }

    /// Write traces as CSV: `source,timestamp_us,v0..vn`, one header row.
    /// All traces in one file must have the same width.
    pub fn write_csv<W: Write>(traces: &[&Trace], out: &mut W) -> io::Result<()> {
        let width = traces.first().map_or(0, |t| t.width());
        write!(out, "source,timestamp_us")?;
        for i in 0..width {
            write!(out, ",v{i}")?;
        }
        writeln!(out)?;
        for tr in traces {
            assert_eq!(tr.width(), width, "mixed trace widths in one CSV");
            for (ts, vals) in &tr.samples {
                write!(out, "{},{}", tr.source.as_str(), ts)?;
                for v in vals {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    /// Parse a CSV written by [`Trace::write_csv`]; consecutive rows with
    /// the same source form one trace.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<Trace>, SimError> {
        let mut traces: Vec<Trace> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| SimError::CsvParse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if i == 0 {
                if !line.starts_with("source,timestamp_us") {
                    return Err(SimError::CsvParse {
                        line: 1,
                        msg: "missing header".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let err = |msg: &str| SimError::CsvParse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let source = TraceSource::parse(fields.next().ok_or_else(|| err("missing source"))?)
                .ok_or_else(|| err("unknown source"))?;
            let ts: u64 = fields
                .next()
                .ok_or_else(|| err("missing timestamp"))?
                .parse()
                .map_err(|_| err("bad timestamp"))?;
            let values = fields
                .map(|f| f.parse::<f64>().map_err(|_| err("bad value")))
                .collect::<Result<Vec<f64>, _>>()?;
            match traces.last_mut() {
                Some(t) if t.source == source => t.push(ts, values),
                _ => {
                    let mut t = Trace::new(source);
                    t.push(ts, values);
                    traces.push(t);
                }
            }
        }
        Ok(traces)
    }
}

/// Pass a truth trace through the tracker channel.
///
/// Samples are emitted on the `sample_rate_hz` grid across the truth span
/// (receiver clock).  Each sample at receiver time `t` evaluates the truth
/// at `t - d(t) + lead_s` with edge clamping, where `d(t)` draws
/// `Normal(steady_delay, steady_jitter)` plus, for
/// `motion_start <= t < motion_start + onset_window`, an extra
/// `Normal(onset_extra, onset_sd)`.  Independent `Normal(0, pos_noise_sd)`
/// noise is added per value column.  Deterministic given the seed.
pub fn track(
    truth: &Trace,
    cfg: &TrackerChannelConfig,
    motion_start_s: f64,
) -> Result<Trace, SimError> {
    if truth.samples.len() < 2 {
        return Err(SimError::Empty);
    }
    let start = truth.start_s().expect("non-empty");
    let end = truth.end_s().expect("non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steady =
        Normal::new(cfg.steady_delay_s, cfg.steady_jitter_sd_s).expect("sd >= 0 checked by caller");
    let onset =
        Normal::new(cfg.onset_extra_delay_s, cfg.onset_sd_s).expect("sd >= 0 checked by caller");
    let noise = Normal::new(0.0, cfg.pos_noise_sd).expect("sd >= 0 checked by caller");

    let width = truth.width();
    let mut out = Trace::new(TraceSource::Tracker);
    let mut k = 0u64;
    loop {
        let t = start + k as f64 / cfg.sample_rate_hz;
        if t > end + 1e-9 {
            break;
        }
        let mut delay = steady.sample(&mut rng);
        let in_onset = t >= motion_start_s && t < motion_start_s + cfg.onset_window_s;
        if in_onset {
            delay += onset.sample(&mut rng);
        }
        let t_eval = t - delay + cfg.lead_s;
        let values = (0..width)
            .map(|c| truth.value_at_clamped(t_eval, c) + noise.sample(&mut rng))
            .collect();
        out.push((t * 1e6).round() as u64, values);
        k += 1;
    }
    Ok(out)
}

/// Plant loop timing.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    pub dt_s: f64,
    /// Record every `decimation`-th tick (1 = every tick).
    pub decimation: u32,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            dt_s: 1e-3,
            decimation: 1,
        }
    }
}

/// Drive the generator as an ideal kinematic plant for `duration_s`.
///
/// Each tick calls `retarget(t)`; a returned target is applied before
/// stepping.  The recorded trace holds all joint positions, including the
/// initial state at t = 0.
pub fn run_plant<F>(
    generator: &mut Generator,
    duration_s: f64,
    cfg: &PlantConfig,
    mut retarget: F,
) -> Result<Trace, SimError>
where
    F: FnMut(f64) -> Option<Target>,
{
    let mut trace = Trace::new(TraceSource::RobotReported);
    trace.push(0, generator.state().position.clone());
    let ticks = (duration_s / cfg.dt_s).round() as u64;
    for i in 1..=ticks {
        let t = i as f64 * cfg.dt_s;
        if let Some(target) = retarget(t) {
            generator.set_target(&target)?;
        }
        let (state, _) = generator.step(cfg.dt_s);
        if i % cfg.decimation as u64 == 0 {
            trace.push((t * 1e6).round() as u64, state.position);
        }
    }
    Ok(trace)
}

/// Record the truth sinusoid itself on a fixed grid (ground-truth trace).
pub fn truth_trace(spec: &SinusoidSpec, duration_s: f64, rate_hz: f64) -> Trace {
    let mut trace = Trace::new(TraceSource::GroundTruth);
    let n = (duration_s * rate_hz).round() as u64;
    for k in 0..=n {
        let t = k as f64 / rate_hz;
        trace.push((t * 1e6).round() as u64, vec![sample_truth(spec, t)]);
    }
    trace
}
