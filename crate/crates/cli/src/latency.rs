//! Latency experiment: the robot moves its first joint in a sinusoid, the
//! tracker channel observes it, and the phase difference between the
//! robot-reported and tracker-reported traces is measured per trial in the
//! onset and steady-state windows.

use crate::config::{config_err, Mode, RunConfig};
use crate::output::RunArtifacts;
use anyhow::Context;
use std::fmt::Write as _;
use telekin::analysis::{latency_report, LatencyReport};
use telekin::sim::{run_plant, sample_truth, track, PlantConfig, SinusoidSpec, Trace};
use telekin::trajgen::{make_generator, KinState, Limits, Target};

pub struct LatencyOutcome {
    pub report: LatencyReport,
    pub artifacts: RunArtifacts,
}

/// Per-command defaults: joint-space sinusoid amplitude 0.4 rad over a
/// 20 s trial, plant limits relaxed enough to follow it closely.
pub fn resolve(cfg: &RunConfig) -> RunConfig {
    let mut cfg = cfg.clone();
    cfg.amp.get_or_insert(0.4);
    cfg.duration_s.get_or_insert(20.0);
    cfg.vmax.get_or_insert(2.0);
    cfg.amax.get_or_insert(10.0);
    cfg
}

pub fn run(raw: &RunConfig) -> anyhow::Result<LatencyOutcome> {
    if raw.mode == Mode::Udp {
        return Err(config_err(
            "the latency experiment characterizes the simulated channel; only mode = sim is supported",
        ));
    }
    let cfg = resolve(raw);
    let amp = cfg.amp.unwrap();
    let duration = cfg.duration_s.unwrap();
    let spec = SinusoidSpec {
        amplitude: amp,
        frequency_hz: cfg.freq_hz,
        axis: 0,
        start_time_s: cfg.motion_start_s,
    };

    let mut artifacts = RunArtifacts::new();
    let mut pairs: Vec<(Trace, Trace)> = Vec::with_capacity(cfg.trials as usize);
    for trial in 0..cfg.trials {
        // one joint follows the excitation; the plant trace is both the
        // channel input and the phase reference, so generator lag cancels
        let mut generator = make_generator(
            Limits::uniform(1, cfg.vmax.unwrap(), cfg.amax.unwrap()),
            KinState::at_rest(vec![0.0]),
        )
        .context("building the plant generator")?;
        let plant_cfg = PlantConfig {
            dt_s: 1e-3,
            decimation: cfg.decimation,
        };
        // velocity-matched retargeting keeps the plant phase-transparent,
        // so the channel is the only delay between the two traces
        let omega = 2.0 * std::f64::consts::PI * cfg.freq_hz;
        let plant = run_plant(&mut generator, duration, &plant_cfg, |t| {
            let velocity = if t < spec.start_time_s {
                0.0
            } else {
                amp * omega * (omega * (t - spec.start_time_s)).cos()
            };
            Some(Target {
                position: vec![sample_truth(&spec, t)],
                velocity: vec![velocity],
            })
        })
        .context("running the plant")?;

        let channel = cfg.tracker_channel(cfg.seed.wrapping_add(trial as u64));
        let tracker =
            track(&plant, &channel, cfg.motion_start_s).context("running the tracker channel")?;

        let mut csv = Vec::new();
        Trace::write_csv(&[&plant, &tracker], &mut csv).context("serializing traces")?;
        artifacts.add(format!("traces/trial_{trial:02}.csv"), csv);
        pairs.push((plant, tracker));
    }

    let report = latency_report(&pairs, cfg.freq_hz, cfg.motion_start_s, 0)
        .map_err(|e| anyhow::anyhow!("latency analysis failed: {e}"))?;

    let mut report_csv = String::from("trial,onset_ms,steady_ms\n");
    for (i, (onset, steady)) in report
        .onset_ms
        .iter()
        .zip(report.steady_ms.iter())
        .enumerate()
    {
        let _ = writeln!(report_csv, "{i},{onset},{steady}");
    }
    artifacts.add("report.csv", report_csv.into_bytes());

    let summary = summarize(&cfg, &report);
    artifacts.add("summary.txt", summary.clone().into_bytes());
    artifacts.add("config.resolved", cfg.resolved_text("latency").into_bytes());

    Ok(LatencyOutcome {
        report,
        artifacts: RunArtifacts {
            files: artifacts.files,
            summary,
        },
    })
}

fn summarize(cfg: &RunConfig, report: &LatencyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "latency experiment: {} trials, seed {}",
        report.n_trials, cfg.seed
    );
    let _ = writeln!(
        s,
        "excitation: joint 0, amplitude {} rad, {} Hz, motion start {} s, {} s per trial",
        cfg.amp.unwrap(),
        cfg.freq_hz,
        cfg.motion_start_s,
        cfg.duration_s.unwrap()
    );
    let _ = writeln!(
        s,
        "channel: steady {} ms (sd {} ms), onset extra {} ms (sd {} ms) for {} s, lead {} ms, {} Hz sampling",
        cfg.steady_delay_ms,
        cfg.steady_jitter_ms,
        cfg.onset_extra_ms,
        cfg.onset_sd_ms,
        cfg.onset_window_s,
        cfg.lead_ms,
        cfg.sample_rate_hz
    );
    let _ = writeln!(s, "phase-difference latency, two regimes:");
    let _ = writeln!(
        s,
        "  onset window:  mean {:.1} ms, sd {}",
        report.onset_mean_ms,
        sd_str(report.onset_sd_ms)
    );
    let _ = writeln!(
        s,
        "  steady window: mean {:.1} ms, sd {}",
        report.steady_mean_ms,
        sd_str(report.steady_sd_ms)
    );
    if report.low_confidence_fits > 0 {
        let _ = writeln!(
            s,
            "warning: {} fits were low-confidence (amplitude below 10x residual noise)",
            report.low_confidence_fits
        );
    }
    s
}

fn sd_str(sd: Option<f64>) -> String {
    match sd {
        Some(v) => format!("{v:.1} ms"),
        None => "n/a (single trial)".to_string(),
    }
}
