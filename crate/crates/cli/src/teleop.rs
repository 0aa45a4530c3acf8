//! Teleoperation demo.  In sim mode a scripted hand path is pushed through
//! the tracker channel and the wire codec into the bridge, which drives the
//! plant; tracking error is reported with the predictor off and on.  In udp
//! mode the same bridge runs live against any external pose sender.

use crate::config::{Mode, RunConfig};
use crate::output::RunArtifacts;
use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt::Write as _;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};
use telekin::bridge::{map_pose, Bridge, BridgeStatus, PredictorConfig, PredictorMode};
use telekin::geometry::Pose;
use telekin::sim::{Trace, TraceSource};
use telekin::trajgen::Limits;
use telekin::wire::{
    decode_hand, encode_hand, send_joint, HandReceiver, HandSample, DEFAULT_MAX_AGE_US,
};
use telekin::{ArmModel, Quat, Vec3};

/// Neutral hand position: maps to (0.6, 0, 0) under the default mapping.
const HAND_BASE: Vec3 = Vec3 {
    x: 0.3,
    y: 0.0,
    z: 0.17,
};

/// A mid-range starting configuration for the arm.
const READY_POSE: [f64; 7] = [0.0, 0.4, 0.0, 1.2, 0.0, -0.3, 0.0];

pub struct TeleopSimMetrics {
    pub rms_off_m: f64,
    pub rms_on_m: f64,
    pub final_error_off_m: f64,
    pub final_error_on_m: f64,
    pub status_off: BridgeStatus,
    pub status_on: BridgeStatus,
}

/// Per-command defaults: a 5 cm hand sinusoid (10 cm at the end effector)
/// over 10 s.  The joint limits leave the plant enough authority that the
/// channel, not the arm, dominates the tracking error (the mapped sinusoid
/// peaks near 0.7 rad/s and 2.5 rad/s² in joint space).
pub fn resolve(cfg: &RunConfig) -> RunConfig {
    let mut cfg = cfg.clone();
    cfg.amp.get_or_insert(0.05);
    cfg.duration_s.get_or_insert(10.0);
    cfg.vmax.get_or_insert(1.5);
    cfg.amax.get_or_insert(8.0);
    cfg
}

pub fn run(raw: &RunConfig) -> anyhow::Result<RunArtifacts> {
    match raw.mode {
        Mode::Sim => run_sim(raw).map(|(_, artifacts)| artifacts),
        Mode::Udp => run_udp(raw),
    }
}

/// The hand pose script: at rest until motion start, then a sinusoid
/// along x, tool always pointing down.
fn hand_at(cfg: &RunConfig, t: f64) -> Pose {
    let amp = cfg.amp.unwrap_or(0.05);
    let dx = if t < cfg.motion_start_s {
        0.0
    } else {
        amp * (2.0 * std::f64::consts::PI * cfg.freq_hz * (t - cfg.motion_start_s)).sin()
    };
    Pose {
        position: HAND_BASE + Vec3::new(dx, 0.0, 0.0),
        orientation: Quat::rot_y(std::f64::consts::PI),
    }
}

pub fn run_sim(raw: &RunConfig) -> anyhow::Result<(TeleopSimMetrics, RunArtifacts)> {
    let cfg = resolve(raw);
    let off = PredictorConfig {
        mode: PredictorMode::Off,
        horizon_s: 0.0,
        ..PredictorConfig::default()
    };
    let on = cfg.predictor();

    let (rms_off, final_off, status_off, traces_off) = run_pass(&cfg, off)?;
    let (rms_on, final_on, status_on, traces_on) = run_pass(&cfg, on.clone())?;

    let mut artifacts = RunArtifacts::new();
    for (i, traces) in [&traces_off, &traces_on].into_iter().enumerate() {
        let mut csv = Vec::new();
        let refs: Vec<&Trace> = traces.iter().collect();
        Trace::write_csv(&refs, &mut csv).context("serializing traces")?;
        artifacts.add(format!("traces/trial_{i:02}.csv"), csv);
    }

    let mut report = String::from("pass,predictor,rms_m,final_error_m,ik_failures,stale_drops\n");
    let _ = writeln!(
        report,
        "0,off,{rms_off},{final_off},{},{}",
        status_off.ik_failures, status_off.stale_drops
    );
    let mode_name = match on.mode {
        PredictorMode::Off => "off",
        PredictorMode::ConstantVelocity => "constant-velocity",
        PredictorMode::AlphaBeta => "alpha-beta",
    };
    let _ = writeln!(
        report,
        "1,{mode_name},{rms_on},{final_on},{},{}",
        status_on.ik_failures, status_on.stale_drops
    );
    artifacts.add("report.csv", report.into_bytes());

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "teleop (sim): {} s, hand amplitude {} m at {} Hz, channel steady {} ms",
        cfg.duration_s.unwrap(),
        cfg.amp.unwrap(),
        cfg.freq_hz,
        cfg.steady_delay_ms
    );
    let _ = writeln!(
        summary,
        "tracking RMS vs mapped hand truth (steady window):"
    );
    let _ = writeln!(summary, "  predictor off: {rms_off:.4} m");
    let _ = writeln!(
        summary,
        "  predictor {mode_name} ({} ms): {rms_on:.4} m",
        cfg.predict_horizon_ms
    );
    let _ = writeln!(
        summary,
        "final error: off {final_off:.2e} m, on {final_on:.2e} m"
    );
    let _ = writeln!(
        summary,
        "counters: off ik_failures {} stale_drops {}; on ik_failures {} stale_drops {}",
        status_off.ik_failures,
        status_off.stale_drops,
        status_on.ik_failures,
        status_on.stale_drops
    );
    artifacts.add("summary.txt", summary.clone().into_bytes());
    artifacts.add("config.resolved", cfg.resolved_text("teleop").into_bytes());
    artifacts.summary = summary;

    Ok((
        TeleopSimMetrics {
            rms_off_m: rms_off,
            rms_on_m: rms_on,
            final_error_off_m: final_off,
            final_error_on_m: final_on,
            status_off,
            status_on,
        },
        artifacts,
    ))
}

/// One closed-loop pass; both passes share the channel noise realization
/// (same seed), so the only difference is the predictor.
fn run_pass(
    cfg: &RunConfig,
    predictor: PredictorConfig,
) -> anyhow::Result<(f64, f64, BridgeStatus, [Trace; 3])> {
    let duration = cfg.duration_s.unwrap();
    let limits = Limits::uniform(7, cfg.vmax.unwrap(), cfg.amax.unwrap());
    let mut bridge = Bridge::new(
        ArmModel::default(),
        READY_POSE,
        limits,
        cfg.mapping(),
        predictor,
    )
    .map_err(|e| anyhow::anyhow!("bridge construction failed: {e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steady = Normal::new(cfg.steady_delay_ms * 1e-3, cfg.steady_jitter_ms * 1e-3)
        .context("steady delay model")?;
    let onset = Normal::new(cfg.onset_extra_ms * 1e-3, cfg.onset_sd_ms * 1e-3)
        .context("onset delay model")?;
    let noise = Normal::new(0.0, cfg.pos_noise_sd).context("observation noise model")?;

    let mut truth = Trace::new(TraceSource::GroundTruth);
    let mut commanded = Trace::new(TraceSource::Tracker);
    let mut robot = Trace::new(TraceSource::RobotReported);

    let rms_from = (cfg.motion_start_s + 2.0 / cfg.freq_hz).min(0.75 * duration);
    let mut sq_sum = 0.0;
    let mut sq_n = 0u64;
    let mut final_error = f64::NAN;

    let ticks = (duration * 1000.0).round() as u64;
    let mut next_sample = 0u64;
    for i in 1..=ticks {
        let t = i as f64 * 1e-3;

        // tracker samples arriving at the receiver clock
        while (next_sample as f64) / cfg.sample_rate_hz <= t {
            let t_rx = next_sample as f64 / cfg.sample_rate_hz;
            let mut delay = steady.sample(&mut rng);
            if t_rx >= cfg.motion_start_s && t_rx < cfg.motion_start_s + cfg.onset_window_s {
                delay += onset.sample(&mut rng);
            }
            let capture = (t_rx - delay).max(0.0);
            let pose = hand_at(cfg, capture);
            let sample = HandSample {
                seq: next_sample as u32 + 1,
                timestamp_us: (capture * 1e6).round() as u64,
                pose: Pose {
                    position: pose.position
                        + Vec3::new(
                            noise.sample(&mut rng),
                            noise.sample(&mut rng),
                            noise.sample(&mut rng),
                        ),
                    orientation: pose.orientation,
                },
                confidence: 1.0,
            };
            // through the wire codec, exactly as a live sender would
            let bytes = encode_hand(&sample).context("encoding hand sample")?;
            let decoded = decode_hand(&bytes).context("decoding hand sample")?;
            bridge.ingest(&decoded, (t_rx * 1e6).round() as u64);
            next_sample += 1;
        }

        let msg = bridge.tick(1e-3);
        let fk = bridge.arm().forward_kinematics(&msg.positions);
        let target_now = map_pose(&hand_at(cfg, t), bridge.mapping());
        let err = (fk.position - target_now.position).norm();
        if t >= rms_from {
            sq_sum += err * err;
            sq_n += 1;
        }
        final_error = err;

        if i % cfg.decimation as u64 == 0 {
            let ts = (t * 1e6).round() as u64;
            truth.push(
                ts,
                vec![
                    target_now.position.x,
                    target_now.position.y,
                    target_now.position.z,
                ],
            );
            if let Some(c) = bridge.last_command() {
                commanded.push(ts, vec![c.position.x, c.position.y, c.position.z]);
            }
            robot.push(ts, vec![fk.position.x, fk.position.y, fk.position.z]);
        }
    }

    let rms = if sq_n > 0 {
        (sq_sum / sq_n as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok((rms, final_error, bridge.status(), [truth, commanded, robot]))
}

fn unix_us() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_micros() as u64
}

/// Live mode: bind the hand port, run the control loop in real time for
/// `udp_duration_s`, and stream joint state to `joint_dest`.
fn run_udp(raw: &RunConfig) -> anyhow::Result<RunArtifacts> {
    let cfg = resolve(raw);
    let receiver = HandReceiver::bind(("0.0.0.0", cfg.hand_port), DEFAULT_MAX_AGE_US, unix_us)
        .with_context(|| format!("binding hand port {}", cfg.hand_port))?;
    let socket = std::net::UdpSocket::bind("0.0.0.0:0").context("binding sender socket")?;

    let limits = Limits::uniform(7, cfg.vmax.unwrap(), cfg.amax.unwrap());
    let mut bridge = Bridge::new(
        ArmModel::default(),
        READY_POSE,
        limits,
        cfg.mapping(),
        cfg.predictor(),
    )
    .map_err(|e| anyhow::anyhow!("bridge construction failed: {e}"))?;
    bridge.set_clock_us(unix_us());

    let mut robot = Trace::new(TraceSource::RobotReported);
    let mut send_errors = 0u64;
    let ticks = (cfg.udp_duration_s * 1000.0).round() as u64;
    let started = Instant::now();
    for i in 1..=ticks {
        if let Some(sample) = receiver.mailbox.take() {
            bridge.ingest(&sample, unix_us());
        }
        let msg = bridge.tick(1e-3);
        if i % cfg.decimation as u64 == 0 {
            if send_joint(&socket, cfg.joint_dest.as_str(), &msg).is_err() {
                send_errors += 1;
            }
            robot.push(i * 1000, msg.positions.to_vec());
        }
        let next = Duration::from_millis(i);
        let elapsed = started.elapsed();
        if elapsed < next {
            std::thread::sleep(next - elapsed);
        }
    }

    let status = bridge.status();
    let stats = &receiver.stats;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "teleop (udp): listened on port {} for {} s, joint state to {}",
        cfg.hand_port, cfg.udp_duration_s, cfg.joint_dest
    );
    let _ = writeln!(
        summary,
        "receiver: accepted {}, reordered {}, stale {}, decode errors {}",
        stats.accepted.load(std::sync::atomic::Ordering::Relaxed),
        stats
            .dropped_reordered
            .load(std::sync::atomic::Ordering::Relaxed),
        stats
            .dropped_stale
            .load(std::sync::atomic::Ordering::Relaxed),
        stats
            .decode_errors
            .load(std::sync::atomic::Ordering::Relaxed)
    );
    let _ = writeln!(
        summary,
        "bridge: ticks {}, ik_failures {}, stale_drops {}, send errors {send_errors}",
        status.ticks_run, status.ik_failures, status.stale_drops
    );
    receiver.shutdown();

    let mut artifacts = RunArtifacts::new();
    let mut csv = Vec::new();
    Trace::write_csv(&[&robot], &mut csv).context("serializing trace")?;
    artifacts.add("traces/trial_00.csv", csv);
    artifacts.add("summary.txt", summary.clone().into_bytes());
    artifacts.add("config.resolved", cfg.resolved_text("teleop").into_bytes());
    artifacts.summary = summary;
    Ok(artifacts)
}
