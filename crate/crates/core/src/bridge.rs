//! The teleoperation controller: maps headset-frame hand poses into
//! robot-frame targets (scaled about a configurable origin), optionally
//! predicts ahead to hide channel latency, solves IK, retargets the
//! trajectory generator, and runs the 1 kHz control tick.

use crate::geometry::{Pose, RigidTransform};
use crate::kinematics::Branch;
use crate::trajgen::{make_generator, Generator, KinState, Limits, Target, TrajError};
use crate::wire::{freshness_gate, Admission, HandSample, JointStateMsg, DEFAULT_MAX_AGE_US};
use crate::{ArmModel, JointVector, Vec3};
use std::collections::VecDeque;
use thiserror::Error;

/// How many recent hand samples the predictor sees (~90 ms at 90 Hz).
const HISTORY_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BridgeError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Trajectory(#[from] TrajError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("no hand samples to predict from")]
    NoData,
}

/// Headset-frame to robot-frame mapping with workspace scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingConfig {
    /// Headset frame → robot base frame.
    pub calibration: RigidTransform,
    /// Cartesian scale applied about `scale_origin` (must be positive).
    pub scale: f64,
    /// Robot-frame point displacements are scaled about.
    pub scale_origin: Vec3,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            calibration: RigidTransform::identity(),
            // arm-length ratio between the operator and the manipulator
            scale: 2.0,
            // shoulder point: scaling about it preserves reachable direction
            scale_origin: Vec3::new(0.0, 0.0, 0.34),
        }
    }
}

/// Motion-prediction mode for latency compensation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorMode {
    Off,
    ConstantVelocity,
    AlphaBeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorConfig {
    /// How far past the newest sample to extrapolate.
    pub horizon_s: f64,
    pub mode: PredictorMode,
    /// Position gain, `0 < alpha <= 1` (alpha-beta mode).
    pub alpha: f64,
    /// Velocity gain, `0 < beta <= 2` (alpha-beta mode).
    pub beta: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            // the steady-state tracking latency of the reference headset
            horizon_s: 0.0278,
            mode: PredictorMode::AlphaBeta,
            alpha: 0.5,
            beta: 0.1,
        }
    }
}

impl PredictorConfig {
    fn validate(&self) -> Result<(), BridgeError> {
        if self.horizon_s.is_nan() || self.horizon_s < 0.0 {
            return Err(BridgeError::InvalidConfig(format!(
                "predictor horizon must be >= 0, got {}",
                self.horizon_s
            )));
        }
        if self.mode == PredictorMode::AlphaBeta
            && !(self.alpha > 0.0 && self.alpha <= 1.0 && self.beta > 0.0 && self.beta <= 2.0)
        {
            return Err(BridgeError::InvalidConfig(format!(
                "alpha-beta gains out of range: alpha={}, beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Counters and the live joint state, for supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeStatus {
    pub last_hand_seq: Option<u32>,
    pub ticks_run: u64,
    pub ik_failures: u64,
    /// Inputs dropped by the freshness gate or rejected as non-finite.
    pub stale_drops: u64,
    pub current_joint_state: KinState,
}

/// Map a headset-frame hand pose into a robot-frame target pose: apply the
/// calibration transform, then scale the position about `scale_origin`.
/// Orientation is rotated by the calibration only, never scaled.
pub fn map_pose(hand: &Pose, cfg: &MappingConfig) -> Pose {
    let calibrated = cfg.calibration.apply_pose(hand);
    Pose {
        position: cfg.scale_origin + (calibrated.position - cfg.scale_origin).scaled(cfg.scale),
        orientation: calibrated.orientation,
    }
}

/// Extrapolate the hand pose `cfg.horizon_s` past the newest sample.
///
/// Constant-velocity mode differences the last two samples; alpha-beta mode
/// runs the filter across the history window for noise robustness.
/// Orientation is extrapolated by scaling the most recent relative rotation
/// (constant angular velocity).  One sample, or `mode == Off`, returns the
/// newest pose.
pub fn predict(history: &[HandSample], cfg: &PredictorConfig) -> Result<Pose, PredictError> {
    let newest = history.last().ok_or(PredictError::NoData)?;
    if cfg.mode == PredictorMode::Off || history.len() < 2 || cfg.horizon_s == 0.0 {
        return Ok(newest.pose);
    }
    let prev = &history[history.len() - 2];
    let dt_pair = (newest.timestamp_us.saturating_sub(prev.timestamp_us)) as f64 * 1e-6;

    let position = match cfg.mode {
        PredictorMode::Off => unreachable!(),
        PredictorMode::ConstantVelocity => {
            if dt_pair <= 0.0 {
                newest.pose.position
            } else {
                let v = (newest.pose.position - prev.pose.position).scaled(1.0 / dt_pair);
                newest.pose.position + v.scaled(cfg.horizon_s)
            }
        }
        PredictorMode::AlphaBeta => {
            let mut x = history[0].pose.position;
            let mut v = Vec3::new(0.0, 0.0, 0.0);
            let mut t_prev = history[0].timestamp_us;
            for s in &history[1..] {
                let dt = (s.timestamp_us.saturating_sub(t_prev)) as f64 * 1e-6;
                t_prev = s.timestamp_us;
                if dt <= 0.0 {
                    continue;
                }
                x = x + v.scaled(dt);
                let r = s.pose.position - x;
                x = x + r.scaled(cfg.alpha);
                v = v + r.scaled(cfg.beta / dt);
            }
            x + v.scaled(cfg.horizon_s)
        }
    };

    // constant angular velocity from the last pair of orientations
    let orientation = if dt_pair <= 0.0 {
        newest.pose.orientation
    } else {
        let rel = prev.pose.orientation.conjugate() * newest.pose.orientation;
        newest.pose.orientation * rel.powf(cfg.horizon_s / dt_pair)
    };

    Ok(Pose {
        position,
        orientation,
    })
}

/// The teleoperation bridge: owns the arm model and the trajectory
/// generator; consumes hand samples, emits joint state each tick.
pub struct Bridge {
    arm: ArmModel,
    generator: Generator,
    mapping: MappingConfig,
    predictor: PredictorConfig,
    branch: Branch,
    arm_angle: f64,
    max_age_us: u64,
    history: VecDeque<HandSample>,
    fresh: bool,
    last_hand_seq: Option<u32>,
    last_command: Option<Pose>,
    /// Virtual clock stamped on emitted joint state, advanced per tick.
    clock_us: u64,
    ticks_run: u64,
    ik_failures: u64,
    stale_drops: u64,
    /// Per-joint stay-away margin from the hard limits: a retarget may be
    /// chased at full speed, and a stopping profile can overshoot its
    /// target by up to vmax^2 / (2 amax).
    margins: [f64; 7],
}

impl Bridge {
    pub fn new(
        arm: ArmModel,
        initial_q: JointVector,
        limits: Limits,
        mapping: MappingConfig,
        predictor: PredictorConfig,
    ) -> Result<Self, BridgeError> {
        if mapping.scale.is_nan() || mapping.scale <= 0.0 {
            return Err(BridgeError::InvalidConfig(format!(
                "mapping scale must be positive, got {}",
                mapping.scale
            )));
        }
        predictor.validate()?;
        if limits.dof() != 7 {
            return Err(BridgeError::InvalidConfig(format!(
                "need 7-dof limits, got {}",
                limits.dof()
            )));
        }
        arm.check_limits(&initial_q)
            .map_err(|e| BridgeError::InvalidConfig(format!("initial configuration: {e}")))?;

        let mut margins = [0.0; 7];
        for (i, margin) in margins.iter_mut().enumerate() {
            let (lo, hi) = arm.joint_limits[i];
            let m = limits.vmax[i] * limits.vmax[i] / (2.0 * limits.amax[i]);
            *margin = m.min(0.5 * (hi - lo));
        }
        let generator = make_generator(limits, KinState::at_rest(initial_q.to_vec()))?;
        Ok(Self {
            arm,
            generator,
            mapping,
            predictor,
            branch: Branch::default(),
            arm_angle: 0.0,
            max_age_us: DEFAULT_MAX_AGE_US,
            history: VecDeque::with_capacity(HISTORY_LEN),
            fresh: false,
            last_hand_seq: None,
            last_command: None,
            clock_us: 0,
            ticks_run: 0,
            ik_failures: 0,
            stale_drops: 0,
            margins,
        })
    }

    /// Set the virtual clock epoch (e.g. wall-clock microseconds for live
    /// operation); emitted joint state is stamped from this clock.
    pub fn set_clock_us(&mut self, clock_us: u64) {
        self.clock_us = clock_us;
    }

    pub fn arm(&self) -> &ArmModel {
        &self.arm
    }

    pub fn mapping(&self) -> &MappingConfig {
        &self.mapping
    }

    /// Offer a decoded hand sample to the controller.  Reordered, stale, or
    /// non-finite input is dropped (counted); accepted samples enter the
    /// predictor history and mark the tick-side state fresh.
    pub fn ingest(&mut self, sample: &HandSample, now_us: u64) {
        let admission = freshness_gate(
            self.last_hand_seq,
            sample.seq,
            sample.timestamp_us,
            now_us,
            self.max_age_us,
        );
        if admission != Admission::Accept || !sample.pose.is_finite() {
            self.stale_drops += 1;
            return;
        }
        self.last_hand_seq = Some(sample.seq);
        if self.history.len() == HISTORY_LEN {
            self.history.pop_front();
        }
        self.history.push_back(*sample);
        self.fresh = true;
    }

    /// Run one control tick: if fresh hand data arrived, map → predict →
    /// IK → retarget (counting IK failures, which hold the previous
    /// target); then step the generator and emit the new joint state.
    /// No failure escapes the tick.
    pub fn tick(&mut self, dt_s: f64) -> JointStateMsg {
        if self.fresh {
            self.fresh = false;
            self.retarget_from_hand();
        }
        let (state, _) = self.generator.step(dt_s);
        self.ticks_run += 1;
        self.clock_us += (dt_s * 1e6).round() as u64;

        let mut positions = [0.0; 7];
        let mut velocities = [0.0; 7];
        positions.copy_from_slice(&state.position);
        velocities.copy_from_slice(&state.velocity);
        JointStateMsg {
            seq: self.ticks_run as u32,
            timestamp_us: self.clock_us,
            positions,
            velocities,
        }
    }

    fn retarget_from_hand(&mut self) {
        let hand: Vec<HandSample> = self.history.iter().cloned().collect();
        let predicted = match predict(&hand, &self.predictor) {
            Ok(p) => p,
            Err(PredictError::NoData) => return,
        };
        let mapped = map_pose(&predicted, &self.mapping);
        match self
            .arm
            .inverse_kinematics(&mapped, self.arm_angle, self.branch)
        {
            Ok(q) => {
                let clamped = self.clamp_into_margins(q);
                if self
                    .generator
                    .set_target(&Target::at_rest(clamped.to_vec()))
                    .is_err()
                {
                    self.ik_failures += 1;
                } else {
                    self.last_command = Some(mapped);
                }
            }
            Err(_) => self.ik_failures += 1,
        }
    }

    /// The mapped, predicted pose of the most recent successful retarget.
    pub fn last_command(&self) -> Option<&Pose> {
        self.last_command.as_ref()
    }

    /// Shave targets into the joint range by the overshoot margin so that
    /// chasing them at full speed can never cross a hard limit.
    fn clamp_into_margins(&self, q: JointVector) -> JointVector {
        let mut out = q;
        for i in 0..7 {
            let (lo, hi) = self.arm.joint_limits[i];
            out[i] = q[i].clamp(lo + self.margins[i], hi - self.margins[i]);
        }
        out
    }

    pub fn status(&self) -> BridgeStatus {
        BridgeStatus {
            last_hand_seq: self.last_hand_seq,
            ticks_run: self.ticks_run,
            ik_failures: self.ik_failures,
            stale_drops: self.stale_drops,
            current_joint_state: self.generator.state().clone(),
        }
    }
}
