//! Flat key-value run configuration: one `key = value` per line, `#`
//! comments, every key overridable from the command line.  The resolved
//! snapshot of every run is written back out as `config.resolved`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use telekin::analysis::sigma_for_mean_error;
use telekin::bridge::{MappingConfig, PredictorConfig, PredictorMode};
use telekin::geometry::RigidTransform;
use telekin::sim::TrackerChannelConfig;
use telekin::{Quat, Vec3};

/// Configuration problems map to their own exit code in `main`.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sim,
    Udp,
}

impl Mode {
    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "sim" => Ok(Mode::Sim),
            "udp" => Ok(Mode::Udp),
            other => Err(format!("mode must be 'sim' or 'udp', got '{other}'")),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sim => "sim",
            Mode::Udp => "udp",
        }
    }
}

/// Everything a run needs.  `amp`, `duration_s`, `vmax`, `amax` default
/// per command and stay unset until resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub trials: u32,
    pub output_dir: PathBuf,

    // excitation
    pub amp: Option<f64>,
    pub freq_hz: f64,
    pub motion_start_s: f64,
    pub duration_s: Option<f64>,

    // tracker channel
    pub sample_rate_hz: f64,
    pub steady_delay_ms: f64,
    pub steady_jitter_ms: f64,
    pub onset_extra_ms: f64,
    pub onset_sd_ms: f64,
    pub onset_window_s: f64,
    pub pos_noise_sd: f64,
    pub lead_ms: f64,

    // mapping
    pub scale: f64,
    pub scale_origin: Vec3,
    pub calibration_translation: Vec3,
    pub calibration_rotation: Quat,

    // predictor
    pub predict_mode: PredictorMode,
    pub predict_horizon_ms: f64,
    pub alpha: f64,
    pub beta: f64,

    // plant
    pub vmax: Option<f64>,
    pub amax: Option<f64>,
    pub decimation: u32,

    // accuracy experiment
    pub accuracy_sigma_m: f64,

    // live transport
    pub hand_port: u16,
    pub joint_dest: String,
    pub udp_duration_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Sim,
            seed: 7,
            trials: 10,
            output_dir: PathBuf::from("out"),
            amp: None,
            freq_hz: 0.5,
            motion_start_s: 1.0,
            duration_s: None,
            sample_rate_hz: 90.0,
            steady_delay_ms: 27.8,
            steady_jitter_ms: 13.7,
            onset_extra_ms: 149.6,
            onset_sd_ms: 78.0,
            onset_window_s: 2.0,
            pos_noise_sd: 0.001,
            lead_ms: 0.0,
            scale: 2.0,
            scale_origin: Vec3::new(0.0, 0.0, 0.34),
            calibration_translation: Vec3::new(0.0, 0.0, 0.0),
            calibration_rotation: Quat::identity(),
            predict_mode: PredictorMode::AlphaBeta,
            predict_horizon_ms: 27.8,
            alpha: 0.5,
            beta: 0.1,
            vmax: None,
            amax: None,
            decimation: 10,
            accuracy_sigma_m: sigma_for_mean_error(0.013),
            hand_port: telekin::wire::HAND_PORT,
            joint_dest: format!("127.0.0.1:{}", telekin::wire::JOINT_PORT),
            udp_duration_s: 10.0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("key '{key}': cannot parse '{value}'"))
}

fn parse_vec3(key: &str, value: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("key '{key}': expected 'x,y,z', got '{value}'"));
    }
    Ok(Vec3::new(
        parse_num(key, parts[0])?,
        parse_num(key, parts[1])?,
        parse_num(key, parts[2])?,
    ))
}

fn parse_quat(key: &str, value: &str) -> Result<Quat, String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("key '{key}': expected 'w,x,y,z', got '{value}'"));
    }
    let q = Quat::new(
        parse_num(key, parts[0])?,
        parse_num(key, parts[1])?,
        parse_num(key, parts[2])?,
        parse_num(key, parts[3])?,
    );
    if (q.norm() - 1.0).abs() > 1e-6 {
        return Err(format!(
            "key '{key}': quaternion must be unit, norm {}",
            q.norm()
        ));
    }
    Ok(q)
}

fn parse_predict_mode(value: &str) -> Result<PredictorMode, String> {
    match value {
        "off" => Ok(PredictorMode::Off),
        "constant-velocity" => Ok(PredictorMode::ConstantVelocity),
        "alpha-beta" => Ok(PredictorMode::AlphaBeta),
        other => Err(format!(
            "predict_mode must be off | constant-velocity | alpha-beta, got '{other}'"
        )),
    }
}

fn predict_mode_str(mode: PredictorMode) -> &'static str {
    match mode {
        PredictorMode::Off => "off",
        PredictorMode::ConstantVelocity => "constant-velocity",
        PredictorMode::AlphaBeta => "alpha-beta",
    }
}

impl RunConfig {
    /// Apply one `key = value` assignment (from a config file or a flag).
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "mode" => self.mode = Mode::parse(value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "trials" => {
                self.trials = parse_num(key, value)?;
                if self.trials == 0 {
                    return Err("trials must be >= 1".into());
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "amp" => self.amp = Some(parse_num(key, value)?),
            "freq_hz" => {
                self.freq_hz = parse_num(key, value)?;
                if self.freq_hz.is_nan() || self.freq_hz <= 0.0 {
                    return Err("freq_hz must be > 0".into());
                }
            }
            "motion_start_s" => self.motion_start_s = parse_num(key, value)?,
            "duration_s" => self.duration_s = Some(parse_num(key, value)?),
            "sample_rate_hz" => {
                self.sample_rate_hz = parse_num(key, value)?;
                if self.sample_rate_hz.is_nan() || self.sample_rate_hz <= 0.0 {
                    return Err("sample_rate_hz must be > 0".into());
                }
            }
            "steady_delay_ms" => self.steady_delay_ms = parse_num(key, value)?,
            "steady_jitter_ms" => self.steady_jitter_ms = parse_num(key, value)?,
            "onset_extra_ms" => self.onset_extra_ms = parse_num(key, value)?,
            "onset_sd_ms" => self.onset_sd_ms = parse_num(key, value)?,
            "onset_window_s" => self.onset_window_s = parse_num(key, value)?,
            "pos_noise_sd" => self.pos_noise_sd = parse_num(key, value)?,
            "lead_ms" => self.lead_ms = parse_num(key, value)?,
            "scale" => {
                self.scale = parse_num(key, value)?;
                if self.scale.is_nan() || self.scale <= 0.0 {
                    return Err("scale must be > 0".into());
                }
            }
            "scale_origin" => self.scale_origin = parse_vec3(key, value)?,
            "calibration_translation" => self.calibration_translation = parse_vec3(key, value)?,
            "calibration_rotation" => self.calibration_rotation = parse_quat(key, value)?,
            "predict_mode" => self.predict_mode = parse_predict_mode(value)?,
            "predict_horizon_ms" => self.predict_horizon_ms = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "beta" => self.beta = parse_num(key, value)?,
            "vmax" => self.vmax = Some(parse_num(key, value)?),
            "amax" => self.amax = Some(parse_num(key, value)?),
            "decimation" => {
                self.decimation = parse_num(key, value)?;
                if self.decimation == 0 {
                    return Err("decimation must be >= 1".into());
                }
            }
            "accuracy_sigma_m" => self.accuracy_sigma_m = parse_num(key, value)?,
            "hand_port" => self.hand_port = parse_num(key, value)?,
            "joint_dest" => self.joint_dest = value.to_string(),
            "udp_duration_s" => self.udp_duration_s = parse_num(key, value)?,
            other => return Err(format!("unknown configuration key '{other}'")),
        }
        Ok(())
    }

    /// Parse a config file on top of the current values.
    pub fn apply_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                config_err(format!(
                    "{}:{}: expected 'key = value', got '{raw}'",
                    path.display(),
                    i + 1
                ))
            })?;
            self.apply_kv(key.trim(), value.trim())
                .map_err(|msg| config_err(format!("{}:{}: {msg}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn tracker_channel(&self, seed: u64) -> TrackerChannelConfig {
        TrackerChannelConfig {
            steady_delay_s: self.steady_delay_ms * 1e-3,
            steady_jitter_sd_s: self.steady_jitter_ms * 1e-3,
            onset_extra_delay_s: self.onset_extra_ms * 1e-3,
            onset_sd_s: self.onset_sd_ms * 1e-3,
            onset_window_s: self.onset_window_s,
            pos_noise_sd: self.pos_noise_sd,
            lead_s: self.lead_ms * 1e-3,
            sample_rate_hz: self.sample_rate_hz,
            seed,
        }
    }

    pub fn mapping(&self) -> MappingConfig {
        MappingConfig {
            calibration: RigidTransform {
                rotation: self.calibration_rotation,
                translation: self.calibration_translation,
            },
            scale: self.scale,
            scale_origin: self.scale_origin,
        }
    }

    pub fn predictor(&self) -> PredictorConfig {
        PredictorConfig {
            horizon_s: self.predict_horizon_ms * 1e-3,
            mode: self.predict_mode,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    /// Serialize the fully resolved configuration, every key in a fixed
    /// order, suitable for re-running the experiment byte-for-byte.
    pub fn resolved_text(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# resolved configuration: telekin {command}");
        let kv: Vec<(&str, String)> = vec![
            ("mode", self.mode.as_str().to_string()),
            ("seed", self.seed.to_string()),
            ("trials", self.trials.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("amp", opt_str(self.amp)),
            ("freq_hz", self.freq_hz.to_string()),
            ("motion_start_s", self.motion_start_s.to_string()),
            ("duration_s", opt_str(self.duration_s)),
            ("sample_rate_hz", self.sample_rate_hz.to_string()),
            ("steady_delay_ms", self.steady_delay_ms.to_string()),
            ("steady_jitter_ms", self.steady_jitter_ms.to_string()),
            ("onset_extra_ms", self.onset_extra_ms.to_string()),
            ("onset_sd_ms", self.onset_sd_ms.to_string()),
            ("onset_window_s", self.onset_window_s.to_string()),
            ("pos_noise_sd", self.pos_noise_sd.to_string()),
            ("lead_ms", self.lead_ms.to_string()),
            ("scale", self.scale.to_string()),
            ("scale_origin", vec3_str(self.scale_origin)),
            (
                "calibration_translation",
                vec3_str(self.calibration_translation),
            ),
            (
                "calibration_rotation",
                format!(
                    "{},{},{},{}",
                    self.calibration_rotation.w,
                    self.calibration_rotation.x,
                    self.calibration_rotation.y,
                    self.calibration_rotation.z
                ),
            ),
            ("predict_mode", predict_mode_str(self.predict_mode).into()),
            ("predict_horizon_ms", self.predict_horizon_ms.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("vmax", opt_str(self.vmax)),
            ("amax", opt_str(self.amax)),
            ("decimation", self.decimation.to_string()),
            ("accuracy_sigma_m", self.accuracy_sigma_m.to_string()),
            ("hand_port", self.hand_port.to_string()),
            ("joint_dest", self.joint_dest.clone()),
            ("udp_duration_s", self.udp_duration_s.to_string()),
        ];
        for (k, v) in kv {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn opt_str(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "default".to_string(),
    }
}

fn vec3_str(v: Vec3) -> String {
    format!("{},{},{}", v.x, v.y, v.z)
}
