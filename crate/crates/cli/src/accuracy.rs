//! Static accuracy experiment: tracked static positions of the hand
//! compared against their commanded ground truth, through the isotropic
//! Gaussian observation-noise model.

use crate::config::{config_err, Mode, RunConfig};
use crate::output::RunArtifacts;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use std::fmt::Write as _;
use telekin::analysis::{static_accuracy, AccuracyReport};
use telekin::Vec3;

pub struct AccuracyOutcome {
    pub report: AccuracyReport,
    pub artifacts: RunArtifacts,
}

pub fn run(raw: &RunConfig) -> anyhow::Result<AccuracyOutcome> {
    if raw.mode == Mode::Udp {
        return Err(config_err(
            "the accuracy experiment characterizes the simulated tracker; only mode = sim is supported",
        ));
    }
    let cfg = raw.clone();
    let n = cfg.trials as usize;
    let pairs = sample_static_points(n, cfg.seed, cfg.accuracy_sigma_m);

    let report =
        static_accuracy(&pairs).map_err(|e| anyhow::anyhow!("accuracy analysis failed: {e}"))?;

    let mut artifacts = RunArtifacts::new();
    let mut csv = String::from("point,cx,cy,cz,mx,my,mz,error_m\n");
    for (i, ((c, m), err)) in pairs.iter().zip(report.errors_m.iter()).enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{},{},{err}",
            c.x, c.y, c.z, m.x, m.y, m.z
        );
    }
    artifacts.add("report.csv", csv.into_bytes());

    let summary = summarize(&cfg, &report);
    artifacts.add("summary.txt", summary.clone().into_bytes());
    artifacts.add(
        "config.resolved",
        cfg.resolved_text("accuracy").into_bytes(),
    );

    Ok(AccuracyOutcome {
        report,
        artifacts: RunArtifacts {
            files: artifacts.files,
            summary,
        },
    })
}

/// Commanded static positions scattered through the front workspace, plus
/// their noisy measurements.
pub fn sample_static_points(n: usize, seed: u64, sigma_m: f64) -> Vec<(Vec3, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = Uniform::new(0.45, 0.70).expect("static range");
    let azimuth = Uniform::new(-0.9, 0.9).expect("static range");
    let elevation = Uniform::new(-0.5, 0.6).expect("static range");
    let noise = Normal::new(0.0, sigma_m).expect("sigma >= 0");
    let shoulder = Vec3::new(0.0, 0.0, 0.34);
    (0..n)
        .map(|_| {
            let r: f64 = radius.sample(&mut rng);
            let az: f64 = azimuth.sample(&mut rng);
            let el: f64 = elevation.sample(&mut rng);
            let commanded = shoulder
                + Vec3::new(
                    r * el.cos() * az.cos(),
                    r * el.cos() * az.sin(),
                    r * el.sin(),
                );
            let measured = commanded
                + Vec3::new(
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                );
            (commanded, measured)
        })
        .collect()
}

fn summarize(cfg: &RunConfig, report: &AccuracyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "static accuracy: {} tracked positions, seed {}, noise sigma {:.4} m per axis",
        report.n_points, cfg.seed, cfg.accuracy_sigma_m
    );
    let _ = writeln!(
        s,
        "position error: mean {:.2} cm, sd {}",
        report.mean_error_m * 100.0,
        match report.sd_error_m {
            Some(v) => format!("{:.2} cm", v * 100.0),
            None => "n/a (single point)".to_string(),
        }
    );
    if report.n_points == 1 {
        let _ = writeln!(
            s,
            "warning: a single point gives no spread estimate; increase trials"
        );
    }
    s
}
