//! Offline analysis of recorded traces: sinusoid fitting, phase-difference
//! latency estimation over onset/steady windows, and static accuracy
//! statistics.

use crate::geometry::Vec3;
use crate::sim::Trace;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("window spans {span_s} s but the fit needs at least {need_s} s")]
    InsufficientSpan { span_s: f64, need_s: f64 },
    #[error("sampling grid is degenerate for a sinusoid fit")]
    DegenerateFit,
    #[error("no data")]
    NoData,
}

/// Fraction of one period a fit window must span.  Slightly under 1 so a
/// half-open one-period window sampled on a finite grid still qualifies.
const MIN_SPAN_PERIODS: f64 = 0.97;

/// When the fitted amplitude is smaller than this multiple of the residual
/// RMS the phase is meaningless and the fit is flagged.
const LOW_CONFIDENCE_RATIO: f64 = 10.0;

/// Least-squares fit of `y = amplitude * sin(2*pi*f*t + phase) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidFit {
    pub amplitude: f64,
    pub phase_rad: f64,
    pub offset: f64,
    pub residual_rms: f64,
    /// True when the amplitude is buried in residual noise; the phase
    /// should not be trusted.
    pub low_confidence: bool,
}

/// Solve the 3x3 system `m x = b` by Gaussian elimination with partial
/// pivoting; `None` when a pivot degenerates.
#[allow(clippy::needless_range_loop)] // index form mirrors the matrix algebra
fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3], pivot_tol: f64) -> Option<[f64; 3]> {
    for col in 0..3 {
        let mut piv = col;
        for row in (col + 1)..3 {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if m[piv][col].abs() < pivot_tol {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for c in col..3 {
                m[row][c] -= f * m[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for c in (row + 1)..3 {
            s -= m[row][c] * x[c];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Fit `y = a sin(wt) + b cos(wt) + c` at a known frequency by exact
/// normal-equation least squares, then report it in amplitude/phase form.
///
/// Needs at least three samples spanning most of one period.  Exact (to
/// rounding) whenever the data actually lies in the model space, for any
/// sampling grid with three distinct phases.
pub fn fit_sinusoid(
    samples: &[(f64, f64)],
    frequency_hz: f64,
) -> Result<SinusoidFit, AnalysisError> {
    let period = 1.0 / frequency_hz;
    let need_s = MIN_SPAN_PERIODS * period;
    let (mut t_min, mut t_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (t, _) in samples {
        t_min = t_min.min(*t);
        t_max = t_max.max(*t);
    }
    let span = t_max - t_min;
    if samples.len() < 3 || !span.is_finite() || span < need_s {
        return Err(AnalysisError::InsufficientSpan {
            span_s: if span.is_finite() { span } else { 0.0 },
            need_s,
        });
    }

    let w = 2.0 * std::f64::consts::PI * frequency_hz;
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(t, y) in samples {
        let basis = [(w * t).sin(), (w * t).cos(), 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            rhs[i] += basis[i] * y;
        }
    }
    let n = samples.len() as f64;
    let [a, b, c] = solve3(m, rhs, 1e-9 * n).ok_or(AnalysisError::DegenerateFit)?;

    let mut ss = 0.0;
    for &(t, y) in samples {
        let yh = a * (w * t).sin() + b * (w * t).cos() + c;
        ss += (y - yh) * (y - yh);
    }
    let residual_rms = (ss / n).sqrt();
    let amplitude = a.hypot(b);
    Ok(SinusoidFit {
        amplitude,
        phase_rad: b.atan2(a),
        offset: c,
        residual_rms,
        low_confidence: amplitude < LOW_CONFIDENCE_RATIO * residual_rms,
    })
}

/// Wrap a time difference into `(-period/2, period/2]`.
fn wrap_to_half_period(dt_s: f64, period_s: f64) -> f64 {
    let mut x = dt_s - period_s * (dt_s / period_s).round();
    if x <= -0.5 * period_s {
        x += period_s;
    }
    x
}

fn window_samples(trace: &Trace, window: (f64, f64), column: usize) -> Vec<(f64, f64)> {
    trace
        .column(column)
        .into_iter()
        .filter(|(t, _)| *t >= window.0 - 1e-9 && *t <= window.1 + 1e-9)
        .collect()
}

fn phase_lag_fits(
    reference: &Trace,
    test: &Trace,
    frequency_hz: f64,
    window: (f64, f64),
    column: usize,
) -> Result<(f64, SinusoidFit, SinusoidFit), AnalysisError> {
    let fit_ref = fit_sinusoid(&window_samples(reference, window, column), frequency_hz)?;
    let fit_test = fit_sinusoid(&window_samples(test, window, column), frequency_hz)?;
    let w = 2.0 * std::f64::consts::PI * frequency_hz;
    let raw = (fit_ref.phase_rad - fit_test.phase_rad) / w;
    let lag_ms = 1e3 * wrap_to_half_period(raw, 1.0 / frequency_hz);
    Ok((lag_ms, fit_ref, fit_test))
}

/// Signed latency of `test` behind `reference` in milliseconds, from the
/// phase difference of per-window sinusoid fits.  Positive means `test`
/// lags; the ambiguity is resolved into `(-period/2, period/2]`.
pub fn phase_lag_ms(
    reference: &Trace,
    test: &Trace,
    frequency_hz: f64,
    window: (f64, f64),
    column: usize,
) -> Result<f64, AnalysisError> {
    phase_lag_fits(reference, test, frequency_hz, window, column).map(|(lag, _, _)| lag)
}

/// Analysis windows of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Windows {
    /// First period after motion start, `[start, start + period)`.
    pub onset: (f64, f64),
    /// From two periods after motion start to the end of the trial.
    pub steady: (f64, f64),
}

/// Split a trial into onset and steady-state windows.  The trial must span
/// at least three periods.
pub fn segment_windows(
    motion_start_s: f64,
    period_s: f64,
    trial_span: (f64, f64),
) -> Result<Windows, AnalysisError> {
    let span = trial_span.1 - trial_span.0;
    let need = 3.0 * period_s;
    if span < need - 1e-9 {
        return Err(AnalysisError::InsufficientSpan {
            span_s: span,
            need_s: need,
        });
    }
    Ok(Windows {
        onset: (motion_start_s, motion_start_s + period_s),
        steady: (motion_start_s + 2.0 * period_s, trial_span.1),
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1); `None` below two samples.
fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Per-window latency statistics over a set of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub n_trials: usize,
    pub onset_ms: Vec<f64>,
    pub steady_ms: Vec<f64>,
    pub onset_mean_ms: f64,
    /// `None` for a single trial.
    pub onset_sd_ms: Option<f64>,
    pub steady_mean_ms: f64,
    pub steady_sd_ms: Option<f64>,
    /// Number of per-window fits whose phase was flagged unreliable.
    pub low_confidence_fits: usize,
}

/// Measure onset and steady latency for each `(reference, test)` trial and
/// aggregate.  Windows derive from the reference trace's span.
pub fn latency_report(
    trials: &[(Trace, Trace)],
    frequency_hz: f64,
    motion_start_s: f64,
    column: usize,
) -> Result<LatencyReport, AnalysisError> {
    if trials.is_empty() {
        return Err(AnalysisError::NoData);
    }
    let period = 1.0 / frequency_hz;
    let mut onset_ms = Vec::with_capacity(trials.len());
    let mut steady_ms = Vec::with_capacity(trials.len());
    let mut low_confidence_fits = 0;
    for (reference, test) in trials {
        let span = match (reference.start_s(), reference.end_s()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(AnalysisError::NoData),
        };
        let windows = segment_windows(motion_start_s, period, span)?;
        for (window, out) in [
            (windows.onset, &mut onset_ms),
            (windows.steady, &mut steady_ms),
        ] {
            let (lag, fr, ft) = phase_lag_fits(reference, test, frequency_hz, window, column)?;
            low_confidence_fits += usize::from(fr.low_confidence) + usize::from(ft.low_confidence);
            out.push(lag);
        }
    }
    Ok(LatencyReport {
        n_trials: trials.len(),
        onset_mean_ms: mean(&onset_ms),
        onset_sd_ms: sample_sd(&onset_ms),
        steady_mean_ms: mean(&steady_ms),
        steady_sd_ms: sample_sd(&steady_ms),
        onset_ms,
        steady_ms,
        low_confidence_fits,
    })
}

/// Statistics of commanded-vs-measured position errors.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub n_points: usize,
    pub errors_m: Vec<f64>,
    pub mean_error_m: f64,
    /// `None` for a single point.
    pub sd_error_m: Option<f64>,
}

/// Euclidean error statistics over `(commanded, measured)` position pairs.
pub fn static_accuracy(pairs: &[(Vec3<f64>, Vec3<f64>)]) -> Result<AccuracyReport, AnalysisError> {
    if pairs.is_empty() {
        return Err(AnalysisError::NoData);
    }
    let errors_m: Vec<f64> = pairs.iter().map(|(a, b)| (*a - *b).norm()).collect();
    Ok(AccuracyReport {
        n_points: pairs.len(),
        mean_error_m: mean(&errors_m),
        sd_error_m: sample_sd(&errors_m),
        errors_m,
    })
}

/// Per-axis standard deviation of isotropic Gaussian position noise whose
/// expected error norm is `target_mean_m`.  For a 3-vector of iid
/// `N(0, sigma^2)` components the norm has mean `sigma * sqrt(8 / pi)`,
/// so `sigma = target * sqrt(pi / 8)`.
pub fn sigma_for_mean_error(target_mean_m: f64) -> f64 {
    target_mean_m * (std::f64::consts::PI / 8.0).sqrt()
}
