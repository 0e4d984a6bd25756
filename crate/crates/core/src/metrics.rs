//! Trial scoring: completion time, deviation from minimum jerk, torque-rate
//! measures, summary statistics and human baselines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::controllers::{ControllerKind, Mode};
use crate::dynamics::{HandleWrench, Planar, TableGeometry};
use crate::error::{ensure_finite, Error, Result};
use crate::leader::{minimum_jerk_clamped, TaskSpec};

/// Fraction of the displacement that counts as "left the start".
pub const START_FRACTION: f64 = 0.05;
/// Half-width of the settle band around the goal, as a fraction.
pub const BAND_FRACTION: f64 = 0.05;
/// Buffer added to every completion time, s.
pub const COMPLETION_BUFFER: f64 = 0.5;
/// Displacements below this are treated as no movement at all.
pub const MIN_DISPLACEMENT: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Trial log

/// One simulation step as logged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub seq: u64,
    pub t: f64,
    pub pose: Planar,
    pub twist: Planar,
    pub accel: Planar,
    pub wrench: HandleWrench,
    /// Filtered handle force the follower sensed, table frame.
    pub sensed_force: [f64; 3],
    /// Filtered handle torque the follower sensed.
    pub sensed_torque: [f64; 3],
    /// Filtered table-frame twist the follower sensed.
    pub sensed_twist: Planar,
    pub command: Planar,
    pub mode: Mode,
    #[serde(default)]
    pub saturated: bool,
}

/// Static description of a trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialHeader {
    pub task: TaskSpec,
    pub controller: ControllerKind,
    pub seed: u64,
    pub dt: f64,
    pub geometry: TableGeometry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub header: TrialHeader,
    pub steps: Vec<StepRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header(TrialHeader),
    Step(StepRecord),
}

impl TrialLog {
    /// Non-empty, strictly increasing times on a constant step, gap-free
    /// sequence numbers.
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::invalid("trial log is empty"));
        }
        let dt = self.header.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("trial log step must be positive"));
        }
        for (i, w) in self.steps.windows(2).enumerate() {
            if w[1].seq != w[0].seq + 1 {
                return Err(Error::invalid(format!(
                    "sequence gap after step {} ({} -> {})",
                    i, w[0].seq, w[1].seq
                )));
            }
            let step = w[1].t - w[0].t;
            if !(step > 0.0) || (step - dt).abs() > 1e-9 * (1.0 + w[1].t.abs()) {
                return Err(Error::invalid(format!(
                    "non-uniform time at step {}: dt {} vs {}",
                    i + 1,
                    step,
                    dt
                )));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.t).collect()
    }

    /// Progress toward the task goal at each step.
    pub fn progress(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| self.header.task.progress(&s.pose))
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &LogLine::Header(self.header.clone()))?;
        w.write_all(b"\n").map_err(|e| Error::io("<log>", e))?;
        for s in &self.steps {
            serde_json::to_writer(&mut w, &LogLine::Step(s.clone()))?;
            w.write_all(b"\n").map_err(|e| Error::io("<log>", e))?;
        }
        w.flush().map_err(|e| Error::io("<log>", e))
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut header = None;
        let mut steps = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<log>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LogLine>(&line)? {
                LogLine::Header(h) if header.is_none() => header = Some(h),
                LogLine::Header(_) => {
                    return Err(Error::invalid(format!("second header on line {}", n + 1)))
                }
                LogLine::Step(s) => steps.push(s),
            }
        }
        let header = header.ok_or_else(|| Error::invalid("log has no header line"))?;
        Ok(TrialLog { header, steps })
    }
}

// ---------------------------------------------------------------------------
// Trajectory metrics

/// Times at which the trajectory first leaves the start (beyond 5% of the
/// displacement) and last enters the 95% band around the end.
pub fn completion_window(times: &[f64], x: &[f64], start: f64, end: f64) -> Result<(f64, f64)> {
    if times.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: x.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let disp = end - start;
    if !(disp.abs() >= MIN_DISPLACEMENT) {
        return Err(Error::Undefined("completion time (no displacement)"));
    }
    let frac = |v: f64| (v - start) / disp;
    let in_band = |v: f64| (frac(v) - 1.0).abs() <= BAND_FRACTION;
    let exit = x
        .iter()
        .position(|&v| frac(v) > START_FRACTION)
        .ok_or(Error::Undefined("completion time (never left the start)"))?;
    if !in_band(*x.last().unwrap()) {
        return Err(Error::Undefined("completion time (never settled)"));
    }
    let mut entry = x.len() - 1;
    while entry > 0 && in_band(x[entry - 1]) {
        entry -= 1;
    }
    Ok((times[exit], times[entry.max(exit)]))
}

/// Time between leaving the start and settling at the end, plus the buffer.
pub fn completion_time(times: &[f64], x: &[f64], start: f64, end: f64) -> Result<f64> {
    let (a, b) = completion_window(times, x, start, end)?;
    Ok(b - a + COMPLETION_BUFFER)
}

/// How residuals are accumulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    #[default]
    Absolute,
    Signed,
}

/// Sum of residuals between the ideal and the actual trajectory.
pub fn mje(actual: &[f64], ideal: &[f64], mode: ResidualMode) -> Result<f64> {
    if actual.len() != ideal.len() {
        return Err(Error::LengthMismatch {
            expected: ideal.len(),
            got: actual.len(),
        });
    }
    ensure_finite(actual, "actual trajectory")?;
    ensure_finite(ideal, "ideal trajectory")?;
    Ok(actual
        .iter()
        .zip(ideal)
        .map(|(a, i)| match mode {
            ResidualMode::Absolute => (i - a).abs(),
            ResidualMode::Signed => i - a,
        })
        .sum())
}

/// [`mje`] against the minimum-jerk profile from `x0` to `xf` over `[t0, tf]`
/// sampled on `times`.
pub fn mje_minimum_jerk(
    times: &[f64],
    actual: &[f64],
    (x0, xf): (f64, f64),
    (t0, tf): (f64, f64),
    mode: ResidualMode,
) -> Result<f64> {
    if !(tf > t0) {
        return Err(Error::invalid("minimum jerk reference needs tf > t0"));
    }
    let ideal: Vec<f64> = times
        .iter()
        .map(|&t| minimum_jerk_clamped(x0, xf, t, t0, tf).0)
        .collect();
    mje(actual, &ideal, mode)
}

/// Linear interpolation of `(t_src, x_src)` onto `t_dst`; values outside the
/// source span are held at the ends.
pub fn resample_linear(t_src: &[f64], x_src: &[f64], t_dst: &[f64]) -> Result<Vec<f64>> {
    if t_src.len() != x_src.len() {
        return Err(Error::LengthMismatch {
            expected: t_src.len(),
            got: x_src.len(),
        });
    }
    if t_src.is_empty() {
        return Err(Error::invalid("cannot resample an empty series"));
    }
    let mut j = 0;
    Ok(t_dst
        .iter()
        .map(|&t| {
            if t <= t_src[0] {
                return x_src[0];
            }
            while j + 1 < t_src.len() && t_src[j + 1] < t {
                j += 1;
            }
            if j + 1 >= t_src.len() {
                return x_src[t_src.len() - 1];
            }
            let s = (t - t_src[j]) / (t_src[j + 1] - t_src[j]);
            x_src[j] + (x_src[j + 1] - x_src[j]) * s
        })
        .collect())
}

/// Result of [`mje_on_clocks`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MjeResult {
    pub value: f64,
    /// The actual trajectory had to be interpolated onto the ideal clock.
    pub resampled: bool,
}

/// [`mje`] for trajectories that may be sampled on different clocks.
pub fn mje_on_clocks(
    actual: (&[f64], &[f64]),
    ideal: (&[f64], &[f64]),
    mode: ResidualMode,
) -> Result<MjeResult> {
    let same = actual.0.len() == ideal.0.len()
        && actual
            .0
            .iter()
            .zip(ideal.0)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs()));
    if same {
        return Ok(MjeResult {
            value: mje(actual.1, ideal.1, mode)?,
            resampled: false,
        });
    }
    let on_ideal = resample_linear(actual.0, actual.1, ideal.0)?;
    Ok(MjeResult {
        value: mje(&on_ideal, ideal.1, mode)?,
        resampled: true,
    })
}

/// Per-sample torque rate: forward difference at the first sample,
/// backward differences after it.
pub fn torque_rate(torque: &[f64], dt: f64) -> Result<Vec<f64>> {
    if torque.len() < 2 {
        return Err(Error::invalid("torque rate needs at least two samples"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("torque rate needs a positive step"));
    }
    ensure_finite(torque, "torque series")?;
    Ok((0..torque.len())
        .map(|i| {
            let j = i.max(1);
            (torque[j] - torque[j - 1]) / dt
        })
        .collect())
}

/// Summed squared torque rate, `Σ (τ̇_t² + τ̇_{t+1}²)`.
pub fn mtm(torque: &[f64], dt: f64) -> Result<f64> {
    let r = torque_rate(torque, dt)?;
    Ok(r.windows(2).map(|w| w[0] * w[0] + w[1] * w[1]).sum())
}

/// Trapezoidal integral of `τ̇₁² + τ̇₂²`.
pub fn torque_change(tau1: &[f64], tau2: &[f64], dt: f64) -> Result<f64> {
    if tau1.len() != tau2.len() {
        return Err(Error::LengthMismatch {
            expected: tau1.len(),
            got: tau2.len(),
        });
    }
    let r1 = torque_rate(tau1, dt)?;
    let r2 = torque_rate(tau2, dt)?;
    let g: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a * a + b * b).collect();
    Ok(g.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum())
}

// ---------------------------------------------------------------------------
// Statistics

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least two pairs"));
    }
    ensure_finite(x, "pearson x")?;
    ensure_finite(y, "pearson y")?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("pearson correlation (zero variance)"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Effect-size category of |d|.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectSize {
    VerySmall,
    Small,
    Medium,
    Large,
    VeryLarge,
    Huge,
}

impl EffectSize {
    pub fn of(d: f64) -> Self {
        let a = d.abs();
        if a >= 2.0 {
            EffectSize::Huge
        } else if a >= 1.2 {
            EffectSize::VeryLarge
        } else if a >= 0.8 {
            EffectSize::Large
        } else if a >= 0.5 {
            EffectSize::Medium
        } else if a >= 0.2 {
            EffectSize::Small
        } else {
            EffectSize::VerySmall
        }
    }
}

/// Cohen's d with pooled standard deviation, and its category.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<(f64, EffectSize)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("cohen's d needs two samples of size >= 2"));
    }
    ensure_finite(a, "sample a")?;
    ensure_finite(b, "sample b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(Error::Undefined("cohen's d (zero pooled std)"));
    }
    let d = (mean(a) - mean(b)) / pooled;
    Ok((d, EffectSize::of(d)))
}

/// Welch's unpaired t-test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

pub fn ttest_unpaired(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("t-test needs two samples of size >= 2"));
    }
    ensure_finite(a, "sample a")?;
    ensure_finite(b, "sample b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_var(a) / na, sample_var(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(Error::Undefined("t-test (zero variance in both samples)"));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::invalid(format!("student t: {e}")))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest { t, df, p })
}

// ---------------------------------------------------------------------------
// Reports

/// Sampling used when scoring a log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsOptions {
    pub residual: ResidualMode,
    /// Clock the motion metrics are evaluated on, Hz.
    pub motion_rate_hz: f64,
    /// Clock the torque metrics are evaluated on, Hz.
    pub torque_rate_hz: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            residual: ResidualMode::Absolute,
            motion_rate_hz: 200.0,
            torque_rate_hz: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub controller: ControllerKind,
    pub task: TaskSpec,
    pub seed: u64,
    /// Settled in the goal band by the end of the log.
    pub completed: bool,
    /// s; absent when undefined.
    pub completion_time: Option<f64>,
    /// m for translations, rad for rotations, summed over motion samples.
    pub mje: f64,
    /// Of the sensed yaw torque, N²·m²/s².
    pub mtm: f64,
    /// Of the two handles' yaw torque contributions.
    pub torque_change: f64,
    pub peak_lateral_speed: f64,
    pub avg_lateral_speed: f64,
    pub peak_angular_speed: f64,
    pub avg_angular_speed: f64,
    /// Signed mean anterior interaction force during the movement, N.
    pub mean_anterior_interaction: f64,
    /// Mean planar |Fi| over mean planar |Fe|; absent if the board never accelerated.
    pub interaction_ratio: Option<f64>,
    /// Distance (m) or heading error (rad) to the goal at the end of the log.
    pub final_error: f64,
    pub saturated_steps: u64,
    /// Simulated time covered by the log, s.
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn uniform_clock(t0: f64, t1: f64, rate: f64) -> Vec<f64> {
    let n = ((t1 - t0) * rate + 1e-9).floor() as usize;
    (0..=n).map(|k| t0 + k as f64 / rate).collect()
}

/// Scores a trial log.
pub fn evaluate(log: &TrialLog, opts: &MetricsOptions) -> Result<MetricsReport> {
    log.validate()?;
    let h = &log.header;
    let task = &h.task;
    let geom = &h.geometry;
    let times = log.times();
    let (t_first, t_last) = (times[0], *times.last().unwrap());
    let mut notes = Vec::new();

    // motion clock
    let mt = uniform_clock(t_first, t_last, opts.motion_rate_hz);
    let progress = resample_linear(&times, &log.progress(), &mt)?;
    let window = completion_window(&mt, &progress, 0.0, task.magnitude);
    let completion_time = match &window {
        Ok((a, b)) => Some(b - a + COMPLETION_BUFFER),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };

    // Minimum-jerk reference: fitted so its 5% and 95% crossings fall on the
    // observed ones; the whole log otherwise.
    let (t0, tf, xf) = match window {
        Ok((a, b)) if b > a => {
            let (s5, s95) = mj_crossings();
            let span = (b - a) / (s95 - s5);
            (a - s5 * span, a - s5 * span + span, *progress.last().unwrap())
        }
        _ => (t_first, t_last.max(t_first + 1e-3), *progress.last().unwrap()),
    };
    let mje_value = mje_minimum_jerk(&mt, &progress, (0.0, xf), (t0, tf), opts.residual)?;

    // torque clock
    let tt = uniform_clock(t_first, t_last, opts.torque_rate_hz);
    let dt_tau = 1.0 / opts.torque_rate_hz;
    let tau_z: Vec<f64> = log.steps.iter().map(|s| s.sensed_torque[2]).collect();
    let tau_z = resample_linear(&times, &tau_z, &tt)?;
    let (hl, hw) = (geom.length / 2.0, geom.width / 2.0);
    let left: Vec<f64> = log
        .steps
        .iter()
        .map(|s| -s.wrench.left[0] * hw - s.wrench.left[1] * hl)
        .collect();
    let right: Vec<f64> = log
        .steps
        .iter()
        .map(|s| s.wrench.right[0] * hw - s.wrench.right[1] * hl)
        .collect();
    let left = resample_linear(&times, &left, &tt)?;
    let right = resample_linear(&times, &right, &tt)?;
    let (mtm_value, tc_value) = if tt.len() >= 2 {
        (mtm(&tau_z, dt_tau)?, torque_change(&left, &right, dt_tau)?)
    } else {
        notes.push("log too short for torque metrics".into());
        (0.0, 0.0)
    };

    // velocities and interaction over the movement window (whole log if undefined)
    let (wa, wb) = window.unwrap_or((t_first, t_last));
    let moving: Vec<&StepRecord> = log
        .steps
        .iter()
        .filter(|s| s.t >= wa - 1e-12 && s.t <= wb + 1e-12)
        .collect();
    let body = |s: &StepRecord| {
        let v = crate::dynamics::rotate(-s.pose.theta, [s.twist.x, s.twist.y]);
        let a = crate::dynamics::rotate(-s.pose.theta, [s.accel.x, s.accel.y]);
        (v, a)
    };
    let n = moving.len().max(1) as f64;
    let mut peak_lat: f64 = 0.0;
    let mut peak_ang: f64 = 0.0;
    let (mut sum_lat, mut sum_ang, mut sum_fix) = (0.0, 0.0, 0.0);
    let (mut sum_fi, mut sum_fe) = (0.0, 0.0);
    for s in &moving {
        let (v, a) = body(s);
        peak_lat = peak_lat.max(v[1].abs());
        peak_ang = peak_ang.max(s.twist.theta.abs());
        sum_lat += v[1].abs();
        sum_ang += s.twist.theta.abs();
        let total = s.wrench.total();
        let fe = [geom.mass * a[0], geom.mass * a[1]];
        let fi = [total[0] - fe[0], total[1] - fe[1]];
        sum_fix += fi[0];
        sum_fi += fi[0].hypot(fi[1]);
        sum_fe += fe[0].hypot(fe[1]);
    }
    let interaction_ratio = (sum_fe > 0.0).then(|| sum_fi / sum_fe);

    let last = &log.steps.last().unwrap().pose;
    let goal = task.goal(geom);
    let final_error = if task.is_rotation() {
        (last.theta - goal.theta).abs()
    } else {
        (last.x - goal.x).hypot(last.y - goal.y)
    };

    let report = MetricsReport {
        controller: h.controller,
        task: task.clone(),
        seed: h.seed,
        completed: completion_time.is_some(),
        completion_time,
        mje: mje_value,
        mtm: mtm_value,
        torque_change: tc_value,
        peak_lateral_speed: peak_lat,
        avg_lateral_speed: sum_lat / n,
        peak_angular_speed: peak_ang,
        avg_angular_speed: sum_ang / n,
        mean_anterior_interaction: sum_fix / n,
        interaction_ratio,
        final_error,
        saturated_steps: log.steps.iter().filter(|s| s.saturated).count() as u64,
        duration: t_last - t_first,
        notes,
    };
    Ok(report)
}

/// Normalized times at which the minimum-jerk profile crosses 5% and 95%.
pub fn mj_crossings() -> (f64, f64) {
    let f = |s: f64| s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
    let root = |target: f64| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (root(START_FRACTION), root(1.0 - BAND_FRACTION))
}

// ---------------------------------------------------------------------------
// Published baselines

pub mod fixtures {
    use serde::{Deserialize, Serialize};

    /// Human-human reference constants.
    pub const INTERACTION_TO_EXTERNAL_RATIO: f64 = 20.0;
    /// Correlation of deviation from minimum jerk with completion time.
    pub const PEARSON_MJE_COMPLETION_LATERAL: f64 = 0.59;
    pub const PEARSON_MJE_COMPLETION_ROTATION: f64 = 0.83;

    /// Mean and standard deviation of one blind human-human metric.
    #[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
    pub struct MeanStd {
        pub metric: &'static str,
        pub mean_rotation: f64,
        pub mean_translation: f64,
        pub std_rotation: f64,
        pub std_translation: f64,
    }

    pub const BLIND_HHI: [MeanStd; 5] = [
        MeanStd {
            metric: "MJ Err",
            mean_rotation: 392.71,
            mean_translation: 149.91,
            std_rotation: 391.7,
            std_translation: 87.65,
        },
        MeanStd {
            metric: "t_c",
            mean_rotation: 7.08,
            mean_translation: 7.18,
            std_rotation: 2.9,
            std_translation: 1.62,
        },
        MeanStd {
            metric: "v_y,avg",
            mean_rotation: 0.17,
            mean_translation: 0.18,
            std_rotation: 0.06,
            std_translation: 0.04,
        },
        MeanStd {
            metric: "omega_z,avg",
            mean_rotation: 0.26,
            mean_translation: 0.004,
            std_rotation: 0.09,
            std_translation: 0.003,
        },
        MeanStd {
            metric: "delta tau_z dot",
            mean_rotation: 488454.4,
            mean_translation: 387937.6,
            std_rotation: 560601.9,
            std_translation: 281393.2,
        },
    ];

    /// Blind completion time of the translation task, s.
    pub const BLIND_COMPLETION_TRANSLATION: f64 = 7.18;

    /// One row of the controller comparison table.
    #[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
    pub struct ComparisonRow {
        pub metric: &'static str,
        pub blind_hhi: f64,
        pub evic: f64,
        pub nnpc: f64,
        pub sighted_hhi: f64,
    }

    pub const COMPARISON_HEADER: [&str; 5] =
        ["Metric and Task Type", "Blind HHI", "EVIC", "NNPC", "Sighted HHI"];

    pub const COMPARISON: [ComparisonRow; 6] = [
        ComparisonRow {
            metric: "Completion Time (s)--Rotation",
            blind_hhi: 7.08,
            evic: 8.25,
            nnpc: 8.26,
            sighted_hhi: 6.58,
        },
        ComparisonRow {
            metric: "Completion Time (s)--Translation",
            blind_hhi: 7.18,
            evic: 7.91,
            nnpc: 7.75,
            sighted_hhi: 4.93,
        },
        ComparisonRow {
            metric: "MJE (rads)--Rotation",
            blind_hhi: 392.71,
            evic: 96.44,
            nnpc: 87.38,
            sighted_hhi: 344.70,
        },
        ComparisonRow {
            metric: "MJE (m)--Translation",
            blind_hhi: 149.91,
            evic: 50.24,
            nnpc: 48.51,
            sighted_hhi: 98.92,
        },
        ComparisonRow {
            metric: "MTM (N^2*m^2/s^2)--Rotation",
            blind_hhi: 488454.38,
            evic: 65602.60,
            nnpc: 12770.75,
            sighted_hhi: 341253.43,
        },
        ComparisonRow {
            metric: "MTM (N^2*m^2/s^2)--Translation",
            blind_hhi: 387937.56,
            evic: 48191.90,
            nnpc: 15220.89,
            sighted_hhi: 151758.83,
        },
    ];

    /// All baselines in one serializable bundle.
    #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
    pub struct BaselineFixtures {
        pub blind_hhi: Vec<OwnedMeanStd>,
        pub comparison: Vec<OwnedComparisonRow>,
        pub interaction_to_external_ratio: f64,
        pub pearson_mje_completion_lateral: f64,
        pub pearson_mje_completion_rotation: f64,
    }

    #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
    pub struct OwnedMeanStd {
        pub metric: String,
        pub mean_rotation: f64,
        pub mean_translation: f64,
        pub std_rotation: f64,
        pub std_translation: f64,
    }

    #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
    pub struct OwnedComparisonRow {
        pub metric: String,
        pub blind_hhi: f64,
        pub evic: f64,
        pub nnpc: f64,
        pub sighted_hhi: f64,
    }

    impl BaselineFixtures {
        pub fn published() -> Self {
            BaselineFixtures {
                blind_hhi: BLIND_HHI
                    .iter()
                    .map(|r| OwnedMeanStd {
                        metric: r.metric.to_string(),
                        mean_rotation: r.mean_rotation,
                        mean_translation: r.mean_translation,
                        std_rotation: r.std_rotation,
                        std_translation: r.std_translation,
                    })
                    .collect(),
                comparison: COMPARISON
                    .iter()
                    .map(|r| OwnedComparisonRow {
                        metric: r.metric.to_string(),
                        blind_hhi: r.blind_hhi,
                        evic: r.evic,
                        nnpc: r.nnpc,
                        sighted_hhi: r.sighted_hhi,
                    })
                    .collect(),
                interaction_to_external_ratio: INTERACTION_TO_EXTERNAL_RATIO,
                pearson_mje_completion_lateral: PEARSON_MJE_COMPLETION_LATERAL,
                pearson_mje_completion_rotation: PEARSON_MJE_COMPLETION_ROTATION,
            }
        }
    }
}

/// Writes the published comparison table as CSV, two decimals per cell.
pub fn write_fixture_csv<W: Write>(w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(fixtures::COMPARISON_HEADER)?;
    for r in &fixtures::COMPARISON {
        out.write_record([
            r.metric.to_string(),
            format!("{:.2}", r.blind_hhi),
            format!("{:.2}", r.evic),
            format!("{:.2}", r.nnpc),
            format!("{:.2}", r.sighted_hhi),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

/// Bench means for the comparison table; `None` where no trial contributed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub mean: Option<f64>,
    pub trials: usize,
}

/// Mean completion time, MJE and MTM per controller and task family,
/// laid out like the published comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    /// Rows in the order of [`fixtures::COMPARISON`]; columns EVIC then NNPC.
    pub rows: Vec<(String, SummaryCell, SummaryCell)>,
}

impl BenchSummary {
    pub fn from_reports(reports: &[MetricsReport]) -> Self {
        let pick = |ctrl: ControllerKind, rotation: bool, f: &dyn Fn(&MetricsReport) -> Option<f64>| {
            let vals: Vec<f64> = reports
                .iter()
                .filter(|r| r.controller == ctrl && r.task.is_rotation() == rotation)
                .filter_map(f)
                .collect();
            SummaryCell {
                mean: (!vals.is_empty()).then(|| mean(&vals)),
                trials: vals.len(),
            }
        };
        let metrics: [(&dyn Fn(&MetricsReport) -> Option<f64>, bool); 6] = [
            (&|r| r.completion_time, true),
            (&|r| r.completion_time, false),
            (&|r| Some(r.mje), true),
            (&|r| Some(r.mje), false),
            (&|r| Some(r.mtm), true),
            (&|r| Some(r.mtm), false),
        ];
        let rows = fixtures::COMPARISON
            .iter()
            .zip(metrics.iter())
            .map(|(row, (f, rot))| {
                (
                    row.metric.to_string(),
                    pick(ControllerKind::Evic, *rot, *f),
                    pick(ControllerKind::Nnpc, *rot, *f),
                )
            })
            .collect();
        BenchSummary { rows }
    }

    /// CSV with the published human columns around the bench means.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(fixtures::COMPARISON_HEADER)?;
        for ((label, evic, nnpc), fx) in self.rows.iter().zip(&fixtures::COMPARISON) {
            let cell = |c: &SummaryCell| c.mean.map(|v| format!("{v:.2}")).unwrap_or_default();
            out.write_record([
                label.clone(),
                format!("{:.2}", fx.blind_hhi),
                cell(evic),
                cell(nnpc),
                format!("{:.2}", fx.sighted_hhi),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }
}
