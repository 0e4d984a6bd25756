//! Sensor streams derived from the simulated ground truth: multirate
//! sampling, low-pass filtering, differentiation and the split of sensed
//! force/torque into external and interaction parts.

use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    board_torques, external_torque_planar, rotate, HandleWrench, Planar, TableGeometry,
    TableState,
};
use crate::error::{ensure_finite, Error, Result};

/// Low-pass filter description.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: u32,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl FilterSpec {
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        let spec = FilterSpec {
            order: 2,
            cutoff_hz,
            sample_rate_hz,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order != 2 {
            return Err(Error::invalid(format!(
                "only second-order filters are supported, got order {}",
                self.order
            )));
        }
        ensure_finite(&[self.cutoff_hz, self.sample_rate_hz], "filter spec")?;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::invalid(format!(
                "cutoff {} Hz must lie in (0, {}) Hz",
                self.cutoff_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// Second-order Butterworth low-pass, bilinear transform with prewarping.
#[derive(Clone, Debug, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    x: [f64; 2],
    y: [f64; 2],
    primed: bool,
}

impl Biquad {
    pub fn new(spec: &FilterSpec) -> Result<Self> {
        spec.validate()?;
        let k = (PI * spec.cutoff_hz / spec.sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Ok(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
            x: [0.0; 2],
            y: [0.0; 2],
            primed: false,
        })
    }

    /// Filters one sample. The first sample seeds the state so a constant
    /// input passes through without a start-up transient.
    pub fn filter(&mut self, x: f64) -> f64 {
        if !self.primed {
            self.x = [x; 2];
            self.y = [x; 2];
            self.primed = true;
        }
        let y = self.b[0] * x + self.b[1] * self.x[0] + self.b[2] * self.x[1]
            - self.a[0] * self.y[0]
            - self.a[1] * self.y[1];
        self.x = [x, self.x[0]];
        self.y = [y, self.y[0]];
        y
    }

    pub fn reset(&mut self) {
        self.primed = false;
    }

    /// Magnitude response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let (c1, s1) = (w.cos(), w.sin());
        let (c2, s2) = ((2.0 * w).cos(), (2.0 * w).sin());
        let num_re = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let num_im = -(self.b[1] * s1 + self.b[2] * s2);
        let den_re = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let den_im = -(self.a[0] * s1 + self.a[1] * s2);
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }
}

/// Filters a uniformly sampled series.
pub fn lowpass(series: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::invalid("lowpass needs at least one sample"));
    }
    let mut f = Biquad::new(spec)?;
    Ok(series.iter().map(|&x| f.filter(x)).collect())
}

/// Finite-difference derivative followed by [`lowpass`].
///
/// The first sample uses the forward difference, the rest backward differences.
pub fn differentiate(series: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::invalid("differentiate needs at least two samples"));
    }
    let dt = 1.0 / spec.sample_rate_hz;
    let raw: Vec<f64> = (0..series.len())
        .map(|i| {
            let j = i.max(1);
            (series[j] - series[j - 1]) / dt
        })
        .collect();
    lowpass(&raw, spec)
}

/// Streaming form of [`differentiate`].
#[derive(Clone, Debug)]
pub struct Differentiator {
    filter: Biquad,
    prev: Option<f64>,
    dt: f64,
}

impl Differentiator {
    pub fn new(spec: &FilterSpec) -> Result<Self> {
        Ok(Differentiator {
            filter: Biquad::new(spec)?,
            prev: None,
            dt: 1.0 / spec.sample_rate_hz,
        })
    }

    /// Returns the filtered rate, or `None` for the very first sample.
    pub fn push(&mut self, x: f64) -> Option<f64> {
        let out = self.prev.map(|p| self.filter.filter((x - p) / self.dt));
        self.prev = Some(x);
        out
    }
}

/// Splits a total force into external (`m·a`) and interaction parts.
///
/// The vertical component of `total` includes the weight the handles carry,
/// so its interaction part is the weight share whenever `a_z = 0`.
pub fn interaction_force(
    total: [f64; 3],
    geom: &TableGeometry,
    accel: [f64; 3],
) -> Result<([f64; 3], [f64; 3])> {
    ensure_finite(&total, "total force")?;
    ensure_finite(&accel, "acceleration")?;
    let fe = accel.map(|a| geom.mass * a);
    let fi = [total[0] - fe[0], total[1] - fe[1], total[2] - fe[2]];
    Ok((fe, fi))
}

/// Splits the sensed handle torque into external and interaction parts.
/// Returns `(tau_e, tau_i)`.
pub fn interaction_torque(
    wrench: &HandleWrench,
    geom: &TableGeometry,
    state: &TableState,
) -> Result<([f64; 3], [f64; 3])> {
    let tt = board_torques(wrench, geom)?;
    let te = external_torque_planar(state, geom);
    ensure_finite(&te, "external torque")?;
    Ok((te, [tt[0] - te[0], tt[1] - te[1], tt[2] - te[2]]))
}

/// Zero-order hold of `(t, value)` samples onto the `at` clock. Times before
/// the first sample take the first value.
pub fn zero_order_hold<T: Copy>(times: &[f64], values: &[T], at: &[f64]) -> Result<Vec<T>> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::invalid("zero-order hold needs at least one sample"));
    }
    let mut j = 0;
    Ok(at
        .iter()
        .map(|&t| {
            while j + 1 < times.len() && times[j + 1] <= t + 1e-12 {
                j += 1;
            }
            values[j]
        })
        .collect())
}

/// Sample rates and noise for [`SensorPipeline`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub force_rate_hz: u32,
    pub pose_rate_hz: u32,
    pub cutoff_hz: f64,
    /// Standard deviation of additive force noise per axis, N. Zero disables it.
    pub force_noise_std: f64,
    /// Standard deviation of additive position noise, m (and rad for yaw).
    pub pose_noise_std: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            force_rate_hz: 100,
            pose_rate_hz: 200,
            cutoff_hz: 20.0,
            force_noise_std: 0.0,
            pose_noise_std: 0.0,
        }
    }
}

/// What the follower perceives at a control tick.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sensed {
    /// Filtered total handle force, table frame, N.
    pub force: [f64; 3],
    /// First difference of `force`, N/s.
    pub force_rate: [f64; 3],
    /// Filtered handle torque about the board centre, N·m.
    pub torque: [f64; 3],
    /// First difference of `torque`, N·m/s.
    pub torque_rate: [f64; 3],
    /// Estimated board twist in the table frame from the pose stream.
    pub twist: Planar,
    /// Set on ticks where a new pose sample (and twist estimate) arrived.
    pub pose_fresh: bool,
    /// Set on ticks where a new force sample arrived.
    pub force_fresh: bool,
}

/// Converts the 500 Hz ground truth into the 100 Hz force and 200 Hz pose
/// streams and the filtered quantities the controllers consume.
#[derive(Clone, Debug)]
pub struct SensorPipeline {
    cfg: SensorConfig,
    geom: TableGeometry,
    sim_rate_hz: u32,
    tick: u64,
    force_k: u64,
    pose_k: u64,
    force_filters: Vec<Biquad>,
    prev_force: Option<[f64; 6]>,
    pose_diff: Vec<Differentiator>,
    prev_theta: Option<f64>,
    theta_unwrapped: f64,
    prev_state: Option<TableState>,
    rng: ChaCha8Rng,
    force_noise: Option<Normal<f64>>,
    pose_noise: Option<Normal<f64>>,
    out: Sensed,
}

impl SensorPipeline {
    pub fn new(
        cfg: SensorConfig,
        geom: TableGeometry,
        sim_rate_hz: u32,
        seed: u64,
    ) -> Result<Self> {
        if cfg.force_rate_hz == 0 || cfg.pose_rate_hz == 0 {
            return Err(Error::invalid("sensor rates must be positive"));
        }
        if cfg.force_rate_hz > sim_rate_hz || cfg.pose_rate_hz > sim_rate_hz {
            return Err(Error::invalid("sensor rates cannot exceed the simulation rate"));
        }
        let fspec = FilterSpec::new(cfg.cutoff_hz, cfg.force_rate_hz as f64)?;
        let pspec = FilterSpec::new(cfg.cutoff_hz, cfg.pose_rate_hz as f64)?;
        let noise = |std: f64| -> Result<Option<Normal<f64>>> {
            if std > 0.0 {
                Normal::new(0.0, std)
                    .map(Some)
                    .map_err(|e| Error::invalid(format!("noise: {e}")))
            } else {
                Ok(None)
            }
        };
        Ok(SensorPipeline {
            cfg,
            geom,
            sim_rate_hz,
            tick: 0,
            force_k: 0,
            pose_k: 0,
            force_filters: (0..6).map(|_| Biquad::new(&fspec)).collect::<Result<_>>()?,
            prev_force: None,
            pose_diff: (0..3)
                .map(|_| Differentiator::new(&pspec))
                .collect::<Result<_>>()?,
            prev_theta: None,
            theta_unwrapped: 0.0,
            prev_state: None,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5e75_0a11),
            force_noise: noise(cfg.force_noise_std)?,
            pose_noise: noise(cfg.pose_noise_std)?,
            out: Sensed::default(),
        })
    }

    pub fn config(&self) -> &SensorConfig {
        &self.cfg
    }

    pub fn latest(&self) -> &Sensed {
        &self.out
    }

    /// Feeds the ground truth of one simulation tick (the state reached at
    /// that tick and the wrench applied during it).
    pub fn push(&mut self, state: &TableState, wrench: &HandleWrench) -> Result<&Sensed> {
        let n = self.tick;
        let sim = self.sim_rate_hz as u64;
        self.out.force_fresh = false;
        self.out.pose_fresh = false;

        // Force stream: sample k is taken at the first tick at or after k/f.
        if n * self.cfg.force_rate_hz as u64 >= self.force_k * sim {
            self.sample_force(wrench)?;
            self.force_k += 1;
        }

        // Pose stream: sample k lies between ticks n-1 and n, interpolated.
        let pr = self.cfg.pose_rate_hz as u64;
        while n * pr >= self.pose_k * sim {
            let num = self.pose_k * sim;
            let pose = match &self.prev_state {
                Some(prev) if n > 0 && num < n * pr => {
                    let frac = (num as f64 - ((n - 1) * pr) as f64) / pr as f64;
                    lerp_pose(&prev.pose, &state.pose, frac)
                }
                _ => state.pose,
            };
            self.sample_pose(pose);
            self.pose_k += 1;
        }

        self.prev_state = Some(*state);
        self.tick += 1;
        Ok(&self.out)
    }

    fn sample_force(&mut self, wrench: &HandleWrench) -> Result<()> {
        let mut w = *wrench;
        if let Some(dist) = self.force_noise {
            for v in w.left.iter_mut().chain(w.right.iter_mut()) {
                *v += dist.sample(&mut self.rng);
            }
        }
        let torque = board_torques(&w, &self.geom)?;
        let total = w.total();
        let raw = [
            total[0], total[1], total[2], torque[0], torque[1], torque[2],
        ];
        let mut filtered = [0.0; 6];
        for (i, f) in self.force_filters.iter_mut().enumerate() {
            filtered[i] = f.filter(raw[i]);
        }
        let rate_scale = self.cfg.force_rate_hz as f64;
        let rates = match self.prev_force {
            Some(p) => std::array::from_fn(|i| (filtered[i] - p[i]) * rate_scale),
            None => [0.0; 6],
        };
        self.prev_force = Some(filtered);
        self.out.force = [filtered[0], filtered[1], filtered[2]];
        self.out.torque = [filtered[3], filtered[4], filtered[5]];
        self.out.force_rate = [rates[0], rates[1], rates[2]];
        self.out.torque_rate = [rates[3], rates[4], rates[5]];
        self.out.force_fresh = true;
        Ok(())
    }

    fn sample_pose(&mut self, pose: Planar) {
        let mut p = pose;
        if let Some(dist) = self.pose_noise {
            p.x += dist.sample(&mut self.rng);
            p.y += dist.sample(&mut self.rng);
            p.theta += dist.sample(&mut self.rng);
        }
        let theta = match self.prev_theta {
            Some(prev) => {
                let mut d = p.theta - prev;
                d = (d + PI).rem_euclid(2.0 * PI) - PI;
                self.theta_unwrapped + d
            }
            None => p.theta,
        };
        self.prev_theta = Some(p.theta);
        self.theta_unwrapped = theta;
        let vx = self.pose_diff[0].push(p.x);
        let vy = self.pose_diff[1].push(p.y);
        let wz = self.pose_diff[2].push(theta);
        if let (Some(vx), Some(vy), Some(wz)) = (vx, vy, wz) {
            let body = rotate(-theta, [vx, vy]);
            self.out.twist = Planar::new(body[0], body[1], wz);
        }
        self.out.pose_fresh = true;
    }
}

fn lerp_pose(a: &Planar, b: &Planar, s: f64) -> Planar {
    Planar::new(
        a.x + (b.x - a.x) * s,
        a.y + (b.y - a.y) * s,
        a.theta + (b.theta - a.theta) * s,
    )
}
