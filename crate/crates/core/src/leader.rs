//! Synthetic human leader: task references, torque triggers and the handle
//! force distribution that realizes them.

use serde::{Deserialize, Serialize};

use crate::controllers::{EvicParams, Mode};
use crate::dynamics::{rotate, HandleWrench, Planar, TableGeometry, TableState, GRAVITY};
use crate::error::{ensure_finite, Error, Result};

/// Minimum-jerk interpolation between `x0` and `xf` over `[t0, tf]`.
pub fn minimum_jerk(x0: f64, xf: f64, t: f64, t0: f64, tf: f64) -> Result<f64> {
    if !(tf > t0) {
        return Err(Error::invalid("minimum jerk needs tf > t0"));
    }
    if !(t >= t0 && t <= tf) {
        return Err(Error::invalid(format!("t = {t} outside [{t0}, {tf}]")));
    }
    let s = (t - t0) / (tf - t0);
    Ok(x0 + (xf - x0) * (s * s * s * (10.0 + s * (-15.0 + 6.0 * s))))
}

/// Position and velocity of the minimum-jerk profile, held at the endpoints
/// outside `[t0, tf]`.
pub fn minimum_jerk_clamped(x0: f64, xf: f64, t: f64, t0: f64, tf: f64) -> (f64, f64) {
    if t <= t0 {
        return (x0, 0.0);
    }
    if t >= tf {
        return (xf, 0.0);
    }
    let span = tf - t0;
    let s = (t - t0) / span;
    let pos = x0 + (xf - x0) * (s * s * s * (10.0 + s * (-15.0 + 6.0 * s)));
    let vel = (xf - x0) / span * (30.0 * s * s * (1.0 - s) * (1.0 - s));
    (pos, vel)
}

/// Trapezoidal (or triangular, for short moves) speed profile from rest to
/// rest over `distance`. Returns `(position, velocity)` at `t` from start.
pub fn cruise_profile(distance: f64, speed: f64, accel: f64, t: f64) -> (f64, f64) {
    if t <= 0.0 || distance <= 0.0 {
        return (0.0, 0.0);
    }
    let (t_acc, v_peak) = if speed * speed / accel > distance {
        let tp = (distance / accel).sqrt();
        (tp, accel * tp)
    } else {
        (speed / accel, speed)
    };
    let d_acc = 0.5 * accel * t_acc * t_acc;
    let t_cruise = (distance - 2.0 * d_acc) / v_peak;
    let t_total = 2.0 * t_acc + t_cruise;
    if t < t_acc {
        (0.5 * accel * t * t, accel * t)
    } else if t < t_acc + t_cruise {
        (d_acc + v_peak * (t - t_acc), v_peak)
    } else if t < t_total {
        let r = t_total - t;
        (distance - 0.5 * accel * r * r, accel * r)
    } else {
        (distance, 0.0)
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    LateralTranslation,
    PlanarRotation,
    AnteriorTranslation,
}

/// Direction of travel. `Left` is `+y`, `Ccw` (right rotation) is `+theta`,
/// `Forward` is `+x`, all in the table frame at the start of the task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
    Cw,
    Ccw,
    Forward,
    Backward,
}

/// How the leader's motion reference evolves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceShape {
    /// Accelerate to the cruise speed, hold it, decelerate.
    #[default]
    Cruise,
    /// Minimum-jerk point-to-point over the nominal duration.
    MinimumJerk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: TaskKind,
    pub direction: Direction,
    /// m for translations, rad for rotations.
    pub magnitude: f64,
    /// Nominal duration, s.
    pub duration: f64,
    #[serde(default)]
    pub start: Planar,
    #[serde(default)]
    pub reference: ReferenceShape,
}

impl TaskSpec {
    pub fn lateral(direction: Direction, magnitude: f64) -> Self {
        TaskSpec {
            name: None,
            kind: TaskKind::LateralTranslation,
            direction,
            magnitude,
            duration: 8.0,
            start: Planar::ZERO,
            reference: ReferenceShape::Cruise,
        }
    }

    pub fn rotation(direction: Direction, magnitude: f64) -> Self {
        TaskSpec {
            kind: TaskKind::PlanarRotation,
            duration: 6.0,
            ..TaskSpec::lateral(direction, magnitude)
        }
    }

    pub fn anterior(direction: Direction, magnitude: f64) -> Self {
        TaskSpec {
            kind: TaskKind::AnteriorTranslation,
            duration: 5.0,
            ..TaskSpec::lateral(direction, magnitude)
        }
    }

    /// Checks the invariants. A zero magnitude is accepted so that
    /// degenerate trials can be run and reported as such.
    pub fn validate(&self) -> Result<()> {
        ensure_finite(&[self.magnitude, self.duration], "task spec")?;
        if !self.start.is_finite() {
            return Err(Error::NonFinite("task start pose"));
        }
        if self.magnitude < 0.0 {
            return Err(Error::invalid("task magnitude must be >= 0"));
        }
        if self.duration <= 0.0 {
            return Err(Error::invalid("task duration must be positive"));
        }
        let ok = matches!(
            (self.kind, self.direction),
            (TaskKind::LateralTranslation, Direction::Left | Direction::Right)
                | (TaskKind::PlanarRotation, Direction::Cw | Direction::Ccw)
                | (
                    TaskKind::AnteriorTranslation,
                    Direction::Forward | Direction::Backward
                )
        );
        if !ok {
            return Err(Error::invalid(format!(
                "direction {:?} does not apply to {:?}",
                self.direction, self.kind
            )));
        }
        Ok(())
    }

    pub fn sign(&self) -> f64 {
        match self.direction {
            Direction::Left | Direction::Ccw | Direction::Forward => 1.0,
            Direction::Right | Direction::Cw | Direction::Backward => -1.0,
        }
    }

    /// The EVIC mode this task should be signalled with, if any.
    pub fn trigger_mode(&self) -> Option<Mode> {
        match (self.kind, self.direction) {
            (TaskKind::LateralTranslation, Direction::Left) => Some(Mode::LeftTranslation),
            (TaskKind::LateralTranslation, Direction::Right) => Some(Mode::RightTranslation),
            (TaskKind::PlanarRotation, Direction::Cw) => Some(Mode::LeftRotation),
            (TaskKind::PlanarRotation, Direction::Ccw) => Some(Mode::RightRotation),
            _ => None,
        }
    }

    pub fn is_rotation(&self) -> bool {
        self.kind == TaskKind::PlanarRotation
    }

    /// Unit vector of the translation axis in the world frame.
    pub fn axis(&self) -> [f64; 2] {
        let local = match self.kind {
            TaskKind::AnteriorTranslation => [1.0, 0.0],
            _ => [0.0, 1.0],
        };
        rotate(self.start.theta, local)
    }

    /// Point the board pivots about in rotation tasks (the follower edge).
    pub fn pivot(&self, geom: &TableGeometry) -> [f64; 2] {
        let a = rotate(self.start.theta, geom.follower_anchor());
        [self.start.x + a[0], self.start.y + a[1]]
    }

    /// Unsigned progress toward the goal: metres along the axis, or radians.
    pub fn progress(&self, pose: &Planar) -> f64 {
        if self.is_rotation() {
            (pose.theta - self.start.theta) * self.sign()
        } else {
            let a = self.axis();
            ((pose.x - self.start.x) * a[0] + (pose.y - self.start.y) * a[1]) * self.sign()
        }
    }

    /// Goal pose of the board centre.
    pub fn goal(&self, geom: &TableGeometry) -> Planar {
        let s = self.sign() * self.magnitude;
        if self.is_rotation() {
            let p = self.pivot(geom);
            let th = self.start.theta + s;
            let back = rotate(th, [-geom.length / 2.0, 0.0]);
            Planar::new(p[0] + back[0], p[1] + back[1], th)
        } else {
            let a = self.axis();
            Planar::new(
                self.start.x + a[0] * s,
                self.start.y + a[1] * s,
                self.start.theta,
            )
        }
    }
}

/// Shapes of the leader's torque signals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerProfile {
    /// Peak yaw torque for translations, N·m.
    pub tau_z_amplitude: f64,
    /// Peak roll torque, N·m.
    pub tau_x_amplitude: f64,
    /// Smoothstep rise time, s.
    pub rise_time: f64,
    /// Yaw torque reached late in rotations, N·m (below the yaw threshold).
    pub rotation_tau_z_amplitude: f64,
    /// Rotations hold yaw torque at zero this long, s.
    pub rotation_hold: f64,
    /// Time at which the roll torque of rotations starts to diverge, s.
    pub divergence_time: f64,
}

impl Default for TriggerProfile {
    fn default() -> Self {
        TriggerProfile {
            tau_z_amplitude: 4.0,
            tau_x_amplitude: 2.0,
            rise_time: 0.5,
            rotation_tau_z_amplitude: 1.5,
            rotation_hold: 1.0,
            divergence_time: 0.75,
        }
    }
}

impl TriggerProfile {
    pub fn validate(&self, evic: &EvicParams) -> Result<()> {
        ensure_finite(
            &[
                self.tau_z_amplitude,
                self.tau_x_amplitude,
                self.rise_time,
                self.rotation_tau_z_amplitude,
                self.rotation_hold,
                self.divergence_time,
            ],
            "trigger profile",
        )?;
        if self.rise_time <= 0.0 {
            return Err(Error::invalid("trigger rise time must be positive"));
        }
        if self.tau_z_amplitude <= evic.tau_z_threshold
            || self.tau_x_amplitude <= evic.tau_x_threshold
        {
            return Err(Error::invalid(
                "trigger amplitudes must exceed the EVIC thresholds",
            ));
        }
        if self.rotation_tau_z_amplitude.abs() >= evic.tau_z_threshold {
            return Err(Error::invalid(
                "rotation yaw torque must stay below the yaw threshold",
            ));
        }
        if self.rotation_hold < 1.0 {
            return Err(Error::invalid("rotations must hold yaw torque for >= 1 s"));
        }
        Ok(())
    }
}

/// Reference `(tau_z, tau_x)` the leader applies `t` seconds into a task.
pub fn trigger_torques(profile: &TriggerProfile, task: &TaskSpec, t: f64) -> (f64, f64) {
    let sign = task.sign();
    match task.kind {
        TaskKind::LateralTranslation => {
            // left: negative yaw, positive roll
            let s = smoothstep(t / profile.rise_time);
            (
                -sign * profile.tau_z_amplitude * s,
                sign * profile.tau_x_amplitude * s,
            )
        }
        TaskKind::PlanarRotation => {
            let sz = smoothstep((t - profile.rotation_hold) / profile.rise_time);
            let sx = smoothstep((t - profile.divergence_time) / profile.rise_time);
            (
                sign * profile.rotation_tau_z_amplitude * sz,
                sign * profile.tau_x_amplitude * sx,
            )
        }
        TaskKind::AnteriorTranslation => (0.0, 0.0),
    }
}

/// Gains and habits of the synthetic leader.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeaderParams {
    /// Position gain on the board centre, N/m.
    pub kp: f64,
    /// Velocity gain, N·s/m.
    pub kd: f64,
    /// Heading gains, N·m/rad and N·m·s/rad.
    pub kp_theta: f64,
    pub kd_theta: f64,
    /// Constant anterior interaction force, N.
    pub anterior_bias: f64,
    /// Fraction of the board weight carried at the leader handles.
    pub weight_share: f64,
    /// Per-axis handle force limit, N.
    pub saturation: f64,
    pub cruise_speed: f64,
    pub cruise_accel: f64,
    pub angular_speed: f64,
    pub angular_accel: f64,
    /// Delay before the translation reference starts moving, s.
    pub translation_start: f64,
    /// Delay before the rotation reference starts moving, s.
    pub rotation_start: f64,
    /// Time the follower needs to notice a dropped trigger, s.
    pub release_lead: f64,
    /// Signal intent with torque triggers.
    pub triggers: bool,
    /// Steer the heading directly with a yaw torque.
    pub heading_hold: bool,
}

impl Default for LeaderParams {
    fn default() -> Self {
        LeaderParams {
            kp: 60.0,
            kd: 25.0,
            kp_theta: 25.0,
            kd_theta: 10.0,
            anterior_bias: 2.0,
            weight_share: 0.5,
            saturation: 200.0,
            cruise_speed: 0.35,
            cruise_accel: 0.5,
            angular_speed: 0.4,
            angular_accel: 0.6,
            translation_start: 0.5,
            rotation_start: 1.0,
            release_lead: 0.115,
            triggers: true,
            heading_hold: false,
        }
    }
}

impl LeaderParams {
    pub fn validate(&self) -> Result<()> {
        let v = [
            self.kp,
            self.kd,
            self.kp_theta,
            self.kd_theta,
            self.anterior_bias,
            self.weight_share,
            self.saturation,
            self.cruise_speed,
            self.cruise_accel,
            self.angular_speed,
            self.angular_accel,
            self.translation_start,
            self.rotation_start,
            self.release_lead,
        ];
        ensure_finite(&v, "leader parameters")?;
        if [self.kp, self.kd, self.kp_theta, self.kd_theta, self.release_lead]
            .iter()
            .any(|g| *g < 0.0)
        {
            return Err(Error::invalid("leader gains must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.weight_share) {
            return Err(Error::invalid("leader weight share must be in [0, 1]"));
        }
        if [
            self.saturation,
            self.cruise_speed,
            self.cruise_accel,
            self.angular_speed,
            self.angular_accel,
        ]
        .iter()
        .any(|g| *g <= 0.0)
        {
            return Err(Error::invalid(
                "leader saturation, speeds and accelerations must be positive",
            ));
        }
        Ok(())
    }

    /// Remaining distance (or angle) at which the triggers are let go.
    pub fn release_distance(&self, rotation: bool) -> f64 {
        let (v, a) = if rotation {
            (self.angular_speed, self.angular_accel)
        } else {
            (self.cruise_speed, self.cruise_accel)
        };
        v * self.release_lead + v * v / (2.0 * a)
    }
}

/// Leader wrench for one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderOutput {
    pub wrench: HandleWrench,
    /// Requested `(tau_z, tau_x)` about the board centre.
    pub torque_ref: (f64, f64),
    pub saturated: bool,
}

/// Reference progress and its rate along the task, `t` seconds in.
fn task_reference(task: &TaskSpec, params: &LeaderParams, t: f64) -> (f64, f64) {
    let rot = task.is_rotation();
    let t0 = if rot {
        params.rotation_start
    } else {
        params.translation_start
    };
    match task.reference {
        ReferenceShape::MinimumJerk => {
            minimum_jerk_clamped(0.0, task.magnitude, t, t0, t0 + task.duration)
        }
        ReferenceShape::Cruise => {
            let (v, a) = if rot {
                (params.angular_speed, params.angular_accel)
            } else {
                (params.cruise_speed, params.cruise_accel)
            };
            cruise_profile(task.magnitude, v, a, t - t0)
        }
    }
}

/// Splits planar force and the requested torques over the two handles.
///
/// `force` is the table-frame total `(Fx, Fy, Fz)`. The handle couple is
/// chosen so the sensed yaw and roll torques equal `tau_z` and `tau_x`.
pub fn distribute_wrench(
    force: [f64; 3],
    tau_z: f64,
    tau_x: f64,
    geom: &TableGeometry,
) -> HandleWrench {
    let (hl, hw, d) = (geom.length / 2.0, geom.width / 2.0, geom.depth);
    let dx = (tau_z + force[1] * hl) / hw;
    let dz = (tau_x - force[1] * d) / hw;
    HandleWrench {
        left: [
            0.5 * (force[0] - dx),
            0.5 * force[1],
            0.5 * (force[2] + dz),
        ],
        right: [
            0.5 * (force[0] + dx),
            0.5 * force[1],
            0.5 * (force[2] - dz),
        ],
    }
}

/// Handle forces of the synthetic leader.
///
/// The board centre follows the task reference under a PD law, the requested
/// torques (triggers plus optional heading steering) are realized by the
/// handle couple, and the weight share appears in the vertical channels.
pub fn leader_step(
    state: &TableState,
    task: &TaskSpec,
    profile: &TriggerProfile,
    params: &LeaderParams,
    geom: &TableGeometry,
    t: f64,
) -> Result<LeaderOutput> {
    if !(state.pose.is_finite() && state.twist.is_finite() && t.is_finite()) {
        return Err(Error::NonFinite("leader input"));
    }
    let sign = task.sign();
    let (s, s_dot) = task_reference(task, params, t);
    let pose = state.pose;
    let vel = [state.twist.x, state.twist.y];

    let (com_ref, vel_ref, th_ref, w_ref) = if task.is_rotation() {
        let pivot = task.pivot(geom);
        let back = rotate(pose.theta, [-geom.length / 2.0, 0.0]);
        let w = state.twist.theta;
        (
            [pivot[0] + back[0], pivot[1] + back[1]],
            [-w * back[1], w * back[0]],
            task.start.theta + sign * s,
            sign * s_dot,
        )
    } else {
        let a = task.axis();
        (
            [task.start.x + a[0] * sign * s, task.start.y + a[1] * sign * s],
            [a[0] * sign * s_dot, a[1] * sign * s_dot],
            task.start.theta,
            0.0,
        )
    };

    let f_world = [
        params.kp * (com_ref[0] - pose.x) + params.kd * (vel_ref[0] - vel[0]),
        params.kp * (com_ref[1] - pose.y) + params.kd * (vel_ref[1] - vel[1]),
    ];
    let f_body = rotate(-pose.theta, f_world);
    let force = [
        f_body[0] + params.anterior_bias,
        f_body[1],
        params.weight_share * geom.mass * GRAVITY,
    ];

    let tau_heading = if params.heading_hold {
        params.kp_theta * (th_ref - pose.theta) + params.kd_theta * (w_ref - state.twist.theta)
    } else {
        0.0
    };
    let released = task.magnitude - task.progress(&pose) <= params.release_distance(task.is_rotation());
    let (tz_trig, tx_trig) = if params.triggers && !released {
        trigger_torques(profile, task, t)
    } else {
        (0.0, 0.0)
    };
    let tau_z = tz_trig + tau_heading;
    let tau_x = tx_trig;

    let mut wrench = distribute_wrench(force, tau_z, tau_x, geom);
    let saturated = wrench.saturate(params.saturation);
    Ok(LeaderOutput {
        wrench,
        torque_ref: (tau_z, tau_x),
        saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::board_torques;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn minimum_jerk_examples() {
        assert_eq!(minimum_jerk(1.0, 3.0, 2.0, 2.0, 7.0).unwrap(), 1.0);
        assert_eq!(minimum_jerk(1.0, 3.0, 7.0, 2.0, 7.0).unwrap(), 3.0);
        assert_eq!(minimum_jerk(1.0, 3.0, 4.5, 2.0, 7.0).unwrap(), 2.0);
        assert!(minimum_jerk(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(minimum_jerk(0.0, 1.0, 3.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn minimum_jerk_velocity_is_bell_shaped() {
        let n = 1000;
        let v: Vec<f64> = (0..=n)
            .map(|i| minimum_jerk_clamped(0.0, 1.0, i as f64 / n as f64, 0.0, 1.0).1)
            .collect();
        let peak = v
            .iter()
            .enumerate()
            .fold((0, 0.0), |m, (i, x)| if *x > m.1 { (i, *x) } else { m });
        assert_eq!(peak.0, n / 2);
        assert!(v[..=n / 2].windows(2).all(|w| w[1] >= w[0]));
        assert!(v[n / 2..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cruise_profile_shapes() {
        let (p, v) = cruise_profile(2.0, 0.35, 0.5, 100.0);
        assert_eq!((p, v), (2.0, 0.0));
        let (_, v) = cruise_profile(2.0, 0.35, 0.5, 3.0);
        assert_eq!(v, 0.35);
        let (p, v) = cruise_profile(2.0, 0.35, 0.5, 0.7);
        assert_abs_diff_eq!(p, 0.1225, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.35, epsilon = 1e-12);
        // short move never reaches cruise
        let peak = (0..1000)
            .map(|i| cruise_profile(0.05, 0.35, 0.5, i as f64 * 0.002).1)
            .fold(0.0, f64::max);
        assert!(peak < 0.35);
    }

    #[test]
    fn trigger_examples() {
        let p = TriggerProfile::default();
        let left = TaskSpec::lateral(Direction::Left, 2.0);
        assert_eq!(trigger_torques(&p, &left, 0.0), (0.0, 0.0));
        let rot = TaskSpec::rotation(Direction::Ccw, 1.5);
        assert_eq!(trigger_torques(&p, &rot, 0.0), (0.0, 0.0));
        let (z, x) = trigger_torques(&p, &left, p.rise_time);
        assert_eq!((z, x), (-4.0, 2.0));
        let (z, _) = trigger_torques(&p, &rot, 0.5);
        assert!(z.abs() <= 0.2);
        let (z, x) = trigger_torques(&p, &rot, 5.0);
        assert_eq!((z, x), (1.5, 2.0));
        assert!(p.validate(&EvicParams::default()).is_ok());
    }

    #[test]
    fn trigger_signs_match_modes() {
        use crate::controllers::evic_classify;
        let p = TriggerProfile::default();
        let e = EvicParams::default();
        for task in [
            TaskSpec::lateral(Direction::Left, 2.0),
            TaskSpec::lateral(Direction::Right, 2.0),
            TaskSpec::rotation(Direction::Cw, 1.0),
            TaskSpec::rotation(Direction::Ccw, 1.0),
        ] {
            let (z, x) = trigger_torques(&p, &task, 10.0);
            assert_eq!(Some(evic_classify(z, x, &e)), task.trigger_mode(), "{task:?}");
        }
    }

    #[test]
    fn zero_error_gives_zero_wrench() {
        let g = TableGeometry::default();
        let params = LeaderParams {
            anterior_bias: 0.0,
            weight_share: 0.0,
            triggers: false,
            ..Default::default()
        };
        let task = TaskSpec::lateral(Direction::Left, 2.0);
        let out = leader_step(
            &TableState::default(),
            &task,
            &TriggerProfile::default(),
            &params,
            &g,
            0.0,
        )
        .unwrap();
        assert_eq!(out.wrench, HandleWrench::ZERO);
        assert!(!out.saturated);
    }

    #[test]
    fn couple_inverts_yaw_torque() {
        let g = TableGeometry::default();
        let w = distribute_wrench([0.0; 3], -0.59, 0.0, &g);
        assert_abs_diff_eq!(w.left[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.right[0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn saturation_is_flagged() {
        let g = TableGeometry::default();
        let task = TaskSpec::lateral(Direction::Left, 2.0);
        let mut far = TableState::default();
        far.pose.y = -10.0;
        let out = leader_step(
            &far,
            &task,
            &TriggerProfile::default(),
            &LeaderParams::default(),
            &g,
            1.0,
        )
        .unwrap();
        assert!(out.saturated);
        assert!(out.wrench.left.iter().chain(&out.wrench.right).all(|v| v.abs() <= 200.0));
    }

    #[test]
    fn triggers_release_near_goal() {
        let g = TableGeometry::default();
        let task = TaskSpec::lateral(Direction::Left, 2.0);
        let params = LeaderParams::default();
        let mut s = TableState::default();
        s.pose.y = 2.0 - params.release_distance(false) - 0.01;
        let on = leader_step(&s, &task, &TriggerProfile::default(), &params, &g, 3.0).unwrap();
        assert_eq!(on.torque_ref, (-4.0, 2.0));
        s.pose.y += 0.02;
        let off = leader_step(&s, &task, &TriggerProfile::default(), &params, &g, 3.0).unwrap();
        assert_eq!(off.torque_ref, (0.0, 0.0));
    }

    #[test]
    fn task_geometry() {
        let g = TableGeometry::default();
        let rot = TaskSpec::rotation(Direction::Ccw, std::f64::consts::PI);
        let goal = rot.goal(&g);
        assert_abs_diff_eq!(goal.x, g.length, epsilon = 1e-12);
        assert_abs_diff_eq!(goal.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rot.progress(&goal), std::f64::consts::PI, epsilon = 1e-12);
        let right = TaskSpec::lateral(Direction::Right, 1.0);
        assert_abs_diff_eq!(right.goal(&g).y, -1.0);
        assert_abs_diff_eq!(right.progress(&right.goal(&g)), 1.0);
        let bad = TaskSpec {
            direction: Direction::Cw,
            ..TaskSpec::lateral(Direction::Left, 1.0)
        };
        assert!(bad.validate().is_err());
    }

    fn arb_state() -> impl Strategy<Value = TableState> {
        (prop::array::uniform3(-2.0f64..2.0), prop::array::uniform3(-0.5f64..0.5)).prop_map(
            |(p, v)| TableState {
                pose: Planar::from_array(p),
                twist: Planar::from_array(v),
                ..Default::default()
            },
        )
    }

    proptest! {
        #[test]
        fn minimum_jerk_endpoint_derivatives(x0 in -5.0f64..5.0, dx in 0.1f64..5.0, dur in 0.5f64..10.0) {
            let xf = x0 + dx;
            let pos = |t: f64| minimum_jerk(x0, xf, t, 0.0, dur).unwrap();
            let vel = |t: f64| minimum_jerk_clamped(x0, xf, t, 0.0, dur).1;
            let peak_v = 1.875 * dx / dur;
            let peak_a = 10.0 / 3f64.sqrt() * dx / (dur * dur);
            // position differences for velocity, velocity differences for acceleration
            let hv = dur * 1e-4;
            let ha = dur * 1e-8;
            let v0 = (pos(hv) - pos(0.0)) / hv;
            let vf = (pos(dur) - pos(dur - hv)) / hv;
            let a0 = (vel(ha) - vel(0.0)) / ha;
            let af = (vel(dur) - vel(dur - ha)) / ha;
            prop_assert!(v0.abs() < 1e-6 * peak_v, "v0 {}", v0);
            prop_assert!(vf.abs() < 1e-6 * peak_v, "vf {}", vf);
            prop_assert!(a0.abs() < 1e-6 * peak_a, "a0 {}", a0);
            prop_assert!(af.abs() < 1e-6 * peak_a, "af {}", af);
        }

        #[test]
        fn wrench_tracks_torque_refs(state in arb_state(), t in 0.0f64..6.0, rot in any::<bool>(), heading in any::<bool>()) {
            let g = TableGeometry::default();
            let task = if rot {
                TaskSpec::rotation(Direction::Ccw, 1.5)
            } else {
                TaskSpec::lateral(Direction::Left, 2.0)
            };
            let params = LeaderParams { heading_hold: heading, saturation: 1e9, ..Default::default() };
            let out = leader_step(&state, &task, &TriggerProfile::default(), &params, &g, t).unwrap();
            let tau = board_torques(&out.wrench, &g).unwrap();
            prop_assert!((tau[2] - out.torque_ref.0).abs() <= 1e-9 * (1.0 + out.torque_ref.0.abs()));
            prop_assert!((tau[0] - out.torque_ref.1).abs() <= 1e-9 * (1.0 + out.torque_ref.1.abs()));
        }
    }
}
