//! Planar rigid-body model of the carried board.
//!
//! The board moves in the horizontal plane only (x anterior, y lateral/left,
//! yaw about the superior z axis). Vertical handle forces never move it; they
//! exist so the sensed roll/pitch torques carry the leader's signals.
//!
//! Frame conventions: the table frame sits at the geometric centre of the
//! board. The leader's two sensed handles are at `(-l/2, ±w/2, -d)` (left
//! handle at `+w/2`) and the follower grasps the opposite edge at `x = +l/2`.
//! With this layout the sensed-torque formula in [`board_torques`] is the exact
//! moment of the handle forces about the centre of mass.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Planar triple: `(x, y, theta)` for poses, `(vx, vy, wz)` for twists and
/// `(ax, ay, alpha_z)` for accelerations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Planar {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Planar {
    pub const ZERO: Planar = Planar {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Planar { x, y, theta }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Planar::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn component(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.theta,
        }
    }
}

/// Rotates a planar vector by `angle`.
#[inline]
pub fn rotate(angle: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Cross product of two planar vectors (z component).
#[inline]
pub fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Board dimensions and mass properties.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableGeometry {
    /// kg
    pub mass: f64,
    /// Long edge, m.
    pub length: f64,
    /// Short edge, m.
    pub width: f64,
    /// Thickness, m.
    pub depth: f64,
}

impl Default for TableGeometry {
    fn default() -> Self {
        TableGeometry {
            mass: 10.3,
            length: 1.22,
            width: 0.59,
            depth: 0.02,
        }
    }
}

/// Which of the two handles (or grasp points).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl TableGeometry {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            &[self.mass, self.length, self.width, self.depth],
            "table geometry",
        )?;
        if self.mass <= 0.0 {
            return Err(Error::invalid("table mass must be positive"));
        }
        if !(self.length > self.width && self.width > self.depth && self.depth > 0.0) {
            return Err(Error::invalid("table dimensions must satisfy l > w > d > 0"));
        }
        Ok(())
    }

    pub fn ixx(&self) -> f64 {
        self.mass * (self.width.powi(2) + self.depth.powi(2)) / 12.0
    }

    pub fn iyy(&self) -> f64 {
        self.mass * (self.length.powi(2) + self.depth.powi(2)) / 12.0
    }

    pub fn izz(&self) -> f64 {
        self.mass * (self.length.powi(2) + self.width.powi(2)) / 12.0
    }

    pub fn weight(&self) -> f64 {
        self.mass * GRAVITY
    }

    /// Leader handle position in the table frame.
    pub fn leader_handle(&self, side: Side) -> [f64; 3] {
        let y = match side {
            Side::Left => self.width / 2.0,
            Side::Right => -self.width / 2.0,
        };
        [-self.length / 2.0, y, -self.depth]
    }

    /// Follower grasp position in the table frame.
    pub fn grasp_point(&self, side: Side) -> [f64; 2] {
        let y = match side {
            Side::Left => self.width / 2.0,
            Side::Right => -self.width / 2.0,
        };
        [self.length / 2.0, y]
    }

    /// Midpoint of the follower grasps; the follower base frame is anchored here.
    pub fn follower_anchor(&self) -> [f64; 2] {
        [self.length / 2.0, 0.0]
    }
}

/// Board pose, twist and acceleration in the world frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableState {
    pub t: f64,
    pub pose: Planar,
    pub twist: Planar,
    pub accel: Planar,
}

impl TableState {
    pub fn at_rest(pose: Planar) -> Self {
        TableState {
            pose,
            ..Default::default()
        }
    }

    /// Twist expressed in the table frame.
    pub fn body_twist(&self) -> Planar {
        let v = rotate(-self.pose.theta, [self.twist.x, self.twist.y]);
        Planar::new(v[0], v[1], self.twist.theta)
    }

    /// Acceleration expressed in the table frame.
    pub fn body_accel(&self) -> Planar {
        let a = rotate(-self.pose.theta, [self.accel.x, self.accel.y]);
        Planar::new(a[0], a[1], self.accel.theta)
    }
}

/// Forces at the two leader handles, table frame, N.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HandleWrench {
    pub left: [f64; 3],
    pub right: [f64; 3],
}

impl HandleWrench {
    pub const ZERO: HandleWrench = HandleWrench {
        left: [0.0; 3],
        right: [0.0; 3],
    };

    pub fn is_finite(&self) -> bool {
        self.left.iter().chain(&self.right).all(|v| v.is_finite())
    }

    /// Total force in the table frame.
    pub fn total(&self) -> [f64; 3] {
        [
            self.left[0] + self.right[0],
            self.left[1] + self.right[1],
            self.left[2] + self.right[2],
        ]
    }

    pub fn scale(&self, k: f64) -> HandleWrench {
        HandleWrench {
            left: self.left.map(|v| v * k),
            right: self.right.map(|v| v * k),
        }
    }

    pub fn add(&self, other: &HandleWrench) -> HandleWrench {
        let mut out = *self;
        for i in 0..3 {
            out.left[i] += other.left[i];
            out.right[i] += other.right[i];
        }
        out
    }

    /// Clamps every component to `[-limit, limit]`; returns whether anything was clipped.
    pub fn saturate(&mut self, limit: f64) -> bool {
        let mut hit = false;
        for v in self.left.iter_mut().chain(self.right.iter_mut()) {
            if v.abs() > limit {
                *v = v.clamp(-limit, limit);
                hit = true;
            }
        }
        hit
    }
}

/// Planar spring-damper between the follower base and the board's follower edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspCompliance {
    /// (kx, ky, ktheta) in N/m, N/m, N·m/rad, base frame axes.
    pub stiffness: Planar,
    /// (bx, by, btheta) in N·s/m, N·s/m, N·m·s/rad.
    pub damping: Planar,
    /// Follower base pose, world frame.
    pub base_pose: Planar,
    /// Follower base twist, world frame.
    pub base_twist: Planar,
}

impl GraspCompliance {
    /// No coupling at all: the board is free.
    pub fn free() -> Self {
        GraspCompliance {
            stiffness: Planar::ZERO,
            damping: Planar::ZERO,
            base_pose: Planar::ZERO,
            base_twist: Planar::ZERO,
        }
    }

    /// Critically damped grasp for the given stiffness.
    pub fn critically_damped(stiffness: Planar, geom: &TableGeometry) -> Self {
        let damping = Planar::new(
            2.0 * (stiffness.x * geom.mass).sqrt(),
            2.0 * (stiffness.y * geom.mass).sqrt(),
            2.0 * (stiffness.theta * geom.izz()).sqrt(),
        );
        GraspCompliance {
            stiffness,
            damping,
            base_pose: Planar::ZERO,
            base_twist: Planar::ZERO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gains = [
            self.stiffness.x,
            self.stiffness.y,
            self.stiffness.theta,
            self.damping.x,
            self.damping.y,
            self.damping.theta,
        ];
        ensure_finite(&gains, "grasp compliance")?;
        if gains.iter().any(|g| *g < 0.0) {
            return Err(Error::invalid("grasp stiffness and damping must be >= 0"));
        }
        Ok(())
    }

    /// Force (world frame) and yaw torque about the board centre exerted by the grasp.
    pub fn wrench_on(&self, state: &TableState, geom: &TableGeometry) -> ([f64; 2], f64) {
        let arm = rotate(state.pose.theta, geom.follower_anchor());
        let edge = [state.pose.x + arm[0], state.pose.y + arm[1]];
        let edge_vel = [
            state.twist.x - state.twist.theta * arm[1],
            state.twist.y + state.twist.theta * arm[0],
        ];
        let th_b = self.base_pose.theta;
        let err = rotate(
            -th_b,
            [self.base_pose.x - edge[0], self.base_pose.y - edge[1]],
        );
        let err_rate = rotate(
            -th_b,
            [
                self.base_twist.x - edge_vel[0],
                self.base_twist.y - edge_vel[1],
            ],
        );
        let local = [
            self.stiffness.x * err[0] + self.damping.x * err_rate[0],
            self.stiffness.y * err[1] + self.damping.y * err_rate[1],
        ];
        let force = rotate(th_b, local);
        let torque = self.stiffness.theta * (self.base_pose.theta - state.pose.theta)
            + self.damping.theta * (self.base_twist.theta - state.twist.theta)
            + cross2(arm, force);
        (force, torque)
    }
}

/// Sensed torque about the board centre from the two handle forces.
///
/// Returns `(tau_x, tau_y, tau_z)`:
/// `tau_x = (Fl_z - Fr_z) w/2 + (Fr_y + Fl_y) d`,
/// `tau_y = (Fr_z + Fl_z) l/2 - (Fr_x + Fl_x) d`,
/// `tau_z = (Fr_x - Fl_x) w/2 - (Fr_y + Fl_y) l/2`.
pub fn board_torques(wrench: &HandleWrench, geom: &TableGeometry) -> Result<[f64; 3]> {
    if !wrench.is_finite() {
        return Err(Error::NonFinite("handle wrench"));
    }
    let (l, r) = (wrench.left, wrench.right);
    let (hl, hw, d) = (geom.length / 2.0, geom.width / 2.0, geom.depth);
    Ok([
        (l[2] - r[2]) * hw + (r[1] + l[1]) * d,
        (r[2] + l[2]) * hl - (r[0] + l[0]) * d,
        (r[0] - l[0]) * hw - (r[1] + l[1]) * hl,
    ])
}

/// Torque required to produce the board's angular motion (Euler's equations,
/// principal axes). `omega` and `alpha` are body-frame angular rates.
pub fn external_torque(omega: [f64; 3], alpha: [f64; 3], geom: &TableGeometry) -> [f64; 3] {
    let (ixx, iyy, izz) = (geom.ixx(), geom.iyy(), geom.izz());
    [
        ixx * alpha[0] - (iyy - izz) * omega[1] * omega[2],
        iyy * alpha[1] - (izz - ixx) * omega[0] * omega[2],
        izz * alpha[2] - (ixx - iyy) * omega[0] * omega[1],
    ]
}

/// Planar form of [`external_torque`] for a board state.
pub fn external_torque_planar(state: &TableState, geom: &TableGeometry) -> [f64; 3] {
    external_torque(
        [0.0, 0.0, state.twist.theta],
        [0.0, 0.0, state.accel.theta],
        geom,
    )
}

/// Planar force (world frame) and yaw torque the leader's handle forces
/// exert on the board, computed from the handle lever arms.
pub fn leader_planar_load(
    wrench: &HandleWrench,
    pose: &Planar,
    geom: &TableGeometry,
) -> ([f64; 2], f64) {
    let mut torque = 0.0;
    for (side, f) in [(Side::Left, wrench.left), (Side::Right, wrench.right)] {
        let r = geom.leader_handle(side);
        torque += cross2([r[0], r[1]], [f[0], f[1]]);
    }
    let total = wrench.total();
    (rotate(pose.theta, [total[0], total[1]]), torque)
}

/// Advances the board one semi-implicit Euler step.
///
/// Acceleration is computed from the leader and grasp loads at the current
/// state, then velocity is updated, then pose from the new velocity.
pub fn step(
    state: &TableState,
    leader: &HandleWrench,
    grasp: &GraspCompliance,
    geom: &TableGeometry,
    dt: f64,
) -> Result<TableState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if !leader.is_finite() {
        return Err(Error::NonFinite("leader wrench"));
    }
    let (f_leader, tau_leader) = leader_planar_load(leader, &state.pose, geom);
    let (f_grasp, tau_grasp) = grasp.wrench_on(state, geom);

    let accel = Planar::new(
        (f_leader[0] + f_grasp[0]) / geom.mass,
        (f_leader[1] + f_grasp[1]) / geom.mass,
        (tau_leader + tau_grasp) / geom.izz(),
    );
    let twist = Planar::new(
        state.twist.x + accel.x * dt,
        state.twist.y + accel.y * dt,
        state.twist.theta + accel.theta * dt,
    );
    let pose = Planar::new(
        state.pose.x + twist.x * dt,
        state.pose.y + twist.y * dt,
        state.pose.theta + twist.theta * dt,
    );
    let next = TableState {
        t: state.t + dt,
        pose,
        twist,
        accel,
    };
    if !(next.pose.is_finite() && next.twist.is_finite()) {
        return Err(Error::NonFinite("table state"));
    }
    Ok(next)
}

/// Board plus the kinematic follower base it is grasped by.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub geometry: TableGeometry,
    pub grasp: GraspCompliance,
    pub board: TableState,
    pub dt: f64,
}

impl Simulation {
    /// Board at rest at `pose`, base anchored on the follower edge.
    pub fn new(geometry: TableGeometry, grasp: GraspCompliance, pose: Planar, dt: f64) -> Self {
        let mut grasp = grasp;
        let anchor = rotate(pose.theta, geometry.follower_anchor());
        grasp.base_pose = Planar::new(pose.x + anchor[0], pose.y + anchor[1], pose.theta);
        grasp.base_twist = Planar::ZERO;
        Simulation {
            geometry,
            grasp,
            board: TableState::at_rest(pose),
            dt,
        }
    }

    /// Steps the board under the leader wrench, then moves the base with the
    /// commanded robot-frame twist.
    pub fn advance(&mut self, leader: &HandleWrench, base_command: Planar) -> Result<&TableState> {
        self.board = step(&self.board, leader, &self.grasp, &self.geometry, self.dt)?;
        let th = self.grasp.base_pose.theta;
        let v = rotate(th, [base_command.x, base_command.y]);
        self.grasp.base_twist = Planar::new(v[0], v[1], base_command.theta);
        self.grasp.base_pose.x += v[0] * self.dt;
        self.grasp.base_pose.y += v[1] * self.dt;
        self.grasp.base_pose.theta += base_command.theta * self.dt;
        Ok(&self.board)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geom() -> TableGeometry {
        TableGeometry::default()
    }

    #[test]
    fn inertia_matches_prism() {
        let g = geom();
        assert_abs_diff_eq!(g.izz(), 10.3 * (1.22f64.powi(2) + 0.59f64.powi(2)) / 12.0);
        assert_abs_diff_eq!(g.izz(), 1.5763, epsilon = 1e-4);
        assert!(g.validate().is_ok());
        let bad = TableGeometry {
            width: 1.5,
            ..g
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn torque_examples() {
        let g = geom();
        assert_eq!(board_torques(&HandleWrench::ZERO, &g).unwrap(), [0.0; 3]);

        let w = HandleWrench {
            left: [1.0, 0.0, 0.0],
            right: [-1.0, 0.0, 0.0],
        };
        assert_abs_diff_eq!(board_torques(&w, &g).unwrap()[2], -0.59, epsilon = 1e-12);

        let w = HandleWrench {
            left: [0.0, 0.0, 2.0],
            right: [0.0; 3],
        };
        assert_abs_diff_eq!(board_torques(&w, &g).unwrap()[0], 0.59, epsilon = 1e-12);

        let w = HandleWrench {
            left: [f64::NAN, 0.0, 0.0],
            right: [0.0; 3],
        };
        assert!(board_torques(&w, &g).is_err());
    }

    #[test]
    fn external_torque_examples() {
        let g = geom();
        assert_eq!(external_torque([0.0; 3], [0.0; 3], &g), [0.0; 3]);
        let t = external_torque([0.0; 3], [0.0, 0.0, 1.0], &g);
        assert_abs_diff_eq!(t[2], 1.576, epsilon = 1e-3);
        let t = external_torque([0.0, 0.0, 3.7], [0.5, 0.0, 0.0], &g);
        assert_abs_diff_eq!(t[0], g.ixx() * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn step_examples() {
        let g = geom();
        let s0 = TableState::default();
        let free = GraspCompliance::free();
        let s1 = step(&s0, &HandleWrench::ZERO, &free, &g, 0.002).unwrap();
        assert_eq!(s1.pose, s0.pose);
        assert_eq!(s1.twist, s0.twist);
        assert_abs_diff_eq!(s1.t, 0.002);

        let push = HandleWrench {
            left: [5.15, 0.0, 0.0],
            right: [5.15, 0.0, 0.0],
        };
        let s1 = step(&s0, &push, &free, &g, 0.002).unwrap();
        assert_abs_diff_eq!(s1.twist.x, 0.002, epsilon = 1e-15);
        assert_abs_diff_eq!(s1.twist.y, 0.0);

        // Pure couple of Izz N·m via opposing anterior forces.
        let f = g.izz() / g.width;
        let twist = HandleWrench {
            left: [-f, 0.0, 0.0],
            right: [f, 0.0, 0.0],
        };
        assert_abs_diff_eq!(board_torques(&twist, &g).unwrap()[2], g.izz(), epsilon = 1e-12);
        let s1 = step(&s0, &twist, &free, &g, 0.002).unwrap();
        assert_abs_diff_eq!(s1.twist.theta, 0.002, epsilon = 1e-15);

        assert!(step(&s0, &HandleWrench::ZERO, &free, &g, 0.0).is_err());
        assert!(step(&s0, &HandleWrench::ZERO, &free, &g, -1.0).is_err());
    }

    #[test]
    fn vertical_forces_do_not_move_board() {
        let g = geom();
        let lift = HandleWrench {
            left: [0.0, 0.0, 40.0],
            right: [0.0, 0.0, 10.0],
        };
        let s1 = step(&TableState::default(), &lift, &GraspCompliance::free(), &g, 0.002).unwrap();
        assert_eq!(s1.twist, Planar::ZERO);
        assert!(board_torques(&lift, &g).unwrap()[0] != 0.0);
    }

    #[test]
    fn constant_force_velocity() {
        let g = geom();
        let f = 1.0;
        let w = HandleWrench {
            left: [0.5 * f, 0.0, 0.0],
            right: [0.5 * f, 0.0, 0.0],
        };
        let mut s = TableState::default();
        let dt = 0.002;
        for _ in 0..5000 {
            s = step(&s, &w, &GraspCompliance::free(), &g, dt).unwrap();
        }
        assert_abs_diff_eq!(s.accel.x, 1.0 / 10.3, epsilon = 1e-12);
        assert!((s.twist.x - f / g.mass * 10.0).abs() <= f / g.mass * dt);
    }

    #[test]
    fn grasp_restores_offset() {
        let g = geom();
        let grasp = GraspCompliance::critically_damped(Planar::new(300.0, 300.0, 60.0), &g);
        let mut sim = Simulation::new(g, grasp, Planar::ZERO, 0.002);
        sim.board.pose.y = 0.05;
        for _ in 0..5000 {
            sim.advance(&HandleWrench::ZERO, Planar::ZERO).unwrap();
        }
        assert!(sim.board.pose.y.abs() < 1e-4, "y = {}", sim.board.pose.y);
        assert!(sim.board.pose.theta.abs() < 1e-4);
    }

    #[test]
    fn base_carries_board() {
        let g = geom();
        let grasp = GraspCompliance::critically_damped(Planar::new(300.0, 300.0, 60.0), &g);
        let mut sim = Simulation::new(g, grasp, Planar::ZERO, 0.002);
        for _ in 0..5000 {
            sim.advance(&HandleWrench::ZERO, Planar::new(0.0, 0.2, 0.0)).unwrap();
        }
        assert_abs_diff_eq!(sim.board.twist.y, 0.2, epsilon = 1e-3);
    }

    fn arb_wrench() -> impl Strategy<Value = HandleWrench> {
        prop::array::uniform6(-200.0f64..200.0).prop_map(|a| HandleWrench {
            left: [a[0], a[1], a[2]],
            right: [a[3], a[4], a[5]],
        })
    }

    proptest! {
        #[test]
        fn torques_are_linear(w1 in arb_wrench(), w2 in arb_wrench(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = geom();
            let combo = w1.scale(a).add(&w2.scale(b));
            let lhs = board_torques(&combo, &g).unwrap();
            let t1 = board_torques(&w1, &g).unwrap();
            let t2 = board_torques(&w2, &g).unwrap();
            for i in 0..3 {
                let rhs = a * t1[i] + b * t2[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn sensed_yaw_torque_is_physical_moment(w in arb_wrench(), th in -3.0f64..3.0) {
            let g = geom();
            let (_, tau) = leader_planar_load(&w, &Planar::new(0.0, 0.0, th), &g);
            let sensed = board_torques(&w, &g).unwrap()[2];
            prop_assert!((tau - sensed).abs() <= 1e-9 * (1.0 + tau.abs()));
        }

        #[test]
        fn stepping_is_deterministic(w in arb_wrench(), vy in -1.0f64..1.0) {
            let g = geom();
            let grasp = GraspCompliance::critically_damped(Planar::new(300.0, 300.0, 60.0), &g);
            let run = || {
                let mut sim = Simulation::new(g, grasp, Planar::ZERO, 0.002);
                for _ in 0..200 {
                    sim.advance(&w.scale(0.1), Planar::new(0.0, vy, 0.0)).unwrap();
                }
                sim.board
            };
            let (a, b) = (run(), run());
            prop_assert_eq!(a.pose.x.to_bits(), b.pose.x.to_bits());
            prop_assert_eq!(a.pose.y.to_bits(), b.pose.y.to_bits());
            prop_assert_eq!(a.pose.theta.to_bits(), b.pose.theta.to_bits());
        }
    }
}
