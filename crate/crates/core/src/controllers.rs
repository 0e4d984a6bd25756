//! Follower control laws: variable impedance (BMVIC), the torque-triggered
//! extension (EVIC) and the motion mapping used by prediction control (NNPC).

use serde::{Deserialize, Serialize};

use crate::dynamics::Planar;
use crate::error::{ensure_finite, Error, Result};

/// Virtual admittance parameters for the translational and rotational axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VicParams {
    pub m: f64,
    pub c: f64,
    pub alpha: f64,
    pub inertia: f64,
    pub b: f64,
    pub beta: f64,
}

impl Default for VicParams {
    fn default() -> Self {
        VicParams {
            m: 1.2,
            c: 0.6,
            alpha: 0.2,
            inertia: 0.12,
            b: 0.6,
            beta: 0.2,
        }
    }
}

/// One axis of [`VicParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisVic {
    pub mass: f64,
    pub damping: f64,
    pub rate_weight: f64,
}

impl VicParams {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            &[self.m, self.c, self.alpha, self.inertia, self.b, self.beta],
            "VIC parameters",
        )?;
        if !(self.m > 0.0 && self.inertia > 0.0 && self.c > 0.0 && self.b > 0.0) {
            return Err(Error::invalid("VIC mass, inertia and damping must be positive"));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::invalid("VIC rate weights must be non-negative"));
        }
        Ok(())
    }

    pub fn translational(&self) -> AxisVic {
        AxisVic {
            mass: self.m,
            damping: self.c,
            rate_weight: self.alpha,
        }
    }

    pub fn rotational(&self) -> AxisVic {
        AxisVic {
            mass: self.inertia,
            damping: self.b,
            rate_weight: self.beta,
        }
    }
}

/// EVIC trigger thresholds, target speeds and acceleration limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvicParams {
    pub tau_z_threshold: f64,
    pub tau_x_threshold: f64,
    pub lateral_speed: f64,
    pub rotation_speed: f64,
    pub linear_accel_limit: f64,
    pub angular_accel_limit: f64,
    /// A new classification must persist this long before it is adopted, s.
    pub debounce: f64,
}

impl Default for EvicParams {
    fn default() -> Self {
        EvicParams {
            tau_z_threshold: 3.0,
            tau_x_threshold: 1.5,
            lateral_speed: 0.35,
            rotation_speed: 0.4,
            linear_accel_limit: 0.5,
            angular_accel_limit: 0.6,
            debounce: 0.1,
        }
    }
}

impl EvicParams {
    pub fn validate(&self) -> Result<()> {
        let v = [
            self.tau_z_threshold,
            self.tau_x_threshold,
            self.lateral_speed,
            self.rotation_speed,
            self.linear_accel_limit,
            self.angular_accel_limit,
        ];
        ensure_finite(&v, "EVIC parameters")?;
        if v.iter().any(|x| *x <= 0.0) {
            return Err(Error::invalid(
                "EVIC thresholds, speeds and limits must be positive",
            ));
        }
        if !(self.debounce >= 0.0 && self.debounce.is_finite()) {
            return Err(Error::invalid("EVIC debounce must be >= 0"));
        }
        Ok(())
    }
}

/// Per-axis command bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Vmax {
    pub anterior: f64,
    pub lateral: f64,
    pub angular: f64,
}

impl Default for Vmax {
    fn default() -> Self {
        Vmax {
            anterior: 0.5,
            lateral: 0.45,
            angular: 0.5,
        }
    }
}

impl Vmax {
    pub fn validate(&self) -> Result<()> {
        let v = [self.anterior, self.lateral, self.angular];
        ensure_finite(&v, "vmax")?;
        if v.iter().any(|x| *x <= 0.0) {
            return Err(Error::invalid("vmax must be positive on every axis"));
        }
        Ok(())
    }

    pub fn clamp(&self, t: Planar) -> Planar {
        Planar::new(
            t.x.clamp(-self.anterior, self.anterior),
            t.y.clamp(-self.lateral, self.lateral),
            t.theta.clamp(-self.angular, self.angular),
        )
    }

    pub fn contains(&self, t: &Planar) -> bool {
        t.x.abs() <= self.anterior && t.y.abs() <= self.lateral && t.theta.abs() <= self.angular
    }
}

/// Which follower law drives the base.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Bmvic,
    Evic,
    Nnpc,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::Bmvic, ControllerKind::Evic, ControllerKind::Nnpc];

    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Bmvic => "bmvic",
            ControllerKind::Evic => "evic",
            ControllerKind::Nnpc => "nnpc",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bmvic" => Ok(ControllerKind::Bmvic),
            "evic" => Ok(ControllerKind::Evic),
            "nnpc" => Ok(ControllerKind::Nnpc),
            other => Err(Error::invalid(format!("unknown controller '{other}'"))),
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Controller mode reported with every command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    LeftTranslation,
    RightTranslation,
    LeftRotation,
    RightRotation,
    Stop,
    Anterior,
    Bmvic,
    Nnpc,
}

impl Mode {
    pub const TRIGGERS: [Mode; 5] = [
        Mode::LeftTranslation,
        Mode::RightRotation,
        Mode::LeftRotation,
        Mode::RightTranslation,
        Mode::Stop,
    ];
}

/// Desired planar twist of the follower base, robot frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub twist: Planar,
    pub mode: Mode,
}

impl ControlCommand {
    pub fn stop() -> Self {
        ControlCommand {
            twist: Planar::ZERO,
            mode: Mode::Stop,
        }
    }
}

/// One explicit-Euler step of the variable impedance law
/// `p̈ = (F - c·ṗ + α·Ḟ·ṗ) / m`. Returns the new velocity.
pub fn bmvic_step(force: f64, force_rate: f64, vel: f64, p: &AxisVic, dt: f64) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    ensure_finite(&[force, force_rate, vel], "admittance input")?;
    let acc = (force - p.damping * vel + p.rate_weight * force_rate * vel) / p.mass;
    Ok(vel + acc * dt)
}

/// Torque-threshold decision rule of EVIC.
pub fn evic_classify(tau_z: f64, tau_x: f64, p: &EvicParams) -> Mode {
    let (tz, tx) = (p.tau_z_threshold, p.tau_x_threshold);
    if tau_z <= -tz && tau_x >= tx {
        Mode::LeftTranslation
    } else if tau_z.abs() <= tz && tau_x >= tx {
        Mode::RightRotation
    } else if tau_z.abs() <= tz && tau_x <= -tx {
        Mode::LeftRotation
    } else if tau_z >= tz && tau_x <= -tx {
        Mode::RightTranslation
    } else {
        Mode::Stop
    }
}

/// Signed `(vy, wz)` target of a trigger mode. Left is `+y`; right
/// (counter-clockwise) rotation is `+wz`.
pub fn mode_target(mode: Mode, p: &EvicParams) -> (f64, f64) {
    match mode {
        Mode::LeftTranslation => (p.lateral_speed, 0.0),
        Mode::RightTranslation => (-p.lateral_speed, 0.0),
        Mode::RightRotation => (0.0, p.rotation_speed),
        Mode::LeftRotation => (0.0, -p.rotation_speed),
        _ => (0.0, 0.0),
    }
}

fn ramp(from: f64, to: f64, max_delta: f64) -> f64 {
    from + (to - from).clamp(-max_delta, max_delta)
}

/// Force and torque inputs EVIC and BMVIC consume.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WrenchInput {
    /// Anterior force and its rate.
    pub fx: f64,
    pub fx_rate: f64,
    /// Lateral force and its rate.
    pub fy: f64,
    pub fy_rate: f64,
    /// Yaw torque and its rate.
    pub tau_z: f64,
    pub tau_z_rate: f64,
    /// Roll torque.
    pub tau_x: f64,
}

impl WrenchInput {
    fn is_finite(&self) -> bool {
        [
            self.fx,
            self.fx_rate,
            self.fy,
            self.fy_rate,
            self.tau_z,
            self.tau_z_rate,
            self.tau_x,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// One EVIC step for an already-classified `mode`.
///
/// `vx` follows the anterior admittance, `(vy, wz)` ramp toward the mode's
/// target at the acceleration limits. Every axis is rate limited and clamped.
pub fn evic_step(
    mode: Mode,
    input: &WrenchInput,
    current: Planar,
    params: &EvicParams,
    vic: &VicParams,
    vmax: &Vmax,
    dt: f64,
) -> Result<ControlCommand> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if !input.is_finite() || !current.is_finite() {
        return Ok(ControlCommand::stop());
    }
    let dv = params.linear_accel_limit * dt;
    let dw = params.angular_accel_limit * dt;
    let vx_free = bmvic_step(input.fx, input.fx_rate, current.x, &vic.translational(), dt)?;
    let vx = ramp(current.x, vx_free, dv).clamp(-vmax.anterior, vmax.anterior);
    let (vy_t, wz_t) = mode_target(mode, params);
    let vy = ramp(current.y, vy_t, dv).clamp(-vmax.lateral, vmax.lateral);
    let wz = ramp(current.theta, wz_t, dw).clamp(-vmax.angular, vmax.angular);
    let tag = if mode == Mode::Stop && vx.abs() > 1e-3 {
        Mode::Anterior
    } else {
        mode
    };
    Ok(ControlCommand {
        twist: Planar::new(vx, vy, wz),
        mode: tag,
    })
}

/// EVIC with its debounced mode state.
#[derive(Clone, Debug, PartialEq)]
pub struct Evic {
    pub params: EvicParams,
    pub vic: VicParams,
    pub vmax: Vmax,
    twist: Planar,
    mode: Mode,
    candidate: Mode,
    held: f64,
}

impl Evic {
    pub fn new(params: EvicParams, vic: VicParams, vmax: Vmax) -> Self {
        Evic {
            params,
            vic,
            vmax,
            twist: Planar::ZERO,
            mode: Mode::Stop,
            candidate: Mode::Stop,
            held: 0.0,
        }
    }

    /// Debounced trigger mode.
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn twist(&self) -> Planar {
        self.twist
    }

    fn debounce(&mut self, raw: Mode, dt: f64) {
        if raw == self.mode {
            self.candidate = raw;
            self.held = 0.0;
            return;
        }
        if raw == self.candidate {
            self.held += dt;
        } else {
            self.candidate = raw;
            self.held = dt;
        }
        if self.held + 1e-12 >= self.params.debounce {
            self.mode = raw;
            self.held = 0.0;
        }
    }

    pub fn step(&mut self, input: &WrenchInput, dt: f64) -> Result<ControlCommand> {
        if !input.is_finite() {
            self.twist = Planar::ZERO;
            return Ok(ControlCommand::stop());
        }
        let raw = evic_classify(input.tau_z, input.tau_x, &self.params);
        self.debounce(raw, dt);
        let cmd = evic_step(
            self.mode,
            input,
            self.twist,
            &self.params,
            &self.vic,
            &self.vmax,
            dt,
        )?;
        self.twist = cmd.twist;
        Ok(cmd)
    }
}

/// BMVIC: the admittance law on the anterior, lateral and yaw axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Bmvic {
    pub vic: VicParams,
    pub vmax: Vmax,
    twist: Planar,
}

impl Bmvic {
    pub fn new(vic: VicParams, vmax: Vmax) -> Self {
        Bmvic {
            vic,
            vmax,
            twist: Planar::ZERO,
        }
    }

    pub fn step(&mut self, input: &WrenchInput, dt: f64) -> Result<ControlCommand> {
        if !input.is_finite() {
            self.twist = Planar::ZERO;
            return Ok(ControlCommand::stop());
        }
        let lin = self.vic.translational();
        let rot = self.vic.rotational();
        let t = Planar::new(
            bmvic_step(input.fx, input.fx_rate, self.twist.x, &lin, dt)?,
            bmvic_step(input.fy, input.fy_rate, self.twist.y, &lin, dt)?,
            bmvic_step(input.tau_z, input.tau_z_rate, self.twist.theta, &rot, dt)?,
        );
        self.twist = self.vmax.clamp(t);
        Ok(ControlCommand {
            twist: self.twist,
            mode: Mode::Bmvic,
        })
    }
}

/// Velocity of a point at offset `p` on a body moving with linear velocity
/// `v_rel` and yaw rate `omega`: `v + ω × p`.
///
/// The robot and table frames do not rotate relative to each other, so the
/// result is already expressed in the robot frame.
pub fn transport_velocity(v_rel: [f64; 2], omega: f64, p: [f64; 2]) -> [f64; 2] {
    [v_rel[0] - omega * p[1], v_rel[1] + omega * p[0]]
}

/// Maps a predicted table-frame twist to a base command. `None` (window not
/// yet warm) or a non-finite prediction yields a stop.
pub fn nnpc_step(prediction: Option<Planar>, offset: [f64; 2], vmax: &Vmax) -> ControlCommand {
    match prediction {
        Some(pred) if pred.is_finite() => {
            let v = transport_velocity([pred.x, pred.y], pred.theta, offset);
            ControlCommand {
                twist: vmax.clamp(Planar::new(v[0], v[1], pred.theta)),
                mode: Mode::Nnpc,
            }
        }
        _ => ControlCommand::stop(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn bmvic_examples() {
        let p = VicParams::default().translational();
        assert_eq!(bmvic_step(0.0, 0.0, 0.0, &p, 0.002).unwrap(), 0.0);

        let mut v = 0.0;
        for _ in 0..20_000 {
            v = bmvic_step(0.6, 0.0, v, &p, 0.002).unwrap();
        }
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-6);

        let v1 = bmvic_step(0.6, 1.0, 1.0, &p, 1.0).unwrap();
        assert_abs_diff_eq!(v1 - 1.0, 0.2 / 1.2, epsilon = 1e-12);

        assert!(bmvic_step(f64::NAN, 0.0, 0.0, &p, 0.002).is_err());
        assert!(bmvic_step(0.0, 0.0, 0.0, &p, 0.0).is_err());
    }

    #[test]
    fn bmvic_first_order_response() {
        let vic = VicParams {
            alpha: 0.0,
            ..Default::default()
        };
        let p = vic.translational();
        let (f, dt) = (0.6, 0.002);
        let tau = p.mass / p.damping;
        let mut v = 0.0;
        for k in 1..=5000 {
            v = bmvic_step(f, 0.0, v, &p, dt).unwrap();
            let t = k as f64 * dt;
            let exact = f / p.damping * (1.0 - (-t / tau).exp());
            if t > 0.2 {
                assert!((v - exact).abs() / exact < 0.01, "t={t} v={v} exact={exact}");
            }
        }
    }

    #[test]
    fn classify_examples() {
        let p = EvicParams::default();
        assert_eq!(evic_classify(-4.0, 2.0, &p), Mode::LeftTranslation);
        assert_eq!(evic_classify(0.0, 2.0, &p), Mode::RightRotation);
        assert_eq!(evic_classify(0.0, 0.0, &p), Mode::Stop);
        assert_eq!(evic_classify(0.0, -2.0, &p), Mode::LeftRotation);
        assert_eq!(evic_classify(4.0, -2.0, &p), Mode::RightTranslation);
        // unlisted corners fall through
        assert_eq!(evic_classify(4.0, 0.0, &p), Mode::Stop);
        assert_eq!(evic_classify(4.0, 2.0, &p), Mode::Stop);
    }

    #[test]
    fn evic_ramp_examples() {
        let p = EvicParams::default();
        let vic = VicParams::default();
        let vm = Vmax::default();
        let input = WrenchInput::default();
        let c = evic_step(Mode::LeftTranslation, &input, Planar::ZERO, &p, &vic, &vm, 0.002).unwrap();
        assert_abs_diff_eq!(c.twist.y, 0.001, epsilon = 1e-15);

        let at = Planar::new(0.0, 0.35, 0.0);
        let c = evic_step(Mode::LeftTranslation, &input, at, &p, &vic, &vm, 0.002).unwrap();
        assert_eq!(c.twist.y, 0.35);

        let mut cur = at;
        let mut steps = 0;
        while cur.y > 0.0 {
            cur = evic_step(Mode::Stop, &input, cur, &p, &vic, &vm, 0.002).unwrap().twist;
            steps += 1;
        }
        assert_abs_diff_eq!(steps as f64 * 0.002, 0.7, epsilon = 0.0021);
    }

    #[test]
    fn evic_debounce_holds_mode() {
        let mut e = Evic::new(EvicParams::default(), VicParams::default(), Vmax::default());
        let trig = WrenchInput {
            tau_z: -4.0,
            tau_x: 2.0,
            ..Default::default()
        };
        let quiet = WrenchInput::default();
        // 40 ms bursts flapping at more than 10 Hz never switch the mode
        for k in 0..520 {
            let inp = if (k / 20) % 2 == 0 { trig } else { quiet };
            e.step(&inp, 0.002).unwrap();
            assert_eq!(e.mode(), Mode::Stop);
        }
        for _ in 0..49 {
            e.step(&trig, 0.002).unwrap();
        }
        assert_eq!(e.mode(), Mode::Stop);
        e.step(&trig, 0.002).unwrap();
        assert_eq!(e.mode(), Mode::LeftTranslation);
    }

    #[test]
    fn evic_non_finite_is_stop() {
        let mut e = Evic::new(EvicParams::default(), VicParams::default(), Vmax::default());
        let bad = WrenchInput {
            fx: f64::NAN,
            ..Default::default()
        };
        assert_eq!(e.step(&bad, 0.002).unwrap(), ControlCommand::stop());
        let mut b = Bmvic::new(VicParams::default(), Vmax::default());
        assert_eq!(b.step(&bad, 0.002).unwrap(), ControlCommand::stop());
    }

    #[test]
    fn transport_examples() {
        assert_eq!(transport_velocity([0.3, -0.1], 0.0, [-0.61, 0.0]), [0.3, -0.1]);
        let v = transport_velocity([0.0, 0.0], 0.4, [-0.61, 0.0]);
        assert_abs_diff_eq!(v[0], 0.0);
        assert_abs_diff_eq!(v[1], -0.244, epsilon = 1e-12);
        let v = transport_velocity([0.35, 0.0], 0.4, [-0.61, 0.0]);
        assert_abs_diff_eq!(v[0], 0.35);
        assert_abs_diff_eq!(v[1], -0.244, epsilon = 1e-12);
    }

    #[test]
    fn nnpc_examples() {
        let vm = Vmax {
            lateral: 0.4,
            ..Default::default()
        };
        let off = [-0.61, 0.0];
        let c = nnpc_step(Some(Planar::ZERO), off, &vm);
        assert_eq!(c.twist, Planar::ZERO);
        let c = nnpc_step(Some(Planar::new(0.0, 0.5, 0.0)), off, &vm);
        assert_eq!(c.twist.y, 0.4);
        let c = nnpc_step(Some(Planar::new(0.0, 0.2, 0.4)), off, &vm);
        assert_abs_diff_eq!(c.twist.y, -0.044, epsilon = 1e-12);
        assert_abs_diff_eq!(c.twist.theta, 0.4);
        assert_eq!(nnpc_step(None, off, &vm), ControlCommand::stop());
    }

    fn truth_table(zi: usize, xi: usize) -> Mode {
        // rows: tau_z in {-2t, -t/2, 0, t/2, 2t}; cols: tau_x likewise
        use Mode::*;
        const T: [[Mode; 5]; 5] = [
            [Stop, Stop, Stop, Stop, LeftTranslation],
            [LeftRotation, Stop, Stop, Stop, RightRotation],
            [LeftRotation, Stop, Stop, Stop, RightRotation],
            [LeftRotation, Stop, Stop, Stop, RightRotation],
            [RightTranslation, Stop, Stop, Stop, Stop],
        ];
        T[zi][xi]
    }

    #[test]
    fn classify_grid_matches_truth_table() {
        let p = EvicParams::default();
        let levels = |t: f64| [-2.0 * t, -t / 2.0, 0.0, t / 2.0, 2.0 * t];
        for (zi, z) in levels(p.tau_z_threshold).iter().enumerate() {
            for (xi, x) in levels(p.tau_x_threshold).iter().enumerate() {
                assert_eq!(evic_classify(*z, *x, &p), truth_table(zi, xi), "z={z} x={x}");
            }
        }
    }

    proptest! {
        #[test]
        fn classify_is_homogeneous(z in -10.0f64..10.0, x in -10.0f64..10.0, k in 0.01f64..100.0) {
            let p = EvicParams::default();
            let q = EvicParams {
                tau_z_threshold: p.tau_z_threshold * k,
                tau_x_threshold: p.tau_x_threshold * k,
                ..p
            };
            // skip the measure-zero boundary where rounding of the scaled
            // product can flip a non-strict comparison
            let near = |a: f64, b: f64| (a.abs() - b).abs() < 1e-9;
            prop_assume!(!near(z, p.tau_z_threshold) && !near(x, p.tau_x_threshold));
            prop_assert_eq!(evic_classify(z, x, &p), evic_classify(z * k, x * k, &q));
        }

        #[test]
        fn commands_stay_bounded_and_rate_limited(
            seq in prop::collection::vec(prop::array::uniform4(-50.0f64..50.0), 1..400)
        ) {
            let vm = Vmax::default();
            let ep = EvicParams::default();
            let mut e = Evic::new(ep, VicParams::default(), vm);
            let mut b = Bmvic::new(VicParams::default(), vm);
            let dt = 0.002;
            let mut prev = Planar::ZERO;
            for s in &seq {
                let inp = WrenchInput {
                    fx: s[0], fx_rate: s[1] * 10.0, fy: s[1], fy_rate: s[0],
                    tau_z: s[2], tau_z_rate: s[3] * 10.0, tau_x: s[3],
                };
                let ce = e.step(&inp, dt).unwrap();
                prop_assert!(vm.contains(&ce.twist));
                prop_assert!((ce.twist.x - prev.x).abs() <= ep.linear_accel_limit * dt + 1e-12);
                prop_assert!((ce.twist.y - prev.y).abs() <= ep.linear_accel_limit * dt + 1e-12);
                prop_assert!((ce.twist.theta - prev.theta).abs() <= ep.angular_accel_limit * dt + 1e-12);
                prev = ce.twist;
                let cb = b.step(&inp, dt).unwrap();
                prop_assert!(vm.contains(&cb.twist));
                let cn = nnpc_step(Some(Planar::new(s[0], s[1], s[2])), [-0.61, 0.0], &vm);
                prop_assert!(vm.contains(&cn.twist));
            }
        }
    }
}
