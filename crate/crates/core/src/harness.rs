//! Configuration, followers, trial orchestration, replay and batches.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controllers::{
    nnpc_step, Bmvic, ControlCommand, ControllerKind, Evic, EvicParams, VicParams, Vmax, WrenchInput,
};
use crate::dynamics::{GraspCompliance, HandleWrench, Planar, Simulation, TableGeometry, TableState};
use crate::error::{Error, Result};
use crate::intent::{
    sample_from_twist, twist_from_sample, ModelConfig, MotionTrial, PredictionWindow, RecurrentModel, TrainSchedule,
};
use crate::leader::{leader_step, Direction, LeaderOutput, LeaderParams, TaskSpec, TriggerProfile};
use crate::metrics::{
    evaluate, fixtures::BaselineFixtures, BenchSummary, MetricsOptions, MetricsReport, StepRecord,
    TrialHeader, TrialLog, BAND_FRACTION, MIN_DISPLACEMENT,
};
use crate::signals::{SensorConfig, SensorPipeline, Sensed};

/// Environment variable naming a config file; takes precedence over the
/// default location but not over an explicit path.
pub const CONFIG_ENV: &str = "DYAD_BENCH_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "dyad.toml";

// ---------------------------------------------------------------------------
// Config

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspConfig {
    /// `(kx, ky, kθ)`; damping is set critical for the board.
    pub stiffness: Planar,
}

impl Default for GraspConfig {
    fn default() -> Self {
        GraspConfig {
            stiffness: Planar::new(300.0, 300.0, 60.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnpcConfig {
    /// Trained model file.
    pub model: Option<PathBuf>,
    /// Pose samples between replans.
    pub replan_interval: usize,
    /// Which step of the rollout is commanded (1-based).
    pub lookahead: usize,
}

impl Default for NnpcConfig {
    fn default() -> Self {
        NnpcConfig {
            model: None,
            replan_interval: 2,
            lookahead: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub vic: VicParams,
    pub evic: EvicParams,
    pub vmax: Vmax,
    pub nnpc: NnpcConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kind: ControllerKind::Evic,
            vic: VicParams::default(),
            evic: EvicParams::default(),
            vmax: Vmax::default(),
            nnpc: NnpcConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedLeader {
    /// JSON task script for `sim` and batches.
    pub task_script: Option<PathBuf>,
    pub params: LeaderParams,
    pub triggers: TriggerProfile,
    /// Pick the signalling style from the controller: torque triggers for
    /// EVIC, direct heading steering otherwise.
    pub auto_style: bool,
}

impl Default for ScriptedLeader {
    fn default() -> Self {
        ScriptedLeader {
            task_script: None,
            params: LeaderParams::default(),
            triggers: TriggerProfile::default(),
            auto_style: true,
        }
    }
}

impl ScriptedLeader {
    /// Leader parameters used against `kind`.
    pub fn params_for(&self, kind: ControllerKind) -> LeaderParams {
        let mut p = self.params;
        if self.auto_style {
            let evic = kind == ControllerKind::Evic;
            p.triggers = evic;
            p.heading_hold = !evic;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum LeaderSource {
    Scripted(ScriptedLeader),
    Live,
}

impl Default for LeaderSource {
    fn default() -> Self {
        LeaderSource::Scripted(ScriptedLeader::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub port: u16,
    pub broadcast_hz: u32,
    /// Client force is held this long before it starts to decay, s.
    pub input_hold: f64,
    /// Time constant of the decay, s.
    pub input_decay: f64,
    /// Simulation pauses this long after the client disconnects, s.
    pub pause_after: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8765,
            broadcast_hz: 50,
            input_hold: 0.2,
            input_decay: 0.05,
            pause_after: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Mandatory for scripted runs.
    pub seed: Option<u64>,
    pub rate_hz: u32,
    /// Trials stop after this much simulated time, s.
    pub timeout: f64,
    /// Time the board must stay in the goal band to end a trial, s.
    pub settle_hold: f64,
    pub geometry: TableGeometry,
    pub grasp: GraspConfig,
    pub sensors: SensorConfig,
    pub controller: ControllerConfig,
    pub leader: LeaderSource,
    pub metrics: MetricsOptions,
    pub output: OutputConfig,
    pub service: ServiceConfig,
    /// Network used by `train`.
    pub network: ModelConfig,
    pub training: TrainSchedule,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: None,
            rate_hz: 500,
            timeout: 30.0,
            settle_hold: 1.0,
            geometry: TableGeometry::default(),
            grasp: GraspConfig::default(),
            sensors: SensorConfig::default(),
            controller: ControllerConfig::default(),
            leader: LeaderSource::default(),
            metrics: MetricsOptions::default(),
            output: OutputConfig::default(),
            service: ServiceConfig::default(),
            network: ModelConfig::default(),
            training: TrainSchedule::default(),
        }
    }
}

impl BenchConfig {
    pub fn seeded(seed: u64) -> Self {
        BenchConfig {
            seed: Some(seed),
            ..BenchConfig::default()
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate_hz == 0 {
            return Err(Error::Config("rate_hz must be positive".into()));
        }
        if !(self.timeout > 0.0 && self.settle_hold >= 0.0) {
            return Err(Error::Config("timeout must be positive and settle_hold >= 0".into()));
        }
        self.geometry.validate()?;
        GraspCompliance::critically_damped(self.grasp.stiffness, &self.geometry).validate()?;
        self.controller.vic.validate()?;
        self.controller.evic.validate()?;
        self.controller.vmax.validate()?;
        self.network.validate()?;
        self.training.validate()?;
        if self.controller.nnpc.replan_interval == 0 || self.controller.nnpc.lookahead == 0 {
            return Err(Error::Config("nnpc replan_interval and lookahead must be positive".into()));
        }
        match &self.leader {
            LeaderSource::Scripted(s) => {
                if self.seed.is_none() {
                    return Err(Error::Config("a scripted leader needs a seed".into()));
                }
                s.params.validate()?;
                s.triggers.validate(&self.controller.evic)?;
            }
            LeaderSource::Live => {
                if self.service.broadcast_hz == 0 || self.service.broadcast_hz > self.rate_hz {
                    return Err(Error::Config("broadcast_hz must be in (0, rate_hz]".into()));
                }
            }
        }
        Ok(())
    }

    pub fn scripted(&self) -> Result<&ScriptedLeader> {
        match &self.leader {
            LeaderSource::Scripted(s) => Ok(s),
            LeaderSource::Live => Err(Error::Config("this run needs a scripted leader".into())),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Resolves the config file: `explicit`, then the environment variable,
    /// then `dyad.toml` in the working directory, else the defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::read(p);
        }
        if let Some(p) = std::env::var_os(CONFIG_ENV) {
            return Self::read(Path::new(&p));
        }
        let default = Path::new(DEFAULT_CONFIG_FILE);
        if default.exists() {
            return Self::read(default);
        }
        Ok(BenchConfig::default())
    }
}

// ---------------------------------------------------------------------------
// Task scripts

/// An ordered list of tasks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Script(TaskScript),
    List(Vec<TaskSpec>),
    Single(TaskSpec),
}

impl TaskScript {
    /// Accepts `{"tasks": [...]}`, a bare array of tasks or a single task.
    pub fn from_json(text: &str) -> Result<Self> {
        let script = match serde_json::from_str::<ScriptFile>(text)
            .map_err(|e| Error::invalid(format!("task script: {e}")))?
        {
            ScriptFile::Script(s) => s,
            ScriptFile::List(tasks) => TaskScript { name: None, tasks },
            ScriptFile::Single(t) => TaskScript {
                name: None,
                tasks: vec![t],
            },
        };
        for t in &script.tasks {
            t.validate()?;
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The two standard tasks: 2 m to the left and a quarter turn.
    pub fn standard() -> Self {
        TaskScript {
            name: Some("standard".into()),
            tasks: vec![
                TaskSpec {
                    name: Some("lateral-left-2m".into()),
                    ..TaskSpec::lateral(Direction::Left, 2.0)
                },
                TaskSpec {
                    name: Some("rotation-ccw-90".into()),
                    ..TaskSpec::rotation(Direction::Ccw, std::f64::consts::FRAC_PI_2)
                },
            ],
        }
    }
}

/// Short identifier for file names.
pub fn task_label(task: &TaskSpec) -> String {
    task.name.clone().unwrap_or_else(|| {
        let kind = serde_json::to_value(task.kind).ok();
        let dir = serde_json::to_value(task.direction).ok();
        format!(
            "{}-{}-{}",
            kind.as_ref().and_then(|v| v.as_str()).unwrap_or("task"),
            dir.as_ref().and_then(|v| v.as_str()).unwrap_or("dir"),
            task.magnitude
        )
    })
}

// ---------------------------------------------------------------------------
// Followers

/// Neural-network prediction follower: commands the twist the model expects
/// the board to have `lookahead` samples from now, transported to the grasp.
#[derive(Clone, Debug)]
pub struct NnpcFollower {
    model: Arc<RecurrentModel>,
    window: PredictionWindow,
    offset: [f64; 2],
    vmax: Vmax,
    replan_interval: usize,
    lookahead: usize,
    since_replan: usize,
    target: Option<Planar>,
}

impl NnpcFollower {
    pub fn new(model: Arc<RecurrentModel>, cfg: &NnpcConfig, vmax: Vmax, geom: &TableGeometry) -> Result<Self> {
        model.validate()?;
        if cfg.lookahead > model.config.horizon {
            return Err(Error::Config(format!(
                "nnpc lookahead {} exceeds the model horizon {}",
                cfg.lookahead, model.config.horizon
            )));
        }
        Ok(NnpcFollower {
            window: PredictionWindow::new(model.config.window)?,
            model,
            offset: geom.follower_anchor(),
            vmax,
            replan_interval: cfg.replan_interval,
            lookahead: cfg.lookahead,
            since_replan: 0,
            target: None,
        })
    }

    pub fn window(&self) -> &PredictionWindow {
        &self.window
    }

    pub fn step(&mut self, sensed: &Sensed) -> Result<ControlCommand> {
        if sensed.pose_fresh {
            let st = &self.model.standardization;
            self.window.push(st.apply(&sample_from_twist(&sensed.twist)));
            self.since_replan += 1;
            if self.window.is_warm() && (self.target.is_none() || self.since_replan >= self.replan_interval) {
                let rollout = crate::intent::iterated_predict(self.model.as_ref(), &self.window, self.lookahead)?;
                let pred = st.invert(&rollout[self.lookahead - 1]);
                self.target = Some(twist_from_sample(&pred));
                self.since_replan = 0;
            }
        }
        Ok(nnpc_step(self.target, self.offset, &self.vmax))
    }
}

#[derive(Clone, Debug)]
pub enum Follower {
    Bmvic(Bmvic),
    Evic(Evic),
    Nnpc(NnpcFollower),
}

fn wrench_input(s: &Sensed) -> WrenchInput {
    WrenchInput {
        fx: s.force[0],
        fx_rate: s.force_rate[0],
        fy: s.force[1],
        fy_rate: s.force_rate[1],
        tau_z: s.torque[2],
        tau_z_rate: s.torque_rate[2],
        tau_x: s.torque[0],
    }
}

impl Follower {
    pub fn new(
        kind: ControllerKind,
        cfg: &ControllerConfig,
        geom: &TableGeometry,
        model: Option<Arc<RecurrentModel>>,
    ) -> Result<Self> {
        Ok(match kind {
            ControllerKind::Bmvic => Follower::Bmvic(Bmvic::new(cfg.vic, cfg.vmax)),
            ControllerKind::Evic => Follower::Evic(Evic::new(cfg.evic, cfg.vic, cfg.vmax)),
            ControllerKind::Nnpc => {
                let model = model.ok_or_else(|| Error::Config("the nnpc controller needs a trained model".into()))?;
                Follower::Nnpc(NnpcFollower::new(model, &cfg.nnpc, cfg.vmax, geom)?)
            }
        })
    }

    pub fn kind(&self) -> ControllerKind {
        match self {
            Follower::Bmvic(_) => ControllerKind::Bmvic,
            Follower::Evic(_) => ControllerKind::Evic,
            Follower::Nnpc(_) => ControllerKind::Nnpc,
        }
    }

    pub fn step(&mut self, sensed: &Sensed, dt: f64) -> Result<ControlCommand> {
        match self {
            Follower::Bmvic(c) => c.step(&wrench_input(sensed), dt),
            Follower::Evic(c) => c.step(&wrench_input(sensed), dt),
            Follower::Nnpc(c) => c.step(sensed),
        }
    }
}

// ---------------------------------------------------------------------------
// Dyad loop

/// Simulation, sensing and follower for one trial, stepped one tick at a time.
#[derive(Clone, Debug)]
pub struct Dyad {
    pub sim: Simulation,
    sensors: SensorPipeline,
    follower: Follower,
    command: ControlCommand,
    seq: u64,
}

impl Dyad {
    pub fn new(
        config: &BenchConfig,
        kind: ControllerKind,
        start: Planar,
        seed: u64,
        model: Option<Arc<RecurrentModel>>,
    ) -> Result<Self> {
        let geom = config.geometry;
        let grasp = GraspCompliance::critically_damped(config.grasp.stiffness, &geom);
        Ok(Dyad {
            sim: Simulation::new(geom, grasp, start, config.dt()),
            sensors: SensorPipeline::new(config.sensors, geom, config.rate_hz, seed)?,
            follower: Follower::new(kind, &config.controller, &geom, model)?,
            command: ControlCommand::stop(),
            seq: 0,
        })
    }

    pub fn board(&self) -> &TableState {
        &self.sim.board
    }

    pub fn command(&self) -> &ControlCommand {
        &self.command
    }

    pub fn sensed(&self) -> &Sensed {
        self.sensors.latest()
    }

    pub fn follower(&self) -> &Follower {
        &self.follower
    }

    /// Applies the leader wrench for one tick: the board moves under it and
    /// the previous command, then the follower reacts to what it senses.
    pub fn step(&mut self, leader: &HandleWrench, saturated: bool) -> Result<StepRecord> {
        let state = *self.sim.advance(leader, self.command.twist)?;
        let sensed = *self.sensors.push(&state, leader)?;
        self.command = self.follower.step(&sensed, self.sim.dt)?;
        let rec = StepRecord {
            seq: self.seq,
            t: state.t,
            pose: state.pose,
            twist: state.twist,
            accel: state.accel,
            wrench: *leader,
            sensed_force: sensed.force,
            sensed_torque: sensed.torque,
            sensed_twist: sensed.twist,
            command: self.command.twist,
            mode: self.command.mode,
            saturated,
        };
        self.seq += 1;
        Ok(rec)
    }
}

/// Tracks the "goal band held long enough" condition.
#[derive(Clone, Debug)]
pub struct SettleMonitor {
    task: TaskSpec,
    hold: f64,
    held: f64,
}

impl SettleMonitor {
    pub fn new(task: &TaskSpec, hold: f64) -> Self {
        SettleMonitor {
            task: task.clone(),
            hold,
            held: 0.0,
        }
    }

    /// Feeds one step; true once the board has stayed in the band for `hold`.
    pub fn update(&mut self, pose: &Planar, dt: f64) -> bool {
        if self.task.magnitude < MIN_DISPLACEMENT {
            return false;
        }
        let frac = self.task.progress(pose) / self.task.magnitude;
        if (frac - 1.0).abs() <= BAND_FRACTION {
            self.held += dt;
        } else {
            self.held = 0.0;
        }
        self.held + 1e-9 >= self.hold
    }
}

// ---------------------------------------------------------------------------
// Trials

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub log: TrialLog,
    pub report: MetricsReport,
    /// Ended on the settle condition rather than the timeout.
    pub settled: bool,
}

/// Config plus the optional trained model.
#[derive(Clone, Debug)]
pub struct Bench {
    pub config: BenchConfig,
    model: Option<Arc<RecurrentModel>>,
}

impl Bench {
    /// Validates the config and loads the model file it names, if any.
    pub fn new(config: BenchConfig) -> Result<Self> {
        config.validate()?;
        let model = match &config.controller.nnpc.model {
            Some(p) => Some(Arc::new(RecurrentModel::load(p)?)),
            None => None,
        };
        Ok(Bench { config, model })
    }

    pub fn with_model(config: BenchConfig, model: RecurrentModel) -> Result<Self> {
        config.validate()?;
        Ok(Bench {
            config,
            model: Some(Arc::new(model)),
        })
    }

    pub fn model(&self) -> Option<&Arc<RecurrentModel>> {
        self.model.as_ref()
    }

    fn seed(&self) -> Result<u64> {
        self.config
            .seed
            .ok_or_else(|| Error::Config("a scripted leader needs a seed".into()))
    }

    fn header(&self, task: &TaskSpec, kind: ControllerKind, seed: u64) -> TrialHeader {
        TrialHeader {
            task: task.clone(),
            controller: kind,
            seed,
            dt: self.config.dt(),
            geometry: self.config.geometry,
        }
    }

    /// Runs `task` against the configured controller with the configured seed.
    pub fn run_trial(&self, task: &TaskSpec) -> Result<TrialOutcome> {
        self.run_trial_as(self.config.controller.kind, task, self.seed()?)
    }

    /// Scripted-leader trial until the settle condition or the timeout.
    pub fn run_trial_as(&self, kind: ControllerKind, task: &TaskSpec, seed: u64) -> Result<TrialOutcome> {
        task.validate()?;
        let leader = self.config.scripted()?;
        let params = leader.params_for(kind);
        let geom = self.config.geometry;
        let dt = self.config.dt();
        let mut dyad = Dyad::new(&self.config, kind, task.start, seed, self.model.clone())?;
        let mut settle = SettleMonitor::new(task, self.config.settle_hold);
        let max_steps = (self.config.timeout * self.config.rate_hz as f64).round() as u64;
        let mut steps = Vec::with_capacity(max_steps.min(1 << 16) as usize);
        let mut settled = false;
        for n in 0..max_steps {
            let t = n as f64 * dt;
            let LeaderOutput { wrench, saturated, .. } =
                leader_step(dyad.board(), task, &leader.triggers, &params, &geom, t)?;
            let rec = dyad.step(&wrench, saturated)?;
            let pose = rec.pose;
            steps.push(rec);
            if settle.update(&pose, dt) {
                settled = true;
                break;
            }
        }
        let log = TrialLog {
            header: self.header(task, kind, seed),
            steps,
        };
        let mut report = evaluate(&log, &self.config.metrics)?;
        if !settled {
            report.completed = false;
            report.notes.push(format!("timed out after {} s", self.config.timeout));
        }
        Ok(TrialOutcome { log, report, settled })
    }

    /// Re-runs a logged trial with its recorded leader wrenches.
    pub fn replay(&self, log: &TrialLog) -> Result<TrialLog> {
        let h = &log.header;
        let mut config = self.config.clone();
        config.geometry = h.geometry;
        if (config.dt() - h.dt).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "log step {} does not match the configured rate {} Hz",
                h.dt, config.rate_hz
            )));
        }
        let mut dyad = Dyad::new(&config, h.controller, h.task.start, h.seed, self.model.clone())?;
        let steps = log
            .steps
            .iter()
            .map(|s| dyad.step(&s.wrench, s.saturated))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrialLog {
            header: h.clone(),
            steps,
        })
    }

    /// Runs every task of `script` against every controller, `repetitions`
    /// times each. Trial `r` uses seed `base + r`. Failing trials are
    /// recorded and the batch continues. With `out_dir`, logs, reports and
    /// the summary CSV are written there.
    pub fn run_batch(
        &self,
        script: &TaskScript,
        controllers: &[ControllerKind],
        repetitions: usize,
        out_dir: Option<&Path>,
    ) -> Result<BatchOutcome> {
        let base = self.seed()?;
        if script.tasks.is_empty() {
            log::warn!("task script is empty; nothing to run");
        }
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir.join("logs")).map_err(|e| Error::io(dir, e))?;
            fs::create_dir_all(dir.join("reports")).map_err(|e| Error::io(dir, e))?;
        }
        let mut out = BatchOutcome::default();
        for &kind in controllers {
            for task in &script.tasks {
                for r in 0..repetitions {
                    let name = format!("{}-{}-{:02}", kind, task_label(task), r);
                    let seed = base.wrapping_add(r as u64);
                    match self.run_trial_as(kind, task, seed) {
                        Ok(o) => {
                            if let Some(dir) = out_dir {
                                write_log(&dir.join("logs").join(format!("{name}.jsonl")), &o.log)?;
                                write_json(&dir.join("reports").join(format!("{name}.json")), &o.report)?;
                            }
                            out.trials.push(name);
                            out.reports.push(o.report);
                        }
                        Err(e) => {
                            log::warn!("trial {name} failed: {e}");
                            out.failures.push((name, e.to_string()));
                        }
                    }
                }
            }
        }
        out.summary = BenchSummary::from_reports(&out.reports);
        if let Some(dir) = out_dir {
            out.write(dir)?;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub trials: Vec<String>,
    pub reports: Vec<MetricsReport>,
    pub failures: Vec<(String, String)>,
    pub summary: BenchSummary,
    pub fixtures: BaselineFixtures,
}

impl Default for BatchOutcome {
    fn default() -> Self {
        BatchOutcome {
            trials: Vec::new(),
            reports: Vec::new(),
            failures: Vec::new(),
            summary: BenchSummary::from_reports(&[]),
            fixtures: BaselineFixtures::published(),
        }
    }
}

impl BatchOutcome {
    /// `summary.csv` and `batch.json` in `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let csv_path = dir.join("summary.csv");
        let f = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.summary.write_csv(BufWriter::new(f))?;
        write_json(&dir.join("batch.json"), self)
    }
}

pub fn write_log(path: &Path, log: &TrialLog) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    log.write_jsonl(BufWriter::new(f))
}

pub fn read_log(path: &Path) -> Result<TrialLog> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    TrialLog::read_jsonl(BufReader::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
}

/// Trial logs (`*.jsonl`) under `dir`, sorted by name.
pub fn list_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = entry.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "jsonl") {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Synthetic corpus

/// Mixed lateral and rotation tasks with randomized extents.
pub fn synthetic_tasks(n: usize, seed: u64) -> Vec<TaskSpec> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| match i % 4 {
            0 => TaskSpec::lateral(Direction::Left, rng.gen_range(1.0..2.5)),
            1 => TaskSpec::lateral(Direction::Right, rng.gen_range(1.0..2.5)),
            2 => TaskSpec::rotation(Direction::Ccw, rng.gen_range(0.8..2.0)),
            _ => TaskSpec::rotation(Direction::Cw, rng.gen_range(0.8..2.0)),
        })
        .collect()
}

/// Minimum settle hold for corpus trials, s. The model has to see the board
/// come to rest, or it learns to keep moving after a stop.
pub const CORPUS_SETTLE_HOLD: f64 = 3.0;

/// Runs the scripted leader against EVIC on `tasks` and returns the logs.
pub fn synthetic_logs(config: &BenchConfig, tasks: &[TaskSpec], seed: u64) -> Result<Vec<TrialLog>> {
    let bench = Bench::new(BenchConfig {
        seed: Some(seed),
        settle_hold: config.settle_hold.max(CORPUS_SETTLE_HOLD),
        ..config.clone()
    })?;
    tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            bench
                .run_trial_as(ControllerKind::Evic, t, seed.wrapping_add(i as u64))
                .map(|o| o.log)
        })
        .collect()
}

/// Motion trials from logs, sampled at the pose-stream rate.
pub fn motion_trials(logs: &[TrialLog], rate_hz: f64) -> Result<Vec<MotionTrial>> {
    logs.iter()
        .enumerate()
        .map(|(i, l)| MotionTrial::from_log(format!("{}-{i}", task_label(&l.header.task)), l, rate_hz))
        .collect()
}
