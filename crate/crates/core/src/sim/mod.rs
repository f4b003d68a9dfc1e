//! Fixed-step simulation of the avatar, the pursuit ball and the gate
//! course, plus the closed loop that ties a pilot and a controller to them.

pub mod course;
pub mod record;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassifierModel;
use crate::config::ScenarioConfig;
use crate::gestures::{ControllerError, InputFrame, InterfaceId, LocomotionCommand, LocomotionController, SpeedLimits, SteeringMode};
use crate::handmodel::Vec3;
use crate::pilot::{pursuit_policy, waypoint_policy, InputSynthesizer, PilotConfig};
use crate::rng::{stream, Stream};

use course::{gate_events, GateEvent, GateProgress, WaypointCourse};
use record::{RowEvent, ScenarioLayout, TickRow, TrialRecord};

const KMH_PER_MPS: f64 = 3.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Pursuit,
    Waypoints,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Pursuit => "pursuit",
            ScenarioKind::Waypoints => "waypoints",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pursuit" => Ok(ScenarioKind::Pursuit),
            "waypoints" => Ok(ScenarioKind::Waypoints),
            _ => Err(format!("unknown scenario kind '{s}' (expected pursuit or waypoints)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub dt: f64,
    pub capsule_radius: f64,
    pub capsule_height: f64,
    /// deg/s of yaw per degree of steering in rate mode.
    pub turn_gain: f64,
    pub steering_mode: SteeringMode,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 0.01,
            capsule_radius: 0.3,
            capsule_height: 1.7,
            turn_gain: 1.0,
            steering_mode: SteeringMode::Rate,
        }
    }
}

impl SimParams {
    pub fn validate(&self, errors: &mut Vec<String>) {
        for (name, v) in [
            ("dt", self.dt),
            ("capsule_radius", self.capsule_radius),
            ("capsule_height", self.capsule_height),
            ("turn_gain", self.turn_gain),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(format!("sim.{name} must be a positive number (got {v})"));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitConfig {
    pub keyframe_count: usize,
    pub keyframe_interval_s: f64,
    /// Values a keyframe may take, km/h.
    pub keyframe_speeds_kmh: Vec<f64>,
    pub ball_accel: f64,
    pub initial_gap_m: f64,
    pub duration_s: f64,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        PursuitConfig {
            keyframe_count: 17,
            keyframe_interval_s: 10.0,
            keyframe_speeds_kmh: vec![2.0, 3.0, 4.0],
            ball_accel: 0.3,
            initial_gap_m: 3.0,
            duration_s: 180.0,
        }
    }
}

impl PursuitConfig {
    pub fn validate(&self, lim: &SpeedLimits, errors: &mut Vec<String>) {
        if self.keyframe_count == 0 {
            errors.push("pursuit.keyframe_count must be >= 1".into());
        }
        if self.keyframe_speeds_kmh.is_empty() {
            errors.push("pursuit.keyframe_speeds_kmh must not be empty".into());
        }
        for v in &self.keyframe_speeds_kmh {
            if !(*v >= 0.0 && *v <= lim.s_max) {
                errors.push(format!("pursuit.keyframe_speeds_kmh value {v} is outside [0, s_max]"));
            }
        }
        for (name, v) in [
            ("keyframe_interval_s", self.keyframe_interval_s),
            ("ball_accel", self.ball_accel),
            ("initial_gap_m", self.initial_gap_m),
            ("duration_s", self.duration_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(format!("pursuit.{name} must be a positive number (got {v})"));
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvatarState {
    pub position: Vec3,
    pub heading_deg: f64,
    /// m/s
    pub speed: f64,
}

impl AvatarState {
    pub fn at_rest() -> Self {
        AvatarState {
            position: Vec3::ZERO,
            heading_deg: 0.0,
            speed: 0.0,
        }
    }
}

/// Unit walking direction for a heading; 0 looks down `-z`, positive
/// headings turn left.
pub fn heading_dir(heading_deg: f64) -> Vec3 {
    Vec3::FORWARD.rotate_y(heading_deg.to_radians())
}

/// One tick of avatar kinematics. `steer` is false when direction control
/// is disabled (pursuit).
pub fn step_avatar(
    state: &AvatarState,
    cmd: &LocomotionCommand,
    lim: &SpeedLimits,
    params: &SimParams,
    steer: bool,
) -> AvatarState {
    let dt = params.dt;
    let target = lim.clamp(cmd.speed) / KMH_PER_MPS;
    let max_dv = lim.accel * dt;
    let speed = (state.speed + (target - state.speed).clamp(-max_dv, max_dv)).clamp(0.0, lim.s_max / KMH_PER_MPS);
    let heading_deg = match (steer, params.steering_mode) {
        (false, _) => state.heading_deg,
        (true, SteeringMode::Rate) => state.heading_deg + params.turn_gain * cmd.steering_deg * dt,
        (true, SteeringMode::Absolute) => params.turn_gain * cmd.steering_deg,
    };
    let dir = heading_dir(0.5 * (state.heading_deg + heading_deg));
    AvatarState {
        position: state.position + dir * (0.5 * (state.speed + speed) * dt),
        heading_deg,
        speed,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PursuitScenario {
    pub keyframes_kmh: Vec<f64>,
    pub interval_s: f64,
    pub ball_accel: f64,
    pub initial_gap_m: f64,
    pub duration_s: f64,
}

impl PursuitScenario {
    /// Keyframes are drawn in order from the seed's keyframe stream.
    pub fn generate(cfg: &PursuitConfig, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::Keyframes);
        let keyframes_kmh = (0..cfg.keyframe_count)
            .map(|_| cfg.keyframe_speeds_kmh[rng.random_range(0..cfg.keyframe_speeds_kmh.len())])
            .collect();
        PursuitScenario {
            keyframes_kmh,
            interval_s: cfg.keyframe_interval_s,
            ball_accel: cfg.ball_accel,
            initial_gap_m: cfg.initial_gap_m,
            duration_s: cfg.duration_s,
        }
    }

    /// Keyframe in effect at `t`; the last one holds once the schedule
    /// runs out.
    pub fn keyframe_index(&self, t: f64) -> usize {
        let k = (t / self.interval_s + 1e-9).floor().max(0.0) as usize;
        k.min(self.keyframes_kmh.len() - 1)
    }

    pub fn target_speed_kmh(&self, t: f64) -> f64 {
        self.keyframes_kmh[self.keyframe_index(t)]
    }

    /// Times at which the target speed changes from one keyframe to the
    /// next (every interior boundary, whether or not the value differs).
    pub fn boundaries(&self) -> Vec<f64> {
        (1..self.keyframes_kmh.len())
            .map(|k| k as f64 * self.interval_s)
            .filter(|t| *t < self.duration_s)
            .collect()
    }

    pub fn ball_start(&self) -> BallState {
        BallState {
            position: Vec3::new(0.0, 0.0, -self.initial_gap_m),
            speed: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallState {
    pub position: Vec3,
    /// m/s
    pub speed: f64,
}

/// Advances the ball from `t` to `t + dt`. It rolls straight down `-z`
/// and approaches the current keyframe speed at `ball_accel`.
pub fn step_ball(ball: &BallState, scenario: &PursuitScenario, t: f64, dt: f64) -> BallState {
    let target = scenario.target_speed_kmh(t) / KMH_PER_MPS;
    let max_dv = scenario.ball_accel * dt;
    let speed = ball.speed + (target - ball.speed).clamp(-max_dv, max_dv);
    BallState {
        position: ball.position + Vec3::FORWARD * (0.5 * (ball.speed + speed) * dt),
        speed,
    }
}

/// What a pilot can see.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub avatar_position: Vec3,
    pub avatar_heading_deg: f64,
    /// m/s
    pub avatar_speed: f64,
    pub ball_position: Option<Vec3>,
    pub ball_speed: Option<f64>,
}

#[derive(Clone, Debug)]
enum Scene {
    Pursuit { scenario: PursuitScenario, ball: BallState },
    Waypoints { course: WaypointCourse, progress: GateProgress },
}

/// Simulator state for one trial. Time is always `tick * dt`.
#[derive(Clone, Debug)]
pub struct World {
    params: SimParams,
    lim: SpeedLimits,
    scene: Scene,
    avatar: AvatarState,
    tick: u64,
    max_ticks: u64,
    finished: bool,
}

impl World {
    pub fn pursuit(scenario: PursuitScenario, params: SimParams, lim: SpeedLimits) -> Self {
        let max_ticks = (scenario.duration_s / params.dt).round() as u64;
        World {
            params,
            lim,
            scene: Scene::Pursuit {
                ball: scenario.ball_start(),
                scenario,
            },
            avatar: AvatarState::at_rest(),
            tick: 0,
            max_ticks,
            finished: false,
        }
    }

    pub fn waypoints(course: WaypointCourse, max_duration_s: f64, params: SimParams, lim: SpeedLimits) -> Self {
        World {
            params,
            lim,
            scene: Scene::Waypoints {
                progress: GateProgress::new(&course),
                course,
            },
            avatar: AvatarState::at_rest(),
            tick: 0,
            max_ticks: (max_duration_s / params.dt).round() as u64,
            finished: false,
        }
    }

    pub fn from_config(cfg: &ScenarioConfig, seed: u64) -> Self {
        match cfg.kind {
            ScenarioKind::Pursuit => World::pursuit(PursuitScenario::generate(&cfg.pursuit, seed), cfg.sim, cfg.limits),
            ScenarioKind::Waypoints => World::waypoints(
                WaypointCourse::generate(&cfg.waypoints, seed),
                cfg.waypoints.max_duration_s,
                cfg.sim,
                cfg.limits,
            ),
        }
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.params.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn avatar(&self) -> &AvatarState {
        &self.avatar
    }

    pub fn course(&self) -> Option<&WaypointCourse> {
        match &self.scene {
            Scene::Waypoints { course, .. } => Some(course),
            Scene::Pursuit { .. } => None,
        }
    }

    pub fn layout(&self) -> ScenarioLayout {
        match &self.scene {
            Scene::Pursuit { scenario, .. } => ScenarioLayout::Pursuit(scenario.clone()),
            Scene::Waypoints { course, .. } => ScenarioLayout::Waypoints(course.clone()),
        }
    }

    /// Pursuit: the full duration has elapsed. Waypoints: the finish plane
    /// was reached.
    pub fn completed(&self) -> bool {
        match self.scene {
            Scene::Pursuit { .. } => self.tick >= self.max_ticks,
            Scene::Waypoints { .. } => self.finished,
        }
    }

    pub fn done(&self) -> bool {
        self.finished || self.tick >= self.max_ticks
    }

    pub fn observe(&self) -> Observation {
        let (ball_position, ball_speed) = match &self.scene {
            Scene::Pursuit { ball, .. } => (Some(ball.position), Some(ball.speed)),
            Scene::Waypoints { .. } => (None, None),
        };
        Observation {
            t: self.time(),
            avatar_position: self.avatar.position,
            avatar_heading_deg: self.avatar.heading_deg,
            avatar_speed: self.avatar.speed,
            ball_position,
            ball_speed,
        }
    }

    pub fn row(&self, cmd: &LocomotionCommand) -> TickRow {
        let (ball_z, ball_speed) = match &self.scene {
            Scene::Pursuit { ball, .. } => (Some(ball.position.z), Some(ball.speed)),
            Scene::Waypoints { .. } => (None, None),
        };
        TickRow {
            t: self.time(),
            avatar_x: self.avatar.position.x,
            avatar_z: self.avatar.position.z,
            avatar_speed: self.avatar.speed,
            heading_deg: self.avatar.heading_deg,
            cmd_speed: cmd.speed,
            cmd_steer_deg: cmd.steering_deg,
            ball_z,
            ball_speed,
        }
    }

    /// Advances one tick under `cmd` and returns the gate events it caused.
    pub fn step(&mut self, cmd: &LocomotionCommand) -> Vec<GateEvent> {
        let t = self.time();
        let before = self.avatar;
        let steer = matches!(self.scene, Scene::Waypoints { .. });
        self.avatar = step_avatar(&before, cmd, &self.lim, &self.params, steer);
        self.tick += 1;
        match &mut self.scene {
            Scene::Pursuit { scenario, ball } => {
                *ball = step_ball(ball, scenario, t, self.params.dt);
                Vec::new()
            }
            Scene::Waypoints { course, progress } => {
                let events = gate_events(
                    before.position,
                    self.avatar.position,
                    self.params.capsule_radius,
                    course,
                    progress,
                );
                if self.avatar.position.z <= course.finish_z {
                    self.finished = true;
                }
                events
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("unknown pilot profile '{0}'")]
    UnknownPilot(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("input log is empty")]
    EmptyLog,
    #[error("input frame {index} has timestamp {found} but the trial expects {expected}")]
    TimestampMismatch { index: usize, expected: f64, found: f64 },
}

/// What to run: which interface, which pilot and which seed.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSpec {
    pub scenario_name: String,
    pub interface: InterfaceId,
    pub pilot_name: String,
    pub pilot: PilotConfig,
    pub seed: u64,
}

impl TrialSpec {
    /// Looks the pilot profile up by name in the scenario config.
    pub fn new(cfg: &ScenarioConfig, interface: InterfaceId, pilot: &str, seed: u64) -> Result<Self, SimError> {
        let p = cfg
            .pilot_profile(pilot)
            .ok_or_else(|| SimError::UnknownPilot(pilot.to_string()))?;
        Ok(TrialSpec {
            scenario_name: cfg.kind.as_str().to_string(),
            interface,
            pilot_name: pilot.to_string(),
            pilot: p,
            seed,
        })
    }

    /// Sets the scenario label; whitespace and commas become `_` so the
    /// label stays one token in record headers and CSV cells.
    pub fn named(mut self, scenario_name: &str) -> Self {
        self.scenario_name = scenario_name
            .chars()
            .map(|c| if c.is_whitespace() || c == ',' { '_' } else { c })
            .collect();
        self
    }
}

#[derive(Clone, Debug)]
pub struct TrialRun {
    pub record: TrialRecord,
    /// Every frame fed to the controller, when requested.
    pub inputs: Vec<InputFrame>,
}

struct Recorder {
    rows: Vec<TickRow>,
    events: Vec<RowEvent>,
}

impl Recorder {
    fn new(world: &World) -> Self {
        Recorder {
            rows: vec![world.row(&LocomotionCommand::default())],
            events: Vec::new(),
        }
    }

    fn push(&mut self, world: &World, cmd: &LocomotionCommand, events: Vec<GateEvent>) {
        self.rows.push(world.row(cmd));
        let row = self.rows.len() - 1;
        self.events.extend(events.into_iter().map(|event| RowEvent { row, event }));
    }

    fn finish(self, world: &World, cfg: &ScenarioConfig, spec: &TrialSpec) -> TrialRecord {
        TrialRecord {
            scenario: spec.scenario_name.clone(),
            interface: spec.interface,
            pilot: spec.pilot_name.clone(),
            seed: spec.seed,
            dt: cfg.sim.dt,
            completed: world.completed(),
            layout: world.layout(),
            rows: self.rows,
            events: self.events,
        }
    }
}

fn controller(
    cfg: &ScenarioConfig,
    interface: InterfaceId,
    model: Option<Arc<ClassifierModel>>,
) -> Result<LocomotionController, SimError> {
    Ok(LocomotionController::new(
        interface,
        cfg.gestures,
        cfg.limits,
        1.0 / cfg.sim.dt,
        model,
    )?)
}

/// Runs one closed-loop trial: each tick the pilot looks at the state as it
/// was `reaction_delay_s` ago, picks a speed and steering angle, turns them
/// into an input frame, the controller turns that into a command, and the
/// world advances. Identical inputs give an identical record.
pub fn run_trial(
    cfg: &ScenarioConfig,
    spec: &TrialSpec,
    model: Option<Arc<ClassifierModel>>,
    keep_inputs: bool,
) -> Result<TrialRun, SimError> {
    cfg.validate().map_err(SimError::Invalid)?;
    let mut errors = Vec::new();
    spec.pilot.validate(&mut errors);
    if !errors.is_empty() {
        return Err(SimError::Invalid(errors));
    }

    let dt = cfg.sim.dt;
    let mut world = World::from_config(cfg, spec.seed);
    let mut ctrl = controller(cfg, spec.interface, model)?;
    let mut synth = InputSynthesizer::new(spec.interface, spec.pilot, cfg.gestures, cfg.limits, spec.seed);
    let delay_ticks = (spec.pilot.reaction_delay_s / dt).round() as usize;
    let mut history: VecDeque<Observation> = VecDeque::with_capacity(delay_ticks + 1);
    let mut rec = Recorder::new(&world);
    let mut inputs = Vec::new();

    while !world.done() {
        let t = world.time();
        history.push_back(world.observe());
        if history.len() > delay_ticks + 1 {
            history.pop_front();
        }
        let seen = history.front().copied().unwrap_or_else(|| world.observe());
        let (speed, steer) = match world.course() {
            None => (pursuit_policy(&seen, &spec.pilot.pursuit, &cfg.limits), 0.0),
            Some(course) => waypoint_policy(
                &seen,
                course,
                &spec.pilot.waypoints,
                &cfg.limits,
                cfg.sim.steering_mode,
                cfg.sim.turn_gain,
            ),
        };
        let frame = synth.invert(speed, steer, t, dt);
        let cmd = ctrl.step(&frame)?;
        if keep_inputs {
            inputs.push(frame);
        }
        let events = world.step(&cmd);
        rec.push(&world, &cmd, events);
    }

    Ok(TrialRun {
        record: rec.finish(&world, cfg, spec),
        inputs,
    })
}

#[derive(Clone, Debug)]
pub struct ReplayRun {
    pub record: TrialRecord,
    /// The log ended before the trial did.
    pub truncated: bool,
}

/// Drives the controller from recorded frames instead of a pilot. Frame
/// `k` must carry timestamp `k * dt`. Frames past the end of the trial are
/// ignored; a short log ends the trial early.
pub fn replay(
    cfg: &ScenarioConfig,
    spec: &TrialSpec,
    model: Option<Arc<ClassifierModel>>,
    frames: &[InputFrame],
) -> Result<ReplayRun, SimError> {
    cfg.validate().map_err(SimError::Invalid)?;
    if frames.is_empty() {
        return Err(SimError::EmptyLog);
    }
    let dt = cfg.sim.dt;
    let mut world = World::from_config(cfg, spec.seed);
    let mut ctrl = controller(cfg, spec.interface, model)?;
    let mut rec = Recorder::new(&world);
    let mut frames_iter = frames.iter().enumerate();

    while !world.done() {
        let Some((index, frame)) = frames_iter.next() else {
            break;
        };
        let expected = world.time();
        let found = frame.timestamp();
        if (found - expected).abs() > 1e-6 * dt {
            return Err(SimError::TimestampMismatch { index, expected, found });
        }
        let cmd = ctrl.step(frame)?;
        let events = world.step(&cmd);
        rec.push(&world, &cmd, events);
    }
    let truncated = !world.done();
    Ok(ReplayRun {
        record: rec.finish(&world, cfg, spec),
        truncated,
    })
}
