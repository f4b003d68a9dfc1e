//! Synthetic operators. A pilot looks at (possibly delayed) simulator state,
//! decides on a speed and steering angle, then produces the hand or gamepad
//! frame that asks the chosen interface for exactly that.

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::NUM_CLASSES;
use crate::gestures::{
    FingerDistanceConfig, FingerTappingConfig, GamepadConfig, GestureConfig, InputFrame, InterfaceId,
    SpeedLimits, SteeringMode,
};
use crate::handmodel::{Finger, GamepadFrame, HandFrame, TrackedHand, Vec3};
use crate::rng::{stream, Stream};
use crate::sim::course::WaypointCourse;
use crate::sim::Observation;

const KMH_PER_MPS: f64 = 3.6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitGains {
    /// Speed correction per metre of gap error, 1/s.
    pub kp: f64,
    /// Weight on the closing speed.
    pub kd: f64,
    pub target_gap_m: f64,
}

impl Default for PursuitGains {
    fn default() -> Self {
        PursuitGains {
            kp: 0.5,
            kd: 0.8,
            target_gap_m: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaypointGains {
    /// Distance ahead (along -z) of the aim point on the gate-centre line.
    pub lookahead_m: f64,
    /// Speed is divided by `1 + curvature_slowdown_m * |curvature|`.
    pub curvature_slowdown_m: f64,
    /// Speed floor used when converting curvature into a yaw rate, m/s.
    pub min_turn_speed: f64,
}

impl Default for WaypointGains {
    fn default() -> Self {
        WaypointGains {
            lookahead_m: 2.0,
            curvature_slowdown_m: 0.5,
            min_turn_speed: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotConfig {
    pub reaction_delay_s: f64,
    /// Gaussian sigma per fingertip axis, metres.
    pub tracking_noise_sigma: f64,
    /// Fingertip velocity noise per metre of position noise, 1/s.
    pub velocity_noise_per_s: f64,
    /// Lever arm turning position noise into hand-yaw jitter, metres.
    pub pointing_lever_m: f64,
    /// Correlation time of the hand-yaw jitter, s. Zero gives white jitter.
    pub yaw_correlation_s: f64,
    /// Peak upward index velocity while tapping, m/s.
    pub tap_amplitude: f64,
    pub hand_scale: f64,
    pub pursuit: PursuitGains,
    pub waypoints: WaypointGains,
}

impl Default for PilotConfig {
    fn default() -> Self {
        PilotConfig {
            reaction_delay_s: 0.25,
            tracking_noise_sigma: 0.003,
            velocity_noise_per_s: 10.0,
            pointing_lever_m: 0.1,
            yaw_correlation_s: 0.5,
            tap_amplitude: 0.4,
            hand_scale: 1.0,
            pursuit: PursuitGains::default(),
            waypoints: WaypointGains::default(),
        }
    }
}

impl PilotConfig {
    /// Same gains, no noise and no reaction delay.
    pub fn perfect() -> Self {
        PilotConfig {
            reaction_delay_s: 0.0,
            tracking_noise_sigma: 0.0,
            ..PilotConfig::default()
        }
    }

    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.reaction_delay_s >= 0.0) {
            errors.push(format!("pilot.reaction_delay_s must be >= 0 (got {})", self.reaction_delay_s));
        }
        if !(self.tracking_noise_sigma >= 0.0) {
            errors.push(format!(
                "pilot.tracking_noise_sigma must be >= 0 (got {})",
                self.tracking_noise_sigma
            ));
        }
        if !(self.velocity_noise_per_s >= 0.0) {
            errors.push("pilot.velocity_noise_per_s must be >= 0".into());
        }
        if !(self.pointing_lever_m > 0.0) {
            errors.push("pilot.pointing_lever_m must be > 0".into());
        }
        if !(self.yaw_correlation_s >= 0.0) {
            errors.push("pilot.yaw_correlation_s must be >= 0".into());
        }
        if !(self.tap_amplitude > 0.0) {
            errors.push("pilot.tap_amplitude must be > 0".into());
        }
        if !(self.hand_scale > 0.0) {
            errors.push("pilot.hand_scale must be > 0".into());
        }
        if !(self.waypoints.lookahead_m > 0.0) {
            errors.push("pilot.waypoints.lookahead_m must be > 0".into());
        }
    }
}

/// Fingertip offsets in the palm frame `(side, forward, normal)`, metres,
/// for a right hand at unit scale. The left hand mirrors `side`.
const EXTENDED: [[f64; 3]; 5] = [
    [-0.060, 0.040, 0.000],
    [-0.025, 0.090, 0.000],
    [0.000, 0.095, 0.000],
    [0.020, 0.090, 0.000],
    [0.040, 0.075, 0.000],
];
const CURLED: [[f64; 3]; 5] = [
    [-0.020, 0.015, 0.015],
    [-0.015, 0.012, 0.018],
    [0.000, 0.015, 0.020],
    [0.015, 0.012, 0.018],
    [0.024, 0.008, 0.012],
];

/// Parametric hand poses: fist, one to five extended fingers, open hand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseTemplate {
    pub hand_scale: f64,
    pub left_palm: Vec3,
    pub right_palm: Vec3,
}

impl Default for PoseTemplate {
    fn default() -> Self {
        PoseTemplate {
            hand_scale: 1.0,
            left_palm: Vec3::new(-0.12, 0.20, 0.0),
            right_palm: Vec3::new(0.12, 0.20, 0.0),
        }
    }
}

/// Which fingers are extended for a finger-count class. Counting starts at
/// the index finger; the thumb joins at five.
pub fn extended_fingers(class: usize) -> [bool; 5] {
    match class {
        0 => [false; 5],
        1 => [false, true, false, false, false],
        2 => [false, true, true, false, false],
        3 => [false, true, true, true, false],
        4 => [false, true, true, true, true],
        _ => [true; 5],
    }
}

impl PoseTemplate {
    pub fn with_scale(hand_scale: f64) -> Self {
        PoseTemplate {
            hand_scale,
            ..PoseTemplate::default()
        }
    }

    /// Builds a palm-down hand pointing along `-z` rotated by `yaw_rad`
    /// about `+y`.
    pub fn hand(&self, is_left: bool, extended: [bool; 5], yaw_rad: f64) -> TrackedHand {
        let palm = if is_left { self.left_palm } else { self.right_palm };
        let normal = Vec3::new(0.0, -1.0, 0.0);
        let forward = Vec3::FORWARD.rotate_y(yaw_rad);
        let side = normal.cross(forward);
        let mirror = if is_left { -1.0 } else { 1.0 };
        let mut hand = TrackedHand {
            palm_centre: palm,
            palm_normal: normal,
            pointing_dir: forward,
            tracked: true,
            ..TrackedHand::untracked()
        };
        for (i, ext) in extended.iter().enumerate() {
            let o = if *ext { EXTENDED[i] } else { CURLED[i] };
            let s = self.hand_scale;
            hand.fingertips[i] = palm + side * (mirror * o[0] * s) + forward * (o[1] * s) + normal * (o[2] * s);
        }
        hand
    }

    /// Point between the thumb and index tips of the right hand, and the
    /// axis along which they separate.
    fn pinch_frame(&self) -> (Vec3, Vec3) {
        let normal = Vec3::new(0.0, -1.0, 0.0);
        let side = normal.cross(Vec3::FORWARD);
        let mid = self.right_palm + side * (-0.03 * self.hand_scale) + Vec3::FORWARD * (0.05 * self.hand_scale);
        (mid, side)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map_or(0.0, |n| n.sample(rng))
    } else {
        0.0
    }
}

fn add_tip_noise(hand: &mut TrackedHand, sigma: f64, vel_sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma <= 0.0 && vel_sigma <= 0.0 {
        return;
    }
    for tip in hand.fingertips.iter_mut() {
        *tip += Vec3::new(gaussian(rng, sigma), gaussian(rng, sigma), gaussian(rng, sigma));
    }
    for vel in hand.fingertip_velocities.iter_mut() {
        *vel += Vec3::new(gaussian(rng, vel_sigma), gaussian(rng, vel_sigma), gaussian(rng, vel_sigma));
    }
}

/// Labelled frame for finger-count class `class`: right hand shows the
/// count, left hand is open (or a fist for class 0), fingertips jittered
/// with i.i.d. Gaussian noise of `sigma` metres.
pub fn synthesize_pose(class: usize, template: &PoseTemplate, sigma: f64, rng: &mut ChaCha8Rng, timestamp: f64) -> HandFrame {
    let class = class.min(NUM_CLASSES - 1);
    let left_ext = if class == 0 { [false; 5] } else { [true; 5] };
    let mut left = template.hand(true, left_ext, 0.0);
    let mut right = template.hand(false, extended_fingers(class), 0.0);
    add_tip_noise(&mut left, sigma, 0.0, rng);
    add_tip_noise(&mut right, sigma, 0.0, rng);
    HandFrame {
        timestamp,
        left,
        right,
    }
}

/// `per_class` samples of every class, interleaved by class, timestamps
/// spaced 10 ms apart.
pub fn generate_pose_dataset(per_class: usize, sigma: f64, template: &PoseTemplate, seed: u64) -> Vec<(HandFrame, usize)> {
    let mut rng = stream(seed, Stream::Dataset);
    let mut out = Vec::with_capacity(per_class * NUM_CLASSES);
    for i in 0..per_class {
        for class in 0..NUM_CLASSES {
            let t = (i * NUM_CLASSES + class) as f64 * 0.01;
            out.push((synthesize_pose(class, template, sigma, &mut rng, t), class));
        }
    }
    out
}

/// Thumb-index distance that asks for `speed` km/h.
pub fn pinch_distance_for_speed(speed: f64, cfg: &FingerDistanceConfig, lim: &SpeedLimits) -> f64 {
    let frac = ((speed - lim.s_min) / lim.span()).clamp(0.0, 1.0);
    cfg.d + frac * (cfg.r - cfg.d)
}

/// Tap period that asks for `speed` km/h; `None` means stop tapping.
pub fn tap_period_for_speed(speed: f64, cfg: &FingerTappingConfig, lim: &SpeedLimits) -> Option<f64> {
    let frac = (speed - lim.s_min) / lim.span();
    if !(frac > 1e-3) {
        return None;
    }
    Some(cfg.t_min + (1.0 - frac.min(1.0)) * (cfg.t_max - cfg.t_min))
}

pub fn class_for_speed(speed: f64) -> usize {
    (speed.round().max(0.0) as usize).min(NUM_CLASSES - 1)
}

/// Joystick deflections `(left_x, right_y)` for a speed and steering angle.
pub fn gamepad_axes_for(speed: f64, steer_deg: f64, cfg: &GamepadConfig, lim: &SpeedLimits) -> (f64, f64) {
    let ry = ((speed - lim.s_min) / lim.span()).clamp(0.0, 1.0);
    let lx = (steer_deg / cfg.max_steer_deg).clamp(-1.0, 1.0);
    (lx, ry)
}

/// Produces per-tick input frames for one interface. Holds the tapping
/// oscillator phase and the noise stream.
#[derive(Clone, Debug)]
pub struct InputSynthesizer {
    interface: InterfaceId,
    pilot: PilotConfig,
    gestures: GestureConfig,
    lim: SpeedLimits,
    template: PoseTemplate,
    rng: ChaCha8Rng,
    tap_phase: f64,
    /// Left and right hand yaw jitter, radians.
    yaw_jitter: Option<[f64; 2]>,
}

impl InputSynthesizer {
    pub fn new(interface: InterfaceId, pilot: PilotConfig, gestures: GestureConfig, lim: SpeedLimits, seed: u64) -> Self {
        InputSynthesizer {
            interface,
            pilot,
            gestures,
            lim,
            template: PoseTemplate::with_scale(pilot.hand_scale),
            rng: stream(seed, Stream::PilotNoise),
            tap_phase: 0.0,
            yaw_jitter: None,
        }
    }

    /// Frame at time `t` asking for `speed` km/h and a steering angle of
    /// `steer_deg`; `dt` advances the tapping oscillator.
    pub fn invert(&mut self, speed: f64, steer_deg: f64, t: f64, dt: f64) -> InputFrame {
        let speed = self.lim.clamp(speed);
        if self.interface == InterfaceId::Gamepad {
            let (lx, ry) = gamepad_axes_for(speed, steer_deg, &self.gestures.gamepad, &self.lim);
            return InputFrame::Gamepad(GamepadFrame::new(t, lx, ry));
        }

        let sigma = self.pilot.tracking_noise_sigma;
        let vel_sigma = sigma * self.pilot.velocity_noise_per_s;
        let yaw_sigma = sigma / self.pilot.pointing_lever_m;

        let class = class_for_speed(speed);
        let left_ext = if self.interface == InterfaceId::FingerNumber && class == 0 {
            [false; 5]
        } else {
            [true; 5]
        };
        let [left_yaw, right_yaw] = self.advance_yaw_jitter(yaw_sigma, dt);
        let steer = steer_deg.clamp(-179.0, 179.0).to_radians() + left_yaw;
        let mut left = self.template.hand(true, left_ext, steer);

        let mut right = match self.interface {
            InterfaceId::FingerDistance => {
                let l = pinch_distance_for_speed(speed, &self.gestures.finger_distance, &self.lim);
                let mut h = self.template.hand(false, extended_fingers(0), 0.0);
                let (mid, axis) = self.template.pinch_frame();
                h.fingertips[Finger::Thumb as usize] = mid - axis * (l / 2.0);
                h.fingertips[Finger::Index as usize] = mid + axis * (l / 2.0);
                h
            }
            InterfaceId::FingerNumber => self.template.hand(false, extended_fingers(class), 0.0),
            InterfaceId::FingerTapping => {
                let mut h = self.template.hand(false, extended_fingers(1), 0.0);
                let vy = match tap_period_for_speed(speed, &self.gestures.finger_tapping, &self.lim) {
                    Some(period) => {
                        self.tap_phase = (self.tap_phase + dt / period).fract();
                        self.pilot.tap_amplitude * (TAU * self.tap_phase).sin()
                    }
                    None => 0.0,
                };
                h.fingertip_velocities[Finger::Index as usize] = Vec3::new(0.0, vy, 0.0);
                h
            }
            InterfaceId::Gamepad => unreachable!("gamepad handled above"),
        };
        rotate_hand(&mut right, right_yaw);
        add_tip_noise(&mut left, sigma, vel_sigma, &mut self.rng);
        add_tip_noise(&mut right, sigma, vel_sigma, &mut self.rng);
        InputFrame::Hand(HandFrame {
            timestamp: t,
            left,
            right,
        })
    }
}

impl InputSynthesizer {
    /// First-order Gauss-Markov jitter with stationary sigma `yaw_sigma`,
    /// started from its stationary distribution.
    fn advance_yaw_jitter(&mut self, yaw_sigma: f64, dt: f64) -> [f64; 2] {
        let tau = self.pilot.yaw_correlation_s;
        let next = match self.yaw_jitter {
            Some(prev) if tau > 0.0 => {
                let a = (-dt / tau).exp();
                let drive = yaw_sigma * (1.0 - a * a).sqrt();
                prev.map(|j| a * j + gaussian(&mut self.rng, drive))
            }
            _ => [gaussian(&mut self.rng, yaw_sigma), gaussian(&mut self.rng, yaw_sigma)],
        };
        self.yaw_jitter = Some(next);
        next
    }
}

fn rotate_hand(hand: &mut TrackedHand, yaw_rad: f64) {
    if yaw_rad == 0.0 {
        return;
    }
    let c = hand.palm_centre;
    for tip in hand.fingertips.iter_mut() {
        *tip = c + (*tip - c).rotate_y(yaw_rad);
    }
    for vel in hand.fingertip_velocities.iter_mut() {
        *vel = vel.rotate_y(yaw_rad);
    }
    hand.pointing_dir = hand.pointing_dir.rotate_y(yaw_rad);
    hand.palm_normal = hand.palm_normal.rotate_y(yaw_rad);
}

/// Desired speed (km/h) for the pursuit task: PD on the gap error with the
/// ball speed as feed-forward.
pub fn pursuit_policy(obs: &Observation, gains: &PursuitGains, lim: &SpeedLimits) -> f64 {
    let (Some(ball_pos), Some(ball_speed)) = (obs.ball_position, obs.ball_speed) else {
        return lim.s_min;
    };
    let gap = ball_pos.distance(obs.avatar_position);
    let closing = ball_speed - obs.avatar_speed;
    let desired = ball_speed + gains.kp * (gap - gains.target_gap_m) + gains.kd * closing;
    lim.clamp(desired * KMH_PER_MPS)
}

/// Signed angle (radians, counter-clockwise seen from above) from `a` to
/// `b`, both in the x-z plane.
pub fn yaw_between(a: Vec3, b: Vec3) -> f64 {
    let cross_up = a.z * b.x - a.x * b.z;
    cross_up.atan2(a.x * b.x + a.z * b.z)
}

/// Pure pursuit along the gate-centre line. Returns `(speed km/h, steer
/// deg)`: in rate mode the steer is the yaw rate that puts the avatar on
/// the arc through the aim point, in absolute mode it is the heading that
/// points at the aim point.
pub fn waypoint_policy(
    obs: &Observation,
    course: &WaypointCourse,
    gains: &WaypointGains,
    lim: &SpeedLimits,
    mode: SteeringMode,
    turn_gain: f64,
) -> (f64, f64) {
    let p = obs.avatar_position;
    let aim_z = p.z - gains.lookahead_m;
    let aim = Vec3::new(course.centre_line_x(aim_z), 0.0, aim_z);
    let to_aim = aim - Vec3::new(p.x, 0.0, p.z);
    let heading = crate::sim::heading_dir(obs.avatar_heading_deg);
    let alpha = yaw_between(heading, to_aim);
    let dist = to_aim.norm().max(1e-6);
    let curvature = 2.0 * alpha.sin() / dist;
    let speed = lim.clamp(lim.s_max / (1.0 + gains.curvature_slowdown_m * curvature.abs()));
    let steer = match mode {
        SteeringMode::Rate => {
            let v = obs.avatar_speed.max(gains.min_turn_speed);
            (v * curvature).to_degrees() / turn_gain.max(1e-9)
        }
        SteeringMode::Absolute => (obs.avatar_heading_deg + alpha.to_degrees()) / turn_gain.max(1e-9),
    };
    (speed, steer.clamp(-179.0, 179.0))
}
