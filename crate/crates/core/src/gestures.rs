//! Locomotion interfaces: three right-hand speed gestures, left-hand
//! steering, and a gamepad mapping. [`LocomotionController`] wraps them into
//! one per-frame state machine.
//!
//! Speeds in this module are km/h; gesture geometry is metres.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, ClassifierModel};
use crate::dsp::{detect_peaks, Biquad, BiquadCoefficients, DspError, PeakDetectorConfig, RingBuffer};
use crate::features::stack_features;
use crate::handmodel::{Finger, GamepadFrame, HandFrame, TrackedHand, Vec3};

/// Command emitted every frame: speed in km/h and a steering angle in degrees
/// (positive turns left, i.e. counter-clockwise seen from above).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocomotionCommand {
    pub speed: f64,
    pub steering_deg: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedLimits {
    /// km/h
    pub s_min: f64,
    /// km/h
    pub s_max: f64,
    /// Avatar acceleration limit, m/s^2.
    pub accel: f64,
}

impl Default for SpeedLimits {
    fn default() -> Self {
        SpeedLimits {
            s_min: 0.0,
            s_max: 5.0,
            accel: 0.5,
        }
    }
}

impl SpeedLimits {
    pub fn clamp(&self, speed: f64) -> f64 {
        speed.clamp(self.s_min, self.s_max)
    }

    pub fn span(&self) -> f64 {
        self.s_max - self.s_min
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerDistanceConfig {
    /// Reference thumb-index distance mapped to `s_max`, metres.
    pub r: f64,
    /// Dead zone, metres.
    pub d: f64,
}

impl Default for FingerDistanceConfig {
    fn default() -> Self {
        FingerDistanceConfig { r: 0.08, d: 0.025 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerTappingConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub cutoff_hz: f64,
    pub buffer_s: f64,
    /// Peak seed threshold on filtered upward velocity, m/s.
    pub threshold: f64,
    pub refractory_s: f64,
}

impl Default for FingerTappingConfig {
    fn default() -> Self {
        FingerTappingConfig {
            t_min: 0.3,
            t_max: 0.95,
            cutoff_hz: 5.0,
            buffer_s: 1.0,
            threshold: 0.15,
            refractory_s: 0.15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteeringMode {
    /// The angle is a yaw-rate command (deg/s per degree of `turn_gain`).
    Rate,
    /// The angle is a heading offset from the initial heading.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringConfig {
    pub smooth_time_s: f64,
}

impl Default for SteeringConfig {
    fn default() -> Self {
        SteeringConfig { smooth_time_s: 0.2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GamepadConfig {
    pub deadzone: f64,
    pub max_steer_deg: f64,
}

impl Default for GamepadConfig {
    fn default() -> Self {
        GamepadConfig {
            deadzone: 0.05,
            max_steer_deg: 45.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GestureConfig {
    pub finger_distance: FingerDistanceConfig,
    pub finger_tapping: FingerTappingConfig,
    pub steering: SteeringConfig,
    pub gamepad: GamepadConfig,
    /// How long the last speed is held after the speed hand is lost, s.
    pub tracking_loss_hold_s: f64,
}

impl Default for GestureConfig {
    fn default() -> Self {
        GestureConfig {
            finger_distance: FingerDistanceConfig::default(),
            finger_tapping: FingerTappingConfig::default(),
            steering: SteeringConfig::default(),
            gamepad: GamepadConfig::default(),
            tracking_loss_hold_s: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterfaceId {
    FingerDistance,
    FingerNumber,
    FingerTapping,
    Gamepad,
}

impl InterfaceId {
    pub const ALL: [InterfaceId; 4] = [
        InterfaceId::FingerDistance,
        InterfaceId::FingerNumber,
        InterfaceId::FingerTapping,
        InterfaceId::Gamepad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InterfaceId::FingerDistance => "finger-distance",
            InterfaceId::FingerNumber => "finger-number",
            InterfaceId::FingerTapping => "finger-tapping",
            InterfaceId::Gamepad => "gamepad",
        }
    }

    pub fn uses_hands(self) -> bool {
        self != InterfaceId::Gamepad
    }
}

impl fmt::Display for InterfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterfaceId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        InterfaceId::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| format!("unknown interface `{s}`"))
    }
}

/// Linear map from thumb-index distance to speed. At or below the dead zone
/// the avatar stops; beyond `r` the speed saturates.
pub fn speed_from_pinch_distance(l: f64, cfg: &FingerDistanceConfig, lim: &SpeedLimits) -> f64 {
    if l <= cfg.d {
        return lim.s_min;
    }
    if l > cfg.r {
        return lim.s_max;
    }
    (l - cfg.d) / (cfg.r - cfg.d) * lim.span() + lim.s_min
}

/// `None` when the hand is not tracked.
pub fn finger_distance_speed(
    right: &TrackedHand,
    cfg: &FingerDistanceConfig,
    lim: &SpeedLimits,
) -> Option<f64> {
    if !right.tracked {
        return None;
    }
    let l = right.tip(Finger::Thumb).distance(right.tip(Finger::Index));
    l.is_finite().then(|| speed_from_pinch_distance(l, cfg, lim))
}

/// Speed selected by the count of extended right-hand fingers; `None` when
/// either hand is missing.
pub fn finger_number_speed(
    frame: &HandFrame,
    model: &ClassifierModel,
    lim: &SpeedLimits,
) -> Result<Option<f64>, ClassifierError> {
    let Ok(features) = stack_features(&frame.left, &frame.right) else {
        return Ok(None);
    };
    let class = model.predict(&features)?;
    Ok(Some(lim.clamp(class as f64)))
}

/// Speed from the interval between two tapping peaks. Intervals at or
/// below `t_min` saturate at `s_max`; beyond `t_max` the speed is `s_min`.
pub fn speed_from_step_interval(t_step: f64, cfg: &FingerTappingConfig, lim: &SpeedLimits) -> f64 {
    if t_step <= cfg.t_min {
        return lim.s_max;
    }
    if t_step > cfg.t_max {
        return lim.s_min;
    }
    (1.0 - (t_step - cfg.t_min) / (cfg.t_max - cfg.t_min)) * lim.span() + lim.s_min
}

/// Stream state of the tapping gesture: filter, 1 s sample queue and the
/// timestamp of the last accepted peak.
#[derive(Clone, Debug)]
pub struct FingerTappingController {
    cfg: FingerTappingConfig,
    lim: SpeedLimits,
    detector: PeakDetectorConfig,
    filter: Biquad,
    buffer: RingBuffer,
    last_peak: Option<f64>,
    speed: f64,
}

impl FingerTappingController {
    pub fn new(cfg: FingerTappingConfig, lim: SpeedLimits, sample_rate_hz: f64) -> Result<Self, DspError> {
        let coeffs = BiquadCoefficients::butterworth_lowpass(cfg.cutoff_hz, sample_rate_hz)?;
        Ok(FingerTappingController {
            cfg,
            lim,
            detector: PeakDetectorConfig {
                threshold: cfg.threshold,
                floor: 0.0,
                refractory_s: cfg.refractory_s,
            },
            filter: Biquad::new(coeffs),
            buffer: RingBuffer::with_duration(cfg.buffer_s, sample_rate_hz),
            last_peak: None,
            speed: lim.s_min,
        })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn last_peak(&self) -> Option<f64> {
        self.last_peak
    }

    /// Feeds one tracked sample of the index fingertip's vertical velocity.
    pub fn update(&mut self, vertical_velocity: f64, now: f64) -> Result<f64, DspError> {
        let filtered = self.filter.process(vertical_velocity)?;
        self.buffer.push(now, filtered);
        for peak in detect_peaks(&self.buffer, &self.detector) {
            let fresh = match self.last_peak {
                None => true,
                Some(prev) => peak.timestamp - prev >= self.cfg.refractory_s,
            };
            if !fresh {
                continue;
            }
            if let Some(prev) = self.last_peak {
                self.speed = speed_from_step_interval(peak.timestamp - prev, &self.cfg, &self.lim);
            }
            self.last_peak = Some(peak.timestamp);
        }
        Ok(self.idle(now))
    }

    /// Applies the no-peak rule: once `t_max` passes without a new peak the
    /// next interval can only map to `s_min`, so the speed drops now.
    pub fn idle(&mut self, now: f64) -> f64 {
        match self.last_peak {
            Some(prev) if now - prev > self.cfg.t_max => self.speed = self.lim.s_min,
            None => self.speed = self.lim.s_min,
            _ => {}
        }
        self.speed
    }
}

/// Signed yaw (degrees) between the travel reference and `h_current`,
/// measured about `up`. `h_current` is first projected onto the plane
/// normal to `up`; `None` if the projection degenerates.
pub fn raw_steering_angle(h_init: Vec3, up: Vec3, h_current: Vec3) -> Option<f64> {
    let projected = h_current - up * h_current.dot(up);
    let h = projected.normalized()?;
    let d = up.dot(h_init.cross(h));
    let cos = (h_init.dot(h) / h_init.norm()).clamp(-1.0, 1.0);
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    Some(sign * cos.acos().to_degrees())
}

/// Critically damped smoothing step, the usual game-engine `SmoothDamp`:
///
/// ```text
/// omega = 2 / smooth_time
/// x     = omega * dt
/// e     = 1 / (1 + x + 0.48 x^2 + 0.235 x^3)
/// c     = current - target
/// tmp   = (velocity + omega * c) * dt
/// velocity' = (velocity - omega * tmp) * e
/// out   = target + (c + tmp) * e
/// ```
///
/// If `out` passes the target it is snapped onto it and the velocity reset.
/// A non-positive `dt` leaves the state unchanged.
pub fn smooth_damp(current: f64, target: f64, velocity: &mut f64, smooth_time: f64, dt: f64) -> f64 {
    if !(dt > 0.0) {
        return current;
    }
    let smooth_time = smooth_time.max(1e-4);
    let omega = 2.0 / smooth_time;
    let x = omega * dt;
    let e = 1.0 / (1.0 + x + 0.48 * x * x + 0.235 * x * x * x);
    let change = current - target;
    let tmp = (*velocity + omega * change) * dt;
    *velocity = (*velocity - omega * tmp) * e;
    let mut out = target + (change + tmp) * e;
    if (target - current > 0.0) == (out > target) {
        out = target;
        *velocity = 0.0;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteeringState {
    pub h_init: Vec3,
    pub up: Vec3,
    pub angle_deg: f64,
    pub velocity_deg_s: f64,
    pub smooth_time_s: f64,
}

impl SteeringState {
    pub fn new(smooth_time_s: f64) -> Self {
        SteeringState {
            h_init: Vec3::FORWARD,
            up: Vec3::UP,
            angle_deg: 0.0,
            velocity_deg_s: 0.0,
            smooth_time_s,
        }
    }
}

/// Advances the smoothed steering angle. A lost left hand (or a degenerate
/// pointing direction) steers the target back to zero.
pub fn steering_angle(left: &TrackedHand, state: &mut SteeringState, dt: f64) -> f64 {
    let target = if left.tracked {
        raw_steering_angle(state.h_init, state.up, left.pointing_dir).unwrap_or(0.0)
    } else {
        0.0
    };
    state.angle_deg = smooth_damp(
        state.angle_deg,
        target,
        &mut state.velocity_deg_s,
        state.smooth_time_s,
        dt,
    );
    state.angle_deg
}

pub fn gamepad_command(frame: &GamepadFrame, cfg: &GamepadConfig, lim: &SpeedLimits) -> LocomotionCommand {
    let ry = frame.right_y.clamp(0.0, 1.0);
    let lx = frame.left_x.clamp(-1.0, 1.0);
    let speed = if ry < cfg.deadzone {
        lim.s_min
    } else {
        lim.clamp(lim.s_min + ry * lim.span())
    };
    let steer = if lx.abs() < cfg.deadzone { 0.0 } else { lx * cfg.max_steer_deg };
    LocomotionCommand {
        speed,
        steering_deg: steer,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputFrame {
    Hand(HandFrame),
    Gamepad(GamepadFrame),
}

impl InputFrame {
    pub fn timestamp(&self) -> f64 {
        match self {
            InputFrame::Hand(f) => f.timestamp,
            InputFrame::Gamepad(f) => f.timestamp,
        }
    }
}

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("{interface} expects {expected} frames")]
    WrongInput {
        interface: InterfaceId,
        expected: &'static str,
    },
    #[error("finger-number interface needs a trained classifier model")]
    MissingModel,
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

#[derive(Clone, Debug)]
enum SpeedSource {
    Distance,
    Number(Arc<ClassifierModel>),
    Tapping(Box<FingerTappingController>),
    Gamepad,
}

/// One interface instance for one trial.
#[derive(Clone, Debug)]
pub struct LocomotionController {
    interface: InterfaceId,
    cfg: GestureConfig,
    lim: SpeedLimits,
    source: SpeedSource,
    steering: SteeringState,
    speed: f64,
    last_speed_input: Option<f64>,
    last_time: Option<f64>,
}

impl LocomotionController {
    pub fn new(
        interface: InterfaceId,
        cfg: GestureConfig,
        lim: SpeedLimits,
        sample_rate_hz: f64,
        model: Option<Arc<ClassifierModel>>,
    ) -> Result<Self, ControllerError> {
        let source = match interface {
            InterfaceId::FingerDistance => SpeedSource::Distance,
            InterfaceId::FingerNumber => SpeedSource::Number(model.ok_or(ControllerError::MissingModel)?),
            InterfaceId::FingerTapping => SpeedSource::Tapping(Box::new(FingerTappingController::new(
                cfg.finger_tapping,
                lim,
                sample_rate_hz,
            )?)),
            InterfaceId::Gamepad => SpeedSource::Gamepad,
        };
        Ok(LocomotionController {
            interface,
            cfg,
            lim,
            source,
            steering: SteeringState::new(cfg.steering.smooth_time_s),
            speed: lim.s_min,
            last_speed_input: None,
            last_time: None,
        })
    }

    pub fn interface(&self) -> InterfaceId {
        self.interface
    }

    pub fn steering_state(&self) -> &SteeringState {
        &self.steering
    }

    /// Consumes one frame. Lost tracking never fails: the last speed is held
    /// for `tracking_loss_hold_s`, then drops to `s_min`.
    pub fn step(&mut self, input: &InputFrame) -> Result<LocomotionCommand, ControllerError> {
        let now = input.timestamp();
        let dt = self.last_time.map_or(0.0, |t| now - t);
        self.last_time = Some(now);

        let frame = match (input, &self.source) {
            (InputFrame::Gamepad(g), SpeedSource::Gamepad) => {
                return Ok(gamepad_command(g, &self.cfg.gamepad, &self.lim));
            }
            (InputFrame::Hand(h), src) if !matches!(src, SpeedSource::Gamepad) => h,
            _ => {
                return Err(ControllerError::WrongInput {
                    interface: self.interface,
                    expected: if self.interface.uses_hands() { "hand" } else { "gamepad" },
                })
            }
        };

        let measured = match &mut self.source {
            SpeedSource::Distance => {
                finger_distance_speed(&frame.right, &self.cfg.finger_distance, &self.lim)
            }
            SpeedSource::Number(model) => finger_number_speed(frame, model, &self.lim)?,
            SpeedSource::Tapping(tap) => {
                let vy = frame.right.tip_velocity(Finger::Index).y;
                if frame.right.tracked && vy.is_finite() {
                    Some(tap.update(vy, now)?)
                } else {
                    tap.idle(now);
                    None
                }
            }
            SpeedSource::Gamepad => unreachable!("gamepad handled above"),
        };

        match measured {
            Some(s) => {
                self.speed = self.lim.clamp(s);
                self.last_speed_input = Some(now);
            }
            None => {
                let expired = self
                    .last_speed_input
                    .is_none_or(|t| now - t > self.cfg.tracking_loss_hold_s);
                if expired {
                    self.speed = self.lim.s_min;
                }
            }
        }

        let steer = steering_angle(&frame.left, &mut self.steering, dt);
        Ok(LocomotionCommand {
            speed: self.speed,
            steering_deg: steer,
        })
    }
}
