//! Hand-tracking domain types and the line-oriented hand/gamepad log format.
//!
//! Coordinates are right-handed, metres, `+y` up, and `-z` is the forward
//! direction of travel.
//!
//! A hand log holds one JSON object per line. Keys are flat:
//!
//! ```text
//! {"t":..,"l.tracked":true,"l.palm":[x,y,z],"l.normal":[..],"l.dir":[..],
//!  "l.tip0":[..],..,"l.tip4":[..],"l.vel0":[..],..,"l.vel4":[..], "r.tracked":.. }
//! ```
//!
//! Numbers are written in scientific notation with 17 significant digits so
//! that parsing a written log reproduces every `f64` bit-for-bit.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const FORWARD: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 1e-12 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotation about the `+y` axis by `angle_rad` (counter-clockwise seen from above).
    pub fn rotate_y(self, angle_rad: f64) -> Vec3 {
        let (s, c) = angle_rad.sin_cos();
        Vec3::new(c * self.x + s * self.z, self.y, -s * self.x + c * self.z)
    }

    fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Fingertip slots, thumb to pinky. The order is shared by feature
/// extraction, pose templates and the log format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Finger {
    Thumb = 0,
    Index = 1,
    Middle = 2,
    Ring = 3,
    Pinky = 4,
}

impl Finger {
    pub const ALL: [Finger; 5] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Pinky,
    ];
}

/// One tracked hand as reported by a hand-tracking sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackedHand {
    pub fingertips: [Vec3; 5],
    pub palm_centre: Vec3,
    /// Unit normal out of the palm.
    pub palm_normal: Vec3,
    /// Unit vector from the palm towards the fingertips.
    pub pointing_dir: Vec3,
    pub fingertip_velocities: [Vec3; 5],
    pub tracked: bool,
}

impl TrackedHand {
    /// A hand that the sensor lost: `tracked == false` and all geometry zero.
    pub fn untracked() -> Self {
        TrackedHand {
            fingertips: [Vec3::ZERO; 5],
            palm_centre: Vec3::ZERO,
            palm_normal: Vec3::ZERO,
            pointing_dir: Vec3::ZERO,
            fingertip_velocities: [Vec3::ZERO; 5],
            tracked: false,
        }
    }

    pub fn tip(&self, finger: Finger) -> Vec3 {
        self.fingertips[finger as usize]
    }

    pub fn tip_velocity(&self, finger: Finger) -> Vec3 {
        self.fingertip_velocities[finger as usize]
    }

    /// Checks the type invariants: finite geometry, unit palm normal and
    /// pointing direction for tracked hands, zeroed geometry otherwise.
    pub fn is_valid(&self) -> bool {
        let mut geometry = self
            .fingertips
            .iter()
            .chain(self.fingertip_velocities.iter())
            .chain([&self.palm_centre, &self.palm_normal, &self.pointing_dir]);
        if self.tracked {
            geometry.all(|v| v.is_finite())
                && (self.palm_normal.norm() - 1.0).abs() <= 1e-6
                && (self.pointing_dir.norm() - 1.0).abs() <= 1e-6
        } else {
            geometry.all(|v| *v == Vec3::ZERO)
        }
    }

    /// The zeroed form written to logs for untracked hands.
    fn canonical(&self) -> TrackedHand {
        if self.tracked {
            *self
        } else {
            TrackedHand::untracked()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandFrame {
    pub timestamp: f64,
    pub left: TrackedHand,
    pub right: TrackedHand,
}

/// Gamepad sample. `left_x` steers in `[-1, 1]`, `right_y` drives in `[0, 1]`
/// (backwards travel is disabled).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GamepadFrame {
    pub timestamp: f64,
    pub left_x: f64,
    pub right_y: f64,
}

impl GamepadFrame {
    pub fn new(timestamp: f64, left_x: f64, right_y: f64) -> Self {
        GamepadFrame {
            timestamp,
            left_x: clamp_or_zero(left_x, -1.0, 1.0),
            right_y: clamp_or_zero(right_y, 0.0, 1.0),
        }
    }
}

fn clamp_or_zero(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(lo, hi)
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {kind}")]
    Line { line: usize, kind: LineError },
}

#[derive(Debug, Error, PartialEq)]
pub enum LineError {
    #[error("invalid UTF-8")]
    Utf8,
    #[error("malformed record: {0}")]
    Syntax(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid value for field `{0}`")]
    InvalidField(String),
    #[error("timestamp {got} does not increase past previous timestamp {prev}")]
    NonMonotonic { prev: f64, got: f64 },
}

impl LogError {
    /// Line number (1-based) of a record-level failure.
    pub fn line(&self) -> Option<usize> {
        match self {
            LogError::Line { line, .. } => Some(*line),
            LogError::Io(_) => None,
        }
    }
}

fn fmt_num(out: &mut String, v: f64) {
    // 17 significant digits round-trip every finite f64
    let _ = write!(out, "{v:.16e}");
}

fn fmt_vec(out: &mut String, key: &str, v: Vec3) {
    let _ = write!(out, ",\"{key}\":[");
    for (i, c) in v.to_array().into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        fmt_num(out, c);
    }
    out.push(']');
}

fn write_hand(out: &mut String, prefix: char, hand: &TrackedHand) {
    let h = hand.canonical();
    let _ = write!(out, ",\"{prefix}.tracked\":{}", h.tracked);
    fmt_vec(out, &format!("{prefix}.palm"), h.palm_centre);
    fmt_vec(out, &format!("{prefix}.normal"), h.palm_normal);
    fmt_vec(out, &format!("{prefix}.dir"), h.pointing_dir);
    for (i, tip) in h.fingertips.iter().enumerate() {
        fmt_vec(out, &format!("{prefix}.tip{i}"), *tip);
    }
    for (i, vel) in h.fingertip_velocities.iter().enumerate() {
        fmt_vec(out, &format!("{prefix}.vel{i}"), *vel);
    }
}

/// Serializes a single frame as one log line (without the newline).
pub fn hand_frame_line(frame: &HandFrame) -> String {
    let mut out = String::with_capacity(1400);
    out.push_str("{\"t\":");
    fmt_num(&mut out, frame.timestamp);
    write_hand(&mut out, 'l', &frame.left);
    write_hand(&mut out, 'r', &frame.right);
    out.push('}');
    out
}

pub fn write_hand_log<W: Write>(frames: &[HandFrame], mut w: W) -> io::Result<()> {
    for f in frames {
        writeln!(w, "{}", hand_frame_line(f))?;
    }
    Ok(())
}

pub fn gamepad_frame_line(frame: &GamepadFrame) -> String {
    let mut out = String::with_capacity(96);
    out.push_str("{\"t\":");
    fmt_num(&mut out, frame.timestamp);
    out.push_str(",\"lx\":");
    fmt_num(&mut out, frame.left_x);
    out.push_str(",\"ry\":");
    fmt_num(&mut out, frame.right_y);
    out.push('}');
    out
}

pub fn write_gamepad_log<W: Write>(frames: &[GamepadFrame], mut w: W) -> io::Result<()> {
    for f in frames {
        writeln!(w, "{}", gamepad_frame_line(f))?;
    }
    Ok(())
}

fn get_num(map: &Map<String, Value>, key: &str) -> Result<f64, LineError> {
    let v = map
        .get(key)
        .ok_or_else(|| LineError::MissingField(key.to_string()))?;
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| LineError::InvalidField(key.to_string()))
}

fn get_vec(map: &Map<String, Value>, key: &str) -> Result<Vec3, LineError> {
    let v = map
        .get(key)
        .ok_or_else(|| LineError::MissingField(key.to_string()))?;
    let invalid = || LineError::InvalidField(key.to_string());
    let arr = v.as_array().filter(|a| a.len() == 3).ok_or_else(invalid)?;
    let mut c = [0.0; 3];
    for (slot, item) in c.iter_mut().zip(arr) {
        *slot = item.as_f64().filter(|x| x.is_finite()).ok_or_else(invalid)?;
    }
    Ok(Vec3::new(c[0], c[1], c[2]))
}

fn read_hand(map: &Map<String, Value>, prefix: char) -> Result<TrackedHand, LineError> {
    let key = format!("{prefix}.tracked");
    let tracked = map
        .get(&key)
        .ok_or_else(|| LineError::MissingField(key.clone()))?
        .as_bool()
        .ok_or(LineError::InvalidField(key))?;
    let mut hand = TrackedHand {
        tracked,
        palm_centre: get_vec(map, &format!("{prefix}.palm"))?,
        palm_normal: get_vec(map, &format!("{prefix}.normal"))?,
        pointing_dir: get_vec(map, &format!("{prefix}.dir"))?,
        ..TrackedHand::untracked()
    };
    for i in 0..5 {
        hand.fingertips[i] = get_vec(map, &format!("{prefix}.tip{i}"))?;
        hand.fingertip_velocities[i] = get_vec(map, &format!("{prefix}.vel{i}"))?;
    }
    Ok(hand.canonical())
}

fn parse_object(text: &str) -> Result<Map<String, Value>, LineError> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(LineError::Syntax("expected an object".into())),
        Err(e) => Err(LineError::Syntax(e.to_string())),
    }
}

/// Reads non-blank lines, hands each one to `parse` and enforces strictly
/// increasing timestamps.
fn parse_lines<R, T, F>(reader: R, mut parse: F, stamp: fn(&T) -> f64) -> Result<Vec<T>, LogError>
where
    R: BufRead,
    F: FnMut(&Map<String, Value>) -> Result<T, LineError>,
{
    let mut out: Vec<T> = Vec::new();
    for (idx, raw) in reader.split(b'\n').enumerate() {
        let line = idx + 1;
        let raw = raw?;
        let err = |kind| LogError::Line { line, kind };
        let text = std::str::from_utf8(&raw).map_err(|_| err(LineError::Utf8))?;
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        let map = parse_object(text).map_err(err)?;
        let item = parse(&map).map_err(err)?;
        if let Some(prev) = out.last().map(stamp) {
            let got = stamp(&item);
            if got <= prev {
                return Err(err(LineError::NonMonotonic { prev, got }));
            }
        }
        out.push(item);
    }
    Ok(out)
}

/// Parses a hand log. Blank lines are ignored.
pub fn parse_hand_log<R: BufRead>(reader: R) -> Result<Vec<HandFrame>, LogError> {
    parse_lines(
        reader,
        |map| {
            Ok(HandFrame {
                timestamp: get_num(map, "t")?,
                left: read_hand(map, 'l')?,
                right: read_hand(map, 'r')?,
            })
        },
        |f: &HandFrame| f.timestamp,
    )
}

pub fn parse_gamepad_log<R: BufRead>(reader: R) -> Result<Vec<GamepadFrame>, LogError> {
    parse_lines(
        reader,
        |map| {
            let lx = get_num(map, "lx")?;
            let ry = get_num(map, "ry")?;
            if !(-1.0..=1.0).contains(&lx) {
                return Err(LineError::InvalidField("lx".into()));
            }
            if !(0.0..=1.0).contains(&ry) {
                return Err(LineError::InvalidField("ry".into()));
            }
            Ok(GamepadFrame {
                timestamp: get_num(map, "t")?,
                left_x: lx,
                right_y: ry,
            })
        },
        |f: &GamepadFrame| f.timestamp,
    )
}
