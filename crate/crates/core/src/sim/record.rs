//! Per-tick trial trace and its CSV form.
//!
//! The file starts with `#` header lines describing the trial and the
//! scenario layout, followed by one CSV row per tick. Numbers use the
//! shortest text that parses back to the same `f64`, so a record survives a
//! write/parse cycle exactly.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use super::course::{Gate, GateEvent, GateEventKind, WaypointCourse};
use super::{PursuitScenario, ScenarioKind};
use crate::gestures::InterfaceId;
use crate::handmodel::Vec3;

pub const RECORD_MAGIC: &str = "# locomotion-trial 1";
pub const COLUMNS: &str = "t_s,avatar_x_m,avatar_z_m,avatar_speed_mps,heading_deg,cmd_speed_kmh,cmd_steer_deg,ball_z_m,ball_speed_mps,events";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickRow {
    pub t: f64,
    pub avatar_x: f64,
    pub avatar_z: f64,
    /// m/s
    pub avatar_speed: f64,
    pub heading_deg: f64,
    /// km/h
    pub cmd_speed: f64,
    pub cmd_steer_deg: f64,
    pub ball_z: Option<f64>,
    /// m/s
    pub ball_speed: Option<f64>,
}

impl TickRow {
    pub fn avatar_position(&self) -> Vec3 {
        Vec3::new(self.avatar_x, 0.0, self.avatar_z)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioLayout {
    Pursuit(PursuitScenario),
    Waypoints(WaypointCourse),
}

impl ScenarioLayout {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioLayout::Pursuit(_) => ScenarioKind::Pursuit,
            ScenarioLayout::Waypoints(_) => ScenarioKind::Waypoints,
        }
    }
}

/// An event together with the index of the row it happened on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowEvent {
    pub row: usize,
    pub event: GateEvent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    /// Scenario label, usually the scenario file's stem.
    pub scenario: String,
    pub interface: InterfaceId,
    pub pilot: String,
    pub seed: u64,
    pub dt: f64,
    /// Pursuit: ran the full length. Waypoints: reached the finish.
    pub completed: bool,
    pub layout: ScenarioLayout,
    pub rows: Vec<TickRow>,
    pub events: Vec<RowEvent>,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a trial record (missing '{RECORD_MAGIC}')")]
    BadMagic,
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

fn malformed(line: usize, msg: impl Into<String>) -> RecordError {
    RecordError::Malformed {
        line,
        msg: msg.into(),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl TrialRecord {
    pub fn kind(&self) -> ScenarioKind {
        self.layout.kind()
    }

    pub fn count(&self, kind: GateEventKind) -> usize {
        self.events.iter().filter(|e| e.event.kind == kind).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{RECORD_MAGIC}");
        let _ = writeln!(
            s,
            "# scenario={} name={} interface={} pilot={} seed={} dt={} completed={}",
            self.kind().as_str(),
            self.scenario,
            self.interface,
            self.pilot,
            self.seed,
            self.dt,
            self.completed
        );
        match &self.layout {
            ScenarioLayout::Pursuit(p) => {
                let _ = writeln!(
                    s,
                    "# pursuit interval_s={} ball_accel={} initial_gap_m={} duration_s={} keyframes_kmh={}",
                    p.interval_s,
                    p.ball_accel,
                    p.initial_gap_m,
                    p.duration_s,
                    join(&p.keyframes_kmh)
                );
            }
            ScenarioLayout::Waypoints(c) => {
                let _ = writeln!(
                    s,
                    "# course start_x={} start_z={} finish_z={} gates={}",
                    c.start.x,
                    c.start.z,
                    c.finish_z,
                    c.gates.len()
                );
                for (i, g) in c.gates.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "# gate {i} centre_x={} front_z={} back_z={} half_width={} bar_width={}",
                        g.centre_x, g.front_z, g.back_z, g.half_width, g.bar_width
                    );
                }
            }
        }
        let _ = writeln!(s, "{COLUMNS}");
        let mut ev = self.events.iter().peekable();
        for (i, r) in self.rows.iter().enumerate() {
            let mut tags = Vec::new();
            while let Some(e) = ev.next_if(|e| e.row == i) {
                tags.push(format!("{}:{}", e.event.kind.as_str(), e.event.gate));
            }
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.avatar_x,
                r.avatar_z,
                r.avatar_speed,
                r.heading_deg,
                r.cmd_speed,
                r.cmd_steer_deg,
                opt(r.ball_z),
                opt(r.ball_speed),
                tags.join(";")
            );
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    pub fn parse_csv<R: BufRead>(reader: R) -> Result<TrialRecord, RecordError> {
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
        let first = lines.next().map(|(_, l)| l).transpose()?;
        if first.as_deref().map(str::trim_end) != Some(RECORD_MAGIC) {
            return Err(RecordError::BadMagic);
        }

        let mut meta: Option<(ScenarioKind, String, InterfaceId, String, u64, f64, bool)> = None;
        let mut pursuit: Option<PursuitScenario> = None;
        let mut course: Option<WaypointCourse> = None;
        let mut rows = Vec::new();
        let mut events = Vec::new();
        let mut saw_columns = false;

        for (n, line) in lines {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# ") {
                let mut words = rest.split_whitespace();
                match words.next().unwrap_or("") {
                    head if head.starts_with("scenario=") => {
                        let f = Fields::new(n, rest.split_whitespace())?;
                        meta = Some((
                            f.get("scenario")?,
                            f.get("name")?,
                            f.get("interface")?,
                            f.get("pilot")?,
                            f.get("seed")?,
                            f.get("dt")?,
                            f.get("completed")?,
                        ));
                    }
                    "pursuit" => {
                        let f = Fields::new(n, words)?;
                        let keyframes = f
                            .raw("keyframes_kmh")?
                            .split(',')
                            .map(|v| parse_field(n, "keyframes_kmh", v))
                            .collect::<Result<Vec<f64>, _>>()?;
                        pursuit = Some(PursuitScenario {
                            keyframes_kmh: keyframes,
                            interval_s: f.get("interval_s")?,
                            ball_accel: f.get("ball_accel")?,
                            initial_gap_m: f.get("initial_gap_m")?,
                            duration_s: f.get("duration_s")?,
                        });
                    }
                    "course" => {
                        let f = Fields::new(n, words)?;
                        course = Some(WaypointCourse {
                            start: Vec3::new(f.get("start_x")?, 0.0, f.get("start_z")?),
                            gates: Vec::with_capacity(f.get("gates")?),
                            finish_z: f.get("finish_z")?,
                        });
                    }
                    "gate" => {
                        let c = course
                            .as_mut()
                            .ok_or_else(|| malformed(n, "gate line before course line"))?;
                        let idx: usize = parse_field(n, "gate index", words.next().unwrap_or(""))?;
                        if idx != c.gates.len() {
                            return Err(malformed(n, format!("gate {idx} out of order")));
                        }
                        let f = Fields::new(n, words)?;
                        c.gates.push(Gate {
                            centre_x: f.get("centre_x")?,
                            front_z: f.get("front_z")?,
                            back_z: f.get("back_z")?,
                            half_width: f.get("half_width")?,
                            bar_width: f.get("bar_width")?,
                        });
                    }
                    _ => {}
                }
                continue;
            }
            if !saw_columns {
                if line != COLUMNS {
                    return Err(malformed(n, "expected the column header"));
                }
                saw_columns = true;
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 10 {
                return Err(malformed(n, format!("expected 10 columns, found {}", cells.len())));
            }
            let num = |i: usize, name: &str| parse_field::<f64>(n, name, cells[i]);
            let opt_num = |i: usize, name: &str| -> Result<Option<f64>, RecordError> {
                if cells[i].is_empty() {
                    Ok(None)
                } else {
                    parse_field(n, name, cells[i]).map(Some)
                }
            };
            let row_index = rows.len();
            rows.push(TickRow {
                t: num(0, "t_s")?,
                avatar_x: num(1, "avatar_x_m")?,
                avatar_z: num(2, "avatar_z_m")?,
                avatar_speed: num(3, "avatar_speed_mps")?,
                heading_deg: num(4, "heading_deg")?,
                cmd_speed: num(5, "cmd_speed_kmh")?,
                cmd_steer_deg: num(6, "cmd_steer_deg")?,
                ball_z: opt_num(7, "ball_z_m")?,
                ball_speed: opt_num(8, "ball_speed_mps")?,
            });
            for tag in cells[9].split(';').filter(|t| !t.is_empty()) {
                let (kind, gate) = tag
                    .split_once(':')
                    .ok_or_else(|| malformed(n, format!("bad event '{tag}'")))?;
                let kind = GateEventKind::parse(kind).ok_or_else(|| malformed(n, format!("bad event '{tag}'")))?;
                events.push(RowEvent {
                    row: row_index,
                    event: GateEvent {
                        gate: parse_field(n, "event gate", gate)?,
                        kind,
                    },
                });
            }
        }

        let (kind, scenario, interface, pilot, seed, dt, completed) =
            meta.ok_or_else(|| malformed(1, "missing trial header line"))?;
        let layout = match kind {
            ScenarioKind::Pursuit => ScenarioLayout::Pursuit(pursuit.ok_or_else(|| malformed(1, "missing pursuit line"))?),
            ScenarioKind::Waypoints => {
                ScenarioLayout::Waypoints(course.ok_or_else(|| malformed(1, "missing course line"))?)
            }
        };
        Ok(TrialRecord {
            scenario,
            interface,
            pilot,
            seed,
            dt,
            completed,
            layout,
            rows,
            events,
        })
    }
}

fn parse_field<T: FromStr>(line: usize, name: &str, s: &str) -> Result<T, RecordError> {
    s.parse()
        .map_err(|_| malformed(line, format!("invalid {name} '{s}'")))
}

struct Fields<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn new(line: usize, words: impl Iterator<Item = &'a str>) -> Result<Self, RecordError> {
        let pairs = words
            .map(|w| {
                w.split_once('=')
                    .ok_or_else(|| malformed(line, format!("expected key=value, got '{w}'")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Fields { line, pairs })
    }

    fn raw(&self, key: &str) -> Result<&'a str, RecordError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| malformed(self.line, format!("missing '{key}'")))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, RecordError> {
        parse_field(self.line, key, self.raw(key)?)
    }
}
