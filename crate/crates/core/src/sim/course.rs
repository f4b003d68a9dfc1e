//! Gate course for the waypoints task and the per-tick gate bookkeeping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::handmodel::Vec3;
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaypointsConfig {
    pub gate_count: usize,
    /// Inner opening width, metres.
    pub opening_width_m: f64,
    /// Inner opening height, metres.
    pub opening_height_m: f64,
    pub depth_m: f64,
    /// Back of one gate to the front of the next, metres.
    pub gap_m: f64,
    /// Lateral gate offsets are uniform in `[-range, range]`.
    pub lateral_range_m: f64,
    /// Start position to the front of the first gate, metres.
    pub start_offset_m: f64,
    /// Back of the last gate to the finish plane, metres.
    pub finish_offset_m: f64,
    /// Frame bar width around the opening, metres.
    pub bar_width_m: f64,
    /// Trials that have not finished by then stop incomplete.
    pub max_duration_s: f64,
}

impl Default for WaypointsConfig {
    fn default() -> Self {
        WaypointsConfig {
            gate_count: 50,
            opening_width_m: 2.0,
            opening_height_m: 2.0,
            depth_m: 0.1,
            gap_m: 5.0,
            lateral_range_m: 2.0,
            start_offset_m: 5.0,
            finish_offset_m: 5.0,
            bar_width_m: 0.2,
            max_duration_s: 900.0,
        }
    }
}

impl WaypointsConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.gate_count == 0 {
            errors.push("waypoints.gate_count must be >= 1".into());
        }
        for (name, v) in [
            ("opening_width_m", self.opening_width_m),
            ("opening_height_m", self.opening_height_m),
            ("depth_m", self.depth_m),
            ("gap_m", self.gap_m),
            ("start_offset_m", self.start_offset_m),
            ("finish_offset_m", self.finish_offset_m),
            ("bar_width_m", self.bar_width_m),
            ("max_duration_s", self.max_duration_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(format!("waypoints.{name} must be a positive number (got {v})"));
            }
        }
        if !(self.lateral_range_m >= 0.0 && self.lateral_range_m.is_finite()) {
            errors.push(format!(
                "waypoints.lateral_range_m must be >= 0 (got {})",
                self.lateral_range_m
            ));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gate {
    pub centre_x: f64,
    /// Face nearer the start (larger z).
    pub front_z: f64,
    pub back_z: f64,
    pub half_width: f64,
    pub bar_width: f64,
}

impl Gate {
    /// z of the plane a pass is judged on (mid-depth).
    pub fn plane_z(&self) -> f64 {
        0.5 * (self.front_z + self.back_z)
    }

    /// The two side posts as `(x_min, x_max, z_min, z_max)`.
    pub fn posts(&self) -> [(f64, f64, f64, f64); 2] {
        let inner_l = self.centre_x - self.half_width;
        let inner_r = self.centre_x + self.half_width;
        [
            (inner_l - self.bar_width, inner_l, self.back_z, self.front_z),
            (inner_r, inner_r + self.bar_width, self.back_z, self.front_z),
        ]
    }

    /// Whether a vertical capsule of `radius` centred at `p` overlaps a
    /// post. The lintel sits above any capsule shorter than the opening, so
    /// only the posts are tested.
    pub fn touches(&self, p: Vec3, radius: f64) -> bool {
        self.posts().iter().any(|&(x0, x1, z0, z1)| {
            let dx = p.x - p.x.clamp(x0, x1);
            let dz = p.z - p.z.clamp(z0, z1);
            dx * dx + dz * dz < radius * radius
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaypointCourse {
    pub start: Vec3,
    pub gates: Vec<Gate>,
    pub finish_z: f64,
}

impl WaypointCourse {
    /// Gate offsets are drawn in gate order from the seed's gate stream.
    pub fn generate(cfg: &WaypointsConfig, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::Gates);
        let offsets: Vec<f64> = (0..cfg.gate_count)
            .map(|_| {
                if cfg.lateral_range_m > 0.0 {
                    rng.random_range(-cfg.lateral_range_m..=cfg.lateral_range_m)
                } else {
                    0.0
                }
            })
            .collect();
        Self::with_offsets(cfg, &offsets)
    }

    pub fn with_offsets(cfg: &WaypointsConfig, offsets: &[f64]) -> Self {
        let pitch = cfg.depth_m + cfg.gap_m;
        let gates: Vec<Gate> = offsets
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let front_z = -(cfg.start_offset_m + k as f64 * pitch);
                Gate {
                    centre_x: x,
                    front_z,
                    back_z: front_z - cfg.depth_m,
                    half_width: cfg.opening_width_m / 2.0,
                    bar_width: cfg.bar_width_m,
                }
            })
            .collect();
        let last_back = gates.last().map_or(-cfg.start_offset_m, |g| g.back_z);
        WaypointCourse {
            start: Vec3::ZERO,
            gates,
            finish_z: last_back - cfg.finish_offset_m,
        }
    }

    /// Vertices `(x, z)` of the reference path: start, then every gate
    /// centre.
    pub fn centre_line(&self) -> Vec<(f64, f64)> {
        std::iter::once((self.start.x, self.start.z))
            .chain(self.gates.iter().map(|g| (g.centre_x, g.plane_z())))
            .collect()
    }

    /// Lateral position of the reference path at depth `z`. Held constant
    /// before the start and past the last gate.
    pub fn centre_line_x(&self, z: f64) -> f64 {
        let mut prev = (self.start.x, self.start.z);
        if z >= prev.1 {
            return prev.0;
        }
        for g in &self.gates {
            let next = (g.centre_x, g.plane_z());
            if z >= next.1 {
                let f = (prev.1 - z) / (prev.1 - next.1);
                return prev.0 + f * (next.0 - prev.0);
            }
            prev = next;
        }
        prev.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateEventKind {
    Pass,
    Miss,
    Collision,
}

impl GateEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GateEventKind::Pass => "pass",
            GateEventKind::Miss => "miss",
            GateEventKind::Collision => "collision",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pass" => Some(GateEventKind::Pass),
            "miss" => Some(GateEventKind::Miss),
            "collision" => Some(GateEventKind::Collision),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateEvent {
    pub gate: usize,
    pub kind: GateEventKind,
}

/// Which gate is due next and which gates the capsule currently touches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateProgress {
    pub next_gate: usize,
    in_contact: Vec<bool>,
}

impl GateProgress {
    pub fn new(course: &WaypointCourse) -> Self {
        GateProgress {
            next_gate: 0,
            in_contact: vec![false; course.gates.len()],
        }
    }

    pub fn all_resolved(&self) -> bool {
        self.next_gate >= self.in_contact.len()
    }
}

/// Events produced by the capsule moving from `p0` to `p1`. Gates resolve
/// strictly in order: crossing a gate's plane inside the opening is a pass,
/// outside it a miss. A collision is reported once per contact episode.
pub fn gate_events(
    p0: Vec3,
    p1: Vec3,
    radius: f64,
    course: &WaypointCourse,
    progress: &mut GateProgress,
) -> Vec<GateEvent> {
    let mut events = Vec::new();
    while let Some(g) = course.gates.get(progress.next_gate) {
        let zc = g.plane_z();
        if p1.z > zc {
            break;
        }
        let x = if p0.z > zc {
            let f = (p0.z - zc) / (p0.z - p1.z);
            p0.x + f * (p1.x - p0.x)
        } else {
            p0.x
        };
        let kind = if (x - g.centre_x).abs() <= g.half_width {
            GateEventKind::Pass
        } else {
            GateEventKind::Miss
        };
        events.push(GateEvent {
            gate: progress.next_gate,
            kind,
        });
        progress.next_gate += 1;
    }

    let reach = radius + 1.0;
    for (i, g) in course.gates.iter().enumerate() {
        if p1.z > g.front_z + reach || p1.z < g.back_z - reach {
            progress.in_contact[i] = false;
            continue;
        }
        let touching = g.touches(p1, radius);
        if touching && !progress.in_contact[i] {
            events.push(GateEvent {
                gate: i,
                kind: GateEventKind::Collision,
            });
        }
        progress.in_contact[i] = touching;
    }
    events
}
