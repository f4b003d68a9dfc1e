//! Direct-formula metric evaluation and hand-built miniature records.

use locomotion::gestures::InterfaceId;
use locomotion::handmodel::Vec3;
use locomotion::sim::course::{Gate, GateEvent, GateEventKind, WaypointCourse};
use locomotion::sim::record::{RowEvent, ScenarioLayout, TickRow, TrialRecord};
use locomotion::sim::PursuitScenario;

#[derive(Clone, Copy, Debug)]
pub struct PursuitOracle {
    pub d_avg: f64,
    pub d_std: f64,
    pub s_avg: f64,
    pub s_std: f64,
    pub s_inst: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct WaypointOracle {
    pub t_c: f64,
    pub s_l: f64,
    pub d_p: f64,
    pub n_w: usize,
    pub n_c: usize,
}

fn mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    let mut s = 0.0;
    for x in v {
        s += (x - m) * (x - m);
    }
    (s / v.len() as f64).sqrt()
}

pub fn pursuit(rec: &TrialRecord) -> PursuitOracle {
    let ScenarioLayout::Pursuit(sc) = &rec.layout else {
        panic!("pursuit record expected")
    };
    let mut gaps = Vec::new();
    let mut dv = Vec::new();
    for r in &rec.rows {
        let dx = r.avatar_x - 0.0;
        let dz = r.avatar_z - r.ball_z.unwrap();
        gaps.push((dx * dx + dz * dz).sqrt());
        dv.push((r.avatar_speed * 3.6 - r.ball_speed.unwrap() * 3.6).abs());
    }
    // every keyframe change strictly inside the trial
    let mut windows = Vec::new();
    let mut k = 1;
    while k < sc.keyframes_kmh.len() {
        let tk = k as f64 * sc.interval_s;
        if tk < sc.duration_s {
            let inside: Vec<f64> = rec
                .rows
                .iter()
                .zip(&dv)
                .filter(|(r, _)| r.t + 1e-9 >= tk && r.t <= tk + 0.1 + 1e-9)
                .map(|(_, d)| *d)
                .collect();
            if !inside.is_empty() {
                windows.push(mean(&inside));
            }
        }
        k += 1;
    }
    PursuitOracle {
        d_avg: mean(&gaps),
        d_std: pop_std(&gaps),
        s_avg: mean(&dv),
        s_std: pop_std(&dv),
        s_inst: if windows.is_empty() { f64::NAN } else { mean(&windows) },
    }
}

/// x of the polyline start -> gate mid-plane centres at depth `z`.
pub fn polyline_x(course: &WaypointCourse, z: f64) -> f64 {
    let mut pts = vec![(course.start.x, course.start.z)];
    for g in &course.gates {
        pts.push((g.centre_x, (g.front_z + g.back_z) / 2.0));
    }
    if z >= pts[0].1 {
        return pts[0].0;
    }
    for w in pts.windows(2) {
        let ((x0, z0), (x1, z1)) = (w[0], w[1]);
        if z <= z0 && z >= z1 {
            return x0 + (x1 - x0) * (z0 - z) / (z0 - z1);
        }
    }
    pts.last().unwrap().0
}

pub fn waypoints(rec: &TrialRecord) -> WaypointOracle {
    let ScenarioLayout::Waypoints(course) = &rec.layout else {
        panic!("waypoints record expected")
    };
    let t_c = rec.rows.last().unwrap().t - rec.rows[0].t;
    let mut length = 0.0;
    for i in 1..rec.rows.len() {
        let (a, b) = (&rec.rows[i - 1], &rec.rows[i]);
        length += ((b.avatar_x - a.avatar_x).powi(2) + (b.avatar_z - a.avatar_z).powi(2)).sqrt();
    }
    let dev: Vec<f64> = rec
        .rows
        .iter()
        .map(|r| (r.avatar_x - polyline_x(course, r.avatar_z)).abs())
        .collect();
    let count = |k: GateEventKind| rec.events.iter().filter(|e| e.event.kind == k).count();
    WaypointOracle {
        t_c,
        s_l: length / t_c,
        d_p: mean(&dev),
        n_w: count(GateEventKind::Pass),
        n_c: count(GateEventKind::Collision),
    }
}

fn pursuit_row(t: f64, avatar_z: f64, avatar_speed: f64, ball_z: f64, ball_speed: f64) -> TickRow {
    TickRow {
        t,
        avatar_x: 0.0,
        avatar_z,
        avatar_speed,
        heading_deg: 0.0,
        cmd_speed: avatar_speed * 3.6,
        cmd_steer_deg: 0.0,
        ball_z: Some(ball_z),
        ball_speed: Some(ball_speed),
    }
}

fn waypoint_row(t: f64, x: f64, z: f64, speed: f64) -> TickRow {
    TickRow {
        t,
        avatar_x: x,
        avatar_z: z,
        avatar_speed: speed,
        heading_deg: 0.0,
        cmd_speed: speed * 3.6,
        cmd_steer_deg: 0.0,
        ball_z: None,
        ball_speed: None,
    }
}

fn record(layout: ScenarioLayout, rows: Vec<TickRow>, events: Vec<RowEvent>) -> TrialRecord {
    TrialRecord {
        scenario: "mini".into(),
        interface: InterfaceId::FingerDistance,
        pilot: "hand".into(),
        seed: 0,
        dt: 0.01,
        completed: true,
        layout,
        rows,
        events,
    }
}

fn short_pursuit(keyframes: Vec<f64>, interval_s: f64, duration_s: f64) -> ScenarioLayout {
    ScenarioLayout::Pursuit(PursuitScenario {
        keyframes_kmh: keyframes,
        interval_s,
        ball_accel: 0.3,
        initial_gap_m: 3.0,
        duration_s,
    })
}

fn small_course(offsets: &[f64]) -> WaypointCourse {
    let gates = offsets
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let front_z = -(5.0 + k as f64 * 5.1);
            Gate {
                centre_x: x,
                front_z,
                back_z: front_z - 0.1,
                half_width: 1.0,
                bar_width: 0.2,
            }
        })
        .collect::<Vec<_>>();
    let finish_z = gates.last().map_or(-5.0, |g: &Gate| g.back_z) - 5.0;
    WaypointCourse {
        start: Vec3::ZERO,
        gates,
        finish_z,
    }
}

/// Five small records with known answers:
/// locked pursuit, pursuit one metre behind, pursuit with speed errors
/// around keyframe changes, a centred straight run, and an offset run with
/// gate events.
pub fn miniature_records() -> Vec<TrialRecord> {
    let dt = 0.01;
    let v = 1.0;

    let locked: Vec<TickRow> = (0..=50)
        .map(|i| {
            let t = i as f64 * dt;
            pursuit_row(t, -v * t, v, -3.0 - v * t, v)
        })
        .collect();
    let behind: Vec<TickRow> = (0..=50)
        .map(|i| {
            let t = i as f64 * dt;
            pursuit_row(t, -v * t, v, -4.0 - v * t, v)
        })
        .collect();
    // keyframe changes at 0.2 s and 0.4 s; speeds wander on a fixed pattern
    let wobbly: Vec<TickRow> = (0..=60)
        .map(|i| {
            let t = i as f64 * dt;
            let ball_speed = if t < 0.2 { 0.5 } else if t < 0.4 { 0.8 } else { 0.6 };
            let avatar_speed = ball_speed + 0.05 * ((i * 7 % 11) as f64 - 5.0) / 5.0;
            let gap = 3.0 + 0.2 * ((i * 3 % 7) as f64 - 3.0) / 3.0;
            let mut r = pursuit_row(t, -0.9 * t, avatar_speed, -0.9 * t - gap, ball_speed);
            r.avatar_x = 0.1 * ((i % 5) as f64 - 2.0);
            r
        })
        .collect();

    let course = small_course(&[0.0; 3]);
    let straight_speed = 5.0 / 3.6;
    let n = ((-course.finish_z) / (straight_speed * dt)).ceil() as usize;
    let straight: Vec<TickRow> = (0..=n)
        .map(|i| waypoint_row(i as f64 * dt, 0.0, -straight_speed * dt * i as f64, straight_speed))
        .collect();
    let plane = |k: usize| (course.gates[k].front_z + course.gates[k].back_z) / 2.0;
    let straight_events = (0..3)
        .map(|k| RowEvent {
            row: straight.iter().position(|r| r.avatar_z <= plane(k)).unwrap(),
            event: GateEvent {
                gate: k,
                kind: GateEventKind::Pass,
            },
        })
        .collect();

    let offset_course = small_course(&[0.0; 3]);
    let offset: Vec<TickRow> = (0..=300)
        .map(|i| waypoint_row(i as f64 * 0.1, 0.5, -0.1 * i as f64, 1.0))
        .collect();
    let offset_events = vec![
        RowEvent {
            row: 51,
            event: GateEvent {
                gate: 0,
                kind: GateEventKind::Pass,
            },
        },
        RowEvent {
            row: 102,
            event: GateEvent {
                gate: 1,
                kind: GateEventKind::Pass,
            },
        },
        RowEvent {
            row: 150,
            event: GateEvent {
                gate: 2,
                kind: GateEventKind::Collision,
            },
        },
        RowEvent {
            row: 153,
            event: GateEvent {
                gate: 2,
                kind: GateEventKind::Miss,
            },
        },
    ];

    vec![
        record(short_pursuit(vec![3.6; 3], 0.2, 0.5), locked, Vec::new()),
        record(short_pursuit(vec![3.6; 3], 0.2, 0.5), behind, Vec::new()),
        record(short_pursuit(vec![1.8, 2.88, 2.16], 0.2, 0.6), wobbly, Vec::new()),
        record(ScenarioLayout::Waypoints(course), straight, straight_events),
        record(ScenarioLayout::Waypoints(offset_course), offset, offset_events),
    ]
}
