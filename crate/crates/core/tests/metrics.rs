mod common;

use proptest::prelude::*;

use common::close;
use common::oracle::{self, miniature_records};
use locomotion::gestures::InterfaceId;
use locomotion::handmodel::Vec3;
use locomotion::metrics::{
    aggregate, aggregate_csv, metrics_csv, pursuit_metrics, waypoint_metrics, MetricsError, MetricsRow, TrialMetrics,
};
use locomotion::sim::course::{Gate, GateEvent, GateEventKind, WaypointCourse};
use locomotion::sim::record::{RowEvent, ScenarioLayout, TickRow, TrialRecord};
use locomotion::sim::{PursuitScenario, ScenarioKind};

const TOL: f64 = 1e-9;

fn row(t: f64, x: f64, z: f64, v: f64, ball: Option<(f64, f64)>) -> TickRow {
    TickRow {
        t,
        avatar_x: x,
        avatar_z: z,
        avatar_speed: v,
        heading_deg: 0.0,
        cmd_speed: v * 3.6,
        cmd_steer_deg: 0.0,
        ball_z: ball.map(|b| b.0),
        ball_speed: ball.map(|b| b.1),
    }
}

fn record(layout: ScenarioLayout, dt: f64, rows: Vec<TickRow>, events: Vec<RowEvent>) -> TrialRecord {
    TrialRecord {
        scenario: "random".into(),
        interface: InterfaceId::FingerTapping,
        pilot: "hand".into(),
        seed: 1,
        dt,
        completed: true,
        layout,
        rows,
        events,
    }
}

fn pursuit_record() -> impl Strategy<Value = TrialRecord> {
    (
        prop::collection::vec(prop::sample::select(vec![1.0, 2.0, 3.0, 4.0, 5.0]), 1..8),
        0.03..0.4f64,
        prop::sample::select(vec![0.01, 0.02, 0.05]),
        prop::collection::vec((-1.0..1.0f64, -2.0..2.0f64, 0.0..2.0f64, 1.0..6.0f64, 0.0..2.0f64), 1..150),
    )
        .prop_map(|(keyframes_kmh, interval_s, dt, samples)| {
            let duration_s = samples.len() as f64 * dt;
            let rows = samples
                .iter()
                .enumerate()
                .map(|(i, &(x, z, v, gap, bv))| row(i as f64 * dt, x, z, v, Some((z - gap, bv))))
                .collect();
            let layout = ScenarioLayout::Pursuit(PursuitScenario {
                keyframes_kmh,
                interval_s,
                ball_accel: 0.3,
                initial_gap_m: 3.0,
                duration_s,
            });
            record(layout, dt, rows, Vec::new())
        })
}

fn course(offsets: &[f64], depth: f64, pitch: f64) -> WaypointCourse {
    let gates: Vec<Gate> = offsets
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let front_z = -(2.0 + k as f64 * pitch);
            Gate {
                centre_x: x,
                front_z,
                back_z: front_z - depth,
                half_width: 1.0,
                bar_width: 0.2,
            }
        })
        .collect();
    let finish_z = gates.last().map_or(-2.0, |g| g.back_z) - 2.0;
    WaypointCourse {
        start: Vec3::ZERO,
        gates,
        finish_z,
    }
}

fn waypoint_record() -> impl Strategy<Value = TrialRecord> {
    (
        prop::collection::vec(-1.5..1.5f64, 0..6),
        0.05..0.3f64,
        1.0..4.0f64,
        prop::collection::vec((-2.0..2.0f64, 0.0..0.1f64, 0.0..2.0f64), 2..150),
        prop::collection::vec((0usize..150, 0usize..6, 0usize..3), 0..6),
    )
        .prop_map(|(offsets, depth, pitch, steps, raw_events)| {
            let dt = 0.05;
            let mut z = 0.5;
            let rows: Vec<TickRow> = steps
                .iter()
                .enumerate()
                .map(|(i, &(x, dz, v))| {
                    z -= dz;
                    row(i as f64 * dt, x, z, v, None)
                })
                .collect();
            let kinds = [GateEventKind::Pass, GateEventKind::Miss, GateEventKind::Collision];
            let mut events: Vec<RowEvent> = raw_events
                .iter()
                .map(|&(r, gate, kind)| RowEvent {
                    row: r % rows.len(),
                    event: GateEvent { gate, kind: kinds[kind] },
                })
                .collect();
            events.sort_by_key(|e| e.row);
            record(ScenarioLayout::Waypoints(course(&offsets, depth, pitch)), dt, rows, events)
        })
}

fn scale_positions(rec: &mut TrialRecord, k: f64) {
    for r in &mut rec.rows {
        r.avatar_x *= k;
        r.avatar_z *= k;
        r.ball_z = r.ball_z.map(|z| z * k);
    }
    if let ScenarioLayout::Waypoints(c) = &mut rec.layout {
        c.start = c.start * k;
        c.finish_z *= k;
        for g in &mut c.gates {
            g.centre_x *= k;
            g.front_z *= k;
            g.back_z *= k;
        }
    }
}

fn in_some_window(t: f64, rec: &TrialRecord) -> bool {
    let ScenarioLayout::Pursuit(sc) = &rec.layout else {
        return false;
    };
    sc.boundaries().iter().any(|tk| t >= tk - 1e-9 && t <= tk + 0.1 + 1e-9)
}

fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || close(a, b, TOL)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pursuit_metrics_match_oracle(rec in pursuit_record()) {
        let m = pursuit_metrics(&rec).unwrap();
        let o = oracle::pursuit(&rec);
        prop_assert!(same(m.d_avg, o.d_avg), "{} vs {}", m.d_avg, o.d_avg);
        prop_assert!(same(m.d_std, o.d_std));
        prop_assert!(same(m.s_avg, o.s_avg));
        prop_assert!(same(m.s_std, o.s_std));
        prop_assert!(same(m.s_inst, o.s_inst), "{} vs {}", m.s_inst, o.s_inst);
        prop_assert!(m.d_std >= 0.0 && m.s_std >= 0.0);
    }

    #[test]
    fn waypoint_metrics_match_oracle(rec in waypoint_record()) {
        let m = waypoint_metrics(&rec).unwrap();
        let o = oracle::waypoints(&rec);
        prop_assert!(same(m.t_c, o.t_c));
        prop_assert!(same(m.s_l, o.s_l));
        prop_assert!(same(m.d_p, o.d_p), "{} vs {}", m.d_p, o.d_p);
        prop_assert_eq!(m.n_w, o.n_w);
        prop_assert_eq!(m.n_c, o.n_c);
    }

    #[test]
    fn reversing_rows_keeps_distance_statistics(rec in pursuit_record()) {
        let mut reversed = rec.clone();
        reversed.rows.reverse();
        let (a, b) = (pursuit_metrics(&rec).unwrap(), pursuit_metrics(&reversed).unwrap());
        prop_assert!(close(a.d_avg, b.d_avg, TOL));
        prop_assert!((a.d_std - b.d_std).abs() <= TOL * a.d_avg.max(1.0));
    }

    #[test]
    fn scaling_positions_scales_distances(rec in pursuit_record(), k in 0.1..10.0f64) {
        let mut scaled = rec.clone();
        scale_positions(&mut scaled, k);
        let (a, b) = (pursuit_metrics(&rec).unwrap(), pursuit_metrics(&scaled).unwrap());
        prop_assert!(close(b.d_avg, k * a.d_avg, TOL));
        prop_assert!((b.d_std - k * a.d_std).abs() <= TOL * k * a.d_avg.max(1.0));
        prop_assert_eq!(a.s_avg, b.s_avg);
    }

    #[test]
    fn scaling_course_scales_path_deviation(rec in waypoint_record(), k in 0.1..10.0f64) {
        let mut scaled = rec.clone();
        scale_positions(&mut scaled, k);
        let (a, b) = (waypoint_metrics(&rec).unwrap(), waypoint_metrics(&scaled).unwrap());
        prop_assert!((b.d_p - k * a.d_p).abs() <= TOL * k * a.d_p.max(1.0));
        prop_assert!(close(b.s_l, k * a.s_l, TOL));
        prop_assert_eq!(a.t_c, b.t_c);
    }

    #[test]
    fn instant_speed_error_reads_only_window_rows(rec in pursuit_record(), pick in any::<prop::sample::Index>(), delta in 0.1..3.0f64) {
        let base = pursuit_metrics(&rec).unwrap().s_inst;
        let i = pick.index(rec.rows.len());
        let mut bumped = rec.clone();
        let r = &mut bumped.rows[i];
        let ball = r.ball_speed.unwrap();
        r.avatar_speed += if r.avatar_speed >= ball { delta } else { -delta };
        let after = pursuit_metrics(&bumped).unwrap().s_inst;
        if in_some_window(rec.rows[i].t, &rec) {
            prop_assert!(after > base, "{} !> {}", after, base);
        } else {
            prop_assert!(base.to_bits() == after.to_bits() || (base.is_nan() && after.is_nan()));
        }
    }
}

#[test]
fn miniature_records_have_known_answers() {
    let recs = miniature_records();
    let locked = pursuit_metrics(&recs[0]).unwrap();
    assert!((locked.d_avg - 3.0).abs() < TOL && locked.d_std < TOL);
    assert_eq!((locked.s_avg, locked.s_std, locked.s_inst), (0.0, 0.0, 0.0));
    let behind = pursuit_metrics(&recs[1]).unwrap();
    assert!((behind.d_avg - 4.0).abs() < TOL && behind.d_std < TOL);

    let straight = waypoint_metrics(&recs[3]).unwrap();
    assert_eq!((straight.n_w, straight.n_c, straight.d_p), (3, 0, 0.0));
    assert!((straight.s_l - 5.0 / 3.6).abs() < TOL);

    let offset = waypoint_metrics(&recs[4]).unwrap();
    assert!((offset.d_p - 0.5).abs() < TOL);
    assert!((offset.t_c - 30.0).abs() < TOL && (offset.s_l - 1.0).abs() < TOL);
    assert_eq!((offset.n_w, offset.n_c), (2, 1));

    for rec in &recs {
        let m = TrialMetrics::of(rec).unwrap();
        let expect = match rec.kind() {
            ScenarioKind::Pursuit => {
                let o = oracle::pursuit(rec);
                vec![o.d_avg, o.d_std, o.s_avg, o.s_std, o.s_inst]
            }
            ScenarioKind::Waypoints => {
                let o = oracle::waypoints(rec);
                vec![o.t_c, o.s_l, o.d_p, o.n_w as f64, o.n_c as f64]
            }
        };
        for ((name, got), want) in m.fields().into_iter().zip(expect) {
            assert!(close(got, want, TOL), "{name}: {got} vs {want}");
        }
    }
}

#[test]
fn wrong_or_empty_records_are_errors() {
    let recs = miniature_records();
    assert!(matches!(waypoint_metrics(&recs[0]), Err(MetricsError::WrongScenario { .. })));
    assert!(matches!(pursuit_metrics(&recs[3]), Err(MetricsError::WrongScenario { .. })));
    let mut empty = recs[0].clone();
    empty.rows.clear();
    assert_eq!(pursuit_metrics(&empty), Err(MetricsError::EmptyRecord));
}

#[test]
fn aggregate_uses_sample_deviation() {
    let a = aggregate(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!((a.n, a.mean), (4, 2.5));
    assert!((a.sem - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
    let one = aggregate(&[7.0]).unwrap();
    assert_eq!((one.mean, one.sem), (7.0, 0.0));
    assert_eq!(aggregate(&[]), Err(MetricsError::EmptyInput));
}

#[test]
fn csv_outputs_group_by_condition() {
    let recs = miniature_records();
    let rows: Vec<MetricsRow> = recs
        .iter()
        .enumerate()
        .map(|(i, r)| MetricsRow {
            trial: format!("t{i}"),
            scenario: r.kind().as_str().into(),
            kind: r.kind(),
            interface: "finger-distance".into(),
            pilot: "hand".into(),
            seed: i as u64,
            completed: true,
            metrics: TrialMetrics::of(r).unwrap(),
        })
        .collect();
    let per_trial = metrics_csv(&rows);
    assert_eq!(per_trial.lines().count(), 6);
    let first = per_trial.lines().nth(1).unwrap();
    assert!(first.ends_with(",,,,,"), "{first}");
    let agg = aggregate_csv(&rows);
    // five pursuit metrics plus five waypoint metrics
    assert_eq!(agg.lines().count(), 11);
    assert!(agg.contains("pursuit,finger-distance,hand,d_avg_m,3,"));
    assert!(agg.contains("waypoints,finger-distance,hand,n_w,2,2.5,0.5\n"));
}
