//! Task metrics computed from trial records, and batch aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::sim::record::{ScenarioLayout, TrialRecord};
use crate::sim::course::GateEventKind;
use crate::sim::ScenarioKind;

const KMH_PER_MPS: f64 = 3.6;
/// Length of the window after each keyframe change used by `s_inst`, s.
pub const S_INST_WINDOW_S: f64 = 0.1;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("expected a {expected} record, got {found}")]
    WrongScenario { expected: ScenarioKind, found: ScenarioKind },
    #[error("record has no rows")]
    EmptyRecord,
    #[error("nothing to aggregate")]
    EmptyInput,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PursuitMetrics {
    /// m
    pub d_avg: f64,
    /// m
    pub d_std: f64,
    /// km/h
    pub s_avg: f64,
    /// km/h
    pub s_std: f64,
    /// km/h
    pub s_inst: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaypointMetrics {
    /// s
    pub t_c: f64,
    /// m/s
    pub s_l: f64,
    /// m
    pub d_p: f64,
    pub n_w: usize,
    pub n_c: usize,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn pursuit_metrics(record: &TrialRecord) -> Result<PursuitMetrics, MetricsError> {
    let ScenarioLayout::Pursuit(scenario) = &record.layout else {
        return Err(MetricsError::WrongScenario {
            expected: ScenarioKind::Pursuit,
            found: record.kind(),
        });
    };
    if record.rows.is_empty() {
        return Err(MetricsError::EmptyRecord);
    }
    let mut gaps = Vec::with_capacity(record.rows.len());
    let mut diffs = Vec::with_capacity(record.rows.len());
    for r in &record.rows {
        let (bz, bv) = (r.ball_z.unwrap_or(f64::NAN), r.ball_speed.unwrap_or(f64::NAN));
        gaps.push(r.avatar_x.hypot(r.avatar_z - bz));
        diffs.push((r.avatar_speed - bv).abs() * KMH_PER_MPS);
    }
    let (d_avg, d_std) = mean_std(&gaps);
    let (s_avg, s_std) = mean_std(&diffs);

    let mut window_means = Vec::new();
    for tk in scenario.boundaries() {
        let window: Vec<f64> = record
            .rows
            .iter()
            .zip(&diffs)
            .filter(|(r, _)| r.t >= tk - TIME_EPS && r.t <= tk + S_INST_WINDOW_S + TIME_EPS)
            .map(|(_, d)| *d)
            .collect();
        if !window.is_empty() {
            window_means.push(mean_std(&window).0);
        }
    }
    let s_inst = if window_means.is_empty() {
        f64::NAN
    } else {
        mean_std(&window_means).0
    };
    Ok(PursuitMetrics {
        d_avg,
        d_std,
        s_avg,
        s_std,
        s_inst,
    })
}

pub fn waypoint_metrics(record: &TrialRecord) -> Result<WaypointMetrics, MetricsError> {
    let ScenarioLayout::Waypoints(course) = &record.layout else {
        return Err(MetricsError::WrongScenario {
            expected: ScenarioKind::Waypoints,
            found: record.kind(),
        });
    };
    let (first, last) = match (record.rows.first(), record.rows.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(MetricsError::EmptyRecord),
    };
    let t_c = last.t - first.t;
    let length: f64 = record
        .rows
        .windows(2)
        .map(|w| w[0].avatar_position().distance(w[1].avatar_position()))
        .sum();
    let d_p = record
        .rows
        .iter()
        .map(|r| (r.avatar_x - course.centre_line_x(r.avatar_z)).abs())
        .sum::<f64>()
        / record.rows.len() as f64;
    Ok(WaypointMetrics {
        t_c,
        s_l: if t_c > 0.0 { length / t_c } else { 0.0 },
        d_p,
        n_w: record.count(GateEventKind::Pass),
        n_c: record.count(GateEventKind::Collision),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrialMetrics {
    Pursuit(PursuitMetrics),
    Waypoints(WaypointMetrics),
}

pub const PURSUIT_FIELDS: [&str; 5] = ["d_avg_m", "d_std_m", "s_avg_kmh", "s_std_kmh", "s_inst_kmh"];
pub const WAYPOINT_FIELDS: [&str; 5] = ["t_c_s", "s_l_mps", "d_p_m", "n_w", "n_c"];

impl TrialMetrics {
    pub fn of(record: &TrialRecord) -> Result<Self, MetricsError> {
        match record.kind() {
            ScenarioKind::Pursuit => pursuit_metrics(record).map(TrialMetrics::Pursuit),
            ScenarioKind::Waypoints => waypoint_metrics(record).map(TrialMetrics::Waypoints),
        }
    }

    /// `(column name, value)` pairs in CSV order.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        match self {
            TrialMetrics::Pursuit(m) => PURSUIT_FIELDS
                .iter()
                .copied()
                .zip([m.d_avg, m.d_std, m.s_avg, m.s_std, m.s_inst])
                .collect(),
            TrialMetrics::Waypoints(m) => WAYPOINT_FIELDS
                .iter()
                .copied()
                .zip([m.t_c, m.s_l, m.d_p, m.n_w as f64, m.n_c as f64])
                .collect(),
        }
    }
}

/// Mean and standard error of the mean (sample standard deviation over
/// `sqrt(n)`; zero for a single value).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSem {
    pub n: usize,
    pub mean: f64,
    pub sem: f64,
}

pub fn aggregate(values: &[f64]) -> Result<MeanSem, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sem = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Ok(MeanSem { n, mean, sem })
}

/// One metrics row: which trial it came from and its values.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub trial: String,
    pub scenario: String,
    pub kind: ScenarioKind,
    pub interface: String,
    pub pilot: String,
    pub seed: u64,
    pub completed: bool,
    pub metrics: TrialMetrics,
}

const ALL_FIELDS: [&str; 10] = [
    "d_avg_m",
    "d_std_m",
    "s_avg_kmh",
    "s_std_kmh",
    "s_inst_kmh",
    "t_c_s",
    "s_l_mps",
    "d_p_m",
    "n_w",
    "n_c",
];

/// Per-trial CSV. Columns that do not apply to a row's scenario are empty.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = format!("trial,scenario,kind,interface,pilot,seed,completed,{}\n", ALL_FIELDS.join(","));
    for r in rows {
        let fields = r.metrics.fields();
        let cells: Vec<String> = ALL_FIELDS
            .iter()
            .map(|name| {
                fields
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| v.to_string())
                    .unwrap_or_default()
            })
            .collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.trial,
            r.scenario,
            r.kind,
            r.interface,
            r.pilot,
            r.seed,
            r.completed,
            cells.join(",")
        );
    }
    s
}

/// Mean and SEM per (scenario, interface, pilot) group and metric.
pub fn aggregate_csv(rows: &[MetricsRow]) -> String {
    let mut groups: BTreeMap<(String, String, String), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.scenario.clone(), r.interface.clone(), r.pilot.clone()))
            .or_default()
            .push(r);
    }
    let mut s = String::from("scenario,interface,pilot,metric,n,mean,sem\n");
    for ((scenario, interface, pilot), members) in &groups {
        let names: Vec<&str> = members[0].metrics.fields().iter().map(|(n, _)| *n).collect();
        for (i, name) in names.iter().enumerate() {
            let values: Vec<f64> = members.iter().map(|m| m.metrics.fields()[i].1).collect();
            if let Ok(agg) = aggregate(&values) {
                let _ = writeln!(
                    s,
                    "{scenario},{interface},{pilot},{name},{},{},{}",
                    agg.n, agg.mean, agg.sem
                );
            }
        }
    }
    s
}
