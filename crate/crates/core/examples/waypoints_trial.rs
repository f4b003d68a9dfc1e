//! Drive the 50-gate course and print the gate log of one trial.
//!
//! ```text
//! cargo run --release --example waypoints_trial [interface] [seed]
//! ```

use locomotion::config::ScenarioConfig;
use locomotion::gestures::InterfaceId;
use locomotion::metrics::waypoint_metrics;
use locomotion::sim::course::GateEventKind;
use locomotion::sim::{run_trial, TrialSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let interface: InterfaceId = args.next().map_or(InterfaceId::FingerDistance, |s| s.parse().unwrap());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    if interface == InterfaceId::FingerNumber {
        eprintln!("finger-number needs a model; see the finger_number example");
        return;
    }

    let cfg = ScenarioConfig::waypoints();
    let spec = TrialSpec::new(&cfg, interface, "default", seed).unwrap();
    let rec = run_trial(&cfg, &spec, None, false).unwrap().record;
    for e in rec.events.iter().filter(|e| e.event.kind != GateEventKind::Pass) {
        println!("t = {:>7.2} s  gate {:>2}  {}", rec.rows[e.row].t, e.event.gate, e.event.kind.as_str());
    }
    let m = waypoint_metrics(&rec).unwrap();
    println!(
        "{interface}: completed {} in {:.2} s, {:.3} m/s along the path, d_p {:.3} m, {} passed, {} collisions",
        rec.completed, m.t_c, m.s_l, m.d_p, m.n_w, m.n_c
    );
}
