//! One target-pursuit trial per interface, default noisy pilot.
//!
//! ```text
//! cargo run --release --example pursuit_trial [seed]
//! ```

use std::sync::Arc;

use locomotion::classifier::{train, LabeledSample, SvmParams};
use locomotion::config::ScenarioConfig;
use locomotion::features::stack_features;
use locomotion::gestures::InterfaceId;
use locomotion::metrics::pursuit_metrics;
use locomotion::pilot::{generate_pose_dataset, PoseTemplate};
use locomotion::sim::{run_trial, TrialSpec};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let data: Vec<LabeledSample> = generate_pose_dataset(40, 0.005, &PoseTemplate::default(), 9)
        .into_iter()
        .map(|(f, label)| LabeledSample { features: stack_features(&f.left, &f.right).unwrap(), label })
        .collect();
    let model = Arc::new(train(&data, &SvmParams::default()).unwrap().0);

    let cfg = ScenarioConfig::pursuit();
    println!("{:<16} {:>8} {:>8} {:>10} {:>10} {:>10}", "interface", "d_avg", "d_std", "s_avg", "s_std", "s_inst");
    for interface in InterfaceId::ALL {
        let spec = TrialSpec::new(&cfg, interface, "default", seed).unwrap();
        let model = (interface == InterfaceId::FingerNumber).then(|| model.clone());
        let run = run_trial(&cfg, &spec, model, false).unwrap();
        let m = pursuit_metrics(&run.record).unwrap();
        println!(
            "{:<16} {:>8.3} {:>8.3} {:>10.3} {:>10.3} {:>10.3}",
            interface.as_str(), m.d_avg, m.d_std, m.s_avg, m.s_std, m.s_inst
        );
    }
}
