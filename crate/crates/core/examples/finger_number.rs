//! Train the finger-count classifier on synthetic poses and drive speed
//! with it.
//!
//! ```text
//! cargo run --release --example finger_number
//! ```

use std::sync::Arc;

use locomotion::classifier::{train, LabeledSample, SvmParams};
use locomotion::features::stack_features;
use locomotion::gestures::{finger_number_speed, SpeedLimits};
use locomotion::pilot::{generate_pose_dataset, PoseTemplate};

fn samples(per_class: usize, seed: u64) -> Vec<LabeledSample> {
    generate_pose_dataset(per_class, 0.005, &PoseTemplate::default(), seed)
        .into_iter()
        .map(|(frame, label)| LabeledSample {
            features: stack_features(&frame.left, &frame.right).unwrap(),
            label,
        })
        .collect()
}

fn main() {
    let (model, reports) = train(&samples(60, 1), &SvmParams::default()).unwrap();
    let svs: usize = reports.iter().map(|r| r.support_vectors).sum();
    println!("{} pairwise machines, {svs} support vectors", model.machines().len());

    let test = samples(30, 2);
    let correct = test.iter().filter(|s| model.predict(&s.features).unwrap() == s.label).count();
    println!("held-out accuracy {:.4}", correct as f64 / test.len() as f64);

    let model = Arc::new(model);
    let lim = SpeedLimits::default();
    for (frame, label) in generate_pose_dataset(1, 0.005, &PoseTemplate::default(), 3) {
        let speed = finger_number_speed(&frame, &model, &lim).unwrap();
        println!("{label} fingers -> {speed:?} km/h");
    }
}
