//! Thumb-index distance to walking speed, through the full controller.
//!
//! ```text
//! cargo run --example finger_distance
//! ```

use locomotion::gestures::{
    speed_from_pinch_distance, FingerDistanceConfig, GestureConfig, InterfaceId, LocomotionController, SpeedLimits,
};
use locomotion::pilot::{InputSynthesizer, PilotConfig};

fn main() {
    let cfg = FingerDistanceConfig::default();
    let lim = SpeedLimits::default();

    println!("pinch (cm)  speed (km/h)");
    for mm in (0..=90).step_by(10) {
        let l = mm as f64 / 1000.0;
        println!("{:>9.1}  {:>12.3}", l * 100.0, speed_from_pinch_distance(l, &cfg, &lim));
    }

    // a synthetic right hand held at each target speed
    let mut synth = InputSynthesizer::new(InterfaceId::FingerDistance, PilotConfig::perfect(), GestureConfig::default(), lim, 1);
    let mut ctrl = LocomotionController::new(InterfaceId::FingerDistance, GestureConfig::default(), lim, 100.0, None).unwrap();
    for (k, target) in [0.5, 2.0, 3.7, 5.0].into_iter().enumerate() {
        let frame = synth.invert(target, 0.0, k as f64 * 0.01, 0.01);
        let cmd = ctrl.step(&frame).unwrap();
        println!("target {target:.2} km/h -> controller {:.4} km/h", cmd.speed);
    }
}
