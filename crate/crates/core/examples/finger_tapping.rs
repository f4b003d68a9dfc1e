//! Index-finger tapping: the filtered vertical velocity is searched for
//! peaks and the interval between them sets the speed.
//!
//! ```text
//! cargo run --example finger_tapping
//! ```

use std::f64::consts::PI;

use locomotion::gestures::{FingerTappingConfig, FingerTappingController, SpeedLimits};

fn main() {
    let lim = SpeedLimits::default();
    let fs = 100.0;
    for period in [0.3, 0.5, 0.7, 0.9] {
        let mut ctrl = FingerTappingController::new(FingerTappingConfig::default(), lim, fs).unwrap();
        let mut speed = 0.0;
        for i in 0..(4.0 * fs) as usize {
            let t = i as f64 / fs;
            let velocity = 0.4 * (2.0 * PI * t / period).sin();
            speed = ctrl.update(velocity, t).unwrap();
        }
        println!("tap every {period:.2} s -> {speed:.3} km/h (last peak at {:?})", ctrl.last_peak());
    }

    // stop tapping and the speed falls back once the interval runs out
    let mut ctrl = FingerTappingController::new(FingerTappingConfig::default(), lim, fs).unwrap();
    for i in 0..300 {
        let t = i as f64 / fs;
        let v = if t < 1.5 { 0.4 * (2.0 * PI * t / 0.4).sin() } else { 0.0 };
        let s = ctrl.update(v, t).unwrap();
        if i % 50 == 0 {
            println!("t = {t:.1} s  speed {s:.3} km/h");
        }
    }
}
