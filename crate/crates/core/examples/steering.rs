//! Left-hand pointing direction to a smoothed steering angle.
//!
//! ```text
//! cargo run --example steering
//! ```

use locomotion::gestures::{raw_steering_angle, steering_angle, SteeringState};
use locomotion::handmodel::{TrackedHand, Vec3};

fn main() {
    for (name, dir) in [
        ("ahead", Vec3::new(0.0, 0.0, -1.0)),
        ("left", Vec3::new(-1.0, 0.0, 0.0)),
        ("right", Vec3::new(1.0, 0.0, 0.0)),
        ("half left, tilted", Vec3::new(-0.5, 0.3, -0.5)),
    ] {
        let theta = raw_steering_angle(Vec3::FORWARD, Vec3::UP, dir).unwrap();
        println!("{name:>18}: {theta:+.2} deg");
    }

    // the hand snaps 30 degrees left; the applied angle follows smoothly
    let mut left = TrackedHand::untracked();
    left.tracked = true;
    left.pointing_dir = Vec3::FORWARD.rotate_y(30f64.to_radians());
    let mut state = SteeringState::new(0.2);
    for tick in 0..=100 {
        let angle = steering_angle(&left, &mut state, 0.01);
        if tick % 10 == 0 {
            println!("t = {:.2} s  steer {angle:.3} deg", tick as f64 * 0.01);
        }
    }
}
