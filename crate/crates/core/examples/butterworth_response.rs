//! Frequency response of the 5 Hz tapping filter, measured on sinusoids.
//!
//! ```text
//! cargo run --example butterworth_response
//! ```

use std::f64::consts::PI;

use locomotion::dsp::{Biquad, BiquadCoefficients};

fn main() {
    let fs = 100.0;
    let c = BiquadCoefficients::butterworth_lowpass(5.0, fs).unwrap();
    println!("b = [{:.6}, {:.6}, {:.6}]  a = [1, {:.6}, {:.6}]", c.b0, c.b1, c.b2, c.a1, c.a2);
    println!("stable: {}, DC gain {:.9}", c.is_stable(), c.dc_gain());

    println!("freq (Hz)  gain (dB)");
    for f in [0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 10.0, 20.0, 30.0, 45.0] {
        let mut filter = Biquad::new(c);
        let mut peak: f64 = 0.0;
        for i in 0..(6.0 * fs) as usize {
            let t = i as f64 / fs;
            let y = filter.process((2.0 * PI * f * t).sin()).unwrap();
            // skip the first second of transient
            if t >= 1.0 {
                peak = peak.max(y.abs());
            }
        }
        println!("{f:>9.1}  {:>9.3}", 20.0 * peak.log10());
    }
}
