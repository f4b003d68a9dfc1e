//! Streaming signal processing for the tapping gesture: a second-order
//! Butterworth low-pass section, a fixed-capacity sample queue and a
//! threshold-seeded peak detector.

use std::collections::VecDeque;
use std::f64::consts::{PI, SQRT_2};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("cutoff {cutoff_hz} Hz must lie in (0, {nyquist_hz}) for sample rate {sample_rate_hz} Hz")]
    InvalidCutoff {
        cutoff_hz: f64,
        sample_rate_hz: f64,
        nyquist_hz: f64,
    },
    #[error("non-finite filter input {0}")]
    NonFiniteInput(f64),
}

/// Biquad coefficients with `a0` normalized to one.
///
/// `y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiquadCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadCoefficients {
    /// Second-order Butterworth low-pass from the bilinear transform with the
    /// analog prototype pre-warped so the -3 dB point lands exactly on
    /// `cutoff_hz`.
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self, DspError> {
        let nyquist_hz = sample_rate_hz / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist_hz && sample_rate_hz.is_finite()) {
            return Err(DspError::InvalidCutoff {
                cutoff_hz,
                sample_rate_hz,
                nyquist_hz,
            });
        }
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Ok(BiquadCoefficients {
            b0,
            b1: 2.0 * b0,
            b2: b0,
            a1: 2.0 * (k2 - 1.0) * norm,
            a2: (1.0 - SQRT_2 * k + k2) * norm,
        })
    }

    /// Both poles strictly inside the unit circle (Jury conditions for a
    /// second-order denominator).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }
}

/// Direct-form I delay line.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FilterState {
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

/// Advances the recurrence by one sample.
pub fn filter_apply(
    coeffs: &BiquadCoefficients,
    state: FilterState,
    sample: f64,
) -> Result<(f64, FilterState), DspError> {
    if !sample.is_finite() {
        return Err(DspError::NonFiniteInput(sample));
    }
    let c = coeffs;
    let y = c.b0 * sample + c.b1 * state.x1 + c.b2 * state.x2 - c.a1 * state.y1 - c.a2 * state.y2;
    Ok((
        y,
        FilterState {
            x1: sample,
            x2: state.x1,
            y1: y,
            y2: state.y1,
        },
    ))
}

/// A biquad that owns its delay line.
#[derive(Clone, Debug)]
pub struct Biquad {
    coeffs: BiquadCoefficients,
    state: FilterState,
}

impl Biquad {
    pub fn new(coeffs: BiquadCoefficients) -> Self {
        Biquad {
            coeffs,
            state: FilterState::default(),
        }
    }

    pub fn coefficients(&self) -> &BiquadCoefficients {
        &self.coeffs
    }

    pub fn process(&mut self, sample: f64) -> Result<f64, DspError> {
        let (y, next) = filter_apply(&self.coeffs, self.state, sample)?;
        self.state = next;
        Ok(y)
    }

    pub fn reset(&mut self) {
        self.state = FilterState::default();
    }
}

/// Fixed-capacity FIFO of `(timestamp, value)` samples; the oldest sample
/// is evicted once full.
#[derive(Clone, Debug)]
pub struct RingBuffer {
    capacity: usize,
    samples: VecDeque<(f64, f64)>,
}

impl RingBuffer {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        RingBuffer {
            capacity,
            samples: VecDeque::with_capacity(capacity),
        }
    }

    /// Buffer sized to hold `duration_s` of samples at `sample_rate_hz`.
    pub fn with_duration(duration_s: f64, sample_rate_hz: f64) -> Self {
        RingBuffer::new((duration_s * sample_rate_hz).round() as usize)
    }

    pub fn push(&mut self, timestamp: f64, value: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((timestamp, value));
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakEvent {
    pub timestamp: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakDetectorConfig {
    /// Seed threshold (m/s): only regions rising to at least this value count.
    pub threshold: f64,
    /// Floor (m/s) at which the swing search stops descending.
    pub floor: f64,
    /// Minimum spacing (s) between reported peaks.
    pub refractory_s: f64,
}

impl Default for PeakDetectorConfig {
    fn default() -> Self {
        PeakDetectorConfig {
            threshold: 0.15,
            floor: 0.0,
            refractory_s: 0.15,
        }
    }
}

/// Finds tap peaks in a buffered, filtered velocity signal.
///
/// Each run of samples at or above `threshold` seeds a search that walks
/// outward while the signal keeps descending and stays above `floor`; this
/// brackets one swing from its start to its end. The peak is the maximum
/// inside the bracket (first index on ties). A peak sitting on the first or
/// last buffered sample is not reported because the crest is not confirmed.
/// Peaks closer than `refractory_s` to the previously kept one are merged,
/// keeping the larger.
pub fn detect_peaks(buffer: &RingBuffer, cfg: &PeakDetectorConfig) -> Vec<PeakEvent> {
    let samples: Vec<(f64, f64)> = buffer.iter().collect();
    let n = samples.len();
    let mut out: Vec<PeakEvent> = Vec::new();
    if n < 2 || !(cfg.threshold > 0.0) {
        return out;
    }
    let v = |i: usize| samples[i].1;

    let mut i = 0;
    while i < n {
        if v(i) < cfg.threshold {
            i += 1;
            continue;
        }
        let seed_start = i;
        while i < n && v(i) >= cfg.threshold {
            i += 1;
        }
        let seed_end = i - 1;

        // initial swing
        let mut lo = seed_start;
        while lo > 0 && v(lo - 1) < v(lo) && v(lo - 1) > cfg.floor {
            lo -= 1;
        }
        // terminal swing
        let mut hi = seed_end;
        while hi + 1 < n && v(hi + 1) < v(hi) && v(hi + 1) > cfg.floor {
            hi += 1;
        }

        let mut best = lo;
        for k in lo..=hi {
            if v(k) > v(best) {
                best = k;
            }
        }
        if best == 0 || best == n - 1 {
            continue;
        }
        let ev = PeakEvent {
            timestamp: samples[best].0,
            value: v(best),
        };
        match out.last_mut() {
            Some(prev) if ev.timestamp - prev.timestamp < cfg.refractory_s => {
                if ev.value > prev.value {
                    *prev = ev;
                }
            }
            _ => out.push(ev),
        }
    }
    out
}
