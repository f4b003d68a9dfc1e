//! Fingertip descriptors expressed in the palm's own frame.
//!
//! Each fingertip offset from the palm centre is projected onto the palm
//! basis `(N x H, H, N)`, which makes the descriptor independent of where the
//! hand is and how it is oriented. Two hands stack into a 30-value vector,
//! left hand first, fingers thumb to pinky.

use thiserror::Error;

use crate::handmodel::TrackedHand;

pub const HAND_FEATURES: usize = 15;
pub const FEATURE_DIM: usize = 2 * HAND_FEATURES;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("{0} hand is not tracked")]
    Untracked(&'static str),
    #[error("{0} hand geometry is not finite")]
    NonFinite(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn squared_distance(&self, other: &FeatureVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

fn project(hand: &TrackedHand) -> [f64; HAND_FEATURES] {
    let n = hand.palm_normal;
    let h = hand.pointing_dir;
    let side = n.cross(h);
    let mut out = [0.0; HAND_FEATURES];
    for (i, tip) in hand.fingertips.iter().enumerate() {
        let rel = *tip - hand.palm_centre;
        out[3 * i] = rel.dot(side);
        out[3 * i + 1] = rel.dot(h);
        out[3 * i + 2] = rel.dot(n);
    }
    out
}

/// The 15 descriptors of one hand: `(Px, Py, Pz)` per fingertip.
pub fn extract_hand_features(hand: &TrackedHand) -> Result<[f64; HAND_FEATURES], FeatureError> {
    hand_features(hand, "hand")
}

fn hand_features(
    hand: &TrackedHand,
    which: &'static str,
) -> Result<[f64; HAND_FEATURES], FeatureError> {
    if !hand.tracked {
        return Err(FeatureError::Untracked(which));
    }
    let out = project(hand);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(FeatureError::NonFinite(which))
    }
}

pub fn stack_features(left: &TrackedHand, right: &TrackedHand) -> Result<FeatureVector, FeatureError> {
    let l = hand_features(left, "left")?;
    let r = hand_features(right, "right")?;
    let mut out = [0.0; FEATURE_DIM];
    out[..HAND_FEATURES].copy_from_slice(&l);
    out[HAND_FEATURES..].copy_from_slice(&r);
    Ok(FeatureVector(out))
}
