#![allow(dead_code)]

pub mod oracle;

use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use locomotion::classifier::{train, ClassifierModel, LabeledSample, SvmParams};
use locomotion::features::{stack_features, FeatureVector, FEATURE_DIM};
use locomotion::handmodel::{GamepadFrame, HandFrame, TrackedHand, Vec3};
use locomotion::pilot::{generate_pose_dataset, PoseTemplate};

pub fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

pub fn unit_vec3() -> impl Strategy<Value = Vec3> {
    vec3(1.0)
        .prop_filter("non-degenerate", |v| v.norm() > 1e-3)
        .prop_map(|v| v.normalized().unwrap())
}

pub fn tracked_hand() -> impl Strategy<Value = TrackedHand> {
    (
        prop::array::uniform5(vec3(0.5)),
        vec3(0.5),
        unit_vec3(),
        unit_vec3(),
        prop::array::uniform5(vec3(2.0)),
    )
        .prop_map(|(fingertips, palm_centre, palm_normal, pointing_dir, fingertip_velocities)| TrackedHand {
            fingertips,
            palm_centre,
            palm_normal,
            pointing_dir,
            fingertip_velocities,
            tracked: true,
        })
}

pub fn any_hand() -> impl Strategy<Value = TrackedHand> {
    prop_oneof![4 => tracked_hand(), 1 => Just(TrackedHand::untracked())]
}

/// Frames with strictly increasing timestamps.
pub fn hand_frames(max_len: usize) -> impl Strategy<Value = Vec<HandFrame>> {
    (0.0..10.0f64, prop::collection::vec((1e-6..0.1f64, any_hand(), any_hand()), 0..max_len)).prop_map(
        |(t0, items)| {
            let mut t = t0;
            items
                .into_iter()
                .map(|(step, left, right)| {
                    t += step;
                    HandFrame {
                        timestamp: t,
                        left,
                        right,
                    }
                })
                .collect()
        },
    )
}

pub fn gamepad_frames(max_len: usize) -> impl Strategy<Value = Vec<GamepadFrame>> {
    (0.0..10.0f64, prop::collection::vec((1e-6..0.1f64, -1.0..=1.0f64, 0.0..=1.0f64), 0..max_len)).prop_map(
        |(t0, items)| {
            let mut t = t0;
            items
                .into_iter()
                .map(|(step, lx, ry)| {
                    t += step;
                    GamepadFrame::new(t, lx, ry)
                })
                .collect()
        },
    )
}

pub fn feature_vector(range: f64) -> impl Strategy<Value = FeatureVector> {
    prop::collection::vec(-range..range, FEATURE_DIM).prop_map(|v| {
        let mut out = [0.0; FEATURE_DIM];
        out.copy_from_slice(&v);
        FeatureVector(out)
    })
}

pub fn pose_samples(per_class: usize, sigma: f64, seed: u64) -> Vec<LabeledSample> {
    generate_pose_dataset(per_class, sigma, &PoseTemplate::default(), seed)
        .iter()
        .map(|(f, label)| LabeledSample {
            features: stack_features(&f.left, &f.right).unwrap(),
            label: *label,
        })
        .collect()
}

/// A finger-number model trained once per test binary.
pub fn pose_model() -> Arc<ClassifierModel> {
    static MODEL: OnceLock<Arc<ClassifierModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let (model, _) = train(&pose_samples(40, 0.005, 7), &SvmParams::default()).unwrap();
            Arc::new(model)
        })
        .clone()
}

/// Relative closeness with an absolute floor for values near zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
