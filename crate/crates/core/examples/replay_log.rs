//! Record a trial's input frames as a log, replay them and compare.
//!
//! ```text
//! cargo run --release --example replay_log
//! ```

use std::io::Cursor;

use locomotion::config::ScenarioConfig;
use locomotion::gestures::{InputFrame, InterfaceId};
use locomotion::handmodel::{parse_hand_log, write_hand_log, HandFrame};
use locomotion::sim::{replay, run_trial, TrialSpec};

fn main() {
    let cfg = ScenarioConfig::pursuit();
    let spec = TrialSpec::new(&cfg, InterfaceId::FingerTapping, "default", 4).unwrap();
    let run = run_trial(&cfg, &spec, None, true).unwrap();

    let hands: Vec<HandFrame> = run
        .inputs
        .iter()
        .map(|f| match f {
            InputFrame::Hand(h) => *h,
            InputFrame::Gamepad(_) => unreachable!(),
        })
        .collect();
    let mut log = Vec::new();
    write_hand_log(&hands, &mut log).unwrap();
    println!("{} frames, {} bytes of log", hands.len(), log.len());

    let frames: Vec<InputFrame> = parse_hand_log(Cursor::new(log)).unwrap().into_iter().map(InputFrame::Hand).collect();
    let full = replay(&cfg, &spec, None, &frames).unwrap();
    println!("full replay identical: {}", full.record.to_csv() == run.record.to_csv());

    let part = replay(&cfg, &spec, None, &frames[..3000]).unwrap();
    println!(
        "first 3000 frames: truncated = {}, {} rows, ends at t = {:.2} s",
        part.truncated,
        part.record.rows.len(),
        part.record.rows.last().unwrap().t
    );
}
