//! Fifty steps of the avoided-crossing walk: the fast fronts run ahead while
//! the slow pair stays merged for a long time.

use loopwalk::analysis::{local_maxima, outer_peak_drift};
use loopwalk::presets;
use loopwalk::walk::{evolve, make_initial, CoinProgram, Direction, Polarization};

fn main() {
    let program = CoinProgram::uniform_setting(presets::avoided_crossing_bands());
    let record = evolve(&make_initial(Direction::Ccw, Polarization::D, 0), &program, 50).unwrap();
    for t in [10, 15, 25, 35, 50] {
        let peaks = local_maxima(&record.position_distribution(t), 0.05);
        println!("step {t:>2}: {} maxima above 5% of peak at {:.1?}", peaks.len(), peaks);
    }
    let (left, right) = outer_peak_drift(&record, 25, 50, 0.05).unwrap();
    println!("outer maxima drift {left:+.4} / {right:+.4} sites per step");
}
