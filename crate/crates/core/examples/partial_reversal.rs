//! One arm swaps polarizations, the other does not: part of the light
//! reverses direction, yet the direction-summed picture is a Hadamard walk.

use loopwalk::linalg::c64;
use loopwalk::optics::hadamard;
use loopwalk::presets;
use loopwalk::walk::{effective_2d_evolve, evolve, make_initial, CoinProgram, Direction, Effective2DState, Polarization, TraceMode};

fn main() {
    let steps = 22;
    let record = evolve(&make_initial(Direction::Ccw, Polarization::A, 0), &CoinProgram::uniform_setting(presets::partial_reversal()), steps).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let reference = effective_2d_evolve(&Effective2DState::localized(0, c64(-s, 0.0), c64(s, 0.0)), &hadamard(), steps);
    let by_direction = record.trace(TraceMode::SumPolarization);
    let mut worst = 0.0f64;
    for t in 0..=steps {
        for (x, p) in record.position_distribution(t) {
            worst = worst.max((p - reference[t].get(&x).copied().unwrap_or(0.0)).abs());
        }
    }
    let (cw, ccw): (f64, f64) = by_direction.steps[steps].values().fold((0.0, 0.0), |a, v| (a.0 + v[0], a.1 + v[1]));
    println!("after {steps} steps: cw {cw:.4}, ccw {ccw:.4}");
    println!("max deviation of the summed distribution from the Hadamard walk: {worst:.2e}");
}
