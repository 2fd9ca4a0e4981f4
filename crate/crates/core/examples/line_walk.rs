//! Hadamard walk on the line, checked against the two-mode walk it reduces to.

use loopwalk::linalg::c64;
use loopwalk::optics::{hadamard, mode, ArmSetting, CoinSetting, OpticalElement};
use loopwalk::walk::{effective_2d_evolve, evolve, make_initial, trace_intensities, CoinProgram, Direction, Effective2DState, Polarization, TraceMode};

fn main() {
    let steps = 25;
    let swap = ArmSetting::new(vec![OpticalElement::qwp(45.0)], 0.0);
    let setting = CoinSetting { arm_a: swap.clone(), arm_b: swap, loop_elements: vec![OpticalElement::hwp(22.5)] };
    let initial = make_initial(Direction::Ccw, Polarization::D, 0);
    let record = evolve(&initial, &CoinProgram::uniform_setting(setting), steps).unwrap();

    // the cc subspace evolves like a two-mode walk with R ← ccV and L ← ccH
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let two_mode = effective_2d_evolve(&Effective2DState::localized(0, c64(s, 0.0), c64(s, 0.0)), &hadamard(), steps);
    let mut worst = 0.0f64;
    for t in 0..=steps {
        for (x, p) in record.position_distribution(t) {
            worst = worst.max((p - two_mode[t].get(&x).copied().unwrap_or(0.0)).abs());
        }
    }
    println!("max deviation from the two-mode walk: {worst:.2e}");

    let cw: f64 = record.steps[steps].values().map(|p| p[mode::CH] + p[mode::CV]).sum();
    println!("cw intensity after {steps} steps: {cw:.2e}");

    let traced = trace_intensities(&record, TraceMode::SumAll);
    let peak = traced.steps[steps].values().map(|v| v[0]).fold(0.0, f64::max);
    println!("\nposition distribution at step {steps}:");
    for (x, v) in &traced.steps[steps] {
        if v[0] > 1e-6 {
            println!("{x:>4} {:<50} {:.4}", "#".repeat((50.0 * v[0] / peak).round() as usize), v[0]);
        }
    }
}
