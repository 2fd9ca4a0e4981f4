//! Builds coins from element settings and prints their block structure.

use loopwalk::linalg::{equal_up_to_phase, Mat4};
use loopwalk::optics::{full_coin, h_prime, hadamard, hwp_matrix, minus_i_x, mode, qwp_matrix, ArmSetting, CoinSetting, OpticalElement};
use loopwalk::presets;

fn show(name: &str, m: &Mat4) {
    println!("{name}");
    for i in 0..4 {
        let row: Vec<String> = (0..4).map(|j| format!("{:>7.3}{:+.3}i", m[(i, j)].re, m[(i, j)].im)).collect();
        println!("  {:>4} | {}", mode::LABELS[i], row.join("  "));
    }
}

fn main() {
    // A double pass through QWP(45°) swaps H and V up to a phase.
    let arm = ArmSetting::new(vec![OpticalElement::qwp(45.0)], 0.0);
    println!("QWP(45°) double pass equals −iX: {}", (arm.operator().matrix() - minus_i_x().matrix()).norm() < 1e-14);
    println!("HWP(22.5°) is a Hadamard up to phase: {}", equal_up_to_phase(hwp_matrix(22.5).matrix(), hadamard().matrix(), 1e-14));
    println!("QWP(45°) equals H′ up to phase: {}", equal_up_to_phase(qwp_matrix(45.0).matrix(), h_prime().matrix(), 1e-14));

    let hadamard_walk = CoinSetting { arm_a: arm.clone(), arm_b: arm, loop_elements: vec![OpticalElement::hwp(22.5)] };
    show("\nswap arms, Hadamard loop", hadamard_walk.coin().matrix());
    show("\nH′ in arms and loop", presets::hadamard_hprime().coin().matrix());
    let hp = h_prime();
    show("\nfull_coin(H′, H′, H′)", full_coin(&hp, &hp, &hp).matrix());
    show("\navoided-crossing coin", presets::avoided_crossing_bands().coin().matrix());
}
