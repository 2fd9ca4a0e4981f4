//! Element settings used in the experiments: Hadamard-type coins, the two
//! band-structure examples and the partial-reversal coin.

use crate::optics::{ArmSetting, CoinSetting, OpticalElement};

fn arm(elements: &[OpticalElement]) -> ArmSetting {
    ArmSetting::new(elements.to_vec(), 0.0)
}

/// Arms `QWP(12°)`, loop `HWP(27°)`: bands with genuine level crossings.
pub fn crossing_bands() -> CoinSetting {
    CoinSetting {
        arm_a: arm(&[OpticalElement::qwp(12.0)]),
        arm_b: arm(&[OpticalElement::qwp(12.0)]),
        loop_elements: vec![OpticalElement::hwp(27.0)],
    }
}

/// Arms `QWP(27°)·QWP(0°)²·QWP(27°)`, loop `HWP(20°)`: avoided crossings
/// and four distinct wavefront speeds.
pub fn avoided_crossing_bands() -> CoinSetting {
    let a = arm(&[OpticalElement::qwp(27.0), OpticalElement::qwp(0.0)]);
    CoinSetting { arm_a: a.clone(), arm_b: a, loop_elements: vec![OpticalElement::hwp(20.0)] }
}

/// Arm A swaps polarizations (`QWP(45°)` double pass = `−iX`), arm B is a
/// `QWP(0°)` double pass, loop is a Hadamard (`HWP(22.5°)`).
pub fn partial_reversal() -> CoinSetting {
    CoinSetting {
        arm_a: arm(&[OpticalElement::qwp(45.0)]),
        arm_b: arm(&[OpticalElement::qwp(0.0)]),
        loop_elements: vec![OpticalElement::hwp(22.5)],
    }
}

/// `H′` in both arms (double-passed `QWP(45°)` with the EOM at −45°) and a
/// single `QWP(45°)` in the loop.
pub fn hadamard_hprime() -> CoinSetting {
    let a = ArmSetting::new(vec![OpticalElement::qwp(45.0)], -45.0);
    CoinSetting {
        arm_a: a.clone(),
        arm_b: a,
        loop_elements: vec![OpticalElement::qwp(45.0)],
    }
}
