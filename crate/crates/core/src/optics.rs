//! Jones matrices of the loop elements and assembly of the 4×4 coin.
//!
//! Basis order is fixed to `(cH, cV, ccH, ccV)`. Angles are in degrees at
//! every public entry point.

use crate::linalg::{c64, Mat2, Mat4, Unitary2, Unitary4, C64};
use serde::{Deserialize, Serialize};

/// Index of each mode in the 4-dimensional coin space.
pub mod mode {
    pub const CH: usize = 0;
    pub const CV: usize = 1;
    pub const CCH: usize = 2;
    pub const CCV: usize = 3;
    pub const LABELS: [&str; 4] = ["cH", "cV", "ccH", "ccV"];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Qwp,
    Hwp,
    Eom,
}

/// A waveplate at angle α or an EOM with phase φ, both in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalElement {
    pub kind: ElementKind,
    pub parameter: f64,
}

impl OpticalElement {
    pub fn qwp(alpha: f64) -> Self {
        OpticalElement { kind: ElementKind::Qwp, parameter: alpha }
    }

    pub fn hwp(alpha: f64) -> Self {
        OpticalElement { kind: ElementKind::Hwp, parameter: alpha }
    }

    pub fn eom(phi: f64) -> Self {
        OpticalElement { kind: ElementKind::Eom, parameter: phi }
    }

    pub fn matrix(&self) -> Unitary2 {
        match self.kind {
            ElementKind::Qwp => qwp_matrix(self.parameter),
            ElementKind::Hwp => hwp_matrix(self.parameter),
            ElementKind::Eom => eom_matrix(self.parameter),
        }
    }

    pub fn shifted(&self, delta: f64) -> Self {
        OpticalElement { kind: self.kind, parameter: self.parameter + delta }
    }
}

pub fn qwp_matrix(alpha: f64) -> Unitary2 {
    let (s, c) = (2.0 * alpha.to_radians()).sin_cos();
    let k = c64(0.0, -std::f64::consts::FRAC_1_SQRT_2);
    let m = Mat2::new(c64(c, 1.0), c64(s, 0.0), c64(s, 0.0), c64(-c, 1.0)) * k;
    Unitary2::trusted(m)
}

pub fn hwp_matrix(alpha: f64) -> Unitary2 {
    let (s, c) = (2.0 * alpha.to_radians()).sin_cos();
    Unitary2::trusted(Mat2::new(c64(c, 0.0), c64(s, 0.0), c64(s, 0.0), c64(-c, 0.0)))
}

pub fn eom_matrix(phi: f64) -> Unitary2 {
    let (s, c) = phi.to_radians().sin_cos();
    Unitary2::trusted(Mat2::new(c64(c, 0.0), c64(0.0, -s), c64(0.0, -s), c64(c, 0.0)))
}

pub fn pauli_x() -> Unitary2 {
    hwp_matrix(45.0)
}

pub fn hadamard() -> Unitary2 {
    hwp_matrix(22.5)
}

/// The balanced coin `(1/√2)[[1, -i], [-i, 1]]`, an EOM at 45°.
pub fn h_prime() -> Unitary2 {
    eom_matrix(45.0)
}

/// Where the single EOM factor sits relative to the double-passed waveplates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EomPlacement {
    /// `W · E`: the EOM matrix is the right factor.
    #[default]
    Right,
    /// `E · W`.
    Left,
}

/// Waveplates in one arm plus the EOM phase applied on one pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSetting {
    /// Waveplates in the order the pulse meets them on the way to the mirror.
    pub static_elements: Vec<OpticalElement>,
    #[serde(default)]
    pub eom_phase: f64,
    #[serde(default)]
    pub eom_placement: EomPlacement,
}

impl ArmSetting {
    pub fn new(static_elements: Vec<OpticalElement>, eom_phase: f64) -> Self {
        ArmSetting { static_elements, eom_phase, eom_placement: EomPlacement::Right }
    }

    pub fn operator(&self) -> Unitary2 {
        arm_operator(self)
    }
}

/// Double pass through the arm waveplates (out and back, so the sequence is
/// palindromic) combined with one EOM factor.
pub fn arm_operator(setting: &ArmSetting) -> Unitary2 {
    let forward = passage_product(&setting.static_elements);
    let back = setting
        .static_elements
        .iter()
        .fold(Mat2::identity(), |acc, e| acc * e.matrix().matrix());
    let double = back * forward;
    let e = *eom_matrix(setting.eom_phase).matrix();
    let m = match setting.eom_placement {
        EomPlacement::Right => double * e,
        EomPlacement::Left => e * double,
    };
    Unitary2::trusted(m)
}

fn passage_product(elements: &[OpticalElement]) -> Mat2 {
    elements.iter().fold(Mat2::identity(), |acc, e| e.matrix().matrix() * acc)
}

/// Single pass through the loop elements, listed in passage order.
pub fn loop_operator(elements: &[OpticalElement]) -> Unitary2 {
    Unitary2::trusted(passage_product(elements))
}

/// `C_LL`: the same loop rotation on both travel directions.
pub fn coin_ll(c_l: &Unitary2) -> Unitary4 {
    coin_ll_independent(c_l, c_l)
}

/// Block-diagonal loop coin with separate cw and ccw blocks.
pub fn coin_ll_independent(c_loop_cw: &Unitary2, c_loop_ccw: &Unitary2) -> Unitary4 {
    let mut z = Mat4::zeros();
    z.fixed_view_mut::<2, 2>(0, 0).copy_from(c_loop_cw.matrix());
    z.fixed_view_mut::<2, 2>(2, 2).copy_from(c_loop_ccw.matrix());
    Unitary4::trusted(z)
}

/// `C_AB`: arm A couples `cH ↔ ccV`, arm B couples `cV ↔ ccH`.
pub fn coin_ab(c_a: &Unitary2, c_b: &Unitary2) -> Unitary4 {
    let a = c_a.matrix();
    let b = c_b.matrix();
    let mut z = Mat4::zeros();
    z[(0, 0)] = a[(0, 0)];
    z[(0, 3)] = a[(0, 1)];
    z[(3, 0)] = a[(1, 0)];
    z[(3, 3)] = a[(1, 1)];
    z[(1, 1)] = b[(1, 1)];
    z[(1, 2)] = b[(1, 0)];
    z[(2, 1)] = b[(0, 1)];
    z[(2, 2)] = b[(0, 0)];
    Unitary4::trusted(z)
}

/// `C = C_AB · C_LL`.
pub fn full_coin(c_a: &Unitary2, c_b: &Unitary2, c_l: &Unitary2) -> Unitary4 {
    coin_ab(c_a, c_b) * coin_ll(c_l)
}

/// Element-level description of one coin: two arms and the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinSetting {
    pub arm_a: ArmSetting,
    pub arm_b: ArmSetting,
    pub loop_elements: Vec<OpticalElement>,
}

impl CoinSetting {
    pub fn coin(&self) -> Unitary4 {
        full_coin(&self.arm_a.operator(), &self.arm_b.operator(), &loop_operator(&self.loop_elements))
    }

    /// Same setting with every waveplate angle and every active EOM phase
    /// shifted by the next value drawn from `delta`.
    pub fn perturbed(&self, delta: &mut impl FnMut() -> f64) -> CoinSetting {
        let mut shift = |e: &OpticalElement| {
            if e.kind == ElementKind::Eom && e.parameter == 0.0 {
                *e
            } else {
                e.shifted(delta())
            }
        };
        let arm = |a: &ArmSetting, shift: &mut dyn FnMut(&OpticalElement) -> OpticalElement| ArmSetting {
            static_elements: a.static_elements.iter().map(&mut *shift).collect(),
            eom_phase: if a.eom_phase == 0.0 { 0.0 } else { shift(&OpticalElement::eom(a.eom_phase)).parameter },
            eom_placement: a.eom_placement,
        };
        let arm_a = arm(&self.arm_a, &mut shift);
        let arm_b = arm(&self.arm_b, &mut shift);
        let loop_elements = self.loop_elements.iter().map(&mut shift).collect();
        CoinSetting { arm_a, arm_b, loop_elements }
    }

    /// Number of parameters touched by [`CoinSetting::perturbed`].
    pub fn perturbable_count(&self) -> usize {
        let active = |e: &OpticalElement| !(e.kind == ElementKind::Eom && e.parameter == 0.0);
        let arm = |a: &ArmSetting| a.static_elements.iter().filter(|e| active(e)).count() + usize::from(a.eom_phase != 0.0);
        arm(&self.arm_a) + arm(&self.arm_b) + self.loop_elements.iter().filter(|e| active(e)).count()
    }
}

/// `−iX`, the arm action of a double-passed QWP at 45°.
pub fn minus_i_x() -> Unitary2 {
    pauli_x().scale(c64(0.0, -1.0))
}

pub fn scalar2(z: C64) -> Unitary2 {
    Unitary2::trusted(Mat2::identity() * (z / z.norm()))
}
