//! Coin synthesis: one-roundtrip realizability test and reconstruction,
//! factorization of arbitrary U(4) coins into two roundtrips, SU(2)
//! normalization and the three-step schedule.

use nalgebra::{DMatrix, SMatrix, Vector2};
use thiserror::Error;

use crate::linalg::{c64, max_abs_diff, nearest_unitary_2x2, numerical_rank, singular_values, svd_2x2, Mat2, Mat4, Unitary2, Unitary4, C64};
use crate::optics::{coin_ab, coin_ll_independent};
use crate::walk::{CoinProgram, WalkError};

type Vec2 = Vector2<C64>;
pub type TestMatrix = SMatrix<C64, 4, 2>;

/// Entries below this magnitude are skipped when fixing phase gauges.
const GAUGE_ZERO_TOL: f64 = 1e-12;
/// `|1 − σ₁|` at or below this routes to the unit-cosine branch.
pub const UNIT_COSINE_TOL: f64 = 1e-10;
/// Off-diagonal blocks with norm at or below this count as zero.
pub const BLOCK_DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("coin is not one-roundtrip decomposable: test singular values {sigma_1:?}, {sigma_2:?}")]
    NotDecomposable { sigma_1: [f64; 2], sigma_2: [f64; 2] },
    #[error(transparent)]
    Walk(#[from] WalkError),
}

/// Arms and loop blocks of a single roundtrip coin
/// `coin_ab(c_a, c_b) · coin_ll_independent(c_loop_cw, c_loop_ccw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneTripFactors {
    pub c_a: Unitary2,
    pub c_b: Unitary2,
    pub c_loop_cw: Unitary2,
    pub c_loop_ccw: Unitary2,
}

impl OneTripFactors {
    pub fn compose(&self) -> Unitary4 {
        coin_ab(&self.c_a, &self.c_b) * coin_ll_independent(&self.c_loop_cw, &self.c_loop_ccw)
    }

    pub fn blocks(&self) -> [&Unitary2; 4] {
        [&self.c_a, &self.c_b, &self.c_loop_cw, &self.c_loop_ccw]
    }
}

/// The two 4×2 test matrices, their singular values and the leading
/// rank-one factors `β αᵀ` and `δ γᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Witness {
    pub m1: TestMatrix,
    pub m2: TestMatrix,
    pub sigma_1: [f64; 2],
    pub sigma_2: [f64; 2],
    pub alpha: [C64; 2],
    pub beta: [C64; 4],
    pub gamma: [C64; 2],
    pub delta: [C64; 4],
}

// Row pattern of the test matrices: M1 collects the entries proportional to
// the first loop row, M2 those proportional to the second.
const M1_ROWS: [(usize, usize); 4] = [(0, 0), (3, 0), (1, 2), (2, 2)];
const M2_ROWS: [(usize, usize); 4] = [(0, 2), (3, 2), (1, 0), (2, 0)];

fn test_matrix(c: &Mat4, rows: &[(usize, usize); 4]) -> TestMatrix {
    let mut m = TestMatrix::zeros();
    for (i, &(r, c0)) in rows.iter().enumerate() {
        m[(i, 0)] = c[(r, c0)];
        m[(i, 1)] = c[(r, c0 + 1)];
    }
    m
}

/// Leading singular triple of a 4×2 matrix as `(σ, β = σu, α = v†)`.
fn leading_pair(m: &TestMatrix) -> ([f64; 2], [C64; 4], [C64; 2]) {
    let svd = m.svd(true, true);
    let s = svd.singular_values;
    let k = if s[0] >= s[1] { 0 } else { 1 };
    let sigma = [s[k], s[1 - k]];
    let u = svd.u.expect("requested u");
    let v_t = svd.v_t.expect("requested v_t");
    let mut alpha = [v_t[(k, 0)], v_t[(k, 1)]];
    let mut beta = [0.0; 4].map(|x| c64(x, 0.0));
    for i in 0..4 {
        beta[i] = u[(i, k)] * s[k];
    }
    // first nonzero alpha entry real positive, compensated in beta
    if let Some(z) = alpha.iter().find(|z| z.norm() > GAUGE_ZERO_TOL).copied() {
        let ph = z / z.norm();
        alpha = alpha.map(|a| a * ph.conj());
        beta = beta.map(|b| b * ph);
    }
    (sigma, beta, alpha)
}

fn rank_is_one(sigma: &[f64; 2], rel_tol: f64) -> bool {
    sigma[0] > 0.0 && sigma[1] <= rel_tol * sigma[0]
}

/// Builds the witness for `c` without deciding anything.
pub fn theorem1_witness(c: &Unitary4) -> Theorem1Witness {
    let m1 = test_matrix(c.matrix(), &M1_ROWS);
    let m2 = test_matrix(c.matrix(), &M2_ROWS);
    let (sigma_1, beta, alpha) = leading_pair(&m1);
    let (sigma_2, delta, gamma) = leading_pair(&m2);
    Theorem1Witness { m1, m2, sigma_1, sigma_2, alpha, beta, gamma, delta }
}

/// Is `c` of the form `coin_ab(A, B) · coin_ll(L)`?
pub fn one_trip_test(c: &Unitary4, rel_tol: f64) -> (bool, Theorem1Witness) {
    let w = theorem1_witness(c);
    let ok = rank_is_one(&w.sigma_1, rel_tol) && rank_is_one(&w.sigma_2, rel_tol);
    (ok, w)
}

fn factors_from_witness(w: &Theorem1Witness) -> OneTripFactors {
    let (b, d) = (&w.beta, &w.delta);
    let a = Mat2::new(b[0], d[0], b[1], d[1]);
    let bm = Mat2::new(b[3], d[3], b[2], d[2]);
    let l = Mat2::new(w.alpha[0], w.alpha[1], w.gamma[0], w.gamma[1]);
    let l = nearest_unitary_2x2(&l);
    OneTripFactors {
        c_a: nearest_unitary_2x2(&a),
        c_b: nearest_unitary_2x2(&bm),
        c_loop_cw: l,
        c_loop_ccw: l,
    }
}

/// Recovers `(C_A, C_B, C_L)` from a decomposable coin.
pub fn one_trip_reconstruct(c: &Unitary4) -> Result<OneTripFactors, SynthesisError> {
    one_trip_reconstruct_with_tol(c, crate::linalg::RANK_REL_TOL)
}

pub fn one_trip_reconstruct_with_tol(c: &Unitary4, rel_tol: f64) -> Result<OneTripFactors, SynthesisError> {
    let (ok, w) = one_trip_test(c, rel_tol);
    if !ok {
        return Err(SynthesisError::NotDecomposable { sigma_1: w.sigma_1, sigma_2: w.sigma_2 });
    }
    Ok(factors_from_witness(&w))
}

/// Best-effort rank-one projection: factors built from the leading singular
/// pairs whether or not the test passes, and the max-abs recomposition error.
pub fn rank_one_projection(c: &Unitary4) -> (OneTripFactors, f64) {
    let f = factors_from_witness(&theorem1_witness(c));
    let err = max_abs_diff(f.compose().matrix(), c.matrix());
    (f, err)
}

/// The four 2×2 matrices whose rank must be one when the cw and ccw loop
/// blocks are independent.
pub fn independent_test_matrices(c: &Unitary4) -> [Mat2; 4] {
    let m = c.matrix();
    let pick = |r0: usize, r1: usize, c0: usize| Mat2::new(m[(r0, c0)], m[(r0, c0 + 1)], m[(r1, c0)], m[(r1, c0 + 1)]);
    [pick(0, 3, 0), pick(1, 2, 2), pick(0, 3, 2), pick(1, 2, 0)]
}

/// Weaker realizability test allowing different cw and ccw loop blocks.
pub fn one_trip_test_independent(c: &Unitary4, rel_tol: f64) -> bool {
    independent_test_matrices(c).iter().all(|m| {
        let s = svd_2x2(m).sigma;
        rank_is_one(&s, rel_tol)
    })
}

/// Which construction [`factor_universal`] used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorBranch {
    Generic,
    /// The larger singular value of the top-left block is 1 within
    /// [`UNIT_COSINE_TOL`].
    UnitCosine,
    /// Off-diagonal blocks vanish; `C₁ = C`, `C₂ = 𝟙`.
    BlockDiagonal,
}

/// Internal basis vectors of the proof: kets `p, q, r, s` (columns of the
/// second-roundtrip loop blocks) and kets `P, Q, R, S` whose adjoints are
/// the rows of the first-roundtrip loop blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalBasis {
    pub p: Vec2,
    pub q: Vec2,
    pub r: Vec2,
    pub s: Vec2,
    pub big_p: Vec2,
    pub big_q: Vec2,
    pub big_r: Vec2,
    pub big_s: Vec2,
}

/// `C₂ · C₁ = global_phase · C` with both factors single-roundtrip coins
/// and trivial arms in `factor_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversalFactorization {
    pub factor_1: OneTripFactors,
    pub factor_2: OneTripFactors,
    pub global_phase: C64,
    pub basis: InternalBasis,
    pub branch: FactorBranch,
}

impl UniversalFactorization {
    pub fn product(&self) -> Unitary4 {
        self.factor_2.compose() * self.factor_1.compose()
    }

    /// `max |C₂C₁ − phase·C|`.
    pub fn residual(&self, target: &Unitary4) -> f64 {
        max_abs_diff(self.product().matrix(), &(target.matrix() * self.global_phase))
    }

    pub fn blocks(&self) -> [&Unitary2; 8] {
        let [a1, b1, l1, l1p] = self.factor_1.blocks();
        let [a2, b2, l2, l2p] = self.factor_2.blocks();
        [a1, b1, l1, l1p, a2, b2, l2, l2p]
    }
}

fn block(c: &Mat4, r: usize, k: usize) -> Mat2 {
    c.fixed_view::<2, 2>(r, k).into_owned()
}

fn complement(v: &Vec2) -> Vec2 {
    Vec2::new(-v[1].conj(), v[0].conj())
}

/// Unit vector along `w`, or `None` if `w` is too small.
fn direction(w: &Vec2) -> Option<Vec2> {
    let n = w.norm();
    (n > GAUGE_ZERO_TOL).then(|| w.unscale(n))
}

/// Orthonormal pair from two candidate directions: the longer one is kept,
/// the other is replaced by its exact complement with matching phase.
fn orthonormal_pair(w1: &Vec2, w2: &Vec2) -> (Vec2, Vec2) {
    let align = |v: Vec2, w: &Vec2| {
        let z = v.dotc(w);
        if z.norm() > GAUGE_ZERO_TOL {
            v * (z / z.norm())
        } else {
            v
        }
    };
    if w1.norm() >= w2.norm() {
        let e1 = direction(w1).unwrap_or_else(|| Vec2::new(c64(1.0, 0.0), c64(0.0, 0.0)));
        (e1, align(complement(&e1), w2))
    } else {
        let e2 = direction(w2).expect("nonzero");
        (align(complement(&e2), w1), e2)
    }
}

fn coeff(x: &Vec2, m: &Mat2, y: &Vec2) -> C64 {
    x.dotc(&(m * y))
}

fn cols(a: &Vec2, b: &Vec2) -> Mat2 {
    Mat2::from_columns(&[*a, *b])
}

fn rows_adjoint(a: &Vec2, b: &Vec2) -> Mat2 {
    cols(a, b).adjoint()
}

fn phase_of(z: C64) -> C64 {
    if z.norm() > GAUGE_ZERO_TOL {
        z / z.norm()
    } else {
        c64(1.0, 0.0)
    }
}

/// Factors any 4×4 unitary into two single-roundtrip coins, `C = C₂C₁`.
pub fn factor_universal(c: &Unitary4) -> UniversalFactorization {
    let m = c.matrix();
    let (tl, tr, bl, br) = (block(m, 0, 0), block(m, 0, 2), block(m, 2, 0), block(m, 2, 2));
    let svd = svd_2x2(&tl);
    let col = |u: &Unitary2, j: usize| -> Vec2 { u.matrix().column(j).into_owned() };
    let (mut p, mut q) = (col(&svd.u, 0), col(&svd.u, 1));
    let (mut big_p, mut big_q) = (col(&svd.v, 0), col(&svd.v, 1));

    let off = tr.norm().max(bl.norm());
    if off <= BLOCK_DIAGONAL_TOL {
        let one = Unitary2::identity();
        let e = [c64(1.0, 0.0), c64(0.0, 0.0)];
        let e = Vec2::new(e[0], e[1]);
        let f = complement(&e);
        return UniversalFactorization {
            factor_1: OneTripFactors {
                c_a: one,
                c_b: one,
                c_loop_cw: nearest_unitary_2x2(&tl),
                c_loop_ccw: nearest_unitary_2x2(&br),
            },
            factor_2: OneTripFactors { c_a: one, c_b: one, c_loop_cw: one, c_loop_ccw: one },
            global_phase: c64(1.0, 0.0),
            basis: InternalBasis { p: e, q: f, r: e, s: f, big_p: e, big_q: f, big_r: e, big_s: f },
            branch: FactorBranch::BlockDiagonal,
        };
    }
    let branch = if (1.0 - svd.sigma[0]).abs() <= UNIT_COSINE_TOL {
        FactorBranch::UnitCosine
    } else {
        FactorBranch::Generic
    };

    // BL·P ∝ s and BL·Q ∝ r
    let (r, s) = {
        let (s, r) = orthonormal_pair(&(bl * big_p), &(bl * big_q));
        (r, s)
    };
    // TR†p ∝ S, TR†q ∝ R, BR†s ∝ S, BR†r ∝ R
    let cand_s = [tr.adjoint() * p, br.adjoint() * s];
    let cand_r = [tr.adjoint() * q, br.adjoint() * r];
    let longest = |c: &[Vec2; 2]| if c[0].norm() >= c[1].norm() { c[0] } else { c[1] };
    let (mut big_r, mut big_s) = orthonormal_pair(&longest(&cand_r), &longest(&cand_s));
    let (mut r, mut s) = (r, s);

    // gauge: first nonzero entry of each l₁, l₁' row and each l₂, l₂' column real positive
    for v in [&mut big_p, &mut big_q, &mut big_r, &mut big_s, &mut p, &mut q, &mut r, &mut s] {
        if let Some(z) = v.iter().find(|z| z.norm() > GAUGE_ZERO_TOL).copied() {
            *v *= phase_of(z).conj();
        }
    }

    let a = Mat2::new(coeff(&p, &tl, &big_p), coeff(&p, &tr, &big_s), coeff(&s, &bl, &big_p), coeff(&s, &br, &big_s));
    let b = Mat2::new(coeff(&r, &br, &big_r), coeff(&r, &bl, &big_q), coeff(&q, &tr, &big_r), coeff(&q, &tl, &big_q));
    let one = Unitary2::identity();
    UniversalFactorization {
        factor_1: OneTripFactors {
            c_a: nearest_unitary_2x2(&a),
            c_b: nearest_unitary_2x2(&b),
            c_loop_cw: nearest_unitary_2x2(&rows_adjoint(&big_p, &big_q)),
            c_loop_ccw: nearest_unitary_2x2(&rows_adjoint(&big_r, &big_s)),
        },
        factor_2: OneTripFactors {
            c_a: one,
            c_b: one,
            c_loop_cw: nearest_unitary_2x2(&cols(&p, &q)),
            c_loop_ccw: nearest_unitary_2x2(&cols(&r, &s)),
        },
        global_phase: c64(1.0, 0.0),
        basis: InternalBasis { p, q, r, s, big_p, big_q, big_r, big_s },
        branch,
    }
}

/// Splits `l = e^{iψ} · l̂` with `det l̂ = 1`.
fn unimodular_part(l: &Unitary2) -> (C64, Mat2) {
    let psi = l.det().arg() / 2.0;
    let e = C64::from_polar(1.0, psi);
    (e, l.matrix() * e.conj())
}

/// Rescales every block of a factorization to unit determinant, moving all
/// leftover phase into `global_phase`.
pub fn su2_normalize(f: &UniversalFactorization) -> UniversalFactorization {
    let (v, l1) = unimodular_part(&f.factor_1.c_loop_cw);
    let (vp, l1p) = unimodular_part(&f.factor_1.c_loop_ccw);
    let (u, mut l2) = unimodular_part(&f.factor_2.c_loop_cw);
    let (up, l2p) = unimodular_part(&f.factor_2.c_loop_ccw);
    let diag = |x: C64, y: C64| Mat2::new(x, c64(0.0, 0.0), c64(0.0, 0.0), y);

    // outer loop phases pushed into the arms of the first roundtrip
    let mut a = diag(u, up) * f.factor_1.c_a.matrix() * diag(v, vp);
    let mut b = diag(up, u) * f.factor_1.c_b.matrix() * diag(vp, v);

    // balance det a against det b with opposite phases on p and q
    let ratio = a.determinant() / b.determinant();
    let e_phi = phase_of(ratio).sqrt();
    l2.set_column(0, &(l2.column(0) * e_phi));
    l2.set_column(1, &(l2.column(1) * e_phi.conj()));
    a.set_row(0, &(a.row(0) * e_phi.conj()));
    b.set_row(1, &(b.row(1) * e_phi));

    let gamma = phase_of(a.determinant()).sqrt();
    a /= gamma;
    b /= gamma;

    let one = Unitary2::identity();
    UniversalFactorization {
        factor_1: OneTripFactors {
            c_a: nearest_unitary_2x2(&a),
            c_b: nearest_unitary_2x2(&b),
            c_loop_cw: nearest_unitary_2x2(&l1),
            c_loop_ccw: nearest_unitary_2x2(&l1p),
        },
        factor_2: OneTripFactors {
            c_a: one,
            c_b: one,
            c_loop_cw: nearest_unitary_2x2(&l2),
            c_loop_ccw: nearest_unitary_2x2(&l2p),
        },
        global_phase: f.global_phase / gamma,
        basis: f.basis,
        branch: f.branch,
    }
}

/// Coins for three consecutive roundtrips realizing one step of `Ŝ·C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeStepSchedule {
    pub coins: [Unitary4; 3],
    /// The net three-step map is `Ŝ · global_phase · C`.
    pub global_phase: C64,
    /// `C` was single-roundtrip realizable; schedule is `(C, 𝟙, 𝟙)`.
    pub fast_path: bool,
    pub factorization: Option<UniversalFactorization>,
}

impl ThreeStepSchedule {
    pub fn program(&self) -> Result<CoinProgram, SynthesisError> {
        Ok(CoinProgram::periodic(self.coins.to_vec())?)
    }
}

pub fn three_step_schedule(c: &Unitary4) -> ThreeStepSchedule {
    if one_trip_test(c, crate::linalg::RANK_REL_TOL).0 {
        return ThreeStepSchedule {
            coins: [*c, Unitary4::identity(), Unitary4::identity()],
            global_phase: c64(1.0, 0.0),
            fast_path: true,
            factorization: None,
        };
    }
    let f = su2_normalize(&factor_universal(c));
    ThreeStepSchedule {
        coins: [f.factor_1.compose(), Unitary4::identity(), f.factor_2.compose()],
        global_phase: f.global_phase,
        fast_path: false,
        factorization: Some(f),
    }
}

/// `½(J − 2𝟙)` with `J` the all-ones matrix.
pub fn grover_coin() -> Unitary4 {
    Unitary4::trusted(Mat4::from_fn(|i, j| c64(if i == j { -0.5 } else { 0.5 }, 0.0)))
}

/// 4-point discrete Fourier transform, `F_jk = i^{jk}/2`.
pub fn fourier_coin() -> Unitary4 {
    Unitary4::trusted(Mat4::from_fn(|j, k| C64::i().powu((j * k) as u32) * 0.5))
}

/// Singular values of both test matrices as dynamic matrices, for reports.
pub fn test_singular_values(c: &Unitary4) -> [Vec<f64>; 2] {
    let w = theorem1_witness(c);
    let dm = |m: &TestMatrix| DMatrix::from_iterator(4, 2, m.iter().copied());
    [singular_values(&dm(&w.m1)), singular_values(&dm(&w.m2))]
}

/// Numerical rank of both test matrices.
pub fn test_ranks(c: &Unitary4, rel_tol: f64) -> [usize; 2] {
    let w = theorem1_witness(c);
    let dm = |m: &TestMatrix| DMatrix::from_iterator(4, 2, m.iter().copied());
    [numerical_rank(&dm(&w.m1), rel_tol), numerical_rank(&dm(&w.m2), rel_tol)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{equal_up_to_phase, random_unitary, unitarity_deviation, RANK_REL_TOL};
    use crate::optics::{eom_matrix, full_coin, h_prime};
    use crate::walk::{apply_step, evolve_states, WalkerState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn printed_center_coin() -> Unitary4 {
        full_coin(&eom_matrix(-45.0), &eom_matrix(-45.0), &h_prime())
    }

    #[test]
    fn center_coin_and_identity_pass() {
        let hp = h_prime();
        assert!(one_trip_test(&full_coin(&hp, &hp, &hp), RANK_REL_TOL).0);
        assert!(one_trip_test(&printed_center_coin(), RANK_REL_TOL).0);
        assert!(one_trip_test(&Unitary4::identity(), RANK_REL_TOL).0);
    }

    #[test]
    fn grover_fails_with_rank_two_first_matrix() {
        let g = grover_coin();
        let (ok, w) = one_trip_test(&g, RANK_REL_TOL);
        assert!(!ok);
        assert_eq!(test_ranks(&g, RANK_REL_TOL)[0], 2);
        // oracle: M1 rows (-½,½),(½,½),(½,½),(½,-½) give M1†M1 = diag(1,1)
        assert!((w.sigma_1[0] - 1.0).abs() < 1e-12 && (w.sigma_1[1] - 1.0).abs() < 1e-12);
        assert!(matches!(one_trip_reconstruct(&g), Err(SynthesisError::NotDecomposable { .. })));
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        // oracle: eigenvalues of the 2×2 Hermitian Gram matrix in closed form
        let mut g = rng(3);
        for _ in 0..50 {
            let c: Unitary4 = random_unitary(&mut g);
            let w = theorem1_witness(&c);
            for (m, s) in [(&w.m1, w.sigma_1), (&w.m2, w.sigma_2)] {
                let gram = m.adjoint() * m;
                let (x, y, z) = (gram[(0, 0)].re, gram[(1, 1)].re, gram[(0, 1)].norm());
                let disc = ((x - y) * (x - y) / 4.0 + z * z).sqrt();
                let l1 = (x + y) / 2.0 + disc;
                let l2 = ((x + y) / 2.0 - disc).max(0.0);
                assert!((s[0] - l1.sqrt()).abs() < 1e-10);
                assert!((s[1] - l2.sqrt()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn hprime_coin_reconstructs_up_to_block_gauge() {
        let hp = h_prime();
        let f = one_trip_reconstruct(&full_coin(&hp, &hp, &hp)).unwrap();
        // l = D* H' with D diagonal; then a = H' D and b = H' D
        let d_conj = f.c_loop_cw.matrix() * hp.matrix().adjoint();
        assert!(d_conj[(0, 1)].norm() < 1e-12 && d_conj[(1, 0)].norm() < 1e-12);
        let d = d_conj.adjoint();
        assert!(max_abs_diff(f.c_a.matrix(), &(hp.matrix() * d)) < 1e-12);
        assert!(max_abs_diff(f.c_b.matrix(), &(hp.matrix() * d)) < 1e-12);
        // gauge: first entry of each loop row real positive
        assert!(f.c_loop_cw[(0, 0)].im.abs() < 1e-14 && f.c_loop_cw[(0, 0)].re > 0.0);
        assert!(f.c_loop_cw[(1, 0)].im.abs() < 1e-14 && f.c_loop_cw[(1, 0)].re > 0.0);
    }

    #[test]
    fn identity_reconstructs_trivially() {
        let f = one_trip_reconstruct(&Unitary4::identity()).unwrap();
        for u in f.blocks() {
            assert!(equal_up_to_phase(u.matrix(), &Mat2::identity(), 1e-12));
        }
    }

    #[test]
    fn random_composites_round_trip() {
        let mut g = rng(11);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let (a, b, l) = (random_unitary(&mut g), random_unitary(&mut g), random_unitary(&mut g));
            let c = full_coin(&a, &b, &l);
            let f = one_trip_reconstruct(&c).unwrap();
            worst = worst.max(max_abs_diff(f.compose().matrix(), c.matrix()));
            assert!(one_trip_test_independent(&c, RANK_REL_TOL));
        }
        assert!(worst <= 1e-9, "worst {worst:e}");
    }

    #[test]
    fn soundness_over_many_draws() {
        let mut g = rng(12);
        for _ in 0..10_000 {
            let c = full_coin(&random_unitary(&mut g), &random_unitary(&mut g), &random_unitary(&mut g));
            assert!(one_trip_test(&c, RANK_REL_TOL).0);
        }
    }

    #[test]
    fn independent_loops_pass_only_weaker_test() {
        let mut g = rng(13);
        for _ in 0..200 {
            let f = OneTripFactors {
                c_a: random_unitary(&mut g),
                c_b: random_unitary(&mut g),
                c_loop_cw: random_unitary(&mut g),
                c_loop_ccw: random_unitary(&mut g),
            };
            let c = f.compose();
            assert!(one_trip_test_independent(&c, RANK_REL_TOL));
            assert!(!one_trip_test(&c, RANK_REL_TOL).0);
        }
        assert!(!one_trip_test_independent(&grover_coin(), RANK_REL_TOL));
    }

    #[test]
    fn failing_matrices_have_large_projection_residual() {
        let mut g = rng(14);
        for _ in 0..500 {
            let c: Unitary4 = random_unitary(&mut g);
            assert!(!one_trip_test(&c, RANK_REL_TOL).0);
            assert!(rank_one_projection(&c).1 >= 1e-3);
        }
        // near the boundary the residual tracks the second singular value
        let hp = h_prime();
        let base = full_coin(&hp, &hp, &hp);
        for eps in [1e-2, 1e-4, 1e-6] {
            let bump = exp_i_hermitian(&mut g, eps);
            let c = bump * base;
            let (ok, w) = one_trip_test(&c, RANK_REL_TOL);
            assert!(!ok);
            let res = rank_one_projection(&c).1;
            let s2 = w.sigma_1[1].max(w.sigma_2[1]);
            assert!(res >= 0.1 * s2, "eps {eps}: residual {res:e} vs sigma {s2:e}");
        }
    }

    /// `exp(iεH)` for a random Hermitian `H` with unit spectral scale.
    fn exp_i_hermitian(g: &mut ChaCha8Rng, eps: f64) -> Unitary4 {
        let v: Unitary4 = random_unitary(g);
        let d = Mat4::from_diagonal(&nalgebra::Vector4::from_fn(|_, _| C64::from_polar(1.0, eps * g.random_range(-1.0..1.0))));
        Unitary4::trusted(v.matrix() * d * v.matrix().adjoint())
    }

    fn check_factorization(c: &Unitary4, f: &UniversalFactorization) {
        assert!(f.residual(c) <= 1e-9, "residual {:e} branch {:?}", f.residual(c), f.branch);
        for u in f.blocks() {
            assert!(unitarity_deviation(u.matrix()) <= 1e-10);
        }
        assert_eq!(f.factor_2.c_a, Unitary2::identity());
        assert_eq!(f.factor_2.c_b, Unitary2::identity());
    }

    #[test]
    fn haar_sweep_factors() {
        let mut g = rng(21);
        for _ in 0..1000 {
            let c: Unitary4 = random_unitary(&mut g);
            let f = factor_universal(&c);
            assert_eq!(f.branch, FactorBranch::Generic);
            check_factorization(&c, &f);
            let n = su2_normalize(&f);
            check_factorization(&c, &n);
            for u in n.blocks() {
                assert!((u.det() - 1.0).norm() <= 1e-10);
            }
        }
    }

    fn rot_with_cos(g: &mut ChaCha8Rng, theta: f64) -> Unitary2 {
        let (s, c) = theta.sin_cos();
        let ph = |g: &mut ChaCha8Rng| C64::from_polar(1.0, g.random_range(0.0..std::f64::consts::TAU));
        let m = Mat2::new(c64(c, 0.0), c64(-s, 0.0), c64(s, 0.0), c64(c, 0.0));
        let left = Mat2::from_diagonal(&Vector2::new(ph(g), ph(g)));
        let right = Mat2::from_diagonal(&Vector2::new(c64(1.0, 0.0), ph(g)));
        Unitary2::trusted(left * m * right)
    }

    fn composite_with_arm_cosines(g: &mut ChaCha8Rng, theta_a: f64, theta_b: f64) -> Unitary4 {
        let first = OneTripFactors {
            c_a: rot_with_cos(g, theta_a),
            c_b: rot_with_cos(g, theta_b),
            c_loop_cw: random_unitary(g),
            c_loop_ccw: random_unitary(g),
        };
        let second = OneTripFactors {
            c_a: Unitary2::identity(),
            c_b: Unitary2::identity(),
            c_loop_cw: random_unitary(g),
            c_loop_ccw: random_unitary(g),
        };
        second.compose() * first.compose()
    }

    #[test]
    fn directed_branches() {
        let mut g = rng(22);
        let mut seen = std::collections::HashSet::new();
        // a_HH = 1 exactly, near 1 (σ within 1e-8), and generic
        for theta_a in [0.0, 1e-6, 1e-4, 0.7] {
            for _ in 0..50 {
                let c = composite_with_arm_cosines(&mut g, theta_a, 0.4);
                let f = factor_universal(&c);
                seen.insert(f.branch);
                check_factorization(&c, &f);
                check_factorization(&c, &su2_normalize(&f));
            }
        }
        // a_VH = b_HV = 0 with both arms diagonal: block diagonal coin
        for _ in 0..50 {
            let c = composite_with_arm_cosines(&mut g, 0.0, 0.0);
            let f = factor_universal(&c);
            assert_eq!(f.branch, FactorBranch::BlockDiagonal);
            check_factorization(&c, &f);
        }
        assert!(seen.contains(&FactorBranch::Generic) && seen.contains(&FactorBranch::UnitCosine));
        let grover = grover_coin();
        check_factorization(&grover, &factor_universal(&grover));
    }

    #[test]
    fn block_diagonal_is_trivial_split_with_explicit_phases() {
        let mut g = rng(23);
        let (tl, br): (Unitary2, Unitary2) = (random_unitary(&mut g), random_unitary(&mut g));
        let c = coin_ll_independent(&tl, &br);
        let f = factor_universal(&c);
        assert_eq!(f.branch, FactorBranch::BlockDiagonal);
        assert!(max_abs_diff(f.factor_1.compose().matrix(), c.matrix()) < 1e-14);
        assert_eq!(f.factor_2.compose(), Unitary4::identity());

        // det TL = e^{2i(α+β)}, det BR = e^{2i(α−β)}
        let n = su2_normalize(&f);
        let (sum, diff) = (tl.det().arg() / 2.0, br.det().arg() / 2.0);
        let (alpha, beta) = ((sum + diff) / 2.0, (sum - diff) / 2.0);
        let e = |x: f64| C64::from_polar(1.0, x);
        let a_expected = Mat2::from_diagonal(&Vector2::new(e(beta), e(-beta)));
        let b_expected = Mat2::from_diagonal(&Vector2::new(e(-beta), e(beta)));
        assert!(equal_up_to_phase(n.factor_1.c_a.matrix(), &a_expected, 1e-12));
        assert!(equal_up_to_phase(n.factor_1.c_b.matrix(), &b_expected, 1e-12));
        assert!(max_abs_diff(n.factor_1.c_loop_cw.matrix(), &(tl.matrix() * e(-(alpha + beta)))) < 1e-12);
        assert!(max_abs_diff(n.factor_1.c_loop_ccw.matrix(), &(br.matrix() * e(-(alpha - beta)))) < 1e-12);
        assert!((n.global_phase - e(-alpha)).norm() < 1e-12 || (n.global_phase + e(-alpha)).norm() < 1e-12);
    }

    #[test]
    fn already_unimodular_is_unchanged() {
        let mut g = rng(24);
        let c: Unitary4 = random_unitary(&mut g);
        let once = su2_normalize(&factor_universal(&c));
        let twice = su2_normalize(&once);
        assert!((twice.global_phase - once.global_phase).norm() < 1e-12);
        for (x, y) in once.blocks().iter().zip(twice.blocks()) {
            assert!(max_abs_diff(x.matrix(), y.matrix()) < 1e-12);
        }
    }

    fn random_localized(g: &mut ChaCha8Rng) -> WalkerState {
        let mut s = WalkerState::new();
        let x = g.random_range(-5..=5);
        let v = nalgebra::Vector4::from_fn(|_, _| c64(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)));
        let v = v.unscale(v.norm());
        s.set(x, [v[0], v[1], v[2], v[3]]);
        s
    }

    fn check_schedule(c: &Unitary4) {
        let sched = three_step_schedule(c);
        let prog = sched.program().unwrap();
        let single = CoinProgram::uniform(*c);
        let mut g = rng(31);
        for _ in 0..100 {
            let init = random_localized(&mut g);
            let three = evolve_states(&init, &prog, 3).unwrap().pop().unwrap();
            let one = apply_step(&crate::walk::apply_coin(&init, &single, 0).unwrap()).scaled(sched.global_phase);
            assert!(three.max_abs_diff(&one) <= 1e-9);
        }
    }

    #[test]
    fn grover_and_fourier_schedules() {
        check_schedule(&grover_coin());
        check_schedule(&fourier_coin());
        assert!(!three_step_schedule(&grover_coin()).fast_path);
    }

    #[test]
    fn decomposable_target_uses_fast_path() {
        let hp = h_prime();
        let c = full_coin(&hp, &hp, &hp);
        let s = three_step_schedule(&c);
        assert!(s.fast_path);
        assert_eq!(s.coins[0], c);
        check_schedule(&c);
    }
}
