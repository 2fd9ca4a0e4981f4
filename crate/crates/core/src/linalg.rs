//! Small dense complex linear algebra: certified unitaries, eigen-decomposition
//! of unitary matrices, closed-form 2×2 SVD and numerical rank.

use nalgebra::{Complex, DMatrix, SMatrix, SVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type C64 = Complex64;
pub type Mat2 = SMatrix<C64, 2, 2>;
pub type Mat4 = SMatrix<C64, 4, 4>;

/// Max-abs tolerance used when certifying `U†U = 𝟙`.
pub const TOL_UNITARY: f64 = 1e-10;
/// Default relative tolerance for [`numerical_rank`].
pub const RANK_REL_TOL: f64 = 1e-9;

/// Eigenphases closer than this are treated as one degenerate cluster.
const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not unitary: max |U†U - 1| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },
    #[error("dimension mismatch: {left_rows}x{left_cols} times {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("eigen-decomposition did not converge")]
    NoConvergence,
}

pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// A complex N×N matrix whose unitarity was checked at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary<const N: usize>(SMatrix<C64, N, N>);

pub type Unitary2 = Unitary<2>;
pub type Unitary4 = Unitary<4>;

impl<const N: usize> Unitary<N> {
    pub fn new(m: SMatrix<C64, N, N>) -> Result<Self, LinalgError> {
        Self::with_tol(m, TOL_UNITARY)
    }

    pub fn with_tol(m: SMatrix<C64, N, N>, tol: f64) -> Result<Self, LinalgError> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let deviation = unitarity_deviation(&m);
        if deviation > tol {
            return Err(LinalgError::NotUnitary { deviation });
        }
        Ok(Unitary(m))
    }

    /// Wraps a matrix that is unitary by construction.
    pub(crate) fn trusted(m: SMatrix<C64, N, N>) -> Self {
        debug_assert!(unitarity_deviation(&m) <= 1e-8, "trusted matrix not unitary");
        Unitary(m)
    }

    pub fn identity() -> Self {
        Unitary(SMatrix::identity())
    }

    pub fn matrix(&self) -> &SMatrix<C64, N, N> {
        &self.0
    }

    pub fn into_inner(self) -> SMatrix<C64, N, N> {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Unitary(self.0.adjoint())
    }

    pub fn det(&self) -> C64 {
        to_dyn(&self.0).determinant()
    }

    pub fn scale(&self, phase: C64) -> Self {
        Unitary(self.0 * phase)
    }

    pub fn apply(&self, v: &SVector<C64, N>) -> SVector<C64, N> {
        self.0 * v
    }
}

impl<const N: usize> std::ops::Mul for Unitary<N> {
    type Output = Unitary<N>;
    fn mul(self, rhs: Self) -> Self {
        Unitary(self.0 * rhs.0)
    }
}

impl<const N: usize> std::ops::Mul for &Unitary<N> {
    type Output = Unitary<N>;
    fn mul(self, rhs: Self) -> Unitary<N> {
        Unitary(self.0 * rhs.0)
    }
}

impl<const N: usize> std::ops::Index<(usize, usize)> for Unitary<N> {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

/// `max |A†A - 𝟙|` over all entries.
pub fn unitarity_deviation<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    let g = m.adjoint() * m - SMatrix::<C64, N, N>::identity();
    g.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_unitary<const N: usize>(m: &SMatrix<C64, N, N>, tol: f64) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && unitarity_deviation(m) <= tol
}

pub fn is_unitary_dyn(m: &DMatrix<C64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let g = m.adjoint() * m - DMatrix::<C64>::identity(m.nrows(), m.ncols());
    g.iter().all(|z| z.norm() <= tol)
}

/// Product of two dynamically sized matrices.
pub fn mat_mul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<DMatrix<C64>, LinalgError> {
    if a.ncols() != b.nrows() {
        return Err(LinalgError::DimensionMismatch {
            left_rows: a.nrows(),
            left_cols: a.ncols(),
            right_rows: b.nrows(),
            right_cols: b.ncols(),
        });
    }
    Ok(a * b)
}

pub fn dagger<const R: usize, const C: usize>(a: &SMatrix<C64, R, C>) -> SMatrix<C64, C, R> {
    a.adjoint()
}

pub fn max_abs_diff<const R: usize, const C: usize>(a: &SMatrix<C64, R, C>, b: &SMatrix<C64, R, C>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Phase `e^{iθ}` that best aligns `b` onto `a` in the Frobenius sense.
pub fn best_phase<const R: usize, const C: usize>(a: &SMatrix<C64, R, C>, b: &SMatrix<C64, R, C>) -> C64 {
    let overlap: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    if overlap.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        overlap / overlap.norm()
    }
}

/// `max |a - e^{iθ} b|` after choosing the aligning phase.
pub fn distance_up_to_phase<const R: usize, const C: usize>(a: &SMatrix<C64, R, C>, b: &SMatrix<C64, R, C>) -> f64 {
    let ph = best_phase(a, b);
    max_abs_diff(a, &(b * ph))
}

pub fn equal_up_to_phase<const R: usize, const C: usize>(a: &SMatrix<C64, R, C>, b: &SMatrix<C64, R, C>, tol: f64) -> bool {
    distance_up_to_phase(a, b) <= tol
}

/// One eigenpair of a unitary matrix.
#[derive(Debug, Clone)]
pub struct EigenPair<const N: usize> {
    /// Eigenphase ω in `[-π, π)`; the eigenvalue is `e^{iω}`.
    pub phase: f64,
    pub vector: SVector<C64, N>,
}

fn wrap_phase(w: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut x = (w + pi).rem_euclid(2.0 * pi) - pi;
    if x >= pi {
        x -= 2.0 * pi;
    }
    x
}

fn schur_pairs<const N: usize>(u: &Unitary<N>) -> Result<Vec<EigenPair<N>>, LinalgError> {
    let schur = nalgebra::linalg::Schur::try_new(to_dyn(&u.0), 1e-15, 10_000).ok_or(LinalgError::NoConvergence)?;
    let (q, t) = schur.unpack();
    let mut pairs: Vec<EigenPair<N>> = (0..N)
        .map(|j| EigenPair {
            phase: wrap_phase(t[(j, j)].arg()),
            vector: SVector::<C64, N>::from_iterator(q.column(j).iter().copied()),
        })
        .collect();
    pairs.sort_by(|a, b| a.phase.total_cmp(&b.phase));
    Ok(pairs)
}

/// Like [`eig_unitary`] but keeps the Schur vectors of near-degenerate
/// clusters as they are, which keeps them continuous in a parameter when
/// two eigenphases cross.
pub fn eig_unitary_raw<const N: usize>(u: &Unitary<N>) -> Result<Vec<EigenPair<N>>, LinalgError> {
    let mut pairs = schur_pairs(u)?;
    for p in pairs.iter_mut() {
        fix_gauge(&mut p.vector);
    }
    Ok(pairs)
}

/// Eigen-decomposition of a unitary matrix.
///
/// Pairs are sorted by eigenphase. Inside a degenerate cluster the basis is
/// rebuilt by projecting the standard basis vectors, in index order, onto the
/// eigenspace and orthonormalizing, so the output does not depend on the
/// iteration details of the Schur solver. Each vector is gauge-fixed so that
/// its first largest-magnitude component is real and positive.
pub fn eig_unitary<const N: usize>(u: &Unitary<N>) -> Result<Vec<EigenPair<N>>, LinalgError> {
    let mut pairs = schur_pairs(u)?;

    // Group into clusters, allowing one cluster to wrap across ±π.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for j in 0..N {
        match clusters.last_mut() {
            Some(c) if pairs[j].phase - pairs[*c.last().unwrap()].phase <= CLUSTER_TOL => c.push(j),
            _ => clusters.push(vec![j]),
        }
    }
    if clusters.len() > 1 {
        let first = pairs[clusters[0][0]].phase;
        let last = pairs[*clusters.last().unwrap().last().unwrap()].phase;
        if first + 2.0 * std::f64::consts::PI - last <= CLUSTER_TOL {
            let tail = clusters.pop().unwrap();
            let mut merged = tail;
            merged.extend(clusters[0].iter().copied());
            clusters[0] = merged;
        }
    }

    for cluster in &clusters {
        if cluster.len() < 2 {
            continue;
        }
        let basis: Vec<SVector<C64, N>> = cluster.iter().map(|&j| pairs[j].vector).collect();
        let mut accepted: Vec<SVector<C64, N>> = Vec::with_capacity(cluster.len());
        for i in 0..N {
            if accepted.len() == cluster.len() {
                break;
            }
            let mut w = SVector::<C64, N>::zeros();
            for b in &basis {
                w += b * b[i].conj();
            }
            for a in &accepted {
                let c = a.dotc(&w);
                w -= a * c;
            }
            let n = w.norm();
            if n > 1e-6 {
                accepted.push(w / C64::new(n, 0.0));
            }
        }
        for (slot, v) in cluster.iter().zip(accepted) {
            pairs[*slot].vector = v;
        }
    }

    for p in pairs.iter_mut() {
        fix_gauge(&mut p.vector);
    }
    Ok(pairs)
}

fn fix_gauge<const N: usize>(v: &mut SVector<C64, N>) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() >= max - 1e-12).copied() {
        let ph = z.conj() / z.norm();
        *v *= ph;
    }
}

/// `m = U · diag(σ) · V†` with `σ₁ ≥ σ₂ ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct Svd2 {
    pub u: Unitary2,
    pub sigma: [f64; 2],
    pub v: Unitary2,
}

impl Svd2 {
    pub fn reconstruct(&self) -> Mat2 {
        let s = Mat2::new(c64(self.sigma[0], 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(self.sigma[1], 0.0));
        self.u.0 * s * self.v.0.adjoint()
    }
}

fn rot(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    Mat2::new(c64(c, 0.0), c64(-s, 0.0), c64(s, 0.0), c64(c, 0.0))
}

fn unit_phase(z: C64) -> C64 {
    if z.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        z / z.norm()
    }
}

/// Closed-form SVD of a complex 2×2 matrix.
///
/// A Givens rotation reduces the first column, diagonal phases make the
/// remaining triangle real, and the real 2×2 problem is solved with the
/// two-angle formula.
pub fn svd_2x2(m: &Mat2) -> Svd2 {
    let a = m[(0, 0)];
    let c = m[(1, 0)];
    let r = a.norm().hypot(c.norm());
    let g = if r == 0.0 {
        Mat2::identity()
    } else {
        Mat2::new(a.conj() / r, c.conj() / r, -c / r, a / r)
    };
    let tri = g * m;
    let x = tri[(0, 1)];
    let y = tri[(1, 1)];
    let e_gamma = unit_phase(x);
    let e_beta = unit_phase(y) * e_gamma.conj();
    let d1 = Mat2::new(c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), e_beta);
    let d2 = Mat2::new(c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), e_gamma);

    let (ra, rb, rc, rd) = (r, x.norm(), 0.0, y.norm());
    let e = (ra + rd) / 2.0;
    let f = (ra - rd) / 2.0;
    let gg = (rc + rb) / 2.0;
    let h = (rc - rb) / 2.0;
    let q = e.hypot(h);
    let rr = f.hypot(gg);
    let s1 = q + rr;
    let mut s2 = q - rr;
    let a1 = gg.atan2(f);
    let a2 = h.atan2(e);
    let theta = (a2 - a1) / 2.0;
    let phi = (a2 + a1) / 2.0;
    let mut ur = rot(phi);
    if s2 < 0.0 {
        s2 = -s2;
        ur[(0, 1)] = -ur[(0, 1)];
        ur[(1, 1)] = -ur[(1, 1)];
    }
    let vr = rot(theta).transpose();

    let u = g.adjoint() * d1 * ur;
    let v = d2.adjoint() * vr;
    Svd2 {
        u: Unitary::trusted(u),
        sigma: [s1, s2],
        v: Unitary::trusted(v),
    }
}

/// Closest unitary to `m` in Frobenius norm (the polar factor `U·V†`).
pub fn nearest_unitary_2x2(m: &Mat2) -> Unitary2 {
    let svd = svd_2x2(m);
    Unitary::trusted(svd.u.0 * svd.v.0.adjoint())
}

/// Singular values of an arbitrary complex matrix, descending.
pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<C64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(&0.0) => 0,
        Some(&top) => s.iter().filter(|&&x| x > rel_tol * top).count(),
    }
}

/// Haar-distributed unitary via Gram–Schmidt on a complex Gaussian matrix.
pub fn random_unitary<const N: usize, R: Rng + ?Sized>(rng: &mut R) -> Unitary<N> {
    loop {
        let mut m = SMatrix::<C64, N, N>::zeros();
        for z in m.iter_mut() {
            *z = c64(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        let mut ok = true;
        for j in 0..N {
            let mut col: SVector<C64, N> = m.column(j).into_owned();
            for _ in 0..2 {
                for i in 0..j {
                    let prev: SVector<C64, N> = m.column(i).into_owned();
                    let c = prev.dotc(&col);
                    col -= prev * c;
                }
            }
            let n = col.norm();
            if n < 1e-8 {
                ok = false;
                break;
            }
            m.set_column(j, &(col / C64::new(n, 0.0)));
        }
        if ok {
            return Unitary::trusted(m);
        }
    }
}

pub(crate) fn to_dyn<const R: usize, const C: usize>(m: &SMatrix<C64, R, C>) -> DMatrix<C64> {
    DMatrix::from_iterator(R, C, m.iter().copied())
}
