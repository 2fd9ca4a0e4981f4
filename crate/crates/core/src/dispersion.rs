//! Quasi-energy bands of translation-invariant walks, group velocities,
//! wavefront speeds and crossing classification, plus the closed-form
//! split-step analysis.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SMatrix};
use thiserror::Error;

use crate::linalg::{c64, eig_unitary_raw, LinalgError, Mat2, Mat4, Unitary, Unitary2, Unitary4, C64};

/// Smallest accepted k-grid.
pub const MIN_GRID: usize = 64;
pub const DEFAULT_GRID: usize = 1024;
/// Speeds closer than this are merged into one wavefront.
pub const DEFAULT_MERGE_TOL: f64 = 1e-4;
/// Bisection stops once the bracket is this narrow.
pub const ROOT_TOL: f64 = 1e-8;
/// Branches whose grid curvature never exceeds this are treated as flat.
const FLAT_TOL: f64 = 1e-9;
/// Step of the local finite-difference probes.
const PROBE_STEP: f64 = 1e-3;
const PAD: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("k-grid needs at least {MIN_GRID} samples, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("split-step coin parameters not normalized: |u|² + |v|² = {0}")]
    NotNormalized(f64),
}

/// Sign of `k` in the shift phases. `Flipped` evaluates everything at `−k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FourierSign {
    #[default]
    Standard,
    Flipped,
}

impl FourierSign {
    fn apply(self, k: f64) -> f64 {
        match self {
            FourierSign::Standard => k,
            FourierSign::Flipped => -k,
        }
    }
}

/// `U(k) = S(k)·C` for the flip-flop step: `e^{−ik}` on moves to `x−1`,
/// `e^{+ik}` on moves to `x+1`.
pub fn bloch_operator(coin: &Unitary4, k: f64) -> Unitary4 {
    let mut s = Mat4::zeros();
    let (up, down) = (C64::from_polar(1.0, k), C64::from_polar(1.0, -k));
    s[(2, 0)] = down;
    s[(3, 1)] = up;
    s[(0, 2)] = up;
    s[(1, 3)] = down;
    Unitary::trusted(s * coin.matrix())
}

/// Two-mode walk on a line, `(R, L)` basis, `R` moving right.
pub fn line_operator(coin: &Unitary2, k: f64) -> Unitary2 {
    let s = Mat2::new(C64::from_polar(1.0, k), c64(0.0, 0.0), c64(0.0, 0.0), C64::from_polar(1.0, -k));
    Unitary::trusted(s * coin.matrix())
}

/// `U = S₊ C₂ S₋ C₁` with `S₊ = diag(e^{ik}, 1)` and `S₋ = diag(1, e^{−ik})`.
pub fn split_step_operator(c1: &Unitary2, c2: &Unitary2, k: f64) -> Unitary2 {
    let one = c64(1.0, 0.0);
    let zero = c64(0.0, 0.0);
    let sp = Mat2::new(C64::from_polar(1.0, k), zero, zero, one);
    let sm = Mat2::new(one, zero, zero, C64::from_polar(1.0, -k));
    Unitary::trusted(sp * c2.matrix() * sm * c1.matrix())
}

/// A translation-invariant walk whose Bloch operator can be evaluated at any k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlochModel {
    FlipFlop(Unitary4),
    Line(Unitary2),
    SplitStep { c1: Unitary2, c2: Unitary2 },
}

fn pairs_dyn<const N: usize>(u: &Unitary<N>) -> Result<Vec<(f64, DVector<C64>)>, LinalgError> {
    Ok(eig_unitary_raw(u)?
        .into_iter()
        .map(|p| (p.phase, DVector::from_iterator(N, p.vector.iter().copied())))
        .collect())
}

impl BlochModel {
    pub fn dim(&self) -> usize {
        match self {
            BlochModel::FlipFlop(_) => 4,
            _ => 2,
        }
    }

    pub fn operator(&self, k: f64) -> DMatrix<C64> {
        fn dm<const N: usize>(u: &Unitary<N>) -> DMatrix<C64> {
            let m: &SMatrix<C64, N, N> = u.matrix();
            DMatrix::from_iterator(N, N, m.iter().copied())
        }
        match self {
            BlochModel::FlipFlop(c) => dm(&bloch_operator(c, k)),
            BlochModel::Line(c) => dm(&line_operator(c, k)),
            BlochModel::SplitStep { c1, c2 } => dm(&split_step_operator(c1, c2, k)),
        }
    }

    /// Eigenpairs `(ω, v)` of `U(k)`, sorted by ω.
    pub fn eig(&self, k: f64) -> Result<Vec<(f64, DVector<C64>)>, LinalgError> {
        match self {
            BlochModel::FlipFlop(c) => pairs_dyn(&bloch_operator(c, k)),
            BlochModel::Line(c) => pairs_dyn(&line_operator(c, k)),
            BlochModel::SplitStep { c1, c2 } => pairs_dyn(&split_step_operator(c1, c2, k)),
        }
    }
}

fn wrap(w: f64) -> f64 {
    let x = (w + PI).rem_euclid(2.0 * PI) - PI;
    if x >= PI {
        x - 2.0 * PI
    } else {
        x
    }
}

/// Branch-tracked quasi-energies on a uniform grid over `[−π, π)`.
#[derive(Debug, Clone)]
pub struct DispersionSpectrum {
    pub model: BlochModel,
    pub sign: FourierSign,
    pub k_grid: Vec<f64>,
    /// `branches[j][i] = ω_j(k_i)`, unwrapped along each branch.
    pub branches: Vec<Vec<f64>>,
    /// `eigenvectors[j][i]`, the eigenvector of `U(k_i)` for branch `j`.
    pub eigenvectors: Vec<Vec<DVector<C64>>>,
    // Same branches on the grid padded by PAD samples at both ends.
    ext: Vec<Vec<f64>>,
}

impl DispersionSpectrum {
    pub fn n_k(&self) -> usize {
        self.k_grid.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.n_k() as f64
    }

    /// `ω_j(k_i)` folded into `[−π, π)`.
    pub fn wrapped(&self, j: usize, i: usize) -> f64 {
        wrap(self.branches[j][i])
    }

    fn ext_at(&self, j: usize, i: isize) -> f64 {
        self.ext[j][(i + PAD as isize) as usize]
    }

    fn probe(&self, j: usize, i: usize) -> BranchProbe<'_> {
        BranchProbe {
            model: &self.model,
            sign: self.sign,
            vector: &self.eigenvectors[j][i],
            phase: self.branches[j][i],
        }
    }
}

pub fn band_structure(coin: &Unitary4, n_k: usize) -> Result<DispersionSpectrum, DispersionError> {
    band_structure_model(BlochModel::FlipFlop(*coin), n_k, FourierSign::Standard)
}

/// Samples `n_k` points and connects eigenpairs across adjacent samples by
/// greedy maximal eigenvector overlap.
pub fn band_structure_model(model: BlochModel, n_k: usize, sign: FourierSign) -> Result<DispersionSpectrum, DispersionError> {
    if n_k < MIN_GRID {
        return Err(DispersionError::GridTooSmall(n_k));
    }
    let dim = model.dim();
    let dk = 2.0 * PI / n_k as f64;
    let total = n_k + 2 * PAD;
    let k_at = |e: usize| -PI + (e as f64 - PAD as f64) * dk;

    let first = model.eig(sign.apply(k_at(0)))?;
    let mut phases: Vec<Vec<f64>> = first.iter().map(|(w, _)| vec![*w]).collect();
    let mut vectors: Vec<Vec<DVector<C64>>> = first.into_iter().map(|(_, v)| vec![v]).collect();

    for e in 1..total {
        let next = model.eig(sign.apply(k_at(e)))?;
        let mut scored = Vec::with_capacity(dim * dim);
        for (j, vs) in vectors.iter().enumerate() {
            let prev = vs.last().expect("non-empty");
            for (m, (_, v)) in next.iter().enumerate() {
                scored.push((prev.dotc(v).norm(), j, m));
            }
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut assigned = vec![usize::MAX; dim];
        let mut taken = vec![false; dim];
        for (_, j, m) in scored {
            if assigned[j] == usize::MAX && !taken[m] {
                assigned[j] = m;
                taken[m] = true;
            }
        }
        for j in 0..dim {
            let (w, v) = &next[assigned[j]];
            let prev = *phases[j].last().expect("non-empty");
            phases[j].push(prev + wrap(w - prev));
            vectors[j].push(v.clone());
        }
    }

    let k_grid = (0..n_k).map(|i| -PI + i as f64 * dk).collect();
    let branches = phases.iter().map(|p| p[PAD..PAD + n_k].to_vec()).collect();
    let eigenvectors = vectors.into_iter().map(|v| v[PAD..PAD + n_k].to_vec()).collect();
    Ok(DispersionSpectrum { model, sign, k_grid, branches, eigenvectors, ext: phases })
}

/// One branch followed from a grid sample by eigenvector overlap.
struct BranchProbe<'a> {
    model: &'a BlochModel,
    sign: FourierSign,
    vector: &'a DVector<C64>,
    phase: f64,
}

impl BranchProbe<'_> {
    fn phase_at(&self, k: f64) -> f64 {
        let pairs = self.model.eig(self.sign.apply(k)).expect("unitary Bloch operator");
        let (w, _) = pairs
            .iter()
            .max_by(|a, b| self.vector.dotc(&a.1).norm().total_cmp(&self.vector.dotc(&b.1).norm()))
            .expect("non-empty spectrum");
        self.phase + wrap(w - self.phase)
    }

    /// Central first difference with one Richardson step.
    fn velocity(&self, k: f64) -> f64 {
        let h = PROBE_STEP;
        let d = |h: f64| (self.phase_at(k + h) - self.phase_at(k - h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    /// Central second difference with one Richardson step.
    fn curvature(&self, k: f64) -> f64 {
        let h = PROBE_STEP;
        let w0 = self.phase_at(k);
        let d = |h: f64| (self.phase_at(k + h) - 2.0 * w0 + self.phase_at(k - h)) / (h * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }
}

/// `v_g = dω/dk` on the grid: central differences at spacing `dk` and
/// `2dk` combined by one Richardson step.
pub fn group_velocities(spec: &DispersionSpectrum) -> Vec<Vec<f64>> {
    let dk = spec.dk();
    (0..spec.n_branches())
        .map(|j| {
            (0..spec.n_k() as isize)
                .map(|i| {
                    let d1 = (spec.ext_at(j, i + 1) - spec.ext_at(j, i - 1)) / (2.0 * dk);
                    let d2 = (spec.ext_at(j, i + 2) - spec.ext_at(j, i - 2)) / (4.0 * dk);
                    (4.0 * d1 - d2) / 3.0
                })
                .collect()
        })
        .collect()
}

/// `ω''` on the grid points `0..=n_k` (the last one is `k = π`).
fn grid_curvature(spec: &DispersionSpectrum, j: usize) -> Vec<f64> {
    let dk = spec.dk();
    (0..=spec.n_k() as isize)
        .map(|i| (spec.ext_at(j, i + 1) - 2.0 * spec.ext_at(j, i) + spec.ext_at(j, i - 1)) / (dk * dk))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inflection {
    pub branch: usize,
    pub k: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedCluster {
    pub speed: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WavefrontSet {
    /// Distinct speeds, ascending, with the number of inflections merged into each.
    pub speeds: Vec<SpeedCluster>,
    pub locations: Vec<Inflection>,
}

impl WavefrontSet {
    pub fn distinct(&self) -> Vec<f64> {
        self.speeds.iter().map(|c| c.speed).collect()
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64, tol: f64) -> (f64, f64) {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return (mid, mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Regula falsi with the Illinois modification on a sign-changing bracket.
/// Stops when successive estimates differ by less than `tol`.
fn illinois(f: impl Fn(f64) -> f64, (mut a, mut fa): (f64, f64), (mut b, mut fb): (f64, f64), tol: f64) -> f64 {
    let mut side = 0;
    let mut prev = f64::NAN;
    for _ in 0..100 {
        let c = (fa * b - fb * a) / (fa - fb);
        if (c - prev).abs() < tol || b - a < tol {
            return c;
        }
        prev = c;
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

/// Merges sorted speeds closer than `tol` into clusters.
pub fn merge_speeds(mut raw: Vec<f64>, tol: f64) -> Vec<SpeedCluster> {
    raw.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for v in raw {
        match out.last_mut() {
            Some((sum, n, last)) if v - *last <= tol => {
                *sum += v;
                *n += 1;
                *last = v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    out.into_iter().map(|(sum, n, _)| SpeedCluster { speed: sum / n as f64, multiplicity: n }).collect()
}

/// Group velocities at the inflection points `ω''(k*) = 0` of every branch.
pub fn wavefront_speeds(spec: &DispersionSpectrum, tol: f64) -> WavefrontSet {
    let dk = spec.dk();
    let mut locations = Vec::new();
    for j in 0..spec.n_branches() {
        let curv = grid_curvature(spec, j);
        if curv.iter().all(|c| c.abs() < FLAT_TOL) {
            continue;
        }
        for i in 0..spec.n_k() {
            let (c0, c1) = (curv[i], curv[i + 1]);
            if c0.abs() < FLAT_TOL && c1.abs() < FLAT_TOL {
                continue;
            }
            if (c0 > 0.0) == (c1 > 0.0) || c0 == 0.0 {
                continue;
            }
            let probe = spec.probe(j, i);
            let lo = spec.k_grid[i];
            let hi = lo + dk;
            let (f_lo, f_hi) = (probe.curvature(lo), probe.curvature(hi));
            let k_star = if (f_lo > 0.0) != (f_hi > 0.0) {
                illinois(|k| probe.curvature(k), (lo, f_lo), (hi, f_hi), ROOT_TOL)
            } else {
                lo + dk * c0 / (c0 - c1)
            };
            locations.push(Inflection { branch: j, k: k_star, speed: probe.velocity(k_star) });
        }
    }
    let speeds = merge_speeds(locations.iter().map(|l| l.speed).collect(), tol);
    WavefrontSet { speeds, locations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    Crossing,
    Avoided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMinimum {
    pub k: f64,
    pub branches: (usize, usize),
    pub gap: f64,
    pub kind: CrossingKind,
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let k = 0.5 * (a + b);
    (k, f(k))
}

/// Local minima of every interbranch gap, refined and classified as a true
/// crossing (`gap ≤ gap_tol`) or an avoided one. Runs of grid points that
/// are all degenerate are reported once, at their first sample.
pub fn classify_crossings(spec: &DispersionSpectrum, gap_tol: f64) -> Vec<GapMinimum> {
    let n = spec.n_k() as isize;
    let dk = spec.dk();
    let mut out = Vec::new();
    for a in 0..spec.n_branches() {
        for b in a + 1..spec.n_branches() {
            let d = |i: isize| wrap(spec.ext_at(a, i) - spec.ext_at(b, i));
            let g = |i: isize| d(i).abs();
            // rigidly shifted pair: no minima beyond rounding noise
            let (lo, hi) = (0..n).map(g).fold((f64::MAX, 0.0f64), |(l, h), x| (l.min(x), h.max(x)));
            if hi - lo < FLAT_TOL && lo > gap_tol {
                continue;
            }
            let mut in_run = false;
            for i in 0..n {
                let iu = i as usize;
                if g(i) <= gap_tol {
                    if !in_run {
                        out.push(GapMinimum { k: spec.k_grid[iu], branches: (a, b), gap: g(i), kind: CrossingKind::Crossing });
                    }
                    in_run = true;
                    continue;
                }
                in_run = false;
                if !(g(i) < g(i - 1) && g(i) <= g(i + 1)) {
                    continue;
                }
                let (pa, pb) = (spec.probe(a, iu), spec.probe(b, iu));
                let diff = |k: f64| wrap(pa.phase_at(k) - pb.phase_at(k));
                let k_i = spec.k_grid[iu];
                let bracket = if d(i - 1) * d(i) < 0.0 {
                    Some((k_i - dk, k_i))
                } else if d(i) * d(i + 1) < 0.0 {
                    Some((k_i, k_i + dk))
                } else {
                    None
                };
                let (k, gap) = match bracket {
                    Some((lo, hi)) => {
                        let (x, y) = bisect(diff, lo, hi, diff(lo), 1e-13);
                        let (gx, gy) = (diff(x).abs(), diff(y).abs());
                        if gx <= gy {
                            (x, gx)
                        } else {
                            (y, gy)
                        }
                    }
                    None => golden_min(|k| diff(k).abs(), k_i - dk, k_i + dk, 1e-10),
                };
                let kind = if gap <= gap_tol { CrossingKind::Crossing } else { CrossingKind::Avoided };
                out.push(GapMinimum { k: wrap(k), branches: (a, b), gap, kind });
            }
        }
    }
    out
}

/// `ũ = |u₁u₂|`, `ṽ = Re(v₁v₂*)`, `φ = arg(u₁u₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStepParams {
    pub u_tilde: f64,
    pub v_tilde: f64,
    pub phi: f64,
}

/// The two SU(2) coins of a split-step walk: `C₁ = [[u₁, v₁], [−v₁*, u₁*]]`,
/// `C₂ = [[u₂, −v₂], [v₂*, u₂*]]`.
pub fn split_step_coins(u1: C64, v1: C64, u2: C64, v2: C64) -> Result<(Unitary2, Unitary2), DispersionError> {
    for (u, v) in [(u1, v1), (u2, v2)] {
        let n = u.norm_sqr() + v.norm_sqr();
        if (n - 1.0).abs() > 1e-10 {
            return Err(DispersionError::NotNormalized(n));
        }
    }
    let c1 = Mat2::new(u1, v1, -v1.conj(), u1.conj());
    let c2 = Mat2::new(u2, -v2, v2.conj(), u2.conj());
    Ok((Unitary::new(c1)?, Unitary::new(c2)?))
}

impl SplitStepParams {
    pub fn from_coins(u1: C64, v1: C64, u2: C64, v2: C64) -> Result<Self, DispersionError> {
        split_step_coins(u1, v1, u2, v2)?;
        let uu = u1 * u2;
        Ok(SplitStepParams { u_tilde: uu.norm(), v_tilde: (v1 * v2.conj()).re, phi: uu.arg() })
    }
}

/// Closed-form bands `cos ω = ũ cos(k+φ) + ṽ`, `ω_± = ±arccos(…)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStepBands {
    pub params: SplitStepParams,
}

impl SplitStepBands {
    fn x(&self, k: f64) -> f64 {
        let p = &self.params;
        (p.u_tilde * (k + p.phi).cos() + p.v_tilde).clamp(-1.0, 1.0)
    }

    /// `[ω₊(k), ω₋(k)]`.
    pub fn omega(&self, k: f64) -> [f64; 2] {
        let w = self.x(k).acos();
        [w, -w]
    }

    /// `dω_±/dk = ±ũ sin(k+φ) / √(1 − (ũ cos(k+φ) + ṽ)²)`.
    pub fn group_velocity(&self, k: f64) -> [f64; 2] {
        let p = &self.params;
        let x = self.x(k);
        let v = p.u_tilde * (k + p.phi).sin() / (1.0 - x * x).sqrt();
        [v, -v]
    }

    /// `v_g` exactly as printed, `±ũ sin(k+φ) / (1 − (ũ cos(k+φ) − ṽ)²)`;
    /// kept only to compare against [`SplitStepBands::group_velocity`].
    pub fn printed_group_velocity(&self, k: f64) -> [f64; 2] {
        let p = &self.params;
        let y = p.u_tilde * (k + p.phi).cos() - p.v_tilde;
        let v = p.u_tilde * (k + p.phi).sin() / (1.0 - y * y);
        [v, -v]
    }

    /// Admissible `cos(k*+φ)` solving `ω''(k*) = 0`; `None` for flat bands.
    pub fn inflection_cosine(&self) -> Option<f64> {
        let p = &self.params;
        if p.u_tilde <= 1e-14 {
            return None;
        }
        let uv = p.u_tilde * p.v_tilde;
        if uv.abs() <= 1e-14 {
            return Some(0.0);
        }
        // c² − 2a′c + 1 = 0; the roots multiply to one, keep the one in [−1, 1]
        let a = (1.0 - p.u_tilde * p.u_tilde - p.v_tilde * p.v_tilde) / (2.0 * uv);
        let root = (a * a - 1.0).max(0.0).sqrt();
        Some((a - a.signum() * root).clamp(-1.0, 1.0))
    }

    /// Inflection points `k*` in `[−π, π)`, two per band.
    pub fn inflection_points(&self) -> Vec<f64> {
        match self.inflection_cosine() {
            None => Vec::new(),
            Some(c) => {
                let t = c.acos();
                vec![wrap(t - self.params.phi), wrap(-t - self.params.phi)]
            }
        }
    }

    /// Distinct wavefront speeds, ascending.
    pub fn wavefront_speeds(&self, tol: f64) -> Vec<f64> {
        let raw = self
            .inflection_points()
            .into_iter()
            .flat_map(|k| self.group_velocity(k))
            .collect();
        merge_speeds(raw, tol).into_iter().map(|c| c.speed).collect()
    }
}

pub fn split_step_bands(params: SplitStepParams) -> SplitStepBands {
    SplitStepBands { params }
}

/// Largest `|v_g|` over all branches and grid points.
pub fn max_speed(spec: &DispersionSpectrum) -> f64 {
    group_velocities(spec).iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}
