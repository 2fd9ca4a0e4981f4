//! Similarity metrics, equidistribution and revival detection, and Monte
//! Carlo error bars for imperfect detectors and element angles.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::SiteMap;
use crate::walk::{evolve, CoinProgram, IntensityRecord, WalkError, WalkerState};

/// Default tolerance for revivals of ideal runs.
pub const REVIVAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("negative intensity {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("average over zero steps")]
    EmptyAverage,
    #[error("average over {t} steps requested but only {len} available")]
    AverageTooLong { t: usize, len: usize },
    #[error("empty support")]
    EmptySupport,
    #[error("Monte Carlo needs at least one sample")]
    NoSamples,
    #[error("walk: {0}")]
    Walk(#[from] WalkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Sum over every `(d, x)`.
    Resolved,
    /// Modes traced out first.
    PositionOnly,
}

/// `|Σ √(p·q)|²` over aligned entries; the shorter input is padded with 0.
pub fn similarity(p: &[f64], q: &[f64]) -> Result<f64, AnalysisError> {
    for (index, &value) in p.iter().chain(q).enumerate() {
        if value < 0.0 {
            return Err(AnalysisError::NegativeEntry { index: index % p.len().max(1), value });
        }
    }
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(s * s)
}

fn aligned(a: &BTreeMap<i64, [f64; 4]>, b: &BTreeMap<i64, [f64; 4]>, resolution: Resolution) -> (Vec<f64>, Vec<f64>) {
    let keys: BTreeSet<i64> = a.keys().chain(b.keys()).copied().collect();
    let zero = [0.0; 4];
    let mut p = Vec::new();
    let mut q = Vec::new();
    for x in keys {
        let (u, v) = (a.get(&x).unwrap_or(&zero), b.get(&x).unwrap_or(&zero));
        match resolution {
            Resolution::Resolved => {
                p.extend_from_slice(u);
                q.extend_from_slice(v);
            }
            Resolution::PositionOnly => {
                p.push(u.iter().sum());
                q.push(v.iter().sum());
            }
        }
    }
    (p, q)
}

/// Similarity of two records at one step.
pub fn step_similarity(a: &IntensityRecord, b: &IntensityRecord, t: usize, resolution: Resolution) -> Result<f64, AnalysisError> {
    let (p, q) = aligned(&a.steps[t], &b.steps[t], resolution);
    similarity(&p, &q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    /// `𝒮(t)` for `t = 0..=T`.
    pub per_step: Vec<f64>,
    /// Mean over `t = 1..=T`.
    pub average: f64,
    pub resolution: Resolution,
}

/// Compares two records step by step over their common length.
pub fn compare_records(a: &IntensityRecord, b: &IntensityRecord, resolution: Resolution) -> Result<SimilarityReport, AnalysisError> {
    let n = a.steps.len().min(b.steps.len());
    let per_step = (0..n).map(|t| step_similarity(a, b, t, resolution)).collect::<Result<Vec<_>, _>>()?;
    let average = average_similarity(&per_step[1.min(n)..], n.saturating_sub(1))?;
    Ok(SimilarityReport { per_step, average, resolution })
}

/// Mean of the first `t` entries.
pub fn average_similarity(per_step: &[f64], t: usize) -> Result<f64, AnalysisError> {
    if t == 0 {
        return Err(AnalysisError::EmptyAverage);
    }
    if t > per_step.len() {
        return Err(AnalysisError::AverageTooLong { t, len: per_step.len() });
    }
    Ok(per_step[..t].iter().sum::<f64>() / t as f64)
}

/// Similarity of `values` to the flat distribution on the same entries.
/// Without renormalization, intensity missing from `values` lowers the score.
pub fn flat_similarity(values: &[f64], renormalize: bool) -> Result<f64, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptySupport);
    }
    let total: f64 = values.iter().sum();
    let scale = if renormalize && total > 0.0 { 1.0 / total } else { 1.0 };
    let p: Vec<f64> = values.iter().map(|v| v * scale).collect();
    let flat = vec![1.0 / values.len() as f64; values.len()];
    similarity(&p, &flat)
}

/// Position-traced similarity to the flat distribution on `support`.
pub fn equidistribution_similarity(record: &IntensityRecord, t: usize, support: &[i64], renormalize: bool) -> Result<f64, AnalysisError> {
    let dist = record.position_distribution(t);
    let values: Vec<f64> = support.iter().map(|x| dist.get(x).copied().unwrap_or(0.0)).collect();
    flat_similarity(&values, renormalize)
}

/// Same on graph sites `m`, given a per-step site table.
pub fn site_equidistribution(sites: &[f64], support: &[usize], renormalize: bool) -> Result<f64, AnalysisError> {
    flat_similarity(&support.iter().map(|&m| sites[m]).collect::<Vec<_>>(), renormalize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RevivalKind {
    Perfect,
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revival {
    pub step: usize,
    pub shift: usize,
    pub kind: RevivalKind,
}

/// Steps `t ≥ 1` whose site distribution matches step 0 up to a cyclic
/// shift (or exactly, when `cyclic` is false) with similarity ≥ 1 − tol.
pub fn find_revivals(sites: &[Vec<f64>], tol: f64, cyclic: bool) -> Result<Vec<Revival>, AnalysisError> {
    let Some(first) = sites.first() else { return Ok(Vec::new()) };
    let n = first.len();
    let shifts = if cyclic { n } else { 1.min(n) };
    let mut out = Vec::new();
    for (step, p) in sites.iter().enumerate().skip(1) {
        for shift in 0..shifts {
            let rotated: Vec<f64> = (0..n).map(|m| first[(m + n - shift) % n]).collect();
            if similarity(p, &rotated)? >= 1.0 - tol {
                let kind = if shift == 0 { RevivalKind::Perfect } else { RevivalKind::Shifted };
                out.push(Revival { step, shift, kind });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationDist {
    Uniform,
    /// Normal with σ = range/2, redrawn until inside the range.
    TruncatedNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub n_samples: usize,
    /// Relative detection-efficiency range per mode.
    pub eff_err: f64,
    /// Angle range in degrees, applied to every waveplate and active EOM.
    pub angle_err: f64,
    pub seed: u64,
    pub distribution: PerturbationDist,
    /// Renormalize each perturbed step to unit total intensity.
    pub renormalize: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n_samples: 1000,
            eff_err: 0.025,
            angle_err: 1.0,
            seed: 0,
            distribution: PerturbationDist::Uniform,
            renormalize: true,
        }
    }
}

/// Standard deviations of perturbed samples from the reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBarReport {
    pub reference: IntensityRecord,
    /// `sigma.steps[t][x][d]`.
    pub sigma: IntensityRecord,
    pub config: MonteCarloConfig,
    pub reference_id: String,
}

fn draw(rng: &mut ChaCha8Rng, range: f64, dist: PerturbationDist) -> f64 {
    if range == 0.0 {
        return 0.0;
    }
    match dist {
        PerturbationDist::Uniform => rng.random_range(-range..=range),
        PerturbationDist::TruncatedNormal => {
            let normal = Normal::new(0.0, range / 2.0).expect("positive σ");
            loop {
                let v: f64 = normal.sample(rng);
                if v.abs() <= range {
                    return v;
                }
            }
        }
    }
}

/// One perturbed sample. Sample `i` uses stream `i` of the seeded generator,
/// so samples are independent of evaluation order.
pub fn perturbed_sample(
    initial: &WalkerState,
    program: &CoinProgram,
    steps: usize,
    config: &MonteCarloConfig,
    index: u64,
) -> Result<IntensityRecord, AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let eff: [f64; 4] = std::array::from_fn(|_| 1.0 + draw(&mut rng, config.eff_err, config.distribution));
    let perturbed = program.perturbed(&mut || draw(&mut rng, config.angle_err, config.distribution));
    let mut record = evolve(initial, &perturbed, steps)?;
    for step in &mut record.steps {
        for ints in step.values_mut() {
            for (v, e) in ints.iter_mut().zip(eff) {
                *v *= e;
            }
        }
    }
    Ok(if config.renormalize { record.renormalized() } else { record })
}

pub fn monte_carlo_error_bars(
    initial: &WalkerState,
    program: &CoinProgram,
    steps: usize,
    config: &MonteCarloConfig,
    reference_id: &str,
) -> Result<ErrorBarReport, AnalysisError> {
    if config.n_samples == 0 {
        return Err(AnalysisError::NoSamples);
    }
    let reference = evolve(initial, program, steps)?;
    let reference = if config.renormalize { reference.renormalized() } else { reference };
    let mut sum_sq: Vec<BTreeMap<i64, [f64; 4]>> = vec![BTreeMap::new(); steps + 1];
    for i in 0..config.n_samples {
        let sample = perturbed_sample(initial, program, steps, config, i as u64)?;
        for (t, acc) in sum_sq.iter_mut().enumerate() {
            let keys: BTreeSet<i64> = sample.steps[t].keys().chain(reference.steps[t].keys()).copied().collect();
            for x in keys {
                let s = sample.steps[t].get(&x).copied().unwrap_or([0.0; 4]);
                let r = reference.steps[t].get(&x).copied().unwrap_or([0.0; 4]);
                let slot = acc.entry(x).or_insert([0.0; 4]);
                for d in 0..4 {
                    slot[d] += (s[d] - r[d]).powi(2);
                }
            }
        }
    }
    let n = config.n_samples as f64;
    let sigma = IntensityRecord {
        steps: sum_sq
            .into_iter()
            .map(|step| step.into_iter().map(|(x, v)| (x, v.map(|s| (s / n).sqrt()))).collect())
            .collect(),
    };
    Ok(ErrorBarReport { reference, sigma, config: *config, reference_id: reference_id.to_string() })
}

impl ErrorBarReport {
    /// Per-position deviations with modes combined in quadrature.
    pub fn position_sigma(&self, t: usize) -> BTreeMap<i64, f64> {
        self.sigma.steps[t].iter().map(|(&x, v)| (x, v.iter().map(|s| s * s).sum::<f64>().sqrt())).collect()
    }

    /// Per-site deviations on a graph, combined in quadrature.
    pub fn site_sigma(&self, map: &SiteMap, t: usize) -> Vec<f64> {
        let mut var = vec![0.0; map.num_sites()];
        for (&x, v) in &self.sigma.steps[t] {
            for (d, s) in v.iter().enumerate() {
                if let Some(m) = map.site(x, d) {
                    var[m] += s * s;
                }
            }
        }
        var.into_iter().map(f64::sqrt).collect()
    }

    /// All deviations flattened in `(t, x, d)` order.
    pub fn flat(&self) -> Vec<f64> {
        self.sigma.steps.iter().flat_map(|s| s.values().flat_map(|v| v.iter().copied())).collect()
    }
}

/// Error of `𝒮(p, q)` for independent errors `sigma_p` on `p`, combined in
/// quadrature. Each entry contributes `2√𝒮·√q_i·(√(p_i + σ_i) − √p_i)`,
/// the first-order term when `σ_i ≪ p_i` and finite as `p_i → 0`.
pub fn similarity_error(p: &[f64], q: &[f64], sigma_p: &[f64]) -> Result<f64, AnalysisError> {
    let root = similarity(p, q)?.sqrt();
    let mut var = 0.0;
    for ((&pi, &qi), &si) in p.iter().zip(q).zip(sigma_p) {
        let term = 2.0 * root * qi.sqrt() * ((pi + si).sqrt() - pi.sqrt());
        var += term * term;
    }
    Ok(var.sqrt())
}

/// Error bar of [`flat_similarity`] (without renormalization).
pub fn flat_similarity_error(values: &[f64], sigmas: &[f64]) -> Result<f64, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptySupport);
    }
    let flat = vec![1.0 / values.len() as f64; values.len()];
    similarity_error(values, &flat, sigmas)
}

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Local maxima of a position distribution that exceed `rel_threshold`
/// times its peak, as parabolic-interpolated positions in ascending order.
/// Only the sublattice of the peak's parity is scanned, since a localized
/// start occupies every other site.
pub fn local_maxima(dist: &BTreeMap<i64, f64>, rel_threshold: f64) -> Vec<f64> {
    let Some((&x_peak, &peak)) = dist.iter().max_by(|a, b| a.1.total_cmp(b.1)) else { return Vec::new() };
    if peak <= 0.0 {
        return Vec::new();
    }
    let at = |x: i64| dist.get(&x).copied().unwrap_or(0.0);
    let (lo, hi) = (*dist.keys().next().unwrap(), *dist.keys().next_back().unwrap());
    let start = lo - (lo - x_peak).rem_euclid(2);
    let mut out = Vec::new();
    let mut x = start;
    while x <= hi {
        let (l, c, r) = (at(x - 2), at(x), at(x + 2));
        if c > l && c >= r && c >= rel_threshold * peak {
            let curv = l - 2.0 * c + r;
            let offset = if curv < 0.0 { (l - r) / curv } else { 0.0 };
            out.push(x as f64 + offset);
        }
        x += 2;
    }
    out
}

/// Least-squares slopes of the leftmost and rightmost local maxima over
/// steps `from..=to`.
pub fn outer_peak_drift(record: &IntensityRecord, from: usize, to: usize, rel_threshold: f64) -> Option<(f64, f64)> {
    let mut pts = Vec::new();
    for t in from..=to.min(record.num_steps()) {
        let m = local_maxima(&record.position_distribution(t), rel_threshold);
        pts.push((t as f64, *m.first()?, *m.last()?));
    }
    if pts.len() < 2 {
        return None;
    }
    let slope = |ys: &[(f64, f64)]| {
        let n = ys.len() as f64;
        let (mt, my) = (ys.iter().map(|p| p.0).sum::<f64>() / n, ys.iter().map(|p| p.1).sum::<f64>() / n);
        let num: f64 = ys.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let den: f64 = ys.iter().map(|p| (p.0 - mt).powi(2)).sum();
        num / den
    };
    let left: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.1)).collect();
    let right: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.2)).collect();
    Some((slope(&left), slope(&right)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{circle_program, map_sites, CircleSpec, Flavor, Start};
    use crate::optics::full_coin;
    use crate::walk::{make_initial, Direction, Polarization};
    use proptest::prelude::*;

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((similarity(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(similarity(&[1.0, -0.1], &[0.5, 0.5]), Err(AnalysisError::NegativeEntry { .. })));
    }

    #[test]
    fn average_examples() {
        assert_eq!(average_similarity(&[1.0; 5], 5).unwrap(), 1.0);
        assert_eq!(average_similarity(&[1.0, 0.0], 2).unwrap(), 0.5);
        assert_eq!(average_similarity(&[1.0], 0), Err(AnalysisError::EmptyAverage));
        assert!(matches!(average_similarity(&[1.0], 2), Err(AnalysisError::AverageTooLong { .. })));
    }

    fn hadamard_line(steps: usize) -> IntensityRecord {
        let c = full_coin(&crate::optics::hadamard(), &crate::optics::hadamard(), &crate::optics::hadamard());
        let init = crate::walk::make_initial(Direction::Ccw, Polarization::D, 0);
        evolve(&init, &CoinProgram::uniform(c), steps).unwrap()
    }

    #[test]
    fn self_comparison_is_one() {
        let r = hadamard_line(20);
        for res in [Resolution::Resolved, Resolution::PositionOnly] {
            let rep = compare_records(&r, &r, res).unwrap();
            assert!((rep.average - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_examples() {
        assert!((flat_similarity(&[0.25; 4], false).unwrap() - 1.0).abs() < 1e-15);
        assert!((flat_similarity(&[1.0, 0.0, 0.0, 0.0, 0.0], false).unwrap() - 0.2).abs() < 1e-15);
        assert!((flat_similarity(&[0.1; 4], true).unwrap() - 1.0).abs() < 1e-15);
        assert!((flat_similarity(&[0.1; 4], false).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(flat_similarity(&[], false), Err(AnalysisError::EmptySupport));
    }

    fn circle_sites(n: usize, left: i64, flavor: Flavor, start: Start, steps: usize) -> Vec<Vec<f64>> {
        let spec = CircleSpec { num_sites: n, left_end: left, flavor, start };
        let (prog, map) = circle_program(&spec).unwrap();
        map_sites(&map, &evolve(&start.state(), &prog, steps).unwrap()).sites
    }

    fn ccv(x: i64) -> Start {
        Start { x, direction: Direction::Ccw, polarization: Polarization::V }
    }

    #[test]
    fn eight_site_equidistribution_and_revival() {
        let sites = circle_sites(8, -2, Flavor::HadamardLike, ccv(-1), 24);
        assert!(site_equidistribution(&sites[11], &[1, 3, 5, 7], false).unwrap() >= 0.99);
        let rev = find_revivals(&sites, REVIVAL_TOL, true).unwrap();
        let perfect: Vec<usize> = rev.iter().filter(|r| r.kind == RevivalKind::Perfect).map(|r| r.step).collect();
        assert_eq!(perfect, vec![24]);
    }

    #[test]
    fn four_site_shifted_revival() {
        let start = Start { x: 1, direction: Direction::Ccw, polarization: Polarization::D };
        let sites = circle_sites(4, 0, Flavor::HadamardLike, start, 8);
        let rev = find_revivals(&sites, REVIVAL_TOL, true).unwrap();
        assert_eq!(
            rev,
            vec![
                Revival { step: 4, shift: 2, kind: RevivalKind::Shifted },
                Revival { step: 8, shift: 0, kind: RevivalKind::Perfect },
            ]
        );
    }

    #[test]
    fn non_mixing_revival_period() {
        for (n, left) in [(4usize, 0i64), (6, -1), (8, -2), (10, -1), (16, -4)] {
            let sites = circle_sites(n, left, Flavor::NonMixing, ccv(left + 1), 2 * n + 1);
            let perfect: Vec<usize> = find_revivals(&sites, REVIVAL_TOL, true)
                .unwrap()
                .into_iter()
                .filter(|r| r.kind == RevivalKind::Perfect)
                .map(|r| r.step)
                .collect();
            assert_eq!(perfect, vec![n, 2 * n], "N = {}", n / 2);
        }
    }

    fn small_mc(n_samples: usize, seed: u64) -> ErrorBarReport {
        let spec = CircleSpec { num_sites: 8, left_end: -2, flavor: Flavor::HadamardLike, start: ccv(-1) };
        let (prog, _) = circle_program(&spec).unwrap();
        let cfg = MonteCarloConfig { n_samples, seed, ..MonteCarloConfig::default() };
        monte_carlo_error_bars(&spec.start.state(), &prog, 12, &cfg, "test").unwrap()
    }

    #[test]
    fn zero_ranges_give_zero_deviation() {
        let spec = CircleSpec { num_sites: 8, left_end: -2, flavor: Flavor::HadamardLike, start: ccv(-1) };
        let (prog, _) = circle_program(&spec).unwrap();
        let cfg = MonteCarloConfig { n_samples: 5, eff_err: 0.0, angle_err: 0.0, ..MonteCarloConfig::default() };
        let rep = monte_carlo_error_bars(&spec.start.state(), &prog, 12, &cfg, "zero").unwrap();
        assert!(rep.flat().iter().all(|&s| s == 0.0));
        let bad = MonteCarloConfig { n_samples: 0, ..cfg };
        assert_eq!(monte_carlo_error_bars(&spec.start.state(), &prog, 12, &bad, "").unwrap_err(), AnalysisError::NoSamples);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let a = small_mc(50, 7);
        let b = small_mc(50, 7);
        assert_eq!(a, b);
        assert!(a.flat().iter().any(|&s| s > 0.0));
        assert_ne!(a.sigma, small_mc(50, 8).sigma);
    }

    #[test]
    fn monte_carlo_converges() {
        let a = small_mc(250, 1);
        let b = small_mc(1000, 1);
        assert!(relative_l2(&a.flat(), &b.flat()) <= 3.0 / 250f64.sqrt());
    }

    #[test]
    fn truncated_normal_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            assert!(draw(&mut rng, 1.0, PerturbationDist::TruncatedNormal).abs() <= 1.0);
        }
    }

    #[test]
    fn local_maxima_on_sublattice() {
        // peaks at 0 (symmetric) and near 6: parabola through 4, 6, 8
        let dist: BTreeMap<i64, f64> = [(-4, 0.1), (-2, 0.2), (0, 0.4), (2, 0.2), (4, 0.05), (6, 0.3), (8, 0.2)].into_iter().collect();
        let m = local_maxima(&dist, 0.05);
        assert_eq!(m.len(), 2);
        assert!(m[0].abs() < 1e-15);
        // vertex offset h·(l − r)/(2(l − 2c + r)) with h = 2
        let expected = 6.0 + 2.0 * (0.05 - 0.2) / (2.0 * (0.05 - 0.6 + 0.2));
        assert!((m[1] - expected).abs() < 1e-12);
        assert_eq!(local_maxima(&dist, 0.8).len(), 1);
    }

    #[test]
    fn ballistic_peaks_drift_at_unit_speed() {
        // swap arms with an X loop: the cc walker keeps its direction
        let x = crate::optics::minus_i_x();
        let program = CoinProgram::uniform(full_coin(&x, &x, &crate::optics::pauli_x()));
        let rec = evolve(&make_initial(Direction::Ccw, Polarization::V, 0), &program, 10).unwrap();
        let (l, r) = outer_peak_drift(&rec, 2, 10, 0.05).unwrap();
        assert!((l.abs() - 1.0).abs() < 1e-12 && (r.abs() - 1.0).abs() < 1e-12, "{l} {r}");
    }

    #[test]
    fn similarity_error_matches_finite_difference() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = [0.4, 0.3, 0.2, 0.1];
        for i in 0..4 {
            let mut sig = [0.0; 4];
            sig[i] = 1e-6;
            let mut pp = p;
            pp[i] += 1e-6;
            let fd = (similarity(&pp, &q).unwrap() - similarity(&p, &q).unwrap()).abs();
            let est = similarity_error(&p, &q, &sig).unwrap();
            assert!((fd - est).abs() < 1e-10, "{fd} {est}");
        }
    }

    proptest! {
        #[test]
        fn cauchy_schwarz(v in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20), c in 0.1f64..5.0) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
            prop_assume!(sa > 1e-6 && sb > 1e-6);
            let p: Vec<f64> = a.iter().map(|x| x / sa).collect();
            let q: Vec<f64> = b.iter().map(|x| x / sb).collect();
            let s = similarity(&p, &q).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
            let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
            let norm = scaled.iter().sum::<f64>();
            let pp: Vec<f64> = scaled.iter().map(|x| x / norm).collect();
            prop_assert!((similarity(&p, &pp).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
