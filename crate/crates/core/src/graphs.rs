//! Position-dependent coin programs that confine the walker to circles and
//! figure-eight graphs, and the maps from line coordinates to graph sites.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Unitary2, Unitary4};
use crate::optics::{full_coin, mode, ArmSetting, CoinSetting, OpticalElement};
use crate::walk::{make_initial, CoinEntry, CoinLayer, CoinProgram, Direction, IntensityRecord, Polarization, WalkerState};

/// Intensity outside the mapped support above this raises a leak warning.
pub const LEAK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("even size required: num_sites must be even and ≥ 4, got {0}")]
    BadCircleSize(usize),
    #[error("figure-eight needs left_end < center < right_end, got {left_end}, {center}, {right_end}")]
    BadFigureEight { left_end: i64, center: i64, right_end: i64 },
    #[error("start position {x} is not a site of the graph")]
    StartOutside { x: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    NonMixing,
    HadamardLike,
}

/// Initial localized state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Start {
    pub x: i64,
    pub direction: Direction,
    pub polarization: Polarization,
}

impl Start {
    pub fn state(&self) -> WalkerState {
        make_initial(self.direction, self.polarization, self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub num_sites: usize,
    pub left_end: i64,
    pub flavor: Flavor,
    pub start: Start,
}

impl CircleSpec {
    pub fn half(&self) -> i64 {
        (self.num_sites / 2) as i64
    }

    pub fn right_end(&self) -> i64 {
        self.left_end + self.half()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureEightSpec {
    pub left_end: i64,
    pub center: i64,
    pub right_end: i64,
    pub flavor: Flavor,
    pub start: Start,
}

impl FigureEightSpec {
    pub fn num_nodes(&self) -> usize {
        (2 * (self.right_end - self.left_end) - 1) as usize
    }

    pub fn center_node(&self) -> usize {
        (2 * (self.center - self.left_end) - 1) as usize
    }
}

impl Default for FigureEightSpec {
    fn default() -> Self {
        FigureEightSpec {
            left_end: -4,
            center: 0,
            right_end: 4,
            flavor: Flavor::NonMixing,
            start: Start { x: 0, direction: Direction::Ccw, polarization: Polarization::V },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Circle { left: i64, right: i64 },
    FigureEight { left: i64, center: i64, right: i64 },
}

/// Assigns each `(x, mode)` on the line to a graph site `m`, or to nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteMap {
    shape: Shape,
}

fn is_cc(d: usize) -> bool {
    d == mode::CCH || d == mode::CCV
}

impl SiteMap {
    pub fn num_sites(&self) -> usize {
        match self.shape {
            Shape::Circle { left, right } => (2 * (right - left)) as usize,
            Shape::FigureEight { left, right, .. } => (2 * (right - left) - 1) as usize,
        }
    }

    pub fn site(&self, x: i64, d: usize) -> Option<usize> {
        match self.shape {
            Shape::Circle { left, right } => {
                let n = right - left;
                let m = if x == left {
                    (d == mode::CCH || d == mode::CV).then_some(1)
                } else if x == right {
                    (d == mode::CCV || d == mode::CH).then_some(n + 1)
                } else if left < x && x < right {
                    Some(if is_cc(d) { 1 + x - left } else { n + 1 + right - x })
                } else {
                    None
                };
                m.map(|m| m.rem_euclid(2 * n) as usize)
            }
            Shape::FigureEight { left, center, right } => {
                let (nl, nr) = (center - left, right - center);
                let m = if x == center {
                    Some(2 * nl - 1)
                } else if x == left {
                    (d == mode::CCH || d == mode::CV).then_some(nl - 1)
                } else if x == right {
                    (d == mode::CCV || d == mode::CH).then_some(2 * nl + nr - 1)
                } else if left < x && x < center {
                    Some(if is_cc(d) { center - 1 - x } else { nl - 1 + (x - left) })
                } else if center < x && x < right {
                    Some(if is_cc(d) { 2 * nl + (x - center - 1) } else { 2 * nl + nr - 1 + (right - x) })
                } else {
                    None
                };
                m.map(|m| m as usize)
            }
        }
    }

    /// All `(x, mode)` pairs mapped to site `m`.
    pub fn preimage(&self, m: usize) -> Vec<(i64, usize)> {
        let (lo, hi) = match self.shape {
            Shape::Circle { left, right } => (left, right),
            Shape::FigureEight { left, right, .. } => (left, right),
        };
        (lo..=hi)
            .flat_map(|x| (0..4).map(move |d| (x, d)))
            .filter(|&(x, d)| self.site(x, d) == Some(m))
            .collect()
    }
}

/// One step whose intensity outside the mapped support exceeded [`LEAK_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakWarning {
    pub step: usize,
    pub intensity: f64,
}

/// Intensities re-indexed by graph site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteRecord {
    /// `sites[t][m]`.
    pub sites: Vec<Vec<f64>>,
    /// Unmapped intensity per step.
    pub leakage: Vec<f64>,
    pub warnings: Vec<LeakWarning>,
}

impl SiteRecord {
    pub fn total(&self, t: usize) -> f64 {
        self.sites[t].iter().sum()
    }
}

pub fn map_sites(site_map: &SiteMap, record: &IntensityRecord) -> SiteRecord {
    let n = site_map.num_sites();
    let mut sites = Vec::with_capacity(record.steps.len());
    let mut leakage = Vec::with_capacity(record.steps.len());
    let mut warnings = Vec::new();
    for (t, step) in record.steps.iter().enumerate() {
        let mut p = vec![0.0; n];
        let mut leak = 0.0;
        for (&x, ints) in step {
            for (d, &v) in ints.iter().enumerate() {
                match site_map.site(x, d) {
                    Some(m) => p[m] += v,
                    None => leak += v,
                }
            }
        }
        if leak > LEAK_TOL {
            warn!("step {t}: intensity {leak:.3e} outside the graph support");
            warnings.push(LeakWarning { step: t, intensity: leak });
        }
        sites.push(p);
        leakage.push(leak);
    }
    SiteRecord { sites, leakage, warnings }
}

pub fn line_program(c_a: &Unitary2, c_b: &Unitary2, c_l: &Unitary2) -> CoinProgram {
    CoinProgram::uniform(full_coin(c_a, c_b, c_l))
}

pub fn line_program_setting(setting: &CoinSetting) -> CoinProgram {
    CoinProgram::uniform_setting(setting.clone())
}

fn setting(arm_eom: f64, loop_elements: Vec<OpticalElement>) -> CoinSetting {
    let arm = ArmSetting::new(vec![OpticalElement::qwp(45.0)], arm_eom);
    CoinSetting { arm_a: arm.clone(), arm_b: arm, loop_elements }
}

/// Inner-position setting: arms `−iX`; loop `X` or `H′`.
pub fn inner_setting(flavor: Flavor) -> CoinSetting {
    match flavor {
        Flavor::NonMixing => setting(0.0, vec![OpticalElement::hwp(45.0)]),
        Flavor::HadamardLike => setting(0.0, vec![OpticalElement::qwp(45.0)]),
    }
}

/// End-position setting: arms `𝟙`, loop `i𝟙`; or arms `H′`, loop `𝟙`.
pub fn end_setting(flavor: Flavor) -> CoinSetting {
    match flavor {
        Flavor::NonMixing => setting(-90.0, vec![OpticalElement::hwp(45.0), OpticalElement::eom(-90.0)]),
        Flavor::HadamardLike => setting(-45.0, vec![OpticalElement::qwp(45.0), OpticalElement::eom(-45.0)]),
    }
}

/// Figure-eight center: arms `𝟙`, loop `X`; or `H′` everywhere.
pub fn center_setting(flavor: Flavor) -> CoinSetting {
    match flavor {
        Flavor::NonMixing => setting(-90.0, vec![OpticalElement::hwp(45.0)]),
        Flavor::HadamardLike => setting(-45.0, vec![OpticalElement::qwp(45.0)]),
    }
}

fn masked_program(inner: CoinSetting, overrides: &[(i64, CoinSetting)]) -> CoinProgram {
    let mut layer = CoinLayer::uniform(CoinEntry::from_setting(inner));
    for (x, s) in overrides {
        layer.sites.insert(*x, CoinEntry::from_setting(s.clone()));
    }
    CoinProgram::new(vec![layer]).expect("one layer")
}

pub fn circle_program(spec: &CircleSpec) -> Result<(CoinProgram, SiteMap), GraphError> {
    if spec.num_sites < 4 || !spec.num_sites.is_multiple_of(2) {
        return Err(GraphError::BadCircleSize(spec.num_sites));
    }
    let (left, right) = (spec.left_end, spec.right_end());
    if spec.start.x < left || spec.start.x > right {
        return Err(GraphError::StartOutside { x: spec.start.x });
    }
    let end = end_setting(spec.flavor);
    let program = masked_program(inner_setting(spec.flavor), &[(left, end.clone()), (right, end)]);
    Ok((program, SiteMap { shape: Shape::Circle { left, right } }))
}

pub fn figure_eight_program(spec: &FigureEightSpec) -> Result<(CoinProgram, SiteMap), GraphError> {
    let (left, center, right) = (spec.left_end, spec.center, spec.right_end);
    if !(left < center && center < right) {
        return Err(GraphError::BadFigureEight { left_end: left, center, right_end: right });
    }
    if spec.start.x < left || spec.start.x > right {
        return Err(GraphError::StartOutside { x: spec.start.x });
    }
    let end = end_setting(spec.flavor);
    let program = masked_program(
        inner_setting(spec.flavor),
        &[(left, end.clone()), (right, end), (center, center_setting(spec.flavor))],
    );
    Ok((program, SiteMap { shape: Shape::FigureEight { left, center, right } }))
}

/// The coin matrix used at each position of a graph program's first layer.
pub fn coin_table(program: &CoinProgram) -> (Option<Unitary4>, BTreeMap<i64, Unitary4>) {
    let layer = &program.layers()[0];
    (layer.default.as_ref().map(|e| e.matrix), layer.sites.iter().map(|(x, e)| (*x, e.matrix)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, max_abs_diff, Mat4};
    use crate::optics::{eom_matrix, h_prime, minus_i_x, pauli_x, scalar2};
    use crate::walk::evolve;

    fn circle(n: usize, left: i64, flavor: Flavor, start: Start) -> CircleSpec {
        CircleSpec { num_sites: n, left_end: left, flavor, start }
    }

    fn start(x: i64) -> Start {
        Start { x, direction: Direction::Ccw, polarization: Polarization::D }
    }

    fn all_starts(map: &SiteMap, lo: i64, hi: i64) -> Vec<WalkerState> {
        let mut out = Vec::new();
        for x in lo..=hi {
            for d in 0..4 {
                if map.site(x, d).is_some() {
                    let mut a = [c64(0.0, 0.0); 4];
                    a[d] = c64(1.0, 0.0);
                    let mut s = WalkerState::new();
                    s.set(x, a);
                    out.push(s);
                }
            }
        }
        out
    }

    #[test]
    fn table_settings_match_matrices() {
        let one = Unitary2::identity();
        let i1 = scalar2(c64(0.0, 1.0));
        let x = pauli_x();
        let hp = h_prime();
        let cases = [
            (inner_setting(Flavor::NonMixing), full_coin(&minus_i_x(), &minus_i_x(), &x)),
            (end_setting(Flavor::NonMixing), full_coin(&one, &one, &i1)),
            (inner_setting(Flavor::HadamardLike), full_coin(&minus_i_x(), &minus_i_x(), &hp)),
            (end_setting(Flavor::HadamardLike), full_coin(&hp, &hp, &one)),
            (center_setting(Flavor::NonMixing), full_coin(&one, &one, &x)),
            (center_setting(Flavor::HadamardLike), full_coin(&hp, &hp, &hp)),
        ];
        for (s, m) in cases {
            assert!(max_abs_diff(s.coin().matrix(), m.matrix()) < 1e-14, "{s:?}");
        }
    }

    #[test]
    fn hadamard_like_center_matches_printed_up_to_cc_sign() {
        // printed entries equal D·C·D with D = diag(1, 1, −1, −1)
        let c = center_setting(Flavor::HadamardLike).coin();
        let printed = full_coin(&eom_matrix(-45.0), &eom_matrix(-45.0), &h_prime());
        let d = Mat4::from_diagonal(&nalgebra::Vector4::new(c64(1.0, 0.0), c64(1.0, 0.0), c64(-1.0, 0.0), c64(-1.0, 0.0)));
        assert!(max_abs_diff(&(d * c.matrix() * d), printed.matrix()) < 1e-14);
    }

    #[test]
    fn published_site_correspondences() {
        let (_, map) = circle_program(&circle(10, -1, Flavor::NonMixing, start(0))).unwrap();
        assert_eq!(map.site(0, mode::CCH), Some(2));
        assert_eq!(map.site(0, mode::CCV), Some(2));
        let (_, map) = circle_program(&circle(8, -2, Flavor::HadamardLike, start(0))).unwrap();
        let mut seen: Vec<usize> = (-2..=2).flat_map(|x| (0..4).filter_map(move |d| map.site(x, d))).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        assert_eq!(map.site(3, mode::CCH), None);
    }

    #[test]
    fn site_map_is_bijective_on_subspaces() {
        for (n, left) in [(4usize, 0i64), (8, -2), (10, -1), (16, -4)] {
            let (_, map) = circle_program(&circle(n, left, Flavor::NonMixing, start(left))).unwrap();
            for m in 0..n {
                let pre = map.preimage(m);
                assert_eq!(pre.len(), 2, "m={m}: {pre:?}");
                assert_eq!(pre[0].0, pre[1].0, "one position per site");
            }
        }
        let spec = FigureEightSpec::default();
        let (_, map) = figure_eight_program(&spec).unwrap();
        assert_eq!(map.num_sites(), 15);
        assert_eq!(spec.center_node(), 7);
        for m in 0..15 {
            let expect = if m == 7 { 4 } else { 2 };
            assert_eq!(map.preimage(m).len(), expect, "m={m}");
        }
    }

    #[test]
    fn circles_do_not_leak() {
        for flavor in [Flavor::NonMixing, Flavor::HadamardLike] {
            for (n, left) in [(4usize, 0i64), (8, -2), (10, -1), (16, -4)] {
                let spec = circle(n, left, flavor, start(left + 1));
                let (prog, map) = circle_program(&spec).unwrap();
                for init in all_starts(&map, left, spec.right_end()) {
                    let rec = evolve(&init, &prog, 4 * n).unwrap();
                    let sites = map_sites(&map, &rec);
                    assert!(sites.warnings.is_empty());
                    for t in 0..=4 * n {
                        assert!(sites.leakage[t] <= 1e-12);
                        assert!((sites.total(t) - 1.0).abs() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn non_mixing_circle_rotates() {
        for (n, left) in [(4usize, 0i64), (8, -2), (10, -1), (16, -4)] {
            let spec = circle(n, left, Flavor::NonMixing, start(left + 1));
            let (prog, map) = circle_program(&spec).unwrap();
            for init in all_starts(&map, left, spec.right_end()) {
                let rec = evolve(&init, &prog, 2 * n).unwrap();
                let sites = map_sites(&map, &rec);
                let occupied: Vec<usize> = sites
                    .sites
                    .iter()
                    .map(|p| {
                        let (m, v) = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
                        assert!((v - 1.0).abs() < 1e-12, "single site occupied");
                        m
                    })
                    .collect();
                // oracle: m(t) = m(0) + s·t mod 2N with a fixed orientation s = ±1
                let s = (occupied[1] + n - occupied[0]) % n;
                assert!(s == 1 || s == n - 1);
                for (t, &m) in occupied.iter().enumerate() {
                    assert_eq!(m, (occupied[0] + s * t) % n);
                }
                assert_eq!(occupied[2 * n], occupied[0]);
            }
        }
    }

    #[test]
    fn occupied_parity_alternates() {
        let spec = circle(10, -1, Flavor::HadamardLike, start(0));
        let (prog, map) = circle_program(&spec).unwrap();
        let rec = evolve(&spec.start.state(), &prog, 30).unwrap();
        let sites = map_sites(&map, &rec);
        for (t, p) in sites.sites.iter().enumerate() {
            for (m, v) in p.iter().enumerate() {
                if (m + t) % 2 != 0 {
                    assert!(*v < 1e-14, "t={t} m={m} v={v}");
                }
            }
        }
    }

    #[test]
    fn sixteen_site_direction_switch_at_step_four() {
        let spec = circle(16, -4, Flavor::HadamardLike, start(0));
        let (prog, _) = circle_program(&spec).unwrap();
        let rec = evolve(&spec.start.state(), &prog, 6).unwrap();
        let cw = |t: usize, x: i64| rec.steps[t].get(&x).map(|a| a[0] + a[1]).unwrap_or(0.0);
        let cc = |t: usize, x: i64| rec.steps[t].get(&x).map(|a| a[2] + a[3]).unwrap_or(0.0);
        for x in [-4, 4] {
            assert!(cc(4, x) > 1e-3 && cw(4, x) < 1e-14, "x={x}");
            assert!(cw(5, x + if x < 0 { 1 } else { -1 }) > 1e-3);
        }
        for t in 0..=4 {
            for x in -4..=4 {
                assert!(cw(t, x) < 1e-14, "no cw before the ends are reached: t={t} x={x}");
            }
        }
    }

    #[test]
    fn figure_eights_do_not_leak() {
        for flavor in [Flavor::NonMixing, Flavor::HadamardLike] {
            for (l, c, r) in [(-4, 0, 4), (-3, 0, 5), (-1, 0, 2), (-2, 0, 1), (-1, 0, 1)] {
                let spec = FigureEightSpec { left_end: l, center: c, right_end: r, flavor, start: start(c) };
                let (prog, map) = figure_eight_program(&spec).unwrap();
                for init in all_starts(&map, l, r) {
                    let rec = evolve(&init, &prog, 40).unwrap();
                    let sites = map_sites(&map, &rec);
                    assert!(sites.leakage.iter().all(|&v| v <= 1e-12));
                }
            }
        }
    }

    #[test]
    fn figure_eight_light_returns_to_center() {
        let spec = FigureEightSpec::default();
        let (prog, map) = figure_eight_program(&spec).unwrap();
        let rec = evolve(&spec.start.state(), &prog, 16).unwrap();
        let sites = map_sites(&map, &rec);
        let center = spec.center_node();
        for t in 1..=16 {
            let at_center = sites.sites[t][center];
            if t == 8 || t == 16 {
                assert!((at_center - 1.0).abs() < 1e-12, "t={t}");
            } else {
                assert!(at_center < 1e-12, "t={t}");
            }
        }
    }

    #[test]
    fn invalid_geometries_rejected() {
        assert_eq!(circle_program(&circle(7, 0, Flavor::NonMixing, start(0))).unwrap_err(), GraphError::BadCircleSize(7));
        assert_eq!(circle_program(&circle(2, 0, Flavor::NonMixing, start(0))).unwrap_err(), GraphError::BadCircleSize(2));
        let bad = FigureEightSpec { left_end: 0, center: 0, right_end: 3, ..FigureEightSpec::default() };
        assert!(matches!(figure_eight_program(&bad), Err(GraphError::BadFigureEight { .. })));
    }

    #[test]
    fn injected_leak_is_flagged() {
        let spec = circle(8, -2, Flavor::NonMixing, start(0));
        let (prog, map) = circle_program(&spec).unwrap();
        let mut rec = evolve(&spec.start.state(), &prog, 3).unwrap();
        rec.steps[2].insert(10, [1e-6, 0.0, 0.0, 0.0]);
        let sites = map_sites(&map, &rec);
        assert_eq!(sites.warnings, vec![LeakWarning { step: 2, intensity: 1e-6 }]);
    }

    #[test]
    fn uniform_record_maps_uniformly() {
        let spec = circle(8, -2, Flavor::NonMixing, start(0));
        let (_, map) = circle_program(&spec).unwrap();
        let mut step = BTreeMap::new();
        for x in -2..=2 {
            let mut a = [0.0; 4];
            for (d, v) in a.iter_mut().enumerate() {
                if map.site(x, d).is_some() {
                    *v = 1.0 / 16.0;
                }
            }
            step.insert(x, a);
        }
        let rec = IntensityRecord { steps: vec![step] };
        let sites = map_sites(&map, &rec);
        for v in &sites.sites[0] {
            assert!((v - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn line_program_is_uniform() {
        let p = line_program(&minus_i_x(), &minus_i_x(), &h_prime());
        let (default, sites) = coin_table(&p);
        assert!(sites.is_empty());
        assert_eq!(default.unwrap(), full_coin(&minus_i_x(), &minus_i_x(), &h_prime()));
    }
}
