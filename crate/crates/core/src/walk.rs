//! Amplitude evolution under the flip-flop step and position/time dependent
//! coins, plus the effective two-mode walk used as an oracle.

use std::collections::BTreeMap;

use nalgebra::SVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c64, Unitary2, Unitary4, C64};
use crate::optics::{mode, CoinSetting};

pub type Amp4 = SVector<C64, 4>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("walk: no coin defined for position {x} at step {t}")]
    MissingCoin { t: usize, x: i64 },
    #[error("walk: coin program has no layers")]
    EmptyProgram,
}

/// Amplitudes `α_{d,x}` on a sparse line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WalkerState {
    amps: BTreeMap<i64, Amp4>,
}

impl WalkerState {
    pub fn new() -> Self {
        WalkerState::default()
    }

    /// Sets the four amplitudes at `x`, replacing anything already there.
    pub fn set(&mut self, x: i64, amps: [C64; 4]) {
        self.amps.insert(x, Amp4::from(amps));
    }

    pub fn get(&self, x: i64) -> Amp4 {
        self.amps.get(&x).copied().unwrap_or_else(Amp4::zeros)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Amp4)> {
        self.amps.iter().map(|(x, a)| (*x, a))
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.amps.keys().copied()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_squared()).sum()
    }

    pub fn intensities(&self) -> BTreeMap<i64, [f64; 4]> {
        self.amps
            .iter()
            .map(|(x, a)| (*x, [a[0].norm_sqr(), a[1].norm_sqr(), a[2].norm_sqr(), a[3].norm_sqr()]))
            .collect()
    }

    fn add(&mut self, x: i64, d: usize, z: C64) {
        if z != C64::new(0.0, 0.0) {
            self.amps.entry(x).or_insert_with(Amp4::zeros)[d] += z;
        }
    }

    /// Largest entry-wise difference against another state.
    pub fn max_abs_diff(&self, other: &WalkerState) -> f64 {
        let keys: std::collections::BTreeSet<i64> = self.support().chain(other.support()).collect();
        keys.into_iter()
            .map(|x| (self.get(x) - other.get(x)).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, z: C64) -> WalkerState {
        WalkerState { amps: self.amps.iter().map(|(x, a)| (*x, a * z)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Cw,
    Ccw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    D,
    A,
}

/// Localized input `|direction, polarization⟩ ⊗ |x⟩`, with
/// `D = (H + V)/√2` and `A = (H − V)/√2`.
pub fn make_initial(direction: Direction, polarization: Polarization, x: i64) -> WalkerState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (h, v) = match polarization {
        Polarization::H => (1.0, 0.0),
        Polarization::V => (0.0, 1.0),
        Polarization::D => (s, s),
        Polarization::A => (s, -s),
    };
    let zero = c64(0.0, 0.0);
    let amps = match direction {
        Direction::Cw => [c64(h, 0.0), c64(v, 0.0), zero, zero],
        Direction::Ccw => [zero, zero, c64(h, 0.0), c64(v, 0.0)],
    };
    let mut s = WalkerState::new();
    s.set(x, amps);
    s
}

/// Flip-flop step: `cH,x → ccH,x−1`, `cV,x → ccV,x+1`, `ccH,x → cH,x+1`,
/// `ccV,x → cV,x−1`.
pub fn apply_step(state: &WalkerState) -> WalkerState {
    let mut out = WalkerState::new();
    for (&x, a) in &state.amps {
        out.add(x - 1, mode::CCH, a[mode::CH]);
        out.add(x + 1, mode::CCV, a[mode::CV]);
        out.add(x + 1, mode::CH, a[mode::CCH]);
        out.add(x - 1, mode::CV, a[mode::CCV]);
    }
    out
}

/// A coin together with the element setting it was compiled from, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinEntry {
    pub matrix: Unitary4,
    pub setting: Option<CoinSetting>,
}

impl CoinEntry {
    pub fn from_matrix(matrix: Unitary4) -> Self {
        CoinEntry { matrix, setting: None }
    }

    pub fn from_setting(setting: CoinSetting) -> Self {
        CoinEntry { matrix: setting.coin(), setting: Some(setting) }
    }
}

/// Coins for one step: per-position overrides on top of an optional default.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoinLayer {
    pub default: Option<CoinEntry>,
    pub sites: BTreeMap<i64, CoinEntry>,
}

impl CoinLayer {
    pub fn uniform(entry: CoinEntry) -> Self {
        CoinLayer { default: Some(entry), sites: BTreeMap::new() }
    }

    pub fn coin_at(&self, x: i64) -> Option<&Unitary4> {
        self.sites.get(&x).or(self.default.as_ref()).map(|e| &e.matrix)
    }
}

/// Resolver `(t, x) → C_{t,x}`. Layers repeat with period `layers.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinProgram {
    layers: Vec<CoinLayer>,
}

impl CoinProgram {
    pub fn new(layers: Vec<CoinLayer>) -> Result<Self, WalkError> {
        if layers.is_empty() {
            return Err(WalkError::EmptyProgram);
        }
        Ok(CoinProgram { layers })
    }

    pub fn uniform(coin: Unitary4) -> Self {
        CoinProgram { layers: vec![CoinLayer::uniform(CoinEntry::from_matrix(coin))] }
    }

    pub fn uniform_setting(setting: CoinSetting) -> Self {
        CoinProgram { layers: vec![CoinLayer::uniform(CoinEntry::from_setting(setting))] }
    }

    /// Time-periodic schedule of translation-invariant coins.
    pub fn periodic(coins: Vec<Unitary4>) -> Result<Self, WalkError> {
        CoinProgram::new(coins.into_iter().map(|c| CoinLayer::uniform(CoinEntry::from_matrix(c))).collect())
    }

    pub fn layers(&self) -> &[CoinLayer] {
        &self.layers
    }

    pub fn period(&self) -> usize {
        self.layers.len()
    }

    pub fn coin_at(&self, t: usize, x: i64) -> Result<&Unitary4, WalkError> {
        self.layers[t % self.layers.len()]
            .coin_at(x)
            .ok_or(WalkError::MissingCoin { t, x })
    }

    /// Rebuilds every setting-backed coin from a perturbed copy of its
    /// setting; raw matrices are kept as they are.
    pub fn perturbed(&self, delta: &mut impl FnMut() -> f64) -> CoinProgram {
        let mut redo = |e: &CoinEntry| match &e.setting {
            Some(s) => CoinEntry::from_setting(s.perturbed(delta)),
            None => e.clone(),
        };
        let layers = self
            .layers
            .iter()
            .map(|l| CoinLayer {
                default: l.default.as_ref().map(&mut redo),
                sites: l.sites.iter().map(|(x, e)| (*x, redo(e))).collect(),
            })
            .collect();
        CoinProgram { layers }
    }
}

pub fn apply_coin(state: &WalkerState, program: &CoinProgram, t: usize) -> Result<WalkerState, WalkError> {
    let mut amps = BTreeMap::new();
    for (&x, a) in &state.amps {
        let c = program.coin_at(t, x)?;
        amps.insert(x, c.apply(a));
    }
    Ok(WalkerState { amps })
}

/// One roundtrip `Ŝ · Ĉ_t`.
pub fn roundtrip(state: &WalkerState, program: &CoinProgram, t: usize) -> Result<WalkerState, WalkError> {
    Ok(apply_step(&apply_coin(state, program, t)?))
}

/// States after 0, 1, …, `steps` roundtrips.
pub fn evolve_states(initial: &WalkerState, program: &CoinProgram, steps: usize) -> Result<Vec<WalkerState>, WalkError> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial.clone());
    for t in 0..steps {
        let next = roundtrip(&out[t], program, t)?;
        out.push(next);
    }
    Ok(out)
}

pub fn evolve(initial: &WalkerState, program: &CoinProgram, steps: usize) -> Result<IntensityRecord, WalkError> {
    let mut record = IntensityRecord { steps: vec![initial.intensities()] };
    let mut state = initial.clone();
    for t in 0..steps {
        state = roundtrip(&state, program, t)?;
        record.steps.push(state.intensities());
    }
    Ok(record)
}

/// Intensities `P_{d,x}(t)` for `t = 0..=steps`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntensityRecord {
    pub steps: Vec<BTreeMap<i64, [f64; 4]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    Full,
    SumPolarization,
    SumDirection,
    SumAll,
}

impl TraceMode {
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            TraceMode::Full => &mode::LABELS,
            TraceMode::SumPolarization => &["cw", "ccw"],
            TraceMode::SumDirection => &["H", "V"],
            TraceMode::SumAll => &["total"],
        }
    }

    fn reduce(self, p: &[f64; 4]) -> Vec<f64> {
        match self {
            TraceMode::Full => p.to_vec(),
            TraceMode::SumPolarization => vec![p[0] + p[1], p[2] + p[3]],
            TraceMode::SumDirection => vec![p[0] + p[2], p[1] + p[3]],
            TraceMode::SumAll => vec![p[0] + p[1] + p[2] + p[3]],
        }
    }
}

/// Intensities reduced over some internal degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedRecord {
    pub mode: TraceMode,
    pub steps: Vec<BTreeMap<i64, Vec<f64>>>,
}

impl IntensityRecord {
    pub fn num_steps(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn total(&self, t: usize) -> f64 {
        self.steps[t].values().flat_map(|p| p.iter()).sum()
    }

    /// Intensity summed over all four modes, per position.
    pub fn position_distribution(&self, t: usize) -> BTreeMap<i64, f64> {
        self.steps[t].iter().map(|(x, p)| (*x, p.iter().sum())).collect()
    }

    pub fn trace(&self, mode: TraceMode) -> TracedRecord {
        trace_intensities(self, mode)
    }

    /// Scales every step to unit total.
    pub fn renormalized(&self) -> IntensityRecord {
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let tot: f64 = s.values().flat_map(|p| p.iter()).sum();
                if tot > 0.0 {
                    s.iter().map(|(x, p)| (*x, p.map(|v| v / tot))).collect()
                } else {
                    s.clone()
                }
            })
            .collect();
        IntensityRecord { steps }
    }
}

pub fn trace_intensities(record: &IntensityRecord, mode: TraceMode) -> TracedRecord {
    TracedRecord {
        mode,
        steps: record
            .steps
            .iter()
            .map(|s| s.iter().map(|(x, p)| (*x, mode.reduce(p))).collect())
            .collect(),
    }
}

/// Two-mode walker: index 0 is `R` (moves right), index 1 is `L`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Effective2DState {
    pub amps: BTreeMap<i64, [C64; 2]>,
}

impl Effective2DState {
    pub fn localized(x: i64, r: C64, l: C64) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(x, [r, l]);
        Effective2DState { amps }
    }

    /// Reads the cc subspace of a full state, with `R ← ccV` and `L ← ccH`.
    pub fn from_ccw(state: &WalkerState) -> Self {
        let amps = state
            .iter()
            .filter(|(_, a)| a[mode::CCH] != c64(0.0, 0.0) || a[mode::CCV] != c64(0.0, 0.0))
            .map(|(x, a)| (x, [a[mode::CCV], a[mode::CCH]]))
            .collect();
        Effective2DState { amps }
    }
}

/// Standard two-mode walk `Ŝ₂ · C₂`; returns position distributions for
/// `t = 0..=steps`.
pub fn effective_2d_evolve(initial: &Effective2DState, coin2: &Unitary2, steps: usize) -> Vec<BTreeMap<i64, f64>> {
    let dist = |s: &Effective2DState| -> BTreeMap<i64, f64> {
        s.amps.iter().map(|(x, a)| (*x, a[0].norm_sqr() + a[1].norm_sqr())).collect()
    };
    let c = coin2.matrix();
    let mut out = vec![dist(initial)];
    let mut state = initial.clone();
    for _ in 0..steps {
        let mut next: BTreeMap<i64, [C64; 2]> = BTreeMap::new();
        for (&x, a) in &state.amps {
            let r = c[(0, 0)] * a[0] + c[(0, 1)] * a[1];
            let l = c[(1, 0)] * a[0] + c[(1, 1)] * a[1];
            if r != c64(0.0, 0.0) {
                next.entry(x + 1).or_insert([c64(0.0, 0.0); 2])[0] += r;
            }
            if l != c64(0.0, 0.0) {
                next.entry(x - 1).or_insert([c64(0.0, 0.0); 2])[1] += l;
            }
        }
        state = Effective2DState { amps: next };
        out.push(dist(&state));
    }
    out
}
