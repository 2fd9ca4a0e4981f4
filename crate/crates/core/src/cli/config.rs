//! TOML run configurations.

use std::path::PathBuf;

use serde::Deserialize;

use crate::analysis::{MonteCarloConfig, PerturbationDist, REVIVAL_TOL};
use crate::graphs::{CircleSpec, FigureEightSpec, Flavor, Start};
use crate::linalg::{c64, Unitary, Unitary2, Unitary4, RANK_REL_TOL};
use crate::optics::{full_coin, ArmSetting, CoinSetting, ElementKind, OpticalElement};
use crate::presets;
use crate::synthesis::{fourier_coin, grover_coin};
use crate::walk::{CoinEntry, CoinLayer, CoinProgram, Direction, Polarization, WalkerState};

use super::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Line,
    Circle,
    FigureEight,
    Dispersion,
    Decompose,
    Errorbars,
    Revivals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Table,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: Option<Kind>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub coin: Option<CoinSpec>,
    /// Coins for consecutive roundtrips, repeated periodically. Overrides `coin`.
    pub schedule: Option<Vec<CoinSpec>>,
    pub initial: Option<InitialSpec>,
    pub circle: Option<CircleConfig>,
    pub figure_eight: Option<FigureEightConfig>,
    pub dispersion: Option<DispersionConfig>,
    pub decompose: Option<DecomposeConfig>,
    pub errorbars: Option<ErrorBarsConfig>,
    pub revivals: Option<RevivalsConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Hadamard,
    HadamardHprime,
    CrossingBands,
    AvoidedCrossingBands,
    PartialReversal,
    Grover,
    Fourier,
}

/// One coin: a preset, an element setting, a raw 4×4 matrix, or three 2×2 blocks.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CoinSpec {
    pub preset: Option<Preset>,
    pub arm_a: Option<ArmSpec>,
    pub arm_b: Option<ArmSpec>,
    #[serde(rename = "loop")]
    pub loop_elements: Option<Vec<ElementSpec>>,
    pub matrix: Option<MatrixSpec>,
    pub c_a: Option<MatrixSpec>,
    pub c_b: Option<MatrixSpec>,
    pub c_l: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub elements: Vec<ElementSpec>,
    #[serde(default)]
    pub eom: f64,
}

/// Waveplate angle or EOM phase, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub kind: ElementKind,
    pub angle: f64,
}

/// Real and imaginary parts, row-major.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x: Option<i64>,
    pub direction: Option<Direction>,
    pub polarization: Option<Polarization>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleConfig {
    pub num_sites: usize,
    pub left_end: Option<i64>,
    #[serde(default = "non_mixing")]
    pub flavor: Flavor,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureEightConfig {
    pub left_end: i64,
    pub center: i64,
    pub right_end: i64,
    pub flavor: Flavor,
}

impl Default for FigureEightConfig {
    fn default() -> Self {
        let d = FigureEightSpec::default();
        FigureEightConfig { left_end: d.left_end, center: d.center, right_end: d.right_end, flavor: d.flavor }
    }
}

fn non_mixing() -> Flavor {
    Flavor::NonMixing
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionConfig {
    pub n_k: usize,
    pub merge_tol: f64,
    pub gap_tol: f64,
    pub summary_out: Option<PathBuf>,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        DispersionConfig {
            n_k: crate::dispersion::DEFAULT_GRID,
            merge_tol: crate::dispersion::DEFAULT_MERGE_TOL,
            gap_tol: 1e-9,
            summary_out: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeConfig {
    pub rel_tol: f64,
    /// Put the universal factors in SU(2) form.
    pub normalize: bool,
    /// Residual above which the result is rejected.
    pub max_residual: f64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig { rel_tol: RANK_REL_TOL, normalize: true, max_residual: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    Line,
    Circle,
    FigureEight,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorBarsConfig {
    pub target: Target,
    pub n_samples: usize,
    pub eff_err: f64,
    pub angle_err: f64,
    pub distribution: PerturbationDist,
    pub renormalize: bool,
    /// Positions (line) or sites (graphs) for flat-similarity error bars.
    pub support: Option<Vec<i64>>,
    pub similarity_out: Option<PathBuf>,
}

impl Default for ErrorBarsConfig {
    fn default() -> Self {
        let mc = MonteCarloConfig::default();
        ErrorBarsConfig {
            target: Target::Line,
            n_samples: mc.n_samples,
            eff_err: mc.eff_err,
            angle_err: mc.angle_err,
            distribution: mc.distribution,
            renormalize: mc.renormalize,
            support: None,
            similarity_out: None,
        }
    }
}

impl ErrorBarsConfig {
    pub fn monte_carlo(&self, seed: u64) -> MonteCarloConfig {
        MonteCarloConfig {
            n_samples: self.n_samples,
            eff_err: self.eff_err,
            angle_err: self.angle_err,
            seed,
            distribution: self.distribution,
            renormalize: self.renormalize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RevivalsConfig {
    pub target: Target,
    pub tol: f64,
}

impl Default for RevivalsConfig {
    fn default() -> Self {
        RevivalsConfig { target: Target::Circle, tol: REVIVAL_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse { message: e.message().to_string(), line: e.span().map(|s| line_of(text, s.start)) })?;
    config.validate()?;
    Ok(config)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: message.into() }
}

/// A resolved coin; settings keep the element angles for perturbation.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedCoin {
    Setting(CoinSetting),
    Matrix(Unitary4),
}

impl ResolvedCoin {
    pub fn matrix(&self) -> Unitary4 {
        match self {
            ResolvedCoin::Setting(s) => s.coin(),
            ResolvedCoin::Matrix(m) => *m,
        }
    }

    fn entry(&self) -> CoinEntry {
        match self {
            ResolvedCoin::Setting(s) => CoinEntry::from_setting(s.clone()),
            ResolvedCoin::Matrix(m) => CoinEntry::from_matrix(*m),
        }
    }
}

fn matrix<const N: usize>(spec: &MatrixSpec, field: &str) -> Result<Unitary<N>, ConfigError> {
    let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == N && rows.iter().all(|r| r.len() == N);
    if !shape_ok(&spec.re) || !shape_ok(&spec.im) {
        return Err(invalid(field, format!("re and im must both be {N}×{N}")));
    }
    let m = nalgebra::SMatrix::from_fn(|i, j| c64(spec.re[i][j], spec.im[i][j]));
    Unitary::new(m).map_err(|e| invalid(field, e.to_string()))
}

fn element(e: &ElementSpec) -> OpticalElement {
    OpticalElement { kind: e.kind, parameter: e.angle }
}

fn arm(spec: &ArmSpec) -> ArmSetting {
    ArmSetting::new(spec.elements.iter().map(element).collect(), spec.eom)
}

impl CoinSpec {
    pub fn preset(p: Preset) -> Self {
        CoinSpec { preset: Some(p), ..CoinSpec::default() }
    }

    pub fn resolve(&self, field: &str) -> Result<ResolvedCoin, ConfigError> {
        let elements = self.arm_a.is_some() || self.arm_b.is_some() || self.loop_elements.is_some();
        let blocks = self.c_a.is_some() || self.c_b.is_some() || self.c_l.is_some();
        let forms = [self.preset.is_some(), elements, self.matrix.is_some(), blocks];
        if forms.iter().filter(|&&f| f).count() != 1 {
            return Err(invalid(field, "give exactly one of preset, arm_a/arm_b/loop, matrix, c_a/c_b/c_l"));
        }
        if let Some(p) = self.preset {
            return Ok(match p {
                Preset::Hadamard => ResolvedCoin::Setting(hadamard_setting()),
                Preset::HadamardHprime => ResolvedCoin::Setting(presets::hadamard_hprime()),
                Preset::CrossingBands => ResolvedCoin::Setting(presets::crossing_bands()),
                Preset::AvoidedCrossingBands => ResolvedCoin::Setting(presets::avoided_crossing_bands()),
                Preset::PartialReversal => ResolvedCoin::Setting(presets::partial_reversal()),
                Preset::Grover => ResolvedCoin::Matrix(grover_coin()),
                Preset::Fourier => ResolvedCoin::Matrix(fourier_coin()),
            });
        }
        if elements {
            let (Some(a), Some(b), Some(l)) = (&self.arm_a, &self.arm_b, &self.loop_elements) else {
                return Err(invalid(field, "arm_a, arm_b and loop must all be given"));
            };
            return Ok(ResolvedCoin::Setting(CoinSetting { arm_a: arm(a), arm_b: arm(b), loop_elements: l.iter().map(element).collect() }));
        }
        if let Some(m) = &self.matrix {
            return Ok(ResolvedCoin::Matrix(matrix::<4>(m, &format!("{field}.matrix"))?));
        }
        let (Some(a), Some(b), Some(l)) = (&self.c_a, &self.c_b, &self.c_l) else {
            return Err(invalid(field, "c_a, c_b and c_l must all be given"));
        };
        let a: Unitary2 = matrix(a, &format!("{field}.c_a"))?;
        let b: Unitary2 = matrix(b, &format!("{field}.c_b"))?;
        let l: Unitary2 = matrix(l, &format!("{field}.c_l"))?;
        Ok(ResolvedCoin::Matrix(full_coin(&a, &b, &l)))
    }
}

/// Arms `QWP(45°)` double pass (`−iX`), loop `HWP(22.5°)`: a Hadamard walk
/// confined to the cc direction.
pub fn hadamard_setting() -> CoinSetting {
    let a = ArmSetting::new(vec![OpticalElement::qwp(45.0)], 0.0);
    CoinSetting { arm_a: a.clone(), arm_b: a, loop_elements: vec![OpticalElement::hwp(22.5)] }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(c) = &self.coin {
            c.resolve("coin")?;
        }
        if let Some(s) = &self.schedule {
            if s.is_empty() {
                return Err(invalid("schedule", "needs at least one coin"));
            }
            for (i, c) in s.iter().enumerate() {
                c.resolve(&format!("schedule[{i}]"))?;
            }
        }
        if let Some(c) = &self.circle {
            self.circle_spec_from(c)?;
        }
        if let Some(f) = &self.figure_eight {
            self.figure_eight_spec_from(f)?;
        }
        if let Some(d) = &self.dispersion {
            if d.n_k < crate::dispersion::MIN_GRID {
                return Err(invalid("dispersion.n_k", format!("at least {} required", crate::dispersion::MIN_GRID)));
            }
        }
        if let Some(e) = &self.errorbars {
            if e.n_samples == 0 {
                return Err(invalid("errorbars.n_samples", "must be positive"));
            }
            if e.eff_err < 0.0 || e.angle_err < 0.0 {
                return Err(invalid("errorbars", "perturbation ranges must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn coin(&self) -> Result<ResolvedCoin, ConfigError> {
        self.coin.clone().unwrap_or_else(|| CoinSpec::preset(Preset::Hadamard)).resolve("coin")
    }

    /// Uniform program from `coin`, or the periodic `schedule`.
    pub fn line_program(&self) -> Result<CoinProgram, ConfigError> {
        match &self.schedule {
            Some(s) => {
                let layers = s
                    .iter()
                    .enumerate()
                    .map(|(i, c)| Ok(CoinLayer::uniform(c.resolve(&format!("schedule[{i}]"))?.entry())))
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                CoinProgram::new(layers).map_err(|e| invalid("schedule", e.to_string()))
            }
            None => Ok(CoinProgram::new(vec![CoinLayer::uniform(self.coin()?.entry())]).expect("one layer")),
        }
    }

    fn start(&self, x: i64, polarization: Polarization) -> Start {
        let i = self.initial.unwrap_or_default();
        Start {
            x: i.x.unwrap_or(x),
            direction: i.direction.unwrap_or(Direction::Ccw),
            polarization: i.polarization.unwrap_or(polarization),
        }
    }

    pub fn line_initial(&self) -> WalkerState {
        self.start(0, Polarization::D).state()
    }

    fn circle_spec_from(&self, c: &CircleConfig) -> Result<CircleSpec, ConfigError> {
        if c.num_sites < 4 || !c.num_sites.is_multiple_of(2) {
            return Err(invalid("circle.num_sites", format!("even size required (≥ 4), got {}", c.num_sites)));
        }
        let half = (c.num_sites / 2) as i64;
        let left = c.left_end.unwrap_or(-(half / 2));
        let spec = CircleSpec { num_sites: c.num_sites, left_end: left, flavor: c.flavor, start: self.start(left + 1, Polarization::V) };
        if spec.start.x < left || spec.start.x > spec.right_end() {
            return Err(invalid("initial.x", format!("{} is outside the circle [{left}, {}]", spec.start.x, spec.right_end())));
        }
        Ok(spec)
    }

    pub fn circle_spec(&self) -> Result<CircleSpec, ConfigError> {
        let c = self.circle.ok_or_else(|| invalid("circle", "section required"))?;
        self.circle_spec_from(&c)
    }

    fn figure_eight_spec_from(&self, f: &FigureEightConfig) -> Result<FigureEightSpec, ConfigError> {
        if !(f.left_end < f.center && f.center < f.right_end) {
            return Err(invalid("figure_eight", "need left_end < center < right_end"));
        }
        let spec = FigureEightSpec {
            left_end: f.left_end,
            center: f.center,
            right_end: f.right_end,
            flavor: f.flavor,
            start: self.start(f.center, Polarization::V),
        };
        if spec.start.x < f.left_end || spec.start.x > f.right_end {
            return Err(invalid("initial.x", "outside the figure-eight"));
        }
        Ok(spec)
    }

    pub fn figure_eight_spec(&self) -> Result<FigureEightSpec, ConfigError> {
        self.figure_eight_spec_from(&self.figure_eight.unwrap_or_default())
    }
}
