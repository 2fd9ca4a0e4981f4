//! Config-driven front end behind the `loopwalk` binary.

pub mod config;
pub mod table;

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{find_revivals, flat_similarity, flat_similarity_error, monte_carlo_error_bars};
use crate::dispersion::{band_structure, classify_crossings, group_velocities, wavefront_speeds, CrossingKind};
use crate::graphs::{circle_program, figure_eight_program, map_sites, SiteMap};
use crate::linalg::{Unitary, C64};
use crate::optics::mode;
use crate::synthesis::{factor_universal, one_trip_reconstruct_with_tol, one_trip_test, su2_normalize, test_singular_values, OneTripFactors};
use crate::walk::{evolve, CoinProgram, IntensityRecord, WalkerState};

pub use config::{parse_config, Format, RunConfig};
use config::{Kind, Target};
use table::{Cell, ResultTable};

/// Norm drift tolerated before a run is rejected.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config: {message}{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Parse { message: String, line: Option<usize> },
    #[error("config: {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("certification failed: {0}")]
    Certification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Certification(_) => 3,
        }
    }
}

fn cert(module: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Certification(format!("{module}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "loopwalk", version, about = "Four-dimensional coin quantum walks in a looped Michelson geometry")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output if absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Walk on the line.
    Simulate,
    /// Band structure, group velocities and wavefront speeds.
    Dispersion,
    /// Factor a 4×4 coin into single-roundtrip element programs.
    Decompose,
    Circle,
    FigureEight,
    /// Monte Carlo error bars.
    Errorbars,
    /// Revivals on a circle or figure-eight.
    Revivals,
}

impl Command {
    fn kind(self) -> Kind {
        match self {
            Command::Simulate => Kind::Line,
            Command::Dispersion => Kind::Dispersion,
            Command::Decompose => Kind::Decompose,
            Command::Circle => Kind::Circle,
            Command::FigureEight => Kind::FigureEight,
            Command::Errorbars => Kind::Errorbars,
            Command::Revivals => Kind::Revivals,
        }
    }
}

/// Flag values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub primary: String,
    /// Extra files requested by the config.
    pub side_files: Vec<(PathBuf, String)>,
    /// Summary lines for standard error.
    pub notes: Vec<String>,
}

struct Ctx<'a> {
    config: &'a RunConfig,
    steps: Option<usize>,
    seed: u64,
    format: Format,
}

impl Ctx<'_> {
    fn steps_or(&self, default: usize) -> usize {
        self.steps.or(self.config.steps).unwrap_or(default)
    }
}

pub fn run(command: Command, config: &RunConfig, overrides: &Overrides) -> Result<RunOutput, CliError> {
    if let Some(kind) = config.kind {
        if kind != command.kind() {
            return Err(ConfigError::Invalid { field: "kind".into(), message: format!("{kind:?} config given to the {command:?} subcommand") }.into());
        }
    }
    let ctx = Ctx {
        config,
        steps: overrides.steps,
        seed: overrides.seed.or(config.seed).unwrap_or(0),
        format: overrides.format.or(config.output.as_ref().and_then(|o| o.format)).unwrap_or_default(),
    };
    match command {
        Command::Simulate => simulate(&ctx),
        Command::Circle | Command::FigureEight => graph(&ctx, command),
        Command::Dispersion => dispersion(&ctx),
        Command::Decompose => decompose(&ctx),
        Command::Errorbars => errorbars(&ctx),
        Command::Revivals => revivals(&ctx),
    }
}

fn certify_norm(record: &IntensityRecord) -> Result<(), CliError> {
    for t in 0..record.steps.len() {
        let drift = (record.total(t) - 1.0).abs();
        if drift > NORM_TOL {
            return Err(cert("walk", format!("norm drift {drift:.3e} at step {t}")));
        }
    }
    Ok(())
}

fn origin(state: &WalkerState) -> i64 {
    state.support().next().unwrap_or(0)
}

/// Rows `(step, x, mode, intensity)` on the light cone of `x0`.
fn line_table(record: &IntensityRecord, x0: i64) -> ResultTable {
    let mut t = ResultTable::new(&["step", "x", "mode", "intensity"]);
    for (step, ints) in record.steps.iter().enumerate() {
        let reach = step as i64;
        for x in x0 - reach..=x0 + reach {
            let v = ints.get(&x).copied().unwrap_or([0.0; 4]);
            for d in 0..4 {
                t.push(vec![step.into(), x.into(), mode::LABELS[d].into(), v[d].into()]);
            }
        }
    }
    t
}

fn simulate(ctx: &Ctx) -> Result<RunOutput, CliError> {
    let program = ctx.config.line_program()?;
    let initial = ctx.config.line_initial();
    let record = evolve(&initial, &program, ctx.steps_or(25)).map_err(|e| cert("walk", e))?;
    certify_norm(&record)?;
    Ok(RunOutput { primary: line_table(&record, origin(&initial)).render(ctx.format), ..Default::default() })
}

fn graph_setup(ctx: &Ctx, target: Target) -> Result<(CoinProgram, SiteMap, WalkerState, usize), CliError> {
    let c = ctx.config;
    let built = match target {
        Target::Circle => {
            let spec = c.circle_spec()?;
            circle_program(&spec).map(|(p, m)| (p, m, spec.start.state(), spec.num_sites))
        }
        Target::FigureEight => {
            let spec = c.figure_eight_spec()?;
            figure_eight_program(&spec).map(|(p, m)| (p, m, spec.start.state(), spec.num_nodes()))
        }
        Target::Line => unreachable!("line has no site map"),
    };
    built.map_err(|e| ConfigError::Invalid { field: "graph".into(), message: e.to_string() }.into())
}

fn graph(ctx: &Ctx, command: Command) -> Result<RunOutput, CliError> {
    let target = if command == Command::Circle { Target::Circle } else { Target::FigureEight };
    let (program, map, initial, _) = graph_setup(ctx, target)?;
    let record = evolve(&initial, &program, ctx.steps_or(25)).map_err(|e| cert("walk", e))?;
    certify_norm(&record)?;
    let sites = map_sites(&map, &record);
    if let Some(w) = sites.warnings.first() {
        return Err(cert("graphs", format!("intensity {:.3e} left the graph at step {}", w.intensity, w.step)));
    }
    let mut t = ResultTable::new(&["step", "m", "intensity"]);
    for (step, p) in sites.sites.iter().enumerate() {
        for (m, v) in p.iter().enumerate() {
            t.push(vec![step.into(), m.into(), (*v).into()]);
        }
    }
    Ok(RunOutput { primary: t.render(ctx.format), ..Default::default() })
}

fn dispersion(ctx: &Ctx) -> Result<RunOutput, CliError> {
    let dc = ctx.config.dispersion.clone().unwrap_or_default();
    let coin = ctx.config.coin()?.matrix();
    let spec = band_structure(&coin, dc.n_k).map_err(|e| cert("dispersion", e))?;
    let vg = group_velocities(&spec);
    let mut t = ResultTable::new(&["k", "branch", "omega", "v_g"]);
    for (i, &k) in spec.k_grid.iter().enumerate() {
        for j in 0..spec.n_branches() {
            t.push(vec![k.into(), j.into(), spec.branches[j][i].into(), vg[j][i].into()]);
        }
    }
    let fronts = wavefront_speeds(&spec, dc.merge_tol);
    let crossings = classify_crossings(&spec, dc.gap_tol);
    let mut summary = ResultTable::new(&["quantity", "k", "value", "detail"]);
    for c in &fronts.speeds {
        summary.push(vec!["wavefront_speed".into(), Cell::Text(String::new()), c.speed.into(), c.multiplicity.into()]);
    }
    for g in &crossings {
        let kind = match g.kind {
            CrossingKind::Crossing => "crossing",
            CrossingKind::Avoided => "avoided",
        };
        summary.push(vec![Cell::Text(format!("gap_{}_{}", g.branches.0, g.branches.1)), g.k.into(), g.gap.into(), kind.into()]);
    }
    let speeds: Vec<String> = fronts.distinct().iter().map(|v| format!("{v:+.4}")).collect();
    let n_cross = crossings.iter().filter(|g| g.kind == CrossingKind::Crossing).count();
    let mut out = RunOutput {
        primary: t.render(ctx.format),
        notes: vec![
            format!("wavefront speeds: {}", speeds.join(", ")),
            format!("gap minima: {} crossing(s), {} avoided", n_cross, crossings.len() - n_cross),
        ],
        ..Default::default()
    };
    if let Some(p) = dc.summary_out {
        out.side_files.push((p, summary.render(ctx.format)));
    }
    Ok(out)
}

fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

fn matrix_json<const N: usize>(u: &Unitary<N>) -> Value {
    let m = u.matrix();
    json!({
        "re": (0..N).map(|i| (0..N).map(|j| m[(i, j)].re).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "im": (0..N).map(|i| (0..N).map(|j| m[(i, j)].im).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

fn factors_json(f: &OneTripFactors) -> Value {
    json!({
        "c_a": matrix_json(&f.c_a),
        "c_b": matrix_json(&f.c_b),
        "c_loop_cw": matrix_json(&f.c_loop_cw),
        "c_loop_ccw": matrix_json(&f.c_loop_ccw),
    })
}

fn blocks_unitary(f: &OneTripFactors) -> bool {
    f.blocks().iter().all(|b| Unitary::new(*b.matrix()).is_ok())
}

fn decompose(ctx: &Ctx) -> Result<RunOutput, CliError> {
    let dc = ctx.config.decompose.unwrap_or_default();
    let c = ctx.config.coin()?.matrix();
    let (one_trip, _) = one_trip_test(&c, dc.rel_tol);
    let [s1, s2] = test_singular_values(&c);
    let mut doc = json!({
        "one_trip": if one_trip { "yes" } else { "no" },
        "singular_values": { "m1": s1, "m2": s2 },
    });
    let mut lines = vec![format!("one-trip: {}", if one_trip { "yes" } else { "no" })];
    if one_trip {
        let f = one_trip_reconstruct_with_tol(&c, dc.rel_tol).map_err(|e| cert("synthesis", e))?;
        let residual = crate::linalg::max_abs_diff(f.compose().matrix(), c.matrix());
        if residual > dc.max_residual || !blocks_unitary(&f) {
            return Err(cert("synthesis", format!("one-trip residual {residual:.3e}")));
        }
        doc["one_trip_factors"] = factors_json(&f);
        doc["one_trip_residual"] = json!(residual);
        lines.push(format!("one-trip residual: {residual:.3e}"));
    }
    let mut u = factor_universal(&c);
    if dc.normalize {
        u = su2_normalize(&u);
    }
    let residual = u.residual(&c);
    if residual > dc.max_residual || !blocks_unitary(&u.factor_1) || !blocks_unitary(&u.factor_2) {
        return Err(cert("synthesis", format!("universal residual {residual:.3e}")));
    }
    doc["universal"] = json!({
        "branch": format!("{:?}", u.branch),
        "global_phase": complex(u.global_phase),
        "factor_1": factors_json(&u.factor_1),
        "factor_2": factors_json(&u.factor_2),
        "residual": residual,
    });
    lines.push(format!("two-roundtrip branch: {:?}", u.branch));
    lines.push(format!("two-roundtrip residual: {residual:.3e}"));
    let primary = match ctx.format {
        Format::Csv => serde_json::to_string_pretty(&doc).expect("serializable") + "\n",
        Format::Table => lines.join("\n") + "\n",
    };
    Ok(RunOutput { primary, ..Default::default() })
}

fn errorbars(ctx: &Ctx) -> Result<RunOutput, CliError> {
    let ec = ctx.config.errorbars.clone().unwrap_or_default();
    let mc = ec.monte_carlo(ctx.seed);
    let (program, initial, map) = match ec.target {
        Target::Line => (ctx.config.line_program()?, ctx.config.line_initial(), None),
        t => {
            let (p, m, s, _) = graph_setup(ctx, t)?;
            (p, s, Some(m))
        }
    };
    let steps = ctx.steps_or(25);
    let id = format!("{:?}/seed={}", ec.target, ctx.seed).to_lowercase();
    let report = monte_carlo_error_bars(&initial, &program, steps, &mc, &id).map_err(|e| cert("analysis", e))?;
    let mut t = ResultTable::new(&["step", "x", "mode", "reference", "sigma"]);
    for step in 0..=steps {
        let (r, s) = (&report.reference.steps[step], &report.sigma.steps[step]);
        let keys: BTreeSet<i64> = r.keys().chain(s.keys()).copied().collect();
        for x in keys {
            let rv = r.get(&x).copied().unwrap_or([0.0; 4]);
            let sv = s.get(&x).copied().unwrap_or([0.0; 4]);
            for d in 0..4 {
                t.push(vec![step.into(), x.into(), mode::LABELS[d].into(), rv[d].into(), sv[d].into()]);
            }
        }
    }
    let mut out = RunOutput { primary: t.render(ctx.format), ..Default::default() };
    if let Some(support) = &ec.support {
        let mut st = ResultTable::new(&["step", "similarity", "error"]);
        let sites = map.as_ref().map(|m| map_sites(m, &report.reference));
        for step in 0..=steps {
            let (values, sigmas): (Vec<f64>, Vec<f64>) = match (&map, &sites) {
                (Some(m), Some(s)) => {
                    let sig = report.site_sigma(m, step);
                    let mut pairs = Vec::new();
                    for &x in support {
                        let i = usize::try_from(x).ok().filter(|&i| i < m.num_sites()).ok_or_else(|| ConfigError::Invalid {
                            field: "errorbars.support".into(),
                            message: format!("site {x} is not on the graph"),
                        })?;
                        pairs.push((s.sites[step][i], sig[i]));
                    }
                    pairs.into_iter().unzip()
                }
                _ => {
                    let dist = report.reference.position_distribution(step);
                    let sig = report.position_sigma(step);
                    support.iter().map(|x| (dist.get(x).copied().unwrap_or(0.0), sig.get(x).copied().unwrap_or(0.0))).unzip()
                }
            };
            let s = flat_similarity(&values, false).map_err(|e| cert("analysis", e))?;
            let e = flat_similarity_error(&values, &sigmas).map_err(|e| cert("analysis", e))?;
            st.push(vec![step.into(), s.into(), e.into()]);
        }
        match ec.similarity_out {
            Some(p) => out.side_files.push((p, st.render(ctx.format))),
            None => out.notes.push(st.render(Format::Table)),
        }
    }
    out.notes.push(format!("{} samples, seed {}", mc.n_samples, mc.seed));
    Ok(out)
}

fn revivals(ctx: &Ctx) -> Result<RunOutput, CliError> {
    let rc = ctx.config.revivals.unwrap_or_default();
    if rc.target == Target::Line {
        return Err(ConfigError::Invalid { field: "revivals.target".into(), message: "needs a circle or figure_eight".into() }.into());
    }
    let (program, map, initial, n) = graph_setup(ctx, rc.target)?;
    let record = evolve(&initial, &program, ctx.steps_or(3 * n)).map_err(|e| cert("walk", e))?;
    certify_norm(&record)?;
    let sites = map_sites(&map, &record);
    if let Some(w) = sites.warnings.first() {
        return Err(cert("graphs", format!("intensity {:.3e} left the graph at step {}", w.intensity, w.step)));
    }
    let found = find_revivals(&sites.sites, rc.tol, rc.target == Target::Circle).map_err(|e| cert("analysis", e))?;
    let mut t = ResultTable::new(&["step", "shift", "kind"]);
    for r in &found {
        let kind = match r.kind {
            crate::analysis::RevivalKind::Perfect => "perfect",
            crate::analysis::RevivalKind::Shifted => "shifted",
        };
        t.push(vec![r.step.into(), r.shift.into(), kind.into()]);
    }
    Ok(RunOutput { primary: t.render(ctx.format), ..Default::default() })
}

fn load(path: &Option<PathBuf>) -> Result<RunConfig, ConfigError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), ConfigError> {
    std::fs::write(path, text).map_err(|e| ConfigError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Runs the parsed command line and returns the process exit code.
pub fn execute(args: &Args) -> i32 {
    let result = (|| -> Result<(), CliError> {
        let config = load(&args.config)?;
        let overrides = Overrides { steps: args.steps, seed: args.seed, format: args.format };
        let out = run(args.command, &config, &overrides)?;
        let out_path = args.out.clone().or_else(|| config.output.as_ref().and_then(|o| o.path.clone()));
        match out_path {
            Some(p) => write_file(&p, &out.primary)?,
            None => print!("{}", out.primary),
        }
        for (p, text) in &out.side_files {
            write_file(p, text)?;
        }
        for n in &out.notes {
            eprintln!("{n}");
        }
        Ok(())
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("loopwalk: {e}");
            e.exit_code()
        }
    }
}
