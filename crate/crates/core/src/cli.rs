//! Command-line front end: JSON run configuration, pipeline orchestration
//! and CSV/JSON emission. The `gamow` binary is a thin wrapper over [`run`].

use crate::acceptance;
use crate::asymptote::{convergence_study, slope_fit, SlopeFit, StudyOptions, TailReport};
use crate::dynamics::{nonescape_probability, probability_window, reference_lifetime, NonescapeSeries, TimeGrid};
use crate::error::{Error, Result};
use crate::gamow::{sum_rule_residual, sum_rule_square_norm, ExpansionData, OverlapMode};
use crate::model::{InitialState, Potential};
use crate::oracle::{evolve_tdse, refine_and_compare, GridSpec};
use crate::poles::{locate_poles, PoleSet, SearchWindow};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const UNITS_NOTE: &str = "hbar=2m=1";

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "GAMOW_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Relative tolerance used when `--refine` reports whether the base grid
/// is converged.
pub const REFINE_TOLERANCE: f64 = 1e-2;

const REFERENCE_CONFIG: &str = include_str!("../configs/reference.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleSearch {
    pub re_max: f64,
    pub im_min: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpacing {
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSpec {
    pub spacing: GridSpacing,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl TimeGridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        match self.spacing {
            GridSpacing::Linear => TimeGrid::linear(self.t_min, self.t_max, self.points),
            GridSpacing::Logarithmic => TimeGrid::logarithmic(self.t_min, self.t_max, self.points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    /// Truncations of the convergence study, ascending.
    pub truncations: Vec<usize>,
    /// Sum-rule radii as fractions of `R`.
    pub radii: Vec<f64>,
    pub window_points: usize,
    /// Upper end of the crossover search in units of `τ₁`.
    pub crossover_horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: Potential,
    pub initial_state: InitialState,
    pub poles: PoleSearch,
    /// Truncations for the expansion, sum-rule and `P(t)` outputs.
    pub truncations: Vec<usize>,
    /// Absent: 400 logarithmic points on `[10⁻³, 10³]·τ₁`.
    #[serde(default)]
    pub time_grid: Option<TimeGridSpec>,
    pub tail: TailSpec,
    pub oracle: GridSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn ascending_positive(name: &str, v: &[usize]) -> Result<()> {
    if v.is_empty() || v[0] == 0 || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{name} must be a non-empty ascending list of positive integers")));
    }
    Ok(())
}

impl RunConfig {
    /// The shipped reference configuration (delta shell λ=6, R=1, box mode m=1).
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_CONFIG).expect("shipped reference config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Cross-module invariants that serde cannot see.
    pub fn validate(&self) -> Result<()> {
        let range = self.potential.range();
        ascending_positive("truncations", &self.truncations)?;
        ascending_positive("tail.truncations", &self.tail.truncations)?;
        if self.initial_state.support_radius() > range * (1.0 + 1e-12) {
            return Err(Error::InvalidState(format!(
                "initial state extends to {} beyond the range {range}",
                self.initial_state.support_radius()
            )));
        }
        self.initial_state.require_unit_norm()?;
        if !(self.poles.re_max > 0.0 && self.poles.im_min < 0.0 && self.poles.tol > 0.0) {
            return Err(Error::Config("poles: need re_max > 0, im_min < 0, tol > 0".into()));
        }
        if let Some(tg) = &self.time_grid {
            tg.build()?;
        }
        if self.tail.radii.is_empty() || self.tail.radii.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::Config("tail.radii must be fractions of R in (0, 1]".into()));
        }
        if self.tail.window_points < 8 || !(self.tail.crossover_horizon > 1.0) {
            return Err(Error::Config("tail: need window_points >= 8 and crossover_horizon > 1".into()));
        }
        self.oracle.validate(range)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form. The output directory is left out
    /// so the same physics hashes the same wherever it is written.
    pub fn sha256(&self) -> String {
        let physics = RunConfig { output_dir: None, ..self.clone() };
        let canonical = serde_json::to_string(&physics).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn max_truncation(&self) -> usize {
        *self.truncations.last().unwrap()
    }
}

#[derive(Debug, Parser)]
#[command(name = "gamow", version, about = "Resonant-state expansion of the nonescape probability")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON). Defaults to the shipped reference config.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Largest truncation; replaces the truncation list by its entries up to N plus N.
    #[arg(long, global = true, value_name = "N")]
    pub nmax: Option<usize>,
    /// Comma-separated absolute radii for the sum-rule table.
    #[arg(long, global = true, value_delimiter = ',', value_name = "R")]
    pub r: Option<Vec<f64>>,
    /// First time of the output grid.
    #[arg(long, global = true)]
    pub tmin: Option<f64>,
    /// Last time of the output grid.
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    /// Number of output times.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// With `oracle`: also run a refinement study with this factor.
    #[arg(long, global = true, value_name = "FACTOR")]
    pub refine: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// poles.csv: located resonance poles.
    Poles,
    /// states.csv, overlaps.csv, coefficients.csv.
    Expansion,
    /// sumrule.csv: truncated sum-rule residuals.
    Sumrule,
    /// nonescape.csv: P(t) per truncation and overlap mode.
    Nonescape,
    /// tail.csv: tail coefficients, crossovers and slopes against N.
    Tail,
    /// oracle.csv: direct Crank–Nicolson P(t).
    Oracle,
    /// compare.csv and summary.json: expansion against oracle.
    Compare,
    /// Runs the acceptance suite.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Poles => "poles",
            Command::Expansion => "expansion",
            Command::Sumrule => "sumrule",
            Command::Nonescape => "nonescape",
            Command::Tail => "tail",
            Command::Oracle => "oracle",
            Command::Compare => "compare",
            Command::Selftest => "selftest",
        }
    }
}

impl Cli {
    /// Loads the config and applies command-line overrides.
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::reference(),
        };
        if let Some(n) = self.nmax {
            if n == 0 {
                return Err(Error::Config("--nmax must be positive".into()));
            }
            cfg.truncations.retain(|&t| t < n);
            cfg.truncations.push(n);
        }
        if self.tmin.is_some() || self.tmax.is_some() || self.points.is_some() {
            let base = cfg.time_grid.unwrap_or(TimeGridSpec {
                spacing: GridSpacing::Logarithmic,
                t_min: 1e-3,
                t_max: 1e3,
                points: 400,
            });
            cfg.time_grid = Some(TimeGridSpec {
                t_min: self.tmin.unwrap_or(base.t_min),
                t_max: self.tmax.unwrap_or(base.t_max),
                points: self.points.unwrap_or(base.points),
                ..base
            });
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Machine-readable error object written to stderr on failure.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_DOMAIN
    }
}

fn configure_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
    // A pool that is already initialised (tests, repeated calls) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            eprintln!("{}", error_json(&Error::Config(e.to_string())));
            return EXIT_CONFIG;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

/// Runs a parsed command. Returns the exit code on success paths
/// (`selftest` reports failing criteria through it).
pub fn execute(cli: &Cli) -> Result<i32> {
    configure_workers()?;
    if cli.command == Command::Selftest {
        let outcomes = acceptance::run_all();
        for o in &outcomes {
            println!("{o}");
        }
        return Ok(if outcomes.iter().all(|o| o.passed) { EXIT_OK } else { EXIT_DOMAIN });
    }
    let cfg = cli.effective_config()?;
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let ctx = Context { meta: Meta { command: cli.command.name(), hash: cfg.sha256() }, out, cfg };
    match cli.command {
        Command::Poles => ctx.poles(),
        Command::Expansion => ctx.expansion(),
        Command::Sumrule => ctx.sumrule(cli.r.as_deref()),
        Command::Nonescape => ctx.nonescape(),
        Command::Tail => ctx.tail(),
        Command::Oracle => ctx.oracle(cli.refine),
        Command::Compare => ctx.compare(),
        Command::Selftest => unreachable!(),
    }?;
    Ok(EXIT_OK)
}

struct Meta {
    command: &'static str,
    hash: String,
}

/// CSV text with a `#` metadata block followed by a header row.
struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    fn new(meta: &Meta, notes: &[String], header: &[&str]) -> Self {
        let mut text = format!("# gamow {}\n# config_sha256: {}\n# units: {UNITS_NOTE}\n", meta.command, meta.hash);
        for n in notes {
            let _ = writeln!(text, "# note: {n}");
        }
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text, columns: header.len() }
    }

    fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns);
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    fn write(&self, dir: &Path, name: &str) -> Result<()> {
        std::fs::write(dir.join(name), &self.text)?;
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn signed_indices(n_max: usize) -> impl Iterator<Item = i64> {
    (1..=n_max as i64).flat_map(|n| [n, -n])
}

struct Context {
    cfg: RunConfig,
    meta: Meta,
    out: PathBuf,
}

impl Context {
    fn locate(&self) -> Result<PoleSet> {
        let w = SearchWindow { re_max: self.cfg.poles.re_max, im_min: self.cfg.poles.im_min };
        locate_poles(&self.cfg.potential, w, self.cfg.poles.tol)
    }

    fn data(&self, poles: &PoleSet, n_max: usize, with_quadrature: bool) -> Result<ExpansionData> {
        ExpansionData::build(poles, &self.cfg.initial_state, n_max, with_quadrature)
    }

    fn time_grid(&self, poles: &PoleSet) -> Result<TimeGrid> {
        match &self.cfg.time_grid {
            Some(tg) => tg.build(),
            None => TimeGrid::default_for(poles),
        }
    }

    fn poles(&self) -> Result<()> {
        let poles = self.locate()?;
        let notes = vec![format!("winding count {} in window {:?}", poles.winding_count(), poles.window())];
        let mut csv = Csv::new(&self.meta, &notes, &["n", "re_k", "im_k", "residual"]);
        for n in signed_indices(poles.len()) {
            let p = poles.pole(n).expect("index within the set");
            csv.row(&[n.to_string(), num(p.k.re), num(p.k.im), num(p.residual)]);
        }
        csv.write(&self.out, "poles.csv")
    }

    fn expansion(&self) -> Result<()> {
        let poles = self.locate()?;
        let n_max = self.cfg.max_truncation();
        let data = self.data(&poles, n_max, true)?;
        let range = data.range();
        let mut states = Csv::new(&self.meta, &[], &["n", "r", "re_u", "im_u"]);
        for n in signed_indices(n_max) {
            let s = data.state(n).expect("state present");
            for i in 0..=100 {
                let r = range * i as f64 / 100.0;
                let u = s.eval(r);
                states.row(&[n.to_string(), num(r), num(u.re), num(u.im)]);
            }
        }
        states.write(&self.out, "states.csv")?;
        let mut overlaps = Csv::new(&self.meta, &[], &["n", "l", "mode", "re_I", "im_I"]);
        let idx: Vec<i64> = signed_indices(n_max).collect();
        for mode in [OverlapMode::Closed, OverlapMode::Quadrature] {
            let m = data.overlaps(mode)?;
            for (i, &n) in idx.iter().enumerate() {
                for (j, &l) in idx.iter().enumerate() {
                    let v = m.get(i, j);
                    overlaps.row(&[n.to_string(), l.to_string(), mode.as_str().into(), num(v.re), num(v.im)]);
                }
            }
        }
        overlaps.write(&self.out, "overlaps.csv")?;
        let mut coeffs = Csv::new(&self.meta, &[], &["n", "re_C", "im_C", "abs_C"]);
        for n in signed_indices(n_max) {
            let c = data.coefficient(n).expect("coefficient present");
            coeffs.row(&[n.to_string(), num(c.re), num(c.im), num(c.norm())]);
        }
        coeffs.write(&self.out, "coefficients.csv")
    }

    fn sumrule(&self, radii: Option<&[f64]>) -> Result<()> {
        let poles = self.locate()?;
        let data = self.data(&poles, self.cfg.max_truncation(), false)?;
        let range = data.range();
        let radii: Vec<f64> = match radii {
            Some(r) => r.to_vec(),
            None => self.cfg.tail.radii.iter().map(|f| f * range).collect(),
        };
        if let Some(bad) = radii.iter().find(|r| !(**r >= 0.0 && **r <= range)) {
            return Err(Error::Config(format!("--r values must lie in [0, R], got {bad}")));
        }
        let mut csv = Csv::new(&self.meta, &[], &["N", "r", "re_S", "im_S", "abs_S", "sumrule_L2"]);
        for &n in &self.cfg.truncations {
            let l2 = sum_rule_square_norm(&data, n)?.sqrt();
            for &r in &radii {
                let s = sum_rule_residual(&data, r, n)?;
                csv.row(&[n.to_string(), num(r), num(s.re), num(s.im), num(s.norm()), num(l2)]);
            }
        }
        csv.write(&self.out, "sumrule.csv")
    }

    fn nonescape(&self) -> Result<()> {
        let poles = self.locate()?;
        let data = self.data(&poles, self.cfg.max_truncation(), true)?;
        let grid = self.time_grid(&poles)?;
        let mut csv = Csv::new(&self.meta, &[], &["t", "P", "imag_residual", "N", "mode"]);
        for &n in &self.cfg.truncations {
            for mode in [OverlapMode::Closed, OverlapMode::Quadrature] {
                let s = nonescape_probability(&data, &grid, n, mode)?;
                for i in 0..s.len() {
                    csv.row(&[num(s.times[i]), num(s.p[i]), num(s.imag_residual[i]), n.to_string(), mode.as_str().into()]);
                }
            }
        }
        csv.write(&self.out, "nonescape.csv")
    }

    fn study(&self, poles: &PoleSet) -> Result<(ExpansionData, TailReport)> {
        let n_max = *self.cfg.tail.truncations.last().unwrap();
        let data = self.data(poles, n_max, false)?;
        let radii: Vec<f64> = self.cfg.tail.radii.iter().map(|f| f * data.range()).collect();
        let opts = StudyOptions {
            window_points: self.cfg.tail.window_points,
            crossover_horizon: self.cfg.tail.crossover_horizon,
            ..StudyOptions::default()
        };
        let report = convergence_study(&data, &self.cfg.tail.truncations, &radii, opts)?;
        Ok((data, report))
    }

    fn tail(&self) -> Result<()> {
        let poles = self.locate()?;
        let (_, report) = self.study(&poles)?;
        write_tail(&self.meta, &self.out, &report)
    }

    fn oracle(&self, refine: Option<usize>) -> Result<()> {
        let s = evolve_tdse(&self.cfg.potential, &self.cfg.initial_state, &self.cfg.oracle)?;
        write_oracle(&self.meta, &self.out, &s)?;
        if let Some(f) = refine {
            let rep = refine_and_compare(&self.cfg.potential, &self.cfg.initial_state, &self.cfg.oracle, f, REFINE_TOLERANCE)?;
            let json = serde_json::to_string_pretty(&rep).expect("report serializes");
            std::fs::write(self.out.join("refinement.json"), json + "\n")?;
        }
        Ok(())
    }

    fn compare(&self) -> Result<()> {
        let poles = self.locate()?;
        let tau = reference_lifetime(&poles)?;
        let (data, report) = self.study(&poles)?;
        let (lo, hi) = report.window;
        let mut grid = self.cfg.oracle;
        if grid.final_time < hi {
            return Err(Error::HorizonTooShort { horizon: grid.final_time, window_end: hi });
        }
        grid.analysis_end.get_or_insert(hi);
        let oracle = evolve_tdse(&self.cfg.potential, &self.cfg.initial_state, &grid)?;
        let n = self.cfg.max_truncation();
        let times = TimeGrid::from_points(oracle.times.clone())?;
        let expansion = nonescape_probability(&data, &times, n, OverlapMode::Closed)?;
        let rel: Vec<f64> = oracle.p.iter().zip(&expansion.p).map(|(o, e)| ((o - e) / e).abs()).collect();
        let flags = oracle.horizon_flag.clone().unwrap_or_default();

        let mut notes = oracle.notes.clone();
        notes.push(format!("expansion truncation N = {n}, closed-form overlaps"));
        let header = ["t", "P_oracle", "P_expansion", "rel_dev", "horizon_flag"];
        let mut csv = Csv::new(&self.meta, &notes, &header);
        for i in 0..oracle.len() {
            let flag = flags.get(i).copied().unwrap_or(false);
            csv.row(&[num(oracle.times[i]), num(oracle.p[i]), num(expansion.p[i]), num(rel[i]), flag.to_string()]);
        }
        csv.write(&self.out, "compare.csv")?;

        let early = probability_window(&oracle, 0.1 * tau, 5.0 * tau)?;
        let early_dev = oracle
            .times
            .iter()
            .zip(&rel)
            .filter(|(t, _)| early.times.first().is_some_and(|a| *t >= a) && early.times.last().is_some_and(|b| *t <= b))
            .map(|(_, d)| *d)
            .fold(0.0, f64::max);
        let oracle_slope = slope_fit(&oracle, lo, hi)?;
        let summary = Summary::new(self, tau, n, early_dev, oracle_slope, &report);
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(self.out.join("summary.json"), json + "\n")?;
        write_tail(&self.meta, &self.out, &report)
    }
}

fn write_tail(meta: &Meta, out: &Path, report: &TailReport) -> Result<()> {
    let notes = vec![
        format!("c1 = {}", num(report.c1)),
        format!("slope window [{}, {}]", num(report.window.0), num(report.window.1)),
    ];
    let mut header: Vec<String> = ["N", "D1_sum", "D1_integral", "D2", "D3", "sumrule_L2"].map(String::from).to_vec();
    header.extend(report.radii.iter().map(|r| format!("abs_S(r={r})")));
    header.extend(["crossover_t", "slope", "slope_stderr"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(meta, &notes, &header);
    for row in &report.rows {
        let mut f = vec![row.n.to_string(), num(row.d1_sum), num(row.d1_integral)];
        f.extend(row.higher.iter().map(|d| num(*d)));
        f.push(num(row.sumrule_l2));
        f.extend(row.sumrule_pointwise.iter().map(|s| num(*s)));
        f.extend([opt(row.crossover_t), num(row.slope.slope), num(row.slope.stderr)]);
        csv.row(&f);
    }
    csv.write(out, "tail.csv")
}

fn write_oracle(meta: &Meta, out: &Path, s: &NonescapeSeries) -> Result<()> {
    let mut csv = Csv::new(meta, &s.notes, &["t", "P", "norm", "horizon_flag"]);
    let norm = s.norm.clone().unwrap_or_default();
    let flags = s.horizon_flag.clone().unwrap_or_default();
    for i in 0..s.len() {
        csv.row(&[num(s.times[i]), num(s.p[i]), num(norm[i]), flags[i].to_string()]);
    }
    csv.write(out, "oracle.csv")
}

#[derive(Debug, Clone, Serialize)]
struct D1Entry {
    n: usize,
    d1_sum: f64,
    d1_integral: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SlopeEntry {
    n: usize,
    slope: f64,
    stderr: f64,
    crossover_t: Option<f64>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
struct Summary {
    config_sha256: String,
    units: &'static str,
    gamma1: f64,
    tau1: f64,
    comparison_truncation: usize,
    max_rel_dev_early: f64,
    early_window: (f64, f64),
    slope_window: (f64, f64),
    slope: f64,
    slope_stderr: f64,
    oracle_fit: SlopeFit,
    expansion: Vec<SlopeEntry>,
    d1: Vec<D1Entry>,
    d1_monotone_decreasing: bool,
    crossover_monotone_increasing: bool,
    verdict: String,
}

impl Summary {
    fn new(ctx: &Context, tau: f64, n: usize, early_dev: f64, fit: SlopeFit, report: &TailReport) -> Self {
        let d1: Vec<D1Entry> =
            report.rows.iter().map(|r| D1Entry { n: r.n, d1_sum: r.d1_sum, d1_integral: r.d1_integral }).collect();
        let d1_dec = d1.windows(2).all(|w| w[1].d1_sum < w[0].d1_sum);
        let crossovers: Vec<Option<f64>> = report.rows.iter().map(|r| r.crossover_t).collect();
        let cross_inc = crossovers.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b > a));
        let expansion = report
            .rows
            .iter()
            .map(|r| SlopeEntry { n: r.n, slope: r.slope.slope, stderr: r.slope.stderr, crossover_t: r.crossover_t })
            .collect();
        let (first, last) = (&report.rows[0], report.rows.last().unwrap());
        let law = if (-3.3..=-2.7).contains(&fit.slope) && d1_dec {
            "t^-3"
        } else if (-1.3..=-0.7).contains(&fit.slope) {
            "t^-1"
        } else {
            "inconclusive"
        };
        let verdict = format!(
            "{law}: oracle slope {:.3} +/- {:.3} on t in [{:.3}, {:.3}]; D1 falls from {:.3e} (N={}) to {:.3e} (N={}); \
             fixed-N t^-1 crossovers {}",
            fit.slope,
            fit.stderr,
            report.window.0,
            report.window.1,
            first.d1_sum,
            first.n,
            last.d1_sum,
            last.n,
            if cross_inc { "grow with N" } else { "do not grow monotonically with N" }
        );
        Self {
            config_sha256: ctx.meta.hash.clone(),
            units: UNITS_NOTE,
            gamma1: 1.0 / tau,
            tau1: tau,
            comparison_truncation: n,
            max_rel_dev_early: early_dev,
            early_window: (0.1 * tau, 5.0 * tau),
            slope_window: report.window,
            slope: fit.slope,
            slope_stderr: fit.stderr,
            oracle_fit: fit,
            expansion,
            d1,
            d1_monotone_decreasing: d1_dec,
            crossover_monotone_increasing: cross_inc,
            verdict,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("gamow").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn reference_config_is_valid_and_hash_is_stable() {
        let a = RunConfig::reference();
        assert_eq!(a.sha256(), RunConfig::reference().sha256());
        assert_eq!(a.sha256().len(), 64);
        let mut b = a.clone();
        b.truncations.push(50);
        assert_ne!(a.sha256(), b.sha256());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(REFERENCE_CONFIG).unwrap();
        v["extra"] = serde_json::json!(1);
        let e = RunConfig::from_json(&v.to_string()).unwrap_err();
        assert!(e.is_config_error() && e.to_string().contains("extra"), "{e}");
        let mut v: serde_json::Value = serde_json::from_str(REFERENCE_CONFIG).unwrap();
        v["oracle"]["dt"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn negative_strength_names_the_invariant() {
        let mut v: serde_json::Value = serde_json::from_str(REFERENCE_CONFIG).unwrap();
        v["potential"]["strength"] = serde_json::json!(-6.0);
        let e = RunConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        assert!(e.to_string().contains("strength must be finite and > 0"), "{e}");
        let j: serde_json::Value = serde_json::from_str(&error_json(&e)).unwrap();
        assert_eq!(j["error"]["kind"], "ConfigError");
    }

    #[test]
    fn overrides() {
        let c = cli(&["nonescape", "--nmax", "15", "--tmin", "0.5", "--points", "7"]).effective_config().unwrap();
        assert_eq!(c.truncations, vec![5, 10, 15]);
        let tg = c.time_grid.unwrap();
        assert_eq!((tg.t_min, tg.points), (0.5, 7));
        let r = cli(&["sumrule", "--r", "0.1,0.2"]);
        assert_eq!(r.r, Some(vec![0.1, 0.2]));
        assert!(cli(&["poles", "--nmax", "0"]).effective_config().is_err());
        assert!(cli(&["poles", "--tmin", "5", "--tmax", "1"]).effective_config().is_err());
    }

    #[test]
    fn oracle_spec_must_meet_resolution_rules() {
        let mut v: serde_json::Value = serde_json::from_str(REFERENCE_CONFIG).unwrap();
        v["oracle"]["intervals_per_range"] = serde_json::json!(20);
        assert!(matches!(RunConfig::from_json(&v.to_string()), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn csv_has_metadata_block_then_header() {
        let meta = Meta { command: "poles", hash: "abc".into() };
        let mut c = Csv::new(&meta, &["hello".into()], &["a", "b"]);
        c.row(&[num(1.0), opt(None)]);
        let lines: Vec<&str> = c.text.lines().collect();
        assert_eq!(lines[0], "# gamow poles");
        assert_eq!(lines[1], "# config_sha256: abc");
        assert_eq!(lines[2], "# units: hbar=2m=1");
        assert_eq!(lines[3], "# note: hello");
        assert_eq!(lines[4], "a,b");
        assert_eq!(lines[5], "1.0000000000000000e0,");
    }
}
