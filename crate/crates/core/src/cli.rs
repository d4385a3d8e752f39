//! Scenario runner behind the `hardycalc` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::admissibility::{
    default_lambda_sequence, default_t_sequence, lambda_limit, lebesgue_limit, observability_gramian,
    probe_vectors, sqrt_t_bound_scan, ObservationOperator, PROBE_SEED,
};
use crate::calculus::{check_calculus_axioms, ga_convolution, ga_toeplitz};
use crate::error::{Error, Result};
use crate::hardy::{toeplitz_apply, GridSpec, SampledSignal};
use crate::numkernel::{c, op_norm, vec_norm};
use crate::semigroup::{evaluate_t, example26, random_dissipative, random_stable, resolvent, Generator};
use crate::symbols::{battery, parse_symbol, SymbolExpr};
use crate::verifier::{
    check_analytic_lemma, check_cor33a, check_eq21, check_eq26, check_square_function, check_t0,
    check_thm33, check_thm34, check_toeplitz_algebra, decaying_signals, default_s_samples,
    toeplitz_battery, write_csv, write_json, CheckReport,
};

/// Scenario names with one-line descriptions, in run order.
pub const SCENARIOS: [(&str, &str); 13] = [
    ("example26", "heat-type example: admissibility constant, sharpness, sqrt(t) scan"),
    ("toeplitz_properties", "Toeplitz multiplicativity, shift commutation, norm bound"),
    ("calculus_axioms", "unit, resolvent atom and multiplicativity of g -> g(A)"),
    ("resolvent_identity", "g = 1/(2-s) gives (2I-A)^-1 by convolution and Toeplitz routes"),
    ("t0_bounds", "output Gramian and sqrt(t) bounds for g(A)T(t)"),
    ("eq21", "sqrt(Re s)·||g(A)(sI-A)^-1|| <= ||g||"),
    ("thm33", "||g(A)|| <= sqrt(m2/m1)·||g|| for commuting observation operators"),
    ("von_neumann", "contraction semigroups: ||g(A)|| <= ||g|| with unit-Gramian witness"),
    ("thm34", "||g(A)|| <= m1·m2·||g|| + ||g(A)T(t)|| for self-adjoint generators"),
    ("analytic_lemma", "t·||AT(t)|| bounds for self-adjoint generators"),
    ("eq26", "exact observability of (-A)^1/2"),
    ("square_function", "square-function identity by two quadratures"),
    ("extensions", "Lebesgue and Lambda extensions of C agree with C"),
];

pub fn list_scenarios() -> String {
    let mut out = String::new();
    for (name, about) in SCENARIOS {
        out.push_str(&format!("{name:<20} {about}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// State dimension of seeded random generators.
    pub n: usize,
    /// Number of seeded random generators per scenario.
    pub count: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { n: 8, count: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_samples: usize,
    pub dt: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::reference();
        Self { n_samples: g.n_samples(), dt: g.dt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub relative: f64,
    /// `g(A)` by convolution against a closed form.
    pub convolution: f64,
    /// `g(A)` by the sampled Toeplitz route against a closed form.
    pub toeplitz_route: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { relative: 1e-6, convolution: 1e-7, toeplitz_route: 1e-3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub json: bool,
    pub csv: bool,
    /// Also dump sampled signals as CSV into `dir`.
    pub signals: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    /// Mode count for the heat-type example; each scenario has its own default.
    pub modes: Option<usize>,
    pub generators: GeneratorConfig,
    /// Symbol DSL strings; empty means the built-in battery.
    pub symbols: Vec<String>,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "all".into(),
            seed: 0,
            modes: None,
            generators: GeneratorConfig::default(),
            symbols: Vec::new(),
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Everything except the scenario name.
    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        self.symbol_battery()?;
        if self.generators.n == 0 {
            return Err(Error::Config("generators.n must be positive".into()));
        }
        if self.modes == Some(0) {
            return Err(Error::Config("modes must be positive".into()));
        }
        let t = &self.tolerances;
        if [t.relative, t.convolution, t.toeplitz_route].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n_samples, self.grid.dt)
            .map_err(|e| Error::Config(format!("grid: {e}")))
    }

    pub fn symbol_battery(&self) -> Result<Vec<(String, SymbolExpr)>> {
        if self.symbols.is_empty() {
            return Ok(battery());
        }
        self.symbols
            .iter()
            .map(|s| {
                parse_symbol(s)
                    .map(|g| (s.clone(), g))
                    .map_err(|e| Error::Config(format!("symbol {s:?}: {e}")))
            })
            .collect()
    }

    /// Scenario names selected by `scenario`, or `None` if it is unknown.
    pub fn selected(&self) -> Option<Vec<&'static str>> {
        if self.scenario == "all" {
            return Some(SCENARIOS.iter().map(|(n, _)| *n).collect());
        }
        SCENARIOS.iter().find(|(n, _)| *n == self.scenario).map(|(n, _)| vec![*n])
    }

    fn seed_at(&self, k: usize) -> u64 {
        self.seed.wrapping_add(k as u64)
    }
}

/// A check that could not be evaluated counts as failed.
fn errored(name: &str, e: &Error) -> CheckReport {
    CheckReport {
        name: name.into(),
        bound_claimed: f64::NAN,
        bound_measured: f64::NAN,
        witness: format!("error: {e}"),
        tolerance: 0.0,
        abs_tolerance: 0.0,
        witness_norm: 0.0,
        pass: false,
        runtime_ms: 0.0,
        components: Vec::new(),
    }
}

fn settle(name: &str, r: Result<CheckReport>) -> CheckReport {
    match r {
        Ok(mut r) => {
            r.name = name.into();
            r
        }
        Err(e) => errored(name, &e),
    }
}

fn labelled<F>(name: &str, items: Vec<(String, F)>) -> CheckReport
where
    F: FnOnce() -> Result<CheckReport>,
{
    let start = Instant::now();
    let parts = items.into_iter().map(|(label, f)| settle(&label, f())).collect();
    let mut r = CheckReport::aggregate(name, parts);
    r.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    r
}

/// Output written next to the reports.
struct Dumps<'a> {
    dir: Option<&'a Path>,
}

impl Dumps<'_> {
    fn signal(&self, file: &str, s: &SampledSignal) -> Result<()> {
        if let Some(dir) = self.dir {
            let f = fs::File::create(dir.join(file)).map_err(|e| Error::Config(format!("{file}: {e}")))?;
            s.write_csv(std::io::BufWriter::new(f))?;
        }
        Ok(())
    }
}

fn example26_modes(cfg: &ExperimentConfig, default: usize) -> usize {
    cfg.modes.unwrap_or(default)
}

fn scenario_example26(cfg: &ExperimentConfig, dumps: &Dumps) -> Result<Vec<CheckReport>> {
    let modes = example26_modes(cfg, 64);
    let (gen, cop) = example26(modes)?;
    let gram = observability_gramian(&gen, &cop)?;
    let mut reports = vec![
        CheckReport::inequality(
            "example26/m_admissible",
            0.0,
            (gram.m_admissible - 0.5).abs(),
            0.0,
            1e-10,
            format!("m_admissible = {:.15}", gram.m_admissible),
            gram.m_admissible,
        ),
        CheckReport::inequality(
            "example26/m_exact",
            0.0,
            (gram.m_exact - 0.5).abs(),
            0.0,
            1e-10,
            format!("m_exact = {:.15}", gram.m_exact),
            gram.m_exact,
        ),
        CheckReport::inequality(
            "example26/quadrature",
            0.0,
            gram.quadrature_mismatch,
            0.0,
            1e-4,
            format!("{} probe vectors", crate::admissibility::PROBE_COUNT),
            gram.m_admissible,
        ),
    ];

    let e1 = (-1f64).exp();
    let mut parts = Vec::new();
    for k in [1usize, 2, 4, 8].into_iter().filter(|k| *k <= modes) {
        let t = 1.0 / (k * k) as f64;
        let mut phi = Array1::zeros(modes);
        phi[k - 1] = c(1.0, 0.0);
        let ct = cop.matrix().dot(&evaluate_t(&gen, t)?);
        let y = vec_norm(&ct.dot(&phi));
        parts.push(CheckReport::inequality(
            &format!("orbit_{k}"),
            0.0,
            (y - k as f64 * e1).abs(),
            0.0,
            1e-9,
            format!("||C T(1/{k}^2) phi_{k}|| = {y:.15}"),
            1.0,
        ));
        // √t‖CT(t)‖ ≥ e⁻¹, written as e⁻¹ ≤ √t‖CT(t)‖.
        let lower = t.sqrt() * op_norm(&ct);
        parts.push(CheckReport::inequality(
            &format!("lower_{k}"),
            lower,
            e1,
            1e-12,
            0.0,
            format!("t = 1/{k}^2"),
            lower,
        ));
    }
    reports.push(CheckReport::aggregate("example26/sharpness", parts));
    let (_, mut scan) = sqrt_t_bound_scan(&gen, &cop, 1e-6, 10.0)?;
    scan.name = "example26/sqrt_t_scan".into();
    reports.push(scan);

    let grid = cfg.grid_spec()?;
    let x0 = probe_vectors(modes, 1, PROBE_SEED).remove(0);
    let orbit = SampledSignal::from_fn(grid, modes, |t| {
        cop.matrix().dot(&evaluate_t(&gen, t).expect("diagonal semigroup").dot(&x0))
    })?;
    dumps.signal("example26_output.csv", &orbit)?;
    Ok(reports)
}

fn scenario_toeplitz(cfg: &ExperimentConfig, dumps: &Dumps) -> Result<Vec<CheckReport>> {
    let grid = cfg.grid_spec()?;
    let symbols = if cfg.symbols.is_empty() { toeplitz_battery() } else { cfg.symbol_battery()? };
    let signals = decaying_signals();
    let r = check_toeplitz_algebra(&symbols, &signals, grid, cfg.tolerances.relative)?;
    let f = SampledSignal::from_scalar_fn(grid, signals[0].1)?;
    dumps.signal("toeplitz_input.csv", &f)?;
    dumps.signal("toeplitz_output.csv", &toeplitz_apply(&symbols[0].1, &f)?)?;
    Ok(vec![r])
}

/// Seeded dense generators; `shift` moves the spectrum left.
fn stable_family(cfg: &ExperimentConfig, shift: f64) -> Result<Vec<(String, Generator)>> {
    (0..cfg.generators.count)
        .map(|k| {
            let seed = cfg.seed_at(k);
            let g = random_stable(cfg.generators.n, seed)?;
            let g = if shift != 0.0 { g.shifted(shift)? } else { g };
            Ok((format!("stable_{seed}"), g))
        })
        .collect()
}

fn dissipative_family(cfg: &ExperimentConfig, shift: f64) -> Result<Vec<(String, Generator)>> {
    (0..cfg.generators.count)
        .map(|k| {
            let seed = cfg.seed_at(k);
            let g = random_dissipative(cfg.generators.n, seed)?;
            let g = if shift != 0.0 { g.shifted(shift)? } else { g };
            Ok((format!("dissipative_{seed}"), g))
        })
        .collect()
}

fn scenario_calculus(cfg: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let symbols = cfg.symbol_battery()?;
    let modes = example26_modes(cfg, 16);
    let mut gens = vec![(format!("example26_{modes}"), example26(modes)?.0)];
    gens.extend(stable_family(cfg, 0.0)?);
    let mut out = Vec::new();
    for (label, gen) in &gens {
        let items = symbols
            .iter()
            .flat_map(|(n1, g1)| symbols.iter().map(move |(n2, g2)| (n1, g1, n2, g2)))
            .map(|(n1, g1, n2, g2)| (format!("{n1} * {n2}"), move || check_calculus_axioms(gen, g1, g2)))
            .collect();
        out.push(labelled(&format!("calculus_axioms/{label}"), items));
    }
    Ok(out)
}

fn scenario_resolvent(cfg: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let grid = cfg.grid_spec()?;
    let g = SymbolExpr::pole(2.0);
    let mut out = Vec::new();
    // Shifted so that orbits decay inside the sampling window.
    for (label, gen) in stable_family(cfg, -3.0)? {
        let items: Vec<(String, Box<dyn FnOnce() -> Result<CheckReport>>)> = vec![
            (
                "convolution".into(),
                Box::new(|| {
                    let exact = resolvent(&gen, c(2.0, 0.0))?;
                    let d = op_norm(&(&ga_convolution(&gen, &g)?.matrix - &exact));
                    Ok(CheckReport::inequality("", 0.0, d, 0.0, cfg.tolerances.convolution, "g = 1/(2-s)".into(), op_norm(&exact)))
                }),
            ),
            (
                "toeplitz".into(),
                Box::new(|| {
                    let exact = resolvent(&gen, c(2.0, 0.0))?;
                    let d = op_norm(&(&ga_toeplitz(&gen, &g, grid)?.matrix - &exact));
                    Ok(CheckReport::inequality("", 0.0, d, 0.0, cfg.tolerances.toeplitz_route, "g = 1/(2-s)".into(), op_norm(&exact)))
                }),
            ),
        ];
        out.push(labelled(&format!("resolvent_identity/{label}"), items));
    }
    Ok(out)
}

/// Runs `check` for every battery symbol on every generator.
fn per_symbol<F>(name: &str, gens: &[(String, Generator)], symbols: &[(String, SymbolExpr)], check: F) -> Vec<CheckReport>
where
    F: Fn(&Generator, &SymbolExpr) -> Result<CheckReport>,
{
    gens.iter()
        .map(|(label, gen)| {
            let items = symbols.iter().map(|(sn, g)| (sn.clone(), || check(gen, g))).collect();
            labelled(&format!("{name}/{label}"), items)
        })
        .collect()
}

fn scenario_t0(cfg: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let modes = example26_modes(cfg, 16);
    let mut gens = vec![(format!("example26_{modes}"), example26(modes)?.0)];
    gens.extend(dissipative_family(cfg, 0.0)?);
    Ok(per_symbol("t0_bounds", &gens, &cfg.symbol_battery()?, check_t0))
}

fn scenario_eq21(cfg: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let modes = example26_modes(cfg, 16);
    let mut gens = vec![(format!("example26_{modes}"), example26(modes)?.0)];
    // Damping of at least 0.35 keeps the identity Gramian below 2.
    gens.extend(dissipative_family(cfg, -0.25)?);
    let samples = default_s_samples();
    Ok(per_symbol("eq21", &gens, &cfg.symbol_battery()?, |gen, g| check_eq21(gen, g, &samples)))
}

fn scenario_thm33(cfg: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let symbols = cfg.symbol_battery()?;
    let modes = example26_modes(cfg, 16);
    let (e26, cop) = example26(modes)?;
    let mut out = per_symbol("thm33", &[(format!("example26_{modes}"), e26)], &symbols, |gen, g| {
        check_thm33(gen, &cop, g)
    });
    let stable = stable_family(cfg, 0.0)?;
    let identity = ObservationOperator::identity(cfg.generators.n);
    out.extend(per_symbol("thm33", &stable, &symbols, |gen, g| check_thm33(gen, &identity, g)));
    Ok(out)
}

fn scenario_von_neumann(cfg: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let gens = dissipative_family(cfg, 0.0)?;
    Ok(per_symbol("von_neumann", &gens, &cfg.symbol_battery()?, check_cor33a))
}

fn self_adjoint_example(cfg: &ExperimentConfig) -> Result<(String, Generator)> {
    let modes = example26_modes(cfg, 32);
    Ok((format!("example26_{modes}"), example26(modes)?.0))
}

fn scenario_thm34(cfg: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let gens = [self_adjoint_example(cfg)?];
    Ok(per_symbol("thm34", &gens, &cfg.symbol_battery()?, |gen, g| check_thm34(gen, g, 1.0)))
}

fn scenario_single(cfg: &ExperimentConfig, name: &str, check: fn(&Generator) -> Result<CheckReport>) -> Result<Vec<CheckReport>> {
    let (label, gen) = self_adjoint_example(cfg)?;
    Ok(vec![settle(&format!("{name}/{label}"), check(&gen))])
}

fn scenario_extensions(cfg: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let modes = example26_modes(cfg, 16);
    let (gen, cop) = example26(modes)?;
    let tol = cfg.tolerances.relative;
    let items = probe_vectors(modes, 3, PROBE_SEED)
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            let (gen, cop) = (&gen, &cop);
            (format!("probe_{k}"), move || {
                let cx = cop.matrix().dot(&x);
                let scale = vec_norm(&cx);
                let leb = lebesgue_limit(gen, cop, &x, &default_t_sequence())?;
                let lam = lambda_limit(gen, cop, &x, &default_lambda_sequence())?;
                let d = [
                    vec_norm(&(&leb.value - &cx)),
                    vec_norm(&(&lam.value - &cx)),
                    vec_norm(&(&leb.value - &lam.value)),
                ];
                let diverged = leb.diverged || lam.diverged;
                let worst = if diverged { f64::INFINITY } else { d.iter().cloned().fold(0.0, f64::max) };
                Ok(CheckReport::inequality(
                    "",
                    0.0,
                    worst,
                    0.0,
                    tol * scale,
                    format!("lebesgue {:.3e}, lambda {:.3e}, mutual {:.3e}, diverged {diverged}", d[0], d[1], d[2]),
                    scale,
                ))
            })
        })
        .collect();
    Ok(vec![labelled(&format!("extensions/example26_{modes}"), items)])
}

fn run_scenario(name: &str, cfg: &ExperimentConfig, dumps: &Dumps) -> Vec<CheckReport> {
    let r = match name {
        "example26" => scenario_example26(cfg, dumps),
        "toeplitz_properties" => scenario_toeplitz(cfg, dumps),
        "calculus_axioms" => scenario_calculus(cfg),
        "resolvent_identity" => scenario_resolvent(cfg),
        "t0_bounds" => scenario_t0(cfg),
        "eq21" => scenario_eq21(cfg),
        "thm33" => scenario_thm33(cfg),
        "von_neumann" => scenario_von_neumann(cfg),
        "thm34" => scenario_thm34(cfg),
        "analytic_lemma" => scenario_single(cfg, name, check_analytic_lemma),
        "eq26" => scenario_single(cfg, name, check_eq26),
        "square_function" => scenario_single(cfg, name, check_square_function),
        "extensions" => scenario_extensions(cfg),
        _ => Err(Error::Config(format!("unknown scenario {name}"))),
    };
    r.unwrap_or_else(|e| vec![errored(name, &e)])
}

/// Runs the selected scenarios in registry order.
pub fn run_reports(cfg: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let names = cfg.selected().ok_or_else(|| Error::Config(format!("unknown scenario {:?}", cfg.scenario)))?;
    let dir = cfg.output.dir.as_deref();
    if let Some(d) = dir {
        fs::create_dir_all(d).map_err(|e| Error::Config(format!("{}: {e}", d.display())))?;
    }
    let dumps = Dumps { dir: if cfg.output.signals { dir } else { None } };
    Ok(names.into_iter().flat_map(|n| run_scenario(n, cfg, &dumps)).collect())
}

fn zero_runtime(r: &mut CheckReport) {
    r.runtime_ms = 0.0;
    r.components.iter_mut().for_each(zero_runtime);
}

/// SHA-256 of the JSON reports with every `runtime_ms` zeroed.
pub fn fingerprint(reports: &[CheckReport]) -> String {
    let mut stripped = reports.to_vec();
    stripped.iter_mut().for_each(zero_runtime);
    let bytes = serde_json::to_vec(&stripped).expect("reports serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Parser)]
#[command(name = "hardycalc", version, about = "H-infinity calculus checks for stable semigroup generators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario or `all`.
    Run(RunArgs),
    /// List scenario names.
    List,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: Option<String>,
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "HARDYCALC_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub grid_dt: Option<f64>,
    /// Report directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report (to stdout without --out).
    #[arg(long)]
    pub json: bool,
    /// CSV report (to stdout without --out).
    #[arg(long)]
    pub csv: bool,
}

impl RunArgs {
    pub fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.scenario {
            cfg.scenario = s.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.modes.is_some() {
            cfg.modes = self.modes;
        }
        if let Some(n) = self.grid_n {
            cfg.grid.n_samples = n;
        }
        if let Some(dt) = self.grid_dt {
            cfg.grid.dt = dt;
        }
        if self.out.is_some() {
            cfg.output.dir = self.out.clone();
        }
        cfg.output.json |= self.json;
        cfg.output.csv |= self.csv;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_BAD_CONFIG: i32 = 2;
pub const EXIT_UNKNOWN_SCENARIO: i32 = 3;

fn emit(cfg: &ExperimentConfig, reports: &[CheckReport], stdout: &mut impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("write: {e}"));
    match &cfg.output.dir {
        Some(dir) => {
            let both = !cfg.output.json && !cfg.output.csv;
            if cfg.output.json || both {
                write_json(reports, fs::File::create(dir.join("report.json")).map_err(io)?)?;
            }
            if cfg.output.csv || both {
                write_csv(reports, fs::File::create(dir.join("report.csv")).map_err(io)?)?;
            }
        }
        None => {
            if cfg.output.json {
                write_json(reports, &mut *stdout)?;
                writeln!(stdout).map_err(io)?;
            }
            if cfg.output.csv {
                write_csv(reports, &mut *stdout)?;
            }
        }
    }
    Ok(())
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli, stdout: &mut impl Write, stderr: &mut impl Write) -> i32 {
    let args = match cli.command {
        Command::List => {
            let _ = write!(stdout, "{}", list_scenarios());
            return EXIT_OK;
        }
        Command::Run(args) => args,
    };
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "hardycalc: {e}");
            return EXIT_BAD_CONFIG;
        }
    };
    if cfg.selected().is_none() {
        let _ = writeln!(stderr, "hardycalc: unknown scenario {:?}; see `hardycalc list`", cfg.scenario);
        return EXIT_UNKNOWN_SCENARIO;
    }
    let reports = match run_reports(&cfg) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "hardycalc: {e}");
            return EXIT_BAD_CONFIG;
        }
    };
    let quiet_stdout = cfg.output.dir.is_none() && (cfg.output.json || cfg.output.csv);
    let summary: &mut dyn Write = if quiet_stdout { stderr } else { stdout };
    for r in &reports {
        let _ = writeln!(
            summary,
            "{} {} measured={:.6e} claimed={:.6e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.bound_measured,
            r.bound_claimed
        );
    }
    let _ = writeln!(summary, "fingerprint {}", fingerprint(&reports));
    if let Err(e) = emit(&cfg, &reports, stdout) {
        let _ = writeln!(stderr, "hardycalc: {e}");
        return EXIT_BAD_CONFIG;
    }
    if reports.iter().all(|r| r.pass) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_is_stable() {
        let text = list_scenarios();
        assert!(text.contains("example26") && text.contains("von_neumann"));
        assert_eq!(text, list_scenarios());
        let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
        assert_eq!(names[0], "example26");
        assert_eq!(names.len(), 13);
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::from_json("{\"scenario\": 3}").is_err());
        assert!(ExperimentConfig::from_json("{\"bogus\": 1}").is_err());
        let mut cfg = ExperimentConfig::from_json("{\"scenario\": \"eq21\", \"grid\": {\"n_samples\": 1000}}").unwrap();
        assert!(cfg.validate().is_err());
        cfg.grid.n_samples = 1024;
        assert!(cfg.validate().is_ok());
        cfg.symbols = vec!["1/(s+1)".into()];
        assert!(cfg.validate().is_err());
        cfg.scenario = "nope".into();
        assert!(cfg.selected().is_none());
    }

    #[test]
    fn exit_codes() {
        let run = |argv: &[&str]| {
            let cli = Cli::try_parse_from(argv).unwrap();
            execute(cli, &mut Vec::new(), &mut Vec::new())
        };
        assert_eq!(run(&["hardycalc", "run", "--scenario", "nope"]), EXIT_UNKNOWN_SCENARIO);
        assert_eq!(run(&["hardycalc", "run", "--scenario", "eq26", "--grid-n", "100"]), EXIT_BAD_CONFIG);
        assert_eq!(run(&["hardycalc", "run", "--scenario", "eq26", "--modes", "4"]), EXIT_OK);
    }

    #[test]
    fn example26_scenario_reports_half() {
        let cfg = ExperimentConfig { scenario: "example26".into(), modes: Some(64), ..Default::default() };
        let reports = run_reports(&cfg).unwrap();
        assert!(reports.iter().all(|r| r.pass), "{reports:#?}");
        assert!(reports[0].witness.contains("0.5000000000"));
    }

    #[test]
    fn fingerprint_ignores_runtime() {
        let cfg = ExperimentConfig { scenario: "square_function".into(), modes: Some(4), ..Default::default() };
        let mut a = run_reports(&cfg).unwrap();
        let b = run_reports(&cfg).unwrap();
        a[0].runtime_ms += 1.0;
        assert_eq!(fingerprint(&a), fingerprint(&b));
        a[0].bound_measured += 1.0;
        assert_ne!(fingerprint(&a), fingerprint(&b));
    }

    #[test]
    fn writes_report_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            scenario: "toeplitz_properties".into(),
            output: OutputConfig { dir: Some(dir.path().into()), json: false, csv: false, signals: true },
            ..Default::default()
        };
        let reports = run_reports(&cfg).unwrap();
        emit(&cfg, &reports, &mut Vec::new()).unwrap();
        for f in ["report.json", "report.csv", "toeplitz_input.csv", "toeplitz_output.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
