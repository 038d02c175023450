//! Command-line surface: analytic sweeps, meter-angle optimization tables,
//! knowledge-accumulation curves, and seeded Monte Carlo runs, exported as
//! CSV or JSON.
//!
//! Exit codes: 0 success, 1 invalid configuration or usage, 2 I/O failure,
//! 3 numerical non-convergence.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use seqmeas::entanglement::concurrence;
use seqmeas::measurement::{
    apply_kit, knowledge_of_kit, singlet_state, werner_state, KitStrength, MeasurementKit,
    PbsImperfection,
};
use seqmeas::montecarlo::{
    estimate_knowledge, reconstruct, sample_kit_chain, simulate_tomography, RngSeed, ShotCounts,
    TomographySettings,
};
use seqmeas::qcore::{DensityMatrix, Qubit, SquareMatrix};
use seqmeas::strategies::{
    adaptive_coherent_pair, incoherent_sequence, independent_coherent_pair, optimize_adaptive_pair,
    KitChain, KnowledgeEstimator, StrategyKind,
};

const EXIT_OK: i32 = 0;
const EXIT_CONFIG: i32 = 1;
const EXIT_IO: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

/// Optimizer refinement tolerance used by every command that optimizes.
const OPTIMIZER_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "seqmeas",
    version,
    about = "Sequential partial-measurement trade-off sweeps, optimization tables, and Monte Carlo runs"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandKind,
    #[command(flatten)]
    flags: SharedFlags,
}

#[derive(Subcommand, Clone, Copy)]
enum CommandKind {
    /// Single-kit trade-off sweep over the coupling strength
    SweepSingle,
    /// Two-kit strategy comparison sweep (incoherent, independent, adaptive)
    SweepStrategies,
    /// Optimized adaptive meter angles per coupling strength
    AdaptiveAngles,
    /// Knowledge accumulation and weak-measurement expansion over k_bar
    Accumulation,
    /// Finite-shot emulation: sampled knowledge and tomographic concurrence
    Montecarlo,
}

impl CommandKind {
    fn label(self) -> &'static str {
        match self {
            CommandKind::SweepSingle => "sweep-single",
            CommandKind::SweepStrategies => "sweep-strategies",
            CommandKind::AdaptiveAngles => "adaptive-angles",
            CommandKind::Accumulation => "accumulation",
            CommandKind::Montecarlo => "montecarlo",
        }
    }
}

#[derive(Args)]
struct SharedFlags {
    /// Points on the coupling-strength grid over [0, pi/4]
    #[arg(long, global = true)]
    psi_steps: Option<u32>,
    /// Points on the single-step-knowledge grid over [0, 1]
    #[arg(long, global = true)]
    kbar_steps: Option<u32>,
    /// Number of sequential measurements
    #[arg(long, global = true)]
    n: Option<u32>,
    /// Strategy filter (single | incoherent | independent | adaptive)
    #[arg(long, global = true)]
    strategy: Option<String>,
    /// Werner mixing parameter of the initial state
    #[arg(long, global = true)]
    werner_p: Option<f64>,
    /// Readout transmission of horizontal polarization (with --pbs-rv)
    #[arg(long, global = true)]
    pbs_th: Option<f64>,
    /// Readout reflection of vertical polarization (with --pbs-th)
    #[arg(long, global = true)]
    pbs_rv: Option<f64>,
    /// Shots per sample (0 = analytic; montecarlo requires >= 1)
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Base seed for all Monte Carlo sampling
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path ("-" = stdout)
    #[arg(long, global = true)]
    out: Option<String>,
    /// Output format (csv | json)
    #[arg(long, global = true)]
    format: Option<String>,
    /// JSON config file whose keys mirror the flag names; flags win
    #[arg(long, global = true)]
    config: Option<String>,
}

/// Config-file counterpart of the flags. Keys accept both snake_case and
/// the kebab-case flag spelling; unknown keys are rejected.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default, alias = "psi-steps")]
    psi_steps: Option<u32>,
    #[serde(default, alias = "kbar-steps")]
    kbar_steps: Option<u32>,
    #[serde(default)]
    n: Option<u32>,
    #[serde(default)]
    strategy: Option<String>,
    #[serde(default, alias = "werner-p")]
    werner_p: Option<f64>,
    #[serde(default, alias = "pbs-th")]
    pbs_th: Option<f64>,
    #[serde(default, alias = "pbs-rv")]
    pbs_rv: Option<f64>,
    #[serde(default)]
    shots: Option<u64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    out: Option<String>,
    #[serde(default)]
    format: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?}; expected csv or json")),
        }
    }
}

/// Fully resolved run configuration: flag > config file > default.
#[derive(Serialize)]
struct ResolvedConfig {
    command: &'static str,
    psi_steps: u32,
    kbar_steps: u32,
    n: u32,
    strategy: Option<String>,
    werner_p: f64,
    pbs_th: Option<f64>,
    pbs_rv: Option<f64>,
    shots: u64,
    seed: u64,
    out: String,
    format: OutputFormat,
}

impl ResolvedConfig {
    fn resolve(command: CommandKind, flags: &SharedFlags, file: FileConfig) -> Result<Self, String> {
        let config = ResolvedConfig {
            command: command.label(),
            psi_steps: flags.psi_steps.or(file.psi_steps).unwrap_or(51),
            kbar_steps: flags.kbar_steps.or(file.kbar_steps).unwrap_or(101),
            n: flags.n.or(file.n).unwrap_or(2),
            strategy: flags.strategy.clone().or(file.strategy),
            werner_p: flags.werner_p.or(file.werner_p).unwrap_or(1.0),
            pbs_th: flags.pbs_th.or(file.pbs_th),
            pbs_rv: flags.pbs_rv.or(file.pbs_rv),
            shots: flags.shots.or(file.shots).unwrap_or(0),
            seed: flags.seed.or(file.seed).unwrap_or(42),
            out: flags.out.clone().or(file.out).unwrap_or_else(|| "-".into()),
            format: flags
                .format
                .clone()
                .or(file.format)
                .unwrap_or_else(|| "csv".into())
                .parse()?,
        };
        if config.psi_steps == 0 {
            return Err("psi-steps must be at least 1".into());
        }
        if config.kbar_steps == 0 {
            return Err("kbar-steps must be at least 1".into());
        }
        if config.n == 0 {
            return Err("n must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&config.werner_p) || !config.werner_p.is_finite() {
            return Err(format!("werner-p {} is not in [0, 1]", config.werner_p));
        }
        if config.pbs_th.is_some() != config.pbs_rv.is_some() {
            return Err("pbs-th and pbs-rv must be given together".into());
        }
        Ok(config)
    }

    fn strategy_kind(&self) -> Result<Option<StrategyKind>, String> {
        self.strategy
            .as_deref()
            .map(|s| s.parse::<StrategyKind>().map_err(|e| e.to_string()))
            .transpose()
    }

    fn imperfection(&self) -> Result<Option<PbsImperfection>, String> {
        match (self.pbs_th, self.pbs_rv) {
            (Some(t_h), Some(r_v)) => PbsImperfection::from_transmissions(t_h, r_v)
                .map(Some)
                .map_err(|e| e.to_string()),
            _ => Ok(None),
        }
    }

    fn initial_state(&self) -> Result<DensityMatrix, String> {
        werner_state(self.werner_p).map_err(|e| e.to_string())
    }
}

/// Uniform grid of `steps` points on [lo, hi] (the single point `lo` when
/// steps = 1).
fn grid(lo: f64, hi: f64, steps: u32) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * f64::from(i) / f64::from(steps - 1))
        .collect()
}

#[derive(Clone)]
enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

struct Table {
    columns: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            // 12 significant digits in scientific notation.
            Cell::Float(v) => format!("{v:.11e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
            Cell::Bool(v) => v.to_string(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::Float(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Text(v) => json!(v),
            Cell::Bool(v) => json!(v),
        }
    }
}

/// A command failure carrying the process exit code.
struct CommandError {
    code: i32,
    message: String,
}

impl CommandError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

fn library(err: seqmeas::Error) -> CommandError {
    let code = match err {
        seqmeas::Error::NonConvergence { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    };
    CommandError {
        code,
        message: err.to_string(),
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            // Help and version go to stdout, diagnostics to stderr.
            let _ = err.print();
            return code;
        }
    };

    let file = match &cli.flags.config {
        None => FileConfig::default(),
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(text) => text,
                Err(err) => {
                    eprintln!("seqmeas: cannot read config {path}: {err}");
                    return EXIT_IO;
                }
            };
            match serde_json::from_str(&text) {
                Ok(file) => file,
                Err(err) => {
                    eprintln!("seqmeas: invalid config {path}: {err}");
                    return EXIT_CONFIG;
                }
            }
        }
    };

    let config = match ResolvedConfig::resolve(cli.command, &cli.flags, file) {
        Ok(config) => config,
        Err(message) => {
            eprintln!("seqmeas: {message}");
            return EXIT_CONFIG;
        }
    };

    let table = match dispatch(cli.command, &config) {
        Ok(table) => table,
        Err(err) => {
            eprintln!("seqmeas: {}", err.message);
            return err.code;
        }
    };

    match write_output(&config, &table) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("seqmeas: cannot write {}: {err}", config.out);
            EXIT_IO
        }
    }
}

fn dispatch(command: CommandKind, config: &ResolvedConfig) -> Result<Table, CommandError> {
    match command {
        CommandKind::SweepSingle => cmd_sweep_single(config),
        CommandKind::SweepStrategies => cmd_sweep_strategies(config),
        CommandKind::AdaptiveAngles => cmd_adaptive_angles(config),
        CommandKind::Accumulation => cmd_accumulation(config),
        CommandKind::Montecarlo => cmd_montecarlo(config),
    }
}

/// The trade-off of one kit across the strength grid: ideal-singlet
/// concurrence, the modeled concurrence on the configured Werner state, and
/// the incoherent reference 1 - k at matched knowledge (the row's k, which
/// includes any readout-imperfection rescaling).
fn cmd_sweep_single(config: &ResolvedConfig) -> Result<Table, CommandError> {
    let imperfection = config.imperfection().map_err(CommandError::config)?;
    let initial = config.initial_state().map_err(CommandError::config)?;
    let singlet = singlet_state();
    let mut rows = Vec::new();
    for psi in grid(0.0, FRAC_PI_4, config.psi_steps) {
        let strength = KitStrength::new(psi).map_err(library)?;
        let mut kit = MeasurementKit::ideal(strength);
        if let Some(pbs) = imperfection {
            kit = kit.with_imperfection(pbs);
        }
        let k = knowledge_of_kit(&kit).value;
        let c_ideal = concurrence(
            &apply_kit(&singlet, &kit, Qubit::B).map_err(library)?.non_selective,
        )
        .map_err(library)?;
        let c_model = concurrence(
            &apply_kit(&initial, &kit, Qubit::B).map_err(library)?.non_selective,
        )
        .map_err(library)?;
        let c_incoherent_reference = incoherent_sequence(k, 1, &initial).map_err(library)?.c;
        rows.push(vec![
            Cell::Float(psi),
            Cell::Float((FRAC_PI_4 - psi) / 2.0),
            Cell::Float(k),
            Cell::Float(c_ideal),
            Cell::Float(c_model),
            Cell::Float(c_incoherent_reference),
        ]);
    }
    Ok(Table {
        columns: &["psi", "theta_b", "k", "c_ideal", "c_model", "c_incoherent_reference"],
        rows,
    })
}

/// Two-measurement strategies on the singlet across the strength grid, the
/// adaptive rows at optimized meter angles.
fn cmd_sweep_strategies(config: &ResolvedConfig) -> Result<Table, CommandError> {
    if config.n != 2 {
        return Err(CommandError::config(format!(
            "sweep-strategies compares two-measurement strategies; n = {} is not supported",
            config.n
        )));
    }
    let singlet = singlet_state();
    let mut rows = Vec::new();
    for psi in grid(0.0, FRAC_PI_4, config.psi_steps) {
        let strength = KitStrength::new(psi).map_err(library)?;
        let k_bar = knowledge_of_kit(&MeasurementKit::ideal(strength)).value;
        let incoherent = incoherent_sequence(k_bar, 2, &singlet).map_err(library)?;
        let independent = independent_coherent_pair(strength, &singlet).map_err(library)?;
        let solution = optimize_adaptive_pair(strength, OPTIMIZER_TOL).map_err(library)?;
        if !solution.converged {
            return Err(CommandError::numerical(format!(
                "adaptive optimization did not converge at psi = {psi}"
            )));
        }
        let adaptive =
            adaptive_coherent_pair(strength, solution.lambda0, solution.lambda1, &singlet)
                .map_err(library)?;
        for point in [incoherent, independent, adaptive] {
            rows.push(vec![
                Cell::Float(psi),
                Cell::Float(k_bar),
                Cell::Text(point.strategy.label().to_string()),
                Cell::Float(point.k_tot),
                Cell::Float(point.c),
            ]);
        }
    }
    Ok(Table {
        columns: &["psi", "k_bar", "strategy", "k_tot", "c"],
        rows,
    })
}

/// Optimized second-kit meter angles per strength, with the residual of the
/// optimal trade-off identity sqrt(1 - C^2) = K_tot as an internal check.
fn cmd_adaptive_angles(config: &ResolvedConfig) -> Result<Table, CommandError> {
    let singlet = singlet_state();
    let mut rows = Vec::new();
    let mut all_converged = true;
    for psi in grid(0.0, FRAC_PI_4, config.psi_steps) {
        let strength = KitStrength::new(psi).map_err(library)?;
        let solution = optimize_adaptive_pair(strength, OPTIMIZER_TOL).map_err(library)?;
        all_converged &= solution.converged;
        let point =
            adaptive_coherent_pair(strength, solution.lambda0, solution.lambda1, &singlet)
                .map_err(library)?;
        let residual = ((1.0 - point.c * point.c).max(0.0).sqrt() - point.k_tot).abs();
        rows.push(vec![
            Cell::Float(psi),
            Cell::Float(solution.lambda0.angle()),
            Cell::Float(solution.lambda1.angle()),
            Cell::Float(point.k_tot),
            Cell::Float(residual),
            Cell::Bool(solution.converged),
        ]);
    }
    let table = Table {
        columns: &["psi", "lambda0", "lambda1", "k_tot", "residual_vs_optimal_tradeoff", "converged"],
        rows,
    };
    if !all_converged {
        return Err(CommandError::numerical(
            "adaptive optimization left unconverged rows".to_string(),
        ));
    }
    Ok(table)
}

/// The small-knowledge expansion reference of a strategy's concurrence.
fn zeno_expansion(strategy: StrategyKind, n: u32, k_bar: f64) -> f64 {
    match strategy {
        StrategyKind::Incoherent => 1.0 - f64::from(n) * k_bar,
        _ => 1.0 - f64::from(n) * k_bar * k_bar / 2.0,
    }
}

/// Accumulated knowledge and disturbance across the single-step-knowledge
/// grid, for the configured strategy or (by default) the adaptive and
/// incoherent pair side by side.
fn cmd_accumulation(config: &ResolvedConfig) -> Result<Table, CommandError> {
    let strategies: Vec<StrategyKind> = match config.strategy_kind().map_err(CommandError::config)? {
        Some(kind) => vec![kind],
        None => vec![StrategyKind::Adaptive, StrategyKind::Incoherent],
    };
    let k_bar_grid = grid(0.0, 1.0, config.kbar_steps);
    let n = config.n as usize;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &strategy in &strategies {
        let points = seqmeas::strategies::accumulation_curve(strategy, &k_bar_grid, n)
            .map_err(library)?;
        curves.push(points);
    }
    for (index, &k_bar) in k_bar_grid.iter().enumerate() {
        for (curve, &strategy) in curves.iter().zip(&strategies) {
            let point = curve[index];
            rows.push(vec![
                Cell::Float(k_bar),
                Cell::Text(strategy.label().to_string()),
                Cell::Int(u64::from(config.n)),
                Cell::Float(point.k_tot),
                Cell::Float(point.c),
                Cell::Float(zeno_expansion(strategy, config.n, k_bar)),
            ]);
        }
    }
    Ok(Table {
        columns: &["k_bar", "strategy", "n", "k_tot", "c", "c_zeno_expansion"],
        rows,
    })
}

/// Finite-shot emulation per strength grid point: knowledge from sampled
/// chain outcomes, concurrence from simulated tomography of the exact final
/// state. Each point derives its own seed from the base seed.
fn cmd_montecarlo(config: &ResolvedConfig) -> Result<Table, CommandError> {
    if config.shots == 0 {
        return Err(CommandError::config(
            "montecarlo needs --shots >= 1 (shots = 0 is the analytic mode of the sweeps)",
        ));
    }
    let strategy = config
        .strategy_kind()
        .map_err(CommandError::config)?
        .unwrap_or(StrategyKind::Single);
    if !matches!(strategy, StrategyKind::Single | StrategyKind::Adaptive) {
        return Err(CommandError::config(format!(
            "montecarlo samples the single or adaptive strategy, not {strategy}"
        )));
    }
    let imperfection = config.imperfection().map_err(CommandError::config)?;
    let initial = config.initial_state().map_err(CommandError::config)?;
    let base = RngSeed::new(config.seed);
    let settings = TomographySettings::new(config.shots).map_err(library)?;
    let mut rows = Vec::new();
    for (index, psi) in grid(0.0, FRAC_PI_4, config.psi_steps).into_iter().enumerate() {
        let strength = KitStrength::new(psi).map_err(library)?;
        let mut kit = MeasurementKit::ideal(strength);
        if let Some(pbs) = imperfection {
            kit = kit.with_imperfection(pbs);
        }
        let (chain, estimator, state) = match strategy {
            StrategyKind::Single => {
                let chain = KitChain::uniform(kit, 1);
                let state = apply_kit(&initial, &kit, Qubit::B)
                    .map_err(library)?
                    .non_selective;
                (chain, KnowledgeEstimator::FirstOutcome, state)
            }
            _ => {
                let solution = optimize_adaptive_pair(strength, OPTIMIZER_TOL).map_err(library)?;
                if !solution.converged {
                    return Err(CommandError::numerical(format!(
                        "adaptive optimization did not converge at psi = {psi}"
                    )));
                }
                let chain = KitChain::pair(
                    kit,
                    kit.with_meter_basis(solution.lambda0),
                    kit.with_meter_basis(solution.lambda1),
                );
                let first = apply_kit(&initial, &kit, Qubit::B).map_err(library)?;
                let mut total = SquareMatrix::zeros(4).map_err(library)?;
                for branch in &first.branches {
                    let Some(branch_state) = &branch.state else { continue };
                    let second = if branch.outcome == 0 {
                        kit.with_meter_basis(solution.lambda0)
                    } else {
                        kit.with_meter_basis(solution.lambda1)
                    };
                    let ns = apply_kit(branch_state, &second, Qubit::B)
                        .map_err(library)?
                        .non_selective;
                    total = total.add(&ns.matrix().scale_re(branch.probability));
                }
                let state = DensityMatrix::new(total).map_err(library)?;
                (chain, KnowledgeEstimator::LastOutcome, state)
            }
        };

        let point_seed = base.derive(index as u64);
        let mut counts = ShotCounts::new();
        for input in 0..2u8 {
            let sampled = sample_kit_chain(
                input,
                &chain,
                config.shots,
                point_seed.derive(1 + u64::from(input)),
            )
            .map_err(library)?;
            for ((group, sequence), &weight) in sampled.iter() {
                counts
                    .record(*group, sequence.clone(), weight)
                    .map_err(library)?;
            }
        }
        let (k_hat, k_sigma) = estimate_knowledge(&counts, estimator).map_err(library)?;

        let tomography =
            simulate_tomography(&state, settings, point_seed.derive(3)).map_err(library)?;
        let c_hat = concurrence(&reconstruct(&tomography).map_err(library)?.physical)
            .map_err(library)?;

        rows.push(vec![
            Cell::Float(psi),
            Cell::Float(k_hat),
            Cell::Float(k_sigma),
            Cell::Float(c_hat),
            Cell::Int(point_seed.value()),
        ]);
    }
    Ok(Table {
        columns: &["psi", "k_hat", "k_sigma", "c_hat", "seed"],
        rows,
    })
}

fn render(config: &ResolvedConfig, table: &Table) -> String {
    match config.format {
        OutputFormat::Csv => {
            let mut text = String::new();
            text.push_str(&table.columns.join(","));
            text.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(Cell::to_csv).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            text
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|row| {
                    let mut object = serde_json::Map::new();
                    for (column, cell) in table.columns.iter().zip(row) {
                        object.insert((*column).to_string(), cell.to_json());
                    }
                    serde_json::Value::Object(object)
                })
                .collect();
            let document = json!({
                "config": config,
                "rows": rows,
            });
            let mut text = serde_json::to_string_pretty(&document).expect("serializable output");
            text.push('\n');
            text
        }
    }
}

fn write_output(config: &ResolvedConfig, table: &Table) -> std::io::Result<()> {
    let text = render(config, table);
    if config.out == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(text.as_bytes())?;
        stdout.flush()
    } else {
        std::fs::write(&config.out, text)
    }
}
