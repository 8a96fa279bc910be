//! The `acam` command line.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for invalid data or
//! failed I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::arch_model::{self, ArchConfig, CostWeights, DEFAULT_P_MM};
use crate::device_model::synth::default_gain;
use crate::device_model::{
    bound_to_conductance, gen_synthetic_luts, load_luts, save_luts, ArchKind, GridSizes, LutSet,
    PulldownParams, TechParams,
};
use crate::forest_compiler::{
    measured_mismatch_stats, CompiledForest, Dataset, ForestModel, DEFAULT_MAX_SEGMENT,
};
use crate::inference::crosstalk::{near_boundary_benchmark, CrosstalkSpec, CROSSTALK_LENGTHS};
use crate::inference::{evaluate_dataset, segment_length_sweep, write_sweep_csv, EvalConfig};
use crate::matchline::{row_discharge, sense, CellProgram, RowProgram};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "acam", version, about = "Analog CAM simulator, forest compiler and design-space optimizer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic LUT set.
    GenLuts(GenLutsArgs),
    /// Compile a forest model into programmed words.
    Compile(CompileArgs),
    /// Sweep the latch-sharing design space and report the cheapest point.
    Optimize(OptimizeArgs),
    /// Classify a dataset with a compiled forest.
    Infer(InferArgs),
    /// Measure mismatch statistics and early-termination savings.
    Stats(StatsArgs),
    /// Simulate one match line and write its transient.
    Simulate(SimulateArgs),
    /// Run the near-boundary crosstalk study over segment lengths.
    Crosstalk(CrosstalkArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Technology config (flat TOML); missing keys keep built-in defaults.
    #[arg(long, value_name = "FILE")]
    pub tech: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct GenLutsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Cell family: salm, 6t2m or ideal.
    #[arg(long)]
    pub kind: String,
    /// Transfer gain (1/V); defaults to the family's calibration.
    #[arg(long)]
    pub gain: Option<f64>,
    #[arg(long, default_value_t = GridSizes::default().transfer)]
    pub transfer_points: usize,
    #[arg(long, default_value_t = GridSizes::default().pulldown)]
    pub pulldown_points: usize,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[command(flatten)]
    pub common: Common,
    /// Forest model in the JSON interchange format.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Cells per match-line segment.
    #[arg(long, default_value_t = DEFAULT_MAX_SEGMENT)]
    pub segment: usize,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Inequalities per word.
    #[arg(long, default_value_t = 32)]
    pub n_word: usize,
    /// Cost weights `wE,wL,wA`.
    #[arg(long, default_value = "0.45,0.05,0.5")]
    pub weights: String,
    /// Per-inequality mismatch probability.
    #[arg(long, default_value_t = DEFAULT_P_MM)]
    pub pmm: f64,
    /// Also estimate each point's energy by Monte Carlo with this many trials.
    #[arg(long)]
    pub mc_trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Ideal,
    Behavioral,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    /// Compiled forest.
    #[arg(long, value_name = "FILE")]
    pub compiled: PathBuf,
    /// Dataset CSV.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "ideal")]
    pub mode: ModeArg,
    /// LUT directory, required in behavioral mode.
    #[arg(long, value_name = "DIR")]
    pub luts: Option<PathBuf>,
    /// Architecture `n_seq,n_par` for step and energy accounting.
    #[arg(long)]
    pub arch: Option<String>,
    /// Re-tile at this segment length before evaluating.
    #[arg(long)]
    pub segment: Option<usize>,
    /// Comma-separated segment lengths to sweep.
    #[arg(long)]
    pub segment_sweep: Option<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub compiled: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Energy-reduction targets to report `n_seq` for.
    #[arg(long, default_value = "0.5,0.8")]
    pub targets: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "DIR")]
    pub luts: PathBuf,
    /// Normalized bounds per cell, `lb:hb` separated by commas; `*` is a
    /// wildcard side, e.g. `0.2:0.6,*:0.5`.
    #[arg(long)]
    pub cells: String,
    /// Normalized query per cell, comma-separated.
    #[arg(long)]
    pub query: String,
}

#[derive(Debug, Args)]
pub struct CrosstalkArgs {
    #[command(flatten)]
    pub common: Common,
    /// LUT directory; one sweep per directory, comma-separated.
    #[arg(long, value_name = "DIRS")]
    pub luts: String,
    #[arg(long, default_value = "8,16,32,64,128")]
    pub lengths: String,
    #[arg(long, default_value_t = CrosstalkSpec::default().seed)]
    pub seed: u64,
}

/// Parses a comma-separated list.
pub fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| CliError::Usage(format!("{what}: cannot parse `{t}` in `{s}`")))
        })
        .collect()
}

pub fn parse_weights(s: &str) -> Result<CostWeights, CliError> {
    let w: Vec<f64> = parse_list(s, "--weights")?;
    if w.len() != 3 {
        return Err(CliError::Usage("--weights expects wE,wL,wA".into()));
    }
    CostWeights::new(w[0], w[1], w[2]).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_arch(s: &str, n_word: usize) -> Result<ArchConfig, CliError> {
    let v: Vec<usize> = parse_list(s, "--arch")?;
    if v.len() != 2 {
        return Err(CliError::Usage("--arch expects n_seq,n_par".into()));
    }
    ArchConfig::new(v[0], v[1], n_word.max(1)).map_err(|e| CliError::Usage(e.to_string()))
}

fn load_tech(common: &Common) -> Result<TechParams, CliError> {
    match &common.tech {
        Some(p) => TechParams::load(p).map_err(data),
        None => Ok(TechParams::default()),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let p = dir.join(name);
    File::create(&p)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn write_with<F>(dir: &Path, name: &str, f: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create(dir, name)?;
    let path = dir.join(name);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, v: &T) -> Result<PathBuf, CliError> {
    write_with(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, v)?;
        writeln!(w)
    })
}

fn load_luts_for(dir: &Path) -> Result<LutSet, CliError> {
    load_luts(dir).map_err(data)
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = match &cli.command {
        Command::GenLuts(a) => a.common.jobs,
        Command::Compile(a) => a.common.jobs,
        Command::Optimize(a) => a.common.jobs,
        Command::Infer(a) => a.common.jobs,
        Command::Stats(a) => a.common.jobs,
        Command::Simulate(a) => a.common.jobs,
        Command::Crosstalk(a) => a.common.jobs,
    };
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(data)?;
    pool.install(|| match cli.command {
        Command::GenLuts(a) => cmd_gen_luts(&a),
        Command::Compile(a) => cmd_compile(&a),
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Infer(a) => cmd_infer(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Crosstalk(a) => cmd_crosstalk(&a),
    })
}

pub fn cmd_gen_luts(a: &GenLutsArgs) -> Result<(), CliError> {
    let kind: ArchKind = a.kind.parse().map_err(|e| CliError::Usage(format!("--kind: {e}")))?;
    let tech = load_tech(&a.common)?;
    let gain = a.gain.unwrap_or_else(|| default_gain(kind));
    let sizes = GridSizes {
        transfer: a.transfer_points,
        pulldown: a.pulldown_points,
    };
    let set = gen_synthetic_luts(&tech, kind, gain, sizes, PulldownParams::default())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    save_luts(&set, &a.common.out).map_err(data)?;
    println!("{} -> {}", set.summary(), a.common.out.display());
    Ok(())
}

pub fn cmd_compile(a: &CompileArgs) -> Result<(), CliError> {
    let tech = load_tech(&a.common)?;
    let model = ForestModel::load(&a.model).map_err(data)?;
    let c = CompiledForest::compile(&model, &tech, a.segment).map_err(data)?;
    std::fs::create_dir_all(&a.common.out).map_err(data)?;
    let path = a.common.out.join("compiled.json");
    c.save(&path).map_err(data)?;
    for w in &c.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} trees, {} words, {} tiles (segment {}), max {} inequalities per word -> {}",
        c.n_trees(),
        c.words.len(),
        c.n_tiles(),
        c.max_segment,
        c.max_inequalities(),
        path.display()
    );
    Ok(())
}

pub fn cmd_optimize(a: &OptimizeArgs) -> Result<(), CliError> {
    let tech = load_tech(&a.common)?;
    let weights = parse_weights(&a.weights)?;
    if !(0.0..=1.0).contains(&a.pmm) {
        return Err(CliError::Usage(format!("--pmm {} outside [0, 1]", a.pmm)));
    }
    if a.n_word == 0 {
        return Err(CliError::Usage("--n-word must be at least 1".into()));
    }
    let sweep = arch_model::sweep(a.n_word, &tech, &weights, a.pmm).map_err(data)?;
    let path = write_with(&a.common.out, "sweep.csv", |w| sweep.write_csv(w))?;
    if let Some(trials) = a.mc_trials {
        let rows: Vec<(usize, f64, f64, f64)> = sweep
            .points
            .iter()
            .map(|p| {
                let (m, s) = arch_model::monte_carlo_energy(&p.cfg, &tech, a.pmm, trials, a.seed)
                    .map_err(data)?;
                Ok((p.cfg.n_seq, p.e_word, m, s))
            })
            .collect::<Result<_, CliError>>()?;
        write_with(&a.common.out, "energy_mc.csv", |w| {
            writeln!(w, "n_seq,e_word_J,e_mc_J,e_mc_stderr_J")?;
            for (n, e, m, s) in &rows {
                writeln!(w, "{n},{e:.6e},{m:.6e},{s:.3e}")?;
            }
            Ok(())
        })?;
    }
    let b = sweep.best_point();
    println!(
        "best n_seq={} n_par={} cost={:.4} latency={:.3e} s area={:.4} um2 energy={:.4e} J -> {}",
        b.cfg.n_seq,
        b.cfg.n_par,
        b.cost,
        b.t_word,
        b.a_word,
        b.e_word,
        path.display()
    );
    Ok(())
}

pub fn cmd_infer(a: &InferArgs) -> Result<(), CliError> {
    let tech = load_tech(&a.common)?;
    let mut cfg = match (a.mode, &a.luts) {
        (ModeArg::Ideal, _) => EvalConfig::ideal(tech.clone()),
        (ModeArg::Behavioral, Some(dir)) => EvalConfig::behavioral(load_luts_for(dir)?, tech.clone()),
        (ModeArg::Behavioral, None) => {
            return Err(CliError::Usage("behavioral mode needs --luts <dir>".into()))
        }
    };
    let lengths: Option<Vec<usize>> = a
        .segment_sweep
        .as_deref()
        .map(|s| parse_list(s, "--segment-sweep"))
        .transpose()?;
    if lengths.as_ref().is_some_and(|l| l.contains(&0)) || a.segment == Some(0) {
        return Err(CliError::Usage("segment lengths must be at least 1".into()));
    }
    let mut compiled = CompiledForest::load(&a.compiled).map_err(data)?;
    if let Some(s) = a.segment {
        compiled = compiled.with_segment(s).map_err(data)?;
    }
    if let Some(s) = &a.arch {
        cfg = cfg.with_arch(parse_arch(s, compiled.max_inequalities())?);
    }
    let dataset = Dataset::load(&a.data).map_err(data)?;

    let ev = evaluate_dataset(&compiled, &dataset, &cfg).map_err(data)?;
    write_json(&a.common.out, "report.json", &ev.report)?;
    write_with(&a.common.out, "queries.csv", |w| ev.write_records_csv(w))?;
    let r = &ev.report;
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.4}", v));
    println!(
        "{}: {} queries, accuracy {}, agreement {}, abstained {}",
        r.mode,
        r.n_queries,
        pct(r.accuracy),
        pct(r.agreement_with_software),
        r.no_prediction
    );
    if let Some(e) = &r.energy {
        println!("energy per query: mean {:.4e} J, std {:.4e} J", e.mean_j, e.std_j);
    }
    if let Some(lengths) = lengths {
        let rows = segment_length_sweep(&compiled, &dataset, &cfg, &lengths).map_err(data)?;
        let p = write_with(&a.common.out, "segment_sweep.csv", |w| write_sweep_csv(&rows, w))?;
        println!("segment sweep ({} lengths) -> {}", rows.len(), p.display());
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct StatsSummary {
    n_queries: usize,
    n_words: usize,
    n_features: usize,
    max_word_inequalities: usize,
    mean_depth: f64,
    reduction_at: Vec<(usize, f64)>,
    n_seq_for_target: Vec<(f64, Option<usize>)>,
}

pub fn cmd_stats(a: &StatsArgs) -> Result<(), CliError> {
    let targets: Vec<f64> = parse_list(&a.targets, "--targets")?;
    let compiled = CompiledForest::load(&a.compiled).map_err(data)?;
    let dataset = Dataset::load(&a.data).map_err(data)?;
    dataset
        .check_schema(compiled.n_features, compiled.n_classes)
        .map_err(data)?;
    let s = measured_mismatch_stats(&compiled, &dataset);
    let out = &a.common.out;
    write_with(out, "p_mm.csv", |w| s.write_feature_csv(w))?;
    write_with(out, "depth_histogram.csv", |w| s.write_histogram_csv(w))?;
    write_with(out, "energy_reduction.csv", |w| s.write_reduction_csv(w))?;
    let summary = StatsSummary {
        n_queries: s.n_queries,
        n_words: s.n_words,
        n_features: compiled.n_features,
        max_word_inequalities: s.max_word_len(),
        mean_depth: s.mean_depth,
        reduction_at: s.reduction_curve(),
        n_seq_for_target: targets.iter().map(|&t| (t, s.n_seq_for(t))).collect(),
    };
    write_json(out, "stats.json", &summary)?;
    println!(
        "{} queries x {} words, mean depth {:.3}",
        s.n_queries, s.n_words, s.mean_depth
    );
    for (t, n) in &summary.n_seq_for_target {
        match n {
            Some(n) => println!(
                "  {:.0}% reduction: n_seq = {n} ({:.1}%)",
                t * 100.0,
                s.reduction(*n) * 100.0
            ),
            None => println!("  {:.0}% reduction: not reached", t * 100.0),
        }
    }
    Ok(())
}

fn parse_side(tok: &str) -> Result<Option<f64>, CliError> {
    if tok.trim() == "*" {
        return Ok(None);
    }
    tok.trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| CliError::Usage(format!("--cells: cannot parse `{tok}`")))
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let tech = load_tech(&a.common)?;
    let luts = load_luts_for(&a.luts)?;
    let cells = a
        .cells
        .split(',')
        .map(|c| {
            let (lb, hb) = c
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("--cells: `{c}` is not lb:hb")))?;
            let g = |t: Option<f64>| {
                t.map(|t| bound_to_conductance(t, tech.g_window))
                    .transpose()
                    .map_err(|e| CliError::Usage(e.to_string()))
            };
            Ok(CellProgram {
                g_lb: g(parse_side(lb)?)?,
                g_hb: g(parse_side(hb)?)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let query: Vec<f64> = parse_list(&a.query, "--query")?;
    let v: Vec<f64> = query.iter().map(|t| t.clamp(0.0, 1.0) * tech.v_dd).collect();
    let row = RowProgram::new(cells).map_err(|e| CliError::Usage(e.to_string()))?;
    let trace = row_discharge(&row, &v, &luts, &tech).map_err(|e| CliError::Usage(e.to_string()))?;
    let p = write_with(&a.common.out, "trace.csv", |w| trace.write_csv(w))?;
    println!(
        "{:?}: V_ML(t_max) = {:.6} V -> {}",
        sense(&trace, &tech),
        trace.v_ml_final,
        p.display()
    );
    Ok(())
}

pub fn cmd_crosstalk(a: &CrosstalkArgs) -> Result<(), CliError> {
    let tech = load_tech(&a.common)?;
    let lengths: Vec<usize> = parse_list(&a.lengths, "--lengths")?;
    if lengths.contains(&0) {
        return Err(CliError::Usage("segment lengths must be at least 1".into()));
    }
    let spec = CrosstalkSpec {
        seed: a.seed,
        n_features: lengths.iter().copied().max().unwrap_or(CROSSTALK_LENGTHS[4]),
        ..CrosstalkSpec::default()
    };
    let (forest, queries) = near_boundary_benchmark(&spec, &tech).map_err(data)?;
    write_with(&a.common.out, "near_boundary_queries.csv", |w| {
        queries
            .write_csv(w)
            .map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    for dir in a.luts.split(',') {
        let luts = load_luts_for(Path::new(dir.trim()))?;
        let kind = luts.arch_kind;
        let cfg = EvalConfig::behavioral(luts, tech.clone());
        let rows = segment_length_sweep(&forest, &queries, &cfg, &lengths).map_err(data)?;
        let p = write_with(&a.common.out, &format!("crosstalk_{kind}.csv"), |w| {
            write_sweep_csv(&rows, w)
        })?;
        let rates: Vec<String> = rows
            .iter()
            .map(|r| format!("{}:{:.4}", r.segment_length, r.false_decision_rate.unwrap_or(0.0)))
            .collect();
        println!("{kind} false-decision rate {} -> {}", rates.join(" "), p.display());
    }
    Ok(())
}
