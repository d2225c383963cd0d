//! `sobol-maps`: fit bases, estimate sensitivity maps, benchmark the two map
//! routes, resample irregular series and score predictions.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 configuration or I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use sobol_maps::bench::{time_cell, MachineInfo};
use sobol_maps::io::{load_matrix, resample_linear, write_json, write_map_csv, IrregularSeries, SnapshotSet};
use sobol_maps::sampling::{parse_index_sets, sample_lhs_seeded};
use sobol_maps::{
    bootstrap_gsi, bootstrap_sm, build_index_samples, gsi_for_sample, max_relative_difference, parse_model,
    q_squared, sensitivity_map_bd, sm_dimension_wise, BasisExpansion, BootstrapSpec, IndexSample, IndexSet,
    PairedOutputSample, PcaTarget, PickFreezeDesign, ProjectedModel, Summary,
};

/// Largest DW/BD disagreement tolerated by `--method both`.
const AGREEMENT_TOLERANCE: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "sobol-maps", version, about = "Pick-freeze Sobol' sensitivity maps for functional outputs")]
struct Cli {
    /// Cap on worker threads (default: all logical CPUs). Results do not
    /// depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Fit a PCA basis to snapshots (from a CSV file or a model run on an LHS
    /// design).
    FitBasis(FitBasisArgs),
    /// Estimate sensitivity maps and GSI values through a fitted basis.
    Estimate(EstimateArgs),
    /// Time the dimension-wise and basis-derived routes on synthetic pairs.
    Benchmark(BenchmarkArgs),
    /// Interpolate irregular time series onto a regular grid.
    Resample(ResampleArgs),
    /// Predictivity coefficient Q² of predictions against reference outputs.
    Q2(Q2Args),
}

#[derive(Args, Debug, Serialize)]
struct FitBasisArgs {
    /// Snapshot CSV (`n x L`, one header row).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    snapshots: Option<PathBuf>,
    /// Model to run on an LHS design instead (`campbell2d`, `additive:w=1,2:l=50`, `product`).
    #[arg(long)]
    model: Option<String>,
    /// LHS design size when `--model` is used.
    #[arg(long, default_value_t = 200)]
    doe_size: usize,
    /// Seed of the LHS design.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep the fewest components explaining this variance fraction.
    #[arg(long, conflicts_with = "components")]
    variance_target: Option<f64>,
    /// Keep exactly this many components.
    #[arg(long)]
    components: Option<usize>,
    /// Output directory for the basis.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Dw,
    Bd,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SummaryArg {
    Mean,
    Median,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    /// Basis directory written by `fit-basis`.
    #[arg(long)]
    basis: PathBuf,
    /// Model whose outputs are projected on the basis.
    #[arg(long, conflicts_with = "pairs", required_unless_present = "pairs")]
    model: Option<String>,
    /// Directory of precomputed coefficient pairs: `y.csv` and
    /// `ystar_<frozen inputs, 1-based, joined by '-'>.csv`.
    #[arg(long, requires = "dims")]
    pairs: Option<PathBuf>,
    /// Input dimension of the precomputed pairs.
    #[arg(long)]
    dims: Option<usize>,
    /// Pick-freeze sample size.
    #[arg(long, short = 'n', default_value_t = 5000)]
    n: usize,
    /// Index sets, `;`-separated: `1`, `1,3`, `total:2`, `pair:1,2`, or `all`
    /// for every first-order closed and total index.
    #[arg(long, default_value = "all")]
    index_sets: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Bd)]
    method: MethodArg,
    /// Bootstrap replicates (0 disables the bootstrap).
    #[arg(long, short = 'b', default_value_t = 0)]
    bootstrap: usize,
    /// Bootstrap central summary.
    #[arg(long, value_enum, default_value_t = SummaryArg::Mean)]
    summary: SummaryArg,
    /// Seed of the pick-freeze design.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the bootstrap replicates.
    #[arg(long, default_value_t = 1)]
    boot_seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct BenchmarkArgs {
    /// Cells `N,m,L`, `;`-separated.
    #[arg(long, default_value = "5000,7,4096;5000,10,5000")]
    grid: String,
    /// Timed repetitions per route (at least 5), after one warm-up.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ResampleArgs {
    /// Long-format CSV with columns `series,t,value`.
    #[arg(long)]
    input: PathBuf,
    /// Number of regular grid points.
    #[arg(long, short = 'l')]
    points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct Q2Args {
    /// Reference outputs (`n x L` CSV).
    #[arg(long)]
    truth: PathBuf,
    /// Predicted outputs, same shape.
    #[arg(long)]
    predictions: PathBuf,
    /// Optional directory for `q2.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A run that completed but whose numbers breach a contract.
#[derive(Debug)]
struct NumericalFailure(String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<sobol_maps::Error>() {
            return if e.is_numerical() { 1 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match &cli.command {
        Command::Q2(args) => q2(args),
        command => {
            let out = match command {
                Command::FitBasis(a) => &a.out,
                Command::Estimate(a) => &a.out,
                Command::Benchmark(a) => &a.out,
                Command::Resample(a) => &a.out,
                Command::Q2(_) => unreachable!(),
            };
            fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
            write_json(
                &out.join("run_config.json"),
                &json!({ "version": env!("CARGO_PKG_VERSION"), "threads": cli.threads, "config": command }),
            )?;
            match command {
                Command::FitBasis(a) => fit_basis(a),
                Command::Estimate(a) => estimate(a),
                Command::Benchmark(a) => benchmark(a),
                Command::Resample(a) => resample(a),
                Command::Q2(_) => unreachable!(),
            }
        }
    }
}

fn fit_basis(args: &FitBasisArgs) -> anyhow::Result<()> {
    let target = match (args.variance_target, args.components) {
        (Some(f), None) => PcaTarget::VarianceFraction(f),
        (None, Some(m)) => PcaTarget::Components(m),
        (None, None) => PcaTarget::VarianceFraction(0.99),
        (Some(_), Some(_)) => bail!("give either --variance-target or --components"),
    };
    let snapshots = match (&args.snapshots, &args.model) {
        (Some(path), _) => load_matrix(path)?,
        (None, Some(name)) => {
            let model = parse_model(name)?;
            let doe = sample_lhs_seeded(model.input_space(), args.doe_size, args.seed)?;
            let snaps = model.evaluate_batch(&doe)?;
            SnapshotSet::new(snaps.clone()).with_doe(doe)?.save(&args.out.join("snapshots"))?;
            snaps
        }
        (None, None) => bail!("give --snapshots or --model"),
    };
    let basis = BasisExpansion::fit_pca(&snapshots, target)?;
    basis.save(&args.out)?;
    let cumulative = (1..=basis.spectrum().len())
        .map(|k| basis.explained_variance(k))
        .collect::<Result<Vec<_>, _>>()?;
    let explained = basis.explained_variance(basis.m())?;
    write_json(
        &args.out.join("explained_variance.json"),
        &json!({
            "m": basis.m(),
            "explained_variance": explained,
            "cumulative": cumulative,
            "eigenvalues": basis.spectrum(),
        }),
    )?;
    println!(
        "basis: n={} L={} m={} explained variance {:.4}% -> {}",
        snapshots.nrows(),
        basis.l(),
        basis.m(),
        100.0 * explained,
        args.out.display()
    );
    Ok(())
}

fn index_sets(text: &str, d: usize) -> anyhow::Result<Vec<IndexSet>> {
    if text.trim() == "all" {
        let mut sets = (0..d).map(|i| IndexSet::closed([i], d)).collect::<Result<Vec<_>, _>>()?;
        for i in 0..d {
            sets.push(IndexSet::total([i], d)?);
        }
        return Ok(sets);
    }
    Ok(parse_index_sets(text, d)?)
}

fn pairs_file(dir: &Path, frozen: &[usize]) -> PathBuf {
    let label: Vec<String> = frozen.iter().map(|j| (j + 1).to_string()).collect();
    dir.join(format!("ystar_{}.csv", label.join("-")))
}

fn load_pairs(dir: &Path, d: usize, sets: &[IndexSet]) -> anyhow::Result<Vec<IndexSample>> {
    let y = load_matrix(&dir.join("y.csv"))?;
    sets.iter()
        .map(|set| {
            let pairs = set
                .frozen_sets(d)
                .iter()
                .map(|frozen| Ok(PairedOutputSample::new(y.clone(), load_matrix(&pairs_file(dir, frozen))?)?))
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(IndexSample::new(set.clone(), pairs)?)
        })
        .collect()
}

fn estimate(args: &EstimateArgs) -> anyhow::Result<()> {
    let basis = BasisExpansion::load(&args.basis)?;
    let samples = match (&args.model, &args.pairs) {
        (Some(name), _) => {
            let model = parse_model(name)?;
            let sets = index_sets(&args.index_sets, model.dims())?;
            let design = PickFreezeDesign::new(model.input_space(), args.n, args.seed)?;
            let source = ProjectedModel::new(model.as_ref(), &basis)?;
            build_index_samples(&design, &source, &sets)?
        }
        (None, Some(dir)) => {
            let d = args.dims.ok_or_else(|| anyhow!("--pairs needs --dims"))?;
            load_pairs(dir, d, &index_sets(&args.index_sets, d)?)?
        }
        (None, None) => bail!("give --model or --pairs"),
    };
    let boot = (args.bootstrap > 0)
        .then(|| {
            BootstrapSpec::new(args.bootstrap, args.boot_seed).map(|s| {
                s.with_summary(match args.summary {
                    SummaryArg::Mean => Summary::Mean,
                    SummaryArg::Median => Summary::Median,
                })
            })
        })
        .transpose()?;

    let mut gsi_entries = Vec::new();
    let mut agreement = Vec::new();
    for sample in &samples {
        let set = sample.index_set();
        let label = set.file_label();
        let bands = boot.as_ref().map(|b| bootstrap_sm(sample, &basis, b)).transpose()?;
        let attach = |map: sobol_maps::SensitivityMap| match &bands {
            Some(b) => map.with_bands(b.clone()),
            None => Ok(map),
        };
        let bd = matches!(args.method, MethodArg::Bd | MethodArg::Both)
            .then(|| sensitivity_map_bd(&basis, sample).and_then(attach))
            .transpose()?;
        let dw = matches!(args.method, MethodArg::Dw | MethodArg::Both)
            .then(|| sm_dimension_wise(&basis, sample).and_then(attach))
            .transpose()?;
        for map in bd.iter().chain(dw.iter()) {
            write_map_csv(&args.out.join(format!("sm_{label}_{}.csv", map.method().label())), map)?;
        }
        if let (Some(bd), Some(dw)) = (&bd, &dw) {
            agreement.push(json!({
                "index_set": set.to_string(),
                "max_relative_difference": max_relative_difference(dw, bd)?,
            }));
        }
        let flagged = bd.as_ref().or(dw.as_ref()).map_or(0, |m| m.flagged_count());
        let gsi_bands = boot.as_ref().map(|b| bootstrap_gsi(sample, &basis, b)).transpose()?;
        let gsi = gsi_for_sample(&basis, sample)?;
        println!("{set:>12}  GSI {gsi:.6}  flagged dimensions {flagged}");
        gsi_entries.push(json!({
            "index_set": set.to_string(),
            "kind": set.kind().label(),
            "gsi": gsi,
            "flagged_dimensions": flagged,
            "bootstrap": gsi_bands,
        }));
    }
    write_json(
        &args.out.join("gsi.json"),
        &json!({ "n": samples.first().map(|s| s.n()), "m": basis.m(), "l": basis.l(), "indices": gsi_entries }),
    )?;
    if args.method == MethodArg::Both {
        let worst = agreement
            .iter()
            .map(|a| a["max_relative_difference"].as_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        let pass = worst <= AGREEMENT_TOLERANCE;
        write_json(
            &args.out.join("agreement.json"),
            &json!({
                "max_relative_difference": worst,
                "tolerance": AGREEMENT_TOLERANCE,
                "pass": pass,
                "per_index_set": agreement,
            }),
        )?;
        println!("dimension-wise vs basis-derived: max relative difference {worst:.3e}");
        if !pass {
            return Err(NumericalFailure(format!(
                "routes disagree: max relative difference {worst:e} > {AGREEMENT_TOLERANCE:e}"
            ))
            .into());
        }
    }
    Ok(())
}

fn parse_grid(text: &str) -> anyhow::Result<Vec<(usize, usize, usize)>> {
    text.split(';')
        .filter(|c| !c.trim().is_empty())
        .map(|cell| {
            let v = cell
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("benchmark cell `{cell}` is not N,m,L"))?;
            match v.as_slice() {
                &[n, m, l] if n > 1 && m > 0 && l > 0 => Ok((n, m, l)),
                _ => Err(anyhow!("benchmark cell `{cell}` needs three positive integers N>1,m,L")),
            }
        })
        .collect()
}

fn benchmark(args: &BenchmarkArgs) -> anyhow::Result<()> {
    let grid = parse_grid(&args.grid).map_err(|e| sobol_maps::Error::Config(format!("{e:#}")))?;
    let machine = MachineInfo::current();
    let mut cells = Vec::new();
    println!("{:>7} {:>4} {:>6} {:>12} {:>12} {:>9} {:>11}", "N", "m", "L", "DW median s", "BD median s", "measured", "theoretical");
    for (n, m, l) in grid {
        let t = time_cell(n, m, l, args.reps, args.seed)?;
        println!(
            "{n:>7} {m:>4} {l:>6} {:>12.6} {:>12.6} {:>9.1} {:>11.1}",
            t.dw_median_seconds, t.bd_median_seconds, t.measured_ratio, t.cost.ratio
        );
        cells.push(t);
    }
    write_json(&args.out.join("benchmark.json"), &json!({ "machine": machine, "cells": cells }))?;
    Ok(())
}

fn resample(args: &ResampleArgs) -> anyhow::Result<()> {
    let series = IrregularSeries::load(&args.input)?;
    let snaps = resample_linear(&series, args.points)?;
    snaps.save(&args.out)?;
    println!("resampled {} series onto {} points -> {}", series.len(), args.points, args.out.display());
    Ok(())
}

fn q2(args: &Q2Args) -> anyhow::Result<()> {
    let truth = load_matrix(&args.truth)?;
    let pred = load_matrix(&args.predictions)?;
    let q2 = q_squared(&truth, &pred)?;
    println!("Q2 = {q2:.12}");
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        write_json(&out.join("q2.json"), &json!({ "q2": q2, "truth": args.truth, "predictions": args.predictions }))?;
    }
    Ok(())
}
