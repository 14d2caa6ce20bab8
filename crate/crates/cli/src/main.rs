use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use geojson::{FeatureCollection, GeoJson};
use serde::Serialize;

use qregion_core::bench::{emit_plot_data, run_benchmark, write_metrics, BenchConfig, MetricsRow};
use qregion_core::init::initial_solution_from_seeds;
use qregion_core::localopt::{build_move_cqm, movable_areas, optimize, separator_band, OptimizeConfig};
use qregion_core::model::{export_model, SaParams, Sampler, SamplerKind};
use qregion_core::seeding::{build_threshold_graph, mis_bqm, select_seeds, SeedingConfig, DEFAULT_LAMBDA_MIS};
use qregion_core::spatial::grid::{grid_feature_collection, parse_grid_spec};
use qregion_core::spatial::{generate_grid, load_dataset, AttrDist, Contiguity, DatasetFormat, LoadOptions};
use qregion_core::spatial::io::{companion_edges_path, write_csv_dataset};
use qregion_core::{AreaGraph, Partition};

#[derive(Parser)]
#[command(name = "qregion", version, about = "Seeding-based spatial regionalization")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition a dataset into p contiguous regions.
    Regionalize(RegionalizeArgs),
    /// Write a random grid dataset.
    Generate(GenerateArgs),
    /// Run the paired size and p sweeps against the greedy baseline.
    Bench(BenchArgs),
    /// Write the seeding or move model of an instance as JSON.
    ExportModel(ExportArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// GeoJSON polygons, or a CSV area table with a companion edge list.
    #[arg(long, conflicts_with = "grid")]
    input: Option<PathBuf>,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<DatasetFormat>,
    #[arg(long, default_value = "attribute")]
    attr: String,
    /// Edge list for CSV input [default: <stem>.edges.csv].
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long, default_value = "rook")]
    contiguity: Contiguity,
    /// Generate an RxC grid instead of reading a file.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value = "uniform:0,100")]
    dist: AttrDist,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SamplerArg::Exhaustive)]
    sampler: SamplerArg,
    #[arg(long, default_value_t = 50)]
    reads: usize,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    /// Penalty on adjacent seed pairs in the independent-set model.
    #[arg(long, default_value_t = DEFAULT_LAMBDA_MIS)]
    lambda: f64,
    /// Constraint penalty when annealing a move model [default: derived].
    #[arg(long)]
    penalty: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Exhaustive,
    Sa,
}

impl SolverArgs {
    fn sampler(&self) -> Sampler {
        let kind = match self.sampler {
            SamplerArg::Exhaustive => SamplerKind::Exhaustive,
            SamplerArg::Sa => SamplerKind::Sa,
        };
        Sampler {
            kind,
            sa: SaParams {
                reads: self.reads,
                sweeps: self.sweeps,
                ..SaParams::default()
            },
        }
    }

    fn seeding(&self, p: usize, seed: u64) -> SeedingConfig {
        SeedingConfig {
            lambda_mis: self.lambda,
            ..SeedingConfig::new(p, self.sampler(), seed)
        }
    }
}

#[derive(Args)]
struct RegionalizeArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Apply a selected move only if its exact delta is non-positive.
    #[arg(long, overrides_with = "no_gate_exact")]
    gate_exact: bool,
    #[arg(long, overrides_with = "gate_exact")]
    no_gate_exact: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solution file: the input echoed with a `region` field per area.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    grid: String,
    #[arg(long, default_value = "uniform:0,100")]
    dist: AttrDist,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `.csv` writes an area table plus `<stem>.edges.csv`; anything else GeoJSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "50,100,500,1000,5000")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10,12")]
    ps: Vec<usize>,
    /// Region count for the size sweep.
    #[arg(long, default_value_t = 10)]
    p: usize,
    /// Dataset size for the p sweep.
    #[arg(long, default_value_t = 50)]
    p_size: usize,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV; figure tables are written next to it.
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
    /// Per-iteration metrics of the model-based runs.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Seeds,
    Moves,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, value_enum)]
    stage: Stage,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    p: usize,
    /// Threshold for the seeds model [default: the achieved threshold].
    #[arg(long)]
    dm: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// A flag combination clap cannot reject on its own.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

enum Source {
    File { path: PathBuf, format: DatasetFormat },
    Grid,
}

fn infer_format(path: &Path) -> DatasetFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
        _ => DatasetFormat::Geojson,
    }
}

fn load_instance(args: &InstanceArgs, seed: u64) -> Result<(AreaGraph, Source)> {
    match (&args.input, &args.grid) {
        (Some(path), None) => {
            let format = args.format.unwrap_or_else(|| infer_format(path));
            let opts = LoadOptions {
                attribute: args.attr.clone(),
                contiguity: args.contiguity,
                edges: args.edges.clone(),
            };
            let g = load_dataset(path, format, &opts)?;
            Ok((g, Source::File { path: path.clone(), format }))
        }
        (None, Some(spec)) => {
            let (rows, cols) = parse_grid_spec(spec)?;
            Ok((generate_grid(rows, cols, seed, args.dist)?, Source::Grid))
        }
        _ => Err(usage("exactly one of --input or --grid is required")),
    }
}

#[derive(Serialize)]
struct Summary {
    p: usize,
    n: usize,
    initial_h: f64,
    final_h: f64,
    achieved_dm: f64,
    min_seed_distance: Option<f64>,
    seeds: Vec<String>,
    iterations_applied: usize,
    moves_applied: usize,
    enclaves: usize,
}

fn regionalize(args: RegionalizeArgs) -> Result<()> {
    let (g, source) = load_instance(&args.instance, args.seed)?;
    let (n, p) = (g.n(), args.p);
    let mut metrics = Vec::new();

    let clock = Instant::now();
    let seeds = select_seeds(&g, &args.solver.seeding(p, args.seed))?;
    metrics.push(stage_row("seeding", n, p, None, clock));
    let achieved_dm = seeds.achieved_dm;
    let min_seed_distance = seeds.min_seed_distance;

    let clock = Instant::now();
    let init = initial_solution_from_seeds(&g, seeds)?;
    init.partition.validate(&g)?;
    let h0 = init.partition.heterogeneity();
    metrics.push(stage_row("init", n, p, Some(h0), clock));

    let cfg = OptimizeConfig {
        iterations: args.iterations,
        sampler: args.solver.sampler(),
        gate_exact: !args.no_gate_exact,
        penalty: args.solver.penalty,
        rng_seed: args.seed,
    };
    let (part, reports) = optimize(&g, init.partition.clone(), &cfg)?;
    let (lo, hi) = separator_band(n, p);
    for r in &reports {
        if !r.noop {
            log::info!(
                "iteration {}: {} candidates (band {:.1}..{:.1}), {} applied, H {:.6} -> {:.6}",
                r.iteration,
                r.candidates,
                lo,
                hi,
                r.applied,
                r.h_before,
                r.h_after
            );
        }
        metrics.push(MetricsRow::from_iteration(n, p, r));
    }

    let summary = Summary {
        p,
        n,
        initial_h: h0,
        final_h: part.heterogeneity(),
        achieved_dm,
        min_seed_distance,
        seeds: init.seeds.seeds.iter().map(|&s| g.area(s).label.clone()).collect(),
        iterations_applied: reports.iter().filter(|r| r.applied > 0).count(),
        moves_applied: reports.iter().map(|r| r.applied).sum(),
        enclaves: init.enclaves.len(),
    };
    if let Some(out) = &args.out {
        write_solution(&g, &part, &source, &summary, out)?;
    }
    if let Some(path) = &args.metrics {
        write_metrics(path, &metrics)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn stage_row(stage: &str, size: usize, p: usize, h: Option<f64>, clock: Instant) -> MetricsRow {
    MetricsRow {
        stage: stage.into(),
        size,
        p,
        iteration: None,
        h_before: None,
        h_after: h,
        candidates: None,
        selected: None,
        runtime_ms: clock.elapsed().as_secs_f64() * 1e3,
    }
}

fn write_solution(g: &AreaGraph, part: &Partition, source: &Source, summary: &Summary, out: &Path) -> Result<()> {
    let region = |i: usize| part.region_of(i).0 + 1;
    match source {
        Source::File { path, format: DatasetFormat::Csv } => {
            let mut rd = csv::Reader::from_path(path).with_context(|| format!("re-reading {}", path.display()))?;
            let mut w = csv::Writer::from_path(out)?;
            let mut header = rd.headers()?.clone();
            header.push_field("region");
            w.write_record(&header)?;
            for (i, rec) in rd.records().enumerate() {
                let mut rec = rec?;
                rec.push_field(&region(i).to_string());
                w.write_record(&rec)?;
            }
            w.flush()?;
            let sidecar = out.with_extension("summary.json");
            fs::write(&sidecar, serde_json::to_string_pretty(summary)?)
                .with_context(|| format!("writing {}", sidecar.display()))?;
        }
        _ => {
            let mut fc = match source {
                Source::File { path, .. } => {
                    let text = fs::read_to_string(path).with_context(|| format!("re-reading {}", path.display()))?;
                    match text.parse::<GeoJson>()? {
                        GeoJson::FeatureCollection(fc) => fc,
                        GeoJson::Feature(f) => FeatureCollection { bbox: None, features: vec![f], foreign_members: None },
                        GeoJson::Geometry(_) => anyhow::bail!("expected a FeatureCollection"),
                    }
                }
                Source::Grid => grid_feature_collection(g),
            };
            for (i, f) in fc.features.iter_mut().enumerate() {
                f.set_property("region", region(i));
            }
            let mut extra = fc.foreign_members.take().unwrap_or_default();
            extra.insert("summary".into(), serde_json::to_value(summary)?);
            fc.foreign_members = Some(extra);
            fs::write(out, GeoJson::from(fc).to_string()).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let (rows, cols) = parse_grid_spec(&args.grid)?;
    let g = generate_grid(rows, cols, args.seed, args.dist)?;
    if infer_format(&args.out) == DatasetFormat::Csv {
        let edges = companion_edges_path(&args.out);
        write_csv_dataset(&g, &args.out, &edges)?;
        println!("wrote {} and {}", args.out.display(), edges.display());
    } else {
        let fc = grid_feature_collection(&g);
        fs::write(&args.out, GeoJson::from(fc).to_string()).with_context(|| format!("writing {}", args.out.display()))?;
        println!("wrote {}", args.out.display());
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        sizes: args.sizes,
        p: args.p,
        ps: args.ps,
        p_sweep_size: args.p_size,
        iterations: args.iterations,
        repeats: args.repeats,
        rng_seed: args.seed,
        ..BenchConfig::default()
    };
    let report = run_benchmark(&cfg)?;
    report.write_csv(&args.out)?;
    let dir = match args.out.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tables = emit_plot_data(&report, &dir)?;
    if let Some(path) = &args.metrics {
        let rows: Vec<MetricsRow> = report
            .traces
            .iter()
            .flat_map(|(&(size, p), trace)| trace.iter().map(move |r| MetricsRow::from_iteration(size, p, r)))
            .collect();
        write_metrics(path, &rows)?;
    }

    println!("{:>6} {:>4} {:>9} {:>12} {:>12} {:>10} {:>10}", "size", "p", "method", "h_final", "opt_ms", "quality%", "runtime%");
    for r in &report.rows {
        let pct = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
        println!(
            "{:>6} {:>4} {:>9} {:>12.3} {:>12.2} {:>10} {:>10}",
            r.size,
            r.p,
            format!("{:?}", r.method).to_lowercase(),
            r.h_final,
            r.opt_ms,
            pct(r.quality_improvement_pct),
            pct(r.runtime_improvement_pct)
        );
    }
    println!("(baseline = single-best-move greedy emulation)");
    println!("report: {}", args.out.display());
    for t in tables {
        println!("table: {}", t.display());
    }
    Ok(())
}

fn export(args: ExportArgs) -> Result<()> {
    let (g, _) = load_instance(&args.instance, args.seed)?;
    let seeding = args.solver.seeding(args.p, args.seed);
    match args.stage {
        Stage::Seeds => {
            let dm = match args.dm {
                Some(d) => d,
                None => select_seeds(&g, &seeding)?.achieved_dm,
            };
            let candidates: Vec<usize> = (0..g.n()).collect();
            let edges = build_threshold_graph(&g, &candidates, dm);
            let bqm = mis_bqm(&edges, &candidates, args.solver.lambda);
            export_model(&bqm, &args.out)?;
            println!("wrote seeds model at d_m = {dm} ({} variables) to {}", bqm.num_variables(), args.out.display());
        }
        Stage::Moves => {
            let seeds = select_seeds(&g, &seeding)?;
            let init = initial_solution_from_seeds(&g, seeds)?;
            let candidates = movable_areas(&g, &init.partition)?;
            let cqm = build_move_cqm(&candidates, args.p)?;
            export_model(&cqm, &args.out)?;
            println!("wrote moves model ({} variables) to {}", candidates.len(), args.out.display());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<qregion_core::Error>() {
        Some(qregion_core::Error::Invariant(_) | qregion_core::Error::ConstraintViolation(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Regionalize(a) => regionalize(a),
        Command::Generate(a) => generate(a),
        Command::Bench(a) => bench(a),
        Command::ExportModel(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
