//! Paired benchmark harness: the model-based pipeline against the classical
//! baseline over dataset-size and region-count sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::classical_baseline;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::init::initial_solution_from_seeds;
use crate::localopt::{optimize, IterationReport, OptimizeConfig};
use crate::model::{SaParams, Sampler};
use crate::seeding::{farthest_point_seeds, min_pairwise_distance, select_seeds, SeedingConfig};
use crate::spatial::grid::grid_shape_for;
use crate::spatial::{generate_grid, AttrDist};

/// `(classic − quantum) / classic × 100`. Positive means the model-based
/// side is lower (better, for times and heterogeneity).
pub fn improvement_pct(classic: f64, quantum: f64) -> Result<f64> {
    if classic == 0.0 {
        return Err(Error::InvalidInput("improvement_pct: classic value is zero".into()));
    }
    Ok((classic - quantum) / classic * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    /// Region count used across the size sweep.
    pub p: usize,
    pub ps: Vec<usize>,
    /// Dataset size used across the p sweep.
    pub p_sweep_size: usize,
    pub iterations: usize,
    pub repeats: usize,
    pub rng_seed: u64,
    pub dist: AttrDist,
    pub seed_sampler: Sampler,
    pub seed_candidate_limit: Option<usize>,
    pub opt_sampler: Sampler,
    pub gate_exact: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50, 100, 500, 1000, 5000],
            p: 10,
            ps: vec![2, 4, 6, 8, 10, 12],
            p_sweep_size: 50,
            iterations: 10,
            repeats: 1,
            rng_seed: 0,
            dist: AttrDist::default(),
            seed_sampler: Sampler::sa(SaParams { reads: 20, sweeps: 500, ..SaParams::default() }),
            seed_candidate_limit: Some(200),
            opt_sampler: Sampler {
                kind: crate::model::SamplerKind::Exhaustive,
                sa: SaParams { reads: 20, sweeps: 300, ..SaParams::default() },
            },
            gate_exact: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Cqm,
}

/// One line of the bench report. Serialized field order is the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub p: usize,
    pub method: Method,
    pub seed_min_dist: Option<f64>,
    pub h_initial: f64,
    pub h_final: f64,
    pub seed_ms: f64,
    pub init_ms: f64,
    pub opt_ms: f64,
    pub quality_improvement_pct: Option<f64>,
    pub runtime_improvement_pct: Option<f64>,
    #[serde(skip)]
    pub in_size_sweep: bool,
    #[serde(skip)]
    pub in_p_sweep: bool,
}

pub const BENCH_HEADER: &str = "size,p,method,seed_min_dist,h_initial,h_final,seed_ms,init_ms,opt_ms,quality_improvement_pct,runtime_improvement_pct";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Per-iteration traces of the model-based optimizer, keyed by `(size, p)`.
    #[serde(skip)]
    pub traces: BTreeMap<(usize, usize), Vec<IterationReport>>,
}

impl BenchReport {
    pub fn pair(&self, size: usize, p: usize) -> Option<(&BenchRow, &BenchRow)> {
        let find = |m: Method| self.rows.iter().find(|r| r.size == size && r.p == p && r.method == m);
        Some((find(Method::Baseline)?, find(Method::Cqm)?))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse("CSV writer", e))?;
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::parse("CSV writer", e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path).map_err(|e| Error::parse(path.display().to_string(), e))?;
        let rows = rd
            .deserialize()
            .collect::<std::result::Result<Vec<BenchRow>, _>>()
            .map_err(|e| Error::parse(path.display().to_string(), e))?;
        Ok(Self { rows, traces: BTreeMap::new() })
    }
}

#[derive(Debug, Default)]
struct Totals {
    seed_dist_q: f64,
    seed_dist_c: f64,
    has_dist: bool,
    seed_ms_q: f64,
    seed_ms_c: f64,
    init_ms: f64,
    h_initial: f64,
    h_final_q: f64,
    h_final_c: f64,
    opt_ms_q: f64,
    opt_ms_c: f64,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs every `(size, p)` cell of both sweeps. Within a cell both
/// optimizers start from the same initial partition; results are averaged
/// over `repeats` generated instances.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.sizes.is_empty() && cfg.ps.is_empty() {
        return Err(Error::InvalidInput("benchmark sweep is empty".into()));
    }
    if cfg.iterations == 0 || cfg.repeats == 0 {
        return Err(Error::InvalidInput("iterations and repeats must be at least 1".into()));
    }
    let mut cells: BTreeMap<(usize, usize), (bool, bool)> = BTreeMap::new();
    for &s in &cfg.sizes {
        cells.entry((s, cfg.p)).or_default().0 = true;
    }
    for &p in &cfg.ps {
        cells.entry((cfg.p_sweep_size, p)).or_default().1 = true;
    }

    let mut report = BenchReport::default();
    for (&(size, p), &(in_size, in_p)) in &cells {
        if p == 0 || p > size {
            return Err(Error::InvalidInput(format!("cell size={size}, p={p} is invalid")));
        }
        let mut t = Totals::default();
        let mut trace = Vec::new();
        for rep in 0..cfg.repeats {
            let seed = derive_seed(cfg.rng_seed, ((size as u64) << 32) ^ ((p as u64) << 16) ^ rep as u64);
            let (rows, cols) = grid_shape_for(size);
            let g = generate_grid(rows, cols, seed, cfg.dist)?;

            let seeding = SeedingConfig {
                candidate_limit: cfg.seed_candidate_limit,
                ..SeedingConfig::new(p, cfg.seed_sampler, seed)
            };
            let clock = Instant::now();
            let seeds = select_seeds(&g, &seeding)?;
            t.seed_ms_q += elapsed_ms(clock);

            let clock = Instant::now();
            let classic_seeds = farthest_point_seeds(&g, p, seed)?;
            t.seed_ms_c += elapsed_ms(clock);
            if let (Some(q), Some(c)) = (seeds.min_seed_distance, min_pairwise_distance(&g, &classic_seeds)) {
                t.seed_dist_q += q;
                t.seed_dist_c += c;
                t.has_dist = true;
            }

            let clock = Instant::now();
            let init = initial_solution_from_seeds(&g, seeds)?;
            t.init_ms += elapsed_ms(clock);
            init.partition.validate(&g)?;
            let start = init.partition;
            t.h_initial += start.heterogeneity();

            let opt_cfg = OptimizeConfig {
                iterations: cfg.iterations,
                sampler: cfg.opt_sampler,
                gate_exact: cfg.gate_exact,
                penalty: None,
                rng_seed: seed,
            };
            let clock = Instant::now();
            let (q_part, reports) = optimize(&g, start.clone(), &opt_cfg)?;
            t.opt_ms_q += elapsed_ms(clock);

            let clock = Instant::now();
            let (c_part, _) = classical_baseline(&g, start.clone(), cfg.iterations)?;
            t.opt_ms_c += elapsed_ms(clock);
            c_part.validate(&g)?;

            let (h0, hq, hc) = (start.heterogeneity(), q_part.heterogeneity(), c_part.heterogeneity());
            if hc > h0 || (cfg.gate_exact && hq > h0) {
                return Err(Error::Invariant(format!(
                    "heterogeneity increased in cell size={size}, p={p}: initial {h0}, cqm {hq}, baseline {hc}"
                )));
            }
            t.h_final_q += hq;
            t.h_final_c += hc;
            if rep == 0 {
                trace = reports;
            }
        }

        let k = cfg.repeats as f64;
        let avg = |x: f64| x / k;
        let (hq, hc) = (avg(t.h_final_q), avg(t.h_final_c));
        let (oq, oc) = (avg(t.opt_ms_q), avg(t.opt_ms_c));
        let dist = |x: f64| t.has_dist.then(|| avg(x));
        let base = BenchRow {
            size,
            p,
            method: Method::Baseline,
            seed_min_dist: dist(t.seed_dist_c),
            h_initial: avg(t.h_initial),
            h_final: hc,
            seed_ms: avg(t.seed_ms_c),
            init_ms: avg(t.init_ms),
            opt_ms: oc,
            quality_improvement_pct: None,
            runtime_improvement_pct: None,
            in_size_sweep: in_size,
            in_p_sweep: in_p,
        };
        let cqm = BenchRow {
            method: Method::Cqm,
            seed_min_dist: dist(t.seed_dist_q),
            h_final: hq,
            seed_ms: avg(t.seed_ms_q),
            opt_ms: oq,
            quality_improvement_pct: improvement_pct(hc, hq).ok(),
            runtime_improvement_pct: improvement_pct(oc, oq).ok(),
            ..base.clone()
        };
        log::info!(
            "size={size} p={p}: H {:.3} -> baseline {:.3} / cqm {:.3}; opt {:.1} ms vs {:.1} ms",
            base.h_initial,
            hc,
            hq,
            oc,
            oq
        );
        report.rows.push(base);
        report.rows.push(cqm);
        report.traces.insert((size, p), trace);
    }
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse("CSV writer", e))?;
    w.write_record(header).map_err(|e| Error::parse("CSV writer", e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::parse("CSV writer", e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Figure-style tables derived from a report:
///
/// * `improvements_vs_size.csv`: `size,quality_improvement_pct,runtime_improvement_pct`
/// * `runtime_vs_size.csv`: `size,baseline_opt_ms,cqm_opt_ms`
/// * `improvements_vs_p.csv`: `p,seed_quality_improvement_pct,seed_runtime_improvement_pct`
/// * `quality_vs_p.csv`: `p,baseline_seed_min_dist,cqm_seed_min_dist`
///
/// Seed quality is a larger-is-better distance, so its improvement is
/// `(cqm − baseline) / baseline × 100`.
pub fn emit_plot_data(report: &BenchReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        return Err(Error::InvalidInput("benchmark report has no rows".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pairs = |want: fn(&BenchRow) -> bool| -> Vec<(&BenchRow, &BenchRow)> {
        report
            .rows
            .iter()
            .filter(|r| r.method == Method::Cqm && want(r))
            .filter_map(|q| report.pair(q.size, q.p))
            .collect()
    };
    let by_size = pairs(|r| r.in_size_sweep);
    let by_p = pairs(|r| r.in_p_sweep);
    // reports read back from CSV carry no sweep tags; fall back to all rows
    let by_size = if by_size.is_empty() && by_p.is_empty() { pairs(|_| true) } else { by_size };

    let mut written = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        let path = out_dir.join(name);
        write_table(&path, header, rows)?;
        written.push(path);
        Ok(())
    };
    emit(
        "improvements_vs_size.csv",
        &["size", "quality_improvement_pct", "runtime_improvement_pct"],
        by_size
            .iter()
            .map(|(_, q)| vec![q.size.to_string(), fmt_opt(q.quality_improvement_pct), fmt_opt(q.runtime_improvement_pct)])
            .collect(),
    )?;
    emit(
        "runtime_vs_size.csv",
        &["size", "baseline_opt_ms", "cqm_opt_ms"],
        by_size
            .iter()
            .map(|(b, q)| vec![q.size.to_string(), b.opt_ms.to_string(), q.opt_ms.to_string()])
            .collect(),
    )?;
    emit(
        "improvements_vs_p.csv",
        &["p", "seed_quality_improvement_pct", "seed_runtime_improvement_pct"],
        by_p.iter()
            .map(|(b, q)| {
                let quality = match (b.seed_min_dist, q.seed_min_dist) {
                    (Some(c), Some(x)) => improvement_pct(c, x).ok().map(|v| -v),
                    _ => None,
                };
                vec![q.p.to_string(), fmt_opt(quality), fmt_opt(improvement_pct(b.seed_ms, q.seed_ms).ok())]
            })
            .collect(),
    )?;
    emit(
        "quality_vs_p.csv",
        &["p", "baseline_seed_min_dist", "cqm_seed_min_dist"],
        by_p.iter()
            .map(|(b, q)| vec![q.p.to_string(), fmt_opt(b.seed_min_dist), fmt_opt(q.seed_min_dist)])
            .collect(),
    )?;
    Ok(written)
}

/// One line of the metrics stream. Serialized field order is the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub stage: String,
    pub size: usize,
    pub p: usize,
    pub iteration: Option<usize>,
    pub h_before: Option<f64>,
    pub h_after: Option<f64>,
    pub candidates: Option<usize>,
    pub selected: Option<usize>,
    pub runtime_ms: f64,
}

pub const METRICS_HEADER: &str = "stage,size,p,iteration,h_before,h_after,candidates,selected,runtime_ms";

impl MetricsRow {
    pub fn from_iteration(size: usize, p: usize, r: &IterationReport) -> Self {
        Self {
            stage: "local_opt".into(),
            size,
            p,
            iteration: Some(r.iteration),
            h_before: Some(r.h_before),
            h_after: Some(r.h_after),
            candidates: Some(r.candidates),
            selected: Some(r.selected.len()),
            runtime_ms: r.runtime_ms,
        }
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse("CSV writer", e))?;
    if rows.is_empty() {
        w.write_record(METRICS_HEADER.split(',')).map_err(|e| Error::parse("CSV writer", e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse("CSV writer", e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvement_examples() {
        assert_eq!(improvement_pct(100.0, 50.0).unwrap(), 50.0);
        assert_eq!(improvement_pct(100.0, 291.0).unwrap(), -191.0);
        assert_eq!(improvement_pct(7.25, 7.25).unwrap(), 0.0);
        assert!(improvement_pct(0.0, 1.0).is_err());
    }

    fn small() -> BenchConfig {
        BenchConfig {
            sizes: vec![20, 30],
            p: 4,
            ps: vec![2, 3],
            p_sweep_size: 20,
            iterations: 3,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn paired_rows_and_tables() {
        let report = run_benchmark(&small()).unwrap();
        // cells: (20,2) (20,3) (20,4) (30,4)
        assert_eq!(report.rows.len(), 8);
        for pair in report.rows.chunks(2) {
            let (b, q) = (&pair[0], &pair[1]);
            assert_eq!((b.method, q.method), (Method::Baseline, Method::Cqm));
            assert_eq!(b.h_initial, q.h_initial);
            assert!(b.h_final <= b.h_initial && q.h_final <= q.h_initial);
            assert_eq!(q.quality_improvement_pct, improvement_pct(b.h_final, q.h_final).ok());
        }
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&report, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let sizes = fs::read_to_string(dir.path().join("improvements_vs_size.csv")).unwrap();
        assert_eq!(sizes.lines().count(), 1 + 2);
        let ps = fs::read_to_string(dir.path().join("quality_vs_p.csv")).unwrap();
        assert_eq!(ps.lines().next().unwrap(), "p,baseline_seed_min_dist,cqm_seed_min_dist");
        assert_eq!(ps.lines().count(), 1 + 2);

        let csv_path = dir.path().join("bench.csv");
        report.write_csv(&csv_path).unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().next().unwrap(), BENCH_HEADER);
        assert_eq!(BenchReport::read_csv(&csv_path).unwrap().rows.len(), 8);
    }

    #[test]
    fn deterministic_quality_columns() {
        let a = run_benchmark(&small()).unwrap();
        let b = run_benchmark(&small()).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!((x.h_initial, x.h_final, x.seed_min_dist), (y.h_initial, y.h_final, y.seed_min_dist));
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        let cfg = BenchConfig { sizes: vec![], ps: vec![], ..BenchConfig::default() };
        assert!(run_benchmark(&cfg).is_err());
        assert!(emit_plot_data(&BenchReport::default(), Path::new("/tmp")).is_err());
    }

    #[test]
    fn metrics_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics(&path, &[MetricsRow {
            stage: "seeding".into(),
            size: 50,
            p: 10,
            iteration: None,
            h_before: None,
            h_after: None,
            candidates: None,
            selected: None,
            runtime_ms: 1.5,
        }])
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
        assert_eq!(text.lines().nth(1).unwrap(), "seeding,50,10,,,,,,1.5");
    }
}
