//! The `simulate`, `test`, `type1` and `power` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;

use copflm_core::inference::{
    fit_unrestricted_from, lrt_from_fits, score_test, score_test_with_fit, OptimizerConfig, SurvivalData,
};
use copflm_core::simgen::{Scenario, SimConfig};
use copflm_core::{build_design, eval_basis, CopulaKind, FitResult, ModelSpec, SubjectRecord, TestResult};

use crate::config::{RunConfig, SignName};
use crate::io::{load_dataset, write_dataset, Dataset, RegionSpec, Variant};
use crate::report::{Cell, ResultRow, RunReport};

pub const COP_SCORE: &str = "Cop-Score";
pub const COP_LRT: &str = "Cop-LRT";
pub const IND_SCORE: &str = "Ind-Score";
pub const UNI_SCORE: &str = "Uni-Score";

/// Runs `f` inside a pool of `threads` workers (0 = all cores).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the worker pool")?;
    Ok(pool.install(f))
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn row_from(cell: &Option<Cell>, unit: &str, method: &str, n_basis: usize, test: TestResult, ms: f64) -> ResultRow {
    ResultRow {
        cell: cell.clone(),
        unit: unit.to_string(),
        method: method.to_string(),
        n_basis,
        statistic: test.statistic,
        df: test.df,
        p_value: test.p_value,
        converged: true,
        singular: test.singular,
        wall_ms: ms,
        note: String::new(),
    }
}

fn row_or_failure(
    result: copflm_core::Result<TestResult>,
    cell: &Option<Cell>,
    unit: &str,
    method: &str,
    n_basis: usize,
    start: Instant,
) -> ResultRow {
    match result {
        Ok(t) => row_from(cell, unit, method, n_basis, t, elapsed_ms(start)),
        Err(e) => ResultRow::failed(cell.clone(), unit.to_string(), method, n_basis, e.to_string(), elapsed_ms(start)),
    }
}

/// Which tests to run on one dataset.
#[derive(Debug, Clone, Copy)]
pub struct Methods {
    pub lrt: bool,
    pub independence: bool,
    pub univariate: bool,
}

/// Cop-Score and optionally Cop-LRT, Ind-Score and Uni-Score on one dataset.
/// Also returns the unrestricted fit when one was computed.
pub fn evaluate(
    spec: &ModelSpec,
    data: &SurvivalData,
    opt: &OptimizerConfig,
    methods: Methods,
    cell: &Option<Cell>,
    unit: &str,
) -> (Vec<ResultRow>, Option<FitResult>) {
    let nb = spec.n_gamma();
    let mut rows = Vec::new();
    let mut full_fit = None;

    let start = Instant::now();
    match score_test_with_fit(spec, data, opt) {
        Ok((score, null)) => {
            rows.push(row_from(cell, unit, COP_SCORE, nb, score, elapsed_ms(start)));
            if methods.lrt {
                let start = Instant::now();
                let lrt = fit_unrestricted_from(&null, spec, data, opt).and_then(|full| {
                    let t = lrt_from_fits(&null, &full, nb);
                    full_fit = Some(full);
                    t
                });
                rows.push(row_or_failure(lrt, cell, unit, COP_LRT, nb, start));
            }
        }
        Err(e) => {
            let note = e.to_string();
            rows.push(ResultRow::failed(cell.clone(), unit.into(), COP_SCORE, nb, note.clone(), elapsed_ms(start)));
            if methods.lrt {
                rows.push(ResultRow::failed(cell.clone(), unit.into(), COP_LRT, nb, note, 0.0));
            }
        }
    }
    if methods.independence {
        let start = Instant::now();
        let t = score_test(&spec.with_copula(CopulaKind::Independence), data, opt);
        rows.push(row_or_failure(t, cell, unit, IND_SCORE, nb, start));
    }
    if methods.univariate {
        let start = Instant::now();
        let t = ModelSpec::single_margin(spec.flm_mode).and_then(|uni| score_test(&uni, data, opt));
        rows.push(row_or_failure(t, cell, unit, UNI_SCORE, nb, start));
    }
    (rows, full_fit)
}

/// `psi(u)' gamma` on `points` equally spaced positions in `[0, 1]`.
pub fn gamma_curve(spec: &ModelSpec, gamma: &[f64], points: usize) -> copflm_core::Result<Vec<(f64, f64)>> {
    let grid: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let psi = eval_basis(&spec.flm_mode.gef_basis(), &grid)?.values;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, (0..gamma.len()).map(|b| psi[(i, b)] * gamma[b]).sum()))
        .collect())
}

fn dataset_for(records: &[SubjectRecord], region: &copflm_core::GeneRegion, spec: &ModelSpec) -> copflm_core::Result<SurvivalData> {
    let design = build_design(records, region, spec)?;
    SurvivalData::new(records, &design)
}

// ---------------------------------------------------------------- simulate

/// Paths written by [`run_simulate`].
#[derive(Debug, Clone)]
pub struct SimulatedFiles {
    pub phenotype: PathBuf,
    pub genotype: PathBuf,
    pub regions: PathBuf,
}

/// Spacing between simulated regions on the chromosome.
const REGION_SPACING: u64 = 1_000_000;

/// Writes a dataset with `genotype_sets` regions on chromosome 1. Phenotypes
/// come from region 0 (which carries the genetic effect when
/// `causal_fraction > 0`); the other regions are null.
pub fn run_simulate(cfg: &RunConfig) -> Result<SimulatedFiles> {
    cfg.validate()?;
    let tau = cfg.simulation.taus[0];
    let sim = cfg.sim_config(tau);
    let scenarios = with_pool(cfg.threads, || {
        (0..cfg.simulation.genotype_sets as u64)
            .into_par_iter()
            .map(|g| Scenario::new(&sim, g))
            .collect::<copflm_core::Result<Vec<_>>>()
    })??;
    let base = scenarios[0].replicate(&sim, cfg.simulation.replicate)?;

    let mut variants = Vec::new();
    let mut regions = Vec::new();
    for (g, sc) in scenarios.iter().enumerate() {
        let offset = g as u64 * REGION_SPACING;
        for (j, &pos) in sc.genotypes.region.positions.iter().enumerate() {
            variants.push(Variant {
                chr: "1".into(),
                pos: offset + pos as u64,
                id: format!("sim{g}_{j}"),
            });
        }
        regions.push(RegionSpec {
            name: format!("sim{g}"),
            chr: "1".into(),
            start: offset + 1,
            end: offset + sim.region_length,
        });
    }
    let records: Vec<SubjectRecord> = base
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.genotypes = scenarios
                .iter()
                .flat_map(|sc| sc.genotypes.dosages[i].iter().map(|&d| Some(d)))
                .collect();
            r
        })
        .collect();

    let files = SimulatedFiles {
        phenotype: cfg.out.join("phenotype.tsv"),
        genotype: cfg.out.join("genotype.tsv"),
        regions: cfg.out.join("regions.tsv"),
    };
    write_dataset(&records, &variants, &regions, &files.phenotype, &files.genotype, &files.regions)
        .with_context(|| format!("writing dataset into {}", cfg.out.display()))?;
    let mut truth = String::from("region\tvariant\tmaf\teffect\n");
    for (g, sc) in scenarios.iter().enumerate() {
        for j in 0..sc.genotypes.mafs.len() {
            let effect = if g == 0 { sc.effects[j] } else { 0.0 };
            let _ = writeln!(truth, "sim{g}\tsim{g}_{j}\t{}\t{effect}", sc.genotypes.mafs[j]);
        }
    }
    fs::write(cfg.out.join("truth.tsv"), truth)?;
    info!(
        "simulated {} subjects over {} regions into {}",
        records.len(),
        regions.len(),
        cfg.out.display()
    );
    Ok(files)
}

// -------------------------------------------------------------------- test

fn write_curve(dir: &Path, region: &str, n_basis: usize, curve: &[(f64, f64)]) -> Result<()> {
    let mut text = String::from("u\tgamma\n");
    for (u, g) in curve {
        let _ = writeln!(text, "{u}\t{g}");
    }
    let path = dir.join(format!("gamma_curve_{region}_B{n_basis}.tsv"));
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Tests every region of the configured dataset at each effect basis size.
pub fn run_test(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let (p, g, r) = cfg.data_paths()?;
    let ds = load_dataset(p, g, r, cfg.data.window)?;
    run_test_on(cfg, &ds)
}

pub fn run_test_on(cfg: &RunConfig, ds: &Dataset) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let opt = cfg.optimizer();
    let methods = Methods {
        lrt: cfg.test.lrt,
        independence: false,
        univariate: false,
    };
    let mut jobs = Vec::new();
    for (index, region) in ds.regions.iter().enumerate() {
        if region.columns.len() < cfg.data.min_variants {
            warn!(
                "skipping region {}: {} variants, minimum {}",
                region.spec.name,
                region.columns.len(),
                cfg.data.min_variants
            );
            continue;
        }
        for &nb in &cfg.model.n_basis {
            jobs.push((index, nb));
        }
    }
    let results = with_pool(cfg.threads, || {
        jobs.par_iter()
            .map(|&(index, nb)| {
                let name = ds.regions[index].spec.name.clone();
                let start = Instant::now();
                let outcome = cfg.model_spec(nb).map_err(|e| e.to_string()).and_then(|spec| {
                    let records = ds.region_records(index);
                    let data = dataset_for(&records, &ds.regions[index].region, &spec).map_err(|e| e.to_string())?;
                    let (rows, full) = evaluate(&spec, &data, &opt, methods, &None, &name);
                    let curve = match full {
                        Some(fit) => Some(
                            gamma_curve(&spec, &fit.params.gamma, cfg.test.gamma_curve_points)
                                .map_err(|e| e.to_string())?,
                        ),
                        None => None,
                    };
                    Ok((rows, curve))
                });
                match outcome {
                    Ok((rows, curve)) => (rows, curve.map(|c| (name, nb, c))),
                    Err(note) => (
                        vec![ResultRow::failed(None, name, COP_SCORE, nb, note, elapsed_ms(start))],
                        None,
                    ),
                }
            })
            .collect::<Vec<_>>()
    })?;
    let mut rows = Vec::new();
    for (r, curve) in results {
        rows.extend(r);
        if let Some((name, nb, c)) = curve {
            write_curve(&cfg.out, &name, nb, &c)?;
        }
    }
    Ok(RunReport::new("test", cfg.hash(), cfg.seed, rows, &cfg.test.alpha_levels))
}

// ----------------------------------------------------------- type1 / power

struct Experiment {
    cell: Cell,
    sim: SimConfig,
}

fn cell_for(sim: &SimConfig, sign: SignName) -> Cell {
    Cell {
        tau: sim.tau,
        n: sim.n,
        causal_fraction: sim.causal_fraction,
        effect_c: sim.effect_c,
        sign: sign.label(),
        maf_low: sim.maf_range.0,
        maf_high: sim.maf_range.1,
    }
}

/// Runs every `(cell, genotype set, replicate)` of the experiments.
fn run_replicates(cfg: &RunConfig, experiments: &[Experiment], methods: Methods) -> Result<Vec<ResultRow>> {
    let opt = cfg.optimizer();
    let sets = cfg.simulation.genotype_sets as u64;
    let reps = cfg.simulation.phenotype_sets as u64;
    let specs = cfg
        .model
        .n_basis
        .iter()
        .map(|&nb| cfg.model_spec(nb))
        .collect::<Result<Vec<_>>>()?;
    with_pool(cfg.threads, || -> Result<Vec<ResultRow>> {
        let scenario_jobs: Vec<(usize, u64)> =
            (0..experiments.len()).flat_map(|e| (0..sets).map(move |g| (e, g))).collect();
        let scenarios = scenario_jobs
            .par_iter()
            .map(|&(e, g)| Scenario::new(&experiments[e].sim, g))
            .collect::<copflm_core::Result<Vec<_>>>()?;
        let jobs: Vec<(usize, u64)> = (0..scenarios.len()).flat_map(|s| (0..reps).map(move |r| (s, r))).collect();
        let rows = jobs
            .par_iter()
            .flat_map_iter(|&(s, r)| {
                let (e, g) = scenario_jobs[s];
                let exp = &experiments[e];
                let cell = Some(exp.cell.clone());
                let unit = format!("g{g}/r{r}");
                let mut rows = Vec::new();
                let records = match scenarios[s].replicate(&exp.sim, r) {
                    Ok(rec) => rec,
                    Err(err) => {
                        for spec in &specs {
                            rows.push(ResultRow::failed(cell.clone(), unit.clone(), COP_SCORE, spec.n_gamma(), err.to_string(), 0.0));
                        }
                        return rows;
                    }
                };
                for spec in &specs {
                    match dataset_for(&records, &scenarios[s].genotypes.region, spec) {
                        Ok(data) => rows.extend(evaluate(spec, &data, &opt, methods, &cell, &unit).0),
                        Err(err) => rows.push(ResultRow::failed(
                            cell.clone(),
                            unit.clone(),
                            COP_SCORE,
                            spec.n_gamma(),
                            err.to_string(),
                            0.0,
                        )),
                    }
                }
                rows
            })
            .collect();
        Ok(rows)
    })?
}

/// Null replicates at each configured tau: `genotype_sets x phenotype_sets`
/// datasets with no genetic or covariate effect.
pub fn run_type1(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let experiments: Vec<Experiment> = cfg
        .simulation
        .taus
        .iter()
        .map(|&tau| {
            let mut sim = cfg.sim_config(tau);
            sim.causal_fraction = 0.0;
            sim.effect_c = 0.0;
            sim.beta = 0.0;
            Experiment {
                cell: cell_for(&sim, cfg.simulation.sign_pattern),
                sim,
            }
        })
        .collect();
    let methods = Methods {
        lrt: cfg.test.lrt,
        independence: cfg.test.independence_baseline,
        univariate: false,
    };
    let rows = run_replicates(cfg, &experiments, methods)?;
    Ok(RunReport::new("type1", cfg.hash(), cfg.seed, rows, &cfg.test.alpha_levels))
}

/// Rejection rates over every `(tau, effect, sign pattern, n)` cell.
pub fn run_power(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let ns = if cfg.power.ns.is_empty() {
        vec![cfg.simulation.n]
    } else {
        cfg.power.ns.clone()
    };
    let mut experiments = Vec::new();
    for &tau in &cfg.simulation.taus {
        for effect in &cfg.power.effects {
            for &sign in &cfg.power.sign_patterns {
                for &n in &ns {
                    let mut sim = cfg.sim_config(tau);
                    sim.n = n;
                    sim.causal_fraction = effect.causal_fraction;
                    sim.effect_c = effect.effect_c;
                    sim.sign_pattern = sign.into();
                    sim.validate()?;
                    sim.n_causal()?;
                    experiments.push(Experiment {
                        cell: cell_for(&sim, sign),
                        sim,
                    });
                }
            }
        }
    }
    let methods = Methods {
        lrt: cfg.test.lrt,
        independence: false,
        univariate: cfg.power.univariate,
    };
    let rows = run_replicates(cfg, &experiments, methods)?;
    Ok(RunReport::new("power", cfg.hash(), cfg.seed, rows, &cfg.test.alpha_levels))
}
