//! Result tables: one row per test evaluation plus rejection-rate summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Simulation cell of a type-I error or power experiment.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct Cell {
    pub tau: f64,
    pub n: usize,
    pub causal_fraction: f64,
    pub effect_c: f64,
    pub sign: &'static str,
    pub maf_low: f64,
    pub maf_high: f64,
}

impl Cell {
    fn key(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.tau, self.n, self.causal_fraction, self.effect_c, self.sign, self.maf_low, self.maf_high
        )
    }
}

const CELL_HEADER: &str = "tau\tn\tcausal_fraction\teffect_c\tsign\tmaf_low\tmaf_high";
const CELL_NA: &str = "NA\tNA\tNA\tNA\tNA\tNA\tNA";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub cell: Option<Cell>,
    /// Region name, or `g<set>/r<replicate>` for simulated replicates.
    pub unit: String,
    pub method: String,
    pub n_basis: usize,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub converged: bool,
    pub singular: bool,
    pub wall_ms: f64,
    /// Failure description; empty on success.
    pub note: String,
}

impl ResultRow {
    pub fn failed(cell: Option<Cell>, unit: String, method: &str, n_basis: usize, note: String, wall_ms: f64) -> Self {
        Self {
            cell,
            unit,
            method: method.to_string(),
            n_basis,
            statistic: f64::NAN,
            df: n_basis,
            p_value: f64::NAN,
            converged: false,
            singular: false,
            wall_ms,
            note,
        }
    }

    fn sort_key(&self) -> (String, String, usize, String) {
        (
            self.cell.as_ref().map_or_else(String::new, Cell::key),
            self.method.clone(),
            self.n_basis,
            self.unit.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: Option<Cell>,
    pub method: String,
    pub n_basis: usize,
    pub alpha: f64,
    pub rejections: usize,
    /// Converged replicates entering the rate.
    pub replicates: usize,
    pub excluded: usize,
    pub rate: f64,
    pub mc_se: f64,
}

/// `sqrt(r (1 - r) / R)`.
pub fn mc_standard_error(rate: f64, replicates: usize) -> f64 {
    if replicates == 0 {
        f64::NAN
    } else {
        (rate * (1.0 - rate) / replicates as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x}")
    }
}

impl RunReport {
    /// Sorts rows and computes rejection rates at each level per
    /// `(cell, method, n_basis)` group.
    pub fn new(command: &str, config_hash: String, seed: u64, mut rows: Vec<ResultRow>, alphas: &[f64]) -> Self {
        rows.sort_by_key(|a| a.sort_key());
        let mut groups: BTreeMap<(String, String, usize), Vec<&ResultRow>> = BTreeMap::new();
        for r in &rows {
            let (cell, method, nb, _) = r.sort_key();
            groups.entry((cell, method, nb)).or_default().push(r);
        }
        let mut summary = Vec::new();
        for members in groups.values() {
            let first = members[0];
            let ok: Vec<f64> = members.iter().filter(|r| r.converged).map(|r| r.p_value).collect();
            for &alpha in alphas {
                let rejections = ok.iter().filter(|&&p| p < alpha).count();
                let rate = if ok.is_empty() { f64::NAN } else { rejections as f64 / ok.len() as f64 };
                summary.push(SummaryRow {
                    cell: first.cell.clone(),
                    method: first.method.clone(),
                    n_basis: first.n_basis,
                    alpha,
                    rejections,
                    replicates: ok.len(),
                    excluded: members.len() - ok.len(),
                    rate,
                    mc_se: mc_standard_error(rate, ok.len()),
                });
            }
        }
        Self {
            command: command.to_string(),
            config_hash,
            seed,
            rows,
            summary,
        }
    }

    pub fn rate(&self, cell: impl Fn(&Cell) -> bool, method: &str, alpha: f64) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.alpha == alpha && s.cell.as_ref().is_some_and(&cell))
    }

    /// Fails when any method's non-convergent fraction in any group exceeds `max`.
    pub fn check_convergence(&self, max: f64) -> Result<()> {
        for s in &self.summary {
            let total = s.replicates + s.excluded;
            if total > 0 && s.excluded as f64 > max * total as f64 {
                bail!(
                    "{} of {} replicates failed for {} ({}); limit is {:.1}%",
                    s.excluded,
                    total,
                    s.method,
                    s.cell.as_ref().map_or_else(|| "all".into(), Cell::key).replace('\t', " "),
                    100.0 * max
                );
            }
        }
        Ok(())
    }

    pub fn rows_tsv(&self) -> String {
        let mut out = format!(
            "config_hash\tseed\t{CELL_HEADER}\tunit\tmethod\tn_basis\tstatistic\tdf\tp_value\tconverged\tsingular\twall_ms\tnote\n"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}\t{}",
                self.config_hash,
                self.seed,
                r.cell.as_ref().map_or_else(|| CELL_NA.into(), Cell::key),
                r.unit,
                r.method,
                r.n_basis,
                num(r.statistic),
                r.df,
                num(r.p_value),
                r.converged,
                r.singular,
                r.wall_ms,
                if r.note.is_empty() { "-".into() } else { r.note.replace(['\t', '\n'], " ") },
            );
        }
        out
    }

    pub fn summary_tsv(&self) -> String {
        let mut out = format!(
            "config_hash\tseed\t{CELL_HEADER}\tmethod\tn_basis\talpha\trejections\treplicates\texcluded\trate\tmc_se\n"
        );
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                self.config_hash,
                self.seed,
                s.cell.as_ref().map_or_else(|| CELL_NA.into(), Cell::key),
                s.method,
                s.n_basis,
                s.alpha,
                s.rejections,
                s.replicates,
                s.excluded,
                num(s.rate),
                num(s.mc_se),
            );
        }
        out
    }

    /// Writes `<command>_rows.tsv` and `<command>_summary.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let rows = dir.join(format!("{}_rows.tsv", self.command));
        let summary = dir.join(format!("{}_summary.tsv", self.command));
        fs::write(&rows, self.rows_tsv()).with_context(|| format!("writing {}", rows.display()))?;
        fs::write(&summary, self.summary_tsv()).with_context(|| format!("writing {}", summary.display()))?;
        Ok((rows, summary))
    }
}
