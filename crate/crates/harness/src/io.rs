//! Phenotype, genotype and region files.
//!
//! All three are whitespace- or tab-delimited text with a header line:
//! phenotypes `id y1 d1 y2 d2 x1 ... xp`; genotypes `id` followed by one
//! `chr:pos:variant_id` column per variant with cells in `{0,1,2,NA}`;
//! regions `name chr start end`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use thiserror::Error;

use copflm_core::{Dosage, GeneRegion, SubjectRecord};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{file}: {source}")]
    Read {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {reason}")]
    Parse { file: String, line: usize, reason: String },
    #[error("genotype subjects missing from the phenotype file: {0}")]
    UnknownSubjects(String),
    #[error("phenotype subjects without genotypes: {0}")]
    MissingGenotypes(String),
    #[error("invalid record: {0}")]
    Record(#[from] copflm_core::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Variant {
    pub chr: String,
    pub pos: u64,
    pub id: String,
}

impl Variant {
    pub fn column_name(&self) -> String {
        format!("{}:{}:{}", self.chr, self.pos, self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSpec {
    pub name: String,
    pub chr: String,
    pub start: u64,
    pub end: u64,
}

/// A region with the dataset variants assigned to it.
#[derive(Debug, Clone)]
pub struct RegionData {
    pub spec: RegionSpec,
    pub region: GeneRegion,
    /// Indices into [`Dataset::variants`], in position order.
    pub columns: Vec<usize>,
    /// Observed minor-allele frequency of each assigned variant.
    pub mafs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Records carry every variant of the genotype file, in file order.
    pub records: Vec<SubjectRecord>,
    pub variants: Vec<Variant>,
    pub regions: Vec<RegionData>,
    /// Regions skipped at load time, with the reason.
    pub skipped: SkippedRegions,
}

impl Dataset {
    /// Records restricted to the variants of region `index`.
    pub fn region_records(&self, index: usize) -> Vec<SubjectRecord> {
        let cols = &self.regions[index].columns;
        self.records
            .iter()
            .map(|r| SubjectRecord {
                genotypes: cols.iter().map(|&c| r.genotypes[c]).collect(),
                ..r.clone()
            })
            .collect()
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        file: path.display().to_string(),
        source,
    })
}

/// Non-empty lines split on whitespace, with 1-based line numbers.
fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, f)| !f.is_empty())
}

struct Ctx<'a> {
    file: &'a str,
}

impl Ctx<'_> {
    fn err(&self, line: usize, reason: impl Into<String>) -> IoError {
        IoError::Parse {
            file: self.file.to_string(),
            line,
            reason: reason.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, line: usize, column: &str, s: &str) -> Result<T, IoError> {
        s.parse()
            .map_err(|_| self.err(line, format!("column {column}: cannot parse {s:?}")))
    }

    fn flag(&self, line: usize, column: &str, s: &str) -> Result<bool, IoError> {
        match s {
            "1" => Ok(true),
            "0" => Ok(false),
            _ => Err(self.err(line, format!("column {column}: event indicator {s:?} is not 0 or 1"))),
        }
    }
}

struct Phenotype {
    id: String,
    y: [(f64, bool); 2],
    covariates: Vec<f64>,
}

fn parse_phenotypes(text: &str, file: &str) -> Result<Vec<Phenotype>, IoError> {
    let ctx = Ctx { file };
    let mut it = rows(text);
    let (hl, header) = it.next().ok_or_else(|| ctx.err(1, "empty file"))?;
    if header.len() < 5 || header[..5] != ["id", "y1", "d1", "y2", "d2"] {
        return Err(ctx.err(hl, "header must start with `id y1 d1 y2 d2`"));
    }
    let p = header.len() - 5;
    let mut seen = HashSet::new();
    it.map(|(line, f)| {
        if f.len() != header.len() {
            return Err(ctx.err(line, format!("expected {} fields, found {}", header.len(), f.len())));
        }
        if !seen.insert(f[0].to_string()) {
            return Err(ctx.err(line, format!("duplicate subject id {}", f[0])));
        }
        let covariates = (0..p)
            .map(|j| ctx.num(line, header[5 + j], f[5 + j]))
            .collect::<Result<_, _>>()?;
        Ok(Phenotype {
            id: f[0].to_string(),
            y: [
                (ctx.num(line, "y1", f[1])?, ctx.flag(line, "d1", f[2])?),
                (ctx.num(line, "y2", f[3])?, ctx.flag(line, "d2", f[4])?),
            ],
            covariates,
        })
    })
    .collect()
}

fn parse_variant(ctx: &Ctx, line: usize, name: &str) -> Result<Variant, IoError> {
    let parts: Vec<&str> = name.splitn(3, ':').collect();
    if parts.len() != 3 || parts.iter().any(|s| s.is_empty()) {
        return Err(ctx.err(line, format!("variant column {name:?} is not chr:pos:variant_id")));
    }
    Ok(Variant {
        chr: parts[0].to_string(),
        pos: ctx.num(line, name, parts[1])?,
        id: parts[2].to_string(),
    })
}

type GenotypeRows = Vec<(String, Vec<Dosage>)>;

fn parse_genotypes(text: &str, file: &str) -> Result<(Vec<Variant>, GenotypeRows), IoError> {
    let ctx = Ctx { file };
    let mut it = rows(text);
    let (hl, header) = it.next().ok_or_else(|| ctx.err(1, "empty file"))?;
    if header.first() != Some(&"id") {
        return Err(ctx.err(hl, "header must start with `id`"));
    }
    let variants = header[1..]
        .iter()
        .map(|name| parse_variant(&ctx, hl, name))
        .collect::<Result<Vec<_>, _>>()?;
    let mut positions = HashSet::new();
    for v in &variants {
        if !positions.insert((v.chr.clone(), v.pos)) {
            return Err(ctx.err(hl, format!("duplicate variant position {}:{}", v.chr, v.pos)));
        }
    }
    let mut seen = HashSet::new();
    let rows = it
        .map(|(line, f)| {
            if f.len() != header.len() {
                return Err(ctx.err(line, format!("expected {} fields, found {}", header.len(), f.len())));
            }
            if !seen.insert(f[0].to_string()) {
                return Err(ctx.err(line, format!("duplicate subject id {}", f[0])));
            }
            let dosages = f[1..]
                .iter()
                .zip(&header[1..])
                .map(|(cell, column)| match *cell {
                    "NA" => Ok(None),
                    "0" => Ok(Some(0)),
                    "1" => Ok(Some(1)),
                    "2" => Ok(Some(2)),
                    other => Err(ctx.err(
                        line,
                        format!("subject {} column {column}: genotype {other:?} not in {{0,1,2,NA}}", f[0]),
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((f[0].to_string(), dosages))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((variants, rows))
}

fn parse_regions(text: &str, file: &str) -> Result<Vec<RegionSpec>, IoError> {
    let ctx = Ctx { file };
    let mut it = rows(text);
    let (hl, header) = it.next().ok_or_else(|| ctx.err(1, "empty file"))?;
    if header != ["name", "chr", "start", "end"] {
        return Err(ctx.err(hl, "header must be `name chr start end`"));
    }
    it.map(|(line, f)| {
        if f.len() != 4 {
            return Err(ctx.err(line, format!("expected 4 fields, found {}", f.len())));
        }
        let (start, end) = (ctx.num(line, "start", f[2])?, ctx.num(line, "end", f[3])?);
        if start > end {
            return Err(ctx.err(line, format!("start {start} after end {end}")));
        }
        Ok(RegionSpec {
            name: f[0].to_string(),
            chr: f[1].to_string(),
            start,
            end,
        })
    })
    .collect()
}

fn list_ids<'a>(ids: impl Iterator<Item = &'a String>) -> String {
    let mut v: Vec<&str> = ids.map(String::as_str).collect();
    v.sort_unstable();
    v.join(", ")
}

/// Regions skipped at assignment, as `(name, reason)`.
pub type SkippedRegions = Vec<(String, String)>;

/// Assigns variants to regions by position within `[start - window, end + window]`.
/// Regions with fewer than two variants are skipped with a warning.
pub fn assign_regions(
    specs: &[RegionSpec],
    variants: &[Variant],
    records: &[SubjectRecord],
    window: u64,
) -> Result<(Vec<RegionData>, SkippedRegions), IoError> {
    let mut regions = Vec::new();
    let mut skipped = Vec::new();
    for spec in specs {
        let lo = spec.start.saturating_sub(window);
        let hi = spec.end.saturating_add(window);
        let mut columns: Vec<usize> = (0..variants.len())
            .filter(|&j| variants[j].chr == spec.chr && (lo..=hi).contains(&variants[j].pos))
            .collect();
        columns.sort_by_key(|&j| variants[j].pos);
        if columns.len() < 2 {
            let reason = format!("{} variant(s) in range", columns.len());
            warn!("skipping region {}: {reason}", spec.name);
            skipped.push((spec.name.clone(), reason));
            continue;
        }
        let positions = columns.iter().map(|&j| variants[j].pos as f64).collect();
        let ids = columns.iter().map(|&j| variants[j].id.clone()).collect();
        let region = GeneRegion::new(spec.name.clone(), positions, ids)?;
        let mafs = columns
            .iter()
            .map(|&j| {
                let (sum, count) = records
                    .iter()
                    .filter_map(|r| r.genotypes[j])
                    .fold((0.0, 0.0), |(s, c), g| (s + f64::from(g), c + 1.0));
                let freq = if count > 0.0 { sum / (2.0 * count) } else { 0.0 };
                freq.min(1.0 - freq)
            })
            .collect();
        regions.push(RegionData {
            spec: spec.clone(),
            region,
            columns,
            mafs,
        });
    }
    Ok((regions, skipped))
}

/// Loads and joins the three files on subject id.
pub fn load_dataset(phenotype: &Path, genotype: &Path, regions: &Path, window: u64) -> Result<Dataset, IoError> {
    let phen = parse_phenotypes(&read(phenotype)?, &phenotype.display().to_string())?;
    let (variants, geno) = parse_genotypes(&read(genotype)?, &genotype.display().to_string())?;
    let specs = parse_regions(&read(regions)?, &regions.display().to_string())?;

    let phen_ids: HashSet<&String> = phen.iter().map(|p| &p.id).collect();
    let unknown: Vec<&String> = geno.iter().map(|(id, _)| id).filter(|id| !phen_ids.contains(id)).collect();
    if !unknown.is_empty() {
        return Err(IoError::UnknownSubjects(list_ids(unknown.into_iter())));
    }
    let mut by_id: HashMap<String, Vec<Dosage>> = geno.into_iter().collect();
    let missing: Vec<&String> = phen.iter().map(|p| &p.id).filter(|id| !by_id.contains_key(*id)).collect();
    if !missing.is_empty() {
        return Err(IoError::MissingGenotypes(list_ids(missing.into_iter())));
    }
    let records = phen
        .into_iter()
        .map(|p| {
            let genotypes = by_id.remove(&p.id).expect("joined above");
            SubjectRecord::new(p.id, p.y[0], p.y[1], p.covariates, genotypes)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (regions, skipped) = assign_regions(&specs, &variants, &records, window)?;
    Ok(Dataset {
        records,
        variants,
        regions,
        skipped,
    })
}

fn write(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)
}

/// Writes the three files; `load_dataset` reads them back exactly.
pub fn write_dataset(
    records: &[SubjectRecord],
    variants: &[Variant],
    regions: &[RegionSpec],
    phenotype: &Path,
    genotype: &Path,
    region_path: &Path,
) -> std::io::Result<()> {
    let p = records.first().map_or(0, |r| r.covariates.len());
    let mut ph = String::from("id\ty1\td1\ty2\td2");
    for j in 1..=p {
        let _ = write!(ph, "\tx{j}");
    }
    ph.push('\n');
    let mut ge = String::from("id");
    for v in variants {
        let _ = write!(ge, "\t{}", v.column_name());
    }
    ge.push('\n');
    for r in records {
        let _ = write!(ph, "{}\t{}\t{}\t{}\t{}", r.id, r.y1, u8::from(r.d1), r.y2, u8::from(r.d2));
        for x in &r.covariates {
            let _ = write!(ph, "\t{x}");
        }
        ph.push('\n');
        ge.push_str(&r.id);
        for g in &r.genotypes {
            match g {
                Some(d) => {
                    let _ = write!(ge, "\t{d}");
                }
                None => ge.push_str("\tNA"),
            }
        }
        ge.push('\n');
    }
    let mut re = String::from("name\tchr\tstart\tend\n");
    for r in regions {
        let _ = writeln!(re, "{}\t{}\t{}\t{}", r.name, r.chr, r.start, r.end);
    }
    write(phenotype, &ph)?;
    write(genotype, &ge)?;
    write(region_path, &re)
}
