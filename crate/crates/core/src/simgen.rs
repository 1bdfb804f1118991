//! Simulation of LD-structured genotypes and copula-linked bivariate
//! Weibull survival phenotypes with calibrated uniform censoring.
//!
//! Every random draw comes from a ChaCha8 substream keyed by
//! `(seed, purpose, genotype set, replicate)`, so any dataset can be
//! regenerated in isolation and replicates can run in any order.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::copula::CopulaFamily;
use crate::error::{Error, Result};
use crate::inference::margin::Weibull;
use crate::model::{CopulaKind, GeneRegion, SubjectRecord};

/// Mean and standard deviation of the simulated non-genetic covariate.
pub const COVARIATE_MEAN: f64 = 6.0;
pub const COVARIATE_SD: f64 = 2.0;

/// Pseudo-subjects used to calibrate the censoring bound.
pub const CALIBRATION_SUBJECTS: usize = 100_000;
/// Largest accepted gap between the calibrated and the target censoring rate.
pub const CALIBRATION_TOL: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignPattern {
    /// All causal variants raise the hazard.
    Homogeneous,
    /// Signs alternate over causal variants in position order.
    Alternating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub m: usize,
    /// MAFs are drawn uniformly from `(low, high)`.
    pub maf_range: (f64, f64),
    /// Region length in base pairs; variant positions are distinct integers in `[1, length]`.
    pub region_length: u64,
    /// LD correlation length in standardized position units.
    pub ld_decay: f64,
    pub tau: f64,
    pub copula: CopulaKind,
    pub weibull: [Weibull; 2],
    pub beta: f64,
    pub causal_fraction: f64,
    pub effect_c: f64,
    pub sign_pattern: SignPattern,
    /// Target censoring rate per margin; `None` leaves event times uncensored.
    pub censor_target: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 500,
            m: 20,
            maf_range: (0.01, 0.5),
            region_length: 6_000,
            ld_decay: 0.1,
            tau: 0.4,
            copula: CopulaKind::Clayton,
            weibull: [Weibull { lambda: 0.1, k: 2.0 }; 2],
            beta: 0.0,
            causal_fraction: 0.0,
            effect_c: 0.0,
            sign_pattern: SignPattern::Homogeneous,
            censor_target: Some(0.5),
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Rare-variant scenario: MAF in `(0.01, 0.05)` over a 30 kb region.
    pub fn rare_variants(mut self) -> Self {
        self.maf_range = (0.01, 0.05);
        self.region_length = 30_000;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.m < 2 {
            return bad(format!("m = {} must be at least 2", self.m));
        }
        let (lo, hi) = self.maf_range;
        if !(lo > 0.0 && lo < hi && hi <= 0.5) {
            return bad(format!("maf_range ({lo}, {hi}) must satisfy 0 < low < high <= 0.5"));
        }
        if self.region_length < self.m as u64 {
            return bad(format!(
                "region_length {} cannot hold {} distinct positions",
                self.region_length, self.m
            ));
        }
        if !(self.ld_decay > 0.0 && self.ld_decay.is_finite()) {
            return bad(format!("ld_decay = {} must be positive", self.ld_decay));
        }
        if self.copula.has_dependence() && !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau = {} must lie in (0, 1)", self.tau));
        }
        for w in &self.weibull {
            Weibull::new(w.lambda, w.k)?;
        }
        if !self.beta.is_finite() || !self.effect_c.is_finite() {
            return bad("beta and effect_c must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.causal_fraction) {
            return bad(format!("causal_fraction = {} must lie in [0, 1]", self.causal_fraction));
        }
        if let Some(c) = self.censor_target {
            if !(c > 0.05 && c < 0.95) {
                return bad(format!("censor_target = {c} must lie in (0.05, 0.95)"));
            }
        }
        Ok(())
    }

    pub fn copula_family(&self) -> Result<CopulaFamily> {
        CopulaFamily::from_tau(self.copula, self.tau)
    }

    /// Number of causal variants implied by `causal_fraction`.
    pub fn n_causal(&self) -> Result<usize> {
        if self.causal_fraction == 0.0 {
            return Ok(0);
        }
        let count = (self.causal_fraction * self.m as f64).round() as usize;
        if count == 0 {
            return Err(Error::Config(format!(
                "causal_fraction {} of {} variants selects no variant",
                self.causal_fraction, self.m
            )));
        }
        Ok(count)
    }
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Genotypes = 1,
    Causal = 2,
    Phenotypes = 3,
    Calibration = 4,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn substream(seed: u64, purpose: Purpose, set: u64, replicate: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([seed, purpose as u64, set, replicate])
    {
        let mixed = splitmix(word ^ splitmix(seed));
        chunk.copy_from_slice(&mixed.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// A uniform draw in the open interval `(0, 1)`.
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Genotypes of one simulated region.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeSet {
    /// Index of this set within the run; keys its random streams.
    pub index: u64,
    pub region: GeneRegion,
    pub mafs: Vec<f64>,
    /// `n` rows of `m` minor-allele counts.
    pub dosages: Vec<Vec<u8>>,
}

/// Draws genotype set `index`: positions, MAFs and dosages under a latent
/// Gaussian haplotype model with correlation `exp(-|u_j - u_l| / ld_decay)`.
pub fn simulate_genotypes(cfg: &SimConfig, index: u64) -> Result<GenotypeSet> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, Purpose::Genotypes, index, 0);
    let mut positions: Vec<u64> = index::sample(&mut rng, cfg.region_length as usize, cfg.m)
        .into_iter()
        .map(|p| p as u64 + 1)
        .collect();
    positions.sort_unstable();
    let (lo, hi) = cfg.maf_range;
    let mafs: Vec<f64> = (0..cfg.m).map(|_| rng.gen_range(lo..hi)).collect();

    let positions_f: Vec<f64> = positions.iter().map(|&p| p as f64).collect();
    let ids = positions.iter().map(|p| format!("v{p}")).collect();
    let region = GeneRegion::new(format!("sim{index}"), positions_f, ids)?;
    let u = region.standardized_positions();

    let std_normal = StatNormal::new(0.0, 1.0).expect("standard normal");
    let thresholds: Vec<f64> = mafs.iter().map(|&p| std_normal.inverse_cdf(p)).collect();
    let rho: Vec<f64> = u.windows(2).map(|w| (-(w[1] - w[0]) / cfg.ld_decay).exp()).collect();
    let innovation: Vec<f64> = rho.iter().map(|r| (1.0 - r * r).sqrt()).collect();

    let mut haplotype = |row: &mut [u8]| {
        let mut z: f64 = StandardNormal.sample(&mut rng);
        for j in 0..cfg.m {
            if j > 0 {
                let e: f64 = StandardNormal.sample(&mut rng);
                z = rho[j - 1] * z + innovation[j - 1] * e;
            }
            row[j] += u8::from(z < thresholds[j]);
        }
    };
    let dosages = (0..cfg.n)
        .map(|_| {
            let mut row = vec![0u8; cfg.m];
            haplotype(&mut row);
            haplotype(&mut row);
            row
        })
        .collect();
    Ok(GenotypeSet {
        index,
        region,
        mafs,
        dosages,
    })
}

/// Per-variant effect `±c |log10 MAF| / 2` on a seeded random causal subset.
pub fn effect_function(cfg: &SimConfig, genotypes: &GenotypeSet) -> Result<Vec<f64>> {
    let m = genotypes.mafs.len();
    let n_causal = cfg.n_causal()?;
    let mut effects = vec![0.0; m];
    if n_causal == 0 {
        return Ok(effects);
    }
    let mut rng = substream(cfg.seed, Purpose::Causal, genotypes.index, 0);
    let mut causal = index::sample(&mut rng, m, n_causal.min(m)).into_vec();
    causal.sort_unstable();
    for (rank, &j) in causal.iter().enumerate() {
        let sign = match cfg.sign_pattern {
            SignPattern::Homogeneous => 1.0,
            SignPattern::Alternating if rank % 2 == 1 => -1.0,
            SignPattern::Alternating => 1.0,
        };
        effects[j] = sign * effect_size(cfg.effect_c, genotypes.mafs[j]);
    }
    Ok(effects)
}

/// `c |log10 maf| / 2`.
pub fn effect_size(c: f64, maf: f64) -> f64 {
    c * maf.log10().abs() / 2.0
}

/// Latent event times of one subject and the uniforms behind its censoring.
struct Draw {
    covariate: f64,
    times: [f64; 2],
    censor_uniforms: [f64; 2],
}

fn draw_subject(
    rng: &mut ChaCha8Rng,
    cfg: &SimConfig,
    copula: &CopulaFamily,
    covariate_dist: &Normal<f64>,
    genetic_lp: f64,
) -> Result<Draw> {
    let v = open_unit(rng);
    let w = open_unit(rng);
    let u = copula.h_inverse(w, v)?;
    let covariate = covariate_dist.sample(rng);
    let lp = cfg.beta * covariate + genetic_lp;
    let times = [
        cfg.weibull[0].inverse_survival(u, lp),
        cfg.weibull[1].inverse_survival(v, lp),
    ];
    let censor_uniforms = [open_unit(rng), open_unit(rng)];
    Ok(Draw {
        covariate,
        times,
        censor_uniforms,
    })
}

fn genetic_lp(dosages: &[u8], effects: &[f64]) -> f64 {
    dosages.iter().zip(effects).map(|(&g, &e)| f64::from(g) * e).sum()
}

fn covariate_distribution() -> Normal<f64> {
    Normal::new(COVARIATE_MEAN, COVARIATE_SD).expect("valid covariate distribution")
}

/// Phenotype replicate `replicate` over `genotypes`. Censoring times are
/// `U(0, censor_bound)`; `None` leaves every event observed.
pub fn simulate_phenotypes(
    cfg: &SimConfig,
    genotypes: &GenotypeSet,
    effects: &[f64],
    censor_bound: Option<f64>,
    replicate: u64,
) -> Result<Vec<SubjectRecord>> {
    cfg.validate()?;
    if effects.len() != genotypes.mafs.len() {
        return Err(Error::Dimension(format!(
            "{} effects for {} variants",
            effects.len(),
            genotypes.mafs.len()
        )));
    }
    let copula = cfg.copula_family()?;
    let covariate_dist = covariate_distribution();
    let mut rng = substream(cfg.seed, Purpose::Phenotypes, genotypes.index, replicate);
    genotypes
        .dosages
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let d = draw_subject(&mut rng, cfg, &copula, &covariate_dist, genetic_lp(row, effects))?;
            let observe = |k: usize| match censor_bound {
                Some(c) => {
                    let censor = c * d.censor_uniforms[k];
                    (d.times[k].min(censor), d.times[k] <= censor)
                }
                None => (d.times[k], true),
            };
            SubjectRecord::new(
                format!("s{i}"),
                observe(0),
                observe(1),
                vec![d.covariate],
                row.iter().map(|&g| Some(g)).collect(),
            )
        })
        .collect()
}

/// Fraction of both margins censored at bound `c` over common draws.
fn censoring_rate(draws: &[Draw], c: f64) -> f64 {
    let censored: usize = draws
        .iter()
        .map(|d| (0..2).filter(|&k| d.times[k] > c * d.censor_uniforms[k]).count())
        .sum();
    censored as f64 / (2 * draws.len()) as f64
}

/// Upper bound `C` of the censoring uniform giving `cfg.censor_target`
/// censoring, estimated by bisection over a fixed set of pseudo-subjects
/// resampled from `genotypes`.
pub fn calibrate_censoring(cfg: &SimConfig, genotypes: &GenotypeSet, effects: &[f64]) -> Result<f64> {
    cfg.validate()?;
    let target = cfg
        .censor_target
        .ok_or_else(|| Error::Config("calibration needs a censor_target".into()))?;
    if genotypes.dosages.is_empty() {
        return Err(Error::Calibration("no genotype rows to resample".into()));
    }
    let copula = cfg.copula_family()?;
    let covariate_dist = covariate_distribution();
    let mut rng = substream(cfg.seed, Purpose::Calibration, genotypes.index, 0);
    let lps: Vec<f64> = genotypes.dosages.iter().map(|r| genetic_lp(r, effects)).collect();
    let draws = (0..CALIBRATION_SUBJECTS)
        .map(|_| {
            let i = rng.gen_range(0..lps.len());
            draw_subject(&mut rng, cfg, &copula, &covariate_dist, lps[i])
        })
        .collect::<Result<Vec<_>>>()?;

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut expansions = 0;
    while censoring_rate(&draws, hi) > target {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Calibration(format!("censoring rate {target} unreachable")));
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if censoring_rate(&draws, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rate = censoring_rate(&draws, hi);
    if (rate - target).abs() > CALIBRATION_TOL {
        return Err(Error::Calibration(format!(
            "best bound {hi} gives censoring rate {rate}, target {target}"
        )));
    }
    Ok(hi)
}

/// A genotype set with its effects and calibrated censoring bound, ready to
/// draw phenotype replicates from.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub genotypes: GenotypeSet,
    pub effects: Vec<f64>,
    pub censor_bound: Option<f64>,
}

impl Scenario {
    pub fn new(cfg: &SimConfig, set: u64) -> Result<Self> {
        let genotypes = simulate_genotypes(cfg, set)?;
        let effects = effect_function(cfg, &genotypes)?;
        let censor_bound = match cfg.censor_target {
            Some(_) => Some(calibrate_censoring(cfg, &genotypes, &effects)?),
            None => None,
        };
        Ok(Self {
            genotypes,
            effects,
            censor_bound,
        })
    }

    pub fn replicate(&self, cfg: &SimConfig, replicate: u64) -> Result<Vec<SubjectRecord>> {
        simulate_phenotypes(cfg, &self.genotypes, &self.effects, self.censor_bound, replicate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small(n: usize) -> SimConfig {
        SimConfig {
            n,
            ..SimConfig::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = small(200);
        let a = Scenario::new(&cfg, 3).unwrap();
        let b = Scenario::new(&cfg, 3).unwrap();
        assert_eq!(a.genotypes, b.genotypes);
        assert_eq!(a.censor_bound, b.censor_bound);
        assert_eq!(a.replicate(&cfg, 7).unwrap(), b.replicate(&cfg, 7).unwrap());
        assert_ne!(a.replicate(&cfg, 7).unwrap(), a.replicate(&cfg, 8).unwrap());
        let other = simulate_genotypes(&SimConfig { seed: 2, ..cfg.clone() }, 3).unwrap();
        assert_ne!(other.dosages, a.genotypes.dosages);
    }

    #[test]
    fn positions_distinct_and_mafs_in_range() {
        let cfg = small(50).rare_variants();
        let g = simulate_genotypes(&cfg, 0).unwrap();
        assert_eq!(g.region.n_variants(), 20);
        assert!(g.region.positions.windows(2).all(|w| w[0] < w[1]));
        assert!(g.region.positions.iter().all(|&p| (1.0..=30_000.0).contains(&p)));
        assert!(g.mafs.iter().all(|&p| (0.01..0.05).contains(&p)));
        assert!(g.dosages.iter().flatten().all(|&d| d <= 2));
    }

    #[test]
    fn mean_dosage_matches_maf() {
        let cfg = SimConfig {
            n: 20_000,
            maf_range: (0.499_999, 0.5),
            ..SimConfig::default()
        };
        let g = simulate_genotypes(&cfg, 0).unwrap();
        for j in 0..cfg.m {
            let mean = g.dosages.iter().map(|r| f64::from(r[j])).sum::<f64>() / cfg.n as f64;
            // binomial(2, 1/2) has variance 1/2
            assert!((mean - 1.0).abs() < 4.0 * (0.5 / cfg.n as f64).sqrt(), "{mean}");
        }
    }

    fn adjacent_correlation(cfg: &SimConfig) -> f64 {
        let g = simulate_genotypes(cfg, 0).unwrap();
        let col = |j: usize| -> Vec<f64> { g.dosages.iter().map(|r| f64::from(r[j])).collect() };
        let mut total = 0.0;
        for j in 0..cfg.m - 1 {
            let (a, b) = (col(j), col(j + 1));
            let n = a.len() as f64;
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>();
            let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
            total += cov / (va * vb).sqrt();
        }
        total / (cfg.m - 1) as f64
    }

    #[test]
    fn ld_decay_controls_adjacent_correlation() {
        let base = SimConfig {
            n: 5_000,
            maf_range: (0.3, 0.5),
            ..SimConfig::default()
        };
        let none = adjacent_correlation(&SimConfig { ld_decay: 1e-6, ..base.clone() });
        let strong = adjacent_correlation(&SimConfig { ld_decay: 10.0, ..base });
        assert!(none.abs() < 0.03, "{none}");
        assert!(strong > 0.5, "{strong}");
    }

    #[test]
    fn effect_function_values() {
        assert_relative_eq!(effect_size(0.4, 0.01), 0.4, epsilon = 1e-15);
        assert_relative_eq!(effect_size(0.4, 0.05), 0.4 * 1.301_029_995_663_981 / 2.0, epsilon = 1e-15);

        let cfg = SimConfig {
            n: 10,
            causal_fraction: 0.3,
            effect_c: 0.25,
            sign_pattern: SignPattern::Alternating,
            ..SimConfig::default()
        };
        let g = simulate_genotypes(&cfg, 0).unwrap();
        let e = effect_function(&cfg, &g).unwrap();
        let causal: Vec<f64> = e.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(causal.len(), 6);
        for (rank, v) in causal.iter().enumerate() {
            assert_eq!(v.signum(), if rank % 2 == 0 { 1.0 } else { -1.0 });
        }
        for (j, v) in e.iter().enumerate() {
            if *v != 0.0 {
                assert_relative_eq!(v.abs(), effect_size(0.25, g.mafs[j]), epsilon = 1e-15);
            }
        }

        let null = SimConfig { n: 10, ..SimConfig::default() };
        assert!(effect_function(&null, &g).unwrap().iter().all(|v| *v == 0.0));
        let too_few = SimConfig {
            n: 10,
            causal_fraction: 0.01,
            ..SimConfig::default()
        };
        assert!(matches!(effect_function(&too_few, &g), Err(Error::Config(_))));
    }

    #[test]
    fn weibull_median() {
        let cfg = SimConfig {
            n: 40_000,
            censor_target: None,
            copula: CopulaKind::Independence,
            ..SimConfig::default()
        };
        let s = Scenario::new(&cfg, 0).unwrap();
        let mut t: Vec<f64> = s.replicate(&cfg, 0).unwrap().iter().map(|r| r.y1).collect();
        t.sort_by(f64::total_cmp);
        let median = t[t.len() / 2];
        // density at the median is k ln2 / median * 0.5; MC sd = 1 / (2 f sqrt(n))
        let f = 2.0 * std::f64::consts::LN_2 / 8.326 * 0.5;
        let sd = 1.0 / (2.0 * f * (cfg.n as f64).sqrt());
        assert!((median - std::f64::consts::LN_2.sqrt() / 0.1).abs() < 4.0 * sd, "{median}");
    }

    #[test]
    fn calibration_properties() {
        let cfg = small(1_000);
        let s = Scenario::new(&cfg, 0).unwrap();
        let c = s.censor_bound.unwrap();
        // halving the time scale halves the bound under common random numbers
        let mut faster = cfg.clone();
        faster.weibull = [Weibull { lambda: 0.2, k: 2.0 }; 2];
        let c_fast = calibrate_censoring(&faster, &s.genotypes, &s.effects).unwrap();
        assert_relative_eq!(c_fast, c / 2.0, max_relative = 1e-6);
        // realized rate on fresh replicates
        let mut total = 0.0;
        for r in 0..20 {
            let recs = s.replicate(&cfg, r).unwrap();
            total += recs.iter().map(|x| f64::from(u8::from(!x.d1)) + f64::from(u8::from(!x.d2))).sum::<f64>()
                / (2 * recs.len()) as f64;
        }
        assert!((total / 20.0 - 0.5).abs() < 0.02, "{}", total / 20.0);
        assert!(matches!(
            SimConfig { censor_target: Some(0.99), ..cfg }.validate(),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn huge_bound_censors_nothing() {
        let cfg = small(500);
        let s = Scenario::new(&cfg, 0).unwrap();
        let recs = simulate_phenotypes(&cfg, &s.genotypes, &s.effects, Some(1e12), 0).unwrap();
        assert!(recs.iter().all(|r| r.d1 && r.d2));
    }
}
