//! Run configuration: a TOML file with every field optional, overlaid by
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use copflm_core::inference::OptimizerConfig;
use copflm_core::inference::Weibull;
use copflm_core::simgen::{SignPattern, SimConfig};
use copflm_core::{BasisSpec, CopulaKind, FlmMode, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CopulaName {
    Clayton,
    Gumbel,
    Independence,
}

impl From<CopulaName> for CopulaKind {
    fn from(c: CopulaName) -> Self {
        match c {
            CopulaName::Clayton => CopulaKind::Clayton,
            CopulaName::Gumbel => CopulaKind::Gumbel,
            CopulaName::Independence => CopulaKind::Independence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FlmModeName {
    /// Observed dosages enter directly; only the effect function is smoothed.
    EffectOnly,
    /// Genotype profiles and the effect function are both smoothed.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisName {
    Bspline,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignName {
    Homogeneous,
    Alternating,
}

impl From<SignName> for SignPattern {
    fn from(s: SignName) -> Self {
        match s {
            SignName::Homogeneous => SignPattern::Homogeneous,
            SignName::Alternating => SignPattern::Alternating,
        }
    }
}

impl SignName {
    pub fn label(self) -> &'static str {
        match self {
            SignName::Homogeneous => "homogeneous",
            SignName::Alternating => "alternating",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub copula: CopulaName,
    pub flm_mode: FlmModeName,
    pub basis: BasisName,
    /// B-spline order (4 = cubic).
    pub order: usize,
    /// Effect-function basis sizes; each is tested separately.
    pub n_basis: Vec<usize>,
    /// Genotype-profile basis size when both functions are smoothed.
    pub gvf_n_basis: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub gradient_step: f64,
    pub hessian_step: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        Self {
            copula: CopulaName::Clayton,
            flm_mode: FlmModeName::EffectOnly,
            basis: BasisName::Bspline,
            order: 4,
            n_basis: vec![5],
            gvf_n_basis: 7,
            max_iter: opt.max_iter,
            grad_tol: opt.grad_tol,
            gradient_step: opt.richardson_base_step,
            hessian_step: opt.hessian_base_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub m: usize,
    pub maf_range: [f64; 2],
    pub region_length: u64,
    pub ld_decay: f64,
    pub taus: Vec<f64>,
    /// Generating copula; the fitted copula when unset.
    pub copula: Option<CopulaName>,
    pub weibull_lambda: [f64; 2],
    pub weibull_k: [f64; 2],
    pub beta: f64,
    pub causal_fraction: f64,
    pub effect_c: f64,
    pub sign_pattern: SignName,
    /// Target censoring rate; unset means no censoring.
    pub censor_target: Option<f64>,
    pub genotype_sets: usize,
    pub phenotype_sets: usize,
    /// Phenotype replicate written by `simulate`.
    pub replicate: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n: d.n,
            m: d.m,
            maf_range: [d.maf_range.0, d.maf_range.1],
            region_length: d.region_length,
            ld_decay: d.ld_decay,
            taus: vec![0.05, 0.4, 0.8],
            copula: None,
            weibull_lambda: [d.weibull[0].lambda, d.weibull[1].lambda],
            weibull_k: [d.weibull[0].k, d.weibull[1].k],
            beta: d.beta,
            causal_fraction: d.causal_fraction,
            effect_c: d.effect_c,
            sign_pattern: SignName::Homogeneous,
            censor_target: d.censor_target,
            genotype_sets: 10,
            phenotype_sets: 100,
            replicate: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub phenotype: Option<PathBuf>,
    pub genotype: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    /// Regions with fewer variants are skipped.
    pub min_variants: usize,
    /// Variants within this many base pairs of a region boundary belong to it.
    pub window: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            phenotype: None,
            genotype: None,
            regions: None,
            min_variants: 10,
            window: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestConfig {
    pub alpha_levels: Vec<f64>,
    pub lrt: bool,
    /// Also run the score test under the independence copula.
    pub independence_baseline: bool,
    pub gamma_curve_points: usize,
    /// Largest tolerated fraction of non-convergent replicates.
    pub max_nonconvergence: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha_levels: vec![0.05, 0.01, 1e-3, 1e-4],
            lrt: true,
            independence_baseline: true,
            gamma_curve_points: 200,
            max_nonconvergence: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectCell {
    pub causal_fraction: f64,
    pub effect_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub effects: Vec<EffectCell>,
    pub sign_patterns: Vec<SignName>,
    /// Sample sizes; the simulation `n` when empty.
    pub ns: Vec<usize>,
    /// Also run the single-trait score test on margin 1.
    pub univariate: bool,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            effects: vec![
                EffectCell {
                    causal_fraction: 0.1,
                    effect_c: 0.4,
                },
                EffectCell {
                    causal_fraction: 0.2,
                    effect_c: 0.3,
                },
                EffectCell {
                    causal_fraction: 0.3,
                    effect_c: 0.25,
                },
            ],
            sign_patterns: vec![SignName::Homogeneous, SignName::Alternating],
            ns: Vec::new(),
            univariate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub model: ModelConfig,
    pub simulation: SimulationConfig,
    pub data: DataConfig,
    pub test: TestConfig,
    pub power: PowerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("copflm-out"),
            threads: 0,
            model: ModelConfig::default(),
            simulation: SimulationConfig::default(),
            data: DataConfig::default(),
            test: TestConfig::default(),
            power: PowerConfig::default(),
        }
    }
}

/// Command-line values that replace file values when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub taus: Option<Vec<f64>>,
    pub n_basis: Option<Vec<usize>>,
    pub flm_mode: Option<FlmModeName>,
    pub copula: Option<CopulaName>,
    pub alpha_levels: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid configuration")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(taus) = &o.taus {
            self.simulation.taus = taus.clone();
        }
        if let Some(nb) = &o.n_basis {
            self.model.n_basis = nb.clone();
        }
        if let Some(mode) = o.flm_mode {
            self.model.flm_mode = mode;
        }
        if let Some(c) = o.copula {
            self.model.copula = c;
        }
        if let Some(a) = &o.alpha_levels {
            self.test.alpha_levels = a.clone();
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.model.n_basis.is_empty(), "model.n_basis must list at least one size");
        for &b in &self.model.n_basis {
            self.model_spec(b)?;
        }
        self.optimizer().validate()?;
        ensure!(
            self.test.alpha_levels.iter().all(|a| *a > 0.0 && *a < 1.0),
            "alpha levels must lie in (0, 1)"
        );
        ensure!(
            (0.0..=1.0).contains(&self.test.max_nonconvergence),
            "test.max_nonconvergence must lie in [0, 1]"
        );
        ensure!(self.test.gamma_curve_points >= 2, "test.gamma_curve_points must be at least 2");
        ensure!(
            self.simulation.genotype_sets > 0 && self.simulation.phenotype_sets > 0,
            "genotype_sets and phenotype_sets must be positive"
        );
        ensure!(!self.simulation.taus.is_empty(), "simulation.taus must not be empty");
        for &tau in &self.simulation.taus {
            self.sim_config(tau).validate()?;
        }
        Ok(())
    }

    fn gef_basis(&self, n_basis: usize) -> Result<BasisSpec> {
        Ok(match self.model.basis {
            BasisName::Bspline => BasisSpec::bspline(self.model.order, n_basis)?,
            BasisName::Fourier => BasisSpec::fourier(n_basis)?,
        })
    }

    pub fn flm_mode(&self, n_basis: usize) -> Result<FlmMode> {
        let gef = self.gef_basis(n_basis)?;
        Ok(match self.model.flm_mode {
            FlmModeName::EffectOnly => FlmMode::SmoothEffectOnly { gef },
            FlmModeName::Both => FlmMode::SmoothBoth {
                gvf: self.gef_basis(self.model.gvf_n_basis)?,
                gef,
            },
        })
    }

    /// Fitted model with `n_basis` effect-function basis functions.
    pub fn model_spec(&self, n_basis: usize) -> Result<ModelSpec> {
        Ok(ModelSpec::new(self.model.copula.into(), self.flm_mode(n_basis)?)?)
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iter: self.model.max_iter,
            grad_tol: self.model.grad_tol,
            richardson_base_step: self.model.gradient_step,
            hessian_base_step: self.model.hessian_step,
            ..OptimizerConfig::default()
        }
    }

    pub fn sim_config(&self, tau: f64) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            n: s.n,
            m: s.m,
            maf_range: (s.maf_range[0], s.maf_range[1]),
            region_length: s.region_length,
            ld_decay: s.ld_decay,
            tau,
            copula: s.copula.unwrap_or(self.model.copula).into(),
            weibull: [0, 1].map(|k| Weibull {
                lambda: s.weibull_lambda[k],
                k: s.weibull_k[k],
            }),
            beta: s.beta,
            causal_fraction: s.causal_fraction,
            effect_c: s.effect_c,
            sign_pattern: s.sign_pattern.into(),
            censor_target: s.censor_target,
            seed: self.seed,
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("configuration serializes");
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }

    pub fn data_paths(&self) -> Result<(&Path, &Path, &Path)> {
        match (&self.data.phenotype, &self.data.genotype, &self.data.regions) {
            (Some(p), Some(g), Some(r)) => Ok((p, g, r)),
            _ => bail!("data.phenotype, data.genotype and data.regions must all be set"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_overrides() {
        let mut cfg = RunConfig::from_toml(
            r#"
            seed = 7
            [model]
            copula = "gumbel"
            n_basis = [5, 6, 7]
            [simulation]
            n = 250
            taus = [0.4]
            sign_pattern = "alternating"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model.copula, CopulaName::Gumbel);
        assert_eq!(cfg.simulation.n, 250);
        assert_eq!(cfg.simulation.m, 20);
        cfg.validate().unwrap();
        let before = cfg.hash();
        cfg.apply(&Overrides {
            seed: Some(9),
            taus: Some(vec![0.8]),
            copula: Some(CopulaName::Clayton),
            ..Overrides::default()
        });
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.simulation.taus, vec![0.8]);
        assert_eq!(cfg.sim_config(0.8).copula, CopulaKind::Clayton);
        assert_ne!(cfg.hash(), before);
        assert_eq!(cfg.hash(), cfg.clone().hash());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml("sed = 3").is_err());
        let mut cfg = RunConfig::default();
        cfg.model.n_basis = vec![2];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.test.alpha_levels = vec![1.5];
        assert!(cfg.validate().is_err());
    }
}
