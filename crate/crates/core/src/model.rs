//! Domain types shared across the crate: subject records, gene regions,
//! basis and model specifications, the parameter vector and its
//! unconstrained layout, and fit/test results.

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};

/// A genotype dosage (minor-allele count) or `None` when missing.
pub type Dosage = Option<u8>;

/// One subject's bivariate observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub y1: f64,
    pub d1: bool,
    pub y2: f64,
    pub d2: bool,
    pub covariates: Vec<f64>,
    pub genotypes: Vec<Dosage>,
}

impl SubjectRecord {
    pub fn new(
        id: impl Into<String>,
        (y1, d1): (f64, bool),
        (y2, d2): (f64, bool),
        covariates: Vec<f64>,
        genotypes: Vec<Dosage>,
    ) -> Result<Self> {
        let rec = Self {
            id: id.into(),
            y1,
            d1,
            y2,
            d2,
            covariates,
            genotypes,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidRecord {
            id: self.id.clone(),
            reason,
        };
        for (name, y) in [("y1", self.y1), ("y2", self.y2)] {
            if !(y.is_finite() && y >= 0.0) {
                return Err(bad(format!("{name} = {y} must be a finite non-negative time")));
            }
        }
        if let Some(x) = self.covariates.iter().find(|x| !x.is_finite()) {
            return Err(bad(format!("non-finite covariate {x}")));
        }
        if let Some(g) = self.genotypes.iter().flatten().find(|&&g| g > 2) {
            return Err(bad(format!("genotype dosage {g} not in {{0,1,2}}")));
        }
        Ok(())
    }

    pub fn has_missing_genotype(&self) -> bool {
        self.genotypes.iter().any(Option::is_none)
    }
}

/// Checks that every record carries `p` covariates and `m` genotypes.
pub fn check_record_shapes(records: &[SubjectRecord], p: usize, m: usize) -> Result<()> {
    for r in records {
        if r.covariates.len() != p {
            return Err(Error::InvalidRecord {
                id: r.id.clone(),
                reason: format!("expected {p} covariates, found {}", r.covariates.len()),
            });
        }
        if r.genotypes.len() != m {
            return Err(Error::InvalidRecord {
                id: r.id.clone(),
                reason: format!("expected {m} genotypes, found {}", r.genotypes.len()),
            });
        }
    }
    Ok(())
}

/// Min-max map of strictly increasing positions onto `[0, 1]`.
pub fn standardize_positions(positions: &[f64]) -> Result<Vec<f64>> {
    let m = positions.len();
    if m < 2 {
        return Err(Error::DegenerateRegion(m));
    }
    if let Some(p) = positions.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidRegion(format!(
            "position {p} is not a finite non-negative coordinate"
        )));
    }
    if let Some(w) = positions.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidRegion(format!(
            "positions must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    let lo = positions[0];
    let span = positions[m - 1] - lo;
    let mut out: Vec<f64> = positions.iter().map(|p| (p - lo) / span).collect();
    out[0] = 0.0;
    out[m - 1] = 1.0;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneRegion {
    pub name: String,
    pub positions: Vec<f64>,
    pub variant_ids: Vec<String>,
}

impl GeneRegion {
    pub fn new(name: impl Into<String>, positions: Vec<f64>, variant_ids: Vec<String>) -> Result<Self> {
        if positions.len() != variant_ids.len() {
            return Err(Error::InvalidRegion(format!(
                "{} positions but {} variant ids",
                positions.len(),
                variant_ids.len()
            )));
        }
        standardize_positions(&positions)?;
        Ok(Self {
            name: name.into(),
            positions,
            variant_ids,
        })
    }

    pub fn n_variants(&self) -> usize {
        self.positions.len()
    }

    pub fn standardized_positions(&self) -> Vec<f64> {
        standardize_positions(&self.positions).expect("validated at construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisFamily {
    /// Clamped B-spline of the given order (order 4 = cubic).
    BSpline { order: usize },
    /// Constant term followed by sin/cos pairs.
    Fourier,
}

/// A basis on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub n_basis: usize,
}

impl BasisSpec {
    pub fn bspline(order: usize, n_basis: usize) -> Result<Self> {
        let spec = Self {
            family: BasisFamily::BSpline { order },
            n_basis,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fourier(n_basis: usize) -> Result<Self> {
        let spec = Self {
            family: BasisFamily::Fourier,
            n_basis,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Cubic B-spline with `n_basis` functions.
    pub fn cubic(n_basis: usize) -> Result<Self> {
        Self::bspline(4, n_basis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_basis == 0 {
            return Err(Error::InvalidBasis("n_basis must be at least 1".into()));
        }
        match self.family {
            BasisFamily::BSpline { order } => {
                if order < 2 {
                    return Err(Error::InvalidBasis(format!("B-spline order {order} < 2")));
                }
                if self.n_basis < order {
                    return Err(Error::InvalidBasis(format!(
                        "B-spline with order {order} needs n_basis >= {order}, got {}",
                        self.n_basis
                    )));
                }
            }
            BasisFamily::Fourier => {
                if self.n_basis.is_multiple_of(2) {
                    return Err(Error::InvalidBasis(format!(
                        "Fourier basis needs an odd n_basis, got {}",
                        self.n_basis
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CopulaKind {
    Clayton,
    Gumbel,
    Independence,
}

impl CopulaKind {
    pub fn has_dependence(self) -> bool {
        !matches!(self, CopulaKind::Independence)
    }

    /// Unconstrained dependence coordinate for `eta`: `ln eta` (Clayton) or
    /// `ln(eta - 1)` (Gumbel).
    pub fn eta_to_dep(self, eta: f64) -> Result<f64> {
        match self {
            CopulaKind::Clayton if eta > 0.0 && eta.is_finite() => Ok(eta.ln()),
            CopulaKind::Clayton => Err(domain("Clayton eta", eta, "(0, inf)")),
            CopulaKind::Gumbel if eta > 1.0 && eta.is_finite() => Ok((eta - 1.0).ln()),
            CopulaKind::Gumbel => Err(domain("Gumbel eta", eta, "(1, inf)")),
            CopulaKind::Independence => Err(Error::InvalidModel(
                "the independence copula has no dependence parameter".into(),
            )),
        }
    }

    pub fn dep_to_eta(self, dep: f64) -> f64 {
        match self {
            CopulaKind::Clayton => dep.exp(),
            CopulaKind::Gumbel => 1.0 + dep.exp(),
            CopulaKind::Independence => f64::NAN,
        }
    }
}

/// How the region's genotypes enter the hazard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlmMode {
    /// Smooth the genotype profile with `gvf` and the effect function with `gef`.
    SmoothBoth { gvf: BasisSpec, gef: BasisSpec },
    /// Use observed dosages directly; smooth only the effect function.
    SmoothEffectOnly { gef: BasisSpec },
}

impl FlmMode {
    pub fn gef_basis(&self) -> BasisSpec {
        match *self {
            FlmMode::SmoothBoth { gef, .. } | FlmMode::SmoothEffectOnly { gef } => gef,
        }
    }
}

/// Which margins enter the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Margins {
    #[default]
    Both,
    /// Single-trait analysis of margin 1 only.
    FirstOnly,
}

/// Marginal baseline family. Only Weibull, with baseline survival `exp(-(lambda t)^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MarginFamily {
    #[default]
    Weibull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub copula: CopulaKind,
    pub margin: MarginFamily,
    pub margins: Margins,
    pub flm_mode: FlmMode,
    pub restrict_gamma_to_zero: bool,
}

impl ModelSpec {
    pub fn new(copula: CopulaKind, flm_mode: FlmMode) -> Result<Self> {
        let spec = Self {
            copula,
            margin: MarginFamily::Weibull,
            margins: Margins::Both,
            flm_mode,
            restrict_gamma_to_zero: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Margin-1-only model (a univariate Weibull FLM).
    pub fn single_margin(flm_mode: FlmMode) -> Result<Self> {
        let spec = Self {
            copula: CopulaKind::Independence,
            margin: MarginFamily::Weibull,
            margins: Margins::FirstOnly,
            flm_mode,
            restrict_gamma_to_zero: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn restricted(mut self) -> Self {
        self.restrict_gamma_to_zero = true;
        self
    }

    pub fn unrestricted(mut self) -> Self {
        self.restrict_gamma_to_zero = false;
        self
    }

    pub fn with_copula(mut self, copula: CopulaKind) -> Self {
        self.copula = copula;
        self
    }

    pub fn n_gamma(&self) -> usize {
        self.flm_mode.gef_basis().n_basis
    }

    pub fn n_margins(&self) -> usize {
        match self.margins {
            Margins::Both => 2,
            Margins::FirstOnly => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.flm_mode {
            FlmMode::SmoothBoth { gvf, gef } => {
                gvf.validate()?;
                gef.validate()?;
                if gvf.n_basis < gef.n_basis {
                    return Err(Error::InvalidModel(format!(
                        "smooth-both design needs B_G >= B_gamma ({} < {})",
                        gvf.n_basis, gef.n_basis
                    )));
                }
            }
            FlmMode::SmoothEffectOnly { gef } => gef.validate()?,
        }
        if self.margins == Margins::FirstOnly && self.copula != CopulaKind::Independence {
            return Err(Error::InvalidModel(
                "a single-margin model cannot carry a copula".into(),
            ));
        }
        Ok(())
    }

    pub fn layout(&self, n_covariates: usize) -> Layout {
        Layout {
            n_gamma: self.n_gamma(),
            n_margins: self.n_margins(),
            n_beta: n_covariates,
            has_dep: self.copula.has_dependence() && self.margins == Margins::Both,
        }
    }
}

/// Position of each parameter block in the flat unconstrained vector:
/// `[gamma.., (log_lambda_k, log_k_k) per margin.., beta.., dep]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_gamma: usize,
    pub n_margins: usize,
    pub n_beta: usize,
    pub has_dep: bool,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.n_gamma + 2 * self.n_margins + self.n_beta + usize::from(self.has_dep)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gamma(&self) -> std::ops::Range<usize> {
        0..self.n_gamma
    }

    /// Everything except gamma.
    pub fn nuisance(&self) -> std::ops::Range<usize> {
        self.n_gamma..self.len()
    }

    pub fn log_lambda(&self, margin: usize) -> usize {
        self.n_gamma + 2 * margin
    }

    pub fn log_k(&self, margin: usize) -> usize {
        self.n_gamma + 2 * margin + 1
    }

    pub fn beta(&self) -> std::ops::Range<usize> {
        let start = self.n_gamma + 2 * self.n_margins;
        start..start + self.n_beta
    }

    pub fn dep(&self) -> Option<usize> {
        self.has_dep.then(|| self.len() - 1)
    }
}

/// Log-scale Weibull parameters of one margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogWeibull {
    pub log_lambda: f64,
    pub log_k: f64,
}

/// Natural-scale parameters: Weibull `lambda`/`k` per margin, `beta`,
/// `gamma` and the copula parameter `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams {
    pub lambda: Vec<f64>,
    pub k: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub eta: Option<f64>,
}

/// Parameters on the unconstrained (optimizer) scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub margins: Vec<LogWeibull>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `ln eta` (Clayton), `ln(eta - 1)` (Gumbel), absent for Independence.
    pub dep: Option<f64>,
}

impl ParameterVector {
    pub fn to_unconstrained(kind: CopulaKind, natural: &NaturalParams) -> Result<Self> {
        if natural.lambda.len() != natural.k.len() || natural.lambda.is_empty() {
            return Err(Error::Dimension(
                "lambda and k must have one entry per margin".into(),
            ));
        }
        let mut margins = Vec::with_capacity(natural.lambda.len());
        for (&lambda, &k) in natural.lambda.iter().zip(&natural.k) {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(domain("Weibull lambda", lambda, "(0, inf)"));
            }
            if !(k > 0.0 && k.is_finite()) {
                return Err(domain("Weibull k", k, "(0, inf)"));
            }
            margins.push(LogWeibull {
                log_lambda: lambda.ln(),
                log_k: k.ln(),
            });
        }
        let dep = match (kind, natural.eta) {
            (CopulaKind::Independence, _) => None,
            (_, Some(eta)) => Some(kind.eta_to_dep(eta)?),
            (_, None) => {
                return Err(Error::InvalidModel(format!(
                    "{kind:?} copula needs a dependence parameter"
                )))
            }
        };
        Ok(Self {
            margins,
            beta: natural.beta.clone(),
            gamma: natural.gamma.clone(),
            dep,
        })
    }

    pub fn from_unconstrained(&self, kind: CopulaKind) -> NaturalParams {
        NaturalParams {
            lambda: self.margins.iter().map(|m| m.log_lambda.exp()).collect(),
            k: self.margins.iter().map(|m| m.log_k.exp()).collect(),
            beta: self.beta.clone(),
            gamma: self.gamma.clone(),
            eta: self.dep.map(|d| kind.dep_to_eta(d)),
        }
    }

    pub fn to_flat(&self, layout: &Layout) -> Result<Vec<f64>> {
        if self.gamma.len() != layout.n_gamma
            || self.margins.len() != layout.n_margins
            || self.beta.len() != layout.n_beta
            || self.dep.is_some() != layout.has_dep
        {
            return Err(Error::Dimension(format!(
                "parameter vector does not match layout {layout:?}"
            )));
        }
        let mut out = Vec::with_capacity(layout.len());
        out.extend_from_slice(&self.gamma);
        for m in &self.margins {
            out.push(m.log_lambda);
            out.push(m.log_k);
        }
        out.extend_from_slice(&self.beta);
        out.extend(self.dep);
        Ok(out)
    }

    pub fn from_flat(layout: &Layout, flat: &[f64]) -> Result<Self> {
        if flat.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "flat vector has {} entries, layout needs {}",
                flat.len(),
                layout.len()
            )));
        }
        Ok(Self {
            gamma: flat[layout.gamma()].to_vec(),
            margins: (0..layout.n_margins)
                .map(|k| LogWeibull {
                    log_lambda: flat[layout.log_lambda(k)],
                    log_k: flat[layout.log_k(k)],
                })
                .collect(),
            beta: flat[layout.beta()].to_vec(),
            dep: layout.dep().map(|i| flat[i]),
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ParameterVector,
    pub loglik: f64,
    /// Gradient of the log-likelihood over the full parameter vector, in
    /// [`Layout`] order.
    pub score: Vec<f64>,
    /// Negative Hessian over the full parameter vector.
    pub observed_info: DMatrix<f64>,
    pub converged: bool,
    pub n_iter: usize,
    /// Max-norm of the gradient over the free parameters.
    pub gradient_norm: f64,
    /// Observed information over the free parameters is numerically singular.
    pub singular_info: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    Score,
    Lrt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub kind: TestKind,
    /// The information block needed by the statistic was numerically
    /// singular; the statistic used a pseudo-inverse and should not be trusted.
    pub singular: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standardize_simple() {
        assert_eq!(
            standardize_positions(&[100.0, 200.0, 300.0]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
    }

    #[test]
    fn standardize_duplicate_rejected() {
        assert!(matches!(
            standardize_positions(&[5.0, 5.0, 10.0]),
            Err(Error::InvalidRegion(_))
        ));
    }

    #[test]
    fn standardize_single_variant_degenerate() {
        assert_eq!(
            standardize_positions(&[42.0]),
            Err(Error::DegenerateRegion(1))
        );
    }

    #[test]
    fn standardize_cfh_bounds() {
        let u = standardize_positions(&[196_621_008.0, 196_668_821.0, 196_716_634.0]).unwrap();
        assert_eq!(u[0], 0.0);
        assert_relative_eq!(u[1], 0.5, epsilon = 1e-15);
        assert_eq!(u[2], 1.0);
    }

    #[test]
    fn natural_round_trip_examples() {
        let nat = NaturalParams {
            lambda: vec![1.0, 0.1],
            k: vec![2.0, 2.0],
            beta: vec![0.3],
            gamma: vec![0.0; 5],
            eta: Some(8.0),
        };
        let pv = ParameterVector::to_unconstrained(CopulaKind::Clayton, &nat).unwrap();
        assert_eq!(pv.margins[0].log_lambda, 0.0);
        assert_relative_eq!(pv.dep.unwrap(), 2.079_441_541_679_835_7, epsilon = 1e-15);
        let back = pv.from_unconstrained(CopulaKind::Clayton);
        assert_relative_eq!(back.eta.unwrap(), 8.0, max_relative = 1e-14);
    }

    #[test]
    fn gumbel_boundary_rejected() {
        assert!(CopulaKind::Gumbel.eta_to_dep(1.0).is_err());
        assert!(CopulaKind::Clayton.eta_to_dep(0.0).is_err());
        let nat = NaturalParams {
            lambda: vec![0.0],
            k: vec![1.0],
            beta: vec![],
            gamma: vec![],
            eta: None,
        };
        assert!(ParameterVector::to_unconstrained(CopulaKind::Independence, &nat).is_err());
    }

    #[test]
    fn basis_spec_validation() {
        assert!(BasisSpec::fourier(4).is_err());
        assert!(BasisSpec::fourier(3).is_ok());
        assert!(BasisSpec::bspline(4, 3).is_err());
        assert!(BasisSpec::bspline(1, 3).is_err());
        assert!(BasisSpec::cubic(5).is_ok());
    }

    #[test]
    fn smooth_both_requires_wider_gvf_basis() {
        let mode = FlmMode::SmoothBoth {
            gvf: BasisSpec::cubic(4).unwrap(),
            gef: BasisSpec::cubic(5).unwrap(),
        };
        assert!(ModelSpec::new(CopulaKind::Clayton, mode).is_err());
    }

    #[test]
    fn layout_blocks_are_disjoint_and_cover() {
        let spec = ModelSpec::new(
            CopulaKind::Gumbel,
            FlmMode::SmoothEffectOnly {
                gef: BasisSpec::cubic(5).unwrap(),
            },
        )
        .unwrap();
        let lay = spec.layout(2);
        assert_eq!(lay.len(), 5 + 4 + 2 + 1);
        assert_eq!(lay.gamma(), 0..5);
        assert_eq!(lay.log_lambda(1), 7);
        assert_eq!(lay.beta(), 9..11);
        assert_eq!(lay.dep(), Some(11));
        let single = ModelSpec::single_margin(spec.flm_mode).unwrap().layout(2);
        assert_eq!(single.len(), 5 + 2 + 2);
        assert_eq!(single.dep(), None);
    }

    #[test]
    fn record_rejects_bad_dosage_and_negative_time() {
        assert!(SubjectRecord::new("a", (1.0, true), (1.0, false), vec![], vec![Some(3)]).is_err());
        assert!(SubjectRecord::new("a", (-1.0, true), (1.0, false), vec![], vec![Some(1)]).is_err());
        assert!(SubjectRecord::new("a", (0.0, false), (1.0, false), vec![], vec![None]).is_ok());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn unconstrained_round_trip(
                l1 in 1e-3f64..1e3, k1 in 1e-2f64..20.0,
                l2 in 1e-3f64..1e3, k2 in 1e-2f64..20.0,
                eta in 1.0001f64..50.0, clayton in any::<bool>(),
            ) {
                let kind = if clayton { CopulaKind::Clayton } else { CopulaKind::Gumbel };
                let nat = NaturalParams {
                    lambda: vec![l1, l2], k: vec![k1, k2],
                    beta: vec![0.5], gamma: vec![1.0, -2.0], eta: Some(eta),
                };
                let back = ParameterVector::to_unconstrained(kind, &nat).unwrap().from_unconstrained(kind);
                for (a, b) in [(l1, back.lambda[0]), (k1, back.k[0]), (l2, back.lambda[1]),
                               (k2, back.k[1]), (eta, back.eta.unwrap())] {
                    prop_assert!(((a - b) / a).abs() <= 1e-12);
                }
            }

            #[test]
            fn standardize_affine_invariant(
                mut pos in proptest::collection::btree_set(0u32..1_000_000, 2..30),
                scale in 0.01f64..100.0, shift in 0.0f64..1e6,
            ) {
                let p: Vec<f64> = std::mem::take(&mut pos).into_iter().map(f64::from).collect();
                let q: Vec<f64> = p.iter().map(|x| x * scale + shift).collect();
                let a = standardize_positions(&p).unwrap();
                let b = standardize_positions(&q).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }
}
