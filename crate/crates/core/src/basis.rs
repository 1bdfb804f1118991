//! Basis evaluation on `[0, 1]`, the least-squares genotype smoother, basis
//! cross integrals, and the per-subject functional design vectors.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{domain, Error, Result};
use crate::model::{check_record_shapes, BasisFamily, BasisSpec, Dosage, FlmMode, GeneRegion, ModelSpec, SubjectRecord};

/// Basis values at a set of points; one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    pub values: DMatrix<f64>,
    pub spec: BasisSpec,
    pub points: Vec<f64>,
}

/// Clamped knot vector with equally spaced interior knots.
pub fn bspline_knots(order: usize, n_basis: usize) -> Vec<f64> {
    let n_interior = n_basis - order;
    let mut knots = vec![0.0; order];
    knots.extend((1..=n_interior).map(|i| i as f64 / (n_interior + 1) as f64));
    knots.extend(std::iter::repeat_n(1.0, order));
    knots
}

/// Writes the `order` non-zero B-spline values at `u` into `out` and returns
/// the index of the first one (Cox-de Boor triangle).
fn bspline_nonzero(knots: &[f64], order: usize, n_basis: usize, u: f64, out: &mut [f64]) -> usize {
    let degree = order - 1;
    let mut span = degree;
    while span + 1 < n_basis && u >= knots[span + 1] {
        span += 1;
    }
    let mut left = [0.0f64; 32];
    let mut right = [0.0f64; 32];
    out[0] = 1.0;
    for j in 1..=degree {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let tmp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out[j] = saved;
    }
    span - degree
}

fn fill_row(spec: &BasisSpec, knots: &[f64], u: f64, row: &mut [f64]) {
    match spec.family {
        BasisFamily::BSpline { order } => {
            row.iter_mut().for_each(|v| *v = 0.0);
            let mut local = [0.0f64; 32];
            let first = bspline_nonzero(knots, order, spec.n_basis, u, &mut local);
            row[first..first + order].copy_from_slice(&local[..order]);
        }
        BasisFamily::Fourier => {
            row[0] = 1.0;
            let tau = std::f64::consts::TAU;
            for r in 1..=spec.n_basis / 2 {
                let (s, c) = (tau * r as f64 * u).sin_cos();
                row[2 * r - 1] = s;
                row[2 * r] = c;
            }
        }
    }
}

/// Evaluates `spec` at each point. Fourier columns run
/// `(1, sin 2πu, cos 2πu, sin 4πu, cos 4πu, ...)`.
pub fn eval_basis(spec: &BasisSpec, points: &[f64]) -> Result<BasisMatrix> {
    spec.validate()?;
    if let BasisFamily::BSpline { order } = spec.family {
        if order > 31 {
            return Err(Error::InvalidBasis(format!("B-spline order {order} is too large")));
        }
    }
    if let Some(&u) = points.iter().find(|u| !(0.0..=1.0).contains(*u)) {
        return Err(domain("basis point", u, "[0, 1]"));
    }
    let knots = match spec.family {
        BasisFamily::BSpline { order } => bspline_knots(order, spec.n_basis),
        BasisFamily::Fourier => Vec::new(),
    };
    let mut values = DMatrix::zeros(points.len(), spec.n_basis);
    let mut row = vec![0.0; spec.n_basis];
    for (i, &u) in points.iter().enumerate() {
        fill_row(spec, &knots, u, &mut row);
        for (j, v) in row.iter().enumerate() {
            values[(i, j)] = *v;
        }
    }
    Ok(BasisMatrix {
        values,
        spec: *spec,
        points: points.to_vec(),
    })
}

/// 64-point Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre_64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(64))
}

pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn breakpoints(spec: &BasisSpec) -> Vec<f64> {
    match spec.family {
        BasisFamily::BSpline { order } => bspline_knots(order, spec.n_basis)[order - 1..=spec.n_basis].to_vec(),
        BasisFamily::Fourier => (0..=spec.n_basis).map(|i| i as f64 / spec.n_basis as f64).collect(),
    }
}

/// `∫₀¹ φ_a(u) ψ_b(u) du` for every pair, by 64-point Gauss-Legendre on each
/// interval between the union of both bases' breakpoints.
pub fn cross_integral(gvf_basis: &BasisSpec, gef_basis: &BasisSpec) -> Result<DMatrix<f64>> {
    gvf_basis.validate()?;
    gef_basis.validate()?;
    let mut cuts = breakpoints(gvf_basis);
    cuts.extend(breakpoints(gef_basis));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let (nodes, weights) = gauss_legendre_64();
    let mut points = Vec::with_capacity(nodes.len() * cuts.len());
    let mut w = Vec::with_capacity(points.capacity());
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let half = 0.5 * (b - a);
        for (x, wx) in nodes.iter().zip(weights) {
            points.push((a + half * (x + 1.0)).clamp(0.0, 1.0));
            w.push(half * wx);
        }
    }
    let phi = eval_basis(gvf_basis, &points)?.values;
    let psi = eval_basis(gef_basis, &points)?.values;
    let weighted = DMatrix::from_fn(phi.nrows(), phi.ncols(), |i, j| phi[(i, j)] * w[i]);
    Ok(weighted.transpose() * psi)
}

/// Inverse of a symmetric positive-definite matrix, or `None` when its
/// reciprocal condition number falls below `rcond_min`.
pub(crate) fn spd_inverse(a: &DMatrix<f64>, rcond_min: f64) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(max > 0.0) || !(min / max >= rcond_min) {
        return None;
    }
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
    Some(&eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose())
}

/// Least-squares smoother of a genotype profile onto a basis.
#[derive(Debug, Clone)]
pub struct GvfSmoother {
    basis: BasisSpec,
    phi: DMatrix<f64>,
    /// `Φ(Φ'Φ)⁻¹` for the complete-data case, if `Φ'Φ` is invertible.
    complete: Option<DMatrix<f64>>,
}

const SMOOTHER_RCOND: f64 = 1e-12;

impl GvfSmoother {
    pub fn new(positions: &[f64], basis: &BasisSpec) -> Result<Self> {
        let phi = eval_basis(basis, positions)?.values;
        let complete = (phi.nrows() >= basis.n_basis)
            .then(|| spd_inverse(&(phi.transpose() * &phi), SMOOTHER_RCOND).map(|inv| &phi * inv))
            .flatten();
        Ok(Self {
            basis: *basis,
            phi,
            complete,
        })
    }

    /// Coefficients `c` with `Ĝ(u) = c · φ(u)`.
    pub fn coefficients(&self, genotypes: &[Dosage]) -> Result<DVector<f64>> {
        if genotypes.len() != self.phi.nrows() {
            return Err(Error::Dimension(format!(
                "{} genotypes for {} positions",
                genotypes.len(),
                self.phi.nrows()
            )));
        }
        if genotypes.iter().all(Option::is_some) {
            let m = self.complete.as_ref().ok_or_else(|| {
                Error::SmootherSingular(format!(
                    "{} positions cannot support {} basis functions",
                    self.phi.nrows(),
                    self.basis.n_basis
                ))
            })?;
            let g = DVector::from_iterator(genotypes.len(), genotypes.iter().map(|g| f64::from(g.unwrap())));
            return Ok(m.tr_mul(&g));
        }
        let observed: Vec<usize> = (0..genotypes.len()).filter(|&j| genotypes[j].is_some()).collect();
        if observed.len() < self.basis.n_basis {
            return Err(Error::SmootherSingular(format!(
                "{} observed genotypes for {} basis functions",
                observed.len(),
                self.basis.n_basis
            )));
        }
        let phi_obs = self.phi.select_rows(&observed);
        let inv = spd_inverse(&(phi_obs.transpose() * &phi_obs), SMOOTHER_RCOND)
            .ok_or_else(|| Error::SmootherSingular("observed basis cross-product is rank deficient".into()))?;
        let g = DVector::from_iterator(observed.len(), observed.iter().map(|&j| f64::from(genotypes[j].unwrap())));
        Ok(inv * phi_obs.tr_mul(&g))
    }
}

/// Smoothed genotype-profile coefficients for one subject.
pub fn smooth_gvf(genotypes: &[Dosage], positions: &[f64], gvf_basis: &BasisSpec) -> Result<DVector<f64>> {
    GvfSmoother::new(positions, gvf_basis)?.coefficients(genotypes)
}

/// One row `M_i'` per subject, `B_gamma` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: DMatrix<f64>,
    pub mode: FlmMode,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.ncols()
    }

    /// Design with no genetic columns contributing (all zero).
    pub fn zeros(n: usize, mode: FlmMode) -> Self {
        Self {
            rows: DMatrix::zeros(n, mode.gef_basis().n_basis),
            mode,
        }
    }
}

pub fn build_design(records: &[SubjectRecord], region: &GeneRegion, spec: &ModelSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    let m = region.n_variants();
    let p = records.first().map_or(0, |r| r.covariates.len());
    check_record_shapes(records, p, m)?;
    let u = region.standardized_positions();
    let n = records.len();
    let b_gamma = spec.n_gamma();
    let mut rows = DMatrix::zeros(n, b_gamma);
    match spec.flm_mode {
        FlmMode::SmoothEffectOnly { gef } => {
            let psi = eval_basis(&gef, &u)?.values;
            for (i, rec) in records.iter().enumerate() {
                if rec.has_missing_genotype() {
                    return Err(Error::MissingGenotype(rec.id.clone()));
                }
                for (j, g) in rec.genotypes.iter().enumerate() {
                    let g = f64::from(g.unwrap());
                    if g != 0.0 {
                        for b in 0..b_gamma {
                            rows[(i, b)] += g * psi[(j, b)];
                        }
                    }
                }
            }
        }
        FlmMode::SmoothBoth { gvf, gef } => {
            let smoother = GvfSmoother::new(&u, &gvf)?;
            let w = cross_integral(&gvf, &gef)?;
            for (i, rec) in records.iter().enumerate() {
                let c = smoother.coefficients(&rec.genotypes)?;
                let row = w.tr_mul(&c);
                for b in 0..b_gamma {
                    rows[(i, b)] = row[b];
                }
            }
        }
    }
    Ok(DesignMatrix {
        rows,
        mode: spec.flm_mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CopulaKind;
    use approx::assert_relative_eq;

    /// Textbook recursive definition, independent of the triangular scheme.
    fn bspline_naive(knots: &[f64], i: usize, order: usize, u: f64, last: bool) -> f64 {
        if order == 1 {
            let inside = knots[i] <= u && u < knots[i + 1];
            let right_end = last && u == knots[i + 1] && knots[i] < knots[i + 1];
            return f64::from(u8::from(inside || right_end));
        }
        let mut v = 0.0;
        let d1 = knots[i + order - 1] - knots[i];
        if d1 > 0.0 {
            v += (u - knots[i]) / d1 * bspline_naive(knots, i, order - 1, u, last);
        }
        let d2 = knots[i + order] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + order] - u) / d2 * bspline_naive(knots, i + 1, order - 1, u, last);
        }
        v
    }

    fn midpoint_cross(a: &BasisSpec, b: &BasisSpec, n: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(a.n_basis, b.n_basis);
        let chunk = 10_000;
        for start in (0..n).step_by(chunk) {
            let pts: Vec<f64> = (start..(start + chunk).min(n)).map(|i| (i as f64 + 0.5) / n as f64).collect();
            let pa = eval_basis(a, &pts).unwrap().values;
            let pb = eval_basis(b, &pts).unwrap().values;
            out += pa.transpose() * pb;
        }
        out / n as f64
    }

    #[test]
    fn clamped_left_boundary() {
        let m = eval_basis(&BasisSpec::cubic(4).unwrap(), &[0.0]).unwrap();
        assert_eq!(m.values.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
        let m = eval_basis(&BasisSpec::cubic(5).unwrap(), &[1.0]).unwrap();
        assert_relative_eq!(m.values[(0, 4)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fourier_quarter_point() {
        let m = eval_basis(&BasisSpec::fourier(3).unwrap(), &[0.25]).unwrap();
        assert_eq!(m.values[(0, 0)], 1.0);
        assert_relative_eq!(m.values[(0, 1)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.values[(0, 2)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn out_of_domain_point() {
        assert!(eval_basis(&BasisSpec::cubic(5).unwrap(), &[1.5]).is_err());
        assert!(eval_basis(&BasisSpec::fourier(3).unwrap(), &[-0.1]).is_err());
    }

    #[test]
    fn triangle_matches_recursive_definition() {
        for (order, n) in [(2, 2), (2, 6), (3, 5), (4, 5), (4, 9), (5, 7)] {
            let spec = BasisSpec::bspline(order, n).unwrap();
            let knots = bspline_knots(order, n);
            let pts: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
            let m = eval_basis(&spec, &pts).unwrap();
            for (r, &u) in pts.iter().enumerate() {
                for b in 0..n {
                    let expect = bspline_naive(&knots, b, order, u, b == n - 1);
                    assert!((m.values[(r, b)] - expect).abs() < 1e-12, "order {order} n {n} u {u} b {b}");
                }
            }
        }
    }

    #[test]
    fn fourier_cross_integral_diagonal() {
        let f = BasisSpec::fourier(3).unwrap();
        let w = cross_integral(&f, &f).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 0.5]));
        assert!((w - expect).abs().max() < 1e-13);
    }

    #[test]
    fn cross_integral_swap_symmetry() {
        let a = BasisSpec::cubic(7).unwrap();
        let b = BasisSpec::fourier(5).unwrap();
        let ab = cross_integral(&a, &b).unwrap();
        let ba = cross_integral(&b, &a).unwrap();
        assert!((ab - ba.transpose()).abs().max() < 1e-14);
    }

    #[test]
    fn bspline_cross_integral_against_riemann_sum() {
        let s = BasisSpec::cubic(5).unwrap();
        let w = cross_integral(&s, &s).unwrap();
        assert_relative_eq!(w.sum(), 1.0, epsilon = 1e-13);
        let oracle = midpoint_cross(&s, &s, 1_000_000);
        assert!((&w - &oracle).abs().max() < 1e-8);
        // row sums are the integrals of each basis function
        let ones = BasisSpec::bspline(2, 2).unwrap(); // (1-u, u) sums to 1
        let integrals = cross_integral(&s, &ones).unwrap().column_sum();
        for a in 0..5 {
            assert_relative_eq!(w.row(a).sum(), integrals[a], epsilon = 1e-13);
        }
    }

    #[test]
    fn mixed_cross_integral_against_riemann_sum() {
        for (a, b) in [
            (BasisSpec::cubic(8).unwrap(), BasisSpec::fourier(5).unwrap()),
            (BasisSpec::bspline(3, 6).unwrap(), BasisSpec::cubic(5).unwrap()),
        ] {
            let w = cross_integral(&a, &b).unwrap();
            let oracle = midpoint_cross(&a, &b, 1_000_000);
            assert!((&w - &oracle).abs().max() < 1e-8);
        }
    }

    #[test]
    fn smoother_reproduces_constants() {
        let u: Vec<f64> = (0..12).map(|i| (i as f64 / 11.0).powf(1.3)).collect();
        let spec = BasisSpec::cubic(5).unwrap();
        let c = smooth_gvf(&[Some(1); 12], &u, &spec).unwrap();
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let fitted = eval_basis(&spec, &grid).unwrap().values * c;
        assert!(fitted.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn smoother_interpolates_when_square() {
        let u = [0.0, 0.2, 0.45, 0.7, 1.0];
        let g = [Some(0), Some(2), Some(1), Some(0), Some(1)];
        let spec = BasisSpec::cubic(5).unwrap();
        let c = smooth_gvf(&g, &u, &spec).unwrap();
        // oracle: solve the square system Φ c = g directly
        let phi = eval_basis(&spec, &u).unwrap().values;
        let gv = DVector::from_iterator(5, g.iter().map(|x| f64::from(x.unwrap())));
        let direct = phi.clone().lu().solve(&gv).unwrap();
        assert!((&c - &direct).abs().max() < 1e-10);
        assert!((phi * c - gv).abs().max() < 1e-10);
    }

    #[test]
    fn smoother_with_missing_values() {
        let u: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let spec = BasisSpec::cubic(4).unwrap();
        let mut g = vec![Some(2); 10];
        g[3] = None;
        g[7] = None;
        let c = smooth_gvf(&g, &u, &spec).unwrap();
        assert!(c.iter().all(|v| (v - 2.0).abs() < 1e-10));
        assert!(matches!(
            smooth_gvf(&[None; 10], &u, &spec),
            Err(Error::SmootherSingular(_))
        ));
        let mut sparse = vec![None; 10];
        sparse[0] = Some(1);
        sparse[9] = Some(0);
        assert!(smooth_gvf(&sparse, &u, &spec).is_err());
    }

    #[test]
    fn smoother_is_idempotent() {
        let u: Vec<f64> = (0..15).map(|i| ((i * 7) % 15) as f64).collect::<Vec<_>>();
        let mut u = u;
        u.sort_by(f64::total_cmp);
        let u: Vec<f64> = u.iter().map(|x| x / 14.0).collect();
        let spec = BasisSpec::cubic(6).unwrap();
        let sm = GvfSmoother::new(&u, &spec).unwrap();
        let g: Vec<Dosage> = (0..15).map(|j| Some((j % 3) as u8)).collect();
        let c = sm.coefficients(&g).unwrap();
        let fitted = &sm.phi * &c;
        let sm2 = sm.complete.as_ref().unwrap().tr_mul(&fitted);
        assert!((sm2 - c).abs().max() < 1e-8);
    }

    fn region(m: usize) -> GeneRegion {
        GeneRegion::new(
            "r",
            (0..m).map(|j| 1000.0 + 37.0 * j as f64 + (j * j) as f64).collect(),
            (0..m).map(|j| format!("v{j}")).collect(),
        )
        .unwrap()
    }

    fn rec(id: &str, g: Vec<Dosage>) -> SubjectRecord {
        SubjectRecord::new(id, (1.0, true), (2.0, false), vec![0.5], g).unwrap()
    }

    #[test]
    fn design_zero_genotypes_and_single_carrier() {
        let reg = region(8);
        let gef = BasisSpec::cubic(5).unwrap();
        let effect_only = ModelSpec::new(CopulaKind::Clayton, FlmMode::SmoothEffectOnly { gef }).unwrap();
        let both = ModelSpec::new(
            CopulaKind::Clayton,
            FlmMode::SmoothBoth {
                gvf: BasisSpec::cubic(6).unwrap(),
                gef,
            },
        )
        .unwrap();
        let zero = vec![rec("a", vec![Some(0); 8])];
        for spec in [effect_only, both] {
            let d = build_design(&zero, &reg, &spec).unwrap();
            assert!(d.rows.iter().all(|v| *v == 0.0));
        }
        let mut g = vec![Some(0); 8];
        g[3] = Some(1);
        let d = build_design(&[rec("a", g)], &reg, &effect_only).unwrap();
        let psi = eval_basis(&gef, &reg.standardized_positions()).unwrap().values;
        assert_eq!(d.rows.row(0), psi.row(3));
    }

    #[test]
    fn design_smooth_both_fourier_constant() {
        let reg = region(9);
        let f = BasisSpec::fourier(3).unwrap();
        let spec = ModelSpec::new(CopulaKind::Clayton, FlmMode::SmoothBoth { gvf: f, gef: f }).unwrap();
        let d = build_design(&[rec("a", vec![Some(2); 9])], &reg, &spec).unwrap();
        assert_relative_eq!(d.rows[(0, 0)], 2.0, epsilon = 1e-10);
        assert!(d.rows[(0, 1)].abs() < 1e-10 && d.rows[(0, 2)].abs() < 1e-10);
    }

    #[test]
    fn design_effect_only_rejects_missing() {
        let reg = region(6);
        let spec = ModelSpec::new(
            CopulaKind::Clayton,
            FlmMode::SmoothEffectOnly {
                gef: BasisSpec::cubic(4).unwrap(),
            },
        )
        .unwrap();
        let mut g = vec![Some(1); 6];
        g[2] = None;
        assert_eq!(
            build_design(&[rec("x", g)], &reg, &spec),
            Err(Error::MissingGenotype("x".into()))
        );
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(64);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert_relative_eq!(i, 2.0 / 11.0, epsilon = 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_of_unity(u in 0.0f64..=1.0, order in 2usize..6, extra in 0usize..8) {
                let spec = BasisSpec::bspline(order, order + extra).unwrap();
                let m = eval_basis(&spec, &[u]).unwrap();
                prop_assert!((m.values.row(0).sum() - 1.0).abs() <= 1e-10);
                prop_assert!(m.values.iter().all(|v| *v >= -1e-15));
            }

            #[test]
            fn design_is_linear_in_genotypes(
                g1 in proptest::collection::vec(0u8..=1, 10),
                g2 in proptest::collection::vec(0u8..=1, 10),
                smooth_both in any::<bool>(),
            ) {
                let reg = region(10);
                let gef = BasisSpec::cubic(5).unwrap();
                let mode = if smooth_both {
                    FlmMode::SmoothBoth { gvf: BasisSpec::cubic(7).unwrap(), gef }
                } else {
                    FlmMode::SmoothEffectOnly { gef }
                };
                let spec = ModelSpec::new(CopulaKind::Clayton, mode).unwrap();
                let sum: Vec<Dosage> = g1.iter().zip(&g2).map(|(a, b)| Some(a + b)).collect();
                let recs = vec![
                    rec("a", g1.iter().map(|&g| Some(g)).collect()),
                    rec("b", g2.iter().map(|&g| Some(g)).collect()),
                    rec("c", sum),
                ];
                let d = build_design(&recs, &reg, &spec).unwrap().rows;
                for b in 0..5 {
                    prop_assert!((d[(0, b)] + d[(1, b)] - d[(2, b)]).abs() < 1e-10);
                }
            }
        }
    }
}
