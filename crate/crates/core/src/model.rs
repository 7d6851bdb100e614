//! Two-state model potential
//!
//! `V(x) = (x - 1/2)^4 / 4 * I + c [[x, delta], [delta, -x]]`
//!
//! together with its closed-form spectral data, the Gibbs-averaged
//! mean-field eigenvalue and the canonical state probabilities.

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Threshold on `lambda_1 - lambda_0` below which eigenvectors are
/// treated as undefined.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Relative Gibbs weight that a domain boundary must not exceed.
pub const BOUNDARY_DECAY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    pub c: f64,
    pub delta: f64,
}

impl PotentialParams {
    pub fn new(c: f64, delta: f64) -> Result<Self> {
        if !c.is_finite() || !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need finite c and delta >= 0, got c = {c}, delta = {delta}"
            )));
        }
        Ok(Self { c, delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelContext {
    pub params: PotentialParams,
    pub beta: f64,
    pub mass_ratio: f64,
}

impl ModelContext {
    pub fn new(params: PotentialParams, beta: f64, mass_ratio: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        if !(mass_ratio > 0.0 && mass_ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mass ratio must be positive, got {mass_ratio}"
            )));
        }
        Ok(Self { params, beta, mass_ratio })
    }

    /// Same model at a different mass ratio.
    pub fn with_mass_ratio(&self, mass_ratio: f64) -> Result<Self> {
        Self::new(self.params, self.beta, mass_ratio)
    }
}

/// Real symmetric 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianMatrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl HermitianMatrix2 {
    pub fn new(a11: f64, offdiag: f64, a22: f64) -> Self {
        Self { a11, a12: offdiag, a21: offdiag, a22 }
    }

    pub fn to_mat2(self) -> Mat2 {
        Mat2([[self.a11, self.a12], [self.a21, self.a22]])
    }
}

/// General real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    #[inline]
    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }

    #[inline]
    pub fn add(&self, o: &Mat2) -> Mat2 {
        let mut r = *self;
        for i in 0..2 {
            for j in 0..2 {
                r.0[i][j] += o.0[i][j];
            }
        }
        r
    }

    #[inline]
    pub fn sub(&self, o: &Mat2) -> Mat2 {
        self.add(&o.scale(-1.0))
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Mat2 {
        let mut r = *self;
        for row in r.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        r
    }

    pub fn transpose(&self) -> Mat2 {
        let a = &self.0;
        Mat2([[a[0][0], a[1][0]], [a[0][1], a[1][1]]])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Which classical energy surface drives a flow or weights a density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Surface {
    MeanField,
    Ground,
    Excited,
}

#[inline]
fn quartic(x: f64) -> f64 {
    let y = x - 0.5;
    0.25 * y * y * y * y
}

pub fn eval_potential(x: f64, params: &PotentialParams) -> HermitianMatrix2 {
    let q = quartic(x);
    let c = params.c;
    HermitianMatrix2::new(q + c * x, c * params.delta, q - c * x)
}

/// Ordered eigenvalues `(lambda_0, lambda_1)` of `V(x)`.
#[inline]
pub fn eigenvalues(x: f64, params: &PotentialParams) -> (f64, f64) {
    let q = quartic(x);
    let r = params.c.abs() * x.hypot(params.delta);
    (q - r, q + r)
}

/// Derivatives of the ordered eigenvalues.
#[inline]
pub fn eigenvalue_gradients(x: f64, params: &PotentialParams) -> Result<(f64, f64)> {
    let y = x - 0.5;
    let dq = y * y * y;
    if params.c == 0.0 {
        return Ok((dq, dq));
    }
    let r = x.hypot(params.delta);
    if r == 0.0 {
        return Err(Error::SingularGradient { x });
    }
    let dr = params.c.abs() * x / r;
    Ok((dq - dr, dq + dr))
}

fn unit_eigenvector(m: &HermitianMatrix2, lambda: f64) -> [f64; 2] {
    // two candidate kernel vectors of (m - lambda I); use the better conditioned one
    let u = [m.a12, lambda - m.a11];
    let v = [lambda - m.a22, m.a21];
    let nu = u[0].hypot(u[1]);
    let nv = v[0].hypot(v[1]);
    let (w, n) = if nu >= nv { (u, nu) } else { (v, nv) };
    let mut w = [w[0] / n, w[1] / n];
    let lead = if w[0] != 0.0 { w[0] } else { w[1] };
    if lead < 0.0 {
        w = [-w[0], -w[1]];
    }
    w
}

/// Orthogonal matrix whose columns are the unit eigenvectors of `V(x)`,
/// ordered by eigenvalue. The first nonzero entry of each column is positive.
pub fn eigenvector_matrix(x: f64, params: &PotentialParams) -> Result<Mat2> {
    let (l0, l1) = eigenvalues(x, params);
    let gap = l1 - l0;
    if gap < DEGENERACY_TOL {
        return Err(Error::DegenerateEigenvectors { x, gap });
    }
    let m = eval_potential(x, params);
    let v0 = unit_eigenvector(&m, l0);
    let v1 = unit_eigenvector(&m, l1);
    Ok(Mat2([[v0[0], v1[0]], [v0[1], v1[1]]]))
}

/// As [`eigenvector_matrix`], with the identity returned at degeneracies.
pub fn eigenvector_matrix_or_identity(x: f64, params: &PotentialParams) -> Mat2 {
    eigenvector_matrix(x, params).unwrap_or(Mat2::IDENTITY)
}

/// Gibbs weight of the upper state relative to the pair, computed without overflow.
#[inline]
fn upper_weight(gap: f64, beta: f64) -> f64 {
    let e = (-beta * gap).exp();
    e / (1.0 + e)
}

/// Gibbs average of the two eigenvalues.
pub fn mean_field_potential(x: f64, ctx: &ModelContext) -> f64 {
    let (l0, l1) = eigenvalues(x, &ctx.params);
    l0 + upper_weight(l1 - l0, ctx.beta) * (l1 - l0)
}

/// Derivative of [`mean_field_potential`].
pub fn mean_field_gradient(x: f64, ctx: &ModelContext) -> Result<f64> {
    let (l0, l1) = eigenvalues(x, &ctx.params);
    let (d0, d1) = eigenvalue_gradients(x, &ctx.params)?;
    let w1 = upper_weight(l1 - l0, ctx.beta);
    let w0 = 1.0 - w1;
    // d/dx of sum w_i l_i; the weight derivative reduces to -beta w0 w1 (l1-l0)(d1-d0)
    Ok(w0 * d0 + w1 * d1 - ctx.beta * w0 * w1 * (l1 - l0) * (d1 - d0))
}

/// Energy on a given classical surface. `Excited` has no single surface and is rejected.
pub fn surface_potential(x: f64, ctx: &ModelContext, s: Surface) -> f64 {
    match s {
        Surface::MeanField => mean_field_potential(x, ctx),
        Surface::Ground | Surface::Excited => eigenvalues(x, &ctx.params).0,
    }
}

/// Unnormalized Gibbs weights `exp(-beta (lambda_i - shift))` on every node,
/// where `shift` is the minimum of `lambda_0` over the nodes.
pub(crate) fn shifted_gibbs_weights(ctx: &ModelContext, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lams: Vec<(f64, f64)> = xs.iter().map(|&x| eigenvalues(x, &ctx.params)).collect();
    let shift = lams.iter().fold(f64::INFINITY, |m, l| m.min(l.0));
    let w0 = lams.iter().map(|l| (-ctx.beta * (l.0 - shift)).exp()).collect();
    let w1 = lams.iter().map(|l| (-ctx.beta * (l.1 - shift)).exp()).collect();
    (w0, w1)
}

/// Fails with `DomainTooSmall` if a weight profile is not negligible at both ends.
pub(crate) fn check_boundary_decay(what: &'static str, w: &[f64]) -> Result<()> {
    let peak = w.iter().fold(0.0f64, |m, v| m.max(*v));
    let edge = w[0].max(w[w.len() - 1]);
    let rel = if peak > 0.0 { edge / peak } else { 1.0 };
    if rel >= BOUNDARY_DECAY_TOL || !rel.is_finite() {
        return Err(Error::DomainTooSmall { what, weight: rel });
    }
    Ok(())
}

/// Canonical probabilities `(q0, q1)` of the two electronic states.
///
/// The boundary check is relative to the peak weight so that it does not
/// depend on the energy origin.
pub fn state_probabilities(ctx: &ModelContext, grid: &SpatialGrid) -> Result<(f64, f64)> {
    let xs = grid.nodes();
    let (w0, w1) = shifted_gibbs_weights(ctx, &xs);
    check_boundary_decay("ground-state Gibbs weight", &w0)?;
    let z0 = grid.integrate(&w0);
    let z1 = grid.integrate(&w1);
    let q1 = z1 / (z0 + z1);
    Ok((1.0 - q1, q1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(beta: f64, c: f64, delta: f64) -> ModelContext {
        ModelContext::new(PotentialParams::new(c, delta).unwrap(), beta, 1.0).unwrap()
    }

    const CASES: [(f64, f64, f64); 5] =
        [(3.3, 1.0, 1.0), (1.0, 0.1, 1.0), (1.0, 0.1, 0.01), (0.28, 1.0, 1.0), (1.0, 1.0, 0.1)];

    #[test]
    fn potential_examples() {
        let v = eval_potential(0.0, &PotentialParams { c: 1.0, delta: 1.0 });
        assert_eq!(v, HermitianMatrix2::new(0.015625, 1.0, 0.015625));
        let v = eval_potential(0.5, &PotentialParams { c: 0.0, delta: 1.0 });
        assert_eq!(v.to_mat2(), Mat2::ZERO);
        let v = eval_potential(1.0, &PotentialParams { c: 1.0, delta: 0.1 });
        assert_eq!(v, HermitianMatrix2::new(1.0 / 64.0 + 1.0, 0.1, 1.0 / 64.0 - 1.0));
    }

    #[test]
    fn eigenvalue_examples() {
        let (a, b) = eigenvalues(0.0, &PotentialParams { c: 1.0, delta: 1.0 });
        assert_eq!((a, b), (-0.984375, 1.015625));
        let (a, b) = eigenvalues(0.3, &PotentialParams { c: 1.0, delta: 0.1 });
        assert!((b - a - 2.0 * 0.1f64.sqrt()).abs() < 1e-15);
        assert!((b - a - 0.6325).abs() < 1e-4);
        let (a, b) = eigenvalues(2.0, &PotentialParams { c: 0.0, delta: 0.3 });
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_examples() {
        let p = PotentialParams { c: 1.0, delta: 0.7 };
        assert_eq!(eigenvalue_gradients(0.0, &p).unwrap(), (-0.125, -0.125));
        let p = PotentialParams { c: 1.0, delta: 1.0 };
        let (g0, g1) = eigenvalue_gradients(0.5, &p).unwrap();
        let h = 1e-6;
        let fd0 = (eigenvalues(0.5 + h, &p).0 - eigenvalues(0.5 - h, &p).0) / (2.0 * h);
        let fd1 = (eigenvalues(0.5 + h, &p).1 - eigenvalues(0.5 - h, &p).1) / (2.0 * h);
        assert!((g0 - fd0).abs() < 1e-8 && (g1 - fd1).abs() < 1e-8);
        assert!((g0 + 0.5 / 1.25f64.sqrt()).abs() < 1e-15);
        let p0 = PotentialParams { c: 0.0, delta: 0.0 };
        assert_eq!(eigenvalue_gradients(1.5, &p0).unwrap(), (1.0, 1.0));
        let ps = PotentialParams { c: 1.0, delta: 0.0 };
        assert!(matches!(eigenvalue_gradients(0.0, &ps), Err(Error::SingularGradient { .. })));
    }

    #[test]
    fn eigenvector_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = eigenvector_matrix(0.0, &PotentialParams { c: 1.0, delta: 1.0 }).unwrap();
        let expect = Mat2([[s, s], [-s, s]]);
        assert!(psi.sub(&expect).max_abs() < 1e-15);
        let p0 = PotentialParams { c: 0.0, delta: 1.0 };
        assert!(matches!(eigenvector_matrix(0.3, &p0), Err(Error::DegenerateEigenvectors { .. })));
        assert_eq!(eigenvector_matrix_or_identity(0.3, &p0), Mat2::IDENTITY);
        let p = PotentialParams { c: 1.0, delta: 0.1 };
        let psi = eigenvector_matrix(1.0, &p).unwrap();
        let (l0, l1) = eigenvalues(1.0, &p);
        let r = eval_potential(1.0, &p).to_mat2().mul(&psi).sub(&psi.mul(&Mat2::diag(l0, l1)));
        assert!(r.max_abs() < 1e-12);
    }

    #[test]
    fn mean_field_examples() {
        let c0 = ctx(1.0, 0.0, 1.0);
        assert_eq!(mean_field_potential(1.3, &c0), quartic(1.3));
        let ce = ctx(200.0, 1.0, 0.1);
        assert!(mean_field_potential(1.0, &ce) - eigenvalues(1.0, &ce.params).0 < 1e-10);
        // lambda_{0,1}(0) = 1/64 -+ 0.1
        let cx = ctx(1.0, 1.0, 0.1);
        let closed = 1.0 / 64.0 - 0.1 * 0.1f64.tanh();
        assert!((mean_field_potential(0.0, &cx) - closed).abs() < 1e-15);
        assert!((closed - 0.005659).abs() < 1e-6);
    }

    #[test]
    fn mean_field_gradient_limits() {
        let c0 = ctx(1.0, 0.0, 1.0);
        assert_eq!(mean_field_gradient(0.9, &c0).unwrap(), 0.4f64.powi(3));
        let hot = ctx(1e-8, 1.0, 0.3);
        for &x in &[-1.0, 0.2, 1.7] {
            let (a, b) = eigenvalue_gradients(x, &hot.params).unwrap();
            assert!((mean_field_gradient(x, &hot).unwrap() - 0.5 * (a + b)).abs() < 1e-6);
        }
    }

    #[test]
    fn state_probability_examples() {
        let g = SpatialGrid::new(-6.0, 6.0, 2400).unwrap();
        let (_, q1) = state_probabilities(&ctx(1.0, 1.0, 0.1), &g).unwrap();
        assert!((q1 - 0.16).abs() < 0.005, "{q1}");
        let (_, q1) = state_probabilities(&ctx(3.3, 1.0, 1.0), &g).unwrap();
        assert!((q1 - 0.0002).abs() < 0.00005, "{q1}");
        let (q0, q1) = state_probabilities(&ctx(1.0, 0.0, 1.0), &g).unwrap();
        assert_eq!((q0, q1), (0.5, 0.5));
    }

    #[test]
    fn narrow_domain_is_rejected() {
        let g = SpatialGrid::new(-1.0, 1.0, 100).unwrap();
        assert!(matches!(
            state_probabilities(&ctx(1.0, 1.0, 0.1), &g),
            Err(Error::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn mean_field_is_bracketed_on_presets() {
        for &(b, c, d) in &CASES {
            let cx = ctx(b, c, d);
            for i in 0..1000 {
                let x = -6.0 + 12.0 * i as f64 / 999.0;
                let (l0, l1) = eigenvalues(x, &cx.params);
                let m = mean_field_potential(x, &cx);
                assert!(l0 <= m && m <= l1);
            }
        }
    }

    proptest! {
        #[test]
        fn mean_field_decreases_with_beta(
            x in -6.0f64..6.0, b1 in 0.01f64..20.0, db in 0.0f64..20.0,
            c in -2.0f64..2.0, d in 0.0f64..2.0,
        ) {
            let p = PotentialParams::new(c, d).unwrap();
            let m1 = mean_field_potential(x, &ModelContext::new(p, b1, 1.0).unwrap());
            let m2 = mean_field_potential(x, &ModelContext::new(p, b1 + db, 1.0).unwrap());
            prop_assert!(m2 <= m1 + 1e-12);
        }

        #[test]
        fn eigenvectors_are_orthonormal_and_diagonalize(
            x in -6.0f64..6.0, c in 0.05f64..3.0, d in 0.01f64..2.0,
        ) {
            let p = PotentialParams::new(c, d).unwrap();
            let psi = eigenvector_matrix(x, &p).unwrap();
            prop_assert!(psi.transpose().mul(&psi).sub(&Mat2::IDENTITY).max_abs() < 1e-12);
            let (l0, l1) = eigenvalues(x, &p);
            let r = eval_potential(x, &p).to_mat2().mul(&psi).sub(&psi.mul(&Mat2::diag(l0, l1)));
            prop_assert!(r.max_abs() < 1e-10);
        }

        #[test]
        fn mean_field_gradient_matches_finite_differences(
            case in 0usize..5, x in -3.0f64..3.0,
        ) {
            let (b, c, d) = CASES[case];
            let cx = ctx(b, c, d);
            let h = 1e-6;
            let fd = (mean_field_potential(x + h, &cx) - mean_field_potential(x - h, &cx)) / (2.0 * h);
            let g = mean_field_gradient(x, &cx).unwrap();
            prop_assert!((g - fd).abs() <= 1e-6 * g.abs().max(1.0), "g={} fd={}", g, fd);
        }
    }
}
