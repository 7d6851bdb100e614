//! Path-integral Monte Carlo for the matrix-valued Weyl symbol of the
//! Gibbs operator `exp(-beta H)`.
//!
//! For a standard Brownian motion `W` on `[0, beta]` and the centred path
//! `Wb_t = W_beta / 2 - W_t`, the symbol is the expectation of
//! `exp(-i W_beta p) (U+ + U-) / 2`, where `U+-` are the time-ordered
//! products driven by `V(x +- Wb_t / sqrt(M))`.
//!
//! Paths are discretized on `J` steps. Brownian values are drawn on a grid
//! of `2J` half steps so that the value at each step midpoint is an exact
//! sample, and each step multiplies by `exp(-dt V)` frozen at that
//! midpoint.
//!
//! Every path `k` draws from its own ChaCha8 stream (`seed`, stream `k`),
//! so results do not depend on the number of worker threads and the same
//! Brownian paths are reused for every mass ratio.

use crate::error::{Error, Result};
use crate::model::{eigenvalues, eigenvector_matrix_or_identity, eval_potential, Mat2, ModelContext, PotentialParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl PathConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        if n_paths < 1 || n_steps < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least one path and two time steps, got {n_paths} and {n_steps}"
            )));
        }
        Ok(Self { n_paths, n_steps, seed })
    }
}

/// A 2x2 potential whose short-time exponential can be evaluated cheaply.
pub trait MatrixPotential: Sync {
    /// `exp(-t V(y))`.
    fn exp_neg(&self, y: f64, t: f64) -> Mat2;
}

/// The two-state model potential, with a closed-form exponential: for
/// `V = q I + c B` with `B^2 = r^2 I`,
/// `exp(-t V) = exp(-t q) (cosh(t c r) I - sinh(t c r) / r B)`.
#[derive(Debug, Clone, Copy)]
pub struct ModelPotential(pub PotentialParams);

impl MatrixPotential for ModelPotential {
    #[inline]
    fn exp_neg(&self, y: f64, t: f64) -> Mat2 {
        let (q, u) = model_exp_parts(&self.0, y, t);
        u.scale((-t * q).exp())
    }
}

/// Quartic part and coupling factor of `exp(-t V(y))`.
#[inline(always)]
fn model_exp_parts(params: &PotentialParams, y: f64, t: f64) -> (f64, Mat2) {
    let s = y - 0.5;
    let q = 0.25 * s * s * s * s;
    let d = params.delta;
    let r = y.hypot(d);
    let a = t * params.c * r;
    let (ch, shr) = if r > 1e-300 {
        let e = a.exp();
        let ei = 1.0 / e;
        (0.5 * (e + ei), 0.5 * (e - ei) / r)
    } else {
        (1.0, t * params.c)
    };
    (q, Mat2([[ch - shr * y, -shr * d], [-shr * d, ch + shr * y]]))
}

/// A constant symmetric potential, exponentiated through its eigenbasis.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPotential(pub Mat2);

impl MatrixPotential for ConstantPotential {
    fn exp_neg(&self, _y: f64, t: f64) -> Mat2 {
        sym_exp(&self.0, -t)
    }
}

/// Scalar harmonic potential `y^2 / 2` acting on both channels.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicPotential;

impl MatrixPotential for HarmonicPotential {
    fn exp_neg(&self, y: f64, t: f64) -> Mat2 {
        Mat2::IDENTITY.scale((-0.5 * t * y * y).exp())
    }
}

/// `exp(s A)` for a real symmetric 2x2 matrix.
pub fn sym_exp(a: &Mat2, s: f64) -> Mat2 {
    let m = &a.0;
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half = 0.5 * (m[0][0] - m[1][1]);
    let r = half.hypot(m[0][1]);
    let (ch, shr) = if r > 1e-300 {
        ((s * r).cosh(), (s * r).sinh() / r)
    } else {
        (1.0, s)
    };
    // A = mean I + B with B^2 = r^2 I
    let b = Mat2([[half, m[0][1]], [m[1][0], -half]]);
    Mat2::IDENTITY.scale(ch).add(&b.scale(shr)).scale((s * mean).exp())
}

/// `exp(-beta (p^2/2 + V(x)))` for the model.
pub fn classical_gibbs_symbol(x: f64, p: f64, ctx: &ModelContext) -> Mat2 {
    let v = eval_potential(x, &ctx.params).to_mat2();
    sym_exp(&v, -ctx.beta).scale((-0.5 * ctx.beta * p * p).exp())
}

/// Monte Carlo mean of a complex 2x2 matrix with per-entry standard errors
/// of the real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolEstimate {
    pub mean_re: Mat2,
    pub mean_im: Mat2,
    pub std_err_re: Mat2,
    pub std_err_im: Mat2,
    pub n_paths: usize,
}

impl SymbolEstimate {
    /// Combined standard error of the complex entry `(i, j)`.
    pub fn std_err(&self, i: usize, j: usize) -> f64 {
        self.std_err_re.0[i][j].hypot(self.std_err_im.0[i][j])
    }

    pub fn max_std_err(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max(self.std_err(i, j));
            }
        }
        m
    }

    /// Distance of entry `(i, j)` from a reference value, in standard errors.
    pub fn sigma_distance(&self, i: usize, j: usize, re: f64, im: f64) -> f64 {
        let d = (self.mean_re.0[i][j] - re).hypot(self.mean_im.0[i][j] - im);
        let se = self.std_err(i, j);
        if se > 0.0 {
            d / se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `max_ij |rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let dr = self.mean_re.0[i][j] - self.mean_re.0[j][i];
                let di = self.mean_im.0[i][j] + self.mean_im.0[j][i];
                m = m.max(dr.hypot(di));
            }
        }
        m
    }
}

/// Running mean and sum of squared deviations for 8 real channels.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: [f64; 8],
    m2: [f64; 8],
}

impl Moments {
    #[inline]
    fn push(&mut self, v: &[f64; 8]) {
        self.n += 1.0;
        for ((x, mean), m2) in v.iter().zip(&mut self.mean).zip(&mut self.m2) {
            let d = x - *mean;
            *mean += d / self.n;
            *m2 += d * (x - *mean);
        }
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        for k in 0..8 {
            let d = o.mean[k] - self.mean[k];
            self.mean[k] += d * o.n / n;
            self.m2[k] += o.m2[k] + d * d * self.n * o.n / n;
        }
        self.n = n;
    }

    fn into_estimate(self) -> SymbolEstimate {
        let mut est = SymbolEstimate {
            mean_re: Mat2::ZERO,
            mean_im: Mat2::ZERO,
            std_err_re: Mat2::ZERO,
            std_err_im: Mat2::ZERO,
            n_paths: self.n as usize,
        };
        for k in 0..4 {
            let (i, j) = (k / 2, k % 2);
            let se = |m2: f64| if self.n > 1.0 { (m2 / (self.n - 1.0) / self.n).sqrt() } else { 0.0 };
            est.mean_re.0[i][j] = self.mean[k];
            est.mean_im.0[i][j] = self.mean[4 + k];
            est.std_err_re.0[i][j] = se(self.m2[k]);
            est.std_err_im.0[i][j] = se(self.m2[4 + k]);
        }
        est
    }
}

const CHUNK: usize = 1024;

/// Draws the Brownian path of path index `k` on `2J` half steps and returns
/// `(W_beta, midpoint values of Wb)`.
fn brownian_midpoints(cfg: &PathConfig, beta: f64, k: usize, half: &mut Vec<f64>, mids: &mut Vec<f64>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(k as u64);
    let j = cfg.n_steps;
    let sd = (0.5 * beta / j as f64).sqrt();
    half.clear();
    half.push(0.0);
    let mut w = 0.0;
    for _ in 0..2 * j {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += sd * z;
        half.push(w);
    }
    let wb = w;
    mids.clear();
    mids.extend((0..j).map(|s| 0.5 * wb - half[2 * s + 1]));
    wb
}

/// `(U+ + U-) / 2` along the sampled path.
fn symmetrized_product<P: MatrixPotential + ?Sized>(pot: &P, x: f64, sigma: f64, dt: f64, mids: &[f64]) -> Mat2 {
    let mut up = Mat2::IDENTITY;
    let mut um = Mat2::IDENTITY;
    for &m in mids {
        up = up.mul(&pot.exp_neg(x + sigma * m, dt));
        um = um.mul(&pot.exp_neg(x - sigma * m, dt));
    }
    up.add(&um).scale(0.5)
}

/// Specialization for the model that keeps the scalar quartic factor out of
/// the matrix product and applies it once per path.
fn symmetrized_product_model(params: &PotentialParams, x: f64, sigma: f64, dt: f64, mids: &[f64]) -> Mat2 {
    let mut up = Mat2::IDENTITY;
    let mut um = Mat2::IDENTITY;
    let (mut qp, mut qm) = (0.0, 0.0);
    for &m in mids {
        let (a, ea) = model_exp_parts(params, x + sigma * m, dt);
        let (b, eb) = model_exp_parts(params, x - sigma * m, dt);
        qp += a;
        qm += b;
        up = up.mul(&ea);
        um = um.mul(&eb);
    }
    up.scale((-dt * qp).exp()).add(&um.scale((-dt * qm).exp())).scale(0.5)
}

enum Target<'a, P: ?Sized> {
    Generic(&'a P),
    Model(PotentialParams),
}

/// Core sampler. Each sample is `scale * exp(-i W_beta p) (R - shift)` where
/// `R = (U+ + U-)/2`.
#[allow(clippy::too_many_arguments)]
fn sample_symbol<P: MatrixPotential + ?Sized>(
    target: Target<'_, P>,
    x: f64,
    p: f64,
    beta: f64,
    mass_ratio: f64,
    cfg: &PathConfig,
    shift: Mat2,
    scale: f64,
) -> SymbolEstimate {
    let sigma = 1.0 / mass_ratio.sqrt();
    let dt = beta / cfg.n_steps as f64;
    let n_chunks = cfg.n_paths.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut mom = Moments::default();
            let mut half = Vec::with_capacity(2 * cfg.n_steps + 1);
            let mut mids = Vec::with_capacity(cfg.n_steps);
            for k in c * CHUNK..((c + 1) * CHUNK).min(cfg.n_paths) {
                let wb = brownian_midpoints(cfg, beta, k, &mut half, &mut mids);
                let r = match &target {
                    Target::Generic(pot) => symmetrized_product(*pot, x, sigma, dt, &mids),
                    Target::Model(params) => symmetrized_product_model(params, x, sigma, dt, &mids),
                };
                let d = r.sub(&shift);
                let (s, co) = (wb * p).sin_cos();
                let mut v = [0.0; 8];
                for e in 0..4 {
                    let val = d.0[e / 2][e % 2] * scale;
                    v[e] = co * val;
                    v[4 + e] = -s * val;
                }
                mom.push(&v);
            }
            mom
        })
        .collect();
    let mut total = Moments::default();
    for m in &parts {
        total.merge(m);
    }
    total.into_estimate()
}

/// Plain Monte Carlo estimate of the Gibbs symbol at `(x, p)`.
pub fn estimate_symbol(x: f64, p: f64, ctx: &ModelContext, cfg: &PathConfig) -> SymbolEstimate {
    sample_symbol::<ModelPotential>(Target::Model(ctx.params), x, p, ctx.beta, ctx.mass_ratio, cfg, Mat2::ZERO, 1.0)
}

/// Plain estimate for an arbitrary potential.
pub fn estimate_symbol_with<P: MatrixPotential>(
    pot: &P,
    x: f64,
    p: f64,
    beta: f64,
    mass_ratio: f64,
    cfg: &PathConfig,
) -> SymbolEstimate {
    sample_symbol(Target::Generic(pot), x, p, beta, mass_ratio, cfg, Mat2::ZERO, 1.0)
}

/// Estimate of `M (rho - exp(-beta H))` at `(x, p)`.
///
/// Each path contributes `M exp(-i W_beta p) ((U+ + U-)/2 - exp(-beta V(x)))`.
/// The subtracted term has expectation `exp(-beta H)` because
/// `E[exp(-i W_beta p)] = exp(-beta p^2 / 2)`, and it cancels the leading
/// order of every path, so the spread of the samples stays bounded as `M`
/// grows. A plain difference of two estimates would carry a standard error
/// proportional to `M`.
pub fn estimate_symbol_correction(x: f64, p: f64, ctx: &ModelContext, cfg: &PathConfig) -> SymbolEstimate {
    let frozen = sym_exp(&eval_potential(x, &ctx.params).to_mat2(), -ctx.beta);
    sample_symbol::<ModelPotential>(
        Target::Model(ctx.params),
        x,
        p,
        ctx.beta,
        ctx.mass_ratio,
        cfg,
        frozen,
        ctx.mass_ratio,
    )
}

/// Generic-potential version of [`estimate_symbol_correction`].
pub fn estimate_symbol_correction_with<P: MatrixPotential>(
    pot: &P,
    x: f64,
    p: f64,
    beta: f64,
    mass_ratio: f64,
    cfg: &PathConfig,
) -> SymbolEstimate {
    let frozen = pot.exp_neg(x, beta);
    sample_symbol(Target::Generic(pot), x, p, beta, mass_ratio, cfg, frozen, mass_ratio)
}

/// Segment counts of the quadratures used by the correction formulas.
pub const LIMIT_SEGMENTS: usize = 200;
pub const LIMIT_OUTER_SEGMENTS: usize = 400;

/// Spectral data of `V(x)` for fast exponentials `exp(-s V)`.
struct Spectral {
    psi: Mat2,
    lam: (f64, f64),
}

impl Spectral {
    fn new(x: f64, params: &PotentialParams) -> Self {
        Self { psi: eigenvector_matrix_or_identity(x, params), lam: eigenvalues(x, params) }
    }

    #[inline]
    fn exp_neg(&self, s: f64) -> Mat2 {
        let d = Mat2::diag((-s * self.lam.0).exp(), (-s * self.lam.1).exp());
        self.psi.mul(&d).mul(&self.psi.transpose())
    }
}

fn simpson_w(n: usize, i: usize) -> f64 {
    if i == 0 || i == n {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// `int_0^beta int_0^t k(s, t) e^{-sV} A e^{-(t-s)V} A e^{-(beta-t)V} ds dt`
/// and `int_0^beta m(t) e^{-tV} B e^{-(beta-t)V} dt` by nested composite Simpson.
#[allow(clippy::too_many_arguments)]
fn correction_integrals<K, G>(
    spec: &Spectral,
    beta: f64,
    a: &Mat2,
    b: &Mat2,
    segments: usize,
    outer: usize,
    k: K,
    m: G,
) -> Mat2
where
    K: Fn(f64, f64) -> f64,
    G: Fn(f64) -> f64,
{
    let ht = beta / outer as f64;
    let mut double = Mat2::ZERO;
    for i in 1..=outer {
        let t = i as f64 * ht;
        let hs = t / segments as f64;
        let right = a.mul(&spec.exp_neg(beta - t));
        let mut inner = Mat2::ZERO;
        for j in 0..=segments {
            let s = j as f64 * hs;
            let term = spec.exp_neg(s).mul(a).mul(&spec.exp_neg(t - s)).mul(&right);
            inner = inner.add(&term.scale(simpson_w(segments, j) * k(s, t)));
        }
        double = double.add(&inner.scale(hs / 3.0 * simpson_w(outer, i) * ht / 3.0));
    }
    let h = beta / segments as f64;
    let mut single = Mat2::ZERO;
    for i in 0..=segments {
        let t = i as f64 * h;
        let term = spec.exp_neg(t).mul(b).mul(&spec.exp_neg(beta - t));
        single = single.add(&term.scale(simpson_w(segments, i) * m(t)));
    }
    double.add(&single.scale(h / 3.0))
}

fn derivatives(x: f64, params: &PotentialParams) -> (Mat2, Mat2) {
    let y = x - 0.5;
    let d1 = Mat2::IDENTITY.scale(y * y * y).add(&Mat2::diag(params.c, -params.c));
    let d2 = Mat2::IDENTITY.scale(3.0 * y * y);
    (d1, d2)
}

/// Closed-form candidate for `lim M (rho - exp(-beta H))` consisting of the
/// two momentum-dependent terms
///
/// `e^{-beta p^2/2} [ int (beta/2 - t)^2 e^{-tV} p V'' p e^{-(beta-t)V} dt
///   + int int_{s<t} (beta/2 - s)(beta/2 - t) e^{-sV} V'p e^{-(t-s)V} V'p e^{-(beta-t)V} ds dt ]`.
///
/// This expression vanishes at `p = 0`. It is not the complete limit: see
/// [`full_correction_limit`].
pub fn correction_limit(x: f64, p: f64, ctx: &ModelContext) -> Mat2 {
    correction_limit_with(x, p, ctx, LIMIT_SEGMENTS, LIMIT_OUTER_SEGMENTS)
}

pub fn correction_limit_with(x: f64, p: f64, ctx: &ModelContext, segments: usize, outer: usize) -> Mat2 {
    let beta = ctx.beta;
    let spec = Spectral::new(x, &ctx.params);
    let (d1, d2) = derivatives(x, &ctx.params);
    let a = d1.scale(p);
    let b = d2.scale(p * p);
    let h = 0.5 * beta;
    let v = correction_integrals(&spec, beta, &a, &b, segments, outer, |s, t| (h - s) * (h - t), |t| (h - t) * (h - t));
    v.scale((-0.5 * beta * p * p).exp())
}

/// Complete limit of `M (rho - exp(-beta H))` as `M -> infinity`, obtained by
/// expanding the path products to second order in `M^{-1/2}` and taking the
/// Gaussian expectation, including the Brownian covariance terms:
///
/// `e^{-beta p^2/2} [ int int_{s<t} (beta/4 + (s-t)/2 - p^2 (beta/2-s)(beta/2-t))
///     e^{-sV} V' e^{-(t-s)V} V' e^{-(beta-t)V} ds dt
///   - 1/2 int (beta/4 - p^2 (beta/2-t)^2) e^{-tV} V'' e^{-(beta-t)V} dt ]`.
///
/// For `V = x^2/2` this reproduces the `hbar^2` term of the Mehler formula,
/// `e^{-beta H} (beta^3 (x^2 + p^2)/24 - beta^2/8)`.
pub fn full_correction_limit(x: f64, p: f64, ctx: &ModelContext) -> Mat2 {
    full_correction_limit_with(x, p, ctx, LIMIT_SEGMENTS, LIMIT_OUTER_SEGMENTS)
}

pub fn full_correction_limit_with(x: f64, p: f64, ctx: &ModelContext, segments: usize, outer: usize) -> Mat2 {
    let beta = ctx.beta;
    let spec = Spectral::new(x, &ctx.params);
    let (d1, d2) = derivatives(x, &ctx.params);
    let h = 0.5 * beta;
    let p2 = p * p;
    let v = correction_integrals(
        &spec,
        beta,
        &d1,
        &d2,
        segments,
        outer,
        |s, t| 0.5 * h + 0.5 * (s - t) - p2 * (h - s) * (h - t),
        |t| -0.5 * (0.5 * h - p2 * (h - t) * (h - t)),
    );
    v.scale((-0.5 * beta * p2).exp())
}

/// One entry of an asymptotics comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsRow {
    pub mass_ratio: f64,
    pub entry: (usize, usize),
    pub re_mean: f64,
    pub im_mean: f64,
    pub std_err: f64,
    pub re_limit: f64,
    pub im_limit: f64,
    pub sigma_distance: f64,
    pub sigma_distance_full: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    pub x: f64,
    pub p: f64,
    pub config: PathConfig,
    pub worker_threads: usize,
    pub limit: Mat2,
    pub full_limit: Mat2,
    pub rows: Vec<AsymptoticsRow>,
}

impl AsymptoticsReport {
    /// Largest deviation from [`correction_limit`] at the given mass ratio, in standard errors.
    pub fn worst_sigma(&self, mass_ratio: f64) -> f64 {
        self.rows.iter().filter(|r| r.mass_ratio == mass_ratio).map(|r| r.sigma_distance).fold(0.0, f64::max)
    }

    /// Largest deviation from [`full_correction_limit`] at the given mass ratio.
    pub fn worst_sigma_full(&self, mass_ratio: f64) -> f64 {
        self.rows.iter().filter(|r| r.mass_ratio == mass_ratio).map(|r| r.sigma_distance_full).fold(0.0, f64::max)
    }
}

/// Compares `M (rho_hat - exp(-beta H))` with the correction formulas for each
/// mass ratio, reusing the same Brownian paths for every `M`.
pub fn verify_asymptotics(
    x: f64,
    p: f64,
    ctx: &ModelContext,
    cfg: &PathConfig,
    mass_ratios: &[f64],
) -> Result<AsymptoticsReport> {
    if mass_ratios.len() < 2 {
        return Err(Error::TooFewSamples { got: mass_ratios.len() });
    }
    let limit = correction_limit(x, p, ctx);
    let full_limit = full_correction_limit(x, p, ctx);
    let mut rows = Vec::new();
    for &m in mass_ratios {
        let c = ctx.with_mass_ratio(m)?;
        let est = estimate_symbol_correction(x, p, &c, cfg);
        for i in 0..2 {
            for j in 0..2 {
                rows.push(AsymptoticsRow {
                    mass_ratio: m,
                    entry: (i + 1, j + 1),
                    re_mean: est.mean_re.0[i][j],
                    im_mean: est.mean_im.0[i][j],
                    std_err: est.std_err(i, j),
                    re_limit: limit.0[i][j],
                    im_limit: 0.0,
                    sigma_distance: est.sigma_distance(i, j, limit.0[i][j], 0.0),
                    sigma_distance_full: est.sigma_distance(i, j, full_limit.0[i][j], 0.0),
                });
            }
        }
    }
    Ok(AsymptoticsReport {
        x,
        p,
        config: *cfg,
        worker_threads: rayon::current_num_threads(),
        limit,
        full_limit,
        rows,
    })
}
