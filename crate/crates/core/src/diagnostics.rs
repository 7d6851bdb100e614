//! Error functionals, error norms between observables, convergence fits
//! and the Green–Kubo integral.

use crate::error::{Error, Result};
use crate::grid::{simpson_2d, simpson_weights, ordered_dot, PhaseGrid, SpatialGrid};
use crate::model::{
    check_boundary_decay, eigenvalue_gradients, eigenvalues, mean_field_gradient, mean_field_potential,
    shifted_gibbs_weights, state_probabilities, ModelContext, PotentialParams,
};
use crate::quantum::{
    build_hamiltonian, eigendecompose, equilibrium_density, CorrelationSeries, DensityProfile,
};
use crate::classical::density_mf;

/// Gibbs average over both surfaces of a per-surface quantity `f(x, i)`.
fn surface_average<F: Fn(f64, usize) -> Result<f64>>(ctx: &ModelContext, grid: &SpatialGrid, f: F) -> Result<f64> {
    let xs = grid.nodes();
    let (w0, w1) = shifted_gibbs_weights(ctx, &xs);
    check_boundary_decay("ground-state Gibbs weight", &w0)?;
    let mut num = Vec::with_capacity(xs.len());
    let mut den = Vec::with_capacity(xs.len());
    for (k, &x) in xs.iter().enumerate() {
        num.push(w0[k] * f(x, 0)? + w1[k] * f(x, 1)?);
        den.push(w0[k] + w1[k]);
    }
    Ok(grid.integrate(&num) / grid.integrate(&den))
}

/// Gibbs-weighted variance of the eigenvalues around the mean-field potential.
pub fn epsilon1_sq(ctx: &ModelContext, grid: &SpatialGrid) -> Result<f64> {
    surface_average(ctx, grid, |x, i| {
        let (l0, l1) = eigenvalues(x, &ctx.params);
        let d = [l0, l1][i] - mean_field_potential(x, ctx);
        Ok(d * d)
    })
}

/// Gibbs-weighted mean squared difference between eigenvalue gradients and
/// the mean-field force.
pub fn epsilon2_sq(ctx: &ModelContext, grid: &SpatialGrid) -> Result<f64> {
    if ctx.params.delta == 0.0 && ctx.params.c != 0.0 {
        return Err(Error::SingularGradient { x: 0.0 });
    }
    surface_average(ctx, grid, |x, i| {
        let (d0, d1) = eigenvalue_gradients(x, &ctx.params)?;
        let d = [d0, d1][i] - mean_field_gradient(x, ctx)?;
        Ok(d * d)
    })
}

fn phase_space_average<F: Fn(f64, usize) -> Result<f64>>(ctx: &ModelContext, pgrid: &PhaseGrid, f: F) -> Result<f64> {
    // shift both exponents by their grid minima so the weights stay finite
    let shift = pgrid.x_nodes().iter().map(|&x| eigenvalues(x, &ctx.params).0).fold(f64::INFINITY, f64::min);
    let weight = |x: f64, p: f64, i: usize| {
        let (l0, l1) = eigenvalues(x, &ctx.params);
        (-ctx.beta * (0.5 * p * p + [l0, l1][i] - shift)).exp()
    };
    let mut err = None;
    let num = simpson_2d(
        |x, p| {
            (0..2)
                .map(|i| match f(x, i) {
                    Ok(v) => weight(x, p, i) * v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                })
                .sum::<f64>()
        },
        pgrid,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let den = simpson_2d(|x, p| weight(x, p, 0) + weight(x, p, 1), pgrid);
    Ok(num / den)
}

/// Phase-space form of [`epsilon1_sq`], integrating the momentum Gaussian explicitly.
pub fn epsilon1_sq_phase_space(ctx: &ModelContext, pgrid: &PhaseGrid) -> Result<f64> {
    phase_space_average(ctx, pgrid, |x, i| {
        let (l0, l1) = eigenvalues(x, &ctx.params);
        Ok(([l0, l1][i] - mean_field_potential(x, ctx)).powi(2))
    })
}

/// Phase-space form of [`epsilon2_sq`].
pub fn epsilon2_sq_phase_space(ctx: &ModelContext, pgrid: &PhaseGrid) -> Result<f64> {
    phase_space_average(ctx, pgrid, |x, i| {
        let (d0, d1) = eigenvalue_gradients(x, &ctx.params)?;
        Ok(([d0, d1][i] - mean_field_gradient(x, ctx)?).powi(2))
    })
}

/// Ground-state Gibbs average of the eigenvalue gap.
pub fn gamma_lambda(ctx: &ModelContext, grid: &SpatialGrid) -> Result<f64> {
    let xs = grid.nodes();
    let (w0, _) = shifted_gibbs_weights(ctx, &xs);
    check_boundary_decay("ground-state Gibbs weight", &w0)?;
    let gap: Vec<f64> = xs
        .iter()
        .zip(&w0)
        .map(|(&x, w)| {
            let (l0, l1) = eigenvalues(x, &ctx.params);
            (l1 - l0).abs() * w
        })
        .collect();
    Ok(grid.integrate(&gap) / grid.integrate(&w0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub label: String,
    pub beta: f64,
    pub c: f64,
    pub delta: f64,
    pub mass_ratio: f64,
    pub q1: f64,
    pub eps1_sq: f64,
    pub eps2_sq: f64,
    pub gamma_lambda: f64,
}

pub fn case_report(label: &str, ctx: &ModelContext, grid: &SpatialGrid) -> Result<CaseReport> {
    Ok(CaseReport {
        label: label.to_string(),
        beta: ctx.beta,
        c: ctx.params.c,
        delta: ctx.params.delta,
        mass_ratio: ctx.mass_ratio,
        q1: state_probabilities(ctx, grid)?.1,
        eps1_sq: epsilon1_sq(ctx, grid)?,
        eps2_sq: epsilon2_sq(ctx, grid)?,
        gamma_lambda: gamma_lambda(ctx, grid)?,
    })
}

fn same_taus(a: &CorrelationSeries, b: &CorrelationSeries) -> Result<()> {
    let same = a.tau_values.len() == b.tau_values.len()
        && a.tau_values.iter().zip(&b.tau_values).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0));
    if !same {
        return Err(Error::GridMismatch("correlation series use different tau grids".into()));
    }
    Ok(())
}

/// `max_{tau' <= tau} |a(tau') - b(tau')|`.
pub fn sup_error(a: &CorrelationSeries, b: &CorrelationSeries, tau: f64) -> Result<f64> {
    same_taus(a, b)?;
    let tol = 1e-9 * tau.abs().max(1.0);
    Ok(a
        .tau_values
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .take_while(|(t, _)| **t <= tau + tol)
        .fold(0.0f64, |m, (_, (x, y))| m.max((x - y).abs())))
}

/// Running `sup_error` at every tau of the grid.
pub fn running_sup_error(a: &CorrelationSeries, b: &CorrelationSeries) -> Result<Vec<f64>> {
    same_taus(a, b)?;
    let mut m = 0.0f64;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            m = m.max((x - y).abs());
            m
        })
        .collect())
}

pub fn l1_density_error(a: &DensityProfile, b: &DensityProfile) -> Result<f64> {
    if a.grid != b.grid || a.values.len() != b.values.len() {
        return Err(Error::GridMismatch("densities live on different grids".into()));
    }
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    Ok(a.grid.integrate(&d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceFit {
    pub mass_ratios: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(ln m, ln err)`.
pub fn fit_power_law(mass_ratios: &[f64], errors: &[f64]) -> Result<ConvergenceFit> {
    if mass_ratios.len() != errors.len() {
        return Err(Error::InvalidParameter("sample lists differ in length".into()));
    }
    if mass_ratios.len() < 3 {
        return Err(Error::TooFewSamples { got: mass_ratios.len() });
    }
    if mass_ratios.iter().chain(errors).any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::InvalidParameter("log-log fit needs positive samples".into()));
    }
    let lx: Vec<f64> = mass_ratios.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("mass ratios must not all coincide".into()));
    }
    let slope = sxy / sxx;
    Ok(ConvergenceFit {
        mass_ratios: mass_ratios.to_vec(),
        errors: errors.to_vec(),
        slope,
        intercept: my - slope * mx,
    })
}

/// L1 distance between the quantum and mean-field position densities for
/// each mass ratio, with a power-law fit.
pub fn convergence_study(template: &ModelContext, mass_ratios: &[f64], grid: &SpatialGrid) -> Result<ConvergenceFit> {
    if mass_ratios.len() < 3 {
        return Err(Error::TooFewSamples { got: mass_ratios.len() });
    }
    let mut errors = Vec::with_capacity(mass_ratios.len());
    for &m in mass_ratios {
        let ctx = template.with_mass_ratio(m)?;
        let eig = eigendecompose(&build_hamiltonian(grid, &ctx))?;
        let qm = equilibrium_density(&eig, ctx.beta, grid)?;
        let mf = density_mf(&ctx, grid)?;
        errors.push(l1_density_error(&qm, &mf)?);
    }
    fit_power_law(mass_ratios, &errors)
}

/// Gap parameter that gives the requested excited-state probability at
/// fixed `beta` and `c`, found by bisection (the probability decreases
/// monotonically as the gap opens).
pub fn delta_for_q1(beta: f64, c: f64, target_q1: f64, grid: &SpatialGrid) -> Result<f64> {
    if !(target_q1 > 0.0 && target_q1 < 0.5) {
        return Err(Error::InvalidParameter(format!("target q1 must lie in (0, 1/2), got {target_q1}")));
    }
    let q1 = |d: f64| -> Result<f64> {
        let ctx = ModelContext::new(PotentialParams::new(c, d)?, beta, 1.0)?;
        Ok(state_probabilities(&ctx, grid)?.1)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while q1(hi)? > target_q1 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidParameter("no gap parameter reaches the target probability".into()));
        }
    }
    if q1(lo)? < target_q1 {
        return Err(Error::InvalidParameter("target probability exceeds the gapless value".into()));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if q1(mid)? > target_q1 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Finite-horizon Green–Kubo integral `int_0^horizon S(tau) dtau` by
/// composite Simpson quadrature. No tail correction is attempted.
pub fn green_kubo(series: &CorrelationSeries, horizon: f64) -> Result<f64> {
    let taus = &series.tau_values;
    let extent = *taus.last().unwrap();
    let tol = 1e-9 * extent.abs().max(1.0);
    if horizon > extent + tol {
        return Err(Error::HorizonExceedsSeries { horizon, extent });
    }
    if horizon < 0.0 {
        return Err(Error::InvalidParameter("horizon must be nonnegative".into()));
    }
    let n = taus.iter().take_while(|t| **t <= horizon + tol).count() - 1;
    if n == 0 {
        return Ok(0.0);
    }
    let h = taus[1] - taus[0];
    let uniform = taus[..=n].windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
    if !uniform {
        return Err(Error::InvalidParameter("Green-Kubo quadrature needs a uniform tau grid".into()));
    }
    if (taus[n] - horizon).abs() > tol {
        return Err(Error::InvalidParameter(format!("horizon {horizon} is not a grid point")));
    }
    if n == 1 {
        return Ok(0.5 * h * (series.values[0] + series.values[1]));
    }
    Ok(ordered_dot(&simpson_weights(n, h), &series.values[..=n]))
}
