//! Classical molecular dynamics on scalar energy surfaces.

use crate::error::{Error, Result};
use crate::grid::{PhaseGrid, SpatialGrid};
use crate::model::{
    check_boundary_decay, eigenvalue_gradients, eigenvalues, mean_field_gradient, shifted_gibbs_weights,
    ModelContext, Surface,
};
use crate::quantum::{check_taus, CorrelationSeries, DensityProfile, Observable, SeriesKind};
use rayon::prelude::*;

/// Nodes whose Gibbs weight relative to the largest one falls below this
/// are left out of phase-space averages.
pub const NODE_WEIGHT_CUTOFF: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub dt: f64,
}

impl FlowConfig {
    pub fn new(dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { dt })
    }

    /// Step index at which `tau` is reached; `tau` must be a multiple of `dt`.
    pub fn step_index(&self, tau: f64) -> Result<usize> {
        let k = (tau / self.dt).round();
        if (k * self.dt - tau).abs() > 1e-9 * tau.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau = {tau} is not a multiple of dt = {}",
                self.dt
            )));
        }
        Ok(k as usize)
    }
}

#[inline(always)]
fn verlet_step<F: Fn(f64) -> Result<f64>>(z: &mut PhasePoint, grad: &mut f64, force: &F, dt: f64) -> Result<()> {
    let half = 0.5 * dt;
    let p_half = z.p - half * *grad;
    z.x += dt * p_half;
    *grad = force(z.x)?;
    z.p = p_half - half * *grad;
    Ok(())
}

/// Velocity Verlet for `h = p^2/2 + lambda(x)` given `force = lambda'`.
/// Returns `n + 1` points, starting with `z0`. A negative `dt` runs backwards.
pub fn verlet_integrate<F: Fn(f64) -> Result<f64>>(
    z0: PhasePoint,
    force: F,
    dt: f64,
    n: usize,
) -> Result<Vec<PhasePoint>> {
    let mut out = Vec::with_capacity(n + 1);
    let mut z = z0;
    let mut g = force(z.x)?;
    out.push(z);
    for _ in 0..n {
        verlet_step(&mut z, &mut g, &force, dt)?;
        out.push(z);
    }
    Ok(out)
}

/// One classical branch of a phase-space average: a positional log-weight
/// and the gradient of the surface driving its flow.
pub struct Branch<'a> {
    pub log_weight: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    pub force: Box<dyn Fn(f64) -> Result<f64> + Sync + 'a>,
}

/// `sum_b int O(z_tau^b(z0)) O(z0) w_b(z0) dz0 / sum_b int w_b dz0` with
/// `w_b = exp(log_weight_b(x) - beta p^2 / 2)`, by tensor Simpson quadrature.
pub fn correlation_branches(
    branches: &[Branch<'_>],
    beta: f64,
    pgrid: &PhaseGrid,
    flow: &FlowConfig,
    observable: Observable,
    taus: &[f64],
) -> Result<Vec<f64>> {
    check_taus(taus)?;
    let steps: Vec<usize> = taus.iter().map(|&t| flow.step_index(t)).collect::<Result<_>>()?;
    let n_steps = *steps.last().unwrap();
    let xs = pgrid.x_nodes();
    let ps = pgrid.p_nodes();
    let wx = pgrid.x_weights();
    let wp = pgrid.p_weights();

    let log_w: Vec<Vec<f64>> = branches.iter().map(|b| xs.iter().map(|&x| (b.log_weight)(x)).collect()).collect();
    let kin: Vec<f64> = ps.iter().map(|p| -0.5 * beta * p * p).collect();
    let top_x = log_w.iter().flatten().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let top_p = kin.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    if !top_x.is_finite() {
        return Err(Error::InvalidParameter("Gibbs weight is not finite on the phase grid".into()));
    }
    for lw in &log_w {
        let rel: Vec<f64> = lw.iter().map(|v| (v - top_x).exp()).collect();
        if rel.iter().any(|v| *v > 0.0) {
            check_boundary_decay("positional Gibbs weight on the phase grid", &rel)?;
        }
    }
    let prel: Vec<f64> = kin.iter().map(|v| (v - top_p).exp()).collect();
    check_boundary_decay("momentum Gibbs weight on the phase grid", &prel)?;

    let nt = taus.len();
    let rows: Vec<(Vec<f64>, f64)> = (0..xs.len())
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, f64)> {
            let mut num = vec![0.0; nt];
            let mut den = 0.0;
            for (b, branch) in branches.iter().enumerate() {
                for j in 0..ps.len() {
                    let rel = (log_w[b][i] - top_x + kin[j] - top_p).exp();
                    if rel < NODE_WEIGHT_CUTOFF {
                        continue;
                    }
                    let w = wx[i] * wp[j] * rel;
                    den += w;
                    let mut z = PhasePoint { x: xs[i], p: ps[j] };
                    let o0 = observe(&z, observable);
                    let mut g = (branch.force)(z.x)?;
                    let mut next = 0;
                    for k in 0..=n_steps {
                        if k > 0 {
                            verlet_step(&mut z, &mut g, &branch.force, flow.dt)?;
                        }
                        while next < nt && steps[next] == k {
                            num[next] += w * o0 * observe(&z, observable);
                            next += 1;
                        }
                    }
                }
            }
            Ok((num, den))
        })
        .collect::<Result<_>>()?;

    // sequential reduction in row order keeps results independent of scheduling
    let mut num = vec![0.0; nt];
    let mut den = 0.0;
    for (r, d) in &rows {
        for (a, v) in num.iter_mut().zip(r) {
            *a += v;
        }
        den += d;
    }
    Ok(num.into_iter().map(|v| v / den).collect())
}

#[inline(always)]
fn observe(z: &PhasePoint, o: Observable) -> f64 {
    match o {
        Observable::Position => z.x,
        Observable::Momentum => z.p,
    }
}

fn mean_field_log_weight(ctx: &ModelContext) -> impl Fn(f64) -> f64 + Sync + '_ {
    move |x| {
        let (l0, l1) = eigenvalues(x, &ctx.params);
        -ctx.beta * l0 + (-ctx.beta * (l1 - l0)).exp().ln_1p()
    }
}

/// Classical correlation on the mean-field (`Surface::MeanField`) or
/// ground-state (`Surface::Ground`) surface.
///
/// The mean-field variant weights initial points with the trace of the
/// matrix Gibbs density while evolving them with the averaged eigenvalue.
pub fn correlation_classical(
    kind: Surface,
    ctx: &ModelContext,
    pgrid: &PhaseGrid,
    flow: &FlowConfig,
    observable: Observable,
    taus: &[f64],
) -> Result<CorrelationSeries> {
    let (branch, tag) = match kind {
        Surface::MeanField => (
            Branch {
                log_weight: Box::new(mean_field_log_weight(ctx)),
                force: Box::new(move |x| mean_field_gradient(x, ctx)),
            },
            SeriesKind::Mf,
        ),
        Surface::Ground => (
            Branch {
                log_weight: Box::new(move |x| -ctx.beta * eigenvalues(x, &ctx.params).0),
                force: Box::new(move |x| Ok(eigenvalue_gradients(x, &ctx.params)?.0)),
            },
            SeriesKind::Gs,
        ),
        Surface::Excited => return correlation_excited(ctx, pgrid, flow, observable, taus),
    };
    let values = correlation_branches(&[branch], ctx.beta, pgrid, flow, observable, taus)?;
    CorrelationSeries::new(taus.to_vec(), values, tag)
}

/// Excited-state dynamics: one flow per eigenvalue surface, each weighted
/// by its own Gibbs factor, with a joint normalization.
pub fn correlation_excited(
    ctx: &ModelContext,
    pgrid: &PhaseGrid,
    flow: &FlowConfig,
    observable: Observable,
    taus: &[f64],
) -> Result<CorrelationSeries> {
    let branches = [
        Branch {
            log_weight: Box::new(move |x| -ctx.beta * eigenvalues(x, &ctx.params).0),
            force: Box::new(move |x| Ok(eigenvalue_gradients(x, &ctx.params)?.0)),
        },
        Branch {
            log_weight: Box::new(move |x| -ctx.beta * eigenvalues(x, &ctx.params).1),
            force: Box::new(move |x| Ok(eigenvalue_gradients(x, &ctx.params)?.1)),
        },
    ];
    let values = correlation_branches(&branches, ctx.beta, pgrid, flow, observable, taus)?;
    CorrelationSeries::new(taus.to_vec(), values, SeriesKind::Es)
}

/// Classical position density `e^{-beta lambda_0} + e^{-beta lambda_1}`, normalized.
pub fn density_mf(ctx: &ModelContext, grid: &SpatialGrid) -> Result<DensityProfile> {
    let (w0, w1) = shifted_gibbs_weights(ctx, &grid.nodes());
    check_boundary_decay("mean-field Gibbs weight", &w0)?;
    let w: Vec<f64> = w0.iter().zip(&w1).map(|(a, b)| a + b).collect();
    Ok(DensityProfile::normalized(*grid, w))
}

/// Classical position density on the ground-state surface alone.
pub fn density_gs(ctx: &ModelContext, grid: &SpatialGrid) -> Result<DensityProfile> {
    let (w0, _) = shifted_gibbs_weights(ctx, &grid.nodes());
    check_boundary_decay("ground-state Gibbs weight", &w0)?;
    Ok(DensityProfile::normalized(*grid, w0))
}

/// Per-state form of the excited-state correlation,
/// `sum_j q_j <O(z_tau^j) O(z0)>_j`, with each state average normalized on
/// its own. Used to cross-check the jointly normalized form.
pub fn correlation_excited_per_state(
    ctx: &ModelContext,
    pgrid: &PhaseGrid,
    flow: &FlowConfig,
    observable: Observable,
    taus: &[f64],
) -> Result<Vec<f64>> {
    let xs = pgrid.x_nodes();
    let wx = pgrid.x_weights();
    let shift = xs.iter().map(|&x| eigenvalues(x, &ctx.params).0).fold(f64::INFINITY, f64::min);
    let z = |j: usize| -> f64 {
        xs.iter()
            .zip(&wx)
            .map(|(&x, w)| {
                let (a, b) = eigenvalues(x, &ctx.params);
                w * (-ctx.beta * ([a, b][j] - shift)).exp()
            })
            .sum()
    };
    let (z0, z1) = (z(0), z(1));
    let q = [z0 / (z0 + z1), z1 / (z0 + z1)];
    let mut out = vec![0.0; taus.len()];
    for (j, qj) in q.iter().enumerate() {
        let branch = Branch {
            log_weight: Box::new(move |x| {
                let (a, b) = eigenvalues(x, &ctx.params);
                -ctx.beta * [a, b][j]
            }),
            force: Box::new(move |x| {
                let (a, b) = eigenvalue_gradients(x, &ctx.params)?;
                Ok([a, b][j])
            }),
        };
        let v = correlation_branches(&[branch], ctx.beta, pgrid, flow, observable, taus)?;
        for (o, vi) in out.iter_mut().zip(v) {
            *o += qj * vi;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialParams;

    fn ctx(beta: f64, c: f64, delta: f64) -> ModelContext {
        ModelContext::new(PotentialParams::new(c, delta).unwrap(), beta, 100.0).unwrap()
    }

    #[test]
    fn harmonic_trajectory() {
        let tr = verlet_integrate(PhasePoint { x: 1.0, p: 0.0 }, Ok, 0.01, 100).unwrap();
        assert_eq!(tr.len(), 101);
        assert!((tr[100].x - 1f64.cos()).abs() < 1e-4);
    }

    #[test]
    fn free_flight() {
        let z0 = PhasePoint { x: 0.25, p: -1.5 };
        let tr = verlet_integrate(z0, |_| Ok(0.0), 0.125, 16).unwrap();
        for (n, z) in tr.iter().enumerate() {
            assert_eq!(z.p, -1.5);
            assert_eq!(z.x, 0.25 + n as f64 * 0.125 * -1.5);
        }
    }

    #[test]
    fn time_reversal() {
        let c = ctx(1.0, 1.0, 0.1);
        let f = |x| mean_field_gradient(x, &c);
        let z0 = PhasePoint { x: 0.7, p: 0.9 };
        let fwd = verlet_integrate(z0, f, 0.005, 2000).unwrap();
        let end = fwd.last().unwrap();
        let back = verlet_integrate(PhasePoint { x: end.x, p: end.p }, f, -0.005, 2000).unwrap();
        let z = back.last().unwrap();
        assert!((z.x - z0.x).abs() < 1e-12 && (z.p - z0.p).abs() < 1e-12);
    }

    #[test]
    fn step_index_requires_multiples() {
        let f = FlowConfig::new(0.005).unwrap();
        assert_eq!(f.step_index(1.0).unwrap(), 200);
        assert!(f.step_index(0.0071).is_err());
    }

    #[test]
    fn harmonic_correlation_oracle() {
        let grid = PhaseGrid::symmetric(-8.0, 8.0, 8.0, 160).unwrap();
        let flow = FlowConfig::new(0.005).unwrap();
        let taus = vec![0.0, 0.5, 1.0, 2.0];
        let branch = Branch { log_weight: Box::new(|x: f64| -0.5 * x * x), force: Box::new(Ok) };
        let t = correlation_branches(&[branch], 1.0, &grid, &flow, Observable::Momentum, &taus).unwrap();
        for (tau, v) in taus.iter().zip(&t) {
            assert!((v - tau.cos()).abs() < 1e-4, "{tau}: {v}");
        }
    }

    #[test]
    fn zero_time_identities() {
        let c = ctx(1.0, 1.0, 0.1);
        let grid = PhaseGrid::symmetric(-6.0, 6.0, 60f64.sqrt(), 120).unwrap();
        let flow = FlowConfig::new(0.01).unwrap();
        let taus = [0.0, 0.5];
        let mf = correlation_classical(Surface::MeanField, &c, &grid, &flow, Observable::Momentum, &taus).unwrap();
        let es = correlation_excited(&c, &grid, &flow, Observable::Momentum, &taus).unwrap();
        assert!((mf.values[0] - es.values[0]).abs() < 1e-10);
        assert!((mf.values[0] - 1.0).abs() < 1e-6);
        let xs_mf = correlation_classical(Surface::MeanField, &c, &grid, &flow, Observable::Position, &[0.0]).unwrap();
        let xs_es = correlation_excited(&c, &grid, &flow, Observable::Position, &[0.0]).unwrap();
        assert!((xs_mf.values[0] - xs_es.values[0]).abs() < 1e-10);
    }

    #[test]
    fn joint_and_per_state_excited_forms_agree() {
        let c = ctx(1.0, 1.0, 0.1);
        let grid = PhaseGrid::symmetric(-6.0, 6.0, 60f64.sqrt(), 80).unwrap();
        let flow = FlowConfig::new(0.01).unwrap();
        let taus = [0.0, 0.5, 1.0];
        let es = correlation_excited(&c, &grid, &flow, Observable::Momentum, &taus).unwrap();
        let per = correlation_excited_per_state(&c, &grid, &flow, Observable::Momentum, &taus).unwrap();
        for (a, b) in es.values.iter().zip(&per) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn uncoupled_model_collapses_variants() {
        let c = ctx(1.0, 0.0, 0.3);
        let grid = PhaseGrid::symmetric(-6.0, 6.0, 60f64.sqrt(), 60).unwrap();
        let flow = FlowConfig::new(0.01).unwrap();
        let taus = [0.0, 0.3, 1.0];
        let mf = correlation_classical(Surface::MeanField, &c, &grid, &flow, Observable::Momentum, &taus).unwrap();
        let gs = correlation_classical(Surface::Ground, &c, &grid, &flow, Observable::Momentum, &taus).unwrap();
        let es = correlation_excited(&c, &grid, &flow, Observable::Momentum, &taus).unwrap();
        for k in 0..taus.len() {
            assert!((mf.values[k] - gs.values[k]).abs() <= 1e-12);
            assert!((mf.values[k] - es.values[k]).abs() <= 1e-12);
        }
        let sg = SpatialGrid::new(-6.0, 6.0, 600).unwrap();
        assert_eq!(density_mf(&c, &sg).unwrap(), density_gs(&c, &sg).unwrap());
    }

    #[test]
    fn narrow_phase_grid_is_rejected() {
        let c = ctx(1.0, 1.0, 0.1);
        let grid = PhaseGrid::symmetric(-6.0, 6.0, 3.0, 40).unwrap();
        let flow = FlowConfig::new(0.01).unwrap();
        let r = correlation_classical(Surface::Ground, &c, &grid, &flow, Observable::Momentum, &[0.0]);
        assert!(matches!(r, Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn densities_are_normalized() {
        let c = ctx(1.0, 1.0, 0.1);
        let sg = SpatialGrid::new(-6.0, 6.0, 1200).unwrap();
        assert!((density_mf(&c, &sg).unwrap().integral() - 1.0).abs() < 1e-8);
        assert!((density_gs(&c, &sg).unwrap().integral() - 1.0).abs() < 1e-8);
        // cold and nearly adiabatic: excited population about 7e-7
        let cold = ctx(10.0, 1.0, 0.1);
        let mf = density_mf(&cold, &sg).unwrap();
        let gs = density_gs(&cold, &sg).unwrap();
        let diff: f64 = mf.values.iter().zip(&gs.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-5);
    }
}
