//! Command-line orchestration: configuration, run commands and CSV output.
//!
//! Each `run_*` function is pure in the sense that it returns the file
//! contents instead of writing them, which keeps the commands testable and
//! makes the byte-identical output contract easy to check.

mod config;

use std::fmt::Write as _;
use std::path::Path;

pub use config::{
    default_p_max, parse_config, parse_config_text, parse_invocation, CasePreset, Command, Invocation, RunConfig,
    CASES,
};

use crate::classical::{correlation_classical, correlation_excited, density_gs, density_mf, FlowConfig};
use crate::diagnostics::{case_report, delta_for_q1, fit_power_law, green_kubo, l1_density_error, running_sup_error};
use crate::error::{Error, Result};
use crate::gibbs_symbol::{correction_limit, estimate_symbol_correction, full_correction_limit, PathConfig};
use crate::model::{eigenvalues, mean_field_potential, ModelContext, PotentialParams, Surface};
use crate::quantum::{
    build_hamiltonian, build_scalar_hamiltonian, correlation_qm, eigendecompose, equilibrium_density,
    observable_matrices, uniform_taus, CorrelationSeries, Observable, SeriesKind,
};

/// Files produced by a run, in the order they should be written, plus
/// non-fatal diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

fn quantum_series(
    ctx: &ModelContext,
    cfg: &RunConfig,
    taus: &[f64],
    scalar: Option<Surface>,
) -> Result<CorrelationSeries> {
    let grid = cfg.spatial_grid()?;
    let h = match scalar {
        None => build_hamiltonian(&grid, ctx),
        Some(Surface::MeanField) => build_scalar_hamiltonian(&grid, ctx, |x| mean_field_potential(x, ctx)),
        Some(_) => build_scalar_hamiltonian(&grid, ctx, |x| eigenvalues(x, &ctx.params).0),
    };
    let eig = eigendecompose(&h)?;
    let ops = observable_matrices(&grid, &h)?;
    let series = correlation_qm(&eig, &ops, cfg.observable, ctx.beta, ctx.mass_ratio, taus)?;
    Ok(match scalar {
        None => series,
        Some(Surface::MeanField) => series.with_kind(SeriesKind::QmLambdaStar),
        Some(_) => series.with_kind(SeriesKind::QmLambda0),
    })
}

/// `density.csv`: quantum, mean-field and ground-state position densities.
pub fn run_density(cfg: &RunConfig) -> Result<RunOutput> {
    let ctx = cfg.context()?;
    let grid = cfg.spatial_grid()?;
    let eig = eigendecompose(&build_hamiltonian(&grid, &ctx))?;
    let qm = equilibrium_density(&eig, ctx.beta, &grid)?;
    let mut warnings = Vec::new();
    if let Err(e) = qm.check_boundary() {
        warnings.push(e.to_string());
    }
    let mf = density_mf(&ctx, &grid)?;
    let gs = density_gs(&ctx, &grid)?;
    let mut s = cfg.comment_block();
    s.push_str("x,mu_qm,mu_mf,mu_gs\n");
    for (k, x) in grid.nodes().into_iter().enumerate() {
        s.push_str(&row(&[fmt(x), fmt(qm.values[k]), fmt(mf.values[k]), fmt(gs.values[k])]));
    }
    Ok(RunOutput { files: vec![("density.csv".into(), s)], warnings })
}

/// `correlation.csv` and `errors.csv`: quantum and classical auto-correlations
/// and their running sup distances.
pub fn run_correlation(cfg: &RunConfig) -> Result<RunOutput> {
    let ctx = cfg.context()?;
    let pgrid = cfg.phase_grid()?;
    let flow = FlowConfig::new(cfg.dt)?;
    let taus = uniform_taus(cfg.tau_max, cfg.d_tau);

    let qm = quantum_series(&ctx, cfg, &taus, None)?;
    let mf = correlation_classical(Surface::MeanField, &ctx, &pgrid, &flow, cfg.observable, &taus)?;
    let es = correlation_excited(&ctx, &pgrid, &flow, cfg.observable, &taus)?;
    let gs = correlation_classical(Surface::Ground, &ctx, &pgrid, &flow, cfg.observable, &taus)?;
    let scalar = if cfg.scalar_variants {
        Some((
            quantum_series(&ctx, cfg, &taus, Some(Surface::MeanField))?,
            quantum_series(&ctx, cfg, &taus, Some(Surface::Ground))?,
        ))
    } else {
        None
    };

    let mut corr = cfg.comment_block();
    let mut header = vec!["tau", "S_qm", "S_mf", "S_es", "S_gs"];
    if scalar.is_some() {
        header.extend(["S_qm_lstar", "S_qm_l0"]);
    }
    corr.push_str(&header.join(","));
    corr.push('\n');
    for (i, t) in taus.iter().enumerate() {
        let mut cells = vec![fmt(*t), fmt(qm.values[i]), fmt(mf.values[i]), fmt(es.values[i]), fmt(gs.values[i])];
        if let Some((ls, l0)) = &scalar {
            cells.push(fmt(ls.values[i]));
            cells.push(fmt(l0.values[i]));
        }
        corr.push_str(&row(&cells));
    }

    let mut columns: Vec<(&str, Vec<f64>)> = vec![
        ("err_qm_mf", running_sup_error(&qm, &mf)?),
        ("err_qm_es", running_sup_error(&qm, &es)?),
        ("err_qm_gs", running_sup_error(&qm, &gs)?),
    ];
    if let Some((ls, l0)) = &scalar {
        columns.push(("err_qm_qm_lstar", running_sup_error(&qm, ls)?));
        columns.push(("err_qm_lstar_mf", running_sup_error(ls, &mf)?));
        columns.push(("err_qm_qm_l0", running_sup_error(&qm, l0)?));
        columns.push(("err_qm_l0_gs", running_sup_error(l0, &gs)?));
    }
    let mut err = cfg.comment_block();
    if cfg.observable == Observable::Momentum {
        for s in [&qm, &mf, &es, &gs] {
            let _ = writeln!(err, "# green_kubo_{} = {}", s.kind.label(), fmt(green_kubo(s, cfg.tau_max)?));
        }
    }
    err.push_str("tau");
    for (name, _) in &columns {
        err.push(',');
        err.push_str(name);
    }
    err.push('\n');
    for (i, t) in taus.iter().enumerate() {
        let mut cells = vec![fmt(*t)];
        cells.extend(columns.iter().map(|(_, v)| fmt(v[i])));
        err.push_str(&row(&cells));
    }
    Ok(RunOutput { files: vec![("correlation.csv".into(), corr), ("errors.csv".into(), err)], warnings: vec![] })
}

/// `epsilons.csv`: excited-state probability and error functionals for each requested case.
pub fn run_epsilons(cfg: &RunConfig) -> Result<RunOutput> {
    let grid = cfg.spatial_grid()?;
    let mut s = cfg.comment_block();
    s.push_str("case,beta,c,delta,q1,eps1_sq,eps2_sq,gamma_lambda\n");
    for label in &cfg.cases {
        let preset = CasePreset::by_label(&label.to_string())?;
        let r = case_report(&label.to_string(), &preset.context(cfg.mass_ratio)?, &grid)?;
        s.push_str(&row(&[
            r.label,
            fmt(r.beta),
            fmt(r.c),
            fmt(r.delta),
            fmt(r.q1),
            fmt(r.eps1_sq),
            fmt(r.eps2_sq),
            fmt(r.gamma_lambda),
        ]));
    }
    Ok(RunOutput { files: vec![("epsilons.csv".into(), s)], warnings: vec![] })
}

/// `convergence.csv`: L1 density error against the mass ratio, with a log-log slope.
pub fn run_convergence(cfg: &RunConfig) -> Result<RunOutput> {
    let grid = cfg.spatial_grid()?;
    let delta = match cfg.q1_target {
        Some(q) => delta_for_q1(cfg.beta, cfg.c, q, &grid)?,
        None => cfg.delta,
    };
    let params = PotentialParams::new(cfg.c, delta)?;
    let mut errors = Vec::with_capacity(cfg.mass_list.len());
    let mut warnings = Vec::new();
    for &m in &cfg.mass_list {
        let ctx = ModelContext::new(params, cfg.beta, m)?;
        let eig = eigendecompose(&build_hamiltonian(&grid, &ctx))?;
        let qm = equilibrium_density(&eig, ctx.beta, &grid)?;
        if let Err(e) = qm.check_boundary() {
            warnings.push(format!("M = {m}: {e}"));
        }
        errors.push(l1_density_error(&qm, &density_mf(&ctx, &grid)?)?);
    }
    let fit = fit_power_law(&cfg.mass_list, &errors)?;
    let mut s = cfg.comment_block();
    let _ = writeln!(s, "# resolved_delta = {}", fmt(delta));
    s.push_str("M,l1_error\n");
    for (m, e) in fit.mass_ratios.iter().zip(&fit.errors) {
        s.push_str(&row(&[fmt(*m), fmt(*e)]));
    }
    let _ = writeln!(s, "# slope={}", fmt(fit.slope));
    Ok(RunOutput { files: vec![("convergence.csv".into(), s)], warnings })
}

/// `gibbs.csv`: Monte Carlo estimate of `M (rho_hat - e^{-beta H})` at one
/// phase-space point against the limit formula, for each mass ratio.
pub fn run_gibbs(cfg: &RunConfig) -> Result<RunOutput> {
    let ctx = cfg.context()?;
    let paths = PathConfig::new(cfg.n_paths, cfg.n_steps, cfg.seed)?;
    let (x, p) = (cfg.gibbs_x, cfg.gibbs_p);
    let limit = correction_limit(x, p, &ctx);
    let full = full_correction_limit(x, p, &ctx);
    let mut s = cfg.comment_block();
    let _ = writeln!(s, "# worker_threads = {}", rayon::current_num_threads());
    let mut tail = String::new();
    s.push_str("x,p,M,entry,re_mean,im_mean,std_err,re_limit,im_limit,sigma_distance\n");
    for &m in &cfg.mass_list {
        let est = estimate_symbol_correction(x, p, &ctx.with_mass_ratio(m)?, &paths);
        for i in 0..2 {
            for j in 0..2 {
                let lim = limit.0[i][j];
                s.push_str(&row(&[
                    fmt(x),
                    fmt(p),
                    fmt(m),
                    format!("{}{}", i + 1, j + 1),
                    fmt(est.mean_re.0[i][j]),
                    fmt(est.mean_im.0[i][j]),
                    fmt(est.std_err(i, j)),
                    fmt(lim),
                    fmt(0.0),
                    fmt(est.sigma_distance(i, j, lim, 0.0)),
                ]));
                let _ = writeln!(
                    tail,
                    "# full_limit M={} entry={}{} re_limit={} sigma_distance={}",
                    fmt(m),
                    i + 1,
                    j + 1,
                    fmt(full.0[i][j]),
                    fmt(est.sigma_distance(i, j, full.0[i][j], 0.0)),
                );
            }
        }
    }
    s.push_str(&tail);
    Ok(RunOutput { files: vec![("gibbs.csv".into(), s)], warnings: vec![] })
}

/// Runs the configured command on a dedicated pool of `cfg.threads` workers.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.threads)))?;
    pool.install(|| match cfg.command {
        Command::Density => run_density(cfg),
        Command::Correlation => run_correlation(cfg),
        Command::Epsilons => run_epsilons(cfg),
        Command::Convergence => run_convergence(cfg),
        Command::Gibbs => run_gibbs(cfg),
    })
}
