//! Finite-difference reference solver for the nuclear Schrödinger operator.
//!
//! The two electronic channels are interleaved node by node, so the
//! Hamiltonian is a band matrix of half-bandwidth 4 (2 for a scalar
//! potential). Time is measured in units where the propagator reads
//! `exp(-i tau sqrt(M) H)`.

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::linalg::{gemm, BandMatrix, DenseMatrix, SymmetricEigen};
use crate::model::{eval_potential, ModelContext};
use rayon::prelude::*;

/// Relative Gibbs weight below which an eigenstate is dropped from thermal sums.
pub const GIBBS_TRUNCATION: f64 = 1e-14;

/// Largest tolerated imaginary part of a symmetrized correlation.
pub const MAX_IMAGINARY_RESIDUE: f64 = 1e-8;

/// Density value at the domain ends above which the domain is reported as too small.
pub const DENSITY_EDGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DiscreteHamiltonian {
    pub grid: SpatialGrid,
    /// 2 for the matrix potential, 1 for scalar variants.
    pub channels: usize,
    pub mass_ratio: f64,
    pub entries: BandMatrix,
}

impl DiscreteHamiltonian {
    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.entries.to_dense()
    }

    /// `H + s I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.dim() {
            let v = out.entries.get(i, i);
            out.entries.set(i, i, v + s);
        }
        out
    }
}

/// Stencil prefactor `1 / (2 M 12 dx^2)`.
fn stencil_scale(grid: &SpatialGrid, mass_ratio: f64) -> f64 {
    let dx = grid.dx();
    1.0 / (24.0 * mass_ratio * dx * dx)
}

fn add_kinetic(band: &mut BandMatrix, nodes: usize, channels: usize, f: f64) {
    for k in 0..nodes {
        for ch in 0..channels {
            let i = k * channels + ch;
            band.set(i, i, band.get(i, i) + 30.0 * f);
            if k + 1 < nodes {
                band.set(i + channels, i, -16.0 * f);
            }
            if k + 2 < nodes {
                band.set(i + 2 * channels, i, f);
            }
        }
    }
}

/// Fourth-order finite-difference Hamiltonian for the two-state potential
/// with homogeneous Dirichlet truncation at the domain ends.
pub fn build_hamiltonian(grid: &SpatialGrid, ctx: &ModelContext) -> DiscreteHamiltonian {
    let nodes = grid.n_nodes();
    let mut band = BandMatrix::zeros(2 * nodes, 4);
    for k in 0..nodes {
        let v = eval_potential(grid.node(k), &ctx.params);
        band.set(2 * k, 2 * k, v.a11);
        band.set(2 * k + 1, 2 * k + 1, v.a22);
        band.set(2 * k + 1, 2 * k, v.a12);
    }
    add_kinetic(&mut band, nodes, 2, stencil_scale(grid, ctx.mass_ratio));
    DiscreteHamiltonian { grid: *grid, channels: 2, mass_ratio: ctx.mass_ratio, entries: band }
}

/// Same discretization for a single channel with a scalar potential.
pub fn build_scalar_hamiltonian<F: Fn(f64) -> f64>(
    grid: &SpatialGrid,
    ctx: &ModelContext,
    potential: F,
) -> DiscreteHamiltonian {
    let nodes = grid.n_nodes();
    let mut band = BandMatrix::zeros(nodes, 2);
    for k in 0..nodes {
        band.set(k, k, potential(grid.node(k)));
    }
    add_kinetic(&mut band, nodes, 1, stencil_scale(grid, ctx.mass_ratio));
    DiscreteHamiltonian { grid: *grid, channels: 1, mass_ratio: ctx.mass_ratio, entries: band }
}

/// Eigenpairs of a discrete Hamiltonian. `vectors.row(n)` is the n-th
/// eigenvector in the interleaved channel layout.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub vectors: DenseMatrix,
    pub grid: SpatialGrid,
    pub channels: usize,
    pub mass_ratio: f64,
}

impl EigenSystem {
    pub fn eigenvector(&self, n: usize) -> &[f64] {
        self.vectors.row(n)
    }

    /// Number of leading states whose Gibbs weight relative to the ground state
    /// exceeds the truncation threshold, along with those weights.
    pub fn gibbs_weights(&self, beta: f64) -> Vec<f64> {
        let e0 = self.eigenvalues[0];
        self.eigenvalues
            .iter()
            .map(|e| (-beta * (e - e0)).exp())
            .take_while(|&w| w > GIBBS_TRUNCATION)
            .collect()
    }
}

pub fn eigendecompose(h: &DiscreteHamiltonian) -> Result<EigenSystem> {
    let eig = SymmetricEigen::banded(h.entries.clone())?;
    let out = EigenSystem {
        eigenvalues: eig.values,
        vectors: eig.vectors,
        grid: h.grid,
        channels: h.channels,
        mass_ratio: h.mass_ratio,
    };
    // residual audit is cheap because H is banded
    let scale = out.eigenvalues.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let worst = (0..out.eigenvalues.len())
        .into_par_iter()
        .map(|n| {
            let v = out.eigenvector(n);
            let hv = h.entries.matvec(v);
            let lam = out.eigenvalues[n];
            hv.iter().zip(v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt() / scale
        })
        .reduce(|| 0.0, f64::max);
    if worst.is_nan() || worst > 1e-9 {
        return Err(Error::NonConvergence { iterations: 0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
}

impl DensityProfile {
    /// Scales `values` so that the Simpson integral is one.
    pub fn normalized(grid: SpatialGrid, mut values: Vec<f64>) -> Self {
        let z = grid.integrate(&values);
        values.iter_mut().for_each(|v| *v /= z);
        Self { grid, values }
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// Larger of the two end values.
    pub fn edge_value(&self) -> f64 {
        self.values[0].max(self.values[self.values.len() - 1])
    }

    /// Flags a density that has not decayed at the domain ends.
    pub fn check_boundary(&self) -> Result<()> {
        let edge = self.edge_value();
        if edge >= DENSITY_EDGE_TOL {
            return Err(Error::DomainTooSmall { what: "quantum equilibrium density", weight: edge });
        }
        Ok(())
    }
}

/// Position density of the canonical state, summed over channels.
pub fn equilibrium_density(eig: &EigenSystem, beta: f64, grid: &SpatialGrid) -> Result<DensityProfile> {
    if grid.n_nodes() * eig.channels != eig.eigenvalues.len() {
        return Err(Error::GridMismatch(format!(
            "{} nodes x {} channels does not match dimension {}",
            grid.n_nodes(),
            eig.channels,
            eig.eigenvalues.len()
        )));
    }
    let w = eig.gibbs_weights(beta);
    let ch = eig.channels;
    let mut rho = vec![0.0; grid.n_nodes()];
    for (n, wn) in w.iter().enumerate() {
        let v = eig.eigenvector(n);
        for (k, r) in rho.iter_mut().enumerate() {
            let amp: f64 = v[k * ch..(k + 1) * ch].iter().map(|a| a * a).sum();
            *r += wn * amp;
        }
    }
    Ok(DensityProfile::normalized(*grid, rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    Position,
    Momentum,
}

impl std::str::FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Observable::Position),
            "p" => Ok(Observable::Momentum),
            other => Err(Error::InvalidParameter(format!("unknown observable '{other}', expected p or x"))),
        }
    }
}

impl std::fmt::Display for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Observable::Position => "x",
            Observable::Momentum => "p",
        })
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseMatrix {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.val[k] * x[self.col[k]]).sum()
            })
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&k| self.col[k] == j)
            .map_or(0.0, |k| self.val[k])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d.set(i, self.col[k], self.val[k]);
            }
        }
        d
    }
}

/// Position operator (diagonal) and the real generator `A` of the momentum
/// operator `P = i A`, with `A = sqrt(M) (H X - X H)`.
#[derive(Debug, Clone)]
pub struct ObservableMatrices {
    pub x: Vec<f64>,
    pub a: SparseMatrix,
}

impl ObservableMatrices {
    /// Applies `X` or `A` to a vector.
    pub fn apply(&self, which: Observable, v: &[f64]) -> Vec<f64> {
        match which {
            Observable::Position => self.x.iter().zip(v).map(|(a, b)| a * b).collect(),
            Observable::Momentum => self.a.matvec(v),
        }
    }
}

pub fn observable_matrices(grid: &SpatialGrid, h: &DiscreteHamiltonian) -> Result<ObservableMatrices> {
    let n = h.dim();
    if grid.n_nodes() * h.channels != n {
        return Err(Error::GridMismatch("Hamiltonian was built on a different grid".into()));
    }
    let ch = h.channels;
    let x: Vec<f64> = (0..n).map(|i| grid.node(i / ch)).collect();
    let b = h.entries.bandwidth();
    let sm = h.mass_ratio.sqrt();
    let mut row_ptr = vec![0];
    let mut col = Vec::new();
    let mut val = Vec::new();
    for i in 0..n {
        for j in i.saturating_sub(b)..=(i + b).min(n - 1) {
            let v = sm * h.entries.get(i, j) * (x[j] - x[i]);
            if v != 0.0 {
                col.push(j);
                val.push(v);
            }
        }
        row_ptr.push(col.len());
    }
    Ok(ObservableMatrices { x, a: SparseMatrix { n, row_ptr, col, val } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesKind {
    Qm,
    QmLambdaStar,
    QmLambda0,
    Mf,
    Es,
    Gs,
}

impl SeriesKind {
    pub fn label(&self) -> &'static str {
        match self {
            SeriesKind::Qm => "qm",
            SeriesKind::QmLambdaStar => "qm_lambda_star",
            SeriesKind::QmLambda0 => "qm_lambda0",
            SeriesKind::Mf => "mf",
            SeriesKind::Es => "es",
            SeriesKind::Gs => "gs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub tau_values: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

impl CorrelationSeries {
    pub fn new(tau_values: Vec<f64>, values: Vec<f64>, kind: SeriesKind) -> Result<Self> {
        if tau_values.len() != values.len() {
            return Err(Error::GridMismatch("tau and value lengths differ".into()));
        }
        check_taus(&tau_values)?;
        Ok(Self { tau_values, values, kind })
    }

    pub fn with_kind(mut self, kind: SeriesKind) -> Self {
        self.kind = kind;
        self
    }
}

pub(crate) fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.first() != Some(&0.0) {
        return Err(Error::InvalidParameter("tau list must start at 0".into()));
    }
    if !taus.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter("tau list must be strictly ascending".into()));
    }
    Ok(())
}

/// Uniform time list `0, d_tau, ..., tau_max`.
pub fn uniform_taus(tau_max: f64, d_tau: f64) -> Vec<f64> {
    let n = (tau_max / d_tau).round() as usize;
    (0..=n).map(|k| k as f64 * d_tau).collect()
}

/// Symmetrized canonical auto-correlation of `X` or `P`, evaluated in the eigenbasis.
///
/// With Gibbs weights `w_m`, transition strengths `P_mn = |O_mn|^2` and
/// `Z = sum_m w_m`, the correlation reduces to
/// `S(tau) = Z^-1 sum_m w_m sum_n P_mn cos(tau sqrt(M) (e_m - e_n))`.
/// The phase sums are organized as matrix products over cosine and sine
/// tables so that arbitrary tau lists cost the same as uniform ones.
pub fn correlation_qm(
    eig: &EigenSystem,
    ops: &ObservableMatrices,
    observable: Observable,
    beta: f64,
    mass_ratio: f64,
    taus: &[f64],
) -> Result<CorrelationSeries> {
    check_taus(taus)?;
    let n = eig.eigenvalues.len();
    if ops.x.len() != n {
        return Err(Error::GridMismatch("observable and eigensystem dimensions differ".into()));
    }
    let w = eig.gibbs_weights(beta);
    let s = w.len();
    let z: f64 = w.iter().sum();

    // projected operator rows: O_mn = (O q_m) . q_n for the thermally populated m
    let mut u = vec![0.0; s * n];
    u.par_chunks_mut(n).enumerate().for_each(|(m, row)| {
        row.copy_from_slice(&ops.apply(observable, eig.eigenvector(m)));
    });
    let mut o = vec![0.0; s * n];
    gemm(s, n, n, (&u, n as isize, 1), (&eig.vectors.data, 1, n as isize), &mut o);
    drop(u);
    let strength: Vec<f64> = o.iter().map(|v| v * v).collect();

    let sm = mass_ratio.sqrt();
    let e0 = eig.eigenvalues[0];
    let nt = taus.len();
    let mut cos_t = vec![0.0; nt * n];
    let mut sin_t = vec![0.0; nt * n];
    cos_t
        .par_chunks_mut(n)
        .zip(sin_t.par_chunks_mut(n))
        .zip(taus.par_iter())
        .for_each(|((c, sn), &tau)| {
            for (k, e) in eig.eigenvalues.iter().enumerate() {
                let (si, co) = (tau * sm * (e - e0)).sin_cos();
                c[k] = co;
                sn[k] = si;
            }
        });

    // G[t][m] = sum_n table[t][n] P_mn
    let mut gc = vec![0.0; nt * s];
    let mut gs = vec![0.0; nt * s];
    gemm(nt, n, s, (&cos_t, n as isize, 1), (&strength, 1, n as isize), &mut gc);
    gemm(nt, n, s, (&sin_t, n as isize, 1), (&strength, 1, n as isize), &mut gs);
    let values: Vec<f64> = (0..nt)
        .map(|t| {
            let mut acc = 0.0;
            for m in 0..s {
                acc += w[m] * (cos_t[t * n + m] * gc[t * s + m] + sin_t[t * n + m] * gs[t * s + m]);
            }
            acc / z
        })
        .collect();

    // imaginary part of the symmetrized trace over the populated block,
    // using the literal products O_mn O_nm
    let sign = match observable {
        Observable::Position => 1.0,
        Observable::Momentum => -1.0,
    };
    let mut pair = vec![0.0; s * s];
    for m in 0..s {
        for k in 0..s {
            pair[m * s + k] = sign * o[m * n + k] * o[k * n + m];
        }
    }
    let mut cs = vec![0.0; nt * s];
    let mut ss = vec![0.0; nt * s];
    for t in 0..nt {
        cs[t * s..(t + 1) * s].copy_from_slice(&cos_t[t * n..t * n + s]);
        ss[t * s..(t + 1) * s].copy_from_slice(&sin_t[t * n..t * n + s]);
    }
    let mut pc = vec![0.0; nt * s];
    let mut ps = vec![0.0; nt * s];
    // (pair c)_m and (pair s)_m for every t
    gemm(nt, s, s, (&cs, s as isize, 1), (&pair, 1, s as isize), &mut pc);
    gemm(nt, s, s, (&ss, s as isize, 1), (&pair, 1, s as isize), &mut ps);
    let mut pct = vec![0.0; nt * s];
    let mut pst = vec![0.0; nt * s];
    gemm(nt, s, s, (&cs, s as isize, 1), (&pair, s as isize, 1), &mut pct);
    gemm(nt, s, s, (&ss, s as isize, 1), (&pair, s as isize, 1), &mut pst);
    let mut residue = 0.0f64;
    for t in 0..nt {
        let mut im = 0.0;
        for m in 0..s {
            let (c, sn) = (cs[t * s + m], ss[t * s + m]);
            // sum_n (w_m + w_n) pair_mn sin(theta_m - theta_n)
            im += w[m] * (sn * pc[t * s + m] - c * ps[t * s + m]);
            im += w[m] * (c * pst[t * s + m] - sn * pct[t * s + m]);
        }
        residue = residue.max((im / (2.0 * z)).abs());
    }
    if residue.is_nan() || residue > MAX_IMAGINARY_RESIDUE || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::ImaginaryResidueTooLarge { residue });
    }
    CorrelationSeries::new(taus.to_vec(), values, SeriesKind::Qm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialParams;

    fn ctx(m: f64) -> ModelContext {
        ModelContext::new(PotentialParams::new(1.0, 0.1).unwrap(), 1.0, m).unwrap()
    }

    #[test]
    fn stencil_entries_for_unit_spacing() {
        let grid = SpatialGrid::new(0.0, 10.0, 10).unwrap();
        let c = ModelContext::new(PotentialParams::new(0.0, 0.0).unwrap(), 1.0, 1.0).unwrap();
        let mut h = build_hamiltonian(&grid, &c);
        // remove the quartic so that V vanishes identically
        for k in 0..grid.n_nodes() {
            let q = 0.25 * (grid.node(k) - 0.5).powi(4);
            for ch in 0..2 {
                let i = 2 * k + ch;
                h.entries.set(i, i, h.entries.get(i, i) - q);
            }
        }
        let d = h.to_dense();
        for i in 0..d.rows {
            assert!((d.get(i, i) - 1.25).abs() < 1e-15);
            if i + 2 < d.rows {
                assert!((d.get(i, i + 2) + 16.0 / 24.0).abs() < 1e-15);
            }
            if i + 4 < d.rows {
                assert!((d.get(i, i + 4) - 1.0 / 24.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hamiltonian_structure() {
        let grid = SpatialGrid::new(-6.0, 6.0, 40).unwrap();
        let h = build_hamiltonian(&grid, &ctx(100.0));
        let d = h.to_dense();
        assert!(d.is_symmetric());
        assert!(d.bandwidth() <= 4);
        for k in 0..grid.n_nodes() {
            assert_eq!(d.get(2 * k, 2 * k + 1), 0.1);
            if k + 1 < grid.n_nodes() {
                assert_eq!(d.get(2 * k, 2 * k + 3), 0.0);
                assert_eq!(d.get(2 * k + 1, 2 * k + 2), 0.0);
            }
        }
        for i in 0..d.rows {
            for j in 0..d.cols {
                if i.abs_diff(j) == 3 {
                    assert_eq!(d.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn free_dispersion_with_exact_sine_modes() {
        // With the corner entries corrected the fourth-order stencil is
        // diagonalized exactly by sine modes; the truncated matrix differs by
        // a rank-two perturbation of size f that bounds the eigenvalue shift.
        let grid = SpatialGrid::new(0.0, 1.0, 40).unwrap();
        let m = 3.0;
        let c = ModelContext::new(PotentialParams::new(0.0, 0.0).unwrap(), 1.0, m).unwrap();
        let h = build_scalar_hamiltonian(&grid, &c, |_| 0.0);
        let f = 1.0 / (24.0 * m * grid.dx().powi(2));
        let nodes = grid.n_nodes();
        let dispersion = |j: usize| {
            let th = j as f64 * std::f64::consts::PI / (nodes + 1) as f64;
            2.0 * f * (15.0 - 16.0 * th.cos() + (2.0 * th).cos())
        };
        let mut corrected = h.entries.clone();
        corrected.set(0, 0, 29.0 * f);
        corrected.set(nodes - 1, nodes - 1, 29.0 * f);
        let exact = SymmetricEigen::banded(corrected).unwrap();
        for (j, v) in exact.values.iter().enumerate() {
            assert!((v - dispersion(j + 1)).abs() < 1e-9 * v.abs().max(1.0), "{j}");
        }
        let eig = eigendecompose(&h).unwrap();
        for (j, v) in eig.eigenvalues.iter().enumerate() {
            assert!((v - dispersion(j + 1)).abs() <= f * (1.0 + 1e-9));
        }
    }

    #[test]
    fn harmonic_ground_state() {
        let grid = SpatialGrid::new(-6.0, 6.0, 600).unwrap();
        let c = ctx(100.0);
        let h = build_scalar_hamiltonian(&grid, &c, |x| 0.5 * x * x);
        let eig = eigendecompose(&h).unwrap();
        assert!((eig.eigenvalues[0] - 0.05).abs() < 1e-6, "{}", eig.eigenvalues[0]);
    }

    #[test]
    fn ground_state_density_is_hermite_gaussian() {
        let grid = SpatialGrid::new(-3.0, 3.0, 300).unwrap();
        let m = 100.0;
        let c = ctx(m);
        let h = build_scalar_hamiltonian(&grid, &c, |x| 0.5 * x * x);
        let eig = eigendecompose(&h).unwrap();
        let rho = equilibrium_density(&eig, 400.0, &grid).unwrap();
        // |phi_0|^2 with hbar = M^{-1/2}: exp(-sqrt(M) x^2) sqrt(sqrt(M)/pi)
        let sm = m.sqrt();
        for (k, v) in rho.values.iter().enumerate() {
            let x = grid.node(k);
            let g = (sm / std::f64::consts::PI).sqrt() * (-sm * x * x).exp();
            assert!((v - g).abs() < 1e-5, "x={x}");
        }
        assert!((rho.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn observables_are_exactly_structured() {
        let grid = SpatialGrid::new(-6.0, 6.0, 30).unwrap();
        let h = build_hamiltonian(&grid, &ctx(50.0));
        let ops = observable_matrices(&grid, &h).unwrap();
        let a = ops.a.to_dense();
        for i in 0..a.rows {
            for j in 0..a.cols {
                assert_eq!(a.get(i, j), -a.get(j, i));
            }
        }
        let diag = SpatialGrid::new(0.0, 1.0, 8).unwrap();
        let mut hd = build_scalar_hamiltonian(&diag, &ctx(1.0), |x| x);
        hd.entries = BandMatrix::zeros(9, 2);
        for i in 0..9 {
            hd.entries.set(i, i, i as f64);
        }
        let ops = observable_matrices(&diag, &hd).unwrap();
        assert!(ops.a.val.is_empty());
    }

    #[test]
    fn momentum_acts_on_plane_waves() {
        let grid = SpatialGrid::new(-6.0, 6.0, 1200).unwrap();
        let m = 100.0;
        let c = ctx(m);
        let h = build_scalar_hamiltonian(&grid, &c, |_| 0.0);
        let ops = observable_matrices(&grid, &h).unwrap();
        let p = 1.3;
        let k = m.sqrt() * p;
        let xs = grid.nodes();
        let re: Vec<f64> = xs.iter().map(|x| (k * x).cos()).collect();
        let im: Vec<f64> = xs.iter().map(|x| (k * x).sin()).collect();
        // P = iA, so P(re + i im) = i A re - A im
        let are = ops.a.matvec(&re);
        let aim = ops.a.matvec(&im);
        let kd = k * grid.dx();
        let expect = m.sqrt() * (32.0 * kd.sin() - 4.0 * (2.0 * kd).sin()) / (24.0 * m * grid.dx());
        for i in 2..xs.len() - 2 {
            let pr = -aim[i];
            let pi = are[i];
            assert!((pr - expect * re[i]).abs() < 1e-11 && (pi - expect * im[i]).abs() < 1e-11);
            // fourth-order symbol error p (k dx)^4 / 30 = 1.2e-5 at this wave number
            assert!((pr - p * re[i]).abs() < 2e-5 && (pi - p * im[i]).abs() < 2e-5);
        }
    }

    #[test]
    fn harmonic_momentum_correlation_at_zero() {
        let grid = SpatialGrid::new(-6.0, 6.0, 1200).unwrap();
        let m = 100.0;
        let c = ctx(m);
        let h = build_scalar_hamiltonian(&grid, &c, |x| 0.5 * x * x);
        let eig = eigendecompose(&h).unwrap();
        let ops = observable_matrices(&grid, &h).unwrap();
        let s = correlation_qm(&eig, &ops, Observable::Momentum, 1.0, m, &[0.0, 1.0]).unwrap();
        assert!((s.values[0] - 1.0).abs() < 0.02, "{}", s.values[0]);
        // harmonic motion rotates momentum into position: S(tau) = S(0) cos(tau)
        assert!((s.values[1] - s.values[0] * 1f64.cos()).abs() < 1e-4, "{:?}", s.values);
        // exact quantum value (hbar/2) coth(beta hbar/2) with hbar = M^{-1/2}
        let hb = 1.0 / m.sqrt();
        let exact = 0.5 * hb / (0.5 * hb).tanh();
        // the discrete momentum symbol is p (1 - (k dx)^4 / 30) with k = sqrt(M) p,
        // so <P^2> is low by about M^2 dx^4 <p^6> / 15 = 1e-4 here
        assert!((s.values[0] - exact).abs() < 2e-4, "{} {}", s.values[0], exact);
    }

    #[test]
    fn correlation_is_shift_invariant() {
        let grid = SpatialGrid::new(-5.0, 5.0, 80).unwrap();
        let c = ctx(20.0);
        let h = build_hamiltonian(&grid, &c);
        let ops = observable_matrices(&grid, &h).unwrap();
        let taus = uniform_taus(3.0, 0.25);
        for obs in [Observable::Position, Observable::Momentum] {
            let a = correlation_qm(&eigendecompose(&h).unwrap(), &ops, obs, 1.0, 20.0, &taus).unwrap();
            let b = correlation_qm(&eigendecompose(&h.shifted(7.3)).unwrap(), &ops, obs, 1.0, 20.0, &taus)
                .unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-3), "{x} {y}");
            }
        }
    }

    #[test]
    fn taus_must_start_at_zero() {
        let grid = SpatialGrid::new(-5.0, 5.0, 20).unwrap();
        let h = build_scalar_hamiltonian(&grid, &ctx(1.0), |x| x * x);
        let eig = eigendecompose(&h).unwrap();
        let ops = observable_matrices(&grid, &h).unwrap();
        assert!(correlation_qm(&eig, &ops, Observable::Position, 1.0, 1.0, &[0.5]).is_err());
    }
}
