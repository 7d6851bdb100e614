//! Uniform grids and composite Simpson quadrature.

use crate::error::{Error, Result};

/// Composite Simpson weights for `n` uniform segments of width `h`.
///
/// Even `n` gives the classical 1-4-2-4-...-4-1 pattern. Odd `n >= 3` uses
/// Simpson on the first `n - 3` segments and the 3/8 rule on the last three,
/// which keeps fourth-order accuracy.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2, "Simpson quadrature needs at least two segments");
    let mut w = vec![0.0; n + 1];
    let (even_part, tail) = if n.is_multiple_of(2) { (n, 0) } else { (n - 3, 3) };
    if even_part > 0 {
        for (i, wi) in w.iter_mut().enumerate().take(even_part + 1) {
            *wi = if i == 0 || i == even_part {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
        }
    }
    if tail == 3 {
        let s = 3.0 * h / 8.0;
        let b = n - 3;
        w[b] += s;
        w[b + 1] += 3.0 * s;
        w[b + 2] += 3.0 * s;
        w[b + 3] += s;
    }
    w
}

/// Composite Simpson integral of equally spaced samples.
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let w = simpson_weights(samples.len() - 1, h);
    ordered_dot(&w, samples)
}

/// Dot product accumulated strictly left to right.
pub(crate) fn ordered_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Uniform one-dimensional grid with `k` segments on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub k: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, k: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidParameter(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if k < 8 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 8 segments, got {k}"
            )));
        }
        Ok(Self { x_min, x_max, k })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.k as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.k + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.k).map(|i| self.node(i)).collect()
    }

    pub fn simpson_weights(&self) -> Vec<f64> {
        simpson_weights(self.k, self.dx())
    }

    pub fn integrate(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.n_nodes());
        simpson(samples, self.dx())
    }
}

/// Tensor-product mesh on `[x_min, x_max] x [p_min, p_max]` with even
/// segment counts on both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl PhaseGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, p_min: f64, p_max: f64, np: usize) -> Result<Self> {
        if !(x_min < x_max && p_min < p_max) {
            return Err(Error::InvalidParameter("phase grid bounds must be ordered".into()));
        }
        if nx < 2 || np < 2 || !nx.is_multiple_of(2) || !np.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "phase grid segment counts must be even and positive, got {nx} x {np}"
            )));
        }
        Ok(Self { x_min, x_max, nx, p_min, p_max, np })
    }

    /// Symmetric momentum range `[-p_max, p_max]` with the same segment count on both axes.
    pub fn symmetric(x_min: f64, x_max: f64, p_max: f64, segments: usize) -> Result<Self> {
        Self::new(x_min, x_max, segments, -p_max, p_max, segments)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.np as f64
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..=self.nx).map(|i| self.x_min + i as f64 * self.dx()).collect()
    }

    pub fn p_nodes(&self) -> Vec<f64> {
        (0..=self.np).map(|j| self.p_min + j as f64 * self.dp()).collect()
    }

    pub fn x_weights(&self) -> Vec<f64> {
        simpson_weights(self.nx, self.dx())
    }

    pub fn p_weights(&self) -> Vec<f64> {
        simpson_weights(self.np, self.dp())
    }
}

/// Tensor-product composite Simpson integral of `f(x, p)` over `grid`.
pub fn simpson_2d<F: FnMut(f64, f64) -> f64>(mut f: F, grid: &PhaseGrid) -> f64 {
    let xs = grid.x_nodes();
    let ps = grid.p_nodes();
    let wx = grid.x_weights();
    let wp = grid.p_weights();
    let mut total = 0.0;
    for (x, wxi) in xs.iter().zip(&wx) {
        let row = ps.iter().zip(&wp).fold(0.0, |acc, (p, wpj)| acc + wpj * f(*x, *p));
        total += wxi * row;
    }
    total
}
