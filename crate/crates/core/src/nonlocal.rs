//! Discrete Gagliardo energy and the fractional p-Laplacian.
//!
//! For a grid function `u` (zero outside the domain) the energy is
//!
//! ```text
//! E(u) = Σ_{i≠j} |u_i − u_j|^p w_ij + Σ_i |u_i|^p κ_i
//! ```
//!
//! with pair weights `w_ij = h^{2N} / |x_i − x_j|^{N+ps}` and exterior
//! coefficients `κ_i = 2 h^N ∫_{Ω^c} |x_i − y|^{−N−ps} dy`, evaluated in
//! closed form on an interval. The self-interaction cell is dropped. The
//! operator is the gradient of `E/p`.

use std::ops::{Deref, DerefMut};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{check_s, Geometry, Grid};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::sum::{pairwise_sum, pairwise_sum_by};

/// Rows at or above this count are evaluated in parallel.
const PAR_ROWS: usize = 192;

/// Nodal values of a grid function; implicitly zero outside the domain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Positive part `u⁺`.
    pub fn positive_part(&self) -> Field {
        Field(self.0.iter().map(|&x| x.max(0.0)).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// `j_p(t) = |t|^{p−2} t`, with `j_p(0) = 0` for every `p > 1`.
#[inline]
pub fn jp(p: f64, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if p == 2.0 {
        t
    } else if p == 3.0 {
        t.abs() * t
    } else {
        t.abs().powf(p - 1.0).copysign(t)
    }
}

/// `|t|^p`.
#[inline]
pub fn abs_pow(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t * t
    } else if p == 3.0 {
        let a = t.abs();
        a * a * a
    } else {
        t.abs().powf(p)
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(
            "p",
            format!("need finite p > 1, got {p}"),
        ))
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Pair weights and exterior coefficients for one grid and one `(s, p)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    s: f64,
    p: f64,
    n: usize,
    weights: Vec<f64>,
    exterior: Vec<f64>,
    grid: Grid,
}

impl Kernel {
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `w_ij`; zero on the diagonal.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Row `i` of the weight matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// Exterior tail coefficients `κ_i`.
    pub fn exterior(&self) -> &[f64] {
        &self.exterior
    }

    /// The same kernel with a different exponent `p` (weights depend on `p`).
    pub fn with_p(&self, p: f64) -> Result<Kernel> {
        assemble_kernel(&self.grid, self.s, p)
    }
}

pub fn assemble_kernel(grid: &Grid, s: f64, p: f64) -> Result<Kernel> {
    check_s(s)?;
    check_p(p)?;
    let n = grid.n();
    let dim = grid.dim() as i32;
    let sigma = p * s;
    let exponent = dim as f64 + sigma;
    let cell = grid.cell_measure();
    let cell2 = cell * cell;

    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = cell2 / grid.node_distance(i, j).powf(exponent);
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }

    let exterior = match grid.geometry() {
        Geometry::Interval { lo, hi } => grid
            .nodes()
            .iter()
            .map(|&x| 2.0 * cell / sigma * ((x - lo).powf(-sigma) + (hi - x).powf(-sigma)))
            .collect(),
        Geometry::Rectangle {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            ..
        } => grid
            .nodes()
            .iter()
            .zip(grid.nodes_y())
            .map(|(&x, &y)| {
                2.0 * cell / sigma * rectangle_tail(x - x_lo, x_hi - x, y - y_lo, y_hi - y, sigma)
            })
            .collect(),
    };

    Ok(Kernel {
        s,
        p,
        n,
        weights,
        exterior,
        grid: grid.clone(),
    })
}

/// `∫_0^{2π} ρ(θ)^{−σ} dθ`, where `ρ(θ)` is the distance from an interior
/// point to the rectangle boundary along direction θ. `left, right, bottom,
/// top` are the distances to the four sides.
fn rectangle_tail(left: f64, right: f64, bottom: f64, top: f64, sigma: f64) -> f64 {
    // Each side seen from the point: normal distance a, tangential extents b1, b2.
    // Along that side ρ = a / cos φ for φ ∈ [−atan(b1/a), atan(b2/a)].
    let side = |a: f64, b1: f64, b2: f64| {
        let lo = -(b1 / a).atan();
        let hi = (b2 / a).atan();
        a.powf(-sigma) * adaptive_simpson(|phi: f64| phi.cos().powf(sigma), lo, hi, 1e-14)
    };
    side(right, bottom, top)
        + side(top, left, right)
        + side(left, top, bottom)
        + side(bottom, right, left)
}

/// Discrete Gagliardo energy `E(u)`.
pub fn gagliardo_energy(kernel: &Kernel, u: &[f64]) -> Result<f64> {
    check_len(kernel.n, u.len())?;
    Ok(energy_unchecked(kernel, u))
}

pub(crate) fn energy_unchecked(kernel: &Kernel, u: &[f64]) -> f64 {
    let p = kernel.p;
    let row_sum = |i: usize| {
        let row = kernel.row(i);
        let ui = u[i];
        let pairs = pairwise_sum_by(u.len(), |j| abs_pow(ui - u[j], p) * row[j]);
        pairs + abs_pow(ui, p) * kernel.exterior[i]
    };
    let rows: Vec<f64> = if kernel.n >= PAR_ROWS {
        (0..kernel.n).into_par_iter().map(row_sum).collect()
    } else {
        (0..kernel.n).map(row_sum).collect()
    };
    pairwise_sum(&rows)
}

/// Gradient of `E/p`: `g_i = 2 Σ_{j≠i} j_p(u_i − u_j) w_ij + j_p(u_i) κ_i`.
pub fn apply_operator(kernel: &Kernel, u: &[f64]) -> Result<Field> {
    check_len(kernel.n, u.len())?;
    let mut g = vec![0.0; kernel.n];
    operator_into(kernel, u, &mut g);
    Ok(Field(g))
}

pub(crate) fn operator_into(kernel: &Kernel, u: &[f64], out: &mut [f64]) {
    let p = kernel.p;
    let row_val = |i: usize| {
        let row = kernel.row(i);
        let ui = u[i];
        let pairs = pairwise_sum_by(u.len(), |j| jp(p, ui - u[j]) * row[j]);
        2.0 * pairs + jp(p, ui) * kernel.exterior[i]
    };
    if kernel.n >= PAR_ROWS {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = row_val(i));
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            *o = row_val(i);
        }
    }
}

/// Gap in the discrete Picone inequality,
/// `|c − d|^p − j_p(a − b) (c^p / a^{p−1} − d^p / b^{p−1})`, which is never negative.
pub fn picone_gap(p: f64, a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    check_p(p)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::validation(
            "a, b",
            format!("need a, b > 0, got a = {a}, b = {b}"),
        ));
    }
    if !(c >= 0.0 && d >= 0.0) {
        return Err(Error::validation(
            "c, d",
            format!("need c, d >= 0, got c = {c}, d = {d}"),
        ));
    }
    let lhs = jp(p, a - b) * (abs_pow(c, p) / a.powf(p - 1.0) - abs_pow(d, p) / b.powf(p - 1.0));
    Ok(abs_pow(c - d, p) - lhs)
}

/// h-weighted `L^q` norm; `q = f64::INFINITY` gives the max norm.
pub fn lp_norm(grid: &Grid, u: &[f64], q: f64) -> Result<f64> {
    check_len(grid.n(), u.len())?;
    if q.is_nan() || q < 1.0 {
        return Err(Error::validation("q", format!("need q >= 1, got {q}")));
    }
    if q == f64::INFINITY {
        return Ok(u.iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    let cell = grid.cell_measure();
    let sum = pairwise_sum_by(u.len(), |i| abs_pow(u[i], q));
    Ok((sum * cell).powf(1.0 / q))
}
