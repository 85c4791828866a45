//! Uniform grids on an interval or a rectangle.
//!
//! Nodes are the interior points of a uniform subdivision; the endpoints are
//! never nodes. Every grid function is understood as extended by zero outside
//! the domain, so the Dirichlet condition enters only through the exterior
//! tail of the kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Interval {
        lo: f64,
        hi: f64,
    },
    /// Axis-aligned rectangle, nodes indexed row-major (x fastest).
    Rectangle {
        x_lo: f64,
        x_hi: f64,
        y_lo: f64,
        y_hi: f64,
        nx: usize,
        ny: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    geometry: Geometry,
    n: usize,
    h: f64,
    hy: f64,
    nodes: Vec<f64>,
    nodes_y: Vec<f64>,
    dist: Vec<f64>,
}

/// Build the interval grid with `n` interior nodes on `(lo, hi)`.
pub fn build_grid(lo: f64, hi: f64, n: usize) -> Result<Grid> {
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::validation(
            "domain",
            format!("need finite lo < hi, got lo = {lo}, hi = {hi}"),
        ));
    }
    if n < 2 {
        return Err(Error::validation(
            "domain.n",
            format!("need n >= 2, got {n}"),
        ));
    }
    let h = (hi - lo) / (n + 1) as f64;
    let nodes: Vec<f64> = (1..=n).map(|i| lo + i as f64 * h).collect();
    // Computed from the index so that dist is exactly symmetric under reversal.
    let dist: Vec<f64> = (1..=n).map(|i| i.min(n + 1 - i) as f64 * h).collect();
    Ok(Grid {
        geometry: Geometry::Interval { lo, hi },
        n,
        h,
        hy: 0.0,
        nodes,
        nodes_y: Vec::new(),
        dist,
    })
}

/// Product grid on `(x_lo, x_hi) × (y_lo, y_hi)` with `nx × ny` interior nodes.
pub fn build_rectangle(
    (x_lo, x_hi): (f64, f64),
    (y_lo, y_hi): (f64, f64),
    nx: usize,
    ny: usize,
) -> Result<Grid> {
    let gx = build_grid(x_lo, x_hi, nx)?;
    let gy = build_grid(y_lo, y_hi, ny)?;
    let n = nx * ny;
    let mut nodes = Vec::with_capacity(n);
    let mut nodes_y = Vec::with_capacity(n);
    let mut dist = Vec::with_capacity(n);
    for j in 0..ny {
        for i in 0..nx {
            nodes.push(gx.nodes[i]);
            nodes_y.push(gy.nodes[j]);
            dist.push(gx.dist[i].min(gy.dist[j]));
        }
    }
    Ok(Grid {
        geometry: Geometry::Rectangle {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            nx,
            ny,
        },
        n,
        h: gx.h,
        hy: gy.h,
        nodes,
        nodes_y,
        dist,
    })
}

impl Grid {
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dim(&self) -> usize {
        match self.geometry {
            Geometry::Interval { .. } => 1,
            Geometry::Rectangle { .. } => 2,
        }
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing (x-spacing for rectangles).
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Volume of one cell: `h` on an interval, `hx·hy` on a rectangle.
    pub fn cell_measure(&self) -> f64 {
        match self.geometry {
            Geometry::Interval { .. } => self.h,
            Geometry::Rectangle { .. } => self.h * self.hy,
        }
    }

    /// Interval endpoints. For rectangles, the x-extent.
    pub fn bounds(&self) -> (f64, f64) {
        match self.geometry {
            Geometry::Interval { lo, hi } => (lo, hi),
            Geometry::Rectangle { x_lo, x_hi, .. } => (x_lo, x_hi),
        }
    }

    /// Node x-coordinates.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Node y-coordinates; empty on an interval.
    pub fn nodes_y(&self) -> &[f64] {
        &self.nodes_y
    }

    /// Distance from each node to the complement of the domain.
    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    /// Euclidean distance between nodes `i` and `j`.
    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        let dx = self.nodes[i] - self.nodes[j];
        if self.nodes_y.is_empty() {
            dx.abs()
        } else {
            dx.hypot(self.nodes_y[i] - self.nodes_y[j])
        }
    }
}

/// `d_i^s` at every node.
pub fn boundary_power(grid: &Grid, s: f64) -> Result<Vec<f64>> {
    check_s(s)?;
    Ok(grid.dist.iter().map(|d| d.powf(s)).collect())
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::validation("s", format!("need 0 < s < 1, got {s}")))
    }
}
