//! Benchmark fixtures for the criterion suite in `benches/`.

use fraplace_core::{assemble_kernel, build_grid, Kernel};

/// Kernel on `(0, 1)` with `n` nodes.
pub fn unit_kernel(n: usize, s: f64, p: f64) -> Kernel {
    let grid = build_grid(0.0, 1.0, n).expect("valid grid");
    assemble_kernel(&grid, s, p).expect("valid kernel")
}

/// A smooth positive test field vanishing towards the boundary.
pub fn bump(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let x = i as f64 / (n + 1) as f64;
            (x * (1.0 - x)).sqrt()
        })
        .collect()
}
