//! Weighted principal eigenvalue `λ₁(a)`.
//!
//! `λ₁(a)` is the minimum over nonzero grid functions of
//!
//! ```text
//! R(v) = [E(v) − Σ_{v_i≠0} a_i |v_i|^p h] / Σ_i |v_i|^p h
//! ```
//!
//! Nodes with `a_i = +∞` make the infimum `−∞`. Nodes with `a_i = −∞` force
//! `v_i = 0`. For `p = 2` the quotient is that of a symmetric matrix, which
//! gives an independent dense oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descent::{minimize, DescentOptions, Objective, StopReason};
use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::nonlocal::{abs_pow, check_len, energy_unchecked, jp, operator_into, Field, Kernel};
use crate::reactions::ExtendedReal;
use crate::sum::pairwise_sum_by;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Random positive starts in addition to the constant start.
    pub restarts: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-9,
            max_iter: 50_000,
            restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda: ExtendedReal,
    /// Eigenfunction with `‖v‖_p = 1`, `v ≥ 0`; all zeros when `lambda` is infinite.
    pub v: Field,
    /// Sup-norm of the Euler–Lagrange defect divided by `h`, at the normalized `v`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Diagnostics such as excluded support or mixed infinite weights.
    pub flags: Vec<String>,
}

impl EigenResult {
    fn infinite(lambda: ExtendedReal, n: usize, flags: Vec<String>) -> Self {
        EigenResult {
            lambda,
            v: Field::zeros(n),
            residual: 0.0,
            iterations: 0,
            converged: true,
            stop: StopReason::Converged,
            flags,
        }
    }
}

/// Rayleigh quotient restricted to the free nodes.
struct Rayleigh<'a> {
    kernel: &'a Kernel,
    a: Vec<f64>,
    free: Vec<bool>,
    h: f64,
}

impl Rayleigh<'_> {
    fn mass(&self, v: &[f64]) -> f64 {
        let p = self.kernel.p();
        pairwise_sum_by(v.len(), |i| abs_pow(v[i], p)) * self.h
    }

    fn value(&self, v: &[f64]) -> f64 {
        let p = self.kernel.p();
        let mass = self.mass(v);
        let weighted = pairwise_sum_by(v.len(), |i| {
            if v[i] != 0.0 {
                self.a[i] * abs_pow(v[i], p)
            } else {
                0.0
            }
        }) * self.h;
        (energy_unchecked(self.kernel, v) - weighted) / mass
    }
}

impl Objective for Rayleigh<'_> {
    fn len(&self) -> usize {
        self.a.len()
    }

    fn eval(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.kernel.p();
        let mass = self.mass(v);
        let r = self.value(v);
        operator_into(self.kernel, v, grad);
        for i in 0..v.len() {
            grad[i] = if self.free[i] {
                let jv = jp(p, v[i]) * self.h;
                p / mass * (grad[i] - self.a[i] * jv - r * jv)
            } else {
                0.0
            };
        }
        r
    }

    fn residual(&self, v: &[f64], grad: &[f64]) -> f64 {
        let p = self.kernel.p();
        let scale = self.mass(v).powf(1.0 / p) / (p * self.h);
        grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) * scale
    }

    fn project(&self, v: &mut [f64]) -> bool {
        let mut changed = false;
        for (vi, &free) in v.iter_mut().zip(&self.free) {
            if !free {
                *vi = 0.0;
            } else if *vi < 0.0 {
                *vi = -*vi;
                changed = true;
            }
        }
        let norm = self.mass(v).powf(1.0 / self.kernel.p());
        if norm > 0.0 && !(0.5..=2.0).contains(&norm) {
            v.iter_mut().for_each(|x| *x /= norm);
            changed = true;
        }
        changed
    }
}

fn check_grid(kernel: &Kernel, grid: &Grid) -> Result<()> {
    check_len(kernel.n(), grid.n())?;
    if kernel.grid() != grid {
        return Err(Error::validation(
            "grid",
            "kernel was assembled on a different grid",
        ));
    }
    Ok(())
}

/// `R(v)` for a weight that is finite wherever `v` is nonzero.
pub fn rayleigh_quotient(
    kernel: &Kernel,
    grid: &Grid,
    a: &[ExtendedReal],
    v: &[f64],
) -> Result<f64> {
    check_grid(kernel, grid)?;
    check_len(kernel.n(), a.len())?;
    check_len(kernel.n(), v.len())?;
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::validation(
            "v",
            "Rayleigh quotient of the zero field",
        ));
    }
    let mut finite = vec![0.0; a.len()];
    for (i, (w, &vi)) in a.iter().zip(v).enumerate() {
        match w.finite() {
            Some(x) => finite[i] = x,
            None if vi != 0.0 => {
                return Err(Error::validation(
                    "a",
                    format!("infinite weight at node {i} where v is nonzero"),
                ))
            }
            None => {}
        }
    }
    let rq = Rayleigh {
        kernel,
        a: finite,
        free: vec![true; v.len()],
        h: grid.cell_measure(),
    };
    Ok(rq.value(v))
}

/// Principal eigenpair by Rayleigh-quotient descent from the constant field
/// and `opts.restarts` random positive fields; the smallest value wins.
pub fn principal_eigenpair(
    kernel: &Kernel,
    grid: &Grid,
    a: &[ExtendedReal],
    opts: &EigenOptions,
) -> Result<EigenResult> {
    principal_eigenpair_from(kernel, grid, a, opts, &[])
}

/// As [`principal_eigenpair`], with extra starting fields tried after the default ones.
pub fn principal_eigenpair_from(
    kernel: &Kernel,
    grid: &Grid,
    a: &[ExtendedReal],
    opts: &EigenOptions,
    warm: &[Field],
) -> Result<EigenResult> {
    check_grid(kernel, grid)?;
    let n = kernel.n();
    check_len(n, a.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::validation("eigen.tol", "tolerance must be positive"));
    }
    for w in warm {
        check_len(n, w.len())?;
    }
    if a.iter()
        .any(|w| matches!(w, ExtendedReal::Finite(x) if x.is_nan()))
    {
        return Err(Error::validation("a", "weight is NaN"));
    }

    let plus = a.contains(&ExtendedReal::PlusInfinity);
    let minus = a
        .iter()
        .filter(|w| **w == ExtendedReal::MinusInfinity)
        .count();
    let mut flags = Vec::new();
    if plus && minus > 0 {
        flags.push("experimental: weight takes both +inf and -inf".to_string());
    }
    if plus {
        return Ok(EigenResult::infinite(ExtendedReal::MinusInfinity, n, flags));
    }
    if minus == n {
        flags.push("admissible set is empty: weight is -inf everywhere".to_string());
        return Ok(EigenResult::infinite(ExtendedReal::PlusInfinity, n, flags));
    }
    if minus > 0 {
        flags.push(format!(
            "support restricted: {minus} nodes with weight -inf excluded"
        ));
    }

    let free: Vec<bool> = a.iter().map(|w| w.is_finite()).collect();
    let rq = Rayleigh {
        kernel,
        a: a.iter().map(|w| w.finite().unwrap_or(0.0)).collect(),
        free: free.clone(),
        h: grid.cell_measure(),
    };
    let dopts = DescentOptions::new(opts.tol, opts.max_iter);

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(1 + opts.restarts + warm.len());
    starts.push(free.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect());
    for r in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(r as u64 + 1);
        starts.push(
            free.iter()
                .map(|&f| if f { rng.gen_range(0.05..1.0) } else { 0.0 })
                .collect(),
        );
    }
    for w in warm {
        let mut x: Vec<f64> = w.iter().map(|v| v.abs()).collect();
        if free.iter().zip(&x).all(|(&f, &v)| !f || v == 0.0) {
            continue;
        }
        for (xi, &f) in x.iter_mut().zip(&free) {
            if !f {
                *xi = 0.0;
            }
        }
        starts.push(x);
    }

    let mut best: Option<(f64, Vec<f64>, f64, usize, StopReason)> = None;
    let mut total_iterations = 0;
    for x0 in &starts {
        let out = minimize(&rq, x0, &dopts, None);
        total_iterations += out.iterations;
        let mut v = out.x;
        let norm = rq.mass(&v).powf(1.0 / kernel.p());
        v.iter_mut().for_each(|x| *x /= norm);
        let value = rq.value(&v);
        let mut g = vec![0.0; n];
        rq.eval(&v, &mut g);
        let residual = rq.residual(&v, &g);
        if best.as_ref().map_or(true, |b| value < b.0) {
            best = Some((value, v, residual, out.iterations, out.reason));
        }
    }
    let (value, v, residual, _, reason) = best.expect("at least one start");
    if reason == StopReason::MaxIter {
        flags.push("iteration limit reached".to_string());
    }
    Ok(EigenResult {
        lambda: ExtendedReal::Finite(value),
        v: Field(v),
        residual,
        iterations: total_iterations,
        converged: residual <= opts.tol,
        stop: if residual <= opts.tol {
            StopReason::Converged
        } else {
            reason
        },
        flags,
    })
}

/// Dense symmetric matrix whose quadratic form is `E(v)` for `p = 2`.
pub fn energy_matrix_p2(kernel: &Kernel) -> Result<DMatrix<f64>> {
    if kernel.p() != 2.0 {
        return Err(Error::validation(
            "p",
            format!("dense oracle needs p = 2, got {}", kernel.p()),
        ));
    }
    let n = kernel.n();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let row = kernel.row(i);
        let mut diag = 0.0;
        for j in 0..n {
            if j != i {
                m[(i, j)] = -2.0 * row[j];
                diag += 2.0 * row[j];
            }
        }
        m[(i, i)] = diag + kernel.exterior()[i];
    }
    Ok(m)
}

/// Exact `λ₁(a)` for `p = 2` from a dense symmetric eigensolver.
pub fn dense_oracle_p2(kernel: &Kernel, grid: &Grid, a: &[f64]) -> Result<EigenResult> {
    check_grid(kernel, grid)?;
    check_len(kernel.n(), a.len())?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("a", "dense oracle needs finite weights"));
    }
    let h = grid.cell_measure();
    let mut m = energy_matrix_p2(kernel)?;
    for (i, ai) in a.iter().enumerate() {
        m[(i, i)] -= ai * h;
    }
    m /= h;
    let eig = SymmetricEigen::new(m);
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("nonempty matrix");
    let col = eig.eigenvectors.column(k);
    let sign = if col.sum() < 0.0 { -1.0 } else { 1.0 };
    let mass: f64 = col.iter().map(|x| x * x).sum::<f64>() * h;
    let v: Vec<f64> = col.iter().map(|x| (sign * x / mass.sqrt()).abs()).collect();

    let rq = Rayleigh {
        kernel,
        a: a.to_vec(),
        free: vec![true; a.len()],
        h,
    };
    let mut g = vec![0.0; a.len()];
    rq.eval(&v, &mut g);
    Ok(EigenResult {
        lambda: ExtendedReal::Finite(lambda),
        residual: rq.residual(&v, &g),
        v: Field(v),
        iterations: 0,
        converged: true,
        stop: StopReason::Converged,
        flags: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub lambda_a: ExtendedReal,
    pub lambda_b: ExtendedReal,
    /// `λ₁(a) − λ₁(b)` when both are finite.
    pub margin: Option<f64>,
    pub holds: bool,
}

/// Check `λ₁(a) ≥ λ₁(b)` for `a ≤ b`. The eigenfunction for `a` is offered
/// as an extra start for `b`, so the descent value for `b` can only be lower.
pub fn lambda_monotonicity_check(
    kernel: &Kernel,
    grid: &Grid,
    a: &[ExtendedReal],
    b: &[ExtendedReal],
    opts: &EigenOptions,
) -> Result<MonotonicityReport> {
    check_len(kernel.n(), a.len())?;
    check_len(kernel.n(), b.len())?;
    if let Some(i) = a.iter().zip(b).position(|(x, y)| !(x <= y)) {
        return Err(Error::validation(
            "a",
            format!("need a <= b pointwise, violated at node {i}"),
        ));
    }
    let ra = principal_eigenpair(kernel, grid, a, opts)?;
    let warm = if ra.lambda.is_finite() {
        vec![ra.v.clone()]
    } else {
        Vec::new()
    };
    let rb = principal_eigenpair_from(kernel, grid, b, opts, &warm)?;
    let margin = match (ra.lambda, rb.lambda) {
        (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) => Some(x - y),
        _ => None,
    };
    let holds = match margin {
        Some(m) => m >= -2.0 * opts.tol,
        None => ra.lambda >= rb.lambda,
    };
    Ok(MonotonicityReport {
        lambda_a: ra.lambda,
        lambda_b: rb.lambda,
        margin,
        holds,
    })
}

/// A weight field equal to `c` at every node.
pub fn constant_weight(n: usize, c: f64) -> Vec<ExtendedReal> {
    vec![ExtendedReal::Finite(c); n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;
    use crate::nonlocal::{assemble_kernel, gagliardo_energy, lp_norm};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup(n: usize, p: f64) -> (Grid, Kernel) {
        let g = build_grid(0.0, 1.0, n).unwrap();
        let k = assemble_kernel(&g, 0.5, p).unwrap();
        (g, k)
    }

    #[test]
    fn quotient_with_zero_weight_is_energy_over_mass() {
        let (g, k) = setup(8, 2.0);
        let v: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin() + 1.2).collect();
        let r = rayleigh_quotient(&k, &g, &constant_weight(8, 0.0), &v).unwrap();
        let mass = lp_norm(&g, &v, 2.0).unwrap().powi(2);
        assert_relative_eq!(
            r,
            gagliardo_energy(&k, &v).unwrap() / mass,
            max_relative = 1e-14
        );
        assert!(r >= 0.0);
        let shifted = rayleigh_quotient(&k, &g, &constant_weight(8, 3.0), &v).unwrap();
        assert_relative_eq!(shifted, r - 3.0, max_relative = 1e-13);
    }

    #[test]
    fn quotient_rejects_degenerate_inputs() {
        let (g, k) = setup(4, 2.0);
        let w = constant_weight(4, 0.0);
        assert!(rayleigh_quotient(&k, &g, &w, &[0.0; 4]).is_err());
        let mut inf = w.clone();
        inf[1] = ExtendedReal::MinusInfinity;
        assert!(rayleigh_quotient(&k, &g, &inf, &[1.0, 1.0, 0.0, 1.0]).is_err());
        assert!(rayleigh_quotient(&k, &g, &inf, &[1.0, 0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn two_node_oracle_matches_closed_form() {
        let (g, k) = setup(2, 2.0);
        let h = g.h();
        let w = k.weight(0, 1);
        let (k0, k1) = (k.exterior()[0], k.exterior()[1]);
        let (a0, a1) = (0.3, -1.1);
        // [[2w + κ0 − a0 h, −2w], [−2w, 2w + κ1 − a1 h]] / h
        let p = (2.0 * w + k0 - a0 * h) / h;
        let q = (2.0 * w + k1 - a1 * h) / h;
        let r = -2.0 * w / h;
        let smallest = 0.5 * (p + q) - (0.25 * (p - q).powi(2) + r * r).sqrt();
        let res = dense_oracle_p2(&k, &g, &[a0, a1]).unwrap();
        assert_relative_eq!(res.lambda.expect_finite(), smallest, max_relative = 1e-13);
    }

    #[test]
    fn oracle_shift_and_rejections() {
        let (g, k) = setup(24, 2.0);
        let l0 = dense_oracle_p2(&k, &g, &[0.0; 24])
            .unwrap()
            .lambda
            .expect_finite();
        let l7 = dense_oracle_p2(&k, &g, &[7.0; 24])
            .unwrap()
            .lambda
            .expect_finite();
        assert!((l0 - 7.0 - l7).abs() < 1e-12);
        let (g3, k3) = setup(24, 3.0);
        assert!(dense_oracle_p2(&k3, &g3, &[0.0; 24]).is_err());
        assert!(dense_oracle_p2(&k, &g, &[f64::INFINITY; 24]).is_err());
    }

    #[test]
    fn descent_matches_oracle_for_p2() {
        let (g, k) = setup(32, 2.0);
        let a: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin() * 4.0).collect();
        let ext: Vec<ExtendedReal> = a.iter().map(|&x| x.into()).collect();
        let oracle = dense_oracle_p2(&k, &g, &a).unwrap();
        let desc = principal_eigenpair(&k, &g, &ext, &EigenOptions::default()).unwrap();
        assert!(desc.converged, "residual {}", desc.residual);
        let (lo, ld) = (oracle.lambda.expect_finite(), desc.lambda.expect_finite());
        assert!(((lo - ld) / lo).abs() < 1e-8, "oracle {lo}, descent {ld}");
        let align: f64 = oracle
            .v
            .iter()
            .zip(desc.v.iter())
            .map(|(x, y)| x * y)
            .sum::<f64>()
            * g.h();
        assert!(align > 1.0 - 1e-6);
        assert!(desc.v.iter().all(|&x| x > 0.0));
        assert!((lp_norm(&g, &desc.v, 2.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn infinite_weights() {
        let (g, k) = setup(16, 2.0);
        let mut a = constant_weight(16, 0.0);
        a[3] = ExtendedReal::PlusInfinity;
        let r = principal_eigenpair(&k, &g, &a, &EigenOptions::default()).unwrap();
        assert_eq!(r.lambda, ExtendedReal::MinusInfinity);
        assert_eq!(r.iterations, 0);

        let all = vec![ExtendedReal::MinusInfinity; 16];
        let r = principal_eigenpair(&k, &g, &all, &EigenOptions::default()).unwrap();
        assert_eq!(r.lambda, ExtendedReal::PlusInfinity);

        let mut mixed = constant_weight(16, 0.0);
        mixed[0] = ExtendedReal::PlusInfinity;
        mixed[5] = ExtendedReal::MinusInfinity;
        let r = principal_eigenpair(&k, &g, &mixed, &EigenOptions::default()).unwrap();
        assert!(r.flags.iter().any(|f| f.starts_with("experimental")));

        // Excluding nodes raises the eigenvalue and pins v there.
        let mut half = constant_weight(16, 0.0);
        for w in half.iter_mut().take(8) {
            *w = ExtendedReal::MinusInfinity;
        }
        let full = principal_eigenpair(&k, &g, &constant_weight(16, 0.0), &EigenOptions::default())
            .unwrap();
        let restricted = principal_eigenpair(&k, &g, &half, &EigenOptions::default()).unwrap();
        assert!(restricted.lambda > full.lambda);
        assert!(restricted.v[..8].iter().all(|&x| x == 0.0));
        assert!(restricted.v[8..].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn symmetric_interval_gives_symmetric_eigenfunction() {
        let g = build_grid(-1.0, 1.0, 31).unwrap();
        let k = assemble_kernel(&g, 0.5, 2.0).unwrap();
        let r = principal_eigenpair(&k, &g, &constant_weight(31, 0.0), &EigenOptions::default())
            .unwrap();
        for i in 0..31 {
            assert!((r.v[i] - r.v[30 - i]).abs() < 1e-8);
        }
    }

    #[test]
    fn monotonicity_with_bump() {
        let (g, k) = setup(24, 2.5);
        let a = constant_weight(24, 0.0);
        let b: Vec<ExtendedReal> = g
            .nodes()
            .iter()
            .map(|&x| ExtendedReal::Finite(if (x - 0.5).abs() < 0.2 { 3.0 } else { 0.0 }))
            .collect();
        let rep = lambda_monotonicity_check(&k, &g, &a, &b, &EigenOptions::default()).unwrap();
        assert!(rep.holds);
        assert!(rep.margin.unwrap() > 0.0);
        let same = lambda_monotonicity_check(&k, &g, &a, &a, &EigenOptions::default()).unwrap();
        assert!(same.margin.unwrap().abs() < 1e-8);
        assert!(lambda_monotonicity_check(&k, &g, &b, &a, &EigenOptions::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn quotient_is_scale_invariant(
            v in proptest::collection::vec(-2.0f64..2.0, 10),
            t in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            p in 1.5f64..3.0,
        ) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
            let (g, k) = setup(10, p);
            let w: Vec<ExtendedReal> = (0..10).map(|i| ExtendedReal::Finite(i as f64 - 4.5)).collect();
            let r1 = rayleigh_quotient(&k, &g, &w, &v).unwrap();
            let tv: Vec<f64> = v.iter().map(|x| t * x).collect();
            let r2 = rayleigh_quotient(&k, &g, &w, &tv).unwrap();
            prop_assert!((r1 - r2).abs() <= 1e-10 * r1.abs().max(1.0));
            let av: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            prop_assert!(rayleigh_quotient(&k, &g, &w, &av).unwrap() <= r1 + 1e-10 * r1.abs().max(1.0));
        }
    }
}
