//! Property checks for the inequalities behind existence and uniqueness,
//! and the solvability criterion `λ₁(a₀) < 0 < λ₁(a∞)`.
//!
//! Every check returns a [`PropertyReport`] with margins rather than a
//! boolean. Random draws come from a counter-based generator keyed by
//! `(seed, trial)`, so any reported failure can be replayed on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{boundary_power, Grid};
use crate::error::{Error, Result};
use crate::nonlocal::{
    abs_pow, apply_operator, check_len, energy_unchecked, jp, picone_gap, Kernel,
};
use crate::reactions::{
    log_samples, validate_hypotheses, weights_infty, weights_zero, ExtendedReal, Reaction,
};
use crate::solver::{phi, phi_gradient, Classification, SolveResult};
use crate::spectral::{principal_eigenpair, EigenOptions};

type ScalarFn<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

const MAX_FAILURES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub trial: u64,
    pub margin: f64,
    pub inputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub trials: u64,
    pub violations: u64,
    /// Most negative slack observed (positive if every slack was positive).
    pub worst_margin: f64,
    /// Margins below `-tol` count as violations.
    pub tol: f64,
    pub failures: Vec<Failure>,
}

impl PropertyReport {
    pub fn new(property: impl Into<String>, tol: f64) -> Self {
        PropertyReport {
            property: property.into(),
            trials: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            tol,
            failures: Vec::new(),
        }
    }

    /// Record one trial. `inputs` is only evaluated on violation.
    pub fn record(&mut self, trial: u64, margin: f64, inputs: impl FnOnce() -> Vec<f64>) {
        self.trials += 1;
        let margin = if margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            margin
        };
        self.worst_margin = self.worst_margin.min(margin);
        if margin < -self.tol {
            self.violations += 1;
            if self.failures.len() < MAX_FAILURES {
                self.failures.push(Failure {
                    trial,
                    margin: clamp_finite(margin),
                    inputs: inputs(),
                });
            }
        }
    }

    /// Merge another report on the same property (counts add, margins take the min).
    pub fn merge(&mut self, other: PropertyReport) {
        self.trials += other.trials;
        self.violations += other.violations;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
        for f in other.failures {
            if self.failures.len() < MAX_FAILURES {
                self.failures.push(f);
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// The report with an infinite worst margin (no trials) replaced by a
    /// finite value, so it can be serialized as JSON.
    pub fn finalized(mut self) -> Self {
        self.worst_margin = clamp_finite(self.worst_margin);
        self
    }
}

fn clamp_finite(x: f64) -> f64 {
    x.clamp(f64::MIN, f64::MAX)
}

fn rng_for(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Run `trial` for indices `0..count` in parallel and merge in index order.
fn run_trials<F>(property: &str, tol: f64, offset: u64, count: u64, trial: F) -> PropertyReport
where
    F: Fn(u64) -> (f64, Vec<f64>) + Sync,
{
    let results: Vec<(f64, Vec<f64>)> = (offset..offset + count)
        .into_par_iter()
        .map(&trial)
        .collect();
    let mut report = PropertyReport::new(property, tol);
    for (i, (margin, inputs)) in results.into_iter().enumerate() {
        report.record(offset + i as u64, margin, || inputs);
    }
    report
}

/// Picone gap normalized by the magnitude of its terms once that exceeds one.
fn picone_margin(p: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    let gap = picone_gap(p, a, b, c, d).expect("inputs drawn in range");
    let cross = (a - b).abs().powf(p - 1.0)
        * (abs_pow(c, p) / a.powf(p - 1.0)).max(abs_pow(d, p) / b.powf(p - 1.0));
    gap / abs_pow(c - d, p).max(cross).max(1.0)
}

fn picone_corners() -> Vec<[f64; 4]> {
    let mut corners = Vec::new();
    for &a in &[1e-6, 1e-3, 0.5, 1.0, 2.0] {
        for &c in &[0.0, 1e-6, 0.3, 1.0, 2.0] {
            corners.push([a, a, c, c]);
            corners.push([a, a * (1.0 + 1e-12), c, c]);
            corners.push([a, a, c, 0.0]);
            corners.push([a, a, 0.0, c]);
            corners.push([a, 1.0, 0.0, 0.0]);
            corners.push([a, 1e-6, c, 0.0]);
            corners.push([1e-6, a, 0.0, c]);
            // equality case c/a = d/b
            corners.push([a, 2.0 * a, c, 2.0 * c]);
        }
    }
    corners
}

/// Discrete Picone inequality over random `(a, b, c, d)` and adversarial corners.
pub fn check_picone(p_values: &[f64], trials: u64, seed: u64) -> Result<PropertyReport> {
    if trials < 1 {
        return Err(Error::validation("trials", "need at least one trial"));
    }
    for &p in p_values {
        crate::nonlocal::check_p(p)?;
    }
    let mut report = PropertyReport::new("picone", 1e-12);
    for (pi, &p) in p_values.iter().enumerate() {
        let base = pi as u64 * (trials + 1_000);
        report.merge(run_trials("picone", 1e-12, base, trials, |t| {
            let mut rng = rng_for(seed, t);
            let pos = |rng: &mut ChaCha8Rng| {
                if rng.gen_bool(0.3) {
                    10f64.powf(rng.gen_range(-6.0..0.3))
                } else {
                    rng.gen_range(1e-6..2.0)
                }
            };
            let a = pos(&mut rng);
            let b = if rng.gen_bool(0.1) {
                a * (1.0 + rng.gen_range(-1e-9..1e-9))
            } else {
                pos(&mut rng)
            };
            let c = rng.gen_range(0.0..2.0);
            let d = if rng.gen_bool(0.1) {
                c * b / a
            } else {
                rng.gen_range(0.0..2.0)
            };
            (picone_margin(p, a, b, c, d), vec![p, a, b, c, d])
        }));
        let corners = picone_corners();
        let offset = base + trials;
        for (j, [a, b, c, d]) in corners.into_iter().enumerate() {
            report.record(offset + j as u64, picone_margin(p, a, b, c, d), || {
                vec![p, a, b, c, d]
            });
        }
    }
    Ok(report)
}

/// Submodularity margin of one field pair: the aggregate energy slack and
/// the smallest per-pair slack.
pub fn submodularity_margin(kernel: &Kernel, u: &[f64], v: &[f64]) -> f64 {
    let p = kernel.p();
    let n = kernel.n();
    let join: Vec<f64> = u.iter().zip(v).map(|(a, b)| a.max(*b)).collect();
    let meet: Vec<f64> = u.iter().zip(v).map(|(a, b)| a.min(*b)).collect();
    let aggregate = energy_unchecked(kernel, u) + energy_unchecked(kernel, v)
        - energy_unchecked(kernel, &join)
        - energy_unchecked(kernel, &meet);
    let mut worst = aggregate;
    for i in 0..n {
        for j in (i + 1)..n {
            let lhs = abs_pow(join[i] - join[j], p) + abs_pow(meet[i] - meet[j], p);
            let rhs = abs_pow(u[i] - u[j], p) + abs_pow(v[i] - v[j], p);
            worst = worst.min(rhs - lhs);
        }
        // against the zero exterior
        let lhs = abs_pow(join[i], p) + abs_pow(meet[i], p);
        let rhs = abs_pow(u[i], p) + abs_pow(v[i], p);
        worst = worst.min(rhs - lhs);
    }
    worst
}

/// `E(u∨v) + E(u∧v) ≤ E(u) + E(v)` on random signed field pairs; every
/// fourth pair has disjoint supports.
pub fn check_submodularity(kernel: &Kernel, trials: u64, seed: u64) -> Result<PropertyReport> {
    if trials < 1 {
        return Err(Error::validation("trials", "need at least one trial"));
    }
    let n = kernel.n();
    Ok(run_trials("submodularity", 1e-10, 0, trials, |t| {
        let mut rng = rng_for(seed, t);
        let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if t % 4 == 3 {
            for i in 0..n {
                if rng.gen_bool(0.5) {
                    u[i] = 0.0;
                    v[i] = v[i].abs();
                } else {
                    v[i] = 0.0;
                    u[i] = u[i].abs();
                }
            }
        }
        let margin = submodularity_margin(kernel, &u, &v);
        (
            margin,
            if margin < -1e-10 {
                [u, v].concat()
            } else {
                Vec::new()
            },
        )
    }))
}

fn comparison_terms(p: f64, u: f64, v: f64, w: f64) -> (f64, f64) {
    // w/u^{p−1} and w/v^{p−1}, zero at exterior points
    if u == 0.0 && v == 0.0 {
        (0.0, 0.0)
    } else {
        (w / u.powf(p - 1.0), w / v.powf(p - 1.0))
    }
}

/// The comparison inequality with `w = (u^p − v^p)⁺` for every node pair
/// and every node against the zero exterior.
pub fn check_comparison(kernel: &Kernel, u: &[f64], v: &[f64]) -> Result<PropertyReport> {
    let n = kernel.n();
    check_len(n, u.len())?;
    check_len(n, v.len())?;
    if u.iter().chain(v).any(|x| !(*x > 0.0)) {
        return Err(Error::validation(
            "u, v",
            "comparison check needs strictly positive fields",
        ));
    }
    let p = kernel.p();
    let w: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(a, b)| (abs_pow(*a, p) - abs_pow(*b, p)).max(0.0))
        .collect();
    let mut report = PropertyReport::new("comparison", 1e-10);
    let pair = |ux: f64, uy: f64, vx: f64, vy: f64, wx: f64, wy: f64| {
        let (qux, qvx) = comparison_terms(p, ux, vx, wx);
        let (quy, qvy) = comparison_terms(p, uy, vy, wy);
        let lhs = jp(p, ux - uy) * (qux - quy);
        let rhs = jp(p, vx - vy) * (qvx - qvy);
        lhs - rhs
    };
    let mut trial = 0u64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let m = pair(u[i], u[j], v[i], v[j], w[i], w[j]);
                report.record(trial, m, || {
                    vec![i as f64, j as f64, u[i], u[j], v[i], v[j]]
                });
                trial += 1;
            }
        }
        let m = pair(u[i], 0.0, v[i], 0.0, w[i], 0.0);
        report.record(trial, m, || vec![i as f64, -1.0, u[i], 0.0, v[i], 0.0]);
        trial += 1;
    }
    Ok(report)
}

/// [`check_comparison`] over random positive field pairs: scaled copies,
/// crossing pairs and independent draws.
pub fn check_comparison_random(kernel: &Kernel, trials: u64, seed: u64) -> Result<PropertyReport> {
    if trials < 1 {
        return Err(Error::validation("trials", "need at least one trial"));
    }
    let n = kernel.n();
    let reports: Vec<PropertyReport> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, t);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let u: Vec<f64> = match t % 3 {
                0 => v.iter().map(|x| 2.0 * x).collect(),
                1 => v.iter().map(|x| x * rng.gen_range(0.5..1.5)).collect(),
                _ => (0..n).map(|_| rng.gen_range(0.05..1.0)).collect(),
            };
            check_comparison(kernel, &u, &v).expect("positive fields")
        })
        .collect();
    let mut report = PropertyReport::new("comparison", 1e-10);
    for r in reports {
        report.merge(r);
    }
    Ok(report)
}

/// Difference-quotient bound for `u^p / v^{p−1}` with constants
/// `C₁ = p‖u/v‖^{p−1}` and `C₂ = (p−1)‖u/v‖^p`, for `u, v` within the band
/// `d^s/C ≤ u, v ≤ C d^s`. Exterior values are zero.
pub fn check_quotient_bound(
    grid: &Grid,
    u: &[f64],
    v: &[f64],
    s: f64,
    p: f64,
    band: f64,
) -> Result<PropertyReport> {
    let n = grid.n();
    check_len(n, u.len())?;
    check_len(n, v.len())?;
    crate::nonlocal::check_p(p)?;
    if !(band >= 1.0) {
        return Err(Error::validation(
            "band",
            "band constant must be at least 1",
        ));
    }
    let ds = boundary_power(grid, s)?;
    for i in 0..n {
        for (name, x) in [("u", u[i]), ("v", v[i])] {
            if !(x >= ds[i] / band && x <= band * ds[i]) {
                return Err(Error::validation(
                    name,
                    format!("hypothesis fails at node {i}: {x} is outside [d^s/C, C d^s]"),
                ));
            }
        }
    }
    let ratio = u.iter().zip(v).fold(0.0f64, |m, (a, b)| m.max(a / b));
    let c1 = p * ratio.powf(p - 1.0);
    let c2 = (p - 1.0) * ratio.powf(p);
    let q: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(a, b)| a.powf(p) / b.powf(p - 1.0))
        .collect();
    let mut report = PropertyReport::new("quotient_bound", 1e-10);
    let mut trial = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let m = c1 * (u[i] - u[j]).abs() + c2 * (v[i] - v[j]).abs() - (q[i] - q[j]).abs();
            report.record(trial, m, || {
                vec![i as f64, j as f64, u[i], u[j], v[i], v[j]]
            });
            trial += 1;
        }
        let m = c1 * u[i] + c2 * v[i] - q[i];
        report.record(trial, m, || vec![i as f64, -1.0, u[i], v[i]]);
        trial += 1;
    }
    Ok(report)
}

/// [`check_quotient_bound`] on random multiplicative perturbations of `d^s`.
pub fn check_quotient_bound_random(
    grid: &Grid,
    s: f64,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<PropertyReport> {
    let ds = boundary_power(grid, s)?;
    let band = 4.0;
    let mut report = PropertyReport::new("quotient_bound", 1e-10);
    for t in 0..trials {
        let mut rng = rng_for(seed, t);
        let u: Vec<f64> = ds.iter().map(|d| d * rng.gen_range(0.3..3.0)).collect();
        let v: Vec<f64> = ds.iter().map(|d| d * rng.gen_range(0.3..3.0)).collect();
        report.merge(check_quotient_bound(grid, &u, &v, s, p, band)?);
    }
    Ok(report)
}

/// Central-difference check of the operator (gradient of `E/p`) and, when a
/// truncated reaction is supplied, of the energy gradient. The margin is
/// `rel_tol − ‖fd − g‖_∞ / ‖g‖_∞`.
///
/// For `p < 2` the fields are strictly increasing with separated values so
/// that no difference sits at the non-smooth point of `j_p`.
pub fn check_gradients(
    kernel: &Kernel,
    grid: &Grid,
    reaction: Option<&Reaction>,
    trials: u64,
    seed: u64,
    rel_tol: f64,
) -> Result<PropertyReport> {
    let n = kernel.n();
    let p = kernel.p();
    let name = if reaction.is_some() {
        "phi_gradient"
    } else {
        "operator_gradient"
    };
    let mut report = PropertyReport::new(name, 0.0);
    for t in 0..trials {
        let mut rng = rng_for(seed, t);
        let u: Vec<f64> = if p < 2.0 {
            let mut acc = 0.0;
            (0..n)
                .map(|_| {
                    acc += rng.gen_range(0.05..0.15);
                    acc
                })
                .collect()
        } else {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let (grad, value): (Vec<f64>, ScalarFn<'_>) = match reaction {
            Some(r) => (
                phi_gradient(kernel, grid, r, &u)?.0,
                Box::new(move |x: &[f64]| phi(kernel, grid, r, x).expect("valid inputs")),
            ),
            None => (
                apply_operator(kernel, &u)?.0,
                Box::new(move |x: &[f64]| energy_unchecked(kernel, x) / p),
            ),
        };
        let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let eps = 1e-5 * scale;
        let mut worst = 0.0f64;
        let mut x = u.clone();
        for i in 0..n {
            x[i] = u[i] + eps;
            let up = value(&x);
            x[i] = u[i] - eps;
            let dn = value(&x);
            x[i] = u[i];
            let fd = (up - dn) / (2.0 * eps);
            worst = worst.max((fd - grad[i]).abs());
        }
        let gsup = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let rel = worst / gsup.max(f64::MIN_POSITIVE);
        report.record(t, rel_tol - rel, || u.clone());
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub lambda_a0: ExtendedReal,
    pub lambda_ainf: ExtendedReal,
    pub solvable: bool,
    pub reason: String,
    pub warnings: Vec<String>,
}

impl CriterionVerdict {
    pub fn from_eigenvalues(
        lambda_a0: ExtendedReal,
        lambda_ainf: ExtendedReal,
        warnings: Vec<String>,
    ) -> Self {
        let zero = ExtendedReal::Finite(0.0);
        let solvable = lambda_a0 < zero && zero < lambda_ainf;
        let reason = if solvable {
            format!("lambda1(a0) = {lambda_a0} < 0 < lambda1(a_inf) = {lambda_ainf}")
        } else if !(lambda_a0 < zero) {
            format!("lambda1(a0) = {lambda_a0} is not negative")
        } else {
            format!("lambda1(a_inf) = {lambda_ainf} is not positive")
        };
        CriterionVerdict {
            lambda_a0,
            lambda_ainf,
            solvable,
            reason,
            warnings,
        }
    }
}

/// `λ₁(a₀)` and `λ₁(a∞)` for the reaction, and whether `λ₁(a₀) < 0 < λ₁(a∞)`.
pub fn evaluate_criterion(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    opts: &EigenOptions,
) -> Result<CriterionVerdict> {
    check_len(kernel.n(), grid.n())?;
    let mut warnings = Vec::new();
    let hyp = validate_hypotheses(reaction, grid, &log_samples(1e-4, 1e4, 161))?;
    if !hyp.passed() {
        warnings.push(format!(
            "reaction fails the structural hypotheses on the sample set ({} violations, monotonicity {:?})",
            hyp.violations.len(),
            hyp.monotonicity
        ));
    }
    let a0 = weights_zero(reaction, grid)?;
    let ainf = weights_infty(reaction, grid)?;
    let e0 = principal_eigenpair(kernel, grid, &a0, opts)?;
    let einf = principal_eigenpair(kernel, grid, &ainf, opts)?;
    for (label, e) in [("a0", &e0), ("a_inf", &einf)] {
        for f in &e.flags {
            warnings.push(format!("{label}: {f}"));
        }
        if e.lambda.is_finite() && !e.converged {
            warnings.push(format!(
                "{label}: eigen descent stopped at residual {:e}",
                e.residual
            ));
        }
    }
    Ok(CriterionVerdict::from_eigenvalues(
        e0.lambda,
        einf.lambda,
        warnings,
    ))
}

/// A positive solution must come with a solvable verdict; anything else is
/// vacuously consistent.
pub fn check_necessity_with_verdict(
    solution: &SolveResult,
    verdict: &CriterionVerdict,
) -> PropertyReport {
    let mut report = PropertyReport::new("necessity", 0.0);
    if solution.classification != Classification::Positive {
        report.record(0, 0.0, Vec::new);
        return report;
    }
    let zero = ExtendedReal::Finite(0.0);
    let margin = if verdict.solvable {
        0.0
    } else if !(verdict.lambda_a0 < zero) {
        -clamp_finite(verdict.lambda_a0.to_f64_lossy()).max(f64::MIN_POSITIVE)
    } else {
        clamp_finite(verdict.lambda_ainf.to_f64_lossy()).min(-f64::MIN_POSITIVE)
    };
    report.record(0, margin, || {
        vec![
            clamp_finite(verdict.lambda_a0.to_f64_lossy()),
            clamp_finite(verdict.lambda_ainf.to_f64_lossy()),
        ]
    });
    report
}

/// Re-evaluates the criterion and checks it against the solve outcome.
pub fn check_necessity(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    solution: &SolveResult,
    opts: &EigenOptions,
) -> Result<PropertyReport> {
    let verdict = evaluate_criterion(kernel, grid, reaction, opts)?;
    Ok(check_necessity_with_verdict(solution, &verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;
    use crate::nonlocal::assemble_kernel;
    use crate::reactions::{truncate, ReactionKind};
    use crate::spectral::constant_weight;

    fn kernel(n: usize, p: f64) -> (Grid, Kernel) {
        let g = build_grid(0.0, 1.0, n).unwrap();
        let k = assemble_kernel(&g, 0.5, p).unwrap();
        (g, k)
    }

    #[test]
    fn report_bookkeeping() {
        let mut r = PropertyReport::new("x", 1e-3);
        r.record(0, 0.5, Vec::new);
        r.record(1, -1e-4, Vec::new);
        assert_eq!(r.violations, 0);
        assert_eq!(r.worst_margin, -1e-4);
        r.record(2, -1.0, || vec![1.0]);
        assert_eq!(r.violations, 1);
        assert_eq!(r.failures[0].trial, 2);
        let empty = PropertyReport::new("y", 0.0).finalized();
        assert!(empty.worst_margin.is_finite());
    }

    #[test]
    fn picone_equality_cases() {
        for p in [1.5, 2.0, 3.0] {
            assert_eq!(picone_gap(p, 0.7, 0.7, 0.4, 0.4).unwrap(), 0.0);
            assert_eq!(picone_gap(p, 0.7, 0.3, 0.0, 0.0).unwrap(), 0.0);
        }
        let rep = check_picone(&[1.5, 2.0, 3.0], 2_000, 7).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);
        assert!(rep.trials > 6_000);
    }

    #[test]
    fn submodularity_small_sweep() {
        for p in [1.5, 2.0, 3.0] {
            let (_, k) = kernel(16, p);
            let rep = check_submodularity(&k, 200, 1).unwrap();
            assert!(rep.passed(), "p = {p}: {:?}", rep.failures);
            let u: Vec<f64> = (0..16).map(|i| (i as f64).cos()).collect();
            assert!(submodularity_margin(&k, &u, &u).abs() < 1e-12);
        }
    }

    #[test]
    fn comparison_cases() {
        let (_, k) = kernel(12, 2.5);
        let v: Vec<f64> = (0..12).map(|i| 0.2 + 0.05 * i as f64).collect();
        let same = check_comparison(&k, &v, &v).unwrap();
        assert!(same.passed());
        assert_eq!(same.worst_margin, 0.0);
        let double: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        assert!(check_comparison(&k, &double, &v).unwrap().passed());
        assert!(check_comparison(&k, &[0.0; 12], &v).is_err());
        let rep = check_comparison_random(&k, 60, 3).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);
    }

    #[test]
    fn quotient_bound_cases() {
        let g = build_grid(0.0, 1.0, 20).unwrap();
        let ds = boundary_power(&g, 0.5).unwrap();
        let rep = check_quotient_bound(&g, &ds, &ds, 0.5, 2.0, 1.0).unwrap();
        assert!(rep.passed());
        assert!(rep.worst_margin >= 0.0);
        let twice: Vec<f64> = ds.iter().map(|d| 2.0 * d).collect();
        assert!(check_quotient_bound(&g, &ds, &twice, 0.5, 3.0, 2.0)
            .unwrap()
            .passed());
        assert!(check_quotient_bound(&g, &ds, &twice, 0.5, 3.0, 1.5).is_err());
        assert!(check_quotient_bound_random(&g, 0.5, 1.5, 20, 2)
            .unwrap()
            .passed());
    }

    #[test]
    fn gradient_checks() {
        for p in [1.5, 2.0, 3.0] {
            let (g, k) = kernel(10, p);
            let rep = check_gradients(&k, &g, None, 5, 11, 1e-6).unwrap();
            assert!(rep.passed(), "p = {p}: {}", rep.worst_margin);
        }
        let (g, k) = kernel(10, 2.0);
        let r = truncate(&Reaction::logistic(30.0, 2.0, 4.0, 2.0).unwrap(), 2).unwrap();
        assert!(check_gradients(&k, &g, Some(&r), 5, 11, 1e-6)
            .unwrap()
            .passed());
    }

    #[test]
    fn criterion_examples() {
        let (g, k) = kernel(24, 2.0);
        let l0 = principal_eigenpair(&k, &g, &constant_weight(24, 0.0), &EigenOptions::default())
            .unwrap()
            .lambda
            .expect_finite();
        let opts = EigenOptions::default();
        let above = evaluate_criterion(
            &k,
            &g,
            &Reaction::logistic(l0 + 1.0, 2.0, 4.0, 2.0).unwrap(),
            &opts,
        )
        .unwrap();
        assert!(above.solvable);
        assert_eq!(above.lambda_ainf, ExtendedReal::PlusInfinity);
        let below = evaluate_criterion(
            &k,
            &g,
            &Reaction::logistic(l0 - 1.0, 2.0, 4.0, 2.0).unwrap(),
            &opts,
        )
        .unwrap();
        assert!(!below.solvable);
        let sub = evaluate_criterion(
            &k,
            &g,
            &Reaction::logistic(0.1, 1.5, 4.0, 2.0).unwrap(),
            &opts,
        )
        .unwrap();
        assert_eq!(sub.lambda_a0, ExtendedReal::MinusInfinity);
        assert!(sub.solvable);
        let neg = Reaction::new(
            ReactionKind::PowerCombo {
                c0: -1.0,
                lambda: -1.0,
                q: 2.0,
                mu: 0.0,
                r: 2.0,
            },
            2.0,
        )
        .unwrap();
        let v = evaluate_criterion(&k, &g, &neg, &opts).unwrap();
        assert!(!v.solvable);
        assert_eq!(v.lambda_a0, ExtendedReal::PlusInfinity);
        assert!(!v.warnings.is_empty());
    }

    #[test]
    fn verdict_ordering() {
        use ExtendedReal::*;
        assert!(CriterionVerdict::from_eigenvalues(MinusInfinity, PlusInfinity, vec![]).solvable);
        assert!(!CriterionVerdict::from_eigenvalues(Finite(0.0), PlusInfinity, vec![]).solvable);
        assert!(!CriterionVerdict::from_eigenvalues(Finite(-1.0), Finite(0.0), vec![]).solvable);
        assert!(CriterionVerdict::from_eigenvalues(Finite(-1.0), Finite(1e-9), vec![]).solvable);
    }
}
