//! Positive solutions of `(−Δ)_p^s u = f(x, u)` with zero exterior data.
//!
//! The reaction is truncated at levels `k = 1, 2, 4, …` and the energy
//!
//! ```text
//! Φ_k(u) = E(u)/p − Σ_i F_k(x_i, u_i) h
//! ```
//!
//! is minimized at each level, warm-started from the previous one. Once two
//! consecutive levels agree and the clamp is inactive at every node, the
//! minimizer solves the untruncated discrete equation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{minimize, DescentOptions, Objective, Observer, StopReason};
use crate::domain::{boundary_power, Grid};
use crate::error::{Error, Result};
use crate::nonlocal::{check_len, energy_unchecked, operator_into, Field, Kernel};
use crate::reactions::{truncate, NodalReaction, Reaction};
use crate::spectral::EigenOptions;
use crate::sum::pairwise_sum_by;
use crate::verify::{evaluate_criterion, CriterionVerdict};

const DIVERGENCE_PHI: f64 = -1e12;
const DIVERGENCE_SUP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    /// Residual tolerance: sup-norm of the nodal defect divided by `h`.
    pub tol: f64,
    pub max_iter: usize,
    /// Perturbed `c·d^s` starting fields per truncation level.
    pub starts: usize,
    pub k_max: u32,
    /// Sup-norm agreement required between consecutive truncation levels.
    pub stabilize_tol: f64,
    /// Solutions with `‖u‖_∞` below this are classified as zero.
    pub zero_tol: f64,
    /// Fraction of nodes nearest the boundary used for the boundary ratio.
    pub boundary_fraction: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 50_000,
            starts: 2,
            k_max: 1024,
            stabilize_tol: 1e-7,
            zero_tol: 1e-8,
            boundary_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::validation("solver.tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("solver.max_iter", "must be at least 1"));
        }
        if self.starts == 0 {
            return Err(Error::validation("solver.starts", "must be at least 1"));
        }
        if self.k_max < 1 {
            return Err(Error::validation("solver.k_max", "must be at least 1"));
        }
        if !(self.stabilize_tol > 0.0) {
            return Err(Error::validation(
                "solver.stabilize_tol",
                "must be positive",
            ));
        }
        if !(self.zero_tol >= 0.0) {
            return Err(Error::validation("solver.zero_tol", "must be nonnegative"));
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction <= 0.5) {
            return Err(Error::validation(
                "solver.boundary_fraction",
                "must lie in (0, 0.5]",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// `min u > 0` and the residual is within tolerance.
    Positive,
    /// `‖u‖_∞ < zero_tol`.
    Zero,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub u: Field,
    pub phi: f64,
    pub residual: f64,
    pub k_final: u32,
    pub iterations: usize,
    /// Smallest nodal value before the positive-part cleanup.
    pub min_u: f64,
    pub boundary_ratio_lo: f64,
    pub boundary_ratio_hi: f64,
    pub converged: bool,
    pub stop: StopReason,
    pub classification: Classification,
    /// Whether `f_k = f` at every `(x_i, u_i)` of the returned field.
    pub clamp_inactive: bool,
    pub verdict: Option<CriterionVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessVerdict {
    UniqueWithinTol,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub starts: usize,
    pub max_pairwise_dist: f64,
    pub tol: f64,
    pub verdict: UniquenessVerdict,
    /// `‖u‖_∞` of each run, in start order.
    pub sup_norms: Vec<f64>,
    pub all_converged: bool,
}

struct Energy<'a> {
    kernel: &'a Kernel,
    reaction: NodalReaction,
    h: f64,
}

impl Energy<'_> {
    fn phi(&self, u: &[f64]) -> f64 {
        let p = self.kernel.p();
        let reaction = pairwise_sum_by(u.len(), |i| self.reaction.F(i, u[i])) * self.h;
        energy_unchecked(self.kernel, u) / p - reaction
    }
}

impl Objective for Energy<'_> {
    fn len(&self) -> usize {
        self.kernel.n()
    }

    fn eval(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        operator_into(self.kernel, u, grad);
        for (i, g) in grad.iter_mut().enumerate() {
            *g -= self.reaction.f(i, u[i]) * self.h;
        }
        self.phi(u)
    }

    fn residual(&self, _u: &[f64], grad: &[f64]) -> f64 {
        grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) / self.h
    }

    fn diverged(&self, u: &[f64], value: f64) -> bool {
        value < DIVERGENCE_PHI || u.iter().any(|x| !(x.abs() <= DIVERGENCE_SUP))
    }
}

fn check_setup(kernel: &Kernel, grid: &Grid, reaction: &Reaction) -> Result<()> {
    check_len(kernel.n(), grid.n())?;
    if kernel.grid() != grid {
        return Err(Error::validation(
            "grid",
            "kernel was assembled on a different grid",
        ));
    }
    if kernel.p() != reaction.p() {
        return Err(Error::validation(
            "p",
            format!(
                "kernel has p = {}, reaction has p = {}",
                kernel.p(),
                reaction.p()
            ),
        ));
    }
    Ok(())
}

fn energy<'a>(kernel: &'a Kernel, grid: &Grid, reaction: &Reaction) -> Energy<'a> {
    Energy {
        kernel,
        reaction: NodalReaction::new(reaction, grid),
        h: grid.cell_measure(),
    }
}

/// `Φ(u) = E(u)/p − Σ F(x_i, u_i) h` (with `F_k` if the reaction is truncated).
pub fn phi(kernel: &Kernel, grid: &Grid, reaction: &Reaction, u: &[f64]) -> Result<f64> {
    check_setup(kernel, grid, reaction)?;
    check_len(kernel.n(), u.len())?;
    Ok(energy(kernel, grid, reaction).phi(u))
}

/// Gradient of `Φ_k`; the reaction must carry a truncation level.
pub fn phi_gradient(kernel: &Kernel, grid: &Grid, reaction: &Reaction, u: &[f64]) -> Result<Field> {
    check_setup(kernel, grid, reaction)?;
    check_len(kernel.n(), u.len())?;
    if reaction.truncation().is_none() {
        return Err(Error::validation(
            "reaction",
            "energy gradient needs a truncated reaction (bilateral growth)",
        ));
    }
    let obj = energy(kernel, grid, reaction);
    let mut g = vec![0.0; u.len()];
    obj.eval(u, &mut g);
    Ok(Field(g))
}

/// Nodal defect `[(−Δ)_p^s u](x_i) − f(x_i, u_i)`, i.e. the operator minus
/// the reaction term, divided by `h`. Uses the reaction as given.
pub fn weak_defect(kernel: &Kernel, grid: &Grid, reaction: &Reaction, u: &[f64]) -> Result<Field> {
    check_setup(kernel, grid, reaction)?;
    check_len(kernel.n(), u.len())?;
    let nodal = NodalReaction::new(reaction, grid);
    let h = grid.cell_measure();
    let mut g = vec![0.0; u.len()];
    operator_into(kernel, u, &mut g);
    for (i, gi) in g.iter_mut().enumerate() {
        *gi = (*gi - nodal.f(i, u[i]) * h) / h;
    }
    Ok(Field(g))
}

/// `c·d^s` plus uniform noise in `[0, amplitude)`, seeded by `(seed, stream)`.
pub fn initial_field(
    grid: &Grid,
    s: f64,
    c: f64,
    amplitude: f64,
    seed: u64,
    stream: u64,
) -> Result<Field> {
    let ds = boundary_power(grid, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok(Field(
        ds.iter()
            .map(|d| {
                c * d
                    + if amplitude > 0.0 {
                        rng.gen_range(0.0..amplitude)
                    } else {
                        0.0
                    }
            })
            .collect(),
    ))
}

struct Candidate {
    u: Vec<f64>,
    phi: f64,
    residual: f64,
    min_before: f64,
    iterations: usize,
    stop: StopReason,
}

fn run_start(
    obj: &Energy<'_>,
    x0: &[f64],
    dopts: &DescentOptions,
    k: u32,
    observer: Option<Observer<'_>>,
) -> Result<Candidate> {
    let out = minimize(obj, x0, dopts, observer);
    if out.reason == StopReason::Diverged {
        return Err(Error::NonCoercive {
            k,
            message: format!(
                "energy reached {:e} with sup-norm {:e}",
                out.value,
                out.x.iter().fold(0.0f64, |m, x| m.max(x.abs()))
            ),
        });
    }
    let min_before = out.x.iter().copied().fold(f64::INFINITY, f64::min);
    let mut u = out.x;
    let mut phi_u = out.value;
    let mut residual = out.residual;
    if min_before < 0.0 {
        let plus: Vec<f64> = u.iter().map(|x| x.max(0.0)).collect();
        let mut g = vec![0.0; plus.len()];
        let phi_plus = obj.eval(&plus, &mut g);
        if phi_plus <= phi_u {
            residual = obj.residual(&plus, &g);
            phi_u = phi_plus;
            u = plus;
        }
    }
    Ok(Candidate {
        u,
        phi: phi_u,
        residual,
        min_before,
        iterations: out.iterations,
        stop: out.reason,
    })
}

/// Minimize `Φ_k` for a truncated reaction from `opts.starts` perturbed
/// `0.1·d^s` fields, an optional warm start, and the zero field when it is
/// a critical point. The lowest energy wins.
pub fn minimize_truncated(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    opts: &SolveOptions,
    warm: Option<&[f64]>,
) -> Result<SolveResult> {
    minimize_truncated_impl(kernel, grid, reaction, opts, warm, true, None)
}

/// As [`minimize_truncated`] from a single start, reporting every accepted
/// descent iterate `(iteration, u, Φ_k(u))` to `observer`.
pub fn minimize_truncated_observed(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    opts: &SolveOptions,
    start: &[f64],
    observer: &mut dyn FnMut(usize, &[f64], f64),
) -> Result<SolveResult> {
    minimize_truncated_impl(
        kernel,
        grid,
        reaction,
        opts,
        Some(start),
        false,
        Some(observer),
    )
}

fn minimize_truncated_impl(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    opts: &SolveOptions,
    warm: Option<&[f64]>,
    fresh_starts: bool,
    mut observer: Option<Observer<'_>>,
) -> Result<SolveResult> {
    check_setup(kernel, grid, reaction)?;
    opts.validate()?;
    let k = reaction.truncation().ok_or_else(|| {
        Error::validation(
            "reaction",
            "minimization needs a truncated reaction (bilateral growth)",
        )
    })?;
    if let Some(w) = warm {
        check_len(kernel.n(), w.len())?;
    }
    let n = kernel.n();
    let obj = energy(kernel, grid, reaction);
    let dopts = DescentOptions::new(opts.tol, opts.max_iter);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm {
        starts.push(w.to_vec());
    }
    if fresh_starts {
        for j in 0..opts.starts {
            starts.push(
                initial_field(
                    grid,
                    kernel.s(),
                    0.1,
                    0.01,
                    opts.seed.wrapping_add(j as u64),
                    0,
                )?
                .0,
            );
        }
    }

    let mut best: Option<Candidate> = None;
    let mut iterations = 0;
    for x0 in &starts {
        let obs: Option<Observer<'_>> = match observer {
            Some(ref mut o) => Some(&mut **o),
            None => None,
        };
        let cand = run_start(&obj, x0, &dopts, k, obs)?;
        iterations += cand.iterations;
        if best.as_ref().map_or(true, |b| cand.phi < b.phi) {
            best = Some(cand);
        }
    }

    // Φ_k(0) = 0; zero competes whenever it is a critical point.
    let zero_critical = (0..n).all(|i| obj.reaction.f(i, 0.0) == 0.0);
    if zero_critical && best.as_ref().map_or(true, |b| b.phi >= 0.0) {
        let zero = vec![0.0; n];
        let mut g = vec![0.0; n];
        obj.eval(&zero, &mut g);
        best = Some(Candidate {
            residual: obj.residual(&zero, &g),
            u: zero,
            phi: 0.0,
            min_before: best.as_ref().map_or(0.0, |b| b.min_before),
            iterations: 0,
            stop: StopReason::Converged,
        });
    }

    let best = best.expect("at least one candidate");
    let clamp_inactive = (0..n).all(|i| !obj.reaction.clamp_active(i, best.u[i]));
    finish(
        grid,
        kernel.s(),
        opts,
        best,
        k,
        iterations,
        clamp_inactive,
        None,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    grid: &Grid,
    s: f64,
    opts: &SolveOptions,
    cand: Candidate,
    k: u32,
    iterations: usize,
    clamp_inactive: bool,
    verdict: Option<CriterionVerdict>,
) -> Result<SolveResult> {
    let sup = cand.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let converged = cand.residual <= opts.tol;
    let min_after = cand.u.iter().copied().fold(f64::INFINITY, f64::min);
    let classification = if sup < opts.zero_tol {
        Classification::Zero
    } else if min_after > 0.0 && converged {
        Classification::Positive
    } else {
        Classification::Indeterminate
    };
    let (lo, hi) = if sup > 0.0 {
        boundary_behavior(grid, &cand.u, s, opts.boundary_fraction)?
    } else {
        (0.0, 0.0)
    };
    Ok(SolveResult {
        u: Field(cand.u),
        phi: cand.phi,
        residual: cand.residual,
        k_final: k,
        iterations,
        min_u: cand.min_before,
        boundary_ratio_lo: lo,
        boundary_ratio_hi: hi,
        converged,
        stop: if converged {
            StopReason::Converged
        } else {
            cand.stop
        },
        classification,
        clamp_inactive,
        verdict,
    })
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Truncation escalation over `k = 1, 2, 4, …, k_max`, run regardless of the
/// solvability criterion. With `start`, level 1 descends from that field only.
pub fn escalate(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    opts: &SolveOptions,
    start: Option<&[f64]>,
) -> Result<SolveResult> {
    check_setup(kernel, grid, reaction)?;
    opts.validate()?;
    if let Some(k) = reaction.truncation() {
        return Err(Error::validation(
            "reaction",
            format!("expected an untruncated reaction, got truncation level {k}"),
        ));
    }
    let mut previous: Option<SolveResult> = None;
    let mut iterations = 0;
    let mut k: u32 = 1;
    loop {
        let rk = truncate(reaction, k)?;
        let res = match (&previous, start) {
            (Some(prev), _) => {
                minimize_truncated_impl(kernel, grid, &rk, opts, Some(&prev.u), false, None)?
            }
            (None, Some(u0)) => {
                minimize_truncated_impl(kernel, grid, &rk, opts, Some(u0), false, None)?
            }
            (None, None) => minimize_truncated(kernel, grid, &rk, opts, None)?,
        };
        iterations += res.iterations;
        let stable = previous
            .as_ref()
            .is_some_and(|prev| sup_distance(&prev.u, &res.u) <= opts.stabilize_tol);
        if stable && res.clamp_inactive {
            let cand = untruncated_candidate(kernel, grid, reaction, &res)?;
            return finish(grid, kernel.s(), opts, cand, k, iterations, true, None);
        }
        previous = Some(res);
        if k >= opts.k_max {
            return Err(Error::KMaxExhausted { k_max: opts.k_max });
        }
        k = k.saturating_mul(2).min(opts.k_max);
    }
}

/// Re-evaluate a truncated-level result against the untruncated reaction.
fn untruncated_candidate(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    res: &SolveResult,
) -> Result<Candidate> {
    let defect = weak_defect(kernel, grid, reaction, &res.u)?;
    Ok(Candidate {
        phi: phi(kernel, grid, reaction, &res.u)?,
        residual: defect.sup_norm(),
        u: res.u.0.clone(),
        min_before: res.min_u,
        iterations: 0,
        stop: res.stop,
    })
}

/// Evaluate the solvability criterion, then escalate if it holds. Otherwise
/// the zero field is returned together with the verdict.
pub fn solve(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    opts: &SolveOptions,
    eigen: &EigenOptions,
) -> Result<SolveResult> {
    check_setup(kernel, grid, reaction)?;
    opts.validate()?;
    let verdict = evaluate_criterion(kernel, grid, reaction, eigen)?;
    if !verdict.solvable {
        let n = kernel.n();
        let zero = vec![0.0; n];
        let defect = weak_defect(kernel, grid, reaction, &zero)?;
        let cand = Candidate {
            residual: defect.sup_norm(),
            u: zero,
            phi: 0.0,
            min_before: 0.0,
            iterations: 0,
            stop: StopReason::Converged,
        };
        return finish(grid, kernel.s(), opts, cand, 0, 0, true, Some(verdict));
    }
    let mut res = escalate(kernel, grid, reaction, opts, None)?;
    res.verdict = Some(verdict);
    Ok(res)
}

/// Escalated solves from the constant `0.1·d^s` profile and `m − 1` random
/// positive fields of varying amplitude; reports the largest sup-distance
/// between any two results.
pub fn multi_start_uniqueness(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    m: usize,
    tol: f64,
    opts: &SolveOptions,
) -> Result<UniquenessReport> {
    if m == 0 {
        return Err(Error::validation("m", "need at least one start"));
    }
    let starts: Vec<Field> = (0..m)
        .map(|j| {
            if j == 0 {
                initial_field(grid, kernel.s(), 0.1, 0.0, opts.seed, 0)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(j as u64));
                rng.set_stream(1);
                let amplitude = 10f64.powf(rng.gen_range(-2.0..0.5));
                Ok(Field(
                    (0..grid.n())
                        .map(|_| amplitude * rng.gen_range(0.01..1.0))
                        .collect(),
                ))
            }
        })
        .collect::<Result<_>>()?;
    let results: Vec<SolveResult> = starts
        .par_iter()
        .map(|u0| escalate(kernel, grid, reaction, opts, Some(u0)))
        .collect::<Result<_>>()?;
    let mut max_dist = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            max_dist = max_dist.max(sup_distance(&results[i].u, &results[j].u));
        }
    }
    Ok(UniquenessReport {
        starts: m,
        max_pairwise_dist: max_dist,
        tol,
        verdict: if max_dist < tol {
            UniquenessVerdict::UniqueWithinTol
        } else {
            UniquenessVerdict::Divergent
        },
        sup_norms: results.iter().map(|r| r.u.sup_norm()).collect(),
        all_converged: results.iter().all(|r| r.converged),
    })
}

/// Min and max of `u_i / d_i^s` over the nodes whose distance to the boundary
/// is within the lowest `fraction` of all distances (ties included).
pub fn boundary_behavior(grid: &Grid, u: &[f64], s: f64, fraction: f64) -> Result<(f64, f64)> {
    check_len(grid.n(), u.len())?;
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::validation(
            "fraction",
            format!("need 0 < fraction <= 0.5, got {fraction}"),
        ));
    }
    if let Some(i) = u.iter().position(|&x| !(x >= 0.0)) {
        return Err(Error::validation(
            "u",
            format!("need u >= 0, got {} at node {i}", u[i]),
        ));
    }
    let ds = boundary_power(grid, s)?;
    let mut sorted: Vec<f64> = grid.dist().to_vec();
    sorted.sort_by(f64::total_cmp);
    let count = ((fraction * grid.n() as f64).ceil() as usize).clamp(1, grid.n());
    let cutoff = sorted[count - 1];
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (i, &d) in grid.dist().iter().enumerate() {
        if d <= cutoff {
            let ratio = u[i] / ds[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok((lo, hi))
}

/// Slack in `Φ(u∧v) + Φ_k(u∨v) ≤ Φ(u) + Φ_k(v)`, where `reaction` is
/// untruncated and `k` is the level used for `Φ_k`. Never negative up to rounding.
pub fn submodular_comparison_slack(
    kernel: &Kernel,
    grid: &Grid,
    reaction: &Reaction,
    k: u32,
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    let rk = truncate(reaction, k)?;
    check_len(kernel.n(), u.len())?;
    check_len(kernel.n(), v.len())?;
    let meet: Vec<f64> = u.iter().zip(v).map(|(a, b)| a.min(*b)).collect();
    let join: Vec<f64> = u.iter().zip(v).map(|(a, b)| a.max(*b)).collect();
    let lhs = phi(kernel, grid, reaction, &meet)? + phi(kernel, grid, &rk, &join)?;
    let rhs = phi(kernel, grid, reaction, u)? + phi(kernel, grid, &rk, v)?;
    Ok(rhs - lhs)
}
