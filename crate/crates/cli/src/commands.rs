//! The five subcommands. Each writes its files, then reports failures through
//! the exit-code contract.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use fraplace_core::reactions::{weights_infty, weights_zero};
use fraplace_core::spectral::constant_weight;
use fraplace_core::verify::{
    check_comparison_random, check_gradients, check_necessity_with_verdict, check_picone,
    check_quotient_bound_random, check_submodularity,
};
use fraplace_core::{
    assemble_kernel, boundary_power, evaluate_criterion, principal_eigenpair, solve, truncate,
    Classification, CriterionVerdict, EigenResult, ExtendedReal, PropertyReport, Reaction,
    ReactionKind, SolveResult, StopReason,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, Format, Problem};
use crate::error::CliError;
use crate::output::{run_dir, write_csv, write_json, write_svg, Series};

/// Per-invocation settings that do not belong to the config document.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub overwrite: bool,
}

/// Files written by a command and its structured report.
#[derive(Debug)]
pub struct Outcome<T> {
    pub dir: PathBuf,
    pub report: T,
}

fn prepare(config: &Config, command: &str, ctx: &Context) -> Result<PathBuf, CliError> {
    run_dir(&config.output.dir, command, ctx.overwrite)
}

fn stop_failed(stop: StopReason) -> bool {
    matches!(stop, StopReason::MaxIter | StopReason::Diverged)
}

fn ratio(u: &[f64], ds: &[f64]) -> Vec<f64> {
    u.iter().zip(ds).map(|(a, b)| a / b).collect()
}

// ---------------------------------------------------------------- eigen

/// Weight `a` for the eigenproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    Zero,
    A0,
    AInf,
    Const(f64),
    /// `a∞` of the reaction truncated at level `k`.
    AInfK(u32),
}

impl FromStr for WeightSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad =
            || format!("unknown weight '{s}' (expected zero, a0, ainf, const:<c> or ainf_k:<k>)");
        match s {
            "zero" => Ok(WeightSpec::Zero),
            "a0" => Ok(WeightSpec::A0),
            "ainf" => Ok(WeightSpec::AInf),
            _ => {
                if let Some(c) = s.strip_prefix("const:") {
                    let c: f64 = c.parse().map_err(|_| bad())?;
                    if c.is_finite() {
                        return Ok(WeightSpec::Const(c));
                    }
                } else if let Some(k) = s.strip_prefix("ainf_k:") {
                    return k.parse().map(WeightSpec::AInfK).map_err(|_| bad());
                }
                Err(bad())
            }
        }
    }
}

impl std::fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightSpec::Zero => write!(f, "zero"),
            WeightSpec::A0 => write!(f, "a0"),
            WeightSpec::AInf => write!(f, "ainf"),
            WeightSpec::Const(c) => write!(f, "const:{c}"),
            WeightSpec::AInfK(k) => write!(f, "ainf_k:{k}"),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EigenReport {
    pub weight: String,
    pub result: EigenResult,
}

pub fn eigen(
    config: &Config,
    spec: WeightSpec,
    ctx: &Context,
) -> Result<Outcome<EigenReport>, CliError> {
    let pb = config.problem()?;
    let n = pb.grid.n();
    let a: Vec<ExtendedReal> = match spec {
        WeightSpec::Zero => constant_weight(n, 0.0),
        WeightSpec::Const(c) => constant_weight(n, c),
        WeightSpec::A0 => weights_zero(&pb.reaction, &pb.grid)?,
        WeightSpec::AInf => weights_infty(&pb.reaction, &pb.grid)?,
        WeightSpec::AInfK(k) => weights_infty(&truncate(&pb.reaction, k)?, &pb.grid)?,
    };
    let result = principal_eigenpair(&pb.kernel, &pb.grid, &a, &config.eigen_options())?;
    let dir = prepare(config, "eigen", ctx)?;
    let report = EigenReport {
        weight: spec.to_string(),
        result,
    };

    if config.output.wants(Format::Json) {
        write_json(&dir.join("eigen.json"), "eigen", config, &report)?;
    }
    let ds = boundary_power(&pb.grid, config.s)?;
    let v = &report.result.v.0;
    if config.output.wants(Format::Csv) {
        write_csv(
            &dir.join("eigenfunction.csv"),
            &["x", "v", "d_s", "v_over_d_s"],
            &[pb.grid.nodes(), v, &ds, &ratio(v, &ds)],
        )?;
    }
    if config.output.wants(Format::Svg) {
        write_svg(
            &dir.join("eigenfunction.svg"),
            &format!(
                "principal eigenfunction, lambda1 = {}",
                report.result.lambda
            ),
            "x",
            pb.grid.nodes(),
            &[Series {
                label: "v",
                y: v,
                dashed: false,
            }],
        )?;
    }
    println!(
        "lambda1({}) = {}  residual {:.3e}  iterations {}  stop {:?}",
        report.weight,
        report.result.lambda,
        report.result.residual,
        report.result.iterations,
        report.result.stop
    );
    if !report.result.converged {
        eprintln!(
            "warning: eigen descent stopped at residual {:e} ({:?})",
            report.result.residual, report.result.stop
        );
    }
    if stop_failed(report.result.stop) {
        return Err(CliError::Convergence(format!(
            "eigen descent stopped with {:?}",
            report.result.stop
        )));
    }
    Ok(Outcome { dir, report })
}

// ---------------------------------------------------------------- criterion

#[derive(Debug, Serialize)]
pub struct CriterionReport {
    pub verdict: CriterionVerdict,
}

pub fn criterion(config: &Config, ctx: &Context) -> Result<Outcome<CriterionReport>, CliError> {
    let pb = config.problem()?;
    let verdict = evaluate_criterion(&pb.kernel, &pb.grid, &pb.reaction, &config.eigen_options())?;
    let dir = prepare(config, "criterion", ctx)?;
    let report = CriterionReport { verdict };
    if config.output.wants(Format::Json) {
        write_json(&dir.join("criterion.json"), "criterion", config, &report)?;
    }
    print_verdict(&report.verdict);
    Ok(Outcome { dir, report })
}

fn print_verdict(v: &CriterionVerdict) {
    println!(
        "{}: {}",
        if v.solvable {
            "solvable"
        } else {
            "not solvable"
        },
        v.reason
    );
    for w in &v.warnings {
        eprintln!("warning: {w}");
    }
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub verdict: CriterionVerdict,
    pub result: SolveResult,
}

pub fn solve_cmd(config: &Config, ctx: &Context) -> Result<Outcome<SolveReport>, CliError> {
    let pb = config.problem()?;
    let (result, verdict) = solve_with_verdict(config, &pb)?;
    let dir = prepare(config, "solve", ctx)?;
    let report = SolveReport { verdict, result };

    if config.output.wants(Format::Json) {
        write_json(&dir.join("solve.json"), "solve", config, &report)?;
    }
    let ds = boundary_power(&pb.grid, config.s)?;
    let u = &report.result.u.0;
    if config.output.wants(Format::Csv) {
        write_csv(
            &dir.join("solution.csv"),
            &["x", "u", "d_s", "u_over_d_s"],
            &[pb.grid.nodes(), u, &ds, &ratio(u, &ds)],
        )?;
    }
    if config.output.wants(Format::Svg) {
        write_svg(
            &dir.join("solution.svg"),
            "steady state u and boundary profile d^s",
            "x",
            pb.grid.nodes(),
            &[
                Series {
                    label: "u",
                    y: u,
                    dashed: false,
                },
                Series {
                    label: "d^s",
                    y: &ds,
                    dashed: true,
                },
            ],
        )?;
    }
    print_verdict(&report.verdict);
    let r = &report.result;
    println!(
        "{:?}: sup u = {:.6e}  phi = {:.6e}  residual {:.3e}  k = {}  stop {:?}",
        r.classification,
        r.u.sup_norm(),
        r.phi,
        r.residual,
        r.k_final,
        r.stop
    );
    if !r.converged {
        eprintln!(
            "warning: descent stopped at residual {:e} ({:?})",
            r.residual, r.stop
        );
    }
    if stop_failed(r.stop) {
        return Err(CliError::Convergence(format!(
            "descent stopped with {:?}",
            r.stop
        )));
    }
    Ok(Outcome { dir, report })
}

// ---------------------------------------------------------------- verify

pub const DEFAULT_PROPERTIES: &[&str] = &[
    "picone",
    "submodularity",
    "comparison",
    "quotient",
    "operator_gradient",
    "phi_gradient",
    "necessity",
];

/// Necessity check run against a verdict computed with `a₀` replaced by the
/// zero weight. A positive solution then contradicts the verdict, which
/// exercises the violation path of the harness.
pub const TAMPERED: &str = "tampered_necessity";

#[derive(Debug, Clone)]
pub struct VerifyArgs {
    pub properties: Vec<String>,
    pub trials: u64,
    pub seed: u64,
    pub p_values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub trials: u64,
    pub seed: u64,
    pub p_values: Vec<f64>,
    pub reports: Vec<PropertyReport>,
    pub skipped: Vec<String>,
    pub violations: u64,
    pub passed: bool,
}

fn tagged(mut rep: PropertyReport, p: f64) -> PropertyReport {
    rep.property = format!("{} (p = {p})", rep.property);
    rep.finalized()
}

fn solve_with_verdict(
    config: &Config,
    pb: &Problem,
) -> Result<(SolveResult, CriterionVerdict), CliError> {
    let mut res = solve(
        &pb.kernel,
        &pb.grid,
        &pb.reaction,
        &config.solve_options(),
        &config.eigen_options(),
    )?;
    let verdict = res
        .verdict
        .take()
        .ok_or_else(|| CliError::Validation("solver returned no verdict".into()))?;
    Ok((res, verdict))
}

fn tampered_necessity(config: &Config, pb: &Problem) -> Result<PropertyReport, CliError> {
    let (res, verdict) = solve_with_verdict(config, pb)?;
    let zero = principal_eigenpair(
        &pb.kernel,
        &pb.grid,
        &constant_weight(pb.grid.n(), 0.0),
        &config.eigen_options(),
    )?;
    let tampered = CriterionVerdict::from_eigenvalues(zero.lambda, verdict.lambda_ainf, Vec::new());
    let mut rep = check_necessity_with_verdict(&res, &tampered);
    rep.property = TAMPERED.to_string();
    Ok(rep.finalized())
}

pub fn verify(
    config: &Config,
    args: &VerifyArgs,
    ctx: &Context,
) -> Result<Outcome<VerifyReport>, CliError> {
    for name in &args.properties {
        if !DEFAULT_PROPERTIES.contains(&name.as_str()) && name != TAMPERED {
            return Err(CliError::Validation(format!(
                "unknown property '{name}' (known: {}, {TAMPERED})",
                DEFAULT_PROPERTIES.join(", ")
            )));
        }
    }
    if args.p_values.iter().any(|p| !(*p > 1.0 && p.is_finite())) {
        return Err(CliError::field(
            "p-values",
            "every p must be finite and > 1",
        ));
    }
    let pb = config.problem()?;
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    let (trials, seed) = (args.trials, args.seed);

    for name in &args.properties {
        match name.as_str() {
            "picone" => reports.push(check_picone(&args.p_values, trials, seed)?.finalized()),
            TAMPERED => reports.push(tampered_necessity(config, &pb)?),
            "necessity" => {
                let (res, verdict) = solve_with_verdict(config, &pb)?;
                reports.push(check_necessity_with_verdict(&res, &verdict).finalized());
            }
            _ => {
                for &p in &args.p_values {
                    let kernel = if p == config.p {
                        pb.kernel.clone()
                    } else {
                        assemble_kernel(&pb.grid, config.s, p)?
                    };
                    let rep = match name.as_str() {
                        "submodularity" => check_submodularity(&kernel, trials, seed)?,
                        "comparison" => check_comparison_random(&kernel, trials, seed)?,
                        "quotient" => {
                            check_quotient_bound_random(&pb.grid, config.s, p, trials, seed)?
                        }
                        "operator_gradient" => {
                            check_gradients(&kernel, &pb.grid, None, trials, seed, 1e-6)?
                        }
                        "phi_gradient" => {
                            let reaction = Reaction::with_weight(
                                config.reaction.clone(),
                                p,
                                pb.reaction.weight().clone(),
                            )
                            .and_then(|r| truncate(&r, 1));
                            match reaction {
                                Ok(r) => check_gradients(
                                    &kernel,
                                    &pb.grid,
                                    Some(&r),
                                    trials,
                                    seed,
                                    1e-6,
                                )?,
                                Err(e) => {
                                    skipped.push(format!("phi_gradient (p = {p}): {e}"));
                                    continue;
                                }
                            }
                        }
                        _ => unreachable!("validated above"),
                    };
                    reports.push(tagged(rep, p));
                }
            }
        }
    }

    let violations: u64 = reports.iter().map(|r| r.violations).sum();
    let report = VerifyReport {
        trials,
        seed,
        p_values: args.p_values.clone(),
        reports,
        skipped,
        violations,
        passed: violations == 0,
    };
    let dir = prepare(config, "verify", ctx)?;
    if config.output.wants(Format::Json) {
        write_json(&dir.join("verify.json"), "verify", config, &report)?;
    }
    for r in &report.reports {
        println!(
            "{:<40} trials {:>8}  violations {:>6}  worst margin {:+.3e}",
            r.property, r.trials, r.violations, r.worst_margin
        );
    }
    for s in &report.skipped {
        eprintln!("skipped: {s}");
    }
    if violations > 0 {
        return Err(CliError::Violation(violations));
    }
    Ok(Outcome { dir, report })
}

// ---------------------------------------------------------------- sweep

/// Threshold below which a solution counts as zero in the onset detection.
pub const ONSET_LEVEL: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub struct SweepArgs {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    /// Interpret `lo`, `hi` as multiples of `λ₁(0)`.
    pub relative: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub sup_u: f64,
    pub phi: f64,
    pub residual: f64,
    pub solvable: bool,
    pub classification: Classification,
    pub stop: StopReason,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub lambda1_zero: f64,
    pub points: Vec<SweepPoint>,
    /// Consecutive sweep values around the first `‖u‖_∞ > ONSET_LEVEL`.
    pub onset_bracket: Option<(f64, f64)>,
    /// Consecutive sweep values around the first solvable verdict.
    pub verdict_bracket: Option<(f64, f64)>,
    /// `‖u‖_∞` stays below the onset level up to the onset and above it after.
    pub monotone_onset: bool,
    pub onset_brackets_lambda1: bool,
    pub onset_matches_verdict: bool,
}

pub fn sweep_lambdas(args: &SweepArgs, scale: f64) -> Vec<f64> {
    let (lo, hi) = (args.lo * scale, args.hi * scale);
    if args.steps <= 1 || lo == hi {
        return vec![lo];
    }
    let m = (args.steps - 1) as f64;
    (0..args.steps)
        .map(|j| lo + (hi - lo) * j as f64 / m)
        .collect()
}

fn bracket(lambdas: &[f64], first: Option<usize>) -> Option<(f64, f64)> {
    match first {
        Some(i) if i > 0 => Some((lambdas[i - 1], lambdas[i])),
        _ => None,
    }
}

pub fn sweep(
    config: &Config,
    args: &SweepArgs,
    ctx: &Context,
) -> Result<Outcome<SweepReport>, CliError> {
    let (q, r) = match config.reaction {
        ReactionKind::Logistic { q, r, .. } if q == config.p => (q, r),
        _ => {
            return Err(CliError::field(
                "reaction",
                "sweep needs a logistic reaction with q = p",
            ))
        }
    };
    if !(args.lo.is_finite() && args.hi.is_finite() && args.lo > 0.0 && args.lo <= args.hi) {
        return Err(CliError::field(
            "lambda range",
            format!("need 0 < lo <= hi, got [{}, {}]", args.lo, args.hi),
        ));
    }
    if args.steps == 0 {
        return Err(CliError::field("steps", "must be at least 1"));
    }
    let pb = config.problem()?;
    let eig = principal_eigenpair(
        &pb.kernel,
        &pb.grid,
        &constant_weight(pb.grid.n(), 0.0),
        &config.eigen_options(),
    )?;
    let lambda1 = eig.lambda.expect_finite();
    let lambdas = sweep_lambdas(args, if args.relative { lambda1 } else { 1.0 });

    let weight = pb.reaction.weight().clone();
    let points: Vec<SweepPoint> = lambdas
        .par_iter()
        .map(|&lambda| {
            let reaction = Reaction::with_weight(
                ReactionKind::Logistic { lambda, q, r },
                config.p,
                weight.clone(),
            )?;
            let res = solve(
                &pb.kernel,
                &pb.grid,
                &reaction,
                &config.solve_options(),
                &config.eigen_options(),
            )?;
            Ok(SweepPoint {
                lambda,
                sup_u: res.u.sup_norm(),
                phi: res.phi,
                residual: res.residual,
                solvable: res.verdict.as_ref().is_some_and(|v| v.solvable),
                classification: res.classification,
                stop: res.stop,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let onset = points.iter().position(|p| p.sup_u > ONSET_LEVEL);
    let flip = points.iter().position(|p| p.solvable);
    let cut = onset.unwrap_or(points.len());
    let monotone_onset = points[..cut].iter().all(|p| p.sup_u <= ONSET_LEVEL)
        && points[cut..].iter().all(|p| p.sup_u > ONSET_LEVEL)
        && points[cut..].windows(2).all(|w| w[1].sup_u >= w[0].sup_u);
    let onset_bracket = bracket(&lambdas, onset);
    let report = SweepReport {
        lambda1_zero: lambda1,
        onset_brackets_lambda1: onset_bracket.is_some_and(|(a, b)| a < lambda1 && lambda1 <= b),
        onset_matches_verdict: onset == flip
            && points.iter().all(|p| p.solvable == (p.sup_u > ONSET_LEVEL)),
        onset_bracket,
        verdict_bracket: bracket(&lambdas, flip),
        monotone_onset,
        points,
    };

    let dir = prepare(config, "sweep", ctx)?;
    if config.output.wants(Format::Json) {
        write_json(&dir.join("sweep.json"), "sweep", config, &report)?;
    }
    if config.output.wants(Format::Csv) {
        write_sweep_csv(&dir.join("sweep.csv"), &report.points)?;
    }
    if config.output.wants(Format::Svg) {
        let sup: Vec<f64> = report.points.iter().map(|p| p.sup_u).collect();
        write_svg(
            &dir.join("sweep.svg"),
            &format!("sup u against lambda, lambda1(0) = {lambda1:.6}"),
            "lambda",
            &lambdas,
            &[Series {
                label: "sup u",
                y: &sup,
                dashed: false,
            }],
        )?;
    }
    println!("lambda1(0) = {lambda1:.12}");
    for p in &report.points {
        println!(
            "lambda {:.6e}  sup u {:.6e}  {}",
            p.lambda,
            p.sup_u,
            if p.solvable {
                "solvable"
            } else {
                "not solvable"
            }
        );
    }
    match report.onset_bracket {
        Some((a, b)) => println!(
            "onset in ({a:.6e}, {b:.6e}], brackets lambda1(0): {}",
            report.onset_brackets_lambda1
        ),
        None => println!("no onset bracket inside the sweep range"),
    }
    if let Some(p) = report.points.iter().find(|p| stop_failed(p.stop)) {
        return Err(CliError::Convergence(format!(
            "solve at lambda = {} stopped with {:?}",
            p.lambda, p.stop
        )));
    }
    Ok(Outcome { dir, report })
}

fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<(), CliError> {
    use crate::output::fmt_float;
    let mut out = String::from("lambda,sup_u,phi,verdict\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(p.lambda),
            fmt_float(p.sup_u),
            fmt_float(p.phi),
            if p.solvable {
                "solvable"
            } else {
                "not_solvable"
            }
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
