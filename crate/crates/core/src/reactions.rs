//! Reaction terms `f(x, t)` and their truncations.
//!
//! A reaction is an autonomous profile `g(t)` scaled by a positive spatial
//! weight `ρ(x)`: `f(x, t) = ρ(x) g(t)` for `t ≥ 0`, and `f(x, t) = f(x, 0)`
//! for `t < 0`. The truncation at level `k` is
//! `f_k(x, t) = f(x, t⁺) ∨ (−k (t⁺)^{p−1})`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::nonlocal::check_p;
use crate::quadrature::adaptive_simpson;

/// A real number or one of `±∞`.
///
/// Only comparisons and `max` with a finite value are defined; anything else
/// has to go through [`ExtendedReal::expect_finite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "ExtendedRealRepr", try_from = "ExtendedRealRepr")]
pub enum ExtendedReal {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case", deny_unknown_fields)]
enum ExtendedRealRepr {
    Finite { value: f64 },
    PlusInfinity,
    MinusInfinity,
}

impl From<ExtendedReal> for ExtendedRealRepr {
    fn from(x: ExtendedReal) -> Self {
        match x {
            ExtendedReal::Finite(value) => ExtendedRealRepr::Finite { value },
            ExtendedReal::PlusInfinity => ExtendedRealRepr::PlusInfinity,
            ExtendedReal::MinusInfinity => ExtendedRealRepr::MinusInfinity,
        }
    }
}

impl TryFrom<ExtendedRealRepr> for ExtendedReal {
    type Error = String;
    fn try_from(r: ExtendedRealRepr) -> std::result::Result<Self, String> {
        match r {
            ExtendedRealRepr::Finite { value } if value.is_finite() => {
                Ok(ExtendedReal::Finite(value))
            }
            ExtendedRealRepr::Finite { value } => {
                Err(format!("finite value expected, got {value}"))
            }
            ExtendedRealRepr::PlusInfinity => Ok(ExtendedReal::PlusInfinity),
            ExtendedRealRepr::MinusInfinity => Ok(ExtendedReal::MinusInfinity),
        }
    }
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    /// The finite value. Panics on `±∞`: arithmetic on infinities is a caller bug.
    pub fn expect_finite(self) -> f64 {
        match self {
            ExtendedReal::Finite(x) => x,
            other => panic!("contract violation: arithmetic on {other}"),
        }
    }

    /// `self ∨ c`.
    pub fn max_finite(self, c: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(x) => ExtendedReal::Finite(x.max(c)),
            ExtendedReal::PlusInfinity => ExtendedReal::PlusInfinity,
            ExtendedReal::MinusInfinity => ExtendedReal::Finite(c),
        }
    }

    /// Multiplication by a strictly positive scalar.
    pub fn scale_positive(self, rho: f64) -> ExtendedReal {
        debug_assert!(rho > 0.0);
        match self {
            ExtendedReal::Finite(x) => ExtendedReal::Finite(rho * x),
            other => other,
        }
    }

    /// Maps `±∞` onto `f64` infinities, for plotting and serialization only.
    pub fn to_f64_lossy(self) -> f64 {
        match self {
            ExtendedReal::Finite(x) => x,
            ExtendedReal::PlusInfinity => f64::INFINITY,
            ExtendedReal::MinusInfinity => f64::NEG_INFINITY,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtendedReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (PlusInfinity, PlusInfinity) | (MinusInfinity, MinusInfinity) => Some(Ordering::Equal),
            (PlusInfinity, _) | (_, MinusInfinity) => Some(Ordering::Greater),
            (MinusInfinity, _) | (_, PlusInfinity) => Some(Ordering::Less),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PlusInfinity => f.write_str("+inf"),
            ExtendedReal::MinusInfinity => f.write_str("-inf"),
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        ExtendedReal::Finite(x)
    }
}

/// Multiplicative spatial weight `ρ(x) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialWeight {
    Constant {
        value: f64,
    },
    /// Piecewise-linear through `(x, value)` pairs, constant beyond the ends.
    Tabulated {
        x: Vec<f64>,
        value: Vec<f64>,
    },
}

impl Default for SpatialWeight {
    fn default() -> Self {
        SpatialWeight::Constant { value: 1.0 }
    }
}

impl SpatialWeight {
    pub fn at(&self, x: f64) -> f64 {
        match self {
            SpatialWeight::Constant { value } => *value,
            SpatialWeight::Tabulated { x: xs, value } => interpolate(xs, value, x, false),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SpatialWeight::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(Error::validation(
                        "reaction.weight",
                        "weight must be positive",
                    ));
                }
            }
            SpatialWeight::Tabulated { x, value } => {
                check_table(x, value, "reaction.weight")?;
                if value.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::validation(
                        "reaction.weight",
                        "weight must be positive",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Upper end of the switch scan for non-monotone families.
const SCAN_END: f64 = 1e12;

/// Truncation clamp pattern on `t > 0`: active just above 0 when
/// `clamped_at_zero`, toggling at each of the increasing `points`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampSwitches {
    pub clamped_at_zero: bool,
    pub points: Vec<f64>,
}

/// Reaction families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionKind {
    /// `λ t^{q−1} − t^{r−1}` with `1 < q ≤ p < r`.
    Logistic { lambda: f64, q: f64, r: f64 },
    /// `λ t^{p−1} − t^{r−1}` on `[0, 1]`, `λ t^{p−1} − e^{t^α − 1}` beyond,
    /// with `α ≥ p − 1`, `r > p`.
    Exponential {
        #[serde(default = "one")]
        lambda: f64,
        alpha: f64,
        r: f64,
    },
    /// `c0 + λ t^{q−1} − μ t^{r−1}`; no ordering imposed on the exponents.
    PowerCombo {
        c0: f64,
        lambda: f64,
        q: f64,
        mu: f64,
        r: f64,
    },
    /// Piecewise-linear profile through `(t, f)` with `t[0] = 0`, extended
    /// linearly past the last point. Asymptotic weights must be declared for
    /// the solvability criterion.
    CustomTabulated {
        t: Vec<f64>,
        f: Vec<f64>,
        #[serde(default)]
        a0: Option<ExtendedReal>,
        #[serde(default)]
        a_inf: Option<ExtendedReal>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    kind: ReactionKind,
    p: f64,
    weight: SpatialWeight,
    truncation: Option<u32>,
}

impl Reaction {
    pub fn new(kind: ReactionKind, p: f64) -> Result<Self> {
        Self::with_weight(kind, p, SpatialWeight::default())
    }

    pub fn with_weight(kind: ReactionKind, p: f64, weight: SpatialWeight) -> Result<Self> {
        check_p(p)?;
        weight.validate()?;
        validate_kind(&kind, p)?;
        Ok(Reaction {
            kind,
            p,
            weight,
            truncation: None,
        })
    }

    /// Logistic `λ t^{q−1} − t^{r−1}`, a shorthand used throughout tests.
    pub fn logistic(lambda: f64, q: f64, r: f64, p: f64) -> Result<Self> {
        Self::new(ReactionKind::Logistic { lambda, q, r }, p)
    }

    pub fn kind(&self) -> &ReactionKind {
        &self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weight(&self) -> &SpatialWeight {
        &self.weight
    }

    pub fn truncation(&self) -> Option<u32> {
        self.truncation
    }

    /// The reaction with its truncation removed.
    pub fn untruncated(&self) -> Reaction {
        Reaction {
            truncation: None,
            ..self.clone()
        }
    }

    /// Autonomous profile `g(t)` for `t ≥ 0`.
    fn profile(&self, t: f64) -> f64 {
        let p = self.p;
        match &self.kind {
            ReactionKind::Logistic { lambda, q, r } => lambda * t.powf(q - 1.0) - t.powf(r - 1.0),
            ReactionKind::Exponential { lambda, alpha, r } => {
                if t <= 1.0 {
                    lambda * t.powf(p - 1.0) - t.powf(r - 1.0)
                } else {
                    lambda * t.powf(p - 1.0) - (t.powf(*alpha) - 1.0).exp()
                }
            }
            ReactionKind::PowerCombo {
                c0,
                lambda,
                q,
                mu,
                r,
            } => c0 + lambda * t.powf(q - 1.0) - mu * t.powf(r - 1.0),
            ReactionKind::CustomTabulated { t: ts, f, .. } => interpolate(ts, f, t, true),
        }
    }

    /// `G(t) = ∫_0^t g` for `t ≥ 0`.
    fn profile_integral(&self, t: f64) -> f64 {
        let p = self.p;
        match &self.kind {
            ReactionKind::Logistic { lambda, q, r } => lambda * t.powf(*q) / q - t.powf(*r) / r,
            ReactionKind::Exponential { lambda, alpha, r } => {
                let poly = lambda * t.powf(p) / p;
                if t <= 1.0 {
                    poly - t.powf(*r) / r
                } else {
                    let tail = if *alpha == 1.0 {
                        (t - 1.0).exp_m1()
                    } else {
                        let scale = (t.powf(*alpha) - 1.0).exp() * (t - 1.0);
                        adaptive_simpson(
                            |s| (s.powf(*alpha) - 1.0).exp(),
                            1.0,
                            t,
                            1e-14 * scale.max(1.0),
                        )
                    };
                    poly - 1.0 / r - tail
                }
            }
            ReactionKind::PowerCombo {
                c0,
                lambda,
                q,
                mu,
                r,
            } => c0 * t + lambda * t.powf(*q) / q - mu * t.powf(*r) / r,
            ReactionKind::CustomTabulated { t: ts, f, .. } => integrate_table(ts, f, t),
        }
    }

    /// Untruncated `f(x, t)` including the constant extension to `t < 0`.
    fn f_raw(&self, rho: f64, t: f64) -> f64 {
        rho * self.profile(t.max(0.0))
    }

    /// `f(x,t)/t^{p−1}` for the untruncated reaction, `t > 0`.
    fn quotient(&self, rho: f64, t: f64) -> f64 {
        self.f_raw(rho, t) / t.powf(self.p - 1.0)
    }

    /// Where the truncation clamp is active on `t > 0`, for weight `rho`.
    fn clamp_switches(&self, rho: f64, k: u32) -> ClampSwitches {
        let level = -(k as f64);
        let active = |t: f64| self.quotient(rho, t) <= level;
        // Smallest probe where t^(p-1) stays far from underflow.
        let t_min = 1e-12f64.max(1e-200f64.powf(1.0 / (self.p - 1.0)));
        let bisect = |mut lo: f64, mut hi: f64| {
            let lo_active = active(lo);
            while hi - lo > 1e-12 * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if active(mid) == lo_active {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let clamped_at_zero = active(t_min);
        let mut points = Vec::new();
        let mut state = clamped_at_zero;
        let mut t = t_min;
        if !self.quotient_is_monotone() {
            // Log-spaced scan for interior switches, eight probes per octave.
            let step = 2f64.powf(0.125);
            while t < SCAN_END {
                let next = t * step;
                if active(next) != state {
                    points.push(bisect(t, next));
                    state = !state;
                }
                t = next;
            }
        }
        if !state {
            // Past the scan the quotient is eventually monotone: look for the
            // last switch on by doubling.
            let mut lo = t;
            let mut hi = t.max(1.0);
            for _ in 0..1100 {
                if !hi.is_finite() {
                    break;
                }
                if active(hi) {
                    points.push(if lo == hi { hi } else { bisect(lo, hi) });
                    break;
                }
                lo = hi;
                hi *= 2.0;
            }
        }
        ClampSwitches {
            clamped_at_zero,
            points,
        }
    }

    /// Families whose `f(t)/t^{p-1}` is nonincreasing, so the clamp switches
    /// on at most once.
    fn quotient_is_monotone(&self) -> bool {
        matches!(
            self.kind,
            ReactionKind::Logistic { .. } | ReactionKind::Exponential { .. }
        )
    }

    fn f_with_rho(&self, rho: f64, t: f64) -> f64 {
        match self.truncation {
            None => self.f_raw(rho, t),
            Some(k) => {
                let tp = t.max(0.0);
                self.f_raw(rho, tp).max(-(k as f64) * tp.powf(self.p - 1.0))
            }
        }
    }

    fn big_f_with_rho(&self, rho: f64, t: f64, switches: Option<&ClampSwitches>) -> f64 {
        if t <= 0.0 {
            let f0 = self.f_raw(rho, 0.0);
            let f0 = if self.truncation.is_some() {
                f0.max(0.0)
            } else {
                f0
            };
            return t * f0;
        }
        let Some(k) = self.truncation else {
            return rho * self.profile_integral(t);
        };
        let owned;
        let sw = match switches {
            Some(sw) => sw,
            None => {
                owned = self.clamp_switches(rho, k);
                &owned
            }
        };
        // Integrate piece by piece between switches.
        let (p, kk) = (self.p, k as f64);
        let mut acc = 0.0;
        let mut a = 0.0;
        let mut clamped = sw.clamped_at_zero;
        for &b in sw.points.iter().chain(std::iter::once(&f64::INFINITY)) {
            let end = b.min(t);
            if end > a {
                acc += if clamped {
                    -kk * (end.powf(p) - a.powf(p)) / p
                } else if a == 0.0 {
                    rho * self.profile_integral(end)
                } else {
                    rho * (self.profile_integral(end) - self.profile_integral(a))
                };
            }
            if b >= t {
                break;
            }
            a = b;
            clamped = !clamped;
        }
        acc
    }

    fn base_asymptote_zero(&self) -> Result<ExtendedReal> {
        let p = self.p;
        match &self.kind {
            ReactionKind::Logistic { lambda, q, r } => Ok(monomial_limit(
                &[(*lambda, q - 1.0), (-1.0, r - 1.0)],
                p,
                Limit::Zero,
            )),
            ReactionKind::Exponential { lambda, r, .. } => Ok(monomial_limit(
                &[(*lambda, p - 1.0), (-1.0, r - 1.0)],
                p,
                Limit::Zero,
            )),
            ReactionKind::PowerCombo {
                c0,
                lambda,
                q,
                mu,
                r,
            } => Ok(monomial_limit(
                &[(*c0, 0.0), (*lambda, q - 1.0), (-mu, r - 1.0)],
                p,
                Limit::Zero,
            )),
            ReactionKind::CustomTabulated { a0, .. } => a0.ok_or_else(|| {
                Error::validation("reaction.a0", "custom_tabulated reaction must declare a0")
            }),
        }
    }

    fn base_asymptote_infty(&self) -> Result<ExtendedReal> {
        let p = self.p;
        match &self.kind {
            ReactionKind::Logistic { lambda, q, r } => Ok(monomial_limit(
                &[(*lambda, q - 1.0), (-1.0, r - 1.0)],
                p,
                Limit::Infinity,
            )),
            // the exponential term dominates every power
            ReactionKind::Exponential { .. } => Ok(ExtendedReal::MinusInfinity),
            ReactionKind::PowerCombo {
                c0,
                lambda,
                q,
                mu,
                r,
            } => Ok(monomial_limit(
                &[(*c0, 0.0), (*lambda, q - 1.0), (-mu, r - 1.0)],
                p,
                Limit::Infinity,
            )),
            ReactionKind::CustomTabulated { a_inf, .. } => a_inf.ok_or_else(|| {
                Error::validation(
                    "reaction.a_inf",
                    "custom_tabulated reaction must declare a_inf",
                )
            }),
        }
    }
}

fn validate_kind(kind: &ReactionKind, p: f64) -> Result<()> {
    let finite = |name: &str, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::validation(
                format!("reaction.{name}"),
                "must be finite",
            ))
        }
    };
    match kind {
        ReactionKind::Logistic { lambda, q, r } => {
            finite("lambda", *lambda)?;
            if !(1.0 < *q && *q <= p && p < *r && r.is_finite()) {
                return Err(Error::validation(
                    "reaction.q",
                    format!("logistic needs 1 < q <= p < r, got q = {q}, p = {p}, r = {r}"),
                ));
            }
        }
        ReactionKind::Exponential { lambda, alpha, r } => {
            finite("lambda", *lambda)?;
            if !(*alpha >= p - 1.0 && alpha.is_finite()) {
                return Err(Error::validation(
                    "reaction.alpha",
                    format!("need alpha >= p - 1, got alpha = {alpha}, p = {p}"),
                ));
            }
            if !(*r > p && r.is_finite()) {
                return Err(Error::validation(
                    "reaction.r",
                    format!("need r > p, got r = {r}, p = {p}"),
                ));
            }
        }
        ReactionKind::PowerCombo {
            c0,
            lambda,
            q,
            mu,
            r,
        } => {
            finite("c0", *c0)?;
            finite("lambda", *lambda)?;
            finite("mu", *mu)?;
            if !(*q >= 1.0 && q.is_finite()) {
                return Err(Error::validation(
                    "reaction.q",
                    format!("need q >= 1, got {q}"),
                ));
            }
            if !(*r >= 1.0 && r.is_finite()) {
                return Err(Error::validation(
                    "reaction.r",
                    format!("need r >= 1, got {r}"),
                ));
            }
        }
        ReactionKind::CustomTabulated { t, f, .. } => {
            check_table(t, f, "reaction.t")?;
            if t[0] != 0.0 {
                return Err(Error::validation("reaction.t", "table must start at t = 0"));
            }
        }
    }
    Ok(())
}

fn check_table(xs: &[f64], ys: &[f64], field: &str) -> Result<()> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::validation(
            field,
            "need at least two points and matching lengths",
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::validation(field, "table entries must be finite"));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation(
            field,
            "abscissae must be strictly increasing",
        ));
    }
    Ok(())
}

/// Linear interpolation; beyond the ends either extrapolates linearly or holds constant.
fn interpolate(xs: &[f64], ys: &[f64], x: f64, extrapolate: bool) -> f64 {
    let last = xs.len() - 1;
    let seg = if x <= xs[0] {
        if !extrapolate {
            return ys[0];
        }
        0
    } else if x >= xs[last] {
        if !extrapolate {
            return ys[last];
        }
        last - 1
    } else {
        xs.partition_point(|&v| v <= x) - 1
    };
    let (x0, x1, y0, y1) = (xs[seg], xs[seg + 1], ys[seg], ys[seg + 1]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Exact integral of the piecewise-linear table from 0 to `t ≥ 0`.
fn integrate_table(ts: &[f64], fs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    let last = ts.len() - 1;
    for seg in 0..last {
        let (a, b) = (ts[seg], ts[seg + 1]);
        if t <= a {
            break;
        }
        // the final segment carries the linear extrapolation
        let end = if seg == last - 1 { t } else { t.min(b) };
        let fa = fs[seg];
        let fe = interpolate(ts, fs, end, true);
        acc += 0.5 * (fa + fe) * (end - a);
    }
    acc
}

#[derive(Clone, Copy)]
enum Limit {
    Zero,
    Infinity,
}

/// Limit of `Σ c_j t^{e_j} / t^{p−1}` as `t → 0⁺` or `t → ∞`.
fn monomial_limit(terms: &[(f64, f64)], p: f64, limit: Limit) -> ExtendedReal {
    const EPS: f64 = 1e-12;
    let mut terms: Vec<(f64, f64)> = terms
        .iter()
        .filter(|(c, _)| *c != 0.0)
        .map(|&(c, e)| (c, e - (p - 1.0)))
        .collect();
    // dominant exponent first
    match limit {
        Limit::Zero => terms.sort_by(|a, b| a.1.total_cmp(&b.1)),
        Limit::Infinity => terms.sort_by(|a, b| b.1.total_cmp(&a.1)),
    }
    let mut i = 0;
    while i < terms.len() {
        let e = terms[i].1;
        let mut coef = 0.0;
        let mut j = i;
        while j < terms.len() && (terms[j].1 - e).abs() <= EPS {
            coef += terms[j].0;
            j += 1;
        }
        let dominant_blows_up = match limit {
            Limit::Zero => e < -EPS,
            Limit::Infinity => e > EPS,
        };
        if e.abs() <= EPS {
            return ExtendedReal::Finite(coef);
        }
        if !dominant_blows_up {
            return ExtendedReal::Finite(0.0);
        }
        if coef != 0.0 {
            return if coef > 0.0 {
                ExtendedReal::PlusInfinity
            } else {
                ExtendedReal::MinusInfinity
            };
        }
        i = j;
    }
    ExtendedReal::Finite(0.0)
}

/// `f(x, t)`, truncated when the reaction carries a level `k`.
pub fn eval_f(reaction: &Reaction, x: f64, t: f64) -> f64 {
    reaction.f_with_rho(reaction.weight.at(x), t)
}

/// `F(x, t) = ∫_0^t f(x, τ) dτ`.
#[allow(non_snake_case)]
pub fn eval_F(reaction: &Reaction, x: f64, t: f64) -> f64 {
    reaction.big_f_with_rho(reaction.weight.at(x), t, None)
}

/// `a₀(x) = lim_{t→0⁺} f(x,t)/t^{p−1}`.
pub fn asymptote_zero(reaction: &Reaction, x: f64) -> Result<ExtendedReal> {
    let a = reaction
        .base_asymptote_zero()?
        .scale_positive(reaction.weight.at(x));
    Ok(match reaction.truncation {
        Some(k) => a.max_finite(-(k as f64)),
        None => a,
    })
}

/// `a∞(x) = lim_{t→∞} f(x,t)/t^{p−1}`.
pub fn asymptote_infty(reaction: &Reaction, x: f64) -> Result<ExtendedReal> {
    let a = reaction
        .base_asymptote_infty()?
        .scale_positive(reaction.weight.at(x));
    Ok(match reaction.truncation {
        Some(k) => a.max_finite(-(k as f64)),
        None => a,
    })
}

/// The truncated reaction `f_k`.
pub fn truncate(reaction: &Reaction, k: u32) -> Result<Reaction> {
    if k < 1 {
        return Err(Error::validation("k", "truncation level must be >= 1"));
    }
    if let Some(existing) = reaction.truncation {
        return Err(Error::validation(
            "k",
            format!("reaction is already truncated at level {existing}"),
        ));
    }
    Ok(Reaction {
        truncation: Some(k),
        ..reaction.clone()
    })
}

/// Weights `a₀(x_i)` at every node.
pub fn weights_zero(reaction: &Reaction, grid: &Grid) -> Result<Vec<ExtendedReal>> {
    grid.nodes()
        .iter()
        .map(|&x| asymptote_zero(reaction, x))
        .collect()
}

/// Weights `a∞(x_i)` at every node.
pub fn weights_infty(reaction: &Reaction, grid: &Grid) -> Result<Vec<ExtendedReal>> {
    grid.nodes()
        .iter()
        .map(|&x| asymptote_infty(reaction, x))
        .collect()
}

/// A reaction evaluated at the nodes of one grid, with the spatial weight and
/// the truncation clamp pattern cached per node.
#[derive(Debug, Clone)]
pub struct NodalReaction {
    reaction: Reaction,
    rho: Vec<f64>,
    switches: Vec<Option<ClampSwitches>>,
}

impl NodalReaction {
    pub fn new(reaction: &Reaction, grid: &Grid) -> Self {
        let rho: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| reaction.weight.at(x))
            .collect();
        let switches = match reaction.truncation {
            Some(k) => rho
                .iter()
                .map(|&r| Some(reaction.clamp_switches(r, k)))
                .collect(),
            None => vec![None; rho.len()],
        };
        NodalReaction {
            reaction: reaction.clone(),
            rho,
            switches,
        }
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// `f(x_i, t)` (truncated if the reaction is).
    pub fn f(&self, i: usize, t: f64) -> f64 {
        self.reaction.f_with_rho(self.rho[i], t)
    }

    /// Untruncated `f(x_i, t)`.
    pub fn f_untruncated(&self, i: usize, t: f64) -> f64 {
        self.reaction.f_raw(self.rho[i], t)
    }

    /// `F(x_i, t)` (truncated if the reaction is).
    #[allow(non_snake_case)]
    pub fn F(&self, i: usize, t: f64) -> f64 {
        self.reaction
            .big_f_with_rho(self.rho[i], t, self.switches[i].as_ref())
    }

    /// Whether the truncation clamp changes `f` at `(x_i, t)`.
    pub fn clamp_active(&self, i: usize, t: f64) -> bool {
        self.reaction.truncation.is_some() && self.f(i, t) != self.f_untruncated(i, t)
    }

    /// Clamp pattern at node `i`; `None` for untruncated reactions.
    pub fn clamp_switches(&self, i: usize) -> Option<&ClampSwitches> {
        self.switches[i].as_ref()
    }
}

/// Outcome of the monotonicity test on `t ↦ f(x,t)/t^{p−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Strict,
    Nonstrict,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisViolation {
    pub hypothesis: String,
    pub node: usize,
    pub x: f64,
    pub t: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Smallest `c₀ > 0` with `f(x,t) ≤ c₀ (1 + t^{p−1})` on the samples.
    pub c0: f64,
    pub growth_ok: bool,
    pub monotonicity: Monotonicity,
    /// For truncated reactions: a `c_k` with `|f_k| ≤ c_k (1 + |t|^{p−1})` on the samples.
    pub bilateral_constant: Option<f64>,
    pub violations: Vec<HypothesisViolation>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.growth_ok && self.monotonicity != Monotonicity::Violated
    }
}

/// Check the growth bound and the monotonicity of `f(x,t)/t^{p−1}` at every
/// node over the sample set.
pub fn validate_hypotheses(
    reaction: &Reaction,
    grid: &Grid,
    t_samples: &[f64],
) -> Result<HypothesisReport> {
    if t_samples.is_empty() || t_samples.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::validation(
            "t_samples",
            "samples must be positive and finite",
        ));
    }
    if t_samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation(
            "t_samples",
            "samples must be strictly increasing",
        ));
    }
    const MAX_REPORTED: usize = 32;
    let p = reaction.p;
    let mut c0: f64 = f64::MIN_POSITIVE;
    let mut growth_ok = true;
    let mut strict = true;
    let mut violated = false;
    let mut violations = Vec::new();
    let push = |v: HypothesisViolation, list: &mut Vec<HypothesisViolation>| {
        if list.len() < MAX_REPORTED {
            list.push(v);
        }
    };

    for (i, &x) in grid.nodes().iter().enumerate() {
        let mut prev: Option<f64> = None;
        for &t in t_samples {
            let f = eval_f(reaction, x, t);
            if f.is_nan() || f == f64::INFINITY {
                growth_ok = false;
                push(
                    HypothesisViolation {
                        hypothesis: "h2".into(),
                        node: i,
                        x,
                        t,
                        detail: format!("f = {f} is not bounded above"),
                    },
                    &mut violations,
                );
                continue;
            }
            c0 = c0.max(f / (1.0 + t.powf(p - 1.0)));
            let quotient = f / t.powf(p - 1.0);
            if let Some(q_prev) = prev {
                let tol = 1e-12 * q_prev.abs().max(1.0);
                if quotient > q_prev + tol {
                    violated = true;
                    push(
                        HypothesisViolation {
                            hypothesis: "h3".into(),
                            node: i,
                            x,
                            t,
                            detail: format!("f/t^(p-1) increased from {q_prev} to {quotient}"),
                        },
                        &mut violations,
                    );
                } else if quotient >= q_prev - tol {
                    strict = false;
                }
            }
            prev = Some(quotient);
        }
    }

    let monotonicity = if violated {
        Monotonicity::Violated
    } else if strict {
        Monotonicity::Strict
    } else {
        Monotonicity::Nonstrict
    };

    let bilateral_constant = reaction.truncation.map(|k| {
        let f0 = grid.nodes().iter().fold(0.0f64, |m, &x| {
            m.max(eval_f(&reaction.untruncated(), x, 0.0).abs())
        });
        let ck = c0.max(k as f64).max(f0);
        for (i, &x) in grid.nodes().iter().enumerate() {
            for &t in t_samples {
                for tt in [t, -t] {
                    let fk = eval_f(reaction, x, tt);
                    if fk.abs() > ck * (1.0 + tt.abs().powf(p - 1.0)) * (1.0 + 1e-12) {
                        growth_ok = false;
                        push(
                            HypothesisViolation {
                                hypothesis: "bilateral_growth".into(),
                                node: i,
                                x,
                                t: tt,
                                detail: format!("|f_k| = {} exceeds c_k bound", fk.abs()),
                            },
                            &mut violations,
                        );
                    }
                }
            }
        }
        ck
    });

    Ok(HypothesisReport {
        c0,
        growth_ok,
        monotonicity,
        bilateral_constant,
        violations,
    })
}

/// Log-spaced sample points on `[lo, hi]`.
pub fn log_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count.max(2) - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;
    use approx::assert_relative_eq;

    fn logistic() -> Reaction {
        Reaction::logistic(1.0, 2.0, 4.0, 2.0).unwrap()
    }

    #[test]
    fn logistic_values() {
        let r = logistic();
        assert_eq!(eval_f(&r, 0.3, 1.0), 0.0);
        assert_eq!(eval_f(&r, 0.3, -5.0), 0.0);
        assert_relative_eq!(eval_F(&r, 0.3, 1.0), 0.25);
        assert_eq!(eval_F(&r, 0.3, 0.0), 0.0);
        let k1 = truncate(&r, 1).unwrap();
        assert_eq!(eval_f(&k1, 0.3, 2.0), -2.0);
    }

    #[test]
    fn clamp_active_near_zero_then_released() {
        // f = λ − 0.1 t^{0.4} with λ < 0, p = 1.3: clamped near 0, free in a
        // middle band, clamped again for very large t.
        let kind = ReactionKind::PowerCombo {
            c0: 0.0,
            lambda: -2.9458919150028566,
            q: 1.0,
            mu: 0.1,
            r: 1.4,
        };
        let rk = truncate(&Reaction::new(kind, 1.3).unwrap(), 12).unwrap();
        let clamped = |t: f64| (-2.9458919150028566 - 0.1 * t.powf(0.4)).max(-12.0 * t.powf(0.3));
        let sw = NodalReaction::new(&rk, &build_grid(0.0, 1.0, 3).unwrap())
            .clamp_switches(0)
            .unwrap()
            .clone();
        assert!(sw.clamped_at_zero);
        assert_eq!(sw.points.len(), 2);
        for t in [0.005, 0.01, 0.05, 1.0, 40.0] {
            let oracle = adaptive_simpson(clamped, 0.0, t, 1e-13);
            assert_relative_eq!(eval_F(&rk, 0.5, t), oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn truncated_antiderivative_matches_quadrature() {
        // ∫_0^2 max(τ − τ³, −τ) dτ, clamp switching on at √2.
        let k1 = truncate(&logistic(), 1).unwrap();
        let oracle = adaptive_simpson(|t| (t - t * t * t).max(-t), 0.0, 2f64.sqrt(), 1e-14)
            + adaptive_simpson(|t| (t - t * t * t).max(-t), 2f64.sqrt(), 2.0, 1e-14);
        let value = eval_F(&k1, 0.5, 2.0);
        assert_relative_eq!(value, oracle, max_relative = 1e-10);
        assert_relative_eq!(value, -1.0, max_relative = 1e-10);
        let nodal = NodalReaction::new(&k1, &build_grid(0.0, 1.0, 3).unwrap());
        let sw = nodal.clamp_switches(0).unwrap();
        assert!(!sw.clamped_at_zero && sw.points.len() == 1);
        assert_relative_eq!(sw.points[0], 2f64.sqrt(), max_relative = 1e-11);
        assert_relative_eq!(nodal.F(1, 2.0), -1.0, max_relative = 1e-10);
    }

    #[test]
    fn truncated_primitive_differentiates_to_f_for_cubic_growth() {
        let r = truncate(&Reaction::logistic(28.3, 3.0, 4.0, 3.0).unwrap(), 1).unwrap();
        for t in [0.01, 0.3, 1.5, 3.0, 29.0, 31.0] {
            let e = 1e-6 * t;
            let fd = (eval_F(&r, 0.5, t + e) - eval_F(&r, 0.5, t - e)) / (2.0 * e);
            let f = eval_f(&r, 0.5, t);
            assert!(
                (fd - f).abs() <= 1e-6 * f.abs().max(1.0),
                "t = {t}: {fd} vs {f}"
            );
        }
    }

    #[test]
    fn asymptotes() {
        use ExtendedReal::*;
        let r = Reaction::logistic(3.0, 2.0, 4.0, 2.0).unwrap();
        assert_eq!(asymptote_zero(&r, 0.1).unwrap(), Finite(3.0));
        let r = Reaction::logistic(1.0, 1.5, 4.0, 2.0).unwrap();
        assert_eq!(asymptote_zero(&r, 0.1).unwrap(), PlusInfinity);
        assert_eq!(asymptote_infty(&logistic(), 0.1).unwrap(), MinusInfinity);
        let k5 = truncate(&logistic(), 5).unwrap();
        assert_eq!(asymptote_infty(&k5, 0.1).unwrap(), Finite(-5.0));
        assert_eq!(asymptote_zero(&k5, 0.1).unwrap(), Finite(1.0));
        let low = Reaction::logistic(-7.0, 2.0, 4.0, 2.0).unwrap();
        assert_eq!(
            asymptote_zero(&truncate(&low, 2).unwrap(), 0.1).unwrap(),
            Finite(-2.0)
        );
        let e = Reaction::new(
            ReactionKind::Exponential {
                lambda: 1.0,
                alpha: 1.0,
                r: 3.0,
            },
            2.0,
        )
        .unwrap();
        assert_eq!(asymptote_infty(&e, 0.1).unwrap(), MinusInfinity);
        assert_eq!(asymptote_zero(&e, 0.1).unwrap(), Finite(1.0));
    }

    #[test]
    fn power_combo_asymptotes() {
        use ExtendedReal::*;
        let f = |c0, lambda, q, mu, r| {
            Reaction::new(
                ReactionKind::PowerCombo {
                    c0,
                    lambda,
                    q,
                    mu,
                    r,
                },
                2.0,
            )
            .unwrap()
        };
        // −1 − t: the constant dominates at 0, the linear term at ∞
        let r = f(-1.0, -1.0, 2.0, 0.0, 2.0);
        assert_eq!(asymptote_zero(&r, 0.0).unwrap(), MinusInfinity);
        assert_eq!(asymptote_infty(&r, 0.0).unwrap(), Finite(-1.0));
        // equal exponents combine
        let r = f(0.0, 2.0, 2.0, 0.5, 2.0);
        assert_eq!(asymptote_zero(&r, 0.0).unwrap(), Finite(1.5));
        // q > p: quotient → 0 at zero, +∞ at ∞
        let r = f(0.0, 1.0, 3.0, 0.0, 2.0);
        assert_eq!(asymptote_zero(&r, 0.0).unwrap(), Finite(0.0));
        assert_eq!(asymptote_infty(&r, 0.0).unwrap(), PlusInfinity);
    }

    #[test]
    fn spatial_weight_scales_values_and_limits() {
        let w = SpatialWeight::Tabulated {
            x: vec![0.0, 1.0],
            value: vec![1.0, 3.0],
        };
        let r = Reaction::with_weight(
            ReactionKind::Logistic {
                lambda: 2.0,
                q: 2.0,
                r: 4.0,
            },
            2.0,
            w,
        )
        .unwrap();
        assert_relative_eq!(eval_f(&r, 0.5, 1.0), 2.0 * (2.0 - 1.0));
        assert_eq!(asymptote_zero(&r, 0.5).unwrap(), ExtendedReal::Finite(4.0));
        assert_relative_eq!(eval_F(&r, 1.0, 1.0), 3.0 * (1.0 - 0.25));
        assert!(Reaction::with_weight(
            ReactionKind::Logistic {
                lambda: 2.0,
                q: 2.0,
                r: 4.0
            },
            2.0,
            SpatialWeight::Constant { value: 0.0 }
        )
        .is_err());
    }

    #[test]
    fn exponential_integral() {
        let e = Reaction::new(
            ReactionKind::Exponential {
                lambda: 1.0,
                alpha: 1.0,
                r: 3.0,
            },
            2.0,
        )
        .unwrap();
        // G(2) = 2 − 1/3 − (e − 1)
        assert_relative_eq!(
            eval_F(&e, 0.0, 2.0),
            2.0 - 1.0 / 3.0 - (1f64.exp() - 1.0),
            max_relative = 1e-14
        );
        let e2 = Reaction::new(
            ReactionKind::Exponential {
                lambda: 1.0,
                alpha: 1.5,
                r: 3.0,
            },
            2.0,
        )
        .unwrap();
        let oracle = adaptive_simpson(|t| eval_f(&e2, 0.0, t), 0.0, 1.0, 1e-14)
            + adaptive_simpson(|t| eval_f(&e2, 0.0, t), 1.0, 2.5, 1e-13);
        assert_relative_eq!(eval_F(&e2, 0.0, 2.5), oracle, max_relative = 1e-10);
    }

    #[test]
    fn tabulated_profile() {
        let kind = ReactionKind::CustomTabulated {
            t: vec![0.0, 1.0, 2.0],
            f: vec![0.0, 1.0, 0.0],
            a0: None,
            a_inf: Some(ExtendedReal::MinusInfinity),
        };
        let r = Reaction::new(kind, 2.0).unwrap();
        assert_eq!(eval_f(&r, 0.0, 0.5), 0.5);
        assert_eq!(eval_f(&r, 0.0, 3.0), -1.0);
        assert_relative_eq!(eval_F(&r, 0.0, 2.0), 1.0);
        assert_relative_eq!(eval_F(&r, 0.0, 3.0), 0.5);
        assert!(asymptote_zero(&r, 0.0).is_err());
        assert_eq!(
            asymptote_infty(&r, 0.0).unwrap(),
            ExtendedReal::MinusInfinity
        );
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(Reaction::logistic(1.0, 2.5, 4.0, 2.0).is_err());
        assert!(Reaction::logistic(1.0, 2.0, 2.0, 2.0).is_err());
        assert!(Reaction::logistic(1.0, 1.0, 4.0, 2.0).is_err());
        assert!(Reaction::new(
            ReactionKind::Exponential {
                lambda: 1.0,
                alpha: 0.5,
                r: 3.0
            },
            2.0
        )
        .is_err());
        assert!(Reaction::new(
            ReactionKind::Exponential {
                lambda: 1.0,
                alpha: 1.0,
                r: 2.0
            },
            2.0
        )
        .is_err());
        let bad_table = ReactionKind::CustomTabulated {
            t: vec![0.5, 1.0],
            f: vec![0.0, 1.0],
            a0: None,
            a_inf: None,
        };
        assert!(Reaction::new(bad_table, 2.0).is_err());
    }

    #[test]
    fn double_truncation_rejected() {
        let k = truncate(&logistic(), 2).unwrap();
        assert!(truncate(&k, 3).is_err());
        assert!(truncate(&logistic(), 0).is_err());
    }

    #[test]
    fn truncation_chain_and_negative_axis() {
        let r = Reaction::new(
            ReactionKind::PowerCombo {
                c0: 0.5,
                lambda: 2.0,
                q: 1.5,
                mu: 1.0,
                r: 3.5,
            },
            2.5,
        )
        .unwrap();
        let f0 = eval_f(&r, 0.0, 0.0);
        for k in 1..40u32 {
            let fk = truncate(&r, k).unwrap();
            let fk1 = truncate(&r, k + 1).unwrap();
            for &t in &log_samples(1e-3, 50.0, 80) {
                let (a, b, c) = (
                    eval_f(&fk, 0.0, t),
                    eval_f(&fk1, 0.0, t),
                    eval_f(&r, 0.0, t),
                );
                assert!(a >= b && b >= c, "chain broken at k={k}, t={t}");
                if c >= -(k as f64) * t.powf(1.5) {
                    assert_eq!(a, c);
                }
            }
            for t in [-0.1, -3.0, -100.0] {
                let v = eval_f(&fk, 0.0, t);
                assert_eq!(v, f0.max(0.0));
                assert!(v.abs() <= f0.abs());
            }
        }
    }

    #[test]
    fn hypotheses_report() {
        let g = build_grid(0.0, 1.0, 8).unwrap();
        let samples = log_samples(1e-3, 1e3, 200);
        let rep = validate_hypotheses(&logistic(), &g, &samples).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.monotonicity, Monotonicity::Strict);
        assert!(rep.c0 > 0.0);

        let bad = Reaction::new(
            ReactionKind::PowerCombo {
                c0: 0.0,
                lambda: 1.0,
                q: 3.0,
                mu: 0.0,
                r: 2.0,
            },
            2.0,
        )
        .unwrap();
        let rep = validate_hypotheses(&bad, &g, &samples).unwrap();
        assert_eq!(rep.monotonicity, Monotonicity::Violated);
        assert!(!rep.violations.is_empty());
        assert_eq!(rep.violations[0].hypothesis, "h3");

        let k3 = truncate(&logistic(), 3).unwrap();
        let rep = validate_hypotheses(&k3, &g, &samples).unwrap();
        assert_eq!(rep.monotonicity, Monotonicity::Nonstrict);
        assert!(rep.passed());
        assert!(rep.bilateral_constant.unwrap() >= 3.0);

        assert!(validate_hypotheses(&logistic(), &g, &[1.0, 0.5]).is_err());
        assert!(validate_hypotheses(&logistic(), &g, &[0.0, 0.5]).is_err());
    }

    #[test]
    fn extended_real_order() {
        use ExtendedReal::*;
        assert!(MinusInfinity < Finite(-1e300));
        assert!(Finite(1e300) < PlusInfinity);
        assert!(Finite(1.0) < Finite(2.0));
        assert_eq!(MinusInfinity.max_finite(-3.0), Finite(-3.0));
        assert_eq!(PlusInfinity.max_finite(-3.0), PlusInfinity);
    }
}
