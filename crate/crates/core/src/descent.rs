//! Limited-memory quasi-Newton descent with Armijo backtracking.
//!
//! Shared by the Rayleigh-quotient minimization and the energy minimization.
//! Directions come from the L-BFGS two-loop recursion and fall back to the
//! negative gradient whenever the memory is empty or the direction is not a
//! descent direction.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

const ARMIJO_C: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const FLAT_RTOL: f64 = 1e-12;

pub(crate) trait Objective {
    fn len(&self) -> usize;

    /// Value at `x`, writing the gradient into `grad`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Stopping measure for the iterate `x` with gradient `grad`.
    fn residual(&self, x: &[f64], grad: &[f64]) -> f64;

    /// Maps a trial point back onto the feasible set. Returns `true` when the
    /// map was not the identity, which invalidates stored curvature pairs.
    fn project(&self, _x: &mut [f64]) -> bool {
        false
    }

    fn diverged(&self, _x: &[f64], _value: f64) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DescentOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub stall_window: usize,
    pub stall_rtol: f64,
}

impl DescentOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        DescentOptions {
            tol,
            max_iter,
            memory: 10,
            stall_window: 10,
            stall_rtol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    Stalled,
    MaxIter,
    Diverged,
}

#[derive(Debug, Clone)]
pub(crate) struct DescentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub reason: StopReason,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn two_loop(grad: &[f64], memory: &VecDeque<Pair>, d: &mut [f64]) {
    for (di, gi) in d.iter_mut().zip(grad) {
        *di = -gi;
    }
    let mut alpha = Vec::with_capacity(memory.len());
    for pair in memory.iter().rev() {
        let a = pair.rho * dot(&pair.s, d);
        for (di, yi) in d.iter_mut().zip(&pair.y) {
            *di -= a * yi;
        }
        alpha.push(a);
    }
    if let Some(last) = memory.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        d.iter_mut().for_each(|v| *v *= gamma);
    }
    for (pair, a) in memory.iter().zip(alpha.into_iter().rev()) {
        let b = pair.rho * dot(&pair.y, d);
        for (di, si) in d.iter_mut().zip(&pair.s) {
            *di += (a - b) * si;
        }
    }
}

/// Callback on `(iteration, x, f)` for every accepted iterate.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &[f64], f64);

/// Minimize `obj` from `x0`. The observer sees every accepted iterate.
pub(crate) fn minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    opts: &DescentOptions,
    mut observer: Option<Observer<'_>>,
) -> DescentOutcome {
    let n = obj.len();
    let mut x = x0.to_vec();
    obj.project(&mut x);
    let mut g = vec![0.0; n];
    let mut f = obj.eval(&x, &mut g);
    let mut res = obj.residual(&x, &g);

    let mut memory: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut history: VecDeque<(f64, f64)> = VecDeque::with_capacity(opts.stall_window + 1);
    history.push_back((f, res));

    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    if let Some(obs) = observer.as_mut() {
        obs(0, &x, f);
    }

    let mut iter = 0;
    let reason = loop {
        if res <= opts.tol {
            break StopReason::Converged;
        }
        if obj.diverged(&x, f) {
            break StopReason::Diverged;
        }
        if iter >= opts.max_iter {
            break StopReason::MaxIter;
        }
        iter += 1;

        let mut accepted = false;
        // Two attempts: quasi-Newton direction, then steepest descent with cleared memory.
        for attempt in 0..2 {
            if attempt == 1 && memory.is_empty() {
                break;
            }
            if attempt == 1 {
                memory.clear();
            }
            if memory.is_empty() {
                let gs = sup(&g);
                let scale = if gs > 0.0 {
                    0.1 * sup(&x).max(1e-3) / gs
                } else {
                    0.0
                };
                for (di, gi) in d.iter_mut().zip(&g) {
                    *di = -scale * gi;
                }
            } else {
                two_loop(&g, &memory, &mut d);
            }
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                memory.clear();
                let gs = sup(&g);
                let scale = if gs > 0.0 {
                    0.1 * sup(&x).max(1e-3) / gs
                } else {
                    0.0
                };
                for (di, gi) in d.iter_mut().zip(&g) {
                    *di = -scale * gi;
                }
                slope = dot(&g, &d);
                if !(slope < 0.0) {
                    break;
                }
            }

            let g_sup = sup(&g);
            let mut step = 1.0;
            for _ in 0..MAX_BACKTRACKS {
                for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&d) {
                    *xn = xi + step * di;
                }
                let reset = obj.project(&mut x_new);
                let f_new = obj.eval(&x_new, &mut g_new);
                let armijo = f_new <= f + ARMIJO_C * step * slope;
                // Near the minimum the decrease drops below the rounding level of f;
                // accept steps that keep f within that level and shrink the gradient.
                let flat = f_new <= f + FLAT_RTOL * f.abs() && sup(&g_new) < g_sup;
                if f_new.is_finite() && (armijo || flat) {
                    let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if reset {
                        memory.clear();
                    } else if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                        if memory.len() == opts.memory {
                            memory.pop_front();
                        }
                        memory.push_back(Pair {
                            s,
                            y,
                            rho: 1.0 / sy,
                        });
                    }
                    std::mem::swap(&mut x, &mut x_new);
                    std::mem::swap(&mut g, &mut g_new);
                    f = f_new;
                    accepted = true;
                    break;
                }
                step *= SHRINK;
            }
            if accepted {
                break;
            }
        }

        if !accepted {
            res = obj.residual(&x, &g);
            break if res <= opts.tol {
                StopReason::Converged
            } else {
                StopReason::Stalled
            };
        }

        res = obj.residual(&x, &g);
        if let Some(obs) = observer.as_mut() {
            obs(iter, &x, f);
        }

        history.push_back((f, res));
        if history.len() > opts.stall_window + 1 {
            history.pop_front();
        }
        // Stalled: neither the value nor the residual moved over the window.
        if history.len() == opts.stall_window + 1 && res > opts.tol {
            let (f_old, res_old) = history[0];
            if f_old - f < opts.stall_rtol * f.abs() && res >= res_old {
                break StopReason::Stalled;
            }
        }
    };

    DescentOutcome {
        x,
        value: f,
        residual: res,
        iterations: iter,
        reason,
    }
}
