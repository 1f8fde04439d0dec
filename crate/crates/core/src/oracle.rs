//! Brute-force grid search over time allocations.
//!
//! Used to cross-check [`crate::solver::solve`]. Every rate is nondecreasing
//! in every time and energy variable, so only grid points that spend the
//! whole usable block are visited, and the energy budget is always spent in
//! full. The remaining one-dimensional split of the relay energy is found by
//! golden-section search.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::link::backscatter_bits_per_time;
use crate::model::{phase2_harvest_rate, ChannelGains, EnergySplit, SystemParams, TimeAllocation};
use crate::rates::{evaluate, perspective, ConstantsRho, SchemeKind};
use crate::solver::{recover_powers, solve, Diagnostics, Solution, SolverOptions, Status};

/// Relative agreement accepted between solver and grid when the grid bound is smaller.
pub const DEFAULT_REL_TOL: f64 = 0.02;

const GOLDEN_ITERS: usize = 80;
/// Step used for the one-sided directional derivatives behind the grid bound.
const PROBE: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub solution: Solution,
    /// Estimated distance from the best grid value to the true optimum.
    pub grid_bound: f64,
    /// Grid points visited.
    pub evaluated: u64,
}

/// The scheme's value as a function of the times only.
struct Inner {
    scheme: SchemeKind,
    rho: ConstantsRho,
    bs: f64,
    h1_rate: f64,
    h2_rate: f64,
}

impl Inner {
    fn new(params: &SystemParams, gains: &ChannelGains, scheme: SchemeKind) -> Self {
        Self {
            scheme,
            rho: ConstantsRho::new(params, gains),
            bs: if scheme.uses_backscatter() {
                backscatter_bits_per_time(params, gains)
            } else {
                0.0
            },
            h1_rate: params.eta * params.p1 * gains.h2,
            h2_rate: phase2_harvest_rate(params, gains),
        }
    }

    fn budget(&self, t: &[f64; 5]) -> f64 {
        self.h1_rate * t[0] + self.h2_rate * t[1]
    }

    fn r1(&self, t: &[f64; 5], tau41: f64) -> f64 {
        let direct = perspective(self.rho.rho13, t[0], t[2]);
        if !self.scheme.uses_relay() {
            return direct;
        }
        let to_relay = self.bs * t[1] + perspective(self.rho.rho12, t[0], t[2]);
        to_relay.min(direct + perspective(self.rho.rho2, tau41, t[3]))
    }

    fn split_value(&self, t: &[f64; 5], e: f64, tau41: f64) -> f64 {
        let r2 = perspective(self.rho.rho2, (e - tau41).max(0.0), t[4]);
        self.r1(t, tau41).min(r2)
    }

    /// Best common rate for times `t` and the relay energy attaining it.
    fn value(&self, t: &[f64; 5]) -> (f64, f64) {
        let e = self.budget(t);
        if !self.scheme.uses_relay() || t[3] <= 0.0 || e <= 0.0 {
            return (self.split_value(t, e, 0.0), 0.0);
        }
        let f = |x: f64| self.split_value(t, e, x);
        let x = golden_max(f, 0.0, e);
        let mut best = (f(0.0), 0.0);
        for cand in [x, e] {
            let v = f(cand);
            if v > best.0 {
                best = (v, cand);
            }
        }
        best
    }
}

/// Maximizer of a unimodal `f` on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        x1
    } else {
        x2
    }
}

/// Time slots of `scheme` in the order t1, t2, t3, t41, t42.
fn slots(scheme: SchemeKind) -> &'static [usize] {
    match scheme {
        SchemeKind::AbCoop => &[0, 1, 2, 3, 4],
        SchemeKind::ActiveCoop => &[0, 2, 3, 4],
        SchemeKind::NoCoop => &[0, 2, 4],
    }
}

/// Calls `visit` with every composition of `total` into `parts` nonnegative parts,
/// in lexicographic order.
fn compositions(total: u32, parts: usize, mut visit: impl FnMut(&[u32])) {
    if parts == 0 {
        return;
    }
    let mut k = vec![0u32; parts];
    k[parts - 1] = total;
    loop {
        visit(&k);
        // Next composition: move one unit from the last part leftwards.
        let last = parts - 1;
        let Some(i) = (0..last).rev().find(|&i| k[i + 1..].iter().any(|&v| v > 0)) else {
            return;
        };
        let rest: u32 = k[i + 1..].iter().sum();
        k[i] += 1;
        for v in &mut k[i + 1..] {
            *v = 0;
        }
        k[last] = rest - 1;
    }
}

fn grid_steps(usable: f64, delta: f64) -> u32 {
    let k = (usable / delta * (1.0 + 1e-12)).floor();
    k.max(0.0) as u32
}

/// Largest one-sided rate of improvement at `t` along moves that keep the
/// schedule feasible, and along spending the idle remainder.
fn local_slopes(inner: &Inner, t: &[f64; 5], scheme: SchemeKind) -> (f64, f64) {
    let base = inner.value(t).0;
    let idx = slots(scheme);
    let mut pair: f64 = 0.0;
    let mut single: f64 = 0.0;
    for &i in idx {
        let mut up = *t;
        up[i] += PROBE;
        single = single.max((inner.value(&up).0 - base) / PROBE);
        for &j in idx {
            if i == j || t[j] < PROBE {
                continue;
            }
            let mut mv = up;
            mv[j] -= PROBE;
            pair = pair.max((inner.value(&mv).0 - base) / PROBE);
        }
    }
    (pair, single)
}

/// Best allocation on the grid of step `delta` over the usable block.
///
/// `delta` outside `(0, 0.1]` is clamped into that range.
pub fn grid_solve(params: &SystemParams, gains: &ChannelGains, scheme: SchemeKind, delta: f64) -> GridResult {
    let delta = if delta.is_finite() && delta > 0.0 { delta.min(0.1) } else { 0.1 };
    let usable = params.usable_time().max(0.0);
    let inner = Inner::new(params, gains, scheme);
    let idx = slots(scheme);
    let steps = grid_steps(usable, delta);

    let mut best_t = [0.0; 5];
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut evaluated = 0u64;
    compositions(steps, idx.len(), |k| {
        let mut t = [0.0; 5];
        for (&slot, &ki) in idx.iter().zip(k) {
            t[slot] = f64::from(ki) * delta;
        }
        evaluated += 1;
        let v = inner.value(&t);
        if v.0 > best.0 {
            best = v;
            best_t = t;
        }
    });

    let alloc = TimeAllocation {
        t1: best_t[0],
        t2: best_t[1],
        t3: best_t[2],
        t41: best_t[3],
        t42: best_t[4],
    };
    let e = inner.budget(&best_t);
    let split = EnergySplit {
        tau41: best.1,
        tau42: e - best.1,
    };
    let (pair, single) = local_slopes(&inner, &best_t, scheme);
    let idle = (usable - f64::from(steps) * delta).max(0.0);
    let grid_bound = pair * delta * idx.len().div_ceil(2) as f64 + single * idle;

    let report = evaluate(params, gains, &alloc, &split, scheme)
        .expect("grid points satisfy every constraint by construction");
    GridResult {
        solution: Solution {
            scheme,
            alloc,
            split,
            powers: recover_powers(&alloc, &split, params, gains),
            report,
            status: Status::Optimal,
            diagnostics: Diagnostics::default(),
        },
        grid_bound,
        evaluated,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossRow {
    pub scheme: SchemeKind,
    pub v_solver: f64,
    pub v_grid: f64,
    pub grid_bound: f64,
    /// Largest accepted `|v_solver - v_grid|`.
    pub tolerance: f64,
    pub pass: bool,
}

impl CrossRow {
    /// Applies the acceptance rule `|V_s - V_g| <= max(rel_tol * V_g, bound_factor * grid_bound)`.
    pub fn judge(scheme: SchemeKind, v_solver: f64, v_grid: f64, grid_bound: f64, rel_tol: f64, bound_factor: f64) -> Self {
        let tolerance = (rel_tol * v_grid.abs()).max(bound_factor * grid_bound);
        Self {
            scheme,
            v_solver,
            v_grid,
            grid_bound,
            tolerance,
            pass: (v_solver - v_grid).abs() <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossReport {
    pub rows: Vec<CrossRow>,
    pub pass: bool,
}

/// Solver against grid for every scheme, with explicit tolerances.
pub fn cross_validate_with(
    params: &SystemParams,
    gains: &ChannelGains,
    opts: &SolverOptions,
    delta: f64,
    rel_tol: f64,
    bound_factor: f64,
) -> Result<CrossReport> {
    let mut rows = Vec::with_capacity(SchemeKind::ALL.len());
    for scheme in SchemeKind::ALL {
        let s = solve(params, gains, scheme, opts)?;
        let g = grid_solve(params, gains, scheme, delta);
        rows.push(CrossRow::judge(
            scheme,
            s.objective(),
            g.solution.objective(),
            g.grid_bound,
            rel_tol,
            bound_factor,
        ));
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(CrossReport { rows, pass })
}

pub fn cross_validate(params: &SystemParams, gains: &ChannelGains, opts: &SolverOptions, delta: f64) -> Result<CrossReport> {
    cross_validate_with(params, gains, opts, delta, DEFAULT_REL_TOL, 1.0)
}
