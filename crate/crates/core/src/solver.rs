//! Max-min throughput solver.
//!
//! The common rate R is found by bisection over `[0, upper bound]`. Each
//! candidate R is tested by a phase-1 problem
//!
//! ```text
//! minimize s  subject to  (R - rate_k(x)) / S <= s   for every rate bound k
//!                         t0 + sum(t) <= 1,  sum(tau) <= E2(t),  x >= 0
//! ```
//!
//! solved with a log-barrier Newton method. A strictly negative `s` is a
//! feasibility witness; a barrier lower bound `s - m/t > 0` certifies
//! infeasibility. Energies are rescaled to the per-unit-time harvest so every
//! variable is of order one.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::backscatter_bits_per_time;
use crate::model::{
    active_power_p3, energy_budget, phase2_harvest_rate, ChannelGains, EnergySplit, SystemParams,
    TimeAllocation,
};
use crate::rates::{evaluate, ConstantsRho, RateReport, SchemeKind};

pub use crate::rates::PowerAllocation;

/// Newton decrement at which a centering step stops.
const NEWTON_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative width of the final bisection bracket on the common rate.
    pub bisect_tol: f64,
    /// Largest constraint violation accepted in a returned solution.
    pub feas_tol: f64,
    /// Initial barrier weight.
    pub barrier_mu0: f64,
    /// Barrier weight reduction factor per outer iteration.
    pub barrier_shrink: f64,
    /// Newton iterations allowed per centering step.
    pub newton_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            bisect_tol: 1e-6,
            feas_tol: 1e-9,
            barrier_mu0: 1.0,
            barrier_shrink: 0.1,
            newton_max_iter: 200,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, value, reason| Err(Error::InvalidParam { field, value, reason });
        if !(self.bisect_tol > 0.0) {
            return bad("bisect_tol", self.bisect_tol, "must be > 0");
        }
        if !(self.feas_tol > 0.0) {
            return bad("feas_tol", self.feas_tol, "must be > 0");
        }
        if !(self.barrier_mu0 > 0.0 && self.barrier_mu0.is_finite()) {
            return bad("barrier_mu0", self.barrier_mu0, "must be finite and > 0");
        }
        if !(self.barrier_shrink > 0.0 && self.barrier_shrink < 1.0) {
            return bad("barrier_shrink", self.barrier_shrink, "must lie in (0, 1)");
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter", 0.0, "must be >= 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Degenerate,
    Infeasible,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Degenerate => "degenerate",
            Self::Infeasible => "infeasible",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bisection_steps: usize,
    pub newton_iterations: usize,
    /// Certified upper bound on the optimal common rate.
    pub upper_bound: f64,
    /// `(upper_bound - objective) / objective`.
    pub final_gap: f64,
    /// Phase-1 queries that ended without a witness or a certificate.
    pub unresolved_queries: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub scheme: SchemeKind,
    pub alloc: TimeAllocation,
    pub split: EnergySplit,
    pub powers: PowerAllocation,
    pub report: RateReport,
    pub status: Status,
    pub diagnostics: Diagnostics,
}

impl Solution {
    pub fn objective(&self) -> f64 {
        self.report.objective
    }

    fn zero(params: &SystemParams, gains: &ChannelGains, scheme: SchemeKind, status: Status) -> Self {
        let alloc = TimeAllocation::default();
        let split = EnergySplit::default();
        let report = if status == Status::Infeasible {
            zero_report()
        } else {
            evaluate(params, gains, &alloc, &split, scheme).unwrap_or_else(|_| zero_report())
        };
        Self {
            scheme,
            alloc,
            split,
            powers: PowerAllocation::default(),
            report,
            status,
            diagnostics: Diagnostics::default(),
        }
    }
}

fn zero_report() -> RateReport {
    RateReport {
        r1_bs: 0.0,
        r1_to_wd2: 0.0,
        r1_to_hap: 0.0,
        r1_relayed: 0.0,
        r1: 0.0,
        r2: 0.0,
        objective: 0.0,
        stranded_energy: false,
    }
}

/// Upper bound on `max_{theta in [0,1]} (1 - theta) log2(1 + k theta / (1 - theta))`.
///
/// Golden-section search brackets the maximizer of this concave function;
/// the tangent at the left bracket end then bounds the maximum.
fn perspective_line_bound(k: f64) -> f64 {
    if k <= 0.0 {
        return 0.0;
    }
    let value = |th: f64| crate::rates::perspective(k, th, 1.0 - th);
    let slope = |th: f64| {
        let u = k * th / (1.0 - th);
        (k / (1.0 + u) - u.ln_1p() + u / (1.0 + u)) * std::f64::consts::LOG2_E
    };
    let (mut a, mut b) = (0.0, 1.0);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (value(x1), value(x2));
    for _ in 0..200 {
        if b - a < 1e-12 {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = value(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = value(x1);
        }
    }
    let tangent = value(a) + slope(a).max(0.0) * (b - a);
    tangent.max(f1).max(f2)
}

/// Harvest rate per unit time at WD2 in its better charging phase (J).
fn best_harvest_rate(params: &SystemParams, gains: &ChannelGains) -> f64 {
    (params.eta * params.p1 * gains.h2).max(phase2_harvest_rate(params, gains))
}

/// A finite bound on the optimal common rate of `scheme`.
///
/// Each user is granted the whole usable block and the largest possible
/// harvest; the bound is the smaller of the two single-user rates.
pub fn objective_upper_bound_for(params: &SystemParams, gains: &ChannelGains, scheme: SchemeKind) -> f64 {
    let l = params.usable_time();
    if l <= 0.0 {
        return 0.0;
    }
    let c = ConstantsRho::new(params, gains);
    let harvest = best_harvest_rate(params, gains);
    let r2 = l * perspective_line_bound(c.rho2 * harvest);
    let direct = l * perspective_line_bound(c.rho13);
    let r1 = match scheme {
        SchemeKind::NoCoop => direct,
        SchemeKind::AbCoop | SchemeKind::ActiveCoop => {
            let backscatter = if scheme.uses_backscatter() {
                backscatter_bits_per_time(params, gains) * l
            } else {
                0.0
            };
            let to_relay = backscatter + l * perspective_line_bound(c.rho12);
            let relay = l * (c.rho2 * harvest).ln_1p() * std::f64::consts::LOG2_E;
            to_relay.min(direct + relay)
        }
    };
    r1.min(r2)
}

/// Bound valid for every scheme.
pub fn objective_upper_bound(params: &SystemParams, gains: &ChannelGains) -> f64 {
    SchemeKind::ALL
        .iter()
        .map(|&s| objective_upper_bound_for(params, gains, s))
        .fold(0.0, f64::max)
}

pub fn recover_powers(alloc: &TimeAllocation, split: &EnergySplit, params: &SystemParams, gains: &ChannelGains) -> PowerAllocation {
    let per_time = |tau: f64, t: f64| if t > 0.0 { (tau / t, false) } else { (0.0, tau > 0.0) };
    let (p41, s41) = per_time(split.tau41, alloc.t41);
    let (p42, s42) = per_time(split.tau42, alloc.t42);
    let p3 = active_power_p3(params, gains, alloc.t1.max(0.0), alloc.t3.max(0.0))
        .map(|p| p.watts)
        .unwrap_or(0.0);
    PowerAllocation {
        p3,
        p41,
        p42,
        stranded: s41 || s42,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    T1,
    T2,
    T3,
    T41,
    T42,
    E41,
    E42,
}

const ALL_VARS: [Var; 7] = [Var::T1, Var::T2, Var::T3, Var::T41, Var::T42, Var::E41, Var::E42];

impl Var {
    fn is_time(self) -> bool {
        !matches!(self, Var::E41 | Var::E42)
    }
}

/// `a * x / t` perspective term referring to variable slots.
#[derive(Clone, Copy, Debug)]
struct Persp {
    a: f64,
    x: usize,
    t: usize,
}

impl Persp {
    fn value(&self, z: &[f64]) -> f64 {
        crate::rates::perspective(self.a, z[self.x], z[self.t])
    }

    /// Adds `w * grad` and `w * hess` of this term.
    fn accumulate(&self, z: &[f64], w: f64, grad: &mut [f64], hess: &mut DMatrix<f64>) {
        let (x, t) = (z[self.x], z[self.t]);
        let u = self.a * x / t;
        let l2 = std::f64::consts::LOG2_E;
        grad[self.x] += w * self.a / (1.0 + u) * l2;
        grad[self.t] += w * (u.ln_1p() - u / (1.0 + u)) * l2;
        let c = -w * l2 / (t * (1.0 + u) * (1.0 + u));
        hess[(self.x, self.x)] += c * self.a * self.a;
        hess[(self.t, self.t)] += c * u * u;
        hess[(self.x, self.t)] -= c * self.a * u;
        hess[(self.t, self.x)] -= c * self.a * u;
    }

    fn grad_into(&self, z: &[f64], out: &mut [f64]) {
        let (x, t) = (z[self.x], z[self.t]);
        let u = self.a * x / t;
        let l2 = std::f64::consts::LOG2_E;
        out[self.x] += self.a / (1.0 + u) * l2;
        out[self.t] += (u.ln_1p() - u / (1.0 + u)) * l2;
    }
}

/// A concave rate: linear part plus perspective terms.
#[derive(Clone, Debug)]
struct RateExpr {
    linear: Vec<(usize, f64)>,
    terms: Vec<Persp>,
}

impl RateExpr {
    fn value(&self, z: &[f64]) -> f64 {
        self.linear.iter().map(|&(i, c)| c * z[i]).sum::<f64>()
            + self.terms.iter().map(|p| p.value(z)).sum::<f64>()
    }
}

/// The scheme-specific program in scaled variables.
struct Program {
    slots: Vec<Var>,
    /// Slot of the phase-1 slack.
    s: usize,
    usable: f64,
    /// Budget in units of `escale`: sum over slots of coefficient * time.
    budget: Vec<(usize, f64)>,
    energies: Vec<usize>,
    times: Vec<usize>,
    rates: Vec<RateExpr>,
    escale: f64,
}

impl Program {
    fn new(params: &SystemParams, gains: &ChannelGains, scheme: SchemeKind) -> Self {
        let slots: Vec<Var> = ALL_VARS
            .into_iter()
            .filter(|v| match scheme {
                SchemeKind::AbCoop => true,
                SchemeKind::ActiveCoop => *v != Var::T2,
                SchemeKind::NoCoop => !matches!(v, Var::T2 | Var::T41 | Var::E41),
            })
            .collect();
        let idx = |v: Var| slots.iter().position(|&w| w == v);
        let escale = best_harvest_rate(params, gains);
        let c = ConstantsRho::new(params, gains);
        let a2 = c.rho2 * escale;

        let mut budget = vec![(idx(Var::T1).unwrap(), params.eta * params.p1 * gains.h2 / escale)];
        if let Some(i) = idx(Var::T2) {
            budget.push((i, phase2_harvest_rate(params, gains) / escale));
        }
        let (t1, t3) = (idx(Var::T1).unwrap(), idx(Var::T3).unwrap());
        let own = RateExpr {
            linear: vec![],
            terms: vec![Persp {
                a: a2,
                x: idx(Var::E42).unwrap(),
                t: idx(Var::T42).unwrap(),
            }],
        };
        let direct = Persp { a: c.rho13, x: t1, t: t3 };
        let mut rates = Vec::new();
        match scheme {
            SchemeKind::NoCoop => rates.push(RateExpr {
                linear: vec![],
                terms: vec![direct],
            }),
            SchemeKind::AbCoop | SchemeKind::ActiveCoop => {
                let mut to_relay = RateExpr {
                    linear: vec![],
                    terms: vec![Persp { a: c.rho12, x: t1, t: t3 }],
                };
                if let Some(i) = idx(Var::T2) {
                    to_relay.linear.push((i, backscatter_bits_per_time(params, gains)));
                }
                rates.push(to_relay);
                rates.push(RateExpr {
                    linear: vec![],
                    terms: vec![
                        direct,
                        Persp {
                            a: a2,
                            x: idx(Var::E41).unwrap(),
                            t: idx(Var::T41).unwrap(),
                        },
                    ],
                });
            }
        }
        rates.push(own);

        let energies = (0..slots.len()).filter(|&i| !slots[i].is_time()).collect();
        let times = (0..slots.len()).filter(|&i| slots[i].is_time()).collect();
        Self {
            s: slots.len(),
            slots,
            usable: params.usable_time(),
            budget,
            energies,
            times,
            rates,
            escale,
        }
    }

    fn dim(&self) -> usize {
        self.slots.len() + 1
    }

    /// Barrier terms: nonnegativity, time, energy and one per rate bound.
    fn barrier_terms(&self) -> usize {
        self.slots.len() + 2 + self.rates.len()
    }

    fn time_slack(&self, z: &[f64]) -> f64 {
        self.usable - self.times.iter().map(|&i| z[i]).sum::<f64>()
    }

    fn energy_slack(&self, z: &[f64]) -> f64 {
        self.budget.iter().map(|&(i, c)| c * z[i]).sum::<f64>()
            - self.energies.iter().map(|&i| z[i]).sum::<f64>()
    }

    /// Barrier argument of rate bound k at level `r` with normalization `scale`.
    fn rate_slack(&self, k: usize, z: &[f64], r: f64, scale: f64) -> f64 {
        z[self.s] - (r - self.rates[k].value(z)) / scale
    }

    /// `t * s + barrier`, or `None` outside the open domain.
    fn merit(&self, z: &[f64], weight: f64, r: f64, scale: f64) -> Option<f64> {
        let mut phi = 0.0;
        for &v in &z[..self.s] {
            if !(v > 0.0) {
                return None;
            }
            phi -= v.ln();
        }
        for arg in [self.time_slack(z), self.energy_slack(z)]
            .into_iter()
            .chain((0..self.rates.len()).map(|k| self.rate_slack(k, z, r, scale)))
        {
            if !(arg > 0.0) {
                return None;
            }
            phi -= arg.ln();
        }
        let m = weight * z[self.s] + phi;
        m.is_finite().then_some(m)
    }

    fn gradient_hessian(&self, z: &[f64], weight: f64, r: f64, scale: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut g = vec![0.0; n];
        let mut h = DMatrix::<f64>::zeros(n, n);
        g[self.s] += weight;

        for i in 0..self.s {
            g[i] -= 1.0 / z[i];
            h[(i, i)] += 1.0 / (z[i] * z[i]);
        }

        // Linear constraints q(z) = c.z + c0 > 0: grad -c/q, hess c c^T / q^2.
        let mut add_linear = |coef: &[(usize, f64)], q: f64| {
            for &(i, ci) in coef {
                g[i] -= ci / q;
                for &(j, cj) in coef {
                    h[(i, j)] += ci * cj / (q * q);
                }
            }
        };
        let time_coef: Vec<(usize, f64)> = self.times.iter().map(|&i| (i, -1.0)).collect();
        add_linear(&time_coef, self.time_slack(z));
        let mut energy_coef = self.budget.clone();
        energy_coef.extend(self.energies.iter().map(|&i| (i, -1.0)));
        add_linear(&energy_coef, self.energy_slack(z));

        // Rate bounds q = s - (r - rate)/scale, concave in z.
        for (k, rate) in self.rates.iter().enumerate() {
            let q = self.rate_slack(k, z, r, scale);
            let mut dq = vec![0.0; n];
            dq[self.s] = 1.0;
            for &(i, c) in &rate.linear {
                dq[i] += c / scale;
            }
            let mut dr = vec![0.0; n];
            for p in &rate.terms {
                p.grad_into(z, &mut dr);
            }
            for i in 0..n {
                dq[i] += dr[i] / scale;
            }
            for i in 0..n {
                g[i] -= dq[i] / q;
                for j in 0..n {
                    h[(i, j)] += dq[i] * dq[j] / (q * q);
                }
            }
            // -hess(q)/q, with hess(q) = hess(rate)/scale
            let mut dummy = vec![0.0; n];
            for p in &rate.terms {
                p.accumulate(z, -1.0 / (scale * q), &mut dummy, &mut h);
            }
        }
        (DVector::from_vec(g), h)
    }

    /// Interior starting point with slack variable above every rate gap.
    fn start(&self, r: f64, scale: f64) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        let share = self.usable / (self.times.len() + 1) as f64;
        for &i in &self.times {
            z[i] = share;
        }
        let budget: f64 = self.budget.iter().map(|&(i, c)| c * z[i]).sum();
        for &i in &self.energies {
            z[i] = budget / (self.energies.len() + 1) as f64;
        }
        let worst = (0..self.rates.len())
            .map(|k| (r - self.rates[k].value(&z)) / scale)
            .fold(f64::NEG_INFINITY, f64::max);
        z[self.s] = worst + 1.0;
        z
    }

    fn to_schedule(&self, z: &[f64]) -> (TimeAllocation, EnergySplit) {
        let mut a = TimeAllocation::default();
        let mut e = EnergySplit::default();
        for (i, v) in self.slots.iter().enumerate() {
            let x = z[i];
            match v {
                Var::T1 => a.t1 = x,
                Var::T2 => a.t2 = x,
                Var::T3 => a.t3 = x,
                Var::T41 => a.t41 = x,
                Var::T42 => a.t42 = x,
                Var::E41 => e.tau41 = x * self.escale,
                Var::E42 => e.tau42 = x * self.escale,
            }
        }
        (a, e)
    }
}

enum Query {
    Feasible(Vec<f64>),
    Infeasible,
    /// Barrier gap shrank below resolution without a sign decision.
    Unresolved,
    NotConverged,
}

struct Phase1<'a> {
    prog: &'a Program,
    opts: &'a SolverOptions,
    scale: f64,
    newton_iterations: usize,
}

impl Phase1<'_> {
    fn query(&mut self, r: f64) -> Query {
        let prog = self.prog;
        let mut z = prog.start(r, self.scale);
        let m = prog.barrier_terms() as f64;
        let mut weight = 1.0 / self.opts.barrier_mu0;
        // Phase-1 optimum resolution needed to separate r from r(1 + bisect_tol).
        let resolution = (1e-3 * self.opts.bisect_tol * r / self.scale).max(1e-15);
        loop {
            let mut converged = false;
            for _ in 0..self.opts.newton_max_iter {
                if z[prog.s] < 0.0 {
                    return Query::Feasible(z);
                }
                self.newton_iterations += 1;
                let (g, h) = prog.gradient_hessian(&z, weight, r, self.scale);
                let Some(step) = newton_direction(&g, &h) else {
                    return Query::NotConverged;
                };
                let decrement = -g.dot(&step);
                // Below this the merit change is lost in rounding.
                if decrement / 2.0 <= NEWTON_TOL {
                    converged = true;
                    break;
                }
                let f0 = prog.merit(&z, weight, r, self.scale).unwrap_or(f64::INFINITY);
                let mut alpha = 1.0;
                let mut accepted = false;
                let mut stalled = false;
                for _ in 0..60 {
                    let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                    if let Some(f1) = prog.merit(&trial, weight, r, self.scale) {
                        if f1 <= f0 - 0.25 * alpha * decrement {
                            stalled = f0 - f1 <= 1e-15 * f0.abs();
                            z = trial;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted || stalled {
                    // No progress at machine precision: treat the point as centered.
                    converged = true;
                    break;
                }
            }
            if z[prog.s] < 0.0 {
                return Query::Feasible(z);
            }
            if !converged {
                return Query::NotConverged;
            }
            let gap = m / weight;
            if z[prog.s] - gap > 0.0 {
                return Query::Infeasible;
            }
            if gap < resolution {
                return Query::Unresolved;
            }
            weight /= self.opts.barrier_shrink;
        }
    }
}

/// Solves `h d = -g` with Jacobi scaling and Cholesky, falling back to LU.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let d = DVector::from_iterator(n, (0..n).map(|i| 1.0 / h[(i, i)].max(f64::MIN_POSITIVE).sqrt()));
    let scaled = DMatrix::from_fn(n, n, |i, j| h[(i, j)] * d[i] * d[j]);
    let rhs = -g.component_mul(&d);
    let y = match scaled.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => scaled.lu().solve(&rhs)?,
    };
    let step = y.component_mul(&d);
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Raises both energies proportionally until the budget is exhausted.
fn spend_budget(params: &SystemParams, gains: &ChannelGains, alloc: &TimeAllocation, split: &EnergySplit) -> EnergySplit {
    let Ok(budget) = energy_budget(params, gains, alloc) else {
        return *split;
    };
    let used = split.total();
    if budget <= used {
        return *split;
    }
    if used > 0.0 {
        let k = budget / used;
        EnergySplit {
            tau41: split.tau41 * k,
            tau42: split.tau42 * k,
        }
    } else {
        EnergySplit {
            tau41: 0.0,
            tau42: budget,
        }
    }
}

/// Maximizes the common throughput of `scheme`.
pub fn solve(params: &SystemParams, gains: &ChannelGains, scheme: SchemeKind, opts: &SolverOptions) -> Result<Solution> {
    if params.t0 >= 1.0 {
        return Ok(Solution::zero(params, gains, scheme, Status::Infeasible));
    }
    params.validate()?;
    opts.validate()?;

    let ub = objective_upper_bound_for(params, gains, scheme);
    let mut best = Solution::zero(params, gains, scheme, Status::Optimal);
    if !(ub > 0.0) {
        best.diagnostics.upper_bound = 0.0;
        return Ok(best);
    }

    let prog = Program::new(params, gains, scheme);
    let mut phase1 = Phase1 {
        prog: &prog,
        opts,
        scale: ub,
        newton_iterations: 0,
    };
    let (mut lo, mut hi) = (0.0_f64, ub);
    let mut steps = 0;
    let mut unresolved = 0;
    let mut failed = false;
    while steps < 200 && (lo == 0.0 || hi - lo > opts.bisect_tol * lo) {
        if lo == 0.0 && hi <= 1e-12 * ub {
            break;
        }
        steps += 1;
        let mid = 0.5 * (lo + hi);
        match phase1.query(mid) {
            Query::Feasible(z) => {
                let (alloc, split) = prog.to_schedule(&z);
                let Ok(report) = evaluate(params, gains, &alloc, &split, scheme) else {
                    hi = mid;
                    failed = true;
                    continue;
                };
                if report.objective > lo {
                    lo = report.objective;
                    best.alloc = alloc;
                    best.split = split;
                    best.report = report;
                }
                hi = hi.max(lo);
            }
            Query::Infeasible => hi = mid,
            Query::Unresolved => {
                unresolved += 1;
                hi = mid;
            }
            Query::NotConverged => {
                failed = true;
                hi = mid;
            }
        }
    }

    let split = spend_budget(params, gains, &best.alloc, &best.split);
    if let Ok(report) = evaluate(params, gains, &best.alloc, &split, scheme) {
        if report.objective >= best.report.objective {
            best.split = split;
            best.report = report;
        }
    }
    best.powers = recover_powers(&best.alloc, &best.split, params, gains);
    let objective = best.report.objective;
    best.status = if failed || objective <= 0.0 || hi - objective > opts.bisect_tol * objective {
        Status::Degenerate
    } else {
        Status::Optimal
    };
    best.diagnostics = Diagnostics {
        bisection_steps: steps,
        newton_iterations: phase1.newton_iterations,
        upper_bound: hi.max(objective),
        final_gap: if objective > 0.0 { (hi - objective).max(0.0) / objective } else { f64::INFINITY },
        unresolved_queries: unresolved,
    };
    Ok(best)
}

pub fn solve_all_schemes(params: &SystemParams, gains: &ChannelGains, opts: &SolverOptions) -> Result<BTreeMap<SchemeKind, Solution>> {
    SchemeKind::ALL
        .iter()
        .map(|&s| solve(params, gains, s, opts).map(|sol| (s, sol)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gains_from_geometry, Geometry};
    use crate::rates::{evaluate_physical, feasible};

    fn instance(d1: f64, d2: f64) -> (SystemParams, ChannelGains) {
        let p = SystemParams::default();
        let g = gains_from_geometry(&Geometry::collinear(d1, d2).unwrap(), &p).unwrap();
        (p, g)
    }

    // Values from an independent exponential-cone solve of the same
    // program (cvxpy + Clarabel), default parameters, d2 = 3.
    #[test]
    fn matches_conic_reference() {
        let cases = [
            (6.0, SchemeKind::AbCoop, 2.006_781_75),
            (6.0, SchemeKind::ActiveCoop, 1.650_880_24),
            (6.0, SchemeKind::NoCoop, 1.308_447_91),
            (9.0, SchemeKind::AbCoop, 1.982_495_37),
            (9.0, SchemeKind::ActiveCoop, 0.913_015_94),
            (9.0, SchemeKind::NoCoop, 0.647_548_5),
        ];
        for (d1, scheme, want) in cases {
            let (p, g) = instance(d1, 3.0);
            let sol = solve(&p, &g, scheme, &SolverOptions::default()).unwrap();
            assert_eq!(sol.status, Status::Optimal, "{scheme} at d1={d1}");
            let got = sol.objective();
            assert!(((got - want) / want).abs() < 1e-5, "{scheme} d1={d1}: {got} vs {want}");
        }
    }

    #[test]
    fn solution_is_feasible_and_certified() {
        let opts = SolverOptions::default();
        for (d1, d2) in [(6.0, 3.0), (8.0, 2.0), (10.0, 5.0)] {
            let (p, g) = instance(d1, d2);
            for scheme in SchemeKind::ALL {
                let sol = solve(&p, &g, scheme, &opts).unwrap();
                assert!(feasible(&p, &g, &sol.alloc, &sol.split).is_feasible(opts.feas_tol));
                let obj = sol.objective();
                assert!(sol.diagnostics.upper_bound >= obj);
                assert!(sol.diagnostics.upper_bound <= obj * (1.0 + opts.bisect_tol));
                let budget = energy_budget(&p, &g, &sol.alloc).unwrap();
                assert!((budget - sol.split.total()).abs() <= opts.feas_tol * budget);
            }
        }
    }

    #[test]
    fn dead_links_give_zero() {
        let (p, mut g) = instance(9.0, 3.0);
        g.h1 = 0.0;
        for scheme in SchemeKind::ALL {
            let sol = solve(&p, &g, scheme, &SolverOptions::default()).unwrap();
            assert_eq!(sol.objective(), 0.0);
            assert!(feasible(&p, &g, &sol.alloc, &sol.split).is_feasible(1e-9));
        }
        let dead = ChannelGains::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(objective_upper_bound(&p, &dead), 0.0);
        let all = solve_all_schemes(&p, &dead, &SolverOptions::default()).unwrap();
        assert!(all.values().all(|s| s.objective() == 0.0));
    }

    #[test]
    fn channel_estimation_overrun_is_infeasible() {
        let (mut p, g) = instance(9.0, 3.0);
        p.t0 = 1.0;
        let sol = solve(&p, &g, SchemeKind::AbCoop, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
    }

    #[test]
    fn upper_bound_dominates_and_grows_with_power() {
        let (p, g) = instance(9.0, 3.0);
        let ub = objective_upper_bound(&p, &g);
        let all = solve_all_schemes(&p, &g, &SolverOptions::default()).unwrap();
        assert!(all.values().all(|s| s.objective() <= ub));
        let mut prev = 0.0;
        for p1 in [0.1, 0.5, 1.0, 3.0, 10.0] {
            let q = SystemParams { p1, ..p.clone() };
            let u = objective_upper_bound(&q, &g);
            assert!(u >= prev);
            prev = u;
        }
    }

    #[test]
    fn more_power_never_hurts() {
        let (p, g) = instance(8.0, 3.0);
        let q = SystemParams { p1: 10.0, ..p.clone() };
        for scheme in SchemeKind::ALL {
            let a = solve(&p, &g, scheme, &SolverOptions::default()).unwrap().objective();
            let b = solve(&q, &g, scheme, &SolverOptions::default()).unwrap().objective();
            assert!(b >= a);
        }
    }

    #[test]
    fn no_reflection_ties_cooperation_schemes() {
        let p = SystemParams {
            mu: 0.0,
            ..Default::default()
        };
        let g = ChannelGains::new(1.68e-5, 1.5e-4, 1.68e-5).unwrap();
        let opts = SolverOptions::default();
        let ab = solve(&p, &g, SchemeKind::AbCoop, &opts).unwrap().objective();
        let act = solve(&p, &g, SchemeKind::ActiveCoop, &opts).unwrap().objective();
        assert!(((ab - act) / act).abs() < 2.0 * opts.bisect_tol);
    }

    #[test]
    fn powers_round_trip() {
        let (p, g) = instance(9.0, 3.0);
        let sol = solve(&p, &g, SchemeKind::AbCoop, &SolverOptions::default()).unwrap();
        let r = evaluate_physical(&p, &g, &sol.alloc, &sol.powers, SchemeKind::AbCoop).unwrap();
        for (x, y) in [
            (r.r1_to_wd2, sol.report.r1_to_wd2),
            (r.r1_to_hap, sol.report.r1_to_hap),
            (r.r1_relayed, sol.report.r1_relayed),
            (r.r2, sol.report.r2),
            (r.objective, sol.report.objective),
        ] {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn recover_powers_examples() {
        let p = SystemParams::default();
        let g = ChannelGains::new(1e-5, 1e-4, 1e-4).unwrap();
        let a = TimeAllocation {
            t41: 0.1,
            ..Default::default()
        };
        let s = EnergySplit {
            tau41: 0.02,
            tau42: 0.0,
        };
        let pw = recover_powers(&a, &s, &p, &g);
        assert!((pw.p41 - 0.2).abs() < 1e-15);
        assert_eq!(pw.p42, 0.0);
        assert!(!pw.stranded);
        let pw = recover_powers(&TimeAllocation::default(), &EnergySplit::default(), &p, &g);
        assert_eq!((pw.p3, pw.p41, pw.p42), (0.0, 0.0, 0.0));
        let pw = recover_powers(&TimeAllocation::default(), &s, &p, &g);
        assert!(pw.stranded);
    }

    #[test]
    fn deterministic() {
        let (p, g) = instance(7.3, 2.4);
        let a = solve(&p, &g, SchemeKind::AbCoop, &SolverOptions::default()).unwrap();
        let b = solve(&p, &g, SchemeKind::AbCoop, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn line_bound_is_an_upper_bound() {
        for k in [0.0, 0.1, 1.0, 7.5, 300.0, 1e6] {
            let b = perspective_line_bound(k);
            let brute = (0..=100_000)
                .map(|i| {
                    let th = f64::from(i) / 100_000.0;
                    crate::rates::perspective(k, th, 1.0 - th)
                })
                .fold(0.0, f64::max);
            assert!(b >= brute, "k={k}: {b} < {brute}");
            assert!(b <= brute * (1.0 + 1e-6) + 1e-12);
        }
    }
}
