//! Achievable rates of the four-phase schedule.
//!
//! Every Shannon-type rate has the perspective form `t log2(1 + a x / t)`
//! where `x` is either harvested-energy time (`t1`) or a spent energy
//! (`tau`). The form is jointly concave in `(t, x)` and is extended by its
//! limit 0 at `t = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, Error, Result};
use crate::link::backscatter_bits_per_time;
use crate::model::{
    phase2_harvest_rate, ChannelGains, EnergySplit, SystemParams, TimeAllocation, ENERGY_SLACK,
    TIME_SLACK,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Backscatter plus active exchange from WD1 to WD2, then relaying.
    AbCoop,
    /// Active exchange only (no backscatter phase).
    ActiveCoop,
    /// Independent transmission: WD1 reaches the HAP directly, no relaying.
    NoCoop,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [Self::AbCoop, Self::ActiveCoop, Self::NoCoop];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AbCoop => "ab_coop",
            Self::ActiveCoop => "active_coop",
            Self::NoCoop => "no_coop",
        }
    }

    pub fn uses_backscatter(self) -> bool {
        self == Self::AbCoop
    }

    pub fn uses_relay(self) -> bool {
        self != Self::NoCoop
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScheme(pub String);

impl fmt::Display for UnknownScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown scheme `{}` (expected ab_coop, active_coop or no_coop)",
            self.0
        )
    }
}

impl std::error::Error for UnknownScheme {}

impl FromStr for SchemeKind {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ab_coop" => Ok(Self::AbCoop),
            "active_coop" => Ok(Self::ActiveCoop),
            "no_coop" => Ok(Self::NoCoop),
            other => Err(UnknownScheme(other.to_string())),
        }
    }
}

/// SNR constants of the perspective rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRho {
    /// WD1 to WD2 in phase 3, per unit of `t1/t3`.
    pub rho12: f64,
    /// WD1 to HAP in phase 3, per unit of `t1/t3`.
    pub rho13: f64,
    /// WD2 to HAP in phase 4, per unit of `tau/t`.
    pub rho2: f64,
}

impl ConstantsRho {
    pub fn new(params: &SystemParams, gains: &ChannelGains) -> Self {
        let k = params.eta * params.p1 / params.n0;
        Self {
            rho12: gains.h1 * gains.h12 * k,
            rho13: gains.h1 * gains.h1 * k,
            rho2: gains.h2 / params.n0,
        }
    }
}

/// `t log2(1 + a x / t)`, with value 0 at `t = 0`.
#[inline]
pub(crate) fn perspective(a: f64, x: f64, t: f64) -> f64 {
    if t <= 0.0 || x <= 0.0 || a <= 0.0 {
        return 0.0;
    }
    t * (a * x / t).ln_1p() * std::f64::consts::LOG2_E
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveRate {
    pub bits: f64,
    /// Energy was assigned to a phase of zero length and is lost.
    pub stranded: bool,
}

/// Bits WD1 delivers to WD2 in phase 3.
pub fn rate_r12(consts: &ConstantsRho, t1: f64, t3: f64) -> f64 {
    perspective(consts.rho12, t1, t3)
}

/// Bits of WD1 overheard by the HAP in phase 3.
pub fn rate_r13(consts: &ConstantsRho, t1: f64, t3: f64) -> f64 {
    perspective(consts.rho13, t1, t3)
}

/// Bits of WD1's message relayed by WD2 with energy `tau41` over `t41`.
pub fn rate_relay(consts: &ConstantsRho, t41: f64, tau41: f64) -> PerspectiveRate {
    PerspectiveRate {
        bits: perspective(consts.rho2, tau41, t41),
        stranded: t41 <= 0.0 && tau41 > 0.0,
    }
}

/// Bits of WD2's own message sent with energy `tau42` over `t42`.
pub fn rate_wd2(consts: &ConstantsRho, t42: f64, tau42: f64) -> PerspectiveRate {
    PerspectiveRate {
        bits: perspective(consts.rho2, tau42, t42),
        stranded: t42 <= 0.0 && tau42 > 0.0,
    }
}

/// WD1 end-to-end rate: the weaker of the WD2 decoding bound and the HAP
/// decoding bound. Without cooperation only the direct link counts.
pub fn compose_r1(scheme: SchemeKind, r1_bs: f64, r12: f64, r13: f64, r14: f64) -> f64 {
    match scheme {
        SchemeKind::AbCoop => (r1_bs + r12).min(r13 + r14),
        SchemeKind::ActiveCoop => r12.min(r13 + r14),
        SchemeKind::NoCoop => r13,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Backscatter bits WD1 to WD2 (phase 2).
    pub r1_bs: f64,
    /// Active bits WD1 to WD2 (phase 3).
    pub r1_to_wd2: f64,
    /// Bits of WD1 overheard at the HAP (phase 3).
    pub r1_to_hap: f64,
    /// Bits of WD1 relayed by WD2 (phase 4, first part).
    pub r1_relayed: f64,
    pub r1: f64,
    pub r2: f64,
    pub objective: f64,
    /// Energy was assigned to a zero-length phase.
    pub stranded_energy: bool,
}

impl RateReport {
    fn assemble(scheme: SchemeKind, r1_bs: f64, r12: f64, r13: f64, relay: PerspectiveRate, own: PerspectiveRate) -> Self {
        let r1 = compose_r1(scheme, r1_bs, r12, r13, relay.bits);
        Self {
            r1_bs,
            r1_to_wd2: r12,
            r1_to_hap: r13,
            r1_relayed: relay.bits,
            r1,
            r2: own.bits,
            objective: r1.min(own.bits),
            stranded_energy: relay.stranded || own.stranded,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constraint {
    pub name: &'static str,
    /// Signed slack in the constraint's own unit; negative means violated.
    pub slack: f64,
    /// Multiplies the feasibility tolerance (1 for times, the budget for energies).
    pub scale: f64,
    /// Absolute allowance added to the scaled tolerance.
    pub floor: f64,
}

/// Signed slacks of every constraint of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violations {
    pub constraints: Vec<Constraint>,
}

impl Violations {
    pub const DEFAULT_TOL: f64 = 1e-9;

    /// Times need slack >= -tol; energies need slack >= -(tol * budget + 1e-15).
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.constraints
            .iter()
            .all(|c| c.slack >= -(tol * c.scale + c.floor))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.constraints.iter().find(|c| c.name == name).map(|c| c.slack)
    }

    pub fn worst(&self) -> Option<&Constraint> {
        self.constraints
            .iter()
            .min_by(|a, b| a.slack.total_cmp(&b.slack))
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in self.constraints.iter().filter(|c| c.slack < 0.0) {
            if !first {
                f.write_str(", ")?;
            }
            write!(f, "{} slack {:e}", c.name, c.slack)?;
            first = false;
        }
        if first {
            f.write_str("no violated constraint")?;
        }
        Ok(())
    }
}

/// Time budget, WD2 energy budget and nonnegativity, each with its slack.
pub fn feasible(params: &SystemParams, gains: &ChannelGains, alloc: &TimeAllocation, split: &EnergySplit) -> Violations {
    let budget = params.eta * params.p1 * gains.h2 * alloc.t1 + alloc.t2 * phase2_harvest_rate(params, gains);
    let escale = budget.abs();
    let mut constraints = vec![
        Constraint {
            name: "time",
            slack: 1.0 - params.t0 - alloc.total(),
            scale: 1.0,
            floor: 0.0,
        },
        Constraint {
            name: "energy",
            slack: budget - split.total(),
            scale: escale,
            floor: ENERGY_SLACK,
        },
    ];
    let times = ["t1", "t2", "t3", "t41", "t42"];
    for (name, v) in times.into_iter().zip(alloc.as_array()) {
        constraints.push(Constraint {
            name,
            slack: v,
            scale: 1.0,
            floor: 0.0,
        });
    }
    for (name, v) in [("tau41", split.tau41), ("tau42", split.tau42)] {
        constraints.push(Constraint {
            name,
            slack: v,
            scale: escale,
            floor: ENERGY_SLACK,
        });
    }
    Violations { constraints }
}

fn check_restrictions(scheme: SchemeKind, alloc: &TimeAllocation, split: &EnergySplit) -> Result<()> {
    let restricted: &[(&'static str, f64, f64)] = match scheme {
        SchemeKind::AbCoop => &[],
        SchemeKind::ActiveCoop => &[("t2", alloc.t2, TIME_SLACK)],
        SchemeKind::NoCoop => &[
            ("t2", alloc.t2, TIME_SLACK),
            ("t41", alloc.t41, TIME_SLACK),
            ("tau41", split.tau41, ENERGY_SLACK),
        ],
    };
    for &(var, value, slack) in restricted {
        if value > slack {
            return Err(Error::SchemeRestriction {
                scheme: scheme.as_str(),
                var,
                value,
            });
        }
    }
    Ok(())
}

fn check_inputs(params: &SystemParams, gains: &ChannelGains, alloc: &TimeAllocation, split: &EnergySplit, scheme: SchemeKind) -> Result<()> {
    alloc.validate(params)?;
    check_nonneg("tau41", split.tau41)?;
    check_nonneg("tau42", split.tau42)?;
    check_restrictions(scheme, alloc, split)?;
    let v = feasible(params, gains, alloc, split);
    if !v.is_feasible(Violations::DEFAULT_TOL) {
        return Err(Error::Infeasible(v));
    }
    Ok(())
}

/// Rates of a schedule given in (time, energy) form.
pub fn evaluate(
    params: &SystemParams,
    gains: &ChannelGains,
    alloc: &TimeAllocation,
    split: &EnergySplit,
    scheme: SchemeKind,
) -> Result<RateReport> {
    check_inputs(params, gains, alloc, split, scheme)?;
    let consts = ConstantsRho::new(params, gains);
    let r1_bs = if scheme.uses_backscatter() {
        backscatter_bits_per_time(params, gains) * alloc.t2
    } else {
        0.0
    };
    let relay = if scheme.uses_relay() {
        rate_relay(&consts, alloc.t41, split.tau41)
    } else {
        PerspectiveRate {
            bits: 0.0,
            stranded: false,
        }
    };
    Ok(RateReport::assemble(
        scheme,
        r1_bs,
        rate_r12(&consts, alloc.t1, alloc.t3),
        rate_r13(&consts, alloc.t1, alloc.t3),
        relay,
        rate_wd2(&consts, alloc.t42, split.tau42),
    ))
}

/// Transmit powers of WD1 (phase 3) and WD2 (relay and own message).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p3: f64,
    pub p41: f64,
    pub p42: f64,
    /// Energy sits in a zero-length phase 4 slot.
    pub stranded: bool,
}

fn shannon(t: f64, snr: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * snr.ln_1p() * std::f64::consts::LOG2_E
    }
}

/// Rates of a schedule given in (time, power) form, with `P3` implied by
/// WD1 spending its phase-1 energy over `t3`.
pub fn evaluate_physical(
    params: &SystemParams,
    gains: &ChannelGains,
    alloc: &TimeAllocation,
    powers: &PowerAllocation,
    scheme: SchemeKind,
) -> Result<RateReport> {
    let split = EnergySplit {
        tau41: alloc.t41 * powers.p41,
        tau42: alloc.t42 * powers.p42,
    };
    check_inputs(params, gains, alloc, &split, scheme)?;
    let p3 = crate::model::active_power_p3(params, gains, alloc.t1, alloc.t3)?.watts;
    let r1_bs = if scheme.uses_backscatter() {
        backscatter_bits_per_time(params, gains) * alloc.t2
    } else {
        0.0
    };
    let relay_bits = if scheme.uses_relay() {
        shannon(alloc.t41, powers.p41 * gains.h2 / params.n0)
    } else {
        0.0
    };
    Ok(RateReport::assemble(
        scheme,
        r1_bs,
        shannon(alloc.t3, p3 * gains.h12 / params.n0),
        shannon(alloc.t3, p3 * gains.h1 / params.n0),
        PerspectiveRate {
            bits: relay_bits,
            stranded: false,
        },
        PerspectiveRate {
            bits: shannon(alloc.t42, powers.p42 * gains.h2 / params.n0),
            stranded: false,
        },
    ))
}
