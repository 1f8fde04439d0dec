//! Physical parameters, geometry-to-gain mapping and the energy ledger.
//!
//! All quantities refer to a unit-length transmission block and unit
//! bandwidth, so log-rates are bits per block.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Slack allowed on the total-time constraint of a [`TimeAllocation`].
pub const TIME_SLACK: f64 = 1e-12;

/// Slack allowed on the WD2 energy budget of an [`EnergySplit`].
pub const ENERGY_SLACK: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// HAP transmit power (W).
    pub p1: f64,
    /// Energy harvesting efficiency.
    pub eta: f64,
    /// Power-splitting factor: fraction of received power sent to the harvester.
    pub beta: f64,
    /// Backscatter reflection coefficient.
    pub mu: f64,
    /// Antenna noise power (W).
    pub n0: f64,
    /// Additional noise of the information-decoding branch (W).
    pub ns: f64,
    /// Carrier frequency (Hz).
    pub fc: f64,
    /// Antenna power gain.
    pub ga: f64,
    /// Path-loss exponent.
    pub plexp: f64,
    /// Backscatter bit rate (bits/s).
    pub rb: f64,
    /// Detector samples per backscattered bit.
    pub nsamp: u32,
    /// Channel-estimation overhead as a fraction of the block.
    pub t0: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            p1: 1.0,
            eta: 0.6,
            beta: 0.8,
            mu: 0.8,
            n0: 1e-10,
            ns: 1e-10,
            fc: 915e6,
            ga: 2.0,
            plexp: 2.0,
            rb: 5e4,
            nsamp: 100,
            t0: 0.05,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, value: f64, reason: &'static str) -> Result<()> {
            Err(Error::InvalidParam {
                field,
                value,
                reason,
            })
        }
        let finite = [
            ("p1", self.p1),
            ("eta", self.eta),
            ("beta", self.beta),
            ("mu", self.mu),
            ("n0", self.n0),
            ("ns", self.ns),
            ("fc", self.fc),
            ("ga", self.ga),
            ("plexp", self.plexp),
            ("rb", self.rb),
            ("t0", self.t0),
        ];
        for (field, value) in finite {
            if !value.is_finite() {
                return bad(field, value, "must be finite");
            }
        }
        if self.p1 <= 0.0 {
            return bad("p1", self.p1, "must be > 0");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta", self.eta, "must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta", self.beta, "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad("mu", self.mu, "must lie in [0, 1]");
        }
        if self.n0 <= 0.0 {
            return bad("n0", self.n0, "must be > 0");
        }
        if self.ns < 0.0 {
            return bad("ns", self.ns, "must be >= 0");
        }
        if self.fc <= 0.0 {
            return bad("fc", self.fc, "must be > 0");
        }
        if self.ga <= 0.0 {
            return bad("ga", self.ga, "must be > 0");
        }
        if self.plexp < 1.0 {
            return bad("plexp", self.plexp, "must be >= 1");
        }
        if self.rb <= 0.0 {
            return bad("rb", self.rb, "must be > 0");
        }
        if self.nsamp < 1 {
            return bad("nsamp", self.nsamp as f64, "must be >= 1");
        }
        if !(0.0..1.0).contains(&self.t0) {
            return bad("t0", self.t0, "must lie in [0, 1)");
        }
        Ok(())
    }

    /// Time available to the four phases after channel estimation.
    pub fn usable_time(&self) -> f64 {
        1.0 - self.t0
    }
}

/// Node placement: HAP-to-WD1, HAP-to-WD2 and WD1-to-WD2 distances in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl Geometry {
    pub fn new(d1: f64, d2: f64, d12: f64) -> Result<Self> {
        for (field, value) in [("d1", d1), ("d2", d2), ("d12", d12)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParam {
                    field,
                    value,
                    reason: "distance must be finite and > 0",
                });
            }
        }
        Ok(Self { d1, d2, d12 })
    }

    /// HAP, WD2 and WD1 on a line with WD2 in the middle.
    pub fn collinear(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 > d2) {
            return Err(Error::InvalidParam {
                field: "d1",
                value: d1,
                reason: "collinear placement needs d1 > d2",
            });
        }
        Self::new(d1, d2, d1 - d2)
    }
}

/// Channel power gains h1 (HAP-WD1), h2 (HAP-WD2), h12 (WD1-WD2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub h1: f64,
    pub h2: f64,
    pub h12: f64,
}

impl ChannelGains {
    pub fn new(h1: f64, h2: f64, h12: f64) -> Result<Self> {
        for (field, value) in [("h1", h1), ("h2", h2), ("h12", h12)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParam {
                    field,
                    value,
                    reason: "gain must be finite and >= 0",
                });
            }
        }
        Ok(Self { h1, h2, h12 })
    }
}

/// Phase durations t1, t2, t3, t41, t42 as fractions of the block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeAllocation {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t41: f64,
    pub t42: f64,
}

impl TimeAllocation {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2 + self.t3 + self.t41 + self.t42
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.t1, self.t2, self.t3, self.t41, self.t42]
    }

    /// Checks nonnegativity and the total-time budget.
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        let names = ["t1", "t2", "t3", "t41", "t42"];
        for (what, v) in names.into_iter().zip(self.as_array()) {
            check_nonneg(what, v)?;
        }
        let used = params.t0 + self.total();
        if used > 1.0 + TIME_SLACK {
            return Err(Error::Domain {
                what: "t0 + total time",
                value: used,
            });
        }
        Ok(())
    }
}

/// Energies WD2 spends on relaying (tau41) and on its own message (tau42).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    pub tau41: f64,
    pub tau42: f64,
}

impl EnergySplit {
    pub fn total(&self) -> f64 {
        self.tau41 + self.tau42
    }
}

/// Deterministic path-loss gain `ga * (c / (4 pi d fc))^plexp`.
pub fn channel_gain(d: f64, params: &SystemParams) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain {
            what: "distance",
            value: d,
        });
    }
    let ratio = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * d * params.fc);
    Ok(params.ga * ratio.powf(params.plexp))
}

pub fn gains_from_geometry(geom: &Geometry, params: &SystemParams) -> Result<ChannelGains> {
    ChannelGains::new(
        channel_gain(geom.d1, params)?,
        channel_gain(geom.d2, params)?,
        channel_gain(geom.d12, params)?,
    )
}

/// Energy harvested by (WD1, WD2) while the HAP broadcasts alone for `t1`.
pub fn harvest_phase1(params: &SystemParams, gains: &ChannelGains, t1: f64) -> Result<(f64, f64)> {
    let t1 = check_nonneg("t1", t1)?;
    let k = params.eta * t1 * params.p1;
    Ok((k * gains.h1, k * gains.h2))
}

/// WD2 harvesting rate per unit time during the backscatter phase.
///
/// Direct and reflected paths add in power (uncorrelated phases), averaged
/// over equiprobable bits: `eta beta p1 (2 h2 + mu^2 h1 h12) / 2`.
pub(crate) fn phase2_harvest_rate(params: &SystemParams, gains: &ChannelGains) -> f64 {
    0.5 * params.eta
        * params.beta
        * params.p1
        * (2.0 * gains.h2 + params.mu * params.mu * gains.h1 * gains.h12)
}

/// Energy harvested by WD2 through its splitter while WD1 backscatters for `t2`.
pub fn harvest_phase2(params: &SystemParams, gains: &ChannelGains, t2: f64) -> Result<f64> {
    let t2 = check_nonneg("t2", t2)?;
    Ok(t2 * phase2_harvest_rate(params, gains))
}

/// Total energy WD2 can spend in phase 4: E2^(1) + E2^(2).
pub fn energy_budget(params: &SystemParams, gains: &ChannelGains, alloc: &TimeAllocation) -> Result<f64> {
    let (_, e21) = harvest_phase1(params, gains, alloc.t1)?;
    Ok(e21 + harvest_phase2(params, gains, alloc.t2)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivePower {
    pub watts: f64,
    /// Set when `t3 = 0`: phase 3 does not exist and the power is reported as 0.
    pub phase_absent: bool,
}

/// WD1's transmit power in phase 3 when it spends all of its phase-1 energy.
pub fn active_power_p3(params: &SystemParams, gains: &ChannelGains, t1: f64, t3: f64) -> Result<ActivePower> {
    let (e1, _) = harvest_phase1(params, gains, t1)?;
    let t3 = check_nonneg("t3", t3)?;
    if t3 == 0.0 {
        return Ok(ActivePower {
            watts: 0.0,
            phase_absent: true,
        });
    }
    Ok(ActivePower {
        watts: e1 / t3,
        phase_absent: false,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    // mpmath at 40 digits: 2 * (3e8 / (4 pi d 915e6))^2
    const GAIN_D3: f64 = 1.512_753_197_204_123_3e-4;
    const GAIN_D6: f64 = 3.781_882_993_010_308_3e-5;
    const GAIN_D9: f64 = 1.680_836_885_782_359_2e-5;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn defaults_validate() {
        SystemParams::default().validate().unwrap();
    }

    #[test]
    fn validate_names_bad_field() {
        let p = SystemParams {
            beta: 1.5,
            ..Default::default()
        };
        match p.validate() {
            Err(Error::InvalidParam { field, .. }) => assert_eq!(field, "beta"),
            other => panic!("unexpected {other:?}"),
        }
        let p = SystemParams {
            t0: 1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = SystemParams {
            nsamp: 0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn gain_reference_values() {
        let p = SystemParams::default();
        assert!(rel(channel_gain(3.0, &p).unwrap(), GAIN_D3) < 1e-8);
        assert!(rel(channel_gain(9.0, &p).unwrap(), GAIN_D9) < 1e-8);
        // 4-digit figures
        assert!((channel_gain(3.0, &p).unwrap() - 1.513e-4).abs() < 5e-8);
        assert!((channel_gain(9.0, &p).unwrap() - 1.681e-5).abs() < 5e-9);
    }

    #[test]
    fn gain_inverse_square() {
        let p = SystemParams::default();
        for d in [0.5, 3.0, 7.25, 100.0] {
            let g = channel_gain(d, &p).unwrap();
            let g2 = channel_gain(2.0 * d, &p).unwrap();
            assert!(rel(g2, g / 4.0) < 1e-15);
        }
    }

    #[test]
    fn gain_rejects_nonpositive_distance() {
        let p = SystemParams::default();
        assert!(matches!(channel_gain(0.0, &p), Err(Error::Domain { .. })));
        assert!(channel_gain(-1.0, &p).is_err());
        assert!(channel_gain(f64::NAN, &p).is_err());
    }

    #[test]
    fn gain_monotone_in_distance_frequency_and_antenna() {
        let p = SystemParams::default();
        let g = channel_gain(5.0, &p).unwrap();
        assert!(channel_gain(5.1, &p).unwrap() < g);
        let hi_f = SystemParams {
            fc: 2.4e9,
            ..p.clone()
        };
        assert!(channel_gain(5.0, &hi_f).unwrap() < g);
        let ga3 = SystemParams { ga: 6.0, ..p };
        assert!(rel(channel_gain(5.0, &ga3).unwrap(), 3.0 * g) < 1e-15);
    }

    #[test]
    fn gains_from_collinear_geometry() {
        let p = SystemParams::default();
        let g = gains_from_geometry(&Geometry::collinear(9.0, 3.0).unwrap(), &p).unwrap();
        assert_eq!(g.h12, channel_gain(6.0, &p).unwrap());
        let g = gains_from_geometry(&Geometry::collinear(6.0, 3.0).unwrap(), &p).unwrap();
        assert!(rel(g.h1, GAIN_D6) < 1e-8);
        assert!(rel(g.h2, GAIN_D3) < 1e-8);
        assert!(rel(g.h12, GAIN_D3) < 1e-8);
        let g = gains_from_geometry(&Geometry::new(4.0, 4.0, 1.0).unwrap(), &p).unwrap();
        assert_eq!(g.h1, g.h2);
        assert!(Geometry::collinear(3.0, 3.0).is_err());
        assert!(Geometry::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn phase1_harvest() {
        let p = SystemParams::default();
        let g = ChannelGains::new(1e-4, 2e-4, 1e-5).unwrap();
        assert_eq!(harvest_phase1(&p, &g, 0.0).unwrap(), (0.0, 0.0));
        let (e1, e2) = harvest_phase1(&p, &g, 0.5).unwrap();
        assert!(rel(e1, 3.0e-5) < 1e-12);
        let (d1, d2) = harvest_phase1(&p, &g, 1.0).unwrap();
        assert!(rel(d1, 2.0 * e1) < 1e-15 && rel(d2, 2.0 * e2) < 1e-15);
        assert!(harvest_phase1(&p, &g, -0.1).is_err());
    }

    #[test]
    fn phase2_harvest() {
        let p = SystemParams::default();
        let g = ChannelGains::new(1e-4, 1e-4, 1e-4).unwrap();
        assert_eq!(harvest_phase2(&p, &g, 0.0).unwrap(), 0.0);
        // 0.5 * 0.6 * 0.1 * 0.8 * (2e-4 + 0.64e-8)
        assert!(rel(harvest_phase2(&p, &g, 0.1).unwrap(), 4.800_153_6e-6) < 1e-12);
        let no_reflection = SystemParams { mu: 0.0, ..p.clone() };
        let e = harvest_phase2(&no_reflection, &g, 0.3).unwrap();
        assert!(rel(e, 0.6 * 0.3 * 0.8 * 1e-4) < 1e-14);
        assert!(harvest_phase2(&p, &g, -1e-9).is_err());
    }

    #[test]
    fn phase2_without_reflection_or_split_matches_phase1_rate() {
        let p = SystemParams {
            mu: 0.0,
            beta: 1.0,
            ..Default::default()
        };
        let g = ChannelGains::new(3e-5, 1.5e-4, 4e-5).unwrap();
        let (_, e21) = harvest_phase1(&p, &g, 0.37).unwrap();
        assert!(rel(harvest_phase2(&p, &g, 0.37).unwrap(), e21) < 1e-15);
    }

    #[test]
    fn active_power() {
        let p = SystemParams::default();
        let g = ChannelGains::new(1e-5, 1e-4, 1e-4).unwrap();
        assert_eq!(active_power_p3(&p, &g, 0.0, 0.2).unwrap().watts, 0.0);
        let p3 = active_power_p3(&p, &g, 0.4, 0.2).unwrap();
        assert!(rel(p3.watts, 1.2e-5) < 1e-12);
        assert!(!p3.phase_absent);
        let same = active_power_p3(&p, &g, 0.3, 0.3).unwrap();
        assert!(rel(same.watts, 0.6 * 1e-5) < 1e-15);
        let absent = active_power_p3(&p, &g, 0.3, 0.0).unwrap();
        assert!(absent.phase_absent && absent.watts == 0.0);
    }

    #[test]
    fn time_allocation_budget() {
        let p = SystemParams::default();
        let a = TimeAllocation {
            t1: 0.19,
            t2: 0.19,
            t3: 0.19,
            t41: 0.19,
            t42: 0.19,
        };
        a.validate(&p).unwrap();
        let over = TimeAllocation { t1: 0.2, ..a };
        assert!(over.validate(&p).is_err());
        let neg = TimeAllocation { t3: -0.01, ..a };
        assert!(neg.validate(&p).is_err());
    }
}
