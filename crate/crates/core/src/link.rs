//! Backscatter link from WD1 to WD2: energy-detector bit error rate,
//! binary symmetric channel capacity and the resulting phase-2 rate.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, Error, Result};
use crate::model::{ChannelGains, SystemParams};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Below this |x| erfc is computed as 1 - erf from the power series,
/// above it from the continued fraction.
const SERIES_CUTOFF: f64 = 1.0;

/// Complementary error function, absolute error below 1e-15 on the real line.
pub fn erfc(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain {
            what: "erfc argument",
            value: x,
        });
    }
    Ok(erfc_unchecked(x))
}

pub(crate) fn erfc_unchecked(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_unchecked(-x);
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

// erf(x) = 2/sqrt(pi) exp(-x^2) sum_n (2x^2)^n x / (2n+1)!!
// Every term is positive, so there is no cancellation.
fn erf_series(x: f64) -> f64 {
    let two_x2 = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    while term > sum * 1e-17 {
        n += 1;
        term *= two_x2 / f64::from(2 * n + 1);
        sum += term;
    }
    2.0 * FRAC_1_SQRT_PI * (-x * x).exp() * sum
}

// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz algorithm.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let a = f64::from(n) * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() * FRAC_1_SQRT_PI / f
}

/// Argument of erfc in the energy-detector BER:
/// `(1-beta) p1 mu^2 h1 h12 sqrt(N) / (4((1-beta) n0 + ns))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerInputs {
    pub snr_arg: f64,
}

impl BerInputs {
    /// Returns the inputs and whether the argument is the 0/0 case
    /// (beta = 1 with a noiseless decoding branch), which maps to 0.
    pub fn from_system(params: &SystemParams, gains: &ChannelGains) -> (Self, bool) {
        let split = 1.0 - params.beta;
        let noise = split * params.n0 + params.ns;
        let signal = split
            * params.p1
            * params.mu
            * params.mu
            * gains.h1
            * gains.h12
            * f64::from(params.nsamp).sqrt();
        if noise == 0.0 {
            return (Self { snr_arg: 0.0 }, true);
        }
        (
            Self {
                snr_arg: signal / (4.0 * noise),
            },
            false,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ber {
    pub epsilon: f64,
    pub inputs: BerInputs,
    pub degenerate: bool,
}

pub fn backscatter_ber(params: &SystemParams, gains: &ChannelGains) -> Ber {
    let (inputs, degenerate) = BerInputs::from_system(params, gains);
    Ber {
        epsilon: 0.5 * erfc_unchecked(inputs.snr_arg),
        inputs,
        degenerate,
    }
}

/// Capacity of a BSC with crossover probability `epsilon`, in bits per use.
pub fn bsc_capacity(epsilon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain {
            what: "crossover probability",
            value: epsilon,
        });
    }
    Ok(bsc_capacity_unchecked(epsilon))
}

fn bsc_capacity_unchecked(epsilon: f64) -> f64 {
    fn xlog2x(p: f64) -> f64 {
        if p == 0.0 {
            0.0
        } else {
            p * p.log2()
        }
    }
    (1.0 + xlog2x(epsilon) + xlog2x(1.0 - epsilon)).clamp(0.0, 1.0)
}

/// Backscatter throughput `C rb` in bits per unit of phase-2 time.
pub(crate) fn backscatter_bits_per_time(params: &SystemParams, gains: &ChannelGains) -> f64 {
    bsc_capacity_unchecked(backscatter_ber(params, gains).epsilon) * params.rb
}

/// Bits WD1 delivers to WD2 by backscatter during a phase of length `t2`.
pub fn backscatter_rate(params: &SystemParams, gains: &ChannelGains, t2: f64) -> Result<f64> {
    let t2 = check_nonneg("t2", t2)?;
    Ok(backscatter_bits_per_time(params, gains) * t2)
}
