//! Bit-level Monte Carlo of the backscatter energy detector at WD2.
//!
//! Each bit is carried by `N` samples of the information branch of the power
//! splitter, `sqrt(1-beta) y + n_s`, where `y` is the unit-envelope HAP
//! beacon arriving directly and, when the bit is 1, also reflected by WD1
//! with a phase drawn fresh for every bit. WD2 knows its direct channel from
//! channel estimation and removes that component before detection. The
//! detector compares the received energy with the midpoint of the two
//! hypothesis means.
//!
//! Bits are simulated in fixed-size chunks, each with its own ChaCha
//! substream of the seed, so the result does not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::backscatter_ber;
use crate::model::{ChannelGains, SystemParams};

const CHUNK_BITS: u64 = 4096;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorRun {
    pub bits: u64,
    pub seed: u64,
    pub empirical_ber: f64,
    /// Half-width of the Wilson 95% interval.
    pub ci95: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub nsamp: u32,
    pub analytic: f64,
    pub empirical: f64,
    pub ci95: f64,
}

fn wilson_half_width(errors: u64, n: u64) -> f64 {
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

struct Detector {
    nsamp: u32,
    /// Reflected amplitude after the splitter.
    reflected: f64,
    /// Per-component standard deviation of the total noise.
    noise_sd: f64,
    threshold: f64,
}

impl Detector {
    fn new(params: &SystemParams, gains: &ChannelGains) -> Self {
        let split = 1.0 - params.beta;
        let sigma2 = split * params.n0 + params.ns;
        let delta = split * params.p1 * params.mu * params.mu * gains.h1 * gains.h12;
        let n = f64::from(params.nsamp);
        Self {
            nsamp: params.nsamp,
            reflected: delta.sqrt(),
            noise_sd: (sigma2 / 2.0).sqrt(),
            threshold: n * sigma2 + n * delta / 2.0,
        }
    }

    /// Errors among `bits` bits drawn from `rng`.
    fn run(&self, rng: &mut ChaCha8Rng, bits: u64) -> u64 {
        let mut errors = 0;
        for _ in 0..bits {
            let bit: bool = rng.random_bool(0.5);
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let (a_re, a_im) = if bit {
                (self.reflected * phase.cos(), self.reflected * phase.sin())
            } else {
                (0.0, 0.0)
            };
            let mut energy = 0.0;
            for _ in 0..self.nsamp {
                let w_re: f64 = rng.sample(StandardNormal);
                let w_im: f64 = rng.sample(StandardNormal);
                let re = a_re + self.noise_sd * w_re;
                let im = a_im + self.noise_sd * w_im;
                energy += re * re + im * im;
            }
            if (energy > self.threshold) != bit {
                errors += 1;
            }
        }
        errors
    }
}

/// Empirical bit error rate of the detector over `bits` random bits.
pub fn simulate_ber(params: &SystemParams, gains: &ChannelGains, bits: u64, seed: u64) -> Result<DetectorRun> {
    if bits == 0 {
        return Err(Error::Domain {
            what: "bits",
            value: 0.0,
        });
    }
    params.validate()?;
    let det = Detector::new(params, gains);
    let chunks = bits.div_ceil(CHUNK_BITS);
    let errors: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = CHUNK_BITS.min(bits - c * CHUNK_BITS);
            det.run(&mut rng, n)
        })
        .sum();
    Ok(DetectorRun {
        bits,
        seed,
        empirical_ber: errors as f64 / bits as f64,
        ci95: wilson_half_width(errors, bits),
    })
}

/// Analytic and simulated BER for each sample count in `n_list`.
pub fn ber_curve(params: &SystemParams, gains: &ChannelGains, n_list: &[u32], bits: u64, seed: u64) -> Result<Vec<BerRow>> {
    if n_list.is_empty() {
        return Err(Error::InvalidParam {
            field: "n_list",
            value: 0.0,
            reason: "must be nonempty",
        });
    }
    n_list
        .iter()
        .map(|&nsamp| {
            let p = SystemParams {
                nsamp,
                ..params.clone()
            };
            let run = simulate_ber(&p, gains, bits, seed)?;
            Ok(BerRow {
                nsamp,
                analytic: backscatter_ber(&p, gains).epsilon,
                empirical: run.empirical_ber,
                ci95: run.ci95,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid_snr() -> (SystemParams, ChannelGains) {
        let p = SystemParams::default();
        // per-sample reflected-to-noise ratio of 0.1
        let sigma2 = (1.0 - p.beta) * p.n0 + p.ns;
        let prod = 0.1 * sigma2 / ((1.0 - p.beta) * p.p1 * p.mu * p.mu);
        let g = ChannelGains::new(prod.sqrt(), 1e-4, prod.sqrt()).unwrap();
        (p, g)
    }

    #[test]
    fn zero_bits_rejected() {
        let (p, g) = mid_snr();
        assert!(matches!(simulate_ber(&p, &g, 0, 1), Err(Error::Domain { .. })));
        assert!(ber_curve(&p, &g, &[], 10, 1).is_err());
    }

    #[test]
    fn no_reflection_is_a_coin_flip() {
        let (mut p, g) = mid_snr();
        p.mu = 0.0;
        p.nsamp = 10;
        let r = simulate_ber(&p, &g, 20_000, 7).unwrap();
        assert!((r.empirical_ber - 0.5).abs() <= r.ci95, "{r:?}");
    }

    #[test]
    fn noiseless_limit_is_error_free() {
        let (mut p, g) = mid_snr();
        p.n0 = 1e-30;
        p.ns = 1e-30;
        p.nsamp = 10;
        let r = simulate_ber(&p, &g, 5_000, 3).unwrap();
        assert_eq!(r.empirical_ber, 0.0);
        assert!(r.ci95 > 0.0);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let (mut p, g) = mid_snr();
        p.nsamp = 20;
        let a = simulate_ber(&p, &g, 10_000, 99).unwrap();
        let b = simulate_ber(&p, &g, 10_000, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_ber(&p, &g, 10_000, 100).unwrap();
        assert_ne!(a.empirical_ber, c.empirical_ber);
    }

    #[test]
    fn chunking_is_invisible_to_counts() {
        // A run that ends mid-chunk reuses the same streams as a longer run.
        let (mut p, g) = mid_snr();
        p.nsamp = 4;
        let det = Detector::new(&p, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        rng.set_stream(0);
        let first = det.run(&mut rng, CHUNK_BITS);
        let whole = simulate_ber(&p, &g, CHUNK_BITS, 5).unwrap();
        assert_eq!(whole.empirical_ber, first as f64 / CHUNK_BITS as f64);
    }

    #[test]
    fn curve_single_row_and_trend() {
        let (p, g) = mid_snr();
        let one = ber_curve(&p, &g, &[1], 1000, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].nsamp, 1);
        let rows = ber_curve(&p, &g, &[10, 100, 400], 20_000, 11).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].empirical <= w[0].empirical + 2.0 * (w[0].ci95 + w[1].ci95));
            assert!(w[1].analytic < w[0].analytic);
        }
    }

    #[test]
    fn wilson_interval() {
        assert!(wilson_half_width(0, 1) > 0.0);
        // p = 0.5, n = 100
        let h = wilson_half_width(50, 100);
        assert!((h - 0.096_168_47).abs() < 1e-6, "{h}");
    }
}
