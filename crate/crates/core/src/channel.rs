//! Channel impairments: symbol time offset, multipath convolution, AWGN and
//! carrier frequency offset, plus the Doppler relation behind CFO.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::txgen::SampleStream;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Full impairment description for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScenario {
    /// Per-sample SNR in dB. `f64::INFINITY` disables noise.
    pub snr_db: f64,
    /// Multipath taps; empty means an ideal channel.
    pub cir_taps: Vec<Complex64>,
    /// True timing offset in samples.
    pub sto: isize,
    pub cfo: Option<CfoParams>,
    pub rx_branches: usize,
}

impl ChannelScenario {
    pub fn awgn(snr_db: f64, sto: isize) -> Self {
        Self {
            snr_db,
            cir_taps: Vec::new(),
            sto,
            cfo: None,
            rx_branches: 1,
        }
    }

    pub fn validate(&self, n_fft: usize) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid(format!(
                "snr_db must be finite or +inf, got {}",
                self.snr_db
            )));
        }
        if self.sto.unsigned_abs() >= n_fft {
            return Err(Error::invalid(format!(
                "|sto| must be below the IDFT size {n_fft}, got {}",
                self.sto
            )));
        }
        if self
            .cir_taps
            .iter()
            .any(|t| !t.re.is_finite() || !t.im.is_finite())
        {
            return Err(Error::NonFinite("cir_taps"));
        }
        if self.rx_branches == 0 {
            return Err(Error::invalid("rx_branches must be at least 1"));
        }
        if let Some(cfo) = &self.cfo {
            cfo.validate()?;
        }
        Ok(())
    }
}

/// Carrier frequency offset, normalized to the subcarrier spacing, together
/// with the mobility parameters it may have been derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoParams {
    /// Cycles per N samples.
    pub epsilon: f64,
    pub carrier_hz: f64,
    pub velocity_mps: f64,
}

impl CfoParams {
    /// Derives epsilon from receiver speed: `f_d / subcarrier_spacing`.
    pub fn from_doppler(
        velocity_mps: f64,
        carrier_hz: f64,
        subcarrier_spacing_hz: f64,
    ) -> Result<Self> {
        if !subcarrier_spacing_hz.is_finite() || subcarrier_spacing_hz <= 0.0 {
            return Err(Error::invalid("subcarrier spacing must be positive"));
        }
        let p = Self {
            epsilon: doppler_frequency(velocity_mps, carrier_hz) / subcarrier_spacing_hz,
            carrier_hz,
            velocity_mps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() {
            return Err(Error::NonFinite("cfo epsilon"));
        }
        if !self.carrier_hz.is_finite() || self.carrier_hz <= 0.0 {
            return Err(Error::invalid("carrier_hz must be positive"));
        }
        if !self.velocity_mps.is_finite() || self.velocity_mps < 0.0 {
            return Err(Error::invalid("velocity_mps must be non-negative"));
        }
        Ok(())
    }
}

/// The ten-tap Rayleigh channel realization used for the reference runs.
pub struct CirFixture;

impl CirFixture {
    pub const TAPS: [Complex64; 10] = [
        Complex64::new(-0.2338, 0.1770),
        Complex64::new(0.1573, -0.0179),
        Complex64::new(0.1352, 0.1641),
        Complex64::new(-0.1318, -0.2919),
        Complex64::new(-0.1715, 0.3104),
        Complex64::new(0.5049, -0.1209),
        Complex64::new(0.2021, -0.6263),
        Complex64::new(0.0621, 0.1324),
        Complex64::new(0.1568, -0.0362),
        Complex64::new(0.0113, -0.0004),
    ];

    pub fn taps() -> Vec<Complex64> {
        Self::TAPS.to_vec()
    }

    pub fn energy() -> f64 {
        Self::TAPS.iter().map(|t| t.norm_sqr()).sum()
    }
}

/// Moves the receiver's nominal symbol start so that the symbol arrives
/// `delta` samples after it (`delta > 0`) or before it (`delta < 0`).
/// Sample values are untouched; the CP-based estimators then report `delta`.
pub fn apply_sto(mut stream: SampleStream, delta: isize) -> Result<SampleStream> {
    let origin = stream.sample_origin();
    let shifted = origin
        .checked_add_signed(-delta)
        .filter(|&o| o < stream.len())
        .ok_or_else(|| {
            Error::OutOfBounds(format!(
                "sto {delta} moves origin {origin} outside buffer of {} samples",
                stream.len()
            ))
        })?;
    stream.set_origin(shifted);
    Ok(stream)
}

/// Linear convolution of every branch with `taps`, truncated to the input length.
pub fn apply_cir(stream: SampleStream, taps: &[Complex64]) -> Result<SampleStream> {
    if taps.is_empty() {
        return Err(Error::invalid(
            "channel impulse response needs at least one tap",
        ));
    }
    Ok(stream.map_branches(|_, x| convolve_truncated(&x, taps)))
}

fn convolve_truncated(x: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    (0..x.len())
        .map(|n| {
            taps.iter()
                .take(n + 1)
                .enumerate()
                .map(|(k, h)| h * x[n - k])
                .sum()
        })
        .collect()
}

/// Draws `n_taps` i.i.d. taps `(g_re + j g_im)/sqrt(2)`, `g ~ N(0, 1)`, so each
/// tap has unit complex variance. With `normalize`, total tap energy is 1.
pub fn random_cir(n_taps: usize, seed: u64, normalize: bool) -> Result<Vec<Complex64>> {
    if n_taps == 0 {
        return Err(Error::invalid("n_taps must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taps: Vec<Complex64> = (0..n_taps)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * FRAC_1_SQRT_2
        })
        .collect();
    if normalize {
        let energy: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        let scale = energy.sqrt().recip();
        for t in &mut taps {
            *t *= scale;
        }
    }
    Ok(taps)
}

/// Adds circular complex Gaussian noise with variance
/// `payload_power / 10^(snr_db/10)` to every sample of every branch.
/// `snr_db = +inf` returns the stream unchanged.
pub fn add_awgn(stream: SampleStream, snr_db: f64, seed: u64) -> Result<SampleStream> {
    if snr_db == f64::INFINITY {
        return Ok(stream);
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!(
            "snr_db must be finite or +inf, got {snr_db}"
        )));
    }
    let noise_var = stream.payload_power() / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_var / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(stream.map_branches(|_, mut x| {
        for v in &mut x {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(re, im) * sigma;
        }
        x
    }))
}

/// Rotates sample `n` (absolute buffer index) by `exp(j 2 pi epsilon n / N)`.
pub fn apply_cfo(stream: SampleStream, epsilon: f64, n_fft: usize) -> Result<SampleStream> {
    if !epsilon.is_finite() {
        return Err(Error::NonFinite("cfo epsilon"));
    }
    if n_fft == 0 {
        return Err(Error::invalid("n_fft must be positive"));
    }
    let step = 2.0 * PI * epsilon / n_fft as f64;
    Ok(stream.map_branches(|_, mut x| {
        for (n, v) in x.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, step * n as f64);
        }
        x
    }))
}

/// `f_d = v f_c / c`.
pub fn doppler_frequency(velocity_mps: f64, carrier_hz: f64) -> f64 {
    velocity_mps * carrier_hz / SPEED_OF_LIGHT
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txgen::{build_frame, OfdmParams};
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ramp(len: usize) -> SampleStream {
        let x = (0..len).map(|i| c(i as f64 + 1.0, -(i as f64))).collect();
        SampleStream::new(vec![x], len / 2).unwrap()
    }

    #[test]
    fn sto_identity_and_direction() {
        let s = ramp(20);
        assert_eq!(apply_sto(s.clone(), 0).unwrap(), s);
        let late = apply_sto(s.clone(), 3).unwrap();
        assert_eq!(late.sample_origin(), 7);
        assert_eq!(late.branches(), s.branches());
        assert_eq!(apply_sto(s.clone(), -4).unwrap().sample_origin(), 14);
    }

    #[test]
    fn sto_out_of_bounds() {
        let s = ramp(20);
        assert!(matches!(
            apply_sto(s.clone(), 11),
            Err(Error::OutOfBounds(_))
        ));
        assert!(matches!(apply_sto(s, -10), Err(Error::OutOfBounds(_))));
    }

    proptest! {
        #[test]
        fn sto_composes(a in -9isize..9, b in -9isize..9) {
            let s = ramp(40);
            let twice = apply_sto(apply_sto(s.clone(), a).unwrap(), b).unwrap();
            prop_assert_eq!(twice, apply_sto(s, a + b).unwrap());
        }
    }

    #[test]
    fn cir_unit_and_shifted_impulse() {
        let s = ramp(12);
        assert_eq!(apply_cir(s.clone(), &[c(1.0, 0.0)]).unwrap(), s);

        let delayed = apply_cir(s.clone(), &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(delayed.branch(0)[0], c(0.0, 0.0));
        assert_eq!(delayed.branch(0)[1..], s.branch(0)[..11]);
        assert!(apply_cir(s, &[]).is_err());
    }

    #[test]
    fn cir_matches_naive_convolution() {
        let s = ramp(30);
        let taps = CirFixture::taps();
        let out = apply_cir(s.clone(), &taps).unwrap();
        let x = s.branch(0);
        for n in 0..x.len() {
            let mut acc = c(0.0, 0.0);
            for (k, h) in taps.iter().enumerate() {
                if n >= k {
                    acc += h * x[n - k];
                }
            }
            assert!((out.branch(0)[n] - acc).norm() <= 1e-12 * acc.norm().max(1.0));
        }
    }

    #[test]
    fn fixture_energy_pinned() {
        // Exact rational sum of the printed 4-decimal taps: 113464787 / 1e8.
        assert_eq!(CirFixture::TAPS.len(), 10);
        assert!((CirFixture::energy() - 1.134_647_87).abs() < 1e-12);
    }

    #[test]
    fn random_cir_properties() {
        assert_eq!(
            random_cir(10, 4, false).unwrap(),
            random_cir(10, 4, false).unwrap()
        );
        assert_ne!(
            random_cir(10, 4, false).unwrap(),
            random_cir(10, 5, false).unwrap()
        );
        let taps = random_cir(10, 4, true).unwrap();
        let e: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 1e-12);
        assert!(random_cir(0, 1, true).is_err());
    }

    #[test]
    fn random_cir_is_rayleigh() {
        // E|h| for a Rayleigh magnitude with sigma = 1/sqrt(2) is sigma*sqrt(pi/2) = sqrt(pi)/2 ≈ 0.62666
        let taps = random_cir(100_000, 2024, false).unwrap();
        let mean = taps.iter().map(|t| t.norm()).sum::<f64>() / taps.len() as f64;
        let expected = PI.sqrt() / 2.0;
        assert!(
            (mean - expected).abs() < 0.01 * expected,
            "mean |h| = {mean}"
        );
    }

    #[test]
    fn awgn_infinite_snr_is_identity() {
        let frame = build_frame(&OfdmParams::default(), 1).unwrap();
        assert_eq!(add_awgn(frame.clone(), f64::INFINITY, 9).unwrap(), frame);
        assert!(add_awgn(frame.clone(), f64::NAN, 9).is_err());
        assert!(add_awgn(frame, f64::NEG_INFINITY, 9).is_err());
    }

    #[test]
    fn awgn_hits_target_snr() {
        let params = OfdmParams {
            symbols_per_frame: 200,
            ..OfdmParams::default()
        };
        let clean = build_frame(&params, 8).unwrap();
        let noisy = add_awgn(clean.clone(), 10.0, 3).unwrap();
        let noise: f64 = clean
            .branch(0)
            .iter()
            .zip(noisy.branch(0))
            .map(|(a, b)| (b - a).norm_sqr())
            .sum::<f64>()
            / clean.len() as f64;
        let measured_db = 10.0 * (clean.payload_power() / noise).log10();
        assert!((measured_db - 10.0).abs() < 0.1, "{measured_db}");
        assert_eq!(noisy, add_awgn(clean, 10.0, 3).unwrap());
    }

    #[test]
    fn awgn_noise_power_definition() {
        // unit-power constant signal, 10 dB -> per-sample noise variance 0.1
        let n = 400_000;
        let s = SampleStream::new(vec![vec![c(1.0, 0.0); n]], 0).unwrap();
        let noisy = add_awgn(s, 10.0, 17).unwrap();
        let p = noisy
            .branch(0)
            .iter()
            .map(|v| (v - c(1.0, 0.0)).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((p - 0.1).abs() < 0.002, "{p}");
    }

    #[test]
    fn awgn_branches_independent() {
        let frame = build_frame(&OfdmParams::default(), 1)
            .unwrap()
            .replicate(2)
            .unwrap();
        let noisy = add_awgn(frame, 5.0, 1).unwrap();
        assert_ne!(noisy.branch(0), noisy.branch(1));
    }

    #[test]
    fn cfo_rotation_per_sample() {
        let s = SampleStream::new(vec![vec![c(1.0, 0.0); 4]], 0).unwrap();
        // epsilon = 1 over N = 4: a quarter turn per sample
        let out = apply_cfo(s.clone(), 1.0, 4).unwrap();
        let expected = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (o, e) in out.branch(0).iter().zip(expected) {
            assert!((o - e).norm() < 1e-15);
        }
        // epsilon = 0.25 over N = 4: pi/8 per sample
        let out = apply_cfo(s, 0.25, 4).unwrap();
        for (n, o) in out.branch(0).iter().enumerate() {
            assert!((o.arg() - PI * n as f64 / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cfo_zero_identity_and_magnitude() {
        let s = ramp(64);
        assert_eq!(apply_cfo(s.clone(), 0.0, 16).unwrap(), s);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let eps = rng.random_range(-3.0..3.0);
            let out = apply_cfo(s.clone(), eps, 16).unwrap();
            for (a, b) in s.branch(0).iter().zip(out.branch(0)) {
                assert!((a.norm() - b.norm()).abs() <= 1e-15 * a.norm());
            }
        }
        assert!(apply_cfo(s, f64::NAN, 16).is_err());
    }

    #[test]
    fn doppler() {
        assert_eq!(doppler_frequency(0.0, 2.4e9), 0.0);
        assert_eq!(doppler_frequency(299.792458, 1e9), 1000.0);
        assert_eq!(doppler_frequency(SPEED_OF_LIGHT, 5.8e9), 5.8e9);
        let cfo = CfoParams::from_doppler(30.0, 2e9, 15e3).unwrap();
        assert!((cfo.epsilon - 30.0 * 2e9 / SPEED_OF_LIGHT / 15e3).abs() < 1e-15);
        assert!(CfoParams::from_doppler(-1.0, 2e9, 15e3).is_err());
    }

    #[test]
    fn scenario_validation() {
        assert!(ChannelScenario::awgn(10.0, 3).validate(128).is_ok());
        assert!(ChannelScenario::awgn(f64::INFINITY, 3)
            .validate(128)
            .is_ok());
        assert!(ChannelScenario::awgn(10.0, 128).validate(128).is_err());
        assert!(ChannelScenario::awgn(f64::NAN, 0).validate(128).is_err());
    }
}
